#![no_main]

use fwnmpc::sysid::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(ds) = Dataset::parse_csv(text) else {
        return;
    };
    let _ = ds.dt();
    let out = ds.to_csv_string().expect("accepted dataset serializes");
    let back = Dataset::parse_csv(&out).expect("output parses");
    assert_eq!(back.to_csv_string().unwrap(), out);
});

#![no_main]

use fwnmpc::sim::{parse_scenario, scenario_to_toml};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(scenario) = parse_scenario(text) else {
        return;
    };
    // an accepted scenario must serialize, and the explicit form is a fixed point
    let explicit = scenario_to_toml(&scenario).expect("accepted scenario serializes");
    let again = parse_scenario(&explicit).expect("explicit form parses");
    assert_eq!(scenario_to_toml(&again).unwrap(), explicit);
});

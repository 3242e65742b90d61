#![no_main]

use fwnmpc::model::{model_params_to_toml, parse_model_params};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(params) = parse_model_params(text) {
        let out = model_params_to_toml(&params).expect("accepted parameters serialize");
        assert_eq!(parse_model_params(&out).expect("output parses"), params);
    }
});

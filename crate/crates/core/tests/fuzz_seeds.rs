//! Fuzz corpus seeds named `reject_*` must be refused; every other seed must
//! parse and satisfy the same round-trip properties the fuzz targets assert.

use fwnmpc::model::{model_params_to_toml, parse_model_params};
use fwnmpc::sim::{parse_scenario, scenario_to_toml};
use fwnmpc::sysid::Dataset;
use std::fs;
use std::path::PathBuf;

fn is_reject(p: &std::path::Path) -> bool {
    p.file_name().unwrap().to_str().unwrap().starts_with("reject_")
}

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn scenario_seeds() {
    for (p, text) in seeds("parse_scenario") {
        if is_reject(&p) {
            assert!(parse_scenario(&text).is_err(), "{}", p.display());
            continue;
        }
        let s = parse_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let explicit = scenario_to_toml(&s).unwrap();
        let again = parse_scenario(&explicit).unwrap();
        assert_eq!(scenario_to_toml(&again).unwrap(), explicit, "{}", p.display());
    }
}

#[test]
fn model_param_seeds() {
    for (p, text) in seeds("parse_model_params") {
        if is_reject(&p) {
            assert!(parse_model_params(&text).is_err(), "{}", p.display());
            continue;
        }
        let params = parse_model_params(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let out = model_params_to_toml(&params).unwrap();
        assert_eq!(parse_model_params(&out).unwrap(), params, "{}", p.display());
    }
}

#[test]
fn dataset_seeds() {
    for (p, text) in seeds("parse_dataset_csv") {
        if is_reject(&p) {
            assert!(Dataset::parse_csv(&text).is_err(), "{}", p.display());
            continue;
        }
        let ds = Dataset::parse_csv(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let out = ds.to_csv_string().unwrap();
        let back = Dataset::parse_csv(&out).unwrap();
        assert_eq!(back, ds, "{}", p.display());
    }
}

use super::ModelParams;
use crate::Error;
use std::path::Path;

/// Parses a model parameter file.
///
/// The file is TOML with three tables named after the [`ModelParams`] fields:
///
/// ```toml
/// [closed_loop]
/// l_p = -11.0
/// # ...
/// [open_loop]
/// c_t1 = 30.0
/// # ...
/// [constants]
/// m = 2.65
/// g = 9.81
/// s = 0.47
/// rho_air = 1.225
/// ```
///
/// Unknown or missing keys are errors.
pub fn parse_model_params(text: &str) -> Result<ModelParams, Error> {
    let params: ModelParams = toml::from_str(text)?;
    params.validate()?;
    Ok(params)
}

pub fn load_model_params(path: &Path) -> Result<ModelParams, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_params(&text)
}

pub fn model_params_to_toml(params: &ModelParams) -> Result<String, Error> {
    Ok(toml::to_string(params)?)
}

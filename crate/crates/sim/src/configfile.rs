//! Plain `key = value` scenario configuration files.
//!
//! One field per line; blank lines and `#` comments are allowed; unknown
//! keys are rejected so typos fail loudly.

use sda_core::{ScenarioConfig, TreeType};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`")]
    InvalidValue { line: usize, key: String },
    #[error("configuration failed validation: {0}")]
    Invalid(#[from] sda_core::config::ConfigError),
}

/// Parse a config file's text over a base configuration.
pub fn parse_config(text: &str, base: ScenarioConfig) -> Result<ScenarioConfig, ConfigFileError> {
    let mut config = base;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigFileError::Syntax(lineno))?;
        apply_field(&mut config, key.trim(), value.trim(), lineno)?;
    }
    config.validate()?;
    Ok(config)
}

fn apply_field(
    config: &mut ScenarioConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigFileError> {
    fn parse<T: std::str::FromStr>(
        value: &str,
        key: &str,
        line: usize,
    ) -> Result<T, ConfigFileError> {
        value.parse().map_err(|_| ConfigFileError::InvalidValue {
            line,
            key: key.to_string(),
        })
    }

    match key {
        "tree_type" => config.tree_type = parse::<TreeType>(value, key, line)?,
        "num_nodes" => config.num_nodes = parse(value, key, line)?,
        "area_width" => config.area_width = parse(value, key, line)?,
        "area_height" => config.area_height = parse(value, key, line)?,
        "sink_x" => config.sink_x = parse(value, key, line)?,
        "sink_y" => config.sink_y = parse(value, key, line)?,
        "trans_range" => config.trans_range = parse(value, key, line)?,
        "vmax" => config.vmax = parse(value, key, line)?,
        "horizon" => config.horizon = parse(value, key, line)?,
        "rounds_per_second" => config.rounds_per_second = parse(value, key, line)?,
        "mean_data" => config.mean_data = parse(value, key, line)?,
        "stdd_data" => config.stdd_data = parse(value, key, line)?,
        "max_bw_size" => config.max_bw_size = parse(value, key, line)?,
        "max_tsb_size" => config.max_tsb_size = parse(value, key, line)?,
        "trust_threshold" => config.trust_threshold = parse(value, key, line)?,
        "history_weight" => config.history_weight = parse(value, key, line)?,
        "max_cf_nodes" => config.max_cf_nodes = parse(value, key, line)?,
        "cf_prob" => config.cf_prob = parse(value, key, line)?,
        "cf_start_round" => config.cf_start_round = parse(value, key, line)?,
        "trust" => {
            config.trust_enabled = match value {
                "on" => true,
                "off" => false,
                _ => {
                    return Err(ConfigFileError::InvalidValue {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        "seed" => config.seed = parse(value, key, line)?,
        _ => {
            return Err(ConfigFileError::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

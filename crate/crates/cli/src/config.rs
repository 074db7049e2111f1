//! Detection config files: a flat JSON object whose keys are the
//! `DetectionConfig` field names. Missing keys keep their defaults.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use tssm_core::{DetectionConfig, PairMode};

use crate::Failure;

pub const KEYS: &[&str] = &[
    "th_w_factor",
    "th_w_abs",
    "th_sim",
    "min_rows",
    "adj_fraction",
    "min_columns",
    "gap_factor",
    "noise_min_area",
    "line_overlap",
    "pair_mode",
];

fn number(key: &str, v: &Value) -> Result<f64, String> {
    v.as_f64()
        .ok_or_else(|| format!("{key}: expected a number, got {v}"))
}

fn count(key: &str, v: &Value) -> Result<u64, String> {
    v.as_u64()
        .ok_or_else(|| format!("{key}: expected a non-negative integer, got {v}"))
}

/// Applies every key of `obj` on top of `cfg`. With `strict`, unknown keys
/// are rejected; otherwise they are logged and ignored.
pub fn apply_object(
    cfg: &mut DetectionConfig,
    obj: &Map<String, Value>,
    strict: bool,
) -> Result<(), String> {
    for (key, v) in obj {
        let k = key.as_str();
        match k {
            "th_w_factor" => cfg.th_w_factor = number(k, v)?,
            "th_w_abs" => {
                cfg.th_w_abs = if v.is_null() {
                    None
                } else {
                    Some(number(k, v)?)
                };
            }
            "th_sim" => cfg.th_sim = number(k, v)?,
            "min_rows" => cfg.min_rows = count(k, v)? as usize,
            "adj_fraction" => cfg.adj_fraction = number(k, v)?,
            "min_columns" => cfg.min_columns = count(k, v)? as usize,
            "gap_factor" => cfg.gap_factor = number(k, v)?,
            "noise_min_area" => cfg.noise_min_area = count(k, v)?,
            "line_overlap" => cfg.line_overlap = number(k, v)?,
            "pair_mode" => {
                cfg.pair_mode = serde_json::from_value::<PairMode>(v.clone())
                    .map_err(|_| format!("{k}: expected \"adjacent\" or \"all_pairs\", got {v}"))?;
            }
            _ if strict => {
                return Err(format!(
                    "{k}: unknown key (expected one of {})",
                    KEYS.join(", ")
                ));
            }
            _ => log::warn!("ignoring unknown config key `{k}`"),
        }
    }
    Ok(())
}

pub fn parse_config(text: &str, strict: bool) -> Result<DetectionConfig, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("not valid JSON: {e}"))?;
    let Value::Object(obj) = value else {
        return Err("expected a JSON object of config keys".into());
    };
    let mut cfg = DetectionConfig::default();
    apply_object(&mut cfg, &obj, strict)?;
    Ok(cfg)
}

pub fn load_config(path: &Path, strict: bool) -> Result<DetectionConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::unreadable(format!("{}: {e}", path.display())))?;
    parse_config(&text, strict)
        .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
}

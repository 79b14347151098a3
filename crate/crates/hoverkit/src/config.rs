//! JSON scenario files.

use std::fs;
use std::path::Path;

use hoverkit_core::sim::ScenarioConfig;
use hoverkit_core::zupt::DetectorConfig;

use crate::{AppError, AppResult};

/// Reads a scenario; missing keys take their defaults.
pub fn load(path: &Path) -> AppResult<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> AppResult<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| AppError::Config(e.to_string()))?;
    Ok(cfg)
}

/// The default scenario as pretty JSON.
pub fn default_json() -> String {
    serde_json::to_string_pretty(&ScenarioConfig::default()).expect("default config serializes")
}

/// `off`, `strict` or `permissive`.
pub fn detector_from_name(name: &str) -> AppResult<Option<DetectorConfig>> {
    match name {
        "off" | "none" => Ok(None),
        other => DetectorConfig::preset(other)
            .map(Some)
            .ok_or_else(|| AppError::Config(format!("unknown detector preset `{other}`"))),
    }
}

/// Comma-separated list of floats.
pub fn parse_list(text: &str) -> AppResult<Vec<f64>> {
    text.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| AppError::Config(format!("`{s}`: {e}")))).collect()
}

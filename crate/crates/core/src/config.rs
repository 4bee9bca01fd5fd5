//! Engine configuration: a flat TOML key/value file whose keys mirror
//! [`AnatConfig`] and [`KinConfig`], plus the optional calibration
//! percentile. Missing keys keep their defaults.
//!
//! ```toml
//! tau = 0.3
//! gaussian_sigma_frames = 2.0
//! phi_lambda_local = 100.0
//! percentile = 1.0
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::anatomical::AnatConfig;
use crate::calibration::PercentileRange;
use crate::error::{Error, Result};
use crate::kinematics::KinConfig;

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "HUMEVAL_CONFIG";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineConfig {
    pub anat: AnatConfig,
    pub kin: KinConfig,
    /// Symmetric calibration percentile; `None` means exact extrema.
    pub percentile: Option<f64>,
}

const KNOWN_KEYS: &[&str] = &[
    "tau",
    "gaussian_sigma_frames",
    "gaussian_truncate",
    "phi_lambda_local",
    "phi_lambda_global",
    "heading_epsilon",
    "world_up",
    "forward_axis",
    "percentile",
];

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(config_err)?;
        if let Some(key) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key \"{key}\"")));
        }
        let value = toml::Value::Table(table);
        let extra: ExtraKeys = value.clone().try_into().map_err(config_err)?;
        let cfg = EngineConfig {
            anat: AnatConfig {
                tau: extra.tau.unwrap_or(AnatConfig::default().tau),
            },
            kin: value.try_into().map_err(config_err)?,
            percentile: extra.percentile,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.anat.validate()?;
        self.kin.validate()?;
        self.percentile_range().map(|_| ())
    }

    pub fn percentile_range(&self) -> Result<Option<PercentileRange>> {
        self.percentile.map(PercentileRange::symmetric).transpose()
    }
}

#[derive(Deserialize)]
struct ExtraKeys {
    tau: Option<f64>,
    percentile: Option<f64>,
}

fn config_err(e: toml::de::Error) -> Error {
    Error::Config(e.to_string())
}

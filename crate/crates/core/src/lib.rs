//! Coarse-to-fine quality scoring for human-centric generated video.
//!
//! A VLM yes/no prior gates two fine-grained branches: anatomical
//! correctness from whole-body keypoint confidences, and motion stability
//! from recovered 3D joint kinematics. Raw branch scores are min-max
//! calibrated against real footage before fusion. The [`harness`] module
//! correlates fused scores with human ratings and builds leaderboards.

pub mod anatomical;
pub mod calibration;
pub mod config;
pub mod error;
pub mod features;
pub mod harness;
pub mod kinematics;
pub mod pipeline;
pub mod prior;
pub mod synth;

pub use calibration::CalibrationSet;
pub use config::EngineConfig;
pub use error::{Error, Result};
pub use features::ScoreReport;

/// Rejects values outside `[0, 1]` (including NaN).
pub(crate) fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} = {v} outside [0,1]")))
    }
}

//! Three-level hysteresis current control with a dead zone.
//!
//! For a positive error `e = i* − i` the controller works in the lower band
//! through the `+1` and `0` levels; for a negative error in the upper band
//! through `−1` and `0`. Inside `(δ, h)` the decision depends on the sign of the
//! error trend `ce = e(k) − e(k−1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverter::PoleLevel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HysteresisConfig {
    /// Band half-width `h` (A).
    pub band: f64,
    /// Dead zone `δ` (A).
    pub dead_zone: f64,
}

impl HysteresisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dead_zone.is_finite() && self.dead_zone > 0.0) {
            return Err(Error::invalid(
                "dead_zone",
                format!("must be finite and > 0, got {}", self.dead_zone),
            ));
        }
        if !(self.band.is_finite() && self.band > self.dead_zone) {
            return Err(Error::invalid(
                "band",
                format!(
                    "must be finite and > dead_zone ({}), got {}",
                    self.dead_zone, self.band
                ),
            ));
        }
        Ok(())
    }
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self {
            band: 5.0,
            dead_zone: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseHccState {
    pub last_output: PoleLevel,
    pub last_error: f64,
}

/// Band logic for one sample, before the transition guard.
///
/// Returns `None` when no clause applies, i.e. a zero error trend strictly
/// inside the band. An exactly zero error falls in the dead zone.
pub fn band_decision(error: f64, change: f64, cfg: &HysteresisConfig) -> Option<PoleLevel> {
    let (h, d) = (cfg.band, cfg.dead_zone);
    if error > 0.0 {
        if error >= h {
            Some(PoleLevel::Positive)
        } else if error <= d || change > 0.0 {
            Some(PoleLevel::Zero)
        } else if change < 0.0 {
            Some(PoleLevel::Positive)
        } else {
            None
        }
    } else if error < 0.0 {
        if error <= -h {
            Some(PoleLevel::Negative)
        } else if error >= -d || change < 0.0 {
            Some(PoleLevel::Zero)
        } else if change > 0.0 {
            Some(PoleLevel::Negative)
        } else {
            None
        }
    } else {
        Some(PoleLevel::Zero)
    }
}

/// Combines the band decision with the hold rule and the transition guard:
/// an undecided sample keeps the previous level, and a request to jump
/// directly between the positive and negative bus passes through zero first.
pub fn switching_logic(
    error: f64,
    change: f64,
    previous: PoleLevel,
    cfg: &HysteresisConfig,
) -> PoleLevel {
    match band_decision(error, change, cfg) {
        None => previous,
        Some(next) if previous != PoleLevel::Zero && next == -previous => PoleLevel::Zero,
        Some(next) => next,
    }
}

pub fn phase_step(
    state: PhaseHccState,
    error: f64,
    cfg: &HysteresisConfig,
) -> (PoleLevel, PhaseHccState) {
    let change = error - state.last_error;
    let out = switching_logic(error, change, state.last_output, cfg);
    (
        out,
        PhaseHccState {
            last_output: out,
            last_error: error,
        },
    )
}

pub fn three_phase_step(
    states: [PhaseHccState; 3],
    errors: [f64; 3],
    cfg: &HysteresisConfig,
) -> ([PoleLevel; 3], [PhaseHccState; 3]) {
    let stepped: [(PoleLevel, PhaseHccState); 3] =
        std::array::from_fn(|k| phase_step(states[k], errors[k], cfg));
    (stepped.map(|s| s.0), stepped.map(|s| s.1))
}

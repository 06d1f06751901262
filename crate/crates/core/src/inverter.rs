//! Ideal three-level neutral-point-clamped inverter.
//!
//! Each phase leg connects its terminal to the positive bus, the DC-link
//! midpoint or the negative bus. The midpoint is a perfect zero reference.

use std::ops::Neg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-valued per-phase command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PoleLevel {
    Negative,
    #[default]
    Zero,
    Positive,
}

impl PoleLevel {
    pub const ALL: [PoleLevel; 3] = [PoleLevel::Negative, PoleLevel::Zero, PoleLevel::Positive];

    pub fn value(self) -> i8 {
        match self {
            PoleLevel::Negative => -1,
            PoleLevel::Zero => 0,
            PoleLevel::Positive => 1,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            -1 => Some(PoleLevel::Negative),
            0 => Some(PoleLevel::Zero),
            1 => Some(PoleLevel::Positive),
            _ => None,
        }
    }
}

impl Neg for PoleLevel {
    type Output = PoleLevel;

    fn neg(self) -> PoleLevel {
        match self {
            PoleLevel::Negative => PoleLevel::Positive,
            PoleLevel::Zero => PoleLevel::Zero,
            PoleLevel::Positive => PoleLevel::Negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverterConfig {
    /// Total DC-link voltage (V).
    pub v_dc: f64,
}

impl InverterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v_dc.is_finite() && self.v_dc > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "v_dc",
                format!("must be finite and > 0, got {}", self.v_dc),
            ))
        }
    }
}

impl Default for InverterConfig {
    fn default() -> Self {
        // Peak of a 480 V line voltage, rounded up.
        Self { v_dc: 680.0 }
    }
}

/// Pole voltage measured from the DC-link midpoint.
pub fn pole_voltage(level: PoleLevel, cfg: &InverterConfig) -> f64 {
    match level {
        PoleLevel::Positive => 0.5 * cfg.v_dc,
        PoleLevel::Zero => 0.0,
        PoleLevel::Negative => -0.5 * cfg.v_dc,
    }
}

/// Line-to-line voltages `(V_ab, V_bc, V_ca)`.
pub fn line_voltages(levels: [PoleLevel; 3], cfg: &InverterConfig) -> [f64; 3] {
    let [a, b, c] = levels.map(|l| pole_voltage(l, cfg));
    [a - b, b - c, c - a]
}

/// Phase voltages of a star-connected load with an isolated neutral.
///
/// Computed as integer multiples of `V_dc / 6` so the three values sum to zero
/// exactly.
pub fn phase_voltages(levels: [PoleLevel; 3], cfg: &InverterConfig) -> [f64; 3] {
    let sum: i8 = levels.iter().map(|l| l.value()).sum();
    let unit = cfg.v_dc / 6.0;
    levels.map(|l| unit * f64::from(3 * l.value() - sum))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransitionReport {
    /// Phases that jumped directly between the positive and negative bus.
    pub illegal: [bool; 3],
    /// Level changes per phase (0 or 1).
    pub events: [u8; 3],
}

impl TransitionReport {
    pub fn is_legal(&self) -> bool {
        !self.illegal.iter().any(|&x| x)
    }
}

pub fn audit_transition(prev: [PoleLevel; 3], next: [PoleLevel; 3]) -> TransitionReport {
    let mut report = TransitionReport::default();
    for k in 0..3 {
        if prev[k] != next[k] {
            report.events[k] = 1;
            report.illegal[k] = (prev[k].value() - next[k].value()).abs() == 2;
        }
    }
    report
}

/// Running transition counters for one simulation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionAuditor {
    pub illegal: [u64; 3],
    pub switching_events: [u64; 3],
}

impl TransitionAuditor {
    pub fn record(&mut self, prev: [PoleLevel; 3], next: [PoleLevel; 3]) -> TransitionReport {
        let report = audit_transition(prev, next);
        for k in 0..3 {
            self.illegal[k] += u64::from(report.illegal[k]);
            self.switching_events[k] += u64::from(report.events[k]);
        }
        report
    }

    pub fn total_illegal(&self) -> u64 {
        self.illegal.iter().sum()
    }

    pub fn total_events(&self) -> u64 {
        self.switching_events.iter().sum()
    }
}

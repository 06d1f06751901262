//! Indirect field-oriented control: current set-points, slip feedforward and
//! synchronous angle integration.
//!
//! dq → abc uses the amplitude-invariant convention
//! `i_a = i_q cos θ_e + i_d sin θ_e`, with phases b and c shifted by −120° and
//! +120°. In the stationary space-vector frame of [`crate::machine`] this puts
//! the d axis at `θ_e − π/2`.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{wrap_angle, MachineParams};

const PHASE_SHIFT: f64 = TAU / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocState {
    /// Synchronous angle in `[0, 2π)`.
    pub theta_e: f64,
    /// Rotor flux reference (Wb).
    pub lambda_r_ref: f64,
}

impl FocState {
    pub fn new(lambda_r_ref: f64) -> Self {
        Self {
            theta_e: 0.0,
            lambda_r_ref,
        }
    }

    fn checked_flux(&self) -> Result<f64> {
        if self.lambda_r_ref.is_finite() && self.lambda_r_ref > 0.0 {
            Ok(self.lambda_r_ref)
        } else {
            Err(Error::invalid(
                "flux_ref",
                format!(
                    "rotor flux reference must be > 0, got {}",
                    self.lambda_r_ref
                ),
            ))
        }
    }
}

/// Default rotor flux reference (Wb).
pub const DEFAULT_FLUX_REF: f64 = 0.96;

/// Flux and torque current set-points `(i_ds*, i_qs*)` for a torque command.
///
/// `i_qs*` is the exact inverse of [`torque_from_rotor_flux`].
pub fn current_references(
    torque_ref: f64,
    foc: &FocState,
    params: &MachineParams,
) -> Result<(f64, f64)> {
    let flux = foc.checked_flux()?;
    let i_ds = flux / params.l_m;
    let i_qs =
        2.0 * params.l_r() * torque_ref / (3.0 * f64::from(params.pole_pairs) * params.l_m * flux);
    Ok((i_ds, i_qs))
}

/// Slip frequency set-point (electrical rad/s).
pub fn slip_frequency(i_qs_ref: f64, foc: &FocState, params: &MachineParams) -> Result<f64> {
    let flux = foc.checked_flux()?;
    Ok(params.r_r * params.l_m * i_qs_ref / (params.l_r() * flux))
}

/// Torque of a rotor-flux-oriented machine: `3/2 · p · L_m / L_r · λ_r · i_qs`.
pub fn torque_from_rotor_flux(lambda_r: f64, i_qs: f64, params: &MachineParams) -> f64 {
    1.5 * f64::from(params.pole_pairs) * params.l_m / params.l_r() * lambda_r * i_qs
}

/// Integrates the synchronous speed `ω_r + ω_sl` (both electrical) over `dt`.
pub fn advance_angle(foc: &FocState, omega_r_electrical: f64, omega_sl: f64, dt: f64) -> FocState {
    FocState {
        theta_e: wrap_angle(foc.theta_e + (omega_r_electrical + omega_sl) * dt),
        ..*foc
    }
}

pub fn dq_to_abc(i_ds: f64, i_qs: f64, theta_e: f64) -> [f64; 3] {
    [0.0, -PHASE_SHIFT, PHASE_SHIFT].map(|shift| {
        let (s, c) = (theta_e + shift).sin_cos();
        i_qs * c + i_ds * s
    })
}

/// Rotates a stationary-frame vector (machine convention) into the
/// controller's synchronous frame, returning `(d, q)`.
pub fn stationary_to_synchronous(d_s: f64, q_s: f64, theta_e: f64) -> (f64, f64) {
    let (s, c) = (theta_e - FRAC_PI_2).sin_cos();
    (d_s * c + q_s * s, -d_s * s + q_s * c)
}

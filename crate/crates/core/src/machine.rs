//! Induction machine model in an arbitrary dq reference frame.
//!
//! The state vector holds the four flux linkages, the electrical rotor speed
//! and the electrical rotor angle. Currents are recovered from the fluxes by
//! inverting the per-axis inductance matrix. Voltages are expressed in a frame
//! rotating at `omega_frame`; `omega_frame = 0` is the stationary frame with the
//! d axis aligned to phase a.
//!
//! Space-vector convention: `x = x_d + j x_q`, so the stator equations read
//! `v_d = R_s i_d + dλ_d/dt − ω_k λ_q` and `v_q = R_s i_q + dλ_q/dt + ω_k λ_d`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted integration step.
pub const MAX_STEP: f64 = 50e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineParams {
    /// Stator resistance (Ω).
    pub r_s: f64,
    /// Rotor resistance (Ω).
    pub r_r: f64,
    /// Stator leakage inductance (H).
    pub l_ls: f64,
    /// Rotor leakage inductance (H).
    pub l_lr: f64,
    /// Mutual inductance (H).
    pub l_m: f64,
    pub pole_pairs: u32,
    /// Rotor inertia (kg·m²).
    pub inertia: f64,
    /// Viscous friction (N·m·s/rad), applied to mechanical speed.
    pub friction: f64,
}

impl MachineParams {
    /// 50 HP, 480 V, 50 Hz, two pole pair machine. The 0.8 mH figures are
    /// leakage inductances.
    pub const fn reference_50hp() -> Self {
        Self {
            r_s: 0.087,
            r_r: 0.228,
            l_ls: 0.8e-3,
            l_lr: 0.8e-3,
            l_m: 34.7e-3,
            pole_pairs: 2,
            inertia: 1.662,
            friction: 0.0,
        }
    }

    /// Total stator inductance.
    pub fn l_s(&self) -> f64 {
        self.l_ls + self.l_m
    }

    /// Total rotor inductance.
    pub fn l_r(&self) -> f64 {
        self.l_lr + self.l_m
    }

    /// Leakage coefficient `1 − L_m² / (L_s L_r)`.
    pub fn sigma(&self) -> f64 {
        1.0 - self.l_m * self.l_m / (self.l_s() * self.l_r())
    }

    fn determinant(&self) -> f64 {
        self.l_s() * self.l_r() - self.l_m * self.l_m
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_s", self.r_s),
            ("r_r", self.r_r),
            ("l_ls", self.l_ls),
            ("l_lr", self.l_lr),
            ("l_m", self.l_m),
            ("inertia", self.inertia),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    field,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if self.pole_pairs == 0 {
            return Err(Error::invalid("pole_pairs", "must be at least 1"));
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::invalid(
                "friction",
                format!("must be finite and >= 0, got {}", self.friction),
            ));
        }
        let sigma = self.sigma();
        if !(self.determinant() > 0.0 && sigma > 0.0 && sigma < 1.0) {
            return Err(Error::invalid(
                "l_m",
                format!("inductance matrix is singular or indefinite (sigma = {sigma})"),
            ));
        }
        Ok(())
    }
}

impl Default for MachineParams {
    fn default() -> Self {
        Self::reference_50hp()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    pub lambda_ds: f64,
    pub lambda_qs: f64,
    pub lambda_dr: f64,
    pub lambda_qr: f64,
    /// Electrical rotor speed (rad/s).
    pub omega_r: f64,
    /// Electrical rotor angle in `[0, 2π)`.
    pub theta_r: f64,
}

impl MachineState {
    /// Mechanical shaft speed (rad/s).
    pub fn mechanical_speed(&self, params: &MachineParams) -> f64 {
        self.omega_r / f64::from(params.pole_pairs)
    }

    fn is_finite(&self) -> bool {
        [
            self.lambda_ds,
            self.lambda_qs,
            self.lambda_dr,
            self.lambda_qr,
            self.omega_r,
            self.theta_r,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Currents {
    pub i_ds: f64,
    pub i_qs: f64,
    pub i_dr: f64,
    pub i_qr: f64,
}

/// Voltages and load applied over one integration step (zero-order hold).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MachineInput {
    pub v_ds: f64,
    pub v_qs: f64,
    /// Angular speed of the frame `v_ds`, `v_qs` are expressed in (rad/s).
    pub omega_frame: f64,
    /// Load torque (N·m).
    pub load_torque: f64,
}

/// Solves the flux-current relations for the four winding currents.
pub fn currents_from_fluxes(state: &MachineState, params: &MachineParams) -> Result<Currents> {
    let det = params.determinant();
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::invalid(
            "l_m",
            format!("inductance matrix is singular (determinant {det})"),
        ));
    }
    Ok(solve_currents(state, params, det))
}

#[inline]
fn solve_currents(state: &MachineState, params: &MachineParams, det: f64) -> Currents {
    let (l_s, l_r, l_m) = (params.l_s(), params.l_r(), params.l_m);
    Currents {
        i_ds: (l_r * state.lambda_ds - l_m * state.lambda_dr) / det,
        i_qs: (l_r * state.lambda_qs - l_m * state.lambda_qr) / det,
        i_dr: (l_s * state.lambda_dr - l_m * state.lambda_ds) / det,
        i_qr: (l_s * state.lambda_qr - l_m * state.lambda_qs) / det,
    }
}

/// Torque from the current cross product, scaled by `3/2 · pole_pairs`.
pub fn torque_from_currents(currents: &Currents, params: &MachineParams) -> f64 {
    1.5 * f64::from(params.pole_pairs)
        * params.l_m
        * (currents.i_qs * currents.i_dr - currents.i_ds * currents.i_qr)
}

pub fn electromagnetic_torque(state: &MachineState, params: &MachineParams) -> Result<f64> {
    Ok(torque_from_currents(
        &currents_from_fluxes(state, params)?,
        params,
    ))
}

/// Magnetic energy stored in the windings plus rotor kinetic energy (J).
pub fn stored_energy(state: &MachineState, params: &MachineParams) -> Result<f64> {
    let i = currents_from_fluxes(state, params)?;
    let magnetic = 0.75
        * (state.lambda_ds * i.i_ds
            + state.lambda_qs * i.i_qs
            + state.lambda_dr * i.i_dr
            + state.lambda_qr * i.i_qr);
    let omega_m = state.mechanical_speed(params);
    Ok(magnetic + 0.5 * params.inertia * omega_m * omega_m)
}

#[derive(Clone, Copy)]
struct Derivative([f64; 6]);

fn derivative(x: &[f64; 6], input: &MachineInput, params: &MachineParams, det: f64) -> Derivative {
    let state = MachineState {
        lambda_ds: x[0],
        lambda_qs: x[1],
        lambda_dr: x[2],
        lambda_qr: x[3],
        omega_r: x[4],
        theta_r: x[5],
    };
    let i = solve_currents(&state, params, det);
    let w_k = input.omega_frame;
    let w_slip = w_k - state.omega_r;
    let torque = torque_from_currents(&i, params);
    let p = f64::from(params.pole_pairs);
    // Mechanical balance on shaft speed; electrical speed is pole_pairs times it.
    let omega_m = state.omega_r / p;
    let d_omega_m = (torque - input.load_torque - params.friction * omega_m) / params.inertia;
    Derivative([
        input.v_ds - params.r_s * i.i_ds + w_k * state.lambda_qs,
        input.v_qs - params.r_s * i.i_qs - w_k * state.lambda_ds,
        -params.r_r * i.i_dr + w_slip * state.lambda_qr,
        -params.r_r * i.i_qr - w_slip * state.lambda_dr,
        p * d_omega_m,
        state.omega_r,
    ])
}

fn axpy(x: &[f64; 6], h: f64, k: &Derivative) -> [f64; 6] {
    std::array::from_fn(|n| x[n] + h * k.0[n])
}

/// Advances the machine by one classical fourth-order Runge-Kutta step with
/// the inputs held constant over the step.
///
/// `time` is only used to label a divergence error.
pub fn step(
    state: &MachineState,
    input: &MachineInput,
    dt: f64,
    params: &MachineParams,
    time: f64,
) -> Result<MachineState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::invalid(
            "dt",
            format!("must be in (0, {MAX_STEP}], got {dt}"),
        ));
    }
    let det = params.determinant();
    let x = [
        state.lambda_ds,
        state.lambda_qs,
        state.lambda_dr,
        state.lambda_qr,
        state.omega_r,
        state.theta_r,
    ];
    let k1 = derivative(&x, input, params, det);
    let k2 = derivative(&axpy(&x, 0.5 * dt, &k1), input, params, det);
    let k3 = derivative(&axpy(&x, 0.5 * dt, &k2), input, params, det);
    let k4 = derivative(&axpy(&x, dt, &k3), input, params, det);
    let next: [f64; 6] = std::array::from_fn(|n| {
        x[n] + dt / 6.0 * (k1.0[n] + 2.0 * k2.0[n] + 2.0 * k3.0[n] + k4.0[n])
    });
    let out = MachineState {
        lambda_ds: next[0],
        lambda_qs: next[1],
        lambda_dr: next[2],
        lambda_qr: next[3],
        omega_r: next[4],
        theta_r: wrap_angle(next[5]),
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Divergence { time: time + dt })
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Amplitude-invariant abc → stationary (d along phase a) transform.
pub fn stationary_from_abc(abc: [f64; 3]) -> (f64, f64) {
    let [a, b, c] = abc;
    let d = (2.0 * a - b - c) / 3.0;
    let q = (b - c) / 3f64.sqrt();
    (d, q)
}

/// Inverse of [`stationary_from_abc`] for balanced quantities.
pub fn abc_from_stationary(d: f64, q: f64) -> [f64; 3] {
    let half_sqrt3 = 0.5 * 3f64.sqrt();
    [d, -0.5 * d + half_sqrt3 * q, -0.5 * d - half_sqrt3 * q]
}

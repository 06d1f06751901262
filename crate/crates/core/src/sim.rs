//! Closed-loop drive simulation.
//!
//! Loop structure per integration step `dt`:
//!
//! 1. at speed-loop instants, the fuzzy controller produces a torque command
//!    and the vector controller turns it into `i_ds*`, `i_qs*` and a slip
//!    frequency;
//! 2. the synchronous angle rotates the set-points into phase references;
//! 3. at hysteresis sampling instants the band controller compares them with
//!    the machine currents and picks the pole levels;
//! 4. the inverter phase voltages drive the machine, simulated in the
//!    stationary frame.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foc::{self, FocState};
use crate::fuzzy::{ControllerState, FuzzyController, FuzzyParams, DEFAULT_TORQUE_LIMIT};
use crate::hysteresis::{three_phase_step, HysteresisConfig, PhaseHccState};
use crate::inverter::{
    line_voltages, phase_voltages, InverterConfig, PoleLevel, TransitionAuditor,
};
use crate::machine::{self, MachineInput, MachineParams, MachineState};

/// Simulated time of the default tuning run (s).
pub const TUNING_HORIZON: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Straight lines between breakpoints.
    Linear,
    /// Each breakpoint's value holds until the next one.
    Hold,
}

/// Time profile defined by breakpoints with strictly increasing times.
/// Values before the first and after the last breakpoint are held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub interpolation: Interpolation,
    pub points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self {
            interpolation: Interpolation::Hold,
            points: vec![(0.0, value)],
        }
    }

    pub fn linear(points: Vec<(f64, f64)>) -> Result<Self> {
        let p = Self {
            interpolation: Interpolation::Linear,
            points,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn steps(points: Vec<(f64, f64)>) -> Result<Self> {
        let p = Self {
            interpolation: Interpolation::Hold,
            points,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid("profile", "needs at least one breakpoint"));
        }
        if self
            .points
            .iter()
            .any(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::invalid("profile", "breakpoints must be finite"));
        }
        if self.points[0].0 < 0.0 {
            return Err(Error::invalid("profile", "breakpoint times must be >= 0"));
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid(
                "profile",
                "breakpoint times must be strictly increasing",
            ));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        let pts = &self.points;
        let next = pts.partition_point(|&(tp, _)| tp <= t);
        if next == 0 {
            return pts[0].1;
        }
        if next == pts.len() {
            return pts[next - 1].1;
        }
        let (t0, v0) = pts[next - 1];
        match self.interpolation {
            Interpolation::Hold => v0,
            Interpolation::Linear => {
                let (t1, v1) = pts[next];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Intervals over which the profile is constant, clipped to `[0, end]`.
    pub fn plateaus(&self, end: f64) -> Vec<(f64, f64, f64)> {
        let pts = &self.points;
        let mut out = Vec::new();
        match self.interpolation {
            Interpolation::Hold => {
                for (k, &(t, v)) in pts.iter().enumerate() {
                    let start = if k == 0 { 0.0 } else { t };
                    let stop = pts.get(k + 1).map_or(end, |p| p.0).min(end);
                    if start < stop {
                        out.push((start, stop, v));
                    }
                }
            }
            Interpolation::Linear => {
                if pts[0].0 > 0.0 {
                    out.push((0.0, pts[0].0.min(end), pts[0].1));
                }
                for w in pts.windows(2) {
                    if w[0].1 == w[1].1 && w[0].0 < end {
                        out.push((w[0].0, w[1].0.min(end), w[0].1));
                    }
                }
                let last = pts[pts.len() - 1];
                if last.0 < end {
                    out.push((last.0, end, last.1));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Simulated time (s).
    pub duration: f64,
    /// Mechanical speed reference (rad/s).
    pub speed_reference: Profile,
    /// Load torque (N·m).
    pub load_torque: Profile,
}

impl Scenario {
    pub fn with_duration(&self, duration: f64) -> Self {
        Self {
            duration,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid(
                "duration",
                format!("must be > 0, got {}", self.duration),
            ));
        }
        self.speed_reference.validate()?;
        self.load_torque.validate()
    }
}

fn steps(points: &[(f64, f64)]) -> Profile {
    Profile::steps(points.to_vec()).expect("builtin profile")
}

/// Step times of the multi-step scenarios (s).
pub const STEP_TIMES: [f64; 2] = [1.0, 2.0];
/// Duration of the builtin scenarios (s).
pub const SCENARIO_DURATION: f64 = 3.0;

/// The five reference scenarios: trapezoidal no-load tracking, constant speed
/// and load, load steps, speed steps, and combined speed and load steps.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let [t1, t2] = STEP_TIMES;
    let trapezoid = Profile::linear(vec![
        (0.0, 0.0),
        (0.5, 100.0),
        (1.0, 100.0),
        (1.5, 0.0),
        (2.0, -100.0),
        (2.5, -100.0),
        (3.0, 0.0),
    ])
    .expect("builtin profile");
    vec![
        Scenario {
            name: "trapezoid".into(),
            duration: SCENARIO_DURATION,
            speed_reference: trapezoid,
            load_torque: Profile::constant(0.0),
        },
        Scenario {
            name: "const-120-100".into(),
            duration: SCENARIO_DURATION,
            speed_reference: Profile::constant(120.0),
            load_torque: Profile::constant(100.0),
        },
        Scenario {
            name: "load-steps".into(),
            duration: SCENARIO_DURATION,
            speed_reference: Profile::constant(100.0),
            load_torque: steps(&[(0.0, 50.0), (t1, 150.0), (t2, 80.0)]),
        },
        Scenario {
            name: "var-speed-const-torque".into(),
            duration: SCENARIO_DURATION,
            speed_reference: steps(&[(0.0, 50.0), (t1, 120.0), (t2, 80.0)]),
            load_torque: Profile::constant(100.0),
        },
        Scenario {
            name: "var-speed-var-torque".into(),
            duration: SCENARIO_DURATION,
            speed_reference: steps(&[(0.0, 50.0), (t1, 120.0), (t2, 80.0)]),
            load_torque: steps(&[(0.0, 30.0), (t1, 150.0), (t2, 100.0)]),
        },
    ]
}

pub fn scenario_by_name(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

pub fn builtin_names() -> Vec<String> {
    builtin_scenarios().into_iter().map(|s| s.name).collect()
}

/// Scenario used by the fitness function: step to 120 rad/s at t = 0 with a
/// 100 N·m load.
pub fn tuning_scenario() -> Scenario {
    Scenario {
        name: "tuning".into(),
        duration: TUNING_HORIZON,
        speed_reference: Profile::constant(120.0),
        load_torque: Profile::constant(100.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub machine: MachineParams,
    pub inverter: InverterConfig,
    pub hysteresis: HysteresisConfig,
    /// Rotor flux reference (Wb).
    pub flux_ref: f64,
    /// Torque command limit (N·m).
    pub torque_limit: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Speed-loop sample period (s).
    pub speed_period: f64,
    /// Trace sample period (s).
    pub sample_period: f64,
    /// Hysteresis controller samples every this many integration steps.
    pub hcc_decimation: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            machine: MachineParams::default(),
            inverter: InverterConfig::default(),
            hysteresis: HysteresisConfig::default(),
            flux_ref: foc::DEFAULT_FLUX_REF,
            torque_limit: DEFAULT_TORQUE_LIMIT,
            dt: 2e-6,
            speed_period: 1e-4,
            sample_period: 1e-4,
            hcc_decimation: 1,
        }
    }
}

fn ratio(period: f64, dt: f64, field: &'static str) -> Result<usize> {
    let r = (period / dt).round();
    if !(period.is_finite() && r >= 1.0 && ((r * dt - period).abs() <= 1e-9 * period)) {
        return Err(Error::invalid(
            field,
            format!("must be a positive integer multiple of dt = {dt}, got {period}"),
        ));
    }
    Ok(r as usize)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.machine.validate()?;
        self.inverter.validate()?;
        self.hysteresis.validate()?;
        if !(self.flux_ref.is_finite() && self.flux_ref > 0.0) {
            return Err(Error::invalid(
                "flux_ref",
                format!("must be > 0, got {}", self.flux_ref),
            ));
        }
        if !(self.torque_limit.is_finite() && self.torque_limit > 0.0) {
            return Err(Error::invalid(
                "torque_limit",
                format!("must be > 0, got {}", self.torque_limit),
            ));
        }
        if !(self.dt > 0.0 && self.dt <= machine::MAX_STEP) {
            return Err(Error::invalid(
                "dt",
                format!("must be in (0, {}], got {}", machine::MAX_STEP, self.dt),
            ));
        }
        ratio(self.speed_period, self.dt, "speed_period")?;
        ratio(self.sample_period, self.dt, "sample_period")?;
        if self.hcc_decimation == 0 {
            return Err(Error::invalid("hcc_decimation", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceSample {
    pub t: f64,
    pub omega_ref: f64,
    /// Mechanical speed (rad/s).
    pub omega: f64,
    pub te: f64,
    pub tl: f64,
    pub te_ref: f64,
    pub i_abc: [f64; 3],
    pub i_abc_ref: [f64; 3],
    pub vab: f64,
    /// Rotor flux in the controller's synchronous frame.
    pub lambda_dr: f64,
    pub lambda_qr: f64,
    /// Stator currents in the controller's synchronous frame.
    pub i_ds: f64,
    pub i_qs: f64,
    /// Slip frequency set-point (electrical rad/s).
    pub omega_slip_ref: f64,
    /// Electrical rotor speed (rad/s).
    pub omega_r_electrical: f64,
    /// Angle of the rotor flux vector in the stationary frame (rad).
    pub rotor_flux_angle: f64,
    pub levels: [PoleLevel; 3],
    /// Cumulative direct positive/negative bus transitions.
    pub illegal_transitions: u64,
    /// Cumulative pole level changes over all phases.
    pub switching_events: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub sample_period: f64,
    pub samples: Vec<TraceSample>,
    /// Simulated time covered (s).
    pub duration: f64,
    pub illegal_transitions: u64,
    pub switching_events: u64,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct RunError {
    pub error: Error,
    /// Samples recorded before the failure.
    pub partial: Trace,
}

impl From<Error> for RunError {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial: Trace::default(),
        }
    }
}

pub fn run(scenario: &Scenario, cfg: &SimConfig, params: &FuzzyParams) -> Result<Trace, RunError> {
    cfg.validate()?;
    scenario.validate()?;
    let controller = FuzzyController::new(*params, cfg.torque_limit)?;
    let mp = &cfg.machine;
    let dt = cfg.dt;
    let speed_every = ratio(cfg.speed_period, dt, "speed_period")?;
    let sample_every = ratio(cfg.sample_period, dt, "sample_period")?;
    let n_steps = (scenario.duration / dt).round() as usize;

    let mut state = MachineState::default();
    let mut fuzzy_state = ControllerState::default();
    let mut foc_state = FocState::new(cfg.flux_ref);
    let mut hcc = [PhaseHccState::default(); 3];
    let mut levels = [PoleLevel::Zero; 3];
    let mut auditor = TransitionAuditor::default();
    let (mut i_ds_ref, mut i_qs_ref) = foc::current_references(0.0, &foc_state, mp)?;
    let mut omega_sl = 0.0;
    let mut torque_ref = 0.0;

    let mut trace = Trace {
        sample_period: cfg.sample_period,
        samples: Vec::with_capacity(n_steps / sample_every + 1),
        ..Default::default()
    };

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let omega_ref = scenario.speed_reference.value(t);
        let load = scenario.load_torque.value(t);
        let omega_m = state.mechanical_speed(mp);

        if k % speed_every == 0 {
            let (te, next) = controller.step(fuzzy_state, omega_ref, omega_m);
            fuzzy_state = next;
            torque_ref = te;
            (i_ds_ref, i_qs_ref) = foc::current_references(te, &foc_state, mp)?;
            omega_sl = foc::slip_frequency(i_qs_ref, &foc_state, mp)?;
        }

        let i_ref = foc::dq_to_abc(i_ds_ref, i_qs_ref, foc_state.theta_e);
        // Infallible: parameters were validated above.
        let currents = machine::currents_from_fluxes(&state, mp)?;
        let i_abc = machine::abc_from_stationary(currents.i_ds, currents.i_qs);

        if k % cfg.hcc_decimation == 0 {
            let errors = std::array::from_fn(|p| i_ref[p] - i_abc[p]);
            let (next_levels, next_hcc) = three_phase_step(hcc, errors, &cfg.hysteresis);
            auditor.record(levels, next_levels);
            levels = next_levels;
            hcc = next_hcc;
        }

        if k % sample_every == 0 {
            let (lambda_dr, lambda_qr) =
                foc::stationary_to_synchronous(state.lambda_dr, state.lambda_qr, foc_state.theta_e);
            let (i_ds, i_qs) =
                foc::stationary_to_synchronous(currents.i_ds, currents.i_qs, foc_state.theta_e);
            trace.samples.push(TraceSample {
                t,
                omega_ref,
                omega: omega_m,
                te: machine::torque_from_currents(&currents, mp),
                tl: load,
                te_ref: torque_ref,
                i_abc,
                i_abc_ref: i_ref,
                vab: line_voltages(levels, &cfg.inverter)[0],
                lambda_dr,
                lambda_qr,
                i_ds,
                i_qs,
                omega_slip_ref: omega_sl,
                omega_r_electrical: state.omega_r,
                rotor_flux_angle: state.lambda_qr.atan2(state.lambda_dr),
                levels,
                illegal_transitions: auditor.total_illegal(),
                switching_events: auditor.total_events(),
            });
        }

        let v = phase_voltages(levels, &cfg.inverter);
        let (v_ds, v_qs) = machine::stationary_from_abc(v);
        let input = MachineInput {
            v_ds,
            v_qs,
            omega_frame: 0.0,
            load_torque: load,
        };
        match machine::step(&state, &input, dt, mp, t) {
            Ok(next) => state = next,
            Err(error) => {
                trace.duration = t;
                trace.illegal_transitions = auditor.total_illegal();
                trace.switching_events = auditor.total_events();
                return Err(RunError {
                    error,
                    partial: trace,
                });
            }
        }
        foc_state = foc::advance_angle(&foc_state, state.omega_r, omega_sl, dt);
    }

    trace.duration = n_steps as f64 * dt;
    trace.illegal_transitions = auditor.total_illegal();
    trace.switching_events = auditor.total_events();
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Integral of absolute speed error (rad).
    pub iae: f64,
    /// Integral of time-weighted absolute speed error (rad·s).
    pub itae: f64,
    /// 10 % to 90 % rise time of the first reference step, if reached (s).
    pub rise_time: Option<f64>,
    /// Peak excursion past the final reference level, as a percentage of the
    /// final step size.
    pub overshoot: f64,
    /// Mean speed error over the final 20 % of the trace (rad/s).
    pub steady_state_error: f64,
    /// Peak-to-peak speed over the final 20 % (rad/s).
    pub speed_ripple: f64,
    /// Peak-to-peak torque over the final 20 % (N·m).
    pub torque_ripple: f64,
    /// Mean per-phase switching frequency (Hz).
    pub switching_frequency: f64,
}

impl Metrics {
    /// IAE + ITAE.
    pub fn fitness(&self) -> f64 {
        self.iae + self.itae
    }
}

/// Left Riemann sums of `|e|` and `t·|e|` at the given sample instants.
pub fn integral_errors(samples: impl IntoIterator<Item = (f64, f64)>, period: f64) -> (f64, f64) {
    let (mut iae, mut itae) = (0.0, 0.0);
    for (t, e) in samples {
        iae += e.abs() * period;
        itae += e.abs() * t * period;
    }
    (iae, itae)
}

const MIN_SAMPLES: usize = 10;

pub fn compute_metrics(trace: &Trace, scenario: &Scenario) -> Result<Metrics> {
    let s = &trace.samples;
    if s.len() < MIN_SAMPLES {
        return Err(Error::TraceTooShort(format!(
            "{} samples, need at least {MIN_SAMPLES}",
            s.len()
        )));
    }
    let end = s[s.len() - 1].t + trace.sample_period;
    let (iae, itae) = integral_errors(
        s.iter().map(|x| (x.t, x.omega_ref - x.omega)),
        trace.sample_period,
    );

    let tail_start = 0.8 * end;
    let tail: Vec<&TraceSample> = s.iter().filter(|x| x.t >= tail_start).collect();
    if tail.len() < 2 {
        return Err(Error::TraceTooShort(
            "final 20% window holds fewer than 2 samples".into(),
        ));
    }
    let steady_state_error =
        tail.iter().map(|x| x.omega_ref - x.omega).sum::<f64>() / tail.len() as f64;
    let peak_to_peak = |f: &dyn Fn(&TraceSample) -> f64| {
        let (lo, hi) = tail
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(f(x)), hi.max(f(x)))
            });
        hi - lo
    };
    let speed_ripple = peak_to_peak(&|x| x.omega);
    let torque_ripple = peak_to_peak(&|x| x.te);

    let plateaus = scenario.speed_reference.plateaus(end);
    let initial = s[0].omega;

    let rise_time = plateaus
        .iter()
        .find(|p| p.2 != initial)
        .and_then(|&(_, stop, target)| {
            let span = target - initial;
            let progress = |x: &TraceSample| (x.omega - initial) / span;
            let window = s.iter().take_while(|x| x.t < stop);
            let mut t10 = None;
            for x in window {
                if t10.is_none() && progress(x) >= 0.1 {
                    t10 = Some(x.t);
                }
                if progress(x) >= 0.9 {
                    return t10.map(|t| x.t - t);
                }
            }
            None
        });

    let overshoot = match plateaus.last() {
        Some(&(start, stop, level)) => {
            let previous = if plateaus.len() >= 2 {
                plateaus[plateaus.len() - 2].2
            } else {
                initial
            };
            let step = level - previous;
            if step == 0.0 {
                0.0
            } else {
                let excess = s
                    .iter()
                    .filter(|x| x.t >= start && x.t < stop)
                    .map(|x| step.signum() * (x.omega - level))
                    .fold(0.0f64, f64::max);
                100.0 * excess / step.abs()
            }
        }
        None => 0.0,
    };

    let switching_frequency = trace.switching_events as f64 / (3.0 * trace.duration.max(end));

    Ok(Metrics {
        iae,
        itae,
        rise_time,
        overshoot,
        steady_state_error,
        speed_ripple,
        torque_ripple,
        switching_frequency,
    })
}

/// Nine significant digits in scientific notation; negative zero prints as
/// zero.
pub fn format_sig(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}

pub const TRACE_COLUMNS: [&str; 17] = [
    "t",
    "omega_ref",
    "omega",
    "te",
    "tl",
    "ia",
    "ib",
    "ic",
    "ia_ref",
    "ib_ref",
    "ic_ref",
    "vab",
    "lambda_dr",
    "lambda_qr",
    "ua",
    "ub",
    "uc",
];

pub fn write_trace_csv<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", TRACE_COLUMNS.join(","))?;
    for x in &trace.samples {
        let values = [
            x.t,
            x.omega_ref,
            x.omega,
            x.te,
            x.tl,
            x.i_abc[0],
            x.i_abc[1],
            x.i_abc[2],
            x.i_abc_ref[0],
            x.i_abc_ref[1],
            x.i_abc_ref[2],
            x.vab,
            x.lambda_dr,
            x.lambda_qr,
        ];
        let mut line: Vec<String> = values.iter().map(|&v| format_sig(v)).collect();
        line.extend(x.levels.iter().map(|l| l.value().to_string()));
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

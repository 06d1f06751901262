//! Global-best particle swarm optimizer with a linearly decaying inertia
//! weight, box constraints with pairwise ordering repair, and stall-based
//! termination.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyParams;
use crate::sim::{self, Scenario, SimConfig};

/// Nudge applied when an ordered pair collapses onto one value.
const ORDER_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub n_max: usize,
    pub n_pop: usize,
    /// Cognitive acceleration.
    pub c1: f64,
    /// Social acceleration.
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub stall_generations: usize,
    pub function_tolerance: f64,
    pub seed: u64,
    /// Velocity limit as a fraction of each dimension's range.
    pub velocity_clamp: f64,
    pub bounds: Vec<(f64, f64)>,
    /// Index pairs `(lower, upper)` kept strictly ordered by repair.
    pub ordered_pairs: Vec<(usize, usize)>,
}

impl SwarmConfig {
    /// Published hyperparameters over the given search box.
    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Self {
        Self {
            n_max: 100,
            n_pop: 30,
            c1: 0.5,
            c2: 1.25,
            w_max: 0.9,
            w_min: 0.4,
            stall_generations: 20,
            function_tolerance: 1e-6,
            seed: 0,
            velocity_clamp: 0.2,
            bounds,
            ordered_pairs: Vec::new(),
        }
    }

    /// Published hyperparameters over the nine fuzzy controller parameters.
    pub fn fuzzy_default() -> Self {
        Self {
            ordered_pairs: FuzzyParams::ORDERED_PAIRS.to_vec(),
            ..Self::with_bounds(FuzzyParams::BOUNDS.to_vec())
        }
    }

    pub fn n_var(&self) -> usize {
        self.bounds.len()
    }

    /// Structural checks that do not concern convergence.
    pub fn validate(&self) -> Result<()> {
        if self.n_pop < 2 {
            return Err(Error::invalid(
                "n_pop",
                format!("must be >= 2, got {}", self.n_pop),
            ));
        }
        if self.n_max == 0 {
            return Err(Error::invalid("n_max", "must be >= 1"));
        }
        if self.bounds.is_empty() {
            return Err(Error::invalid("bounds", "at least one dimension required"));
        }
        for (k, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    "bounds",
                    format!("dimension {k}: need lo < hi, got [{lo}, {hi}]"),
                ));
            }
        }
        for &(lo, hi) in &self.ordered_pairs {
            if lo >= self.n_var() || hi >= self.n_var() || lo == hi {
                return Err(Error::invalid(
                    "ordered_pairs",
                    format!("bad pair ({lo}, {hi})"),
                ));
            }
        }
        if !(self.velocity_clamp.is_finite() && self.velocity_clamp > 0.0) {
            return Err(Error::invalid("velocity_clamp", "must be > 0"));
        }
        if !(self.function_tolerance.is_finite() && self.function_tolerance >= 0.0) {
            return Err(Error::invalid("function_tolerance", "must be >= 0"));
        }
        if self.stall_generations == 0 {
            return Err(Error::invalid("stall_generations", "must be >= 1"));
        }
        if !(self.w_min.is_finite() && self.w_max.is_finite() && self.w_min <= self.w_max) {
            return Err(Error::invalid("w_min", "need w_min <= w_max"));
        }
        Ok(())
    }
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self::fuzzy_default()
    }
}

/// Linear inertia schedule from `w_max` at generation 0 to `w_min` at `n_max`.
pub fn inertia_weight(n: usize, cfg: &SwarmConfig) -> f64 {
    cfg.w_max - (cfg.w_max - cfg.w_min) / cfg.n_max as f64 * n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum StabilityViolation {
    /// `c1 + c2` outside `(0, 4)`.
    AccelerationSum { sum: f64 },
    /// Inertia at or below `(c1 + c2)/2 − 1`.
    InertiaTooLow { w: f64, bound: f64 },
    /// Inertia at or above 1.
    InertiaTooHigh { w: f64 },
}

impl fmt::Display for StabilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityViolation::AccelerationSum { sum } => {
                write!(f, "0 < c1 + c2 < 4 violated: c1 + c2 = {sum}")
            }
            StabilityViolation::InertiaTooLow { w, bound } => write!(
                f,
                "(c1 + c2)/2 - 1 < w violated: w = {w} is not above {bound}"
            ),
            StabilityViolation::InertiaTooHigh { w } => write!(f, "w < 1 violated: w = {w}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("swarm is not guaranteed to converge: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct StabilityReport {
    pub violations: Vec<StabilityViolation>,
}

/// Checks the convergence conditions on the accelerations and on every
/// inertia weight the schedule can produce. The schedule is linear, so its
/// endpoints cover it.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_stability(cfg: &SwarmConfig) -> Result<(), StabilityReport> {
    let mut violations = Vec::new();
    let sum = cfg.c1 + cfg.c2;
    if !(sum > 0.0 && sum < 4.0) {
        violations.push(StabilityViolation::AccelerationSum { sum });
    }
    let bound = sum / 2.0 - 1.0;
    let (lo, hi) = (cfg.w_min.min(cfg.w_max), cfg.w_min.max(cfg.w_max));
    // Negated comparisons so NaN settings count as violations.
    if !(lo > bound) {
        violations.push(StabilityViolation::InertiaTooLow { w: lo, bound });
    }
    if !(hi < 1.0) {
        violations.push(StabilityViolation::InertiaTooHigh { w: hi });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(StabilityReport { violations })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub personal_best_position: Vec<f64>,
    pub personal_best_fitness: f64,
}

/// Velocity update with per-dimension random draws `r1`, `r2`.
pub fn update_velocity(
    p: &Particle,
    global_best: &[f64],
    w: f64,
    r1: &[f64],
    r2: &[f64],
    cfg: &SwarmConfig,
) -> Vec<f64> {
    (0..p.position.len())
        .map(|k| {
            let x = p.position[k];
            w * p.velocity[k]
                + cfg.c1 * r1[k] * (p.personal_best_position[k] - x)
                + cfg.c2 * r2[k] * (global_best[k] - x)
        })
        .collect()
}

/// Limits each velocity component to `velocity_clamp · (hi − lo)`.
pub fn clamp_velocity(velocity: &mut [f64], cfg: &SwarmConfig) {
    for (v, &(lo, hi)) in velocity.iter_mut().zip(&cfg.bounds) {
        let vmax = cfg.velocity_clamp * (hi - lo);
        *v = v.clamp(-vmax, vmax);
    }
}

/// Moves a particle and repairs the result into the feasible region.
pub fn update_position(position: &[f64], velocity: &[f64], cfg: &SwarmConfig) -> Vec<f64> {
    let mut x: Vec<f64> = position.iter().zip(velocity).map(|(x, v)| x + v).collect();
    repair(&mut x, cfg);
    x
}

/// Clamps to the bounds, then restores strict ordering of each pair by
/// swapping and, on ties, nudging the upper element (or the lower one when the
/// upper sits on its bound).
pub fn repair(x: &mut [f64], cfg: &SwarmConfig) {
    for (v, &(lo, hi)) in x.iter_mut().zip(&cfg.bounds) {
        *v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
    }
    for &(a, b) in &cfg.ordered_pairs {
        if x[a] > x[b] {
            x.swap(a, b);
        }
        if x[a] == x[b] {
            if x[b] + ORDER_EPS <= cfg.bounds[b].1 {
                x[b] += ORDER_EPS;
            } else {
                x[a] -= ORDER_EPS;
            }
        }
    }
}

pub fn is_feasible(x: &[f64], cfg: &SwarmConfig) -> bool {
    x.len() == cfg.n_var()
        && x.iter()
            .zip(&cfg.bounds)
            .all(|(v, &(lo, hi))| *v >= lo && *v <= hi)
        && cfg.ordered_pairs.iter().all(|&(a, b)| x[a] < x[b])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationRecord {
    /// One-based generation number.
    pub generation: usize,
    pub best_fitness: f64,
    /// Mean over the finite fitness values of this generation.
    pub mean_fitness: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxGenerations,
    Stall,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<GenerationRecord>,
    pub termination: Termination,
    pub swarm: Vec<Particle>,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Config(#[from] Error),
    #[error(transparent)]
    Unstable(#[from] StabilityReport),
}

fn improvement(prev: f64, next: f64) -> f64 {
    if prev == next {
        0.0
    } else {
        (prev - next).abs()
    }
}

fn stalled(history: &[GenerationRecord], cfg: &SwarmConfig) -> bool {
    let window = cfg.stall_generations;
    if history.len() < window + 1 {
        return false;
    }
    let recent = &history[history.len() - window - 1..];
    let total: f64 = recent
        .windows(2)
        .map(|w| improvement(w[0].best_fitness, w[1].best_fitness))
        .sum();
    total / (window as f64) < cfg.function_tolerance
}

/// Minimizes `objective` over the configured box.
///
/// Evaluations within a generation run in parallel; best-position updates are
/// a sequential fold in particle order and each particle draws from its own
/// RNG stream, so results depend only on the seed.
pub fn optimize<F>(objective: F, cfg: &SwarmConfig) -> Result<OptimizationResult, OptimizeError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    check_stability(cfg)?;

    let n_var = cfg.n_var();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.n_pop)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect();

    let mut swarm: Vec<Particle> = rngs
        .iter_mut()
        .map(|rng| {
            let mut x: Vec<f64> = cfg
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                .collect();
            repair(&mut x, cfg);
            Particle {
                personal_best_position: x.clone(),
                position: x,
                velocity: vec![0.0; n_var],
                personal_best_fitness: f64::INFINITY,
            }
        })
        .collect();

    let mut best_position = swarm[0].position.clone();
    let mut best_fitness = f64::INFINITY;
    let mut history = Vec::new();
    let mut termination = Termination::MaxGenerations;

    for n in 0..cfg.n_max {
        let fitness: Vec<f64> = swarm
            .par_iter()
            .map(|p| {
                let f = objective(&p.position);
                if f.is_nan() {
                    f64::INFINITY
                } else {
                    f
                }
            })
            .collect();

        for (p, &f) in swarm.iter_mut().zip(&fitness) {
            if f < p.personal_best_fitness {
                p.personal_best_fitness = f;
                p.personal_best_position.clone_from(&p.position);
            }
            if f < best_fitness {
                best_fitness = f;
                best_position.clone_from(&p.position);
            }
        }

        let finite: Vec<f64> = fitness.iter().copied().filter(|f| f.is_finite()).collect();
        let mean_fitness = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let w = inertia_weight(n, cfg);
        history.push(GenerationRecord {
            generation: n + 1,
            best_fitness,
            mean_fitness,
            inertia: w,
        });

        if stalled(&history, cfg) {
            termination = Termination::Stall;
            break;
        }
        if n + 1 == cfg.n_max {
            break;
        }

        for (p, rng) in swarm.iter_mut().zip(rngs.iter_mut()) {
            let r1: Vec<f64> = (0..n_var).map(|_| rng.gen::<f64>()).collect();
            let r2: Vec<f64> = (0..n_var).map(|_| rng.gen::<f64>()).collect();
            let mut v = update_velocity(p, &best_position, w, &r1, &r2, cfg);
            clamp_velocity(&mut v, cfg);
            p.position = update_position(&p.position, &v, cfg);
            p.velocity = v;
        }
    }

    Ok(OptimizationResult {
        best_position,
        best_fitness,
        history,
        termination,
        swarm,
    })
}

/// Closed-loop evaluation settings for the fuzzy controller fitness.
#[derive(Debug, Clone)]
pub struct FitnessSpec {
    pub scenario: Scenario,
    /// Simulated time (s).
    pub horizon: f64,
    pub sim: SimConfig,
}

impl FitnessSpec {
    /// Step to 120 rad/s under a 100 N·m load.
    pub fn tuning_default() -> Self {
        Self {
            scenario: sim::tuning_scenario(),
            horizon: sim::TUNING_HORIZON,
            sim: SimConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(
                "horizon",
                format!("must be > 0, got {}", self.horizon),
            ));
        }
        self.sim.validate()
    }
}

/// IAE + ITAE of the closed loop over the horizon; `+∞` if the simulation
/// diverges or the parameters are infeasible.
pub fn fitness(params: &FuzzyParams, spec: &FitnessSpec) -> f64 {
    let scenario = spec.scenario.with_duration(spec.horizon);
    match sim::run(&scenario, &spec.sim, params) {
        Ok(trace) => match sim::compute_metrics(&trace, &scenario) {
            Ok(m) => m.iae + m.itae,
            Err(_) => f64::INFINITY,
        },
        Err(_) => f64::INFINITY,
    }
}

/// Tunes the fuzzy controller parameters against [`fitness`].
pub fn tune(spec: &FitnessSpec, cfg: &SwarmConfig) -> Result<OptimizationResult, OptimizeError> {
    spec.validate()?;
    if cfg.n_var() != 9 {
        return Err(Error::invalid(
            "bounds",
            format!("fuzzy tuning needs 9 dimensions, got {}", cfg.n_var()),
        )
        .into());
    }
    optimize(
        |x| match FuzzyParams::from_slice(x) {
            Ok(p) => fitness(&p, spec),
            Err(_) => f64::INFINITY,
        },
        cfg,
    )
}

/// Writes `generation,best_f,mean_f,w` rows.
pub fn write_history_csv<W: Write>(history: &[GenerationRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "generation,best_f,mean_f,w")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{}",
            r.generation,
            sim::format_sig(r.best_fitness),
            sim::format_sig(r.mean_fitness),
            sim::format_sig(r.inertia)
        )?;
    }
    Ok(())
}

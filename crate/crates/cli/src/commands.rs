use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::Serialize;

use fuzzdrive_core::fuzzy::FuzzyParams;
use fuzzdrive_core::pso::{self, check_stability, FitnessSpec, Termination};
use fuzzdrive_core::sim::{self, Metrics, Scenario};

use crate::config::{resolve_scenario, ParamsSource, RunConfig};
use crate::params::{format_params, parse_params};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    /// Truncates simulated scenarios; for `tune` it replaces the tuning horizon.
    pub horizon: Option<f64>,
}

impl Context {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = ov.seed {
            config.swarm.seed = seed;
        }
        if let Some(dir) = &ov.out_dir {
            config.output.dir = dir.clone();
        }
        if let Some(dt) = ov.dt {
            config.sim.dt = dt;
        }
        if let Some(h) = ov.horizon {
            if !(h.is_finite() && h > 0.0) {
                bail!("--horizon must be > 0, got {h}");
            }
            config.tuning.horizon = h;
        }
        config.validate()?;
        Ok(Self {
            config,
            horizon: ov.horizon,
        })
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = &self.config.output.dir;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn scenario(&self, name: Option<&str>) -> Result<Scenario> {
        let s = resolve_scenario(name.unwrap_or(&self.config.sim.scenario))?;
        Ok(match self.horizon {
            Some(h) => s.with_duration(h),
            None => s,
        })
    }

    /// Resolves a `--params` value, falling back to the config file.
    fn params(&self, arg: Option<&str>) -> Result<(FuzzyParams, String)> {
        let source = match arg {
            None => self.config.params_source(),
            Some("baseline") => ParamsSource::Baseline,
            Some("tune") => ParamsSource::Tune,
            Some(path) => ParamsSource::File(path.into()),
        };
        match source {
            ParamsSource::Baseline => Ok((FuzzyParams::baseline(), "baseline".into())),
            ParamsSource::Inline(p) => Ok((p, "inline".into())),
            ParamsSource::File(path) => Ok((read_params(&path)?, path.display().to_string())),
            ParamsSource::Tune => Ok((tune(self)?, "tuned".into())),
        }
    }
}

pub fn read_params(path: &Path) -> Result<FuzzyParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_params(&text).with_context(|| format!("in {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_trace(path: &Path, trace: &sim::Trace) -> Result<()> {
    let mut out =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    sim::write_trace_csv(trace, &mut out)?;
    out.flush()?;
    Ok(())
}

fn simulate_one(
    ctx: &Context,
    scenario: &Scenario,
    params: &FuzzyParams,
) -> Result<(sim::Trace, Metrics)> {
    let trace = sim::run(scenario, &ctx.config.sim_config(), params).map_err(|e| {
        anyhow::Error::new(e.error.clone()).context(format!(
            "scenario `{}` failed after {} samples",
            scenario.name,
            e.partial.samples.len()
        ))
    })?;
    let metrics = sim::compute_metrics(&trace, scenario)?;
    Ok((trace, metrics))
}

pub fn simulate(ctx: &Context, scenario: Option<&str>, params: Option<&str>) -> Result<()> {
    let scenario = ctx.scenario(scenario)?;
    let (params, label) = ctx.params(params)?;
    let dir = ctx.out_dir()?;
    let trace = match sim::run(&scenario, &ctx.config.sim_config(), &params) {
        Ok(t) => t,
        Err(e) => {
            if e.partial.samples.is_empty() {
                return Err(e.error.into());
            }
            write_trace(&dir.join("trace.csv"), &e.partial)?;
            return Err(anyhow::Error::new(e.error).context(format!(
                "scenario `{}` failed; partial trace written",
                scenario.name
            )));
        }
    };
    let metrics = sim::compute_metrics(&trace, &scenario)?;
    write_trace(&dir.join("trace.csv"), &trace)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    println!(
        "{}: params {label}, F = {:.6}, steady-state error {:.4} rad/s, overshoot {:.2} %, illegal transitions {}",
        scenario.name,
        metrics.fitness(),
        metrics.steady_state_error,
        metrics.overshoot,
        trace.illegal_transitions
    );
    Ok(())
}

/// Runs the optimizer and writes `history.csv` and `best.params`.
pub fn tune(ctx: &Context) -> Result<FuzzyParams> {
    let swarm = ctx.config.swarm_config();
    check_stability(&swarm).context("refusing to tune")?;
    let spec = FitnessSpec {
        scenario: resolve_scenario(&ctx.config.tuning.scenario)?,
        horizon: ctx.config.tuning.horizon,
        sim: ctx.config.sim_config(),
    };
    let result = pso::tune(&spec, &swarm)?;
    let best = FuzzyParams::from_slice(&result.best_position)?;
    let dir = ctx.out_dir()?;
    let mut history = Vec::new();
    pso::write_history_csv(&result.history, &mut history)?;
    fs::write(dir.join("history.csv"), history)?;
    fs::write(dir.join("best.params"), format_params(&best))?;
    let reason = match result.termination {
        Termination::MaxGenerations => "generation limit",
        Termination::Stall => "stall",
    };
    println!(
        "tuned over {} generations ({reason}): best F = {:.6}",
        result.history.len(),
        result.best_fitness
    );
    Ok(best)
}

#[derive(Serialize)]
struct Entry {
    source: String,
    params: FuzzyParams,
    fitness: f64,
    metrics: Metrics,
}

#[derive(Serialize)]
struct Report {
    scenario: String,
    duration: f64,
    dt: f64,
    a: Entry,
    b: Entry,
}

pub fn compare(ctx: &Context, scenario: Option<&str>, params: &[String]) -> Result<()> {
    let [pa, pb] = params else {
        bail!(
            "compare needs exactly two --params values, got {}",
            params.len()
        );
    };
    let scenario = ctx.scenario(scenario)?;
    let entry = |arg: &str| -> Result<Entry> {
        let (p, source) = ctx.params(Some(arg))?;
        let (_, metrics) = simulate_one(ctx, &scenario, &p)?;
        Ok(Entry {
            source,
            params: p,
            fitness: metrics.fitness(),
            metrics,
        })
    };
    let report = Report {
        scenario: scenario.name.clone(),
        duration: scenario.duration,
        dt: ctx.config.sim.dt,
        a: entry(pa)?,
        b: entry(pb)?,
    };
    write_json(&ctx.out_dir()?.join("report.json"), &report)?;
    for (tag, e) in [("a", &report.a), ("b", &report.b)] {
        println!(
            "{tag} ({}): F = {:.6}, speed ripple {:.4} rad/s, torque ripple {:.3} N·m",
            e.source, e.fitness, e.metrics.speed_ripple, e.metrics.torque_ripple
        );
    }
    Ok(())
}

pub fn check_stability_cmd(ctx: &Context) -> Result<()> {
    let swarm = ctx.config.swarm_config();
    match check_stability(&swarm) {
        Ok(()) => {
            println!(
                "stable: c1 = {}, c2 = {}, w in [{}, {}]",
                swarm.c1, swarm.c2, swarm.w_min, swarm.w_max
            );
            Ok(())
        }
        Err(report) => {
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            Err(report.into())
        }
    }
}

pub fn list_scenarios() {
    for s in sim::builtin_scenarios() {
        println!("{:24} {:.1} s", s.name, s.duration);
    }
    let t = sim::tuning_scenario();
    println!("{:24} {:.1} s (fitness evaluation)", t.name, t.duration);
}

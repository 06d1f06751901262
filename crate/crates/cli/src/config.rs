//! TOML run configuration.
//!
//! Every section and every field is optional; omitted values take the
//! documented defaults. Unknown sections or fields are rejected.
//!
//! ```toml
//! [machine]      # r_s, r_r, l_ls, l_lr, l_m, pole_pairs, inertia, friction
//! [inverter]     # v_dc
//! [hysteresis]   # band, dead_zone
//! [foc]          # flux_ref
//! [fuzzy]        # torque_limit, params = "baseline" | "tune" | "<file>"
//! [fuzzy.inline] # k1 k2 k3 a1 a2 b1 b2 c1 c2, all nine required
//! [sim]          # scenario, dt, speed_period, sample_period, hcc_decimation
//! [swarm]        # n_max, n_pop, c1, c2, w_max, w_min, stall_generations,
//!                # function_tolerance, velocity_clamp, seed
//! [tuning]       # scenario, horizon
//! [output]       # dir
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use fuzzdrive_core::foc::DEFAULT_FLUX_REF;
use fuzzdrive_core::fuzzy::{FuzzyParams, DEFAULT_TORQUE_LIMIT};
use fuzzdrive_core::hysteresis::HysteresisConfig;
use fuzzdrive_core::inverter::InverterConfig;
use fuzzdrive_core::machine::MachineParams;
use fuzzdrive_core::pso::SwarmConfig;
use fuzzdrive_core::sim::{self, Scenario, SimConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("[{section}] {source}")]
    Invalid {
        section: &'static str,
        source: fuzzdrive_core::Error,
    },
    #[error("unknown scenario `{name}`; available: {}", available_scenarios().join(", "))]
    UnknownScenario { name: String },
    #[error("[fuzzy] `params` and `[fuzzy.inline]` are mutually exclusive")]
    ConflictingParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocSection {
    pub flux_ref: f64,
}

impl Default for FocSection {
    fn default() -> Self {
        Self {
            flux_ref: DEFAULT_FLUX_REF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzySection {
    pub torque_limit: f64,
    /// `"baseline"`, `"tune"`, or a path to a params file relative to the
    /// config file.
    pub params: Option<String>,
    pub inline: Option<FuzzyParams>,
}

impl Default for FuzzySection {
    fn default() -> Self {
        Self {
            torque_limit: DEFAULT_TORQUE_LIMIT,
            params: None,
            inline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub scenario: String,
    pub dt: f64,
    pub speed_period: f64,
    pub sample_period: f64,
    pub hcc_decimation: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            scenario: "const-120-100".into(),
            dt: d.dt,
            speed_period: d.speed_period,
            sample_period: d.sample_period,
            hcc_decimation: d.hcc_decimation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmSection {
    pub n_max: usize,
    pub n_pop: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub stall_generations: usize,
    pub function_tolerance: f64,
    pub velocity_clamp: f64,
    pub seed: u64,
}

impl Default for SwarmSection {
    fn default() -> Self {
        let d = SwarmConfig::fuzzy_default();
        Self {
            n_max: d.n_max,
            n_pop: d.n_pop,
            c1: d.c1,
            c2: d.c2,
            w_max: d.w_max,
            w_min: d.w_min,
            stall_generations: d.stall_generations,
            function_tolerance: d.function_tolerance,
            velocity_clamp: d.velocity_clamp,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub scenario: String,
    /// Simulated time per fitness evaluation (s).
    pub horizon: f64,
}

impl Default for TuningSection {
    fn default() -> Self {
        Self {
            scenario: sim::tuning_scenario().name,
            horizon: sim::TUNING_HORIZON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub machine: MachineParams,
    pub inverter: InverterConfig,
    pub hysteresis: HysteresisConfig,
    pub foc: FocSection,
    pub fuzzy: FuzzySection,
    pub sim: SimSection,
    pub swarm: SwarmSection,
    pub tuning: TuningSection,
    pub output: OutputSection,
    /// Directory that relative paths in the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamsSource {
    Baseline,
    Tune,
    File(PathBuf),
    Inline(FuzzyParams),
}

/// Builtin scenario names plus the tuning scenario.
pub fn available_scenarios() -> Vec<String> {
    let mut names = sim::builtin_names();
    names.push(sim::tuning_scenario().name);
    names
}

pub fn resolve_scenario(name: &str) -> Result<Scenario, ConfigError> {
    let tuning = sim::tuning_scenario();
    if name == tuning.name {
        return Ok(tuning);
    }
    sim::scenario_by_name(name).ok_or_else(|| ConfigError::UnknownScenario {
        name: name.to_string(),
    })
}

fn invalid(section: &'static str) -> impl FnOnce(fuzzdrive_core::Error) -> ConfigError {
    move |source| ConfigError::Invalid { section, source }
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            machine: self.machine,
            inverter: self.inverter,
            hysteresis: self.hysteresis,
            flux_ref: self.foc.flux_ref,
            torque_limit: self.fuzzy.torque_limit,
            dt: self.sim.dt,
            speed_period: self.sim.speed_period,
            sample_period: self.sim.sample_period,
            hcc_decimation: self.sim.hcc_decimation,
        }
    }

    pub fn swarm_config(&self) -> SwarmConfig {
        let s = &self.swarm;
        SwarmConfig {
            n_max: s.n_max,
            n_pop: s.n_pop,
            c1: s.c1,
            c2: s.c2,
            w_max: s.w_max,
            w_min: s.w_min,
            stall_generations: s.stall_generations,
            function_tolerance: s.function_tolerance,
            velocity_clamp: s.velocity_clamp,
            seed: s.seed,
            ..SwarmConfig::fuzzy_default()
        }
    }

    pub fn params_source(&self) -> ParamsSource {
        if let Some(p) = self.fuzzy.inline {
            return ParamsSource::Inline(p);
        }
        match self.fuzzy.params.as_deref() {
            None | Some("baseline") => ParamsSource::Baseline,
            Some("tune") => ParamsSource::Tune,
            Some(path) => ParamsSource::File(self.base_dir.join(path)),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.machine.validate().map_err(invalid("machine"))?;
        self.inverter.validate().map_err(invalid("inverter"))?;
        self.hysteresis.validate().map_err(invalid("hysteresis"))?;
        if self.fuzzy.params.is_some() && self.fuzzy.inline.is_some() {
            return Err(ConfigError::ConflictingParams);
        }
        if let Some(p) = &self.fuzzy.inline {
            p.validate().map_err(invalid("fuzzy.inline"))?;
        }
        self.sim_config().validate().map_err(|source| {
            let section = match &source {
                fuzzdrive_core::Error::InvalidParameter {
                    field: "flux_ref", ..
                } => "foc",
                fuzzdrive_core::Error::InvalidParameter {
                    field: "torque_limit",
                    ..
                } => "fuzzy",
                _ => "sim",
            };
            ConfigError::Invalid { section, source }
        })?;
        resolve_scenario(&self.sim.scenario)?;
        resolve_scenario(&self.tuning.scenario)?;
        if !(self.tuning.horizon.is_finite() && self.tuning.horizon > 0.0) {
            return Err(ConfigError::Invalid {
                section: "tuning",
                source: fuzzdrive_core::Error::InvalidParameter {
                    field: "horizon",
                    reason: format!("must be > 0, got {}", self.tuning.horizon),
                },
            });
        }
        self.swarm_config().validate().map_err(invalid("swarm"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sim_config(), SimConfig::default());
        assert_eq!(cfg.swarm_config(), SwarmConfig::fuzzy_default());
        assert_eq!(cfg.params_source(), ParamsSource::Baseline);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = RunConfig::from_toml_str("[machine]\nr_s = 0.1\n[sim]\ndt = 1e-5\n").unwrap();
        assert_eq!(cfg.machine.r_s, 0.1);
        assert_eq!(cfg.machine.r_r, MachineParams::reference_50hp().r_r);
        assert_eq!(cfg.sim.dt, 1e-5);
    }

    #[test]
    fn unknown_field_reports_line() {
        let err = RunConfig::from_toml_str("[sim]\ndt = 1e-5\nstep = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("step"), "{msg}");
    }

    #[test]
    fn unknown_section_is_rejected() {
        assert!(RunConfig::from_toml_str("[plotting]\n").is_err());
    }

    #[test]
    fn invalid_values_name_section_and_field() {
        let err =
            RunConfig::from_toml_str("[hysteresis]\nband = 0.1\ndead_zone = 0.5\n").unwrap_err();
        assert!(err.to_string().starts_with("[hysteresis]"), "{err}");
        let err = RunConfig::from_toml_str("[foc]\nflux_ref = -1.0\n").unwrap_err();
        assert!(err.to_string().starts_with("[foc]"), "{err}");
        let err = RunConfig::from_toml_str("[sim]\ndt = 1e-3\n").unwrap_err();
        assert!(
            err.to_string().starts_with("[sim]") && err.to_string().contains("dt"),
            "{err}"
        );
        let err = RunConfig::from_toml_str("[swarm]\nn_pop = 1\n").unwrap_err();
        assert!(err.to_string().contains("n_pop"), "{err}");
    }

    #[test]
    fn inline_params_are_validated() {
        let doc = "[fuzzy.inline]\nk1 = 0.01\nk2 = 0.5\nk3 = 3.0\na1 = 0.2\na2 = 0.6\n\
                   b1 = 0.2\nb2 = 0.6\nc1 = 0.2\nc2 = 0.6\n";
        let err = RunConfig::from_toml_str(doc).unwrap_err();
        assert!(err.to_string().contains("0.00667"), "{err}");
        let ok = RunConfig::from_toml_str(&doc.replace("0.01", "0.004")).unwrap();
        assert!(matches!(ok.params_source(), ParamsSource::Inline(p) if p.k1 == 0.004));
        let both = format!(
            "[fuzzy]\nparams = \"tune\"\n{}",
            doc.replace("0.01", "0.004")
        );
        assert!(matches!(
            RunConfig::from_toml_str(&both),
            Err(ConfigError::ConflictingParams)
        ));
    }

    #[test]
    fn unknown_scenario_lists_builtins() {
        let err = RunConfig::from_toml_str("[sim]\nscenario = \"nope\"\n").unwrap_err();
        let msg = err.to_string();
        for name in sim::builtin_names() {
            assert!(msg.contains(&name), "{msg}");
        }
    }

    #[test]
    fn params_paths_resolve_against_config_dir() {
        let mut cfg = RunConfig::from_toml_str("[fuzzy]\nparams = \"best.params\"\n").unwrap();
        cfg.base_dir = "/tmp/run".into();
        assert_eq!(
            cfg.params_source(),
            ParamsSource::File("/tmp/run/best.params".into())
        );
    }
}

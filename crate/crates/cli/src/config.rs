//! Experiment configuration: file + flag overrides, defaults, sidecar.
//!
//! Every block is optional in the file. After merging, the defaults a command
//! relies on are filled in, and that effective config is what gets written
//! next to the outputs. Loading the sidecar back with the same subcommand
//! reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};

use coevolve::abm::{InfectionMode, RNG_NAME};
use coevolve::cycles::CycleOptions;
use coevolve::ode::{IntegrationOptions, Sampling};
use coevolve::{Directionality, InfluenceGraph, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SIDECAR: &str = "config.json";
pub const OUT_ENV: &str = "COEVOLVE_OUT";
const DEFAULT_OUT: &str = "coevolve-out";
pub const PARAM_NAMES: [&str; 5] = ["alpha", "lambda", "mu", "c", "zeta"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directionality: Option<Directionality>,
}

impl ParamsBlock {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "alpha" => self.alpha,
            "lambda" => self.lambda,
            "mu" => self.mu,
            "c" => self.c,
            "zeta" => self.zeta,
            _ => None,
        }
    }

    pub fn set(&mut self, name: &str, v: f64) -> Result<(), CliError> {
        let slot = match name {
            "alpha" => &mut self.alpha,
            "lambda" => &mut self.lambda,
            "mu" => &mut self.mu,
            "c" => &mut self.c,
            "zeta" => &mut self.zeta,
            _ => {
                return Err(CliError::Config(format!(
                    "unknown parameter `{name}` (expected alpha, lambda, mu, c or zeta)"
                )))
            }
        };
        *slot = Some(v);
        Ok(())
    }

    pub fn build(&self) -> Result<ModelParams, CliError> {
        let need = |name: &str| {
            self.get(name)
                .ok_or_else(|| CliError::Config(format!("missing parameter `{name}` (set --{name} or params.{name})")))
        };
        let p = ModelParams::new(need("alpha")?, need("lambda")?, need("mu")?, need("c")?, need("zeta")?)
            .map_err(|e| CliError::Config(format!("invalid parameters: {e}")))?;
        Ok(p.with_directionality(self.directionality.unwrap_or_default()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    pub x0: f64,
    pub y0: f64,
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self { x0: 0.5, y0: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolBlock {
    pub rtol: f64,
    pub atol: f64,
    /// Largest integrator step; unbounded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    /// Step budget; the integrator's own limit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl Default for TolBlock {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, max_step: None, max_steps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbmBlock {
    pub graph: InfluenceGraph,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activities: Option<Vec<f64>>,
    #[serde(default)]
    pub mode: InfectionMode,
    /// Replicates for `compare`.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_log: Option<bool>,
    #[serde(default)]
    pub debug_checks: bool,
}

fn default_runs() -> usize {
    20
}

/// Per-node values, either one number for every node or a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeValues {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl NodeValues {
    pub fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
        match self {
            NodeValues::Uniform(v) => Ok(vec![*v; n]),
            NodeValues::PerNode(v) if v.len() == n => Ok(v.clone()),
            NodeValues::PerNode(v) => Err(CliError::Config(format!("{what} has {} entries for {n} nodes", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroBlock {
    pub graph: InfluenceGraph,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activities: Option<NodeValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_x0: Option<NodeValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_y0: Option<NodeValues>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    /// `steps` evenly spaced values from `min` to `max` inclusive.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps).map(|k| self.min + span * k as f64 / (self.steps - 1) as f64).collect()
    }

    /// Parses `name=min:max:steps`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (param, range) = s.split_once('=').ok_or("expected name=min:max:steps")?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err("expected name=min:max:steps".into());
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}"));
        let steps = parts[2].trim().parse::<usize>().map_err(|e| format!("bad step count `{}`: {e}", parts[2]))?;
        Ok(Self { param: param.trim().to_string(), min: num(parts[0])?, max: num(parts[1])?, steps })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axes: Vec<Axis>,
    /// Also integrate every point and run the cycle detector.
    #[serde(default)]
    pub cycles: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitBlock {
    /// Field samples per axis on `[0, 1]`.
    pub grid: usize,
    pub trajectories: usize,
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for PortraitBlock {
    fn default() -> Self {
        Self { grid: 20, trajectories: 8, center: [0.5, 0.4], radius: 0.3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    pub params: ParamsBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abm: Option<AbmBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hetero: Option<HeteroBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub portrait: Option<PortraitBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("malformed config {}: {e}", path.display())))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        self.params.build()
    }

    pub fn initial(&self) -> InitialBlock {
        self.initial.unwrap_or_default()
    }

    pub fn horizon(&self) -> Result<f64, CliError> {
        match self.horizon {
            Some(h) if h.is_finite() && h > 0.0 => Ok(h),
            Some(h) => Err(CliError::Config(format!("horizon must be finite and > 0 (got {h})"))),
            None => Err(CliError::Config("missing horizon".into())),
        }
    }

    pub fn sample_dt(&self) -> Result<f64, CliError> {
        match self.sample_dt {
            Some(dt) if dt.is_finite() && dt > 0.0 => Ok(dt),
            Some(dt) => Err(CliError::Config(format!("sample_dt must be finite and > 0 (got {dt})"))),
            None => Err(CliError::Config("missing sample_dt".into())),
        }
    }

    pub fn ode_options(&self) -> Result<IntegrationOptions<f64>, CliError> {
        let tol = self.tolerances.unwrap_or_default();
        if !(tol.rtol > 0.0 && tol.atol > 0.0) {
            return Err(CliError::Config(format!("tolerances must be > 0 (got rtol {}, atol {})", tol.rtol, tol.atol)));
        }
        let mut opts = IntegrationOptions::default()
            .with_tolerances(tol.rtol, tol.atol)
            .with_sampling(Sampling::Uniform(self.sample_dt()?));
        if let Some(h) = tol.max_step {
            if h.is_nan() || h <= 0.0 {
                return Err(CliError::Config(format!("max_step must be > 0 (got {h})")));
            }
            opts = opts.with_max_step(h);
        }
        if let Some(n) = tol.max_steps {
            opts.max_steps = n;
        }
        Ok(opts)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Fills the defaults `command` relies on, so the sidecar is complete.
    pub fn fill_defaults(&mut self, command: &str, strict: bool) -> Result<(), CliError> {
        if let Some(prev) = &self.command {
            if prev != command {
                return Err(CliError::Config(format!("config was written by `{prev}`, not `{command}`")));
            }
        }
        self.command = Some(command.to_string());
        let stochastic = matches!(command, "abm-sim" | "compare");
        let integrates = !matches!(command, "regime" | "equilibria");
        if stochastic {
            if strict && self.seed.is_none() {
                return Err(CliError::Config(format!("--seed is required for `{command}` in strict mode")));
            }
            self.seed.get_or_insert(0);
            self.rng = Some(RNG_NAME.to_string());
        } else {
            self.rng = None;
        }

        let mu = self.params.mu.unwrap_or(1.0);
        let cyclic = command == "cycle" || (command == "sweep" && self.sweep.as_ref().is_some_and(|s| s.cycles));
        if integrates && (command != "sweep" || cyclic) {
            self.initial.get_or_insert_with(InitialBlock::default);
            self.sample_dt.get_or_insert(0.1);
            let tol = self.tolerances.get_or_insert_with(TolBlock::default);
            if cyclic && tol.max_step.is_none() {
                tol.max_step = Some(0.5);
            }
            let horizon = match command {
                "abm-sim" | "compare" => 30.0,
                "portrait" => 300.0,
                _ if cyclic => 500.0 / mu,
                _ => 100.0,
            };
            self.horizon.get_or_insert(horizon);
        }
        if cyclic {
            self.cycle.get_or_insert_with(CycleOptions::default);
        }
        match command {
            "abm-sim" | "compare" => {
                if self.abm.is_none() {
                    self.abm = Some(AbmBlock {
                        graph: complete(1000)?,
                        activities: None,
                        mode: InfectionMode::default(),
                        runs: default_runs(),
                        record_log: None,
                        debug_checks: false,
                    });
                }
            }
            "mf-hetero" => {
                if self.hetero.is_none() {
                    self.hetero = Some(HeteroBlock { graph: complete(100)?, activities: None, p_x0: None, p_y0: None });
                }
            }
            "sweep" => {
                let sweep =
                    self.sweep.as_ref().ok_or_else(|| CliError::Config("sweep needs at least one --axis".into()))?;
                if sweep.axes.is_empty() || sweep.axes.len() > 2 {
                    return Err(CliError::Config(format!("sweep takes 1 or 2 axes (got {})", sweep.axes.len())));
                }
                for a in &sweep.axes {
                    if !PARAM_NAMES.contains(&a.param.as_str()) {
                        return Err(CliError::Config(format!("cannot sweep `{}`", a.param)));
                    }
                    if a.steps == 0 || !a.min.is_finite() || !a.max.is_finite() {
                        return Err(CliError::Config(format!("bad axis {}={}:{}:{}", a.param, a.min, a.max, a.steps)));
                    }
                }
                if sweep.axes.len() == 2 && sweep.axes[0].param == sweep.axes[1].param {
                    return Err(CliError::Config(format!("`{}` swept twice", sweep.axes[0].param)));
                }
            }
            "portrait" => {
                self.portrait.get_or_insert_with(PortraitBlock::default);
            }
            _ => {}
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

pub fn complete(n: usize) -> Result<InfluenceGraph, CliError> {
    InfluenceGraph::complete(n).map_err(|e| CliError::Config(format!("invalid graph: {e}")))
}

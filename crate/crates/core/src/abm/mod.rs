//! Exact event-driven simulation of the agent model.
//!
//! Agents carry a behaviour (protected or not), a health state (S or I) and an
//! activity rate. Contacts are instantaneous: an activated agent meets a
//! uniformly chosen partner. Protection is adopted or dropped by imitating
//! neighbours on the influence graph. Runs use the direct method with
//! incremental rate bookkeeping, so every realisation is statistically exact.

mod engine;
mod ensemble;
mod population;
mod sumtree;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::InfluenceGraph;
use crate::model::ModelParams;

pub use engine::{simulate, AbmRun};
pub use ensemble::{ensemble, EnsembleResult};
pub use population::{infection_rate, node_payoffs, reference_rates, switch_rates, Health, Population, ReferenceRates};
pub use sumtree::SumTree;

/// Name of the pseudo-random generator, recorded next to every seed.
pub const RNG_NAME: &str = "ChaCha12Rng (rand_chacha 0.3, seed_from_u64)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid rate {value} for {what} at t = {t}")]
    Rate { what: String, value: f64, t: f64 },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InfectionMode {
    /// Activations and partner draws are simulated; a qualifying contact
    /// transmits with probability `lambda`.
    #[default]
    ContactEvents,
    /// Contacts are integrated out: susceptibles are infected at their
    /// aggregate rate directly.
    AggregatedRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Each agent independently protected with probability `x0`, then
    /// infected with probability `y0`, agents in index order.
    Fractions {
        x0: f64,
        y0: f64,
    },
    Explicit {
        protected: Vec<bool>,
        infected: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbmConfig {
    pub params: ModelParams,
    pub graph: InfluenceGraph,
    /// Per-agent activity rates; every agent gets `alpha` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activities: Option<Vec<f64>>,
    pub initial: InitialCondition,
    pub horizon: f64,
    pub sample_dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub infection_mode: InfectionMode,
    /// Keep the full event log; defaults to on for at most 1000 agents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_log: Option<bool>,
    /// Recompute every rate from scratch after each event and compare.
    #[serde(default)]
    pub debug_checks: bool,
}

impl AbmConfig {
    /// Complete influence graph, uniform activity `alpha`, i.i.d. initial state.
    pub fn well_mixed(
        params: ModelParams,
        n: usize,
        x0: f64,
        y0: f64,
        horizon: f64,
        sample_dt: f64,
        seed: u64,
    ) -> Result<Self, AbmError> {
        let graph = InfluenceGraph::complete(n).map_err(|e| AbmError::Config(e.to_string()))?;
        Ok(Self {
            params,
            graph,
            activities: None,
            initial: InitialCondition::Fractions { x0, y0 },
            horizon,
            sample_dt,
            seed,
            infection_mode: InfectionMode::default(),
            record_log: None,
            debug_checks: false,
        })
    }

    pub fn with_mode(mut self, mode: InfectionMode) -> Self {
        self.infection_mode = mode;
        self
    }

    pub fn n(&self) -> usize {
        self.graph.order()
    }

    pub fn logs_events(&self) -> bool {
        self.record_log.unwrap_or(self.n() <= 1000)
    }

    pub fn validate(&self) -> Result<(), AbmError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(AbmError::Config(format!("horizon must be finite and > 0 (got {})", self.horizon)));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(AbmError::Config(format!("sample_dt must be finite and > 0 (got {})", self.sample_dt)));
        }
        let n = self.n();
        if let Some(a) = &self.activities {
            if a.len() != n {
                return Err(AbmError::Config(format!("{} activities for {n} agents", a.len())));
            }
        }
        match &self.initial {
            InitialCondition::Fractions { x0, y0 } => {
                if !((0.0..=1.0).contains(x0) && (0.0..=1.0).contains(y0)) {
                    return Err(AbmError::Config(format!("initial fractions ({x0}, {y0}) outside [0,1]")));
                }
            }
            InitialCondition::Explicit { protected, infected } => {
                if protected.len() != n || infected.len() != n {
                    return Err(AbmError::Config(format!(
                        "explicit initial state has {} behaviours and {} healths for {n} agents",
                        protected.len(),
                        infected.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Contact,
    Infection,
    Recovery,
    Adopt,
    Drop,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Contact => "Contact",
            EventKind::Infection => "Infection",
            EventKind::Recovery => "Recovery",
            EventKind::Adopt => "Adopt",
            EventKind::Drop => "Drop",
        }
    }
}

/// For `Contact` the actor is the activated agent; for `Infection` it is the
/// newly infected agent and the counterpart its source, when one is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub actor: usize,
    pub counterpart: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// CSV with header `t,kind,actor,counterpart`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,kind,actor,counterpart")?;
        for e in &self.events {
            match e.counterpart {
                Some(c) => writeln!(w, "{},{},{},{}", e.t, e.kind.as_str(), e.actor, c)?,
                None => writeln!(w, "{},{},{},", e.t, e.kind.as_str(), e.actor)?,
            }
        }
        Ok(())
    }
}

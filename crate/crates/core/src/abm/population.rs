//! Agent state and reference (non-incremental) rate evaluators.

use serde::{Deserialize, Serialize};

use super::AbmError;
use crate::graph::InfluenceGraph;
use crate::model::{Directionality, MacroState, ModelParams, PayoffPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Health {
    S,
    I,
}

/// Agent vectors plus incrementally maintained adopter and infected counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    protected: Vec<bool>,
    infected: Vec<bool>,
    activities: Vec<f64>,
    adopters: usize,
    infected_count: usize,
}

impl Population {
    pub fn new(protected: Vec<bool>, infected: Vec<bool>, activities: Vec<f64>) -> Result<Self, AbmError> {
        let n = protected.len();
        if n < 2 {
            return Err(AbmError::Config(format!("population needs at least 2 agents (got {n})")));
        }
        if infected.len() != n || activities.len() != n {
            return Err(AbmError::Config(format!(
                "agent vectors differ in length: behaviours {n}, healths {}, activities {}",
                infected.len(),
                activities.len()
            )));
        }
        if let Some((i, a)) = activities.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
            return Err(AbmError::Config(format!("activity of agent {i} must be finite and > 0 (got {a})")));
        }
        let adopters = protected.iter().filter(|&&b| b).count();
        let infected_count = infected.iter().filter(|&&b| b).count();
        Ok(Self { protected, infected, activities, adopters, infected_count })
    }

    pub fn len(&self) -> usize {
        self.protected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.protected.is_empty()
    }

    pub fn is_protected(&self, i: usize) -> bool {
        self.protected[i]
    }

    pub fn is_infected(&self, i: usize) -> bool {
        self.infected[i]
    }

    pub fn health(&self, i: usize) -> Health {
        if self.infected[i] {
            Health::I
        } else {
            Health::S
        }
    }

    /// Susceptible and not protected: the only agents that can be infected.
    pub fn exposed(&self, i: usize) -> bool {
        !self.infected[i] && !self.protected[i]
    }

    pub fn activity(&self, i: usize) -> f64 {
        self.activities[i]
    }

    pub fn activities(&self) -> &[f64] {
        &self.activities
    }

    pub fn behaviours(&self) -> &[bool] {
        &self.protected
    }

    pub fn healths(&self) -> &[bool] {
        &self.infected
    }

    pub fn adopters(&self) -> usize {
        self.adopters
    }

    pub fn infected_count(&self) -> usize {
        self.infected_count
    }

    pub fn macro_state(&self) -> MacroState {
        let n = self.len() as f64;
        MacroState::new(self.adopters as f64 / n, self.infected_count as f64 / n)
    }

    pub fn set_protected(&mut self, i: usize, value: bool) {
        if self.protected[i] != value {
            self.protected[i] = value;
            if value {
                self.adopters += 1;
            } else {
                self.adopters -= 1;
            }
        }
    }

    pub fn set_infected(&mut self, i: usize, value: bool) {
        if self.infected[i] != value {
            self.infected[i] = value;
            if value {
                self.infected_count += 1;
            } else {
                self.infected_count -= 1;
            }
        }
    }

    /// Full recount of `(adopters, infected)` from the agent vectors.
    pub fn recount(&self) -> (usize, usize) {
        (self.protected.iter().filter(|&&b| b).count(), self.infected.iter().filter(|&&b| b).count())
    }

    pub fn check_counters(&self) -> Result<(), AbmError> {
        let (x, y) = self.recount();
        if (x, y) != (self.adopters, self.infected_count) {
            return Err(AbmError::Inconsistent(format!(
                "counters ({}, {}) differ from recount ({x}, {y})",
                self.adopters, self.infected_count
            )));
        }
        Ok(())
    }
}

fn check_order(g: &InfluenceGraph, pop: &Population) -> Result<(), AbmError> {
    if g.order() != pop.len() {
        return Err(AbmError::Config(format!("graph has {} nodes, population {}", g.order(), pop.len())));
    }
    Ok(())
}

/// `pi1_i = (1/d_i) sum_{j in N_i} x_j + zeta y`, `pi0_i = (1/d_i) sum_{j in N_i} (1 - x_j) + c`.
pub fn node_payoffs(g: &InfluenceGraph, pop: &Population, p: &ModelParams) -> Result<Vec<PayoffPair>, AbmError> {
    check_order(g, pop)?;
    let y = pop.macro_state().y;
    Ok((0..pop.len())
        .map(|i| {
            let d = g.degree(i) as f64;
            let adopt = g.neighbours(i).filter(|&j| pop.is_protected(j)).count() as f64;
            PayoffPair { pi1: adopt / d + p.zeta() * y, pi0: (d - adopt) / d + p.c() }
        })
        .collect())
}

/// Per-node `(q01, q10)`: imitation pressure towards and away from protection.
/// Only `q01` acts on unprotected agents and only `q10` on protected ones.
pub fn switch_rates(g: &InfluenceGraph, pop: &Population, p: &ModelParams) -> Result<Vec<(f64, f64)>, AbmError> {
    let pay = node_payoffs(g, pop, p)?;
    Ok((0..pop.len())
        .map(|i| {
            let d = g.degree(i) as f64;
            let (mut q01, mut q10) = (0.0, 0.0);
            for j in g.neighbours(i) {
                if pop.is_protected(j) {
                    q01 += pay[j].pi1;
                } else {
                    q10 += pay[j].pi0;
                }
            }
            (q01 / d, q10 / d)
        })
        .collect())
}

/// Rate at which agent `i` becomes infected:
/// `lambda (1 - x_i)/(n - 1) (n a_i y + sum_{j infected} a_j)` when susceptible,
/// without the first term for one-way transmission.
pub fn infection_rate(pop: &Population, i: usize, p: &ModelParams) -> f64 {
    if !pop.exposed(i) {
        return 0.0;
    }
    let n = pop.len() as f64;
    let infected_activity: f64 = (0..pop.len()).filter(|&j| pop.is_infected(j)).map(|j| pop.activity(j)).sum();
    let own = match p.directionality() {
        Directionality::Bidirectional => pop.activity(i) * pop.infected_count() as f64,
        Directionality::ActivatorInfects => 0.0,
    };
    p.lambda() / (n - 1.0) * (own + infected_activity)
}

/// Rate of the transition currently available to each agent, in index order:
/// recovery `mu` (infected), infection, and the applicable switch rate.
pub fn reference_rates(g: &InfluenceGraph, pop: &Population, p: &ModelParams) -> Result<ReferenceRates, AbmError> {
    let sw = switch_rates(g, pop, p)?;
    let n = pop.len();
    Ok(ReferenceRates {
        recovery: (0..n).map(|i| if pop.is_infected(i) { p.mu() } else { 0.0 }).collect(),
        switch: (0..n).map(|i| if pop.is_protected(i) { sw[i].1 } else { sw[i].0 }).collect(),
        infection: (0..n).map(|i| infection_rate(pop, i, p)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRates {
    pub recovery: Vec<f64>,
    pub switch: Vec<f64>,
    pub infection: Vec<f64>,
}

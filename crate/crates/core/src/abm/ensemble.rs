use rayon::prelude::*;

use super::engine::simulate;
use super::{AbmConfig, AbmError};
use crate::meanfield::Trajectory;
use crate::model::MacroState;
use crate::ode::StepStats;

/// Pointwise statistics over independent runs on a shared sampling grid.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean: Vec<MacroState>,
    /// Sample standard deviation (`n_runs - 1` denominator; zero for one run).
    pub std: Vec<MacroState>,
    pub finals: Vec<MacroState>,
    pub extinction_times: Vec<Option<f64>>,
    pub seeds: Vec<u64>,
    pub events: Vec<u64>,
}

impl EnsembleResult {
    pub fn n_runs(&self) -> usize {
        self.finals.len()
    }

    pub fn mean_trajectory(&self, cfg: &AbmConfig) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.mean.clone(),
            params: cfg.params,
            meta: StepStats { accepted: self.events.iter().sum::<u64>() as usize, ..StepStats::default() },
        }
    }

    /// Standard error of the mean at each sample.
    pub fn std_error(&self) -> Vec<MacroState> {
        let r = (self.n_runs() as f64).sqrt();
        self.std.iter().map(|s| MacroState::new(s.x / r, s.y / r)).collect()
    }
}

/// Runs seeds `seed, seed + 1, ..., seed + n_runs - 1` in parallel.
pub fn ensemble(cfg: &AbmConfig, n_runs: usize) -> Result<EnsembleResult, AbmError> {
    if n_runs == 0 {
        return Err(AbmError::Config("ensemble needs at least one run".into()));
    }
    cfg.validate()?;
    let seeds: Vec<u64> = (0..n_runs as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            c.record_log = Some(false);
            simulate(&c)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let times = runs[0].trajectory.times.clone();
    let m = times.len();
    if runs.iter().any(|r| r.trajectory.len() != m) {
        return Err(AbmError::Inconsistent("runs disagree on the sampling grid".into()));
    }
    let k = n_runs as f64;
    let mut mean = vec![MacroState::<f64>::default(); m];
    for r in &runs {
        for (acc, s) in mean.iter_mut().zip(&r.trajectory.states) {
            acc.x += s.x / k;
            acc.y += s.y / k;
        }
    }
    let mut std = vec![MacroState::<f64>::default(); m];
    if n_runs > 1 {
        for r in &runs {
            for ((acc, s), mu) in std.iter_mut().zip(&r.trajectory.states).zip(&mean) {
                acc.x += (s.x - mu.x) * (s.x - mu.x);
                acc.y += (s.y - mu.y) * (s.y - mu.y);
            }
        }
        for s in std.iter_mut() {
            s.x = (s.x / (k - 1.0)).sqrt();
            s.y = (s.y / (k - 1.0)).sqrt();
        }
    }
    Ok(EnsembleResult {
        times,
        mean,
        std,
        finals: runs.iter().map(|r| r.trajectory.final_state()).collect(),
        extinction_times: runs.iter().map(|r| r.extinction_time).collect(),
        seeds,
        events: runs.iter().map(|r| r.events).collect(),
    })
}

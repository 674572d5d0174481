//! Mean-field dynamics: the planar system for the homogeneous population and
//! the per-node system on a general influence graph.

mod hetero;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphError;
use crate::model::{MacroState, ModelParams};
use crate::ode::{self, IntegrationError, IntegrationOptions, OdeSystem, StepStats, Tolerances};
use crate::scalar::Scalar;

pub use hetero::{hetero_rhs, integrate_hetero, HeteroSolution, HeteroSystem, ProbabilityState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("initial state ({x}, {y}) outside [0,1]^2")]
    StateOutOfRange { x: f64, y: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("activity of node {node} must be finite and > 0 (got {value})")]
    Activity { node: usize, value: f64 },
}

/// Time-stamped macro states `(x, y)`, from an ODE solve or from sampling an
/// agent-based run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Trajectory<T = f64> {
    pub times: Vec<T>,
    pub states: Vec<MacroState<T>>,
    pub params: ModelParams<T>,
    /// Integrator statistics; for agent-based runs `accepted` counts events.
    pub meta: StepStats,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> T {
        self.times.last().copied().unwrap_or_else(T::zero)
    }

    pub fn final_state(&self) -> MacroState<T> {
        *self.states.last().expect("non-empty trajectory")
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, MacroState<T>)> + '_ {
        self.times.iter().copied().zip(self.states.iter().copied())
    }

    /// Largest coordinate-wise distance outside `[0, 1]^2` over the whole trajectory.
    pub fn max_box_violation(&self) -> T {
        let out = |v: T| (T::zero() - v).max(v - T::one()).max(T::zero());
        self.states.iter().fold(T::zero(), |m, s| m.max(out(s.x)).max(out(s.y)))
    }

    /// Sup-norm gap `max_k max(|x_k - x'_k|, |y_k - y'_k|)` against a trajectory on
    /// the same time grid.
    pub fn sup_gap(&self, other: &Trajectory<T>) -> Result<T, MeanFieldError> {
        if self.times.len() != other.times.len() {
            return Err(MeanFieldError::Dimension(format!(
                "time grids differ in length ({} vs {})",
                self.times.len(),
                other.times.len()
            )));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .fold(T::zero(), |m, (a, b)| m.max((a.x - b.x).abs()).max((a.y - b.y).abs())))
    }

    /// CSV with header `t,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, s) in self.iter() {
            writeln!(w, "{},{},{}", t, s.x, s.y)?;
        }
        Ok(())
    }
}

/// Planar mean-field vector field:
/// `x' = x(1-x)(2x + zeta y - 1 - c)`, `y' = 2 alpha lambda y (1-x)(1-y) - mu y`.
pub fn planar_rhs<T: Scalar>(s: MacroState<T>, p: &ModelParams<T>) -> (T, T) {
    let (x, y) = (s.x, s.y);
    let one = T::one();
    let dx = x * (one - x) * (T::lit(2.0) * x + p.zeta() * y - one - p.c());
    let dy = p.infection_gain() * y * (one - x) * (one - y) - p.mu() * y;
    (dx, dy)
}

/// Euclidean norm of [`planar_rhs`].
pub fn planar_speed<T: Scalar>(s: MacroState<T>, p: &ModelParams<T>) -> T {
    let (dx, dy) = planar_rhs(s, p);
    dx.hypot(dy)
}

pub struct PlanarSystem<T> {
    pub params: ModelParams<T>,
}

impl<T: Scalar> OdeSystem<T> for PlanarSystem<T> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) {
        let (a, b) = planar_rhs(MacroState::new(y[0], y[1]), &self.params);
        dy[0] = a;
        dy[1] = b;
    }
}

/// Integrates the planar system from `s0` over `[0, horizon]`, reporting
/// every accepted step.
pub fn integrate_planar<T: Scalar>(
    s0: MacroState<T>,
    p: &ModelParams<T>,
    horizon: T,
    tol: Tolerances<T>,
) -> Result<Trajectory<T>, MeanFieldError> {
    let opts = IntegrationOptions { tol, ..IntegrationOptions::default() };
    integrate_planar_with(s0, p, horizon, &opts)
}

pub fn integrate_planar_with<T: Scalar>(
    s0: MacroState<T>,
    p: &ModelParams<T>,
    horizon: T,
    opts: &IntegrationOptions<T>,
) -> Result<Trajectory<T>, MeanFieldError> {
    if !s0.in_unit_square() {
        return Err(MeanFieldError::StateOutOfRange { x: s0.x.to_f64_lossy(), y: s0.y.to_f64_lossy() });
    }
    let sys = PlanarSystem { params: *p };
    let sol = ode::integrate(&sys, &[s0.x, s0.y], horizon, opts)?;
    let states = sol.states.chunks_exact(2).map(|c| MacroState::new(c[0], c[1])).collect();
    Ok(Trajectory { times: sol.times, states, params: *p, meta: sol.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::Sampling;

    fn example1(zeta: f64) -> ModelParams {
        ModelParams::new(3.0, 0.5, 1.0, 3.0, zeta).unwrap()
    }

    #[test]
    fn origin_is_stationary() {
        for zeta in [5.0, 8.0, 9.5] {
            assert_eq!(planar_rhs(MacroState::new(0.0, 0.0), &example1(zeta)), (0.0, 0.0));
        }
    }

    #[test]
    fn full_adoption_only_recovers() {
        let (dx, dy) = planar_rhs(MacroState::new(1.0, 0.5), &example1(5.0));
        assert_eq!(dx, 0.0);
        assert_eq!(dy, -0.5);
    }

    #[test]
    fn interior_equilibrium_zeta8_is_stationary() {
        // closed form, independent of the equilibria module:
        // disc = 4 + 32/3, beta+ = (-2 + sqrt(44/3)) / 4, y = 1 - mu / (2 alpha lambda (1 - beta+))
        let beta = (-2.0 + (44.0f64 / 3.0).sqrt()) / 4.0;
        let y = 1.0 - 1.0 / (3.0 * (1.0 - beta));
        assert!((beta - 0.457427).abs() < 1e-6);
        assert!((y - 0.385643).abs() < 1e-6);
        let (dx, dy) = planar_rhs(MacroState::new(beta, y), &example1(8.0));
        assert!(dx.abs() < 1e-9 && dy.abs() < 1e-9, "({dx}, {dy})");
    }

    #[test]
    fn converges_to_protection_free_endemic_state() {
        let traj = integrate_planar(MacroState::new(0.5, 0.5), &example1(5.0), 200.0, Tolerances::default()).unwrap();
        let end = traj.final_state();
        assert!(end.distance(&MacroState::new(0.0, 2.0 / 3.0)) < 1e-3, "{end:?}");
        assert_eq!(traj.times[0], 0.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.horizon(), 200.0);
        assert!(traj.meta.accepted > 0);
    }

    #[test]
    fn below_threshold_dies_out() {
        let p = ModelParams::new(3.0, 0.15, 1.0, 3.0, 5.0).unwrap();
        let traj = integrate_planar(MacroState::new(0.5, 0.5), &p, 200.0, Tolerances::default()).unwrap();
        assert!(traj.final_state().norm() < 1e-3);
    }

    #[test]
    fn origin_trajectory_is_constant() {
        let traj = integrate_planar(MacroState::new(0.0, 0.0), &example1(8.0), 50.0, Tolerances::default()).unwrap();
        assert!(traj.states.iter().all(|s| *s == MacroState::new(0.0, 0.0)));
    }

    #[test]
    fn rejects_initial_state_outside_square() {
        let err = integrate_planar(MacroState::new(1.2, 0.5), &example1(5.0), 1.0, Tolerances::default());
        assert!(matches!(err, Err(MeanFieldError::StateOutOfRange { .. })));
    }

    #[test]
    fn halving_tolerances_barely_moves_the_endpoint() {
        let p = example1(8.0);
        let run = |rtol: f64, atol: f64| {
            integrate_planar(MacroState::new(0.2, 0.7), &p, 30.0, Tolerances { rtol, atol }).unwrap().final_state()
        };
        let coarse = run(1e-6, 1e-8);
        let fine = run(5e-7, 5e-9);
        assert!(coarse.distance(&fine) < 1e-6, "{}", coarse.distance(&fine));
    }

    #[test]
    fn uniform_sampling_grid() {
        let opts = IntegrationOptions::default().with_sampling(Sampling::Uniform(0.5));
        let traj = integrate_planar_with(MacroState::new(0.5, 0.5), &example1(5.0), 10.0, &opts).unwrap();
        assert_eq!(traj.len(), 21);
        assert!((traj.times[7] - 3.5).abs() < 1e-12);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,y\n0,0.5,0.5\n"));
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn single_precision_planar() {
        let p: ModelParams<f32> = example1(5.0).cast();
        let tol = Tolerances { rtol: 1e-5f32, atol: 1e-6 };
        let traj = integrate_planar(MacroState::new(0.5f32, 0.5), &p, 100.0, tol).unwrap();
        let end = traj.final_state();
        assert!(end.x.abs() < 1e-3 && (end.y - 2.0 / 3.0).abs() < 1e-3);
    }
}

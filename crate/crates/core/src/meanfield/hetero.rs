//! Per-node mean-field system on a general influence graph.
//!
//! Neighbour behaviours `x_j` are replaced by their marginals `p_x^(j)` and the
//! realized prevalence by the mean of `p_y`.

use std::io::{self, Write};

use crate::graph::InfluenceGraph;
use crate::model::{MacroState, ModelParams};
use crate::ode::{self, IntegrationOptions, OdeSystem};
use crate::scalar::Scalar;

use super::{MeanFieldError, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityState<T = f64> {
    pub p_x: Vec<T>,
    pub p_y: Vec<T>,
}

impl<T: Scalar> ProbabilityState<T> {
    pub fn uniform(n: usize, px: T, py: T) -> Self {
        Self { p_x: vec![px; n], p_y: vec![py; n] }
    }

    pub fn len(&self) -> usize {
        self.p_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_x.is_empty()
    }

    /// Node averages `(x, y)`.
    pub fn macro_state(&self) -> MacroState<T> {
        let n = T::lit(self.len() as f64);
        let sum = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a + b);
        MacroState::new(sum(&self.p_x) / n, sum(&self.p_y) / n)
    }

    fn validate(&self) -> Result<(), MeanFieldError> {
        if self.p_x.len() != self.p_y.len() {
            return Err(MeanFieldError::Dimension(format!(
                "p_x has {} entries, p_y has {}",
                self.p_x.len(),
                self.p_y.len()
            )));
        }
        for (i, (&x, &y)) in self.p_x.iter().zip(&self.p_y).enumerate() {
            let s = MacroState::new(x, y);
            if !s.in_unit_square() {
                return Err(MeanFieldError::Dimension(format!("node {i} probabilities ({x}, {y}) outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// The 2n-dimensional system; state layout is `[p_x (n), p_y (n)]`.
pub struct HeteroSystem<'a, T> {
    graph: &'a InfluenceGraph,
    activities: &'a [T],
    params: ModelParams<T>,
}

impl<'a, T: Scalar> HeteroSystem<'a, T> {
    pub fn new(graph: &'a InfluenceGraph, activities: &'a [T], params: ModelParams<T>) -> Result<Self, MeanFieldError> {
        let n = graph.order();
        if activities.len() != n {
            return Err(MeanFieldError::Dimension(format!("{} activities for a graph of order {n}", activities.len())));
        }
        if let Some((node, &a)) = activities.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > T::zero())) {
            return Err(MeanFieldError::Activity { node, value: a.to_f64_lossy() });
        }
        Ok(Self { graph, activities, params })
    }

    fn eval(&self, px: &[T], py: &[T], dpx: &mut [T], dpy: &mut [T]) {
        let g = self.graph;
        let p = &self.params;
        let n = g.order();
        let nf = T::lit(n as f64);
        let one = T::one();

        let y_bar = py.iter().fold(T::zero(), |a, &b| a + b) / nf;
        let active_infected = self.activities.iter().zip(py).fold(T::zero(), |a, (&act, &y)| a + act * y);

        // payoffs of each node from its own neighbourhood
        let payoff = |s: T, d: T| (s / d + p.zeta() * y_bar, (d - s) / d + p.c());

        match g {
            InfluenceGraph::Complete { .. } => {
                let s = px.iter().fold(T::zero(), |a, &b| a + b);
                let (pi1, pi0) = payoff(s, nf);
                let q01 = s / nf * pi1;
                let q10 = (nf - s) / nf * pi0;
                for i in 0..n {
                    dpx[i] = (one - px[i]) * q01 - px[i] * q10;
                }
            }
            InfluenceGraph::Adjacency { neighbours } => {
                let pis: Vec<(T, T)> = neighbours
                    .iter()
                    .map(|nb| {
                        let s = nb.iter().fold(T::zero(), |a, &j| a + px[j]);
                        payoff(s, T::lit(nb.len() as f64))
                    })
                    .collect();
                for (i, nb) in neighbours.iter().enumerate() {
                    let d = T::lit(nb.len() as f64);
                    let (mut q01, mut q10) = (T::zero(), T::zero());
                    for &j in nb {
                        q01 += px[j] * pis[j].0;
                        q10 += (one - px[j]) * pis[j].1;
                    }
                    dpx[i] = (one - px[i]) * (q01 / d) - px[i] * (q10 / d);
                }
            }
        }

        let scale = p.lambda() / T::lit((n - 1) as f64);
        let bidirectional = p.directionality().is_bidirectional();
        for i in 0..n {
            let own = if bidirectional { nf * self.activities[i] * y_bar } else { T::zero() };
            let q_si = scale * (one - px[i]) * (own + active_infected);
            dpy[i] = (one - py[i]) * q_si - p.mu() * py[i];
        }
    }
}

impl<T: Scalar> OdeSystem<T> for HeteroSystem<'_, T> {
    fn dim(&self) -> usize {
        2 * self.graph.order()
    }

    fn rhs(&self, _t: T, y: &[T], dy: &mut [T]) {
        let n = self.graph.order();
        let (px, py) = y.split_at(n);
        let (dpx, dpy) = dy.split_at_mut(n);
        self.eval(px, py, dpx, dpy);
    }
}

/// Velocities `(p_x', p_y')` of the per-node system.
pub fn hetero_rhs<T: Scalar>(
    ps: &ProbabilityState<T>,
    g: &InfluenceGraph,
    activities: &[T],
    p: &ModelParams<T>,
) -> Result<ProbabilityState<T>, MeanFieldError> {
    ps.validate()?;
    if ps.len() != g.order() {
        return Err(MeanFieldError::Dimension(format!("state has {} nodes, graph has {}", ps.len(), g.order())));
    }
    let sys = HeteroSystem::new(g, activities, *p)?;
    let n = ps.len();
    let mut out = ProbabilityState { p_x: vec![T::zero(); n], p_y: vec![T::zero(); n] };
    sys.eval(&ps.p_x, &ps.p_y, &mut out.p_x, &mut out.p_y);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct HeteroSolution<T = f64> {
    pub n: usize,
    pub times: Vec<T>,
    /// Flat `[p_x (n), p_y (n)]` per time point.
    pub states: Vec<T>,
    /// Node-averaged trajectory.
    pub macro_trajectory: Trajectory<T>,
}

impl<T: Scalar> HeteroSolution<T> {
    pub fn node_state(&self, k: usize) -> ProbabilityState<T> {
        let row = &self.states[2 * self.n * k..2 * self.n * (k + 1)];
        let (px, py) = row.split_at(self.n);
        ProbabilityState { p_x: px.to_vec(), p_y: py.to_vec() }
    }

    /// Long-format CSV with header `t,node,p_x,p_y`.
    pub fn write_node_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,node,p_x,p_y")?;
        for (k, t) in self.times.iter().enumerate() {
            let row = &self.states[2 * self.n * k..2 * self.n * (k + 1)];
            for i in 0..self.n {
                writeln!(w, "{},{},{},{}", t, i, row[i], row[self.n + i])?;
            }
        }
        Ok(())
    }
}

pub fn integrate_hetero<T: Scalar>(
    ps0: &ProbabilityState<T>,
    g: &InfluenceGraph,
    activities: &[T],
    p: &ModelParams<T>,
    horizon: T,
    opts: &IntegrationOptions<T>,
) -> Result<HeteroSolution<T>, MeanFieldError> {
    ps0.validate()?;
    let n = g.order();
    if ps0.len() != n {
        return Err(MeanFieldError::Dimension(format!("state has {} nodes, graph has {n}", ps0.len())));
    }
    let sys = HeteroSystem::new(g, activities, *p)?;
    let mut y0 = ps0.p_x.clone();
    y0.extend_from_slice(&ps0.p_y);
    let sol = ode::integrate(&sys, &y0, horizon, opts)?;

    let nf = T::lit(n as f64);
    let states = sol
        .states
        .chunks_exact(2 * n)
        .map(|row| {
            let (px, py) = row.split_at(n);
            let mean = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a + b) / nf;
            MacroState::new(mean(px), mean(py))
        })
        .collect();
    Ok(HeteroSolution {
        n,
        times: sol.times.clone(),
        states: sol.states,
        macro_trajectory: Trajectory { times: sol.times, states, params: *p, meta: sol.stats },
    })
}

//! Adaptive Dormand-Prince 5(4) integrator with dense output.
//!
//! Written against [`Scalar`] so the same code serves the planar system and
//! the 2n-dimensional per-node system. States live in flat slices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Right-hand side `y' = f(t, y)`.
pub trait OdeSystem<T> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]);
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("state left the unit box at t = {t}: component {component} = {value}")]
    Overshoot { t: f64, component: usize, value: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("invalid integration input: {0}")]
    InvalidInput(String),
}

/// Where the solution is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling<T> {
    /// Every accepted step.
    Steps,
    /// Dense output on the grid `0, dt, 2 dt, …`, plus the horizon itself.
    Uniform(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self { rtol: T::lit(1e-8), atol: T::lit(1e-10) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions<T> {
    pub tol: Tolerances<T>,
    pub initial_step: T,
    pub max_steps: usize,
    /// Upper bound on the step size. Near a stable focus an unbounded
    /// controller grows the step to the edge of the stability region and the
    /// solution then hovers at tolerance level instead of settling.
    pub max_step: T,
    pub sampling: Sampling<T>,
    /// Keep every component in `[0, 1]`: overshoots below `10 atol` are
    /// clamped, larger ones abort with [`IntegrationError::Overshoot`].
    pub unit_box: bool,
}

impl<T: Scalar> Default for IntegrationOptions<T> {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            initial_step: T::lit(1e-3),
            max_steps: 50_000_000,
            max_step: T::infinity(),
            sampling: Sampling::Steps,
            unit_box: true,
        }
    }
}

impl<T: Scalar> IntegrationOptions<T> {
    pub fn with_tolerances(mut self, rtol: T, atol: T) -> Self {
        self.tol = Tolerances { rtol, atol };
        self
    }

    pub fn with_max_step(mut self, max_step: T) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling<T>) -> Self {
        self.sampling = sampling;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub final_step: f64,
}

/// Flat solution: `states[k * dim .. (k + 1) * dim]` is the state at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub dim: usize,
    pub times: Vec<T>,
    pub states: Vec<T>,
    pub stats: StepStats,
}

impl<T: Scalar> Solution<T> {
    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[T] {
        self.state(self.times.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

struct Tableau<T> {
    c: [T; 7],
    a: [[T; 6]; 7],
    e: [T; 7],
    d: [T; 7],
}

impl<T: Scalar> Tableau<T> {
    fn dormand_prince() -> Self {
        let f = |n: f64, d: f64| T::lit(n / d);
        let z = T::zero();
        let b = [f(35., 384.), z, f(500., 1113.), f(125., 192.), f(-2187., 6784.), f(11., 84.), z];
        Self {
            c: [z, f(1., 5.), f(3., 10.), f(4., 5.), f(8., 9.), T::one(), T::one()],
            a: [
                [z; 6],
                [f(1., 5.), z, z, z, z, z],
                [f(3., 40.), f(9., 40.), z, z, z, z],
                [f(44., 45.), f(-56., 15.), f(32., 9.), z, z, z],
                [f(19372., 6561.), f(-25360., 2187.), f(64448., 6561.), f(-212., 729.), z, z],
                [f(9017., 3168.), f(-355., 33.), f(46732., 5247.), f(49., 176.), f(-5103., 18656.), z],
                [b[0], b[1], b[2], b[3], b[4], b[5]],
            ],
            e: [f(71., 57600.), z, f(-71., 16695.), f(71., 1920.), f(-17253., 339200.), f(22., 525.), f(-1., 40.)],
            d: [
                f(-12715105075., 11282082432.),
                z,
                f(87487479700., 32700410799.),
                f(-10690763975., 1880347072.),
                f(701980252875., 199316789632.),
                f(-1453857185., 822651844.),
                f(69997945., 29380423.),
            ],
        }
    }
}

/// Integrates `sys` from `t = 0` to `horizon` starting at `y0`.
pub fn integrate<T: Scalar, S: OdeSystem<T> + ?Sized>(
    sys: &S,
    y0: &[T],
    horizon: T,
    opts: &IntegrationOptions<T>,
) -> Result<Solution<T>, IntegrationError> {
    let dim = sys.dim();
    if y0.len() != dim {
        return Err(IntegrationError::InvalidInput(format!(
            "initial state has {} components, system has {dim}",
            y0.len()
        )));
    }
    if !(horizon > T::zero() && horizon.is_finite()) {
        return Err(IntegrationError::InvalidInput(format!("horizon must be > 0 (got {horizon})")));
    }
    if !(opts.tol.rtol > T::zero() && opts.tol.atol > T::zero()) {
        return Err(IntegrationError::InvalidInput("tolerances must be > 0".into()));
    }
    if opts.max_step.is_nan() || opts.max_step <= T::zero() {
        return Err(IntegrationError::InvalidInput(format!("max step must be > 0 (got {})", opts.max_step)));
    }
    if let Sampling::Uniform(dt) = opts.sampling {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(IntegrationError::InvalidInput(format!("sample interval must be > 0 (got {dt})")));
        }
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrationError::NonFinite { t: 0.0 });
    }

    let tab = Tableau::<T>::dormand_prince();
    let slack = opts.tol.atol * T::lit(10.0);
    let mut y = y0.to_vec();
    if opts.unit_box {
        project_unit_box(&mut y, slack, T::zero())?;
    }

    let mut out = Solution { dim, times: vec![T::zero()], states: y.clone(), stats: StepStats::default() };
    let mut next_sample = 1usize;

    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); dim]; 7];
    let mut ytmp = vec![T::zero(); dim];
    let mut ynew = vec![T::zero(); dim];
    let mut dense = vec![vec![T::zero(); dim]; 5];
    let mut sample = vec![T::zero(); dim];

    let mut t = T::zero();
    let mut h = opts.initial_step.min(horizon);
    let mut first_same_as_last = false;
    let mut steps = 0usize;

    while t < horizon {
        if steps >= opts.max_steps {
            return Err(IntegrationError::TooManySteps { t: t.to_f64_lossy(), max_steps: opts.max_steps });
        }
        steps += 1;

        h = h.min(opts.max_step);
        let remaining = horizon - t;
        let last_step = h >= remaining;
        if last_step {
            h = remaining;
        }
        if h <= t.abs().max(T::one()) * T::epsilon() * T::lit(4.0) {
            return Err(IntegrationError::StepUnderflow { t: t.to_f64_lossy(), h: h.to_f64_lossy() });
        }

        if !first_same_as_last {
            sys.rhs(t, &y, &mut k[0]);
            out.stats.rhs_evals += 1;
        }
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += tab.a[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            sys.rhs(t + tab.c[s] * h, &ytmp, &mut k[s]);
            out.stats.rhs_evals += 1;
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }

        let mut err_sq = T::zero();
        for i in 0..dim {
            let mut e = T::zero();
            for (s, ks) in k.iter().enumerate() {
                e += tab.e[s] * ks[i];
            }
            let scale = opts.tol.atol + opts.tol.rtol * y[i].abs().max(ynew[i].abs());
            let r = h * e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / T::lit(dim as f64)).sqrt();
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            out.stats.rejected += 1;
            h *= T::lit(0.1);
            first_same_as_last = false;
            continue;
        }

        if err <= T::one() {
            let t_new = if last_step { horizon } else { t + h };

            if let Sampling::Uniform(dt) = opts.sampling {
                for i in 0..dim {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    let mut dd = T::zero();
                    for (s, ks) in k.iter().enumerate() {
                        dd += tab.d[s] * ks[i];
                    }
                    dense[0][i] = y[i];
                    dense[1][i] = ydiff;
                    dense[2][i] = bspl;
                    dense[3][i] = ydiff - h * k[6][i] - bspl;
                    dense[4][i] = h * dd;
                }
                loop {
                    let ts = dt * T::lit(next_sample as f64);
                    if ts > t_new || ts >= horizon {
                        break;
                    }
                    let theta = (ts - t) / h;
                    let theta1 = T::one() - theta;
                    for i in 0..dim {
                        sample[i] = dense[0][i]
                            + theta
                                * (dense[1][i] + theta1 * (dense[2][i] + theta * (dense[3][i] + theta1 * dense[4][i])));
                    }
                    if opts.unit_box {
                        project_unit_box(&mut sample, slack, ts)?;
                    }
                    out.times.push(ts);
                    out.states.extend_from_slice(&sample);
                    next_sample += 1;
                }
            }

            std::mem::swap(&mut y, &mut ynew);
            if opts.unit_box {
                project_unit_box(&mut y, slack, t_new)?;
            }
            t = t_new;
            out.stats.accepted += 1;
            out.stats.final_step = h.to_f64_lossy();
            // FSAL: the last stage was evaluated at the unprojected point; reuse
            // it only when projection left the state unchanged.
            first_same_as_last = y == ytmp;
            if first_same_as_last {
                let k6 = k[6].clone();
                k[0].copy_from_slice(&k6);
            }

            let record = match opts.sampling {
                Sampling::Steps => true,
                Sampling::Uniform(_) => t >= horizon,
            };
            if record {
                out.times.push(t);
                out.states.extend_from_slice(&y);
            }

            let fac = if err == T::zero() { T::lit(10.0) } else { T::lit(0.9) * err.powf(T::lit(-0.2)) };
            h *= fac.min(T::lit(10.0)).max(T::lit(0.2));
        } else {
            out.stats.rejected += 1;
            first_same_as_last = false;
            let fac = T::lit(0.9) * err.powf(T::lit(-0.2));
            h *= fac.max(T::lit(0.1));
        }
    }
    Ok(out)
}

/// Clamps components into `[0, 1]` when they are within `slack` of it.
fn project_unit_box<T: Scalar>(y: &mut [T], slack: T, t: T) -> Result<(), IntegrationError> {
    for (i, v) in y.iter_mut().enumerate() {
        if *v < T::zero() {
            if *v < -slack {
                return Err(IntegrationError::Overshoot { t: t.to_f64_lossy(), component: i, value: v.to_f64_lossy() });
            }
            *v = T::zero();
        } else if *v > T::one() {
            if *v > T::one() + slack {
                return Err(IntegrationError::Overshoot { t: t.to_f64_lossy(), component: i, value: v.to_f64_lossy() });
            }
            *v = T::one();
        }
    }
    Ok(())
}

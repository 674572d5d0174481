//! Periodic-orbit detection on planar trajectories via a Poincaré section,
//! and the attracting rectangle that contains the oscillations.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::{find_equilibria, EquilibriumKind};
use crate::meanfield::{planar_rhs, Trajectory};
use crate::model::{MacroState, ModelParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CycleError {
    #[error("trajectory needs at least 2 samples (got {0})")]
    TooShort(usize),
    #[error("horizon {horizon} is below 50/mu = {needed}")]
    HorizonTooShort { horizon: f64, needed: f64 },
    #[error("no trapping region: 2 alpha lambda = {gain} <= mu = {mu}, the disease dies out")]
    BelowThreshold { gain: f64, mu: f64 },
    #[error("invalid detector option: {0}")]
    Options(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOptions<T = f64> {
    /// Maximum `|y_{k+1} - y_k|` between successive section crossings.
    pub tol_cycle: T,
    /// Maximum relative change between successive return times.
    pub period_rtol: T,
    /// Fraction of the horizon dropped before looking for crossings.
    pub transient_fraction: T,
    pub min_crossings: usize,
}

impl<T: Scalar> Default for CycleOptions<T> {
    fn default() -> Self {
        Self { tol_cycle: T::lit(1e-4), period_rtol: T::lit(1e-3), transient_fraction: T::lit(0.3), min_crossings: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum CycleVerdict<T = f64> {
    ConvergedToPoint {
        point: MacroState<T>,
    },
    LimitCycle {
        period: T,
        /// Half the peak-to-peak range over the last full revolution.
        amplitude_x: T,
        amplitude_y: T,
        /// Length of the trailing run of matching crossings.
        crossings: usize,
    },
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionSource {
    InteriorEquilibrium,
    RangeMidpoint,
}

/// The line `x = x` crossed with `x' > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section<T = f64> {
    pub x: T,
    pub direction: String,
    pub source: SectionSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing<T = f64> {
    pub t: T,
    pub y: T,
    /// Time since the previous crossing.
    pub period: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport<T = f64> {
    pub verdict: CycleVerdict<T>,
    pub transient_discarded: T,
    pub section: Section<T>,
    pub crossings: Vec<Crossing<T>>,
}

impl<T: Scalar> CycleReport<T> {
    pub fn is_limit_cycle(&self) -> bool {
        matches!(self.verdict, CycleVerdict::LimitCycle { .. })
    }

    /// CSV with header `k,t_k,y_k,period_k`; the first period is empty.
    pub fn write_crossings_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,t_k,y_k,period_k")?;
        for (k, c) in self.crossings.iter().enumerate() {
            match c.period {
                Some(p) => writeln!(w, "{},{},{},{}", k, c.t, c.y, p)?,
                None => writeln!(w, "{},{},{},", k, c.t, c.y)?,
            }
        }
        Ok(())
    }
}

/// Classifies the long-run behaviour of `traj`.
///
/// A point verdict needs a trajectory that has actually settled; integrate
/// with a bounded step (`IntegrationOptions::max_step`) so the solver does not
/// hover around a stable focus at tolerance level.
pub fn detect_cycle<T: Scalar>(
    traj: &Trajectory<T>,
    p: &ModelParams<T>,
    tol_cycle: T,
) -> Result<CycleReport<T>, CycleError> {
    detect_cycle_with(traj, p, &CycleOptions { tol_cycle, ..CycleOptions::default() })
}

pub fn detect_cycle_with<T: Scalar>(
    traj: &Trajectory<T>,
    p: &ModelParams<T>,
    opts: &CycleOptions<T>,
) -> Result<CycleReport<T>, CycleError> {
    let n = traj.len();
    if n < 2 {
        return Err(CycleError::TooShort(n));
    }
    if !(opts.tol_cycle > T::zero() && opts.period_rtol > T::zero())
        || !(opts.transient_fraction >= T::zero() && opts.transient_fraction < T::one())
        || opts.min_crossings < 2
    {
        return Err(CycleError::Options(format!("{opts:?}")));
    }
    let t0 = traj.times[0];
    let span = traj.horizon() - t0;
    let needed = T::lit(50.0) / p.mu();
    if span < needed {
        return Err(CycleError::HorizonTooShort { horizon: span.to_f64_lossy(), needed: needed.to_f64_lossy() });
    }
    let t_cut = t0 + opts.transient_fraction * span;

    let section_x = find_equilibria(p)
        .ok()
        .and_then(|eq| eq.into_iter().find(|e| e.kind == EquilibriumKind::InteriorPlus && e.exists))
        .and_then(|e| e.point)
        .map(|s| (s.x, SectionSource::InteriorEquilibrium));
    let (xs, source) = section_x.unwrap_or_else(|| {
        let (lo, hi) = traj
            .iter()
            .filter(|(t, _)| *t >= t_cut)
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), (_, s)| (lo.min(s.x), hi.max(s.x)));
        ((lo + hi) * T::lit(0.5), SectionSource::RangeMidpoint)
    });
    let section = Section { x: xs, direction: "increasing".to_string(), source };

    let crossings = section_crossings(traj, p, xs, t_cut);
    let verdict = if let Some(point) = converged_point(traj, p) {
        CycleVerdict::ConvergedToPoint { point }
    } else {
        cycle_verdict(traj, &crossings, opts)
    };
    Ok(CycleReport { verdict, transient_discarded: t_cut - t0, section, crossings })
}

fn converged_point<T: Scalar>(traj: &Trajectory<T>, p: &ModelParams<T>) -> Option<MacroState<T>> {
    let end = traj.final_state();
    let (dx, dy) = planar_rhs(end, p);
    if dx.hypot(dy) >= T::lit(1e-8) {
        return None;
    }
    let t_tail = traj.horizon() - T::lit(0.1) * (traj.horizon() - traj.times[0]);
    let drift = traj.iter().filter(|(t, _)| *t >= t_tail).fold(T::zero(), |m, (_, s)| m.max(s.distance(&end)));
    (drift < T::lit(1e-6)).then_some(end)
}

fn cycle_verdict<T: Scalar>(
    traj: &Trajectory<T>,
    crossings: &[Crossing<T>],
    opts: &CycleOptions<T>,
) -> CycleVerdict<T> {
    // length of the trailing run of crossings whose successive y and return time agree
    let mut run = usize::from(!crossings.is_empty());
    for k in (1..crossings.len()).rev() {
        let y_ok = (crossings[k].y - crossings[k - 1].y).abs() < opts.tol_cycle;
        let period_ok = match (crossings[k].period, crossings[k - 1].period) {
            (Some(a), Some(b)) => (a - b).abs() < opts.period_rtol * a,
            _ => false,
        };
        if !(y_ok && period_ok) {
            break;
        }
        run += 1;
    }
    if run < opts.min_crossings {
        return CycleVerdict::Undecided;
    }
    let tail = &crossings[crossings.len() - run..];
    let periods: Vec<T> = tail.iter().filter_map(|c| c.period).collect();
    let period = periods.iter().fold(T::zero(), |s, &v| s + v) / T::lit(periods.len() as f64);
    let (t_a, t_b) = (crossings[crossings.len() - 2].t, crossings[crossings.len() - 1].t);
    let lap = traj.iter().filter(|(t, _)| *t >= t_a && *t <= t_b);
    let (xlo, xhi, ylo, yhi) = lap
        .fold((T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity()), |(a, b, c, d), (_, s)| {
            (a.min(s.x), b.max(s.x), c.min(s.y), d.max(s.y))
        });
    let half = T::lit(0.5);
    CycleVerdict::LimitCycle {
        period,
        amplitude_x: (xhi - xlo) * half,
        amplitude_y: (yhi - ylo) * half,
        crossings: run,
    }
}

/// Upward crossings of `x = xs` at or after `t_cut`, located on the cubic
/// Hermite interpolant built from the vector field at the samples.
pub fn section_crossings<T: Scalar>(traj: &Trajectory<T>, p: &ModelParams<T>, xs: T, t_cut: T) -> Vec<Crossing<T>> {
    let mut out: Vec<Crossing<T>> = Vec::new();
    for k in 0..traj.len().saturating_sub(1) {
        let (ta, tb) = (traj.times[k], traj.times[k + 1]);
        let (a, b) = (traj.states[k], traj.states[k + 1]);
        if tb < t_cut || !(a.x < xs && b.x >= xs) {
            continue;
        }
        let h = tb - ta;
        let (da, db) = (planar_rhs(a, p), planar_rhs(b, p));
        let hx = |th: T| hermite(a.x, b.x, da.0 * h, db.0 * h, th);
        // bisection on the bracket [0, 1]; endpoint signs are guaranteed by the test above
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..60 {
            let mid = (lo + hi) * T::lit(0.5);
            if hx(mid) < xs {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let th = (lo + hi) * T::lit(0.5);
        let t = ta + th * h;
        if t < t_cut {
            continue;
        }
        let y = hermite(a.y, b.y, da.1 * h, db.1 * h, th);
        let period = out.last().map(|c| t - c.t);
        out.push(Crossing { t, y, period });
    }
    out
}

fn hermite<T: Scalar>(p0: T, p1: T, m0: T, m1: T, s: T) -> T {
    let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
    let s2 = s * s;
    let s3 = s2 * s;
    (two * s3 - three * s2 + one) * p0 + (s3 - two * s2 + s) * m0 + (three * s2 - two * s3) * p1 + (s3 - s2) * m1
}

/// `[0, 1] × [0, 1 - mu / (2 alpha lambda)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappingRegion<T = f64> {
    pub x: (T, T),
    pub y: (T, T),
}

impl<T: Scalar> TrappingRegion<T> {
    pub fn contains(&self, s: MacroState<T>, tol: T) -> bool {
        s.x >= self.x.0 - tol && s.x <= self.x.1 + tol && s.y >= self.y.0 - tol && s.y <= self.y.1 + tol
    }
}

pub fn trapping_region<T: Scalar>(p: &ModelParams<T>) -> Result<TrappingRegion<T>, CycleError> {
    if p.infection_gain() <= p.mu() {
        return Err(CycleError::BelowThreshold { gain: p.infection_gain().to_f64_lossy(), mu: p.mu().to_f64_lossy() });
    }
    Ok(TrappingRegion { x: (T::zero(), T::one()), y: (T::zero(), T::one() - p.recovery_ratio()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappingCheck<T = f64> {
    /// First sample time inside the region.
    pub entered_at: Option<T>,
    /// First sample time outside the region after entry.
    pub exited_at: Option<T>,
}

impl<T: Scalar> TrappingCheck<T> {
    pub fn holds(&self) -> bool {
        self.entered_at.is_some() && self.exited_at.is_none()
    }
}

pub fn check_trapping<T: Scalar>(traj: &Trajectory<T>, region: &TrappingRegion<T>, tol: T) -> TrappingCheck<T> {
    let mut check = TrappingCheck { entered_at: None, exited_at: None };
    for (t, s) in traj.iter() {
        let inside = region.contains(s, tol);
        match check.entered_at {
            None if inside => check.entered_at = Some(t),
            Some(_) if !inside => {
                check.exited_at = Some(t);
                break;
            }
            _ => {}
        }
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::integrate_planar_with;
    use crate::ode::{IntegrationOptions, Sampling, StepStats};

    fn example1(zeta: f64) -> ModelParams {
        ModelParams::new(3.0, 0.5, 1.0, 3.0, zeta).unwrap()
    }

    fn run(zeta: f64, s0: MacroState, horizon: f64, dt: f64) -> Trajectory {
        let opts = IntegrationOptions::default().with_sampling(Sampling::Uniform(dt)).with_max_step(0.5);
        integrate_planar_with(s0, &example1(zeta), horizon, &opts).unwrap()
    }

    #[test]
    fn oscillating_regime_is_a_limit_cycle() {
        let p = example1(9.5);
        let traj = run(9.5, MacroState::new(0.5, 0.5), 500.0, 0.1);
        let r = detect_cycle(&traj, &p, 1e-4).unwrap();
        assert_eq!(r.section.source, SectionSource::InteriorEquilibrium);
        assert!((r.section.x - 0.5150697).abs() < 1e-6);
        assert!((r.transient_discarded - 150.0).abs() < 1e-9);
        let CycleVerdict::LimitCycle { period, amplitude_x, amplitude_y, crossings } = r.verdict else {
            panic!("{:?}", r.verdict)
        };
        assert!(crossings >= 5);
        assert!(period > 0.0 && amplitude_x > 0.0 && amplitude_y > 0.0);
        // the orbit stays in the attracting rectangle, away from x = 0 and x = 1
        let tail: Vec<_> = traj.iter().filter(|(t, _)| *t >= 150.0).map(|(_, s)| s).collect();
        assert!(tail.iter().all(|s| s.y >= 0.0 && s.y <= 2.0 / 3.0));
        let xmin = tail.iter().map(|s| s.x).fold(1.0, f64::min);
        let xmax = tail.iter().map(|s| s.x).fold(0.0, f64::max);
        assert!(xmin > 1e-3 && xmax < 1.0 - 1e-3, "{xmin} {xmax}");
    }

    #[test]
    fn period_is_stable_under_denser_sampling() {
        let p = example1(9.5);
        let period =
            |dt: f64| match detect_cycle(&run(9.5, MacroState::new(0.5, 0.5), 500.0, dt), &p, 1e-4).unwrap().verdict {
                CycleVerdict::LimitCycle { period, .. } => period,
                v => panic!("{v:?}"),
            };
        let (a, b) = (period(0.1), period(0.05));
        assert!((a - b).abs() / a < 1e-3, "{a} {b}");
    }

    #[test]
    fn stable_regime_converges_to_point() {
        let p = example1(8.0);
        let traj = run(8.0, MacroState::new(0.5, 0.5), 500.0, 0.5);
        let r = detect_cycle(&traj, &p, 1e-4).unwrap();
        let CycleVerdict::ConvergedToPoint { point } = r.verdict else { panic!("{:?}", r.verdict) };
        assert!((point.x - 0.457427).abs() < 1e-6 && (point.y - 0.385643).abs() < 1e-6, "{point:?}");
    }

    #[test]
    fn constant_origin_trajectory() {
        let p = example1(8.0);
        let traj = Trajectory {
            times: (0..=100).map(|k| k as f64).collect(),
            states: vec![MacroState::new(0.0, 0.0); 101],
            params: p,
            meta: StepStats::default(),
        };
        let r = detect_cycle(&traj, &p, 1e-4).unwrap();
        assert_eq!(r.verdict, CycleVerdict::ConvergedToPoint { point: MacroState::new(0.0, 0.0) });
        assert!(r.crossings.is_empty());
    }

    #[test]
    fn falls_back_to_midpoint_section() {
        let p = example1(5.0);
        let traj = run(5.0, MacroState::new(0.5, 0.5), 100.0, 0.5);
        let r = detect_cycle(&traj, &p, 1e-4).unwrap();
        assert_eq!(r.section.source, SectionSource::RangeMidpoint);
    }

    #[test]
    fn short_trajectories_rejected() {
        let p = example1(9.5);
        let traj = run(9.5, MacroState::new(0.5, 0.5), 20.0, 0.5);
        assert!(matches!(detect_cycle(&traj, &p, 1e-4), Err(CycleError::HorizonTooShort { .. })));
    }

    #[test]
    fn too_few_crossings_is_undecided() {
        let p = example1(9.5);
        let traj = run(9.5, MacroState::new(0.5, 0.5), 500.0, 0.1);
        let opts = CycleOptions { min_crossings: 10_000, ..CycleOptions::default() };
        assert_eq!(detect_cycle_with(&traj, &p, &opts).unwrap().verdict, CycleVerdict::Undecided);
    }

    #[test]
    fn crossing_csv() {
        let p = example1(9.5);
        let r = detect_cycle(&run(9.5, MacroState::new(0.5, 0.5), 500.0, 0.1), &p, 1e-4).unwrap();
        let mut buf = Vec::new();
        r.write_crossings_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,t_k,y_k,period_k"));
        assert!(lines.next().unwrap().ends_with(','));
        assert_eq!(text.lines().count(), r.crossings.len() + 1);
    }

    #[test]
    fn trapping_rectangle() {
        let r = trapping_region(&example1(9.5)).unwrap();
        assert_eq!(r.x, (0.0, 1.0));
        assert!((r.y.1 - 2.0 / 3.0).abs() < 1e-15);
        let low = ModelParams::new(3.0, 0.1, 1.0, 3.0, 9.5).unwrap();
        assert!(matches!(trapping_region(&low), Err(CycleError::BelowThreshold { .. })));
    }

    #[test]
    fn trajectory_from_above_descends_then_stays() {
        let p = example1(9.5);
        let region = trapping_region(&p).unwrap();
        let traj = run(9.5, MacroState::new(0.5, 0.9), 200.0, 0.05);
        let check = check_trapping(&traj, &region, 1e-9);
        assert!(check.holds(), "{check:?}");
        let entry = check.entered_at.unwrap();
        assert!(entry > 0.0);
        for (t, s) in traj.iter().filter(|(t, _)| *t < entry) {
            assert!(planar_rhs(s, &p).1 < 0.0, "y' >= 0 at t = {t}");
        }
    }
}

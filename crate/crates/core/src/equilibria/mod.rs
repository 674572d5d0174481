//! Equilibria of the planar system, their local stability, and the parameter
//! regime classifier.
//!
//! Everything here is closed form. Eigenvalues come from the trace and
//! determinant of the 2×2 Jacobian; existence and stability are decided by the
//! explicit inequalities, each recorded with its evaluated sides so a report
//! can be audited line by line.

mod regime;

use std::cmp::Ordering;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meanfield::planar_rhs;
use crate::model::{MacroState, ModelParams};
use crate::scalar::Scalar;

pub use regime::{classify_regime, regime_thresholds, RegimeLabel, RegimeReport, RegimeThresholds, CONDITION_IDS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("parameters violate c > 1 and zeta > c + 1 (c = {c}, zeta = {zeta}); equilibrium analysis refused")]
    Assumption2 { c: f64, zeta: f64 },
    #[error("{0:?} does not exist for these parameters")]
    NotExisting(EquilibriumKind),
}

/// One evaluated inequality `lhs <op> rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality<T = f64> {
    pub name: String,
    pub lhs: T,
    pub rhs: T,
    pub satisfied: bool,
    pub source: String,
    /// `lhs` and `rhs` agree to within the relative equality tolerance.
    #[serde(skip)]
    pub near_equal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
}

impl<T: Scalar> Inequality<T> {
    pub(crate) fn eval(name: &str, lhs: T, rel: Rel, rhs: T, source: &str) -> Self {
        let satisfied = match rel {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Gt => lhs > rhs,
            Rel::Ge => lhs >= rhs,
        };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied,
            source: source.to_string(),
            near_equal: compare(lhs, rhs) == Ordering::Equal,
        }
    }

    /// Satisfied and not within tolerance of the boundary.
    pub fn strictly_holds(&self) -> bool {
        self.satisfied && !self.near_equal
    }

    /// Fails and not within tolerance of the boundary.
    pub fn strictly_fails(&self) -> bool {
        !self.satisfied && !self.near_equal
    }
}

/// Three-way comparison treating relative differences below
/// [`Scalar::equality_tol`] as equality.
pub fn compare<T: Scalar>(a: T, b: T) -> Ordering {
    if (a - b).abs() <= T::equality_tol() * a.abs().max(b.abs()) {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumKind {
    #[serde(rename = "DFE-origin")]
    DfeOrigin,
    #[serde(rename = "DFE-one")]
    DfeOne,
    #[serde(rename = "ProtectionFreeEE")]
    ProtectionFreeEe,
    InteriorPlus,
    InteriorMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    LocallyExponentiallyStable,
    AsymptoticallyStableMarginal,
    Saddle,
    Unstable,
    Indeterminate,
}

impl Stability {
    /// Marker style used in phase portraits: stable, saddle, unstable.
    pub fn marker(&self) -> &'static str {
        match self {
            Stability::LocallyExponentiallyStable | Stability::AsymptoticallyStableMarginal => "black",
            Stability::Saddle => "black-white",
            Stability::Unstable => "white",
            Stability::Indeterminate => "grey",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport<T = f64> {
    pub kind: EquilibriumKind,
    /// `None` when the defining root is not real.
    pub point: Option<MacroState<T>>,
    pub exists: bool,
    pub existence: Vec<Inequality<T>>,
    /// For `InteriorPlus`: which alternative existence clause held (`"a"` or `"b"`).
    pub clause: Option<String>,
    pub eigenvalues: Option<[Complex<T>; 2]>,
    pub stability: Option<Stability>,
}

/// Interior roots `beta±` and the discriminant they depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPm<T = f64> {
    pub discriminant: T,
    /// `(beta+, beta-)`, present iff the discriminant is non-negative.
    pub roots: Option<(T, T)>,
}

impl<T: Scalar> BetaPm<T> {
    pub fn plus(&self) -> Option<T> {
        self.roots.map(|r| r.0)
    }

    pub fn minus(&self) -> Option<T> {
        self.roots.map(|r| r.1)
    }
}

/// `beta± = ¼ [c + 3 - zeta ± sqrt((c + 3 - zeta)² + 8 (zeta (1 - mu/(2 alpha lambda)) - 1 - c))]`.
pub fn beta_pm<T: Scalar>(p: &ModelParams<T>) -> BetaPm<T> {
    let (one, two) = (T::one(), T::lit(2.0));
    let b = p.c() + T::lit(3.0) - p.zeta();
    let discriminant = b * b + T::lit(8.0) * (p.zeta() * (one - p.recovery_ratio()) - one - p.c());
    let roots = (discriminant >= T::zero()).then(|| {
        let r = discriminant.sqrt();
        ((b + r) / (two * two), (b - r) / (two * two))
    });
    BetaPm { discriminant, roots }
}

/// Smallest `zeta` for which `beta±` are real:
/// `c - 1 + 2 mu/(alpha lambda) + sqrt(4 mu/(alpha lambda) (c - 1 + mu/(alpha lambda)))`.
pub fn zeta_real_threshold<T: Scalar>(p: &ModelParams<T>) -> T {
    let r = p.mu() / p.alpha_lambda();
    p.c() - T::one() + T::lit(2.0) * r + (T::lit(4.0) * r * (p.c() - T::one() + r)).sqrt()
}

/// `2 alpha lambda (1 + c) / (2 alpha lambda - mu)`: above it the protection-free
/// endemic state loses stability. Infinite below the epidemic threshold.
pub fn zeta_protection_free_threshold<T: Scalar>(p: &ModelParams<T>) -> T {
    let g = p.infection_gain();
    if g > p.mu() {
        g * (T::one() + p.c()) / (g - p.mu())
    } else {
        T::infinity()
    }
}

/// Analytic Jacobian of the planar vector field, row-major.
pub fn jacobian<T: Scalar>(s: MacroState<T>, p: &ModelParams<T>) -> [[T; 2]; 2] {
    let (x, y) = (s.x, s.y);
    let (one, two) = (T::one(), T::lit(2.0));
    let g = p.infection_gain();
    [
        [(one - two * x) * (two * x + p.zeta() * y - one - p.c()) + two * x * (one - x), p.zeta() * x * (one - x)],
        [-g * y * (one - y), g * (one - x) * (one - two * y) - p.mu()],
    ]
}

/// Eigenvalues of a real 2×2 matrix, larger real part (or `+i` part) first.
pub fn eigenvalues<T: Scalar>(m: [[T; 2]; 2]) -> [Complex<T>; 2] {
    let half = T::lit(0.5);
    let mean = (m[0][0] + m[1][1]) * half;
    let d = (m[0][0] - m[1][1]) * half;
    let disc = d * d + m[0][1] * m[1][0];
    if disc >= T::zero() {
        let r = disc.sqrt();
        [Complex::new(mean + r, T::zero()), Complex::new(mean - r, T::zero())]
    } else {
        let r = (-disc).sqrt();
        [Complex::new(mean, r), Complex::new(mean, -r)]
    }
}

/// Stability class implied by eigenvalue real parts alone.
pub fn stability_from_eigenvalues<T: Scalar>(ev: &[Complex<T>; 2]) -> Stability {
    let tol = T::equality_tol();
    let sign = |v: T| {
        if v.abs() <= tol {
            0
        } else if v < T::zero() {
            -1
        } else {
            1
        }
    };
    match (sign(ev[0].re), sign(ev[1].re)) {
        (-1, -1) => Stability::LocallyExponentiallyStable,
        (1, 1) => Stability::Unstable,
        (1, -1) | (-1, 1) => Stability::Saddle,
        _ => Stability::Indeterminate,
    }
}

/// Reports for the five candidate equilibria, existing or not.
pub fn find_equilibria<T: Scalar>(p: &ModelParams<T>) -> Result<Vec<EquilibriumReport<T>>, EquilibriumError> {
    if !p.satisfies_assumption2() {
        return Err(EquilibriumError::Assumption2 { c: p.c().to_f64_lossy(), zeta: p.zeta().to_f64_lossy() });
    }
    let mut out = vec![
        boundary_report(EquilibriumKind::DfeOrigin, MacroState::new(T::zero(), T::zero()), vec![]),
        boundary_report(EquilibriumKind::DfeOne, MacroState::new(T::one(), T::zero()), vec![]),
        boundary_report(
            EquilibriumKind::ProtectionFreeEe,
            MacroState::new(T::zero(), T::one() - p.recovery_ratio()),
            vec![Inequality::eval("lambda > mu/(2 alpha)", p.infection_gain(), Rel::Gt, p.mu(), "Lemma 2 iii)")],
        ),
        interior_report(p, EquilibriumKind::InteriorPlus),
        interior_report(p, EquilibriumKind::InteriorMinus),
    ];
    for e in out.iter_mut() {
        if e.exists {
            let point = e.point.expect("existing equilibria have coordinates");
            e.eigenvalues = Some(eigenvalues(jacobian(point, p)));
            e.stability = Some(classify_stability(e, p)?);
        }
    }
    Ok(out)
}

fn boundary_report<T: Scalar>(
    kind: EquilibriumKind,
    point: MacroState<T>,
    existence: Vec<Inequality<T>>,
) -> EquilibriumReport<T> {
    EquilibriumReport {
        kind,
        point: Some(point),
        exists: existence.iter().all(|i| i.satisfied),
        existence,
        clause: None,
        eigenvalues: None,
        stability: None,
    }
}

fn interior_report<T: Scalar>(p: &ModelParams<T>, kind: EquilibriumKind) -> EquilibriumReport<T> {
    let betas = beta_pm(p);
    let plus = kind == EquilibriumKind::InteriorPlus;
    let beta = if plus { betas.plus() } else { betas.minus() };
    let (one, three) = (T::one(), T::lit(3.0));
    let zeta = p.zeta();
    let zeta_real = zeta_real_threshold(p);
    let pf = zeta_protection_free_threshold(p);
    let (src_item, tag) = if plus { ("Lemma 2 iv)", "beta+") } else { ("Lemma 2 v)", "beta-") };

    let mut existence = vec![Inequality::eval("discriminant >= 0", betas.discriminant, Rel::Ge, T::zero(), src_item)];
    let y_positive = beta.map(|b| {
        Inequality::eval(
            &format!("lambda > mu/(2 alpha (1 - {tag}))"),
            p.infection_gain() * (one - b),
            Rel::Gt,
            p.mu(),
            src_item,
        )
    });
    existence.extend(y_positive.clone());

    let lower = Inequality::eval("zeta >= zeta_+ (real roots)", zeta, Rel::Ge, zeta_real, src_item);
    let mut clause = None;
    let window_ok = if plus {
        let a_upper = Inequality::eval("clause a: zeta < c + 3", zeta, Rel::Lt, p.c() + three, "Lemma 2 iv) a");
        let b_lower = Inequality::eval("clause b: zeta >= c + 3", zeta, Rel::Ge, p.c() + three, "Lemma 2 iv) b");
        let b_pf = Inequality::eval(
            "clause b: zeta > 2 alpha lambda (1 + c)/(2 alpha lambda - mu)",
            zeta,
            Rel::Gt,
            pf,
            "Lemma 2 iv) b",
        );
        let a = lower.satisfied && a_upper.satisfied;
        let b = b_lower.satisfied && b_pf.satisfied;
        clause = if a {
            Some("a".to_string())
        } else if b {
            Some("b".to_string())
        } else {
            None
        };
        existence.extend([lower, a_upper, b_lower, b_pf]);
        a || b
    } else {
        let upper = Inequality::eval(
            "zeta < min(c + 3, 2 alpha lambda (c + 1)/(2 alpha lambda - mu))",
            zeta,
            Rel::Lt,
            (p.c() + three).min(pf),
            src_item,
        );
        let ok = lower.satisfied && upper.satisfied;
        existence.extend([lower, upper]);
        ok
    };

    let exists = betas.roots.is_some() && y_positive.map(|i| i.satisfied).unwrap_or(false) && window_ok;
    let point = beta.map(|b| MacroState::new(b, one - p.mu() / (p.infection_gain() * (one - b))));
    EquilibriumReport { kind, point, exists, existence, clause, eigenvalues: None, stability: None }
}

/// Local stability of an existing equilibrium.
///
/// Boundary equilibria follow the signs of their closed-form eigenvalues; the
/// two equality cases that are known to be asymptotically stable report
/// `AsymptoticallyStableMarginal`. Interior equilibria use the determinant
/// condition `mu > (4 alpha lambda / zeta)(1 - beta)²` and the trace condition
/// `mu < 2 (1 - beta)(alpha lambda - beta)`; an equality in either is `Indeterminate`.
pub fn classify_stability<T: Scalar>(
    e: &EquilibriumReport<T>,
    p: &ModelParams<T>,
) -> Result<Stability, EquilibriumError> {
    if !e.exists {
        return Err(EquilibriumError::NotExisting(e.kind));
    }
    let mu = p.mu();
    Ok(match e.kind {
        EquilibriumKind::DfeOrigin => match compare(p.infection_gain(), mu) {
            Ordering::Less => Stability::LocallyExponentiallyStable,
            Ordering::Equal => Stability::AsymptoticallyStableMarginal,
            Ordering::Greater => Stability::Saddle,
        },
        EquilibriumKind::DfeOne => match compare(p.c(), T::one()) {
            Ordering::Greater => Stability::Saddle,
            Ordering::Less => Stability::LocallyExponentiallyStable,
            Ordering::Equal => Stability::Indeterminate,
        },
        EquilibriumKind::ProtectionFreeEe => match compare(p.zeta(), zeta_protection_free_threshold(p)) {
            Ordering::Less => Stability::LocallyExponentiallyStable,
            Ordering::Equal => Stability::AsymptoticallyStableMarginal,
            Ordering::Greater => Stability::Saddle,
        },
        EquilibriumKind::InteriorPlus | EquilibriumKind::InteriorMinus => {
            let beta = e.point.expect("existing interior equilibrium").x;
            let (det, tr) = interior_stability_conditions(beta, p);
            match (compare(mu, det), compare(mu, tr)) {
                (Ordering::Equal, _) | (_, Ordering::Equal) => Stability::Indeterminate,
                (Ordering::Less, _) => Stability::Saddle,
                (Ordering::Greater, Ordering::Less) => Stability::LocallyExponentiallyStable,
                (Ordering::Greater, Ordering::Greater) => Stability::Unstable,
            }
        }
    })
}

/// Bounds `((4 alpha lambda / zeta)(1 - beta)², 2 (1 - beta)(alpha lambda - beta))`
/// that `mu` must lie strictly between for the interior equilibrium at `x = beta`
/// to be locally exponentially stable.
pub fn interior_stability_conditions<T: Scalar>(beta: T, p: &ModelParams<T>) -> (T, T) {
    let a = p.alpha_lambda();
    let w = T::one() - beta;
    (T::lit(4.0) * a / p.zeta() * w * w, T::lit(2.0) * w * (a - beta))
}

/// Existing equilibria whose vector field vanishes there.
pub fn existing_points<T: Scalar>(reports: &[EquilibriumReport<T>]) -> Vec<MacroState<T>> {
    reports.iter().filter(|e| e.exists).filter_map(|e| e.point).collect()
}

/// Residual `|f(point)|` for a report, if it has coordinates.
pub fn residual<T: Scalar>(e: &EquilibriumReport<T>, p: &ModelParams<T>) -> Option<T> {
    e.point.map(|s| {
        let (a, b) = planar_rhs(s, p);
        a.hypot(b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example1(zeta: f64) -> ModelParams {
        ModelParams::new(3.0, 0.5, 1.0, 3.0, zeta).unwrap()
    }

    fn report(reports: &[EquilibriumReport], kind: EquilibriumKind) -> &EquilibriumReport {
        reports.iter().find(|e| e.kind == kind).unwrap()
    }

    #[test]
    fn beta_plus_closed_form_values() {
        // oracle: beta+ = (-2 + sqrt(44/3)) / 4 at zeta = 8
        let b8 = beta_pm(&example1(8.0));
        assert!((b8.discriminant - (4.0 + 32.0 / 3.0)).abs() < 1e-12);
        let oracle = (-2.0 + (44.0f64 / 3.0).sqrt()) / 4.0;
        assert!((b8.plus().unwrap() - oracle).abs() < 1e-15);
        assert!((b8.plus().unwrap() - 0.4574271).abs() < 1e-6);
        // zeta = 9.5: b = -3.5, disc = 12.25 + 8 (9.5 * 2/3 - 4)
        let b95 = beta_pm(&example1(9.5));
        let oracle = (-3.5 + (12.25f64 + 8.0 * (9.5 * 2.0 / 3.0 - 4.0)).sqrt()) / 4.0;
        assert!((b95.plus().unwrap() - oracle).abs() < 1e-15);
        assert!((b95.plus().unwrap() - 0.5150697).abs() < 1e-6);
    }

    #[test]
    fn beta_absent_below_real_threshold() {
        let p = example1(8.0);
        let zp = zeta_real_threshold(&p);
        assert!((zp - 6.0).abs() < 1e-12);
        let below = p.with_zeta(zp - 0.01).unwrap();
        let b = beta_pm(&below);
        assert!(b.roots.is_none());
        assert!(b.discriminant < 0.0);
        assert!(beta_pm(&p.with_zeta(zp + 0.01).unwrap()).roots.is_some());
    }

    #[test]
    fn zeta5_three_equilibria() {
        let eq = find_equilibria(&example1(5.0)).unwrap();
        assert_eq!(eq.iter().filter(|e| e.exists).count(), 3);
        assert_eq!(report(&eq, EquilibriumKind::DfeOrigin).stability, Some(Stability::Saddle));
        assert_eq!(report(&eq, EquilibriumKind::DfeOne).stability, Some(Stability::Saddle));
        let pf = report(&eq, EquilibriumKind::ProtectionFreeEe);
        assert_eq!(pf.stability, Some(Stability::LocallyExponentiallyStable));
        let pt = pf.point.unwrap();
        assert!(pt.x == 0.0 && (pt.y - 2.0 / 3.0).abs() < 1e-15);
        assert!(!report(&eq, EquilibriumKind::InteriorPlus).exists);
        assert!(report(&eq, EquilibriumKind::InteriorPlus).point.is_none());
    }

    #[test]
    fn zeta8_stable_interior() {
        let eq = find_equilibria(&example1(8.0)).unwrap();
        assert_eq!(eq.iter().filter(|e| e.exists).count(), 4);
        for kind in [EquilibriumKind::DfeOrigin, EquilibriumKind::DfeOne, EquilibriumKind::ProtectionFreeEe] {
            assert_eq!(report(&eq, kind).stability, Some(Stability::Saddle), "{kind:?}");
        }
        let ip = report(&eq, EquilibriumKind::InteriorPlus);
        assert_eq!(ip.clause.as_deref(), Some("b"));
        assert_eq!(ip.stability, Some(Stability::LocallyExponentiallyStable));
        let pt = ip.point.unwrap();
        assert!((pt.x - 0.457427).abs() < 1e-6 && (pt.y - 0.385643).abs() < 1e-6, "{pt:?}");
        assert!(residual(ip, &example1(8.0)).unwrap() < 1e-9);
        assert!(!report(&eq, EquilibriumKind::InteriorMinus).exists);
    }

    #[test]
    fn zeta95_unstable_interior() {
        let p = example1(9.5);
        let eq = find_equilibria(&p).unwrap();
        assert_eq!(eq.iter().filter(|e| e.exists).count(), 4);
        let ip = report(&eq, EquilibriumKind::InteriorPlus);
        let pt = ip.point.unwrap();
        // closed-form oracle; y = 1 - mu / (2 alpha lambda (1 - beta+))
        let beta = (-3.5 + (12.25f64 + 8.0 * (9.5 * 2.0 / 3.0 - 4.0)).sqrt()) / 4.0;
        let y = 1.0 - 1.0 / (3.0 * (1.0 - beta));
        assert!((pt.x - beta).abs() < 1e-15 && (pt.y - y).abs() < 1e-15, "{pt:?}");
        assert!((pt.x - 0.515069).abs() < 1e-6 && (pt.y - 0.312617).abs() < 1e-6, "{pt:?}");
        assert_eq!(ip.stability, Some(Stability::Unstable));
        // trace oracle: 2 b (1 - b) + mu - 2 alpha lambda (1 - b)
        let b = pt.x;
        let trace = 2.0 * b * (1.0 - b) + 1.0 - 3.0 * (1.0 - b);
        assert!((trace - 0.04476).abs() < 1e-5);
        let j = jacobian(pt, &p);
        assert!((j[0][0] + j[1][1] - trace).abs() < 1e-12);
    }

    #[test]
    fn boundary_eigenvalues_match_closed_forms() {
        let p = example1(5.0);
        let ev = eigenvalues(jacobian(MacroState::new(0.0, 0.0), &p));
        assert!((ev[0].re - 2.0).abs() < 1e-12 && (ev[1].re + 4.0).abs() < 1e-12);
        let ev = eigenvalues(jacobian(MacroState::new(1.0, 0.0), &p));
        assert!((ev[0].re - 2.0).abs() < 1e-12 && (ev[1].re + 1.0).abs() < 1e-12);
        let ev = eigenvalues(jacobian(MacroState::new(0.0, 2.0 / 3.0), &p));
        assert!((ev[0].re + 2.0 / 3.0).abs() < 1e-12 && (ev[1].re + 2.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_dfe_is_marginal() {
        let p = ModelParams::new(3.0, 1.0 / 6.0, 1.0, 3.0, 5.0).unwrap();
        let eq = find_equilibria(&p).unwrap();
        let origin = report(&eq, EquilibriumKind::DfeOrigin);
        assert_eq!(classify_stability(origin, &p).unwrap(), Stability::AsymptoticallyStableMarginal);
        assert!(!report(&eq, EquilibriumKind::ProtectionFreeEe).exists);
    }

    #[test]
    fn protection_free_threshold_is_marginal() {
        let p = example1(6.0);
        let eq = find_equilibria(&p).unwrap();
        assert_eq!(
            report(&eq, EquilibriumKind::ProtectionFreeEe).stability,
            Some(Stability::AsymptoticallyStableMarginal)
        );
    }

    #[test]
    fn refuses_without_assumption2() {
        let p = ModelParams::new(3.0, 0.5, 1.0, 0.5, 5.0).unwrap();
        assert!(matches!(find_equilibria(&p), Err(EquilibriumError::Assumption2 { .. })));
    }

    #[test]
    fn classify_rejects_missing_equilibrium() {
        let p = example1(5.0);
        let eq = find_equilibria(&p).unwrap();
        let ip = report(&eq, EquilibriumKind::InteriorPlus);
        assert_eq!(classify_stability(ip, &p), Err(EquilibriumError::NotExisting(EquilibriumKind::InteriorPlus)));
    }

    #[test]
    fn two_interior_equilibria_region() {
        // c below 4 alpha lambda / mu - 3: both roots exist for zeta_+ <= zeta < min(c + 3, 3)
        let p = ModelParams::new(3.0, 1.0, 1.0, 1.5, 2.8).unwrap();
        let eq = find_equilibria(&p).unwrap();
        let plus = report(&eq, EquilibriumKind::InteriorPlus);
        let minus = report(&eq, EquilibriumKind::InteriorMinus);
        assert!(plus.exists && minus.exists, "{plus:#?} {minus:#?}");
        assert_eq!(plus.clause.as_deref(), Some("a"));
        assert!(residual(plus, &p).unwrap() < 1e-12);
        assert!(residual(minus, &p).unwrap() < 1e-12);
        for e in [plus, minus] {
            let ev = e.eigenvalues.unwrap();
            assert_eq!(e.stability, Some(stability_from_eigenvalues(&ev)));
        }
    }

    #[test]
    fn single_precision_equilibria() {
        let p: ModelParams<f32> = example1(8.0).cast();
        let eq = find_equilibria(&p).unwrap();
        let ip = eq.iter().find(|e| e.kind == EquilibriumKind::InteriorPlus).unwrap();
        assert_eq!(ip.stability, Some(Stability::LocallyExponentiallyStable));
        assert!((ip.point.unwrap().x - 0.457427).abs() < 1e-5);
    }

    #[test]
    fn report_json_shape() {
        let eq = find_equilibria(&example1(8.0)).unwrap();
        let v = serde_json::to_value(&eq[2]).unwrap();
        assert_eq!(v["kind"], "ProtectionFreeEE");
        let ineq = &v["existence"][0];
        for key in ["name", "lhs", "rhs", "satisfied", "source"] {
            assert!(ineq.get(key).is_some(), "{key}");
        }
        assert_eq!(ineq.as_object().unwrap().len(), 5);
    }

    fn valid_params() -> impl Strategy<Value = ModelParams> {
        (0.1..10.0f64, 0.01..1.0f64, 0.05..5.0f64, 1.001..8.0f64, 0.001..15.0f64)
            .prop_map(|(a, l, m, c, dz)| ModelParams::new(a, l, m, c, c + 1.0 + dz).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn jacobian_matches_central_differences(p in valid_params(), x in 0.0..=1.0f64, y in 0.0..=1.0f64) {
            let h = 1e-6;
            let j = jacobian(MacroState::new(x, y), &p);
            let f = |x: f64, y: f64| planar_rhs(MacroState::new(x, y), &p);
            let (fxp, fxm) = (f(x + h, y), f(x - h, y));
            let (fyp, fym) = (f(x, y + h), f(x, y - h));
            let fd = [
                [(fxp.0 - fxm.0) / (2.0 * h), (fyp.0 - fym.0) / (2.0 * h)],
                [(fxp.1 - fxm.1) / (2.0 * h), (fyp.1 - fym.1) / (2.0 * h)],
            ];
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((j[r][c] - fd[r][c]).abs() < 1e-5, "J[{r}][{c}] = {} vs {}", j[r][c], fd[r][c]);
                }
            }
        }

        #[test]
        fn existing_equilibria_are_stationary(p in valid_params()) {
            for e in find_equilibria(&p).unwrap().iter().filter(|e| e.exists) {
                prop_assert!(residual(e, &p).unwrap() < 1e-9, "{e:?}");
                let pt = e.point.unwrap();
                prop_assert!(pt.in_unit_square());
            }
        }

        #[test]
        fn beta_plus_below_one(p in valid_params()) {
            if let Some(b) = beta_pm(&p).plus() {
                prop_assert!(b < 1.0);
            }
        }

        #[test]
        fn stability_agrees_with_eigenvalues(p in valid_params()) {
            for e in find_equilibria(&p).unwrap().iter().filter(|e| e.exists) {
                let from_ev = stability_from_eigenvalues(&e.eigenvalues.unwrap());
                match e.stability.unwrap() {
                    Stability::AsymptoticallyStableMarginal | Stability::Indeterminate => {}
                    s => prop_assert_eq!(s, from_ev, "{:?}", e),
                }
            }
        }

        #[test]
        fn interior_existence_matches_geometry(p in valid_params()) {
            // independent check: the root must lie in (0,1) with 0 < y < 1
            let eq = find_equilibria(&p).unwrap();
            for e in eq.iter().filter(|e| matches!(e.kind, EquilibriumKind::InteriorPlus | EquilibriumKind::InteriorMinus)) {
                if let Some(pt) = e.point {
                    let geometric = pt.x > 0.0 && pt.x < 1.0 && pt.y > 0.0 && pt.y < 1.0;
                    let margin = [pt.x, 1.0 - pt.x, pt.y].iter().fold(f64::MAX, |m, v| m.min(v.abs()));
                    if margin > 1e-9 {
                        prop_assert_eq!(e.exists, geometric, "{:?}", e);
                    }
                }
            }
        }
    }
}

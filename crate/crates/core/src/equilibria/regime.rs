use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{
    compare, find_equilibria, zeta_protection_free_threshold, zeta_real_threshold, EquilibriumReport, Inequality, Rel,
};
use crate::model::ModelParams;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    InvalidAssumptions,
    #[serde(rename = "GlobalDFE")]
    GlobalDfe,
    ProtectionFreeEndemic,
    InteriorEndemic,
    LimitCycle,
    LocalOnly,
    Marginal,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 7] = [
        RegimeLabel::InvalidAssumptions,
        RegimeLabel::GlobalDfe,
        RegimeLabel::ProtectionFreeEndemic,
        RegimeLabel::InteriorEndemic,
        RegimeLabel::LimitCycle,
        RegimeLabel::LocalOnly,
        RegimeLabel::Marginal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::InvalidAssumptions => "InvalidAssumptions",
            RegimeLabel::GlobalDfe => "GlobalDFE",
            RegimeLabel::ProtectionFreeEndemic => "ProtectionFreeEndemic",
            RegimeLabel::InteriorEndemic => "InteriorEndemic",
            RegimeLabel::LimitCycle => "LimitCycle",
            RegimeLabel::LocalOnly => "LocalOnly",
            RegimeLabel::Marginal => "Marginal",
        }
    }

    /// Whether the label carries a global convergence statement rather than a
    /// local one.
    pub fn is_global(&self) -> bool {
        matches!(self, RegimeLabel::GlobalDfe | RegimeLabel::LimitCycle)
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed-form boundaries in parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds<T = f64> {
    /// `mu / (2 alpha)` on `lambda` (doubled for one-way transmission).
    pub lambda_epidemic: T,
    /// `[4 alpha lambda / mu - 3, 32 alpha lambda / (5 mu) - 3)` on `c`.
    pub c_window: (T, T),
    /// Smallest `zeta` with real interior roots.
    pub zeta_real: T,
    /// `2 alpha lambda (1 + c) / (2 alpha lambda - mu)`.
    pub zeta_protection_free: T,
    /// Lower bound on `zeta` of condition a.
    pub zeta_cond_a: T,
    /// `(zeta_bar-, zeta_bar+)`: roots of the trace condition.
    pub zeta_bar: (T, T),
}

pub fn regime_thresholds<T: Scalar>(p: &ModelParams<T>) -> RegimeThresholds<T> {
    let a = p.alpha_lambda();
    let (mu, c) = (p.mu(), p.c());
    let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
    let r = mu / a;
    let cond_a = c - one + T::lit(25.0 / 8.0) * r + T::lit(2.5) * (r * (c - one + T::lit(25.0 / 16.0) * r)).sqrt();
    let scale = a / (two * a - mu);
    let root = ((a - one) * (a - one) + two * mu).sqrt();
    let rest = a * (c - three) + two * mu;
    RegimeThresholds {
        // lambda at which 2 * alpha_lambda() == mu
        lambda_epidemic: p.lambda() * mu / p.infection_gain(),
        c_window: (T::lit(4.0) * a / mu - three, T::lit(32.0) * a / (T::lit(5.0) * mu) - three),
        zeta_real: zeta_real_threshold(p),
        zeta_protection_free: zeta_protection_free_threshold(p),
        zeta_cond_a: cond_a,
        zeta_bar: (scale * ((c + one) * (one - root) + rest), scale * ((c + one) * (one + root) + rest)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RegimeReport<T = f64> {
    pub label: RegimeLabel,
    pub params: ModelParams<T>,
    pub thresholds: RegimeThresholds<T>,
    /// Always the same ten inequalities in the same order; see [`CONDITION_IDS`].
    pub conditions: Vec<Inequality<T>>,
    /// Empty when the equilibrium analysis is refused.
    pub equilibria: Vec<EquilibriumReport<T>>,
    pub global_claim: bool,
}

impl<T: Scalar> RegimeReport<T> {
    pub fn condition(&self, id: &str) -> Option<&Inequality<T>> {
        self.conditions.iter().find(|c| c.name == id)
    }
}

pub const CONDITION_IDS: [&str; 10] = [
    "c_gt_1",
    "zeta_gt_c_plus_1",
    "below_epidemic_threshold",
    "c_window_lower",
    "c_window_upper",
    "above_protection_free",
    "cond_a",
    "cond_b",
    "cond_c",
    "above_zeta_bar_plus",
];

fn conditions<T: Scalar>(p: &ModelParams<T>, th: &RegimeThresholds<T>) -> Vec<Inequality<T>> {
    let zeta = p.zeta();
    vec![
        Inequality::eval(CONDITION_IDS[0], p.c(), Rel::Gt, T::one(), "Assumption 2"),
        Inequality::eval(CONDITION_IDS[1], zeta, Rel::Gt, p.c() + T::one(), "Assumption 2"),
        Inequality::eval(CONDITION_IDS[2], p.lambda(), Rel::Le, th.lambda_epidemic, "Theorem 1"),
        Inequality::eval(CONDITION_IDS[3], p.c(), Rel::Ge, th.c_window.0, "Proposition 2"),
        Inequality::eval(CONDITION_IDS[4], p.c(), Rel::Lt, th.c_window.1, "Proposition 2"),
        Inequality::eval(CONDITION_IDS[5], zeta, Rel::Gt, th.zeta_protection_free, "Proposition 2 i)/ii)"),
        Inequality::eval(CONDITION_IDS[6], zeta, Rel::Gt, th.zeta_cond_a, "Proposition 2 ii) a"),
        Inequality::eval(CONDITION_IDS[7], zeta, Rel::Gt, th.zeta_bar.0, "Proposition 2 ii) b"),
        Inequality::eval(CONDITION_IDS[8], zeta, Rel::Lt, th.zeta_bar.1, "Proposition 2 ii) c"),
        Inequality::eval(CONDITION_IDS[9], zeta, Rel::Gt, th.zeta_bar.1, "Theorem 2"),
    ]
}

/// Assigns exactly one regime label, with the full inequality ledger.
///
/// Near-equalities (relative [`Scalar::equality_tol`]) on a strict boundary
/// give `Marginal`; on a weak boundary they count as satisfied.
pub fn classify_regime<T: Scalar>(p: &ModelParams<T>) -> RegimeReport<T> {
    let thresholds = regime_thresholds(p);
    let conds = conditions(p, &thresholds);
    let equilibria = find_equilibria(p).unwrap_or_default();
    let label = decide(&conds, p);
    RegimeReport { label, params: *p, thresholds, conditions: conds, equilibria, global_claim: label.is_global() }
}

fn decide<T: Scalar>(c: &[Inequality<T>], p: &ModelParams<T>) -> RegimeLabel {
    let weak = |i: &Inequality<T>| i.satisfied || i.near_equal;
    let [c_gt_1, zeta_gt, below, lower, upper, above_pf, a, b, cc, above_bar] = c else {
        unreachable!("fixed condition list")
    };
    if !(c_gt_1.satisfied && zeta_gt.satisfied) {
        return RegimeLabel::InvalidAssumptions;
    }
    if weak(below) {
        return RegimeLabel::GlobalDfe;
    }
    if !weak(lower) {
        return RegimeLabel::LocalOnly;
    }
    if upper.near_equal {
        return RegimeLabel::Marginal;
    }
    if !upper.satisfied {
        return RegimeLabel::LocalOnly;
    }
    match compare(p.zeta(), above_pf.rhs) {
        Ordering::Less => RegimeLabel::ProtectionFreeEndemic,
        Ordering::Equal => RegimeLabel::Marginal,
        Ordering::Greater => {
            if [a, b, cc].iter().all(|i| i.strictly_holds()) {
                RegimeLabel::InteriorEndemic
            } else if a.strictly_holds() && above_bar.strictly_holds() {
                RegimeLabel::LimitCycle
            } else if [a, b, cc].iter().any(|i| i.near_equal) {
                RegimeLabel::Marginal
            } else {
                RegimeLabel::LocalOnly
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Directionality;
    use proptest::prelude::*;

    fn example1(zeta: f64) -> ModelParams {
        ModelParams::new(3.0, 0.5, 1.0, 3.0, zeta).unwrap()
    }

    #[test]
    fn example_thresholds() {
        let th = regime_thresholds(&example1(8.0));
        // oracles evaluated by hand at alpha lambda = 1.5, mu = 1, c = 3
        assert!((th.zeta_protection_free - 6.0).abs() < 1e-12);
        let a = 2.0 + 25.0 / 12.0 + 2.5 * ((2.0f64 / 3.0) * (2.0 + 25.0 / 24.0)).sqrt();
        assert!((th.zeta_cond_a - a).abs() < 1e-12);
        assert!((th.zeta_cond_a - 7.643335).abs() < 1e-5);
        assert!((th.zeta_bar.1 - 9.0).abs() < 1e-12);
        assert!(th.zeta_bar.0.abs() < 1e-12);
        assert!((th.c_window.0 - 3.0).abs() < 1e-12 && (th.c_window.1 - 6.6).abs() < 1e-12);
        assert!((th.lambda_epidemic - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn example_labels() {
        assert_eq!(classify_regime(&example1(5.0)).label, RegimeLabel::ProtectionFreeEndemic);
        assert_eq!(classify_regime(&example1(8.0)).label, RegimeLabel::InteriorEndemic);
        let r = classify_regime(&example1(9.5));
        assert_eq!(r.label, RegimeLabel::LimitCycle);
        assert!(r.global_claim);
        assert_eq!(r.conditions.len(), CONDITION_IDS.len());
        let lower = r.condition("c_window_lower").unwrap();
        assert!(lower.satisfied && lower.near_equal);
    }

    #[test]
    fn boundaries_are_marginal() {
        assert_eq!(classify_regime(&example1(6.0)).label, RegimeLabel::Marginal);
        assert_eq!(classify_regime(&example1(9.0)).label, RegimeLabel::Marginal);
        let th = regime_thresholds(&example1(8.0));
        assert_eq!(classify_regime(&example1(th.zeta_cond_a)).label, RegimeLabel::Marginal);
    }

    #[test]
    fn saddle_interior_band_is_local_only() {
        // between the protection-free threshold and condition a the interior point is a saddle
        assert_eq!(classify_regime(&example1(7.0)).label, RegimeLabel::LocalOnly);
    }

    #[test]
    fn below_threshold_is_global_dfe() {
        let p = ModelParams::new(3.0, 0.1, 1.0, 3.0, 5.0).unwrap();
        let r = classify_regime(&p);
        assert_eq!(r.label, RegimeLabel::GlobalDfe);
        assert!(r.global_claim);
        let at = ModelParams::new(3.0, 1.0 / 6.0, 1.0, 3.0, 5.0).unwrap();
        assert_eq!(classify_regime(&at).label, RegimeLabel::GlobalDfe);
    }

    #[test]
    fn invalid_assumptions_still_report() {
        let r = classify_regime(&example1(4.0));
        assert_eq!(r.label, RegimeLabel::InvalidAssumptions);
        assert!(r.equilibria.is_empty());
        assert_eq!(r.conditions.len(), 10);
    }

    #[test]
    fn outside_window_is_local_only() {
        // c = 2 < 4 alpha lambda / mu - 3 = 3: two-interior-equilibria side
        let p = ModelParams::new(3.0, 0.5, 1.0, 2.0, 8.0).unwrap();
        assert_eq!(classify_regime(&p).label, RegimeLabel::LocalOnly);
        let p = ModelParams::new(3.0, 0.5, 1.0, 7.0, 20.0).unwrap();
        assert_eq!(classify_regime(&p).label, RegimeLabel::LocalOnly);
    }

    #[test]
    fn one_way_transmission_halves_alpha_lambda() {
        // effective alpha lambda = 0.75: still above threshold, window lower bound drops to 0
        let p = example1(8.0).with_directionality(Directionality::ActivatorInfects);
        let th = regime_thresholds(&p);
        assert!((th.c_window.0 - 0.0).abs() < 1e-12);
        assert!((th.lambda_epidemic - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_sweep_label_sequence() {
        let labels: Vec<_> = (0..=70).map(|k| classify_regime(&example1(4.0 + 0.1 * k as f64)).label).collect();
        let expect = |z: f64| {
            if z <= 4.0 + 1e-9 {
                RegimeLabel::InvalidAssumptions
            } else if z < 6.0 - 1e-9 {
                RegimeLabel::ProtectionFreeEndemic
            } else if (z - 6.0).abs() < 1e-9 || (z - 9.0).abs() < 1e-9 {
                RegimeLabel::Marginal
            } else if z < 7.64 {
                RegimeLabel::LocalOnly
            } else if z < 9.0 {
                RegimeLabel::InteriorEndemic
            } else {
                RegimeLabel::LimitCycle
            }
        };
        for (k, l) in labels.iter().enumerate() {
            let z = 4.0 + 0.1 * k as f64;
            assert_eq!(*l, expect(z), "zeta = {z}");
        }
    }

    #[test]
    fn report_serializes_conditions() {
        let v = serde_json::to_value(classify_regime(&example1(9.5))).unwrap();
        assert_eq!(v["label"], "LimitCycle");
        assert_eq!(v["conditions"].as_array().unwrap().len(), 10);
        assert_eq!(v["conditions"][9]["source"], "Theorem 2");
    }

    fn any_params() -> impl Strategy<Value = ModelParams> {
        (0.1..10.0f64, 0.01..=1.0f64, 0.05..5.0f64, 0.0..10.0f64, 0.0..25.0f64)
            .prop_map(|(a, l, m, c, z)| ModelParams::new(a, l, m, c, z).unwrap())
    }

    proptest! {
        #[test]
        fn labels_invariant_under_alpha_lambda_rescaling(p in any_params(), u in 0.0..1.0f64) {
            let k = 1.0 + u * (1.0 / p.lambda() - 1.0);
            let q = ModelParams::new(p.alpha() / k, (p.lambda() * k).min(1.0), p.mu(), p.c(), p.zeta()).unwrap();
            prop_assert_eq!(classify_regime(&p).label, classify_regime(&q).label);
        }

        #[test]
        fn labels_total_and_exclusive(p in any_params()) {
            let r = classify_regime(&p);
            prop_assert_eq!(RegimeLabel::ALL.iter().filter(|l| **l == r.label).count(), 1);
            prop_assert_eq!(r.conditions.len(), 10);
            for (c, id) in r.conditions.iter().zip(CONDITION_IDS) {
                prop_assert_eq!(c.name.as_str(), id);
                prop_assert!(!c.source.is_empty());
            }
            prop_assert_eq!(r.label == RegimeLabel::InvalidAssumptions, !p.satisfies_assumption2());
        }

        #[test]
        fn classification_is_pure(p in any_params()) {
            // Debug text, since undefined thresholds are NaN
            prop_assert_eq!(format!("{:?}", classify_regime(&p)), format!("{:?}", classify_regime(&p)));
        }
    }
}

//! Model parameters, macroscopic state and the complete-graph payoffs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Which contacts can transmit the disease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directionality {
    /// Either party of a contact can infect the other.
    #[default]
    Bidirectional,
    /// Only an infected agent that initiates the contact can infect its partner.
    ActivatorInfects,
}

impl Directionality {
    pub fn is_bidirectional(&self) -> bool {
        matches!(self, Directionality::Bidirectional)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("alpha must be finite and > 0 (got {0})")]
    Alpha(f64),
    #[error("lambda out of (0,1] (got {0})")]
    Lambda(f64),
    #[error("mu must be finite and > 0 (got {0})")]
    Mu(f64),
    #[error("c must be finite and >= 0 (got {0})")]
    Cost(f64),
    #[error("zeta must be finite and >= 0 (got {0})")]
    Zeta(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams<T> {
    alpha: T,
    lambda: T,
    mu: T,
    c: T,
    zeta: T,
    #[serde(default)]
    directionality: Directionality,
}

/// The five model parameters.
///
/// Construction validates ranges; the values are immutable afterwards.
/// Serializes as the flat object `{"alpha", "lambda", "mu", "c", "zeta"}`
/// (plus `"directionality"` when it is not the bidirectional default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ModelParams<T = f64> {
    alpha: T,
    lambda: T,
    mu: T,
    c: T,
    zeta: T,
    #[serde(skip_serializing_if = "Directionality::is_bidirectional")]
    directionality: Directionality,
}

impl<T: Scalar> TryFrom<RawParams<T>> for ModelParams<T> {
    type Error = ParamError;

    fn try_from(raw: RawParams<T>) -> Result<Self, Self::Error> {
        ModelParams::new(raw.alpha, raw.lambda, raw.mu, raw.c, raw.zeta)
            .map(|p| p.with_directionality(raw.directionality))
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Validates the raw parameters. Never clamps.
    pub fn new(alpha: T, lambda: T, mu: T, c: T, zeta: T) -> Result<Self, ParamError> {
        let zero = T::zero();
        if !(alpha.is_finite() && alpha > zero) {
            return Err(ParamError::Alpha(alpha.to_f64_lossy()));
        }
        if !(lambda > zero && lambda <= T::one()) {
            return Err(ParamError::Lambda(lambda.to_f64_lossy()));
        }
        if !(mu.is_finite() && mu > zero) {
            return Err(ParamError::Mu(mu.to_f64_lossy()));
        }
        if !(c.is_finite() && c >= zero) {
            return Err(ParamError::Cost(c.to_f64_lossy()));
        }
        if !(zeta.is_finite() && zeta >= zero) {
            return Err(ParamError::Zeta(zeta.to_f64_lossy()));
        }
        Ok(Self { alpha, lambda, mu, c, zeta, directionality: Directionality::Bidirectional })
    }

    pub fn with_directionality(mut self, directionality: Directionality) -> Self {
        self.directionality = directionality;
        self
    }

    pub fn with_zeta(self, zeta: T) -> Result<Self, ParamError> {
        Self::new(self.alpha, self.lambda, self.mu, self.c, zeta).map(|p| p.with_directionality(self.directionality))
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn zeta(&self) -> T {
        self.zeta
    }

    pub fn directionality(&self) -> Directionality {
        self.directionality
    }

    /// `c > 1` and `zeta > c + 1`: adoption is disfavoured without disease and
    /// favoured when everyone is infected. Required by the analytical results only.
    pub fn satisfies_assumption2(&self) -> bool {
        self.c > T::one() && self.zeta > self.c + T::one()
    }

    /// The product `alpha * lambda` as it enters the mean-field equations.
    ///
    /// With one-directional transmission only one of the two contact channels
    /// survives, which halves the effective activity.
    pub fn alpha_lambda(&self) -> T {
        match self.directionality {
            Directionality::Bidirectional => self.alpha * self.lambda,
            Directionality::ActivatorInfects => self.alpha * self.lambda * T::lit(0.5),
        }
    }

    /// Coefficient of the infection term in `y' = g y (1-x)(1-y) - mu y`.
    pub fn infection_gain(&self) -> T {
        T::lit(2.0) * self.alpha_lambda()
    }

    /// `mu / (2 alpha lambda)`; one minus this is the protection-free prevalence.
    pub fn recovery_ratio(&self) -> T {
        self.mu / self.infection_gain()
    }

    /// `lambda > mu / (2 alpha)`, written as `2 alpha lambda > mu`.
    pub fn above_threshold(&self) -> bool {
        self.infection_gain() > self.mu
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            alpha: U::lit(self.alpha.to_f64_lossy()),
            lambda: U::lit(self.lambda.to_f64_lossy()),
            mu: U::lit(self.mu.to_f64_lossy()),
            c: U::lit(self.c.to_f64_lossy()),
            zeta: U::lit(self.zeta.to_f64_lossy()),
            directionality: self.directionality,
        }
    }
}

/// Validates five raw scalars into [`ModelParams`].
pub fn validate_params<T: Scalar>(alpha: T, lambda: T, mu: T, c: T, zeta: T) -> Result<ModelParams<T>, ParamError> {
    ModelParams::new(alpha, lambda, mu, c, zeta)
}

/// Planar mean-field state: protection fraction `x` and prevalence `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroState<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> MacroState<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn in_unit_square(&self) -> bool {
        let (zero, one) = (T::zero(), T::one());
        self.x >= zero && self.x <= one && self.y >= zero && self.y <= one
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffPair<T = f64> {
    /// Payoff for adopting protection.
    pub pi1: T,
    /// Payoff for not adopting.
    pub pi0: T,
}

/// Payoffs when every agent is influenced by the whole population:
/// `pi1 = x + zeta y`, `pi0 = 1 - x + c`.
pub fn global_payoffs<T: Scalar>(s: MacroState<T>, p: &ModelParams<T>) -> PayoffPair<T> {
    PayoffPair { pi1: s.x + p.zeta * s.y, pi0: T::one() - s.x + p.c }
}

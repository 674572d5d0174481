//! Coupled behavioural-epidemic dynamics: SIS contagion on an activity-driven
//! contact layer, with protection adopted or dropped by imitation on a static
//! influence layer.
//!
//! * [`abm`]: exact event-driven agent-based simulation.
//! * [`meanfield`]: planar and per-node mean-field ODEs.
//! * [`equilibria`]: closed-form equilibria, local stability and regime labels.
//! * [`cycles`]: periodic-orbit detection and the trapping region.
//!
//! The analytical modules are generic over [`Scalar`] (`f32`, `f64`); the
//! aliases below fix the scalar type.

pub mod abm;
pub mod cycles;
pub mod equilibria;
pub mod graph;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod scalar;

pub use graph::{GraphError, InfluenceGraph};
pub use model::{global_payoffs, validate_params, Directionality, MacroState, ModelParams, ParamError, PayoffPair};
pub use scalar::Scalar;

pub type ModelParamsF32 = ModelParams<f32>;
pub type MacroStateF32 = MacroState<f32>;
pub type TrajectoryF32 = meanfield::Trajectory<f32>;
pub type EquilibriumReportF32 = equilibria::EquilibriumReport<f32>;
pub type RegimeReportF32 = equilibria::RegimeReport<f32>;
pub type CycleReportF32 = cycles::CycleReport<f32>;

pub type Trajectory = meanfield::Trajectory<f64>;
pub type EquilibriumReport = equilibria::EquilibriumReport<f64>;
pub type RegimeReport = equilibria::RegimeReport<f64>;
pub type CycleReport = cycles::CycleReport<f64>;

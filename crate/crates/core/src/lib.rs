//! Probabilistic couplings, CHSH and joint-distribution analysis, finite-sample
//! Bell-test protocols, and a contextual hidden-variable model with
//! instrument variables.
//!
//! The central object is a [`Behavior`]: four context-indexed outcome
//! distributions. Behaviors come from quantum predictions ([`quantum`]), from
//! couplings of hidden-variable models ([`coupling`]), or from simulated trial
//! logs ([`finite_sample`], [`contextual`]), and are analyzed by
//! [`Behavior::chsh`], [`Behavior::no_signaling_delta`] and [`fine::fine_check`].

pub mod behavior;
pub mod contextual;
pub mod coupling;
pub mod error;
pub mod fine;
pub mod finite_sample;
pub mod lp;
pub mod quantum;
pub mod rng;
pub mod scalar;
pub mod trials;

pub use behavior::{
    Behavior, ChshReport, ChshVariant, Context, ExactBehavior, LoadedBehavior, Outcome, OutcomeDist, Party, Setting,
    SettingLabel,
};
pub use contextual::{
    condition_on_coincidences, malus_instrument_model, ConditionedBehavior, ContextualModel, ContextualSummary,
    HiddenVariables,
};
pub use coupling::{
    behavior_of, build_coupling, four_product_expectation, lf_counterexample, Coupling, CouplingJp, HvModel, Omega,
};
pub use error::{Error, Result};
pub use fine::{fine_check, FineResult, InfeasibleReason};
pub use finite_sample::{max_s_disconnected, spreadsheet_experiment, urn_protocol, ViolationStats};
pub use quantum::{singlet_behavior, trace_expectation, DensityMatrix4, MeasurementAngle};
pub use scalar::Scalar;
pub use trials::{TrialLog, TrialRecord};

pub use num_rational::BigRational;

/// Crate version, echoed in result envelopes.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

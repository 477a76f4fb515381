//! Monte-Carlo verification, drift experiments and metrics.

pub mod drift;
pub mod metrics;
pub mod noise;
pub mod theorems;

pub use drift::{drift_experiment, DriftReport};
pub use metrics::{premise_study, sensitivity_sweep, warping_error, FlowSource, PremiseRow, SweepRow};
pub use noise::{NoiseKind, NoiseModel, VarianceLaw};
pub use theorems::{verify_theorem1, verify_theorem2, ErrorSeries, Theorem1Report, Theorem2Report};

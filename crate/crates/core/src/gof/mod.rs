//! Goodness-of-fit testing against parametric null classes.

mod errors;
mod null_class;
pub mod optimize;
pub mod stats;
mod testing;

pub use errors::{
    calibrate, estimate_errors, separations, summarize, uniform_boundedness_probe, Calibration, ErrorEstimate,
    ErrorRun, ProbeRow, ReplicateOutcome, Scenario, TruthLabel, MIN_REPS,
};
pub use null_class::{NullClass, NullKind};
pub use optimize::OptConfig;
pub use testing::{
    build_alternative, bump, critical_value, infimum_distance, run_test, Alternative, BumpConfig, CriticalMode,
    Distance, Infimum, TestReport, TestSpec, MIN_CALIBRATION_DRAWS,
};

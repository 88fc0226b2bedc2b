//! Experiment plans, parallel grid execution, scaling fits and CSV/JSON
//! reporting.

mod experiments;
mod fit;
mod plan;
mod report;

pub use experiments::{run, run_point, Outcome, PointResult};
pub use fit::{fit_loglog, ScalingFit};
pub use plan::{
    ExperimentKind, ExperimentOptions, ExperimentPlan, Grid, GridPoint, InitialCondensate, OneOrMany,
};
pub use report::{config_hash, write_outputs, Manifest, PointStatus, Status, CODE_VERSION};

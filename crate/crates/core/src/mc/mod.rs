//! Monte Carlo experiments: rare-event probabilities, averaging studies
//! and consistency of decay rates with the rate function.

mod averaging;
mod consistency;
mod plan;
mod rare_event;

pub use averaging::{run_averaging_study, AveragingReport, AveragingStudy, DeltaError};
pub use consistency::{run_ldp_consistency, ConsistencyReport, LIMIT_TOLERANCE};
pub use plan::{proportion, DeltaRule, Event, ExperimentPlan};
pub use rare_event::{run_rare_event, EpsilonEstimate, EstimateReport, CHUNK};

//! Analyses over an assembled model: first-tier decomposition, hierarchical
//! aggregation, national shares, per-capita values, regression between
//! indicators and lifecycle share reports.

mod aggregate;
mod decompose;
mod lifecycle;
mod regression;
mod shares;

pub use aggregate::{aggregate, ContributionTable, Contributions, DIRECT_LABEL};
pub use decompose::{first_tier_decomposition, DecompositionResult};
pub use lifecycle::{lifecycle_report, ComponentShare, GroupShare, LifecycleComponent, LifecycleReport};
pub use regression::{contribution_points, midpoint_endpoint_regression, ScatterPoint};
pub use shares::{national_shares, per_capita, Attribution, NationalShares, TargetSet};

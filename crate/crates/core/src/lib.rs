//! Environmentally-extended input-output footprints.
//!
//! Pipeline: [`ingest`] reads supply/use tables, physical flows,
//! concordances and characterization factors; [`assemble`] turns them into
//! an [`IOModel`]; [`solve`] computes footprints with Leontief solves;
//! [`analyze`] decomposes, aggregates and compares results; [`archive`]
//! stores assembled models.
//!
//! ```
//! use eeio_core::{footprint, synthetic, DemandScope};
//!
//! let (model, _report) = eeio_core::assemble(&synthetic::three_sector());
//! let model = model.unwrap();
//! let q = footprint(&model, &DemandScope::Consumption).unwrap();
//! assert!(q.total("Climate change").unwrap().value > 0.0);
//! ```

pub mod analyze;
pub mod archive;
pub mod assemble;
pub mod error;
pub mod ingest;
pub mod model;
pub mod solve;
pub mod synthetic;
pub mod units;

pub use analyze::{
    aggregate, contribution_points, first_tier_decomposition, lifecycle_report,
    midpoint_endpoint_regression, national_shares, per_capita, Attribution, ContributionTable,
    Contributions, DecompositionResult, LifecycleComponent, LifecycleReport, NationalShares,
    ScatterPoint, TargetSet,
};
pub use assemble::{
    allocate_flows, apply_domestic_technology_assumption, assemble, build_technology_matrix,
    check_productive, normalize_extensions, AssemblyReport, IOModel, ProductivityDiagnostic,
};
pub use error::{Error, IngestError, Result};
pub use ingest::DataSet;
pub use model::*;
pub use solve::{footprint, footprint_of, multipliers, sector_intensity, total_requirements, LeontiefSolver, Solution};
pub use units::{Quantity, UnitTable};

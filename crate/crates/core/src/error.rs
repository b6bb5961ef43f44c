use std::path::PathBuf;

use thiserror::Error;

use crate::model::ValidationReport;

/// Failures raised while reading one of the documented CSV schemas.
///
/// Every variant carries the offending file and, where one exists, the
/// 1-based line number.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: cannot read file: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed CSV record: {message}")]
    Csv {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: malformed header: {detail}")]
    MalformedHeader {
        file: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{file}:{line}: duplicate code `{code}`")]
    DuplicateCode {
        file: PathBuf,
        line: usize,
        code: String,
    },
    #[error("{file}:{line}: column `{column}` holds non-numeric or non-finite value `{value}`")]
    NonNumericCell {
        file: PathBuf,
        line: usize,
        column: String,
        value: String,
    },
    #[error("{file}:{line}: negative entry {value} in column `{column}` (negative entries require `#allow-negative true`)")]
    NegativeEntry {
        file: PathBuf,
        line: usize,
        column: String,
        value: f64,
    },
    #[error("{file}:{line}: row has {found} cells, header declares {expected}")]
    RaggedRow {
        file: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}:{line}: unknown unit `{unit}`")]
    UnknownUnit {
        file: PathBuf,
        line: usize,
        unit: String,
    },
    #[error("{file}:{line}: substance `{substance}` given in {unit}, which does not convert to {expected} used elsewhere")]
    InconsistentUnit {
        file: PathBuf,
        line: usize,
        substance: String,
        unit: String,
        expected: String,
    },
    #[error("{file}:{line}: negative amount {value}")]
    NegativeAmount {
        file: PathBuf,
        line: usize,
        value: f64,
    },
    #[error("{file}:{line}: duplicate record for {key}")]
    DuplicateRecord {
        file: PathBuf,
        line: usize,
        key: String,
    },
    #[error("{file}:{line}: weights for coarse code `{coarse}` sum to {sum}, expected 1")]
    WeightSumViolation {
        file: PathBuf,
        line: usize,
        coarse: String,
        sum: f64,
    },
    #[error("{file}:{line}: weight {weight} for `{fine}` is negative or non-finite")]
    InvalidWeight {
        file: PathBuf,
        line: usize,
        fine: String,
        weight: f64,
    },
    #[error("{file}:{line}: fine code `{code}` is not in the fine classification")]
    OrphanFineCode {
        file: PathBuf,
        line: usize,
        code: String,
    },
    #[error("{file}:{line}: fine code `{code}` is assigned more than once")]
    DuplicateFineCode {
        file: PathBuf,
        line: usize,
        code: String,
    },
    #[error("{file}:{line}: indicator `{indicator}` redeclared with a different level or unit")]
    DuplicateIndicator {
        file: PathBuf,
        line: usize,
        indicator: String,
    },
    #[error("{file}:{line}: duplicate factor for indicator `{indicator}` and substance `{substance}`")]
    DuplicateFactor {
        file: PathBuf,
        line: usize,
        indicator: String,
        substance: String,
    },
    #[error("{file}:{line}: unknown indicator level `{level}` (expected midpoint or endpoint)")]
    UnknownLevel {
        file: PathBuf,
        line: usize,
        level: String,
    },
    #[error("{file}: characterization file declares no factors")]
    EmptyCharacterization { file: PathBuf },
    #[error("{file}: aggregation level `{level}` does not assign fine code(s): {missing}")]
    IncompleteLevel {
        file: PathBuf,
        level: String,
        missing: String,
    },
    #[error("{file}: {detail}")]
    AxisMismatch { file: PathBuf, detail: String },
    #[error("{file}: required file is missing")]
    MissingFile { file: PathBuf },
}

/// Errors raised by model construction, assembly, solving and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("duplicate code `{0}` in classification")]
    DuplicateCode(String),
    #[error("classification is empty")]
    EmptyClassification,
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("unit mismatch: {0}")]
    UnitMismatch(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("concordance for `{coarse}` is invalid: {detail}")]
    InvalidConcordance { coarse: String, detail: String },
    #[error("aggregation hierarchy is invalid: {0}")]
    InvalidHierarchy(String),
    #[error("commodity `{0}` is demanded but has zero total output")]
    ZeroOutputSector(String),
    #[error("industry `{0}` has inputs but zero total output")]
    ZeroOutputIndustry(String),
    #[error("technology matrix is not productive: power series did not converge after {iterations} terms (max column sum {max_column_sum:.6})")]
    NonProductive {
        max_column_sum: f64,
        iterations: usize,
    },
    #[error("technology matrix contains invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("coarse code `{0}` has flows but no concordance entry")]
    MissingConcordanceEntry(String),
    #[error("commodity `{commodity}` carries flows but has zero total output")]
    DivisionByZeroOutput { commodity: String },
    #[error("accounting identity violated for `{commodity}`: output {output} < intermediate use {intermediate}")]
    AccountingIdentity {
        commodity: String,
        output: f64,
        intermediate: f64,
    },
    #[error("linear system (I - A) x = y could not be solved to tolerance (relative residual {relative_residual:e})")]
    SingularSystem { relative_residual: f64 },
    #[error("model failed validation with {} error(s): {}", .0.errors.len(), .0.first_error())]
    Validation(ValidationReport),
    #[error("unknown sector `{0}`")]
    UnknownSector(String),
    #[error("unknown aggregation level `{0}`")]
    UnknownLevel(String),
    #[error("unknown demand scope `{0}`")]
    UnknownScope(String),
    #[error("unknown indicator `{0}`")]
    UnknownIndicator(String),
    #[error("demand scope selects no categories")]
    EmptyScope,
    #[error("scope `{0}` does not cover the full final demand")]
    PartialScope(String),
    #[error("population must be positive, got {0}")]
    ZeroPopulation(f64),
    #[error("regression needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("regression x values are all identical")]
    DegenerateX,
    #[error("regression input contains non-finite values")]
    NonFiniteInput,
    #[error("all lifecycle components are zero")]
    AllZero,
    #[error("lifecycle component `{label}` has negative or non-finite value {value}")]
    NegativeComponent { label: String, value: f64 },
    #[error("additivity violated for indicator `{indicator}`: parts {parts} vs total {total}")]
    AdditivityViolation {
        indicator: String,
        parts: f64,
        total: f64,
    },
    #[error("model archive is invalid: {0}")]
    Archive(String),
}

impl Error {
    /// True for failures caused by the inputs rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::SingularSystem { .. } | Error::AdditivityViolation { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

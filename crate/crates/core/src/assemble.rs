//! Builds a computable [`IOModel`] from statistical tables.
//!
//! The technology matrix is product-by-product: every industry's input
//! recipe is spread over the commodities it supplies in proportion to its
//! supply shares, and the resulting commodity columns are normalized by
//! commodity output. Imported intermediate use is folded into domestic use
//! before normalization (domestic technology assumption). Coarse physical
//! flows are split over fine commodities by the concordance weights and
//! divided by output to give intensities.

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{DataSet, DirectEmission, RawFlowAccount};
use crate::model::{
    validate_model, AggregationHierarchy, CharacterizationMatrix, Classification, Concordance, Currency,
    DirectFinalDemandEmissions, ExtensionMatrix, FinalDemand, Finding, FindingKind, Substance,
    SubstanceRegistry, SupplyUseTables, TechnologyMatrix, ValidationReport,
};
use crate::solve::LeontiefSolver;

/// Power terms are iterated until their max-norm drops below this value.
pub const NEUMANN_TERM_TOLERANCE: f64 = 1e-12;
/// Upper bound on power terms before the matrix is declared non-productive.
pub const NEUMANN_MAX_TERMS: usize = 10_000;
/// Relative slack on the output ≥ intermediate use identity.
pub const ACCOUNTING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductivityDiagnostic {
    pub max_column_sum: f64,
    /// Power at which `A^k · 1` fell below tolerance.
    pub iterations: usize,
    pub converged: bool,
}

/// Checks that the Neumann series of `a` converges by iterating `A^k · 1`.
pub fn check_productive(a: &TechnologyMatrix) -> Result<ProductivityDiagnostic> {
    let m = &a.coefficients;
    if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidCoefficients(
            "technology matrix must be finite and non-negative".into(),
        ));
    }
    let max_column_sum = (0..m.ncols())
        .map(|j| m.column(j).sum())
        .fold(0.0_f64, f64::max);
    let mut v = DVector::from_element(m.nrows(), 1.0);
    for k in 1..=NEUMANN_MAX_TERMS {
        v = m * v;
        let norm = v.amax();
        if norm < NEUMANN_TERM_TOLERANCE {
            return Ok(ProductivityDiagnostic {
                max_column_sum,
                iterations: k,
                converged: true,
            });
        }
        if !norm.is_finite() {
            return Err(Error::NonProductive {
                max_column_sum,
                iterations: k,
            });
        }
    }
    Err(Error::NonProductive {
        max_column_sum,
        iterations: NEUMANN_MAX_TERMS,
    })
}

/// Technology matrix plus the commodity output vector it was normalized by.
#[derive(Debug, Clone)]
pub struct Technology {
    pub matrix: TechnologyMatrix,
    pub output: DVector<f64>,
    pub productivity: ProductivityDiagnostic,
    pub warnings: Vec<Finding>,
}

/// Product-by-product coefficients from domestic use only.
pub fn build_technology_matrix(sut: &SupplyUseTables) -> Result<Technology> {
    technology_from_use(sut, &sut.use_table)
}

/// Product-by-product coefficients from domestic plus imported use, so that
/// imports inherit domestic recipes and intensities.
pub fn apply_domestic_technology_assumption(sut: &SupplyUseTables) -> Result<Technology> {
    match &sut.import_use {
        Some(imports) => {
            if imports.shape() != sut.use_table.shape() {
                return Err(Error::AxisMismatch(format!(
                    "import use is {:?}, domestic use is {:?}",
                    imports.shape(),
                    sut.use_table.shape()
                )));
            }
            technology_from_use(sut, &(&sut.use_table + imports))
        }
        None => technology_from_use(sut, &sut.use_table),
    }
}

fn technology_from_use(sut: &SupplyUseTables, use_total: &DMatrix<f64>) -> Result<Technology> {
    let supply = &sut.supply;
    let (ni, nc) = supply.shape();
    let industry_output: Vec<f64> = (0..ni).map(|i| supply.row(i).sum()).collect();
    let output = DVector::from_iterator(nc, (0..nc).map(|c| supply.column(c).sum()));

    for (i, &g) in industry_output.iter().enumerate() {
        if g <= 0.0 && use_total.column(i).iter().any(|v| *v != 0.0) {
            return Err(Error::ZeroOutputIndustry(sut.industries.code(i).to_string()));
        }
    }
    let fd = &sut.final_demand.values;
    for c in 0..nc {
        let demanded = use_total.row(c).iter().any(|v| *v != 0.0)
            || fd.row(c).iter().any(|v| *v != 0.0);
        if output[c] <= 0.0 && demanded {
            return Err(Error::ZeroOutputSector(sut.commodities.code(c).to_string()));
        }
    }

    // product mix: share of each industry's output going to each commodity
    let mut mix = DMatrix::zeros(ni, nc);
    for i in 0..ni {
        if industry_output[i] > 0.0 {
            for c in 0..nc {
                mix[(i, c)] = supply[(i, c)] / industry_output[i];
            }
        }
    }
    let mut coefficients = use_total * mix;
    let mut warnings = Vec::new();
    for c in 0..nc {
        let q = output[c];
        for p in 0..nc {
            let v = &mut coefficients[(p, c)];
            *v = if q > 0.0 { *v / q } else { 0.0 };
            if *v < 0.0 {
                warnings.push(Finding::new(
                    FindingKind::ClampedNegative,
                    format!(
                        "A[{}, {}] = {} clamped to 0",
                        sut.commodities.code(p),
                        sut.commodities.code(c),
                        *v
                    ),
                ));
                *v = 0.0;
            }
        }
    }
    let matrix = TechnologyMatrix::new(
        Arc::clone(&sut.commodities),
        coefficients,
        sut.currency.clone(),
    )?;
    let productivity = check_productive(&matrix)?;
    Ok(Technology {
        matrix,
        output,
        productivity,
        warnings,
    })
}

/// Physical flows on the fine commodity axis (substance × commodity).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    pub substances: Arc<SubstanceRegistry>,
    pub commodities: Arc<Classification>,
    pub values: DMatrix<f64>,
}

impl FlowMatrix {
    /// Re-indexes onto a registry that contains every current substance.
    pub fn reindexed(&self, target: &Arc<SubstanceRegistry>) -> Result<FlowMatrix> {
        let mut values = DMatrix::zeros(target.len(), self.commodities.len());
        for (s, sub) in self.substances.iter().enumerate() {
            let t = target.position(&sub.key).ok_or_else(|| {
                Error::AxisMismatch(format!("substance {} missing from target registry", sub.key))
            })?;
            if target.get(t).unit != sub.unit {
                return Err(Error::UnitMismatch(format!("substance {}", sub.key)));
            }
            values.set_row(t, &self.values.row(s));
        }
        Ok(FlowMatrix {
            substances: Arc::clone(target),
            commodities: Arc::clone(&self.commodities),
            values,
        })
    }
}

fn registry_from<'a>(
    units: impl Iterator<Item = (&'a crate::model::SubstanceKey, &'a str)>,
) -> Result<Arc<SubstanceRegistry>> {
    let mut seen = std::collections::BTreeMap::new();
    for (k, u) in units {
        if let Some(prev) = seen.insert(k.clone(), u.to_string()) {
            if prev != u {
                return Err(Error::UnitMismatch(format!(
                    "substance {k} reported in both {prev} and {u}"
                )));
            }
        }
    }
    Ok(Arc::new(SubstanceRegistry::new(
        seen.into_iter()
            .map(|(key, unit)| Substance { key, unit })
            .collect(),
    )?))
}

/// Splits each coarse flow over fine commodities by concordance weight.
pub fn allocate_flows(
    flows: &RawFlowAccount,
    concordance: &Concordance,
    fine: &Arc<Classification>,
) -> Result<FlowMatrix> {
    let substances = registry_from(
        flows
            .records
            .iter()
            .map(|r| (&r.substance, r.unit.as_str())),
    )?;
    let mut values = DMatrix::zeros(substances.len(), fine.len());
    for rec in &flows.records {
        let weights = concordance
            .weights(&rec.sector)
            .ok_or_else(|| Error::MissingConcordanceEntry(rec.sector.clone()))?;
        let s = substances.position(&rec.substance).expect("registry built from records");
        for (code, w) in weights {
            let j = fine
                .position(code)
                .ok_or_else(|| Error::AxisMismatch(format!("fine code `{code}` unknown")))?;
            values[(s, j)] += rec.amount * w;
        }
    }
    Ok(FlowMatrix {
        substances,
        commodities: Arc::clone(fine),
        values,
    })
}

/// `B[s, j] = flow[s, j] / output[j]`.
pub fn normalize_extensions(
    flows: &FlowMatrix,
    output: &DVector<f64>,
    currency: &Currency,
) -> Result<ExtensionMatrix> {
    if output.len() != flows.commodities.len() {
        return Err(Error::Dimension(format!(
            "output has {} entries, flows have {} commodities",
            output.len(),
            flows.commodities.len()
        )));
    }
    let mut b = flows.values.clone();
    for j in 0..b.ncols() {
        let x = output[j];
        if x > 0.0 {
            b.column_mut(j).unscale_mut(x);
        } else if b.column(j).iter().any(|v| *v != 0.0) {
            return Err(Error::DivisionByZeroOutput {
                commodity: flows.commodities.code(j).to_string(),
            });
        }
    }
    ExtensionMatrix::new(
        Arc::clone(&flows.substances),
        Arc::clone(&flows.commodities),
        b,
        currency.clone(),
    )
}

/// The assembled environmentally-extended model. Immutable; the Leontief
/// factorization is computed once on construction.
#[derive(Debug)]
pub struct IOModel {
    technology: TechnologyMatrix,
    extensions: ExtensionMatrix,
    characterization: CharacterizationMatrix,
    final_demand: FinalDemand,
    direct: DirectFinalDemandEmissions,
    output: DVector<f64>,
    solver: LeontiefSolver,
    productivity: ProductivityDiagnostic,
    warnings: Vec<Finding>,
    hierarchy: Option<AggregationHierarchy>,
    hash: OnceLock<String>,
}

impl IOModel {
    /// Validates the parts, aligns the characterization substance axis onto
    /// the extension registry and factors `I - A`.
    pub fn new(
        technology: TechnologyMatrix,
        extensions: ExtensionMatrix,
        characterization: CharacterizationMatrix,
        final_demand: FinalDemand,
        direct: DirectFinalDemandEmissions,
        output: DVector<f64>,
    ) -> Result<IOModel> {
        let mut report = validate_model(&technology, &extensions, &characterization, &final_demand);
        if !direct.substances.same_axis(&extensions.substances) {
            report.error(
                FindingKind::AxisMismatch,
                "direct emissions substance axis differs from extension registry",
            );
        }
        let labels: Vec<&str> = final_demand.categories.iter().map(|c| c.label.as_str()).collect();
        if direct.categories.iter().map(String::as_str).ne(labels.iter().copied()) {
            report.error(
                FindingKind::AxisMismatch,
                "direct emissions categories differ from final demand categories",
            );
        }
        if output.len() != technology.len() || output.iter().any(|v| !v.is_finite() || *v < 0.0) {
            report.error(
                FindingKind::DimensionMismatch,
                "output vector must be finite, non-negative and match the commodity axis",
            );
        }
        if !report.is_ok() {
            return Err(Error::Validation(report));
        }
        let (characterization, _) = characterization.aligned_to(&extensions.substances)?;
        let productivity = check_productive(&technology)?;
        let solver = LeontiefSolver::new(&technology)?;
        Ok(IOModel {
            technology,
            extensions,
            characterization,
            final_demand,
            direct,
            output,
            solver,
            productivity,
            warnings: report.warnings,
            hierarchy: None,
            hash: OnceLock::new(),
        })
    }

    /// Attaches an aggregation hierarchy over the commodity axis.
    pub fn with_hierarchy(mut self, hierarchy: Option<AggregationHierarchy>) -> Result<IOModel> {
        if let Some(h) = &hierarchy {
            h.fine().ensure_same_axis(self.commodities(), "aggregation hierarchy")?;
        }
        self.hierarchy = hierarchy;
        self.hash = OnceLock::new();
        Ok(self)
    }

    pub fn hierarchy(&self) -> Option<&AggregationHierarchy> {
        self.hierarchy.as_ref()
    }

    pub fn technology(&self) -> &TechnologyMatrix {
        &self.technology
    }

    pub fn extensions(&self) -> &ExtensionMatrix {
        &self.extensions
    }

    /// Characterization aligned to the extension substance axis.
    pub fn characterization(&self) -> &CharacterizationMatrix {
        &self.characterization
    }

    pub fn final_demand(&self) -> &FinalDemand {
        &self.final_demand
    }

    pub fn direct_emissions(&self) -> &DirectFinalDemandEmissions {
        &self.direct
    }

    pub fn output(&self) -> &DVector<f64> {
        &self.output
    }

    pub fn commodities(&self) -> &Arc<Classification> {
        &self.technology.commodities
    }

    pub fn currency(&self) -> &Currency {
        &self.technology.currency
    }

    pub fn solver(&self) -> &LeontiefSolver {
        &self.solver
    }

    pub fn productivity(&self) -> ProductivityDiagnostic {
        self.productivity
    }

    pub fn warnings(&self) -> &[Finding] {
        &self.warnings
    }

    /// `C · B`, the direct impact per currency unit of each commodity.
    pub fn direct_impact_intensities(&self) -> DMatrix<f64> {
        &self.characterization.factors * &self.extensions.intensities
    }

    pub fn sector_index(&self, code: &str) -> Result<usize> {
        self.commodities()
            .position(code)
            .ok_or_else(|| Error::UnknownSector(code.to_string()))
    }

    /// SHA-256 of the canonical archive encoding.
    pub fn content_hash(&self) -> &str {
        self.hash
            .get_or_init(|| crate::archive::content_hash(self))
    }
}

/// Structured outcome of [`assemble`], written next to the model file.
#[derive(Debug, Clone, Serialize)]
pub struct AssemblyReport {
    pub schema: &'static str,
    pub industries: usize,
    pub commodities: usize,
    pub substances: usize,
    pub indicators: usize,
    pub demand_categories: usize,
    pub currency: String,
    pub price_basis: Option<String>,
    pub productivity: Option<ProductivityDiagnostic>,
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
    pub notices: Vec<String>,
}

impl AssemblyReport {
    fn new(data: &DataSet) -> Self {
        AssemblyReport {
            schema: "eeio-assembly-report v1",
            industries: data.sut.industries.len(),
            commodities: data.sut.commodities.len(),
            substances: 0,
            indicators: data.characterization.indicators.len(),
            demand_categories: data.sut.final_demand.categories.len(),
            currency: data.sut.currency.to_string(),
            price_basis: data.sut.price_basis.clone(),
            productivity: None,
            errors: Vec::new(),
            warnings: Vec::new(),
            notices: Vec::new(),
        }
    }
}

/// Runs the whole assembly pipeline. On failure the report carries the
/// error alongside the returned `Err`.
pub fn assemble(data: &DataSet) -> (Result<IOModel>, AssemblyReport) {
    let mut report = AssemblyReport::new(data);
    let result = assemble_inner(data, &mut report);
    if let Err(e) = &result {
        match e {
            Error::Validation(v) => report.errors.extend(v.errors.iter().cloned()),
            other => report
                .errors
                .push(Finding::new(FindingKind::AssemblyFailure, other.to_string())),
        }
    }
    (result, report)
}

fn assemble_inner(data: &DataSet, report: &mut AssemblyReport) -> Result<IOModel> {
    let sut = &data.sut;
    let tech = apply_domestic_technology_assumption(sut)?;
    report.productivity = Some(tech.productivity);
    report.warnings.extend(tech.warnings.iter().cloned());
    check_accounting_identity(sut, &tech.output)?;

    let fine = &sut.commodities;
    let mut fine_flows = allocate_flows(&data.flows, &data.concordance, fine)?;
    if let Some(inv) = &data.inventory {
        let inv_flows = allocate_flows(inv, &data.concordance, fine)?;
        let registry = registry_from(
            fine_flows
                .substances
                .iter()
                .chain(inv_flows.substances.iter())
                .map(|s| (&s.key, s.unit.as_str())),
        )?;
        let summed = fine_flows.reindexed(&registry)?.values + inv_flows.reindexed(&registry)?.values;
        fine_flows = FlowMatrix {
            substances: registry,
            commodities: Arc::clone(fine),
            values: summed,
        };
        report.notices.push(
            "substances reported in both flows.csv and inventory.csv for the same sector are summed"
                .into(),
        );
    }

    let registry = registry_from(
        fine_flows
            .substances
            .iter()
            .map(|s| (&s.key, s.unit.as_str()))
            .chain(data.direct_emissions.iter().map(|d| (&d.substance, d.unit.as_str()))),
    )?;
    let fine_flows = fine_flows.reindexed(&registry)?;
    report.substances = registry.len();

    let extensions = normalize_extensions(&fine_flows, &tech.output, &sut.currency)?;
    let direct = direct_matrix(&data.direct_emissions, &registry, &sut.final_demand)?;

    let model = IOModel::new(
        tech.matrix,
        extensions,
        data.characterization.clone(),
        sut.final_demand.clone(),
        direct,
        tech.output,
    )?
    .with_hierarchy(data.hierarchy.clone())?;
    report.warnings.extend(model.warnings().iter().cloned());
    report.notices.push(
        "pollutant coverage is limited to facilities above inventory reporting thresholds; \
         sectors with few reporting facilities may be under-represented"
            .into(),
    );
    report.notices.push(
        "coarse flows are allocated by concordance (sales-share) weights; emissions need not follow sales"
            .into(),
    );
    if sut.price_basis.is_some() {
        report
            .notices
            .push("price basis tag is carried through untransformed".into());
    }
    Ok(model)
}

fn check_accounting_identity(sut: &SupplyUseTables, output: &DVector<f64>) -> Result<()> {
    for p in 0..output.len() {
        let intermediate = sut.use_table.row(p).sum();
        if intermediate > output[p] * (1.0 + ACCOUNTING_TOLERANCE) + f64::EPSILON {
            return Err(Error::AccountingIdentity {
                commodity: sut.commodities.code(p).to_string(),
                output: output[p],
                intermediate,
            });
        }
    }
    Ok(())
}

fn direct_matrix(
    records: &[DirectEmission],
    registry: &Arc<SubstanceRegistry>,
    final_demand: &FinalDemand,
) -> Result<DirectFinalDemandEmissions> {
    let labels: Vec<String> = final_demand
        .categories
        .iter()
        .map(|c| c.label.clone())
        .collect();
    let mut values = DMatrix::zeros(registry.len(), labels.len());
    let unknown: BTreeSet<&str> = records
        .iter()
        .map(|r| r.category.as_str())
        .filter(|c| !labels.iter().any(|l| l == c))
        .collect();
    if let Some(first) = unknown.first() {
        return Err(Error::AxisMismatch(format!(
            "direct emissions category `{first}` is not a final demand category"
        )));
    }
    for r in records {
        let k = labels.iter().position(|l| *l == r.category).expect("checked above");
        let s = registry.position(&r.substance).expect("registry includes direct substances");
        values[(s, k)] += r.amount;
    }
    DirectFinalDemandEmissions::new(Arc::clone(registry), labels, values)
}

/// Merges validation findings produced during assembly.
pub fn merge_reports(reports: impl IntoIterator<Item = ValidationReport>) -> ValidationReport {
    let mut out = ValidationReport::default();
    for r in reports {
        out.merge(r);
    }
    out
}

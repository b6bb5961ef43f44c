//! Validated domain types shared by every stage of the pipeline.
//!
//! Shape invariants (axis lengths, unique codes, unit tags) are enforced by
//! the constructors. Value invariants on matrices (finite, non-negative) are
//! checked by [`validate_model`] so that a bad cell is reported with its row
//! and column codes instead of failing construction outright.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::Quantity;

/// Tolerance on concordance weight sums.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Relative tolerance of the footprint additivity invariant.
pub const ADDITIVITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub code: String,
    pub label: String,
    pub region: String,
}

impl Sector {
    /// Splits a `REGION:label` code. Codes without a colon carry an empty
    /// region and use the whole code as label.
    pub fn from_qualified(code: &str) -> Sector {
        let code = code.trim();
        match code.split_once(':') {
            Some((region, label)) if !region.is_empty() && !label.is_empty() => Sector {
                code: code.to_string(),
                label: label.to_string(),
                region: region.to_string(),
            },
            _ => Sector {
                code: code.to_string(),
                label: code.to_string(),
                region: String::new(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Coarse,
    Fine,
    Custom,
}

/// Ordered list of sector or commodity codes. The order defines matrix axes.
#[derive(Debug, Clone)]
pub struct Classification {
    entries: Vec<Sector>,
    granularity: Granularity,
    index: HashMap<String, usize>,
}

impl PartialEq for Classification {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.granularity == other.granularity
    }
}

impl Classification {
    pub fn new(entries: Vec<Sector>, granularity: Granularity) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyClassification);
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.code.clone(), i).is_some() {
                return Err(Error::DuplicateCode(e.code.clone()));
            }
        }
        Ok(Classification {
            entries,
            granularity,
            index,
        })
    }

    pub fn from_codes<I, S>(codes: I, granularity: Granularity) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries = codes
            .into_iter()
            .map(|c| Sector::from_qualified(c.as_ref()))
            .collect();
        Self::new(entries, granularity)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn entries(&self) -> &[Sector] {
        &self.entries
    }

    pub fn code(&self, i: usize) -> &str {
        &self.entries[i].code
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.code.as_str())
    }

    pub fn position(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.index.contains_key(code)
    }

    /// Same code sequence (granularity is ignored).
    pub fn same_axis(&self, other: &Classification) -> bool {
        std::ptr::eq(self, other)
            || (self.len() == other.len() && self.codes().eq(other.codes()))
    }

    pub fn ensure_same_axis(&self, other: &Classification, what: &str) -> Result<()> {
        if self.same_axis(other) {
            return Ok(());
        }
        let first_diff = self
            .codes()
            .zip(other.codes())
            .position(|(a, b)| a != b)
            .unwrap_or(self.len().min(other.len()));
        Err(Error::AxisMismatch(format!(
            "{what}: code sequences differ at position {first_diff} (lengths {} and {})",
            self.len(),
            other.len()
        )))
    }
}

/// Monetary unit tag carried by every currency-denominated matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Currency(pub String);

impl Currency {
    pub fn new(code: impl Into<String>) -> Self {
        Currency(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for Currency {
    fn default() -> Self {
        Currency("CAD".to_string())
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn ensure_currency(a: &Currency, b: &Currency, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::UnitMismatch(format!("{what}: {a} vs {b}")))
    }
}

/// Identity of an environmental flow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubstanceKey {
    pub id: String,
    pub compartment: String,
}

impl SubstanceKey {
    pub fn new(id: impl Into<String>, compartment: impl Into<String>) -> Self {
        SubstanceKey {
            id: id.into(),
            compartment: compartment.into(),
        }
    }
}

impl fmt::Display for SubstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id, self.compartment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substance {
    pub key: SubstanceKey,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstanceRegistry {
    substances: Vec<Substance>,
    index: HashMap<SubstanceKey, usize>,
}

impl SubstanceRegistry {
    pub fn new(substances: Vec<Substance>) -> Result<Self> {
        let mut index = HashMap::with_capacity(substances.len());
        for (i, s) in substances.iter().enumerate() {
            if s.unit.trim().is_empty() {
                return Err(Error::UnitMismatch(format!("substance {} has no unit", s.key)));
            }
            if index.insert(s.key.clone(), i).is_some() {
                return Err(Error::DuplicateCode(s.key.to_string()));
            }
        }
        Ok(SubstanceRegistry { substances, index })
    }

    pub fn len(&self) -> usize {
        self.substances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.substances.is_empty()
    }

    pub fn get(&self, i: usize) -> &Substance {
        &self.substances[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Substance> + '_ {
        self.substances.iter()
    }

    pub fn position(&self, key: &SubstanceKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn same_axis(&self, other: &SubstanceRegistry) -> bool {
        std::ptr::eq(self, other) || self.substances == other.substances
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactLevel {
    Midpoint,
    Endpoint,
}

impl ImpactLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            ImpactLevel::Midpoint => "midpoint",
            ImpactLevel::Endpoint => "endpoint",
        }
    }
}

impl FromStr for ImpactLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "midpoint" => Ok(ImpactLevel::Midpoint),
            "endpoint" => Ok(ImpactLevel::Endpoint),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicator {
    pub id: String,
    pub level: ImpactLevel,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRegistry {
    indicators: Vec<Indicator>,
    index: HashMap<String, usize>,
}

impl IndicatorRegistry {
    pub fn new(indicators: Vec<Indicator>) -> Result<Self> {
        let mut index = HashMap::with_capacity(indicators.len());
        for (i, ind) in indicators.iter().enumerate() {
            if index.insert(ind.id.clone(), i).is_some() {
                return Err(Error::DuplicateCode(ind.id.clone()));
            }
        }
        Ok(IndicatorRegistry { indicators, index })
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }

    pub fn get(&self, i: usize) -> &Indicator {
        &self.indicators[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Indicator> + '_ {
        self.indicators.iter()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.position(id)
            .ok_or_else(|| Error::UnknownIndicator(id.to_string()))
    }
}

/// Raw supply and use tables as published, before any construction model.
#[derive(Debug, Clone)]
pub struct SupplyUseTables {
    pub industries: Arc<Classification>,
    pub commodities: Arc<Classification>,
    /// industry × commodity
    pub supply: DMatrix<f64>,
    /// commodity × industry
    pub use_table: DMatrix<f64>,
    pub final_demand: FinalDemand,
    /// commodity × industry, same axes as `use_table`
    pub import_use: Option<DMatrix<f64>>,
    pub currency: Currency,
    pub price_basis: Option<String>,
    /// Negative use entries were explicitly allowed by the source file.
    pub negatives_flagged: bool,
}

impl SupplyUseTables {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        industries: Arc<Classification>,
        commodities: Arc<Classification>,
        supply: DMatrix<f64>,
        use_table: DMatrix<f64>,
        final_demand: FinalDemand,
        import_use: Option<DMatrix<f64>>,
        currency: Currency,
        negatives_flagged: bool,
    ) -> Result<Self> {
        let (ni, nc) = (industries.len(), commodities.len());
        if supply.shape() != (ni, nc) {
            return Err(Error::Dimension(format!(
                "supply is {:?}, expected {ni}x{nc}",
                supply.shape()
            )));
        }
        if use_table.shape() != (nc, ni) {
            return Err(Error::Dimension(format!(
                "use is {:?}, expected {nc}x{ni}",
                use_table.shape()
            )));
        }
        if let Some(imp) = &import_use {
            if imp.shape() != (nc, ni) {
                return Err(Error::AxisMismatch(format!(
                    "import use is {:?}, expected {nc}x{ni}",
                    imp.shape()
                )));
            }
        }
        final_demand.commodities.ensure_same_axis(&commodities, "final demand")?;
        ensure_currency(&final_demand.currency, &currency, "final demand currency")?;
        if let Some((r, c)) = first_bad(&supply, |v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "supply[{}, {}] = {}",
                industries.code(r),
                commodities.code(c),
                supply[(r, c)]
            )));
        }
        for (name, m) in std::iter::once(("use", &use_table)).chain(import_use.iter().map(|m| ("import use", m))) {
            if let Some((r, c)) = first_bad(m, |v| !v.is_finite() || (!negatives_flagged && v < 0.0)) {
                return Err(Error::InvalidCoefficients(format!(
                    "{name}[{}, {}] = {}",
                    commodities.code(r),
                    industries.code(c),
                    m[(r, c)]
                )));
            }
        }
        Ok(SupplyUseTables {
            industries,
            commodities,
            supply,
            use_table,
            final_demand,
            import_use,
            currency,
            price_basis: None,
            negatives_flagged,
        })
    }

    pub fn with_price_basis(mut self, basis: Option<String>) -> Self {
        self.price_basis = basis;
        self
    }
}

fn first_bad(m: &DMatrix<f64>, bad: impl Fn(f64) -> bool) -> Option<(usize, usize)> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if bad(m[(r, c)]) {
                return Some((r, c));
            }
        }
    }
    None
}

/// Commodity-by-commodity technical coefficients (currency per currency).
#[derive(Debug, Clone)]
pub struct TechnologyMatrix {
    pub commodities: Arc<Classification>,
    pub coefficients: DMatrix<f64>,
    pub currency: Currency,
}

impl TechnologyMatrix {
    pub fn new(
        commodities: Arc<Classification>,
        coefficients: DMatrix<f64>,
        currency: Currency,
    ) -> Result<Self> {
        let n = commodities.len();
        if coefficients.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "technology matrix is {:?}, expected {n}x{n}",
                coefficients.shape()
            )));
        }
        Ok(TechnologyMatrix {
            commodities,
            coefficients,
            currency,
        })
    }

    pub fn len(&self) -> usize {
        self.commodities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commodities.is_empty()
    }
}

/// Physical intensities per currency unit of output (substance × commodity).
#[derive(Debug, Clone)]
pub struct ExtensionMatrix {
    pub substances: Arc<SubstanceRegistry>,
    pub commodities: Arc<Classification>,
    pub intensities: DMatrix<f64>,
    pub currency: Currency,
}

impl ExtensionMatrix {
    pub fn new(
        substances: Arc<SubstanceRegistry>,
        commodities: Arc<Classification>,
        intensities: DMatrix<f64>,
        currency: Currency,
    ) -> Result<Self> {
        let shape = (substances.len(), commodities.len());
        if intensities.shape() != shape {
            return Err(Error::Dimension(format!(
                "extension matrix is {:?}, expected {shape:?}",
                intensities.shape()
            )));
        }
        Ok(ExtensionMatrix {
            substances,
            commodities,
            intensities,
            currency,
        })
    }

    pub fn unit(&self, s: usize) -> String {
        format!("{}/{}", self.substances.get(s).unit, self.currency)
    }
}

/// Characterization factors (indicator × substance).
#[derive(Debug, Clone)]
pub struct CharacterizationMatrix {
    pub indicators: Arc<IndicatorRegistry>,
    pub substances: Arc<SubstanceRegistry>,
    pub factors: DMatrix<f64>,
}

impl CharacterizationMatrix {
    pub fn new(
        indicators: Arc<IndicatorRegistry>,
        substances: Arc<SubstanceRegistry>,
        factors: DMatrix<f64>,
    ) -> Result<Self> {
        let shape = (indicators.len(), substances.len());
        if factors.shape() != shape {
            return Err(Error::Dimension(format!(
                "characterization matrix is {:?}, expected {shape:?}",
                factors.shape()
            )));
        }
        Ok(CharacterizationMatrix {
            indicators,
            substances,
            factors,
        })
    }

    /// Re-indexes the substance axis onto `target`. Substances of `target`
    /// missing here get zero factors and are returned as uncharacterized.
    pub fn aligned_to(
        &self,
        target: &Arc<SubstanceRegistry>,
    ) -> Result<(CharacterizationMatrix, Vec<SubstanceKey>)> {
        if self.substances.same_axis(target) {
            return Ok((
                CharacterizationMatrix {
                    substances: Arc::clone(target),
                    ..self.clone()
                },
                Vec::new(),
            ));
        }
        let mut factors = DMatrix::zeros(self.indicators.len(), target.len());
        let mut missing = Vec::new();
        for (j, s) in target.iter().enumerate() {
            match self.substances.position(&s.key) {
                Some(k) => {
                    let declared = &self.substances.get(k).unit;
                    if declared != &s.unit {
                        return Err(Error::UnitMismatch(format!(
                            "substance {} is characterized per {declared} but inventoried in {}",
                            s.key, s.unit
                        )));
                    }
                    factors.set_column(j, &self.factors.column(k));
                }
                None => missing.push(s.key.clone()),
            }
        }
        Ok((
            CharacterizationMatrix {
                indicators: Arc::clone(&self.indicators),
                substances: Arc::clone(target),
                factors,
            },
            missing,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandCategory {
    pub label: String,
    /// Exports are excluded from consumption-based scopes.
    pub export: bool,
}

/// Final demand (commodity × demand category).
#[derive(Debug, Clone)]
pub struct FinalDemand {
    pub commodities: Arc<Classification>,
    pub categories: Vec<DemandCategory>,
    pub values: DMatrix<f64>,
    pub currency: Currency,
}

impl FinalDemand {
    pub fn new(
        commodities: Arc<Classification>,
        categories: Vec<DemandCategory>,
        values: DMatrix<f64>,
        currency: Currency,
    ) -> Result<Self> {
        if values.shape() != (commodities.len(), categories.len()) {
            return Err(Error::Dimension(format!(
                "final demand is {:?}, expected {}x{}",
                values.shape(),
                commodities.len(),
                categories.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &categories {
            if !seen.insert(c.label.as_str()) {
                return Err(Error::DuplicateCode(c.label.clone()));
            }
        }
        Ok(FinalDemand {
            commodities,
            categories,
            values,
            currency,
        })
    }

    pub fn category_position(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.label == label)
    }

    /// Column indices selected by `scope`, in category order.
    pub fn select(&self, scope: &DemandScope) -> Result<Vec<usize>> {
        let picked: Vec<usize> = match scope {
            DemandScope::All => (0..self.categories.len()).collect(),
            DemandScope::Consumption => self
                .categories
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.export)
                .map(|(i, _)| i)
                .collect(),
            DemandScope::Categories(labels) => {
                let mut idx = labels
                    .iter()
                    .map(|l| {
                        self.category_position(l)
                            .ok_or_else(|| Error::UnknownScope(l.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                idx.sort_unstable();
                idx.dedup();
                idx
            }
        };
        if picked.is_empty() {
            return Err(Error::EmptyScope);
        }
        Ok(picked)
    }

    /// Sum of the selected demand columns.
    pub fn column_sum(&self, columns: &[usize]) -> DVector<f64> {
        let mut y = DVector::zeros(self.values.nrows());
        for &c in columns {
            y += self.values.column(c);
        }
        y
    }
}

/// Which final-demand categories a computation covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DemandScope {
    /// Every category, exports included.
    All,
    /// Every category not flagged as export.
    Consumption,
    Categories(Vec<String>),
}

impl DemandScope {
    pub fn covers_full_demand(&self) -> bool {
        matches!(self, DemandScope::All | DemandScope::Consumption)
    }
}

impl fmt::Display for DemandScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemandScope::All => f.write_str("all"),
            DemandScope::Consumption => f.write_str("consumption"),
            DemandScope::Categories(c) => f.write_str(&c.join(",")),
        }
    }
}

impl FromStr for DemandScope {
    type Err = Error;

    /// `all`, `consumption`, or a comma-separated list of category labels.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(DemandScope::All),
            "consumption" => Ok(DemandScope::Consumption),
            "" => Err(Error::EmptyScope),
            list => Ok(DemandScope::Categories(
                list.split(',').map(|l| l.trim().to_string()).collect(),
            )),
        }
    }
}

/// Emissions released directly by final consumers (substance × category).
#[derive(Debug, Clone)]
pub struct DirectFinalDemandEmissions {
    pub substances: Arc<SubstanceRegistry>,
    pub categories: Vec<String>,
    pub values: DMatrix<f64>,
}

impl DirectFinalDemandEmissions {
    pub fn new(
        substances: Arc<SubstanceRegistry>,
        categories: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.shape() != (substances.len(), categories.len()) {
            return Err(Error::Dimension(format!(
                "direct emissions are {:?}, expected {}x{}",
                values.shape(),
                substances.len(),
                categories.len()
            )));
        }
        if let Some((r, c)) = first_bad(&values, |v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "direct emission of {} by `{}` is {}",
                substances.get(r).key,
                categories[c],
                values[(r, c)]
            )));
        }
        Ok(DirectFinalDemandEmissions {
            substances,
            categories,
            values,
        })
    }

    pub fn zeros(substances: Arc<SubstanceRegistry>, categories: Vec<String>) -> Self {
        let values = DMatrix::zeros(substances.len(), categories.len());
        DirectFinalDemandEmissions {
            substances,
            categories,
            values,
        }
    }

    pub fn column_sum(&self, columns: &[usize]) -> DVector<f64> {
        let mut f = DVector::zeros(self.values.nrows());
        for &c in columns {
            f += self.values.column(c);
        }
        f
    }
}

/// Coarse → fine mapping with allocation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Concordance {
    map: BTreeMap<String, Vec<(String, f64)>>,
}

impl Concordance {
    /// Validates weights and fine-code coverage against `fine`. Fine entries
    /// are stored in classification order.
    pub fn new(map: BTreeMap<String, Vec<(String, f64)>>, fine: &Classification) -> Result<Self> {
        let mut seen: HashMap<&str, &str> = HashMap::new();
        let mut map = map;
        for (coarse, entries) in map.iter_mut() {
            if entries.is_empty() {
                return Err(Error::InvalidConcordance {
                    coarse: coarse.clone(),
                    detail: "no fine codes".into(),
                });
            }
            for (code, w) in entries.iter() {
                if !fine.contains(code) {
                    return Err(Error::InvalidConcordance {
                        coarse: coarse.clone(),
                        detail: format!("fine code `{code}` not in classification"),
                    });
                }
                if !w.is_finite() || *w < 0.0 {
                    return Err(Error::InvalidConcordance {
                        coarse: coarse.clone(),
                        detail: format!("weight {w} for `{code}`"),
                    });
                }
            }
            entries.sort_by_key(|(code, _)| fine.position(code));
            let sum: f64 = entries.iter().map(|(_, w)| w).sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::InvalidConcordance {
                    coarse: coarse.clone(),
                    detail: format!("weights sum to {sum}"),
                });
            }
        }
        for (coarse, entries) in &map {
            for (code, _) in entries {
                if let Some(prev) = seen.insert(code, coarse) {
                    return Err(Error::InvalidConcordance {
                        coarse: coarse.clone(),
                        detail: format!("fine code `{code}` already mapped under `{prev}`"),
                    });
                }
            }
        }
        Ok(Concordance { map })
    }

    /// One-to-one concordance mapping every code onto itself.
    pub fn identity(fine: &Classification) -> Self {
        let map = fine
            .codes()
            .map(|c| (c.to_string(), vec![(c.to_string(), 1.0)]))
            .collect();
        Concordance { map }
    }

    pub fn weights(&self, coarse: &str) -> Option<&[(String, f64)]> {
        self.map.get(coarse).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> + '_ {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// One grouping of the fine classification.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationLevel {
    pub id: String,
    groups: Vec<String>,
    assignment: Vec<usize>,
}

impl AggregationLevel {
    /// Group labels in order of first appearance along the fine axis.
    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    /// Group index of every fine code, in classification order.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn group_of(&self, fine_index: usize) -> &str {
        &self.groups[self.assignment[fine_index]]
    }
}

/// Named grouping levels over one fine classification.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationHierarchy {
    fine: Arc<Classification>,
    levels: Vec<AggregationLevel>,
}

impl AggregationHierarchy {
    /// `levels` lists, per level id, the group label of fine codes. Every
    /// fine code must be assigned exactly once per level.
    pub fn new(
        fine: Arc<Classification>,
        levels: Vec<(String, Vec<(String, String)>)>,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(levels.len());
        for (id, pairs) in levels {
            if out.iter().any(|l: &AggregationLevel| l.id == id) {
                return Err(Error::InvalidHierarchy(format!("level `{id}` declared twice")));
            }
            let mut by_fine: Vec<Option<String>> = vec![None; fine.len()];
            for (code, group) in pairs {
                let i = fine.position(&code).ok_or_else(|| {
                    Error::InvalidHierarchy(format!("level `{id}`: unknown fine code `{code}`"))
                })?;
                if by_fine[i].replace(group).is_some() {
                    return Err(Error::InvalidHierarchy(format!(
                        "level `{id}`: fine code `{code}` assigned twice"
                    )));
                }
            }
            let mut groups: Vec<String> = Vec::new();
            let mut assignment = Vec::with_capacity(fine.len());
            for (i, g) in by_fine.into_iter().enumerate() {
                let g = g.ok_or_else(|| {
                    Error::InvalidHierarchy(format!(
                        "level `{id}` does not assign `{}`",
                        fine.code(i)
                    ))
                })?;
                let gi = match groups.iter().position(|x| *x == g) {
                    Some(p) => p,
                    None => {
                        groups.push(g);
                        groups.len() - 1
                    }
                };
                assignment.push(gi);
            }
            out.push(AggregationLevel {
                id,
                groups,
                assignment,
            });
        }
        Ok(AggregationHierarchy { fine, levels: out })
    }

    /// Single level putting every code in its own group.
    pub fn identity(fine: Arc<Classification>, id: &str) -> Self {
        let pairs = fine
            .codes()
            .map(|c| (c.to_string(), c.to_string()))
            .collect();
        Self::new(fine, vec![(id.to_string(), pairs)]).expect("identity hierarchy is total")
    }

    pub fn fine(&self) -> &Arc<Classification> {
        &self.fine
    }

    pub fn levels(&self) -> &[AggregationLevel] {
        &self.levels
    }

    pub fn level(&self, id: &str) -> Result<&AggregationLevel> {
        self.levels
            .iter()
            .find(|l| l.id == id)
            .ok_or_else(|| Error::UnknownLevel(id.to_string()))
    }

    /// Maps each group of `from` onto the group of `to` containing it.
    /// Fails when `from` is not nested inside `to`.
    pub fn fold(&self, from: &str, to: &str) -> Result<Vec<usize>> {
        let (lf, lt) = (self.level(from)?, self.level(to)?);
        let mut map: Vec<Option<usize>> = vec![None; lf.groups.len()];
        for (&gf, &gt) in lf.assignment.iter().zip(&lt.assignment) {
            match map[gf] {
                None => map[gf] = Some(gt),
                Some(prev) if prev == gt => {}
                Some(prev) => {
                    return Err(Error::InvalidHierarchy(format!(
                        "group `{}` of level `{from}` spans `{}` and `{}` of level `{to}`",
                        lf.groups[gf], lt.groups[prev], lt.groups[gt]
                    )))
                }
            }
        }
        Ok(map.into_iter().map(|g| g.expect("every group has a member")).collect())
    }
}

/// Impacts of one demand vector, with production-layer and substance
/// breakdowns.
#[derive(Debug, Clone)]
pub struct FootprintResult {
    pub indicators: Arc<IndicatorRegistry>,
    pub commodities: Arc<Classification>,
    pub substances: Arc<SubstanceRegistry>,
    pub totals: DVector<f64>,
    /// indicator × emitting commodity
    pub by_sector: DMatrix<f64>,
    /// indicator × substance
    pub by_substance: DMatrix<f64>,
    pub direct_component: DVector<f64>,
    /// Set when the result is an intensity per unit of this currency.
    pub per_currency: Option<Currency>,
    pub scope: String,
    pub model_hash: Option<String>,
}

impl FootprintResult {
    pub fn unit(&self, i: usize) -> String {
        let base = &self.indicators.get(i).unit;
        match &self.per_currency {
            Some(c) => format!("{base}/{c}"),
            None => base.clone(),
        }
    }

    pub fn total(&self, id: &str) -> Result<Quantity> {
        let i = self.indicators.require(id)?;
        Ok(Quantity::new(self.totals[i], self.unit(i)))
    }

    /// Checks that sector and substance breakdowns add up to the totals.
    pub fn check_additivity(&self) -> Result<()> {
        for i in 0..self.indicators.len() {
            let total = self.totals[i];
            let by_sector = self.by_sector.row(i).sum() + self.direct_component[i];
            let by_substance = self.by_substance.row(i).sum();
            for parts in [by_sector, by_substance] {
                if !relative_close(parts, total, ADDITIVITY_TOLERANCE) {
                    return Err(Error::AdditivityViolation {
                        indicator: self.indicators.get(i).id.clone(),
                        parts,
                        total,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Ordinary least squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// `|a - b| <= tol * max(|a|, |b|)`, with an absolute floor of `tol` for
/// values near zero.
pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= tol * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    DimensionMismatch,
    AxisMismatch,
    UnitMismatch,
    NonFinite,
    Negative,
    UncharacterizedSubstance,
    ZeroOutputSector,
    ClampedNegative,
    AssumptionNotice,
    AssemblyFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

impl Finding {
    pub fn new(kind: FindingKind, message: impl Into<String>) -> Self {
        Finding {
            kind,
            message: message.into(),
        }
    }
}

/// Errors block downstream solves; warnings are informational.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn first_error(&self) -> &str {
        self.errors.first().map(|f| f.message.as_str()).unwrap_or("")
    }

    pub fn error(&mut self, kind: FindingKind, message: impl Into<String>) {
        self.errors.push(Finding::new(kind, message));
    }

    pub fn warn(&mut self, kind: FindingKind, message: impl Into<String>) {
        self.warnings.push(Finding::new(kind, message));
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
    }
}

/// Checks the four Leontief inputs against each other.
pub fn validate_model(
    a: &TechnologyMatrix,
    b: &ExtensionMatrix,
    c: &CharacterizationMatrix,
    y: &FinalDemand,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let axis = &a.commodities;

    if !b.commodities.same_axis(axis) {
        report.error(
            FindingKind::AxisMismatch,
            "extension matrix commodity axis differs from technology matrix",
        );
    }
    if !y.commodities.same_axis(axis) {
        report.error(
            FindingKind::AxisMismatch,
            "final demand commodity axis differs from technology matrix",
        );
    }
    for (what, cur) in [("extension matrix", &b.currency), ("final demand", &y.currency)] {
        if *cur != a.currency {
            report.error(
                FindingKind::UnitMismatch,
                format!("{what} currency {cur} differs from technology currency {}", a.currency),
            );
        }
    }

    for j in 0..a.coefficients.ncols() {
        for i in 0..a.coefficients.nrows() {
            let v = a.coefficients[(i, j)];
            if !v.is_finite() {
                report.error(
                    FindingKind::NonFinite,
                    format!("A[{}, {}] is {v}", axis.code(i), axis.code(j)),
                );
            } else if v < 0.0 {
                report.error(
                    FindingKind::Negative,
                    format!("A[{}, {}] is negative ({v})", axis.code(i), axis.code(j)),
                );
            }
        }
    }
    if b.intensities.ncols() == b.commodities.len() {
        for j in 0..b.intensities.ncols() {
            for s in 0..b.intensities.nrows() {
                let v = b.intensities[(s, j)];
                let key = &b.substances.get(s).key;
                if !v.is_finite() {
                    report.error(
                        FindingKind::NonFinite,
                        format!("B[{key}, {}] is {v}", b.commodities.code(j)),
                    );
                } else if v < 0.0 {
                    report.error(
                        FindingKind::Negative,
                        format!("B[{key}, {}] is negative ({v})", b.commodities.code(j)),
                    );
                }
            }
        }
    }
    for (i, ind) in c.indicators.iter().enumerate() {
        for s in 0..c.factors.ncols() {
            let v = c.factors[(i, s)];
            if !v.is_finite() {
                report.error(
                    FindingKind::NonFinite,
                    format!("C[{}, {}] is {v}", ind.id, c.substances.get(s).key),
                );
            }
        }
    }
    for (k, cat) in y.categories.iter().enumerate() {
        for i in 0..y.values.nrows() {
            let v = y.values[(i, k)];
            if !v.is_finite() {
                report.error(
                    FindingKind::NonFinite,
                    format!("y[{}, {}] is {v}", y.commodities.code(i), cat.label),
                );
            }
        }
    }

    for sub in b.substances.iter() {
        match c.substances.position(&sub.key) {
            None => report.warn(
                FindingKind::UncharacterizedSubstance,
                format!("uncharacterized substance {}", sub.key),
            ),
            Some(k) if c.substances.get(k).unit != sub.unit => report.error(
                FindingKind::UnitMismatch,
                format!(
                    "substance {} has unit {} in extensions but {} in characterization",
                    sub.key,
                    sub.unit,
                    c.substances.get(k).unit
                ),
            ),
            Some(_) => {}
        }
    }

    if b.intensities.ncols() == a.coefficients.ncols() {
        for j in 0..a.coefficients.ncols() {
            let no_inputs = a.coefficients.column(j).iter().all(|v| *v == 0.0);
            let no_flows = b.intensities.column(j).iter().all(|v| *v == 0.0);
            if no_inputs && no_flows {
                report.warn(
                    FindingKind::ZeroOutputSector,
                    format!(
                        "sector `{}` has no inputs and no flows (zero output?)",
                        axis.code(j)
                    ),
                );
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(codes: &[&str]) -> Arc<Classification> {
        Arc::new(Classification::from_codes(codes.iter().copied(), Granularity::Fine).unwrap())
    }

    fn registry(keys: &[&str]) -> Arc<SubstanceRegistry> {
        Arc::new(
            SubstanceRegistry::new(
                keys.iter()
                    .map(|k| Substance {
                        key: SubstanceKey::new(*k, "air"),
                        unit: "kg".into(),
                    })
                    .collect(),
            )
            .unwrap(),
        )
    }

    fn indicators(ids: &[&str]) -> Arc<IndicatorRegistry> {
        Arc::new(
            IndicatorRegistry::new(
                ids.iter()
                    .map(|id| Indicator {
                        id: id.to_string(),
                        level: ImpactLevel::Midpoint,
                        unit: "kg CO2 eq".into(),
                    })
                    .collect(),
            )
            .unwrap(),
        )
    }

    fn three_sector() -> (TechnologyMatrix, ExtensionMatrix, CharacterizationMatrix, FinalDemand) {
        let ax = axis(&["a", "b", "c"]);
        let cur = Currency::default();
        let a = TechnologyMatrix::new(
            ax.clone(),
            DMatrix::from_row_slice(3, 3, &[0.1, 0.2, 0.0, 0.0, 0.1, 0.3, 0.2, 0.0, 0.1]),
            cur.clone(),
        )
        .unwrap();
        let subs = registry(&["CO2", "CH4"]);
        let b = ExtensionMatrix::new(
            subs.clone(),
            ax.clone(),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 0.2, 0.01, 0.0, 0.02]),
            cur.clone(),
        )
        .unwrap();
        let c = CharacterizationMatrix::new(
            indicators(&["GWP"]),
            subs,
            DMatrix::from_row_slice(1, 2, &[1.0, 28.0]),
        )
        .unwrap();
        let y = FinalDemand::new(
            ax,
            vec![DemandCategory {
                label: "households".into(),
                export: false,
            }],
            DMatrix::from_column_slice(3, 1, &[10.0, 5.0, 1.0]),
            cur,
        )
        .unwrap();
        (a, b, c, y)
    }

    #[test]
    fn consistent_fixture_has_no_errors() {
        let (a, b, c, y) = three_sector();
        let report = validate_model(&a, &b, &c, &y);
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn uncharacterized_substance_is_a_warning() {
        let (a, _, c, y) = three_sector();
        let subs = registry(&["CO2", "CH4", "SF6"]);
        let b = ExtensionMatrix::new(
            subs,
            a.commodities.clone(),
            DMatrix::from_element(3, 3, 0.1),
            a.currency.clone(),
        )
        .unwrap();
        let report = validate_model(&a, &b, &c, &y);
        assert!(report.errors.is_empty());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].kind, FindingKind::UncharacterizedSubstance);
        assert!(report.warnings[0].message.contains("uncharacterized substance SF6"));
    }

    #[test]
    fn nan_coefficient_names_row_and_column() {
        let (mut a, b, c, y) = three_sector();
        a.coefficients[(1, 2)] = f64::NAN;
        let report = validate_model(&a, &b, &c, &y);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].kind, FindingKind::NonFinite);
        assert!(report.errors[0].message.contains("A[b, c]"));
    }

    #[test]
    fn axis_and_currency_mismatch_are_errors() {
        let (a, mut b, c, mut y) = three_sector();
        b.commodities = axis(&["a", "c", "b"]);
        y.currency = Currency::new("USD");
        let report = validate_model(&a, &b, &c, &y);
        let kinds: Vec<_> = report.errors.iter().map(|f| f.kind).collect();
        assert!(kinds.contains(&FindingKind::AxisMismatch));
        assert!(kinds.contains(&FindingKind::UnitMismatch));
    }

    #[test]
    fn zero_sector_warns() {
        let (mut a, mut b, c, y) = three_sector();
        a.coefficients.column_mut(2).fill(0.0);
        b.intensities.column_mut(2).fill(0.0);
        let report = validate_model(&a, &b, &c, &y);
        assert!(report.errors.is_empty());
        assert_eq!(report.warnings[0].kind, FindingKind::ZeroOutputSector);
    }

    #[test]
    fn classification_rejects_duplicates_and_parses_regions() {
        assert!(matches!(
            Classification::from_codes(["x", "y", "x"], Granularity::Fine),
            Err(Error::DuplicateCode(c)) if c == "x"
        ));
        assert!(matches!(
            Classification::from_codes(Vec::<String>::new(), Granularity::Fine),
            Err(Error::EmptyClassification)
        ));
        let s = Sector::from_qualified("QC:Wheat");
        assert_eq!((s.region.as_str(), s.label.as_str()), ("QC", "Wheat"));
    }

    #[test]
    fn concordance_checks_weights_and_uniqueness() {
        let fine = axis(&["Wheat", "Other crops", "Cattle"]);
        let mut map = BTreeMap::new();
        map.insert(
            "Crop and animal production".to_string(),
            vec![("Other crops".to_string(), 0.94), ("Wheat".to_string(), 0.06)],
        );
        let conc = Concordance::new(map.clone(), &fine).unwrap();
        let w = conc.weights("Crop and animal production").unwrap();
        assert_eq!(w[0].0, "Wheat");

        map.insert("Livestock".into(), vec![("Wheat".into(), 1.0)]);
        assert!(Concordance::new(map, &fine).is_err());

        let mut bad = BTreeMap::new();
        bad.insert("x".to_string(), vec![("Wheat".to_string(), 0.9)]);
        assert!(Concordance::new(bad, &fine).is_err());
    }

    #[test]
    fn hierarchy_fold_requires_nesting() {
        let fine = axis(&["concrete", "cement", "asphalt", "binder"]);
        let h = AggregationHierarchy::new(
            fine,
            vec![
                (
                    "4".into(),
                    vec![
                        ("concrete".into(), "Concrete".into()),
                        ("cement".into(), "Cement".into()),
                        ("asphalt".into(), "Asphalt".into()),
                        ("binder".into(), "Asphalt".into()),
                    ],
                ),
                (
                    "5".into(),
                    vec![
                        ("concrete".into(), "Bridges".into()),
                        ("cement".into(), "Bridges".into()),
                        ("asphalt".into(), "Mix".into()),
                        ("binder".into(), "Mix".into()),
                    ],
                ),
                (
                    "odd".into(),
                    vec![
                        ("concrete".into(), "X".into()),
                        ("cement".into(), "X".into()),
                        ("asphalt".into(), "X".into()),
                        ("binder".into(), "Y".into()),
                    ],
                ),
            ],
        )
        .unwrap();
        assert_eq!(h.fold("4", "5").unwrap(), vec![0, 0, 1]);
        assert!(h.fold("4", "odd").is_err());
        assert!(matches!(h.level("6"), Err(Error::UnknownLevel(_))));
    }

    #[test]
    fn scope_parsing_and_selection() {
        let (_, _, _, mut y) = three_sector();
        y.categories.push(DemandCategory {
            label: "exports".into(),
            export: true,
        });
        y.values = y.values.clone().insert_column(1, 2.0);
        assert_eq!(y.select(&DemandScope::All).unwrap(), vec![0, 1]);
        assert_eq!(y.select(&DemandScope::Consumption).unwrap(), vec![0]);
        let none: DemandScope = "none".parse().unwrap();
        assert!(matches!(y.select(&none), Err(Error::UnknownScope(s)) if s == "none"));
    }
}

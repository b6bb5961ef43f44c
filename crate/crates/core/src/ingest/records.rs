//! Record-layout files: one header line, one record per row.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::csvfile::{with_preamble, CsvFile};
use crate::analyze::LifecycleComponent;
use crate::error::{IngestError, Result};
use crate::model::{
    AggregationHierarchy, CharacterizationMatrix, Classification, Concordance, ImpactLevel,
    Indicator, IndicatorRegistry, Substance, SubstanceKey, SubstanceRegistry,
    WEIGHT_SUM_TOLERANCE,
};
use crate::units::UnitTable;

pub const FLOW_COLUMNS: &[&str] = &[
    "sector",
    "region",
    "substance",
    "compartment",
    "amount",
    "unit",
    "year",
];
pub const DIRECT_COLUMNS: &[&str] = &["category", "substance", "compartment", "amount", "unit"];
pub const CONCORDANCE_COLUMNS: &[&str] = &["coarse", "fine", "weight"];
pub const CHARACTERIZATION_COLUMNS: &[&str] = &[
    "indicator",
    "level",
    "indicator_unit",
    "substance",
    "compartment",
    "substance_unit",
    "factor",
];
pub const AGGREGATION_COLUMNS: &[&str] = &["level", "fine", "group"];
pub const LIFECYCLE_COLUMNS: &[&str] = &["group", "label", "value"];

/// Weight sums within this distance of 1 are renormalized instead of
/// rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// One physical flow reported against a coarse sector, in canonical units.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    /// Region-qualified coarse code (`REGION:sector`, or `sector` when the
    /// region is empty). This is the key looked up in the concordance.
    pub sector: String,
    pub region: String,
    pub substance: SubstanceKey,
    pub amount: f64,
    pub unit: String,
    pub year: Option<i32>,
}

/// Coarse-level flow accounts, merged across source files and sorted by
/// (sector, substance).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawFlowAccount {
    pub records: Vec<FlowRecord>,
}

impl RawFlowAccount {
    /// Canonical unit of every substance present.
    pub fn substance_units(&self) -> BTreeMap<SubstanceKey, String> {
        self.records
            .iter()
            .map(|r| (r.substance.clone(), r.unit.clone()))
            .collect()
    }

    pub fn coarse_codes(&self) -> Vec<&str> {
        let mut codes: Vec<&str> = self.records.iter().map(|r| r.sector.as_str()).collect();
        codes.dedup();
        codes
    }
}

pub(crate) fn qualify(region: &str, sector: &str) -> String {
    if region.is_empty() {
        sector.to_string()
    } else {
        format!("{region}:{sector}")
    }
}

fn check_unit(
    file: &Path,
    line: usize,
    units: &mut HashMap<SubstanceKey, &'static str>,
    key: &SubstanceKey,
    canonical: &'static str,
    declared: &str,
) -> Result<(), IngestError> {
    match units.get(key) {
        Some(prev) if *prev != canonical => Err(IngestError::InconsistentUnit {
            file: file.to_path_buf(),
            line,
            substance: key.to_string(),
            unit: declared.to_string(),
            expected: prev.to_string(),
        }),
        _ => {
            units.insert(key.clone(), canonical);
            Ok(())
        }
    }
}

/// Reads one or more flow files (physical accounts, pollutant inventory).
///
/// A repeated (sector, region, substance, compartment) key inside one file is
/// an error; the same key in different files is summed.
pub fn parse_flow_accounts(paths: &[PathBuf], table: &UnitTable) -> Result<RawFlowAccount> {
    let mut merged: BTreeMap<(String, SubstanceKey), FlowRecord> = BTreeMap::new();
    let mut units: HashMap<SubstanceKey, &'static str> = HashMap::new();
    for path in paths {
        let file = CsvFile::read(path)?;
        file.expect_columns(FLOW_COLUMNS)?;
        let mut seen = HashSet::new();
        for (line, cells) in &file.rows {
            let line = *line;
            file.check_width(line, cells)?;
            let (sector, region) = (&cells[0], &cells[1]);
            let key = SubstanceKey::new(cells[2].clone(), cells[3].clone());
            let amount = file.number(line, "amount", &cells[4])?;
            if amount < 0.0 {
                return Err(IngestError::NegativeAmount {
                    file: path.clone(),
                    line,
                    value: amount,
                }
                .into());
            }
            let (amount, canonical) =
                table
                    .to_canonical(amount, &cells[5])
                    .ok_or_else(|| IngestError::UnknownUnit {
                        file: path.clone(),
                        line,
                        unit: cells[5].clone(),
                    })?;
            check_unit(path, line, &mut units, &key, canonical, &cells[5])?;
            let year = match cells[6].as_str() {
                "" => None,
                y => Some(y.parse::<i32>().map_err(|_| IngestError::NonNumericCell {
                    file: path.clone(),
                    line,
                    column: "year".into(),
                    value: y.to_string(),
                })?),
            };
            let coarse = qualify(region, sector);
            if !seen.insert((coarse.clone(), key.clone())) {
                return Err(IngestError::DuplicateRecord {
                    file: path.clone(),
                    line,
                    key: format!("sector `{coarse}`, substance {key}"),
                }
                .into());
            }
            merged
                .entry((coarse.clone(), key.clone()))
                .and_modify(|r| r.amount += amount)
                .or_insert(FlowRecord {
                    sector: coarse,
                    region: region.clone(),
                    substance: key,
                    amount,
                    unit: canonical.to_string(),
                    year,
                });
        }
    }
    let records: Vec<FlowRecord> = merged.into_values().collect();
    let years: HashSet<i32> = records.iter().filter_map(|r| r.year).collect();
    if years.len() > 1 {
        log::warn!("flow accounts mix {} reference years; year is carried as metadata only", years.len());
    }
    Ok(RawFlowAccount { records })
}

pub fn write_flow_accounts(flows: &RawFlowAccount) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FLOW_COLUMNS).expect("write to memory");
    for r in &flows.records {
        let sector = r
            .sector
            .strip_prefix(&format!("{}:", r.region))
            .filter(|_| !r.region.is_empty())
            .unwrap_or(&r.sector);
        w.write_record([
            sector,
            &r.region,
            &r.substance.id,
            &r.substance.compartment,
            &r.amount.to_string(),
            &r.unit,
            &r.year.map(|y| y.to_string()).unwrap_or_default(),
        ])
        .expect("write to memory");
    }
    with_preamble(&[], &w.into_inner().expect("flush"))
}

/// Emission released directly by a final-demand category.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectEmission {
    pub category: String,
    pub substance: SubstanceKey,
    pub amount: f64,
    pub unit: String,
}

pub fn parse_direct_emissions(path: &Path, table: &UnitTable) -> Result<Vec<DirectEmission>> {
    let file = CsvFile::read(path)?;
    file.expect_columns(DIRECT_COLUMNS)?;
    let mut merged: BTreeMap<(String, SubstanceKey), DirectEmission> = BTreeMap::new();
    let mut units = HashMap::new();
    for (line, cells) in &file.rows {
        let line = *line;
        file.check_width(line, cells)?;
        let key = SubstanceKey::new(cells[1].clone(), cells[2].clone());
        let amount = file.number(line, "amount", &cells[3])?;
        if amount < 0.0 {
            return Err(IngestError::NegativeAmount {
                file: path.to_path_buf(),
                line,
                value: amount,
            }
            .into());
        }
        let (amount, canonical) =
            table
                .to_canonical(amount, &cells[4])
                .ok_or_else(|| IngestError::UnknownUnit {
                    file: path.to_path_buf(),
                    line,
                    unit: cells[4].clone(),
                })?;
        check_unit(path, line, &mut units, &key, canonical, &cells[4])?;
        let k = (cells[0].clone(), key.clone());
        if merged.contains_key(&k) {
            return Err(IngestError::DuplicateRecord {
                file: path.to_path_buf(),
                line,
                key: format!("category `{}`, substance {key}", cells[0]),
            }
            .into());
        }
        merged.insert(
            k,
            DirectEmission {
                category: cells[0].clone(),
                substance: key,
                amount,
                unit: canonical.to_string(),
            },
        );
    }
    Ok(merged.into_values().collect())
}

pub fn write_direct_emissions(records: &[DirectEmission]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DIRECT_COLUMNS).expect("write to memory");
    for r in records {
        w.write_record([
            &r.category,
            &r.substance.id,
            &r.substance.compartment,
            &r.amount.to_string(),
            &r.unit,
        ])
        .expect("write to memory");
    }
    with_preamble(&[], &w.into_inner().expect("flush"))
}

/// Reads `coarse,fine,weight` records and checks them against `fine`.
pub fn parse_concordance(path: &Path, fine: &Classification) -> Result<Concordance> {
    let file = CsvFile::read(path)?;
    file.expect_columns(CONCORDANCE_COLUMNS)?;
    let mut groups: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
    let mut owner: HashMap<String, String> = HashMap::new();
    for (line, cells) in &file.rows {
        let line = *line;
        file.check_width(line, cells)?;
        let (coarse, code) = (&cells[0], &cells[1]);
        let weight = file.number(line, "weight", &cells[2])?;
        if weight < 0.0 {
            return Err(IngestError::InvalidWeight {
                file: path.to_path_buf(),
                line,
                fine: code.clone(),
                weight,
            }
            .into());
        }
        if !fine.contains(code) {
            return Err(IngestError::OrphanFineCode {
                file: path.to_path_buf(),
                line,
                code: code.clone(),
            }
            .into());
        }
        if owner.insert(code.clone(), coarse.clone()).is_some() {
            return Err(IngestError::DuplicateFineCode {
                file: path.to_path_buf(),
                line,
                code: code.clone(),
            }
            .into());
        }
        groups
            .entry(coarse.clone())
            .or_default()
            .push((line, code.clone(), weight));
    }

    let mut map = BTreeMap::new();
    for (coarse, mut entries) in groups {
        entries.sort_by_key(|(_, code, _)| fine.position(code));
        let sum: f64 = entries.iter().map(|(_, _, w)| w).sum();
        let first_line = entries.iter().map(|(l, _, _)| *l).min().unwrap_or(0);
        let deviation = (sum - 1.0).abs();
        if deviation > RENORMALIZE_TOLERANCE || sum == 0.0 {
            return Err(IngestError::WeightSumViolation {
                file: path.to_path_buf(),
                line: first_line,
                coarse,
                sum,
            }
            .into());
        }
        let scale = if deviation > WEIGHT_SUM_TOLERANCE {
            log::info!(
                "{}: weights for `{coarse}` sum to {sum}; renormalized",
                path.display()
            );
            1.0 / sum
        } else {
            1.0
        };
        map.insert(
            coarse,
            entries
                .into_iter()
                .map(|(_, code, w)| (code, w * scale))
                .collect(),
        );
    }
    Concordance::new(map, fine)
}

pub fn write_concordance(conc: &Concordance) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CONCORDANCE_COLUMNS).expect("write to memory");
    for (coarse, entries) in conc.iter() {
        for (fine, weight) in entries {
            w.write_record([coarse, fine.as_str(), &weight.to_string()])
                .expect("write to memory");
        }
    }
    with_preamble(&[], &w.into_inner().expect("flush"))
}

/// Reads characterization factors. Factors are rescaled so that they apply
/// per canonical substance unit.
pub fn parse_characterization(path: &Path, table: &UnitTable) -> Result<CharacterizationMatrix> {
    let file = CsvFile::read(path)?;
    file.expect_columns(CHARACTERIZATION_COLUMNS)?;
    if file.rows.is_empty() {
        return Err(IngestError::EmptyCharacterization {
            file: path.to_path_buf(),
        }
        .into());
    }
    let mut indicators: Vec<Indicator> = Vec::new();
    let mut substances: BTreeMap<SubstanceKey, &'static str> = BTreeMap::new();
    let mut units = HashMap::new();
    let mut factors: BTreeMap<(usize, SubstanceKey), f64> = BTreeMap::new();
    for (line, cells) in &file.rows {
        let line = *line;
        file.check_width(line, cells)?;
        let level: ImpactLevel = cells[1].parse().map_err(|level| IngestError::UnknownLevel {
            file: path.to_path_buf(),
            line,
            level,
        })?;
        let indicator = Indicator {
            id: cells[0].clone(),
            level,
            unit: cells[2].clone(),
        };
        let i = match indicators.iter().position(|x| x.id == indicator.id) {
            Some(i) if indicators[i] == indicator => i,
            Some(_) => {
                return Err(IngestError::DuplicateIndicator {
                    file: path.to_path_buf(),
                    line,
                    indicator: indicator.id,
                }
                .into())
            }
            None => {
                indicators.push(indicator);
                indicators.len() - 1
            }
        };
        let key = SubstanceKey::new(cells[3].clone(), cells[4].clone());
        let conv = table
            .lookup(&cells[5])
            .ok_or_else(|| IngestError::UnknownUnit {
                file: path.to_path_buf(),
                line,
                unit: cells[5].clone(),
            })?;
        check_unit(path, line, &mut units, &key, conv.canonical, &cells[5])?;
        let factor = file.number(line, "factor", &cells[6])? / conv.factor;
        substances.insert(key.clone(), conv.canonical);
        if factors.insert((i, key.clone()), factor).is_some() {
            return Err(IngestError::DuplicateFactor {
                file: path.to_path_buf(),
                line,
                indicator: cells[0].clone(),
                substance: key.to_string(),
            }
            .into());
        }
    }
    let registry = SubstanceRegistry::new(
        substances
            .iter()
            .map(|(k, u)| Substance {
                key: k.clone(),
                unit: u.to_string(),
            })
            .collect(),
    )?;
    let mut matrix = DMatrix::zeros(indicators.len(), registry.len());
    for ((i, key), f) in factors {
        let s = registry.position(&key).expect("registered above");
        matrix[(i, s)] = f;
    }
    CharacterizationMatrix::new(
        Arc::new(IndicatorRegistry::new(indicators)?),
        Arc::new(registry),
        matrix,
    )
}

/// Writes every non-zero factor, indicators in registry order.
pub fn write_characterization(c: &CharacterizationMatrix) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CHARACTERIZATION_COLUMNS)
        .expect("write to memory");
    for (i, ind) in c.indicators.iter().enumerate() {
        let mut wrote = false;
        for (s, sub) in c.substances.iter().enumerate() {
            let f = c.factors[(i, s)];
            // indicators without any non-zero factor keep one explicit zero row
            let last = s + 1 == c.substances.len();
            if f != 0.0 || (last && !wrote) {
                w.write_record([
                    ind.id.as_str(),
                    ind.level.as_str(),
                    &ind.unit,
                    &sub.key.id,
                    &sub.key.compartment,
                    &sub.unit,
                    &f.to_string(),
                ])
                .expect("write to memory");
                wrote = true;
            }
        }
    }
    with_preamble(&[], &w.into_inner().expect("flush"))
}

/// Reads `level,fine,group` records. Every level must assign every fine code
/// exactly once.
pub fn parse_aggregation(path: &Path, fine: Arc<Classification>) -> Result<AggregationHierarchy> {
    let file = CsvFile::read(path)?;
    file.expect_columns(AGGREGATION_COLUMNS)?;
    // (level id, (fine, group) pairs, fine codes seen)
    type Level = (String, Vec<(String, String)>, HashSet<String>);
    let mut levels: Vec<Level> = Vec::new();
    for (line, cells) in &file.rows {
        let line = *line;
        file.check_width(line, cells)?;
        let (level, code, group) = (&cells[0], &cells[1], &cells[2]);
        if !fine.contains(code) {
            return Err(IngestError::OrphanFineCode {
                file: path.to_path_buf(),
                line,
                code: code.clone(),
            }
            .into());
        }
        let idx = match levels.iter().position(|(id, _, _)| id == level) {
            Some(i) => i,
            None => {
                levels.push((level.clone(), Vec::new(), HashSet::new()));
                levels.len() - 1
            }
        };
        let entry = &mut levels[idx];
        if !entry.2.insert(code.clone()) {
            return Err(IngestError::DuplicateFineCode {
                file: path.to_path_buf(),
                line,
                code: code.clone(),
            }
            .into());
        }
        entry.1.push((code.clone(), group.clone()));
    }
    for (id, _, assigned) in &levels {
        let missing: Vec<&str> = fine.codes().filter(|c| !assigned.contains(*c)).collect();
        if !missing.is_empty() {
            return Err(IngestError::IncompleteLevel {
                file: path.to_path_buf(),
                level: id.clone(),
                missing: missing.join(", "),
            }
            .into());
        }
    }
    AggregationHierarchy::new(
        fine,
        levels.into_iter().map(|(id, pairs, _)| (id, pairs)).collect(),
    )
}

pub fn write_aggregation(h: &AggregationHierarchy) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATION_COLUMNS).expect("write to memory");
    for level in h.levels() {
        for (i, code) in h.fine().codes().enumerate() {
            w.write_record([level.id.as_str(), code, level.group_of(i)])
                .expect("write to memory");
        }
    }
    with_preamble(&[], &w.into_inner().expect("flush"))
}

/// Reads `group,label,value` lifecycle components in file order.
pub fn parse_lifecycle(path: &Path) -> Result<Vec<LifecycleComponent>> {
    let file = CsvFile::read(path)?;
    file.expect_columns(LIFECYCLE_COLUMNS)?;
    let mut out = Vec::with_capacity(file.rows.len());
    for (line, cells) in &file.rows {
        file.check_width(*line, cells)?;
        let value = file.number(*line, "value", &cells[2])?;
        if value < 0.0 {
            return Err(IngestError::NegativeAmount {
                file: path.to_path_buf(),
                line: *line,
                value,
            }
            .into());
        }
        out.push(LifecycleComponent {
            group: cells[0].clone(),
            label: cells[1].clone(),
            value,
        });
    }
    Ok(out)
}

pub fn write_lifecycle(components: &[LifecycleComponent], unit: &str) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LIFECYCLE_COLUMNS).expect("write to memory");
    for c in components {
        w.write_record([c.group.as_str(), &c.label, &c.value.to_string()])
            .expect("write to memory");
    }
    with_preamble(&[("unit", unit.to_string())], &w.into_inner().expect("flush"))
}

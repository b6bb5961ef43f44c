//! Model file format.
//!
//! A JSON document:
//!
//! ```text
//! { "format": "eeio-model", "schema_version": 1,
//!   "content_hash": "<sha256 hex of the compact JSON encoding of `model`>",
//!   "model": { currency, commodities, technology, output, substances,
//!              extensions, indicators, characterization, demand_categories,
//!              final_demand, direct_emissions, hierarchy } }
//! ```
//!
//! Matrices are row-major arrays of rows. Field order is fixed, so
//! identical models produce identical bytes.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assemble::IOModel;
use crate::error::{Error, Result};
use crate::model::{
    AggregationHierarchy, CharacterizationMatrix, Classification, Currency, DemandCategory,
    DirectFinalDemandEmissions, ExtensionMatrix, FinalDemand, Granularity, Indicator,
    IndicatorRegistry, Sector, Substance, SubstanceRegistry, TechnologyMatrix,
};

pub const FORMAT: &str = "eeio-model";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Archive {
    format: String,
    schema_version: u32,
    content_hash: String,
    model: Body,
}

#[derive(Serialize, Deserialize)]
struct Body {
    currency: String,
    commodities: Vec<Sector>,
    granularity: Granularity,
    technology: Vec<Vec<f64>>,
    output: Vec<f64>,
    substances: Vec<Substance>,
    extensions: Vec<Vec<f64>>,
    indicators: Vec<Indicator>,
    characterization: Vec<Vec<f64>>,
    demand_categories: Vec<DemandCategory>,
    final_demand: Vec<Vec<f64>>,
    direct_emissions: Vec<Vec<f64>>,
    hierarchy: Option<Vec<Level>>,
}

#[derive(Serialize, Deserialize)]
struct Level {
    id: String,
    /// group label per commodity, in axis order
    groups: Vec<String>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Archive(format!("{what} is not {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn body(model: &IOModel) -> Body {
    let commodities = model.commodities();
    Body {
        currency: model.currency().to_string(),
        commodities: commodities.entries().to_vec(),
        granularity: commodities.granularity(),
        technology: rows(&model.technology().coefficients),
        output: model.output().iter().copied().collect(),
        substances: model.extensions().substances.iter().cloned().collect(),
        extensions: rows(&model.extensions().intensities),
        indicators: model.characterization().indicators.iter().cloned().collect(),
        characterization: rows(&model.characterization().factors),
        demand_categories: model.final_demand().categories.clone(),
        final_demand: rows(&model.final_demand().values),
        direct_emissions: rows(&model.direct_emissions().values),
        hierarchy: model.hierarchy().map(|h| {
            h.levels()
                .iter()
                .map(|l| Level {
                    id: l.id.clone(),
                    groups: (0..commodities.len()).map(|j| l.group_of(j).to_string()).collect(),
                })
                .collect()
        }),
    }
}

fn hash_body(body: &Body) -> String {
    let bytes = serde_json::to_vec(body).expect("model body serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// SHA-256 (hex) of the canonical model encoding.
pub fn content_hash(model: &IOModel) -> String {
    hash_body(&body(model))
}

/// Serializes `model` as a pretty-printed archive.
pub fn to_bytes(model: &IOModel) -> Vec<u8> {
    let model_body = body(model);
    let archive = Archive {
        format: FORMAT.into(),
        schema_version: SCHEMA_VERSION,
        content_hash: hash_body(&model_body),
        model: model_body,
    };
    let mut out = serde_json::to_vec_pretty(&archive).expect("archive serializes");
    out.push(b'\n');
    out
}

pub fn save(model: &IOModel, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_bytes(model))
}

pub fn from_bytes(bytes: &[u8]) -> Result<IOModel> {
    let archive: Archive =
        serde_json::from_slice(bytes).map_err(|e| Error::Archive(e.to_string()))?;
    if archive.format != FORMAT {
        return Err(Error::Archive(format!("unexpected format `{}`", archive.format)));
    }
    if archive.schema_version != SCHEMA_VERSION {
        return Err(Error::Archive(format!(
            "unsupported schema version {}",
            archive.schema_version
        )));
    }
    let b = archive.model;
    let currency = Currency::new(b.currency);
    let commodities = Arc::new(Classification::new(b.commodities, b.granularity)?);
    let n = commodities.len();
    let substances = Arc::new(SubstanceRegistry::new(b.substances)?);
    let indicators = Arc::new(IndicatorRegistry::new(b.indicators)?);
    let (ns, ni, nk) = (substances.len(), indicators.len(), b.demand_categories.len());

    let technology = TechnologyMatrix::new(
        Arc::clone(&commodities),
        matrix(&b.technology, n, n, "technology")?,
        currency.clone(),
    )?;
    let extensions = ExtensionMatrix::new(
        Arc::clone(&substances),
        Arc::clone(&commodities),
        matrix(&b.extensions, ns, n, "extensions")?,
        currency.clone(),
    )?;
    let characterization = CharacterizationMatrix::new(
        indicators,
        Arc::clone(&substances),
        matrix(&b.characterization, ni, ns, "characterization")?,
    )?;
    let labels = b.demand_categories.iter().map(|c| c.label.clone()).collect();
    let final_demand = FinalDemand::new(
        Arc::clone(&commodities),
        b.demand_categories,
        matrix(&b.final_demand, n, nk, "final demand")?,
        currency,
    )?;
    let direct = DirectFinalDemandEmissions::new(
        substances,
        labels,
        matrix(&b.direct_emissions, ns, nk, "direct emissions")?,
    )?;
    if b.output.len() != n {
        return Err(Error::Archive(format!("output has {} entries, expected {n}", b.output.len())));
    }
    let hierarchy = b
        .hierarchy
        .map(|levels| {
            let levels = levels
                .into_iter()
                .map(|l| {
                    let pairs = commodities
                        .codes()
                        .map(str::to_string)
                        .zip(l.groups)
                        .collect();
                    (l.id, pairs)
                })
                .collect();
            AggregationHierarchy::new(Arc::clone(&commodities), levels)
        })
        .transpose()?;
    let model = IOModel::new(
        technology,
        extensions,
        characterization,
        final_demand,
        direct,
        DVector::from_vec(b.output),
    )?
    .with_hierarchy(hierarchy)?;
    if model.content_hash() != archive.content_hash {
        return Err(Error::Archive(format!(
            "content hash mismatch: file says {}, content hashes to {}",
            archive.content_hash,
            model.content_hash()
        )));
    }
    Ok(model)
}

pub fn load(path: &Path) -> Result<IOModel> {
    let bytes = std::fs::read(path).map_err(|e| {
        Error::Archive(format!("{}: {e}", path.display()))
    })?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Archive(m) => Error::Archive(format!("{}: {m}", path.display())),
        other => other,
    })
}

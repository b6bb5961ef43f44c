use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::assemble::IOModel;
use crate::error::{Error, Result};
use crate::model::{relative_close, Classification, IndicatorRegistry, ADDITIVITY_TOLERANCE};
use crate::solve::{multipliers, sector_intensity};

/// First-tier split of one sector's cradle-to-gate intensity into its own
/// emissions and the full upstream impact of each purchase.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub sector: String,
    pub indicators: Arc<IndicatorRegistry>,
    pub commodities: Arc<Classification>,
    /// indicator
    pub direct: DVector<f64>,
    /// indicator × purchased commodity
    pub per_input: DMatrix<f64>,
    /// indicator
    pub total: DVector<f64>,
}

impl DecompositionResult {
    pub fn check_additivity(&self) -> Result<()> {
        for i in 0..self.total.len() {
            let parts = self.direct[i] + self.per_input.row(i).sum();
            if !relative_close(parts, self.total[i], ADDITIVITY_TOLERANCE) {
                return Err(Error::AdditivityViolation {
                    indicator: self.indicators.get(i).id.clone(),
                    parts,
                    total: self.total[i],
                });
            }
        }
        Ok(())
    }
}

/// `direct = C·B[:, s]`, `per_input[:, j] = M[:, j]·A[j, s]` with
/// `M = C·B·(I - A)⁻¹`, and `total` from a separate forward solve.
pub fn first_tier_decomposition(model: &IOModel, sector: &str) -> Result<DecompositionResult> {
    let s = model.sector_index(sector)?;
    let cb = model.direct_impact_intensities();
    let direct = cb.column(s).into_owned();
    let m = multipliers(model)?;
    let a_col = model.technology().coefficients.column(s);
    let mut per_input = m;
    for (j, a) in a_col.iter().enumerate() {
        per_input.column_mut(j).scale_mut(*a);
    }
    let total = sector_intensity(model, sector)?.totals;
    let result = DecompositionResult {
        sector: sector.to_string(),
        indicators: Arc::clone(&model.characterization().indicators),
        commodities: Arc::clone(model.commodities()),
        direct,
        per_input,
        total,
    };
    result.check_additivity()?;
    Ok(result)
}

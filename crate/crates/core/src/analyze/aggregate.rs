use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{AggregationHierarchy, Classification, FootprintResult, IndicatorRegistry};

use super::DecompositionResult;

/// Label of the column holding emissions not attributed to a purchase.
pub const DIRECT_LABEL: &str = "Direct emissions";

/// Indicator × contributor table. Contributor columns follow
/// classification order; the direct column, when present, is last.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionTable {
    pub indicators: Arc<IndicatorRegistry>,
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
    pub totals: DVector<f64>,
    pub has_direct: bool,
}

impl ContributionTable {
    /// Value of each column divided by the indicator total (0 when the
    /// total is 0).
    pub fn shares(&self, indicator: usize) -> Vec<f64> {
        let t = self.totals[indicator];
        self.values
            .row(indicator)
            .iter()
            .map(|v| if t != 0.0 { v / t } else { 0.0 })
            .collect()
    }

    /// Column indices ordered by decreasing value; ties keep column order.
    pub fn rank(&self, indicator: usize) -> Vec<usize> {
        let row = self.values.row(indicator);
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx
    }

    pub fn column(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn purchase_columns(&self) -> usize {
        self.labels.len() - usize::from(self.has_direct)
    }
}

/// Anything that splits indicator totals over fine commodities plus a
/// direct remainder.
pub trait Contributions {
    fn indicators(&self) -> &Arc<IndicatorRegistry>;
    fn commodities(&self) -> &Arc<Classification>;
    /// indicator × commodity
    fn by_commodity(&self) -> &DMatrix<f64>;
    fn direct(&self) -> &DVector<f64>;
    fn totals(&self) -> &DVector<f64>;

    /// The table at the finest level, one column per commodity.
    fn fine_table(&self) -> ContributionTable {
        let fine = self.commodities();
        let mut labels: Vec<String> = fine.codes().map(str::to_string).collect();
        labels.push(DIRECT_LABEL.to_string());
        let by = self.by_commodity();
        let n = by.ncols();
        let values = DMatrix::from_fn(by.nrows(), n + 1, |i, j| {
            if j < n {
                by[(i, j)]
            } else {
                self.direct()[i]
            }
        });
        ContributionTable {
            indicators: Arc::clone(self.indicators()),
            labels,
            values,
            totals: self.totals().clone(),
            has_direct: true,
        }
    }
}

impl Contributions for FootprintResult {
    fn indicators(&self) -> &Arc<IndicatorRegistry> {
        &self.indicators
    }
    fn commodities(&self) -> &Arc<Classification> {
        &self.commodities
    }
    fn by_commodity(&self) -> &DMatrix<f64> {
        &self.by_sector
    }
    fn direct(&self) -> &DVector<f64> {
        &self.direct_component
    }
    fn totals(&self) -> &DVector<f64> {
        &self.totals
    }
}

impl Contributions for DecompositionResult {
    fn indicators(&self) -> &Arc<IndicatorRegistry> {
        &self.indicators
    }
    fn commodities(&self) -> &Arc<Classification> {
        &self.commodities
    }
    fn by_commodity(&self) -> &DMatrix<f64> {
        &self.per_input
    }
    fn direct(&self) -> &DVector<f64> {
        &self.direct
    }
    fn totals(&self) -> &DVector<f64> {
        &self.total
    }
}

/// Sums commodity columns into the groups of `level`. Totals and the direct
/// column pass through unchanged.
pub fn aggregate(
    result: &impl Contributions,
    hierarchy: &AggregationHierarchy,
    level: &str,
) -> Result<ContributionTable> {
    let lvl = hierarchy.level(level)?;
    if !hierarchy.fine().same_axis(result.commodities()) {
        return Err(Error::AxisMismatch(
            "aggregation hierarchy is defined over a different commodity axis".into(),
        ));
    }
    let by = result.by_commodity();
    let ng = lvl.groups().len();
    let mut values = DMatrix::zeros(by.nrows(), ng + 1);
    for (j, &g) in lvl.assignment().iter().enumerate() {
        for i in 0..by.nrows() {
            values[(i, g)] += by[(i, j)];
        }
    }
    values.set_column(ng, result.direct());
    let mut labels = lvl.groups().to_vec();
    labels.push(DIRECT_LABEL.to_string());
    Ok(ContributionTable {
        indicators: Arc::clone(result.indicators()),
        labels,
        values,
        totals: result.totals().clone(),
        has_direct: true,
    })
}

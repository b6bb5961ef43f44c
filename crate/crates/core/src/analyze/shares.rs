use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::assemble::IOModel;
use crate::error::{Error, Result};
use crate::model::{DemandScope, IndicatorRegistry};
use crate::solve::{footprint, multipliers};
use crate::units::Quantity;

/// How national impacts are assigned to target sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    /// Impacts emitted by the target sectors' own production.
    #[default]
    EmittingSector,
    /// Supply-chain impacts of final demand for the target sectors' products.
    FinalProduct,
}

impl FromStr for Attribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "emitting-sector" => Ok(Attribution::EmittingSector),
            "final-product" => Ok(Attribution::FinalProduct),
            other => Err(Error::UnknownScope(format!("attribution `{other}`"))),
        }
    }
}

/// Sectors whose share is wanted; `include_direct` adds final consumers'
/// own emissions to the target.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TargetSet {
    pub sectors: Vec<String>,
    pub include_direct: bool,
}

impl TargetSet {
    pub fn sectors<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TargetSet {
            sectors: codes.into_iter().map(Into::into).collect(),
            include_direct: false,
        }
    }

    /// Every sector plus direct emissions: shares are exactly 1.
    pub fn everything(model: &IOModel) -> Self {
        TargetSet {
            sectors: model.commodities().codes().map(str::to_string).collect(),
            include_direct: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NationalShares {
    pub indicators: Arc<IndicatorRegistry>,
    pub attribution: Attribution,
    pub target: DVector<f64>,
    pub national: DVector<f64>,
    pub shares: DVector<f64>,
}

/// Fraction of each national indicator total attributed to `target`.
pub fn national_shares(
    model: &IOModel,
    target: &TargetSet,
    scope: &DemandScope,
    attribution: Attribution,
) -> Result<NationalShares> {
    if !scope.covers_full_demand() {
        return Err(Error::PartialScope(scope.to_string()));
    }
    let idx = target
        .sectors
        .iter()
        .map(|s| model.sector_index(s))
        .collect::<Result<std::collections::BTreeSet<_>>>()?;
    let fp = footprint(model, scope)?;
    let mut attributed = match attribution {
        Attribution::EmittingSector => {
            let mut t = DVector::zeros(fp.totals.len());
            for &j in &idx {
                t += fp.by_sector.column(j);
            }
            t
        }
        Attribution::FinalProduct => {
            let cols = model.final_demand().select(scope)?;
            let y = model.final_demand().column_sum(&cols);
            let mut yt = DVector::zeros(y.len());
            for &j in &idx {
                yt[j] = y[j];
            }
            multipliers(model)? * yt
        }
    };
    if target.include_direct {
        attributed += &fp.direct_component;
    }
    let shares = DVector::from_iterator(
        attributed.len(),
        attributed.iter().zip(fp.totals.iter()).map(|(t, n)| {
            if *n > 0.0 {
                (t / n).clamp(0.0, 1.0)
            } else {
                0.0
            }
        }),
    );
    Ok(NationalShares {
        indicators: fp.indicators,
        attribution,
        target: attributed,
        national: fp.totals,
        shares,
    })
}

/// `q / population`, with the unit suffixed `/capita`.
pub fn per_capita(q: &Quantity, population: f64) -> Result<Quantity> {
    if !(population.is_finite() && population > 0.0) {
        return Err(Error::ZeroPopulation(population));
    }
    Ok(Quantity::new(q.value / population, format!("{}/capita", q.unit)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::model_from_matrices;
    use crate::units::UnitTable;
    use nalgebra::DMatrix;

    fn model() -> IOModel {
        let a = DMatrix::from_row_slice(3, 3, &[0.1, 0.2, 0.0, 0.0, 0.1, 0.3, 0.2, 0.0, 0.1]);
        let b = DMatrix::from_row_slice(1, 3, &[1.0, 4.0, 0.5]);
        model_from_matrices(a, b, DMatrix::identity(1, 1), DVector::from_vec(vec![3.0, 1.0, 2.0]))
            .unwrap()
    }

    #[test]
    fn everything_is_one_and_nothing_is_zero() {
        let m = model();
        for attr in [Attribution::EmittingSector, Attribution::FinalProduct] {
            let all = national_shares(&m, &TargetSet::everything(&m), &DemandScope::All, attr).unwrap();
            assert!((all.shares[0] - 1.0).abs() < 1e-12);
            let none = national_shares(&m, &TargetSet::default(), &DemandScope::All, attr).unwrap();
            assert_eq!(none.shares[0], 0.0);
        }
    }

    #[test]
    fn partial_scope_is_refused() {
        let m = model();
        let scope = DemandScope::Categories(vec!["final".into()]);
        assert!(matches!(
            national_shares(&m, &TargetSet::default(), &scope, Attribution::EmittingSector),
            Err(Error::PartialScope(_))
        ));
    }

    #[test]
    fn singleton_shares_sum_to_one() {
        let m = model();
        for attr in [Attribution::EmittingSector, Attribution::FinalProduct] {
            let total: f64 = (0..3)
                .map(|j| {
                    national_shares(&m, &TargetSet::sectors([format!("s{j}")]), &DemandScope::All, attr)
                        .unwrap()
                        .shares[0]
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn per_capita_examples() {
        let t = UnitTable::standard();
        let q = per_capita(&Quantity::new(6.92e11, "kg CO2 eq"), 3.84e7).unwrap();
        assert!((q.value - 18_020.833_333_333_332).abs() < 1e-6);
        let tonnes = q.rescale_mass(&t, "t");
        assert_eq!(tonnes.unit, "t CO2 eq/capita");
        assert!((tonnes.value - 18.0).abs() < 0.1);
        assert_eq!(per_capita(&Quantity::new(0.0, "kg"), 5.0).unwrap().value, 0.0);
        assert_eq!(per_capita(&Quantity::new(1.0, "kg"), 1.0).unwrap().value, 1.0);
        assert!(matches!(per_capita(&Quantity::new(1.0, "kg"), 0.0), Err(Error::ZeroPopulation(_))));
    }
}

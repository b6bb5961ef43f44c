//! Leontief solves against a factorization of `I - A` computed once per
//! model. The inverse is never formed.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;

use crate::assemble::IOModel;
use crate::error::{Error, Result};
use crate::model::{DemandScope, FootprintResult, TechnologyMatrix};

/// Largest accepted `‖(I - A)x - y‖ / ‖y‖`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// A solution with the relative residual it was accepted at.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DVector<f64>,
    pub relative_residual: f64,
    pub refined: bool,
}

/// Dense LU factorization of `I - A`. Solves are `&self` and can run
/// concurrently; the transposed factorization is built on first use.
#[derive(Debug)]
pub struct LeontiefSolver {
    system: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    transposed: OnceLock<(DMatrix<f64>, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

impl LeontiefSolver {
    pub fn new(a: &TechnologyMatrix) -> Result<LeontiefSolver> {
        let n = a.len();
        let system = DMatrix::identity(n, n) - &a.coefficients;
        let lu = system.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem {
                relative_residual: f64::INFINITY,
            });
        }
        Ok(LeontiefSolver {
            system,
            lu,
            transposed: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.system.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.system.nrows() == 0
    }

    /// Solves `(I - A) x = y`.
    pub fn solve(&self, y: &DVector<f64>) -> Result<Solution> {
        solve_checked(&self.system, &self.lu, y)
    }

    /// Solves `(I - A)ᵀ x = y`.
    pub fn solve_transpose(&self, y: &DVector<f64>) -> Result<Solution> {
        let (sys, lu) = self.transposed.get_or_init(|| {
            let t = self.system.transpose();
            let lu = t.clone().lu();
            (t, lu)
        });
        solve_checked(sys, lu, y)
    }

    /// Solves for every column of `y` in parallel.
    pub fn solve_columns(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cols = (0..y.ncols())
            .into_par_iter()
            .map(|j| self.solve(&y.column(j).into_owned()).map(|s| s.x))
            .collect::<Result<Vec<_>>>()?;
        if cols.is_empty() {
            return Ok(DMatrix::zeros(y.nrows(), 0));
        }
        Ok(DMatrix::from_columns(&cols))
    }
}

fn relative_residual(system: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, f64) {
    let r = y - system * x;
    let scale = y.norm();
    let rel = if scale > 0.0 { r.norm() / scale } else { r.norm() };
    (r, rel)
}

fn solve_checked(
    system: &DMatrix<f64>,
    lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    y: &DVector<f64>,
) -> Result<Solution> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut x = lu.solve(y).ok_or(Error::SingularSystem {
        relative_residual: f64::INFINITY,
    })?;
    let (r, rel) = relative_residual(system, &x, y);
    if rel <= RESIDUAL_TOLERANCE {
        return Ok(Solution {
            x,
            relative_residual: rel,
            refined: false,
        });
    }
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let (_, rel) = relative_residual(system, &x, y);
    if rel <= RESIDUAL_TOLERANCE && rel.is_finite() {
        Ok(Solution {
            x,
            relative_residual: rel,
            refined: true,
        })
    } else {
        Err(Error::SingularSystem {
            relative_residual: rel,
        })
    }
}

/// Total output `x = (I - A)⁻¹ y` required to deliver `y`.
pub fn total_requirements(model: &IOModel, y: &DVector<f64>) -> Result<Solution> {
    if y.len() != model.commodities().len() {
        return Err(Error::Dimension(format!(
            "demand has {} entries, model has {} commodities",
            y.len(),
            model.commodities().len()
        )));
    }
    model.solver().solve(y)
}

/// Total impact multipliers `C · B · (I - A)⁻¹` (indicator × commodity),
/// computed by solving against the transposed system.
pub fn multipliers(model: &IOModel) -> Result<DMatrix<f64>> {
    let cb = model.direct_impact_intensities();
    let rows = (0..cb.nrows())
        .into_par_iter()
        .map(|i| {
            model
                .solver()
                .solve_transpose(&cb.row(i).transpose())
                .map(|s| s.x.transpose())
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, model.commodities().len()));
    }
    Ok(DMatrix::from_rows(&rows))
}

/// Impacts of the demand selected by `scope`, with direct final-demand
/// emissions of the same categories.
pub fn footprint(model: &IOModel, scope: &DemandScope) -> Result<FootprintResult> {
    let cols = model.final_demand().select(scope)?;
    let y = model.final_demand().column_sum(&cols);
    let f = model.direct_emissions().column_sum(&cols);
    let mut result = footprint_of(model, &y, &f)?;
    result.scope = scope.to_string();
    Ok(result)
}

/// Impacts of an arbitrary demand vector plus direct emissions `f`.
pub fn footprint_of(model: &IOModel, y: &DVector<f64>, f: &DVector<f64>) -> Result<FootprintResult> {
    let x = total_requirements(model, y)?.x;
    let c = &model.characterization().factors;
    let b = &model.extensions().intensities;

    let mut by_sector = c * b;
    for (j, xj) in x.iter().enumerate() {
        by_sector.column_mut(j).scale_mut(*xj);
    }
    let emitted = b * &x + f;
    let mut by_substance = c.clone();
    for (s, e) in emitted.iter().enumerate() {
        by_substance.column_mut(s).scale_mut(*e);
    }
    let direct_component = c * f;
    let totals = c * emitted;

    let result = FootprintResult {
        indicators: std::sync::Arc::clone(&model.characterization().indicators),
        commodities: std::sync::Arc::clone(model.commodities()),
        substances: std::sync::Arc::clone(&model.extensions().substances),
        totals,
        by_sector,
        by_substance,
        direct_component,
        per_currency: None,
        scope: "custom".into(),
        model_hash: Some(model.content_hash().to_string()),
    };
    result.check_additivity()?;
    Ok(result)
}

/// Cradle-to-gate impacts per currency unit of `sector`'s output.
pub fn sector_intensity(model: &IOModel, sector: &str) -> Result<FootprintResult> {
    let s = model.sector_index(sector)?;
    let n = model.commodities().len();
    let mut y = DVector::zeros(n);
    y[s] = 1.0;
    let f = DVector::zeros(model.extensions().substances.len());
    let mut result = footprint_of(model, &y, &f)?;
    result.per_currency = Some(model.currency().clone());
    result.scope = format!("unit demand on {sector}");
    Ok(result)
}

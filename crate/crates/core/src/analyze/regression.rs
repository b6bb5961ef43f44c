use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::RegressionFit;

use super::ContributionTable;

/// OLS line `y = slope·x + intercept` through `points`.
pub fn midpoint_endpoint_regression(points: &[(f64, f64)]) -> Result<RegressionFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    // a constant y is fitted exactly by the flat line
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub label: String,
    /// Percent of the x indicator total.
    pub x: f64,
    /// Percent of the y indicator total.
    pub y: f64,
}

/// Percentage contributions of each column to indicators `x` and `y`. The
/// direct column is left out unless `include_direct`.
pub fn contribution_points(
    table: &ContributionTable,
    x: usize,
    y: usize,
    include_direct: bool,
) -> Vec<ScatterPoint> {
    let (sx, sy) = (table.shares(x), table.shares(y));
    let keep = if include_direct {
        table.labels.len()
    } else {
        table.purchase_columns()
    };
    (0..keep)
        .map(|k| ScatterPoint {
            label: table.labels[k].clone(),
            x: 100.0 * sx[k],
            y: 100.0 * sy[k],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let fit = midpoint_endpoint_regression(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_points_fit_exactly() {
        let fit = midpoint_endpoint_regression(&[(1.0, 7.0), (3.0, -2.0)]).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(midpoint_endpoint_regression(&[(1.0, 2.0)]), Err(Error::TooFewPoints(1))));
        assert!(matches!(
            midpoint_endpoint_regression(&[(1.0, 2.0), (1.0, 3.0)]),
            Err(Error::DegenerateX)
        ));
        assert!(matches!(
            midpoint_endpoint_regression(&[(1.0, f64::NAN), (2.0, 3.0)]),
            Err(Error::NonFiniteInput)
        ));
    }

    #[test]
    fn five_point_fixture() {
        // hand-computed: mean x 3, mean y 4.5, Sxy 14.5, Sxx 10 → slope 1.45,
        // intercept 0.15; SS_res 0.475, SS_tot 21.5
        let pts = [(1.0, 1.5), (2.0, 3.5), (3.0, 4.0), (4.0, 6.0), (5.0, 7.5)];
        let fit = midpoint_endpoint_regression(&pts).unwrap();
        assert!((fit.slope - 1.45).abs() < 1e-12);
        assert!((fit.intercept - 0.15).abs() < 1e-12);
        assert!((fit.r_squared - (1.0 - 0.475 / 21.5)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn r_squared_is_affine_invariant(
            pts in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 3..40),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
            c in -10.0f64..-0.1, d in -50.0f64..50.0,
        ) {
            let Ok(base) = midpoint_endpoint_regression(&pts) else { return Ok(()); };
            let sx: Vec<_> = pts.iter().map(|(x, y)| (a * x + b, *y)).collect();
            let sy: Vec<_> = pts.iter().map(|(x, y)| (*x, c * y + d)).collect();
            let fx = midpoint_endpoint_regression(&sx).unwrap();
            let fy = midpoint_endpoint_regression(&sy).unwrap();
            prop_assert!((fx.r_squared - base.r_squared).abs() < 1e-9);
            prop_assert!((fy.r_squared - base.r_squared).abs() < 1e-9);
        }
    }
}

//! Ordinary least squares with classical inference.
//!
//! The solve goes through a QR factorization; the explicit normal-equation
//! route exists only as an independent oracle in the test suite.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::regression::RegressionError;

/// Coefficients with classical (homoskedastic) inference statistics.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub n_obs: usize,
    pub n_params: usize,
}

/// Fit y = X beta + e by least squares.
///
/// Requires more rows than columns and a full-rank X (encode_design already
/// drops absent-level dummies, so rank deficiency here means genuinely
/// collinear predictors). Standard errors come from sigma^2 (X'X)^-1 with
/// (X'X)^-1 reconstructed from the R factor; p-values are two-sided t-tests
/// on n - p degrees of freedom.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, RegressionError> {
    let n = x.nrows();
    let p = x.ncols();
    if n < p + 1 {
        return Err(RegressionError::InsufficientObservations { rows: n, cols: p });
    }

    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();

    // Rank check on R's diagonal relative to its largest entry.
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return Err(RegressionError::SingularMatrix);
    }
    for i in 0..p {
        if r[(i, i)].abs() < 1e-10 * max_diag {
            return Err(RegressionError::SingularMatrix);
        }
    }

    let qty = q.transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(RegressionError::SingularMatrix)?;

    let residuals = y - x * &beta;
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let df = (n - p) as f64;
    let sigma2 = rss / df;

    // (X'X)^-1 = R^-1 R^-T, via a triangular solve against the identity.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(RegressionError::SingularMatrix)?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let y_mean = y.sum() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r2 = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss < 1e-12 {
        1.0
    } else {
        0.0
    };
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;

    let t_dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|_| RegressionError::InsufficientObservations { rows: n, cols: p })?;
    let mut std_errors = Vec::with_capacity(p);
    let mut t_stats = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        let se = (sigma2 * xtx_inv[(j, j)]).max(0.0).sqrt();
        std_errors.push(se);
        let t = if se > 0.0 { beta[j] / se } else { f64::INFINITY };
        t_stats.push(t);
        let p_val = if t.is_finite() {
            2.0 * (1.0 - t_dist.cdf(t.abs()))
        } else {
            0.0
        };
        p_values.push(p_val);
    }

    Ok(OlsFit {
        estimates: beta.iter().copied().collect(),
        std_errors,
        t_stats,
        p_values,
        r2,
        adjusted_r2,
        n_obs: n,
        n_params: p,
    })
}

/// Significance stars: p<0.10 ".", p<0.05 "*", p<0.01 "**", p<0.001 "***".
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.10 {
        "·"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        // y = 2 + 3 x1 - 1.5 x2, exactly.
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64 * 0.1,
            _ => ((i * i) % 17) as f64,
        });
        let y = DVector::from_fn(n, |i, _| {
            2.0 + 3.0 * (i as f64 * 0.1) - 1.5 * (((i * i) % 17) as f64)
        });
        (x, y)
    }

    #[test]
    fn exact_linear_data_recovers_coefficients_with_unit_r2() {
        let (x, y) = design(40);
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.estimates[0] - 2.0).abs() < 1e-9);
        assert!((fit.estimates[1] - 3.0).abs() < 1e-9);
        assert!((fit.estimates[2] + 1.5).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.adjusted_r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_column_is_singular() {
        let x = DMatrix::from_fn(10, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => i as f64,
        });
        let y = DVector::from_fn(10, |i, _| i as f64);
        assert!(matches!(
            fit_ols(&x, &y),
            Err(RegressionError::SingularMatrix)
        ));
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let x = DMatrix::from_element(3, 3, 1.0);
        let y = DVector::from_element(3, 1.0);
        assert!(matches!(
            fit_ols(&x, &y),
            Err(RegressionError::InsufficientObservations { .. })
        ));
    }

    #[test]
    fn stars_follow_the_threshold_ladder() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.005), "**");
        assert_eq!(significance_stars(0.03), "*");
        assert_eq!(significance_stars(0.08), "·");
        assert_eq!(significance_stars(0.2), "");
    }
}

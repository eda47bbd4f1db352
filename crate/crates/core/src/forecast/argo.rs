//! Autoregression with exogenous search predictors: 52 target lags plus
//! current exog columns, under an L1 penalty fit by coordinate descent.
//! The penalty is chosen by 5-fold blocked cross-validation inside the
//! training window.

use crate::error::{Error, Result};
use crate::stats::{mean, Matrix};

/// A fitted L1-penalized linear model on standardized features.
#[derive(Debug, Clone)]
pub struct LassoModel {
    pub intercept: f64,
    /// Coefficients on the original (destandardized) feature scale.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl LassoModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

struct Standardized {
    z: Vec<Vec<f64>>, // column-major standardized features
    y_centered: Vec<f64>,
    y_mean: f64,
    means: Vec<f64>,
    scales: Vec<f64>, // zero for dropped (constant) columns
}

fn standardize(x: &Matrix<f64>, y: &[f64]) -> Standardized {
    let n = x.rows();
    let p = x.cols();
    let mut z = Vec::with_capacity(p);
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
        let m = mean(&col);
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        means.push(m);
        scales.push(s);
        if s > 0.0 {
            z.push(col.iter().map(|v| (v - m) / s).collect());
        } else {
            z.push(vec![0.0; n]);
        }
    }
    let y_mean = mean(y);
    let y_centered = y.iter().map(|v| v - y_mean).collect();
    Standardized {
        z,
        y_centered,
        y_mean,
        means,
        scales,
    }
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Coordinate descent on (1/2n) ||y - Z b||^2 + lambda ||b||_1 with
/// standardized columns (unit second moment), warm-started from `beta`.
fn coordinate_descent(std: &Standardized, lambda: f64, beta: &mut [f64], residual: &mut [f64]) {
    let n = std.y_centered.len() as f64;
    let tol = 1e-7;
    for _ in 0..1000 {
        let mut max_change: f64 = 0.0;
        for j in 0..beta.len() {
            if std.scales[j] == 0.0 {
                continue;
            }
            let zj = &std.z[j];
            let old = beta[j];
            let rho = zj
                .iter()
                .zip(residual.iter())
                .map(|(z, r)| z * r)
                .sum::<f64>()
                / n
                + old;
            let new = soft_threshold(rho, lambda);
            if new != old {
                let delta = new - old;
                for (r, z) in residual.iter_mut().zip(zj) {
                    *r -= delta * z;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
}

/// Fits the lasso at a single penalty value.
pub fn lasso_fit(x: &Matrix<f64>, y: &[f64], lambda: f64) -> Result<LassoModel> {
    if x.rows() != y.len() || x.rows() == 0 {
        return Err(Error::input("lasso: shape mismatch"));
    }
    let std = standardize(x, y);
    let mut beta = vec![0.0; x.cols()];
    let mut residual = std.y_centered.clone();
    coordinate_descent(&std, lambda, &mut beta, &mut residual);
    Ok(destandardize(&std, &beta, lambda))
}

fn destandardize(std: &Standardized, beta: &[f64], lambda: f64) -> LassoModel {
    let mut coefficients = Vec::with_capacity(beta.len());
    let mut intercept = std.y_mean;
    for j in 0..beta.len() {
        if std.scales[j] > 0.0 {
            let b = beta[j] / std.scales[j];
            coefficients.push(b);
            intercept -= b * std.means[j];
        } else {
            coefficients.push(0.0);
        }
    }
    LassoModel {
        intercept,
        coefficients,
        lambda,
    }
}

fn lambda_path(std: &Standardized, points: usize) -> Vec<f64> {
    let n = std.y_centered.len() as f64;
    let mut lambda_max: f64 = 0.0;
    for (j, zj) in std.z.iter().enumerate() {
        if std.scales[j] == 0.0 {
            continue;
        }
        let dot = zj
            .iter()
            .zip(&std.y_centered)
            .map(|(z, r)| z * r)
            .sum::<f64>()
            .abs()
            / n;
        lambda_max = lambda_max.max(dot);
    }
    if lambda_max <= 0.0 {
        lambda_max = 1.0;
    }
    let lambda_min = lambda_max * 1e-3;
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (lambda_max.ln() + t * (lambda_min.ln() - lambda_max.ln())).exp()
        })
        .collect()
}

/// Lasso with the penalty chosen by contiguous-block cross-validation:
/// serial dependence stays within folds instead of leaking across random
/// splits. Ties in validation error go to the larger penalty.
pub fn lasso_cv(x: &Matrix<f64>, y: &[f64], folds: usize, path_points: usize) -> Result<LassoModel> {
    let n = x.rows();
    if n != y.len() || n < folds * 2 {
        return Err(Error::input("lasso cv: too few rows"));
    }
    let full_std = standardize(x, y);
    let path = lambda_path(&full_std, path_points);

    let bounds: Vec<(usize, usize)> = (0..folds)
        .map(|f| (f * n / folds, (f + 1) * n / folds))
        .collect();

    let mut cv_err = vec![0.0; path.len()];
    for &(lo, hi) in &bounds {
        let train_rows: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
        let val_rows: Vec<usize> = (lo..hi).collect();
        let x_train =
            Matrix::from_rows(&train_rows.iter().map(|&i| x.row(i).to_vec()).collect::<Vec<_>>());
        let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
        let std = standardize(&x_train, &y_train);
        let mut beta = vec![0.0; x.cols()];
        let mut residual = std.y_centered.clone();
        for (k, &lambda) in path.iter().enumerate() {
            coordinate_descent(&std, lambda, &mut beta, &mut residual);
            let model = destandardize(&std, &beta, lambda);
            for &i in &val_rows {
                let err = y[i] - model.predict(x.row(i));
                cv_err[k] += err * err;
            }
        }
    }

    // Larger lambda wins ties: the path is descending, so keep first-best.
    let mut best_k = 0;
    for (k, e) in cv_err.iter().enumerate() {
        if *e < cv_err[best_k] {
            best_k = k;
        }
    }

    let mut beta = vec![0.0; x.cols()];
    let mut residual = full_std.y_centered.clone();
    for &lambda in path.iter().take(best_k + 1) {
        coordinate_descent(&full_std, lambda, &mut beta, &mut residual);
    }
    Ok(destandardize(&full_std, &beta, path[best_k]))
}

/// Builds the design for issue week `s`: 1..=lags target lags then the
/// exogenous row at `s`.
fn design_row(y: &[f64], x: Option<&Matrix<f64>>, s: usize, lags: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(lags + x.map_or(0, Matrix::cols));
    for l in 1..=lags {
        row.push(y[s - l]);
    }
    if let Some(x) = x {
        row.extend_from_slice(x.row(s));
    }
    row
}

/// Forecast of the target `h` weeks past the issue week.
///
/// `y_hist` holds the target through the week before the issue week; `x`
/// holds one exogenous row per week through the issue week itself (so
/// `x.rows() == y_hist.len() + 1`). Training pairs the design at issue
/// week `s` with the target at `s + h`, over the trailing `window` rows.
pub fn fit_argo(
    y_hist: &[f64],
    x: Option<&Matrix<f64>>,
    h: usize,
    lags: usize,
    window: usize,
) -> Result<f64> {
    let t_now = y_hist.len();
    if let Some(x) = x {
        if x.rows() != t_now + 1 {
            return Err(Error::input(format!(
                "exog must cover every week through the issue week: {} vs {}",
                x.rows(),
                t_now + 1
            )));
        }
    }
    if t_now < lags + h + 8 {
        return Err(Error::input("history too short to build target lags"));
    }
    let first_issue = lags;
    let last_issue = t_now - 1 - h;
    if last_issue < first_issue {
        return Err(Error::input("history too short to build training rows"));
    }
    let start = if last_issue + 1 - first_issue > window {
        last_issue + 1 - window
    } else {
        first_issue
    };
    let rows: Vec<Vec<f64>> = (start..=last_issue)
        .map(|s| design_row(y_hist, x, s, lags))
        .collect();
    let resp: Vec<f64> = (start..=last_issue).map(|s| y_hist[s + h]).collect();
    if crate::stats::is_constant(&resp) {
        return Err(Error::numerical("degenerate window: constant target"));
    }
    if rows.len() < 10 {
        return Err(Error::input("too few training rows in window"));
    }
    let design = Matrix::from_rows(&rows);
    let model = lasso_cv(&design, &resp, 5, 16)?;
    let query = design_row(y_hist, x, t_now, lags);
    let value = model.predict(&query);
    if !value.is_finite() {
        return Err(Error::numerical("non-finite forecast"));
    }
    Ok(value)
}

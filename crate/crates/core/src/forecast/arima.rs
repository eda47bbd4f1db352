//! Regression with ARMA(1,1) errors on a differenced target, estimated by
//! conditional sum of squares with Gauss-Newton steps.
//!
//! Target and exogenous predictors are differenced together at lag 1
//! (weekly) or lag 52 (seasonal), the usual transfer form; a drift constant
//! keeps an exactly linear target an exact fixed point of the weekly model.

use crate::error::{Error, Result};
use crate::stats::{Matrix, Ols};

/// Point forecast plus estimation diagnostics.
#[derive(Debug, Clone)]
pub struct ArimaForecast {
    pub value: f64,
    /// True when Gauss-Newton failed to converge and the model fell back to
    /// a pure regression with (phi, theta) = (0, 0).
    pub fallback: bool,
}

struct CssProblem {
    dy: Vec<f64>,
    /// Differenced exogenous rows aligned to `dy`.
    x: Vec<Vec<f64>>,
}

impl CssProblem {
    fn n(&self) -> usize {
        self.dy.len()
    }

    fn n_reg(&self) -> usize {
        1 + self.x.first().map_or(0, |r| r.len())
    }

    fn reg_value(&self, t: usize, beta: &[f64]) -> f64 {
        let mut v = beta[0];
        for (b, x) in beta[1..].iter().zip(&self.x[t]) {
            v += b * x;
        }
        v
    }

    /// Residual recursion: u_t = dy_t - reg_t, e_t = u_t - phi u_{t-1}
    /// - theta e_{t-1}, conditioning on zero initial values.
    fn residuals(&self, phi: f64, theta: f64, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut u = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n);
        for t in 0..n {
            let ut = self.dy[t] - self.reg_value(t, beta);
            let prev_u = if t == 0 { 0.0 } else { u[t - 1] };
            let prev_e = if t == 0 { 0.0 } else { e[t - 1] };
            e.push(ut - phi * prev_u - theta * prev_e);
            u.push(ut);
        }
        (u, e)
    }

    fn sse(&self, phi: f64, theta: f64, beta: &[f64]) -> f64 {
        let (_, e) = self.residuals(phi, theta, beta);
        e.iter().map(|v| v * v).sum()
    }

    /// Jacobian of the residual vector in (phi, theta, beta...).
    fn jacobian(&self, phi: f64, theta: f64, beta: &[f64]) -> Matrix<f64> {
        let n = self.n();
        let m = self.n_reg();
        let (u, e) = self.residuals(phi, theta, beta);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut prev = vec![0.0; 2 + m];
        for t in 0..n {
            let mut row = vec![0.0; 2 + m];
            let prev_u = if t == 0 { 0.0 } else { u[t - 1] };
            let prev_e = if t == 0 { 0.0 } else { e[t - 1] };
            row[0] = -prev_u - theta * prev[0];
            row[1] = -prev_e - theta * prev[1];
            for j in 0..m {
                let x_t = if j == 0 { 1.0 } else { self.x[t][j - 1] };
                let x_prev = if t == 0 {
                    0.0
                } else if j == 0 {
                    1.0
                } else {
                    self.x[t - 1][j - 1]
                };
                row[2 + j] = -x_t + phi * x_prev - theta * prev[2 + j];
            }
            prev = row.clone();
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    }
}

const MAX_ITER: usize = 50;
const CLAMP: f64 = 0.99;

fn css_fit(problem: &CssProblem) -> Result<(f64, f64, Vec<f64>, bool)> {
    // Regression start at OLS, ARMA start at zero.
    let rows: Vec<Vec<f64>> = (0..problem.n())
        .map(|t| {
            let mut r = vec![1.0];
            r.extend_from_slice(&problem.x[t]);
            r
        })
        .collect();
    let ols = Ols::fit(&Matrix::from_rows(&rows), &problem.dy)?;
    let ols_beta = ols.coefficients.clone();

    let mut phi = 0.0;
    let mut theta = 0.0;
    let mut beta = ols_beta.clone();
    let mut sse = problem.sse(phi, theta, &beta);
    let mut converged = false;

    let dy_scale: f64 = problem.dy.iter().map(|v| v * v).sum();
    for _ in 0..MAX_ITER {
        if sse <= 1e-12 * (1.0 + dy_scale) {
            // The regression already explains the data exactly.
            converged = true;
            break;
        }
        let (_, e) = problem.residuals(phi, theta, &beta);
        let jac = problem.jacobian(phi, theta, &beta);
        let neg_e: Vec<f64> = e.iter().map(|v| -v).collect();
        // Gauss-Newton step = least-squares solve of J delta = -e.
        let delta = match Ols::fit(&jac, &neg_e) {
            Ok(f) => f.coefficients,
            Err(_) => break,
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let cand_phi = (phi + scale * delta[0]).clamp(-CLAMP, CLAMP);
            let cand_theta = (theta + scale * delta[1]).clamp(-CLAMP, CLAMP);
            let cand_beta: Vec<f64> = beta
                .iter()
                .zip(&delta[2..])
                .map(|(b, d)| b + scale * d)
                .collect();
            let cand_sse = problem.sse(cand_phi, cand_theta, &cand_beta);
            if cand_sse.is_finite() && cand_sse < sse {
                let gain = sse - cand_sse;
                phi = cand_phi;
                theta = cand_theta;
                beta = cand_beta;
                sse = cand_sse;
                improved = true;
                if gain <= 1e-10 * (1.0 + sse) {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            // No ascent direction left at this scale: a local optimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    if converged {
        Ok((phi, theta, beta, false))
    } else {
        Ok((0.0, 0.0, ols_beta, true))
    }
}

/// Forecasts `h + 1` steps past the last observed target value.
///
/// `y_window` holds the trailing target values (most recent last);
/// `x_window` holds one exogenous row per target row plus a final row for
/// the issue week. Exogenous values beyond the issue week hold at that row.
/// `seasonal_lag` is 1 for the weekly model and 52 for the seasonal one.
pub fn forecast_arima(
    y_window: &[f64],
    x_window: &Matrix<f64>,
    h: usize,
    seasonal_lag: usize,
) -> Result<ArimaForecast> {
    let w = y_window.len();
    if seasonal_lag == 0 || w < seasonal_lag + 20 {
        return Err(Error::input(format!(
            "window of {w} too short for differencing lag {seasonal_lag}"
        )));
    }
    if x_window.rows() != w + 1 {
        return Err(Error::input(format!(
            "exog window must have {} rows, found {}",
            w + 1,
            x_window.rows()
        )));
    }
    if h > 3 {
        return Err(Error::input("horizon must lie in 0..=3"));
    }

    let diff_row = |t: usize| -> Vec<f64> {
        x_window
            .row(t)
            .iter()
            .zip(x_window.row(t - seasonal_lag))
            .map(|(a, b)| a - b)
            .collect()
    };
    let dy: Vec<f64> = (seasonal_lag..w)
        .map(|t| y_window[t] - y_window[t - seasonal_lag])
        .collect();
    let x: Vec<Vec<f64>> = (seasonal_lag..w).map(diff_row).collect();
    let problem = CssProblem { dy, x };
    let (phi, theta, beta, fallback) = css_fit(&problem)?;
    let (u, e) = problem.residuals(phi, theta, &beta);

    // Iterate the one-step recursion h+1 times. The issue week (row w of
    // the exog window) is the last observed exog value; later steps hold
    // it, so weekly exog differences vanish beyond step one while seasonal
    // differences keep their in-window base.
    let mut u_prev = *u.last().unwrap();
    let mut e_prev = *e.last().unwrap();
    let mut d_forecasts = Vec::with_capacity(h + 1);
    for s in 1..=h + 1 {
        let week = w - 1 + s;
        let dx: Vec<f64> = if seasonal_lag == 1 {
            if s == 1 {
                diff_row(w)
            } else {
                vec![0.0; x_window.cols()]
            }
        } else {
            x_window
                .row(w)
                .iter()
                .zip(x_window.row(week - seasonal_lag))
                .map(|(a, b)| a - b)
                .collect()
        };
        let mut reg = beta[0];
        for (b, x) in beta[1..].iter().zip(&dx) {
            reg += b * x;
        }
        let u_next = phi * u_prev + theta * e_prev;
        d_forecasts.push(reg + u_next);
        u_prev = u_next;
        e_prev = 0.0;
    }

    // Un-difference back to the level scale.
    let value = if seasonal_lag == 1 {
        y_window[w - 1] + d_forecasts.iter().sum::<f64>()
    } else {
        // Forecast week w-1 + (h+1); its seasonal base is inside the window
        // because h + 1 < seasonal_lag.
        let week = w + h;
        d_forecasts[h] + y_window[week - seasonal_lag]
    };
    if !value.is_finite() {
        return Err(Error::numerical("non-finite forecast"));
    }
    Ok(ArimaForecast { value, fallback })
}

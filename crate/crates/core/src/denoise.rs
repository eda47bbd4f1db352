//! Look-ahead-free denoising with rolling smoothing splines.
//!
//! Splines are natural cubics with knots at every observation, fitted by
//! the Reinsch banded algorithm on unit-spaced weekly indices. The denoised
//! value at week t comes from a window ending at t, so no future
//! observation can influence it.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats::median;

/// A fitted natural cubic smoothing spline on unit-spaced abscissae.
#[derive(Debug, Clone)]
pub struct SplineFit<F> {
    pub fitted_values: Vec<F>,
    pub lambda: F,
    /// Second derivatives at every knot; zero at both ends (natural).
    pub second_derivatives: Vec<F>,
}

/// Per-series denoising decision.
#[derive(Debug, Clone)]
pub struct DenoiseModel {
    pub keyword: String,
    pub lambda_star: f64,
    pub train_rmse: f64,
    pub is_noisy: bool,
}

/// Minimizes sum (y_t - f_t)^2 + lambda * integral (f'')^2 over natural
/// cubic splines, via the Reinsch banded system
/// (R + lambda Q^T Q) gamma = Q^T y, f = y - lambda Q gamma.
pub fn fit_smoothing_spline<F: Real>(y: &[F], lambda: F) -> Result<SplineFit<F>> {
    let n = y.len();
    if n < 4 {
        return Err(Error::numerical("spline fit needs at least 4 observations"));
    }
    if lambda <= F::zero() {
        return Err(Error::numerical("lambda must be positive"));
    }
    let m = n - 2;

    // Bands of A = R + lambda Q^T Q for unit spacing:
    // diag 2/3 + 6 lambda, first off 1/6 - 4 lambda, second off lambda.
    let a0 = F::of(2.0 / 3.0) + F::of(6.0) * lambda;
    let a1 = F::of(1.0 / 6.0) - F::of(4.0) * lambda;
    let a2 = lambda;

    // Right-hand side: second differences of y.
    let mut b = Vec::with_capacity(m);
    for j in 0..m {
        b.push(y[j] - F::of(2.0) * y[j + 1] + y[j + 2]);
    }

    // LDL^T factorization of the pentadiagonal band.
    let mut d = vec![F::zero(); m];
    let mut l1 = vec![F::zero(); m.saturating_sub(1)];
    let mut l2 = vec![F::zero(); m.saturating_sub(2)];
    for i in 0..m {
        let mut di = a0;
        if i >= 1 {
            di = di - l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di = di - l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        if di <= F::zero() {
            return Err(Error::numerical("spline system lost positive definiteness"));
        }
        d[i] = di;
        if i + 1 < m {
            let mut v = a1;
            if i >= 1 {
                v = v - l1[i - 1] * l2[i - 1] * d[i - 1];
            }
            l1[i] = v / di;
        }
        if i + 2 < m {
            l2[i] = a2 / di;
        }
    }

    // Solve L z = b, w = z / d, L^T gamma = w.
    let mut gamma = b;
    for i in 0..m {
        if i >= 1 {
            let z = gamma[i - 1];
            gamma[i] = gamma[i] - l1[i - 1] * z;
        }
        if i >= 2 {
            let z = gamma[i - 2];
            gamma[i] = gamma[i] - l2[i - 2] * z;
        }
    }
    for i in 0..m {
        gamma[i] = gamma[i] / d[i];
    }
    for i in (0..m).rev() {
        if i + 1 < m {
            let z = gamma[i + 1];
            gamma[i] = gamma[i] - l1[i] * z;
        }
        if i + 2 < m {
            let z = gamma[i + 2];
            gamma[i] = gamma[i] - l2[i] * z;
        }
    }

    // f = y - lambda Q gamma.
    let q_gamma = |i: usize| -> F {
        let mut v = F::zero();
        if i < m {
            v += gamma[i];
        }
        if i >= 1 && i - 1 < m {
            v -= F::of(2.0) * gamma[i - 1];
        }
        if i >= 2 && i - 2 < m {
            v += gamma[i - 2];
        }
        v
    };
    let fitted_values: Vec<F> = (0..n).map(|i| y[i] - lambda * q_gamma(i)).collect();

    let mut second_derivatives = vec![F::zero(); n];
    second_derivatives[1..(m + 1)].copy_from_slice(&gamma);

    Ok(SplineFit {
        fitted_values,
        lambda,
        second_derivatives,
    })
}

/// Value one step beyond the last knot. Natural splines are linear outside
/// the boundary, so this is the endpoint value plus the endpoint slope.
pub fn one_step_predict<F: Real>(fit: &SplineFit<F>) -> F {
    let n = fit.fitted_values.len();
    let f_end = fit.fitted_values[n - 1];
    let f_prev = fit.fitted_values[n - 2];
    let m_prev = fit.second_derivatives[n - 2];
    let slope = f_end - f_prev + m_prev / F::of(6.0);
    f_end + slope
}

/// Log-spaced lambda grid.
pub fn lambda_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    assert!(points >= 1 && min > 0.0 && max >= min);
    if points == 1 {
        return vec![min];
    }
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (min.ln() + t * (max.ln() - min.ln())).exp()
        })
        .collect()
}

/// One-step-ahead RMSE of rolling spline fits with the given lambda.
pub fn rolling_one_step_rmse<F: Real>(y: &[F], window: usize, lambda: F) -> Result<F> {
    if y.len() < window + 2 {
        return Err(Error::input(format!(
            "series of {} too short for window {window} + 2",
            y.len()
        )));
    }
    let mut sum_sq = F::zero();
    let mut count = 0usize;
    for start in 0..=(y.len() - window - 1) {
        let fit = fit_smoothing_spline(&y[start..start + window], lambda)?;
        let pred = one_step_predict(&fit);
        let err = pred - y[start + window];
        sum_sq += err * err;
        count += 1;
    }
    Ok((sum_sq / F::of_usize(count)).sqrt())
}

/// Grid search for the lambda minimizing rolling one-step-ahead RMSE.
/// Ties (within float noise) go to the smaller lambda, favoring less
/// smoothing; the grid is scanned in ascending order.
pub fn grid_search_lambda<F: Real>(
    y_train: &[F],
    window: usize,
    grid: &[F],
) -> Result<(F, F)> {
    if grid.is_empty() {
        return Err(Error::config("lambda_grid", "empty grid"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<(F, F)> = None;
    for &lambda in &sorted {
        let rmse = rolling_one_step_rmse(y_train, window, lambda)?;
        match &best {
            None => best = Some((lambda, rmse)),
            Some((_, best_rmse)) => {
                let tie_eps = F::of(1e-10) * (F::one() + *best_rmse);
                if rmse < *best_rmse - tie_eps {
                    best = Some((lambda, rmse));
                }
            }
        }
    }
    Ok(best.unwrap())
}

/// Rolling-window denoising: the output at t is the last fitted value of a
/// spline on the window ending at t. The first `window - 1` points pass
/// through raw. No observation after t is ever read.
pub fn denoise_series(
    y: &[f64],
    model: &DenoiseModel,
    window: usize,
    train_len: usize,
) -> Result<Vec<f64>> {
    if !model.is_noisy {
        return Err(Error::input(format!(
            "series `{}` is not gated noisy; callers pass clean series through",
            model.keyword
        )));
    }
    if window > y.len() {
        return Err(Error::input("window longer than series"));
    }
    if train_len >= y.len() {
        return Err(Error::input("train_len must leave room for test rows"));
    }
    let mut out = y[..window - 1].to_vec();
    for t in (window - 1)..y.len() {
        let fit = fit_smoothing_spline(&y[t + 1 - window..=t], model.lambda_star)?;
        out.push(*fit.fitted_values.last().unwrap());
    }
    Ok(out)
}

/// Trailing moving average with the same warm-up passthrough semantics,
/// used as a comparison filter.
pub fn moving_average(y: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > y.len() {
        return Err(Error::input("bad moving-average window"));
    }
    let mut out = y[..window - 1].to_vec();
    for t in (window - 1)..y.len() {
        let mean = y[t + 1 - window..=t].iter().sum::<f64>() / window as f64;
        out.push(mean);
    }
    Ok(out)
}

/// Flags models whose training RMSE exceeds the panel median (strictly).
pub fn gate_noisy(models: &mut [DenoiseModel]) -> Result<()> {
    if models.is_empty() {
        return Err(Error::input("gate_noisy needs at least one model"));
    }
    let rmses: Vec<f64> = models.iter().map(|m| m.train_rmse).collect();
    let med = median(&rmses);
    for m in models.iter_mut() {
        m.is_noisy = m.train_rmse > med;
    }
    Ok(())
}

/// Writes `denoise_report.csv`: `keyword,lambda_star,train_rmse,is_noisy`.
pub fn write_denoise_report<W: Write>(models: &[DenoiseModel], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["keyword", "lambda_star", "train_rmse", "is_noisy"])?;
    for m in models {
        w.write_record([
            m.keyword.clone(),
            format!("{}", m.lambda_star),
            format!("{}", m.train_rmse),
            m.is_noisy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

//! Trend classification and removal: a unit-root test cascade over
//! constant / linear / quadratic specifications, OLS detrending for
//! deterministic trends and first differencing for stochastic ones.
//! Trend parameters are estimated on training rows only.

use std::io::Write;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{variance, Matrix, Ols};

/// Deterministic terms included in the unit-root regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfVariant {
    Constant,
    Linear,
    Quadratic,
}

/// Outcome of one unit-root test.
#[derive(Debug, Clone)]
pub struct AdfResult {
    pub variant: AdfVariant,
    pub gamma_hat: f64,
    pub t_stat: f64,
    pub critical_value_5pct: f64,
    /// Left-tailed: reject iff t_stat < critical value.
    pub reject: bool,
    pub lag_order: usize,
}

/// What to do about a series' trend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendAction {
    None,
    Linear,
    Quadratic,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendCoefficients {
    pub mu: f64,
    pub alpha: f64,
    pub beta: Option<f64>,
}

/// Per-series trend decision with training-row fit quality.
#[derive(Debug, Clone)]
pub struct TrendDecision {
    pub keyword: String,
    pub action: TrendAction,
    /// Present iff the action is linear or quadratic.
    pub coefficients: Option<TrendCoefficients>,
    /// R-squared of the decided-order deterministic trend on training rows
    /// (linear order is used for reporting when the action is none or
    /// difference).
    pub train_r2: f64,
    /// t-statistic of the decisive unit-root test.
    pub t_stat: f64,
}

/// Design matrix and response of the unit-root regression
/// `dy_t ~ deterministics(t) + y_{t-1} + dy_{t-1} ... dy_{t-k}`
/// over y-indices `t` in `[start, n)`.
fn adf_design(
    y: &[f64],
    variant: AdfVariant,
    lags: usize,
    start: usize,
) -> (Matrix<f64>, Vec<f64>, usize) {
    let n = y.len();
    debug_assert!(start >= lags + 1);
    let det_cols = match variant {
        AdfVariant::Constant => 1,
        AdfVariant::Linear => 2,
        AdfVariant::Quadratic => 3,
    };
    let p = det_cols + 1 + lags;
    let mut rows = Vec::with_capacity(n - start);
    let mut resp = Vec::with_capacity(n - start);
    for t in start..n {
        let mut row = Vec::with_capacity(p);
        row.push(1.0);
        if det_cols >= 2 {
            row.push(t as f64);
        }
        if det_cols >= 3 {
            row.push((t as f64) * (t as f64));
        }
        row.push(y[t - 1]);
        for i in 1..=lags {
            row.push(y[t - i] - y[t - i - 1]);
        }
        rows.push(row);
        resp.push(y[t] - y[t - 1]);
    }
    (Matrix::from_rows(&rows), resp, det_cols)
}

fn gamma_t_stat(y: &[f64], variant: AdfVariant, lags: usize, start: usize) -> Result<(f64, f64, usize)> {
    let (x, resp, det_cols) = adf_design(y, variant, lags, start);
    if x.rows() <= x.cols() {
        return Err(Error::numerical(format!(
            "series too short for {lags} lags in unit-root regression"
        )));
    }
    let fit = Ols::fit(&x, &resp)?;
    let gamma_idx = det_cols;
    Ok((fit.coefficients[gamma_idx], fit.t_stat(gamma_idx), fit.n_obs()))
}

/// Schwert upper bound for the lagged-difference count.
pub fn max_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// AIC over a common estimation sample (all candidates see the same rows),
/// then a final fit using every row the chosen lag allows.
fn select_lags(y: &[f64], variant: AdfVariant) -> Result<usize> {
    let n = y.len();
    let kmax = max_lags(n);
    let start = kmax + 1;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..=kmax {
        let (x, resp, _) = adf_design(y, variant, k, start);
        if x.rows() <= x.cols() {
            break;
        }
        let fit = match Ols::fit(&x, &resp) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let n_obs = fit.n_obs() as f64;
        let aic = n_obs * (fit.ssr / n_obs).max(1e-300).ln() + 2.0 * fit.n_params() as f64;
        if best.map_or(true, |(b, _)| aic < b) {
            best = Some((aic, k));
        }
    }
    best.map(|(_, k)| k)
        .ok_or_else(|| Error::numerical("no admissible lag order"))
}

/// MacKinnon response-surface 5% critical values, cv = b0 + b1/T + b2/T^2
/// + b3/T^3 (MacKinnon 2010, tau with constant / constant+trend).
fn mackinnon_cv_5pct(variant: AdfVariant, n_obs: usize) -> f64 {
    let t = n_obs as f64;
    let b = match variant {
        AdfVariant::Constant => [-2.86154, -2.8903, -4.234, -40.04],
        AdfVariant::Linear => [-3.41049, -4.3904, -9.036, -45.374],
        AdfVariant::Quadratic => unreachable!("quadratic uses the simulated table"),
    };
    b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t)
}

/// One row of the simulated quadratic-variant critical value table.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticCvRow {
    pub n: usize,
    pub cv_1pct: f64,
    pub cv_5pct: f64,
    pub cv_10pct: f64,
}

const QUADRATIC_CV_CSV: &str = include_str!("../data/adf_quadratic_critical_values.csv");

fn quadratic_cv_table() -> &'static Vec<QuadraticCvRow> {
    static TABLE: OnceLock<Vec<QuadraticCvRow>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows = Vec::new();
        for line in QUADRATIC_CV_CSV.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('n') {
                continue;
            }
            let mut parts = line.split(',');
            let n: usize = parts.next().unwrap().trim().parse().expect("table n");
            let cv_1pct: f64 = parts.next().unwrap().trim().parse().expect("table cv1");
            let cv_5pct: f64 = parts.next().unwrap().trim().parse().expect("table cv5");
            let cv_10pct: f64 = parts.next().unwrap().trim().parse().expect("table cv10");
            rows.push(QuadraticCvRow {
                n,
                cv_1pct,
                cv_5pct,
                cv_10pct,
            });
        }
        assert!(rows.len() >= 3, "quadratic critical value table incomplete");
        rows
    })
}

/// Quadratic-variant 5% critical value: a response surface in 1/n through the
/// three simulated sizes, clamped below the smallest tabulated size.
fn quadratic_cv_5pct(n_obs: usize) -> f64 {
    let table = quadratic_cv_table();
    let (x0, y0) = (1.0 / table[0].n as f64, table[0].cv_5pct);
    let (x1, y1) = (1.0 / table[1].n as f64, table[1].cv_5pct);
    let (x2, y2) = (1.0 / table[2].n as f64, table[2].cv_5pct);
    // Exact quadratic through three points (Lagrange form).
    let x_min = x0.min(x1).min(x2);
    let x_max = x0.max(x1).max(x2);
    let x = (1.0 / n_obs as f64).clamp(x_min.min(0.0), x_max);
    y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
}

/// Unit-root test of the given variant at the 5% level, with the
/// lagged-difference count chosen by AIC under the Schwert bound.
pub fn adf_test(y: &[f64], variant: AdfVariant, alpha: f64) -> Result<AdfResult> {
    if y.len() < 30 {
        return Err(Error::input("unit-root test needs at least 30 observations"));
    }
    if variance(y) <= 0.0 {
        return Err(Error::numerical("unit-root test on constant series"));
    }
    if (alpha - 0.05).abs() > 1e-12 {
        return Err(Error::config("alpha", "only the 5% level is tabulated"));
    }
    let lags = select_lags(y, variant)?;
    let (gamma_hat, t_stat, n_obs) = gamma_t_stat(y, variant, lags, lags + 1)?;
    let critical_value_5pct = match variant {
        AdfVariant::Quadratic => quadratic_cv_5pct(n_obs),
        _ => mackinnon_cv_5pct(variant, n_obs),
    };
    Ok(AdfResult {
        variant,
        gamma_hat,
        t_stat,
        critical_value_5pct,
        reject: t_stat < critical_value_5pct,
        lag_order: lags,
    })
}

/// Deterministic trend fit on training rows; `order` 1 = linear, 2 = quadratic.
fn fit_trend(y_train: &[f64], order: usize) -> Result<TrendCoefficients> {
    let rows: Vec<Vec<f64>> = (0..y_train.len())
        .map(|t| {
            let mut r = vec![1.0, t as f64];
            if order >= 2 {
                r.push((t as f64) * (t as f64));
            }
            r
        })
        .collect();
    let fit = Ols::fit(&Matrix::from_rows(&rows), y_train)?;
    Ok(TrendCoefficients {
        mu: fit.coefficients[0],
        alpha: fit.coefficients[1],
        beta: fit.coefficients.get(2).copied(),
    })
}

/// Evaluates a fitted trend at global week indices `0..n`.
pub fn trend_values(coefficients: &TrendCoefficients, n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let tf = t as f64;
            coefficients.mu
                + coefficients.alpha * tf
                + coefficients.beta.unwrap_or(0.0) * tf * tf
        })
        .collect()
}

/// Coefficient of determination of `fitted_trend` against `y`, clamped to
/// [0, 1].
pub fn trend_r2(y: &[f64], fitted_trend: &[f64]) -> Result<f64> {
    if y.len() != fitted_trend.len() {
        return Err(Error::input("trend_r2: length mismatch"));
    }
    let sst = variance(y) * (y.len() as f64 - 1.0);
    if sst <= 0.0 {
        return Err(Error::numerical("trend_r2: zero-variance series"));
    }
    let sse: f64 = y
        .iter()
        .zip(fitted_trend)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((1.0 - sse / sst).clamp(0.0, 1.0))
}

/// Test cascade: stationary around a constant -> none; around a linear
/// trend -> linear; around a quadratic trend -> quadratic; otherwise the
/// trend is stochastic and the series needs differencing.
pub fn classify_trend(y_train: &[f64], keyword: &str) -> Result<TrendDecision> {
    let constant = adf_test(y_train, AdfVariant::Constant, 0.05)?;
    let (action, t_stat) = if constant.reject {
        (TrendAction::None, constant.t_stat)
    } else {
        let linear = adf_test(y_train, AdfVariant::Linear, 0.05)?;
        if linear.reject {
            (TrendAction::Linear, linear.t_stat)
        } else {
            let quadratic = adf_test(y_train, AdfVariant::Quadratic, 0.05)?;
            if quadratic.reject {
                (TrendAction::Quadratic, quadratic.t_stat)
            } else {
                (TrendAction::Difference, quadratic.t_stat)
            }
        }
    };
    let order = match action {
        TrendAction::Quadratic => 2,
        _ => 1,
    };
    let report_fit = fit_trend(y_train, order)?;
    let train_r2 = trend_r2(y_train, &trend_values(&report_fit, y_train.len()))?;
    let coefficients = match action {
        TrendAction::Linear | TrendAction::Quadratic => Some(report_fit),
        _ => None,
    };
    Ok(TrendDecision {
        keyword: keyword.to_string(),
        action,
        coefficients,
        train_r2,
        t_stat,
    })
}

/// Applies a trend decision to the whole series. Deterministic trends are
/// subtracted at the global week index; differencing drops the first
/// element.
pub fn apply_detrend(y_full: &[f64], decision: &TrendDecision, train_len: usize) -> Result<Vec<f64>> {
    if train_len < 10 {
        return Err(Error::input("detrending needs at least 10 training rows"));
    }
    match decision.action {
        TrendAction::None => Ok(y_full.to_vec()),
        TrendAction::Linear | TrendAction::Quadratic => {
            let c = decision
                .coefficients
                .as_ref()
                .ok_or_else(|| Error::input("missing trend coefficients"))?;
            let trend = trend_values(c, y_full.len());
            Ok(y_full.iter().zip(&trend).map(|(a, b)| a - b).collect())
        }
        TrendAction::Difference => Ok(y_full.windows(2).map(|w| w[1] - w[0]).collect()),
    }
}

/// Generates the quadratic-variant critical value table by Monte Carlo:
/// `replications` pure Gaussian random walks per size, Dickey-Fuller
/// regression with quadratic deterministics and no lagged differences.
/// Replications use derived per-replication streams, so the table is
/// identical however the loop is scheduled.
pub fn generate_quadratic_cv_table(
    seed: u64,
    replications: usize,
    sizes: &[usize],
) -> Result<Vec<QuadraticCvRow>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut stats = Vec::with_capacity(replications);
        for rep in 0..replications {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(0x9E3779B97F4A7C15)
                    .wrapping_add((n as u64) << 32)
                    .wrapping_add(rep as u64),
            );
            let mut y = Vec::with_capacity(n);
            let mut level = 0.0;
            for _ in 0..n {
                level += normal.sample(&mut rng);
                y.push(level);
            }
            let (_, t_stat, _) = gamma_t_stat(&y, AdfVariant::Quadratic, 0, 1)?;
            stats.push(t_stat);
        }
        rows.push(QuadraticCvRow {
            n,
            cv_1pct: crate::stats::quantile(&stats, 0.01),
            cv_5pct: crate::stats::quantile(&stats, 0.05),
            cv_10pct: crate::stats::quantile(&stats, 0.10),
        });
    }
    Ok(rows)
}

/// Writes `trend_report.csv`:
/// `keyword,action,mu,alpha,beta,t_stat,r2_before,r2_after`.
pub fn write_trend_report<W: Write>(
    decisions: &[TrendDecision],
    r2_after: &[f64],
    out: W,
) -> Result<()> {
    if decisions.len() != r2_after.len() {
        return Err(Error::input("trend report: length mismatch"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "keyword", "action", "mu", "alpha", "beta", "t_stat", "r2_before", "r2_after",
    ])?;
    for (d, after) in decisions.iter().zip(r2_after) {
        let action = match d.action {
            TrendAction::None => "none",
            TrendAction::Linear => "linear",
            TrendAction::Quadratic => "quadratic",
            TrendAction::Difference => "difference",
        };
        let (mu, alpha, beta) = match &d.coefficients {
            Some(c) => (
                format!("{}", c.mu),
                format!("{}", c.alpha),
                c.beta.map(|b| format!("{b}")).unwrap_or_default(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            d.keyword.clone(),
            action.to_string(),
            mu,
            alpha,
            beta,
            format!("{}", d.t_stat),
            format!("{}", d.train_r2),
            format!("{after}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

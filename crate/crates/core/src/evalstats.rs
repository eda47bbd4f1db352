//! Evaluation statistics: forecast error summaries, paired significance
//! tests, replicate signal-to-noise comparison and the rolling
//! loss-differential path.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::forecast::ForecastTrace;
use crate::ingest::ReplicateStore;
use crate::stats::{median, quantile};

/// Mean squared error.
pub fn mse(y_true: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y_true.is_empty() || y_true.len() != y_hat.len() {
        return Err(Error::input("mse: length mismatch or empty input"));
    }
    let sum: f64 = y_true
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / y_true.len() as f64)
}

/// Ratio of a model's MSE to its no-exogenous baseline. Below 1 means the
/// exogenous data helped.
pub fn relative_efficiency(mse_model: f64, mse_baseline: f64) -> Result<f64> {
    if mse_baseline <= 0.0 {
        return Err(Error::numerical("relative efficiency: zero baseline MSE"));
    }
    Ok(mse_model / mse_baseline)
}

/// Which p-value path the signed-rank test takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact for n <= 25, approximate beyond.
    Auto,
    Exact,
    Approximate,
}

/// Mid-ranks of |d|, doubled so ties stay integral.
fn doubled_ranks(d: &[f64]) -> Vec<u64> {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].abs().partial_cmp(&d[j].abs()).unwrap());
    let mut doubled = vec![0u64; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && d[order[end]].abs() == d[order[pos]].abs() {
            end += 1;
        }
        // Positions pos+1 ..= end (1-based); doubled mid-rank = lo + hi.
        let lo = (pos + 1) as u64;
        let hi = end as u64;
        for &idx in &order[pos..end] {
            doubled[idx] = lo + hi;
        }
        pos = end;
    }
    doubled
}

/// One-sided signed-rank test of the null "median difference is zero"
/// against "the median is less than zero". Zero differences are dropped,
/// ties are mid-ranked. The exact path enumerates the null distribution;
/// the approximate path uses a continuity- and kurtosis-corrected normal.
pub fn wilcoxon_signed_rank(d: &[f64], method: WilcoxonMethod) -> Result<f64> {
    let nonzero: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    if d.iter().all(|v| *v == 0.0) && !d.is_empty() {
        return Err(Error::numerical("signed-rank test: all differences zero"));
    }
    let n = nonzero.len();
    if n < 5 {
        return Err(Error::input("signed-rank test needs at least 5 nonzero differences"));
    }
    let doubled = doubled_ranks(&nonzero);
    let w2_plus: u64 = nonzero
        .iter()
        .zip(&doubled)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| *r)
        .sum();

    let use_exact = match method {
        WilcoxonMethod::Auto => n <= 25,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Approximate => false,
    };
    if use_exact {
        if n > 25 {
            return Err(Error::input("exact path supported for n <= 25"));
        }
        // Subset-sum counts over doubled ranks.
        let total: u64 = doubled.iter().sum();
        let mut dp = vec![0u64; total as usize + 1];
        dp[0] = 1;
        for &r in &doubled {
            for s in (r as usize..dp.len()).rev() {
                dp[s] += dp[s - r as usize];
            }
        }
        let favorable: u64 = dp[..=w2_plus as usize].iter().sum();
        Ok(favorable as f64 / 2f64.powi(n as i32))
    } else {
        if w2_plus >= doubled.iter().sum() {
            // At the top of the support the distribution function is 1.
            return Ok(1.0);
        }
        let w_plus = w2_plus as f64 / 2.0;
        let sum_r2: f64 = doubled.iter().map(|&r| (r as f64 / 2.0).powi(2)).sum();
        let sum_r4: f64 = doubled.iter().map(|&r| (r as f64 / 2.0).powi(4)).sum();
        let mean = doubled.iter().sum::<u64>() as f64 / 4.0;
        let sigma = (sum_r2 / 4.0).sqrt();
        if sigma <= 0.0 {
            return Err(Error::numerical("signed-rank test: degenerate variance"));
        }
        let z = (w_plus - mean + 0.5) / sigma;
        let normal = Normal::new(0.0, 1.0).unwrap();
        // Edgeworth kurtosis term keeps the approximation within 0.01 of
        // the exact distribution even at small n.
        let gamma2 = -2.0 * sum_r4 / (sum_r2 * sum_r2);
        let p = normal.cdf(z) - normal.pdf(z) * (gamma2 / 24.0) * (z * z * z - 3.0 * z);
        Ok(p.clamp(0.0, 1.0))
    }
}

/// Per-time-step log ratio of denoised to raw signal-to-noise, where SNR at
/// each week is the across-replicate mean over standard deviation. Weeks
/// with a degenerate deviation or non-positive mean in either store are
/// reported missing rather than infinite.
pub fn snr_log_ratio(
    raw_store: &ReplicateStore,
    denoised_store: &ReplicateStore,
    keyword: &str,
) -> Result<Vec<Option<f64>>> {
    const EPS: f64 = 1e-9;
    if raw_store.dates() != denoised_store.dates() {
        return Err(Error::input("stores do not share a week grid"));
    }
    if raw_store.n_replicates() < 3 || denoised_store.n_replicates() < 3 {
        return Err(Error::input("signal-to-noise ratio needs at least 3 replicates"));
    }
    let raw = raw_store.replicate_rows(keyword)?;
    let den = denoised_store.replicate_rows(keyword)?;
    let weeks = raw_store.dates().len();
    let mut out = Vec::with_capacity(weeks);
    for t in 0..weeks {
        let raw_col: Vec<f64> = raw.iter().map(|r| r[t]).collect();
        let den_col: Vec<f64> = den.iter().map(|r| r[t]).collect();
        let (mu_r, sd_r) = (crate::stats::mean(&raw_col), crate::stats::std_dev(&raw_col));
        let (mu_d, sd_d) = (crate::stats::mean(&den_col), crate::stats::std_dev(&den_col));
        if sd_r < EPS || sd_d < EPS || mu_r <= 0.0 || mu_d <= 0.0 {
            out.push(None);
        } else {
            out.push(Some(((mu_d / sd_d) / (mu_r / sd_r)).ln()));
        }
    }
    Ok(out)
}

/// Rolling standardized mean loss differential: at every window position, a
/// t-statistic with a Bartlett-kernel long-run variance (truncation
/// floor(window^(1/3))). A small variance floor keeps degenerate windows
/// finite.
pub fn fluctuation_statistic(loss_a: &[f64], loss_b: &[f64], window: usize) -> Result<Vec<f64>> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::input("loss series differ in length"));
    }
    if window < 2 || loss_a.len() < window {
        return Err(Error::input("window longer than the loss series"));
    }
    const VAR_FLOOR: f64 = 1e-12;
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let truncation = (window as f64).powf(1.0 / 3.0).floor() as usize;
    let mut path = Vec::with_capacity(d.len() - window + 1);
    for start in 0..=(d.len() - window) {
        let seg = &d[start..start + window];
        let mean = crate::stats::mean(seg);
        let w = window as f64;
        let acov = |k: usize| -> f64 {
            seg.iter()
                .zip(&seg[k..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / w
        };
        let mut long_run = acov(0);
        for k in 1..=truncation.min(window - 1) {
            let weight = 1.0 - k as f64 / (truncation + 1) as f64;
            long_run += 2.0 * weight * acov(k);
        }
        let var_mean = (long_run / w).max(VAR_FLOOR / w);
        path.push(mean / var_mean.sqrt());
    }
    Ok(path)
}

/// One backtest cell with its error summary.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub location: String,
    pub horizon: usize,
    pub model: String,
    pub exog_variant: String,
    pub mse: f64,
    /// MSE over the same model's no-exog baseline, when one exists.
    pub re: Option<f64>,
    pub n_points: usize,
    pub n_failed: usize,
}

/// Per-trace MSE plus relative efficiency against the matching baseline
/// trace (same location, model and horizon, variant "none").
pub fn summarize_traces(traces: &[ForecastTrace]) -> Result<Vec<ReportRow>> {
    let mut baselines: BTreeMap<(String, String, usize), f64> = BTreeMap::new();
    for t in traces {
        if t.exog_variant == "none" {
            let (y_true, y_hat) = t.paired();
            if !y_true.is_empty() {
                baselines.insert(
                    (t.location.clone(), t.model_id.clone(), t.horizon),
                    mse(&y_true, &y_hat)?,
                );
            }
        }
    }
    let mut rows = Vec::with_capacity(traces.len());
    for t in traces {
        let (y_true, y_hat) = t.paired();
        if y_true.is_empty() {
            continue;
        }
        let cell_mse = mse(&y_true, &y_hat)?;
        let re = if t.exog_variant == "none" {
            None
        } else {
            baselines
                .get(&(t.location.clone(), t.model_id.clone(), t.horizon))
                .map(|b| relative_efficiency(cell_mse, *b))
                .transpose()?
        };
        rows.push(ReportRow {
            location: t.location.clone(),
            horizon: t.horizon,
            model: t.model_id.clone(),
            exog_variant: t.exog_variant.clone(),
            mse: cell_mse,
            re,
            n_points: t.points.len(),
            n_failed: t.n_failed(),
        });
    }
    Ok(rows)
}

/// Aggregated cell of the cross-location summary.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryCell {
    pub model: String,
    pub horizon: usize,
    pub exog_variant: String,
    pub n_locations: usize,
    pub median_re: f64,
    pub q1_re: f64,
    pub q3_re: f64,
    /// Signed-rank p-value of paired MSE differences against the baseline.
    pub p_vs_baseline: Option<f64>,
    pub significant_vs_baseline: bool,
    /// Signed-rank p-values against other exog variants.
    pub p_vs_variants: BTreeMap<String, f64>,
}

/// Median / quartile relative efficiencies and paired significance markers
/// per (model, horizon, exog-variant), aggregated across locations.
pub fn summary_table(rows: &[ReportRow]) -> Result<Vec<SummaryCell>> {
    // (model, horizon, variant) -> location -> mse
    let mut cells: BTreeMap<(String, usize, String), BTreeMap<String, f64>> = BTreeMap::new();
    let mut res: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.model.clone(), r.horizon, r.exog_variant.clone()))
            .or_default()
            .insert(r.location.clone(), r.mse);
        if let Some(re) = r.re {
            res.entry((r.model.clone(), r.horizon, r.exog_variant.clone()))
                .or_default()
                .push(re);
        }
    }
    let paired_p = |a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| -> Option<f64> {
        let d: Vec<f64> = a
            .iter()
            .filter_map(|(loc, ma)| b.get(loc).map(|mb| ma - mb))
            .collect();
        if d.iter().filter(|v| **v != 0.0).count() < 5 {
            return None;
        }
        wilcoxon_signed_rank(&d, WilcoxonMethod::Auto).ok()
    };

    let mut out = Vec::new();
    for ((model, horizon, variant), re_values) in &res {
        if variant == "none" {
            continue;
        }
        let this = &cells[&(model.clone(), *horizon, variant.clone())];
        let baseline = cells.get(&(model.clone(), *horizon, "none".to_string()));
        let p_vs_baseline = baseline.and_then(|b| paired_p(this, b));
        let mut p_vs_variants = BTreeMap::new();
        for ((m2, h2, v2), other) in &cells {
            if m2 == model && *h2 == *horizon && v2 != variant && v2 != "none" {
                if let Some(p) = paired_p(this, other) {
                    p_vs_variants.insert(v2.clone(), p);
                }
            }
        }
        out.push(SummaryCell {
            model: model.clone(),
            horizon: *horizon,
            exog_variant: variant.clone(),
            n_locations: re_values.len(),
            median_re: median(re_values),
            q1_re: quantile(re_values, 0.25),
            q3_re: quantile(re_values, 0.75),
            significant_vs_baseline: p_vs_baseline.is_some_and(|p| p < 0.05),
            p_vs_baseline,
            p_vs_variants,
        });
    }
    Ok(out)
}

/// Season bucket of a report: peak months versus the rest of the year.
#[derive(Debug, Clone, Serialize)]
pub struct SeasonRow {
    pub model: String,
    pub horizon: usize,
    pub exog_variant: String,
    pub season: String,
    pub mean_mse: f64,
    /// Mean MSE over the reference variant's mean MSE in the same season.
    pub re_vs_reference: Option<f64>,
}

/// Splits every trace's errors into peak (configured months) and off
/// seasons and reports each variant's mean MSE relative to a reference
/// variant, aggregated across locations.
pub fn season_split(
    traces: &[ForecastTrace],
    peak_months: &[u32],
    reference_variant: &str,
) -> Result<Vec<SeasonRow>> {
    use chrono::Datelike;
    // (model, horizon, variant, season) -> squared errors
    let mut buckets: BTreeMap<(String, usize, String, &'static str), Vec<f64>> = BTreeMap::new();
    for t in traces {
        for p in &t.points {
            let Some(y_hat) = p.y_hat else { continue };
            let season = if peak_months.contains(&p.date.month()) {
                "peak"
            } else {
                "off"
            };
            buckets
                .entry((t.model_id.clone(), t.horizon, t.exog_variant.clone(), season))
                .or_default()
                .push((p.y_true - y_hat) * (p.y_true - y_hat));
        }
    }
    let mean_of = |key: &(String, usize, String, &'static str)| -> Option<f64> {
        buckets.get(key).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mut out = Vec::new();
    for ((model, horizon, variant, season), errs) in &buckets {
        let mean_mse = errs.iter().sum::<f64>() / errs.len() as f64;
        let reference = mean_of(&(model.clone(), *horizon, reference_variant.to_string(), season));
        let re_vs_reference = reference
            .filter(|r| *r > 0.0 && variant != reference_variant)
            .map(|r| mean_mse / r);
        out.push(SeasonRow {
            model: model.clone(),
            horizon: *horizon,
            exog_variant: variant.clone(),
            season: season.to_string(),
            mean_mse,
            re_vs_reference,
        });
    }
    Ok(out)
}

/// Writes `report.csv`:
/// `location,horizon,model,exog_variant,mse,re,n_points,n_failed`.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], seed: Option<u64>, mut out: W) -> Result<()> {
    if let Some(seed) = seed {
        writeln!(out, "# seed={seed}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "location",
        "horizon",
        "model",
        "exog_variant",
        "mse",
        "re",
        "n_points",
        "n_failed",
    ])?;
    for r in rows {
        w.write_record([
            r.location.clone(),
            r.horizon.to_string(),
            r.model.clone(),
            r.exog_variant.clone(),
            format!("{}", r.mse),
            r.re.map(|v| format!("{v}")).unwrap_or_default(),
            r.n_points.to_string(),
            r.n_failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON summary shaped like the cross-location results table: median and
/// quartile relative efficiency plus significance markers per cell.
pub fn write_summary_json<W: Write>(
    cells: &[SummaryCell],
    seed: Option<u64>,
    out: W,
) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        seed: Option<u64>,
        cells: &'a [SummaryCell],
    }
    serde_json::to_writer_pretty(out, &Summary { seed, cells })
        .map_err(|e| Error::input(format!("summary serialization failed: {e}")))?;
    Ok(())
}

//! Correlation-based predictor filtering against the forecast target, with
//! multicollinearity pruning and a predictor cap. All correlations use
//! training rows only.

use std::io::Write;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{pearson, variance};

/// The retained predictors for one location.
#[derive(Debug, Clone)]
pub struct PredictorSet {
    /// Retained feature names, in rank order.
    pub keywords: Vec<String>,
    /// Training-row correlation with the target per retained feature.
    pub target_correlations: Vec<f64>,
    /// (dropped, kept-it-collided-with, their correlation).
    pub dropped_collinear: Vec<(String, String, f64)>,
}

/// Features sorted by |r| with the target on training rows, descending.
/// Zero-variance features rank last with an undefined correlation.
pub fn rank_by_target_correlation(
    features: &FeatureMatrix,
    target: &[f64],
    train_len: usize,
) -> Result<Vec<(String, Option<f64>)>> {
    if target.len() < train_len {
        return Err(Error::input("target shorter than training window"));
    }
    if train_len < 30 {
        return Err(Error::input("ranking needs at least 30 training rows"));
    }
    let y = &target[..train_len];
    if variance(y) <= 0.0 {
        return Err(Error::numerical("target has zero variance on training rows"));
    }
    let mut ranked: Vec<(String, Option<f64>)> = features
        .names
        .iter()
        .zip(&features.values)
        .map(|(name, col)| (name.clone(), pearson(&col[..train_len], y)))
        .collect();
    ranked.sort_by(|a, b| {
        let ka = a.1.map(f64::abs);
        let kb = b.1.map(f64::abs);
        match (ka, kb) {
            (Some(x), Some(y)) => y.partial_cmp(&x).unwrap().then_with(|| a.0.cmp(&b.0)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.0.cmp(&b.0),
        }
    });
    Ok(ranked)
}

/// Greedy pruning down the ranking: a feature is kept iff its training
/// correlation with every already-kept feature stays at or below
/// `threshold` in absolute value; selection stops at `cap`. Features with
/// undefined target correlation (constant on training rows) are never
/// selected.
pub fn prune_collinear(
    ranked: &[(String, Option<f64>)],
    features: &FeatureMatrix,
    threshold: f64,
    cap: usize,
    train_len: usize,
) -> Result<PredictorSet> {
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::config("collinearity_threshold", "must lie in (0, 1)"));
    }
    if cap == 0 {
        return Err(Error::config("predictor_cap", "must be at least 1"));
    }
    let mut keywords: Vec<String> = Vec::new();
    let mut target_correlations: Vec<f64> = Vec::new();
    let mut dropped_collinear = Vec::new();
    for (name, r) in ranked {
        if keywords.len() >= cap {
            break;
        }
        let Some(r) = r else { continue };
        let series = features
            .series(name)
            .ok_or_else(|| Error::input(format!("feature `{name}` not found")))?;
        let mut collides: Option<(String, f64)> = None;
        for kept in &keywords {
            let kept_series = features.series(kept).unwrap();
            if let Some(c) = pearson(&series[..train_len], &kept_series[..train_len]) {
                if c.abs() > threshold {
                    collides = Some((kept.clone(), c));
                    break;
                }
            }
        }
        match collides {
            Some((kept, c)) => dropped_collinear.push((name.clone(), kept, c)),
            None => {
                keywords.push(name.clone());
                target_correlations.push(*r);
            }
        }
    }
    debug_assert!(keywords.len() <= cap);
    Ok(PredictorSet {
        keywords,
        target_correlations,
        dropped_collinear,
    })
}

/// Ranking followed by pruning.
pub fn select_predictors(
    features: &FeatureMatrix,
    target: &[f64],
    train_len: usize,
    threshold: f64,
    cap: usize,
) -> Result<PredictorSet> {
    let ranked = rank_by_target_correlation(features, target, train_len)?;
    prune_collinear(&ranked, features, threshold, cap, train_len)
}

/// Writes `predictors_<location>.csv`: `keyword,target_correlation`.
pub fn write_predictors_csv<W: Write>(set: &PredictorSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["keyword", "target_correlation"])?;
    for (k, r) in set.keywords.iter().zip(&set.target_correlations) {
        w.write_record([k.clone(), format!("{r}")])?;
    }
    w.flush()?;
    Ok(())
}

//! Keyword triage: near-duplicate removal and partitioning into
//! keep / cluster / discard classes by zero fraction.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::{zero_fraction, SeriesPanel};
use crate::stats::{is_constant, pearson};

/// A resolved duplicate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DedupPair {
    pub kept: String,
    pub dropped: String,
    pub correlation: f64,
}

/// Assignment of every input keyword to exactly one class.
#[derive(Debug, Clone)]
pub struct TriagePlan {
    /// Dense series used as individual predictors (zero fraction < low).
    pub kept: Vec<String>,
    /// Sparse but usable series, destined for clustering.
    pub to_cluster: Vec<String>,
    /// Near-empty series and dedup casualties.
    pub discarded: Vec<String>,
    pub dedup_pairs: Vec<DedupPair>,
    /// Zero fraction per surviving keyword, computed on training rows.
    pub zero_fractions: Vec<(String, f64)>,
}

/// Drops one member of every keyword pair correlating above `threshold`
/// on the training rows.
///
/// Pairs are resolved greedily in order of descending correlation; the
/// earlier-alphabetical member is kept. Constant series are excluded from
/// correlation and never dropped.
pub fn dedup(
    panel: &SeriesPanel,
    threshold: f64,
    train_len: usize,
) -> Result<(SeriesPanel, Vec<DedupPair>)> {
    if panel.n_keywords() < 2 {
        return Err(Error::input("dedup needs at least two series"));
    }
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::config("dedup_threshold", "must lie in (0, 1)"));
    }
    let train_len = train_len.min(panel.n_weeks());

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..panel.n_keywords() {
        let xi = &panel.values[i][..train_len];
        if is_constant(xi) {
            continue;
        }
        for j in (i + 1)..panel.n_keywords() {
            let xj = &panel.values[j][..train_len];
            if is_constant(xj) {
                continue;
            }
            if let Some(r) = pearson(xi, xj) {
                if r > threshold {
                    pairs.push((r, i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });

    let mut alive = vec![true; panel.n_keywords()];
    let mut dedup_pairs = Vec::new();
    for (r, i, j) in pairs {
        if !(alive[i] && alive[j]) {
            continue;
        }
        let (keep, drop) = if panel.keywords[i] <= panel.keywords[j] {
            (i, j)
        } else {
            (j, i)
        };
        alive[drop] = false;
        dedup_pairs.push(DedupPair {
            kept: panel.keywords[keep].clone(),
            dropped: panel.keywords[drop].clone(),
            correlation: r,
        });
    }

    let survivors: Vec<String> = panel
        .keywords
        .iter()
        .zip(&alive)
        .filter(|(_, a)| **a)
        .map(|(k, _)| k.clone())
        .collect();
    Ok((panel.subset(&survivors)?, dedup_pairs))
}

/// Classifies keywords by zero fraction on the training rows:
/// `zf < low` kept, `low <= zf <= high` to cluster, `zf > high` discarded.
pub fn partition(
    panel: &SeriesPanel,
    low: f64,
    high: f64,
    train_len: usize,
) -> Result<(Vec<String>, Vec<String>, Vec<String>, Vec<(String, f64)>)> {
    if !(0.0 < low && low < high && high < 1.0) {
        return Err(Error::config("zero_thresholds", "need 0 < low < high < 1"));
    }
    let train_len = train_len.min(panel.n_weeks());
    let mut kept = Vec::new();
    let mut to_cluster = Vec::new();
    let mut discarded = Vec::new();
    let mut zero_fractions = Vec::new();
    for (k, series) in panel.keywords.iter().zip(&panel.values) {
        let zf = zero_fraction(&series[..train_len])?;
        zero_fractions.push((k.clone(), zf));
        if zf < low {
            kept.push(k.clone());
        } else if zf <= high {
            to_cluster.push(k.clone());
        } else {
            discarded.push(k.clone());
        }
    }
    Ok((kept, to_cluster, discarded, zero_fractions))
}

/// Runs dedup then partition; dedup casualties land in `discarded`.
pub fn triage(
    panel: &SeriesPanel,
    dedup_threshold: f64,
    low: f64,
    high: f64,
    train_len: usize,
) -> Result<TriagePlan> {
    let (surviving, dedup_pairs) = dedup(panel, dedup_threshold, train_len)?;
    let (kept, to_cluster, mut discarded, zero_fractions) =
        partition(&surviving, low, high, train_len)?;
    discarded.extend(dedup_pairs.iter().map(|p| p.dropped.clone()));
    let plan = TriagePlan {
        kept,
        to_cluster,
        discarded,
        dedup_pairs,
        zero_fractions,
    };
    debug_assert_eq!(
        plan.kept.len() + plan.to_cluster.len() + plan.discarded.len(),
        panel.n_keywords()
    );
    Ok(plan)
}

/// Writes the triage report: `keyword,zero_fraction,class,dropped_for`.
pub fn write_triage_report<W: Write>(
    plan: &TriagePlan,
    panel: &SeriesPanel,
    train_len: usize,
    out: W,
) -> Result<()> {
    let train_len = train_len.min(panel.n_weeks());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["keyword", "zero_fraction", "class", "dropped_for"])?;
    let class_of = |k: &String| -> (&'static str, String) {
        if plan.kept.contains(k) {
            ("kept", String::new())
        } else if plan.to_cluster.contains(k) {
            ("cluster", String::new())
        } else if let Some(p) = plan.dedup_pairs.iter().find(|p| p.dropped == *k) {
            ("discarded", p.kept.clone())
        } else {
            ("discarded", String::new())
        }
    };
    for (k, series) in panel.keywords.iter().zip(&panel.values) {
        let zf = zero_fraction(&series[..train_len])?;
        let (class, dropped_for) = class_of(k);
        w.write_record([k.clone(), format!("{zf}"), class.to_string(), dropped_for])?;
    }
    w.flush()?;
    Ok(())
}

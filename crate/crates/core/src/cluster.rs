//! Hierarchical clustering of sparse keywords on correlation distance,
//! elbow-based cluster count selection and "+"-combined query construction.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::SeriesPanel;
use crate::scalar::Real;
use crate::stats::{pearson, Matrix};
use crate::synthgen::LatentWorld;

/// Stepwise dendrogram. Leaves are 0..n-1; each merge creates cluster id
/// `n + step`. Heights are nondecreasing under Ward linkage.
#[derive(Debug, Clone)]
pub struct Dendrogram<F> {
    pub n_leaves: usize,
    /// (cluster id a, cluster id b, merge height), a < b.
    pub merges: Vec<(usize, usize, F)>,
}

impl<F: Real> Dendrogram<F> {
    /// Leaf labels for the cut into `k` clusters. Clusters are numbered by
    /// their smallest leaf index.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(Error::input(format!("cannot cut {n}-leaf dendrogram at k={k}")));
        }
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (step, (a, b, _)) in self.merges.iter().take(n - k).enumerate() {
            let new_id = n + step;
            let ra = root(&mut parent, *a);
            let rb = root(&mut parent, *b);
            parent[ra] = new_id;
            parent[rb] = new_id;
        }
        let mut first_leaf: BTreeMap<usize, usize> = BTreeMap::new();
        let mut roots = Vec::with_capacity(n);
        for leaf in 0..n {
            let r = root(&mut parent, leaf);
            first_leaf.entry(r).or_insert(leaf);
            roots.push(r);
        }
        let mut order: Vec<(usize, usize)> =
            first_leaf.iter().map(|(r, leaf)| (*leaf, *r)).collect();
        order.sort();
        let label_of: BTreeMap<usize, usize> = order
            .into_iter()
            .enumerate()
            .map(|(label, (_, r))| (r, label))
            .collect();
        Ok(roots.into_iter().map(|r| label_of[&r]).collect())
    }
}

/// Correlation distance 1 - r on the training rows, for every series pair.
pub fn correlation_distance_matrix(panel: &SeriesPanel, train_len: usize) -> Result<Matrix<f64>> {
    let n = panel.n_keywords();
    if n < 2 {
        return Err(Error::input("distance matrix needs at least two series"));
    }
    let train_len = train_len.min(panel.n_weeks());
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let xi = &panel.values[i][..train_len];
            let xj = &panel.values[j][..train_len];
            let r = pearson(xi, xj).ok_or_else(|| {
                let offender = if crate::stats::is_constant(xi) {
                    &panel.keywords[i]
                } else {
                    &panel.keywords[j]
                };
                Error::numerical(format!(
                    "zero-variance series `{offender}` in correlation distance"
                ))
            })?;
            let dist = (1.0 - r.clamp(-1.0, 1.0)).clamp(0.0, 2.0);
            d.set(i, j, dist);
            d.set(j, i, dist);
        }
    }
    Ok(d)
}

/// Agglomerative Ward clustering via the Lance-Williams update on squared
/// distances. Deterministic: ties go to the smallest (i, j) cluster-id pair.
pub fn ward_cluster<F: Real>(d: &Matrix<F>) -> Result<Dendrogram<F>> {
    let n = d.rows();
    if n == 0 || d.cols() != n {
        return Err(Error::input("distance matrix must be square and nonempty"));
    }
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j);
            if v < F::zero() {
                return Err(Error::input("negative distance"));
            }
            if (v - d.get(j, i)).abs() > F::of(1e-9) * (F::one() + v.abs()) {
                return Err(Error::input("non-symmetric distance matrix"));
            }
        }
    }

    // Slot state: squared distances, current cluster id and size per slot.
    let mut dist2 = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j);
            dist2[i][j] = v * v;
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut active: Vec<bool> = vec![true; n];

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut prev_height = F::zero();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(F, usize, usize, usize, usize)> = None;
        for u in 0..n {
            if !active[u] {
                continue;
            }
            for v in (u + 1)..n {
                if !active[v] {
                    continue;
                }
                let (lo, hi) = if id[u] < id[v] {
                    (id[u], id[v])
                } else {
                    (id[v], id[u])
                };
                let candidate = (dist2[u][v], lo, hi);
                let better = match &best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => {
                        candidate.0 < *bd || (candidate.0 == *bd && (lo, hi) < (*blo, *bhi))
                    }
                };
                if better {
                    best = Some((candidate.0, lo, hi, u, v));
                }
            }
        }
        let (d2, lo, hi, u, v) = best.expect("at least one active pair");
        let height = d2.max(F::zero()).sqrt();
        assert!(
            height >= prev_height * (F::one() - F::of(1e-9)) - F::of(1e-12),
            "Ward merge heights must be nondecreasing"
        );
        prev_height = height;
        merges.push((lo, hi, height));

        // Lance-Williams: distances from the merged cluster to the rest.
        let (na, nb) = (F::of_usize(size[u]), F::of_usize(size[v]));
        for w in 0..n {
            if !active[w] || w == u || w == v {
                continue;
            }
            let nc = F::of_usize(size[w]);
            let updated = ((na + nc) * dist2[u][w] + (nb + nc) * dist2[v][w] - nc * d2)
                / (na + nb + nc);
            dist2[u][w] = updated;
            dist2[w][u] = updated;
        }
        size[u] += size[v];
        active[v] = false;
        id[u] = n + step;
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

/// Within-cluster sum of squared Euclidean distances from each series to its
/// cluster mean series.
pub fn wcss<F: Real>(series: &[Vec<F>], labels: &[usize]) -> Result<F> {
    if labels.is_empty() || series.is_empty() {
        return Err(Error::input("wcss needs a nonempty assignment"));
    }
    if labels.len() != series.len() {
        return Err(Error::input("wcss: every series must be assigned"));
    }
    let width = series[0].len();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(*l).or_default().push(i);
    }
    let mut total = F::zero();
    for members in groups.values() {
        let mut center = vec![F::zero(); width];
        for &m in members {
            for (c, v) in center.iter_mut().zip(&series[m]) {
                *c += *v;
            }
        }
        let count = F::of_usize(members.len());
        for c in center.iter_mut() {
            *c /= count;
        }
        for &m in members {
            for (c, v) in center.iter().zip(&series[m]) {
                let diff = *v - *c;
                total += diff * diff;
            }
        }
    }
    Ok(total)
}

/// Within-cluster dispersion computed from pairwise distances alone:
/// sum over clusters of (1/|C|) * sum of squared member distances.
pub fn ward_objective<F: Real>(d: &Matrix<F>, labels: &[usize]) -> F {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(*l).or_default().push(i);
    }
    let mut total = F::zero();
    for members in groups.values() {
        let mut s = F::zero();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let v = d.get(i, j);
                s += v * v;
            }
        }
        total += s / F::of_usize(members.len());
    }
    total
}

/// Elbow rule: the k (2-based interior point) maximizing the discrete second
/// difference of the WCSS curve; ties go to the smallest k.
pub fn elbow_select<F: Real>(wcss_curve: &[F]) -> Result<usize> {
    if wcss_curve.len() < 3 {
        return Err(Error::input("elbow needs at least 3 curve points"));
    }
    for w in wcss_curve.windows(2) {
        if w[1] > w[0] + F::of(1e-9) * (F::one() + w[0].abs()) {
            return Err(Error::input("wcss curve must be non-increasing"));
        }
    }
    let mut best_k = 2;
    let mut best = F::neg_infinity();
    for i in 1..wcss_curve.len() - 1 {
        let d2 = wcss_curve[i - 1] - F::of(2.0) * wcss_curve[i] + wcss_curve[i + 1];
        if d2 > best {
            best = d2;
            best_k = i + 1;
        }
    }
    Ok(best_k)
}

/// Assignment of sparse keywords to clusters plus the combined query strings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub clusters: Vec<Vec<String>>,
    pub query_strings: Vec<String>,
    pub k_selected: usize,
    pub wcss_curve: Vec<f64>,
}

impl ClusterPlan {
    fn from_clusters(clusters: Vec<Vec<String>>, k_selected: usize, wcss_curve: Vec<f64>) -> Self {
        let query_strings = clusters.iter().map(|c| c.join("+")).collect();
        ClusterPlan {
            clusters,
            query_strings,
            k_selected,
            wcss_curve,
        }
    }
}

fn train_series(panel: &SeriesPanel, train_len: usize) -> Vec<Vec<f64>> {
    panel
        .values
        .iter()
        .map(|s| s[..train_len.min(s.len())].to_vec())
        .collect()
}

/// Candidate cluster counts: enough clusters to see structure, big enough
/// on average (>= 3 members) to clear reporting thresholds.
pub fn k_max_for(n: usize, cap: usize) -> usize {
    cap.min(n.div_ceil(3)).max(1)
}

fn cluster_names(panel: &SeriesPanel, labels: &[usize], k: usize) -> Vec<Vec<String>> {
    let mut clusters = vec![Vec::new(); k];
    for (name, l) in panel.keywords.iter().zip(labels) {
        clusters[*l].push(name.clone());
    }
    clusters
}

/// Ward + elbow on the given keywords. Groups of fewer than 9 members have
/// too short a WCSS curve for the elbow rule and collapse to one cluster.
pub fn build_cluster_plan(
    panel: &SeriesPanel,
    keywords: &[String],
    train_len: usize,
    k_max_cap: usize,
) -> Result<ClusterPlan> {
    if keywords.is_empty() {
        return Err(Error::input("no keywords to cluster"));
    }
    let sub = panel.subset(keywords)?;
    if keywords.len() == 1 {
        return Ok(ClusterPlan::from_clusters(vec![keywords.to_vec()], 1, vec![]));
    }
    let k_max = k_max_for(keywords.len(), k_max_cap);
    if k_max < 3 {
        return Ok(ClusterPlan::from_clusters(vec![keywords.to_vec()], 1, vec![]));
    }
    let d = correlation_distance_matrix(&sub, train_len)?;
    let tree = ward_cluster(&d)?;
    let series = train_series(&sub, train_len);
    let mut curve = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let labels = tree.cut(k)?;
        curve.push(wcss(&series, &labels)?);
    }
    let k = elbow_select(&curve)?;
    let labels = tree.cut(k)?;
    Ok(ClusterPlan::from_clusters(
        cluster_names(&sub, &labels, k),
        k,
        curve,
    ))
}

/// One extra round of ward + elbow for any cluster holding more than
/// `dominance` of all clustered keywords. No recursion beyond that round.
pub fn split_oversized(
    plan: &ClusterPlan,
    panel: &SeriesPanel,
    dominance: f64,
    train_len: usize,
    k_max_cap: usize,
) -> Result<ClusterPlan> {
    let total: usize = plan.clusters.iter().map(Vec::len).sum();
    let mut out: Vec<Vec<String>> = Vec::new();
    for cluster in &plan.clusters {
        let share = cluster.len() as f64 / total as f64;
        if share > dominance && k_max_for(cluster.len(), k_max_cap) >= 3 {
            let sub_plan = build_cluster_plan(panel, cluster, train_len, k_max_cap)?;
            out.extend(sub_plan.clusters);
        } else {
            out.push(cluster.clone());
        }
    }
    Ok(ClusterPlan::from_clusters(
        out,
        plan.k_selected,
        plan.wcss_curve.clone(),
    ))
}

/// Where a combined cluster series comes from.
pub enum CombineMode<'a> {
    /// A combined "+"-query download already on file.
    IngestedCombined { downloads: &'a [SeriesPanel] },
    /// The simulator's union volume, re-sampled and re-scaled.
    SimulatedUnion {
        world: &'a LatentWorld,
        download_date: NaiveDate,
    },
    /// Elementwise sum of the individual 0-100 series (comparison only,
    /// not the pipeline default).
    Summed,
}

/// Returns the combined series for one cluster.
pub fn combine_series(
    panel: &SeriesPanel,
    cluster: &[String],
    mode: &CombineMode,
) -> Result<Vec<f64>> {
    if cluster.is_empty() {
        return Err(Error::input("combine of empty cluster"));
    }
    match mode {
        CombineMode::Summed => {
            let mut total = vec![0.0; panel.n_weeks()];
            for k in cluster {
                let s = panel
                    .series(k)
                    .ok_or_else(|| Error::input(format!("keyword `{k}` not in panel")))?;
                for (t, v) in total.iter_mut().zip(s) {
                    *t += *v;
                }
            }
            Ok(total)
        }
        CombineMode::SimulatedUnion {
            world,
            download_date,
        } => world.sample_union(cluster, *download_date),
        CombineMode::IngestedCombined { downloads } => {
            let query = cluster.join("+");
            for p in downloads.iter().chain(std::iter::once(panel)) {
                if let Some(s) = p.series(&query) {
                    return Ok(s.to_vec());
                }
            }
            Err(Error::input(format!(
                "no combined download on file for query `{query}`"
            )))
        }
    }
}

/// Writes `clusters.csv`: `cluster_id,keyword`.
pub fn write_clusters_csv<W: Write>(plan: &ClusterPlan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster_id", "keyword"])?;
    for (i, cluster) in plan.clusters.iter().enumerate() {
        for k in cluster {
            w.write_record([i.to_string(), k.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `queries.txt`: one "+"-joined string per line.
pub fn write_queries_txt<W: Write>(plan: &ClusterPlan, mut out: W) -> Result<()> {
    for q in &plan.query_strings {
        writeln!(out, "{q}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn panel(values: Vec<Vec<f64>>) -> SeriesPanel {
        let n = values[0].len();
        let start = NaiveDate::from_ymd_opt(2020, 1, 5).unwrap();
        SeriesPanel::new(
            "US-TN",
            (0..n).map(|i| start + chrono::Days::new(7 * i as u64)).collect(),
            (0..values.len()).map(|i| format!("kw{i:02}")).collect(),
            values,
            NaiveDate::from_ymd_opt(2024, 6, 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn distance_matrix_basics() {
        let x = vec![1.0, 5.0, 2.0, 8.0, 3.0];
        let neg: Vec<f64> = x.iter().map(|v| 10.0 - v).collect();
        let p = panel(vec![x.clone(), x.clone(), neg]);
        let d = correlation_distance_matrix(&p, 5).unwrap();
        assert!(d.get(0, 1).abs() < 1e-12);
        assert!((d.get(0, 2) - 2.0).abs() < 1e-12);
        assert_eq!(d.get(1, 1), 0.0);
    }

    #[test]
    fn distance_of_uncorrelated_series_is_near_one() {
        let mut rng = StdRng::seed_from_u64(17);
        let n = 4000;
        let a: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=100u32))).collect();
        let b: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=100u32))).collect();
        let p = panel(vec![a, b]);
        let d = correlation_distance_matrix(&p, n).unwrap();
        assert!((d.get(0, 1) - 1.0).abs() < 0.1, "distance {}", d.get(0, 1));
    }

    #[test]
    fn distance_errors_name_constant_keyword() {
        let p = panel(vec![vec![1.0, 2.0, 3.0], vec![4.0, 4.0, 4.0]]);
        let err = correlation_distance_matrix(&p, 3).unwrap_err();
        assert!(err.to_string().contains("kw01"), "{err}");
    }

    #[test]
    fn two_leaves_merge_at_input_distance() {
        let mut d: Matrix<f64> = Matrix::zeros(2, 2);
        d.set(0, 1, 0.8);
        d.set(1, 0, 0.8);
        let tree = ward_cluster(&d).unwrap();
        assert_eq!(tree.merges.len(), 1);
        assert_eq!(tree.merges[0].0, 0);
        assert_eq!(tree.merges[0].1, 1);
        assert!((tree.merges[0].2 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identical_points_merge_at_zero() {
        let d: Matrix<f64> = Matrix::zeros(4, 4);
        let tree = ward_cluster(&d).unwrap();
        assert!(tree.merges.iter().all(|m| m.2 == 0.0));
    }

    #[test]
    fn ward_rejects_bad_input() {
        let mut d = Matrix::zeros(2, 2);
        d.set(0, 1, 1.0);
        d.set(1, 0, 2.0);
        assert!(ward_cluster(&d).is_err());
        let mut neg = Matrix::zeros(2, 2);
        neg.set(0, 1, -0.5);
        neg.set(1, 0, -0.5);
        assert!(ward_cluster(&neg).is_err());
    }

    fn dist_from_points(points: &[f64]) -> Matrix<f64> {
        let n = points.len();
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                d.set(i, j, (points[i] - points[j]).abs());
            }
        }
        d
    }

    /// All partitions of 0..n into exactly k nonempty parts.
    fn partitions_into(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(i: usize, n: usize, k: usize, labels: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<usize>>) {
            if i == n {
                if used == k {
                    out.push(labels.clone());
                }
                return;
            }
            // Remaining items must be able to fill all k parts.
            if used + (n - i) < k {
                return;
            }
            for l in 0..=used.min(k - 1) {
                labels.push(l);
                let next_used = used.max(l + 1);
                rec(i + 1, n, k, labels, next_used, out);
                labels.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, k, &mut Vec::new(), 0, &mut out);
        out
    }

    #[test]
    fn tight_pairs_merge_first_and_match_exhaustive_cut() {
        // Two tight pairs far apart on a line.
        let d = dist_from_points(&[0.0, 0.1, 10.0, 10.15]);
        let tree = ward_cluster(&d).unwrap();
        let firsts: Vec<(usize, usize)> = tree.merges[..2].iter().map(|m| (m.0, m.1)).collect();
        assert!(firsts.contains(&(0, 1)));
        assert!(firsts.contains(&(2, 3)));

        // Exhaustive oracle at k=2: the greedy cut attains the optimum.
        let labels = tree.cut(2).unwrap();
        let greedy = ward_objective(&d, &labels);
        let best = partitions_into(4, 2)
            .into_iter()
            .map(|l| ward_objective(&d, &l))
            .fold(f64::INFINITY, f64::min);
        assert!((greedy - best).abs() < 1e-12);
    }

    #[test]
    fn merge_heights_nondecreasing_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.random_range(3..12);
            let points: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let tree = ward_cluster(&dist_from_points(&points)).unwrap();
            for w in tree.merges.windows(2) {
                assert!(w[1].2 >= w[0].2 - 1e-12);
            }
        }
    }

    #[test]
    fn wcss_hand_cases() {
        let same = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        assert_eq!(wcss(&same, &[0, 0, 0]).unwrap(), 0.0);

        // [0,0] and [2,2] in one cluster: mean [1,1], each at squared distance 2.
        let two = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        assert_eq!(wcss(&two, &[0, 0]).unwrap(), 4.0);

        assert!(wcss::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn wcss_matches_double_loop_oracle() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..20 {
            let series: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..8).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let labels: Vec<usize> = (0..5).map(|_| rng.random_range(0..3usize)).collect();
            let fast = wcss(&series, &labels).unwrap();

            // Independent route: pairwise identity per cluster,
            // WCSS(C) = (1/|C|) sum_{i<j in C} ||x_i - x_j||^2.
            let mut oracle = 0.0;
            for c in 0..3 {
                let members: Vec<usize> =
                    (0..5).filter(|i| labels[*i] == c).collect();
                if members.is_empty() {
                    continue;
                }
                let mut s = 0.0;
                for (a, &i) in members.iter().enumerate() {
                    for &j in &members[a + 1..] {
                        s += series[i]
                            .iter()
                            .zip(&series[j])
                            .map(|(u, v)| (u - v) * (u - v))
                            .sum::<f64>();
                    }
                }
                oracle += s / members.len() as f64;
            }
            assert!((fast - oracle).abs() < 1e-9, "{fast} vs {oracle}");
        }
    }

    #[test]
    fn elbow_hand_cases() {
        assert_eq!(elbow_select(&[100.0, 20.0, 18.0, 17.0, 16.0]).unwrap(), 2);
        assert_eq!(elbow_select(&[50.0, 40.0, 30.0, 20.0, 10.0]).unwrap(), 2);
        assert!(elbow_select(&[3.0, 2.0]).is_err());
        assert!(elbow_select(&[1.0, 2.0, 3.0]).is_err());
    }

    /// Panel with `k` well-separated shape groups, `per` members each.
    /// Group shapes are independent smoothed noise, so between-group
    /// correlations sit near zero while within-group ones sit near one.
    fn grouped_panel(rng: &mut StdRng, k: usize, per: usize, weeks: usize) -> SeriesPanel {
        let shapes: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let raw: Vec<f64> = (0..weeks + 4).map(|_| rng.random_range(0.0..1.0)).collect();
                (0..weeks)
                    .map(|t| {
                        let window = &raw[t..t + 5];
                        20.0 + 60.0 * window.iter().sum::<f64>() / 5.0
                    })
                    .collect()
            })
            .collect();
        let values: Vec<Vec<f64>> = (0..k * per)
            .map(|i| {
                shapes[i / per]
                    .iter()
                    .map(|v| (v + rng.random_range(-1.0..1.0)).clamp(0.0, 100.0))
                    .collect()
            })
            .collect();
        panel(values)
    }

    #[test]
    fn elbow_recovers_planted_cluster_count() {
        let mut rng = StdRng::seed_from_u64(41);
        let p = grouped_panel(&mut rng, 4, 6, 120);
        let plan = build_cluster_plan(&p, &p.keywords, 120, 30).unwrap();
        assert_eq!(plan.k_selected, 4);
        // Clusters align with the planted groups.
        for cluster in &plan.clusters {
            let groups: std::collections::BTreeSet<usize> = cluster
                .iter()
                .map(|k| k[2..].parse::<usize>().unwrap() / 6)
                .collect();
            assert_eq!(groups.len(), 1, "mixed cluster {cluster:?}");
        }
    }

    #[test]
    fn wcss_curve_reproducible_from_cuts() {
        let mut rng = StdRng::seed_from_u64(43);
        let p = grouped_panel(&mut rng, 3, 5, 80);
        let plan = build_cluster_plan(&p, &p.keywords, 80, 30).unwrap();
        let d = correlation_distance_matrix(&p, 80).unwrap();
        let tree = ward_cluster(&d).unwrap();
        let series = train_series(&p, 80);
        for (i, expected) in plan.wcss_curve.iter().enumerate() {
            let labels = tree.cut(i + 1).unwrap();
            assert_eq!(wcss(&series, &labels).unwrap(), *expected);
        }
    }

    #[test]
    fn split_oversized_behaviour() {
        let mut rng = StdRng::seed_from_u64(47);
        // Giant cluster: two sub-populations stitched into one plan.
        let p = grouped_panel(&mut rng, 2, 9, 120);
        let giant = ClusterPlan::from_clusters(vec![p.keywords.clone()], 1, vec![]);
        let split = split_oversized(&giant, &p, 0.40, 120, 30).unwrap();
        assert!(split.clusters.len() >= 2, "giant cluster did not split");
        // Members of distinct planted groups separate.
        for cluster in &split.clusters {
            let groups: std::collections::BTreeSet<usize> = cluster
                .iter()
                .map(|k| k[2..].parse::<usize>().unwrap() / 9)
                .collect();
            assert_eq!(groups.len(), 1);
        }

        // Balanced plan stays unchanged.
        let balanced = build_cluster_plan(&p, &p.keywords, 120, 30).unwrap();
        let same = split_oversized(&balanced, &p, 0.60, 120, 30).unwrap();
        assert_eq!(same.clusters, balanced.clusters);

        // Dominance 1.0 is unreachable.
        let same2 = split_oversized(&giant, &p, 1.0, 120, 30).unwrap();
        assert_eq!(same2.clusters, giant.clusters);
    }

    #[test]
    fn combine_summed_singleton_is_identity() {
        let p = panel(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let s = combine_series(&p, &[p.keywords[1].clone()], &CombineMode::Summed).unwrap();
        assert_eq!(s, vec![4.0, 5.0, 6.0]);
        let both =
            combine_series(&p, &p.keywords.clone(), &CombineMode::Summed).unwrap();
        assert_eq!(both, vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn combine_ingested_requires_download() {
        let p = panel(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let cluster = p.keywords.clone();
        let err = combine_series(
            &p,
            &cluster,
            &CombineMode::IngestedCombined { downloads: &[] },
        )
        .unwrap_err();
        assert!(err.to_string().contains("kw00+kw01"), "{err}");
    }
}

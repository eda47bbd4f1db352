//! Generative simulator for the search-volume reporting mechanism:
//! latent weekly search counts, hypergeometric sampling per download,
//! privacy-threshold zeroing and 0-100 peak rescaling.
//!
//! Every pipeline stage can be validated against the latent ground truth
//! this module produces.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::SeriesPanel;

pub const WEEKS_PER_YEAR: usize = 52;

/// Long-run shape of a keyword's latent volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Flat,
    Linear,
    Quadratic,
    RandomWalk,
}

/// Sampling weights for keyword families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyWeights {
    pub flat: f64,
    pub linear: f64,
    pub quadratic: f64,
    pub random_walk: f64,
}

impl Default for FamilyWeights {
    fn default() -> Self {
        FamilyWeights {
            flat: 0.4,
            linear: 0.25,
            quadratic: 0.15,
            random_walk: 0.2,
        }
    }
}

/// Pairwise search-audience overlap between two keywords.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapSpec {
    pub a: String,
    pub b: String,
    /// Fraction of the smaller keyword's audience shared with the other.
    pub fraction: f64,
}

/// Synthetic outcome series configuration. The target is a weighted blend
/// of latent theme signals plus AR(1) noise, so search-derived predictors
/// carry genuine signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetConfig {
    pub theme_weights: Vec<f64>,
    pub level: f64,
    pub scale: f64,
    pub noise_scale: f64,
    pub noise_ar: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            theme_weights: vec![0.5, 0.3, 0.2],
            level: 50.0,
            scale: 40.0,
            noise_scale: 4.0,
            noise_ar: 0.5,
        }
    }
}

/// Full description of a synthetic world.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub seed: u64,
    pub weeks: usize,
    pub n_keywords: usize,
    /// Latent themes; keywords within a theme share seasonality and spikes.
    pub n_themes: usize,
    /// First week (must be a Sunday).
    pub start_date: NaiveDate,
    /// Total searches per week (N_t baseline).
    pub total_searches: u64,
    /// Linear growth of N_t across the range, as a fraction of the baseline.
    pub total_growth: f64,
    /// Searches drawn per download (n).
    pub sample_size: u64,
    /// Minimum sampled count reported as nonzero.
    pub privacy_threshold: f64,
    /// Typical latent keyword volume per week.
    pub base_volume: f64,
    /// Log-uniform spread of per-keyword base volumes.
    pub volume_spread: f64,
    /// Weight of the shared theme signal versus idiosyncratic shape.
    pub theme_mix: f64,
    pub seasonal_amplitude: f64,
    /// Innovation scale of the themes' weekly AR(1) jitter: search interest
    /// moves the whole theme week to week, beyond seasonality and spikes.
    pub theme_jitter: f64,
    /// Expected epidemic-like spikes per 52-week year.
    pub spike_rate: f64,
    pub spike_height: f64,
    /// Relative iid noise on the latent level.
    pub noise_scale: f64,
    /// Relative magnitude of trends over the full range.
    pub trend_scale: f64,
    pub family_weights: FamilyWeights,
    /// Overlap fraction for keyword pairs without an explicit entry.
    pub default_overlap: f64,
    pub overlaps: Vec<OverlapSpec>,
    pub target: TargetConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 42,
            weeks: 1000,
            n_keywords: 200,
            n_themes: 8,
            start_date: NaiveDate::from_ymd_opt(2004, 1, 4).unwrap(),
            total_searches: 10_000_000,
            total_growth: 0.0,
            sample_size: 100_000,
            privacy_threshold: 10.0,
            base_volume: 2000.0,
            volume_spread: 8.0,
            theme_mix: 0.7,
            seasonal_amplitude: 0.6,
            theme_jitter: 0.0,
            spike_rate: 0.8,
            spike_height: 2.0,
            noise_scale: 0.05,
            trend_scale: 0.8,
            family_weights: FamilyWeights::default(),
            default_overlap: 0.0,
            overlaps: Vec::new(),
            target: TargetConfig::default(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weeks < 2 {
            return Err(Error::config("weeks", "need at least 2 weeks"));
        }
        if self.n_keywords == 0 {
            return Err(Error::config("n_keywords", "need at least 1 keyword"));
        }
        if self.n_themes == 0 {
            return Err(Error::config("n_themes", "need at least 1 theme"));
        }
        if self.start_date.weekday() != Weekday::Sun {
            return Err(Error::config("start_date", "weeks start on Sundays"));
        }
        if self.sample_size == 0 || self.total_searches == 0 {
            return Err(Error::config("sample_size", "population and sample must be positive"));
        }
        if self.privacy_threshold < 0.0 {
            return Err(Error::config("privacy_threshold", "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.theme_mix) {
            return Err(Error::config("theme_mix", "must lie in [0, 1]"));
        }
        for o in &self.overlaps {
            if !(0.0..=1.0).contains(&o.fraction) {
                return Err(Error::config("overlaps", "fractions must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.default_overlap) {
            return Err(Error::config("default_overlap", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("world config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: WorldConfig =
            toml::from_str(text).map_err(|e| Error::config("world", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One keyword's latent state.
#[derive(Debug, Clone)]
pub struct KeywordLatent {
    pub name: String,
    pub family: Family,
    pub theme: usize,
    pub base: f64,
    /// Slope / curvature / random-walk scale, depending on family.
    pub trend_coefficient: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_phase: f64,
    pub noise_scale: f64,
    /// K_t: latent searches per week.
    pub counts: Vec<u64>,
}

/// Deterministic latent world: weekly populations, per-keyword counts and
/// the reporting parameters.
#[derive(Debug, Clone)]
pub struct LatentWorld {
    pub config: WorldConfig,
    pub dates: Vec<NaiveDate>,
    /// N_t: total searches per week.
    pub totals: Vec<u64>,
    pub keywords: Vec<KeywordLatent>,
    /// Per-week privacy threshold (regime shifts raise it from a date on).
    pub thresholds: Vec<f64>,
    /// Shared theme signals, mean roughly 1.
    pub theme_signals: Vec<Vec<f64>>,
}

/// Hypergeometric(N, K, n) sampling by inverse transform, walking outward
/// from the mode with the pmf ratio recursion. Handles populations far
/// beyond what tail-first inversion can reach without underflow.
pub fn hypergeometric_sample<R: Rng + ?Sized>(
    rng: &mut R,
    n_total: u64,
    k_success: u64,
    n_draws: u64,
) -> u64 {
    assert!(k_success <= n_total, "successes exceed population");
    assert!(n_draws <= n_total, "sample exceeds population");
    let lower = n_draws.saturating_sub(n_total - k_success);
    let upper = n_draws.min(k_success);
    if lower == upper {
        return lower;
    }
    let ln_choose = |a: u64, b: u64| -> f64 {
        statrs::function::gamma::ln_gamma(a as f64 + 1.0)
            - statrs::function::gamma::ln_gamma(b as f64 + 1.0)
            - statrs::function::gamma::ln_gamma((a - b) as f64 + 1.0)
    };
    let mode = (((n_draws + 1) as f64 * (k_success + 1) as f64) / (n_total + 2) as f64)
        .floor()
        .max(0.0) as u64;
    let mode = mode.clamp(lower, upper);
    let p_mode = (ln_choose(k_success, mode) + ln_choose(n_total - k_success, n_draws - mode)
        - ln_choose(n_total, n_draws))
    .exp();

    let u: f64 = rng.random();
    let mut cum = p_mode;
    if u <= cum {
        return mode;
    }
    let (nt, ks, nd) = (n_total as f64, k_success as f64, n_draws as f64);
    let (mut x_lo, mut p_lo) = (mode, p_mode);
    let (mut x_hi, mut p_hi) = (mode, p_mode);
    loop {
        let cand_hi = if x_hi < upper {
            let x = x_hi as f64;
            p_hi * (ks - x) * (nd - x) / ((x + 1.0) * (nt - ks - nd + x + 1.0))
        } else {
            0.0
        };
        let cand_lo = if x_lo > lower {
            let x = x_lo as f64;
            p_lo * x * (nt - ks - nd + x) / ((ks - x + 1.0) * (nd - x + 1.0))
        } else {
            0.0
        };
        if cand_hi <= 0.0 && cand_lo <= 0.0 {
            // Accumulated mass fell short of u by float leftover only.
            return x_hi;
        }
        if cand_hi >= cand_lo {
            x_hi += 1;
            p_hi = cand_hi;
            cum += p_hi;
            if u <= cum {
                return x_hi;
            }
        } else {
            x_lo -= 1;
            p_lo = cand_lo;
            cum += p_lo;
            if u <= cum {
                return x_lo;
            }
        }
    }
}

fn stream(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update([0xff]);
        h.update(p);
    }
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

/// Seasonal-plus-spikes activity shape with mean about 1, never negative,
/// with optional AR(1) jitter innovations.
fn activity_signal(
    rng: &mut ChaCha8Rng,
    weeks: usize,
    amplitude: f64,
    spike_rate: f64,
    spike_height: f64,
    jitter: f64,
) -> Vec<f64> {
    let phase: f64 = rng.random_range(0.0..WEEKS_PER_YEAR as f64);
    let amp = amplitude * rng.random_range(0.6..1.0);
    let years = weeks.div_ceil(WEEKS_PER_YEAR);
    let mut spikes: Vec<(f64, f64, f64)> = Vec::new();
    for y in 0..years {
        if rng.random_bool(spike_rate.clamp(0.0, 1.0)) {
            let center = (y * WEEKS_PER_YEAR) as f64 + rng.random_range(0.0..WEEKS_PER_YEAR as f64);
            let width = rng.random_range(1.5..4.0);
            let height = spike_height * rng.random_range(0.5..1.5);
            spikes.push((center, width, height));
        }
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut wobble = 0.0;
    (0..weeks)
        .map(|t| {
            let tf = t as f64;
            let seasonal =
                amp * (std::f64::consts::TAU * (tf + phase) / WEEKS_PER_YEAR as f64).sin();
            let spike: f64 = spikes
                .iter()
                .map(|(c, w, h)| h * (-((tf - c) * (tf - c)) / (2.0 * w * w)).exp())
                .sum();
            wobble = 0.7 * wobble + jitter * normal.sample(rng);
            (1.0 + seasonal + spike + wobble).max(0.0)
        })
        .collect()
}

/// Builds the deterministic latent world described by `config`.
pub fn generate_world(config: &WorldConfig) -> Result<LatentWorld> {
    config.validate()?;
    let weeks = config.weeks;
    let dates: Vec<NaiveDate> = (0..weeks)
        .map(|i| config.start_date + chrono::Days::new(7 * i as u64))
        .collect();
    let totals: Vec<u64> = (0..weeks)
        .map(|t| {
            let growth = 1.0 + config.total_growth * t as f64 / weeks as f64;
            (config.total_searches as f64 * growth).round() as u64
        })
        .collect();

    let theme_signals: Vec<Vec<f64>> = (0..config.n_themes)
        .map(|j| {
            let mut rng = stream(config.seed, &[b"theme", &j.to_le_bytes()]);
            activity_signal(
                &mut rng,
                weeks,
                config.seasonal_amplitude,
                config.spike_rate,
                config.spike_height,
                config.theme_jitter,
            )
        })
        .collect();

    let w = &config.family_weights;
    let total_weight = w.flat + w.linear + w.quadratic + w.random_walk;
    if total_weight <= 0.0 {
        return Err(Error::config("family_weights", "weights sum to zero"));
    }

    let mut keywords = Vec::with_capacity(config.n_keywords);
    for i in 0..config.n_keywords {
        let mut rng = stream(config.seed, &[b"keyword", &i.to_le_bytes()]);
        let theme = rng.random_range(0..config.n_themes);
        let spread = config.volume_spread.max(1.0).ln();
        let base = config.base_volume * rng.random_range(-spread..=spread).exp();
        let own = activity_signal(
            &mut rng,
            weeks,
            config.seasonal_amplitude,
            config.spike_rate,
            config.spike_height,
            0.0,
        );

        let draw: f64 = rng.random_range(0.0..total_weight);
        let family = if draw < w.flat {
            Family::Flat
        } else if draw < w.flat + w.linear {
            Family::Linear
        } else if draw < w.flat + w.linear + w.quadratic {
            Family::Quadratic
        } else {
            Family::RandomWalk
        };
        let direction: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let trend_coefficient = match family {
            Family::Flat => 0.0,
            Family::Linear => direction * config.trend_scale * base / weeks as f64,
            Family::Quadratic => direction * config.trend_scale * base / (weeks as f64).powi(2),
            Family::RandomWalk => config.trend_scale * base / (weeks as f64).sqrt(),
        };
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut walk = 0.0;
        let mut counts = Vec::with_capacity(weeks);
        for t in 0..weeks {
            let noise = 1.0 + config.noise_scale * normal.sample(&mut rng);
            let shape =
                config.theme_mix * theme_signals[theme][t] + (1.0 - config.theme_mix) * own[t];
            let trend = match family {
                Family::Flat => 0.0,
                Family::Linear => trend_coefficient * t as f64,
                Family::Quadratic => trend_coefficient * (t as f64).powi(2),
                Family::RandomWalk => {
                    walk += trend_coefficient * normal.sample(&mut rng);
                    walk
                }
            };
            let level = (base * shape * noise.max(0.0) + trend).max(0.0);
            let k = level.round() as u64;
            if k > totals[t] {
                return Err(Error::config(
                    "base_volume",
                    format!("keyword volume {k} exceeds population {} at week {t}", totals[t]),
                ));
            }
            counts.push(k);
        }
        keywords.push(KeywordLatent {
            name: format!("kw{i:03}"),
            family,
            theme,
            base,
            trend_coefficient,
            seasonal_amplitude: config.seasonal_amplitude,
            seasonal_phase: 0.0,
            noise_scale: config.noise_scale,
            counts,
        });
    }

    Ok(LatentWorld {
        config: config.clone(),
        dates,
        totals,
        keywords,
        thresholds: vec![config.privacy_threshold; weeks],
        theme_signals,
    })
}

impl LatentWorld {
    pub fn weeks(&self) -> usize {
        self.dates.len()
    }

    pub fn keyword(&self, name: &str) -> Result<&KeywordLatent> {
        self.keywords
            .iter()
            .find(|k| k.name == name)
            .ok_or_else(|| Error::input(format!("keyword `{name}` not in world")))
    }

    fn check_sample_size(&self) -> Result<()> {
        let min_total = *self.totals.iter().min().unwrap();
        if self.config.sample_size > min_total {
            return Err(Error::config(
                "sample_size",
                format!("sample {} exceeds population {min_total}", self.config.sample_size),
            ));
        }
        Ok(())
    }

    /// Draws sampled counts for one latent count series; the stream is keyed
    /// by (seed, download date, series name, week) so repeated downloads on
    /// the same date are identical and sampling parallelizes at any grain.
    fn sample_counts(&self, counts: &[u64], name: &str, download_date: NaiveDate) -> Vec<u64> {
        let n = self.config.sample_size;
        counts
            .iter()
            .enumerate()
            .map(|(t, &k)| {
                if k == 0 {
                    return 0;
                }
                let mut rng = stream(
                    self.config.seed,
                    &[
                        b"download",
                        download_date.to_string().as_bytes(),
                        name.as_bytes(),
                        &t.to_le_bytes(),
                    ],
                );
                hypergeometric_sample(&mut rng, self.totals[t], k, n)
            })
            .collect()
    }

    /// 0-100 reporting: peak-normalize the sampled counts, round to integers
    /// and zero out weeks below the privacy threshold. The latent population
    /// reference cancels against the within-download peak normalization, so
    /// scaling reduces to `k_t / max_t k_t`.
    fn report(&self, sampled: &[u64]) -> Vec<f64> {
        let max_k = sampled.iter().copied().max().unwrap_or(0);
        if max_k == 0 {
            return vec![0.0; sampled.len()];
        }
        sampled
            .iter()
            .zip(&self.thresholds)
            .map(|(&k, &threshold)| {
                if (k as f64) < threshold {
                    0.0
                } else {
                    (100.0 * k as f64 / max_k as f64).round().clamp(0.0, 100.0)
                }
            })
            .collect()
    }

    /// Simulates one download of every keyword on `download_date`.
    /// Each keyword is scaled against its own peak, as when terms are
    /// retrieved one query at a time.
    pub fn sample_download(&self, download_date: NaiveDate) -> Result<SeriesPanel> {
        self.check_sample_size()?;
        let mut values = Vec::with_capacity(self.keywords.len());
        for kw in &self.keywords {
            let sampled = self.sample_counts(&kw.counts, &kw.name, download_date);
            values.push(self.report(&sampled));
        }
        SeriesPanel::new(
            "SYN",
            self.dates.clone(),
            self.keywords.iter().map(|k| k.name.clone()).collect(),
            values,
            download_date,
        )
    }

    fn overlap_fraction(&self, a: &str, b: &str) -> f64 {
        for o in &self.config.overlaps {
            if (o.a == a && o.b == b) || (o.a == b && o.b == a) {
                return o.fraction;
            }
        }
        self.config.default_overlap
    }

    /// Latent volume of the union of several keywords: inclusion-exclusion
    /// truncated at pairwise terms, with configured overlap fractions
    /// applied to the smaller member of each pair.
    pub fn union_volume(&self, keywords: &[String]) -> Result<Vec<u64>> {
        if keywords.is_empty() {
            return Err(Error::input("union of empty keyword list"));
        }
        let members: Vec<&KeywordLatent> = keywords
            .iter()
            .map(|k| self.keyword(k))
            .collect::<Result<_>>()?;
        let weeks = self.weeks();
        let mut union = Vec::with_capacity(weeks);
        for t in 0..weeks {
            let mut total: f64 = members.iter().map(|m| m.counts[t] as f64).sum();
            for i in 0..members.len() {
                for j in (i + 1)..members.len() {
                    let frac = self.overlap_fraction(&members[i].name, &members[j].name);
                    total -= frac * members[i].counts[t].min(members[j].counts[t]) as f64;
                }
            }
            if total < -0.5 {
                return Err(Error::config(
                    "overlaps",
                    format!("overlap config implies negative union at week {t}"),
                ));
            }
            let k = total.round().max(0.0) as u64;
            if k > self.totals[t] {
                return Err(Error::config(
                    "overlaps",
                    format!("union volume {k} exceeds population at week {t}"),
                ));
            }
            union.push(k);
        }
        Ok(union)
    }

    /// Simulates downloading the "+"-combined query for a cluster: the union
    /// volume is re-sampled and re-scaled like any single series.
    pub fn sample_union(&self, keywords: &[String], download_date: NaiveDate) -> Result<Vec<f64>> {
        self.check_sample_size()?;
        let union = self.union_volume(keywords)?;
        let query = keywords.join("+");
        let sampled = self.sample_counts(&union, &query, download_date);
        Ok(self.report(&sampled))
    }

    /// Raises the privacy threshold from `date` onward, simulating a data
    /// collection update. `factor` must be at least 1.
    pub fn regime_shift(&self, date: NaiveDate, factor: f64) -> Result<LatentWorld> {
        if factor < 1.0 {
            return Err(Error::config("zero_inflation_factor", "must be >= 1"));
        }
        if date < *self.dates.first().unwrap() || date > *self.dates.last().unwrap() {
            return Err(Error::config("date", "shift date outside world range"));
        }
        let mut shifted = self.clone();
        for (t, d) in self.dates.iter().enumerate() {
            if *d >= date {
                shifted.thresholds[t] *= factor;
            }
        }
        Ok(shifted)
    }

    /// Synthetic forecast target driven by the leading theme signals.
    pub fn generate_target(&self) -> Vec<f64> {
        let cfg = &self.config.target;
        let mut rng = stream(self.config.seed, &[b"target"]);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut e = 0.0;
        (0..self.weeks())
            .map(|t| {
                let signal: f64 = cfg
                    .theme_weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * self.theme_signals[j % self.theme_signals.len()][t])
                    .sum();
                e = cfg.noise_ar * e + cfg.noise_scale * normal.sample(&mut rng);
                (cfg.level + cfg.scale * signal + e).max(0.0)
            })
            .collect()
    }
}

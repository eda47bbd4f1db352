//! Pipeline configuration: every stage parameter with its default, loadable
//! from TOML and validated against each stage's documented domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthgen::WorldConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TriageConfig {
    pub dedup_threshold: f64,
    pub zero_low: f64,
    pub zero_high: f64,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            dedup_threshold: 0.99,
            zero_low: 0.30,
            zero_high: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombineModeName {
    /// Parse combined "+"-query downloads on file (the production path).
    IngestedCombined,
    /// Ask the simulator for the re-sampled union (synthetic worlds).
    SimulatedUnion,
    /// Elementwise sum of member series (comparison only).
    Summed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub dominance: f64,
    pub k_max_cap: usize,
    pub combine_mode: CombineModeName,
    /// Combined series with a higher training zero fraction get flagged.
    pub flag_zero_fraction: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            dominance: 0.40,
            k_max_cap: 30,
            combine_mode: CombineModeName::SimulatedUnion,
            flag_zero_fraction: 0.30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub window: usize,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            lambda_min: 0.1,
            lambda_max: 2.0,
            lambda_points: 20,
            window: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetrendConfig {
    pub alpha: f64,
}

impl Default for DetrendConfig {
    fn default() -> Self {
        DetrendConfig { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub collinearity_threshold: f64,
    pub cap: usize,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            collinearity_threshold: 0.95,
            cap: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub train_window: usize,
    pub horizons: Vec<usize>,
    pub models: Vec<String>,
    pub argo_lags: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            train_window: 104,
            horizons: vec![0, 1, 2, 3],
            models: vec!["arimax".into(), "sarimax".into(), "argo".into()],
            argo_lags: 52,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub fluctuation_window: usize,
    /// Calendar months counted as the in-season peak.
    pub peak_months: Vec<u32>,
    /// Two-sided critical values for the fluctuation path as (mu, cv) pairs,
    /// where mu is window length over evaluation length. The shipped
    /// defaults are the 5% values from Giacomini & Rossi (2010), Table I.
    pub fluctuation_critical_values: Vec<(f64, f64)>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fluctuation_window: 24,
            peak_months: vec![12, 1],
            fluctuation_critical_values: vec![
                (0.1, 3.393),
                (0.2, 3.179),
                (0.3, 3.012),
                (0.4, 2.890),
                (0.5, 2.779),
                (0.6, 2.634),
                (0.7, 2.560),
                (0.8, 2.433),
                (0.9, 2.331),
                (1.0, 2.197),
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// The final weeks held out as forecast-evaluation issue weeks; stages
    /// estimate parameters on everything before them.
    pub test_weeks: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_weeks: 80 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub world: WorldConfig,
    pub downloads: usize,
    pub download_start: chrono::NaiveDate,
    pub locations: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            world: WorldConfig::default(),
            downloads: 27,
            download_start: chrono::NaiveDate::from_ymd_opt(2024, 6, 1).unwrap(),
            locations: 1,
        }
    }
}

/// Every pipeline parameter, with defaults.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub triage: TriageConfig,
    pub cluster: ClusterConfig,
    pub denoise: DenoiseConfig,
    pub detrend: DetrendConfig,
    pub select: SelectConfig,
    pub forecast: ForecastConfig,
    pub eval: EvalConfig,
    pub split: SplitConfig,
    pub synth: SynthConfig,
}

impl PipelineConfig {
    /// Root seed: explicit override, else the synthetic world's.
    pub fn root_seed(&self) -> u64 {
        self.seed.unwrap_or(self.synth.world.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.triage;
        if !(0.0 < t.dedup_threshold && t.dedup_threshold < 1.0) {
            return Err(Error::config("triage.dedup_threshold", "must lie in (0, 1)"));
        }
        if !(0.0 < t.zero_low && t.zero_low < t.zero_high && t.zero_high < 1.0) {
            return Err(Error::config(
                "triage.zero_low/zero_high",
                "need 0 < low < high < 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.cluster.dominance) {
            return Err(Error::config("cluster.dominance", "must lie in [0, 1]"));
        }
        if self.cluster.k_max_cap == 0 {
            return Err(Error::config("cluster.k_max_cap", "must be positive"));
        }
        let d = &self.denoise;
        if !(d.lambda_min > 0.0 && d.lambda_min <= d.lambda_max) {
            return Err(Error::config("denoise.lambda_min", "need 0 < min <= max"));
        }
        if d.lambda_points == 0 {
            return Err(Error::config("denoise.lambda_points", "must be positive"));
        }
        if d.window < 4 {
            return Err(Error::config("denoise.window", "must be at least 4"));
        }
        if (self.detrend.alpha - 0.05).abs() > 1e-12 {
            return Err(Error::config("detrend.alpha", "only 0.05 is tabulated"));
        }
        let s = &self.select;
        if !(0.0 < s.collinearity_threshold && s.collinearity_threshold < 1.0) {
            return Err(Error::config("select.collinearity_threshold", "must lie in (0, 1)"));
        }
        if s.cap == 0 {
            return Err(Error::config("select.cap", "must be at least 1"));
        }
        let f = &self.forecast;
        if f.train_window < 60 {
            return Err(Error::config("forecast.train_window", "must be at least 60"));
        }
        if f.horizons.iter().any(|h| *h > 3) {
            return Err(Error::config("forecast.horizons", "horizons lie in 0..=3"));
        }
        for m in &f.models {
            crate::forecast::ModelSpec::parse(m)?;
        }
        if self.eval.fluctuation_window < 2 {
            return Err(Error::config("eval.fluctuation_window", "must be at least 2"));
        }
        if self.split.test_weeks < 5 {
            return Err(Error::config("split.test_weeks", "must be at least 5"));
        }
        if self.synth.downloads == 0 || self.synth.locations == 0 {
            return Err(Error::config("synth.downloads", "must be positive"));
        }
        self.synth.world.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Per-position two-sided critical value for a fluctuation path: the
    /// tabulated entry with mu nearest to window/evaluation-length.
    pub fn fluctuation_critical_value(&self, window: usize, eval_len: usize) -> f64 {
        let mu = window as f64 / eval_len.max(1) as f64;
        self.eval
            .fluctuation_critical_values
            .iter()
            .min_by(|a, b| {
                (a.0 - mu)
                    .abs()
                    .partial_cmp(&(b.0 - mu).abs())
                    .unwrap()
            })
            .map(|(_, cv)| *cv)
            .unwrap_or(3.0)
    }
}

//! End-to-end orchestration: preprocessing stages in order, the backtest
//! matrix, and the on-disk layout every subcommand reads and writes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::cluster::{
    build_cluster_plan, combine_series, split_oversized, ClusterPlan, CombineMode,
};
use crate::config::{CombineModeName, PipelineConfig};
use crate::denoise::{denoise_series, gate_noisy, grid_search_lambda, lambda_grid, DenoiseModel};
use crate::detrend::{apply_detrend, classify_trend, trend_values, TrendAction, TrendDecision};
use crate::error::{Error, Result};
use crate::evalstats::{summarize_traces, summary_table, write_report_csv, write_summary_json};
use crate::features::FeatureMatrix;
use crate::forecast::{run_backtest, ForecastTask, ForecastTrace, ModelSpec};
use crate::ingest::{zero_fraction, SeriesPanel};
use crate::select::{select_predictors, write_predictors_csv, PredictorSet};
use crate::synthgen::{generate_world, LatentWorld};
use crate::triage::{triage, write_triage_report, TriagePlan};

fn stage_err(stage: &str, e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("stage {stage}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("stage {stage}: {m}")),
        other => other,
    }
}

/// Which stages to run; cumulative ablations come from skipping the later
/// stages, the raw variant bypasses preprocessing except the zero filter.
#[derive(Debug, Clone, Default)]
pub struct PreprocessOptions {
    pub skip_denoise: bool,
    pub skip_detrend: bool,
    pub raw: bool,
    pub variant_name: Option<String>,
}

impl PreprocessOptions {
    /// Default labels mirror the cumulative ablation naming.
    pub fn variant_label(&self) -> String {
        if let Some(name) = &self.variant_name {
            return name.clone();
        }
        if self.raw {
            "raw".into()
        } else if self.skip_denoise && self.skip_detrend {
            "clustering".into()
        } else if self.skip_detrend {
            "denoising".into()
        } else if self.skip_denoise {
            "detrending-only".into()
        } else {
            "detrending".into()
        }
    }
}

/// Side inputs the preprocessing stages may need.
#[derive(Default)]
pub struct PreprocessSources {
    pub world: Option<LatentWorld>,
    pub combined_downloads: Vec<SeriesPanel>,
    /// Outcome series aligned to the panel's dates; enables the select stage.
    pub target: Option<Vec<f64>>,
}

/// Everything preprocessing produced, ready for reports and backtesting.
#[derive(Debug)]
pub struct PreprocessOutput {
    pub variant: String,
    pub features: FeatureMatrix,
    /// Training rows on the feature grid.
    pub train_len: usize,
    pub triage_plan: Option<TriagePlan>,
    pub cluster_plan: Option<ClusterPlan>,
    /// (query string, training zero fraction, flagged).
    pub combined_report: Vec<(String, f64, bool)>,
    pub denoise_models: Vec<DenoiseModel>,
    pub trend_decisions: Vec<TrendDecision>,
    pub trend_r2_after: Vec<f64>,
    pub predictors: Option<PredictorSet>,
}

fn r2_after_transform(series: &[f64], train_len: usize, action: TrendAction) -> f64 {
    let order = if action == TrendAction::Quadratic { 2 } else { 1 };
    let train = &series[..train_len.min(series.len())];
    if crate::stats::variance(train) <= 0.0 {
        return 0.0;
    }
    let rows: Vec<Vec<f64>> = (0..train.len())
        .map(|t| {
            let mut r = vec![1.0, t as f64];
            if order == 2 {
                r.push((t as f64) * (t as f64));
            }
            r
        })
        .collect();
    let Ok(fit) = crate::stats::Ols::fit(&crate::stats::Matrix::from_rows(&rows), train) else {
        return 0.0;
    };
    let c = crate::detrend::TrendCoefficients {
        mu: fit.coefficients[0],
        alpha: fit.coefficients[1],
        beta: fit.coefficients.get(2).copied(),
    };
    crate::detrend::trend_r2(train, &trend_values(&c, train.len())[..]).unwrap_or(0.0)
}

/// Runs triage, clustering + combination, denoising, detrending and
/// predictor selection in order, honoring the stage-skip options.
pub fn preprocess(
    panel: &SeriesPanel,
    sources: &PreprocessSources,
    config: &PipelineConfig,
    opts: &PreprocessOptions,
) -> Result<PreprocessOutput> {
    config.validate()?;
    if panel.n_keywords() == 0 || panel.n_weeks() == 0 {
        return Err(Error::input("empty panel"));
    }
    let n_weeks = panel.n_weeks();
    let train_len = n_weeks
        .checked_sub(config.split.test_weeks)
        .ok_or_else(|| Error::input("panel shorter than the held-out test window"))?;
    if train_len < config.denoise.window + 2 || train_len < 30 {
        return Err(Error::input("training period too short"));
    }

    let variant = opts.variant_label();

    if opts.raw {
        // Zero-filter only: every keyword dense enough to carry any signal,
        // untouched.
        let mut names = Vec::new();
        let mut values = Vec::new();
        for (k, series) in panel.keywords.iter().zip(&panel.values) {
            if zero_fraction(&series[..train_len])? <= config.triage.zero_high {
                names.push(k.clone());
                values.push(series.clone());
            }
        }
        if names.is_empty() {
            return Err(Error::input("zero filter removed every keyword"));
        }
        let features = FeatureMatrix::new(
            panel.location.clone(),
            panel.dates.clone(),
            names,
            values,
            panel.download_date,
        )?;
        let predictors = match &sources.target {
            Some(target) => Some(
                select_predictors(
                    &features,
                    target,
                    train_len,
                    config.select.collinearity_threshold,
                    config.select.cap,
                )
                .map_err(|e| stage_err("select", e))?,
            ),
            None => None,
        };
        return Ok(PreprocessOutput {
            variant,
            features,
            train_len,
            triage_plan: None,
            cluster_plan: None,
            combined_report: Vec::new(),
            denoise_models: Vec::new(),
            trend_decisions: Vec::new(),
            trend_r2_after: Vec::new(),
            predictors,
        });
    }

    // Triage.
    let plan = triage(
        panel,
        config.triage.dedup_threshold,
        config.triage.zero_low,
        config.triage.zero_high,
        train_len,
    )
    .map_err(|e| stage_err("triage", e))?;

    // Clustering and combination.
    let mut names: Vec<String> = plan.kept.clone();
    let mut values: Vec<Vec<f64>> = plan
        .kept
        .iter()
        .map(|k| panel.series(k).unwrap().to_vec())
        .collect();
    let mut cluster_plan = None;
    let mut combined_report = Vec::new();
    if !plan.to_cluster.is_empty() {
        let built = build_cluster_plan(panel, &plan.to_cluster, train_len, config.cluster.k_max_cap)
            .and_then(|p| {
                split_oversized(&p, panel, config.cluster.dominance, train_len, config.cluster.k_max_cap)
            })
            .map_err(|e| stage_err("cluster", e))?;
        let mode = match config.cluster.combine_mode {
            CombineModeName::Summed => CombineMode::Summed,
            CombineModeName::SimulatedUnion => {
                let world = sources.world.as_ref().ok_or_else(|| {
                    Error::config(
                        "cluster.combine_mode",
                        "simulated-union needs a world file (pass --world)",
                    )
                })?;
                CombineMode::SimulatedUnion {
                    world,
                    download_date: panel.download_date,
                }
            }
            CombineModeName::IngestedCombined => CombineMode::IngestedCombined {
                downloads: &sources.combined_downloads,
            },
        };
        for (cluster, query) in built.clusters.iter().zip(&built.query_strings) {
            let series =
                combine_series(panel, cluster, &mode).map_err(|e| stage_err("combine", e))?;
            let zf = zero_fraction(&series[..train_len])?;
            combined_report.push((query.clone(), zf, zf > config.cluster.flag_zero_fraction));
            names.push(query.clone());
            values.push(series);
        }
        cluster_plan = Some(built);
    }
    if names.is_empty() {
        return Err(Error::input("no usable series survived triage"));
    }

    // Denoising.
    let mut denoise_models = Vec::new();
    if !opts.skip_denoise {
        let grid = lambda_grid(
            config.denoise.lambda_min,
            config.denoise.lambda_max,
            config.denoise.lambda_points,
        );
        for (name, series) in names.iter().zip(&values) {
            let (lambda_star, train_rmse) =
                grid_search_lambda(&series[..train_len], config.denoise.window, &grid)
                    .map_err(|e| stage_err("denoise", Error::input(format!("`{name}`: {e}"))))?;
            denoise_models.push(DenoiseModel {
                keyword: name.clone(),
                lambda_star,
                train_rmse,
                is_noisy: false,
            });
        }
        gate_noisy(&mut denoise_models)?;
        for (model, series) in denoise_models.iter().zip(values.iter_mut()) {
            if model.is_noisy {
                *series = denoise_series(series, model, config.denoise.window, train_len)
                    .map_err(|e| stage_err("denoise", e))?;
            }
        }
    }

    // Detrending.
    let mut trend_decisions = Vec::new();
    let mut trend_r2_after = Vec::new();
    let mut dates = panel.dates.clone();
    let mut out_train_len = train_len;
    if !opts.skip_detrend {
        let mut transformed: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut any_difference = false;
        for (name, series) in names.iter().zip(&values) {
            let decision = classify_trend(&series[..train_len], name)
                .map_err(|e| stage_err("detrend", Error::Numerical(format!("`{name}`: {e}"))))?;
            let out = apply_detrend(series, &decision, train_len)
                .map_err(|e| stage_err("detrend", e))?;
            any_difference |= decision.action == TrendAction::Difference;
            trend_decisions.push(decision);
            transformed.push(out);
        }
        if any_difference {
            // Differencing loses week 0; realign every feature to dates[1..].
            dates = dates[1..].to_vec();
            out_train_len = train_len - 1;
            for (series, decision) in transformed.iter_mut().zip(&trend_decisions) {
                if decision.action != TrendAction::Difference {
                    series.remove(0);
                }
            }
        }
        for (series, decision) in transformed.iter().zip(&trend_decisions) {
            trend_r2_after.push(r2_after_transform(series, out_train_len, decision.action));
        }
        values = transformed;
    }

    let features = FeatureMatrix::new(
        panel.location.clone(),
        dates,
        names,
        values,
        panel.download_date,
    )?;

    // Selection, when a target is on hand.
    let predictors = match &sources.target {
        Some(target) => {
            let offset = panel.n_weeks() - features.n_weeks();
            let aligned = &target[offset..];
            Some(
                select_predictors(
                    &features,
                    aligned,
                    out_train_len,
                    config.select.collinearity_threshold,
                    config.select.cap,
                )
                .map_err(|e| stage_err("select", e))?,
            )
        }
        None => None,
    };

    Ok(PreprocessOutput {
        variant,
        features,
        train_len: out_train_len,
        triage_plan: Some(plan),
        cluster_plan,
        combined_report,
        denoise_models,
        trend_decisions,
        trend_r2_after,
        predictors,
    })
}

/// Writes the feature file plus every stage report into `dir`.
pub fn write_preprocess_outputs(
    out: &PreprocessOutput,
    panel: &SeriesPanel,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let features_path = dir.join(format!("{}.csv", out.variant));
    out.features.to_csv(fs::File::create(features_path)?)?;

    let reports = dir.join("reports");
    fs::create_dir_all(&reports)?;
    if let Some(plan) = &out.triage_plan {
        let train_len = out.train_len.min(panel.n_weeks());
        write_triage_report(
            plan,
            panel,
            train_len,
            fs::File::create(reports.join("triage_report.csv"))?,
        )?;
    }
    if let Some(plan) = &out.cluster_plan {
        crate::cluster::write_clusters_csv(plan, fs::File::create(reports.join("clusters.csv"))?)?;
        crate::cluster::write_queries_txt(plan, fs::File::create(reports.join("queries.txt"))?)?;
    }
    if !out.combined_report.is_empty() {
        let mut w = csv::Writer::from_writer(fs::File::create(reports.join("combined_report.csv"))?);
        w.write_record(["query", "zero_fraction", "flagged"])?;
        for (q, zf, flagged) in &out.combined_report {
            w.write_record([q.clone(), format!("{zf}"), flagged.to_string()])?;
        }
        w.flush()?;
    }
    if !out.denoise_models.is_empty() {
        crate::denoise::write_denoise_report(
            &out.denoise_models,
            fs::File::create(reports.join("denoise_report.csv"))?,
        )?;
    }
    if !out.trend_decisions.is_empty() {
        crate::detrend::write_trend_report(
            &out.trend_decisions,
            &out.trend_r2_after,
            fs::File::create(reports.join("trend_report.csv"))?,
        )?;
    }
    if let Some(predictors) = &out.predictors {
        write_predictors_csv(
            predictors,
            fs::File::create(reports.join(format!("predictors_{}.csv", panel.location)))?,
        )?;
    }
    Ok(())
}

/// One location's backtest inputs.
pub struct LocationInputs {
    pub location: String,
    pub dates: Vec<NaiveDate>,
    pub target: Vec<f64>,
    pub variants: BTreeMap<String, FeatureMatrix>,
}

/// Runs the (model x horizon x exog-variant) matrix for one location,
/// including the no-exog baseline. Predictor selection runs per variant on
/// training rows before any forecasting.
pub fn backtest_location(
    inputs: &LocationInputs,
    config: &PipelineConfig,
) -> Result<Vec<ForecastTrace>> {
    config.validate()?;
    // Common contiguous week grid across the target and every variant.
    let mut common: Vec<NaiveDate> = inputs.dates.clone();
    for fm in inputs.variants.values() {
        common.retain(|d| fm.dates.contains(d));
    }
    if common.len() < config.split.test_weeks + config.forecast.train_window + 53 {
        return Err(Error::input(format!(
            "only {} aligned weeks: not enough history for the window and lags",
            common.len()
        )));
    }
    let idx_of = |d: &NaiveDate| inputs.dates.iter().position(|x| x == d).unwrap();
    let target: Vec<f64> = common.iter().map(|d| inputs.target[idx_of(d)]).collect();
    let test_start = common.len() - config.split.test_weeks;

    let mut exog_sets = BTreeMap::new();
    for (name, fm) in &inputs.variants {
        let offset = common[0]
            .signed_duration_since(fm.dates[0])
            .num_days()
            .max(0) as usize
            / 7;
        let sliced = FeatureMatrix::new(
            fm.location.clone(),
            common.clone(),
            fm.names.clone(),
            fm.values
                .iter()
                .map(|col| col[offset..offset + common.len()].to_vec())
                .collect(),
            fm.download_date,
        )?;
        let selection = select_predictors(
            &sliced,
            &target,
            test_start,
            config.select.collinearity_threshold,
            config.select.cap,
        )
        .map_err(|e| stage_err(&format!("select[{name}]"), e))?;
        if selection.keywords.is_empty() {
            return Err(Error::numerical(format!(
                "variant `{name}`: no predictors survived selection"
            )));
        }
        exog_sets.insert(name.clone(), sliced.subset(&selection.keywords)?);
    }

    let mut tasks = Vec::new();
    let mut variant_names: Vec<String> = vec!["none".into()];
    variant_names.extend(exog_sets.keys().cloned());
    for variant in &variant_names {
        for model_name in &config.forecast.models {
            let mut model = ModelSpec::parse(model_name)?;
            if let ModelSpec::Argo { lags } = &mut model {
                *lags = config.forecast.argo_lags;
            }
            for &horizon in &config.forecast.horizons {
                tasks.push(ForecastTask {
                    location: inputs.location.clone(),
                    model: model.clone(),
                    horizon,
                    exog_variant: variant.clone(),
                    train_window: config.forecast.train_window,
                });
            }
        }
    }
    run_backtest(&common, &target, &exog_sets, &tasks, test_start)
}

/// Simple `date,value` series file.
pub fn write_target_csv(dates: &[NaiveDate], values: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    w.write_record(["date", "value"])?;
    for (d, v) in dates.iter().zip(values) {
        w.write_record([d.to_string(), format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_target_csv(path: &Path) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        dates.push(
            NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d")
                .map_err(|_| Error::input(format!("malformed date `{}`", &rec[0])))?,
        );
        values.push(
            rec[1]
                .parse()
                .map_err(|_| Error::input(format!("bad target value `{}`", &rec[1])))?,
        );
    }
    if dates.is_empty() {
        return Err(Error::input(format!("empty target file {}", path.display())));
    }
    Ok((dates, values))
}

/// Generates `locations` worlds (seed offset per location), their replicate
/// downloads and targets, under `out/<location>/`.
pub fn cmd_synth(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    config.validate()?;
    for loc in 0..config.synth.locations {
        let mut world_cfg = config.synth.world.clone();
        world_cfg.seed = config.synth.world.seed + loc as u64;
        let location = format!("L{loc:02}");
        let dir = out_dir.join(&location);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("world.toml"), world_cfg.to_toml())?;
        let world = generate_world(&world_cfg)?;
        for i in 0..config.synth.downloads {
            let date = config.synth.download_start + chrono::Days::new(i as u64);
            let mut panel = world.sample_download(date)?;
            panel.location = location.clone();
            let path = dir.join(format!("panel_{date}.csv"));
            panel.to_csv(fs::File::create(path)?)?;
        }
        let target = world.generate_target();
        write_target_csv(&world.dates, &target, &dir.join("target.csv"))?;
    }
    Ok(())
}

/// Outcome counters for the backtest command.
pub struct BacktestOutcome {
    pub locations: usize,
    pub cells: usize,
    pub failed_points: usize,
}

/// Runs the full matrix over every location directory under `root`, writing
/// traces, `report.csv` and `summary.json` into `out_dir`.
pub fn cmd_backtest(
    root: &Path,
    out_dir: &Path,
    config: &PipelineConfig,
    variants: &[String],
) -> Result<BacktestOutcome> {
    config.validate()?;
    let mut location_dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("target.csv").exists())
        .collect();
    location_dirs.sort();
    if location_dirs.is_empty() {
        return Err(Error::input(format!(
            "no location directories with target.csv under {}",
            root.display()
        )));
    }

    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir)?;
    let mut all_traces = Vec::new();
    let mut failed_points = 0;
    for dir in &location_dirs {
        let location = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (dates, target) = read_target_csv(&dir.join("target.csv"))?;
        let mut fms = BTreeMap::new();
        for v in variants {
            let path = dir.join(format!("{v}.csv"));
            if !path.exists() {
                return Err(Error::input(format!("missing feature file {}", path.display())));
            }
            fms.insert(v.clone(), FeatureMatrix::from_csv(&fs::read_to_string(path)?)?);
        }
        let inputs = LocationInputs {
            location: location.clone(),
            dates,
            target,
            variants: fms,
        };
        let traces = backtest_location(&inputs, config)?;
        for trace in &traces {
            failed_points += trace.n_failed();
            let name = format!(
                "trace_{}_{}_{}_{}.csv",
                trace.location, trace.model_id, trace.horizon, trace.exog_variant
            );
            crate::forecast::write_trace_csv(
                trace,
                Some(config.root_seed()),
                fs::File::create(traces_dir.join(name))?,
            )?;
        }
        all_traces.extend(traces);
    }

    let rows = summarize_traces(&all_traces)?;
    write_report_csv(
        &rows,
        Some(config.root_seed()),
        fs::File::create(out_dir.join("report.csv"))?,
    )?;
    let cells = summary_table(&rows)?;
    write_summary_json(
        &cells,
        Some(config.root_seed()),
        fs::File::create(out_dir.join("summary.json"))?,
    )?;
    Ok(BacktestOutcome {
        locations: location_dirs.len(),
        cells: all_traces.len(),
        failed_points,
    })
}

/// Re-aggregates trace files: summary tables, the peak/off season split and
/// fluctuation-test paths for every variant pair.
pub fn cmd_report(
    traces_dir: &Path,
    out_dir: &Path,
    config: &PipelineConfig,
    reference_variant: &str,
) -> Result<()> {
    config.validate()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(traces_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().starts_with("trace_"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::input(format!("no trace files under {}", traces_dir.display())));
    }
    let mut traces = Vec::new();
    for p in &paths {
        traces.push(crate::forecast::read_trace_csv(&fs::read_to_string(p)?)?);
    }
    fs::create_dir_all(out_dir)?;
    let rows = summarize_traces(&traces)?;
    write_report_csv(
        &rows,
        Some(config.root_seed()),
        fs::File::create(out_dir.join("report.csv"))?,
    )?;
    let cells = summary_table(&rows)?;
    write_summary_json(
        &cells,
        Some(config.root_seed()),
        fs::File::create(out_dir.join("summary.json"))?,
    )?;

    let season = crate::evalstats::season_split(&traces, &config.eval.peak_months, reference_variant)?;
    let mut w = csv::Writer::from_writer(fs::File::create(out_dir.join("season_split.csv"))?);
    w.write_record([
        "model",
        "horizon",
        "exog_variant",
        "season",
        "mean_mse",
        "re_vs_reference",
    ])?;
    for r in &season {
        w.write_record([
            r.model.clone(),
            r.horizon.to_string(),
            r.exog_variant.clone(),
            r.season.clone(),
            format!("{}", r.mean_mse),
            r.re_vs_reference.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    write_fluctuation_paths(&traces, config, out_dir)?;
    Ok(())
}

/// Average per-week squared error across locations, per variant, then the
/// rolling loss-differential path for every variant pair of each
/// (model, horizon).
fn write_fluctuation_paths(
    traces: &[ForecastTrace],
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<()> {
    use std::collections::BTreeSet;
    // (model, horizon) -> variant -> date -> (sum sq err, count)
    let mut grid: BTreeMap<(String, usize), BTreeMap<String, BTreeMap<NaiveDate, (f64, usize)>>> =
        BTreeMap::new();
    for t in traces {
        let by_variant = grid.entry((t.model_id.clone(), t.horizon)).or_default();
        let by_date = by_variant.entry(t.exog_variant.clone()).or_default();
        for p in &t.points {
            if let Some(y_hat) = p.y_hat {
                let e = by_date.entry(p.date).or_insert((0.0, 0));
                e.0 += (p.y_true - y_hat) * (p.y_true - y_hat);
                e.1 += 1;
            }
        }
    }
    for ((model, horizon), by_variant) in &grid {
        let variants: Vec<&String> = by_variant.keys().filter(|v| *v != "none").collect();
        for (i, a) in variants.iter().enumerate() {
            for b in &variants[i + 1..] {
                let dates_a: BTreeSet<NaiveDate> =
                    by_variant[*a].keys().copied().collect();
                let dates_b: BTreeSet<NaiveDate> =
                    by_variant[*b].keys().copied().collect();
                let common: Vec<NaiveDate> = dates_a.intersection(&dates_b).copied().collect();
                if common.len() < config.eval.fluctuation_window {
                    continue;
                }
                let loss = |v: &str| -> Vec<f64> {
                    common
                        .iter()
                        .map(|d| {
                            let (s, c) = by_variant[v][d];
                            s / c as f64
                        })
                        .collect()
                };
                let la = loss(a);
                let lb = loss(b);
                let path = crate::evalstats::fluctuation_statistic(
                    &la,
                    &lb,
                    config.eval.fluctuation_window,
                )?;
                let cv =
                    config.fluctuation_critical_value(config.eval.fluctuation_window, common.len());
                let name = format!("fluctuation_{model}_h{horizon}_{a}_vs_{b}.csv");
                let mut w = csv::Writer::from_writer(fs::File::create(out_dir.join(name))?);
                w.write_record(["window_end", "statistic", "upper", "lower"])?;
                for (k, stat) in path.iter().enumerate() {
                    let end_date = common[k + config.eval.fluctuation_window - 1];
                    w.write_record([
                        end_date.to_string(),
                        format!("{stat}"),
                        format!("{cv}"),
                        format!("{}", -cv),
                    ])?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

//! Rolling-origin forecasting harness.
//!
//! Availability convention: standing at issue week t, the target is known
//! through t-1 (one-week reporting delay) and exogenous search predictors
//! through t. Horizon 0 nowcasts week t; horizons 1-3 extend the recursion
//! with exogenous values held at the issue week.

pub mod arima;
pub mod argo;
pub mod plugin;

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;

pub use arima::{forecast_arima, ArimaForecast};
pub use argo::{fit_argo, lasso_cv, lasso_fit, LassoModel};
pub use plugin::{build_plugin_csv, run_plugin, WindowPolicy};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::Matrix;

/// A forecasting model the harness knows how to drive.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Weekly-differenced regression with ARMA(1,1) errors.
    Arimax,
    /// Seasonally (lag-52) differenced variant.
    Sarimax,
    /// 52 target lags plus exog under an L1 penalty.
    Argo { lags: usize },
    /// Last-observed-value persistence.
    Naive,
    /// External subprocess speaking the design-matrix CSV protocol.
    Plugin {
        id: String,
        program: String,
        args: Vec<String>,
        expanding_min: Option<usize>,
    },
}

impl ModelSpec {
    pub fn id(&self) -> String {
        match self {
            ModelSpec::Arimax => "arimax".into(),
            ModelSpec::Sarimax => "sarimax".into(),
            ModelSpec::Argo { .. } => "argo".into(),
            ModelSpec::Naive => "naive".into(),
            ModelSpec::Plugin { id, .. } => id.clone(),
        }
    }

    pub fn parse(name: &str) -> Result<ModelSpec> {
        match name {
            "arimax" => Ok(ModelSpec::Arimax),
            "sarimax" => Ok(ModelSpec::Sarimax),
            "argo" => Ok(ModelSpec::Argo { lags: 52 }),
            "naive" => Ok(ModelSpec::Naive),
            other => Err(Error::config(
                "models",
                format!("unknown model `{other}` (expected arimax|sarimax|argo|naive)"),
            )),
        }
    }
}

/// One backtest cell: a (location, model, horizon, exog-variant) tuple.
#[derive(Debug, Clone)]
pub struct ForecastTask {
    pub location: String,
    pub model: ModelSpec,
    pub horizon: usize,
    /// Exog set label; "none" runs the model without exogenous inputs.
    pub exog_variant: String,
    pub train_window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub date: NaiveDate,
    pub y_true: f64,
    pub y_hat: Option<f64>,
    pub flags: String,
}

/// Forecast path for one backtest cell.
#[derive(Debug, Clone)]
pub struct ForecastTrace {
    pub location: String,
    pub model_id: String,
    pub horizon: usize,
    pub exog_variant: String,
    pub points: Vec<TracePoint>,
}

impl ForecastTrace {
    /// (truth, forecast) pairs for the weeks that produced a forecast.
    pub fn paired(&self) -> (Vec<f64>, Vec<f64>) {
        let mut t = Vec::new();
        let mut f = Vec::new();
        for p in &self.points {
            if let Some(y_hat) = p.y_hat {
                t.push(p.y_true);
                f.push(y_hat);
            }
        }
        (t, f)
    }

    pub fn n_failed(&self) -> usize {
        self.points.iter().filter(|p| p.y_hat.is_none()).count()
    }
}

fn exog_matrix(fm: &FeatureMatrix) -> Matrix<f64> {
    let rows: Vec<Vec<f64>> = (0..fm.n_weeks())
        .map(|t| fm.values.iter().map(|col| col[t]).collect())
        .collect();
    Matrix::from_rows(&rows)
}

fn forecast_once(
    model: &ModelSpec,
    dates: &[NaiveDate],
    target: &[f64],
    exog: Option<(&[String], &Matrix<f64>)>,
    issue: usize,
    horizon: usize,
    window: usize,
) -> Result<(f64, String)> {
    match model {
        ModelSpec::Arimax | ModelSpec::Sarimax => {
            if issue < window {
                return Err(Error::input("not enough history before the test start"));
            }
            let y_window = &target[issue - window..issue];
            let x_window = match exog {
                Some((_, x)) => {
                    let rows: Vec<Vec<f64>> = (issue - window..=issue)
                        .map(|t| x.row(t).to_vec())
                        .collect();
                    Matrix::from_rows(&rows)
                }
                None => Matrix::zeros(window + 1, 0),
            };
            let lag = if matches!(model, ModelSpec::Sarimax) { 52 } else { 1 };
            let fc = forecast_arima(y_window, &x_window, horizon, lag)?;
            let flags = if fc.fallback { "fallback".into() } else { String::new() };
            Ok((fc.value, flags))
        }
        ModelSpec::Argo { lags } => {
            let x_hist = exog.map(|(_, x)| {
                let rows: Vec<Vec<f64>> = (0..=issue).map(|t| x.row(t).to_vec()).collect();
                Matrix::from_rows(&rows)
            });
            let value = fit_argo(&target[..issue], x_hist.as_ref(), horizon, *lags, window)?;
            Ok((value, String::new()))
        }
        ModelSpec::Naive => {
            if issue == 0 {
                return Err(Error::input("no history for persistence"));
            }
            Ok((target[issue - 1], String::new()))
        }
        ModelSpec::Plugin {
            program,
            args,
            expanding_min,
            ..
        } => {
            let policy = match expanding_min {
                Some(min) => WindowPolicy::Expanding { min: *min },
                None => WindowPolicy::Rolling(window),
            };
            let csv = build_plugin_csv(dates, target, exog, issue, horizon, policy)?;
            let value = run_plugin(program, args, &csv, horizon)?;
            Ok((value, String::new()))
        }
    }
}

/// Runs every task over the test weeks. Fit errors are recorded in the
/// trace (empty forecast plus an error flag) and the run continues.
pub fn run_backtest(
    dates: &[NaiveDate],
    target: &[f64],
    exog_sets: &BTreeMap<String, FeatureMatrix>,
    tasks: &[ForecastTask],
    test_start: usize,
) -> Result<Vec<ForecastTrace>> {
    if target.len() != dates.len() {
        return Err(Error::input("target and date grid differ in length"));
    }
    if test_start >= dates.len() {
        return Err(Error::input("test start beyond the data"));
    }
    let mut matrices: BTreeMap<String, (Vec<String>, Matrix<f64>)> = BTreeMap::new();
    for (name, fm) in exog_sets {
        if fm.dates != dates {
            return Err(Error::input(format!(
                "exog set `{name}` is not aligned to the target week grid"
            )));
        }
        matrices.insert(name.clone(), (fm.names.clone(), exog_matrix(fm)));
    }

    let mut traces = Vec::with_capacity(tasks.len());
    for task in tasks {
        let exog = if task.exog_variant == "none" {
            None
        } else {
            let (names, x) = matrices.get(&task.exog_variant).ok_or_else(|| {
                Error::input(format!("unknown exog variant `{}`", task.exog_variant))
            })?;
            Some((names.as_slice(), x))
        };
        let mut points = Vec::new();
        for issue in test_start..dates.len() {
            let tau = issue + task.horizon;
            if tau >= dates.len() {
                break;
            }
            let (y_hat, flags) = match forecast_once(
                &task.model,
                dates,
                target,
                exog,
                issue,
                task.horizon,
                task.train_window,
            ) {
                Ok((v, flags)) => (Some(v), flags),
                Err(e) => (None, format!("error: {e}")),
            };
            points.push(TracePoint {
                date: dates[tau],
                y_true: target[tau],
                y_hat,
                flags,
            });
        }
        traces.push(ForecastTrace {
            location: task.location.clone(),
            model_id: task.model.id(),
            horizon: task.horizon,
            exog_variant: task.exog_variant.clone(),
            points,
        });
    }
    Ok(traces)
}

/// Writes `trace_<location>_<model>_<h>.csv`: `date,y_true,y_hat,flags`.
pub fn write_trace_csv<W: Write>(trace: &ForecastTrace, seed: Option<u64>, mut out: W) -> Result<()> {
    if let Some(seed) = seed {
        writeln!(out, "# seed={seed}")?;
    }
    writeln!(
        out,
        "# location={} model={} horizon={} exog={}",
        trace.location, trace.model_id, trace.horizon, trace.exog_variant
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "y_true", "y_hat", "flags"])?;
    for p in &trace.points {
        w.write_record([
            p.date.to_string(),
            format!("{}", p.y_true),
            p.y_hat.map(|v| format!("{v}")).unwrap_or_default(),
            p.flags.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace file written by [`write_trace_csv`].
pub fn read_trace_csv(text: &str) -> Result<ForecastTrace> {
    let mut location = String::new();
    let mut model_id = String::new();
    let mut horizon = 0usize;
    let mut exog_variant = String::from("none");
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        for part in line.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = part.split_once('=') {
                match k {
                    "location" => location = v.to_string(),
                    "model" => model_id = v.to_string(),
                    "horizon" => horizon = v.parse().unwrap_or(0),
                    "exog" => exog_variant = v.to_string(),
                    _ => {}
                }
            }
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let date = NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d")
            .map_err(|_| Error::input(format!("malformed date `{}`", &rec[0])))?;
        let y_true: f64 = rec[1]
            .parse()
            .map_err(|_| Error::input("trace csv: bad y_true"))?;
        let y_hat = if rec[2].is_empty() {
            None
        } else {
            Some(
                rec[2]
                    .parse()
                    .map_err(|_| Error::input("trace csv: bad y_hat"))?,
            )
        };
        points.push(TracePoint {
            date,
            y_true,
            y_hat,
            flags: rec.get(3).unwrap_or("").to_string(),
        });
    }
    Ok(ForecastTrace {
        location,
        model_id,
        horizon,
        exog_variant,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn weekly(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 5).unwrap();
        (0..n).map(|i| start + chrono::Days::new(7 * i as u64)).collect()
    }

    fn task(model: ModelSpec, horizon: usize, variant: &str) -> ForecastTask {
        ForecastTask {
            location: "SYN".into(),
            model,
            horizon,
            exog_variant: variant.into(),
            train_window: 104,
        }
    }

    #[test]
    fn single_week_single_model_gives_length_one_trace() {
        let dates = weekly(106);
        let target: Vec<f64> = (0..106).map(|t| t as f64).collect();
        let traces = run_backtest(
            &dates,
            &target,
            &BTreeMap::new(),
            &[task(ModelSpec::Naive, 0, "none")],
            105,
        )
        .unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].points.len(), 1);
        assert_eq!(traces[0].points[0].y_hat, Some(104.0));
    }

    #[test]
    fn persistence_plugin_matches_naive_oracle() {
        // The plug-in reads the CSV and echoes the last known target value
        // once per blank-target row.
        let script = r#"awk -F, 'NR>1 { if ($2 != "") last=$2; else print last }'"#;
        let plugin = ModelSpec::Plugin {
            id: "persist".into(),
            program: "sh".into(),
            args: vec!["-c".into(), script.into()],
            expanding_min: None,
        };
        let mut rng = StdRng::seed_from_u64(5);
        let n = 120;
        let dates = weekly(n);
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        for h in [0usize, 2] {
            let traces = run_backtest(
                &dates,
                &target,
                &BTreeMap::new(),
                &[task(plugin.clone(), h, "none"), task(ModelSpec::Naive, h, "none")],
                110,
            )
            .unwrap();
            assert_eq!(traces[0].points.len(), traces[1].points.len());
            assert!(!traces[0].points.is_empty());
            for (a, b) in traces[0].points.iter().zip(&traces[1].points) {
                assert_eq!(a.y_hat, b.y_hat, "h={h}");
                assert!(a.flags.is_empty(), "{}", a.flags);
            }
        }
    }

    #[test]
    fn failed_cells_are_recorded_and_run_continues() {
        // Constant target makes the argo window degenerate.
        let dates = weekly(200);
        let target = vec![5.0; 200];
        let traces = run_backtest(
            &dates,
            &target,
            &BTreeMap::new(),
            &[
                task(ModelSpec::Argo { lags: 52 }, 0, "none"),
                task(ModelSpec::Naive, 0, "none"),
            ],
            190,
        )
        .unwrap();
        assert_eq!(traces[0].n_failed(), traces[0].points.len());
        assert!(traces[0].points.iter().all(|p| p.flags.starts_with("error:")));
        assert_eq!(traces[1].n_failed(), 0);
    }

    #[test]
    fn future_mutations_do_not_change_issued_forecasts() {
        let mut rng = StdRng::seed_from_u64(11);
        let n = 240;
        let dates = weekly(n);
        let mut level = 50.0;
        let target: Vec<f64> = (0..n)
            .map(|_| {
                level += rng.random_range(-2.0..2.0);
                level
            })
            .collect();
        let exog_col: Vec<f64> = target.iter().map(|v| v * 0.5 + 1.0).collect();
        let fm = FeatureMatrix::new(
            "SYN",
            dates.clone(),
            vec!["x".into()],
            vec![exog_col.clone()],
            NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        )
        .unwrap();
        let mut exog_sets = BTreeMap::new();
        exog_sets.insert("prep".to_string(), fm);

        let issue = 230;
        let tasks: Vec<ForecastTask> = [
            ModelSpec::Arimax,
            ModelSpec::Sarimax,
            ModelSpec::Argo { lags: 52 },
            ModelSpec::Naive,
        ]
        .into_iter()
        .map(|m| {
            let variant = if matches!(m, ModelSpec::Naive) { "none" } else { "prep" };
            task(m, 1, variant)
        })
        .collect();

        let base = run_backtest(&dates, &target, &exog_sets, &tasks, issue).unwrap();

        // Corrupt everything strictly after the issue week.
        let mut target_mut = target.clone();
        let mut exog_mut = exog_col.clone();
        for t in issue + 1..n {
            target_mut[t] = 0.0;
            exog_mut[t] = 0.0;
        }
        let fm_mut = FeatureMatrix::new(
            "SYN",
            dates.clone(),
            vec!["x".into()],
            vec![exog_mut],
            NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        )
        .unwrap();
        let mut exog_sets_mut = BTreeMap::new();
        exog_sets_mut.insert("prep".to_string(), fm_mut);
        let mutated = run_backtest(&dates, &target_mut, &exog_sets_mut, &tasks, issue).unwrap();

        for (a, b) in base.iter().zip(&mutated) {
            assert_eq!(
                a.points[0].y_hat, b.points[0].y_hat,
                "model {} leaked future information",
                a.model_id
            );
        }
    }

    #[test]
    fn trace_csv_round_trips() {
        let trace = ForecastTrace {
            location: "US-GA".into(),
            model_id: "arimax".into(),
            horizon: 2,
            exog_variant: "prep".into(),
            points: vec![
                TracePoint {
                    date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
                    y_true: 4.5,
                    y_hat: Some(4.25),
                    flags: String::new(),
                },
                TracePoint {
                    date: NaiveDate::from_ymd_opt(2023, 1, 8).unwrap(),
                    y_true: 5.5,
                    y_hat: None,
                    flags: "error: numerical error: x".into(),
                },
            ],
        };
        let mut buf = Vec::new();
        write_trace_csv(&trace, Some(42), &mut buf).unwrap();
        let back = read_trace_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.location, "US-GA");
        assert_eq!(back.model_id, "arimax");
        assert_eq!(back.horizon, 2);
        assert_eq!(back.exog_variant, "prep");
        assert_eq!(back.points, trace.points);
    }
}

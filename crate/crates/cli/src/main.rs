//! Pipeline driver: simulate worlds, ingest exports, preprocess panels,
//! backtest forecasting models and aggregate reports.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure (including backtests where forecast cells failed).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use trendpipe::config::PipelineConfig;
use trendpipe::error::Error;
use trendpipe::pipeline::{
    self, PreprocessOptions, PreprocessSources, read_target_csv,
};
use trendpipe::synthgen::{generate_world, WorldConfig};
use trendpipe::SeriesPanel;

#[derive(Parser)]
#[command(
    name = "trendpipe",
    about = "Preprocessing and forecasting toolkit for weekly search-interest panels",
    version
)]
struct Cli {
    /// Write a default pipeline config to this path and exit.
    #[arg(long, value_name = "PATH", global = true)]
    init_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline config TOML; defaults apply for missing fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Root seed override recorded in every report header.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_toml(&fs::read_to_string(path)?)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
            cfg.synth.world.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic worlds, replicate downloads and targets.
    ///
    /// Defaults: 200 keywords, 1000 weeks, 27 replicate downloads per
    /// location. Output layout: OUT/<location>/{world.toml, panel_<date>.csv,
    /// target.csv}.
    Synth {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Number of locations (worlds with consecutive seeds).
        #[arg(long)]
        locations: Option<usize>,
        /// Replicate downloads per location.
        #[arg(long)]
        downloads: Option<usize>,
    },
    /// Parse an "interest over time" CSV export into the internal panel
    /// serialization (date,keyword,value,location,download_date).
    Ingest {
        /// Exported CSV file.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Region code recorded on the panel.
        #[arg(long)]
        location: String,
        /// Calendar date of the download (YYYY-MM-DD).
        #[arg(long, value_name = "DATE")]
        download_date: NaiveDate,
        /// Output panel CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run triage -> cluster -> combine -> denoise -> detrend -> select on a
    /// panel, writing the feature file and every stage report.
    ///
    /// Stage-skip flags produce the cumulative ablation variants:
    /// --skip-denoise --skip-detrend gives "clustering", --skip-detrend
    /// gives "denoising", no skips gives "detrending", --raw bypasses all
    /// preprocessing except the zero filter.
    Preprocess {
        #[command(flatten)]
        config: ConfigArg,
        /// Input panel (internal serialization).
        #[arg(long, value_name = "FILE")]
        panel: PathBuf,
        /// World config TOML enabling simulated-union combination.
        #[arg(long, value_name = "FILE")]
        world: Option<PathBuf>,
        /// Combined "+"-query downloads for ingested-combined mode.
        #[arg(long, value_name = "FILE")]
        combined: Vec<PathBuf>,
        /// Target series (date,value) enabling predictor selection.
        #[arg(long, value_name = "FILE")]
        target: Option<PathBuf>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Skip the denoising stage.
        #[arg(long)]
        skip_denoise: bool,
        /// Skip the detrending stage.
        #[arg(long)]
        skip_detrend: bool,
        /// Zero filter only; no clustering, denoising or detrending.
        #[arg(long)]
        raw: bool,
        /// Feature-file name override (defaults to the variant label).
        #[arg(long)]
        variant: Option<String>,
    },
    /// Backtest every (model x horizon x exog-variant) cell, including the
    /// no-exog baseline, over ROOT/<location>/ directories.
    Backtest {
        #[command(flatten)]
        config: ConfigArg,
        /// Root directory holding <location>/target.csv and feature files.
        #[arg(long, value_name = "DIR")]
        root: PathBuf,
        /// Output directory for traces, report.csv and summary.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Exog variant feature files to use (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "detrending")]
        variants: Vec<String>,
    },
    /// Re-aggregate written traces: summary tables, the peak/off season
    /// split and fluctuation-test paths.
    Report {
        #[command(flatten)]
        config: ConfigArg,
        /// Directory of trace_*.csv files.
        #[arg(long, value_name = "DIR")]
        traces: PathBuf,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Variant the season split compares against.
        #[arg(long, default_value = "clustering")]
        reference_variant: String,
    },
    /// Regenerate the quadratic-variant unit-root critical value table.
    GenAdfTable {
        #[arg(long, default_value_t = 20240811)]
        seed: u64,
        #[arg(long, default_value_t = 50000)]
        replications: usize,
        /// Output CSV path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(path) = &cli.init_config {
        fs::write(path, default_config_template())?;
        eprintln!("wrote default config to {}", path.display());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Error::input("no subcommand given (see --help)"));
    };
    match command {
        Command::Synth {
            config,
            out,
            locations,
            downloads,
        } => {
            let mut cfg = config.load()?;
            if let Some(n) = locations {
                cfg.synth.locations = n;
            }
            if let Some(n) = downloads {
                cfg.synth.downloads = n;
            }
            cfg.validate()?;
            pipeline::cmd_synth(&cfg, &out)?;
            eprintln!(
                "wrote {} location(s) x {} download(s) under {}",
                cfg.synth.locations,
                cfg.synth.downloads,
                out.display()
            );
            Ok(())
        }
        Command::Ingest {
            input,
            location,
            download_date,
            out,
        } => {
            let text = fs::read_to_string(&input)?;
            let panel = trendpipe::parse_trends_csv(&text, &location, download_date)?;
            panel.to_csv(fs::File::create(&out)?)?;
            eprintln!(
                "parsed {} keyword(s) x {} week(s) into {}",
                panel.n_keywords(),
                panel.n_weeks(),
                out.display()
            );
            Ok(())
        }
        Command::Preprocess {
            config,
            panel,
            world,
            combined,
            target,
            out,
            skip_denoise,
            skip_detrend,
            raw,
            variant,
        } => {
            let cfg = config.load()?;
            let panel = SeriesPanel::from_csv(&fs::read_to_string(&panel)?)?;
            let mut sources = PreprocessSources::default();
            if let Some(path) = world {
                let world_cfg = WorldConfig::from_toml(&fs::read_to_string(path)?)?;
                sources.world = Some(generate_world(&world_cfg)?);
            }
            for path in combined {
                sources
                    .combined_downloads
                    .push(SeriesPanel::from_csv(&fs::read_to_string(path)?)?);
            }
            if let Some(path) = target {
                let (dates, values) = read_target_csv(&path)?;
                if dates != panel.dates {
                    return Err(Error::input("target dates do not match the panel grid"));
                }
                sources.target = Some(values);
            }
            let opts = PreprocessOptions {
                skip_denoise,
                skip_detrend,
                raw,
                variant_name: variant,
            };
            let output = pipeline::preprocess(&panel, &sources, &cfg, &opts)?;
            pipeline::write_preprocess_outputs(&output, &panel, &out)?;
            eprintln!(
                "variant `{}`: {} feature(s) over {} week(s) -> {}",
                output.variant,
                output.features.names.len(),
                output.features.n_weeks(),
                out.display()
            );
            Ok(())
        }
        Command::Backtest {
            config,
            root,
            out,
            variants,
        } => {
            let cfg = config.load()?;
            fs::create_dir_all(&out)?;
            let outcome = pipeline::cmd_backtest(&root, &out, &cfg, &variants)?;
            eprintln!(
                "backtested {} location(s), {} cell(s), {} failed point(s) -> {}",
                outcome.locations,
                outcome.cells,
                outcome.failed_points,
                out.display()
            );
            if outcome.failed_points > 0 {
                return Err(Error::numerical(format!(
                    "{} forecast point(s) failed (see trace flags)",
                    outcome.failed_points
                )));
            }
            Ok(())
        }
        Command::Report {
            config,
            traces,
            out,
            reference_variant,
        } => {
            let cfg = config.load()?;
            pipeline::cmd_report(&traces, &out, &cfg, &reference_variant)?;
            eprintln!("aggregated reports -> {}", out.display());
            Ok(())
        }
        Command::GenAdfTable {
            seed,
            replications,
            out,
        } => {
            let rows =
                trendpipe::detrend::generate_quadratic_cv_table(seed, replications, &[100, 250, 500])?;
            let mut text = String::new();
            text.push_str(
                "# Monte Carlo critical values for the quadratic-deterministics unit-root t-statistic.\n",
            );
            text.push_str(&format!(
                "# {replications} Gaussian random-walk replications per size, seed {seed}.\n"
            ));
            text.push_str("n,cv_1pct,cv_5pct,cv_10pct\n");
            for r in rows {
                text.push_str(&format!(
                    "{},{:.5},{:.5},{:.5}\n",
                    r.n, r.cv_1pct, r.cv_5pct, r.cv_10pct
                ));
            }
            fs::write(&out, text)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}

/// Commented default configuration, suitable as a starting point.
fn default_config_template() -> String {
    let mut out = String::from(
        "# trendpipe pipeline configuration. Every field is optional;\n\
         # missing fields take the defaults shown here.\n\n",
    );
    for line in PipelineConfig::default().to_toml().lines() {
        // The fluctuation bands are literature constants, not ours.
        if line.starts_with("fluctuation_critical_values") {
            out.push_str(
                "# Two-sided 5% critical values for the fluctuation path,\n\
                 # indexed by mu = window / evaluation length.\n\
                 # Source: Giacomini & Rossi (2010), Table I.\n",
            );
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

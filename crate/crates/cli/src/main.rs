use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use radiometrics::eval::{emit_report, evaluate, rmse_csv};
use radiometrics::geo_scene::Scene;
use radiometrics::io::{self, Ingested};
use radiometrics::pipeline::{
    hyper_search, predict, prepare, train_model, MetricKind, ModelBundle, PipelineConfig,
};
use radiometrics::synth::{emit_dataset, generate_measurements, generate_scene};
use radiometrics::{Error, Result};

#[derive(Parser)]
#[command(name = "radiometrics", version, about = "LTE radio-metric prediction with geometry-aware neural correction")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured metric.
    #[arg(long, global = true, value_enum)]
    metric: Option<Metric>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Rsrp,
    Rsrq,
    Rssi,
}

impl From<Metric> for MetricKind {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Rsrp => MetricKind::Rsrp,
            Metric::Rsrq => MetricKind::Rsrq,
            Metric::Rssi => MetricKind::Rssi,
        }
    }
}

#[derive(Args)]
struct DataArg {
    /// Directory holding measurements.csv, buildings.geojson and terrain.asc.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitChoice {
    Test,
    Validation,
    Train,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city and measurements into a data directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured sample count.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Validate measurements against the scene and log dropped rows.
    Ingest {
        #[command(flatten)]
        data: DataArg,
        /// Drop log CSV (default: <data>/ingest_log.csv).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write the engineered feature table.
    Features {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a correction model and save its bundle.
    Train {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: PathBuf,
        /// Blind-test geohash cells, comma separated.
        #[arg(long, value_delimiter = ',')]
        holdout_geohash: Option<Vec<String>>,
    },
    /// Random hyperparameter search; writes trials.csv and best.toml.
    Search {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_delimiter = ',')]
        holdout_geohash: Option<Vec<String>>,
    },
    /// Apply a trained bundle to the measurements.
    Predict {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// RMSE breakdown and density curves for one split.
    Evaluate {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
    /// Write transmitter-to-UE rays colored by line-of-sight class.
    ExportKml {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::new(cli.metric.map_or(MetricKind::Rsrp, Into::into)),
    };
    if let Some(m) = cli.metric {
        cfg.metric = m.into();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(dir: &Path, cfg: &PipelineConfig, metric: Option<MetricKind>) -> Result<(Scene, Ingested)> {
    let scene = io::load_scene(dir)?;
    let ing = io::ingest(&dir.join(io::MEASUREMENTS_FILE), &scene, &cfg.feature_options(), metric)?;
    Ok((scene, ing))
}

fn require_rows(ing: &Ingested) -> Result<()> {
    match ing.notice() {
        Some(n) => Err(Error::InvalidInput(format!("no valid rows: {n}"))),
        None => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Synth { out: dir, samples } => {
            let mut s = cfg.synth.clone().unwrap_or_default();
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            if let Some(n) = samples {
                s.samples = n;
            }
            let scene = generate_scene(&s)?;
            let recs = generate_measurements(&scene, &s)?;
            emit_dataset(&dir, &scene, &recs)?;
            let _ = writeln!(
                out,
                "wrote {} records and {} buildings to {}",
                recs.len(),
                scene.buildings().len(),
                dir.display()
            );
        }
        Command::Ingest { data, log } => {
            let (_, ing) = load(&data.data, &cfg, Some(cfg.metric))?;
            let log = log.unwrap_or_else(|| data.data.join("ingest_log.csv"));
            io::write_drop_log(&log, &ing.dropped)?;
            if let Some(n) = ing.notice() {
                let _ = writeln!(out, "notice: {n}");
            }
            let _ = writeln!(
                out,
                "rows {} kept {} dropped {} (log: {})",
                ing.total_rows,
                ing.records.len(),
                ing.dropped.len(),
                log.display()
            );
            require_rows(&ing)?;
        }
        Command::Features { data, out: path } => {
            let (_, ing) = load(&data.data, &cfg, None)?;
            require_rows(&ing)?;
            io::write_features(&path, &ing.records, &ing.features)?;
            let _ = writeln!(out, "wrote features for {} records to {}", ing.records.len(), path.display());
        }
        Command::Train {
            data,
            out: dir,
            holdout_geohash,
        } => {
            let mut cfg = cfg;
            if let Some(h) = holdout_geohash {
                cfg.split.holdout = h;
            }
            let (scene, ing) = load(&data.data, &cfg, Some(cfg.metric))?;
            require_rows(&ing)?;
            let model = train_model(&ing.records, &scene, &cfg, None)?;
            model.bundle.save(&dir)?;
            let s = &model.bundle.summary;
            let _ = writeln!(
                out,
                "trained {:?}: train {} / validation {} / test {} records, best epoch {}, train rmse {:.3} dB, validation rmse {} -> {}",
                cfg.metric,
                s.train_records,
                s.validation_records,
                s.test_records,
                s.best_epoch,
                s.train_rmse,
                s.validation_rmse.map_or("n/a".into(), |v| format!("{v:.3} dB")),
                dir.display()
            );
        }
        Command::Search {
            data,
            out: dir,
            trials,
            holdout_geohash,
        } => {
            let mut cfg = cfg;
            if let Some(h) = holdout_geohash {
                cfg.split.holdout = h;
            }
            let (scene, ing) = load(&data.data, &cfg, Some(cfg.metric))?;
            require_rows(&ing)?;
            let prepared = prepare(&ing.records, &scene, &cfg, None)?;
            let outcome = hyper_search(&prepared, &cfg, trials)?;
            let mut csv = String::from("trial,trunk,head,batch_size,learning_rate,weight_decay,max_epochs,validation_rmse,status\n");
            let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            for t in &outcome.trials {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    t.trial,
                    join(&t.trunk),
                    join(&t.head),
                    t.batch_size,
                    t.learning_rate,
                    t.weight_decay,
                    t.max_epochs,
                    t.validation_rmse.map(|v| v.to_string()).unwrap_or_default(),
                    t.status
                ));
            }
            write_file(&dir.join("trials.csv"), &csv)?;
            write_file(&dir.join("best.toml"), &outcome.best.to_toml_string())?;
            let _ = writeln!(
                out,
                "best trial {} of {} (validation rmse {:.3} dB) -> {}",
                outcome.best_trial,
                trials,
                outcome.trials[outcome.best_trial].validation_rmse.unwrap_or(f64::NAN),
                dir.display()
            );
        }
        Command::Predict { data, model, out: path } => {
            let bundle = ModelBundle::load(&model)?;
            let (scene, ing) = load(&data.data, &cfg, None)?;
            require_rows(&ing)?;
            let preds = predict(&bundle, &ing.records, &scene, None)?;
            let mut csv = String::from("record_id,target,prediction,estimate,alpha_db,indoor,los_class\n");
            for p in &preds.predictions {
                let los = match p.los {
                    radiometrics::geo_scene::LosClass::Los => "LOS",
                    radiometrics::geo_scene::LosClass::Nlos => "NLOS",
                    radiometrics::geo_scene::LosClass::LosTentative => "LOS_TENTATIVE",
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p.record_id,
                    p.target.map(|t| t.to_string()).unwrap_or_default(),
                    p.prediction,
                    p.beta_dbm,
                    p.alpha_db,
                    p.indoor,
                    los
                ));
            }
            write_file(&path, &csv)?;
            let _ = writeln!(
                out,
                "predicted {} records ({} skipped) -> {}",
                preds.predictions.len(),
                preds.skipped.len(),
                path.display()
            );
        }
        Command::Evaluate {
            data,
            model,
            out: dir,
            split,
        } => {
            let bundle = ModelBundle::load(&model)?;
            let (scene, ing) = load(&data.data, &cfg, Some(bundle.metric))?;
            require_rows(&ing)?;
            let m = &bundle.split;
            let label = |id: u64| -> Option<&str> {
                if m.test_ids.binary_search(&id).is_ok() {
                    Some("test")
                } else if m.validation_ids.binary_search(&id).is_ok() {
                    Some("validation")
                } else if m.train_ids.binary_search(&id).is_ok() {
                    Some("train")
                } else {
                    None
                }
            };
            let wanted = |l: &str| match split {
                SplitChoice::All => true,
                SplitChoice::Test => l == "test",
                SplitChoice::Validation => l == "validation",
                SplitChoice::Train => l == "train",
            };
            let records: Vec<_> = ing
                .records
                .iter()
                .filter(|r| label(r.record_id).is_some_and(wanted))
                .cloned()
                .collect();
            if records.is_empty() {
                return Err(Error::InvalidInput("no records in the requested split".into()));
            }
            let cells: std::collections::HashMap<u64, String> = records
                .iter()
                .map(|r| Ok((r.record_id, r.cell()?)))
                .collect::<Result<_>>()?;
            let preds = predict(&bundle, &records, &scene, None)?;
            // blind-test rows are reported per cell, other splits as a whole
            let report = evaluate(bundle.metric, &preds.predictions, |id| match label(id) {
                Some("test") => cells[&id].clone(),
                Some(l) => l.to_string(),
                None => "unassigned".to_string(),
            })?;
            emit_report(&report, &dir)?;
            let _ = write!(out, "{}", rmse_csv(&report));
        }
        Command::ExportKml { data, out: path } => {
            let (scene, ing) = load(&data.data, &cfg, None)?;
            require_rows(&ing)?;
            let rays: Vec<_> = ing.records.iter().zip(&ing.features).map(|(r, f)| (r, f.los_class)).collect();
            io::write_kml(&path, &scene, &rays)?;
            let _ = writeln!(out, "wrote {} placemarks to {}", rays.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::from(1)
        }
    }
}

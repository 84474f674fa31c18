//! Command-line front end: ingestion, model files and reports.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 model mismatch.

pub mod ingest;
pub mod model_file;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::counting::{
    build_dataset_with, cross_validate, detector_sweep, AlgorithmSpec, ConfusionMatrix, CountModel,
};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, DEFAULT_BINS};
use crate::presence::iforest::{DEFAULT_QUANTILE, DEFAULT_TREES};
use crate::presence::threshold::{DEFAULT_F, DEFAULT_FACTOR};
use crate::presence::{
    calibrate_method1, calibrate_method2a, calibrate_method2b, evaluate_presence,
    fit_isolation_forest_windows, IsolationForestParams, PresenceModel, PresenceReport,
};
use crate::session::{align_series, split_windows, DetectorId, Session};
use crate::simulator::{make_reference_scene, simulate, SceneVariant, SimConfig};

use ingest::{ingest, write_session, Format, InputSpec};
use model_file::{ModelFile, ModelPayload};
use report::{
    CountEvaluation, CountPrediction, CountSessionReport, DetectReport, PresenceEvaluation,
    TrainReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "rssi-occupancy",
    version,
    about = "Presence detection and people counting from Wi-Fi RSSI"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Window length in seconds.
    #[arg(long, global = true, default_value_t = 20.0)]
    pub tau: f64,
    /// Sample rate in samples per second.
    #[arg(long, global = true, default_value_t = 20.0)]
    pub rate: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Detector subset, e.g. `1,2,3`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub detectors: Option<Vec<DetectorId>>,
    /// Session file format; defaults to the file extension.
    #[arg(long, global = true)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Ndjson,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Ndjson => Format::Ndjson,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    M1,
    M2,
    Counting,
}

impl From<VariantArg> for SceneVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::M1 => SceneVariant::M1,
            VariantArg::M2 => SceneVariant::M2,
            VariantArg::Counting => SceneVariant::Counting,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    M1,
    M2a,
    M2b,
    Iforest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Knn,
    Tree,
    Forest,
}

impl From<AlgorithmArg> for AlgorithmSpec {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Knn => AlgorithmSpec::knn(),
            AlgorithmArg::Tree => AlgorithmSpec::tree(),
            AlgorithmArg::Forest => AlgorithmSpec::forest(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputOpts {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also export the report table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled session from a reference scene.
    Simulate {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, default_value_t = 0)]
        people: u32,
        #[arg(long, default_value_t = 1200.0)]
        duration: f64,
        #[arg(long, default_value_t = 1.0)]
        moving_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate a presence model on a noise session.
    Calibrate {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        input: InputSpec,
        /// Method 1 threshold factor f.
        #[arg(long, default_value_t = DEFAULT_F)]
        f: f64,
        /// Method 2a/2b threshold factor.
        #[arg(long, default_value_t = DEFAULT_FACTOR)]
        factor: f64,
        #[arg(long, default_value_t = DEFAULT_TREES)]
        trees: usize,
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_QUANTILE)]
        quantile: f64,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a presence model over a session and emit the decision trace.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: InputSpec,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Train a counting model on labeled sessions and cross-validate it.
    TrainCount {
        #[arg(long = "input", required = true)]
        inputs: Vec<InputSpec>,
        #[arg(long, value_enum, default_value = "forest")]
        algorithm: AlgorithmArg,
        #[arg(long, default_value_t = 3)]
        k_folds: usize,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Keep noise sessions as a 0-person class.
        #[arg(long)]
        include_noise: bool,
        #[arg(long)]
        out: PathBuf,
        /// Write the cross-validation report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Predict a person count for every window of a session.
    PredictCount {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: InputSpec,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Cross-validated accuracy as a function of the number of detectors.
    Sweep {
        #[arg(long = "input", required = true)]
        inputs: Vec<InputSpec>,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "knn,tree,forest"
        )]
        algorithms: Vec<AlgorithmArg>,
        #[arg(long, default_value_t = 3)]
        k_folds: usize,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Accuracy of any model on labeled sessions.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "input", required = true)]
        inputs: Vec<InputSpec>,
        #[command(flatten)]
        output: OutputOpts,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ModelMismatch(_) | Error::LayoutMismatch(_) | Error::DetectorMismatch(_) => {
            EXIT_MODEL
        }
        Error::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `stdout` unless redirected to files.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let text = to_json(value)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_sessions(
    inputs: &[InputSpec],
    format: Option<Format>,
    require_label: bool,
) -> Result<Vec<Session>> {
    inputs
        .iter()
        .map(|spec| {
            if require_label && spec.label.is_none() && !spec.has_sidecar() {
                return Err(Error::invalid(format!(
                    "{spec} needs a label (PATH=LABEL or a .meta.json sidecar)"
                )));
            }
            ingest(spec, format)
        })
        .collect()
}

fn feature_config(global: &GlobalOpts, session: &Session, bins: usize) -> Result<FeatureConfig> {
    let detectors = global
        .detectors
        .clone()
        .unwrap_or_else(|| session.detector_ids());
    FeatureConfig::new(&detectors, bins)
}

fn restrict(global: &GlobalOpts, session: Session) -> Result<Session> {
    match &global.detectors {
        Some(d) => session.restrict(d),
        None => Ok(session),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let g = &cli.global;
    if !(g.tau > 0.0) || !(g.rate > 0.0) {
        return Err(Error::invalid("--tau and --rate must be positive"));
    }
    let format = g.format.map(Format::from);
    match &cli.command {
        Command::Simulate {
            variant,
            people,
            duration,
            moving_fraction,
            out,
        } => {
            let mut scene = make_reference_scene((*variant).into()).with_seed(g.seed);
            scene.rate = g.rate;
            if let Some(d) = &g.detectors {
                scene.detectors.retain(|s| d.contains(&s.id));
            }
            let config = SimConfig {
                fraction_moving: *moving_fraction,
                ..SimConfig::new(*duration, *people)
            };
            let mut session = simulate(&scene, &config)?;
            session.metadata = format!("{} {}", SceneVariant::from(*variant), session.metadata);
            let fmt = format
                .or_else(|| Format::from_path(out))
                .unwrap_or(Format::Csv);
            write_session(&session, out, fmt)?;
            emit(
                &json!({
                    "file": out.display().to_string(),
                    "variant": SceneVariant::from(*variant),
                    "label": session.label,
                    "detectors": session.detector_ids(),
                    "duration": session.duration,
                    "samples_per_detector": session.series.first().map_or(0, |s| s.len()),
                    "seed": g.seed,
                }),
                None,
                stdout,
            )
        }
        Command::Calibrate {
            method,
            input,
            f,
            factor,
            trees,
            subsample,
            quantile,
            bins,
            out,
        } => {
            let mut session = restrict(g, ingest(input, format)?)?;
            if (input.label.is_some() || input.has_sidecar()) && !session.label.is_noise() {
                return Err(Error::InsufficientCalibration(format!(
                    "calibration session is labeled {}, expected noise",
                    session.label
                )));
            }
            session.label = crate::session::Label::Noise;
            let (model, config) = match method {
                MethodArg::M1 => {
                    let windows = split_windows(&session, g.tau)?;
                    (
                        PresenceModel::M1(calibrate_method1(&windows, *f)?),
                        json!({ "f": f }),
                    )
                }
                MethodArg::M2a => (
                    PresenceModel::M2a(calibrate_method2a(&session, *factor)?),
                    json!({ "factor": factor }),
                ),
                MethodArg::M2b => {
                    let aligned = align_series(&session, g.rate)?;
                    (
                        PresenceModel::M2b(calibrate_method2b(&aligned, g.rate, *factor)?),
                        json!({ "factor": factor }),
                    )
                }
                MethodArg::Iforest => {
                    let windows = split_windows(&session, g.tau)?;
                    let params = IsolationForestParams {
                        trees: *trees,
                        subsample: *subsample,
                        quantile: *quantile,
                        seed: g.seed,
                    };
                    let cfg = feature_config(g, &session, *bins)?;
                    (
                        PresenceModel::IsolationForest(fit_isolation_forest_windows(
                            &windows, &cfg, &params,
                        )?),
                        json!({ "trees": trees, "subsample": subsample, "quantile": quantile, "bins": bins, "seed": g.seed }),
                    )
                }
            };
            let file = ModelFile::new(ModelPayload::Presence(model), g.tau, g.rate, config);
            file.save(out)?;
            emit(
                &json!({ "model": out.display().to_string(), "kind": file.kind, "payload": file.payload }),
                None,
                stdout,
            )
        }
        Command::Detect {
            model,
            input,
            output,
        } => {
            let file = ModelFile::load(model)?;
            file.check_config(g.tau, g.rate)?;
            let ModelPayload::Presence(pm) = &file.payload else {
                return Err(Error::ModelMismatch(format!(
                    "`{}` is not a presence model",
                    file.kind
                )));
            };
            let session = ingest(input, format)?;
            let report = detect_session(&file, pm, &session, g)?;
            if let Some(p) = &output.csv {
                std::fs::write(p, report.trace_csv())?;
            }
            emit(&report, output.out.as_deref(), stdout)
        }
        Command::TrainCount {
            inputs,
            algorithm,
            k_folds,
            bins,
            include_noise,
            out,
            report,
        } => {
            let sessions = load_sessions(inputs, format, true)?;
            let cfg = feature_config(g, &sessions[0], *bins)?;
            let dataset = build_dataset_with(&sessions, g.tau, &cfg, *include_noise)?;
            if dataset.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let spec: AlgorithmSpec = (*algorithm).into();
            let cv = cross_validate(&spec, &dataset, *k_folds, g.seed)?;
            let model = CountModel::fit(spec, &dataset, cfg, g.seed)?;
            let file = ModelFile::new(
                ModelPayload::Count(model),
                g.tau,
                g.rate,
                json!({ "spec": spec, "k_folds": k_folds, "bins": bins, "include_noise": include_noise, "seed": g.seed }),
            );
            file.save(out)?;
            let rep = TrainReport {
                algorithm: spec.name().to_string(),
                samples: dataset.len(),
                features: dataset.dims(),
                class_set: dataset.class_set().to_vec(),
                cv,
            };
            emit(&rep, report.as_deref(), stdout)
        }
        Command::PredictCount {
            model,
            input,
            output,
        } => {
            let file = ModelFile::load(model)?;
            file.check_config(g.tau, g.rate)?;
            let ModelPayload::Count(cm) = &file.payload else {
                return Err(Error::ModelMismatch(format!(
                    "`{}` is not a counting model",
                    file.kind
                )));
            };
            let session = ingest(input, format)?;
            let predictions = split_windows(&session, g.tau)?
                .iter()
                .map(|ws| {
                    Ok(CountPrediction {
                        start: ws.start,
                        truth: None,
                        predicted: cm.predict_window(ws)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(p) = &output.csv {
                let mut text = String::from("start_s,predicted\n");
                for pr in &predictions {
                    text.push_str(&format!("{},{}\n", pr.start, pr.predicted));
                }
                std::fs::write(p, text)?;
            }
            emit(
                &json!({ "model_kind": file.kind, "session": session.metadata, "predictions": predictions }),
                output.out.as_deref(),
                stdout,
            )
        }
        Command::Sweep {
            inputs,
            algorithms,
            k_folds,
            bins,
            output,
        } => {
            let sessions = load_sessions(inputs, format, true)?;
            let order = g
                .detectors
                .clone()
                .unwrap_or_else(|| sessions[0].detector_ids());
            let specs: Vec<AlgorithmSpec> = algorithms.iter().map(|&a| a.into()).collect();
            let report = detector_sweep(&sessions, &specs, &order, *k_folds, g.seed, g.tau, *bins)?;
            if let Some(p) = &output.csv {
                std::fs::write(p, report.to_csv())?;
            }
            emit(&report, output.out.as_deref(), stdout)
        }
        Command::Evaluate {
            model,
            inputs,
            output,
        } => {
            let file = ModelFile::load(model)?;
            file.check_config(g.tau, g.rate)?;
            let sessions = load_sessions(inputs, format, true)?;
            match &file.payload {
                ModelPayload::Presence(pm) => {
                    let reports = sessions
                        .iter()
                        .map(|s| detect_session(&file, pm, s, g))
                        .collect::<Result<Vec<_>>>()?;
                    let labeled: usize = reports.iter().map(|r| r.presence.labeled).sum();
                    let correct: usize = reports.iter().map(|r| r.presence.correct).sum();
                    let eval = PresenceEvaluation {
                        model_kind: file.kind.clone(),
                        accuracy: if labeled > 0 {
                            correct as f64 / labeled as f64
                        } else {
                            0.0
                        },
                        sessions: reports,
                    };
                    if let Some(p) = &output.csv {
                        let mut text = String::from("session,label,windows,accuracy\n");
                        for r in &eval.sessions {
                            text.push_str(&format!(
                                "{},{},{},{}\n",
                                r.session,
                                r.session_label,
                                r.presence.windows,
                                r.presence.accuracy.unwrap_or(0.0)
                            ));
                        }
                        std::fs::write(p, text)?;
                    }
                    emit(&eval, output.out.as_deref(), stdout)
                }
                ModelPayload::Count(cm) => {
                    let eval = evaluate_count(&file, cm, &sessions, g.tau)?;
                    if let Some(p) = &output.csv {
                        let mut text = String::from("session,label,windows,accuracy\n");
                        for r in &eval.sessions {
                            text.push_str(&format!(
                                "{},{},{},{}\n",
                                r.session,
                                r.session_label,
                                r.predictions.len(),
                                r.accuracy
                            ));
                        }
                        std::fs::write(p, text)?;
                    }
                    emit(&eval, output.out.as_deref(), stdout)
                }
            }
        }
    }
}

fn detect_session(
    file: &ModelFile,
    model: &PresenceModel,
    session: &Session,
    g: &GlobalOpts,
) -> Result<DetectReport> {
    let session = match model {
        PresenceModel::M2b(_) => align_series(session, g.rate)?,
        _ => session.clone(),
    };
    let windows = split_windows(&session, g.tau)?;
    let presence: PresenceReport = evaluate_presence(model, &windows)?;
    Ok(DetectReport {
        model_kind: file.kind.clone(),
        tau: file.tau,
        rate: file.rate,
        session: session.metadata.clone(),
        session_label: session.label,
        presence,
    })
}

fn evaluate_count(
    file: &ModelFile,
    model: &CountModel,
    sessions: &[Session],
    tau: f64,
) -> Result<CountEvaluation> {
    let mut classes: Vec<u32> = model.class_set.clone();
    classes.extend(sessions.iter().map(|s| s.label.count()));
    classes.sort_unstable();
    classes.dedup();
    let mut confusion = ConfusionMatrix::new(&classes);
    let mut reports = Vec::with_capacity(sessions.len());
    for s in sessions {
        let truth = s.label.count();
        let predictions = split_windows(s, tau)?
            .iter()
            .map(|ws| {
                let predicted = model.predict_window(ws)?;
                Ok(CountPrediction {
                    start: ws.start,
                    truth: Some(truth),
                    predicted,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for p in &predictions {
            confusion.record(truth, p.predicted);
        }
        let correct = predictions.iter().filter(|p| p.predicted == truth).count();
        reports.push(CountSessionReport {
            session: s.metadata.clone(),
            session_label: s.label,
            accuracy: correct as f64 / predictions.len().max(1) as f64,
            predictions,
        });
    }
    Ok(CountEvaluation {
        model_kind: file.kind.clone(),
        accuracy: confusion.accuracy(),
        sessions: reports,
        confusion,
    })
}

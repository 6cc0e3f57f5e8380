//! `agroml`: benchmark, train, explain and serve.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use agroml::classifiers::{lookup, registry, ClassifierError, RegistryEntry};
use agroml::explain::{self, FillPolicy, LimeConfig, RasterImage};
use agroml::predictor::{
    evaluate_holdout, load_labeled_images, train_reference_predictor, PredictorHandle,
    ReferencePredictor, ReferenceTrainingConfig,
};
use agroml::tabular::{
    accuracy, load_crop_dataset, run_benchmark, stratified_kfold, DatasetFingerprint, FEATURE_NAMES,
};
use agroml::TrainedClassifier;
use agroml_service::{AppState, ServiceConfig, MODEL_INPUT_SIZE};

#[derive(Parser)]
#[command(
    name = "agroml",
    version,
    about = "Crop, fertilizer and leaf-disease models with a JSON API"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated accuracy of the crop classifiers.
    Benchmark(BenchmarkArgs),
    /// Train a crop classifier and write its artifact.
    TrainCrop(TrainCropArgs),
    /// Train the reference leaf-image predictor from class folders.
    TrainPredictor(TrainPredictorArgs),
    /// One-shot crop prediction from a saved model.
    PredictCrop(PredictCropArgs),
    /// Explain a leaf-image prediction and write the overlay PNG.
    Explain(ExplainArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated model names; all models when omitted.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct TrainCropArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "random_forest")]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainPredictorArgs {
    /// Directory with one sub-folder of images per label.
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of each class held out for the reported accuracy.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
}

#[derive(Args)]
struct PredictCropArgs {
    #[arg(long)]
    model: PathBuf,
    /// N P K temperature humidity ph rainfall
    #[arg(num_args = 7, value_names = FEATURE_NAMES, allow_negative_numbers = true, required = true)]
    features: Vec<f64>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    image: PathBuf,
    /// Reference predictor artifact.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill removed segments with mid gray instead of their mean color.
    #[arg(long)]
    gray_fill: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
}

/// Failure with the exit code to report.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Benchmark(a) => benchmark(a),
        Command::TrainCrop(a) => train_crop(a),
        Command::TrainPredictor(a) => train_predictor(a),
        Command::PredictCrop(a) => predict_crop(a),
        Command::Explain(a) => explain_image(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn model_entry(name: &str) -> Result<&'static RegistryEntry, Failure> {
    lookup(name).map_err(|e| match e {
        ClassifierError::UnknownModelName { name, valid } => Failure::usage(format!(
            "unknown model `{name}`; valid names: {}",
            valid.join(", ")
        )),
        other => other.into(),
    })
}

fn benchmark(args: BenchmarkArgs) -> CmdResult {
    let entries: Vec<&RegistryEntry> = if args.models.is_empty() {
        registry().iter().collect()
    } else {
        args.models
            .iter()
            .map(|m| model_entry(m.trim()))
            .collect::<Result<_, _>>()?
    };
    let dataset = load_crop_dataset(&args.data)?;
    let fingerprint = DatasetFingerprint::of_file(&dataset, &args.data)?;
    let report = run_benchmark(&dataset, fingerprint, &entries, args.folds, args.seed)?;
    print!("{}", report.to_table());
    if let Some(path) = args.json {
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn check_writable(path: &Path) -> CmdResult {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(format!(
            "unwritable path {}: directory {} does not exist",
            path.display(),
            dir.display()
        )
        .into());
    }
    Ok(())
}

fn train_crop(args: TrainCropArgs) -> CmdResult {
    let entry = model_entry(&args.model)?;
    check_writable(&args.out)?;
    let dataset = load_crop_dataset(&args.data)?;
    let spec = entry.default_spec(args.seed);
    let x = dataset.feature_matrix();
    let y = dataset.label_indices();

    // one stratified fifth held out for the reported accuracy
    let folds = stratified_kfold(&dataset, 5, args.seed)?;
    let (train, test) = (folds.training_indices(0), folds.validation_indices(0));
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            idx.iter().map(|&i| x[i].clone()).collect(),
            idx.iter().map(|&i| y[i]).collect(),
        )
    };
    let (tx, ty) = pick(&train);
    let held = TrainedClassifier::train_encoded(&spec, &tx, &ty, dataset.class_names.clone())?;
    let predicted = test
        .iter()
        .map(|&i| held.predict_index(&x[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let actual: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let acc = accuracy(&predicted, &actual)?;

    let model = TrainedClassifier::train_encoded(&spec, &x, &y, dataset.class_names.clone())?;
    model.save(&args.out)?;
    println!(
        "{}: holdout accuracy {acc:.4} ({} train / {} test rows)",
        entry.display_name,
        train.len(),
        test.len()
    );
    if spec.is_tree_model() {
        let importance = model.feature_importance()?;
        let mut ranked: Vec<(&str, f64)> = FEATURE_NAMES.iter().copied().zip(importance).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        println!("feature importance:");
        for (name, v) in ranked {
            println!("  {name:<12} {v:.4}");
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn train_predictor(args: TrainPredictorArgs) -> CmdResult {
    check_writable(&args.out)?;
    if !(args.holdout > 0.0 && args.holdout < 1.0) {
        return Err(Failure::usage("--holdout must be between 0 and 1"));
    }
    let config = ReferenceTrainingConfig {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.seed,
        ..Default::default()
    };
    let started = Instant::now();
    let data = load_labeled_images(&args.images)?;
    let report = evaluate_holdout(&data, &config, args.holdout)?;
    let model = train_reference_predictor(&args.images, &config)?;
    model.save(&args.out)?;
    println!(
        "labels: {}\nholdout accuracy {:.4} ({} train / {} test images), {:.1} s",
        data.labels.join(", "),
        report.accuracy,
        report.n_train,
        report.n_test,
        started.elapsed().as_secs_f64()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn predict_crop(args: PredictCropArgs) -> CmdResult {
    let model = TrainedClassifier::load(&args.model)?;
    if let Some(v) = args.features.iter().find(|v| !v.is_finite()) {
        return Err(Failure::usage(format!("feature value {v} is not finite")));
    }
    let probs = model.predict_proba(&args.features)?;
    let mut ranked: Vec<(usize, f64)> = probs.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (c, p) in ranked.iter().take(3) {
        println!("{:<16} {p:.4}", model.class_names()[*c]);
    }
    Ok(())
}

fn explain_image(args: ExplainArgs) -> CmdResult {
    if args.samples < 2 {
        return Err(Failure::usage("--samples must be at least 2"));
    }
    check_writable(&args.out)?;
    let bytes = std::fs::read(&args.image)
        .map_err(|e| format!("cannot read {}: {e}", args.image.display()))?;
    let image = RasterImage::decode(&bytes)?.resize(MODEL_INPUT_SIZE, MODEL_INPUT_SIZE);
    let predictor = PredictorHandle::new(ReferencePredictor::load(&args.model)?)?;
    let (target, prob) = predictor.predict(&image)?;
    let config = LimeConfig {
        n_samples: args.samples,
        top_k: args.top_k,
        seed: args.seed,
        fill: if args.gray_fill {
            FillPolicy::Gray
        } else {
            FillPolicy::SegmentMean
        },
        ..LimeConfig::default()
    };
    let outcome = explain::explain(&image, &predictor, target, &config)?;
    let overlay = explain::render_overlay(&image, &outcome.segments, &outcome.explanation)?;
    std::fs::write(&args.out, overlay.to_png()?)
        .map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    println!(
        "predicted {} ({prob:.4}); {} segments, {} samples, seed {}",
        predictor.labels()[target],
        outcome.segments.segment_count(),
        outcome.explanation.n_samples,
        outcome.explanation.seed
    );
    for (rank, (id, score)) in outcome.explanation.ranked_scores().into_iter().enumerate() {
        println!("{:>3}. segment {id:<4} {score:.6}", rank + 1);
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn serve(args: ServeArgs) -> CmdResult {
    let config = ServiceConfig::load(&args.config)
        .map_err(|e| format!("invalid config {}: {e}", args.config.display()))?;
    // blocking HTTP clients inside the state are built outside the runtime
    let state = Arc::new(
        AppState::from_config(&config)
            .map_err(|e| format!("invalid config {}: {e}", args.config.display()))?,
    );
    let grace = Duration::from_secs(config.shutdown_grace_secs);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.socket_addr())
            .await
            .map_err(|e| format!("cannot bind {}: {e}", config.socket_addr()))?;
        let addr = listener.local_addr()?;
        println!("agroml listening on http://{addr}");
        std::io::stdout().flush()?;
        agroml_service::serve(listener, state, shutdown_signal(), grace).await?;
        log::info!("shut down");
        Ok::<_, Failure>(())
    })?;
    // the state may hold blocking clients; drop it off the runtime
    drop(runtime);
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

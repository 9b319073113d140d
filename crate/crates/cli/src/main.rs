//! Batch command line over the alarm-log anomaly detector: dataset
//! synthesis, preprocessing, feature ranking, pipeline training,
//! classification, evaluation with a flag-ratio sweep, tree-ensemble
//! baselines, and plot-data emission (CSV, optional SVG).
//!
//! Flags override a JSON config file (`--config`, or `$SEMC_AD_CONFIG`),
//! which overrides built-in defaults. One master `--seed` fans out to every
//! randomized stage. Every written artifact either embeds the effective
//! config or gets a `<artifact>.config.json` sidecar next to it.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use semc_ad::baselines::{
    gbt_fit, gbt_predict, rf_fit, rf_predict, GbtConfig, RfConfig,
};
use semc_ad::data_model::{
    fit_encoder, ingest_csv, load_encoder, save_encoder, transform, transform_extended,
    write_csv, AlarmRecord, AlarmTypeMapping, CsvSchema, EncodedDataset, VocabularyEncoder,
};
use semc_ad::error::{Error, Result};
use semc_ad::evaluation::{pr_curve, tune_threshold, ClassReport};
use semc_ad::feature_selection::rank_features;
use semc_ad::persist::{load_baseline, save_baseline, BaselineModel};
use semc_ad::pipeline::{
    classify_records, evaluate_bundle, load_bundle, save_bundle, scatter_svg,
    semc_operating_point, train_pipeline, write_pr_csv, write_rho_sweep_csv, write_scatter_csv,
    write_spectrum_csv, PipelineConfig,
};
use semc_ad::synth::{generate, SynthConfig};
use semc_ad::Real;

#[derive(Parser)]
#[command(
    name = "semc-ad",
    version,
    about = "Anomaly detection for categorical alarm logs",
    long_about = "Anomaly detection for categorical alarm logs: supervised entity \
embeddings projected by PCA and clustered by a Gaussian mixture, with \
tree-ensemble baselines. Precedence: flags > JSON config file (--config or \
$SEMC_AD_CONFIG) > defaults."
)]
struct Cli {
    /// JSON config file with optional `pipeline`, `synth`, `rf`, `gbt` sections
    #[arg(long, global = true, env = "SEMC_AD_CONFIG")]
    config: Option<PathBuf>,

    /// Master seed; each randomized stage derives its own stream from it
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic alarm-log CSV
    Synth(SynthArgs),
    /// Ingest a CSV, fit the vocabulary encoder, and write integer codes
    Preprocess(PreprocessArgs),
    /// Rank features by label association (chi-square and Theil's U)
    SelectFeatures(SelectArgs),
    /// Train the full pipeline and persist the model bundle
    Train(TrainArgs),
    /// Classify rows with a trained bundle
    Classify(ClassifyArgs),
    /// Evaluate a bundle or baseline model on labeled rows
    Evaluate(EvaluateArgs),
    /// Fit a tree-ensemble baseline and tune it to a target precision
    Baseline(BaselineArgs),
    /// Emit the precision-recall curve of a baseline model
    PrCurve(PrCurveArgs),
    /// Emit the explained-variance spectrum of a bundle's projection
    Spectrum(SpectrumArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Preprocess(_) => "preprocess",
            Command::SelectFeatures(_) => "select-features",
            Command::Train(_) => "train",
            Command::Classify(_) => "classify",
            Command::Evaluate(_) => "evaluate",
            Command::Baseline(_) => "baseline",
            Command::PrCurve(_) => "pr-curve",
            Command::Spectrum(_) => "spectrum",
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV path
    #[arg(long)]
    output: PathBuf,
    /// Number of rows
    #[arg(long)]
    rows: Option<usize>,
    /// Fraction of rows carrying a planted anomaly signature
    #[arg(long)]
    anomaly_rate: Option<f64>,
    /// Per-field probability an anomalous row takes the signature value
    #[arg(long)]
    strength: Option<f64>,
    /// Number of planted signatures
    #[arg(long)]
    signatures: Option<usize>,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Labeled input CSV
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of integer codes plus label
    #[arg(long)]
    output: PathBuf,
    /// Also save the fitted encoder as JSON
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Alarm-type consolidation rules file
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Append calendar columns (day, weekday, month, season, year)
    #[arg(long)]
    extended_time: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Labeled input CSV
    #[arg(long)]
    input: PathBuf,
    /// Output ranking CSV
    #[arg(long)]
    output: PathBuf,
    /// How many features to mark selected
    #[arg(long)]
    top_k: Option<usize>,
    /// Alarm-type consolidation rules file
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training CSV
    #[arg(long)]
    input: PathBuf,
    /// Output bundle path
    #[arg(long)]
    bundle: PathBuf,
    /// Spectrum CSV path (default: next to the bundle)
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Scatter CSV path (default: next to the bundle)
    #[arg(long)]
    scatter: Option<PathBuf>,
    /// Also write a scatter SVG
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Alarm-type consolidation rules file
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Retained principal components
    #[arg(long)]
    pca_components: Option<usize>,
    /// Mixture components
    #[arg(long)]
    clusters: Option<usize>,
    /// Cluster-flagging ratio threshold
    #[arg(long)]
    rho: Option<f64>,
    /// Embedding training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Keep only the top-k features by association rank
    #[arg(long)]
    select_top_k: Option<usize>,
    /// Append calendar columns (day, weekday, month, season, year)
    #[arg(long)]
    extended_time: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Trained bundle path
    #[arg(long)]
    bundle: PathBuf,
    /// Input CSV (training schema)
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of row_id,decision
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Labeled input CSV
    #[arg(long)]
    input: PathBuf,
    /// Trained bundle path
    #[arg(long, group = "model_kind", required = true)]
    bundle: Option<PathBuf>,
    /// Baseline model path
    #[arg(long, group = "model_kind")]
    model: Option<PathBuf>,
    /// Encoder JSON for --model (default: <model>.encoder.json)
    #[arg(long, conflicts_with = "bundle")]
    encoder: Option<PathBuf>,
    /// Anomaly-precision target for the reported operating point
    #[arg(long, default_value_t = 0.60)]
    target_precision: f64,
    /// Write the report JSON here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
    /// Flag-ratio sweep CSV (bundle only)
    #[arg(long, conflicts_with = "model")]
    sweep: Option<PathBuf>,
    /// Precision-recall CSV (baseline model only)
    #[arg(long, conflicts_with = "bundle")]
    pr: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Ensemble kind
    #[arg(long, value_enum)]
    method: Method,
    /// Labeled training CSV
    #[arg(long)]
    train: PathBuf,
    /// Labeled test CSV the threshold is tuned on
    #[arg(long)]
    test: PathBuf,
    /// Output model path (encoder saved as <model>.encoder.json)
    #[arg(long)]
    model: PathBuf,
    /// Write the report JSON here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
    /// Precision-recall CSV over test scores
    #[arg(long)]
    pr: Option<PathBuf>,
    /// Anomaly-precision target for threshold tuning
    #[arg(long, default_value_t = 0.60)]
    target_precision: f64,
    /// Alarm-type consolidation rules file
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Args)]
struct PrCurveArgs {
    /// Baseline model path
    #[arg(long)]
    model: PathBuf,
    /// Encoder JSON (default: <model>.encoder.json)
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Labeled input CSV
    #[arg(long)]
    input: PathBuf,
    /// Output curve CSV
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Trained bundle path
    #[arg(long)]
    bundle: PathBuf,
    /// Output spectrum CSV
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Rf,
    Gbt,
}

/// Optional config-file sections; flags override fields individually.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    pipeline: Option<PipelineConfig>,
    synth: Option<SynthConfig>,
    rf: Option<RfConfig>,
    gbt: Option<GbtConfig>,
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(FileConfig::default()),
    }
}

/// Effective settings echoed next to artifacts that cannot embed them.
#[derive(Serialize)]
struct Echo {
    command: String,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<String>,
}

fn sidecar(artifact: &Path, echo: &Echo) -> Result<()> {
    let path = PathBuf::from(format!("{}.config.json", artifact.display()));
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, echo)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn ingest(path: &Path) -> Result<Vec<AlarmRecord>> {
    let result = ingest_csv(path, &CsvSchema::default())?;
    warn_rejects(&result.rejected);
    Ok(result.records)
}

fn warn_rejects(rejected: &[semc_ad::data_model::RowIssue]) {
    if rejected.is_empty() {
        return;
    }
    let shown: Vec<String> = rejected
        .iter()
        .take(3)
        .map(|i| format!("row {}: {}", i.row, i.message))
        .collect();
    let more = if rejected.len() > 3 { "; ..." } else { "" };
    eprintln!(
        "warning: {} rows rejected ({}{})",
        rejected.len(),
        shown.join("; "),
        more
    );
}

fn load_mapping(path: &Option<PathBuf>) -> Result<AlarmTypeMapping> {
    match path {
        Some(p) => AlarmTypeMapping::load(p),
        None => Ok(AlarmTypeMapping::default()),
    }
}

fn encode_with(
    records: &[AlarmRecord],
    encoder: &VocabularyEncoder,
    extended: bool,
) -> EncodedDataset {
    if extended {
        transform_extended(records, encoder, encoder.mapping())
    } else {
        transform(records, encoder, encoder.mapping())
    }
}

fn baseline_scores(model: &BaselineModel<Real>, dataset: &EncodedDataset) -> Result<Vec<Real>> {
    (0..dataset.n_rows())
        .map(|i| match model {
            BaselineModel::Forest(m) => rf_predict(m, dataset.row(i)),
            BaselineModel::Boosted(m) => gbt_predict(m, dataset.row(i)),
        })
        .collect()
}

fn encoder_sidecar_path(model: &Path) -> PathBuf {
    PathBuf::from(format!("{}.encoder.json", model.display()))
}

/// Replace the artifact's extension to derive a sibling path.
fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn write_json<T: Serialize>(doc: &T, path: &Option<PathBuf>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
            serde_json::to_writer_pretty(&mut f, doc)?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        None => println!("{}", serde_json::to_string_pretty(doc)?),
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let command = cli.command.name();
    if let Err(e) = run(cli) {
        match &e {
            Error::Staged { .. } => eprintln!("{e}"),
            _ => eprintln!("{command}: {e}"),
        }
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = load_file_config(&cli.config)?;
    match &cli.command {
        Command::Synth(args) => cmd_synth(&cli, &file, args),
        Command::Preprocess(args) => cmd_preprocess(&cli, &file, args),
        Command::SelectFeatures(args) => cmd_select(&cli, &file, args),
        Command::Train(args) => cmd_train(&cli, &file, args),
        Command::Classify(args) => cmd_classify(&cli, args),
        Command::Evaluate(args) => cmd_evaluate(&cli, args),
        Command::Baseline(args) => cmd_baseline(&cli, &file, args),
        Command::PrCurve(args) => cmd_pr_curve(&cli, args),
        Command::Spectrum(args) => cmd_spectrum(&cli, args),
    }
}

fn effective_pipeline(cli: &Cli, file: &FileConfig) -> PipelineConfig {
    let mut pc = file.pipeline.clone().unwrap_or_default();
    if let Some(seed) = cli.seed {
        pc.seed = seed;
    }
    pc
}

fn cmd_synth(cli: &Cli, file: &FileConfig, args: &SynthArgs) -> Result<()> {
    let mut config = file.synth.clone().unwrap_or_default();
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(v) = args.rows {
        config.n_rows = v;
    }
    if let Some(v) = args.anomaly_rate {
        config.anomaly_rate = v;
    }
    if let Some(v) = args.strength {
        config.strength = v;
    }
    if let Some(v) = args.signatures {
        config.n_signatures = v;
    }
    let records = generate(&config)?;
    write_csv(&records, &args.output)?;
    sidecar(
        &args.output,
        &Echo {
            command: "synth".into(),
            seed: cli.seed,
            config: serde_json::to_value(&config)?,
            inputs: vec![],
        },
    )?;
    let anomalies = records.iter().filter(|r| r.label == 1).count();
    println!(
        "wrote {} rows ({} anomalies) -> {}",
        records.len(),
        anomalies,
        args.output.display()
    );
    Ok(())
}

fn cmd_preprocess(cli: &Cli, file: &FileConfig, args: &PreprocessArgs) -> Result<()> {
    let pc = effective_pipeline(cli, file);
    let mapping = load_mapping(&args.mapping)?;
    let records = ingest(&args.input)?;
    let encoder = fit_encoder(&records, &mapping, &pc.severity_scale)?;
    let extended = args.extended_time || pc.extended_time_features;
    let dataset = encode_with(&records, &encoder, extended);

    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.output)?);
    writeln!(out, "{},label", dataset.feature_names().join(","))?;
    for i in 0..dataset.n_rows() {
        let codes: Vec<String> = dataset.row(i).iter().map(|c| c.to_string()).collect();
        writeln!(out, "{},{}", codes.join(","), dataset.labels()[i])?;
    }
    out.flush()?;

    if let Some(path) = &args.encoder {
        save_encoder(&encoder, path)?;
    }
    sidecar(
        &args.output,
        &Echo {
            command: "preprocess".into(),
            seed: cli.seed,
            config: serde_json::to_value(&pc)?,
            inputs: vec![args.input.display().to_string()],
        },
    )?;
    println!(
        "encoded {} rows x {} features -> {}",
        dataset.n_rows(),
        dataset.n_features(),
        args.output.display()
    );
    Ok(())
}

fn cmd_select(cli: &Cli, file: &FileConfig, args: &SelectArgs) -> Result<()> {
    let pc = effective_pipeline(cli, file);
    let mapping = load_mapping(&args.mapping)?;
    let records = ingest(&args.input)?;
    let encoder = fit_encoder(&records, &mapping, &pc.severity_scale)?;
    let dataset = encode_with(&records, &encoder, pc.extended_time_features);
    let k = args
        .top_k
        .or(pc.select_top_k)
        .unwrap_or(dataset.n_features())
        .min(dataset.n_features());
    let scores = rank_features(&dataset, k)?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.output)?);
    writeln!(out, "feature,chi_square,dof,theils_u,selected")?;
    for s in &scores {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.feature, s.chi_square_statistic, s.chi_square_dof, s.theils_u, s.selected
        )?;
    }
    out.flush()?;
    sidecar(
        &args.output,
        &Echo {
            command: "select-features".into(),
            seed: cli.seed,
            config: serde_json::to_value(&pc)?,
            inputs: vec![args.input.display().to_string()],
        },
    )?;
    println!(
        "ranked {} features (top {k} selected) -> {}",
        scores.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_train(cli: &Cli, file: &FileConfig, args: &TrainArgs) -> Result<()> {
    let mut pc = effective_pipeline(cli, file);
    if let Some(v) = args.pca_components {
        pc.pca_components = v;
    }
    if let Some(v) = args.clusters {
        pc.gmm.k = v;
    }
    if let Some(v) = args.rho {
        pc.rho = v;
    }
    if let Some(v) = args.epochs {
        pc.embedding.epochs = v;
    }
    if let Some(v) = args.select_top_k {
        pc.select_top_k = Some(v);
    }
    if args.extended_time {
        pc.extended_time_features = true;
    }

    let mapping = load_mapping(&args.mapping)?;
    let records = ingest(&args.input)?;
    let outcome = train_pipeline::<Real>(&records, &mapping, &pc)?;
    for t in &outcome.timings {
        println!("stage {}: {:.2}s", t.stage, t.seconds);
    }

    save_bundle(&outcome.bundle, &args.bundle)?;
    let spectrum = args
        .spectrum
        .clone()
        .unwrap_or_else(|| sibling(&args.bundle, "spectrum.csv"));
    let scatter = args
        .scatter
        .clone()
        .unwrap_or_else(|| sibling(&args.bundle, "scatter.csv"));
    write_spectrum_csv(&outcome.bundle.pca, &spectrum)?;
    write_scatter_csv(&outcome.projected, &outcome.train_labels, &scatter)?;
    let echo = Echo {
        command: "train".into(),
        seed: cli.seed,
        config: serde_json::to_value(&pc)?,
        inputs: vec![args.input.display().to_string()],
    };
    sidecar(&args.bundle, &echo)?;
    sidecar(&spectrum, &echo)?;
    sidecar(&scatter, &echo)?;
    if let Some(path) = &args.svg {
        std::fs::write(path, scatter_svg(&outcome.projected, &outcome.train_labels)?)?;
        sidecar(path, &echo)?;
    }

    let labeling = &outcome.bundle.labeling;
    let flagged = labeling
        .clusters
        .iter()
        .filter(|c| c.is_anomaly_cluster)
        .count();
    println!(
        "trained on {} rows: {} clusters, {flagged} flagged at rho {} -> {}",
        records.len(),
        labeling.clusters.len(),
        labeling.rho,
        args.bundle.display()
    );
    println!("spectrum -> {}", spectrum.display());
    println!("scatter -> {}", scatter.display());
    Ok(())
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs) -> Result<()> {
    let bundle = load_bundle::<Real>(&args.bundle)?;
    let result = ingest_csv(&args.input, &CsvSchema::default())?;
    warn_rejects(&result.rejected);
    let decisions = if result.records.is_empty() {
        Vec::new()
    } else {
        classify_records(&bundle, &result.records)?
    };

    // Row ids are 1-based data-row positions in the input; rejected rows
    // leave visible gaps.
    let rejected: BTreeSet<usize> = result.rejected.iter().map(|i| i.row).collect();
    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.output)?);
    writeln!(out, "row_id,decision")?;
    let total = result.records.len() + result.rejected.len();
    let mut next = 0usize;
    for row_id in 1..=total {
        if rejected.contains(&row_id) {
            continue;
        }
        writeln!(out, "{},{}", row_id, u8::from(decisions[next]))?;
        next += 1;
    }
    out.flush()?;

    sidecar(
        &args.output,
        &Echo {
            command: "classify".into(),
            seed: cli.seed,
            config: serde_json::to_value(&bundle.config)?,
            inputs: vec![
                args.bundle.display().to_string(),
                args.input.display().to_string(),
            ],
        },
    )?;
    let flagged = decisions.iter().filter(|&&d| d).count();
    println!(
        "classified {} rows ({flagged} anomalies) -> {}",
        decisions.len(),
        args.output.display()
    );
    Ok(())
}

/// Report document for `evaluate` on a bundle.
#[derive(Serialize)]
struct BundleReport {
    config: PipelineConfig,
    target_precision: f64,
    configured: ClassReport,
    operating_rho: f64,
    operating_point: ClassReport,
}

/// Report document for `evaluate` on a baseline model and for `baseline`.
#[derive(Serialize)]
struct ScoreReport {
    method: String,
    config: serde_json::Value,
    target_precision: f64,
    threshold: f64,
    report: ClassReport,
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let records = ingest(&args.input)?;
    if let Some(bundle_path) = &args.bundle {
        let bundle = load_bundle::<Real>(bundle_path)?;
        let eval = evaluate_bundle(&bundle, &records)?;
        if let Some(path) = &args.sweep {
            write_rho_sweep_csv(&eval.sweep, path)?;
            sidecar(
                path,
                &Echo {
                    command: "evaluate".into(),
                    seed: cli.seed,
                    config: serde_json::to_value(&bundle.config)?,
                    inputs: vec![
                        bundle_path.display().to_string(),
                        args.input.display().to_string(),
                    ],
                },
            )?;
        }
        let point = semc_operating_point(&eval.sweep, args.target_precision)?;
        let doc = BundleReport {
            config: bundle.config.clone(),
            target_precision: args.target_precision,
            configured: eval.report.clone(),
            operating_rho: point.rho,
            operating_point: point.report.clone(),
        };
        write_json(&doc, &args.report)?;
        summarize("configured rho", &eval.report);
        summarize("operating point", &point.report);
    } else {
        let model_path = args.model.as_ref().expect("clap enforces the group");
        let model = load_baseline::<Real>(model_path)?;
        let encoder_path = args
            .encoder
            .clone()
            .unwrap_or_else(|| encoder_sidecar_path(model_path));
        let encoder = load_encoder(&encoder_path)?;
        let dataset = encode_with(&records, &encoder, false);
        let scores = baseline_scores(&model, &dataset)?;
        let (threshold, report) = tune_threshold(&scores, dataset.labels(), args.target_precision)?;
        let report = report.named(model.kind(), Some(threshold));
        if let Some(path) = &args.pr {
            write_pr_csv(&pr_curve(&scores, dataset.labels())?, path)?;
            sidecar(
                path,
                &Echo {
                    command: "evaluate".into(),
                    seed: cli.seed,
                    config: model_config(&model),
                    inputs: vec![
                        model_path.display().to_string(),
                        args.input.display().to_string(),
                    ],
                },
            )?;
        }
        let doc = ScoreReport {
            method: model.kind().into(),
            config: model_config(&model),
            target_precision: args.target_precision,
            threshold,
            report: report.clone(),
        };
        write_json(&doc, &args.report)?;
        summarize(model.kind(), &report);
    }
    Ok(())
}

fn model_config(model: &BaselineModel<Real>) -> serde_json::Value {
    match model {
        BaselineModel::Forest(m) => serde_json::json!({ "rf": m.config }),
        BaselineModel::Boosted(m) => serde_json::json!({ "gbt": m.config }),
    }
}

fn summarize(tag: &str, report: &ClassReport) {
    let fmt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "n/a".into(),
    };
    println!(
        "{tag}: anomaly precision {} recall {} (support {})",
        fmt(report.anomaly.precision),
        fmt(report.anomaly.recall),
        report.anomaly.support
    );
}

fn cmd_baseline(cli: &Cli, file: &FileConfig, args: &BaselineArgs) -> Result<()> {
    let mapping = load_mapping(&args.mapping)?;
    let pc = effective_pipeline(cli, file);
    let train_records = ingest(&args.train)?;
    let test_records = ingest(&args.test)?;
    let encoder = fit_encoder(&train_records, &mapping, &pc.severity_scale)?;
    let train_ds = encode_with(&train_records, &encoder, false);
    let test_ds = encode_with(&test_records, &encoder, false);

    let start = Instant::now();
    let model = match args.method {
        Method::Rf => {
            let mut config = file.rf.unwrap_or_default();
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            BaselineModel::Forest(rf_fit::<Real>(&train_ds, &config)?)
        }
        Method::Gbt => {
            let config = file.gbt.unwrap_or_default();
            BaselineModel::Boosted(gbt_fit::<Real>(&train_ds, &config)?)
        }
    };
    println!("fit {} in {:.2}s", model.kind(), start.elapsed().as_secs_f64());

    let scores = baseline_scores(&model, &test_ds)?;
    let (threshold, report) = tune_threshold(&scores, test_ds.labels(), args.target_precision)?;
    let report = report.named(model.kind(), Some(threshold));

    save_baseline(&model, &args.model)?;
    save_encoder(&encoder, &encoder_sidecar_path(&args.model))?;
    let echo = Echo {
        command: "baseline".into(),
        seed: cli.seed,
        config: model_config(&model),
        inputs: vec![
            args.train.display().to_string(),
            args.test.display().to_string(),
        ],
    };
    sidecar(&args.model, &echo)?;
    if let Some(path) = &args.pr {
        write_pr_csv(&pr_curve(&scores, test_ds.labels())?, path)?;
        sidecar(path, &echo)?;
    }
    let doc = ScoreReport {
        method: model.kind().into(),
        config: model_config(&model),
        target_precision: args.target_precision,
        threshold,
        report: report.clone(),
    };
    write_json(&doc, &args.report)?;
    summarize(model.kind(), &report);
    println!("model -> {}", args.model.display());
    Ok(())
}

fn cmd_pr_curve(cli: &Cli, args: &PrCurveArgs) -> Result<()> {
    let model = load_baseline::<Real>(&args.model)?;
    let encoder_path = args
        .encoder
        .clone()
        .unwrap_or_else(|| encoder_sidecar_path(&args.model));
    let encoder = load_encoder(&encoder_path)?;
    let records = ingest(&args.input)?;
    let dataset = encode_with(&records, &encoder, false);
    let scores = baseline_scores(&model, &dataset)?;
    let curve = pr_curve(&scores, dataset.labels())?;
    write_pr_csv(&curve, &args.output)?;
    sidecar(
        &args.output,
        &Echo {
            command: "pr-curve".into(),
            seed: cli.seed,
            config: model_config(&model),
            inputs: vec![
                args.model.display().to_string(),
                args.input.display().to_string(),
            ],
        },
    )?;
    println!(
        "{} points -> {}",
        curve.points.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_spectrum(cli: &Cli, args: &SpectrumArgs) -> Result<()> {
    let bundle = load_bundle::<Real>(&args.bundle)?;
    write_spectrum_csv(&bundle.pca, &args.output)?;
    sidecar(
        &args.output,
        &Echo {
            command: "spectrum".into(),
            seed: cli.seed,
            config: serde_json::to_value(&bundle.config)?,
            inputs: vec![args.bundle.display().to_string()],
        },
    )?;
    println!(
        "{} components -> {}",
        bundle.pca.explained_variance_ratio.len(),
        args.output.display()
    );
    Ok(())
}

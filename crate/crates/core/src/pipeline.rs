//! End-to-end orchestration: preprocess, optional feature selection,
//! embedding training, projection, mixture clustering and cluster labeling,
//! plus bundle persistence, evaluation with a flag-ratio sweep, dataset
//! splits, and plot-data writers. Stage failures carry the stage name.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{
    assign_batch, gmm_fit, label_clusters, ClusterLabeling, GmmModel, GmmParams, RatioMode,
};
use crate::data_model::{
    encoder_from_value, encoder_to_value, transform, transform_extended, AlarmRecord,
    AlarmTypeMapping, EncodedDataset, VocabularyEncoder, DEFAULT_SEVERITY_SCALE,
};
use crate::embedding_net::{build_model, embed_dataset, train, EmbeddingModel, TrainConfig};
use crate::error::{Error, Result};
use crate::evaluation::{precision_recall, ClassReport, PrCurve};
use crate::feature_selection::{rank_features, FeatureScore};
use crate::mat::Mat;
use crate::pca::{self, ComponentRule, PcaModel};
use crate::persist::{
    push_embedding, push_gmm, push_pca, read_container, read_embedding, read_gmm, read_pca,
    write_container, BlobEntry, BlobReader, BlobWriter, BUNDLE_FORMAT_VERSION,
};
use crate::rng::stage_rng;
use crate::scalar::Scalar;

/// Everything the pipeline needs beyond the data itself. One master seed
/// fans out to every randomized stage through per-stage derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub embedding: TrainConfig,
    pub pca_components: usize,
    pub gmm: GmmParams,
    /// Cluster-flagging ratio threshold.
    pub rho: f64,
    pub ratio_mode: RatioMode,
    /// Keep only the top-k features by association rank; None keeps all.
    pub select_top_k: Option<usize>,
    /// Append the calendar columns (day, weekday, month, season, year).
    pub extended_time_features: bool,
    pub severity_scale: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            embedding: TrainConfig::default(),
            pca_components: 2,
            gmm: GmmParams::default(),
            rho: 0.9,
            ratio_mode: RatioMode::Fraction,
            select_top_k: None,
            extended_time_features: false,
            severity_scale: DEFAULT_SEVERITY_SCALE.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Wall-clock seconds spent in one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

fn run_stage<T>(
    timings: &mut Vec<StageTiming>,
    stage: &str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| Error::Staged {
        stage: stage.to_string(),
        message: e.to_string(),
    })?;
    timings.push(StageTiming {
        stage: stage.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    });
    Ok(out)
}

/// Every fitted artifact of one training run, persisted together.
#[derive(Debug, Clone)]
pub struct PipelineBundle<S: Scalar> {
    pub encoder: VocabularyEncoder,
    pub embedding: EmbeddingModel<S>,
    pub pca: PcaModel<S>,
    pub gmm: GmmModel<S>,
    pub labeling: ClusterLabeling,
    pub config: PipelineConfig,
    /// Encoded-column indices the embedding consumes, ascending.
    pub selected_columns: Vec<usize>,
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<S: Scalar> {
    pub bundle: PipelineBundle<S>,
    /// Training rows in the retained principal-component space.
    pub projected: Mat<S>,
    pub train_labels: Vec<u8>,
    pub loss_trace: Vec<S>,
    pub feature_scores: Option<Vec<FeatureScore>>,
    pub timings: Vec<StageTiming>,
}

fn encode(
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

/// Run the full training pipeline on labeled records.
pub fn train_pipeline<S: Scalar>(
    records: &[AlarmRecord],
    mapping: &AlarmTypeMapping,
    config: &PipelineConfig,
) -> Result<TrainOutcome<S>> {
    let mut timings = Vec::new();
    if config.pca_components == 0 {
        return Err(Error::Staged {
            stage: "config".into(),
            message: "need at least one principal component".into(),
        });
    }

    let scale = config.severity_scale.clone();
    let (encoder, full) = run_stage(&mut timings, "preprocess", || {
        let encoder = crate::data_model::fit_encoder(records, mapping, &scale)?;
        let ds = encode(records, &encoder, config.extended_time_features);
        Ok((encoder, ds))
    })?;

    let (dataset, selected_columns, feature_scores) =
        run_stage(&mut timings, "select-features", || match config.select_top_k {
            None => Ok((full.clone(), (0..full.n_features()).collect::<Vec<_>>(), None)),
            Some(k) => {
                let scores = rank_features(&full, k)?;
                let mut columns: Vec<usize> = scores
                    .iter()
                    .filter(|s| s.selected)
                    .map(|s| {
                        full.feature_names()
                            .iter()
                            .position(|n| *n == s.feature)
                            .expect("ranked feature exists")
                    })
                    .collect();
                columns.sort_unstable();
                Ok((full.select_columns(&columns), columns, Some(scores)))
            }
        })?;

    let mut embed_config = config.embedding.clone();
    embed_config.seed = config.seed;
    let (embedding, loss_trace) = run_stage(&mut timings, "embed-train", || {
        let model = build_model::<S>(dataset.cardinalities(), &embed_config)?;
        train(model, &dataset, &embed_config)
    })?;

    let embedded = run_stage(&mut timings, "embed", || {
        embed_dataset(&embedding, &dataset)
    })?;

    let (pca_model, projected) = run_stage(&mut timings, "pca-fit", || {
        let model = pca::fit(&embedded, ComponentRule::Fixed(config.pca_components))?;
        let projected = pca::transform(&model, &embedded)?;
        Ok((model, projected))
    })?;

    let mut gmm_params = config.gmm;
    gmm_params.seed = config.seed;
    let gmm = run_stage(&mut timings, "gmm-fit", || gmm_fit(&projected, &gmm_params))?;

    let labeling = run_stage(&mut timings, "label-clusters", || {
        label_clusters(&gmm, &projected, dataset.labels(), config.rho, config.ratio_mode)
    })?;

    let mut effective = config.clone();
    effective.embedding = embed_config;
    effective.gmm = gmm_params;

    let bundle = PipelineBundle {
        encoder,
        embedding,
        pca: pca_model,
        gmm,
        labeling,
        config: effective,
        selected_columns,
    };
    Ok(TrainOutcome {
        bundle,
        projected,
        train_labels: dataset.labels().to_vec(),
        loss_trace,
        feature_scores,
        timings,
    })
}

/// Encode records the way the bundle's training run did.
pub fn encode_for_bundle<S: Scalar>(
    bundle: &PipelineBundle<S>,
    records: &[AlarmRecord],
) -> EncodedDataset {
    let full = encode(records, &bundle.encoder, bundle.config.extended_time_features);
    full.select_columns(&bundle.selected_columns)
}

/// Embed and project records into the bundle's component space.
pub fn project_records<S: Scalar>(
    bundle: &PipelineBundle<S>,
    records: &[AlarmRecord],
) -> Result<Mat<S>> {
    let dataset = encode_for_bundle(bundle, records);
    let embedded = embed_dataset(&bundle.embedding, &dataset)?;
    pca::transform(&bundle.pca, &embedded)
}

/// Binary decision per record under the bundle's stored labeling.
pub fn classify_records<S: Scalar>(
    bundle: &PipelineBundle<S>,
    records: &[AlarmRecord],
) -> Result<Vec<bool>> {
    let projected = project_records(bundle, records).map_err(|e| Error::Staged {
        stage: "classify".into(),
        message: e.to_string(),
    })?;
    crate::clustering::classify_batch(&bundle.gmm, &bundle.labeling, &projected).map_err(|e| {
        Error::Staged {
            stage: "classify".into(),
            message: e.to_string(),
        }
    })
}

/// One operating point of the flag-ratio sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoPoint {
    pub rho: f64,
    pub flagged_clusters: usize,
    pub report: ClassReport,
}

/// Evaluation of a bundle on labeled records: the report at the configured
/// ratio plus the full sweep over achievable flag sets.
#[derive(Debug, Clone)]
pub struct BundleEvaluation {
    pub report: ClassReport,
    pub sweep: Vec<RhoPoint>,
}

/// Ratio values that realize every achievable flag set under the strict
/// `fraction > rho` rule: midpoints between consecutive distinct training
/// fractions, from "flag none" down to "flag all nonempty".
pub fn rho_candidates(labeling: &ClusterLabeling) -> Vec<f64> {
    let mut fractions: Vec<f64> = labeling
        .clusters
        .iter()
        .map(|c| c.anomaly_fraction)
        .collect();
    fractions.sort_by(|a, b| b.partial_cmp(a).expect("finite fractions"));
    fractions.dedup();
    let mut candidates = Vec::with_capacity(fractions.len() + 1);
    let mut upper = 1.0;
    for &f in &fractions {
        if f < upper {
            let mid = (upper + f) / 2.0;
            if mid < 1.0 && mid > 0.0 {
                candidates.push(mid);
            }
        }
        upper = f;
    }
    if upper > 0.0 {
        candidates.push(upper / 2.0);
    }
    candidates
}

fn decisions_at_rho(
    labeling: &ClusterLabeling,
    assignments: &[usize],
    rho: f64,
) -> Vec<bool> {
    let flags: Vec<bool> = labeling
        .clusters
        .iter()
        .map(|c| c.anomaly_fraction > rho)
        .collect();
    assignments.iter().map(|&c| flags[c]).collect()
}

/// Evaluate a bundle on labeled records, sweeping the flag ratio across all
/// achievable operating points.
pub fn evaluate_bundle<S: Scalar>(
    bundle: &PipelineBundle<S>,
    records: &[AlarmRecord],
) -> Result<BundleEvaluation> {
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    let projected = project_records(bundle, records)?;
    let assignments = assign_batch(&bundle.gmm, &projected)?;

    let configured: Vec<bool> = assignments
        .iter()
        .map(|&c| bundle.labeling.clusters[c].is_anomaly_cluster)
        .collect();
    let report = precision_recall(&configured, &labels)?
        .named("semc-ad", Some(bundle.labeling.rho));

    let mut sweep = Vec::new();
    for rho in rho_candidates(&bundle.labeling) {
        let decisions = decisions_at_rho(&bundle.labeling, &assignments, rho);
        let flagged_clusters = bundle
            .labeling
            .clusters
            .iter()
            .filter(|c| c.anomaly_fraction > rho)
            .count();
        let point = precision_recall(&decisions, &labels)?.named("semc-ad", Some(rho));
        sweep.push(RhoPoint {
            rho,
            flagged_clusters,
            report: point,
        });
    }
    Ok(BundleEvaluation { report, sweep })
}

/// Sweep point maximizing anomaly recall subject to anomaly precision ≥
/// target; recall ties prefer higher precision, then a higher ratio.
pub fn semc_operating_point(sweep: &[RhoPoint], target_precision: f64) -> Result<RhoPoint> {
    if !(0.0 < target_precision && target_precision <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target precision {target_precision} outside (0, 1]"
        )));
    }
    let mut best: Option<&RhoPoint> = None;
    let mut max_precision = 0.0f64;
    for point in sweep {
        let (Some(p), Some(r)) = (point.report.anomaly.precision, point.report.anomaly.recall)
        else {
            continue;
        };
        max_precision = max_precision.max(p);
        if p < target_precision {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let bp = b.report.anomaly.precision.unwrap_or(0.0);
                let br = b.report.anomaly.recall.unwrap_or(0.0);
                (r, p, point.rho) > (br, bp, b.rho)
            }
        };
        if better {
            best = Some(point);
        }
    }
    best.cloned().ok_or(Error::TargetUnachievable {
        target: target_precision,
        max: max_precision,
    })
}

fn split_count(n: usize, train_fraction: f64) -> Result<usize> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n_train = ((n as f64) * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "fraction {train_fraction} leaves an empty side of {n} rows"
        )));
    }
    Ok(n_train)
}

/// Order rows by report time (stable for ties) and split the earliest
/// fraction into the training side.
pub fn temporal_split(
    records: &[AlarmRecord],
    train_fraction: f64,
) -> Result<(Vec<AlarmRecord>, Vec<AlarmRecord>)> {
    let n_train = split_count(records.len(), train_fraction)?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].report_time);
    let train = order[..n_train].iter().map(|&i| records[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| records[i].clone()).collect();
    Ok((train, test))
}

/// Seeded uniform shuffle split.
pub fn random_split(
    records: &[AlarmRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<AlarmRecord>, Vec<AlarmRecord>)> {
    use rand::seq::SliceRandom;
    let n_train = split_count(records.len(), train_fraction)?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut stage_rng(seed, "split"));
    let train = order[..n_train].iter().map(|&i| records[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| records[i].clone()).collect();
    Ok((train, test))
}

#[derive(Serialize, Deserialize)]
struct BundleHeader {
    format_version: u32,
    encoder: serde_json::Value,
    embedding: crate::persist::EmbeddingHeader,
    pca: crate::persist::PcaHeader,
    gmm: crate::persist::GmmHeader,
    labeling: ClusterLabeling,
    config: PipelineConfig,
    selected_columns: Vec<usize>,
    blob_layout: Vec<BlobEntry>,
}

/// Persist a bundle in the magic-prefixed header+blob container.
pub fn save_bundle<S: Scalar>(bundle: &PipelineBundle<S>, path: &Path) -> Result<()> {
    let mut writer = BlobWriter::new();
    let embedding = push_embedding(&mut writer, &bundle.embedding);
    let pca_header = push_pca(&mut writer, &bundle.pca);
    let gmm_header = push_gmm(&mut writer, &bundle.gmm);
    let (blob_layout, blob) = writer.finish();
    let header = BundleHeader {
        format_version: BUNDLE_FORMAT_VERSION,
        encoder: encoder_to_value(&bundle.encoder)?,
        embedding,
        pca: pca_header,
        gmm: gmm_header,
        labeling: bundle.labeling.clone(),
        config: bundle.config.clone(),
        selected_columns: bundle.selected_columns.clone(),
        blob_layout,
    };
    write_container(path, &header, &blob)
}

/// Load a bundle and verify its format version and dimension chain.
pub fn load_bundle<S: Scalar>(path: &Path) -> Result<PipelineBundle<S>> {
    let (value, blob) = read_container(path)?;
    let found = match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) => v as u32,
        None => return Err(Error::Persist("bundle header lacks format_version".into())),
    };
    if found != BUNDLE_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found,
            expected: BUNDLE_FORMAT_VERSION,
        });
    }
    let header: BundleHeader = serde_json::from_value(value)?;
    let reader = BlobReader::new(&header.blob_layout, &blob)?;
    let bundle = PipelineBundle {
        encoder: encoder_from_value(header.encoder)?,
        embedding: read_embedding(&header.embedding, &reader)?,
        pca: read_pca(&header.pca, &reader)?,
        gmm: read_gmm(&header.gmm, &reader)?,
        labeling: header.labeling,
        config: header.config,
        selected_columns: header.selected_columns,
    };
    validate_chain(&bundle)?;
    Ok(bundle)
}

/// Check that encoder cardinalities, embedding tables, projection dims,
/// mixture dims and labeling sizes agree.
pub fn validate_chain<S: Scalar>(bundle: &PipelineBundle<S>) -> Result<()> {
    let cards = encode_for_bundle(bundle, &[]).cardinalities().to_vec();
    let table_rows: Vec<u32> = bundle
        .embedding
        .embeddings
        .iter()
        .map(|e| e.rows() as u32)
        .collect();
    if cards != table_rows {
        return Err(Error::DimensionMismatch(format!(
            "encoder cardinalities {cards:?} vs embedding tables {table_rows:?}"
        )));
    }
    if bundle.embedding.embedding_width() != bundle.pca.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "embedding width {} vs projection input {}",
            bundle.embedding.embedding_width(),
            bundle.pca.input_dim()
        )));
    }
    if bundle.pca.n_components() != bundle.gmm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} components vs mixture dimension {}",
            bundle.pca.n_components(),
            bundle.gmm.dim()
        )));
    }
    if bundle.labeling.clusters.len() != bundle.gmm.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} labeled clusters vs {} components",
            bundle.labeling.clusters.len(),
            bundle.gmm.k()
        )));
    }
    Ok(())
}

fn csv_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Explained-variance spectrum, one row per principal axis (1-based).
pub fn write_spectrum_csv<S: Scalar>(model: &PcaModel<S>, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = csv_file(path)?;
    writeln!(f, "component_index,variance_ratio")?;
    for (i, r) in model.explained_variance_ratio.iter().enumerate() {
        writeln!(f, "{},{}", i + 1, r.to_f64_lossless())?;
    }
    f.flush()?;
    Ok(())
}

/// First two projected coordinates with labels, for external plotting.
pub fn write_scatter_csv<S: Scalar>(
    projected: &Mat<S>,
    labels: &[u8],
    path: &Path,
) -> Result<()> {
    use std::io::Write;
    if projected.cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "scatter needs 2 components, have {}",
            projected.cols()
        )));
    }
    if projected.rows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points vs {} labels",
            projected.rows(),
            labels.len()
        )));
    }
    let mut f = csv_file(path)?;
    writeln!(f, "pc1,pc2,label")?;
    for (row, &label) in projected.iter_rows().zip(labels) {
        writeln!(
            f,
            "{},{},{label}",
            row[0].to_f64_lossless(),
            row[1].to_f64_lossless()
        )?;
    }
    f.flush()?;
    Ok(())
}

/// Threshold-descending anomaly precision/recall curve.
pub fn write_pr_csv(curve: &PrCurve, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = csv_file(path)?;
    writeln!(f, "threshold,precision,recall")?;
    for p in &curve.points {
        writeln!(f, "{},{},{}", p.threshold, p.precision, p.recall)?;
    }
    f.flush()?;
    Ok(())
}

/// Flag-ratio sweep; undefined precision leaves the cell empty.
pub fn write_rho_sweep_csv(sweep: &[RhoPoint], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = csv_file(path)?;
    writeln!(f, "rho,flagged_clusters,precision,recall")?;
    for p in sweep {
        let precision = p
            .report
            .anomaly
            .precision
            .map(|v| v.to_string())
            .unwrap_or_default();
        let recall = p
            .report
            .anomaly
            .recall
            .map(|v| v.to_string())
            .unwrap_or_default();
        writeln!(f, "{},{},{},{}", p.rho, p.flagged_clusters, precision, recall)?;
    }
    f.flush()?;
    Ok(())
}

/// Minimal self-contained scatter SVG: gray normals under red anomalies.
pub fn scatter_svg<S: Scalar>(projected: &Mat<S>, labels: &[u8]) -> Result<String> {
    use std::fmt::Write;
    if projected.cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "scatter needs 2 components, have {}",
            projected.cols()
        )));
    }
    if projected.rows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points vs {} labels",
            projected.rows(),
            labels.len()
        )));
    }
    let (width, height, margin) = (640.0, 480.0, 20.0);
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for row in projected.iter_rows() {
        for d in 0..2 {
            let v = row[d].to_f64_lossless();
            min[d] = min[d].min(v);
            max[d] = max[d].max(v);
        }
    }
    let span = |d: usize| {
        let s = max[d] - min[d];
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let sx = (width - 2.0 * margin) / span(0);
    let sy = (height - 2.0 * margin) / span(1);
    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    )
    .expect("string write");
    for pass in [0u8, 1u8] {
        for (row, &label) in projected.iter_rows().zip(labels) {
            if label != pass {
                continue;
            }
            let x = margin + (row[0].to_f64_lossless() - min[0]) * sx;
            let y = height - margin - (row[1].to_f64_lossless() - min[1]) * sy;
            let (radius, fill) = if label == 1 {
                (2.5, "#c0392b")
            } else {
                (1.5, "#95a5a6")
            };
            write!(
                svg,
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{radius}\" fill=\"{fill}\"/>"
            )
            .expect("string write");
        }
    }
    svg.push_str("</svg>");
    Ok(svg)
}

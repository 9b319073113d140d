//! Model persistence: a versioned JSON header describing shapes, seeds and
//! configs, plus a little-endian 64-bit float blob holding the numeric
//! tensors, both wrapped in a single magic-prefixed container file.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{BoostedModel, ForestModel};
use crate::clustering::GmmModel;
use crate::embedding_net::{Activation, DenseLayer, EmbeddingModel, TrainConfig};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::pca::PcaModel;
use crate::scalar::{cast, Scalar};

pub const CONTAINER_MAGIC: [u8; 8] = *b"SEMCAD01";
pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const BASELINE_FORMAT_VERSION: u32 = 1;

/// One named section of the float blob; offsets and lengths count f64
/// elements, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub offset: u64,
    pub len: u64,
}

/// Accumulates named float sections in write order.
#[derive(Debug, Default)]
pub struct BlobWriter {
    entries: Vec<BlobEntry>,
    data: Vec<f64>,
}

impl BlobWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, values: impl IntoIterator<Item = f64>) {
        let offset = self.data.len() as u64;
        self.data.extend(values);
        self.entries.push(BlobEntry {
            name: name.to_string(),
            offset,
            len: self.data.len() as u64 - offset,
        });
    }

    pub fn finish(self) -> (Vec<BlobEntry>, Vec<f64>) {
        (self.entries, self.data)
    }
}

/// Bounds-checked access to blob sections by name.
pub struct BlobReader<'a> {
    sections: HashMap<&'a str, (usize, usize)>,
    data: &'a [f64],
}

impl<'a> BlobReader<'a> {
    pub fn new(entries: &'a [BlobEntry], data: &'a [f64]) -> Result<Self> {
        let mut sections = HashMap::new();
        for entry in entries {
            let start = entry.offset as usize;
            let end = start
                .checked_add(entry.len as usize)
                .filter(|&e| e <= data.len())
                .ok_or_else(|| {
                    Error::Persist(format!("blob section '{}' out of bounds", entry.name))
                })?;
            if sections.insert(entry.name.as_str(), (start, end)).is_some() {
                return Err(Error::Persist(format!(
                    "duplicate blob section '{}'",
                    entry.name
                )));
            }
        }
        Ok(Self { sections, data })
    }

    pub fn section(&self, name: &str) -> Result<&'a [f64]> {
        let &(start, end) = self
            .sections
            .get(name)
            .ok_or_else(|| Error::Persist(format!("missing blob section '{name}'")))?;
        Ok(&self.data[start..end])
    }

    fn matrix<S: Scalar>(&self, name: &str, rows: usize, cols: usize) -> Result<Mat<S>> {
        let raw = self.section(name)?;
        if raw.len() != rows * cols {
            return Err(Error::Persist(format!(
                "section '{name}' holds {} values, expected {rows}x{cols}",
                raw.len()
            )));
        }
        Ok(Mat::from_vec(
            rows,
            cols,
            raw.iter().map(|&v| cast(v)).collect(),
        ))
    }

    fn vector<S: Scalar>(&self, name: &str, len: usize) -> Result<Vec<S>> {
        let raw = self.section(name)?;
        if raw.len() != len {
            return Err(Error::Persist(format!(
                "section '{name}' holds {} values, expected {len}",
                raw.len()
            )));
        }
        Ok(raw.iter().map(|&v| cast(v)).collect())
    }
}

fn scalars<'m, S: Scalar>(values: impl IntoIterator<Item = &'m S>) -> Vec<f64> {
    values.into_iter().map(|v| v.to_f64_lossless()).collect()
}

/// Write magic, length-prefixed JSON header, then the length-prefixed
/// little-endian float blob.
pub fn write_container<H: Serialize>(path: &Path, header: &H, blob: &[f64]) -> Result<()> {
    let header_bytes = serde_json::to_vec(header)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(&CONTAINER_MAGIC)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    file.write_all(&(blob.len() as u64).to_le_bytes())?;
    for value in blob {
        file.write_all(&value.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

/// Read a container back; the caller deserializes the header further.
pub fn read_container(path: &Path) -> Result<(serde_json::Value, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    let mut cursor = std::io::Cursor::new(bytes.as_slice());
    let mut magic = [0u8; 8];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| Error::Persist("file too short for magic header".into()))?;
    if magic != CONTAINER_MAGIC {
        return Err(Error::Persist("bad magic header".into()));
    }
    let mut len8 = [0u8; 8];
    cursor
        .read_exact(&mut len8)
        .map_err(|_| Error::Persist("truncated header length".into()))?;
    let header_len = u64::from_le_bytes(len8) as usize;
    let mut header_bytes = vec![0u8; header_len];
    cursor
        .read_exact(&mut header_bytes)
        .map_err(|_| Error::Persist("truncated header".into()))?;
    let header: serde_json::Value = serde_json::from_slice(&header_bytes)?;
    cursor
        .read_exact(&mut len8)
        .map_err(|_| Error::Persist("truncated blob length".into()))?;
    let blob_len = u64::from_le_bytes(len8) as usize;
    let mut blob = Vec::with_capacity(blob_len);
    let mut f8 = [0u8; 8];
    for _ in 0..blob_len {
        cursor
            .read_exact(&mut f8)
            .map_err(|_| Error::Persist("truncated blob".into()))?;
        blob.push(f64::from_le_bytes(f8));
    }
    Ok((header, blob))
}

/// Shape of one dense layer in the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub out_dim: usize,
    pub in_dim: usize,
    pub activation: Activation,
}

/// Embedding-network shapes and settings; tensors live in the blob as
/// embedding tables in feature order, then per layer the row-major weight
/// matrix followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub cardinalities: Vec<u32>,
    pub embedding_dims: Vec<usize>,
    pub layers: Vec<LayerShape>,
    pub config: TrainConfig,
    pub seed: u64,
}

pub fn push_embedding<S: Scalar>(w: &mut BlobWriter, model: &EmbeddingModel<S>) -> EmbeddingHeader {
    for (f, table) in model.embeddings.iter().enumerate() {
        w.push(&format!("embedding/table/{f}"), scalars(table.data()));
    }
    for (l, layer) in model.layers.iter().enumerate() {
        w.push(&format!("dense/{l}/weight"), scalars(layer.weight.data()));
        w.push(&format!("dense/{l}/bias"), scalars(&layer.bias));
    }
    EmbeddingHeader {
        cardinalities: model.embeddings.iter().map(|e| e.rows() as u32).collect(),
        embedding_dims: model.embeddings.iter().map(|e| e.cols()).collect(),
        layers: model
            .layers
            .iter()
            .map(|l| LayerShape {
                out_dim: l.weight.rows(),
                in_dim: l.weight.cols(),
                activation: l.activation,
            })
            .collect(),
        config: model.config.clone(),
        seed: model.seed,
    }
}

pub fn read_embedding<S: Scalar>(
    header: &EmbeddingHeader,
    r: &BlobReader,
) -> Result<EmbeddingModel<S>> {
    if header.cardinalities.len() != header.embedding_dims.len() {
        return Err(Error::Persist("embedding shape lists disagree".into()));
    }
    let mut embeddings = Vec::with_capacity(header.cardinalities.len());
    for (f, (&card, &dim)) in header
        .cardinalities
        .iter()
        .zip(&header.embedding_dims)
        .enumerate()
    {
        embeddings.push(r.matrix(&format!("embedding/table/{f}"), card as usize, dim)?);
    }
    let mut layers = Vec::with_capacity(header.layers.len());
    for (l, shape) in header.layers.iter().enumerate() {
        layers.push(DenseLayer {
            weight: r.matrix(&format!("dense/{l}/weight"), shape.out_dim, shape.in_dim)?,
            bias: r.vector(&format!("dense/{l}/bias"), shape.out_dim)?,
            activation: shape.activation,
        });
    }
    Ok(EmbeddingModel {
        embeddings,
        layers,
        config: header.config.clone(),
        seed: header.seed,
    })
}

/// Projection shapes; tensors are mean, std, row-major components,
/// eigenvalues, then the full variance-ratio spectrum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaHeader {
    pub n_components: usize,
    pub input_dim: usize,
}

pub fn push_pca<S: Scalar>(w: &mut BlobWriter, model: &PcaModel<S>) -> PcaHeader {
    w.push("pca/mean", scalars(&model.mean));
    w.push("pca/std", scalars(&model.std));
    w.push("pca/components", scalars(model.components.data()));
    w.push("pca/eigenvalues", scalars(&model.eigenvalues));
    w.push(
        "pca/variance_ratio",
        scalars(&model.explained_variance_ratio),
    );
    PcaHeader {
        n_components: model.n_components(),
        input_dim: model.input_dim(),
    }
}

pub fn read_pca<S: Scalar>(header: &PcaHeader, r: &BlobReader) -> Result<PcaModel<S>> {
    Ok(PcaModel {
        mean: r.vector("pca/mean", header.input_dim)?,
        std: r.vector("pca/std", header.input_dim)?,
        components: r.matrix("pca/components", header.n_components, header.input_dim)?,
        eigenvalues: r.vector("pca/eigenvalues", header.n_components)?,
        explained_variance_ratio: r.vector("pca/variance_ratio", header.input_dim)?,
    })
}

/// Mixture shapes; tensors are weights, row-major means, each component's
/// row-major covariance, the final log-likelihood, then its trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GmmHeader {
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub iterations: usize,
}

pub fn push_gmm<S: Scalar>(w: &mut BlobWriter, model: &GmmModel<S>) -> GmmHeader {
    w.push("gmm/weights", scalars(&model.weights));
    w.push("gmm/means", scalars(model.means.data()));
    for (k, cov) in model.covariances.iter().enumerate() {
        w.push(&format!("gmm/cov/{k}"), scalars(cov.data()));
    }
    w.push(
        "gmm/log_likelihood",
        [model.log_likelihood.to_f64_lossless()],
    );
    w.push("gmm/loglik_trace", scalars(&model.loglik_trace));
    GmmHeader {
        k: model.k(),
        dim: model.dim(),
        seed: model.seed,
        iterations: model.iterations,
    }
}

pub fn read_gmm<S: Scalar>(header: &GmmHeader, r: &BlobReader) -> Result<GmmModel<S>> {
    let mut covariances = Vec::with_capacity(header.k);
    for k in 0..header.k {
        covariances.push(r.matrix(&format!("gmm/cov/{k}"), header.dim, header.dim)?);
    }
    let trace_len = r.section("gmm/loglik_trace")?.len();
    Ok(GmmModel {
        weights: r.vector("gmm/weights", header.k)?,
        means: r.matrix("gmm/means", header.k, header.dim)?,
        covariances,
        seed: header.seed,
        log_likelihood: r.vector::<S>("gmm/log_likelihood", 1)?[0],
        iterations: header.iterations,
        loglik_trace: r.vector("gmm/loglik_trace", trace_len)?,
    })
}

/// Either tree-ensemble baseline, persisted as one versioned JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum BaselineModel<S: Scalar> {
    Forest(ForestModel<S>),
    Boosted(BoostedModel<S>),
}

impl<S: Scalar> BaselineModel<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            BaselineModel::Forest(_) => "rf",
            BaselineModel::Boosted(_) => "gbt",
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct BaselineDoc<S: Scalar> {
    format_version: u32,
    model: BaselineModel<S>,
}

pub fn save_baseline<S: Scalar>(model: &BaselineModel<S>, path: &Path) -> Result<()> {
    let doc = BaselineDoc {
        format_version: BASELINE_FORMAT_VERSION,
        model: model.clone(),
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut file, &doc)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

pub fn load_baseline<S: Scalar>(path: &Path) -> Result<BaselineModel<S>> {
    let file = std::fs::File::open(path)?;
    let doc: BaselineDoc<S> = serde_json::from_reader(std::io::BufReader::new(file))?;
    if doc.format_version != BASELINE_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: doc.format_version,
            expected: BASELINE_FORMAT_VERSION,
        });
    }
    Ok(doc.model)
}

//! JSON checkpoints for a trained predictor pair.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Gnn, GnnPair, GnnShape, HeadKind};
use crate::vocab::SubstructureVocab;

pub const FORMAT_NAME: &str = "mimosa-gnn";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a {FORMAT_NAME} checkpoint (format {0:?})")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint vocabulary differs from the loaded one: {0}")]
    VocabMismatch(String),
    #[error("tensor {name}: {message}")]
    Tensor { name: String, message: String },
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    vocab: Vec<String>,
    shape: GnnShape,
    mgnn: Vec<TensorFile>,
    bgnn: Vec<TensorFile>,
}

fn dump(g: &Gnn) -> Vec<TensorFile> {
    g.shape
        .tensor_specs(g.kind)
        .into_iter()
        .zip(&g.tensors)
        .map(|((name, rows, cols), t)| TensorFile {
            name,
            rows,
            cols,
            data: t.iter().copied().collect(),
        })
        .collect()
}

fn restore(kind: HeadKind, shape: GnnShape, files: Vec<TensorFile>) -> Result<Gnn, CheckpointError> {
    let specs = shape.tensor_specs(kind);
    if specs.len() != files.len() {
        return Err(CheckpointError::Tensor {
            name: format!("{kind:?}"),
            message: format!("expected {} tensors, found {}", specs.len(), files.len()),
        });
    }
    let mut tensors = Vec::with_capacity(specs.len());
    for ((name, rows, cols), f) in specs.into_iter().zip(files) {
        if f.name != name || f.rows != rows || f.cols != cols {
            return Err(CheckpointError::Tensor {
                name: f.name,
                message: format!("expected {name} of {rows}x{cols}, found {}x{}", f.rows, f.cols),
            });
        }
        if f.data.iter().any(|x| !x.is_finite()) {
            return Err(CheckpointError::Tensor {
                name,
                message: "non-finite weight".into(),
            });
        }
        let t = Array2::from_shape_vec((rows, cols), f.data).map_err(|e| CheckpointError::Tensor {
            name: name.clone(),
            message: e.to_string(),
        })?;
        tensors.push(t);
    }
    Ok(Gnn { kind, shape, tensors })
}

pub fn checkpoint_to_string(pair: &GnnPair, vocab: &SubstructureVocab) -> Result<String, CheckpointError> {
    let file = CheckpointFile {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        vocab: vocab.entries().iter().map(|e| e.label.clone()).collect(),
        shape: pair.mgnn.shape,
        mgnn: dump(&pair.mgnn),
        bgnn: dump(&pair.bgnn),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn checkpoint_from_str(text: &str, vocab: &SubstructureVocab) -> Result<GnnPair, CheckpointError> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format != FORMAT_NAME {
        return Err(CheckpointError::Format(file.format));
    }
    if file.version != FORMAT_VERSION {
        return Err(CheckpointError::Version(file.version));
    }
    let labels: Vec<&str> = vocab.entries().iter().map(|e| e.label.as_str()).collect();
    if file.vocab.len() != labels.len() || file.shape.vocab != labels.len() {
        return Err(CheckpointError::VocabMismatch(format!(
            "{} entries in checkpoint, {} loaded",
            file.vocab.len(),
            labels.len()
        )));
    }
    if let Some(i) = (0..labels.len()).find(|&i| file.vocab[i] != labels[i]) {
        return Err(CheckpointError::VocabMismatch(format!(
            "entry {i} is {:?} in checkpoint, {:?} loaded",
            file.vocab[i], labels[i]
        )));
    }
    Ok(GnnPair {
        mgnn: restore(HeadKind::Mgnn, file.shape, file.mgnn)?,
        bgnn: restore(HeadKind::Bgnn, file.shape, file.bgnn)?,
    })
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    pair: &GnnPair,
    vocab: &SubstructureVocab,
) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_to_string(pair, vocab)?)?;
    Ok(())
}

/// Loads a checkpoint and checks it was trained on `vocab`.
pub fn load_checkpoint(path: impl AsRef<Path>, vocab: &SubstructureVocab) -> Result<GnnPair, CheckpointError> {
    checkpoint_from_str(&fs::read_to_string(path)?, vocab)
}

//! Model checkpoints: `manifest.json` plus `weights.bin` (every parameter in
//! manifest order, little-endian f64).

use std::fs;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{assemble, Architecture, EpochRecord, ModelConfig, Network, TrainedModel};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub architecture: Architecture,
    pub config: ModelConfig,
    pub seed: u64,
    pub vocab_size: usize,
    pub parameters: Vec<ParameterEntry>,
    pub created_unix: u64,
    pub embedding_trainable: bool,
    pub head_trained: bool,
    pub trained: bool,
    pub wall_time_seconds: f64,
    pub history: Vec<EpochRecord>,
}

fn embedding_trainable(net: &Network) -> bool {
    match net {
        Network::Sequence(m) => m.embedding.trainable,
        Network::Autoencoder(m) => m.embedding.trainable,
        Network::Pooled(_) => false,
    }
}

fn head_trained(net: &Network) -> bool {
    match net {
        Network::Autoencoder(m) => m.head_trained,
        _ => true,
    }
}

pub fn manifest_of(model: &TrainedModel) -> Manifest {
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Manifest {
        architecture: model.architecture(),
        config: model.config.clone(),
        seed: model.config.seed,
        vocab_size: model.vocab_size,
        parameters: model
            .network
            .parameters()
            .into_iter()
            .map(|(name, p)| ParameterEntry {
                name,
                shape: p.shape().to_vec(),
            })
            .collect(),
        created_unix,
        embedding_trainable: embedding_trainable(&model.network),
        head_trained: head_trained(&model.network),
        trained: model.trained,
        wall_time_seconds: model.wall_time.as_secs_f64(),
        history: model.history.clone(),
    }
}

pub fn save_checkpoint(model: &TrainedModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = manifest_of(model);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
    let mut bytes = Vec::with_capacity(8 * model.parameter_count());
    for (_, p) in model.network.parameters() {
        for v in p.value.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let wpath = dir.join(WEIGHTS_FILE);
    fs::write(&wpath, bytes).map_err(|e| Error::io(&wpath, e))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", mpath.display())))
}

pub fn load_checkpoint(dir: &Path) -> Result<TrainedModel> {
    let manifest = load_manifest(dir)?;
    let wpath = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&wpath).map_err(|e| Error::io(&wpath, e))?;
    let table_shape = manifest
        .parameters
        .first()
        .filter(|p| p.name == "embedding.table" && p.shape.len() == 2)
        .ok_or_else(|| Error::Format("manifest does not start with the embedding table".into()))?
        .shape
        .clone();
    let mut model = assemble(
        &manifest.config,
        manifest.vocab_size,
        Tensor::zeros(&table_shape),
        manifest.embedding_trainable,
    );
    let expected: usize = manifest
        .parameters
        .iter()
        .map(|p| p.shape.iter().product::<usize>())
        .sum();
    if bytes.len() != 8 * expected {
        return Err(Error::Format(format!(
            "{} holds {} bytes, manifest describes {}",
            wpath.display(),
            bytes.len(),
            8 * expected
        )));
    }
    let actual: Vec<(String, Vec<usize>)> = model
        .network
        .parameters()
        .into_iter()
        .map(|(n, p)| (n, p.shape().to_vec()))
        .collect();
    let listed: Vec<(String, Vec<usize>)> = manifest
        .parameters
        .iter()
        .map(|p| (p.name.clone(), p.shape.clone()))
        .collect();
    if actual != listed {
        return Err(Error::Format("manifest parameters do not match the configured architecture".into()));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for p in model.network.parameters_mut() {
        for v in p.value.data_mut() {
            *v = values.next().expect("length checked above");
        }
    }
    if let Network::Autoencoder(ae) = &mut model.network {
        ae.head_trained = manifest.head_trained;
    }
    model.history = manifest.history;
    model.trained = manifest.trained;
    model.wall_time = Duration::from_secs_f64(manifest.wall_time_seconds.max(0.0));
    Ok(model)
}

//! On-disk persistence for model weights and recurrent state.
//!
//! Weights travel in a self-describing JSON archive: a format version, a
//! kind tag (`"listener"` or `"mesh"`), the config, and named tensors. The
//! named-tensor form means a shape mismatch fails loudly at load rather
//! than silently misaligning a flat buffer.
//!
//! Recurrent state is saved alongside its wall-clock timestamp so a restart
//! can decide whether yesterday's state is still worth resuming. State
//! older than [`STATE_VALIDITY_SECONDS`] is discarded and the model starts
//! from zeros — after a day, every realistic time constant has decayed the
//! state to noise anyway.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CfcConfig, CfcModel, CfcState, Linear};

/// Saved recurrent state is resumable for one day.
pub const STATE_VALIDITY_SECONDS: f64 = 86_400.0;

const FORMAT_VERSION: u32 = 1;

/// Archive problems: I/O, malformed JSON, or a shape/kind mismatch.
#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("archive i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("archive mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightArchive {
    format_version: u32,
    kind: String,
    config: CfcConfig,
    tensors: BTreeMap<String, Vec<f64>>,
}

/// Serializes a model to the JSON archive format.
pub fn weights_to_json(model: &CfcModel, kind: &str) -> String {
    let mut tensors = BTreeMap::new();
    tensors.insert("encoder.w".to_string(), model.encoder.w.clone());
    tensors.insert("encoder.b".to_string(), model.encoder.b.clone());
    for (k, c) in model.cells.iter().enumerate() {
        tensors.insert(format!("cells.{k}.log_tau"), c.log_tau.clone());
        for (n, l) in [("l1", &c.l1), ("l2", &c.l2), ("l3", &c.l3)] {
            tensors.insert(format!("cells.{k}.{n}.w"), l.w.clone());
            tensors.insert(format!("cells.{k}.{n}.b"), l.b.clone());
        }
        tensors.insert(format!("cells.{k}.ln_gain"), c.ln_gain.clone());
        tensors.insert(format!("cells.{k}.ln_bias"), c.ln_bias.clone());
    }
    for (n, l) in [
        ("head_traj", &model.head_traj),
        ("head_pattern", &model.head_pattern),
        ("head_pred", &model.head_pred),
        ("head_intent", &model.head_intent),
    ] {
        tensors.insert(format!("{n}.w"), l.w.clone());
        tensors.insert(format!("{n}.b"), l.b.clone());
    }
    let archive = WeightArchive {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        config: model.config.clone(),
        tensors,
    };
    serde_json::to_string(&archive).expect("weight archive serializes")
}

/// Parses a JSON archive, checking the kind tag and every tensor shape.
pub fn weights_from_json(json: &str, expect_kind: &str) -> Result<CfcModel, StoreError> {
    let archive: WeightArchive = serde_json::from_str(json)?;
    if archive.format_version != FORMAT_VERSION {
        return Err(StoreError::Mismatch(format!(
            "format version {} (expected {FORMAT_VERSION})",
            archive.format_version
        )));
    }
    if archive.kind != expect_kind {
        return Err(StoreError::Mismatch(format!(
            "kind {:?} (expected {expect_kind:?})",
            archive.kind
        )));
    }
    archive
        .config
        .validate()
        .map_err(StoreError::Mismatch)?;
    let mut model = CfcModel::zeros_like(&archive.config);
    let take = |name: &str, dst: &mut Vec<f64>| -> Result<(), StoreError> {
        let src = archive
            .tensors
            .get(name)
            .ok_or_else(|| StoreError::Mismatch(format!("missing tensor {name}")))?;
        if src.len() != dst.len() {
            return Err(StoreError::Mismatch(format!(
                "tensor {name}: {} values (expected {})",
                src.len(),
                dst.len()
            )));
        }
        dst.copy_from_slice(src);
        Ok(())
    };
    take("encoder.w", &mut model.encoder.w)?;
    take("encoder.b", &mut model.encoder.b)?;
    for k in 0..model.cells.len() {
        take(&format!("cells.{k}.log_tau"), &mut model.cells[k].log_tau)?;
        take(&format!("cells.{k}.l1.w"), &mut model.cells[k].l1.w)?;
        take(&format!("cells.{k}.l1.b"), &mut model.cells[k].l1.b)?;
        take(&format!("cells.{k}.l2.w"), &mut model.cells[k].l2.w)?;
        take(&format!("cells.{k}.l2.b"), &mut model.cells[k].l2.b)?;
        take(&format!("cells.{k}.l3.w"), &mut model.cells[k].l3.w)?;
        take(&format!("cells.{k}.l3.b"), &mut model.cells[k].l3.b)?;
        take(&format!("cells.{k}.ln_gain"), &mut model.cells[k].ln_gain)?;
        take(&format!("cells.{k}.ln_bias"), &mut model.cells[k].ln_bias)?;
    }
    for (n, l) in [
        ("head_traj", &mut model.head_traj),
        ("head_pattern", &mut model.head_pattern),
        ("head_pred", &mut model.head_pred),
        ("head_intent", &mut model.head_intent),
    ] {
        let l: &mut Linear = l;
        take(&format!("{n}.w"), &mut l.w)?;
        take(&format!("{n}.b"), &mut l.b)?;
    }
    let expected: usize = model.param_count();
    let got: usize = archive.tensors.values().map(Vec::len).sum();
    if got != expected {
        return Err(StoreError::Mismatch(format!(
            "archive carries {got} scalars, model needs {expected}"
        )));
    }
    Ok(model)
}

pub fn save_weights(path: &Path, model: &CfcModel, kind: &str) -> Result<(), StoreError> {
    fs::write(path, weights_to_json(model, kind))?;
    Ok(())
}

pub fn load_weights(path: &Path, expect_kind: &str) -> Result<CfcModel, StoreError> {
    weights_from_json(&fs::read_to_string(path)?, expect_kind)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateArchive {
    h: Vec<Vec<f64>>,
    last_event_time: f64,
    saved_at: f64,
}

/// Saves recurrent state with the time it was captured.
pub fn save_state(path: &Path, state: &CfcState, saved_at: f64) -> Result<(), StoreError> {
    let archive = StateArchive {
        h: state.h.clone(),
        last_event_time: state.last_event_time,
        saved_at,
    };
    fs::write(path, serde_json::to_string(&archive)?)?;
    Ok(())
}

/// Loads recurrent state if it is shape-compatible and younger than
/// [`STATE_VALIDITY_SECONDS`]; otherwise returns a fresh zero state.
pub fn load_state(path: &Path, config: &CfcConfig, now: f64) -> Result<CfcState, StoreError> {
    let archive: StateArchive = serde_json::from_str(&fs::read_to_string(path)?)?;
    let shape_ok = archive.h.len() == config.num_cells
        && archive.h.iter().all(|h| h.len() == config.hidden_dim);
    let fresh = now - archive.saved_at <= STATE_VALIDITY_SECONDS;
    if shape_ok && fresh {
        Ok(CfcState {
            h: archive.h,
            last_event_time: archive.last_event_time,
        })
    } else {
        Ok(CfcState::fresh(config, now))
    }
}

//! Serializable snapshots of a run that resume bit-exactly.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{level_streams, LevelChain, NormConstAccumulator, Simcmc, SimcmcConfig, Storage};
use crate::error::{Error, Result};
use crate::path::Path;
use crate::target::{Model, WeightBoundDiagnostic};

pub const CHECKPOINT_FORMAT: &str = "simcmc-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCheckpoint<B> {
    /// Stored blocks of the current state (the last block only in
    /// marginal-only storage).
    pub current: Vec<B>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub current_log_weight: f64,
    pub reservoir: Vec<Vec<B>>,
    pub accumulator: NormConstAccumulator,
    pub accepted: u64,
    pub updates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<B> {
    pub format: String,
    pub config: SimcmcConfig,
    pub storage: Storage,
    pub iteration: u64,
    pub levels: Vec<LevelCheckpoint<B>>,
    pub diagnostic: Option<WeightBoundDiagnostic>,
}

impl<B: Serialize + DeserializeOwned> Checkpoint<B> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cp: Self = serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", cp.format)));
        }
        Ok(cp)
    }
}

fn rebuild<B: Clone>(storage: Storage, level: usize, blocks: Vec<B>) -> Result<Path<B>> {
    let bad = || Error::Checkpoint(format!("malformed state at level {level}"));
    match storage {
        Storage::FullPath => {
            if blocks.len() != level {
                return Err(bad());
            }
            Path::from_blocks(blocks).ok_or_else(bad)
        }
        Storage::MarginalOnly => {
            let mut it = blocks.into_iter();
            match (it.next(), it.next()) {
                (Some(b), None) => Ok(Path::detached(b, level)),
                _ => Err(bad()),
            }
        }
    }
}

impl<M: Model> Simcmc<M> {
    pub fn checkpoint(&self) -> Checkpoint<M::Block> {
        let levels = self
            .levels
            .iter()
            .map(|c| LevelCheckpoint {
                current: c.current.stored_blocks(),
                current_log_weight: c.current_log_weight,
                reservoir: (0..c.reservoir.len()).map(|m| c.reservoir.stored_blocks(m)).collect(),
                accumulator: c.accumulator.clone(),
                accepted: c.accepted,
                updates: c.updates,
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.clone(),
            storage: self.storage,
            iteration: self.iteration,
            levels,
            diagnostic: self.diagnostic.clone(),
        }
    }

    /// Rebuilds a run from a checkpoint; continuing it reproduces the
    /// uninterrupted run exactly.
    pub fn restore(model: M, checkpoint: Checkpoint<M::Block>) -> Result<Self> {
        let horizon = model.horizon();
        if checkpoint.levels.len() != horizon {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} levels, model has {horizon}",
                checkpoint.levels.len()
            )));
        }
        let storage = checkpoint.storage;
        if storage != checkpoint.config.storage.resolve(&model)? {
            return Err(Error::Checkpoint("storage mode does not match the model".into()));
        }
        let mut levels = Vec::with_capacity(horizon);
        for (i, lc) in checkpoint.levels.into_iter().enumerate() {
            let n = i + 1;
            let mut reservoir = super::ChainReservoir::new(n, storage);
            if lc.reservoir.is_empty() {
                return Err(Error::Checkpoint(format!("empty reservoir at level {n}")));
            }
            for blocks in lc.reservoir {
                reservoir.push(rebuild(storage, n, blocks)?);
            }
            levels.push(LevelChain {
                current: rebuild(storage, n, lc.current)?,
                current_log_weight: lc.current_log_weight,
                reservoir,
                accumulator: lc.accumulator,
                accepted: lc.accepted,
                updates: lc.updates,
            });
        }
        Ok(Simcmc {
            streams: level_streams(checkpoint.config.seed, horizon),
            model,
            config: checkpoint.config,
            storage,
            levels,
            iteration: checkpoint.iteration,
            diagnostic: checkpoint.diagnostic,
        })
    }
}

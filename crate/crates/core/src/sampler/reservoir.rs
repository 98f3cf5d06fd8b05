use serde::{Deserialize, Serialize};

use crate::path::Path;

/// Which part of each accepted state a reservoir keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Storage {
    FullPath,
    MarginalOnly,
}

/// Accepted states `X_n^(0), .., X_n^(i)` of one level, in order.
///
/// Repeated states (after a rejection) are stored again; uniform draws from
/// the reservoir are uniform over this sequence. Marginal-only reservoirs
/// keep bare blocks and hand out detached paths.
#[derive(Clone, Debug)]
pub struct ChainReservoir<B> {
    level: usize,
    entries: Entries<B>,
}

#[derive(Clone, Debug)]
enum Entries<B> {
    Full(Vec<Path<B>>),
    Marginal(Vec<B>),
}

impl<B: Clone> ChainReservoir<B> {
    pub fn new(level: usize, storage: Storage) -> Self {
        let entries = match storage {
            Storage::FullPath => Entries::Full(Vec::new()),
            Storage::MarginalOnly => Entries::Marginal(Vec::new()),
        };
        ChainReservoir { level, entries }
    }

    pub fn push(&mut self, state: Path<B>) {
        debug_assert_eq!(state.level(), self.level);
        match &mut self.entries {
            Entries::Full(v) => v.push(state),
            Entries::Marginal(v) => v.push(state.last().clone()),
        }
    }

    /// Entry `m` as a path (detached in marginal-only storage).
    pub fn get(&self, m: usize) -> Path<B> {
        match &self.entries {
            Entries::Full(v) => v[m].clone(),
            Entries::Marginal(v) => Path::detached(v[m].clone(), self.level),
        }
    }

    /// Stored blocks of entry `m`, oldest first.
    pub fn stored_blocks(&self, m: usize) -> Vec<B> {
        match &self.entries {
            Entries::Full(v) => v[m].stored_blocks(),
            Entries::Marginal(v) => vec![v[m].clone()],
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = Path<B>> + '_ {
        (0..self.len()).map(move |m| self.get(m))
    }
}

impl<B> ChainReservoir<B> {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn storage(&self) -> Storage {
        match self.entries {
            Entries::Full(_) => Storage::FullPath,
            Entries::Marginal(_) => Storage::MarginalOnly,
        }
    }

    pub fn len(&self) -> usize {
        match &self.entries {
            Entries::Full(v) => v.len(),
            Entries::Marginal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Last block of entry `m`.
    pub fn last_block(&self, m: usize) -> &B {
        match &self.entries {
            Entries::Full(v) => v[m].last(),
            Entries::Marginal(v) => &v[m],
        }
    }

    /// Last blocks of entries `m` in `[start, len)`.
    pub fn blocks_from(&self, start: usize) -> impl Iterator<Item = &B> + '_ {
        (start.min(self.len())..self.len()).map(move |m| self.last_block(m))
    }

    /// Full paths of entries `m` in `[start, len)`; `None` in marginal-only storage.
    pub fn full_paths_from(&self, start: usize) -> Option<&[Path<B>]> {
        match &self.entries {
            Entries::Full(v) => Some(&v[start.min(v.len())..]),
            Entries::Marginal(_) => None,
        }
    }
}

/// First reported index under burn-in `B` at iteration `i`:
/// `l(i, B) = 0 ∨ ((i - B) ∧ B)`.
pub fn burn_in_start(i: u64, burn_in: u64) -> u64 {
    i.saturating_sub(burn_in).min(burn_in)
}

/// Running mean of proposed-candidate weights, kept as a log-sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConstAccumulator {
    pub level: usize,
    #[serde(with = "crate::serde_ext::extended_f64")]
    log_sum: f64,
    count: u64,
}

impl NormConstAccumulator {
    pub fn new(level: usize) -> Self {
        NormConstAccumulator {
            level,
            log_sum: f64::NEG_INFINITY,
            count: 0,
        }
    }

    pub fn push(&mut self, log_w: f64) {
        self.count += 1;
        if log_w == f64::NEG_INFINITY {
            return;
        }
        self.log_sum = if self.log_sum == f64::NEG_INFINITY {
            log_w
        } else if self.log_sum >= log_w {
            self.log_sum + (log_w - self.log_sum).exp().ln_1p()
        } else {
            log_w + (self.log_sum - log_w).exp().ln_1p()
        };
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `log(sum / count)`, `None` before the first proposal.
    pub fn log_estimate(&self) -> Option<f64> {
        (self.count > 0).then(|| self.log_sum - (self.count as f64).ln())
    }

    pub fn estimate(&self) -> Option<f64> {
        self.log_estimate().map(f64::exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burn_in_window() {
        assert_eq!(burn_in_start(7, 5), 2);
        assert_eq!(burn_in_start(12, 5), 5);
        assert_eq!(burn_in_start(3, 5), 0);
        assert_eq!(burn_in_start(10, 0), 0);
        for i in 10..40 {
            assert_eq!(burn_in_start(i, 5), 5);
        }
    }

    #[test]
    fn accumulator_mean() {
        let mut acc = NormConstAccumulator::new(1);
        assert_eq!(acc.estimate(), None);
        for w in [1.0f64, 2.0, 0.0, 5.0] {
            acc.push(w.ln());
        }
        assert_eq!(acc.count(), 4);
        assert!((acc.estimate().unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn accumulator_all_zero() {
        let mut acc = NormConstAccumulator::new(1);
        acc.push(f64::NEG_INFINITY);
        assert_eq!(acc.estimate(), Some(0.0));
    }

    #[test]
    fn marginal_reservoir_detaches() {
        let mut r = ChainReservoir::new(2, Storage::MarginalOnly);
        r.push(Path::from_blocks([1, 2]).unwrap());
        assert_eq!(r.stored_blocks(0), vec![2]);
        assert_eq!(r.get(0).level(), 2);
        assert_eq!(r.get(0).prefix(), None);
        assert_eq!(r.blocks_from(0).collect::<Vec<_>>(), vec![&2]);
        assert!(r.full_paths_from(0).is_none());
        let mut f = ChainReservoir::new(2, Storage::FullPath);
        f.push(Path::from_blocks([1, 2]).unwrap());
        assert_eq!(f.get(0).to_vec(), Some(vec![1, 2]));
    }
}

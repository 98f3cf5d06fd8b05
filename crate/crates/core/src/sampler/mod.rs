//! Sequentially interacting Markov chains.
//!
//! Level 1 runs an independence Metropolis–Hastings chain with proposal
//! `q_1`. Level `n >= 2` runs an independence chain whose proposal draws a
//! prefix uniformly from the level `n-1` reservoir and extends it with
//! `q_n`. The acceptance ratio is the ratio of incremental weights, and the
//! weight of every proposed candidate (accepted or not) feeds the level's
//! normalizing-constant estimate.

mod checkpoint;
mod reservoir;

pub use checkpoint::{Checkpoint, LevelCheckpoint, CHECKPOINT_FORMAT};
pub use reservoir::{burn_in_start, ChainReservoir, NormConstAccumulator, Storage};

use std::ops::RangeInclusive;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::Path;
use crate::rng::{streams, CounterStream};
use crate::target::{acceptance_ratio, Model, WeightBoundDiagnostic};

/// Where level `n` draws its prefixes from during a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interaction {
    /// The reservoir of level `n-1` including its state from this sweep.
    #[default]
    Sequential,
    /// The reservoir of level `n-1` as it stood after the previous sweep, so
    /// all levels can be updated concurrently.
    ParallelLagged,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    /// Marginal-only when the model says weights and proposals are Markov.
    #[default]
    Auto,
    FullPath,
    MarginalOnly,
}

impl StorageMode {
    pub fn resolve<M: Model>(self, model: &M) -> Result<Storage> {
        match self {
            StorageMode::Auto if model.markov() => Ok(Storage::MarginalOnly),
            StorageMode::Auto | StorageMode::FullPath => Ok(Storage::FullPath),
            StorageMode::MarginalOnly if model.markov() => Ok(Storage::MarginalOnly),
            StorageMode::MarginalOnly => Err(Error::ModeMismatch(
                "marginal-only storage needs weights and proposals that depend on the last two blocks only".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimcmcConfig {
    pub seed: u64,
    /// `B`: number of initial samples left out of reported averages.
    pub burn_in: u64,
    pub interaction: Interaction,
    pub storage: StorageMode,
    /// Also apply the burn-in window to the reservoirs proposals draw from.
    pub window_proposals: bool,
    /// Decide acceptance before drawing the block when the weight only
    /// depends on the prefix.
    pub accept_before_sample: bool,
    /// Track running weight maxima against the model's declared bounds.
    pub diagnose_weights: bool,
}

impl Default for SimcmcConfig {
    fn default() -> Self {
        SimcmcConfig {
            seed: 0,
            burn_in: 0,
            interaction: Interaction::Sequential,
            storage: StorageMode::Auto,
            window_proposals: false,
            accept_before_sample: true,
            diagnose_weights: false,
        }
    }
}

impl SimcmcConfig {
    pub fn with_seed(seed: u64) -> Self {
        SimcmcConfig {
            seed,
            ..Default::default()
        }
    }
}

/// Stopping rule for [`Simcmc::accrue`].
#[derive(Clone, Copy, Debug)]
pub enum AccrualStop<'a> {
    /// Stop after this many rounds (one update of every designated level).
    Updates(u64),
    Deadline(Instant),
    Cancelled(&'a AtomicBool),
}

#[derive(Clone, Debug)]
pub struct LevelChain<B> {
    current: Path<B>,
    current_log_weight: f64,
    reservoir: ChainReservoir<B>,
    accumulator: NormConstAccumulator,
    accepted: u64,
    updates: u64,
}

impl<B> LevelChain<B> {
    pub fn current(&self) -> &Path<B> {
        &self.current
    }

    pub fn current_log_weight(&self) -> f64 {
        self.current_log_weight
    }

    pub fn reservoir(&self) -> &ChainReservoir<B> {
        &self.reservoir
    }

    pub fn accumulator(&self) -> &NormConstAccumulator {
        &self.accumulator
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }
}

/// Per-level normalizing-constant estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct NormConstEstimates {
    /// `log Zhat_1` at index 0, `log (Z_n / Z_{n-1})hat` at index `n-1`.
    pub log_ratio: Vec<f64>,
    /// Chained `log Zhat_n`.
    pub log_normalizer: Vec<f64>,
}

/// The state of a SIMCMC run.
pub struct Simcmc<M: Model> {
    model: M,
    config: SimcmcConfig,
    storage: Storage,
    levels: Vec<LevelChain<M::Block>>,
    iteration: u64,
    streams: Vec<CounterStream>,
    diagnostic: Option<WeightBoundDiagnostic>,
}

fn level_streams(seed: u64, horizon: usize) -> Vec<CounterStream> {
    (1..=horizon)
        .map(|n| CounterStream::new(seed, streams::SIMCMC_LEVEL + n as u64))
        .collect()
}

impl<M: Model> Simcmc<M> {
    /// Starts from one initial path per level; each must lie in its support.
    pub fn new(model: M, config: SimcmcConfig, initial_paths: Vec<Path<M::Block>>) -> Result<Self> {
        let horizon = model.horizon();
        if initial_paths.len() != horizon {
            return Err(Error::InvalidArgument(format!(
                "need {horizon} initial paths, got {}",
                initial_paths.len()
            )));
        }
        let storage = config.storage.resolve(&model)?;
        let mut levels = Vec::with_capacity(horizon);
        for (i, path) in initial_paths.into_iter().enumerate() {
            let n = i + 1;
            if path.level() != n {
                return Err(Error::InvalidArgument(format!(
                    "initial path for level {n} has {} blocks",
                    path.level()
                )));
            }
            if !path.is_complete() {
                return Err(Error::InvalidArgument(format!(
                    "initial path for level {n} must be complete"
                )));
            }
            if !model.in_support(&path) {
                return Err(Error::InitOutOfSupport { level: n });
            }
            let lw = model.log_weight(&path);
            if lw == f64::NEG_INFINITY {
                return Err(Error::InitOutOfSupport { level: n });
            }
            if lw.is_nan() || lw == f64::INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "initial path for level {n} has zero proposal density"
                )));
            }
            levels.push(Self::fresh_level(n, storage, path, lw));
        }
        let diagnostic = config
            .diagnose_weights
            .then(|| WeightBoundDiagnostic::for_model(&model));
        Ok(Simcmc {
            streams: level_streams(config.seed, horizon),
            model,
            config,
            storage,
            levels,
            iteration: 0,
            diagnostic,
        })
    }

    /// Starts every level from the prefixes of one level-`P` path.
    pub fn nested(model: M, config: SimcmcConfig, path: Path<M::Block>) -> Result<Self> {
        let mut paths = Vec::with_capacity(path.level());
        let mut cursor = Some(&path);
        while let Some(p) = cursor {
            paths.push(p.clone());
            cursor = p.prefix();
        }
        paths.reverse();
        Self::new(model, config, paths)
    }

    /// Seeds every reservoir with an unweighted particle population (for
    /// instance the resampled output of an SMC run). The last particle of each
    /// population becomes the current state; accumulators start empty.
    pub fn from_populations(model: M, config: SimcmcConfig, populations: Vec<Vec<Path<M::Block>>>) -> Result<Self> {
        let horizon = model.horizon();
        if populations.len() != horizon {
            return Err(Error::InvalidArgument(format!(
                "need {horizon} populations, got {}",
                populations.len()
            )));
        }
        let storage = config.storage.resolve(&model)?;
        let mut levels = Vec::with_capacity(horizon);
        for (i, pop) in populations.into_iter().enumerate() {
            let n = i + 1;
            let current = pop
                .last()
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("population {n} is empty")))?;
            if pop.iter().any(|p| p.level() != n) {
                return Err(Error::InvalidArgument(format!(
                    "population {n} holds paths of the wrong length"
                )));
            }
            if n >= 2 && current.prefix().is_none() {
                return Err(Error::InvalidArgument(format!(
                    "current particle at level {n} needs its prefix to be weighted"
                )));
            }
            let lw = model.log_weight(&current);
            if lw == f64::NEG_INFINITY {
                return Err(Error::InitOutOfSupport { level: n });
            }
            let mut reservoir = ChainReservoir::new(n, storage);
            for p in pop {
                reservoir.push(p);
            }
            levels.push(LevelChain {
                current: Self::stored(storage, current),
                current_log_weight: lw,
                reservoir,
                accumulator: NormConstAccumulator::new(n),
                accepted: 0,
                updates: 0,
            });
        }
        let diagnostic = config
            .diagnose_weights
            .then(|| WeightBoundDiagnostic::for_model(&model));
        Ok(Simcmc {
            streams: level_streams(config.seed, horizon),
            model,
            config,
            storage,
            levels,
            iteration: 0,
            diagnostic,
        })
    }

    fn stored(storage: Storage, path: Path<M::Block>) -> Path<M::Block> {
        match storage {
            Storage::FullPath => path,
            Storage::MarginalOnly => path.detach(),
        }
    }

    fn fresh_level(n: usize, storage: Storage, path: Path<M::Block>, lw: f64) -> LevelChain<M::Block> {
        let current = Self::stored(storage, path);
        let mut reservoir = ChainReservoir::new(n, storage);
        reservoir.push(current.clone());
        LevelChain {
            current,
            current_log_weight: lw,
            reservoir,
            accumulator: NormConstAccumulator::new(n),
            accepted: 0,
            updates: 0,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn config(&self) -> &SimcmcConfig {
        &self.config
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    /// Number of completed sweeps.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn level(&self, n: usize) -> Result<&LevelChain<M::Block>> {
        self.check_level(n)?;
        Ok(&self.levels[n - 1])
    }

    pub fn reservoir(&self, n: usize) -> Result<&ChainReservoir<M::Block>> {
        Ok(&self.level(n)?.reservoir)
    }

    pub fn weight_diagnostic(&self) -> Option<&WeightBoundDiagnostic> {
        self.diagnostic.as_ref()
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.levels.len() {
            return Err(Error::LevelOutOfRange {
                level: n,
                horizon: self.levels.len(),
            });
        }
        Ok(())
    }

    /// One MH update of level `n`; appends the resulting state to its reservoir.
    fn update_level(&mut self, n: usize, lagged: bool) {
        let Simcmc {
            model,
            config,
            storage,
            levels,
            streams,
            diagnostic,
            ..
        } = self;
        let idx = n - 1;
        let (lower, upper) = levels.split_at_mut(idx);
        let chain = &mut upper[0];
        let rng = streams[idx].at(chain.updates);

        let prefix = if n == 1 {
            None
        } else {
            let res = &lower[idx - 1].reservoir;
            let hi = if lagged { res.len() - 1 } else { res.len() };
            let lo = if config.window_proposals {
                burn_in_start((hi - 1) as u64, config.burn_in) as usize
            } else {
                0
            };
            Some(res.get(rng.random_range(lo..hi)))
        };
        let u: f64 = rng.random();
        let extend = |x: M::Block| match &prefix {
            None => Path::root(x),
            Some(p) => p.extend(x),
        };

        let shortcut = if config.accept_before_sample {
            model.prefix_log_weight(n, prefix.as_ref())
        } else {
            None
        };
        let (lw, accepted) = match shortcut {
            Some(lw) => {
                let accept = u < acceptance_ratio(lw, chain.current_log_weight);
                let cand = accept.then(|| extend(model.sample(n, prefix.as_ref(), rng)));
                (lw, cand)
            }
            None => {
                let cand = extend(model.sample(n, prefix.as_ref(), rng));
                let lw = model.log_weight(&cand);
                let accept = u < acceptance_ratio(lw, chain.current_log_weight);
                (lw, accept.then_some(cand))
            }
        };

        chain.accumulator.push(lw);
        if let Some(diag) = diagnostic.as_mut() {
            diag.observe_log(n, lw);
        }
        if let Some(cand) = accepted {
            chain.current = Self::stored(*storage, cand);
            chain.current_log_weight = lw;
            chain.accepted += 1;
        }
        chain.updates += 1;
        chain.reservoir.push(chain.current.clone());
    }

    /// Advances every level by one iteration, in order `1..=P`.
    pub fn sweep(&mut self) {
        self.iteration += 1;
        let lagged = self.config.interaction == Interaction::ParallelLagged;
        for n in 1..=self.levels.len() {
            self.update_level(n, lagged);
        }
    }

    pub fn run(&mut self, sweeps: u64) {
        for _ in 0..sweeps {
            self.sweep();
        }
    }

    /// Repeatedly updates only the designated contiguous levels, lowest
    /// first, until the stop condition holds. Returns the number of rounds.
    pub fn accrue(&mut self, levels: RangeInclusive<usize>, stop: AccrualStop<'_>) -> Result<u64> {
        if self.config.interaction != Interaction::Sequential {
            return Err(Error::ModeMismatch(
                "accrual runs in sequential interaction mode".into(),
            ));
        }
        if levels.is_empty() {
            return Err(Error::InvalidArgument("empty level range".into()));
        }
        self.check_level(*levels.start())?;
        self.check_level(*levels.end())?;
        let mut rounds = 0u64;
        loop {
            let done = match stop {
                AccrualStop::Updates(k) => rounds >= k,
                AccrualStop::Deadline(t) => Instant::now() >= t,
                AccrualStop::Cancelled(flag) => flag.load(Ordering::Relaxed),
            };
            if done {
                return Ok(rounds);
            }
            for n in levels.clone() {
                self.update_level(n, false);
            }
            rounds += 1;
        }
    }

    fn reported_start(&self, n: usize) -> Result<usize> {
        self.check_level(n)?;
        let i = (self.levels[n - 1].reservoir.len() - 1) as u64;
        Ok(burn_in_start(i, self.config.burn_in) as usize)
    }

    /// Average of `f(x_n)` over the reported window of level `n`.
    pub fn expectation<F: Fn(&M::Block) -> f64>(&self, n: usize, f: F) -> Result<f64> {
        let start = self.reported_start(n)?;
        let res = &self.levels[n - 1].reservoir;
        Ok(res.blocks_from(start).map(f).sum::<f64>() / (res.len() - start) as f64)
    }

    /// Average of a full-path functional over the reported window of level `n`.
    pub fn expectation_path<F: Fn(&[M::Block]) -> f64>(&self, n: usize, f: F) -> Result<f64> {
        let start = self.reported_start(n)?;
        let window = self.levels[n - 1]
            .reservoir
            .full_paths_from(start)
            .ok_or_else(|| Error::ModeMismatch("full-path functionals need full-path storage".into()))?;
        let total: f64 = window
            .iter()
            .map(|p| f(&p.to_vec().expect("full-path storage keeps prefixes")))
            .sum();
        Ok(total / window.len() as f64)
    }

    pub fn norm_const_estimates(&self) -> Result<NormConstEstimates> {
        let mut log_ratio = Vec::with_capacity(self.levels.len());
        let mut log_normalizer = Vec::with_capacity(self.levels.len());
        let mut acc = 0.0;
        for chain in &self.levels {
            let lr = chain.accumulator.log_estimate().ok_or(Error::NoProposalsYet {
                level: chain.reservoir.level(),
            })?;
            acc += lr;
            log_ratio.push(lr);
            log_normalizer.push(acc);
        }
        Ok(NormConstEstimates {
            log_ratio,
            log_normalizer,
        })
    }

    /// Accepted over proposed, per level.
    pub fn acceptance_rates(&self) -> Result<Vec<f64>> {
        self.levels
            .iter()
            .map(|c| {
                if c.updates == 0 {
                    Err(Error::NoProposalsYet {
                        level: c.reservoir.level(),
                    })
                } else {
                    Ok(c.accepted as f64 / c.updates as f64)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DiscreteTargetSequence;
    use crate::target::TargetSequence;

    fn two_state() -> DiscreteTargetSequence {
        DiscreteTargetSequence::new(
            2,
            vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.9, 0.0]],
            vec![vec![0.4, 0.6], vec![0.25, 0.75, 0.5, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn init_rejects_out_of_support() {
        let d = two_state();
        let err = Simcmc::new(
            &d,
            SimcmcConfig::default(),
            vec![Path::root(1), Path::from_blocks([1, 1]).unwrap()],
        )
        .err();
        assert_eq!(err, Some(Error::InitOutOfSupport { level: 2 }));
    }

    #[test]
    fn constant_function_after_init() {
        let d = two_state();
        let s = Simcmc::nested(&d, SimcmcConfig::default(), Path::from_blocks([0, 1]).unwrap()).unwrap();
        for n in 1..=2 {
            assert_eq!(s.expectation(n, |_| 3.5).unwrap(), 3.5);
            assert_eq!(s.reservoir(n).unwrap().len(), 1);
        }
        assert_eq!(s.norm_const_estimates(), Err(Error::NoProposalsYet { level: 1 }));
        assert!(s.acceptance_rates().is_err());
    }

    #[test]
    fn counts_track_iterations() {
        let d = two_state();
        let mut s = Simcmc::nested(&d, SimcmcConfig::with_seed(4), Path::from_blocks([0, 1]).unwrap()).unwrap();
        for i in 1..=50u64 {
            s.sweep();
            for n in 1..=2 {
                let lvl = s.level(n).unwrap();
                assert_eq!(lvl.reservoir().len() as u64, i + 1);
                assert_eq!(lvl.accumulator().count(), i);
                assert!(d.in_support(&lvl.current().clone()));
            }
        }
        assert_eq!(s.iteration(), 50);
    }

    #[test]
    fn full_path_functional_rejected_in_marginal_mode() {
        use crate::ssm::{Filtering, Kitagawa};
        let model = Filtering::new(Kitagawa::new(5.0, 5.0), vec![Some(1.0), Some(2.0)]);
        let s = Simcmc::nested(&model, SimcmcConfig::default(), Path::from_blocks([0.1, 0.2]).unwrap()).unwrap();
        assert_eq!(s.storage(), Storage::MarginalOnly);
        assert!(matches!(s.expectation_path(2, |_| 1.0), Err(Error::ModeMismatch(_))));
        assert!(s.expectation(2, |x| *x).is_ok());
        let d = two_state();
        let cfg = SimcmcConfig {
            storage: StorageMode::MarginalOnly,
            ..Default::default()
        };
        assert!(matches!(
            Simcmc::nested(&d, cfg, Path::from_blocks([0, 1]).unwrap()),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn burn_in_window_applies_to_reports() {
        let d = two_state();
        let cfg = SimcmcConfig {
            burn_in: 5,
            ..SimcmcConfig::with_seed(1)
        };
        let mut s = Simcmc::nested(&d, cfg, Path::from_blocks([0, 1]).unwrap()).unwrap();
        s.run(7);
        // window [2, 7]: six entries
        let manual: f64 = s.reservoir(1).unwrap().blocks_from(2).map(|x| *x as f64).sum::<f64>() / 6.0;
        assert_eq!(s.expectation(1, |x| *x as f64).unwrap(), manual);
        s.run(5);
        let manual: f64 = s.reservoir(1).unwrap().blocks_from(5).map(|x| *x as f64).sum::<f64>() / 8.0;
        assert_eq!(s.expectation(1, |x| *x as f64).unwrap(), manual);
    }

    #[test]
    fn accrue_grows_only_designated_levels() {
        let d = two_state();
        let mut s = Simcmc::nested(&d, SimcmcConfig::with_seed(2), Path::from_blocks([0, 1]).unwrap()).unwrap();
        s.run(3);
        let rounds = s.accrue(2..=2, AccrualStop::Updates(17)).unwrap();
        assert_eq!(rounds, 17);
        assert_eq!(s.reservoir(2).unwrap().len(), 4 + 17);
        assert_eq!(s.reservoir(1).unwrap().len(), 4);
        assert!(s.accrue(2..=3, AccrualStop::Updates(1)).is_err());
        let flag = AtomicBool::new(true);
        assert_eq!(s.accrue(1..=2, AccrualStop::Cancelled(&flag)).unwrap(), 0);
        let cfg = SimcmcConfig {
            interaction: Interaction::ParallelLagged,
            ..Default::default()
        };
        let mut p = Simcmc::nested(&d, cfg, Path::from_blocks([0, 1]).unwrap()).unwrap();
        assert!(matches!(
            p.accrue(1..=1, AccrualStop::Updates(1)),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn constant_weight_gives_exact_normalizer() {
        // gamma_1 = 3 q_1, gamma_2 = gamma_1 q_2: w_1 = 3, w_2 = 1
        let q1 = vec![0.2, 0.8];
        let q2 = vec![0.5, 0.5, 0.1, 0.9];
        let g1: Vec<f64> = q1.iter().map(|v| 3.0 * v).collect();
        let g2: Vec<f64> = (0..4).map(|j| g1[j / 2] * q2[j]).collect();
        let d = DiscreteTargetSequence::new(2, vec![g1, g2], vec![q1, q2]).unwrap();
        let mut s = Simcmc::nested(&d, SimcmcConfig::with_seed(8), Path::from_blocks([1, 1]).unwrap()).unwrap();
        s.run(1);
        let est = s.norm_const_estimates().unwrap();
        assert!((est.log_ratio[0].exp() - 3.0).abs() < 1e-12);
        s.run(99);
        let est = s.norm_const_estimates().unwrap();
        assert!((est.log_ratio[0].exp() - 3.0).abs() < 1e-12);
        assert!(est.log_ratio[1].abs() < 1e-12);
        assert!((est.log_normalizer[1] - 3f64.ln()).abs() < 1e-12);
        assert_eq!(s.acceptance_rates().unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn diagnostic_sees_weights() {
        let d = two_state();
        let cfg = SimcmcConfig {
            diagnose_weights: true,
            ..SimcmcConfig::with_seed(3)
        };
        let mut s = Simcmc::nested(&d, cfg, Path::from_blocks([0, 1]).unwrap()).unwrap();
        s.run(200);
        let diag = s.weight_diagnostic().unwrap();
        // largest level-1 weight is max(0.3/0.4, 0.7/0.6)
        assert!((diag.max_weight(1) - 0.7 / 0.6).abs() < 1e-12);
        assert!(!diag.any_violation());
    }
}

//! Tabulated target sequences over a finite alphabet.
//!
//! Paths of length `n` over `{0, .., K-1}` are flattened row-major:
//! `index(x_1..x_n) = ((x_1 K + x_2) K + ..) K + x_n`, so the prefix of index
//! `j` is `j / K` and its last block is `j % K`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::path::Path;
use crate::target::{Model, ProposalFamily, TargetSequence};

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTargetSequence {
    k: usize,
    /// `gamma[n-1][index]`, linear scale.
    gamma: Vec<Vec<f64>>,
    /// `proposal[n-1][prefix_index * K + x]`.
    proposal: Vec<Vec<f64>>,
}

pub fn flat_index(k: usize, blocks: &[usize]) -> usize {
    blocks.iter().fold(0, |acc, &x| acc * k + x)
}

pub fn unflatten(k: usize, n: usize, mut index: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % k;
        index /= k;
    }
    out
}

impl DiscreteTargetSequence {
    pub fn new(k: usize, gamma: Vec<Vec<f64>>, proposal: Vec<Vec<f64>>) -> Result<Self> {
        if k == 0 || gamma.is_empty() || gamma.len() != proposal.len() {
            return Err(Error::InvalidArgument(
                "need K >= 1 and one gamma and proposal table per level".into(),
            ));
        }
        for (i, (g, q)) in gamma.iter().zip(&proposal).enumerate() {
            let n = i + 1;
            let size = k.pow(n as u32);
            if g.len() != size || q.len() != size {
                return Err(Error::InvalidArgument(format!(
                    "level {n} tables must have {size} entries"
                )));
            }
            if g.iter().chain(q).any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "level {n} tables must be finite and nonnegative"
                )));
            }
            if !g.iter().any(|&v| v > 0.0) {
                return Err(Error::ZeroMass { level: n });
            }
            for row in q.chunks(k) {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "level {n} proposal rows must sum to 1 (got {s})"
                    )));
                }
            }
        }
        Ok(DiscreteTargetSequence { k, gamma, proposal })
    }

    /// `gamma_n == 1` everywhere, uniform proposals.
    pub fn flat(k: usize, horizon: usize) -> Self {
        let gamma = (1..=horizon).map(|n| vec![1.0; k.pow(n as u32)]).collect();
        let proposal = (1..=horizon).map(|n| vec![1.0 / k as f64; k.pow(n as u32)]).collect();
        DiscreteTargetSequence { k, gamma, proposal }
    }

    /// A random instance with nested supports.
    ///
    /// `gamma_n(x_{1:n}) = gamma_{n-1}(x_{1:n-1}) h_n(x_{1:n})` with `h_n` uniform
    /// on `[0.1, 2)` and zeroed with probability `zero_prob`; proposals are
    /// strictly positive.
    pub fn random<R: Rng + ?Sized>(k: usize, horizon: usize, zero_prob: f64, rng: &mut R) -> Self {
        let mut gamma: Vec<Vec<f64>> = Vec::with_capacity(horizon);
        for n in 1..=horizon {
            let size = k.pow(n as u32);
            loop {
                let table: Vec<f64> = (0..size)
                    .map(|j| {
                        let prev = if n == 1 { 1.0 } else { gamma[n - 2][j / k] };
                        let h = if rng.random::<f64>() < zero_prob {
                            0.0
                        } else {
                            rng.random_range(0.1..2.0)
                        };
                        prev * h
                    })
                    .collect();
                if table.iter().any(|&v| v > 0.0) {
                    gamma.push(table);
                    break;
                }
            }
        }
        let proposal = (1..=horizon)
            .map(|n| {
                let mut q: Vec<f64> = (0..k.pow(n as u32)).map(|_| rng.random_range(0.05..1.0)).collect();
                for row in q.chunks_mut(k) {
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= s);
                }
                q
            })
            .collect();
        DiscreteTargetSequence { k, gamma, proposal }
    }

    pub fn alphabet(&self) -> usize {
        self.k
    }

    pub fn gamma_table(&self, n: usize) -> &[f64] {
        &self.gamma[n - 1]
    }

    pub fn proposal_table(&self, n: usize) -> &[f64] {
        &self.proposal[n - 1]
    }

    pub fn gamma_at(&self, n: usize, index: usize) -> f64 {
        self.gamma[n - 1][index]
    }

    /// `q_n(prefix, x)` for the flattened level-`n` index.
    pub fn proposal_at(&self, n: usize, index: usize) -> f64 {
        self.proposal[n - 1][index]
    }

    /// Incremental weight by table lookup, zero outside the supports.
    pub fn weight_at(&self, n: usize, index: usize) -> f64 {
        let g = self.gamma_at(n, index);
        if g == 0.0 {
            return 0.0;
        }
        let q = self.proposal_at(n, index);
        let prev = if n == 1 {
            1.0
        } else {
            self.gamma_at(n - 1, index / self.k)
        };
        if prev == 0.0 || q == 0.0 {
            return 0.0;
        }
        g / (prev * q)
    }

    fn index_of(&self, path: &Path<usize>) -> usize {
        let blocks = path.to_vec().expect("tabulated targets need the full path");
        flat_index(self.k, &blocks)
    }
}

impl TargetSequence for DiscreteTargetSequence {
    type Block = usize;

    fn horizon(&self) -> usize {
        self.gamma.len()
    }

    fn log_gamma(&self, path: &Path<usize>) -> f64 {
        self.gamma_at(path.level(), self.index_of(path)).ln()
    }
}

impl ProposalFamily<usize> for DiscreteTargetSequence {
    fn sample<R: Rng + ?Sized>(&self, n: usize, prefix: Option<&Path<usize>>, rng: &mut R) -> usize {
        let base = prefix.map_or(0, |p| self.index_of(p)) * self.k;
        let row = &self.proposal[n - 1][base..base + self.k];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return x;
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        row.iter().rposition(|&p| p > 0.0).unwrap_or(self.k - 1)
    }

    fn log_density(&self, n: usize, prefix: Option<&Path<usize>>, x: &usize) -> f64 {
        let base = prefix.map_or(0, |p| self.index_of(p)) * self.k;
        self.proposal[n - 1][base + x].ln()
    }
}

impl Model for DiscreteTargetSequence {}

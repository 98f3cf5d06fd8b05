#![allow(dead_code)]

use simcmc::oracle::{flat_index, DiscreteTargetSequence};
use simcmc::{Model, Path, Simcmc};

/// A fixed two-state model with three levels and nested supports.
pub fn two_state_three_levels() -> DiscreteTargetSequence {
    DiscreteTargetSequence::new(
        2,
        vec![
            vec![1.0, 2.0],
            vec![0.5, 1.5, 2.0, 0.4],
            vec![0.6, 0.15, 1.05, 1.35, 0.8, 3.2, 0.4, 0.2],
        ],
        vec![
            vec![0.5, 0.5],
            vec![0.3, 0.7, 0.6, 0.4],
            vec![0.5, 0.5, 0.2, 0.8, 0.7, 0.3, 0.4, 0.6],
        ],
    )
    .unwrap()
}

/// Flat index of every reservoir entry at level `n`.
pub fn reservoir_indices<M: Model<Block = usize>>(s: &Simcmc<M>, n: usize) -> Vec<usize> {
    s.reservoir(n)
        .unwrap()
        .paths()
        .map(|p: Path<usize>| flat_index(2, &p.to_vec().unwrap()))
        .collect()
}

/// Mean and batch-means standard error of a series.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

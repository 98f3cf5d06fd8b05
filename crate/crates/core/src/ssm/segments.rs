//! Targets indexed by observation arrivals rather than time.
//!
//! Level `k` covers the hidden states up to the `k`-th recorded observation;
//! its block is the trajectory segment since the previous arrival, proposed
//! from the prior dynamics. The weight is the likelihood of the arriving
//! observation at the segment's last state.

use rand::Rng;

use super::StateSpaceModel;
use crate::error::{Error, Result};
use crate::path::Path;
use crate::target::{Model, ProposalFamily, TargetSequence};

#[derive(Clone, Debug)]
pub struct ArrivalSegments<M: StateSpaceModel> {
    model: M,
    observations: Vec<Option<M::Obs>>,
    arrivals: Vec<usize>,
}

impl<M: StateSpaceModel> ArrivalSegments<M> {
    pub fn new(model: M, observations: Vec<Option<M::Obs>>) -> Result<Self> {
        let arrivals: Vec<usize> = observations
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.as_ref().map(|_| i + 1))
            .collect();
        if arrivals.is_empty() {
            return Err(Error::InvalidArgument("no observations to segment on".into()));
        }
        Ok(ArrivalSegments {
            model,
            observations,
            arrivals,
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// One-based time index of each level's observation.
    pub fn arrival_times(&self) -> &[usize] {
        &self.arrivals
    }

    /// First time index covered by level `k`.
    fn start(&self, k: usize) -> usize {
        if k == 1 {
            1
        } else {
            self.arrivals[k - 2] + 1
        }
    }

    fn log_g(&self, k: usize, x: &M::State) -> f64 {
        let t = self.arrivals[k - 1];
        let y = self.observations[t - 1].as_ref().expect("arrival has an observation");
        self.model.log_observation(t, x, y)
    }
}

impl<M: StateSpaceModel> TargetSequence for ArrivalSegments<M> {
    type Block = Vec<M::State>;

    fn horizon(&self) -> usize {
        self.arrivals.len()
    }

    fn log_gamma(&self, path: &Path<Self::Block>) -> f64 {
        let blocks = path.to_vec().expect("log_gamma needs the full path");
        let mut lg = 0.0;
        let mut prev: Option<&M::State> = None;
        let mut t = 1;
        for (k, seg) in blocks.iter().enumerate() {
            for x in seg {
                lg += match prev {
                    None => self.model.log_initial(x),
                    Some(p) => self.model.log_transition(t, p, x),
                };
                prev = Some(x);
                t += 1;
            }
            lg += self.log_g(k + 1, seg.last().expect("segments are non-empty"));
            if lg == f64::NEG_INFINITY {
                break;
            }
        }
        lg
    }
}

impl<M: StateSpaceModel> ProposalFamily<Vec<M::State>> for ArrivalSegments<M> {
    fn sample<R: Rng + ?Sized>(&self, k: usize, prefix: Option<&Path<Vec<M::State>>>, rng: &mut R) -> Vec<M::State> {
        let (start, end) = (self.start(k), self.arrivals[k - 1]);
        let mut seg: Vec<M::State> = Vec::with_capacity(end + 1 - start);
        for t in start..=end {
            let x = match (seg.last(), prefix) {
                (Some(p), _) => self.model.sample_transition(t, p, rng),
                (None, Some(pre)) => {
                    self.model
                        .sample_transition(t, pre.last().last().expect("segments are non-empty"), rng)
                }
                (None, None) => self.model.sample_initial(rng),
            };
            seg.push(x);
        }
        seg
    }

    fn log_density(&self, k: usize, prefix: Option<&Path<Vec<M::State>>>, seg: &Vec<M::State>) -> f64 {
        let start = self.start(k);
        let mut prev = prefix.map(|p| p.last().last().expect("segments are non-empty"));
        let mut lq = 0.0;
        for (j, x) in seg.iter().enumerate() {
            lq += match prev {
                None => self.model.log_initial(x),
                Some(p) => self.model.log_transition(start + j, p, x),
            };
            prev = Some(x);
        }
        lq
    }
}

impl<M: StateSpaceModel> Model for ArrivalSegments<M> {
    fn log_weight(&self, path: &Path<Vec<M::State>>) -> f64 {
        self.log_g(path.level(), path.last().last().expect("segments are non-empty"))
    }

    fn markov(&self) -> bool {
        true
    }

    fn log_weight_bound(&self, _n: usize) -> Option<f64> {
        self.model.log_observation_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::{simulate, Tracking, TrackingSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn segments_cover_the_gaps() {
        let m = Tracking::new(TrackingSpec::default()).unwrap();
        let data = simulate(&m, 20, 2);
        let target = ArrivalSegments::new(m, data.observations.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut path = Path::root(target.sample(1, None, &mut rng));
        for k in 2..=target.horizon() {
            let seg = target.sample(k, Some(&path), &mut rng);
            path = path.extend(seg);
        }
        let total: usize = path.to_vec().unwrap().iter().map(Vec::len).sum();
        assert_eq!(total, *target.arrival_times().last().unwrap());
        // generic weight equals the arrival likelihood
        let mut p = Some(&path);
        while let Some(cur) = p {
            let generic = crate::target::log_weight(&target, cur.level(), cur).unwrap();
            assert!((generic - target.log_weight(cur)).abs() < 1e-8);
            p = cur.prefix();
        }
    }

    #[test]
    fn needs_an_observation() {
        let m = Tracking::new(TrackingSpec::default()).unwrap();
        assert!(ArrivalSegments::new(m, vec![None, None]).is_err());
    }
}

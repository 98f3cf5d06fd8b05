//! TOML experiment configurations.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use simcmc::ssm::TrackingSpec;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Simcmc,
    SimcmcParallel,
    Smc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    Prior,
    Optimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub algorithm: Algorithm,
    pub proposal: Proposal,
}

impl Arm {
    pub fn label(&self) -> String {
        let alg = match self.algorithm {
            Algorithm::Simcmc => "simcmc",
            Algorithm::SimcmcParallel => "simcmc-parallel",
            Algorithm::Smc => "smc",
        };
        let prop = match self.proposal {
            Proposal::Prior => "prior",
            Proposal::Optimal => "optimal",
        };
        format!("{alg}/{prop}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    LinearGaussian {
        dim: usize,
        sigma_v: f64,
        sigma_w: f64,
        horizon: usize,
        /// Seed of the random transition matrix.
        matrix_seed: u64,
        /// Seed of the simulated dataset, fixed across replications.
        data_seed: u64,
    },
    Kitagawa {
        sigma_v2: f64,
        sigma_w2: f64,
        horizon: usize,
        data_seed: u64,
    },
}

impl ModelConfig {
    pub fn horizon(&self) -> usize {
        match self {
            ModelConfig::LinearGaussian { horizon, .. } | ModelConfig::Kitagawa { horizon, .. } => *horizon,
        }
    }
}

/// A large SMC run standing in for the exact log-likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub particles: usize,
    pub seed: u64,
}

/// Compares per-time sign masses of an arm with the reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignMassConfig {
    /// Arm label, e.g. `simcmc/prior`.
    pub arm: String,
    pub samples: usize,
    /// A time counts as bimodal when the reference puts at least this much
    /// mass on each sign.
    pub reference_min: f64,
    /// Mass the arm must then keep on each sign, averaged over replications.
    pub min_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    RmseAtMost {
        arm: String,
        samples: usize,
        max: f64,
    },
    RmseBetween {
        arm: String,
        samples: usize,
        min: f64,
        max: f64,
    },
    RmseDecreases {
        arm: String,
        from: usize,
        to: usize,
    },
    SignMassPreserved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub replications: usize,
    pub sample_sizes: Vec<usize>,
    #[serde(default)]
    pub burn_in: u64,
    pub model: ModelConfig,
    pub arms: Vec<Arm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_mass: Option<SignMassConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::config(field, format!("must be positive, got {v}")))
    }
}

fn nonzero(field: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(HarnessError::config(field, "must be at least 1"))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        nonzero("replications", self.replications)?;
        if self.sample_sizes.is_empty() {
            return Err(HarnessError::config("sample_sizes", "must not be empty"));
        }
        for n in &self.sample_sizes {
            nonzero("sample_sizes", *n)?;
        }
        if self.arms.is_empty() {
            return Err(HarnessError::config("arms", "must not be empty"));
        }
        match &self.model {
            ModelConfig::LinearGaussian {
                dim,
                sigma_v,
                sigma_w,
                horizon,
                ..
            } => {
                nonzero("model.dim", *dim)?;
                nonzero("model.horizon", *horizon)?;
                positive("model.sigma_v", *sigma_v)?;
                positive("model.sigma_w", *sigma_w)?;
                if self.reference.is_some() {
                    return Err(HarnessError::config(
                        "reference",
                        "the linear Gaussian model is scored against the Kalman filter",
                    ));
                }
            }
            ModelConfig::Kitagawa {
                sigma_v2,
                sigma_w2,
                horizon,
                ..
            } => {
                nonzero("model.horizon", *horizon)?;
                positive("model.sigma_v2", *sigma_v2)?;
                positive("model.sigma_w2", *sigma_w2)?;
                if self.arms.iter().any(|a| a.proposal == Proposal::Optimal) {
                    return Err(HarnessError::config(
                        "arms",
                        "the optimal proposal is only available for the linear Gaussian model",
                    ));
                }
                match &self.reference {
                    None => return Err(HarnessError::config("reference", "required for this model")),
                    Some(r) => nonzero("reference.particles", r.particles)?,
                }
            }
        }
        let labels: Vec<String> = self.arms.iter().map(Arm::label).collect();
        let known_arm = |field: &str, arm: &str| {
            if labels.iter().any(|l| l == arm) {
                Ok(())
            } else {
                Err(HarnessError::config(field, format!("unknown arm `{arm}`")))
            }
        };
        let known_n = |field: &str, n: usize| {
            if self.sample_sizes.contains(&n) {
                Ok(())
            } else {
                Err(HarnessError::config(field, format!("{n} is not in sample_sizes")))
            }
        };
        if let Some(s) = &self.sign_mass {
            known_arm("sign_mass.arm", &s.arm)?;
            known_n("sign_mass.samples", s.samples)?;
            if self.reference.is_none() {
                return Err(HarnessError::config("sign_mass", "needs a reference run"));
            }
        }
        for c in &self.checks {
            match c {
                Check::RmseAtMost { arm, samples, .. } | Check::RmseBetween { arm, samples, .. } => {
                    known_arm("checks.arm", arm)?;
                    known_n("checks.samples", *samples)?;
                }
                Check::RmseDecreases { arm, from, to } => {
                    known_arm("checks.arm", arm)?;
                    known_n("checks.from", *from)?;
                    known_n("checks.to", *to)?;
                }
                Check::SignMassPreserved => {
                    if self.sign_mass.is_none() {
                        return Err(HarnessError::config("checks", "sign-mass-preserved needs [sign_mass]"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrackingCheck {
    /// Paired one-sided sign test that adaptive SIMCMC has lower RMSE.
    SimcmcBeats { arm: TrackingArm, level: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackingArm {
    /// SMC with the per-unit budget, using every observation.
    SmcN,
    /// SMC with a multiple of the budget, using only scheduled observations.
    SmcNPrime,
    /// SIMCMC adding samples at the newest levels until the next arrival.
    SimcmcAdaptive,
}

impl TrackingArm {
    pub const ALL: [TrackingArm; 3] = [TrackingArm::SmcN, TrackingArm::SmcNPrime, TrackingArm::SimcmcAdaptive];

    pub fn label(&self) -> &'static str {
        match self {
            TrackingArm::SmcN => "smc-n",
            TrackingArm::SmcNPrime => "smc-n-prime",
            TrackingArm::SimcmcAdaptive => "simcmc-adaptive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    pub name: String,
    pub seed: u64,
    pub realizations: usize,
    pub horizon: usize,
    /// Samples (particles or level updates) affordable per time unit.
    pub budget: usize,
    /// Number of newest levels SIMCMC keeps updating.
    #[serde(default = "one")]
    pub lag: usize,
    /// Particle multiplier of the SMC arm that skips off-schedule observations.
    #[serde(default = "four")]
    pub smc_multiplier: usize,
    /// Particles of the SMC run whose filtering means score every arm.
    #[serde(default = "reference_particles")]
    pub reference_particles: usize,
    #[serde(default)]
    pub model: TrackingSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<TrackingCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn four() -> usize {
    4
}

fn reference_particles() -> usize {
    100_000
}

impl TrackingConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        nonzero("realizations", self.realizations)?;
        nonzero("horizon", self.horizon)?;
        nonzero("budget", self.budget)?;
        nonzero("lag", self.lag)?;
        nonzero("smc_multiplier", self.smc_multiplier)?;
        nonzero("reference_particles", self.reference_particles)?;
        simcmc::ssm::Tracking::new(self.model.clone()).map_err(|e| HarnessError::config("model", e.to_string()))?;
        for c in &self.checks {
            let TrackingCheck::SimcmcBeats { arm, level } = c;
            if *arm == TrackingArm::SimcmcAdaptive {
                return Err(HarnessError::config("checks.arm", "compare against an SMC arm"));
            }
            if !(0.0 < *level && *level < 1.0) {
                return Err(HarnessError::config("checks.level", "must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Hex SHA-256 of the JSON form of a config.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

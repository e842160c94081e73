//! The two learned models: a Gaussian decision-making policy and a
//! bounded reward function, each backed by a small MLP.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{gaussian_logpdf, Activation, HeadSpec, Mlp, NetSpec};
use crate::rng::Stream;
use crate::types::{EnvAction, EnvState, ACTION_DIM, STATE_DIM};
use crate::vec3::Vec3;
use crate::SCHEMA_VERSION;

/// Default hidden architecture for both networks.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// Gaussian policy: state features in, action mean and a shared
/// isotropic log-variance out.
///
/// `pi(a | s) = N(mu(s), sigma(s)^2 I)` with `sigma(s)^2 = exp(logvar(s))`,
/// so the variance is positive for every state by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    net: Mlp,
}

impl PolicyNet {
    pub fn spec(hidden: &[usize]) -> Result<NetSpec> {
        let mut layer_sizes = vec![STATE_DIM];
        layer_sizes.extend_from_slice(hidden);
        NetSpec::new(
            layer_sizes,
            vec![
                HeadSpec {
                    name: "mu".into(),
                    size: ACTION_DIM,
                    activation: Activation::Linear,
                },
                HeadSpec {
                    name: "logvar".into(),
                    size: 1,
                    activation: Activation::Linear,
                },
            ],
        )
    }

    pub fn init(hidden: &[usize], rng: &mut Stream) -> Result<Self> {
        Ok(PolicyNet {
            net: Mlp::init(Self::spec(hidden)?, rng)?,
        })
    }

    /// Wrap an existing network, checking the head layout.
    pub fn from_mlp(net: Mlp) -> Result<Self> {
        let expected = Self::spec(&net.spec.layer_sizes[1..])?;
        if net.spec != expected {
            return Err(Error::Schema("network is not a policy network".into()));
        }
        Ok(PolicyNet { net })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// Mean action and variance at a state.
    pub fn mean_and_variance(&self, state: &EnvState) -> Result<(Vec3, f64)> {
        let out = self.net.forward(&state.features())?;
        let mu = [out[0][0], out[0][1], out[0][2]];
        Ok((mu, out[1][0].exp()))
    }

    /// The deterministic action `mu(s)`.
    pub fn mean_action(&self, state: &EnvState) -> Result<Vec3> {
        Ok(self.mean_and_variance(state)?.0)
    }

    /// Draw `a ~ N(mu(s), sigma(s)^2 I)`.
    pub fn sample_action(&self, state: &EnvState, rng: &mut Stream) -> Result<Vec3> {
        let (mu, var) = self.mean_and_variance(state)?;
        if !var.is_finite() {
            return Err(Error::Numerical(format!(
                "policy variance is non-finite: {var}"
            )));
        }
        let sigma = var.sqrt();
        let mut a = mu;
        for v in &mut a {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
        Ok(a)
    }

    /// Log-density of an action under the policy at a state.
    pub fn action_log_prob(&self, state: &EnvState, action: &EnvAction) -> Result<f64> {
        let (mu, var) = self.mean_and_variance(state)?;
        // exp(logvar) can underflow to 0 or overflow to inf when training
        // blows up; that is a numerical collapse, not a caller error.
        if !var.is_finite() || var <= 0.0 {
            return Err(Error::Numerical(format!(
                "policy variance degenerate: {var}"
            )));
        }
        gaussian_logpdf(action.position, mu, var)
    }
}

/// Bounded reward function: concatenated state and action features in,
/// one tanh-activated scalar out, so `r in (-1, 1)` for all finite
/// inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardNet {
    net: Mlp,
}

impl RewardNet {
    pub fn spec(hidden: &[usize]) -> Result<NetSpec> {
        let mut layer_sizes = vec![STATE_DIM + ACTION_DIM];
        layer_sizes.extend_from_slice(hidden);
        NetSpec::new(
            layer_sizes,
            vec![HeadSpec {
                name: "reward".into(),
                size: 1,
                activation: Activation::Tanh,
            }],
        )
    }

    pub fn init(hidden: &[usize], rng: &mut Stream) -> Result<Self> {
        Ok(RewardNet {
            net: Mlp::init(Self::spec(hidden)?, rng)?,
        })
    }

    pub fn from_mlp(net: Mlp) -> Result<Self> {
        let expected = Self::spec(&net.spec.layer_sizes[1..])?;
        if net.spec != expected {
            return Err(Error::Schema("network is not a reward network".into()));
        }
        Ok(RewardNet { net })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input(state: &EnvState, action: &EnvAction) -> [f64; STATE_DIM + ACTION_DIM] {
        let s = state.features();
        [
            s[0],
            s[1],
            s[2],
            s[3],
            s[4],
            action.position[0],
            action.position[1],
            action.position[2],
        ]
    }

    /// Per-timestep reward `r(s, a)` in (-1, 1).
    pub fn reward(&self, state: &EnvState, action: &EnvAction) -> Result<f64> {
        let out = self.net.forward(&Self::input(state, action))?;
        Ok(out[0][0])
    }
}

/// Which model a checkpoint holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    Policy,
    Reward,
}

/// A persisted model: architecture, flat weights, the seed that produced
/// it, and training metadata (ordered map so serialization is stable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub schema_version: u32,
    pub kind: CheckpointKind,
    pub spec: NetSpec,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub metadata: BTreeMap<String, f64>,
}

impl NetCheckpoint {
    pub fn new(kind: CheckpointKind, mlp: &Mlp, seed: u64, metadata: BTreeMap<String, f64>) -> Self {
        NetCheckpoint {
            schema_version: SCHEMA_VERSION,
            kind,
            spec: mlp.spec.clone(),
            weights: mlp.weights.clone(),
            seed,
            metadata,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint schema_version {} != {}",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        self.spec.validate()?;
        if self.weights.len() != self.spec.weight_count() {
            return Err(Error::Schema(format!(
                "checkpoint has {} weights, spec wants {}",
                self.weights.len(),
                self.spec.weight_count()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Schema("checkpoint has non-finite weights".into()));
        }
        Ok(())
    }

    pub fn into_policy(self) -> Result<PolicyNet> {
        self.validate()?;
        if self.kind != CheckpointKind::Policy {
            return Err(Error::Schema("checkpoint is not a policy".into()));
        }
        PolicyNet::from_mlp(Mlp {
            spec: self.spec,
            weights: self.weights,
        })
    }

    pub fn into_reward(self) -> Result<RewardNet> {
        self.validate()?;
        if self.kind != CheckpointKind::Reward {
            return Err(Error::Schema("checkpoint is not a reward model".into()));
        }
        RewardNet::from_mlp(Mlp {
            spec: self.spec,
            weights: self.weights,
        })
    }
}

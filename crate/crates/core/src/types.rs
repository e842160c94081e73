//! Domain types shared by the whole pipeline: MDP vocabulary and the
//! per-task experiment record.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likert::LikertLevel;
use crate::vec3::{self, Vec3};
use crate::SCHEMA_VERSION;

/// Number of state features fed to the policy network.
pub const STATE_DIM: usize = 5;
/// Number of action components.
pub const ACTION_DIM: usize = 3;

/// Robot state features: displacement to the target plus clearances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// Displacement from the end-effector to the target (meters).
    pub ee_to_target: Vec3,
    /// Distance from the end-effector to the obstacle surface (meters, >= 0).
    pub dist_obstacle: f64,
    /// End-effector height above the ground plane (meters, >= 0).
    pub height: f64,
}

impl EnvState {
    pub fn validate(&self) -> Result<()> {
        if !vec3::is_finite(self.ee_to_target)
            || !self.dist_obstacle.is_finite()
            || !self.height.is_finite()
        {
            return Err(Error::Domain("state has non-finite components".into()));
        }
        if self.dist_obstacle < 0.0 {
            return Err(Error::Domain(format!(
                "dist_obstacle must be >= 0, got {}",
                self.dist_obstacle
            )));
        }
        if self.height < 0.0 {
            return Err(Error::Domain(format!(
                "height must be >= 0, got {}",
                self.height
            )));
        }
        Ok(())
    }

    /// Feature vector consumed by the networks.
    pub fn features(&self) -> [f64; STATE_DIM] {
        [
            self.ee_to_target[0],
            self.ee_to_target[1],
            self.ee_to_target[2],
            self.dist_obstacle,
            self.height,
        ]
    }
}

/// Commanded absolute end-effector position (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvAction {
    pub position: Vec3,
}

impl EnvAction {
    pub fn validate(&self) -> Result<()> {
        if !vec3::is_finite(self.position) {
            return Err(Error::Domain("action has non-finite components".into()));
        }
        Ok(())
    }
}

/// Who produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    HumanDemo,
    RobotRollout,
}

/// One timestep of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: EnvState,
    pub action: EnvAction,
}

/// A fixed-horizon sequence of state-action pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub schema_version: u32,
    pub source: TrajectorySource,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(source: TrajectorySource, steps: Vec<Step>) -> Self {
        Trajectory {
            schema_version: SCHEMA_VERSION,
            source,
            steps,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Check horizon and per-step component invariants.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "trajectory schema_version {} != {}",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        if self.steps.len() != horizon {
            return Err(Error::Schema(format!(
                "trajectory length {} != horizon {}",
                self.steps.len(),
                horizon
            )));
        }
        for step in &self.steps {
            step.state.validate()?;
            step.action.validate()?;
        }
        Ok(())
    }
}

/// Mean and variance of the trust distribution after one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustEstimate {
    pub mean: f64,
    pub variance: f64,
}

/// Record of one complete task: the executed trajectory, the learned
/// per-timestep rewards, the trust trace, and the end-of-task report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub schema_version: u32,
    pub experiment_id: u64,
    pub trajectory: Trajectory,
    pub rewards: Vec<f64>,
    pub trust_estimates: Vec<TrustEstimate>,
    pub report: Option<LikertLevel>,
    pub success_flag: bool,
}

impl ExperimentLog {
    pub fn new(
        experiment_id: u64,
        trajectory: Trajectory,
        rewards: Vec<f64>,
        trust_estimates: Vec<TrustEstimate>,
        report: Option<LikertLevel>,
        success_flag: bool,
    ) -> Self {
        ExperimentLog {
            schema_version: SCHEMA_VERSION,
            experiment_id,
            trajectory,
            rewards,
            trust_estimates,
            report,
            success_flag,
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "experiment log schema_version {} != {}",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        self.trajectory.validate(horizon)?;
        if self.rewards.len() != horizon || self.trust_estimates.len() != horizon {
            return Err(Error::Schema(format!(
                "experiment {} has {} rewards and {} trust estimates, expected {}",
                self.experiment_id,
                self.rewards.len(),
                self.trust_estimates.len(),
                horizon
            )));
        }
        for r in &self.rewards {
            if !r.is_finite() || !(-1.0..=1.0).contains(r) {
                return Err(Error::Schema(format!(
                    "experiment {} has reward outside [-1,1]: {r}",
                    self.experiment_id
                )));
            }
        }
        Ok(())
    }
}

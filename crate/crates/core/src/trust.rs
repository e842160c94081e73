//! Beta-reputation trust engine with per-timestep weighted-aging
//! updates, plus the end-of-task binary baseline.
//!
//! Trust is a Beta(alpha, beta) random variable. Every timestep the
//! learned reward decides a success or failure branch: both parameters
//! age by `gamma`, the success branch adds `omega_s * r` to alpha, the
//! failure branch adds `omega_f * exp(|r|)` to beta. The point estimate
//! is the distribution mean. History carries across tasks: the final
//! state of one episode is the initial state of the next.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TrustEstimate;
use crate::SCHEMA_VERSION;

/// Lower clamp for both distribution parameters. Guards against
/// `alpha <= 0` when `epsilon < 0` lets a negative reward through the
/// success branch.
pub const PARAM_FLOOR: f64 = 1e-6;

/// The calibration target: priors, evidence weights, the success
/// threshold, and the history discount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustParams {
    pub schema_version: u32,
    pub alpha0: f64,
    pub beta0: f64,
    pub omega_success: f64,
    pub omega_failure: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            schema_version: SCHEMA_VERSION,
            alpha0: 1.0,
            beta0: 1.0,
            omega_success: 1.0,
            omega_failure: 1.0,
            epsilon: 0.0,
            gamma: 0.9,
        }
    }
}

impl TrustParams {
    pub fn new(
        alpha0: f64,
        beta0: f64,
        omega_success: f64,
        omega_failure: f64,
        epsilon: f64,
        gamma: f64,
    ) -> Result<Self> {
        let params = TrustParams {
            schema_version: SCHEMA_VERSION,
            alpha0,
            beta0,
            omega_success,
            omega_failure,
            epsilon,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "trust params schema_version {} != {}",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        let positive = [
            ("alpha0", self.alpha0),
            ("beta0", self.beta0),
            ("omega_success", self.omega_success),
            ("omega_failure", self.omega_failure),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !self.epsilon.is_finite() || !(-1.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must be in [-1, 1], got {}",
                self.epsilon
            )));
        }
        if !self.gamma.is_finite() || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Live reputation state: distribution parameters plus evidence counts.
/// `timestep` is the global count across all tasks and always equals
/// `successes + failures`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaTrustState {
    pub alpha: f64,
    pub beta: f64,
    pub successes: u64,
    pub failures: u64,
    pub timestep: u64,
}

/// Which branch of the piecewise update a reward took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Success,
    Failure,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Success => write!(f, "success"),
            Branch::Failure => write!(f, "failure"),
        }
    }
}

/// Fresh state from the priors; all counts zero.
pub fn init_state(params: &TrustParams) -> BetaTrustState {
    BetaTrustState {
        alpha: params.alpha0,
        beta: params.beta0,
        successes: 0,
        failures: 0,
        timestep: 0,
    }
}

/// One weighted-aging step driven by a reward value.
///
/// `r > epsilon` is a success: `alpha' = gamma*alpha + omega_s*r`,
/// `beta' = gamma*beta`. `r <= epsilon` is a failure: `alpha' =
/// gamma*alpha`, `beta' = gamma*beta + omega_f*exp(|r|)`. Both
/// parameters age on every step and are floored at [`PARAM_FLOOR`].
/// Pure function; no hidden state.
pub fn update(state: &BetaTrustState, r: f64, params: &TrustParams) -> Result<BetaTrustState> {
    let (next, _) = update_with_branch(state, r, params)?;
    Ok(next)
}

/// As [`update`], also reporting which branch fired.
pub fn update_with_branch(
    state: &BetaTrustState,
    r: f64,
    params: &TrustParams,
) -> Result<(BetaTrustState, Branch)> {
    if !r.is_finite() {
        return Err(Error::Domain(format!("reward must be finite, got {r}")));
    }
    let (alpha, beta, successes, failures, branch) = if r > params.epsilon {
        (
            params.gamma * state.alpha + params.omega_success * r,
            params.gamma * state.beta,
            state.successes + 1,
            state.failures,
            Branch::Success,
        )
    } else {
        (
            params.gamma * state.alpha,
            params.gamma * state.beta + params.omega_failure * r.abs().exp(),
            state.successes,
            state.failures + 1,
            Branch::Failure,
        )
    };
    Ok((
        BetaTrustState {
            alpha: alpha.max(PARAM_FLOOR),
            beta: beta.max(PARAM_FLOOR),
            successes,
            failures,
            timestep: state.timestep + 1,
        },
        branch,
    ))
}

/// Point estimate of trust: the Beta mean `alpha / (alpha + beta)`.
pub fn trust_mean(state: &BetaTrustState) -> f64 {
    state.alpha / (state.alpha + state.beta)
}

/// Variance of the Beta distribution.
pub fn trust_variance(state: &BetaTrustState) -> f64 {
    let s = state.alpha + state.beta;
    state.alpha * state.beta / (s * s * (s + 1.0))
}

/// Current estimate as a (mean, variance) pair.
pub fn estimate(state: &BetaTrustState) -> TrustEstimate {
    TrustEstimate {
        mean: trust_mean(state),
        variance: trust_variance(state),
    }
}

/// Fold [`update`] over one task's reward stream, recording the estimate
/// after every timestep. The returned state is the carry-over into the
/// next episode.
pub fn run_episode(
    state: &BetaTrustState,
    rewards: &[f64],
    params: &TrustParams,
) -> Result<(BetaTrustState, Vec<TrustEstimate>)> {
    let mut current = *state;
    let mut estimates = Vec::with_capacity(rewards.len());
    for &r in rewards {
        current = update(&current, r, params)?;
        estimates.push(estimate(&current));
    }
    Ok((current, estimates))
}

/// One row of an exported trust trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    /// Global timestep after this update.
    pub q: u64,
    /// 1-based timestep within the episode.
    pub t: usize,
    pub reward: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub variance: f64,
    pub branch: Branch,
}

/// As [`run_episode`], with full per-timestep trace rows for CSV export.
pub fn run_episode_trace(
    state: &BetaTrustState,
    rewards: &[f64],
    params: &TrustParams,
) -> Result<(BetaTrustState, Vec<TraceRow>)> {
    let mut current = *state;
    let mut rows = Vec::with_capacity(rewards.len());
    for (t, &r) in rewards.iter().enumerate() {
        let (next, branch) = update_with_branch(&current, r, params)?;
        rows.push(TraceRow {
            q: next.timestep,
            t: t + 1,
            reward: r,
            alpha: next.alpha,
            beta: next.beta,
            mean: trust_mean(&next),
            variance: trust_variance(&next),
            branch,
        });
        current = next;
    }
    Ok((current, rows))
}

/// Binary performance-based baseline: one update per completed task,
/// driven by the task-level success flag. The estimate is constant
/// within a task by construction.
pub fn baseline_binary_update(
    state: &BetaTrustState,
    task_succeeded: bool,
    params: &TrustParams,
) -> BetaTrustState {
    let (alpha, beta, successes, failures) = if task_succeeded {
        (
            params.gamma * state.alpha + params.omega_success,
            params.gamma * state.beta,
            state.successes + 1,
            state.failures,
        )
    } else {
        (
            params.gamma * state.alpha,
            params.gamma * state.beta + params.omega_failure,
            state.successes,
            state.failures + 1,
        )
    };
    BetaTrustState {
        alpha: alpha.max(PARAM_FLOOR),
        beta: beta.max(PARAM_FLOOR),
        successes,
        failures,
        timestep: state.timestep + 1,
    }
}

/// Literal reading of the weighted-aging sums, kept for comparison only:
/// each step re-discounts the whole parameter history, so evidence is
/// re-added and the parameters grow without bound. The recurrence in
/// [`update`] is the production path.
pub fn literal_aging_replay(rewards: &[f64], params: &TrustParams) -> Vec<(f64, f64)> {
    let mut alpha_hist = vec![params.alpha0];
    let mut beta_hist = vec![params.beta0];
    let discounted = |hist: &[f64], gamma: f64| -> f64 {
        hist.iter()
            .rev()
            .enumerate()
            .map(|(i, v)| gamma.powi(i as i32) * v)
            .sum()
    };
    let mut out = Vec::with_capacity(rewards.len());
    for &r in rewards {
        let mut alpha = discounted(&alpha_hist, params.gamma);
        let mut beta = discounted(&beta_hist, params.gamma);
        if r > params.epsilon {
            alpha += params.omega_success * r;
        } else {
            beta += params.omega_failure * r.abs().exp();
        }
        alpha = alpha.max(PARAM_FLOOR);
        beta = beta.max(PARAM_FLOOR);
        alpha_hist.push(alpha);
        beta_hist.push(beta);
        out.push((alpha, beta));
    }
    out
}

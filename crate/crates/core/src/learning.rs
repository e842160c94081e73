//! Stage-2 trainers: behavior cloning of the Gaussian policy under a
//! linearly interpolated variance weight, alternated with maximum-entropy
//! reward learning whose partition function is importance-sampled from
//! policy rollouts.
//!
//! The variance weight starts low so the policy stays stochastic and
//! explores widely while the reward model is still forming, then rises
//! to full strength by the final epoch.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::env::{reset, rollout, TaskConfig};
use crate::error::{Error, Result};
use crate::models::{PolicyNet, RewardNet, DEFAULT_HIDDEN};
use crate::net::Adam;
use crate::rng::{seeded_rng, Stream};
use crate::types::{Step, Trajectory};

/// Hyperparameters for the stage-2 loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Total learning epochs (K).
    pub epochs: usize,
    pub batch_size: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    /// Robot rollouts drawn per epoch for the partition estimate (M).
    pub rollouts_per_epoch: usize,
    /// Demonstrations in the corpus (N); used when generating one.
    pub demo_count: usize,
    pub policy_learning_rate: f64,
    pub reward_learning_rate: f64,
    /// Reward gradient steps taken per epoch.
    pub maxent_steps_per_epoch: usize,
    /// Hidden layer sizes shared by both networks.
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            eta_min: 0.05,
            eta_max: 1.0,
            rollouts_per_epoch: 32,
            demo_count: 30,
            policy_learning_rate: 1e-3,
            reward_learning_rate: 1e-3,
            maxent_steps_per_epoch: 1,
            hidden: DEFAULT_HIDDEN.to_vec(),
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.rollouts_per_epoch == 0 {
            return Err(Error::Config("rollouts_per_epoch must be >= 1".into()));
        }
        if self.demo_count == 0 {
            return Err(Error::Config("demo_count must be >= 1".into()));
        }
        if self.maxent_steps_per_epoch == 0 {
            return Err(Error::Config("maxent_steps_per_epoch must be >= 1".into()));
        }
        if !(self.eta_min > 0.0 && self.eta_min <= self.eta_max) {
            return Err(Error::Config(format!(
                "need 0 < eta_min <= eta_max, got {} and {}",
                self.eta_min, self.eta_max
            )));
        }
        if !(self.policy_learning_rate > 0.0 && self.reward_learning_rate > 0.0) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        Ok(())
    }
}

/// Linear interpolation of the variance weight across epochs:
/// `eta = eta_min + (k/K) * (eta_max - eta_min)`.
pub fn eta_schedule(epoch: usize, config: &TrainConfig) -> Result<f64> {
    if epoch > config.epochs {
        return Err(Error::Domain(format!(
            "epoch {epoch} outside 0..={}",
            config.epochs
        )));
    }
    let frac = epoch as f64 / config.epochs as f64;
    Ok(config.eta_min + frac * (config.eta_max - config.eta_min))
}

/// Behavior-cloning loss over a batch of state-action pairs:
/// `(1/2) mean[ eta * log sigma^2(s) + ||a - mu(s)||^2 / sigma^2(s) ]`,
/// with its gradient with respect to the policy parameters.
pub fn bc_loss(policy: &PolicyNet, batch: &[Step], eta: f64) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Domain("behavior cloning batch is empty".into()));
    }
    let net = policy.mlp();
    let mut loss = 0.0;
    let mut grads = vec![0.0; net.weights.len()];
    let scale = 1.0 / batch.len() as f64;
    for step in batch {
        let tape = net.forward_cached(&step.state.features())?;
        let out = tape.outputs();
        let mu = &out[0];
        let logvar = out[1][0];
        let var = logvar.exp();
        let mut sq = 0.0;
        for (a, m) in step.action.position.iter().zip(mu) {
            sq += (a - m) * (a - m);
        }
        loss += 0.5 * (eta * logvar + sq / var) * scale;

        // d/dmu = (mu - a)/var ; d/dlogvar = (eta - sq/var)/2.
        let mu_grad: Vec<f64> = mu
            .iter()
            .zip(&step.action.position)
            .map(|(m, a)| scale * (m - a) / var)
            .collect();
        let logvar_grad = vec![scale * 0.5 * (eta - sq / var)];
        let g = net.backward(&tape, &[mu_grad, logvar_grad])?;
        for (acc, gi) in grads.iter_mut().zip(&g.weights) {
            *acc += gi;
        }
    }
    Ok((loss, grads))
}

/// Arithmetic mean of per-step rewards.
pub fn mean_reward(rewards: &[f64]) -> f64 {
    rewards.iter().sum::<f64>() / rewards.len() as f64
}

/// Per-step rewards of a trajectory under the reward model.
pub fn step_rewards(reward: &RewardNet, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.steps
        .iter()
        .map(|s| reward.reward(&s.state, &s.action))
        .collect()
}

/// Trajectory reward: the mean per-step reward, bounded in (-1, 1).
pub fn trajectory_reward(reward: &RewardNet, traj: &Trajectory) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::Domain("trajectory has no steps".into()));
    }
    Ok(mean_reward(&step_rewards(reward, traj)?))
}

/// Log-probability of a trajectory's action sequence under the policy:
/// the product of per-step Gaussian densities, in log space. The
/// human-chosen initial state contributes no density term.
pub fn trajectory_log_prob(policy: &PolicyNet, traj: &Trajectory) -> Result<f64> {
    let mut total = 0.0;
    for step in &traj.steps {
        total += policy.action_log_prob(&step.state, &step.action)?;
    }
    Ok(total)
}

/// Log-sum-exp with the summation ordered by value, so the result is
/// exactly invariant under permutation of the inputs.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut terms: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    max + terms.iter().sum::<f64>().ln()
}

/// Importance-sampled log partition value from per-trajectory rewards
/// and proposal log-densities: `log[(1/M) sum_j exp(R_j) / p_j]`.
pub fn log_partition(trajectory_rewards: &[f64], log_probs: &[f64]) -> Result<f64> {
    if trajectory_rewards.is_empty() || trajectory_rewards.len() != log_probs.len() {
        return Err(Error::Domain(format!(
            "partition estimate needs matching nonempty samples, got {} rewards and {} densities",
            trajectory_rewards.len(),
            log_probs.len()
        )));
    }
    let weights: Vec<f64> = trajectory_rewards
        .iter()
        .zip(log_probs)
        .map(|(r, lp)| r - lp)
        .collect();
    for (j, w) in weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite importance weight for rollout {j}: reward {} log-density {}",
                trajectory_rewards[j], log_probs[j]
            )));
        }
    }
    Ok(log_sum_exp(&weights) - (weights.len() as f64).ln())
}

/// Log of the sampled partition function for the current reward model,
/// with rollouts drawn from (and scored under) the given policy.
pub fn partition_estimate(
    reward: &RewardNet,
    policy: &PolicyNet,
    rollouts: &[Trajectory],
) -> Result<f64> {
    let rewards: Vec<f64> = rollouts
        .iter()
        .map(|t| trajectory_reward(reward, t))
        .collect::<Result<_>>()?;
    let log_probs: Vec<f64> = rollouts
        .iter()
        .map(|t| trajectory_log_prob(policy, t))
        .collect::<Result<_>>()?;
    log_partition(&rewards, &log_probs)
}

/// Accumulate `scale * dR(traj)/dpsi` into `grads`, where `R` is the
/// mean per-step reward.
fn accumulate_reward_grad(
    reward: &RewardNet,
    traj: &Trajectory,
    scale: f64,
    grads: &mut [f64],
) -> Result<()> {
    let net = reward.mlp();
    let per_step = scale / traj.len() as f64;
    for step in &traj.steps {
        let tape = net.forward_cached(&RewardNet::input(&step.state, &step.action))?;
        let g = net.backward(&tape, &[vec![per_step]])?;
        for (acc, gi) in grads.iter_mut().zip(&g.weights) {
            *acc += gi;
        }
    }
    Ok(())
}

/// Maximum-entropy loss `-mean_demos[R(xi)] + log Z` and its gradient
/// with respect to the reward parameters. Rollouts are treated as fixed
/// samples; the gradient flows through both the demo term and the
/// softmax-weighted rollout term of `log Z`.
pub fn maxent_loss(
    reward: &RewardNet,
    demos: &[Trajectory],
    rollouts: &[Trajectory],
    policy: &PolicyNet,
) -> Result<(f64, Vec<f64>)> {
    if demos.is_empty() {
        return Err(Error::Domain("maxent loss needs at least one demo".into()));
    }
    if rollouts.is_empty() {
        return Err(Error::Domain("maxent loss needs at least one rollout".into()));
    }
    let demo_rewards: Vec<f64> = demos
        .iter()
        .map(|t| trajectory_reward(reward, t))
        .collect::<Result<_>>()?;
    let rollout_rewards: Vec<f64> = rollouts
        .iter()
        .map(|t| trajectory_reward(reward, t))
        .collect::<Result<_>>()?;
    let log_probs: Vec<f64> = rollouts
        .iter()
        .map(|t| trajectory_log_prob(policy, t))
        .collect::<Result<_>>()?;
    let log_z = log_partition(&rollout_rewards, &log_probs)?;
    let loss = -mean_reward(&demo_rewards) + log_z;

    let mut grads = vec![0.0; reward.mlp().weights.len()];
    let demo_scale = -1.0 / demos.len() as f64;
    for traj in demos {
        accumulate_reward_grad(reward, traj, demo_scale, &mut grads)?;
    }
    // d logZ / dpsi = sum_j softmax(R_j - log p_j) dR_j/dpsi.
    let log_m = (rollouts.len() as f64).ln();
    for (j, traj) in rollouts.iter().enumerate() {
        let softmax = (rollout_rewards[j] - log_probs[j] - log_z - log_m).exp();
        accumulate_reward_grad(reward, traj, softmax, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Per-epoch training statistics, one CSV row each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub eta: f64,
    pub bc_loss: f64,
    pub maxent_loss: f64,
    pub mean_demo_reward: f64,
    pub mean_rollout_reward: f64,
}

/// Frozen output of stage 2.
#[derive(Debug, Clone)]
pub struct Stage2Result {
    pub policy: PolicyNet,
    pub reward: RewardNet,
    pub report: Vec<EpochStats>,
    pub seed: u64,
}

/// Last finite state of a diverged run.
#[derive(Debug, Clone)]
pub struct Stage2Checkpoint {
    pub policy: PolicyNet,
    pub reward: RewardNet,
    pub completed_epochs: usize,
}

/// Run the stage-2 alternation: one behavior-cloning epoch on the demos
/// with the scheduled eta, then fresh stochastic rollouts and reward
/// gradient steps. Returns the frozen policy and reward model; neither
/// is mutated after this function returns.
///
/// A non-finite loss aborts with [`Error::Diverged`] carrying the last
/// epoch that completed with finite values.
pub fn train_stage2(
    demos: &[Trajectory],
    task: &TaskConfig,
    config: &TrainConfig,
) -> Result<Stage2Result> {
    config.validate()?;
    task.validate()?;
    if demos.is_empty() {
        return Err(Error::Domain("training needs at least one demo".into()));
    }
    for demo in demos {
        demo.validate(task.horizon)?;
    }

    let mut rng = seeded_rng(config.seed);
    let mut policy = PolicyNet::init(&config.hidden, &mut rng)?;
    let mut reward = RewardNet::init(&config.hidden, &mut rng)?;
    let mut policy_opt = Adam::new(config.policy_learning_rate, policy.mlp().weights.len());
    let mut reward_opt = Adam::new(config.reward_learning_rate, reward.mlp().weights.len());

    let pairs: Vec<Step> = demos.iter().flat_map(|t| t.steps.iter().copied()).collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    let mut report = Vec::with_capacity(config.epochs);
    let mut last_good: Option<Stage2Checkpoint> = None;

    for epoch in 0..config.epochs {
        let eta = eta_schedule(epoch, config)?;

        // The epoch body; a numerical failure anywhere inside it is a
        // divergence, reported with the last finite checkpoint.
        let epoch_result = (|| -> Result<(f64, f64, f64, f64)> {
            order.shuffle(&mut rng);
            let mut epoch_bc = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(config.batch_size) {
                let batch: Vec<Step> = chunk.iter().map(|&i| pairs[i]).collect();
                let (loss, grads) = bc_loss(&policy, &batch, eta)?;
                policy_opt.step(&mut policy.mlp_mut().weights, &grads);
                epoch_bc += loss;
                batches += 1;
            }
            epoch_bc /= batches as f64;

            let mut rollouts = Vec::with_capacity(config.rollouts_per_epoch);
            for _ in 0..config.rollouts_per_epoch {
                let s0 = reset(task, &mut rng)?;
                rollouts.push(rollout(&policy, &s0, task, &mut rng, true)?);
            }

            let mut epoch_maxent = 0.0;
            for _ in 0..config.maxent_steps_per_epoch {
                let (loss, grads) = maxent_loss(&reward, demos, &rollouts, &policy)?;
                reward_opt.step(&mut reward.mlp_mut().weights, &grads);
                epoch_maxent = loss;
            }

            let mean_demo_reward = mean_reward(
                &demos
                    .iter()
                    .map(|t| trajectory_reward(&reward, t))
                    .collect::<Result<Vec<_>>>()?,
            );
            let mean_rollout_reward = mean_reward(
                &rollouts
                    .iter()
                    .map(|t| trajectory_reward(&reward, t))
                    .collect::<Result<Vec<_>>>()?,
            );
            Ok((epoch_bc, epoch_maxent, mean_demo_reward, mean_rollout_reward))
        })();

        let (epoch_bc, epoch_maxent, mean_demo_reward, mean_rollout_reward) = match epoch_result {
            Ok(values) => values,
            Err(Error::Numerical(reason)) => {
                return Err(Error::Diverged {
                    epoch,
                    reason,
                    last_good: last_good.map(Box::new),
                })
            }
            Err(other) => return Err(other),
        };

        let finite = epoch_bc.is_finite()
            && epoch_maxent.is_finite()
            && policy.mlp().weights.iter().all(|w| w.is_finite())
            && reward.mlp().weights.iter().all(|w| w.is_finite());
        if !finite {
            return Err(Error::Diverged {
                epoch,
                reason: format!("bc loss {epoch_bc}, maxent loss {epoch_maxent}"),
                last_good: last_good.map(Box::new),
            });
        }

        report.push(EpochStats {
            epoch,
            eta,
            bc_loss: epoch_bc,
            maxent_loss: epoch_maxent,
            mean_demo_reward,
            mean_rollout_reward,
        });
        last_good = Some(Stage2Checkpoint {
            policy: policy.clone(),
            reward: reward.clone(),
            completed_epochs: epoch + 1,
        });
        log::debug!(
            "epoch {epoch}: eta {eta:.3} bc {epoch_bc:.5} maxent {epoch_maxent:.5} \
             demo R {mean_demo_reward:.4} rollout R {mean_rollout_reward:.4}"
        );
    }

    Ok(Stage2Result {
        policy,
        reward,
        report,
        seed: config.seed,
    })
}

/// Draw `count` random-action trajectories: uniform commanded positions
/// inside the workspace from random starts. Used as the contrast set
/// when measuring reward discrimination.
pub fn random_trajectories(
    task: &TaskConfig,
    count: usize,
    rng: &mut Stream,
) -> Result<Vec<Trajectory>> {
    use crate::types::{EnvAction, TrajectorySource};
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut state = reset(task, rng)?;
        let mut steps = Vec::with_capacity(task.horizon);
        for _ in 0..task.horizon {
            let action = EnvAction {
                position: task.workspace.sample(rng),
            };
            let next = crate::env::transition(&state, &action, task)?;
            steps.push(Step { state, action });
            state = next;
        }
        out.push(Trajectory::new(TrajectorySource::RobotRollout, steps));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env;
    use crate::net::Mlp;
    use crate::rng::seeded_rng;
    use crate::types::{EnvAction, EnvState};

    fn config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            hidden: vec![8, 8],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn eta_endpoints_and_midpoint() {
        let cfg = config(100);
        assert_eq!(eta_schedule(0, &cfg).unwrap(), 0.05);
        assert_eq!(eta_schedule(100, &cfg).unwrap(), 1.0);
        assert!((eta_schedule(50, &cfg).unwrap() - 0.525).abs() < 1e-12);
        assert!(eta_schedule(101, &cfg).is_err());
    }

    #[test]
    fn eta_is_nondecreasing() {
        let cfg = config(37);
        let mut prev = 0.0;
        for k in 0..=37 {
            let eta = eta_schedule(k, &cfg).unwrap();
            assert!(eta >= prev);
            prev = eta;
        }
    }

    fn states() -> Vec<EnvState> {
        let task = TaskConfig::default();
        let mut rng = seeded_rng(50);
        (0..5).map(|_| env::reset(&task, &mut rng).unwrap()).collect()
    }

    #[test]
    fn bc_loss_is_zero_at_perfect_unit_variance_fit() {
        // Zero weights plus a mu-head bias equal to the action: mu(s) = a
        // and sigma^2 = 1 everywhere.
        let target = [0.4, 0.5, 0.6];
        let mut mlp = Mlp::zeros(PolicyNet::spec(&[8]).unwrap()).unwrap();
        let n = mlp.weights.len();
        // Head layout: mu weights (3x8), mu bias (3), logvar weights (8),
        // logvar bias (1) at the tail.
        mlp.weights[n - 1 - 8 - 3] = target[0];
        mlp.weights[n - 1 - 8 - 2] = target[1];
        mlp.weights[n - 1 - 8 - 1] = target[2];
        let policy = PolicyNet::from_mlp(mlp).unwrap();
        let batch: Vec<Step> = states()
            .into_iter()
            .map(|state| Step {
                state,
                action: EnvAction { position: target },
            })
            .collect();
        let (loss, _) = bc_loss(&policy, &batch, 0.5).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn bc_loss_reduces_to_half_mse_at_unit_variance() {
        let policy =
            PolicyNet::from_mlp(Mlp::zeros(PolicyNet::spec(&[8]).unwrap()).unwrap()).unwrap();
        let batch: Vec<Step> = states()
            .into_iter()
            .enumerate()
            .map(|(i, state)| Step {
                state,
                action: EnvAction {
                    position: [0.1 * i as f64, 0.2, 0.3],
                },
            })
            .collect();
        let (loss, _) = bc_loss(&policy, &batch, 0.7).unwrap();
        let mse: f64 = batch
            .iter()
            .map(|s| s.action.position.iter().map(|a| a * a).sum::<f64>())
            .sum::<f64>()
            / batch.len() as f64;
        assert!((loss - mse / 2.0).abs() < 1e-12);
    }

    #[test]
    fn bc_gradient_matches_central_differences() {
        let mut rng = seeded_rng(60);
        let mut policy = PolicyNet::init(&[6], &mut rng).unwrap();
        let batch: Vec<Step> = states()
            .into_iter()
            .map(|state| Step {
                state,
                action: EnvAction {
                    position: [0.3, 0.4, 0.5],
                },
            })
            .collect();
        let eta = 0.4;
        let (_, analytic) = bc_loss(&policy, &batch, eta).unwrap();
        let h = 1e-5;
        for i in 0..policy.mlp().weights.len() {
            let orig = policy.mlp().weights[i];
            policy.mlp_mut().weights[i] = orig + h;
            let plus = bc_loss(&policy, &batch, eta).unwrap().0;
            policy.mlp_mut().weights[i] = orig - h;
            let minus = bc_loss(&policy, &batch, eta).unwrap().0;
            policy.mlp_mut().weights[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs()
                / analytic[i].abs().max(numeric.abs()).max(1e-3);
            assert!(rel < 1e-4, "param {i}: rel err {rel}");
        }
    }

    fn demo_set(n: usize) -> (Vec<Trajectory>, TaskConfig) {
        let task = TaskConfig::default();
        let mut rng = seeded_rng(70);
        let demos = (0..n)
            .map(|_| {
                let s0 = env::reset(&task, &mut rng).unwrap();
                env::synth_demo(&s0, &task, &mut rng, 0.01).unwrap()
            })
            .collect();
        (demos, task)
    }

    #[test]
    fn trajectory_reward_examples() {
        let (demos, _) = demo_set(1);
        let zero =
            RewardNet::from_mlp(Mlp::zeros(RewardNet::spec(&[8]).unwrap()).unwrap()).unwrap();
        assert_eq!(trajectory_reward(&zero, &demos[0]).unwrap(), 0.0);

        // Constant output c via the head bias: tanh(atanh(c)) = c.
        let c = 0.37f64;
        let mut mlp = Mlp::zeros(RewardNet::spec(&[8]).unwrap()).unwrap();
        let n = mlp.weights.len();
        mlp.weights[n - 1] = c.atanh();
        let constant = RewardNet::from_mlp(mlp).unwrap();
        let r = trajectory_reward(&constant, &demos[0]).unwrap();
        assert!((r - c).abs() < 1e-12);

        assert_eq!(mean_reward(&[0.5, -0.5, 1.0]), 1.0 / 3.0);
    }

    #[test]
    fn single_sample_partition_is_inverse_density() {
        // R = 0 and p = d gives Z = 1/d.
        let d = 0.125f64;
        let log_z = log_partition(&[0.0], &[d.ln()]).unwrap();
        assert_eq!(log_z, -d.ln());
        assert!((log_z.exp() - 1.0 / d).abs() < 1e-12);
    }

    #[test]
    fn duplicating_rollouts_leaves_partition_unchanged() {
        let rewards = [0.2, -0.4, 0.9];
        let log_probs = [1.3, -0.7, 0.2];
        let base = log_partition(&rewards, &log_probs).unwrap();
        let doubled = log_partition(
            &[rewards.as_slice(), rewards.as_slice()].concat(),
            &[log_probs.as_slice(), log_probs.as_slice()].concat(),
        )
        .unwrap();
        assert!((base - doubled).abs() < 1e-12);
    }

    #[test]
    fn partition_is_permutation_invariant() {
        let rewards = [0.2, -0.4, 0.9, 0.05, -0.9];
        let log_probs = [1.3, -0.7, 0.2, 2.0, -1.5];
        let base = log_partition(&rewards, &log_probs).unwrap();
        let perm = [2usize, 0, 4, 1, 3];
        let r2: Vec<f64> = perm.iter().map(|&i| rewards[i]).collect();
        let p2: Vec<f64> = perm.iter().map(|&i| log_probs[i]).collect();
        // Bitwise equal thanks to the ordered summation.
        assert_eq!(base, log_partition(&r2, &p2).unwrap());
    }

    #[test]
    fn non_finite_density_is_numerical_error() {
        let res = log_partition(&[0.0], &[f64::NEG_INFINITY]);
        assert!(matches!(res, Err(Error::Numerical(_))));
    }

    #[test]
    fn zero_reward_maxent_loss_is_log_mean_inverse_density() {
        let (demos, task) = demo_set(3);
        let mut rng = seeded_rng(80);
        let policy = PolicyNet::init(&[8], &mut rng).unwrap();
        let reward =
            RewardNet::from_mlp(Mlp::zeros(RewardNet::spec(&[8]).unwrap()).unwrap()).unwrap();
        let rollouts: Vec<Trajectory> = (0..4)
            .map(|_| {
                let s0 = env::reset(&task, &mut rng).unwrap();
                env::rollout(&policy, &s0, &task, &mut rng, true).unwrap()
            })
            .collect();
        let (loss, _) = maxent_loss(&reward, &demos, &rollouts, &policy).unwrap();
        let mean_inv: f64 = rollouts
            .iter()
            .map(|t| (-trajectory_log_prob(&policy, t).unwrap()).exp())
            .sum::<f64>()
            / rollouts.len() as f64;
        assert!((loss - mean_inv.ln()).abs() < 1e-9, "loss {loss}");
    }

    #[test]
    fn maxent_gradient_matches_central_differences() {
        let (demos, task) = demo_set(2);
        let mut rng = seeded_rng(90);
        let policy = PolicyNet::init(&[6], &mut rng).unwrap();
        let mut reward = RewardNet::init(&[6], &mut rng).unwrap();
        let rollouts: Vec<Trajectory> = (0..3)
            .map(|_| {
                let s0 = env::reset(&task, &mut rng).unwrap();
                env::rollout(&policy, &s0, &task, &mut rng, true).unwrap()
            })
            .collect();
        let (_, analytic) = maxent_loss(&reward, &demos, &rollouts, &policy).unwrap();
        let h = 1e-5;
        for i in 0..reward.mlp().weights.len() {
            let orig = reward.mlp().weights[i];
            reward.mlp_mut().weights[i] = orig + h;
            let plus = maxent_loss(&reward, &demos, &rollouts, &policy).unwrap().0;
            reward.mlp_mut().weights[i] = orig - h;
            let minus = maxent_loss(&reward, &demos, &rollouts, &policy).unwrap().0;
            reward.mlp_mut().weights[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs()
                / analytic[i].abs().max(numeric.abs()).max(1e-3);
            assert!(rel < 1e-3, "param {i}: rel err {rel}");
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (demos, task) = demo_set(4);
        let cfg = TrainConfig {
            epochs: 3,
            hidden: vec![8],
            rollouts_per_epoch: 4,
            ..TrainConfig::default()
        };
        let a = train_stage2(&demos, &task, &cfg).unwrap();
        let b = train_stage2(&demos, &task, &cfg).unwrap();
        assert_eq!(a.policy.mlp().weights, b.policy.mlp().weights);
        assert_eq!(a.reward.mlp().weights, b.reward.mlp().weights);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn absurd_learning_rate_reports_divergence_with_checkpoint() {
        let (demos, task) = demo_set(3);
        let cfg = TrainConfig {
            epochs: 50,
            hidden: vec![8],
            rollouts_per_epoch: 4,
            policy_learning_rate: 1e9,
            ..TrainConfig::default()
        };
        match train_stage2(&demos, &task, &cfg) {
            Err(Error::Diverged { epoch, last_good, .. }) => {
                // Divergence after the first epoch still leaves a usable
                // checkpoint from the epochs that completed.
                if epoch > 0 {
                    let ckpt = last_good.expect("checkpoint after a finite epoch");
                    assert_eq!(ckpt.completed_epochs, epoch);
                }
            }
            Ok(_) => panic!("expected divergence"),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }
}

//! Stage-3 maximum-likelihood calibration of the trust parameters.
//!
//! Candidate parameter sets are scored by replaying the recorded reward
//! streams from a fresh prior, carrying state across episodes, and
//! summing the negative Beta log-density of each end-of-episode
//! self-report. The success threshold makes the objective piecewise and
//! non-differentiable, so the optimizer is derivative-free differential
//! evolution (rand/1/bin with greedy selection).

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::trust::{baseline_binary_update, init_state, update, TrustParams};
use crate::types::ExperimentLog;

/// Penalty charged per episode whose likelihood term is non-finite.
const NON_FINITE_PENALTY: f64 = 1e12;

/// Reports are clamped into this range before scoring so the density is
/// finite at the scale endpoints.
pub const REPORT_CLAMP: (f64, f64) = (0.01, 0.99);

/// Differential-evolution settings plus per-dimension search bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    pub population: usize,
    /// Differential weight F.
    pub differential_weight: f64,
    /// Crossover rate CR.
    pub crossover_rate: f64,
    pub generations: usize,
    /// Inclusive lower and exclusive upper bound per dimension.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl DeConfig {
    /// Defaults for the six trust parameters
    /// (alpha0, beta0, omega_s, omega_f, epsilon, gamma).
    pub fn for_lambda(seed: u64) -> Self {
        DeConfig {
            population: 48,
            differential_weight: 0.7,
            crossover_rate: 0.9,
            generations: 300,
            bounds: lambda_bounds().to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::Config(format!(
                "population must be >= 4, got {}",
                self.population
            )));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::Config(format!(
                "differential weight must be in (0, 2], got {}",
                self.differential_weight
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config(format!(
                "crossover rate must be in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        if self.generations == 0 {
            return Err(Error::Config("generations must be >= 1".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::Config("bounds must be nonempty".into()));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Config(format!(
                    "bounds for dimension {i} must be finite with lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Search bounds for the six trust parameters, wide enough to contain
/// plausible evidence weights by a comfortable margin.
pub fn lambda_bounds() -> [(f64, f64); 6] {
    [
        (0.1, 50.0),  // alpha0
        (0.1, 50.0),  // beta0
        (0.01, 20.0), // omega_success
        (0.01, 20.0), // omega_failure
        (-1.0, 1.0),  // epsilon
        (0.5, 1.0),   // gamma
    ]
}

pub fn lambda_to_vec(params: &TrustParams) -> [f64; 6] {
    [
        params.alpha0,
        params.beta0,
        params.omega_success,
        params.omega_failure,
        params.epsilon,
        params.gamma,
    ]
}

pub fn lambda_from_vec(v: &[f64]) -> Result<TrustParams> {
    if v.len() != 6 {
        return Err(Error::Domain(format!(
            "lambda vector must have 6 entries, got {}",
            v.len()
        )));
    }
    TrustParams::new(v[0], v[1], v[2], v[3], v[4], v[5])
}

/// Result of a differential-evolution run.
#[derive(Debug, Clone)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best objective after initialization and after each generation.
    pub history: Vec<f64>,
}

/// Minimize `objective` over the configured box with DE/rand/1/bin.
///
/// Per generation, every member is challenged by a trial vector built
/// from three distinct other members, binomially crossed with one forced
/// coordinate, clipped to the bounds, and kept only if it does not score
/// worse. The best-so-far objective is therefore non-increasing.
/// `initial` injects a known-good member into the starting population
/// (warm start); everything is deterministic under the config seed.
pub fn differential_evolution<F>(
    objective: F,
    config: &DeConfig,
    initial: Option<&[f64]>,
) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = config.bounds.len();
    let pop = config.population;
    let mut rng = seeded_rng(config.seed);

    let mut population: Vec<Vec<f64>> = (0..pop)
        .map(|_| {
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..hi))
                .collect()
        })
        .collect();
    if let Some(x0) = initial {
        if x0.len() != dim {
            return Err(Error::Domain(format!(
                "initial member has {} dims, bounds have {dim}",
                x0.len()
            )));
        }
        let clipped: Vec<f64> = x0
            .iter()
            .zip(&config.bounds)
            .map(|(x, &(lo, hi))| x.clamp(lo, hi))
            .collect();
        population[0] = clipped;
    }

    let evaluate = |members: &[Vec<f64>]| -> Vec<f64> {
        members
            .par_iter()
            .map(|x| {
                let v = objective(x);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            })
            .collect()
    };

    let mut fitness = evaluate(&population);
    if fitness.iter().all(|f| !f.is_finite()) {
        return Err(Error::Optimization(
            "objective non-finite on the entire initial population".into(),
        ));
    }

    let best_of = |fitness: &[f64]| -> usize {
        let mut best = 0;
        for i in 1..fitness.len() {
            if fitness[i] < fitness[best] {
                best = i;
            }
        }
        best
    };

    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(fitness[best_of(&fitness)]);

    for _gen in 0..config.generations {
        let mut trials = Vec::with_capacity(pop);
        for i in 0..pop {
            // Three distinct members, all different from i.
            let mut picks = [0usize; 3];
            let mut chosen = 0;
            while chosen < 3 {
                let c = rng.gen_range(0..pop);
                if c != i && !picks[..chosen].contains(&c) {
                    picks[chosen] = c;
                    chosen += 1;
                }
            }
            let [r1, r2, r3] = picks;
            let forced = rng.gen_range(0..dim);
            let mut trial = population[i].clone();
            for j in 0..dim {
                if j == forced || rng.gen::<f64>() < config.crossover_rate {
                    let v = population[r1][j]
                        + config.differential_weight * (population[r2][j] - population[r3][j]);
                    let (lo, hi) = config.bounds[j];
                    trial[j] = v.clamp(lo, hi);
                }
            }
            trials.push(trial);
        }
        let trial_fitness = evaluate(&trials);
        for i in 0..pop {
            if trial_fitness[i] <= fitness[i] {
                population[i] = std::mem::take(&mut trials[i]);
                fitness[i] = trial_fitness[i];
            }
        }
        history.push(fitness[best_of(&fitness)]);
    }

    let best = best_of(&fitness);
    Ok(DeResult {
        best: population[best].clone(),
        best_value: fitness[best],
        history,
    })
}

/// Log-density of Beta(a, b) at `x` in (0, 1).
pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta
}

/// The episodes used to fit the trust parameters: recorded reward
/// streams, task outcomes, and end-of-task self-reports.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    episodes: Vec<ExperimentLog>,
    horizon: usize,
}

impl CalibrationSet {
    /// Validate that every episode carries a full reward stream and a
    /// report, all with a consistent horizon.
    pub fn new(episodes: Vec<ExperimentLog>) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::Schema("calibration set is empty".into()));
        }
        let horizon = episodes[0].rewards.len();
        for episode in &episodes {
            episode.validate(horizon)?;
            if episode.report.is_none() {
                return Err(Error::Schema(format!(
                    "experiment {} has no trust report",
                    episode.experiment_id
                )));
            }
        }
        Ok(CalibrationSet { episodes, horizon })
    }

    pub fn episodes(&self) -> &[ExperimentLog] {
        &self.episodes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Reward streams paired with each report on the unit interval.
    pub fn streams(&self) -> Vec<(&[f64], f64)> {
        self.episodes
            .iter()
            .map(|e| (e.rewards.as_slice(), e.report.expect("validated").unit()))
            .collect()
    }

    /// Task outcomes paired with reports, for the binary baseline.
    pub fn outcomes(&self) -> Vec<(bool, f64)> {
        self.episodes
            .iter()
            .map(|e| (e.success_flag, e.report.expect("validated").unit()))
            .collect()
    }
}

/// Negative log-likelihood of the reports under a candidate parameter
/// set, replaying every stream in order from a fresh prior and scoring
/// the Beta density of each clamped report at its episode end.
///
/// Pure in its inputs; non-finite terms contribute a large finite
/// penalty instead of an error.
pub fn nll_from_streams(params: &TrustParams, streams: &[(&[f64], f64)]) -> f64 {
    let mut state = init_state(params);
    let mut total = 0.0;
    for (rewards, reported) in streams {
        for &r in *rewards {
            match update(&state, r, params) {
                Ok(next) => state = next,
                Err(_) => return NON_FINITE_PENALTY * streams.len() as f64,
            }
        }
        let tau = reported.clamp(REPORT_CLAMP.0, REPORT_CLAMP.1);
        let term = -beta_ln_pdf(tau, state.alpha, state.beta);
        total += if term.is_finite() {
            term
        } else {
            NON_FINITE_PENALTY
        };
    }
    total
}

/// [`nll_from_streams`] over a validated calibration set.
pub fn nll(params: &TrustParams, set: &CalibrationSet) -> f64 {
    nll_from_streams(params, &set.streams())
}

/// Baseline counterpart: replay task-level outcomes with the binary
/// update. Each report is scored against the state the baseline holds
/// *during* that task, i.e. before its own end-of-task update — the
/// same value the comparison report reads at the final timestep.
pub fn nll_binary_from_outcomes(params: &TrustParams, outcomes: &[(bool, f64)]) -> f64 {
    let mut state = init_state(params);
    let mut total = 0.0;
    for &(succeeded, reported) in outcomes {
        let tau = reported.clamp(REPORT_CLAMP.0, REPORT_CLAMP.1);
        let term = -beta_ln_pdf(tau, state.alpha, state.beta);
        total += if term.is_finite() {
            term
        } else {
            NON_FINITE_PENALTY
        };
        state = baseline_binary_update(&state, succeeded, params);
    }
    total
}

pub fn nll_binary(params: &TrustParams, set: &CalibrationSet) -> f64 {
    nll_binary_from_outcomes(params, &set.outcomes())
}

/// Fit the granular model's parameters by DE over the configured
/// bounds. `warm_start` seeds the population with a previous optimum.
pub fn calibrate(
    set: &CalibrationSet,
    config: &DeConfig,
    warm_start: Option<&TrustParams>,
) -> Result<(TrustParams, DeResult)> {
    let streams = set.streams();
    let objective = |v: &[f64]| match lambda_from_vec(v) {
        Ok(params) => nll_from_streams(&params, &streams),
        Err(_) => f64::INFINITY,
    };
    let initial = warm_start.map(lambda_to_vec);
    let result = differential_evolution(objective, config, initial.as_ref().map(|v| &v[..]))?;
    let params = lambda_from_vec(&result.best)?;
    Ok((params, result))
}

/// Fit the binary baseline's parameters by DE. The threshold dimension
/// is inert for the baseline recurrence but kept so both models share
/// the same parameter vector and bounds.
pub fn calibrate_binary(
    set: &CalibrationSet,
    config: &DeConfig,
    warm_start: Option<&TrustParams>,
) -> Result<(TrustParams, DeResult)> {
    let outcomes = set.outcomes();
    let objective = |v: &[f64]| match lambda_from_vec(v) {
        Ok(params) => nll_binary_from_outcomes(&params, &outcomes),
        Err(_) => f64::INFINITY,
    };
    let initial = warm_start.map(lambda_to_vec);
    let result = differential_evolution(objective, config, initial.as_ref().map(|v| &v[..]))?;
    let params = lambda_from_vec(&result.best)?;
    Ok((params, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicBool, Ordering};

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn de_config(dim: usize, population: usize, generations: usize, span: f64) -> DeConfig {
        DeConfig {
            population,
            differential_weight: 0.7,
            crossover_rate: 0.9,
            generations,
            bounds: vec![(-span, span); dim],
            seed: 7,
        }
    }

    #[test]
    fn sphere_6d_reaches_deep_minimum() {
        let cfg = de_config(6, 40, 200, 5.0);
        let result = differential_evolution(sphere, &cfg, None).unwrap();
        assert!(
            result.best_value < 1e-6,
            "sphere best {}",
            result.best_value
        );
    }

    #[test]
    fn rosenbrock_2d_converges() {
        let cfg = de_config(2, 40, 500, 5.0);
        let result = differential_evolution(rosenbrock, &cfg, None).unwrap();
        assert!(
            result.best_value < 1e-3,
            "rosenbrock best {}",
            result.best_value
        );
    }

    #[test]
    fn best_history_is_monotone_non_increasing() {
        let cfg = de_config(4, 20, 80, 5.0);
        let result = differential_evolution(sphere, &cfg, None).unwrap();
        assert_eq!(result.history.len(), cfg.generations + 1);
        for w in result.history.windows(2) {
            assert!(w[1] <= w[0], "history increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn de_is_deterministic_under_seed() {
        let cfg = de_config(3, 16, 40, 5.0);
        let a = differential_evolution(sphere, &cfg, None).unwrap();
        let b = differential_evolution(sphere, &cfg, None).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn de_never_evaluates_outside_bounds() {
        let violated = AtomicBool::new(false);
        let cfg = de_config(4, 16, 60, 2.5);
        let bounds = cfg.bounds.clone();
        let checked = |x: &[f64]| -> f64 {
            for (v, (lo, hi)) in x.iter().zip(&bounds) {
                if v < lo || v > hi {
                    violated.store(true, Ordering::Relaxed);
                }
            }
            sphere(x)
        };
        differential_evolution(checked, &cfg, None).unwrap();
        assert!(!violated.load(Ordering::Relaxed));
    }

    #[test]
    fn all_non_finite_objective_is_optimization_error() {
        let cfg = de_config(2, 8, 10, 1.0);
        let res = differential_evolution(|_| f64::NAN, &cfg, None);
        assert!(matches!(res, Err(Error::Optimization(_))));
    }

    #[test]
    fn warm_start_member_is_used() {
        let cfg = de_config(3, 8, 1, 5.0);
        // With the optimum injected, the best value is 0 immediately.
        let result = differential_evolution(sphere, &cfg, Some(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(result.history[0], 0.0);
    }

    #[test]
    fn config_invariants_enforced() {
        let mut cfg = de_config(2, 3, 10, 1.0);
        assert!(cfg.validate().is_err());
        cfg.population = 8;
        cfg.differential_weight = 2.5;
        assert!(cfg.validate().is_err());
        cfg.differential_weight = 0.7;
        cfg.crossover_rate = 1.5;
        assert!(cfg.validate().is_err());
        cfg.crossover_rate = 0.9;
        cfg.bounds = vec![(1.0, 1.0)];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn uniform_end_distribution_scores_zero() {
        // With no updates the state stays at Beta(1, 1), whose density
        // is 1 everywhere, so the score is 0 regardless of the report
        // (up to the log-gamma approximation's residue).
        let params = TrustParams::default();
        for tau in [0.05, 0.3, 0.7, 0.95] {
            let empty: &[f64] = &[];
            assert!(nll_from_streams(&params, &[(empty, tau)]).abs() < 1e-12);
        }
    }

    #[test]
    fn report_at_mode_beats_report_at_clamp_edge() {
        let params = TrustParams::new(1.0, 1.0, 2.0, 3.0, 0.0, 0.9).unwrap();
        let rewards = [0.6, 0.7, 0.5, 0.8];
        let mut state = init_state(&params);
        for &r in &rewards {
            state = update(&state, r, &params).unwrap();
        }
        let mode = (state.alpha - 1.0) / (state.alpha + state.beta - 2.0);
        let at_mode = nll_from_streams(&params, &[(&rewards[..], mode)]);
        let at_edge = nll_from_streams(&params, &[(&rewards[..], 0.01)]);
        assert!(at_mode < at_edge);
    }

    #[test]
    fn two_episode_pencil_oracle() {
        // Hand-unrolled recurrence plus Beta log-density arithmetic.
        let params = TrustParams::new(1.0, 1.0, 2.0, 3.0, 0.0, 0.9).unwrap();
        let streams: Vec<(&[f64], f64)> =
            vec![(&[0.5, -0.2][..], 0.4), (&[0.8, 0.1][..], 0.7)];
        let value = nll_from_streams(&params, &streams);
        assert!(
            (value - (-0.3486486087772036)).abs() < 1e-12,
            "nll {value}"
        );
    }

    #[test]
    fn beta_ln_pdf_sanity() {
        // Beta(1,1) is uniform.
        assert!(beta_ln_pdf(0.3, 1.0, 1.0).abs() < 1e-12);
        // Beta(2,1) has density 2x.
        assert!(beta_ln_pdf(0.5, 2.0, 1.0).abs() < 1e-12);
        assert!((beta_ln_pdf(0.25, 2.0, 1.0) - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lambda_vector_round_trip() {
        let params = TrustParams::new(1.5, 2.5, 3.7897, 4.539, 0.1, 0.95).unwrap();
        let v = lambda_to_vec(&params);
        let back = lambda_from_vec(&v).unwrap();
        assert_eq!(back, params);
        assert!(lambda_from_vec(&[1.0, 2.0]).is_err());
    }
}

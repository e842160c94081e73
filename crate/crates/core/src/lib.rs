//! Fine-grained probabilistic estimation of human trust in a simulated
//! robot transport task.
//!
//! The pipeline has four stages:
//!
//! 1. **Demonstrations** — a synthetic expert produces obstacle-avoiding
//!    trajectories ([`env::synth_demo`]).
//! 2. **Reward and policy learning** — behavior cloning of a Gaussian
//!    policy plus maximum-entropy reward learning with an
//!    importance-sampled partition function ([`learning::train_stage2`]).
//! 3. **Trust calibration** — a beta-reputation model driven by the
//!    learned per-timestep rewards ([`trust`]), with its parameters fit
//!    to 7-point Likert self-reports by differential evolution
//!    ([`calibrate`]).
//! 4. **Inference** — frozen-parameter trust estimation at every
//!    timestep, compared against an end-of-task binary baseline.
//!
//! All randomness flows through seeded ChaCha streams ([`rng`]), so every
//! stage is bit-reproducible.

pub mod calibrate;
pub mod env;
pub mod error;
pub mod io;
pub mod learning;
pub mod likert;
pub mod models;
pub mod net;
pub mod rng;
pub mod trust;
pub mod types;
pub mod vec3;

pub use error::{Error, Result};

/// Version stamped into every persisted JSON record.
///
/// The field layouts for each record type are documented in
/// `docs/schemas.md`; bump this when any of them changes.
pub const SCHEMA_VERSION: u32 = 1;

//! Bandit-driven discovery and ranking of sub-agent designs.
//!
//! The crate runs an optimization loop that maintains a growing archive of
//! sub-agent designs (arms), selects a small team each round with a UCB
//! policy, evaluates the team on a design set of tasks, and feeds per-arm
//! hindsight credit back into the arm statistics. A Chinese-restaurant-process
//! step occasionally proposes brand-new designs so the archive keeps growing
//! where the evidence warrants it.
//!
//! Modules are layered roughly bottom-up:
//!
//! - [`rng`]: deterministic, labeled random streams; every stochastic choice
//!   in a run draws from a stream derived from `(seed, round, purpose)`.
//! - [`bandit`]: UCB scoring, top-K selection, and label accounting.
//! - [`archive`]: the arm store, its snapshot format, CRP expansion, and
//!   post-hoc ranking.
//! - [`gateway`]: chat-completion providers (HTTP and a deterministic mock)
//!   plus the versioned prompt template assets.
//! - [`simenv`]: a simulated evaluation environment with known ground truth,
//!   used to verify the optimizer end to end at desk scale.
//! - [`evaluation`]: trajectories, orchestrator plans, and the round runner.
//! - [`credit`]: hindsight credit assignment — per-(arm, trajectory) labels
//!   from an oracle or an LLM judge, and the success-rate baseline.
//! - [`factory`]: LLM-backed generation and warm-up refinement of designs.
//! - [`scaffold`]: an LLM-driven evaluation backend speaking an XML
//!   tool-calling convention.
//! - [`policy`]: closed-loop simulated runs for UCB, random, greedy, and an
//!   evolutionary baseline.
//! - [`events`], [`config`], [`runner`], [`report`]: the event-sourced run
//!   log, run configuration, the end-to-end runner with resume, and report
//!   generation.

pub mod archive;
pub mod bandit;
pub mod config;
pub mod credit;
pub mod error;
pub mod evaluation;
pub mod events;
pub mod factory;
pub mod gateway;
pub mod policy;
pub mod report;
pub mod rng;
pub mod runner;
pub mod scaffold;
pub mod simenv;

pub use error::{Error, Result};

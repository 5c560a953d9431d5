//! Mixed-policy reinforcement learning laboratory.
//!
//! Implements AMPO (Adaptive Multi-guidance Policy Optimization) together
//! with its GRPO and SFT baselines over tabular autoregressive softmax
//! policies and synthetic verifiable-reward tasks. Policies are small
//! enough that every log-probability, entropy, and gradient is exact and
//! checkable against finite differences, so the algorithmic claims are
//! testable rather than anecdotal.
//!
//! The pieces:
//!
//! - [`vocab`] / [`task`]: token alphabet, modular-arithmetic task family,
//!   answer-tag extraction, and the composite accuracy+format reward.
//! - [`policy`]: tabular softmax policies with exact log-probs, sampling,
//!   entropy, and gradients of weighted log-likelihood.
//! - [`teacher`]: scripted and tabular teacher policies that report exact
//!   per-token emission probabilities.
//! - [`guidance`]: the multi-guidance pool (curation, verification,
//!   shortest-correct retention), comprehension scoring, and top-k
//!   guidance selection.
//! - [`trainer`]: group-relative advantages, the sparse-reward trigger,
//!   adaptive replacement, the mixed clipped objective, and the training
//!   loop with mini-batch epochs.
//! - [`eval`]: Avg@k / Pass@k evaluation with the unbiased combinatorial
//!   estimator.
//! - [`io`]: line-oriented text formats for tasksets, pools, checkpoints,
//!   metrics, and configs, all with exact float round-trips.

pub mod eval;
pub mod guidance;
pub mod io;
pub mod policy;
pub mod seed;
pub mod task;
pub mod teacher;
pub mod trainer;
pub mod vocab;

pub use eval::{evaluate, pass_at_k, EvalReport};
pub use guidance::{
    comprehension_score, curate_pool, intersect_tasksets, select_top_k, GuidanceEntry,
    GuidancePool,
};
pub use policy::{
    accumulate_weighted_logprob_grad, mean_token_entropy, sample_rollout, sequence_logprobs,
    token_logprob, Context, Gradient, Origin, PolicyParams, Rollout,
};
pub use task::{
    composite_reward, extract_answer, generate_taskset, AnswerSpan, DifficultyProfile, Query,
    RewardBreakdown, TaskSet,
};
pub use teacher::{ScriptedTeacher, TeacherId, TeacherKind, TeacherPolicy};
pub use trainer::{
    build_augmented_batch, group_advantages, mixed_objective_grad, sft_update, shaping,
    sparse_flag, train, unified_advantages, AugmentedBatch, Mode, OffPolicyAggregation,
    Selection, StepObserver, TrainMetrics, TrainerConfig,
};
pub use vocab::{Token, Vocabulary};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or parameter value.
    #[error("config error: {0}")]
    Config(String),
    /// Vocabulary construction or lookup failure.
    #[error("vocabulary error: {0}")]
    Vocab(String),
    /// Task generation or verification failure.
    #[error("task error: {0}")]
    Task(String),
    /// Policy scoring or sampling failure.
    #[error("policy error: {0}")]
    Policy(String),
    /// Guidance pool construction or lookup failure.
    #[error("guidance error: {0}")]
    Guidance(String),
    /// Mismatched tensor or sequence shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Malformed data file.
    #[error("format error in {path}: {msg}")]
    FileFormat { path: String, msg: String },
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Policy-based learning over `Q`: TD(λ) evaluation with linear features,
//! greedy / softmax / mirror-descent improvement, and certificates on the
//! realized per-iteration errors.

mod features;
mod run;
mod td;
mod update;

pub use features::{FeatureFile, FeatureMap, INDEX_CONVENTION};
pub use run::{
    rule_gap_bound, omega_cap_report, projection_error, rl_certificate,
    realized_error_bound, run_policy_based, sa_stationary, InitialQ, RlConfig, RlEvaluation, RlMeta, RlRow,
    RlTrace,
};
pub use td::{sample_trajectory, td_conditioning, td_lambda_run, Conditioning, Sample, TdConfig, TdState};
pub use update::{
    greedy_cap, greedy_update, mirror_cap, mirror_cap_from_prior, mirror_descent_update, omega,
    softmax_cap, softmax_update, PolicyUpdateRule, UpdateKind,
};

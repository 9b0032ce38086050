//! Paired-comparison experiment: session plans, training grades, response
//! aggregation and Thurstone scoring.

pub mod quantile;
pub mod report;
pub mod scoring;
pub mod session;

pub use quantile::{inverse_normal, t_cdf, t_quantile};
pub use report::{conditions_in_log, parse_response_log, score_responses, ListenerScores, ScoreOptions, ScoreReport};
pub use scoring::{
    aggregate_counts, mean_ci, preference_proportions, thurstone_from_proportions, thurstone_scores, tukey_hsd,
    ConditionSummary, EmptyCells, EpsilonRule, HsdPair, HsdTable, PreferenceMatrix, ScalingOptions,
};
pub use session::{
    build_pairs, build_session, build_training_session, grade_training, Choice, PassThreshold, Phase,
    ResponseRecord, SessionPlan, Trial, TrainingGrade,
};

//! Exact small-block oracles and statistical estimators.

mod bounds;
mod experiment;
mod law;
mod leakage;
mod residual;

pub use bounds::{
    check_lemma_bounds, common_error_bound, delta_p, delta_star, delta_u, delta_uv, delta_xv, pinsker_holds,
    secret_error_bound, BoundReport, BOUND_SLACK,
};
pub use experiment::{error_rate_experiment, run_trial, ErrorStats, Proportion, TrialOutcome};
pub use law::{
    divergence, exact_induced_law, pack_bits, pack_symbols, source_block_law, variational_distance, ExactLaw,
    LawVar, LAW_DOMAIN_LIMIT,
};
pub use leakage::{
    leakage_estimate, leakage_exact, leakage_sample, LeakageEstimate, LeakageReport, LeakageSample, ZSummary,
    JOINT_HISTOGRAM_BITS,
};
pub use residual::{residual_exact, residual_monte_carlo, residual_sample, EncoderLayer, MeanEstimate};

//! Analytic bounds assembled from declared or estimated constants, and
//! checks that compare them against measured behavior.

mod checks;
mod constants;
mod report;

pub use checks::{
    average_stationarity, ball_probes, check_drift, check_estimator_moments, check_gamma_f, check_smoothness,
    estimator_moments, max_meta_lipschitz_ratio, meta_dissimilarity_at, population_variance,
    quadratic_meta_hessian_norm, subset_variance_exact, uniform_in_ball, ErrorMoments, MIN_TRIALS, Z99,
};
pub use constants::{
    derived_constants, drift_bounds, estimator_bounds, estimator_symbols, fo_bias_bound, fo_mse_bound, gamma_f_sq,
    hf_bias_bound, hf_mse_bound, max_admissible_beta, meta_smoothness_bound, participation_factor, sigma_f_sq,
    sigma_t_sq, stochastic_bias_bound, subset_variance_formula, theorem_rhs, ConstantSet, ConstantUse,
    DerivedConstants, Provenance, Symbol, Tagged,
};
pub use report::{
    render_table, reports_to_json, within_bound, write_reports_json, BoundReport, ABSOLUTE_TOLERANCE,
    RELATIVE_TOLERANCE,
};

//! Gaussian-process Bayesian optimization on finite domains, built around
//! posterior sample-path policies (Thompson sampling and PI from the sample
//! maximum) next to UCB, EI, and classic PI baselines, plus the machinery to
//! verify the moment, tail, and information-gain bounds that back their
//! regret guarantees.

pub mod acquisition;
pub mod domain;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod theory;

pub use acquisition::verify_equivalence;
pub use acquisition::{
    beta_heuristic, beta_theoretical, draw_zeta, select_ei, select_gp_ucb, select_pi_classic,
    select_pims, select_ts, AcquisitionRecord, EquivalenceReport,
};
pub use domain::{BoxDomain, FiniteGrid};
pub use error::{Error, Result};
pub use gp::{fit_lengthscale, log_marginal_likelihood, posterior_var_floor, Dataset, GpPosterior};
pub use harness::{
    aggregate, confidence_track, evaluated_std_stats, gen_objective, regret_series, run_bo,
    write_trace_csv, ConfidenceQuantiles, EvaluatedStdStats, Objective, Policy, RegretSeries,
    RunSettings, RunTrace, SeriesSummary, StepRecord,
};
pub use kernel::{KernelFamily, KernelSpec};
pub use rng::derive_rng;
pub use sampling::{
    build_rff, draw_posterior_sample, exact_grid_sample, FeatureMap, GridSampler, SamplePath,
};
pub use theory::{
    bcr_bound_finite, bound_constants, build_discretization, gauss_tail_check, info_gain, m_t_pims,
    mc_eta_bound, mig, tau_ts, variance_sum_bound_check, BoundConstants, Discretization,
    McMomentReport, MigEstimate, MigMode, VerifierReport,
};

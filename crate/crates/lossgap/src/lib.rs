//! Structural decomposition of excess loss under latency and ordering
//! constraints.
//!
//! The library computes a lower-bound decomposition of the gap between a
//! constrained decision system's loss and its ideal benchmark into three
//! interpretable penalties — an order penalty, a latency penalty, and their
//! geometric interaction — using Bregman projections onto convex feasibility
//! sets. It also estimates the same components empirically from 2×2 toggled
//! regime data with inverse-propensity weighting diagnostics, fits monotone
//! penalty curves from graded experiments, and ships robust-reporting helpers
//! (convexified bounds, curvature penalties, safe lower bounds, penalty
//! ratios).
//!
//! Modules:
//!
//! * [`potential`] — Legendre potentials, mirror maps, Bregman divergences.
//! * [`sets`] — convex feasibility sets, single-set projections, cyclic
//!   Bregman–Dykstra intersection projections, geometry diagnostics.
//! * [`decomposition`] — the three-term decomposition, master-inequality
//!   verification, convexified bounds, and reporting helpers.
//! * [`empirical`] — 2×2 regime estimators, weight truncation and ESS
//!   diagnostics, clustered bootstrap intervals, SUTVA sensitivity.
//! * [`calibration`] — weighted isotonic regression and penalty-surface fits.
//! * [`demo`] — the closed-form Gaussian toy curves.
//! * [`simulate`] — a synthetic 2×2 toggled-experiment generator.

pub mod calibration;
pub mod decomposition;
pub mod demo;
pub mod empirical;
pub mod potential;
pub mod sets;
pub mod simulate;

pub use calibration::{fit_penalty_surfaces, isotonic_fit, GradedObservation, MonotoneCurve};
pub use decomposition::{
    convexified_decompose, decompose, hull_of_box_union, lb_safe, penalty_ratio, verify_master,
    DecompositionReport, NcxPenalty, PenaltyRatio, RatioVerdict,
};
pub use decomposition::zeta_upper_bound;
pub use demo::{gaussian_curves, CurveTable, ToyConfig};
pub use empirical::{
    cluster_bootstrap, dr_mean, empirical_lower_bound, ess_guardrail, estimate_components,
    estimate_regime_table, ipw_mean, read_samples_csv, sutva_interval, truncation_bias_bound,
    BootstrapPipeline, ComponentEstimates, Convention, EstimatorKind, GuardrailVerdict, Interval,
    Regime, RegimeTable, StatisticKind, WeightedMean, WeightedSample,
};
pub use potential::{gaussian_kl, BregmanError, DualPoint, Point, Potential};
pub use sets::{
    gconvexity_check, normal_alignment, project, project_intersection, pythagorean_gap,
    ConstraintSet, GConvexityReport, Projection, ProjectionOptions, SetError,
};
pub use simulate::{simulate_2x2, DgpConfig};

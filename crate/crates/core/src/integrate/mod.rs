//! Gauss forms, graph integrands and Monte Carlo estimates of configuration
//! space integrals.

mod forms;

pub use forms::{
    area_form, canonical_integrand, gauss_direction, graph_integrand, labelled_integrand, propagator, Configuration,
};
mod mc;

pub use mc::{
    linking_integral, linking_integral_with, mc_integrate, mc_integrate_with, mc_trace, omega_normalization,
    trace_to_csv, IntegralEstimate, McOptions, TracePoint, MIN_DISTANCE, SUBSTREAMS,
};
mod invariants;

pub use invariants::{
    graph_terms, invariant_from_weight, invariant_from_weight_with, v2, v2_with, vassiliev_finite_difference,
    GraphTerm, InvariantEstimate, SingularKnot,
};

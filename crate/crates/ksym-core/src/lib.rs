//! Canonical connections on k-symplectic Darboux charts.
//!
//! Everything operates on a chart of `R^{n(k+1)}` with coordinates
//! `(x1..xn, y1..y{kn})`, the standard two-forms
//! `omega_alpha = sum_i dx_i ^ dy_{(alpha-1)n+i}`, the vertical foliation
//! `{x = const}`, and a transversal distribution presented as the graph
//! `X_i = d/dx_i - sum t_i^{aj} d/dy_{(a-1)n+j}` over a user-supplied table
//! of scalar fields `t_i^{aj}`.
//!
//! Normalization: two-forms evaluate with the alternating-sum convention,
//! `omega(u, v) = sum_{l<m} c_lm (u_l v_m - u_m v_l)`, and the standard forms
//! carry coefficients `1/2`, so `(dx ^ dy)(d/dx, d/dy) = 1/2` and
//! `omega_alpha(Y_{bi}, X_j) = -(1/2) delta_ab delta_ij`. Every constant in
//! this crate, its tests, and its reports follows that convention.

pub mod chart;
pub mod charclass;
pub mod connection;
pub mod ehresmann;
pub mod expr;
pub mod kaehler;
pub mod normalform;
pub mod structures;

pub use chart::{
    adapted_frame_at, frame_bracket_at, AdaptedFrame, ChartError, ChartSpec, CoordLabel,
    ManifoldSpec, MetricSpec, Point, TangentVector,
};
pub use expr::{
    eval_jet2, format_field, parse_scalar_field, EvalError, Jet2, ParseError, ScalarField,
};

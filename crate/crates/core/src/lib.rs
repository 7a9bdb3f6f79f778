//! Numerical laboratory for the two-phase Bernoulli free-boundary problem on
//! the upper half-disc `B_1^+ = {|x| < 1, x1 > 0}`.
//!
//! The functional is `J(u) = int |grad u|^2 + Lambda chi{u > 0}` with
//! Dirichlet data `f = a+ x2^+ - a- x2^- + g` on the flat boundary
//! `{x1 = 0}`. The crate minimizes `J` over continuous piecewise-linear
//! fields on a radially graded mesh, extracts the free boundary
//! `d{u > 0}`, and measures Weiss energies, blow-ups, touch angles and
//! growth rates against the exact homogeneous solutions `v_S` and `v_L`.

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod closed_form;
pub mod config;
mod error;
pub mod experiments;
pub mod freeboundary;
pub mod functional;
pub mod io;
mod linalg;
pub mod mesh;
pub mod minimize;
pub mod weiss;

pub use error::{Error, Result};

/// A point of the closed half-plane `{x1 >= 0}`.
pub type Point = [f64; 2];

pub use closed_form::{derive_params, GlobalSolution, ProblemSpec, Variant};
pub use mesh::{build_mesh, HalfDiscMesh, ScalarField};

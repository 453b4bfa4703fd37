//! Structured-grid fields, finite differences and quadrature.

mod diff;
mod field;
mod grid;
mod interp;
mod io;
mod quad;

pub use diff::{grad4_at, grad_at, gradient, hess_at, hessian, jacobian, partial, partial4, partials};
pub(crate) use field::same_grid;
pub use field::{Mat2Field, Mat3Field, ScalarField, VectorField, VectorField2, VectorField3};
pub use grid::{Axis, Grid, NodeKind, Stencil};
pub use interp::sample;
pub use io::{read_field, write_field, FieldFile};
pub use quad::{distance, field_norm, integrate, integrate_values, NormKind};

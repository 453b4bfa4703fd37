//! Finite-difference calculus on masked grids.

use super::field::{Mat2Field, ScalarField, VectorField, VectorField2};
use super::grid::{Axis, Grid, Stencil};
use crate::error::{Error, Result};
use crate::linalg::Sym2;
use crate::par::map_range;

#[inline]
fn apply<const N: usize>(s: &Stencil<N>, vals: &[f64]) -> f64 {
    s.iter().map(|&(k, w)| w * vals[k]).sum()
}

/// First partial derivative of nodal values at node `k`. Zero off the domain.
pub fn partial(grid: &Grid, vals: &[f64], k: usize, axis: Axis) -> f64 {
    grid.d1(k, axis).map_or(0.0, |s| apply(&s, vals))
}

/// Gradient of nodal values at node `k`.
pub fn grad_at(grid: &Grid, vals: &[f64], k: usize) -> [f64; 2] {
    [partial(grid, vals, k, Axis::X), partial(grid, vals, k, Axis::Y)]
}

/// Fourth-order first partial derivative, see [`Grid::d1_fourth`].
pub fn partial4(grid: &Grid, vals: &[f64], k: usize, axis: Axis) -> f64 {
    grid.d1_fourth(k, axis).map_or(0.0, |s| apply(&s, vals))
}

pub fn grad4_at(grid: &Grid, vals: &[f64], k: usize) -> [f64; 2] {
    [partial4(grid, vals, k, Axis::X), partial4(grid, vals, k, Axis::Y)]
}

/// Hessian of nodal values at node `k`. Zero off the domain.
pub fn hess_at(grid: &Grid, vals: &[f64], k: usize) -> Sym2 {
    if !grid.in_domain(k) {
        return Sym2::ZERO;
    }
    let xx = grid.d2(k, Axis::X).map_or(0.0, |s| apply(&s, vals));
    let yy = grid.d2(k, Axis::Y).map_or(0.0, |s| apply(&s, vals));
    let xy = grid.dxy(k).map_or(0.0, |s| apply(&s, vals));
    Sym2::new(xx, xy, yy)
}

fn check(grid: &Grid, vals: &[f64]) -> Result<()> {
    grid.ensure_supported()?;
    if let Some(k) = (0..grid.len()).find(|&k| grid.in_domain(k) && !vals[k].is_finite()) {
        let (i, j) = grid.ij(k);
        return Err(Error::InvalidArgument(format!("non-finite value at node ({i}, {j})")));
    }
    Ok(())
}

pub fn gradient(f: &ScalarField) -> Result<VectorField2> {
    let g = f.grid();
    check(g, f.values())?;
    let vals = map_range(g.len(), |k| grad_at(g, f.values(), k));
    VectorField::new(g.clone(), vals)
}

pub fn hessian(f: &ScalarField) -> Result<Mat2Field> {
    let g = f.grid();
    check(g, f.values())?;
    let vals = map_range(g.len(), |k| hess_at(g, f.values(), k));
    Mat2Field::new(g.clone(), vals)
}

/// Partial derivatives of every component of a vector field: `out[k] = (∂₁v, ∂₂v)`.
pub fn jacobian<const D: usize>(v: &VectorField<D>) -> Result<Vec<[[f64; D]; 2]>> {
    let g = v.grid();
    g.ensure_supported()?;
    let comps: Vec<Vec<f64>> = (0..D).map(|d| v.values().iter().map(|x| x[d]).collect()).collect();
    Ok(map_range(g.len(), |k| {
        let mut out = [[0.0; D]; 2];
        for (d, c) in comps.iter().enumerate() {
            out[0][d] = partial(g, c, k, Axis::X);
            out[1][d] = partial(g, c, k, Axis::Y);
        }
        out
    }))
}

/// Gradient of a nodal array at every node.
pub fn partials(grid: &Grid, vals: &[f64]) -> Vec<[f64; 2]> {
    map_range(grid.len(), |k| grad_at(grid, vals, k))
}

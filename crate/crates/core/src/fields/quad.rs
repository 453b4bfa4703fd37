use std::fmt;
use std::str::FromStr;

use super::diff::{grad_at, hess_at};
use super::field::ScalarField;
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::par::{map_range, pairwise_sum};

/// Trapezoid integral of nodal values over the masked cells.
pub fn integrate_values(grid: &Grid, vals: &[f64]) -> Result<f64> {
    if grid.weights().iter().all(|&w| w == 0.0) {
        return Err(Error::EmptyMask);
    }
    let terms: Vec<f64> = grid.weights().iter().zip(vals).map(|(w, v)| w * v).collect();
    Ok(pairwise_sum(&terms))
}

pub fn integrate(f: &ScalarField) -> Result<f64> {
    integrate_values(f.grid(), f.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    C0,
    L2,
    W22,
}

impl FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c0" => Ok(NormKind::C0),
            "l2" => Ok(NormKind::L2),
            "w22" => Ok(NormKind::W22),
            _ => Err(Error::UnknownNorm(s.to_string())),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::C0 => "C0",
            NormKind::L2 => "L2",
            NormKind::W22 => "W22",
        })
    }
}

/// Grid norm of a field. `C0` is the max over the domain, `L2` and `W22` use
/// the trapezoid rule with the Frobenius norm of the Hessian.
pub fn field_norm(f: &ScalarField, kind: NormKind) -> Result<f64> {
    let g = f.grid();
    match kind {
        NormKind::C0 => {
            if g.domain_nodes().is_empty() {
                return Err(Error::EmptyMask);
            }
            Ok(f.max_abs())
        }
        NormKind::L2 => {
            let sq: Vec<f64> = f.values().iter().map(|v| v * v).collect();
            Ok(integrate_values(g, &sq)?.sqrt())
        }
        NormKind::W22 => {
            g.ensure_supported()?;
            let v = f.values();
            let dens = map_range(g.len(), |k| {
                if !g.in_domain(k) {
                    return 0.0;
                }
                let d = grad_at(g, v, k);
                v[k] * v[k] + d[0] * d[0] + d[1] * d[1] + hess_at(g, v, k).norm2()
            });
            Ok(integrate_values(g, &dens)?.sqrt())
        }
    }
}

/// `field_norm` of `a - b`.
pub fn distance(a: &ScalarField, b: &ScalarField, kind: NormKind) -> Result<f64> {
    field_norm(&a.sub(b)?, kind)
}

//! Oscillation of planar maps with positive Jacobian over discs.

use crate::error::{Error, Result};
use crate::fields::{jacobian, sample, ScalarField, VectorField2};
use crate::par::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationCheck {
    /// Diameter of `v(B(x, δ))` over the grid nodes in the disc.
    pub measured: f64,
    /// `√(2π) (ln R/δ)^{-1/2} ‖∇v‖_{L²(B(x,R))}`
    pub bound: f64,
    pub violated: bool,
}

fn diameter(points: &[[f64; 2]]) -> f64 {
    let mut best = 0.0f64;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            best = best.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    best
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Checks `B(x, R)` against the mask and the sign of `det ∇v` inside it.
fn check_ball(v: &VectorField2, jac: &[[[f64; 2]; 2]], x: [f64; 2], r: f64) -> Result<Vec<usize>> {
    let g = v.grid();
    let [x0, x1, y0, y1] = g.bbox();
    if x[0] - r < x0 || x[0] + r > x1 || x[1] - r < y0 || x[1] + r > y1 {
        return Err(Error::InvalidArgument(format!(
            "disc of radius {r} about {x:?} leaves the grid"
        )));
    }
    let mut inside = Vec::new();
    for k in 0..g.len() {
        if dist(g.point(k), x) <= r {
            if !g.in_domain(k) {
                let (i, j) = g.ij(k);
                return Err(Error::InvalidArgument(format!(
                    "disc of radius {r} about {x:?} contains node ({i}, {j}) outside the domain"
                )));
            }
            let d = jac[k];
            let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
            if !(det > 0.0) {
                let (i, j) = g.ij(k);
                return Err(Error::InvalidArgument(format!(
                    "det grad v = {det:.3e} <= 0 at node ({i}, {j})"
                )));
            }
            inside.push(k);
        }
    }
    Ok(inside)
}

/// Measured oscillation on `B(x, δ)` against the modulus-of-continuity bound
/// for maps with positive Jacobian.
pub fn oscillation_bound(v: &VectorField2, x: [f64; 2], delta: f64, r: f64) -> Result<OscillationCheck> {
    if !(delta > 0.0 && delta < r) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < delta < R, got delta = {delta}, R = {r}"
        )));
    }
    let g = v.grid();
    let jac = jacobian(v)?;
    let ball = check_ball(v, &jac, x, r)?;
    let cell = g.hx() * g.hy();
    let energy: Vec<f64> = ball
        .iter()
        .map(|&k| {
            let d = jac[k];
            cell * (d[0][0].powi(2) + d[0][1].powi(2) + d[1][0].powi(2) + d[1][1].powi(2))
        })
        .collect();
    let grad_l2 = pairwise_sum(&energy).sqrt();
    let bound = (2.0 * std::f64::consts::PI).sqrt() * (r / delta).ln().powf(-0.5) * grad_l2;
    let small: Vec<[f64; 2]> = ball
        .iter()
        .filter(|&&k| dist(g.point(k), x) <= delta)
        .map(|&k| v.at(k))
        .collect();
    let measured = diameter(&small);
    Ok(OscillationCheck {
        measured,
        bound,
        violated: measured > bound,
    })
}

/// Oscillation of `v` over the closed disc `B(x, ρ)` and over its boundary
/// circle, both sampled by interpolation at `m` points on each of several
/// concentric circles (the centre included).
pub fn osc_ball_and_sphere(v: &VectorField2, x: [f64; 2], rho: f64, m: usize) -> Result<(f64, f64)> {
    let comps = [v.component(0), v.component(1)];
    let at = |p: [f64; 2]| -> Result<[f64; 2]> {
        let s = |c: &ScalarField| {
            sample(c, p).ok_or_else(|| Error::InvalidArgument(format!("point {p:?} outside the domain")))
        };
        Ok([s(&comps[0])?, s(&comps[1])?])
    };
    let circle = |r: f64| -> Result<Vec<[f64; 2]>> {
        (0..m)
            .map(|a| {
                let t = 2.0 * std::f64::consts::PI * a as f64 / m as f64;
                at([x[0] + r * t.cos(), x[1] + r * t.sin()])
            })
            .collect()
    };
    let sphere = circle(rho)?;
    let mut ball = vec![at(x)?];
    let rings = 8;
    for s in 1..=rings {
        ball.extend(circle(rho * s as f64 / rings as f64)?);
    }
    Ok((diameter(&ball), diameter(&sphere)))
}

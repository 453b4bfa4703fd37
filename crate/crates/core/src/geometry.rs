//! Shallow metrics, Christoffel symbols, Gaussian curvature and planar
//! isometric immersions of flat metrics.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{grad4_at, grad_at, hess_at, partial, sample, Axis, Grid, Mat2Field, ScalarField, VectorField2};
use crate::linalg::{ShiftedCholesky, SparseSystem, Sym2};
use crate::par::{map_range, pairwise_sum};

/// Symmetric positive definite 2x2 metric per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric2Field(Mat2Field);

impl Metric2Field {
    /// Checks `det g > 0` and `g11 > 0` at every in-domain node.
    pub fn new(m: Mat2Field) -> Result<Self> {
        let g = m.grid();
        for k in g.domain_nodes() {
            let a = m.at(k);
            if !(a.xx > 0.0 && a.det() > 0.0) {
                let (i, j) = g.ij(k);
                return Err(Error::MetricDegenerate {
                    i,
                    j,
                    det: a.det(),
                    hint: "metric must be positive definite".into(),
                });
            }
        }
        Ok(Metric2Field(m))
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> Sym2) -> Result<Self> {
        Self::new(Mat2Field::from_fn(grid, f))
    }

    pub fn field(&self) -> &Mat2Field {
        &self.0
    }
    pub fn grid(&self) -> &Arc<Grid> {
        self.0.grid()
    }
    pub fn at(&self, k: usize) -> Sym2 {
        self.0.at(k)
    }

    /// Largest Frobenius norm over the domain.
    pub fn max_norm(&self) -> f64 {
        self.grid()
            .domain_nodes()
            .into_iter()
            .map(|k| self.at(k).norm2().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `det g` for `g = Id + h²(∇v0⊗∇v0 − ∇v1⊗∇v1)` in closed form.
pub fn shallow_det(gv0: [f64; 2], gv1: [f64; 2], h: f64) -> f64 {
    let h2 = h * h;
    let perp = -gv0[1] * gv1[0] + gv0[0] * gv1[1];
    let n0 = gv0[0] * gv0[0] + gv0[1] * gv0[1];
    let n1 = gv1[0] * gv1[0] + gv1[1] * gv1[1];
    1.0 - h2 * h2 * perp * perp + h2 * (n0 - n1)
}

fn shallow_at(gv0: [f64; 2], gv1: [f64; 2], h: f64) -> Sym2 {
    Sym2::IDENTITY + (Sym2::outer(gv0) - Sym2::outer(gv1)).scale(h * h)
}

/// `g = Id + h²(∇v0⊗∇v0 − ∇v1⊗∇v1)`.
pub fn shallow_metric(v0: &ScalarField, v1: &ScalarField, h: f64) -> Result<Metric2Field> {
    crate::fields::same_grid(v0.grid(), v1.grid())?;
    let grid = v0.grid();
    grid.ensure_supported()?;
    let vals = map_range(grid.len(), |k| {
        if !grid.in_domain(k) {
            return Sym2::ZERO;
        }
        shallow_at(grad_at(grid, v0.values(), k), grad_at(grid, v1.values(), k), h)
    });
    let m = Mat2Field::new(grid.clone(), vals)?;
    Metric2Field::new(m).map_err(|e| match e {
        Error::MetricDegenerate { i, j, det, .. } => {
            let k = grid.idx(i, j);
            let s = grad_at(grid, v1.values(), k);
            let n1 = (s[0] * s[0] + s[1] * s[1]).sqrt();
            let hint = if n1 > 0.0 {
                format!("try h < {:.3e} (1/|grad v1| at this node)", 1.0 / n1)
            } else {
                "reduce h".into()
            };
            Error::MetricDegenerate { i, j, det, hint }
        }
        other => other,
    })
}

/// `Γ^m_{ij}` per node, stored as one symmetric matrix in `(i, j)` per upper index `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelField {
    grid: Arc<Grid>,
    values: Vec<[Sym2; 2]>,
}

impl ChristoffelField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn at(&self, k: usize) -> [Sym2; 2] {
        self.values[k]
    }
    /// `Γ^m_{ij}` at node `k`.
    pub fn get(&self, k: usize, m: usize, i: usize, j: usize) -> f64 {
        self.values[k][m].get(i, j)
    }
    pub fn max_abs(&self) -> f64 {
        self.grid
            .domain_nodes()
            .into_iter()
            .flat_map(|k| self.values[k])
            .map(|s| s.xx.abs().max(s.xy.abs()).max(s.yy.abs()))
            .fold(0.0, f64::max)
    }
}

fn metric_partials(g: &Metric2Field) -> Vec<[Sym2; 2]> {
    let grid = g.grid();
    let [xx, xy, yy] = g.field().components();
    map_range(grid.len(), |k| {
        let d = |axis| {
            Sym2::new(
                partial(grid, xx.values(), k, axis),
                partial(grid, xy.values(), k, axis),
                partial(grid, yy.values(), k, axis),
            )
        };
        [d(Axis::X), d(Axis::Y)]
    })
}

/// `Γ^m_{ij} = ½ g^{ml} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`.
pub fn christoffel(g: &Metric2Field) -> Result<ChristoffelField> {
    let grid = g.grid();
    grid.ensure_supported()?;
    let dg = metric_partials(g);
    let values = map_range(grid.len(), |k| {
        if !grid.in_domain(k) {
            return [Sym2::ZERO; 2];
        }
        let inv = g.at(k).inverse().expect("validated positive definite");
        let d = &dg[k];
        let first = |l: usize, i: usize, j: usize| 0.5 * (d[i].get(j, l) + d[j].get(i, l) - d[l].get(i, j));
        let second = |m: usize, i: usize, j: usize| (0..2).map(|l| inv.get(m, l) * first(l, i, j)).sum::<f64>();
        [0, 1].map(|m| Sym2::new(second(m, 0, 0), second(m, 0, 1), second(m, 1, 1)))
    });
    Ok(ChristoffelField {
        grid: grid.clone(),
        values,
    })
}

/// How [`gauss_curvature`] evaluates `κ`.
#[derive(Debug, Clone, Copy)]
pub enum CurvatureMode<'a> {
    /// `κ = R_1212 / det g` from finite differences of the Christoffel symbols.
    General,
    /// Closed form for `g = shallow_metric(v0, v1, h)`.
    Shallow {
        v0: &'a ScalarField,
        v1: &'a ScalarField,
        h: f64,
    },
}

/// Pieces of the closed-form shallow curvature at one node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShallowTerms {
    /// `det(∇²v0 − Γ^k_{ij} ∂_k v0)`
    pub d: f64,
    /// `1 − h² g^{ij} ∂_i v0 ∂_j v0`
    pub s0: f64,
    /// `1 − h² |∇v1|²`
    pub s1: f64,
    pub det_g: f64,
    pub det_hess_v1: f64,
    pub cof_hess_v1: Sym2,
}

pub(crate) fn shallow_terms(
    grid: &Grid,
    v0: &[f64],
    v1: &[f64],
    g: Sym2,
    gamma: [Sym2; 2],
    h: f64,
    k: usize,
) -> ShallowTerms {
    let h2 = h * h;
    let d0 = grad_at(grid, v0, k);
    let d1 = grad_at(grid, v1, k);
    let inv = g.inverse().expect("positive definite metric");
    let cov = hess_at(grid, v0, k) - (gamma[0].scale(d0[0]) + gamma[1].scale(d0[1]));
    let h1 = hess_at(grid, v1, k);
    ShallowTerms {
        d: cov.det(),
        s0: 1.0 - h2 * inv.quad(d0),
        s1: 1.0 - h2 * (d1[0] * d1[0] + d1[1] * d1[1]),
        det_g: g.det(),
        det_hess_v1: h1.det(),
        cof_hess_v1: h1.cof(),
    }
}

impl ShallowTerms {
    pub fn kappa(&self, h: f64) -> f64 {
        h * h * (self.d / (self.s0 * self.det_g) - self.s0 * self.det_hess_v1 / (self.s1 * self.s1))
    }

    /// `Φ = s1² D − s0² det g · det ∇²v1`; vanishes exactly when `κ` does.
    pub fn phi(&self) -> f64 {
        self.s1 * self.s1 * self.d - self.s0 * self.s0 * self.det_g * self.det_hess_v1
    }
}

pub fn gauss_curvature(g: &Metric2Field, mode: CurvatureMode<'_>) -> Result<ScalarField> {
    let grid = g.grid();
    grid.ensure_supported()?;
    let gamma = christoffel(g)?;
    let vals = match mode {
        CurvatureMode::General => {
            let comp =
                |m: usize, sel: fn(&Sym2) -> f64| -> Vec<f64> { gamma.values.iter().map(|c| sel(&c[m])).collect() };
            let g22: [Vec<f64>; 2] = [comp(0, |s| s.yy), comp(1, |s| s.yy)];
            let g12: [Vec<f64>; 2] = [comp(0, |s| s.xy), comp(1, |s| s.xy)];
            map_range(grid.len(), |k| {
                if !grid.in_domain(k) {
                    return 0.0;
                }
                let gk = g.at(k);
                let c = gamma.at(k);
                let r = |m: usize| {
                    let quad: f64 = (0..2)
                        .map(|q| c[m].get(0, q) * c[q].yy - c[m].get(1, q) * c[q].xy)
                        .sum();
                    partial(grid, &g22[m], k, Axis::X) - partial(grid, &g12[m], k, Axis::Y) + quad
                };
                (gk.xx * r(0) + gk.xy * r(1)) / gk.det()
            })
        }
        CurvatureMode::Shallow { v0, v1, h } => {
            crate::fields::same_grid(grid, v0.grid())?;
            crate::fields::same_grid(grid, v1.grid())?;
            let expected = shallow_metric(v0, v1, h)?;
            for k in grid.domain_nodes() {
                let d = g.at(k) - expected.at(k);
                if d.norm2().sqrt() > 1e-12 * (1.0 + g.at(k).norm2().sqrt()) {
                    let (i, j) = grid.ij(k);
                    return Err(Error::InvalidArgument(format!(
                        "metric does not match shallow_metric(v0, v1, h) at node ({i}, {j})"
                    )));
                }
            }
            map_range(grid.len(), |k| {
                if !grid.in_domain(k) {
                    return 0.0;
                }
                shallow_terms(grid, v0.values(), v1.values(), g.at(k), gamma.at(k), h, k).kappa(h)
            })
        }
    };
    ScalarField::new(grid.clone(), vals)
}

/// Max of `|f|` over nodes at least `depth` axis steps from the boundary.
pub fn max_abs_at_depth(f: &ScalarField, depth: usize) -> f64 {
    let g = f.grid();
    g.domain_nodes()
        .into_iter()
        .filter(|&k| g.depth(k) >= depth)
        .map(|k| f.at(k).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ImmersionOptions {
    /// Flatness required before solving. `None` means `1e-6 max(1, |g|)`.
    pub curvature_tol: Option<f64>,
    /// Nodes closer than this to the boundary are skipped by the flatness check.
    pub curvature_depth: usize,
    /// Stop once the RMS metric defect falls below this.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for ImmersionOptions {
    fn default() -> Self {
        ImmersionOptions {
            curvature_tol: None,
            curvature_depth: 3,
            residual_tol: 1e-12,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Immersion {
    pub phi: VectorField2,
    /// `max |∇φᵀ∇φ − g|` over the domain.
    pub residual_c0: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

/// `∇φᵀ∇φ − g` per node (zero outside the domain).
pub fn metric_defect(phi: &VectorField2, g: &Metric2Field) -> Result<Vec<Sym2>> {
    crate::fields::same_grid(phi.grid(), g.grid())?;
    let grid = phi.grid();
    grid.ensure_supported()?;
    let c0: Vec<f64> = phi.values().iter().map(|p| p[0]).collect();
    let c1: Vec<f64> = phi.values().iter().map(|p| p[1]).collect();
    Ok(map_range(grid.len(), |k| {
        if !grid.in_domain(k) {
            return Sym2::ZERO;
        }
        let a = grad4_at(grid, &c0, k);
        let b = grad4_at(grid, &c1, k);
        let f1 = [a[0], b[0]];
        let f2 = [a[1], b[1]];
        Sym2::new(
            f1[0] * f1[0] + f1[1] * f1[1],
            f1[0] * f2[0] + f1[1] * f2[1],
            f2[0] * f2[0] + f2[1] * f2[1],
        ) - g.at(k)
    }))
}

fn defect_stats(grid: &Grid, defect: &[Sym2]) -> (f64, f64) {
    let nodes = grid.domain_nodes();
    let sq: Vec<f64> = nodes.iter().map(|&k| defect[k].norm2()).collect();
    let c0 = sq.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt();
    (c0, (pairwise_sum(&sq) / nodes.len() as f64).sqrt())
}

/// Orientation-preserving `φ` with `∇φᵀ∇φ = g`, found by damped Gauss-Newton
/// from the identity and then normalised so its best-fit linear part has no
/// rotation and `φ(center) = center`.
pub fn flat_immersion(g: &Metric2Field, opts: &ImmersionOptions) -> Result<Immersion> {
    let grid = g.grid().clone();
    grid.ensure_supported()?;
    let tol = opts.curvature_tol.unwrap_or(1e-6 * g.max_norm().max(1.0));
    if tol.is_finite() {
        let kappa = max_abs_at_depth(&gauss_curvature(g, CurvatureMode::General)?, opts.curvature_depth);
        if kappa > tol {
            return Err(Error::CurvatureTooLarge { kappa, tol });
        }
    }
    let nodes = grid.domain_nodes();
    let mut slot = vec![usize::MAX; grid.len()];
    for (u, &k) in nodes.iter().enumerate() {
        slot[k] = u;
    }
    let n = 2 * nodes.len();
    let mut phi = VectorField2::from_fn(&grid, |x, y| [x, y]);
    let mut defect = metric_defect(&phi, g)?;
    let (_, mut rms) = defect_stats(&grid, &defect);
    let mut history = vec![rms];
    let mut mu: Option<f64> = None;
    let mut iterations = 0;
    let mut chol = ShiftedCholesky::new();

    while rms > opts.residual_tol && iterations < opts.max_iter {
        iterations += 1;
        let (sys, rhs) = normal_equations(&grid, &phi, &defect, &nodes, &slot, n);
        chol.load(&sys)?;
        let diag_mean = pairwise_sum(&sys.diagonal()) / n as f64;
        let mut damp = mu.unwrap_or(1e-6 * diag_mean);
        let floor = 1e-13 * diag_mean;
        let mut accepted = false;
        for _ in 0..12 {
            let step = chol.solve(damp, &rhs)?;
            let mut trial = phi.clone();
            for (u, &k) in nodes.iter().enumerate() {
                let p = &mut trial.values_mut()[k];
                p[0] -= step[2 * u];
                p[1] -= step[2 * u + 1];
            }
            let td = metric_defect(&trial, g)?;
            let (_, trms) = defect_stats(&grid, &td);
            if trms < rms {
                phi = trial;
                defect = td;
                rms = trms;
                damp = (damp / 10.0).max(floor);
                accepted = true;
                break;
            }
            damp *= 10.0;
        }
        mu = Some(damp);
        history.push(rms);
        log::debug!("immersion iteration {iterations}: rms defect {rms:.3e}");
        if !accepted {
            break;
        }
        let prev = history[history.len() - 2];
        // Gauss-Newton converges quadratically here, so a step that does not
        // halve the defect means the discretisation floor has been reached.
        if rms > 0.5 * prev {
            break;
        }
    }

    normalize_rigid(&mut phi, &nodes)?;
    let defect = metric_defect(&phi, g)?;
    let (residual_c0, residual_rms) = defect_stats(&grid, &defect);
    check_orientation(&phi)?;
    Ok(Immersion {
        phi,
        residual_c0,
        residual_rms,
        iterations,
    })
}

/// Normal equations `JᵀJ δ = Jᵀr` of the metric defect, assembled node by node.
fn normal_equations(
    grid: &Grid,
    phi: &VectorField2,
    defect: &[Sym2],
    nodes: &[usize],
    slot: &[usize],
    n: usize,
) -> (SparseSystem, Vec<f64>) {
    let c0: Vec<f64> = phi.values().iter().map(|p| p[0]).collect();
    let c1: Vec<f64> = phi.values().iter().map(|p| p[1]).collect();
    let locals = map_range(nodes.len(), |u| {
        let k = nodes[u];
        let sx = grid.d1_fourth(k, Axis::X).expect("supported");
        let sy = grid.d1_fourth(k, Axis::Y).expect("supported");
        let mut local: Vec<usize> = sx.iter().chain(sy.iter()).map(|&(m, _)| m).collect();
        local.sort_unstable();
        local.dedup();
        let pos: HashMap<usize, usize> = local.iter().enumerate().map(|(a, &m)| (m, a)).collect();
        let nl = 2 * local.len();
        // ∂_a φ at node k, components c
        let dphi = [
            [grad4_at(grid, &c0, k)[0], grad4_at(grid, &c1, k)[0]],
            [grad4_at(grid, &c0, k)[1], grad4_at(grid, &c1, k)[1]],
        ];
        let stencils = [&sx, &sy];
        // rows (0,0), (0,1) scaled by √2, (1,1)
        let rows = [(0usize, 0usize, 1.0), (0, 1, std::f64::consts::SQRT_2), (1, 1, 1.0)];
        let mut jac = vec![vec![0.0; nl]; 3];
        let mut res = [0.0; 3];
        for (r, &(a, b, w)) in rows.iter().enumerate() {
            res[r] = w * defect[k].get(a, b);
            // δ(∂aφ·∂bφ) = ∂aφ·∂bδ + ∂bφ·∂aδ
            for (st, other) in [(b, a), (a, b)] {
                for &(m, cw) in stencils[st].iter() {
                    for c in 0..2 {
                        jac[r][2 * pos[&m] + c] += w * cw * dphi[other][c];
                    }
                }
            }
        }
        let mut block = vec![0.0; nl * nl];
        let mut grad = vec![0.0; nl];
        for r in 0..3 {
            for p in 0..nl {
                grad[p] += jac[r][p] * res[r];
                for q in 0..nl {
                    block[p * nl + q] += jac[r][p] * jac[r][q];
                }
            }
        }
        (local, block, grad)
    });
    let mut sys = SparseSystem::with_capacity(n, locals.iter().map(|l| l.1.len()).sum());
    let mut rhs = vec![0.0; n];
    for (local, block, grad) in locals {
        let nl = 2 * local.len();
        let var = |p: usize| 2 * slot[local[p / 2]] + p % 2;
        for p in 0..nl {
            rhs[var(p)] += grad[p];
            for q in 0..nl {
                sys.add(var(p), var(q), block[p * nl + q]);
            }
        }
    }
    (sys, rhs)
}

fn normalize_rigid(phi: &mut VectorField2, nodes: &[usize]) -> Result<()> {
    let grid = phi.grid().clone();
    let nn = nodes.len() as f64;
    let mut xm = [0.0; 2];
    let mut pm = [0.0; 2];
    for &k in nodes {
        let x = grid.point(k);
        let p = phi.at(k);
        for d in 0..2 {
            xm[d] += x[d] / nn;
            pm[d] += p[d] / nn;
        }
    }
    let mut sxx = nalgebra::Matrix2::<f64>::zeros();
    let mut spx = nalgebra::Matrix2::<f64>::zeros();
    for &k in nodes {
        let x = grid.point(k);
        let p = phi.at(k);
        let dx = nalgebra::Vector2::new(x[0] - xm[0], x[1] - xm[1]);
        let dp = nalgebra::Vector2::new(p[0] - pm[0], p[1] - pm[1]);
        sxx += dx * dx.transpose();
        spx += dp * dx.transpose();
    }
    let a = spx
        * sxx
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("domain nodes are collinear".into()))?;
    let theta = (a[(1, 0)] - a[(0, 1)]).atan2(a[(0, 0)] + a[(1, 1)]);
    let (s, c) = theta.sin_cos();
    for p in phi.values_mut() {
        let (x, y) = (p[0], p[1]);
        *p = [c * x + s * y, -s * x + c * y];
    }
    let center = grid.center();
    let comp = |d: usize| ScalarField::new(grid.clone(), phi.values().iter().map(|p| p[d]).collect());
    let at_center = [
        sample(&comp(0)?, center).unwrap_or_else(|| phi.at(grid.nearest(center))[0]),
        sample(&comp(1)?, center).unwrap_or_else(|| phi.at(grid.nearest(center))[1]),
    ];
    for &k in nodes {
        let p = &mut phi.values_mut()[k];
        p[0] += center[0] - at_center[0];
        p[1] += center[1] - at_center[1];
    }
    Ok(())
}

fn check_orientation(phi: &VectorField2) -> Result<()> {
    let grid = phi.grid();
    let c0: Vec<f64> = phi.values().iter().map(|p| p[0]).collect();
    let c1: Vec<f64> = phi.values().iter().map(|p| p[1]).collect();
    for k in grid.domain_nodes() {
        let a = grad4_at(grid, &c0, k);
        let b = grad4_at(grid, &c1, k);
        if a[0] * b[1] - a[1] * b[0] <= 0.0 {
            let (i, j) = grid.ij(k);
            return Err(Error::Orientation { i, j });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn conformal(grid: &Arc<Grid>) -> Metric2Field {
        Metric2Field::from_fn(grid, |x, y| Sym2::IDENTITY.scale((0.2 * x + 0.1 * y * y).exp() * 1.0)).unwrap()
    }

    #[test]
    fn christoffel_of_conformal_metric() {
        // g = e^{2σ} Id with 2σ = 0.2x + 0.1y²: Γ^k_ij = δ_ik σ_j + δ_jk σ_i − δ_ij σ_k
        let g = Grid::unit_square(65).unwrap();
        let gamma = christoffel(&conformal(&g)).unwrap();
        let mut err = 0.0f64;
        for k in g.domain_nodes() {
            let y = g.point(k)[1];
            let s = [0.1, 0.1 * y];
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            for m in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let exact = delta(i, m) * s[j] + delta(j, m) * s[i] - delta(i, j) * s[m];
                        err = err.max((gamma.get(k, m, i, j) - exact).abs());
                    }
                }
            }
        }
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn curvature_of_conformal_metric() {
        // κ = −e^{−2σ} Δσ = −0.1 e^{−2σ}
        let g = Grid::unit_square(65).unwrap();
        let kappa = gauss_curvature(&conformal(&g), CurvatureMode::General).unwrap();
        for k in g.domain_nodes().into_iter().filter(|&k| g.depth(k) >= 2) {
            let [x, y] = g.point(k);
            let exact = -0.1 * (-(0.2 * x + 0.1 * y * y)).exp();
            assert!((kappa.at(k) - exact).abs() < 1e-4, "{} vs {exact}", kappa.at(k));
        }
    }

    #[test]
    fn shallow_paraboloid_curvature() {
        // g = Id − h² x⊗x has κ = −h² / (1 − h²|x|²)², which is −0.01 at the origin for h = 0.1
        let h = 0.1;
        let grid = Grid::disk(65, 0.0, 0.0, 0.9).unwrap();
        let v0 = ScalarField::zeros(&grid);
        let v1 = ScalarField::from_fn(&grid, |x, y| 0.5 * (x * x + y * y));
        let g = shallow_metric(&v0, &v1, h).unwrap();
        let shallow = gauss_curvature(&g, CurvatureMode::Shallow { v0: &v0, v1: &v1, h }).unwrap();
        let general = gauss_curvature(&g, CurvatureMode::General).unwrap();
        let origin = grid.nearest([0.0, 0.0]);
        assert!((shallow.at(origin) + 0.01).abs() < 1e-12);
        assert!((general.at(origin) + 0.01).abs() < 1e-6);
        for k in grid.domain_nodes() {
            let [x, y] = grid.point(k);
            let exact = -h * h / (1.0 - h * h * (x * x + y * y)).powi(2);
            assert!((shallow.at(k) - exact).abs() < 1e-12);
            if grid.depth(k) >= 3 {
                assert!((general.at(k) - exact).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn shallow_matches_general_at_second_order() {
        let run = |n: usize| {
            let grid = Grid::unit_square(n).unwrap();
            let v0 = ScalarField::from_fn(&grid, |x, y| 0.5 * (x * x + y * y) + 0.1 * (x * y).sin());
            let v1 = ScalarField::from_fn(&grid, |x, y| (0.5 * x + y).exp() * 0.3 - x * y);
            let h = 0.3;
            let g = shallow_metric(&v0, &v1, h).unwrap();
            let a = gauss_curvature(&g, CurvatureMode::Shallow { v0: &v0, v1: &v1, h }).unwrap();
            let b = gauss_curvature(&g, CurvatureMode::General).unwrap();
            // within two nodes of the boundary the nested one-sided differences
            // of the general form are only first order
            max_abs_at_depth(&a.sub(&b).unwrap(), 2)
        };
        let (e1, e2) = (run(33), run(65));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn shallow_mode_rejects_other_metrics() {
        let grid = Grid::unit_square(9).unwrap();
        let v = ScalarField::from_fn(&grid, |x, _| x);
        let g = Metric2Field::from_fn(&grid, |_, _| Sym2::IDENTITY).unwrap();
        let r = gauss_curvature(&g, CurvatureMode::Shallow { v0: &v, v1: &v, h: 0.5 });
        assert!(r.is_ok());
        let r = gauss_curvature(
            &g,
            CurvatureMode::Shallow {
                v0: &v,
                v1: &ScalarField::zeros(&grid),
                h: 0.5,
            },
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_metric_reports_hint() {
        let grid = Grid::unit_square(9).unwrap();
        let v1 = ScalarField::from_fn(&grid, |x, y| 2.0 * x + y);
        match shallow_metric(&ScalarField::zeros(&grid), &v1, 1.0) {
            Err(Error::MetricDegenerate { hint, .. }) => assert!(hint.contains("4.472e-1"), "{hint}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_metric_immerses_as_identity() {
        let grid = Grid::disk(17, 0.0, 0.0, 1.0).unwrap();
        let g = Metric2Field::from_fn(&grid, |_, _| Sym2::IDENTITY).unwrap();
        let im = flat_immersion(&g, &ImmersionOptions::default()).unwrap();
        assert_eq!(im.iterations, 0);
        for k in grid.domain_nodes() {
            let p = grid.point(k);
            let q = im.phi.at(k);
            assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn immersion_recovers_flat_map() {
        // pullback of the plane under ψ = (x + 0.01x², y)
        let grid = Grid::unit_square(65).unwrap();
        let psi = |x: f64, y: f64| [x + 0.01 * x * x, y];
        let g = Metric2Field::from_fn(&grid, |x, _| Sym2::diag((1.0 + 0.02 * x).powi(2), 1.0)).unwrap();
        let im = flat_immersion(&g, &ImmersionOptions::default()).unwrap();
        assert!(im.residual_c0 <= 1e-6, "{}", im.residual_c0);
        let nodes = grid.domain_nodes();
        for w in nodes.windows(2).step_by(97) {
            let (a, b) = (nodes[0], w[1]);
            let (pa, pb) = (grid.point(a), grid.point(b));
            let (sa, sb) = (psi(pa[0], pa[1]), psi(pb[0], pb[1]));
            let (fa, fb) = (im.phi.at(a), im.phi.at(b));
            let d_psi = ((sa[0] - sb[0]).powi(2) + (sa[1] - sb[1]).powi(2)).sqrt();
            let d_phi = ((fa[0] - fb[0]).powi(2) + (fa[1] - fb[1]).powi(2)).sqrt();
            assert!((d_psi - d_phi).abs() < 1e-6, "{d_psi} {d_phi}");
        }
    }

    #[test]
    fn curved_metric_is_refused() {
        let grid = Grid::unit_square(33).unwrap();
        match flat_immersion(&conformal(&grid), &ImmersionOptions::default()) {
            Err(Error::CurvatureTooLarge { kappa, .. }) => assert!(kappa > 0.05),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn closed_form_determinant(
            a in proptest::array::uniform2(-3.0f64..3.0),
            b in proptest::array::uniform2(-3.0f64..3.0),
            h in 0.0f64..0.5,
        ) {
            let direct = shallow_at(a, b, h).det();
            prop_assert!((shallow_det(a, b, h) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }
}

//! Newton solver for `det ∇²u = f` with Dirichlet data, and the dilation
//! `u_λ(x) = λ⁻² u(c + λ(x − c))`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{hess_at, same_grid, sample, Axis, Grid, ScalarField};
use crate::linalg::{SparseSystem, Sym2};
use crate::par::{map_range, pairwise_sum};

#[derive(Debug, Clone)]
pub struct MAProblem {
    pub f: ScalarField,
    /// Dirichlet data; only boundary-node values are read.
    pub boundary: ScalarField,
    pub c0: Option<f64>,
}

impl MAProblem {
    pub fn new(f: ScalarField, boundary: ScalarField, c0: Option<f64>) -> Result<Self> {
        same_grid(f.grid(), boundary.grid())?;
        let g = f.grid();
        let floor = c0.unwrap_or(0.0);
        if let Some(c) = c0 {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("c0 must be positive, got {c}")));
            }
        }
        for k in g.domain_nodes() {
            let v = f.at(k);
            let bad = if c0.is_some() { !(v >= floor) } else { !(v > 0.0) };
            if bad || !v.is_finite() {
                let (i, j) = g.ij(k);
                return Err(Error::InvalidArgument(format!(
                    "right-hand side f = {v} at node ({i}, {j}) must be positive{}",
                    c0.map(|c| format!(" and at least c0 = {c}")).unwrap_or_default()
                )));
            }
        }
        Ok(MAProblem { f, boundary, c0 })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.f.grid()
    }
}

/// `det ∇²u − f` at every in-domain node.
pub fn ma_residual(u: &ScalarField, f: &ScalarField) -> Result<ScalarField> {
    same_grid(u.grid(), f.grid())?;
    let g = u.grid();
    g.ensure_supported()?;
    let vals = map_range(g.len(), |k| {
        if g.in_domain(k) {
            hess_at(g, u.values(), k).det() - f.at(k)
        } else {
            0.0
        }
    });
    ScalarField::new(g.clone(), vals)
}

#[derive(Debug, Clone)]
pub struct MAOptions {
    /// Stop when the max residual over interior nodes is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual L2 level below which full Newton steps are taken.
    pub full_step_below: f64,
}

impl Default for MAOptions {
    fn default() -> Self {
        MAOptions {
            tol: 1e-10,
            max_iter: 40,
            full_step_below: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MASolution {
    pub u: ScalarField,
    /// Max interior residual after each iterate, starting with the initial guess.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Interior unknown numbering.
pub(crate) struct Unknowns {
    pub nodes: Vec<usize>,
    pub slot: Vec<usize>,
}

impl Unknowns {
    pub fn interior(g: &Grid) -> Self {
        let nodes = g.interior_nodes();
        let mut slot = vec![usize::MAX; g.len()];
        for (u, &k) in nodes.iter().enumerate() {
            slot[k] = u;
        }
        Unknowns { nodes, slot }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// Adds the row `a : ∇²p` at node `k` with coefficients restricted to unknowns.
pub(crate) fn push_hessian_row(sys: &mut SparseSystem, g: &Grid, unk: &Unknowns, row: usize, k: usize, a: Sym2) {
    let mut push = |m: usize, w: f64| {
        let col = unk.slot[m];
        if col != usize::MAX {
            sys.add(row, col, w);
        }
    };
    for (m, w) in g.d2(k, Axis::X).expect("supported") {
        push(m, a.xx * w);
    }
    for (m, w) in g.d2(k, Axis::Y).expect("supported") {
        push(m, a.yy * w);
    }
    for (m, w) in g.dxy(k).expect("supported") {
        push(m, 2.0 * a.xy * w);
    }
}

/// Interior L2 norm and C0 norm.
pub(crate) fn interior_norms(g: &Grid, r: &[f64]) -> (f64, f64) {
    let nodes = g.interior_nodes();
    let sq: Vec<f64> = nodes.iter().map(|&k| g.weight(k) * r[k] * r[k]).collect();
    let c0 = nodes.iter().map(|&k| r[k].abs()).fold(0.0, f64::max);
    (pairwise_sum(&sq).sqrt(), c0)
}

/// Solves `Δu = 2√f` with the problem's boundary data.
pub fn poisson_init(problem: &MAProblem) -> Result<ScalarField> {
    let g = problem.grid();
    g.ensure_supported()?;
    let unk = Unknowns::interior(g);
    let mut u = ScalarField::new(
        g.clone(),
        (0..g.len())
            .map(|k| if g.is_boundary(k) { problem.boundary.at(k) } else { 0.0 })
            .collect(),
    )?;
    if unk.len() == 0 {
        return Ok(u);
    }
    let mut sys = SparseSystem::with_capacity(unk.len(), 5 * unk.len());
    let mut rhs = vec![0.0; unk.len()];
    for (row, &k) in unk.nodes.iter().enumerate() {
        push_hessian_row(&mut sys, g, &unk, row, k, Sym2::IDENTITY);
        let mut b = 2.0 * problem.f.at(k).sqrt();
        for axis in [Axis::X, Axis::Y] {
            for (m, w) in g.d2(k, axis).expect("supported") {
                if g.is_boundary(m) {
                    b -= w * problem.boundary.at(m);
                }
            }
        }
        rhs[row] = b;
    }
    let sol = sys.solve(&rhs)?;
    for (row, &k) in unk.nodes.iter().enumerate() {
        u.values_mut()[k] = sol[row];
    }
    Ok(u)
}

fn check_elliptic(g: &Grid, h: &Sym2, k: usize) -> Result<()> {
    if !(h.det() > 0.0 && h.trace() > 0.0) {
        let (i, j) = g.ij(k);
        return Err(Error::NotElliptic {
            i,
            j,
            detail: format!("Hessian det {:.3e}, trace {:.3e}", h.det(), h.trace()),
        });
    }
    Ok(())
}

/// Damped Newton iteration on the convex branch. `init` defaults to
/// [`poisson_init`]; its boundary values are replaced by the problem's.
pub fn solve_ma(problem: &MAProblem, init: Option<&ScalarField>, opts: &MAOptions) -> Result<MASolution> {
    let g = problem.grid().clone();
    g.ensure_supported()?;
    let mut u = match init {
        Some(u0) => {
            same_grid(&g, u0.grid())?;
            let mut u = u0.clone();
            for k in g.domain_nodes() {
                if g.is_boundary(k) {
                    u.values_mut()[k] = problem.boundary.at(k);
                }
            }
            u
        }
        None => poisson_init(problem)?,
    };
    let unk = Unknowns::interior(&g);
    let f = &problem.f;
    let mut r = ma_residual(&u, f)?;
    let (mut l2, mut c0) = interior_norms(&g, r.values());
    let mut history = vec![c0];
    let mut iterations = 0;
    while c0 > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, history });
        }
        iterations += 1;
        let hess: Vec<Sym2> = map_range(g.len(), |k| hess_at(&g, u.values(), k));
        let mut sys = SparseSystem::with_capacity(unk.len(), 9 * unk.len());
        let mut rhs = vec![0.0; unk.len()];
        for (row, &k) in unk.nodes.iter().enumerate() {
            check_elliptic(&g, &hess[k], k)?;
            push_hessian_row(&mut sys, &g, &unk, row, k, hess[k].cof());
            rhs[row] = -r.at(k);
        }
        let p = sys.solve(&rhs)?;
        let mut tau = 1.0;
        loop {
            let mut trial = u.clone();
            for (row, &k) in unk.nodes.iter().enumerate() {
                trial.values_mut()[k] += tau * p[row];
            }
            let tr = ma_residual(&trial, f)?;
            let (tl2, tc0) = interior_norms(&g, tr.values());
            let accept = l2 <= opts.full_step_below || tl2 <= (1.0 - 1e-4 * tau) * l2 || tau < 1.0 / 1024.0;
            if accept {
                u = trial;
                r = tr;
                l2 = tl2;
                c0 = tc0;
                break;
            }
            tau *= 0.5;
        }
        history.push(c0);
        log::debug!("newton iteration {iterations}: step {tau}, residual C0 {c0:.3e}");
        if !c0.is_finite() {
            return Err(Error::NoConvergence { iterations, history });
        }
    }
    for &k in &unk.nodes {
        check_elliptic(&g, &hess_at(&g, u.values(), k), k)?;
    }
    Ok(MASolution { u, history, iterations })
}

/// Dilation about the bounding-box centre.
pub fn dilate(u: &ScalarField, lambda: f64) -> Result<ScalarField> {
    dilate_about(u, lambda, u.grid().center())
}

/// `u_λ(x) = λ⁻² u(c + λ(x − c))`, resampled by cubic interpolation.
pub fn dilate_about(u: &ScalarField, lambda: f64, c: [f64; 2]) -> Result<ScalarField> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dilation factor must lie in (0, 1], got {lambda}"
        )));
    }
    let g = u.grid();
    if lambda == 1.0 {
        return Ok(u.clone());
    }
    let vals = crate::par::try_map_range(g.len(), |k| {
        if !g.in_domain(k) {
            return Ok(0.0);
        }
        let x = g.point(k);
        let y = [c[0] + lambda * (x[0] - c[0]), c[1] + lambda * (x[1] - c[1])];
        sample(u, y).map(|v| v / (lambda * lambda)).ok_or_else(|| {
            let (i, j) = g.ij(k);
            Error::InvalidArgument(format!("dilated node ({i}, {j}) maps outside the domain"))
        })
    })?;
    ScalarField::new(g.clone(), vals)
}

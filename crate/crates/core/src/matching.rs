//! Matching of an infinitesimal isometry: find `z_h` with `κ(g_h(z_h)) = 0`,
//! then immerse the flat metric to obtain the in-plane correction `w_h`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{field_norm, grad4_at, hess_at, same_grid, Grid, Mat2Field, NormKind, ScalarField, VectorField2};
use crate::geometry::{
    christoffel, flat_immersion, gauss_curvature, max_abs_at_depth, shallow_metric, shallow_terms, CurvatureMode,
    ImmersionOptions, Metric2Field,
};
use crate::linalg::{SparseSystem, Sym2};
use crate::monge_ampere::{interior_norms, push_hessian_row, Unknowns};
use crate::par::map_range;
use crate::shell_energy::check_constraint;

#[derive(Debug, Clone)]
pub struct MatchOptions {
    /// Target for `max |Φ(h, z)|` over interior nodes.
    pub tol: f64,
    pub max_iter: usize,
    /// Linearise at `(0, 0)` only instead of refreshing the Jacobian.
    pub frozen: bool,
    /// Admissible `L²` norm of `det ∇²v − det ∇²v0` on input.
    pub constraint_tol: f64,
    /// Flatness check before immersing, relative to `h²`.
    pub curvature_tol_rel: f64,
    pub immersion: ImmersionOptions,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            tol: 1e-8,
            max_iter: 50,
            frozen: false,
            constraint_tol: 1e-6,
            curvature_tol_rel: 1e-2,
            immersion: ImmersionOptions::default(),
        }
    }
}

/// `Φ(h, z) = s1² det(∇²_g v0) − s0² det g det ∇²(v + z)`, which vanishes
/// exactly where the metric `g_h(z) = Id + h²(∇v0⊗∇v0 − ∇(v+z)⊗∇(v+z))` is flat.
pub fn phi_functional(h: f64, z: &ScalarField, v0: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    let v1 = v.add(z)?;
    same_grid(v0.grid(), v1.grid())?;
    let g = shallow_metric(v0, &v1, h)?;
    let gamma = christoffel(&g)?;
    let grid = v0.grid();
    let vals = map_range(grid.len(), |k| {
        if !grid.in_domain(k) {
            return 0.0;
        }
        shallow_terms(grid, v0.values(), v1.values(), g.at(k), gamma.at(k), h, k).phi()
    });
    ScalarField::new(grid.clone(), vals)
}

fn min_det_hessian(v0: &ScalarField) -> f64 {
    let g = v0.grid();
    g.domain_nodes()
        .into_iter()
        .map(|k| hess_at(g, v0.values(), k).det())
        .fold(f64::INFINITY, f64::min)
}

fn check_inputs(v0: &ScalarField, v: &ScalarField, opts: &MatchOptions) -> Result<f64> {
    same_grid(v0.grid(), v.grid())?;
    let (_, residual) = check_constraint(v, v0)?;
    if residual > opts.constraint_tol {
        return Err(Error::ConstraintViolated {
            residual,
            tol: opts.constraint_tol,
        });
    }
    let c0 = min_det_hessian(v0);
    if !(c0 > 0.0) {
        let g = v0.grid();
        let k = g
            .domain_nodes()
            .into_iter()
            .find(|&k| !(hess_at(g, v0.values(), k).det() > 0.0))
            .unwrap_or(0);
        let (i, j) = g.ij(k);
        return Err(Error::NotElliptic {
            i,
            j,
            detail: format!("det of the reference Hessian is {c0:.3e}"),
        });
    }
    Ok(c0)
}

fn guard(grid: &Grid, hess: &Sym2, c0: f64, k: usize) -> Result<()> {
    if !(hess.det() >= 0.5 * c0 && hess.trace() > 0.0) {
        let (i, j) = grid.ij(k);
        return Err(Error::NotElliptic {
            i,
            j,
            detail: format!(
                "det Hessian of v + z is {:.3e}, below c0/2 = {:.3e} (trace {:.3e})",
                hess.det(),
                0.5 * c0,
                hess.trace()
            ),
        });
    }
    Ok(())
}

/// Solution of `Φ(h, z) = 0` with zero boundary values and its Newton history.
#[derive(Debug, Clone)]
pub struct Correction {
    pub z: ScalarField,
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Newton iteration for `z ↦ Φ(h, z)` with the cofactor Jacobian
/// `−s0² det g cof ∇²(v + z) : ∇²p`, starting from `z = 0`.
pub fn solve_matching_correction(h: f64, v0: &ScalarField, v: &ScalarField, opts: &MatchOptions) -> Result<Correction> {
    let c0 = check_inputs(v0, v, opts)?;
    let grid = v0.grid().clone();
    let unk = Unknowns::interior(&grid);
    let mut z = ScalarField::zeros(&grid);
    let mut phi = phi_functional(h, &z, v0, v)?;
    let (_, mut c0_res) = interior_norms(&grid, phi.values());
    let mut history = vec![c0_res];
    let mut iterations = 0;
    let frozen: Option<(SparseSystem, Vec<f64>)> = if opts.frozen {
        let mut sys = SparseSystem::with_capacity(unk.len(), 13 * unk.len());
        for (row, &k) in unk.nodes.iter().enumerate() {
            push_hessian_row(
                &mut sys,
                &grid,
                &unk,
                row,
                k,
                hess_at(&grid, v.values(), k).cof().scale(-1.0),
            );
        }
        Some((sys, Vec::new()))
    } else {
        None
    };
    while c0_res > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, history });
        }
        iterations += 1;
        let v1 = v.add(&z)?;
        let mut rhs = vec![0.0; unk.len()];
        for (row, &k) in unk.nodes.iter().enumerate() {
            rhs[row] = -phi.at(k);
        }
        let p = match &frozen {
            Some((sys, _)) => sys.solve(&rhs)?,
            None => {
                let g = shallow_metric(v0, &v1, h)?;
                let gamma = christoffel(&g)?;
                let mut sys = SparseSystem::with_capacity(unk.len(), 13 * unk.len());
                for (row, &k) in unk.nodes.iter().enumerate() {
                    let t = shallow_terms(&grid, v0.values(), v1.values(), g.at(k), gamma.at(k), h, k);
                    guard(&grid, &hess_at(&grid, v1.values(), k), c0, k)?;
                    let a = t.cof_hess_v1.scale(-t.s0 * t.s0 * t.det_g);
                    push_hessian_row(&mut sys, &grid, &unk, row, k, a);
                }
                sys.solve(&rhs)?
            }
        };
        for (row, &k) in unk.nodes.iter().enumerate() {
            z.values_mut()[k] += p[row];
        }
        phi = phi_functional(h, &z, v0, v)?;
        let prev = c0_res;
        c0_res = interior_norms(&grid, phi.values()).1;
        history.push(c0_res);
        log::debug!("matching iteration {iterations}: |Phi| {c0_res:.3e}");
        if !c0_res.is_finite() || (iterations > 3 && c0_res > 0.9 * prev) {
            return Err(Error::NoConvergence { iterations, history });
        }
    }
    if opts.frozen {
        let v1 = v.add(&z)?;
        for &k in &unk.nodes {
            guard(&grid, &hess_at(&grid, v1.values(), k), c0, k)?;
        }
    }
    Ok(Correction { z, history, iterations })
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub h: f64,
    pub z_h: ScalarField,
    pub w_h_tan: VectorField2,
    /// `z_h / h`.
    pub w_h_3: ScalarField,
    /// `max |∇ξᵀ∇ξ − ∇φ0ᵀ∇φ0|` for `ξ = id + h v e3 + h² w_h` and `φ0 = id + h v0 e3`.
    pub isometry_residual: f64,
    /// `max |Φ(h, z_h)|` over interior nodes.
    pub curvature_residual: f64,
    pub newton_iterations: usize,
}

impl MatchResult {
    /// Grid `W^{2,2}` norm of `w_h = (w_tan, w3)`.
    pub fn w_norm_w22(&self) -> Result<f64> {
        let g = self.z_h.grid();
        let comp = |c: usize| ScalarField::new(g.clone(), self.w_h_tan.values().iter().map(|w| w[c]).collect());
        let parts = [
            field_norm(&comp(0)?, NormKind::W22)?,
            field_norm(&comp(1)?, NormKind::W22)?,
            field_norm(&self.w_h_3, NormKind::W22)?,
        ];
        Ok(parts.iter().map(|p| p * p).sum::<f64>().sqrt())
    }
}

/// `Id + h²(∇v0⊗∇v0 − ∇v1⊗∇v1)` with fourth-order gradients, the metric the
/// immersion has to reproduce.
fn target_metric(v0: &ScalarField, v1: &ScalarField, h: f64) -> Result<Metric2Field> {
    let g = v0.grid();
    let vals = map_range(g.len(), |k| {
        if !g.in_domain(k) {
            return Sym2::ZERO;
        }
        let a = grad4_at(g, v0.values(), k);
        let b = grad4_at(g, v1.values(), k);
        Sym2::IDENTITY + (Sym2::outer(a) - Sym2::outer(b)).scale(h * h)
    });
    Metric2Field::new(Mat2Field::new(g.clone(), vals)?)
}

/// `max |∇ξᵀ∇ξ − ∇φ0ᵀ∇φ0|` with `ξ = (φ, h v1)` and `φ0 = (id, h v0)`.
pub fn isometry_residual(phi: &VectorField2, v1: &ScalarField, v0: &ScalarField, h: f64) -> Result<f64> {
    same_grid(phi.grid(), v1.grid())?;
    same_grid(v0.grid(), v1.grid())?;
    let g = phi.grid();
    let c0: Vec<f64> = phi.values().iter().map(|p| p[0]).collect();
    let c1: Vec<f64> = phi.values().iter().map(|p| p[1]).collect();
    let err = map_range(g.len(), |k| {
        if !g.in_domain(k) {
            return 0.0;
        }
        let a = grad4_at(g, &c0, k);
        let b = grad4_at(g, &c1, k);
        let s = grad4_at(g, v1.values(), k);
        let r = grad4_at(g, v0.values(), k);
        let pull = Sym2::new(
            a[0] * a[0] + b[0] * b[0],
            a[0] * a[1] + b[0] * b[1],
            a[1] * a[1] + b[1] * b[1],
        ) + Sym2::outer(s).scale(h * h);
        let reference = Sym2::IDENTITY + Sym2::outer(r).scale(h * h);
        (pull - reference).norm2().sqrt()
    });
    Ok(err.into_iter().fold(0.0, f64::max))
}

pub fn build_matching_displacement(
    h: f64,
    v0: &ScalarField,
    v: &ScalarField,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let corr = solve_matching_correction(h, v0, v, opts)?;
    let grid: Arc<Grid> = v0.grid().clone();
    let v1 = v.add(&corr.z)?;
    let metric = target_metric(v0, &v1, h)?;
    // The flatness guard runs on the second-order metric that Φ was solved
    // with; nested five-point stencils make the curvature of `metric` noisy
    // several nodes into the domain.
    let mut iopts = opts.immersion.clone();
    let tol = iopts.curvature_tol.take().unwrap_or(opts.curvature_tol_rel * h * h);
    if tol.is_finite() {
        let kappa = gauss_curvature(&shallow_metric(v0, &v1, h)?, CurvatureMode::General)?;
        let kappa = max_abs_at_depth(&kappa, iopts.curvature_depth);
        if kappa > tol {
            return Err(Error::CurvatureTooLarge { kappa, tol });
        }
    }
    iopts.curvature_tol = Some(f64::INFINITY);
    let im = flat_immersion(&metric, &iopts)?;
    let h2 = h * h;
    let w_tan = VectorField2::new(
        grid.clone(),
        (0..grid.len())
            .map(|k| {
                if !grid.in_domain(k) {
                    return [0.0; 2];
                }
                let p = grid.point(k);
                let q = im.phi.at(k);
                [(q[0] - p[0]) / h2, (q[1] - p[1]) / h2]
            })
            .collect(),
    )?;
    let isometry = isometry_residual(&im.phi, &v1, v0, h)?;
    let (_, curvature_residual) = interior_norms(&grid, phi_functional(h, &corr.z, v0, v)?.values());
    Ok(MatchResult {
        h,
        w_h_3: corr.z.scale(1.0 / h),
        z_h: corr.z,
        w_h_tan: w_tan,
        isometry_residual: isometry,
        curvature_residual,
        newton_iterations: corr.iterations,
    })
}

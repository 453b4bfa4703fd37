//! Recovery sequence for the shallow-shell energies and the scan of
//! `h^{-(2α+2)} J^h` against the limiting bending functional.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fields::{grad4_at, hess_at, integrate_values, same_grid, Grid, ScalarField, VectorField3};
use crate::linalg::Sym2;
use crate::matching::{build_matching_displacement, MatchOptions, MatchResult};
use crate::material::{optimal_warping, sym_e3};
use crate::par::map_range;
use crate::shell_energy::{
    check_constraint, check_force, energy_3d_with, limit_kirchhoff, shell_embedding, total_energy_with, Deformation3,
    ShellEmbedding, ShellParams,
};

/// Validated data for building recovery sequences.
#[derive(Debug, Clone)]
pub struct RecoveryInputs {
    pub v0: ScalarField,
    pub v: ScalarField,
    pub params: ShellParams,
    /// Balanced load.
    pub f: ScalarField,
    pub matching: MatchOptions,
}

impl RecoveryInputs {
    pub fn new(v0: ScalarField, v: ScalarField, params: ShellParams, f: ScalarField) -> Result<Self> {
        same_grid(v0.grid(), v.grid())?;
        same_grid(v0.grid(), f.grid())?;
        params.validate()?;
        let matching = MatchOptions::default();
        let (_, residual) = check_constraint(&v, &v0)?;
        if residual > matching.constraint_tol {
            return Err(Error::ConstraintViolated {
                residual,
                tol: matching.constraint_tol,
            });
        }
        check_force(&f)?;
        Ok(RecoveryInputs {
            v0,
            v,
            params,
            f,
            matching,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v0.grid()
    }

    fn params_at(&self, h: f64) -> Result<ShellParams> {
        self.params.with_h(h)
    }
}

/// `v^h(x, t) = ξ_h + ht N^h + ½(ht)² h^α d` together with its ingredients.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub params: ShellParams,
    pub vh: Deformation3,
    /// Mid-surface `ξ_h = id + h^α v e3 + h^{2α} w_h`.
    pub xi: VectorField3,
    /// Unit normal of `ξ_h`.
    pub normal: VectorField3,
    /// Warping `d` of `∇²v0 − ∇²v`.
    pub warping: VectorField3,
    /// Matching run at parameter `h^α`.
    pub matching: MatchResult,
}

fn cross_normal(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let c = Vector3::from(a).cross(&Vector3::from(b));
    let c = c / c.norm();
    [c[0], c[1], c[2]]
}

pub fn build_recovery(inp: &RecoveryInputs, h: f64) -> Result<Recovery> {
    let p = inp.params_at(h)?;
    let eta = p.eta();
    let grid = inp.grid().clone();
    let m = build_matching_displacement(eta, &inp.v0, &inp.v, &inp.matching)?;
    let eta2 = eta * eta;
    let xi_vals: Vec<[f64; 3]> = (0..grid.len())
        .map(|k| {
            if !grid.in_domain(k) {
                return [0.0; 3];
            }
            let x = grid.point(k);
            let w = m.w_h_tan.at(k);
            [
                x[0] + eta2 * w[0],
                x[1] + eta2 * w[1],
                eta * inp.v.at(k) + eta2 * m.w_h_3.at(k),
            ]
        })
        .collect();
    let comps: Vec<Vec<f64>> = (0..3).map(|c| xi_vals.iter().map(|x| x[c]).collect()).collect();
    let normal = map_range(grid.len(), |k| {
        if !grid.in_domain(k) {
            return [0.0; 3];
        }
        let d: Vec<[f64; 2]> = comps.iter().map(|c| grad4_at(&grid, c, k)).collect();
        cross_normal([d[0][0], d[1][0], d[2][0]], [d[0][1], d[1][1], d[2][1]])
    });
    if let Some(k) = grid
        .domain_nodes()
        .into_iter()
        .find(|&k| normal[k].iter().any(|v| !v.is_finite()))
    {
        let (i, j) = grid.ij(k);
        return Err(Error::ShellDegenerate { i, j, det: 0.0 });
    }
    let warping = map_range(grid.len(), |k| {
        if !grid.in_domain(k) {
            return [0.0; 3];
        }
        let g = hess_at(&grid, inp.v0.values(), k) - hess_at(&grid, inp.v.values(), k);
        let d = optimal_warping(&g, &p.lame);
        [d[0], d[1], d[2]]
    });
    let (t, _) = crate::shell_energy::gauss_legendre(p.nq);
    let n = grid.len();
    let values = (0..t.len() * n)
        .map(|s| {
            let (q, k) = (s / n, s % n);
            if !grid.in_domain(k) {
                return [0.0; 3];
            }
            let x3 = p.h * t[q];
            let c = 0.5 * x3 * x3 * eta;
            std::array::from_fn(|a| xi_vals[k][a] + x3 * normal[k][a] + c * warping[k][a])
        })
        .collect();
    Ok(Recovery {
        params: p,
        vh: Deformation3::new(grid.clone(), t, values)?,
        xi: VectorField3::new(grid.clone(), xi_vals)?,
        normal: VectorField3::new(grid.clone(), normal)?,
        warping: VectorField3::new(grid, warping)?,
        matching: m,
    })
}

/// `K^h = (b^h)^{-T} (∇v^h)ᵀ ∇v^h (b^h)^{-1}` at every sample.
pub fn kh_numeric(rec: &Recovery, emb: &ShellEmbedding) -> Result<Vec<Matrix3<f64>>> {
    let grads = rec.vh.gradients(rec.params.h)?;
    let n = rec.vh.grid().len();
    Ok(map_range(grads.len(), |s| {
        let (q, k) = (s / n, s % n);
        if !rec.vh.grid().in_domain(k) {
            return Matrix3::zeros();
        }
        let f = grads[s] * emb.b_inv(k, q);
        f.transpose() * f
    }))
}

/// `max |K^h − (Id + 2 x3 h^α ((∇²v0 − ∇²v)* + sym(d ⊗ e3)))|` over all samples.
pub fn kh_expansion_error(inp: &RecoveryInputs, rec: &Recovery) -> Result<f64> {
    let emb = shell_embedding(&inp.v0, &rec.params)?;
    let k_num = kh_numeric(rec, &emb)?;
    let grid = rec.vh.grid();
    let n = grid.len();
    let t = rec.vh.thickness_points();
    let eta = rec.params.eta();
    let errs = map_range(k_num.len(), |s| {
        let (q, k) = (s / n, s % n);
        if !grid.in_domain(k) {
            return 0.0;
        }
        let g: Sym2 = hess_at(grid, inp.v0.values(), k) - hess_at(grid, inp.v.values(), k);
        let d = Vector3::from(rec.warping.at(k));
        let x3 = rec.params.h * t[q];
        let analytic = Matrix3::identity() + 2.0 * x3 * eta * (g.embed() + sym_e3(&d));
        (k_num[s] - analytic).amax()
    });
    Ok(errs.into_iter().fold(0.0, f64::max))
}

pub fn kh_expansion_check(inp: &RecoveryInputs, h: f64) -> Result<f64> {
    kh_expansion_error(inp, &build_recovery(inp, h)?)
}

/// `V^h = h^{-α} ∫ (y^h(x, t) − (x, 0)) dt` by the Gauss rule of `y^h`.
pub fn scaled_displacement(yh: &Deformation3, p: &ShellParams) -> Result<VectorField3> {
    let (t, w) = crate::shell_energy::gauss_legendre(yh.nq());
    if t.iter().zip(yh.thickness_points()).any(|(a, b)| (a - b).abs() > 1e-14) {
        return Err(Error::InvalidArgument(
            "deformation is not sampled on Gauss points".into(),
        ));
    }
    let grid = yh.grid();
    let scale = 1.0 / p.eta();
    let vals = (0..grid.len())
        .map(|k| {
            if !grid.in_domain(k) {
                return [0.0; 3];
            }
            let x = grid.point(k);
            let mut acc = [0.0; 3];
            for (q, &wq) in w.iter().enumerate() {
                let y = yh.at(k, q);
                let rel = [y[0] - x[0], y[1] - x[1], y[2]];
                for a in 0..3 {
                    acc[a] += wq * rel[a];
                }
            }
            acc.map(|a| a * scale)
        })
        .collect();
    VectorField3::new(grid.clone(), vals)
}

/// Grid `L²` distance between `V^h` and `(0, 0, v)`.
pub fn displacement_gap(vh: &VectorField3, v: &ScalarField) -> Result<f64> {
    same_grid(vh.grid(), v.grid())?;
    let g = vh.grid();
    let sq: Vec<f64> = (0..g.len())
        .map(|k| {
            let a = vh.at(k);
            a[0] * a[0] + a[1] * a[1] + (a[2] - v.at(k)).powi(2)
        })
        .collect();
    Ok(integrate_values(g, &sq)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub h: f64,
    pub ratio_i: f64,
    pub ratio_j: f64,
    pub target: f64,
    pub kh_err: f64,
    pub v_h_l2_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanMeta {
    pub nx: usize,
    pub ny: usize,
    pub bbox: [f64; 4],
    pub alpha: f64,
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub meta: ScanMeta,
}

/// Least-squares slope of `log y` against `log h`.
pub fn fitted_exponent(h: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl ScanReport {
    pub fn hs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    pub fn kh_exponent(&self) -> Option<f64> {
        fitted_exponent(&self.hs(), &self.rows.iter().map(|r| r.kh_err).collect::<Vec<_>>())
    }

    pub fn gap_exponent(&self) -> Option<f64> {
        fitted_exponent(&self.hs(), &self.rows.iter().map(|r| r.v_h_l2_gap).collect::<Vec<_>>())
    }

    /// Largest `h` from which `|ratio_J − target|` decreases along every later row.
    pub fn h_star(&self) -> Option<f64> {
        let err: Vec<f64> = self.rows.iter().map(|r| (r.ratio_j - r.target).abs()).collect();
        let mut start = None;
        for i in (0..err.len()).rev() {
            if i + 1 == err.len() || err[i] > err[i + 1] {
                start = Some(i);
            } else {
                break;
            }
        }
        start.filter(|&i| i + 1 < err.len()).map(|i| self.rows[i].h)
    }
}

fn check_decreasing(h_list: &[f64]) -> Result<()> {
    if h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("thickness values must be positive".into()));
    }
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "thickness values must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

pub fn scan_row(inp: &RecoveryInputs, h: f64) -> Result<ScanRow> {
    let rec = build_recovery(inp, h)?;
    let emb = shell_embedding(&inp.v0, &rec.params)?;
    let scale = rec.params.energy_scale();
    let i = energy_3d_with(&rec.vh, &emb)?;
    let j = total_energy_with(&rec.vh, &emb, &inp.f)?;
    let target = limit_kirchhoff(&inp.v, &inp.v0, &inp.f, &rec.params.lame)?;
    let kh_err = kh_expansion_error(inp, &rec)?;
    let gap = displacement_gap(&scaled_displacement(&rec.vh, &rec.params)?, &inp.v)?;
    Ok(ScanRow {
        h,
        ratio_i: i / scale,
        ratio_j: j / scale,
        target,
        kh_err,
        v_h_l2_gap: gap,
    })
}

pub fn gamma_scan(inp: &RecoveryInputs, h_list: &[f64]) -> Result<ScanReport> {
    check_decreasing(h_list)?;
    let rows = h_list
        .iter()
        .map(|&h| {
            let row = scan_row(inp, h)?;
            log::info!(
                "scan h = {h:e}: ratio_J = {:.6e}, target {:.6e}",
                row.ratio_j,
                row.target
            );
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let g = inp.grid();
    Ok(ScanReport {
        rows,
        meta: ScanMeta {
            nx: g.nx(),
            ny: g.ny(),
            bbox: g.bbox(),
            alpha: inp.params.alpha,
            mu: inp.params.lame.mu,
            lambda: inp.params.lame.lambda,
        },
    })
}

//! Shallow-shell geometry, the three-dimensional energies `I^h`, `J^h` and
//! their two-dimensional limits.

mod gauss;
mod io;

pub use gauss::{derivative_matrix, gauss_legendre};
pub use io::{read_deformation, write_deformation};

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fields::{
    grad4_at, hess_at, integrate_values, partial4, same_grid, Axis, Grid, Mat3Field, NormKind, ScalarField,
    VectorField2, VectorField3,
};
use crate::linalg::Sym2;
use crate::material::{energy_density, q2_sym, Lame};
use crate::monge_ampere::{interior_norms, ma_residual};
use crate::par::{map_range, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellParams {
    /// Thickness.
    pub h: f64,
    /// Shallowness exponent in `(0, 1)`.
    pub alpha: f64,
    /// Load exponent, `alpha + 2` by default.
    pub alpha_prime: f64,
    pub lame: Lame,
    /// Through-thickness Gauss points (odd, at least 3).
    pub nq: usize,
}

impl ShellParams {
    pub fn new(h: f64, alpha: f64, lame: Lame) -> Result<Self> {
        let p = ShellParams {
            h,
            alpha,
            alpha_prime: alpha + 2.0,
            lame,
            nq: 5,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_nq(mut self, nq: usize) -> Result<Self> {
        self.nq = nq;
        self.validate()?;
        Ok(self)
    }

    pub fn with_h(mut self, h: f64) -> Result<Self> {
        self.h = h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "thickness h must be positive, got {}",
                self.h
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !self.alpha_prime.is_finite() {
            return Err(Error::InvalidArgument("alpha_prime must be finite".into()));
        }
        if self.nq < 3 || self.nq.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "nq must be odd and at least 3, got {}",
                self.nq
            )));
        }
        Lame::new(self.lame.mu, self.lame.lambda)?;
        Ok(())
    }

    /// Shallowness `h^α`.
    pub fn eta(&self) -> f64 {
        self.h.powf(self.alpha)
    }

    /// Energy scale `h^{2α+2}`.
    pub fn energy_scale(&self) -> f64 {
        self.h.powf(2.0 * self.alpha + 2.0)
    }
}

/// A map from `Ω × (−½, ½)` to `R³`, sampled at grid nodes times the
/// thickness points `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation3 {
    grid: Arc<Grid>,
    t: Vec<f64>,
    /// Index `q * grid.len() + k`.
    values: Vec<[f64; 3]>,
}

impl Deformation3 {
    pub fn new(grid: Arc<Grid>, t: Vec<f64>, values: Vec<[f64; 3]>) -> Result<Self> {
        if values.len() != t.len() * grid.len() {
            return Err(Error::InvalidArgument(format!(
                "deformation has {} samples, expected {}",
                values.len(),
                t.len() * grid.len()
            )));
        }
        let n = t.len();
        let symmetric = (0..n).all(|i| (t[i] + t[n - 1 - i]).abs() <= 1e-14);
        if n == 0 || !symmetric || t.iter().any(|t| !(t.abs() < 0.5)) {
            return Err(Error::InvalidArgument(
                "thickness samples must be symmetric in (-1/2, 1/2)".into(),
            ));
        }
        if let Some(i) =
            (0..values.len()).find(|&i| grid.in_domain(i % grid.len()) && values[i].iter().any(|v| !v.is_finite()))
        {
            let (a, b) = grid.ij(i % grid.len());
            return Err(Error::InvalidArgument(format!(
                "non-finite deformation at node ({a}, {b})"
            )));
        }
        Ok(Deformation3 { grid, t, values })
    }

    /// Samples `f(x, y, t)` at the Gauss points of `nq`.
    pub fn from_fn(grid: &Arc<Grid>, nq: usize, f: impl Fn(f64, f64, f64) -> [f64; 3] + Sync) -> Self {
        let (t, _) = gauss_legendre(nq);
        let n = grid.len();
        let values = map_range(nq * n, |i| {
            let k = i % n;
            if !grid.in_domain(k) {
                return [0.0; 3];
            }
            let p = grid.point(k);
            f(p[0], p[1], t[i / n])
        });
        Deformation3 {
            grid: grid.clone(),
            t,
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn thickness_points(&self) -> &[f64] {
        &self.t
    }
    pub fn nq(&self) -> usize {
        self.t.len()
    }
    pub fn at(&self, k: usize, q: usize) -> [f64; 3] {
        self.values[q * self.grid.len() + k]
    }
    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    /// The `q`-th thickness slice.
    pub fn slice(&self, q: usize) -> VectorField3 {
        let n = self.grid.len();
        VectorField3::new(self.grid.clone(), self.values[q * n..(q + 1) * n].to_vec()).expect("same length")
    }

    pub fn map(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = self.grid.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.grid.in_domain(i % n) { f(v) } else { [0.0; 3] })
            .collect();
        Deformation3 {
            grid: self.grid.clone(),
            t: self.t.clone(),
            values,
        }
    }

    /// Flattened-coordinate gradient `(∂₁v, ∂₂v, h⁻¹ ∂_t v)` at every sample.
    pub fn gradients(&self, h: f64) -> Result<Vec<Matrix3<f64>>> {
        let g = &self.grid;
        g.ensure_supported()?;
        let n = g.len();
        let nq = self.nq();
        let d = derivative_matrix(&self.t);
        let comps: Vec<Vec<Vec<f64>>> = (0..nq)
            .map(|q| (0..3).map(|c| (0..n).map(|k| self.at(k, q)[c]).collect()).collect())
            .collect();
        Ok(map_range(nq * n, |i| {
            let (q, k) = (i / n, i % n);
            if !g.in_domain(k) {
                return Matrix3::zeros();
            }
            let mut m = Matrix3::zeros();
            for c in 0..3 {
                m[(c, 0)] = partial4(g, &comps[q][c], k, Axis::X);
                m[(c, 1)] = partial4(g, &comps[q][c], k, Axis::Y);
                m[(c, 2)] = (0..nq).map(|j| d[q][j] * comps[j][c][k]).sum::<f64>() / h;
            }
            m
        }))
    }
}

/// The Kirchhoff-Love extension `φ̃_h(x, ht) = x + h^α v₀ e₃ + ht n^h` and its gradient.
#[derive(Debug, Clone)]
pub struct ShellEmbedding {
    pub params: ShellParams,
    /// `φ̃_h` sampled on the Gauss points.
    pub phi: Deformation3,
    /// `b^h = ∇φ̃_h`, one field per thickness point.
    pub b: Vec<Mat3Field>,
    /// Unit normal `n^h` of the mid-surface.
    pub n: VectorField3,
    det_b: Vec<f64>,
    b_inv: Vec<Matrix3<f64>>,
    weights_t: Vec<f64>,
}

impl ShellEmbedding {
    pub fn det_b(&self, k: usize, q: usize) -> f64 {
        self.det_b[q * self.phi.grid().len() + k]
    }

    pub fn b_inv(&self, k: usize, q: usize) -> Matrix3<f64> {
        self.b_inv[q * self.phi.grid().len() + k]
    }

    /// `a^h = √((b^h)ᵀ b^h)`, for diagnostics.
    pub fn prestrain(&self, k: usize, q: usize) -> Matrix3<f64> {
        let b = self.b[q].at(k);
        let e = nalgebra::SymmetricEigen::new(b.transpose() * b);
        let s = e.eigenvalues.map(|l| l.max(0.0).sqrt());
        e.eigenvectors * Matrix3::from_diagonal(&s) * e.eigenvectors.transpose()
    }

    pub fn thickness_weights(&self) -> &[f64] {
        &self.weights_t
    }
}

fn unit_normal(d1: Vector3<f64>, d2: Vector3<f64>) -> Vector3<f64> {
    let c = d1.cross(&d2);
    c / c.norm()
}

pub fn shell_embedding(v0: &ScalarField, p: &ShellParams) -> Result<ShellEmbedding> {
    p.validate()?;
    let g = v0.grid().clone();
    g.ensure_supported()?;
    let eta = p.eta();
    let n_nodes = g.len();
    let normals: Vec<Vector3<f64>> = map_range(n_nodes, |k| {
        if !g.in_domain(k) {
            return Vector3::zeros();
        }
        let d = grad4_at(&g, v0.values(), k);
        unit_normal(Vector3::new(1.0, 0.0, eta * d[0]), Vector3::new(0.0, 1.0, eta * d[1]))
    });
    let ncomp: Vec<Vec<f64>> = (0..3).map(|c| normals.iter().map(|n| n[c]).collect()).collect();
    let (t, wt) = gauss_legendre(p.nq);
    let phi = Deformation3::from_fn(&g, p.nq, |_, _, _| [0.0; 3]);
    let mut values = phi.values;
    let mut bs = Vec::with_capacity(p.nq);
    let mut det_b = vec![0.0; p.nq * n_nodes];
    let mut b_inv = vec![Matrix3::zeros(); p.nq * n_nodes];
    let grads: Vec<[f64; 2]> = map_range(n_nodes, |k| grad4_at(&g, v0.values(), k));
    let dn: Vec<[Vector3<f64>; 2]> = map_range(n_nodes, |k| {
        let d = |axis| {
            Vector3::new(
                partial4(&g, &ncomp[0], k, axis),
                partial4(&g, &ncomp[1], k, axis),
                partial4(&g, &ncomp[2], k, axis),
            )
        };
        [d(Axis::X), d(Axis::Y)]
    });
    for (q, &tq) in t.iter().enumerate() {
        let x3 = p.h * tq;
        let bq: Vec<Matrix3<f64>> = map_range(n_nodes, |k| {
            if !g.in_domain(k) {
                return Matrix3::zeros();
            }
            let d = grads[k];
            let c1 = Vector3::new(1.0, 0.0, eta * d[0]) + x3 * dn[k][0];
            let c2 = Vector3::new(0.0, 1.0, eta * d[1]) + x3 * dn[k][1];
            Matrix3::from_columns(&[c1, c2, normals[k]])
        });
        for k in g.domain_nodes() {
            let pt = g.point(k);
            let pos = Vector3::new(pt[0], pt[1], eta * v0.at(k)) + x3 * normals[k];
            values[q * n_nodes + k] = [pos[0], pos[1], pos[2]];
            let det = bq[k].determinant();
            if !(det > 0.0) {
                let (i, j) = g.ij(k);
                return Err(Error::ShellDegenerate { i, j, det });
            }
            det_b[q * n_nodes + k] = det;
            b_inv[q * n_nodes + k] = bq[k].try_inverse().expect("positive determinant");
        }
        bs.push(Mat3Field::new(g.clone(), bq)?);
    }
    Ok(ShellEmbedding {
        params: *p,
        phi: Deformation3 {
            grid: g.clone(),
            t,
            values,
        },
        b: bs,
        n: VectorField3::new(g, normals.iter().map(|n| [n[0], n[1], n[2]]).collect())?,
        det_b,
        b_inv,
        weights_t: wt,
    })
}

fn check_compatible(vh: &Deformation3, emb: &ShellEmbedding) -> Result<()> {
    same_grid(vh.grid(), emb.phi.grid())?;
    if vh.t != emb.phi.t {
        return Err(Error::InvalidArgument(format!(
            "deformation has {} thickness samples, shell expects the {}-point Gauss rule",
            vh.nq(),
            emb.phi.nq()
        )));
    }
    Ok(())
}

/// `∫_Ω ∫ g(k, q) dt dx` by the trapezoid rule in `x` and Gauss in `t`.
fn integrate_slab(emb: &ShellEmbedding, vals: &[f64]) -> Result<f64> {
    let g = emb.phi.grid();
    let n = g.len();
    let per_node: Vec<f64> = (0..n)
        .map(|k| {
            let terms: Vec<f64> = (0..emb.params.nq).map(|q| emb.weights_t[q] * vals[q * n + k]).collect();
            pairwise_sum(&terms)
        })
        .collect();
    integrate_values(g, &per_node)
}

/// `I^h = h⁻¹ ∫_{Ω^h} W(∇v^h (b^h)⁻¹) det b^h`, in the rescaled thickness variable.
pub fn energy_3d_with(vh: &Deformation3, emb: &ShellEmbedding) -> Result<f64> {
    check_compatible(vh, emb)?;
    let g = vh.grid();
    let n = g.len();
    let grads = vh.gradients(emb.params.h)?;
    let lame = emb.params.lame;
    let dens = map_range(grads.len(), |i| {
        if !g.in_domain(i % n) {
            return 0.0;
        }
        energy_density(&(grads[i] * emb.b_inv[i]), &lame) * emb.det_b[i]
    });
    integrate_slab(emb, &dens)
}

pub fn energy_3d(vh: &Deformation3, v0: &ScalarField, p: &ShellParams) -> Result<f64> {
    energy_3d_with(vh, &shell_embedding(v0, p)?)
}

/// `(1/h) ∫ dist²(∇v^h (b^h)⁻¹, SO(3)) det b^h`.
pub fn distance_to_rotations(vh: &Deformation3, emb: &ShellEmbedding) -> Result<f64> {
    check_compatible(vh, emb)?;
    let g = vh.grid();
    let n = g.len();
    let grads = vh.gradients(emb.params.h)?;
    let dens = map_range(grads.len(), |i| {
        if !g.in_domain(i % n) {
            return 0.0;
        }
        let f = grads[i] * emb.b_inv[i];
        let svd = f.svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            // flip the direction of the smallest singular value
            let imin = svd.singular_values.imin();
            u2.column_mut(imin).neg_mut();
            r = u2 * vt;
        }
        (f - r).norm_squared() * emb.det_b[i]
    });
    integrate_slab(emb, &dens)
}

/// Moments `(∫f, ∫x f, ∫y f)`.
pub fn force_moments(f: &ScalarField) -> Result<[f64; 3]> {
    let g = f.grid();
    let fx: Vec<f64> = (0..g.len()).map(|k| g.point(k)[0] * f.at(k)).collect();
    let fy: Vec<f64> = (0..g.len()).map(|k| g.point(k)[1] * f.at(k)).collect();
    Ok([
        integrate_values(g, f.values())?,
        integrate_values(g, &fx)?,
        integrate_values(g, &fy)?,
    ])
}

/// Fails unless `∫f` and `∫x f` vanish to `1e-8 ‖f‖_{L²}`.
pub fn check_force(f: &ScalarField) -> Result<()> {
    let m = force_moments(f)?;
    let tol = 1e-8 * crate::fields::field_norm(f, NormKind::L2)?;
    if m.iter().any(|v| v.abs() > tol) {
        return Err(Error::UnbalancedLoad {
            mean: m[0],
            mx: m[1],
            my: m[2],
            tol,
        });
    }
    Ok(())
}

/// Removes the `L²` projection of `f` onto affine functions.
pub fn normalize_force(f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid();
    let basis = |k: usize| {
        let p = g.point(k);
        [1.0, p[0], p[1]]
    };
    let mut gram = Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let v: Vec<f64> = (0..g.len()).map(|k| basis(k)[a] * basis(k)[b]).collect();
            gram[(a, b)] = integrate_values(g, &v)?;
        }
    }
    let m = force_moments(f)?;
    let c = gram
        .lu()
        .solve(&Vector3::new(m[0], m[1], m[2]))
        .ok_or_else(|| Error::InvalidArgument("domain too thin to remove affine moments".into()))?;
    let vals = (0..g.len())
        .map(|k| {
            let b = basis(k);
            f.at(k) - (c[0] * b[0] + c[1] * b[1] + c[2] * b[2])
        })
        .collect();
    ScalarField::new(g.clone(), vals)
}

/// `J^h = I^h − h^{α'} ∫∫ f v^h₃ det b^h dt dx`. The load must be balanced.
pub fn total_energy_with(vh: &Deformation3, emb: &ShellEmbedding, f: &ScalarField) -> Result<f64> {
    check_force(f)?;
    same_grid(f.grid(), vh.grid())?;
    let i = energy_3d_with(vh, emb)?;
    let n = vh.grid().len();
    let load: Vec<f64> = (0..vh.values.len())
        .map(|s| f.at(s % n) * vh.values[s][2] * emb.det_b[s])
        .collect();
    Ok(i - emb.params.h.powf(emb.params.alpha_prime) * integrate_slab(emb, &load)?)
}

pub fn total_energy(vh: &Deformation3, v0: &ScalarField, f: &ScalarField, p: &ShellParams) -> Result<f64> {
    total_energy_with(vh, &shell_embedding(v0, p)?, f)
}

fn bending_density(v: &ScalarField, v0: &ScalarField, lame: &Lame) -> Result<Vec<f64>> {
    same_grid(v.grid(), v0.grid())?;
    let g = v.grid();
    g.ensure_supported()?;
    Ok(map_range(g.len(), |k| {
        if !g.in_domain(k) {
            return 0.0;
        }
        q2_sym(&(hess_at(g, v.values(), k) - hess_at(g, v0.values(), k)), lame)
    }))
}

/// `(1/24) ∫ Q₂(∇²v − ∇²v₀) − ∫ f v`.
pub fn limit_kirchhoff(v: &ScalarField, v0: &ScalarField, f: &ScalarField, lame: &Lame) -> Result<f64> {
    same_grid(v.grid(), f.grid())?;
    let g = v.grid();
    let bend = integrate_values(g, &bending_density(v, v0, lame)?)? / 24.0;
    let fv: Vec<f64> = (0..g.len()).map(|k| f.at(k) * v.at(k)).collect();
    Ok(bend - integrate_values(g, &fv)?)
}

/// Stretching argument `sym ∇w + ½∇v⊗∇v − ½∇v₀⊗∇v₀` per node.
pub fn stretching_strain(w: &VectorField2, v: &ScalarField, v0: &ScalarField) -> Result<Vec<Sym2>> {
    same_grid(w.grid(), v.grid())?;
    same_grid(v.grid(), v0.grid())?;
    let g = v.grid();
    g.ensure_supported()?;
    let w0: Vec<f64> = w.values().iter().map(|x| x[0]).collect();
    let w1: Vec<f64> = w.values().iter().map(|x| x[1]).collect();
    Ok(map_range(g.len(), |k| {
        if !g.in_domain(k) {
            return Sym2::ZERO;
        }
        let a = grad4_at(g, &w0, k);
        let b = grad4_at(g, &w1, k);
        let sym = Sym2::new(a[0], 0.5 * (a[1] + b[0]), b[1]);
        sym + (Sym2::outer(grad4_at(g, v.values(), k)) - Sym2::outer(grad4_at(g, v0.values(), k))).scale(0.5)
    }))
}

/// `½ ∫ Q₂(stretching) + (1/24) ∫ Q₂(∇²v − ∇²v₀) − ∫ f v`.
pub fn limit_vonkarman(
    w: &VectorField2,
    v: &ScalarField,
    v0: &ScalarField,
    f: &ScalarField,
    lame: &Lame,
) -> Result<f64> {
    let strain = stretching_strain(w, v, v0)?;
    let g = v.grid();
    let dens: Vec<f64> = (0..g.len())
        .map(|k| if g.in_domain(k) { q2_sym(&strain[k], lame) } else { 0.0 })
        .collect();
    Ok(0.5 * integrate_values(g, &dens)? + limit_kirchhoff(v, v0, f, lame)?)
}

/// `det ∇²v − det ∇²v₀` per node and its `L²` norm over interior nodes;
/// boundary nodes carry Dirichlet data and are not constrained.
pub fn check_constraint(v: &ScalarField, v0: &ScalarField) -> Result<(ScalarField, f64)> {
    same_grid(v.grid(), v0.grid())?;
    let g = v0.grid();
    g.ensure_supported()?;
    let d0 = ScalarField::new(
        g.clone(),
        (0..g.len())
            .map(|k| {
                if g.in_domain(k) {
                    hess_at(g, v0.values(), k).det()
                } else {
                    0.0
                }
            })
            .collect(),
    )?;
    let r = ma_residual(v, &d0)?;
    let (l2, _) = interior_norms(g, r.values());
    Ok((r, l2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn params(h: f64) -> ShellParams {
        ShellParams::new(h, 0.5, Lame::default()).unwrap()
    }

    fn bowl(g: &Arc<Grid>) -> ScalarField {
        ScalarField::from_fn(g, |x, y| 0.5 * (x * x + y * y))
    }

    #[test]
    fn parameter_validation() {
        let l = Lame::default();
        assert!(ShellParams::new(0.0, 0.5, l).is_err());
        assert!(ShellParams::new(0.1, 1.0, l).is_err());
        assert!(ShellParams::new(0.1, 0.5, l).unwrap().with_nq(4).is_err());
        let p = ShellParams::new(0.01, 0.5, l).unwrap();
        assert_eq!(p.alpha_prime, 2.5);
        assert!((p.eta() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn deformation_validation() {
        let g = Grid::unit_square(5).unwrap();
        assert!(Deformation3::new(g.clone(), vec![-0.25, 0.3], vec![[0.0; 3]; 50]).is_err());
        assert!(Deformation3::new(g.clone(), vec![-0.25, 0.25], vec![[0.0; 3]; 49]).is_err());
        assert!(Deformation3::new(g, vec![-0.25, 0.25], vec![[0.0; 3]; 50]).is_ok());
    }

    #[test]
    fn normal_of_a_tilted_plane() {
        let g = Grid::unit_square(9).unwrap();
        let v0 = ScalarField::from_fn(&g, |x, y| 2.0 * x - y);
        let p = params(0.04);
        let emb = shell_embedding(&v0, &p).unwrap();
        let eta = p.eta();
        let s = (1.0 + eta * eta * 5.0).sqrt();
        let expected = [-2.0 * eta / s, eta / s, 1.0 / s];
        for k in g.domain_nodes() {
            let n = emb.n.at(k);
            for c in 0..3 {
                assert!((n[c] - expected[c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn embedding_of_a_bowl() {
        let g = Grid::disk(33, 0.0, 0.0, 1.0).unwrap();
        let v0 = bowl(&g);
        let defect = |h: f64| {
            let emb = shell_embedding(&v0, &params(h)).unwrap();
            let mut worst = 0.0f64;
            for k in g.domain_nodes() {
                let n = emb.n.at(k);
                assert!(((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs() < 1e-14);
                for q in 0..emb.params.nq {
                    worst = worst.max((emb.det_b(k, q) - 1.0).abs());
                }
            }
            worst
        };
        let slope = (defect(1e-2) / defect(1e-4)).log10() / 2.0;
        assert!(slope >= 0.5, "{slope}");
    }

    #[test]
    fn thick_shell_is_degenerate() {
        let g = Grid::unit_square(9).unwrap();
        let v0 = ScalarField::from_fn(&g, |x, y| 5.0 * (x * x + y * y));
        assert!(matches!(
            shell_embedding(&v0, &params(0.9)),
            Err(Error::ShellDegenerate { .. })
        ));
    }

    #[test]
    fn thickness_derivative_is_exact_on_polynomials() {
        let g = Grid::unit_square(5).unwrap();
        let h = 0.1;
        let d = Deformation3::from_fn(&g, 5, |x, _, t| [x, t.powi(4), t * t]);
        let grads = d.gradients(h).unwrap();
        for q in 0..5 {
            let t = d.thickness_points()[q];
            let m = grads[q * g.len() + g.idx(2, 2)];
            assert!((m[(0, 0)] - 1.0).abs() < 1e-12);
            assert!((m[(1, 2)] - 4.0 * t.powi(3) / h).abs() < 1e-11);
            assert!((m[(2, 2)] - 2.0 * t / h).abs() < 1e-11);
        }
    }

    #[test]
    fn undeformed_and_rotated_shells_cost_nothing() {
        let g = Grid::unit_square(17).unwrap();
        let v0 = ScalarField::from_fn(&g, |x, y| 0.5 * (x * x + y * y) + 0.2 * x * y * y);
        let emb = shell_embedding(&v0, &params(0.01)).unwrap();
        assert!(energy_3d_with(&emb.phi, &emb).unwrap() < 1e-20);
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.7);
        let moved = emb.phi.map(|p| {
            let q = r * Vector3::new(p[0], p[1], p[2]);
            [q[0] + 1.0, q[1] - 2.0, q[2] + 0.5]
        });
        assert!(energy_3d_with(&moved, &emb).unwrap() < 1e-20);
        assert!(distance_to_rotations(&moved, &emb).unwrap() < 1e-20);
    }

    #[test]
    fn homogeneous_plate_energy() {
        let g = Grid::rect(9, 13, 0.0, 2.0, -1.0, 0.5).unwrap();
        let lame = Lame::new(0.7, 1.3).unwrap();
        let p = ShellParams::new(0.05, 0.5, lame).unwrap();
        let a = Matrix3::new(1.1, 0.2, 0.0, -0.1, 0.95, 0.05, 0.03, 0.0, 1.02);
        let vh = Deformation3::from_fn(&g, p.nq, |x, y, t| {
            let v = a * Vector3::new(x, y, p.h * t);
            [v[0], v[1], v[2]]
        });
        let e = 0.5 * (a.transpose() * a - Matrix3::identity());
        let w = lame.mu * e.norm_squared() + 0.5 * lame.lambda * e.trace().powi(2);
        let got = energy_3d(&vh, &ScalarField::zeros(&g), &p).unwrap();
        assert!((got - 3.0 * w).abs() < 1e-12 * w, "{got} {}", 3.0 * w);
    }

    fn wavy(emb: &ShellEmbedding, s: f64) -> Deformation3 {
        let g = emb.phi.grid();
        let n = g.len();
        let vals = emb
            .phi
            .values()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let [x, y] = g.point(i % n);
                [p[0] + s * (x * y).sin(), p[1] - s * x * x, p[2] + s * (2.0 * y).cos()]
            })
            .collect();
        Deformation3::new(g.clone(), emb.phi.thickness_points().to_vec(), vals).unwrap()
    }

    #[test]
    fn energy_controls_distance_to_rotations() {
        let g = Grid::unit_square(17).unwrap();
        let emb = shell_embedding(&bowl(&g), &params(0.01)).unwrap();
        let vh = wavy(&emb, 0.02);
        let i = energy_3d_with(&vh, &emb).unwrap();
        let d = distance_to_rotations(&vh, &emb).unwrap();
        assert!(d > 0.0 && i >= 0.5 * emb.params.lame.mu * d, "{i} {d}");
    }

    #[test]
    fn load_must_be_balanced() {
        let g = Grid::unit_square(17).unwrap();
        let f = ScalarField::from_fn(&g, |x, _| x - 0.5);
        let emb = shell_embedding(&bowl(&g), &params(0.01)).unwrap();
        match total_energy_with(&emb.phi, &emb, &f) {
            Err(Error::UnbalancedLoad { mean, mx, .. }) => {
                assert!(mean.abs() < 1e-14);
                assert!((mx - 1.0 / 12.0).abs() < 1e-3);
            }
            other => panic!("{other:?}"),
        }
        let fixed = normalize_force(&f).unwrap();
        check_force(&fixed).unwrap();
        let m = force_moments(&fixed).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn total_energy_subtracts_the_load() {
        let g = Grid::unit_square(17).unwrap();
        let p = params(0.01);
        let zero = ScalarField::zeros(&g);
        let emb = shell_embedding(&zero, &p).unwrap();
        let s = |x: f64, y: f64| 0.1 * x * x * y;
        let vh = Deformation3::from_fn(&g, p.nq, |x, y, t| [x, y, p.h * t + s(x, y)]);
        assert_eq!(
            total_energy_with(&vh, &emb, &zero).unwrap(),
            energy_3d_with(&vh, &emb).unwrap()
        );
        let f = normalize_force(&ScalarField::from_fn(&g, |x, y| (3.0 * x * y).cos())).unwrap();
        let fs: Vec<f64> = (0..g.len())
            .map(|k| f.at(k) * s(g.point(k)[0], g.point(k)[1]))
            .collect();
        let expected =
            energy_3d_with(&vh, &emb).unwrap() - p.h.powf(p.alpha_prime) * integrate_values(&g, &fs).unwrap();
        let got = total_energy_with(&vh, &emb, &f).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} {expected}");
    }

    fn quadratic_pair(g: &Arc<Grid>) -> (ScalarField, ScalarField) {
        (
            bowl(g),
            ScalarField::from_fn(g, |x, y| 0.5 * (2.0 * x * x + 0.5 * y * y)),
        )
    }

    #[test]
    fn kirchhoff_limit_of_the_quadratic_pair() {
        let g = Grid::unit_square(33).unwrap();
        let (v0, v) = quadratic_pair(&g);
        let zero = ScalarField::zeros(&g);
        let lame = Lame::default();
        // Q2(diag(1, -1/2)) = 2(1 + 1/4) + (2/3)(1/2)^2 = 8/3, so the integral is 8/3 / 24
        let val = limit_kirchhoff(&v, &v0, &zero, &lame).unwrap();
        assert!((val - 1.0 / 9.0).abs() < 1e-12, "{val}");
        assert_eq!(limit_kirchhoff(&v0, &v0, &zero, &lame).unwrap(), 0.0);

        let f = ScalarField::from_fn(&g, |x, y| x - y * y);
        let fv: Vec<f64> = (0..g.len()).map(|k| f.at(k) * v.at(k)).collect();
        let with_load = limit_kirchhoff(&v, &v0, &f, &lame).unwrap();
        assert!((with_load - (val - integrate_values(&g, &fv).unwrap())).abs() < 1e-14);
    }

    #[test]
    fn kirchhoff_limit_is_quadratic() {
        let g = Grid::unit_square(17).unwrap();
        let v0 = bowl(&g);
        let dv = ScalarField::from_fn(&g, |x, y| (x * y).sin() + x.powi(3));
        let zero = ScalarField::zeros(&g);
        let lame = Lame::new(0.3, 2.0).unwrap();
        let at = |s: f64| limit_kirchhoff(&v0.add(&dv.scale(s)).unwrap(), &v0, &zero, &lame).unwrap();
        assert!((at(3.0) - 9.0 * at(1.0)).abs() < 1e-12 * at(3.0));
    }

    #[test]
    fn von_karman_reduces_to_bending() {
        let g = Grid::unit_square(33).unwrap();
        let (v0, v) = quadratic_pair(&g);
        let zero = ScalarField::zeros(&g);
        let lame = Lame::default();
        let no_w = VectorField2::from_fn(&g, |_, _| [0.0, 0.0]);
        assert_eq!(limit_vonkarman(&no_w, &v0, &v0, &zero, &lame).unwrap(), 0.0);

        // sym ∇w = ½(∇v0⊗∇v0 − ∇v⊗∇v) = diag(−3x²/2, 3y²/8)
        let w = VectorField2::from_fn(&g, |x, y| [-0.5 * x.powi(3), 0.125 * y.powi(3)]);
        let vk = limit_vonkarman(&w, &v, &v0, &zero, &lame).unwrap();
        assert!((vk - 1.0 / 9.0).abs() < 1e-12, "{vk}");

        // Q2(e1⊗e1) = 2 + 2/3
        let stretch = VectorField2::from_fn(&g, |x, _| [x, 0.0]);
        let vk = limit_vonkarman(&stretch, &v0, &v0, &zero, &lame).unwrap();
        assert!((vk - 4.0 / 3.0).abs() < 1e-12, "{vk}");
    }

    #[test]
    fn constraint_residuals() {
        let g = Grid::unit_square(17).unwrap();
        let (v0, v) = quadratic_pair(&g);
        assert!(check_constraint(&v0, &v0).unwrap().1 < 1e-12);
        assert!(check_constraint(&v, &v0).unwrap().1 < 1e-12);
        let bumped = ScalarField::from_fn(&g, |x, y| 0.5 * (x * x + y * y) + 0.1 * x.powi(3));
        let (r, l2) = check_constraint(&bumped, &v0).unwrap();
        for k in g.domain_nodes() {
            assert!((r.at(k) - 0.6 * g.point(k)[0]).abs() < 1e-10);
        }
        let expected: f64 = g
            .interior_nodes()
            .into_iter()
            .map(|k| g.hx() * g.hy() * (0.6 * g.point(k)[0]).powi(2))
            .sum();
        assert!((l2 - expected.sqrt()).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn frame_indifference(axis in proptest::array::uniform3(-1.0f64..1.0), angle in -3.1f64..3.1, c in proptest::array::uniform3(-2.0f64..2.0)) {
            prop_assume!(axis.iter().map(|a| a * a).sum::<f64>() > 1e-2);
            let g = Grid::unit_square(9).unwrap();
            let emb = shell_embedding(&bowl(&g), &params(0.05)).unwrap();
            let vh = wavy(&emb, 0.05);
            let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle);
            let moved = vh.map(|p| {
                let q = r * Vector3::new(p[0], p[1], p[2]);
                [q[0] + c[0], q[1] + c[1], q[2] + c[2]]
            });
            let a = energy_3d_with(&vh, &emb).unwrap();
            let b = energy_3d_with(&moved, &emb).unwrap();
            prop_assert!(a > 0.0 && (a - b).abs() <= 1e-10 * a);
        }
    }
}

//! St Venant-Kirchhoff stored energy and its quadratic forms.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::Sym2;

/// Lamé constants of an isotropic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lame {
    pub mu: f64,
    pub lambda: f64,
}

impl Lame {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(Lame { mu, lambda })
    }

    /// Coefficient of `(tr G)^2` in the reduced form `Q2`.
    pub fn lambda_2d(&self) -> f64 {
        2.0 * self.mu * self.lambda / (2.0 * self.mu + self.lambda)
    }
}

impl Default for Lame {
    fn default() -> Self {
        Lame { mu: 1.0, lambda: 1.0 }
    }
}

/// `W(F) = mu |E|^2 + lambda/2 (tr E)^2` with `E = (F^T F - I)/2`.
pub fn energy_density(f: &Matrix3<f64>, lame: &Lame) -> f64 {
    let e = 0.5 * (f.transpose() * f - Matrix3::identity());
    let tr = e.trace();
    lame.mu * e.norm_squared() + 0.5 * lame.lambda * tr * tr
}

/// `Q3(F) = D^2 W(Id)(F, F) = 2 mu |sym F|^2 + lambda (tr F)^2`.
pub fn q3(f: &Matrix3<f64>, lame: &Lame) -> f64 {
    let s = 0.5 * (f + f.transpose());
    let tr = f.trace();
    2.0 * lame.mu * s.norm_squared() + lame.lambda * tr * tr
}

/// Reduced form `Q2(G) = min Q3` over completions of the tangential minor.
/// Rejects non-symmetric input.
pub fn q2(g: [[f64; 2]; 2], lame: &Lame) -> Result<f64> {
    Ok(q2_sym(&Sym2::try_from_rows(g)?, lame))
}

pub fn q2_sym(g: &Sym2, lame: &Lame) -> f64 {
    let tr = g.trace();
    2.0 * lame.mu * g.norm2() + lame.lambda_2d() * tr * tr
}

/// Minimiser `d` of `Q3(G* + sym(d ⊗ e3))`.
pub fn optimal_warping(g: &Sym2, lame: &Lame) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -lame.lambda * g.trace() / (2.0 * lame.mu + lame.lambda))
}

/// `sym(d ⊗ e3)`.
pub fn sym_e3(d: &Vector3<f64>) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    m.set_column(2, d);
    0.5 * (m + m.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Rotation3, Unit};
    use proptest::prelude::*;

    const UNIT: Lame = Lame { mu: 1.0, lambda: 1.0 };

    /// Q3 via a central second difference of W at the identity.
    fn q3_fd(f: &Matrix3<f64>, lame: &Lame, eps: f64) -> f64 {
        let id = Matrix3::identity();
        (energy_density(&(id + eps * f), lame) + energy_density(&(id - eps * f), lame)
            - 2.0 * energy_density(&id, lame))
            / (eps * eps)
    }

    fn q3_fd_extrapolated(f: &Matrix3<f64>, lame: &Lame) -> f64 {
        let (a, b) = (q3_fd(f, lame, 1e-2), q3_fd(f, lame, 5e-3));
        (4.0 * b - a) / 3.0
    }

    /// Independent minimisation of `d -> Q3(G* + sym(d ⊗ e3))`: the map is
    /// quadratic, so its gradient and Hessian are recovered exactly by
    /// finite differences of q3 and the 3x3 normal equations are solved.
    fn q2_oracle(g: &Sym2, lame: &Lame) -> (f64, Vector3<f64>) {
        let phi = |d: Vector3<f64>| q3(&(g.embed() + sym_e3(&d)), lame);
        let z = Vector3::zeros();
        let e = |i: usize| Vector3::ith(i, 1.0);
        let mut hess = Matrix3::zeros();
        let mut grad = Vector3::zeros();
        for i in 0..3 {
            grad[i] = 0.5 * (phi(e(i)) - phi(-e(i)));
            for j in 0..3 {
                hess[(i, j)] = 0.25 * (phi(e(i) + e(j)) - phi(e(i) - e(j)) - phi(e(j) - e(i)) + phi(-e(i) - e(j)));
            }
        }
        let d = -hess.lu().solve(&grad).unwrap();
        (phi(d).min(phi(z)), d)
    }

    #[test]
    fn hand_values() {
        assert_eq!(energy_density(&Matrix3::identity(), &UNIT), 0.0);
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians());
        assert!(energy_density(r.matrix(), &UNIT).abs() < 1e-15);
        let f = Matrix3::from_diagonal(&Vector3::new(1.1, 1.0, 1.0));
        assert!((energy_density(&f, &UNIT) - 0.0165375).abs() < 1e-15);
    }

    #[test]
    fn q3_values() {
        let id = Matrix3::identity();
        assert!((q3_fd_extrapolated(&id, &UNIT) - 15.0).abs() < 1e-6);
        assert_eq!(q3(&id, &UNIT), 15.0);
        let skew = Matrix3::new(0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0);
        assert_eq!(q3(&skew, &UNIT), 0.0);
        let e11 = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0));
        assert!((q3_fd_extrapolated(&e11, &UNIT) - 3.0).abs() < 1e-6);
        assert_eq!(q3(&e11, &UNIT), 3.0);
    }

    #[test]
    fn q2_values_against_oracle() {
        let cases = [
            (Sym2::ZERO, 0.0),
            (Sym2::IDENTITY, 20.0 / 3.0),
            (Sym2::diag(1.0, -0.5), 8.0 / 3.0),
        ];
        for (g, want) in cases {
            let (oracle, _) = q2_oracle(&g, &UNIT);
            assert!((oracle - want).abs() < 1e-12, "{oracle} vs {want}");
            assert!((q2_sym(&g, &UNIT) - want).abs() < 1e-12);
        }
        let (_, d) = q2_oracle(&Sym2::IDENTITY, &UNIT);
        assert!((d - Vector3::new(0.0, 0.0, -2.0 / 3.0)).norm() < 1e-12);
        assert!((optimal_warping(&Sym2::IDENTITY, &UNIT) - d).norm() < 1e-15);
        let (_, d) = q2_oracle(&Sym2::new(1.0, 0.3, -1.0), &UNIT);
        assert!(d.norm() < 1e-12);
        assert_eq!(optimal_warping(&Sym2::new(1.0, 0.3, -1.0), &UNIT).norm(), 0.0);
    }

    #[test]
    fn q2_rejects_asymmetric() {
        assert!(q2([[1.0, 0.5], [0.2, 1.0]], &UNIT).is_err());
        assert!((q2([[1.0, 0.0], [0.0, 1.0]], &UNIT).unwrap() - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lame_validation() {
        assert!(Lame::new(0.0, 1.0).is_err());
        assert!(Lame::new(1.0, -0.1).is_err());
        assert!(Lame::new(1.0, 0.0).is_ok());
    }

    fn mat3() -> impl Strategy<Value = Matrix3<f64>> {
        proptest::array::uniform9(-2.0f64..2.0).prop_map(|a| Matrix3::from_row_slice(&a))
    }

    fn lame() -> impl Strategy<Value = Lame> {
        (0.1f64..5.0, 0.0f64..5.0).prop_map(|(mu, lambda)| Lame { mu, lambda })
    }

    fn sym2() -> impl Strategy<Value = Sym2> {
        (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b, c)| Sym2::new(a, b, c))
    }

    proptest! {
        #[test]
        fn frame_indifference(f in mat3(), axis in proptest::array::uniform3(-1.0f64..1.0), angle in -3.2f64..3.2, l in lame()) {
            let v = Vector3::from(axis);
            prop_assume!(v.norm() > 1e-3);
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(v), angle);
            let w0 = energy_density(&f, &l);
            let w1 = energy_density(&(r.matrix() * f), &l);
            prop_assert!((w1 - w0).abs() <= 1e-12 * (1.0 + w0.abs()));
            prop_assert!(w0 >= 0.0);
        }

        #[test]
        fn q3_is_second_variation(f in mat3(), l in lame()) {
            let d = (q3(&f, &l) - q3_fd_extrapolated(&f, &l)).abs();
            prop_assert!(d <= 1e-6 * (1.0 + f.norm_squared()) * (l.mu + l.lambda).max(1.0), "{}", d);
        }

        #[test]
        fn warping_attains_q2(g in sym2(), l in lame(), trials in proptest::collection::vec(proptest::array::uniform3(-3.0f64..3.0), 100)) {
            let d = optimal_warping(&g, &l);
            let best = q3(&(g.embed() + sym_e3(&d)), &l);
            let q = q2_sym(&g, &l);
            prop_assert!((best - q).abs() <= 1e-12 * (1.0 + q));
            for t in trials {
                let other = q3(&(g.embed() + sym_e3(&Vector3::from(t))), &l);
                prop_assert!(q <= other + 1e-12 * (1.0 + other));
            }
            prop_assert!(q <= q3(&g.embed(), &l) + 1e-12);
            prop_assert!(q >= 2.0 * l.mu * g.norm2() - 1e-12);
        }

        #[test]
        fn nondegenerate_near_rotations(a in mat3(), axis in proptest::array::uniform3(-1.0f64..1.0), angle in -3.2f64..3.2) {
            // W >= c dist^2(F, SO(3)) on a neighbourhood of SO(3)
            let v = Vector3::from(axis);
            prop_assume!(v.norm() > 1e-3);
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(v), angle);
            let s = 0.5 * (a + a.transpose());
            let f = r.matrix() * (Matrix3::identity() + 0.05 * s);
            let dist2 = (0.05 * s).norm_squared();
            prop_assert!(energy_density(&f, &UNIT) >= 0.5 * dist2);
        }
    }
}

//! Small dense helpers and the sparse direct solver used by the Newton and
//! Gauss-Newton iterations.

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Symmetric 2x2 matrix stored by its three independent entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Sym2::new(a, 0.0, b)
    }

    /// Builds from a full 2x2 matrix, rejecting asymmetric input.
    pub fn try_from_rows(m: [[f64; 2]; 2]) -> Result<Self> {
        let tol = 1e-12 * (1.0 + m[0][1].abs().max(m[1][0].abs()));
        if (m[0][1] - m[1][0]).abs() > tol {
            return Err(Error::NotSymmetric(m[0][1], m[1][0]));
        }
        Ok(Sym2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]))
    }

    /// `a ⊗ a`
    pub fn outer(a: [f64; 2]) -> Self {
        Sym2::new(a[0] * a[0], a[0] * a[1], a[1] * a[1])
    }

    /// Entry `(i, j)` with `i, j` in `{0, 1}`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn cof(&self) -> Sym2 {
        Sym2::new(self.yy, -self.xy, self.xx)
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let c = self.cof();
        Some(Sym2::new(c.xx / d, c.xy / d, c.yy / d))
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(&self, o: &Sym2) -> f64 {
        self.xx * o.xx + 2.0 * self.xy * o.xy + self.yy * o.yy
    }

    pub fn norm2(&self) -> f64 {
        self.ddot(self)
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn quad(&self, a: [f64; 2]) -> f64 {
        self.xx * a[0] * a[0] + 2.0 * self.xy * a[0] * a[1] + self.yy * a[1] * a[1]
    }

    pub fn apply(&self, a: [f64; 2]) -> [f64; 2] {
        [self.xx * a[0] + self.xy * a[1], self.xy * a[0] + self.yy * a[1]]
    }

    /// Smallest eigenvalue.
    pub fn min_eig(&self) -> f64 {
        let m = 0.5 * self.trace();
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        m - r
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    /// Zero-padded 3x3 embedding `G*`.
    pub fn embed(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::new(
            self.xx, self.xy, 0.0, //
            self.xy, self.yy, 0.0, //
            0.0, 0.0, 0.0,
        )
    }
}

impl std::ops::Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl std::ops::Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

/// Square sparse system assembled from (row, col, value) entries; duplicates add.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        SparseSystem { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        SparseSystem {
            n,
            entries: Vec::with_capacity(nnz),
        }
    }

    /// Diagonal with duplicate entries summed.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for t in &self.entries {
            if t.row == t.col {
                d[t.row] += t.val;
            }
        }
        d
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.entries.push(Triplet::new(row, col, val));
        }
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = (usize, usize, f64)>) {
        for (r, c, v) in other {
            self.add(r, c, v);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.entries {
            y[t.row] += t.val * x[t.col];
        }
        y
    }

    /// Sparse Cholesky for symmetric positive definite systems.
    pub fn solve_spd(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(rhs.len(), self.n);
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let llt = mat
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let b = faer::Col::from_fn(self.n, |i| rhs[i]);
        let x = llt.solve(&b);
        Ok((0..self.n).map(|i| x[i]).collect())
    }

    /// Sparse LU with fill-reducing ordering.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(rhs.len(), self.n);
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let b = faer::Col::from_fn(self.n, |i| rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("non-finite solution (singular operator)".into()));
        }
        Ok(out)
    }
}

/// Sparse Cholesky for a sequence of shifted systems `(A + σI) x = b` whose
/// sparsity pattern rarely changes; the symbolic analysis is redone only when
/// it does.
#[derive(Debug, Default)]
pub struct ShiftedCholesky {
    cache: Option<(Vec<usize>, Vec<usize>, SymbolicLlt<usize>)>,
    mat: Option<SparseColMat<usize, f64>>,
    diag: Vec<usize>,
}

impl ShiftedCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `A`, storing its full diagonal so shifts keep the pattern.
    pub fn load(&mut self, sys: &SparseSystem) -> Result<()> {
        let mut entries = sys.entries.clone();
        entries.extend((0..sys.n).map(|i| Triplet::new(i, i, 0.0)));
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(sys.n, sys.n, &entries)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let (ptr, idx) = (mat.symbolic().col_ptr(), mat.symbolic().row_idx());
        self.diag = (0..sys.n)
            .map(|j| ptr[j] + idx[ptr[j]..ptr[j + 1]].binary_search(&j).expect("diagonal stored"))
            .collect();
        let same = matches!(&self.cache, Some((p, r, _)) if p.as_slice() == ptr && r.as_slice() == idx);
        if !same {
            let symbolic = SymbolicLlt::try_new(mat.symbolic(), faer::Side::Lower)
                .map_err(|e| Error::Factorization(format!("{e:?}")))?;
            self.cache = Some((ptr.to_vec(), idx.to_vec(), symbolic));
        }
        self.mat = Some(mat);
        Ok(())
    }

    /// Solves `(A + shift I) x = rhs` for the loaded `A`.
    pub fn solve(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let (Some(mat), Some((_, _, symbolic))) = (&self.mat, &self.cache) else {
            return Err(Error::Factorization("no matrix loaded".into()));
        };
        let mut shifted = mat.clone();
        let vals = shifted.val_mut();
        for &p in &self.diag {
            vals[p] += shift;
        }
        let llt = Llt::try_new_with_symbolic(symbolic.clone(), shifted.as_ref(), faer::Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let b = faer::Col::from_fn(rhs.len(), |i| rhs[i]);
        let x = llt.solve(&b);
        Ok((0..rhs.len()).map(|i| x[i]).collect())
    }
}

use std::sync::Arc;

use nalgebra::Matrix3;

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::linalg::Sym2;

/// Scalar samples on a [`Grid`]. Values at nodes outside the mask are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// Vector samples (`D` components per node) on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<const D: usize> {
    grid: Arc<Grid>,
    values: Vec<[f64; D]>,
}

pub type VectorField2 = VectorField<2>;
pub type VectorField3 = VectorField<3>;

/// Symmetric 2x2 matrix per node; symmetric by storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat2Field {
    grid: Arc<Grid>,
    values: Vec<Sym2>,
}

/// General 3x3 matrix per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat3Field {
    grid: Arc<Grid>,
    values: Vec<Matrix3<f64>>,
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let mut values = values;
        for (k, v) in values.iter_mut().enumerate() {
            if !grid.in_domain(k) {
                *v = 0.0;
            }
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f(x, y)` at every in-domain node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                if grid.in_domain(k) {
                    let p = grid.point(k);
                    f(p[0], p[1])
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self::from_fn(grid, |_, _| c)
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }
    /// Value at the node nearest to `p`.
    pub fn at_point(&self, p: [f64; 2]) -> f64 {
        self.values[self.grid.nearest(p)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect()).expect("same length")
    }

    pub fn zip_map(&self, o: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &o.grid)?;
        Ok(ScalarField::new(
            self.grid.clone(),
            self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect(),
        )
        .expect("same length"))
    }

    pub fn add(&self, o: &ScalarField) -> Result<Self> {
        self.zip_map(o, |a, b| a + b)
    }
    pub fn sub(&self, o: &ScalarField) -> Result<Self> {
        self.zip_map(o, |a, b| a - b)
    }
    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// Largest |value| over the domain.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.grid.in_domain(*k))
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
    }
}

impl<const D: usize> VectorField<D> {
    pub fn new(grid: Arc<Grid>, values: Vec<[f64; D]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(VectorField { grid, values })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> [f64; D]) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                if grid.in_domain(k) {
                    let p = grid.point(k);
                    f(p[0], p[1])
                } else {
                    [0.0; D]
                }
            })
            .collect();
        VectorField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_components(comps: &[&ScalarField; D]) -> Result<Self> {
        let grid = comps[0].grid().clone();
        for c in comps.iter() {
            same_grid(&grid, c.grid())?;
        }
        let values = (0..grid.len())
            .map(|k| std::array::from_fn(|d| comps[d].at(k)))
            .collect();
        Ok(VectorField { grid, values })
    }

    pub fn component(&self, d: usize) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.values.iter().map(|v| v[d]).collect()).expect("same length")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[[f64; D]] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [[f64; D]] {
        &mut self.values
    }
    pub fn at(&self, k: usize) -> [f64; D] {
        self.values[k]
    }
}

impl Mat2Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Sym2>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Mat2Field { grid, values })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> Sym2) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                if grid.in_domain(k) {
                    let p = grid.point(k);
                    f(p[0], p[1])
                } else {
                    Sym2::ZERO
                }
            })
            .collect();
        Mat2Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[Sym2] {
        &self.values
    }
    pub fn at(&self, k: usize) -> Sym2 {
        self.values[k]
    }

    /// Pointwise determinant.
    pub fn det(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.values.iter().map(Sym2::det).collect()).expect("same length")
    }

    /// The three stored entries as scalar fields `(xx, xy, yy)`.
    pub fn components(&self) -> [ScalarField; 3] {
        let f = |sel: fn(&Sym2) -> f64| {
            ScalarField::new(self.grid.clone(), self.values.iter().map(sel).collect()).expect("same length")
        };
        [f(|m| m.xx), f(|m| m.xy), f(|m| m.yy)]
    }
}

impl Mat3Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Matrix3<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Mat3Field { grid, values })
    }
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[Matrix3<f64>] {
        &self.values
    }
    pub fn at(&self, k: usize) -> Matrix3<f64> {
        self.values[k]
    }
}

use std::sync::Arc;

use arrayvec::ArrayVec;

use crate::error::{Error, Result};

/// Classification of a node with respect to the domain mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Outside,
    Interior,
    Boundary,
}

impl NodeKind {
    pub fn code(self) -> u8 {
        match self {
            NodeKind::Outside => 0,
            NodeKind::Interior => 1,
            NodeKind::Boundary => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

pub type Stencil<const N: usize> = ArrayVec<(usize, f64), N>;

/// Structured node grid over a rectangular bounding box with a domain mask.
///
/// Node `k = j * nx + i` sits at `(x0 + i hx, y0 + j hy)`. Nodes inside the
/// domain are either `Interior` (all four axis neighbours inside) or
/// `Boundary`. Quadrature weights are those of the composite trapezoid rule
/// over cells whose four corners are inside.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    kinds: Vec<NodeKind>,
    weights: Vec<f64>,
    unsupported: Option<(usize, usize)>,
}

impl Grid {
    /// Rectangle with every node inside the domain.
    pub fn rect(nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Arc<Grid>> {
        Self::from_mask(nx, ny, [x0, x1, y0, y1], &vec![true; nx * ny])
    }

    /// `[0,1]^2` with `n x n` nodes.
    pub fn unit_square(n: usize) -> Result<Arc<Grid>> {
        Self::rect(n, n, 0.0, 1.0, 0.0, 1.0)
    }

    /// Disk of radius `r` about `(cx, cy)` on its bounding box with `n x n` nodes.
    /// Nodes without a usable second-order stencil in both directions are
    /// dropped from the mask.
    pub fn disk(n: usize, cx: f64, cy: f64, r: f64) -> Result<Arc<Grid>> {
        if !(r > 0.0) {
            return Err(Error::InvalidGrid(format!("disk radius must be positive, got {r}")));
        }
        let bbox = [cx - r, cx + r, cy - r, cy + r];
        check_dims(n, n, bbox)?;
        let hx = 2.0 * r / (n - 1) as f64;
        let mut inside: Vec<bool> = (0..n * n)
            .map(|k| {
                let (i, j) = (k % n, k / n);
                let x = bbox[0] + i as f64 * hx;
                let y = bbox[2] + j as f64 * hx;
                (x - cx).powi(2) + (y - cy).powi(2) <= r * r * (1.0 + 1e-12)
            })
            .collect();
        let mut dropped = 0usize;
        loop {
            let bad: Vec<usize> = (0..n * n)
                .filter(|&k| inside[k] && !node_supported(n, n, &inside, k))
                .collect();
            if bad.is_empty() {
                break;
            }
            dropped += bad.len();
            for k in bad {
                inside[k] = false;
            }
        }
        if dropped > 0 {
            log::debug!("disk grid: dropped {dropped} nodes lacking stencil support");
        }
        Self::from_mask(n, n, bbox, &inside)
    }

    /// Arbitrary mask on a bounding box `[x0, x1, y0, y1]`. Nodes lacking
    /// stencil support are kept; derivative operators then report them.
    pub fn from_mask(nx: usize, ny: usize, bbox: [f64; 4], inside: &[bool]) -> Result<Arc<Grid>> {
        check_dims(nx, ny, bbox)?;
        if inside.len() != nx * ny {
            return Err(Error::InvalidGrid(format!(
                "mask has {} entries, expected {}",
                inside.len(),
                nx * ny
            )));
        }
        let at = |i: isize, j: isize| -> bool {
            i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && inside[j as usize * nx + i as usize]
        };
        let kinds: Vec<NodeKind> = (0..nx * ny)
            .map(|k| {
                if !inside[k] {
                    return NodeKind::Outside;
                }
                let (i, j) = ((k % nx) as isize, (k / nx) as isize);
                if at(i - 1, j) && at(i + 1, j) && at(i, j - 1) && at(i, j + 1) {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                }
            })
            .collect();
        let hx = (bbox[1] - bbox[0]) / (nx - 1) as f64;
        let hy = (bbox[3] - bbox[2]) / (ny - 1) as f64;
        let quarter = 0.25 * hx * hy;
        let mut weights = vec![0.0; nx * ny];
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corners = [j * nx + i, j * nx + i + 1, (j + 1) * nx + i, (j + 1) * nx + i + 1];
                if corners.iter().all(|&c| inside[c]) {
                    for c in corners {
                        weights[c] += quarter;
                    }
                }
            }
        }
        let unsupported = (0..nx * ny)
            .find(|&k| inside[k] && !node_supported(nx, ny, inside, k))
            .map(|k| (k % nx, k / nx));
        Ok(Arc::new(Grid {
            nx,
            ny,
            x0: bbox[0],
            x1: bbox[1],
            y0: bbox[2],
            y1: bbox[3],
            kinds,
            weights,
            unsupported,
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn bbox(&self) -> [f64; 4] {
        [self.x0, self.x1, self.y0, self.y1]
    }
    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }
    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }
    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }
    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.x0 + i as f64 * self.hx(), self.y0 + j as f64 * self.hy()]
    }
    pub fn kind(&self, k: usize) -> NodeKind {
        self.kinds[k]
    }
    pub fn in_domain(&self, k: usize) -> bool {
        self.kinds[k] != NodeKind::Outside
    }
    pub fn is_interior(&self, k: usize) -> bool {
        self.kinds[k] == NodeKind::Interior
    }
    pub fn is_boundary(&self, k: usize) -> bool {
        self.kinds[k] == NodeKind::Boundary
    }
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices of all nodes inside the domain.
    pub fn domain_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.in_domain(k)).collect()
    }

    /// Indices of interior (non-boundary) nodes.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_interior(k)).collect()
    }

    /// Node nearest to a point (ignores the mask).
    pub fn nearest(&self, p: [f64; 2]) -> usize {
        let i = ((p[0] - self.x0) / self.hx()).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p[1] - self.y0) / self.hy()).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        self.idx(i, j)
    }

    /// Number of in-domain nodes (by index steps) to the nearest boundary node,
    /// measured along grid axes.
    pub fn depth(&self, k: usize) -> usize {
        if !self.in_domain(k) {
            return 0;
        }
        let (i, j) = self.ij(k);
        let mut best = usize::MAX;
        for (di, dj) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let mut s = 0usize;
            let (mut ii, mut jj) = (i as isize, j as isize);
            loop {
                let k2 = self.idx(ii as usize, jj as usize);
                if self.is_boundary(k2) {
                    break;
                }
                ii += di;
                jj += dj;
                s += 1;
            }
            best = best.min(s);
        }
        best
    }

    /// First node whose derivative stencils are unavailable, if any.
    pub fn unsupported_node(&self) -> Option<(usize, usize)> {
        self.unsupported
    }

    pub(crate) fn ensure_supported(&self) -> Result<()> {
        match self.unsupported {
            Some((i, j)) => Err(Error::Stencil { i, j }),
            None => Ok(()),
        }
    }

    fn step(&self, k: usize, axis: Axis, s: isize) -> Option<usize> {
        let (i, j) = self.ij(k);
        let (ii, jj) = match axis {
            Axis::X => (i as isize + s, j as isize),
            Axis::Y => (i as isize, j as isize + s),
        };
        if ii < 0 || jj < 0 || ii as usize >= self.nx || jj as usize >= self.ny {
            return None;
        }
        let k2 = self.idx(ii as usize, jj as usize);
        self.in_domain(k2).then_some(k2)
    }

    fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.hx(),
            Axis::Y => self.hy(),
        }
    }

    /// First-derivative stencil: centred where both neighbours are inside,
    /// otherwise the three-point one-sided second-order formula.
    pub fn d1(&self, k: usize, axis: Axis) -> Option<Stencil<3>> {
        let h = self.spacing(axis);
        let mut s = Stencil::new();
        if let (Some(m), Some(p)) = (self.step(k, axis, -1), self.step(k, axis, 1)) {
            s.push((m, -0.5 / h));
            s.push((p, 0.5 / h));
            return Some(s);
        }
        for dir in [1isize, -1] {
            if let (Some(a), Some(b)) = (self.step(k, axis, dir), self.step(k, axis, 2 * dir)) {
                let sg = dir as f64;
                s.push((k, -1.5 * sg / h));
                s.push((a, 2.0 * sg / h));
                s.push((b, -0.5 * sg / h));
                return Some(s);
            }
        }
        None
    }

    /// Fourth-order first-derivative stencil on the five consecutive nodes
    /// around `k` that sit most symmetrically inside the domain. Falls back to
    /// [`Grid::d1`] on lines shorter than five nodes.
    pub fn d1_fourth(&self, k: usize, axis: Axis) -> Option<Stencil<5>> {
        let h = self.spacing(axis);
        for start in [-2isize, -1, -3, 0, -4] {
            let nodes: Option<ArrayVec<usize, 5>> = (start..start + 5)
                .map(|o| {
                    if o == 0 {
                        self.in_domain(k).then_some(k)
                    } else {
                        self.step(k, axis, o)
                    }
                })
                .collect();
            if let Some(nodes) = nodes {
                let mut s = Stencil::new();
                for (m, &node) in nodes.iter().enumerate() {
                    s.push((node, lagrange_slope(start, m) / h));
                }
                return Some(s);
            }
        }
        self.d1(k, axis).map(|s| s.into_iter().collect())
    }

    /// Second-derivative stencil: centred, or four-point one-sided (exact on cubics).
    pub fn d2(&self, k: usize, axis: Axis) -> Option<Stencil<4>> {
        let h2 = self.spacing(axis).powi(2);
        let mut s = Stencil::new();
        if let (Some(m), Some(p)) = (self.step(k, axis, -1), self.step(k, axis, 1)) {
            s.push((m, 1.0 / h2));
            s.push((k, -2.0 / h2));
            s.push((p, 1.0 / h2));
            return Some(s);
        }
        for dir in [1isize, -1] {
            if let (Some(a), Some(b), Some(c)) = (
                self.step(k, axis, dir),
                self.step(k, axis, 2 * dir),
                self.step(k, axis, 3 * dir),
            ) {
                s.push((k, 2.0 / h2));
                s.push((a, -5.0 / h2));
                s.push((b, 4.0 / h2));
                s.push((c, -1.0 / h2));
                return Some(s);
            }
        }
        None
    }

    /// Mixed derivative as the average of the two tensor-product orderings;
    /// reduces to the centred cross stencil away from the boundary.
    pub fn dxy(&self, k: usize) -> Option<Stencil<18>> {
        let mut s = Stencil::new();
        for (outer, inner) in [(Axis::X, Axis::Y), (Axis::Y, Axis::X)] {
            for (ko, co) in self.d1(k, outer)? {
                for (ki, ci) in self.d1(ko, inner)? {
                    s.push((ki, 0.5 * co * ci));
                }
            }
        }
        Some(s)
    }
}

/// Derivative at 0 of the Lagrange basis polynomial for node `start + m`
/// among the integer nodes `start..start + 5`.
fn lagrange_slope(start: isize, m: usize) -> f64 {
    let xs: Vec<f64> = (0..5).map(|i| (start + i as isize) as f64).collect();
    let denom: f64 = (0..5).filter(|&i| i != m).map(|i| xs[m] - xs[i]).product();
    let mut num = 0.0;
    for skip in (0..5).filter(|&i| i != m) {
        num += (0..5).filter(|&i| i != m && i != skip).map(|i| -xs[i]).product::<f64>();
    }
    num / denom
}

fn check_dims(nx: usize, ny: usize, bbox: [f64; 4]) -> Result<()> {
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3x3 nodes, got {nx}x{ny}")));
    }
    if !(bbox[1] > bbox[0]) || !(bbox[3] > bbox[2]) || bbox.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(format!("degenerate bounding box {bbox:?}")));
    }
    Ok(())
}

fn node_supported(nx: usize, ny: usize, inside: &[bool], k: usize) -> bool {
    let (i, j) = ((k % nx) as isize, (k / nx) as isize);
    let at = |i: isize, j: isize| -> bool {
        i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && inside[j as usize * nx + i as usize]
    };
    let axis_ok = |di: isize, dj: isize| -> bool {
        (at(i - di, j - dj) && at(i + di, j + dj))
            || (at(i + di, j + dj) && at(i + 2 * di, j + 2 * dj) && at(i + 3 * di, j + 3 * dj))
            || (at(i - di, j - dj) && at(i - 2 * di, j - 2 * dj) && at(i - 3 * di, j - 3 * dj))
    };
    axis_ok(1, 0) && axis_ok(0, 1)
}

//! Convexity analysis of Monge-Ampère solutions: the glued example
//! `u = ±x² e^{y²/2}`, sign classification, convex envelopes and the
//! oscillation estimate for maps with positive Jacobian.

mod hull;
mod oscillation;

pub use hull::convexify;
pub use oscillation::{osc_ball_and_sphere, oscillation_bound, OscillationCheck};

use std::sync::Arc;

use crate::error::Result;
use crate::fields::{hessian, Grid, ScalarField};
use crate::linalg::Sym2;

/// `u(x, y) = x|x| e^{y²/2}` together with its gradient and Hessian.
pub fn sverak_exact(x: f64, y: f64) -> (f64, [f64; 2], Sym2) {
    let s = if x >= 0.0 { 1.0 } else { -1.0 };
    let e = (0.5 * y * y).exp();
    let u = s * x * x * e;
    let grad = [s * 2.0 * x * e, s * y * x * x * e];
    let hess = Sym2::new(s * 2.0 * e, s * 2.0 * x * y * e, s * x * x * e * (1.0 + y * y));
    (u, grad, hess)
}

/// The example sampled on `grid`.
pub fn sverak_example(grid: &Arc<Grid>) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| sverak_exact(x, y).0)
}

/// `det ∇²u = 2x² e^{y²} (1 − y²)` for the example.
pub fn sverak_det(x: f64, y: f64) -> f64 {
    2.0 * x * x * (y * y).exp() * (1.0 - y * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Convex,
    Concave,
    Indeterminate,
}

impl Label {
    pub fn code(self) -> f64 {
        match self {
            Label::Convex => 1.0,
            Label::Concave => -1.0,
            Label::Indeterminate => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Convex,
    Concave,
    Mixed,
    /// No node is outside the singular set.
    Degenerate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Convex => "convex",
            Verdict::Concave => "concave",
            Verdict::Mixed => "mixed",
            Verdict::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConvexityReport {
    grid: Arc<Grid>,
    pub labels: Vec<Label>,
    /// Nodes with `det ∇²u ≤ eps`.
    pub singular: Vec<bool>,
    pub eps: f64,
    pub verdict: Verdict,
}

impl ConvexityReport {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn count(&self, label: Label) -> usize {
        self.grid
            .domain_nodes()
            .into_iter()
            .filter(|&k| self.labels[k] == label)
            .count()
    }

    pub fn singular_count(&self) -> usize {
        self.grid
            .domain_nodes()
            .into_iter()
            .filter(|&k| self.singular[k])
            .count()
    }

    /// Labels as a field: 1 convex, −1 concave, 0 otherwise.
    pub fn label_field(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.labels.iter().map(|l| l.code()).collect()).expect("same length")
    }
}

/// Default singular-set threshold: `1e-3 · median |det ∇²u|`.
pub fn default_eps(dets: &[f64]) -> f64 {
    if dets.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = dets.iter().map(|d| d.abs()).collect();
    a.sort_by(|x, y| x.total_cmp(y));
    let n = a.len();
    let med = if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    };
    1e-3 * med
}

/// Labels nodes by the sign of the Hessian trace where `det ∇²u > eps`.
pub fn classify_convexity(u: &ScalarField, eps: Option<f64>) -> Result<ConvexityReport> {
    let grid = u.grid().clone();
    let hess = hessian(u)?;
    let nodes = grid.domain_nodes();
    let dets: Vec<f64> = nodes.iter().map(|&k| hess.at(k).det()).collect();
    let eps = eps.unwrap_or_else(|| default_eps(&dets));
    let mut labels = vec![Label::Indeterminate; grid.len()];
    let mut singular = vec![false; grid.len()];
    let (mut convex, mut concave) = (false, false);
    for (&k, &d) in nodes.iter().zip(&dets) {
        if d <= eps {
            singular[k] = true;
            continue;
        }
        let t = hess.at(k).trace();
        if t > 0.0 {
            labels[k] = Label::Convex;
            convex = true;
        } else if t < 0.0 {
            labels[k] = Label::Concave;
            concave = true;
        }
    }
    let verdict = match (convex, concave) {
        (true, true) => Verdict::Mixed,
        (true, false) => Verdict::Convex,
        (false, true) => Verdict::Concave,
        (false, false) => Verdict::Degenerate,
    };
    Ok(ConvexityReport {
        grid,
        labels,
        singular,
        eps,
        verdict,
    })
}

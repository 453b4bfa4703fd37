//! Gauss-Legendre rules on `(−½, ½)` and differentiation on their nodes.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `(−½, ½)`,
/// from the eigen-decomposition of the Jacobi matrix. Weights sum to 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrise to remove eigen-solver asymmetry
    let t: Vec<f64> = (0..n).map(|i| 0.25 * (pairs[i].0 - pairs[n - 1 - i].0)).collect();
    let w: Vec<f64> = (0..n).map(|i| 0.5 * (pairs[i].1 + pairs[n - 1 - i].1)).collect();
    (t, w)
}

/// `D[i][j] = ℓ_j'(t_i)` for the Lagrange basis on the nodes `t`.
pub fn derivative_matrix(t: &[f64]) -> Vec<Vec<f64>> {
    let n = t.len();
    let bary: Vec<f64> = (0..n)
        .map(|j| 1.0 / (0..n).filter(|&m| m != j).map(|m| t[j] - t[m]).product::<f64>())
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = bary[j] / bary[i] / (t[i] - t[j]);
            }
        }
        d[i][i] = -(0..n).filter(|&j| j != i).map(|j| d[i][j]).sum::<f64>();
    }
    d
}

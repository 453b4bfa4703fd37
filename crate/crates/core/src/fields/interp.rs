//! Point sampling of nodal fields.

use super::field::ScalarField;

fn lagrange4(t: f64) -> [f64; 4] {
    // nodes at 0, 1, 2, 3
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

/// Samples `f` at `p` by tensor cubic Lagrange interpolation (exact on bicubic
/// polynomials). Falls back to bilinear when the 4x4 block leaves the domain.
/// Returns `None` if `p` is not covered by an in-domain cell.
pub fn sample(f: &ScalarField, p: [f64; 2]) -> Option<f64> {
    let g = f.grid();
    let [x0, _, y0, _] = g.bbox();
    let sx = (p[0] - x0) / g.hx();
    let sy = (p[1] - y0) / g.hy();
    let (nx, ny) = (g.nx(), g.ny());
    let tol = 1e-9;
    if sx < -tol || sy < -tol || sx > (nx - 1) as f64 + tol || sy > (ny - 1) as f64 + tol {
        return None;
    }
    let sx = sx.clamp(0.0, (nx - 1) as f64);
    let sy = sy.clamp(0.0, (ny - 1) as f64);
    let ci = (sx.floor() as usize).min(nx - 2);
    let cj = (sy.floor() as usize).min(ny - 2);

    let i0 = ci.saturating_sub(1).min(nx.saturating_sub(4));
    let j0 = cj.saturating_sub(1).min(ny.saturating_sub(4));
    if nx >= 4 && ny >= 4 {
        let block_in = (0..4).all(|b| (0..4).all(|a| g.in_domain(g.idx(i0 + a, j0 + b))));
        if block_in {
            let wx = lagrange4(sx - i0 as f64);
            let wy = lagrange4(sy - j0 as f64);
            let mut s = 0.0;
            for b in 0..4 {
                for a in 0..4 {
                    s += wx[a] * wy[b] * f.get(i0 + a, j0 + b);
                }
            }
            return Some(s);
        }
    }
    let corners = [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)];
    if !corners.iter().all(|&(i, j)| g.in_domain(g.idx(i, j))) {
        // a node exactly on an in-domain grid point is still fine
        let k = g.nearest(p);
        let q = g.point(k);
        let close = (q[0] - p[0]).abs() <= tol * g.hx() && (q[1] - p[1]).abs() <= tol * g.hy();
        return (close && g.in_domain(k)).then(|| f.at(k));
    }
    let (tx, ty) = (sx - ci as f64, sy - cj as f64);
    Some(
        (1.0 - tx) * (1.0 - ty) * f.get(ci, cj)
            + tx * (1.0 - ty) * f.get(ci + 1, cj)
            + (1.0 - tx) * ty * f.get(ci, cj + 1)
            + tx * ty * f.get(ci + 1, cj + 1),
    )
}

//! Discrete convex envelope: the lower convex hull of the lifted node set
//! `(i, j, u_k)`, built by an incremental quickhull on exact orientation
//! predicates.

use std::collections::{HashMap, VecDeque};

use robust::{orient2d, orient3d, Coord, Coord3D};

use crate::error::{Error, Result};
use crate::fields::ScalarField;

type P3 = Coord3D<f64>;

fn o3(a: P3, b: P3, c: P3, d: P3) -> f64 {
    orient3d(a, b, c, d)
}

#[derive(Debug)]
struct Face {
    v: [usize; 3],
    outside: Vec<usize>,
    alive: bool,
}

struct Hull<'a> {
    pts: &'a [P3],
    faces: Vec<Face>,
    /// Directed edge `(a, b)` to the face containing it.
    edges: HashMap<(usize, usize), usize>,
}

impl<'a> Hull<'a> {
    /// Signed visibility: negative means `p` sees the face from outside.
    fn side(&self, f: usize, p: usize) -> f64 {
        let [a, b, c] = self.faces[f].v;
        o3(self.pts[a], self.pts[b], self.pts[c], self.pts[p])
    }

    fn add_face(&mut self, v: [usize; 3]) -> usize {
        let id = self.faces.len();
        for e in 0..3 {
            self.edges.insert((v[e], v[(e + 1) % 3]), id);
        }
        self.faces.push(Face {
            v,
            outside: Vec::new(),
            alive: true,
        });
        id
    }

    fn kill(&mut self, f: usize) {
        let v = self.faces[f].v;
        for e in 0..3 {
            let key = (v[e], v[(e + 1) % 3]);
            if self.edges.get(&key) == Some(&f) {
                self.edges.remove(&key);
            }
        }
        self.faces[f].alive = false;
    }

    fn assign(&mut self, candidates: &[usize], points: impl IntoIterator<Item = usize>) {
        for p in points {
            if let Some(&f) = candidates.iter().find(|&&f| self.side(f, p) < 0.0) {
                self.faces[f].outside.push(p);
            }
        }
    }

    fn build(pts: &'a [P3], seed: [usize; 4]) -> Self {
        let mut h = Hull {
            pts,
            faces: Vec::new(),
            edges: HashMap::new(),
        };
        let [a, b, c, d] = seed;
        for (tri, opp) in [([a, b, c], d), ([a, b, d], c), ([a, c, d], b), ([b, c, d], a)] {
            // orient so the opposite vertex is on the inner side
            let oriented = if o3(pts[tri[0]], pts[tri[1]], pts[tri[2]], pts[opp]) > 0.0 {
                tri
            } else {
                [tri[0], tri[2], tri[1]]
            };
            h.add_face(oriented);
        }
        let initial: Vec<usize> = (0..4).collect();
        h.assign(&initial, (0..pts.len()).filter(|p| !seed.contains(p)));

        let mut queue: VecDeque<usize> = (0..4).collect();
        while let Some(f) = queue.pop_front() {
            if !h.faces[f].alive || h.faces[f].outside.is_empty() {
                continue;
            }
            let outside = std::mem::take(&mut h.faces[f].outside);
            let eye = *outside
                .iter()
                .min_by(|&&p, &&q| h.side(f, p).total_cmp(&h.side(f, q)))
                .expect("non-empty");
            h.faces[f].outside = outside;

            // visible region by flood fill across edges
            let mut visible = vec![f];
            let mut seen = std::collections::HashSet::from([f]);
            let mut stack = vec![f];
            while let Some(g) = stack.pop() {
                let v = h.faces[g].v;
                for e in 0..3 {
                    if let Some(&n) = h.edges.get(&(v[(e + 1) % 3], v[e])) {
                        if seen.insert(n) && h.side(n, eye) < 0.0 {
                            visible.push(n);
                            stack.push(n);
                        }
                    }
                }
            }
            let vis: std::collections::HashSet<usize> = visible.iter().copied().collect();
            let mut horizon = Vec::new();
            for &g in &visible {
                let v = h.faces[g].v;
                for e in 0..3 {
                    let (p, q) = (v[e], v[(e + 1) % 3]);
                    match h.edges.get(&(q, p)) {
                        Some(n) if vis.contains(n) => {}
                        _ => horizon.push((p, q)),
                    }
                }
            }
            let mut orphans = Vec::new();
            for &g in &visible {
                orphans.extend(std::mem::take(&mut h.faces[g].outside));
                h.kill(g);
            }
            let new: Vec<usize> = horizon.iter().map(|&(p, q)| h.add_face([p, q, eye])).collect();
            h.assign(&new, orphans.into_iter().filter(|&p| p != eye));
            queue.extend(new);
        }
        h
    }
}

fn seed(pts: &[P3]) -> Option<[usize; 4]> {
    let n = pts.len();
    if n < 4 {
        return None;
    }
    let a = 0;
    let d2 = |p: P3, q: P3| (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
    let b = (0..n).max_by(|&p, &q| d2(pts[a], pts[p]).total_cmp(&d2(pts[a], pts[q])))?;
    let cross = |p: usize| {
        let (u, v) = (
            [pts[b].x - pts[a].x, pts[b].y - pts[a].y, pts[b].z - pts[a].z],
            [pts[p].x - pts[a].x, pts[p].y - pts[a].y, pts[p].z - pts[a].z],
        );
        (u[1] * v[2] - u[2] * v[1]).powi(2) + (u[2] * v[0] - u[0] * v[2]).powi(2) + (u[0] * v[1] - u[1] * v[0]).powi(2)
    };
    let c = (0..n).max_by(|&p, &q| cross(p).total_cmp(&cross(q)))?;
    if cross(c) == 0.0 {
        return None;
    }
    let d = (0..n).max_by(|&p, &q| {
        o3(pts[a], pts[b], pts[c], pts[p])
            .abs()
            .total_cmp(&o3(pts[a], pts[b], pts[c], pts[q]).abs())
    })?;
    if o3(pts[a], pts[b], pts[c], pts[d]) == 0.0 {
        return None;
    }
    Some([a, b, c, d])
}

/// Largest convex function below `u` at the domain nodes (the supremum of
/// affine minorants), evaluated at every domain node.
pub fn convexify(u: &ScalarField) -> Result<ScalarField> {
    let g = u.grid();
    let nodes = g.domain_nodes();
    if nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    if let Some(&k) = nodes.iter().find(|&&k| !u.at(k).is_finite()) {
        let (i, j) = g.ij(k);
        return Err(Error::InvalidArgument(format!("non-finite value at node ({i}, {j})")));
    }
    let pts: Vec<P3> = nodes
        .iter()
        .map(|&k| {
            let (i, j) = g.ij(k);
            Coord3D {
                x: i as f64,
                y: j as f64,
                z: u.at(k),
            }
        })
        .collect();
    let seed = match seed(&pts) {
        Some(s) => s,
        None => {
            let flat_2d = nodes.iter().all(|&k| {
                let (i0, j0) = g.ij(nodes[0]);
                let (i, j) = g.ij(k);
                let (i1, j1) = g.ij(*nodes.last().expect("non-empty"));
                (i as f64 - i0 as f64) * (j1 as f64 - j0 as f64) == (j as f64 - j0 as f64) * (i1 as f64 - i0 as f64)
            });
            if flat_2d && nodes.len() > 2 {
                return Err(Error::InvalidArgument("domain nodes are collinear".into()));
            }
            // every lifted point lies on one plane: u is affine on the nodes
            return Ok(u.clone());
        }
    };
    let hull = Hull::build(&pts, seed);

    let mut out: Vec<f64> = vec![f64::NAN; g.len()];
    let mut index = vec![usize::MAX; g.len()];
    for (p, &k) in nodes.iter().enumerate() {
        index[k] = p;
    }
    for face in hull.faces.iter().filter(|f| f.alive) {
        let [a, b, c] = face.v.map(|v| pts[v]);
        let (pa, pb, pc) = (
            Coord { x: a.x, y: a.y },
            Coord { x: b.x, y: b.y },
            Coord { x: c.x, y: c.y },
        );
        let area = orient2d(pa, pb, pc);
        if area >= 0.0 {
            continue; // upper or vertical face
        }
        let lo_i = a.x.min(b.x).min(c.x) as usize;
        let hi_i = a.x.max(b.x).max(c.x) as usize;
        let lo_j = a.y.min(b.y).min(c.y) as usize;
        let hi_j = a.y.max(b.y).max(c.y) as usize;
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                let k = g.idx(i, j);
                if index[k] == usize::MAX {
                    continue;
                }
                let q = Coord {
                    x: i as f64,
                    y: j as f64,
                };
                // barycentric weights; all ≤ 0 orientations mean inside a clockwise triangle
                let wa = orient2d(pb, pc, q);
                let wb = orient2d(pc, pa, q);
                let wc = orient2d(pa, pb, q);
                if wa > 0.0 || wb > 0.0 || wc > 0.0 {
                    continue;
                }
                let val = (wa * a.z + wb * b.z + wc * c.z) / area;
                let cur = out[k];
                out[k] = if cur.is_nan() { val } else { cur.max(val) };
            }
        }
    }
    for &k in &nodes {
        // hull vertices and rounding: never exceed u
        out[k] = if out[k].is_nan() { u.at(k) } else { out[k].min(u.at(k)) };
    }
    for v in out.iter_mut() {
        if v.is_nan() {
            *v = 0.0;
        }
    }
    ScalarField::new(g.clone(), out)
}

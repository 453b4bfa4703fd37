//! Plain-text `FIELD2D` format.
//!
//! ```text
//! FIELD2D nx ny x0 x1 y0 y1 components
//! x y mask v1 .. vc        (one row per node, k = j*nx + i)
//! ```
//! Mask codes: 0 outside, 1 interior, 2 boundary.

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::field::ScalarField;
use super::grid::{Grid, NodeKind};
use crate::error::{Error, Result};

/// A grid together with one or more nodal components.
#[derive(Debug, Clone)]
pub struct FieldFile {
    pub grid: Arc<Grid>,
    pub components: Vec<Vec<f64>>,
}

impl FieldFile {
    pub fn scalar(f: &ScalarField) -> Self {
        FieldFile {
            grid: f.grid().clone(),
            components: vec![f.values().to_vec()],
        }
    }

    pub fn from_fields(fields: &[&ScalarField]) -> Result<Self> {
        let grid = fields
            .first()
            .ok_or_else(|| Error::InvalidArgument("no components".into()))?
            .grid()
            .clone();
        for f in fields {
            super::field::same_grid(&grid, f.grid())?;
        }
        Ok(FieldFile {
            grid,
            components: fields.iter().map(|f| f.values().to_vec()).collect(),
        })
    }

    pub fn component(&self, c: usize) -> Result<ScalarField> {
        let vals = self
            .components
            .get(c)
            .ok_or_else(|| Error::InvalidArgument(format!("component {c} not present")))?;
        ScalarField::new(self.grid.clone(), vals.clone())
    }
}

pub fn write_field<W: Write>(out: &mut W, file: &FieldFile) -> Result<()> {
    let g = &file.grid;
    let [x0, x1, y0, y1] = g.bbox();
    writeln!(
        out,
        "FIELD2D {} {} {:e} {:e} {:e} {:e} {}",
        g.nx(),
        g.ny(),
        x0,
        x1,
        y0,
        y1,
        file.components.len()
    )?;
    for k in 0..g.len() {
        let p = g.point(k);
        write!(out, "{:e} {:e} {}", p[0], p[1], g.kind(k).code())?;
        for c in &file.components {
            write!(out, " {:e}", c[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad or missing {what}")))
}

/// Reads a `FIELD2D` block. Lines after the last node row are left unread.
pub fn read_field<R: BufRead>(input: &mut R) -> Result<FieldFile> {
    let mut lines = input.lines();
    let mut lineno = 0usize;
    let header = loop {
        lineno += 1;
        let l = lines
            .next()
            .ok_or_else(|| Error::Parse("missing FIELD2D header".into()))??;
        if !l.trim().is_empty() {
            break l;
        }
    };
    let mut t = header.split_whitespace();
    if t.next() != Some("FIELD2D") {
        return Err(Error::Parse(format!("line {lineno}: expected FIELD2D header")));
    }
    let nx: usize = parse_num(t.next(), "nx", lineno)?;
    let ny: usize = parse_num(t.next(), "ny", lineno)?;
    let mut bbox = [0.0; 4];
    for (b, name) in bbox.iter_mut().zip(["x0", "x1", "y0", "y1"]) {
        *b = parse_num(t.next(), name, lineno)?;
    }
    let nc: usize = parse_num(t.next(), "components", lineno)?;
    let n = nx
        .checked_mul(ny)
        .ok_or_else(|| Error::Parse("grid size overflows".into()))?;
    let mut codes = Vec::with_capacity(n);
    let mut comps = vec![Vec::with_capacity(n); nc];
    for _ in 0..n {
        lineno += 1;
        let l = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("line {lineno}: expected {n} node rows")))??;
        let mut t = l.split_whitespace();
        let _x: f64 = parse_num(t.next(), "x", lineno)?;
        let _y: f64 = parse_num(t.next(), "y", lineno)?;
        let m: u8 = parse_num(t.next(), "mask", lineno)?;
        if m > 2 {
            return Err(Error::Parse(format!("line {lineno}: mask code {m}")));
        }
        codes.push(m);
        for c in comps.iter_mut() {
            c.push(parse_num(t.next(), "value", lineno)?);
        }
    }
    let inside: Vec<bool> = codes.iter().map(|&c| c != 0).collect();
    let grid = Grid::from_mask(nx, ny, bbox, &inside)?;
    for (k, &c) in codes.iter().enumerate() {
        if grid.kind(k).code() != c {
            let (i, j) = grid.ij(k);
            let want = match grid.kind(k) {
                NodeKind::Interior => "interior",
                NodeKind::Boundary => "boundary",
                NodeKind::Outside => "outside",
            };
            return Err(Error::Parse(format!(
                "node ({i}, {j}): mask code {c} but node is {want}"
            )));
        }
    }
    Ok(FieldFile {
        grid,
        components: comps,
    })
}

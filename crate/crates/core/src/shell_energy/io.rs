//! Plain-text `DEF3D` format for deformations of the shell.
//!
//! ```text
//! DEF3D nx ny nq x0 x1 y0 y1
//! T t_0 .. t_{nq-1}
//! x y mask q v1 v2 v3      (q-major, then k = j*nx + i)
//! ```

use std::io::{BufRead, Write};

use super::Deformation3;
use crate::error::{Error, Result};
use crate::fields::Grid;

pub fn write_deformation<W: Write>(out: &mut W, d: &Deformation3) -> Result<()> {
    let g = d.grid();
    let [x0, x1, y0, y1] = g.bbox();
    writeln!(
        out,
        "DEF3D {} {} {} {:e} {:e} {:e} {:e}",
        g.nx(),
        g.ny(),
        d.nq(),
        x0,
        x1,
        y0,
        y1
    )?;
    write!(out, "T")?;
    for t in d.thickness_points() {
        write!(out, " {t:e}")?;
    }
    writeln!(out)?;
    for q in 0..d.nq() {
        for k in 0..g.len() {
            let p = g.point(k);
            let v = d.at(k, q);
            writeln!(
                out,
                "{:e} {:e} {} {} {:e} {:e} {:e}",
                p[0],
                p[1],
                g.kind(k).code(),
                q,
                v[0],
                v[1],
                v[2]
            )?;
        }
    }
    Ok(())
}

fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad or missing {what}")))
}

pub fn read_deformation<R: BufRead>(input: &mut R) -> Result<Deformation3> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = |what: &str| -> Result<(usize, String)> {
        let (i, l) = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")))?;
        Ok((i, l?))
    };
    let (ln, header) = next("DEF3D header")?;
    let mut t = header.split_whitespace();
    if t.next() != Some("DEF3D") {
        return Err(Error::Parse(format!("line {ln}: expected DEF3D header")));
    }
    let nx: usize = num(t.next(), "nx", ln)?;
    let ny: usize = num(t.next(), "ny", ln)?;
    let nq: usize = num(t.next(), "nq", ln)?;
    let mut bbox = [0.0; 4];
    for (b, name) in bbox.iter_mut().zip(["x0", "x1", "y0", "y1"]) {
        *b = num(t.next(), name, ln)?;
    }
    let (ln, tline) = next("T line")?;
    let mut t = tline.split_whitespace();
    if t.next() != Some("T") {
        return Err(Error::Parse(format!("line {ln}: expected thickness line")));
    }
    let ts = (0..nq)
        .map(|_| num(t.next(), "thickness sample", ln))
        .collect::<Result<Vec<f64>>>()?;
    let n = nx
        .checked_mul(ny)
        .ok_or_else(|| Error::Parse("grid size overflows".into()))?;
    let mut codes = vec![0u8; n];
    let mut values = vec![[0.0; 3]; n * nq];
    for s in 0..n * nq {
        let (ln, l) = next("node row")?;
        let mut t = l.split_whitespace();
        let _x: f64 = num(t.next(), "x", ln)?;
        let _y: f64 = num(t.next(), "y", ln)?;
        let m: u8 = num(t.next(), "mask", ln)?;
        let q: usize = num(t.next(), "q", ln)?;
        if q != s / n {
            return Err(Error::Parse(format!("line {ln}: expected layer {}, got {q}", s / n)));
        }
        if m > 2 || (q > 0 && m != codes[s % n]) {
            return Err(Error::Parse(format!("line {ln}: inconsistent mask code {m}")));
        }
        codes[s % n] = m;
        for slot in values[s].iter_mut() {
            *slot = num(t.next(), "component", ln)?;
        }
    }
    let inside: Vec<bool> = codes.iter().map(|&c| c != 0).collect();
    let grid = Grid::from_mask(nx, ny, bbox, &inside)?;
    if (0..n).any(|k| grid.kind(k).code() != codes[k]) {
        return Err(Error::Parse("mask codes disagree with the reconstructed grid".into()));
    }
    Deformation3::new(grid, ts, values)
}

//! CSV reports and atomic output files.

use std::io::Write;
use std::path::Path;

use ssl_core::convexity::ConvexityReport;
use ssl_core::matching::MatchResult;
use ssl_core::recovery::ScanReport;

use crate::failure::Failure;

pub const SCAN_HEADER: [&str; 6] = ["h", "ratio_I", "ratio_J", "target", "kh_err", "v_h_l2_gap"];
pub const MATCH_HEADER: [&str; 7] = [
    "h",
    "newton_iterations",
    "curvature_residual",
    "isometry_residual",
    "isometry_over_h2",
    "z_c0_over_h",
    "w_w22",
];
pub const CONVEXITY_HEADER: [&str; 6] = ["i", "j", "x", "y", "label", "singular"];

/// Shortest representation that parses back to the same bits.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    #[cfg(test)]
    pub fn parse(bytes: &[u8]) -> Result<Table, csv::Error> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    /// Cell `(row, col)` as a number.
    #[cfg(test)]
    pub fn value(&self, row: usize, col: &str) -> Option<f64> {
        let c = self.header.iter().position(|h| h == col)?;
        self.rows.get(row)?.get(c)?.parse().ok()
    }
}

pub fn scan_table(report: &ScanReport) -> Table {
    let mut t = Table::new(&SCAN_HEADER);
    for r in &report.rows {
        t.rows.push(
            [r.h, r.ratio_i, r.ratio_j, r.target, r.kh_err, r.v_h_l2_gap]
                .into_iter()
                .map(num)
                .collect(),
        );
    }
    t
}

pub fn match_table(runs: &[MatchResult]) -> Result<Table, Failure> {
    let mut t = Table::new(&MATCH_HEADER);
    for r in runs {
        t.rows.push(vec![
            num(r.h),
            r.newton_iterations.to_string(),
            num(r.curvature_residual),
            num(r.isometry_residual),
            num(r.isometry_residual / (r.h * r.h)),
            num(r.z_h.max_abs() / r.h),
            num(r.w_norm_w22()?),
        ]);
    }
    Ok(t)
}

/// One row per domain node.
pub fn convexity_table(report: &ConvexityReport) -> Table {
    let g = report.grid();
    let mut t = Table::new(&CONVEXITY_HEADER);
    for k in g.domain_nodes() {
        let (i, j) = g.ij(k);
        let [x, y] = g.point(k);
        t.rows.push(vec![
            i.to_string(),
            j.to_string(),
            num(x),
            num(y),
            (report.labels[k].code() as i32).to_string(),
            (report.singular[k] as u8).to_string(),
        ]);
    }
    t
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Failure::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Failure::io(path, e))?;
    tmp.persist(path).map_err(|e| Failure::io(path, e.error))?;
    Ok(())
}

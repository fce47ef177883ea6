//! Plain-text output: C-style `%.17g` number formatting and small CSV tables.
//!
//! A table is written as optional `# ` comment lines, one header line, then
//! one line per row, fields separated by `,` and lines ended by `\n`. Floats
//! use [`format_g17`], so every finite `f64` round-trips exactly.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use num_complex::Complex64;

use crate::clock::{FieldState, Trajectory};

/// Formats like C's `printf("%.17g", v)`.
///
/// Scientific notation is used when the decimal exponent is below -4 or at
/// least 17; trailing zeros and a dangling decimal point are removed; the
/// exponent has a sign and at least two digits. Non-finite values print as
/// `nan`, `inf` and `-inf`.
pub fn format_g17(v: f64) -> String {
    const P: i32 = 17;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent marker");
    let x: i32 = exponent.parse().expect("integer exponent");
    if !(-4..P).contains(&x) {
        let m = strip_zeros(mantissa);
        let sign = if x < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", x.abs())
    } else {
        let fixed = format!("{:.*}", (P - 1 - x) as usize, v);
        strip_zeros(&fixed).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Float(v) => out.push_str(&format_g17(*v)),
            Cell::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    out.push('"');
                    out.push_str(&s.replace('"', "\"\""));
                    out.push('"');
                } else {
                    out.push_str(s);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { comments: Vec::new(), header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    /// Appends a row; panics if its width differs from the header's.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Builds a float table from equally long columns.
    pub fn from_columns<S: Into<String>>(header: impl IntoIterator<Item = S>, columns: &[&[f64]]) -> Self {
        let mut table = Self::new(header);
        let len = columns.first().map_or(0, |c| c.len());
        assert!(columns.iter().all(|c| c.len() == len), "columns must have equal length");
        for i in 0..len {
            table.push(columns.iter().map(|c| Cell::Float(c[i])).collect());
        }
        table
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Long-format snapshot table: `t,index,x_0[,x_1…],re,im`, one row per
/// snapshot and lattice point.
pub fn trajectory_table(traj: &Trajectory) -> CsvTable {
    let dims = traj.grid.as_ref().map_or(0, |g| g.dims());
    let mut header = vec!["t".to_string(), "index".to_string()];
    header.extend((0..dims).map(|a| format!("x_{a}")));
    header.extend(["re".to_string(), "im".to_string()]);
    let mut table = CsvTable::new(header).comment(format!("generator: {}", traj.generator));
    let mut x = vec![0.0; dims];
    for (t, state) in traj.times.iter().zip(&traj.states) {
        for (i, v) in state.iter().enumerate() {
            let mut row = vec![Cell::Float(*t), Cell::from(i)];
            if let Some(g) = &traj.grid {
                g.point(i, &mut x);
                row.extend(x.iter().map(|c| Cell::Float(*c)));
            }
            row.extend([Cell::Float(v.re), Cell::Float(v.im)]);
            table.push(row);
        }
    }
    table
}

/// `t,index,x_0[,…],q,qdot` for a field trajectory.
pub fn field_table(traj: &Trajectory<FieldState>) -> CsvTable {
    let dims = traj.states.first().map_or(1, |s| s.grid.dims());
    let mut header = vec!["t".to_string(), "index".to_string()];
    header.extend((0..dims).map(|a| format!("x_{a}")));
    header.extend(["q".to_string(), "qdot".to_string()]);
    let mut table = CsvTable::new(header).comment(format!("generator: {}", traj.generator));
    let mut x = vec![0.0; dims];
    for (t, state) in traj.times.iter().zip(&traj.states) {
        for i in 0..state.q.len() {
            state.grid.point(i, &mut x);
            let mut row = vec![Cell::Float(*t), Cell::from(i)];
            row.extend(x.iter().map(|c| Cell::Float(*c)));
            row.extend([Cell::Float(state.q[i]), Cell::Float(state.qdot[i])]);
            table.push(row);
        }
    }
    table
}

/// `index,re,im` for a single complex vector.
pub fn vector_table(v: &[Complex64]) -> CsvTable {
    let mut table = CsvTable::new(["index", "re", "im"]);
    for (i, z) in v.iter().enumerate() {
        table.push(vec![Cell::from(i), Cell::Float(z.re), Cell::Float(z.im)]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (100.0, "100"),
            (1e-5, "1.0000000000000001e-05"),
            (1e-4, "0.0001"),
            (1.5e17, "1.5e+17"),
            (1e16, "10000000000000000"),
            (123456789.0, "123456789"),
            (1.0 / 3.0, "0.33333333333333331"),
            (6.02214076e23, "6.0221407599999999e+23"),
            (5e-324, "4.9406564584124654e-324"),
            (f64::MAX, "1.7976931348623157e+308"),
            (0.0, "0"),
            (-0.0, "-0"),
        ];
        for (v, expected) in cases {
            assert_eq!(format_g17(v), expected, "{v:e}");
        }
        assert_eq!(format_g17(f64::NAN), "nan");
        assert_eq!(format_g17(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn g17_round_trips() {
        #[allow(clippy::excessive_precision)]
        for v in [0.1, 2.0f64.sqrt(), -7.25e-300, 9.999999999999999e22, 1e-320] {
            let s = format_g17(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn table_layout() {
        let mut t = CsvTable::new(["a", "label"]).comment("figure: test");
        t.push(vec![Cell::Float(0.5), Cell::from("x,y")]);
        assert_eq!(t.render(), "# figure: test\na,label\n0.5,\"x,y\"\n");
        let cols = CsvTable::from_columns(["t", "v"], &[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(cols.render(), "t,v\n1,3\n2,4\n");
    }
}

//! Fixed-format MPS export and a reader for the same dialect.
//!
//! Names are limited to eight characters, so columns and rows are written as
//! `C0000000`, `R0000000`, ... in model order; [`NameTable`] maps those short
//! names back to descriptive ones. Numbers are printed in at most twelve
//! characters (shortest round-trip form when it fits).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::problem::{LpProblem, MilpProblem, Sense};

pub const OBJECTIVE_ROW: &str = "OBJ";

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn column_name(j: usize) -> String {
    format!("C{j:07}")
}

pub fn row_name(i: usize) -> String {
    format!("R{i:07}")
}

/// Short MPS names paired with descriptive ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameTable {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<(String, String)>,
}

impl NameTable {
    pub fn new(column_names: &[String], row_names: &[String]) -> Self {
        NameTable {
            columns: column_names.iter().enumerate().map(|(j, n)| (column_name(j), n.clone())).collect(),
            rows: row_names.iter().enumerate().map(|(i, n)| (row_name(i), n.clone())).collect(),
        }
    }

    /// One `short long` pair per line, columns first.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (short, long) in self.columns.iter().chain(&self.rows) {
            writeln!(out, "{short} {long}")?;
        }
        Ok(())
    }

    /// Maps both short and long column names to column indices.
    pub fn column_lookup(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for (j, (short, long)) in self.columns.iter().enumerate() {
            map.insert(short.as_str(), j);
            map.insert(long.as_str(), j);
        }
        map
    }
}

/// Formats `v` into at most 12 characters.
pub fn format_number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let exp = format!("{v:e}");
    if exp.len() <= 12 {
        return exp;
    }
    (0..12)
        .rev()
        .map(|p| format!("{v:.p$e}"))
        .find(|s| s.len() <= 12)
        .unwrap_or_else(|| format!("{v:.0e}"))
}

fn entry(out: &mut String, name: &str, row: &str, value: f64) {
    let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", name, row, format_number(value));
}

fn bound(out: &mut String, kind: &str, col: &str, value: Option<f64>) {
    match value {
        Some(v) => {
            let _ = writeln!(out, " {:<2} {:<8}  {:<8}  {:>12}", kind, "BND", col, format_number(v));
        }
        None => {
            let _ = writeln!(out, " {:<2} {:<8}  {}", kind, "BND", col);
        }
    }
}

/// Renders `problem` as fixed-format MPS text.
pub fn to_mps_string(problem: &MilpProblem, name: &str) -> String {
    let lp = &problem.lp;
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJECTIVE_ROW}");
    for (i, row) in lp.rows.iter().enumerate() {
        let kind = match row.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {kind:<2} {}", row_name(i));
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_cols()];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            by_col[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for j in 0..lp.num_cols() {
        let int = problem.integer.get(j).copied().unwrap_or(false);
        if int != in_int {
            let tag = if int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    M{marker:07}  'MARKER'                 {tag}");
            marker += 1;
            in_int = int;
        }
        let col = column_name(j);
        if lp.objective[j] != 0.0 || by_col[j].is_empty() {
            entry(&mut out, &col, OBJECTIVE_ROW, lp.objective[j]);
        }
        for &(i, a) in &by_col[j] {
            entry(&mut out, &col, &row_name(i), a);
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{marker:07}  'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    for (i, row) in lp.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            entry(&mut out, "RHS", &row_name(i), row.rhs);
        }
    }
    out.push_str("RANGES\n");
    out.push_str("BOUNDS\n");
    for j in 0..lp.num_cols() {
        let col = column_name(j);
        let (lo, hi) = (lp.col_lower[j], lp.col_upper[j]);
        if lo == hi {
            bound(&mut out, "FX", &col, Some(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            bound(&mut out, "FR", &col, None);
        } else {
            if lo == f64::NEG_INFINITY {
                bound(&mut out, "MI", &col, None);
            } else if lo != 0.0 {
                bound(&mut out, "LO", &col, Some(lo));
            }
            if hi.is_finite() {
                bound(&mut out, "UP", &col, Some(hi));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps<W: Write>(problem: &MilpProblem, name: &str, mut out: W) -> io::Result<()> {
    out.write_all(to_mps_string(problem, name).as_bytes())
}

/// Result of reading an MPS file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMps {
    pub name: String,
    pub problem: MilpProblem,
    pub column_names: Vec<String>,
    pub row_names: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Reads MPS text (fixed or whitespace-separated free format without spaces in names).
pub fn read_mps<R: BufRead>(input: R) -> Result<ParsedMps, MpsError> {
    let mut name = String::new();
    let mut section = Section::None;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_names = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut column_names: Vec<String> = Vec::new();
    let mut lp = LpProblem::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut integer = Vec::new();
    let mut in_int = false;
    let mut ranges: Vec<Option<f64>> = Vec::new();
    let mut explicit_upper: Vec<bool> = Vec::new();

    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let err = |message: String| MpsError::Parse { line: lineno, message };
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if !line.starts_with(' ') {
            section = match tokens[0] {
                "NAME" => {
                    name = tokens.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => return Err(err(format!("unknown section {other}"))),
            };
            continue;
        }
        let number = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        match section {
            Section::None => return Err(err("data outside a section".into())),
            Section::Rows => {
                let [kind, rname] = tokens[..] else { return Err(err("expected `type name`".into())) };
                let sense = match kind {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(rname.to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(format!("unknown row type {other}"))),
                };
                row_index.insert(rname.to_string(), row_names.len());
                row_names.push(rname.to_string());
                lp.rows.push(crate::problem::Row { coeffs: Vec::new(), sense, rhs: 0.0 });
                entries.push(Vec::new());
                ranges.push(None);
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        other => return Err(err(format!("unknown marker {other}"))),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err("expected `column row value [row value]`".into()));
                }
                let col = tokens[0];
                let j = match col_index.get(col) {
                    Some(&j) => j,
                    None => {
                        let j = lp.add_column(0.0, 0.0, f64::INFINITY);
                        col_index.insert(col.to_string(), j);
                        column_names.push(col.to_string());
                        integer.push(in_int);
                        explicit_upper.push(false);
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = number(pair[1])?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        lp.objective[j] += v;
                    } else {
                        let &i = row_index.get(pair[0]).ok_or_else(|| err(format!("unknown row {}", pair[0])))?;
                        entries[i].push((j, v));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let pairs = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                for pair in pairs.chunks(2) {
                    let [rname, val] = pair else { return Err(err("dangling rhs entry".into())) };
                    let v = number(val)?;
                    if Some(*rname) == objective_row.as_deref() {
                        continue;
                    }
                    let &i = row_index.get(*rname).ok_or_else(|| err(format!("unknown row {rname}")))?;
                    if section == Section::Rhs {
                        lp.rows[i].rhs = v;
                    } else {
                        ranges[i] = Some(v);
                    }
                }
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err("expected `type set column [value]`".into()));
                }
                let kind = tokens[0];
                let &j = col_index.get(tokens[2]).ok_or_else(|| err(format!("unknown column {}", tokens[2])))?;
                let value = tokens.get(3).map(|s| number(s)).transpose()?;
                let need = || value.ok_or_else(|| err(format!("{kind} bound needs a value")));
                match kind {
                    "LO" => lp.col_lower[j] = need()?,
                    "UP" => {
                        let v = need()?;
                        if v < 0.0 && lp.col_lower[j] == 0.0 {
                            lp.col_lower[j] = f64::NEG_INFINITY;
                        }
                        lp.col_upper[j] = v;
                        explicit_upper[j] = true;
                    }
                    "FX" => {
                        let v = need()?;
                        lp.col_lower[j] = v;
                        lp.col_upper[j] = v;
                    }
                    "FR" => {
                        lp.col_lower[j] = f64::NEG_INFINITY;
                        lp.col_upper[j] = f64::INFINITY;
                    }
                    "MI" => lp.col_lower[j] = f64::NEG_INFINITY,
                    "PL" => lp.col_upper[j] = f64::INFINITY,
                    "BV" => {
                        lp.col_lower[j] = 0.0;
                        lp.col_upper[j] = 1.0;
                        integer[j] = true;
                    }
                    "LI" => {
                        lp.col_lower[j] = need()?;
                        integer[j] = true;
                    }
                    "UI" => {
                        lp.col_upper[j] = need()?;
                        integer[j] = true;
                    }
                    other => return Err(err(format!("unknown bound type {other}"))),
                }
            }
        }
    }

    // Apply RANGES: turn the row into the interval it describes.
    let mut extra_rows = Vec::new();
    for (i, range) in ranges.iter().enumerate() {
        let Some(r) = *range else { continue };
        let row = &mut lp.rows[i];
        let (lo, hi) = match row.sense {
            Sense::Le => (row.rhs - r.abs(), row.rhs),
            Sense::Ge => (row.rhs, row.rhs + r.abs()),
            Sense::Eq if r >= 0.0 => (row.rhs, row.rhs + r),
            Sense::Eq => (row.rhs + r, row.rhs),
        };
        row.sense = Sense::Ge;
        row.rhs = lo;
        extra_rows.push((i, hi));
    }
    for (i, row) in lp.rows.iter_mut().enumerate() {
        let mut coeffs = std::mem::take(&mut entries[i]);
        coeffs.sort_by_key(|e| e.0);
        row.coeffs = coeffs;
    }
    for (i, hi) in extra_rows {
        let coeffs = lp.rows[i].coeffs.clone();
        lp.rows.push(crate::problem::Row { coeffs, sense: Sense::Le, rhs: hi });
        row_names.push(format!("{}_UB", row_names[i]));
    }
    let _ = explicit_upper;
    Ok(ParsedMps { name, problem: MilpProblem { lp, integer }, column_names, row_names })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting_fits_field() {
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(-0.5), "-0.5");
        assert_eq!(format_number(1e-7), "0.0000001");
        assert_eq!(format_number(1e-20), "1e-20");
        assert_eq!(format_number(1.0 / 3.0).len(), 12);
        assert!(format_number(-123456.789012345).len() <= 12);
        assert!(format_number(6.02214076e23).len() <= 12);
    }

    #[test]
    fn binaries_sit_between_markers() {
        let mut lp = LpProblem::new();
        let a = lp.add_column(1.0, 0.0, 10.0);
        let b = lp.add_column(2.0, 0.0, 1.0);
        lp.add_row([(a, 1.0), (b, 1.0)], Sense::Ge, 1.0);
        let mut p = MilpProblem::new(lp);
        p.integer[b] = true;
        let text = to_mps_string(&p, "T");
        let lines: Vec<&str> = text.lines().collect();
        let org = lines.iter().position(|l| l.contains("'INTORG'")).unwrap();
        let end = lines.iter().position(|l| l.contains("'INTEND'")).unwrap();
        let b_lines: Vec<usize> =
            lines.iter().enumerate().filter(|(_, l)| l.trim_start().starts_with("C0000001")).map(|(i, _)| i).collect();
        assert!(!b_lines.is_empty());
        assert!(b_lines.iter().all(|&i| org < i && i < end));
        let a_line = lines.iter().position(|l| l.trim_start().starts_with("C0000000")).unwrap();
        assert!(a_line < org);
    }

    #[test]
    fn ranges_are_read() {
        let text = "NAME          R\nROWS\n N  OBJ\n L  R0\nCOLUMNS\n    X  OBJ  1\n    X  R0  1\nRHS\n    RHS  R0  4\nRANGES\n    RNG  R0  3\nBOUNDS\nENDATA\n";
        let parsed = read_mps(text.as_bytes()).unwrap();
        let rows = &parsed.problem.lp.rows;
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].sense, rows[0].rhs), (Sense::Ge, 1.0));
        assert_eq!((rows[1].sense, rows[1].rhs), (Sense::Le, 4.0));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "NAME X\nROWS\n N  OBJ\n Q  R0\n";
        match read_mps(text.as_bytes()) {
            Err(MpsError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}

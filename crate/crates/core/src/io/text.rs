use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{check_schema, AnalyticCurve, AnalyticFile, McCurve, McFile, RadiusFile, Record, RecordsFile};
use crate::error::{Error, Result};

/// 17 significant digits: enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_num(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {field:?} is not a number")))
}

fn parse_count(field: &str, line: usize) -> Result<u64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {field:?} is not a count")))
}

fn header_line<T: Serialize>(meta: &T) -> Result<String> {
    Ok(format!("# {}\n", serde_json::to_string(meta)?))
}

/// Splits a CSV document into its metadata line, column header and rows.
struct Table<'a> {
    meta: &'a str,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn split_table<'a>(text: &'a str, columns: &[&str]) -> Result<Table<'a>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let meta = match lines.next() {
        Some((_, l)) if l.starts_with("# ") => &l[2..],
        _ => return Err(Error::Parse("missing '# {...}' metadata line".into())),
    };
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or_default();
    let expected = columns.join(",");
    if header != expected {
        return Err(Error::Parse(format!("expected columns {expected:?}, found {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, found {}",
                i + 1,
                columns.len(),
                fields.len()
            )));
        }
        rows.push((i + 1, fields));
    }
    Ok(Table { meta, rows })
}

fn parse_meta<T: DeserializeOwned>(meta: &str) -> Result<T> {
    serde_json::from_str(meta).map_err(|e| Error::Parse(format!("metadata line: {e}")))
}

pub const RADIAL_COLUMNS: [&str; 4] = ["s", "F", "rho", "O"];
pub const LINE_COLUMNS: [&str; 2] = ["lambda", "rho"];

/// `s,F,rho,O` for radial laws, `lambda,rho` for real-line laws. Line curves keep
/// their CDF in the metadata line.
pub fn write_analytic_csv(file: &AnalyticFile) -> Result<String> {
    let mut meta = file.clone();
    let mut out = String::new();
    match (&file.curve, &mut meta.curve) {
        (AnalyticCurve::Radial(c), AnalyticCurve::Radial(m)) => {
            m.grid.clear();
            m.cdf.clear();
            m.density.clear();
            m.overlap.clear();
            out += &header_line(&meta)?;
            out += &RADIAL_COLUMNS.join(",");
            out.push('\n');
            for k in 0..c.grid.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    num(c.grid[k]),
                    num(c.cdf[k]),
                    num(c.density[k]),
                    num(c.overlap[k])
                );
            }
        }
        (AnalyticCurve::Line(c), AnalyticCurve::Line(m)) => {
            m.grid.clear();
            m.density.clear();
            out += &header_line(&meta)?;
            out += &LINE_COLUMNS.join(",");
            out.push('\n');
            for k in 0..c.grid.len() {
                let _ = writeln!(out, "{},{}", num(c.grid[k]), num(c.density[k]));
            }
        }
        _ => unreachable!("metadata is a clone of the curve"),
    }
    Ok(out)
}

pub fn parse_analytic_csv(text: &str) -> Result<AnalyticFile> {
    let meta_text = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::Parse("missing '# {...}' metadata line".into()))?;
    let mut file: AnalyticFile = parse_meta(meta_text)?;
    check_schema(file.schema)?;
    match &mut file.curve {
        AnalyticCurve::Radial(c) => {
            let table = split_table(text, &RADIAL_COLUMNS)?;
            for (line, f) in table.rows {
                c.grid.push(parse_num(f[0], line)?);
                c.cdf.push(parse_num(f[1], line)?);
                c.density.push(parse_num(f[2], line)?);
                c.overlap.push(parse_num(f[3], line)?);
            }
        }
        AnalyticCurve::Line(c) => {
            let table = split_table(text, &LINE_COLUMNS)?;
            for (line, f) in table.rows {
                c.grid.push(parse_num(f[0], line)?);
                c.density.push(parse_num(f[1], line)?);
            }
            if c.cdf.len() != c.grid.len() {
                return Err(Error::Parse("CDF in the metadata does not match the rows".into()));
            }
        }
    }
    Ok(file)
}

pub const MC_RADIAL_COLUMNS: [&str; 6] = ["s_lo", "s_hi", "s", "count", "rho", "O"];
pub const MC_LINE_COLUMNS: [&str; 5] = ["lambda_lo", "lambda_hi", "lambda", "count", "rho"];

/// One row per bin; the `O` column is empty when overlaps were not measured.
pub fn write_mc_csv(file: &McFile) -> Result<String> {
    let mut meta = file.clone();
    let mut out = String::new();
    match (&file.curve, &mut meta.curve) {
        (McCurve::Radial(c), McCurve::Radial(m)) => {
            m.edges.clear();
            m.counts.clear();
            m.density.clear();
            m.empty.clear();
            if let Some(o) = m.overlap.as_mut() {
                o.clear();
            }
            out += &header_line(&meta)?;
            out += &MC_RADIAL_COLUMNS.join(",");
            out.push('\n');
            let centers = c.centers();
            for k in 0..c.counts.len() {
                let o = c.overlap.as_ref().map(|o| num(o[k])).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    num(c.edges[k]),
                    num(c.edges[k + 1]),
                    num(centers[k]),
                    c.counts[k],
                    num(c.density[k]),
                    o
                );
            }
        }
        (McCurve::Line(c), McCurve::Line(m)) => {
            m.edges.clear();
            m.counts.clear();
            m.density.clear();
            m.empty.clear();
            out += &header_line(&meta)?;
            out += &MC_LINE_COLUMNS.join(",");
            out.push('\n');
            let centers = c.centers();
            for k in 0..c.counts.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    num(c.edges[k]),
                    num(c.edges[k + 1]),
                    num(centers[k]),
                    c.counts[k],
                    num(c.density[k])
                );
            }
        }
        _ => unreachable!("metadata is a clone of the curve"),
    }
    Ok(out)
}

pub fn parse_mc_csv(text: &str) -> Result<McFile> {
    let meta_text = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::Parse("missing '# {...}' metadata line".into()))?;
    let mut file: McFile = parse_meta(meta_text)?;
    check_schema(file.schema)?;
    let columns: &[&str] = match file.curve {
        McCurve::Radial(_) => &MC_RADIAL_COLUMNS,
        McCurve::Line(_) => &MC_LINE_COLUMNS,
    };
    let table = split_table(text, columns)?;
    if table.rows.is_empty() {
        return Err(Error::Parse("no bins".into()));
    }
    let mut edges = Vec::with_capacity(table.rows.len() + 1);
    let mut counts = Vec::with_capacity(table.rows.len());
    let mut density = Vec::with_capacity(table.rows.len());
    let mut overlap = Vec::new();
    for (line, f) in &table.rows {
        let lo = parse_num(f[0], *line)?;
        if let Some(&prev) = edges.last() {
            if lo != prev {
                return Err(Error::Parse(format!("line {line}: bins are not contiguous")));
            }
        } else {
            edges.push(lo);
        }
        edges.push(parse_num(f[1], *line)?);
        counts.push(parse_count(f[3], *line)?);
        density.push(parse_num(f[4], *line)?);
        if f.len() == 6 && !f[5].trim().is_empty() {
            overlap.push(parse_num(f[5], *line)?);
        }
    }
    let empty = counts.iter().map(|&c| c == 0).collect();
    match &mut file.curve {
        McCurve::Radial(c) => {
            c.overlap = match (c.overlap.is_some(), overlap.len() == counts.len()) {
                (true, true) => Some(overlap),
                (false, _) if overlap.is_empty() => None,
                _ => return Err(Error::Parse("overlap column is incomplete".into())),
            };
            c.edges = edges;
            c.counts = counts;
            c.density = density;
            c.empty = empty;
        }
        McCurve::Line(c) => {
            c.edges = edges;
            c.counts = counts;
            c.density = density;
            c.empty = empty;
        }
    }
    Ok(file)
}

pub const RECORD_COLUMNS: [&str; 4] = ["sample", "re", "im", "O_ii"];

/// `sample,re,im,O_ii`, one row per eigenvalue; `O_ii` is empty for Hermitian ensembles.
pub fn write_records_csv(file: &RecordsFile) -> Result<String> {
    let mut out = header_line(file)?;
    out += &RECORD_COLUMNS.join(",");
    out.push('\n');
    for r in &file.records {
        let o = r.overlap.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.sample, num(r.re), num(r.im), o);
    }
    Ok(out)
}

pub fn parse_records_csv(text: &str) -> Result<RecordsFile> {
    let table = split_table(text, &RECORD_COLUMNS)?;
    let mut file: RecordsFile = parse_meta(table.meta)?;
    check_schema(file.schema)?;
    file.records = table
        .rows
        .iter()
        .map(|(line, f)| {
            Ok(Record {
                sample: parse_count(f[0], *line)?,
                re: parse_num(f[1], *line)?,
                im: parse_num(f[2], *line)?,
                overlap: if f[3].trim().is_empty() {
                    None
                } else {
                    Some(parse_num(f[3], *line)?)
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(file)
}

pub const RADIUS_COLUMNS: [&str; 2] = ["beta", "s_ext"];

pub fn write_radius_csv(file: &RadiusFile) -> Result<String> {
    let meta = RadiusFile {
        beta: vec![],
        s_ext: vec![],
        ..file.clone()
    };
    let mut out = header_line(&meta)?;
    out += &RADIUS_COLUMNS.join(",");
    out.push('\n');
    for (b, s) in file.beta.iter().zip(&file.s_ext) {
        let _ = writeln!(out, "{},{}", num(*b), num(*s));
    }
    Ok(out)
}

pub fn parse_radius_csv(text: &str) -> Result<RadiusFile> {
    let table = split_table(text, &RADIUS_COLUMNS)?;
    let mut file: RadiusFile = parse_meta(table.meta)?;
    check_schema(file.schema)?;
    for (line, f) in table.rows {
        file.beta.push(parse_num(f[0], line)?);
        file.s_ext.push(parse_num(f[1], line)?);
    }
    Ok(file)
}

fn complex_entry(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{sign}{:?}j", z.re, z.im.abs())
}

fn parse_complex(token: &str, line: usize) -> Result<Complex64> {
    let t = token.trim();
    let bad = || Error::Parse(format!("line {line}: {token:?} is not re+imj"));
    let Some(body) = t.strip_suffix('j') else {
        return Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re: f64 = body[..i].parse().map_err(|_| bad())?;
            let im: f64 = body[i..].trim_start_matches('+').parse().map_err(|_| bad())?;
            Ok(Complex64::new(re, im))
        }
        None => Ok(Complex64::new(0.0, body.parse().map_err(|_| bad())?)),
    }
}

/// `T=<n>` followed by `n` rows of `n` entries `re+imj`.
pub fn write_matrix(a: &Array2<Complex64>) -> Result<String> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidInput("matrix entries must be finite".into()));
    }
    let mut out = format!("T={}\n", a.nrows());
    for row in a.rows() {
        let entries: Vec<String> = row.iter().map(|&z| complex_entry(z)).collect();
        out += &entries.join(",");
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_matrix(text: &str) -> Result<Array2<Complex64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let n: usize = lines
        .next()
        .and_then(|(_, l)| l.trim().strip_prefix("T="))
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parse("matrix file must start with T=<n>".into()))?;
    let mut entries = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (i, line) in lines {
        let row: Vec<Complex64> = line
            .split(',')
            .map(|tok| parse_complex(tok, i + 1))
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Parse(format!("line {}: expected {n} entries, found {}", i + 1, row.len())));
        }
        entries.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse(format!("expected {n} rows, found {rows}")));
    }
    Array2::from_shape_vec((n, n), entries).map_err(|e| Error::Parse(e.to_string()))
}

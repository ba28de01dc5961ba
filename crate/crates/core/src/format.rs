//! Text format for operators and channels.
//!
//! An operator file is UTF-8 text with a header line
//!
//! ```text
//! dims: A=2,B=2 ; bside: B
//! ```
//!
//! followed by one line per matrix row holding whitespace-separated `re imag`
//! pairs. A channel file carries a second header line
//!
//! ```text
//! in: A'=2,B'=2 ; out: A=2,B=2
//! ```
//!
//! and stores the Choi operator in `(S_A, A, B, S_B)` order. Numbers are
//! written in shortest round-trip form, so writing and reading back is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::channels::{choi_layout, BipartiteChannel};
use crate::error::{Error, Result};
use crate::operators::{CMatrix, DensityOperator, HermitianOperator, SystemLayout, C64};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn factor_list(factors: &[(String, usize)]) -> String {
    factors.iter().map(|(l, d)| format!("{l}={d}")).collect::<Vec<_>>().join(",")
}

fn write_rows(out: &mut String, m: &CMatrix) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?} {:?}", m[(i, j)].re, m[(i, j)].im)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

/// Serializes an operator.
pub fn operator_to_string(op: &HermitianOperator) -> String {
    let mut out = String::new();
    let layout = op.layout();
    let _ = writeln!(out, "dims: {} ; bside: {}", factor_list(layout.factors()), layout.b_side().join(","));
    write_rows(&mut out, op.matrix());
    out
}

/// Serializes a channel: the operator header, the port header, then the Choi rows.
pub fn channel_to_string(ch: &BipartiteChannel) -> String {
    let mut out = String::new();
    let layout = ch.choi().layout();
    let (ia, ib) = ch.in_dims();
    let (oa, ob) = ch.out_dims();
    let _ = writeln!(out, "dims: {} ; bside: {}", factor_list(layout.factors()), layout.b_side().join(","));
    let _ = writeln!(out, "in: A'={ia},B'={ib} ; out: A={oa},B={ob}");
    write_rows(&mut out, ch.choi().matrix());
    out
}

/// `key: value` with the expected key.
fn keyed<'a>(part: &'a str, key: &str, line: usize) -> Result<&'a str> {
    let (k, v) = part.split_once(':').ok_or_else(|| parse_err(line, format!("expected `{key}:`")))?;
    if k.trim() != key {
        return Err(parse_err(line, format!("expected `{key}:`, found `{}:`", k.trim())));
    }
    Ok(v.trim())
}

fn parse_factors(s: &str, line: usize) -> Result<Vec<(String, usize)>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|f| {
            let (l, d) = f.split_once('=').ok_or_else(|| parse_err(line, format!("factor `{}` is not label=dim", f.trim())))?;
            let label = l.trim();
            if label.is_empty() {
                return Err(parse_err(line, "empty factor label"));
            }
            let dim: usize = d.trim().parse().map_err(|_| parse_err(line, format!("bad dimension `{}`", d.trim())))?;
            Ok((label.to_string(), dim))
        })
        .collect()
}

fn parse_dims_header(text: &str, line: usize) -> Result<SystemLayout> {
    let (dims, bside) = text.split_once(';').ok_or_else(|| parse_err(line, "header needs `dims: ... ; bside: ...`"))?;
    let factors = parse_factors(keyed(dims, "dims", line)?, line)?;
    let bside = keyed(bside, "bside", line)?;
    let b: Vec<String> =
        if bside.is_empty() { Vec::new() } else { bside.split(',').map(|l| l.trim().to_string()).collect() };
    SystemLayout::new(factors, b).map_err(|e| parse_err(line, e.to_string()))
}

fn parse_ports(text: &str, line: usize) -> Result<((usize, usize), (usize, usize))> {
    let (i, o) = text.split_once(';').ok_or_else(|| parse_err(line, "header needs `in: ... ; out: ...`"))?;
    let pair = |s: &str, key: &str| -> Result<(usize, usize)> {
        let f = parse_factors(keyed(s, key, line)?, line)?;
        match f.as_slice() {
            [(_, a), (_, b)] => Ok((*a, *b)),
            _ => Err(parse_err(line, format!("`{key}` needs exactly two factors"))),
        }
    };
    Ok((pair(i, "in")?, pair(o, "out")?))
}

/// Non-blank lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn parse_rows<'a>(lines: impl Iterator<Item = (usize, &'a str)>, dim: usize) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(dim, dim);
    let mut rows = 0;
    let mut last = 0;
    for (line, text) in lines {
        last = line;
        if rows == dim {
            return Err(parse_err(line, format!("more than {dim} matrix rows")));
        }
        let nums: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if nums.len() != 2 * dim {
            return Err(parse_err(line, format!("expected {} numbers ({dim} complex entries), found {}", 2 * dim, nums.len())));
        }
        for j in 0..dim {
            m[(rows, j)] = C64::new(nums[2 * j], nums[2 * j + 1]);
        }
        rows += 1;
    }
    if rows != dim {
        return Err(parse_err(last + 1, format!("expected {dim} matrix rows, found {rows}")));
    }
    Ok(m)
}

/// Parses an operator file.
pub fn parse_operator(text: &str) -> Result<HermitianOperator> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let layout = parse_dims_header(header, line)?;
    let m = parse_rows(lines, layout.dim())?;
    HermitianOperator::new(layout, m)
}

/// Parses a channel file. The header lines may come in either order; the
/// `dims` line must describe `(S_A, A, B, S_B)` consistently with `in`/`out`.
pub fn parse_channel(text: &str) -> Result<BipartiteChannel> {
    let mut lines = content_lines(text);
    let mut layout = None;
    let mut ports = None;
    let mut last = 0;
    for _ in 0..2 {
        let (line, header) = lines.next().ok_or_else(|| parse_err(last + 1, "channel file needs `dims` and `in`/`out` headers"))?;
        last = line;
        if header.starts_with("dims") {
            layout = Some((line, parse_dims_header(header, line)?));
        } else if header.starts_with("in") {
            ports = Some(parse_ports(header, line)?);
        } else {
            return Err(parse_err(line, "expected a `dims:` or `in:` header"));
        }
    }
    let ((line, layout), (in_dims, out_dims)) = match (layout, ports) {
        (Some(l), Some(p)) => (l, p),
        _ => return Err(parse_err(last, "channel file needs both `dims` and `in`/`out` headers")),
    };
    let expected = choi_layout(in_dims, out_dims).map_err(|e| parse_err(line, e.to_string()))?;
    if layout.dims() != expected.dims() {
        return Err(Error::DimensionMismatch(format!(
            "line {line}: dims {:?} do not match (S_A, A, B, S_B) = {:?} from the in/out header",
            layout.dims(),
            expected.dims()
        )));
    }
    let m = parse_rows(lines, layout.dim())?;
    BipartiteChannel::from_choi(HermitianOperator::new(expected, m)?, in_dims, out_dims)
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<HermitianOperator> {
    parse_operator(&fs::read_to_string(path)?)
}

/// Reads an operator file and checks that it holds a density operator.
pub fn read_state(path: impl AsRef<Path>) -> Result<DensityOperator> {
    DensityOperator::new(read_operator(path)?)
}

pub fn read_channel(path: impl AsRef<Path>) -> Result<BipartiteChannel> {
    parse_channel(&fs::read_to_string(path)?)
}

pub fn write_operator(path: impl AsRef<Path>, op: &HermitianOperator) -> Result<()> {
    Ok(fs::write(path, operator_to_string(op))?)
}

pub fn write_channel(path: impl AsRef<Path>, ch: &BipartiteChannel) -> Result<()> {
    Ok(fs::write(path, channel_to_string(ch))?)
}

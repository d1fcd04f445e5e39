//! Plain-text sparse dump of an [`SdpProblem`].
//!
//! ```text
//! sdp 1
//! free <n_free>
//! blocks <k> <d_1> ... <d_k>
//! rows <m>
//! b <i> <value>          (nonzero entries only)
//! c <col> <value>        (nonzero entries only)
//! a <row> <col> <value>
//! ```
//!
//! Values are written in shortest round-trip form, so a dump read back
//! reproduces the problem exactly.

use std::fmt::Write as _;

use thiserror::Error;

use super::problem::SdpProblem;

#[derive(Debug, Error)]
#[error("line {line}: {msg}")]
pub struct DumpError {
    pub line: usize,
    pub msg: String,
}

pub fn write_dump(problem: &SdpProblem) -> String {
    let mut s = String::new();
    writeln!(s, "sdp 1").unwrap();
    writeln!(s, "free {}", problem.n_free).unwrap();
    write!(s, "blocks {}", problem.block_dims.len()).unwrap();
    for d in &problem.block_dims {
        write!(s, " {d}").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "rows {}", problem.nrows()).unwrap();
    for (i, &b) in problem.b.iter().enumerate() {
        if b != 0.0 {
            writeln!(s, "b {i} {b:?}").unwrap();
        }
    }
    for (j, &c) in problem.c.iter().enumerate() {
        if c != 0.0 {
            writeln!(s, "c {j} {c:?}").unwrap();
        }
    }
    for (i, row) in problem.rows.iter().enumerate() {
        for &(j, v) in row {
            writeln!(s, "a {i} {j} {v:?}").unwrap();
        }
    }
    s
}

pub fn read_dump(text: &str) -> Result<SdpProblem, DumpError> {
    let err = |line: usize, msg: &str| DumpError { line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut header = |key: &str| -> Result<(usize, Vec<String>), DumpError> {
        let (n, l) = lines.next().ok_or_else(|| err(0, &format!("missing '{key}' line")))?;
        let toks: Vec<String> = l.split_whitespace().map(str::to_string).collect();
        if toks.first().map(String::as_str) != Some(key) {
            return Err(err(n + 1, &format!("expected '{key}'")));
        }
        Ok((n + 1, toks[1..].to_vec()))
    };
    let parse_usize = |line: usize, t: &str| t.parse::<usize>().map_err(|_| err(line, "bad integer"));

    let (n, v) = header("sdp")?;
    if v != ["1"] {
        return Err(err(n, "unsupported version"));
    }
    let (n, v) = header("free")?;
    let n_free = parse_usize(n, v.first().ok_or_else(|| err(n, "missing count"))?)?;
    let (n, v) = header("blocks")?;
    let k = parse_usize(n, v.first().ok_or_else(|| err(n, "missing count"))?)?;
    if v.len() != k + 1 {
        return Err(err(n, "block count does not match dimensions"));
    }
    let dims = v[1..].iter().map(|t| parse_usize(n, t)).collect::<Result<Vec<_>, _>>()?;
    let (n, v) = header("rows")?;
    let m = parse_usize(n, v.first().ok_or_else(|| err(n, "missing count"))?)?;

    let mut p = SdpProblem::new(n_free, dims);
    p.rows = vec![Vec::new(); m];
    p.b = vec![0.0; m];
    let ncols = p.ncols();
    for (n, l) in lines {
        let n = n + 1;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let val = |t: &str| t.parse::<f64>().map_err(|_| err(n, "bad number"));
        match toks.as_slice() {
            ["b", i, v] => {
                let i = parse_usize(n, i)?;
                *p.b.get_mut(i).ok_or_else(|| err(n, "row out of range"))? = val(v)?;
            }
            ["c", j, v] => {
                let j = parse_usize(n, j)?;
                *p.c.get_mut(j).ok_or_else(|| err(n, "column out of range"))? = val(v)?;
            }
            ["a", i, j, v] => {
                let (i, j) = (parse_usize(n, i)?, parse_usize(n, j)?);
                if j >= ncols {
                    return Err(err(n, "column out of range"));
                }
                p.rows.get_mut(i).ok_or_else(|| err(n, "row out of range"))?.push((j, val(v)?));
            }
            _ => return Err(err(n, "unrecognized record")),
        }
    }
    for row in &mut p.rows {
        row.sort_by_key(|&(c, _)| c);
    }
    Ok(p)
}

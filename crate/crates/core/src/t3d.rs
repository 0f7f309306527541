//! Plain-text tensor files.
//!
//! ```text
//! t3d n1 n2 n3
//! <n1·n2·n3 whitespace-separated decimal scalars, first index fastest>
//! ```
//!
//! The writer emits one mode-1 fiber per line using the shortest decimal
//! representation that parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor3::Tensor3;

const MAGIC: &str = "t3d";

pub fn to_string(t: &Tensor3) -> String {
    let [n1, n2, n3] = t.dims();
    let mut out = format!("{MAGIC} {n1} {n2} {n3}\n");
    for fiber in t.data().chunks(n1.max(1)) {
        let mut first = true;
        for v in fiber {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v:e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<Tensor3> {
    let mut lines = text.lines().enumerate();
    let (dims, header_line) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                msg: "missing `t3d` header".into(),
            });
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        break (parse_header(line, idx + 1)?, idx + 1);
    };

    let expected: usize = dims.iter().product();
    let mut data = Vec::with_capacity(expected);
    let mut last_line = header_line;
    for (idx, line) in lines {
        last_line = idx + 1;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("invalid scalar `{tok}`"),
            })?;
            if data.len() == expected {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("more than {expected} scalars"),
                });
            }
            data.push(v);
        }
    }
    if data.len() != expected {
        return Err(Error::Parse {
            line: last_line,
            msg: format!("expected {expected} scalars, found {}", data.len()),
        });
    }
    Tensor3::new(dims, data)
}

fn parse_header(line: &str, lineno: usize) -> Result<[usize; 3]> {
    let bad = |msg: String| Error::Parse { line: lineno, msg };
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.first() != Some(&MAGIC) {
        return Err(bad(format!(
            "expected header `{MAGIC} n1 n2 n3`, got `{line}`"
        )));
    }
    if toks.len() != 4 {
        return Err(bad(format!("header needs three dimensions, got `{line}`")));
    }
    let mut dims = [0usize; 3];
    for (d, tok) in dims.iter_mut().zip(&toks[1..]) {
        *d = tok
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .ok_or_else(|| bad(format!("invalid dimension `{tok}`")))?;
    }
    Ok(dims)
}

pub fn load(path: impl AsRef<Path>) -> Result<Tensor3> {
    parse(&fs::read_to_string(path)?)
}

pub fn store(t: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_string(t))?;
    Ok(())
}

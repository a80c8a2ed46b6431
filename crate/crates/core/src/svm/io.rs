//! Text model format.
//!
//! ```text
//! UTD-SVM 1
//! poly <degree> <gamma> <coef0>      | rbf <gamma>
//! dim <n>
//! count <m>
//! bias <b>
//! features <fingerprint>             (optional)
//! <coef> <v1> ... <vn>               (m lines)
//! ```
//!
//! Reals are written with 17 significant digits so loading reproduces every
//! value exactly.

use std::path::Path;

use super::{KernelSpec, SvmModel};
use crate::error::{Error, Result};

const MAGIC: &str = "UTD-SVM";
const VERSION: u32 = 1;

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_model(model: &SvmModel) -> Vec<u8> {
    let mut out = format!("{MAGIC} {VERSION}\n");
    match model.kernel {
        KernelSpec::Polynomial {
            degree,
            gamma,
            coef0,
        } => out.push_str(&format!("poly {degree} {} {}\n", real(gamma), real(coef0))),
        KernelSpec::Rbf { gamma } => out.push_str(&format!("rbf {}\n", real(gamma))),
    }
    out.push_str(&format!("dim {}\n", model.dim));
    out.push_str(&format!("count {}\n", model.support_vectors.len()));
    out.push_str(&format!("bias {}\n", real(model.bias)));
    if let Some(f) = &model.features {
        out.push_str(&format!("features {f}\n"));
    }
    for (sv, &coef) in model.support_vectors.iter().zip(&model.dual_coefs) {
        out.push_str(&real(coef));
        for &v in sv {
            out.push(' ');
            out.push_str(&real(v));
        }
        out.push('\n');
    }
    out.into_bytes()
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::parse(
                self.last + 1,
                format!("truncated model: missing {what}"),
            )),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_line(key)?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.trim())),
            _ => Err(Error::parse(n, format!("expected `{key} <value>`"))),
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

pub fn load_model(bytes: &[u8]) -> Result<SvmModel> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::parse(0, format!("not UTF-8: {e}")))?;
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };

    let (n, header) = lines.next_line("header")?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::parse(n, format!("expected `{MAGIC} {VERSION}` header")))?;
    if version != VERSION.to_string() {
        return Err(Error::parse(
            n,
            format!("unsupported model version `{version}`"),
        ));
    }

    let (n, kline) = lines.next_line("kernel")?;
    let toks: Vec<&str> = kline.split_whitespace().collect();
    let kernel = match toks.as_slice() {
        ["poly", d, g, c] => KernelSpec::Polynomial {
            degree: parse_num(n, d, "degree")?,
            gamma: parse_num(n, g, "gamma")?,
            coef0: parse_num(n, c, "coef0")?,
        },
        ["rbf", g] => KernelSpec::Rbf {
            gamma: parse_num(n, g, "gamma")?,
        },
        _ => return Err(Error::parse(n, format!("bad kernel line `{kline}`"))),
    };
    kernel
        .validate()
        .map_err(|e| Error::parse(n, e.to_string()))?;

    let (n, v) = lines.keyed("dim")?;
    let dim: usize = parse_num(n, v, "dim")?;
    let (n, v) = lines.keyed("count")?;
    let count: usize = parse_num(n, v, "count")?;
    let (n, v) = lines.keyed("bias")?;
    let bias: f64 = parse_num(n, v, "bias")?;

    let mut features = None;
    let mut support_vectors = Vec::with_capacity(count);
    let mut dual_coefs = Vec::with_capacity(count);
    while support_vectors.len() < count {
        let (n, line) = lines.next_line("support vector")?;
        if support_vectors.is_empty() && features.is_none() {
            if let Some(f) = line.strip_prefix("features ") {
                features = Some(f.trim().to_string());
                continue;
            }
        }
        let mut toks = line.split_whitespace();
        let coef: f64 = match toks.next() {
            Some(t) => parse_num(n, t, "coefficient")?,
            None => return Err(Error::parse(n, "empty support vector line")),
        };
        let sv = toks
            .map(|t| parse_num::<f64>(n, t, "value"))
            .collect::<Result<Vec<_>>>()?;
        if sv.len() != dim {
            return Err(Error::parse(
                n,
                format!(
                    "truncated support vector: {} values, expected {dim}",
                    sv.len()
                ),
            ));
        }
        dual_coefs.push(coef);
        support_vectors.push(sv);
    }
    let model = SvmModel {
        kernel,
        dim,
        support_vectors,
        dual_coefs,
        bias,
        features,
    };
    model
        .validate()
        .map_err(|e| Error::parse(lines.last, e.to_string()))?;
    Ok(model)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_model(&bytes)
}

pub fn write_model(path: impl AsRef<Path>, model: &SvmModel) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, save_model(model)).map_err(|e| Error::io(path, e))
}

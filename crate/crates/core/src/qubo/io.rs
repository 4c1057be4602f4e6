//! Plain-text QUBO coordinate list.
//!
//! ```text
//! # l0qubo qubo v1
//! # registry {...}            optional, one-line JSON variable registry
//! p qubo <num_vars> <num_entries>
//! <i> <j> <coeff>             0-based, i <= j, 17 significant digits
//! c offset <value>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::qubo::{QuboModel, VariableRegistry};
use crate::scalar::Real;

const MAGIC: &str = "# l0qubo qubo v1";
const REGISTRY_TAG: &str = "# registry ";

fn fmt_coeff<T: Real>(v: T) -> String {
    format!("{v:.16e}")
}

pub fn write_qubo<T: Real, W: Write>(
    model: &QuboModel<T>,
    registry: Option<&VariableRegistry<T>>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    if let Some(reg) = registry {
        writeln!(out, "{REGISTRY_TAG}{}", serde_json::to_string(reg)?)?;
    }
    writeln!(out, "p qubo {} {}", model.num_vars(), model.num_entries())?;
    for (i, j, v) in model.entries() {
        writeln!(out, "{i} {j} {}", fmt_coeff(v))?;
    }
    writeln!(out, "c offset {}", fmt_coeff(model.offset()))?;
    out.flush()?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_num<V: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<V> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

/// Parses a model and, when present, its embedded registry.
pub fn read_qubo<T: Real, R: BufRead>(input: R) -> Result<(QuboModel<T>, Option<VariableRegistry<T>>)> {
    let mut registry: Option<VariableRegistry<T>> = None;
    let mut header: Option<(usize, usize)> = None;
    let mut model: Option<QuboModel<T>> = None;
    let mut seen = 0usize;
    let mut offset: Option<T> = None;

    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(json) = trimmed.strip_prefix(REGISTRY_TAG) {
            registry = Some(serde_json::from_str(json).map_err(|e| parse_err(lineno, format!("bad registry: {e}")))?);
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        if offset.is_some() {
            return Err(parse_err(lineno, "content after the offset line"));
        }
        let mut toks = trimmed.split_whitespace();
        match toks.next() {
            Some("p") => {
                if header.is_some() {
                    return Err(parse_err(lineno, "duplicate header"));
                }
                if toks.next() != Some("qubo") {
                    return Err(parse_err(lineno, "header must read `p qubo <num_vars> <num_entries>`"));
                }
                let n: usize = parse_num(toks.next(), lineno, "variable count")?;
                let e: usize = parse_num(toks.next(), lineno, "entry count")?;
                header = Some((n, e));
                model = Some(QuboModel::new(n));
            }
            Some("c") => {
                if toks.next() != Some("offset") {
                    return Err(parse_err(lineno, "expected `c offset <value>`"));
                }
                let v: T = parse_num(toks.next(), lineno, "offset")?;
                if !v.is_finite() {
                    return Err(parse_err(lineno, "offset must be finite"));
                }
                offset = Some(v);
            }
            Some(first) => {
                let m = model.as_mut().ok_or_else(|| parse_err(lineno, "entry before header"))?;
                let i: usize = parse_num(Some(first), lineno, "row index")?;
                let j: usize = parse_num(toks.next(), lineno, "column index")?;
                let v: T = parse_num(toks.next(), lineno, "coefficient")?;
                if i > j {
                    return Err(parse_err(lineno, format!("entry ({i}, {j}) must have i <= j")));
                }
                if m.get(i, j) != T::zero() {
                    return Err(parse_err(lineno, format!("duplicate entry ({i}, {j})")));
                }
                if v == T::zero() {
                    return Err(parse_err(lineno, "zero coefficients are not stored"));
                }
                m.add(i, j, v).map_err(|e| parse_err(lineno, e.to_string()))?;
                seen += 1;
            }
            None => unreachable!("blank lines are skipped"),
        }
        if toks.next().is_some() {
            return Err(parse_err(lineno, "trailing tokens"));
        }
    }

    let (_, expected) = header.ok_or_else(|| parse_err(0, "missing `p qubo` header"))?;
    if seen != expected {
        return Err(parse_err(0, format!("header announces {expected} entries, found {seen}")));
    }
    let offset = offset.ok_or_else(|| parse_err(0, "missing `c offset` line"))?;
    let mut model = model.expect("header creates the model");
    model.add_offset(offset)?;
    if let Some(reg) = &registry {
        if reg.num_vars() != model.num_vars() {
            return Err(parse_err(0, "registry variable count disagrees with the header"));
        }
    }
    Ok((model, registry))
}

pub fn export_qubo_file<T: Real>(
    model: &QuboModel<T>,
    registry: Option<&VariableRegistry<T>>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_qubo(model, registry, BufWriter::new(File::create(path)?))
}

pub fn import_qubo_file<T: Real>(path: impl AsRef<Path>) -> Result<(QuboModel<T>, Option<VariableRegistry<T>>)> {
    read_qubo(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Quantizer, RealMatrix};
    use crate::qubo::tests::random_model;
    use crate::qubo::{build_l0_qubo, BuildParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn to_string(model: &QuboModel<f64>, reg: Option<&VariableRegistry<f64>>) -> String {
        let mut buf = Vec::new();
        write_qubo(model, reg, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_model() {
        let text = to_string(&QuboModel::new(0), None);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "p qubo 0 0");
        assert!(lines[2].starts_with("c offset "));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn single_diagonal_entry() {
        let mut m = QuboModel::new(1);
        m.add_linear(0, 1.0).unwrap();
        let text = to_string(&m, None);
        assert!(text.lines().any(|l| l.starts_with("0 0 1.0")), "{text}");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let m = random_model(12, 0.5, &mut rng);
            let first = to_string(&m, None);
            let (back, reg) = read_qubo::<f64, _>(first.as_bytes()).unwrap();
            assert!(reg.is_none());
            assert_eq!(back, m);
            assert_eq!(to_string(&back, None), first);
        }
    }

    #[test]
    fn registry_is_embedded() {
        let a = RealMatrix::from_fn(2, 3, |r, c| (r as f64) - 0.3 * c as f64).unwrap();
        let q = Quantizer::unsigned(3).unwrap();
        let (m, reg) = build_l0_qubo(&a, &[0.2, -0.1], &q, &BuildParams::default()).unwrap();
        let text = to_string(&m, Some(&reg));
        let (back, back_reg) = read_qubo::<f64, _>(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back_reg.unwrap(), reg);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let cases = [
            ("p qubo 2 1\n0 1 x\nc offset 0\n", 2),
            ("0 0 1.0\n", 1),
            ("p qubo 2 1\n1 0 1.0\nc offset 0\n", 2),
            ("p qubo 2 1\n0 5 1.0\nc offset 0\n", 2),
            ("# c\np qobo 1 0\n", 2),
            ("p qubo 1 0\nc offset 0\n0 0 1.0\n", 3),
        ];
        for (text, line) in cases {
            match read_qubo::<f64, _>(text.as_bytes()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
        assert!(read_qubo::<f64, _>("p qubo 1 1\nc offset 0\n".as_bytes()).is_err());
        assert!(read_qubo::<f64, _>("p qubo 1 0\n".as_bytes()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qubo");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(5, 0.8, &mut rng);
        export_qubo_file(&m, None, &path).unwrap();
        let (back, _) = import_qubo_file::<f64>(&path).unwrap();
        assert_eq!(back, m);
    }
}

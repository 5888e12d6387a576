//! JSON system spec files.
//!
//! Field set and order: `n, d, m, beta, modes[{id, embedding, lambda, A, B0}],
//! Q, C{"<id>-><id>": matrix}`. Matrices are arrays of rows. The canonical
//! writer emits floats with 17 significant digits so that parse → serialize
//! reproduces canonical input byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::{Mode, SwitchSystem};
use crate::error::{Error, Result};
use crate::numeric::fmt17;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: usize,
    d: usize,
    m: usize,
    beta: Vec<f64>,
    modes: Vec<RawMode>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    id: String,
    embedding: Vec<f64>,
    lambda: f64,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B0")]
    b0: Vec<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], r: usize, c: usize, code: &str, path: &str) -> Result<DMatrix<f64>> {
    let mismatch = |found: String| Error::DimMismatch {
        code: code.to_string(),
        path: path.to_string(),
        expected: format!("{r}x{c}"),
        found,
    };
    if rows.len() != r {
        return Err(mismatch(format!("{} rows", rows.len())));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(mismatch(format!("row {i} of length {}", row.len())));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn vector(v: &[f64], len: usize, code: &str, path: &str) -> Result<Vec<f64>> {
    if v.len() != len {
        return Err(Error::DimMismatch {
            code: code.to_string(),
            path: path.to_string(),
            expected: format!("length {len}"),
            found: format!("length {}", v.len()),
        });
    }
    Ok(v.to_vec())
}

/// Parses a system spec file. Shape errors are reported with a field path;
/// semantic invariants are left to [`super::validate`].
pub fn parse_spec(text: &[u8]) -> Result<SwitchSystem> {
    let text = std::str::from_utf8(text).map_err(|e| Error::Parse {
        path: "<input>".into(),
        message: format!("not UTF-8: {e}"),
    })?;
    let raw: RawSystem = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if raw.modes.is_empty() {
        return Err(Error::NoModes);
    }
    let (n, d, m) = (raw.n, raw.d, raw.m);
    let beta = vector(&raw.beta, m, "dim-mismatch:beta", "beta")?;
    let mut modes = Vec::with_capacity(raw.modes.len());
    for (i, rm) in raw.modes.iter().enumerate() {
        let p = format!("modes[{i}]");
        modes.push(Mode {
            id: rm.id.clone(),
            embedding: vector(&rm.embedding, m, "dim-mismatch:embedding", &format!("{p}.embedding"))?,
            rate: rm.lambda,
            a: matrix(&rm.a, n, n, "dim-mismatch:A", &format!("{p}.A"))?,
            b0: matrix(&rm.b0, n, d, "dim-mismatch:B0", &format!("{p}.B0"))?,
        });
    }
    let e = modes.len();
    let q = matrix(&raw.q, e, e, "dim-mismatch:Q", "Q")?;

    let index: BTreeMap<&str, usize> = modes.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect();
    let mut c = BTreeMap::new();
    for (key, rows) in &raw.c {
        let path = format!("C.{key}");
        let (from, to) = key.split_once("->").ok_or_else(|| Error::Parse {
            path: path.clone(),
            message: "edge keys look like `<id>-><id>`".into(),
        })?;
        let lookup = |id: &str| {
            index.get(id).copied().ok_or_else(|| Error::Parse {
                path: path.clone(),
                message: format!("unknown mode `{id}`"),
            })
        };
        let edge = (lookup(from)?, lookup(to)?);
        c.insert(edge, matrix(rows, n, n, "dim-mismatch:C", &path)?);
    }
    Ok(SwitchSystem {
        n,
        d,
        m,
        beta,
        modes,
        q,
        c,
    })
}

fn write_row(out: &mut String, row: impl IntoIterator<Item = f64>) {
    out.push('[');
    for (i, x) in row.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&fmt17(x));
    }
    out.push(']');
}

fn write_matrix(out: &mut String, m: &DMatrix<f64>) {
    out.push('[');
    for i in 0..m.nrows() {
        if i > 0 {
            out.push_str(", ");
        }
        write_row(out, m.row(i).iter().copied());
    }
    out.push(']');
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Canonical serialization of a system.
pub fn serialize_spec(system: &SwitchSystem) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"n\": {},", system.n);
    let _ = writeln!(out, "  \"d\": {},", system.d);
    let _ = writeln!(out, "  \"m\": {},", system.m);
    out.push_str("  \"beta\": ");
    write_row(&mut out, system.beta.iter().copied());
    out.push_str(",\n  \"modes\": [\n");
    for (i, mode) in system.modes.iter().enumerate() {
        out.push_str("    {\n");
        let _ = writeln!(out, "      \"id\": {},", json_str(&mode.id));
        out.push_str("      \"embedding\": ");
        write_row(&mut out, mode.embedding.iter().copied());
        let _ = writeln!(out, ",\n      \"lambda\": {},", fmt17(mode.rate));
        out.push_str("      \"A\": ");
        write_matrix(&mut out, &mode.a);
        out.push_str(",\n      \"B0\": ");
        write_matrix(&mut out, &mode.b0);
        out.push_str("\n    }");
        out.push_str(if i + 1 < system.modes.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n  \"Q\": ");
    write_matrix(&mut out, &system.q);
    out.push_str(",\n  \"C\": {");
    if system.c.is_empty() {
        out.push_str("}\n");
    } else {
        out.push('\n');
        let len = system.c.len();
        for (k, (&(g, t), c)) in system.c.iter().enumerate() {
            let _ = write!(out, "    {}: ", json_str(&system.edge_label(g, t)));
            write_matrix(&mut out, c);
            out.push_str(if k + 1 < len { ",\n" } else { "\n" });
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

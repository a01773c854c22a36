//! OFF mesh text format.

use std::fmt::Write as _;

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

struct Line<'a> {
    number: usize,
    offset: usize,
    tokens: Vec<&'a str>,
}

/// Non-blank lines with comments stripped, numbered from 1.
fn content_lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, raw) in text.split('\n').enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if !tokens.is_empty() {
            out.push(Line {
                number: i + 1,
                offset,
                tokens,
            });
        }
        offset += raw.len() + 1;
    }
    out
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected {what}, found {tok:?}"),
    })
}

/// Parse an OFF file. Accepts the fused `OFF<v> <f> <e>` header found in some
/// ModelNet files; polygons are fan-triangulated.
pub fn parse_off(bytes: &[u8]) -> Result<TriangleMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format {
        offset: e.valid_up_to() as u64,
        msg: "OFF file is not valid UTF-8".into(),
    })?;
    let lines = content_lines(text);
    let mut it = lines.iter();
    let header = it.next().ok_or_else(|| Error::Format {
        offset: 0,
        msg: "empty file, missing OFF header".into(),
    })?;
    let first = header.tokens[0];
    let Some(fused) = first.strip_prefix("OFF") else {
        return Err(Error::Format {
            offset: header.offset as u64,
            msg: format!("missing OFF header, found {first:?}"),
        });
    };
    let mut count_tokens: Vec<(&str, usize)> = Vec::new();
    if !fused.is_empty() {
        count_tokens.push((fused, header.number));
    }
    count_tokens.extend(header.tokens[1..].iter().map(|&t| (t, header.number)));
    if count_tokens.is_empty() {
        let l = it.next().ok_or_else(|| Error::Format {
            offset: text.len() as u64,
            msg: "missing vertex/face counts".into(),
        })?;
        count_tokens.extend(l.tokens.iter().map(|&t| (t, l.number)));
    }
    if count_tokens.len() < 2 {
        let line = count_tokens.first().map_or(header.number, |t| t.1);
        return Err(Error::Parse {
            line,
            msg: "counts line needs vertex and face counts".into(),
        });
    }
    let nv: usize = parse_num(count_tokens[0].0, count_tokens[0].1, "vertex count")?;
    let nf: usize = parse_num(count_tokens[1].0, count_tokens[1].1, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let l = it.next().ok_or_else(|| Error::Format {
            offset: text.len() as u64,
            msg: format!("file ends after {i} of {nv} vertices"),
        })?;
        if l.tokens.len() < 3 {
            return Err(Error::Parse {
                line: l.number,
                msg: format!("vertex needs 3 coordinates, found {}", l.tokens.len()),
            });
        }
        let mut v = [0.0; 3];
        for (slot, tok) in v.iter_mut().zip(&l.tokens) {
            *slot = parse_num(tok, l.number, "coordinate")?;
        }
        vertices.push(v);
    }

    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let l = it.next().ok_or_else(|| Error::Format {
            offset: text.len() as u64,
            msg: format!("file ends after {i} of {nf} faces"),
        })?;
        let n: usize = parse_num(l.tokens[0], l.number, "polygon size")?;
        if n < 3 {
            return Err(Error::Parse {
                line: l.number,
                msg: format!("polygon needs at least 3 vertices, found {n}"),
            });
        }
        if l.tokens.len() < n + 1 {
            return Err(Error::Parse {
                line: l.number,
                msg: format!("polygon lists {} of {n} indices", l.tokens.len() - 1),
            });
        }
        let mut idx = Vec::with_capacity(n);
        for tok in &l.tokens[1..=n] {
            let index: usize = parse_num(tok, l.number, "vertex index")?;
            if index >= nv {
                return Err(Error::Index {
                    line: l.number,
                    index,
                    count: nv,
                });
            }
            idx.push(index);
        }
        for j in 1..n - 1 {
            faces.push([idx[0], idx[j], idx[j + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Serialize as OFF. Coordinates use the shortest representation that
/// parses back to the same `f64`.
pub fn write_off(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    writeln!(s, "OFF").unwrap();
    writeln!(s, "{} {} 0", mesh.vertices.len(), mesh.faces.len()).unwrap();
    for [x, y, z] in &mesh.vertices {
        writeln!(s, "{x:?} {y:?} {z:?}").unwrap();
    }
    for [a, b, c] in &mesh.faces {
        writeln!(s, "3 {a} {b} {c}").unwrap();
    }
    s
}

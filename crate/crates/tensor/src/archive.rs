//! Flat checkpoint archive.
//!
//! Layout:
//!
//! ```text
//! synsrl-archive 1
//! <name> <shape> <dtype> <offset>      one manifest line per array
//! payload <bytes>
//! <payload>
//! ```
//!
//! `shape` is written as extents joined by `x` (e.g. `10x25`), `dtype` is
//! `f64` or `f32`, and `offset` is the byte offset of the array inside the
//! payload. Payload values are little-endian. Arrays are stored back to
//! back in manifest order.

use std::collections::HashSet;
use std::io::Write;

use crate::error::{Result, TensorError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &str = "synsrl-archive 1";

/// A named array read from or written to an archive.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry<T: Scalar = f64> {
    pub name: String,
    pub tensor: Tensor<T>,
}

fn bad(msg: impl Into<String>) -> TensorError {
    TensorError::Archive(msg.into())
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c.is_whitespace() || c.is_control())
}

pub fn write_archive<T: Scalar, W: Write>(
    out: &mut W,
    entries: &[(&str, &Tensor<T>)],
) -> std::io::Result<()> {
    let width = match T::DTYPE {
        "f32" => 4,
        _ => 8,
    };
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    let mut offset = 0usize;
    let mut seen = HashSet::new();
    for (name, t) in entries {
        if !valid_name(name) || !seen.insert(*name) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("invalid or duplicate array name {name:?}"),
            ));
        }
        let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        header.push_str(&format!("{name} {} {} {offset}\n", shape.join("x"), T::DTYPE));
        offset += t.numel() * width;
    }
    header.push_str(&format!("payload {offset}\n"));
    out.write_all(header.as_bytes())?;
    let mut payload = Vec::with_capacity(offset);
    for (_, t) in entries {
        for v in t.data() {
            if width == 4 {
                payload.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            } else {
                payload.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
    }
    out.write_all(&payload)
}

struct ManifestLine {
    name: String,
    shape: Vec<usize>,
    width: usize,
    offset: usize,
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    let shape = s
        .split('x')
        .map(|d| d.parse::<usize>().map_err(|_| bad(format!("bad extent {d:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if shape.contains(&0) {
        return Err(bad(format!("zero extent in {s:?}")));
    }
    Ok(shape)
}

/// Parses an archive produced by [`write_archive`]. Arrays stored as `f32`
/// are widened (or kept) according to `T`.
pub fn read_archive<T: Scalar>(bytes: &[u8]) -> Result<Vec<ArchiveEntry<T>>> {
    let mut pos = 0;
    let mut next_line = |what: &str| -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad(format!("missing newline after {what}")))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("manifest is not UTF-8"))
    };

    if next_line("magic")? != MAGIC {
        return Err(bad("bad magic line"));
    }
    let mut lines = Vec::new();
    let mut names = HashSet::new();
    let payload_len = loop {
        let line = next_line("manifest line")?;
        let fields: Vec<&str> = line.split(' ').collect();
        match fields.as_slice() {
            ["payload", len] => {
                break len
                    .parse::<usize>()
                    .map_err(|_| bad(format!("bad payload length {len:?}")))?
            }
            [name, shape, dtype, offset] => {
                if !valid_name(name) || !names.insert(name.to_string()) {
                    return Err(bad(format!("invalid or duplicate name {name:?}")));
                }
                let width = match *dtype {
                    "f64" => 8,
                    "f32" => 4,
                    other => return Err(bad(format!("unknown dtype {other:?}"))),
                };
                lines.push(ManifestLine {
                    name: name.to_string(),
                    shape: parse_shape(shape)?,
                    width,
                    offset: offset
                        .parse()
                        .map_err(|_| bad(format!("bad offset {offset:?}")))?,
                });
            }
            _ => return Err(bad(format!("malformed manifest line {line:?}"))),
        }
    };
    let payload = &bytes[pos..];
    if payload.len() != payload_len {
        return Err(bad(format!(
            "payload is {} bytes, manifest says {payload_len}",
            payload.len()
        )));
    }

    let mut expected_offset = 0usize;
    let mut entries = Vec::with_capacity(lines.len());
    for line in lines {
        let numel = line
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad(format!("shape of {} overflows", line.name)))?;
        let size = numel
            .checked_mul(line.width)
            .ok_or_else(|| bad(format!("size of {} overflows", line.name)))?;
        if line.offset != expected_offset || size > payload.len() - line.offset.min(payload.len()) {
            return Err(bad(format!("array {} has inconsistent offset", line.name)));
        }
        let raw = &payload[line.offset..line.offset + size];
        let data: Vec<T> = if line.width == 8 {
            raw.chunks_exact(8)
                .map(|c| T::from_f64(f64::from_le_bytes(c.try_into().unwrap())))
                .collect()
        } else {
            raw.chunks_exact(4)
                .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect()
        };
        expected_offset += size;
        entries.push(ArchiveEntry {
            name: line.name,
            tensor: Tensor::new(line.shape, data)?,
        });
    }
    if expected_offset != payload_len {
        return Err(bad("payload has trailing bytes"));
    }
    Ok(entries)
}

//! Shared pieces of the text file formats: exact fixed-point seconds and the
//! `# key: value` header carrying the config digest and seed.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Where an output came from: the config digest and the RNG seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub digest: String,
    pub seed: u64,
}

/// `ns` as seconds with exactly nine decimals.
pub fn fmt_ns(ns: u64) -> String {
    format!("{}.{:09}", ns / 1_000_000_000, ns % 1_000_000_000)
}

/// Parses fixed-point seconds (at most nine decimals) into nanoseconds.
pub fn parse_ns(s: &str) -> std::result::Result<u64, String> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() || frac.len() > 9 {
        return Err(format!("`{s}` is not fixed-point seconds with at most 9 decimals"));
    }
    let whole: u64 = int.parse().map_err(|_| format!("bad seconds `{s}`"))?;
    let mut f = 0u64;
    for (i, c) in frac.chars().enumerate() {
        let d = c.to_digit(10).ok_or_else(|| format!("bad seconds `{s}`"))? as u64;
        f += d * 10u64.pow(8 - i as u32);
    }
    whole
        .checked_mul(1_000_000_000)
        .and_then(|w| w.checked_add(f))
        .ok_or_else(|| format!("`{s}` overflows"))
}

/// Writes the magic line and `# key: value` lines.
pub fn write_header<W: Write>(w: &mut W, magic: &str, fields: &[(&str, String)]) -> Result<()> {
    writeln!(w, "# {magic}")?;
    for (k, v) in fields {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

/// Header fields, the first data line if any, and the lines consumed.
pub type Header = (Vec<(String, String)>, Option<String>, usize);

/// Reads header lines up to the first non-comment line, which is returned
/// together with the header fields and the number of lines consumed.
pub fn read_header<R: BufRead>(r: &mut R, magic: &str) -> Result<Header> {
    let mut line = String::new();
    let mut n = 0;
    let mut fields = Vec::new();
    let mut saw_magic = false;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            if !saw_magic {
                return Err(Error::Format {
                    line: n,
                    reason: format!("missing `# {magic}` header"),
                });
            }
            return Ok((fields, None, n));
        }
        n += 1;
        let text = line.trim_end_matches(['\n', '\r']);
        let Some(body) = text.strip_prefix("# ") else {
            if !saw_magic {
                return Err(Error::Format {
                    line: n,
                    reason: format!("missing `# {magic}` header"),
                });
            }
            return Ok((fields, Some(text.to_string()), n));
        };
        if !saw_magic {
            if body != magic {
                return Err(Error::Format {
                    line: n,
                    reason: format!("expected `# {magic}`, found `{text}`"),
                });
            }
            saw_magic = true;
            continue;
        }
        let (k, v) = body.split_once(": ").ok_or_else(|| Error::Format {
            line: n,
            reason: format!("header line `{text}` is not `# key: value`"),
        })?;
        fields.push((k.to_string(), v.to_string()));
    }
}

pub fn header_field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format {
            line: 0,
            reason: format!("header lacks `{key}`"),
        })
}

pub fn provenance_from(fields: &[(String, String)]) -> Result<Provenance> {
    let seed = header_field(fields, "seed")?
        .parse()
        .map_err(|_| Error::Format {
            line: 0,
            reason: "seed is not an unsigned integer".into(),
        })?;
    Ok(Provenance {
        digest: header_field(fields, "digest")?.to_string(),
        seed,
    })
}

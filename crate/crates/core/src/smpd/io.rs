//! Click stream files.
//!
//! Text: a `#` header, then `t_s,label,phase` rows with nine-decimal seconds.
//! Binary: magic, a length-prefixed JSON header, then 10-byte records
//! (u64 nanoseconds, i8 label, u8 phase), little endian. Both hold exactly
//! the same content.
//!
//! [`ClickWriter`] and [`for_each_click`] stream records so long runs never
//! hold all clicks in memory.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

use super::{ClickRecord, ClickSink, ClickStream};
use crate::error::{Error, Result};
use crate::format::{fmt_ns, header_field, parse_ns, provenance_from, read_header, write_header, Provenance};
use crate::protocol::{Block, Phase};

const MAGIC: &str = "haloscope-clicks v1";
const COLUMNS: &str = "t_s,label,phase";
const BINARY_MAGIC: &[u8; 8] = b"HSCLICK1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    Text,
    Binary,
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    digest: String,
    seed: u64,
    clicks: u64,
}

fn write_stream_header<W: Write>(
    w: &mut W,
    format: StreamFormat,
    provenance: &Provenance,
    clicks: u64,
) -> Result<()> {
    match format {
        StreamFormat::Text => {
            write_header(
                w,
                MAGIC,
                &[
                    ("digest", provenance.digest.clone()),
                    ("seed", provenance.seed.to_string()),
                    ("clicks", clicks.to_string()),
                ],
            )?;
            writeln!(w, "{COLUMNS}")?;
        }
        StreamFormat::Binary => {
            let header = serde_json::to_vec(&BinaryHeader {
                digest: provenance.digest.clone(),
                seed: provenance.seed,
                clicks,
            })
            .expect("header serializes");
            w.write_all(BINARY_MAGIC)?;
            w.write_all(&(header.len() as u32).to_le_bytes())?;
            w.write_all(&header)?;
        }
    }
    Ok(())
}

fn write_record<W: Write>(w: &mut W, format: StreamFormat, c: &ClickRecord) -> std::io::Result<()> {
    match format {
        StreamFormat::Text => writeln!(w, "{},{},{}", fmt_ns(c.t_ns), c.label, c.phase),
        StreamFormat::Binary => {
            let mut rec = [0u8; 10];
            rec[..8].copy_from_slice(&c.t_ns.to_le_bytes());
            rec[8] = c.label as u8;
            rec[9] = u8::from(c.phase == Phase::On);
            w.write_all(&rec)
        }
    }
}

pub fn write_click_stream<W: Write>(w: &mut W, stream: &ClickStream, provenance: &Provenance) -> Result<()> {
    write_stream_header(w, StreamFormat::Text, provenance, stream.clicks.len() as u64)?;
    for c in &stream.clicks {
        write_record(w, StreamFormat::Text, c)?;
    }
    Ok(())
}

pub fn write_click_stream_binary<W: Write>(
    w: &mut W,
    stream: &ClickStream,
    provenance: &Provenance,
) -> Result<()> {
    write_stream_header(w, StreamFormat::Binary, provenance, stream.clicks.len() as u64)?;
    for c in &stream.clicks {
        write_record(w, StreamFormat::Binary, c)?;
    }
    Ok(())
}

/// Writes clicks as the generator emits them. The header needs the total up
/// front, which a counting pass over the same seed provides.
pub struct ClickWriter<W: Write> {
    inner: W,
    format: StreamFormat,
    declared: u64,
    written: u64,
    error: Option<std::io::Error>,
}

impl<W: Write> ClickWriter<W> {
    pub fn new(mut inner: W, format: StreamFormat, provenance: &Provenance, clicks: u64) -> Result<Self> {
        write_stream_header(&mut inner, format, provenance, clicks)?;
        Ok(Self {
            inner,
            format,
            declared: clicks,
            written: 0,
            error: None,
        })
    }

    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        if self.written != self.declared {
            return Err(Error::Mismatch(format!(
                "header declares {} clicks, {} written",
                self.declared, self.written
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

impl<W: Write> ClickSink for ClickWriter<W> {
    fn push(&mut self, click: ClickRecord, _block: &Block) {
        if self.error.is_some() {
            return;
        }
        match write_record(&mut self.inner, self.format, &click) {
            Ok(()) => self.written += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

/// Reads either format, detected from the first bytes.
pub fn read_click_stream<R: BufRead>(r: &mut R) -> Result<(ClickStream, Provenance)> {
    let mut clicks = Vec::new();
    let provenance = for_each_click(r, |c| {
        clicks.push(*c);
        Ok(())
    })?;
    Ok((
        ClickStream {
            seed: provenance.seed,
            clicks,
        },
        provenance,
    ))
}

/// Visits every click in file order without holding the stream in memory.
/// Checks that times never decrease and that the count matches the header.
pub fn for_each_click<R, F>(r: &mut R, mut f: F) -> Result<Provenance>
where
    R: BufRead,
    F: FnMut(&ClickRecord) -> Result<()>,
{
    let mut last = 0u64;
    let mut n = 0usize;
    let mut visit = |c: ClickRecord, line: usize| -> Result<()> {
        if c.t_ns < last {
            return Err(Error::Format {
                line,
                reason: "click times decrease".into(),
            });
        }
        last = c.t_ns;
        n += 1;
        f(&c)
    };
    let head = r.fill_buf()?;
    if head.starts_with(BINARY_MAGIC) {
        read_binary(r, &mut visit)
    } else {
        read_text(r, &mut visit)
    }
}

fn read_text<R: BufRead>(r: &mut R, visit: &mut dyn FnMut(ClickRecord, usize) -> Result<()>) -> Result<Provenance> {
    let (fields, first, mut line_no) = read_header(r, MAGIC)?;
    let provenance = provenance_from(&fields)?;
    let declared: u64 = header_field(&fields, "clicks")?.parse().map_err(|_| Error::Format {
        line: 0,
        reason: "bad click count".into(),
    })?;
    if first.as_deref() != Some(COLUMNS) {
        return Err(Error::Format {
            line: line_no,
            reason: format!("expected column header `{COLUMNS}`"),
        });
    }
    let mut count = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let text = line.trim_end_matches(['\n', '\r']);
        if text.is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Format { line: line_no, reason };
        let mut cols = text.split(',');
        let (Some(t), Some(l), Some(p), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad(format!("expected 3 columns in `{text}`")));
        };
        let click = ClickRecord {
            t_ns: parse_ns(t).map_err(bad)?,
            label: l.parse().map_err(|_| bad(format!("bad label `{l}`")))?,
            phase: p.parse().map_err(bad)?,
        };
        count += 1;
        visit(click, line_no)?;
    }
    if count != declared {
        return Err(Error::Format {
            line: line_no,
            reason: format!("header declares {declared} clicks, found {count}"),
        });
    }
    Ok(provenance)
}

fn read_binary<R: Read>(r: &mut R, visit: &mut dyn FnMut(ClickRecord, usize) -> Result<()>) -> Result<Provenance> {
    let truncated = |what: &str| Error::Format {
        line: 0,
        reason: format!("binary stream truncated in {what}"),
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|_| truncated("header length"))?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut header).map_err(|_| truncated("header"))?;
    let header: BinaryHeader = serde_json::from_slice(&header).map_err(|e| Error::Format {
        line: 0,
        reason: format!("bad binary header: {e}"),
    })?;
    let mut rec = [0u8; 10];
    for i in 0..header.clicks {
        r.read_exact(&mut rec).map_err(|_| truncated("records"))?;
        let phase = match rec[9] {
            0 => Phase::Off,
            1 => Phase::On,
            v => {
                return Err(Error::Format {
                    line: 0,
                    reason: format!("bad phase byte {v}"),
                })
            }
        };
        let click = ClickRecord {
            t_ns: u64::from_le_bytes(rec[..8].try_into().expect("8 bytes")),
            label: rec[8] as i8,
            phase,
        };
        visit(click, i as usize + 1)?;
    }
    if r.read(&mut rec)? != 0 {
        return Err(Error::Format {
            line: 0,
            reason: "trailing bytes after the last record".into(),
        });
    }
    Ok(Provenance {
        digest: header.digest,
        seed: header.seed,
    })
}

//! Schedule export as delimited text.
//!
//! The header records the inputs the schedule was built from; reading rebuilds
//! the schedule from them and checks every row against the rebuilt blocks.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::{assemble, Block, ProtocolSchedule, ProtocolTimings, TuningPlan};
use crate::error::{Error, Result};
use crate::format::{fmt_ns, header_field, provenance_from, read_header, write_header, Provenance};

const MAGIC: &str = "haloscope-schedule v1";
const COLUMNS: &str = "start_s,duration_s,label,phase,kind,step,nu_c_hz";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Inputs {
    mean_cycle_ns: u64,
    n_super_cycles: u64,
    plan: TuningPlan,
    timings: ProtocolTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleHeader {
    pub provenance: Provenance,
    pub n_blocks: u64,
}

fn row(schedule: &ProtocolSchedule, b: &Block) -> String {
    let step = b.step.map_or_else(|| "-".to_string(), |s| s.to_string());
    format!(
        "{},{},{},{},{},{},{:.3}",
        fmt_ns(b.start_ns),
        fmt_ns(b.duration_ns),
        b.label,
        b.phase,
        b.kind,
        step,
        schedule.nu_c(b.start_s())
    )
}

pub fn write_schedule<W: Write>(w: &mut W, schedule: &ProtocolSchedule, provenance: &Provenance) -> Result<()> {
    let inputs = Inputs {
        mean_cycle_ns: schedule.mean_cycle_ns,
        n_super_cycles: schedule.n_super_cycles,
        plan: schedule.plan,
        timings: schedule.timings.clone(),
    };
    let json = serde_json::to_string(&inputs).expect("schedule inputs serialize");
    write_header(
        w,
        MAGIC,
        &[
            ("digest", provenance.digest.clone()),
            ("seed", provenance.seed.to_string()),
            ("blocks", schedule.len().to_string()),
            ("inputs", json),
        ],
    )?;
    writeln!(w, "{COLUMNS}")?;
    for b in schedule.blocks() {
        writeln!(w, "{}", row(schedule, &b))?;
    }
    Ok(())
}

pub fn read_schedule<R: BufRead>(r: &mut R) -> Result<(ProtocolSchedule, ScheduleHeader)> {
    let (fields, first, line_no) = read_header(r, MAGIC)?;
    let provenance = provenance_from(&fields)?;
    let inputs: Inputs = serde_json::from_str(header_field(&fields, "inputs")?).map_err(|e| Error::Format {
        line: 0,
        reason: format!("bad schedule inputs: {e}"),
    })?;
    let n_blocks: u64 = header_field(&fields, "blocks")?.parse().map_err(|_| Error::Format {
        line: 0,
        reason: "bad block count".into(),
    })?;
    if first.as_deref() != Some(COLUMNS) {
        return Err(Error::Format {
            line: line_no,
            reason: format!("expected column header `{COLUMNS}`"),
        });
    }
    let schedule = assemble(
        inputs.mean_cycle_ns,
        &inputs.plan,
        &inputs.timings,
        inputs.n_super_cycles,
    )?;
    if schedule.len() != n_blocks {
        return Err(Error::Mismatch(format!(
            "header lists {n_blocks} blocks, inputs give {}",
            schedule.len()
        )));
    }
    verify_rows(r, &schedule, line_no)?;
    Ok((
        schedule,
        ScheduleHeader {
            provenance,
            n_blocks,
        },
    ))
}

fn verify_rows<R: BufRead>(r: &mut R, schedule: &ProtocolSchedule, mut line_no: usize) -> Result<()> {
    let mut blocks = schedule.blocks();
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
        let expect = blocks.next().ok_or_else(|| Error::Format {
            line: line_no,
            reason: "more rows than blocks".into(),
        })?;
        if text != row(schedule, &expect) {
            return Err(Error::Mismatch(format!(
                "row {line_no} `{text}` differs from the rebuilt schedule"
            )));
        }
    }
    if blocks.next().is_some() {
        return Err(Error::Format {
            line: line_no,
            reason: "schedule file is truncated".into(),
        });
    }
    Ok(())
}

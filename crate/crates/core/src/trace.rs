//! Per-packet trace of the studied queue, stored as CSV.
//!
//! Times are decimal seconds with nine fractional digits, so a trace read
//! back holds exactly the nanosecond values that were written.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::time::SimTime;

pub const TRACE_HEADER: &str = "time_s,event,pkt_id,flow,size_bytes,sojourn_s,qlen_bytes,qlen_pkts,gamma_s,epsilon";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceEvent {
    Enqueue,
    Dequeue,
    TailDrop,
    AqmDrop,
    Deliver,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Enqueue => "enqueue",
            TraceEvent::Dequeue => "dequeue",
            TraceEvent::TailDrop => "tail_drop",
            TraceEvent::AqmDrop => "aqm_drop",
            TraceEvent::Deliver => "deliver",
        }
    }
}

impl FromStr for TraceEvent {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "enqueue" => TraceEvent::Enqueue,
            "dequeue" => TraceEvent::Dequeue,
            "tail_drop" => TraceEvent::TailDrop,
            "aqm_drop" => TraceEvent::AqmDrop,
            "deliver" => TraceEvent::Deliver,
            _ => return Err(format!("unknown event '{s}'")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub time: SimTime,
    pub event: TraceEvent,
    pub pkt_id: u64,
    pub flow: u32,
    pub size_bytes: u32,
    /// Dequeue and aqm_drop rows only.
    pub sojourn: Option<SimTime>,
    /// Occupancy after the event.
    pub qlen_bytes: u64,
    pub qlen_pkts: u64,
    /// Slack estimate, nanosecond resolution.
    pub gamma: Option<SimTime>,
    pub epsilon: Option<f64>,
}

struct Opt<'a, T>(&'a Option<T>);

impl<T: fmt::Display> fmt::Display for Opt<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => v.fmt(f),
            None => Ok(()),
        }
    }
}

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},",
            self.time,
            self.event.as_str(),
            self.pkt_id,
            self.flow,
            self.size_bytes,
            Opt(&self.sojourn),
            self.qlen_bytes,
            self.qlen_pkts,
            Opt(&self.gamma),
        )?;
        if let Some(e) = self.epsilon {
            write!(f, "{e:.9}")?;
        }
        Ok(())
    }
}

impl TraceRow {
    fn parse(line: &str) -> std::result::Result<TraceRow, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(format!("expected 10 fields, got {}", fields.len()));
        }
        fn num<T: FromStr>(name: &str, s: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            s.parse().map_err(|e| format!("{name} '{s}': {e}"))
        }
        fn opt<T: FromStr>(name: &str, s: &str) -> std::result::Result<Option<T>, String>
        where
            T::Err: fmt::Display,
        {
            if s.is_empty() {
                Ok(None)
            } else {
                num(name, s).map(Some)
            }
        }
        Ok(TraceRow {
            time: num("time_s", fields[0])?,
            event: fields[1].parse()?,
            pkt_id: num("pkt_id", fields[2])?,
            flow: num("flow", fields[3])?,
            size_bytes: num("size_bytes", fields[4])?,
            sojourn: opt("sojourn_s", fields[5])?,
            qlen_bytes: num("qlen_bytes", fields[6])?,
            qlen_pkts: num("qlen_pkts", fields[7])?,
            gamma: opt("gamma_s", fields[8])?,
            epsilon: opt("epsilon", fields[9])?,
        })
    }
}

pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRow>> {
    let mut lines = r.lines();
    let header = lines.next().transpose().map_err(|e| Error::Trace { line: 1, msg: e.to_string() })?;
    if header.as_deref() != Some(TRACE_HEADER) {
        return Err(Error::Trace { line: 1, msg: "missing or unexpected header".into() });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Trace { line: i + 2, msg: e.to_string() })?;
        rows.push(TraceRow::parse(&line).map_err(|msg| Error::Trace { line: i + 2, msg })?);
    }
    Ok(rows)
}

/// Checks time order and that each packet follows one of
/// `enqueue dequeue deliver`, `enqueue aqm_drop`, `tail_drop` or `aqm_drop`.
pub fn check_lifecycles(rows: &[TraceRow]) -> std::result::Result<(), String> {
    use TraceEvent::*;
    let mut last: HashMap<u64, TraceEvent> = HashMap::new();
    let mut prev_time = SimTime::ZERO;
    for (i, r) in rows.iter().enumerate() {
        if r.time < prev_time {
            return Err(format!("row {i}: time goes backwards"));
        }
        prev_time = r.time;
        let before = last.get(&r.pkt_id).copied();
        let legal = matches!(
            (before, r.event),
            (None, Enqueue) | (None, TailDrop) | (None, AqmDrop) | (Some(Enqueue), Dequeue) | (Some(Enqueue), AqmDrop) | (Some(Dequeue), Deliver)
        );
        if !legal {
            return Err(format!("row {i}: packet {} goes {:?} -> {}", r.pkt_id, before, r.event.as_str()));
        }
        last.insert(r.pkt_id, r.event);
    }
    Ok(())
}

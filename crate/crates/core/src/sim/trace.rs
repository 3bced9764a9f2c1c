use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

/// Kind tag of the record closing every complete trace.
pub const END_KIND: &str = "end";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: time goes backwards")]
    OutOfOrder { line: usize },
    #[error("trace is truncated (no end record)")]
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: u64,
    pub entity: String,
    pub kind: String,
    pub payload: Vec<(String, String)>,
}

impl TraceEvent {
    pub fn new(time: u64, entity: impl Into<String>, kind: impl Into<String>) -> Self {
        TraceEvent {
            time,
            entity: entity.into(),
            kind: kind.into(),
            payload: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.payload.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.payload.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn parse_line(line: &str, lineno: usize) -> Result<Self, TraceError> {
        let bad = |reason: &str| TraceError::Malformed {
            line: lineno,
            reason: reason.to_owned(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [time, entity, kind, payload] = cols[..] else {
            return Err(bad("expected 4 tab-separated columns"));
        };
        let time = time.parse().map_err(|_| bad("time is not an integer"))?;
        if entity.is_empty() || kind.is_empty() {
            return Err(bad("empty entity or kind"));
        }
        let mut ev = TraceEvent::new(time, entity, kind);
        if payload != "-" {
            for pair in payload.split(';') {
                let (k, v) = pair.split_once('=').ok_or_else(|| bad("payload entry without '='"))?;
                ev.payload.push((k.to_owned(), v.to_owned()));
            }
        }
        Ok(ev)
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t", self.time, self.entity, self.kind)?;
        if self.payload.is_empty() {
            return f.write_str("-");
        }
        for (i, (k, v)) in self.payload.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Ordered list of trace events, closed by an `end` record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, ev: TraceEvent) {
        debug_assert!(self.events.last().is_none_or(|l| l.time <= ev.time));
        self.events.push(ev);
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn is_closed(&self) -> bool {
        self.events.last().is_some_and(|e| e.kind == END_KIND)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for ev in &self.events {
            writeln!(w, "{ev}")?;
        }
        w.flush()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = Vec::new();
        self.write_tsv(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("trace is utf-8")
    }

    /// Parses a complete trace; anything after or missing the end record
    /// is rejected.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut trace = Trace::default();
        for (i, line) in text.lines().enumerate() {
            if trace.is_closed() {
                return Err(TraceError::Malformed {
                    line: i + 1,
                    reason: "record after end".into(),
                });
            }
            let ev = TraceEvent::parse_line(line, i + 1)?;
            if trace.events.last().is_some_and(|l| l.time > ev.time) {
                return Err(TraceError::OutOfOrder { line: i + 1 });
            }
            trace.events.push(ev);
        }
        if !trace.is_closed() {
            return Err(TraceError::Truncated);
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultSummary {
    pub index: usize,
    pub kind: String,
    pub node: String,
    pub time: u64,
    pub latency: Option<u64>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Summary {
    pub faults: Vec<FaultSummary>,
    /// Non-normal map updates plus inferences.
    pub alerts: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.faults {
            let latency = s.latency.map_or_else(|| "-".to_owned(), |l| l.to_string());
            writeln!(
                f,
                "fault {} {} {} t={} latency={} path={}",
                s.index,
                s.kind,
                s.node,
                s.time,
                latency,
                s.path.as_deref().unwrap_or("-")
            )?;
        }
        writeln!(f, "{} faults, {} alerts", self.faults.len(), self.alerts)
    }
}

/// Per-fault awareness latency and path, from injection to the first
/// matching map update.
pub fn summarize(trace: &Trace) -> Result<Summary, TraceError> {
    let mut summary = Summary::default();
    let field = |ev: &TraceEvent, key: &str| {
        ev.get(key).map(str::to_owned).ok_or_else(|| TraceError::Malformed {
            line: 0,
            reason: format!("{} record without {key}", ev.kind),
        })
    };
    let index = |ev: &TraceEvent, key: &str| -> Result<usize, TraceError> {
        field(ev, key)?.parse().map_err(|_| TraceError::Malformed {
            line: 0,
            reason: format!("{} record with bad {key}", ev.kind),
        })
    };
    for ev in &trace.events {
        match ev.kind.as_str() {
            "fault" => summary.faults.push(FaultSummary {
                index: index(ev, "i")?,
                kind: field(ev, "kind")?,
                node: field(ev, "node")?,
                time: ev.time,
                latency: None,
                path: None,
            }),
            "awareness" => {
                let i = index(ev, "fault")?;
                let latency = index(ev, "latency")? as u64;
                let path = field(ev, "path")?;
                if let Some(s) = summary.faults.iter_mut().find(|s| s.index == i) {
                    if s.latency.is_none() {
                        s.latency = Some(latency);
                        s.path = Some(path);
                    }
                }
            }
            "supervisor.update" if ev.get("status") != Some("NORMAL") => summary.alerts += 1,
            "inference" => summary.alerts += 1,
            _ => {}
        }
    }
    Ok(summary)
}

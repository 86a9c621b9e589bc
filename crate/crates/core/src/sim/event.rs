use std::fmt;
use std::io::{self, Write};

/// Source ids in events are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    EnergyArrival,
    Overflow,
    Attempt(usize),
    Erasure(usize),
    Success(usize),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::EnergyArrival => "EnergyArrival",
            EventKind::Overflow => "Overflow",
            EventKind::Attempt(_) => "Attempt",
            EventKind::Erasure(_) => "Erasure",
            EventKind::Success(_) => "Success",
        }
    }

    pub fn source(&self) -> Option<usize> {
        match *self {
            EventKind::Attempt(s) | EventKind::Erasure(s) | EventKind::Success(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl fmt::Display for Event {
    /// `time<TAB>kind<TAB>source_id`, time with 9 decimals, `-` for no source.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}\t{}\t", self.time, self.kind.name())?;
        match self.kind.source() {
            Some(s) => write!(f, "{s}"),
            None => f.write_str("-"),
        }
    }
}

/// Full event history of a traced run, in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, time: f64, kind: EventKind) {
        self.events.push(Event { time, kind });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn attempt_times(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Attempt(_)))
            .map(|e| e.time)
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("event log is ASCII")
    }

    /// Replays the log against the unit-battery rules and returns the first
    /// violation found:
    /// * times are nondecreasing,
    /// * every arrival either charges an empty battery or is followed by an
    ///   `Overflow` at the same instant,
    /// * every attempt spends a stored unit,
    /// * every attempt is followed at the same time by exactly one outcome
    ///   for the same source.
    pub fn audit(&self) -> Result<AuditSummary, String> {
        let mut level = 0u8;
        let mut summary = AuditSummary::default();
        let ev = &self.events;
        let mut i = 0;
        let mut last_time = f64::NEG_INFINITY;
        while i < ev.len() {
            let e = ev[i];
            if e.time < last_time {
                return Err(format!("event {i}: time goes backwards ({} < {last_time})", e.time));
            }
            last_time = e.time;
            match e.kind {
                EventKind::EnergyArrival => {
                    summary.arrivals += 1;
                    let overflow = ev.get(i + 1).map(|n| n.kind) == Some(EventKind::Overflow);
                    if overflow {
                        if level != 1 {
                            return Err(format!("event {i}: overflow with battery at {level}"));
                        }
                        summary.overflows += 1;
                        i += 1;
                    } else {
                        if level != 0 {
                            return Err(format!("event {i}: arrival into a full battery without overflow"));
                        }
                        level = 1;
                    }
                }
                EventKind::Overflow => return Err(format!("event {i}: overflow without an arrival")),
                EventKind::Attempt(s) => {
                    if level != 1 {
                        return Err(format!("event {i}: attempt with an empty battery"));
                    }
                    level = 0;
                    summary.attempts += 1;
                    let next = ev.get(i + 1).ok_or_else(|| format!("event {i}: attempt without outcome"))?;
                    if next.time != e.time {
                        return Err(format!("event {i}: outcome not simultaneous with attempt"));
                    }
                    match next.kind {
                        EventKind::Success(t) if t == s => summary.successes += 1,
                        EventKind::Erasure(t) if t == s => {}
                        other => return Err(format!("event {i}: attempt followed by {other:?}")),
                    }
                    i += 1;
                }
                EventKind::Erasure(_) | EventKind::Success(_) => {
                    return Err(format!("event {i}: outcome without an attempt"))
                }
            }
            summary.max_level = summary.max_level.max(level);
            i += 1;
        }
        Ok(summary)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditSummary {
    pub arrivals: u64,
    pub overflows: u64,
    pub attempts: u64,
    pub successes: u64,
    pub max_level: u8,
}

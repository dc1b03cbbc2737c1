use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::net::Ipv4Addr;

use chrono::DateTime;
use log::warn;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketEvent {
    pub ts_ns: u64,
    pub src: Ipv4Addr,
}

impl PacketEvent {
    pub fn parse(line: &str, lineno: usize) -> Result<Self, IngestError> {
        let err = |msg: String| IngestError::Parse { line: lineno, msg };
        let (ts, src) = line
            .split_once('\t')
            .ok_or_else(|| err("expected epoch_ns<TAB>src_ip".into()))?;
        let ts_ns = ts
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid epoch_ns {ts:?}")))?;
        let src = src
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid IPv4 address {src:?}")))?;
        Ok(Self { ts_ns, src })
    }
}

/// Per-source packet counts for one constant-packet-count window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAggregate {
    /// UTC start label `YYYYMMDD-HHMMSS`, suffixed `_2`, `_3`, ... on collision.
    pub window_id: String,
    /// Packets in this window.
    pub nv: u64,
    pub counts: BTreeMap<Ipv4Addr, u64>,
    pub start_ns: u64,
    pub end_ns: u64,
    pub duration_sec: f64,
    /// Short final window; holds fewer than the configured window size.
    pub partial: bool,
}

impl WindowAggregate {
    /// Builds a single window from per-source totals.
    pub fn from_counts(
        window_id: impl Into<String>,
        counts: BTreeMap<Ipv4Addr, u64>,
        start_ns: u64,
        end_ns: u64,
        configured_nv: u64,
    ) -> Self {
        let nv = counts.values().sum();
        Self {
            window_id: window_id.into(),
            nv,
            counts,
            start_ns,
            end_ns,
            duration_sec: end_ns.saturating_sub(start_ns) as f64 / 1e9,
            partial: nv < configured_nv,
        }
    }

    pub fn n_sources(&self) -> usize {
        self.counts.len()
    }

    /// Same window with every source passed through `f`.
    pub fn map_sources<F>(&self, mut f: F) -> Self
    where
        F: FnMut(Ipv4Addr) -> Ipv4Addr,
    {
        let mut counts = BTreeMap::new();
        for (&src, &d) in &self.counts {
            *counts.entry(f(src)).or_insert(0) += d;
        }
        Self {
            counts,
            ..self.clone()
        }
    }
}

pub fn window_label(ts_ns: u64) -> String {
    let secs = (ts_ns / 1_000_000_000) as i64;
    let nanos = (ts_ns % 1_000_000_000) as u32;
    DateTime::from_timestamp(secs, nanos)
        .map(|t| t.format("%Y%m%d-%H%M%S").to_string())
        .unwrap_or_else(|| format!("ts{ts_ns}"))
}

/// Streams constant-packet-count windows out of an `epoch_ns<TAB>src` log.
pub struct WindowReader<R> {
    lines: std::io::Lines<R>,
    window_size: u64,
    lineno: usize,
    used_labels: HashMap<String, usize>,
    done: bool,
}

impl<R: BufRead> WindowReader<R> {
    pub fn new(input: R, window_size: u64) -> Result<Self, IngestError> {
        if window_size == 0 {
            return Err(IngestError::InvalidConfig("window size must be >= 1".into()));
        }
        Ok(Self {
            lines: input.lines(),
            window_size,
            lineno: 0,
            used_labels: HashMap::new(),
            done: false,
        })
    }

    fn label(&mut self, start_ns: u64) -> String {
        let base = window_label(start_ns);
        let n = self.used_labels.entry(base.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            base
        } else {
            format!("{base}_{n}")
        }
    }

    fn read_window(&mut self) -> Result<Option<WindowAggregate>, IngestError> {
        let mut counts: BTreeMap<Ipv4Addr, u64> = BTreeMap::new();
        let mut taken = 0u64;
        let (mut first, mut last, mut lo, mut hi) = (0u64, 0u64, u64::MAX, 0u64);
        let mut reordered = 0usize;
        while taken < self.window_size {
            let Some(line) = self.lines.next() else {
                self.done = true;
                break;
            };
            let line = line?;
            self.lineno += 1;
            if line.trim().is_empty() {
                continue;
            }
            let ev = PacketEvent::parse(&line, self.lineno)?;
            if taken == 0 {
                first = ev.ts_ns;
            } else if ev.ts_ns < last {
                if reordered == 0 {
                    warn!("line {}: timestamp goes backwards", self.lineno);
                }
                reordered += 1;
            }
            last = ev.ts_ns;
            lo = lo.min(ev.ts_ns);
            hi = hi.max(ev.ts_ns);
            *counts.entry(ev.src).or_insert(0) += 1;
            taken += 1;
        }
        if reordered > 1 {
            warn!("{reordered} out-of-order timestamps in window starting at {first}");
        }
        if taken == 0 {
            return Ok(None);
        }
        Ok(Some(WindowAggregate {
            window_id: self.label(first),
            nv: taken,
            counts,
            start_ns: lo,
            end_ns: hi,
            duration_sec: (hi - lo) as f64 / 1e9,
            partial: taken < self.window_size,
        }))
    }
}

impl<R: BufRead> Iterator for WindowReader<R> {
    type Item = Result<WindowAggregate, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_window() {
            Ok(Some(w)) => Some(Ok(w)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn parse_packet_log<R: BufRead>(input: R, window_size: u64) -> Result<Vec<WindowAggregate>, IngestError> {
    WindowReader::new(input, window_size)?.collect()
}

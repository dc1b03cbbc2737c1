//! Cross-correlation of a packet window with honeyfarm enrichment.
//!
//! Sources seen in both datasets become rows of the `meta` array with one
//! column per `variable|value`; sources seen only by the telescope go to
//! `no_grey` with a single `srcPacket|<bin>` column. Enrichment-only
//! sources are dropped.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::Timelike;
use log::warn;

use crate::anon::Anonymizer;
use crate::assoc::{col_key, AssocArray, AssocError, Triple};
use crate::distfit::log2_bin;
use crate::ingest::{format_timestamp, EnrichmentRecord, WindowAggregate, UNKNOWN};

#[derive(Debug, thiserror::Error)]
pub enum JoinError {
    #[error("source {0} has a zero packet count")]
    ZeroCount(Ipv4Addr),
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

fn src_bin(src: Ipv4Addr, d: u64) -> Result<String, JoinError> {
    log2_bin(d).map(|b| b.to_string()).map_err(|_| JoinError::ZeroCount(src))
}

/// The nine per-source variables of the metadata matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    Actor,
    Asn,
    Classification,
    Cve,
    LastSeen,
    Os,
    ProtocolPort,
    Spoofable,
    SrcPacket,
}

impl Variable {
    pub const ALL: [Variable; 9] = [
        Variable::Actor,
        Variable::Asn,
        Variable::Classification,
        Variable::Cve,
        Variable::LastSeen,
        Variable::Os,
        Variable::ProtocolPort,
        Variable::Spoofable,
        Variable::SrcPacket,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Actor => "actor",
            Self::Asn => "asn",
            Self::Classification => "classification",
            Self::Cve => "cve",
            Self::LastSeen => "last_seen",
            Self::Os => "os",
            Self::ProtocolPort => "protocol_port",
            Self::Spoofable => "spoofable",
            Self::SrcPacket => "srcPacket",
        }
    }

    /// Column-key prefix, e.g. `os|`.
    pub fn prefix(self) -> String {
        format!("{}|", self.as_str())
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variable {s:?}"))
    }
}

/// Derived UTC hour-of-day of `last_seen`, stored next to the full timestamp.
pub const LAST_SEEN_HOUR: &str = "last_seen_hour";

#[derive(Debug, Clone, PartialEq)]
pub struct JoinedWindow {
    pub window_id: String,
    pub meta: AssocArray,
    pub no_grey: AssocArray,
}

impl JoinedWindow {
    pub fn meta_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.meta.tsv", self.window_id))
    }

    pub fn nogrey_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.nogrey.tsv", self.window_id))
    }

    /// Writes `<id>.meta.tsv` and `<id>.nogrey.tsv` into `dir`.
    pub fn write_tsv(&self, dir: &Path) -> Result<(), AssocError> {
        self.meta
            .write_tsv(BufWriter::new(File::create(self.meta_path(dir))?))?;
        self.no_grey
            .write_tsv(BufWriter::new(File::create(self.nogrey_path(dir))?))?;
        Ok(())
    }
}

fn newer(a: &EnrichmentRecord, b: &EnrichmentRecord) -> bool {
    // Latest last_seen wins; a full-record comparison settles exact ties so
    // the outcome never depends on input order.
    (a.last_seen, a) > (b.last_seen, b)
}

/// One record per address, keeping the most recently seen duplicate.
pub fn dedup_enrichment<'a, I>(records: I) -> BTreeMap<Ipv4Addr, EnrichmentRecord>
where
    I: IntoIterator<Item = &'a EnrichmentRecord>,
{
    let mut out: BTreeMap<Ipv4Addr, EnrichmentRecord> = BTreeMap::new();
    let mut dups = 0usize;
    for rec in records {
        match out.get_mut(&rec.ip) {
            Some(kept) => {
                dups += 1;
                if newer(rec, kept) {
                    *kept = rec.clone();
                }
            }
            None => {
                out.insert(rec.ip, rec.clone());
            }
        }
    }
    if dups > 0 {
        warn!("{dups} duplicate enrichment records resolved by latest last_seen");
    }
    out
}

fn record_triples(row: &str, rec: &EnrichmentRecord, bin: &str, out: &mut Vec<Triple>) {
    let mut push = |var: &str, value: &str| out.push(Triple::new(row, col_key(var, value), 1));
    push(Variable::Actor.as_str(), &rec.actor);
    push(Variable::Asn.as_str(), &rec.asn);
    push(Variable::Classification.as_str(), rec.classification.as_str());
    for cve in &rec.cves {
        push(Variable::Cve.as_str(), cve);
    }
    match &rec.last_seen {
        Some(t) => {
            push(Variable::LastSeen.as_str(), &format_timestamp(t));
            push(LAST_SEEN_HOUR, &format!("{:02}", t.hour()));
        }
        None => push(Variable::LastSeen.as_str(), UNKNOWN),
    }
    push(Variable::Os.as_str(), &rec.os);
    for port in &rec.ports {
        push(Variable::ProtocolPort.as_str(), port);
    }
    if rec.spoofable {
        push(Variable::Spoofable.as_str(), "1");
    }
    push(Variable::SrcPacket.as_str(), bin);
}

/// Joins a window with enrichment records. With `anon`, both sides are
/// given as raw addresses and anonymized here; without it they must already
/// share an address space.
pub fn join(
    window: &WindowAggregate,
    enrichment: &[EnrichmentRecord],
    anon: Option<&Anonymizer>,
) -> Result<JoinedWindow, JoinError> {
    let (window, enrichment) = match anon {
        Some(a) => {
            let w = window.map_sources(|ip| a.anonymize_ip(ip));
            let e: Vec<EnrichmentRecord> = enrichment
                .iter()
                .map(|r| EnrichmentRecord {
                    ip: a.anonymize_ip(r.ip),
                    ..r.clone()
                })
                .collect();
            (std::borrow::Cow::Owned(w), std::borrow::Cow::Owned(e))
        }
        None => (std::borrow::Cow::Borrowed(window), std::borrow::Cow::Borrowed(enrichment)),
    };
    let records = dedup_enrichment(enrichment.iter());

    let mut meta = Vec::new();
    let mut no_grey = Vec::new();
    for (&src, &d) in &window.counts {
        let row = src.to_string();
        let bin = src_bin(src, d)?;
        match records.get(&src) {
            Some(rec) => record_triples(&row, rec, &bin, &mut meta),
            None => no_grey.push(Triple::new(row, col_key(Variable::SrcPacket.as_str(), &bin), 1)),
        }
    }
    Ok(JoinedWindow {
        window_id: window.window_id.clone(),
        meta: AssocArray::build(meta)?,
        no_grey: AssocArray::build(no_grey)?,
    })
}

/// Among sources with `d > sqrt(nv)`, the fraction that have enrichment.
/// `None` when no source clears the threshold.
pub fn overlap_fraction(
    window: &WindowAggregate,
    enrichment: &[EnrichmentRecord],
    anon: Option<&Anonymizer>,
    nv: u64,
) -> Option<f64> {
    let enriched: HashSet<Ipv4Addr> = enrichment
        .iter()
        .map(|r| anon.map_or(r.ip, |a| a.anonymize_ip(r.ip)))
        .collect();
    let (mut high, mut hit) = (0usize, 0usize);
    for (&src, &d) in &window.counts {
        // d > sqrt(nv)  <=>  d^2 > nv, exact in integers.
        if u128::from(d) * u128::from(d) > u128::from(nv) {
            high += 1;
            let key = anon.map_or(src, |a| a.anonymize_ip(src));
            if enriched.contains(&key) {
                hit += 1;
            }
        }
    }
    (high > 0).then(|| hit as f64 / high as f64)
}

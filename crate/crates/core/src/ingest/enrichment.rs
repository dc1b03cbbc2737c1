use std::fmt;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Longest port list kept per record.
pub const MAX_PORTS: usize = 5;

pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Malicious,
    Benign,
    Unknown,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Malicious => "malicious",
            Self::Benign => "benign",
            Self::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "malicious" => Ok(Self::Malicious),
            "benign" => Ok(Self::Benign),
            "unknown" => Ok(Self::Unknown),
            other => Err(format!("unknown classification {other:?}")),
        }
    }
}

/// One honeyfarm metadata record for a source address.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EnrichmentRecord {
    pub ip: Ipv4Addr,
    pub actor: String,
    pub classification: Classification,
    pub cves: Vec<String>,
    pub os: String,
    pub asn: String,
    pub last_seen: Option<DateTime<Utc>>,
    pub ports: Vec<String>,
    pub spoofable: bool,
}

impl EnrichmentRecord {
    pub fn minimal(ip: Ipv4Addr, classification: Classification) -> Self {
        Self {
            ip,
            actor: UNKNOWN.into(),
            classification,
            cves: Vec::new(),
            os: UNKNOWN.into(),
            asn: UNKNOWN.into(),
            last_seen: None,
            ports: Vec::new(),
            spoofable: false,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if !self.cves.is_empty() && self.classification != Classification::Malicious {
            return Err(format!(
                "{} record carries CVEs; only malicious records may",
                self.classification
            ));
        }
        if self.ports.len() > MAX_PORTS {
            return Err(format!("{} ports exceeds the limit of {MAX_PORTS}", self.ports.len()));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawRecord {
    ip: String,
    actor: Option<String>,
    classification: Option<String>,
    cve: Option<Vec<String>>,
    os: Option<String>,
    asn: Option<String>,
    last_seen: Option<String>,
    ports: Option<Vec<String>>,
    spoofable: Option<bool>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    ip: String,
    actor: &'a str,
    classification: Classification,
    cve: &'a [String],
    os: &'a str,
    asn: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    last_seen: Option<String>,
    ports: &'a [String],
    spoofable: bool,
}

/// ISO-8601 UTC timestamp; offsets are converted, zone-less values are
/// taken as UTC.
pub fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
        .map(|t| t.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn or_unknown(v: Option<String>) -> String {
    match v {
        Some(s) if !s.trim().is_empty() => s,
        _ => UNKNOWN.to_string(),
    }
}

pub fn parse_record(line: &str, lineno: usize) -> Result<EnrichmentRecord, IngestError> {
    let err = |msg: String| IngestError::Parse { line: lineno, msg };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
    let ip = raw
        .ip
        .parse()
        .map_err(|_| err(format!("invalid IPv4 address {:?}", raw.ip)))?;
    let classification = raw
        .classification
        .ok_or_else(|| err("missing classification".into()))?
        .parse()
        .map_err(err)?;
    let last_seen = match raw.last_seen {
        None => None,
        Some(s) => Some(parse_timestamp(&s).ok_or_else(|| err(format!("unparseable last_seen {s:?}")))?),
    };
    let mut ports = raw.ports.unwrap_or_default();
    ports.truncate(MAX_PORTS);
    let rec = EnrichmentRecord {
        ip,
        actor: or_unknown(raw.actor),
        classification,
        cves: raw.cve.unwrap_or_default(),
        os: or_unknown(raw.os),
        asn: or_unknown(raw.asn),
        last_seen,
        ports,
        spoofable: raw.spoofable.unwrap_or(false),
    };
    rec.check()
        .map_err(|msg| IngestError::Invariant { line: lineno, msg })?;
    Ok(rec)
}

pub fn parse_enrichment<R: BufRead>(input: R) -> Result<Vec<EnrichmentRecord>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn record_to_json(rec: &EnrichmentRecord) -> String {
    let out = OutRecord {
        ip: rec.ip.to_string(),
        actor: &rec.actor,
        classification: rec.classification,
        cve: &rec.cves,
        os: &rec.os,
        asn: &rec.asn,
        last_seen: rec.last_seen.as_ref().map(format_timestamp),
        ports: &rec.ports,
        spoofable: rec.spoofable,
    };
    serde_json::to_string(&out).expect("record serializes")
}

pub fn write_enrichment<W: Write>(records: &[EnrichmentRecord], mut out: W) -> std::io::Result<()> {
    for rec in records {
        writeln!(out, "{}", record_to_json(rec))?;
    }
    out.flush()
}

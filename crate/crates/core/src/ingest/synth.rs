//! Synthetic packet and enrichment datasets with known ground truth.
//!
//! Per-source packet counts are Zipf-Mandelbrot draws supported on
//! `1..=nv`. The enriched subset is chosen by systematic sampling over the
//! sources ranked by packet count, so the requested overlap fraction holds
//! uniformly across the count distribution (in particular among the
//! high-frequency sources) rather than only on average.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::net::Ipv4Addr;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::enrichment::{write_enrichment, Classification, EnrichmentRecord, MAX_PORTS};
use super::packets::{window_label, WindowAggregate};
use super::IngestError;
use crate::distfit::{ZmParams, ZmSampler};

/// Port table entry that expands to a random unprivileged TCP port.
pub const RANDOM_PORT: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoricalTables {
    pub actor: Vec<(String, f64)>,
    pub classification: Vec<(Classification, f64)>,
    pub os: Vec<(String, f64)>,
    pub cve: Vec<(String, f64)>,
    pub ports: Vec<(String, f64)>,
    /// Probability that a malicious record carries CVEs.
    pub cve_rate: f64,
    pub spoofable_rate: f64,
    pub asn_count: usize,
    /// Rank weights `(rank + asn_delta)^-asn_alpha` over the ASN pool.
    pub asn_alpha: f64,
    pub asn_delta: f64,
}

fn table(entries: &[(&str, f64)]) -> Vec<(String, f64)> {
    entries.iter().map(|&(v, w)| (v.to_string(), w)).collect()
}

impl Default for CategoricalTables {
    fn default() -> Self {
        Self {
            actor: table(&[
                ("unknown", 0.99),
                ("Shodan.io", 0.003),
                ("Censys", 0.003),
                ("BinaryEdge", 0.002),
                ("Stretchoid", 0.002),
            ]),
            classification: vec![
                (Classification::Malicious, 0.59),
                (Classification::Unknown, 0.40),
                (Classification::Benign, 0.01),
            ],
            os: table(&[
                ("Windows 7/8", 0.36),
                ("unknown", 0.22),
                ("Linux 2.2-3.x", 0.14),
                ("Linux 3.11 and newer", 0.10),
                ("Linux 2.2.x-3.x (barebone)", 0.06),
                ("Windows XP", 0.04),
                ("Mac OS X", 0.03),
                ("FreeBSD", 0.03),
                ("Linux 2.4.x", 0.02),
            ]),
            cve: table(&[
                ("CVE-2017-0144", 0.90),
                ("CVE-2017-0145", 0.03),
                ("CVE-2020-0796", 0.02),
                ("CVE-2019-0708", 0.02),
                ("CVE-2014-6271", 0.01),
                ("CVE-2018-10562", 0.01),
                ("CVE-2017-17215", 0.01),
            ]),
            ports: table(&[
                ("TCP/445", 0.30),
                ("TCP/23", 0.18),
                ("TCP/80", 0.10),
                ("TCP/22", 0.08),
                ("TCP/8080", 0.06),
                ("TCP/3389", 0.05),
                ("TCP/443", 0.04),
                ("UDP/5060", 0.03),
                ("TCP/81", 0.02),
                ("UDP/53", 0.02),
                (RANDOM_PORT, 0.12),
            ]),
            cve_rate: 0.3,
            spoofable_rate: 0.35,
            asn_count: 2000,
            asn_alpha: 1.0,
            asn_delta: 0.72,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_sources: usize,
    /// Window packet count; also the upper end of the count support.
    pub nv: u64,
    pub alpha: f64,
    pub delta: f64,
    pub overlap_frac: f64,
    pub seed: u64,
    /// Seconds spanned by the packet log.
    pub time_window_sec: f64,
    pub start: DateTime<Utc>,
    /// Enrichment `last_seen` values fall in `[start - horizon, start + window]`.
    pub enrichment_horizon_days: f64,
    pub tables: CategoricalTables,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_sources: 10_000,
            nv: 1 << 20,
            alpha: 1.75,
            delta: 29.17,
            overlap_frac: 0.7,
            seed: 1,
            time_window_sec: 1594.0,
            start: Utc.with_ymd_and_hms(2020, 6, 17, 12, 0, 0).unwrap(),
            enrichment_horizon_days: 30.0,
            tables: CategoricalTables::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InvalidConfig(m));
        if self.n_sources == 0 {
            return bad("n_sources must be >= 1".into());
        }
        if self.nv == 0 {
            return bad("nv must be >= 1".into());
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be > 1, got {}", self.alpha));
        }
        if !(self.delta > -1.0 && self.delta.is_finite()) {
            return bad(format!("delta must be > -1, got {}", self.delta));
        }
        if !(0.0..=1.0).contains(&self.overlap_frac) {
            return bad(format!("overlap_frac must be in [0, 1], got {}", self.overlap_frac));
        }
        if !(self.time_window_sec >= 0.0 && self.enrichment_horizon_days >= 0.0) {
            return bad("time spans must be >= 0".into());
        }
        let t = &self.tables;
        for (name, ok) in [
            ("actor", weights_ok(&t.actor)),
            ("classification", weights_ok(&t.classification)),
            ("os", weights_ok(&t.os)),
            ("cve", weights_ok(&t.cve)),
            ("ports", weights_ok(&t.ports)),
        ] {
            if !ok {
                return bad(format!("{name} table needs nonnegative weights with a positive sum"));
            }
        }
        if !(0.0..=1.0).contains(&t.cve_rate) || !(0.0..=1.0).contains(&t.spoofable_rate) {
            return bad("rates must be in [0, 1]".into());
        }
        if t.asn_count == 0 || !(t.asn_alpha > 0.0) || !(t.asn_delta > -1.0) {
            return bad("asn pool needs asn_count >= 1, asn_alpha > 0, asn_delta > -1".into());
        }
        Ok(())
    }
}

fn weights_ok<T>(table: &[(T, f64)]) -> bool {
    table.iter().all(|e| e.1 >= 0.0 && e.1.is_finite()) && table.iter().map(|e| e.1).sum::<f64>() > 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub total_packets: u64,
    pub max_count: u64,
    pub overlap_count: usize,
    /// Enriched sources, sorted.
    pub overlap_sources: Vec<Ipv4Addr>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// Sources in generation order with their packet counts.
    pub sources: Vec<(Ipv4Addr, u64)>,
    pub enrichment: Vec<EnrichmentRecord>,
    pub truth: GroundTruth,
    shuffle_seed: u64,
}

struct Picker<T> {
    values: Vec<T>,
    index: WeightedIndex<f64>,
}

impl<T: Clone> Picker<T> {
    fn new(table: &[(T, f64)]) -> Self {
        Self {
            values: table.iter().map(|e| e.0.clone()).collect(),
            index: WeightedIndex::new(table.iter().map(|e| e.1)).expect("validated weights"),
        }
    }

    fn pick<R: Rng>(&self, rng: &mut R) -> T {
        self.values[self.index.sample(rng)].clone()
    }
}

const WELL_KNOWN_ASNS: [u32; 8] = [4134, 4837, 3462, 17488, 9009, 14061, 16276, 6939];

fn asn_label(rank: usize) -> String {
    match WELL_KNOWN_ASNS.get(rank) {
        Some(n) => format!("AS{n}"),
        None => format!("AS{}", 20_000 + rank),
    }
}

pub fn gen_synthetic(cfg: &SynthConfig) -> Result<SyntheticDataset, IngestError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut seen = HashSet::with_capacity(cfg.n_sources);
    let mut addrs = Vec::with_capacity(cfg.n_sources);
    while addrs.len() < cfg.n_sources {
        let a = Ipv4Addr::from(rng.random::<u32>());
        if seen.insert(a) {
            addrs.push(a);
        }
    }

    let sampler = ZmSampler::new(&ZmParams::new(cfg.alpha, cfg.delta, cfg.nv)?)?;
    let sources: Vec<(Ipv4Addr, u64)> = addrs
        .into_iter()
        .map(|a| (a, sampler.sample(&mut rng)))
        .collect();

    // Rank by count (descending, random tie order), then keep rank i when
    // round((i + 1) f) advances past round(i f).
    let mut ranked: Vec<(u64, u64, usize)> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| (s.1, rng.random::<u64>(), i))
        .collect();
    ranked.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let f = cfg.overlap_frac;
    let mut chosen: Vec<usize> = ranked
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let i = *i as f64;
            ((i + 1.0) * f + 0.5).floor() > (i * f + 0.5).floor()
        })
        .map(|(_, r)| r.2)
        .collect();
    chosen.sort_unstable();

    let t = &cfg.tables;
    let actors = Picker::new(&t.actor);
    let classes = Picker::new(&t.classification);
    let oses = Picker::new(&t.os);
    let cves = Picker::new(&t.cve);
    let ports = Picker::new(&t.ports);
    let asn_weights: Vec<(usize, f64)> = (0..t.asn_count)
        .map(|r| (r, (r as f64 + 1.0 + t.asn_delta).powf(-t.asn_alpha)))
        .collect();
    let asns = Picker::new(&asn_weights);

    let horizon = Duration::milliseconds((cfg.enrichment_horizon_days * 86_400_000.0) as i64);
    let window = Duration::milliseconds((cfg.time_window_sec * 1000.0) as i64);
    let earliest = cfg.start - horizon;
    let span_ms = (horizon + window).num_milliseconds().max(0);

    let mut enrichment = Vec::with_capacity(chosen.len());
    for &i in &chosen {
        let classification = classes.pick(&mut rng);
        let mut rec = EnrichmentRecord::minimal(sources[i].0, classification);
        rec.actor = actors.pick(&mut rng);
        rec.os = oses.pick(&mut rng);
        rec.asn = asn_label(asns.pick(&mut rng));
        if classification == Classification::Malicious && rng.random::<f64>() < t.cve_rate {
            let k = rng.random_range(1..=2);
            for _ in 0..8 {
                let c = cves.pick(&mut rng);
                if !rec.cves.contains(&c) {
                    rec.cves.push(c);
                }
                if rec.cves.len() == k {
                    break;
                }
            }
        }
        let k = rng.random_range(1..=MAX_PORTS);
        for _ in 0..4 * MAX_PORTS {
            let mut p = ports.pick(&mut rng);
            if p == RANDOM_PORT {
                p = format!("TCP/{}", rng.random_range(1024..=65535u32));
            }
            if !rec.ports.contains(&p) {
                rec.ports.push(p);
            }
            if rec.ports.len() == k {
                break;
            }
        }
        rec.spoofable = rng.random::<f64>() < t.spoofable_rate;
        let offset = if span_ms > 0 { rng.random_range(0..=span_ms) } else { 0 };
        // Whole seconds keep the JSON form short and round-trippable.
        let ts = earliest + Duration::milliseconds(offset);
        rec.last_seen = DateTime::from_timestamp(ts.timestamp(), 0);
        enrichment.push(rec);
    }

    let mut overlap_sources: Vec<Ipv4Addr> = enrichment.iter().map(|r| r.ip).collect();
    overlap_sources.sort_unstable();
    let truth = GroundTruth {
        config: cfg.clone(),
        total_packets: sources.iter().map(|s| s.1).sum(),
        max_count: sources.iter().map(|s| s.1).max().unwrap_or(0),
        overlap_count: overlap_sources.len(),
        overlap_sources,
    };
    let shuffle_seed = rng.random();
    Ok(SyntheticDataset {
        sources,
        enrichment,
        truth,
        shuffle_seed,
    })
}

impl SyntheticDataset {
    pub fn counts(&self) -> BTreeMap<Ipv4Addr, u64> {
        self.sources.iter().copied().collect()
    }

    fn start_ns(&self) -> u64 {
        self.truth
            .config
            .start
            .timestamp_nanos_opt()
            .map_or(0, |n| n.max(0) as u64)
    }

    /// All packets as one window, as the packet log would aggregate if the
    /// window size covered the whole log.
    pub fn single_window(&self) -> WindowAggregate {
        let start = self.start_ns();
        let end = start + (self.truth.config.time_window_sec * 1e9) as u64;
        WindowAggregate::from_counts(window_label(start), self.counts(), start, end, self.truth.config.nv)
    }

    /// Writes the shuffled packet log `epoch_ns<TAB>src`, timestamps evenly
    /// spread over the configured window.
    pub fn write_packet_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let total = self.truth.total_packets as usize;
        let mut order: Vec<u32> = Vec::with_capacity(total);
        for (i, &(_, d)) in self.sources.iter().enumerate() {
            order.extend(std::iter::repeat_n(i as u32, d as usize));
        }
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.shuffle_seed));
        let start = u128::from(self.start_ns());
        let span = (self.truth.config.time_window_sec * 1e9) as u128;
        for (i, &s) in order.iter().enumerate() {
            let ts = start + span * i as u128 / total.max(1) as u128;
            writeln!(out, "{ts}\t{}", self.sources[s as usize].0)?;
        }
        out.flush()
    }

    pub fn write_enrichment_log<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_enrichment(&self.enrichment, out)
    }

    pub fn write_ground_truth<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, &self.truth)?;
        writeln!(out)?;
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distfit::{log_bin, zm_binned_pmf};
    use crate::ingest::{parse_enrichment, parse_packet_log};

    fn small(overlap: f64) -> SynthConfig {
        SynthConfig {
            n_sources: 300,
            nv: 1 << 10,
            overlap_frac: overlap,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn overlap_extremes() {
        let none = gen_synthetic(&small(0.0)).unwrap();
        assert!(none.enrichment.is_empty());
        let all = gen_synthetic(&small(1.0)).unwrap();
        let enriched: HashSet<_> = all.enrichment.iter().map(|r| r.ip).collect();
        assert!(all.sources.iter().all(|s| enriched.contains(&s.0)));
    }

    #[test]
    fn overlap_count_is_rounded_fraction() {
        for (n, f) in [(1000, 0.7), (333, 0.5), (10, 0.25), (7, 0.999)] {
            let cfg = SynthConfig {
                n_sources: n,
                overlap_frac: f,
                nv: 1 << 8,
                ..Default::default()
            };
            let ds = gen_synthetic(&cfg).unwrap();
            assert_eq!(ds.truth.overlap_count, (f * n as f64).round() as usize, "{n} {f}");
        }
    }

    #[test]
    fn byte_identical_under_fixed_seed() {
        let render = || {
            let ds = gen_synthetic(&small(0.7)).unwrap();
            let (mut p, mut e, mut g) = (Vec::new(), Vec::new(), Vec::new());
            ds.write_packet_log(&mut p).unwrap();
            ds.write_enrichment_log(&mut e).unwrap();
            ds.write_ground_truth(&mut g).unwrap();
            (p, e, g)
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn emitted_files_parse_back() {
        let ds = gen_synthetic(&small(0.7)).unwrap();
        let mut p = Vec::new();
        ds.write_packet_log(&mut p).unwrap();
        let ws = parse_packet_log(&p[..], ds.truth.total_packets).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].counts, ds.counts());
        assert_eq!(ws[0].n_sources(), 300);

        let mut e = Vec::new();
        ds.write_enrichment_log(&mut e).unwrap();
        assert_eq!(parse_enrichment(&e[..]).unwrap(), ds.enrichment);
        assert!(ds.enrichment.iter().all(|r| r.check().is_ok()));
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SynthConfig { overlap_frac: 1.5, ..small(0.0) },
            SynthConfig { alpha: 1.0, ..small(0.0) },
            SynthConfig { delta: -1.0, ..small(0.0) },
            SynthConfig { n_sources: 0, ..small(0.0) },
        ] {
            assert!(matches!(gen_synthetic(&cfg), Err(IngestError::InvalidConfig(_))));
        }
    }

    #[test]
    fn counts_follow_binned_pmf() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let cfg = SynthConfig {
            n_sources: 100_000,
            overlap_frac: 0.0,
            seed: 77,
            ..Default::default()
        };
        let ds = gen_synthetic(&cfg).unwrap();
        let values: Vec<u64> = ds.sources.iter().map(|s| s.1).collect();
        let hist = log_bin(&values).unwrap();
        let model = zm_binned_pmf(&ZmParams::new(cfg.alpha, cfg.delta, cfg.nv).unwrap()).unwrap();
        let n = hist.n as f64;
        let observed: BTreeMap<u64, u64> = hist.bins.iter().map(|b| (b.label, b.count)).collect();
        // Pool bins from the tail until every cell expects >= 5.
        let (mut chi2, mut cells) = (0.0, 0);
        let (mut exp_acc, mut obs_acc) = (0.0, 0u64);
        for (i, (label, p)) in model.iter().enumerate() {
            exp_acc += p * n;
            obs_acc += observed.get(label).copied().unwrap_or(0);
            let rest: f64 = model[i + 1..].iter().map(|m| m.1 * n).sum();
            if exp_acc >= 5.0 && rest >= 5.0 || i + 1 == model.len() {
                chi2 += (obs_acc as f64 - exp_acc).powi(2) / exp_acc;
                cells += 1;
                exp_acc = 0.0;
                obs_acc = 0;
            }
        }
        let p_value = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(chi2);
        assert!(p_value > 0.01, "chi2 {chi2} over {cells} cells, p = {p_value}");
    }
}

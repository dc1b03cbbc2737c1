use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use super::bundle::{sha256_file, Bundle, MANIFEST};
use super::{ReportError, RunConfig};
use crate::anon::{AnonKey, Anonymizer};
use crate::assoc::split_col_key;
use crate::dimstats::{
    dim_stats, exemplar, write_dimstats, write_exemplar_tsv, write_exemplar_text, write_relevance,
    DimStatsRow, ExemplarRecord, NO_GREY_SRC_PACKET,
};
use crate::distfit::{
    binned_model, categorical_distribution, default_top_k, fit_cauchy, fit_zm, hour_histogram,
    log2_bin, log_bin, LogBinnedHistogram, ReferenceTime,
};
use crate::ingest::{gen_synthetic, parse_enrichment, parse_packet_log, EnrichmentRecord, SynthConfig, WindowAggregate};
use crate::join::{dedup_enrichment, join, overlap_fraction, JoinedWindow, Variable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const NS_PER_DAY: f64 = 86_400e9;

/// Categorical variables reported as `value<TAB>fraction` distributions.
const CATEGORICAL: [Variable; 3] = [Variable::Classification, Variable::Os, Variable::Cve];

/// Variables fitted with the Zipf-Mandelbrot law, and where their counts
/// come from.
const ZM_VARIABLES: [&str; 4] = [NO_GREY_SRC_PACKET, "srcPacket", "protocol_port", "asn"];

#[derive(Debug, Clone, Serialize)]
pub struct OverlapEntry {
    pub window: String,
    pub nv: u64,
    pub sqrt_nv: f64,
    pub high_frequency_sources: usize,
    /// `None` when no source exceeds `sqrt(nv)`.
    pub overlap_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZmFitEntry {
    pub window: String,
    pub variable: String,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dmax: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    hist: Option<LogBinnedHistogram>,
    #[serde(skip)]
    model: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TemporalFit {
    pub window: String,
    /// Packet-count bin used as `d`.
    pub d: u64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_at_boundary: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// `(days since window start, observed fraction)`.
    #[serde(skip)]
    series: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub windows: Vec<WindowAggregate>,
    pub joined: Vec<JoinedWindow>,
    pub dimstats: Vec<DimStatsRow>,
    pub exemplars: Vec<ExemplarRecord>,
    pub overlap: Vec<OverlapEntry>,
    pub zm_fits: Vec<ZmFitEntry>,
    pub temporal_fits: Vec<TemporalFit>,
    /// Per window: variable -> `(value, fraction)` list.
    pub categorical: BTreeMap<String, BTreeMap<String, Vec<(String, f64)>>>,
    pub hours: BTreeMap<String, [f64; 24]>,
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>, ReportError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| ReportError::Usage(format!("{what} {}: {e}", path.display())))
}

/// Reads the key (if any), packet windows and enrichment records.
pub fn load_inputs(
    cfg: &RunConfig,
) -> Result<(Vec<WindowAggregate>, Vec<EnrichmentRecord>, Option<Anonymizer>), ReportError> {
    let anon = match &cfg.key_file {
        Some(k) => Some(Anonymizer::new(
            &AnonKey::read_file(k).map_err(|e| ReportError::Usage(e.to_string()))?,
        )),
        None => None,
    };
    let packets = cfg.packets.as_deref().ok_or_else(|| ReportError::Usage("no packet log given".into()))?;
    let enrichment = cfg
        .enrichment
        .as_deref()
        .ok_or_else(|| ReportError::Usage("no enrichment log given".into()))?;
    let windows = parse_packet_log(open(packets, "packet log")?, cfg.nv)
        .map_err(|e| ReportError::stage("ingest", format!("{}: {e}", packets.display())))?;
    let records = parse_enrichment(open(enrichment, "enrichment log")?)
        .map_err(|e| ReportError::stage("ingest", format!("{}: {e}", enrichment.display())))?;
    info!("read {} windows and {} enrichment records", windows.len(), records.len());
    Ok((windows, records, anon))
}

fn zm_entry(window: &str, variable: &str, counts: &[u64], cfg: &RunConfig) -> ZmFitEntry {
    let mut e = ZmFitEntry {
        window: window.to_string(),
        variable: variable.to_string(),
        n: counts.len() as u64,
        alpha: None,
        delta: None,
        dmax: None,
        mse: None,
        error: None,
        hist: None,
        model: Vec::new(),
    };
    let hist = match log_bin(counts) {
        Ok(h) => h,
        Err(err) => {
            e.error = Some(err.to_string());
            return e;
        }
    };
    match fit_zm(&hist, &cfg.fit_grids.zm) {
        Ok(fit) => {
            e.alpha = Some(fit.params.alpha);
            e.delta = Some(fit.params.delta);
            e.dmax = Some(fit.params.dmax);
            e.mse = Some(fit.mse);
            e.model = binned_model(&fit.params);
        }
        Err(err) => e.error = Some(err.to_string()),
    }
    e.hist = Some(hist);
    e
}

/// Fraction of the sources in each packet-count bin below `sqrt(nv)` whose
/// enrichment was last seen a given number of days from the window start.
fn temporal_fits(
    window: &WindowAggregate,
    records: &BTreeMap<Ipv4Addr, EnrichmentRecord>,
    cfg: &RunConfig,
) -> Vec<TemporalFit> {
    let mut per_bin: BTreeMap<u64, (u64, BTreeMap<i64, u64>)> = BTreeMap::new();
    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
    for (src, &d) in &window.counts {
        let Ok(b) = log2_bin(d) else { continue };
        if b < 2 || u128::from(b) * u128::from(b) >= u128::from(window.nv) {
            continue;
        }
        let entry = per_bin.entry(b).or_default();
        entry.0 += 1;
        let seen = records.get(src).and_then(|r| r.last_seen).and_then(|t| t.timestamp_nanos_opt());
        if let Some(ns) = seen {
            let day = ((ns as f64 - window.start_ns as f64) / NS_PER_DAY).floor() as i64;
            *entry.1.entry(day).or_insert(0) += 1;
            lo = lo.min(day);
            hi = hi.max(day);
        }
    }
    let mut out = Vec::new();
    for (b, (total, by_day)) in per_bin {
        let series: Vec<(f64, f64)> = if lo <= hi {
            (lo..=hi)
                .map(|day| (day as f64, by_day.get(&day).copied().unwrap_or(0) as f64 / total as f64))
                .collect()
        } else {
            Vec::new()
        };
        let mut fit = TemporalFit {
            window: window.window_id.clone(),
            d: b,
            points: series.len(),
            alpha: None,
            beta: None,
            mse: None,
            beta_at_boundary: None,
            error: None,
            series,
        };
        if fit.points < 4 {
            fit.error = Some(format!("{} time points; at least 4 are needed", fit.points));
        } else {
            match fit_cauchy(&fit.series, b, window.nv, ReferenceTime::Known(0.0), &cfg.fit_grids.cauchy) {
                Ok(f) => {
                    fit.alpha = Some(f.params.alpha);
                    fit.beta = Some(f.params.beta);
                    fit.mse = Some(f.mse);
                    fit.beta_at_boundary = Some(f.beta_at_boundary);
                }
                Err(e) => fit.error = Some(e.to_string()),
            }
        }
        out.push(fit);
    }
    out
}

/// Runs correlation, dimensional analysis and (optionally) model fitting.
pub fn analyze(
    windows: &[WindowAggregate],
    enrichment: &[EnrichmentRecord],
    anon: Option<&Anonymizer>,
    cfg: &RunConfig,
    fits: bool,
) -> Result<Analysis, ReportError> {
    let windows: Vec<WindowAggregate> = match anon {
        Some(a) => windows.iter().map(|w| w.map_sources(|ip| a.anonymize_ip(ip))).collect(),
        None => windows.to_vec(),
    };
    let anon_records: Vec<EnrichmentRecord> = enrichment
        .iter()
        .map(|r| EnrichmentRecord {
            ip: anon.map_or(r.ip, |a| a.anonymize_ip(r.ip)),
            ..r.clone()
        })
        .collect();
    let records = dedup_enrichment(&anon_records);
    let unique: Vec<EnrichmentRecord> = records.values().cloned().collect();

    let mut joined = Vec::with_capacity(windows.len());
    for w in &windows {
        joined.push(join(w, &unique, None).map_err(|e| ReportError::stage("correlate", format!("window {}: {e}", w.window_id)))?);
    }

    let dimstats: Vec<DimStatsRow> = joined.iter().flat_map(dim_stats).collect();
    let exemplars = exemplar(&dimstats, &cfg.exemplar);

    let overlap = windows
        .iter()
        .map(|w| OverlapEntry {
            window: w.window_id.clone(),
            nv: w.nv,
            sqrt_nv: (w.nv as f64).sqrt(),
            high_frequency_sources: w
                .counts
                .values()
                .filter(|&&d| u128::from(d) * u128::from(d) > u128::from(w.nv))
                .count(),
            overlap_fraction: overlap_fraction(w, &unique, None, w.nv),
        })
        .collect();

    let mut categorical = BTreeMap::new();
    let mut hours = BTreeMap::new();
    for (w, j) in windows.iter().zip(&joined) {
        let per_var: BTreeMap<String, Vec<(String, f64)>> = CATEGORICAL
            .iter()
            .map(|v| {
                let name = v.as_str();
                (name.to_string(), categorical_distribution(&j.meta, name, default_top_k(name)))
            })
            .collect();
        categorical.insert(w.window_id.clone(), per_var);
        let times: Vec<_> = w
            .counts
            .keys()
            .filter_map(|src| records.get(src).and_then(|r| r.last_seen))
            .collect();
        if let Ok(h) = hour_histogram(&times) {
            hours.insert(w.window_id.clone(), h);
        }
    }

    let (mut zm_fits, mut temporal) = (Vec::new(), Vec::new());
    if fits {
        let full: Vec<usize> = (0..windows.len()).filter(|&i| !windows[i].partial).collect();
        let chosen: Vec<usize> = if cfg.include_partial {
            (0..windows.len()).collect()
        } else if full.is_empty() && !windows.is_empty() {
            warn!("no full window of {} packets; fitting the short window", cfg.nv);
            (0..windows.len()).collect()
        } else {
            full
        };
        for i in chosen {
            let (w, j) = (&windows[i], &joined[i]);
            let (mut grey, mut no_grey) = (Vec::new(), Vec::new());
            for (src, &d) in &w.counts {
                if records.contains_key(src) { grey.push(d) } else { no_grey.push(d) }
            }
            for var in ZM_VARIABLES {
                let counts = match var {
                    NO_GREY_SRC_PACKET => no_grey.clone(),
                    "srcPacket" => grey.clone(),
                    other => sources_per_value(&j.meta, other).into_values().collect(),
                };
                zm_fits.push(zm_entry(&w.window_id, var, &counts, cfg));
            }
            temporal.extend(temporal_fits(w, &records, cfg));
        }
    }

    Ok(Analysis {
        windows,
        joined,
        dimstats,
        exemplars,
        overlap,
        zm_fits,
        temporal_fits: temporal,
        categorical,
        hours,
    })
}

fn io_err(e: std::io::Error) -> ReportError {
    ReportError::stage("output", e)
}

fn write_json<T: Serialize>(bundle: &Bundle, rel: &str, value: &T) -> Result<(), ReportError> {
    let mut w = bundle.writer(rel)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| ReportError::stage("output", e))?;
    writeln!(w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn write_overlap(bundle: &Bundle, a: &Analysis) -> Result<(), ReportError> {
    write_json(bundle, "overlap.json", &a.overlap)
}

fn write_matrices(bundle: &Bundle, a: &Analysis) -> Result<(), ReportError> {
    let dir = bundle.path("matrices/.")?;
    let dir = dir.parent().expect("has parent");
    for j in &a.joined {
        j.write_tsv(dir).map_err(|e| ReportError::stage("output", e))?;
    }
    Ok(())
}

fn write_stats(bundle: &Bundle, a: &Analysis, cfg: &RunConfig) -> Result<(), ReportError> {
    write_dimstats(&a.dimstats, bundle.writer("dimstats.tsv")?).map_err(io_err)?;
    write_relevance(&a.dimstats, &cfg.thresholds, bundle.writer("relevance.tsv")?).map_err(io_err)?;
    write_exemplar_tsv(&a.exemplars, bundle.writer("exemplar.tsv")?).map_err(io_err)?;
    write_exemplar_text(&a.exemplars, bundle.writer("exemplar.txt")?).map_err(io_err)?;
    Ok(())
}

fn write_distributions(bundle: &Bundle, a: &Analysis) -> Result<(), ReportError> {
    for (window, vars) in &a.categorical {
        for (var, dist) in vars {
            if dist.is_empty() {
                continue;
            }
            let mut w = bundle.writer(&format!("dist/{window}.{var}.tsv"))?;
            writeln!(w, "value\tfraction").map_err(io_err)?;
            for (v, f) in dist {
                writeln!(w, "{v}\t{f}").map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
        }
    }
    for (window, h) in &a.hours {
        let mut w = bundle.writer(&format!("dist/{window}.last_seen_hour.tsv"))?;
        writeln!(w, "hour\tfraction").map_err(io_err)?;
        for (hour, f) in h.iter().enumerate() {
            writeln!(w, "{hour}\t{f}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    for e in &a.zm_fits {
        let Some(hist) = &e.hist else { continue };
        let model: BTreeMap<u64, f64> = e.model.iter().copied().collect();
        let mut w = bundle.writer(&format!("dist/{}.{}.tsv", e.window, e.variable))?;
        writeln!(w, "bin\tempirical\tmodel").map_err(io_err)?;
        for b in &hist.bins {
            match model.get(&b.label) {
                Some(m) => writeln!(w, "{}\t{}\t{m}", b.label, b.fraction),
                None => writeln!(w, "{}\t{}\tNA", b.label, b.fraction),
            }
            .map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    for t in &a.temporal_fits {
        if t.series.is_empty() {
            continue;
        }
        let mut w = bundle.writer(&format!("dist/{}.temporal.d{}.tsv", t.window, t.d))?;
        writeln!(w, "day\tobserved").map_err(io_err)?;
        for (day, y) in &t.series {
            writeln!(w, "{day}\t{y}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

fn write_fits(bundle: &Bundle, a: &Analysis) -> Result<(), ReportError> {
    write_json(
        bundle,
        "fits.json",
        &json!({ "zipf_mandelbrot": a.zm_fits, "temporal": a.temporal_fits }),
    )
}

fn input_digest(path: &Path) -> Result<serde_json::Value, ReportError> {
    let sha = sha256_file(path).map_err(|e| ReportError::stage("output", format!("{}: {e}", path.display())))?;
    Ok(json!({ "path": path.display().to_string(), "sha256": sha }))
}

fn write_manifest(bundle: &Bundle, command: &str, cfg: &RunConfig, a: &Analysis) -> Result<(), ReportError> {
    let mut inputs = serde_json::Map::new();
    for (name, p) in [("packets", &cfg.packets), ("enrichment", &cfg.enrichment), ("key_file", &cfg.key_file)] {
        if let Some(p) = p {
            inputs.insert(name.to_string(), input_digest(p)?);
        }
    }
    let windows: Vec<_> = a
        .windows
        .iter()
        .map(|w| {
            json!({
                "window": w.window_id,
                "nv": w.nv,
                "sources": w.n_sources(),
                "duration_sec": w.duration_sec,
                "partial": w.partial,
            })
        })
        .collect();
    let manifest = json!({
        "tool": "netchar",
        "version": VERSION,
        "command": command,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "config_sha256": cfg.hash(),
        "inputs": inputs,
        "windows": windows,
        "outputs": bundle.digests()?,
    });
    write_json(bundle, MANIFEST, &manifest)
}

fn prepare(cfg: &RunConfig) -> Result<(Bundle, Vec<WindowAggregate>, Vec<EnrichmentRecord>, Option<Anonymizer>), ReportError> {
    cfg.validate()?;
    let out = cfg
        .out_dir
        .as_deref()
        .ok_or_else(|| ReportError::Usage("no output directory given".into()))?;
    let bundle = Bundle::create(out)?;
    let (w, e, anon) = load_inputs(cfg)?;
    Ok((bundle, w, e, anon))
}

/// Full pipeline: correlation, dimensional analysis, exemplar, distributions
/// and fits, written as one report bundle.
pub fn cmd_run(cfg: &RunConfig) -> Result<PathBuf, ReportError> {
    let (bundle, windows, records, anon) = prepare(cfg)?;
    let a = analyze(&windows, &records, anon.as_ref(), cfg, true)?;
    write_stats(&bundle, &a, cfg)?;
    write_overlap(&bundle, &a)?;
    write_distributions(&bundle, &a)?;
    write_fits(&bundle, &a)?;
    if cfg.write_matrices {
        write_matrices(&bundle, &a)?;
    }
    write_manifest(&bundle, "run", cfg, &a)?;
    bundle.commit()
}

/// Correlation only: metadata matrices and the overlap report.
pub fn cmd_correlate(cfg: &RunConfig) -> Result<PathBuf, ReportError> {
    let (bundle, windows, records, anon) = prepare(cfg)?;
    let a = analyze(&windows, &records, anon.as_ref(), cfg, false)?;
    write_matrices(&bundle, &a)?;
    write_overlap(&bundle, &a)?;
    write_manifest(&bundle, "correlate", cfg, &a)?;
    bundle.commit()
}

/// Correlation plus dimensional analysis and exemplar, without fits.
pub fn cmd_stats(cfg: &RunConfig) -> Result<PathBuf, ReportError> {
    let (bundle, windows, records, anon) = prepare(cfg)?;
    let a = analyze(&windows, &records, anon.as_ref(), cfg, false)?;
    write_stats(&bundle, &a, cfg)?;
    write_manifest(&bundle, "stats", cfg, &a)?;
    bundle.commit()
}

/// Writes a synthetic dataset: `packets.tsv`, `enrichment.jsonl`,
/// `ground_truth.json` and a manifest.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<PathBuf, ReportError> {
    cfg.validate().map_err(|e| ReportError::Usage(e.to_string()))?;
    let bundle = Bundle::create(out)?;
    let ds = gen_synthetic(cfg).map_err(|e| ReportError::stage("synth", e))?;
    ds.write_packet_log(bundle.writer("packets.tsv")?).map_err(io_err)?;
    ds.write_enrichment_log(bundle.writer("enrichment.jsonl")?).map_err(io_err)?;
    ds.write_ground_truth(bundle.writer("ground_truth.json")?).map_err(io_err)?;
    let manifest = json!({
        "tool": "netchar",
        "version": VERSION,
        "command": "synth",
        "config": cfg,
        "outputs": bundle.digests()?,
    });
    write_json(&bundle, MANIFEST, &manifest)?;
    bundle.commit()
}

/// Values of one variable of a metadata matrix with the number of sources
/// carrying each.
pub fn sources_per_value(meta: &crate::assoc::AssocArray, variable: &str) -> BTreeMap<String, u64> {
    meta.select_cols(&format!("{variable}|"))
        .col_sums()
        .into_iter()
        .map(|(k, v)| (split_col_key(&k).1, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Classification;

    fn small_run(dir: &Path) -> RunConfig {
        let synth = SynthConfig {
            n_sources: 400,
            nv: 1 << 12,
            seed: 3,
            ..Default::default()
        };
        let data = dir.join("data");
        cmd_synth(&synth, &data).unwrap();
        let key = dir.join("key.hex");
        AnonKey::from_bytes(&[7u8; 32]).write_file(&key).unwrap();
        RunConfig {
            packets: Some(data.join("packets.tsv")),
            enrichment: Some(data.join("enrichment.jsonl")),
            key_file: Some(key),
            nv: 1 << 30,
            ..Default::default()
        }
    }

    #[test]
    fn run_writes_full_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_run(dir.path());
        cfg.out_dir = Some(dir.path().join("report"));
        let out = cmd_run(&cfg).unwrap();
        for f in ["dimstats.tsv", "relevance.tsv", "exemplar.tsv", "exemplar.txt", "fits.json", "overlap.json", "manifest.json"] {
            assert!(out.join(f).is_file(), "{f}");
        }
        let dimstats = std::fs::read_to_string(out.join("dimstats.tsv")).unwrap();
        assert!(dimstats.starts_with("date\tvariable\tnrow\tncol\tnnz\tmaxval\tmaxcount\tmaxfrac\n"));
        let nogrey = dimstats.lines().find(|l| l.contains("\tcaidaNoGrey\t")).unwrap();
        // 400 sources, 280 enriched
        assert!(nogrey.contains("\t120\t1\t120\tsrcPacket\t120\t1"), "{nogrey}");
        let fits: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("fits.json")).unwrap()).unwrap();
        assert_eq!(fits["zipf_mandelbrot"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn stage_failure_removes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.jsonl");
        std::fs::write(&bad, "{\"ip\":\"1.2.3.4\",\"classification\":\"unknown\"}\nnot json\n").unwrap();
        let mut cfg = small_run(dir.path());
        cfg.enrichment = Some(bad);
        cfg.out_dir = Some(dir.path().join("report"));
        let err = cmd_run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(!dir.path().join("report").exists());
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.contains("staging"))
            .collect();
        assert!(leftovers.is_empty(), "{leftovers:?}");
    }

    #[test]
    fn anonymized_and_raw_joins_agree_on_statistics() {
        let w = WindowAggregate::from_counts(
            "w",
            [("1.2.3.4".parse().unwrap(), 9), ("1.2.3.5".parse().unwrap(), 1)].into(),
            0,
            0,
            10,
        );
        let e = [EnrichmentRecord::minimal("1.2.3.4".parse().unwrap(), Classification::Malicious)];
        let cfg = RunConfig::default();
        let anon = Anonymizer::new(&AnonKey::from_bytes(&[1u8; 32]));
        let raw = analyze(std::slice::from_ref(&w), &e, None, &cfg, false).unwrap();
        let hidden = analyze(std::slice::from_ref(&w), &e, Some(&anon), &cfg, false).unwrap();
        assert_eq!(raw.dimstats, hidden.dimstats);
        assert_eq!(raw.overlap[0].overlap_fraction, Some(1.0));
    }
}

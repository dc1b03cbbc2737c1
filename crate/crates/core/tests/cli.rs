use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::net::Ipv4Addr;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn netchar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netchar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn synth(dir: &Path, n: usize, seed: u64) {
    let o = netchar(&[
        "synth",
        "--n-sources",
        &n.to_string(),
        "--nv",
        "65536",
        "--seed",
        &seed.to_string(),
        "--out",
        path(dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synth_emits_requested_sources_and_overlap() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 1_500, 3);

    let sources: BTreeSet<String> = fs::read_to_string(data.join("packets.tsv"))
        .unwrap()
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(sources.len(), 1_500);

    let enriched: BTreeSet<String> = fs::read_to_string(data.join("enrichment.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["ip"].as_str().unwrap().to_string())
        .collect();
    let shared = sources.intersection(&enriched).count();
    assert_eq!(shared, 1_050, "round(0.7 * 1500)");
    let truth = read_json(&data.join("ground_truth.json"));
    assert_eq!(truth["overlap_count"], 1_050);
}

#[test]
fn synth_is_reproducible_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let outputs = |name: &str, seed: u64| {
        let dir = tmp.path().join(name);
        synth(&dir, 500, seed);
        read_json(&dir.join("manifest.json"))["outputs"].clone()
    };
    let a = outputs("a", 11);
    assert_eq!(a, outputs("b", 11));
    assert_ne!(a, outputs("c", 12));
}

#[test]
fn missing_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 200, 1);
    let out = tmp.path().join("report");
    let o = netchar(&[
        "run",
        "--packets",
        path(&data.join("packets.tsv")),
        "--enrichment",
        path(&data.join("enrichment.jsonl")),
        "--key",
        path(&tmp.path().join("no-such.key")),
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("key file not found"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn malformed_input_fails_the_stage_and_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let packets = tmp.path().join("p.tsv");
    let enrichment = tmp.path().join("e.jsonl");
    fs::write(&packets, "1592395200000000000\t1.2.3.4\nnot-a-time\t1.2.3.5\n").unwrap();
    fs::write(&enrichment, "").unwrap();
    let out = tmp.path().join("report");
    let o = netchar(&["run", "--packets", path(&packets), "--enrichment", path(&enrichment), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 2, "no staging directory left behind");
}

#[test]
fn anonymized_run_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 800, 5);
    let key = tmp.path().join("k.hex");
    let o = netchar(&["anon", "--key", path(&key), "--generate-key", "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = netchar(&[
            "run",
            "--packets",
            path(&data.join("packets.tsv")),
            "--enrichment",
            path(&data.join("enrichment.jsonl")),
            "--key",
            path(&key),
            "--nv",
            "65536",
            "--out",
            path(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        read_json(&out.join("manifest.json"))
    };
    let (a, b) = (run("r1"), run("r2"));
    assert_eq!(a, b);
    let outputs = a["outputs"].as_object().unwrap();
    for f in ["dimstats.tsv", "relevance.tsv", "exemplar.tsv", "exemplar.txt", "overlap.json", "fits.json"] {
        assert!(outputs.contains_key(f), "{f} missing from manifest");
    }
}

#[test]
fn anon_ips_preserves_prefixes() {
    let tmp = tempfile::tempdir().unwrap();
    let key = tmp.path().join("k.hex");
    assert!(netchar(&["anon", "--key", path(&key), "--generate-key", "--seed", "1"]).status.success());
    let input = tmp.path().join("ips.txt");
    let ips = ["10.1.2.3", "10.1.2.4", "10.1.200.1", "192.168.0.1"];
    fs::write(&input, ips.join("\n")).unwrap();
    let o = netchar(&["anon", "--key", path(&key), "--format", "ips", "--in", path(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out: Vec<u32> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| u32::from(l.parse::<Ipv4Addr>().unwrap()))
        .collect();
    let raw: Vec<u32> = ips.iter().map(|s| u32::from(s.parse::<Ipv4Addr>().unwrap())).collect();
    assert_eq!(out.len(), raw.len());
    for i in 0..raw.len() {
        for j in 0..raw.len() {
            assert_eq!((out[i] ^ out[j]).leading_zeros(), (raw[i] ^ raw[j]).leading_zeros());
        }
    }
}

#[test]
fn fit_counts_recovers_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    // Exact pure power law with alpha = 2 on 1..=4096, as integer multiplicities.
    let mut text = String::new();
    for d in 1u64..=4096 {
        for _ in 0..(16_777_216 / (d * d)) {
            writeln!(text, "{d}").unwrap();
        }
    }
    let counts = tmp.path().join("counts.txt");
    fs::write(&counts, text).unwrap();
    let o = netchar(&["fit", "--counts", path(&counts), "--dmax", "4096"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["alpha"].as_f64().unwrap() - 2.0).abs() < 0.05, "{v}");
    assert!(v["delta"].as_f64().unwrap().abs() < 0.1, "{v}");
}

/// A small collection window whose modal fractions land on known
/// three-digit reference values.
fn replica_records() -> Vec<Value> {
    const ROWS: usize = 1_243;
    let mut recs: Vec<BTreeMap<&str, Value>> = (0..ROWS).map(|_| BTreeMap::new()).collect();
    let assign = |recs: &mut Vec<BTreeMap<&str, Value>>, field: &'static str, counts: &[(&str, usize)]| {
        let mut i = 0;
        for &(value, n) in counts {
            for _ in 0..n {
                recs[i].insert(field, Value::from(value));
                i += 1;
            }
        }
    };
    assign(&mut recs, "actor", &[("unknown", 1_238), ("Mirai", 2), ("Shodan.io", 2), ("Censys", 1)]);
    assign(&mut recs, "classification", &[("malicious", 730), ("unknown", 300), ("benign", 213)]);
    assign(
        &mut recs,
        "os",
        &[("Windows 7/8", 451), ("Linux 2.2-3.x", 420), ("unknown", 300), ("Windows XP", 72)],
    );
    for (i, r) in recs.iter_mut().enumerate() {
        r.insert("ip", Value::from(Ipv4Addr::from(0x0b00_0000u32 + i as u32).to_string()));
        r.insert("spoofable", Value::from(i < 363));
        // 357 malicious rows carry CVEs; the first 15 carry two.
        let cves: Vec<&str> = match i {
            0..=14 => vec!["CVE-2017-0144", "CVE-2017-0143"],
            15..=336 => vec!["CVE-2017-0144"],
            337..=356 => vec!["CVE-2019-0708"],
            _ => vec![],
        };
        r.insert("cve", Value::from(cves));
    }
    recs.into_iter().map(|r| Value::Object(r.into_iter().map(|(k, v)| (k.to_string(), v)).collect())).collect()
}

#[test]
fn replica_fixture_reproduces_reference_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let records = replica_records();
    let mut enrichment = String::new();
    let mut packets = String::new();
    for (i, r) in records.iter().enumerate() {
        writeln!(enrichment, "{r}").unwrap();
        writeln!(packets, "{}\t{}", 1_592_395_200_000_000_000u64 + i as u64 * 1_000, r["ip"].as_str().unwrap()).unwrap();
    }
    fs::write(tmp.path().join("p.tsv"), packets).unwrap();
    fs::write(tmp.path().join("e.jsonl"), enrichment).unwrap();
    let out = tmp.path().join("report");
    let o = netchar(&[
        "stats",
        "--packets",
        path(&tmp.path().join("p.tsv")),
        "--enrichment",
        path(&tmp.path().join("e.jsonl")),
        "--nv",
        &records.len().to_string(),
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = fs::read_to_string(out.join("dimstats.tsv")).unwrap();
    let rows: BTreeMap<String, Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<String> = l.split('\t').map(str::to_string).collect();
            (f[1].clone(), f)
        })
        .collect();
    let check = |var: &str, ncol: &str, maxval: &str, maxfrac: &str| {
        let r = &rows[var];
        assert_eq!(r[0], "20200617-120000");
        assert_eq!((r[3].as_str(), r[5].as_str(), r[7].as_str()), (ncol, maxval, maxfrac), "{var}: {r:?}");
    };
    check("actor", "4", "unknown", "0.996");
    check("classification", "3", "malicious", "0.587");
    check("os", "4", "Windows 7/8", "0.363");
    check("cve", "3", "CVE-2017-0144", "0.906");
    check("spoofable", "1", "1", "1");
    // Multi-CVE records: more nonzeros than rows.
    let cve = &rows["cve"];
    assert_eq!((cve[2].as_str(), cve[4].as_str()), ("357", "372"));
    // Many-to-one variables have one nonzero per row.
    for var in ["actor", "classification", "os"] {
        assert_eq!(rows[var][2], "1243");
        assert_eq!(rows[var][4], "1243");
    }
}

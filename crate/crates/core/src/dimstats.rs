//! Dimensional data analysis: per-variable row/column/nonzero counts, the
//! modal value of each variable, relevance classes and exemplar records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assoc::{split_col_key, AssocArray, KEY_SEP};
use crate::join::{JoinedWindow, Variable, LAST_SEEN_HOUR};

/// Summary over all metadata variables of the joined sources.
pub const GREY_META: &str = "caidaGreyMeta";
/// Summary over the telescope-only sources.
pub const NO_GREY: &str = "caidaNoGrey";
/// Packet-count bins of the telescope-only sources.
pub const NO_GREY_SRC_PACKET: &str = "caida_srcPacket";

pub const DIMSTATS_HEADER: &str = "date\tvariable\tnrow\tncol\tnnz\tmaxval\tmaxcount\tmaxfrac";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimStatsRow {
    pub date: String,
    pub variable: String,
    pub nrow: u64,
    pub ncol: u64,
    pub nnz: u64,
    pub maxval: String,
    pub maxcount: u64,
    /// `maxcount / nnz`, full precision; zero for an absent variable.
    pub maxfrac: f64,
    /// Another value shared the top count and lost the lexicographic tie-break.
    pub tie: bool,
}

impl DimStatsRow {
    fn absent(date: &str, variable: &str) -> Self {
        Self {
            date: date.to_string(),
            variable: variable.to_string(),
            nrow: 0,
            ncol: 0,
            nnz: 0,
            maxval: String::new(),
            maxcount: 0,
            maxfrac: 0.0,
            tie: false,
        }
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.date,
            self.variable,
            self.nrow,
            self.ncol,
            self.nnz,
            self.maxval,
            self.maxcount,
            sig3(self.maxfrac)
        )
    }
}

/// Formats to three significant digits without trailing zeros.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit (0.9996 -> "1.000"); re-trimming
    // handles that as well.
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Picks the largest count, ties to the smallest value; the flag reports
/// whether a tie occurred at the top.
fn argmax<I>(counts: I) -> Option<(String, u64, bool)>
where
    I: IntoIterator<Item = (String, u64)>,
{
    let mut best: Option<(String, u64, bool)> = None;
    for (v, c) in counts {
        match &mut best {
            None => best = Some((v, c, false)),
            Some(b) if c > b.1 => *b = (v, c, false),
            Some(b) if c == b.1 => {
                b.2 = true;
                if v < b.0 {
                    b.0 = v;
                }
            }
            Some(_) => {}
        }
    }
    best
}

fn finish(date: &str, variable: &str, nrow: u64, nnz: u64, counts: Vec<(String, u64)>) -> DimStatsRow {
    let ncol = counts.len() as u64;
    match argmax(counts) {
        None => DimStatsRow::absent(date, variable),
        Some((maxval, maxcount, tie)) => DimStatsRow {
            date: date.to_string(),
            variable: variable.to_string(),
            nrow,
            ncol,
            nnz,
            maxval,
            maxcount,
            maxfrac: maxcount as f64 / nnz as f64,
            tie,
        },
    }
}

/// Statistics of the columns under `prefix` (e.g. `os|`), reported as `label`.
pub fn dim_row(array: &AssocArray, date: &str, label: &str, prefix: &str) -> DimStatsRow {
    let sub = array.select_cols(prefix);
    let counts = sub
        .col_sums()
        .into_iter()
        .map(|(k, v)| (split_col_key(&k).1, v))
        .collect();
    finish(date, label, sub.nrow() as u64, sub.nnz() as u64, counts)
}

/// Collapses every column to its variable name and counts each
/// (row, variable) pair once; `maxval` is then the variable present on the
/// most rows.
pub fn summary_row(array: &AssocArray, date: &str, label: &str, exclude: &[&str]) -> DimStatsRow {
    let pairs: BTreeSet<(&str, &str)> = array
        .triples()
        .iter()
        .map(|t| (t.col.split(KEY_SEP).next().unwrap_or(""), t.row.as_str()))
        .filter(|(var, _)| !exclude.contains(var))
        .collect();
    let rows: BTreeSet<&str> = pairs.iter().map(|p| p.1).collect();
    let mut per_var: BTreeMap<&str, u64> = BTreeMap::new();
    for (var, _) in &pairs {
        *per_var.entry(var).or_insert(0) += 1;
    }
    let counts = per_var.into_iter().map(|(v, c)| (v.to_string(), c)).collect();
    finish(date, label, rows.len() as u64, pairs.len() as u64, counts)
}

/// One variable of a joined window. Besides the nine metadata variables,
/// accepts the summaries [`GREY_META`], [`NO_GREY`] and the telescope-only
/// packet bins [`NO_GREY_SRC_PACKET`]. Unknown names give an all-zero row.
pub fn dim_table(joined: &JoinedWindow, variable: &str) -> DimStatsRow {
    let date = joined.window_id.as_str();
    match variable {
        GREY_META => summary_row(&joined.meta, date, variable, &[LAST_SEEN_HOUR]),
        NO_GREY => summary_row(&joined.no_grey, date, variable, &[]),
        NO_GREY_SRC_PACKET => dim_row(&joined.no_grey, date, variable, &Variable::SrcPacket.prefix()),
        _ => dim_row(&joined.meta, date, variable, &format!("{variable}{KEY_SEP}")),
    }
}

/// Every reported row for one window, in report order.
pub fn dim_stats(joined: &JoinedWindow) -> Vec<DimStatsRow> {
    let mut names = vec![NO_GREY, GREY_META, NO_GREY_SRC_PACKET];
    names.extend(Variable::ALL.iter().map(|v| v.as_str()));
    names.into_iter().map(|v| dim_table(joined, v)).collect()
}

pub fn write_dimstats<W: Write>(rows: &[DimStatsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DIMSTATS_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_tsv())?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    Irrelevant,
    RelevantLowCardinality,
    RelevantHighCardinality,
}

impl fmt::Display for Relevance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Irrelevant => "irrelevant",
            Self::RelevantLowCardinality => "relevant_low_cardinality",
            Self::RelevantHighCardinality => "relevant_high_cardinality",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelevanceThresholds {
    /// A modal value above this fraction makes the variable uninformative.
    pub irrelevance: f64,
    /// Distinct values at or above this count are high cardinality.
    pub high_cardinality: u64,
}

impl Default for RelevanceThresholds {
    fn default() -> Self {
        Self {
            irrelevance: 0.98,
            high_cardinality: 1000,
        }
    }
}

pub fn classify_relevance(row: &DimStatsRow, t: &RelevanceThresholds) -> Relevance {
    if row.ncol <= 1 || row.maxfrac > t.irrelevance {
        Relevance::Irrelevant
    } else if row.ncol >= t.high_cardinality {
        Relevance::RelevantHighCardinality
    } else {
        Relevance::RelevantLowCardinality
    }
}

pub fn write_relevance<W: Write>(rows: &[DimStatsRow], t: &RelevanceThresholds, mut out: W) -> std::io::Result<()> {
    writeln!(out, "date\tvariable\tncol\tmaxfrac\trelevance")?;
    for r in rows {
        let class = classify_relevance(r, t);
        writeln!(out, "{}\t{}\t{}\t{}\t{class}", r.date, r.variable, r.ncol, sig3(r.maxfrac))?;
    }
    out.flush()
}

/// Which rows contribute to the exemplar.
///
/// The exemplar describes the most common value of every variable that has
/// a meaningful mode: more than one distinct value, and a modal value that
/// is not vanishingly rare. This deliberately keeps variables such as
/// `actor` whose single dominant value makes them irrelevant for further
/// distribution analysis, and drops binary flags and near-unique
/// timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExemplarOptions {
    pub min_ncol: u64,
    pub min_maxfrac: f64,
    /// Summary rows and the like that never belong in an exemplar.
    pub exclude: Vec<String>,
}

impl Default for ExemplarOptions {
    fn default() -> Self {
        Self {
            min_ncol: 2,
            min_maxfrac: 0.01,
            exclude: vec![GREY_META.to_string(), NO_GREY.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub maxval: String,
    pub maxcount: u64,
    pub maxfrac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarRecord {
    pub date: String,
    pub assignments: BTreeMap<String, Assignment>,
}

impl ExemplarRecord {
    /// One-line description of the exemplar.
    pub fn narrative(&self) -> String {
        let parts: Vec<String> = self
            .assignments
            .iter()
            .map(|(var, a)| format!("{var} = {} ({} of sources)", a.maxval, percent(a.maxfrac)))
            .collect();
        if parts.is_empty() {
            format!("{}: no variable has a meaningful most common value.", self.date)
        } else {
            format!("{}: the most common source has {}.", self.date, parts.join(", "))
        }
    }
}

fn percent(frac: f64) -> String {
    format!("{}%", sig3(frac * 100.0))
}

/// One exemplar per date, in date order.
pub fn exemplar(rows: &[DimStatsRow], opts: &ExemplarOptions) -> Vec<ExemplarRecord> {
    let mut by_date: BTreeMap<&str, BTreeMap<String, Assignment>> = BTreeMap::new();
    for r in rows {
        let entry = by_date.entry(&r.date).or_default();
        if r.nnz == 0
            || r.ncol < opts.min_ncol
            || r.maxfrac < opts.min_maxfrac
            || opts.exclude.iter().any(|e| e == &r.variable)
        {
            continue;
        }
        entry.insert(
            r.variable.clone(),
            Assignment {
                maxval: r.maxval.clone(),
                maxcount: r.maxcount,
                maxfrac: r.maxfrac,
            },
        );
    }
    by_date
        .into_iter()
        .map(|(date, assignments)| ExemplarRecord {
            date: date.to_string(),
            assignments,
        })
        .collect()
}

pub fn write_exemplar_tsv<W: Write>(records: &[ExemplarRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "date\tvariable\tmaxval\tmaxcount\tmaxfrac")?;
    for rec in records {
        for (var, a) in &rec.assignments {
            writeln!(out, "{}\t{var}\t{}\t{}\t{}", rec.date, a.maxval, a.maxcount, sig3(a.maxfrac))?;
        }
    }
    out.flush()
}

pub fn write_exemplar_text<W: Write>(records: &[ExemplarRecord], mut out: W) -> std::io::Result<()> {
    for rec in records {
        writeln!(out, "{}", rec.narrative())?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assoc::{col_key, Triple};
    use proptest::prelude::*;

    fn arr(cells: &[(&str, &str, &str)]) -> AssocArray {
        AssocArray::build(cells.iter().map(|&(r, var, v)| Triple::new(r, col_key(var, v), 1))).unwrap()
    }

    #[test]
    fn hand_counted_os() {
        let a = arr(&[("r1", "os", "linux"), ("r2", "os", "linux"), ("r3", "os", "win")]);
        let r = dim_row(&a, "d", "os", "os|");
        assert_eq!((r.nrow, r.ncol, r.nnz, r.maxval.as_str(), r.maxcount), (3, 2, 3, "linux", 2));
        assert_eq!(sig3(r.maxfrac), "0.667");
        assert!(!r.tie);
    }

    #[test]
    fn single_cell_and_absent() {
        let a = arr(&[("r1", "os", "linux")]);
        assert_eq!(dim_row(&a, "d", "os", "os|").maxfrac, 1.0);
        let r = dim_row(&a, "d", "cve", "cve|");
        assert_eq!(r, DimStatsRow::absent("d", "cve"));
    }

    #[test]
    fn ties_break_to_smallest_and_flag() {
        let a = arr(&[("r1", "os", "b"), ("r2", "os", "a"), ("r3", "os", "c"), ("r4", "os", "b"), ("r5", "os", "a")]);
        let r = dim_row(&a, "d", "os", "os|");
        assert_eq!((r.maxval.as_str(), r.maxcount, r.tie), ("a", 2, true));
    }

    #[test]
    fn escaped_values_are_reported_raw() {
        let a = arr(&[("r1", "os", "Linux|2.6"), ("r2", "os", "Linux|2.6")]);
        assert_eq!(dim_row(&a, "d", "os", "os|").maxval, "Linux|2.6");
    }

    #[test]
    fn sig3_forms() {
        assert_eq!(sig3(123_843.0 / 124_300.0), "0.996");
        assert_eq!(sig3(1.0), "1");
        assert_eq!(sig3(0.000_143_2), "0.000143");
        assert_eq!(sig3(0.9999), "1");
        assert_eq!(sig3(0.5), "0.5");
        assert_eq!(sig3(0.0), "0");
    }

    #[test]
    fn relevance_classes() {
        let t = RelevanceThresholds::default();
        let row = |ncol, maxfrac| DimStatsRow { ncol, maxfrac, ..DimStatsRow::absent("d", "v") };
        assert_eq!(classify_relevance(&row(1, 1.0), &t), Relevance::Irrelevant);
        assert_eq!(classify_relevance(&row(22, 0.996), &t), Relevance::Irrelevant);
        assert_eq!(classify_relevance(&row(10_304, 0.049), &t), Relevance::RelevantHighCardinality);
        assert_eq!(classify_relevance(&row(3, 0.587), &t), Relevance::RelevantLowCardinality);
    }

    #[test]
    fn summary_rows_collapse_variables() {
        let a = arr(&[
            ("r1", "os", "x"),
            ("r1", "cve", "c1"),
            ("r1", "cve", "c2"),
            ("r2", "os", "y"),
            ("r2", LAST_SEEN_HOUR, "12"),
        ]);
        let r = summary_row(&a, "d", GREY_META, &[LAST_SEEN_HOUR]);
        assert_eq!((r.nrow, r.ncol, r.nnz, r.maxval.as_str(), r.maxcount), (2, 2, 3, "os", 2));
    }

    #[test]
    fn exemplar_per_date() {
        let row = |date: &str, var: &str, maxval: &str, ncol| DimStatsRow {
            date: date.into(),
            variable: var.into(),
            nrow: 10,
            ncol,
            nnz: 10,
            maxval: maxval.into(),
            maxcount: 6,
            maxfrac: 0.6,
            tie: false,
        };
        let rows = [
            row("d1", "os", "win", 3),
            row("d2", "os", "linux", 3),
            row("d1", "spoofable", "1", 1),
            row("d2", "port", "TCP/23", 4),
        ];
        let ex = exemplar(&rows, &ExemplarOptions::default());
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].assignments.len(), 1);
        assert_eq!(ex[0].assignments["os"].maxval, "win");
        assert_eq!(ex[1].assignments["os"].maxval, "linux");
        assert_eq!(ex[1].assignments["port"].maxval, "TCP/23");
        assert!(ex[0].narrative().contains("os = win (60% of sources)"));
    }

    /// Nested-map oracle: variable -> value -> rows.
    fn oracle(cells: &[(u8, u8, u8)]) -> BTreeMap<String, BTreeMap<String, BTreeSet<u8>>> {
        let mut m: BTreeMap<String, BTreeMap<String, BTreeSet<u8>>> = BTreeMap::new();
        for &(r, var, val) in cells {
            m.entry(format!("v{var}")).or_default().entry(format!("x{val}")).or_default().insert(r);
        }
        m
    }

    proptest! {
        #[test]
        fn matches_nested_map_oracle(cells in prop::collection::vec((0u8..50, 0u8..4, 0u8..12), 0..300)) {
            let a = AssocArray::build(cells.iter().map(|&(r, var, val)| {
                Triple::new(format!("r{r}"), col_key(&format!("v{var}"), &format!("x{val}")), 1)
            }).collect::<BTreeSet<_>>()).unwrap();
            let o = oracle(&cells);
            for var in 0..4u8 {
                let name = format!("v{var}");
                let row = dim_row(&a, "d", &name, &format!("{name}|"));
                let Some(vals) = o.get(&name) else {
                    prop_assert_eq!(row.nnz, 0);
                    continue;
                };
                let rows: BTreeSet<u8> = vals.values().flatten().copied().collect();
                let nnz: usize = vals.values().map(|s| s.len()).sum();
                let best = vals.iter().map(|(v, s)| (s.len(), std::cmp::Reverse(v.clone()))).max().unwrap();
                prop_assert_eq!(row.nrow as usize, rows.len());
                prop_assert_eq!(row.ncol as usize, vals.len());
                prop_assert_eq!(row.nnz as usize, nnz);
                prop_assert_eq!(&row.maxval, &best.1 .0);
                prop_assert_eq!(row.maxcount as usize, best.0);
                let sums = a.select_cols(&format!("{name}|")).col_sums();
                prop_assert_eq!(Some(row.maxcount), sums.values().max().copied());
            }
        }

        #[test]
        fn exemplar_invariant_under_rescaling(
            cells in prop::collection::vec((0u8..40, 0u8..3, 0u8..6), 1..200),
            k in 1u64..50,
        ) {
            let build = |scale: u64| {
                let a = AssocArray::build(cells.iter().map(|&(r, var, val)| {
                    Triple::new(format!("r{r}"), col_key(&format!("v{var}"), &format!("x{val}")), scale)
                })).unwrap();
                let rows: Vec<_> = (0..3).map(|v| dim_row(&a, "d", &format!("v{v}"), &format!("v{v}|"))).collect();
                let opts = ExemplarOptions { min_ncol: 1, min_maxfrac: 0.0, ..Default::default() };
                exemplar(&rows, &opts)
                    .into_iter()
                    .flat_map(|e| e.assignments.into_iter().map(|(v, a)| (v, a.maxval)))
                    .collect::<Vec<_>>()
            };
            prop_assert_eq!(build(1), build(k));
        }
    }
}

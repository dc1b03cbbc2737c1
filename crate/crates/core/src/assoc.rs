//! Hypersparse string-keyed count matrices.
//!
//! An [`AssocArray`] stores `(row, col) -> count` triples sorted by row then
//! column, with the row and column key sets kept alongside. Column keys
//! follow the `variable|value` convention so slicing one variable out of a
//! metadata matrix is a prefix filter.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

/// Separator between the variable name and the value in a column key.
pub const KEY_SEP: char = '|';

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("triple {index}: empty {which} key")]
    EmptyKey { index: usize, which: &'static str },
    #[error("triple {index} ({row}, {col}): value must be >= 1")]
    ZeroValue { index: usize, row: String, col: String },
    #[error("count overflow at ({row}, {col})")]
    Overflow { row: String, col: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("key {0:?} contains a tab or line break and cannot be written as TSV")]
    Unwritable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub row: String,
    pub col: String,
    pub val: u64,
}

impl Triple {
    pub fn new(row: impl Into<String>, col: impl Into<String>, val: u64) -> Self {
        Self {
            row: row.into(),
            col: col.into(),
            val,
        }
    }
}

/// Selects what [`AssocArray::row_degrees`] counts per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowMode {
    /// Number of nonzero entries in the row.
    Degree,
    /// Sum of the values in the row.
    Sum,
}

/// Immutable sparse count matrix keyed by strings on both axes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssocArray {
    triples: Vec<Triple>,
    rows: Vec<String>,
    cols: Vec<String>,
}

impl AssocArray {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an array from triples, summing duplicate `(row, col)` entries.
    pub fn build<I>(triples: I) -> Result<Self, AssocError>
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut acc: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (index, t) in triples.into_iter().enumerate() {
            if t.row.is_empty() {
                return Err(AssocError::EmptyKey { index, which: "row" });
            }
            if t.col.is_empty() {
                return Err(AssocError::EmptyKey { index, which: "column" });
            }
            if t.val == 0 {
                return Err(AssocError::ZeroValue {
                    index,
                    row: t.row,
                    col: t.col,
                });
            }
            match acc.entry((t.row, t.col)) {
                Entry::Vacant(slot) => {
                    slot.insert(t.val);
                }
                Entry::Occupied(mut slot) => {
                    let Some(sum) = slot.get().checked_add(t.val) else {
                        let (row, col) = slot.key().clone();
                        return Err(AssocError::Overflow { row, col });
                    };
                    *slot.get_mut() = sum;
                }
            }
        }
        let triples = acc
            .into_iter()
            .map(|((row, col), val)| Triple { row, col, val })
            .collect();
        Ok(Self::from_sorted(triples))
    }

    /// `triples` must already be sorted by `(row, col)` and free of duplicates.
    fn from_sorted(triples: Vec<Triple>) -> Self {
        let mut rows: Vec<String> = Vec::new();
        for t in &triples {
            if rows.last() != Some(&t.row) {
                rows.push(t.row.clone());
            }
        }
        let mut cols: Vec<String> = triples.iter().map(|t| t.col.clone()).collect();
        cols.sort_unstable();
        cols.dedup();
        Self {
            triples,
            rows,
            cols,
        }
    }

    pub fn nnz(&self) -> usize {
        self.triples.len()
    }

    pub fn nrow(&self) -> usize {
        self.rows.len()
    }

    pub fn ncol(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn row_keys(&self) -> &[String] {
        &self.rows
    }

    pub fn col_keys(&self) -> &[String] {
        &self.cols
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn get(&self, row: &str, col: &str) -> Option<u64> {
        self.triples
            .binary_search_by(|t| (t.row.as_str(), t.col.as_str()).cmp(&(row, col)))
            .ok()
            .map(|i| self.triples[i].val)
    }

    pub fn total(&self) -> u64 {
        self.triples.iter().map(|t| t.val).sum()
    }

    /// Sub-array of the triples whose column key starts with `prefix`.
    pub fn select_cols(&self, prefix: &str) -> Self {
        self.filter(|t| t.col.starts_with(prefix))
    }

    /// Sub-array of the rows for which `keep` returns true.
    pub fn select_rows<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&str) -> bool,
    {
        self.filter(|t| keep(&t.row))
    }

    fn filter<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&Triple) -> bool,
    {
        let triples = self.triples.iter().filter(|t| keep(t)).cloned().collect();
        Self::from_sorted(triples)
    }

    pub fn col_sums(&self) -> BTreeMap<String, u64> {
        let mut sums = BTreeMap::new();
        for t in &self.triples {
            *sums.entry(t.col.clone()).or_insert(0) += t.val;
        }
        sums
    }

    pub fn row_degrees(&self, mode: RowMode) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for t in &self.triples {
            let add = match mode {
                RowMode::Degree => 1,
                RowMode::Sum => t.val,
            };
            *out.entry(t.row.clone()).or_insert(0) += add;
        }
        out
    }

    /// Replaces every row key through `f`. `f` must be injective on the
    /// existing row keys or entries will be merged by summation.
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self, AssocError>
    where
        F: FnMut(&str) -> String,
    {
        Self::build(
            self.triples
                .iter()
                .map(|t| Triple::new(f(&t.row), t.col.clone(), t.val)),
        )
    }

    /// Writes `row<TAB>col<TAB>val` lines in key order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<(), AssocError> {
        for t in &self.triples {
            for key in [&t.row, &t.col] {
                if key.contains(['\t', '\n', '\r']) {
                    return Err(AssocError::Unwritable(key.clone()));
                }
            }
            writeln!(out, "{}\t{}\t{}", t.row, t.col, t.val)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self, AssocError> {
        let mut triples = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(row), Some(col), Some(val), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(AssocError::Parse {
                    line: lineno,
                    msg: "expected 3 tab-separated fields".into(),
                });
            };
            let val: u64 = val.parse().map_err(|_| AssocError::Parse {
                line: lineno,
                msg: format!("bad count {val:?}"),
            })?;
            let msg = if row.is_empty() || col.is_empty() {
                Some("empty key")
            } else if val == 0 {
                Some("count must be >= 1")
            } else {
                None
            };
            if let Some(msg) = msg {
                return Err(AssocError::Parse {
                    line: lineno,
                    msg: msg.into(),
                });
            }
            triples.push(Triple::new(row, col, val));
        }
        Self::build(triples)
    }
}

/// Percent-escapes the characters that would break a `variable|value`
/// column key or a TSV line.
pub fn escape_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '%' => out.push_str("%25"),
            '|' => out.push_str("%7C"),
            '\t' => out.push_str("%09"),
            '\n' => out.push_str("%0A"),
            '\r' => out.push_str("%0D"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut rest = value;
    while let Some(pos) = rest.find('%') {
        out.push_str(&rest[..pos]);
        let code = rest.get(pos + 1..pos + 3);
        let decoded = match code {
            Some("25") => Some('%'),
            Some("7C") => Some('|'),
            Some("09") => Some('\t'),
            Some("0A") => Some('\n'),
            Some("0D") => Some('\r'),
            _ => None,
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[pos + 3..];
            }
            None => {
                out.push('%');
                rest = &rest[pos + 1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Builds the column key `variable|value`, escaping the value.
pub fn col_key(variable: &str, value: &str) -> String {
    format!("{variable}{KEY_SEP}{}", escape_value(value))
}

/// Splits a column key into `(variable, unescaped value)`.
pub fn split_col_key(key: &str) -> (&str, String) {
    match key.split_once(KEY_SEP) {
        Some((var, val)) => (var, unescape_value(val)),
        None => (key, String::new()),
    }
}

use chrono::{DateTime, Timelike, Utc};

use super::DistError;
use crate::assoc::{split_col_key, AssocArray, KEY_SEP};

/// Fraction of timestamps falling in each UTC hour 0..23.
pub fn hour_histogram(times: &[DateTime<Utc>]) -> Result<[f64; 24], DistError> {
    if times.is_empty() {
        return Err(DistError::Empty);
    }
    let mut counts = [0u64; 24];
    for t in times {
        counts[t.hour() as usize] += 1;
    }
    let n = times.len() as f64;
    Ok(counts.map(|c| c as f64 / n))
}

/// Default number of values kept per variable in the categorical plots.
pub fn default_top_k(variable: &str) -> Option<usize> {
    match variable {
        "os" => Some(16),
        "cve" => Some(25),
        "classification" => Some(3),
        _ => None,
    }
}

/// Column sums of `variable|*` divided by the variable's total, in
/// descending order (ties by value), truncated to `top_k`. For the 0/1
/// metadata matrix the total equals the variable's nonzero count.
pub fn categorical_distribution(
    array: &AssocArray,
    variable: &str,
    top_k: Option<usize>,
) -> Vec<(String, f64)> {
    let sub = array.select_cols(&format!("{variable}{KEY_SEP}"));
    let total = sub.total() as f64;
    let mut out: Vec<(String, u64)> = sub
        .col_sums()
        .into_iter()
        .map(|(k, v)| (split_col_key(&k).1, v))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        out.truncate(k);
    }
    out.into_iter().map(|(v, c)| (v, c as f64 / total)).collect()
}

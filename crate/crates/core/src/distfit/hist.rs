use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DistError;

/// Lower edge `2^floor(log2 d)` of the power-of-two bin holding `d`.
pub fn log2_bin(d: u64) -> Result<u64, DistError> {
    if d == 0 {
        return Err(DistError::ZeroCount);
    }
    Ok(1u64 << (63 - d.leading_zeros()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub label: u64,
    pub count: u64,
    pub fraction: f64,
}

/// Fractions of a sample falling in each nonempty power-of-two bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogBinnedHistogram {
    pub bins: Vec<HistBin>,
    pub n: u64,
}

impl LogBinnedHistogram {
    /// Builds from `label -> count`, dropping empty bins. Labels must be
    /// powers of two.
    pub fn from_bin_counts(counts: &BTreeMap<u64, u64>) -> Result<Self, DistError> {
        let n: u64 = counts.values().sum();
        if n == 0 {
            return Err(DistError::Empty);
        }
        let mut bins = Vec::new();
        for (&label, &count) in counts {
            if !label.is_power_of_two() {
                return Err(DistError::InvalidParams(format!(
                    "bin label {label} is not a power of two"
                )));
            }
            if count > 0 {
                bins.push(HistBin {
                    label,
                    count,
                    fraction: count as f64 / n as f64,
                });
            }
        }
        Ok(Self { bins, n })
    }

    pub fn labels(&self) -> impl Iterator<Item = u64> + '_ {
        self.bins.iter().map(|b| b.label)
    }

    /// Upper edge of the highest occupied bin.
    pub fn upper_edge(&self) -> u64 {
        self.bins.last().map_or(1, |b| b.label.saturating_mul(2) - 1)
    }
}

pub fn log_bin(values: &[u64]) -> Result<LogBinnedHistogram, DistError> {
    if values.is_empty() {
        return Err(DistError::Empty);
    }
    let mut counts = BTreeMap::new();
    for &d in values {
        *counts.entry(log2_bin(d)?).or_insert(0u64) += 1;
    }
    LogBinnedHistogram::from_bin_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_edges() {
        assert_eq!(log2_bin(1).unwrap(), 1);
        assert_eq!(log2_bin(32).unwrap(), 32);
        assert_eq!(log2_bin(63).unwrap(), 32);
        assert_eq!(log2_bin(100).unwrap(), 64);
        assert_eq!(log2_bin(u64::MAX).unwrap(), 1 << 63);
        assert!(matches!(log2_bin(0), Err(DistError::ZeroCount)));
    }

    #[test]
    fn hand_binning() {
        let h = log_bin(&[1, 1, 2, 3]).unwrap();
        assert_eq!(h.n, 4);
        assert_eq!(
            h.bins.iter().map(|b| (b.label, b.fraction)).collect::<Vec<_>>(),
            [(1, 0.5), (2, 0.5)]
        );
        let h = log_bin(&[64]).unwrap();
        assert_eq!(h.bins, [HistBin { label: 64, count: 1, fraction: 1.0 }]);
        assert_eq!(h.upper_edge(), 127);
    }

    #[test]
    fn errors() {
        assert!(matches!(log_bin(&[]), Err(DistError::Empty)));
        assert!(matches!(log_bin(&[3, 0]), Err(DistError::ZeroCount)));
        let mut bad = BTreeMap::new();
        bad.insert(3u64, 1u64);
        assert!(LogBinnedHistogram::from_bin_counts(&bad).is_err());
    }

    #[test]
    fn fractions_sum_to_one_and_labels_increase() {
        let values: Vec<u64> = (1..5000).map(|i| (i * 7919) % 3001 + 1).collect();
        let h = log_bin(&values).unwrap();
        let total: f64 = h.bins.iter().map(|b| b.fraction).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(h.bins.windows(2).all(|w| w[0].label < w[1].label));
        assert!(h.bins.iter().all(|b| b.label.is_power_of_two()));
    }
}

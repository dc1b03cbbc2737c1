//! Heavy-tail and categorical distributions.

mod cauchy;
mod categorical;
mod fit;
mod hist;
mod zm;

use thiserror::Error;

pub use cauchy::{
    cauchy_eval, degree_factor, fit_cauchy, CauchyFit, CauchyFitOptions, CauchyParams,
    ReferenceTime,
};
pub use categorical::{categorical_distribution, default_top_k, hour_histogram};
pub use fit::{binned_model, fit_zm, ZmFit, ZmFitOptions, ZmLoss};
pub use hist::{log2_bin, log_bin, HistBin, LogBinnedHistogram};
pub use zm::{zm_binned_pmf, zm_pmf, zm_sample, ZmParams, ZmSampler};

#[derive(Debug, Error)]
pub enum DistError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("empty input")]
    Empty,
    #[error("counts must be >= 1")]
    ZeroCount,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
}

/// Compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in values {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}

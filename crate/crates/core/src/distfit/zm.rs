use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{neumaier_sum, DistError};

/// Zipf-Mandelbrot law `p(d) ∝ (d + delta)^-alpha` on `d = 1..=dmax`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZmParams {
    pub alpha: f64,
    pub delta: f64,
    pub dmax: u64,
}

impl ZmParams {
    pub fn new(alpha: f64, delta: f64, dmax: u64) -> Result<Self, DistError> {
        let p = Self { alpha, delta, dmax };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DistError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(DistError::InvalidParams(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        // d + delta > 0 on the whole support reduces to 1 + delta > 0.
        if !(self.delta.is_finite() && self.delta > -1.0) {
            return Err(DistError::InvalidParams(format!(
                "delta must be > -1, got {}",
                self.delta
            )));
        }
        if self.dmax == 0 {
            return Err(DistError::InvalidParams("dmax must be >= 1".into()));
        }
        Ok(())
    }

    fn weight(&self, d: u64) -> f64 {
        (d as f64 + self.delta).powf(-self.alpha)
    }
}

/// Normalized probabilities; element `i` is `p(i + 1)`.
pub fn zm_pmf(p: &ZmParams) -> Result<Vec<f64>, DistError> {
    p.validate()?;
    let weights: Vec<f64> = (1..=p.dmax).map(|d| p.weight(d)).collect();
    let z = neumaier_sum(weights.iter().copied());
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Exact per-bin mass of [`zm_pmf`] over bins `[2^k, 2^(k+1))`, the last bin
/// truncated at `dmax`. Returns `(label, probability)` for every bin.
pub fn zm_binned_pmf(p: &ZmParams) -> Result<Vec<(u64, f64)>, DistError> {
    let pmf = zm_pmf(p)?;
    let mut out = Vec::new();
    let mut lo = 1u64;
    while lo <= p.dmax {
        let hi = (2 * lo - 1).min(p.dmax);
        let mass = neumaier_sum(pmf[(lo - 1) as usize..hi as usize].iter().copied());
        out.push((lo, mass));
        lo *= 2;
    }
    Ok(out)
}

/// Inverse-CDF sampler over the normalized pmf.
#[derive(Debug, Clone)]
pub struct ZmSampler {
    cdf: Vec<f64>,
}

impl ZmSampler {
    pub fn new(p: &ZmParams) -> Result<Self, DistError> {
        let pmf = zm_pmf(p)?;
        let mut cdf = Vec::with_capacity(pmf.len());
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for x in pmf {
            let t = sum + x;
            comp += if sum.abs() >= x.abs() {
                (sum - t) + x
            } else {
                (x - t) + sum
            };
            sum = t;
            cdf.push(sum + comp);
        }
        Ok(Self { cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = *self.cdf.last().expect("support is nonempty");
        let u: f64 = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u64 + 1
    }
}

/// `n` independent draws, deterministic for a fixed `seed`.
pub fn zm_sample(n: usize, p: &ZmParams, seed: u64) -> Result<Vec<u64>, DistError> {
    let sampler = ZmSampler::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_support() {
        for (a, d) in [(0.5, -0.5), (2.0, 3.0), (1.75, 29.17)] {
            assert_eq!(zm_pmf(&ZmParams::new(a, d, 1).unwrap()).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn harmonic_hand_computation() {
        // 1 + 1/2 + 1/3 + 1/4 = 25/12
        let pmf = zm_pmf(&ZmParams::new(1.0, 0.0, 4).unwrap()).unwrap();
        let want = [12.0 / 25.0, 6.0 / 25.0, 4.0 / 25.0, 3.0 / 25.0];
        for (got, want) in pmf.iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert!((want[0] - 0.48).abs() < 1e-15);
    }

    #[test]
    fn ratio_law() {
        let pmf = zm_pmf(&ZmParams::new(2.0, 0.0, 1 << 16).unwrap()).unwrap();
        assert!((pmf[0] / pmf[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ZmParams::new(0.0, 0.0, 10).is_err());
        assert!(ZmParams::new(1.0, -1.0, 10).is_err());
        assert!(ZmParams::new(1.0, 0.0, 0).is_err());
        assert!(ZmParams::new(f64::NAN, 0.0, 10).is_err());
        assert!(ZmParams::new(1.75, -0.328, 10).is_ok());
    }

    #[test]
    fn strictly_decreasing() {
        for (a, d) in [(0.3, -0.9), (1.75, 29.17), (2.0, 0.72), (4.0, 100.0)] {
            let pmf = zm_pmf(&ZmParams::new(a, d, 5000).unwrap()).unwrap();
            assert!(pmf.windows(2).all(|w| w[1] < w[0]), "alpha={a} delta={d}");
        }
    }

    #[test]
    fn binned_mass_sums_to_one() {
        let p = ZmParams::new(1.75, -0.328, 1000).unwrap();
        let bins = zm_binned_pmf(&p).unwrap();
        assert_eq!(bins.iter().map(|b| b.0).collect::<Vec<_>>(), [1, 2, 4, 8, 16, 32, 64, 128, 256, 512]);
        assert!((neumaier_sum(bins.iter().map(|b| b.1)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_edge_cases() {
        let p = ZmParams::new(2.0, 0.0, 1).unwrap();
        assert!(zm_sample(1000, &p, 1).unwrap().iter().all(|&d| d == 1));
        let p = ZmParams::new(1.75, 29.17, 1 << 12).unwrap();
        assert_eq!(zm_sample(500, &p, 42).unwrap(), zm_sample(500, &p, 42).unwrap());
        assert_ne!(zm_sample(500, &p, 42).unwrap(), zm_sample(500, &p, 43).unwrap());
        assert!(zm_sample(5000, &p, 7).unwrap().iter().all(|&d| (1..=1 << 12).contains(&d)));
    }

    #[test]
    fn sampler_matches_pmf_at_one() {
        let p = ZmParams::new(2.0, 0.0, 1 << 20).unwrap();
        let n = 100_000;
        let draws = zm_sample(n, &p, 2024).unwrap();
        let p1 = zm_pmf(&p).unwrap()[0];
        let ones = draws.iter().filter(|&&d| d == 1).count() as f64 / n as f64;
        let se = (p1 * (1.0 - p1) / n as f64).sqrt();
        assert!((ones - p1).abs() < 3.0 * se, "empirical {ones} vs {p1} (se {se})");
    }
}

//! Modified Cauchy temporal model for low-frequency sources:
//! `log2(d) / log2(sqrt(Nv)) * beta / (beta + |t - t0|^alpha)`.

use serde::{Deserialize, Serialize};

use super::fit::{compass_search, grid_linear};
use super::DistError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyParams {
    pub alpha: f64,
    pub beta: f64,
    pub t0: f64,
    pub nv: u64,
}

/// Degree factor `log2(d) / log2(sqrt(Nv))`, defined for `1 < d < sqrt(Nv)`.
pub fn degree_factor(d: u64, nv: u64) -> Result<f64, DistError> {
    let root = (nv as f64).sqrt();
    if d <= 1 || (d as f64) >= root {
        return Err(DistError::OutOfDomain(format!(
            "d = {d} is outside (1, sqrt(Nv) = {root}); sources with d > sqrt(Nv) are \
             characterized by the overlap fraction instead"
        )));
    }
    Ok((d as f64).log2() / root.log2())
}

pub fn cauchy_eval(d: u64, t: f64, p: &CauchyParams) -> Result<f64, DistError> {
    if !(p.alpha > 0.0 && p.beta > 0.0) {
        return Err(DistError::InvalidParams(format!(
            "alpha and beta must be > 0, got {} and {}",
            p.alpha, p.beta
        )));
    }
    let g = degree_factor(d, p.nv)?;
    Ok(g * p.beta / (p.beta + (t - p.t0).abs().powf(p.alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReferenceTime {
    /// Collection time is known and held fixed.
    Known(f64),
    /// Fit `t0` as well, starting from the given guess.
    Fit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CauchyFitOptions {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_points: usize,
}

impl Default for CauchyFitOptions {
    fn default() -> Self {
        Self {
            alpha_min: 0.5,
            alpha_max: 3.0,
            alpha_step: 0.05,
            beta_min: 1e-3,
            beta_max: 1e6,
            beta_points: 91,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyFit {
    pub params: CauchyParams,
    pub mse: f64,
    /// The optimum sits on the upper `beta` bound: the series is flat and
    /// the temporal term carries no information.
    pub beta_at_boundary: bool,
}

pub fn fit_cauchy(
    series: &[(f64, f64)],
    d: u64,
    nv: u64,
    t0: ReferenceTime,
    opts: &CauchyFitOptions,
) -> Result<CauchyFit, DistError> {
    let n_params = match t0 {
        ReferenceTime::Known(_) => 2,
        ReferenceTime::Fit(_) => 3,
    };
    if series.len() < n_params {
        return Err(DistError::Degenerate(format!(
            "{} points cannot determine {n_params} parameters",
            series.len()
        )));
    }
    if !(opts.beta_min > 0.0 && opts.beta_max > opts.beta_min) || opts.beta_points < 2 {
        return Err(DistError::InvalidParams("bad beta grid".into()));
    }
    let g = degree_factor(d, nv)?;
    let (lb_lo, lb_hi) = (opts.beta_min.ln(), opts.beta_max.ln());
    let lb_step = (lb_hi - lb_lo) / (opts.beta_points - 1) as f64;

    let sse = |alpha: f64, ln_beta: f64, t0: f64| -> f64 {
        if alpha <= 0.0 || ln_beta < lb_lo || ln_beta > lb_hi {
            return f64::INFINITY;
        }
        let beta = ln_beta.exp();
        series
            .iter()
            .map(|&(t, y)| {
                let m = g * beta / (beta + (t - t0).abs().powf(alpha));
                (m - y) * (m - y)
            })
            .sum::<f64>()
            / series.len() as f64
    };

    let t0_start = match t0 {
        ReferenceTime::Known(x) | ReferenceTime::Fit(x) => x,
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in grid_linear(opts.alpha_min, opts.alpha_max, opts.alpha_step) {
        for i in 0..opts.beta_points {
            let lb = lb_lo + lb_step * i as f64;
            let e = sse(a, lb, t0_start);
            if e < best.0 {
                best = (e, a, lb);
            }
        }
    }

    let (alpha, ln_beta, t0_fit, mse) = match t0 {
        ReferenceTime::Known(t0) => {
            let (x, e) = compass_search(
                |x: &[f64; 2]| sse(x[0], x[1], t0),
                [best.1, best.2],
                [opts.alpha_step, lb_step],
                1e-10,
            );
            (x[0], x[1], t0, e)
        }
        ReferenceTime::Fit(guess) => {
            let span = series
                .iter()
                .map(|p| (p.0 - guess).abs())
                .fold(0.0f64, f64::max)
                .max(1.0);
            let (x, e) = compass_search(
                |x: &[f64; 3]| sse(x[0], x[1], x[2]),
                [best.1, best.2, guess],
                [opts.alpha_step, lb_step, span / 10.0],
                1e-10,
            );
            (x[0], x[1], x[2], e)
        }
    };
    Ok(CauchyFit {
        params: CauchyParams {
            alpha,
            beta: ln_beta.exp(),
            t0: t0_fit,
            nv,
        },
        mse,
        beta_at_boundary: lb_hi - ln_beta <= lb_step * 1e-6,
    })
}

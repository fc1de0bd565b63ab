//! Chi-square and standard normal distribution functions.

use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Chi-square distribution with integer degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChiSquare {
    df: u32,
}

impl ChiSquare {
    pub fn new(df: u32) -> Result<Self> {
        if df == 0 {
            return Err(Error::Domain("chi-square needs df >= 1".into()));
        }
        Ok(Self { df })
    }

    pub fn df(&self) -> u32 {
        self.df
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        gamma_lr(self.df as f64 / 2.0, x / 2.0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let k = self.df as f64 / 2.0;
        ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
    }

    /// Inverse CDF by safeguarded Newton iteration inside a shrinking bracket.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
        }
        let k = self.df as f64;
        // Wilson-Hilferty starting point
        let z = normal_quantile(p)?;
        let h = 2.0 / (9.0 * k);
        let mut x = (k * (1.0 - h + z * h.sqrt()).powi(3)).max(1e-8);

        let (mut lo, mut hi) = (0.0, x.max(1.0));
        while self.cdf(hi) < p {
            lo = hi;
            hi *= 2.0;
        }
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let f = self.cdf(x) - p;
            if f == 0.0 {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let dens = self.pdf(x);
            let mut next = if dens > 0.0 { x - f / dens } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-14 * x.max(1.0) || hi - lo <= 1e-15 * hi.max(1.0) {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }
}

/// `chi2_{df}` quantile at probability `prob`.
pub fn chi2_quantile(df: u32, prob: f64) -> Result<f64> {
    ChiSquare::new(df)?.quantile(prob)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, `-sqrt(2) erfc^{-1}(2p)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
    }
    Ok(-std::f64::consts::SQRT_2 * erfc_inv(2.0 * p))
}

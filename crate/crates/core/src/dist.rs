//! Latent count distributions for `Y`.
//!
//! The negative binomial counts failures before the `size`-th success,
//! each trial succeeding with probability `prob`, so
//! `P(Y = k) = Γ(k+size)/(Γ(size) k!) · prob^size · (1−prob)^k`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loader;

/// Largest Poisson mean sampled by sequential inversion.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Poisson,
    Binomial,
    NegativeBinomial,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
            Family::NegativeBinomial => "negative-binomial",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Family::Poisson),
            "binomial" => Ok(Family::Binomial),
            "negative-binomial" | "negbin" | "nbinom" => Ok(Family::NegativeBinomial),
            other => Err(Error::Parse(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Params {
    Poisson { theta: f64 },
    Binomial { trials: u64, prob: f64 },
    NegativeBinomial { size: f64, prob: f64 },
}

/// A validated latent count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CountModel {
    params: Params,
}

/// Probabilities `P(Y = 0..=k_max)` together with the omitted upper tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulation {
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl Tabulation {
    pub fn k_max(&self) -> u64 {
        self.probs.len() as u64 - 1
    }
}

impl CountModel {
    pub fn poisson(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::domain(format!("Poisson mean must be finite and > 0, got {theta}")));
        }
        Ok(Self { params: Params::Poisson { theta } })
    }

    pub fn binomial(trials: u64, prob: f64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("binomial trials must be >= 1"));
        }
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::domain(format!("binomial prob must lie in [0, 1], got {prob}")));
        }
        Ok(Self { params: Params::Binomial { trials, prob } })
    }

    pub fn negative_binomial(size: f64, prob: f64) -> Result<Self> {
        if !(size.is_finite() && size > 0.0) {
            return Err(Error::domain(format!("negative binomial size must be > 0, got {size}")));
        }
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(Error::domain(format!("negative binomial prob must lie in (0, 1], got {prob}")));
        }
        Ok(Self { params: Params::NegativeBinomial { size, prob } })
    }

    pub fn from_params(params: Params) -> Result<Self> {
        match params {
            Params::Poisson { theta } => Self::poisson(theta),
            Params::Binomial { trials, prob } => Self::binomial(trials, prob),
            Params::NegativeBinomial { size, prob } => Self::negative_binomial(size, prob),
        }
    }

    pub fn params(&self) -> Params {
        self.params
    }

    pub fn family(&self) -> Family {
        match self.params {
            Params::Poisson { .. } => Family::Poisson,
            Params::Binomial { .. } => Family::Binomial,
            Params::NegativeBinomial { .. } => Family::NegativeBinomial,
        }
    }

    /// Upper end of the support, if finite.
    pub fn max_support(&self) -> Option<u64> {
        match self.params {
            Params::Binomial { trials, .. } => Some(trials),
            _ => None,
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let x = k as f64;
        match self.params {
            Params::Poisson { theta } => loader::ln_dpois(x, theta),
            Params::Binomial { trials, prob } => {
                if k > trials {
                    f64::NEG_INFINITY
                } else {
                    loader::ln_dbinom_raw(x, trials as f64, prob, 1.0 - prob)
                }
            }
            Params::NegativeBinomial { size, prob } => loader::ln_dnbinom(x, size, prob),
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    pub fn mean(&self) -> f64 {
        match self.params {
            Params::Poisson { theta } => theta,
            Params::Binomial { trials, prob } => trials as f64 * prob,
            Params::NegativeBinomial { size, prob } => size * (1.0 - prob) / prob,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.params {
            Params::Poisson { theta } => theta,
            Params::Binomial { trials, prob } => trials as f64 * prob * (1.0 - prob),
            Params::NegativeBinomial { size, prob } => size * (1.0 - prob) / (prob * prob),
        }
    }

    /// `E(s^Y)` in closed form. Entire for Poisson and binomial; the
    /// negative binomial pgf has its pole at `1/(1−prob) > 1`.
    pub fn pgf(&self, s: Complex64) -> Complex64 {
        match self.params {
            Params::Poisson { theta } => (theta * (s - 1.0)).exp(),
            Params::Binomial { trials, prob } => cpow(1.0 - prob + prob * s, trials),
            Params::NegativeBinomial { size, prob } => {
                let denom = Complex64::new(1.0, 0.0) - (1.0 - prob) * s;
                (size * (prob.ln() - denom.ln())).exp()
            }
        }
    }

    /// Derivative of [`pgf`](Self::pgf) with respect to `s`.
    pub fn pgf_derivative(&self, s: Complex64) -> Complex64 {
        match self.params {
            Params::Poisson { theta } => theta * (theta * (s - 1.0)).exp(),
            Params::Binomial { trials, prob } => {
                trials as f64 * prob * cpow(1.0 - prob + prob * s, trials - 1)
            }
            Params::NegativeBinomial { size, prob } => {
                let denom = Complex64::new(1.0, 0.0) - (1.0 - prob) * s;
                size * (1.0 - prob) / denom * self.pgf(s)
            }
        }
    }

    /// Sup of `P(Y=j+1)/P(Y=j)` over `j >= k`, when it is below one.
    fn tail_ratio_bound(&self, k: u64) -> Option<f64> {
        let x = k as f64;
        let q = match self.params {
            Params::Poisson { theta } => theta / (x + 1.0),
            Params::Binomial { .. } => return Some(0.0),
            Params::NegativeBinomial { size, prob } => {
                let here = (x + size) * (1.0 - prob) / (x + 1.0);
                if size < 1.0 {
                    here.max(1.0 - prob)
                } else {
                    here
                }
            }
        };
        (q < 1.0).then_some(q)
    }

    /// Probabilities from 0 up to an index past which the remaining mass is
    /// provably below `floor`, plus a rigorous bound on that remainder.
    fn pmf_until_negligible(&self, floor: f64) -> (Vec<f64>, f64) {
        if let Some(n) = self.max_support() {
            return ((0..=n).map(|k| self.pmf(k)).collect(), 0.0);
        }
        let mode = self.mean().floor() as u64;
        let mut probs = Vec::with_capacity(mode as usize + 64);
        let mut k = 0u64;
        loop {
            let p = self.pmf(k);
            probs.push(p);
            if k > mode {
                if let Some(q) = self.tail_ratio_bound(k) {
                    let bound = p * q / (1.0 - q);
                    if bound < floor {
                        return (probs, bound);
                    }
                }
            }
            k += 1;
        }
    }

    /// Smallest `k_max` with `P(Y > k_max) < tail_eps`; `N` for the binomial.
    pub fn support_bound(&self, tail_eps: f64) -> Result<u64> {
        Ok(self.tabulate(tail_eps)?.k_max())
    }

    /// Tabulate `P(Y = k)` for `k <= support_bound(tail_eps)`.
    pub fn tabulate(&self, tail_eps: f64) -> Result<Tabulation> {
        if !(tail_eps > 0.0 && tail_eps < 1.0) {
            return Err(Error::domain(format!("tail_eps must lie in (0, 1), got {tail_eps}")));
        }
        let (mut probs, beyond) = self.pmf_until_negligible(tail_eps * 1e-6);
        if self.max_support().is_some() {
            return Ok(Tabulation { probs, tail_mass: 0.0 });
        }
        // suffix[k] = P(Y >= k), summed from the small end
        let mut suffix = vec![0.0; probs.len() + 1];
        suffix[probs.len()] = beyond;
        for k in (0..probs.len()).rev() {
            suffix[k] = suffix[k + 1] + probs[k];
        }
        let k_max = (0..probs.len()).find(|&k| suffix[k + 1] < tail_eps).unwrap_or(probs.len() - 1);
        probs.truncate(k_max + 1);
        Ok(Tabulation { probs, tail_mass: suffix[k_max + 1] })
    }

    /// Draw `Y`. Poisson means up to [`POISSON_INVERSION_LIMIT`] use
    /// sequential inversion of the cdf; larger means use `rand_distr`'s
    /// transformed-rejection sampler.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.params {
            Params::Poisson { theta } => sample_poisson(theta, rng),
            Params::Binomial { trials, prob } => {
                Binomial::new(trials, prob).expect("validated binomial parameters").sample(rng)
            }
            Params::NegativeBinomial { size, prob } => {
                if prob == 1.0 {
                    return 0;
                }
                let rate = Gamma::new(size, (1.0 - prob) / prob)
                    .expect("validated negative binomial parameters")
                    .sample(rng);
                if rate <= 0.0 {
                    0
                } else {
                    sample_poisson(rate, rng)
                }
            }
        }
    }
}

fn sample_poisson<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> u64 {
    if theta <= POISSON_INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-theta).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= theta / k as f64;
            cdf += p;
            // cdf can stall just below 1.0 in floating point
            if p == 0.0 && k as f64 > theta {
                break;
            }
        }
        k
    } else {
        Poisson::new(theta).expect("positive finite mean").sample(rng) as u64
    }
}

/// `z^k` for a complex base; switches to `exp(k·ln z)` when repeated
/// squaring would under- or overflow.
pub(crate) fn cpow(z: Complex64, k: u64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if z == Complex64::new(0.0, 0.0) {
        return z;
    }
    if k as f64 * z.norm().ln().abs() > 700.0 || k > u64::from(u32::MAX) {
        (k as f64 * z.ln()).exp()
    } else {
        z.powu(k as u32)
    }
}

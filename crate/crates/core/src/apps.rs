//! Excess deaths from rounded daily averages, and significance levels of
//! tests on a binomial success probability when only `U` is available.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dist::CountModel;
use crate::error::{Error, Result};
use crate::estimation::poisson_mle_closed;
use crate::rounding::{rounded_moments_poisson, rounded_pmf, RoundingScheme};

/// Tail mass ignored when tabulating pmfs for the tests. Binomial
/// tabulations are exact; this only guards the interface.
const TEST_TAIL_EPS: f64 = 1e-15;

/// Pre-period total `X ~ Poisson(θ)` over `n1` days and post-period total
/// `Y ~ Poisson(θ+β)` over `n2` days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessDeathsDesign {
    pub n1: u64,
    pub n2: u64,
    pub theta: f64,
    pub beta: f64,
}

impl ExcessDeathsDesign {
    pub fn new(n1: u64, n2: u64, theta: f64, beta: f64) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::domain("period lengths must be >= 1"));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::domain(format!("theta must be finite and > 0, got {theta}")));
        }
        if !(beta.is_finite() && theta + beta > 0.0) {
            return Err(Error::domain(format!("theta + beta must be > 0, got {}", theta + beta)));
        }
        Ok(Self { n1, n2, theta, beta })
    }

    pub fn ratio(&self) -> f64 {
        self.n2 as f64 / self.n1 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessEstimates {
    /// `u2 − (n2/n1)·u1`.
    pub xi: f64,
    /// MLE of `θ+β` from `u2` minus `(n2/n1)` times the MLE of `θ` from `u1`.
    pub xi_mle: f64,
}

pub fn excess_point_estimates(u1: u64, u2: u64, n1: u64, n2: u64) -> Result<ExcessEstimates> {
    let r = n2 as f64 / n1 as f64;
    let pre = poisson_mle_closed(u1, n1)?.value;
    let post = poisson_mle_closed(u2, n2)?.value;
    Ok(ExcessEstimates { xi: u2 as f64 - r * u1 as f64, xi_mle: post - r * pre })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessMoments {
    pub mean_xi: f64,
    pub var_xi: f64,
    /// Unrounded contrast `ξ* = Y − (n2/n1)X`.
    pub mean_xi_star: f64,
    pub var_xi_star: f64,
}

/// Moments of `ξ = U₂ − (n2/n1)U₁` from the rounded Poisson moments of
/// each period, using independence of the periods.
pub fn excess_moments(design: &ExcessDeathsDesign) -> Result<ExcessMoments> {
    let r = design.ratio();
    let pre = rounded_moments_poisson(design.theta, design.n1)?;
    let post = rounded_moments_poisson(design.theta + design.beta, design.n2)?;
    Ok(ExcessMoments {
        mean_xi: post.mean - r * pre.mean,
        var_xi: post.variance + r * r * pre.variance,
        mean_xi_star: design.beta + design.theta * (1.0 - r),
        var_xi_star: design.beta + design.theta * (1.0 + r * r),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignificanceMode {
    /// Normal-approximation test applied to `Y`.
    ExactY,
    /// The same test applied to `U` as if it were binomial.
    MisspecifiedU,
    /// Exact equal-tail test on the pmf of `U`.
    BinnedU,
}

impl fmt::Display for SignificanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignificanceMode::ExactY => "exact-y",
            SignificanceMode::MisspecifiedU => "misspecified-u",
            SignificanceMode::BinnedU => "binned-u",
        })
    }
}

impl FromStr for SignificanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-y" => Ok(SignificanceMode::ExactY),
            "misspecified-u" => Ok(SignificanceMode::MisspecifiedU),
            "binned-u" => Ok(SignificanceMode::BinnedU),
            other => Err(Error::Parse(format!("unknown significance mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceCurve {
    pub m: u64,
    pub n: u64,
    pub phi0_grid: Vec<f64>,
    pub nominal_alpha: f64,
    pub true_level: Vec<f64>,
    pub mode: SignificanceMode,
}

fn check_test_inputs(m: u64, n: u64, phi0: f64, alpha: f64) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::domain("m and n must be >= 1"));
    }
    if !(phi0 > 0.0 && phi0 < 1.0) {
        return Err(Error::domain(format!("phi0 must lie in (0, 1), got {phi0}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Null probability that the normal-approximation test rejects: `W` at or
/// beyond `mnφ₀ ± z_{α/2}·√(mnφ₀(1−φ₀))`, with `W` distributed per `probs`
/// on the lattice `step·k`.
fn normal_test_level(probs: &[f64], step: u64, m: u64, n: u64, phi0: f64, alpha: f64) -> f64 {
    let big_n = (m * n) as f64;
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let centre = big_n * phi0;
    let half_width = z * (big_n * phi0 * (1.0 - phi0)).sqrt();
    let (lo, hi) = (centre - half_width, centre + half_width);
    (0u64..)
        .zip(probs)
        .filter(|(k, _)| {
            let w = (k * step) as f64;
            w <= lo || w >= hi
        })
        .map(|(_, &p)| p)
        .sum()
}

/// Exact equal-tail rejection region on the lattice: the largest `c1` with
/// `P(U <= c1) <= α/2` and the smallest `c2` with `P(U >= c2) <= α/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRegion {
    pub lower: Option<u64>,
    pub upper: Option<u64>,
    /// `P(U <= lower) + P(U >= upper)` under the null.
    pub level: f64,
}

impl RejectionRegion {
    pub fn rejects(&self, u: u64) -> bool {
        self.lower.is_some_and(|c| u <= c) || self.upper.is_some_and(|c| u >= c)
    }
}

pub fn binned_rejection_region(m: u64, n: u64, phi0: f64, alpha: f64) -> Result<RejectionRegion> {
    check_test_inputs(m, n, phi0, alpha)?;
    let model = CountModel::binomial(m * n, phi0)?;
    let pmf = rounded_pmf(&model, &RoundingScheme::half_up(n)?, TEST_TAIL_EPS)?;
    let probs = pmf.probs();
    let half = alpha / 2.0;

    let mut lower = None;
    let mut lower_mass = 0.0;
    let mut cdf = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cdf += p;
        if cdf > half {
            break;
        }
        lower = Some(i);
        lower_mass = cdf;
    }
    let mut upper = None;
    let mut upper_mass = 0.0;
    let mut sf = 0.0;
    for (i, &p) in probs.iter().enumerate().rev() {
        sf += p;
        if sf > half {
            break;
        }
        upper = Some(i);
        upper_mass = sf;
    }
    let to_u = |i: usize| i as u64 * n;
    Ok(RejectionRegion { lower: lower.map(to_u), upper: upper.map(to_u), level: lower_mass + upper_mass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinnedTestResult {
    pub reject: bool,
    pub true_level: f64,
    pub region: RejectionRegion,
}

/// Exact test of `φ = φ₀` from one rounded observation `u` of a
/// binomial(`mn`, `φ`) total.
pub fn binned_binomial_test(u: u64, m: u64, n: u64, phi0: f64, alpha: f64) -> Result<BinnedTestResult> {
    check_test_inputs(m, n, phi0, alpha)?;
    if !u.is_multiple_of(n) {
        return Err(Error::domain(format!("u = {u} is not a multiple of n = {n}")));
    }
    if u > m * n {
        return Err(Error::domain(format!("u = {u} exceeds the {} trials", m * n)));
    }
    let region = binned_rejection_region(m, n, phi0, alpha)?;
    Ok(BinnedTestResult { reject: region.rejects(u), true_level: region.level, region })
}

/// True significance level of each test at every `φ₀` of the grid,
/// computed from exact null distributions.
pub fn true_significance(
    m: u64,
    n: u64,
    phi0_grid: &[f64],
    alpha: f64,
    mode: SignificanceMode,
) -> Result<SignificanceCurve> {
    let true_level = phi0_grid
        .iter()
        .map(|&phi0| -> Result<f64> {
            check_test_inputs(m, n, phi0, alpha)?;
            let model = CountModel::binomial(m * n, phi0)?;
            Ok(match mode {
                SignificanceMode::ExactY => {
                    let tab = model.tabulate(TEST_TAIL_EPS)?;
                    normal_test_level(&tab.probs, 1, m, n, phi0, alpha)
                }
                SignificanceMode::MisspecifiedU => {
                    let pmf = rounded_pmf(&model, &RoundingScheme::half_up(n)?, TEST_TAIL_EPS)?;
                    normal_test_level(pmf.probs(), n, m, n, phi0, alpha)
                }
                SignificanceMode::BinnedU => binned_rejection_region(m, n, phi0, alpha)?.level,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SignificanceCurve { m, n, phi0_grid: phi0_grid.to_vec(), nominal_alpha: alpha, true_level, mode })
}

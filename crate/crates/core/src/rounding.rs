//! The rounded-average proxy `U = n·[Y/n]`.
//!
//! Support values `u` live on the lattice `{0, n, 2n, …}`. Internally the
//! lattice is indexed by `u/n` so that large `n` and large counts do not
//! overflow.
//!
//! The generating-function and moment series below hold for round half
//! up only; round half to even is available for the pmf and for
//! sampling.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{cpow, CountModel};
use crate::error::{Error, Result};

/// Largest tolerated imaginary part when realizing a complex series.
pub const IMAG_RESIDUAL_LIMIT: f64 = 1e-9;
/// Radius around each root of unity inside which the pgf closed form is
/// not evaluated.
pub const POLE_GUARD: f64 = 1e-6;
/// Smallest `|s|^(n/2−r)` accepted by the pgf closed form.
pub const ORIGIN_GUARD: f64 = 1e-6;
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    #[default]
    HalfUp,
    HalfEven,
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieRule::HalfUp => "half-up",
            TieRule::HalfEven => "half-even",
        })
    }
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-up" => Ok(TieRule::HalfUp),
            "half-even" => Ok(TieRule::HalfEven),
            other => Err(Error::Parse(format!("unknown tie rule `{other}`"))),
        }
    }
}

/// Round a non-negative real to the nearest integer.
///
/// Float inputs can only express ties that are exactly representable;
/// use [`round_ratio`] when the value is a ratio of integers.
pub fn round_to_nearest(x: f64, rule: TieRule) -> Result<u64> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::domain(format!("cannot round {x}: expected a finite value >= 0")));
    }
    let floor = x.floor();
    let frac = x - floor;
    let down = floor as u64;
    Ok(if frac < 0.5 {
        down
    } else if frac > 0.5 {
        down + 1
    } else {
        match rule {
            TieRule::HalfUp => down + 1,
            TieRule::HalfEven => down + (down % 2),
        }
    })
}

/// `[y/n]` computed on integers: ties are detected as `2·(y mod n) == n`.
pub fn round_ratio(y: u64, n: u64, rule: TieRule) -> u64 {
    let q = y / n;
    let twice_rem = 2 * (y % n);
    match twice_rem.cmp(&n) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => match rule {
            TieRule::HalfUp => q + 1,
            TieRule::HalfEven => q + (q % 2),
        },
    }
}

/// The offset `g(u)` and left edge `h(u) = ⌈u − n/2⌉` of the block of
/// `Y` values that round to `u`.
pub fn index_helpers(u: u64, n: u64) -> Result<(i64, i64)> {
    if n == 0 {
        return Err(Error::domain("group size n must be >= 1"));
    }
    if !u.is_multiple_of(n) {
        return Err(Error::domain(format!("u = {u} is not a multiple of n = {n}")));
    }
    let g = if u == 0 { (n / 2) as i64 } else { 0 };
    let h = u as i64 - (n / 2) as i64;
    Ok((g, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoundingScheme {
    n: u64,
    tie_rule: TieRule,
}

impl RoundingScheme {
    pub fn new(n: u64, tie_rule: TieRule) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("group size n must be >= 1"));
        }
        Ok(Self { n, tie_rule })
    }

    pub fn half_up(n: u64) -> Result<Self> {
        Self::new(n, TieRule::HalfUp)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn tie_rule(&self) -> TieRule {
        self.tie_rule
    }

    /// Lattice index `[y/n]` of a latent count.
    pub fn index_of(&self, y: u64) -> u64 {
        round_ratio(y, self.n, self.tie_rule)
    }

    /// `U = n·[y/n]`.
    pub fn apply(&self, y: u64) -> u64 {
        self.n * self.index_of(y)
    }

    /// Lattice index of a support value, checking that it is on the lattice.
    pub fn lattice_index(&self, u: u64) -> Result<u64> {
        if !u.is_multiple_of(self.n) {
            return Err(Error::domain(format!("u = {u} is not a multiple of n = {}", self.n)));
        }
        Ok(u / self.n)
    }

    /// Inclusive range of latent counts mapped to lattice index `idx`.
    pub fn block(&self, idx: u64) -> (u64, u64) {
        let n = self.n;
        let u = idx * n;
        let half = n / 2;
        if self.tie_rule == TieRule::HalfEven && n.is_multiple_of(2) {
            return if idx.is_multiple_of(2) {
                (u.saturating_sub(half), u + half)
            } else {
                (u - half + 1, u + half - 1)
            };
        }
        let (g, h) = index_helpers(u, n).expect("u is on the lattice by construction");
        let lo = (h + g).max(0) as u64;
        let hi = (h + n as i64 - 1) as u64;
        (lo, hi)
    }
}

/// `ω^j = exp(2πij/n)` and the coefficients `a(j)` and offset `r` of the
/// roots-of-unity series.
#[derive(Debug, Clone, PartialEq)]
pub struct RootsOfUnityTable {
    n: u64,
    omega_pow: Vec<Complex64>,
    coeff_a: Vec<Complex64>,
    offset_r: f64,
}

impl RootsOfUnityTable {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("group size n must be >= 1"));
        }
        let nf = n as f64;
        // Entries above n/2 mirror those below as exact conjugates, so the
        // imaginary parts of conjugate-pair terms cancel to rounding.
        let mirrored = |f: &dyn Fn(u64) -> Complex64| -> Vec<Complex64> {
            (0..n)
                .map(|j| match (2 * j).cmp(&n) {
                    std::cmp::Ordering::Less => f(j),
                    // ω^{n/2} = −1 and a(n/2) = ±1 are real
                    std::cmp::Ordering::Equal => Complex64::new(f(j).re.round(), 0.0),
                    std::cmp::Ordering::Greater => f(n - j).conj(),
                })
                .collect()
        };
        let omega_pow = mirrored(&|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / nf));
        let coeff_a = mirrored(&|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if n.is_multiple_of(2) {
                Complex64::new(sign, 0.0)
            } else {
                Complex64::from_polar(sign, PI * j as f64 / nf)
            }
        });
        let offset_r = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
        Ok(Self { n, omega_pow, coeff_a, offset_r })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn omega_pow(&self) -> &[Complex64] {
        &self.omega_pow
    }

    pub fn coeff_a(&self) -> &[Complex64] {
        &self.coeff_a
    }

    pub fn offset_r(&self) -> f64 {
        self.offset_r
    }

    /// The exponent `n/2 − r`, which is an integer for both parities.
    pub fn prefactor_power(&self) -> i32 {
        if self.n.is_multiple_of(2) {
            (self.n / 2) as i32 - 1
        } else {
            ((self.n - 1) / 2) as i32
        }
    }

    /// `½(2r − 1)`: ½ for even `n`, 0 for odd `n`.
    pub fn mean_offset(&self) -> f64 {
        0.5 * (2.0 * self.offset_r - 1.0)
    }

    /// `(ω^j, 1/ω^j, a(j))` for `j = 1..n−1`.
    fn nontrivial(&self) -> impl Iterator<Item = (Complex64, Complex64, Complex64)> + '_ {
        (1..self.n as usize).map(|j| {
            let w = self.omega_pow[j];
            (w, w.conj(), self.coeff_a[j])
        })
    }
}

/// `P(U = u)` on the lattice, truncated where the latent tail is negligible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedPmf {
    n: u64,
    probs: Vec<f64>,
    truncation_mass: f64,
}

impl RoundedPmf {
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Probabilities indexed by `u/n`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Upper bound on the probability of support points not tabulated.
    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    /// `P(U = u)`; zero off the lattice or beyond the tabulation.
    pub fn prob(&self, u: u64) -> f64 {
        if !u.is_multiple_of(self.n) {
            return 0.0;
        }
        self.probs.get((u / self.n) as usize).copied().unwrap_or(0.0)
    }

    /// `(u, P(U=u))` pairs in increasing `u`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (i as u64 * self.n, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(u, p)| u as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(u, p)| (u as f64 - m).powi(2) * p).sum()
    }

    /// `Σ P(U=u) s^u` over the tabulated support.
    pub fn series_pgf(&self, s: Complex64) -> Complex64 {
        let step = cpow(s, self.n);
        let mut power = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for &p in &self.probs {
            acc += p * power;
            power *= step;
        }
        acc
    }
}

/// Tabulate the pmf of `U` by summing latent probabilities over each
/// lattice block.
pub fn rounded_pmf(model: &CountModel, scheme: &RoundingScheme, tail_eps: f64) -> Result<RoundedPmf> {
    let tab = model.tabulate(tail_eps)?;
    let k_max = tab.k_max();
    let mut probs = Vec::new();
    let mut idx = 0u64;
    loop {
        let (lo, hi) = scheme.block(idx);
        if lo > k_max {
            break;
        }
        let hi = hi.min(k_max);
        probs.push(tab.probs[lo as usize..=hi as usize].iter().sum());
        idx += 1;
    }
    Ok(RoundedPmf { n: scheme.n(), probs, truncation_mass: tab.tail_mass })
}

fn require_half_up(scheme: &RoundingScheme, what: &str) -> Result<()> {
    if scheme.tie_rule() != TieRule::HalfUp {
        return Err(Error::Unsupported(format!("{what} is only defined for round half up")));
    }
    Ok(())
}

/// `G_U(s)` from the latent pgf by the inverse discrete Fourier transform
/// over the `n`-th roots of unity.
///
/// Points within [`POLE_GUARD`] of a root of unity, or so close to the
/// origin that dividing by `s^(n/2−r)` destroys precision, are rejected;
/// use [`RoundedPmf::series_pgf`] there.
pub fn rounded_pgf(model: &CountModel, scheme: &RoundingScheme, s: Complex64) -> Result<Complex64> {
    require_half_up(scheme, "the pgf series")?;
    if !(s.norm() <= 1.0 + 1e-12) {
        return Err(Error::domain(format!("|s| must be <= 1, got {}", s.norm())));
    }
    let table = RootsOfUnityTable::new(scheme.n())?;
    for (index, w) in table.omega_pow().iter().enumerate() {
        if (s - w).norm() <= POLE_GUARD {
            return Err(Error::NearRootOfUnity { re: s.re, im: s.im, index, radius: POLE_GUARD });
        }
    }
    let power = table.prefactor_power();
    if power > 0 && s.norm().powi(power) < ORIGIN_GUARD {
        return Err(Error::NearOrigin { re: s.re, im: s.im, power, limit: ORIGIN_GUARD });
    }
    let sum: Complex64 = table
        .omega_pow()
        .iter()
        .zip(table.coeff_a())
        .map(|(&w, &a)| a * model.pgf(s * w.conj()) / (s - w))
        .sum();
    let n = scheme.n();
    let prefactor = (cpow(s, n) - 1.0) / (n as f64 * s.powi(power));
    Ok(prefactor * sum)
}

/// `E(U)`, `Var(U)` and the imaginary magnitude discarded when realizing
/// the complex series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    pub imag_residual: f64,
}

impl MomentReport {
    fn realize(mean: Complex64, variance: Complex64) -> Result<Self> {
        let imag_residual = mean.im.abs().max(variance.im.abs());
        if !(imag_residual <= IMAG_RESIDUAL_LIMIT) {
            return Err(Error::ImaginaryResidual { residual: imag_residual, limit: IMAG_RESIDUAL_LIMIT });
        }
        let mut var = variance.re;
        if var < 0.0 {
            if var < -IMAG_RESIDUAL_LIMIT {
                return Err(Error::Numerical(format!("series produced negative variance {var}")));
            }
            var = 0.0;
        }
        Ok(Self { mean: mean.re, variance: var, imag_residual })
    }
}

/// Moments of `U` for any latent model from the roots-of-unity series in
/// its pgf and pgf derivative.
pub fn rounded_moments_series(model: &CountModel, scheme: &RoundingScheme) -> Result<MomentReport> {
    require_half_up(scheme, "the moment series")?;
    let table = RootsOfUnityTable::new(scheme.n())?;
    let mut first = Complex64::new(0.0, 0.0);
    let mut second = Complex64::new(0.0, 0.0);
    for (w, inv, a) in table.nontrivial() {
        let one_minus = 1.0 - w;
        let g = model.pgf(inv);
        let dg = model.pgf_derivative(inv);
        first += a * g / one_minus;
        second += a * (dg / (w * one_minus) - g / (one_minus * one_minus));
    }
    let ey = model.mean();
    let n = scheme.n() as f64;
    let mean = ey + table.mean_offset() + first;
    let variance =
        model.variance() + (n * n - 1.0) / 12.0 - (2.0 * ey - 1.0) * first - first * first + 2.0 * second;
    MomentReport::realize(mean, variance)
}

/// Poisson moments of `U` in closed form, with `e^{−θ}·e^{θ/ω^j}` fused
/// into `exp(θ(1/ω^j − 1))`.
pub fn rounded_moments_poisson(theta: f64, n: u64) -> Result<MomentReport> {
    CountModel::poisson(theta)?;
    let table = RootsOfUnityTable::new(n)?;
    let mut first = Complex64::new(0.0, 0.0);
    let mut second = Complex64::new(0.0, 0.0);
    for (w, inv, a) in table.nontrivial() {
        let one_minus = 1.0 - w;
        let term = a * (theta * (inv - 1.0)).exp() / one_minus;
        first += term;
        second += term * (theta * inv - 1.0 / one_minus);
    }
    let nf = n as f64;
    let mean = theta + table.mean_offset() + first;
    let variance =
        theta + (nf * nf - 1.0) / 12.0 - (2.0 * theta - 1.0) * first - first * first + 2.0 * second;
    MomentReport::realize(mean, variance)
}

/// Binomial moments of `U` in closed form for `trials = m·n`.
pub fn rounded_moments_binomial(trials: u64, phi: f64, n: u64) -> Result<MomentReport> {
    CountModel::binomial(trials, phi)?;
    if n == 0 || !trials.is_multiple_of(n) {
        return Err(Error::domain(format!("trials = {trials} is not a multiple of n = {n}")));
    }
    let table = RootsOfUnityTable::new(n)?;
    let nt = trials as f64;
    let mut first = Complex64::new(0.0, 0.0);
    let mut second = Complex64::new(0.0, 0.0);
    for (w, inv, a) in table.nontrivial() {
        let one_minus = 1.0 - w;
        let base = 1.0 - phi + phi * inv;
        let b = cpow(base, trials);
        let db = nt * phi * cpow(base, trials - 1);
        first += a * b / one_minus;
        second += a / one_minus * (db * inv - b / one_minus);
    }
    let nf = n as f64;
    let ey = nt * phi;
    let mean = ey + table.mean_offset() + first;
    let variance =
        ey * (1.0 - phi) + (nf * nf - 1.0) / 12.0 - (2.0 * ey - 1.0) * first - first * first + 2.0 * second;
    MomentReport::realize(mean, variance)
}

/// Draw `U = n·[Y/n]`, rounding the exact ratio.
pub fn sample_u<R: Rng + ?Sized>(model: &CountModel, scheme: &RoundingScheme, rng: &mut R) -> u64 {
    scheme.apply(model.sample(rng))
}

fn large_n_branch(v0: f64) -> f64 {
    let c = v0 - 0.5;
    c * (c * (1.0 / c + 1.0) * (1.0 / c + 1.0).ln() - 1.0).exp()
}

/// Limit of `E(θ̂)/n` as `n → ∞` for i.i.d. Poisson(λ) measurements.
///
/// `λ < ½` gives `1/(2e)` (the `v₀ = 0` branch); `λ = I + ½` averages the
/// branches at `v₀ = I` and `v₀ = I + 1`, which for `λ = ½` means averaging
/// `1/(2e)` with the `v₀ = 1` branch.
pub fn asymptotic_mle_mean(lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be finite and > 0, got {lambda}")));
    }
    let zero_branch = 1.0 / (2.0 * E);
    if lambda < 0.5 {
        return Ok(zero_branch);
    }
    let shifted = lambda - 0.5;
    if shifted == shifted.floor() {
        let i = shifted;
        let lower = if i == 0.0 { zero_branch } else { large_n_branch(i) };
        return Ok(0.5 * (lower + large_n_branch(i + 1.0)));
    }
    Ok(large_n_branch((lambda + 0.5).floor()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_to_nearest(2.5, TieRule::HalfUp).unwrap(), 3);
        assert_eq!(round_to_nearest(2.5, TieRule::HalfEven).unwrap(), 2);
        assert_eq!(round_to_nearest(3.5, TieRule::HalfEven).unwrap(), 4);
        assert_eq!(round_to_nearest(7.0 / 3.0, TieRule::HalfUp).unwrap(), 2);
        assert_eq!(round_ratio(7, 3, TieRule::HalfUp), 2);
        assert!(round_to_nearest(-0.2, TieRule::HalfUp).is_err());
        assert!(round_to_nearest(f64::INFINITY, TieRule::HalfUp).is_err());
    }

    #[test]
    fn ratio_ties_are_exact() {
        assert_eq!(round_ratio(5, 2, TieRule::HalfUp), 3);
        assert_eq!(round_ratio(5, 2, TieRule::HalfEven), 2);
        assert_eq!(round_ratio(7, 2, TieRule::HalfEven), 4);
        assert_eq!(round_ratio(1, 2, TieRule::HalfEven), 0);
        // odd n never ties
        for y in 0..50 {
            assert_eq!(round_ratio(y, 5, TieRule::HalfUp), round_ratio(y, 5, TieRule::HalfEven));
        }
    }

    #[test]
    fn index_helper_examples() {
        assert_eq!(index_helpers(0, 3).unwrap(), (1, -1));
        assert_eq!(index_helpers(3, 3).unwrap(), (0, 2));
        assert_eq!(index_helpers(4, 2).unwrap(), (0, 3));
        assert!(index_helpers(4, 3).is_err());
    }

    #[test]
    fn blocks_partition_the_counts() {
        for n in 1..=12 {
            for rule in [TieRule::HalfUp, TieRule::HalfEven] {
                let scheme = RoundingScheme::new(n, rule).unwrap();
                let mut next = 0;
                for idx in 0..20 {
                    let (lo, hi) = scheme.block(idx);
                    assert_eq!(lo, next, "n={n} {rule} idx={idx}");
                    for y in lo..=hi {
                        assert_eq!(scheme.index_of(y), idx);
                    }
                    next = hi + 1;
                }
            }
        }
    }

    #[test]
    fn roots_table_invariants() {
        for n in 1..=9 {
            let t = RootsOfUnityTable::new(n).unwrap();
            for (j, w) in t.omega_pow().iter().enumerate() {
                assert!((cpow(*w, n) - 1.0).norm() < 1e-12);
                let expected = if n % 2 == 0 {
                    Complex64::new((-1f64).powi(j as i32), 0.0)
                } else {
                    (-1f64).powi(j as i32) * Complex64::from_polar(1.0, PI * j as f64 / n as f64)
                };
                assert!((t.coeff_a()[j] - expected).norm() < 1e-15);
            }
        }
        assert!(RootsOfUnityTable::new(0).is_err());
    }

    #[test]
    fn pmf_small_examples() {
        let p = CountModel::poisson(2.0).unwrap();
        let pmf = rounded_pmf(&p, &RoundingScheme::half_up(3).unwrap(), 1e-14).unwrap();
        let e2 = (-2f64).exp();
        assert!((pmf.prob(0) - 3.0 * e2).abs() < 1e-15);
        assert!((pmf.prob(3) - 2.0 * e2 - (4.0 / 3.0) * e2 - (2.0 / 3.0) * e2).abs() < 1e-15);
        assert_eq!(pmf.prob(4), 0.0);

        let b = CountModel::binomial(2, 0.5).unwrap();
        let pmf = rounded_pmf(&b, &RoundingScheme::half_up(2).unwrap(), 1e-12).unwrap();
        assert_eq!(pmf.probs().len(), 2);
        assert!((pmf.prob(0) - 0.25).abs() < 1e-15);
        assert!((pmf.prob(2) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn half_even_two_case_sum() {
        let p = CountModel::poisson(4.0).unwrap();
        let he = rounded_pmf(&p, &RoundingScheme::new(4, TieRule::HalfEven).unwrap(), 1e-14).unwrap();
        // u/n = 0 even: y in 0..=2; u/n = 1 odd: y in 3..=5; u/n = 2 even: y in 6..=10
        let block = |lo: u64, hi: u64| (lo..=hi).map(|y| p.pmf(y)).sum::<f64>();
        assert!((he.prob(0) - block(0, 2)).abs() < 1e-15);
        assert!((he.prob(4) - block(3, 5)).abs() < 1e-15);
        assert!((he.prob(8) - block(6, 10)).abs() < 1e-15);
    }

    #[test]
    fn pgf_rejects_guarded_points() {
        let p = CountModel::poisson(2.0).unwrap();
        let s3 = RoundingScheme::half_up(3).unwrap();
        let near = Complex64::from_polar(1.0, 2.0 * PI / 3.0) + Complex64::new(1e-8, 0.0);
        assert!(matches!(rounded_pgf(&p, &s3, near), Err(Error::NearRootOfUnity { index: 1, .. })));
        let s10 = RoundingScheme::half_up(10).unwrap();
        assert!(matches!(rounded_pgf(&p, &s10, Complex64::new(0.01, 0.0)), Err(Error::NearOrigin { .. })));
        let he = RoundingScheme::new(2, TieRule::HalfEven).unwrap();
        assert!(matches!(rounded_pgf(&p, &he, Complex64::new(0.5, 0.0)), Err(Error::Unsupported(_))));
        assert!(rounded_pgf(&p, &s3, Complex64::new(1.5, 0.0)).is_err());
    }

    #[test]
    fn pgf_n2_matches_two_term_display() {
        let p = CountModel::poisson(2.0).unwrap();
        let s = Complex64::new(0.5, 0.0);
        let two_term = 0.5 * ((s + 1.0) * p.pgf(s) - (s - 1.0) * p.pgf(-s));
        let scheme = RoundingScheme::half_up(2).unwrap();
        let got = rounded_pgf(&p, &scheme, s).unwrap();
        let series = rounded_pmf(&p, &scheme, 1e-14).unwrap().series_pgf(s);
        assert!((got - two_term).norm() < 1e-14);
        assert!((got - series).norm() < 1e-12);
    }

    #[test]
    fn moments_n1_is_identity() {
        let r = rounded_moments_poisson(5.0, 1).unwrap();
        assert!((r.mean - 5.0).abs() < 1e-14 && (r.variance - 5.0).abs() < 1e-14);
        let b = CountModel::binomial(20, 0.35).unwrap();
        let s = rounded_moments_series(&b, &RoundingScheme::half_up(1).unwrap()).unwrap();
        assert!((s.mean - 7.0).abs() < 1e-13 && (s.variance - 4.55).abs() < 1e-13);
    }

    #[test]
    fn binomial_moments_reject_non_multiple() {
        assert!(rounded_moments_binomial(5, 0.3, 2).is_err());
        let r = rounded_moments_binomial(4, 0.0, 2).unwrap();
        assert!(r.mean.abs() < 1e-14 && r.variance.abs() < 1e-14);
    }

    #[test]
    fn asymptotic_branches() {
        assert!((asymptotic_mle_mean(0.3).unwrap() - 0.183_939_720_585_721_16).abs() < 1e-15);
        let two = 1.5 * (1.5 * (5.0f64 / 3.0) * (5.0f64 / 3.0).ln() - 1.0).exp();
        assert!((asymptotic_mle_mean(2.0).unwrap() - two).abs() < 1e-15);
        assert!((asymptotic_mle_mean(2.2).unwrap() - two).abs() < 1e-15);
        let avg = 0.5 * (large_n_branch(1.0) + large_n_branch(2.0));
        assert!((asymptotic_mle_mean(1.5).unwrap() - avg).abs() < 1e-15);
        let half = 0.5 * (1.0 / (2.0 * E) + large_n_branch(1.0));
        assert!((asymptotic_mle_mean(0.5).unwrap() - half).abs() < 1e-15);
        assert!(asymptotic_mle_mean(0.0).is_err());
    }
}

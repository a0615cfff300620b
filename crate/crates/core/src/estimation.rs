//! Estimating the latent parameter from an observed `u`.
//!
//! The binned likelihood `P(U = u | ν)` sums the latent pmf over the block
//! of counts that round to `u`. For all three families the score is a
//! function of the conditional mean of `Y` given the block, which the
//! numeric optimizer uses to polish its bracket: the likelihood itself is
//! flat to rounding near the optimum, its sign of slope is not.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{CountModel, Family, Params};
use crate::error::{Error, Result};
use crate::rounding::{index_helpers, RoundingScheme};
use crate::sim::rng_substream;

/// Latent probabilities at or below this are skipped by [`exact_mse`].
pub const SUPPORT_THRESHOLD: f64 = 1e-10;
/// Bracket width, in the search coordinate, at which the golden-section
/// phase stops.
pub const MLE_TOLERANCE: f64 = 1e-9;
/// Lower end of the Poisson search bracket.
pub const POISSON_THETA_FLOOR: f64 = 1e-8;
/// Lower end of the negative binomial search bracket.
pub const NB_PROB_FLOOR: f64 = 1e-10;

const GOLDEN_MAX_ITER: usize = 400;
const BISECT_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Numeric,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
    pub loglik_at_optimum: f64,
    pub converged: bool,
}

/// A family with its structural parameter fixed, leaving one free
/// parameter: `θ` for Poisson, the success probability otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    Poisson,
    Binomial { trials: u64 },
    NegativeBinomial { size: f64 },
}

impl FamilySpec {
    pub fn family(&self) -> Family {
        match self {
            FamilySpec::Poisson => Family::Poisson,
            FamilySpec::Binomial { .. } => Family::Binomial,
            FamilySpec::NegativeBinomial { .. } => Family::NegativeBinomial,
        }
    }

    /// The model at free parameter `value`.
    pub fn model(&self, value: f64) -> Result<CountModel> {
        match *self {
            FamilySpec::Poisson => CountModel::poisson(value),
            FamilySpec::Binomial { trials } => CountModel::binomial(trials, value),
            FamilySpec::NegativeBinomial { size } => CountModel::negative_binomial(size, value),
        }
    }

    /// The structural part of a model and its free parameter.
    pub fn split(model: &CountModel) -> (Self, f64) {
        match model.params() {
            Params::Poisson { theta } => (FamilySpec::Poisson, theta),
            Params::Binomial { trials, prob } => (FamilySpec::Binomial { trials }, prob),
            Params::NegativeBinomial { size, prob } => (FamilySpec::NegativeBinomial { size }, prob),
        }
    }

    /// The fixed structural parameter, if any.
    pub fn structural(&self) -> Option<f64> {
        match *self {
            FamilySpec::Poisson => None,
            FamilySpec::Binomial { trials } => Some(trials as f64),
            FamilySpec::NegativeBinomial { size } => Some(size),
        }
    }
}

/// Closed-form Poisson MLE from one rounded observation: the geometric
/// mean of the positive factors `h(u) + g(u) + q`, `q = 0..n−1−g(u)`.
///
/// With no positive factor (`u = 0` and `n <= 2`) the estimate is 0.
pub fn poisson_mle_closed(u: u64, n: u64) -> Result<Estimate> {
    let (g, h) = index_helpers(u, n)?;
    let start = h + g;
    let last = n as i64 - 1 - g;
    let mut m = 0u64;
    let mut log_sum = 0.0;
    for q in 0..=last {
        let factor = start + q;
        if factor > 0 {
            m += 1;
            log_sum += (factor as f64).ln();
        }
    }
    let value = if m == 0 { 0.0 } else { (log_sum / m as f64).exp() };
    let scheme = RoundingScheme::half_up(n)?;
    let (lo, hi) = scheme.block(u / n);
    let loglik = if value == 0.0 { 0.0 } else { block_stats(&CountModel::poisson(value)?, lo, hi).0 };
    Ok(Estimate { value, method: Method::ClosedForm, loglik_at_optimum: loglik, converged: true })
}

/// `ln P(lo <= Y <= hi)` and `E(Y | lo <= Y <= hi)`.
fn block_stats(model: &CountModel, lo: u64, hi: u64) -> (f64, f64) {
    let hi = model.max_support().map_or(hi, |m| hi.min(m));
    if lo > hi {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let logs: Vec<f64> = (lo..=hi).map(|y| model.ln_pmf(y)).collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let mut total = 0.0;
    let mut first = 0.0;
    for (y, l) in (lo..=hi).zip(&logs) {
        let w = (l - peak).exp();
        total += w;
        first += w * y as f64;
    }
    (peak + total.ln(), first / total)
}

/// Search coordinate for each family: `ln θ` for Poisson, the probability
/// itself otherwise.
struct Objective {
    spec: FamilySpec,
    lo: u64,
    hi: u64,
}

impl Objective {
    fn param(&self, x: f64) -> f64 {
        match self.spec {
            FamilySpec::Poisson => x.exp(),
            _ => x,
        }
    }

    fn loglik(&self, x: f64) -> f64 {
        match self.spec.model(self.param(x)) {
            Ok(model) => block_stats(&model, self.lo, self.hi).0,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Sign-carrying multiple of the score in the search coordinate.
    fn score(&self, x: f64) -> f64 {
        let p = self.param(x);
        let Ok(model) = self.spec.model(p) else {
            return f64::NAN;
        };
        let (ll, mean) = block_stats(&model, self.lo, self.hi);
        if ll == f64::NEG_INFINITY {
            return f64::NAN;
        }
        match self.spec {
            // d/d ln θ = E(Y|B) − θ
            FamilySpec::Poisson => mean - p,
            // ∝ E(Y|B)(1−φ) − (N − E(Y|B))φ = E(Y|B) − Nφ
            FamilySpec::Binomial { trials } => mean - trials as f64 * p,
            // ∝ r(1−φ) − E(Y|B)φ
            FamilySpec::NegativeBinomial { size } => size * (1.0 - p) - mean * p,
        }
    }
}

fn golden_section(obj: &Objective, mut a: f64, mut b: f64) -> (f64, bool) {
    let (lower, upper) = (a, b);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = obj.loglik(c);
    let mut fd = obj.loglik(d);
    let mut iter = 0;
    while (b - a) > MLE_TOLERANCE && iter < GOLDEN_MAX_ITER {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = obj.loglik(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = obj.loglik(d);
        }
        iter += 1;
    }
    let converged = (b - a) <= MLE_TOLERANCE;
    let x = if fc >= fd { c } else { d };
    (polish(obj, a, b, lower, upper).unwrap_or(x), converged)
}

/// Bisection on the score sign. The golden bracket is widened
/// geometrically, within `[lower, upper]`, until the sign changes across it.
fn polish(obj: &Objective, a: f64, b: f64, lower: f64, upper: f64) -> Option<f64> {
    let mut pad = (b - a).max(MLE_TOLERANCE);
    let (mut lo, mut hi);
    loop {
        lo = (a - pad).max(lower);
        hi = (b + pad).min(upper);
        let (s_lo, s_hi) = (obj.score(lo), obj.score(hi));
        if s_lo > 0.0 && s_hi < 0.0 {
            break;
        }
        if (lo == lower && hi == upper) || s_lo.is_nan() && s_hi.is_nan() {
            return None;
        }
        pad *= 4.0;
    }
    for _ in 0..BISECT_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = obj.score(mid);
        if s.is_nan() {
            return None;
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Maximize `ln P(U = u)` over the free parameter of `spec`.
///
/// Boundary maxima are returned exactly: a binomial block containing 0
/// (or `N`) gives `φ̂ = 0` (or 1), a negative binomial block containing 0
/// gives `φ̂ = 1`. A Poisson `u = 0`, whose likelihood increases towards
/// `θ = 0`, is clamped to the closed-form value.
pub fn numeric_mle(spec: FamilySpec, u: u64, scheme: &RoundingScheme) -> Result<Estimate> {
    let idx = scheme.lattice_index(u)?;
    let (lo, hi) = scheme.block(idx);
    let obj = Objective { spec, lo, hi };
    let edge = |value: f64| -> Result<Estimate> {
        let ll = block_stats(&spec.model(value)?, lo, hi).0;
        Ok(Estimate { value, method: Method::Numeric, loglik_at_optimum: ll, converged: true })
    };
    let (a, b) = match spec {
        // P(U = 0) is the Poisson cdf at `hi`, strictly decreasing in θ:
        // the supremum sits at θ → 0 and the search would only walk there
        FamilySpec::Poisson if lo == 0 => return poisson_mle_closed(u, scheme.n()),
        FamilySpec::Poisson => {
            let upper = u as f64 + scheme.n() as f64 + 10.0 * (u as f64 + 1.0).sqrt();
            (POISSON_THETA_FLOOR.ln(), upper.ln())
        }
        FamilySpec::Binomial { trials } => {
            if lo > trials {
                return Err(Error::NoMaximum(format!("u = {u} is unreachable with {trials} trials")));
            }
            match (lo == 0, hi >= trials) {
                (true, true) => {
                    return Err(Error::NoMaximum(format!(
                        "every count rounds to u = {u}; the likelihood is constant"
                    )))
                }
                (true, false) => return edge(0.0),
                (false, true) => return edge(1.0),
                (false, false) => (0.0, 1.0),
            }
        }
        FamilySpec::NegativeBinomial { .. } => {
            if lo == 0 {
                return edge(1.0);
            }
            (NB_PROB_FLOOR, 1.0)
        }
    };
    let (x, converged) = golden_section(&obj, a, b);
    let ll = obj.loglik(x);
    if ll == f64::NEG_INFINITY {
        return Err(Error::NoMaximum(format!("P(U = {u}) vanishes across the search bracket")));
    }
    Ok(Estimate { value: obj.param(x), method: Method::Numeric, loglik_at_optimum: ll, converged })
}

/// `Σ (T(obs(k)) − ν)² P(Y = k)` over latent counts with `P(Y = k)` above
/// `threshold`, where `obs(k) = n·[k/n]` when a scheme is given and `k`
/// otherwise.
pub fn exact_mse<F>(
    model: &CountModel,
    scheme: Option<&RoundingScheme>,
    truth: f64,
    threshold: f64,
    mut estimator: F,
) -> Result<f64>
where
    F: FnMut(u64) -> Result<f64>,
{
    let tab = model.tabulate(threshold.clamp(1e-300, 1e-14))?;
    let mut cache: Option<(u64, f64)> = None;
    let mut total = 0.0;
    for (k, &p) in (0u64..).zip(&tab.probs) {
        if !(p > threshold) {
            continue;
        }
        let obs = scheme.map_or(k, |s| s.apply(k));
        let t = match cache {
            Some((o, t)) if o == obs => t,
            _ => {
                let t = estimator(obs)?;
                cache = Some((obs, t));
                t
            }
        };
        total += (t - truth).powi(2) * p;
    }
    Ok(total)
}

/// One point of a rounded/unrounded MSE comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseRatioPoint {
    pub n: u64,
    pub param: f64,
    pub mse_rounded: f64,
    pub mse_unrounded: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRatioCurve {
    pub spec: FamilySpec,
    pub n_list: Vec<u64>,
    pub param_grid: Vec<f64>,
    /// Ordered by `n`, then by parameter.
    pub points: Vec<MseRatioPoint>,
}

impl MseRatioCurve {
    pub fn psi(&self, n: u64) -> Vec<f64> {
        self.points.iter().filter(|p| p.n == n).map(|p| p.psi).collect()
    }
}

/// `ψ(ν, n) = MSE(ν̂(U)) / MSE(ν̂(Y))` with both estimators from
/// [`numeric_mle`]. The latent distribution is the same for every `n`;
/// only the rounding changes. Estimates are memoized per `(n, u)` across
/// the parameter grid. `0/0` (a degenerate model) is reported as 1.
pub fn mse_ratio_curve(
    spec: FamilySpec,
    param_grid: &[f64],
    n_list: &[u64],
    threshold: f64,
) -> Result<MseRatioCurve> {
    if param_grid.is_empty() || n_list.is_empty() {
        return Err(Error::domain("parameter grid and n list must be non-empty"));
    }
    let baseline = RoundingScheme::half_up(1)?;
    let mut unrounded_memo = BTreeMap::new();
    let mut unrounded = Vec::with_capacity(param_grid.len());
    for &nu in param_grid {
        let model = spec.model(nu)?;
        unrounded.push(exact_mse(&model, Some(&baseline), nu, threshold, |y| {
            memo_mle(&mut unrounded_memo, spec, y, &baseline)
        })?);
    }
    let per_n: Vec<Result<Vec<MseRatioPoint>>> = n_list
        .par_iter()
        .map(|&n| {
            let scheme = RoundingScheme::half_up(n)?;
            let mut memo = BTreeMap::new();
            param_grid
                .iter()
                .zip(&unrounded)
                .map(|(&nu, &mse_unrounded)| {
                    let model = spec.model(nu)?;
                    let mse_rounded = exact_mse(&model, Some(&scheme), nu, threshold, |u| {
                        memo_mle(&mut memo, spec, u, &scheme)
                    })?;
                    let psi = if mse_rounded == mse_unrounded { 1.0 } else { mse_rounded / mse_unrounded };
                    Ok(MseRatioPoint { n, param: nu, mse_rounded, mse_unrounded, psi })
                })
                .collect()
        })
        .collect();
    let mut points = Vec::with_capacity(n_list.len() * param_grid.len());
    for chunk in per_n {
        points.extend(chunk?);
    }
    Ok(MseRatioCurve { spec, n_list: n_list.to_vec(), param_grid: param_grid.to_vec(), points })
}

fn memo_mle(memo: &mut BTreeMap<u64, f64>, spec: FamilySpec, u: u64, scheme: &RoundingScheme) -> Result<f64> {
    if let Some(&v) = memo.get(&u) {
        return Ok(v);
    }
    let v = numeric_mle(spec, u, scheme)?.value;
    memo.insert(u, v);
    Ok(v)
}

/// Estimators compared by the Monte Carlo study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// `U` itself as an estimate of `θ`; for the binomial `U/N`, for the
    /// negative binomial the moment estimate `r/(r+U)`.
    U,
    ClosedMle,
    NumericMle,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::U => "u",
            EstimatorKind::ClosedMle => "closed-mle",
            EstimatorKind::NumericMle => "numeric-mle",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" => Ok(EstimatorKind::U),
            "closed-mle" => Ok(EstimatorKind::ClosedMle),
            "numeric-mle" => Ok(EstimatorKind::NumericMle),
            other => Err(Error::Parse(format!("unknown estimator `{other}`"))),
        }
    }
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] =
        [EstimatorKind::U, EstimatorKind::ClosedMle, EstimatorKind::NumericMle];

    /// Estimate from an observed `u`.
    pub fn estimate(&self, spec: FamilySpec, u: u64, scheme: &RoundingScheme) -> Result<f64> {
        match (self, spec) {
            (EstimatorKind::U, FamilySpec::Poisson) => Ok(u as f64),
            (EstimatorKind::U, FamilySpec::Binomial { trials }) => Ok(u as f64 / trials as f64),
            (EstimatorKind::U, FamilySpec::NegativeBinomial { size }) => Ok(size / (size + u as f64)),
            (EstimatorKind::ClosedMle, FamilySpec::Poisson) => Ok(poisson_mle_closed(u, scheme.n())?.value),
            (EstimatorKind::ClosedMle, _) => {
                Err(Error::Unsupported("a closed-form MLE exists only for the Poisson family".into()))
            }
            (EstimatorKind::NumericMle, _) => Ok(numeric_mle(spec, u, scheme)?.value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMse {
    pub estimator: EstimatorKind,
    pub mse: f64,
    pub standard_error: f64,
    /// Replicates on which the estimator failed; excluded from `mse`.
    pub failed: u64,
}

/// Replicates handed to one worker at a time.
const CHUNK: usize = 4096;

/// Monte Carlo MSE of each estimator against the model's free parameter.
///
/// Replicate `i` draws from its own substream, so the result does not
/// depend on how replicates are spread over threads; squared errors are
/// summed in replicate order.
pub fn monte_carlo_mse(
    model: &CountModel,
    scheme: &RoundingScheme,
    estimators: &[EstimatorKind],
    reps: u64,
    seed: u64,
) -> Result<Vec<McMse>> {
    if reps == 0 {
        return Err(Error::domain("reps must be >= 1"));
    }
    let (spec, truth) = FamilySpec::split(model);
    let draws = sample_rounded(model, scheme, reps, seed);

    let mut table: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    for &u in &draws {
        table
            .entry(u)
            .or_insert_with(|| estimators.iter().map(|e| e.estimate(spec, u, scheme).ok()).collect());
    }

    Ok(estimators
        .iter()
        .enumerate()
        .map(|(col, &estimator)| {
            let errors: Vec<f64> =
                draws.iter().filter_map(|u| table[u][col].map(|t| (t - truth).powi(2))).collect();
            let failed = reps - errors.len() as u64;
            let (mse, standard_error) = mean_and_se(&errors);
            McMse { estimator, mse, standard_error, failed }
        })
        .collect())
}

/// Draw `reps` rounded observations, replicate `i` from substream `i`.
pub fn sample_rounded(model: &CountModel, scheme: &RoundingScheme, reps: u64, seed: u64) -> Vec<u64> {
    let idx: Vec<u64> = (0..reps).collect();
    idx.par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            chunk.iter().map(|&i| {
                let mut rng = rng_substream(seed, i);
                crate::rounding::sample_u(model, scheme, &mut rng)
            })
        })
        .collect()
}

/// Sample mean and its standard error; NaN mean for no values.
pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (k - 1) as f64 / k as f64).sqrt())
}

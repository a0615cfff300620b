//! Command-line front end for `roundcount`.
//!
//! Every subcommand resolves its flags (explicit value, then preset, then
//! default), echoes the resolved configuration as a `# config` line, and
//! emits one table. Exit codes: 0 success, 1 numerical failure, 2 usage
//! error. Failures print a single JSON object on stderr.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use roundcount::apps::{self, ExcessDeathsDesign, SignificanceMode};
use roundcount::dist::Params;
use roundcount::estimation::{self, EstimatorKind, FamilySpec};
use roundcount::grid::{parse_grid, parse_int_list};
use roundcount::rounding::{self, RoundingScheme};
use roundcount::sim::{self, ExperimentConfig, MeasurementModel};
use roundcount::table::{write_table, Format, Record};
use roundcount::{CountModel, Error, Family, TieRule};
use serde::Serialize;
use serde_json::{json, Value};

pub mod rows;

use rows::*;

pub const SEED_ENV: &str = "ROUNDCOUNT_SEED";
pub const DEFAULT_SEED: u64 = 20_200_101;

#[derive(Debug, Parser)]
#[command(name = "roundcount", version, about = "Inference for counts observed through rounded averages")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, default_value = "csv", value_parser = parse_format)]
    pub format: Format,

    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate P(U = u).
    Pmf(PmfArgs),
    /// Compare the roots-of-unity pgf with the tabulated series at random points.
    PgfCheck(PgfCheckArgs),
    /// E(U) and Var(U) by series, closed form and enumeration.
    Moments(MomentsArgs),
    /// Estimate the latent parameter from one rounded observation.
    Mle(MleArgs),
    /// Monte Carlo MSE of U and the MLEs.
    MseSim(MseSimArgs),
    /// Exact MSE of U and the MLEs by enumeration.
    MseExact(MseExactArgs),
    /// Ratio of rounded to unrounded MLE mean squared errors.
    MseRatio(MseRatioArgs),
    /// Exact equal-tail test of phi = phi0 from one rounded observation.
    BinnedTest(BinnedTestArgs),
    /// True significance levels of tests on phi over a phi0 grid.
    TrueSignificance(TrueSignificanceArgs),
    /// Excess-deaths moments and point estimates.
    ExcessDeaths(ExcessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "fig1" => Preset::Fig1,
            "fig2" => Preset::Fig2,
            "fig3" => Preset::Fig3,
            "fig4" => Preset::Fig4,
            "fig5" => Preset::Fig5,
            "fig6" => Preset::Fig6,
            other => return Err(format!("unknown preset `{other}` (expected fig1..fig6)")),
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = *self as u8 + 1;
        write!(f, "fig{i}")
    }
}

/// A `start:stop:step` range or comma list of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_grid(s).map(Grid).map_err(|e| e.to_string())
    }
}

/// A comma list or `start:stop:step` range of integers.
#[derive(Debug, Clone, PartialEq)]
pub struct IntList(pub Vec<u64>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_int_list(s).map(IntList).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameList<T>(pub Vec<T>);

impl<T: FromStr<Err = Error>> FromStr for NameList<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()
            .map(NameList)
    }
}

/// Latent model flags. The negative binomial counts failures before the
/// `size`-th success, each trial succeeding with probability `prob`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// poisson, binomial or negative-binomial (default poisson).
    #[arg(long)]
    pub dist: Option<Family>,
    /// Poisson mean of the total Y.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Binomial trials N of the total Y.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Success probability.
    #[arg(long)]
    pub prob: Option<f64>,
    /// Negative binomial size.
    #[arg(long)]
    pub size: Option<f64>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<CountModel, Error> {
        let missing = |flag: &str, family: Family| {
            Error::Domain(format!("--{flag} is required for the {family} family"))
        };
        match self.dist.unwrap_or(Family::Poisson) {
            Family::Poisson => {
                CountModel::poisson(self.theta.ok_or_else(|| missing("theta", Family::Poisson))?)
            }
            Family::Binomial => CountModel::binomial(
                self.trials.ok_or_else(|| missing("trials", Family::Binomial))?,
                self.prob.ok_or_else(|| missing("prob", Family::Binomial))?,
            ),
            Family::NegativeBinomial => CountModel::negative_binomial(
                self.size.ok_or_else(|| missing("size", Family::NegativeBinomial))?,
                self.prob.ok_or_else(|| missing("prob", Family::NegativeBinomial))?,
            ),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Group sizes, e.g. `3` or `1,3,10`.
    #[arg(long)]
    pub n: Option<IntList>,
    #[arg(long)]
    pub tie_rule: Option<TieRule>,
    /// Latent tail mass left out of the tabulation.
    #[arg(long)]
    pub tail_eps: Option<f64>,
    /// fig1: Poisson(2) at n = 1, 3, 10.
    #[arg(long)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct PgfCheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Option<IntList>,
    /// Random points per n, uniform on the unit disk.
    #[arg(long)]
    pub points: Option<u64>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Option<IntList>,
}

#[derive(Debug, Clone, Args)]
pub struct MleArgs {
    /// poisson, binomial or negative-binomial (default poisson).
    #[arg(long)]
    pub dist: Option<Family>,
    /// Observed rounded value, a multiple of n.
    #[arg(long)]
    pub u: u64,
    #[arg(long)]
    pub n: u64,
    /// Binomial trials (required for binomial).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Negative binomial size (required for negative-binomial).
    #[arg(long)]
    pub size: Option<f64>,
}

/// Flags shared by the MSE experiments.
#[derive(Debug, Clone, Args)]
pub struct MseGridArgs {
    /// poisson, binomial or negative-binomial (default poisson).
    #[arg(long)]
    pub dist: Option<Family>,
    /// Per-measurement parameter grid: lambda (Poisson) or phi.
    #[arg(long)]
    pub grid: Option<Grid>,
    #[arg(long)]
    pub n: Option<IntList>,
    /// Binomial trials per measurement (default 1).
    #[arg(long)]
    pub m: Option<u64>,
    /// Negative binomial size per measurement (default 1).
    #[arg(long)]
    pub size: Option<f64>,
    /// Comma list of u, closed-mle, numeric-mle.
    #[arg(long)]
    pub estimators: Option<NameList<EstimatorKind>>,
    /// fig2: lambda in 0.05..4, n in 2,5,10,25,50. fig3: six lambdas, n in 2,5..50.
    #[arg(long)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct MseSimArgs {
    #[command(flatten)]
    pub grid: MseGridArgs,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct MseExactArgs {
    #[command(flatten)]
    pub grid: MseGridArgs,
    /// Latent probabilities at or below this are skipped.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct MseRatioArgs {
    /// poisson, binomial or negative-binomial (default poisson).
    #[arg(long)]
    pub dist: Option<Family>,
    /// theta (Poisson) or phi grid.
    #[arg(long)]
    pub grid: Option<Grid>,
    #[arg(long)]
    pub n: Option<IntList>,
    /// Binomial trials of the total (default 100).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Negative binomial size of the total (default 5).
    #[arg(long)]
    pub size: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// fig6: n in 1,2,5,10,25 with threshold 1e-10.
    #[arg(long)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct BinnedTestArgs {
    #[arg(long)]
    pub u: u64,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub phi0: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrueSignificanceArgs {
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub phi0: Option<Grid>,
    #[arg(long)]
    pub alpha: Option<Grid>,
    /// Comma list of exact-y, misspecified-u, binned-u.
    #[arg(long)]
    pub mode: Option<NameList<SignificanceMode>>,
    /// fig4: exact-y and misspecified-u. fig5: binned-u. Both at m=500, n=31.
    #[arg(long)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct ExcessArgs {
    #[arg(long)]
    pub n1: u64,
    #[arg(long)]
    pub n2: u64,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Observed rounded pre-period total.
    #[arg(long, requires = "u2")]
    pub u1: Option<u64>,
    /// Observed rounded post-period total.
    #[arg(long, requires = "u1")]
    pub u2: Option<u64>,
}

/// A failed run: exit code and the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn json_line(&self) -> String {
        json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Parse(_) | Error::Unsupported(_) => 2,
            _ => 1,
        };
        Failure { code, kind: e.kind().to_owned(), message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, kind: "usage".into(), message: msg.into() }
}

fn wrong_preset(preset: Preset, command: &str) -> Failure {
    usage(format!("preset {preset} does not apply to `{command}`"))
}

/// Rendered output of one invocation.
pub struct Output {
    pub text: String,
}

fn render<T: Record + Serialize>(config: Value, rows: &[T], format: Format) -> Result<Output, Failure> {
    Ok(Output { text: write_table(&config, rows, format)? })
}

fn params_json(model: &CountModel) -> Value {
    serde_json::to_value(model.params()).expect("params serialize")
}

/// Run a parsed invocation, producing the table text.
pub fn execute(cli: &Cli) -> Result<Output, Failure> {
    let f = cli.format;
    match &cli.command {
        Command::Pmf(a) => pmf(a, f),
        Command::PgfCheck(a) => pgf_check(a, f),
        Command::Moments(a) => moments(a, f),
        Command::Mle(a) => mle(a, f),
        Command::MseSim(a) => mse_sim(a, f),
        Command::MseExact(a) => mse_exact(a, f),
        Command::MseRatio(a) => mse_ratio(a, f),
        Command::BinnedTest(a) => binned_test(a, f),
        Command::TrueSignificance(a) => true_significance(a, f),
        Command::ExcessDeaths(a) => excess_deaths(a, f),
    }
}

fn pmf(a: &PmfArgs, format: Format) -> Result<Output, Failure> {
    let mut model_args = a.model.clone();
    let mut n_default = vec![1];
    match a.preset {
        None => {}
        Some(Preset::Fig1) => {
            model_args.dist = model_args.dist.or(Some(Family::Poisson));
            model_args.theta = model_args.theta.or(Some(2.0));
            n_default = vec![1, 3, 10];
        }
        Some(p) => return Err(wrong_preset(p, "pmf")),
    }
    let model = model_args.resolve()?;
    let n_list = a.n.clone().map_or(n_default, |l| l.0);
    let tie_rule = a.tie_rule.unwrap_or_default();
    let tail_eps = a.tail_eps.unwrap_or(rounding::DEFAULT_TAIL_EPS);
    let mut rows = Vec::new();
    for &n in &n_list {
        let scheme = RoundingScheme::new(n, tie_rule)?;
        let pmf = rounding::rounded_pmf(&model, &scheme, tail_eps)?;
        rows.extend(pmf.iter().map(|(u, prob)| PmfRow { n, u, prob }));
    }
    let config = json!({
        "command": "pmf",
        "preset": a.preset.map(|p| p.to_string()),
        "model": params_json(&model),
        "n": n_list,
        "tie_rule": tie_rule.to_string(),
        "tail_eps": tail_eps,
    });
    render(config, &rows, format)
}

fn pgf_check(a: &PgfCheckArgs, format: Format) -> Result<Output, Failure> {
    use num_complex::Complex64;
    use rand::Rng;

    let model = a.model.resolve()?;
    let n_list = a.n.clone().map_or(vec![2, 3, 4, 5, 10], |l| l.0);
    let points = a.points.unwrap_or(50);
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let mut rows = Vec::new();
    for &n in &n_list {
        let scheme = RoundingScheme::half_up(n)?;
        let pmf = rounding::rounded_pmf(&model, &scheme, 1e-16)?;
        let mut rng = sim::rng_substream(seed, n);
        for _ in 0..points {
            // uniform on the disk
            let r = rng.random::<f64>().sqrt();
            let angle = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            let s = Complex64::from_polar(r, angle);
            let series = pmf.series_pgf(s);
            let (closed, guarded) = match rounding::rounded_pgf(&model, &scheme, s) {
                Ok(v) => (v, false),
                Err(Error::NearRootOfUnity { .. } | Error::NearOrigin { .. }) => {
                    (Complex64::new(f64::NAN, f64::NAN), true)
                }
                Err(e) => return Err(e.into()),
            };
            rows.push(PgfCheckRow {
                n,
                s_re: s.re,
                s_im: s.im,
                closed_re: closed.re,
                closed_im: closed.im,
                series_re: series.re,
                series_im: series.im,
                abs_diff: (closed - series).norm(),
                guarded,
            });
        }
    }
    let config = json!({
        "command": "pgf-check",
        "model": params_json(&model),
        "n": n_list,
        "points": points,
        "seed": seed,
    });
    render(config, &rows, format)
}

fn moments(a: &MomentsArgs, format: Format) -> Result<Output, Failure> {
    let model = a.model.resolve()?;
    let n_list = a.n.clone().map_or(vec![1], |l| l.0);
    let mut rows = Vec::new();
    for &n in &n_list {
        let scheme = RoundingScheme::half_up(n)?;
        let series = rounding::rounded_moments_series(&model, &scheme)?;
        rows.push(MomentsRow {
            n,
            method: "series".into(),
            mean: series.mean,
            variance: series.variance,
            imag_residual: series.imag_residual,
        });
        let closed = match model.params() {
            Params::Poisson { theta } => Some(rounding::rounded_moments_poisson(theta, n)?),
            Params::Binomial { trials, prob } if trials % n == 0 => {
                Some(rounding::rounded_moments_binomial(trials, prob, n)?)
            }
            _ => None,
        };
        if let Some(c) = closed {
            rows.push(MomentsRow {
                n,
                method: "closed-form".into(),
                mean: c.mean,
                variance: c.variance,
                imag_residual: c.imag_residual,
            });
        }
        let pmf = rounding::rounded_pmf(&model, &scheme, 1e-16)?;
        rows.push(MomentsRow {
            n,
            method: "enumeration".into(),
            mean: pmf.mean(),
            variance: pmf.variance(),
            imag_residual: 0.0,
        });
    }
    let config = json!({ "command": "moments", "model": params_json(&model), "n": n_list });
    render(config, &rows, format)
}

fn family_spec(dist: Option<Family>, trials: Option<u64>, size: Option<f64>) -> Result<FamilySpec, Failure> {
    Ok(match dist.unwrap_or(Family::Poisson) {
        Family::Poisson => FamilySpec::Poisson,
        Family::Binomial => FamilySpec::Binomial {
            trials: trials.ok_or_else(|| usage("--trials is required for the binomial family"))?,
        },
        Family::NegativeBinomial => FamilySpec::NegativeBinomial {
            size: size.ok_or_else(|| usage("--size is required for the negative-binomial family"))?,
        },
    })
}

fn mle(a: &MleArgs, format: Format) -> Result<Output, Failure> {
    let spec = family_spec(a.dist, a.trials, a.size)?;
    if let FamilySpec::NegativeBinomial { size } = spec {
        CountModel::negative_binomial(size, 0.5)?;
    }
    let scheme = RoundingScheme::half_up(a.n)?;
    let mut rows = Vec::new();
    let mut push = |e: estimation::Estimate| {
        rows.push(MleRow {
            u: a.u,
            n: a.n,
            method: e.method.to_string(),
            value: e.value,
            loglik: e.loglik_at_optimum,
            converged: e.converged,
        })
    };
    if spec == FamilySpec::Poisson {
        push(estimation::poisson_mle_closed(a.u, a.n)?);
    }
    push(estimation::numeric_mle(spec, a.u, &scheme)?);
    let config = json!({ "command": "mle", "spec": spec, "u": a.u, "n": a.n });
    render(config, &rows, format)
}

struct ResolvedGrid {
    model: MeasurementModel,
    grid: Vec<f64>,
    n_list: Vec<u64>,
    estimators: Vec<EstimatorKind>,
}

fn resolve_mse_grid(a: &MseGridArgs, command: &str) -> Result<ResolvedGrid, Failure> {
    let family = a.dist.unwrap_or(Family::Poisson);
    let (mut grid, mut n_list) = (None, None);
    match a.preset {
        None => {}
        Some(p @ (Preset::Fig2 | Preset::Fig3)) => {
            if family != Family::Poisson {
                return Err(usage(format!("preset {p} is defined for the Poisson family")));
            }
            if p == Preset::Fig2 {
                grid = Some(parse_grid("0.05:4:0.05")?);
                n_list = Some(vec![2, 5, 10, 25, 50]);
            } else {
                grid = Some(vec![0.2, 0.5, 1.0, 1.7, 2.5, 3.2]);
                n_list = Some(vec![2, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
            }
        }
        Some(p) => return Err(wrong_preset(p, command)),
    }
    let grid = a.grid.clone().map(|g| g.0).or(grid).ok_or_else(|| usage("--grid is required"))?;
    let n_list = a.n.clone().map(|l| l.0).or(n_list).ok_or_else(|| usage("--n is required"))?;
    let model = match family {
        Family::Poisson => MeasurementModel::Poisson,
        Family::Binomial => MeasurementModel::Binomial { m: a.m.unwrap_or(1) },
        Family::NegativeBinomial => MeasurementModel::NegativeBinomial { size: a.size.unwrap_or(1.0) },
    };
    let estimators = a.estimators.clone().map(|e| e.0).unwrap_or_else(|| match family {
        Family::Poisson => vec![EstimatorKind::U, EstimatorKind::ClosedMle],
        _ => vec![EstimatorKind::U, EstimatorKind::NumericMle],
    });
    Ok(ResolvedGrid { model, grid, n_list, estimators })
}

fn mse_sim(a: &MseSimArgs, format: Format) -> Result<Output, Failure> {
    let g = resolve_mse_grid(&a.grid, "mse-sim")?;
    let config = ExperimentConfig {
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        reps: a.reps.unwrap_or(sim::DEFAULT_REPS),
        model: g.model,
        param_grid: g.grid,
        n_list: g.n_list,
        estimators: g.estimators,
    };
    let table = sim::run_mse_experiment(&config)?;
    let mut echo = serde_json::to_value(&config).expect("config serializes");
    echo["command"] = json!("mse-sim");
    echo["preset"] = json!(a.grid.preset.map(|p| p.to_string()));
    render(echo, &table.rows, format)
}

fn mse_exact(a: &MseExactArgs, format: Format) -> Result<Output, Failure> {
    let g = resolve_mse_grid(&a.grid, "mse-exact")?;
    let threshold = a.threshold.unwrap_or(estimation::SUPPORT_THRESHOLD);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(usage(format!("--threshold must lie in (0, 1), got {threshold}")));
    }
    let family = g.model.family();
    let mut rows = Vec::new();
    for &param in &g.grid {
        for &n in &g.n_list {
            let model = g.model.total(param, n)?;
            let scheme = RoundingScheme::half_up(n)?;
            let (spec, truth) = FamilySpec::split(&model);
            for &estimator in &g.estimators {
                let mse = estimation::exact_mse(&model, Some(&scheme), truth, threshold, |u| {
                    estimator.estimate(spec, u, &scheme)
                })?;
                rows.push(MseExactRow { family, param, n, estimator, mse });
            }
        }
    }
    let config = json!({
        "command": "mse-exact",
        "preset": a.grid.preset.map(|p| p.to_string()),
        "model": g.model,
        "param_grid": g.grid,
        "n_list": g.n_list,
        "estimators": g.estimators,
        "threshold": threshold,
    });
    render(config, &rows, format)
}

fn mse_ratio(a: &MseRatioArgs, format: Format) -> Result<Output, Failure> {
    let family = a.dist.unwrap_or(Family::Poisson);
    // fig6 fixes what the defaults already are; it exists so the figure
    // can be requested by name and is echoed in the config
    if let Some(p) = a.preset.filter(|&p| p != Preset::Fig6) {
        return Err(wrong_preset(p, "mse-ratio"));
    }
    let spec = match family {
        Family::Poisson => FamilySpec::Poisson,
        Family::Binomial => FamilySpec::Binomial { trials: a.trials.unwrap_or(100) },
        Family::NegativeBinomial => FamilySpec::NegativeBinomial { size: a.size.unwrap_or(5.0) },
    };
    let grid = match &a.grid {
        Some(g) => g.0.clone(),
        None => match family {
            Family::Poisson => parse_grid("0.1:5:0.1")?,
            Family::Binomial => parse_grid("0.01:0.99:0.01")?,
            Family::NegativeBinomial => parse_grid("0.05:0.95:0.05")?,
        },
    };
    let n_list = a.n.clone().map_or(vec![1, 2, 5, 10, 25], |l| l.0);
    let threshold = a.threshold.unwrap_or(estimation::SUPPORT_THRESHOLD);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(usage(format!("--threshold must lie in (0, 1), got {threshold}")));
    }
    let curve = estimation::mse_ratio_curve(spec, &grid, &n_list, threshold)?;
    let rows: Vec<MseRatioRow> = curve
        .points
        .iter()
        .map(|p| MseRatioRow {
            family,
            param: p.param,
            n: p.n,
            mse_rounded: p.mse_rounded,
            mse_unrounded: p.mse_unrounded,
            psi: p.psi,
        })
        .collect();
    let config = json!({
        "command": "mse-ratio",
        "preset": a.preset.map(|p| p.to_string()),
        "spec": spec,
        "param_grid": grid,
        "n_list": n_list,
        "threshold": threshold,
    });
    render(config, &rows, format)
}

fn binned_test(a: &BinnedTestArgs, format: Format) -> Result<Output, Failure> {
    let alpha = a.alpha.unwrap_or(0.05);
    let r = apps::binned_binomial_test(a.u, a.m, a.n, a.phi0, alpha)?;
    let rows = [BinnedTestRow {
        u: a.u,
        m: a.m,
        n: a.n,
        phi0: a.phi0,
        alpha,
        reject: r.reject,
        true_level: r.true_level,
        lower_critical: r.region.lower,
        upper_critical: r.region.upper,
    }];
    let config = json!({
        "command": "binned-test",
        "u": a.u, "m": a.m, "n": a.n, "phi0": a.phi0, "alpha": alpha,
    });
    render(config, &rows, format)
}

fn true_significance(a: &TrueSignificanceArgs, format: Format) -> Result<Output, Failure> {
    let all = vec![SignificanceMode::ExactY, SignificanceMode::MisspecifiedU, SignificanceMode::BinnedU];
    let mode_default = match a.preset {
        None => all,
        Some(Preset::Fig4) => vec![SignificanceMode::ExactY, SignificanceMode::MisspecifiedU],
        Some(Preset::Fig5) => vec![SignificanceMode::BinnedU],
        Some(p) => return Err(wrong_preset(p, "true-significance")),
    };
    let m = a.m.unwrap_or(500);
    let n = a.n.unwrap_or(31);
    let phi0 = match &a.phi0 {
        Some(g) => g.0.clone(),
        None => parse_grid("0.1:0.9:0.05")?,
    };
    let alphas = a.alpha.clone().map_or(vec![0.01, 0.05, 0.1], |g| g.0);
    let modes = a.mode.clone().map_or(mode_default, |l| l.0);
    let mut rows = Vec::new();
    for &mode in &modes {
        for &alpha in &alphas {
            let curve = apps::true_significance(m, n, &phi0, alpha, mode)?;
            rows.extend(
                curve.phi0_grid.iter().zip(&curve.true_level).map(|(&phi0, &true_level)| SignificanceRow {
                    mode,
                    m,
                    n,
                    alpha,
                    phi0,
                    true_level,
                }),
            );
        }
    }
    let config = json!({
        "command": "true-significance",
        "preset": a.preset.map(|p| p.to_string()),
        "m": m, "n": n, "phi0": phi0, "alpha": alphas,
        "mode": modes.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
    });
    render(config, &rows, format)
}

fn excess_deaths(a: &ExcessArgs, format: Format) -> Result<Output, Failure> {
    let design = ExcessDeathsDesign::new(a.n1, a.n2, a.theta, a.beta)?;
    let mo = apps::excess_moments(&design)?;
    let est = match (a.u1, a.u2) {
        (Some(u1), Some(u2)) => Some(apps::excess_point_estimates(u1, u2, a.n1, a.n2)?),
        _ => None,
    };
    let rows = [ExcessRow {
        n1: a.n1,
        n2: a.n2,
        theta: a.theta,
        beta: a.beta,
        mean_xi: mo.mean_xi,
        var_xi: mo.var_xi,
        mean_xi_star: mo.mean_xi_star,
        var_xi_star: mo.var_xi_star,
        u1: a.u1,
        u2: a.u2,
        xi: est.map(|e| e.xi),
        xi_mle: est.map(|e| e.xi_mle),
    }];
    let config = json!({
        "command": "excess-deaths",
        "design": design,
        "u1": a.u1,
        "u2": a.u2,
    });
    render(config, &rows, format)
}

/// Parse, execute and emit; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    let result = execute(&cli).and_then(|out| {
        match &cli.out {
            Some(path) => std::fs::write(path, out.text.as_bytes()),
            None => stdout.write_all(out.text.as_bytes()),
        }
        .map_err(|e| Failure { code: 1, kind: "io".into(), message: e.to_string() })
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "{}", f.json_line());
            f.code
        }
    }
}

//! Saddle-point evaluation of Poisson and binomial probabilities.
//!
//! Computing `k·ln θ − θ − ln k!` directly loses about `ulp(ln k!)` of
//! relative accuracy, which is ~1e-11 once `k` reaches a few thousand.
//! Loader's decomposition into the Stirling remainder and the deviance
//! term `bd0` keeps the relative error near machine precision for all
//! arguments.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `stirlerr(n)` at `n = 0, 0.5, 1, …, 15`.
#[allow(clippy::excessive_precision)]
const STIRLERR_HALVES: [f64; 31] = [
    0.0,
    0.153_426_409_720_027_345_291_383_9,
    0.081_061_466_795_327_258_219_670_26,
    0.054_814_121_051_917_653_896_138_7,
    0.041_340_695_955_409_294_093_822_08,
    0.033_162_873_519_936_287_485_110_51,
    0.027_677_925_684_998_339_148_789_29,
    0.023_746_163_656_297_495_971_330_28,
    0.020_790_672_103_765_093_111_522_77,
    0.018_488_450_532_673_185_230_779_36,
    0.016_644_691_189_821_192_163_194_87,
    0.015_134_973_221_917_378_873_513_84,
    0.013_876_128_823_070_747_998_745_73,
    0.012_810_465_242_920_226_924_250_66,
    0.011_896_709_945_891_770_095_055_72,
    0.011_104_559_758_206_917_326_630_76,
    0.010_411_265_261_972_096_497_478_57,
    0.009_799_416_126_158_803_298_390_373,
    0.009_255_462_182_712_732_917_728_637,
    0.008_768_700_134_139_385_462_955_047,
    0.008_330_563_433_362_871_256_469_319,
    0.007_934_114_564_314_020_547_249_562,
    0.007_573_675_487_951_840_794_972_024,
    0.007_244_554_301_320_383_179_546_197,
    0.006_942_840_107_209_529_865_664_153,
    0.006_665_247_032_707_682_442_356_181,
    0.006_408_994_188_004_207_068_439_631,
    0.006_171_712_263_039_457_647_534_605,
    0.005_951_370_112_758_847_735_624_416,
    0.005_746_216_513_010_115_682_026_102,
    0.005_554_733_551_962_801_371_038_69,
];

/// `ln Γ(n+1) − (n+½) ln n + n − ln √(2π)`.
pub(crate) fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if n <= 15.0 {
        let twice = n + n;
        if twice == twice.floor() {
            return STIRLERR_HALVES[twice as usize];
        }
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np − x`, accurate when `x ≈ np`.
pub(crate) fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        if s.abs() < f64::MIN_POSITIVE {
            return s;
        }
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
    }
    x * (x / np).ln() + np - x
}

/// `ln P(Y = x)` for `Y ~ Poisson(lambda)`, `x` a non-negative integer.
pub(crate) fn ln_dpois(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    if x <= lambda * f64::MIN_POSITIVE {
        return -lambda;
    }
    if lambda < x * f64::MIN_POSITIVE {
        return -lambda + x * lambda.ln() - ln_gamma(x + 1.0);
    }
    -0.5 * (2.0 * PI * x).ln() - stirlerr(x) - bd0(x, lambda)
}

/// `ln` of the binomial probability of `x` successes in `n` trials, with
/// `p + q = 1` passed separately to avoid cancellation. `n` may be real.
pub(crate) fn ln_dbinom_raw(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
    }
    if x == n {
        return if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
    }
    if x < 0.0 || x > n {
        return f64::NEG_INFINITY;
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}

/// `ln P(Y = x)` for `Y` counting failures before the `size`-th success.
pub(crate) fn ln_dnbinom(x: f64, size: f64, prob: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    let ans = ln_dbinom_raw(size, x + size, prob, 1.0 - prob);
    (size / (size + x)).ln() + ans
}

use std::collections::BTreeMap;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roundcount::estimation::{poisson_mle_closed, sample_rounded};
use roundcount::rounding::{
    asymptotic_mle_mean, rounded_moments_binomial, rounded_moments_poisson, rounded_moments_series,
    rounded_pgf, rounded_pmf, RootsOfUnityTable, DEFAULT_TAIL_EPS,
};
use roundcount::{CountModel, Error, RoundingScheme, TieRule};

/// `n·⌊(2y + n) / 2n⌋`, half up, independent of the library's block logic.
fn bucket(y: u64, n: u64) -> u64 {
    n * ((2 * y + n) / (2 * n))
}

fn enumerate(model: &CountModel, n: u64) -> (f64, f64) {
    let tab = model.tabulate(1e-16).unwrap();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (y, &p) in tab.probs.iter().enumerate() {
        let u = bucket(y as u64, n) as f64;
        m1 += p * u;
        m2 += p * u * u;
    }
    (m1, m2 - m1 * m1)
}

fn any_model() -> impl Strategy<Value = CountModel> {
    prop_oneof![
        (0.05f64..80.0).prop_map(|t| CountModel::poisson(t).unwrap()),
        (1u64..300, 0.0f64..=1.0).prop_map(|(n, p)| CountModel::binomial(n, p).unwrap()),
        (0.3f64..15.0, 0.1f64..=1.0).prop_map(|(r, p)| CountModel::negative_binomial(r, p).unwrap()),
    ]
}

fn any_rule() -> impl Strategy<Value = TieRule> {
    prop_oneof![Just(TieRule::HalfUp), Just(TieRule::HalfEven)]
}

proptest! {
    #[test]
    fn rounded_pmf_normalises(m in any_model(), n in 1u64..=25, rule in any_rule()) {
        let pmf = rounded_pmf(&m, &RoundingScheme::new(n, rule).unwrap(), DEFAULT_TAIL_EPS).unwrap();
        let total = pmf.total() + pmf.truncation_mass();
        prop_assert!((total - 1.0).abs() <= 1e-12, "total={}", total);
        prop_assert!(pmf.iter().all(|(u, p)| u % n == 0 && (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn rounded_pmf_matches_bucketed_latent_pmf(m in any_model(), n in 1u64..=12) {
        let pmf = rounded_pmf(&m, &RoundingScheme::half_up(n).unwrap(), DEFAULT_TAIL_EPS).unwrap();
        let tab = m.tabulate(1e-16).unwrap();
        let mut oracle: BTreeMap<u64, f64> = BTreeMap::new();
        for (y, &p) in tab.probs.iter().enumerate() {
            *oracle.entry(bucket(y as u64, n)).or_default() += p;
        }
        for (u, p) in pmf.iter() {
            prop_assert!((p - oracle.get(&u).copied().unwrap_or(0.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn tie_rules_agree_for_odd_n(m in any_model(), half in 0u64..12) {
        let n = 2 * half + 1;
        let up = rounded_pmf(&m, &RoundingScheme::new(n, TieRule::HalfUp).unwrap(), DEFAULT_TAIL_EPS).unwrap();
        let even = rounded_pmf(&m, &RoundingScheme::new(n, TieRule::HalfEven).unwrap(), DEFAULT_TAIL_EPS).unwrap();
        prop_assert_eq!(up.probs(), even.probs());
    }

    #[test]
    fn series_moments_match_enumeration(m in any_model(), n in 1u64..=10) {
        let rep = rounded_moments_series(&m, &RoundingScheme::half_up(n).unwrap()).unwrap();
        let (mean, var) = enumerate(&m, n);
        let scale = mean.abs().max(1.0);
        prop_assert!((rep.mean - mean).abs() <= 1e-9 * scale, "{} vs {}", rep.mean, mean);
        prop_assert!((rep.variance - var).abs() <= 1e-9 * scale * scale, "{} vs {}", rep.variance, var);
        prop_assert!(rep.variance >= 0.0 && rep.imag_residual <= 1e-9);
    }
}

#[test]
fn n1_is_the_identity() {
    let one = RoundingScheme::half_up(1).unwrap();
    for m in [
        CountModel::poisson(6.5).unwrap(),
        CountModel::binomial(30, 0.2).unwrap(),
        CountModel::negative_binomial(3.0, 0.6).unwrap(),
    ] {
        let pmf = rounded_pmf(&m, &one, DEFAULT_TAIL_EPS).unwrap();
        for (u, p) in pmf.iter() {
            assert_eq!(p, m.pmf(u));
        }
        let rep = rounded_moments_series(&m, &one).unwrap();
        assert!((rep.mean - m.mean()).abs() < 1e-12);
        assert!((rep.variance - m.variance()).abs() < 1e-12);
    }
}

#[test]
fn half_even_differs_only_for_even_n() {
    let m = CountModel::poisson(7.0).unwrap();
    let up = rounded_pmf(&m, &RoundingScheme::new(4, TieRule::HalfUp).unwrap(), DEFAULT_TAIL_EPS).unwrap();
    let even =
        rounded_pmf(&m, &RoundingScheme::new(4, TieRule::HalfEven).unwrap(), DEFAULT_TAIL_EPS).unwrap();
    assert_ne!(up.probs(), even.probs());
    // y = 2 is a tie: half up sends it to 4, half even to 0
    assert!((up.prob(0) - (m.pmf(0) + m.pmf(1))).abs() < 1e-15);
    assert!((even.prob(0) - (m.pmf(0) + m.pmf(1) + m.pmf(2))).abs() < 1e-15);
}

#[test]
fn closed_pgf_matches_series_inside_the_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let models = [
        CountModel::poisson(0.5).unwrap(),
        CountModel::poisson(2.0).unwrap(),
        CountModel::poisson(7.3).unwrap(),
        CountModel::binomial(20, 0.35).unwrap(),
    ];
    for m in &models {
        for n in [2u64, 3, 4, 5, 10] {
            let scheme = RoundingScheme::half_up(n).unwrap();
            let pmf = rounded_pmf(m, &scheme, 1e-16).unwrap();
            let mut checked = 0;
            while checked < 50 {
                let s = Complex64::from_polar(
                    rng.random::<f64>().sqrt(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                );
                match rounded_pgf(m, &scheme, s) {
                    Ok(g) => {
                        let d = (g - pmf.series_pgf(s)).norm();
                        assert!(d <= 1e-8, "n={n} s={s} diff={d}");
                        checked += 1;
                    }
                    Err(Error::NearRootOfUnity { .. } | Error::NearOrigin { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
}

#[test]
fn roots_table_invariants() {
    for n in 1..=16u64 {
        let t = RootsOfUnityTable::new(n).unwrap();
        for w in t.omega_pow() {
            assert!((w.powu(n as u32) - 1.0).norm() < 1e-12);
        }
        assert_eq!(t.offset_r(), if n % 2 == 0 { 1.0 } else { 0.5 });
        for j in 1..n as usize {
            assert_eq!(t.omega_pow()[n as usize - j], t.omega_pow()[j].conj());
            assert_eq!(t.coeff_a()[n as usize - j], t.coeff_a()[j].conj());
        }
    }
}

#[test]
fn residual_stays_small_for_large_series() {
    for (theta, n) in [(1800.0, 600u64), (1.0e4, 997), (3.0e4, 1000)] {
        let rep = rounded_moments_poisson(theta, n).unwrap();
        assert!(rep.imag_residual <= 1e-9, "θ={theta} n={n}: {}", rep.imag_residual);
    }
}

#[test]
fn closed_form_moments_agree_with_series_and_enumeration() {
    for (theta, n) in [(0.1, 2u64), (2.0, 3), (7.3, 4), (30.0, 7), (250.0, 10)] {
        let closed = rounded_moments_poisson(theta, n).unwrap();
        let m = CountModel::poisson(theta).unwrap();
        let series = rounded_moments_series(&m, &RoundingScheme::half_up(n).unwrap()).unwrap();
        let (mean, var) = enumerate(&m, n);
        for rep in [&closed, &series] {
            assert!((rep.mean - mean).abs() < 1e-9 * mean.max(1.0), "θ={theta} n={n}");
            assert!((rep.variance - var).abs() < 1e-9 * mean.max(1.0).powi(2), "θ={theta} n={n}");
        }
    }
    for (mm, phi, n) in [(1u64, 0.3, 2u64), (3, 0.3, 3), (2, 0.4, 4), (5, 0.2, 5), (40, 0.7, 6)] {
        let closed = rounded_moments_binomial(mm * n, phi, n).unwrap();
        let (mean, var) = enumerate(&CountModel::binomial(mm * n, phi).unwrap(), n);
        assert!((closed.mean - mean).abs() < 1e-9, "m={mm} φ={phi} n={n}");
        assert!((closed.variance - var).abs() < 1e-9, "m={mm} φ={phi} n={n}");
    }
}

#[test]
fn poisson_moments_match_simulation() {
    let (theta, n, reps) = (6.0, 4u64, 200_000u64);
    let m = CountModel::poisson(theta).unwrap();
    let draws = sample_rounded(&m, &RoundingScheme::half_up(n).unwrap(), reps, 3);
    let xs: Vec<f64> = draws.iter().map(|&u| u as f64).collect();
    let mean = xs.iter().sum::<f64>() / reps as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / reps as f64;
    let rep = rounded_moments_poisson(theta, n).unwrap();
    let se_mean = (rep.variance / reps as f64).sqrt();
    let se_var = ((m4 - var * var) / reps as f64).sqrt();
    assert!((mean - rep.mean).abs() < 3.0 * se_mean, "{mean} vs {}", rep.mean);
    assert!((var - rep.variance).abs() < 3.0 * se_var, "{var} vs {}", rep.variance);
}

#[test]
fn integer_means_lose_their_spread() {
    let var = |n: u64| rounded_moments_poisson(3.0 * n as f64, n).unwrap().variance;
    // not monotone: the jump size n grows while the jump probability falls
    let (v10, v50, v200) = (var(10), var(50), var(200));
    assert!(v200 < v10.min(v50), "{v10} {v50} {v200}");
    assert!(v200 < 0.01 * 600.0, "{v200}");
    assert!(var(600) < 1e-3);

    let n = 400u64;
    let v = rounded_moments_poisson(0.5 * n as f64, n).unwrap().variance / (n * n) as f64;
    assert!((v / 0.25 - 1.0).abs() < 0.1, "{v}");
}

#[test]
fn rounding_barely_matters_for_large_means() {
    let (lambda, n) = (50.0, 5u64);
    let rep = rounded_moments_poisson(lambda * n as f64, n).unwrap();
    assert!((rep.mean / (lambda * n as f64) - 1.0).abs() < 0.01);
    assert!((rep.variance / (lambda * n as f64) - 1.0).abs() < 0.05);
}

#[test]
fn sampled_u_converges_to_the_pmf() {
    let m = CountModel::poisson(2.0).unwrap();
    let scheme = RoundingScheme::half_up(3).unwrap();
    let reps = 1_000_000u64;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for u in sample_rounded(&m, &scheme, reps, 99) {
        *counts.entry(u).or_default() += 1;
    }
    let pmf = rounded_pmf(&m, &scheme, DEFAULT_TAIL_EPS).unwrap();
    let mut tv = pmf.truncation_mass();
    for (u, p) in pmf.iter() {
        tv += (counts.get(&u).copied().unwrap_or(0) as f64 / reps as f64 - p).abs();
    }
    let extra: u64 = counts.keys().filter(|&&u| pmf.prob(u) == 0.0).map(|u| counts[u]).sum();
    tv += extra as f64 / reps as f64;
    assert!(tv / 2.0 < 0.005, "tv={}", tv / 2.0);
}

#[test]
fn large_n_limit_of_the_estimator() {
    assert!((asymptotic_mle_mean(0.3).unwrap() - 1.0 / (2.0 * std::f64::consts::E)).abs() < 1e-6);
    let a = asymptotic_mle_mean(1.0).unwrap();
    let b = asymptotic_mle_mean(2.0).unwrap();
    assert!((asymptotic_mle_mean(1.5).unwrap() - (a + b) / 2.0).abs() < 1e-12);

    // E(θ̂)/n at λ = 2, n = 5000 by simulation
    let (lambda, n, reps) = (2.0, 5000u64, 100_000u64);
    let m = CountModel::poisson(lambda * n as f64).unwrap();
    let draws = sample_rounded(&m, &RoundingScheme::half_up(n).unwrap(), reps, 17);
    let mut memo = BTreeMap::new();
    let total: f64 = draws
        .iter()
        .map(|&u| *memo.entry(u).or_insert_with(|| poisson_mle_closed(u, n).unwrap().value))
        .sum();
    let mc = total / reps as f64 / n as f64;
    assert!((asymptotic_mle_mean(lambda).unwrap() - mc).abs() < 0.02, "{mc}");
    assert!((mc - 1.979).abs() < 0.02, "{mc}");
}

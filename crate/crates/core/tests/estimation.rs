use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roundcount::estimation::{
    exact_mse, monte_carlo_mse, mse_ratio_curve, numeric_mle, poisson_mle_closed, EstimatorKind, FamilySpec,
    Method,
};
use roundcount::rounding::{rounded_pmf, DEFAULT_TAIL_EPS};
use roundcount::{CountModel, RoundingScheme};

fn ln_fact(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

fn ln_binom(n: u64, k: u64, p: f64) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

/// `ln P(U = u)` for a Poisson, summing the latent pmf over `y` with
/// `n·⌊(2y+n)/2n⌋ = u`.
fn poisson_loglik(theta: f64, u: u64, n: u64) -> f64 {
    let ys = (u.saturating_sub(n)..=u + n).filter(|&y| n * ((2 * y + n) / (2 * n)) == u);
    ys.map(|y| (y as f64 * theta.ln() - theta - ln_fact(y)).exp()).sum::<f64>().ln()
}

#[test]
fn closed_form_matches_numeric_maximiser() {
    for n in 1..=10u64 {
        let scheme = RoundingScheme::half_up(n).unwrap();
        for k in 0..=40u64 {
            let u = k * n;
            let closed = poisson_mle_closed(u, n).unwrap();
            let numeric = numeric_mle(FamilySpec::Poisson, u, &scheme).unwrap();
            assert!((closed.value - numeric.value).abs() <= 1e-6 * closed.value.max(1.0), "u={u} n={n}");
            assert_eq!(closed.method, Method::ClosedForm);
            if u > 0 {
                assert_eq!(numeric.method, Method::Numeric);
                assert!(numeric.converged);
            }
        }
    }
}

#[test]
fn even_groups_estimate_below_u() {
    for n in (2..=20u64).step_by(2) {
        for k in 1..=30u64 {
            let u = k * n;
            assert!(poisson_mle_closed(u, n).unwrap().value < u as f64, "u={u} n={n}");
        }
    }
}

#[test]
fn binomial_mle_matches_grid_search() {
    let (trials, n, u) = (20u64, 2u64, 10u64);
    let ll = |phi: f64| -> f64 {
        if phi <= 0.0 || phi >= 1.0 {
            return f64::NEG_INFINITY;
        }
        (0..=trials)
            .filter(|&y| n * ((2 * y + n) / (2 * n)) == u)
            .map(|y| ln_binom(trials, y, phi).exp())
            .sum::<f64>()
            .ln()
    };
    let oracle = (0..=10_000).map(|i| i as f64 / 10_000.0).max_by(|a, b| ll(*a).total_cmp(&ll(*b))).unwrap();
    let est = numeric_mle(FamilySpec::Binomial { trials }, u, &RoundingScheme::half_up(n).unwrap()).unwrap();
    assert!((est.value - oracle).abs() <= 1e-4, "{} vs {oracle}", est.value);
}

#[test]
fn boundary_and_domain_cases() {
    let two = RoundingScheme::half_up(2).unwrap();
    let b = FamilySpec::Binomial { trials: 10 };
    assert_eq!(numeric_mle(b, 0, &two).unwrap().value, 0.0);
    assert_eq!(numeric_mle(b, 10, &two).unwrap().value, 1.0);
    assert!(numeric_mle(b, 3, &two).is_err());
    assert!(numeric_mle(b, 40, &two).is_err());
    let nb = FamilySpec::NegativeBinomial { size: 3.0 };
    assert_eq!(numeric_mle(nb, 0, &two).unwrap().value, 1.0);
    assert!(poisson_mle_closed(5, 2).is_err());
    assert!(poisson_mle_closed(4, 0).is_err());
}

proptest! {
    #[test]
    fn poisson_estimate_is_a_local_maximum(k in 1u64..60, n in 1u64..15) {
        let u = k * n;
        let est = numeric_mle(FamilySpec::Poisson, u, &RoundingScheme::half_up(n).unwrap()).unwrap();
        let at = poisson_loglik(est.value, u, n);
        prop_assert!((at - est.loglik_at_optimum).abs() <= 1e-9);
        for f in [0.999, 1.001] {
            prop_assert!(poisson_loglik(est.value * f, u, n) <= at + 1e-12);
        }
    }

    #[test]
    fn estimates_stay_in_range(k in 0u64..40, n in 1u64..8, trials_mult in 1u64..10, size in 0.5f64..10.0) {
        let scheme = RoundingScheme::half_up(n).unwrap();
        let u = k * n;
        for spec in [
            FamilySpec::Binomial { trials: trials_mult * n },
            FamilySpec::NegativeBinomial { size },
        ] {
            if let Ok(e) = numeric_mle(spec, u, &scheme) {
                prop_assert!((0.0..=1.0).contains(&e.value), "{:?} u={} -> {}", spec, u, e.value);
            }
        }
        prop_assert!(numeric_mle(FamilySpec::Poisson, u, &scheme).unwrap().value >= 0.0);
    }
}

#[test]
fn exact_mse_identity_is_the_variance() {
    let m = CountModel::poisson(3.3).unwrap();
    let mse = exact_mse(&m, None, 3.3, 1e-16, |y| Ok(y as f64)).unwrap();
    assert!((mse - 3.3).abs() < 1e-10);
}

#[test]
fn exact_mse_of_u_matches_simulation() {
    let m = CountModel::poisson(2.0).unwrap();
    let scheme = RoundingScheme::half_up(3).unwrap();
    let exact = exact_mse(&m, Some(&scheme), 2.0, 1e-16, |u| Ok(u as f64)).unwrap();
    let mc = &monte_carlo_mse(&m, &scheme, &[EstimatorKind::U], 50_000, 8).unwrap()[0];
    assert!(
        (exact - mc.mse).abs() < 3.0 * mc.standard_error,
        "{exact} vs {} ± {}",
        mc.mse,
        mc.standard_error
    );
}

#[test]
fn exact_and_simulated_mse_agree_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let n = rng.random_range(1..=12u64);
        let model = match case % 3 {
            0 => CountModel::poisson(rng.random_range(0.2..40.0)).unwrap(),
            1 => CountModel::binomial(n * rng.random_range(2..=20u64), rng.random_range(0.05..0.95)).unwrap(),
            _ => {
                CountModel::negative_binomial(rng.random_range(0.5..8.0), rng.random_range(0.2..0.9)).unwrap()
            }
        };
        let scheme = RoundingScheme::half_up(n).unwrap();
        let (spec, truth) = FamilySpec::split(&model);
        let kinds = [EstimatorKind::U, EstimatorKind::NumericMle];
        let mc = monte_carlo_mse(&model, &scheme, &kinds, 20_000, case).unwrap();
        for (kind, sim) in kinds.iter().zip(&mc) {
            let exact =
                exact_mse(&model, Some(&scheme), truth, 1e-16, |u| kind.estimate(spec, u, &scheme)).unwrap();
            assert_eq!(sim.failed, 0);
            let gap = (exact - sim.mse).abs();
            assert!(
                gap <= 4.0 * sim.standard_error + 1e-12,
                "case {case} {model:?} n={n} {kind}: exact {exact} mc {} ± {}",
                sim.mse,
                sim.standard_error
            );
        }
    }
}

#[test]
fn psi_is_one_without_rounding() {
    for (spec, grid) in [
        (FamilySpec::Poisson, vec![0.3, 1.0, 4.2]),
        (FamilySpec::Binomial { trials: 30 }, vec![0.1, 0.5, 0.8]),
        (FamilySpec::NegativeBinomial { size: 5.0 }, vec![0.2, 0.6]),
    ] {
        let curve = mse_ratio_curve(spec, &grid, &[1, 5], 1e-10).unwrap();
        assert!(curve.psi(1).iter().all(|&p| p == 1.0));
        for pt in &curve.points {
            if pt.mse_unrounded > 0.0 {
                assert_eq!(pt.psi, pt.mse_rounded / pt.mse_unrounded);
            }
        }
    }
}

/// `E(θ̂)` by enumeration over the support of `U`.
fn mean_estimate(theta: f64, n: u64) -> f64 {
    let pmf = rounded_pmf(
        &CountModel::poisson(theta).unwrap(),
        &RoundingScheme::half_up(n).unwrap(),
        DEFAULT_TAIL_EPS,
    )
    .unwrap();
    pmf.iter().map(|(u, p)| p * poisson_mle_closed(u, n).unwrap().value).sum()
}

#[test]
fn estimator_is_consistent_for_large_means() {
    let (lambda, n) = (50.0, 5u64);
    let ratio = mean_estimate(lambda * n as f64, n) / (lambda * n as f64);
    assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
}

#[test]
fn small_means_collapse_to_the_zero_cell_limit() {
    let (lambda, n) = (0.3, 4000u64);
    let v = mean_estimate(lambda * n as f64, n) / n as f64;
    assert!((v - 1.0 / (2.0 * std::f64::consts::E)).abs() < 0.01, "{v}");
}

#[test]
fn degenerate_binomial_has_zero_error() {
    let m = CountModel::binomial(12, 0.0).unwrap();
    let r = monte_carlo_mse(&m, &RoundingScheme::half_up(3).unwrap(), &[EstimatorKind::U], 100, 1).unwrap();
    assert_eq!(r[0].mse, 0.0);
    assert_eq!(r[0].standard_error, 0.0);
}

#[test]
fn integer_means_give_a_dip() {
    let n = 4u64;
    let scheme = RoundingScheme::half_up(n).unwrap();
    let kinds = [EstimatorKind::U, EstimatorKind::ClosedMle];
    let at = |lambda: f64| {
        monte_carlo_mse(&CountModel::poisson(lambda * n as f64).unwrap(), &scheme, &kinds, 50_000, 5).unwrap()
    };
    let (one, one_half) = (at(1.0), at(1.5));
    for (a, b) in one.iter().zip(&one_half) {
        assert!(a.mse < b.mse, "{}: {} vs {}", a.estimator, a.mse, b.mse);
    }
}

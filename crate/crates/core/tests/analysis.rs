use approx::assert_relative_eq;
use mpcode::analysis::{
    borel_tanner_pmf, build_loss_model, expected_delay_multipath, expected_delay_single,
    poisson_pmf, renewal_oracle, w_pmf, x_moments, x_pmf, x_pmf_series,
};
use mpcode::policy::{CodingPolicy, PathSpec};
use proptest::prelude::*;

fn lambda_grid() -> Vec<f64> {
    (1..=18).map(|i| i as f64 * 0.05).collect()
}

/// `(x-1)^(x-2) / (x (x-2)!) lambda^x e^(-x lambda)` as a plain running product.
fn x_pmf_direct(x: u32, lambda: f64) -> f64 {
    match x {
        0 => (-lambda).exp(),
        1 => lambda * (-lambda).exp(),
        _ => {
            let mut v = (-(x as f64) * lambda).exp() / x as f64;
            for _ in 0..x {
                v *= lambda;
            }
            for _ in 0..x - 2 {
                v *= (x - 1) as f64;
            }
            for k in 2..=(x - 2) {
                v /= k as f64;
            }
            v
        }
    }
}

#[test]
fn pmf_matches_direct_products() {
    for &lambda in &[0.05, 0.3, 0.7, 0.9] {
        for x in 0..60 {
            assert_relative_eq!(
                x_pmf(x as i64, lambda),
                x_pmf_direct(x, lambda),
                max_relative = 1e-11
            );
        }
    }
}

#[test]
fn pmf_normalises_and_moments_match() {
    for lambda in lambda_grid() {
        let total = x_pmf_series(lambda, 0).unwrap();
        assert!(
            (total.value - 1.0).abs() < 1e-9,
            "lambda={lambda}: {}",
            total.value
        );
        let m = x_moments(lambda).unwrap();
        let m1 = x_pmf_series(lambda, 1).unwrap().value;
        let m2 = x_pmf_series(lambda, 2).unwrap().value;
        assert!((m1 - m.mean).abs() < 1e-8, "lambda={lambda}");
        assert!((m2 - m.second_moment).abs() < 1e-8, "lambda={lambda}");
        assert!(m.second_moment >= m.mean * m.mean);
        assert_relative_eq!(m.w_mean, m.mean / lambda, max_relative = 1e-12);
    }
}

#[test]
fn w_mean_from_folded_pmf() {
    for &lambda in &[0.1, 0.4, 0.8] {
        let m = x_moments(lambda).unwrap();
        let direct: f64 = (1..20_000).map(|w| w as f64 * w_pmf(w, lambda)).sum();
        assert_relative_eq!(direct, m.w_mean, max_relative = 1e-9);
    }
}

#[test]
fn first_loss_conditioning() {
    for &lambda in &[0.1, 0.3, 0.5] {
        for x in 2..=50i64 {
            let conv: f64 = (2..=x)
                .map(|y| poisson_pmf(y, lambda) * borel_tanner_pmf(x - 1, y - 1, lambda))
                .sum();
            let p = x_pmf(x, lambda);
            assert!((conv - p).abs() < 1e-10, "lambda={lambda} x={x}");
        }
    }
}

#[test]
fn oracle_converges_at_monte_carlo_rate() {
    for &lambda in &[0.1f64, 0.3, 0.5] {
        let m = x_moments(lambda).unwrap();
        let sd = (m.second_moment - m.mean * m.mean).sqrt();
        for (n, seed) in [(10_000u64, 5u64), (1_000_000, 6)] {
            let r = renewal_oracle(lambda, n, seed).unwrap();
            let se = sd / (n as f64).sqrt();
            assert!((r.mean - m.mean).abs() < 4.0 * se, "lambda={lambda} n={n}");
        }
    }
}

#[test]
fn oracle_histogram_matches_pmf() {
    let lambda = 0.5;
    let n = 1_000_000u64;
    let r = renewal_oracle(lambda, n, 17).unwrap();
    for x in 0..12 {
        let p = x_pmf(x as i64, lambda);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((r.frequency(x) - p).abs() < 4.0 * se + 1e-12, "x={x}");
    }
}

/// `E[R_n]` as written before the moment substitution, divided by `l E[W]`,
/// with moments taken from the truncated series.
fn delay_via_reward(paths: &[PathSpec<f64>], coded: usize, l: u32) -> f64 {
    let policy = CodingPolicy::single_coded_path(paths.len(), coded, l);
    let model = build_loss_model(paths, &policy).unwrap();
    let lambda = model.lambda;
    let ex = x_pmf_series(lambda, 1).unwrap().value;
    let ex2 = x_pmf_series(lambda, 2).unwrap().value;
    let ew: f64 = (1..50_000).map(|w| w as f64 * w_pmf(w, lambda)).sum();
    let lc = l as f64;
    let rc = paths[coded].rate;
    let total: f64 = paths.iter().map(|p| p.rate).sum();
    let others: f64 = paths
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != coded)
        .map(|(_, p)| lc * p.rate * p.rate / (2.0 * rc * rc) * (lc * p.rate * ex2 - rc * ex))
        .sum();
    let reward = (lc * rc / 2.0 * (lc - 1.0) * ex2 + others) / total;
    reward / (lc * ew)
}

#[test]
fn multipath_closed_form_matches_reward_pipeline() {
    let two = [
        PathSpec::new(4.0, 0.01, 0.0).unwrap(),
        PathSpec::new(3.0, 0.01, 0.0).unwrap(),
    ];
    let model = build_loss_model(&two, &CodingPolicy::single_coded_path(2, 0, 10)).unwrap();
    assert_relative_eq!(model.lambda, 0.1675, max_relative = 1e-12);
    let closed = expected_delay_multipath(&model, &two).unwrap().slots;
    assert_relative_eq!(closed, delay_via_reward(&two, 0, 10), max_relative = 1e-9);

    let three = [
        PathSpec::new(2.0, 0.02, 0.0).unwrap(),
        PathSpec::new(5.0, 0.001, 0.0).unwrap(),
        PathSpec::new(1.0, 0.005, 0.0).unwrap(),
    ];
    let model = build_loss_model(&three, &CodingPolicy::single_coded_path(3, 1, 8)).unwrap();
    let closed = expected_delay_multipath(&model, &three).unwrap().slots;
    assert_relative_eq!(closed, delay_via_reward(&three, 1, 8), max_relative = 1e-9);
}

#[test]
fn single_path_example() {
    let p = [PathSpec::new(1.0, 0.01, 0.0).unwrap()];
    let model = build_loss_model(&p, &CodingPolicy::single_coded_path(1, 0, 10)).unwrap();
    let d = expected_delay_multipath(&model, &p).unwrap();
    assert_relative_eq!(d.slots, 0.505_555_555_6, max_relative = 1e-9);
    assert_relative_eq!(
        d.slots,
        expected_delay_single(0.1, 10).unwrap(),
        max_relative = 1e-12
    );
}

proptest! {
    #[test]
    fn multipath_collapses_to_single_path(
        eps in 0.0f64..0.1,
        l in 2u32..40,
        rate in 0.1f64..1000.0,
    ) {
        let p = [PathSpec::new(rate, eps, 0.0).unwrap()];
        let policy = CodingPolicy::single_coded_path(1, 0, l);
        prop_assume!(policy.check(&p).is_ok());
        let model = build_loss_model(&p, &policy).unwrap();
        prop_assume!(model.lambda < 1.0);
        let multi = expected_delay_multipath(&model, &p).unwrap();
        let single = expected_delay_single(model.lambda, l).unwrap();
        let rel = if single == 0.0 { multi.slots.abs() } else { ((multi.slots - single) / single).abs() };
        prop_assert!(rel < 1e-12, "rel {rel}");
        prop_assert!((multi.seconds * rate - multi.slots).abs() <= 1e-12 * multi.slots.max(1.0));
    }

    #[test]
    fn delay_grows_with_loss(l in 2u32..30, a in 0.0f64..0.9, b in 0.0f64..0.9) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d_lo = expected_delay_single(lo, l).unwrap();
        let d_hi = expected_delay_single(hi, l).unwrap();
        prop_assert!(d_lo <= d_hi);
    }

    #[test]
    fn f32_tracks_f64(lambda in 0.01f64..0.8, l in 2u32..30) {
        let d64 = expected_delay_single(lambda, l).unwrap();
        let d32 = expected_delay_single(lambda as f32, l).unwrap() as f64;
        prop_assert!(((d32 - d64) / d64).abs() < 1e-4);
        let m64 = x_moments(lambda).unwrap();
        let m32 = x_moments(lambda as f32).unwrap();
        prop_assert!(((m32.mean as f64 - m64.mean) / m64.mean).abs() < 1e-4);
    }
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use itdr::estimator::{delta_p, delta_v, min_trials_for_normal_approx, pvm, PvmMode, PvmSpec};
use itdr::normal;

const SIGMA: f64 = 8.062e-3;

fn spec(mode: PvmMode) -> PvmSpec {
    PvmSpec {
        mode,
        sigma_total: SIGMA,
        bias_vb: 0.0,
        polarity: 1.0,
    }
}

/// Taylor series of Phi around 0; every term is positive so it stays
/// accurate well into the tails.
fn phi_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 1.0;
    while term.abs() > 1e-18 * sum.abs() {
        n += 2.0;
        term *= x * x / n;
        sum += term;
    }
    0.5 + (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * sum
}

fn phi_inverse_bisect(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_series(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn normal_cdf_matches_series() {
    for i in 0..50 {
        let x = -7.0 + 14.0 * i as f64 / 49.0;
        let err = (normal::cdf(x) - phi_series(x)).abs();
        assert!(err <= 1e-9, "x = {x}: {err}");
    }
}

#[test]
fn normal_quantile_matches_bisection() {
    for i in 0..50 {
        // Logit-spaced probabilities from 1e-6 to 1 - 1e-6.
        let l = -13.8 + 27.6 * i as f64 / 49.0;
        let p = 1.0 / (1.0 + (-l).exp());
        let err = (normal::inverse_cdf(p) - phi_inverse_bisect(p)).abs();
        assert!(err <= 1e-9, "p = {p}: {err}");
    }
}

/// Exact probability that the mean of `m` Bernoulli(p0) draws lands within
/// `half` of p0.
fn exact_coverage(p0: f64, m: u64, half: f64) -> f64 {
    let lg = |k: f64| libm::lgamma(k + 1.0);
    (0..=m)
        .filter(|&k| (k as f64 / m as f64 - p0).abs() <= half)
        .map(|k| {
            let (k, n) = (k as f64, m as f64);
            (lg(n) - lg(k) - lg(n - k) + k * p0.ln() + (n - k) * (1.0 - p0).ln()).exp()
        })
        .sum()
}

fn mc_coverage(p0: f64, m: u64, runs: usize, seed: u64) -> f64 {
    let half = delta_p(p0, m, 0.95).unwrap() / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Binomial::new(m, p0).unwrap();
    let hits = (0..runs)
        .filter(|_| (dist.sample(&mut rng) as f64 / m as f64 - p0).abs() <= half)
        .count();
    hits as f64 / runs as f64
}

const GRID: [(f64, u64); 9] = [
    (0.1, 100),
    (0.3, 100),
    (0.5, 100),
    (0.1, 1000),
    (0.3, 1000),
    (0.5, 1000),
    (0.1, 10_000),
    (0.3, 10_000),
    (0.5, 10_000),
];

#[test]
fn coverage_agrees_with_exact_binomial() {
    for (i, &(p0, m)) in GRID.iter().enumerate() {
        let exact = exact_coverage(p0, m, delta_p(p0, m, 0.95).unwrap() / 2.0);
        let mc = mc_coverage(p0, m, 10_000, 40 + i as u64);
        let tol = 4.0 * (exact * (1.0 - exact) / 1e4).sqrt();
        assert!((mc - exact).abs() <= tol, "p0 = {p0}, M = {m}: mc {mc}, exact {exact}");
        if m >= 1000 {
            assert!((0.94..=0.96).contains(&mc), "p0 = {p0}, M = {m}: {mc}");
        }
    }
}

/// At M = 100 the lattice of attainable estimates puts the exact coverage
/// for p0 = 0.1 and 0.3 near 0.937, below the band.
#[test]
#[ignore = "exact binomial coverage at M = 100 is 0.936 for p0 = 0.1 and 0.937 for p0 = 0.3"]
fn coverage_band_all_cells() {
    for (i, &(p0, m)) in GRID.iter().enumerate() {
        let mc = mc_coverage(p0, m, 10_000, 40 + i as u64);
        assert!((0.94..=0.96).contains(&mc), "p0 = {p0}, M = {m}: {mc}");
    }
}

#[test]
fn resolution_fixtures() {
    assert!((delta_p(0.5, 1000, 0.95).unwrap() - 0.06198).abs() < 5e-6);
    assert!((delta_p(0.5, 100_000, 0.95).unwrap() - 0.00620).abs() < 5e-6);
    assert_eq!(delta_v(0.0, &spec(PvmMode::Gaussian)).unwrap(), 0.0);
    let s = PvmSpec {
        sigma_total: 8.06e-3,
        ..spec(PvmMode::Gaussian)
    };
    let dv = delta_v(0.0062, &s).unwrap();
    assert!((dv - 0.0062 * 8.06e-3 * 2.5066).abs() < 0.5e-6, "{dv}");
    assert_eq!(min_trials_for_normal_approx(0.5).unwrap(), 9);
    assert_eq!(min_trials_for_normal_approx(0.1).unwrap(), 81);
}

proptest! {
    #[test]
    fn delta_p_peaks_at_half(p in 0.001..0.999f64, m in 9u64..1_000_000) {
        prop_assert!(delta_p(p, m, 0.95).unwrap() <= delta_p(0.5, m, 0.95).unwrap());
    }

    #[test]
    fn pvm_monotone(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        // Volts fall as the probability of a 1 rises.
        for mode in [PvmMode::Gaussian, PvmMode::Linear] {
            prop_assert!(pvm(lo, &spec(mode)).value >= pvm(hi, &spec(mode)).value);
        }
        prop_assert!(pvm(lo, &spec(PvmMode::Probability)).value <= pvm(hi, &spec(PvmMode::Probability)).value);
    }

    #[test]
    fn linear_tracks_gaussian_near_half(p in 0.45..0.55f64) {
        let g = pvm(p, &spec(PvmMode::Gaussian)).value;
        let l = pvm(p, &spec(PvmMode::Linear)).value;
        prop_assert!((g - l).abs() <= 0.01 * SIGMA);
    }

    #[test]
    fn gaussian_inverts_the_probability_law(v in -3.0 * SIGMA..3.0 * SIGMA) {
        let p = normal::cdf(-v / SIGMA);
        prop_assert!((pvm(p, &spec(PvmMode::Gaussian)).value - v).abs() < 1e-9);
    }
}

//! Posterior ranking summaries against Monte-Carlo and closed-form oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rank_surfaces::ranking::{min_moments_two, min_prob, min_prob_product, PosteriorAtPoint};

const MC_SAMPLES: usize = 10_000_000;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Φ by the complementary error function from `libm`.
fn phi_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[test]
fn min_moments_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let (m1, m2) = (rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64));
        let (v1, v2) = (rng.random_range(0.05..2.0f64), rng.random_range(0.05..2.0f64));
        let (s1, s2) = (f64::sqrt(v1), f64::sqrt(v2));
        let (mut sum, mut sum2, mut sum4) = (0.0, 0.0, 0.0);
        for _ in 0..MC_SAMPLES {
            let a: f64 = m1 + s1 * normal(&mut rng);
            let b: f64 = m2 + s2 * normal(&mut rng);
            let m = a.min(b);
            sum += m;
            sum2 += m * m;
            sum4 += m * m * m * m;
        }
        let n = MC_SAMPLES as f64;
        let (mean, second) = (sum / n, sum2 / n);
        let se_mean = ((second - mean * mean) / n).sqrt();
        let se_second = ((sum4 / n - second * second) / n).sqrt();
        let (exact_mean, exact_second) = min_moments_two(m1, v1, m2, v2);
        assert!((mean - exact_mean).abs() < 3.0 * se_mean, "mean {mean} vs {exact_mean} (se {se_mean})");
        assert!(
            (second - exact_second).abs() < 3.0 * se_second,
            "second moment {second} vs {exact_second} (se {se_second})"
        );
    }
}

#[test]
fn symmetric_minimum_has_mean_minus_inverse_root_pi() {
    let (mean, _) = min_moments_two(0.0, 1.0, 0.0, 1.0);
    assert!((mean + 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
}

#[test]
fn two_surface_probabilities_match_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let means: Vec<f64> = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let vars: Vec<f64> = vec![rng.random_range(1e-4..2.0), rng.random_range(1e-4..2.0)];
        let oracle = phi_cdf((means[1] - means[0]) / (vars[0] + vars[1]).sqrt());
        let p = min_prob(&PosteriorAtPoint::new(means, vars).unwrap()).unwrap();
        assert!((p[0] - oracle).abs() < 1e-12 && (p[1] - (1.0 - oracle)).abs() < 1e-12);
    }
}

#[test]
fn three_identical_surfaces_are_equally_likely() {
    let p = min_prob(&PosteriorAtPoint::new(vec![0.4; 3], vec![0.3; 3]).unwrap()).unwrap();
    for q in p {
        assert!((q - 1.0 / 3.0).abs() < 1e-9, "{q}");
    }
}

#[test]
fn three_surface_probabilities_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst_exact: f64 = 0.0;
    let mut worst_product: f64 = 0.0;
    for _ in 0..5 {
        let means: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
        let vars: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        let sds: Vec<f64> = vars.iter().map(|v| v.sqrt()).collect();
        let mut wins = [0usize; 3];
        for _ in 0..MC_SAMPLES {
            let mut best = 0;
            let mut best_value = f64::INFINITY;
            for l in 0..3 {
                let y = means[l] + sds[l] * normal(&mut rng);
                if y < best_value {
                    best_value = y;
                    best = l;
                }
            }
            wins[best] += 1;
        }
        let post = PosteriorAtPoint::new(means, vars).unwrap();
        let exact = min_prob(&post).unwrap();
        let product = min_prob_product(&post).unwrap();
        for l in 0..3 {
            let mc = wins[l] as f64 / MC_SAMPLES as f64;
            worst_exact = worst_exact.max((exact[l] - mc).abs());
            worst_product = worst_product.max((product[l] - mc).abs());
        }
    }
    println!("largest |min_prob - MC| = {worst_exact:.2e}; product form: {worst_product:.2e}");
    // 5 standard errors of a proportion at 1e7 samples is below 1e-3
    assert!(worst_exact < 1e-3, "{worst_exact}");
}

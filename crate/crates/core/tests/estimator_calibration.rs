//! Statistical calibration of the copula MI estimator against analytic
//! values for distributions with known entropy and mutual information.

use causal_order::{grouped_mi, knn_entropy, total_correlation, MiOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian_pair(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = norm.sample(&mut rng);
        let z2: f64 = norm.sample(&mut rng);
        x.push(z1);
        y.push(rho * z1 + (1.0 - rho * rho).sqrt() * z2);
    }
    (x, y)
}

/// Histogram plug-in differential entropy over [0,1]^2 with the
/// Miller-Madow bias correction, used as an independent cross-check for the
/// k-NN estimate.
fn histogram_entropy_unit_square(points: &[Vec<f64>], bins: usize) -> f64 {
    let mut counts = vec![0usize; bins * bins];
    for p in points {
        let bx = ((p[0] * bins as f64) as usize).min(bins - 1);
        let by = ((p[1] * bins as f64) as usize).min(bins - 1);
        counts[bx * bins + by] += 1;
    }
    let n = points.len() as f64;
    let cell_area = 1.0 / (bins * bins) as f64;
    let occupied = counts.iter().filter(|&&c| c > 0).count() as f64;
    let plug_in: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * (p / cell_area).ln()
        })
        .sum();
    plug_in + (occupied - 1.0) / (2.0 * n)
}

#[test]
fn uniform_square_entropy_is_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let pts: Vec<Vec<f64>> = (0..2000)
        .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let h = knn_entropy(&pts, 3).unwrap();
    assert!(h.abs() <= 0.05, "U[0,1]^2 entropy should be ~0, got {h}");
    let plug_in = histogram_entropy_unit_square(&pts, 20);
    assert!((h - plug_in).abs() <= 0.1, "k-NN {h} vs histogram {plug_in}");
}

#[test]
fn standard_normal_entropy_matches_analytic() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let norm = Normal::new(0.0, 1.0).unwrap();
    let analytic = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    let pts: Vec<Vec<f64>> = (0..2000).map(|_| vec![norm.sample(&mut rng)]).collect();
    let h = knn_entropy(&pts, 3).unwrap();
    assert!(
        (h - analytic).abs() <= 0.05,
        "N(0,1) entropy should be {analytic:.4}, got {h:.4}"
    );
}

#[test]
fn independent_uniforms_have_near_zero_total_correlation() {
    // Individual raw estimates carry a small negative bias, so check the
    // median of a few seeds against the analytic zero.
    let mut estimates: Vec<f64> = (0..5)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(103 + s);
            let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
            total_correlation(&[&a, &b], 3, 0).unwrap()
        })
        .collect();
    estimates.sort_by(f64::total_cmp);
    assert!(
        estimates[2].abs() <= 0.05,
        "independent columns should give ~0, got median {} of {estimates:?}",
        estimates[2]
    );
}

#[test]
fn correlated_gaussian_mi_matches_analytic() {
    let rho = 0.9f64;
    let analytic = -0.5 * (1.0 - rho * rho).ln(); // 0.8304
    let (x, y) = gaussian_pair(2000, rho, 104);
    let tc = total_correlation(&[&x, &y], 3, 0).unwrap();
    assert!(
        (tc - analytic).abs() <= 0.15,
        "Gaussian rho=0.9 MI should be ~{analytic:.4}, got {tc:.4}"
    );
}

#[test]
fn duplicated_column_has_large_mi() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let tc = total_correlation(&[&a, &a.clone()], 3, 0).unwrap();
    // Near-deterministic dependence; the Gaussian analog -0.5*ln(1-rho^2)
    // diverges as rho -> 1, so anything above 1 nat is the sane regime.
    assert!(tc > 1.0, "duplicated column should give large MI, got {tc}");
}

#[test]
fn grouped_mi_of_independent_triplet_is_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let n = 2000;
    let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let g1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let g2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let opts = MiOptions { clamp_negative: false, ..MiOptions::default() };
    let est = grouped_mi(&a, &[&g1, &g2], &opts).unwrap();
    assert!(est.value.abs() <= 0.07, "independent grouped MI should be ~0, got {}", est.value);
    let clamped = grouped_mi(&a, &[&g1, &g2], &MiOptions::default()).unwrap();
    assert!(clamped.value >= 0.0);
}

#[test]
fn grouped_mi_detects_additive_structure() {
    // a = g1 + g2 + small noise. On matched Gaussian data the analytic
    // grouped MI is 0.5*ln(det(S_group)*var(a)/det(S_joint)) = 0.5*ln(201)
    // for unit-variance independent g's and noise sd 0.1.
    let sigma = 0.1f64;
    let var_a = 2.0 + sigma * sigma;
    let det_joint = var_a - 2.0; // det of the 3x3 joint covariance
    let analytic = 0.5 * (1.0 * var_a / det_joint).ln();
    assert!((analytic - 0.5 * 201.0f64.ln()).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let norm = Normal::new(0.0, 1.0).unwrap();
    let n = 2000;
    let g1: Vec<f64> = (0..n).map(|_| norm.sample(&mut rng)).collect();
    let g2: Vec<f64> = (0..n).map(|_| norm.sample(&mut rng)).collect();
    let a: Vec<f64> = (0..n)
        .map(|i| g1[i] + g2[i] + sigma * norm.sample(&mut rng))
        .collect();
    let est = grouped_mi(&a, &[&g1, &g2], &MiOptions::default()).unwrap();
    assert!(
        est.raw > 0.5,
        "strong additive dependence should give raw > 0.5 (analytic {analytic:.3}), got {}",
        est.raw
    );
}

#[test]
fn grouped_mi_is_rank_invariant_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let n = 400;
    let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let g1: Vec<f64> = a.iter().map(|v| v + rng.random::<f64>()).collect();
    let g2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let opts = MiOptions::default();
    let base = grouped_mi(&a, &[&g1, &g2], &opts).unwrap();
    // Strictly increasing transform of one column; ranks are unchanged.
    let g1_mapped: Vec<f64> = g1.iter().map(|v| (3.0 * v).exp()).collect();
    let mapped = grouped_mi(&a, &[&g1_mapped, &g2], &opts).unwrap();
    assert_eq!(base.raw.to_bits(), mapped.raw.to_bits());
    assert_eq!(base.value.to_bits(), mapped.value.to_bits());
}

#[test]
fn estimates_are_row_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let n = 300;
    let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = a.iter().map(|v| v * 0.7 + rng.random::<f64>()).collect();
    let base = total_correlation(&[&a, &b], 3, 0).unwrap();
    // Deterministic shuffle applied to both columns.
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let ap: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
    let bp: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
    let shuffled = total_correlation(&[&ap, &bp], 3, 0).unwrap();
    assert_eq!(base.to_bits(), shuffled.to_bits());
}

#[test]
fn bivariate_total_correlation_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let a: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = a.iter().map(|v| v + rng.random::<f64>()).collect();
    let ab = total_correlation(&[&a, &b], 3, 7).unwrap();
    let ba = total_correlation(&[&b, &a], 3, 7).unwrap();
    assert_eq!(ab.to_bits(), ba.to_bits());
}

#[test]
fn median_error_shrinks_with_sample_size() {
    let rho = 0.9f64;
    let analytic = -0.5 * (1.0 - rho * rho).ln();
    let mut medians = Vec::new();
    for n in [200, 1000, 5000] {
        let mut errs: Vec<f64> = (0..20)
            .map(|s| {
                let (x, y) = gaussian_pair(n, rho, 40_000 + s);
                (total_correlation(&[&x, &y], 3, 0).unwrap() - analytic).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        medians.push(0.5 * (errs[9] + errs[10]));
    }
    assert!(
        medians[0] >= medians[1] && medians[1] >= medians[2],
        "median errors should shrink with n: {medians:?}"
    );
}

//! Oracles for the mixture-projection theory: sampling versus closed-form
//! kurtosis, the phase-sign identity, the discriminant direction against a
//! grid search, and the behavior of a single unit trained with the variance
//! constancy loss alone.

use rand::Rng;
use vcl_core::data::make_gmm2_dataset;
use vcl_core::gmm::{
    average_tail_direction, axial_angle_degrees, grid_rayleigh_direction, lda_direction,
    minimize_projection_kurtosis, phase_regime, projection_kurtosis, scatter_matrices,
    train_single_unit_vcl, Gmm2, PhaseRegime, ScatterPair, SingleUnitCfg,
};
use vcl_core::stats::{compute_moments, seeded_rng};

fn random_shared_cov_gmm<R: Rng>(rng: &mut R) -> Gmm2 {
    let p = rng.gen_range(0.05..0.95);
    let mu1 = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
    let mu2 = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
    // A·Aᵀ + δI is symmetric positive definite.
    let a = [
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.5..1.5),
    ];
    let delta = rng.gen_range(0.2..1.0);
    let cov = vec![
        vec![a[0] * a[0] + a[1] * a[1] + delta, a[0] * a[2] + a[1] * a[3]],
        vec![a[0] * a[2] + a[1] * a[3], a[2] * a[2] + a[3] * a[3] + delta],
    ];
    Gmm2::new(p, mu1, mu2, cov.clone(), cov).unwrap()
}

#[test]
fn closed_form_kurtosis_matches_sampling() {
    let mut rng = seeded_rng(60);
    for trial in 0..6 {
        let g = random_shared_cov_gmm(&mut rng);
        let theta = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0f64).max(0.05)];
        let closed = projection_kurtosis(&g, &theta).unwrap();

        let ds = make_gmm2_dataset(&g, 400_000, 1000 + trial).unwrap();
        let projected: Vec<f64> = (0..ds.rows())
            .map(|i| {
                let row = ds.row(i);
                row[0] * theta[0] + row[1] * theta[1]
            })
            .collect();
        let mc = compute_moments(&projected).unwrap().kurtosis.unwrap();
        let rel = (mc - closed).abs() / closed;
        assert!(
            rel < 0.02,
            "trial {trial}: closed {closed} vs sampled {mc} (rel {rel:.4})"
        );
    }
}

#[test]
fn kurtosis_excess_sign_follows_the_phase_factor() {
    // κ − 3 carries the sign of (1 − 6α) wherever the projection sees the
    // mean gap.
    let theta = [0.8, 0.6];
    for k in 1..20 {
        let p = k as f64 / 20.0;
        let g = Gmm2::isotropic(p, vec![-1.5, 0.5], vec![1.0, -0.5], 1.0).unwrap();
        let kappa = projection_kurtosis(&g, &theta).unwrap();
        let alpha = p * (1.0 - p);
        let factor = 1.0 - 6.0 * alpha;
        if factor.abs() > 1e-9 {
            assert_eq!(
                (kappa - 3.0).signum(),
                factor.signum(),
                "p={p}: κ−3 = {} vs 1−6α = {factor}",
                kappa - 3.0
            );
        }
        // Regime predicate agrees with the sign.
        let regime = phase_regime(p).unwrap();
        if factor < 0.0 {
            assert_eq!(regime, PhaseRegime::Separate);
        } else if factor > 0.0 {
            assert_eq!(regime, PhaseRegime::Merge);
        }
    }
}

#[test]
fn discriminant_beats_the_grid_for_random_scatter() {
    let mut rng = seeded_rng(61);
    for _ in 0..10 {
        let g = random_shared_cov_gmm(&mut rng);
        let sp = scatter_matrices(&g);
        if sp.sigma_b[(0, 0)] + sp.sigma_b[(1, 1)] < 1e-6 {
            continue;
        }
        let dir = lda_direction(&sp).unwrap();
        let rayleigh = |sp: &ScatterPair, t: &[f64]| {
            let qb = sp.sigma_b[(0, 0)] * t[0] * t[0]
                + 2.0 * sp.sigma_b[(0, 1)] * t[0] * t[1]
                + sp.sigma_b[(1, 1)] * t[1] * t[1];
            let qw = sp.sigma_w[(0, 0)] * t[0] * t[0]
                + 2.0 * sp.sigma_w[(0, 1)] * t[0] * t[1]
                + sp.sigma_w[(1, 1)] * t[1] * t[1];
            qb / qw
        };
        let best = rayleigh(&sp, &dir);
        for k in 0..360 {
            let angle = std::f64::consts::PI * k as f64 / 360.0;
            let t = [angle.cos(), angle.sin()];
            assert!(
                rayleigh(&sp, &t) <= best + 1e-9,
                "grid direction at {k} beats the solve"
            );
        }
    }
}

#[test]
fn component_covariance_matches_generator() {
    let g = Gmm2::new(
        0.35,
        vec![0.0, 0.0],
        vec![6.0, -6.0],
        vec![vec![2.0, 0.7], vec![0.7, 1.0]],
        vec![vec![0.5, -0.2], vec![-0.2, 1.5]],
    )
    .unwrap();
    let ds = make_gmm2_dataset(&g, 400_000, 77).unwrap();
    for component in 0..2 {
        let rows: Vec<&[f64]> = (0..ds.rows())
            .filter(|&i| ds.labels()[i] == component)
            .map(|i| ds.row(i))
            .collect();
        let n = rows.len() as f64;
        let mut mean = [0.0; 2];
        for r in &rows {
            mean[0] += r[0];
            mean[1] += r[1];
        }
        mean[0] /= n;
        mean[1] /= n;
        let mut cov = [[0.0; 2]; 2];
        for r in &rows {
            let d = [r[0] - mean[0], r[1] - mean[1]];
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += d[i] * d[j] / n;
                }
            }
        }
        let want = if component == 0 { &g.sigma1 } else { &g.sigma2 };
        let mut frob_diff = 0.0;
        let mut frob_ref = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                frob_diff += (cov[i][j] - want[(i, j)]).powi(2);
                frob_ref += want[(i, j)].powi(2);
            }
        }
        let rel = (frob_diff / frob_ref).sqrt();
        assert!(rel < 0.02, "component {component}: Frobenius error {rel:.4}");
    }
}

#[test]
fn descent_and_training_agree_with_the_regime_by_seed() {
    // Reduced-count version of the phase experiment; the acceptance suite
    // runs the full ten-seed protocol.
    for (p, expect_separate) in [(0.25, true), (0.1, false)] {
        let g = Gmm2::isotropic(p, vec![-2.0, 0.0], vec![2.0, 0.0], 1.0).unwrap();
        let sp = scatter_matrices(&g);
        let lda = lda_direction(&sp).unwrap();
        let merge = grid_rayleigh_direction(&sp, false, 360).unwrap();
        let target = if expect_separate { &lda } else { &merge };

        let descent = minimize_projection_kurtosis(&g, &[0.6, 0.7], 3000, 0.1).unwrap();
        let angle = axial_angle_degrees(&descent.final_theta, target);
        assert!(angle < 1.0, "p={p}: descent angle {angle}°");

        // SGD leaves per-seed wobble; like the full protocol, allow one
        // outlier seed but insist the majority lands in the band.
        let ds = make_gmm2_dataset(&g, 16_000, 4321).unwrap();
        let cfg = SingleUnitCfg::default();
        let angles: Vec<f64> = [11u64, 12, 13]
            .iter()
            .map(|&seed| {
                let traj = train_single_unit_vcl(ds.features(), 2, &cfg, seed).unwrap();
                let direction = average_tail_direction(&traj, cfg.epochs / 2).unwrap();
                axial_angle_degrees(&direction, target)
            })
            .collect();
        let hits = angles.iter().filter(|&&a| a < 8.0).count();
        assert!(hits >= 2, "p={p}: angles {angles:?}");
        assert!(angles.iter().all(|&a| a < 20.0), "p={p}: angles {angles:?}");
    }
}

#[test]
fn isotropic_gaussian_input_leaves_direction_unpinned() {
    // A single spherical Gaussian has no preferred direction; across seeds
    // the final axes scatter (axial circular variance above 0.5).
    let g = Gmm2::isotropic(0.5, vec![0.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
    let ds = make_gmm2_dataset(&g, 8_000, 5150).unwrap();
    let cfg = SingleUnitCfg {
        epochs: 60,
        lr_schedule: vec![(0, 0.1)],
        ..SingleUnitCfg::default()
    };
    let mut cos_sum = 0.0;
    let mut sin_sum = 0.0;
    let seeds = 10;
    for seed in 0..seeds {
        let traj = train_single_unit_vcl(ds.features(), 2, &cfg, seed).unwrap();
        let dir = traj.last().unwrap();
        // Doubled angle folds the ± ambiguity of an axis.
        let phi = 2.0 * dir[1].atan2(dir[0]);
        cos_sum += phi.cos();
        sin_sum += phi.sin();
    }
    let r = (cos_sum * cos_sum + sin_sum * sin_sum).sqrt() / seeds as f64;
    let circular_variance = 1.0 - r;
    assert!(
        circular_variance > 0.5,
        "directions concentrated: circular variance {circular_variance:.3}"
    );
}

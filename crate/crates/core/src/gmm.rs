//! Two-component Gaussian mixtures under linear projection: the closed-form
//! kurtosis of `ρ = xᵀθ`, the separate/merge phase predicate on the mixture
//! prior, the discriminant-direction oracle, and single-unit experiments
//! (direct kurtosis descent and training with the variance constancy loss
//! alone).

use crate::error::{CoreError, Result};
use crate::stats::seeded_rng;
use crate::tensor::Tensor;
use crate::vcl::{split_minibatch, vcl_unit_loss, VclConfig};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Lower edge of the prior band in which kurtosis minimization separates the
/// clusters: `(1 − √(1/3))/2 ≈ 0.211324`.
pub fn separate_band_lower() -> f64 {
    (1.0 - (1.0f64 / 3.0).sqrt()) / 2.0
}

/// Two-component Gaussian mixture in `R^d`.
#[derive(Debug, Clone)]
pub struct Gmm2 {
    pub p: f64,
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
    pub sigma1: DMatrix<f64>,
    pub sigma2: DMatrix<f64>,
}

impl Gmm2 {
    pub fn new(
        p: f64,
        mu1: Vec<f64>,
        mu2: Vec<f64>,
        sigma1: Vec<Vec<f64>>,
        sigma2: Vec<Vec<f64>>,
    ) -> Result<Gmm2> {
        if !(0.0..1.0).contains(&p) || p == 0.0 {
            return Err(CoreError::invalid(format!("mixture prior must lie in (0,1), got {p}")));
        }
        let d = mu1.len();
        if d == 0 || mu2.len() != d {
            return Err(CoreError::invalid("mean vectors must share a nonzero dimension"));
        }
        let to_matrix = |rows: Vec<Vec<f64>>| -> Result<DMatrix<f64>> {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(CoreError::invalid("covariance must be d×d"));
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let m = DMatrix::from_row_slice(d, d, &flat);
            for i in 0..d {
                for j in (i + 1)..d {
                    if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 {
                        return Err(CoreError::invalid("covariance must be symmetric"));
                    }
                }
            }
            Ok(m)
        };
        Ok(Gmm2 {
            p,
            mu1: DVector::from_vec(mu1),
            mu2: DVector::from_vec(mu2),
            sigma1: to_matrix(sigma1)?,
            sigma2: to_matrix(sigma2)?,
        })
    }

    /// Shared isotropic covariance `sd²·I`.
    pub fn isotropic(p: f64, mu1: Vec<f64>, mu2: Vec<f64>, sd: f64) -> Result<Gmm2> {
        let d = mu1.len();
        let eye: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { sd * sd } else { 0.0 }).collect())
            .collect();
        Gmm2::new(p, mu1, mu2, eye.clone(), eye)
    }

    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    /// `α = p(1−p)`.
    pub fn alpha(&self) -> f64 {
        self.p * (1.0 - self.p)
    }

    /// One draw: component 0 with probability `p`, then that component's
    /// Gaussian through its Cholesky factor. Returns (point, component).
    pub fn sample<R: Rng>(
        &self,
        chol1: &DMatrix<f64>,
        chol2: &DMatrix<f64>,
        rng: &mut R,
    ) -> (DVector<f64>, usize) {
        let d = self.dim();
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        if rng.gen_bool(self.p) {
            (&self.mu1 + chol1 * z, 0)
        } else {
            (&self.mu2 + chol2 * z, 1)
        }
    }

    /// Cholesky factors of both component covariances.
    pub fn cholesky_factors(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let c1 = nalgebra::Cholesky::new(self.sigma1.clone())
            .ok_or_else(|| CoreError::Numerical("first covariance is not positive definite".into()))?;
        let c2 = nalgebra::Cholesky::new(self.sigma2.clone())
            .ok_or_else(|| CoreError::Numerical("second covariance is not positive definite".into()))?;
        Ok((c1.l(), c2.l()))
    }
}

/// Within scatter `pΣ₁ + (1−p)Σ₂` and between scatter `(μ₁−μ₂)(μ₁−μ₂)ᵀ`.
#[derive(Debug, Clone)]
pub struct ScatterPair {
    pub sigma_w: DMatrix<f64>,
    pub sigma_b: DMatrix<f64>,
}

pub fn scatter_matrices(g: &Gmm2) -> ScatterPair {
    let sigma_w = &g.sigma1 * g.p + &g.sigma2 * (1.0 - g.p);
    let gap = &g.mu1 - &g.mu2;
    let sigma_b = &gap * gap.transpose();
    ScatterPair { sigma_w, sigma_b }
}

fn quadratic_form(m: &DMatrix<f64>, theta: &DVector<f64>) -> f64 {
    (theta.transpose() * m * theta)[(0, 0)]
}

/// Closed-form kurtosis of the projection `ρ = xᵀθ`:
/// `3 + α(1−6α)·qb²/(α·qb + qw)²` with `qb = θᵀΣ_bθ`, `qw = θᵀΣ_wθ`.
/// Exact when the two components share a covariance.
pub fn projection_kurtosis(g: &Gmm2, theta: &[f64]) -> Result<f64> {
    if theta.len() != g.dim() {
        return Err(CoreError::shape("projection_kurtosis", "direction dimension mismatch"));
    }
    let sp = scatter_matrices(g);
    let t = DVector::from_column_slice(theta);
    let qb = quadratic_form(&sp.sigma_b, &t);
    let qw = quadratic_form(&sp.sigma_w, &t);
    let alpha = g.alpha();
    let denom = alpha * qb + qw;
    if denom <= 0.0 {
        return Err(CoreError::invalid(
            "projected variance is zero; kurtosis undefined along this direction",
        ));
    }
    Ok(3.0 + alpha * (1.0 - 6.0 * alpha) * qb * qb / (denom * denom))
}

/// Which regime a mixture prior falls in: inside the band
/// `(1−√(1/3))/2 ≤ p ≤ (1+√(1/3))/2` kurtosis minimization aligns with the
/// discriminant direction (clusters separate); outside it the clusters
/// merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRegime {
    Separate,
    Merge,
}

impl PhaseRegime {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseRegime::Separate => "separate",
            PhaseRegime::Merge => "merge",
        }
    }
}

pub fn phase_regime(p: f64) -> Result<PhaseRegime> {
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(CoreError::invalid(format!("prior must lie in (0,1), got {p}")));
    }
    let lo = separate_band_lower();
    let hi = 1.0 - lo;
    Ok(if (lo..=hi).contains(&p) {
        PhaseRegime::Separate
    } else {
        PhaseRegime::Merge
    })
}

/// Recovers the mean-gap direction (up to scale) from a rank-1 between
/// scatter by taking its strongest column.
fn rank_one_direction(sigma_b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let d = sigma_b.nrows();
    let mut best = 0;
    for j in 1..d {
        if sigma_b[(j, j)] > sigma_b[(best, best)] {
            best = j;
        }
    }
    if sigma_b[(best, best)] <= 0.0 {
        return Err(CoreError::invalid("between scatter is zero; no discriminant direction"));
    }
    Ok(sigma_b.column(best).into_owned())
}

fn normalize_signed(mut v: DVector<f64>) -> Vec<f64> {
    let norm = v.norm();
    v /= norm;
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v = -v;
        }
    }
    v.iter().cloned().collect()
}

/// The discriminant direction: the unit vector maximizing
/// `θᵀΣ_bθ / θᵀΣ_wθ`. For the rank-1 between scatter this is
/// `Σ_w⁻¹(μ₁−μ₂)` normalized, sign fixed by a positive first nonzero
/// component.
pub fn lda_direction(sp: &ScatterPair) -> Result<Vec<f64>> {
    let gap = rank_one_direction(&sp.sigma_b)?;
    let chol = nalgebra::Cholesky::new(sp.sigma_w.clone())
        .ok_or_else(|| CoreError::Numerical("within scatter is singular".into()))?;
    let solved = chol.solve(&gap);
    Ok(normalize_signed(solved))
}

/// Grid search over 2-D directions (uniform steps over a half-circle) for
/// the extremum of the Rayleigh quotient `θᵀΣ_bθ / θᵀΣ_wθ`. An oracle
/// independent of the linear-algebra path of [`lda_direction`].
pub fn grid_rayleigh_direction(sp: &ScatterPair, maximize: bool, steps: usize) -> Result<Vec<f64>> {
    if sp.sigma_w.nrows() != 2 {
        return Err(CoreError::invalid("grid search is defined for 2-D scatter only"));
    }
    if steps == 0 {
        return Err(CoreError::invalid("grid search needs at least one step"));
    }
    let mut best_theta = None;
    let mut best_value = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for k in 0..steps {
        let angle = std::f64::consts::PI * k as f64 / steps as f64;
        let t = DVector::from_vec(vec![angle.cos(), angle.sin()]);
        let qw = quadratic_form(&sp.sigma_w, &t);
        if qw <= 0.0 {
            continue;
        }
        let value = quadratic_form(&sp.sigma_b, &t) / qw;
        if (maximize && value > best_value) || (!maximize && value < best_value) {
            best_value = value;
            best_theta = Some(t);
        }
    }
    let theta = best_theta.ok_or_else(|| CoreError::Numerical("degenerate scatter grid".into()))?;
    Ok(normalize_signed(theta))
}

/// Angle in degrees between two directions treated as axes (sign ignored).
pub fn axial_angle_degrees(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let c = (dot / (na * nb)).abs().min(1.0);
    c.acos().to_degrees()
}

/// One step record of the kurtosis descent.
#[derive(Debug, Clone)]
pub struct DescentRecord {
    pub step: usize,
    pub theta: Vec<f64>,
    pub kurtosis: f64,
}

/// Result of [`minimize_projection_kurtosis`].
#[derive(Debug, Clone)]
pub struct KurtosisDescent {
    pub final_theta: Vec<f64>,
    pub trajectory: Vec<DescentRecord>,
}

/// Gradient descent on the closed-form projection kurtosis with per-step
/// renormalization of θ (kurtosis is scale invariant, so only the direction
/// matters). Divergence shows up in the trajectory, it is not an error.
pub fn minimize_projection_kurtosis(
    g: &Gmm2,
    theta0: &[f64],
    steps: usize,
    lr: f64,
) -> Result<KurtosisDescent> {
    if theta0.len() != g.dim() {
        return Err(CoreError::shape(
            "minimize_projection_kurtosis",
            "direction dimension mismatch",
        ));
    }
    let norm0: f64 = theta0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm0 == 0.0 {
        return Err(CoreError::invalid("initial direction must be nonzero"));
    }
    let sp = scatter_matrices(g);
    let gap = &g.mu1 - &g.mu2;
    let alpha = g.alpha();
    let c = alpha * (1.0 - 6.0 * alpha);
    let mut theta = DVector::from_column_slice(theta0) / norm0;
    let mut trajectory = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let qb_lin = gap.dot(&theta);
        let qb = qb_lin * qb_lin;
        let qw = quadratic_form(&sp.sigma_w, &theta);
        let u = alpha * qb + qw;
        let kurtosis = 3.0 + c * qb * qb / (u * u);
        trajectory.push(DescentRecord {
            step,
            theta: theta.iter().cloned().collect(),
            kurtosis,
        });
        if step == steps {
            break;
        }
        // ∇κ = (2c·qb/u³)(u·∇qb − qb·∇u), ∇qb = 2(δᵀθ)δ, ∇u = α∇qb + 2Σ_wθ.
        let grad_qb = &gap * (2.0 * qb_lin);
        let grad_u = &grad_qb * alpha + (&sp.sigma_w * &theta) * 2.0;
        let grad = (&grad_qb * u - &grad_u * qb) * (2.0 * c * qb / (u * u * u));
        theta -= grad * lr;
        let norm = theta.norm();
        if norm == 0.0 {
            break;
        }
        theta /= norm;
    }
    let final_theta = trajectory.last().map(|r| r.theta.clone()).unwrap_or_default();
    Ok(KurtosisDescent { final_theta, trajectory })
}

/// Settings for [`train_single_unit_vcl`].
#[derive(Debug, Clone)]
pub struct SingleUnitCfg {
    pub vcl: VclConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// `(epoch, rate)` breakpoints; the rate at epoch `e` is the last
    /// breakpoint at or before `e`. A decaying tail settles the direction
    /// below the SGD noise floor.
    pub lr_schedule: Vec<(usize, f64)>,
    pub momentum: f64,
    pub clip_norm: f64,
}

impl Default for SingleUnitCfg {
    fn default() -> Self {
        SingleUnitCfg {
            vcl: VclConfig { n: 64, gamma: 1.0, beta_init: 1.0 },
            batch_size: 128,
            epochs: 400,
            lr_schedule: vec![(0, 0.1), (40, 0.02)],
            momentum: 0.9,
            clip_norm: 1.0,
        }
    }
}

/// Sign-aligned average of the last `tail` directions of a trajectory,
/// renormalized. Directions are axial (±θ equivalent), so each entry is
/// flipped to the side of the most recent one before averaging; the average
/// sits below the SGD noise floor of any single epoch.
pub fn average_tail_direction(trajectory: &[Vec<f64>], tail: usize) -> Result<Vec<f64>> {
    if trajectory.is_empty() || tail == 0 {
        return Err(CoreError::invalid("need a nonempty trajectory and tail"));
    }
    let take = tail.min(trajectory.len());
    let slice = &trajectory[trajectory.len() - take..];
    let reference = &slice[slice.len() - 1];
    let mut acc = vec![0.0; reference.len()];
    for direction in slice {
        let dot: f64 = direction.iter().zip(reference).map(|(a, b)| a * b).sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        for (a, v) in acc.iter_mut().zip(direction) {
            *a += sign * v;
        }
    }
    let norm: f64 = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CoreError::Numerical("tail directions cancel out".into()));
    }
    Ok(acc.iter().map(|x| x / norm).collect())
}

fn schedule_rate(schedule: &[(usize, f64)], epoch: usize) -> f64 {
    let mut rate = schedule.first().map(|&(_, r)| r).unwrap_or(0.0);
    for &(e, r) in schedule {
        if e <= epoch {
            rate = r;
        } else {
            break;
        }
    }
    rate
}

/// Trains the weights θ of one linear unit using only the variance
/// constancy loss over shuffled minibatches; β is learned alongside θ.
/// Returns the unit direction θ/‖θ‖ recorded after each epoch.
pub fn train_single_unit_vcl(
    samples: &[f64],
    dim: usize,
    cfg: &SingleUnitCfg,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || !samples.len().is_multiple_of(dim) {
        return Err(CoreError::invalid("sample matrix does not match its dimension"));
    }
    let rows = samples.len() / dim;
    cfg.vcl.validate(cfg.batch_size)?;
    if rows < cfg.batch_size {
        return Err(CoreError::Config(format!(
            "need at least one full batch: {rows} rows < batch {}",
            cfg.batch_size
        )));
    }
    if cfg.lr_schedule.is_empty() {
        return Err(CoreError::Config("learning-rate schedule is empty".into()));
    }

    let mut rng = seeded_rng(seed);
    let sd = 1.0 / (dim as f64).sqrt();
    let theta_init: Vec<f64> = (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * sd
        })
        .collect();
    let theta = Tensor::param(&[dim, 1], theta_init)?;
    let beta = Tensor::param(&[1], vec![cfg.vcl.beta_init])?;

    let mut v_theta = vec![0.0; dim];
    let mut v_beta = vec![0.0; 1];
    let mut indices: Vec<usize> = (0..rows).collect();
    let mut directions = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = schedule_rate(&cfg.lr_schedule, epoch);
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(cfg.batch_size) {
            if chunk.len() < 2 * cfg.vcl.n {
                continue;
            }
            let mut batch = Vec::with_capacity(chunk.len() * dim);
            for &idx in chunk {
                batch.extend_from_slice(&samples[idx * dim..(idx + 1) * dim]);
            }
            let x = Tensor::matrix(chunk.len(), dim, batch)?;
            let pre = x.matmul(&theta)?;
            let (s1, s2) = split_minibatch(&pre, cfg.vcl.n)?;
            let loss = vcl_unit_loss(&s1, &s2, &beta)?.mean()?;
            loss.backward()?;

            let g_theta = theta.grad().unwrap_or_else(|| vec![0.0; dim]);
            let g_beta = beta.grad().unwrap_or_else(|| vec![0.0; 1]);
            let norm: f64 = g_theta
                .iter()
                .chain(g_beta.iter())
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            let scale = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            for (v, g) in v_theta.iter_mut().zip(&g_theta) {
                *v = cfg.momentum * *v + g * scale;
            }
            for (v, g) in v_beta.iter_mut().zip(&g_beta) {
                *v = cfg.momentum * *v + g * scale;
            }
            theta.update_data(|d| {
                for (p, v) in d.iter_mut().zip(&v_theta) {
                    *p -= lr * v;
                }
            });
            beta.update_data(|d| {
                for (p, v) in d.iter_mut().zip(&v_beta) {
                    *p -= lr * v;
                }
            });
            theta.zero_grad();
            beta.zero_grad();
        }
        let t = theta.values();
        let norm: f64 = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        directions.push(if norm > 0.0 {
            t.iter().map(|x| x / norm).collect()
        } else {
            t
        });
    }
    Ok(directions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separated_gmm(p: f64) -> Gmm2 {
        Gmm2::isotropic(p, vec![-2.0, 0.0], vec![2.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn scatter_matrices_basic_cases() {
        let g = Gmm2::isotropic(0.5, vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        let sp = scatter_matrices(&g);
        assert!(sp.sigma_b.iter().all(|&v| v == 0.0));
        assert_eq!(sp.sigma_w, DMatrix::identity(2, 2));
    }

    #[test]
    fn scatter_matrices_match_elementwise_recomputation() {
        let g = Gmm2::new(
            0.3,
            vec![1.0, -1.0],
            vec![0.0, 2.0],
            vec![vec![2.0, 0.5], vec![0.5, 1.0]],
            vec![vec![1.0, -0.25], vec![-0.25, 3.0]],
        )
        .unwrap();
        let sp = scatter_matrices(&g);
        let gap = [1.0, -3.0];
        for i in 0..2 {
            for j in 0..2 {
                let w = 0.3 * g.sigma1[(i, j)] + 0.7 * g.sigma2[(i, j)];
                assert!((sp.sigma_w[(i, j)] - w).abs() < 1e-12);
                assert!((sp.sigma_b[(i, j)] - gap[i] * gap[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_kurtosis_hand_case() {
        // p = ½, means (∓1, 0), Σ = I, θ = (1,0): κ = 2.5.
        let g = Gmm2::isotropic(0.5, vec![-1.0, 0.0], vec![1.0, 0.0], 1.0).unwrap();
        let k = projection_kurtosis(&g, &[1.0, 0.0]).unwrap();
        assert!((k - 2.5).abs() < 1e-12, "got {k}");
        // Orthogonal to the gap the projection is a pure Gaussian.
        let k_perp = projection_kurtosis(&g, &[0.0, 1.0]).unwrap();
        assert!((k_perp - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kurtosis_is_scale_invariant() {
        let g = separated_gmm(0.3);
        let a = projection_kurtosis(&g, &[0.4, -0.7]).unwrap();
        let b = projection_kurtosis(&g, &[-2.0, 3.5]).unwrap();
        // Same direction, different scale and sign.
        let c = projection_kurtosis(&g, &[0.8, -1.4]).unwrap();
        assert!((a - c).abs() < 1e-10);
        assert!(b.is_finite());
    }

    #[test]
    fn phase_regime_boundaries() {
        assert_eq!(phase_regime(0.25).unwrap(), PhaseRegime::Separate);
        assert_eq!(phase_regime(0.5).unwrap(), PhaseRegime::Separate);
        assert_eq!(phase_regime(0.1).unwrap(), PhaseRegime::Merge);
        assert_eq!(phase_regime(0.95).unwrap(), PhaseRegime::Merge);
        assert!((separate_band_lower() - 0.211324).abs() < 1e-6);
        // The phase factor α(1−6α) vanishes at the band edge.
        let p = separate_band_lower();
        let alpha = p * (1.0 - p);
        assert!((alpha * (1.0 - 6.0 * alpha)).abs() < 1e-12);
    }

    #[test]
    fn lda_isotropic_case() {
        let g = Gmm2::isotropic(0.4, vec![2.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let dir = lda_direction(&scatter_matrices(&g)).unwrap();
        assert!((dir[0] - 1.0).abs() < 1e-12);
        assert!(dir[1].abs() < 1e-12);
    }

    #[test]
    fn lda_diagonal_case_matches_hand_solve() {
        // Σ_w = diag(1,4), gap = (1,1) → direction ∝ (1, 0.25).
        let sp = ScatterPair {
            sigma_w: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]),
            sigma_b: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        };
        let dir = lda_direction(&sp).unwrap();
        let norm = (1.0f64 + 0.0625).sqrt();
        assert!((dir[0] - 1.0 / norm).abs() < 1e-12);
        assert!((dir[1] - 0.25 / norm).abs() < 1e-12);
        // And it beats every grid direction on the Rayleigh quotient.
        let grid = grid_rayleigh_direction(&sp, true, 360).unwrap();
        assert!(axial_angle_degrees(&dir, &grid) < 1.0);
    }

    #[test]
    fn lda_errors_on_degenerate_inputs() {
        let sp = ScatterPair {
            sigma_w: DMatrix::zeros(2, 2),
            sigma_b: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        };
        assert!(lda_direction(&sp).is_err());
        let sp2 = ScatterPair {
            sigma_w: DMatrix::identity(2, 2),
            sigma_b: DMatrix::zeros(2, 2),
        };
        assert!(lda_direction(&sp2).is_err());
    }

    #[test]
    fn descent_separates_inside_the_band() {
        let g = separated_gmm(0.25);
        let out = minimize_projection_kurtosis(&g, &[0.3, 0.8], 2000, 0.1).unwrap();
        let lda = lda_direction(&scatter_matrices(&g)).unwrap();
        let angle = axial_angle_degrees(&out.final_theta, &lda);
        assert!(angle < 1.0, "angle to discriminant {angle}°");
    }

    #[test]
    fn descent_merges_outside_the_band() {
        let g = separated_gmm(0.1);
        let out = minimize_projection_kurtosis(&g, &[0.9, 0.2], 2000, 0.1).unwrap();
        let lda = lda_direction(&scatter_matrices(&g)).unwrap();
        let cos = out.final_theta[0] * lda[0] + out.final_theta[1] * lda[1];
        assert!(cos.abs() < 0.1, "merge direction still aligned: cos {cos}");
    }

    #[test]
    fn descent_stalls_when_means_coincide() {
        let g = Gmm2::isotropic(0.3, vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        let out = minimize_projection_kurtosis(&g, &[1.0, 0.0], 50, 0.1).unwrap();
        assert!((out.final_theta[0] - 1.0).abs() < 1e-12);
        for rec in &out.trajectory {
            assert!((rec.kurtosis - 3.0).abs() < 1e-12);
        }
    }
}

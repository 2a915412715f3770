//! Sample-moment statistics: unbiased sample variance, central fourth moment,
//! kurtosis, the closed-form variance of sample variances, and the Chebyshev
//! concentration bound on the two-sample variance ratio, each paired with a
//! seedable Monte-Carlo estimator so the closed forms can be checked
//! empirically.

use crate::error::{CoreError, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Moments of a 1-D sample.
///
/// `var_unbiased` uses divisor `n - 1`; `m4_central` uses the plug-in divisor
/// `n`. `kurtosis` is `m4 / var²` with the *biased* (divisor `n`) variance in
/// the denominator so that a symmetric two-point sample of even length scores
/// exactly 1. It is `None` when the sample is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub var_unbiased: f64,
    pub m4_central: f64,
    pub kurtosis: Option<f64>,
}

/// The two-valued distribution `a·z + b` with `z ~ Bernoulli(1/2)`, `a != 0`.
///
/// Population variance is `a²/4`, fourth central moment `a⁴/16`, kurtosis 1 —
/// the minimum possible kurtosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointDist {
    pub a: f64,
    pub b: f64,
}

impl TwoPointDist {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(CoreError::invalid("two-point scale must be finite and nonzero"));
        }
        Ok(TwoPointDist { a, b })
    }

    pub fn population_var(&self) -> f64 {
        self.a * self.a / 4.0
    }

    pub fn population_m4(&self) -> f64 {
        let a2 = self.a * self.a;
        a2 * a2 / 16.0
    }
}

/// A seedable source of i.i.d. real draws with analytically known population
/// moments where they exist. Identical seeds yield identical draw sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    /// Normal with the given mean and standard deviation.
    Gaussian { mean: f64, sd: f64 },
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Laplace with the given location and scale.
    Laplace { mean: f64, scale: f64 },
    /// `a·z + b`, `z ~ Bernoulli(1/2)`.
    TwoPoint(TwoPointDist),
    /// A point mass.
    Constant(f64),
}

impl Dist {
    /// Standard normal.
    pub fn standard_normal() -> Self {
        Dist::Gaussian { mean: 0.0, sd: 1.0 }
    }

    /// Uniform with population variance 1 (range `±√3`).
    pub fn unit_variance_uniform() -> Self {
        let h = 3f64.sqrt();
        Dist::Uniform { lo: -h, hi: h }
    }

    /// Laplace with population variance 1 (scale `1/√2`).
    pub fn unit_variance_laplace() -> Self {
        Dist::Laplace { mean: 0.0, scale: 0.5f64.sqrt() }
    }

    /// Two-point with population variance 1 (`a = 2`).
    pub fn unit_variance_two_point() -> Self {
        Dist::TwoPoint(TwoPointDist { a: 2.0, b: 0.0 })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Dist::Uniform { lo, hi } => rng.gen_range(lo..hi),
            Dist::Laplace { mean, scale } => {
                // Inverse CDF on u ~ U(-1/2, 1/2).
                let u: f64 = rng.gen_range(-0.5..0.5);
                mean - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Dist::TwoPoint(tp) => {
                if rng.gen_bool(0.5) {
                    tp.a + tp.b
                } else {
                    tp.b
                }
            }
            Dist::Constant(c) => c,
        }
    }

    /// Fills `buf` with one i.i.d. sample.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, buf: &mut [f64]) {
        for slot in buf.iter_mut() {
            *slot = self.sample(rng);
        }
    }

    pub fn population_var(&self) -> f64 {
        match *self {
            Dist::Gaussian { sd, .. } => sd * sd,
            Dist::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Dist::Laplace { scale, .. } => 2.0 * scale * scale,
            Dist::TwoPoint(tp) => tp.population_var(),
            Dist::Constant(_) => 0.0,
        }
    }

    pub fn population_m4(&self) -> f64 {
        match *self {
            Dist::Gaussian { sd, .. } => 3.0 * sd.powi(4),
            Dist::Uniform { lo, hi } => (hi - lo).powi(4) / 80.0,
            Dist::Laplace { scale, .. } => 24.0 * scale.powi(4),
            Dist::TwoPoint(tp) => tp.population_m4(),
            Dist::Constant(_) => 0.0,
        }
    }

    /// `m4 / σ⁴`; `None` for a point mass.
    pub fn population_kurtosis(&self) -> Option<f64> {
        let v = self.population_var();
        if v == 0.0 {
            return None;
        }
        Some(self.population_m4() / (v * v))
    }
}

/// Deterministic RNG used by every Monte-Carlo routine in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn is_constant(sample: &[f64]) -> bool {
    sample.windows(2).all(|w| w[0] == w[1])
}

/// Unbiased (divisor `n − 1`) sample variance via a two-pass scheme.
/// A constant sample returns exactly 0 even when `mean = Σx/n` would round.
pub fn sample_variance_unbiased(sample: &[f64]) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(CoreError::invalid(format!(
            "sample variance needs at least 2 values, got {n}"
        )));
    }
    if is_constant(sample) {
        return Ok(0.0);
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let ss: f64 = sample.iter().map(|&x| (x - mean) * (x - mean)).sum();
    Ok(ss / (n as f64 - 1.0))
}

/// Mean, unbiased variance, plug-in fourth central moment, and kurtosis of a
/// sample. Two-pass throughout; kurtosis pairs `m4` (divisor `n`) with the
/// biased variance (divisor `n`) and is `None` for a constant sample.
pub fn compute_moments(sample: &[f64]) -> Result<SampleMoments> {
    let n = sample.len();
    if n < 2 {
        return Err(CoreError::invalid(format!(
            "moments need at least 2 values, got {n}"
        )));
    }
    let nf = n as f64;
    if is_constant(sample) {
        return Ok(SampleMoments {
            n,
            mean: sample[0],
            var_unbiased: 0.0,
            m4_central: 0.0,
            kurtosis: None,
        });
    }
    let mean = sample.iter().sum::<f64>() / nf;
    let mut ss = 0.0;
    let mut s4 = 0.0;
    for &x in sample {
        let d = x - mean;
        let d2 = d * d;
        ss += d2;
        s4 += d2 * d2;
    }
    let var_unbiased = ss / (nf - 1.0);
    let var_biased = ss / nf;
    let m4_central = s4 / nf;
    let kurtosis = if var_biased > 0.0 {
        Some(m4_central / (var_biased * var_biased))
    } else {
        None
    };
    Ok(SampleMoments {
        n,
        mean,
        var_unbiased,
        m4_central,
        kurtosis,
    })
}

/// Variance of the unbiased sample variance of a size-`n` sample:
/// `m4/n − σ⁴(n−3)/(n(n−1))`.
pub fn var_of_sample_variance(m4: f64, sigma2: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(CoreError::invalid(format!("sample size must be >= 2, got {n}")));
    }
    if sigma2 < 0.0 {
        return Err(CoreError::invalid("variance must be nonnegative"));
    }
    let sigma4 = sigma2 * sigma2;
    if m4 < sigma4 {
        return Err(CoreError::invalid(format!(
            "fourth moment {m4} below variance squared {sigma4}; no distribution has this"
        )));
    }
    let nf = n as f64;
    Ok(m4 / nf - sigma4 * (nf - 3.0) / (nf * (nf - 1.0)))
}

/// Monte-Carlo estimate of the variance of sample variances: draws `trials`
/// independent size-`n` samples, takes each unbiased sample variance, and
/// returns the empirical variance of those values. Deterministic per seed.
pub fn mc_var_of_sample_variance(dist: &Dist, n: usize, trials: usize, seed: u64) -> Result<f64> {
    if n < 2 {
        return Err(CoreError::invalid(format!("sample size must be >= 2, got {n}")));
    }
    if trials < 1 {
        return Err(CoreError::invalid("at least one trial required"));
    }
    let mut rng = seeded_rng(seed);
    let mut buf = vec![0.0; n];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        dist.sample_into(&mut rng, &mut buf);
        let v = sample_variance_unbiased(&buf)?;
        sum += v;
        sum_sq += v * v;
    }
    let t = trials as f64;
    let mean = sum / t;
    // Two-pass would need O(trials) memory; the compensated one-pass form is
    // adequate here because sample variances are nonnegative and bounded.
    Ok((sum_sq / t - mean * mean).max(0.0))
}

/// Right-hand side of the ratio concentration bound:
/// `(1 − (1/ε²)(κ/n − (n−3)/(n(n−1))))²`, clamped below at 0 when the inner
/// expression goes negative (the bound is vacuous there).
pub fn chebyshev_bound_rhs(kappa: f64, n: usize, eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(CoreError::invalid(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if n < 2 {
        return Err(CoreError::invalid(format!("sample size must be >= 2, got {n}")));
    }
    if kappa < 1.0 {
        return Err(CoreError::invalid(format!(
            "kurtosis is bounded below by 1, got {kappa}"
        )));
    }
    let nf = n as f64;
    let inner = 1.0 - (kappa / nf - (nf - 3.0) / (nf * (nf - 1.0))) / (eps * eps);
    Ok(inner.max(0.0).powi(2))
}

/// Empirical coverage of the two-sample variance-ratio event: the fraction of
/// independent size-`n` pairs `(s1, s2)` whose ratio `σ²_{s1}/σ²_{s2}` lands
/// in `[(1−ε)/(1+ε), (1+ε)/(1−ε)]`. At the interval's endpoints the squared
/// deviation `(1 − σ²_{s1}/σ²_{s2})²` equals `4ε²/(1+ε)²` and `4ε²/(1−ε)²`
/// respectively. Pairs with `σ²_{s2} = 0` count as violations.
pub fn mc_ratio_coverage(
    dist: &Dist,
    n: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(CoreError::invalid(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if n < 2 {
        return Err(CoreError::invalid(format!("sample size must be >= 2, got {n}")));
    }
    if trials < 1 {
        return Err(CoreError::invalid("at least one trial required"));
    }
    let lo = (1.0 - eps) / (1.0 + eps);
    let hi = (1.0 + eps) / (1.0 - eps);
    let mut rng = seeded_rng(seed);
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut hits = 0usize;
    for _ in 0..trials {
        dist.sample_into(&mut rng, &mut s1);
        dist.sample_into(&mut rng, &mut s2);
        let v1 = sample_variance_unbiased(&s1)?;
        let v2 = sample_variance_unbiased(&s2)?;
        if v2 == 0.0 {
            continue;
        }
        let r = v1 / v2;
        if r >= lo && r <= hi {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Monte-Carlo kurtosis of a distribution over `draws` i.i.d. samples.
pub fn mc_kurtosis(dist: &Dist, draws: usize, seed: u64) -> Result<Option<f64>> {
    if draws < 2 {
        return Err(CoreError::invalid("need at least 2 draws"));
    }
    let mut rng = seeded_rng(seed);
    let mut buf = vec![0.0; draws];
    dist.sample_into(&mut rng, &mut buf);
    Ok(compute_moments(&buf)?.kurtosis)
}

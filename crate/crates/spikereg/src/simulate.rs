//! Monte Carlo engine: samples the generative model, fits the minimum-norm
//! interpolator, and measures the exact conditional risk of each fit.
//!
//! Per-trial seeds are derived from `(master_seed, trial_index)` by a
//! splitmix step, so results are bit-identical for a fixed master seed no
//! matter how trials are scheduled across threads. Reductions accumulate in
//! trial order.

use ndarray::{Array1, Array2, ArrayView1};
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{pinv, singular_value_cutoff, spd_solve, top_eigenvalue_psd};
use crate::model::ProblemSpec;
use crate::theory::RiskDecomposition;

/// One sampled realization of the generative model.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// d x n data matrix, `x = theta * u * w^T + a`.
    pub x: Array2<f64>,
    /// Targets, one per column of `x`.
    pub y: Array1<f64>,
    /// Spike direction (unit vector).
    pub u: Array1<f64>,
    /// Spike loadings, i.i.d. standard normal.
    pub w: Array1<f64>,
    /// Bulk component.
    pub a: Array2<f64>,
    pub beta_star: Array1<f64>,
    pub seed: u64,
}

/// Minimum-norm least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_int: Array1<f64>,
    pub rank_used: usize,
    pub sv_cutoff: f64,
}

/// Monte Carlo estimate of the risk and its four-term decomposition.
#[derive(Debug, Clone)]
pub struct MCEstimate {
    /// Mean excess risk across trials.
    pub mean: f64,
    /// Sample standard deviation of the excess risk divided by sqrt(trials).
    pub stderr: f64,
    pub trials: usize,
    /// Term-wise means.
    pub per_term: RiskDecomposition,
}

/// Options for the sampler and the Monte Carlo driver.
#[derive(Debug, Clone, Default)]
pub struct McOptions {
    /// Hold the spike direction fixed across trials instead of resampling it.
    pub fixed_u: Option<Array1<f64>>,
}

/// Derive the seed for one trial from the master seed. Splitmix64 finalizer
/// over an index-salted state.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn standard_normal_vec(rng: &mut impl Rng, len: usize) -> Array1<f64> {
    Array1::from_iter((0..len).map(|_| StandardNormal.sample(rng)))
}

fn unit_sphere_vec(rng: &mut impl Rng, len: usize) -> Array1<f64> {
    loop {
        let v = standard_normal_vec(rng, len);
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Sample a dataset. The true parameter is `kappa * u` plus a uniformly
/// random direction in the orthogonal complement of `u`, scaled so that
/// `beta^T u = sqrt(align2)` and `||beta||^2 = beta_norm2` hold exactly.
pub fn sample_dataset(spec: &ProblemSpec, seed: u64) -> Result<Dataset> {
    sample_dataset_with(spec, seed, &McOptions::default())
}

pub fn sample_dataset_with(spec: &ProblemSpec, seed: u64, opts: &McOptions) -> Result<Dataset> {
    let (d, n) = spec.require_dims()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let u = match &opts.fixed_u {
        Some(u) => {
            if u.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "fixed u has length {}, expected {d}",
                    u.len()
                )));
            }
            let norm = u.dot(u).sqrt();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidSpec(format!(
                    "fixed u must be a unit vector, got norm {norm}"
                )));
            }
            u.clone()
        }
        None => unit_sphere_vec(&mut rng, d),
    };

    let kappa = spec.align2.sqrt();
    let resid2 = (spec.beta_norm2 - spec.align2).max(0.0);
    let beta_star = if resid2 == 0.0 {
        u.mapv(|x| kappa * x)
    } else {
        // Uniform direction in the orthogonal complement of u.
        let g = standard_normal_vec(&mut rng, d);
        let mut r = &g - &(u.mapv(|x| x * g.dot(&u)));
        let norm = r.dot(&r).sqrt();
        if norm <= 1e-12 {
            return Err(Error::DecompositionFailure(
                "degenerate draw for the orthogonal component".into(),
            ));
        }
        r /= norm;
        u.mapv(|x| kappa * x) + r.mapv(|x| resid2.sqrt() * x)
    };

    let w = standard_normal_vec(&mut rng, n);
    let tau = spec.tau2.sqrt();
    let a = Array2::from_shape_simple_fn((d, n), || {
        let g: f64 = StandardNormal.sample(&mut rng);
        tau * g
    });
    let eps_sd = spec.tau_eps2.sqrt();
    let eps = standard_normal_vec(&mut rng, n).mapv(|g| eps_sd * g);

    let theta = spec.theta2.sqrt();
    // x = theta * u w^T + a, assembled column-wise.
    let mut x = a.clone();
    for (j, mut col) in x.columns_mut().into_iter().enumerate() {
        col.scaled_add(theta * w[j], &u);
    }

    // y_j = alpha_z * z_j^T beta + alpha_a * a_j^T beta + eps_j, where
    // z_j^T beta = theta * w_j * (u^T beta).
    let u_dot_beta = u.dot(&beta_star);
    let a_t_beta = a.t().dot(&beta_star);
    let y = Array1::from_iter((0..n).map(|j| {
        spec.alpha_z * theta * w[j] * u_dot_beta + spec.alpha_a * a_t_beta[j] + eps[j]
    }));

    Ok(Dataset {
        x,
        y,
        u,
        w,
        a,
        beta_star,
        seed,
    })
}

/// Minimum-norm solution of `x^T beta ~ y` (columns of `x` are samples).
///
/// The pseudoinverse is applied through the Gram matrix on the smaller side.
/// A Cholesky solve handles the generic full-rank case and is verified
/// against the normal equations; anything suspicious falls back to an
/// eigendecomposition with singular values below
/// `max(d, n) * eps * sigma_max` treated as zero.
pub fn min_norm_fit(x: &Array2<f64>, y: &Array1<f64>) -> Result<FitResult> {
    let (d, n) = x.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has length {}, expected n = {n}",
            y.len()
        )));
    }
    let scale = x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::InvalidSpec("x must be nonzero".into()));
    }

    if n <= d {
        // Gram side n x n: beta = x G^+ y with G = x^T x.
        let g = x.t().dot(x);
        if let Some(wv) = spd_solve(&g.view(), &y.view()) {
            let resid = (&g.dot(&wv) - y).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            let ynorm = y.dot(y).sqrt().max(f64::MIN_POSITIVE);
            if resid <= 1e-9 * ynorm {
                let sigma_max = top_eigenvalue_psd(&g.view()).sqrt();
                return Ok(FitResult {
                    beta_int: x.dot(&wv),
                    rank_used: n,
                    sv_cutoff: singular_value_cutoff(d, n, sigma_max),
                });
            }
        }
    } else {
        // Gram side d x d: beta = H^+ (x y) with H = x x^T.
        let h = x.dot(&x.t());
        let xy = x.dot(y);
        if let Some(beta) = spd_solve(&h.view(), &xy.view()) {
            let resid = (&h.dot(&beta) - &xy).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            let rhs_norm = xy.dot(&xy).sqrt().max(f64::MIN_POSITIVE);
            if resid <= 1e-9 * rhs_norm {
                let sigma_max = top_eigenvalue_psd(&h.view()).sqrt();
                return Ok(FitResult {
                    beta_int: beta,
                    rank_used: d,
                    sv_cutoff: singular_value_cutoff(d, n, sigma_max),
                });
            }
        }
    }
    // Rank-deficient or ill-conditioned input: decompose x itself, where the
    // singular-value cutoff is meaningful (the Gram eigenvalues square the
    // noise floor).
    let (p, rank, cutoff) = pinv(&x.view())?;
    Ok(FitResult {
        beta_int: p.t().dot(y),
        rank_used: rank,
        sv_cutoff: cutoff,
    })
}

/// Exact conditional risk of a fitted parameter: the expectation of the
/// squared test error over the test point and test label noise, given
/// `beta_int` and the realization's spike direction and true parameter.
pub fn conditional_risk(
    beta_int: &ArrayView1<f64>,
    beta_star: &ArrayView1<f64>,
    u: &ArrayView1<f64>,
    spec: &ProblemSpec,
) -> Result<RiskDecomposition> {
    let d = beta_int.len();
    if beta_star.len() != d || u.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "beta_int/beta_star/u lengths {d}/{}/{} differ",
            beta_star.len(),
            u.len()
        )));
    }
    let discrepancy = spec.alpha_z_test * beta_star.dot(u) - beta_int.dot(u);
    let bias = spec.theta2_test * discrepancy * discrepancy;
    let variance = spec.tau2_test * beta_int.dot(beta_int);
    let data_noise = spec.alpha_a_test * spec.alpha_a_test * spec.tau2_test * beta_star.dot(beta_star);
    let alignment = -2.0 * spec.alpha_a_test * spec.tau2_test * beta_star.dot(beta_int);
    Ok(RiskDecomposition::from_terms(
        bias,
        variance,
        data_noise,
        alignment,
        spec.tau_eps2_test,
    ))
}

/// Squared-error average over freshly sampled test points; used to validate
/// the conditional-risk formulas themselves. Returns `(mean, stderr)` of the
/// total risk.
pub fn sampled_test_risk(
    beta_int: &ArrayView1<f64>,
    beta_star: &ArrayView1<f64>,
    u: &ArrayView1<f64>,
    spec: &ProblemSpec,
    n_test: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_test < 2 {
        return Err(Error::InvalidSpec("need at least two test points".into()));
    }
    let d = beta_int.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_t = spec.theta2_test.sqrt();
    let tau_t = spec.tau2_test.sqrt();
    let eps_t = spec.tau_eps2_test.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_test {
        let w: f64 = StandardNormal.sample(&mut rng);
        let a_tilde = standard_normal_vec(&mut rng, d).mapv(|g| tau_t * g);
        let eps: f64 = {
            let g: f64 = StandardNormal.sample(&mut rng);
            eps_t * g
        };
        let z_dot_beta = theta_t * w * u.dot(beta_star);
        let y = spec.alpha_z_test * z_dot_beta + spec.alpha_a_test * a_tilde.dot(beta_star) + eps;
        let pred = theta_t * w * u.dot(beta_int) + a_tilde.dot(beta_int);
        let err = (y - pred) * (y - pred);
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / n_test as f64;
    let var = (sum_sq - sum * sum / n_test as f64) / (n_test as f64 - 1.0);
    Ok((mean, (var.max(0.0) / n_test as f64).sqrt()))
}

/// Run one trial: sample, fit, and evaluate the conditional risk.
pub fn run_trial(spec: &ProblemSpec, seed: u64, opts: &McOptions) -> Result<RiskDecomposition> {
    let data = sample_dataset_with(spec, seed, opts)?;
    let fit = min_norm_fit(&data.x, &data.y)?;
    conditional_risk(
        &fit.beta_int.view(),
        &data.beta_star.view(),
        &data.u.view(),
        spec,
    )
}

pub fn monte_carlo_risk(spec: &ProblemSpec, trials: usize, master_seed: u64) -> Result<MCEstimate> {
    monte_carlo_risk_with(spec, trials, master_seed, &McOptions::default())
}

/// Parallel Monte Carlo over independent trials. Trials are independent and
/// scheduled on the rayon pool; the reduction runs in trial order so the
/// output is bit-identical for a fixed master seed at any thread count.
pub fn monte_carlo_risk_with(
    spec: &ProblemSpec,
    trials: usize,
    master_seed: u64,
    opts: &McOptions,
) -> Result<MCEstimate> {
    if trials < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least 2 trials for a standard error, got {trials}"
        )));
    }
    spec.require_dims()?;
    let results: Vec<RiskDecomposition> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(spec, derive_seed(master_seed, i as u64), opts))
        .collect::<Result<Vec<_>>>()?;

    let inv = 1.0 / trials as f64;
    let mut mean = 0.0;
    let mut bias = 0.0;
    let mut variance = 0.0;
    let mut data_noise = 0.0;
    let mut alignment = 0.0;
    for r in &results {
        mean += r.excess;
        bias += r.bias;
        variance += r.variance;
        data_noise += r.data_noise;
        alignment += r.target_alignment;
    }
    mean *= inv;
    bias *= inv;
    variance *= inv;
    data_noise *= inv;
    alignment *= inv;

    let mut ss = 0.0;
    for r in &results {
        let delta = r.excess - mean;
        ss += delta * delta;
    }
    let stderr = (ss / (trials as f64 - 1.0) / trials as f64).sqrt();

    Ok(MCEstimate {
        mean,
        stderr,
        trials,
        per_term: RiskDecomposition::from_terms(
            bias,
            variance,
            data_noise,
            alignment,
            spec.tau_eps2_test,
        ),
    })
}

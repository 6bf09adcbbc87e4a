//! Executable checks of the random-matrix machinery: the rank-one
//! pseudoinverse update and the concentration of its building blocks.
//!
//! This module alone works in the downscaled convention in which the bulk
//! has entries of variance `rho2 / d` and the spike is `eta * u * v^T` with
//! fixed unit vectors `u`, `v`. The bridge from a [`ProblemSpec`] is
//! `rho2 = tau2` and `eta2 = theta2 * n / d`, i.e. `theta2 = (d/n) * eta2`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{pinv, spd_solve, spectral_norm};
use crate::model::{Branch, ProblemSpec};
use crate::simulate::{derive_seed, sample_dataset};

/// Helper vectors and scalars of the rank-one pseudoinverse update for
/// `eta * u * v^T + A`.
///
/// `h` and `s` live on the `d` side, `k` and `t` on the `n` side; `t`
/// vanishes identically for d > n and `s` for d < n.
#[derive(Debug, Clone)]
pub struct HelperQuantities {
    /// Row `v^T A^+`, stored as a d-vector.
    pub h: Array1<f64>,
    /// `A^+ u`, an n-vector.
    pub k: Array1<f64>,
    /// Row `v^T (I - A^+ A)`, an n-vector.
    pub t: Array1<f64>,
    /// `(I - A A^+) u`, a d-vector.
    pub s: Array1<f64>,
    /// `1 + eta * v^T A^+ u`.
    pub xi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl HelperQuantities {
    pub fn compute(eta: f64, u: &ArrayView1<f64>, v: &ArrayView1<f64>, a: &ArrayView2<f64>, a_pinv: &ArrayView2<f64>) -> Self {
        let k = a_pinv.dot(u);
        let h = a_pinv.t().dot(v);
        let t = v - &a_pinv.dot(&a.dot(v));
        let s = u - &a.dot(&k);
        let xi = 1.0 + eta * v.dot(&k);
        let t2 = t.dot(&t);
        let k2 = k.dot(&k);
        let s2 = s.dot(&s);
        let h2 = h.dot(&h);
        HelperQuantities {
            h,
            k,
            t,
            s,
            xi,
            gamma1: eta * eta * t2 * k2 + xi * xi,
            gamma2: eta * eta * s2 * h2 + xi * xi,
        }
    }
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((col.len(), row.len()));
    for (i, &ci) in col.iter().enumerate() {
        if ci != 0.0 {
            out.row_mut(i).assign(&row.mapv(|r| ci * r));
        }
    }
    out
}

fn check_unit(name: &str, v: &ArrayView1<f64>) -> Result<()> {
    let norm = v.dot(v).sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidSpec(format!(
            "{name} must be a unit vector, got norm {norm}"
        )));
    }
    Ok(())
}

/// Pseudoinverse of the rank-one update `eta * u * v^T + A`, assembled from
/// the pseudoinverse of `A` and the helper quantities instead of a fresh
/// decomposition. Returns the n x d pseudoinverse.
pub fn meyer_pseudoinverse(
    eta: f64,
    u: &ArrayView1<f64>,
    v: &ArrayView1<f64>,
    a: &ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let (d, n) = a.dim();
    if u.len() != d || v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "u/v lengths {}/{} do not match a of shape {d} x {n}",
            u.len(),
            v.len()
        )));
    }
    check_unit("u", u)?;
    check_unit("v", v)?;
    // Rejects d == n alongside the aspect-ratio guard band.
    let branch = Branch::from_aspect_ratio(d as f64 / n as f64)?;

    let (a_pinv, rank, _) = pinv(a)?;
    if rank < d.min(n) {
        return Err(Error::RankDeficient(format!(
            "a has rank {rank} < {}",
            d.min(n)
        )));
    }
    let hq = HelperQuantities::compute(eta, u, v, a, &a_pinv.view());
    let xi_scale = 1.0 + eta.abs() * hq.k.dot(&hq.k).sqrt();
    if hq.xi.abs() <= 1e-10 * xi_scale {
        return Err(Error::DegenerateXi {
            xi: hq.xi,
            scale: xi_scale,
        });
    }

    let result = match branch {
        Branch::Under => {
            // d < n: correction built from t and k.
            let k2 = hq.k.dot(&hq.k);
            let t2 = hq.t.dot(&hq.t);
            let ka = a_pinv.t().dot(&hq.k);
            let p1 = hq.t.mapv(|x| -eta * eta * k2 / hq.xi * x) - &hq.k.mapv(|x| eta * x);
            let q1 = ka.mapv(|x| -eta * t2 / hq.xi * x) - &hq.h;
            let mut out = a_pinv.clone();
            out += &outer(&hq.t, &ka).mapv(|x| eta / hq.xi * x);
            out -= &outer(&p1, &q1).mapv(|x| hq.xi / hq.gamma1 * x);
            out
        }
        Branch::Over => {
            // d > n: correction built from s and h.
            let s2 = hq.s.dot(&hq.s);
            let h2 = hq.h.dot(&hq.h);
            let ah = a_pinv.dot(&hq.h);
            let p2 = ah.mapv(|x| -eta * eta * s2 / hq.xi * x) - &hq.k.mapv(|x| eta * x);
            let q2 = hq.s.mapv(|x| -eta * h2 / hq.xi * x) - &hq.h;
            let mut out = a_pinv;
            out += &outer(&ah, &hq.s).mapv(|x| eta / hq.xi * x);
            out -= &outer(&p2, &q2).mapv(|x| hq.xi / hq.gamma2 * x);
            out
        }
    };
    Ok(result)
}

/// Sample mean and standard error of one scalar statistic, with the
/// concentration target where one exists.
#[derive(Debug, Clone, Copy)]
pub struct BlockStat {
    pub mean: f64,
    pub stderr: f64,
    pub expected: Option<f64>,
}

fn block_stat(samples: &[f64], expected: Option<f64>) -> BlockStat {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    BlockStat {
        mean,
        stderr: (var / n).sqrt(),
        expected,
    }
}

/// Monte Carlo means of the squared helper norms and of `xi / eta`.
#[derive(Debug, Clone)]
pub struct BuildingBlocks {
    pub h2: BlockStat,
    pub k2: BlockStat,
    pub s2: BlockStat,
    pub t2: BlockStat,
    pub xi_over_eta: BlockStat,
    pub xi_over_eta_sq: BlockStat,
    pub c: f64,
    pub eta: f64,
    pub rho2: f64,
    pub d: usize,
    pub n: usize,
    pub trials: usize,
}

struct BlockSample {
    h2: f64,
    k2: f64,
    s2: f64,
    t2: f64,
    xi_over_eta: f64,
}

/// One downscaled draw: `A` with entries N(0, rho2/d), helpers computed via
/// Gram solves against fixed unit vectors `u`, `v`.
fn sample_blocks(
    d: usize,
    n: usize,
    rho2: f64,
    eta: f64,
    u: &Array1<f64>,
    v: &Array1<f64>,
    seed: u64,
) -> Result<BlockSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (rho2 / d as f64).sqrt();
    let a = Array2::from_shape_simple_fn((d, n), || {
        let g: f64 = StandardNormal.sample(&mut rng);
        sd * g
    });
    let (k, h, s, t) = if d > n {
        let g = a.t().dot(&a);
        let atu = a.t().dot(u);
        let k = spd_solve(&g.view(), &atu.view())
            .ok_or_else(|| Error::DecompositionFailure("gram cholesky".into()))?;
        let gv = spd_solve(&g.view(), &v.view())
            .ok_or_else(|| Error::DecompositionFailure("gram cholesky".into()))?;
        let h = a.dot(&gv);
        let s = u - &a.dot(&k);
        let t = Array1::zeros(n);
        (k, h, s, t)
    } else {
        let hmat = a.dot(&a.t());
        let hu = spd_solve(&hmat.view(), &u.view())
            .ok_or_else(|| Error::DecompositionFailure("gram cholesky".into()))?;
        let k = a.t().dot(&hu);
        let av = a.dot(v);
        let hav = spd_solve(&hmat.view(), &av.view())
            .ok_or_else(|| Error::DecompositionFailure("gram cholesky".into()))?;
        let h = hav.clone();
        let t = v - &a.t().dot(&hav);
        let s = Array1::zeros(d);
        (k, h, s, t)
    };
    let xi = 1.0 + eta * v.dot(&k);
    Ok(BlockSample {
        h2: h.dot(&h),
        k2: k.dot(&k),
        s2: s.dot(&s),
        t2: t.dot(&t),
        xi_over_eta: xi / eta,
    })
}

/// Expected squared norms in the downscaled convention.
pub fn expected_blocks(c: f64, rho2: f64, eta: f64, d: usize, n: usize) -> [Option<f64>; 6] {
    let h2 = if c < 1.0 {
        c * c / ((1.0 - c) * rho2)
    } else {
        c / ((c - 1.0) * rho2)
    };
    // The k mean for c > 1 follows from the same spectral integral as the
    // c < 1 display.
    let k2 = if c < 1.0 {
        c / ((1.0 - c) * rho2)
    } else {
        1.0 / ((c - 1.0) * rho2)
    };
    let s2 = if c > 1.0 { 1.0 - 1.0 / c } else { 0.0 };
    let t2 = if c < 1.0 { 1.0 - c } else { 0.0 };
    let xi_sq = 1.0 / (eta * eta) + c / (d.max(n) as f64 * rho2 * (1.0 - c).abs());
    [
        Some(h2),
        Some(k2),
        Some(s2),
        Some(t2),
        Some(1.0 / eta),
        Some(xi_sq),
    ]
}

/// Estimate the building-block means by Monte Carlo in the downscaled
/// convention derived from `spec`.
pub fn estimate_building_blocks(
    spec: &ProblemSpec,
    trials: usize,
    seed: u64,
) -> Result<BuildingBlocks> {
    let (d, n) = spec.require_dims()?;
    if trials < 2 {
        return Err(Error::InvalidSpec("need at least 2 trials".into()));
    }
    let c = spec.c;
    Branch::from_aspect_ratio(c)?;
    let rho2 = spec.tau2;
    let eta2 = spec.theta2 / c;
    if eta2 <= 0.0 {
        return Err(Error::InvalidSpec(
            "building-block estimation needs a positive spike variance".into(),
        ));
    }
    let eta = eta2.sqrt();

    // u and v are fixed across trials, as the concentration statements
    // require.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let u = unit_vec(&mut rng, d);
    let v = unit_vec(&mut rng, n);

    let samples: Vec<BlockSample> = (0..trials)
        .into_par_iter()
        .map(|i| sample_blocks(d, n, rho2, eta, &u, &v, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let expected = expected_blocks(c, rho2, eta, d, n);
    let collect = |f: &dyn Fn(&BlockSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    Ok(BuildingBlocks {
        h2: block_stat(&collect(&|s| s.h2), expected[0]),
        k2: block_stat(&collect(&|s| s.k2), expected[1]),
        s2: block_stat(&collect(&|s| s.s2), expected[2]),
        t2: block_stat(&collect(&|s| s.t2), expected[3]),
        xi_over_eta: block_stat(&collect(&|s| s.xi_over_eta), expected[4]),
        xi_over_eta_sq: block_stat(
            &collect(&|s| s.xi_over_eta * s.xi_over_eta),
            expected[5],
        ),
        c,
        eta,
        rho2,
        d,
        n,
        trials,
    })
}

fn unit_vec(rng: &mut impl rand::Rng, len: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_iter((0..len).map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            g
        }));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Outcome of the spectral-edge probe.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumReport {
    /// Largest singular value of a freshly sampled bulk at the same spec.
    pub edge_top: f64,
    /// Largest singular value of the spiked data matrix.
    pub top_singular_value: f64,
    /// Whether the spiked top value exceeds the bulk edge by a 5% margin.
    pub outlier_present: bool,
}

/// Compare the top singular value of a sampled data matrix against the bulk
/// edge estimated from an independently sampled bulk-only matrix.
pub fn spectrum_check(spec: &ProblemSpec, seed: u64) -> Result<SpectrumReport> {
    let (d, n) = spec.require_dims()?;
    let data = sample_dataset(spec, seed)?;
    let top = spectral_norm(&data.x.view());

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5EED_B01C));
    let tau = spec.tau2.sqrt();
    let fresh = Array2::from_shape_simple_fn((d, n), || {
        let g: f64 = StandardNormal.sample(&mut rng);
        tau * g
    });
    let edge = spectral_norm(&fresh.view());
    Ok(SpectrumReport {
        edge_top: edge,
        top_singular_value: top,
        outlier_present: top > 1.05 * edge,
    })
}

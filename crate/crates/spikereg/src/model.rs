//! Parameter types for the spiked-covariance regression model.
//!
//! The data matrix is `X = Z + A` with a rank-one signal `Z = theta * u * w^T`
//! and an isotropic bulk `A` whose entries have variance `tau2`. Targets are
//! `y_i = alpha_z * z_i^T beta_star + alpha_a * a_i^T beta_star + eps_i`, so
//! `alpha_z != alpha_a` makes the target a non-linear (misspecified) function
//! of `x_i = z_i + a_i`. Test-side parameters carry a `_test` suffix and
//! default to the train-side values.
//!
//! All spike/bulk/noise parameters are stored as variances (squared
//! quantities), never as standard deviations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the refused interval around the aspect ratio c = 1, where
/// the closed forms have 1/(1-c) and 1/(c-1) poles.
pub const GUARD_BAND_DELTA: f64 = 1e-3;

/// How the spike variance `theta2` is tied to the bulk variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScalingRegime {
    /// `theta2 = gamma * tau2`; the spike competes with the bulk spectral
    /// edge, with the BBP transition at `gamma = (1 + sqrt(c))^2`.
    OperatorNorm { gamma: f64 },
    /// `theta2 = d * tau2`; signal and bulk match in expected Frobenius norm.
    /// Requires `d` to resolve.
    FrobeniusNorm,
    /// `theta2` given directly.
    Explicit { theta2: f64 },
}

impl ScalingRegime {
    pub fn resolve_theta2(&self, tau2: f64, d: Option<usize>) -> Result<f64> {
        match *self {
            ScalingRegime::OperatorNorm { gamma } => {
                if !gamma.is_finite() || gamma < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "operator-norm scaling needs gamma >= 0, got {gamma}"
                    )));
                }
                Ok(gamma * tau2)
            }
            ScalingRegime::FrobeniusNorm => match d {
                Some(d) => Ok(d as f64 * tau2),
                None => Err(Error::InvalidSpec(
                    "Frobenius-norm scaling requires d".into(),
                )),
            },
            ScalingRegime::Explicit { theta2 } => {
                if !theta2.is_finite() || theta2 < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "theta2 must be a nonnegative real, got {theta2}"
                    )));
                }
                Ok(theta2)
            }
        }
    }
}

/// Which side of the interpolation threshold c = 1 a spec lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Underparameterized, c < 1.
    Under,
    /// Overparameterized, c > 1.
    Over,
}

impl Branch {
    /// Classify an aspect ratio, refusing the guard band around c = 1.
    pub fn from_aspect_ratio(c: f64) -> Result<Branch> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "aspect ratio c must be a positive real, got {c}"
            )));
        }
        if (c - 1.0).abs() < GUARD_BAND_DELTA {
            return Err(Error::GuardBand {
                c,
                delta: GUARD_BAND_DELTA,
            });
        }
        Ok(if c < 1.0 { Branch::Under } else { Branch::Over })
    }

    pub fn matches(self, c: f64) -> bool {
        match self {
            Branch::Under => c < 1.0,
            Branch::Over => c > 1.0,
        }
    }
}

/// A fully resolved model specification.
///
/// `c` is always set; `d` and `n` are present together or not at all
/// (asymptotic mode). `theta2` has been resolved from the scaling regime,
/// which is retained for evaluators that dispatch on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub c: f64,
    pub theta2: f64,
    pub tau2: f64,
    pub tau_eps2: f64,
    pub theta2_test: f64,
    pub tau2_test: f64,
    pub tau_eps2_test: f64,
    pub alpha_z: f64,
    pub alpha_a: f64,
    pub alpha_z_test: f64,
    pub alpha_a_test: f64,
    pub beta_norm2: f64,
    pub align2: f64,
    pub scaling: ScalingRegime,
}

impl ProblemSpec {
    /// Spike-to-bulk variance ratio `theta2 / tau2`.
    pub fn gamma(&self) -> f64 {
        self.theta2 / self.tau2
    }

    /// Delta_c = alpha_z - alpha_a / c.
    pub fn delta_c(&self) -> f64 {
        self.alpha_z - self.alpha_a / self.c
    }

    /// Delta_1 = alpha_z - alpha_a.
    pub fn delta_1(&self) -> f64 {
        self.alpha_z - self.alpha_a
    }

    pub fn is_well_specified(&self) -> bool {
        self.alpha_z == self.alpha_a
            && self.alpha_z == self.alpha_z_test
            && self.alpha_a == self.alpha_a_test
    }

    pub fn has_alpha_shift(&self) -> bool {
        self.alpha_z != self.alpha_z_test || self.alpha_a != self.alpha_a_test
    }

    pub fn has_covariance_shift(&self) -> bool {
        self.theta2 != self.theta2_test || self.tau2 != self.tau2_test
    }

    pub fn branch(&self) -> Result<Branch> {
        Branch::from_aspect_ratio(self.c)
    }

    pub fn require_dims(&self) -> Result<(usize, usize)> {
        match (self.d, self.n) {
            (Some(d), Some(n)) => Ok((d, n)),
            _ => Err(Error::MissingDimension),
        }
    }

    /// Return a copy with a different alignment (used to probe the affine
    /// dependence of the risk on `align2`).
    pub fn with_align2(&self, align2: f64) -> ProblemSpec {
        ProblemSpec {
            align2,
            ..self.clone()
        }
    }
}

/// Re-validate and re-derive a resolved spec. Idempotent: feeding the output
/// back in reproduces it exactly.
pub fn resolve_spec(spec: &ProblemSpec) -> Result<ProblemSpec> {
    let (scaling, gamma, theta2) = match spec.scaling {
        ScalingRegime::OperatorNorm { gamma } => (Some("operator".into()), Some(gamma), None),
        ScalingRegime::FrobeniusNorm => (Some("frobenius".into()), None, None),
        ScalingRegime::Explicit { theta2 } => (Some("explicit".into()), None, Some(theta2)),
    };
    let params = SpecParams {
        d: spec.d,
        n: spec.n,
        c: if spec.d.is_some() { None } else { Some(spec.c) },
        scaling,
        gamma,
        theta2,
        tau2: Some(spec.tau2),
        tau_eps2: Some(spec.tau_eps2),
        theta2_test: Some(spec.theta2_test),
        tau2_test: Some(spec.tau2_test),
        tau_eps2_test: Some(spec.tau_eps2_test),
        alpha: None,
        alpha_z: Some(spec.alpha_z),
        alpha_a: Some(spec.alpha_a),
        alpha_z_test: Some(spec.alpha_z_test),
        alpha_a_test: Some(spec.alpha_a_test),
        beta_norm2: Some(spec.beta_norm2),
        align2: Some(spec.align2),
    };
    params.resolve()
}

/// Raw, partially specified parameters as read from a config file or CLI
/// flags. `resolve` turns this into a concrete [`ProblemSpec`].
///
/// The scaling regime is flattened into `scaling` ("operator" | "frobenius" |
/// "explicit") plus `gamma` / `theta2`. With `scaling` omitted, `gamma` alone
/// implies operator scaling and `theta2` alone explicit scaling; neither
/// means no spike (`theta2 = 0`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecParams {
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub scaling: Option<String>,
    pub gamma: Option<f64>,
    pub theta2: Option<f64>,
    pub tau2: Option<f64>,
    pub tau_eps2: Option<f64>,
    pub theta2_test: Option<f64>,
    pub tau2_test: Option<f64>,
    pub tau_eps2_test: Option<f64>,
    /// Convenience: sets every `alpha_*` not given individually.
    pub alpha: Option<f64>,
    pub alpha_z: Option<f64>,
    pub alpha_a: Option<f64>,
    pub alpha_z_test: Option<f64>,
    pub alpha_a_test: Option<f64>,
    pub beta_norm2: Option<f64>,
    pub align2: Option<f64>,
}

impl SpecParams {
    pub fn scaling_regime(&self) -> Result<ScalingRegime> {
        let pick_operator = || -> Result<ScalingRegime> {
            match self.gamma {
                Some(gamma) => Ok(ScalingRegime::OperatorNorm { gamma }),
                None => Err(Error::InvalidSpec(
                    "operator-norm scaling requires gamma".into(),
                )),
            }
        };
        let pick_explicit = || -> Result<ScalingRegime> {
            match self.theta2 {
                Some(theta2) => Ok(ScalingRegime::Explicit { theta2 }),
                None => Err(Error::InvalidSpec(
                    "explicit scaling requires theta2".into(),
                )),
            }
        };
        if self.gamma.is_some() && self.theta2.is_some() {
            return Err(Error::InvalidSpec(
                "gamma and theta2 are mutually exclusive".into(),
            ));
        }
        match self.scaling.as_deref() {
            Some("operator") => pick_operator(),
            Some("frobenius") => {
                if self.gamma.is_some() || self.theta2.is_some() {
                    return Err(Error::InvalidSpec(
                        "Frobenius scaling does not take gamma or theta2".into(),
                    ));
                }
                Ok(ScalingRegime::FrobeniusNorm)
            }
            Some("explicit") => pick_explicit(),
            Some(other) => Err(Error::InvalidSpec(format!(
                "unknown scaling \"{other}\" (expected operator|frobenius|explicit)"
            ))),
            None => {
                if self.gamma.is_some() {
                    pick_operator()
                } else if self.theta2.is_some() {
                    pick_explicit()
                } else {
                    Ok(ScalingRegime::Explicit { theta2: 0.0 })
                }
            }
        }
    }

    pub fn resolve(&self) -> Result<ProblemSpec> {
        let (d, n, c) = resolve_dims(self.d, self.n, self.c)?;

        let tau2 = self.tau2.unwrap_or(1.0);
        if !tau2.is_finite() || tau2 <= 0.0 {
            return Err(Error::InvalidSpec(format!("tau2 must be > 0, got {tau2}")));
        }
        let tau_eps2 = nonneg("tau_eps2", self.tau_eps2.unwrap_or(0.0))?;

        let scaling = self.scaling_regime()?;
        let theta2 = scaling.resolve_theta2(tau2, d)?;

        let theta2_test = nonneg("theta2_test", self.theta2_test.unwrap_or(theta2))?;
        let tau2_test = self.tau2_test.unwrap_or(tau2);
        if !tau2_test.is_finite() || tau2_test <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "tau2_test must be > 0, got {tau2_test}"
            )));
        }
        let tau_eps2_test = nonneg("tau_eps2_test", self.tau_eps2_test.unwrap_or(tau_eps2))?;

        let alpha_z = self.alpha_z.or(self.alpha).unwrap_or(1.0);
        let alpha_a = self.alpha_a.or(self.alpha).unwrap_or(1.0);
        let alpha_z_test = self.alpha_z_test.or(self.alpha).unwrap_or(alpha_z);
        let alpha_a_test = self.alpha_a_test.or(self.alpha).unwrap_or(alpha_a);
        for (name, v) in [
            ("alpha_z", alpha_z),
            ("alpha_a", alpha_a),
            ("alpha_z_test", alpha_z_test),
            ("alpha_a_test", alpha_a_test),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} must be finite, got {v}")));
            }
        }

        let beta_norm2 = self.beta_norm2.unwrap_or(1.0);
        if !beta_norm2.is_finite() || beta_norm2 <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "beta_norm2 must be > 0, got {beta_norm2}"
            )));
        }
        let align2 = self.align2.unwrap_or(0.0);
        if !align2.is_finite() || align2 < 0.0 || align2 > beta_norm2 {
            return Err(Error::InvalidSpec(format!(
                "align2 = {align2} violates 0 <= align2 <= beta_norm2 = {beta_norm2} \
                 (Cauchy-Schwarz on beta^T u)"
            )));
        }

        Ok(ProblemSpec {
            d,
            n,
            c,
            theta2,
            tau2,
            tau_eps2,
            theta2_test,
            tau2_test,
            tau_eps2_test,
            alpha_z,
            alpha_a,
            alpha_z_test,
            alpha_a_test,
            beta_norm2,
            align2,
            scaling,
        })
    }
}

fn nonneg(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidSpec(format!("{name} must be >= 0, got {v}")));
    }
    Ok(v)
}

/// Derive (d, n, c) from whichever subset was given. With both d and n, c is
/// d/n exactly. With c plus one of d or n, the other dimension is rounded to
/// the nearest integer and c recomputed so that c = d/n holds exactly. With
/// only c, the spec is in asymptotic mode.
fn resolve_dims(d: Option<usize>, n: Option<usize>, c: Option<f64>) -> Result<(Option<usize>, Option<usize>, f64)> {
    match (d, n, c) {
        (Some(d), Some(n), c_opt) => {
            if d == 0 || n == 0 {
                return Err(Error::InvalidSpec("d and n must be positive".into()));
            }
            let c = d as f64 / n as f64;
            if let Some(c_given) = c_opt {
                if (c_given - c).abs() > 1e-9 * c.max(1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "c = {c_given} conflicts with d/n = {c}"
                    )));
                }
            }
            Ok((Some(d), Some(n), c))
        }
        (Some(d), None, Some(c)) => {
            check_c(c)?;
            let n = (d as f64 / c).round().max(1.0) as usize;
            Ok((Some(d), Some(n), d as f64 / n as f64))
        }
        (None, Some(n), Some(c)) => {
            check_c(c)?;
            let d = (n as f64 * c).round().max(1.0) as usize;
            Ok((Some(d), Some(n), d as f64 / n as f64))
        }
        (None, None, Some(c)) => {
            check_c(c)?;
            Ok((None, None, c))
        }
        (Some(_), None, None) | (None, Some(_), None) => Err(Error::InvalidSpec(
            "need both d and n, or c alongside one of them".into(),
        )),
        (None, None, None) => Err(Error::InvalidSpec(
            "no dimensions given: supply (d, n) or c".into(),
        )),
    }
}

fn check_c(c: f64) -> Result<()> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "aspect ratio c must be a positive real, got {c}"
        )));
    }
    Ok(())
}

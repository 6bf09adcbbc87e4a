//! Closed-form risk evaluators.
//!
//! Two independent transcriptions of the same quantities are kept side by
//! side and cross-checked in the tests: the general four-term decomposition
//! ([`risk_general`]) and the specialized two-branch formulas
//! ([`risk_well_specified`], [`risk_misspecified`], [`risk_spike_recovery`]).
//! Transcription slips in long rational expressions are the dominant risk
//! here, so neither route is trusted alone.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Branch, ProblemSpec, ScalingRegime};
use crate::theory::MisspecIntermediates;

/// Four-term split of the generalization risk.
///
/// The terms sum to the excess risk; `total` adds the irreducible test label
/// noise once, so `excess = total - tau_eps2_test` holds exactly by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskDecomposition {
    pub bias: f64,
    pub variance: f64,
    pub data_noise: f64,
    /// Cross-term between the fitted and true parameter through the bulk;
    /// the only term that may be negative.
    pub target_alignment: f64,
    pub total: f64,
    pub excess: f64,
}

impl RiskDecomposition {
    pub fn from_terms(
        bias: f64,
        variance: f64,
        data_noise: f64,
        target_alignment: f64,
        tau_eps2_test: f64,
    ) -> Self {
        let excess = bias + variance + data_noise + target_alignment;
        RiskDecomposition {
            bias,
            variance,
            data_noise,
            target_alignment,
            total: excess + tau_eps2_test,
            excess,
        }
    }
}

fn check_branch(spec: &ProblemSpec, branch: Branch) -> Result<()> {
    let derived = Branch::from_aspect_ratio(spec.c)?;
    if derived != branch {
        return Err(Error::InvalidSpec(format!(
            "branch {branch:?} does not match aspect ratio c = {}",
            spec.c
        )));
    }
    Ok(())
}

/// General four-term risk at a concrete spike variance.
///
/// With `finite_d` the explicit 1/d correction terms are kept (requires `d`);
/// without it every term carrying a 1/d factor is dropped, leaving the
/// proportional-limit value at fixed aspect ratio.
pub fn risk_general(spec: &ProblemSpec, branch: Branch, finite_d: bool) -> Result<RiskDecomposition> {
    check_branch(spec, branch)?;
    let inv_d = if finite_d {
        match spec.d {
            Some(d) => 1.0 / d as f64,
            None => return Err(Error::MissingDimension),
        }
    } else {
        0.0
    };

    let c = spec.c;
    let th2 = spec.theta2;
    let t2 = spec.tau2;
    let te2 = spec.tau_eps2;
    let th2_t = spec.theta2_test;
    let t2_t = spec.tau2_test;
    let az = spec.alpha_z;
    let aa = spec.alpha_a;
    let az_t = spec.alpha_z_test;
    let aa_t = spec.alpha_a_test;
    let b2 = spec.beta_norm2;
    let a2 = spec.align2;

    let (bias, variance, target_alignment) = match branch {
        Branch::Under => {
            // Denominator theta^2 + tau^2 appears throughout the c < 1 branch.
            let den = th2 + t2;
            let d1 = az - aa;
            let bias = th2_t
                * (((az_t - az) + t2 / den * d1).powi(2) * a2
                    + inv_d * te2 * (c / (1.0 - c)) / den);
            let variance = t2_t
                * (aa * aa * b2
                    + a2 * (d1 * d1 * (th2 * (th2 + c * t2) / (den * den)) / (1.0 - c)
                        + 2.0 * aa * d1 * (th2 / den))
                    + te2
                        * ((c / (1.0 - c)) / t2
                            - inv_d * (th2 / (t2 * den)) * (c / (1.0 - c))));
            let alignment =
                -2.0 * aa_t * t2_t * (aa * b2 + d1 * a2 * (th2 / den));
            (bias, variance, alignment)
        }
        Branch::Over => {
            // Denominator theta^2 + c tau^2 appears throughout the c > 1 branch.
            let den = th2 + c * t2;
            let dc = az - aa / c;
            let bias = th2_t
                * (a2 * ((az_t - az) + (c * t2 / den) * dc).powi(2)
                    + inv_d
                        * (aa * aa * b2 * ((c - 1.0) / c) * (c * th2 * t2 / (den * den))
                            + te2 / (c - 1.0) * (c * c * (th2 + t2) / (den * den))));
            let variance = t2_t
                * (b2 * (aa * aa / c - inv_d * aa * aa * (th2 / den))
                    + a2 * (c / (c - 1.0)) * (th2 / den) * dc * dc
                    + te2 * ((1.0 / (c - 1.0)) / t2 - inv_d * (th2 / (t2 * den)) * (c / (c - 1.0))));
            let alignment = -2.0
                * aa_t
                * t2_t
                * ((aa / c) * b2 - inv_d * aa * (th2 / den) * b2 + dc * (th2 / den) * a2);
            (bias, variance, alignment)
        }
    };
    let data_noise = aa_t * aa_t * t2_t * b2;

    Ok(RiskDecomposition::from_terms(
        bias,
        variance,
        data_noise,
        target_alignment,
        spec.tau_eps2_test,
    ))
}

/// Proportional-limit decomposition under Frobenius scaling, where the spike
/// variance grows like d and the spike-to-bulk ratios saturate. Computable
/// without a concrete d. When the target's spike weight shifts between train
/// and test, the bias diverges and the decomposition reports infinity.
pub fn risk_frobenius_limit(spec: &ProblemSpec, branch: Branch) -> Result<RiskDecomposition> {
    if spec.scaling != ScalingRegime::FrobeniusNorm {
        return Err(Error::SpecMismatch(
            "Frobenius-limit evaluation requires Frobenius scaling".into(),
        ));
    }
    check_branch(spec, branch)?;

    let c = spec.c;
    let t2 = spec.tau2;
    let te2 = spec.tau_eps2;
    let t2_t = spec.tau2_test;
    let az = spec.alpha_z;
    let aa = spec.alpha_a;
    let az_t = spec.alpha_z_test;
    let aa_t = spec.alpha_a_test;
    let b2 = spec.beta_norm2;
    let a2 = spec.align2;

    let bias = if az_t != az && a2 > 0.0 { f64::INFINITY } else { 0.0 };
    let (variance, alignment) = match branch {
        Branch::Under => {
            let d1 = az - aa;
            let variance = t2_t
                * (aa * aa * b2
                    + a2 * (d1 * d1 / (1.0 - c) + 2.0 * aa * d1)
                    + te2 * (c / (1.0 - c)) / t2);
            let alignment = -2.0 * aa_t * t2_t * (aa * b2 + d1 * a2);
            (variance, alignment)
        }
        Branch::Over => {
            let dc = az - aa / c;
            let variance = t2_t
                * (aa * aa * b2 / c + a2 * (c / (c - 1.0)) * dc * dc + te2 / (t2 * (c - 1.0)));
            let alignment = -2.0 * aa_t * t2_t * ((aa / c) * b2 + dc * a2);
            (variance, alignment)
        }
    };
    let data_noise = aa_t * aa_t * t2_t * b2;

    Ok(RiskDecomposition::from_terms(
        bias,
        variance,
        data_noise,
        alignment,
        spec.tau_eps2_test,
    ))
}

fn require_no_test_shift(spec: &ProblemSpec) -> Result<()> {
    if spec.has_covariance_shift() {
        return Err(Error::SpecMismatch(
            "test-side theta2/tau2 must equal the train side here".into(),
        ));
    }
    Ok(())
}

/// Excess risk in the well-specified case (all four target weights equal).
pub fn risk_well_specified(spec: &ProblemSpec, branch: Branch) -> Result<f64> {
    check_branch(spec, branch)?;
    require_no_test_shift(spec)?;
    if !spec.is_well_specified() {
        return Err(Error::SpecMismatch(
            "well-specified evaluation needs alpha_z = alpha_a = alpha_z_test = alpha_a_test".into(),
        ));
    }
    let alpha = spec.alpha_z;
    let c = spec.c;
    let t2 = spec.tau2;
    let te2 = spec.tau_eps2;
    Ok(match branch {
        Branch::Under => te2 * c / (1.0 - c),
        Branch::Over => {
            let th2 = spec.theta2;
            let den = th2 + t2 * c;
            let coeff = (th2 * t2 * c * c - 2.0 * th2 * t2 * c - th2 * th2) / (den * den);
            te2 / (c - 1.0)
                + alpha * alpha * t2 * (1.0 - 1.0 / c) * (spec.beta_norm2 + spec.align2 * coeff)
        }
    })
}

/// Excess risk with misspecified targets and no train/test shift.
pub fn risk_misspecified(spec: &ProblemSpec, branch: Branch) -> Result<f64> {
    check_branch(spec, branch)?;
    require_no_test_shift(spec)?;
    if spec.has_alpha_shift() {
        return Err(Error::SpecMismatch(
            "misspecified (no shift) evaluation needs alpha_z = alpha_z_test and alpha_a = alpha_a_test".into(),
        ));
    }
    let c = spec.c;
    let th2 = spec.theta2;
    let t2 = spec.tau2;
    let te2 = spec.tau_eps2;
    let aa = spec.alpha_a;
    let a2 = spec.align2;
    let deltas = MisspecIntermediates::from_spec(spec);
    Ok(match branch {
        Branch::Under => {
            let d1 = deltas.delta_1;
            te2 * c / (1.0 - c) + t2 * a2 * d1 * d1 / (1.0 - c) * th2 / (th2 + t2)
        }
        Branch::Over => {
            let dc = deltas.delta_c;
            let den = th2 + t2 * c;
            // The bracket of the displayed formula is expanded so the
            // alpha_a/Delta_c ratio never divides by a vanishing Delta_c.
            let spike = t2 * a2 * (th2 / den)
                * ((c / (c - 1.0)) * dc * dc * (th2 + t2 * c * c) / den - 2.0 * aa * dc);
            te2 / (c - 1.0) + aa * aa * t2 * spec.beta_norm2 * (1.0 - 1.0 / c) + spike
        }
    })
}

/// Excess risk when the target depends on the spike only (`alpha_a = 0`).
///
/// Operator and explicit scalings use the finite-gamma formulas; Frobenius
/// scaling uses the proportional-limit forms, which no longer involve the
/// spike variance at all.
pub fn risk_spike_recovery(spec: &ProblemSpec, branch: Branch) -> Result<f64> {
    check_branch(spec, branch)?;
    require_no_test_shift(spec)?;
    if spec.alpha_a != 0.0 || spec.alpha_a_test != 0.0 {
        return Err(Error::SpecMismatch(
            "spike recovery needs alpha_a = alpha_a_test = 0".into(),
        ));
    }
    if spec.alpha_z != spec.alpha_z_test {
        return Err(Error::SpecMismatch(
            "spike recovery needs alpha_z = alpha_z_test".into(),
        ));
    }
    let c = spec.c;
    let t2 = spec.tau2;
    let te2 = spec.tau_eps2;
    let az2 = spec.alpha_z * spec.alpha_z;
    let a2 = spec.align2;
    Ok(match spec.scaling {
        ScalingRegime::FrobeniusNorm => match branch {
            Branch::Under => az2 * t2 / (1.0 - c) * a2 + te2 * c / (1.0 - c),
            Branch::Over => c * az2 * t2 / (c - 1.0) * a2 + te2 / (c - 1.0),
        },
        ScalingRegime::OperatorNorm { .. } | ScalingRegime::Explicit { .. } => {
            let g = spec.gamma();
            match branch {
                Branch::Under => {
                    g * az2 * t2 / ((1.0 - c) * (g + 1.0)) * a2 + te2 * c / (1.0 - c)
                }
                Branch::Over => {
                    g * c * (c * c + g) * az2 * t2 / ((c - 1.0) * (g + c) * (g + c)) * a2
                        + te2 / (c - 1.0)
                }
            }
        }
    })
}

/// Slope of the excess risk in `align2`.
///
/// The risk is affine in `align2`, so the slope is obtained exactly by
/// two-point differencing instead of transcribing each coefficient by hand.
/// Alignment with the spike is beneficial iff the slope is negative.
pub fn alignment_coefficient(spec: &ProblemSpec, branch: Branch) -> Result<f64> {
    let lo = risk_general(&spec.with_align2(0.0), branch, false)?.excess;
    let hi = risk_general(&spec.with_align2(spec.beta_norm2), branch, false)?.excess;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::UnsupportedCombination(
            "risk is not finite; alignment slope undefined".into(),
        ));
    }
    Ok((hi - lo) / spec.beta_norm2)
}

//! Scalar anchors: the BBP threshold, the critical aspect ratio where the
//! beneficial-alignment and BBP boundaries cross, alignment-benefit regions
//! at finite aspect ratio, and the positivity certificate used by the regime
//! classifier.

use crate::error::{Error, Result};
use crate::model::{Branch, GUARD_BAND_DELTA};

/// Spike-to-bulk ratio above which the spike detaches from the bulk spectrum
/// as an isolated singular value: `(1 + sqrt(c))^2`.
pub fn bbp_threshold(c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "BBP threshold needs c > 0, got {c}"
        )));
    }
    Ok((1.0 + c.sqrt()).powi(2))
}

/// Unique c > 1 where the well-specified beneficial-alignment boundary
/// `gamma = c(c-2)` meets the BBP threshold `gamma = (1+sqrt(c))^2`.
///
/// Below this ratio alignment can help before the spike is even resolved
/// from the bulk; above it, a resolved spike is necessary but not sufficient.
pub fn c_star() -> f64 {
    // f is monotone increasing on the bracket and changes sign, so plain
    // bisection to 1e-12 suffices.
    let f = |c: f64| c * (c - 2.0) - (1.0 + c.sqrt()).powi(2);
    let mut lo = 1.0 + GUARD_BAND_DELTA;
    let mut hi = 100.0;
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Certificate that no finite quadratic-rate scale `phi` can cancel the
/// tempered limit in the misspecified setting: returns
/// `f(phi) = alpha_a^2 ||beta||^2 + (alpha_z^2 (1 + 1/phi) - 2 alpha_z alpha_a) align2`,
/// which is strictly positive on the whole domain.
pub fn check_phi_positivity(
    alpha_z: f64,
    alpha_a: f64,
    align2: f64,
    beta_norm2: f64,
    phi: f64,
) -> Result<f64> {
    if !(alpha_z > 0.0 && alpha_z.is_finite()) || !(alpha_a > 0.0 && alpha_a.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "need alpha_z > 0 and alpha_a > 0, got {alpha_z}, {alpha_a}"
        )));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::InvalidSpec(format!("need phi > 0, got {phi}")));
    }
    if !(beta_norm2 > 0.0) || align2 < 0.0 || align2 > beta_norm2 {
        return Err(Error::InvalidSpec(format!(
            "need 0 <= align2 <= beta_norm2, got {align2}, {beta_norm2}"
        )));
    }
    Ok(alpha_a * alpha_a * beta_norm2
        + (alpha_z * alpha_z * (1.0 + 1.0 / phi) - 2.0 * alpha_z * alpha_a) * align2)
}

/// Problem setting for the finite-aspect-ratio alignment-benefit regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenefitSetting {
    WellSpecifiedOperator,
    WellSpecifiedFrobenius,
    MisspecifiedOperator,
    MisspecifiedFrobenius,
}

/// Where alignment with the spike helps, per setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenefitRegion {
    /// Beneficial iff the spike ratio exceeds this threshold.
    GammaAbove(f64),
    /// Beneficial for every alignment (well-specified Frobenius, c > 1).
    AlwaysBeneficial,
    /// Beneficial iff alpha_z/alpha_a lies in the closed interval.
    RatioIntervalClosed { lo: f64, hi: f64 },
    /// Beneficial iff alpha_z/alpha_a lies in the open interval.
    RatioIntervalOpen { lo: f64, hi: f64 },
    /// Alignment hurts for every target ratio (misspecified, c < 1).
    DetrimentalAll,
}

impl BenefitRegion {
    /// Whether a given target ratio alpha_z/alpha_a is beneficial; `None`
    /// when the region is keyed on gamma instead.
    pub fn beneficial_for_ratio(&self, ratio: f64) -> Option<bool> {
        match *self {
            BenefitRegion::RatioIntervalClosed { lo, hi } => Some(ratio >= lo && ratio <= hi),
            BenefitRegion::RatioIntervalOpen { lo, hi } => Some(ratio > lo && ratio < hi),
            BenefitRegion::AlwaysBeneficial => Some(true),
            BenefitRegion::DetrimentalAll => Some(false),
            BenefitRegion::GammaAbove(_) => None,
        }
    }

    pub fn beneficial_for_gamma(&self, gamma: f64) -> Option<bool> {
        match *self {
            BenefitRegion::GammaAbove(t) => Some(gamma > t),
            BenefitRegion::AlwaysBeneficial => Some(true),
            BenefitRegion::DetrimentalAll => Some(false),
            _ => None,
        }
    }
}

/// Alignment-benefit region at finite aspect ratio.
///
/// The c > 1 regions are exact; for c < 1 the misspecified operator setting
/// is flagged detrimental outright, while the remaining settings are not
/// extrapolated below the interpolation threshold and are refused.
pub fn benefit_thresholds(
    setting: BenefitSetting,
    c: f64,
    gamma: Option<f64>,
) -> Result<BenefitRegion> {
    let branch = Branch::from_aspect_ratio(c)?;
    match setting {
        BenefitSetting::WellSpecifiedOperator => match branch {
            Branch::Over => Ok(BenefitRegion::GammaAbove(c * (c - 2.0))),
            Branch::Under => Err(Error::UnsupportedSetting(
                "well-specified benefit region is stated for c > 1 only; for c < 1 the \
                 excess risk does not depend on alignment"
                    .into(),
            )),
        },
        BenefitSetting::WellSpecifiedFrobenius => match branch {
            Branch::Over => Ok(BenefitRegion::AlwaysBeneficial),
            Branch::Under => Err(Error::UnsupportedSetting(
                "well-specified Frobenius benefit region is stated for c > 1 only".into(),
            )),
        },
        BenefitSetting::MisspecifiedOperator => {
            let g = gamma.ok_or_else(|| {
                Error::UnsupportedSetting("misspecified operator region needs gamma".into())
            })?;
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidSpec(format!("need gamma > 0, got {g}")));
            }
            match branch {
                Branch::Over => Ok(BenefitRegion::RatioIntervalClosed {
                    lo: 1.0 / c,
                    hi: (3.0 * c * c - g + 2.0 * c * g - 2.0 * c) / (c * (c * c + g)),
                }),
                Branch::Under => Ok(BenefitRegion::DetrimentalAll),
            }
        }
        BenefitSetting::MisspecifiedFrobenius => match branch {
            Branch::Over => Ok(BenefitRegion::RatioIntervalOpen {
                lo: 1.0 / c,
                hi: 2.0 - 1.0 / c,
            }),
            Branch::Under => Err(Error::UnsupportedSetting(
                "misspecified Frobenius benefit region is stated for c > 1 only".into(),
            )),
        },
    }
}

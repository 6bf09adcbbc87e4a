//! Closed-form theory: risk formulas, alignment phase boundaries, scalar
//! anchors, and the asymptotic overfitting-regime classifier.

mod regimes;
mod risk;
mod scalars;

pub use regimes::{
    classify_regime, query_risk_at, AlignmentClass, AsymptoticScaling, BulkScale, GrowthClass,
    OverfittingLabel, RegimeQuery, RegimeSetting, RegimeVerdict,
};
pub use risk::{
    alignment_coefficient, risk_frobenius_limit, risk_general, risk_misspecified,
    risk_spike_recovery, risk_well_specified, RiskDecomposition,
};
pub use scalars::{
    bbp_threshold, benefit_thresholds, c_star, check_phi_positivity, BenefitRegion, BenefitSetting,
};

/// Intermediate quantities of the misspecified formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisspecIntermediates {
    /// Delta_c = alpha_z - alpha_a / c.
    pub delta_c: f64,
    /// Delta_1 = alpha_z - alpha_a, the c -> 1 value of Delta_c.
    pub delta_1: f64,
}

impl MisspecIntermediates {
    pub fn from_spec(spec: &crate::model::ProblemSpec) -> Self {
        MisspecIntermediates {
            delta_c: spec.delta_c(),
            delta_1: spec.delta_1(),
        }
    }
}

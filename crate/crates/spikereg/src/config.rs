//! Flat key/value config files (TOML) for specs and sweep plans.
//!
//! Spec keys mirror the `ProblemSpec` field names exactly; plan files add the
//! sweep fields (`axis`, `grid`, `trials`, `master_seed`, `emit_terms`,
//! `tie_gamma_to_c`) in the same flat table. Unknown keys are rejected.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SpecParams;
use crate::sweep::{SweepAxis, SweepPlan};

pub fn spec_from_str(text: &str) -> Result<SpecParams> {
    toml::from_str(text).map_err(|e| Error::Config(format!("spec config: {e}")))
}

pub fn spec_from_path(path: &Path) -> Result<SpecParams> {
    spec_from_str(&std::fs::read_to_string(path)?)
}

const PLAN_KEYS: [&str; 7] = [
    "axis",
    "fixed_dim",
    "grid",
    "trials",
    "master_seed",
    "emit_terms",
    "tie_gamma_to_c",
];

/// Parse a sweep plan: plan keys are split off, everything else must be a
/// valid spec key.
pub fn plan_from_str(text: &str) -> Result<SweepPlan> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(format!("plan config: {e}")))?;
    let mut spec_table = toml::Table::new();
    let mut plan_table = toml::Table::new();
    for (k, v) in table {
        if PLAN_KEYS.contains(&k.as_str()) {
            plan_table.insert(k, v);
        } else {
            spec_table.insert(k, v);
        }
    }
    let base: SpecParams = spec_table
        .try_into()
        .map_err(|e| Error::Config(format!("plan spec fields: {e}")))?;

    let get_str = |t: &toml::Table, k: &str| -> Option<String> {
        t.get(k).and_then(|v| v.as_str()).map(str::to_owned)
    };
    let axis_name = get_str(&plan_table, "axis")
        .ok_or_else(|| Error::Config("plan needs an axis".into()))?;
    let fixed_dim = plan_table
        .get("fixed_dim")
        .and_then(|v| v.as_integer())
        .map(|v| v as usize);
    let axis = match axis_name.as_str() {
        "c-fixed-d" => SweepAxis::CGridFixedD {
            d: fixed_dim
                .or(base.d)
                .ok_or_else(|| Error::Config("c-fixed-d axis needs d or fixed_dim".into()))?,
        },
        "c-fixed-n" => SweepAxis::CGridFixedN {
            n: fixed_dim
                .or(base.n)
                .ok_or_else(|| Error::Config("c-fixed-n axis needs n or fixed_dim".into()))?,
        },
        "alpha-ratio" => SweepAxis::AlphaRatio,
        "gamma" => SweepAxis::GammaGrid,
        other => {
            return Err(Error::Config(format!(
                "unknown axis \"{other}\" (expected c-fixed-d|c-fixed-n|alpha-ratio|gamma)"
            )))
        }
    };
    let grid = plan_table
        .get("grid")
        .and_then(|v| v.as_array())
        .map(|a| {
            a.iter()
                .map(|v| {
                    v.as_float()
                        .or_else(|| v.as_integer().map(|i| i as f64))
                        .ok_or_else(|| Error::Config("grid entries must be numbers".into()))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .transpose()?
        .ok_or_else(|| Error::Config("plan needs a grid".into()))?;
    let trials = plan_table
        .get("trials")
        .and_then(|v| v.as_integer())
        .unwrap_or(0)
        .max(0) as usize;
    let master_seed = plan_table
        .get("master_seed")
        .and_then(|v| v.as_integer())
        .unwrap_or(0) as u64;
    let emit_terms = plan_table
        .get("emit_terms")
        .and_then(|v| v.as_bool())
        .unwrap_or(false);
    let tie_gamma_to_c = plan_table
        .get("tie_gamma_to_c")
        .and_then(|v| v.as_bool())
        .unwrap_or(false);

    Ok(SweepPlan {
        base,
        axis,
        grid,
        trials,
        master_seed,
        emit_terms,
        tie_gamma_to_c,
    })
}

pub fn plan_from_path(path: &Path) -> Result<SweepPlan> {
    plan_from_str(&std::fs::read_to_string(path)?)
}

//! Declarative sweep runner: evaluates theory and simulation over a grid and
//! emits rows as CSV for downstream plotting.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Branch, ProblemSpec, ScalingRegime, SpecParams, GUARD_BAND_DELTA};
use crate::simulate::{derive_seed, monte_carlo_risk};
use crate::theory::{alignment_coefficient, risk_frobenius_limit, risk_general, RiskDecomposition};

/// What the grid values parameterize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Aspect-ratio grid at fixed ambient dimension; n = round(d / c).
    CGridFixedD { d: usize },
    /// Aspect-ratio grid at fixed sample count; d = round(n * c).
    CGridFixedN { n: usize },
    /// Target-ratio grid over alpha_z / alpha_a at the base spec's geometry.
    AlphaRatio,
    /// Spike-ratio grid over gamma under operator scaling.
    GammaGrid,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: SpecParams,
    pub axis: SweepAxis,
    /// Strictly increasing grid of axis values.
    pub grid: Vec<f64>,
    /// Monte Carlo trials per grid point; 0 for theory-only sweeps.
    pub trials: usize,
    pub master_seed: u64,
    /// Fill the four decomposition-term columns.
    pub emit_terms: bool,
    /// Tie gamma to the aspect ratio (gamma = c) on aspect-ratio grids.
    pub tie_gamma_to_c: bool,
}

/// One grid point of a sweep. Optional columns are empty in the CSV when not
/// computed (no trials requested, or no finite dimension available).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub c: f64,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub empirical_mean: Option<f64>,
    pub empirical_stderr: Option<f64>,
    pub theory_finite_d: Option<f64>,
    pub theory_asymptotic: f64,
    pub bias: Option<f64>,
    pub variance: Option<f64>,
    pub data_noise: Option<f64>,
    pub target_alignment: Option<f64>,
    pub beneficial_flag: bool,
}

fn spec_for_point(plan: &SweepPlan, value: f64) -> Result<ProblemSpec> {
    let mut params = plan.base.clone();
    match plan.axis {
        SweepAxis::CGridFixedD { d } => {
            params.d = Some(d);
            params.n = None;
            params.c = Some(value);
        }
        SweepAxis::CGridFixedN { n } => {
            params.n = Some(n);
            params.d = None;
            params.c = Some(value);
        }
        SweepAxis::AlphaRatio => {
            let alpha_a = params.alpha_a.or(params.alpha).unwrap_or(1.0);
            params.alpha_z = Some(value * alpha_a);
            params.alpha_a = Some(alpha_a);
        }
        SweepAxis::GammaGrid => {
            params.scaling = Some("operator".into());
            params.gamma = Some(value);
            params.theta2 = None;
        }
    }
    if plan.tie_gamma_to_c {
        match plan.axis {
            SweepAxis::CGridFixedD { .. } | SweepAxis::CGridFixedN { .. } => {
                params.scaling = Some("operator".into());
                params.gamma = Some(value);
                params.theta2 = None;
            }
            _ => {
                return Err(Error::InvalidPlan(
                    "tie_gamma_to_c only applies to aspect-ratio grids".into(),
                ))
            }
        }
    }
    params.resolve()
}

fn validate_plan(plan: &SweepPlan) -> Result<()> {
    if plan.grid.is_empty() {
        return Err(Error::InvalidPlan("grid is empty".into()));
    }
    if plan.grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPlan("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Evaluate one grid point.
fn run_point(plan: &SweepPlan, idx: usize, value: f64) -> Result<SweepRow> {
    let spec = spec_for_point(plan, value)?;
    let branch = Branch::from_aspect_ratio(spec.c).map_err(|e| match e {
        Error::GuardBand { c, delta } => Error::InvalidPlan(format!(
            "grid point {value} resolves to c = {c}, inside the guard band |c-1| < {delta}"
        )),
        other => other,
    })?;

    let theory_asymptotic = match spec.scaling {
        ScalingRegime::FrobeniusNorm => risk_frobenius_limit(&spec, branch)?.excess,
        _ => risk_general(&spec, branch, false)?.excess,
    };
    let finite = if spec.d.is_some() {
        Some(risk_general(&spec, branch, true)?)
    } else {
        None
    };
    let (empirical_mean, empirical_stderr) = if plan.trials > 0 {
        let est = monte_carlo_risk(&spec, plan.trials, derive_seed(plan.master_seed, idx as u64))?;
        (Some(est.mean), Some(est.stderr))
    } else {
        (None, None)
    };

    let terms: Option<RiskDecomposition> = if plan.emit_terms {
        match &finite {
            Some(r) => Some(*r),
            None => Some(match spec.scaling {
                ScalingRegime::FrobeniusNorm => risk_frobenius_limit(&spec, branch)?,
                _ => risk_general(&spec, branch, false)?,
            }),
        }
    } else {
        None
    };

    Ok(SweepRow {
        axis_value: value,
        c: spec.c,
        d: spec.d,
        n: spec.n,
        empirical_mean,
        empirical_stderr,
        theory_finite_d: finite.map(|r| r.excess),
        theory_asymptotic,
        bias: terms.map(|t| t.bias),
        variance: terms.map(|t| t.variance),
        data_noise: terms.map(|t| t.data_noise),
        target_alignment: terms.map(|t| t.target_alignment),
        beneficial_flag: alignment_coefficient(&spec, branch)? < 0.0,
    })
}

/// Run the sweep. Grid points are independent; output order follows grid
/// order and per-point seeds depend only on the master seed and the point's
/// index, so results do not depend on scheduling.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    validate_plan(plan)?;
    if plan.trials > 0 {
        // Monte Carlo already saturates the pool; keep points sequential.
        plan.grid
            .iter()
            .enumerate()
            .map(|(i, &v)| run_point(plan, i, v))
            .collect()
    } else {
        plan.grid
            .par_iter()
            .enumerate()
            .map(|(i, &v)| run_point(plan, i, v))
            .collect()
    }
}

/// Agreement summary between the empirical and finite-d theory columns.
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    pub max_abs_z: f64,
    pub median_abs_z: f64,
    /// Axis value of the row with the largest |z|.
    pub worst_axis_value: f64,
    pub pass: bool,
}

/// z-score each row as (empirical - theory_finite_d) / stderr; pass iff
/// max |z| <= 4 and median |z| <= 2.
pub fn compare_report(rows: &[SweepRow]) -> Result<CompareReport> {
    if rows.is_empty() {
        return Err(Error::MissingColumns("no rows to compare".into()));
    }
    let mut zs = Vec::with_capacity(rows.len());
    let mut worst = (0.0f64, rows[0].axis_value);
    for row in rows {
        let (mean, stderr, theory) = match (row.empirical_mean, row.empirical_stderr, row.theory_finite_d) {
            (Some(m), Some(s), Some(t)) => (m, s, t),
            _ => {
                return Err(Error::MissingColumns(format!(
                    "row at axis value {} lacks empirical or finite-d theory columns",
                    row.axis_value
                )))
            }
        };
        let z = if stderr > 0.0 {
            ((mean - theory) / stderr).abs()
        } else if mean == theory {
            0.0
        } else {
            f64::INFINITY
        };
        if z > worst.0 {
            worst = (z, row.axis_value);
        }
        zs.push(z);
    }
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if zs.len() % 2 == 1 {
        zs[zs.len() / 2]
    } else {
        0.5 * (zs[zs.len() / 2 - 1] + zs[zs.len() / 2])
    };
    let max = *zs.last().unwrap();
    Ok(CompareReport {
        max_abs_z: max,
        median_abs_z: median,
        worst_axis_value: worst.1,
        pass: max <= 4.0 && median <= 2.0,
    })
}

pub const CSV_HEADER: &str = "axis_value,c,d,n,empirical_mean,empirical_stderr,theory_finite_d,theory_asymptotic,bias,variance,data_noise,target_alignment,beneficial_flag";

fn fmt_f64(v: f64) -> String {
    // 17 significant digits round-trip any f64 exactly.
    format!("{v:.16e}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            fmt_f64(r.axis_value),
            fmt_f64(r.c),
            r.d.map(|v| v.to_string()).unwrap_or_default(),
            r.n.map(|v| v.to_string()).unwrap_or_default(),
            fmt_opt_f64(r.empirical_mean),
            fmt_opt_f64(r.empirical_stderr),
            fmt_opt_f64(r.theory_finite_d),
            fmt_f64(r.theory_asymptotic),
            fmt_opt_f64(r.bias),
            fmt_opt_f64(r.variance),
            fmt_opt_f64(r.data_noise),
            fmt_opt_f64(r.target_alignment),
            r.beneficial_flag.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn parse_opt_f64(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| Error::Config(format!("bad {what} \"{field}\": {e}")))
}

fn parse_opt_usize(field: &str, what: &str) -> Result<Option<usize>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<usize>()
        .map(Some)
        .map_err(|e| Error::Config(format!("bad {what} \"{field}\": {e}")))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "unexpected CSV header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::Config(format!(
                "line {}: expected 13 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let req = |f: &str, what: &str| -> Result<f64> {
            parse_opt_f64(f, what)?
                .ok_or_else(|| Error::Config(format!("line {}: missing {what}", lineno + 2)))
        };
        rows.push(SweepRow {
            axis_value: req(fields[0], "axis_value")?,
            c: req(fields[1], "c")?,
            d: parse_opt_usize(fields[2], "d")?,
            n: parse_opt_usize(fields[3], "n")?,
            empirical_mean: parse_opt_f64(fields[4], "empirical_mean")?,
            empirical_stderr: parse_opt_f64(fields[5], "empirical_stderr")?,
            theory_finite_d: parse_opt_f64(fields[6], "theory_finite_d")?,
            theory_asymptotic: req(fields[7], "theory_asymptotic")?,
            bias: parse_opt_f64(fields[8], "bias")?,
            variance: parse_opt_f64(fields[9], "variance")?,
            data_noise: parse_opt_f64(fields[10], "data_noise")?,
            target_alignment: parse_opt_f64(fields[11], "target_alignment")?,
            beneficial_flag: match fields[12] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Config(format!(
                        "line {}: bad beneficial_flag \"{other}\"",
                        lineno + 2
                    )))
                }
            },
        });
    }
    Ok(rows)
}

/// The validation grid: well-specified, both scalings, aligned and
/// orthogonal targets, over a fixed aspect-ratio grid at fixed d.
///
/// Returns `(label, rows)` blocks in a fixed order; concatenating the rows
/// gives the CSV the `validate` command writes.
pub fn validation_grid(
    d: usize,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<(String, Vec<SweepRow>)>> {
    let grid = vec![0.5, 2.0, 4.0, 8.0];
    let mut blocks = Vec::new();
    let mut block_idx = 0u64;
    for scaling in ["operator", "frobenius"] {
        for align2 in [1.0, 0.0] {
            let base = SpecParams {
                tau2: Some(1.0),
                tau_eps2: Some(1.0),
                alpha: Some(1.0),
                beta_norm2: Some(1.0),
                align2: Some(align2),
                scaling: (scaling == "frobenius").then(|| "frobenius".into()),
                ..Default::default()
            };
            let plan = SweepPlan {
                base,
                axis: SweepAxis::CGridFixedD { d },
                grid: grid.clone(),
                trials,
                master_seed: derive_seed(master_seed, block_idx),
                emit_terms: true,
                tie_gamma_to_c: scaling == "operator",
            };
            let label = format!(
                "{scaling}/{}",
                if align2 > 0.0 { "aligned" } else { "orthogonal" }
            );
            blocks.push((label, run_sweep(&plan)?));
            block_idx += 1;
        }
    }
    Ok(blocks)
}

/// Guard-band-aware aspect grid helper for tests and the CLI: snaps values
/// away from c = 1 by the guard width.
pub fn snap_outside_guard_band(c: f64) -> f64 {
    if (c - 1.0).abs() < GUARD_BAND_DELTA {
        if c >= 1.0 {
            1.0 + GUARD_BAND_DELTA
        } else {
            1.0 - GUARD_BAND_DELTA
        }
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn theory_plan() -> SweepPlan {
        SweepPlan {
            base: SpecParams {
                tau_eps2: Some(1.0),
                align2: Some(1.0),
                ..Default::default()
            },
            axis: SweepAxis::CGridFixedD { d: 1000 },
            grid: vec![1.2, 2.0, 4.0, 8.0, 16.0],
            trials: 0,
            master_seed: 1,
            emit_terms: true,
            tie_gamma_to_c: true,
        }
    }

    #[test]
    fn theory_only_rows_have_empty_empirical_columns() {
        let rows = run_sweep(&theory_plan()).unwrap();
        assert_eq!(rows.len(), 5);
        for row in &rows {
            assert!(row.empirical_mean.is_none());
            assert!(row.empirical_stderr.is_none());
            assert!(row.theory_finite_d.is_some());
            assert!(row.bias.is_some());
        }
    }

    #[test]
    fn gamma_tracks_c_aligned_vs_orthogonal() {
        // Aligned exceeds orthogonal past c = 3, and the aligned excess grows
        // like c/4 at large c.
        let aligned = run_sweep(&theory_plan()).unwrap();
        let mut orthogonal_plan = theory_plan();
        orthogonal_plan.base.align2 = Some(0.0);
        let orthogonal = run_sweep(&orthogonal_plan).unwrap();
        for (a, o) in aligned.iter().zip(&orthogonal) {
            if a.c > 3.0 {
                assert!(a.theory_asymptotic > o.theory_asymptotic, "c = {}", a.c);
            } else {
                assert!(a.theory_asymptotic <= o.theory_asymptotic, "c = {}", a.c);
            }
        }
        let big = SweepPlan {
            grid: vec![400.0],
            ..theory_plan()
        };
        let row = &run_sweep(&big).unwrap()[0];
        let ratio = row.theory_asymptotic / (row.c / 4.0);
        assert!((0.9..=1.1).contains(&ratio), "growth ratio {ratio}");
    }

    #[test]
    fn ratio_grid_beneficial_region_matches_interval() {
        // Frobenius scaling at extreme overparameterization: the beneficial
        // region is (1/c, 2 - 1/c) up to vanishing finite-d corrections.
        let c = 1000.0;
        let plan = SweepPlan {
            base: SpecParams {
                d: Some(10_000_000_000),
                n: Some(10_000_000),
                scaling: Some("frobenius".into()),
                alpha_a: Some(1.0),
                align2: Some(0.5),
                ..Default::default()
            },
            axis: SweepAxis::AlphaRatio,
            grid: (0..=30).map(|i| i as f64 * 0.1).collect(),
            trials: 0,
            master_seed: 0,
            emit_terms: false,
            tie_gamma_to_c: false,
        };
        let rows = run_sweep(&plan).unwrap();
        for row in &rows {
            let r = row.axis_value;
            let inside = r > 1.0 / c && r < 2.0 - 1.0 / c;
            // Grid points sit well away from the boundaries.
            if (r - 1.0 / c).abs() > 0.05 && (r - (2.0 - 1.0 / c)).abs() > 0.05 {
                assert_eq!(row.beneficial_flag, inside, "ratio {r}");
            }
        }
    }

    #[test]
    fn double_descent_shape_anti_aligned() {
        // Well-specified with label noise, orthogonal target: risk decreases
        // monotonically toward its limit past the interpolation peak.
        let plan = SweepPlan {
            base: SpecParams {
                gamma: Some(2.0),
                tau_eps2: Some(1.0),
                align2: Some(0.0),
                ..Default::default()
            },
            axis: SweepAxis::CGridFixedD { d: 4000 },
            grid: vec![1.2, 1.5, 2.0, 3.0, 5.0, 9.0, 17.0, 33.0],
            trials: 0,
            master_seed: 0,
            emit_terms: false,
            tie_gamma_to_c: false,
        };
        let rows = run_sweep(&plan).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].theory_asymptotic < w[0].theory_asymptotic,
                "not decreasing at c = {}",
                w[1].c
            );
        }
        // Approaches the tempered limit alpha^2 tau^2 |beta|^2 = 1.
        assert_relative_eq!(rows.last().unwrap().theory_asymptotic, 1.0, max_relative = 0.05);
    }

    #[test]
    fn double_descent_shape_frobenius_parallel() {
        // Benign curve: the excess is the label-noise term alone and decays
        // toward zero.
        let plan = SweepPlan {
            base: SpecParams {
                scaling: Some("frobenius".into()),
                tau_eps2: Some(1.0),
                align2: Some(1.0),
                ..Default::default()
            },
            axis: SweepAxis::CGridFixedD { d: 4000 },
            grid: vec![1.25, 2.0, 4.0, 8.0, 16.0],
            trials: 0,
            master_seed: 0,
            emit_terms: false,
            tie_gamma_to_c: false,
        };
        let rows = run_sweep(&plan).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].theory_asymptotic < w[0].theory_asymptotic);
        }
        assert!(rows.last().unwrap().theory_asymptotic < 0.1);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut rows = run_sweep(&theory_plan()).unwrap();
        // Exercise empty empirical columns alongside filled ones.
        rows[0].empirical_mean = Some(1.234567890123456789e-3);
        rows[0].empirical_stderr = Some(7.77e-5);
        let csv = rows_to_csv(&rows);
        let parsed = rows_from_csv(&csv).unwrap();
        assert_eq!(rows.len(), parsed.len());
        for (a, b) in rows.iter().zip(&parsed) {
            assert_eq!(a, b);
        }
        assert_eq!(csv, rows_to_csv(&parsed));
    }

    #[test]
    fn compare_report_thresholds() {
        let mut rows = run_sweep(&theory_plan()).unwrap();
        for row in &mut rows {
            row.empirical_mean = row.theory_finite_d;
            row.empirical_stderr = Some(0.01);
        }
        let report = compare_report(&rows).unwrap();
        assert_eq!(report.max_abs_z, 0.0);
        assert!(report.pass);

        rows[2].empirical_mean = rows[2].theory_finite_d.map(|t| t + 0.1);
        let report = compare_report(&rows).unwrap();
        assert_relative_eq!(report.max_abs_z, 10.0, max_relative = 1e-12);
        assert_eq!(report.worst_axis_value, rows[2].axis_value);
        assert!(!report.pass);
    }

    #[test]
    fn compare_report_requires_columns() {
        let rows = run_sweep(&theory_plan()).unwrap();
        assert!(matches!(
            compare_report(&rows),
            Err(Error::MissingColumns(_))
        ));
    }

    #[test]
    fn plan_validation() {
        let mut plan = theory_plan();
        plan.grid = vec![2.0, 1.5];
        assert!(matches!(run_sweep(&plan), Err(Error::InvalidPlan(_))));
        let mut plan = theory_plan();
        plan.grid = vec![0.5, 1.0001, 2.0];
        assert!(matches!(run_sweep(&plan), Err(Error::InvalidPlan(_))));
    }
}

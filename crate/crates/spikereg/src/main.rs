//! Command-line front end: one executable exposing the theory evaluators,
//! the regime classifier, the Monte Carlo engine, sweeps, and the validation
//! grid as subcommands.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spikereg::config;
use spikereg::error::Error;
use spikereg::model::{Branch, ProblemSpec, SpecParams};
use spikereg::rmt;
use spikereg::simulate;
use spikereg::sweep::{self, SweepAxis, SweepPlan};
use spikereg::theory::{
    self, AlignmentClass, AsymptoticScaling, BenefitRegion, BenefitSetting, BulkScale,
    GrowthClass, RegimeQuery, RegimeSetting, RiskDecomposition,
};

#[derive(Parser)]
#[command(
    name = "spikereg",
    about = "Spiked-covariance minimum-norm regression laboratory",
    version
)]
struct Cli {
    /// Thread cap for parallel sections (default: SPIKEREG_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Spec flags mirror the ProblemSpec field names.
#[derive(Args, Clone, Default)]
struct SpecArgs {
    /// Flat key/value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    /// Scaling regime: operator | frobenius | explicit.
    #[arg(long)]
    scaling: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    theta2: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    tau_eps2: Option<f64>,
    #[arg(long)]
    theta2_test: Option<f64>,
    #[arg(long)]
    tau2_test: Option<f64>,
    #[arg(long)]
    tau_eps2_test: Option<f64>,
    /// Sets every alpha_* not given individually.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_z: Option<f64>,
    #[arg(long)]
    alpha_a: Option<f64>,
    #[arg(long)]
    alpha_z_test: Option<f64>,
    #[arg(long)]
    alpha_a_test: Option<f64>,
    #[arg(long)]
    beta_norm2: Option<f64>,
    #[arg(long)]
    align2: Option<f64>,
}

impl SpecArgs {
    fn params(&self) -> Result<SpecParams, Error> {
        let mut p = match &self.config {
            Some(path) => config::spec_from_path(path)?,
            None => SpecParams::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => { $( if self.$f.is_some() { p.$f = self.$f.clone(); } )* };
        }
        over!(
            d, n, c, scaling, gamma, theta2, tau2, tau_eps2, theta2_test, tau2_test,
            tau_eps2_test, alpha, alpha_z, alpha_a, alpha_z_test, alpha_a_test, beta_norm2,
            align2
        );
        Ok(p)
    }

    fn resolve(&self) -> Result<ProblemSpec, Error> {
        self.params()?.resolve()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    WellSpecified,
    Misspec,
    MisspecShift,
    SpikeRecovery,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Operator,
    Frobenius,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignmentArg {
    Parallel,
    Orthogonal,
    Oblique,
}

#[derive(Clone, Copy, ValueEnum)]
enum GrowthArg {
    Constant,
    Intermediate,
    Quadratic,
    Superquadratic,
}

#[derive(Clone, Copy, ValueEnum)]
enum BulkArg {
    Constant,
    Vanishing,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form excess risk and its four terms.
    Theory {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Full risk decomposition as labeled lines (or JSON).
    Decompose {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo estimate of the risk at a concrete (d, n).
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a sweep plan and write CSV.
    Sweep {
        /// Plan file (flat key/value; spec keys plus axis/grid/trials/...).
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        spec: SpecArgs,
        /// Axis: c-fixed-d | c-fixed-n | alpha-ratio | gamma.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        emit_terms: bool,
        #[arg(long)]
        tie_gamma_to_c: bool,
        /// Output path (default: stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Alignment-benefit thresholds and the risk slope in align2.
    Phase {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum)]
        setting: SettingArg,
        #[arg(long("phase-scaling"), value_enum)]
        phase_scaling: ScalingArg,
    },
    /// Asymptotic overfitting-regime classification.
    Classify {
        #[arg(long, value_enum)]
        setting: SettingArg,
        #[arg(long("class-scaling"), value_enum)]
        class_scaling: ScalingArg,
        #[arg(long, value_enum)]
        alignment: AlignmentArg,
        #[arg(long, value_enum, default_value = "constant")]
        growth: GrowthArg,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long, value_enum, default_value = "constant")]
        bulk: BulkArg,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        alpha_z: Option<f64>,
        #[arg(long)]
        alpha_a: Option<f64>,
        #[arg(long)]
        alpha_z_test: Option<f64>,
        #[arg(long)]
        alpha_a_test: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        tau2: f64,
        #[arg(long, default_value_t = 1.0)]
        beta_norm2: f64,
        #[arg(long)]
        align2: Option<f64>,
    },
    /// Rank-one pseudoinverse identity, building-block means, spectral edge.
    RmtCheck {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the validation grid and print the agreement report.
    Validate {
        #[arg(long, default_value_t = 1000)]
        d: usize,
        #[arg(long, default_value_t = 300)]
        trials: usize,
        #[arg(long, default_value_t = 20260809)]
        seed: u64,
        /// Output CSV path (default: stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn print_decomposition(r: &RiskDecomposition) {
    println!("bias: {}", r.bias);
    println!("variance: {}", r.variance);
    println!("data_noise: {}", r.data_noise);
    println!("target_alignment: {}", r.target_alignment);
    println!("total: {}", r.total);
    println!("excess: {}", r.excess);
}

fn risk_at(spec: &ProblemSpec) -> Result<(Branch, RiskDecomposition), Error> {
    let branch = spec.branch()?;
    let finite_d = spec.d.is_some();
    Ok((branch, theory::risk_general(spec, branch, finite_d)?))
}

fn cmd_theory(args: &SpecArgs) -> Result<(), Error> {
    let spec = args.resolve()?;
    let (_, r) = risk_at(&spec)?;
    println!("excess: {}", r.excess);
    println!("bias: {}", r.bias);
    println!("variance: {}", r.variance);
    println!("data_noise: {}", r.data_noise);
    println!("target_alignment: {}", r.target_alignment);
    Ok(())
}

fn cmd_decompose(args: &SpecArgs, json: bool) -> Result<(), Error> {
    let spec = args.resolve()?;
    let (_, r) = risk_at(&spec)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&r).expect("decomposition serializes")
        );
    } else {
        print_decomposition(&r);
    }
    Ok(())
}

fn cmd_simulate(args: &SpecArgs, trials: usize, seed: u64) -> Result<(), Error> {
    let spec = args.resolve()?;
    let est = simulate::monte_carlo_risk(&spec, trials, seed)?;
    println!("trials: {}", est.trials);
    println!("mean_excess: {}", est.mean);
    println!("stderr: {}", est.stderr);
    println!("bias: {}", est.per_term.bias);
    println!("variance: {}", est.per_term.variance);
    println!("data_noise: {}", est.per_term.data_noise);
    println!("target_alignment: {}", est.per_term.target_alignment);
    if let Ok((_, theory)) = risk_at(&spec) {
        println!("theory_finite_d: {}", theory.excess);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    plan_path: Option<&PathBuf>,
    spec: &SpecArgs,
    axis: Option<&str>,
    grid: Option<Vec<f64>>,
    trials: Option<usize>,
    master_seed: Option<u64>,
    emit_terms: bool,
    tie_gamma_to_c: bool,
    out: Option<&PathBuf>,
) -> Result<(), Error> {
    let mut plan = match plan_path {
        Some(path) => config::plan_from_path(path)?,
        None => {
            let base = spec.params()?;
            let axis = match axis {
                Some("c-fixed-d") => SweepAxis::CGridFixedD {
                    d: base
                        .d
                        .ok_or_else(|| Error::InvalidPlan("c-fixed-d axis needs --d".into()))?,
                },
                Some("c-fixed-n") => SweepAxis::CGridFixedN {
                    n: base
                        .n
                        .ok_or_else(|| Error::InvalidPlan("c-fixed-n axis needs --n".into()))?,
                },
                Some("alpha-ratio") => SweepAxis::AlphaRatio,
                Some("gamma") => SweepAxis::GammaGrid,
                Some(other) => {
                    return Err(Error::InvalidPlan(format!("unknown axis \"{other}\"")))
                }
                None => return Err(Error::InvalidPlan("sweep needs --plan or --axis".into())),
            };
            SweepPlan {
                base,
                axis,
                grid: grid.ok_or_else(|| Error::InvalidPlan("sweep needs --grid".into()))?,
                trials: trials.unwrap_or(0),
                master_seed: master_seed.unwrap_or(0),
                emit_terms,
                tie_gamma_to_c,
            }
        }
    };
    if plan_path.is_some() {
        if let Some(t) = trials {
            plan.trials = t;
        }
        if let Some(s) = master_seed {
            plan.master_seed = s;
        }
    }
    let rows = sweep::run_sweep(&plan)?;
    let csv = sweep::rows_to_csv(&rows);
    write_out(out, &csv)?;
    Ok(())
}

fn cmd_phase(args: &SpecArgs, setting: SettingArg, scaling: ScalingArg) -> Result<(), Error> {
    let spec = args.resolve()?;
    let setting = match (setting, scaling) {
        (SettingArg::WellSpecified, ScalingArg::Operator) => BenefitSetting::WellSpecifiedOperator,
        (SettingArg::WellSpecified, ScalingArg::Frobenius) => {
            BenefitSetting::WellSpecifiedFrobenius
        }
        (SettingArg::Misspec, ScalingArg::Operator) => BenefitSetting::MisspecifiedOperator,
        (SettingArg::Misspec, ScalingArg::Frobenius) => BenefitSetting::MisspecifiedFrobenius,
        _ => {
            return Err(Error::UnsupportedSetting(
                "phase regions exist for well-specified and misspecified (no shift) settings"
                    .into(),
            ))
        }
    };
    let gamma = match spec.scaling {
        spikereg::ScalingRegime::OperatorNorm { gamma } => Some(gamma),
        spikereg::ScalingRegime::Explicit { theta2 } if theta2 > 0.0 => Some(spec.gamma()),
        _ => None,
    };
    let region = theory::benefit_thresholds(setting, spec.c, gamma)?;
    match region {
        BenefitRegion::GammaAbove(t) => println!("beneficial iff gamma > {t}"),
        BenefitRegion::AlwaysBeneficial => println!("beneficial for every alignment"),
        BenefitRegion::RatioIntervalClosed { lo, hi } => {
            println!("beneficial iff alpha_z/alpha_a in [{lo}, {hi}]")
        }
        BenefitRegion::RatioIntervalOpen { lo, hi } => {
            println!("beneficial iff alpha_z/alpha_a in ({lo}, {hi})")
        }
        BenefitRegion::DetrimentalAll => println!("alignment is detrimental for every ratio"),
    }
    let coeff = theory::alignment_coefficient(&spec, spec.branch()?)?;
    println!("alignment_coefficient: {coeff}");
    println!("beneficial_here: {}", coeff < 0.0);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_classify(
    setting: SettingArg,
    scaling: ScalingArg,
    alignment: AlignmentArg,
    growth: GrowthArg,
    gamma: Option<f64>,
    phi: Option<f64>,
    bulk: BulkArg,
    alpha: f64,
    alpha_z: Option<f64>,
    alpha_a: Option<f64>,
    alpha_z_test: Option<f64>,
    alpha_a_test: Option<f64>,
    tau2: f64,
    beta_norm2: f64,
    align2: Option<f64>,
) -> Result<(), Error> {
    let growth = match growth {
        GrowthArg::Constant => GrowthClass::ConstantGamma(gamma.unwrap_or(1.0)),
        GrowthArg::Intermediate => GrowthClass::Intermediate,
        GrowthArg::Quadratic => GrowthClass::QuadraticRate(phi.unwrap_or(1.0)),
        GrowthArg::Superquadratic => GrowthClass::SuperQuadratic,
    };
    let scaling = match scaling {
        ScalingArg::Operator => AsymptoticScaling::OperatorNorm(growth),
        ScalingArg::Frobenius => AsymptoticScaling::FrobeniusNorm,
    };
    let alignment = match alignment {
        AlignmentArg::Parallel => AlignmentClass::Parallel,
        AlignmentArg::Orthogonal => AlignmentClass::Orthogonal,
        AlignmentArg::Oblique => AlignmentClass::Oblique,
    };
    let align2 = align2.unwrap_or(match alignment {
        AlignmentClass::Parallel => beta_norm2,
        AlignmentClass::Orthogonal => 0.0,
        AlignmentClass::Oblique => 0.5 * beta_norm2,
    });
    let az = alpha_z.unwrap_or(alpha);
    let aa = alpha_a.unwrap_or(alpha);
    let setting = match setting {
        SettingArg::WellSpecified => RegimeSetting::WellSpecified { alpha },
        SettingArg::Misspec => RegimeSetting::MisspecNoShift {
            alpha_z: az,
            alpha_a: aa,
        },
        SettingArg::MisspecShift => RegimeSetting::MisspecShift {
            alpha_z: az,
            alpha_a: aa,
            alpha_z_test: alpha_z_test.unwrap_or(az),
            alpha_a_test: alpha_a_test.unwrap_or(aa),
        },
        SettingArg::SpikeRecovery => RegimeSetting::SpikeRecovery {
            alpha_z: az,
            bulk: match bulk {
                BulkArg::Constant => BulkScale::Constant,
                BulkArg::Vanishing => BulkScale::Vanishing,
            },
        },
    };
    let query = RegimeQuery {
        scaling,
        alignment,
        setting,
        tau2,
        beta_norm2,
        align2,
    };
    let verdict = theory::classify_regime(&query)?;
    match verdict.limit_value {
        Some(v) if v.is_infinite() => println!("{}, limit inf", verdict.label),
        Some(v) => println!("{}, limit {v}", verdict.label),
        None => println!("{}", verdict.label),
    }
    Ok(())
}

fn cmd_rmt_check(args: &SpecArgs, trials: usize, seed: u64) -> Result<(), Error> {
    let spec = args.resolve()?;
    let (d, n) = spec.require_dims()?;

    // Identity spot check at a reduced size with the spec's branch.
    let (ds, ns) = if d > n { (60, 30) } else { (30, 60) };
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let a = ndarray::Array2::from_shape_simple_fn((ds, ns), || {
        use rand::distributions::Distribution;
        let g: f64 = rand_distr::StandardNormal.sample(&mut rng);
        g
    });
    let u = unit(&mut rng, ds);
    let v = unit(&mut rng, ns);
    let m = rmt::meyer_pseudoinverse(1.0, &u.view(), &v.view(), &a.view())?;
    let mut x = a.clone();
    for i in 0..ds {
        for j in 0..ns {
            x[(i, j)] += u[i] * v[j];
        }
    }
    let (direct, _, _) = spikereg::linalg::pinv(&x.view())?;
    let scale = spikereg::linalg::spectral_norm(&direct.view());
    let err = (&m - &direct).iter().fold(0.0f64, |mx, &v| mx.max(v.abs())) / scale;
    println!("meyer_identity_max_abs_err: {err}");
    println!("meyer_identity_ok: {}", err <= 1e-8);

    let blocks = rmt::estimate_building_blocks(&spec, trials, seed)?;
    let line = |name: &str, stat: &rmt::BlockStat| match stat.expected {
        Some(e) => println!(
            "{name}: mean {} stderr {} expected {e}",
            stat.mean, stat.stderr
        ),
        None => println!("{name}: mean {} stderr {}", stat.mean, stat.stderr),
    };
    line("h2", &blocks.h2);
    line("k2", &blocks.k2);
    line("s2", &blocks.s2);
    line("t2", &blocks.t2);
    line("xi_over_eta", &blocks.xi_over_eta);
    line("xi_over_eta_sq", &blocks.xi_over_eta_sq);

    let report = rmt::spectrum_check(&spec, seed)?;
    println!("bulk_edge: {}", report.edge_top);
    println!("top_singular_value: {}", report.top_singular_value);
    println!("outlier_present: {}", report.outlier_present);
    Ok(())
}

fn unit(rng: &mut rand_chacha::ChaCha8Rng, len: usize) -> ndarray::Array1<f64> {
    use rand::distributions::Distribution;
    loop {
        let v = ndarray::Array1::from_iter((0..len).map(|_| {
            let g: f64 = rand_distr::StandardNormal.sample(rng);
            g
        }));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

fn cmd_validate(d: usize, trials: usize, seed: u64, out: Option<&PathBuf>) -> Result<(), Error> {
    let blocks = sweep::validation_grid(d, trials, seed)?;
    let all_rows: Vec<_> = blocks.iter().flat_map(|(_, rows)| rows.clone()).collect();
    let csv = sweep::rows_to_csv(&all_rows);
    write_out(out, &csv)?;
    let mut pass = true;
    for (label, rows) in &blocks {
        let report = sweep::compare_report(rows)?;
        println!(
            "{label}: max|z| = {} median|z| = {} worst at c = {} -> {}",
            report.max_abs_z,
            report.median_abs_z,
            report.worst_axis_value,
            if report.pass { "pass" } else { "FAIL" }
        );
        pass &= report.pass;
    }
    let overall = sweep::compare_report(&all_rows)?;
    println!(
        "overall: max|z| = {} median|z| = {} -> {}",
        overall.max_abs_z,
        overall.median_abs_z,
        if overall.pass && pass { "pass" } else { "FAIL" }
    );
    if !(overall.pass && pass) {
        return Err(Error::InvalidSpec("validation grid failed".into()));
    }
    Ok(())
}

fn write_out(path: Option<&PathBuf>, content: &str) -> Result<(), Error> {
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p)?;
            f.write_all(content.as_bytes())?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    // Keep the BLAS single-threaded; parallelism lives at the trial level.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("SPIKEREG_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match &cli.command {
        Command::Theory { spec } => cmd_theory(spec),
        Command::Decompose { spec, json } => cmd_decompose(spec, *json),
        Command::Simulate { spec, trials, seed } => cmd_simulate(spec, *trials, *seed),
        Command::Sweep {
            plan,
            spec,
            axis,
            grid,
            trials,
            master_seed,
            emit_terms,
            tie_gamma_to_c,
            out,
        } => cmd_sweep(
            plan.as_ref(),
            spec,
            axis.as_deref(),
            grid.clone(),
            *trials,
            *master_seed,
            *emit_terms,
            *tie_gamma_to_c,
            out.as_ref(),
        ),
        Command::Phase {
            spec,
            setting,
            phase_scaling,
        } => cmd_phase(spec, *setting, *phase_scaling),
        Command::Classify {
            setting,
            class_scaling,
            alignment,
            growth,
            gamma,
            phi,
            bulk,
            alpha,
            alpha_z,
            alpha_a,
            alpha_z_test,
            alpha_a_test,
            tau2,
            beta_norm2,
            align2,
        } => cmd_classify(
            *setting,
            *class_scaling,
            *alignment,
            *growth,
            *gamma,
            *phi,
            *bulk,
            *alpha,
            *alpha_z,
            *alpha_a,
            *alpha_z_test,
            *alpha_a_test,
            *tau2,
            *beta_norm2,
            *align2,
        ),
        Command::RmtCheck { spec, trials, seed } => cmd_rmt_check(spec, *trials, *seed),
        Command::Validate {
            d,
            trials,
            seed,
            out,
        } => cmd_validate(*d, *trials, *seed, out.as_ref()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

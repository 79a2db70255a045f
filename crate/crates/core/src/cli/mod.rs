//! Command-line orchestration: `solve`, `verify`, `oracle-compare` and
//! `sweep-eta`, each reading a JSON [`RunConfig`] and writing JSON and CSV
//! reports into the output directory.
//!
//! Exit codes: 0 ok, 1 configuration error, 2 solver failure,
//! 3 verification failure.

pub mod checks;
pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use checks::Check;
pub use config::{Method, RunConfig};

use crate::elverify::{chemical_potential, refinement_study, QFormContext, RefinementStudy};
use crate::error::{Error, Result};
use crate::solvers::{
    oracle_minimize, oracle_scan_two_point, solve_dual, solve_primal, ConvergenceReport, DualOptions, Equilibrium,
    PrimalOptions, Problem, SolverKind, ORACLE_MAX_POINTS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Leading eigenvalues echoed in report summaries.
const SPECTRUM_HEAD: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "qmaxwell", version, about = "Constrained quantum free-energy minimizers on 1-D grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the equilibrium and write report.json, spectrum.csv, fields.csv.
    Solve(CommonArgs),
    /// Run the full verification battery and write verify.json.
    Verify(CommonArgs),
    /// Compare the solver with the exhaustive oracle (N ≤ 3); writes oracle.json.
    OracleCompare(CommonArgs),
    /// Regularized minimizers along η = 2^-j; writes sweep.json and sweep.csv.
    SweepEta(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (common, action): (&CommonArgs, fn(&RunConfig) -> Result<i32>) = match &cli.command {
        Command::Solve(a) => (a, run_solve),
        Command::Verify(a) => (a, run_verify),
        Command::OracleCompare(a) => (a, run_oracle_compare),
        Command::SweepEta(a) => (a, run_sweep),
    };
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match action(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
                _ => EXIT_SOLVER,
            }
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.problem().map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    Ok(cfg)
}

pub fn dual_options(cfg: &RunConfig) -> DualOptions {
    let d = DualOptions::default();
    DualOptions {
        tol: cfg.solver.tol.unwrap_or(d.tol),
        max_iter: cfg.solver.max_iter.unwrap_or(d.max_iter),
        ..d
    }
}

pub fn primal_options(cfg: &RunConfig) -> PrimalOptions {
    let d = PrimalOptions::default();
    PrimalOptions {
        tol: cfg.solver.tol.unwrap_or(d.tol),
        max_iter: cfg.solver.max_iter.unwrap_or(d.max_iter),
        ..d
    }
}

/// Solves the configured problem with the configured method.
pub fn solve_configured(cfg: &RunConfig, problem: &Problem) -> Result<Equilibrium> {
    match cfg.solver.method {
        Method::Dual => solve_dual(problem, &dual_options(cfg)),
        Method::Primal => solve_primal(problem, &primal_options(cfg)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSummary {
    pub solver: SolverKind,
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub spectrum_head: Vec<f64>,
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub constraint_residual: f64,
    pub gradient_norm: f64,
    pub warning: Option<String>,
}

impl EquilibriumSummary {
    pub fn new(eq: &Equilibrium) -> Self {
        let d = &eq.diagnostics;
        Self {
            solver: d.solver,
            free_energy: d.free_energy.free_energy,
            energy: d.free_energy.energy,
            entropy: d.free_energy.entropy,
            spectrum_head: eq.rho.eigenvalues().iter().take(SPECTRUM_HEAD).copied().collect(),
            min_eigenvalue: eq.rho.min_eigenvalue(),
            iterations: d.iterations,
            constraint_residual: d.final_constraint_residual,
            gradient_norm: d.final_gradient_norm,
            warning: d.warning.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl Provenance {
    fn now() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub converged: bool,
    pub error: Option<String>,
    pub equilibrium: Option<EquilibriumSummary>,
    pub checks: Vec<Check>,
    pub provenance: Provenance,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub version: &'static str,
    pub equilibrium: EquilibriumSummary,
    pub checks: Vec<Check>,
    pub refinement: Option<RefinementStudy>,
    pub eta_sweep: Option<ConvergenceReport>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub config: RunConfig,
    pub oracle_free_energy: f64,
    /// Minimum of the two-point scan, `N = 2` only.
    pub scan_min_free_energy: Option<f64>,
    /// Minimum second difference of the scan values, `N = 2` only.
    pub scan_min_second_difference: Option<f64>,
    pub solver_free_energy: f64,
    pub free_energy_diff: f64,
    pub kernel_max_diff: f64,
    pub constraint_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SweepFile {
    config: RunConfig,
    report: ConvergenceReport,
    checks: Vec<Check>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    p: usize,
    rho_p: f64,
    neg_log_rho_p: f64,
}

#[derive(Debug, Serialize)]
struct FieldRow {
    x: f64,
    n: f64,
    n_rho: f64,
    k: f64,
    s_loc: f64,
    a_dual: f64,
    a_moment: f64,
    v_star: f64,
    omega: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum(path: &Path, eq: &Equilibrium) -> Result<()> {
    let nl = eq.neg_log_spectrum();
    write_csv(
        path,
        eq.rho.eigenvalues().iter().zip(nl).enumerate().map(|(p, (&r, l))| SpectrumRow {
            p,
            rho_p: r,
            neg_log_rho_p: l,
        }),
    )
}

fn write_fields(path: &Path, problem: &Problem, eq: &Equilibrium) -> Result<()> {
    let n = problem.grid.num_points();
    let nan = vec![f64::NAN; n];
    let (a_dual, a_moment) = match chemical_potential(eq) {
        Ok(c) => (c.dual, c.moment.iter().map(|m| m - c.offset).collect()),
        Err(_) => (nan.clone(), nan.clone()),
    };
    let (v_star, omega) = match QFormContext::new(eq) {
        Ok(c) => (c.v_star, c.omega),
        Err(_) => (nan.clone(), nan),
    };
    let m = &eq.moments;
    write_csv(
        path,
        (0..n).map(|i| FieldRow {
            x: problem.grid.nodes()[i],
            n: problem.target.n[i],
            n_rho: m.n[i],
            k: m.k[i],
            s_loc: m.s_loc[i],
            a_dual: a_dual[i],
            a_moment: a_moment[i],
            v_star: v_star[i],
            omega: omega[i],
        }),
    )
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(&cfg.output_dir)
}

pub fn run_solve(cfg: &RunConfig) -> Result<i32> {
    let problem = cfg.problem()?;
    let outcome = solve_configured(cfg, &problem);
    let dir = output_dir(cfg)?;
    let mut report = Report {
        config: cfg.clone(),
        converged: false,
        error: None,
        equilibrium: None,
        checks: Vec::new(),
        provenance: Provenance::now(),
        files: vec!["report.json".into()],
    };
    let eq = match outcome {
        Ok(eq) => eq,
        Err(e) => {
            eprintln!("error: {e}");
            report.error = Some(e.to_string());
            write_json(&dir.join("report.json"), &report)?;
            return Ok(EXIT_SOLVER);
        }
    };
    write_spectrum(&dir.join("spectrum.csv"), &eq)?;
    write_fields(&dir.join("fields.csv"), &problem, &eq)?;
    report.files.extend(["spectrum.csv".into(), "fields.csv".into()]);
    report.converged = true;
    report.equilibrium = Some(EquilibriumSummary::new(&eq));
    report.checks = checks::equilibrium_checks(cfg, &eq);
    write_json(&dir.join("report.json"), &report)?;
    print_checks(&report.checks);
    Ok(EXIT_OK)
}

pub fn run_verify(cfg: &RunConfig) -> Result<i32> {
    let problem = cfg.problem()?;
    let eq = solve_configured(cfg, &problem)?;
    let mut all = checks::equilibrium_checks(cfg, &eq);
    let refinement = if cfg.verify.refinement_levels.len() >= 2 {
        let study = refinement_study(&checks::refinement_spec(cfg))?;
        all.extend(checks::refinement_checks(cfg, &study)?);
        Some(study)
    } else {
        None
    };
    let sweep = checks::sweep_report(cfg)?;
    all.extend(checks::sweep_checks(&sweep));
    let pass = !all.iter().any(Check::is_failure);
    let report = VerifyReport {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION"),
        equilibrium: EquilibriumSummary::new(&eq),
        checks: all,
        refinement,
        eta_sweep: Some(sweep),
        pass,
    };
    write_json(&output_dir(cfg)?.join("verify.json"), &report)?;
    print_checks(&report.checks);
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
}

pub fn run_oracle_compare(cfg: &RunConfig) -> Result<i32> {
    if cfg.grid.n > ORACLE_MAX_POINTS {
        return Err(Error::Config(format!(
            "oracle-compare needs N <= {ORACLE_MAX_POINTS}, got {}",
            cfg.grid.n
        )));
    }
    let problem = cfg.problem()?;
    let oracle = oracle_minimize(&problem)?;
    let solved = solve_configured(cfg, &problem)?;
    let (scan_min, second) = if cfg.grid.n == 2 {
        let scan = oracle_scan_two_point(&problem)?;
        let min = scan.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let second = scan
            .windows(3)
            .map(|w| w[0].1 - 2.0 * w[1].1 + w[2].1)
            .fold(f64::INFINITY, f64::min);
        (Some(min), Some(second))
    } else {
        (None, None)
    };
    let kernel_max_diff = (oracle.rho.kernel() - solved.rho.kernel()).abs().max();
    let report = OracleReport {
        config: cfg.clone(),
        oracle_free_energy: oracle.diagnostics.f_value(),
        scan_min_free_energy: scan_min,
        scan_min_second_difference: second,
        solver_free_energy: solved.diagnostics.f_value(),
        free_energy_diff: (oracle.diagnostics.f_value() - solved.diagnostics.f_value()).abs(),
        kernel_max_diff,
        constraint_residual: solved.diagnostics.final_constraint_residual,
    };
    write_json(&output_dir(cfg)?.join("oracle.json"), &report)?;
    println!(
        "oracle F {:.12e}  solver F {:.12e}  |dF| {:.3e}  kernel diff {:.3e}",
        report.oracle_free_energy, report.solver_free_energy, report.free_energy_diff, report.kernel_max_diff
    );
    Ok(EXIT_OK)
}

pub fn run_sweep(cfg: &RunConfig) -> Result<i32> {
    let report = checks::sweep_report(cfg)?;
    let checks = checks::sweep_checks(&report);
    let pass = !checks.iter().any(Check::is_failure);
    let dir = output_dir(cfg)?;
    write_csv(&dir.join("sweep.csv"), report.rows.iter().cloned().map(SweepCsvRow::from))?;
    print_checks(&checks);
    write_json(
        &dir.join("sweep.json"),
        &SweepFile {
            config: cfg.clone(),
            report,
            checks,
            pass,
        },
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
}

#[derive(Debug, Serialize)]
struct SweepCsvRow {
    eta: f64,
    trace_distance: f64,
    max_eigenvalue_diff: f64,
    entropy_diff: f64,
    log_trace_distance: f64,
    entropy_gap: f64,
    free_energy: f64,
    iterations: usize,
    error: String,
}

impl From<crate::solvers::SweepRow> for SweepCsvRow {
    fn from(r: crate::solvers::SweepRow) -> Self {
        Self {
            eta: r.eta,
            trace_distance: r.trace_distance,
            max_eigenvalue_diff: r.max_eigenvalue_diff,
            entropy_diff: r.entropy_diff,
            log_trace_distance: r.log_trace_distance,
            entropy_gap: r.entropy_gap,
            free_energy: r.free_energy,
            iterations: r.iterations,
            error: r.error.unwrap_or_default(),
        }
    }
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let status = match (&c.skipped, c.pass) {
            (Some(_), _) => "SKIP",
            (None, true) => "PASS",
            (None, false) => "FAIL",
        };
        let value = c.value.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!("{status} {:<38} {value}", c.name);
    }
}

//! Convergence of the regularized minimizers `ρ_η` to `ρ★` as `η → 0`.

use serde::{Deserialize, Serialize};

use super::{solve_dual, solve_primal, trace_norm, trace_distance, DualOptions, Equilibrium, PrimalOptions, Problem};
use crate::error::Result;
use crate::functionals::{entropy_sum, EntropySpec};
use crate::state::{xlogx, DensityMatrix};

/// Number of leading eigenvalues compared in [`SweepRow::max_eigenvalue_diff`].
pub const SWEEP_MODES: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    /// `‖ρ_η − ρ★‖₁`
    pub trace_distance: f64,
    /// `max_{p ≤ 10} |ρ_{p,η} − ρ_p|`
    pub max_eigenvalue_diff: f64,
    /// `|Tr β_η(ρ_η) − Tr β(ρ★)|`
    pub entropy_diff: f64,
    /// `‖ρ_η log(η + ρ_η) − ρ★ log ρ★‖₁`
    pub log_trace_distance: f64,
    /// `S_η(ρ★) − S(ρ★)`
    pub entropy_gap: f64,
    pub free_energy: f64,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reference_free_energy: f64,
    /// One row per `η`, in the order given, followed by the `η = 0` row.
    pub rows: Vec<SweepRow>,
}

impl ConvergenceReport {
    /// Rows with `η > 0` that solved successfully.
    pub fn solved(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.eta > 0.0 && r.error.is_none())
    }
}

/// `η_j = 2^{−j}` for `j` in the given range.
pub fn dyadic_etas(j: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    j.map(|k| 2f64.powi(-k)).collect()
}

fn log_operator(rho: &DensityMatrix, eta: f64) -> nalgebra::DMatrix<f64> {
    let h = rho.grid().spacing();
    if eta > 0.0 {
        h * rho.kernel_of(|x| x * (eta + x).ln())
    } else {
        h * rho.kernel_of(xlogx)
    }
}

fn row(eta: f64, eq: &Equilibrium, reference: &Equilibrium) -> Result<SweepRow> {
    let plain = EntropySpec { eta: 0.0, ..eq.entropy };
    let reg = EntropySpec { eta, ..eq.entropy };
    let rho = &eq.rho;
    let star = &reference.rho;
    let modes = SWEEP_MODES.min(rho.dim());
    let max_eigenvalue_diff = (0..modes)
        .map(|p| (rho.eigenvalues()[p] - star.eigenvalues()[p]).abs())
        .fold(0.0, f64::max);
    let s_star = entropy_sum(star, &plain)?;
    Ok(SweepRow {
        eta,
        trace_distance: trace_distance(rho, star),
        max_eigenvalue_diff,
        entropy_diff: (entropy_sum(rho, &reg)? - s_star).abs(),
        log_trace_distance: trace_norm(&(log_operator(rho, eta) - log_operator(star, 0.0))),
        entropy_gap: entropy_sum(star, &reg)? - s_star,
        free_energy: eq.diagnostics.f_value(),
        iterations: eq.diagnostics.iterations,
        error: None,
    })
}

/// Solves the `F_η` problems along `etas` by primal descent, each warm-started
/// from the previous solution, and compares against the dual `η = 0`
/// reference.
pub fn sweep_eta(
    problem: &Problem,
    etas: &[f64],
    dual: &DualOptions,
    primal: &PrimalOptions,
) -> Result<ConvergenceReport> {
    let base = EntropySpec {
        eta: 0.0,
        ..problem.entropy
    };
    let reference = solve_dual(&problem.with_entropy(base)?, dual)?;
    let mut rows = Vec::with_capacity(etas.len() + 1);
    let mut start = reference.rho.clone();
    for &eta in etas {
        let outcome = problem.with_entropy(base.with_eta(eta)).and_then(|p| {
            let opts = PrimalOptions {
                start: Some(start.clone()),
                ..primal.clone()
            };
            solve_primal(&p, &opts)
        });
        match outcome.and_then(|eq| row(eta, &eq, &reference).map(|r| (r, eq))) {
            Ok((r, eq)) => {
                start = eq.rho;
                rows.push(r);
            }
            Err(e) => rows.push(SweepRow {
                eta,
                trace_distance: f64::NAN,
                max_eigenvalue_diff: f64::NAN,
                entropy_diff: f64::NAN,
                log_trace_distance: f64::NAN,
                entropy_gap: f64::NAN,
                free_energy: f64::NAN,
                iterations: 0,
                error: Some(e.to_string()),
            }),
        }
    }
    rows.push(row(0.0, &reference, &reference)?);
    Ok(ConvergenceReport {
        reference_free_energy: reference.diagnostics.f_value(),
        rows,
    })
}

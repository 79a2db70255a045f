//! Minimizers of the constrained free energy.
//!
//! The dual potential `A` of an equilibrium satisfies
//! `ρ = g((L − diag A)/T)`, with `g(λ) = e^{−λ}` (Boltzmann),
//! `g(λ) = 1/(1 + e^{λ})` (Fermi-Dirac) or `g(λ) = max(e^{−λ} − η, 0)`
//! for the regularized entropy.

mod dual;
mod oracle;
mod primal;
mod sweep;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{free_energy, EntropySpec, FreeEnergy};
use crate::grid::{laplacian, Grid};
use crate::profile::ConstraintProfile;
use crate::spectral::{sym_eigen, SymEigen};
use crate::state::{moments, DensityMatrix, Moments};

pub use dual::{solve_dual, DualOptions};
pub use oracle::{oracle_minimize, oracle_scan_two_point, ORACLE_MAX_POINTS};
pub use primal::{descent_step, solve_primal, PrimalOptions};
pub use sweep::{dyadic_etas, sweep_eta, ConvergenceReport, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dual,
    Primal,
    Oracle,
}

/// `min F(ρ)` over states with `n[ρ] = target.n`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub target: ConstraintProfile,
    pub entropy: EntropySpec,
}

impl Problem {
    pub fn new(grid: Grid, target: ConstraintProfile, entropy: EntropySpec) -> Result<Self> {
        if target.len() != grid.num_points() {
            return Err(Error::Dimension {
                expected: grid.num_points(),
                got: target.len(),
            });
        }
        if (target.mass - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("target mass must be 1, got {}", target.mass)));
        }
        entropy.validate()?;
        Ok(Self {
            grid,
            target,
            entropy,
        })
    }

    pub fn with_entropy(&self, entropy: EntropySpec) -> Result<Self> {
        Self::new(self.grid.clone(), self.target.clone(), entropy)
    }

    /// `H = L − diag(a)`.
    pub fn hamiltonian(&self, a: &[f64]) -> DMatrix<f64> {
        let mut h = laplacian(&self.grid).matrix;
        for (i, v) in a.iter().enumerate() {
            h[(i, i)] -= v;
        }
        h
    }

    /// The state `g(H/T)` built directly from the spectrum of `H`.
    pub fn gibbs_state(&self, a: &[f64]) -> Result<DensityMatrix> {
        let eig = sym_eigen(&self.hamiltonian(a));
        self.state_from_eigen(&eig)
    }

    pub(crate) fn state_from_eigen(&self, eig: &SymEigen) -> Result<DensityMatrix> {
        let t = self.entropy.temperature;
        let occ: Vec<f64> = eig.values.iter().map(|l| self.entropy.occupation(l / t)).collect();
        let vectors = &eig.vectors / self.grid.spacing().sqrt();
        DensityMatrix::from_spectrum(&self.grid, occ, vectors)
    }

    pub fn constraint_residual(&self, rho: &DensityMatrix) -> f64 {
        max_abs_diff(&rho.local_density(), &self.target.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub solver: SolverKind,
    pub iterations: usize,
    pub final_constraint_residual: f64,
    pub final_gradient_norm: f64,
    pub free_energy: FreeEnergy,
    pub residual_history: Vec<f64>,
    pub warning: Option<String>,
}

impl Diagnostics {
    pub fn f_value(&self) -> f64 {
        self.free_energy.free_energy
    }
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub rho: DensityMatrix,
    /// Dual potential `A` with `ρ = g((L − diag A)/T)`.
    pub dual_potential: Vec<f64>,
    pub moments: Moments,
    pub entropy: EntropySpec,
    pub diagnostics: Diagnostics,
}

impl Equilibrium {
    /// `−log ρ_p` in the order of [`DensityMatrix::eigenvalues`]. Dual
    /// Boltzmann states are `e^{−H/T}/Z`, so the values come from the spectrum
    /// of `H` and stay finite where `ρ_p` underflows; otherwise they are taken
    /// from the eigenvalues directly.
    pub fn neg_log_spectrum(&self) -> Vec<f64> {
        let plain = self.entropy.kind == crate::functionals::EntropyKind::Boltzmann && self.entropy.eta == 0.0;
        if self.diagnostics.solver != SolverKind::Dual || !plain {
            return self.rho.eigenvalues().iter().map(|x| -x.ln()).collect();
        }
        let t = self.entropy.temperature;
        let mut h = laplacian(self.rho.grid()).matrix;
        for (i, a) in self.dual_potential.iter().enumerate() {
            h[(i, i)] -= a;
        }
        let m: Vec<f64> = sym_eigen(&h).values.iter().map(|l| l / t).collect();
        let m0 = m.iter().copied().fold(f64::INFINITY, f64::min);
        let log_z = -m0 + m.iter().map(|x| (-(x - m0)).exp()).sum::<f64>().ln();
        m.iter().map(|x| x + log_z).collect()
    }

    /// Every `ρ_p > 0`, certified through [`Self::neg_log_spectrum`].
    pub fn is_full_rank(&self) -> bool {
        self.neg_log_spectrum().iter().all(|v| v.is_finite())
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    problem: &Problem,
    rho: DensityMatrix,
    dual_potential: Vec<f64>,
    solver: SolverKind,
    iterations: usize,
    gradient_norm: f64,
    residual_history: Vec<f64>,
    warning: Option<String>,
) -> Result<Equilibrium> {
    let fe = free_energy(&rho, &problem.entropy)?;
    let diagnostics = Diagnostics {
        solver,
        iterations,
        final_constraint_residual: problem.constraint_residual(&rho),
        final_gradient_norm: gradient_norm,
        free_energy: fe,
        residual_history,
        warning,
    };
    Ok(Equilibrium {
        moments: moments(&rho),
        rho,
        dual_potential,
        entropy: problem.entropy,
        diagnostics,
    })
}

/// Sum of absolute eigenvalues of a symmetric matrix.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).values.iter().map(|v| v.abs()).sum()
}

/// `‖ρ_a − ρ_b‖₁`, the trace norm of the operator difference.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let h = a.grid().spacing();
    trace_norm(&(h * (a.kernel() - b.kernel())))
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Shift `c` such that `Σ_p g((λ_p − c)/T) = 1`.
pub(crate) fn trace_shift(values: &[f64], spec: &EntropySpec) -> f64 {
    let t = spec.temperature;
    let total = |c: f64| -> f64 { values.iter().map(|l| spec.occupation((l - c) / t)).sum() };
    if spec.eta == 0.0 && spec.kind == crate::functionals::EntropyKind::Boltzmann {
        let m = values.iter().map(|l| -l / t).fold(f64::NEG_INFINITY, f64::max);
        let lse = m + values.iter().map(|l| (-l / t - m).exp()).sum::<f64>().ln();
        return -t * lse;
    }
    let lo0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi0 = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0 - 60.0 * t, hi0 + 60.0 * t);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

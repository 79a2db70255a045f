//! Projected Newton descent on the operator `ρ` with the rescaling retraction.
//!
//! Each step solves the Newton system of `F` on the tangent space
//! `{X = Xᵀ : diag X = 0}` of the constraint, using the entropy Hessian in
//! the eigenbasis of `ρ` (Daleckii–Krein weights `W`). The trial point
//! `ρ + τX` is projected onto the PSD cone and rescaled back onto the
//! constraint, and `τ` is chosen by Armijo backtracking on `F`.

use nalgebra::{DMatrix, DVector};

use super::{finish, trace_shift, Equilibrium, Problem, SolverKind};
use crate::admissible::rescale_kernel;
use crate::error::{Error, Result};
use crate::functionals::{free_energy, EntropyKind, EntropySpec};
use crate::grid::laplacian;
use crate::spectral::{diagonal_frechet, divided_differences, spectral_apply, sym_eigen};
use crate::state::{spectral_decompose, DensityMatrix};

#[derive(Debug, Clone)]
pub struct PrimalOptions {
    /// Stop when the Newton decrement `δ = √(−⟨∇F, X⟩)` is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// First trial step of each line search.
    pub step0: f64,
    /// Admissible starting state; defaults to the rescaled Gibbs state of
    /// `L − T log n`.
    pub start: Option<DensityMatrix>,
}

impl Default for PrimalOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            step0: 1.0,
            start: None,
        }
    }
}

/// Eigenvalues below this are treated as zero when forming `β'` and the
/// Hessian weights, and may enter the active set.
pub const ACTIVE_FLOOR: f64 = 1e-14;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
/// Relative size of `F` differences indistinguishable from round-off.
const NOISE: f64 = 1e-13;

fn floored(x: f64, spec: &EntropySpec) -> f64 {
    match spec.kind {
        EntropyKind::Boltzmann => x.max(ACTIVE_FLOOR),
        EntropyKind::FermiDirac => x.clamp(ACTIVE_FLOOR, 1.0 - ACTIVE_FLOOR),
    }
}

/// `W_ab = 1 / (T β'[ρ_a, ρ_b])`, inverse divided differences of `β'`.
fn hessian_weights(rho: &[f64], spec: &EntropySpec) -> DMatrix<f64> {
    let t = spec.temperature;
    let x: Vec<f64> = rho.iter().map(|&v| floored(v, spec)).collect();
    let n = x.len();
    match spec.kind {
        EntropyKind::Boltzmann => DMatrix::from_fn(n, n, |a, b| {
            let (u, v) = (x[a] + spec.eta, x[b] + spec.eta);
            let r = u / v;
            let w = if (r - 1.0).abs() < 1e-6 {
                0.5 * (u + v)
            } else {
                (u - v) / r.ln()
            };
            w / t
        }),
        EntropyKind::FermiDirac => {
            let gamma = divided_differences(&x, |v| spec.derivative(v), |v| 1.0 / spec.inverse_curvature(v));
            gamma.map(|g| 1.0 / (t * g))
        }
    }
}

struct Step {
    direction: DMatrix<f64>,
    potential: Vec<f64>,
    decrement2: f64,
}

fn newton_step(problem: &Problem, l: &DMatrix<f64>, rho: &DensityMatrix) -> Result<Step> {
    let spec = problem.entropy;
    let t = spec.temperature;
    let h = problem.grid.spacing();
    let n = rho.dim();
    let mut u = rho.eigenvectors() * h.sqrt();
    let vals = rho.eigenvalues();
    let gradient = |u: &DMatrix<f64>| {
        let mut g = u.transpose() * l * u;
        for (a, &v) in vals.iter().enumerate() {
            g[(a, a)] += t * spec.derivative(floored(v, &spec));
        }
        g
    };
    let mut g = gradient(&u);
    let w0 = hessian_weights(vals, &spec);
    let bound = ACTIVE_FLOOR.max(spec.eta);
    let null: Vec<usize> = (0..n).filter(|&a| vals[a] <= ACTIVE_FLOOR).collect();
    let mut active = vec![false; n];
    let mut rounds = 0;
    loop {
        rounds += 1;
        // Active modes sit near the boundary of the cone and are driven to
        // zero; the Newton model acts on the remaining block.
        let mut w = w0.clone();
        // Off-diagonal moves inside the kernel of ρ would leave the cone.
        for &a in &null {
            for &b in &null {
                if a != b {
                    w[(a, b)] = 0.0;
                }
            }
        }
        let mut forced = DMatrix::zeros(n, n);
        for a in 0..n {
            if active[a] {
                forced[(a, a)] = -vals[a];
                for b in 0..n {
                    if active[b] {
                        w[(a, b)] = 0.0;
                    }
                }
            }
        }
        let rhs = w.component_mul(&g) - &forced;
        let b = DVector::from_fn(n, |i, _| (u.row(i) * &rhs * u.row(i).transpose())[(0, 0)]);
        let s = diagonal_frechet(&u, &w);
        let mu = s
            .clone()
            .cholesky()
            .map(|c| c.solve(&b))
            .or_else(|| s.lu().solve(&b))
            .ok_or_else(|| Error::SingularJacobian("constraint system of the Newton step".into()))?;
        let mut mu_t = u.transpose() * DMatrix::from_diagonal(&mu) * &u;
        mu_t -= &g;
        // Inside the kernel of ρ any basis is an eigenbasis; an active block
        // is rotated so that a mode the model wants to grow can be released.
        let parked: Vec<usize> = null.iter().copied().filter(|&a| active[a]).collect();
        if rounds <= n && !parked.is_empty() {
            let k = parked.len();
            let block = DMatrix::from_fn(k, k, |i, j| mu_t[(parked[i], parked[j])]);
            let eig = sym_eigen(&block);
            if eig.values[k - 1] > 0.0 {
                let cols = DMatrix::from_fn(n, k, |i, j| u[(i, parked[j])]) * &eig.vectors;
                for (j, &a) in parked.iter().enumerate() {
                    u.set_column(a, &cols.column(j));
                    if eig.values[j] > 0.0 {
                        active[a] = false;
                    }
                }
                g = gradient(&u);
                continue;
            }
        }
        let xt = w.component_mul(&mu_t) + &forced;
        let mut changed = false;
        for a in 0..n {
            if !active[a] && vals[a] <= bound && vals[a] + xt[(a, a)] < 0.0 {
                active[a] = true;
                changed = true;
            } else if active[a] && mu_t[(a, a)] > 0.0 && rounds <= n && vals[a] > ACTIVE_FLOOR {
                active[a] = false;
                changed = true;
            }
        }
        if !changed || rounds > 2 * n {
            let mut x = &u * &xt * u.transpose();
            for i in 0..n {
                x[(i, i)] = 0.0;
            }
            let x = 0.5 * (&x + x.transpose());
            let decrement2 = (-g.component_mul(&xt).sum()).max(0.0);
            return Ok(Step {
                direction: x,
                potential: mu.as_slice().to_vec(),
                decrement2,
            });
        }
    }
}

/// PSD part of `m`, rescaled onto the constraint, as a state.
fn retract(problem: &Problem, m: &DMatrix<f64>) -> Result<DensityMatrix> {
    let h = problem.grid.spacing();
    let eig = sym_eigen(m);
    let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let k = spectral_apply(&eig.vectors, &clipped) / h;
    let k = rescale_kernel(&k, &problem.target)?;
    spectral_decompose(&k, &problem.grid)
}

/// Gibbs state of `L − T log n`, normalized and rescaled onto the constraint.
pub fn default_start(problem: &Problem) -> Result<DensityMatrix> {
    let t = problem.entropy.temperature;
    let plain = EntropySpec {
        eta: 0.0,
        ..problem.entropy
    };
    let mut a: Vec<f64> = problem.target.n.iter().map(|v| t * v.ln()).collect();
    let eig = sym_eigen(&problem.hamiltonian(&a));
    let c = trace_shift(&eig.values, &plain);
    a.iter_mut().for_each(|v| *v += c);
    let unplain = problem.with_entropy(plain)?;
    let gibbs = unplain.gibbs_state(&a)?;
    let k = rescale_kernel(gibbs.kernel(), &problem.target)?;
    spectral_decompose(&k, &problem.grid)
}

fn line_search(problem: &Problem, rho: &DensityMatrix, step: &Step, f: f64, step0: f64) -> Result<Option<(DensityMatrix, f64)>> {
    let m = problem.grid.spacing() * rho.kernel();
    let mut tau = step0;
    while tau >= MIN_STEP {
        let trial = &m + tau * &step.direction;
        if let Ok(next) = retract(problem, &trial) {
            if let Ok(fe) = free_energy(&next, &problem.entropy) {
                if fe.free_energy <= f - ARMIJO * tau * step.decrement2 {
                    return Ok(Some((next, fe.free_energy)));
                }
            }
        }
        tau *= 0.5;
    }
    Ok(None)
}

/// One projected Newton step with Armijo backtracking from `rho`, which must
/// satisfy the constraint. Returns the accepted state and its free energy, or
/// `None` when no step length in the search decreases `F`.
pub fn descent_step(problem: &Problem, rho: &DensityMatrix, step0: f64) -> Result<Option<(DensityMatrix, f64)>> {
    let l = laplacian(&problem.grid).matrix;
    let f = free_energy(rho, &problem.entropy)?.free_energy;
    let step = newton_step(problem, &l, rho)?;
    line_search(problem, rho, &step, f, step0)
}

/// Projected Newton descent for `min F` (or `F_η`) over the constraint set.
pub fn solve_primal(problem: &Problem, opts: &PrimalOptions) -> Result<Equilibrium> {
    problem.entropy.validate()?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 || !(opts.step0 > 0.0) {
        return Err(Error::Config("primal options need tol > 0, max_iter > 0, step0 > 0".into()));
    }
    let l = laplacian(&problem.grid).matrix;
    let mut rho = match &opts.start {
        Some(s) => {
            let k = rescale_kernel(s.kernel(), &problem.target)?;
            spectral_decompose(&k, &problem.grid)?
        }
        None => default_start(problem)?,
    };
    let mut f = free_energy(&rho, &problem.entropy)?.free_energy;
    let mut history = Vec::new();
    let mut warning = None;
    let mut iterations = 0;
    let step = loop {
        let step = newton_step(problem, &l, &rho)?;
        let delta = step.decrement2.sqrt();
        history.push(delta);
        if delta <= opts.tol {
            break step;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: delta,
                history,
            });
        }
        iterations += 1;
        let local = step.decrement2 <= 1e3 * NOISE * f.abs().max(1.0);
        match line_search(problem, &rho, &step, f, opts.step0)? {
            Some((next, ft)) => {
                rho = next;
                f = ft;
            }
            None => {
                warning = Some(if local {
                    format!("line search stalled at round-off level (decrement {delta:.3e})")
                } else {
                    format!("line search failed at iteration {iterations} (decrement {delta:.3e}); returning best iterate")
                });
                break newton_step(problem, &l, &rho)?;
            }
        }
    };
    let delta = step.decrement2.sqrt();
    finish(
        problem,
        rho,
        step.potential,
        SolverKind::Primal,
        iterations,
        delta,
        history,
        warning,
    )
}

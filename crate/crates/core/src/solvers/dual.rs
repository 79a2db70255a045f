//! Newton iteration on the dual potential.

use nalgebra::{DMatrix, DVector};

use super::{finish, trace_shift, Equilibrium, Problem, SolverKind};
use crate::error::{Error, Result};
use crate::spectral::{diagonal_frechet, divided_differences, sym_eigen, SymEigen};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    /// Stop when `max_i |n[ρ]_i − n_i| ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step length of the line search.
    pub damping: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            damping: 1.0,
        }
    }
}

const POLISH_STEPS: usize = 3;

struct Iterate {
    a: Vec<f64>,
    eig: SymEigen,
    residual: Vec<f64>,
    norm2: f64,
    norm_inf: f64,
}

fn evaluate(problem: &Problem, a: Vec<f64>) -> Option<Iterate> {
    let t = problem.entropy.temperature;
    let h = problem.grid.spacing();
    let eig = sym_eigen(&problem.hamiltonian(&a));
    let occ: Vec<f64> = eig.values.iter().map(|l| problem.entropy.occupation(l / t)).collect();
    if occ.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let n = problem.grid.num_points();
    let residual: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = (0..n).map(|p| eig.vectors[(i, p)].powi(2) * occ[p]).sum();
            d / h - problem.target.n[i]
        })
        .collect();
    if residual.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let norm2 = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_inf = residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Some(Iterate {
        a,
        eig,
        residual,
        norm2,
        norm_inf,
    })
}

fn newton_direction(problem: &Problem, it: &Iterate) -> Result<Vec<f64>> {
    let t = problem.entropy.temperature;
    let h = problem.grid.spacing();
    let spec = problem.entropy;
    let gamma = divided_differences(
        &it.eig.values,
        |l| spec.occupation(l / t),
        |l| spec.occupation_derivative(l / t) / t,
    );
    let jac: DMatrix<f64> = -diagonal_frechet(&it.eig.vectors, &gamma) / h;
    let rhs = -DVector::from_column_slice(&it.residual);
    let step = jac
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularJacobian(format!("residual {:.3e}", it.norm_inf)))?;
    if step.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian(format!(
            "non-finite Newton step at residual {:.3e}",
            it.norm_inf
        )));
    }
    Ok(step.as_slice().to_vec())
}

/// Damped Newton iteration on `A` for `diag g((L − diag A)/T) / h = n`.
pub fn solve_dual(problem: &Problem, opts: &DualOptions) -> Result<Equilibrium> {
    problem.entropy.validate()?;
    if problem.entropy.is_regularized() {
        return Err(Error::Config("the dual solver handles eta = 0 only".into()));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Config("dual options need tol > 0, max_iter > 0, damping in (0, 1]".into()));
    }
    let t = problem.entropy.temperature;
    let mut a: Vec<f64> = problem.target.n.iter().map(|v| t * v.ln()).collect();
    let eig0 = sym_eigen(&problem.hamiltonian(&a));
    let c = trace_shift(&eig0.values, &problem.entropy);
    a.iter_mut().for_each(|v| *v += c);
    let mut it = evaluate(problem, a).ok_or_else(|| Error::Degenerate("initial guess overflows".into()))?;

    let mut history = vec![it.norm_inf];
    let mut iterations = 0;
    let mut polished = 0;
    let mut last_step = 0.0;
    loop {
        if it.norm_inf <= opts.tol && polished >= POLISH_STEPS {
            break;
        }
        if iterations >= opts.max_iter {
            if it.norm_inf <= opts.tol {
                break;
            }
            return Err(Error::NoConvergence {
                iterations,
                residual: it.norm_inf,
                history,
            });
        }
        let converged = it.norm_inf <= opts.tol;
        let dir = match newton_direction(problem, &it) {
            Ok(d) => d,
            Err(_) if converged => break,
            Err(e) => return Err(e),
        };
        let mut s = opts.damping;
        let mut accepted = None;
        while s >= 1e-12 {
            let trial: Vec<f64> = it.a.iter().zip(&dir).map(|(x, d)| x + s * d).collect();
            if let Some(next) = evaluate(problem, trial) {
                if next.norm2 <= (1.0 - 1e-4 * s) * it.norm2 {
                    accepted = Some(next);
                    break;
                }
            }
            // Polishing only accepts full steps.
            if converged {
                break;
            }
            s *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some(next) => {
                last_step = s * dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                it = next;
                history.push(it.norm_inf);
                if converged {
                    polished += 1;
                }
            }
            None if converged => break,
            None => {
                return Err(Error::LineSearch {
                    iteration: iterations,
                    residual: it.norm_inf,
                })
            }
        }
    }

    let rho = problem.state_from_eigen(&it.eig)?;
    finish(
        problem,
        rho,
        it.a,
        SolverKind::Dual,
        iterations,
        last_step,
        history,
        None,
    )
}

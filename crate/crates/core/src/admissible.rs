//! Constraint-preserving constructions on the admissible set: rescaling onto
//! `n[ρ] = n`, rank-one and pair perturbation paths, and the regularized test
//! functions `φ_ε`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::state::{spectral_decompose, DensityMatrix, CLAMP_WINDOW, NEGATIVE_LIMIT};

pub use crate::profile::ConstraintProfile;

/// Scaling factors `a_i = √(n_i / K̃_ii)` of the rescaling map.
pub fn rescale_factors(kernel: &DMatrix<f64>, target: &ConstraintProfile) -> Result<Vec<f64>> {
    if kernel.nrows() != target.len() {
        return Err(Error::Dimension {
            expected: target.len(),
            got: kernel.nrows(),
        });
    }
    target
        .n
        .iter()
        .enumerate()
        .map(|(i, &ni)| {
            let d = kernel[(i, i)];
            if d > 1e-300 {
                Ok((ni / d).sqrt())
            } else {
                Err(Error::ZeroDensity { node: i })
            }
        })
        .collect()
}

fn congruence(kernel: &DMatrix<f64>, a: &[f64]) -> DMatrix<f64> {
    let mut out = kernel.clone();
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] *= a[i] * a[j];
        }
    }
    // Symmetrize exactly and pin the diagonal to the target.
    0.5 * (&out + out.transpose())
}

/// Kernel-level rescaling `K ↦ a K a`, returning the rescaled kernel with its
/// diagonal set to `n`.
pub fn rescale_kernel(kernel: &DMatrix<f64>, target: &ConstraintProfile) -> Result<DMatrix<f64>> {
    let a = rescale_factors(kernel, target)?;
    let mut out = congruence(kernel, &a);
    for (i, &ni) in target.n.iter().enumerate() {
        out[(i, i)] = ni;
    }
    Ok(out)
}

/// `a ρ̃ a` with `a = √(n / n[ρ̃])`, so that `n[result] = n`.
pub fn rescale(rho: &DensityMatrix, target: &ConstraintProfile) -> Result<DensityMatrix> {
    let k = rescale_kernel(rho.kernel(), target)?;
    spectral_decompose(&k, rho.grid())
}

/// `a(t)(ρ + t|φ⟩⟨φ|)a(t)` for `t ≥ 0`.
pub fn perturb_rank_one(
    rho: &DensityMatrix,
    phi: &[f64],
    t: f64,
    target: &ConstraintProfile,
) -> Result<DensityMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::PerturbationWindow {
            t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    check_len(rho.grid(), phi)?;
    if t == 0.0 || phi.iter().all(|&v| v == 0.0) {
        return Ok(rho.clone());
    }
    let mut k = rho.kernel().clone();
    for j in 0..k.ncols() {
        for i in 0..k.nrows() {
            k[(i, j)] += t * phi[i] * phi[j];
        }
    }
    let k = rescale_kernel(&k, target)?;
    spectral_decompose(&k, rho.grid())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPhase {
    /// `|φ_p⟩⟨φ_q| + |φ_q⟩⟨φ_p|`
    Real,
    /// `i|φ_p⟩⟨φ_q| − i|φ_q⟩⟨φ_p|`
    Imaginary,
}

/// Complex Hermitian density operator, produced by imaginary pair
/// perturbations of a real state.
#[derive(Debug, Clone)]
pub struct HermitianState {
    grid: Grid,
    eigenvalues: Vec<f64>,
    kernel: DMatrix<Complex<f64>>,
}

impl HermitianState {
    pub fn from_kernel(kernel: DMatrix<Complex<f64>>, grid: &Grid) -> Result<Self> {
        let h = grid.spacing();
        let asym = (&kernel - kernel.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > crate::state::SYMMETRY_TOL * kernel.iter().map(|z| z.norm()).fold(1.0, f64::max) {
            return Err(Error::NotSymmetric(asym));
        }
        let herm = (&kernel + kernel.adjoint()).scale(0.5 * h);
        let mut eigenvalues: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        for v in eigenvalues.iter_mut() {
            if *v < -NEGATIVE_LIMIT {
                return Err(Error::NegativeEigenvalue { value: *v });
            }
            if *v < 0.0 && *v >= -CLAMP_WINDOW {
                *v = 0.0;
            }
        }
        Ok(Self {
            grid: grid.clone(),
            eigenvalues,
            kernel,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn kernel(&self) -> &DMatrix<Complex<f64>> {
        &self.kernel
    }

    pub fn local_density(&self) -> Vec<f64> {
        self.kernel.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }
}

/// Output of a pair perturbation: real for the real phase, complex Hermitian
/// for the imaginary phase.
#[derive(Debug, Clone)]
pub enum PerturbedState {
    Real(DensityMatrix),
    Hermitian(HermitianState),
}

impl PerturbedState {
    pub fn local_density(&self) -> Vec<f64> {
        match self {
            PerturbedState::Real(r) => r.local_density(),
            PerturbedState::Hermitian(h) => h.local_density(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            PerturbedState::Real(r) => r.min_eigenvalue(),
            PerturbedState::Hermitian(h) => h.min_eigenvalue(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            PerturbedState::Real(r) => r.trace(),
            PerturbedState::Hermitian(h) => h.trace(),
        }
    }

    pub fn as_real(&self) -> Option<&DensityMatrix> {
        match self {
            PerturbedState::Real(r) => Some(r),
            PerturbedState::Hermitian(_) => None,
        }
    }
}

/// Half-width `t₀ = min(ρ_p, ρ_q)/2` of the admissible window.
pub fn pair_window(rho: &DensityMatrix, p: usize, q: usize) -> f64 {
    0.5 * rho.eigenvalues()[p].min(rho.eigenvalues()[q])
}

fn check_pair(rho: &DensityMatrix, p: usize, q: usize, t: f64, phase: PairPhase) -> Result<()> {
    let n = rho.dim();
    if p >= n || q >= n {
        return Err(Error::Dimension {
            expected: n,
            got: p.max(q) + 1,
        });
    }
    if phase == PairPhase::Imaginary && p == q {
        return Err(Error::Config("imaginary pair perturbation needs p ≠ q".into()));
    }
    let t0 = pair_window(rho, p, q);
    if !(t.abs() <= t0) {
        return Err(Error::PerturbationWindow { t, lo: -t0, hi: t0 });
    }
    Ok(())
}

/// Density `n[ρ + tP] = n + 2t φ_p φ_q` of the real pair perturbation before
/// rescaling; the imaginary phase leaves the density unchanged.
pub fn pair_density(rho: &DensityMatrix, p: usize, q: usize, t: f64, phase: PairPhase) -> Vec<f64> {
    let n = rho.local_density();
    match phase {
        PairPhase::Imaginary => n,
        PairPhase::Real => {
            let v = rho.eigenvectors();
            n.iter()
                .enumerate()
                .map(|(i, ni)| ni + 2.0 * t * v[(i, p)] * v[(i, q)])
                .collect()
        }
    }
}

/// Squared rescaling factors `a(t)² = n / n[ρ + tP]` of a pair perturbation.
pub fn pair_scaling(
    rho: &DensityMatrix,
    p: usize,
    q: usize,
    t: f64,
    phase: PairPhase,
    target: &ConstraintProfile,
) -> Result<Vec<f64>> {
    check_pair(rho, p, q, t, phase)?;
    let nt = pair_density(rho, p, q, t, phase);
    target
        .n
        .iter()
        .zip(&nt)
        .enumerate()
        .map(|(i, (&ni, &d))| if d > 1e-300 { Ok(ni / d) } else { Err(Error::ZeroDensity { node: i }) })
        .collect()
}

/// `a(t)(ρ + tP)a(t)` with `P` built from the eigenpairs `p`, `q` of `ρ`.
pub fn perturb_pair(
    rho: &DensityMatrix,
    p: usize,
    q: usize,
    t: f64,
    phase: PairPhase,
    target: &ConstraintProfile,
) -> Result<PerturbedState> {
    check_pair(rho, p, q, t, phase)?;
    if t == 0.0 {
        return Ok(PerturbedState::Real(rho.clone()));
    }
    let v = rho.eigenvectors();
    let n = rho.dim();
    match phase {
        PairPhase::Real => {
            let mut k = rho.kernel().clone();
            for j in 0..n {
                for i in 0..n {
                    k[(i, j)] += t * (v[(i, p)] * v[(j, q)] + v[(i, q)] * v[(j, p)]);
                }
            }
            let k = rescale_kernel(&k, target)?;
            Ok(PerturbedState::Real(spectral_decompose(&k, rho.grid())?))
        }
        PairPhase::Imaginary => {
            let a = rescale_factors(rho.kernel(), target)?;
            let k = DMatrix::from_fn(n, n, |i, j| {
                let off = t * (v[(i, p)] * v[(j, q)] - v[(i, q)] * v[(j, p)]);
                Complex::new(rho.kernel()[(i, j)], off) * (a[i] * a[j])
            });
            Ok(PerturbedState::Hermitian(HermitianState::from_kernel(k, rho.grid())?))
        }
    }
}

/// `φ_ε = φ √(n / (n + ε|φ|²))`.
pub fn regularize_testfn(phi: &[f64], target: &ConstraintProfile, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }
    if phi.len() != target.len() {
        return Err(Error::Dimension {
            expected: target.len(),
            got: phi.len(),
        });
    }
    Ok(phi
        .iter()
        .zip(&target.n)
        .map(|(&f, &n)| f * (n / (n + eps * f * f)).sqrt())
        .collect())
}

fn check_len(grid: &Grid, phi: &[f64]) -> Result<()> {
    if phi.len() != grid.num_points() {
        return Err(Error::Dimension {
            expected: grid.num_points(),
            got: phi.len(),
        });
    }
    Ok(())
}

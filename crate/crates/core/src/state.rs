//! Discrete density operators and their local moments.
//!
//! A density operator on a grid with spacing `h` is stored through its
//! kernel `K` (acting as `u ↦ h K u`) together with its spectral form.
//! Eigenvectors are orthonormal for `⟨u, v⟩ = h Σ u_i v_i`, so that the
//! local density is simply the kernel diagonal.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::{spectral_apply, sym_eigen};

/// Eigenvalues in `[-CLAMP_WINDOW, 0)` are treated as round-off and set to 0.
pub const CLAMP_WINDOW: f64 = 1e-12;
/// Eigenvalues below `-NEGATIVE_LIMIT` reject the state.
pub const NEGATIVE_LIMIT: f64 = 1e-10;
/// Symmetry tolerance on kernels.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    grid: Grid,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    kernel: DMatrix<f64>,
}

/// Local fields `n[ρ]`, `k[ρ]` and `n[ρ log ρ]` on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: Vec<f64>,
    pub k: Vec<f64>,
    pub s_loc: Vec<f64>,
}

/// `x log x` with `0 log 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x <= 1e-300 {
        0.0
    } else {
        x * x.ln()
    }
}

fn clamp_eigenvalue(v: f64) -> Result<f64> {
    if v < -NEGATIVE_LIMIT {
        Err(Error::NegativeEigenvalue { value: v })
    } else {
        Ok(v.max(0.0))
    }
}

impl DensityMatrix {
    /// Builds a state from eigenvalues and `h`-orthonormal eigenvectors.
    ///
    /// The pairs are reordered so that eigenvalues are nonincreasing.
    pub fn from_spectrum(grid: &Grid, eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let n = grid.num_points();
        if eigenvalues.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: eigenvalues.len(),
            });
        }
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: eigenvectors.nrows(),
            });
        }
        let gram = grid.spacing() * eigenvectors.transpose() * &eigenvectors;
        let ortho = (gram - DMatrix::<f64>::identity(n, n)).amax();
        if ortho > 1e-10 {
            return Err(Error::Degenerate(format!(
                "eigenvectors are not orthonormal (defect {ortho:.3e})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let mut values = Vec::with_capacity(n);
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            values.push(clamp_eigenvalue(eigenvalues[src])?);
            vectors.set_column(dst, &eigenvectors.column(src));
        }
        let kernel = spectral_apply(&vectors, &values);
        Ok(Self {
            grid: grid.clone(),
            eigenvalues: values,
            eigenvectors: vectors,
            kernel,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Nonincreasing eigenvalues `ρ_p`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors `φ_p`, normalized with the grid weight.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, p: usize) -> Vec<f64> {
        self.eigenvectors.column(p).iter().copied().collect()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Matrix of the operator `u ↦ h K u`.
    pub fn operator(&self) -> DMatrix<f64> {
        self.grid.spacing() * &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// Kernel of `f(ρ)` for a scalar function applied to the spectrum.
    pub fn kernel_of(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        spectral_apply(&self.eigenvectors, &vals)
    }

    /// Local density `n[ρ]_i = K_ii`.
    pub fn local_density(&self) -> Vec<f64> {
        self.kernel.diagonal().iter().copied().collect()
    }

    /// Kinetic energy density on edges, `Σ_p ρ_p |(Dφ_p)_e|²`.
    pub fn kinetic_edge_density(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.num_edges()];
        for (p, &rho) in self.eigenvalues.iter().enumerate() {
            if rho == 0.0 {
                continue;
            }
            let col: Vec<f64> = self.eigenvectors.column(p).iter().copied().collect();
            for (o, d) in out.iter_mut().zip(g.diff(&col)) {
                *o += rho * d * d;
            }
        }
        out
    }

    /// Local field `Σ_p f(ρ_p) |φ_p(x_i)|²`.
    pub fn local_field(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.dim();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        (0..n)
            .map(|i| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(p, w)| w * self.eigenvectors[(i, p)].powi(2))
                    .sum()
            })
            .collect()
    }
}

/// Eigendecomposition of the operator `u ↦ h K u`.
pub fn spectral_decompose(kernel: &DMatrix<f64>, grid: &Grid) -> Result<DensityMatrix> {
    let n = grid.num_points();
    if kernel.nrows() != n || kernel.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: kernel.nrows(),
        });
    }
    let asym = (kernel - kernel.transpose()).amax();
    if asym > SYMMETRY_TOL * kernel.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let h = grid.spacing();
    let eig = sym_eigen(&(h * kernel));
    let vectors = eig.vectors / h.sqrt();
    DensityMatrix::from_spectrum(grid, eig.values, vectors)
}

/// `K = Σ_p ρ_p φ_p φ_pᵀ`.
pub fn assemble_kernel(rho: &DensityMatrix) -> DMatrix<f64> {
    spectral_apply(rho.eigenvectors(), rho.eigenvalues())
}

/// Local density, kinetic energy density (adjacent-edge mean) and local
/// entropy density of a state.
pub fn moments(rho: &DensityMatrix) -> Moments {
    let n = rho.local_density();
    let k = rho.grid().edge_to_node(&rho.kinetic_edge_density());
    let s_loc = rho.local_field(xlogx);
    Moments { n, k, s_loc }
}

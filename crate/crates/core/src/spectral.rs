//! Dense symmetric eigendecompositions and spectral calculus.

use nalgebra::DMatrix;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors as
/// Euclidean-orthonormal columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // Fix the sign so that the largest-magnitude entry is positive.
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    SymEigen { values, vectors }
}

/// `U diag(f(λ)) Uᵀ`.
pub fn spectral_apply(u: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let mut scaled = u.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * u.transpose()
}

/// First divided differences `(f(x_a) - f(x_b)) / (x_a - x_b)` of a scalar
/// function on a spectrum, with `f'` at the midpoint when the two points are
/// closer than `1e-8·max(1, |x_a|)`.
pub fn divided_differences<F, G>(x: &[f64], f: F, fprime: G) -> DMatrix<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = x.len();
    let fx: Vec<f64> = x.iter().map(|&v| f(v)).collect();
    DMatrix::from_fn(n, n, |a, b| {
        let (xa, xb) = (x[a], x[b]);
        if (xa - xb).abs() < 1e-8 * xa.abs().max(1.0) {
            fprime(0.5 * (xa + xb))
        } else {
            (fx[a] - fx[b]) / (xa - xb)
        }
    })
}

/// Diagonal response `J_ij = Σ_ab U_ia U_ib Γ_ab U_ja U_jb`.
///
/// This is the derivative of `diag(U (Γ ∘ Uᵀ X U) Uᵀ)` with respect to the
/// diagonal entries of `X`, i.e. the Daleckii–Krein formula restricted to
/// diagonal perturbations and diagonal observations.
pub fn diagonal_frechet(u: &DMatrix<f64>, gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let pairs = n * (n + 1) / 2;
    // Columns u_a ∘ u_b for a <= b, and the same columns weighted by Γ_ab
    // (doubled off the diagonal to account for the (b, a) term).
    let mut z = DMatrix::zeros(n, pairs);
    let mut zw = DMatrix::zeros(n, pairs);
    let mut col = 0;
    for a in 0..n {
        for b in a..n {
            let w = if a == b { gamma[(a, a)] } else { gamma[(a, b)] + gamma[(b, a)] };
            for i in 0..n {
                let v = u[(i, a)] * u[(i, b)];
                z[(i, col)] = v;
                zw[(i, col)] = w * v;
            }
            col += 1;
        }
    }
    let j = z * zw.transpose();
    0.5 * (&j + j.transpose())
}

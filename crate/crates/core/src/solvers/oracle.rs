//! Brute-force minimization over the full feasible set of tiny grids.
//!
//! For `N = 2` the admissible kernels are `[[n₁, c], [c, n₂]]` with
//! `|c| ≤ √(n₁n₂)`; for `N = 3` the three off-diagonal entries are
//! parametrized by correlations `c_ij = r_ij √(n_i n_j)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{finish, Equilibrium, Problem, SolverKind};
use crate::error::{Error, Result};
use crate::functionals::EntropySpec;
use crate::grid::laplacian;
use crate::state::spectral_decompose;

pub const ORACLE_MAX_POINTS: usize = 3;
const SCAN_POINTS: usize = 100_000;
const GRID_3: usize = 200;

/// Objective on correlation parameters; `+∞` outside the PSD cone.
struct Objective {
    n: Vec<f64>,
    l: DMatrix<f64>,
    h: f64,
    spec: EntropySpec,
}

impl Objective {
    fn new(problem: &Problem) -> Self {
        Self {
            n: problem.target.n.clone(),
            l: laplacian(&problem.grid).matrix,
            h: problem.grid.spacing(),
            spec: problem.entropy,
        }
    }

    fn kernel(&self, r: &[f64]) -> DMatrix<f64> {
        let d = self.n.len();
        let mut k = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.n));
        let mut idx = 0;
        for i in 0..d {
            for j in i + 1..d {
                let c = r[idx] * (self.n[i] * self.n[j]).sqrt();
                k[(i, j)] = c;
                k[(j, i)] = c;
                idx += 1;
            }
        }
        k
    }

    fn eval(&self, r: &[f64]) -> f64 {
        if r.iter().any(|v| v.abs() > 1.0) {
            return f64::INFINITY;
        }
        let k = self.kernel(r);
        let m = self.h * &k;
        let energy = self.l.component_mul(&m).sum();
        let eig = match self.n.len() {
            2 => sym2_eigenvalues(&m),
            3 => sym3_eigenvalues(&m),
            _ => unreachable!("oracle dimension checked on entry"),
        };
        let mut s = 0.0;
        for v in eig {
            if v < -1e-14 {
                return f64::INFINITY;
            }
            match self.spec.value(v.max(0.0)) {
                Ok(b) => s += b,
                Err(_) => return f64::INFINITY,
            }
        }
        energy + self.spec.temperature * s
    }
}

fn sym2_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
    vec![mean + rad, mean - rad]
}

/// Closed-form eigenvalues of a symmetric 3×3 matrix (trigonometric method).
fn sym3_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let q = (m[(0, 0)] + m[(1, 1)] + m[(2, 2)]) / 3.0;
    if p1 == 0.0 {
        return vec![m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    }
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = m.clone();
    for i in 0..3 {
        b[(i, i)] -= q;
    }
    let r = (b.determinant() / (2.0 * p.powi(3))).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    vec![e1, 3.0 * q - e1 - e3, e3]
}

/// The scan `c ↦ F` over `SCAN_POINTS` equispaced feasible off-diagonal
/// values of a two-point grid.
pub fn oracle_scan_two_point(problem: &Problem) -> Result<Vec<(f64, f64)>> {
    if problem.grid.num_points() != 2 {
        return Err(Error::Config("the two-point scan needs N = 2".into()));
    }
    let obj = Objective::new(problem);
    let bound = (obj.n[0] * obj.n[1]).sqrt();
    Ok((0..SCAN_POINTS)
        .map(|i| {
            let r = -1.0 + 2.0 * i as f64 / (SCAN_POINTS - 1) as f64;
            (r * bound, obj.eval(&[r]))
        })
        .collect())
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> Vec<f64> {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += if x[i] + step <= 1.0 { step } else { -step };
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..20_000 {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let size = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-13 && (values[dim] - values[0]).abs() < 1e-15 {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|x| x[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
        } else {
            let xc = if fr < values[dim] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < values[dim].min(fr) {
                simplex[dim] = xc;
                values[dim] = fc;
            } else {
                for i in 1..=dim {
                    simplex[i] = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    simplex[best].clone()
}

/// Exhaustive minimization for grids with at most three points.
pub fn oracle_minimize(problem: &Problem) -> Result<Equilibrium> {
    let d = problem.grid.num_points();
    if d > ORACLE_MAX_POINTS {
        return Err(Error::Config(format!(
            "the oracle handles at most {ORACLE_MAX_POINTS} grid points, got {d}"
        )));
    }
    problem.entropy.validate()?;
    let obj = Objective::new(problem);
    let r = if d == 2 {
        let scan: Vec<f64> = (0..SCAN_POINTS)
            .map(|i| -1.0 + 2.0 * i as f64 / (SCAN_POINTS - 1) as f64)
            .collect();
        let (ibest, _) = scan
            .iter()
            .map(|&r| obj.eval(&[r]))
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty scan");
        let lo = scan[ibest.saturating_sub(1)];
        let hi = scan[(ibest + 1).min(SCAN_POINTS - 1)];
        vec![golden_section(|r| obj.eval(&[r]), lo, hi, 1e-12)]
    } else {
        let axis: Vec<f64> = (0..GRID_3)
            .map(|i| -1.0 + 2.0 * i as f64 / (GRID_3 - 1) as f64)
            .collect();
        let (best, _) = axis
            .par_iter()
            .map(|&a| {
                let mut local = ([a, 0.0, 0.0], f64::INFINITY);
                for &b in &axis {
                    for &c in &axis {
                        let v = obj.eval(&[a, b, c]);
                        if v < local.1 {
                            local = ([a, b, c], v);
                        }
                    }
                }
                local
            })
            .reduce(|| ([0.0; 3], f64::INFINITY), |x, y| if y.1 < x.1 { y } else { x });
        nelder_mead(|r| obj.eval(r), &best, 2.0 / (GRID_3 - 1) as f64)
    };
    let k = obj.kernel(&r);
    let rho = spectral_decompose(&k, &problem.grid)?;
    // Potential read off from the stationarity `L + T β'(ρ) = diag A`.
    let t = problem.entropy.temperature;
    let spec = problem.entropy;
    let g = &obj.l + t * obj.h * rho.kernel_of(|x| spec.derivative(x));
    let potential: Vec<f64> = (0..d).map(|i| g[(i, i)]).collect();
    finish(problem, rho, potential, SolverKind::Oracle, 0, 0.0, Vec::new(), None)
}

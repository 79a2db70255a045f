//! Quadratic forms at an equilibrium and the identities they satisfy.
//!
//! Two realizations of `Q★` coexist. The operator form `⟨u, (L − diag A)v⟩/T`
//! uses the dual potential and has eigenpairs `(−log ρ_p, φ_p)` exactly. The
//! integral form
//! `[Σ_e h n_e D(u/√n)_e D(v/√n)_e + h Σ_i (V★ − k/n)_i u_i v_i] / T`
//! is built from the moments alone and agrees with it only as `h → 0`.
//! Edge products are averaged back to nodes by the adjacent-edge mean, and
//! node fields are carried to edges by the mean of the two endpoints.
//!
//! Throughout, `V★ = (|D√n|² − T n[ρ log ρ])/n`, which is the usual
//! nonnegative potential at `T = 1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::admissible::perturb_rank_one;
use crate::error::{Error, Result};
use crate::functionals::{EntropyKind, EntropySpec};
use crate::grid::{laplacian, make_grid, Boundary, Grid};
use crate::profile::{build_profile, ConstraintProfile, ProfileFamily};
use crate::solvers::{solve_dual, DualOptions, Equilibrium, Problem};
use crate::spectral::{spectral_apply, sym_eigen};
use crate::state::DensityMatrix;

/// Fields of an equilibrium entering the quadratic forms.
#[derive(Debug, Clone)]
pub struct QFormContext {
    pub n: Vec<f64>,
    pub sqrt_n: Vec<f64>,
    /// `D√n` on edges.
    pub dsqrt_n: Vec<f64>,
    pub v_star: Vec<f64>,
    pub k_over_n: Vec<f64>,
    /// `ω = 1 + V★ + k/n`.
    pub omega: Vec<f64>,
    /// `(½ L n + k)/n`, the potential of `Q_e`.
    qe_potential: Vec<f64>,
    /// `n` carried to edges.
    n_edge: Vec<f64>,
    laplacian: DMatrix<f64>,
    hamiltonian: DMatrix<f64>,
    temperature: f64,
    rho: DensityMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "eta", rename_all = "snake_case")]
pub enum QForm {
    /// Energy part: `h[uᵀLv − Σ u_i v_i (½(Ln)_i + k_i)/n_i]`.
    Qe,
    QstarIntegral,
    QstarOperator,
    /// `Q_e − T h Σ u_i v_i n[ρ log(η+ρ)]_i / n_i`.
    Qeta(f64),
}

fn node_to_edge(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let n = grid.num_points();
    match grid.boundary() {
        Boundary::Periodic => (0..n).map(|e| 0.5 * (f[e] + f[(e + 1) % n])).collect(),
        Boundary::Dirichlet => (0..=n)
            .map(|e| match e {
                0 => f[0],
                e if e == n => f[n - 1],
                e => 0.5 * (f[e - 1] + f[e]),
            })
            .collect(),
    }
}

impl QFormContext {
    pub fn new(eq: &Equilibrium) -> Result<Self> {
        let grid = eq.rho.grid().clone();
        let t = eq.entropy.temperature;
        let n = eq.moments.n.clone();
        if let Some(i) = n.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::ZeroDensity { node: i });
        }
        let sqrt_n: Vec<f64> = n.iter().map(|v| v.sqrt()).collect();
        let dsqrt_n = grid.diff(&sqrt_n);
        let grad2 = grid.edge_to_node(&dsqrt_n.iter().map(|d| d * d).collect::<Vec<_>>());
        let k = &eq.moments.k;
        let s_loc = &eq.moments.s_loc;
        let v_star: Vec<f64> = (0..n.len()).map(|i| (grad2[i] - t * s_loc[i]) / n[i]).collect();
        let k_over_n: Vec<f64> = k.iter().zip(&n).map(|(k, n)| k / n).collect();
        let omega = v_star.iter().zip(&k_over_n).map(|(v, k)| 1.0 + v + k).collect();
        let lap = laplacian(&grid);
        let ln = lap.apply(&n);
        let qe_potential = (0..n.len()).map(|i| (0.5 * ln[i] + k[i]) / n[i]).collect();
        let mut hamiltonian = lap.matrix.clone();
        for (i, a) in eq.dual_potential.iter().enumerate() {
            hamiltonian[(i, i)] -= a;
        }
        Ok(Self {
            n_edge: node_to_edge(&grid, &n),
            n,
            sqrt_n,
            dsqrt_n,
            v_star,
            k_over_n,
            omega,
            qe_potential,
            laplacian: lap.matrix,
            hamiltonian,
            temperature: t,
            rho: eq.rho.clone(),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n.len() {
            return Err(Error::Dimension {
                expected: self.n.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    fn bilinear(&self, m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        self.grid().spacing() * (u.transpose() * m * v)[(0, 0)]
    }

    fn weighted(&self, w: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let h = self.grid().spacing();
        h * (0..u.len()).map(|i| w[i] * u[i] * v[i]).sum::<f64>()
    }

    /// `Σ_e h n_e D(u/√n)_e D(v/√n)_e`.
    pub fn divergence_part(&self, u: &[f64], v: &[f64]) -> f64 {
        let g = self.grid();
        let du = g.diff(&u.iter().zip(&self.sqrt_n).map(|(a, s)| a / s).collect::<Vec<_>>());
        let dv = g.diff(&v.iter().zip(&self.sqrt_n).map(|(a, s)| a / s).collect::<Vec<_>>());
        g.edge_weight() * (0..du.len()).map(|e| self.n_edge[e] * du[e] * dv[e]).sum::<f64>()
    }

    pub fn qform(&self, u: &[f64], v: &[f64], form: QForm) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let t = self.temperature;
        Ok(match form {
            QForm::Qe => self.bilinear(&self.laplacian, u, v) - self.weighted(&self.qe_potential, u, v),
            QForm::QstarOperator => self.bilinear(&self.hamiltonian, u, v) / t,
            QForm::QstarIntegral => {
                let pot: Vec<f64> = self.v_star.iter().zip(&self.k_over_n).map(|(a, b)| a - b).collect();
                (self.divergence_part(u, v) + self.weighted(&pot, u, v)) / t
            }
            QForm::Qeta(eta) => {
                if !(eta > 0.0) {
                    return Err(Error::Config(format!("Q_eta needs eta > 0, got {eta}")));
                }
                let s_eta = self.rho.local_field(|x| x * (eta + x).ln());
                let pot: Vec<f64> = s_eta.iter().zip(&self.n).map(|(s, n)| s / n).collect();
                self.qform(u, v, QForm::Qe)? - t * self.weighted(&pot, u, v)
            }
        })
    }

    /// Both sides of `h Σ (k/n)|u|² ≤ Σ_e h n_e |D(u/√n)|² + h Σ V★|u|²`.
    pub fn kinetic_bound(&self, u: &[f64]) -> Result<(f64, f64)> {
        self.check(u)?;
        let lhs = self.weighted(&self.k_over_n, u, u);
        let rhs = self.divergence_part(u, u) + self.weighted(&self.v_star, u, u);
        Ok((lhs, rhs))
    }
}

pub fn qform(u: &[f64], v: &[f64], ctx: &QFormContext, form: QForm) -> Result<f64> {
    ctx.qform(u, v, form)
}

/// The moment formula for the chemical potential next to the negated dual
/// potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChemicalPotential {
    /// `−(L√n)/√n + (|D√n|² − T n[ρ log ρ] − k)/n`
    pub moment: Vec<f64>,
    /// `−A_dual`
    pub dual: Vec<f64>,
    /// Node mean of `moment − dual`.
    pub offset: f64,
    /// `max_i |moment_i − dual_i − offset|`
    pub mismatch: f64,
}

pub fn chemical_potential(eq: &Equilibrium) -> Result<ChemicalPotential> {
    let ctx = QFormContext::new(eq)?;
    let grid = ctx.grid();
    let ls = laplacian(grid).apply(&ctx.sqrt_n);
    let grad2 = grid.edge_to_node(&ctx.dsqrt_n.iter().map(|d| d * d).collect::<Vec<_>>());
    let t = eq.entropy.temperature;
    let n = &ctx.n;
    let moment: Vec<f64> = (0..n.len())
        .map(|i| -ls[i] / ctx.sqrt_n[i] + (grad2[i] - t * eq.moments.s_loc[i] - eq.moments.k[i]) / n[i])
        .collect();
    let dual: Vec<f64> = eq.dual_potential.iter().map(|a| -a).collect();
    let offset = moment.iter().zip(&dual).map(|(m, d)| m - d).sum::<f64>() / n.len() as f64;
    let mismatch = moment
        .iter()
        .zip(&dual)
        .map(|(m, d)| (m - d - offset).abs())
        .fold(0.0, f64::max);
    Ok(ChemicalPotential {
        moment,
        dual,
        offset,
        mismatch,
    })
}

fn ln_eigenvalue(rho: &DensityMatrix, p: usize) -> Result<f64> {
    let x = rho.eigenvalues()[p];
    if x > 0.0 {
        Ok(x.ln())
    } else {
        Err(Error::Degenerate(format!("eigenvalue {p} is {x:e}; the state is not full rank")))
    }
}

/// `max_{p,q ≤ P} |Q★_op(φ_p, φ_q) + log(ρ_p) δ_pq|`.
pub fn el_residual(eq: &Equilibrium, p_max: usize) -> Result<f64> {
    let ctx = QFormContext::new(eq)?;
    let top = p_max.min(eq.rho.dim() - 1);
    let phis: Vec<Vec<f64>> = (0..=top).map(|p| eq.rho.eigenvector(p)).collect();
    let mut worst = 0.0_f64;
    for p in 0..=top {
        let lp = ln_eigenvalue(&eq.rho, p)?;
        for q in 0..=top {
            let qv = ctx.qform(&phis[p], &phis[q], QForm::QstarOperator)?;
            let r = if p == q { qv + lp } else { qv };
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// `min Q★_op(φ)` over unit `φ` orthogonal to `φ_0, …, φ_{p−1}`.
pub fn minmax_eigen(eq: &Equilibrium, p: usize) -> Result<f64> {
    let dim = eq.rho.dim();
    if p >= dim {
        return Err(Error::Config(format!("min-max index {p} needs p < N = {dim}")));
    }
    let ctx = QFormContext::new(eq)?;
    let h = eq.rho.grid().spacing();
    let mut proj = DMatrix::<f64>::identity(dim, dim);
    for q in 0..p {
        let v = DVector::from_column_slice(&eq.rho.eigenvector(q)) * h.sqrt();
        proj -= &v * v.transpose();
    }
    let eig = sym_eigen(&proj);
    // Eigenvalue 1 of the projector spans the complement.
    let basis = eig.vectors.columns(p, dim - p).into_owned();
    let reduced = basis.transpose() * &ctx.hamiltonian * &basis / ctx.temperature;
    Ok(sym_eigen(&reduced).values[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HNorm {
    pub hnorm: f64,
    pub qstar: f64,
    pub satisfied: bool,
}

pub const HNORM_SLACK: f64 = 1e-8;

fn h_norm_with(phi: &[f64], eq: &Equilibrium, ctx: &QFormContext, form: QForm) -> Result<HNorm> {
    let g = eq.rho.grid();
    let neg_log = eq.neg_log_spectrum();
    if let Some(p) = neg_log.iter().position(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!("eigenvalue {p} vanishes; the state is not full rank")));
    }
    let mut hnorm = 0.0;
    for (p, l) in neg_log.iter().enumerate() {
        let c = g.inner(&eq.rho.eigenvector(p), phi);
        hnorm += l * c * c;
    }
    let qstar = ctx.qform(phi, phi, form)?;
    Ok(HNorm {
        hnorm,
        qstar,
        satisfied: hnorm <= qstar + HNORM_SLACK,
    })
}

/// `‖φ‖²_𝔥 = −Σ_p log(ρ_p)|⟨φ_p, φ⟩|²` against `Q★_op(φ)`.
pub fn h_norm(phi: &[f64], eq: &Equilibrium) -> Result<HNorm> {
    let ctx = QFormContext::new(eq)?;
    h_norm_with(phi, eq, &ctx, QForm::QstarOperator)
}

/// `‖φ‖²_𝔥` against the integral form of `Q★`.
pub fn h_norm_integral(phi: &[f64], eq: &Equilibrium) -> Result<HNorm> {
    let ctx = QFormContext::new(eq)?;
    h_norm_with(phi, eq, &ctx, QForm::QstarIntegral)
}

/// Steps of the one-sided difference quotients.
pub const FD_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub energy_fd: f64,
    pub energy_exact: f64,
    pub energy_rel_err: f64,
    pub entropy_fd: f64,
    pub entropy_exact: f64,
    pub entropy_rel_err: f64,
}

fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / b.abs().max(1e-300)
    }
}

/// Richardson extrapolation to `t = 0` of quotients taken at steps shrinking
/// by a constant ratio.
fn richardson(values: &[f64], ratio: f64) -> f64 {
    let mut row = values.to_vec();
    let mut factor = ratio;
    while row.len() > 1 {
        row = row.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
        factor *= ratio;
    }
    row[0]
}

fn energy_of(rho: &DensityMatrix, l: &DMatrix<f64>) -> f64 {
    rho.grid().spacing() * l.component_mul(rho.kernel()).sum()
}

/// One-sided derivatives at `t = 0⁺` of `E` and `S_η` along
/// `t ↦ a(t)(ρ + t|φ⟩⟨φ|)a(t)`, against `Q_e(φ)` and the trace formula
/// `⟨φ, log(η+ρ)φ⟩ − h Σ_i (φ_i²/n_i) n[ρ log(η+ρ)]_i`.
pub fn derivative_checks(eq: &Equilibrium, phi: &[f64], eta: f64) -> Result<DerivativeCheck> {
    if !(eta > 0.0) {
        return Err(Error::Config(format!("derivative checks need eta > 0, got {eta}")));
    }
    let ctx = QFormContext::new(eq)?;
    ctx.check(phi)?;
    let spec = EntropySpec {
        kind: EntropyKind::Boltzmann,
        eta,
        temperature: eq.entropy.temperature,
    };
    let target = ConstraintProfile {
        n: ctx.n.clone(),
        sqrt_n: ctx.sqrt_n.clone(),
        grad_sqrt_n: ctx.dsqrt_n.clone(),
        mass: eq.rho.grid().integrate(&ctx.n)?,
        n_floor: 0.0,
    };
    let entropy_of = |rho: &DensityMatrix| -> Result<f64> {
        rho.eigenvalues().iter().map(|&x| spec.value(x)).sum()
    };
    let e0 = energy_of(&eq.rho, &ctx.laplacian);
    let s0 = entropy_of(&eq.rho)?;
    let mut de = Vec::new();
    let mut ds = Vec::new();
    for &t in &FD_STEPS {
        let rt = perturb_rank_one(&eq.rho, phi, t, &target)?;
        de.push((energy_of(&rt, &ctx.laplacian) - e0) / t);
        ds.push((entropy_of(&rt)? - s0) / t);
    }
    let energy_fd = richardson(&de, FD_STEPS[0] / FD_STEPS[1]);
    let entropy_fd = richardson(&ds, FD_STEPS[0] / FD_STEPS[1]);
    let energy_exact = ctx.qform(phi, phi, QForm::Qe)?;
    let g = eq.rho.grid();
    let log_op = g.spacing() * eq.rho.kernel_of(|x| (eta + x).ln());
    let first = ctx.bilinear(&log_op, phi, phi);
    let s_eta = eq.rho.local_field(|x| x * (eta + x).ln());
    let pot: Vec<f64> = s_eta.iter().zip(&ctx.n).map(|(s, n)| s / n).collect();
    let entropy_exact = first - ctx.weighted(&pot, phi, phi);
    Ok(DerivativeCheck {
        energy_fd,
        energy_exact,
        energy_rel_err: rel_err(energy_fd, energy_exact),
        entropy_fd,
        entropy_exact,
        entropy_rel_err: rel_err(entropy_fd, entropy_exact),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellianResidual {
    /// `‖K − kernel(exp(−(L − diag A)/T))‖_F / ‖K‖_F`
    pub operator: f64,
    /// Same with `A` replaced by minus the offset-adjusted moment formula.
    pub moment: f64,
}

fn gibbs_kernel(h_op: &DMatrix<f64>, t: f64, h: f64) -> DMatrix<f64> {
    let eig = sym_eigen(h_op);
    let w: Vec<f64> = eig.values.iter().map(|l| (-l / t).exp()).collect();
    spectral_apply(&eig.vectors, &w) / h
}

pub fn maxwellian_residual(eq: &Equilibrium) -> Result<MaxwellianResidual> {
    if eq.entropy.kind != EntropyKind::Boltzmann || eq.entropy.eta != 0.0 {
        return Err(Error::Config("the Maxwellian residual needs the plain Boltzmann entropy".into()));
    }
    let ctx = QFormContext::new(eq)?;
    let cp = chemical_potential(eq)?;
    let t = ctx.temperature;
    let h = ctx.grid().spacing();
    let k = eq.rho.kernel();
    let norm = k.norm();
    let operator = (k - gibbs_kernel(&ctx.hamiltonian, t, h)).norm() / norm;
    let mut h_mom = ctx.laplacian.clone();
    for (i, m) in cp.moment.iter().enumerate() {
        h_mom[(i, i)] += m - cp.offset;
    }
    let moment = (k - gibbs_kernel(&h_mom, t, h)).norm() / norm;
    Ok(MaxwellianResidual { operator, moment })
}

/// A smooth random node function: a few low Fourier modes on the domain with
/// coefficients decaying like `1/(1+k²)`, so that the same draw is resolved at
/// every grid size.
pub fn smooth_random_function(grid: &Grid, rng: &mut impl Rng, modes: usize) -> Vec<f64> {
    let len = grid.length();
    let coeffs: Vec<(f64, f64)> = (0..modes)
        .map(|k| {
            let s = 1.0 / (1.0 + (k * k) as f64);
            (s * rng.random_range(-1.0..1.0), s * rng.random_range(-1.0..1.0))
        })
        .collect();
    grid.nodes()
        .iter()
        .map(|&x| match grid.boundary() {
            Boundary::Periodic => coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = 2.0 * std::f64::consts::PI * k as f64 * x / len;
                    a * w.cos() + b * w.sin()
                })
                .sum(),
            Boundary::Dirichlet => coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, _))| a * (std::f64::consts::PI * (k + 1) as f64 * x / len).sin())
                .sum(),
        })
        .collect()
}

/// `√n ψ`, a test function whose ratio to `√n` is the smooth `ψ`.
pub fn weighted_by_sqrt_n(n: &[f64], psi: &[f64]) -> Vec<f64> {
    psi.iter().zip(n).map(|(a, n)| a * n.sqrt()).collect()
}

/// `φ / ‖φ‖` in the grid inner product; zero stays zero.
pub fn normalized(grid: &Grid, phi: &[f64]) -> Vec<f64> {
    let norm = grid.inner(phi, phi).sqrt();
    if norm > 0.0 {
        phi.iter().map(|v| v / norm).collect()
    } else {
        phi.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSpec {
    pub levels: Vec<usize>,
    pub length: f64,
    pub boundary: Boundary,
    pub family: ProfileFamily,
    pub floor: f64,
    pub entropy: EntropySpec,
    /// Modes compared between the two realizations of `Q★`.
    pub modes: usize,
    /// Smooth random test functions per level.
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub n: usize,
    pub h: f64,
    pub chemical_mismatch: f64,
    pub maxwellian_moment: f64,
    pub maxwellian_operator: f64,
    /// `max_{p,q ≤ modes} |Q★_int(φ_p,φ_q) − Q★_op(φ_p,φ_q)|`
    pub qstar_gap: f64,
    /// `max (‖φ‖²_𝔥 − Q★_int(φ))₊` over unit smooth test functions.
    pub hnorm_violation: f64,
    /// `max (lhs − rhs)₊` of the kinetic bound over the same functions.
    pub kinetic_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub rows: Vec<RefinementRow>,
    /// Observed orders between consecutive levels, per column.
    pub chemical_order: Vec<f64>,
    pub maxwellian_order: Vec<f64>,
    pub qstar_order: Vec<f64>,
    /// `max_N violation / h` of the integral-form 𝔥 bound.
    pub hnorm_constant: f64,
}

/// `log(e₁/e₂) / log(h₁/h₂)` between consecutive rows.
pub fn observed_orders(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

fn refinement_row(spec: &RefinementSpec, n: usize) -> Result<RefinementRow> {
    let grid = make_grid(n, spec.length, spec.boundary)?;
    let target = build_profile(&grid, &spec.family, spec.floor)?;
    let problem = Problem::new(grid.clone(), target, spec.entropy)?;
    let eq = solve_dual(&problem, &DualOptions::default())?;
    let ctx = QFormContext::new(&eq)?;
    let cp = chemical_potential(&eq)?;
    let mr = maxwellian_residual(&eq)?;
    let top = spec.modes.min(n - 1);
    let phis: Vec<Vec<f64>> = (0..=top).map(|p| eq.rho.eigenvector(p)).collect();
    let mut qstar_gap = 0.0_f64;
    for u in &phis {
        for v in &phis {
            let a = ctx.qform(u, v, QForm::QstarIntegral)?;
            let b = ctx.qform(u, v, QForm::QstarOperator)?;
            qstar_gap = qstar_gap.max((a - b).abs());
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let mut hnorm_violation = 0.0_f64;
    let mut kinetic_violation = 0.0_f64;
    for _ in 0..spec.samples {
        let phi = normalized(&grid, &smooth_random_function(&grid, &mut rng, 5));
        let hn = h_norm_with(&phi, &eq, &ctx, QForm::QstarIntegral)?;
        hnorm_violation = hnorm_violation.max(hn.hnorm - hn.qstar);
        let (lhs, rhs) = ctx.kinetic_bound(&phi)?;
        kinetic_violation = kinetic_violation.max(lhs - rhs);
    }
    Ok(RefinementRow {
        n,
        h: grid.spacing(),
        chemical_mismatch: cp.mismatch,
        maxwellian_moment: mr.moment,
        maxwellian_operator: mr.operator,
        qstar_gap,
        hnorm_violation,
        kinetic_violation,
    })
}

/// Solves the dual problem at each level and tabulates the discretization
/// errors of the moment-based quantities.
pub fn refinement_study(spec: &RefinementSpec) -> Result<RefinementStudy> {
    if spec.levels.len() < 2 {
        return Err(Error::Config("a refinement study needs at least two levels".into()));
    }
    let rows = spec
        .levels
        .iter()
        .map(|&n| refinement_row(spec, n))
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&RefinementRow) -> f64| observed_orders(&h, &rows.iter().map(f).collect::<Vec<_>>());
    let hnorm_constant = rows.iter().map(|r| r.hnorm_violation.max(0.0) / r.h).fold(0.0, f64::max);
    Ok(RefinementStudy {
        chemical_order: col(|r| r.chemical_mismatch),
        maxwellian_order: col(|r| r.maxwellian_moment),
        qstar_order: col(|r| r.qstar_gap),
        hnorm_constant,
        rows,
    })
}

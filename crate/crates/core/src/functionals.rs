//! Entropies, energies and free energies of discrete density operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DIM;
use crate::state::{xlogx, DensityMatrix};

/// Slack constant `C` of the log-Sobolev diagnostic: the gap is accepted
/// down to `-C·h`.
pub const LOG_SOBOLEV_SLACK: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EntropyKind {
    #[default]
    Boltzmann,
    FermiDirac,
}

impl EntropyKind {
    fn name(self) -> &'static str {
        match self {
            EntropyKind::Boltzmann => "boltzmann",
            EntropyKind::FermiDirac => "fermi_dirac",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySpec {
    #[serde(default)]
    pub kind: EntropyKind,
    /// Regularization `η`; zero means the plain entropy.
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_temperature", alias = "T")]
    pub temperature: f64,
}

fn default_temperature() -> f64 {
    1.0
}

impl Default for EntropySpec {
    fn default() -> Self {
        Self::boltzmann()
    }
}

impl EntropySpec {
    pub fn boltzmann() -> Self {
        Self {
            kind: EntropyKind::Boltzmann,
            eta: 0.0,
            temperature: 1.0,
        }
    }

    pub fn fermi_dirac() -> Self {
        Self {
            kind: EntropyKind::FermiDirac,
            eta: 0.0,
            temperature: 1.0,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(0.0..=0.5).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 0.5], got {}", self.eta)));
        }
        if self.kind == EntropyKind::FermiDirac && self.eta > 0.0 {
            return Err(Error::Config(
                "the regularized entropy is only defined for the Boltzmann kind".into(),
            ));
        }
        Ok(())
    }

    pub fn is_regularized(&self) -> bool {
        self.eta > 0.0
    }

    /// Entropy density `β(x)`, `β_η(x)` or the Fermi-Dirac entropy.
    pub fn value(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let x = x.max(0.0);
        Ok(match self.kind {
            EntropyKind::Boltzmann if self.eta > 0.0 => {
                let eta = self.eta;
                (x + eta) * (x + eta).ln() - x - eta * eta.ln()
            }
            EntropyKind::Boltzmann => xlogx(x) - x,
            EntropyKind::FermiDirac => xlogx(x) + xlogx(1.0 - x),
        })
    }

    /// `β'(x)`; `-∞` at the singular endpoints of the unregularized kinds.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            EntropyKind::Boltzmann if self.eta > 0.0 => (x.max(0.0) + self.eta).ln(),
            EntropyKind::Boltzmann => x.ln(),
            EntropyKind::FermiDirac => (x / (1.0 - x)).ln(),
        }
    }

    /// `1/β''(x)`, the weight of the entropy Hessian in the eigenbasis.
    pub fn inverse_curvature(&self, x: f64) -> f64 {
        match self.kind {
            EntropyKind::Boltzmann => x.max(0.0) + self.eta,
            EntropyKind::FermiDirac => x * (1.0 - x),
        }
    }

    /// Occupation `g(λ)` solving `β'(g) = -λ`, i.e. the spectral function
    /// mapping `H/T` to the stationary state `g(H/T)`.
    pub fn occupation(&self, lambda: f64) -> f64 {
        match self.kind {
            EntropyKind::Boltzmann => ((-lambda).exp() - self.eta).max(0.0),
            EntropyKind::FermiDirac => {
                if lambda > 0.0 {
                    let e = (-lambda).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + lambda.exp())
                }
            }
        }
    }

    /// `g'(λ)`.
    pub fn occupation_derivative(&self, lambda: f64) -> f64 {
        match self.kind {
            EntropyKind::Boltzmann => {
                let e = (-lambda).exp();
                if e > self.eta {
                    -e
                } else {
                    0.0
                }
            }
            EntropyKind::FermiDirac => {
                let g = self.occupation(lambda);
                -g * (1.0 - g)
            }
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let ok = match self.kind {
            EntropyKind::Boltzmann => x >= -crate::state::CLAMP_WINDOW && x.is_finite(),
            EntropyKind::FermiDirac => {
                (-crate::state::CLAMP_WINDOW..=1.0 + crate::state::CLAMP_WINDOW).contains(&x)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::EntropyDomain {
                value: x,
                kind: self.kind.name(),
            })
        }
    }
}

/// `β(x)` for a spec; convenience wrapper over [`EntropySpec::value`].
pub fn entropy_value(x: f64, spec: &EntropySpec) -> Result<f64> {
    spec.value(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergy {
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
}

/// Kinetic energy `E(ρ) = Σ_p ρ_p ⟨Dφ_p, W Dφ_p⟩`.
pub fn kinetic_energy(rho: &DensityMatrix) -> f64 {
    let g = rho.grid();
    g.edge_weight() * rho.kinetic_edge_density().iter().sum::<f64>()
}

/// `Tr β(ρ)` over the spectrum.
pub fn entropy_sum(rho: &DensityMatrix, spec: &EntropySpec) -> Result<f64> {
    rho.eigenvalues()
        .iter()
        .map(|&x| spec.value(x))
        .sum::<Result<f64>>()
}

pub fn free_energy(rho: &DensityMatrix, spec: &EntropySpec) -> Result<FreeEnergy> {
    let energy = kinetic_energy(rho);
    let entropy = entropy_sum(rho, spec)?;
    Ok(FreeEnergy {
        energy,
        entropy,
        free_energy: energy + spec.temperature * entropy,
    })
}

/// Right-hand side minus left-hand side of the log-Sobolev inequality for
/// systems,
/// `Σ ρ_p log ρ_p + (d/2) log(e E / (2π d Tr ρ)) Tr ρ - ∫ n log n`,
/// which is nonnegative in the continuum.
pub fn log_sobolev_gap(rho: &DensityMatrix) -> Result<f64> {
    let trace = rho.trace();
    let energy = kinetic_energy(rho);
    if !(trace > 0.0) {
        return Err(Error::Degenerate("log-Sobolev gap needs a nonzero trace".into()));
    }
    if !(energy > 1e-12 * trace) {
        return Err(Error::Degenerate("log-Sobolev gap needs a positive kinetic energy".into()));
    }
    let d = DIM as f64;
    let spectral: f64 = rho.eigenvalues().iter().map(|&x| xlogx(x)).sum();
    let scale = (std::f64::consts::E / (2.0 * std::f64::consts::PI * d)) * energy / trace;
    let n = rho.local_density();
    let nlogn: Vec<f64> = n.iter().map(|&v| xlogx(v)).collect();
    let local = rho.grid().integrate(&nlogn)?;
    Ok(spectral + 0.5 * d * scale.ln() * trace - local)
}

/// Two-sided entropy bound `0 ≤ -Σ ρ_p log ρ_p ≤ (d/2) log(e E/(2π d)) - ∫ n log n`
/// for unit-trace states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBounds {
    pub entropy: f64,
    pub upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

pub fn entropy_bounds(rho: &DensityMatrix) -> Result<EntropyBounds> {
    let energy = kinetic_energy(rho);
    if !(energy > 0.0) {
        return Err(Error::Degenerate("entropy bound needs a positive kinetic energy".into()));
    }
    let d = DIM as f64;
    let entropy = -rho.eigenvalues().iter().map(|&x| xlogx(x)).sum::<f64>();
    let n = rho.local_density();
    let nlogn: Vec<f64> = n.iter().map(|&v| xlogx(v)).collect();
    let local = rho.grid().integrate(&nlogn)?;
    let upper = 0.5 * d * (std::f64::consts::E / (2.0 * std::f64::consts::PI * d) * energy).ln() - local;
    Ok(EntropyBounds {
        entropy,
        upper,
        lower_holds: entropy >= 0.0,
        upper_holds: entropy <= upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Boundary};
    use crate::state::spectral_decompose;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boltzmann_values() {
        let b = EntropySpec::boltzmann();
        assert!((b.value(1.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(b.value(0.0).unwrap(), 0.0);
        for eta in [1e-3, 0.1, 0.5] {
            assert!(b.with_eta(eta).value(0.0).unwrap().abs() < 1e-15);
        }
        assert!(b.value(-1.0).is_err());
    }

    #[test]
    fn fermi_dirac_domain_and_symmetry() {
        let f = EntropySpec::fermi_dirac();
        assert!(f.value(1.5).is_err());
        assert_eq!(f.value(0.0).unwrap(), 0.0);
        assert_eq!(f.value(1.0).unwrap(), 0.0);
        assert!((f.value(0.3).unwrap() - f.value(0.7).unwrap()).abs() < 1e-15);
        assert!(EntropySpec::fermi_dirac().with_eta(0.1).validate().is_err());
    }

    #[test]
    fn occupation_inverts_the_derivative() {
        for spec in [EntropySpec::boltzmann(), EntropySpec::fermi_dirac(), EntropySpec::boltzmann().with_eta(0.05)] {
            for lambda in [-2.0, -0.3, 0.0, 0.7, 2.5] {
                let x = spec.occupation(lambda);
                if x > 0.0 {
                    assert!((spec.derivative(x) + lambda).abs() < 1e-12, "{spec:?} {lambda}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn regularized_entropy_dominates(x in 0.0f64..1.0, eta in 1e-8f64..0.5) {
            let b = EntropySpec::boltzmann();
            let gap = b.with_eta(eta).value(x).unwrap() - b.value(x).unwrap();
            prop_assert!(gap >= -1e-15);
        }

        #[test]
        fn energy_is_linear(a in 0.0f64..3.0, b in 0.0f64..3.0, seed in 0u64..1000) {
            let g = make_grid(8, 2.0, Boundary::Periodic).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut psd = || {
                let m = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
                &m * m.transpose()
            };
            let k1 = psd();
            let k2 = psd();
            let e = |k: &DMatrix<f64>| kinetic_energy(&spectral_decompose(k, &g).unwrap());
            let lhs = e(&(a * &k1 + b * &k2));
            let rhs = a * e(&k1) + b * e(&k2);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn zero_operator_has_zero_free_energy() {
        let g = make_grid(6, 1.0, Boundary::Periodic).unwrap();
        let rho = spectral_decompose(&DMatrix::zeros(6, 6), &g).unwrap();
        let f = free_energy(&rho, &EntropySpec::boltzmann()).unwrap();
        assert_eq!((f.energy, f.entropy, f.free_energy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rank_one_free_energy_is_gradient_norm_minus_one() {
        let g = make_grid(32, 10.0, Boundary::Periodic).unwrap();
        let raw: Vec<f64> = g.nodes().iter().map(|x| (-(x - 5.0).powi(2) / 2.0).exp()).collect();
        let mass = g.integrate(&raw).unwrap();
        let sqrt_n: Vec<f64> = raw.iter().map(|v| (v / mass).sqrt()).collect();
        let s = DVector::from_column_slice(&sqrt_n);
        let rho = spectral_decompose(&(&s * s.transpose()), &g).unwrap();
        let f = free_energy(&rho, &EntropySpec::boltzmann()).unwrap();
        let grad: Vec<f64> = g.diff(&sqrt_n).iter().map(|d| d * d).collect();
        let expected_e = g.integrate(&grad).unwrap();
        assert!((f.energy - expected_e).abs() < 1e-10);
        assert!((f.entropy + 1.0).abs() < 1e-10);
        assert!((f.free_energy - expected_e + 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_sobolev_gap_is_basis_independent() {
        let g = make_grid(10, 4.0, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let k = &b * b.transpose();
        let k = &k / (g.spacing() * k.trace());
        let rho = spectral_decompose(&k, &g).unwrap();
        let gap = log_sobolev_gap(&rho).unwrap();
        // Relabel eigenpairs (reverse order) and rebuild.
        let n = 10;
        let mut vecs = rho.eigenvectors().clone();
        let mut vals = rho.eigenvalues().to_vec();
        vals.reverse();
        for c in 0..n / 2 {
            vecs.swap_columns(c, n - 1 - c);
        }
        let relabeled = DensityMatrix::from_spectrum(&g, vals, vecs).unwrap();
        assert!((log_sobolev_gap(&relabeled).unwrap() - gap).abs() < 1e-12);
    }

    #[test]
    fn log_sobolev_rejects_degenerate_states() {
        let g = make_grid(4, 1.0, Boundary::Periodic).unwrap();
        let zero = spectral_decompose(&DMatrix::zeros(4, 4), &g).unwrap();
        assert!(log_sobolev_gap(&zero).is_err());
        // Constant state: no kinetic energy.
        let flat = spectral_decompose(&DMatrix::from_element(4, 4, 1.0), &g).unwrap();
        assert!(matches!(log_sobolev_gap(&flat), Err(Error::Degenerate(_))));
    }
}

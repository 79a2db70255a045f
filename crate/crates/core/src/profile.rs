//! Target density profiles for the local constraint `n[ρ] = n`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};

/// Relative floor `n_floor = DEFAULT_FLOOR · max(n)`.
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Analytic profile families, evaluated on the nodes before flooring and
/// normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileFamily {
    Gaussian {
        center: f64,
        width: f64,
    },
    DoubleGaussian {
        centers: [f64; 2],
        width: f64,
        #[serde(default = "equal_weights")]
        weights: [f64; 2],
    },
    Bump {
        center: f64,
        radius: f64,
    },
    Uniform,
    /// Node values read from a file: one number per line, or a JSON array.
    File {
        path: PathBuf,
    },
}

fn equal_weights() -> [f64; 2] {
    [1.0, 1.0]
}

/// Normalized target density with the derived fields used throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintProfile {
    pub n: Vec<f64>,
    pub sqrt_n: Vec<f64>,
    /// `D√n` on edges.
    pub grad_sqrt_n: Vec<f64>,
    pub mass: f64,
    pub n_floor: f64,
}

impl ConstraintProfile {
    /// Floors `raw` at `floor_rel · max(raw)` and normalizes to unit mass.
    pub fn from_values(grid: &Grid, raw: &[f64], floor_rel: f64) -> Result<Self> {
        if raw.len() != grid.num_points() {
            return Err(Error::Dimension {
                expected: grid.num_points(),
                got: raw.len(),
            });
        }
        if !(floor_rel > 0.0 && floor_rel < 1.0) {
            return Err(Error::Config(format!("n_floor must lie in (0, 1), got {floor_rel}")));
        }
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("profile values must be finite and nonnegative".into()));
        }
        let max = raw.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::Config("profile vanishes identically".into()));
        }
        let floored: Vec<f64> = raw.iter().map(|&v| v.max(floor_rel * max)).collect();
        let mass = grid.integrate(&floored)?;
        let n: Vec<f64> = floored.iter().map(|v| v / mass).collect();
        let n_floor = floor_rel * max / mass;
        let sqrt_n: Vec<f64> = n.iter().map(|v| v.sqrt()).collect();
        let grad_sqrt_n = grid.diff(&sqrt_n);
        let mass = grid.integrate(&n)?;
        Ok(Self {
            n,
            sqrt_n,
            grad_sqrt_n,
            mass,
            n_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }
}

/// Evaluates a family on the grid nodes (unnormalized).
pub fn evaluate_family(grid: &Grid, family: &ProfileFamily) -> Result<Vec<f64>> {
    let xs = grid.nodes();
    let gauss = |x: f64, c: f64, w: f64| -> f64 {
        match grid.boundary() {
            Boundary::Periodic => {
                let l = grid.length();
                (-4..=4)
                    .map(|k| {
                        let d = x - c + k as f64 * l;
                        (-d * d / (2.0 * w * w)).exp()
                    })
                    .sum()
            }
            Boundary::Dirichlet => (-(x - c).powi(2) / (2.0 * w * w)).exp(),
        }
    };
    let positive = |name: &str, v: f64| -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} must be positive, got {v}")))
        }
    };
    Ok(match family {
        ProfileFamily::Gaussian { center, width } => {
            positive("width", *width)?;
            xs.iter().map(|&x| gauss(x, *center, *width)).collect()
        }
        ProfileFamily::DoubleGaussian {
            centers,
            width,
            weights,
        } => {
            positive("width", *width)?;
            if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("double_gaussian weights must be nonnegative".into()));
            }
            xs.iter()
                .map(|&x| weights[0] * gauss(x, centers[0], *width) + weights[1] * gauss(x, centers[1], *width))
                .collect()
        }
        ProfileFamily::Bump { center, radius } => {
            positive("radius", *radius)?;
            let l = grid.length();
            xs.iter()
                .map(|&x| {
                    let mut d = x - center;
                    if grid.boundary() == Boundary::Periodic {
                        d -= l * (d / l).round();
                    }
                    let r = d / radius;
                    if r.abs() < 1.0 {
                        (-1.0 / (1.0 - r * r)).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        ProfileFamily::Uniform => vec![1.0; grid.num_points()],
        ProfileFamily::File { path } => read_values(path)?,
    })
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad profile value {l:?}: {e}")))
        })
        .collect()
}

pub fn build_profile(grid: &Grid, family: &ProfileFamily, floor_rel: f64) -> Result<ConstraintProfile> {
    let raw = evaluate_family(grid, family)?;
    ConstraintProfile::from_values(grid, &raw, floor_rel)
}

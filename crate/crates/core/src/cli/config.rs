//! Run configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::EntropySpec;
use crate::grid::{make_grid, Boundary};
use crate::profile::{build_profile, ProfileFamily, DEFAULT_FLOOR};
use crate::solvers::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub length: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(flatten)]
    pub family: ProfileFamily,
    /// Floor relative to the profile maximum.
    #[serde(default = "default_floor")]
    pub n_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Dual,
    Primal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: Method,
    /// Defaults to the method's own tolerance.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaSweepConfig {
    /// `η_j = 2^{−j}` for `j_min ≤ j ≤ j_max`.
    pub j_min: i32,
    pub j_max: i32,
    /// Grid size of the sweep; the primal solves dominate the cost.
    #[serde(rename = "N", default = "default_sweep_n")]
    pub n: usize,
}

fn default_sweep_n() -> usize {
    32
}

impl Default for EtaSweepConfig {
    fn default() -> Self {
        Self {
            j_min: 4,
            j_max: 20,
            n: default_sweep_n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    #[serde(rename = "P_modes")]
    pub p_modes: usize,
    pub refinement_levels: Vec<usize>,
    pub eta_sweep: EtaSweepConfig,
    /// Random test functions for the 𝔥-norm and positivity batches.
    pub samples: usize,
    /// Directions for the derivative checks.
    pub derivative_samples: usize,
    /// `η` of the entropy derivative check.
    pub derivative_eta: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            p_modes: 8,
            refinement_levels: vec![32, 64, 128],
            eta_sweep: EtaSweepConfig::default(),
            samples: 100,
            derivative_samples: 10,
            derivative_eta: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub entropy: EntropySpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.grid.n < 2 {
            return bad(format!("grid.N must be at least 2, got {}", self.grid.n));
        }
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            return bad(format!("grid.length must be positive, got {}", self.grid.length));
        }
        if !(self.profile.n_floor > 0.0 && self.profile.n_floor < 1.0) {
            return bad(format!("profile.n_floor must lie in (0, 1), got {}", self.profile.n_floor));
        }
        self.entropy.validate()?;
        if let Some(tol) = self.solver.tol {
            if !(tol > 0.0) {
                return bad(format!("solver.tol must be positive, got {tol}"));
            }
        }
        if self.solver.max_iter == Some(0) {
            return bad("solver.max_iter must be positive".into());
        }
        let v = &self.verify;
        if v.refinement_levels.iter().any(|&n| n < 2) {
            return bad("verify.refinement_levels must be at least 2".into());
        }
        if v.eta_sweep.j_min > v.eta_sweep.j_max || v.eta_sweep.j_min < 1 {
            return bad("verify.eta_sweep needs 1 <= j_min <= j_max".into());
        }
        if v.eta_sweep.n < 2 {
            return bad("verify.eta_sweep.N must be at least 2".into());
        }
        if !(v.derivative_eta > 0.0 && v.derivative_eta <= 0.5) {
            return bad(format!("verify.derivative_eta must lie in (0, 0.5], got {}", v.derivative_eta));
        }
        Ok(())
    }

    /// The problem on the configured grid, or on `N` points when given.
    pub fn problem_at(&self, n: usize) -> Result<Problem> {
        let grid = make_grid(n, self.grid.length, self.grid.boundary)?;
        let target = build_profile(&grid, &self.profile.family, self.profile.n_floor)?;
        Problem::new(grid, target, self.entropy)
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_at(self.grid.n)
    }
}

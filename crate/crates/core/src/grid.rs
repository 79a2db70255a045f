//! Uniform 1-D grids with a forward-difference gradient and the Laplacian
//! built from it.
//!
//! The Laplacian is assembled as `L = Dᵀ W D` where `D` maps node values to
//! edge differences and `W` holds the ratio of edge to node quadrature
//! weights. Summation by parts is therefore exact:
//! `h Σ_e (Du)_e (Dv)_e = h Σ_i u_i (Lv)_i` for every pair of node vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of every grid built here.
pub const DIM: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    num_points: usize,
    length: f64,
    spacing: f64,
    boundary: Boundary,
    nodes: Vec<f64>,
}

/// Which spaces a [`DiscreteOperator`] maps between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorShape {
    NodesToNodes,
    NodesToEdges,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: DMatrix<f64>,
    pub shape: OperatorShape,
}

impl DiscreteOperator {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.matrix.ncols(), "operator input length");
        let v = &self.matrix * DVector::from_column_slice(u);
        v.as_slice().to_vec()
    }
}

/// Builds a uniform grid of `num_points` unknowns on a domain of length `length`.
///
/// Periodic grids place nodes at `i·h` with `h = Λ/N`; Dirichlet grids keep
/// the `N` interior nodes of `N + 1` cells, `h = Λ/(N+1)`.
pub fn make_grid(num_points: usize, length: f64, boundary: Boundary) -> Result<Grid> {
    if num_points < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2 points, got {num_points}"
        )));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Config(format!(
            "domain length must be positive, got {length}"
        )));
    }
    let (spacing, offset) = match boundary {
        Boundary::Periodic => (length / num_points as f64, 0.0),
        Boundary::Dirichlet => (length / (num_points + 1) as f64, 1.0),
    };
    let nodes = (0..num_points)
        .map(|i| (i as f64 + offset) * spacing)
        .collect();
    Ok(Grid {
        num_points,
        length,
        spacing,
        boundary,
        nodes,
    })
}

impl Grid {
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Mesh width `h`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn num_edges(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.num_points,
            Boundary::Dirichlet => self.num_points + 1,
        }
    }

    /// Quadrature weight of one node.
    pub fn node_weight(&self) -> f64 {
        self.spacing
    }

    /// Quadrature weight of one edge.
    pub fn edge_weight(&self) -> f64 {
        self.spacing
    }

    /// Rectangle-rule integral `h Σ f_i` of a node or edge vector.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.num_points && f.len() != self.num_edges() {
            return Err(Error::Dimension {
                expected: self.num_points,
                got: f.len(),
            });
        }
        Ok(self.spacing * f.iter().sum::<f64>())
    }

    /// Discrete inner product `h Σ u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        self.spacing * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Forward difference `(Du)_e` of a node vector.
    ///
    /// Edge `e` of a periodic grid joins nodes `e` and `e+1 mod N`; edge `e`
    /// of a Dirichlet grid joins nodes `e-1` and `e`, with zero wall values.
    pub fn diff(&self, u: &[f64]) -> Vec<f64> {
        let n = self.num_points;
        assert_eq!(u.len(), n, "diff expects a node vector");
        let h = self.spacing;
        match self.boundary {
            Boundary::Periodic => (0..n).map(|e| (u[(e + 1) % n] - u[e]) / h).collect(),
            Boundary::Dirichlet => (0..=n)
                .map(|e| {
                    let right = if e < n { u[e] } else { 0.0 };
                    let left = if e > 0 { u[e - 1] } else { 0.0 };
                    (right - left) / h
                })
                .collect(),
        }
    }

    /// Adjacent-edge mean of an edge field, returned on nodes.
    pub fn edge_to_node(&self, f: &[f64]) -> Vec<f64> {
        let n = self.num_points;
        assert_eq!(f.len(), self.num_edges(), "edge_to_node expects an edge vector");
        match self.boundary {
            Boundary::Periodic => (0..n).map(|i| 0.5 * (f[(i + n - 1) % n] + f[i])).collect(),
            Boundary::Dirichlet => (0..n).map(|i| 0.5 * (f[i] + f[i + 1])).collect(),
        }
    }
}

/// Forward-difference gradient, node vectors to edge vectors.
pub fn gradient(g: &Grid) -> DiscreteOperator {
    let n = g.num_points;
    let h = g.spacing;
    let mut d = DMatrix::zeros(g.num_edges(), n);
    match g.boundary {
        Boundary::Periodic => {
            for e in 0..n {
                d[(e, e)] -= 1.0 / h;
                d[(e, (e + 1) % n)] += 1.0 / h;
            }
        }
        Boundary::Dirichlet => {
            for e in 0..=n {
                if e < n {
                    d[(e, e)] += 1.0 / h;
                }
                if e > 0 {
                    d[(e, e - 1)] -= 1.0 / h;
                }
            }
        }
    }
    DiscreteOperator {
        matrix: d,
        shape: OperatorShape::NodesToEdges,
    }
}

/// Ratio of edge to node quadrature weights, as a diagonal edge operator.
pub fn edge_weights(g: &Grid) -> DMatrix<f64> {
    DMatrix::from_diagonal_element(g.num_edges(), g.num_edges(), g.edge_weight() / g.node_weight())
}

/// Discrete `-Δ`, defined as `Dᵀ W D`.
pub fn laplacian(g: &Grid) -> DiscreteOperator {
    let d = gradient(g).matrix;
    let w = edge_weights(g);
    DiscreteOperator {
        matrix: d.transpose() * w * &d,
        shape: OperatorShape::NodesToNodes,
    }
}

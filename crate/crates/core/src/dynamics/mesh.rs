use serde::{Deserialize, Serialize};

use super::{CoefficientField, DynamicsError};
use crate::network::{EdgeId, NetworkTopology};

/// Uniform node grid on one edge: node `i` sits at `x0 + i h`, `i = 0..=cells`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMesh {
    pub id: EdgeId,
    pub cells: usize,
    pub x0: f64,
    pub h: f64,
}

impl EdgeMesh {
    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn length(&self) -> f64 {
        self.cells as f64 * self.h
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.h
        } else {
            self.h
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    edges: Vec<EdgeMesh>,
}

impl Mesh {
    /// `cells[k]` is the cell count of the k-th edge in id order.
    pub fn new(topo: &NetworkTopology, cells: &[usize]) -> Result<Self, DynamicsError> {
        if cells.len() != topo.edge_count() {
            return Err(DynamicsError::Mismatch(format!(
                "{} cell counts for {} edges",
                cells.len(),
                topo.edge_count()
            )));
        }
        let edges = topo
            .edges()
            .iter()
            .zip(cells)
            .map(|(e, &n)| {
                if n < 2 {
                    Err(DynamicsError::TooFewCells { edge: e.id, cells: n })
                } else {
                    Ok(EdgeMesh {
                        id: e.id,
                        cells: n,
                        x0: e.x_initial,
                        h: e.length / n as f64,
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { edges })
    }

    pub fn uniform(topo: &NetworkTopology, cells_per_edge: usize) -> Result<Self, DynamicsError> {
        Self::new(topo, &vec![cells_per_edge; topo.edge_count()])
    }

    /// Cell counts proportional to edge length, at least two per edge.
    pub fn by_density(topo: &NetworkTopology, cells_per_unit: f64) -> Result<Self, DynamicsError> {
        let cells: Vec<usize> = topo
            .edges()
            .iter()
            .map(|e| ((e.length * cells_per_unit).round() as usize).max(2))
            .collect();
        Self::new(topo, &cells)
    }

    pub fn edges(&self) -> &[EdgeMesh] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &EdgeMesh {
        &self.edges[k]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.edges.iter().map(EdgeMesh::nodes).sum()
    }

    pub fn min_h(&self) -> f64 {
        self.edges.iter().map(|m| m.h).fold(f64::INFINITY, f64::min)
    }
}

/// Space-time grid: a mesh plus `steps` uniform time steps over `[0, horizon]`
/// (and the mirrored interval for backward solves).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mesh: Mesh,
    pub horizon: f64,
    pub steps: usize,
    pub cfl: f64,
}

impl GridSpec {
    /// Picks the smallest step count that keeps the CFL number at or below `cfl`.
    pub fn new(
        mesh: Mesh,
        horizon: f64,
        cfl: f64,
        coeffs: &CoefficientField,
    ) -> Result<Self, DynamicsError> {
        if !(horizon > 0.0) {
            return Err(DynamicsError::Config(format!("horizon must be positive, got {horizon}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(DynamicsError::CflNumber(cfl));
        }
        let limit = cfl * min_transit(&mesh, coeffs)?;
        let steps = ((horizon / limit) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let grid = Self {
            mesh,
            horizon,
            steps,
            cfl,
        };
        grid.check_cfl(coeffs)?;
        Ok(grid)
    }

    pub fn with_steps(mesh: Mesh, horizon: f64, steps: usize, cfl: f64) -> Self {
        Self {
            mesh,
            horizon,
            steps,
            cfl,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `Δt ≤ CFL · min(Δx √(p₁p₂))` with `CFL ≤ 1`.
    pub fn check_cfl(&self, coeffs: &CoefficientField) -> Result<(), DynamicsError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(DynamicsError::CflNumber(self.cfl));
        }
        if self.steps == 0 {
            return Err(DynamicsError::Config("time step count is zero".into()));
        }
        let limit = self.cfl * min_transit(&self.mesh, coeffs)?;
        let dt = self.dt();
        if dt > limit * (1.0 + 1e-12) {
            return Err(DynamicsError::Cfl { dt, limit });
        }
        Ok(())
    }
}

/// Smallest cell transit time `h √(p₁p₂)` over the mesh.
fn min_transit(mesh: &Mesh, coeffs: &CoefficientField) -> Result<f64, DynamicsError> {
    coeffs.check_mesh(mesh)?;
    let mut m = f64::INFINITY;
    for (k, em) in mesh.edges().iter().enumerate() {
        let c = coeffs.edge(k);
        for i in 0..em.nodes() {
            m = m.min(em.h * (c.p1[i] * c.p2[i]).sqrt());
        }
    }
    Ok(m)
}

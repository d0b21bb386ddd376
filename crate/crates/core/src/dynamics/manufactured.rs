use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{AnalyticField, FieldTrajectory, Mesh};
use crate::network::{EdgeId, NetworkTopology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedOptions {
    /// Current carried by every leaf edge; interior edges carry the sum of
    /// the flows below them.
    pub leaf_flow: f64,
    /// Scale of the vertex potential at interior vertices.
    pub potential: f64,
    /// Amplitude of the current bubble `sin(πξ)` on each edge.
    pub current_bubble: f64,
    /// Amplitude of the voltage bubble `ξ(1 − ξ)` on each edge.
    pub voltage_bubble: f64,
}

impl Default for ManufacturedOptions {
    fn default() -> Self {
        Self {
            leaf_flow: 2.0,
            potential: 0.5,
            current_bubble: 0.25,
            voltage_bubble: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeShape {
    x0: f64,
    length: f64,
    flow: f64,
    p_initial: f64,
    p_terminal: f64,
}

/// Smooth field vanishing at `t = ±T` and at every exterior vertex, with
/// continuous voltage and balanced current at interior vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedField {
    horizon: f64,
    options: ManufacturedOptions,
    shapes: BTreeMap<EdgeId, EdgeShape>,
}

pub fn manufacture_homogeneous_field(
    topo: &NetworkTopology,
    horizon: f64,
    options: ManufacturedOptions,
) -> ManufacturedField {
    let mut potential = vec![0.0; topo.vertex_count()];
    for (rank, &v) in topo.interior_vertices().iter().enumerate() {
        potential[v] = options.potential * (1.0 + 0.5 * rank as f64);
    }
    // Flows accumulate from the leaves toward the root, deepest edges first.
    let mut order: Vec<usize> = (0..topo.edge_count()).collect();
    order.sort_by(|&a, &b| topo.edges()[b].x_terminal.total_cmp(&topo.edges()[a].x_terminal));
    let mut flow = vec![0.0; topo.edge_count()];
    for k in order {
        let e = topo.edges()[k];
        let below = topo.initial_set(e.terminal);
        flow[k] = if below.is_empty() {
            options.leaf_flow
        } else {
            below.iter().map(|id| flow[topo.edge_index(*id).unwrap()]).sum()
        };
    }
    let shapes = topo
        .edges()
        .iter()
        .zip(flow)
        .map(|(e, f)| {
            (
                e.id,
                EdgeShape {
                    x0: e.x_initial,
                    length: e.length,
                    flow: f,
                    p_initial: potential[e.initial],
                    p_terminal: potential[e.terminal],
                },
            )
        })
        .collect();
    ManufacturedField {
        horizon,
        options,
        shapes,
    }
}

impl ManufacturedField {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Samples on `[−T, T]` with `2·steps + 1` levels.
    pub fn sample(&self, mesh: &Mesh, steps: usize) -> FieldTrajectory {
        let dt = self.horizon / steps as f64;
        FieldTrajectory::from_fn(mesh, -self.horizon, dt, 2 * steps + 1, |k, x, t| {
            self.value(mesh.edge(k).id, x, t)
        })
    }

    /// `(b₁, b₁', b₂, b₂')` with `b₁ = (T² − t²)²`, `b₂ = b₁(1 + t/T)`.
    fn time_factors(&self, t: f64) -> [f64; 4] {
        let t2 = self.horizon * self.horizon;
        let q = t2 - t * t;
        let b1 = q * q;
        let db1 = -4.0 * t * q;
        let s = 1.0 + t / self.horizon;
        [b1, db1, b1 * s, db1 * s + b1 / self.horizon]
    }

    fn shape(&self, edge: EdgeId) -> &EdgeShape {
        &self.shapes[&edge]
    }

    /// Spatial profiles `(g₁, g₁', g₂, g₂')` on one edge.
    fn profiles(&self, edge: EdgeId, x: f64) -> [f64; 4] {
        let s = self.shape(edge);
        let o = &self.options;
        let xi = (x - s.x0) / s.length;
        let g1 = s.flow + o.current_bubble * (PI * xi).sin();
        let dg1 = o.current_bubble * PI * (PI * xi).cos() / s.length;
        let g2 = s.p_initial * (1.0 - xi) + s.p_terminal * xi + o.voltage_bubble * xi * (1.0 - xi);
        let dg2 = (s.p_terminal - s.p_initial + o.voltage_bubble * (1.0 - 2.0 * xi)) / s.length;
        [g1, dg1, g2, dg2]
    }
}

impl AnalyticField for ManufacturedField {
    fn value(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2] {
        let b = self.time_factors(t);
        let g = self.profiles(edge, x);
        [b[0] * g[0], b[2] * g[2]]
    }

    fn dx(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2] {
        let b = self.time_factors(t);
        let g = self.profiles(edge, x);
        [b[0] * g[1], b[2] * g[3]]
    }

    fn dt(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2] {
        let b = self.time_factors(t);
        let g = self.profiles(edge, x);
        [b[1] * g[0], b[3] * g[2]]
    }
}

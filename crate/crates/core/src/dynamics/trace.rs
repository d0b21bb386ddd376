use super::FieldTrajectory;
use crate::network::{EdgeId, NetworkTopology, VertexId};

/// Current at the terminal node of one leaf edge and its first two time
/// derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafTrace {
    pub vertex: VertexId,
    pub edge: EdgeId,
    /// Indexed by derivative order `l = 0, 1, 2`.
    pub channels: [Vec<f64>; 3],
}

/// Current traces at every exterior vertex except the root.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraces {
    pub t0: f64,
    pub dt: f64,
    pub leaves: Vec<LeafTrace>,
}

impl BoundaryTraces {
    pub fn len(&self) -> usize {
        self.leaves.first().map_or(0, |l| l.channels[0].len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// `Σ_leaves ∫ |∂ₜˡ u₁|² dt`, trapezoid rule.
    pub fn norm_squared(&self, l: usize) -> f64 {
        self.leaves.iter().map(|lt| trapezoid_sq(&lt.channels[l], self.dt)).sum()
    }
}

pub(crate) fn trapezoid_sq(v: &[f64], dt: f64) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = v[1..n - 1].iter().map(|x| x * x).sum();
            dt * (inner + 0.5 * (v[0] * v[0] + v[n - 1] * v[n - 1]))
        }
    }
}

/// Extracts `u₁(x(T_j), t)` on the edge ending at each leaf.
pub fn boundary_trace(traj: &FieldTrajectory, topo: &NetworkTopology) -> BoundaryTraces {
    let leaves = topo
        .leaf_terminals()
        .into_iter()
        .map(|(vertex, edge)| {
            let k = topo.edge_index(edge).expect("leaf edge");
            let last = traj.mesh(k).cells;
            let (values, _) = traj.node_series(k, last);
            let (d1, d2) = one_sided_derivatives(&values, traj.dt());
            LeafTrace {
                vertex,
                edge,
                channels: [values, d1, d2],
            }
        })
        .collect();
    BoundaryTraces {
        t0: traj.t0(),
        dt: traj.dt(),
        leaves,
    }
}

/// First and second derivatives of a uniformly sampled series: centered
/// inside, second-order one-sided at the two ends. Series shorter than four
/// samples get zero derivatives.
pub fn one_sided_derivatives(f: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    if n < 4 {
        return (vec![0.0; n], vec![0.0; n]);
    }
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        d1[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
        d2[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (dt * dt);
    }
    let m = n - 1;
    d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    d1[m] = (3.0 * f[m] - 4.0 * f[m - 1] + f[m - 2]) / (2.0 * dt);
    d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (dt * dt);
    d2[m] = (2.0 * f[m] - 5.0 * f[m - 1] + 4.0 * f[m - 2] - f[m - 3]) / (dt * dt);
    (d1, d2)
}

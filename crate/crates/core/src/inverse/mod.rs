//! Coefficient recovery from two experiments.
//!
//! The background coefficients `p` are known; the unknown coefficients are
//! `q = p + ρ`. Experiment `m` runs the system with both `p` (field `u_m`) and
//! `q` (field `v_m`) from the same data, and the difference `w_m = u_m − v_m`
//! solves `L(p) w_m = f_m` with zero initial data. Only the current of `w_m`
//! at the leaf vertices is observed.

mod assumption;
mod difference;
mod direct;
mod lsq;
mod measurement;
mod perturbation;
mod stability;

use thiserror::Error;

use crate::carleman::CarlemanError;
use crate::dynamics::{DynamicsError, ProblemData};
use crate::network::NetworkTopology;
use crate::profile::Profile;

pub use assumption::{block_determinants, check_assumption2, sensitivity_matrix, Assumption2Report};
pub use difference::{difference_field, DifferenceField};
pub use direct::{
    algebraic_rates, direct_reconstruct_t0, rates_from_difference, reconstruct_from_simulation,
    DirectOptions, DirectReconstruction, InitialRates,
};
pub use lsq::{least_squares_reconstruct, GaussNewtonOptions, Iterate, LeastSquaresResult, NoiseModel};
pub use measurement::{simulate_measurements, MeasurementSet};
pub use perturbation::CoefficientPerturbation;
pub use stability::{stability_experiment, StabilityRow, StabilityTable};

#[derive(Debug, Error)]
pub enum InverseError {
    #[error("Assumption 2 violated: the two experiments are degenerate: {0}")]
    Assumption2(String),
    #[error("perturbed coefficients leave the admissible class: {0}")]
    Inadmissible(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Carleman(#[from] CarlemanError),
}

/// Two data sets `m = 1, 2` on the same network.
#[derive(Debug, Clone)]
pub struct ExperimentPair {
    pub experiments: [ProblemData; 2],
}

impl ExperimentPair {
    pub fn new(first: ProblemData, second: ProblemData) -> Self {
        Self {
            experiments: [first, second],
        }
    }

    /// Corner-compatibility messages of both experiments, prefixed by `m`.
    pub fn compatibility_warnings(&self, topo: &NetworkTopology) -> Vec<String> {
        self.experiments
            .iter()
            .enumerate()
            .flat_map(|(m, d)| {
                d.compatibility(topo)
                    .messages
                    .into_iter()
                    .map(move |s| format!("experiment {}: {s}", m + 1))
            })
            .collect()
    }
}

impl ExperimentPair {
    /// A pair built from the tree flows `F_j` (one unit per leaf, summed
    /// toward the root) for uniform coefficients `p`.
    ///
    /// Experiment 1 carries no current and the potential `Z` with slope `F_j`
    /// on edge `j` and `Z = 1` at the root. Experiment 2 carries the voltage
    /// `1` and the current `H_j + τ(x − x_j)` with `τ = −1 / (2 max L_j)`,
    /// offsets `H_j` chosen to balance every vertex. The block determinants
    /// are `F_j · z_{2,1}` and `−τ · Z`, both bounded away from zero.
    ///
    /// The data satisfy the vertex conditions to second order in time, and
    /// the boundary voltages are the matching quadratic Taylor polynomials,
    /// so both solutions stay twice continuously differentiable.
    pub fn tree_potentials(topo: &NetworkTopology, p: [f64; 4]) -> Self {
        let flows = leaf_flows(topo);
        let longest = topo.edges().iter().map(|e| e.length).fold(0.0, f64::max);
        let tau = -0.5 / longest;
        let mut order: Vec<usize> = (0..topo.edge_count()).collect();
        order.sort_by(|&a, &b| topo.edges()[a].x_initial.total_cmp(&topo.edges()[b].x_initial));
        let mut potential = vec![0.0; topo.vertex_count()];
        potential[topo.root()] = 1.0;
        for &k in &order {
            let e = topo.edges()[k];
            potential[e.terminal] = potential[e.initial] + flows[k] * e.length;
        }
        let mut offset = vec![0.0; topo.edge_count()];
        for &k in order.iter().rev() {
            let e = topo.edges()[k];
            let below = topo.initial_set(e.terminal);
            offset[k] = if below.is_empty() {
                1.0
            } else {
                below.iter().map(|id| offset[topo.edge_index(*id).expect("edge")]).sum::<f64>() - tau * e.length
            };
        }
        let mut first = ProblemData::new();
        let mut second = ProblemData::new();
        for (k, e) in topo.edges().iter().enumerate() {
            let x0 = e.x_initial;
            first = first.with_initial(
                e.id,
                Profile::Zero,
                Profile::polynomial(&[potential[e.initial] - flows[k] * x0, flows[k]]),
            );
            second = second.with_initial(e.id, Profile::polynomial(&[offset[k] - tau * x0, tau]), Profile::constant(1.0));
        }
        // u₂ near an exterior vertex: u₂ = z₂, ∂ₜu₂ = −(∂ₓz₁ + p₄z₂)/p₂ and
        // ∂ₜ²u₂ = (p₃∂ₓz₁/p₁ − p₄∂ₜu₂)/p₂ for piecewise-linear data.
        let taylor = |z2: f64, dz1: f64| {
            let d1 = -(dz1 + p[3] * z2) / p[1];
            let d2 = (p[2] * dz1 / p[0] - p[3] * d1) / p[1];
            Profile::polynomial(&[z2, d1, 0.5 * d2])
        };
        for &v in topo.boundary_vertices() {
            first = first.with_boundary(v, taylor(potential[v], 0.0));
            second = second.with_boundary(v, taylor(1.0, tau));
        }
        Self::new(first, second)
    }
}

/// One unit of current per leaf edge, accumulated toward the root.
fn leaf_flows(topo: &NetworkTopology) -> Vec<f64> {
    let mut order: Vec<usize> = (0..topo.edge_count()).collect();
    order.sort_by(|&a, &b| topo.edges()[b].x_terminal.total_cmp(&topo.edges()[a].x_terminal));
    let mut flow = vec![0.0; topo.edge_count()];
    for k in order {
        let below = topo.initial_set(topo.edges()[k].terminal);
        flow[k] = if below.is_empty() {
            1.0
        } else {
            below.iter().map(|id| flow[topo.edge_index(*id).expect("edge")]).sum()
        };
    }
    flow
}

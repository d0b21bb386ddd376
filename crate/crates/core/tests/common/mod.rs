#![allow(dead_code)]

use proptest::prelude::*;
use telegraphnet::carleman::WeightFamily;
use telegraphnet::dynamics::AnalyticField;
use telegraphnet::network::{EdgeDescriptor, NetworkTopology};

/// Random rooted tree: vertex 0 is the root with the single child 1, every
/// later vertex hangs below one of `1..v`.
pub fn random_tree(max_edges: usize) -> impl Strategy<Value = Vec<EdgeDescriptor>> {
    (1..=max_edges)
        .prop_flat_map(|n| {
            (
                (2..=n).map(|v| 1..v).collect::<Vec<_>>(),
                prop::collection::vec(0.5..2.0f64, n),
            )
        })
        .prop_map(|(parents, lengths)| {
            let mut edges = vec![EdgeDescriptor::new(1, 0, 1, lengths[0])];
            for (k, &parent) in parents.iter().enumerate() {
                let v = k + 2;
                edges.push(EdgeDescriptor::new(v, parent, v, lengths[v - 1]));
            }
            edges
        })
}

pub fn tree(edges: &[EdgeDescriptor]) -> NetworkTopology {
    NetworkTopology::build(edges, 0).expect("valid tree")
}

/// Composite Simpson weights for `n` (even) intervals of width `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n % 2 == 0 && n > 0);
    (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Natural logs of `s²∫∫|u|²e^{2sφ}`, `∫∫|L(p)u|²e^{2sφ}` and
/// `s Σ_leaves ∫ u₁(leaf, t)² e^{2sφ} dt` by Simpson's rule straight from the
/// analytic field, with `nx` intervals per edge and `nt` over `[−T, T]`.
pub fn weighted_integrals_by_simpson(
    topo: &NetworkTopology,
    field: &dyn AnalyticField,
    p: [f64; 4],
    weights: &WeightFamily,
    s: f64,
    nx: usize,
    nt: usize,
) -> [f64; 3] {
    let horizon = weights.horizon;
    let ht = 2.0 * horizon / nt as f64;
    let wt = simpson_weights(nt, ht);
    let leaves: Vec<usize> = topo
        .leaf_terminals()
        .iter()
        .map(|&(_, e)| topo.edge_index(e).unwrap())
        .collect();
    // Shift every exponent by the largest value of 2sφ to stay in range.
    let top = topo
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| weights.phi(k, e.x_initial, 0.0).max(weights.phi(k, e.x_terminal, 0.0)))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut acc = [0.0f64; 3];
    for (k, e) in topo.edges().iter().enumerate() {
        let hx = e.length / nx as f64;
        let wx = simpson_weights(nx, hx);
        for (n, &w_t) in wt.iter().enumerate() {
            let t = -horizon + n as f64 * ht;
            for (i, &w_x) in wx.iter().enumerate() {
                let x = e.x_initial + i as f64 * hx;
                let u = field.value(e.id, x, t);
                let ux = field.dx(e.id, x, t);
                let ut = field.dt(e.id, x, t);
                let f = [p[0] * ut[0] + p[2] * u[0] + ux[1], p[1] * ut[1] + p[3] * u[1] + ux[0]];
                let w = w_t * w_x * (2.0 * s * (weights.phi(k, x, t) - top)).exp();
                acc[0] += w * (u[0] * u[0] + u[1] * u[1]);
                acc[1] += w * (f[0] * f[0] + f[1] * f[1]);
            }
            if leaves.contains(&k) {
                let u = field.value(e.id, e.x_terminal, t);
                acc[2] += w_t * u[0] * u[0] * (2.0 * s * (weights.phi(k, e.x_terminal, t) - top)).exp();
            }
        }
    }
    let shift = 2.0 * s * top;
    [
        acc[0].ln() + shift + 2.0 * s.ln(),
        acc[1].ln() + shift,
        acc[2].ln() + shift + s.ln(),
    ]
}

use nalgebra::{Matrix2, Vector2};

use super::assumption::initial_samples;
use super::{check_assumption2, CoefficientPerturbation, ExperimentPair, InverseError};
use crate::dynamics::{solve, CoefficientField, Direction, FieldTrajectory, GridSpec, Mesh};
use crate::network::{EdgeId, NetworkTopology};

/// `∂ₜw(·, 0)` of one experiment: `[∂ₜw₁, ∂ₜw₂]` at every node of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialRates {
    pub edges: Vec<[Vec<f64>; 2]>,
}

/// `∂ₜu(·, 0)` from the equations themselves: the data `z` are the state at
/// `t = 0`, so `c₁∂ₜu₁ = −(∂ₓz₂ + c₃z₁)` and `c₂∂ₜu₂ = −(∂ₓz₁ + c₄z₂)`.
fn rest_rate(c: [f64; 4], z: [f64; 2], dz: [f64; 2]) -> [f64; 2] {
    [-(dz[1] + c[2] * z[0]) / c[0], -(dz[0] + c[3] * z[1]) / c[1]]
}

/// Exact `∂ₜw_m(·, 0)` for a known `ρ`, without any time stepping.
pub fn algebraic_rates(
    mesh: &Mesh,
    pair: &ExperimentPair,
    p: &CoefficientField,
    rho: &CoefficientPerturbation,
) -> Result<[InitialRates; 2], InverseError> {
    let q = rho.apply(p)?;
    p.check_mesh(mesh)?;
    let mut out = [InitialRates { edges: Vec::new() }, InitialRates { edges: Vec::new() }];
    for (k, m) in mesh.edges().iter().enumerate() {
        let mut rates = [[vec![0.0; m.nodes()], vec![0.0; m.nodes()]], [vec![0.0; m.nodes()], vec![0.0; m.nodes()]]];
        for i in 0..m.nodes() {
            let (z, dz) = initial_samples(pair, m.id, m.x(i));
            for e in 0..2 {
                let du = rest_rate(p.edge(k).at(i), z[e], dz[e]);
                let dv = rest_rate(q.edge(k).at(i), z[e], dz[e]);
                rates[e][0][i] = du[0] - dv[0];
                rates[e][1][i] = du[1] - dv[1];
            }
        }
        let [a, b] = rates;
        out[0].edges.push(a);
        out[1].edges.push(b);
    }
    Ok(out)
}

/// Fourth-order centered `∂ₜw` at `t = 0` from the five levels around it.
pub fn rates_from_difference(w: &FieldTrajectory) -> Result<InitialRates, InverseError> {
    let l0 = w
        .level_at(0.0)
        .filter(|&l| l >= 2 && l + 2 < w.levels())
        .ok_or_else(|| InverseError::Mismatch("t = 0 needs two stored levels on each side".into()))?;
    let dt = w.dt();
    let edges = (0..w.edge_count())
        .map(|k| {
            let rate = |c: usize| {
                let s = |d: isize| w.component(c, k, (l0 as isize + d) as usize);
                let (m2, m1, p1, p2) = (s(-2), s(-1), s(1), s(2));
                (0..m1.len())
                    .map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * dt))
                    .collect::<Vec<f64>>()
            };
            [rate(0), rate(1)]
        })
        .collect();
    Ok(InitialRates { edges })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectOptions {
    /// Nodes next to each vertex that are not solved but extrapolated from
    /// the nearest solved node.
    pub margin: usize,
    /// Local 2×2 systems with a larger condition number are flagged.
    pub condition_limit: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            margin: 0,
            condition_limit: 1e8,
        }
    }
}

impl DirectOptions {
    pub fn for_simulation() -> Self {
        Self {
            margin: 3,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectReconstruction {
    pub rho: CoefficientPerturbation,
    /// Nodes whose local system was ill-conditioned, filled by interpolation.
    pub flagged: Vec<(EdgeId, f64)>,
}

fn condition(a: &Matrix2<f64>) -> f64 {
    let s = a.singular_values();
    let (hi, lo) = (s.max(), s.min());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Solves the `t = 0` relations node by node. With `v = u − w`,
/// `p₁∂ₜw_{m,1} = ρ₁∂ₜv_{m,1} + ρ₃z_{m,1}` and
/// `p₂∂ₜw_{m,2} = ρ₂∂ₜv_{m,2} + ρ₄z_{m,2}` for `m = 1, 2` give two 2×2
/// systems in `(ρ₁, ρ₃)` and `(ρ₂, ρ₄)`.
pub fn direct_reconstruct_t0(
    mesh: &Mesh,
    pair: &ExperimentPair,
    p: &CoefficientField,
    rates: &[InitialRates; 2],
    options: DirectOptions,
) -> Result<DirectReconstruction, InverseError> {
    p.check_mesh(mesh)?;
    let a2 = check_assumption2(mesh.edges(), pair, None);
    if !a2.pass {
        return Err(InverseError::Assumption2(format!(
            "min |det M| = {:e} at edge {:?}, x = {} (threshold {:e})",
            a2.min_abs_det, a2.edge, a2.x, a2.threshold
        )));
    }
    for r in rates {
        if r.edges.len() != mesh.len()
            || r.edges.iter().zip(mesh.edges()).any(|(e, m)| e[0].len() != m.nodes() || e[1].len() != m.nodes())
        {
            return Err(InverseError::Mismatch("rates do not match the mesh".into()));
        }
    }
    let mut rho = CoefficientPerturbation::zeros(mesh);
    let mut flagged = Vec::new();
    for (k, m) in mesh.edges().iter().enumerate() {
        let n = m.nodes();
        if 2 * options.margin >= n {
            return Err(InverseError::Parameter(format!(
                "margin {} leaves no nodes on edge {}",
                options.margin, m.id
            )));
        }
        let mut solved = vec![false; n];
        let mut values = vec![[0.0; 4]; n];
        for i in options.margin..n - options.margin {
            let (z, dz) = initial_samples(pair, m.id, m.x(i));
            let c = p.edge(k).at(i);
            let r = [
                [rates[0].edges[k][0][i], rates[0].edges[k][1][i]],
                [rates[1].edges[k][0][i], rates[1].edges[k][1][i]],
            ];
            let du = [rest_rate(c, z[0], dz[0]), rest_rate(c, z[1], dz[1])];
            let mut ok = true;
            let mut sol = [0.0; 4];
            for comp in 0..2 {
                let a = Matrix2::new(
                    du[0][comp] - r[0][comp],
                    z[0][comp],
                    du[1][comp] - r[1][comp],
                    z[1][comp],
                );
                let b = Vector2::new(c[comp] * r[0][comp], c[comp] * r[1][comp]);
                match a.lu().solve(&b) {
                    Some(x) if condition(&a) <= options.condition_limit => {
                        sol[comp] = x[0];
                        sol[comp + 2] = x[1];
                    }
                    _ => ok = false,
                }
            }
            if ok {
                values[i] = sol;
                solved[i] = true;
            } else {
                flagged.push((m.id, m.x(i)));
            }
        }
        fill_gaps(&mut values, &solved);
        let e = rho.edge_mut(k);
        for (i, v) in values.into_iter().enumerate() {
            for (comp, x) in v.into_iter().enumerate() {
                e.component_mut(comp)[i] = x;
            }
        }
    }
    Ok(DirectReconstruction { rho, flagged })
}

/// Linear interpolation between solved neighbours, constant beyond the
/// outermost ones. Leaves zeros when nothing was solved.
fn fill_gaps(values: &mut [[f64; 4]], solved: &[bool]) {
    let known: Vec<usize> = (0..values.len()).filter(|&i| solved[i]).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return;
    };
    for i in 0..first {
        values[i] = values[first];
    }
    for i in last + 1..values.len() {
        values[i] = values[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for i in a + 1..b {
            let s = (i - a) as f64 / (b - a) as f64;
            for c in 0..4 {
                values[i][c] = (1.0 - s) * values[a][c] + s * values[b][c];
            }
        }
    }
}

/// Runs both experiments with `p` and `q` over `[−T, T]`, differentiates the
/// difference at `t = 0` and reconstructs `ρ`.
pub fn reconstruct_from_simulation(
    topo: &NetworkTopology,
    p: &CoefficientField,
    q: &CoefficientField,
    pair: &ExperimentPair,
    grid: &GridSpec,
    options: DirectOptions,
) -> Result<DirectReconstruction, InverseError> {
    let run = |c: &CoefficientField, m: usize| solve(topo, c, &pair.experiments[m], grid, Direction::Both);
    let mut rates = Vec::with_capacity(2);
    for m in 0..2 {
        let u = run(p, m)?.trajectory;
        let v = run(q, m)?.trajectory;
        rates.push(rates_from_difference(&u.difference(&v)?)?);
    }
    let rates: [InitialRates; 2] = rates.try_into().expect("two experiments");
    direct_reconstruct_t0(&grid.mesh, pair, p, &rates, options)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn setup() -> (NetworkTopology, Mesh, CoefficientField, ExperimentPair) {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let mesh = Mesh::uniform(&net, 20).unwrap();
        let p = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.1, 0.1]).unwrap();
        let pair = ExperimentPair::tree_potentials(&net, [1.0, 1.0, 0.1, 0.1]);
        (net, mesh, p, pair)
    }

    #[test]
    fn zero_rates_give_zero_rho() {
        let (_, mesh, p, pair) = setup();
        let zero = algebraic_rates(&mesh, &pair, &p, &CoefficientPerturbation::zeros(&mesh)).unwrap();
        let r = direct_reconstruct_t0(&mesh, &pair, &p, &zero, DirectOptions::default()).unwrap();
        assert_eq!(r.rho.max_abs(), 0.0);
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn algebraic_round_trip() {
        let (_, mesh, p, pair) = setup();
        let rho = CoefficientPerturbation::from_fn(&mesh, |id, x| {
            let s = id as f64 * 0.1;
            [0.2 * (x + s).sin(), -0.1 * x + s, 0.05 * (1.0 + x), 0.3 * s]
        });
        let rates = algebraic_rates(&mesh, &pair, &p, &rho).unwrap();
        let r = direct_reconstruct_t0(&mesh, &pair, &p, &rates, DirectOptions::default()).unwrap();
        assert!(r.rho.relative_error(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn degenerate_pair_is_rejected() {
        let (_, mesh, p, pair) = setup();
        let same = ExperimentPair::new(pair.experiments[0].clone(), pair.experiments[0].clone());
        let rates = algebraic_rates(&mesh, &same, &p, &CoefficientPerturbation::zeros(&mesh)).unwrap();
        assert!(matches!(
            direct_reconstruct_t0(&mesh, &same, &p, &rates, DirectOptions::default()),
            Err(InverseError::Assumption2(_))
        ));
    }

    #[test]
    fn gaps_are_interpolated() {
        let mut v = vec![[0.0; 4], [1.0; 4], [0.0; 4], [3.0; 4], [0.0; 4]];
        fill_gaps(&mut v, &[false, true, false, true, false]);
        assert_eq!(v.iter().map(|x| x[0]).collect::<Vec<_>>(), vec![1.0, 1.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn simulation_recovers_piecewise_constant_rho() {
        let (net, mesh, p, pair) = setup();
        let truth = CoefficientPerturbation::piecewise_constant(
            &mesh,
            &BTreeMap::from([(2, [0.1, -0.05, 0.02, 0.03]), (5, [0.0, 0.1, 0.05, 0.0])]),
        );
        let q = truth.apply(&p).unwrap();
        let grid = GridSpec::new(mesh, 0.05, 0.5, &p).unwrap();
        let r = reconstruct_from_simulation(&net, &p, &q, &pair, &grid, DirectOptions::for_simulation()).unwrap();
        let err = r.rho.relative_error(&truth).unwrap();
        assert!(err < 0.05, "relative error {err}");
    }
}

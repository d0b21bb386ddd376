mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use telegraphnet::dynamics::{
    boundary_trace, solve, AnalyticField, CoefficientField, DAlembert, Direction, FieldTrajectory, GridSpec, Mesh,
    ProblemData,
};
use telegraphnet::network::NetworkTopology;
use telegraphnet::profile::Profile;

use common::{random_tree, tree};

fn coefficients() -> impl Strategy<Value = [f64; 4]> {
    (0.5..2.0f64, 0.5..2.0f64, 0.0..0.5f64, 0.0..0.5f64).prop_map(|(a, b, c, d)| [a, b, c, d])
}

fn max_diff(a: &FieldTrajectory, b: &FieldTrajectory) -> f64 {
    a.difference(b).unwrap().max_abs()
}

/// Discrete `L²` distance at one level to an exact field.
fn level_error(traj: &FieldTrajectory, level: usize, exact: &dyn AnalyticField) -> f64 {
    let t = traj.time(level);
    let m = traj.mesh(0);
    (0..m.nodes())
        .map(|i| {
            let e = exact.value(m.id, m.x(i), t);
            let d = [traj.u1(0, level)[i] - e[0], traj.u2(0, level)[i] - e[1]];
            m.weight(i) * (d[0] * d[0] + d[1] * d[1])
        })
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_are_linear_in_the_data(
        p in coefficients(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        center in 1.2..1.8f64,
    ) {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let mesh = Mesh::uniform(&net, 20).unwrap();
        let c = CoefficientField::uniform(&mesh, p).unwrap();
        let grid = GridSpec::new(mesh, 0.5, 0.5, &c).unwrap();
        let bump = Profile::gaussian(1.0, center, 0.08);
        let pulse = Profile::Sine { amplitude: 0.5, wavenumber: 3.0, phase: 0.0, offset: 0.0 };
        let z1 = ProblemData::new().with_initial(2, Profile::Zero, bump.clone());
        let z2 = ProblemData::new().with_initial(3, bump.clone(), Profile::Zero).with_boundary(0, pulse.clone());
        let mut both = z1.scaled(a);
        let z2s = z2.scaled(b);
        both.initial.extend(z2s.initial.clone());
        both.boundary.extend(z2s.boundary.clone());
        let run = |d: &ProblemData| solve(&net, &c, d, &grid, Direction::Both).unwrap().trajectory;
        let (u1, u2, u) = (run(&z1), run(&z2), run(&both));
        let combo = u1.linear_combination(a, &u2, b).unwrap();
        let scale = u.max_abs().max(1.0);
        prop_assert!(max_diff(&u, &combo) <= 1e-12 * scale);
    }

    #[test]
    fn vertex_conditions_hold_at_every_step(
        edges in random_tree(6),
        coeffs in prop::collection::vec(coefficients(), 6),
        which in 0usize..6,
    ) {
        let net = tree(&edges);
        let mesh = Mesh::uniform(&net, 16).unwrap();
        let values: BTreeMap<usize, [f64; 4]> = net.edges().iter().zip(&coeffs).map(|(e, &c)| (e.id, c)).collect();
        let c = CoefficientField::per_edge(&mesh, &values, [1.0, 1.0, 0.0, 0.0]).unwrap();
        let grid = GridSpec::new(mesh, 1.0, 0.5, &c).unwrap();
        let e = net.edges()[which % net.edge_count()];
        let mid = 0.5 * (e.x_initial + e.x_terminal);
        let data = ProblemData::new().with_initial(e.id, Profile::Zero, Profile::gaussian(1.0, mid, 0.06 * e.length));
        let u = solve(&net, &c, &data, &grid, Direction::Both).unwrap().trajectory;
        let scale = u.max_abs();
        for l in 0..u.levels() {
            let (current, voltage) = u.kirchhoff_residuals(&net, l);
            prop_assert!(current <= 1e-12 * scale && voltage <= 1e-12 * scale, "level {}: {} {}", l, current, voltage);
        }
    }
}

#[test]
fn backward_after_forward_returns_the_initial_data() {
    let net = NetworkTopology::single_edge(1.0).unwrap();
    let mesh = Mesh::uniform(&net, 200).unwrap();
    let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
    let grid = GridSpec::new(mesh.clone(), 0.25, 0.5, &c).unwrap();
    let (current, voltage) = (Profile::gaussian(0.5, 0.4, 0.05), Profile::gaussian(1.0, 0.4, 0.05));
    let exact = DAlembert::from_initial(&current, &voltage, 1.0, 1.0);
    let fwd = solve(
        &net,
        &c,
        &ProblemData::new().with_initial(1, current.clone(), voltage.clone()),
        &grid,
        Direction::Forward,
    )
    .unwrap()
    .trajectory;
    let last = fwd.levels() - 1;
    let one_way = level_error(&fwd, last, &exact);

    let m = mesh.edge(0);
    let samples = |v: &[f64]| Profile::Samples {
        start: m.x0,
        step: m.h,
        values: v.to_vec(),
    };
    let restart = ProblemData::new().with_initial(1, samples(fwd.u1(0, last)), samples(fwd.u2(0, last)));
    let back = solve(&net, &c, &restart, &grid, Direction::Backward).unwrap().trajectory;
    // Level 0 of the backward run sits at t = −T and should match the data at t = 0.
    let returned: f64 = (0..m.nodes())
        .map(|i| {
            let x = m.x(i);
            let d = [back.u1(0, 0)[i] - current.value(x), back.u2(0, 0)[i] - voltage.value(x)];
            m.weight(i) * (d[0] * d[0] + d[1] * d[1])
        })
        .sum::<f64>()
        .sqrt();
    assert!(one_way > 0.0);
    assert!(returned <= 2.0 * one_way, "{returned} vs {one_way}");
}

#[test]
fn refinement_reduces_error_at_second_order() {
    let net = NetworkTopology::single_edge(1.0).unwrap();
    let f = Profile::gaussian(1.0, 0.35, 0.06);
    let exact = DAlembert::from_initial(&f, &f, 1.0, 1.0);
    let errors: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&cells| {
            let mesh = Mesh::uniform(&net, cells).unwrap();
            let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
            let grid = GridSpec::new(mesh, 0.3, 0.5, &c).unwrap();
            let data = ProblemData::new().with_initial(1, f.clone(), f.clone());
            let u = solve(&net, &c, &data, &grid, Direction::Forward).unwrap().trajectory;
            level_error(&u, u.levels() - 1, &exact)
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.2..=4.8).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn leaf_trace_of_a_travelling_bump() {
    // A right-moving pulse hitting a grounded end doubles its current there:
    // u₁(1, t) = 2 f(1 − t).
    let net = NetworkTopology::single_edge(1.0).unwrap();
    let mesh = Mesh::uniform(&net, 400).unwrap();
    let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
    let grid = GridSpec::new(mesh, 1.0, 0.5, &c).unwrap();
    let f = Profile::gaussian(1.0, 0.4, 0.05);
    let data = ProblemData::new().with_initial(1, f.clone(), f.clone());
    let u = solve(&net, &c, &data, &grid, Direction::Forward).unwrap().trajectory;
    let traces = boundary_trace(&u, &net);
    assert_eq!(traces.leaves.len(), 1);
    let values = &traces.leaves[0].channels[0];
    let err = values
        .iter()
        .enumerate()
        .map(|(n, v)| (v - 2.0 * f.value(1.0 - traces.time(n))).abs())
        .fold(0.0, f64::max);
    assert!(err < 0.01 * 2.0, "{err}");
}

use super::{CoefficientPerturbation, InverseError};
use crate::dynamics::{apply_operator_sampled, CoefficientField, FieldTrajectory};

/// `w = u − v` together with the source `f` it satisfies.
#[derive(Debug, Clone)]
pub struct DifferenceField {
    pub w: FieldTrajectory,
    /// `(ρ₁∂ₜv₁ + ρ₃v₁, ρ₂∂ₜv₂ + ρ₄v₂)`.
    pub source: FieldTrajectory,
    /// Largest `|L(p)w − f|` over interior levels, with sampled derivatives.
    pub residual: f64,
}

/// `u` solves with `p`, `v` with `p + ρ`; both from the same data.
pub fn difference_field(
    u: &FieldTrajectory,
    v: &FieldTrajectory,
    p: &CoefficientField,
    rho: &CoefficientPerturbation,
) -> Result<DifferenceField, InverseError> {
    let w = u.difference(v)?;
    if rho.edge_count() != v.edge_count() || (0..v.edge_count()).any(|k| rho.mesh(k) != v.mesh(k)) {
        return Err(InverseError::Mismatch("perturbation does not match the trajectory grid".into()));
    }
    let levels = v.levels();
    if levels < 3 {
        return Err(InverseError::Mismatch(format!("{levels} levels; at least 3 are needed")));
    }
    let dt = v.dt();
    let last = levels - 1;
    let mut source = v.scaled(0.0);
    for k in 0..v.edge_count() {
        let r = rho.edge(k);
        for l in 0..levels {
            let rate = |c: usize, i: usize| {
                let s = |lv: usize| v.component(c, k, lv)[i];
                if l == 0 {
                    (-3.0 * s(0) + 4.0 * s(1) - s(2)) / (2.0 * dt)
                } else if l == last {
                    (3.0 * s(last) - 4.0 * s(last - 1) + s(last - 2)) / (2.0 * dt)
                } else {
                    (s(l + 1) - s(l - 1)) / (2.0 * dt)
                }
            };
            let values: Vec<[f64; 2]> = (0..v.mesh(k).nodes())
                .map(|i| {
                    [
                        r.p1[i] * rate(0, i) + r.p3[i] * v.u1(k, l)[i],
                        r.p2[i] * rate(1, i) + r.p4[i] * v.u2(k, l)[i],
                    ]
                })
                .collect();
            let (f1, f2) = source.level_mut(k, l);
            for (i, f) in values.into_iter().enumerate() {
                f1[i] = f[0];
                f2[i] = f[1];
            }
        }
    }
    let lw = apply_operator_sampled(p, &w)?;
    let mut residual = 0.0_f64;
    for k in 0..w.edge_count() {
        let n = w.mesh(k).nodes();
        for l in 1..last {
            for c in 0..2 {
                let (a, b) = (lw.component(c, k, l), source.component(c, k, l));
                for i in 1..n - 1 {
                    residual = residual.max((a[i] - b[i]).abs());
                }
            }
        }
    }
    Ok(DifferenceField { w, source, residual })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::dynamics::{solve, Direction, GridSpec, Mesh, ProblemData};
    use crate::network::NetworkTopology;
    use crate::profile::Profile;

    fn run(rho: &BTreeMap<usize, [f64; 4]>) -> (DifferenceField, FieldTrajectory) {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let mesh = Mesh::uniform(&net, 40).unwrap();
        let p = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
        let rho = CoefficientPerturbation::piecewise_constant(&mesh, rho);
        let q = rho.apply(&p).unwrap();
        let data = ProblemData::new().with_initial(3, Profile::gaussian(1.0, 1.5, 0.1), Profile::Zero);
        let grid = GridSpec::new(mesh, 0.4, 0.5, &p).unwrap();
        let u = solve(&net, &p, &data, &grid, Direction::Forward).unwrap().trajectory;
        let v = solve(&net, &q, &data, &grid, Direction::Forward).unwrap().trajectory;
        (difference_field(&u, &v, &p, &rho).unwrap(), v)
    }

    #[test]
    fn zero_perturbation_gives_zero_difference() {
        let (d, _) = run(&BTreeMap::new());
        assert_eq!(d.w.max_abs(), 0.0);
        assert_eq!(d.source.max_abs(), 0.0);
    }

    #[test]
    fn source_lives_on_perturbed_edge() {
        let (d, v) = run(&BTreeMap::from([(3, [0.2, 0.0, 0.0, 0.0])]));
        assert_eq!(d.w.l2_squared(0), 0.0);
        for k in [0, 1, 3, 4] {
            assert!(d.source.u1(k, 5).iter().chain(d.source.u2(k, 5)).all(|&x| x == 0.0));
        }
        let dt = v.dt();
        let expected = 0.2 * (v.u1(2, 6)[20] - v.u1(2, 4)[20]) / (2.0 * dt);
        assert!((d.source.u1(2, 5)[20] - expected).abs() < 1e-14);
        assert!(d.source.max_abs() > 0.0);
    }
}

use super::{CoefficientField, DynamicsError, FieldTrajectory};

/// `E(t) = Σ_j ∫ (p₁u₁² + p₂u₂²) dx` at one stored level, trapezoid rule.
pub fn energy(traj: &FieldTrajectory, coeffs: &CoefficientField, level: usize) -> f64 {
    (0..traj.edge_count())
        .map(|k| {
            let m = traj.mesh(k);
            let c = coeffs.edge(k);
            let (a, b) = (traj.u1(k, level), traj.u2(k, level));
            (0..m.nodes())
                .map(|i| m.weight(i) * (c.p1[i] * a[i] * a[i] + c.p2[i] * b[i] * b[i]))
                .sum::<f64>()
        })
        .sum()
}

pub fn energy_series(traj: &FieldTrajectory, coeffs: &CoefficientField) -> Vec<f64> {
    (0..traj.levels()).map(|l| energy(traj, coeffs, l)).collect()
}

/// Time-derivative energy profile `Σ_j Σ_{k=0..3} ∫ |∂ₜᵏu_j|² dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBoundReport {
    /// Largest value over the evaluated levels.
    pub max: f64,
    pub time_of_max: f64,
    /// `(t, [k = 0, 1, 2, 3 contributions])` at every level with a full stencil.
    pub profile: Vec<(f64, [f64; 4])>,
}

impl EnergyBoundReport {
    pub fn totals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.profile.iter().map(|(t, v)| (*t, v.iter().sum()))
    }
}

/// Needs five levels: `∂ₜ`, `∂ₜ²` use centered three-point differences and
/// `∂ₜ³` the five-point stencil `(u₊₂ − 2u₊₁ + 2u₋₁ − u₋₂) / 2Δt³`.
pub fn energy_bound_report(traj: &FieldTrajectory) -> Result<EnergyBoundReport, DynamicsError> {
    const STENCIL: usize = 5;
    if traj.levels() < STENCIL {
        return Err(DynamicsError::InsufficientLevels {
            required: STENCIL,
            found: traj.levels(),
        });
    }
    let dt = traj.dt();
    let mut profile = Vec::with_capacity(traj.levels() - 4);
    for l in 2..traj.levels() - 2 {
        let mut parts = [0.0; 4];
        for k in 0..traj.edge_count() {
            let m = traj.mesh(k);
            for comp in 0..2 {
                let u = |d: isize| traj.component(comp, k, (l as isize + d) as usize);
                let (um2, um1, u0, up1, up2) = (u(-2), u(-1), u(0), u(1), u(2));
                for i in 0..m.nodes() {
                    let w = m.weight(i);
                    let d0 = u0[i];
                    let d1 = (up1[i] - um1[i]) / (2.0 * dt);
                    let d2 = (up1[i] - 2.0 * u0[i] + um1[i]) / (dt * dt);
                    let d3 = (up2[i] - 2.0 * up1[i] + 2.0 * um1[i] - um2[i]) / (2.0 * dt * dt * dt);
                    for (p, d) in parts.iter_mut().zip([d0, d1, d2, d3]) {
                        *p += w * d * d;
                    }
                }
            }
        }
        profile.push((traj.time(l), parts));
    }
    let (time_of_max, max) = profile
        .iter()
        .map(|(t, v)| (*t, v.iter().sum::<f64>()))
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(EnergyBoundReport {
        max,
        time_of_max,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Mesh;
    use crate::network::NetworkTopology;

    #[test]
    fn zero_field_has_zero_energy() {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let mesh = Mesh::uniform(&net, 8).unwrap();
        let c = CoefficientField::uniform(&mesh, [1.0, 2.0, 0.0, 0.0]).unwrap();
        let tr = FieldTrajectory::zeros(&mesh, 0.0, 0.1, 6);
        assert_eq!(energy(&tr, &c, 3), 0.0);
        assert_eq!(energy_bound_report(&tr).unwrap().max, 0.0);
    }

    #[test]
    fn derivative_stencils_on_cubics() {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let mesh = Mesh::uniform(&net, 4).unwrap();
        let tr = FieldTrajectory::from_fn(&mesh, 0.0, 0.1, 7, |_, _, t| [t * t * t, 0.0]);
        let r = energy_bound_report(&tr).unwrap();
        let (t, v) = r.profile[1];
        assert!((v[1] - (3.0 * t * t + 0.01).powi(2)).abs() < 1e-10);
        assert!((v[2] - (6.0 * t).powi(2)).abs() < 1e-9);
        assert!((v[3] - 36.0).abs() < 1e-7);
    }

    #[test]
    fn too_few_levels() {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let mesh = Mesh::uniform(&net, 4).unwrap();
        let tr = FieldTrajectory::zeros(&mesh, 0.0, 0.1, 4);
        assert_eq!(
            energy_bound_report(&tr),
            Err(DynamicsError::InsufficientLevels { required: 5, found: 4 })
        );
    }
}

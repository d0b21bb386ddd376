use super::{CoefficientField, DynamicsError, FieldTrajectory, Mesh, Source};
use crate::network::EdgeId;
use crate::profile::Profile;

/// A field `(u₁, u₂)` with exact first derivatives.
pub trait AnalyticField: Send + Sync {
    fn value(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2];
    fn dx(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2];
    fn dt(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2];
}

pub fn sample_field(
    mesh: &Mesh,
    field: &dyn AnalyticField,
    t0: f64,
    dt: f64,
    levels: usize,
) -> FieldTrajectory {
    FieldTrajectory::from_fn(mesh, t0, dt, levels, |k, x, t| field.value(mesh.edge(k).id, x, t))
}

fn residual(p: [f64; 4], u: [f64; 2], ux: [f64; 2], ut: [f64; 2]) -> [f64; 2] {
    [
        p[0] * ut[0] + p[2] * u[0] + ux[1],
        p[1] * ut[1] + p[3] * u[1] + ux[0],
    ]
}

/// `L(p)u` at every node and level, with exact derivatives.
pub fn apply_operator(
    coeffs: &CoefficientField,
    mesh: &Mesh,
    field: &dyn AnalyticField,
    t0: f64,
    dt: f64,
    levels: usize,
) -> Result<FieldTrajectory, DynamicsError> {
    coeffs.check_mesh(mesh)?;
    let mut out = FieldTrajectory::zeros(mesh, t0, dt, levels);
    for l in 0..levels {
        let t = out.time(l);
        for (k, m) in mesh.edges().iter().enumerate() {
            let c = coeffs.edge(k);
            let (f1, f2) = out.level_mut(k, l);
            for i in 0..m.nodes() {
                let x = m.x(i);
                let r = residual(
                    c.at(i),
                    field.value(m.id, x, t),
                    field.dx(m.id, x, t),
                    field.dt(m.id, x, t),
                );
                f1[i] = r[0];
                f2[i] = r[1];
            }
        }
    }
    Ok(out)
}

/// `L(p)u` from samples: second-order differences in `x` and `t`, one-sided
/// at edge ends and at the first and last level.
pub fn apply_operator_sampled(
    coeffs: &CoefficientField,
    traj: &FieldTrajectory,
) -> Result<FieldTrajectory, DynamicsError> {
    if traj.levels() < 3 {
        return Err(DynamicsError::InsufficientLevels {
            required: 3,
            found: traj.levels(),
        });
    }
    let mut out = traj.scaled(0.0);
    let dt = traj.dt();
    let last = traj.levels() - 1;
    for k in 0..traj.edge_count() {
        let m = *traj.mesh(k);
        let c = coeffs.edge(k);
        if c.nodes() != m.nodes() {
            return Err(DynamicsError::Mismatch("coefficient samples do not match the trajectory".into()));
        }
        for l in 0..=last {
            let du: Vec<[f64; 2]> = (0..m.nodes())
                .map(|i| {
                    let s = |lv: usize, comp: usize| traj.component(comp, k, lv)[i];
                    let d = |comp: usize| {
                        if l == 0 {
                            (-3.0 * s(0, comp) + 4.0 * s(1, comp) - s(2, comp)) / (2.0 * dt)
                        } else if l == last {
                            (3.0 * s(last, comp) - 4.0 * s(last - 1, comp) + s(last - 2, comp)) / (2.0 * dt)
                        } else {
                            (s(l + 1, comp) - s(l - 1, comp)) / (2.0 * dt)
                        }
                    };
                    [d(0), d(1)]
                })
                .collect();
            let ux = [
                space_derivative(traj.u1(k, l), m.h),
                space_derivative(traj.u2(k, l), m.h),
            ];
            let (a, b) = (traj.u1(k, l).to_vec(), traj.u2(k, l).to_vec());
            let (f1, f2) = out.level_mut(k, l);
            for i in 0..m.nodes() {
                let r = residual(c.at(i), [a[i], b[i]], [ux[0][i], ux[1][i]], du[i]);
                f1[i] = r[0];
                f2[i] = r[1];
            }
        }
    }
    Ok(out)
}

fn space_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len() - 1;
    (0..=n)
        .map(|i| {
            if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n {
                (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Source `f = L(p)u` for an analytic field, evaluated with the nodal
/// coefficients of the node nearest to `x`.
pub struct OperatorSource<F> {
    field: F,
    coeffs: CoefficientField,
    mesh: Mesh,
}

impl<F: AnalyticField> OperatorSource<F> {
    pub fn new(field: F, coeffs: CoefficientField, mesh: Mesh) -> Self {
        Self { field, coeffs, mesh }
    }

    pub fn field(&self) -> &F {
        &self.field
    }
}

impl<F: AnalyticField> Source for OperatorSource<F> {
    fn eval(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2] {
        let Some(k) = self.mesh.edges().iter().position(|m| m.id == edge) else {
            return [0.0, 0.0];
        };
        let m = self.mesh.edge(k);
        let i = (((x - m.x0) / m.h).round().max(0.0) as usize).min(m.cells);
        residual(
            self.coeffs.edge(k).at(i),
            self.field.value(edge, x, t),
            self.field.dx(edge, x, t),
            self.field.dt(edge, x, t),
        )
    }
}

/// Exact solution of the lossless constant-coefficient system on an
/// unbounded line: `w₊ = u₂ + Z u₁` moves right, `w₋ = u₂ − Z u₁` left, both
/// at speed `c = 1/√(p₁p₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DAlembert {
    pub impedance: f64,
    pub speed: f64,
    pub right: Profile,
    pub left: Profile,
}

impl DAlembert {
    pub fn from_initial(current: &Profile, voltage: &Profile, p1: f64, p2: f64) -> Self {
        let z = (p1 / p2).sqrt();
        Self {
            impedance: z,
            speed: 1.0 / (p1 * p2).sqrt(),
            right: Profile::Sum {
                terms: vec![voltage.clone(), current.scaled(z)],
            },
            left: Profile::Sum {
                terms: vec![voltage.clone(), current.scaled(-z)],
            },
        }
    }
}

impl AnalyticField for DAlembert {
    fn value(&self, _: EdgeId, x: f64, t: f64) -> [f64; 2] {
        let r = self.right.value(x - self.speed * t);
        let l = self.left.value(x + self.speed * t);
        [(r - l) / (2.0 * self.impedance), 0.5 * (r + l)]
    }

    fn dx(&self, _: EdgeId, x: f64, t: f64) -> [f64; 2] {
        let r = self.right.derivative(x - self.speed * t);
        let l = self.left.derivative(x + self.speed * t);
        [(r - l) / (2.0 * self.impedance), 0.5 * (r + l)]
    }

    fn dt(&self, _: EdgeId, x: f64, t: f64) -> [f64; 2] {
        let r = -self.speed * self.right.derivative(x - self.speed * t);
        let l = self.speed * self.left.derivative(x + self.speed * t);
        [(r - l) / (2.0 * self.impedance), 0.5 * (r + l)]
    }
}

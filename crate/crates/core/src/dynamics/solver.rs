//! Strang-split characteristic scheme.
//!
//! Each step applies half a step of the zeroth-order terms (exactly, by an
//! exponential integrator), transports the characteristic variables
//! `w± = u₂ ± Z u₁` with speed `±c` by semi-Lagrangian quadratic
//! interpolation, couples the vertices, and applies the second half step of
//! the zeroth-order terms. With constant coefficients the transport reduces
//! to Lax–Wendroff.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::junction::{end_current, junction_voltage};
use super::{CoefficientField, DynamicsError, EdgeMesh, FieldTrajectory, GridSpec, ProblemData};
use crate::network::{EdgeEnd, EdgeId, NetworkTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// `[0, T]`
    #[default]
    Forward,
    /// `[−T, 0]`
    Backward,
    /// `[−T, T]`, glued at `t = 0`.
    Both,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: FieldTrajectory,
    pub warnings: Vec<String>,
}

/// Vertex consistency defects above this are reported.
const CONSISTENCY_WARNING: f64 = 1e-12;

pub fn solve(
    topo: &NetworkTopology,
    coeffs: &CoefficientField,
    data: &ProblemData,
    grid: &GridSpec,
    direction: Direction,
) -> Result<Solution, DynamicsError> {
    if grid.mesh.len() != topo.edge_count()
        || grid.mesh.edges().iter().zip(topo.edges()).any(|(m, e)| m.id != e.id)
    {
        return Err(DynamicsError::Mismatch("mesh does not belong to this network".into()));
    }
    coeffs.check_mesh(&grid.mesh)?;
    coeffs.validate()?;
    grid.check_cfl(coeffs)?;
    for id in data.initial.keys() {
        if topo.edge(*id).is_none() {
            return Err(DynamicsError::Config(format!("initial data for unknown edge {id}")));
        }
    }

    let mut warnings: Vec<String> = topo.warnings().to_vec();
    let compat = data.compatibility(topo);
    if !compat.is_compatible() {
        warnings.push(format!(
            "incompatible corner data (max mismatch {:e})",
            compat.max_mismatch
        ));
        warnings.extend(compat.messages);
    }
    let defect = coeffs.vertex_consistency_defect(topo);
    if defect > CONSISTENCY_WARNING {
        warnings.push(format!("coefficients differ across interior vertices by up to {defect:e}"));
    }

    let trajectory = match direction {
        Direction::Forward => Runner::new(topo, coeffs, data, grid, 1.0).run(),
        Direction::Backward => Runner::new(topo, coeffs, data, grid, -1.0).run().reversed_in_time(),
        Direction::Both => {
            let (back, fwd) = join(
                || Runner::new(topo, coeffs, data, grid, -1.0).run(),
                || Runner::new(topo, coeffs, data, grid, 1.0).run(),
            );
            back.reversed_in_time().glue(&fwd)
        }
    };
    Ok(Solution {
        trajectory,
        warnings,
    })
}

#[cfg(feature = "parallel")]
fn join<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn join<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}

/// Per-edge coefficients derived once, plus the working state.
struct EdgeWork {
    id: EdgeId,
    mesh: EdgeMesh,
    p1: Vec<f64>,
    p2: Vec<f64>,
    /// `±p₃/p₁`
    a: Vec<f64>,
    /// `±p₄/p₂`
    b: Vec<f64>,
    c: Vec<f64>,
    z: Vec<f64>,
    /// `c ∂ₓZ`, the coupling left over by transporting with variable impedance.
    g: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    wp: Vec<f64>,
    wm: Vec<f64>,
}

impl EdgeWork {
    fn source_half(&mut self, data: &ProblemData, sign: f64, tau: f64, h: f64) {
        for i in 0..self.mesh.nodes() {
            let f = match &data.source {
                None => [0.0, 0.0],
                Some(s) if sign > 0.0 => s.eval(self.id, self.mesh.x(i), tau),
                Some(s) => {
                    let v = s.eval(self.id, self.mesh.x(i), -tau);
                    [v[0], -v[1]]
                }
            };
            let old = self.u1[i];
            let new = (-self.a[i] * h).exp() * old + phi1(self.a[i], h) * f[0] / self.p1[i];
            self.u1[i] = new;
            self.u2[i] = (-self.b[i] * h).exp() * self.u2[i]
                + phi1(self.b[i], h) * (f[1] / self.p2[i] + self.g[i] * 0.5 * (old + new));
        }
    }

    fn transport(&mut self, dt: f64) {
        let n = self.mesh.cells;
        for i in 0..=n {
            self.wp[i] = self.u2[i] + self.z[i] * self.u1[i];
            self.wm[i] = self.u2[i] - self.z[i] * self.u1[i];
        }
        let mut np = self.wp.clone();
        let mut nm = self.wm.clone();
        for i in 0..=n {
            let xi = self.mesh.x(i);
            let j = i.clamp(1, n - 1);
            if i > 0 {
                let foot = xi - dt * self.speed_at(xi - 0.5 * dt * self.c[i]);
                np[i] = self.quadratic(&self.wp, j, foot);
            }
            if i < n {
                let foot = xi + dt * self.speed_at(xi + 0.5 * dt * self.c[i]);
                nm[i] = self.quadratic(&self.wm, j, foot);
            }
        }
        for i in 0..=n {
            self.u2[i] = 0.5 * (np[i] + nm[i]);
            self.u1[i] = 0.5 * (np[i] - nm[i]) / self.z[i];
        }
        self.wp = np;
        self.wm = nm;
    }

    /// Linear interpolation of the nodal wave speed, clamped to the edge.
    fn speed_at(&self, y: f64) -> f64 {
        let n = self.mesh.cells;
        let s = ((y - self.mesh.x0) / self.mesh.h).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        let f = s - k as f64;
        self.c[k] * (1.0 - f) + self.c[k + 1] * f
    }

    fn quadratic(&self, w: &[f64], j: usize, y: f64) -> f64 {
        let s = (y - self.mesh.x(j)) / self.mesh.h;
        0.5 * s * (s - 1.0) * w[j - 1] + (1.0 - s * s) * w[j] + 0.5 * s * (s + 1.0) * w[j + 1]
    }

    fn end_node(&self, end: EdgeEnd) -> usize {
        match end {
            EdgeEnd::Initial => 0,
            EdgeEnd::Terminal => self.mesh.cells,
        }
    }

    /// Characteristic entering the vertex at `end`.
    fn arriving(&self, end: EdgeEnd) -> f64 {
        let i = self.end_node(end);
        match end {
            EdgeEnd::Terminal => self.u2[i] + self.z[i] * self.u1[i],
            EdgeEnd::Initial => self.u2[i] - self.z[i] * self.u1[i],
        }
    }
}

fn phi1(a: f64, h: f64) -> f64 {
    let x = a * h;
    if x.abs() < 1e-8 {
        h * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / a
    }
}

struct Runner<'a> {
    topo: &'a NetworkTopology,
    data: &'a ProblemData,
    sign: f64,
    dt: f64,
    steps: usize,
    edges: Vec<EdgeWork>,
    incidence: Vec<(usize, Vec<(usize, EdgeEnd)>)>,
}

impl<'a> Runner<'a> {
    fn new(
        topo: &'a NetworkTopology,
        coeffs: &CoefficientField,
        data: &'a ProblemData,
        grid: &GridSpec,
        sign: f64,
    ) -> Self {
        let edges = grid
            .mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(k, &mesh)| {
                let p = coeffs.edge(k);
                let nodes = mesh.nodes();
                let c: Vec<f64> = (0..nodes).map(|i| 1.0 / (p.p1[i] * p.p2[i]).sqrt()).collect();
                let z: Vec<f64> = (0..nodes).map(|i| (p.p1[i] / p.p2[i]).sqrt()).collect();
                let dz = nodal_derivative(&z, mesh.h);
                let (u1, u2) = (0..nodes)
                    .map(|i| {
                        let v = data.initial_value(mesh.id, mesh.x(i));
                        (sign * v[0], v[1])
                    })
                    .unzip();
                EdgeWork {
                    id: mesh.id,
                    mesh,
                    p1: p.p1.clone(),
                    p2: p.p2.clone(),
                    a: (0..nodes).map(|i| sign * p.p3[i] / p.p1[i]).collect(),
                    b: (0..nodes).map(|i| sign * p.p4[i] / p.p2[i]).collect(),
                    g: c.iter().zip(&dz).map(|(c, d)| c * d).collect(),
                    c,
                    z,
                    u1,
                    u2,
                    wp: vec![0.0; nodes],
                    wm: vec![0.0; nodes],
                }
            })
            .collect();
        let incidence = (0..topo.vertex_count()).map(|v| (v, topo.incident(v))).collect();
        Self {
            topo,
            data,
            sign,
            dt: grid.dt(),
            steps: grid.steps,
            edges,
            incidence,
        }
    }

    fn run(mut self) -> FieldTrajectory {
        let mesh_edges: Vec<EdgeMesh> = self.edges.iter().map(|e| e.mesh).collect();
        let mut traj = FieldTrajectory::zeros_from_meshes(&mesh_edges, 0.0, self.dt, self.steps + 1);
        self.store(&mut traj, 0);
        let (dt, sign, data) = (self.dt, self.sign, self.data);
        for n in 0..self.steps {
            let tau = n as f64 * dt;
            for_each_edge(&mut self.edges, |e| {
                e.source_half(data, sign, tau + 0.25 * dt, 0.5 * dt);
                e.transport(dt);
            });
            self.couple(tau + dt);
            for_each_edge(&mut self.edges, |e| e.source_half(data, sign, tau + 0.75 * dt, 0.5 * dt));
            self.couple(tau + dt);
            self.store(&mut traj, n + 1);
        }
        traj
    }

    fn couple(&mut self, tau: f64) {
        for (v, inc) in &self.incidence {
            let ends: Vec<(f64, f64)> = inc
                .iter()
                .map(|&(k, end)| {
                    let e = &self.edges[k];
                    (e.arriving(end), e.z[e.end_node(end)])
                })
                .collect();
            let voltage = if self.topo.boundary_vertices().contains(v) {
                self.data.boundary_value(*v, self.sign * tau)
            } else {
                let (a, z): (Vec<f64>, Vec<f64>) = ends.iter().copied().unzip();
                junction_voltage(&a, &z)
            };
            for (&(k, end), &(a, z)) in inc.iter().zip(&ends) {
                let e = &mut self.edges[k];
                let i = e.end_node(end);
                e.u2[i] = voltage;
                e.u1[i] = end_current(end, a, voltage, z);
            }
        }
    }

    fn store(&self, traj: &mut FieldTrajectory, level: usize) {
        for (k, e) in self.edges.iter().enumerate() {
            let (a, b) = traj.level_mut(k, level);
            a.copy_from_slice(&e.u1);
            b.copy_from_slice(&e.u2);
        }
    }
}

#[cfg(feature = "parallel")]
fn for_each_edge(edges: &mut [EdgeWork], f: impl Fn(&mut EdgeWork) + Send + Sync) {
    if edges.len() > 1 {
        edges.par_iter_mut().for_each(f);
    } else {
        edges.iter_mut().for_each(f);
    }
}

#[cfg(not(feature = "parallel"))]
fn for_each_edge(edges: &mut [EdgeWork], f: impl Fn(&mut EdgeWork)) {
    edges.iter_mut().for_each(f);
}

/// Second-order nodal derivative: centered inside, one-sided at the ends.
fn nodal_derivative(v: &[f64], h: f64) -> Vec<f64> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Mesh;
    use crate::profile::Profile;

    fn lossless(net: &NetworkTopology, cells: usize, horizon: f64) -> (CoefficientField, GridSpec) {
        let mesh = Mesh::uniform(net, cells).unwrap();
        let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
        let g = GridSpec::new(mesh, horizon, 0.5, &c).unwrap();
        (c, g)
    }

    #[test]
    fn zero_data_stays_zero() {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let (c, g) = lossless(&net, 20, 1.0);
        let s = solve(&net, &c, &ProblemData::new(), &g, Direction::Both).unwrap();
        assert_eq!(s.trajectory.max_abs(), 0.0);
        assert_eq!(s.trajectory.levels(), 2 * g.steps + 1);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn right_moving_bump() {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let (c, g) = lossless(&net, 400, 0.25);
        let f = Profile::gaussian(1.0, 0.35, 0.05);
        let data = ProblemData::new().with_initial(1, f.clone(), f.clone());
        let s = solve(&net, &c, &data, &g, Direction::Forward).unwrap();
        let tr = &s.trajectory;
        let last = tr.levels() - 1;
        let m = tr.mesh(0);
        let err = (0..m.nodes())
            .map(|i| (tr.u2(0, last)[i] - f.value(m.x(i) - 0.25)).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let mesh = Mesh::uniform(&net, 10).unwrap();
        let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
        let g = GridSpec::with_steps(mesh, 1.0, 5, 0.9);
        assert!(matches!(
            solve(&net, &c, &ProblemData::new(), &g, Direction::Forward),
            Err(DynamicsError::Cfl { .. })
        ));
    }

    #[test]
    fn incompatible_data_warns() {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let (c, g) = lossless(&net, 10, 0.5);
        let data = ProblemData::new().with_initial(1, Profile::Zero, Profile::constant(1.0));
        let s = solve(&net, &c, &data, &g, Direction::Forward).unwrap();
        assert!(s.warnings.iter().any(|w| w.contains("incompatible")));
    }

    #[test]
    fn backward_of_lossy_grows() {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let mesh = Mesh::uniform(&net, 40).unwrap();
        let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.5, 0.5]).unwrap();
        let g = GridSpec::new(mesh, 0.2, 0.5, &c).unwrap();
        let bump = Profile::gaussian(1.0, 0.5, 0.08);
        let data = ProblemData::new().with_initial(1, Profile::Zero, bump);
        let s = solve(&net, &c, &data, &g, Direction::Both).unwrap();
        let tr = &s.trajectory;
        let mid = tr.level_at(0.0).unwrap();
        assert!(tr.l2_squared(0) > tr.l2_squared(mid));
        assert!(tr.l2_squared(tr.levels() - 1) < tr.l2_squared(mid));
    }
}

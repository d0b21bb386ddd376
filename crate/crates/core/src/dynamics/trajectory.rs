use std::io::{self, Write};

use super::{DynamicsError, EdgeMesh, Mesh};
use crate::network::{EdgeEnd, NetworkTopology};

/// Space-time samples of one edge, stored level-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSeries {
    pub mesh: EdgeMesh,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl EdgeSeries {
    fn zeros(mesh: EdgeMesh, levels: usize) -> Self {
        Self {
            mesh,
            u1: vec![0.0; levels * mesh.nodes()],
            u2: vec![0.0; levels * mesh.nodes()],
        }
    }

    fn range(&self, level: usize) -> std::ops::Range<usize> {
        let n = self.mesh.nodes();
        level * n..(level + 1) * n
    }
}

/// Two-component field `(u₁, u₂)` (current, voltage) sampled on every edge at
/// uniformly spaced time levels `t_l = t0 + l·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory {
    t0: f64,
    dt: f64,
    levels: usize,
    edges: Vec<EdgeSeries>,
}

impl FieldTrajectory {
    pub fn zeros(mesh: &Mesh, t0: f64, dt: f64, levels: usize) -> Self {
        Self::zeros_from_meshes(mesh.edges(), t0, dt, levels)
    }

    pub(crate) fn zeros_from_meshes(edges: &[EdgeMesh], t0: f64, dt: f64, levels: usize) -> Self {
        Self {
            t0,
            dt,
            levels,
            edges: edges.iter().map(|&m| EdgeSeries::zeros(m, levels)).collect(),
        }
    }

    /// Fills every sample from `f(edge index, x, t)`.
    pub fn from_fn(
        mesh: &Mesh,
        t0: f64,
        dt: f64,
        levels: usize,
        mut f: impl FnMut(usize, f64, f64) -> [f64; 2],
    ) -> Self {
        let mut traj = Self::zeros(mesh, t0, dt, levels);
        for l in 0..levels {
            let t = traj.time(l);
            for (k, s) in traj.edges.iter_mut().enumerate() {
                let r = s.range(l);
                for (i, idx) in r.enumerate() {
                    let v = f(k, s.mesh.x(i), t);
                    s.u1[idx] = v[0];
                    s.u2[idx] = v[1];
                }
            }
        }
        traj
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn time(&self, level: usize) -> f64 {
        self.t0 + level as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.levels - 1)
    }

    /// Level whose time is within `dt·1e-6` of `t`.
    pub fn level_at(&self, t: f64) -> Option<usize> {
        let s = (t - self.t0) / self.dt;
        let l = s.round();
        ((s - l).abs() < 1e-6 && l >= 0.0 && (l as usize) < self.levels).then_some(l as usize)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn mesh(&self, k: usize) -> &EdgeMesh {
        &self.edges[k].mesh
    }

    pub fn u1(&self, k: usize, level: usize) -> &[f64] {
        let s = &self.edges[k];
        &s.u1[s.range(level)]
    }

    pub fn u2(&self, k: usize, level: usize) -> &[f64] {
        let s = &self.edges[k];
        &s.u2[s.range(level)]
    }

    pub fn component(&self, c: usize, k: usize, level: usize) -> &[f64] {
        if c == 0 {
            self.u1(k, level)
        } else {
            self.u2(k, level)
        }
    }

    pub fn level_mut(&mut self, k: usize, level: usize) -> (&mut [f64], &mut [f64]) {
        let s = &mut self.edges[k];
        let r = s.range(level);
        (&mut s.u1[r.clone()], &mut s.u2[r])
    }

    /// `u₁, u₂` at node `i` of edge `k` across all levels.
    pub fn node_series(&self, k: usize, i: usize) -> (Vec<f64>, Vec<f64>) {
        let s = &self.edges[k];
        let n = s.mesh.nodes();
        (0..self.levels)
            .map(|l| (s.u1[l * n + i], s.u2[l * n + i]))
            .unzip()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.levels == other.levels
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt.abs().max(1.0)
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt.abs()
            && self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| a.mesh == b.mesh)
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, DynamicsError> {
        if !self.same_grid(other) {
            return Err(DynamicsError::Mismatch("trajectories live on different grids".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.edges.iter_mut().zip(&other.edges) {
            for (x, y) in a.u1.iter_mut().zip(&b.u1) {
                *x = f(*x, *y);
            }
            for (x, y) in a.u2.iter_mut().zip(&b.u2) {
                *x = f(*x, *y);
            }
        }
        Ok(out)
    }

    pub fn difference(&self, other: &Self) -> Result<Self, DynamicsError> {
        self.combine(other, |a, b| a - b)
    }

    /// `α·self + β·other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self, DynamicsError> {
        self.combine(other, |a, b| alpha * a + beta * b)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.edges {
            s.u1.iter_mut().chain(s.u2.iter_mut()).for_each(|v| *v *= factor);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.edges
            .iter()
            .flat_map(|s| s.u1.iter().chain(&s.u2))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ_j ∫ (u₁² + u₂²) dx` at one level, trapezoid rule.
    pub fn l2_squared(&self, level: usize) -> f64 {
        (0..self.edges.len())
            .map(|k| {
                let m = self.mesh(k);
                let (a, b) = (self.u1(k, level), self.u2(k, level));
                (0..m.nodes()).map(|i| m.weight(i) * (a[i] * a[i] + b[i] * b[i])).sum::<f64>()
            })
            .sum()
    }

    /// Sub-range of levels `[from, to]` inclusive.
    pub fn slice_levels(&self, from: usize, to: usize) -> Self {
        assert!(from <= to && to < self.levels);
        let count = to - from + 1;
        let edges = self
            .edges
            .iter()
            .map(|s| {
                let n = s.mesh.nodes();
                EdgeSeries {
                    mesh: s.mesh,
                    u1: s.u1[from * n..(to + 1) * n].to_vec(),
                    u2: s.u2[from * n..(to + 1) * n].to_vec(),
                }
            })
            .collect();
        Self {
            t0: self.time(from),
            dt: self.dt,
            levels: count,
            edges,
        }
    }

    /// Time-reverses the level order and negates the current.
    pub(crate) fn reversed_in_time(&self) -> Self {
        let mut out = Self {
            t0: -self.t_end(),
            dt: self.dt,
            levels: self.levels,
            edges: Vec::with_capacity(self.edges.len()),
        };
        for s in &self.edges {
            let n = s.mesh.nodes();
            let mut r = EdgeSeries::zeros(s.mesh, self.levels);
            for l in 0..self.levels {
                let src = (self.levels - 1 - l) * n;
                for i in 0..n {
                    r.u1[l * n + i] = -s.u1[src + i];
                    r.u2[l * n + i] = s.u2[src + i];
                }
            }
            out.edges.push(r);
        }
        out
    }

    /// Appends `later`, whose first level must coincide with this one's last.
    pub(crate) fn glue(mut self, later: &Self) -> Self {
        for (a, b) in self.edges.iter_mut().zip(&later.edges) {
            let n = a.mesh.nodes();
            a.u1.extend_from_slice(&b.u1[n..]);
            a.u2.extend_from_slice(&b.u2[n..]);
        }
        self.levels += later.levels - 1;
        self
    }

    /// Largest current imbalance and voltage jump over interior vertices at
    /// one level.
    pub fn kirchhoff_residuals(&self, topo: &NetworkTopology, level: usize) -> (f64, f64) {
        let mut current = 0.0_f64;
        let mut voltage = 0.0_f64;
        for &v in topo.interior_vertices() {
            let mut balance = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (k, end) in topo.incident(v) {
                let (a, b) = (self.u1(k, level), self.u2(k, level));
                let i = match end {
                    EdgeEnd::Initial => 0,
                    EdgeEnd::Terminal => a.len() - 1,
                };
                balance += match end {
                    EdgeEnd::Terminal => a[i],
                    EdgeEnd::Initial => -a[i],
                };
                lo = lo.min(b[i]);
                hi = hi.max(b[i]);
            }
            current = current.max(balance.abs());
            voltage = voltage.max(hi - lo);
        }
        (current, voltage)
    }

    /// Columns `edge, x, t, u1, u2`, every `stride`-th level.
    pub fn write_csv<W: Write>(&self, topo: &NetworkTopology, mut out: W, stride: usize) -> io::Result<()> {
        writeln!(out, "edge,x,t,u1,u2")?;
        let stride = stride.max(1);
        let mut levels: Vec<usize> = (0..self.levels).step_by(stride).collect();
        if levels.last() != Some(&(self.levels - 1)) {
            levels.push(self.levels - 1);
        }
        for l in levels {
            let t = self.time(l);
            for k in 0..self.edges.len() {
                let m = self.mesh(k);
                let id = topo.edges()[k].id;
                let (a, b) = (self.u1(k, l), self.u2(k, l));
                for i in 0..m.nodes() {
                    writeln!(out, "{id},{},{t},{:e},{:e}", m.x(i), a[i], b[i])?;
                }
            }
        }
        Ok(())
    }
}

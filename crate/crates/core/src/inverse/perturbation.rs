use std::collections::BTreeMap;

use super::InverseError;
use crate::dynamics::{CoefficientField, EdgeCoefficients, EdgeMesh, Mesh};
use crate::network::EdgeId;

/// Node samples of `ρ_j = q_j − p_j` on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPerturbation {
    meshes: Vec<EdgeMesh>,
    edges: Vec<EdgeCoefficients>,
}

impl CoefficientPerturbation {
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(EdgeId, f64) -> [f64; 4]) -> Self {
        let edges = mesh
            .edges()
            .iter()
            .map(|m| {
                let samples: Vec<[f64; 4]> = (0..m.nodes()).map(|i| f(m.id, m.x(i))).collect();
                let comp = |n: usize| samples.iter().map(|s| s[n]).collect::<Vec<f64>>();
                EdgeCoefficients {
                    p1: comp(0),
                    p2: comp(1),
                    p3: comp(2),
                    p4: comp(3),
                }
            })
            .collect();
        Self {
            meshes: mesh.edges().to_vec(),
            edges,
        }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::from_fn(mesh, |_, _| [0.0; 4])
    }

    /// Constant `ρ` per edge; edges missing from `values` are unperturbed.
    pub fn piecewise_constant(mesh: &Mesh, values: &BTreeMap<EdgeId, [f64; 4]>) -> Self {
        Self::from_fn(mesh, |id, _| values.get(&id).copied().unwrap_or([0.0; 4]))
    }

    /// `a_j · sin²(π(x − x_j)/L_j)` on edge `j`: smooth, and zero with zero
    /// slope at every vertex.
    pub fn edge_bumps(mesh: &Mesh, amplitudes: &BTreeMap<EdgeId, [f64; 4]>) -> Self {
        let shapes: BTreeMap<EdgeId, (f64, f64)> = mesh.edges().iter().map(|m| (m.id, (m.x0, m.length()))).collect();
        Self::from_fn(mesh, |id, x| {
            let Some(a) = amplitudes.get(&id) else {
                return [0.0; 4];
            };
            let (x0, len) = shapes[&id];
            let s = (std::f64::consts::PI * (x - x0) / len).sin().powi(2);
            a.map(|v| v * s)
        })
    }

    /// Inverse of [`edge_parameters`](Self::edge_parameters): `4N` values,
    /// edge-major, one constant per edge and component.
    pub fn from_parameters(mesh: &Mesh, params: &[f64]) -> Result<Self, InverseError> {
        if params.len() != 4 * mesh.len() {
            return Err(InverseError::Mismatch(format!(
                "{} parameters for {} edges",
                params.len(),
                mesh.len()
            )));
        }
        let index: BTreeMap<EdgeId, usize> = mesh.edges().iter().enumerate().map(|(k, m)| (m.id, k)).collect();
        Ok(Self::from_fn(mesh, |id, _| {
            let k = index[&id];
            [params[4 * k], params[4 * k + 1], params[4 * k + 2], params[4 * k + 3]]
        }))
    }

    /// Length-weighted mean of each component on each edge, edge-major.
    pub fn edge_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.edges.len());
        for (m, c) in self.meshes.iter().zip(&self.edges) {
            for n in 0..4 {
                let v = c.component(n);
                let s: f64 = (0..m.nodes()).map(|i| m.weight(i) * v[i]).sum();
                out.push(s / m.length());
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn mesh(&self, k: usize) -> &EdgeMesh {
        &self.meshes[k]
    }

    pub fn edge(&self, k: usize) -> &EdgeCoefficients {
        &self.edges[k]
    }

    pub fn edge_mut(&mut self, k: usize) -> &mut EdgeCoefficients {
        &mut self.edges[k]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.edges {
            for n in 0..4 {
                c.component_mut(n).iter_mut().for_each(|v| *v *= factor);
            }
        }
        out
    }

    pub fn matches(&self, mesh: &Mesh) -> bool {
        self.meshes.as_slice() == mesh.edges()
    }

    /// `q = p + ρ`, rejected unless `q₁, q₂ > 0` and `q₃, q₄ ≥ 0`.
    pub fn apply(&self, p: &CoefficientField) -> Result<CoefficientField, InverseError> {
        if p.edges().len() != self.edges.len()
            || p.edges().iter().zip(&self.edges).any(|(a, b)| a.nodes() != b.nodes())
        {
            return Err(InverseError::Mismatch("perturbation does not match the coefficients".into()));
        }
        let mut q = p.clone();
        for (k, (qc, r)) in q.edges_mut().iter_mut().zip(&self.edges).enumerate() {
            for n in 0..4 {
                for (i, (a, b)) in qc.component_mut(n).iter_mut().zip(r.component(n)).enumerate() {
                    *a += b;
                    let bad = if n < 2 { !(*a > 0.0) } else { !(*a >= 0.0) };
                    if bad {
                        return Err(InverseError::Inadmissible(format!(
                            "edge {} x = {}: q{} = {a}",
                            self.meshes[k].id,
                            self.meshes[k].x(i),
                            n + 1
                        )));
                    }
                }
            }
        }
        Ok(q)
    }

    /// `Σ_j Σ_n ∫ ρ_{j,n}² dx`, trapezoid rule.
    pub fn l2_squared(&self) -> f64 {
        self.meshes
            .iter()
            .zip(&self.edges)
            .map(|(m, c)| {
                (0..4)
                    .map(|n| {
                        let v = c.component(n);
                        (0..m.nodes()).map(|i| m.weight(i) * v[i] * v[i]).sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn distance_squared(&self, other: &Self) -> Result<f64, InverseError> {
        if self.meshes != other.meshes {
            return Err(InverseError::Mismatch("perturbations live on different meshes".into()));
        }
        let mut diff = self.clone();
        for (a, b) in diff.edges.iter_mut().zip(&other.edges) {
            for n in 0..4 {
                a.component_mut(n).iter_mut().zip(b.component(n)).for_each(|(x, y)| *x -= y);
            }
        }
        Ok(diff.l2_squared())
    }

    /// `‖self − truth‖ / ‖truth‖` in the `L²` norm above.
    pub fn relative_error(&self, truth: &Self) -> Result<f64, InverseError> {
        Ok((self.distance_squared(truth)? / truth.l2_squared()).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.edges
            .iter()
            .flat_map(|c| c.p1.iter().chain(&c.p2).chain(&c.p3).chain(&c.p4))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Columns `edge, x, rho1, rho2, rho3, rho4`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "edge,x,rho1,rho2,rho3,rho4")?;
        for (m, c) in self.meshes.iter().zip(&self.edges) {
            for i in 0..m.nodes() {
                let r = c.at(i);
                writeln!(out, "{},{},{:e},{:e},{:e},{:e}", m.id, m.x(i), r[0], r[1], r[2], r[3])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkTopology;

    fn setup() -> (Mesh, CoefficientField) {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let mesh = Mesh::uniform(&net, 10).unwrap();
        let p = CoefficientField::uniform(&mesh, [1.0, 2.0, 0.1, 0.0]).unwrap();
        (mesh, p)
    }

    #[test]
    fn parameters_round_trip() {
        let (mesh, _) = setup();
        let params: Vec<f64> = (0..20).map(|i| 0.01 * i as f64).collect();
        let r = CoefficientPerturbation::from_parameters(&mesh, &params).unwrap();
        for (a, b) in r.edge_parameters().iter().zip(&params) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(CoefficientPerturbation::from_parameters(&mesh, &params[1..]).is_err());
    }

    #[test]
    fn apply_checks_admissibility() {
        let (mesh, p) = setup();
        let ok = CoefficientPerturbation::piecewise_constant(&mesh, &BTreeMap::from([(2, [0.5, 0.0, -0.1, 0.0])]));
        let q = ok.apply(&p).unwrap();
        assert_eq!(q.edge(1).at(3), [1.5, 2.0, 0.0, 0.0]);
        let bad = CoefficientPerturbation::piecewise_constant(&mesh, &BTreeMap::from([(3, [0.0, 0.0, 0.0, -0.01])]));
        assert!(matches!(bad.apply(&p), Err(InverseError::Inadmissible(_))));
    }

    #[test]
    fn norms() {
        let (mesh, _) = setup();
        let r = CoefficientPerturbation::piecewise_constant(&mesh, &BTreeMap::from([(1, [0.0, 2.0, 0.0, 0.0])]));
        assert!((r.l2_squared() - 4.0).abs() < 1e-12);
        assert!((r.scaled(0.5).l2_squared() - 1.0).abs() < 1e-12);
        assert!(r.relative_error(&r).unwrap() == 0.0);
        let z = CoefficientPerturbation::zeros(&mesh);
        assert!((z.relative_error(&r).unwrap() - 1.0).abs() < 1e-12);
    }
}

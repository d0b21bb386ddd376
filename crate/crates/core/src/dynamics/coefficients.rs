use std::collections::BTreeMap;

use super::{DynamicsError, Mesh};
use crate::network::{EdgeEnd, EdgeId, NetworkTopology};

/// Node samples of (L, C, R, G) per unit length on one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCoefficients {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub p3: Vec<f64>,
    pub p4: Vec<f64>,
}

impl EdgeCoefficients {
    pub fn component(&self, n: usize) -> &[f64] {
        match n {
            0 => &self.p1,
            1 => &self.p2,
            2 => &self.p3,
            3 => &self.p4,
            _ => panic!("coefficient component {n} out of range"),
        }
    }

    pub fn component_mut(&mut self, n: usize) -> &mut Vec<f64> {
        match n {
            0 => &mut self.p1,
            1 => &mut self.p2,
            2 => &mut self.p3,
            3 => &mut self.p4,
            _ => panic!("coefficient component {n} out of range"),
        }
    }

    pub fn at(&self, i: usize) -> [f64; 4] {
        [self.p1[i], self.p2[i], self.p3[i], self.p4[i]]
    }

    pub fn nodes(&self) -> usize {
        self.p1.len()
    }
}

/// Upper bounds `M₁..M₄` and lower bounds `M̲₁, M̲₂` of the admissible class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub upper: [f64; 4],
    pub lower: [f64; 2],
}

impl CoefficientBounds {
    pub fn contains(&self, p: [f64; 4]) -> bool {
        p[0] >= self.lower[0]
            && p[1] >= self.lower[1]
            && p[2] >= 0.0
            && p[3] >= 0.0
            && p.iter().zip(&self.upper).all(|(v, m)| v <= m)
    }
}

/// Sampled coefficient vectors `p_j` on every edge of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    ids: Vec<EdgeId>,
    edges: Vec<EdgeCoefficients>,
}

impl CoefficientField {
    pub fn from_fn(
        mesh: &Mesh,
        mut f: impl FnMut(EdgeId, f64) -> [f64; 4],
    ) -> Result<Self, DynamicsError> {
        let mut edges = Vec::with_capacity(mesh.len());
        for em in mesh.edges() {
            let mut c = EdgeCoefficients {
                p1: Vec::with_capacity(em.nodes()),
                p2: Vec::with_capacity(em.nodes()),
                p3: Vec::with_capacity(em.nodes()),
                p4: Vec::with_capacity(em.nodes()),
            };
            for i in 0..em.nodes() {
                let p = f(em.id, em.x(i));
                c.p1.push(p[0]);
                c.p2.push(p[1]);
                c.p3.push(p[2]);
                c.p4.push(p[3]);
            }
            edges.push(c);
        }
        let field = Self {
            ids: mesh.edges().iter().map(|m| m.id).collect(),
            edges,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn uniform(mesh: &Mesh, p: [f64; 4]) -> Result<Self, DynamicsError> {
        Self::from_fn(mesh, |_, _| p)
    }

    /// Per-edge constants; edges missing from `values` get `default`.
    pub fn per_edge(
        mesh: &Mesh,
        values: &BTreeMap<EdgeId, [f64; 4]>,
        default: [f64; 4],
    ) -> Result<Self, DynamicsError> {
        Self::from_fn(mesh, |id, _| values.get(&id).copied().unwrap_or(default))
    }

    pub fn from_samples(mesh: &Mesh, edges: Vec<EdgeCoefficients>) -> Result<Self, DynamicsError> {
        let field = Self {
            ids: mesh.edges().iter().map(|m| m.id).collect(),
            edges,
        };
        field.check_mesh(mesh)?;
        field.validate()?;
        Ok(field)
    }

    /// p₁, p₂ strictly positive, p₃, p₄ non-negative, everything finite.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (id, c) in self.ids.iter().zip(&self.edges) {
            for i in 0..c.nodes() {
                let p = c.at(i);
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(DynamicsError::Domain(format!("edge {id}: non-finite coefficient")));
                }
                if p[0] <= 0.0 || p[1] <= 0.0 {
                    return Err(DynamicsError::Domain(format!(
                        "edge {id}: non-positive inductance or capacitance ({}, {})",
                        p[0], p[1]
                    )));
                }
                if p[2] < 0.0 || p[3] < 0.0 {
                    return Err(DynamicsError::Domain(format!(
                        "edge {id}: negative resistance or conductance ({}, {})",
                        p[2], p[3]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<(), DynamicsError> {
        let ok = self.edges.len() == mesh.len()
            && self
                .edges
                .iter()
                .zip(mesh.edges())
                .all(|(c, m)| c.nodes() == m.nodes() && c.p2.len() == m.nodes());
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::Mismatch("coefficient samples do not match the mesh".into()))
        }
    }

    pub fn edge(&self, k: usize) -> &EdgeCoefficients {
        &self.edges[k]
    }

    pub fn edges(&self) -> &[EdgeCoefficients] {
        &self.edges
    }

    pub fn edges_mut(&mut self) -> &mut [EdgeCoefficients] {
        &mut self.edges
    }

    pub fn endpoint(&self, k: usize, end: EdgeEnd) -> [f64; 4] {
        let c = &self.edges[k];
        match end {
            EdgeEnd::Initial => c.at(0),
            EdgeEnd::Terminal => c.at(c.nodes() - 1),
        }
    }

    /// Tightest bounds containing the field.
    pub fn bounds(&self) -> CoefficientBounds {
        let mut upper = [f64::NEG_INFINITY; 4];
        let mut lower = [f64::INFINITY; 2];
        for c in &self.edges {
            for n in 0..4 {
                for &v in c.component(n) {
                    upper[n] = upper[n].max(v);
                    if n < 2 {
                        lower[n] = lower[n].min(v);
                    }
                }
            }
        }
        CoefficientBounds { upper, lower }
    }

    pub fn is_within(&self, bounds: &CoefficientBounds) -> bool {
        self.edges
            .iter()
            .all(|c| (0..c.nodes()).all(|i| bounds.contains(c.at(i))))
    }

    /// Largest disagreement of the endpoint values of p₁ and p₂ among edges
    /// meeting at an interior vertex.
    pub fn vertex_consistency_defect(&self, topo: &NetworkTopology) -> f64 {
        let mut defect = 0.0_f64;
        for &v in topo.interior_vertices() {
            let inc = topo.incident(v);
            for n in 0..2 {
                let vals: Vec<f64> = inc.iter().map(|&(k, end)| self.endpoint(k, end)[n]).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                defect = defect.max(hi - lo);
            }
        }
        defect
    }

    /// Replaces the endpoint samples of p₁ and p₂ at every interior vertex by
    /// their average over the incident edges. Returns the largest change.
    pub fn enforce_vertex_consistency(&mut self, topo: &NetworkTopology) -> f64 {
        let mut adjustment = 0.0_f64;
        for &v in topo.interior_vertices() {
            let inc = topo.incident(v);
            for n in 0..2 {
                let mean = inc.iter().map(|&(k, end)| self.endpoint(k, end)[n]).sum::<f64>()
                    / inc.len() as f64;
                for &(k, end) in &inc {
                    let comp = self.edges[k].component_mut(n);
                    let i = match end {
                        EdgeEnd::Initial => 0,
                        EdgeEnd::Terminal => comp.len() - 1,
                    };
                    adjustment = adjustment.max((comp[i] - mean).abs());
                    comp[i] = mean;
                }
            }
        }
        adjustment
    }

    /// True when p₃ = p₄ = 0 everywhere.
    pub fn is_lossless(&self) -> bool {
        self.edges
            .iter()
            .all(|c| c.p3.iter().chain(&c.p4).all(|&v| v == 0.0))
    }

    /// `Some(p)` when every sample equals `p`.
    pub fn as_uniform(&self) -> Option<[f64; 4]> {
        let p = self.edges.first()?.at(0);
        self.edges
            .iter()
            .all(|c| (0..c.nodes()).all(|i| c.at(i) == p))
            .then_some(p)
    }
}

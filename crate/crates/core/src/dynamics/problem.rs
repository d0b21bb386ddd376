use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::network::{EdgeEnd, EdgeId, NetworkTopology, VertexId};
use crate::profile::Profile;

/// Right-hand side `f_j(x, t)` of the inhomogeneous system.
pub trait Source: Send + Sync {
    fn eval(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2];
}

impl<F> Source for F
where
    F: Fn(EdgeId, f64, f64) -> [f64; 2] + Send + Sync,
{
    fn eval(&self, edge: EdgeId, x: f64, t: f64) -> [f64; 2] {
        self(edge, x, t)
    }
}

/// Initial data, exterior-vertex voltages and an optional source.
#[derive(Clone, Default)]
pub struct ProblemData {
    /// `(current, voltage)` at `t = 0` as functions of the tree coordinate.
    /// Missing edges start at rest.
    pub initial: BTreeMap<EdgeId, [Profile; 2]>,
    /// Voltage `φ_k(t)` at boundary vertices; missing vertices are grounded.
    pub boundary: BTreeMap<VertexId, Profile>,
    pub source: Option<Arc<dyn Source>>,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("initial", &self.initial)
            .field("boundary", &self.boundary)
            .field("source", &self.source.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl ProblemData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_initial(mut self, edge: EdgeId, current: Profile, voltage: Profile) -> Self {
        self.initial.insert(edge, [current, voltage]);
        self
    }

    pub fn with_boundary(mut self, vertex: VertexId, voltage: Profile) -> Self {
        self.boundary.insert(vertex, voltage);
        self
    }

    pub fn with_source(mut self, source: impl Source + 'static) -> Self {
        self.source = Some(Arc::new(source));
        self
    }

    pub fn initial_value(&self, edge: EdgeId, x: f64) -> [f64; 2] {
        match self.initial.get(&edge) {
            Some([a, b]) => [a.value(x), b.value(x)],
            None => [0.0, 0.0],
        }
    }

    /// `∂ₓz` on an edge.
    pub fn initial_derivative(&self, edge: EdgeId, x: f64) -> [f64; 2] {
        match self.initial.get(&edge) {
            Some([a, b]) => [a.derivative(x), b.derivative(x)],
            None => [0.0, 0.0],
        }
    }

    pub fn boundary_value(&self, vertex: VertexId, t: f64) -> f64 {
        self.boundary.get(&vertex).map_or(0.0, |p| p.value(t))
    }

    /// Multiplies initial data, boundary signals and source by `factor`.
    pub fn scaled(&self, factor: f64) -> ProblemData {
        ProblemData {
            initial: self
                .initial
                .iter()
                .map(|(&k, [a, b])| (k, [a.scaled(factor), b.scaled(factor)]))
                .collect(),
            boundary: self
                .boundary
                .iter()
                .map(|(&k, p)| (k, p.scaled(factor)))
                .collect(),
            source: self.source.clone().map(|s| {
                Arc::new(move |e: EdgeId, x: f64, t: f64| {
                    let v = s.eval(e, x, t);
                    [v[0] * factor, v[1] * factor]
                }) as Arc<dyn Source>
            }),
        }
    }

    /// Measures how far the `t = 0` data are from satisfying the boundary
    /// voltages and the vertex conditions.
    pub fn compatibility(&self, topo: &NetworkTopology) -> CompatibilityReport {
        let mut report = CompatibilityReport::default();
        for v in 0..topo.vertex_count() {
            let x = topo.coordinate(v).expect("vertex");
            let inc = topo.incident(v);
            let volts: Vec<f64> = inc
                .iter()
                .map(|&(k, _)| self.initial_value(topo.edges()[k].id, x)[1])
                .collect();
            if topo.boundary_vertices().contains(&v) {
                let m = (volts[0] - self.boundary_value(v, 0.0)).abs();
                report.record(m, || format!("boundary vertex {v}: z₂ − φ(0) = {m:e}"));
            } else {
                let lo = volts.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = volts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                report.record(hi - lo, || format!("vertex {v}: voltage jump {:e}", hi - lo));
                let balance: f64 = inc
                    .iter()
                    .map(|&(k, end)| {
                        let i = self.initial_value(topo.edges()[k].id, x)[0];
                        match end {
                            EdgeEnd::Terminal => i,
                            EdgeEnd::Initial => -i,
                        }
                    })
                    .sum();
                report.record(balance.abs(), || {
                    format!("vertex {v}: current imbalance {:e}", balance.abs())
                });
            }
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompatibilityReport {
    pub max_mismatch: f64,
    pub messages: Vec<String>,
}

impl CompatibilityReport {
    /// Data are treated as compatible below this absolute mismatch.
    pub const TOLERANCE: f64 = 1e-9;

    fn record(&mut self, m: f64, msg: impl FnOnce() -> String) {
        self.max_mismatch = self.max_mismatch.max(m);
        if m > Self::TOLERANCE {
            self.messages.push(msg());
        }
    }

    pub fn is_compatible(&self) -> bool {
        self.max_mismatch <= Self::TOLERANCE
    }
}

/// Serializable form of [`ProblemData`] without a source term.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(default)]
    pub initial: Vec<InitialEntry>,
    #[serde(default)]
    pub boundary: Vec<BoundaryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEntry {
    pub edge: EdgeId,
    #[serde(default)]
    pub current: Profile,
    #[serde(default)]
    pub voltage: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub vertex: VertexId,
    pub voltage: Profile,
}

impl ProblemSpec {
    pub fn to_data(&self) -> ProblemData {
        ProblemData {
            initial: self
                .initial
                .iter()
                .map(|e| (e.edge, [e.current.clone(), e.voltage.clone()]))
                .collect(),
            boundary: self
                .boundary
                .iter()
                .map(|b| (b.vertex, b.voltage.clone()))
                .collect(),
            source: None,
        }
    }
}

impl From<&ProblemData> for ProblemSpec {
    fn from(d: &ProblemData) -> Self {
        ProblemSpec {
            initial: d
                .initial
                .iter()
                .map(|(&edge, [c, v])| InitialEntry {
                    edge,
                    current: c.clone(),
                    voltage: v.clone(),
                })
                .collect(),
            boundary: d
                .boundary
                .iter()
                .map(|(&vertex, p)| BoundaryEntry {
                    vertex,
                    voltage: p.clone(),
                })
                .collect(),
        }
    }
}

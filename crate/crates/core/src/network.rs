//! Tree-shaped networks: edges, root-distance coordinates and incidence sets.
//!
//! Every point of the tree gets the coordinate `x` equal to its path length
//! from the root vertex. Each edge is oriented so that its initial node is the
//! endpoint closer to the root, which gives `x(initial) + length = x(terminal)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Edges shorter than this are accepted but reported.
pub const SHORT_EDGE_WARNING: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("edge list is empty")]
    Empty,
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("edge {0} is a self-loop")]
    SelfLoop(EdgeId),
    #[error("edge {id} has non-positive length {length}")]
    NonPositiveLength { id: EdgeId, length: f64 },
    #[error("cycle detected through edge {0}")]
    Cycle(EdgeId),
    #[error("vertex count {found} does not equal edge count + 1 = {expected}")]
    VertexCount { found: usize, expected: usize },
    #[error("vertex ids must be dense in 0..={max}, found {found}")]
    SparseVertexIds { max: usize, found: VertexId },
    #[error("network is disconnected: vertex {0} is unreachable from the root")]
    Disconnected(VertexId),
    #[error("root vertex {root} must have incidence degree 1, found {degree}")]
    RootDegree { root: VertexId, degree: usize },
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("network file: {0}")]
    Format(String),
}

/// An edge as supplied by the user, in either orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDescriptor {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    pub length: f64,
}

impl EdgeDescriptor {
    pub fn new(id: EdgeId, tail: VertexId, head: VertexId, length: f64) -> Self {
        Self {
            id,
            tail,
            head,
            length,
        }
    }
}

/// An edge oriented away from the root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub initial: VertexId,
    pub terminal: VertexId,
    pub length: f64,
    pub x_initial: f64,
    pub x_terminal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// Incidence degree 1 (the set Π₁).
    Boundary,
    /// Incidence degree > 1 (the set Π₂).
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexClass {
    pub vertex: VertexId,
    pub kind: VertexKind,
    /// Edges whose initial node is this vertex.
    pub initial_of: BTreeSet<EdgeId>,
    /// Edges whose terminal node is this vertex.
    pub terminal_of: BTreeSet<EdgeId>,
}

/// Which end of an edge touches a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeEnd {
    Initial,
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    edges: Vec<Edge>,
    index: BTreeMap<EdgeId, usize>,
    root: VertexId,
    coordinates: Vec<f64>,
    initial_sets: Vec<BTreeSet<EdgeId>>,
    terminal_sets: Vec<BTreeSet<EdgeId>>,
    boundary: BTreeSet<VertexId>,
    interior: BTreeSet<VertexId>,
    warnings: Vec<String>,
}

impl NetworkTopology {
    /// Validates the tree and derives coordinates, orientation and index sets.
    pub fn build(edges: &[EdgeDescriptor], root: VertexId) -> Result<Self, NetworkError> {
        if edges.is_empty() {
            return Err(NetworkError::Empty);
        }
        let n = edges.len();
        let mut ids = BTreeSet::new();
        let mut warnings = Vec::new();
        for e in edges {
            if !ids.insert(e.id) {
                return Err(NetworkError::DuplicateEdge(e.id));
            }
            if e.tail == e.head {
                return Err(NetworkError::SelfLoop(e.id));
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(NetworkError::NonPositiveLength {
                    id: e.id,
                    length: e.length,
                });
            }
            if e.length < SHORT_EDGE_WARNING {
                warnings.push(format!(
                    "edge {} has length {:e} below {:e}",
                    e.id, e.length, SHORT_EDGE_WARNING
                ));
            }
        }

        let max_id = edges.iter().map(|e| e.tail.max(e.head)).max().unwrap_or(0);
        let mut uf = UnionFind::<usize>::new(max_id.max(root) + 1);
        for e in edges {
            if !uf.union(e.tail, e.head) {
                return Err(NetworkError::Cycle(e.id));
            }
        }

        let referenced: BTreeSet<VertexId> = edges.iter().flat_map(|e| [e.tail, e.head]).collect();
        if referenced.len() != n + 1 {
            return Err(NetworkError::VertexCount {
                found: referenced.len(),
                expected: n + 1,
            });
        }
        if let Some(&bad) = referenced.iter().find(|&&v| v > n) {
            return Err(NetworkError::SparseVertexIds { max: n, found: bad });
        }
        if root > n {
            return Err(NetworkError::UnknownVertex(root));
        }

        let mut graph = UnGraph::<(), usize>::with_capacity(n + 1, n);
        for _ in 0..=n {
            graph.add_node(());
        }
        for (k, e) in edges.iter().enumerate() {
            graph.add_edge(NodeIndex::new(e.tail), NodeIndex::new(e.head), k);
        }
        let root_degree = graph.edges(NodeIndex::new(root)).count();
        if root_degree != 1 {
            return Err(NetworkError::RootDegree {
                root,
                degree: root_degree,
            });
        }

        // Breadth-first from the root fixes coordinates and orientation.
        let mut coordinates = vec![f64::NAN; n + 1];
        let mut oriented: Vec<Option<Edge>> = vec![None; n];
        coordinates[root] = 0.0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for er in graph.edges(NodeIndex::new(v)) {
                let k = *er.weight();
                if oriented[k].is_some() {
                    continue;
                }
                let d = edges[k];
                let other = if d.tail == v { d.head } else { d.tail };
                let x0 = coordinates[v];
                coordinates[other] = x0 + d.length;
                oriented[k] = Some(Edge {
                    id: d.id,
                    initial: v,
                    terminal: other,
                    length: d.length,
                    x_initial: x0,
                    x_terminal: x0 + d.length,
                });
                queue.push_back(other);
            }
        }
        if let Some(v) = coordinates.iter().position(|x| x.is_nan()) {
            return Err(NetworkError::Disconnected(v));
        }

        let mut edges: Vec<Edge> = oriented.into_iter().map(|e| e.expect("reached")).collect();
        edges.sort_by_key(|e| e.id);
        let index = edges.iter().enumerate().map(|(k, e)| (e.id, k)).collect();

        let mut initial_sets = vec![BTreeSet::new(); n + 1];
        let mut terminal_sets = vec![BTreeSet::new(); n + 1];
        for e in &edges {
            initial_sets[e.initial].insert(e.id);
            terminal_sets[e.terminal].insert(e.id);
        }
        let (boundary, interior) = (0..=n).partition(|&v| {
            initial_sets[v].len() + terminal_sets[v].len() == 1
        });

        Ok(Self {
            edges,
            index,
            root,
            coordinates,
            initial_sets,
            terminal_sets,
            boundary,
            interior,
            warnings,
        })
    }

    pub fn from_file(file: &NetworkFile) -> Result<Self, NetworkError> {
        Self::build(&file.edges, file.root)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| NetworkError::Format(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_file(&NetworkFile::parse(&text)?)
    }

    /// Five-edge example tree: V0–V1, V1–V2, V1–V3, V3–V4, V3–V5.
    pub fn two_junction(lengths: [f64; 5]) -> Result<Self, NetworkError> {
        let pairs = [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)];
        let edges: Vec<_> = pairs
            .iter()
            .zip(lengths)
            .enumerate()
            .map(|(k, (&(a, b), l))| EdgeDescriptor::new(k + 1, a, b, l))
            .collect();
        Self::build(&edges, 0)
    }

    /// A single edge V0–V1.
    pub fn single_edge(length: f64) -> Result<Self, NetworkError> {
        Self::build(&[EdgeDescriptor::new(1, 0, 1, length)], 0)
    }

    /// Root edge V0–V1 splitting into `branches` edges at V1.
    pub fn star(root_length: f64, branches: &[f64]) -> Result<Self, NetworkError> {
        let mut edges = vec![EdgeDescriptor::new(1, 0, 1, root_length)];
        for (k, &l) in branches.iter().enumerate() {
            edges.push(EdgeDescriptor::new(k + 2, 1, k + 2, l));
        }
        Self::build(&edges, 0)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            root: self.root,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDescriptor::new(e.id, e.initial, e.terminal, e.length))
                .collect(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    /// Edges sorted by id. Positions in this slice are the edge indices used
    /// by grids and fields.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.index.get(&id).map(|&k| &self.edges[k])
    }

    pub fn edge_index(&self, id: EdgeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn coordinate(&self, v: VertexId) -> Option<f64> {
        self.coordinates.get(v).copied()
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.coordinates
    }

    /// S_{I,k}: edges whose initial node is `v`.
    pub fn initial_set(&self, v: VertexId) -> &BTreeSet<EdgeId> {
        &self.initial_sets[v]
    }

    /// S_{T,k}: edges whose terminal node is `v`.
    pub fn terminal_set(&self, v: VertexId) -> &BTreeSet<EdgeId> {
        &self.terminal_sets[v]
    }

    /// Π₁.
    pub fn boundary_vertices(&self) -> &BTreeSet<VertexId> {
        &self.boundary
    }

    /// Π₂.
    pub fn interior_vertices(&self) -> &BTreeSet<VertexId> {
        &self.interior
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn classify_vertex(&self, v: VertexId) -> Result<VertexClass, NetworkError> {
        if v >= self.vertex_count() {
            return Err(NetworkError::UnknownVertex(v));
        }
        let kind = if self.boundary.contains(&v) {
            VertexKind::Boundary
        } else {
            VertexKind::Interior
        };
        Ok(VertexClass {
            vertex: v,
            kind,
            initial_of: self.initial_sets[v].clone(),
            terminal_of: self.terminal_sets[v].clone(),
        })
    }

    /// Edge indices incident to `v`, with the end that touches it.
    pub fn incident(&self, v: VertexId) -> Vec<(usize, EdgeEnd)> {
        let mut out: Vec<(usize, EdgeEnd)> = self.terminal_sets[v]
            .iter()
            .map(|id| (self.index[id], EdgeEnd::Terminal))
            .collect();
        out.extend(
            self.initial_sets[v]
                .iter()
                .map(|id| (self.index[id], EdgeEnd::Initial)),
        );
        out
    }

    /// Observation terminals: every boundary vertex except the root, paired
    /// with the single edge ending there.
    pub fn leaf_terminals(&self) -> Vec<(VertexId, EdgeId)> {
        self.boundary
            .iter()
            .filter(|&&v| v != self.root)
            .flat_map(|&v| self.terminal_sets[v].iter().map(move |&e| (v, e)))
            .collect()
    }

    /// Edge index of the single edge leaving the root.
    pub fn root_edge(&self) -> usize {
        let id = *self.initial_sets[self.root].iter().next().expect("root degree 1");
        self.index[&id]
    }

    /// Edge index ending at a non-root vertex.
    pub fn parent_edge(&self, v: VertexId) -> Option<usize> {
        self.terminal_sets
            .get(v)?
            .iter()
            .next()
            .map(|id| self.index[id])
    }

    /// Longest root-to-vertex distance.
    pub fn depth(&self) -> f64 {
        self.coordinates.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Largest distance from any vertex to its nearest observation leaf.
    pub fn max_distance_to_leaf(&self) -> f64 {
        let nv = self.vertex_count();
        let mut adj = vec![Vec::new(); nv];
        for e in &self.edges {
            adj[e.initial].push((e.terminal, e.length));
            adj[e.terminal].push((e.initial, e.length));
        }
        // Multi-source Dijkstra on a tree is a plain relaxation sweep.
        let mut dist = vec![f64::INFINITY; nv];
        let mut queue = VecDeque::new();
        for (v, _) in self.leaf_terminals() {
            dist[v] = 0.0;
            queue.push_back(v);
        }
        while let Some(v) = queue.pop_front() {
            for &(w, l) in &adj[v] {
                if dist[v] + l < dist[w] {
                    dist[w] = dist[v] + l;
                    queue.push_back(w);
                }
            }
        }
        dist.into_iter().fold(0.0, f64::max)
    }

    /// Checks every structural condition on the index sets.
    pub fn verify_index_conditions(&self) -> Result<(), String> {
        if !self.terminal_sets[self.root].is_empty() {
            return Err("S_T of the root is not empty".into());
        }
        for &k in &self.boundary {
            if k != self.root && !self.initial_sets[k].is_empty() {
                return Err(format!("S_I of boundary vertex {k} is not empty"));
            }
        }
        for k in 0..self.vertex_count() {
            if k != self.root && self.terminal_sets[k].len() != 1 {
                return Err(format!("|S_T| of vertex {k} is not 1"));
            }
        }
        for &k in self.interior.iter().chain(std::iter::once(&self.root)) {
            if self.initial_sets[k].is_empty() {
                return Err(format!("S_I of vertex {k} is empty"));
            }
        }
        if !self.boundary.is_disjoint(&self.interior)
            || self.boundary.len() + self.interior.len() != self.vertex_count()
        {
            return Err("boundary and interior sets do not partition the vertices".into());
        }
        for e in &self.edges {
            if !(e.x_initial < e.x_terminal) {
                return Err(format!("edge {} is not oriented away from the root", e.id));
            }
        }
        Ok(())
    }
}

/// On-disk network description.
///
/// ```toml
/// root = 0
///
/// [[edges]]
/// id = 1
/// tail = 0
/// head = 1
/// length = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub root: VertexId,
    pub edges: Vec<EdgeDescriptor>,
}

impl NetworkFile {
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        toml::from_str(text).map_err(|e| NetworkError::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("network file serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn two_junction_sets_and_coordinates() {
        let l = [1.0, 0.7, 1.3, 0.4, 0.9];
        let net = NetworkTopology::two_junction(l).unwrap();
        assert_eq!(net.boundary_vertices(), &set(&[0, 2, 4, 5]));
        assert_eq!(net.interior_vertices(), &set(&[1, 3]));
        assert_eq!(net.initial_set(1), &set(&[2, 3]));
        assert_eq!(net.initial_set(3), &set(&[4, 5]));
        assert_eq!(net.initial_set(0), &set(&[1]));
        assert_eq!(net.terminal_set(3), &set(&[3]));
        for k in [0, 2, 4, 5] {
            if k == 0 {
                assert!(net.terminal_set(k).is_empty());
            } else {
                assert!(net.initial_set(k).is_empty());
            }
        }
        assert_eq!(net.coordinate(4), Some(l[0] + l[2] + l[3]));
        assert_eq!(net.coordinate(5), Some(l[0] + l[2] + l[4]));
        assert_eq!(net.coordinate(2), Some(l[0] + l[1]));
        net.verify_index_conditions().unwrap();
    }

    #[test]
    fn single_edge() {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        assert_eq!(net.boundary_vertices(), &set(&[0, 1]));
        assert!(net.interior_vertices().is_empty());
        assert_eq!(net.initial_set(0), &set(&[1]));
        assert_eq!(net.terminal_set(1), &set(&[1]));
        assert_eq!(net.coordinate(1), Some(1.0));
        let c = net.classify_vertex(1).unwrap();
        assert_eq!(c.kind, VertexKind::Boundary);
        assert_eq!(c.terminal_of, set(&[1]));
    }

    #[test]
    fn triangle_is_a_cycle() {
        let edges = [
            EdgeDescriptor::new(1, 0, 1, 1.0),
            EdgeDescriptor::new(2, 1, 2, 1.0),
            EdgeDescriptor::new(3, 2, 0, 1.0),
        ];
        let err = NetworkTopology::build(&edges, 0).unwrap_err();
        assert!(matches!(err, NetworkError::Cycle(3)));
        assert!(err.to_string().contains("cycle detected"));
    }

    #[test]
    fn structural_errors() {
        let disconnected = [
            EdgeDescriptor::new(1, 0, 1, 1.0),
            EdgeDescriptor::new(2, 2, 3, 1.0),
        ];
        assert!(matches!(
            NetworkTopology::build(&disconnected, 0),
            Err(NetworkError::VertexCount { found: 4, expected: 3 })
        ));
        let root_deg = [
            EdgeDescriptor::new(1, 0, 1, 1.0),
            EdgeDescriptor::new(2, 0, 2, 1.0),
        ];
        assert!(matches!(
            NetworkTopology::build(&root_deg, 0),
            Err(NetworkError::RootDegree { degree: 2, .. })
        ));
        assert!(matches!(
            NetworkTopology::build(&[], 0),
            Err(NetworkError::Empty)
        ));
        assert!(matches!(
            NetworkTopology::build(&[EdgeDescriptor::new(1, 0, 1, 0.0)], 0),
            Err(NetworkError::NonPositiveLength { .. })
        ));
        assert!(matches!(
            NetworkTopology::build(&[EdgeDescriptor::new(1, 0, 5, 1.0)], 0),
            Err(NetworkError::SparseVertexIds { .. })
        ));
    }

    #[test]
    fn short_edges_warn() {
        let net = NetworkTopology::single_edge(1e-8).unwrap();
        assert_eq!(net.warnings().len(), 1);
    }

    #[test]
    fn orientation_is_normalized() {
        let edges = [
            EdgeDescriptor::new(1, 1, 0, 2.0),
            EdgeDescriptor::new(2, 2, 1, 1.0),
        ];
        let net = NetworkTopology::build(&edges, 0).unwrap();
        let e2 = net.edge(2).unwrap();
        assert_eq!((e2.initial, e2.terminal), (1, 2));
        assert_eq!((e2.x_initial, e2.x_terminal), (2.0, 3.0));
    }

    #[test]
    fn classify_two_junction() {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let v1 = net.classify_vertex(1).unwrap();
        assert_eq!(v1.kind, VertexKind::Interior);
        assert_eq!(v1.initial_of, set(&[2, 3]));
        assert_eq!(v1.terminal_of, set(&[1]));
        let v0 = net.classify_vertex(0).unwrap();
        assert_eq!(v0.kind, VertexKind::Boundary);
        assert_eq!(v0.initial_of, set(&[1]));
        assert!(v0.terminal_of.is_empty());
        assert!(matches!(
            net.classify_vertex(9),
            Err(NetworkError::UnknownVertex(9))
        ));
        assert_eq!(net.leaf_terminals(), vec![(2, 2), (4, 4), (5, 5)]);
    }

    #[test]
    fn file_round_trip() {
        let net = NetworkTopology::two_junction([1.0, 0.5, 0.25, 0.125, 2.0]).unwrap();
        let file = net.to_file();
        let text = file.to_toml();
        let back = NetworkFile::parse(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(NetworkTopology::from_file(&back).unwrap(), net);
    }
}

//! Quadratic weights `φ_j = α_j (x − x_j*)² − β t²` on every edge, the checks
//! they must pass, and evaluation of both sides of the weighted estimate
//!
//! ```text
//! Σ_j s² ∫∫ |u_j|² e^{2sφ_j}  ≤  C ( Σ_j ∫∫ |f_j|² e^{2sφ_j}  +  B̃ )
//! B̃ = Σ_leaves ∫ s u_{j,1}(x(T_j), t)² e^{2sφ_j} dt
//! ```
//!
//! on sampled trajectories.

use std::io::{self, Write};

use thiserror::Error;

use crate::dynamics::{CoefficientField, DynamicsError, FieldTrajectory, Mesh};
use crate::network::{EdgeId, NetworkTopology, VertexId};

#[derive(Debug, Error, PartialEq)]
pub enum CarlemanError {
    #[error("invalid weight parameter: {0}")]
    Parameter(String),
    #[error(
        "Assumption 1 violated: p₁p₂|∂ₜφ|² − |∂ₓφ|² reaches {value:e} at edge {edge}, x = {x}, t = {t}"
    )]
    Assumption1 { value: f64, edge: EdgeId, x: f64, t: f64 },
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeight {
    pub id: EdgeId,
    pub alpha: f64,
    pub xstar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFamily {
    /// In edge-index order.
    pub edges: Vec<EdgeWeight>,
    pub beta: f64,
    pub horizon: f64,
}

impl WeightFamily {
    pub fn phi(&self, k: usize, x: f64, t: f64) -> f64 {
        let w = &self.edges[k];
        w.alpha * (x - w.xstar).powi(2) - self.beta * t * t
    }

    pub fn dphi_dx(&self, k: usize, x: f64) -> f64 {
        let w = &self.edges[k];
        2.0 * w.alpha * (x - w.xstar)
    }

    pub fn dphi_dt(&self, t: f64) -> f64 {
        -2.0 * self.beta * t
    }

    /// Spatial part `α_j (x − x_j*)²` over edge `k`, as `(min, max)`.
    fn spatial_range(&self, topo: &NetworkTopology, k: usize) -> (f64, f64) {
        let e = &topo.edges()[k];
        let w = &self.edges[k];
        let a = w.alpha * (e.x_initial - w.xstar).powi(2);
        let b = w.alpha * (e.x_terminal - w.xstar).powi(2);
        (a.min(b), a.max(b))
    }

    /// `max |φ|` over the network and `[−T, T]`.
    pub fn max_abs(&self, topo: &NetworkTopology) -> f64 {
        let bt2 = self.beta * self.horizon * self.horizon;
        (0..self.edges.len())
            .map(|k| {
                let (lo, hi) = self.spatial_range(topo, k);
                hi.abs().max((lo - bt2).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `{5, 10, 20, 40} / max|φ|`.
    pub fn default_s_grid(&self, topo: &NetworkTopology) -> Vec<f64> {
        let m = self.max_abs(topo).max(f64::MIN_POSITIVE);
        [5.0, 10.0, 20.0, 40.0].iter().map(|s| s / m).collect()
    }
}

/// Propagates the root weight outward so that `φ` is continuous at interior
/// vertices and `|S_I| ∂ₓφ_in = ∂ₓφ_out` there.
pub fn build_weights(
    topo: &NetworkTopology,
    root_alpha: f64,
    root_xstar: f64,
    beta: f64,
    horizon: f64,
) -> Result<WeightFamily, CarlemanError> {
    let root_x = topo.edges()[topo.root_edge()].x_initial;
    if !(root_xstar < root_x) {
        return Err(CarlemanError::Parameter(format!(
            "root x* = {root_xstar} must lie before the root coordinate {root_x}"
        )));
    }
    if !(root_alpha > 0.0) {
        return Err(CarlemanError::Parameter(format!("root α = {root_alpha} must be positive")));
    }
    if !(beta >= 0.0) {
        return Err(CarlemanError::Parameter(format!("β = {beta} must be non-negative")));
    }
    if !(horizon > 0.0) {
        return Err(CarlemanError::Parameter(format!("T = {horizon} must be positive")));
    }
    let mut order: Vec<usize> = (0..topo.edge_count()).collect();
    order.sort_by(|&a, &b| topo.edges()[a].x_initial.total_cmp(&topo.edges()[b].x_initial));
    let mut edges: Vec<Option<EdgeWeight>> = vec![None; topo.edge_count()];
    for k in order {
        let e = topo.edges()[k];
        let w = match topo.parent_edge(e.initial) {
            None => EdgeWeight {
                id: e.id,
                alpha: root_alpha,
                xstar: root_xstar,
            },
            Some(i) => {
                let parent = edges[i].expect("parent weight is set first");
                let n = topo.initial_set(e.initial).len() as f64;
                let xv = e.x_initial;
                EdgeWeight {
                    id: e.id,
                    alpha: n * n * parent.alpha,
                    xstar: ((n - 1.0) * xv + parent.xstar) / n,
                }
            }
        };
        edges[k] = Some(w);
    }
    Ok(WeightFamily {
        edges: edges.into_iter().map(Option::unwrap).collect(),
        beta,
        horizon,
    })
}

/// Relative defects of the two vertex conditions at one interior vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCompatibility {
    pub vertex: VertexId,
    pub continuity: f64,
    pub slope: f64,
}

/// Evaluates both vertex conditions directly from the weights.
pub fn weight_compatibility(topo: &NetworkTopology, w: &WeightFamily) -> Vec<VertexCompatibility> {
    topo.interior_vertices()
        .iter()
        .map(|&v| {
            let x = topo.coordinate(v).unwrap();
            let inc = topo.parent_edge(v).unwrap();
            let n = topo.initial_set(v).len() as f64;
            let phi_in = w.phi(inc, x, 0.0);
            let slope_in = n * w.dphi_dx(inc, x);
            let mut c = 0.0_f64;
            let mut s = 0.0_f64;
            for id in topo.initial_set(v) {
                let j = topo.edge_index(*id).unwrap();
                c = c.max((w.phi(j, x, 0.0) - phi_in).abs() / phi_in.abs().max(f64::MIN_POSITIVE));
                s = s.max((w.dphi_dx(j, x) - slope_in).abs() / slope_in.abs().max(f64::MIN_POSITIVE));
            }
            VertexCompatibility {
                vertex: v,
                continuity: c,
                slope: s,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Report {
    pub pass: bool,
    /// Smallest `|D|` over the grid and where it occurs.
    pub min_abs: f64,
    pub edge: EdgeId,
    pub x: f64,
    pub t: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// Per edge: `√(p₁p₂) β T < α (x(I) − x*)` with the largest `p₁p₂` on
    /// the edge.
    pub sufficient: Vec<(EdgeId, bool)>,
}

impl Assumption1Report {
    pub fn into_result(self) -> Result<Self, CarlemanError> {
        if self.pass {
            Ok(self)
        } else {
            Err(CarlemanError::Assumption1 {
                value: self.min_abs,
                edge: self.edge,
                x: self.x,
                t: self.t,
            })
        }
    }
}

/// Evaluates `D = 4p₁p₂β²t² − 4α²(x − x*)²` at every node and at `2·steps + 1`
/// uniform times on `[−T, T]`. Passes when `D` keeps one sign and never
/// vanishes.
pub fn check_assumption1(
    topo: &NetworkTopology,
    weights: &WeightFamily,
    coeffs: &CoefficientField,
    mesh: &Mesh,
    steps: usize,
) -> Result<Assumption1Report, CarlemanError> {
    coeffs.check_mesh(mesh)?;
    if weights.edges.len() != mesh.len() {
        return Err(CarlemanError::Mismatch("weights do not match the mesh".into()));
    }
    let steps = steps.max(1);
    let mut rep = Assumption1Report {
        pass: false,
        min_abs: f64::INFINITY,
        edge: 0,
        x: 0.0,
        t: 0.0,
        min_value: f64::INFINITY,
        max_value: f64::NEG_INFINITY,
        sufficient: Vec::new(),
    };
    for (k, m) in mesh.edges().iter().enumerate() {
        let c = coeffs.edge(k);
        let w = &weights.edges[k];
        let mut pp_max = 0.0_f64;
        for i in 0..m.nodes() {
            let x = m.x(i);
            let pp = c.p1[i] * c.p2[i];
            pp_max = pp_max.max(pp);
            let space = weights.dphi_dx(k, x).powi(2);
            for l in 0..=2 * steps {
                let t = weights.horizon * (l as f64 / steps as f64 - 1.0);
                let d = pp * weights.dphi_dt(t).powi(2) - space;
                rep.min_value = rep.min_value.min(d);
                rep.max_value = rep.max_value.max(d);
                if d.abs() < rep.min_abs {
                    rep.min_abs = d.abs();
                    rep.edge = m.id;
                    rep.x = x;
                    rep.t = t;
                }
            }
        }
        let e = &topo.edges()[k];
        rep.sufficient.push((
            e.id,
            pp_max.sqrt() * weights.beta * weights.horizon < w.alpha * (e.x_initial - w.xstar),
        ));
    }
    let one_sign = rep.min_value > 0.0 || rep.max_value < 0.0;
    rep.pass = one_sign && rep.min_abs > 0.0;
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightGeometry {
    /// `min φ(x, 0)` over the network.
    pub min_initial: f64,
    /// `max φ(x, ±T)` over the network.
    pub max_final: f64,
    /// `max α(x − x*)² − min α(x − x*)²`, the value `βT²` must exceed.
    pub required_beta_t2: f64,
    pub pass: bool,
}

/// Whether some `d₁` separates `φ(·, 0)` from `φ(·, ±T)`.
pub fn check_weight_geometry(topo: &NetworkTopology, weights: &WeightFamily) -> WeightGeometry {
    let (lo, hi) = (0..weights.edges.len())
        .map(|k| weights.spatial_range(topo, k))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| (a.min(l), b.max(h)));
    let bt2 = weights.beta * weights.horizon * weights.horizon;
    WeightGeometry {
        min_initial: lo,
        max_final: hi - bt2,
        required_beta_t2: hi - lo,
        pass: lo > hi - bt2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub s: f64,
    /// Natural logarithms of the three weighted integrals.
    pub lhs_log: f64,
    pub rhs_source_log: f64,
    pub btilde_log: f64,
    /// `LHS / (RHS_source + B̃)`; zero when the field vanishes.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanReport {
    pub rows: Vec<EstimateRow>,
    /// Largest ratio over the s-grid.
    pub c_hat: f64,
    pub warnings: Vec<String>,
}

impl CarlemanReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "s,lhs_log,rhs_source_log,btilde_log,ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.s, r.lhs_log, r.rhs_source_log, r.btilde_log, r.ratio
            )?;
        }
        Ok(())
    }
}

/// Homogeneous-data violations above this fraction of `max|u|` are reported.
const HOMOGENEITY_WARNING: f64 = 1e-8;

/// Accumulates `Σ v e^{2s(φ − φ_max)}` so that the log of the true weighted
/// sum is `ln(acc) + 2sφ_max`.
struct LogSum {
    two_s: f64,
    offset: f64,
    acc: f64,
}

impl LogSum {
    fn add(&mut self, weight: f64, phi: f64) {
        self.acc += weight * (self.two_s * (phi - self.offset)).exp();
    }

    fn log(&self) -> f64 {
        self.acc.ln() + self.two_s * self.offset
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// Trapezoid evaluation of both sides of the estimate for every `s`.
///
/// `traj` and `source` must share one grid on `[−T, T]`. Refuses when the
/// weights violate Assumption 1 for `coeffs`.
pub fn evaluate_estimate(
    topo: &NetworkTopology,
    coeffs: &CoefficientField,
    traj: &FieldTrajectory,
    source: &FieldTrajectory,
    weights: &WeightFamily,
    s_grid: &[f64],
) -> Result<CarlemanReport, CarlemanError> {
    if !traj.same_grid(source) {
        return Err(CarlemanError::Mismatch("field and source live on different grids".into()));
    }
    if traj.edge_count() != weights.edges.len() || traj.edge_count() != topo.edge_count() {
        return Err(CarlemanError::Mismatch("weights do not match the field".into()));
    }
    let mesh = Mesh::new(
        topo,
        &(0..traj.edge_count()).map(|k| traj.mesh(k).cells).collect::<Vec<_>>(),
    )?;
    let steps = (traj.levels() - 1).div_ceil(2);
    check_assumption1(topo, weights, coeffs, &mesh, steps)?.into_result()?;

    let warnings = homogeneity_warnings(topo, traj, weights.horizon);
    let phi_max = (0..traj.edge_count())
        .map(|k| weights.spatial_range(topo, k).1)
        .fold(f64::NEG_INFINITY, f64::max);
    let dt = traj.dt();
    let time_weight = |l: usize| if l == 0 || l + 1 == traj.levels() { 0.5 * dt } else { dt };
    let leaves: Vec<usize> = topo
        .leaf_terminals()
        .iter()
        .map(|&(_, e)| topo.edge_index(e).unwrap())
        .collect();

    let evaluate = |s: f64| {
        let new = || LogSum {
            two_s: 2.0 * s,
            offset: phi_max,
            acc: 0.0,
        };
        let (mut lhs, mut rhs, mut bt) = (new(), new(), new());
        for l in 0..traj.levels() {
            let t = traj.time(l);
            let wt = time_weight(l);
            for k in 0..traj.edge_count() {
                let m = traj.mesh(k);
                let (u1, u2) = (traj.u1(k, l), traj.u2(k, l));
                let (f1, f2) = (source.u1(k, l), source.u2(k, l));
                for i in 0..m.nodes() {
                    let phi = weights.phi(k, m.x(i), t);
                    let w = wt * m.weight(i);
                    lhs.add(w * (u1[i] * u1[i] + u2[i] * u2[i]), phi);
                    rhs.add(w * (f1[i] * f1[i] + f2[i] * f2[i]), phi);
                }
            }
            for &k in &leaves {
                let m = traj.mesh(k);
                let v = traj.u1(k, l)[m.cells];
                bt.add(wt * v * v, weights.phi(k, m.x(m.cells), t));
            }
        }
        let lhs_log = lhs.log() + 2.0 * s.ln();
        let rhs_source_log = rhs.log();
        let btilde_log = bt.log() + s.ln();
        let ratio = if lhs_log == f64::NEG_INFINITY {
            0.0
        } else {
            (lhs_log - ln_add(rhs_source_log, btilde_log)).exp()
        };
        EstimateRow {
            s,
            lhs_log,
            rhs_source_log,
            btilde_log,
            ratio,
        }
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<EstimateRow> = {
        use rayon::prelude::*;
        s_grid.par_iter().map(|&s| evaluate(s)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<EstimateRow> = s_grid.iter().map(|&s| evaluate(s)).collect();

    let c_hat = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(CarlemanReport {
        rows,
        c_hat,
        warnings,
    })
}

fn homogeneity_warnings(topo: &NetworkTopology, traj: &FieldTrajectory, horizon: f64) -> Vec<String> {
    let mut out = Vec::new();
    let scale = traj.max_abs();
    if scale == 0.0 {
        return out;
    }
    if (traj.t0() + horizon).abs() > 1e-9 * horizon || (traj.t_end() - horizon).abs() > 1e-9 * horizon {
        out.push(format!(
            "field spans [{}, {}] instead of [−{horizon}, {horizon}]",
            traj.t0(),
            traj.t_end()
        ));
    }
    let last = traj.levels() - 1;
    let ends = (0..traj.edge_count())
        .flat_map(|k| {
            [traj.u1(k, 0), traj.u2(k, 0), traj.u1(k, last), traj.u2(k, last)]
                .into_iter()
                .flatten()
                .copied()
        })
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if ends > HOMOGENEITY_WARNING * scale {
        out.push(format!("field does not vanish at t = ±T (max {ends:e})"));
    }
    let mut exterior = 0.0_f64;
    for &v in topo.boundary_vertices() {
        for (k, end) in topo.incident(v) {
            let i = match end {
                crate::network::EdgeEnd::Initial => 0,
                crate::network::EdgeEnd::Terminal => traj.mesh(k).cells,
            };
            for l in 0..traj.levels() {
                exterior = exterior.max(traj.u2(k, l)[i].abs());
            }
        }
    }
    if exterior > HOMOGENEITY_WARNING * scale {
        out.push(format!("voltage does not vanish at exterior vertices (max {exterior:e})"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Mesh;

    fn unit_two_junction() -> NetworkTopology {
        NetworkTopology::two_junction([1.0; 5]).unwrap()
    }

    #[test]
    fn weights_on_example_tree() {
        let net = unit_two_junction();
        let w = build_weights(&net, 1.0, -1.0, 0.5, 1.0).unwrap();
        let alpha: Vec<f64> = w.edges.iter().map(|e| e.alpha).collect();
        let xs: Vec<f64> = w.edges.iter().map(|e| e.xstar).collect();
        assert_eq!(alpha, vec![1.0, 4.0, 4.0, 16.0, 16.0]);
        assert_eq!(xs, vec![-1.0, 0.0, 0.0, 1.0, 1.0]);
        // φ at V₁ from the root edge: 1·(1 + 1)² = 4; from edge 2: 4·(1 − 0)² = 4.
        assert_eq!(w.phi(0, 1.0, 0.0), 4.0);
        assert_eq!(w.phi(1, 1.0, 0.0), 4.0);
        assert_eq!(2.0 * w.dphi_dx(0, 1.0), w.dphi_dx(1, 1.0));
        for c in weight_compatibility(&net, &w) {
            assert!(c.continuity <= 1e-12 && c.slope <= 1e-12);
        }
    }

    #[test]
    fn pass_through_vertex_keeps_weight() {
        let net = NetworkTopology::star(1.0, &[1.0]).unwrap();
        let w = build_weights(&net, 2.0, -0.5, 0.0, 1.0).unwrap();
        assert_eq!(w.edges[1].alpha, 2.0);
        assert_eq!(w.edges[1].xstar, -0.5);
    }

    #[test]
    fn rejects_bad_parameters() {
        let net = unit_two_junction();
        assert!(build_weights(&net, 1.0, 0.0, 0.5, 1.0).is_err());
        assert!(build_weights(&net, 0.0, -1.0, 0.5, 1.0).is_err());
        assert!(build_weights(&net, 1.0, -1.0, -0.1, 1.0).is_err());
    }

    fn single(beta: f64, horizon: f64) -> Assumption1Report {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let mesh = Mesh::uniform(&net, 10).unwrap();
        let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
        let w = build_weights(&net, 1.0, -1.0, beta, horizon).unwrap();
        check_assumption1(&net, &w, &c, &mesh, 10).unwrap()
    }

    #[test]
    fn assumption1_examples() {
        let r = single(1.0, 0.5);
        assert!(r.pass);
        assert!((r.min_abs - 3.0).abs() < 1e-12);
        assert!(r.sufficient[0].1);
        let r = single(1.0, 2.0);
        assert!(!r.pass);
        assert!(r.min_abs < 1e-12);
        assert_eq!((r.x, r.t.abs()), (0.0, 1.0));
        assert!(matches!(r.into_result(), Err(CarlemanError::Assumption1 { .. })));
        let r = single(0.0, 2.0);
        assert!(r.pass && r.max_value < 0.0);
    }

    #[test]
    fn geometry_threshold() {
        let net = unit_two_junction();
        let w = build_weights(&net, 1.0, -1.0, 0.5, 1.0).unwrap();
        let g = check_weight_geometry(&net, &w);
        // α(x − x*)² spans [1, 64] over the unit tree.
        assert_eq!(g.required_beta_t2, 63.0);
        assert!(!g.pass);
        let w = build_weights(&net, 1.0, -1.0, 4.5, 4.0).unwrap();
        assert!(check_weight_geometry(&net, &w).pass);
    }

    #[test]
    fn zero_field_gives_zero_report() {
        let net = unit_two_junction();
        let mesh = Mesh::uniform(&net, 8).unwrap();
        let c = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.0, 0.0]).unwrap();
        let w = build_weights(&net, 1.0, -1.0, 0.5, 1.0).unwrap();
        let u = FieldTrajectory::zeros(&mesh, -1.0, 0.1, 21);
        let r = evaluate_estimate(&net, &c, &u, &u, &w, &[5.0, 10.0]).unwrap();
        for row in &r.rows {
            assert_eq!(row.lhs_log, f64::NEG_INFINITY);
            assert_eq!(row.ratio, 0.0);
        }
        assert_eq!(r.c_hat, 0.0);
    }
}

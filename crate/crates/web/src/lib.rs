//! Browser bindings. Every export takes a JSON request and returns a JSON
//! response; the plain functions behind them are usable natively too.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use telegraphnet::carleman::{build_weights, check_assumption1, check_weight_geometry, weight_compatibility};
use telegraphnet::dynamics::{
    energy_series, solve, CoefficientField, Direction, FieldTrajectory, GridSpec, Mesh, ProblemData,
};
use telegraphnet::network::NetworkTopology;
use telegraphnet::profile::Profile;
use wasm_bindgen::prelude::*;

const PULSE_CENTER: f64 = 0.5;
const PULSE_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Travel {
    Right,
    Left,
    Standing,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SimulateRequest {
    /// Five edge lengths of the two-junction tree.
    pub lengths: [f64; 5],
    pub coefficients: [f64; 4],
    /// Edge carrying the initial pulse and the pulse centre in tree coordinates.
    pub edge: usize,
    pub center: f64,
    pub width: f64,
    pub travel: Travel,
    pub cells_per_unit: f64,
    pub horizon: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeProfile {
    pub id: usize,
    pub x: Vec<f64>,
    pub voltage: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub t: f64,
    pub energy: f64,
    pub edges: Vec<EdgeProfile>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResponse {
    pub frames: Vec<Frame>,
    pub max_kirchhoff_residual: f64,
    pub warnings: Vec<String>,
}

fn profiles(u: &FieldTrajectory, topo: &NetworkTopology, level: usize) -> Vec<EdgeProfile> {
    (0..u.edge_count())
        .map(|k| {
            let m = u.mesh(k);
            EdgeProfile {
                id: topo.edges()[k].id,
                x: (0..m.nodes()).map(|i| m.x(i)).collect(),
                voltage: u.u2(k, level).to_vec(),
            }
        })
        .collect()
}

pub fn run_simulation(req: &SimulateRequest) -> Result<SimulateResponse, String> {
    let topo = NetworkTopology::two_junction(req.lengths).map_err(|e| e.to_string())?;
    if topo.edge(req.edge).is_none() {
        return Err(format!("unknown edge {}", req.edge));
    }
    let mesh = Mesh::by_density(&topo, req.cells_per_unit).map_err(|e| e.to_string())?;
    let c = CoefficientField::uniform(&mesh, req.coefficients).map_err(|e| e.to_string())?;
    let grid = GridSpec::new(mesh, req.horizon, 0.5, &c).map_err(|e| e.to_string())?;
    let [p1, p2, ..] = req.coefficients;
    let admittance = (p2 / p1).sqrt();
    let f = Profile::gaussian(1.0, req.center, req.width);
    let current = match req.travel {
        Travel::Right => Profile::gaussian(admittance, req.center, req.width),
        Travel::Left => Profile::gaussian(-admittance, req.center, req.width),
        Travel::Standing => Profile::Zero,
    };
    let data = ProblemData::new().with_initial(req.edge, current, f);
    let sol = solve(&topo, &c, &data, &grid, Direction::Forward).map_err(|e| e.to_string())?;
    let u = &sol.trajectory;
    let energy = energy_series(u, &c);
    let last = u.levels() - 1;
    let count = req.frames.clamp(2, last + 1);
    let mut levels: Vec<usize> = (0..count).map(|j| j * last / (count - 1)).collect();
    levels.dedup();
    let max_kirchhoff_residual = (0..u.levels())
        .map(|l| {
            let (a, b) = u.kirchhoff_residuals(&topo, l);
            a.max(b)
        })
        .fold(0.0, f64::max);
    Ok(SimulateResponse {
        frames: levels
            .into_iter()
            .map(|l| Frame {
                t: u.time(l),
                energy: energy[l],
                edges: profiles(u, &topo, l),
            })
            .collect(),
        max_kirchhoff_residual,
        warnings: sol.warnings,
    })
}

#[derive(Debug, Clone, Deserialize)]
pub struct WeightRequest {
    pub lengths: [f64; 5],
    pub coefficients: [f64; 4],
    pub root_alpha: f64,
    pub root_xstar: f64,
    pub beta: f64,
    pub horizon: f64,
    pub cells_per_unit: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeWeightView {
    pub id: usize,
    pub alpha: f64,
    pub xstar: f64,
    pub x: Vec<f64>,
    /// `φ(x, 0)` and `φ(x, T)` along the edge.
    pub phi_initial: Vec<f64>,
    pub phi_final: Vec<f64>,
    pub sufficient: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightResponse {
    pub edges: Vec<EdgeWeightView>,
    pub vertex_defect: f64,
    pub pass: bool,
    pub min_abs: f64,
    pub worst_edge: usize,
    pub worst_x: f64,
    pub worst_t: f64,
    pub geometry_pass: bool,
    pub min_initial: f64,
    pub max_final: f64,
}

pub fn explore_weights(req: &WeightRequest) -> Result<WeightResponse, String> {
    let topo = NetworkTopology::two_junction(req.lengths).map_err(|e| e.to_string())?;
    let mesh = Mesh::by_density(&topo, req.cells_per_unit).map_err(|e| e.to_string())?;
    let c = CoefficientField::uniform(&mesh, req.coefficients).map_err(|e| e.to_string())?;
    let w = build_weights(&topo, req.root_alpha, req.root_xstar, req.beta, req.horizon).map_err(|e| e.to_string())?;
    let report = check_assumption1(&topo, &w, &c, &mesh, req.steps.max(1)).map_err(|e| e.to_string())?;
    let geometry = check_weight_geometry(&topo, &w);
    let vertex_defect = weight_compatibility(&topo, &w)
        .iter()
        .map(|v| v.continuity.max(v.slope))
        .fold(0.0, f64::max);
    let edges = w
        .edges
        .iter()
        .enumerate()
        .map(|(k, ew)| {
            let m = mesh.edge(k);
            let x: Vec<f64> = (0..m.nodes()).map(|i| m.x(i)).collect();
            EdgeWeightView {
                id: ew.id,
                alpha: ew.alpha,
                xstar: ew.xstar,
                phi_initial: x.iter().map(|&x| w.phi(k, x, 0.0)).collect(),
                phi_final: x.iter().map(|&x| w.phi(k, x, req.horizon)).collect(),
                x,
                sufficient: report.sufficient.iter().any(|&(id, ok)| id == ew.id && ok),
            }
        })
        .collect();
    Ok(WeightResponse {
        edges,
        vertex_defect,
        pass: report.pass,
        min_abs: report.min_abs,
        worst_edge: report.edge,
        worst_x: report.x,
        worst_t: report.t,
        geometry_pass: geometry.pass,
        min_initial: geometry.min_initial,
        max_final: geometry.max_final,
    })
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScatteringRequest {
    /// `[p₁, p₂]` of each branch leaving the junction; the incoming edge has
    /// unit coefficients.
    pub branches: Vec<[f64; 2]>,
    pub cells_per_unit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatteringResponse {
    pub reflected: f64,
    pub transmitted: Vec<f64>,
    pub predicted_reflected: f64,
    pub predicted_transmitted: f64,
    pub t: f64,
    pub edges: Vec<EdgeProfile>,
}

/// A unit pulse on a lossless incoming edge of length 1 meets the junction at
/// `t = 0.5`; amplitudes are voltage areas, rescaled by each branch speed.
pub fn junction_scattering(req: &ScatteringRequest) -> Result<ScatteringResponse, String> {
    if req.branches.is_empty() {
        return Err("need at least one branch".into());
    }
    if req.branches.iter().flatten().any(|p| !(*p > 0.0)) {
        return Err("branch coefficients must be positive".into());
    }
    let horizon = 0.9;
    let speed = |p: [f64; 2]| 1.0 / (p[0] * p[1]).sqrt();
    let lengths: Vec<f64> = req.branches.iter().map(|&p| 0.4 * speed(p) + 0.5).collect();
    let topo = NetworkTopology::star(1.0, &lengths).map_err(|e| e.to_string())?;
    let mesh = Mesh::by_density(&topo, req.cells_per_unit).map_err(|e| e.to_string())?;
    let values: BTreeMap<usize, [f64; 4]> = req
        .branches
        .iter()
        .enumerate()
        .map(|(j, p)| (j + 2, [p[0], p[1], 0.0, 0.0]))
        .collect();
    let c = CoefficientField::per_edge(&mesh, &values, [1.0, 1.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    let grid = GridSpec::new(mesh, horizon, 0.5, &c).map_err(|e| e.to_string())?;
    let f = Profile::gaussian(1.0, PULSE_CENTER, PULSE_WIDTH);
    let data = ProblemData::new().with_initial(1, f.clone(), f);
    let u = solve(&topo, &c, &data, &grid, Direction::Forward)
        .map_err(|e| e.to_string())?
        .trajectory;
    let last = u.levels() - 1;
    let area = |k: usize, level: usize| {
        let m = u.mesh(k);
        (0..m.nodes()).map(|i| m.weight(i) * u.u2(k, level)[i]).sum::<f64>()
    };
    let incident = area(0, 0);
    let total: f64 = req.branches.iter().map(|p| (p[1] / p[0]).sqrt()).sum();
    Ok(ScatteringResponse {
        reflected: area(0, last) / incident,
        transmitted: req
            .branches
            .iter()
            .enumerate()
            .map(|(j, &p)| area(j + 1, last) / incident / speed(p))
            .collect(),
        predicted_reflected: (1.0 - total) / (1.0 + total),
        predicted_transmitted: 2.0 / (1.0 + total),
        t: u.time(last),
        edges: profiles(&u, &topo, last),
    })
}

fn call<Q, R>(request: &str, f: impl FnOnce(&Q) -> Result<R, String>) -> Result<String, JsError>
where
    Q: for<'de> Deserialize<'de>,
    R: Serialize,
{
    let req: Q = serde_json::from_str(request).map_err(|e| JsError::new(&format!("request: {e}")))?;
    let resp = f(&req).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&resp).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsError> {
    call(request, run_simulation)
}

#[wasm_bindgen(js_name = exploreWeights)]
pub fn explore_weights_js(request: &str) -> Result<String, JsError> {
    call(request, explore_weights)
}

#[wasm_bindgen(js_name = junctionScattering)]
pub fn junction_scattering_js(request: &str) -> Result<String, JsError> {
    call(request, junction_scattering)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(travel: Travel) -> SimulateRequest {
        SimulateRequest {
            lengths: [1.0; 5],
            coefficients: [1.0, 1.0, 0.0, 0.0],
            edge: 1,
            center: 0.4,
            width: 0.05,
            travel,
            cells_per_unit: 100.0,
            horizon: 0.3,
            frames: 4,
        }
    }

    fn peak(frame: &Frame) -> f64 {
        let e = &frame.edges[0];
        let i = (0..e.x.len())
            .max_by(|&a, &b| e.voltage[a].total_cmp(&e.voltage[b]))
            .unwrap();
        e.x[i]
    }

    #[test]
    fn pulse_moves_in_the_requested_direction() {
        let right = run_simulation(&sim(Travel::Right)).unwrap();
        assert_eq!(right.frames.len(), 4);
        assert!((peak(right.frames.last().unwrap()) - 0.7).abs() < 0.02);
        let left = run_simulation(&sim(Travel::Left)).unwrap();
        assert!((peak(left.frames.last().unwrap()) - 0.1).abs() < 0.02);
        assert!(right.max_kirchhoff_residual < 1e-10);
    }

    #[test]
    fn lossless_energy_is_kept() {
        let r = run_simulation(&sim(Travel::Standing)).unwrap();
        let e0 = r.frames[0].energy;
        assert!(r.frames.iter().all(|f| ((f.energy - e0) / e0).abs() < 0.01));
    }

    #[test]
    fn weight_explorer_flags_long_horizons() {
        let mut req = WeightRequest {
            lengths: [1.0; 5],
            coefficients: [1.0, 1.0, 0.0, 0.0],
            root_alpha: 1.0,
            root_xstar: -1.0,
            beta: 0.5,
            horizon: 1.0,
            cells_per_unit: 20.0,
            steps: 20,
        };
        let ok = explore_weights(&req).unwrap();
        assert!(ok.pass);
        assert!(ok.vertex_defect < 1e-12);
        assert_eq!(ok.edges[1].alpha, 4.0);
        req.horizon = 4.0;
        req.beta = 1.0;
        assert!(!explore_weights(&req).unwrap().pass);
    }

    #[test]
    fn matched_branches_split_a_third() {
        let r = junction_scattering(&ScatteringRequest {
            branches: vec![[1.0, 1.0], [1.0, 1.0]],
            cells_per_unit: 400.0,
        })
        .unwrap();
        assert!((r.predicted_reflected + 1.0 / 3.0).abs() < 1e-15);
        assert!((r.reflected - r.predicted_reflected).abs() < 0.01);
        for t in r.transmitted {
            assert!((t - r.predicted_transmitted).abs() < 0.01);
        }
    }

    #[test]
    fn mismatched_branch_follows_admittances() {
        let r = junction_scattering(&ScatteringRequest {
            branches: vec![[1.0, 4.0], [2.0, 0.5]],
            cells_per_unit: 400.0,
        })
        .unwrap();
        assert!((r.reflected - r.predicted_reflected).abs() < 0.02, "{r:?}");
        for t in &r.transmitted {
            assert!((t - r.predicted_transmitted).abs() < 0.02, "{r:?}");
        }
    }

    #[test]
    fn bad_requests_are_errors() {
        assert!(junction_scattering(&ScatteringRequest {
            branches: vec![],
            cells_per_unit: 100.0
        })
        .is_err());
        let mut req = sim(Travel::Right);
        req.edge = 9;
        assert!(run_simulation(&req).is_err());
    }
}

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use super::measurement::ForwardModel;
use super::{check_assumption2, CoefficientPerturbation, ExperimentPair, InverseError, MeasurementSet};
use crate::dynamics::{CoefficientField, GridSpec};
use crate::network::NetworkTopology;

/// How the Tikhonov weight `λ` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Noise-free data; `λ` is fixed.
    Exact { lambda: f64 },
    /// Data carrying noise with expected misfit `δ²`: the largest candidate
    /// `λ` whose data misfit reaches `τ²δ²` is kept.
    Discrepancy {
        noise_misfit: f64,
        tau: f64,
        candidates: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussNewtonOptions {
    pub max_iterations: usize,
    /// Forward-difference step of the Jacobian columns.
    pub fd_step: f64,
    /// Consecutive halvings of a step before giving up.
    pub max_halvings: usize,
    /// Stop once the step is below `step_tolerance · (1 + |ρ|)`.
    pub step_tolerance: f64,
    pub noise: NoiseModel,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            fd_step: 1e-6,
            max_halvings: 3,
            step_tolerance: 1e-9,
            noise: NoiseModel::Exact { lambda: 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub params: Vec<f64>,
    /// Data misfit `Σ ∫ |∂ₜˡw^sim − ∂ₜˡw^meas|² dt`.
    pub misfit: f64,
    /// Misfit plus `λ‖ρ‖²`.
    pub objective: f64,
    pub step_norm: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresResult {
    pub rho: CoefficientPerturbation,
    pub params: Vec<f64>,
    /// Starting point first, then every accepted step.
    pub history: Vec<Iterate>,
    pub converged: bool,
    pub misfit: f64,
    pub lambda: f64,
    pub warnings: Vec<String>,
}

impl LeastSquaresResult {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }

    /// Columns `iteration, misfit, objective, step_norm, halvings`.
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,misfit,objective,step_norm,halvings")?;
        for (k, it) in self.history.iter().enumerate() {
            writeln!(out, "{k},{:e},{:e},{:e},{}", it.misfit, it.objective, it.step_norm, it.halvings)?;
        }
        Ok(())
    }
}

struct Problem<'a> {
    model: ForwardModel<'a>,
    measured: &'a MeasurementSet,
    p: &'a CoefficientField,
    mesh: &'a crate::dynamics::Mesh,
    lengths: Vec<f64>,
}

impl Problem<'_> {
    /// Residual vector, or `None` when `q` is inadmissible or unstable.
    fn residuals(&self, params: &[f64]) -> Option<Vec<f64>> {
        let rho = CoefficientPerturbation::from_parameters(self.mesh, params).ok()?;
        let q = rho.apply(self.p).ok()?;
        self.model.measure(&q).ok()?.residuals(self.measured).ok()
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        params.iter().zip(&self.lengths).map(|(x, l)| l * x * x).sum()
    }

    fn jacobian(&self, params: &[f64], base: &[f64], h: f64) -> Option<DMatrix<f64>> {
        let column = |c: usize| -> Option<Vec<f64>> {
            let mut x = params.to_vec();
            x[c] += h;
            let r = self.residuals(&x)?;
            Some(r.iter().zip(base).map(|(a, b)| (a - b) / h).collect())
        };
        #[cfg(feature = "parallel")]
        let cols: Option<Vec<Vec<f64>>> = {
            use rayon::prelude::*;
            (0..params.len()).into_par_iter().map(column).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let cols: Option<Vec<Vec<f64>>> = (0..params.len()).map(column).collect();
        let cols = cols?;
        Some(DMatrix::from_fn(base.len(), params.len(), |i, j| cols[j][i]))
    }

    fn gauss_newton(&self, start: &[f64], lambda: f64, target: f64, opts: &GaussNewtonOptions) -> Run {
        let mut x = start.to_vec();
        let Some(mut r) = self.residuals(&x) else {
            return Run::failed(x, "initial guess is inadmissible");
        };
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        let mut misfit = sq(&r);
        let mut history = vec![Iterate {
            objective: misfit + lambda * self.penalty(&x),
            params: x.clone(),
            misfit,
            step_norm: 0.0,
            halvings: 0,
        }];
        let mut converged = misfit <= target;
        let mut note = None;
        while !converged && history.len() <= opts.max_iterations {
            let Some(jac) = self.jacobian(&x, &r, opts.fd_step) else {
                note = Some("a Jacobian column left the admissible class".to_string());
                break;
            };
            let n = x.len();
            let rows = r.len();
            let mut a = DMatrix::zeros(rows + n, n);
            a.view_mut((0, 0), (rows, n)).copy_from(&jac);
            let mut b = DVector::zeros(rows + n);
            for i in 0..rows {
                b[i] = -r[i];
            }
            for j in 0..n {
                let w = (lambda * self.lengths[j]).sqrt();
                a[(rows + j, j)] = w;
                b[rows + j] = -w * x[j];
            }
            let svd = a.svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.max();
            let Ok(step) = svd.solve(&b, cutoff) else {
                note = Some("Gauss-Newton system could not be solved".to_string());
                break;
            };
            let objective = history.last().expect("start").objective;
            let mut scale = 1.0;
            let mut accepted = None;
            for halvings in 0..=opts.max_halvings {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
                if let Some(rt) = self.residuals(&trial) {
                    let m = sq(&rt);
                    let obj = m + lambda * self.penalty(&trial);
                    if obj < objective {
                        accepted = Some((trial, rt, m, obj, halvings));
                        break;
                    }
                }
                scale *= 0.5;
            }
            let Some((trial, rt, m, obj, halvings)) = accepted else {
                let size = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if step.norm() <= 1e-6 * size {
                    converged = true;
                    break;
                }
                note = Some(format!(
                    "objective did not decrease after {} damped steps",
                    opts.max_halvings
                ));
                break;
            };
            let step_norm = scale * step.norm();
            let size = 1.0 + trial.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = trial;
            r = rt;
            misfit = m;
            history.push(Iterate {
                params: x.clone(),
                misfit,
                objective: obj,
                step_norm,
                halvings,
            });
            converged = misfit <= target || step_norm <= opts.step_tolerance * size;
        }
        if !converged && note.is_none() {
            note = Some(format!("no convergence within {} iterations", opts.max_iterations));
        }
        Run {
            history,
            converged,
            note,
        }
    }
}

struct Run {
    history: Vec<Iterate>,
    converged: bool,
    note: Option<String>,
}

impl Run {
    fn failed(x: Vec<f64>, why: &str) -> Self {
        Self {
            history: vec![Iterate {
                params: x,
                misfit: f64::INFINITY,
                objective: f64::INFINITY,
                step_norm: 0.0,
                halvings: 0,
            }],
            converged: false,
            note: Some(why.to_string()),
        }
    }

    fn best(&self) -> &Iterate {
        self.history
            .iter()
            .min_by(|a, b| a.objective.total_cmp(&b.objective))
            .expect("history is never empty")
    }
}

/// Fits per-edge constant `ρ` to leaf measurements by Gauss–Newton with
/// finite-difference Jacobians. `initial` holds `4N` values, edge-major.
pub fn least_squares_reconstruct(
    topo: &NetworkTopology,
    measured: &MeasurementSet,
    pair: &ExperimentPair,
    p: &CoefficientField,
    initial: &[f64],
    grid: &GridSpec,
    options: &GaussNewtonOptions,
) -> Result<LeastSquaresResult, InverseError> {
    let a2 = check_assumption2(grid.mesh.edges(), pair, None);
    if !a2.pass {
        return Err(InverseError::Assumption2(format!(
            "min |det M| = {:e} at edge {:?}, x = {}",
            a2.min_abs_det, a2.edge, a2.x
        )));
    }
    if initial.len() != 4 * topo.edge_count() {
        return Err(InverseError::Mismatch(format!(
            "{} initial values for {} edges",
            initial.len(),
            topo.edge_count()
        )));
    }
    let model = ForwardModel::new(topo, p, pair, grid)?;
    let floor = model.noise_floor().max(measured.noise_floor);
    let problem = Problem {
        model,
        measured,
        p,
        mesh: &grid.mesh,
        lengths: grid.mesh.edges().iter().flat_map(|m| [m.length(); 4]).collect(),
    };
    let (lambda, run, mut warnings) = match &options.noise {
        NoiseModel::Exact { lambda } => {
            if !(*lambda >= 0.0) {
                return Err(InverseError::Parameter(format!("λ = {lambda} must be non-negative")));
            }
            (*lambda, problem.gauss_newton(initial, *lambda, floor, options), Vec::new())
        }
        NoiseModel::Discrepancy {
            noise_misfit,
            tau,
            candidates,
        } => {
            let mut lambdas = candidates.clone();
            if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0)) {
                return Err(InverseError::Parameter("λ candidates must be non-negative".into()));
            }
            lambdas.sort_by(|a, b| b.total_cmp(a));
            let target = tau * tau * noise_misfit;
            let mut chosen = None;
            for &lambda in &lambdas {
                let run = problem.gauss_newton(initial, lambda, target.max(floor), options);
                let hit = run.best().misfit <= target;
                chosen = Some((lambda, run));
                if hit {
                    break;
                }
            }
            let (lambda, run) = chosen.expect("at least one candidate");
            let mut w = Vec::new();
            if run.best().misfit > target {
                w.push(format!("no candidate λ reached the discrepancy level {target:e}"));
            }
            (lambda, run, w)
        }
    };
    warnings.extend(run.note.clone());
    let best = run.best().clone();
    let rho = CoefficientPerturbation::from_parameters(&grid.mesh, &best.params)?;
    Ok(LeastSquaresResult {
        rho,
        params: best.params,
        history: run.history,
        converged: run.converged,
        misfit: best.misfit,
        lambda,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::dynamics::Mesh;
    use crate::inverse::simulate_measurements;

    fn setup(rho: &BTreeMap<usize, [f64; 4]>) -> (NetworkTopology, CoefficientField, ExperimentPair, GridSpec, MeasurementSet) {
        let net = NetworkTopology::single_edge(1.0).unwrap();
        let mesh = Mesh::uniform(&net, 20).unwrap();
        let p = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.1, 0.1]).unwrap();
        let pair = ExperimentPair::tree_potentials(&net, [1.0, 1.0, 0.1, 0.1]);
        let truth = CoefficientPerturbation::piecewise_constant(&mesh, rho);
        let grid = GridSpec::new(mesh, 1.5, 0.5, &p).unwrap();
        let data = simulate_measurements(&net, &p, &truth, &pair, &grid).unwrap();
        (net, p, pair, grid, data)
    }

    #[test]
    fn zero_data_needs_no_iterations() {
        let (net, p, pair, grid, data) = setup(&BTreeMap::new());
        let r = least_squares_reconstruct(&net, &data, &pair, &p, &[0.0; 4], &grid, &GaussNewtonOptions::default())
            .unwrap();
        assert_eq!(r.iterations(), 0);
        assert!(r.converged);
        assert_eq!(r.misfit, 0.0);
    }

    #[test]
    fn recovers_constant_perturbation() {
        let (net, p, pair, grid, data) = setup(&BTreeMap::from([(1, [0.05, 0.0, 0.0, 0.0])]));
        let r = least_squares_reconstruct(&net, &data, &pair, &p, &[0.0; 4], &grid, &GaussNewtonOptions::default())
            .unwrap();
        assert!(r.converged, "{:?}", r.warnings);
        assert!(r.iterations() <= 20);
        assert!((r.params[0] - 0.05).abs() < 5e-4, "{:?}", r.params);
        assert!(r.params[1..].iter().all(|v| v.abs() < 5e-4), "{:?}", r.params);
        let mut csv = Vec::new();
        r.write_history_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), r.history.len() + 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (net, p, pair, grid, data) = setup(&BTreeMap::new());
        let opts = GaussNewtonOptions {
            noise: NoiseModel::Exact { lambda: -1.0 },
            ..GaussNewtonOptions::default()
        };
        assert!(least_squares_reconstruct(&net, &data, &pair, &p, &[0.0; 4], &grid, &opts).is_err());
        assert!(
            least_squares_reconstruct(&net, &data, &pair, &p, &[0.0; 3], &grid, &GaussNewtonOptions::default())
                .is_err()
        );
    }
}

use std::io::{self, Write};

use super::measurement::ForwardModel;
use super::{check_assumption2, CoefficientPerturbation, ExperimentPair, InverseError};
use crate::carleman::{check_weight_geometry, WeightFamily};
use crate::dynamics::{CoefficientField, GridSpec};
use crate::network::NetworkTopology;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub epsilon: f64,
    /// `Σ_j Σ_n ∫ |ερ_{j,n}|² dx`.
    pub lhs: f64,
    /// Data norm with `l = 1, 2`.
    pub rhs: f64,
    /// The `l = 0` part, reported alongside.
    pub rhs_l0: f64,
    /// `lhs / rhs`; NaN when `rhs = 0`.
    pub ratio: f64,
    pub flags: Vec<String>,
}

impl StabilityRow {
    pub fn is_reliable(&self) -> bool {
        self.flags.is_empty() && self.ratio.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
    pub warnings: Vec<String>,
}

impl StabilityTable {
    /// Largest reliable ratio, the empirical Lipschitz constant.
    pub fn lipschitz_estimate(&self) -> Option<f64> {
        self.reliable().map(|r| r.ratio).reduce(f64::max)
    }

    /// `max ratio / min ratio` over reliable rows.
    pub fn spread(&self) -> Option<f64> {
        let hi = self.reliable().map(|r| r.ratio).reduce(f64::max)?;
        let lo = self.reliable().map(|r| r.ratio).reduce(f64::min)?;
        Some(hi / lo)
    }

    fn reliable(&self) -> impl Iterator<Item = &StabilityRow> {
        self.rows.iter().filter(|r| r.is_reliable())
    }

    /// Columns `epsilon, lhs, rhs, ratio, flags`; flags joined by `;`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "epsilon,lhs,rhs,ratio,flags")?;
        for r in &self.rows {
            writeln!(out, "{},{:e},{:e},{:e},{}", r.epsilon, r.lhs, r.rhs, r.ratio, r.flags.join(";"))?;
        }
        Ok(())
    }
}

/// Tabulates `Σ∫|ερ|²dx` against the leaf data norm for `q = p + ερ`.
pub fn stability_experiment(
    topo: &NetworkTopology,
    p: &CoefficientField,
    profile: &CoefficientPerturbation,
    epsilons: &[f64],
    pair: &ExperimentPair,
    grid: &GridSpec,
    weights: Option<&WeightFamily>,
) -> Result<StabilityTable, InverseError> {
    let a2 = check_assumption2(grid.mesh.edges(), pair, None);
    if !a2.pass {
        return Err(InverseError::Assumption2(format!(
            "min |det M| = {:e} at edge {:?}, x = {}",
            a2.min_abs_det, a2.edge, a2.x
        )));
    }
    let mut warnings = pair.compatibility_warnings(topo);
    if let Some(w) = weights {
        let g = check_weight_geometry(topo, w);
        if !g.pass {
            return Err(InverseError::Parameter(format!(
                "weight geometry: βT² = {} must exceed {}",
                w.beta * w.horizon * w.horizon,
                g.required_beta_t2
            )));
        }
    }
    let slowest = p
        .edges()
        .iter()
        .flat_map(|c| c.p1.iter().zip(&c.p2).map(|(a, b)| (a * b).sqrt()))
        .fold(0.0, f64::max);
    let travel = topo.max_distance_to_leaf() * slowest;
    if grid.horizon <= travel {
        warnings.push(format!(
            "T = {} does not exceed the travel time {travel} to the nearest leaf",
            grid.horizon
        ));
    }
    let queries: Vec<CoefficientField> = epsilons
        .iter()
        .map(|&e| profile.scaled(e).apply(p))
        .collect::<Result<_, _>>()?;
    let model = ForwardModel::new(topo, p, pair, grid)?;
    let floor = model.noise_floor();
    let row = |(eps, q): (f64, &CoefficientField)| -> Result<StabilityRow, InverseError> {
        let data = model.measure(q)?;
        let lhs = profile.scaled(eps).l2_squared();
        let rhs = data.norm();
        let mut flags = Vec::new();
        if eps == 0.0 {
            flags.push("zero-perturbation".to_string());
        }
        if rhs < 10.0 * floor {
            flags.push("below-noise-floor".to_string());
        }
        if rhs > 0.0 && data.second_derivative_drift() > 0.5 {
            flags.push("second-derivative-unresolved".to_string());
        }
        Ok(StabilityRow {
            epsilon: eps,
            lhs,
            rhs,
            rhs_l0: data.channel_norm(0),
            ratio: if rhs > 0.0 { lhs / rhs } else { f64::NAN },
            flags,
        })
    };
    let jobs: Vec<(f64, &CoefficientField)> = epsilons.iter().copied().zip(&queries).collect();
    #[cfg(feature = "parallel")]
    let rows: Vec<Result<StabilityRow, InverseError>> = {
        use rayon::prelude::*;
        jobs.into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<StabilityRow, InverseError>> = jobs.into_iter().map(row).collect();
    Ok(StabilityTable {
        rows: rows.into_iter().collect::<Result<_, _>>()?,
        warnings,
    })
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CoefficientPerturbation, ExperimentPair, InverseError};
use crate::dynamics::{
    boundary_trace, one_sided_derivatives, solve, BoundaryTraces, CoefficientField, Direction, GridSpec,
};
use crate::network::NetworkTopology;

/// Leaf current traces of the difference fields `w₁, w₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub experiments: [BoundaryTraces; 2],
    /// Rounding level of the data norm: the traces are differences of fields
    /// of size `max|u|`, differentiated on the time grid.
    pub noise_floor: f64,
}

impl MeasurementSet {
    /// `Σ_m Σ_leaves ∫ |∂ₜˡ w_{m,1}|² dt` for one `l`.
    pub fn channel_norm(&self, l: usize) -> f64 {
        self.experiments.iter().map(|e| e.norm_squared(l)).sum()
    }

    /// The data norm with `l = 1, 2`.
    pub fn norm(&self) -> f64 {
        self.channel_norm(1) + self.channel_norm(2)
    }

    /// Trapezoid-weighted differences over `m`, leaves, `l = 1, 2` and time;
    /// their squares sum to the misfit.
    pub fn residuals(&self, other: &Self) -> Result<Vec<f64>, InverseError> {
        let mut out = Vec::new();
        for (a, b) in self.experiments.iter().zip(&other.experiments) {
            if a.leaves.len() != b.leaves.len() || a.len() != b.len() || a.dt != b.dt {
                return Err(InverseError::Mismatch("measurement sets have different shapes".into()));
            }
            let n = a.len();
            for (x, y) in a.leaves.iter().zip(&b.leaves) {
                for l in 1..3 {
                    for i in 0..n {
                        let w = if i == 0 || i + 1 == n { 0.5 * a.dt } else { a.dt };
                        out.push(w.sqrt() * (x.channels[l][i] - y.channels[l][i]));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn misfit(&self, other: &Self) -> Result<f64, InverseError> {
        Ok(self.residuals(other)?.iter().map(|r| r * r).sum())
    }

    /// Adds independent Gaussian noise to the `l = 1, 2` channels with
    /// standard deviation `relative · rms(channel)`. Returns the noisy set
    /// and the expected misfit `E‖noise‖²` between it and `self`.
    pub fn with_noise(&self, relative: f64, seed: u64) -> (Self, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        let mut expected = 0.0;
        for l in 1..3 {
            let (sum, count) = self
                .experiments
                .iter()
                .flat_map(|e| &e.leaves)
                .flat_map(|lt| &lt.channels[l])
                .fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
            let sigma = relative * (sum / count.max(1) as f64).sqrt();
            if !(sigma > 0.0) {
                continue;
            }
            let normal = Normal::new(0.0, sigma).expect("finite deviation");
            for e in &mut out.experiments {
                let span = e.dt * (e.len().saturating_sub(1)) as f64;
                for lt in &mut e.leaves {
                    lt.channels[l].iter_mut().for_each(|v| *v += normal.sample(&mut rng));
                    expected += sigma * sigma * span;
                }
            }
        }
        (out, expected)
    }

    /// Relative change of the `l = 2` norm when the traces are
    /// re-differentiated on every second sample; large values mean the
    /// discrete second derivative is not resolved by the time grid.
    pub fn second_derivative_drift(&self) -> f64 {
        let fine = self.channel_norm(2);
        let coarse: f64 = self
            .experiments
            .iter()
            .flat_map(|e| e.leaves.iter().map(move |lt| (e.dt, lt)))
            .map(|(dt, lt)| {
                let sub: Vec<f64> = lt.channels[0].iter().step_by(2).copied().collect();
                let (_, d2) = one_sided_derivatives(&sub, 2.0 * dt);
                let inner: f64 = d2.iter().map(|v| v * v).sum();
                let ends = d2.first().zip(d2.last()).map_or(0.0, |(a, b)| 0.5 * (a * a + b * b));
                2.0 * dt * (inner - ends)
            })
            .sum();
        if fine > 0.0 {
            (fine - coarse).abs() / fine
        } else {
            0.0
        }
    }
}

/// Background solves with `p`, reused for every candidate `q`.
pub(crate) struct ForwardModel<'a> {
    topo: &'a NetworkTopology,
    pair: &'a ExperimentPair,
    /// The background grid with the CFL safety factor relaxed to 1: the time
    /// step is fixed, and a candidate `q` may be slightly faster than `p`.
    grid: GridSpec,
    base: [BoundaryTraces; 2],
    noise_floor: f64,
}

impl<'a> ForwardModel<'a> {
    pub(crate) fn new(
        topo: &'a NetworkTopology,
        p: &CoefficientField,
        pair: &'a ExperimentPair,
        grid: &GridSpec,
    ) -> Result<Self, InverseError> {
        let traces = |m: usize| -> Result<(BoundaryTraces, f64), InverseError> {
            let u = solve(topo, p, &pair.experiments[m], grid, Direction::Both)?.trajectory;
            Ok((boundary_trace(&u, topo), u.max_abs()))
        };
        let (a, sa) = traces(0)?;
        let (b, sb) = traces(1)?;
        let dt = grid.dt();
        let span = 2.0 * grid.horizon;
        let leaves = a.leaves.len() as f64;
        let noise_floor = [sa, sb]
            .iter()
            .map(|s| {
                let r = 10.0 * f64::EPSILON * s;
                leaves * span * ((r / dt).powi(2) + (r / (dt * dt)).powi(2))
            })
            .sum();
        Ok(Self {
            topo,
            pair,
            grid: GridSpec::with_steps(grid.mesh.clone(), grid.horizon, grid.steps, 1.0),
            base: [a, b],
            noise_floor,
        })
    }

    pub(crate) fn noise_floor(&self) -> f64 {
        self.noise_floor
    }

    /// Measurements of `w_m = u_m − v_m` with `v_m` solved under `q`.
    pub(crate) fn measure(&self, q: &CoefficientField) -> Result<MeasurementSet, InverseError> {
        let run = |m: usize| -> Result<BoundaryTraces, InverseError> {
            let v = solve(self.topo, q, &self.pair.experiments[m], &self.grid, Direction::Both)?.trajectory;
            let mut t = boundary_trace(&v, self.topo);
            for (lt, base) in t.leaves.iter_mut().zip(&self.base[m].leaves) {
                for (c, b) in lt.channels.iter_mut().zip(&base.channels) {
                    c.iter_mut().zip(b).for_each(|(x, y)| *x = y - *x);
                }
            }
            Ok(t)
        };
        Ok(MeasurementSet {
            experiments: [run(0)?, run(1)?],
            noise_floor: self.noise_floor,
        })
    }
}

/// Leaf measurements of `w_m` for `q = p + ρ` on `[−T, T]`.
pub fn simulate_measurements(
    topo: &NetworkTopology,
    p: &CoefficientField,
    rho: &CoefficientPerturbation,
    pair: &ExperimentPair,
    grid: &GridSpec,
) -> Result<MeasurementSet, InverseError> {
    let q = rho.apply(p)?;
    ForwardModel::new(topo, p, pair, grid)?.measure(&q)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::dynamics::Mesh;

    fn measured(rho: &BTreeMap<usize, [f64; 4]>) -> MeasurementSet {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let mesh = Mesh::uniform(&net, 20).unwrap();
        let p = CoefficientField::uniform(&mesh, [1.0, 1.0, 0.1, 0.1]).unwrap();
        let pair = ExperimentPair::tree_potentials(&net, [1.0, 1.0, 0.1, 0.1]);
        let rho = CoefficientPerturbation::piecewise_constant(&mesh, rho);
        let grid = GridSpec::new(mesh, 1.0, 0.5, &p).unwrap();
        simulate_measurements(&net, &p, &rho, &pair, &grid).unwrap()
    }

    #[test]
    fn zero_perturbation_measures_nothing() {
        let m = measured(&BTreeMap::new());
        assert_eq!(m.norm(), 0.0);
        assert_eq!(m.misfit(&m).unwrap(), 0.0);
        assert!(m.noise_floor > 0.0);
    }

    #[test]
    fn perturbation_is_seen_at_leaves() {
        let m = measured(&BTreeMap::from([(1, [0.05, 0.0, 0.0, 0.0])]));
        assert!(m.norm() > 1e3 * m.noise_floor);
        assert_eq!(m.experiments[0].leaves.len(), 3);
        let r = m.residuals(&m).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noise_is_reproducible_and_sized() {
        let m = measured(&BTreeMap::from([(4, [0.0, 0.05, 0.0, 0.0])]));
        let (a, expected) = m.with_noise(0.01, 7);
        let (b, _) = m.with_noise(0.01, 7);
        assert_eq!(a, b);
        let actual = a.misfit(&m).unwrap();
        assert!(actual > 0.5 * expected && actual < 1.5 * expected, "{actual} vs {expected}");
    }
}

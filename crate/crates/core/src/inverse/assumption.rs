use nalgebra::Matrix4;

use super::ExperimentPair;
use crate::dynamics::EdgeMesh;
use crate::network::EdgeId;

/// Matrix of the `t = 0` relations for unknowns `(ρ₁, ρ₂, ρ₃, ρ₄)`: for each
/// experiment the rows `(∂ₓz₂, 0, z₁, 0)` and `(0, ∂ₓz₁, 0, z₂)`.
/// `z[m]` and `dz[m]` hold `(z_{m,1}, z_{m,2})` and their x-derivatives.
pub fn sensitivity_matrix(z: [[f64; 2]; 2], dz: [[f64; 2]; 2]) -> Matrix4<f64> {
    Matrix4::new(
        dz[0][1], 0.0, z[0][0], 0.0, //
        0.0, dz[0][0], 0.0, z[0][1], //
        dz[1][1], 0.0, z[1][0], 0.0, //
        0.0, dz[1][0], 0.0, z[1][1],
    )
}

/// The two 2×2 blocks whose product is the determinant of
/// [`sensitivity_matrix`]: the `(ρ₁, ρ₃)` block and the `(ρ₂, ρ₄)` block.
pub fn block_determinants(z: [[f64; 2]; 2], dz: [[f64; 2]; 2]) -> [f64; 2] {
    [
        dz[0][1] * z[1][0] - z[0][0] * dz[1][1],
        dz[0][0] * z[1][1] - z[0][1] * dz[1][0],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption2Report {
    pub pass: bool,
    pub min_abs_det: f64,
    /// Where the minimum occurs.
    pub edge: Option<EdgeId>,
    pub x: f64,
    pub threshold: f64,
    /// Largest `|z|` or `|∂ₓz|` over the grid.
    pub scale: f64,
}

/// Evaluates `det M(x)` at every node; passes iff the smallest magnitude
/// exceeds `threshold` (default `10⁻⁸ · scale⁴`).
pub fn check_assumption2(grid: &[EdgeMesh], pair: &ExperimentPair, threshold: Option<f64>) -> Assumption2Report {
    let mut scale = 0.0_f64;
    let mut min_abs_det = f64::INFINITY;
    let mut at = (None, f64::NAN);
    for m in grid {
        for i in 0..m.nodes() {
            let x = m.x(i);
            let (z, dz) = initial_samples(pair, m.id, x);
            for v in z.iter().chain(&dz).flatten() {
                scale = scale.max(v.abs());
            }
            let det = sensitivity_matrix(z, dz).determinant().abs();
            if det < min_abs_det {
                min_abs_det = det;
                at = (Some(m.id), x);
            }
        }
    }
    let threshold = threshold.unwrap_or(1e-8 * scale.powi(4));
    Assumption2Report {
        pass: min_abs_det > threshold,
        min_abs_det,
        edge: at.0,
        x: at.1,
        threshold,
        scale,
    }
}

pub(crate) fn initial_samples(pair: &ExperimentPair, edge: EdgeId, x: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let [a, b] = &pair.experiments;
    (
        [a.initial_value(edge, x), b.initial_value(edge, x)],
        [a.initial_derivative(edge, x), b.initial_derivative(edge, x)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ProblemData;
    use crate::profile::Profile;

    fn pair(first: [Profile; 2], second: [Profile; 2]) -> ExperimentPair {
        let [a, b] = first;
        let [c, d] = second;
        ExperimentPair::new(ProblemData::new().with_initial(1, a, b), ProblemData::new().with_initial(1, c, d))
    }

    fn ramp_pair() -> ExperimentPair {
        let x = Profile::polynomial(&[0.0, 1.0]);
        let one = Profile::constant(1.0);
        pair([one.clone(), x.clone()], [x, one])
    }

    fn edge(x0: f64, length: f64) -> EdgeMesh {
        EdgeMesh {
            id: 1,
            cells: 100,
            x0,
            h: length / 100.0,
        }
    }

    #[test]
    fn ramp_pair_on_positive_edge_passes() {
        let r = check_assumption2(&[edge(1.0, 1.0)], &ramp_pair(), None);
        assert!(r.pass);
        assert!((r.min_abs_det - 1.0).abs() < 1e-9);
        assert_eq!(r.x, 1.0);
    }

    #[test]
    fn repeated_experiment_fails() {
        let x = Profile::polynomial(&[0.0, 1.0]);
        let one = Profile::constant(1.0);
        let p = pair([one.clone(), x.clone()], [one, x]);
        let r = check_assumption2(&[edge(1.0, 1.0)], &p, None);
        assert!(!r.pass);
        assert_eq!(r.min_abs_det, 0.0);
    }

    #[test]
    fn edge_through_origin_fails() {
        let r = check_assumption2(&[edge(-1.0, 2.0)], &ramp_pair(), None);
        assert!(!r.pass);
        assert!(r.x.abs() < 1e-12);
    }

    #[test]
    fn blocks_factor_the_determinant() {
        let z = [[0.3, -1.2], [2.0, 0.7]];
        let dz = [[1.5, 0.4], [-0.9, 2.2]];
        let [a, b] = block_determinants(z, dz);
        let det = sensitivity_matrix(z, dz).determinant();
        assert!((det - a * b).abs() < 1e-12);
    }
}

use super::DynamicsError;
use crate::network::{EdgeEnd, NetworkError, NetworkTopology, VertexId};

/// Solution of the local vertex system.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionState {
    pub voltage: f64,
    /// Current `u₁` at the touching end of each incident edge, signed along
    /// the edge orientation.
    pub currents: Vec<f64>,
    /// Voltage amplitude of the wave leaving the vertex along each edge.
    pub outgoing: Vec<f64>,
}

/// Solves voltage continuity, current balance and one characteristic relation
/// per edge at the interior vertex `k`.
///
/// `incoming[e]` is the voltage amplitude of the wave arriving along the
/// `e`-th edge of `topo.incident(k)`, and `local[e]` the coefficients at that
/// end.
pub fn couple_vertex(
    topo: &NetworkTopology,
    k: VertexId,
    incoming: &[f64],
    local: &[[f64; 4]],
) -> Result<JunctionState, DynamicsError> {
    if k >= topo.vertex_count() {
        return Err(NetworkError::UnknownVertex(k).into());
    }
    if !topo.interior_vertices().contains(&k) {
        return Err(DynamicsError::Config(format!("vertex {k} is not an interior vertex")));
    }
    let inc = topo.incident(k);
    if incoming.len() != inc.len() || local.len() != inc.len() {
        return Err(DynamicsError::Mismatch(format!(
            "vertex {k} has {} incident edges, got {} waves and {} coefficient sets",
            inc.len(),
            incoming.len(),
            local.len()
        )));
    }
    let mut z = Vec::with_capacity(inc.len());
    for p in local {
        if !(p[0] > 0.0 && p[1] > 0.0) {
            return Err(DynamicsError::Domain(format!(
                "singular junction system at vertex {k}: p₁ = {}, p₂ = {}",
                p[0], p[1]
            )));
        }
        z.push((p[0] / p[1]).sqrt());
    }
    let arriving: Vec<f64> = incoming.iter().map(|a| 2.0 * a).collect();
    let voltage = junction_voltage(&arriving, &z);
    let currents = inc
        .iter()
        .zip(arriving.iter().zip(&z))
        .map(|(&(_, end), (&a, &z))| end_current(end, a, voltage, z))
        .collect();
    let outgoing = incoming.iter().map(|a| voltage - a).collect();
    Ok(JunctionState {
        voltage,
        currents,
        outgoing,
    })
}

/// Common voltage from arriving characteristics `a_e = u₂ ± Z u₁`.
pub(crate) fn junction_voltage(arriving: &[f64], z: &[f64]) -> f64 {
    let (num, den) = arriving
        .iter()
        .zip(z)
        .fold((0.0, 0.0), |(n, d), (a, z)| (n + a / z, d + 1.0 / z));
    num / den
}

/// Current at an edge end once the vertex voltage is known.
pub(crate) fn end_current(end: EdgeEnd, arriving: f64, voltage: f64, z: f64) -> f64 {
    match end {
        EdgeEnd::Terminal => (arriving - voltage) / z,
        EdgeEnd::Initial => (voltage - arriving) / z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MATCHED: [f64; 4] = [1.0, 1.0, 0.0, 0.0];

    #[test]
    fn symmetric_split() {
        let net = NetworkTopology::star(1.0, &[1.0, 1.0]).unwrap();
        let j = couple_vertex(&net, 1, &[1.0, 0.0, 0.0], &[MATCHED; 3]).unwrap();
        assert!((j.voltage - 2.0 / 3.0).abs() < 1e-15);
        assert!((j.outgoing[0] + 1.0 / 3.0).abs() < 1e-15);
        assert!((j.outgoing[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((j.outgoing[2] - 2.0 / 3.0).abs() < 1e-15);
        let balance = j.currents[0] - j.currents[1] - j.currents[2];
        assert!(balance.abs() < 1e-15);
    }

    #[test]
    fn matched_pass_through() {
        let net = NetworkTopology::star(1.0, &[1.0]).unwrap();
        let j = couple_vertex(&net, 1, &[0.7, -0.2], &[MATCHED; 2]).unwrap();
        assert!((j.outgoing[1] - 0.7).abs() < 1e-15);
        assert!((j.outgoing[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_in_zero_out() {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        let p = [[2.0, 0.5, 0.1, 0.0]; 3];
        let j = couple_vertex(&net, 3, &[0.0; 3], &p).unwrap();
        assert_eq!(j.voltage, 0.0);
        assert!(j.currents.iter().chain(&j.outgoing).all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let net = NetworkTopology::two_junction([1.0; 5]).unwrap();
        assert!(couple_vertex(&net, 2, &[1.0], &[MATCHED]).is_err());
        assert!(couple_vertex(&net, 1, &[1.0, 0.0], &[MATCHED; 2]).is_err());
        assert!(couple_vertex(&net, 1, &[1.0, 0.0, 0.0], &[[0.0, 1.0, 0.0, 0.0]; 3]).is_err());
    }
}

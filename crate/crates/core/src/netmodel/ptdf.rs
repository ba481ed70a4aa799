//! DC power-transfer distribution factors.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::case::PowerSystem;
use super::CaseError;

/// `h_g[line][unit]` over coal, gas and wind units; `h_d[line][demand]` over
/// loads then P2G units. A positive entry means an injection at that element
/// (withdrawn at the slack bus) pushes flow in the line's from→to direction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ptdf {
    pub h_g: Vec<Vec<f64>>,
    pub h_d: Vec<Vec<f64>>,
}

/// Line flows per unit injection at each bus, withdrawn at the slack bus.
/// Rows are lines, columns buses.
pub fn bus_factors(power: &PowerSystem) -> Result<DMatrix<f64>, CaseError> {
    let nb = power.buses;
    let nl = power.lines.len();
    check_connected(power)?;
    let reduced: Vec<usize> = (0..nb).filter(|&b| b != power.slack_bus).collect();
    let mut pos = vec![usize::MAX; nb];
    for (i, &b) in reduced.iter().enumerate() {
        pos[b] = i;
    }
    let nr = reduced.len();
    let mut bmat = DMatrix::<f64>::zeros(nr, nr);
    for l in &power.lines {
        let y = 1.0 / l.reactance.unwrap_or(1.0);
        for (a, b) in [(l.from, l.to), (l.to, l.from)] {
            if a != power.slack_bus {
                bmat[(pos[a], pos[a])] += y;
                if b != power.slack_bus {
                    bmat[(pos[a], pos[b])] -= y;
                }
            }
        }
    }
    let mut out = DMatrix::<f64>::zeros(nl, nb);
    if nr == 0 {
        return Ok(out);
    }
    let lu = bmat.lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| CaseError::Network("reduced susceptance matrix is singular".into()))?;
    // theta = B^-1 e_bus; flow_l = (theta_from - theta_to) / x_l
    for (li, l) in power.lines.iter().enumerate() {
        let y = 1.0 / l.reactance.unwrap_or(1.0);
        for (bi, &bus) in reduced.iter().enumerate() {
            let tf = if l.from == power.slack_bus {
                0.0
            } else {
                inv[(pos[l.from], bi)]
            };
            let tt = if l.to == power.slack_bus {
                0.0
            } else {
                inv[(pos[l.to], bi)]
            };
            out[(li, bus)] = y * (tf - tt);
        }
    }
    Ok(out)
}

/// Distribution factors for the case's units and demands.
pub fn compute_ptdf(power: &PowerSystem) -> Result<Ptdf, CaseError> {
    let bus = bus_factors(power)?;
    let pick = |buses: &[usize]| -> Vec<Vec<f64>> {
        (0..power.lines.len())
            .map(|l| buses.iter().map(|&b| bus[(l, b)]).collect())
            .collect()
    };
    Ok(Ptdf {
        h_g: pick(&power.generator_buses()),
        h_d: pick(&power.demand_buses()),
    })
}

fn check_connected(power: &PowerSystem) -> Result<(), CaseError> {
    let nb = power.buses;
    let mut adj = vec![Vec::new(); nb];
    for l in &power.lines {
        adj[l.from].push(l.to);
        adj[l.to].push(l.from);
    }
    let mut seen = vec![false; nb];
    let mut queue = VecDeque::from([power.slack_bus]);
    seen[power.slack_bus] = true;
    while let Some(b) = queue.pop_front() {
        for &n in &adj[b] {
            if !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(b) => Err(CaseError::Network(format!(
            "bus {b} is not connected to the slack bus"
        ))),
        None => Ok(()),
    }
}

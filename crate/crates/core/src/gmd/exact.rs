//! Exact Earth Mover's Distance for small instances.
//!
//! Solves the transportation LP with successive shortest paths: repeatedly
//! find the cheapest residual path from a node with remaining supply to a
//! node with remaining demand (Bellman-Ford, since reverse arcs carry
//! negative cost) and push the bottleneck amount along it. With no negative
//! residual cycles at any step the final plan is optimal.

use super::{validate, CostMatrix, GmdError};

pub const EXACT_EMD_MAX_CELLS: usize = 64;

const EPS: f64 = 1e-13;
const MAX_AUGMENTATIONS: usize = 100_000;

/// Optimal transport cost between `a` and `b`; at most
/// [`EXACT_EMD_MAX_CELLS`] cells.
pub fn exact_emd(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<f64, GmdError> {
    let plan = exact_transport_plan(a, b, cost)?;
    let mut total = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            total += plan[i * b.len() + j] * cost.get(i, j);
        }
    }
    Ok(total)
}

/// Optimal flow matrix (row-major, `a.len() x b.len()`).
pub fn exact_transport_plan(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<Vec<f64>, GmdError> {
    let (m, n) = (a.len(), b.len());
    if m * n > EXACT_EMD_MAX_CELLS {
        return Err(GmdError::TooLarge {
            rows: m,
            cols: n,
            max: EXACT_EMD_MAX_CELLS,
        });
    }
    validate(a, b, cost)?;

    let mut flow = vec![0.0; m * n];
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let nodes = m + n;

    for _ in 0..MAX_AUGMENTATIONS {
        let supply_left: f64 = supply.iter().sum();
        let demand_left: f64 = demand.iter().sum();
        if supply_left <= EPS || demand_left <= EPS {
            return Ok(flow);
        }

        // Multi-source Bellman-Ford over the residual graph. Nodes 0..m are
        // sources, m..m+n are sinks.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred: Vec<Option<usize>> = vec![None; nodes];
        for i in 0..m {
            if supply[i] > EPS {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..m {
                if dist[i].is_finite() {
                    for j in 0..n {
                        let d = dist[i] + cost.get(i, j);
                        if d < dist[m + j] - EPS {
                            dist[m + j] = d;
                            pred[m + j] = Some(i);
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..n {
                if dist[m + j].is_finite() {
                    for i in 0..m {
                        if flow[i * n + j] > EPS {
                            let d = dist[m + j] - cost.get(i, j);
                            if d < dist[i] - EPS {
                                dist[i] = d;
                                pred[i] = Some(m + j);
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let Some(sink) = (0..n)
            .filter(|&j| demand[j] > EPS && dist[m + j].is_finite())
            .min_by(|&x, &y| dist[m + x].total_cmp(&dist[m + y]).then(x.cmp(&y)))
        else {
            return Ok(flow);
        };

        // Walk back to the originating source, collecting arcs.
        let mut path = Vec::new();
        let mut node = m + sink;
        let mut bottleneck = demand[sink];
        while let Some(p) = pred[node] {
            if path.len() > nodes {
                return Err(GmdError::NoConvergence);
            }
            if node >= m {
                // forward arc p -> node
                path.push((p, node - m, true));
            } else {
                // reverse arc p (sink side) -> node (source side)
                let (i, j) = (node, p - m);
                bottleneck = bottleneck.min(flow[i * n + j]);
                path.push((i, j, false));
            }
            node = p;
        }
        if node >= m {
            return Err(GmdError::NoConvergence);
        }
        bottleneck = bottleneck.min(supply[node]);
        if bottleneck <= 0.0 {
            return Err(GmdError::NoConvergence);
        }
        for (i, j, forward) in path {
            if forward {
                flow[i * n + j] += bottleneck;
            } else {
                flow[i * n + j] -= bottleneck;
            }
        }
        supply[node] -= bottleneck;
        demand[sink] -= bottleneck;
    }
    Err(GmdError::NoConvergence)
}

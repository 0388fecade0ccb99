//! Routing-game model: latencies, networks, populations, flows and the
//! elementary cost evaluations everything else is built on.

mod flow;
mod latency;
mod network;
mod population;
mod toll;

pub use flow::{FlowProfile, FEASIBILITY_TOL};
pub use latency::PolyLatency;
pub use network::{Edge, EdgeSpec, Network, NetworkSpec, MAX_PATHS};
pub use population::{BoundValue, Population, PopulationSpec, SensitivityBounds, SensitivityClass};
pub use toll::{TollFunction, TollSchedule};

use crate::error::{input, Result};

/// Default comparison tolerance, scaled by `1 + magnitude`.
pub const ABS_TOL: f64 = 1e-9;

pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= ABS_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Latency along `path`: the sum of its edge latencies at the current edge flows.
pub fn path_latency(network: &Network, flow: &FlowProfile, path: usize) -> Result<f64> {
    let edges = network.path(path)?;
    Ok(edges
        .iter()
        .map(|&e| network.latency(e).eval(flow.edge_flow(e)))
        .sum())
}

/// Total latency `sum_e f_e l_e(f_e)`.
pub fn total_latency(network: &Network, flow: &FlowProfile) -> f64 {
    let by_edges = total_latency_by_edges(network, flow);
    debug_assert!(
        (by_edges - total_latency_by_paths(network, flow)).abs() <= 1e-9 * (1.0 + by_edges.abs()),
        "edge and path forms of total latency disagree"
    );
    by_edges
}

pub fn total_latency_by_edges(network: &Network, flow: &FlowProfile) -> f64 {
    flow.edge_flows()
        .iter()
        .enumerate()
        .map(|(e, &fe)| fe * network.latency(e).eval(fe))
        .sum()
}

/// Total latency in path form, `sum_p f_p l_p(f)`.
pub fn total_latency_by_paths(network: &Network, flow: &FlowProfile) -> f64 {
    flow.path_totals()
        .iter()
        .enumerate()
        .map(|(p, &fp)| fp * path_latency(network, flow, p).expect("path index in range"))
        .sum()
}

/// Cost `sum_{e in p} [l_e(f_e) + s tau_e(f_e)]` experienced on `path` by a user
/// with toll sensitivity `sensitivity`.
pub fn user_cost(
    network: &Network,
    tolls: &TollSchedule,
    sensitivity: f64,
    flow: &FlowProfile,
    path: usize,
) -> Result<f64> {
    if !sensitivity.is_finite() || sensitivity < 0.0 {
        return input(format!(
            "user sensitivity must be finite and nonnegative, got {sensitivity}"
        ));
    }
    if tolls.len() != network.num_edges() {
        return input("toll schedule does not match the network's edges");
    }
    let edges = network.path(path)?;
    Ok(edges
        .iter()
        .map(|&e| {
            let fe = flow.edge_flow(e);
            let toll = if sensitivity == 0.0 {
                0.0
            } else {
                sensitivity * tolls.eval(e, fe)
            };
            network.latency(e).eval(fe) + toll
        })
        .sum())
}

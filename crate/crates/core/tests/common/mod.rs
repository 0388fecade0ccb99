// Reference computations written directly from polynomial coefficients, sharing
// no code with the library's cost, toll or gap routines.
#![allow(dead_code)]

use congestion_tolls::equilibrium::EquilibriumResult;
use congestion_tolls::game::{FlowProfile, Network, Population};
use congestion_tolls::mechanism::{Mechanism, MechanismSpec};

pub fn horner(coeffs: &[f64], f: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * f + a)
}

pub fn slope(coeffs: &[f64], f: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &a)| acc * f + k as f64 * a)
}

pub fn edge_latency(net: &Network, e: usize, f: f64) -> f64 {
    horner(net.latency(e).coeffs(), f)
}

pub fn edge_marginal_cost(net: &Network, e: usize, f: f64) -> f64 {
    let c = net.latency(e).coeffs();
    horner(c, f) + f * slope(c, f)
}

/// `l + s tau` on edge `e` at flow `f`.
pub fn edge_user_cost(net: &Network, mech: &MechanismSpec, s: f64, e: usize, f: f64) -> f64 {
    let c = net.latency(e).coeffs();
    let l = horner(c, f);
    let toll = match &mech.mechanism {
        Mechanism::Zero => 0.0,
        Mechanism::MarginalCost => f * slope(c, f),
        Mechanism::Generalized { kappa1, kappa2 } => kappa1 * l + kappa2 * f * slope(c, f),
        Mechanism::Fixed(q) => q[e],
    };
    l + s * toll
}

pub fn edge_totals(net: &Network, path_flows: &[Vec<f64>]) -> Vec<f64> {
    let mut fe = vec![0.0; net.num_edges()];
    for row in path_flows {
        for (p, &x) in row.iter().enumerate() {
            for &e in net.paths()[p].iter() {
                fe[e] += x;
            }
        }
    }
    fe
}

/// Class-by-path user costs.
pub fn user_costs(
    net: &Network,
    mech: &MechanismSpec,
    pop: &Population,
    path_flows: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let fe = edge_totals(net, path_flows);
    pop.classes()
        .iter()
        .map(|c| {
            net.paths()
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|&e| edge_user_cost(net, mech, c.sensitivity, e, fe[e]))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Largest cost excess of a used path over the class minimum.
pub fn gap(net: &Network, mech: &MechanismSpec, pop: &Population, flow: &FlowProfile) -> f64 {
    let costs = user_costs(net, mech, pop, flow.path_flows());
    let mut worst: f64 = 0.0;
    for (c, row) in costs.iter().enumerate() {
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        for (p, &cost) in row.iter().enumerate() {
            if flow.path_flows()[c][p] > 1e-12 {
                worst = worst.max(cost - best);
            }
        }
    }
    worst
}

pub fn total_latency(net: &Network, path_flows: &[Vec<f64>]) -> f64 {
    let fe = edge_totals(net, path_flows);
    fe.iter()
        .enumerate()
        .map(|(e, &f)| f * edge_latency(net, e, f))
        .sum()
}

/// A certified result must re-verify against the independent gap.
pub fn reverifies(
    net: &Network,
    mech: &MechanismSpec,
    pop: &Population,
    r: &EquilibriumResult,
) -> bool {
    !r.certified || gap(net, mech, pop, &r.flow) <= r.tolerance * (1.0 + 1e-9) + 1e-14
}

/// Worst violation of the parallel-network orderings between classes with
/// strictly ordered marginal weights: the less sensitive class uses paths that
/// are no slower and have no smaller marginal cost.
pub fn ordering_violation(
    net: &Network,
    pop: &Population,
    mech: &MechanismSpec,
    flow: &FlowProfile,
) -> f64 {
    let (k1, k2) = mech.kappa().expect("flow-proportional tolls");
    let beta: Vec<f64> = pop
        .classes()
        .iter()
        .map(|c| k2 * c.sensitivity / (1.0 + k1 * c.sensitivity))
        .collect();
    let fe = edge_totals(net, flow.path_flows());
    let lat = |p: usize| -> f64 {
        net.paths()[p]
            .iter()
            .map(|&e| edge_latency(net, e, fe[e]))
            .sum()
    };
    let mc = |p: usize| -> f64 {
        net.paths()[p]
            .iter()
            .map(|&e| edge_marginal_cost(net, e, fe[e]))
            .sum()
    };
    let used = |c: usize, p: usize| flow.path_flows()[c][p] > 1e-9;
    let mut worst: f64 = 0.0;
    for x in 0..beta.len() {
        for y in 0..beta.len() {
            if !(beta[x] < beta[y]) {
                continue;
            }
            for i in 0..net.num_paths() {
                for j in 0..net.num_paths() {
                    if used(x, i) && used(y, j) {
                        worst = worst.max(lat(i) - lat(j)).max(mc(j) - mc(i));
                    }
                }
            }
        }
    }
    worst
}

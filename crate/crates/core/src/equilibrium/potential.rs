use super::roots::{bisect, invert};
use super::{certify, EquilibriumResult, SolverConfig, SolverKind, USED_PATH_MASS};
use crate::error::{input, Error, Result};
use crate::game::{self, FlowProfile, Network, PolyLatency, Population};
use crate::mechanism::{normalized_edge_costs, MechanismSpec};

/// Nash flow of a homogeneous population with sensitivity `s`: the minimizer
/// of the potential `sum_e int_0^{f_e} c_e`, where `c_e` is the normalized edge cost.
///
/// Parallel networks are solved by bisection on the common cost level; other
/// networks by pairwise equalization between the costliest used path and the
/// cheapest path, starting from all flow on the first path. Paths at exactly
/// equal cost keep the lower index.
pub fn nash_flow_homogeneous(
    network: &Network,
    mechanism: &MechanismSpec,
    s: f64,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    let population = Population::homogeneous(network.demand(), s)?;
    let costs = normalized_edge_costs(network, mechanism, s)?;
    let (flows, iterations, kind) = if network.is_parallel() {
        (
            parallel_levels(network, &costs),
            1,
            SolverKind::PotentialMin,
        )
    } else {
        let mut init = vec![0.0; network.num_paths()];
        init[0] = network.demand();
        let (f, it) = pairwise_min(network, &costs, init, config)?;
        (f, it, SolverKind::PotentialMin)
    };
    let flow = FlowProfile::aggregate(network, flows)?;
    finish(
        network,
        mechanism,
        &population,
        flow,
        kind,
        iterations,
        config,
    )
}

/// Homogeneous Nash flow by pairwise equalization from a caller-supplied start.
pub fn nash_flow_homogeneous_from(
    network: &Network,
    mechanism: &MechanismSpec,
    s: f64,
    init: &[f64],
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    let population = Population::homogeneous(network.demand(), s)?;
    check_init(network, init)?;
    FlowProfile::aggregate(network, init.to_vec())?.check_demand(network)?;
    let costs = normalized_edge_costs(network, mechanism, s)?;
    let (flows, iterations) = pairwise_min(network, &costs, init.to_vec(), config)?;
    let flow = FlowProfile::aggregate(network, flows)?;
    finish(
        network,
        mechanism,
        &population,
        flow,
        SolverKind::PotentialMin,
        iterations,
        config,
    )
}

/// System-optimal flow: the homogeneous Nash flow under marginal-cost edge
/// costs `l + f l'`. The reported gap is measured against those costs.
pub fn optimal_flow(network: &Network, config: &SolverConfig) -> Result<EquilibriumResult> {
    nash_flow_homogeneous(network, &MechanismSpec::marginal_cost(), 1.0, config)
}

/// True when no transfer of `delta` mass from a used path to any other path
/// lowers total latency by more than `1e-9`.
pub fn optimality_certificate(network: &Network, flow: &FlowProfile, delta: f64) -> bool {
    let base = game::total_latency(network, flow);
    let totals = flow.path_totals();
    for p in 0..totals.len() {
        if totals[p] < delta {
            continue;
        }
        for q in 0..totals.len() {
            if p == q {
                continue;
            }
            let mut moved = totals.clone();
            moved[p] -= delta;
            moved[q] += delta;
            let trial = FlowProfile::aggregate(network, moved).expect("nonnegative transfer");
            if game::total_latency(network, &trial) < base - 1e-9 {
                return false;
            }
        }
    }
    true
}

fn finish(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    flow: FlowProfile,
    kind: SolverKind,
    iterations: usize,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    let result = certify(
        network,
        mechanism,
        population,
        flow,
        kind,
        iterations,
        config.eps_nash,
    )?;
    if !result.certified {
        return Err(Error::NoConvergence {
            iterations,
            gap: result.nash_gap,
        });
    }
    Ok(result)
}

/// Cost polynomial of each path as a function of its own flow (parallel only).
pub(crate) fn path_cost_polys(network: &Network, edge_costs: &[PolyLatency]) -> Vec<PolyLatency> {
    network
        .paths()
        .iter()
        .map(|path| {
            path.iter()
                .fold(PolyLatency::constant(0.0).unwrap(), |acc, &e| {
                    acc.add(&edge_costs[e])
                })
        })
        .collect()
}

fn parallel_levels(network: &Network, edge_costs: &[PolyLatency]) -> Vec<f64> {
    let polys = path_cost_polys(network, edge_costs);
    let offsets = vec![0.0; polys.len()];
    water_fill(&polys, &offsets, network.demand())
}

/// Splits `mass` over parallel paths so that every used path has the same cost
/// `poly_p(offset_p + x_p)` and no unused path is cheaper. Among flat (constant
/// cost) paths at the same level the lowest index takes the remainder.
pub(crate) fn water_fill(polys: &[PolyLatency], offsets: &[f64], mass: f64) -> Vec<f64> {
    let n = polys.len();
    let mut x = vec![0.0; n];
    if mass <= 0.0 {
        return x;
    }
    let rising: Vec<usize> = (0..n).filter(|&p| !polys[p].is_constant()).collect();
    let flat_best = (0..n)
        .filter(|&p| polys[p].is_constant())
        .map(|p| (polys[p].eval(0.0), p))
        .fold(None, |best: Option<(f64, usize)>, (c, p)| match best {
            Some((bc, _)) if bc <= c => best,
            _ => Some((c, p)),
        });

    let fill = |level: f64| -> f64 {
        rising
            .iter()
            .map(|&p| invert(&polys[p], offsets[p], level, mass))
            .sum()
    };

    if let Some((flat_cost, flat_path)) = flat_best {
        if rising.is_empty() || fill(flat_cost) < mass {
            let mut placed = 0.0;
            for &p in &rising {
                x[p] = invert(&polys[p], offsets[p], flat_cost, mass);
                placed += x[p];
            }
            x[flat_path] = (mass - placed).max(0.0);
            return x;
        }
    }

    let lo = rising
        .iter()
        .map(|&p| polys[p].eval(offsets[p]))
        .fold(f64::INFINITY, f64::min);
    let hi = rising
        .iter()
        .map(|&p| polys[p].eval(offsets[p] + mass))
        .fold(f64::NEG_INFINITY, f64::max);
    let level = bisect(lo, hi, |lvl| fill(lvl) - mass);
    for &p in &rising {
        x[p] = invert(&polys[p], offsets[p], level, mass);
    }
    normalize(&mut x, mass);
    x
}

/// Rescales nonnegative `x` so that it sums to `mass` exactly up to rounding.
pub(crate) fn normalize(x: &mut [f64], mass: f64) {
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        let k = mass / total;
        x.iter_mut().for_each(|v| *v *= k);
    }
}

/// Pairwise equalization for a homogeneous population on any network.
fn pairwise_min(
    network: &Network,
    edge_costs: &[PolyLatency],
    mut flows: Vec<f64>,
    config: &SolverConfig,
) -> Result<(Vec<f64>, usize)> {
    let mut edge_flows = super::edge_flows_from(network, std::slice::from_ref(&flows));
    let target = config.eps_nash * 1e-4;
    let mut steps = 0;
    while steps < config.max_inner {
        let moved = equalize_once(network, edge_costs, &mut flows, &mut edge_flows, 1.0);
        steps += 1;
        if !moved {
            break;
        }
        if steps % 16 == 0 {
            edge_flows = super::edge_flows_from(network, std::slice::from_ref(&flows));
            let gap = super::normalized_gap(
                network,
                &[edge_costs],
                std::slice::from_ref(&flows),
                &edge_flows,
            );
            if gap <= target {
                break;
            }
        }
    }
    if steps >= config.max_inner {
        let gap = super::normalized_gap(
            network,
            &[edge_costs],
            std::slice::from_ref(&flows),
            &edge_flows,
        );
        return Err(Error::NoConvergence {
            iterations: steps,
            gap,
        });
    }
    Ok((flows, steps))
}

/// Moves mass of one class from its costliest used path toward its cheapest
/// path so that (with `relax = 1`) the two costs become equal. Returns false
/// when the class is already at equal costs within rounding.
pub(crate) fn equalize_once(
    network: &Network,
    edge_costs: &[PolyLatency],
    class_flow: &mut [f64],
    edge_flows: &mut [f64],
    relax: f64,
) -> bool {
    let costs: Vec<f64> = network
        .paths()
        .iter()
        .map(|p| p.iter().map(|&e| edge_costs[e].eval(edge_flows[e])).sum())
        .collect();
    let mut q = 0;
    for p in 1..costs.len() {
        if costs[p] < costs[q] {
            q = p;
        }
    }
    let mut worst: Option<usize> = None;
    for p in 0..costs.len() {
        if class_flow[p] > USED_PATH_MASS && worst.is_none_or(|w| costs[p] > costs[w]) {
            worst = Some(p);
        }
    }
    let Some(p) = worst else { return false };
    if costs[p] - costs[q] <= 4.0 * f64::EPSILON * (1.0 + costs[p].abs()) {
        return false;
    }
    let only_p: Vec<usize> = network.paths()[p]
        .iter()
        .copied()
        .filter(|&e| !network.path_contains(q, e))
        .collect();
    let only_q: Vec<usize> = network.paths()[q]
        .iter()
        .copied()
        .filter(|&e| !network.path_contains(p, e))
        .collect();
    let diff = |delta: f64| -> f64 {
        let up: f64 = only_q
            .iter()
            .map(|&e| edge_costs[e].eval(edge_flows[e] + delta))
            .sum();
        let down: f64 = only_p
            .iter()
            .map(|&e| edge_costs[e].eval((edge_flows[e] - delta).max(0.0)))
            .sum();
        up - down
    };
    let cap = class_flow[p];
    let delta = if diff(cap) <= 0.0 {
        cap
    } else {
        bisect(0.0, cap, diff)
    };
    let delta = (delta * relax).min(class_flow[p]);
    if delta <= 0.0 {
        return false;
    }
    class_flow[p] -= delta;
    class_flow[q] += delta;
    for &e in &only_p {
        edge_flows[e] = (edge_flows[e] - delta).max(0.0);
    }
    for &e in &only_q {
        edge_flows[e] += delta;
    }
    true
}

pub(crate) fn check_init(network: &Network, init: &[f64]) -> Result<()> {
    if init.len() != network.num_paths() {
        return input("initial flow does not match the path count");
    }
    Ok(())
}

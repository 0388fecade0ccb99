use serde::Serialize;

use super::best_response::nash_flow_general_from;
use super::complementarity::polish;
use super::potential::{normalize, path_cost_polys, water_fill};
use super::{
    certify, class_edge_costs, edge_flows_from, normalized_gap, path_cost_decomposition,
    require_demand, EquilibriumResult, SolverConfig, SolverKind, USED_PATH_MASS,
};
use crate::error::{input, Result};
use crate::game::{FlowProfile, Network, Population};
use crate::mechanism::MechanismSpec;

const STALL_ROUNDS: usize = 20;
const MIN_RELAX: f64 = 1e-3;
const POLISH_STEPS: usize = 200;
const SWEEP_ROUNDS: usize = 30;

/// Boundary between two consecutive classes (ascending sensitivity) in a
/// parallel equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassBoundary {
    /// Lower of the two class indices; the other is `lower_class + 1`.
    pub lower_class: usize,
    /// Highest-latency path used by the lower class.
    pub lower_path: usize,
    /// Lowest-latency path used by the upper class.
    pub upper_path: usize,
    /// Effective sensitivity `beta` making a user indifferent between the two
    /// paths: `(l_up - l_low) / (l*_low - l*_up)`. None when both classes share
    /// the path or the marginal parts coincide.
    pub beta: Option<f64>,
    /// The same threshold as a sensitivity `s`.
    pub sensitivity: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelStructure {
    pub result: EquilibriumResult,
    /// Used paths in ascending latency.
    pub ordering: Vec<usize>,
    pub boundaries: Vec<ClassBoundary>,
    /// True when every threshold lies between the effective sensitivities of
    /// the classes it separates and the orderings hold within `1e-6`.
    pub consistent: bool,
}

/// Heterogeneous Nash flow on a parallel network.
///
/// Classes best-respond in turn (each one water-fills against the others'
/// flow); when that stalls, a Newton-type solve of the complementarity
/// conditions finishes from the best iterate and its sorted form. The flow is rewritten in sorted form: used paths in ascending
/// latency, filled by classes in ascending effective sensitivity. The sorted
/// form is kept whenever its gap is no larger.
pub fn nash_flow_parallel_heterogeneous(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    config: &SolverConfig,
) -> Result<ParallelStructure> {
    if !network.is_parallel() {
        return input("network is not parallel; use nash_flow_general");
    }
    if mechanism.is_fixed() {
        return input("fixed tolls need nash_flow_general");
    }
    require_demand(network, population)?;
    let betas = population
        .classes()
        .iter()
        .map(|c| mechanism.beta(c.sensitivity))
        .collect::<Result<Vec<f64>>>()?;
    let costs = class_edge_costs(network, mechanism, population)?;
    let polys: Vec<_> = costs.iter().map(|c| path_cost_polys(network, c)).collect();
    let n = network.num_paths();
    let target = config.eps_nash * 1e-4;

    // greedy start: classes in ascending beta, each filling against the rest
    let mut order: Vec<usize> = (0..betas.len()).collect();
    order.sort_by(|&a, &b| betas[a].total_cmp(&betas[b]));
    let mut flows = vec![vec![0.0; n]; betas.len()];
    let mut totals = vec![0.0; n];
    for &c in &order {
        flows[c] = water_fill(&polys[c], &totals, population.classes()[c].mass);
        for p in 0..n {
            totals[p] += flows[c][p];
        }
    }

    let mut edge_flows = edge_flows_from(network, &flows);
    let mut best_gap = normalized_gap(network, &costs, &flows, &edge_flows);
    let mut best = flows.clone();
    let mut relax = 1.0;
    let mut since_improvement = 0;
    let mut rounds = 0;
    while rounds < config.max_rounds.min(SWEEP_ROUNDS) && best_gap > target {
        rounds += 1;
        for &c in &order {
            let mass = population.classes()[c].mass;
            if mass == 0.0 {
                continue;
            }
            let totals: Vec<f64> = (0..n).map(|p| flows.iter().map(|r| r[p]).sum()).collect();
            let offsets: Vec<f64> = (0..n).map(|p| (totals[p] - flows[c][p]).max(0.0)).collect();
            let reply = water_fill(&polys[c], &offsets, mass);
            for p in 0..n {
                flows[c][p] = (1.0 - relax) * flows[c][p] + relax * reply[p];
            }
            normalize(&mut flows[c], mass);
        }
        edge_flows = edge_flows_from(network, &flows);
        let gap = normalized_gap(network, &costs, &flows, &edge_flows);
        if gap < best_gap * (1.0 - 1e-3) {
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if gap < best_gap {
            best_gap = gap;
            best.clone_from(&flows);
        }
        if since_improvement >= STALL_ROUNDS {
            if relax <= MIN_RELAX {
                break;
            }
            relax = (relax * 0.5).max(MIN_RELAX);
            since_improvement = 0;
            flows.clone_from(&best);
        }
    }

    if best_gap > target {
        let masses: Vec<f64> = population.classes().iter().map(|c| c.mass).collect();
        let sorted = sorted_form(
            network,
            population,
            &betas,
            &FlowProfile::new(network, best.clone())?,
        )?;
        for start in [best.clone(), sorted.path_flows().to_vec()] {
            let candidate = polish(&polys, &masses, &start, POLISH_STEPS);
            let candidate_edges = edge_flows_from(network, &candidate);
            let gap = normalized_gap(network, &costs, &candidate, &candidate_edges);
            if gap < best_gap {
                best_gap = gap;
                best = candidate;
            }
        }
    }

    let mut result = certify(
        network,
        mechanism,
        population,
        FlowProfile::new(network, best)?,
        SolverKind::ParallelOrdered,
        rounds,
        config.eps_nash,
    )?;
    if !result.certified {
        let polished = nash_flow_general_from(
            network,
            mechanism,
            population,
            result.flow.path_flows().to_vec(),
            config,
        )?;
        if polished.nash_gap < result.nash_gap {
            result = EquilibriumResult {
                solver: SolverKind::ParallelOrdered,
                iterations: rounds + polished.iterations,
                ..polished
            };
        }
    }

    let sorted = sorted_form(network, population, &betas, &result.flow)?;
    let sorted = certify(
        network,
        mechanism,
        population,
        sorted,
        SolverKind::ParallelOrdered,
        result.iterations,
        config.eps_nash,
    )?;
    if sorted.nash_gap <= result.nash_gap.max(sorted.tolerance * 0.5) {
        result = sorted;
    }
    Ok(structure(network, mechanism, population, &betas, result))
}

/// Path totals kept; used paths sorted by latency and filled by classes in
/// ascending beta.
fn sorted_form(
    network: &Network,
    population: &Population,
    betas: &[f64],
    flow: &FlowProfile,
) -> Result<FlowProfile> {
    let n = network.num_paths();
    let latencies: Vec<f64> = path_cost_decomposition(network, flow)
        .iter()
        .map(|d| d.latency)
        .collect();
    let mut paths: Vec<usize> = (0..n).collect();
    paths.sort_by(|&a, &b| latencies[a].total_cmp(&latencies[b]).then(a.cmp(&b)));
    let mut left = flow.path_totals();
    let mut order: Vec<usize> = (0..betas.len()).collect();
    order.sort_by(|&a, &b| betas[a].total_cmp(&betas[b]).then(a.cmp(&b)));
    let mut rows = vec![vec![0.0; n]; betas.len()];
    let mut cursor = 0;
    for &c in &order {
        let mut need = population.classes()[c].mass;
        while need > 0.0 && cursor < n {
            let p = paths[cursor];
            let take = need.min(left[p]);
            rows[c][p] += take;
            left[p] -= take;
            need -= take;
            if left[p] <= 1e-15 * (1.0 + take) {
                cursor += 1;
            }
        }
        // rounding residue goes to the last path touched
        if need > 0.0 {
            let p = paths[cursor.min(n - 1)];
            rows[c][p] += need;
        }
    }
    FlowProfile::new(network, rows)
}

fn structure(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    betas: &[f64],
    result: EquilibriumResult,
) -> ParallelStructure {
    let decomposition = path_cost_decomposition(network, &result.flow);
    let totals = result.flow.path_totals();
    let mut ordering: Vec<usize> = (0..totals.len())
        .filter(|&p| totals[p] > USED_PATH_MASS)
        .collect();
    ordering.sort_by(|&a, &b| {
        decomposition[a]
            .latency
            .total_cmp(&decomposition[b].latency)
            .then(a.cmp(&b))
    });

    let mut classes: Vec<usize> = (0..betas.len())
        .filter(|&c| population.classes()[c].mass > 0.0)
        .collect();
    classes.sort_by(|&a, &b| betas[a].total_cmp(&betas[b]).then(a.cmp(&b)));
    let used = |c: usize| -> Vec<usize> {
        ordering
            .iter()
            .copied()
            .filter(|&p| result.flow.class_flows(c)[p] > USED_PATH_MASS)
            .collect()
    };

    let mut consistent = ordering_violation(network, population, betas, &result.flow) <= 1e-6;
    let mut boundaries = Vec::new();
    let kappa = mechanism.kappa().unwrap_or((0.0, 0.0));
    for w in classes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (Some(&a), Some(&b)) = (used(lo).last(), used(hi).first()) else {
            continue;
        };
        let da = decomposition[a];
        let db = decomposition[b];
        let beta = if a != b && (da.marginal - db.marginal).abs() > 1e-12 {
            Some((db.latency - da.latency) / (da.marginal - db.marginal))
        } else {
            None
        };
        if let Some(t) = beta {
            let slack = 1e-6 * (1.0 + t.abs());
            if betas[lo] < betas[hi] && (t < betas[lo] - slack || t > betas[hi] + slack) {
                consistent = false;
            }
        }
        let sensitivity = beta.and_then(|t| {
            let denom = kappa.1 - t * kappa.0;
            (kappa.1 > 0.0 && denom > 0.0).then(|| t / denom)
        });
        boundaries.push(ClassBoundary {
            lower_class: lo,
            lower_path: a,
            upper_path: b,
            beta,
            sensitivity,
        });
    }
    ParallelStructure {
        result,
        ordering,
        boundaries,
        consistent,
    }
}

/// Largest violation of the sensitivity orderings: for classes `x`, `y` with
/// `beta_x < beta_y`, every path `i` used by `x` and `j` used by `y` should have
/// `l_i <= l_j` and `l^mc_i >= l^mc_j`.
pub fn ordering_violation(
    network: &Network,
    population: &Population,
    betas: &[f64],
    flow: &FlowProfile,
) -> f64 {
    let decomposition = path_cost_decomposition(network, flow);
    let mut worst: f64 = 0.0;
    let classes = population.classes();
    for x in 0..classes.len() {
        for y in 0..classes.len() {
            if !(betas[x] < betas[y]) {
                continue;
            }
            for i in 0..network.num_paths() {
                if flow.class_flows(x)[i] <= USED_PATH_MASS {
                    continue;
                }
                for j in 0..network.num_paths() {
                    if flow.class_flows(y)[j] <= USED_PATH_MASS {
                        continue;
                    }
                    let (di, dj) = (decomposition[i], decomposition[j]);
                    worst = worst
                        .max(di.latency - dj.latency)
                        .max(dj.marginal_cost - di.marginal_cost);
                }
            }
        }
    }
    worst
}

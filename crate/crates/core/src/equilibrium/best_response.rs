use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::potential::equalize_once;
use super::{
    certify, class_edge_costs, edge_flows_from, normalized_gap, require_demand, EquilibriumResult,
    SolverConfig, SolverKind,
};
use crate::error::{input, Result};
use crate::game::{FlowProfile, Network, Population};
use crate::mechanism::MechanismSpec;

/// Pure starts (every class on a single path) are added to the randomized
/// restarts while there are at most this many of them.
pub const MAX_PURE_STARTS: usize = 64;

// rounds without a 0.1% gap improvement before the step is halved
const STALL_ROUNDS: usize = 50;
const MIN_RELAX: f64 = 1e-3;

/// Heterogeneous Nash flow on any network from an even split of every class.
pub fn nash_flow_general(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    let n = network.num_paths() as f64;
    let init = population
        .classes()
        .iter()
        .map(|c| vec![c.mass / n; network.num_paths()])
        .collect();
    nash_flow_general_from(network, mechanism, population, init, config)
}

/// Damped best response over classes. Each round, every class moves mass from
/// its costliest used path toward its cheapest path, a fraction `relax` of the
/// way to equal cost. `relax` starts at 1 and halves whenever the gap stalls.
///
/// Returns the smallest-gap flow seen. An uncertified result is not an error;
/// check `certified`.
pub fn nash_flow_general_from(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    init: Vec<Vec<f64>>,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    require_demand(network, population)?;
    let start = FlowProfile::new(network, init)?;
    start.check_feasible(network, population)?;
    let costs = class_edge_costs(network, mechanism, population)?;
    let mut flows = start.path_flows().to_vec();
    let mut edge_flows = edge_flows_from(network, &flows);
    let target = config.eps_nash * 1e-4;

    let mut best_gap = normalized_gap(network, &costs, &flows, &edge_flows);
    let mut best = flows.clone();
    let mut relax = 1.0;
    let mut since_improvement = 0;
    let mut rounds = 0;
    while rounds < config.max_rounds && best_gap > target {
        rounds += 1;
        for (c, class_costs) in costs.iter().enumerate() {
            if population.classes()[c].mass == 0.0 {
                continue;
            }
            for _ in 0..network.num_paths() {
                if !equalize_once(network, class_costs, &mut flows[c], &mut edge_flows, relax) {
                    break;
                }
            }
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
            // restart from the best point with the smaller step
            flows.clone_from(&best);
            edge_flows = edge_flows_from(network, &flows);
        }
    }
    for (c, class) in population.classes().iter().enumerate() {
        super::potential::normalize(&mut best[c], class.mass);
    }
    let flow = FlowProfile::new(network, best)?;
    certify(
        network,
        mechanism,
        population,
        flow,
        SolverKind::BestResponse,
        rounds,
        config.eps_nash,
    )
}

/// All equilibria found by [`nash_flows_multistart`], sorted by total latency
/// and then lexicographically by flow.
#[derive(Debug, Clone, Serialize)]
pub struct NashSearch {
    pub results: Vec<EquilibriumResult>,
}

impl NashSearch {
    pub fn certified(&self) -> impl Iterator<Item = &EquilibriumResult> {
        self.results.iter().filter(|r| r.certified)
    }

    /// Largest-latency certified equilibrium; the smallest-gap result when
    /// nothing was certified.
    pub fn worst(&self) -> &EquilibriumResult {
        self.certified().last().unwrap_or_else(|| {
            self.results
                .iter()
                .min_by(|a, b| a.nash_gap.total_cmp(&b.nash_gap))
                .expect("at least one start")
        })
    }

    pub fn best(&self) -> Option<&EquilibriumResult> {
        self.certified().next()
    }
}

/// Runs [`nash_flow_general_from`] from every pure start (when there are at
/// most [`MAX_PURE_STARTS`]) plus `config.restarts` seeded random starts.
pub fn nash_flows_multistart(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    config: &SolverConfig,
) -> Result<NashSearch> {
    require_demand(network, population)?;
    let starts = starting_points(network, population, config);
    if starts.is_empty() {
        return input("no starting points");
    }
    let mut results = starts
        .into_par_iter()
        .map(|init| nash_flow_general_from(network, mechanism, population, init, config))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        a.total_latency
            .total_cmp(&b.total_latency)
            .then_with(|| cmp_flows(a.flow.path_flows(), b.flow.path_flows()))
    });
    Ok(NashSearch { results })
}

fn cmp_flows(a: &[Vec<f64>], b: &[Vec<f64>]) -> std::cmp::Ordering {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn starting_points(
    network: &Network,
    population: &Population,
    config: &SolverConfig,
) -> Vec<Vec<Vec<f64>>> {
    let n = network.num_paths();
    let classes = population.classes();
    let mut starts = Vec::new();
    let pure_count = (n as f64).powi(classes.len() as i32);
    if pure_count <= MAX_PURE_STARTS as f64 {
        for code in 0..pure_count as usize {
            let mut rest = code;
            let init = classes
                .iter()
                .map(|c| {
                    let mut row = vec![0.0; n];
                    row[rest % n] = c.mass;
                    rest /= n;
                    row
                })
                .collect();
            starts.push(init);
        }
    }
    for i in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(i as u64));
        let init = classes
            .iter()
            .map(|c| {
                let mut row: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                super::potential::normalize(&mut row, c.mass);
                row
            })
            .collect();
        starts.push(init);
    }
    starts
}

//! Optimal and Nash flows, with gap-based certification.
//!
//! Every solver works on normalized per-class edge costs `l + beta f l'`
//! (or `l + s q` for fixed tolls). Certification recomputes the Nash gap from
//! the true user costs `l + s tau` through [`crate::game::user_cost`], which
//! shares no code with the solvers.

mod best_response;
mod complementarity;
mod oracle;
mod parallel;
mod potential;
pub(crate) mod roots;

use serde::Serialize;

pub use best_response::{
    nash_flow_general, nash_flow_general_from, nash_flows_multistart, NashSearch,
};
pub use oracle::{oracle_nash_flows, oracle_threshold, ORACLE_MAX_POINTS};
pub use parallel::{
    nash_flow_parallel_heterogeneous, ordering_violation, ClassBoundary, ParallelStructure,
};
pub use potential::{
    nash_flow_homogeneous, nash_flow_homogeneous_from, optimal_flow, optimality_certificate,
};

use crate::error::{input, Result};
use crate::game::{self, FlowProfile, Network, Population};
use crate::mechanism::{derive_tolls, normalized_edge_costs, MechanismSpec};

/// Paths carrying less than this mass count as unused in gap computations.
pub const USED_PATH_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    PotentialMin,
    ParallelOrdered,
    BestResponse,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative Nash-gap tolerance; a flow is certified when its gap is at most
    /// `eps_nash * (1 + min class cost)`.
    pub eps_nash: f64,
    /// Inner-step budget of the potential-minimization solvers.
    pub max_inner: usize,
    /// Round budget of the heterogeneous best-response solvers.
    pub max_rounds: usize,
    /// Randomized restarts used when equilibria may be non-unique.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_nash: 1e-7,
            max_inner: 1_000_000,
            max_rounds: 100_000,
            restarts: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub flow: FlowProfile,
    pub nash_gap: f64,
    pub total_latency: f64,
    pub solver: SolverKind,
    pub iterations: usize,
    pub certified: bool,
    /// Gap threshold the certification used.
    pub tolerance: f64,
}

/// Latency, marginal part `sum f_e l'_e(f_e)` and marginal cost of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathCostDecomposition {
    pub latency: f64,
    pub marginal: f64,
    pub marginal_cost: f64,
}

pub fn path_cost_decomposition(
    network: &Network,
    flow: &FlowProfile,
) -> Vec<PathCostDecomposition> {
    network
        .paths()
        .iter()
        .map(|path| {
            let (latency, marginal) = path.iter().fold((0.0, 0.0), |(l, m), &e| {
                let fe = flow.edge_flow(e);
                let lat = network.latency(e);
                (l + lat.eval(fe), m + lat.marginal_part(fe))
            });
            PathCostDecomposition {
                latency,
                marginal,
                marginal_cost: latency + marginal,
            }
        })
        .collect()
}

/// Per-class path costs `J_c(p; f)` from the true (unnormalized) user costs.
pub fn class_path_costs(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    flow: &FlowProfile,
) -> Result<Vec<Vec<f64>>> {
    let tolls = derive_tolls(mechanism, network)?;
    population
        .classes()
        .iter()
        .map(|class| {
            (0..network.num_paths())
                .map(|p| game::user_cost(network, &tolls, class.sensitivity, flow, p))
                .collect()
        })
        .collect()
}

/// Largest excess of a used path's cost over the cheapest path, across classes.
/// Zero exactly at Nash flows.
pub fn nash_gap(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    flow: &FlowProfile,
) -> Result<f64> {
    Ok(gap_and_tolerance_scale(network, mechanism, population, flow)?.0)
}

fn gap_and_tolerance_scale(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    flow: &FlowProfile,
) -> Result<(f64, f64)> {
    flow.check_feasible(network, population)?;
    let costs = class_path_costs(network, mechanism, population, flow)?;
    let mut gap: f64 = 0.0;
    let mut min_cost = f64::INFINITY;
    for (c, row) in costs.iter().enumerate() {
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        if population.classes()[c].mass > 0.0 {
            min_cost = min_cost.min(best);
        }
        for (p, &cost) in row.iter().enumerate() {
            if flow.class_flows(c)[p] > USED_PATH_MASS {
                gap = gap.max(cost - best);
            }
        }
    }
    Ok((gap, 1.0 + min_cost.abs()))
}

/// Packages a flow as a result, recomputing its gap independently of the solver.
pub fn certify(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    flow: FlowProfile,
    solver: SolverKind,
    iterations: usize,
    eps_nash: f64,
) -> Result<EquilibriumResult> {
    let (gap, scale) = gap_and_tolerance_scale(network, mechanism, population, &flow)?;
    let tolerance = eps_nash * scale;
    Ok(EquilibriumResult {
        total_latency: game::total_latency(network, &flow),
        flow,
        nash_gap: gap,
        solver,
        iterations,
        certified: gap <= tolerance,
        tolerance,
    })
}

/// "The" Nash flow used by metrics: the unique one where the game is a
/// potential game (every class sees the same normalized costs) or the network
/// is parallel, otherwise the certified equilibrium with the largest total
/// latency among multistart runs.
pub fn nash_equilibrium(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    require_demand(network, population)?;
    if let Some(s) = shared_cost_sensitivity(mechanism, population)? {
        let single = nash_flow_homogeneous(network, mechanism, s, config)?;
        return embed_homogeneous(network, mechanism, population, single, config);
    }
    if network.is_parallel() && !mechanism.is_fixed() {
        return Ok(
            nash_flow_parallel_heterogeneous(network, mechanism, population, config)?.result,
        );
    }
    let search = nash_flows_multistart(network, mechanism, population, config)?;
    Ok(search.worst().clone())
}

/// A sensitivity whose normalized costs every positive-mass class shares, if any.
fn shared_cost_sensitivity(
    mechanism: &MechanismSpec,
    population: &Population,
) -> Result<Option<f64>> {
    let massive: Vec<f64> = population
        .classes()
        .iter()
        .filter(|c| c.mass > 0.0)
        .map(|c| c.sensitivity)
        .collect();
    let first = massive[0];
    if massive.iter().all(|&s| s == first) {
        return Ok(Some(first));
    }
    if mechanism.is_fixed() {
        return Ok(None);
    }
    let b0 = mechanism.beta(first)?;
    for &s in &massive[1..] {
        if mechanism.beta(s)? != b0 {
            return Ok(None);
        }
    }
    Ok(Some(first))
}

/// Splits a single-class result over the population's classes in proportion
/// to their masses.
fn embed_homogeneous(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    single: EquilibriumResult,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    let totals = single.flow.path_totals();
    let r = network.demand();
    let rows = population
        .classes()
        .iter()
        .map(|c| totals.iter().map(|x| x * c.mass / r).collect())
        .collect();
    certify(
        network,
        mechanism,
        population,
        FlowProfile::new(network, rows)?,
        single.solver,
        single.iterations,
        config.eps_nash,
    )
}

/// Normalized edge costs for every class.
pub(crate) fn class_edge_costs(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
) -> Result<Vec<Vec<crate::game::PolyLatency>>> {
    population
        .classes()
        .iter()
        .map(|c| normalized_edge_costs(network, mechanism, c.sensitivity))
        .collect()
}

pub(crate) fn require_demand(network: &Network, population: &Population) -> Result<()> {
    if population.num_classes() == 0 {
        return input("empty population");
    }
    population.check_demand(network)
}

/// Internal gap under normalized costs, relative to `1 + min cost`.
pub(crate) fn normalized_gap<C: AsRef<[crate::game::PolyLatency]>>(
    network: &Network,
    costs: &[C],
    class_flows: &[Vec<f64>],
    edge_flows: &[f64],
) -> f64 {
    let mut worst: f64 = 0.0;
    for (c, edge_costs) in costs.iter().enumerate() {
        let edge_costs = edge_costs.as_ref();
        let path_costs: Vec<f64> = network
            .paths()
            .iter()
            .map(|p| p.iter().map(|&e| edge_costs[e].eval(edge_flows[e])).sum())
            .collect();
        let best = path_costs.iter().copied().fold(f64::INFINITY, f64::min);
        for (p, &x) in class_flows[c].iter().enumerate() {
            if x > USED_PATH_MASS {
                worst = worst.max((path_costs[p] - best) / (1.0 + best.abs()));
            }
        }
    }
    worst
}

pub(crate) fn edge_flows_from(network: &Network, class_flows: &[Vec<f64>]) -> Vec<f64> {
    let mut edges = vec![0.0; network.num_edges()];
    for (p, path) in network.paths().iter().enumerate() {
        let total: f64 = class_flows.iter().map(|row| row[p]).sum();
        for &e in path {
            edges[e] += total;
        }
    }
    edges
}

#[cfg(test)]
mod tests;

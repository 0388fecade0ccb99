use rayon::prelude::*;

use super::{certify, EquilibriumResult, SolverKind, USED_PATH_MASS};
use crate::error::{input, Result};
use crate::game::{FlowProfile, Network, Population};
use crate::mechanism::{Mechanism, MechanismSpec};

/// Largest grid the oracle will enumerate.
pub const ORACLE_MAX_POINTS: usize = 20_000_000;
const MAX_PATHS: usize = 4;
const MAX_CLASSES: usize = 3;

/// Coefficients of the true per-class edge costs `l + s tau`. Under perverse
/// tolls these may be negative, so they are kept as raw coefficient lists.
fn class_costs(network: &Network, mechanism: &MechanismSpec, s: f64) -> Vec<Vec<f64>> {
    (0..network.num_edges())
        .map(|e| {
            let lat = network.latency(e);
            match &mechanism.mechanism {
                Mechanism::Fixed(q) => {
                    let mut coeffs = lat.coeffs().to_vec();
                    coeffs[0] += s * q[e];
                    coeffs
                }
                _ => {
                    let (k1, k2) = mechanism.kappa().unwrap_or((0.0, 0.0));
                    lat.coeffs()
                        .iter()
                        .enumerate()
                        .map(|(k, a)| a * (1.0 + s * (k1 + k2 * k as f64)))
                        .collect()
                }
            }
        })
        .collect()
}

/// Gap threshold for a grid of spacing `resolution`: twice a Lipschitz bound of
/// the path costs in the flow vector times the spacing.
pub fn oracle_threshold(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    resolution: f64,
) -> Result<f64> {
    check_size(network, population, resolution)?;
    let r = network.demand();
    let mut slope: f64 = 0.0;
    for class in population.classes() {
        let costs = class_costs(network, mechanism, class.sensitivity);
        for path in network.paths() {
            let s: f64 = path
                .iter()
                .map(|&e| {
                    costs[e]
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(k, c)| k as f64 * c.abs() * r.powi(k as i32 - 1))
                        .sum::<f64>()
                })
                .sum();
            slope = slope.max(s);
        }
    }
    let cells = (population.num_classes() * network.num_paths()) as f64;
    Ok(2.0 * cells * slope * resolution)
}

fn check_size(network: &Network, population: &Population, resolution: f64) -> Result<()> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return input("grid resolution must be positive");
    }
    if network.num_paths() > MAX_PATHS {
        return input(format!("oracle needs at most {MAX_PATHS} paths"));
    }
    if population.num_classes() > MAX_CLASSES {
        return input(format!("oracle needs at most {MAX_CLASSES} classes"));
    }
    Ok(())
}

/// All compositions of `units` into `parts` nonnegative integers.
fn compositions(units: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![units]];
    }
    let mut out = Vec::new();
    for first in 0..=units {
        for mut rest in compositions(units - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive search over per-class path-flow grids with spacing `resolution`.
/// Returns every grid point whose Nash gap is within [`oracle_threshold`],
/// sorted by total latency and then lexicographically by flow.
pub fn oracle_nash_flows(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    resolution: f64,
) -> Result<Vec<EquilibriumResult>> {
    check_size(network, population, resolution)?;
    population.check_demand(network)?;
    let n = network.num_paths();
    let mut units = Vec::new();
    let mut count = 1.0;
    for class in population.classes() {
        let k = (class.mass / resolution).round();
        if (k * resolution - class.mass).abs() > 1e-9 * (1.0 + class.mass) {
            return input(format!(
                "class mass {} is not a multiple of the grid resolution",
                class.mass
            ));
        }
        count *= binomial(k as usize + n - 1, n - 1);
        units.push(k as usize);
    }
    if count > ORACLE_MAX_POINTS as f64 {
        return input(format!(
            "oracle grid has {count:.0} points, limit {ORACLE_MAX_POINTS}"
        ));
    }
    let threshold = oracle_threshold(network, mechanism, population, resolution)?;
    let grids: Vec<Vec<Vec<usize>>> = units.iter().map(|&k| compositions(k, n)).collect();
    let costs: Vec<Vec<Vec<f64>>> = population
        .classes()
        .iter()
        .map(|c| class_costs(network, mechanism, c.sensitivity))
        .collect();
    let total = count as usize;

    let hits: Vec<Vec<Vec<f64>>> = (0..total)
        .into_par_iter()
        .filter_map(|index| {
            let mut rest = index;
            let rows: Vec<Vec<f64>> = grids
                .iter()
                .map(|g| {
                    let row = &g[rest % g.len()];
                    rest /= g.len();
                    row.iter().map(|&u| u as f64 * resolution).collect()
                })
                .collect();
            (grid_gap(network, &costs, &rows) <= threshold).then_some(rows)
        })
        .collect();

    let mut results = hits
        .into_iter()
        .map(|rows| {
            let mut result = certify(
                network,
                mechanism,
                population,
                FlowProfile::new(network, rows)?,
                SolverKind::Oracle,
                total,
                0.0,
            )?;
            result.tolerance = threshold;
            result.certified = result.nash_gap <= threshold;
            Ok(result)
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        a.total_latency.total_cmp(&b.total_latency).then_with(|| {
            a.flow
                .path_flows()
                .iter()
                .flatten()
                .zip(b.flow.path_flows().iter().flatten())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(results)
}

fn grid_gap(network: &Network, costs: &[Vec<Vec<f64>>], rows: &[Vec<f64>]) -> f64 {
    let mut edge_flows = vec![0.0; network.num_edges()];
    for (p, path) in network.paths().iter().enumerate() {
        let x: f64 = rows.iter().map(|r| r[p]).sum();
        for &e in path {
            edge_flows[e] += x;
        }
    }
    let mut gap: f64 = 0.0;
    for (c, row) in rows.iter().enumerate() {
        let path_costs: Vec<f64> = network
            .paths()
            .iter()
            .map(|path| {
                path.iter()
                    .map(|&e| eval(&costs[c][e], edge_flows[e]))
                    .sum()
            })
            .collect();
        let best = path_costs.iter().copied().fold(f64::INFINITY, f64::min);
        for (p, &x) in row.iter().enumerate() {
            if x > USED_PATH_MASS {
                gap = gap.max(path_costs[p] - best);
            }
        }
    }
    gap
}

fn eval(coeffs: &[f64], f: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * f + a)
}

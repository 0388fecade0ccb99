use serde::Serialize;

use super::{Network, Population};
use crate::error::{input, Result};

/// Absolute slack allowed when checking that class flows add up to class masses.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Per-class path flows together with the aggregate edge flows they induce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowProfile {
    path_flows: Vec<Vec<f64>>,
    edge_flows: Vec<f64>,
}

impl FlowProfile {
    /// `path_flows[c][p]` is the mass of class `c` on path `p`.
    pub fn new(network: &Network, path_flows: Vec<Vec<f64>>) -> Result<Self> {
        for (c, row) in path_flows.iter().enumerate() {
            if row.len() != network.num_paths() {
                return input(format!(
                    "path_flows[{c}]: expected {} entries, got {}",
                    network.num_paths(),
                    row.len()
                ));
            }
            if let Some(p) = row.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
                return input(format!(
                    "path_flows[{c}][{p}]: {} is not a nonnegative mass",
                    row[p]
                ));
            }
        }
        let edge_flows = edge_flows_of(network, &path_flows);
        Ok(Self {
            path_flows,
            edge_flows,
        })
    }

    /// Aggregate path flows as a single-class profile.
    pub fn aggregate(network: &Network, path_totals: Vec<f64>) -> Result<Self> {
        Self::new(network, vec![path_totals])
    }

    pub fn path_flows(&self) -> &[Vec<f64>] {
        &self.path_flows
    }

    pub fn class_flows(&self, class: usize) -> &[f64] {
        &self.path_flows[class]
    }

    pub fn num_classes(&self) -> usize {
        self.path_flows.len()
    }

    pub fn edge_flows(&self) -> &[f64] {
        &self.edge_flows
    }

    pub fn edge_flow(&self, e: usize) -> f64 {
        self.edge_flows[e]
    }

    /// `f_p` summed over classes.
    pub fn path_totals(&self) -> Vec<f64> {
        path_totals_of(&self.path_flows)
    }

    /// Recomputes edge flows from the path flows.
    pub fn recompute_edge_flows(&self, network: &Network) -> Vec<f64> {
        edge_flows_of(network, &self.path_flows)
    }

    /// Checks class count and per-class mass conservation against `population`.
    pub fn check_feasible(&self, network: &Network, population: &Population) -> Result<()> {
        if self.path_flows.len() != population.num_classes() {
            return input(format!(
                "flow has {} classes, population has {}",
                self.path_flows.len(),
                population.num_classes()
            ));
        }
        for (c, class) in population.classes().iter().enumerate() {
            let total: f64 = self.path_flows[c].iter().sum();
            if (total - class.mass).abs() > FEASIBILITY_TOL * (1.0 + class.mass) {
                return input(format!(
                    "class {c} routes {total} but has mass {}",
                    class.mass
                ));
            }
        }
        if self
            .path_flows
            .iter()
            .any(|row| row.len() != network.num_paths())
        {
            return input("flow does not match the network's path count");
        }
        Ok(())
    }

    /// Checks that total routed mass equals the network demand.
    pub fn check_demand(&self, network: &Network) -> Result<()> {
        let total: f64 = self.path_totals().iter().sum();
        let r = network.demand();
        if (total - r).abs() > FEASIBILITY_TOL * (1.0 + r) {
            return input(format!("flow routes {total} but demand is {r}"));
        }
        Ok(())
    }
}

fn path_totals_of(path_flows: &[Vec<f64>]) -> Vec<f64> {
    let n = path_flows.first().map_or(0, Vec::len);
    (0..n)
        .map(|p| path_flows.iter().map(|row| row[p]).sum())
        .collect()
}

fn edge_flows_of(network: &Network, path_flows: &[Vec<f64>]) -> Vec<f64> {
    let totals = path_totals_of(path_flows);
    let mut edges = vec![0.0; network.num_edges()];
    for (p, path) in network.paths().iter().enumerate() {
        if totals.is_empty() {
            break;
        }
        for &e in path {
            edges[e] += totals[p];
        }
    }
    edges
}

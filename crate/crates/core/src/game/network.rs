use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::PolyLatency;
use crate::error::{input, Result};

/// Upper limit on enumerated source-sink paths.
pub const MAX_PATHS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub latency: PolyLatency,
}

/// Single-commodity routing problem: a directed graph with per-edge latencies,
/// a source, a sink, a traffic demand and the full set of simple source-sink paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    source: usize,
    sink: usize,
    demand: f64,
    paths: Vec<Vec<usize>>,
    // incidence[p][e]
    incidence: Vec<Vec<bool>>,
    parallel: bool,
}

/// One edge as it appears in the JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub tail: String,
    pub head: String,
    pub coeffs: Vec<f64>,
}

/// JSON form of a [`Network`].
///
/// `paths` is optional. When present it must list every simple source-sink path
/// exactly once (as edge indices) and fixes the path numbering.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    pub source: String,
    pub sink: String,
    pub demand: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<Vec<usize>>>,
}

impl Network {
    /// Builds a network from `(tail, head, latency)` triples over vertex names.
    /// Paths are enumerated depth-first, following outgoing edges in index order.
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<(String, String, PolyLatency)>,
        source: &str,
        sink: &str,
        demand: f64,
    ) -> Result<Self> {
        let index: HashMap<&str, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        if index.len() != vertices.len() {
            return input("vertices: duplicate vertex id");
        }
        let lookup = |name: &str, field: &str| -> Result<usize> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| crate::Error::Input(format!("{field}: unknown vertex `{name}`")))
        };
        let source = lookup(source, "source")?;
        let sink = lookup(sink, "sink")?;
        if source == sink {
            return input("source and sink must differ");
        }
        if !(demand > 0.0) || !demand.is_finite() {
            return input(format!("demand: must be positive and finite, got {demand}"));
        }
        let mut built = Vec::with_capacity(edges.len());
        for (i, (tail, head, latency)) in edges.into_iter().enumerate() {
            let tail = lookup(&tail, &format!("edges[{i}].tail"))?;
            let head = lookup(&head, &format!("edges[{i}].head"))?;
            if tail == head {
                return input(format!("edges[{i}]: self-loop"));
            }
            built.push(Edge {
                tail,
                head,
                latency,
            });
        }
        let paths = enumerate_paths(vertices.len(), &built, source, sink)?;
        if paths.is_empty() {
            return input("no path from source to sink");
        }
        Ok(Self::assemble(vertices, built, source, sink, demand, paths))
    }

    /// Parallel links from `"s"` to `"t"`, one edge per link.
    pub fn parallel_links(latencies: Vec<PolyLatency>, demand: f64) -> Result<Self> {
        let edges = latencies
            .into_iter()
            .map(|l| ("s".to_string(), "t".to_string(), l))
            .collect();
        Self::new(vec!["s".into(), "t".into()], edges, "s", "t", demand)
    }

    fn assemble(
        vertices: Vec<String>,
        edges: Vec<Edge>,
        source: usize,
        sink: usize,
        demand: f64,
        paths: Vec<Vec<usize>>,
    ) -> Self {
        let incidence: Vec<Vec<bool>> = paths
            .iter()
            .map(|p| {
                let mut row = vec![false; edges.len()];
                for &e in p {
                    row[e] = true;
                }
                row
            })
            .collect();
        let parallel = (0..paths.len())
            .all(|i| (i + 1..paths.len()).all(|j| paths[i].iter().all(|&e| !incidence[j][e])));
        Self {
            vertices,
            edges,
            source,
            sink,
            demand,
            paths,
            incidence,
            parallel,
        }
    }

    /// Renumbers paths. `order` must contain every enumerated path exactly once
    /// (edge order inside a path is irrelevant).
    pub fn with_path_order(self, order: Vec<Vec<usize>>) -> Result<Self> {
        let key = |p: &[usize]| p.iter().copied().collect::<BTreeSet<_>>();
        let known: BTreeSet<BTreeSet<usize>> = self.paths.iter().map(|p| key(p)).collect();
        let given: BTreeSet<BTreeSet<usize>> = order.iter().map(|p| key(p)).collect();
        if order.len() != self.paths.len() || given != known {
            return input("paths: must list every simple source-sink path exactly once");
        }
        // keep traversal order of edges inside each path
        let by_key: HashMap<BTreeSet<usize>, Vec<usize>> =
            self.paths.iter().map(|p| (key(p), p.clone())).collect();
        let paths = order.iter().map(|p| by_key[&key(p)].clone()).collect();
        Ok(Self::assemble(
            self.vertices,
            self.edges,
            self.source,
            self.sink,
            self.demand,
            paths,
        ))
    }

    /// Same network with a different demand.
    pub fn with_demand(&self, demand: f64) -> Result<Self> {
        if !(demand > 0.0) || !demand.is_finite() {
            return input(format!("demand: must be positive and finite, got {demand}"));
        }
        let mut n = self.clone();
        n.demand = demand;
        Ok(n)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn latency(&self, edge: usize) -> &PolyLatency {
        &self.edges[edge].latency
    }

    pub fn source(&self) -> &str {
        &self.vertices[self.source]
    }

    pub fn sink(&self) -> &str {
        &self.vertices[self.sink]
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn path(&self, p: usize) -> Result<&[usize]> {
        match self.paths.get(p) {
            Some(path) => Ok(path),
            None => input(format!(
                "unknown path id {p} (network has {})",
                self.paths.len()
            )),
        }
    }

    pub fn path_contains(&self, p: usize, e: usize) -> bool {
        self.incidence[p][e]
    }

    /// All source-sink paths pairwise edge-disjoint.
    pub fn is_parallel(&self) -> bool {
        self.parallel
    }

    /// Sum of the latencies along path `p` as a single polynomial in the path
    /// flow. Only meaningful for parallel networks, where edge flow equals path flow.
    pub fn path_latency_poly(&self, p: usize) -> PolyLatency {
        self.paths[p]
            .iter()
            .fold(PolyLatency::constant(0.0).unwrap(), |acc, &e| {
                acc.add(&self.edges[e].latency)
            })
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    tail: self.vertices[e.tail].clone(),
                    head: self.vertices[e.head].clone(),
                    coeffs: e.latency.coeffs().to_vec(),
                })
                .collect(),
            source: self.source().to_string(),
            sink: self.sink().to_string(),
            demand: self.demand,
            paths: Some(self.paths.clone()),
        }
    }

    pub fn from_spec(spec: NetworkSpec) -> Result<Self> {
        let mut edges = Vec::with_capacity(spec.edges.len());
        for (i, e) in spec.edges.into_iter().enumerate() {
            let latency = PolyLatency::new(e.coeffs)
                .map_err(|err| crate::Error::Input(format!("edges[{i}].coeffs: {err}")))?;
            edges.push((e.tail, e.head, latency));
        }
        let net = Self::new(spec.vertices, edges, &spec.source, &spec.sink, spec.demand)?;
        match spec.paths {
            Some(order) => net.with_path_order(order),
            None => Ok(net),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec =
            serde_json::from_str(text).map_err(|e| crate::Error::Input(format!("network: {e}")))?;
        Self::from_spec(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("network spec serializes")
    }
}

fn enumerate_paths(
    n: usize,
    edges: &[Edge],
    source: usize,
    sink: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut out_edges = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        out_edges[e.tail].push(i);
    }
    let mut paths = Vec::new();
    let mut visited = vec![false; n];
    let mut stack = Vec::new();
    visited[source] = true;
    dfs(
        source,
        sink,
        edges,
        &out_edges,
        &mut visited,
        &mut stack,
        &mut paths,
    )?;
    Ok(paths)
}

fn dfs(
    v: usize,
    sink: usize,
    edges: &[Edge],
    out_edges: &[Vec<usize>],
    visited: &mut [bool],
    stack: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
) -> Result<()> {
    for &e in &out_edges[v] {
        let w = edges[e].head;
        if visited[w] {
            continue;
        }
        stack.push(e);
        if w == sink {
            if paths.len() == MAX_PATHS {
                return input(format!(
                    "network has more than {MAX_PATHS} source-sink paths"
                ));
            }
            paths.push(stack.clone());
        } else {
            visited[w] = true;
            dfs(w, sink, edges, out_edges, visited, stack, paths)?;
            visited[w] = false;
        }
        stack.pop();
    }
    Ok(())
}

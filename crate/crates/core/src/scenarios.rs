//! Builders for the worked examples and proof gadgets, the population shift,
//! and seeded random corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::game::{
    Network, NetworkSpec, PolyLatency, Population, PopulationSpec, SensitivityBounds,
    SensitivityClass,
};
use crate::mechanism::MechanismSpec;
use crate::metrics::{poa_from_beta, worst_pigou_alpha};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Stated in the source material.
    Published,
    /// Follows immediately from the definitions.
    Trivial,
    /// Computed independently (formula instance or brute force).
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpectedValue {
    Scalar(f64),
    Flow(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub name: String,
    pub value: ExpectedValue,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub network: Network,
    pub population: Population,
    pub mechanism: MechanismSpec,
    pub expected: Vec<Expected>,
}

#[derive(Serialize)]
struct ScenarioExport<'a> {
    id: &'a str,
    network: NetworkSpec,
    population: PopulationSpec,
    mechanism: &'a MechanismSpec,
    expected: &'a [Expected],
}

impl Scenario {
    fn new(
        id: impl Into<String>,
        network: Network,
        population: Population,
        mechanism: MechanismSpec,
    ) -> Self {
        Self {
            id: id.into(),
            network,
            population,
            mechanism,
            expected: Vec::new(),
        }
    }

    fn expect(mut self, name: &str, value: ExpectedValue, origin: Origin) -> Self {
        self.expected.push(Expected {
            name: name.to_string(),
            value,
            origin,
        });
        self
    }

    fn scalar(self, name: &str, v: f64, origin: Origin) -> Self {
        self.expect(name, ExpectedValue::Scalar(v), origin)
    }

    fn flow(self, name: &str, v: Vec<f64>, origin: Origin) -> Self {
        self.expect(name, ExpectedValue::Flow(v), origin)
    }

    pub fn expected_scalar(&self, name: &str) -> Option<f64> {
        self.expected
            .iter()
            .find_map(|e| match (&e.value, e.name == name) {
                (ExpectedValue::Scalar(v), true) => Some(*v),
                _ => None,
            })
    }

    pub fn expected_flow(&self, name: &str) -> Option<&[f64]> {
        self.expected
            .iter()
            .find_map(|e| match (&e.value, e.name == name) {
                (ExpectedValue::Flow(v), true) => Some(v.as_slice()),
                _ => None,
            })
    }

    pub fn to_json(&self) -> String {
        let export = ScenarioExport {
            id: &self.id,
            network: self.network.to_spec(),
            population: self.population.to_spec(),
            mechanism: &self.mechanism,
            expected: &self.expected,
        };
        serde_json::to_string_pretty(&export).expect("scenario serializes")
    }
}

fn class(mass: f64, sensitivity: f64) -> SensitivityClass {
    SensitivityClass { mass, sensitivity }
}

/// Braess network plus a direct edge, demand 2. Paths in order
/// `{e1,e5,e4}`, `{e1,e3}`, `{e2,e4}`, `{e6}`.
fn braess_with_bypass(middle: f64, bypass: f64) -> Result<Network> {
    let v = |s: &str| s.to_string();
    let edges = vec![
        (v("s"), v("a"), PolyLatency::linear()),
        (v("s"), v("b"), PolyLatency::constant(middle)?),
        (v("a"), v("t"), PolyLatency::constant(middle)?),
        (v("b"), v("t"), PolyLatency::linear()),
        (v("a"), v("b"), PolyLatency::constant(0.0)?),
        (v("s"), v("t"), PolyLatency::constant(bypass)?),
    ];
    Network::new(vec![v("s"), v("a"), v("b"), v("t")], edges, "s", "t", 2.0)?.with_path_order(vec![
        vec![0, 4, 3],
        vec![0, 2],
        vec![1, 3],
        vec![5],
    ])
}

/// Braess network with a constant bypass under marginal-cost tolls; one unit
/// of insensitive and one unit of unit-sensitivity traffic.
pub fn build_example1() -> Scenario {
    build_example1_heterogeneous(0.0).expect("fixed example")
}

/// Example 1 with the insensitive class replaced by sensitivity `s1 < 1`.
/// Expected latencies are recorded only for `s1 = 0`.
pub fn build_example1_heterogeneous(s1: f64) -> Result<Scenario> {
    if !(0.0..1.0).contains(&s1) {
        return input(format!("s1 must lie in [0, 1), got {s1}"));
    }
    let network = braess_with_bypass(1.0, 3.0)?;
    let population = Population::with_insensitive(
        vec![class(1.0, s1), class(1.0, 1.0)],
        SensitivityBounds::new(0.0, 1.0)?,
    )?;
    let id = if s1 == 0.0 {
        "example1-hetero".to_string()
    } else {
        format!("example1-hetero-s1-{s1}")
    };
    let scenario = Scenario::new(id, network, population, MechanismSpec::marginal_cost());
    if s1 > 0.0 {
        return Ok(scenario);
    }
    Ok(scenario
        .scalar("untolled_latency", 4.0, Origin::Published)
        .scalar("tolled_latency", 5.0, Origin::Published)
        .flow(
            "tolled_path_flows",
            vec![1.0, 0.0, 0.0, 1.0],
            Origin::Published,
        )
        .scalar("optimal_latency", 4.0, Origin::Published)
        .scalar("pi", 1.25, Origin::Published)
        .scalar("poa", 1.25, Origin::Published))
}

/// Example 1 with a homogeneous population of sensitivity `s` in `[0, 1]`.
pub fn build_example1_homogeneous(s: f64) -> Result<Scenario> {
    if !(0.0..=1.0).contains(&s) {
        return input(format!("s must lie in [0, 1], got {s}"));
    }
    let network = braess_with_bypass(1.0, 3.0)?;
    let population = Population::homogeneous(2.0, s)?;
    Ok(Scenario::new(
        format!("example1-homogeneous-s{s}"),
        network,
        population,
        MechanismSpec::marginal_cost(),
    )
    .scalar("untolled_latency", 4.0, Origin::Published)
    .scalar("tolled_latency", 4.0, Origin::Published)
    .flow(
        "tolled_path_flows",
        vec![0.0, 1.0, 1.0, 0.0],
        Origin::Published,
    )
    .scalar("optimal_latency", 4.0, Origin::Published))
}

/// `gamma2 = S_U kappa2 / (1 + S_U kappa1)`.
pub fn theorem1_gamma(kappa1: f64, kappa2: f64, s_upper: f64) -> f64 {
    s_upper * kappa2 / (1.0 + s_upper * kappa1)
}

/// Perversity construction for `T(kappa1, kappa2)` with `kappa2 > 0`: the
/// Example 1 topology with `l_e2 = l_e3 = 1 + g/8`, `l_e6 = 2 + g`, one unit
/// of traffic at `S_U` and one at the sensitivity whose marginal weight is `g/8`.
pub fn build_theorem1_construction(kappa1: f64, kappa2: f64, s_upper: f64) -> Result<Scenario> {
    if !(kappa2 > 0.0) || !kappa2.is_finite() {
        return input(format!("kappa2 must be positive, got {kappa2}"));
    }
    if !(s_upper > 0.0) || !s_upper.is_finite() {
        return input(format!("S_U must be positive and finite, got {s_upper}"));
    }
    if !(1.0 + s_upper * kappa1 > 0.0) || !kappa1.is_finite() {
        return input(format!("kappa1 must exceed -1/S_U, got {kappa1}"));
    }
    let g = theorem1_gamma(kappa1, kappa2, s_upper);
    if g > 8.0 {
        return input(format!(
            "gamma2 = {g} exceeds 8; the middle edges would go unused"
        ));
    }
    let s1 = g / (8.0 * kappa2 - g * kappa1);
    let network = braess_with_bypass(1.0 + g / 8.0, 2.0 + g)?;
    let population = Population::new(
        vec![class(1.0, s1), class(1.0, s_upper)],
        SensitivityBounds::new(s1.min(s_upper), s_upper)?,
    )?;
    let mechanism = MechanismSpec::generalized(kappa1, kappa2)?;
    let mut id = format!("thm1-k{kappa1}-{kappa2}");
    if s_upper != 1.0 {
        id.push_str(&format!("-su{s_upper}"));
    }
    Ok(Scenario::new(id, network, population, mechanism)
        .scalar("gamma2", g, Origin::Derived)
        .scalar("s1", s1, Origin::Derived)
        .flow(
            "tolled_path_flows",
            vec![1.0, 0.0, 0.0, 1.0],
            Origin::Published,
        )
        .scalar("tolled_latency", 4.0 + g, Origin::Published)
        .flow(
            "untolled_path_flows",
            vec![g / 4.0, 1.0 - g / 8.0, 1.0 - g / 8.0, 0.0],
            Origin::Published,
        )
        .scalar("untolled_latency", 4.0 + g / 2.0, Origin::Published)
        .scalar("pi", (4.0 + g) / (4.0 + g / 2.0), Origin::Published))
}

/// The four gadget networks used to pin down the shape of non-perverse tolls.
#[derive(Debug, Clone, PartialEq)]
pub enum Figure3 {
    /// Two edges in series against one edge with `l3 = l1 + l2`.
    SeriesPair {
        l1: PolyLatency,
        l2: PolyLatency,
        demand: f64,
    },
    /// Series pair `b`, `eps` against a single edge `b`.
    SeriesConstant { b: f64, eps: f64, demand: f64 },
    /// `alpha f^d` in parallel with `lambda alpha f^d`. Without a demand,
    /// uses `alpha^(1/d) + (lambda alpha)^(1/d)`.
    MonomialPair {
        alpha: f64,
        lambda: f64,
        d: u32,
        demand: Option<f64>,
    },
    /// `alpha f^d` in parallel with the constant 1.
    MonomialConstant { alpha: f64, d: u32, demand: f64 },
    /// `l1` against `beta f^d`, with `beta = l1(f1)` and
    /// `d = f1 l1'(f1) / l1(f1)` (must be an integer); demand `f1 + 1`.
    Matched { l1: PolyLatency, f1: f64 },
}

fn homogeneous_gadget(id: String, network: Network) -> Result<Scenario> {
    let population = Population::homogeneous(network.demand(), 1.0)?;
    Ok(Scenario::new(
        id,
        network,
        population,
        MechanismSpec::zero(),
    ))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return input(format!("{name} must be positive, got {v}"));
    }
    Ok(())
}

pub fn build_figure3(kind: Figure3) -> Result<Scenario> {
    let v = |s: &str| s.to_string();
    match kind {
        Figure3::SeriesPair { l1, l2, demand } => {
            positive("demand", demand)?;
            let l3 = l1.add(&l2);
            if l3.is_constant() {
                return input("l1 + l2 must be nonconstant");
            }
            let edges = vec![
                (v("s"), v("m"), l1),
                (v("m"), v("t"), l2),
                (v("s"), v("t"), l3),
            ];
            let net = Network::new(vec![v("s"), v("m"), v("t")], edges, "s", "t", demand)?
                .with_path_order(vec![vec![0, 1], vec![2]])?;
            let half = vec![demand / 2.0; 2];
            Ok(homogeneous_gadget(format!("fig3a-r{demand}"), net)?
                .flow("untolled_path_flows", half.clone(), Origin::Published)
                .flow("optimal_path_flows", half, Origin::Published))
        }
        Figure3::SeriesConstant { b, eps, demand } => {
            positive("b", b)?;
            positive("eps", eps)?;
            positive("demand", demand)?;
            let edges = vec![
                (v("s"), v("m"), PolyLatency::constant(b)?),
                (v("m"), v("t"), PolyLatency::constant(eps)?),
                (v("s"), v("t"), PolyLatency::constant(b)?),
            ];
            let net = Network::new(vec![v("s"), v("m"), v("t")], edges, "s", "t", demand)?
                .with_path_order(vec![vec![0, 1], vec![2]])?;
            let lower = vec![0.0, demand];
            Ok(
                homogeneous_gadget(format!("fig3a-const-b{b}-eps{eps}"), net)?
                    .flow("untolled_path_flows", lower.clone(), Origin::Published)
                    .flow("optimal_path_flows", lower, Origin::Published),
            )
        }
        Figure3::MonomialPair {
            alpha,
            lambda,
            d,
            demand,
        } => {
            positive("alpha", alpha)?;
            positive("lambda", lambda)?;
            if d == 0 {
                return input("d must be at least 1");
            }
            let inv_d = 1.0 / d as f64;
            let (a, b) = (alpha.powf(inv_d), (lambda * alpha).powf(inv_d));
            let r = demand.unwrap_or(a + b);
            positive("demand", r)?;
            let net = Network::parallel_links(
                vec![
                    PolyLatency::monomial(alpha, d as usize)?,
                    PolyLatency::monomial(lambda * alpha, d as usize)?,
                ],
                r,
            )?;
            let split = vec![b * r / (a + b), a * r / (a + b)];
            Ok(
                homogeneous_gadget(format!("fig3b-a{alpha}-l{lambda}-d{d}"), net)?
                    .flow("untolled_path_flows", split.clone(), Origin::Published)
                    .flow("optimal_path_flows", split, Origin::Published),
            )
        }
        Figure3::MonomialConstant { alpha, d, demand } => {
            positive("alpha", alpha)?;
            positive("demand", demand)?;
            let net = crate::metrics::pigou_network(alpha, d, demand)?;
            let df = d as f64;
            let mut s = homogeneous_gadget(format!("fig3c-a{alpha}-d{d}-r{demand}"), net)?;
            if demand <= (1.0 / (alpha * (df + 1.0))).powf(1.0 / df) {
                s = s
                    .flow("untolled_path_flows", vec![demand, 0.0], Origin::Published)
                    .flow("optimal_path_flows", vec![demand, 0.0], Origin::Published);
            }
            Ok(s)
        }
        Figure3::Matched { l1, f1 } => {
            positive("f1", f1)?;
            if l1.eval(0.0) != 0.0 || l1.is_constant() {
                return input("l1 must vanish at 0 and be nonconstant");
            }
            let beta = l1.eval(f1);
            let ratio = f1 * l1.derivative(f1) / beta;
            let d = ratio.round();
            if (ratio - d).abs() > 1e-9 || d < 1.0 {
                return input(format!(
                    "f1 l1'(f1) / l1(f1) = {ratio} is not a positive integer"
                ));
            }
            let l2 = PolyLatency::monomial(beta, d as usize)?;
            let net = Network::parallel_links(vec![l1, l2], f1 + 1.0)?;
            Ok(homogeneous_gadget(format!("fig3d-f{f1}-d{d}"), net)?
                .flow("untolled_path_flows", vec![f1, 1.0], Origin::Published)
                .flow("optimal_path_flows", vec![f1, 1.0], Origin::Published))
        }
    }
}

/// Worst Pigou instance for marginal weight `beta`: `alpha f^d` against 1 with
/// unit demand, a homogeneous population at sensitivity `beta` and
/// marginal-cost tolls.
pub fn build_lemma6_witness(d: u32, beta: f64) -> Result<Scenario> {
    let alpha = worst_pigou_alpha(d, beta)?;
    let net = crate::metrics::pigou_network(alpha, d, 1.0)?;
    let population = Population::homogeneous(1.0, beta)?;
    let df = d as f64;
    let nash = (1.0 / (alpha * (1.0 + df * beta))).powf(1.0 / df).min(1.0);
    Ok(Scenario::new(
        format!("lemma6-d{d}-beta{beta}"),
        net,
        population,
        MechanismSpec::marginal_cost(),
    )
    .scalar("alpha", alpha, Origin::Published)
    .flow("tolled_path_flows", vec![nash, 1.0 - nash], Origin::Derived)
    .scalar("poa", poa_from_beta(d, beta)?, Origin::Derived))
}

/// Parallel stages in series: stage `k` joins `v{k}` to `v{k+1}` with one edge
/// per latency.
pub fn build_series_of_parallel(stages: Vec<Vec<PolyLatency>>, demand: f64) -> Result<Network> {
    if stages.is_empty() || stages.iter().any(|s| s.is_empty()) {
        return input("every stage needs at least one link");
    }
    let vertices: Vec<String> = (0..=stages.len()).map(|k| format!("v{k}")).collect();
    let mut edges = Vec::new();
    for (k, stage) in stages.into_iter().enumerate() {
        for l in stage {
            edges.push((vertices[k].clone(), vertices[k + 1].clone(), l));
        }
    }
    let (s, t) = (vertices[0].clone(), vertices[vertices.len() - 1].clone());
    Network::new(vertices, edges, &s, &t, demand)
}

/// Moves mass `alpha` from the most sensitive classes (top down) to the
/// least sensitive class with positive mass. Emptied classes are dropped.
pub fn shift_population(population: &Population, alpha: f64) -> Result<Population> {
    let total = population.total_mass();
    if !(alpha >= 0.0) || alpha > total * (1.0 + 1e-12) {
        return input(format!("shift {alpha} must lie in [0, {total}]"));
    }
    let mut classes: Vec<SensitivityClass> = population
        .classes()
        .iter()
        .copied()
        .filter(|c| c.mass > 0.0)
        .collect();
    let mut left = alpha;
    let mut moved = 0.0;
    for c in classes.iter_mut().skip(1).rev() {
        let take = left.min(c.mass);
        c.mass -= take;
        left -= take;
        moved += take;
        if left <= 0.0 {
            break;
        }
    }
    classes[0].mass += moved;
    classes.retain(|c| c.mass > 0.0);
    if population.allows_insensitive() {
        Population::with_insensitive(classes, population.bounds())
    } else {
        Population::new(classes, population.bounds())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Parallel,
    /// Braess-with-bypass and two-stage series-parallel shapes.
    General,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusConfig {
    pub seed: u64,
    pub count: usize,
    pub max_links: usize,
    pub max_degree: usize,
    pub max_classes: usize,
    pub topology: Topology,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 100,
            max_links: 5,
            max_degree: 3,
            max_classes: 3,
            topology: Topology::Parallel,
        }
    }
}

/// Polynomial with coefficients in `[0, 2]`, degree in `1..=max_degree` and a
/// leading coefficient of at least 0.1, so it is never constant.
fn random_latency(rng: &mut ChaCha8Rng, max_degree: usize) -> PolyLatency {
    let degree = rng.gen_range(1..=max_degree.max(1));
    let mut coeffs: Vec<f64> = (0..degree)
        .map(|_| {
            if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..2.0)
            }
        })
        .collect();
    coeffs.push(rng.gen_range(0.1..2.0));
    PolyLatency::new(coeffs).expect("coefficients in range")
}

fn random_population(rng: &mut ChaCha8Rng, demand: f64, max_classes: usize) -> Result<Population> {
    let lower = rng.gen_range(0.1..1.0);
    let upper = lower + rng.gen_range(0.5..3.0);
    let n = rng.gen_range(1..=max_classes.max(1));
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let sum: f64 = weights.iter().sum();
    let mut classes: Vec<SensitivityClass> = weights
        .iter()
        .map(|w| class(demand * w / sum, rng.gen_range(lower..=upper)))
        .collect();
    // pin the extremes so the bounds are attained
    classes[0].sensitivity = lower;
    if n > 1 {
        classes[n - 1].sensitivity = upper;
    }
    let assigned: f64 = classes[1..].iter().map(|c| c.mass).sum();
    classes[0].mass = demand - assigned;
    Population::new(classes, SensitivityBounds::new(lower, upper)?)
}

fn random_network(rng: &mut ChaCha8Rng, config: &CorpusConfig, general: bool) -> Result<Network> {
    let demand = rng.gen_range(0.5..=3.0);
    if !general {
        let links = rng.gen_range(2..=config.max_links.max(2));
        let lat = (0..links)
            .map(|_| random_latency(rng, config.max_degree))
            .collect();
        return Network::parallel_links(lat, demand);
    }
    if rng.gen_bool(0.5) {
        let v = |s: &str| s.to_string();
        let mut edges = vec![
            (v("s"), v("a"), random_latency(rng, config.max_degree)),
            (v("s"), v("b"), random_latency(rng, config.max_degree)),
            (v("a"), v("t"), random_latency(rng, config.max_degree)),
            (v("b"), v("t"), random_latency(rng, config.max_degree)),
            (v("a"), v("b"), random_latency(rng, config.max_degree)),
        ];
        if rng.gen_bool(0.5) {
            edges.push((v("s"), v("t"), random_latency(rng, config.max_degree)));
        }
        Network::new(
            vec![v("s"), v("a"), v("b"), v("t")],
            edges,
            "s",
            "t",
            demand,
        )
    } else {
        let stages = (0..2)
            .map(|_| {
                let links = rng.gen_range(1..=2);
                (0..links)
                    .map(|_| random_latency(rng, config.max_degree))
                    .collect()
            })
            .collect();
        build_series_of_parallel(stages, demand)
    }
}

/// Seeded random instances. Each scenario carries a valid non-perverse
/// generalized mechanism for its population's bounds.
pub fn random_corpus(config: &CorpusConfig) -> Result<Vec<Scenario>> {
    if config.max_links < 2 || config.max_degree < 1 || config.max_classes < 1 {
        return input("corpus needs max_links >= 2, max_degree >= 1, max_classes >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.count)
        .map(|i| {
            let general = match config.topology {
                Topology::Parallel => false,
                Topology::General => true,
                Topology::Mixed => rng.gen_bool(0.5),
            };
            let network = random_network(&mut rng, config, general)?;
            let population = random_population(&mut rng, network.demand(), config.max_classes)?;
            let inv = population.bounds().inv_upper();
            let kappa1 = -inv + rng.gen_range(0.05..2.0);
            let kappa2 = rng.gen_range(0.0..=1.0) * (kappa1 + inv);
            let mechanism = MechanismSpec::non_perverse(kappa1, kappa2, population.bounds())?;
            Ok(Scenario::new(
                format!("corpus-{}-{i}", config.seed),
                network,
                population,
                mechanism,
            ))
        })
        .collect()
}

/// Splits `"<a>-<b>"` where either number may carry a leading minus sign.
fn split_pair(text: &str) -> Option<(f64, f64)> {
    text.char_indices()
        .filter(|&(i, c)| c == '-' && i > 0)
        .find_map(|(i, _)| Some((text[..i].parse().ok()?, text[i + 1..].parse().ok()?)))
}

/// Rebuilds a scenario from its id. Recognized ids: `example1-hetero`,
/// `example1-hetero-s1-<s>`, `example1-homogeneous-s<s>`,
/// `thm1-k<kappa1>-<kappa2>[-su<S_U>]` and `lemma6-d<d>-beta<beta>`.
pub fn scenario_by_id(id: &str) -> Result<Scenario> {
    let bad = || input(format!("unknown scenario id '{id}'"));
    if id == "example1-hetero" {
        return Ok(build_example1());
    }
    if let Some(rest) = id.strip_prefix("example1-hetero-s1-") {
        return rest
            .parse()
            .map_or_else(|_| bad(), build_example1_heterogeneous);
    }
    if let Some(rest) = id.strip_prefix("example1-homogeneous-s") {
        return rest
            .parse()
            .map_or_else(|_| bad(), build_example1_homogeneous);
    }
    if let Some(rest) = id.strip_prefix("thm1-k") {
        let (pair, su) = match rest.split_once("-su") {
            Some((pair, su)) => match su.parse::<f64>() {
                Ok(v) => (pair, v),
                Err(_) => return bad(),
            },
            None => (rest, 1.0),
        };
        return match split_pair(pair) {
            Some((k1, k2)) => build_theorem1_construction(k1, k2, su),
            None => bad(),
        };
    }
    if let Some(rest) = id.strip_prefix("lemma6-d") {
        if let Some((d, beta)) = rest.split_once("-beta") {
            if let (Ok(d), Ok(beta)) = (d.parse(), beta.parse()) {
                return build_lemma6_witness(d, beta);
            }
        }
        return bad();
    }
    bad()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{nash_equilibrium, optimal_flow, SolverConfig};

    fn poly(c: &[f64]) -> PolyLatency {
        PolyLatency::new(c.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn example1_ids_and_values() {
        let s = build_example1();
        assert_eq!(s.id, "example1-hetero");
        assert_eq!(s.expected_scalar("tolled_latency"), Some(5.0));
        assert_eq!(s.expected_scalar("untolled_latency"), Some(4.0));
        let h = build_example1_homogeneous(1.0).unwrap();
        let cfg = SolverConfig::default();
        let eq = nash_equilibrium(&h.network, &h.mechanism, &h.population, &cfg).unwrap();
        assert!(close(
            &eq.flow.path_totals(),
            h.expected_flow("tolled_path_flows").unwrap(),
            1e-7
        ));
    }

    #[test]
    fn perverse_construction_parameters() {
        let s = build_theorem1_construction(0.0, 1.0, 1.0).unwrap();
        assert_eq!(s.id, "thm1-k0-1");
        assert_eq!(s.expected_scalar("gamma2"), Some(1.0));
        assert_eq!(s.expected_scalar("s1"), Some(0.125));
        let half = build_theorem1_construction(0.0, 0.5, 1.0).unwrap();
        assert_eq!(half.expected_scalar("tolled_latency"), Some(4.5));
        assert_eq!(half.expected_scalar("untolled_latency"), Some(4.25));
        // s1 reproduces gamma2 / 8
        for (k1, k2, su) in [(0.3, 0.7, 2.0), (-0.2, 1.5, 1.0), (1.0, 0.2, 4.0)] {
            let sc = build_theorem1_construction(k1, k2, su).unwrap();
            let s1 = sc.expected_scalar("s1").unwrap();
            let g = sc.expected_scalar("gamma2").unwrap();
            assert!((s1 * k2 / (1.0 + s1 * k1) - g / 8.0).abs() < 1e-12);
        }
        assert!(build_theorem1_construction(0.0, 0.0, 1.0).is_err());
        assert!(build_theorem1_construction(-1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn worst_case_gadgets_have_coinciding_flows() {
        let cfg = SolverConfig::default();
        let kinds = vec![
            Figure3::SeriesPair {
                l1: poly(&[0.0, 0.5]),
                l2: poly(&[0.0, 0.5]),
                demand: 2.0,
            },
            Figure3::SeriesConstant {
                b: 1.0,
                eps: 0.1,
                demand: 1.5,
            },
            Figure3::MonomialPair {
                alpha: 1.0,
                lambda: 2.0,
                d: 1,
                demand: None,
            },
            Figure3::MonomialPair {
                alpha: 0.5,
                lambda: 3.0,
                d: 2,
                demand: Some(1.7),
            },
            Figure3::MonomialConstant {
                alpha: 1.0,
                d: 2,
                demand: 0.5,
            },
            Figure3::Matched {
                l1: poly(&[0.0, 3.0]),
                f1: 0.7,
            },
            Figure3::Matched {
                l1: poly(&[0.0, 1.0, 0.0, 1.0]),
                f1: 1.0,
            },
            Figure3::Matched {
                l1: poly(&[0.0, 0.0, 0.0, 1.0]),
                f1: 1.3,
            },
        ];
        for kind in kinds {
            let s = build_figure3(kind).unwrap();
            let nash = nash_equilibrium(&s.network, &s.mechanism, &s.population, &cfg).unwrap();
            let opt = optimal_flow(&s.network, &cfg).unwrap();
            let want = s.expected_flow("untolled_path_flows").unwrap();
            assert!(close(&nash.flow.path_totals(), want, 1e-6), "{}", s.id);
            assert!(close(&opt.flow.path_totals(), want, 1e-6), "{}", s.id);
        }
        let b = build_figure3(Figure3::MonomialPair {
            alpha: 1.0,
            lambda: 2.0,
            d: 1,
            demand: None,
        })
        .unwrap();
        assert_eq!(b.network.demand(), 3.0);
        assert!(close(
            b.expected_flow("untolled_path_flows").unwrap(),
            &[2.0, 1.0],
            1e-12
        ));
        assert!(build_figure3(Figure3::Matched {
            l1: poly(&[1.0, 1.0]),
            f1: 1.0
        })
        .is_err());
        assert!(build_figure3(Figure3::Matched {
            l1: poly(&[0.0, 1.0, 1.0]),
            f1: 1.0
        })
        .is_err());
        assert!(build_figure3(Figure3::MonomialPair {
            alpha: -1.0,
            lambda: 2.0,
            d: 1,
            demand: None
        })
        .is_err());
    }

    #[test]
    fn lemma6_witness_ratio() {
        let s = build_lemma6_witness(1, 2.0).unwrap();
        assert!((s.expected_scalar("alpha").unwrap() - 4.0 / 9.0).abs() < 1e-15);
        assert!((s.expected_scalar("poa").unwrap() - 9.0 / 8.0).abs() < 1e-12);
        assert!(close(
            s.expected_flow("tolled_path_flows").unwrap(),
            &[0.75, 0.25],
            1e-12
        ));
    }

    #[test]
    fn shift_examples() {
        let pop = Population::new(
            vec![class(1.0, 0.2), class(1.0, 0.8)],
            SensitivityBounds::new(0.2, 0.8).unwrap(),
        )
        .unwrap();
        assert_eq!(shift_population(&pop, 0.0).unwrap(), pop);
        let half = shift_population(&pop, 0.5).unwrap();
        assert_eq!(half.classes(), &[class(1.5, 0.2), class(0.5, 0.8)]);
        let full = shift_population(&pop, 2.0).unwrap();
        assert_eq!(full.classes(), &[class(2.0, 0.2)]);
        assert!(shift_population(&pop, 2.5).is_err());
    }

    #[test]
    fn corpus_is_deterministic_and_valid() {
        for topology in [Topology::Parallel, Topology::General, Topology::Mixed] {
            let cfg = CorpusConfig {
                seed: 7,
                count: 30,
                topology,
                ..CorpusConfig::default()
            };
            let a = random_corpus(&cfg).unwrap();
            let b = random_corpus(&cfg).unwrap();
            assert_eq!(a, b);
            for s in &a {
                s.population.check_demand(&s.network).unwrap();
                assert!(s.mechanism.is_non_perverse(s.population.bounds()));
                if topology == Topology::Parallel {
                    assert!(s.network.is_parallel());
                }
                let back = Network::from_json(&s.network.to_json()).unwrap();
                assert_eq!(back.paths(), s.network.paths());
            }
        }
    }

    #[test]
    fn ids_resolve_to_the_same_scenario() {
        let built = vec![
            build_example1(),
            build_example1_heterogeneous(0.01).unwrap(),
            build_example1_homogeneous(0.5).unwrap(),
            build_theorem1_construction(0.0, 1.0, 1.0).unwrap(),
            build_theorem1_construction(-0.25, 0.5, 2.0).unwrap(),
            build_lemma6_witness(2, 1.5).unwrap(),
        ];
        for s in built {
            assert_eq!(scenario_by_id(&s.id).unwrap(), s, "{}", s.id);
        }
        assert!(scenario_by_id("nope").is_err());
        assert!(scenario_by_id("thm1-kx-1").is_err());
    }

    #[test]
    fn scenario_json_round_trip_parts() {
        let s = build_theorem1_construction(0.0, 1.0, 1.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["id"], "thm1-k0-1");
        let net =
            Network::from_spec(serde_json::from_value(v["network"].clone()).unwrap()).unwrap();
        assert_eq!(net.paths(), s.network.paths());
        assert_eq!(v["expected"][0]["origin"], "derived");
    }
}

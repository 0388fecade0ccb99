use super::*;
use crate::game::{PolyLatency, SensitivityBounds, SensitivityClass};

fn poly(c: &[f64]) -> PolyLatency {
    PolyLatency::new(c.to_vec()).unwrap()
}

fn bridge(e2: f64, e6: f64) -> Network {
    let v = |s: &str| s.to_string();
    let edges = vec![
        (v("s"), v("a"), poly(&[0.0, 1.0])),
        (v("s"), v("b"), poly(&[e2])),
        (v("a"), v("t"), poly(&[e2])),
        (v("b"), v("t"), poly(&[0.0, 1.0])),
        (v("a"), v("b"), poly(&[0.0])),
        (v("s"), v("t"), poly(&[e6])),
    ];
    Network::new(vec![v("s"), v("a"), v("b"), v("t")], edges, "s", "t", 2.0)
        .unwrap()
        .with_path_order(vec![vec![0, 4, 3], vec![0, 2], vec![1, 3], vec![5]])
        .unwrap()
}

fn example1() -> Network {
    bridge(1.0, 3.0)
}

fn pigou() -> Network {
    Network::parallel_links(vec![PolyLatency::linear(), poly(&[1.0])], 1.0).unwrap()
}

fn classes(pairs: &[(f64, f64)]) -> Vec<SensitivityClass> {
    pairs
        .iter()
        .map(|&(mass, sensitivity)| SensitivityClass { mass, sensitivity })
        .collect()
}

fn two_class(pairs: &[(f64, f64)], upper: f64) -> Population {
    Population::with_insensitive(classes(pairs), SensitivityBounds::new(0.0, upper).unwrap())
        .unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn pigou_optimum_matches_grid_minimum() {
    let net = pigou();
    let opt = optimal_flow(&net, &cfg()).unwrap();
    // L(x) = x^2 + (1 - x) on a 1e-5 grid
    let (mut best_x, mut best_l) = (0.0, f64::INFINITY);
    for i in 0..=100_000 {
        let x = i as f64 * 1e-5;
        let l = x * x + (1.0 - x);
        if l < best_l {
            best_x = x;
            best_l = l;
        }
    }
    assert!((opt.flow.path_totals()[0] - best_x).abs() < 1e-5);
    assert!((opt.total_latency - best_l).abs() < 1e-9);
    assert!((opt.total_latency - 0.75).abs() < 1e-9);
    assert!(optimality_certificate(&net, &opt.flow, 1e-6));
}

#[test]
fn example1_optimum() {
    let net = example1();
    let opt = optimal_flow(&net, &cfg()).unwrap();
    assert!(close(&opt.flow.path_totals(), &[0.0, 1.0, 1.0, 0.0], 1e-7));
    assert!((opt.total_latency - 4.0).abs() < 1e-7);
    assert!(optimality_certificate(&net, &opt.flow, 1e-6));
}

#[test]
fn single_link_optimum() {
    let net = Network::parallel_links(vec![poly(&[1.0, 0.0, 2.0])], 3.0).unwrap();
    let opt = optimal_flow(&net, &cfg()).unwrap();
    assert!((opt.total_latency - 3.0 * 19.0).abs() < 1e-9);
}

#[test]
fn example1_homogeneous_marginal_cost() {
    let net = example1();
    for s in [0.0, 0.25, 1.0] {
        let r = nash_flow_homogeneous(&net, &MechanismSpec::marginal_cost(), s, &cfg()).unwrap();
        assert!(r.certified);
        assert!((r.total_latency - 4.0).abs() < 1e-6, "s = {s}");
    }
}

#[test]
fn pigou_homogeneous() {
    let net = pigou();
    let zero = nash_flow_homogeneous(&net, &MechanismSpec::zero(), 1.0, &cfg()).unwrap();
    assert!((zero.flow.path_totals()[0] - 1.0).abs() < 1e-9);
    assert!((zero.total_latency - 1.0).abs() < 1e-9);
    let mc = nash_flow_homogeneous(&net, &MechanismSpec::marginal_cost(), 1.0, &cfg()).unwrap();
    assert!((mc.flow.path_totals()[0] - 0.5).abs() < 1e-9);
    assert!((mc.total_latency - 0.75).abs() < 1e-9);
}

#[test]
fn homogeneous_latency_independent_of_start() {
    let net = example1();
    let mech = MechanismSpec::generalized(0.3, 0.7).unwrap();
    let starts = [
        [2.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 2.0],
        [0.5, 0.5, 0.5, 0.5],
    ];
    let latencies: Vec<f64> = starts
        .iter()
        .map(|x| {
            nash_flow_homogeneous_from(&net, &mech, 0.8, x, &cfg())
                .unwrap()
                .total_latency
        })
        .collect();
    for l in &latencies {
        assert!((l - latencies[0]).abs() < 1e-7);
    }
}

#[test]
fn two_class_parallel_matches_grid_oracle() {
    let net = pigou();
    let pop = two_class(&[(0.5, 0.0), (0.5, 1.0)], 1.0);
    let mech = MechanismSpec::marginal_cost();
    let got = nash_flow_parallel_heterogeneous(&net, &mech, &pop, &cfg()).unwrap();
    assert!(got.result.certified);
    assert!(got.result.nash_gap <= 1e-7);
    let candidates = oracle_nash_flows(&net, &mech, &pop, 1e-3).unwrap();
    assert!(!candidates.is_empty());
    let near = candidates.iter().any(|c| {
        c.flow
            .path_flows()
            .iter()
            .flatten()
            .zip(got.result.flow.path_flows().iter().flatten())
            .all(|(a, b)| (a - b).abs() <= 1e-3 + 1e-12)
    });
    assert!(near);
    // insensitive users take the congestible link, sensitive ones the constant link
    let f = got.result.flow.path_flows();
    assert!(close(&f[0], &[0.5, 0.0], 1e-6));
    assert!(close(&f[1], &[0.0, 0.5], 1e-6));
}

#[test]
fn identical_links_split_evenly() {
    let net =
        Network::parallel_links(vec![PolyLatency::linear(), PolyLatency::linear()], 3.0).unwrap();
    let pop = two_class(&[(1.0, 0.5), (2.0, 2.0)], 2.0);
    for (k1, k2) in [(0.0, 1.0), (0.4, 0.2), (-0.2, 0.1)] {
        let mech = MechanismSpec::generalized(k1, k2).unwrap();
        let got = nash_equilibrium(&net, &mech, &pop, &cfg()).unwrap();
        assert!(close(&got.flow.path_totals(), &[1.5, 1.5], 1e-7));
    }
}

#[test]
fn parallel_single_class_matches_homogeneous() {
    let net = Network::parallel_links(
        vec![poly(&[0.0, 1.0]), poly(&[0.5, 0.0, 1.0]), poly(&[1.0, 0.2])],
        2.0,
    )
    .unwrap();
    let mech = MechanismSpec::generalized(0.5, 1.5).unwrap();
    let pop = Population::homogeneous(2.0, 0.7).unwrap();
    let par = nash_flow_parallel_heterogeneous(&net, &mech, &pop, &cfg()).unwrap();
    let hom = nash_flow_homogeneous(&net, &mech, 0.7, &cfg()).unwrap();
    assert!(close(
        &par.result.flow.path_totals(),
        &hom.flow.path_totals(),
        1e-7
    ));
}

#[test]
fn parallel_three_classes_sorted() {
    let net = Network::parallel_links(
        vec![
            poly(&[0.0, 1.0]),
            poly(&[0.5, 0.0, 1.0]),
            poly(&[1.0, 0.2]),
            poly(&[2.0]),
        ],
        3.0,
    )
    .unwrap();
    let pop = Population::new(
        classes(&[(1.0, 0.2), (1.0, 1.0), (1.0, 3.0)]),
        SensitivityBounds::new(0.1, 4.0).unwrap(),
    )
    .unwrap();
    let mech = MechanismSpec::generalized(0.2, 0.9).unwrap();
    let got = nash_flow_parallel_heterogeneous(&net, &mech, &pop, &cfg()).unwrap();
    assert!(got.result.certified, "gap {}", got.result.nash_gap);
    assert!(got.consistent);
    let betas: Vec<f64> = pop
        .classes()
        .iter()
        .map(|c| mech.beta(c.sensitivity).unwrap())
        .collect();
    assert!(ordering_violation(&net, &pop, &betas, &got.result.flow) <= 1e-6);
    let general = nash_flow_general(&net, &mech, &pop, &cfg()).unwrap();
    assert!(general.certified);
    assert!(close(
        &general.flow.path_totals(),
        &got.result.flow.path_totals(),
        1e-6
    ));
}

#[test]
fn parallel_rejects_non_parallel() {
    let net = example1();
    let pop = two_class(&[(1.0, 0.0), (1.0, 1.0)], 1.0);
    let err = nash_flow_parallel_heterogeneous(&net, &MechanismSpec::marginal_cost(), &pop, &cfg());
    assert!(matches!(err, Err(crate::Error::Input(_))));
}

#[test]
fn example1_heterogeneous_worst_equilibrium() {
    let net = example1();
    let pop = two_class(&[(1.0, 0.0), (1.0, 1.0)], 1.0);
    let mech = MechanismSpec::marginal_cost();
    let search = nash_flows_multistart(&net, &mech, &pop, &cfg()).unwrap();
    let worst = search.worst();
    assert!(worst.certified);
    assert!((worst.total_latency - 5.0).abs() < 1e-6);
    assert!(close(
        &worst.flow.path_totals(),
        &[1.0, 0.0, 0.0, 1.0],
        1e-6
    ));
    let best = search.best().unwrap();
    assert!((best.total_latency - 4.0).abs() < 1e-6);
}

#[test]
fn example1_gap_at_perverse_flow() {
    let net = example1();
    let pop = two_class(&[(1.0, 0.0), (1.0, 1.0)], 1.0);
    let flow = FlowProfile::new(
        &net,
        vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
    )
    .unwrap();
    let gap = nash_gap(&net, &MechanismSpec::marginal_cost(), &pop, &flow).unwrap();
    assert!(gap.abs() < 1e-12);
    let bad = FlowProfile::new(
        &net,
        vec![vec![0.0, 0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 1.0]],
    )
    .unwrap();
    assert!(nash_gap(&net, &MechanismSpec::zero(), &pop, &bad).unwrap() > 0.1);
}

fn perverse_construction() -> (Network, Population) {
    // gamma = 1: l_e2 = l_e3 = 9/8, l_e6 = 3
    let net = bridge(1.125, 3.0);
    let pop = Population::new(
        classes(&[(1.0, 0.125), (1.0, 1.0)]),
        SensitivityBounds::new(0.125, 1.0).unwrap(),
    )
    .unwrap();
    (net, pop)
}

#[test]
fn perverse_construction_tolled_flow() {
    let (net, pop) = perverse_construction();
    let mech = MechanismSpec::marginal_cost();
    let start = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]];
    let r = nash_flow_general_from(&net, &mech, &pop, start, &cfg()).unwrap();
    assert!(r.certified);
    assert!(close(&r.flow.path_totals(), &[1.0, 0.0, 0.0, 1.0], 1e-9));
    assert!((r.total_latency - 5.0).abs() < 1e-9);
    let worst = nash_equilibrium(&net, &mech, &pop, &cfg()).unwrap();
    assert!((worst.total_latency - 5.0).abs() < 1e-6);
}

#[test]
fn perverse_construction_untolled_flow() {
    let (net, pop) = perverse_construction();
    let r = nash_equilibrium(&net, &MechanismSpec::zero(), &pop, &cfg()).unwrap();
    assert!(r.certified);
    assert!(close(
        &r.flow.path_totals(),
        &[0.25, 0.875, 0.875, 0.0],
        1e-6
    ));
    assert!((r.total_latency - 4.5).abs() < 1e-6);
}

#[test]
fn oracle_finds_untolled_cluster_of_perverse_construction() {
    let (net, pop) = perverse_construction();
    let found = oracle_nash_flows(&net, &MechanismSpec::zero(), &pop, 0.125).unwrap();
    assert!(found
        .iter()
        .any(|r| close(&r.flow.path_totals(), &[0.25, 0.875, 0.875, 0.0], 1e-12)));
}

#[test]
fn oracle_pigou_single_cluster() {
    let net = pigou();
    let pop = Population::homogeneous(1.0, 1.0).unwrap();
    let found = oracle_nash_flows(&net, &MechanismSpec::zero(), &pop, 1e-3).unwrap();
    assert!(!found.is_empty());
    assert!(found
        .iter()
        .all(|r| (r.flow.path_totals()[0] - 1.0).abs() < 0.05));
}

#[test]
fn oracle_rejects_large_instances() {
    let net = Network::parallel_links(vec![PolyLatency::linear(); 5], 1.0).unwrap();
    let pop = Population::homogeneous(1.0, 1.0).unwrap();
    assert!(oracle_nash_flows(&net, &MechanismSpec::zero(), &pop, 0.1).is_err());
    let pop = Population::homogeneous(1.0, 1.0).unwrap();
    assert!(oracle_nash_flows(&pigou(), &MechanismSpec::zero(), &pop, 0.3).is_err());
}

#[test]
fn optimum_has_zero_marginal_cost_gap() {
    let net =
        Network::parallel_links(vec![poly(&[0.0, 0.0, 1.0]), poly(&[0.5, 1.0])], 1.5).unwrap();
    let opt = optimal_flow(&net, &cfg()).unwrap();
    let pop = Population::homogeneous(1.5, 1.0).unwrap();
    let gap = nash_gap(&net, &MechanismSpec::marginal_cost(), &pop, &opt.flow).unwrap();
    assert!(gap < 1e-9);
}

#[test]
fn decomposition_adds_up() {
    let net = example1();
    let flow = FlowProfile::aggregate(&net, vec![0.3, 0.7, 0.6, 0.4]).unwrap();
    for d in path_cost_decomposition(&net, &flow) {
        assert_eq!(d.marginal_cost, d.latency + d.marginal);
    }
}

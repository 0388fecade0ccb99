//! Total-latency ratios, closed-form price-of-anarchy and perversity bounds,
//! and coefficient selection for generalized marginal-cost tolls.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::roots::bisect;
use crate::equilibrium::{nash_equilibrium, nash_flow_homogeneous, optimal_flow, SolverConfig};
use crate::error::{domain, input, Error, Result};
use crate::game::{FlowProfile, Network, PolyLatency, Population};
use crate::mechanism::{effective_sensitivity_beta, MechanismSpec};

/// Largest polynomial degree accepted by the closed forms.
pub const MAX_DEGREE: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub scenario: Option<String>,
    pub numerator_flow: FlowProfile,
    pub denominator_flow: FlowProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub numerator_latency: f64,
    pub denominator_latency: f64,
    pub ratio: f64,
    pub witness: Witness,
    /// True when the ratio is an empirical maximum over a finite family, and
    /// so only a lower bound on the supremum over the whole class.
    pub lower_bound: bool,
}

impl RatioReport {
    fn new(
        num: f64,
        den: f64,
        numerator_flow: FlowProfile,
        denominator_flow: FlowProfile,
    ) -> Result<Self> {
        if !(den > 0.0) {
            return Err(Error::Numerical(format!(
                "denominator latency {den} is not positive"
            )));
        }
        Ok(Self {
            numerator_latency: num,
            denominator_latency: den,
            ratio: num / den,
            witness: Witness {
                scenario: None,
                numerator_flow,
                denominator_flow,
            },
            lower_bound: false,
        })
    }

    pub fn with_scenario(mut self, id: impl Into<String>) -> Self {
        self.witness.scenario = Some(id.into());
        self
    }
}

fn tolled_nash(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    config: &SolverConfig,
    force: bool,
) -> Result<crate::equilibrium::EquilibriumResult> {
    let eq = nash_equilibrium(network, mechanism, population, config)?;
    if !eq.certified && !force {
        return Err(Error::Uncertified {
            gap: eq.nash_gap,
            tolerance: eq.tolerance,
        });
    }
    Ok(eq)
}

/// Tolled Nash latency over optimal latency on one instance. Refuses an
/// uncertified equilibrium unless `force` is set.
pub fn poa_instance(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    config: &SolverConfig,
    force: bool,
) -> Result<RatioReport> {
    let eq = tolled_nash(network, mechanism, population, config, force)?;
    let opt = optimal_flow(network, config)?;
    RatioReport::new(eq.total_latency, opt.total_latency, eq.flow, opt.flow)
}

/// Tolled Nash latency over untolled Nash latency on one instance.
pub fn pi_instance(
    network: &Network,
    mechanism: &MechanismSpec,
    population: &Population,
    config: &SolverConfig,
    force: bool,
) -> Result<RatioReport> {
    let eq = tolled_nash(network, mechanism, population, config, force)?;
    let free = tolled_nash(network, &MechanismSpec::zero(), population, config, force)?;
    RatioReport::new(eq.total_latency, free.total_latency, eq.flow, free.flow)
}

fn check_degree(d: u32) -> Result<f64> {
    if d == 0 || d > MAX_DEGREE {
        return input(format!("degree must be in 1..={MAX_DEGREE}, got {d}"));
    }
    Ok(d as f64)
}

/// Worst-case price of anarchy over degree-`d` polynomial latencies for a
/// homogeneous population with marginal weight `beta >= 0`:
/// `1 / (1 + d b - d ((1 + d b)/(1 + d))^((d+1)/d))` for `b <= 1`, and
/// `b^-d ((1 + d b)/(1 + d))^(d+1)` above 1.
pub fn poa_from_beta(d: u32, beta: f64) -> Result<f64> {
    let d = check_degree(d)?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("beta must be finite and nonnegative, got {beta}"));
    }
    let ratio_ln = ((1.0 + d * beta) / (1.0 + d)).ln();
    if beta <= 1.0 {
        let inner = 1.0 + d * beta - d * ((d + 1.0) / d * ratio_ln).exp();
        Ok(1.0 / inner)
    } else {
        Ok(((d + 1.0) * ratio_ln - d * beta.ln()).exp())
    }
}

/// Price of anarchy of non-perverse generalized tolls on parallel networks,
/// where the least sensitive users set the marginal weight
/// `beta = kappa2 S_L / (1 + kappa1 S_L)`.
pub fn poa_closed_form_nonperverse(
    d: u32,
    s_lower: f64,
    s_upper: f64,
    kappa1: f64,
    kappa2: f64,
) -> Result<f64> {
    if !(s_lower >= 0.0) || !(s_upper >= s_lower) {
        return input(format!("need 0 <= S_L <= S_U, got [{s_lower}, {s_upper}]"));
    }
    let beta = effective_sensitivity_beta(s_lower, kappa1, kappa2)?;
    if !(0.0..=1.0 + 1e-12).contains(&beta) {
        return domain(format!("beta = {beta} lies outside [0, 1]"));
    }
    poa_from_beta(d, beta.min(1.0))
}

/// Price of anarchy for a homogeneous population of sensitivity `s` under
/// `T(kappa1, kappa2)`.
pub fn poa_homogeneous_closed_form(d: u32, s: f64, kappa1: f64, kappa2: f64) -> Result<f64> {
    let beta = effective_sensitivity_beta(s, kappa1, kappa2)?;
    if beta < 0.0 {
        return domain(format!("beta = {beta} is negative"));
    }
    poa_from_beta(d, beta)
}

/// Homogeneous perversity index of `T(kappa1, kappa2)`: the price of anarchy
/// of a population at the top sensitivity `S_U`.
pub fn pi_homogeneous_closed_form(d: u32, s_upper: f64, kappa1: f64, kappa2: f64) -> Result<f64> {
    let inv = if s_upper.is_infinite() {
        0.0
    } else {
        1.0 / s_upper
    };
    if !(s_upper > 0.0) {
        return input(format!("S_U must be positive, got {s_upper}"));
    }
    if !(kappa2 > 0.0) || !(kappa1 > -inv) || !(kappa1 < kappa2 - inv) {
        return domain(format!(
            "need kappa2 > 0 and -1/S_U < kappa1 < kappa2 - 1/S_U, got ({kappa1}, {kappa2})"
        ));
    }
    poa_homogeneous_closed_form(d, s_upper, kappa1, kappa2)
}

/// Coefficients minimizing the non-perverse price of anarchy under the cap
/// `kappa <= kbar`: `(kbar - 1/S_U, kbar)`.
pub fn optimal_nonperverse_coefficients(
    d: u32,
    s_lower: f64,
    s_upper: f64,
    kbar: f64,
) -> Result<(f64, f64)> {
    check_degree(d)?;
    if !(kbar > 0.0) || !kbar.is_finite() {
        return input(format!("kbar must be positive, got {kbar}"));
    }
    if !(s_lower >= 0.0) || !(s_upper > s_lower) {
        return input(format!("need 0 <= S_L < S_U, got [{s_lower}, {s_upper}]"));
    }
    let inv = if s_upper.is_infinite() {
        0.0
    } else {
        1.0 / s_upper
    };
    Ok((kbar - inv, kbar))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tradeoff {
    pub kappa1: f64,
    pub kappa2: f64,
    /// Common value of the price of anarchy at `S_L` and at `S_U`.
    pub value: f64,
    pub poa_lower: f64,
    pub poa_upper: f64,
}

/// Coefficients equalizing the homogeneous price of anarchy at the two
/// sensitivity bounds with `kappa2 = kbar`, found by bisection on `kappa1`.
pub fn tradeoff_poa_minimizer(d: u32, s_lower: f64, s_upper: f64, kbar: f64) -> Result<Tradeoff> {
    check_degree(d)?;
    if !(s_lower >= 0.0) || !(s_upper > s_lower) || !s_upper.is_finite() {
        return input(format!(
            "need 0 <= S_L < S_U < inf, got [{s_lower}, {s_upper}]"
        ));
    }
    if !(kbar > 0.0) || !kbar.is_finite() {
        return input(format!("kbar must be positive, got {kbar}"));
    }
    let inv = 1.0 / s_upper;
    let g = |k1: f64| -> Result<f64> {
        Ok(poa_homogeneous_closed_form(d, s_lower, k1, kbar)?
            - poa_homogeneous_closed_form(d, s_upper, k1, kbar)?)
    };
    let lo = -inv + 1e-12 * (1.0 + inv);
    let hi = kbar - inv;
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if !(g_lo <= 0.0 && g_hi >= 0.0) {
        return Err(Error::Numerical(format!(
            "no sign change on ({lo}, {hi}): g = {g_lo} .. {g_hi}"
        )));
    }
    let k1 = bisect(lo, hi, |k| g(k).unwrap_or(f64::NAN));
    let poa_lower = poa_homogeneous_closed_form(d, s_lower, k1, kbar)?;
    let poa_upper = poa_homogeneous_closed_form(d, s_upper, k1, kbar)?;
    Ok(Tradeoff {
        kappa1: k1,
        kappa2: kbar,
        value: poa_lower.max(poa_upper),
        poa_lower,
        poa_upper,
    })
}

/// Two-link network `alpha f^d` against the constant 1, demand `r`.
pub fn pigou_network(alpha: f64, d: u32, demand: f64) -> Result<Network> {
    Network::parallel_links(
        vec![
            PolyLatency::monomial(alpha, d as usize)?,
            PolyLatency::constant(1.0)?,
        ],
        demand,
    )
}

/// Empirical price of anarchy over the Pigou family `alpha f^d` vs 1 (unit
/// demand) for a homogeneous population of marginal weight `beta` under
/// marginal-cost tolls. Returns the worst member; a lower bound on the true
/// supremum.
pub fn pigou_family_poa(
    d: u32,
    beta: f64,
    alphas: &[f64],
    config: &SolverConfig,
) -> Result<RatioReport> {
    if alphas.is_empty() {
        return input("empty alpha grid");
    }
    let mech = MechanismSpec::marginal_cost();
    let reports = alphas
        .par_iter()
        .map(|&alpha| {
            let net = pigou_network(alpha, d, 1.0)?;
            let eq = nash_flow_homogeneous(&net, &mech, beta, config)?;
            let opt = optimal_flow(&net, config)?;
            Ok(
                RatioReport::new(eq.total_latency, opt.total_latency, eq.flow, opt.flow)?
                    .with_scenario(format!("pigou-d{d}-alpha{alpha}")),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = reports
        .into_iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .expect("nonempty grid");
    worst.lower_bound = true;
    Ok(worst)
}

/// Pigou coefficient at which marginal weight `beta > 1` attains its worst
/// case: `(beta (1+d))^d / (1 + d beta)^(d+1)`.
pub fn worst_pigou_alpha(d: u32, beta: f64) -> Result<f64> {
    let df = check_degree(d)?;
    if !(beta > 0.0) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok((df * (beta * (1.0 + df)).ln() - (df + 1.0) * (1.0 + df * beta).ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{SensitivityBounds, SensitivityClass};

    #[test]
    fn seam_and_untolled_values() {
        for d in 1..=6 {
            assert!((poa_from_beta(d, 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((poa_from_beta(1, 0.0).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((poa_from_beta(1, 2.0).unwrap() - 9.0 / 8.0).abs() < 1e-12);
        assert!((poa_from_beta(1, 1.0 + 1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(poa_from_beta(64, 0.0).unwrap().is_finite());
        assert!(poa_from_beta(65, 0.0).is_err());
    }

    #[test]
    fn nonperverse_closed_form_domain() {
        assert!(
            (poa_closed_form_nonperverse(1, 0.0, 1.0, 0.5, 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-12
        );
        assert!((poa_closed_form_nonperverse(2, 1.0, 1.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            poa_closed_form_nonperverse(1, 1.0, 2.0, 0.0, 2.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn perversity_closed_form() {
        let v = pi_homogeneous_closed_form(1, 2.0, 0.0, 1.0).unwrap();
        assert!((v - 9.0 / 8.0).abs() < 1e-12);
        let near = pi_homogeneous_closed_form(1, 2.0, 0.5 - 1e-9, 1.0).unwrap();
        assert!((near - 1.0).abs() < 1e-7);
        assert!(pi_homogeneous_closed_form(1, 2.0, 0.6, 1.0).is_err());
        assert!(pi_homogeneous_closed_form(1, 2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn corollary_coefficients() {
        assert_eq!(
            optimal_nonperverse_coefficients(1, 0.1, 2.0, 1.0).unwrap(),
            (0.5, 1.0)
        );
        assert_eq!(
            optimal_nonperverse_coefficients(1, 0.1, f64::INFINITY, 1.0).unwrap(),
            (1.0, 1.0)
        );
    }

    #[test]
    fn tradeoff_balances_bounds() {
        let t = tradeoff_poa_minimizer(1, 0.5, 2.0, 1.0).unwrap();
        assert!((t.poa_lower - t.poa_upper).abs() <= 1e-8);
        assert!(t.value > 1.0 + 1e-6);
        assert!(t.kappa1 > -0.5 && t.kappa1 < 0.5);
        let close = tradeoff_poa_minimizer(1, 1.999, 2.0, 1.0).unwrap();
        assert!(close.value - 1.0 < 1e-3);
        assert!((close.kappa1 - 0.5).abs() < 1e-2);
    }

    #[test]
    fn lemma_witness_alpha() {
        assert!((worst_pigou_alpha(1, 2.0).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        let net = pigou_network(4.0 / 9.0, 1, 1.0).unwrap();
        let cfg = SolverConfig::default();
        let eq = nash_flow_homogeneous(&net, &MechanismSpec::marginal_cost(), 2.0, &cfg).unwrap();
        assert!((eq.flow.path_totals()[0] - 0.75).abs() < 1e-9);
        assert!((eq.total_latency - 0.5).abs() < 1e-9);
        let opt = optimal_flow(&net, &cfg).unwrap();
        assert!((opt.total_latency - 4.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn pigou_ratios() {
        let cfg = SolverConfig::default();
        let net = pigou_network(1.0, 1, 1.0).unwrap();
        let pop = Population::homogeneous(1.0, 1.0).unwrap();
        let poa = poa_instance(&net, &MechanismSpec::zero(), &pop, &cfg, false).unwrap();
        assert!((poa.ratio - 4.0 / 3.0).abs() < 1e-9);
        let mc = poa_instance(&net, &MechanismSpec::marginal_cost(), &pop, &cfg, false).unwrap();
        assert!((mc.ratio - 1.0).abs() < 1e-9);
        let pi = pi_instance(&net, &MechanismSpec::zero(), &pop, &cfg, false).unwrap();
        assert_eq!(pi.ratio, 1.0);
        let pop = Population::new(
            vec![
                SensitivityClass {
                    mass: 0.5,
                    sensitivity: 0.5,
                },
                SensitivityClass {
                    mass: 0.5,
                    sensitivity: 2.0,
                },
            ],
            SensitivityBounds::new(0.5, 2.0).unwrap(),
        )
        .unwrap();
        let pi = pi_instance(&net, &MechanismSpec::zero(), &pop, &cfg, false).unwrap();
        assert!((pi.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pigou_family_reaches_untolled_bound() {
        let alphas: Vec<f64> = (0..200).map(|i| 0.5 + i as f64 * 0.005).collect();
        let r = pigou_family_poa(1, 0.0, &alphas, &SolverConfig::default()).unwrap();
        assert!(r.lower_bound);
        assert!((r.ratio - 4.0 / 3.0).abs() < 1e-9);
    }
}

//! Network-agnostic taxation mechanisms: each maps an edge's latency function
//! to a toll function without looking at the rest of the network.

use serde::{Deserialize, Serialize};

use crate::error::{domain, input, Result};
use crate::game::{Network, PolyLatency, SensitivityBounds, TollFunction, TollSchedule};

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// No tolls.
    Zero,
    /// Constant per-edge tolls `q_e >= 0`. Depends on the network, so it is not
    /// network-agnostic; it exists only as a comparison baseline.
    Fixed(Vec<f64>),
    /// `tau(f) = f l'(f)`.
    MarginalCost,
    /// `tau(f) = kappa1 l(f) + kappa2 f l'(f)`.
    Generalized { kappa1: f64, kappa2: f64 },
}

/// A mechanism plus an optional cap `kmax` on its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismJson", into = "MechanismJson")]
pub struct MechanismSpec {
    pub mechanism: Mechanism,
    pub kmax: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MechanismJson {
    variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixed: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kmax: Option<f64>,
}

impl TryFrom<MechanismJson> for MechanismSpec {
    type Error = crate::Error;

    fn try_from(j: MechanismJson) -> Result<Self> {
        let mechanism =
            match j.variant.as_str() {
                "zero" => Mechanism::Zero,
                "mc" => Mechanism::MarginalCost,
                "gmc" => Mechanism::Generalized {
                    kappa1: j.kappa1.unwrap_or(0.0),
                    kappa2: j.kappa2.ok_or_else(|| {
                        crate::Error::Input("kappa2: required for variant gmc".into())
                    })?,
                },
                "fixed" => Mechanism::Fixed(j.fixed.ok_or_else(|| {
                    crate::Error::Input("fixed: required for variant fixed".into())
                })?),
                other => {
                    return input(format!(
                        "variant: unknown mechanism `{other}` (expected zero, fixed, mc or gmc)"
                    ))
                }
            };
        let spec = MechanismSpec::new(mechanism)?;
        match j.kmax {
            Some(k) => spec.with_kmax(k),
            None => Ok(spec),
        }
    }
}

impl From<MechanismSpec> for MechanismJson {
    fn from(m: MechanismSpec) -> Self {
        let mut j = MechanismJson {
            variant: String::new(),
            kappa1: None,
            kappa2: None,
            fixed: None,
            kmax: m.kmax,
        };
        match m.mechanism {
            Mechanism::Zero => j.variant = "zero".into(),
            Mechanism::MarginalCost => j.variant = "mc".into(),
            Mechanism::Fixed(q) => {
                j.variant = "fixed".into();
                j.fixed = Some(q);
            }
            Mechanism::Generalized { kappa1, kappa2 } => {
                j.variant = "gmc".into();
                j.kappa1 = Some(kappa1);
                j.kappa2 = Some(kappa2);
            }
        }
        j
    }
}

impl MechanismSpec {
    pub fn new(mechanism: Mechanism) -> Result<Self> {
        match &mechanism {
            Mechanism::Fixed(q) => {
                if let Some(i) = q.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return input(format!(
                        "fixed[{i}]: toll {} must be finite and nonnegative",
                        q[i]
                    ));
                }
            }
            Mechanism::Generalized { kappa1, kappa2 }
                if !kappa1.is_finite() || !kappa2.is_finite() =>
            {
                return input("kappa1/kappa2 must be finite");
            }
            _ => {}
        }
        Ok(Self {
            mechanism,
            kmax: None,
        })
    }

    pub fn zero() -> Self {
        Self {
            mechanism: Mechanism::Zero,
            kmax: None,
        }
    }

    pub fn marginal_cost() -> Self {
        Self {
            mechanism: Mechanism::MarginalCost,
            kmax: None,
        }
    }

    /// Unchecked generalized marginal-cost tolls; any finite coefficients.
    pub fn generalized(kappa1: f64, kappa2: f64) -> Result<Self> {
        Self::new(Mechanism::Generalized { kappa1, kappa2 })
    }

    pub fn fixed(tolls: Vec<f64>) -> Result<Self> {
        Self::new(Mechanism::Fixed(tolls))
    }

    /// Generalized tolls restricted to the non-perverse region for `bounds`:
    /// `kappa1 > -1/S_U`, `0 <= kappa2 <= kappa1 + 1/S_U`.
    pub fn non_perverse(kappa1: f64, kappa2: f64, bounds: SensitivityBounds) -> Result<Self> {
        let spec = Self::generalized(kappa1, kappa2)?;
        if !spec.is_non_perverse(bounds) {
            return domain(format!(
                "T({kappa1}, {kappa2}) is outside the non-perverse region for S_U = {}",
                bounds.upper
            ));
        }
        Ok(spec)
    }

    /// Attaches a coefficient cap; errors if a coefficient already exceeds it.
    pub fn with_kmax(mut self, kmax: f64) -> Result<Self> {
        if !(kmax > 0.0) || !kmax.is_finite() {
            return input(format!("kmax: must be positive and finite, got {kmax}"));
        }
        if let Some((k1, k2)) = self.kappa() {
            if k1 > kmax || k2 > kmax {
                return domain(format!("coefficients ({k1}, {k2}) exceed kmax = {kmax}"));
            }
        }
        self.kmax = Some(kmax);
        Ok(self)
    }

    /// `(kappa1, kappa2)` for the flow-proportional families; `None` for fixed tolls.
    pub fn kappa(&self) -> Option<(f64, f64)> {
        match self.mechanism {
            Mechanism::Zero => Some((0.0, 0.0)),
            Mechanism::MarginalCost => Some((0.0, 1.0)),
            Mechanism::Generalized { kappa1, kappa2 } => Some((kappa1, kappa2)),
            Mechanism::Fixed(_) => None,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self.mechanism, Mechanism::Fixed(_))
    }

    pub fn is_non_perverse(&self, bounds: SensitivityBounds) -> bool {
        match self.kappa() {
            Some((k1, k2)) => {
                let inv = bounds.inv_upper();
                k1 > -inv && k2 >= 0.0 && k2 <= k1 + inv
            }
            None => false,
        }
    }

    /// Induced marginal weight `beta(s)` for a user of sensitivity `s`.
    pub fn beta(&self, s: f64) -> Result<f64> {
        match self.kappa() {
            Some((k1, k2)) => effective_sensitivity_beta(s, k1, k2),
            None => domain("fixed tolls have no marginal weight"),
        }
    }

    /// Positive factor `1 + kappa1 s` relating a user's true cost to its
    /// normalized cost `l + beta f l'`. Equal to 1 for fixed tolls.
    pub fn cost_scale(&self, s: f64) -> Result<f64> {
        match self.kappa() {
            Some((k1, _)) => {
                let scale = 1.0 + k1 * s;
                if !(scale > 0.0) {
                    return domain(format!("1 + kappa1 s = {scale} is not positive"));
                }
                Ok(scale)
            }
            None => Ok(1.0),
        }
    }
}

/// Toll functions for every edge of `network`. For all variants except
/// `Fixed`, the toll on an edge is a function of that edge's latency alone.
pub fn derive_tolls(mechanism: &MechanismSpec, network: &Network) -> Result<TollSchedule> {
    let tolls = match &mechanism.mechanism {
        Mechanism::Fixed(q) => {
            if q.len() != network.num_edges() {
                return input(format!(
                    "fixed: {} tolls given for {} edges",
                    q.len(),
                    network.num_edges()
                ));
            }
            q.iter()
                .map(|&value| TollFunction::Constant { value })
                .collect()
        }
        _ => network
            .edges()
            .iter()
            .map(|e| edge_toll(mechanism, &e.latency))
            .collect(),
    };
    Ok(TollSchedule::new(tolls))
}

/// Toll assigned to a single latency function. Panics on `Fixed`, which has no
/// latency-only form.
pub fn edge_toll(mechanism: &MechanismSpec, latency: &PolyLatency) -> TollFunction {
    match mechanism.mechanism {
        Mechanism::Zero => TollFunction::Constant { value: 0.0 },
        Mechanism::MarginalCost => TollFunction::Scaled {
            kappa1: 0.0,
            kappa2: 1.0,
            latency: latency.clone(),
        },
        Mechanism::Generalized { kappa1, kappa2 } => TollFunction::Scaled {
            kappa1,
            kappa2,
            latency: latency.clone(),
        },
        Mechanism::Fixed(_) => panic!("fixed tolls depend on the network, not on the latency"),
    }
}

/// `beta(s, kappa) = kappa2 s / (1 + kappa1 s)`: how strongly a user with
/// sensitivity `s` weighs its marginal effect on others under `T(kappa1, kappa2)`.
///
/// `s = +inf` returns the limit `kappa2 / kappa1`, which requires `kappa1 > 0`.
pub fn effective_sensitivity_beta(s: f64, kappa1: f64, kappa2: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return domain(format!("sensitivity {s} must be nonnegative"));
    }
    if s.is_infinite() {
        if kappa1 <= 0.0 {
            return domain(format!(
                "beta at infinite sensitivity needs kappa1 > 0, got {kappa1}"
            ));
        }
        return Ok(kappa2 / kappa1);
    }
    let denom = 1.0 + kappa1 * s;
    if !(denom > 0.0) {
        return domain(format!(
            "1 + kappa1 s = {denom} is not positive (kappa1 = {kappa1}, s = {s})"
        ));
    }
    Ok(kappa2 * s / denom)
}

/// Per-edge cost `l + beta f l'` for a user of sensitivity `s`; a positive
/// rescaling of `l + s tau` that leaves Nash flows unchanged.
pub fn normalized_cost_function(
    latency: &PolyLatency,
    s: f64,
    mechanism: &MechanismSpec,
) -> Result<PolyLatency> {
    let beta = mechanism.beta(s)?;
    if beta < 0.0 {
        return domain(format!("negative marginal weight {beta} (kappa2 < 0)"));
    }
    latency.with_marginal_weight(beta)
}

/// Normalized per-edge cost polynomials for a user of sensitivity `s`. Fixed
/// tolls give `l_e + s q_e` without rescaling.
pub fn normalized_edge_costs(
    network: &Network,
    mechanism: &MechanismSpec,
    s: f64,
) -> Result<Vec<PolyLatency>> {
    match &mechanism.mechanism {
        Mechanism::Fixed(q) => {
            if q.len() != network.num_edges() {
                return input(format!(
                    "fixed: {} tolls given for {} edges",
                    q.len(),
                    network.num_edges()
                ));
            }
            network
                .edges()
                .iter()
                .zip(q)
                .map(|(e, &qe)| e.latency.shifted(s * qe))
                .collect()
        }
        _ => network
            .edges()
            .iter()
            .map(|e| normalized_cost_function(&e.latency, s, mechanism))
            .collect(),
    }
}

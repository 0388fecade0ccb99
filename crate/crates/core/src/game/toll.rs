use serde::Serialize;

use super::latency::horner;
use super::PolyLatency;

/// A per-edge toll as a function of edge flow. Tolls may be negative (subsidies).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TollFunction {
    /// `kappa1 * l(f) + kappa2 * f * l'(f)`.
    Scaled {
        kappa1: f64,
        kappa2: f64,
        latency: PolyLatency,
    },
    /// Explicit polynomial with coefficients of any sign.
    Polynomial { coeffs: Vec<f64> },
    /// Flow-independent toll.
    Constant { value: f64 },
}

impl TollFunction {
    pub fn eval(&self, f: f64) -> f64 {
        match self {
            TollFunction::Scaled {
                kappa1,
                kappa2,
                latency,
            } => kappa1 * latency.eval(f) + kappa2 * latency.marginal_part(f),
            TollFunction::Polynomial { coeffs } => horner(coeffs, f),
            TollFunction::Constant { value } => *value,
        }
    }

    pub fn derivative(&self, f: f64) -> f64 {
        match self {
            TollFunction::Scaled {
                kappa1,
                kappa2,
                latency,
            } => {
                // d/df [f l'(f)] = l'(f) + f l''(f)
                let marginal = PolyLatency::new(latency.marginal_coeffs())
                    .expect("k * a_k of nonnegative coefficients is nonnegative");
                kappa1 * latency.derivative(f) + kappa2 * marginal.derivative(f)
            }
            TollFunction::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for k in (1..coeffs.len()).rev() {
                    acc = acc * f + k as f64 * coeffs[k];
                }
                acc
            }
            TollFunction::Constant { .. } => 0.0,
        }
    }
}

/// Toll functions for every edge of one network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TollSchedule {
    tolls: Vec<TollFunction>,
}

impl TollSchedule {
    pub fn new(tolls: Vec<TollFunction>) -> Self {
        Self { tolls }
    }

    /// Identically zero tolls on `n` edges.
    pub fn zero(n: usize) -> Self {
        Self {
            tolls: vec![TollFunction::Constant { value: 0.0 }; n],
        }
    }

    pub fn tolls(&self) -> &[TollFunction] {
        &self.tolls
    }

    pub fn len(&self) -> usize {
        self.tolls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tolls.is_empty()
    }

    pub fn eval(&self, edge: usize, f: f64) -> f64 {
        self.tolls[edge].eval(f)
    }

    pub fn toll(&self, edge: usize) -> &TollFunction {
        &self.tolls[edge]
    }
}

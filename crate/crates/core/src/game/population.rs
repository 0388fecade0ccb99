use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{input, Result};

/// Sensitivity range `[S_L, S_U]`. `upper` may be `f64::INFINITY`, which
/// serializes as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBounds {
    pub lower: f64,
    pub upper: f64,
}

impl SensitivityBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower >= 0.0) || !lower.is_finite() {
            return input(format!(
                "bounds: lower bound {lower} must be finite and nonnegative"
            ));
        }
        if !(upper >= lower) || upper.is_nan() {
            return input(format!(
                "bounds: upper bound {upper} is below lower bound {lower}"
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded_above(lower: f64) -> Result<Self> {
        Self::new(lower, f64::INFINITY)
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lower && s <= self.upper
    }

    /// `1 / S_U`, with `0` for the unbounded case.
    pub fn inv_upper(&self) -> f64 {
        if self.upper.is_infinite() {
            0.0
        } else {
            1.0 / self.upper
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityClass {
    pub mass: f64,
    pub sensitivity: f64,
}

/// A finite mix of toll-sensitivity classes, sorted by sensitivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    classes: Vec<SensitivityClass>,
    bounds: SensitivityBounds,
    allow_insensitive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub bounds: [BoundValue; 2],
    pub classes: Vec<SensitivityClass>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_insensitive: bool,
}

/// A bound in JSON: a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValue {
    Number(f64),
    Text(InfMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfMarker {
    #[serde(rename = "inf")]
    Inf,
}

impl BoundValue {
    fn value(self) -> f64 {
        match self {
            BoundValue::Number(x) => x,
            BoundValue::Text(InfMarker::Inf) => f64::INFINITY,
        }
    }

    fn from_value(x: f64) -> Self {
        if x.is_infinite() {
            BoundValue::Text(InfMarker::Inf)
        } else {
            BoundValue::Number(x)
        }
    }
}

impl Population {
    /// Classes must have finite sensitivities inside `bounds`. A class with
    /// sensitivity exactly 0 must carry zero mass; see [`Population::with_insensitive`].
    pub fn new(classes: Vec<SensitivityClass>, bounds: SensitivityBounds) -> Result<Self> {
        Self::build(classes, bounds, false)
    }

    /// Like [`Population::new`] but admits positive mass at sensitivity 0, as
    /// in the totally insensitive baseline or the simplified worked examples.
    pub fn with_insensitive(
        classes: Vec<SensitivityClass>,
        bounds: SensitivityBounds,
    ) -> Result<Self> {
        Self::build(classes, bounds, true)
    }

    /// One class of mass `mass` at sensitivity `s`, with bounds `[s, s]`.
    pub fn homogeneous(mass: f64, s: f64) -> Result<Self> {
        let bounds = SensitivityBounds::new(s, s)?;
        Self::build(
            vec![SensitivityClass {
                mass,
                sensitivity: s,
            }],
            bounds,
            true,
        )
    }

    fn build(
        mut classes: Vec<SensitivityClass>,
        bounds: SensitivityBounds,
        allow_insensitive: bool,
    ) -> Result<Self> {
        if classes.is_empty() {
            return input("classes: population has no classes");
        }
        for (i, c) in classes.iter().enumerate() {
            if !(c.mass >= 0.0) || !c.mass.is_finite() {
                return input(format!(
                    "classes[{i}].mass: {} must be finite and nonnegative",
                    c.mass
                ));
            }
            if !c.sensitivity.is_finite() {
                return input(format!(
                    "classes[{i}].sensitivity: class sensitivities must be finite (only bounds may be infinite)"
                ));
            }
            if !bounds.contains(c.sensitivity) {
                return input(format!(
                    "classes[{i}].sensitivity: {} outside bounds [{}, {}]",
                    c.sensitivity, bounds.lower, bounds.upper
                ));
            }
            if c.sensitivity == 0.0 && c.mass > 0.0 && !allow_insensitive {
                return input(format!(
                    "classes[{i}]: positive mass at sensitivity 0 requires allow_insensitive"
                ));
            }
        }
        if classes.iter().all(|c| c.mass == 0.0) {
            return input("classes: total mass is zero");
        }
        classes.sort_by(|a, b| a.sensitivity.total_cmp(&b.sensitivity));
        Ok(Self {
            classes,
            bounds,
            allow_insensitive,
        })
    }

    pub fn classes(&self) -> &[SensitivityClass] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn bounds(&self) -> SensitivityBounds {
        self.bounds
    }

    pub fn total_mass(&self) -> f64 {
        self.classes.iter().map(|c| c.mass).sum()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.classes.iter().filter(|c| c.mass > 0.0).count() == 1
    }

    pub fn allows_insensitive(&self) -> bool {
        self.allow_insensitive
    }

    /// Sensitivity of the least sensitive class with positive mass.
    pub fn min_sensitivity(&self) -> f64 {
        self.classes
            .iter()
            .find(|c| c.mass > 0.0)
            .map(|c| c.sensitivity)
            .expect("population has positive mass")
    }

    /// Same classes under different bounds.
    pub fn with_bounds(&self, bounds: SensitivityBounds) -> Result<Self> {
        Self::build(self.classes.clone(), bounds, self.allow_insensitive)
    }

    /// Errors unless the class masses add up to the network demand.
    pub fn check_demand(&self, network: &Network) -> Result<()> {
        let total = self.total_mass();
        let r = network.demand();
        if (total - r).abs() > 1e-9 * (1.0 + r) {
            return input(format!(
                "population mass {total} does not match network demand {r}"
            ));
        }
        Ok(())
    }

    pub fn to_spec(&self) -> PopulationSpec {
        PopulationSpec {
            bounds: [
                BoundValue::from_value(self.bounds.lower),
                BoundValue::from_value(self.bounds.upper),
            ],
            classes: self.classes.clone(),
            allow_insensitive: self.allow_insensitive
                && self
                    .classes
                    .iter()
                    .any(|c| c.sensitivity == 0.0 && c.mass > 0.0),
        }
    }

    pub fn from_spec(spec: PopulationSpec) -> Result<Self> {
        let bounds = SensitivityBounds::new(spec.bounds[0].value(), spec.bounds[1].value())?;
        Self::build(spec.classes, bounds, spec.allow_insensitive)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PopulationSpec = serde_json::from_str(text)
            .map_err(|e| crate::Error::Input(format!("population: {e}")))?;
        Self::from_spec(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("population spec serializes")
    }
}

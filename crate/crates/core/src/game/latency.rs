use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Polynomial latency `a_0 + a_1 f + ... + a_d f^d` with nonnegative coefficients.
///
/// Nonnegative coefficients make the latency nondecreasing, convex and
/// continuously differentiable on `[0, inf)`. The coefficient list is kept in
/// canonical form: trailing zeros are trimmed, so `degree()` is the true degree
/// (the zero polynomial has degree 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolyLatency {
    coeffs: Vec<f64>,
}

impl PolyLatency {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return input("coefficient list is empty");
        }
        for (k, &a) in coeffs.iter().enumerate() {
            if !a.is_finite() {
                return input(format!("coefficient a_{k} = {a} is not finite"));
            }
            if a < 0.0 {
                return input(format!("coefficient a_{k} = {a} is negative"));
            }
        }
        Ok(Self {
            coeffs: trim(coeffs),
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![c])
    }

    /// `alpha * f^d`.
    pub fn monomial(alpha: f64, d: usize) -> Result<Self> {
        let mut coeffs = vec![0.0; d + 1];
        coeffs[d] = alpha;
        Self::new(coeffs)
    }

    /// `f`, the identity latency.
    pub fn linear() -> Self {
        Self {
            coeffs: vec![0.0, 1.0],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn eval(&self, f: f64) -> f64 {
        horner(&self.coeffs, f)
    }

    /// `l'(f)`, evaluated from the symbolic derivative.
    pub fn derivative(&self, f: f64) -> f64 {
        let mut acc = 0.0;
        for k in (1..self.coeffs.len()).rev() {
            acc = acc * f + k as f64 * self.coeffs[k];
        }
        acc
    }

    /// `f * l'(f)`, the marginal externality a unit of flow imposes on the edge.
    pub fn marginal_part(&self, f: f64) -> f64 {
        horner(&self.marginal_coeffs(), f)
    }

    /// `l(f) + f l'(f)`, the marginal cost of the edge.
    pub fn marginal_cost(&self, f: f64) -> f64 {
        self.eval(f) + self.marginal_part(f)
    }

    /// Coefficients of `f * l'(f)`, i.e. `k * a_k` at power `k`.
    pub fn marginal_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| k as f64 * a)
            .collect()
    }

    /// `l(f) + beta * f l'(f)` as a new latency polynomial. Requires `beta >= 0`.
    pub fn with_marginal_weight(&self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return input(format!(
                "marginal weight {beta} must be finite and nonnegative"
            ));
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| a * (1.0 + beta * k as f64))
                .collect(),
        )
    }

    /// Adds a constant to the intercept.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += c;
        Self::new(coeffs)
    }

    /// `int_0^f l(u) du`.
    pub fn integral(&self, f: f64) -> f64 {
        let mut acc = 0.0;
        for k in (0..self.coeffs.len()).rev() {
            acc = acc * f + self.coeffs[k] / (k + 1) as f64;
        }
        acc * f
    }

    /// Sum of two latencies (edges in series).
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
            .collect();
        Self {
            coeffs: trim(coeffs),
        }
    }

    /// Upper bound on `|l'(f)|` over `[0, upper]`; attained at `upper` for nonnegative coefficients.
    pub fn max_slope(&self, upper: f64) -> f64 {
        self.derivative(upper.max(0.0))
    }
}

impl TryFrom<Vec<f64>> for PolyLatency {
    type Error = crate::Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs)
    }
}

impl From<PolyLatency> for Vec<f64> {
    fn from(p: PolyLatency) -> Self {
        p.coeffs
    }
}

pub(crate) fn horner(coeffs: &[f64], f: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * f + a)
}

fn trim(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_empty() {
        assert!(PolyLatency::new(vec![]).is_err());
        assert!(PolyLatency::new(vec![1.0, -0.5]).is_err());
        assert!(PolyLatency::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn canonical_degree() {
        let p = PolyLatency::new(vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.degree(), 1);
        assert_eq!(PolyLatency::new(vec![0.0, 0.0]).unwrap().degree(), 0);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let p = PolyLatency::new(vec![0.3, 1.2, 0.0, 0.7]).unwrap();
        for i in 0..10 {
            let f = 0.1 + 0.3 * i as f64;
            let h = 1e-6;
            let fd = (p.eval(f + h) - p.eval(f - h)) / (2.0 * h);
            assert!((p.derivative(f) - fd).abs() < 1e-6, "f={f}");
        }
    }

    #[test]
    fn integral_matches_trapezoid() {
        let p = PolyLatency::new(vec![1.0, 0.5, 2.0]).unwrap();
        let n = 20000;
        let x = 1.7;
        let h = x / n as f64;
        let mut s = 0.5 * (p.eval(0.0) + p.eval(x));
        for i in 1..n {
            s += p.eval(i as f64 * h);
        }
        assert!((p.integral(x) - s * h).abs() < 1e-7);
    }

    #[test]
    fn marginal_weight_on_monomial() {
        // alpha f^d with weight beta becomes alpha (1 + beta d) f^d
        let p = PolyLatency::monomial(2.0, 3).unwrap();
        let q = p.with_marginal_weight(0.5).unwrap();
        assert_eq!(q.coeffs(), &[0.0, 0.0, 0.0, 5.0]);
        assert!((p.marginal_cost(1.5) - (p.eval(1.5) + 1.5 * p.derivative(1.5))).abs() < 1e-12);
    }

    #[test]
    fn serde_as_plain_list() {
        let p: PolyLatency = serde_json::from_str("[1, 0, 2]").unwrap();
        assert_eq!(p.degree(), 2);
        assert!(serde_json::from_str::<PolyLatency>("[1, -1]").is_err());
    }
}

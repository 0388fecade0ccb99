//! Levenberg-Marquardt on the Fischer-Burmeister form of the parallel-network
//! equilibrium conditions: for every class `c` and path `p`,
//! `x_cp >= 0`, `C_cp(t_p) - lambda_c >= 0` and their product is zero, with
//! `sum_p x_cp = m_c`. Converges locally in a few steps; the best-response
//! iterates supply the start.

use nalgebra::{DMatrix, DVector};

use crate::game::PolyLatency;

fn fb(a: f64, b: f64) -> (f64, f64, f64) {
    let rho = a.hypot(b);
    if rho == 0.0 {
        let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        return (0.0, g, g);
    }
    (a + b - rho, 1.0 - a / rho, 1.0 - b / rho)
}

struct System<'a> {
    /// Class-by-path cost polynomials in the path's total flow.
    polys: &'a [Vec<PolyLatency>],
    masses: &'a [f64],
    active: Vec<usize>,
    n: usize,
}

impl System<'_> {
    fn unknowns(&self) -> usize {
        self.active.len() * (self.n + 1)
    }

    fn totals(&self, z: &DVector<f64>) -> Vec<f64> {
        let mut t = vec![0.0; self.n];
        for k in 0..self.active.len() {
            for (p, tp) in t.iter_mut().enumerate() {
                *tp += z[k * self.n + p];
            }
        }
        t
    }

    fn residual(&self, z: &DVector<f64>, jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
        let (n, k_count) = (self.n, self.active.len());
        let lambda0 = k_count * n;
        let t = self.totals(z);
        let mut r = DVector::zeros(self.unknowns());
        let mut j = jac;
        for (k, &c) in self.active.iter().enumerate() {
            let mut mass = -self.masses[c];
            for p in 0..n {
                let x = z[k * n + p];
                let cost = self.polys[c][p].eval(t[p]);
                let (phi, da, db) = fb(x, cost - z[lambda0 + k]);
                let row = k * n + p;
                r[row] = phi;
                if let Some(m) = j.as_deref_mut() {
                    let slope = self.polys[c][p].derivative(t[p]);
                    for kk in 0..k_count {
                        m[(row, kk * n + p)] = db * slope;
                    }
                    m[(row, row)] += da;
                    m[(row, lambda0 + k)] = -db;
                }
                mass += x;
            }
            r[lambda0 + k] = mass;
            if let Some(m) = j.as_deref_mut() {
                for p in 0..n {
                    m[(lambda0 + k, k * n + p)] = 1.0;
                }
            }
        }
        r
    }
}

/// Polishes `flows` (class by path) toward an exact equilibrium of the costs
/// `polys[c][p](t_p)`. Returns the polished flows, clamped to be nonnegative
/// with exact class masses.
pub(crate) fn polish(
    polys: &[Vec<PolyLatency>],
    masses: &[f64],
    flows: &[Vec<f64>],
    max_steps: usize,
) -> Vec<Vec<f64>> {
    let n = flows.first().map_or(0, Vec::len);
    let active: Vec<usize> = (0..masses.len()).filter(|&c| masses[c] > 0.0).collect();
    let sys = System {
        polys,
        masses,
        active,
        n,
    };
    let size = sys.unknowns();
    let mut z = DVector::zeros(size);
    let mut t = vec![0.0; n];
    for &c in &sys.active {
        for p in 0..n {
            t[p] += flows[c][p];
        }
    }
    for (k, &c) in sys.active.iter().enumerate() {
        for p in 0..n {
            z[k * n + p] = flows[c][p];
        }
        z[sys.active.len() * n + k] = (0..n)
            .map(|p| polys[c][p].eval(t[p]))
            .fold(f64::INFINITY, f64::min);
    }

    let mut jac = DMatrix::zeros(size, size);
    let mut r = sys.residual(&z, Some(&mut jac));
    let mut merit = r.norm_squared();
    let mut mu = 1e-6;
    for _ in 0..max_steps {
        if merit < 1e-30 {
            break;
        }
        let jt = jac.transpose();
        let normal = &jt * &jac + DMatrix::identity(size, size) * mu;
        let Some(step) = normal.cholesky().map(|ch| ch.solve(&(-(&jt * &r)))) else {
            mu *= 10.0;
            continue;
        };
        let trial = &z + &step;
        let mut trial_jac = DMatrix::zeros(size, size);
        let trial_r = sys.residual(&trial, Some(&mut trial_jac));
        let trial_merit = trial_r.norm_squared();
        if trial_merit < merit {
            z = trial;
            r = trial_r;
            jac = trial_jac;
            merit = trial_merit;
            mu = (mu / 4.0).max(1e-14);
        } else {
            mu *= 8.0;
            if mu > 1e12 {
                break;
            }
        }
    }

    let mut out = vec![vec![0.0; n]; masses.len()];
    for (k, &c) in sys.active.iter().enumerate() {
        let row: Vec<f64> = (0..n).map(|p| z[k * n + p].max(0.0)).collect();
        let total: f64 = row.iter().sum();
        out[c] = if total > 0.0 {
            row.iter().map(|x| x * masses[c] / total).collect()
        } else {
            flows[c].clone()
        };
    }
    out
}

//! Markovian lift: the mixing measure truncated to n reversion speeds.
//!
//! ```text
//! η_i = η̄ i / n^β,  i = 0..n
//! c_i = π((η_{i−1}, η_i]),   λ_i = (1/c_i) ∫_{η_{i−1}}^{η_i} λ π(dλ)
//! c_{n+1} = π((η_n, ∞))      (infinite decay rate, not part of the dynamics)
//! ```

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, MixingParams, QuadConfig, SupOUModel};
use crate::special;

/// Finite-dimensional surrogate of the mixing measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovianLift {
    pub n: usize,
    pub beta: f64,
    /// 1/h.
    pub eta_bar: f64,
    /// η_0..η_n.
    pub mesh: Vec<f64>,
    /// c_1..c_n.
    pub weights: Vec<f64>,
    /// c_{n+1}.
    pub tail_weight: f64,
    /// λ_1..λ_n, 1/h.
    pub rates: Vec<f64>,
}

/// Lift parameters with the usual defaults (n = 160, β = 0.5, η̄ = 0.02 1/h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftSpec {
    pub n: usize,
    pub beta: f64,
    pub eta_bar: f64,
}

impl Default for LiftSpec {
    fn default() -> Self {
        Self {
            n: 160,
            beta: 0.5,
            eta_bar: 0.02,
        }
    }
}

impl LiftSpec {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn build(&self, mixing: &MixingParams) -> Result<MarkovianLift> {
        build_lift(mixing, self.n, self.beta, self.eta_bar)
    }
}

/// Builds the lift with closed-form incomplete-gamma cell integrals.
pub fn build_lift(mixing: &MixingParams, n: usize, beta: f64, eta_bar: f64) -> Result<MarkovianLift> {
    mixing.validate()?;
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param("beta", format!("must lie in (0, 1), got {beta}")));
    }
    if !(eta_bar > 0.0 && eta_bar.is_finite()) {
        return Err(Error::param("eta_bar", format!("must be > 0, got {eta_bar}")));
    }
    let a = mixing.alpha_pi;
    let bp = mixing.b_pi;
    let h = eta_bar / (n as f64).powf(beta);
    let mesh: Vec<f64> = (0..=n).map(|i| h * i as f64).collect();
    let mut weights = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for i in 1..=n {
        let (lo, hi) = (mesh[i - 1] / bp, mesh[i] / bp);
        let c = special::reg_lower_diff(a, lo, hi);
        if !(c > 1e-300) {
            return Err(Error::EmptyCell { index: i, mass: c });
        }
        // ∫ λ π(dλ) over the cell = α_π B_π (P(α_π+1, hi) − P(α_π+1, lo))
        let first = a * bp * special::reg_lower_diff(a + 1.0, lo, hi);
        let lam = (first / c).clamp(mesh[i - 1], mesh[i]);
        weights.push(c);
        rates.push(lam);
    }
    let tail_weight = special::reg_upper(a, mesh[n] / bp);
    Ok(MarkovianLift {
        n,
        beta,
        eta_bar,
        mesh,
        weights,
        tail_weight,
        rates,
    })
}

impl MarkovianLift {
    /// Σ c_i/λ_i, the lift's counterpart of the reciprocal moment R.
    pub fn reciprocal_moment(&self) -> f64 {
        self.weights.iter().zip(&self.rates).map(|(c, l)| c / l).sum()
    }

    /// Builds a lift from explicit weights and rates (point masses).
    pub fn from_points(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.len() != rates.len() || weights.is_empty() {
            return Err(Error::param("weights", "weights and rates must be non-empty and equal length"));
        }
        if weights.iter().any(|&c| !(c > 0.0)) || rates.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::param("weights", "weights and rates must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::param("weights", format!("weights sum to {total} > 1")));
        }
        let n = weights.len();
        let mut mesh = vec![0.0];
        mesh.extend(rates.iter().copied());
        Ok(Self {
            n,
            beta: f64::NAN,
            eta_bar: f64::NAN,
            mesh,
            weights,
            tail_weight: (1.0 - total).max(0.0),
            rates,
        })
    }

    /// Writes `i,eta_i,c_i,lambda_i`; row 0 carries the tail weight with λ = inf.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        let mut out = String::from("i,eta_i,c_i,lambda_i\n");
        for i in 0..self.n {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                i + 1,
                self.mesh[i + 1],
                self.weights[i],
                self.rates[i]
            ));
        }
        out.push_str(&format!("{},inf,{:.17e},inf\n", self.n + 1, self.tail_weight));
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Lift error diagnostic
///
/// ```text
/// Ḡ(n) = π((η_n, ∞))/η_n + Σ_i (η_i − η_{i−1})² / λ_i
/// ```
pub fn gbar(lift: &MarkovianLift, mixing: &MixingParams) -> f64 {
    let eta_n = lift.mesh[lift.n];
    let tail = special::reg_upper(mixing.alpha_pi, eta_n / mixing.b_pi) / eta_n;
    let body: f64 = (1..=lift.n)
        .map(|i| {
            let d = lift.mesh[i] - lift.mesh[i - 1];
            d * d / lift.rates[i - 1]
        })
        .sum();
    tail + body
}

/// Log characteristic function of the truncated process (X̲ treated as 0).
pub fn log_charfn_lift(model: &SupOUModel, lift: &MarkovianLift, u: f64, quad: &QuadConfig) -> Result<Complex64> {
    let k = model::jump_kernel(&model.jump, u, quad)?;
    Ok(k * lift.reciprocal_moment())
}

/// |ln φ_X(u) − ln φ_{X_n}(u)|.
pub fn consistency_gap(model: &SupOUModel, lift: &MarkovianLift, u: f64, quad: &QuadConfig) -> Result<f64> {
    if model.mixing.alpha_pi <= 2.0 {
        return Err(Error::Domain(format!(
            "consistency needs alpha_pi > 2, got {}",
            model.mixing.alpha_pi
        )));
    }
    let k = model::jump_kernel(&model.jump, u, quad)?;
    let exact = k * model::reciprocal_moment_quadrature(&model.mixing, quad)?;
    let lifted = k * lift.reciprocal_moment();
    Ok((exact - lifted).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let m = MixingParams { b_pi: 0.5, alpha_pi: 2.5 };
        let l = build_lift(&m, 1, 0.5, 0.7).unwrap();
        assert!((l.weights[0] - special::reg_lower(2.5, 1.4)).abs() < 1e-15);
        assert!(l.rates[0] > 0.0 && l.rates[0] < 0.7);
        assert!((l.weights[0] + l.tail_weight - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gbar_single_cell_closed_form() {
        let m = MixingParams { b_pi: 1.3, alpha_pi: 3.0 };
        let l = build_lift(&m, 1, 0.5, 1.3).unwrap();
        let expect = special::reg_upper(3.0, 1.0) / 1.3 + 1.3 * 1.3 / l.rates[0];
        assert!((gbar(&l, &m) - expect).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_beta() {
        let m = MixingParams { b_pi: 1.0, alpha_pi: 3.0 };
        assert!(build_lift(&m, 4, 1.0, 1.0).is_err());
        assert!(build_lift(&m, 0, 0.5, 1.0).is_err());
    }

    #[test]
    fn empty_cell_reported() {
        let m = MixingParams { b_pi: 1e-4, alpha_pi: 3.0 };
        match build_lift(&m, 4, 0.5, 1e3) {
            Err(Error::EmptyCell { index, .. }) => assert!(index >= 2),
            other => panic!("expected EmptyCell, got {other:?}"),
        }
    }
}

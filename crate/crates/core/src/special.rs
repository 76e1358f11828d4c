//! Special functions and quadrature helpers shared by the model and the lift.
//!
//! Gamma-family functions come from `statrs`; node/weight rules come from
//! `gauss-quad`. This module only adds the thin glue the rest of the crate needs.

use std::num::NonZeroUsize;

use gauss_quad::laguerre::GaussLaguerre;
use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Regularized lower incomplete gamma P(a, x).
pub fn reg_lower(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn reg_upper(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    statrs::function::gamma::gamma_ur(a, x)
}

/// P(a, x2) − P(a, x1) for x1 ≤ x2, taken from whichever tail loses less precision.
pub fn reg_lower_diff(a: f64, x1: f64, x2: f64) -> f64 {
    let p1 = reg_lower(a, x1);
    if p1 < 0.5 {
        reg_lower(a, x2) - p1
    } else {
        reg_upper(a, x1) - reg_upper(a, x2)
    }
}

/// Gauss–Legendre nodes and weights mapped to [0, 1].
#[derive(Debug, Clone)]
pub struct UnitLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitLegendre {
    pub fn new(degree: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(degree.max(1)).unwrap());
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Self { nodes, weights }
    }

    /// Integrates a complex function over [a, b] split into `panels` equal pieces.
    pub fn composite_c<F: Fn(f64) -> Complex64>(&self, a: f64, b: f64, panels: usize, f: F) -> Complex64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..panels {
            let lo = a + h * k as f64;
            let mut part = Complex64::new(0.0, 0.0);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                part += f(lo + h * x) * *w;
            }
            acc += part * h;
        }
        acc
    }
}

/// Generalized Gauss–Laguerre rule for ∫₀^∞ x^α e^{−x} f(x) dx.
pub fn laguerre_rule(degree: usize, alpha: f64) -> Option<Vec<(f64, f64)>> {
    let alpha = gauss_quad::FiniteAboveNegOneF64::new(alpha)?;
    let rule = GaussLaguerre::new(NonZeroUsize::new(degree.max(1)).unwrap(), alpha);
    Some(rule.as_node_weight_pairs().to_vec())
}

/// Adaptive double-exponential quadrature of a complex function, real and
/// imaginary parts separately. Returns the value and the summed error estimate.
pub fn de_complex<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> (Complex64, f64) {
    let re = quadrature::double_exponential::integrate(|x| f(x).re, a, b, tol);
    let im = quadrature::double_exponential::integrate(|x| f(x).im, a, b, tol);
    (
        Complex64::new(re.integral, im.integral),
        re.error_estimate + im.error_estimate,
    )
}

/// ∫₀¹ (e^{ixv} − 1)/v dv divided by x, i.e. a smooth function equal to `i` at x = 0.
///
/// ```text
/// ∫₀¹ (e^{ixv} − 1)/v dv = Ci(|x|) − γ − ln|x| + i·sgn(x)·Si(|x|)
/// ```
///
/// Small |x| uses the power series, moderate |x| a composite Gauss–Legendre rule
/// in v, large |x| the asymptotic expansions of Si and Ci.
pub fn exp_kernel_over_x(x: f64, gl: &UnitLegendre) -> Complex64 {
    let ax = x.abs();
    if ax < 0.5 {
        // Σ_{k≥1} (ix)^k / (k·k!) divided by x
        let mut term = Complex64::new(0.0, 1.0); // (ix)^1 / 1! / x
        let mut sum = term;
        for k in 2..30 {
            term *= Complex64::new(0.0, x) / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        return sum;
    }
    if ax <= 60.0 {
        let panels = (ax / 2.0).ceil() as usize + 1;
        let v = gl.composite_c(0.0, 1.0, panels, |v| {
            let s = (0.5 * x * v).sin();
            Complex64::new(-2.0 * s * s / v, (x * v).sin() / v)
        });
        return v / x;
    }
    let (si, ci) = si_ci_asymptotic(ax);
    let re = ci - EULER_GAMMA - ax.ln();
    let im = si * x.signum();
    Complex64::new(re, im) / x
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Si(x), Ci(x) for large positive x via the auxiliary functions f, g.
fn si_ci_asymptotic(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let mut f = 0.0;
    let mut g = 0.0;
    let mut tf = 1.0 / x; // 0!/x
    let mut tg = 1.0 / x2; // 1!/x²
    for k in 0..12 {
        f += tf;
        g += tg;
        let kf = (2 * k + 1) as f64 * (2 * k + 2) as f64;
        let kg = (2 * k + 2) as f64 * (2 * k + 3) as f64;
        let nf = -tf * kf / x2;
        let ng = -tg * kg / x2;
        if nf.abs() > tf.abs() {
            break;
        }
        tf = nf;
        tg = ng;
    }
    let (s, c) = x.sin_cos();
    let si = std::f64::consts::FRAC_PI_2 - f * c - g * s;
    let ci = f * s - g * c;
    (si, ci)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_gamma_tails_agree() {
        for &(a, x) in &[(2.17, 0.3), (2.17, 5.0), (3.17, 40.0), (0.5, 1e-3)] {
            let s = reg_lower(a, x) + reg_upper(a, x);
            assert!((s - 1.0).abs() < 1e-14, "{a} {x} {s}");
        }
        let d = reg_lower_diff(2.0, 30.0, 31.0);
        let direct = (-30.0f64).exp() * 31.0 - (-31.0f64).exp() * 32.0;
        assert!((d - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn kernel_regimes_join() {
        let gl = UnitLegendre::new(10);
        for &x in &[0.49999, 0.5, 59.999, 60.0, 60.001] {
            let a = exp_kernel_over_x(x, &gl) * x;
            // reference by brute-force composite rule
            let b = gl.composite_c(0.0, 1.0, 4000, |v| {
                Complex64::new(((x * v).cos() - 1.0) / v, (x * v).sin() / v)
            });
            assert!((a - b).norm() < 1e-11, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn kernel_is_odd_symmetric() {
        let gl = UnitLegendre::new(10);
        for &x in &[0.1, 3.0, 100.0] {
            let p = exp_kernel_over_x(x, &gl) * x;
            let m = exp_kernel_over_x(-x, &gl) * (-x);
            assert!((p - m.conj()).norm() < 1e-13);
        }
    }
}

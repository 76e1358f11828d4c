//! supOU model parameters and closed-form quantities.
//!
//! The jump (Lévy) measure and the mixing measure of reversion speeds are
//!
//! ```text
//! ν(dz) = a_ν z^{−1−α_ν} exp(−b_ν z^{p_ν}) dz,            z > 0
//! π(dλ) = λ^{α_π−1} exp(−λ/B_π) / (Γ(α_π) B_π^{α_π}) dλ,  λ > 0
//! ```
//!
//! Rates are per hour throughout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{self, UnitLegendre};
use crate::units::{self, Quantity};

/// Parameters of the generalized tempered stable jump measure ν.
///
/// `a_nu = 0` denotes the null measure (no jumps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMeasureParams {
    pub a_nu: f64,
    pub b_nu: f64,
    pub p_nu: f64,
    pub alpha_nu: f64,
}

impl JumpMeasureParams {
    pub fn new(a_nu: f64, b_nu: f64, p_nu: f64, alpha_nu: f64) -> Result<Self> {
        let j = Self {
            a_nu,
            b_nu,
            p_nu,
            alpha_nu,
        };
        j.validate()?;
        Ok(j)
    }

    /// The measure with no jumps; all moments vanish.
    pub fn null() -> Self {
        Self {
            a_nu: 0.0,
            b_nu: 1.0,
            p_nu: 1.0,
            alpha_nu: 0.0,
        }
    }

    pub fn is_null(&self) -> bool {
        self.a_nu == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_nu >= 0.0 && self.a_nu.is_finite()) {
            return Err(Error::param("a_nu", format!("must be >= 0, got {}", self.a_nu)));
        }
        if !(self.b_nu > 0.0 && self.b_nu.is_finite()) {
            return Err(Error::param("b_nu", format!("must be > 0, got {}", self.b_nu)));
        }
        if !(self.p_nu > 0.0 && self.p_nu.is_finite()) {
            return Err(Error::param("p_nu", format!("must be > 0, got {}", self.p_nu)));
        }
        if !(self.alpha_nu < 1.0 && self.alpha_nu.is_finite()) {
            return Err(Error::param("alpha_nu", format!("must be < 1, got {}", self.alpha_nu)));
        }
        Ok(())
    }
}

/// Gamma mixing measure π of reversion speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    /// Scale, 1/h.
    pub b_pi: f64,
    /// Shape.
    pub alpha_pi: f64,
}

impl MixingParams {
    pub fn new(b_pi: f64, alpha_pi: f64) -> Result<Self> {
        let m = Self { b_pi, alpha_pi };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_pi > 0.0 && self.b_pi.is_finite()) {
            return Err(Error::param("B_pi", format!("must be > 0, got {}", self.b_pi)));
        }
        if !(self.alpha_pi > 1.0 && self.alpha_pi.is_finite()) {
            return Err(Error::param("alpha_pi", format!("must be > 1, got {}", self.alpha_pi)));
        }
        Ok(())
    }

    /// Mean reversion speed α_π B_π.
    pub fn mean_rate(&self) -> f64 {
        self.alpha_pi * self.b_pi
    }

    /// π([0, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        special::reg_lower(self.alpha_pi, x / self.b_pi)
    }

    /// Density of π.
    pub fn density(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        let a = self.alpha_pi;
        ((a - 1.0) * lambda.ln() - lambda / self.b_pi - special::ln_gamma(a) - a * self.b_pi.ln()).exp()
    }
}

/// The supOU model: floor X̲ plus jump and mixing measures. Times in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupOUModel {
    pub x_floor: f64,
    pub jump: JumpMeasureParams,
    pub mixing: MixingParams,
}

impl SupOUModel {
    pub fn new(x_floor: f64, jump: JumpMeasureParams, mixing: MixingParams) -> Result<Self> {
        let m = Self {
            x_floor,
            jump,
            mixing,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_floor >= 0.0 && self.x_floor.is_finite()) {
            return Err(Error::param("x_floor", format!("must be >= 0, got {}", self.x_floor)));
        }
        self.jump.validate()?;
        self.mixing.validate()
    }

    /// Same mixing and floor, jumps removed.
    pub fn without_jumps(&self) -> Self {
        Self {
            jump: JumpMeasureParams::null(),
            ..*self
        }
    }

    pub fn moment(&self, k: u32) -> f64 {
        levy_moment(&self.jump, k).expect("validated model has finite moments")
    }
}

/// Stationary mean, variance, skewness and excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryStats {
    pub ave: f64,
    pub var: f64,
    pub skew: f64,
    pub kurt: f64,
    /// Set when the variance vanishes (null jump measure); skew and kurt are then 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl StationaryStats {
    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }

    /// Builds from (Ave, Std, Skew, Kurt), the layout used in published tables.
    pub fn from_std(ave: f64, std: f64, skew: f64, kurt: f64) -> Self {
        Self {
            ave,
            var: std * std,
            skew,
            kurt,
            degenerate: false,
        }
    }
}

/// Lévy moment M_k = ∫ z^k ν(dz) = (a/p) b^{(α−k)/p} Γ((k−α)/p).
pub fn levy_moment(jump: &JumpMeasureParams, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("moment order must be >= 1".into()));
    }
    let s = (k as f64 - jump.alpha_nu) / jump.p_nu;
    if s <= 0.0 {
        return Err(Error::Domain(format!("Gamma argument {s} <= 0 for k = {k}")));
    }
    if jump.is_null() {
        return Ok(0.0);
    }
    let log_m = jump.a_nu.ln() - jump.p_nu.ln() - s * jump.b_nu.ln() + special::ln_gamma(s);
    Ok(log_m.exp())
}

/// Reciprocal moment R = ∫ λ^{−1} π(dλ) = 1/(B_π(α_π − 1)), in hours.
pub fn reciprocal_moment(mixing: &MixingParams) -> Result<f64> {
    if mixing.alpha_pi <= 1.0 {
        return Err(Error::Domain(format!(
            "alpha_pi = {} <= 1 gives an infinite reciprocal moment",
            mixing.alpha_pi
        )));
    }
    Ok(1.0 / (mixing.b_pi * (mixing.alpha_pi - 1.0)))
}

/// Stationary statistics of the supOU process.
///
/// ```text
/// Ave = X̲ + R M₁,  Var = R M₂/2,  Skew = R M₃/(3 Var^{3/2}),  Kurt = R M₄/(4 Var²)
/// ```
pub fn stationary_stats(model: &SupOUModel) -> Result<StationaryStats> {
    let r = reciprocal_moment(&model.mixing)?;
    let m: Vec<f64> = (1..=4).map(|k| levy_moment(&model.jump, k)).collect::<Result<_>>()?;
    let ave = model.x_floor + r * m[0];
    let var = r * m[1] / 2.0;
    if var <= 0.0 {
        return Ok(StationaryStats {
            ave,
            var: 0.0,
            skew: 0.0,
            kurt: 0.0,
            degenerate: true,
        });
    }
    Ok(StationaryStats {
        ave,
        var,
        skew: r * m[2] / (3.0 * var.powf(1.5)),
        kurt: r * m[3] / (4.0 * var * var),
        degenerate: false,
    })
}

/// Autocorrelation (1 + B_π τ)^{−(α_π−1)} at lag τ hours.
pub fn acf(mixing: &MixingParams, tau: f64) -> f64 {
    (1.0 + mixing.b_pi * tau.abs()).powf(-(mixing.alpha_pi - 1.0))
}

/// Quadrature settings for the characteristic-function integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// ν-mass (times kernel bound) allowed beyond the truncation point.
    pub tail_tol: f64,
    /// Absolute target for the adaptive near-origin piece.
    pub abs_tol: f64,
    /// Gauss–Legendre points per panel.
    pub gl_degree: usize,
    /// Generalized Gauss–Laguerre points for the λ integral.
    pub laguerre_degree: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            tail_tol: 1e-12,
            abs_tol: 1e-14,
            gl_degree: 16,
            laguerre_degree: 48,
        }
    }
}

/// Jump kernel K(u) = ∫ ν(dz) ∫₀¹ (e^{iuvz} − 1)/v dv.
///
/// After the substitution v = e^{−λ(t−s)} the stationary log characteristic
/// function factorizes as
///
/// ```text
/// ln φ(u) = ∫ π(dλ)/λ · K(u)
/// ```
///
/// so the exact process and any lift differ only through the λ-weights.
pub fn jump_kernel(jump: &JumpMeasureParams, u: f64, quad: &QuadConfig) -> Result<Complex64> {
    if u == 0.0 || jump.is_null() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let JumpMeasureParams {
        a_nu: a,
        b_nu: b,
        p_nu: p,
        alpha_nu: alpha,
    } = *jump;
    let gl = UnitLegendre::new(quad.gl_degree);
    let au = u.abs();
    let z_max = truncation_point(jump, au, quad.tail_tol);
    let z0 = (1.0 / au).min(z_max);

    // near-origin piece: z = z0·y^m with m(1−α) = 1 removes the z^{−α} singularity
    let m = 1.0 / (1.0 - alpha);
    let pref = a * m * u * z0.powf(1.0 - alpha);
    let (near, err) = special::de_complex(
        |y| {
            if y <= 0.0 {
                return Complex64::new(0.0, pref);
            }
            let z = z0 * y.powf(m);
            special::exp_kernel_over_x(u * z, &gl) * (pref * (-b * z.powf(p)).exp())
        },
        0.0,
        1.0,
        quad.abs_tol,
    );
    let scale = near.norm().max(quad.abs_tol);
    if !(err <= 1e-8 * scale + 1e-12) {
        return Err(Error::Quadrature {
            estimate: near.norm(),
            error: err,
        });
    }

    // panels widen geometrically until they reach half an oscillation period
    let mut far = Complex64::new(0.0, 0.0);
    let max_width = std::f64::consts::PI / au;
    let mut lo = z0;
    while lo < z_max {
        let hi = (lo + lo.min(max_width)).min(z_max);
        far += gl.composite_c(lo, hi, 1, |z| {
            let dens = a * z.powf(-1.0 - alpha) * (-b * z.powf(p)).exp();
            special::exp_kernel_over_x(u * z, &gl) * (u * z * dens)
        });
        lo = hi;
    }
    Ok(near + far)
}

/// Point beyond which the ν-tail contributes less than `tol` relative to |u|M₁.
fn truncation_point(jump: &JumpMeasureParams, au: f64, tol: f64) -> f64 {
    let JumpMeasureParams {
        a_nu: a,
        b_nu: b,
        p_nu: p,
        alpha_nu: alpha,
    } = *jump;
    let m1 = levy_moment(jump, 1).unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let target = tol * au * m1;
    let mut t = 1.0;
    loop {
        let z = (t / b).powf(1.0 / p);
        // ∫_z^∞ ν(dy) bounded through the incomplete gamma function
        let tail = if alpha < 0.0 {
            let s = -alpha / p;
            a / p * b.powf(alpha / p) * special::gamma(s) * special::reg_upper(s, t)
        } else {
            let s = 1.0 / p;
            a * z.powf(-1.0 - alpha) / p * b.powf(-s) * special::gamma(s) * special::reg_upper(s, t)
        };
        let kernel_bound = 3.0 + (1.0 + au * z).ln();
        if tail * kernel_bound < target || t > 800.0 {
            return z;
        }
        t += 1.0;
    }
}

/// ∫ π(dλ)/λ by generalized Gauss–Laguerre quadrature (equals R up to rounding).
pub fn reciprocal_moment_quadrature(mixing: &MixingParams, quad: &QuadConfig) -> Result<f64> {
    let a = mixing.alpha_pi;
    let rule = special::laguerre_rule(quad.laguerre_degree, a - 2.0)
        .ok_or_else(|| Error::Domain(format!("alpha_pi = {a} too small for the λ rule")))?;
    // π(dλ)/λ = x^{α−2} e^{−x} dx / (Γ(α) B) with λ = B x
    let s: f64 = rule.iter().map(|&(_, w)| w).sum();
    Ok(s / (special::gamma(a) * mixing.b_pi))
}

/// Exact stationary log characteristic function with X̲ treated as 0.
pub fn log_charfn_exact(model: &SupOUModel, u: f64, quad: &QuadConfig) -> Result<Complex64> {
    let k = jump_kernel(&model.jump, u, quad)?;
    Ok(k * reciprocal_moment_quadrature(&model.mixing, quad)?)
}

/// Model file layout: every field carries a unit label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub x_floor: Quantity,
    #[serde(rename = "B_pi")]
    pub b_pi: Quantity,
    pub alpha_pi: Quantity,
    pub a_nu: Quantity,
    pub b_nu: Quantity,
    pub p_nu: Quantity,
    pub alpha_nu: Quantity,
}

const DIMENSIONLESS: &[&str] = &["-", "1", "dimensionless"];

impl ModelSpec {
    pub fn to_model(&self) -> Result<SupOUModel> {
        let p = units::expect_unit(&self.p_nu, "p_nu", DIMENSIONLESS)?;
        let b_label = format!("(s/m3)^{}", fmt_short(p));
        let b_ok = ["(s/m3)^p", b_label.as_str()];
        let model = SupOUModel {
            x_floor: units::expect_unit(&self.x_floor, "x_floor", &["m3/s"])?,
            jump: JumpMeasureParams {
                a_nu: units::amplitude_to_per_hour(&self.a_nu, "a_nu")?,
                b_nu: units::expect_unit(&self.b_nu, "b_nu", &b_ok)?,
                p_nu: p,
                alpha_nu: units::expect_unit(&self.alpha_nu, "alpha_nu", DIMENSIONLESS)?,
            },
            mixing: MixingParams {
                b_pi: units::rate_to_per_hour(&self.b_pi, "B_pi")?,
                alpha_pi: units::expect_unit(&self.alpha_pi, "alpha_pi", DIMENSIONLESS)?,
            },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_model(m: &SupOUModel) -> Self {
        Self {
            x_floor: Quantity::new(m.x_floor, "m3/s"),
            b_pi: Quantity::new(m.mixing.b_pi, "1/h"),
            alpha_pi: Quantity::new(m.mixing.alpha_pi, "-"),
            a_nu: Quantity::new(m.jump.a_nu, "(m3/s)^alpha/h"),
            b_nu: Quantity::new(m.jump.b_nu, "(s/m3)^p"),
            p_nu: Quantity::new(m.jump.p_nu, "-"),
            alpha_nu: Quantity::new(m.jump.alpha_nu, "-"),
        }
    }
}

fn fmt_short(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Reads a unit-annotated model JSON file.
pub fn read_model(path: impl AsRef<std::path::Path>) -> Result<SupOUModel> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    let spec: ModelSpec = serde_json::from_str(&text)?;
    spec.to_model()
}

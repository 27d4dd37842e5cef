//! Pointwise thermodynamic closures and reaction kinetics.
//!
//! All relations are written in Lagrangian variables: `v` is the specific
//! volume and `theta` the absolute temperature. Radiation enters through the
//! `theta^4` terms of the pressure and internal energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the model. All quantities are nondimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Shear viscosity.
    pub mu: f64,
    /// Second viscosity coefficient.
    pub lambda1: f64,
    /// Heat released per unit reactant burnt.
    pub lambda_heat: f64,
    /// Arrhenius prefactor.
    pub k_rate: f64,
    /// Activation energy.
    pub a_act: f64,
    /// Temperature exponent of the reaction rate.
    pub beta: f64,
    /// Species diffusion constant.
    pub d_diff: f64,
    pub r_gas: f64,
    pub c_v: f64,
    /// Stefan-Boltzmann constant.
    pub a_rad: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Exponent of the radiative conductivity `kappa2 * v * theta^b`.
    pub b_exp: f64,
    /// Spatial dimension.
    pub n_dim: u32,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            mu: 1.0,
            lambda1: 0.0,
            lambda_heat: 1.0,
            k_rate: 1.0,
            a_act: 1.0,
            beta: 1.0,
            d_diff: 1.0,
            r_gas: 1.0,
            c_v: 1.0,
            a_rad: 0.01,
            kappa1: 1.0,
            kappa2: 1.0,
            b_exp: 5.0,
            n_dim: 3,
        }
    }
}

/// Where a parameter set sits relative to the global well-posedness regime
/// `b > 19/4`, `0 <= beta < b + 9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeFlags {
    pub theorem_regime: bool,
    pub outside_theorem_regime: bool,
}

pub const VISCOSITY_RULE: &str = "mu > 0 and n*lambda1 + 2*mu > 0";

/// `x^y` for `x > 0`, using repeated multiplication when `y` is a small
/// integer.
#[inline]
pub(crate) fn real_pow(x: f64, y: f64) -> f64 {
    if y == y.trunc() && y.abs() <= 16.0 {
        crate::solver::operators::rpow(x, y as i32)
    } else {
        (y * x.ln()).exp()
    }
}

impl PhysParams {
    /// Checks the structural constraints. Fails on the viscosity rule
    /// `mu > 0, n*lambda1 + 2*mu > 0`, on non-positive material constants and
    /// on `n_dim == 0`. Dimension one is accepted for slab-geometry harnesses.
    pub fn validate(&self) -> Result<()> {
        let n = f64::from(self.n_dim);
        let mut bad = Vec::new();
        if !(self.mu > 0.0 && n * self.lambda1 + 2.0 * self.mu > 0.0) {
            bad.push(format!("viscosity constraint violated: {VISCOSITY_RULE}"));
        }
        if !(self.alpha() > 0.0) {
            bad.push("alpha = 2*mu + lambda1 must be positive".to_string());
        }
        let positive = [
            ("lambda_heat", self.lambda_heat),
            ("a_act", self.a_act),
            ("r_gas", self.r_gas),
            ("c_v", self.c_v),
            ("kappa1", self.kappa1),
            ("b_exp", self.b_exp),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                bad.push(format!("{name} must be positive (got {value})"));
            }
        }
        let nonneg = [
            ("k_rate", self.k_rate),
            ("d_diff", self.d_diff),
            ("a_rad", self.a_rad),
            ("kappa2", self.kappa2),
        ];
        for (name, value) in nonneg {
            if !(value >= 0.0) || !value.is_finite() {
                bad.push(format!("{name} must be non-negative (got {value})"));
            }
        }
        if self.n_dim == 0 {
            bad.push("n_dim must be at least 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad.join("; ")))
        }
    }

    /// Looser check for limit-case harnesses: heat release, conduction and
    /// shear viscosity may vanish, as long as `alpha` stays positive so the
    /// momentum equation keeps its parabolic part.
    pub fn validate_limit(&self) -> Result<()> {
        let relaxed = PhysParams {
            mu: if self.mu == 0.0 && self.alpha() > 0.0 { 1.0 } else { self.mu },
            lambda1: if self.mu == 0.0 && self.alpha() > 0.0 { 0.0 } else { self.lambda1 },
            lambda_heat: if self.lambda_heat == 0.0 { 1.0 } else { self.lambda_heat },
            kappa1: if self.kappa1 == 0.0 { 1.0 } else { self.kappa1 },
            ..*self
        };
        relaxed.validate()
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        2.0 * self.mu + self.lambda1
    }

    #[inline]
    pub fn n(&self) -> f64 {
        f64::from(self.n_dim)
    }

    pub fn regime(&self) -> RegimeFlags {
        RegimeFlags {
            theorem_regime: self.b_exp > 19.0 / 4.0,
            outside_theorem_regime: !(self.beta >= 0.0 && self.beta < self.b_exp + 9.0),
        }
    }

    // Unchecked pointwise kernels used by the solver loops. The checked
    // free functions below wrap these behind `ThermoPoint`.

    #[inline]
    pub fn p(&self, v: f64, theta: f64) -> f64 {
        self.r_gas * theta / v + self.a_rad / 3.0 * theta.powi(4)
    }

    #[inline]
    pub fn e(&self, v: f64, theta: f64) -> f64 {
        self.c_v * theta + self.a_rad * v * theta.powi(4)
    }

    #[inline]
    pub fn e_theta(&self, v: f64, theta: f64) -> f64 {
        self.c_v + 4.0 * self.a_rad * v * theta.powi(3)
    }

    #[inline]
    pub fn e_v(&self, theta: f64) -> f64 {
        self.a_rad * theta.powi(4)
    }

    #[inline]
    pub fn p_theta(&self, v: f64, theta: f64) -> f64 {
        self.r_gas / v + 4.0 / 3.0 * self.a_rad * theta.powi(3)
    }

    #[inline]
    pub fn p_v(&self, v: f64, theta: f64) -> f64 {
        -self.r_gas * theta / (v * v)
    }

    /// `-dP/dv` along an isentrope: `-P_v + theta * P_theta^2 / e_theta`.
    #[inline]
    pub fn adiabatic_modulus(&self, v: f64, theta: f64) -> f64 {
        let pt = self.p_theta(v, theta);
        -self.p_v(v, theta) + theta * pt * pt / self.e_theta(v, theta)
    }

    #[inline]
    pub fn kappa(&self, v: f64, theta: f64) -> f64 {
        self.kappa1 + self.kappa2 * v * real_pow(theta, self.b_exp)
    }

    #[inline]
    pub fn phi(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        let power = real_pow(theta, self.beta);
        self.k_rate * power * (-self.a_act / theta).exp()
    }

    /// Inverts `e(v, theta) = energy` for `theta` at fixed `v`.
    ///
    /// `e` is strictly increasing and convex in `theta`, so Newton started
    /// from above the root converges monotonically. Returns `None` when no
    /// positive root exists.
    pub fn temperature_from_energy(&self, v: f64, energy: f64, guess: f64) -> Option<f64> {
        if !(energy > 0.0) || !energy.is_finite() {
            return None;
        }
        let linear = energy / self.c_v;
        if self.a_rad == 0.0 {
            return Some(linear);
        }
        // Start at or above the root: e(theta) >= c_v*theta, so the root is
        // below `linear`. Take the smaller of the guess and `linear` if the
        // guess already overshoots.
        let mut theta = linear;
        let mut f = None;
        if guess > 0.0 && guess.is_finite() {
            let fg = self.e(v, guess) - energy;
            if fg >= 0.0 {
                theta = guess;
                f = Some(fg);
            }
        }
        for _ in 0..100 {
            let fv = f.take().unwrap_or_else(|| self.e(v, theta) - energy);
            let step = fv / self.e_theta(v, theta);
            let next = theta - step;
            if !(next > 0.0) {
                theta *= 0.5;
                continue;
            }
            // The error after a Newton step is at most
            // `e_thth / (2 e_th) * step^2 <= 1.5 step^2 / theta`, which is
            // below roundoff once `|step| <= 1e-8 theta`.
            if step.abs() <= 1e-8 * next {
                return Some(next);
            }
            theta = next;
        }
        Some(theta)
    }
}

/// A thermodynamic state with `v > 0`, `theta > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoPoint {
    v: f64,
    theta: f64,
}

impl ThermoPoint {
    pub fn new(v: f64, theta: f64) -> Result<Self> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::StatePositivityViolation {
                field: "v",
                index: 0,
                value: v,
            });
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::StatePositivityViolation {
                field: "theta",
                index: 0,
                value: theta,
            });
        }
        Ok(ThermoPoint { v, theta })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

pub fn pressure(p: &PhysParams, s: ThermoPoint) -> f64 {
    p.p(s.v, s.theta)
}

pub fn internal_energy(p: &PhysParams, s: ThermoPoint) -> f64 {
    p.e(s.v, s.theta)
}

pub fn energy_temp_deriv(p: &PhysParams, s: ThermoPoint) -> f64 {
    p.e_theta(s.v, s.theta)
}

pub fn pressure_temp_deriv(p: &PhysParams, s: ThermoPoint) -> f64 {
    p.p_theta(s.v, s.theta)
}

/// Entropy `c_v ln(theta) + (4/3) a v theta^3 + R ln(v)`.
pub fn entropy(p: &PhysParams, s: ThermoPoint) -> f64 {
    entropy_raw(p, s.v, s.theta)
}

#[inline]
pub(crate) fn entropy_raw(p: &PhysParams, v: f64, theta: f64) -> f64 {
    p.c_v * theta.ln() + 4.0 / 3.0 * p.a_rad * v * theta.powi(3) + p.r_gas * v.ln()
}

/// Relative entropy with respect to the equilibrium `(v, theta) = (1, 1)`.
/// Non-negative, zero only at equilibrium.
pub fn normalized_entropy(p: &PhysParams, s: ThermoPoint) -> f64 {
    normalized_entropy_raw(p, s.v, s.theta)
}

#[inline]
fn x_minus_ln_x_minus_1(x: f64) -> f64 {
    // Evaluated as t - ln(1 + t) with t = x - 1 to keep precision near 1.
    let t = x - 1.0;
    if t.abs() < 1e-4 {
        // Series t^2/2 - t^3/3 + t^4/4 - t^5/5
        let t2 = t * t;
        t2 * (0.5 - t / 3.0 + t2 / 4.0 - t2 * t / 5.0)
    } else {
        t - t.ln_1p()
    }
}

#[inline]
pub(crate) fn normalized_entropy_raw(p: &PhysParams, v: f64, theta: f64) -> f64 {
    let dt = theta - 1.0;
    p.c_v * x_minus_ln_x_minus_1(theta)
        + p.r_gas * x_minus_ln_x_minus_1(v)
        + p.a_rad / 3.0 * v * dt * dt * (3.0 * theta * theta + 2.0 * theta + 1.0)
}

/// Conductivity `kappa1 + kappa2 * v * theta^b` (the Lagrangian form of
/// `kappa1 + kappa2 * theta^b / rho`).
pub fn conductivity(p: &PhysParams, s: ThermoPoint) -> f64 {
    p.kappa(s.v, s.theta)
}

/// Arrhenius rate `K theta^beta exp(-A/theta)`. `theta = 0` is taken as the
/// zero limit; negative temperatures are rejected.
pub fn reaction_rate(p: &PhysParams, theta: f64) -> Result<f64> {
    if theta < 0.0 || theta.is_nan() {
        return Err(Error::StatePositivityViolation {
            field: "theta",
            index: 0,
            value: theta,
        });
    }
    Ok(p.phi(theta))
}

/// The volume-dependent factor `d / v^2` of the Lagrangian species diffusion
/// coefficient `d r^(2n-2) / v^2`.
pub fn species_diffusion(p: &PhysParams, s: ThermoPoint) -> f64 {
    p.d_diff / (s.v * s.v)
}

/// Residuals of the three Maxwell-type relations
/// `E_v = P_theta`, `E_theta = e_theta / theta`, `e_v = theta P_theta - P`,
/// with the left-hand sides taken by central differences of step `h`.
pub fn maxwell_residuals(p: &PhysParams, s: ThermoPoint, h: f64) -> Result<[f64; 3]> {
    let (v, th) = (s.v, s.theta);
    if !(h > 0.0) || v - h <= 0.0 || th - h <= 0.0 {
        return Err(Error::DegenerateStencil { step: h });
    }
    let ev = (entropy_raw(p, v + h, th) - entropy_raw(p, v - h, th)) / (2.0 * h);
    let et = (entropy_raw(p, v, th + h) - entropy_raw(p, v, th - h)) / (2.0 * h);
    let e_v = (p.e(v + h, th) - p.e(v - h, th)) / (2.0 * h);
    Ok([
        ev - p.p_theta(v, th),
        et - p.e_theta(v, th) / th,
        e_v - (th * p.p_theta(v, th) - p.p(v, th)),
    ])
}

/// Default finite-difference step `1e-4 * max(1, |state|)`.
pub fn maxwell_default_step(s: ThermoPoint) -> f64 {
    1e-4 * s.v.max(s.theta).max(1.0)
}

/// Per-residual bounds `h^2/6 * max|f'''| + 4 eps max|f| / h` on the
/// stencil, i.e. truncation plus roundoff of the central difference.
pub fn maxwell_error_bounds(p: &PhysParams, s: ThermoPoint, h: f64) -> Result<[f64; 3]> {
    let (v, th) = (s.v, s.theta);
    if !(h > 0.0) || v - h <= 0.0 || th - h <= 0.0 {
        return Err(Error::DegenerateStencil { step: h });
    }
    let eps = f64::EPSILON;
    let (vl, tl) = (v - h, th - h);
    let (vh, thh) = (v + h, th + h);
    // E_vvv = 2R/v^3, E_thth_th = 2 c_v/theta^3 + 8 a v, e_vvv = 0.
    let t1 = h * h / 6.0 * 2.0 * p.r_gas / vl.powi(3);
    let t2 = h * h / 6.0 * (2.0 * p.c_v / tl.powi(3) + 8.0 * p.a_rad * v);
    let e_mag_v = entropy_raw(p, vh, th).abs().max(entropy_raw(p, vl, th).abs());
    let e_mag_t = entropy_raw(p, v, thh).abs().max(entropy_raw(p, v, tl).abs());
    let u_mag = p.e(vh, th).abs();
    Ok([
        t1 + 4.0 * eps * (e_mag_v + 1.0) / h,
        t2 + 4.0 * eps * (e_mag_t + 1.0) / h,
        4.0 * eps * (u_mag + 1.0) / h,
    ])
}

/// Split of the mechanical dissipation into two non-negative parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationSplit {
    pub lhs: f64,
    pub t1: f64,
    pub t2: f64,
    /// Magnitude scale `|first term| + |second term|` of `lhs`, for relative
    /// comparisons.
    pub scale: f64,
}

/// Evaluates
/// `alpha |(r^{n-1}u)_x|^2/(v theta) - 2 mu (n-1) (r^{n-2}u^2)_x / theta`
/// and its decomposition into
/// `(lambda1 + 2mu/n) |(r^{n-1}u)_x|^2/(v theta)` and
/// `2mu(n-1)/(v theta) [ (r^{n-1}u)_x / sqrt(n) - sqrt(n) v u / r ]^2`,
/// with `(r^{n-1}u)_x = (n-1) v u / r + r^{n-1} u_x` and
/// `(r^{n-2}u^2)_x = (n-2) v u^2 / r^2 + 2 r^{n-2} u u_x`.
pub fn dissipation_decomposition(
    p: &PhysParams,
    v: f64,
    theta: f64,
    u: f64,
    r: f64,
    ux: f64,
) -> Result<DissipationSplit> {
    ThermoPoint::new(v, theta)?;
    if !(r >= 1.0) {
        return Err(Error::StatePositivityViolation {
            field: "r",
            index: 0,
            value: r,
        });
    }
    let n = p.n();
    let rn1 = r.powi(p.n_dim as i32 - 1);
    let rn2 = r.powi(p.n_dim as i32 - 2);
    let div = (n - 1.0) * v * u / r + rn1 * ux;
    let w_x = (n - 2.0) * v * u * u / (r * r) + 2.0 * rn2 * u * ux;
    let first = p.alpha() * div * div / (v * theta);
    let second = 2.0 * p.mu * (n - 1.0) * w_x / theta;
    let lhs = first - second;
    let t1 = (p.lambda1 + 2.0 * p.mu / n) * div * div / (v * theta);
    let sq = div / n.sqrt() - n.sqrt() * v * u / r;
    let t2 = 2.0 * p.mu * (n - 1.0) / (v * theta) * sq * sq;
    Ok(DissipationSplit {
        lhs,
        t1,
        t2,
        scale: first.abs() + second.abs(),
    })
}

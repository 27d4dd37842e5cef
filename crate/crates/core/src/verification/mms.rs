//! Manufactured solutions on `[0, L]` compatible with the boundary data.
//!
//! Every target is a fixed spatial profile times a time amplitude
//! `eps(t) = mean + swing sin(omega t)`. With `c = cos(pi x / 2L)`:
//!
//! ```text
//! v* = 1 + eps_v c^4        u* = eps_u sin(pi x / L) c^4
//! theta* = 1 + eps_th c^4   z* = eps_z c^4
//! ```
//!
//! so `u*(0) = 0`, the cell fields have zero slope at `x = 0`, and all four
//! fields reach the far-field state at `x = L` with three vanishing
//! derivatives. The last property keeps the boundary data compatible with
//! each split operator separately; profiles that only match the boundary
//! values leave an order-one defect in the outer cell at every substep.
//! The radius follows from `v*` through `r^n = 1 + n int_0^x v*`, which has
//! a closed form.

use std::f64::consts::PI;

use serde::Serialize;

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::solver::{Forcing, ForcingArrays};

/// Step of the Richardson-extrapolated central difference used for the
/// flux divergences.
pub const FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Amplitude {
    pub mean: f64,
    pub swing: f64,
    pub omega: f64,
}

impl Amplitude {
    pub const ZERO: Amplitude = Amplitude { mean: 0.0, swing: 0.0, omega: 0.0 };

    pub fn at(&self, t: f64) -> f64 {
        self.mean + self.swing * (self.omega * t).sin()
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.swing * self.omega * (self.omega * t).cos()
    }

    fn bound(&self) -> f64 {
        self.mean.abs() + self.swing.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmsCase {
    pub length: f64,
    pub v: Amplitude,
    pub u: Amplitude,
    pub theta: Amplitude,
    pub z: Amplitude,
}

/// Target fields and their first derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub v: f64,
    pub u: f64,
    pub theta: f64,
    pub z: f64,
    pub r: f64,
    pub v_x: f64,
    pub u_x: f64,
    pub theta_x: f64,
    pub z_x: f64,
    pub r_x: f64,
    pub v_t: f64,
    pub u_t: f64,
    pub theta_t: f64,
    pub z_t: f64,
}

impl MmsCase {
    pub const NAMES: [&'static str; 3] = ["smooth", "equilibrium", "static-heat"];

    /// Every term of the system active, amplitudes of order 0.1.
    pub fn smooth() -> Self {
        MmsCase {
            length: 2.0,
            v: Amplitude { mean: 0.1, swing: 0.05, omega: 1.0 },
            u: Amplitude { mean: 0.0, swing: 0.1, omega: 2.0 },
            theta: Amplitude { mean: 0.2, swing: 0.1, omega: 1.5 },
            z: Amplitude { mean: 0.4, swing: 0.2, omega: 1.0 },
        }
    }

    pub fn equilibrium() -> Self {
        MmsCase {
            length: 2.0,
            v: Amplitude::ZERO,
            u: Amplitude::ZERO,
            theta: Amplitude::ZERO,
            z: Amplitude::ZERO,
        }
    }

    /// Gas at rest with a steady temperature profile: only conduction is
    /// forced.
    pub fn static_heat() -> Self {
        MmsCase { theta: Amplitude { mean: 0.3, swing: 0.0, omega: 0.0 }, ..Self::equilibrium() }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "smooth" => Ok(Self::smooth()),
            "equilibrium" => Ok(Self::equilibrium()),
            "static-heat" => Ok(Self::static_heat()),
            _ => Err(Error::InvalidArgument(format!(
                "unknown manufactured case '{name}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.length > 0.0) {
            bad.push(format!("length must be positive (got {})", self.length));
        }
        if self.v.bound() >= 1.0 {
            bad.push("v amplitude must stay below 1 so that v* > 0".to_string());
        }
        if self.theta.bound() >= 1.0 {
            bad.push("theta amplitude must stay below 1 so that theta* > 0".to_string());
        }
        if self.z.mean - self.z.swing.abs() < 0.0 || self.z.bound() > 1.0 {
            bad.push("z amplitude must stay within [0, 1]".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(bad.join("; ")))
        }
    }

    pub fn grid(&self, n_cells: usize) -> Result<Grid> {
        Grid::with_extent(n_cells, self.length)
    }

    /// `r*(t, x)` from `r^n = 1 + n int_0^x v*`, using
    /// `cos^4 = 3/8 + cos(2y)/2 + cos(4y)/8`.
    pub fn radius(&self, p: &PhysParams, t: f64, x: f64) -> f64 {
        let k = PI / (2.0 * self.length);
        let c4_int = 0.375 * x + (2.0 * k * x).sin() / (4.0 * k) + (4.0 * k * x).sin() / (32.0 * k);
        let vol = x + self.v.at(t) * c4_int;
        (1.0 + p.n() * vol).powf(1.0 / p.n())
    }

    pub fn target(&self, p: &PhysParams, t: f64, x: f64) -> Target {
        let n = p.n();
        let k = PI / (2.0 * self.length);
        let (ev, eu, eth, ez) = (self.v.at(t), self.u.at(t), self.theta.at(t), self.z.at(t));
        let (dv, du, dth, dz) =
            (self.v.rate(t), self.u.rate(t), self.theta.rate(t), self.z.rate(t));
        let (c, s) = ((k * x).cos(), (k * x).sin());
        let (c2, s2) = ((2.0 * k * x).cos(), (2.0 * k * x).sin());
        let c4 = c * c * c * c;
        let c4_x = -4.0 * k * c * c * c * s;
        let w = s2 * c4;
        let w_x = 2.0 * k * c2 * c4 + s2 * c4_x;
        let v = 1.0 + ev * c4;
        let r = self.radius(p, t, x);
        Target {
            v,
            u: eu * w,
            theta: 1.0 + eth * c4,
            z: ez * c4,
            r,
            v_x: ev * c4_x,
            u_x: eu * w_x,
            theta_x: eth * c4_x,
            z_x: ez * c4_x,
            r_x: v * r.powf(1.0 - n),
            v_t: dv * c4,
            u_t: du * w,
            theta_t: dth * c4,
            z_t: dz * c4,
        }
    }

    /// `D = (r^{n-1} u)_x`.
    fn mass_flux(&self, p: &PhysParams, g: &Target) -> f64 {
        let n = p.n();
        (n - 1.0) * g.r.powf(n - 2.0) * g.r_x * g.u + g.r.powf(n - 1.0) * g.u_x
    }

    fn sigma(&self, p: &PhysParams, t: f64, x: f64) -> f64 {
        let g = self.target(p, t, x);
        -p.p(g.v, g.theta) + p.alpha() * self.mass_flux(p, &g) / g.v
    }

    fn heat_flux(&self, p: &PhysParams, t: f64, x: f64) -> f64 {
        let g = self.target(p, t, x);
        g.r.powf(2.0 * p.n() - 2.0) * p.kappa(g.v, g.theta) * g.theta_x / g.v
    }

    fn species_flux(&self, p: &PhysParams, t: f64, x: f64) -> f64 {
        let g = self.target(p, t, x);
        p.d_diff * g.r.powf(2.0 * p.n() - 2.0) * g.z_x / (g.v * g.v)
    }

    /// Pointwise defects `(f_v, f_u, f_e, f_z)` of the targets.
    pub fn defects(&self, p: &PhysParams, t: f64, x: f64) -> [f64; 4] {
        let n = p.n();
        let g = self.target(p, t, x);
        let d = self.mass_flux(p, &g);
        let sigma = -p.p(g.v, g.theta) + p.alpha() * d / g.v;
        let sigma_x = richardson(|y| self.sigma(p, t, y), x);
        let q_x = richardson(|y| self.heat_flux(p, t, y), x);
        let s_x = richardson(|y| self.species_flux(p, t, y), x);
        let w_x = (n - 2.0) * g.r.powf(n - 3.0) * g.r_x * g.u * g.u
            + 2.0 * g.r.powf(n - 2.0) * g.u * g.u_x;
        let burn = p.phi(g.theta) * g.z;
        let e_t = p.e_v(g.theta) * g.v_t + p.e_theta(g.v, g.theta) * g.theta_t;
        [
            g.v_t - d,
            g.u_t - g.r.powf(n - 1.0) * sigma_x,
            e_t - (q_x + sigma * d - 2.0 * p.mu * (n - 1.0) * w_x + p.lambda_heat * burn),
            g.z_t - (s_x - burn),
        ]
    }

    /// Targets sampled on cell centres and nodes.
    pub fn state(&self, p: &PhysParams, grid: &Grid, t: f64) -> State {
        let n = grid.n_cells();
        let mut s = State::equilibrium(grid);
        for i in 0..n {
            let g = self.target(p, t, grid.cell_center(i));
            s.v[i] = g.v;
            s.theta[i] = g.theta;
            s.z[i] = g.z;
        }
        for j in 0..=n {
            s.u[j] = self.target(p, t, grid.node(j)).u;
        }
        s.u[0] = 0.0;
        s.u[n] = 0.0;
        s.t = t;
        s
    }
}

/// Fourth-order central derivative: `(4 D(h/2) - D(h)) / 3`.
pub fn richardson(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = FD_STEP;
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Forcing arrays of `case` on `grid` at time `t`: cell rates for `v`, `e`
/// and `z`, node rates for `u` (zero at the two end nodes).
pub fn mms_forcing(case: &MmsCase, p: &PhysParams, grid: &Grid, t: f64) -> ForcingArrays {
    let n = grid.n_cells();
    let mut f = ForcingArrays {
        f_v: vec![0.0; n],
        f_u: vec![0.0; n + 1],
        f_e: vec![0.0; n],
        f_z: vec![0.0; n],
    };
    for i in 0..n {
        let [fv, _, fe, fz] = case.defects(p, t, grid.cell_center(i));
        f.f_v[i] = fv;
        f.f_e[i] = fe;
        f.f_z[i] = fz;
    }
    for j in 1..n {
        f.f_u[j] = case.defects(p, t, grid.node(j))[1];
    }
    f
}

impl Forcing for MmsCase {
    fn forcing(&self, p: &PhysParams, grid: &Grid, t: f64) -> ForcingArrays {
        mms_forcing(self, p, grid, t)
    }
}

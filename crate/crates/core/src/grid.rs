//! Mass grid, state storage, initial-condition families and state checks.
//!
//! Layout: cells `i = 0..N` carry `v`, `theta`, `z` at `x = (i + 1/2) dx`;
//! nodes `j = 0..=N` carry `u` and the radii at `x = j dx`. Node 0 is the
//! unit sphere and node `N` the truncation point.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform Lagrangian mass mesh on `[0, n_cells * dx]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
    dx: f64,
}

impl Grid {
    pub const MIN_CELLS: usize = 8;

    pub fn new(n_cells: usize, dx: f64) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} cells, got {n_cells}",
                Self::MIN_CELLS
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        Ok(Grid { n_cells, dx })
    }

    /// Grid with `n_cells` cells covering `[0, x_max]`.
    pub fn with_extent(n_cells: usize, x_max: f64) -> Result<Self> {
        Self::new(n_cells, x_max / n_cells as f64)
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.n_cells as f64 * self.dx
    }

    #[inline]
    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }
}

/// Condition imposed at the truncation point `x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OuterBoundary {
    /// `u = 0`, `theta = 1`, `z = 0` held at the last node.
    #[default]
    FarField,
    /// `u = 0` with insulating, impermeable walls at both ends.
    ClosedBox,
}

impl FromStr for OuterBoundary {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "far-field" | "farfield" | "far_field" => Ok(OuterBoundary::FarField),
            "closed-box" | "closed" | "closed_box" => Ok(OuterBoundary::ClosedBox),
            _ => Err(format!("unknown outer boundary '{s}' (expected far-field or closed-box)")),
        }
    }
}

impl fmt::Display for OuterBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OuterBoundary::FarField => "far-field",
            OuterBoundary::ClosedBox => "closed-box",
        })
    }
}

/// The inner boundary is always `u = 0`, `theta_x = z_x = 0`; only the outer
/// one is configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub outer: OuterBoundary,
}

impl BoundaryConditions {
    pub fn far_field() -> Self {
        BoundaryConditions { outer: OuterBoundary::FarField }
    }

    pub fn closed_box() -> Self {
        BoundaryConditions { outer: OuterBoundary::ClosedBox }
    }
}

/// Solution at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn equilibrium(grid: &Grid) -> Self {
        let n = grid.n_cells();
        State {
            v: vec![1.0; n],
            theta: vec![1.0; n],
            z: vec![0.0; n],
            u: vec![0.0; n + 1],
            t: 0.0,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.v.len()
    }

    pub fn check_layout(&self, grid: &Grid) -> Result<()> {
        let n = grid.n_cells();
        if self.v.len() != n || self.theta.len() != n || self.z.len() != n || self.u.len() != n + 1
        {
            return Err(Error::GridMismatch(format!(
                "state arrays ({}, {}, {}, {}) do not match a {n}-cell grid",
                self.v.len(),
                self.theta.len(),
                self.z.len(),
                self.u.len()
            )));
        }
        Ok(())
    }
}

/// Built-in initial-condition families. All are perturbations of the
/// equilibrium `(v, u, theta, z) = (1, 0, 1, 0)` that are even in `x` about
/// the inner boundary, so the discrete Neumann conditions hold exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcFamily {
    Equilibrium,
    /// Gaussian bumps of `v` and `theta` centred at `x = 2`, an odd velocity
    /// pulse and a reactant cloud `min(5A, 1) exp(-(x/w)^2)`.
    GaussianBump,
    /// A temperature dip `theta = 1 - A g(x)` with the same reactant cloud.
    ColdSpot,
    /// A smoothed unit reactant slab on `[0, w]` over a small bump of `v`
    /// and `theta`.
    ReactantStep,
    /// A seeded random superposition of bumps in `v` and `theta`.
    RandomBump,
}

impl IcFamily {
    pub const ALL: [IcFamily; 5] = [
        IcFamily::Equilibrium,
        IcFamily::GaussianBump,
        IcFamily::ColdSpot,
        IcFamily::ReactantStep,
        IcFamily::RandomBump,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            IcFamily::Equilibrium => "equilibrium",
            IcFamily::GaussianBump => "gaussian-bump",
            IcFamily::ColdSpot => "cold-spot",
            IcFamily::ReactantStep => "reactant-step",
            IcFamily::RandomBump => "random-bump",
        }
    }
}

impl FromStr for IcFamily {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        IcFamily::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = IcFamily::ALL.iter().map(|f| f.name()).collect();
                format!("unknown initial-condition family '{s}' (expected one of {})", names.join(", "))
            })
    }
}

impl fmt::Display for IcFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const BUMP_CENTER: f64 = 2.0;
const STEP_SHARPNESS: f64 = 0.05;

fn even_bump(x: f64, center: f64, width: f64) -> f64 {
    let a = (x - center) / width;
    let b = (x + center) / width;
    (-a * a).exp() + (-b * b).exp()
}

fn odd_bump(x: f64, center: f64, width: f64) -> f64 {
    let a = (x - center) / width;
    let b = (x + center) / width;
    (-a * a).exp() - (-b * b).exp()
}

/// Builds an initial state. The seed only matters for
/// [`IcFamily::RandomBump`].
pub fn make_initial_condition_seeded(
    grid: &Grid,
    family: IcFamily,
    amplitude: f64,
    width: f64,
    seed: u64,
) -> Result<State> {
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be finite and non-negative, got {amplitude}"
        )));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidArgument(format!("width must be positive, got {width}")));
    }
    let n = grid.n_cells();
    let mut s = State::equilibrium(grid);
    let cloud = (5.0 * amplitude).min(1.0);
    let xc = |i: usize| grid.cell_center(i);
    match family {
        IcFamily::Equilibrium => {}
        IcFamily::GaussianBump => {
            for i in 0..n {
                let g = even_bump(xc(i), BUMP_CENTER, width);
                s.v[i] = 1.0 + amplitude * g;
                s.theta[i] = 1.0 + amplitude * g;
                let y = xc(i) / width;
                s.z[i] = cloud * (-y * y).exp();
            }
            for j in 1..n {
                s.u[j] = amplitude * odd_bump(grid.node(j), BUMP_CENTER, width);
            }
        }
        IcFamily::ColdSpot => {
            for i in 0..n {
                s.theta[i] = 1.0 - amplitude * even_bump(xc(i), BUMP_CENTER, width);
                let y = xc(i) / width;
                s.z[i] = cloud * (-y * y).exp();
            }
        }
        IcFamily::ReactantStep => {
            for i in 0..n {
                let g = even_bump(xc(i), BUMP_CENTER, width);
                s.v[i] = 1.0 + amplitude * g;
                s.theta[i] = 1.0 + amplitude * g;
                // Mirror image keeps the profile even about x = 0.
                let right = 0.5 * (1.0 - ((xc(i) - width) / STEP_SHARPNESS).tanh());
                let left = 0.5 * (1.0 - ((-xc(i) - width) / STEP_SHARPNESS).tanh());
                s.z[i] = (right + left - 1.0).clamp(0.0, 1.0);
            }
        }
        IcFamily::RandomBump => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            const MODES: usize = 4;
            let span = (grid.x_max() / 4.0).clamp(1.0, 8.0);
            let mut modes = Vec::with_capacity(MODES);
            for _ in 0..MODES {
                let center: f64 = rng.gen_range(0.5..span);
                let w: f64 = width * rng.gen_range(0.5..1.5);
                let cv: f64 = rng.gen_range(-1.0..1.0);
                let ct: f64 = rng.gen_range(-1.0..1.0);
                modes.push((center, w, cv, ct));
            }
            // Each even bump peaks below 2, so the sum stays below 2A / 2.
            let scale = amplitude / (2.0 * MODES as f64);
            for i in 0..n {
                let (mut dv, mut dt) = (0.0, 0.0);
                for &(c, w, cv, ct) in &modes {
                    let g = even_bump(xc(i), c, w);
                    dv += cv * g;
                    dt += ct * g;
                }
                s.v[i] = 1.0 + scale * dv;
                s.theta[i] = 1.0 + scale * dt;
                let y = xc(i) / width;
                s.z[i] = cloud * (-y * y).exp();
            }
        }
    }
    for (field, arr) in [("v", &s.v), ("theta", &s.theta)] {
        if let Some((i, &bad)) = arr.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::StatePositivityViolation { field, index: i, value: bad });
        }
    }
    Ok(s)
}

/// [`make_initial_condition_seeded`] with seed 0.
pub fn make_initial_condition(
    grid: &Grid,
    family: IcFamily,
    amplitude: f64,
    width: f64,
) -> Result<State> {
    make_initial_condition_seeded(grid, family, amplitude, width, 0)
}

/// Minimum and maximum of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(xs: &[f64]) -> Self {
        xs.iter().fold(
            Range { min: f64::INFINITY, max: f64::NEG_INFINITY },
            |r, &x| Range { min: r.min.min(x), max: r.max.max(x) },
        )
    }
}

/// Result of [`validate_state`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateReport {
    pub v: Range,
    pub u: Range,
    pub theta: Range,
    pub z: Range,
    pub pass: bool,
    /// One message per violated invariant, naming the first offending index.
    pub violations: Vec<String>,
    /// Deviation of the outermost cell and node from `(1, 0, 1, 0)`.
    pub far_field_deviation: f64,
}

pub fn validate_state(s: &State) -> StateReport {
    let mut violations = Vec::new();
    let mut first = |name: &str, xs: &[f64], ok: &dyn Fn(f64) -> bool| {
        if let Some((i, x)) = xs.iter().enumerate().find(|(_, &x)| !ok(x)) {
            violations.push(format!("{name}[{i}] = {x:e} out of range"));
        }
    };
    first("v", &s.v, &|x| x > 0.0 && x.is_finite());
    first("theta", &s.theta, &|x| x > 0.0 && x.is_finite());
    first("z", &s.z, &|x| (0.0..=1.0).contains(&x));
    first("u", &s.u, &|x| x.is_finite());
    if s.u.first().copied() != Some(0.0) {
        violations.push(format!("u[0] = {:?}, must be 0", s.u.first()));
    }
    let far_field_deviation = match (s.v.last(), s.theta.last(), s.z.last(), s.u.last()) {
        (Some(v), Some(th), Some(z), Some(u)) => {
            (v - 1.0).abs().max((th - 1.0).abs()).max(z.abs()).max(u.abs())
        }
        _ => f64::NAN,
    };
    StateReport {
        v: Range::of(&s.v),
        u: Range::of(&s.u),
        theta: Range::of(&s.theta),
        z: Range::of(&s.z),
        pass: violations.is_empty(),
        violations,
        far_field_deviation,
    }
}

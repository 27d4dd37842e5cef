//! Functionals, identity residuals and bound monitors evaluated on the
//! discrete solution.
//!
//! Spatial quadratures use the same node coefficients as the solver: cell
//! sums for cell quantities, node sums (half weight on the far-field link)
//! for gradients. Time integrals are trapezoidal over accepted steps, except
//! the boundary inflows, which accumulate the fluxes the substeps actually
//! applied. Trapezoidal sampling of those fluxes from end-of-step states is
//! unreliable because Crank-Nicolson leaves the stiff outer-cell mode
//! undamped.

pub mod audit;
pub mod roots;

use serde::Serialize;

use crate::constitutive::{normalized_entropy_raw, real_pow, PhysParams};
use crate::error::{Error, Result};
use crate::geometry::{fill_radii, nth_root, RadiusField};
use crate::grid::{BoundaryConditions, Grid, State};
use crate::solver::operators::{heat_links, mass_flux, outer_value, rpow, species_links};
use crate::solver::StepInfo;

pub use audit::{representation_audit, RepresentationAudit};
pub use roots::{entropy_roots, unit_interval_means, IntervalMean};

/// One time sample of every tracked quantity. Accumulated integrals run
/// from the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct FunctionalRecord {
    pub t: f64,
    pub step: u64,
    pub dt: f64,
    pub lyapunov: f64,
    pub dissipation_v: f64,
    pub reactant_mass: f64,
    pub reactant_sq: f64,
    pub burn_integral: f64,
    pub burn_sq_integral: f64,
    pub x_functional: f64,
    pub y_functional: f64,
    pub z_functional: f64,
    pub gplus_sup: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub min_z: f64,
    pub max_z: f64,
    pub supnorm_dev: f64,
    pub h_total: f64,
    pub boundary_work_heat: f64,
    pub entropy_dissipation_integral: f64,
    pub entropy_source_integral: f64,
    pub reactant_boundary_integral: f64,
    pub entropy_residual: f64,
    pub reactant_r1: f64,
    pub reactant_r2: f64,
    pub first_law_residual: f64,
}

impl FunctionalRecord {
    /// Column names in output order.
    pub const COLUMNS: [&'static str; 29] = [
        "t",
        "step",
        "dt",
        "lyapunov",
        "dissipation_V",
        "reactant_mass",
        "reactant_sq",
        "burn_integral",
        "burn_sq_integral",
        "X",
        "Y",
        "Z",
        "gplus_sup",
        "min_v",
        "max_v",
        "min_theta",
        "max_theta",
        "min_z",
        "max_z",
        "supnorm_dev",
        "H_total",
        "boundary_work_heat",
        "entropy_dissipation_integral",
        "entropy_source_integral",
        "reactant_boundary_integral",
        "entropy_residual",
        "reactant_r1",
        "reactant_r2",
        "first_law_residual",
    ];

    /// Values in the order of [`Self::COLUMNS`]; `step` is exact below 2^53.
    pub fn values(&self) -> [f64; 29] {
        [
            self.t,
            self.step as f64,
            self.dt,
            self.lyapunov,
            self.dissipation_v,
            self.reactant_mass,
            self.reactant_sq,
            self.burn_integral,
            self.burn_sq_integral,
            self.x_functional,
            self.y_functional,
            self.z_functional,
            self.gplus_sup,
            self.min_v,
            self.max_v,
            self.min_theta,
            self.max_theta,
            self.min_z,
            self.max_z,
            self.supnorm_dev,
            self.h_total,
            self.boundary_work_heat,
            self.entropy_dissipation_integral,
            self.entropy_source_integral,
            self.reactant_boundary_integral,
            self.entropy_residual,
            self.reactant_r1,
            self.reactant_r2,
            self.first_law_residual,
        ]
    }
}

/// `sum (E~(v, theta) + u^2/2) dx`, with the kinetic part on nodes.
pub fn lyapunov_functional(p: &PhysParams, grid: &Grid, s: &State) -> f64 {
    let cells: f64 = s
        .v
        .iter()
        .zip(&s.theta)
        .map(|(&v, &th)| normalized_entropy_raw(p, v, th))
        .sum();
    let kinetic: f64 = s.u.iter().map(|u| 0.5 * u * u).sum();
    (cells + kinetic) * grid.dx()
}

/// `sum (e + lambda z) dx + sum u^2/2 dx`.
pub fn total_energy(p: &PhysParams, grid: &Grid, s: &State) -> f64 {
    let cells: f64 = (0..s.v.len())
        .map(|i| p.e(s.v[i], s.theta[i]) + p.lambda_heat * s.z[i])
        .sum();
    let kinetic: f64 = s.u.iter().map(|u| 0.5 * u * u).sum();
    (cells + kinetic) * grid.dx()
}

/// `sup |(v - 1, u, theta - 1, z)|`.
pub fn decay_metric(s: &State) -> f64 {
    let mut m = 0.0f64;
    for i in 0..s.v.len() {
        m = m.max((s.v[i] - 1.0).abs()).max((s.theta[i] - 1.0).abs()).max(s.z[i].abs());
    }
    s.u.iter().fold(m, |m, u| m.max(u.abs()))
}

/// Heat-conduction part shared by the dissipation rate and the entropy
/// identity: `sum_j k_j ((theta_j - theta_{j-1}) / h_j)^2 h_j / (theta_{j-1} theta_j)`.
fn conduction_dissipation(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s: &State,
    rf: &RadiusField,
) -> f64 {
    let n = grid.n_cells();
    let mut k = vec![0.0; n + 1];
    let mut sp = vec![0.0; n + 1];
    heat_links(p, bc, grid.dx(), &s.v, &s.theta, rf, &mut k, &mut sp);
    let mut acc = 0.0;
    for j in 1..=n {
        let (left, right) = if j == n {
            (s.theta[n - 1], outer_value(bc, s.theta[n - 1], 1.0))
        } else {
            (s.theta[j - 1], s.theta[j])
        };
        let grad = (right - left) / sp[j];
        acc += k[j] * grad * grad * sp[j] / (left * right);
    }
    acc
}

/// The non-negative functional
/// `V = int kappa (r^{n-1} theta_x)^2/(v theta^2) + |(r^{n-1}u)_x|^2/(v theta)
///      + v u^2/(r^2 theta) + r^{2n-2} u_x^2/(v theta) + phi z / theta`.
pub fn dissipation_rate(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s: &State,
    rf: &RadiusField,
) -> f64 {
    let n = grid.n_cells();
    let dx = grid.dx();
    let heat = conduction_dissipation(p, grid, bc, s, rf);
    let d = mass_flux(p, grid, s, rf);
    let e2 = 2 * p.n_dim as i32 - 2;
    let mut cells = 0.0;
    for i in 0..n {
        let (v, th) = (s.v[i], s.theta[i]);
        let ux = (s.u[i + 1] - s.u[i]) / dx;
        let rc = nth_root(0.5 * (rf.rn[i] + rf.rn[i + 1]), p.n_dim);
        cells += d[i] * d[i] / (v * th)
            + rpow(rc, e2) * ux * ux / (v * th)
            + p.phi(th) * s.z[i] / th;
    }
    let mut nodes = 0.0;
    for j in 1..n {
        let vb = 0.5 * (s.v[j - 1] + s.v[j]);
        let tb = 0.5 * (s.theta[j - 1] + s.theta[j]);
        nodes += vb * s.u[j] * s.u[j] / (rf.r[j] * rf.r[j] * tb);
    }
    heat + (cells + nodes) * dx
}

/// Instantaneous integrands of the time-integrated identities.
#[derive(Debug, Clone, Copy, Default)]
struct Rates {
    /// `int phi z`.
    burn: f64,
    /// `int (d r^{2n-2} z_x^2 / v^2 + phi z^2)`.
    burn_sq: f64,
    /// Entropy dissipation: conduction, mechanical and `lambda phi z/theta`.
    entropy_diss: f64,
    /// `int lambda phi z`.
    entropy_src: f64,
    /// `int r^{2n-2} (1 + theta^{2b}) theta_x^2`.
    y_density: f64,
    /// `int u_xx^2`.
    z_density: f64,
}

fn rates(p: &PhysParams, grid: &Grid, bc: BoundaryConditions, s: &State, rf: &RadiusField) -> Rates {
    let n = grid.n_cells();
    let dx = grid.dx();
    let d = mass_flux(p, grid, s, rf);
    let k2 = p.n_dim as i32 - 2;
    let e2 = 2 * p.n_dim as i32 - 2;
    let visc = 2.0 * p.mu * (p.n() - 1.0);
    let alpha = p.alpha();

    let mut burn = 0.0;
    let mut burn_z2 = 0.0;
    let mut mech = 0.0;
    let mut react = 0.0;
    for i in 0..n {
        let (v, th, z) = (s.v[i], s.theta[i], s.z[i]);
        let phi = p.phi(th);
        burn += phi * z;
        burn_z2 += phi * z * z;
        let wr = rpow(rf.r[i + 1], k2) * s.u[i + 1] * s.u[i + 1];
        let wl = rpow(rf.r[i], k2) * s.u[i] * s.u[i];
        mech += alpha * d[i] * d[i] / (v * th) - visc * (wr - wl) / dx / th;
        react += p.lambda_heat * phi * z / th;
    }

    let mut c = vec![0.0; n + 1];
    let mut sp = vec![0.0; n + 1];
    species_links(p, bc, dx, &s.v, rf, &mut c, &mut sp);
    let mut grad_z = 0.0;
    for j in 1..=n {
        let (left, right) = if j == n {
            (s.z[n - 1], outer_value(bc, s.z[n - 1], 0.0))
        } else {
            (s.z[j - 1], s.z[j])
        };
        let g = (right - left) / sp[j];
        grad_z += c[j] * g * g * sp[j];
    }

    let mut y = 0.0;
    for j in 1..=n {
        let (left, right) = if j == n {
            (s.theta[n - 1], outer_value(bc, s.theta[n - 1], 1.0))
        } else {
            (s.theta[j - 1], s.theta[j])
        };
        let h = if j == n { sp[n] } else { dx };
        let g = (right - left) / h;
        let tb = 0.5 * (left + right);
        y += rpow(rf.r[j], e2) * (1.0 + real_pow(tb, 2.0 * p.b_exp)) * g * g * h;
    }
    let mut zz = 0.0;
    for j in 1..n {
        let uxx = (s.u[j + 1] - 2.0 * s.u[j] + s.u[j - 1]) / (dx * dx);
        zz += uxx * uxx;
    }

    let heat = conduction_dissipation(p, grid, bc, s, rf);
    Rates {
        burn: burn * dx,
        burn_sq: grad_z + burn_z2 * dx,
        entropy_diss: heat + (mech + react) * dx,
        entropy_src: p.lambda_heat * burn * dx,
        y_density: y,
        z_density: zz * dx,
    }
}

/// Accumulates the time integrals between accepted steps and produces
/// [`FunctionalRecord`] samples.
#[derive(Debug, Clone)]
pub struct Monitor {
    p: PhysParams,
    grid: Grid,
    bc: BoundaryConditions,
    rf: RadiusField,
    prev: Rates,
    step: u64,
    last_dt: f64,
    burn: f64,
    burn_sq: f64,
    entropy_diss: f64,
    entropy_src: f64,
    boundary_energy: f64,
    boundary_reactant: f64,
    x: f64,
    y: f64,
    z: f64,
    initial: FunctionalRecord,
}

impl Monitor {
    pub fn new(p: &PhysParams, grid: &Grid, bc: BoundaryConditions, s0: &State) -> Result<Self> {
        s0.check_layout(grid)?;
        let mut rf = RadiusField::with_nodes(grid.n_nodes());
        fill_radii(p.n_dim, grid.dx(), &s0.v, &mut rf);
        let r0 = rates(p, grid, bc, s0, &rf);
        let mut m = Monitor {
            p: *p,
            grid: *grid,
            bc,
            rf,
            prev: r0,
            step: 0,
            last_dt: 0.0,
            burn: 0.0,
            burn_sq: 0.0,
            entropy_diss: 0.0,
            entropy_src: 0.0,
            boundary_energy: 0.0,
            boundary_reactant: 0.0,
            x: 0.0,
            y: r0.y_density,
            z: r0.z_density,
            initial: FunctionalRecord::default(),
        };
        m.initial = m.raw_record(s0);
        m.initial = m.record(s0);
        Ok(m)
    }

    /// Folds the step `old -> new` into the accumulators.
    pub fn update(&mut self, old: &State, new: &State, info: &StepInfo) {
        let dt = new.t - old.t;
        fill_radii(self.p.n_dim, self.grid.dx(), &new.v, &mut self.rf);
        let cur = rates(&self.p, &self.grid, self.bc, new, &self.rf);
        let trap = |a: f64, b: f64| 0.5 * dt * (a + b);
        self.burn += trap(self.prev.burn, cur.burn);
        self.burn_sq += trap(self.prev.burn_sq, cur.burn_sq);
        self.entropy_diss += trap(self.prev.entropy_diss, cur.entropy_diss);
        self.entropy_src += trap(self.prev.entropy_src, cur.entropy_src);
        self.boundary_energy += info.boundary_energy;
        self.boundary_reactant += info.boundary_reactant;
        if dt > 0.0 {
            let b3 = self.p.b_exp + 3.0;
            let mut xs = 0.0;
            for i in 0..old.theta.len() {
                let tm = 0.5 * (old.theta[i] + new.theta[i]);
                let rate = (new.theta[i] - old.theta[i]) / dt;
                xs += (1.0 + real_pow(tm, b3)) * rate * rate;
            }
            self.x += xs * self.grid.dx() * dt;
        }
        self.y = self.y.max(cur.y_density);
        self.z = self.z.max(cur.z_density);
        self.prev = cur;
        self.step += 1;
        self.last_dt = dt;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn initial(&self) -> &FunctionalRecord {
        &self.initial
    }

    fn raw_record(&mut self, s: &State) -> FunctionalRecord {
        fill_radii(self.p.n_dim, self.grid.dx(), &s.v, &mut self.rf);
        let p = &self.p;
        let dx = self.grid.dx();
        let fold = |xs: &[f64]| {
            xs.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
        };
        let (min_v, max_v) = fold(&s.v);
        let (min_theta, max_theta) = fold(&s.theta);
        let (min_z, max_z) = fold(&s.z);
        let gplus_sup = s.theta.iter().fold(0.0f64, |m, &t| m.max(1.0 / t - 1.0));
        FunctionalRecord {
            t: s.t,
            step: self.step,
            dt: self.last_dt,
            lyapunov: lyapunov_functional(p, &self.grid, s),
            dissipation_v: dissipation_rate(p, &self.grid, self.bc, s, &self.rf),
            reactant_mass: s.z.iter().sum::<f64>() * dx,
            reactant_sq: s.z.iter().map(|z| z * z).sum::<f64>() * dx,
            burn_integral: self.burn,
            burn_sq_integral: self.burn_sq,
            x_functional: self.x,
            y_functional: self.y,
            z_functional: self.z,
            gplus_sup,
            min_v,
            max_v,
            min_theta,
            max_theta,
            min_z,
            max_z,
            supnorm_dev: decay_metric(s),
            h_total: total_energy(p, &self.grid, s),
            boundary_work_heat: self.boundary_energy,
            entropy_dissipation_integral: self.entropy_diss,
            entropy_source_integral: self.entropy_src,
            reactant_boundary_integral: self.boundary_reactant,
            ..FunctionalRecord::default()
        }
    }

    /// Samples the current state, including the identity residuals measured
    /// from the initial record.
    pub fn record(&mut self, s: &State) -> FunctionalRecord {
        let mut r = self.raw_record(s);
        let pair = [self.initial, r];
        r.entropy_residual = entropy_identity_residual(&pair).unwrap_or(f64::NAN);
        let (r1, r2) = reactant_identities(&pair).unwrap_or((f64::NAN, f64::NAN));
        r.reactant_r1 = r1;
        r.reactant_r2 = r2;
        r.first_law_residual = first_law_balance(&pair).unwrap_or(f64::NAN);
        r
    }
}

fn endpoints(history: &[FunctionalRecord]) -> Result<(&FunctionalRecord, &FunctionalRecord)> {
    let (first, last) = match (history.first(), history.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::HistoryGap("empty history".into())),
    };
    let accumulated = [
        first.burn_integral,
        first.burn_sq_integral,
        first.entropy_dissipation_integral,
        first.entropy_source_integral,
        first.boundary_work_heat,
        first.reactant_boundary_integral,
        first.x_functional,
    ];
    if accumulated.iter().any(|&a| a != 0.0) {
        return Err(Error::HistoryGap(format!(
            "first sample at t = {} already carries accumulated integrals",
            first.t
        )));
    }
    if history.windows(2).any(|w| w[1].t < w[0].t || w[1].step < w[0].step) {
        return Err(Error::HistoryGap("samples are not in time order".into()));
    }
    Ok((first, last))
}

/// `|L(t) + int diss - L(0) - int lambda phi z|`, the time-integrated
/// entropy identity; boundary terms vanish at the truncation point because
/// `u = 0` there and `theta = 1` (far field) or the heat flux is zero.
pub fn entropy_identity_residual(history: &[FunctionalRecord]) -> Result<f64> {
    let (a, b) = endpoints(history)?;
    Ok((b.lyapunov + b.entropy_dissipation_integral - a.lyapunov - b.entropy_source_integral).abs())
}

/// Residuals of the reactant balances
/// `int z + int int phi z = int z0 (+ boundary inflow)` and
/// `int z^2 + 2 int int (d r^{2n-2} z_x^2/v^2 + phi z^2) = int z0^2`.
pub fn reactant_identities(history: &[FunctionalRecord]) -> Result<(f64, f64)> {
    let (a, b) = endpoints(history)?;
    let r1 = b.reactant_mass + b.burn_integral - a.reactant_mass - b.reactant_boundary_integral;
    let r2 = b.reactant_sq + 2.0 * b.burn_sq_integral - a.reactant_sq;
    Ok((r1.abs(), r2.abs()))
}

/// `|H(t) - H(0) - accumulated boundary inflow|`.
pub fn first_law_balance(history: &[FunctionalRecord]) -> Result<f64> {
    let (a, b) = endpoints(history)?;
    Ok((b.h_total - a.h_total - b.boundary_work_heat).abs())
}

/// Latest `(X, Y, Z)`.
pub fn xyz_functionals(history: &[FunctionalRecord]) -> Result<(f64, f64, f64)> {
    let (_, b) = endpoints(history)?;
    Ok((b.x_functional, b.y_functional, b.z_functional))
}

/// `||g+||_inf` over time with a least-squares growth slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GplusReport {
    pub series: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest `g+(t) - g+(s)` over `s < t`, divided by `t - s`; the
    /// tightest constant in `g+(t) <= g+(s) + C (t - s)`.
    pub envelope_rate: f64,
}

pub fn gplus_tracker(history: &[FunctionalRecord]) -> Result<GplusReport> {
    if history.is_empty() {
        return Err(Error::HistoryGap("empty history".into()));
    }
    let series: Vec<(f64, f64)> = history.iter().map(|r| (r.t, r.gplus_sup)).collect();
    let m = series.len() as f64;
    let (st, sg) = series.iter().fold((0.0, 0.0), |(a, b), &(t, g)| (a + t, b + g));
    let (mt, mg) = (st / m, sg / m);
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, g) in &series {
        num += (t - mt) * (g - mg);
        den += (t - mt) * (t - mt);
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    let mut envelope_rate = 0.0f64;
    for (k, &(t, g)) in series.iter().enumerate() {
        for &(s, gs) in &series[..k] {
            if t > s {
                envelope_rate = envelope_rate.max((g - gs) / (t - s));
            }
        }
    }
    Ok(GplusReport { series, slope, intercept: mg - slope * mt, envelope_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::radius_from_volume;
    use crate::grid::{make_initial_condition, IcFamily};
    use crate::solver::{Stepper, StepperConfig};

    #[test]
    fn equilibrium_functionals_vanish() {
        let p = PhysParams::default();
        let g = Grid::with_extent(64, 10.0).unwrap();
        let s = State::equilibrium(&g);
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        assert_eq!(lyapunov_functional(&p, &g, &s), 0.0);
        assert_eq!(dissipation_rate(&p, &g, BoundaryConditions::far_field(), &s, &rf), 0.0);
        assert_eq!(decay_metric(&s), 0.0);
    }

    #[test]
    fn lyapunov_pointwise_times_measure() {
        let p = PhysParams { a_rad: 0.0, ..PhysParams::default() };
        let g = Grid::new(40, 0.1).unwrap();
        let mut s = State::equilibrium(&g);
        for i in 0..10 {
            s.theta[i] = std::f64::consts::E;
        }
        let l = lyapunov_functional(&p, &g, &s);
        assert!((l - (std::f64::consts::E - 2.0)).abs() < 1e-14);
    }

    /// Four cells, `u = 0`, one temperature jump: only the conduction term
    /// contributes, `k (dtheta/dx)^2 dx / (theta_l theta_r)` at one node.
    #[test]
    fn dissipation_hand_computation() {
        let p = PhysParams { n_dim: 1, kappa2: 0.0, ..PhysParams::default() };
        let g = Grid::new(8, 0.5).unwrap();
        let mut s = State::equilibrium(&g);
        s.theta = vec![2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        let v = dissipation_rate(&p, &g, BoundaryConditions::closed_box(), &s, &rf);
        let expect = 1.0 * (1.0 / 0.5f64).powi(2) * 0.5 / 2.0;
        assert!((v - expect).abs() < 1e-15, "{v}");
    }

    #[test]
    fn gplus_examples() {
        let mk = |t: f64, th: f64| FunctionalRecord { t, gplus_sup: (1.0 / th - 1.0f64).max(0.0), ..Default::default() };
        let rep = gplus_tracker(&[mk(0.0, 2.0), mk(1.0, 1.5)]).unwrap();
        assert!(rep.series.iter().all(|&(_, g)| g == 0.0));
        let rep = gplus_tracker(&[mk(0.0, 0.5), mk(1.0, 0.5)]).unwrap();
        assert_eq!(rep.series[1].1, 1.0);
        assert_eq!(rep.slope, 0.0);
    }

    #[test]
    fn history_checks() {
        assert!(matches!(entropy_identity_residual(&[]), Err(Error::HistoryGap(_))));
        let late = FunctionalRecord { t: 3.0, burn_integral: 0.2, ..Default::default() };
        assert!(matches!(reactant_identities(&[late]), Err(Error::HistoryGap(_))));
        let zero = FunctionalRecord::default();
        assert_eq!(entropy_identity_residual(&[zero]).unwrap(), 0.0);
    }

    #[test]
    fn accumulators_monotone_and_balanced() {
        let p = PhysParams::default();
        let g = Grid::with_extent(128, 16.0).unwrap();
        let bc = BoundaryConditions::far_field();
        let mut s = make_initial_condition(&g, IcFamily::GaussianBump, 0.1, 1.0).unwrap();
        let mut st = Stepper::new(p, g, bc, StepperConfig::default()).unwrap();
        let mut mon = Monitor::new(&p, &g, bc, &s).unwrap();
        let mut hist = vec![mon.record(&s)];
        for _ in 0..100 {
            let old = s.clone();
            let dt = st.next_dt(&s, 1.0);
            let info = st.advance(&mut s, dt).unwrap();
            mon.update(&old, &s, &info);
            let r = mon.record(&s);
            let prev = hist.last().unwrap();
            assert!(r.burn_integral >= prev.burn_integral);
            assert!(r.burn_sq_integral >= prev.burn_sq_integral);
            assert!(r.x_functional >= prev.x_functional);
            assert!(r.y_functional >= prev.y_functional);
            assert!(r.z_functional >= prev.z_functional);
            hist.push(r);
        }
        let last = hist.last().unwrap();
        assert!(last.entropy_residual < 1e-4, "{}", last.entropy_residual);
        assert!(last.reactant_r1 < 1e-4 && last.reactant_r2 < 1e-4);
        assert!(last.first_law_residual < 1e-12 * last.h_total);
    }
}

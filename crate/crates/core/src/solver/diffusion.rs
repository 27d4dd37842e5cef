//! Implicit heat conduction and species diffusion at frozen `v`, `u`.
//!
//! Both substeps are written as conservative flux differences, so the
//! change of the cell sums equals the boundary flux times the step to
//! roundoff.

use crate::constitutive::{real_pow, PhysParams};
use crate::error::{Error, Result};
use crate::geometry::RadiusField;
use crate::grid::{BoundaryConditions, Grid, OuterBoundary, State};
use crate::solver::operators::{mass_flux, outer_value, rpow, species_fluxes, species_links};
use crate::tridiag::Tridiag;

/// Controls for [`energy_step_implicit`].
#[derive(Debug, Clone, Copy)]
pub struct EnergyStepOptions<'a> {
    /// Implicitness weight: 1 is backward Euler, 0.5 Crank-Nicolson, 0
    /// fully explicit.
    pub theta_weight: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Include compression work, viscous heating and the geometric
    /// viscous term, using the frozen velocity.
    pub mechanical: bool,
    /// Additional explicit heating rate per cell.
    pub heat: Option<&'a [f64]>,
}

impl Default for EnergyStepOptions<'_> {
    fn default() -> Self {
        EnergyStepOptions {
            theta_weight: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            mechanical: false,
            heat: None,
        }
    }
}

/// Result of one conduction solve.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStepOutcome {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Energy that entered through the outer boundary during the step.
    pub boundary_inflow: f64,
}

/// Maximum number of step halvings when a Newton update would make the
/// temperature non-positive.
const MAX_DAMPING: usize = 20;

struct Conduction<'a> {
    p: &'a PhysParams,
    bc: BoundaryConditions,
    dx: f64,
    v: &'a [f64],
    /// `r^{2n-2}` at the nodes.
    r_fac: &'a [f64],
    /// Compression rate and viscous work divergence held fixed over the
    /// substep, if requested.
    work: Option<(Vec<f64>, Vec<f64>)>,
    /// `b - 1` when it is a small integer.
    b1: Option<i32>,
}

#[derive(Debug, Clone, Default)]
struct Fluxes {
    q: Vec<f64>,
    dq_left: Vec<f64>,
    dq_right: Vec<f64>,
}

/// Scratch buffers reused across conduction substeps.
#[derive(Debug, Clone, Default)]
pub(crate) struct ConductionWork {
    r_fac: Vec<f64>,
    fl: Fluxes,
    e0: Vec<f64>,
    explicit: Vec<f64>,
    theta: Vec<f64>,
    resid: Vec<f64>,
    trial: Vec<f64>,
    sys: Tridiag,
    /// Accepted temperatures of the last substep.
    pub out: Vec<f64>,
}

/// Scalar results of [`conduction_substep`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConductionStats {
    pub iterations: usize,
    pub residual: f64,
    pub boundary_inflow: f64,
}

impl<'a> Conduction<'a> {
    #[inline]
    fn kappa_and_slope(&self, j: usize, vb: f64, tb: f64) -> (f64, f64) {
        let p = self.p;
        let tb_b1 = match self.b1 {
            Some(k) => rpow(tb, k),
            None => real_pow(tb, p.b_exp - 1.0),
        };
        let kap = p.kappa1 + p.kappa2 * vb * (tb_b1 * tb);
        let slope = p.kappa2 * p.b_exp * tb_b1;
        (self.r_fac[j] * kap / vb, self.r_fac[j] * slope)
    }

    /// Node fluxes and their derivatives with respect to the left and right
    /// cell temperatures.
    fn fluxes(&self, theta: &[f64], out: &mut Fluxes) {
        let n = theta.len();
        out.q[0] = 0.0;
        out.dq_left[0] = 0.0;
        out.dq_right[0] = 0.0;
        for j in 1..n {
            let vb = 0.5 * (self.v[j - 1] + self.v[j]);
            let tb = 0.5 * (theta[j - 1] + theta[j]);
            let (k, dk) = self.kappa_and_slope(j, vb, tb);
            let grad = (theta[j] - theta[j - 1]) / self.dx;
            out.q[j] = k * grad;
            out.dq_left[j] = -k / self.dx + 0.5 * dk * grad;
            out.dq_right[j] = k / self.dx + 0.5 * dk * grad;
        }
        match self.bc.outer {
            OuterBoundary::FarField => {
                let tb = 0.5 * (theta[n - 1] + 1.0);
                let (k, dk) = self.kappa_and_slope(n, self.v[n - 1], tb);
                let h = 0.5 * self.dx;
                let grad = (outer_value(self.bc, theta[n - 1], 1.0) - theta[n - 1]) / h;
                out.q[n] = k * grad;
                out.dq_left[n] = -k / h + 0.5 * dk * grad;
            }
            OuterBoundary::ClosedBox => {
                out.q[n] = 0.0;
                out.dq_left[n] = 0.0;
            }
        }
        out.dq_right[n] = 0.0;
    }

    /// Mechanical source and its temperature derivative for cell `i`.
    fn work(&self, i: usize, theta: f64) -> (f64, f64) {
        match &self.work {
            None => (0.0, 0.0),
            Some((d, w_div)) => {
                let p = self.p;
                let v = self.v[i];
                let di = d[i];
                let g = -theta * p.p_theta(v, theta) * di + p.alpha() * di * di / v
                    - w_div[i];
                let dg = -di * (p.r_gas / v + 16.0 / 3.0 * p.a_rad * theta.powi(3));
                (g, dg)
            }
        }
    }
}

/// One conduction substep for the temperature at frozen `v`, `u`, `z`.
///
/// Solves `e(v, theta1) - e(v, theta0) = dt [w S(theta1) + (1 - w) S(theta0)]`
/// with `S` the conductive flux divergence plus optional sources, by Newton
/// iteration on a tridiagonal Jacobian that includes the temperature
/// dependence of the conductivity. The accepted temperature is finally
/// re-derived from the flux-form energy update so the energy balance is
/// exact to roundoff.
pub fn energy_step_implicit(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s: &State,
    rf: &RadiusField,
    dt: f64,
    opts: &EnergyStepOptions<'_>,
) -> Result<EnergyStepOutcome> {
    s.check_layout(grid)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut work = ConductionWork::default();
    let stats = conduction_substep(p, grid, bc, s, rf, dt, opts, &mut work)?;
    Ok(EnergyStepOutcome {
        theta: work.out,
        iterations: stats.iterations,
        residual: stats.residual,
        boundary_inflow: stats.boundary_inflow,
    })
}

/// Allocation-free core of [`energy_step_implicit`]; the new temperatures
/// are left in `wk.out`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conduction_substep(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s: &State,
    rf: &RadiusField,
    dt: f64,
    opts: &EnergyStepOptions<'_>,
    wk: &mut ConductionWork,
) -> Result<ConductionStats> {
    let n = grid.n_cells();
    let dx = grid.dx();
    let w = opts.theta_weight;
    let e2 = 2 * p.n_dim as i32 - 2;
    let work = if opts.mechanical {
        let d = mass_flux(p, grid, s, rf);
        let visc = 2.0 * p.mu * (p.n() - 1.0);
        let k2 = p.n_dim as i32 - 2;
        let wn: Vec<f64> = (0..=n).map(|j| rpow(rf.r[j], k2) * s.u[j] * s.u[j]).collect();
        let w_div = (0..n).map(|i| visc * (wn[i + 1] - wn[i]) / dx).collect();
        Some((d, w_div))
    } else {
        None
    };
    let ConductionWork { r_fac, fl, e0, explicit, theta, resid, trial, sys, out } = wk;
    r_fac.clear();
    r_fac.extend(rf.r.iter().map(|&r| rpow(r, e2)));
    let b1 = p.b_exp - 1.0;
    let b1 = (b1 == b1.trunc() && b1.abs() <= 4.0).then_some(b1 as i32);
    let cond = Conduction { p, bc, dx, v: &s.v, r_fac, work, b1 };
    for buf in [&mut fl.q, &mut fl.dq_left, &mut fl.dq_right] {
        buf.resize(n + 1, 0.0);
    }
    for buf in [&mut *e0, &mut *explicit, &mut *resid, &mut *trial, &mut *out] {
        buf.resize(n, 0.0);
    }
    sys.resize(n);

    let theta0 = &s.theta;
    for i in 0..n {
        e0[i] = p.e(s.v[i], theta0[i]);
    }
    cond.fluxes(theta0, fl);
    let q0_out = fl.q[n];
    for i in 0..n {
        let src = (fl.q[i + 1] - fl.q[i]) / dx + cond.work(i, theta0[i]).0;
        let heat = opts.heat.map_or(0.0, |h| h[i]);
        explicit[i] = dt * ((1.0 - w) * src + heat);
    }

    theta.clear();
    theta.extend_from_slice(theta0);
    let mut iterations = 0;
    let mut residual = 0.0;
    let mut q_out = q0_out;
    if w > 0.0 {
        let scale = e0.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
        let mut converged = false;
        loop {
            // On the first pass `theta` is still `theta0`, whose fluxes are
            // already in `fl`.
            if iterations > 0 {
                cond.fluxes(theta, fl);
            }
            residual = 0.0;
            for i in 0..n {
                let (g, _) = cond.work(i, theta[i]);
                let src = (fl.q[i + 1] - fl.q[i]) / dx + g;
                resid[i] = p.e(s.v[i], theta[i]) - e0[i] - dt * w * src - explicit[i];
                residual = f64::max(residual, resid[i].abs());
            }
            if !residual.is_finite() {
                return Err(Error::NewtonDivergence { iterations, residual });
            }
            if residual <= opts.newton_tol * scale {
                converged = true;
                q_out = fl.q[n];
                break;
            }
            if iterations >= opts.newton_max_iter {
                break;
            }
            iterations += 1;
            let hw = dt * w / dx;
            for i in 0..n {
                let (_, dg) = cond.work(i, theta[i]);
                // dF_i/dtheta: F_i = (q_{i+1} - q_i) / dx.
                sys.lower[i] = hw * fl.dq_left[i];
                sys.upper[i] = -hw * fl.dq_right[i + 1];
                sys.diag[i] = p.e_theta(s.v[i], theta[i])
                    - hw * (fl.dq_left[i + 1] - fl.dq_right[i])
                    - dt * w * dg;
                sys.rhs[i] = resid[i];
            }
            if !sys.solve() {
                return Err(Error::NewtonDivergence { iterations, residual });
            }
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_DAMPING {
                let mut ok = true;
                for i in 0..n {
                    trial[i] = theta[i] - lambda * sys.rhs[i];
                    ok &= trial[i] > 0.0;
                }
                if ok {
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                let index = trial.iter().position(|&t| !(t > 0.0)).unwrap_or(0);
                return Err(Error::PositivityLoss { stage: "conduction", index });
            }
            std::mem::swap(theta, trial);
        }
        if !converged {
            return Err(Error::NewtonDivergence { iterations, residual });
        }
    }

    // Conservative finalisation from the flux form.
    for i in 0..n {
        let implicit = if w > 0.0 {
            let (g, _) = cond.work(i, theta[i]);
            dt * w * ((fl.q[i + 1] - fl.q[i]) / dx + g)
        } else {
            0.0
        };
        let e1 = e0[i] + implicit + explicit[i];
        out[i] = p
            .temperature_from_energy(s.v[i], e1, theta[i])
            .ok_or(Error::PositivityLoss { stage: "conduction", index: i })?;
    }
    let boundary_inflow = dt * (w * q_out + (1.0 - w) * q0_out);
    Ok(ConductionStats { iterations, residual, boundary_inflow })
}

/// Outcome of a species diffusion substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesOutcome {
    /// The Crank-Nicolson update left `[0, 1]` and was replaced by a
    /// backward-Euler one.
    pub fell_back: bool,
    /// Reactant mass that entered through the outer boundary.
    pub boundary_inflow: f64,
}

/// Species diffusion at frozen `v`: the weighted scheme
/// `z1 - z0 = dt [w L z1 + (1 - w) L z0]`. When the result leaves `[0, 1]`
/// and `fallback` is set the step is redone with backward Euler, whose
/// M-matrix preserves the bounds.
/// Scratch buffers reused across species substeps.
#[derive(Debug, Clone, Default)]
pub(crate) struct SpeciesWork {
    c: Vec<f64>,
    sp: Vec<f64>,
    a: Vec<f64>,
    s0: Vec<f64>,
    z0: Vec<f64>,
    sys: Tridiag,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn species_substep(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    v: &[f64],
    rf: &RadiusField,
    z: &mut [f64],
    dt: f64,
    weight: f64,
    fallback: bool,
    wk: &mut SpeciesWork,
) -> SpeciesOutcome {
    let n = z.len();
    if p.d_diff == 0.0 {
        return SpeciesOutcome { fell_back: false, boundary_inflow: 0.0 };
    }
    let dx = grid.dx();
    let SpeciesWork { c, sp, a, s0, z0, sys } = wk;
    for buf in [&mut *c, &mut *sp, &mut *a, &mut *s0] {
        buf.resize(n + 1, 0.0);
    }
    sys.resize(n);
    species_links(p, bc, dx, v, rf, c, sp);
    // a_j = c_j / (spacing_j dx) couples the two cells around node j.
    for j in 0..=n {
        a[j] = c[j] / (sp[j] * dx);
    }
    species_fluxes(bc, z, c, sp, s0);
    z0.clear();
    z0.extend_from_slice(z);

    let mut solve = |w: f64, out: &mut [f64]| {
        for i in 0..n {
            sys.lower[i] = -dt * w * a[i];
            sys.upper[i] = -dt * w * a[i + 1];
            sys.diag[i] = 1.0 + dt * w * (a[i] + a[i + 1]);
            sys.rhs[i] = z0[i] + dt * (1.0 - w) * (s0[i + 1] - s0[i]) / dx;
        }
        sys.lower[0] = 0.0;
        sys.upper[n - 1] = 0.0;
        let ok = sys.solve();
        debug_assert!(ok);
        out.copy_from_slice(&sys.rhs);
    };

    let mut w = weight;
    solve(w, z);
    let mut fell_back = false;
    if fallback && w < 1.0 && z.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        w = 1.0;
        solve(w, z);
        fell_back = true;
    }
    if fallback {
        for x in z.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
    }
    let s1_out = c[n] * (outer_value(bc, z[n - 1], 0.0) - z[n - 1]) / sp[n];
    SpeciesOutcome {
        fell_back,
        boundary_inflow: dt * (w * s1_out + (1.0 - w) * s0[n]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::radius_from_volume;
    use crate::grid::{make_initial_condition, IcFamily};

    fn slab_params() -> PhysParams {
        PhysParams {
            n_dim: 1,
            a_rad: 0.0,
            kappa2: 0.0,
            kappa1: 0.7,
            c_v: 1.3,
            ..PhysParams::default()
        }
    }

    #[test]
    fn uniform_temperature_is_fixed() {
        let p = PhysParams::default();
        let g = Grid::with_extent(32, 8.0).unwrap();
        let s = State::equilibrium(&g);
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        for dt in [1e-3, 1.0, 100.0] {
            let out = energy_step_implicit(
                &p,
                &g,
                BoundaryConditions::far_field(),
                &s,
                &rf,
                dt,
                &EnergyStepOptions::default(),
            )
            .unwrap();
            assert!(out.theta.iter().all(|&t| t == 1.0));
        }
    }

    /// Backward Euler on a Neumann cosine mode: the discrete eigenvalue of
    /// the Laplacian gives the decay factor `1 / (1 + kappa1 k^2 dt / (c_v v))`
    /// with `k^2 = (4/dx^2) sin^2(k_c dx / 2)` for the continuous wavenumber
    /// `k_c`.
    #[test]
    fn backward_euler_symbol() {
        for vol in [1.0, 1.7] {
            let p = slab_params();
            let cells = 40;
            let g = Grid::with_extent(cells, 4.0).unwrap();
            let mut s = State::equilibrium(&g);
            s.v = vec![vol; cells];
            let kc = 3.0 * std::f64::consts::PI / g.x_max();
            let eps = 1e-3;
            for i in 0..cells {
                s.theta[i] = 1.0 + eps * (kc * g.cell_center(i)).cos();
            }
            let rf = radius_from_volume(&p, &g, &s.v).unwrap();
            let dt = 0.05;
            let opts = EnergyStepOptions { newton_tol: 1e-14, ..EnergyStepOptions::default() };
            let out = energy_step_implicit(&p, &g, BoundaryConditions::closed_box(), &s, &rf, dt, &opts)
                .unwrap();
            let k2 = 4.0 / (g.dx() * g.dx()) * (0.5 * kc * g.dx()).sin().powi(2);
            let factor = 1.0 / (1.0 + p.kappa1 * k2 * dt / (p.c_v * vol));
            for i in 0..cells {
                let expect = 1.0 + eps * factor * (kc * g.cell_center(i)).cos();
                assert!((out.theta[i] - expect).abs() < 1e-10 * eps.max(1e-3), "v={vol} i={i}");
            }
        }
    }

    /// Slab harness with negligible pressure: only viscous dissipation acts,
    /// so temperature rises exactly where the velocity divergence is nonzero.
    #[test]
    fn viscous_heating_raises_temperature() {
        let p = PhysParams {
            n_dim: 1,
            r_gas: 1e-12,
            a_rad: 0.0,
            kappa1: 1e-12,
            kappa2: 0.0,
            ..PhysParams::default()
        };
        let g = Grid::with_extent(64, 8.0).unwrap();
        let mut s = State::equilibrium(&g);
        for j in 1..64 {
            s.u[j] = 0.2 * (std::f64::consts::PI * g.node(j) / 8.0).sin();
        }
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        let opts = EnergyStepOptions { mechanical: true, ..EnergyStepOptions::default() };
        let out = energy_step_implicit(&p, &g, BoundaryConditions::closed_box(), &s, &rf, 1e-3, &opts)
            .unwrap();
        let d = mass_flux(&p, &g, &s, &rf);
        for i in 0..64 {
            if d[i].abs() > 1e-6 {
                assert!(out.theta[i] > 1.0, "cell {i}");
            }
        }
    }

    #[test]
    fn energy_balance_is_exact() {
        let p = PhysParams::default();
        let g = Grid::with_extent(128, 10.0).unwrap();
        let s = make_initial_condition(&g, IcFamily::GaussianBump, 0.3, 1.0).unwrap();
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        for (bc, w) in [
            (BoundaryConditions::far_field(), 0.5),
            (BoundaryConditions::closed_box(), 1.0),
            (BoundaryConditions::far_field(), 0.0),
        ] {
            let opts = EnergyStepOptions { theta_weight: w, ..EnergyStepOptions::default() };
            let dt = if w == 0.0 { 1e-5 } else { 0.01 };
            let out = energy_step_implicit(&p, &g, bc, &s, &rf, dt, &opts).unwrap();
            let before: f64 = (0..128).map(|i| p.e(s.v[i], s.theta[i])).sum::<f64>() * g.dx();
            let after: f64 = (0..128).map(|i| p.e(s.v[i], out.theta[i])).sum::<f64>() * g.dx();
            let defect = after - before - out.boundary_inflow;
            assert!(defect.abs() < 1e-13 * before, "{bc:?} w={w}: {defect}");
        }
    }

    #[test]
    fn species_bounds_and_mass() {
        let p = PhysParams::default();
        let g = Grid::with_extent(64, 8.0).unwrap();
        let s = make_initial_condition(&g, IcFamily::ReactantStep, 0.0, 1.0).unwrap();
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        for dt in [1e-3, 1.0, 50.0] {
            let mut z = s.z.clone();
            let out = species_substep(
                &p,
                &g,
                BoundaryConditions::far_field(),
                &s.v,
                &rf,
                &mut z,
                dt,
                0.5,
                true,
                &mut SpeciesWork::default(),
            );
            assert!(z.iter().all(|&x| (0.0..=1.0).contains(&x)));
            if !out.fell_back {
                let before: f64 = s.z.iter().sum::<f64>() * g.dx();
                let after: f64 = z.iter().sum::<f64>() * g.dx();
                assert!((after - before - out.boundary_inflow).abs() < 1e-13);
            }
        }
    }
}

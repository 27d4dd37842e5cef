//! Forward-Euler reference integrator on the unsplit semi-discrete system,
//! for cross-checking the split stepper on small grids.

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::geometry::{fill_radii, RadiusField};
use crate::grid::{BoundaryConditions, Grid, State};
use crate::solver::{compute_dt, semi_discrete_rhs, StepperConfig};

/// Explicit stability limit of the unsplit system: acoustic CFL 0.9 and the
/// explicit conduction bound.
pub fn oracle_dt_limit(p: &PhysParams, grid: &Grid, s: &State) -> f64 {
    let mut rf = RadiusField::with_nodes(grid.n_nodes());
    fill_radii(p.n_dim, grid.dx(), &s.v, &mut rf);
    let cfg = StepperConfig {
        cfl_hyper: 0.9,
        diff_theta_impl: false,
        dt_min: 0.0,
        dt_max: f64::INFINITY,
        ..StepperConfig::default()
    };
    compute_dt(p, grid, s, &rf, &cfg)
}

/// One forward-Euler step of all four equations. Energy is advanced in
/// conservative form and converted back to temperature.
pub fn oracle_step(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s: &State,
    dt: f64,
) -> Result<State> {
    s.check_layout(grid)?;
    if !(dt > 0.0) || dt > oracle_dt_limit(p, grid, s) {
        return Err(Error::OracleUnstable { dt });
    }
    let mut rf = RadiusField::with_nodes(grid.n_nodes());
    fill_radii(p.n_dim, grid.dx(), &s.v, &mut rf);
    let rhs = semi_discrete_rhs(p, grid, bc, s, &rf);
    let mut out = s.clone();
    for i in 0..grid.n_cells() {
        let e = p.e(s.v[i], s.theta[i]) + dt * rhs.e[i];
        out.v[i] = s.v[i] + dt * rhs.v[i];
        if !(out.v[i] > 0.0) {
            return Err(Error::OracleUnstable { dt });
        }
        out.theta[i] = p
            .temperature_from_energy(out.v[i], e, s.theta[i])
            .ok_or(Error::OracleUnstable { dt })?;
        out.z[i] = s.z[i] + dt * rhs.z[i];
    }
    for j in 0..=grid.n_cells() {
        out.u[j] = s.u[j] + dt * rhs.u[j];
    }
    out.t = s.t + dt;
    Ok(out)
}

/// Composes oracle steps over `span`, halving `dt_tiny` (up to 30 times)
/// whenever a step is unstable.
pub fn oracle_integrate(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s: &State,
    span: f64,
    dt_tiny: f64,
) -> Result<State> {
    let t_end = s.t + span;
    let mut h = dt_tiny;
    let mut cur = s.clone();
    let mut halvings = 0;
    while cur.t < t_end {
        let step = h.min(t_end - cur.t);
        match oracle_step(p, grid, bc, &cur, step) {
            Ok(next) => cur = next,
            Err(Error::OracleUnstable { .. }) if halvings < 30 => {
                halvings += 1;
                h *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    cur.t = t_end;
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_initial_condition, IcFamily};
    use crate::solver::Stepper;

    #[test]
    fn equilibrium_is_fixed() {
        let p = PhysParams::default();
        let g = Grid::with_extent(16, 4.0).unwrap();
        let s = State::equilibrium(&g);
        let o = oracle_integrate(&p, &g, BoundaryConditions::far_field(), &s, 1e-3, 1e-5).unwrap();
        assert_eq!((&o.v, &o.u, &o.theta, &o.z), (&s.v, &s.u, &s.theta, &s.z));
    }

    #[test]
    fn unstable_step_detected() {
        let p = PhysParams::default();
        let g = Grid::with_extent(16, 4.0).unwrap();
        let s = make_initial_condition(&g, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
        let lim = oracle_dt_limit(&p, &g, &s);
        assert!(matches!(
            oracle_step(&p, &g, BoundaryConditions::far_field(), &s, 2.0 * lim),
            Err(Error::OracleUnstable { .. })
        ));
    }

    /// Uniform gas at rest with `lambda = 0`: `z' = -phi(theta) z` with
    /// `theta` constant.
    #[test]
    fn z_decay_matches_exponential() {
        let p = PhysParams { lambda_heat: 0.0, ..PhysParams::default() };
        let g = Grid::with_extent(8, 2.0).unwrap();
        let mut s = State::equilibrium(&g);
        s.z = vec![0.5; 8];
        s.theta = vec![1.2; 8];
        let span = 0.1;
        let dt = 1e-5;
        let o = oracle_integrate(&p, &g, BoundaryConditions::closed_box(), &s, span, dt).unwrap();
        let phi = p.phi(1.2);
        let exact = 0.5 * (-phi * span).exp();
        // Forward Euler error: z0 phi^2 t dt / 2 to leading order.
        let bound = 0.5 * phi * phi * span * dt * 0.5 * 1.01;
        for &z in &o.z {
            assert!((z - exact).abs() <= bound, "{z} vs {exact}");
        }
    }

    /// Strang steps against a Richardson-extrapolated oracle reference: the
    /// discrepancy over a fixed horizon falls by about 4 per halving.
    #[test]
    fn strang_discrepancy_second_order() {
        let p = PhysParams::default();
        let g = Grid::with_extent(16, 4.0).unwrap();
        let bc = BoundaryConditions::far_field();
        let s0 = make_initial_condition(&g, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
        let span = 0.02;
        let a = oracle_integrate(&p, &g, bc, &s0, span, 1e-6).unwrap();
        let b = oracle_integrate(&p, &g, bc, &s0, span, 5e-7).unwrap();
        let refv: Vec<f64> = (0..16).map(|i| 2.0 * b.theta[i] - a.theta[i]).collect();
        let refu: Vec<f64> = (0..=16).map(|j| 2.0 * b.u[j] - a.u[j]).collect();
        let mut errs = Vec::new();
        for dt in [2e-3, 1e-3, 5e-4] {
            let cfg = StepperConfig { fixed_dt: Some(dt), ..StepperConfig::default() };
            let mut st = Stepper::new(p, g, bc, cfg).unwrap();
            let mut s = s0.clone();
            for _ in 0..(span / dt).round() as usize {
                st.advance(&mut s, dt).unwrap();
            }
            let e = (0..16)
                .map(|i| (s.theta[i] - refv[i]).abs())
                .chain((0..=16).map(|j| (s.u[j] - refu[j]).abs()))
                .fold(0.0f64, f64::max);
            errs.push(e);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.3 && ratio < 4.8, "ratio {ratio}, errors {errs:?}");
        }
    }
}

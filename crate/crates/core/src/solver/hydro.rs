//! Hydrodynamic substep: mass, momentum and mechanical energy exchange.
//!
//! Time discretisation is the implicit midpoint rule with secant geometric
//! weights. With `u` the node velocity and `ubar = (u0 + u1)/2`,
//!
//! ```text
//! u1_j = u0_j + h g_j (sigma_j - sigma_{j-1}) / dx
//! v1_i = v0_i + h (g_{i+1} ubar_{i+1} - g_i ubar_i) / dx
//! e1_i = e0_i + h [sigma_i D_i - 2 mu (n-1) (G_{i+1} ubar_{i+1}^2 - G_i ubar_i^2) / dx]
//! ```
//!
//! where `g_j = (r1^n - r0^n) / (n (r1 - r0))` expanded as a polynomial
//! mean, so that the node radii obtained from the new volumes move exactly
//! by `h ubar`. Summation by parts makes the kinetic plus internal energy
//! change vanish identically for any stress, so the stress is iterated to
//! self-consistency and then used once more in a final conservative pass.

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::geometry::{fill_radii, refine_radii, RadiusField};
use crate::grid::{Grid, State};
use crate::solver::operators::rpow;
use crate::tridiag::Tridiag;

/// Secant mean `(1/n) sum_k r1^k r0^(n-1-k)`.
#[inline]
fn secant_weight(r0: f64, r1: f64, n: u32) -> f64 {
    match n {
        1 => 1.0,
        2 => 0.5 * (r0 + r1),
        3 => (r0 * r0 + r0 * r1 + r1 * r1) / 3.0,
        _ => {
            let mut acc = 0.0;
            let mut a = 1.0;
            for k in 0..n {
                acc += a * r0.powi((n - 1 - k) as i32);
                a *= r1;
            }
            acc / f64::from(n)
        }
    }
}

fn fill_weights(n_dim: u32, rf0: &RadiusField, rf1: &RadiusField, g: &mut [f64], g2: &mut [f64]) {
    let k2 = n_dim as i32 - 2;
    for j in 0..g.len() {
        g[j] = secant_weight(rf0.r[j], rf1.r[j], n_dim);
        g2[j] = 0.5 * (rpow(rf0.r[j], k2) + rpow(rf1.r[j], k2));
    }
}

#[inline]
fn div_g(g: &[f64], ubar: &[f64], i: usize, inv_dx: f64) -> f64 {
    (g[i + 1] * ubar[i + 1] - g[i] * ubar[i]) * inv_dx
}

/// Advances `v` by `dt (r^{n-1} u)_x` with the velocity held fixed, using
/// secant weights iterated until the node radii recomputed from the new
/// volumes satisfy `r1 - r0 = dt u` to roundoff. Returns the new volumes and
/// radii.
pub fn conservative_mass_step(
    p: &PhysParams,
    grid: &Grid,
    v: &[f64],
    u: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, RadiusField)> {
    let n = grid.n_cells();
    if v.len() != n || u.len() != n + 1 {
        return Err(Error::GridMismatch("mass step arrays do not match the grid".into()));
    }
    if u[0] != 0.0 {
        return Err(Error::InvalidArgument("velocity must vanish at the inner boundary".into()));
    }
    let rf0 = crate::geometry::radius_from_volume(p, grid, v)?;
    let mut rf1 = rf0.clone();
    let mut g = vec![0.0; n + 1];
    let mut g2 = vec![0.0; n + 1];
    let mut v1 = v.to_vec();
    let inv_dx = 1.0 / grid.dx();
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        fill_weights(p.n_dim, &rf0, &rf1, &mut g, &mut g2);
        for i in 0..n {
            v1[i] = v[i] + dt * div_g(&g, u, i, inv_dx);
            if !(v1[i] > 0.0) {
                return Err(Error::PositivityLoss { stage: "mass", index: i });
            }
        }
        let prev = rf1.r.clone();
        fill_radii(p.n_dim, grid.dx(), &v1, &mut rf1);
        let change = prev
            .iter()
            .zip(&rf1.r)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change == 0.0 || change >= last {
            break;
        }
        last = change;
    }
    Ok((v1, rf1))
}

/// Tolerances of the stress fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HydroControl {
    pub tol: f64,
    pub stall_tol: f64,
    pub max_iter: usize,
}

impl Default for HydroControl {
    fn default() -> Self {
        HydroControl { tol: 1e-13, stall_tol: 1e-10, max_iter: 30 }
    }
}

/// Scratch buffers reused across hydro substeps.
#[derive(Debug, Clone, Default)]
pub(crate) struct HydroWork {
    rf0: Option<RadiusField>,
    rf1: Option<RadiusField>,
    g: Vec<f64>,
    g2: Vec<f64>,
    ubar: Vec<f64>,
    d_est: Vec<f64>,
    stiff: Vec<f64>,
    base: Vec<f64>,
    v1: Vec<f64>,
    th1: Vec<f64>,
    e0: Vec<f64>,
    sigma: Vec<f64>,
    u1: Vec<f64>,
    sys: Tridiag,
}

/// Runs the substep in place. `rf` must hold the radii of `s.v` on entry;
/// on success it holds the radii of the updated volumes. Returns the number
/// of stress iterations.
pub(crate) fn hydro_substep(
    p: &PhysParams,
    grid: &Grid,
    s: &mut State,
    rf: &mut RadiusField,
    h: f64,
    ctl: HydroControl,
    w: &mut HydroWork,
) -> Result<usize> {
    let n = grid.n_cells();
    let dx = grid.dx();
    let inv_dx = 1.0 / dx;
    let alpha = p.alpha();
    let visc = 2.0 * p.mu * (p.n() - 1.0);
    let nn = n + 1;

    let rf0 = w.rf0.get_or_insert_with(|| rf.clone());
    rf0.clone_from(rf);
    let rf1 = w.rf1.get_or_insert_with(|| rf.clone());
    rf1.clone_from(rf);
    for buf in [&mut w.g, &mut w.g2, &mut w.ubar, &mut w.u1] {
        buf.resize(nn, 0.0);
    }
    for buf in [&mut w.d_est, &mut w.stiff, &mut w.base, &mut w.v1, &mut w.th1, &mut w.e0, &mut w.sigma]
    {
        buf.resize(n, 0.0);
    }
    w.sys.resize(n.saturating_sub(1));

    for i in 0..n {
        w.e0[i] = p.e(s.v[i], s.theta[i]);
    }
    w.v1.copy_from_slice(&s.v);
    w.th1.copy_from_slice(&s.theta);
    w.ubar.copy_from_slice(&s.u);
    w.ubar[0] = 0.0;
    w.ubar[n] = 0.0;
    fill_weights(p.n_dim, rf0, rf1, &mut w.g, &mut w.g2);
    for i in 0..n {
        w.d_est[i] = div_g(&w.g, &w.ubar, i, inv_dx);
    }

    let c = 0.5 * h * inv_dx * inv_dx;
    let mut iterations = 0;
    let mut converged = false;
    let mut best = f64::INFINITY;
    while iterations < ctl.max_iter {
        iterations += 1;
        for i in 0..n {
            let vm = 0.5 * (s.v[i] + w.v1[i]);
            let tm = 0.5 * (s.theta[i] + w.th1[i]);
            let stiff = alpha / vm + 0.5 * h * p.adiabatic_modulus(vm, tm);
            let sig_hat = -p.p(vm, tm) + alpha * w.d_est[i] / vm;
            w.stiff[i] = stiff;
            w.base[i] = sig_hat - stiff * w.d_est[i];
        }
        // Unknowns are ubar_1 .. ubar_{n-1}, row k <-> node k + 1.
        for k in 0..n - 1 {
            let j = k + 1;
            let gj = w.g[j];
            w.sys.diag[k] = 1.0 + c * gj * gj * (w.stiff[j] + w.stiff[j - 1]);
            w.sys.upper[k] = -c * gj * w.stiff[j] * w.g[j + 1];
            w.sys.lower[k] = -c * gj * w.stiff[j - 1] * w.g[j - 1];
            w.sys.rhs[k] = s.u[j] + 0.5 * h * inv_dx * gj * (w.base[j] - w.base[j - 1]);
        }
        if n > 1 {
            w.sys.lower[0] = 0.0;
            w.sys.upper[n - 2] = 0.0;
        }
        if !w.sys.solve() {
            return Err(Error::NewtonDivergence { iterations, residual: f64::NAN });
        }
        let mut delta = 0.0f64;
        let mut umax = 0.0f64;
        for k in 0..n - 1 {
            let new = w.sys.rhs[k];
            delta = delta.max((new - w.ubar[k + 1]).abs());
            umax = umax.max(new.abs());
            w.ubar[k + 1] = new;
        }
        for i in 0..n {
            let d = div_g(&w.g, &w.ubar, i, inv_dx);
            let sigma = w.base[i] + w.stiff[i] * d;
            let v1 = s.v[i] + h * d;
            let wdiv = (w.g2[i + 1] * w.ubar[i + 1] * w.ubar[i + 1]
                - w.g2[i] * w.ubar[i] * w.ubar[i])
                * inv_dx;
            let e1 = w.e0[i] + h * (sigma * d - visc * wdiv);
            if !(v1 > 0.0) || !(e1 > 0.0) {
                return Err(Error::PositivityLoss { stage: "hydro", index: i });
            }
            w.v1[i] = v1;
            w.th1[i] = p
                .temperature_from_energy(v1, e1, w.th1[i])
                .ok_or(Error::PositivityLoss { stage: "hydro", index: i })?;
        }
        refine_radii(p.n_dim, dx, &w.v1, rf1);
        fill_weights(p.n_dim, rf0, rf1, &mut w.g, &mut w.g2);
        for i in 0..n {
            w.d_est[i] = div_g(&w.g, &w.ubar, i, inv_dx);
        }
        if !delta.is_finite() {
            return Err(Error::NewtonDivergence { iterations, residual: delta });
        }
        let scale = 1.0 + umax;
        // The iteration contracts linearly, so `delta^2 / previous` predicts
        // the size of the next update.
        let predicted = if best.is_finite() { delta * (delta / best) } else { f64::INFINITY };
        if iterations >= 2 && (delta <= ctl.tol * scale || predicted <= ctl.tol * scale) {
            converged = true;
            break;
        }
        if delta >= best && delta <= ctl.stall_tol * scale {
            converged = true;
            break;
        }
        best = best.min(delta);
    }
    if !converged {
        return Err(Error::NewtonDivergence { iterations, residual: best });
    }

    // Final conservative pass with one stress shared by the momentum and
    // energy updates.
    for i in 0..n {
        let vm = 0.5 * (s.v[i] + w.v1[i]);
        let tm = 0.5 * (s.theta[i] + w.th1[i]);
        w.sigma[i] = -p.p(vm, tm) + alpha * w.d_est[i] / vm;
    }
    w.u1[0] = 0.0;
    w.u1[n] = 0.0;
    for j in 1..n {
        w.u1[j] = s.u[j] + h * w.g[j] * (w.sigma[j] - w.sigma[j - 1]) * inv_dx;
        w.ubar[j] = 0.5 * (s.u[j] + w.u1[j]);
    }
    for i in 0..n {
        let d = div_g(&w.g, &w.ubar, i, inv_dx);
        let v1 = s.v[i] + h * d;
        let wdiv = (w.g2[i + 1] * w.ubar[i + 1] * w.ubar[i + 1] - w.g2[i] * w.ubar[i] * w.ubar[i])
            * inv_dx;
        let e1 = w.e0[i] + h * (w.sigma[i] * d - visc * wdiv);
        if !(v1 > 0.0) || !(e1 > 0.0) {
            return Err(Error::PositivityLoss { stage: "hydro", index: i });
        }
        let th = p
            .temperature_from_energy(v1, e1, w.th1[i])
            .ok_or(Error::PositivityLoss { stage: "hydro", index: i })?;
        s.v[i] = v1;
        s.theta[i] = th;
    }
    s.u.copy_from_slice(&w.u1);
    rf.clone_from(rf1);
    refine_radii(p.n_dim, dx, &s.v, rf);
    Ok(iterations)
}

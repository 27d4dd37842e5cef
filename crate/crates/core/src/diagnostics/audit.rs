//! Run-time check of the local representation of the specific volume
//! `v = B Q (1 + A / alpha)` on one unit interval `[k, k+1]`.
//!
//! With the cut-off `phi = 1` on `[0, k+1]`, linear down to zero on
//! `[k+1, k+2]`, the momentum equation gives, for each audited cell `i`,
//!
//! ```text
//! d/dt M_i = -sigma_i + S_sigma - U_i
//! M_i      = sum_{j > i} phi_j u_j r_j^{1-n} dx
//! S_sigma  = sum_j (phi_j - phi_{j+1}) sigma_j
//! U_i      = (n-1) sum_{j > i} phi_j u_j^2 r_j^{-n} dx
//! ```
//!
//! which the staggered momentum and mass updates satisfy exactly in
//! semi-discrete form. The residual therefore only measures the time
//! discretisation and the quadrature of the time integrals.

use serde::Serialize;

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::geometry::{fill_radii, RadiusField};
use crate::grid::{Grid, State};
use crate::solver::operators::{effective_stress, rpow};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentationAudit {
    pub k: usize,
    /// Audited cell indices (cells lying entirely inside `[k, k+1]`).
    pub cells: Vec<usize>,
    /// Cell centres of the audited cells.
    pub x: Vec<f64>,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
    /// `int_0^t S_sigma ds`, shared by every audited cell.
    pub sigma_int: f64,
    pub phi_u2_int: Vec<f64>,
    pub a_acc: Vec<f64>,
    pub residual: Vec<f64>,
    pub t: f64,
    #[serde(skip)]
    alpha: f64,
    #[serde(skip)]
    v0: Vec<f64>,
    #[serde(skip)]
    m0: Vec<f64>,
    #[serde(skip)]
    prev: Sample,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Sample {
    s_sigma: f64,
    u2: Vec<f64>,
    m: Vec<f64>,
    /// `v P`, combined with the current `B Q` to form the integrand.
    vp: Vec<f64>,
}

fn cutoff(k: usize, x: f64) -> f64 {
    let k1 = (k + 1) as f64;
    if x <= k1 {
        1.0
    } else if x >= k1 + 1.0 {
        0.0
    } else {
        k1 + 1.0 - x
    }
}

/// `(g1 - g0) / ln(g1 / g0)`, exact for exponential variation and equal to
/// the trapezoid rule to second order otherwise.
fn log_mean(g0: f64, g1: f64) -> f64 {
    if g0 <= 0.0 || g1 <= 0.0 {
        return 0.5 * (g0 + g1);
    }
    let r = g1 / g0;
    if (r - 1.0).abs() < 1e-6 {
        let d = r - 1.0;
        // Series of d / ln(1 + d) to third order.
        g0 * (1.0 + d / 2.0 - d * d / 12.0 + d * d * d / 24.0)
    } else {
        (g1 - g0) / r.ln()
    }
}

impl RepresentationAudit {
    /// Starts an audit from the initial state; fails with `HistoryGap` when
    /// the state is not at `t = 0`.
    pub fn new(p: &PhysParams, grid: &Grid, s0: &State, k: usize) -> Result<Self> {
        if s0.t != 0.0 {
            return Err(Error::HistoryGap(format!(
                "representation audit must start at t = 0, got t = {}",
                s0.t
            )));
        }
        s0.check_layout(grid)?;
        if grid.x_max() < (k + 2) as f64 - 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "representation audit on [{k}, {}] needs x_max >= {}, got {}",
                k + 1,
                k + 2,
                grid.x_max()
            )));
        }
        let dx = grid.dx();
        let tol = 1e-9 * dx;
        let cells: Vec<usize> = (0..grid.n_cells())
            .filter(|&i| i as f64 * dx >= k as f64 - tol && (i + 1) as f64 * dx <= (k + 1) as f64 + tol)
            .collect();
        if cells.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no cell lies inside [{k}, {}] with dx = {dx}",
                k + 1
            )));
        }
        let first = sample(p, grid, s0, k, &cells);
        let m = cells.len();
        let v0: Vec<f64> = cells.iter().map(|&i| s0.v[i]).collect();
        Ok(RepresentationAudit {
            k,
            x: cells.iter().map(|&i| grid.cell_center(i)).collect(),
            b: v0.clone(),
            q: vec![1.0; m],
            sigma_int: 0.0,
            phi_u2_int: vec![0.0; m],
            a_acc: vec![0.0; m],
            residual: vec![0.0; m],
            t: 0.0,
            alpha: p.alpha(),
            m0: first.m.clone(),
            v0,
            cells,
            prev: first,
        })
    }

    /// Advances the accumulators to the state `s`, which must come after
    /// the previously folded state.
    pub fn update(&mut self, p: &PhysParams, grid: &Grid, s: &State) -> Result<()> {
        let dt = s.t - self.t;
        if !(dt >= 0.0) {
            return Err(Error::HistoryGap(format!(
                "audit state at t = {} precedes t = {}",
                s.t, self.t
            )));
        }
        let cur = sample(p, grid, s, self.k, &self.cells);
        let alpha = self.alpha;
        self.sigma_int += 0.5 * dt * (self.prev.s_sigma + cur.s_sigma);
        for a in 0..self.cells.len() {
            let g0 = self.prev.vp[a] / (self.b[a] * self.q[a]);
            self.phi_u2_int[a] += 0.5 * dt * (self.prev.u2[a] + cur.u2[a]);
            self.b[a] = self.v0[a] * ((self.m0[a] - cur.m[a]) / alpha).exp();
            self.q[a] = ((self.sigma_int - self.phi_u2_int[a]) / alpha).exp();
            let g1 = cur.vp[a] / (self.b[a] * self.q[a]);
            self.a_acc[a] += dt * log_mean(g0, g1);
            let v = s.v[self.cells[a]];
            self.residual[a] = v - self.b[a] * self.q[a] * (1.0 + self.a_acc[a] / alpha);
        }
        self.t = s.t;
        self.prev = cur;
        Ok(())
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// Per-point rows `x, B, Q, A_acc, residual`.
    pub fn rows(&self) -> Vec<[f64; 5]> {
        (0..self.cells.len())
            .map(|a| [self.x[a], self.b[a], self.q[a], self.a_acc[a], self.residual[a]])
            .collect()
    }
}

fn sample(p: &PhysParams, grid: &Grid, s: &State, k: usize, cells: &[usize]) -> Sample {
    let n = grid.n_cells();
    let dx = grid.dx();
    let mut rf = RadiusField::with_nodes(grid.n_nodes());
    fill_radii(p.n_dim, dx, &s.v, &mut rf);
    let sigma = effective_stress(p, grid, s, &rf).sigma;
    let phi: Vec<f64> = (0..=n).map(|j| cutoff(k, grid.node(j))).collect();
    let s_sigma: f64 = (0..n).map(|i| (phi[i] - phi[i + 1]) * sigma[i]).sum();

    let nd = p.n_dim as i32;
    let mut m_suffix = vec![0.0; n + 2];
    let mut u2_suffix = vec![0.0; n + 2];
    for j in (1..=n).rev() {
        let (r, u) = (rf.r[j], s.u[j]);
        m_suffix[j] = m_suffix[j + 1] + phi[j] * u * rpow(r, 1 - nd) * dx;
        u2_suffix[j] = u2_suffix[j + 1] + (p.n() - 1.0) * phi[j] * u * u * rpow(r, -nd) * dx;
    }
    Sample {
        s_sigma,
        m: cells.iter().map(|&i| m_suffix[i + 1]).collect(),
        u2: cells.iter().map(|&i| u2_suffix[i + 1]).collect(),
        vp: cells.iter().map(|&i| s.v[i] * p.p(s.v[i], s.theta[i])).collect(),
    }
}

/// Runs the audit over a recorded history whose first state is the
/// initial condition.
pub fn representation_audit(
    p: &PhysParams,
    grid: &Grid,
    history: &[State],
    k: usize,
) -> Result<RepresentationAudit> {
    let first = history
        .first()
        .ok_or_else(|| Error::HistoryGap("empty history".into()))?;
    let mut audit = RepresentationAudit::new(p, grid, first, k)?;
    for s in &history[1..] {
        audit.update(p, grid, s)?;
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_initial_condition, BoundaryConditions, IcFamily};
    use crate::solver::{Stepper, StepperConfig};

    #[test]
    fn log_mean_matches_exponential_integral() {
        let (a, h) = (0.7, 0.3);
        let exact = (f64::exp(a * h) - 1.0) / a;
        assert!((h * log_mean(1.0, f64::exp(a * h)) - exact).abs() < 1e-15);
        let near = log_mean(2.0, 2.0 * (1.0 + 1e-8));
        assert!((near - 2.0 * (1.0 + 0.5e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_at_start_and_gap_rejected() {
        let p = PhysParams::default();
        let g = Grid::with_extent(64, 8.0).unwrap();
        for fam in [IcFamily::GaussianBump, IcFamily::ColdSpot, IcFamily::ReactantStep] {
            let s = make_initial_condition(&g, fam, 0.2, 1.0).unwrap();
            let a = representation_audit(&p, &g, &[s], 2).unwrap();
            assert!(a.residual.iter().all(|&r| r == 0.0));
        }
        let mut s = State::equilibrium(&g);
        s.t = 0.5;
        assert!(matches!(RepresentationAudit::new(&p, &g, &s, 1), Err(Error::HistoryGap(_))));
    }

    /// At rest `B = 1`, `Q = exp(-P t / alpha)` and the log-mean rule
    /// reproduces `A = alpha (exp(P t / alpha) - 1)` exactly.
    #[test]
    fn equilibrium_closed_form() {
        let p = PhysParams::default();
        let g = Grid::with_extent(64, 8.0).unwrap();
        let bc = BoundaryConditions::far_field();
        let cfg = StepperConfig { fixed_dt: Some(1e-2), ..StepperConfig::default() };
        let mut st = Stepper::new(p, g, bc, cfg).unwrap();
        let mut s = State::equilibrium(&g);
        let mut audit = RepresentationAudit::new(&p, &g, &s, 3).unwrap();
        for _ in 0..100 {
            st.advance(&mut s, 1e-2).unwrap();
            audit.update(&p, &g, &s).unwrap();
        }
        let pr = p.p(1.0, 1.0);
        let q = (-pr * s.t / p.alpha()).exp();
        for a in 0..audit.cells.len() {
            assert!((audit.q[a] - q).abs() < 1e-12 * q.max(1e-300));
            assert!((audit.b[a] - 1.0).abs() < 1e-14);
        }
        assert!(audit.max_residual() < 1e-12, "{}", audit.max_residual());
    }
}

//! Staggered-grid spatial operators.
//!
//! Cell quantities live at `(i + 1/2) dx`, node quantities at `j dx`. Node
//! coefficients average the two adjacent cells. At the outer node of a
//! far-field domain the boundary values `theta = 1`, `z = 0` sit on the node
//! itself, so the one-sided gradient there spans half a cell.

use crate::constitutive::PhysParams;
use crate::geometry::RadiusField;
use crate::grid::{BoundaryConditions, Grid, OuterBoundary, State};

/// `sigma = -P + alpha (r^{n-1} u)_x / v` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveStress {
    pub sigma: Vec<f64>,
}

#[inline]
pub(crate) fn rpow(r: f64, k: i32) -> f64 {
    // `powi` with a runtime exponent is an out-of-line loop; the small
    // exponents met in practice are unrolled here.
    match k {
        0 => 1.0,
        1 => r,
        2 => r * r,
        3 => r * r * r,
        4 => (r * r) * (r * r),
        -1 => 1.0 / r,
        -2 => 1.0 / (r * r),
        _ => r.powi(k),
    }
}

/// `((r^{n-1}u)_{i+1} - (r^{n-1}u)_i) / dx` per cell.
pub fn mass_flux(p: &PhysParams, grid: &Grid, s: &State, rf: &RadiusField) -> Vec<f64> {
    let k = p.n_dim as i32 - 1;
    let inv_dx = 1.0 / grid.dx();
    (0..grid.n_cells())
        .map(|i| {
            (rpow(rf.r[i + 1], k) * s.u[i + 1] - rpow(rf.r[i], k) * s.u[i]) * inv_dx
        })
        .collect()
}

pub fn effective_stress(
    p: &PhysParams,
    grid: &Grid,
    s: &State,
    rf: &RadiusField,
) -> EffectiveStress {
    let d = mass_flux(p, grid, s, rf);
    let alpha = p.alpha();
    let sigma = d
        .iter()
        .zip(s.v.iter().zip(&s.theta))
        .map(|(di, (&v, &th))| -p.p(v, th) + alpha * di / v)
        .collect();
    EffectiveStress { sigma }
}

/// `r_j^{n-1} (sigma_j - sigma_{j-1}) / dx` at interior nodes; zero at the
/// two end nodes where the velocity is pinned.
pub fn momentum_rhs(p: &PhysParams, grid: &Grid, s: &State, rf: &RadiusField) -> Vec<f64> {
    let sig = effective_stress(p, grid, s, rf).sigma;
    let k = p.n_dim as i32 - 1;
    let n = grid.n_cells();
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        out[j] = rpow(rf.r[j], k) * (sig[j] - sig[j - 1]) / grid.dx();
    }
    out
}

/// Node conductances `r^{2n-2} kappa / v` and the spacing of the gradient
/// stencil at each node. Node 0 is insulated; node `N` is either a
/// half-cell Dirichlet link to `theta = 1` or insulated.
#[allow(clippy::too_many_arguments)]
pub(crate) fn heat_links(
    p: &PhysParams,
    bc: BoundaryConditions,
    dx: f64,
    v: &[f64],
    theta: &[f64],
    rf: &RadiusField,
    k: &mut [f64],
    spacing: &mut [f64],
) {
    let n = v.len();
    let e2 = 2 * p.n_dim as i32 - 2;
    k[0] = 0.0;
    spacing[0] = dx;
    for j in 1..n {
        let vb = 0.5 * (v[j - 1] + v[j]);
        let tb = 0.5 * (theta[j - 1] + theta[j]);
        k[j] = rpow(rf.r[j], e2) * p.kappa(vb, tb) / vb;
        spacing[j] = dx;
    }
    match bc.outer {
        OuterBoundary::FarField => {
            let vb = v[n - 1];
            let tb = 0.5 * (theta[n - 1] + 1.0);
            k[n] = rpow(rf.r[n], e2) * p.kappa(vb, tb) / vb;
            spacing[n] = 0.5 * dx;
        }
        OuterBoundary::ClosedBox => {
            k[n] = 0.0;
            spacing[n] = dx;
        }
    }
}

/// Value just outside the last cell used by the outer gradient stencils.
#[inline]
pub(crate) fn outer_value(bc: BoundaryConditions, inside: f64, far: f64) -> f64 {
    match bc.outer {
        OuterBoundary::FarField => far,
        OuterBoundary::ClosedBox => inside,
    }
}

/// Heat fluxes `q_j = k_j (theta_j - theta_{j-1}) / spacing_j` at every node.
pub(crate) fn heat_fluxes(
    bc: BoundaryConditions,
    theta: &[f64],
    k: &[f64],
    spacing: &[f64],
    q: &mut [f64],
) {
    let n = theta.len();
    q[0] = 0.0;
    for j in 1..n {
        q[j] = k[j] * (theta[j] - theta[j - 1]) / spacing[j];
    }
    q[n] = k[n] * (outer_value(bc, theta[n - 1], 1.0) - theta[n - 1]) / spacing[n];
}

/// Species diffusion node coefficients `d r^{2n-2} / v^2` and stencil
/// spacings, laid out like [`heat_links`].
pub(crate) fn species_links(
    p: &PhysParams,
    bc: BoundaryConditions,
    dx: f64,
    v: &[f64],
    rf: &RadiusField,
    c: &mut [f64],
    spacing: &mut [f64],
) {
    let n = v.len();
    let e2 = 2 * p.n_dim as i32 - 2;
    c[0] = 0.0;
    spacing[0] = dx;
    for j in 1..n {
        let vb = 0.5 * (v[j - 1] + v[j]);
        c[j] = p.d_diff * rpow(rf.r[j], e2) / (vb * vb);
        spacing[j] = dx;
    }
    match bc.outer {
        OuterBoundary::FarField => {
            let vb = v[n - 1];
            c[n] = p.d_diff * rpow(rf.r[n], e2) / (vb * vb);
            spacing[n] = 0.5 * dx;
        }
        OuterBoundary::ClosedBox => {
            c[n] = 0.0;
            spacing[n] = dx;
        }
    }
}

pub(crate) fn species_fluxes(
    bc: BoundaryConditions,
    z: &[f64],
    c: &[f64],
    spacing: &[f64],
    s: &mut [f64],
) {
    let n = z.len();
    s[0] = 0.0;
    for j in 1..n {
        s[j] = c[j] * (z[j] - z[j - 1]) / spacing[j];
    }
    s[n] = c[n] * (outer_value(bc, z[n - 1], 0.0) - z[n - 1]) / spacing[n];
}

/// Time derivatives of the semi-discrete system: `v`, `u`, `e` and `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscreteRhs {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub z: Vec<f64>,
    /// Energy leaving through the outer boundary per unit time (heat plus
    /// the heat of reaction carried by the reactant flux).
    pub boundary_energy: f64,
}

/// Evaluates every right-hand side of the Lagrangian system on the grid.
pub fn semi_discrete_rhs(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s: &State,
    rf: &RadiusField,
) -> SemiDiscreteRhs {
    let n = grid.n_cells();
    let dx = grid.dx();
    let d = mass_flux(p, grid, s, rf);
    let alpha = p.alpha();
    let sigma: Vec<f64> = (0..n)
        .map(|i| -p.p(s.v[i], s.theta[i]) + alpha * d[i] / s.v[i])
        .collect();
    let k1 = p.n_dim as i32 - 1;
    let k2 = p.n_dim as i32 - 2;
    let mut du = vec![0.0; n + 1];
    for j in 1..n {
        du[j] = rpow(rf.r[j], k1) * (sigma[j] - sigma[j - 1]) / dx;
    }
    let w: Vec<f64> = (0..=n).map(|j| rpow(rf.r[j], k2) * s.u[j] * s.u[j]).collect();

    let mut kk = vec![0.0; n + 1];
    let mut sp = vec![0.0; n + 1];
    let mut q = vec![0.0; n + 1];
    heat_links(p, bc, dx, &s.v, &s.theta, rf, &mut kk, &mut sp);
    heat_fluxes(bc, &s.theta, &kk, &sp, &mut q);
    let mut c = vec![0.0; n + 1];
    let mut fz = vec![0.0; n + 1];
    species_links(p, bc, dx, &s.v, rf, &mut c, &mut sp);
    species_fluxes(bc, &s.z, &c, &sp, &mut fz);

    let visc = 2.0 * p.mu * (p.n() - 1.0);
    let mut de = vec![0.0; n];
    let mut dz = vec![0.0; n];
    for i in 0..n {
        let burn = p.phi(s.theta[i]) * s.z[i];
        de[i] = (q[i + 1] - q[i]) / dx + sigma[i] * d[i] - visc * (w[i + 1] - w[i]) / dx
            + p.lambda_heat * burn;
        dz[i] = (fz[i + 1] - fz[i]) / dx - burn;
    }
    SemiDiscreteRhs {
        v: d,
        u: du,
        e: de,
        z: dz,
        boundary_energy: q[n] + p.lambda_heat * fz[n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::radius_from_volume;
    use crate::grid::{make_initial_condition, IcFamily};

    fn setup(n_dim: u32) -> (PhysParams, Grid) {
        (
            PhysParams { n_dim, ..PhysParams::default() },
            Grid::with_extent(64, 8.0).unwrap(),
        )
    }

    #[test]
    fn zero_velocity_gives_zero_flux() {
        let (p, g) = setup(3);
        let s = make_initial_condition(&g, IcFamily::ColdSpot, 0.2, 1.0).unwrap();
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        assert!(mass_flux(&p, &g, &s, &rf).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn slab_linear_velocity_has_constant_flux() {
        let (p, g) = setup(1);
        let mut s = State::equilibrium(&g);
        for j in 0..=g.n_cells() {
            s.u[j] = 0.3 * g.node(j);
        }
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        for d in mass_flux(&p, &g, &s, &rf) {
            assert!((d - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn flux_of_radial_velocity_is_exact() {
        // u = c r gives r^{n-1} u = c r^n, whose x-derivative is n c v; the
        // prefix-sum radii make the discrete flux reproduce it to roundoff.
        let p = PhysParams::default();
        let g = Grid::with_extent(64, 4.0).unwrap();
        let mut s = State::equilibrium(&g);
        for i in 0..64 {
            s.v[i] = 1.0 + 0.2 * (-(g.cell_center(i) - 2.0).powi(2)).exp();
        }
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        for j in 0..=64 {
            s.u[j] = 0.1 * rf.r[j];
        }
        let d = mass_flux(&p, &g, &s, &rf);
        for i in 0..64 {
            assert!((d[i] - 0.3 * s.v[i]).abs() < 1e-12, "cell {i}: {}", d[i]);
        }
    }

    #[test]
    fn equilibrium_rhs_vanishes() {
        let (p, g) = setup(3);
        let s = State::equilibrium(&g);
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        let rhs = semi_discrete_rhs(&p, &g, BoundaryConditions::far_field(), &s, &rf);
        for arr in [&rhs.v, &rhs.u, &rhs.e, &rhs.z] {
            assert!(arr.iter().all(|&x| x == 0.0));
        }
        let sig = effective_stress(&p, &g, &s, &rf).sigma;
        assert!(sig.iter().all(|&x| x == -p.p(1.0, 1.0)));
    }

    #[test]
    fn pressure_gradient_pushes_outward_from_hot_region() {
        let (p, g) = setup(3);
        let mut s = State::equilibrium(&g);
        for i in 0..g.n_cells() {
            s.theta[i] = 1.0 + 0.5 * (-(g.cell_center(i) - 4.0).powi(2)).exp();
        }
        let rf = radius_from_volume(&p, &g, &s.v).unwrap();
        let rhs = momentum_rhs(&p, &g, &s, &rf);
        let j_left = (3.0 / g.dx()) as usize;
        let j_right = (5.0 / g.dx()) as usize;
        assert!(rhs[j_left] < 0.0 && rhs[j_right] > 0.0);
        assert_eq!(rhs[0], 0.0);
        assert_eq!(rhs[g.n_cells()], 0.0);
    }
}

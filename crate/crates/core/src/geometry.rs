//! Node radii from the specific volume, and the Eulerian to Lagrangian map
//! used to build initial data from a radial density profile.
//!
//! The stored primary quantity is `r^n`, accumulated as
//! `r^n(x) = 1 + n * integral_0^x v`. The radius itself is derived from it so
//! that the geometric constraint holds to roundoff at every time level.

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Node radii `r` and their `n`-th powers.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusField {
    pub r: Vec<f64>,
    pub rn: Vec<f64>,
}

impl RadiusField {
    pub fn with_nodes(n_nodes: usize) -> Self {
        RadiusField {
            r: vec![1.0; n_nodes],
            rn: vec![1.0; n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.r.len()
    }
}

/// `x^(1/n)` with fast paths for the common dimensions.
#[inline]
pub fn nth_root(x: f64, n: u32) -> f64 {
    match n {
        1 => x,
        2 => x.sqrt(),
        3 => x.cbrt(),
        _ => x.powf(1.0 / f64::from(n)),
    }
}

/// Recomputes `rf` from `v` without allocating. Uses compensated summation
/// for the prefix sums. The caller guarantees `v > 0`.
pub fn fill_radii(n_dim: u32, dx: f64, v: &[f64], rf: &mut RadiusField) {
    let n = f64::from(n_dim);
    let nodes = v.len() + 1;
    if rf.r.len() != nodes {
        rf.r.resize(nodes, 1.0);
        rf.rn.resize(nodes, 1.0);
    }
    rf.rn[0] = 1.0;
    rf.r[0] = 1.0;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (i, &vi) in v.iter().enumerate() {
        let y = vi * dx - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        let rn = 1.0 + n * sum;
        rf.rn[i + 1] = rn;
        rf.r[i + 1] = nth_root(rn, n_dim);
    }
}

/// Same result as [`fill_radii`] (to within an ulp) when `rf` already holds
/// radii close to the answer, as inside an iteration. For `n = 3` the cube
/// root is replaced by Newton steps started from the old radius.
pub fn refine_radii(n_dim: u32, dx: f64, v: &[f64], rf: &mut RadiusField) {
    if n_dim != 3 || rf.r.len() != v.len() + 1 {
        fill_radii(n_dim, dx, v, rf);
        return;
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (i, &vi) in v.iter().enumerate() {
        let y = vi * dx - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        let rn = 1.0 + 3.0 * sum;
        rf.rn[i + 1] = rn;
        let mut r = rf.r[i + 1];
        let mut done = false;
        if r > 0.0 {
            for _ in 0..4 {
                let corr = (r * r * r - rn) / (3.0 * r * r);
                r -= corr;
                // Quadratic convergence: the remaining error is of order
                // corr^2 / r, below roundoff once |corr| <= 1e-9 r.
                if corr.abs() <= 1e-9 * r {
                    done = true;
                    break;
                }
            }
        }
        rf.r[i + 1] = if done { r } else { rn.cbrt() };
    }
}

/// Node radii from the cell specific volumes:
/// `r_j^n = 1 + n * sum_{i<j} v_i dx`, `r_0 = 1`.
pub fn radius_from_volume(p: &PhysParams, grid: &Grid, v: &[f64]) -> Result<RadiusField> {
    if v.len() != grid.n_cells() {
        return Err(Error::GridMismatch(format!(
            "volume array has {} cells, grid has {}",
            v.len(),
            grid.n_cells()
        )));
    }
    if let Some((i, &bad)) = v.iter().enumerate().find(|(_, &x)| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::StatePositivityViolation {
            field: "v",
            index: i,
            value: bad,
        });
    }
    let mut rf = RadiusField::with_nodes(grid.n_nodes());
    fill_radii(p.n_dim, grid.dx(), v, &mut rf);
    Ok(rf)
}

/// `dr/dx = r^(1-n) v` at the nodes, with `v` averaged from the adjacent
/// cells (one-sided at the two ends).
pub fn radius_jacobian(p: &PhysParams, rf: &RadiusField, v: &[f64]) -> Result<Vec<f64>> {
    if rf.n_nodes() != v.len() + 1 {
        return Err(Error::GridMismatch(format!(
            "{} nodes for {} cells",
            rf.n_nodes(),
            v.len()
        )));
    }
    let m = v.len();
    let out = (0..=m)
        .map(|j| {
            let vn = if j == 0 {
                v[0]
            } else if j == m {
                v[m - 1]
            } else {
                0.5 * (v[j - 1] + v[j])
            };
            vn * rf.r[j].powi(1 - p.n_dim as i32)
        })
        .collect();
    Ok(out)
}

/// `max_j |(r_new - r_old)/dt - u_j|`.
pub fn radius_ode_residual(
    rf_old: &RadiusField,
    rf_new: &RadiusField,
    u: &[f64],
    dt: f64,
) -> Result<f64> {
    if rf_old.n_nodes() != rf_new.n_nodes() || u.len() != rf_new.n_nodes() {
        return Err(Error::GridMismatch(
            "radius fields and velocity must share the node layout".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(rf_old
        .r
        .iter()
        .zip(&rf_new.r)
        .zip(u)
        .map(|((a, b), w)| ((b - a) / dt - w).abs())
        .fold(0.0, f64::max))
}

const IC_PANELS: usize = 4096;

/// Sampled map between the initial radius and the mass coordinate,
/// `x(r) = integral_1^r y^(n-1) rho0(y) dy`.
pub struct IcMap<F: Fn(f64) -> f64> {
    rho0: F,
    n_dim: u32,
    /// Panel edges in `r`.
    r_edges: Vec<f64>,
    /// Mass coordinate at the panel edges.
    x_edges: Vec<f64>,
}

impl<F: Fn(f64) -> f64> IcMap<F> {
    fn integrand(&self, y: f64) -> f64 {
        y.powi(self.n_dim as i32 - 1) * (self.rho0)(y)
    }

    fn simpson(&self, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (self.integrand(a) + 4.0 * self.integrand(m) + self.integrand(b))
    }

    pub fn r_max(&self) -> f64 {
        *self.r_edges.last().unwrap()
    }

    pub fn x_max(&self) -> f64 {
        *self.x_edges.last().unwrap()
    }

    /// Mass coordinate of the sphere of radius `r`.
    pub fn x_of_r(&self, r: f64) -> f64 {
        let r = r.clamp(1.0, self.r_max());
        let k = match self
            .r_edges
            .binary_search_by(|e| e.partial_cmp(&r).unwrap())
        {
            Ok(k) => return self.x_edges[k],
            Err(k) => k - 1,
        };
        self.x_edges[k] + self.simpson(self.r_edges[k], r)
    }

    /// Initial radius of the particle with mass coordinate `x`, by
    /// bisection to `1e-12`.
    pub fn r0_of_x(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x >= self.x_max() {
            return self.r_max();
        }
        let k = self.x_edges.partition_point(|&e| e <= x) - 1;
        let (mut lo, mut hi) = (self.r_edges[k], self.r_edges[k + 1]);
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.x_edges[k] + self.simpson(self.r_edges[k], mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Builds the `x(r)` / `r0(x)` map for a positive radial density on
/// `[1, r_max]` by composite Simpson quadrature.
pub fn eulerian_to_lagrangian_ic<F: Fn(f64) -> f64>(
    p: &PhysParams,
    rho0: F,
    r_max: f64,
) -> Result<IcMap<F>> {
    if !(r_max > 1.0) || !r_max.is_finite() {
        return Err(Error::InvalidArgument(format!("r_max must exceed 1, got {r_max}")));
    }
    let h = (r_max - 1.0) / IC_PANELS as f64;
    let mut map = IcMap {
        rho0,
        n_dim: p.n_dim,
        r_edges: Vec::with_capacity(IC_PANELS + 1),
        x_edges: Vec::with_capacity(IC_PANELS + 1),
    };
    for k in 0..=IC_PANELS {
        let r = if k == IC_PANELS { r_max } else { 1.0 + k as f64 * h };
        map.r_edges.push(r);
    }
    for k in 0..=2 * IC_PANELS {
        let r = 1.0 + 0.5 * k as f64 * h;
        let rho = (map.rho0)(r);
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidDensity { radius: r });
        }
    }
    map.x_edges.push(0.0);
    for k in 0..IC_PANELS {
        let next = map.x_edges[k] + map.simpson(map.r_edges[k], map.r_edges[k + 1]);
        map.x_edges.push(next);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n: u32) -> PhysParams {
        PhysParams { n_dim: n, ..PhysParams::default() }
    }

    #[test]
    fn unit_volume_closed_forms() {
        let grid = Grid::new(70, 0.1).unwrap();
        let rf = radius_from_volume(&params(3), &grid, &vec![1.0; 70]).unwrap();
        assert_relative_eq!(rf.r[70], 22f64.cbrt(), max_relative = 1e-14);
        let rf2 = radius_from_volume(&params(2), &grid, &vec![1.0; 70]).unwrap();
        for (j, r) in rf2.r.iter().enumerate() {
            let x = j as f64 * 0.1;
            assert_relative_eq!(*r, (1.0 + 2.0 * x).sqrt(), max_relative = 1e-14);
        }
        let rfc = radius_from_volume(&params(3), &grid, &vec![2.5; 70]).unwrap();
        assert_relative_eq!(rfc.rn[40], 1.0 + 3.0 * 2.5 * 4.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_non_positive_volume() {
        let grid = Grid::new(8, 0.1).unwrap();
        let mut v = vec![1.0; 8];
        v[5] = 0.0;
        assert!(matches!(
            radius_from_volume(&params(3), &grid, &v),
            Err(Error::StatePositivityViolation { index: 5, .. })
        ));
    }

    #[test]
    fn jacobian_closed_form() {
        let grid = Grid::new(64, 0.05).unwrap();
        let v = vec![1.0; 64];
        let rf = radius_from_volume(&params(2), &grid, &v).unwrap();
        let jac = radius_jacobian(&params(2), &rf, &v).unwrap();
        for (j, d) in jac.iter().enumerate() {
            let x = j as f64 * 0.05;
            assert_relative_eq!(*d, 1.0 / (1.0 + 2.0 * x).sqrt(), max_relative = 1e-13);
        }
        let rf1 = radius_from_volume(&params(1), &grid, &v).unwrap();
        let jac1 = radius_jacobian(&params(1), &rf1, &v).unwrap();
        assert!(jac1.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn jacobian_matches_difference_quotient_second_order() {
        let p = params(3);
        let err_at = |cells: usize| {
            let grid = Grid::new(cells, 4.0 / cells as f64).unwrap();
            let v: Vec<f64> = (0..cells)
                .map(|i| 1.0 + 0.3 * (grid.cell_center(i)).sin())
                .collect();
            let rf = radius_from_volume(&p, &grid, &v).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..cells {
                let quotient = (rf.r[i + 1] - rf.r[i]) / grid.dx();
                let rm = nth_root(0.5 * (rf.rn[i] + rf.rn[i + 1]), 3);
                let exact = rm.powi(-2) * v[i];
                worst = worst.max((quotient - exact).abs());
            }
            worst
        };
        let (e1, e2) = (err_at(64), err_at(128));
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn ode_residual_static_field() {
        let grid = Grid::new(8, 0.5).unwrap();
        let rf = radius_from_volume(&params(3), &grid, &[1.2; 8]).unwrap();
        assert_eq!(radius_ode_residual(&rf, &rf, &[0.0; 9], 0.1).unwrap(), 0.0);
    }

    #[test]
    fn ic_map_closed_forms() {
        let m = eulerian_to_lagrangian_ic(&params(3), |_| 1.0, 4.0).unwrap();
        assert_relative_eq!(m.x_of_r(3.0), (27.0 - 1.0) / 3.0, max_relative = 1e-13);
        assert_relative_eq!(m.r0_of_x(7.0), 22f64.cbrt(), max_relative = 1e-11);
        let m2 = eulerian_to_lagrangian_ic(&params(2), |_| 1.0, 5.0).unwrap();
        assert_relative_eq!(m2.r0_of_x(4.0), 3.0, max_relative = 1e-11);
        let m3 = eulerian_to_lagrangian_ic(&params(3), |y: f64| y.powi(-2), 10.0).unwrap();
        assert_relative_eq!(m3.x_of_r(6.5), 5.5, max_relative = 1e-13);
    }

    #[test]
    fn ic_map_rejects_bad_density() {
        let res = eulerian_to_lagrangian_ic(&params(3), |y| 2.0 - y, 3.0);
        assert!(matches!(res, Err(Error::InvalidDensity { .. })));
    }

    proptest! {
        #[test]
        fn radii_monotone_and_bounded(vals in proptest::collection::vec(0.2f64..3.0, 8..64)) {
            let n = vals.len();
            let grid = Grid::new(n, 0.25).unwrap();
            let p = params(3);
            let rf = radius_from_volume(&p, &grid, &vals).unwrap();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            prop_assert_eq!(rf.r[0], 1.0);
            for j in 1..=n {
                prop_assert!(rf.r[j] > rf.r[j - 1]);
                let x = j as f64 * 0.25;
                prop_assert!(rf.rn[j] >= (1.0 + 3.0 * lo * x) * (1.0 - 1e-14));
                prop_assert!(rf.rn[j] <= (1.0 + 3.0 * hi * x) * (1.0 + 1e-14));
            }
        }

        #[test]
        fn ic_map_round_trip(c0 in 0.5f64..2.0, c1 in -0.3f64..0.3, r in 1.0f64..6.0) {
            let rho = move |y: f64| c0 + c1 * (y - 1.0).sin();
            let m = eulerian_to_lagrangian_ic(&params(3), rho, 6.0).unwrap();
            let back = m.r0_of_x(m.x_of_r(r));
            prop_assert!((back - r).abs() < 1e-10);
        }
    }
}

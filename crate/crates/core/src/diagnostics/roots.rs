//! Roots of `y - ln y - 1 = c` and the unit-interval mean bracket they give.

use serde::Serialize;

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::grid::{Grid, State};

const BISECTION_STEPS: usize = 200;

/// The two roots `a1 <= 1 <= a2` of `y - ln y - 1 = c` for `c >= 0`.
///
/// The lower root is bisected in `s = ln y` on `[-c - 1, 0]`, where the
/// function `e^s - s - 1 - c` changes sign, which keeps full relative
/// precision for tiny `a1`. The upper root is bracketed by doubling.
pub fn entropy_roots(c: f64) -> Result<(f64, f64)> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "entropy_roots needs a finite non-negative argument, got {c}"
        )));
    }
    if c == 0.0 {
        return Ok((1.0, 1.0));
    }
    let f_log = |s: f64| s.exp_m1() - s - c;
    let (mut lo, mut hi) = (-c - 1.0, 0.0f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_log(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a1 = (0.5 * (lo + hi)).exp();

    let f = |y: f64| (y - 1.0) - y.ln() - c;
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a2 = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    Ok((a1.min(1.0), a2.max(1.0)))
}

/// Means of `v` and `theta` over the cells whose centres lie in `[k, k+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalMean {
    pub k: usize,
    pub mean_v: f64,
    pub mean_theta: f64,
    pub a1: f64,
    pub a2: f64,
    pub inside: bool,
}

/// Interval means compared against the root bracket for
/// `c = lyapunov / (min(R, c_v) * |interval|)`.
///
/// By Jensen's inequality the mean `m` of `v` over an interval of measure
/// `|I|` satisfies `R (m - ln m - 1) |I| <= integral of the relative
/// entropy`, and likewise for `theta` with `c_v`; the radiative part of the
/// relative entropy is non-negative. Hence every mean lies in `[a1, a2]`.
pub fn unit_interval_means(
    p: &PhysParams,
    grid: &Grid,
    s: &State,
    lyapunov: f64,
) -> Result<Vec<IntervalMean>> {
    if grid.x_max() < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "unit-interval means need x_max >= 2, got {}",
            grid.x_max()
        )));
    }
    let intervals = grid.x_max().floor() as usize;
    let mut out = Vec::with_capacity(intervals);
    let floor = p.r_gas.min(p.c_v);
    for k in 0..intervals {
        let cells: Vec<usize> = (0..grid.n_cells())
            .filter(|&i| {
                let x = grid.cell_center(i);
                x >= k as f64 && x < (k + 1) as f64
            })
            .collect();
        if cells.is_empty() {
            continue;
        }
        let m = cells.len() as f64;
        let mean_v = cells.iter().map(|&i| s.v[i]).sum::<f64>() / m;
        let mean_theta = cells.iter().map(|&i| s.theta[i]).sum::<f64>() / m;
        let measure = m * grid.dx();
        let (a1, a2) = entropy_roots(lyapunov.max(0.0) / (floor * measure))?;
        let slack = 1e-12;
        let inside = [mean_v, mean_theta]
            .iter()
            .all(|&x| x >= a1 * (1.0 - slack) && x <= a2 * (1.0 + slack));
        out.push(IntervalMean { k, mean_v, mean_theta, a1, a2, inside });
    }
    Ok(out)
}

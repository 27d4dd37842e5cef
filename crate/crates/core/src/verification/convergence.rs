//! Observed orders of accuracy from manufactured-solution runs.
//!
//! Space studies refine `dx` and `dt` together and measure the error against
//! the targets at the final time. Time studies keep the grid and halve `dt`;
//! since the forcing is built from the continuous targets, the spatial
//! error would swamp the splitting error, so the time error of level `l` is
//! measured as the difference to level `l + 1` (one extra run).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::grid::{BoundaryConditions, Grid, State};
use crate::solver::{Stepper, StepperConfig};

use super::mms::MmsCase;

/// Errors below this are treated as roundoff.
pub const EXACT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Refinement {
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySetup {
    pub refinement: Refinement,
    pub base_cells: usize,
    pub base_dt: f64,
    pub t_end: f64,
    pub stepper: StepperConfig,
}

impl StudySetup {
    /// Strang splitting, `species_fallback` off so the species update stays
    /// second order.
    pub fn new(refinement: Refinement, base_cells: usize, base_dt: f64, t_end: f64) -> Self {
        StudySetup {
            refinement,
            base_cells,
            base_dt,
            t_end,
            stepper: StepperConfig { species_fallback: false, ..StepperConfig::default() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelError {
    pub level: usize,
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    /// Discrete L2 errors of `(v, u, theta, z)`.
    pub l2: [f64; 4],
    pub linf: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub refinement: Refinement,
    pub levels: Vec<LevelError>,
    /// `log2(e_l / e_{l+1})` of the L2 errors, one row per consecutive pair.
    pub orders: Vec<[f64; 4]>,
    /// All errors at roundoff level; orders are meaningless.
    pub exact: bool,
    /// Set when some field's error fails to decrease between levels.
    pub anomaly: Option<String>,
}

impl ConvergenceReport {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().flatten().fold(f64::INFINITY, |m, &o| m.min(o))
    }

    pub fn max_order(&self) -> f64 {
        self.orders.iter().flatten().fold(f64::NEG_INFINITY, |m, &o| m.max(o))
    }

    /// Orders of the finest pair.
    pub fn final_orders(&self) -> Option<[f64; 4]> {
        self.orders.last().copied()
    }

    /// Columns `level,dx,dt,error_v,error_u,error_theta,error_z,order_v,
    /// order_u,order_theta,order_z`; the orders on row `l` compare level
    /// `l - 1` with level `l` and are empty on the first row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "level,dx,dt,error_v,error_u,error_theta,error_z,order_v,order_u,order_theta,order_z\n",
        );
        for (k, l) in self.levels.iter().enumerate() {
            let _ = write!(out, "{},{:.17e},{:.17e}", l.level, l.dx, l.dt);
            for e in l.l2 {
                let _ = write!(out, ",{e:.17e}");
            }
            match k.checked_sub(1).and_then(|i| self.orders.get(i)) {
                Some(o) => {
                    for q in o {
                        let _ = write!(out, ",{q:.6}");
                    }
                }
                None => out.push_str(",,,,"),
            }
            out.push('\n');
        }
        out
    }
}

/// Integrates `case` with forcing from its initial targets to `t_end` with
/// steps of `dt` (the last one shortened to land on `t_end`).
pub fn run_case(
    case: &MmsCase,
    p: &PhysParams,
    grid: &Grid,
    cfg: &StepperConfig,
    dt: f64,
    t_end: f64,
) -> Result<State> {
    case.validate()?;
    let cfg = StepperConfig { fixed_dt: Some(dt), ..*cfg };
    let mut stepper = Stepper::new(*p, *grid, BoundaryConditions::far_field(), cfg)?.with_forcing(case);
    let mut s = case.state(p, grid, 0.0);
    let steps = (t_end / dt).round().max(1.0) as u64;
    for k in 0..steps {
        let h = if k + 1 == steps { t_end - s.t } else { dt };
        stepper.advance(&mut s, h)?;
    }
    Ok(s)
}

fn norms(a: &State, b: &State, dx: f64) -> ([f64; 4], [f64; 4]) {
    let fields = [(&a.v, &b.v), (&a.u, &b.u), (&a.theta, &b.theta), (&a.z, &b.z)];
    let mut l2 = [0.0; 4];
    let mut linf = [0.0; 4];
    for (q, (x, y)) in fields.iter().enumerate() {
        let mut sq = 0.0;
        for (p, r) in x.iter().zip(y.iter()) {
            let d = (p - r).abs();
            sq += d * d;
            linf[q] = f64::max(linf[q], d);
        }
        l2[q] = (sq * dx).sqrt();
    }
    (l2, linf)
}

/// Runs the study with `levels` refinement levels (at least 3). Levels run
/// in parallel; results are ordered by level index.
pub fn convergence_study(
    case: &MmsCase,
    p: &PhysParams,
    setup: &StudySetup,
    levels: usize,
) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let runs = match setup.refinement {
        Refinement::Space => levels,
        Refinement::Time => levels + 1,
    };
    let plan: Vec<(usize, usize, f64)> = (0..runs)
        .map(|l| {
            let f = 1usize << l;
            match setup.refinement {
                Refinement::Space => (l, setup.base_cells * f, setup.base_dt / f as f64),
                Refinement::Time => (l, setup.base_cells, setup.base_dt / f as f64),
            }
        })
        .collect();
    let results: Vec<Result<(Grid, f64, State)>> = plan
        .par_iter()
        .map(|&(_, n, dt)| {
            let grid = case.grid(n)?;
            let s = run_case(case, p, &grid, &setup.stepper, dt, setup.t_end)?;
            Ok((grid, dt, s))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let (grid, dt, s) = &results[l];
        let reference = match setup.refinement {
            Refinement::Space => case.state(p, grid, s.t),
            Refinement::Time => results[l + 1].2.clone(),
        };
        let (l2, linf) = norms(s, &reference, grid.dx());
        out.push(LevelError { level: l, n_cells: grid.n_cells(), dx: grid.dx(), dt: *dt, l2, linf });
    }
    Ok(summarize(setup.refinement, out))
}

fn summarize(refinement: Refinement, levels: Vec<LevelError>) -> ConvergenceReport {
    let exact = levels.iter().all(|l| l.l2.iter().all(|&e| e < EXACT_TOL));
    let mut orders = Vec::new();
    let mut anomalies = Vec::new();
    const NAMES: [&str; 4] = ["v", "u", "theta", "z"];
    for w in levels.windows(2) {
        let mut o = [0.0; 4];
        for q in 0..4 {
            o[q] = (w[0].l2[q] / w[1].l2[q]).log2();
            if !exact && w[1].l2[q] >= w[0].l2[q] && w[0].l2[q] >= EXACT_TOL {
                anomalies.push(format!(
                    "error of {} grew from level {} to {}",
                    NAMES[q], w[0].level, w[1].level
                ));
            }
        }
        orders.push(o);
    }
    ConvergenceReport {
        refinement,
        levels,
        orders,
        exact,
        anomaly: if anomalies.is_empty() { None } else { Some(anomalies.join("; ")) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_study_is_exact() {
        let p = PhysParams::default();
        let setup = StudySetup::new(Refinement::Space, 16, 0.01, 0.05);
        let rep = convergence_study(&MmsCase::equilibrium(), &p, &setup, 3).unwrap();
        assert!(rep.exact);
        assert!(rep.anomaly.is_none());
        assert_eq!(rep.to_csv().lines().count(), 4);
    }

    #[test]
    fn too_few_levels_rejected() {
        let p = PhysParams::default();
        let setup = StudySetup::new(Refinement::Time, 16, 0.01, 0.05);
        assert!(convergence_study(&MmsCase::smooth(), &p, &setup, 2).is_err());
    }

    #[test]
    fn growth_is_reported_not_fatal() {
        let mk = |level, e: f64| LevelError {
            level,
            n_cells: 8,
            dx: 0.1,
            dt: 0.1,
            l2: [e; 4],
            linf: [e; 4],
        };
        let rep = summarize(Refinement::Space, vec![mk(0, 1e-3), mk(1, 2e-3), mk(2, 5e-4)]);
        assert!(rep.anomaly.is_some());
        assert!((rep.orders[1][0] - 2.0).abs() < 1e-12);
    }
}

//! The solver loop behind the `run`, `verify` and `sweep` commands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{
    unit_interval_means, FunctionalRecord, Monitor, RepresentationAudit,
};
use crate::error::{Error, Result};
use crate::grid::{make_initial_condition_seeded, BoundaryConditions, State};
use crate::solver::Stepper;

use super::config::{parse_config, RunConfig};
use super::output::{config_hash, io_err, write_snapshot, write_state, TimeseriesWriter, VERSION};

/// Relative tolerance of the trapezoid-integrated identities.
pub const IDENTITY_RTOL: f64 = 1e-2;
/// Relative tolerance of the energy balance, which the scheme satisfies
/// to roundoff.
pub const ENERGY_RTOL: f64 = 1e-10;
/// Absolute tolerance of the representation audit.
pub const AUDIT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl InvariantCheck {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        InvariantCheck { name: name.to_string(), value, threshold, pass: value <= threshold }
    }

    fn positive(name: &str, value: f64) -> Self {
        InvariantCheck { name: name.to_string(), value, threshold: 0.0, pass: value > 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub status: String,
    pub version: String,
    pub config_sha256: String,
    pub t_final: f64,
    pub steps: u64,
    pub rejections: u64,
    pub theorem_regime: bool,
    pub outside_theorem_regime: bool,
    pub decay_initial: f64,
    pub decay_final: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub min_z: f64,
    pub max_z: f64,
    /// Steps after which some cell had `z` outside `[0, 1]`.
    pub z_violations: u64,
    pub invariants: Vec<InvariantCheck>,
    pub audit_max_residual: Option<f64>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.invariants.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Sampled records, including the initial and final ones.
    pub records: Vec<FunctionalRecord>,
    pub final_state: State,
    pub audit: Option<RepresentationAudit>,
}

struct Extrema {
    min_v: f64,
    max_v: f64,
    min_theta: f64,
    max_theta: f64,
    min_z: f64,
    max_z: f64,
    z_violations: u64,
}

impl Extrema {
    fn new() -> Self {
        Extrema {
            min_v: f64::INFINITY,
            max_v: f64::NEG_INFINITY,
            min_theta: f64::INFINITY,
            max_theta: f64::NEG_INFINITY,
            min_z: f64::INFINITY,
            max_z: f64::NEG_INFINITY,
            z_violations: 0,
        }
    }

    fn fold(&mut self, s: &State) {
        let mut bad = false;
        for i in 0..s.v.len() {
            self.min_v = self.min_v.min(s.v[i]);
            self.max_v = self.max_v.max(s.v[i]);
            self.min_theta = self.min_theta.min(s.theta[i]);
            self.max_theta = self.max_theta.max(s.theta[i]);
            self.min_z = self.min_z.min(s.z[i]);
            self.max_z = self.max_z.max(s.z[i]);
            bad |= !(0.0..=1.0).contains(&s.z[i]);
        }
        self.z_violations += u64::from(bad);
    }
}

/// Output directory: the explicit one, else `EXOGAS_OUT_DIR`, else none.
pub fn resolve_out_dir(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("EXOGAS_OUT_DIR").map(PathBuf::from))
}

fn identity_checks(first: &FunctionalRecord, last: &FunctionalRecord) -> Vec<InvariantCheck> {
    let tiny = 1e-12;
    let ent_scale = first.lyapunov.abs()
        + last.entropy_dissipation_integral.abs()
        + last.entropy_source_integral.abs();
    let mass_scale =
        first.reactant_mass + last.burn_integral.abs() + last.reactant_boundary_integral.abs();
    let sq_scale = first.reactant_sq + 2.0 * last.burn_sq_integral.abs();
    let h_scale = first.h_total.abs() + last.boundary_work_heat.abs();
    vec![
        InvariantCheck::at_most(
            "entropy_identity",
            last.entropy_residual,
            IDENTITY_RTOL * ent_scale + tiny,
        ),
        InvariantCheck::at_most(
            "reactant_mass_identity",
            last.reactant_r1,
            IDENTITY_RTOL * mass_scale + tiny,
        ),
        InvariantCheck::at_most(
            "reactant_square_identity",
            last.reactant_r2,
            IDENTITY_RTOL * sq_scale + tiny,
        ),
        InvariantCheck::at_most("first_law", last.first_law_residual, ENERGY_RTOL * h_scale + tiny),
    ]
}

/// Runs `cfg` to its end time. Output files are written when `out_dir` is
/// given. A step failure is reported in the returned report (and a state
/// dump written) rather than returned as an error; only I/O problems and
/// invalid configurations are errors.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let canonical = cfg.to_text();
    let hash = config_hash(&canonical);
    let grid = cfg.make_grid()?;
    let bc = BoundaryConditions { outer: cfg.grid.outer };
    let p = cfg.params;
    let mut s = make_initial_condition_seeded(&grid, cfg.ic.family, cfg.ic.amplitude, cfg.ic.width, cfg.seed)?;
    let mut stepper = Stepper::new(p, grid, bc, cfg.stepper)?;
    let mut monitor = Monitor::new(&p, &grid, bc, &s)?;
    let mut audit = if cfg.output.audit {
        Some(RepresentationAudit::new(&p, &grid, &s, cfg.output.audit_k)?)
    } else {
        None
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        std::fs::write(dir.join("config.txt"), &canonical).map_err(|e| io_err(dir, e))?;
    }
    let mut writer = match out_dir {
        Some(dir) => {
            let jsonl = cfg.output.jsonl.then(|| dir.join("timeseries.jsonl"));
            Some(TimeseriesWriter::create(
                &dir.join(&cfg.output.timeseries),
                jsonl.as_deref(),
                &hash,
            )?)
        }
        None => None,
    };
    let mut snaps: Vec<f64> = cfg.output.snapshot_times.clone();
    snaps.sort_by(f64::total_cmp);
    let mut next_snap = 0usize;
    let mut write_snaps = |s: &State, upto: f64| -> Result<()> {
        while next_snap < snaps.len() && snaps[next_snap] <= upto {
            if let Some(dir) = out_dir {
                write_snapshot(&dir.join(format!("snapshot_{next_snap}.csv")), &grid, s)?;
            }
            next_snap += 1;
        }
        Ok(())
    };

    let mut extrema = Extrema::new();
    extrema.fold(&s);
    let first = monitor.record(&s);
    let mut records = vec![first];
    if let Some(w) = &mut writer {
        w.write(&first)?;
    }
    write_snaps(&s, s.t)?;

    let mut rejections = 0u64;
    let mut failure = None;
    let mut old = s.clone();
    while s.t < cfg.t_end {
        let dt = stepper.next_dt(&s, cfg.t_end);
        old.clone_from(&s);
        match stepper.advance(&mut s, dt) {
            Ok(info) => {
                rejections += info.rejections as u64;
                if (cfg.t_end - s.t).abs() <= 1e-9 * info.dt {
                    s.t = cfg.t_end;
                }
                monitor.update(&old, &s, &info);
                extrema.fold(&s);
                if let Some(a) = &mut audit {
                    a.update(&p, &grid, &s)?;
                }
                let done = s.t >= cfg.t_end;
                if monitor.steps() % cfg.sample_stride as u64 == 0 || done {
                    let r = monitor.record(&s);
                    if let Some(w) = &mut writer {
                        w.write(&r)?;
                    }
                    records.push(r);
                }
                write_snaps(&s, if done { f64::INFINITY } else { s.t })?;
            }
            Err(e) => {
                failure = Some(e.to_string());
                if let Some(dir) = out_dir {
                    write_state(&dir.join("failure_state.json"), &s)?;
                    std::fs::write(dir.join("failure.txt"), format!("{e}\n"))
                        .map_err(|err| io_err(dir, err))?;
                }
                let r = monitor.record(&s);
                if let Some(w) = &mut writer {
                    w.write(&r)?;
                }
                records.push(r);
                break;
            }
        }
    }
    if let Some(w) = writer {
        w.finish()?;
    }

    let last = *records.last().unwrap_or(&first);
    let mut invariants = vec![
        InvariantCheck::at_most("z_within_unit_interval", extrema.z_violations as f64, 0.0),
        InvariantCheck::positive("min_v", extrema.min_v),
        InvariantCheck::positive("min_theta", extrema.min_theta),
        InvariantCheck {
            name: "dissipation_nonnegative".to_string(),
            value: records.iter().map(|r| r.dissipation_v).fold(f64::INFINITY, f64::min),
            threshold: 0.0,
            pass: records.iter().all(|r| r.dissipation_v >= 0.0),
        },
    ];
    invariants.extend(identity_checks(&first, &last));
    if grid.x_max() >= 2.0 {
        let means = unit_interval_means(&p, &grid, &s, last.lyapunov)?;
        let outside = means.iter().filter(|m| !m.inside).count();
        invariants.push(InvariantCheck::at_most("unit_interval_means", outside as f64, 0.0));
    }
    let audit_max_residual = audit.as_ref().map(RepresentationAudit::max_residual);
    if let Some(r) = audit_max_residual {
        invariants.push(InvariantCheck::at_most("representation_audit", r, AUDIT_TOL));
    }
    if let (Some(dir), Some(a)) = (out_dir, &audit) {
        let mut text = String::from("x,B,Q,A_acc,residual\n");
        for row in a.rows() {
            let cols: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            text.push_str(&cols.join(","));
            text.push('\n');
        }
        std::fs::write(dir.join("audit.csv"), text).map_err(|e| io_err(dir, e))?;
    }

    let regime = cfg.regime();
    let report = RunReport {
        status: if failure.is_some() { "failed" } else { "ok" }.to_string(),
        version: VERSION.to_string(),
        config_sha256: hash,
        t_final: s.t,
        steps: monitor.steps(),
        rejections,
        theorem_regime: regime.theorem_regime,
        outside_theorem_regime: regime.outside_theorem_regime,
        decay_initial: first.supnorm_dev,
        decay_final: last.supnorm_dev,
        min_v: extrema.min_v,
        max_v: extrema.max_v,
        min_theta: extrema.min_theta,
        max_theta: extrema.max_theta,
        min_z: extrema.min_z,
        max_z: extrema.max_z,
        z_violations: extrema.z_violations,
        invariants,
        audit_max_residual,
        error: failure,
    };
    if let Some(dir) = out_dir {
        write_state(&dir.join("state.json"), &s)?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json).map_err(|e| io_err(dir, e))?;
    }
    Ok(RunOutcome { report, records, final_state: s, audit })
}

/// One run per value of `key`, each into `out_dir/<key>=<value>/`. Runs
/// execute on the current rayon pool; results are in input order.
pub fn sweep(
    base: &str,
    key: &str,
    values: &[String],
    out_dir: Option<&Path>,
) -> Result<Vec<(String, RunReport)>> {
    let configs = values
        .iter()
        .map(|v| parse_config(&format!("{base}\n{key} = {v}\n")).map(|c| (v.clone(), c)))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .map(|(v, c)| {
            let dir = out_dir.map(|d| d.join(format!("{key}={v}")));
            run(c, dir.as_deref()).map(|o| (v.clone(), o.report))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &str) -> RunConfig {
        parse_config(&format!(
            "grid.n_cells = 64\ngrid.x_max = 8\nrun.sample_stride = 5\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn equilibrium_run_is_quiet() {
        let cfg = small("ic.family = equilibrium\nrun.t_end = 1\n");
        let out = run(&cfg, None).unwrap();
        assert!(out.report.passed(), "{:#?}", out.report);
        let last = out.records.last().unwrap();
        assert_eq!(last.t, 1.0);
        for x in [last.entropy_residual, last.reactant_r1, last.reactant_r2, last.first_law_residual] {
            assert!(x < 1e-12, "{x}");
        }
    }

    #[test]
    fn bump_run_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("run.t_end = 1\noutput.snapshot_times = 0, 0.5, 9\noutput.jsonl = true\noutput.audit = true\n");
        let out = run(&cfg, Some(dir.path())).unwrap();
        assert!(out.report.passed(), "{:#?}", out.report);
        assert!(out.records.windows(2).all(|w| w[1].burn_integral >= w[0].burn_integral));
        for f in ["timeseries.csv", "timeseries.jsonl", "report.json", "state.json", "audit.csv",
                  "snapshot_0.csv", "snapshot_1.csv", "snapshot_2.csv", "config.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn forced_failure_dumps_state() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("stepper.dt_min = 20\nstepper.dt_max = 40\nrun.t_end = 100\nic.amplitude = 0.9\n");
        let out = run(&cfg, Some(dir.path())).unwrap();
        assert_eq!(out.report.status, "failed", "{:#?}", out.report);
        assert!(!out.report.passed());
        assert!(dir.path().join("failure_state.json").exists());
    }
}

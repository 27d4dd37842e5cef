//! Acceptance suite. Each test prints one `[acceptance] C<k> PASS|FAIL`
//! line with the measured quantities, then asserts.
//!
//! The tests take a shared lock so they run one at a time: several of them
//! have wall-clock budgets that concurrent tests would distort.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use exogas_core::constitutive::{dissipation_decomposition, maxwell_error_bounds, maxwell_residuals};
use exogas_core::diagnostics::{
    entropy_identity_residual, entropy_roots, first_law_balance, reactant_identities, FunctionalRecord,
    Monitor, RepresentationAudit,
};
use exogas_core::geometry::{radius_from_volume, radius_ode_residual};
use exogas_core::grid::make_initial_condition;
use exogas_core::io::{parse_config, read_timeseries, run, sweep, RunOutcome};
use exogas_core::solver::conservative_mass_step;
use exogas_core::verification::{convergence_study, MmsCase, Refinement, StudySetup};
use exogas_core::{
    BoundaryConditions, Grid, IcFamily, PhysParams, Splitting, State, Stepper, StepperConfig,
    ThermoPoint,
};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: &str, pass: bool, detail: String) {
    println!("[acceptance] {id} {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect()
}

/// Fixed-step integration with a monitor; returns the initial and final
/// records.
fn simulate(
    p: &PhysParams,
    grid: &Grid,
    bc: BoundaryConditions,
    s0: &State,
    cfg: StepperConfig,
    dt: f64,
    t_end: f64,
) -> Vec<FunctionalRecord> {
    let cfg = StepperConfig { fixed_dt: Some(dt), ..cfg };
    let mut stepper = Stepper::new_limit_case(*p, *grid, bc, cfg).unwrap();
    let mut monitor = Monitor::new(p, grid, bc, s0).unwrap();
    let mut s = s0.clone();
    let mut old = s.clone();
    let steps = (t_end / dt).round() as u64;
    for k in 0..steps {
        let h = if k + 1 == steps { t_end - s.t } else { dt };
        old.clone_from(&s);
        let info = stepper.advance(&mut s, h).unwrap();
        monitor.update(&old, &s, &info);
    }
    vec![*monitor.initial(), monitor.record(&s)]
}

#[test]
fn c01_thermodynamic_consistency() {
    let _g = serial();
    let p = PhysParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let steps = [1e-2, 1e-3, 1e-4];
    let mut worst_order = f64::INFINITY;
    let mut worst_extrap = 0.0f64;
    let mut in_bounds = true;
    for _ in 0..100 {
        let s = ThermoPoint::new(rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0)).unwrap();
        let res: Vec<[f64; 3]> = steps.iter().map(|&h| maxwell_residuals(&p, s, h).unwrap()).collect();
        let bounds: Vec<[f64; 3]> =
            steps.iter().map(|&h| maxwell_error_bounds(&p, s, h).unwrap()).collect();
        for q in 0..3 {
            for l in 0..3 {
                in_bounds &= res[l][q].abs() <= bounds[l][q];
            }
            // Orders only where truncation dominates roundoff by a wide margin.
            let noise = |l: usize| 4.0 * f64::EPSILON * 1e3 / steps[l];
            for l in 0..2 {
                if res[l + 1][q].abs() > noise(l + 1) {
                    worst_order = worst_order.min((res[l][q] / res[l + 1][q]).abs().log10());
                }
            }
            let extrap = (100.0 * res[2][q] - res[1][q]) / 99.0;
            worst_extrap = worst_extrap.max(extrap.abs());
        }
    }
    let pass = worst_order >= 1.8 && worst_extrap < 1e-9 && in_bounds;
    report(
        "C1",
        pass,
        format!("min order {worst_order:.4}, max extrapolated residual {worst_extrap:.3e}, within bounds {in_bounds}"),
    );
    assert!(pass);
}

#[test]
fn c02_dissipation_positivity() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_rel = 0.0f64;
    let mut min_term = f64::INFINITY;
    for k in 0..10_000 {
        let n_dim = if k % 2 == 0 { 2 } else { 3 };
        let mu = rng.gen_range(0.01..3.0);
        let lo = -2.0 * mu / f64::from(n_dim);
        let lambda1 = rng.gen_range(lo * 0.99..3.0);
        let p = PhysParams { n_dim, mu, lambda1, ..PhysParams::default() };
        let d = dissipation_decomposition(
            &p,
            rng.gen_range(0.05..20.0),
            rng.gen_range(0.05..20.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(1.0..20.0),
            rng.gen_range(-5.0..5.0),
        )
        .unwrap();
        if d.scale > 0.0 {
            worst_rel = worst_rel.max((d.lhs - d.t1 - d.t2).abs() / d.scale);
        }
        min_term = min_term.min(d.t1).min(d.t2);
    }
    let pass = worst_rel < 1e-12 && min_term >= 0.0;
    report("C2", pass, format!("max relative error {worst_rel:.3e}, min term {min_term:.3e}"));
    assert!(pass);
}

#[test]
fn c03_geometry_exactness() {
    let _g = serial();
    let p = PhysParams::default();
    let grid = Grid::with_extent(1024, 50.0).unwrap();
    let rf = radius_from_volume(&p, &grid, &vec![1.0; 1024]).unwrap();
    let radius_err = (0..=1024)
        .map(|j| (rf.r[j] - (1.0 + 3.0 * grid.node(j)).cbrt()).abs())
        .fold(0.0f64, f64::max);

    let small = Grid::with_extent(64, 8.0).unwrap();
    let s = make_initial_condition(&small, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
    let dt = 1e-2;
    let rf0 = radius_from_volume(&p, &small, &s.v).unwrap();
    let (_, rf1) = conservative_mass_step(&p, &small, &s.v, &s.u, dt).unwrap();
    let umax = s.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let ode = radius_ode_residual(&rf0, &rf1, &s.u, dt).unwrap();
    let pass = radius_err < 1e-12 && ode <= 1e-12 * umax;
    report("C3", pass, format!("radius error {radius_err:.3e}, radius ODE residual {ode:.3e} (max|u| {umax:.3e})"));
    assert!(pass);
}

/// Independent lower root: plain bisection in `y` on `(0, 1)`.
fn lower_root_oracle(c: f64) -> f64 {
    let f = |y: f64| y - y.ln() - 1.0 - c;
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn c04_entropy_roots() {
    let _g = serial();
    let zero = entropy_roots(0.0).unwrap();
    let c = std::f64::consts::E - 2.0;
    let (a1, a2) = entropy_roots(c).unwrap();
    let oracle = lower_root_oracle(c);
    let e2 = (a2 - std::f64::consts::E).abs();
    let e1 = (a1 - oracle).abs();
    let pass = zero == (1.0, 1.0) && e2 < 1e-12 && e1 < 1e-12;
    report("C4", pass, format!("roots(0) = {zero:?}, |a2 - e| = {e2:.3e}, |a1 - oracle| = {e1:.3e}"));
    assert!(pass);
}

#[test]
fn c05_reactant_identities() {
    let _g = serial();
    let start = Instant::now();

    // Frozen temperature: no diffusion and no heat release, so only the
    // burning acts and theta stays 1.
    let p = PhysParams { d_diff: 0.0, lambda_heat: 0.0, ..PhysParams::default() };
    let grid = Grid::with_extent(64, 8.0).unwrap();
    let mut s0 = State::equilibrium(&grid);
    for i in 0..64 {
        let x = grid.cell_center(i);
        s0.z[i] = 0.8 * (-x * x).exp();
    }
    let frozen: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let h = simulate(&p, &grid, BoundaryConditions::far_field(), &s0, StepperConfig::default(), dt, 1.0);
            reactant_identities(&h).unwrap().0
        })
        .collect();
    let frozen_orders = orders(&frozen, 2.0);

    // Full physics, dx and dt halved together.
    let p = PhysParams::default();
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    for l in 0..3 {
        let n = 256 << l;
        let grid = Grid::with_extent(n, 16.0).unwrap();
        let s0 = make_initial_condition(&grid, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
        let cfg = StepperConfig { species_fallback: false, ..StepperConfig::default() };
        let h = simulate(&p, &grid, BoundaryConditions::far_field(), &s0, cfg, 2e-3 / f64::from(1 << l), 1.0);
        let (a, b) = reactant_identities(&h).unwrap();
        r1.push(a);
        r2.push(b);
    }
    let o1 = orders(&r1, 2.0);
    let o2 = orders(&r2, 2.0);
    let elapsed = start.elapsed();

    // The frozen-temperature residual is exactly the composite trapezoid
    // error of an exponential, whose next term lowers the observed order
    // below 2 by about h^2 phi^2 / 100; 1e-3 absorbs that.
    let frozen_ok = frozen_orders.iter().all(|&o| o >= 2.0 - 1e-3);
    let full_ok = o1.iter().chain(&o2).all(|&o| o >= 1.8);
    let pass = frozen_ok && full_ok && elapsed < Duration::from_secs(120);
    report(
        "C5",
        pass,
        format!(
            "frozen residuals {} orders {frozen_orders:.4?}; full r1 {} orders {o1:.3?}; r2 {} orders {o2:.3?}; {:.1}s",
            sci(&frozen),
            sci(&r1),
            sci(&r2),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

/// The default configuration run to its end time, shared by C6 and C11.
fn default_run() -> &'static (RunOutcome, Duration) {
    static RUN: OnceLock<(RunOutcome, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = parse_config("").unwrap();
        let start = Instant::now();
        let out = run(&cfg, None).unwrap();
        (out, start.elapsed())
    })
}

#[test]
fn c06_maximum_principle() {
    let _g = serial();
    let (out, _) = default_run();
    let r = &out.report;
    let pass = r.status == "ok" && r.steps >= 100_000 && r.z_violations == 0;
    report(
        "C6",
        pass,
        format!("steps {}, z range [{:.3e}, {:.6}], violations {}", r.steps, r.min_z, r.max_z, r.z_violations),
    );
    assert!(pass);
}

#[test]
fn c07_entropy_identity() {
    let _g = serial();
    let p = PhysParams::default();
    // Crank-Nicolson barely damps the stiffest conduction modes, so the
    // trapezoid sum of the dissipation rate is only accurate once
    // dt/dx^2 is well below one; the coarsest level starts there.
    let mut res = Vec::new();
    for l in 0..3 {
        let n = 64 << l;
        let grid = Grid::with_extent(n, 16.0).unwrap();
        let s0 = make_initial_condition(&grid, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
        let h = simulate(
            &p,
            &grid,
            BoundaryConditions::far_field(),
            &s0,
            StepperConfig::default(),
            2.5e-4 / f64::from(1 << l),
            1.0,
        );
        res.push(entropy_identity_residual(&h).unwrap());
    }
    let o = orders(&res, 2.0);

    let grid = Grid::with_extent(64, 8.0).unwrap();
    let eq = State::equilibrium(&grid);
    let h = simulate(&p, &grid, BoundaryConditions::far_field(), &eq, StepperConfig::default(), 1e-2, 1.0);
    let eq_res = entropy_identity_residual(&h).unwrap();
    let pass = o.iter().all(|&x| x >= 1.8) && eq_res < 1e-12;
    report("C7", pass, format!("residuals {} orders {o:.3?}; equilibrium {eq_res:.3e}", sci(&res)));
    assert!(pass);
}

#[test]
fn c08_first_law() {
    let _g = serial();
    let bc = BoundaryConditions::closed_box();
    let p = PhysParams::default();
    let mut res = Vec::new();
    let mut scale = 0.0f64;
    for l in 0..3 {
        let n = 64 << l;
        let grid = Grid::with_extent(n, 8.0).unwrap();
        let s0 = make_initial_condition(&grid, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
        let h = simulate(&p, &grid, bc, &s0, StepperConfig::default(), 4e-3 / f64::from(1 << l), 1.0);
        scale = scale.max(h[0].h_total.abs());
        res.push(first_law_balance(&h).unwrap());
    }
    // A conservative scheme may balance energy to roundoff at every level,
    // which is convergence beyond any order.
    let roundoff = 1e-11 * scale;
    let exact = res.iter().all(|&r| r <= roundoff);
    let o = orders(&res, 2.0);
    let box_ok = exact || o.iter().all(|&x| x >= 1.8);

    let p = PhysParams { kappa1: 0.0, kappa2: 0.0, mu: 0.0, lambda1: 1.0, ..PhysParams::default() };
    let grid = Grid::with_extent(128, 8.0).unwrap();
    let s0 = make_initial_condition(&grid, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
    let h = simulate(&p, &grid, bc, &s0, StepperConfig::default(), 2e-3, 1.0);
    let reduced = first_law_balance(&h).unwrap() / h[0].h_total.abs();
    let pass = box_ok && reduced < 1e-11;
    report(
        "C8",
        pass,
        format!(
            "closed-box residuals {} (roundoff level {roundoff:.1e}, exact {exact}, orders {o:.3?}); K=0 mu=0 relative {reduced:.3e}",
            sci(&res)
        ),
    );
    assert!(pass);
}

fn audit_run(p: &PhysParams, grid: &Grid, s0: &State, dt: f64, t_end: f64) -> f64 {
    let cfg = StepperConfig { fixed_dt: Some(dt), ..StepperConfig::default() };
    let mut stepper = Stepper::new(*p, *grid, BoundaryConditions::far_field(), cfg).unwrap();
    let mut audit = RepresentationAudit::new(p, grid, s0, 1).unwrap();
    let mut s = s0.clone();
    let steps = (t_end / dt).round() as u64;
    for _ in 0..steps {
        stepper.advance(&mut s, dt).unwrap();
        audit.update(p, grid, &s).unwrap();
    }
    audit.max_residual()
}

#[test]
fn c09_representation_formula() {
    let _g = serial();
    let p = PhysParams::default();
    let grid = Grid::with_extent(128, 8.0).unwrap();
    let mut start_zero = true;
    for family in [IcFamily::GaussianBump, IcFamily::ColdSpot, IcFamily::ReactantStep] {
        let s0 = make_initial_condition(&grid, family, 0.2, 1.0).unwrap();
        let a = RepresentationAudit::new(&p, &grid, &s0, 1).unwrap();
        start_zero &= a.max_residual() == 0.0;
    }
    let eq = audit_run(&p, &grid, &State::equilibrium(&grid), 1e-3, 1.0);
    let s0 = make_initial_condition(&grid, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
    let bump: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| audit_run(&p, &grid, &s0, dt, 1.0)).collect();
    let factors: Vec<f64> = bump.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = start_zero && eq < 1e-8 && factors.iter().all(|&f| f >= 1.8);
    report(
        "C9",
        pass,
        format!("zero at start {start_zero}; equilibrium {eq:.3e}; bump residuals {} factors {factors:.3?}", sci(&bump)),
    );
    assert!(pass);
}

#[test]
fn c10_mms_convergence() {
    let _g = serial();
    let start = Instant::now();
    let p = PhysParams::default();
    let case = MmsCase::smooth();
    let space = convergence_study(&case, &p, &StudySetup::new(Refinement::Space, 32, 2e-3, 0.5), 3).unwrap();
    let time = convergence_study(&case, &p, &StudySetup::new(Refinement::Time, 64, 1e-2, 0.5), 3).unwrap();
    let mut lie_setup = StudySetup::new(Refinement::Time, 64, 1e-2, 0.5);
    lie_setup.stepper.splitting = Splitting::Lie;
    let lie = convergence_study(&case, &p, &lie_setup, 3).unwrap();
    let elapsed = start.elapsed();
    let within = |r: &exogas_core::verification::ConvergenceReport, lo: f64, hi: f64| {
        r.orders.iter().flatten().all(|&o| o >= lo && o <= hi)
    };
    let pass = within(&space, 1.8, 2.2)
        && within(&time, 1.8, 2.2)
        && within(&lie, 0.8, 1.2)
        && elapsed < Duration::from_secs(300);
    report(
        "C10",
        pass,
        format!(
            "Strang space {:.3?}; Strang time {:.3?}; Lie time {:.3?}; {:.1}s",
            space.orders,
            time.orders,
            lie.orders,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c11_long_default_run() {
    let _g = serial();
    let (out, elapsed) = default_run();
    let r = &out.report;
    let recs = &out.records;
    let last = recs.last().unwrap();
    // Plateaus: over the last quarter of the run X, Y and Z change by less
    // than 1% of their final values.
    let late = recs.iter().find(|x| x.t >= 0.75 * last.t).unwrap();
    let plateau = |a: f64, b: f64| (b - a).abs() <= 1e-2 * b.abs().max(1e-300);
    let plateaus = plateau(late.x_functional, last.x_functional)
        && plateau(late.y_functional, last.y_functional)
        && plateau(late.z_functional, last.z_functional);
    let finite = [r.max_v, r.max_theta, last.x_functional, last.y_functional, last.z_functional]
        .iter()
        .all(|x| x.is_finite());
    let decay = r.decay_final < 0.1 * r.decay_initial;
    let pass = r.status == "ok"
        && last.t == 200.0
        && r.min_v > 0.0
        && r.min_theta > 0.0
        && finite
        && plateaus
        && decay
        && *elapsed < Duration::from_secs(600);
    report(
        "C11",
        pass,
        format!(
            "t {} steps {}; v in [{:.4}, {:.4}], theta in [{:.4}, {:.4}]; X {:.4e} Y {:.4e} Z {:.4e} (plateaus {plateaus}); decay {:.3e} -> {:.3e}; {:.0}s",
            last.t,
            r.steps,
            r.min_v,
            r.max_v,
            r.min_theta,
            r.max_theta,
            last.x_functional,
            last.y_functional,
            last.z_functional,
            r.decay_initial,
            r.decay_final,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c12_determinism() {
    let _g = serial();
    let base = "grid.n_cells = 128\ngrid.x_max = 8\nrun.t_end = 2\nrun.sample_stride = 10\nic.family = random-bump\nrun.seed = 7\n";
    let values: Vec<String> = ["4", "5", "6"].iter().map(|s| s.to_string()).collect();
    let mut files = Vec::new();
    for threads in [1, 4, 4] {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sweep(base, "params.b_exp", &values, Some(dir.path()))).unwrap();
        let bytes: Vec<Vec<u8>> = values
            .iter()
            .map(|v| std::fs::read(dir.path().join(format!("params.b_exp={v}")).join("timeseries.csv")).unwrap())
            .collect();
        files.push(bytes);
    }
    let identical = files.windows(2).all(|w| w[0] == w[1]);
    let rows = {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(base).unwrap();
        run(&cfg, Some(dir.path())).unwrap();
        read_timeseries(&dir.path().join("timeseries.csv")).unwrap().len()
    };
    let pass = identical && rows > 1;
    report("C12", pass, format!("timeseries identical across 1/4/4 threads: {identical} ({rows} rows)"));
    assert!(pass);
}

use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use exogas_core::geometry::radius_from_volume;
use exogas_core::grid::make_initial_condition;
use exogas_core::solver::{conservative_mass_step, energy_step_implicit, semi_discrete_rhs, EnergyStepOptions};
use exogas_core::{BoundaryConditions, Grid, IcFamily, PhysParams, State, Stepper, StepperConfig};

fn setup(n: usize) -> (PhysParams, Grid, State) {
    let grid = Grid::with_extent(n, 50.0).unwrap();
    let s = make_initial_condition(&grid, IcFamily::GaussianBump, 0.2, 1.0).unwrap();
    (PhysParams::default(), grid, s)
}

fn full_step(c: &mut Criterion) {
    let (p, grid, s0) = setup(1024);
    let cfg = StepperConfig { fixed_dt: Some(1e-3), ..StepperConfig::default() };
    let mut stepper = Stepper::new(p, grid, BoundaryConditions::far_field(), cfg).unwrap();
    c.bench_function("strang_step_1024", |b| {
        b.iter_batched_ref(
            || s0.clone(),
            |s| stepper.advance(s, 1e-3).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn conduction(c: &mut Criterion) {
    let (p, grid, s) = setup(1024);
    let rf = radius_from_volume(&p, &grid, &s.v).unwrap();
    let opts = EnergyStepOptions::default();
    c.bench_function("conduction_substep_1024", |b| {
        b.iter(|| {
            energy_step_implicit(&p, &grid, BoundaryConditions::far_field(), black_box(&s), &rf, 1e-3, &opts)
                .unwrap()
        })
    });
}

fn mass_step(c: &mut Criterion) {
    let (p, grid, s) = setup(1024);
    c.bench_function("mass_step_1024", |b| {
        b.iter(|| conservative_mass_step(&p, &grid, black_box(&s.v), &s.u, 1e-3).unwrap())
    });
}

fn rhs(c: &mut Criterion) {
    let (p, grid, s) = setup(1024);
    let rf = radius_from_volume(&p, &grid, &s.v).unwrap();
    c.bench_function("semi_discrete_rhs_1024", |b| {
        b.iter(|| semi_discrete_rhs(&p, &grid, BoundaryConditions::far_field(), black_box(&s), &rf))
    });
}

criterion_group!(kernels, full_step, conduction, mass_step, rhs);
criterion_main!(kernels);

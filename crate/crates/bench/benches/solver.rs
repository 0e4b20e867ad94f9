use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{Matrix3, Vector3};
use softarm_core::{
    shooting_solve, stiffness_matrices, ArmGrid, BdfCoeffs, HistoryBuffer, MaterialParams,
    ScenarioConfig, ShootingConfig, UniformLoad, Wrench,
};

fn static_gravity_solve(c: &mut Criterion) {
    let params = MaterialParams::silicone_segment();
    let stiff = stiffness_matrices(&params);
    let grid = ArmGrid::new(params.clone(), stiff, 2, 10);
    let load = Wrench {
        f: params.rho * params.area() * params.gravity,
        l: Vector3::zeros(),
    };
    let hist = HistoryBuffer::at_rest(grid.n_nodes());
    c.bench_function("shooting_static_gravity_2seg", |b| {
        b.iter(|| {
            shooting_solve(
                &grid,
                (Vector3::zeros(), Matrix3::identity()),
                (Vector3::zeros(), Vector3::zeros()),
                &BdfCoeffs::statics(),
                &hist,
                &mut UniformLoad(load),
                &ShootingConfig::default(),
            )
            .unwrap()
        })
    });
}

fn tracking_short_run(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::extension_default();
    cfg.scenario.duration = 1.0;
    c.bench_function("tracking_extension_1s", |b| {
        b.iter(|| softarm_core::run_tracking(&cfg).unwrap())
    });
}

criterion_group!(benches, static_gravity_solve, tracking_short_run);
criterion_main!(benches);

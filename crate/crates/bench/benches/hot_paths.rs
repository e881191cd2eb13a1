use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ncerg_core::algebra::{random_positive, TracialAlgebra};
use ncerg_core::dyadic::{cover_ball, BallMetric, DyadicSystem};
use ncerg_core::ergodic::ActionModel;
use ncerg_core::groups::GroupModel;
use ncerg_core::maximal::{sup_plus_norm, PositiveSequence};
use ncerg_core::walks::{convolution_power, domination_constant, Density};

fn bench_heisenberg_ball(c: &mut Criterion) {
    let group = GroupModel::heisenberg();
    c.bench_function("heisenberg_ball_radius_10", |b| {
        b.iter(|| group.ball(10).unwrap().len())
    });
}

fn bench_convolution_power(c: &mut Criterion) {
    let f = Density::uniform_lazy(&GroupModel::grid(2));
    c.bench_function("z2_convolution_power_32", |b| {
        b.iter(|| convolution_power(&f, 32, 2_000_000).unwrap().support_len())
    });
}

fn bench_walk_domination(c: &mut Criterion) {
    let group = GroupModel::integers();
    c.bench_function("z_domination_constant_n8", |b| {
        b.iter(|| domination_constant(&group, 8, 2_000_000).unwrap().c)
    });
}

fn bench_cover_sweep(c: &mut Criterion) {
    let systems = DyadicSystem::family(1, 8, false).unwrap();
    c.bench_function("dyadic_cover_sweep_d1", |b| {
        b.iter(|| {
            let mut worst = 0.0f64;
            for r in 1..=16u32 {
                for x in ((r as i64)..(256 - r as i64)).step_by(4) {
                    let cover = cover_ball(&systems, &[x], r, BallMetric::Linf).unwrap();
                    let ratio = *cover.ratio.numer() as f64 / *cover.ratio.denom() as f64;
                    worst = worst.max(ratio);
                }
            }
            worst
        })
    });
}

fn bench_majorant_solver(c: &mut Criterion) {
    let alg = TracialAlgebra::matrix(3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    c.bench_function("sup_plus_norm_m3_pair", |b| {
        b.iter_batched(
            || {
                PositiveSequence::new(vec![
                    random_positive(&alg, &mut rng),
                    random_positive(&alg, &mut rng),
                ])
                .unwrap()
            },
            |seq| sup_plus_norm(&seq, 2.0).unwrap().value,
            BatchSize::SmallInput,
        )
    });
}

fn bench_ball_average(c: &mut Criterion) {
    let action = ActionModel::shift_on_cycle(256);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_positive(action.algebra(), &mut rng);
    c.bench_function("shift256_ball_average_64", |b| {
        b.iter(|| action.ball_average(64, &x).unwrap().trace())
    });
}

criterion_group!(
    benches,
    bench_heisenberg_ball,
    bench_convolution_power,
    bench_walk_domination,
    bench_cover_sweep,
    bench_majorant_solver,
    bench_ball_average
);
criterion_main!(benches);

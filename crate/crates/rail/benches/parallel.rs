//! Parallel-vs-sequential benchmarks for the data-parallel inner loops:
//! rollout batches and discriminator batch gradients.
//!
//! Run with the default features to get both variants. The two paths are
//! bit-identical (same chunked reduction order); this suite measures the
//! wall-clock difference only.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rail::disc::{DiscBatch, Discriminator, Normalizer};
use rail::envs::{rollout_batch, rollout_batch_sequential, GreedyGoalPolicy, ToyEnv};
use rail::parallel::{chunked_vector_sum, indexed_map_sequential};
use rail::policy::GaussianPolicy;
use rail::rng::{seeded_rng, stream_rng, Stream};

fn bench_rollouts(c: &mut Criterion) {
    let env = ToyEnv::hazard_corridor();
    let mut rng = stream_rng(0, Stream::PolicyInit);
    let policy = GaussianPolicy::new(env.obs_dim(), env.action_dim(), vec![100, 100], &mut rng)
        .expect("policy");
    let greedy = GreedyGoalPolicy::default();
    let seeds: Vec<u64> = (0..32).collect();

    let mut group = c.benchmark_group("rollout_batch");
    group.bench_with_input(BenchmarkId::new("scripted/sequential", seeds.len()), &seeds, |b, s| {
        b.iter(|| rollout_batch_sequential(&env, &greedy, s).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("scripted/default", seeds.len()), &seeds, |b, s| {
        b.iter(|| rollout_batch(&env, &greedy, s).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("mlp/sequential", seeds.len()), &seeds, |b, s| {
        b.iter(|| rollout_batch_sequential(&env, &policy, s).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("mlp/default", seeds.len()), &seeds, |b, s| {
        b.iter(|| rollout_batch(&env, &policy, s).unwrap())
    });
    group.finish();
}

fn bench_disc_gradient(c: &mut Criterion) {
    let env = ToyEnv::point_goal();
    let mut rng = stream_rng(1, Stream::DiscInit);
    let disc = Discriminator::new(
        env.obs_dim(),
        env.action_dim(),
        vec![100, 100],
        Normalizer::identity(env.obs_dim() + env.action_dim()),
        &mut rng,
    )
    .expect("disc");
    let greedy = GreedyGoalPolicy::default();
    let agent = rollout_batch(&env, &greedy, &(0..10u64).collect::<Vec<_>>()).unwrap();
    let expert = rollout_batch(&env, &greedy, &(100..110u64).collect::<Vec<_>>()).unwrap();
    let batch = DiscBatch::from_trajectories(&agent, &expert).unwrap();

    let mut group = c.benchmark_group("disc_gail_gradient");
    group.sample_size(20);
    group.bench_function("default", |b| b.iter(|| disc.gail_gradient(&batch).unwrap()));
    group.finish();
}

fn bench_reduction(c: &mut Criterion) {
    // The chunked reduction itself, on a synthetic per-item workload.
    let mut r = seeded_rng(7);
    use rand::Rng;
    let items: Vec<Vec<f64>> = (0..512)
        .map(|_| (0..64).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    let work = |i: usize, acc: &mut [f64]| {
        for (a, x) in acc.iter_mut().zip(&items[i]) {
            *a += x.sin() * x.cos();
        }
    };
    let mut group = c.benchmark_group("chunked_vector_sum");
    group.bench_function("default", |b| b.iter(|| chunked_vector_sum(items.len(), 64, work)));
    group.bench_function("sequential", |b| {
        b.iter(|| {
            // Same arithmetic, forced through the sequential mapper.
            let parts = indexed_map_sequential(items.len(), |i| {
                let mut acc = vec![0.0; 64];
                work(i, &mut acc);
                acc
            });
            let mut total = vec![0.0; 64];
            for p in parts {
                for (t, x) in total.iter_mut().zip(&p) {
                    *t += x;
                }
            }
            total
        })
    });
    group.finish();
}

criterion_group!(benches, bench_rollouts, bench_disc_gradient, bench_reduction);
criterion_main!(benches);

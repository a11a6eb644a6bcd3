use criterion::{criterion_group, criterion_main, Criterion};

use fwdsc_core::data::block_noise_matrix;
use fwdsc_core::multistart::{multistart_cluster, SamplePlan, Sampler};
use fwdsc_core::{peel, PeelConfig, SolverVariant, SyntheticSpec};

fn peel_block(c: &mut Criterion) {
    let (a, _) = block_noise_matrix(&SyntheticSpec::block(200, 5, 0.3, 1)).unwrap();
    let mut group = c.benchmark_group("peel_n200_k5_t400");
    group.sample_size(20);
    for v in SolverVariant::ALL {
        let config = PeelConfig::new(5, v.config(400));
        group.bench_function(v.to_string(), |b| b.iter(|| peel(&a, &config).unwrap()));
    }
    group.finish();
}

fn multistart_block(c: &mut Criterion) {
    let (a, _) = block_noise_matrix(&SyntheticSpec::block(200, 5, 0.3, 1)).unwrap();
    let mut group = c.benchmark_group("multistart_n200");
    group.sample_size(10);
    for sampler in [Sampler::Uni, Sampler::Dpp] {
        let plan = SamplePlan::new(4, sampler, 5);
        let solver = SolverVariant::AFW_V.config(400);
        group.bench_function(format!("{sampler:?}").to_lowercase(), |b| {
            b.iter(|| multistart_cluster(&a, &plan, &solver, 5, 2e-12).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, peel_block, multistart_block);
criterion_main!(benches);

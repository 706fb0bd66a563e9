use bdpsim_bench::satellite_config;
use bdpsim_core::scenarios::MB;
use bdpsim_core::{FlowSpec, World};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn transfer(c: &mut Criterion) {
    let mut group = c.benchmark_group("fresh_transfer");
    group.sample_size(10);
    for size in [MB / 2, 10 * MB] {
        let cfg = satellite_config(size);
        group.bench_with_input(BenchmarkId::from_parameter(size), &cfg, |b, cfg| {
            b.iter(|| {
                let mut world = World::new(cfg.world_config(), vec![FlowSpec::new(1, size)]);
                world.run()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, transfer);
criterion_main!(benches);

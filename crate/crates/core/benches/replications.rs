use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rank_surfaces::acquisition::{AcquisitionSpec, Method};
use rank_surfaces::design::{run, DesignerConfig, KernelChoice, MetricsGrid};
use rank_surfaces::gp::KernelSpec;
use rank_surfaces::parallel::{map_indexed, map_indexed_sequential, replication_seed, resolve_jobs};
use rank_surfaces::problems::Toy1d;

const REPLICATIONS: usize = 8;

fn one_replication(rep: usize) -> f64 {
    let kernels = vec![
        KernelChoice::Fixed(KernelSpec::from_lengthscales(0.01, &[0.18], 0.5).unwrap()),
        KernelChoice::Fixed(KernelSpec::from_lengthscales(0.01, &[1.0], 0.5).unwrap()),
    ];
    let mut config = DesignerConfig::new(60, AcquisitionSpec::new(Method::GapSur), kernels);
    config.initial_size = 10;
    config.seed = replication_seed(2024, rep);
    let grid = MetricsGrid::uniform((0..200).map(|i| vec![(i as f64 + 0.5) / 200.0]).collect());
    run(config, &Toy1d::new(), grid).unwrap().final_metrics().empirical_loss
}

fn replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("toy1d_gap_sur_replications");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sequential", REPLICATIONS), |b| {
        b.iter(|| map_indexed_sequential(REPLICATIONS, one_replication))
    });
    let jobs = resolve_jobs(None);
    group.bench_function(BenchmarkId::new(format!("rayon_{jobs}_jobs"), REPLICATIONS), |b| {
        b.iter(|| map_indexed(REPLICATIONS, jobs, one_replication))
    });
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use lyorad::model::{simulate_single_vial, NoRadiation};
use lyorad::radiation::{background_temperatures, NetworkOperator};
use lyorad::sim::simulate;
use lyorad::view_factors::monte_carlo_view_factors;
use lyorad::{Approach, DryingMode, McConfig};
use lyorad_bench::{array_10x10, surfaces_10x10};

fn view_factors(c: &mut Criterion) {
    let scene = array_10x10(DryingMode::Cfd, Approach::Network).scene;
    let cfg = McConfig {
        n_rays: 10_000,
        seed: 7,
    };
    c.bench_function("monte_carlo 10x10, 1e4 rays", |b| {
        b.iter(|| monte_carlo_view_factors(black_box(&scene), &cfg).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let set = surfaces_10x10();
    c.bench_function("network operator build 101 surfaces", |b| {
        b.iter(|| NetworkOperator::new(black_box(&set)).unwrap())
    });
    let op = NetworkOperator::new(&set).unwrap();
    let scene = array_10x10(DryingMode::Cfd, Approach::Network).scene;
    let mut temps = vec![250.0; scene.vial_count()];
    temps.extend(background_temperatures(&scene));
    c.bench_function("network heat rates 101 surfaces", |b| {
        b.iter(|| op.heat_rates(black_box(&temps)))
    });
}

fn drying(c: &mut Criterion) {
    let single = array_10x10(DryingMode::Cfd, Approach::None);
    let model = single.model().unwrap();
    let mut g = c.benchmark_group("drying");
    g.sample_size(10);
    g.bench_function("single vial CFD", |b| {
        b.iter(|| simulate_single_vial(black_box(&model), &NoRadiation, None).unwrap())
    });
    let mut hfd = array_10x10(DryingMode::Hfd, Approach::Simplified);
    hfd.cache_view_factors().unwrap();
    g.bench_function("10x10 HFD simplified", |b| {
        b.iter_batched(|| hfd.clone(), |s| simulate(&s).unwrap(), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, view_factors, network, drying);
criterion_main!(benches);

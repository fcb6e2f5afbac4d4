use criterion::{black_box, criterion_group, criterion_main, Criterion};
use degen_bench::example_pair;
use degen_core::approximator::incompatibility_check;
use degen_core::counterexamples::{certify_periodic_pair, CertifyOptions};
use degen_core::geometry::neighbor_list;
use degen_core::graph::{compare_angular_wl, compare_distance_wl, NeighborhoodPolicy, Quantizer};

fn bench_neighbors(c: &mut Criterion) {
    let pair = example_pair(true);
    c.bench_function("neighbor_list 3p, 3D periodic", |b| {
        b.iter(|| neighbor_list(black_box(&pair.plus), 12.0).unwrap())
    });
}

fn bench_wl(c: &mut Criterion) {
    let pair = example_pair(false);
    let q = Quantizer::default();
    for m in [1.5, 10.0] {
        let policy = NeighborhoodPolicy::Cutoff { radius: m * pair.period() };
        c.bench_function(&format!("distance WL cutoff {m}p"), |b| {
            b.iter(|| compare_distance_wl(&pair.plus, &pair.minus, &policy, &q, None).unwrap())
        });
    }
    let policy = NeighborhoodPolicy::Cutoff { radius: 1.5 * pair.period() };
    c.bench_function("angular WL cutoff 1.5p", |b| {
        b.iter(|| compare_angular_wl(&pair.plus, &pair.minus, &policy, &q, None).unwrap())
    });
}

fn bench_certify(c: &mut Criterion) {
    let pair = example_pair(false);
    let opts = CertifyOptions::default();
    c.bench_function("certify periodic pair", |b| b.iter(|| certify_periodic_pair(&pair, &opts).unwrap()));
    c.bench_function("incompatibility check, 100 trials", |b| b.iter(|| incompatibility_check(100, 1).unwrap()));
}

criterion_group!(benches, bench_neighbors, bench_wl, bench_certify);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use transl2e::{trans_l2e, TransferConfig};
use transl2e_bench::problem;

fn transfer(c: &mut Criterion) {
    let sim = problem(200, 400, 100, 2);
    let mut group = c.benchmark_group("trans_l2e");
    group.sample_size(10);
    group.bench_function("n0=200 nk=400 p=100 K=2", |b| b.iter(|| trans_l2e(&sim.target, &sim.sources, &TransferConfig::default()).unwrap()));
    group.finish();
}

criterion_group!(benches, transfer);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use transl2e::density::{hellinger, kde_fit};
use transl2e::{case_weights, default_lambda_grid, fit_cv, fit_structured_l2e, l2e_gradient, l2e_loss, Penalty, PenaltySpec, SolverOptions};
use transl2e_bench::problem;

fn loss(c: &mut Criterion) {
    let sim = problem(2000, 10, 100, 0);
    let beta = sim.beta_target.clone();
    c.bench_function("l2e_loss n=2000 p=100", |b| b.iter(|| l2e_loss(black_box(&beta), 1.0, &sim.target).unwrap()));
    c.bench_function("l2e_gradient n=2000 p=100", |b| b.iter(|| l2e_gradient(black_box(&beta), 1.0, &sim.target).unwrap()));
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_structured_l2e");
    group.sample_size(10);
    for n in [200, 800] {
        let sim = problem(n, 10, 100, 0);
        let spec = PenaltySpec::lasso(0.05);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sim.target, |b, d| {
            b.iter(|| fit_structured_l2e(d, &spec, &SolverOptions::default()).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("fit_cv");
    group.sample_size(10);
    let sim = problem(200, 10, 100, 0);
    group.bench_function("n=200 p=100 20 lambdas 5 folds", |b| {
        b.iter(|| fit_cv(&sim.target, &Penalty::Lasso, &default_lambda_grid(), 5, &SolverOptions::default(), 3).unwrap())
    });
    group.finish();
}

fn density(c: &mut Criterion) {
    let sim = problem(400, 10, 50, 0);
    let fit = fit_structured_l2e(&sim.target, &PenaltySpec::lasso(0.05), &SolverOptions::default()).unwrap();
    let w = case_weights(&fit.beta, fit.tau, &sim.target).unwrap();
    let shifted: Vec<f64> = w.iter().map(|v| (v * 0.8).min(1.0)).collect();
    c.bench_function("kde_fit + hellinger n=400", |b| {
        b.iter(|| hellinger(&kde_fit(black_box(&w)).unwrap(), &kde_fit(&shifted).unwrap()).distance)
    });
}

criterion_group!(benches, loss, solver, density);
criterion_main!(benches);

use transl2e::io::{load_dataset, CsvSchema};
use transl2e::simulate::{gen_source, gen_target, simulate, PerSource, SimConfig};

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn source_design_has_ar1_correlation() {
    let cfg = SimConfig { nk: 20_000, p: 4, k: 1, shift_support: 2, sparse_support: 2, ar_rho: 0.5, ..SimConfig::default() };
    let (d, _) = gen_source(&cfg, 0, &cfg.beta_true(), 3).unwrap();
    for (j, want) in [(1, 0.5), (2, 0.25), (3, 0.125)] {
        let r = corr(d.column(0), d.column(j));
        assert!((r - want).abs() < 0.03, "lag {j}: {r}");
    }
}

#[test]
fn target_design_is_uncorrelated_with_unit_variance() {
    let cfg = SimConfig { n0: 20_000, p: 3, k: 0, sparse_support: 2, shift_support: 0, r0: 0.0, ..SimConfig::default() };
    let (d, _) = gen_target(&cfg, 8).unwrap();
    assert!(corr(d.column(0), d.column(1)).abs() < 0.03);
    let var = d.column(2).iter().map(|v| v * v).sum::<f64>() / 20_000.0;
    assert!((var - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn noise_precision_matches_config() {
    let cfg = SimConfig { n0: 20_000, p: 3, k: 0, sparse_support: 3, shift_support: 0, r0: 0.0, tau0: 2.0, ..SimConfig::default() };
    let (d, beta) = gen_target(&cfg, 1).unwrap();
    let resid: Vec<f64> = (0..d.n()).map(|i| d.y()[i] - d.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>()).collect();
    let sd = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    assert!((sd - 0.5).abs() < 0.02, "{sd}");
}

#[test]
fn first_rows_of_each_cohort_are_contaminated() {
    let cfg = SimConfig { n0: 50, nk: 40, p: 6, k: 2, shift_support: 3, sparse_support: 3, r0: 0.2, rk: 0.5, ..SimConfig::default() };
    let sim = simulate(&cfg, 4).unwrap();
    let lifted = |d: &transl2e::Dataset, beta: &[f64]| {
        (0..d.n()).filter(|&i| d.y()[i] - d.row(i).iter().zip(beta).map(|(x, b)| x * b).sum::<f64>() > 4.0).count()
    };
    assert_eq!(lifted(&sim.target, &sim.beta_target), 10);
    for (d, b) in sim.sources.iter().zip(&sim.beta_sources) {
        assert_eq!(lifted(d, b), 20);
    }
}

#[test]
fn model_shift_touches_only_the_shift_support() {
    let cfg = SimConfig { p: 12, k: 3, shift_support: 4, sparse_support: 2, sigma_shift: PerSource::Each(vec![0.0, 0.5, 2.0]), ..SimConfig::default() };
    let sim = simulate(&cfg, 6).unwrap();
    assert_eq!(sim.beta_sources[0], sim.beta_target);
    for b in &sim.beta_sources[1..] {
        assert!(b[..4].iter().zip(&sim.beta_target).any(|(x, y)| x != y));
        assert_eq!(b[4..], sim.beta_target[4..]);
    }
}

#[test]
fn same_seed_same_data() {
    let cfg = SimConfig { n0: 30, nk: 30, p: 5, k: 2, shift_support: 2, sparse_support: 2, ..SimConfig::default() };
    assert_eq!(simulate(&cfg, 10).unwrap(), simulate(&cfg, 10).unwrap());
    assert_ne!(simulate(&cfg, 10).unwrap().target, simulate(&cfg, 11).unwrap().target);
}

#[test]
fn written_cohorts_read_back_exactly() {
    let cfg = SimConfig { n0: 25, nk: 35, p: 7, k: 1, shift_support: 3, sparse_support: 3, ..SimConfig::default() };
    let sim = simulate(&cfg, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, d) in [("t.csv", &sim.target), ("s.csv", &sim.sources[0])] {
        let path = dir.path().join(name);
        transl2e::io::write_dataset(&path, d).unwrap();
        let back = load_dataset(&path, &CsvSchema::default()).unwrap();
        assert_eq!(back.x(), d.x());
        assert_eq!(back.y(), d.y());
    }
}

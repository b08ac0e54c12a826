//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The process exits with status 0 even when a criterion fails, so that a
//! failing statistical criterion is reported without breaking the rest of
//! the test run. Set `TRANSL2E_ACCEPTANCE_STRICT=1` to turn any FAIL into a
//! non-zero exit status.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use transl2e::density::{hellinger_on_grid, HELLINGER_GRID};
use transl2e::io::write_results;
use transl2e::l2e::{fit_structured_l2e, l2e_gradient, l2e_loss, prox_group_lasso, prox_lasso, Groups, PenaltySpec};
use transl2e::selection::{select_source, ImportanceWeights};
use transl2e::simulate::{
    gen_target, run_experiment, AblationVariant, simulate, ExperimentConfig, ExperimentKind, Method, ResultRow, SimConfig,
};
use transl2e::{co_learn, pooled_l2e, target_l2e, Dataset, SolverOptions, TransferConfig};

const MASTER_SEED: u64 = 20_240_901;
const REPLICATES: usize = 20;

struct Check {
    pass: bool,
    detail: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn cell<'a>(rows: &'a [ResultRow], grid: f64, method: &str) -> Vec<&'a ResultRow> {
    rows.iter().filter(|r| r.grid_value == grid && r.method == method).collect()
}

fn med_of(rows: &[ResultRow], grid: f64, method: &str, f: impl Fn(&ResultRow) -> Option<f64>) -> f64 {
    median(cell(rows, grid, method).into_iter().filter_map(f).collect())
}

fn experiment(kind: ExperimentKind, grid: &[f64], methods: &[Method]) -> Vec<ResultRow> {
    let ecfg = ExperimentConfig {
        grid: Some(grid.to_vec()),
        methods: Some(methods.to_vec()),
        ablation_variants: Some(vec![AblationVariant::Full]),
        replicates: REPLICATES,
        ..ExperimentConfig::new(kind)
    };
    run_experiment(&ecfg, &kind.preset(), MASTER_SEED).expect("experiment run")
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn selection_calibration(rows: &[ResultRow]) -> Check {
    let k0 = med_of(rows, 0.0, "trans_l2e", |r| r.kept_proportion);
    let k1 = med_of(rows, 1.0, "trans_l2e", |r| r.kept_proportion);
    Check {
        pass: within(k0, 0.40, 0.60) && within(k1, 0.08, 0.25),
        detail: format!("median kept: sigma=0 {k0:.3} (want [0.40, 0.60]), sigma=1 {k1:.3} (want [0.08, 0.25])"),
    }
}

fn target_baseline(rows: &[ResultRow]) -> Check {
    let e = med_of(rows, 0.0, "target_l2e", |r| Some(r.rel_err));
    Check { pass: within(e, 0.25, 0.55), detail: format!("median rel_err {e:.3} (want [0.25, 0.55])") }
}

fn no_negative_transfer(rows: &[ResultRow]) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for sigma in [0.0, 0.2, 1.0] {
        let t = med_of(rows, sigma, "trans_l2e", |r| Some(r.rel_err));
        let b = med_of(rows, sigma, "target_l2e", |r| Some(r.rel_err));
        pass &= t < b;
        parts.push(format!("sigma={sigma}: trans {t:.3} vs target {b:.3}"));
    }
    Check { pass, detail: parts.join("; ") }
}

fn heavy_contamination() -> Check {
    let rows = experiment(ExperimentKind::OutlierProp, &[0.5], &[Method::PooledL2e, Method::TransL2e]);
    let te = med_of(&rows, 0.5, "trans_l2e", |r| Some(r.rel_err));
    let pe = med_of(&rows, 0.5, "pooled_l2e", |r| Some(r.rel_err));
    let tf = med_of(&rows, 0.5, "trans_l2e", |r| Some(r.f1));
    let pf = med_of(&rows, 0.5, "pooled_l2e", |r| Some(r.f1));
    Check {
        pass: te < pe && tf > pf,
        detail: format!("rel_err trans {te:.3} vs pooled {pe:.3}; f1 trans {tf:.3} vs pooled {pf:.3}"),
    }
}

fn precision_monotone() -> Check {
    let rows = experiment(ExperimentKind::PrecisionShift, &[0.2, 4.0], &[Method::TransL2e]);
    let lo = med_of(&rows, 0.2, "trans_l2e", |r| Some(r.rel_err));
    let hi = med_of(&rows, 4.0, "trans_l2e", |r| Some(r.rel_err));
    Check { pass: hi < lo, detail: format!("median rel_err nu=4 {hi:.3} vs nu=0.2 {lo:.3}") }
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Dataset, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| StandardNormal.sample(rng)).collect()).collect();
    let beta: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
    let y = x
        .iter()
        .map(|row| {
            let mean: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let e: f64 = StandardNormal.sample(rng);
            if rng.random::<f64>() < 0.1 {
                mean + 8.0 + e
            } else {
                mean + 0.5 * e
            }
        })
        .collect();
    (Dataset::from_rows(&x, y).unwrap(), beta)
}

fn gradient_suite(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n, p) = (rng.random_range(5..40), rng.random_range(1..8));
        let (d, truth) = random_dataset(rng, n, p);
        let beta: Vec<f64> = truth.iter().map(|b| b + 0.3 * rng.random::<f64>() - 0.15).collect();
        let tau: f64 = rng.random_range(0.3..3.0);
        let (g, gt) = l2e_gradient(&beta, tau, &d).unwrap();
        let mut fd = Vec::with_capacity(p + 1);
        for j in 0..p {
            let (mut up, mut dn) = (beta.clone(), beta.clone());
            up[j] += step;
            dn[j] -= step;
            fd.push((l2e_loss(&up, tau, &d).unwrap() - l2e_loss(&dn, tau, &d).unwrap()) / (2.0 * step));
        }
        fd.push((l2e_loss(&beta, tau + step, &d).unwrap() - l2e_loss(&beta, tau - step, &d).unwrap()) / (2.0 * step));
        let analytic: Vec<f64> = g.iter().copied().chain([gt]).collect();
        let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        let err = analytic.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst = worst.max(err);
    }
    if worst < 1e-5 {
        Ok(())
    } else {
        Err(format!("gradient relative error {worst:.2e}"))
    }
}

fn prox_objective(z: &[f64], v: &[f64], t: f64, blocks: &[Vec<usize>]) -> f64 {
    let fit: f64 = z.iter().zip(v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
    let pen: f64 = blocks.iter().map(|b| b.iter().map(|&j| z[j] * z[j]).sum::<f64>().sqrt()).sum();
    fit + t * pen
}

/// Best value of the block objective over a uniform grid on `[-R, R]^m`.
fn grid_oracle(v: &[f64], t: f64, points: usize) -> f64 {
    let m = v.len();
    let r = v.iter().fold(0.0f64, |a, b| a.max(b.abs())) + 0.5;
    let axis: Vec<f64> = (0..points).map(|i| -r + 2.0 * r * i as f64 / (points - 1) as f64).collect();
    let block = vec![(0..m).collect::<Vec<_>>()];
    let mut idx = vec![0usize; m];
    let mut best = f64::INFINITY;
    loop {
        let z: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
        best = best.min(prox_objective(&z, v, t, &block));
        let mut k = 0;
        while k < m {
            idx[k] += 1;
            if idx[k] < points {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == m {
            return best;
        }
    }
}

fn prox_suite(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for i in 0..200 {
        let t: f64 = rng.random_range(0.0..2.0);
        let (v, blocks, points): (Vec<f64>, Vec<Vec<usize>>, usize) = if i < 100 {
            (vec![rng.random_range(-3.0..3.0)], vec![vec![0]], 20_001)
        } else {
            let m = rng.random_range(2..4);
            let points = if m == 2 { 401 } else { 61 };
            ((0..m).map(|_| rng.random_range(-3.0..3.0)).collect(), vec![(0..m).collect()], points)
        };
        let z = if i < 100 {
            prox_lasso(&v, t).unwrap()
        } else {
            prox_group_lasso(&v, t, &Groups::new(blocks.clone()).unwrap()).unwrap()
        };
        let got = prox_objective(&z, &v, t, &blocks);
        let oracle = grid_oracle(&v, t, points);
        if got > oracle + 1e-12 {
            return Err(format!("instance {i}: prox objective {got} above grid oracle {oracle}"));
        }
    }
    Ok(())
}

fn hellinger_suite(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let normal = |m: f64, s: f64| move |x: f64| (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
    for _ in 0..20 {
        let (m0, m1): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let (s0, s1): (f64, f64) = (rng.random_range(0.3..2.0), rng.random_range(0.3..2.0));
        let ss = s0 * s0 + s1 * s1;
        let bc = (2.0 * s0 * s1 / ss).sqrt() * (-(m0 - m1) * (m0 - m1) / (4.0 * ss)).exp();
        let exact = (1.0 - bc).max(0.0).sqrt();
        let (lo, hi) = (m0.min(m1) - 8.0 * s0.max(s1), m0.max(m1) + 8.0 * s0.max(s1));
        let got = hellinger_on_grid(normal(m0, s0), normal(m1, s1), lo, hi, HELLINGER_GRID);
        if (got - exact).abs() >= 1e-3 {
            return Err(format!("Hellinger {got} vs closed form {exact}"));
        }
    }
    Ok(())
}

fn descent_suite(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for i in 0..100 {
        let (n, p) = (rng.random_range(15..50), rng.random_range(2..12));
        let (d, _) = random_dataset(rng, n, p);
        let lambda = 10f64.powf(rng.random_range(-3.0..0.0));
        let penalty = match i % 3 {
            0 => PenaltySpec::none(),
            1 => PenaltySpec::lasso(lambda),
            _ => {
                let labels: Vec<usize> = (0..p).map(|j| j / 2).collect();
                PenaltySpec::group_lasso(lambda, Groups::from_assignment(&labels).unwrap())
            }
        };
        let fit = fit_structured_l2e(&d, &penalty, &SolverOptions::default()).map_err(|e| e.to_string())?;
        if let Some(w) = fit.objective_trace.windows(2).find(|w| w[1] > w[0] + 1e-10) {
            return Err(format!("instance {i}: objective rose from {} to {}", w[0], w[1]));
        }
    }
    Ok(())
}

fn scaling_suite(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..100 {
        let (n, p) = (rng.random_range(3..30), rng.random_range(1..6));
        let (d, beta) = random_dataset(rng, n, p);
        let tau: f64 = rng.random_range(0.2..5.0);
        let c = 10f64.powf(rng.random_range(-1.0..1.0));
        let scaled = d.with_response(d.y().iter().map(|v| c * v).collect()).unwrap();
        let cb: Vec<f64> = beta.iter().map(|b| c * b).collect();
        let lhs = l2e_loss(&cb, tau / c, &scaled).unwrap();
        let rhs = l2e_loss(&beta, tau, &d).unwrap() / c;
        if (lhs - rhs).abs() > 1e-12 * rhs.abs().max(f64::MIN_POSITIVE) {
            return Err(format!("scaling identity: {lhs} vs {rhs}"));
        }
    }
    Ok(())
}

fn reduction_suite() -> Result<(), String> {
    let cfg = SimConfig { n0: 60, nk: 80, p: 15, k: 2, shift_support: 8, sparse_support: 5, ..SimConfig::default() };
    let data = simulate(&cfg, 7).map_err(|e| e.to_string())?;
    let tcfg = TransferConfig { seed: 11, ..TransferConfig::default() };
    let pick = |p: f64| -> Vec<Dataset> {
        data.sources
            .iter()
            .map(|s| select_source(s, &ImportanceWeights::from_probabilities(vec![p; s.n()]), 3).unwrap().1)
            .collect()
    };
    let empty = co_learn(&data.target, &pick(0.0), &tcfg).map_err(|e| e.to_string())?;
    let target = target_l2e(&data.target, &tcfg).map_err(|e| e.to_string())?;
    if empty != target {
        return Err("empty selection differs from target-only fit".into());
    }
    let full = co_learn(&data.target, &pick(1.0), &tcfg).map_err(|e| e.to_string())?;
    let pooled = pooled_l2e(&data.target, &data.sources, &tcfg).map_err(|e| e.to_string())?;
    if full != pooled {
        return Err("full selection differs from pooled fit".into());
    }
    Ok(())
}

fn determinism_suite() -> Result<(), String> {
    let base = SimConfig { n0: 50, nk: 60, p: 12, k: 2, shift_support: 6, sparse_support: 4, ..SimConfig::default() };
    let ecfg = ExperimentConfig { grid: Some(vec![0.1, 0.3]), replicates: 2, ..ExperimentConfig::new(ExperimentKind::OutlierProp) };
    let run = |threads: usize| -> Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        let rows = pool.install(|| run_experiment(&ecfg, &base, 99)).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let (a, b, c) = (run(1)?, run(1)?, run(3)?);
    if a != b {
        return Err("two runs from one seed wrote different results.csv".into());
    }
    if a != c {
        return Err("thread count changed results.csv".into());
    }
    Ok(())
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let suites: Vec<(&str, Result<(), String>)> = vec![
        ("gradient", gradient_suite(&mut rng)),
        ("prox", prox_suite(&mut rng)),
        ("hellinger", hellinger_suite(&mut rng)),
        ("descent", descent_suite(&mut rng)),
        ("scaling", scaling_suite(&mut rng)),
        ("reduction", reduction_suite()),
        ("determinism", determinism_suite()),
    ];
    let failed: Vec<String> = suites
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    let names: Vec<&str> = suites.iter().map(|(n, _)| *n).collect();
    if failed.is_empty() {
        Check { pass: true, detail: format!("all passed ({})", names.join(", ")) }
    } else {
        Check { pass: false, detail: failed.join("; ") }
    }
}

fn outlier_flagging() -> Check {
    let cfg = SimConfig::default();
    let mut good = 0;
    for rep in 0..REPLICATES as u64 {
        let (target, _) = gen_target(&cfg, transl2e::rng::derive_seed(MASTER_SEED, &format!("flag/{rep}"))).unwrap();
        let tcfg = TransferConfig { seed: rep, ..TransferConfig::default() };
        let (fit, _) = target_l2e(&target, &tcfg).unwrap();
        let m = (cfg.r0 * cfg.n0 as f64).round() as usize;
        let (bad, clean) = fit.weights.split_at(m);
        if bad.iter().all(|&w| w < 0.01) && median(clean.to_vec()) > 0.5 {
            good += 1;
        }
    }
    Check { pass: good >= 18, detail: format!("{good}/{REPLICATES} replicates flag every outlier (want >= 18)") }
}

fn main() -> ExitCode {
    let strict = std::env::var("TRANSL2E_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, check: Check| {
        let tag = if check.pass { "PASS" } else { "FAIL" };
        if !check.pass {
            failures += 1;
        }
        println!("{tag} {id} {name}: {} [{:.0}s]", check.detail, start.elapsed().as_secs_f64());
    };

    let ablation = experiment(
        ExperimentKind::SelectionAblation,
        &[0.0, 0.2, 1.0],
        &[Method::TargetL2e, Method::TransL2e],
    );
    report(1, "selection calibration", selection_calibration(&ablation));
    report(2, "target-only baseline", target_baseline(&ablation));
    report(3, "no negative transfer", no_negative_transfer(&ablation));
    report(4, "heavy source contamination", heavy_contamination());
    report(5, "precision-shift monotonicity", precision_monotone());
    report(6, "property suites", property_suites());
    report(7, "outlier flagging", outlier_flagging());

    println!("acceptance: {} of 7 criteria passed", 7 - failures);
    if strict && failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

//! End-to-end acceptance run without the test harness, so that the PASS/FAIL
//! line of every criterion is always printed. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rgsvd::analysis::symmetric_projection_check;
use rgsvd::gsvd::Route;
use rgsvd::linalg;
use rgsvd::matrix_market;
use rgsvd::operators::DenseSpd;
use rgsvd::reference::{exact_gheig, exact_gsvd, sigma_via_square_roots};
use rgsvd::sampling::draw_gaussian;
use rgsvd::testmatrices::{make_randsvd_spd, SpectrumMode};
use rgsvd::weighted_qr::weighted_cholqr;
use rgsvd::DenseMatrix;
use rgsvd_cli::config::{Experiment, ExperimentConfig, MatrixSource};
use rgsvd_cli::experiments::Method;
use rgsvd_cli::output::{from_csv, Row};
use rgsvd_cli::run_experiment;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Medians of `value` grouped by `key`.
fn medians<K: Ord>(rows: &[Row], key: impl Fn(&Row) -> K, value: impl Fn(&Row) -> f64) -> BTreeMap<K, f64> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(key(r)).or_default().push(value(r));
    }
    groups.into_iter().map(|(k, v)| (k, median(v))).collect()
}

fn rel_error(r: &Row) -> f64 {
    r.rel_error.expect("summary row")
}

fn w_orthogonality(x: &DenseMatrix, w: &DenseMatrix) -> f64 {
    let g = x.t_matmul(&w.matmul(x));
    linalg::spectral_norm(&g.sub(&DenseMatrix::identity(x.cols())))
}

fn log_uniform(rng: &mut ChaCha20Rng, max: f64) -> f64 {
    max.powf(rng.random::<f64>())
}

/// `U diag(s) Vᵀ` with Haar factors and geometric `s` from 1 to `1/kappa`.
fn conditioned(m: usize, n: usize, kappa: f64, seed: u64) -> DenseMatrix {
    let r = m.min(n);
    let s: Vec<f64> = (0..r).map(|i| kappa.powf(-(i as f64) / (r.max(2) - 1) as f64)).collect();
    let (u, _) = linalg::qr_thin(&draw_gaussian(m, r, seed));
    let (v, _) = linalg::qr_thin(&draw_gaussian(n, r, seed ^ 0x5bd1_e995));
    u.scale_columns(&s).matmul_t(&v)
}

fn run(cfg: ExperimentConfig) -> Vec<Row> {
    run_experiment(&cfg).expect("experiment runs")
}

fn binary_csv(out: &Path, extra: &[&str], threads: Option<&str>) -> Vec<u8> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rgsvd"));
    cmd.arg("accuracy_vs_k").arg("-o").arg(out).args(extra);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    let status = cmd.status().expect("binary starts");
    assert!(status.success(), "rgsvd exited with {status}");
    std::fs::read(out).expect("output written")
}

fn oracle_self_consistency() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (mut recon, mut orth, mut paths) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..200u64 {
        let m = rng.random_range(1..=64);
        let n = rng.random_range(1..=64);
        let a = draw_gaussian(m, n, 1000 + i);
        let s = make_randsvd_spd(m, log_uniform(&mut rng, 1e4), SpectrumMode::LogUniform, 2000 + i).unwrap();
        let t = make_randsvd_spd(n, log_uniform(&mut rng, 1e4), SpectrumMode::LogUniform, 3000 + i).unwrap();
        let g = exact_gsvd(&a, &s, &t).unwrap();
        let r = g.sigma.len();
        let rebuilt = g
            .u
            .columns_range(0..r)
            .scale_columns(&g.sigma)
            .matmul_t(&g.v.columns_range(0..r))
            .matmul(&t);
        recon = recon.max(rebuilt.sub(&a).frobenius_norm() / a.frobenius_norm());
        orth = orth.max(w_orthogonality(&g.u, &s)).max(w_orthogonality(&g.v, &t));
        let alt = sigma_via_square_roots(&a, &s, &t).unwrap();
        for (x, y) in g.sigma.iter().zip(&alt) {
            paths = paths.max((x - y).abs() / x.abs().max(y.abs()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = recon.max(orth).max(paths);
    outcome(
        worst <= 1e-11 && secs < 30.0,
        format!(
            "200 instances: reconstruction {recon:.1e}, orthogonality {orth:.1e}, path agreement {paths:.1e}; {secs:.1}s"
        ),
    )
}

fn exact_rank_recovery(dir: &Path, rows: &mut Vec<Row>) -> Outcome {
    let mut worst = 0.0f64;
    let mut fails = 0;
    for k in [1usize, 5, 15] {
        let a = draw_gaussian(128, k, 70 + k as u64).matmul_t(&draw_gaussian(128, k, 80 + k as u64));
        let path = dir.join(format!("rank{k}.mtx"));
        matrix_market::write(&a, &path).unwrap();
        let mut cfg = ExperimentConfig::new(Experiment::AccuracyVsK);
        cfg.matrices = vec![MatrixSource::File(path)];
        cfg.k_grid = vec![k];
        cfg.q_list = vec![0];
        cfg.seeds = (0..50).collect();
        let out = run(cfg);
        for r in &out {
            worst = worst.max(rel_error(r));
            fails += usize::from(rel_error(r) > 1e-11);
        }
        rows.extend(out);
    }
    outcome(fails == 0, format!("k in {{1,5,15}}, 50 seeds each: worst rel_error {worst:.1e}, {fails} above 1e-11"))
}

fn per_sample_bounds(rows: &mut Vec<Row>) -> Outcome {
    let start = Instant::now();
    let out = run(ExperimentConfig::new(Experiment::BoundsAudit));
    let secs = start.elapsed().as_secs_f64();
    let bad = out.iter().filter(|r| r.per_sample_ok != Some(true)).count();
    let total = out.len();
    rows.extend(out);
    outcome(
        bad == 0 && total == 3600 && secs < 300.0,
        format!("{total} runs (4 matrices, k in {{10,30,50}}, q in {{0,1,2}}, 100 seeds): {bad} violations; {secs:.0}s"),
    )
}

fn probabilistic_bound(rows: &mut Vec<Row>) -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::BoundsAudit);
    cfg.q_list = vec![0];
    cfg.seeds = (0..500).collect();
    let out = run(cfg);
    let mut counts: BTreeMap<(String, usize), (usize, usize)> = BTreeMap::new();
    for r in &out {
        let e = counts.entry((r.matrix.clone(), r.k)).or_default();
        e.0 += usize::from(r.probabilistic_ok != Some(true));
        e.1 += 1;
    }
    let worst = counts.values().map(|&(v, n)| v as f64 / n as f64).fold(0.0, f64::max);
    rows.extend(out);
    outcome(
        worst <= 0.1,
        format!("delta 0.1, q 0, 500 seeds on each (matrix, k): worst violation fraction {worst:.3}"),
    )
}

fn accuracy_vs_k(csv: &[u8], rows: &mut Vec<Row>) -> Outcome {
    let out = from_csv(std::str::from_utf8(csv).unwrap()).unwrap();
    let med = medians(&out, |r| (r.matrix.clone(), r.k, r.q), rel_error);
    let best: BTreeMap<(String, usize), f64> = out.iter().map(|r| ((r.matrix.clone(), r.k), r.best_possible)).collect();
    let (mut ratio, mut order_fails) = (0.0f64, 0);
    for ((matrix, k), b) in &best {
        let q0 = med[&(matrix.clone(), *k, 0)];
        let q1 = med[&(matrix.clone(), *k, 1)];
        ratio = ratio.max(q1 / b);
        order_fails += usize::from(q1 > q0);
    }
    let cases = best.len();
    rows.extend(out);
    outcome(
        ratio <= 10.0 && order_fails == 0 && cases == 48,
        format!("{cases} (matrix, k) cases: worst median q1 / best {ratio:.3}, {order_fails} with q1 > q0"),
    )
}

fn method_ordering(rows: &mut Vec<Row>) -> Outcome {
    let out = run(ExperimentConfig::new(Experiment::MethodComparison));
    let med = medians(&out, |r| (r.matrix.clone(), r.method.clone()), rel_error);
    let mut fails = Vec::new();
    let matrices: Vec<String> = med.keys().map(|(m, _)| m.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for m in &matrices {
        let get = |method: &str| med[&(m.clone(), method.to_string())];
        let (q1, ge, ts) = (get("gsvd-q1"), get("geneig"), get("twosided"));
        if !(q1 <= ge && ts >= q1) {
            fails.push(format!("{m}: gsvd-q1 {q1:.2e} geneig {ge:.2e} twosided {ts:.2e}"));
        }
    }
    rows.extend(out);
    outcome(
        fails.is_empty() && matrices.len() == 4,
        if fails.is_empty() {
            "k 50, 20 seeds: gsvd-q1 <= geneig and twosided >= gsvd-q1 on all four matrices".into()
        } else {
            fails.join("; ")
        },
    )
}

/// Length of the longest nondecreasing subsequence.
fn longest_nondecreasing(v: &[f64]) -> usize {
    let mut best = vec![1usize; v.len()];
    for i in 0..v.len() {
        for j in 0..i {
            if v[j] <= v[i] {
                best[i] = best[i].max(best[j] + 1);
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

fn condition_sweep(rows: &mut Vec<Row>) -> Outcome {
    let cfg = ExperimentConfig::new(Experiment::ConditionSweep);
    let grid = cfg.kappa_list.clone();
    let out = run(cfg);
    // Rows carry the measured κ₂(T); map it back to the requested grid value.
    let slot = |r: &Row| {
        (0..grid.len())
            .min_by(|&a, &b| (grid[a].ln() - r.kappa_t.ln()).abs().total_cmp(&(grid[b].ln() - r.kappa_t.ln()).abs()))
            .unwrap()
    };
    let med = medians(&out, |r| (r.k, r.q, slot(r)), rel_error);
    let best: BTreeMap<(usize, usize), f64> = out.iter().map(|r| ((r.k, slot(r)), r.best_possible)).collect();
    let ks: std::collections::BTreeSet<usize> = out.iter().map(|r| r.k).collect();
    let (mut monotone_fails, mut ratio) = (0, 0.0f64);
    for &k in &ks {
        let q0: Vec<f64> = (0..grid.len()).map(|i| med[&(k, 0, i)]).collect();
        monotone_fails += usize::from(longest_nondecreasing(&q0) < 3);
        for (i, &kappa) in grid.iter().enumerate() {
            if kappa <= 1e7 {
                ratio = ratio.max(med[&(k, 1, i)] / best[&(k, i)]);
            }
        }
    }
    rows.extend(out);
    outcome(
        monotone_fails == 0 && ratio <= 10.0,
        format!(
            "lowrank_decay, kappa in {grid:?}, {} k values: {monotone_fails} without a nondecreasing run of 3; worst q1 / best {ratio:.3} at kappa <= 1e7",
            ks.len()
        ),
    )
}

fn preconditioned_sampling(rows: &mut Vec<Row>) -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::Preconditioner);
    cfg.k_grid = vec![30, 50];
    cfg.q_list = vec![0];
    let out = run(cfg);
    let pre: Vec<&Row> = out.iter().filter(|r| r.precond.is_some()).collect();
    let kappa_dev = pre.iter().map(|r| (r.kappa_eff - 1.0).abs()).fold(0.0, f64::max);
    let bound_fails = pre.iter().filter(|r| r.per_sample_ok != Some(true)).count();
    let med = medians(&out, |r| (r.k, r.precond.is_some()), rel_error);
    let mut detail = Vec::new();
    let mut order_ok = true;
    for k in [30, 50] {
        let (plain, pc) = (med[&(k, false)], med[&(k, true)]);
        order_ok &= pc <= plain;
        detail.push(format!("k {k}: {pc:.2e} vs {plain:.2e}"));
    }
    rows.extend(out);
    outcome(
        kappa_dev <= 1e-10 && bound_fails == 0 && order_ok,
        format!(
            "kappa(T) 1e6, q 0, 20 seeds: |kappa(LtTL) - 1| {kappa_dev:.1e}; medians {}; {bound_fails} per-sample violations",
            detail.join(", ")
        ),
    )
}

fn pencil_cross_check() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let (mut worst, mut chain_fails) = (0.0f64, 0);
    for i in 0..50u64 {
        let m = rng.random_range(4..=64);
        let n = rng.random_range(4..=64);
        let a = draw_gaussian(m, n, 4000 + i);
        let s = make_randsvd_spd(m, log_uniform(&mut rng, 1e4), SpectrumMode::LogUniform, 5000 + i).unwrap();
        let t = make_randsvd_spd(n, log_uniform(&mut rng, 1e4), SpectrumMode::LogUniform, 6000 + i).unwrap();
        let g = exact_gsvd(&a, &s, &t).unwrap();
        let c = a.t_matmul(&s.matmul(&a)).symmetrized();
        let (lam, _) = exact_gheig(&c, &t).unwrap();
        for j in 0..m.min(n) / 2 {
            let x = lam[j].max(0.0).sqrt();
            worst = worst.max((x - g.sigma[j]).abs() / g.sigma[j]);
        }
        let l = (n / 4).max(1);
        let t_spd = DenseSpd::new(t.clone()).unwrap();
        let lt = linalg::cholesky(&t).unwrap();
        let ct = linalg::left_solve_lower_t(&lt, &linalg::left_solve_lower(&lt, &c.matmul(&draw_gaussian(n, l, 7000 + i))));
        let q = weighted_cholqr(&ct, &t_spd, false).unwrap().q;
        let rep = symmetric_projection_check(&c, &t, &q).unwrap();
        chain_fails += usize::from(!rep.holds(1e-12 * linalg::spectral_norm(&c)));
    }
    outcome(
        worst <= 1e-8 && chain_fails == 0,
        format!("50 instances: worst relative sqrt(lambda) vs sigma {worst:.1e}; {chain_fails} projection chain violations"),
    )
}

fn inexactness() -> Outcome {
    let out = run(ExperimentConfig::new(Experiment::Inexactness));
    let per_seed = {
        let mut m: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for r in &out {
            let key = (r.rel_tol.unwrap_or(0.0).to_bits(), r.seed);
            let e = m.entry(key).or_insert(0.0);
            *e = e.max(r.sv_abs_error.unwrap());
        }
        m
    };
    let med = |tol: f64| median(per_seed.iter().filter(|((t, _), _)| *t == tol.to_bits()).map(|(_, v)| *v).collect());
    let (exact, fine, coarse) = (med(0.0), med(1e-9), med(1e-3));
    outcome(
        fine <= 10.0 * exact && coarse >= 100.0 * fine,
        format!(
            "decay, k 10, q 2, 10 seeds, max over leading 10: exact {exact:.2e}, 1e-9 {fine:.2e} ({:.2}x), 1e-3 {coarse:.2e} ({:.0}x the 1e-9 case)",
            fine / exact,
            coarse / fine
        ),
    )
}

fn cost_audit(rows: &[Row]) -> Outcome {
    let mut fails = 0;
    let mut configs = std::collections::BTreeSet::new();
    for r in rows {
        let (method, q) = Method::parse(&r.method).expect("known method");
        assert_eq!(q, r.q);
        configs.insert((method.route().name(), r.k + r.p, r.q));
        let mut expect = Route::cost(method.route(), r.k + r.p, r.q);
        expect.s.applies += r.refine_s_applies;
        expect.s.solves += r.refine_s_solves;
        expect.t.applies += r.refine_t_applies;
        expect.t.solves += r.refine_t_solves;
        let seen = [r.a_applies, r.a_transposes, r.s_applies, r.s_solves, r.t_applies, r.t_solves];
        let want = [
            expect.a.applies,
            expect.a.transposes,
            expect.s.applies,
            expect.s.solves,
            expect.t.applies,
            expect.t.solves,
        ];
        fails += usize::from(seen != want);
    }
    outcome(
        fails == 0 && !rows.is_empty(),
        format!("{} rows over {} (route, l, q) configurations: {fails} mismatches", rows.len(), configs.len()),
    )
}

fn weighted_cholqr_accuracy() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let (mut orth, mut fact) = (0.0f64, 0.0f64);
    for i in 0..500u64 {
        let n = rng.random_range(2..=80);
        let c = rng.random_range(1..=n);
        let w = make_randsvd_spd(n, log_uniform(&mut rng, 1e6), SpectrumMode::LogUniform, 8000 + i).unwrap();
        let z = conditioned(n, c, log_uniform(&mut rng, 1e6), 9000 + i);
        let res = weighted_cholqr(&z, &DenseSpd::new(w.clone()).unwrap(), false).unwrap();
        orth = orth.max(w_orthogonality(&res.q, &w));
        fact = fact.max(linalg::spectral_norm(&res.q.matmul(&res.r).sub(&z)) / linalg::spectral_norm(&z));
    }
    outcome(
        orth <= 1e-10 && fact <= 1e-12,
        format!("500 pairs: worst orthogonality {orth:.1e}, worst factorization residual {fact:.1e}"),
    )
}

fn determinism(dir: &Path, first: &[u8]) -> Outcome {
    let threaded = binary_csv(&dir.join("threads4.csv"), &[], Some("4"));
    let serial = binary_csv(&dir.join("serial.csv"), &["--serial"], None);
    let rerun = binary_csv(&dir.join("rerun.csv"), &[], None);
    let same = first == threaded.as_slice() && first == serial.as_slice() && first == rerun.as_slice();
    outcome(
        same,
        format!("accuracy_vs_k CSV ({} bytes): rerun, 4 threads and --serial identical = {same}", first.len()),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut audited = Vec::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, o: Outcome| {
        println!("criterion {id:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    record(1, "oracle self-consistency", oracle_self_consistency());
    record(2, "exact-rank recovery", exact_rank_recovery(dir.path(), &mut audited));
    record(3, "per-sample bounds", per_sample_bounds(&mut audited));
    record(4, "probabilistic bound", probabilistic_bound(&mut audited));
    let first = binary_csv(&dir.path().join("first.csv"), &[], None);
    record(5, "accuracy versus k", accuracy_vs_k(&first, &mut audited));
    record(6, "method ordering", method_ordering(&mut audited));
    record(7, "condition sweep", condition_sweep(&mut audited));
    record(8, "preconditioned sampling", preconditioned_sampling(&mut audited));
    record(9, "pencil cross-check", pencil_cross_check());
    record(10, "inexact products", inexactness());
    record(11, "cost audit", cost_audit(&audited));
    record(12, "weighted CholQR", weighted_cholqr_accuracy());
    record(13, "determinism", determinism(dir.path(), &first));

    let failed: Vec<usize> = results.iter().filter(|(_, _, o)| !o.pass).map(|(id, _, _)| *id).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

//! Acceptance gate. Each test covers one criterion, prints a single
//! PASS/FAIL line, and asserts with the criterion's stated tolerance.

use std::time::Instant;

use pdreg::harness::{
    certified_l1_instance, gen_sparse_instance, run_sparse_benchmark, run_tv_benchmark, Method,
    SparseBenchConfig, TvBenchConfig,
};
use pdreg::imaging::{blur, div, grad};
use pdreg::linops::{DiagMetric, LinearMap};
use pdreg::proxops::{
    apply_activator, error_constant, prox_group_l12, prox_l1_diag, Activator,
};
use pdreg::rng;
use pdreg::solvers::{
    lagrangian_gap, matched_dpa_init, resolve_preconditioner, run, theorem_bound_dpa,
    theorem_bound_pda, v_distance, Algorithm, Preconditioner, ProblemSpec, RunRecord,
    SolverConfig, StopRule,
};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Exact spectral norm through a dense SVD, so certificate checks never
/// lean on power-iteration slack.
fn exact_op_norm(a: &LinearMap) -> f64 {
    let d = a.to_dense();
    let m = nalgebra::DMatrix::from_fn(d.rows(), d.cols(), |i, j| d.get(i, j));
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

fn scaled_metrics(a: &LinearMap) -> (DiagMetric, DiagMetric, f64) {
    let (sigma, gamma, _) =
        resolve_preconditioner(a, &Preconditioner::ScaledIdentity { factor: 0.99 }).unwrap();
    let step = sigma.uniform_value().unwrap();
    let alpha = 1.0 - (step * exact_op_norm(a)).powi(2);
    assert!(alpha > 0.0, "exact step condition violated: alpha = {alpha}");
    (sigma, gamma, alpha)
}

fn sparse_method_config(method: Method, a: &LinearMap) -> SolverConfig {
    pdreg::harness::method_config(method, a, 1.9).unwrap()
}

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {id:02} {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id:02} {name}: {detail}");
}

#[test]
fn criterion_01_pd_dp_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for seed in 1..=10u64 {
        let inst = gen_sparse_instance(seed, 20, 30, 4, 0.2).unwrap();
        let prob = inst.prob;
        let (sigma, gamma, _) =
            resolve_preconditioner(&prob.a, &Preconditioner::ScaledIdentity { factor: 0.99 })
                .unwrap();
        let explicit = Preconditioner::Explicit { sigma: sigma.clone(), gamma: gamma.clone() };

        let mut pd = SolverConfig::new(Algorithm::Pda, Activator::Identity);
        pd.precond = explicit.clone();
        pd.max_iters = 100;
        pd.record_iterates = true;
        let rec_pd = run(&prob, &pd, &StopRule::MaxIter { iters: 100 }, seed, None).unwrap();

        let x0 = vec![0.0; prob.a.in_dim()];
        let u0 = vec![0.0; prob.a.out_dim()];
        let (x0_dp, u0_dp) = matched_dpa_init(&prob, &sigma, &gamma, &x0, &u0);
        let mut dp = SolverConfig::new(Algorithm::Dpa, Activator::Identity);
        dp.precond = explicit;
        dp.max_iters = 100;
        dp.record_iterates = true;
        dp.x0 = Some(x0_dp);
        dp.u0 = Some(u0_dp);
        let rec_dp = run(&prob, &dp, &StopRule::MaxIter { iters: 100 }, seed, None).unwrap();

        for (xa, xb) in rec_pd.iterates.iter().zip(&rec_dp.iterates) {
            let dev = norm(&sub(xa, xb)) / (1.0 + norm(xa));
            worst = worst.max(dev);
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    report(
        1,
        "pd and dp iterates coincide under matched initialization",
        worst <= 1e-9 && dt < 5.0,
        &format!("max relative deviation {worst:.2e} over 10 instances x 100 iterations, {dt:.1}s"),
    );
}

fn certificate_margin(
    prob: &ProblemSpec,
    saddle: &pdreg::solvers::SaddlePoint,
    cfg: &SolverConfig,
    sigma: &DiagMetric,
    gamma: &DiagMetric,
    alpha: f64,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let mut mc = cfg.clone();
    mc.precond = Preconditioner::Explicit { sigma: sigma.clone(), gamma: gamma.clone() };
    mc.max_iters = n.max(1);
    let rec = run(prob, &mc, &StopRule::MaxIter { iters: n }, seed, None).unwrap();

    let x0 = vec![0.0; prob.a.in_dim()];
    let u0 = vec![0.0; prob.a.out_dim()];
    let v0 = v_distance(sigma, gamma, &x0, &u0, saddle);
    let gap = lagrangian_gap(&rec.averaged_x, &rec.averaged_u, saddle, prob);
    let b = prob.exact_datum().unwrap();
    let feas_sq = norm(&sub(&prob.a.apply(&rec.averaged_x), &b)).powi(2);

    let bound = match cfg.algorithm {
        Algorithm::Pda => {
            let e = error_constant(&cfg.activator, &prob.a).unwrap()
                / sigma.uniform_value().unwrap();
            theorem_bound_pda(n, prob.delta, gamma, alpha, e, v0).unwrap()
        }
        Algorithm::Dpa => theorem_bound_dpa(n, prob.delta, gamma, alpha, v0).unwrap(),
    };
    (gap - bound.lagrangian, feas_sq - bound.feasibility_sq)
}

#[test]
fn criterion_02_theorem_one_certificates() {
    let t0 = Instant::now();
    let methods = [Method::Pd, Method::Pds, Method::Pdp, Method::Pdl, Method::Pdal];
    let horizons = [10usize, 50, 100, 500, 1000];
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_feas = f64::NEG_INFINITY;
    for seed in 1..=5u64 {
        let (prob, saddle) = certified_l1_instance(seed, 50, 80, 5, 0.05).unwrap();
        assert!(prob.delta > 0.0);
        let (sigma, gamma, alpha) = scaled_metrics(&prob.a);
        for method in methods {
            let cfg = sparse_method_config(method, &prob.a);
            for n in horizons {
                let (g, f) =
                    certificate_margin(&prob, &saddle, &cfg, &sigma, &gamma, alpha, n, seed);
                worst_gap = worst_gap.max(g);
                worst_feas = worst_feas.max(f);
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    report(
        2,
        "measured gap and feasibility sit under the primal-dual certificate",
        worst_gap <= 1e-8 && worst_feas <= 1e-8 && dt < 60.0,
        &format!(
            "worst gap margin {worst_gap:.2e}, worst feasibility margin {worst_feas:.2e}, {dt:.1}s"
        ),
    );
}

#[test]
fn criterion_03_theorem_two_certificates() {
    let t0 = Instant::now();
    let horizons = [10usize, 50, 100, 500, 1000];
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_feas = f64::NEG_INFINITY;
    for seed in 1..=5u64 {
        let (prob, saddle) = certified_l1_instance(seed, 50, 80, 5, 0.05).unwrap();
        let (sigma, gamma, alpha) = scaled_metrics(&prob.a);
        for method in [Method::Dp, Method::Dps] {
            let cfg = sparse_method_config(method, &prob.a);
            for n in horizons {
                let (g, f) =
                    certificate_margin(&prob, &saddle, &cfg, &sigma, &gamma, alpha, n, seed);
                worst_gap = worst_gap.max(g);
                worst_feas = worst_feas.max(f);
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    report(
        3,
        "measured gap and feasibility sit under the dual-primal certificate",
        worst_gap <= 1e-8 && worst_feas <= 1e-8 && dt < 30.0,
        &format!(
            "worst gap margin {worst_gap:.2e}, worst feasibility margin {worst_feas:.2e}, {dt:.1}s"
        ),
    );
}

#[test]
fn criterion_04_noise_free_rates() {
    let mut worst_gap_ratio = 0.0f64;
    let mut worst_feas_ratio = 0.0f64;
    for seed in 1..=3u64 {
        let (prob, saddle) = certified_l1_instance(seed, 50, 80, 5, 0.0).unwrap();
        assert_eq!(prob.delta, 0.0);
        let (sigma, gamma, alpha) = scaled_metrics(&prob.a);
        let x0 = vec![0.0; prob.a.in_dim()];
        let u0 = vec![0.0; prob.a.out_dim()];
        let v0 = v_distance(&sigma, &gamma, &x0, &u0, &saddle);
        let feas_cap = 8.0 * gamma.inv_norm() * v0 / alpha;
        for method in [Method::Pd, Method::Pdl] {
            let mut cfg = sparse_method_config(method, &prob.a);
            cfg.precond =
                Preconditioner::Explicit { sigma: sigma.clone(), gamma: gamma.clone() };
            for n in [100usize, 200, 400, 800] {
                cfg.max_iters = n;
                let rec = run(&prob, &cfg, &StopRule::MaxIter { iters: n }, seed, None).unwrap();
                let gap = lagrangian_gap(&rec.averaged_x, &rec.averaged_u, &saddle, &prob);
                let b = prob.exact_datum().unwrap();
                let feas_sq = norm(&sub(&prob.a.apply(&rec.averaged_x), &b)).powi(2);
                worst_gap_ratio = worst_gap_ratio.max(n as f64 * gap / v0);
                worst_feas_ratio = worst_feas_ratio.max(n as f64 * feas_sq / feas_cap);
            }
        }
    }
    report(
        4,
        "noise-free averages obey the 1/N rate constants",
        worst_gap_ratio <= 1.0 + 1e-6 && worst_feas_ratio <= 1.0 + 1e-6,
        &format!(
            "max N*gap/V0 = {worst_gap_ratio:.6}, max N*feas^2/cap = {worst_feas_ratio:.6}"
        ),
    );
}

#[test]
fn criterion_05_activation_operator_properties() {
    let mut worst_a3 = f64::NEG_INFINITY;
    let mut worst_equiv = 0.0f64;
    let mut worst_slab = 0.0f64;
    for seed in 1..=3u64 {
        let inst = gen_sparse_instance(seed, 20, 30, 4, 0.05).unwrap();
        let prob = &inst.prob;
        let gt = prob.ground_truth.as_ref().unwrap();
        let (sigma, _, _) = scaled_metrics(&prob.a);
        let step = sigma.uniform_value().unwrap();
        let a_norm = exact_op_norm(&prob.a);
        let frob_sq: f64 = {
            let d = prob.a.to_dense();
            d.data().iter().map(|v| v * v).sum()
        };

        let activators = [
            Activator::Identity,
            Activator::serial_all(&prob.a),
            Activator::parallel_frobenius(&prob.a).unwrap(),
            Activator::Landweber { step: 1.9 / (a_norm * a_norm) },
            Activator::AdaptiveLandweber { cap: 1e6, a_norm },
        ];
        let d2 = prob.delta * prob.delta;
        let mut r = rng::stream(seed, rng::STREAM_MISC);
        for t in &activators {
            let e_metric = error_constant(t, &prob.a).unwrap() / step;
            for k in 0..200 {
                let scale = [0.1, 1.0, 10.0][k % 3];
                let mut g = vec![0.0; prob.a.in_dim()];
                rng::fill_standard_normal(&mut r, &mut g);
                let x: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a + scale * b).collect();
                let tx = apply_activator(t, &x, &prob.a, &prob.b_delta).unwrap();
                let lhs = sigma.inv_weighted_norm_sq(&sub(&tx, gt));
                let rhs = sigma.inv_weighted_norm_sq(&sub(&x, gt)) + e_metric * d2;
                worst_a3 = worst_a3.max(lhs - rhs);
            }
        }

        let parallel = Activator::parallel_frobenius(&prob.a).unwrap();
        let landweber = Activator::Landweber { step: 1.0 / frob_sq };
        for _ in 0..50 {
            let mut x = vec![0.0; prob.a.in_dim()];
            rng::fill_standard_normal(&mut r, &mut x);
            let pa = apply_activator(&parallel, &x, &prob.a, &prob.b_delta).unwrap();
            let lb = apply_activator(&landweber, &x, &prob.a, &prob.b_delta).unwrap();
            worst_equiv = worst_equiv.max(norm(&sub(&pa, &lb)));
        }

        let dense = prob.a.to_dense();
        for _ in 0..50 {
            let mut u = vec![0.0; prob.a.out_dim()];
            rng::fill_standard_normal(&mut r, &mut u);
            for e in u.iter_mut() {
                *e *= 3.0;
            }
            for j in 0..prob.a.in_dim() {
                let slab = Activator::DualSlabs { cols: vec![j] };
                let pu = apply_activator(&slab, &u, &prob.a, &prob.b_delta).unwrap();
                let col: Vec<f64> = (0..prob.a.out_dim()).map(|i| dense.get(i, j)).collect();
                worst_slab = worst_slab.max(dot(&col, &pu).abs());
            }
        }
    }
    report(
        5,
        "activation operators satisfy the error-bounded quasi-nonexpansivity",
        worst_a3 <= 1e-9 && worst_equiv <= 1e-12 && worst_slab <= 1.0 + 1e-12,
        &format!(
            "worst A3 violation {worst_a3:.2e}, parallel-vs-Landweber gap {worst_equiv:.2e}, \
             worst slab value {worst_slab:.12}"
        ),
    );
}

#[test]
fn criterion_06_calculus_and_prox_correctness() {
    let mut worst_adjoint = 0.0f64;
    let mut worst_blur = 0.0f64;
    let mut r = rng::stream(9, rng::STREAM_MISC);
    for side in [8usize, 16, 31] {
        let n2 = side * side;
        let mut u = vec![0.0; n2];
        let mut v = vec![0.0; 2 * n2];
        rng::fill_standard_normal(&mut r, &mut u);
        rng::fill_standard_normal(&mut r, &mut v);
        let gu = grad(&u, side);
        let dv = div(&v, side);
        let defect = (dot(&gu, &v) + dot(&u, &dv)).abs();
        worst_adjoint = worst_adjoint.max(defect / (norm(&gu) * norm(&v)).max(1e-300));

        for radius in [1usize, 2] {
            let mut w = vec![0.0; n2];
            rng::fill_standard_normal(&mut r, &mut w);
            let bu = blur(&u, side, radius);
            let bw = blur(&w, side, radius);
            let defect = (dot(&bu, &w) - dot(&u, &bw)).abs();
            worst_blur = worst_blur.max(defect / (norm(&bu) * norm(&w)).max(1e-300));
        }
    }

    let mut worst_l1 = 0.0f64;
    let weights: Vec<f64> = (0..40).map(|i| 0.2 + 0.05 * i as f64).collect();
    let sigma = DiagMetric::diag(weights.clone()).unwrap();
    for _ in 0..20 {
        let mut v = vec![0.0; 40];
        rng::fill_standard_normal(&mut r, &mut v);
        let p = prox_l1_diag(&v, &sigma);
        for i in 0..40 {
            let defect = if p[i] != 0.0 {
                (v[i] - p[i] - weights[i] * p[i].signum()).abs()
            } else {
                (v[i].abs() - weights[i]).max(0.0)
            };
            worst_l1 = worst_l1.max(defect);
        }
    }

    let mut worst_group = 0.0f64;
    for (v, s) in [
        ([0.8, -0.6], 0.5),
        ([0.3, 0.2], 1.0),
        ([-1.4, 0.9], 0.5),
        ([1.2, 1.6], 1.0),
    ] {
        let p = prox_group_l12(&v, s).unwrap();
        let (mut best_a, mut best_b, mut best_val) = (0.0f64, 0.0f64, f64::INFINITY);
        let half = 2.0f64;
        let steps = (2.0 * half / 1e-3) as i64;
        for ia in 0..=steps {
            let a = -half + ia as f64 * 1e-3;
            let da = a - v[0];
            for ib in 0..=steps {
                let b = -half + ib as f64 * 1e-3;
                let db = b - v[1];
                let val = s * (a * a + b * b).sqrt() + 0.5 * (da * da + db * db);
                if val < best_val {
                    best_val = val;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        worst_group = worst_group.max((p[0] - best_a).abs().max((p[1] - best_b).abs()));
    }

    report(
        6,
        "discrete calculus adjoints and proximal maps verify",
        worst_adjoint <= 1e-12 && worst_blur <= 1e-12 && worst_l1 <= 1e-12
            && worst_group <= 2e-3,
        &format!(
            "grad/div defect {worst_adjoint:.2e}, blur defect {worst_blur:.2e}, \
             l1 optimality defect {worst_l1:.2e}, group prox vs grid {worst_group:.2e}"
        ),
    );
}

fn sparse_bench(seed: u64, noise_amp: f64, methods: Vec<Method>) -> Vec<pdreg::harness::MethodSummary> {
    let cfg = SparseBenchConfig {
        seed,
        noise_amp,
        methods,
        out_dir: None,
        ..SparseBenchConfig::default()
    };
    run_sparse_benchmark(&cfg).unwrap()
}

#[test]
fn criterion_07_sparse_method_ordering() {
    let t0 = Instant::now();
    let methods = vec![Method::Pd, Method::Pds, Method::Pdl, Method::Pdal];
    let mut errs: std::collections::HashMap<&str, Vec<f64>> = Default::default();
    for seed in 1..=10u64 {
        for s in sparse_bench(seed, 0.05, methods.clone()) {
            errs.entry(s.method.name()).or_default().push(s.recon_error);
        }
    }
    let mut med = |m: &str| median(errs.get_mut(m).unwrap());
    let (pd, pds, pdl, pdal) = (med("pd"), med("pds"), med("pdl"), med("pdal"));
    let dt = t0.elapsed().as_secs_f64();
    report(
        7,
        "data reuse improves the oracle reconstruction error",
        pdal <= pdl && pdl <= pd && pds <= pd && dt < 120.0,
        &format!(
            "median errors pdal {pdal:.4} <= pdl {pdl:.4} <= pd {pd:.4}, pds {pds:.4} <= pd, \
             sweep {dt:.1}s"
        ),
    );
}

fn full_horizon_run(prob: &ProblemSpec, method: Method, seed: u64) -> RunRecord {
    let mut cfg = sparse_method_config(method, &prob.a);
    cfg.max_iters = 1000;
    run(prob, &cfg, &StopRule::MaxIter { iters: 1000 }, seed, None).unwrap()
}

fn oracle_iter(rec: &RunRecord) -> usize {
    let mut best = 0;
    for (i, row) in rec.rows.iter().enumerate() {
        if row.recon_error < rec.rows[best].recon_error {
            best = i;
        }
    }
    rec.rows[best].iter
}

#[test]
fn criterion_08_early_stopping_u_shape() {
    let mut wins_pd = 0;
    let mut wins_pdal = 0;
    for seed in 1..=10u64 {
        let inst = gen_sparse_instance(seed, 400, 600, 60, 0.05).unwrap();
        for (method, wins) in [(Method::Pd, &mut wins_pd), (Method::Pdal, &mut wins_pdal)] {
            let rec = full_horizon_run(&inst.prob, method, seed);
            let n0 = oracle_iter(&rec);
            let late = 5 * n0;
            assert!(late <= rec.rows.len(), "horizon too short: 5 x {n0}");
            let err0 = rec.rows[n0 - 1].recon_error;
            let err5 = rec.rows[late - 1].recon_error;
            if err0 < err5 {
                *wins += 1;
            }
        }
    }
    report(
        8,
        "reconstruction error is u-shaped around the oracle stop",
        wins_pd >= 9 && wins_pdal >= 9,
        &format!("pd {wins_pd}/10 seeds, pdal {wins_pdal}/10 seeds"),
    );
}

#[test]
fn criterion_09_tv_restoration() {
    let t0 = Instant::now();
    let mut ok_mse = true;
    let mut ok_iters = true;
    let mut detail = String::new();
    for seed in 1..=5u64 {
        let cfg = TvBenchConfig { seed, ..TvBenchConfig::default() };
        let rep = run_tv_benchmark(&cfg).unwrap();
        let get = |m: Method| rep.methods.iter().find(|s| s.method == m).unwrap();
        let cap = 0.2 * rep.noisy.mse;
        ok_mse &= get(Method::Pdl).mse <= cap && get(Method::Pdal).mse <= cap;
        ok_iters &= get(Method::Ppd).iters < get(Method::Pd).iters;
        if seed == 1 {
            detail = format!(
                "seed 1: noisy mse {:.2e}, pdl {:.2e}, pdal {:.2e}, iters ppd {} vs pd {}",
                rep.noisy.mse,
                get(Method::Pdl).mse,
                get(Method::Pdal).mse,
                get(Method::Ppd).iters,
                get(Method::Pd).iters
            );
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    report(
        9,
        "tv deblurring beats the noisy input and preconditioning stops earlier",
        ok_mse && ok_iters && dt < 180.0,
        &format!("{detail}, all 5 seeds, {dt:.1}s"),
    );
}

#[test]
fn criterion_10_c_over_delta_rule() {
    let mut doubling_ok = true;
    let mut seeds_within = 0;
    let mut picks = Vec::new();
    let mut oracle: Vec<(u64, usize, f64, f64)> = Vec::new();
    for seed in 1..=10u64 {
        let inst = gen_sparse_instance(seed, 400, 600, 60, 0.05).unwrap();
        let rec = full_horizon_run(&inst.prob, Method::Pd, seed);
        let n0 = oracle_iter(&rec);
        let err0 = rec.rows[n0 - 1].recon_error;
        picks.push((n0 as f64 + 0.75) * inst.prob.delta);
        oracle.push((seed, n0, err0, inst.prob.delta));

        let c = (n0 as f64 + 0.75) * inst.prob.delta;
        let mut cfg = sparse_method_config(Method::Pd, &inst.prob.a);
        cfg.max_iters = 1000;
        let rule = run(&inst.prob, &cfg, &StopRule::COverDelta { c }, seed, None).unwrap();
        doubling_ok &= rule.stop.iter == n0 + 1;

        let half = gen_sparse_instance(seed, 400, 600, 60, 0.025).unwrap();
        doubling_ok &= half.prob.delta == inst.prob.delta / 2.0;
        let rule_half =
            run(&half.prob, &cfg, &StopRule::COverDelta { c }, seed, None).unwrap();
        doubling_ok &= rule_half.stop.iter == 2 * (n0 + 1);
    }

    let c_fixed = median(&mut picks);
    for &(seed, n0, err0, _) in &oracle {
        let inst = gen_sparse_instance(seed, 400, 600, 60, 0.05).unwrap();
        let mut cfg = sparse_method_config(Method::Pd, &inst.prob.a);
        cfg.max_iters = 1000;
        let rec =
            run(&inst.prob, &cfg, &StopRule::COverDelta { c: c_fixed }, seed, None).unwrap();
        let err_rule = rec.rows.last().unwrap().recon_error;
        if err_rule <= 2.0 * err0 {
            seeds_within += 1;
        }
        let _ = n0;
    }
    report(
        10,
        "the a-priori c/delta rule tracks the oracle",
        doubling_ok && seeds_within >= 7,
        &format!(
            "stop count doubles exactly under delta halving on 10/10 seeds, \
             rule error within 2x oracle on {seeds_within}/10 seeds"
        ),
    );
}

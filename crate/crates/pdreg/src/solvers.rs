//! Primal-dual and dual-primal iterations with data-reuse activation.
//!
//! Both methods solve `min J(x) subject to A x = b` given only a noisy datum
//! `b_delta` with `||b_delta - b|| <= delta`. Regularization happens through
//! early stopping: the iteration count plays the role of the regularization
//! parameter, and the convergence certificates bound the Lagrangian gap and
//! feasibility of the running averages after `N` steps in terms of `delta`
//! and `N`.

use std::time::Instant;

use crate::imaging::{image_metrics, ImageMetrics};
use crate::linops::{
    check_step_condition, op_norm_est, pock_chambolle_diagonals, DiagMetric, LinearMap, NORM_SEED,
};
use crate::num::{axpy, dot, norm, norm_sq, sub};
use crate::proxops::{apply_activator, error_constant, Activator, Regularizer};
use crate::rng;
use crate::{Error, Result};

/// Estimated `alpha` below this is treated as a violated step condition;
/// the margin absorbs power-iteration round-off for metrics that satisfy
/// the condition with equality by construction.
const ALPHA_GATE: f64 = -1e-8;

/// Iterates whose norm exceeds `DIVERGENCE_FACTOR * (1 + ||z0||)` abort the
/// run with `RunStatus::Diverged`.
const DIVERGENCE_FACTOR: f64 = 1e12;

/// Relative tolerance and iteration budget for the norm estimates the
/// runner depends on.
const RUN_NORM_TOL: f64 = 1e-12;
const RUN_NORM_MAX_ITER: usize = 2000;

/// The inverse problem `min J(x) : A x = b`, observed through `b_delta`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub a: LinearMap,
    pub b_delta: Vec<f64>,
    /// Noise level: `||b_delta - A ground_truth|| <= delta`.
    pub delta: f64,
    pub regularizer: Regularizer,
    /// Signal the datum was generated from, when known.
    pub ground_truth: Option<Vec<f64>>,
}

impl ProblemSpec {
    /// The exact datum `A * ground_truth`, when the truth is known.
    pub fn exact_datum(&self) -> Option<Vec<f64>> {
        self.ground_truth.as_ref().map(|g| self.a.apply(g))
    }

    /// The block of `x` that reconstruction error is measured on: the image
    /// part for stacked imaging problems, all of `x` otherwise.
    pub fn recon_block<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        match self.regularizer {
            Regularizer::GroupL12PlusBox { side } => &x[..side * side],
            _ => x,
        }
    }
}

/// A primal-dual solution of the exact problem; reference point for the
/// Lagrangian gap and the certificates.
#[derive(Debug, Clone)]
pub struct SaddlePoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Dual ascent first, primal prox second, activation on the primal.
    Pda,
    /// Primal prox first, dual ascent second, activation on the dual.
    Dpa,
}

/// Choice of the diagonal step metrics `Sigma` (primal) and `Gamma` (dual).
#[derive(Debug, Clone)]
pub enum Preconditioner {
    /// `Sigma = Gamma = (factor / ||A||) Id`, giving
    /// `alpha = 1 - factor^2`.
    ScaledIdentity { factor: f64 },
    /// Diagonals from the absolute row and column sums of `A`, which satisfy
    /// the step condition by construction.
    PockChambolle,
    Explicit { sigma: DiagMetric, gamma: DiagMetric },
}

/// Resolves a preconditioner against the operator. The third value is the
/// operator norm estimate when one was needed.
pub fn resolve_preconditioner(
    a: &LinearMap,
    precond: &Preconditioner,
) -> Result<(DiagMetric, DiagMetric, Option<f64>)> {
    match precond {
        Preconditioner::ScaledIdentity { factor } => {
            if !(factor.is_finite() && *factor > 0.0 && *factor < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "step factor {factor} must lie in (0, 1)"
                )));
            }
            let est = op_norm_est(a, RUN_NORM_TOL, RUN_NORM_MAX_ITER, NORM_SEED);
            if est.value <= 0.0 {
                return Err(Error::Degenerate("operator norm estimate is zero".into()));
            }
            let step = factor / est.value;
            let sigma = DiagMetric::scaled(a.in_dim(), step)?;
            let gamma = DiagMetric::scaled(a.out_dim(), step)?;
            Ok((sigma, gamma, Some(est.value)))
        }
        Preconditioner::PockChambolle => {
            let (sigma, gamma) = pock_chambolle_diagonals(a)?;
            Ok((sigma, gamma, None))
        }
        Preconditioner::Explicit { sigma, gamma } => {
            if sigma.dim() != a.in_dim() {
                return Err(Error::Shape { what: "primal metric", expected: a.in_dim(), got: sigma.dim() });
            }
            if gamma.dim() != a.out_dim() {
                return Err(Error::Shape { what: "dual metric", expected: a.out_dim(), got: gamma.dim() });
            }
            Ok((sigma.clone(), gamma.clone(), None))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub activator: Activator,
    /// Reshuffle projection order each iteration.
    pub shuffle: bool,
    pub precond: Preconditioner,
    /// Iteration horizon for stopping rules that search (oracle stopping).
    pub max_iters: usize,
    /// Keep every primal iterate in the record.
    pub record_iterates: bool,
    pub x0: Option<Vec<f64>>,
    pub u0: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, activator: Activator) -> Self {
        SolverConfig {
            algorithm,
            activator,
            shuffle: false,
            precond: Preconditioner::ScaledIdentity { factor: 0.99 },
            max_iters: 1000,
            record_iterates: false,
            x0: None,
            u0: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum StopRule {
    /// Run exactly this many iterations.
    MaxIter { iters: usize },
    /// Track the reconstruction error against the ground truth and stop
    /// once it has not improved for `patience` iterations (or the horizon
    /// is reached); the reported iterate is the argmin.
    OracleReconMin { patience: usize },
    /// A priori rule `N = ceil(c / delta)`; needs `delta > 0`.
    COverDelta { c: f64 },
}

#[derive(Debug, Clone)]
pub struct StopReport {
    pub rule: &'static str,
    /// The stopping index the rule selected.
    pub iter: usize,
    /// The value of the monitored quantity at that index.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Diverged,
}

/// Per-iteration measurements. Gap and feasibility are evaluated at the
/// running averages of the iterates, reconstruction error at the raw
/// iterate. Entries that need unavailable references are `NaN`.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub iter: usize,
    /// Cumulative stepping time; excludes metric evaluation.
    pub time_s: f64,
    pub lagrangian_gap: f64,
    pub feasibility: f64,
    pub recon_error: f64,
    pub image: Option<ImageMetrics>,
}

/// Everything the runner derived before iterating.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub sigma: DiagMetric,
    pub gamma: DiagMetric,
    /// `1 - ||Gamma^{1/2} A Sigma^{1/2}||^2`, estimated by power iteration.
    pub alpha: f64,
    pub a_norm_est: Option<f64>,
    /// Euclidean error constant of the activation operator.
    pub e_euclid: f64,
    /// Error constant in the metric of the iteration, when the metric is a
    /// scaled identity on the activated block (or the constant is zero).
    pub e_metric: Option<f64>,
    /// `V(z0 - z)` against the supplied saddle point.
    pub v0: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<MetricRow>,
    /// Running average of the primal iterates at the final iteration.
    pub averaged_x: Vec<f64>,
    pub averaged_u: Vec<f64>,
    /// Iterate with the smallest reconstruction error, when a ground truth
    /// was available.
    pub best_x: Option<Vec<f64>>,
    pub stop: StopReport,
    pub status: RunStatus,
    pub setup: RunSetup,
    /// Raw primal iterates, populated when `record_iterates` is set.
    pub iterates: Vec<Vec<f64>>,
    pub notes: Vec<String>,
}

/// Joint state of either iteration. For the primal-dual order `act` holds
/// the activated primal point `p` and `act_bar` its extrapolation; for the
/// dual-primal order they hold the activated dual point `q` and its
/// extrapolation.
#[derive(Debug, Clone)]
pub struct SaddleState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub act: Vec<f64>,
    pub act_bar: Vec<f64>,
    pub iter: usize,
}

impl SaddleState {
    pub fn pda_init(x0: Vec<f64>, u0: Vec<f64>) -> Self {
        SaddleState { act: x0.clone(), act_bar: x0.clone(), x: x0, u: u0, iter: 0 }
    }

    pub fn dpa_init(x0: Vec<f64>, u0: Vec<f64>) -> Self {
        SaddleState { act: u0.clone(), act_bar: u0.clone(), x: x0, u: u0, iter: 0 }
    }
}

/// One primal-dual step: dual ascent along `A act_bar - b_delta`, primal
/// prox from the activated point, activation, extrapolation.
pub fn pda_step(
    s: &mut SaddleState,
    prob: &ProblemSpec,
    sigma: &DiagMetric,
    gamma: &DiagMetric,
    t: &Activator,
) -> Result<()> {
    let mut r = prob.a.apply(&s.act_bar);
    for (ri, bi) in r.iter_mut().zip(&prob.b_delta) {
        *ri -= bi;
    }
    gamma.mul_in_place(&mut r);
    for (ui, ri) in s.u.iter_mut().zip(&r) {
        *ui += ri;
    }

    let mut g = prob.a.apply_adjoint(&s.u);
    sigma.mul_in_place(&mut g);
    let arg: Vec<f64> = s.act.iter().zip(&g).map(|(p, gi)| p - gi).collect();
    let x_new = prob.regularizer.prox(&arg, sigma);

    let p_new = apply_activator(t, &x_new, &prob.a, &prob.b_delta)?;
    let act_bar: Vec<f64> = p_new
        .iter()
        .zip(&x_new)
        .zip(&s.act)
        .map(|((pn, xn), po)| pn + xn - po)
        .collect();

    s.x = x_new;
    s.act = p_new;
    s.act_bar = act_bar;
    s.iter += 1;
    Ok(())
}

/// One dual-primal step: primal prox along `A* act_bar`, dual ascent from
/// the activated dual point, activation, extrapolation.
pub fn dpa_step(
    s: &mut SaddleState,
    prob: &ProblemSpec,
    sigma: &DiagMetric,
    gamma: &DiagMetric,
    t: &Activator,
) -> Result<()> {
    let mut g = prob.a.apply_adjoint(&s.act_bar);
    sigma.mul_in_place(&mut g);
    let arg: Vec<f64> = s.x.iter().zip(&g).map(|(x, gi)| x - gi).collect();
    let x_new = prob.regularizer.prox(&arg, sigma);

    let mut r = prob.a.apply(&x_new);
    for (ri, bi) in r.iter_mut().zip(&prob.b_delta) {
        *ri -= bi;
    }
    gamma.mul_in_place(&mut r);
    let u_new: Vec<f64> = s.act.iter().zip(&r).map(|(q, ri)| q + ri).collect();

    let q_new = apply_activator(t, &u_new, &prob.a, &prob.b_delta)?;
    let act_bar: Vec<f64> = q_new
        .iter()
        .zip(&u_new)
        .zip(&s.act)
        .map(|((qn, un), qo)| qn + un - qo)
        .collect();

    s.x = x_new;
    s.u = u_new;
    s.act = q_new;
    s.act_bar = act_bar;
    s.iter += 1;
    Ok(())
}

/// `V(z0 - z) = ||x0 - x||^2_{Sigma^{-1}} / 2 + ||u0 - u||^2_{Gamma^{-1}} / 2`.
pub fn v_distance(
    sigma: &DiagMetric,
    gamma: &DiagMetric,
    x0: &[f64],
    u0: &[f64],
    z: &SaddlePoint,
) -> f64 {
    0.5 * sigma.inv_weighted_norm_sq(&sub(x0, &z.x))
        + 0.5 * gamma.inv_weighted_norm_sq(&sub(u0, &z.u))
}

/// Lagrangian gap of `(x, u)` against the saddle point `z`:
/// `L(x, z.u) - L(z.x, u)` with the exact datum (from the ground truth when
/// known, else `A z.x`).
pub fn lagrangian_gap(x: &[f64], u: &[f64], z: &SaddlePoint, prob: &ProblemSpec) -> f64 {
    let b = prob.exact_datum().unwrap_or_else(|| prob.a.apply(&z.x));
    let ax = prob.a.apply(x);
    let az = prob.a.apply(&z.x);
    let left = prob.regularizer.eval(x) + dot(&z.u, &sub(&ax, &b));
    let right = prob.regularizer.eval(&z.x) + dot(u, &sub(&az, &b));
    left - right
}

/// Primal starting point that makes the dual-primal iteration reproduce the
/// primal-dual one when both use identity activation: the first dual ascent
/// of the primal-dual order is folded into the initialization.
pub fn matched_dpa_init(
    prob: &ProblemSpec,
    sigma: &DiagMetric,
    gamma: &DiagMetric,
    x0: &[f64],
    u0: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut r = prob.a.apply(x0);
    for (ri, bi) in r.iter_mut().zip(&prob.b_delta) {
        *ri -= bi;
    }
    gamma.mul_in_place(&mut r);
    let mut g = prob.a.apply_adjoint(&r);
    sigma.mul_in_place(&mut g);
    let x0_dp: Vec<f64> = x0.iter().zip(&g).map(|(x, gi)| x - gi).collect();
    (x0_dp, u0.to_vec())
}

/// Runs the configured iteration until the stop rule fires.
///
/// The `saddle` point, when given, enables the Lagrangian gap column and
/// `V(z0 - z)` in the setup; without it the gap is `NaN`. Feasibility is
/// measured against the exact datum when a ground truth or saddle point is
/// known, else against `b_delta`. `seed` only feeds the shuffle stream.
pub fn run(
    prob: &ProblemSpec,
    cfg: &SolverConfig,
    stop: &StopRule,
    seed: u64,
    saddle: Option<&SaddlePoint>,
) -> Result<RunRecord> {
    let p = prob.a.in_dim();
    let d = prob.a.out_dim();
    if prob.b_delta.len() != d {
        return Err(Error::Shape { what: "datum", expected: d, got: prob.b_delta.len() });
    }
    if let Some(g) = &prob.ground_truth {
        if g.len() != p {
            return Err(Error::Shape { what: "ground truth", expected: p, got: g.len() });
        }
    }
    if let Some(z) = saddle {
        if z.x.len() != p {
            return Err(Error::Shape { what: "saddle primal", expected: p, got: z.x.len() });
        }
        if z.u.len() != d {
            return Err(Error::Shape { what: "saddle dual", expected: d, got: z.u.len() });
        }
    }

    cfg.activator.validate(&prob.a)?;
    match cfg.algorithm {
        Algorithm::Pda if cfg.activator.is_dual() => {
            return Err(Error::InvalidConfig(
                "the primal-dual order activates the primal variable; dual slab projections do not apply".into(),
            ));
        }
        Algorithm::Dpa
            if !cfg.activator.is_dual() && !matches!(cfg.activator, Activator::Identity) =>
        {
            return Err(Error::InvalidConfig(
                "the dual-primal order activates the dual variable; primal activation does not apply".into(),
            ));
        }
        _ => {}
    }

    let (sigma, gamma, a_norm_est) = resolve_preconditioner(&prob.a, &cfg.precond)?;
    let chk = check_step_condition(&sigma, &gamma, &prob.a, RUN_NORM_TOL, RUN_NORM_MAX_ITER, NORM_SEED)?;
    if chk.alpha < ALPHA_GATE {
        return Err(Error::InadmissibleStep { alpha: chk.alpha });
    }
    let mut notes = Vec::new();
    if !chk.norm_converged {
        notes.push("power iteration for the step condition did not converge".to_string());
    }

    let e_euclid = error_constant(&cfg.activator, &prob.a)?;
    let e_metric = if e_euclid == 0.0 {
        Some(0.0)
    } else if cfg.activator.is_dual() {
        gamma.uniform_value().map(|g| e_euclid / g)
    } else {
        sigma.uniform_value().map(|s| e_euclid / s)
    };

    let total = match stop {
        StopRule::MaxIter { iters } => *iters,
        StopRule::OracleReconMin { patience } => {
            if prob.ground_truth.is_none() {
                return Err(Error::InvalidConfig(
                    "oracle stopping needs a ground truth to monitor".into(),
                ));
            }
            if *patience == 0 {
                return Err(Error::InvalidConfig("oracle patience must be at least 1".into()));
            }
            cfg.max_iters
        }
        StopRule::COverDelta { c } => {
            if !(c.is_finite() && *c > 0.0) {
                return Err(Error::InvalidConfig(format!("stop constant c = {c} must be positive")));
            }
            if prob.delta <= 0.0 {
                return Err(Error::InvalidConfig(
                    "the a priori rule c/delta needs a positive noise level".into(),
                ));
            }
            (c / prob.delta).ceil() as usize
        }
    };

    let x0 = match &cfg.x0 {
        Some(v) => {
            if v.len() != p {
                return Err(Error::Shape { what: "x0", expected: p, got: v.len() });
            }
            v.clone()
        }
        None => vec![0.0; p],
    };
    let u0 = match &cfg.u0 {
        Some(v) => {
            if v.len() != d {
                return Err(Error::Shape { what: "u0", expected: d, got: v.len() });
            }
            v.clone()
        }
        None => vec![0.0; d],
    };

    let mut state = match cfg.algorithm {
        Algorithm::Pda => SaddleState::pda_init(x0, u0),
        Algorithm::Dpa => SaddleState::dpa_init(x0, u0),
    };
    let v0 = saddle.map(|z| v_distance(&sigma, &gamma, &state.x, &state.u, z));

    let b_ref = prob
        .exact_datum()
        .or_else(|| saddle.map(|z| prob.a.apply(&z.x)))
        .unwrap_or_else(|| prob.b_delta.clone());
    // Constant parts of the gap: J(z.x) and A z.x - b.
    let saddle_terms = saddle.map(|z| {
        (prob.regularizer.eval(&z.x), sub(&prob.a.apply(&z.x), &b_ref))
    });

    let image_side = match prob.regularizer {
        Regularizer::GroupL12PlusBox { side } if prob.ground_truth.is_some() => Some(side),
        _ => None,
    };

    let guard_x = DIVERGENCE_FACTOR * (1.0 + norm(&state.x));
    let guard_u = DIVERGENCE_FACTOR * (1.0 + norm(&state.u));

    let mut act = cfg.activator.clone();
    let mut shuffle_rng = if cfg.shuffle { Some(rng::stream(seed, rng::STREAM_SHUFFLE)) } else { None };

    let mut sum_x = vec![0.0; p];
    let mut sum_u = vec![0.0; d];
    let mut sum_ax = vec![0.0; d];
    let mut rows: Vec<MetricRow> = Vec::new();
    let mut iterates: Vec<Vec<f64>> = Vec::new();
    let mut best_x: Option<Vec<f64>> = None;
    let mut best_recon = f64::INFINITY;
    let mut best_iter = 0usize;
    let mut status = RunStatus::Completed;
    let mut elapsed = 0.0f64;
    let mut done = 0usize;

    for k in 1..=total {
        let t0 = Instant::now();
        if let Some(r) = shuffle_rng.as_mut() {
            act.shuffle_indices(r);
        }
        match cfg.algorithm {
            Algorithm::Pda => pda_step(&mut state, prob, &sigma, &gamma, &act)?,
            Algorithm::Dpa => dpa_step(&mut state, prob, &sigma, &gamma, &act)?,
        }
        elapsed += t0.elapsed().as_secs_f64();

        if norm(&state.x) > guard_x || norm(&state.u) > guard_u {
            status = RunStatus::Diverged;
            notes.push(format!("iterate norm exceeded the divergence guard at iteration {k}"));
            break;
        }
        done = k;

        axpy(1.0, &state.x, &mut sum_x);
        axpy(1.0, &state.u, &mut sum_u);
        let ax = prob.a.apply(&state.x);
        axpy(1.0, &ax, &mut sum_ax);
        let inv_k = 1.0 / k as f64;

        let resid_avg: Vec<f64> =
            sum_ax.iter().zip(&b_ref).map(|(s, b)| s * inv_k - b).collect();
        let feasibility = norm(&resid_avg);
        let lagrangian_gap = match (&saddle_terms, saddle) {
            (Some((j_saddle, az_b)), Some(z)) => {
                let x_avg: Vec<f64> = sum_x.iter().map(|v| v * inv_k).collect();
                let u_avg: Vec<f64> = sum_u.iter().map(|v| v * inv_k).collect();
                prob.regularizer.eval(&x_avg) + dot(&z.u, &resid_avg)
                    - j_saddle
                    - dot(&u_avg, az_b)
            }
            _ => f64::NAN,
        };
        let recon_error = match &prob.ground_truth {
            Some(g) => norm(&sub(prob.recon_block(&state.x), prob.recon_block(g))),
            None => f64::NAN,
        };
        let image = image_side.map(|side| {
            let n2 = side * side;
            image_metrics(
                &state.x[..n2],
                &prob.ground_truth.as_ref().unwrap()[..n2],
                side,
            )
        });
        rows.push(MetricRow { iter: k, time_s: elapsed, lagrangian_gap, feasibility, recon_error, image });

        if cfg.record_iterates {
            iterates.push(state.x.clone());
        }

        if prob.ground_truth.is_some() && recon_error < best_recon {
            best_recon = recon_error;
            best_iter = k;
            best_x = Some(state.x.clone());
        }
        if let StopRule::OracleReconMin { patience } = stop {
            if k - best_iter >= *patience {
                break;
            }
        }
    }

    let inv = if done > 0 { 1.0 / done as f64 } else { 1.0 };
    let averaged_x: Vec<f64> = if done > 0 {
        sum_x.iter().map(|v| v * inv).collect()
    } else {
        state.x.clone()
    };
    let averaged_u: Vec<f64> = if done > 0 {
        sum_u.iter().map(|v| v * inv).collect()
    } else {
        state.u.clone()
    };

    let last_recon = rows.last().map_or(f64::NAN, |r| r.recon_error);
    let stop_report = match stop {
        StopRule::MaxIter { .. } => StopReport { rule: "max-iter", iter: done, value: last_recon },
        StopRule::OracleReconMin { .. } => StopReport {
            rule: "oracle-recon-min",
            iter: best_iter,
            value: if best_x.is_some() { best_recon } else { f64::NAN },
        },
        StopRule::COverDelta { .. } => StopReport { rule: "c-over-delta", iter: done, value: last_recon },
    };

    Ok(RunRecord {
        rows,
        averaged_x,
        averaged_u,
        best_x,
        stop: stop_report,
        status,
        setup: RunSetup {
            sigma,
            gamma,
            alpha: chk.alpha,
            a_norm_est,
            e_euclid,
            e_metric,
            v0,
        },
        iterates,
        notes,
    })
}

/// A priori bounds at the running averages after `n` steps of the
/// primal-dual order.
#[derive(Debug, Clone, Copy)]
pub struct TheoremBound {
    pub lagrangian: f64,
    /// Bound on the squared feasibility `||A x_avg - b||^2`.
    pub feasibility_sq: f64,
}

/// Certificate for the primal-dual order with a primal activation operator
/// of metric error constant `e`.
pub fn theorem_bound_pda(
    n: usize,
    delta: f64,
    gamma: &DiagMetric,
    alpha: f64,
    e: f64,
    v0: f64,
) -> Result<TheoremBound> {
    if n == 0 {
        return Err(Error::InvalidConfig("certificate horizon must be at least 1".into()));
    }
    if alpha <= 0.0 {
        return Err(Error::InadmissibleStep { alpha });
    }
    let nf = n as f64;
    let gs = gamma.sqrt_norm();
    let gn = gamma.norm();
    let gi = gamma.inv_norm();
    let d2 = delta * delta;
    let lagrangian = v0 / nf
        + 2.0 * nf * gs * gs * d2 / alpha
        + delta * gs * (2.0 * v0 / alpha).sqrt()
        + delta * gs * (nf * e * d2 / alpha).sqrt()
        + e * d2 / 2.0;
    let feasibility_sq = 16.0 * nf * gn * gi * d2 / (alpha * alpha)
        + 8.0 * delta * gi * (2.0 * gn * v0 / (alpha * alpha * alpha)).sqrt()
        + 8.0 * d2 * gi * (gn * e * nf / (alpha * alpha * alpha)).sqrt()
        + 8.0 * gi * v0 / (nf * alpha)
        + 2.0 * d2
        + 4.0 * gi * e * d2 / alpha;
    Ok(TheoremBound { lagrangian, feasibility_sq })
}

/// Certificate for the dual-primal order; dual activation is nonexpansive
/// toward dual solutions, so no error constant appears.
pub fn theorem_bound_dpa(
    n: usize,
    delta: f64,
    gamma: &DiagMetric,
    alpha: f64,
    v0: f64,
) -> Result<TheoremBound> {
    if n == 0 {
        return Err(Error::InvalidConfig("certificate horizon must be at least 1".into()));
    }
    if alpha <= 0.0 {
        return Err(Error::InadmissibleStep { alpha });
    }
    let nf = n as f64;
    let gs = gamma.sqrt_norm();
    let gi = gamma.inv_norm();
    let d2 = delta * delta;
    let lagrangian = v0 / nf + 2.0 * gs * gs * nf * d2 + gs * delta * (2.0 * v0).sqrt();
    let feasibility_sq = 8.0 * gs * gs * gi * nf * d2 / alpha
        + 4.0 * gs * gi * delta * (2.0 * v0).sqrt() / alpha
        + 4.0 * gi * v0 / (nf * alpha)
        + 2.0 * d2;
    Ok(TheoremBound { lagrangian, feasibility_sq })
}

/// One entry of the Tikhonov regularization path.
#[derive(Debug, Clone)]
pub struct TikhonovEntry {
    pub lambda: f64,
    pub x: Vec<f64>,
    pub inner_iters: usize,
    pub recon_error: f64,
    pub feasibility: f64,
}

#[derive(Debug, Clone)]
pub struct TikhonovPath {
    pub entries: Vec<TikhonovEntry>,
    pub total_inner_iters: usize,
    pub time_s: f64,
    /// Index of the entry with the smallest reconstruction error, when a
    /// ground truth was available.
    pub best: Option<usize>,
}

/// Forward-backward solves of `min ||A x - b_delta||^2 / 2 + lambda ||x||_1`
/// over a 30-point grid descending from `lambda_max = ||A* b_delta||_inf`,
/// warm-started along the path.
pub fn fb_tikhonov_path(prob: &ProblemSpec, max_inner: usize, exit_tol: f64) -> Result<TikhonovPath> {
    if !matches!(prob.regularizer, Regularizer::L1) {
        return Err(Error::Unsupported("the Tikhonov baseline solves the l1 problem".into()));
    }
    let atb = prob.a.apply_adjoint(&prob.b_delta);
    let lam_max = atb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lam_max <= 0.0 {
        return Err(Error::Degenerate("A* b_delta is zero; the path collapses".into()));
    }
    let est = op_norm_est(&prob.a, RUN_NORM_TOL, RUN_NORM_MAX_ITER, NORM_SEED);
    if est.value <= 0.0 {
        return Err(Error::Degenerate("operator norm estimate is zero".into()));
    }
    let step = 1.0 / (est.value * est.value);

    let mut grid = Vec::with_capacity(30);
    for dec in 1..=6i32 {
        for l in 1..=5usize {
            grid.push((1.0 - (l - 1) as f64 / 5.0) * 10f64.powi(1 - dec) * lam_max);
        }
    }

    let b_ref = prob.exact_datum().unwrap_or_else(|| prob.b_delta.clone());
    let mut entries = Vec::with_capacity(grid.len());
    let mut total_inner = 0usize;
    let mut x = vec![0.0; prob.a.in_dim()];
    let t0 = Instant::now();
    for &lambda in &grid {
        let threshold = DiagMetric::scaled(x.len(), step * lambda)?;
        let mut iters = 0usize;
        for _ in 0..max_inner {
            let mut r = prob.a.apply(&x);
            for (ri, bi) in r.iter_mut().zip(&prob.b_delta) {
                *ri -= bi;
            }
            let g = prob.a.apply_adjoint(&r);
            let arg: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            let x_new = crate::proxops::prox_l1_diag(&arg, &threshold);
            iters += 1;
            let moved = norm(&sub(&x_new, &x));
            x = x_new;
            if moved <= exit_tol {
                break;
            }
        }
        total_inner += iters;
        let recon = match &prob.ground_truth {
            Some(g) => norm(&sub(&x, g)),
            None => f64::NAN,
        };
        let feas = norm(&sub(&prob.a.apply(&x), &b_ref));
        entries.push(TikhonovEntry { lambda, x: x.clone(), inner_iters: iters, recon_error: recon, feasibility: feas });
    }
    let time_s = t0.elapsed().as_secs_f64();

    let best = prob.ground_truth.as_ref().map(|_| {
        let mut bi = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.recon_error < entries[bi].recon_error {
                bi = i;
            }
        }
        bi
    });
    Ok(TikhonovPath { entries, total_inner_iters: total_inner, time_s, best })
}

/// Conjugate gradient on the normal system `(A A*) w = rhs`.
/// Returns the iterate and whether the relative residual reached `tol`.
fn cg_normal(
    a: &LinearMap,
    rhs: &[f64],
    init: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, bool) {
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return (vec![0.0; rhs.len()], true);
    }
    let mut w = match init {
        Some(v) => v.to_vec(),
        None => vec![0.0; rhs.len()],
    };
    let mut r = if init.is_some() {
        let aw = a.apply(&a.apply_adjoint(&w));
        sub(rhs, &aw)
    } else {
        rhs.to_vec()
    };
    let mut rs = norm_sq(&r);
    if rs.sqrt() <= tol * rhs_norm {
        return (w, true);
    }
    let mut p = r.clone();
    for _ in 0..max_iter {
        let ap = a.apply(&a.apply_adjoint(&p));
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            return (w, false);
        }
        let alpha = rs / denom;
        axpy(alpha, &p, &mut w);
        axpy(-alpha, &ap, &mut r);
        let rs_new = norm_sq(&r);
        if rs_new.sqrt() <= tol * rhs_norm {
            return (w, true);
        }
        let beta = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs = rs_new;
    }
    (w, false)
}

/// Projection of `z` onto the affine set `{x : A x = b_delta}` through the
/// normal system. Returns the projection and whether the inner solve
/// converged.
pub fn project_onto_affine(a: &LinearMap, b_delta: &[f64], z: &[f64], tol: f64) -> (Vec<f64>, bool) {
    let az = a.apply(z);
    let rhs = sub(b_delta, &az);
    let cap = 4 * b_delta.len() + 20;
    let (w, ok) = cg_normal(a, &rhs, None, tol, cap);
    let mut x = z.to_vec();
    axpy(1.0, &a.apply_adjoint(&w), &mut x);
    (x, ok)
}

/// Record of a baseline method that does not fit the activated iteration.
#[derive(Debug, Clone)]
pub struct BaselineRecord {
    pub rows: Vec<MetricRow>,
    pub best_x: Option<Vec<f64>>,
    pub stop: StopReport,
    pub notes: Vec<String>,
}

const DR_CG_TOL: f64 = 1e-10;

/// Douglas-Rachford on `min ||x||_1 : A x = b_delta` with unit prox step:
/// alternates the affine projection (by conjugate gradient, warm-started)
/// with soft thresholding of the reflection. Tracks the oracle stop when a
/// ground truth is available.
pub fn douglas_rachford(
    prob: &ProblemSpec,
    max_iter: usize,
    patience: usize,
    saddle: Option<&SaddlePoint>,
) -> Result<BaselineRecord> {
    if !matches!(prob.regularizer, Regularizer::L1) {
        return Err(Error::Unsupported("the Douglas-Rachford baseline solves the l1 problem".into()));
    }
    let p = prob.a.in_dim();
    let d = prob.a.out_dim();
    if prob.b_delta.len() != d {
        return Err(Error::Shape { what: "datum", expected: d, got: prob.b_delta.len() });
    }
    let b_ref = prob
        .exact_datum()
        .or_else(|| saddle.map(|z| prob.a.apply(&z.x)))
        .unwrap_or_else(|| prob.b_delta.clone());
    let threshold = DiagMetric::scaled(p, 1.0)?;
    let cg_cap = 4 * d + 20;

    let mut z = vec![0.0; p];
    let mut warm: Option<Vec<f64>> = None;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let mut cg_flagged = false;
    let mut best_x: Option<Vec<f64>> = None;
    let mut best_recon = f64::INFINITY;
    let mut best_iter = 0usize;
    let mut elapsed = 0.0f64;
    let mut done = 0usize;

    for k in 1..=max_iter {
        let t0 = Instant::now();
        let az = prob.a.apply(&z);
        let rhs = sub(&prob.b_delta, &az);
        let (w, ok) = cg_normal(&prob.a, &rhs, warm.as_deref(), DR_CG_TOL, cg_cap);
        let mut x = z.clone();
        axpy(1.0, &prob.a.apply_adjoint(&w), &mut x);
        warm = Some(w);
        if !ok && !cg_flagged {
            notes.push(format!("conjugate gradient missed tolerance {DR_CG_TOL:e} at iteration {k}"));
            cg_flagged = true;
        }
        let refl: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| 2.0 * xi - zi).collect();
        let y = crate::proxops::prox_l1_diag(&refl, &threshold);
        for ((zi, yi), xi) in z.iter_mut().zip(&y).zip(&x) {
            *zi += yi - xi;
        }
        elapsed += t0.elapsed().as_secs_f64();
        done = k;

        let recon = match &prob.ground_truth {
            Some(g) => norm(&sub(&x, g)),
            None => f64::NAN,
        };
        let feas = norm(&sub(&prob.a.apply(&x), &b_ref));
        rows.push(MetricRow {
            iter: k,
            time_s: elapsed,
            lagrangian_gap: f64::NAN,
            feasibility: feas,
            recon_error: recon,
            image: None,
        });

        if prob.ground_truth.is_some() && recon < best_recon {
            best_recon = recon;
            best_iter = k;
            best_x = Some(x.clone());
        }
        if prob.ground_truth.is_some() && k - best_iter >= patience {
            break;
        }
    }

    let stop = if best_x.is_some() {
        StopReport { rule: "oracle-recon-min", iter: best_iter, value: best_recon }
    } else {
        StopReport { rule: "max-iter", iter: done, value: f64::NAN }
    };
    Ok(BaselineRecord { rows, best_x, stop, notes })
}

/// Formats a float for the CSV outputs: full round-trip precision, `NaN`
/// spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes per-iteration metrics with a trailer comment naming the stop
/// decision. Image columns appear when any row carries image metrics.
pub fn write_metrics_csv(rows: &[MetricRow], stop: &StopReport, path: &std::path::Path) -> Result<()> {
    let image_cols = rows.iter().any(|r| r.image.is_some());
    let mut out = String::new();
    out.push_str("iter,time_s,lagrangian_gap,feasibility,recon_error");
    if image_cols {
        out.push_str(",mse,psnr,ssim");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.iter,
            fmt_f64(r.time_s),
            fmt_f64(r.lagrangian_gap),
            fmt_f64(r.feasibility),
            fmt_f64(r.recon_error)
        ));
        if image_cols {
            match &r.image {
                Some(m) => out.push_str(&format!(",{},{},{}", fmt_f64(m.mse), fmt_f64(m.psnr), fmt_f64(m.ssim))),
                None => out.push_str(",NaN,NaN,NaN"),
            }
        }
        out.push('\n');
    }
    out.push_str(&format!("# stop={},iter={},value={}\n", stop.rule, stop.iter, fmt_f64(stop.value)));
    std::fs::write(path, out)?;
    Ok(())
}

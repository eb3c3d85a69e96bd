//! Proximal maps and activation operators.
//!
//! An activation operator `T` reuses the measurements `(A, b_delta)` inside
//! the iteration: it must fix every solution of the exact problem and may
//! expand distances to them by at most `e * delta^2` per application, where
//! `e` is the operator's error constant. The family implemented here covers
//! serial and parallel row projections, (adaptive) Landweber steps on the
//! primal side, and slab projections onto the dual feasible set
//! `{u : |<A_i, u>| <= 1}` on the dual side.

use crate::linops::{op_norm_est, DiagMetric, LinearMap, NORM_MAX_ITER, NORM_SEED, NORM_TOL};
use crate::num::{axpy, dot, norm, norm_sq};
use crate::{Error, Result};

/// Tolerance used when evaluating box indicators on averaged iterates;
/// absorbs round-off from running means of clamped values.
const BOX_EVAL_TOL: f64 = 1e-9;

/// The objective `J` of the constrained problem `min J(x) : A x = b`.
#[derive(Debug, Clone)]
pub enum Regularizer {
    /// `J(x) = ||x||_1`.
    L1,
    /// `J(u, v) = sum_i ||v_i||_2 + indicator_{[0,1]}(u)` on stacked
    /// `(image, gradient field)` vectors: `u` has `side^2` entries, `v` has
    /// `2 side^2` entries in per-pixel pairs.
    GroupL12PlusBox { side: usize },
    /// `J = 0` (prox is the identity).
    Zero,
}

impl Regularizer {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::L1 => x.iter().map(|v| v.abs()).sum(),
            Regularizer::GroupL12PlusBox { side } => {
                let n2 = side * side;
                let (u, v) = x.split_at(n2);
                if u.iter().any(|&t| t < -BOX_EVAL_TOL || t > 1.0 + BOX_EVAL_TOL) {
                    return f64::INFINITY;
                }
                v.chunks_exact(2).map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).sum()
            }
            Regularizer::Zero => 0.0,
        }
    }

    /// `prox_J` in the metric `Sigma^{-1}`: the minimizer of
    /// `J(p) + ||p - v||^2_{Sigma^{-1}} / 2`.
    pub fn prox(&self, v: &[f64], sigma: &DiagMetric) -> Vec<f64> {
        debug_assert_eq!(v.len(), sigma.dim());
        match self {
            Regularizer::L1 => prox_l1_diag(v, sigma),
            Regularizer::GroupL12PlusBox { side } => {
                let n2 = side * side;
                let mut out = Vec::with_capacity(v.len());
                out.extend(v[..n2].iter().map(|t| t.clamp(0.0, 1.0)));
                for t in 0..n2 {
                    let base = n2 + 2 * t;
                    // The two components of one pixel share a step size.
                    let s = sigma.entry(base);
                    debug_assert!((sigma.entry(base + 1) - s).abs() <= 1e-12 * s.abs());
                    let (a, b) = group_shrink(v[base], v[base + 1], s);
                    out.push(a);
                    out.push(b);
                }
                out
            }
            Regularizer::Zero => v.to_vec(),
        }
    }
}

/// Soft threshold with per-coordinate thresholds `sigma_i`:
/// `sign(v_i) * max(|v_i| - sigma_i, 0)`.
pub fn prox_l1_diag(v: &[f64], sigma: &DiagMetric) -> Vec<f64> {
    debug_assert_eq!(v.len(), sigma.dim());
    v.iter()
        .enumerate()
        .map(|(i, &t)| {
            let s = sigma.entry(i);
            if t > s {
                t - s
            } else if t < -s {
                t + s
            } else {
                0.0
            }
        })
        .collect()
}

fn group_shrink(a: f64, b: f64, sigma: f64) -> (f64, f64) {
    let n = (a * a + b * b).sqrt();
    let factor = 1.0 - sigma / sigma.max(n);
    (factor * a, factor * b)
}

/// Blockwise shrinkage for the group l1-l2 norm on consecutive pairs:
/// `v_i * (1 - sigma / max(sigma, ||v_i||))`. Errors on odd length.
pub fn prox_group_l12(v: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if v.len() % 2 != 0 {
        return Err(Error::Shape { what: "group prox input", expected: v.len() + 1, got: v.len() });
    }
    let mut out = Vec::with_capacity(v.len());
    for p in v.chunks_exact(2) {
        let (a, b) = group_shrink(p[0], p[1], sigma);
        out.push(a);
        out.push(b);
    }
    Ok(out)
}

/// Componentwise projection onto `[0, 1]`.
pub fn project_box01(v: &[f64]) -> Vec<f64> {
    v.iter().map(|t| t.clamp(0.0, 1.0)).collect()
}

/// Projection of `x` onto the hyperplane `{z : <a, z> = b}`.
pub fn row_project(x: &[f64], a: &[f64], b: f64) -> Result<Vec<f64>> {
    let ns = norm_sq(a);
    if ns == 0.0 {
        return Err(Error::Degenerate("row projection onto a zero row".into()));
    }
    let mut out = x.to_vec();
    axpy((b - dot(a, x)) / ns, a, &mut out);
    Ok(out)
}

/// An activation operator. Row-indexed kinds require a dense operator; the
/// Landweber kinds are matrix-free. `DualSlabs` acts on the dual variable,
/// everything else on the primal.
#[derive(Debug, Clone)]
pub enum Activator {
    Identity,
    /// Composition of hyperplane projections onto the listed rows of
    /// `A x = b_delta`, applied in order.
    SerialRows { rows: Vec<usize> },
    /// Convex combination of single-row projections: `weights` must lie in
    /// the simplex.
    ParallelRows { rows: Vec<usize>, weights: Vec<f64> },
    /// `z - step * A*(A z - b_delta)`; admissible for
    /// `step in (0, 2 / ||A||^2)`.
    Landweber { step: f64 },
    /// Landweber with the exact steepest-descent step
    /// `||A z - b_delta||^2 / ||A*(A z - b_delta)||^2`, capped at `cap`.
    /// `a_norm` (an estimate of `||A||`) scales the degeneracy guard that
    /// short-circuits to the identity near stationarity.
    AdaptiveLandweber { cap: f64, a_norm: f64 },
    /// Serial projections of the dual variable onto the slabs
    /// `{u : |<A_i, u>| <= 1}` for the listed columns.
    DualSlabs { cols: Vec<usize> },
}

impl Activator {
    /// Serial projections onto all rows, in natural order.
    pub fn serial_all(a: &LinearMap) -> Self {
        Activator::SerialRows { rows: (0..a.out_dim()).collect() }
    }

    /// Parallel projections onto all rows with Frobenius weights
    /// `||a_j||^2 / ||A||_F^2`.
    pub fn parallel_frobenius(a: &LinearMap) -> Result<Self> {
        let m = a
            .as_dense()
            .ok_or_else(|| Error::Unsupported("row projections need a dense operator".into()))?;
        let total: f64 = (0..m.rows()).map(|j| m.row_norm_sq(j)).sum();
        if total == 0.0 {
            return Err(Error::Degenerate("cannot weight rows of a zero matrix".into()));
        }
        let weights = (0..m.rows()).map(|j| m.row_norm_sq(j) / total).collect();
        Ok(Activator::ParallelRows { rows: (0..m.rows()).collect(), weights })
    }

    /// Slab projections for all columns, in natural order.
    pub fn dual_slabs_all(a: &LinearMap) -> Self {
        Activator::DualSlabs { cols: (0..a.in_dim()).collect() }
    }

    /// True if the operator acts on the dual variable.
    pub fn is_dual(&self) -> bool {
        matches!(self, Activator::DualSlabs { .. })
    }

    /// Reorders projection indices in place; called once per iteration when
    /// a solver runs with shuffling. Kinds without an order are untouched
    /// (the parallel combination is order-independent).
    pub fn shuffle_indices(&mut self, r: &mut rand_chacha::ChaCha8Rng) {
        match self {
            Activator::SerialRows { rows } => crate::rng::shuffle(r, rows),
            Activator::DualSlabs { cols } => crate::rng::shuffle(r, cols),
            _ => {}
        }
    }

    /// Validates indices, weights, and step parameters against `a`.
    pub fn validate(&self, a: &LinearMap) -> Result<()> {
        let need_dense = |what: &str| -> Result<()> {
            if a.as_dense().is_none() {
                return Err(Error::Unsupported(format!("{what} need a dense operator")));
            }
            Ok(())
        };
        match self {
            Activator::Identity => Ok(()),
            Activator::SerialRows { rows } => {
                need_dense("row projections")?;
                if let Some(&j) = rows.iter().find(|&&j| j >= a.out_dim()) {
                    return Err(Error::Shape { what: "row index", expected: a.out_dim(), got: j });
                }
                Ok(())
            }
            Activator::ParallelRows { rows, weights } => {
                need_dense("row projections")?;
                if rows.len() != weights.len() {
                    return Err(Error::Shape {
                        what: "projection weights",
                        expected: rows.len(),
                        got: weights.len(),
                    });
                }
                if let Some(&j) = rows.iter().find(|&&j| j >= a.out_dim()) {
                    return Err(Error::Shape { what: "row index", expected: a.out_dim(), got: j });
                }
                if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
                    return Err(Error::InvalidConfig("projection weights must lie in [0, 1]".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!(
                        "projection weights must sum to 1, got {total}"
                    )));
                }
                Ok(())
            }
            Activator::Landweber { step } => {
                if !(step.is_finite() && *step > 0.0) {
                    return Err(Error::InvalidConfig(format!("Landweber step {step} must be positive")));
                }
                Ok(())
            }
            Activator::AdaptiveLandweber { cap, a_norm } => {
                if !(cap.is_finite() && *cap > 0.0) {
                    return Err(Error::InvalidConfig(format!("step cap {cap} must be positive")));
                }
                if !(a_norm.is_finite() && *a_norm >= 0.0) {
                    return Err(Error::InvalidConfig(format!("norm estimate {a_norm} must be >= 0")));
                }
                Ok(())
            }
            Activator::DualSlabs { cols } => {
                need_dense("dual slab projections")?;
                if let Some(&i) = cols.iter().find(|&&i| i >= a.in_dim()) {
                    return Err(Error::Shape { what: "column index", expected: a.in_dim(), got: i });
                }
                Ok(())
            }
        }
    }
}

/// Applies the activation operator at `z`, reusing the data `(a, b_delta)`.
pub fn apply_activator(t: &Activator, z: &[f64], a: &LinearMap, b_delta: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(b_delta.len(), a.out_dim());
    match t {
        Activator::Identity => Ok(z.to_vec()),
        Activator::SerialRows { rows } => {
            let m = a
                .as_dense()
                .ok_or_else(|| Error::Unsupported("row projections need a dense operator".into()))?;
            let mut out = z.to_vec();
            for &j in rows {
                let row = m.row(j);
                let ns = norm_sq(row);
                if ns == 0.0 {
                    return Err(Error::Degenerate(format!("row {j} has zero norm")));
                }
                let resid = b_delta[j] - dot(row, &out);
                axpy(resid / ns, row, &mut out);
            }
            Ok(out)
        }
        Activator::ParallelRows { rows, weights } => {
            let m = a
                .as_dense()
                .ok_or_else(|| Error::Unsupported("row projections need a dense operator".into()))?;
            // Convex combination of single-row projections of the same
            // point, accumulated as one correction.
            let mut out = z.to_vec();
            for (&j, &w) in rows.iter().zip(weights) {
                let row = m.row(j);
                let ns = norm_sq(row);
                if ns == 0.0 {
                    return Err(Error::Degenerate(format!("row {j} has zero norm")));
                }
                let resid = b_delta[j] - dot(row, z);
                axpy(w * resid / ns, row, &mut out);
            }
            Ok(out)
        }
        Activator::Landweber { step } => {
            let mut r = a.apply(z);
            for (ri, bi) in r.iter_mut().zip(b_delta) {
                *ri -= bi;
            }
            let g = a.apply_adjoint(&r);
            let mut out = z.to_vec();
            axpy(-step, &g, &mut out);
            Ok(out)
        }
        Activator::AdaptiveLandweber { cap, a_norm } => {
            let mut r = a.apply(z);
            for (ri, bi) in r.iter_mut().zip(b_delta) {
                *ri -= bi;
            }
            let g = a.apply_adjoint(&r);
            let gn = norm(&g);
            if gn <= 1e-14 * (a_norm * norm(z) + norm(b_delta)) {
                return Ok(z.to_vec());
            }
            let step = (norm_sq(&r) / (gn * gn)).min(*cap);
            let mut out = z.to_vec();
            axpy(-step, &g, &mut out);
            Ok(out)
        }
        Activator::DualSlabs { cols } => {
            let m = a
                .as_dense()
                .ok_or_else(|| Error::Unsupported("dual slab projections need a dense operator".into()))?;
            let mut u = z.to_vec();
            for &i in cols {
                let t = m.col_dot(i, &u);
                if t.abs() > 1.0 {
                    let ns = m.col_norm_sq(i);
                    // |t| > 1 forces a nonzero column.
                    m.col_axpy(i, -(t - t.signum()) / ns, &mut u);
                }
            }
            Ok(u)
        }
    }
}

/// The Euclidean error constant `e` of the activation operator:
/// `||T x - xbar||^2 <= ||x - xbar||^2 + e * delta^2` for every solution
/// `xbar` of the exact problem.
pub fn error_constant(t: &Activator, a: &LinearMap) -> Result<f64> {
    match t {
        Activator::Identity | Activator::DualSlabs { .. } => Ok(0.0),
        Activator::SerialRows { rows } => {
            let m = a
                .as_dense()
                .ok_or_else(|| Error::Unsupported("row projections need a dense operator".into()))?;
            let mut e = 0.0;
            for &j in rows {
                let ns = m.row_norm_sq(j);
                if ns == 0.0 {
                    return Err(Error::Degenerate(format!("row {j} has zero norm")));
                }
                e += 1.0 / ns;
            }
            Ok(e)
        }
        Activator::ParallelRows { rows, weights } => {
            let m = a
                .as_dense()
                .ok_or_else(|| Error::Unsupported("row projections need a dense operator".into()))?;
            let mut e = 0.0;
            for (&j, &w) in rows.iter().zip(weights) {
                let ns = m.row_norm_sq(j);
                if ns == 0.0 {
                    return Err(Error::Degenerate(format!("row {j} has zero norm")));
                }
                e += w / ns;
            }
            Ok(e)
        }
        Activator::Landweber { step } => {
            let nrm = op_norm_est(a, NORM_TOL, NORM_MAX_ITER, NORM_SEED).value;
            let limit = 2.0 / (nrm * nrm);
            if !(step.is_finite() && *step > 0.0 && *step < limit) {
                return Err(Error::InvalidConfig(format!(
                    "Landweber step {step} outside (0, {limit:.6e})"
                )));
            }
            Ok(step / (2.0 - step * nrm * nrm))
        }
        Activator::AdaptiveLandweber { cap, .. } => Ok(*cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::DenseMatrix;
    use crate::rng;

    fn diag(v: &[f64]) -> DiagMetric {
        DiagMetric::diag(v.to_vec()).unwrap()
    }

    #[test]
    fn soft_threshold_example() {
        let out = prox_l1_diag(&[3.0, -3.0], &diag(&[0.5, 2.0]));
        assert_eq!(out, vec![2.5, -1.0]);
        let out = prox_l1_diag(&[0.3, -0.4], &diag(&[0.5, 0.5]));
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn soft_threshold_satisfies_optimality() {
        let mut r = rng::stream(42, rng::STREAM_MISC);
        let mut v = vec![0.0; 40];
        rng::fill_standard_normal(&mut r, &mut v);
        let entries: Vec<f64> = (0..40).map(|_| 0.05 + rng::uniform(&mut r)).collect();
        let sigma = diag(&entries);
        let p = prox_l1_diag(&v, &sigma);
        for i in 0..v.len() {
            if p[i] != 0.0 {
                // 0 = sigma_i * sign(p_i) + (p_i - v_i)
                let resid = entries[i] * p[i].signum() + p[i] - v[i];
                assert!(resid.abs() < 1e-12, "coordinate {i}: residual {resid}");
            } else {
                assert!(v[i].abs() <= entries[i] + 1e-12);
            }
        }
    }

    #[test]
    fn group_shrink_examples() {
        let out = prox_group_l12(&[3.0, 4.0], 1.0).unwrap();
        assert!((out[0] - 2.4).abs() < 1e-15);
        assert!((out[1] - 3.2).abs() < 1e-15);
        // Inside the ball: annihilated.
        let out = prox_group_l12(&[0.3, 0.4], 1.0).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        // Zero block stays zero, no division trouble.
        let out = prox_group_l12(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        assert!(prox_group_l12(&[1.0, 2.0, 3.0], 1.0).is_err());
    }

    #[test]
    fn proxes_are_nonexpansive_in_their_metric() {
        let mut r = rng::stream(43, rng::STREAM_MISC);
        let entries: Vec<f64> = (0..30).map(|_| 0.1 + rng::uniform(&mut r)).collect();
        let sigma = diag(&entries);
        for _ in 0..50 {
            let mut v1 = vec![0.0; 30];
            let mut v2 = vec![0.0; 30];
            rng::fill_standard_normal(&mut r, &mut v1);
            rng::fill_standard_normal(&mut r, &mut v2);
            let (p1, p2) = (prox_l1_diag(&v1, &sigma), prox_l1_diag(&v2, &sigma));
            let dp = sigma.inv_weighted_norm_sq(&crate::num::sub(&p1, &p2));
            let dv = sigma.inv_weighted_norm_sq(&crate::num::sub(&v1, &v2));
            assert!(dp <= dv * (1.0 + 1e-12));
        }
        // Group + box prox on a stacked vector, scaled metric.
        let reg = Regularizer::GroupL12PlusBox { side: 2 };
        let sigma = DiagMetric::scaled(12, 0.7).unwrap();
        for _ in 0..50 {
            let mut v1 = vec![0.0; 12];
            let mut v2 = vec![0.0; 12];
            rng::fill_standard_normal(&mut r, &mut v1);
            rng::fill_standard_normal(&mut r, &mut v2);
            let (p1, p2) = (reg.prox(&v1, &sigma), reg.prox(&v2, &sigma));
            let dp = sigma.inv_weighted_norm_sq(&crate::num::sub(&p1, &p2));
            let dv = sigma.inv_weighted_norm_sq(&crate::num::sub(&v1, &v2));
            assert!(dp <= dv * (1.0 + 1e-12));
        }
    }

    #[test]
    fn stacked_prox_decomposes_blockwise() {
        let mut r = rng::stream(44, rng::STREAM_MISC);
        let side = 3;
        let n2 = side * side;
        let reg = Regularizer::GroupL12PlusBox { side };
        let sigma = DiagMetric::scaled(3 * n2, 0.8).unwrap();
        let mut v = vec![0.0; 3 * n2];
        rng::fill_standard_normal(&mut r, &mut v);
        let out = reg.prox(&v, &sigma);
        let box_part = project_box01(&v[..n2]);
        let group_part = prox_group_l12(&v[n2..], 0.8).unwrap();
        for (a, b) in out[..n2].iter().zip(&box_part) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in out[n2..].iter().zip(&group_part) {
            assert!((a - b).abs() < 1e-15);
        }
        // Box indicator: feasible evaluates to the group norm, infeasible
        // to infinity.
        assert!(reg.eval(&out).is_finite());
        let mut bad = out.clone();
        bad[0] = 1.5;
        assert!(reg.eval(&bad).is_infinite());
    }

    #[test]
    fn row_projection_example() {
        let out = row_project(&[0.0, 0.0], &[1.0, 1.0], 2.0).unwrap();
        assert_eq!(out, vec![1.0, 1.0]);
        // Idempotent on the hyperplane.
        let again = row_project(&out, &[1.0, 1.0], 2.0).unwrap();
        assert_eq!(again, out);
        assert!(row_project(&[1.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn landweber_examples() {
        let a = LinearMap::ScaledIdentity { dim: 2, scale: 1.0 };
        let t = Activator::Landweber { step: 1.0 };
        let out = apply_activator(&t, &[2.0, 2.0], &a, &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);

        // Adaptive step on 2*Id solves in one application.
        let a2 = LinearMap::ScaledIdentity { dim: 2, scale: 2.0 };
        let t = Activator::AdaptiveLandweber { cap: 1e6, a_norm: 2.0 };
        let out = apply_activator(&t, &[3.0, -1.0], &a2, &[0.0, 0.0]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-14));

        // Cap engages: ratio would be 1/4, cap at 0.1 leaves 0.6 z.
        let t = Activator::AdaptiveLandweber { cap: 0.1, a_norm: 2.0 };
        let out = apply_activator(&t, &[1.0, 1.0], &a2, &[0.0, 0.0]).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.6).abs() < 1e-15);

        // Stationary point short-circuits to the identity.
        let t = Activator::AdaptiveLandweber { cap: 1e6, a_norm: 2.0 };
        let z = [0.5, -0.25];
        let b: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let out = apply_activator(&t, &z, &a2, &b).unwrap();
        assert_eq!(out, z.to_vec());
    }

    #[test]
    fn dual_slab_examples() {
        // Column (1, 0): t = 3 pulls back to the slab boundary.
        let m = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let a = LinearMap::dense(m);
        let t = Activator::DualSlabs { cols: vec![0] };
        let out = apply_activator(&t, &[3.0, 4.0], &a, &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0, 4.0]);
        // Inside the slab: untouched (including the zero column).
        let t = Activator::DualSlabs { cols: vec![0, 1] };
        let out = apply_activator(&t, &[0.5, -7.0], &a, &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.5, -7.0]);
    }

    #[test]
    fn serial_projection_lands_on_last_row() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let a = LinearMap::dense(m);
        let t = Activator::SerialRows { rows: vec![0, 1] };
        let out = apply_activator(&t, &[5.0, -2.0], &a, &[1.0, 2.0]).unwrap();
        // After the second projection the last constraint holds exactly.
        assert!((out[0] + out[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn parallel_frobenius_matches_landweber() {
        let mut r = rng::stream(45, rng::STREAM_MISC);
        let mut data = vec![0.0; 12];
        rng::fill_standard_normal(&mut r, &mut data);
        let a = LinearMap::dense(DenseMatrix::new(4, 3, data).unwrap());
        let fro = crate::linops::frobenius_norm_sq(&a).unwrap();
        let par = Activator::parallel_frobenius(&a).unwrap();
        let lw = Activator::Landweber { step: 1.0 / fro };
        let b = vec![0.3, -0.2, 0.9, 0.1];
        for _ in 0..20 {
            let mut z = vec![0.0; 3];
            rng::fill_standard_normal(&mut r, &mut z);
            let zp = apply_activator(&par, &z, &a, &b).unwrap();
            let zl = apply_activator(&lw, &z, &a, &b).unwrap();
            for (p, l) in zp.iter().zip(&zl) {
                assert!((p - l).abs() <= 1e-12, "{p} vs {l}");
            }
        }
    }

    #[test]
    fn error_constants() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let a = LinearMap::dense(m);
        // Serial over both rows: 1/1 + 1/4.
        let e = error_constant(&Activator::serial_all(&a), &a).unwrap();
        assert!((e - 1.25).abs() < 1e-15);
        // Identity and dual projections are exact.
        assert_eq!(error_constant(&Activator::Identity, &a).unwrap(), 0.0);
        assert_eq!(error_constant(&Activator::dual_slabs_all(&a), &a).unwrap(), 0.0);
        // Landweber on the identity with unit step: 1 / (2 - 1).
        let id = LinearMap::ScaledIdentity { dim: 3, scale: 1.0 };
        let e = error_constant(&Activator::Landweber { step: 1.0 }, &id).unwrap();
        assert!((e - 1.0).abs() < 1e-9);
        // Step at or beyond 2/||A||^2 is rejected.
        assert!(error_constant(&Activator::Landweber { step: 2.0 }, &id).is_err());
        assert!(error_constant(&Activator::Landweber { step: -0.1 }, &id).is_err());
        // Adaptive cap is its own constant.
        let e = error_constant(&Activator::AdaptiveLandweber { cap: 1e6, a_norm: 1.0 }, &id).unwrap();
        assert_eq!(e, 1e6);
        // Parallel with Frobenius weights: sum_j w_j / ||a_j||^2 = rows / fro.
        let m = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let a = LinearMap::dense(m);
        let e = error_constant(&Activator::parallel_frobenius(&a).unwrap(), &a).unwrap();
        assert!((e - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn weight_validation() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let a = LinearMap::dense(m);
        let bad_sum = Activator::ParallelRows { rows: vec![0, 1], weights: vec![0.5, 0.4] };
        assert!(bad_sum.validate(&a).is_err());
        let negative = Activator::ParallelRows { rows: vec![0, 1], weights: vec![1.5, -0.5] };
        assert!(negative.validate(&a).is_err());
        let out_of_range = Activator::SerialRows { rows: vec![7] };
        assert!(out_of_range.validate(&a).is_err());
        let ok = Activator::ParallelRows { rows: vec![0, 1], weights: vec![0.5, 0.5] };
        assert!(ok.validate(&a).is_ok());
        // Structured operators cannot serve row projections.
        assert!(Activator::SerialRows { rows: vec![0] }
            .validate(&LinearMap::Grad { side: 2 })
            .is_err());
    }

    #[test]
    fn activation_respects_exact_solutions() {
        // A3 smoke test: ||T z - xbar||^2 <= ||z - xbar||^2 + e delta^2 for
        // a consistent xbar and noisy data.
        let mut r = rng::stream(46, rng::STREAM_MISC);
        let mut data = vec![0.0; 24];
        rng::fill_standard_normal(&mut r, &mut data);
        let a = LinearMap::dense(DenseMatrix::new(4, 6, data).unwrap());
        let mut xbar = vec![0.0; 6];
        rng::fill_standard_normal(&mut r, &mut xbar);
        let b = a.apply(&xbar);
        let noise: Vec<f64> = (0..4).map(|_| rng::uniform_in(&mut r, -0.1, 0.1)).collect();
        let b_delta: Vec<f64> = b.iter().zip(&noise).map(|(x, n)| x + n).collect();
        let delta = norm(&noise);
        let a_norm = op_norm_est(&a, 1e-12, 500, 3).value;

        let activators = [
            Activator::serial_all(&a),
            Activator::parallel_frobenius(&a).unwrap(),
            Activator::Landweber { step: 1.0 / (a_norm * a_norm) },
            Activator::AdaptiveLandweber { cap: 1e6, a_norm },
        ];
        for t in &activators {
            let e = error_constant(t, &a).unwrap();
            for _ in 0..20 {
                let mut z = vec![0.0; 6];
                rng::fill_standard_normal(&mut r, &mut z);
                let tz = apply_activator(t, &z, &a, &b_delta).unwrap();
                let lhs = norm_sq(&crate::num::sub(&tz, &xbar));
                let rhs = norm_sq(&crate::num::sub(&z, &xbar)) + e * delta * delta;
                assert!(lhs <= rhs + 1e-9, "{t:?}: {lhs} > {rhs}");
            }
        }
    }
}

//! Linear operators and diagonal metrics.
//!
//! All solver-facing operators are [`LinearMap`]s: either an explicit dense
//! matrix or a matrix-free stencil (box blur, discrete gradient, the 2x2
//! block operator used for total-variation restoration, a scaled identity).
//! Each kind supplies `apply`, `apply_adjoint`, and entrywise-absolute row
//! and column sums, which is everything the solvers, preconditioners, and
//! norm estimators need.

use crate::num::{dot, norm, norm_sq};
use crate::{imaging, rng, Error, Result};
use std::path::Path;

/// Default relative tolerance for power-iteration norm estimates.
pub const NORM_TOL: f64 = 1e-10;
/// Default iteration cap for power-iteration norm estimates.
pub const NORM_MAX_ITER: usize = 200;
/// Fixed seed for norm estimates that are not part of a seeded experiment.
pub const NORM_SEED: u64 = 0x5eed;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape { what: "dense matrix data", expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        norm_sq(self.row(i))
    }

    pub fn col_norm_sq(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j) * self.get(i, j)).sum()
    }

    /// `<column_j, u>` for `u` of length `rows`.
    pub fn col_dot(&self, j: usize, u: &[f64]) -> f64 {
        (0..self.rows).map(|i| self.get(i, j) * u[i]).sum()
    }

    /// `u += alpha * column_j`.
    pub fn col_axpy(&self, j: usize, alpha: f64, u: &mut [f64]) {
        for i in 0..self.rows {
            u[i] += alpha * self.get(i, j);
        }
    }

    /// Divides every column by its Euclidean norm. Errors on a zero column.
    pub fn normalize_columns(&mut self) -> Result<()> {
        for j in 0..self.cols {
            let n = self.col_norm_sq(j).sqrt();
            if n == 0.0 {
                return Err(Error::Degenerate(format!("column {j} has zero norm")));
            }
            for i in 0..self.rows {
                self.data[i * self.cols + j] /= n;
            }
        }
        Ok(())
    }

    /// Parses the plain text format: first two tokens are `rows cols`,
    /// followed by exactly `rows * cols` decimals in row-major order.
    pub fn parse_text(s: &str) -> Result<Self> {
        let mut toks = s.split_whitespace();
        let rows: usize = toks
            .next()
            .ok_or_else(|| Error::Parse("matrix text is empty".into()))?
            .parse()
            .map_err(|_| Error::Parse("matrix text: bad row count".into()))?;
        let cols: usize = toks
            .next()
            .ok_or_else(|| Error::Parse("matrix text: missing column count".into()))?
            .parse()
            .map_err(|_| Error::Parse("matrix text: bad column count".into()))?;
        let mut data = Vec::with_capacity(rows * cols);
        for k in 0..rows * cols {
            let tok = toks.next().ok_or_else(|| {
                Error::Parse(format!("matrix text: expected {} entries, found {k}", rows * cols))
            })?;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("matrix text: entry {k} is not a number: {tok:?}")))?;
            data.push(v);
        }
        if toks.next().is_some() {
            return Err(Error::Parse(format!(
                "matrix text: trailing tokens after {} entries",
                rows * cols
            )));
        }
        DenseMatrix::new(rows, cols, data)
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:.17e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// A linear operator with an adjoint.
///
/// Structured kinds are matrix-free; only `Dense` exposes rows and columns,
/// which the row-projection and dual-slab activators require.
#[derive(Debug, Clone)]
pub enum LinearMap {
    Dense(DenseMatrix),
    ScaledIdentity { dim: usize, scale: f64 },
    /// Discrete gradient on an `side x side` image: `R^{N^2} -> R^{2 N^2}`,
    /// forward differences with zero boundary rows, output interleaved as
    /// (horizontal, vertical) per pixel.
    Grad { side: usize },
    /// Normalized box blur with window `(2 radius + 1)^2` and zero padding;
    /// self-adjoint.
    Blur { side: usize, radius: usize },
    /// The restoration block operator `[[K, 0], [D, -I]]` acting on stacked
    /// `(image, gradient field)` vectors of length `3 N^2`.
    TvBlock { side: usize, radius: usize },
}

impl LinearMap {
    pub fn dense(m: DenseMatrix) -> Self {
        LinearMap::Dense(m)
    }

    pub fn in_dim(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.cols(),
            LinearMap::ScaledIdentity { dim, .. } => *dim,
            LinearMap::Grad { side } => side * side,
            LinearMap::Blur { side, .. } => side * side,
            LinearMap::TvBlock { side, .. } => 3 * side * side,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.rows(),
            LinearMap::ScaledIdentity { dim, .. } => *dim,
            LinearMap::Grad { side } => 2 * side * side,
            LinearMap::Blur { side, .. } => side * side,
            LinearMap::TvBlock { side, .. } => 3 * side * side,
        }
    }

    pub fn as_dense(&self) -> Option<&DenseMatrix> {
        match self {
            LinearMap::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// `A x`. Panics if `x.len() != in_dim()`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim(), "apply: input length mismatch");
        match self {
            LinearMap::Dense(m) => (0..m.rows()).map(|i| dot(m.row(i), x)).collect(),
            LinearMap::ScaledIdentity { scale, .. } => x.iter().map(|v| scale * v).collect(),
            LinearMap::Grad { side } => imaging::grad(x, *side),
            LinearMap::Blur { side, radius } => imaging::blur(x, *side, *radius),
            LinearMap::TvBlock { side, radius } => {
                let n2 = side * side;
                let (u, v) = x.split_at(n2);
                let mut out = imaging::blur(u, *side, *radius);
                let mut lower = imaging::grad(u, *side);
                for (l, vi) in lower.iter_mut().zip(v) {
                    *l -= vi;
                }
                out.extend_from_slice(&lower);
                out
            }
        }
    }

    /// `A* y`. Panics if `y.len() != out_dim()`.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.out_dim(), "apply_adjoint: input length mismatch");
        match self {
            LinearMap::Dense(m) => {
                let mut out = vec![0.0; m.cols()];
                for i in 0..m.rows() {
                    crate::num::axpy(y[i], m.row(i), &mut out);
                }
                out
            }
            LinearMap::ScaledIdentity { scale, .. } => y.iter().map(|v| scale * v).collect(),
            LinearMap::Grad { side } => imaging::grad_adjoint(y, *side),
            LinearMap::Blur { side, radius } => imaging::blur(y, *side, *radius),
            LinearMap::TvBlock { side, radius } => {
                let n2 = side * side;
                let (w, z) = y.split_at(n2);
                let mut upper = imaging::blur(w, *side, *radius);
                let dz = imaging::grad_adjoint(z, *side);
                for (u, d) in upper.iter_mut().zip(&dz) {
                    *u += d;
                }
                let mut out = upper;
                out.extend(z.iter().map(|v| -v));
                out
            }
        }
    }

    /// `|A| x` entrywise-absolute action, used for row/column sums.
    fn abs_apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LinearMap::Dense(m) => {
                (0..m.rows()).map(|i| m.row(i).iter().zip(x).map(|(a, v)| a.abs() * v).sum()).collect()
            }
            LinearMap::ScaledIdentity { scale, .. } => x.iter().map(|v| scale.abs() * v).collect(),
            LinearMap::Grad { side } => imaging::grad_abs(x, *side),
            LinearMap::Blur { side, radius } => imaging::blur(x, *side, *radius),
            LinearMap::TvBlock { side, radius } => {
                let n2 = side * side;
                let (u, v) = x.split_at(n2);
                let mut out = imaging::blur(u, *side, *radius);
                let mut lower = imaging::grad_abs(u, *side);
                for (l, vi) in lower.iter_mut().zip(v) {
                    *l += vi;
                }
                out.extend_from_slice(&lower);
                out
            }
        }
    }

    fn abs_apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        match self {
            LinearMap::Dense(m) => {
                let mut out = vec![0.0; m.cols()];
                for i in 0..m.rows() {
                    for (o, a) in out.iter_mut().zip(m.row(i)) {
                        *o += a.abs() * y[i];
                    }
                }
                out
            }
            LinearMap::ScaledIdentity { scale, .. } => y.iter().map(|v| scale.abs() * v).collect(),
            LinearMap::Grad { side } => imaging::grad_abs_adjoint(y, *side),
            LinearMap::Blur { side, radius } => imaging::blur(y, *side, *radius),
            LinearMap::TvBlock { side, radius } => {
                let n2 = side * side;
                let (w, z) = y.split_at(n2);
                let mut upper = imaging::blur(w, *side, *radius);
                let dz = imaging::grad_abs_adjoint(z, *side);
                for (u, d) in upper.iter_mut().zip(&dz) {
                    *u += d;
                }
                let mut out = upper;
                out.extend_from_slice(z);
                out
            }
        }
    }

    /// Row sums of `|A|`.
    pub fn abs_row_sums(&self) -> Vec<f64> {
        self.abs_apply(&vec![1.0; self.in_dim()])
    }

    /// Column sums of `|A|`.
    pub fn abs_col_sums(&self) -> Vec<f64> {
        self.abs_apply_adjoint(&vec![1.0; self.out_dim()])
    }

    /// Materializes the operator column by column. Intended for small
    /// problems, tests, and debugging.
    pub fn to_dense(&self) -> DenseMatrix {
        let (m, n) = (self.out_dim(), self.in_dim());
        let mut out = DenseMatrix::zeros(m, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            for i in 0..m {
                out.set(i, j, col[i]);
            }
            e[j] = 0.0;
        }
        out
    }
}

/// Squared Frobenius norm; defined for dense and scaled-identity kinds.
pub fn frobenius_norm_sq(a: &LinearMap) -> Result<f64> {
    match a {
        LinearMap::Dense(m) => Ok(m.data().iter().map(|v| v * v).sum()),
        LinearMap::ScaledIdentity { dim, scale } => Ok(*dim as f64 * scale * scale),
        _ => Err(Error::Unsupported("Frobenius norm of a matrix-free operator".into())),
    }
}

/// Result of a power-iteration norm estimate.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn power_norm(
    mut gram: impl FnMut(&[f64]) -> Vec<f64>,
    dim: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> NormEstimate {
    if dim == 0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let mut r = rng::stream(seed, rng::STREAM_POWER);
    let mut v = vec![0.0; dim];
    rng::fill_standard_normal(&mut r, &mut v);
    let nv = norm(&v);
    if nv == 0.0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: false };
    }
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lam = 0.0;
    for it in 1..=max_iter {
        let w = gram(&v);
        let lam_new = dot(&v, &w); // Rayleigh quotient of A*A at unit v
        let nw = norm(&w);
        if nw == 0.0 {
            return NormEstimate { value: 0.0, iterations: it, converged: true };
        }
        v = w;
        v.iter_mut().for_each(|x| *x /= nw);
        if (lam_new - lam).abs() <= tol * lam_new.abs().max(f64::MIN_POSITIVE) {
            return NormEstimate { value: lam_new.max(0.0).sqrt(), iterations: it, converged: true };
        }
        lam = lam_new;
    }
    NormEstimate { value: lam.max(0.0).sqrt(), iterations: max_iter, converged: false }
}

/// Estimates `||A||` by power iteration on `A* A` from a seeded random
/// start. Deterministic given the seed; `converged` reports whether the
/// Rayleigh quotient settled to relative `tol` within `max_iter` rounds.
pub fn op_norm_est(a: &LinearMap, tol: f64, max_iter: usize, seed: u64) -> NormEstimate {
    power_norm(|x| a.apply_adjoint(&a.apply(x)), a.in_dim(), tol, max_iter, seed)
}

/// Diagonal positive-definite metric (step-size matrix).
#[derive(Debug, Clone)]
pub enum DiagMetric {
    Scaled { dim: usize, value: f64 },
    Diag(Vec<f64>),
}

impl DiagMetric {
    pub fn scaled(dim: usize, value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Degenerate(format!("metric value {value} is not positive")));
        }
        Ok(DiagMetric::Scaled { dim, value })
    }

    pub fn diag(entries: Vec<f64>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Degenerate(format!("metric entry {bad} is not positive")));
        }
        Ok(DiagMetric::Diag(entries))
    }

    pub fn dim(&self) -> usize {
        match self {
            DiagMetric::Scaled { dim, .. } => *dim,
            DiagMetric::Diag(v) => v.len(),
        }
    }

    pub fn entry(&self, i: usize) -> f64 {
        match self {
            DiagMetric::Scaled { value, .. } => *value,
            DiagMetric::Diag(v) => v[i],
        }
    }

    /// The single scale when the metric is a scaled identity.
    pub fn uniform_value(&self) -> Option<f64> {
        match self {
            DiagMetric::Scaled { value, .. } => Some(*value),
            DiagMetric::Diag(_) => None,
        }
    }

    pub fn max_entry(&self) -> f64 {
        match self {
            DiagMetric::Scaled { value, .. } => *value,
            DiagMetric::Diag(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn min_entry(&self) -> f64 {
        match self {
            DiagMetric::Scaled { value, .. } => *value,
            DiagMetric::Diag(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Operator norm `||M|| = max_i m_i`.
    pub fn norm(&self) -> f64 {
        self.max_entry()
    }

    /// `||M^{-1}|| = 1 / min_i m_i`.
    pub fn inv_norm(&self) -> f64 {
        1.0 / self.min_entry()
    }

    /// `||M^{1/2}|| = sqrt(max_i m_i)`.
    pub fn sqrt_norm(&self) -> f64 {
        self.max_entry().sqrt()
    }

    /// `x_i *= m_i`.
    pub fn mul_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            DiagMetric::Scaled { value, .. } => x.iter_mut().for_each(|v| *v *= value),
            DiagMetric::Diag(d) => x.iter_mut().zip(d).for_each(|(v, m)| *v *= m),
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.mul_in_place(&mut out);
        out
    }

    pub fn sqrt_mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        (0..x.len()).map(|i| self.entry(i).sqrt() * x[i]).collect()
    }

    /// `||x||^2_{M^{-1}} = sum_i x_i^2 / m_i`.
    pub fn inv_weighted_norm_sq(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        (0..x.len()).map(|i| x[i] * x[i] / self.entry(i)).sum()
    }
}

/// Outcome of the step-size admissibility check.
#[derive(Debug, Clone, Copy)]
pub struct StepCheck {
    /// `alpha = 1 - ||Gamma^{1/2} A Sigma^{1/2}||^2`; the iterations require
    /// this to be positive.
    pub alpha: f64,
    pub scaled_norm: f64,
    pub norm_converged: bool,
}

/// Computes `alpha = 1 - ||Gamma^{1/2} A Sigma^{1/2}||^2` by power
/// iteration.
pub fn check_step_condition(
    sigma: &DiagMetric,
    gamma: &DiagMetric,
    a: &LinearMap,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<StepCheck> {
    if sigma.dim() != a.in_dim() {
        return Err(Error::Shape { what: "sigma metric", expected: a.in_dim(), got: sigma.dim() });
    }
    if gamma.dim() != a.out_dim() {
        return Err(Error::Shape { what: "gamma metric", expected: a.out_dim(), got: gamma.dim() });
    }
    let est = power_norm(
        |x| {
            let t = sigma.sqrt_mul(x);
            let mut y = a.apply(&t);
            gamma.mul_in_place(&mut y);
            let back = a.apply_adjoint(&y);
            sigma.sqrt_mul(&back)
        },
        a.in_dim(),
        tol,
        max_iter,
        seed,
    );
    Ok(StepCheck {
        alpha: 1.0 - est.value * est.value,
        scaled_norm: est.value,
        norm_converged: est.converged,
    })
}

/// Diagonal preconditioners from entrywise-absolute row and column sums:
/// `sigma_j = 1 / sum_i |a_ij|`, `gamma_i = 1 / sum_j |a_ij|`. The pair
/// always satisfies `||Gamma^{1/2} A Sigma^{1/2}|| <= 1`. Errors if a row
/// or column of `|A|` sums to zero.
pub fn pock_chambolle_diagonals(a: &LinearMap) -> Result<(DiagMetric, DiagMetric)> {
    let col_sums = a.abs_col_sums();
    let row_sums = a.abs_row_sums();
    if let Some(j) = col_sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::Degenerate(format!("column {j} of |A| sums to zero")));
    }
    if let Some(i) = row_sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::Degenerate(format!("row {i} of |A| sums to zero")));
    }
    let sigma = DiagMetric::diag(col_sums.iter().map(|s| 1.0 / s).collect())?;
    let gamma = DiagMetric::diag(row_sums.iter().map(|s| 1.0 / s).collect())?;
    Ok((sigma, gamma))
}

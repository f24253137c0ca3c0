//! Weighted low-rank matrix factorization kernel.
//!
//! Approximates a matrix `X` (m x n) by `U V^T` under per-entry confidence
//! weights `W`, minimizing the block objective
//!
//! ```text
//! J(U, V) = ||W ⊙ (U V^T − X)||_F² + λ_u ||U||_F² + λ_v ||V||_F²
//! ```
//!
//! by alternating exact minimization: each row of `V` (resp. `U`) solves an
//! independent r x r ridge-regularized weighted least-squares system, so both
//! half-updates are embarrassingly parallel across columns (resp. rows) of
//! `X` and bitwise deterministic regardless of worker count. Between sweeps
//! the weights at missing entries are refreshed through a decreasing
//! exponential of the current residual, so entries the model already explains
//! well are trusted more in the next sweep; observed entries stay pinned at
//! weight 1.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mat::Matrix;

/// Weights below this floor are clamped up so that downstream weighted
/// averages never divide by an exact zero after floating-point underflow.
const WEIGHT_FLOOR: f64 = 1e-300;

/// Columns handled per parallel task in the per-column solves.
const COLUMN_BLOCK: usize = 64;

// ---------------------------------------------------------------------------
// Factor pair
// ---------------------------------------------------------------------------

/// A rank-r factorization `U V^T` of an m x n matrix: `U` is m x r, `V` is
/// n x r.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    u: Matrix,
    v: Matrix,
}

impl FactorPair {
    pub fn new(u: Matrix, v: Matrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::InvalidArgument(format!(
                "factor ranks disagree: U has {} columns, V has {}",
                u.cols(),
                v.cols()
            )));
        }
        if u.cols() == 0 {
            return Err(Error::InvalidArgument("factor rank must be >= 1".into()));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::InvalidArgument(
                "factor entries must be finite".into(),
            ));
        }
        Ok(FactorPair { u, v })
    }

    /// Fresh factors with i.i.d. standard Gaussian entries scaled by
    /// 1/sqrt(r), which keeps the initial product at unit scale. Entries are
    /// drawn in buffer order, U first, so the result is a pure function of
    /// the generator state.
    pub fn seeded_normal(m: usize, n: usize, rank: usize, rng: &mut impl Rng) -> FactorPair {
        let scale = 1.0 / (rank as f64).sqrt();
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let u = Matrix::from_vec(m, rank, draw(m * rank));
        let v = Matrix::from_vec(n, rank, draw(n * rank));
        FactorPair { u, v }
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn set_u(&mut self, u: Matrix) {
        debug_assert_eq!(u.cols(), self.v.cols());
        self.u = u;
    }

    pub fn set_v(&mut self, v: Matrix) {
        debug_assert_eq!(v.cols(), self.u.cols());
        self.v = v;
    }

    /// Materializes `U V^T` as an m x n matrix.
    pub fn product(&self) -> Matrix {
        let mut out = Matrix::zeros(self.u.rows(), self.v.rows());
        product_into(&self.u, &self.v, out.as_mut_slice());
        out
    }
}

/// Writes `U V^T` into a column-major m x n buffer. Column j is the
/// independent combination `U · v_j`, so parallel column blocks write
/// disjoint ranges and the result does not depend on the worker count.
pub(crate) fn product_into(u: &Matrix, v: &Matrix, out: &mut [f64]) {
    let (m, n, r) = (u.rows(), v.rows(), u.cols());
    debug_assert_eq!(v.cols(), r);
    debug_assert_eq!(out.len(), m * n);
    out.par_chunks_mut(m * COLUMN_BLOCK)
        .enumerate()
        .for_each(|(block, chunk)| {
            for (dj, col) in chunk.chunks_mut(m).enumerate() {
                let j = block * COLUMN_BLOCK + dj;
                col.fill(0.0);
                for l in 0..r {
                    let s = v.at(j, l);
                    for (o, &ul) in col.iter_mut().zip(u.col(l)) {
                        *o += s * ul;
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Weight matrix
// ---------------------------------------------------------------------------

/// Per-entry confidence weights for one mode matricization. Produced by
/// [`update_weights`], whose outputs lie in (0, c] at missing locations and
/// are exactly 1 at observed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub mat: Matrix,
}

impl WeightMatrix {
    /// All-ones weights: the neutral starting point (every entry trusted
    /// equally, observed or not).
    pub fn ones(rows: usize, cols: usize) -> Self {
        WeightMatrix {
            mat: Matrix::from_vec(rows, cols, vec![1.0; rows * cols]),
        }
    }

    /// Verifies the invariants for weights produced by the residual map:
    /// finite, within (0, max(c, 1)], and exactly 1 wherever `known` is set.
    pub fn check(&self, known: &[bool], c: f64) -> Result<()> {
        if known.len() != self.mat.as_slice().len() {
            return Err(Error::InvalidArgument(
                "known-entry buffer length does not match weight matrix".into(),
            ));
        }
        let cap = c.max(1.0);
        for (i, (&w, &k)) in self.mat.as_slice().iter().zip(known).enumerate() {
            if !(w.is_finite() && w > 0.0 && w <= cap) {
                return Err(Error::DegenerateWeights(format!(
                    "weight {w} at offset {i} is outside (0, {cap}]"
                )));
            }
            if k && w != 1.0 {
                return Err(Error::DegenerateWeights(format!(
                    "weight {w} at observed offset {i} is not pinned to 1"
                )));
            }
        }
        Ok(())
    }
}

/// Elementwise weight map: at missing locations
/// `w = c · sqrt(exp(−γ |x − p|)) = c · exp(−γ |x − p| / 2)` for residual
/// between data `x` and model `p`; at observed locations `w = 1`.
pub(crate) fn weights_from_residual_into(
    x: &[f64],
    prod: &[f64],
    c: f64,
    gamma: f64,
    known: &[bool],
    out: &mut [f64],
) {
    debug_assert_eq!(x.len(), prod.len());
    debug_assert_eq!(x.len(), known.len());
    debug_assert_eq!(x.len(), out.len());
    out.par_chunks_mut(4096)
        .enumerate()
        .for_each(|(block, chunk)| {
            let base = block * 4096;
            for (d, o) in chunk.iter_mut().enumerate() {
                let i = base + d;
                *o = if known[i] {
                    1.0
                } else {
                    let resid = (x[i] - prod[i]).abs();
                    (c * (-gamma * resid / 2.0).exp()).max(WEIGHT_FLOOR)
                };
            }
        });
}

/// Recomputes the confidence weights from the current residual `X − U V^T`.
///
/// `known` is the observation indicator in the same column-major layout as
/// `x`; observed entries are pinned to weight 1, missing entries get
/// `c · exp(−γ |residual| / 2)`, a strictly decreasing function of the
/// residual magnitude bounded by (0, c].
pub fn update_weights(
    x: &Matrix,
    u: &Matrix,
    v: &Matrix,
    c: f64,
    gamma: f64,
    known: &[bool],
) -> Result<WeightMatrix> {
    if !(c > 0.0 && c.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight map constants must be positive and finite, got c={c}, gamma={gamma}"
        )));
    }
    check_factor_shapes(u, v, x)?;
    if known.len() != x.as_slice().len() {
        return Err(Error::InvalidArgument(format!(
            "known-entry buffer holds {} entries, expected {}",
            known.len(),
            x.as_slice().len()
        )));
    }
    let mut prod = vec![0.0; x.as_slice().len()];
    product_into(u, v, &mut prod);
    let mut out = Matrix::zeros(x.rows(), x.cols());
    weights_from_residual_into(x.as_slice(), &prod, c, gamma, known, out.as_mut_slice());
    Ok(WeightMatrix { mat: out })
}

// ---------------------------------------------------------------------------
// Ridge-regularized weighted least squares
// ---------------------------------------------------------------------------

/// Reusable scratch for the per-column solves.
pub(crate) struct SolveBuf {
    wsq: Vec<f64>,
    scaled: Vec<f64>,
    gram: Vec<f64>,
    gidx: Vec<usize>,
    gdesign: Vec<f64>,
    gtargets: Vec<f64>,
    gwsq: Vec<f64>,
}

impl SolveBuf {
    pub(crate) fn new() -> Self {
        SolveBuf {
            wsq: Vec::new(),
            scaled: Vec::new(),
            gram: Vec::new(),
            gidx: Vec::new(),
            gdesign: Vec::new(),
            gtargets: Vec::new(),
            gwsq: Vec::new(),
        }
    }
}

/// Solves `argmin_x  Σ_i weights_i (design_i · x − targets_i)² + λ ||x||²`,
/// i.e. the normal equations `(DᵀΛD + λI) x = DᵀΛt` with `Λ = diag(weights)`.
///
/// The weights enter linearly (they are the diagonal of Λ, already squared
/// if they came from a confidence matrix). All-zero weights yield the zero
/// vector, the pure ridge solution.
pub fn ridge_wls(
    design: &Matrix,
    targets: &[f64],
    weights: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let p = design.rows();
    let r = design.cols();
    if targets.len() != p || weights.len() != p {
        return Err(Error::InvalidArgument(format!(
            "design is {p}x{r} but targets/weights have lengths {}/{}",
            targets.len(),
            weights.len()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge parameter must be positive and finite, got {lambda}"
        )));
    }
    if !design.is_finite()
        || targets.iter().any(|t| !t.is_finite())
        || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
    {
        return Err(Error::InvalidArgument(
            "ridge solve requires finite design/targets and finite nonnegative weights".into(),
        ));
    }
    let mut buf = SolveBuf::new();
    buf.wsq.clear();
    buf.wsq.extend_from_slice(weights);
    let mut out = vec![0.0; r];
    solve_with_filled_weights(design, targets, lambda, &mut buf, &mut out)?;
    Ok(out)
}

/// Per-column weights for [`solve_columns`]: either raw confidence entries
/// (squared into the Λ diagonal per use) or a binary observation mask
/// (known → 1, missing → 0).
pub(crate) enum ColumnWeights<'a> {
    Entries(&'a [f64]),
    Mask(&'a [bool]),
}

impl ColumnWeights<'_> {
    fn len(&self) -> usize {
        match self {
            ColumnWeights::Entries(w) => w.len(),
            ColumnWeights::Mask(m) => m.len(),
        }
    }

    /// Fills `wsq` with the Λ diagonal for column `j` and returns the count
    /// of nonzero entries.
    fn fill_column(&self, j: usize, p: usize, wsq: &mut [f64]) -> usize {
        let mut nnz = 0;
        match self {
            ColumnWeights::Entries(w) => {
                let col = &w[j * p..(j + 1) * p];
                for (o, &v) in wsq.iter_mut().zip(col) {
                    *o = v * v;
                    nnz += (v != 0.0) as usize;
                }
            }
            ColumnWeights::Mask(mask) => {
                let col = &mask[j * p..(j + 1) * p];
                for (o, &k) in wsq.iter_mut().zip(col) {
                    *o = k as u64 as f64;
                    nnz += k as usize;
                }
            }
        }
        nnz
    }
}

/// Solves one ridge-regularized weighted least-squares system per column of
/// `targets` (p x q, column-major), sharing the p x r design matrix.
/// Returns the solutions packed column-major r x q. Columns are independent,
/// run in parallel blocks, and write disjoint output ranges, so the result
/// is identical for every worker count.
pub(crate) fn solve_columns(
    design: &Matrix,
    targets: &[f64],
    weights: ColumnWeights<'_>,
    lambda: f64,
) -> Result<Matrix> {
    let p = design.rows();
    let r = design.cols();
    debug_assert!(p > 0 && r > 0);
    debug_assert_eq!(targets.len() % p, 0);
    debug_assert_eq!(weights.len(), targets.len());
    let q = targets.len() / p;
    let mut out = Matrix::zeros(r, q);
    out.as_mut_slice()
        .par_chunks_mut(r * COLUMN_BLOCK)
        .enumerate()
        .try_for_each(|(block, chunk)| -> Result<()> {
            let mut buf = SolveBuf::new();
            for (dj, sol) in chunk.chunks_mut(r).enumerate() {
                let j = block * COLUMN_BLOCK + dj;
                buf.wsq.resize(p, 0.0);
                let nnz = weights.fill_column(j, p, &mut buf.wsq);
                if nnz == 0 {
                    sol.fill(0.0);
                    continue;
                }
                let col_targets = &targets[j * p..(j + 1) * p];
                if nnz * 2 < p {
                    solve_gathered(design, col_targets, nnz, lambda, &mut buf, sol)?;
                } else {
                    solve_with_filled_weights(design, col_targets, lambda, &mut buf, sol)?;
                }
            }
            Ok(())
        })?;
    Ok(out)
}

/// Dense path: Gram accumulation over all p rows using `buf.wsq` as Λ.
fn solve_with_filled_weights(
    design: &Matrix,
    targets: &[f64],
    lambda: f64,
    buf: &mut SolveBuf,
    out: &mut [f64],
) -> Result<()> {
    let p = design.rows();
    let r = design.cols();
    gram_and_solve(
        design.as_slice(),
        targets,
        &buf.wsq[..p],
        p,
        r,
        lambda,
        &mut buf.scaled,
        &mut buf.gram,
        out,
    )
}

/// Sparse path: compacts the rows with nonzero weight first, so mask-weighted
/// solves at high missing rates only touch the observed rows.
fn solve_gathered(
    design: &Matrix,
    targets: &[f64],
    nnz: usize,
    lambda: f64,
    buf: &mut SolveBuf,
    out: &mut [f64],
) -> Result<()> {
    let p = design.rows();
    let r = design.cols();
    buf.gidx.clear();
    buf.gidx.extend(
        buf.wsq[..p]
            .iter()
            .enumerate()
            .filter_map(|(i, &w)| (w != 0.0).then_some(i)),
    );
    debug_assert_eq!(buf.gidx.len(), nnz);
    buf.gdesign.resize(nnz * r, 0.0);
    for l in 0..r {
        let src = design.col(l);
        let dst = &mut buf.gdesign[l * nnz..(l + 1) * nnz];
        for (o, &i) in dst.iter_mut().zip(&buf.gidx) {
            *o = src[i];
        }
    }
    buf.gtargets.clear();
    buf.gtargets.extend(buf.gidx.iter().map(|&i| targets[i]));
    buf.gwsq.clear();
    buf.gwsq.extend(buf.gidx.iter().map(|&i| buf.wsq[i]));
    // Split the borrows: gram_and_solve must not alias the gathered inputs.
    let SolveBuf {
        scaled,
        gram,
        gdesign,
        gtargets,
        gwsq,
        ..
    } = buf;
    gram_and_solve(gdesign, gtargets, gwsq, nnz, r, lambda, scaled, gram, out)
}

/// Forms `G = DᵀΛD + λI` and `b = DᵀΛt` column by column (all accesses are
/// contiguous column scans) and solves `G x = b` by Cholesky.
#[allow(clippy::too_many_arguments)]
fn gram_and_solve(
    design: &[f64],
    targets: &[f64],
    wsq: &[f64],
    q: usize,
    r: usize,
    lambda: f64,
    scaled: &mut Vec<f64>,
    gram: &mut Vec<f64>,
    out: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(design.len(), q * r);
    debug_assert_eq!(targets.len(), q);
    debug_assert_eq!(wsq.len(), q);
    debug_assert_eq!(out.len(), r);
    scaled.resize(q, 0.0);
    gram.resize(r * r, 0.0);
    for l in 0..r {
        let dl = &design[l * q..(l + 1) * q];
        for ((s, &w), &d) in scaled.iter_mut().zip(wsq).zip(dl) {
            *s = w * d;
        }
        out[l] = dot(scaled, targets);
        for l2 in l..r {
            let g = dot(scaled, &design[l2 * q..(l2 + 1) * q]);
            gram[l + l2 * r] = g;
            gram[l2 + l * r] = g;
        }
    }
    for l in 0..r {
        gram[l + l * r] += lambda;
    }
    cholesky_solve_in_place(gram, r, out)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place Cholesky factorization of a symmetric positive-definite r x r
/// column-major matrix followed by forward/back substitution. `x` holds the
/// right-hand side on entry and the solution on exit.
fn cholesky_solve_in_place(a: &mut [f64], r: usize, x: &mut [f64]) -> Result<()> {
    for j in 0..r {
        let mut d = a[j + j * r];
        for k in 0..j {
            let l = a[j + k * r];
            d -= l * l;
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::DegenerateWeights(
                "weighted normal equations lost positive definiteness".into(),
            ));
        }
        let dj = d.sqrt();
        a[j + j * r] = dj;
        for i in j + 1..r {
            let mut s = a[i + j * r];
            for k in 0..j {
                s -= a[i + k * r] * a[j + k * r];
            }
            a[i + j * r] = s / dj;
        }
    }
    for i in 0..r {
        let mut s = x[i];
        for k in 0..i {
            s -= a[i + k * r] * x[k];
        }
        x[i] = s / a[i + i * r];
    }
    for i in (0..r).rev() {
        let mut s = x[i];
        for k in i + 1..r {
            s -= a[k + i * r] * x[k];
        }
        x[i] = s / a[i + i * r];
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Alternating factor updates
// ---------------------------------------------------------------------------

fn check_factor_shapes(u: &Matrix, v: &Matrix, x: &Matrix) -> Result<()> {
    if u.rows() != x.rows() || v.rows() != x.cols() || u.cols() != v.cols() {
        return Err(Error::InvalidArgument(format!(
            "factor shapes {}x{} / {}x{} do not fit data {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols(),
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

fn check_update_args(rank: usize, x: &Matrix, w: &Matrix, lambda: f64) -> Result<()> {
    if w.rows() != x.rows() || w.cols() != x.cols() {
        return Err(Error::InvalidArgument(format!(
            "weight matrix {}x{} does not match data {}x{}",
            w.rows(),
            w.cols(),
            x.rows(),
            x.cols()
        )));
    }
    if rank == 0 || rank > x.rows().min(x.cols()) {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} exceeds the mode bound min({}, {})",
            x.rows(),
            x.cols()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge parameter must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Exact minimizer of J over `V` at fixed `U` and `W`: row j of the new `V`
/// solves the ridge system with design `U`, targets = column j of `X`, and
/// Λ = squared entries of column j of `W`.
pub fn update_v(u: &Matrix, x: &Matrix, w: &Matrix, lambda_v: f64) -> Result<Matrix> {
    if u.rows() != x.rows() {
        return Err(Error::InvalidArgument(format!(
            "U has {} rows but data has {}",
            u.rows(),
            x.rows()
        )));
    }
    check_update_args(u.cols(), x, w, lambda_v)?;
    let vt = solve_columns(
        u,
        x.as_slice(),
        ColumnWeights::Entries(w.as_slice()),
        lambda_v,
    )?;
    Ok(vt.transpose())
}

/// Exact minimizer of J over `U` at fixed `V` and `W`: row i of the new `U`
/// solves the ridge system with design `V`, targets = row i of `X`, and
/// Λ = squared entries of row i of `W`. Implemented as [`update_v`] on the
/// transposed problem.
pub fn update_u(v: &Matrix, x: &Matrix, w: &Matrix, lambda_u: f64) -> Result<Matrix> {
    if v.rows() != x.cols() {
        return Err(Error::InvalidArgument(format!(
            "V has {} rows but data has {} columns",
            v.rows(),
            x.cols()
        )));
    }
    check_update_args(v.cols(), x, w, lambda_u)?;
    let xt = x.transpose();
    let wt = w.transpose();
    let ut = solve_columns(
        v,
        xt.as_slice(),
        ColumnWeights::Entries(wt.as_slice()),
        lambda_u,
    )?;
    Ok(ut.transpose())
}

// ---------------------------------------------------------------------------
// Objective and gradients
// ---------------------------------------------------------------------------

/// Weighted objective value `||W ⊙ (U V^T − X)||_F² + λ_u||U||² + λ_v||V||²`,
/// with the residual term supplied as a precomputed product buffer. Summed
/// sequentially so the value is reproducible bit for bit.
pub(crate) fn objective_from_product(
    x: &[f64],
    w: &[f64],
    prod: &[f64],
    u: &Matrix,
    v: &Matrix,
    lambda_u: f64,
    lambda_v: f64,
) -> f64 {
    let mut fit = 0.0;
    for ((&xv, &wv), &pv) in x.iter().zip(w).zip(prod) {
        let e = wv * (pv - xv);
        fit += e * e;
    }
    fit + lambda_u * u.frobenius_sq() + lambda_v * v.frobenius_sq()
}

/// Same objective with binary observation weights: only known entries
/// contribute to the fit term.
pub(crate) fn objective_from_product_mask(
    x: &[f64],
    known: &[bool],
    prod: &[f64],
    u: &Matrix,
    v: &Matrix,
    lambda_u: f64,
    lambda_v: f64,
) -> f64 {
    let mut fit = 0.0;
    for ((&xv, &kv), &pv) in x.iter().zip(known).zip(prod) {
        if kv {
            let e = pv - xv;
            fit += e * e;
        }
    }
    fit + lambda_u * u.frobenius_sq() + lambda_v * v.frobenius_sq()
}

/// Weighted objective J(U, V); see the module docs.
pub fn weighted_objective(
    x: &Matrix,
    w: &Matrix,
    u: &Matrix,
    v: &Matrix,
    lambda_u: f64,
    lambda_v: f64,
) -> f64 {
    let mut prod = vec![0.0; x.as_slice().len()];
    product_into(u, v, &mut prod);
    objective_from_product(
        x.as_slice(),
        w.as_slice(),
        &prod,
        u,
        v,
        lambda_u,
        lambda_v,
    )
}

/// Analytic gradients of J with respect to `U` and `V`:
/// `∂J/∂U = 2 (W⊙W⊙(UVᵀ−X)) V + 2 λ_u U` and symmetrically for `V`.
pub fn objective_gradients(
    x: &Matrix,
    w: &Matrix,
    u: &Matrix,
    v: &Matrix,
    lambda_u: f64,
    lambda_v: f64,
) -> (Matrix, Matrix) {
    let (m, n, r) = (x.rows(), x.cols(), u.cols());
    let mut e = vec![0.0; m * n];
    product_into(u, v, &mut e);
    for ((ev, &wv), &xv) in e.iter_mut().zip(w.as_slice()).zip(x.as_slice()) {
        *ev = wv * wv * (*ev - xv);
    }
    let mut gu = Matrix::zeros(m, r);
    let mut gv = Matrix::zeros(n, r);
    for l in 0..r {
        for j in 0..n {
            let ecol = &e[j * m..(j + 1) * m];
            // gu[:,l] += E[:,j] * V[j,l]
            let s = v.at(j, l);
            for (o, &ev) in gu.col_mut(l).iter_mut().zip(ecol) {
                *o += 2.0 * s * ev;
            }
            // gv[j,l] = 2 * dot(E[:,j], U[:,l])
            *gv.at_mut(j, l) = 2.0 * dot(ecol, u.col(l));
        }
        for (o, &uv) in gu.col_mut(l).iter_mut().zip(u.col(l)) {
            *o += 2.0 * lambda_u * uv;
        }
        for (j, o) in gv.col_mut(l).iter_mut().enumerate() {
            *o += 2.0 * lambda_v * v.at(j, l);
        }
    }
    (gu, gv)
}

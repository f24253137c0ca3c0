//! Seeded synthetic low-rank tensor generation.
//!
//! An order-N tensor with uniform extent I and (multilinear) rank r is built
//! as a sum of r rank-one terms,
//!
//! ```text
//! T(i_1, ..., i_N) = Σ_{α=1}^{r} U_1(i_1, α) · U_2(i_2, α) ⋯ U_N(i_N, α),
//! ```
//!
//! with every factor entry drawn i.i.d. standard Gaussian from a seeded
//! generator. Every mode-k matricization of the result has rank at most r,
//! which is what makes these tensors the reference workload for low-rank
//! completion experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::tensor::DenseTensor;

/// Parameters of a synthetic instance: order, uniform extent, uniform rank,
/// and generator seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub order: usize,
    pub extent: usize,
    pub rank: usize,
    pub seed: u64,
}

/// Sums the rank-one terms defined by per-mode factor matrices (each
/// `I_n x r`). The expansion runs one rank-one Kronecker chain per column,
/// so the cost is `r · Π I_n`.
pub fn from_factors(factors: &[Matrix]) -> Result<DenseTensor> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one factor matrix".into(),
        ));
    }
    let rank = factors[0].cols();
    if rank == 0 || factors.iter().any(|f| f.cols() != rank || f.rows() == 0) {
        return Err(Error::InvalidArgument(
            "factor matrices must share a positive column count".into(),
        ));
    }
    let dims: Vec<usize> = factors.iter().map(|f| f.rows()).collect();
    let total: usize = dims.iter().product();
    let mut acc = vec![0.0f64; total];
    let mut cur: Vec<f64> = Vec::with_capacity(total);
    for alpha in 0..rank {
        cur.clear();
        cur.extend_from_slice(factors[0].col(alpha));
        for f in &factors[1..] {
            // next(i, j) = cur(i) · f(j, α): the earlier indices stay
            // fastest, matching the global linearization.
            let col = f.col(alpha);
            let mut next = Vec::with_capacity(cur.len() * col.len());
            for &c in col {
                next.extend(cur.iter().map(|&v| v * c));
            }
            cur = next;
        }
        for (a, &v) in acc.iter_mut().zip(&cur) {
            *a += v;
        }
    }
    DenseTensor::from_vec(&dims, acc)
}

/// Generates the seeded random instance described by `spec`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<DenseTensor> {
    if spec.order < 3 {
        return Err(Error::InvalidArgument(format!(
            "synthetic order must be >= 3, got {}",
            spec.order
        )));
    }
    if spec.rank == 0 || spec.rank > spec.extent {
        return Err(Error::InvalidArgument(format!(
            "synthetic rank must lie in 1..=extent ({}), got {}",
            spec.extent, spec.rank
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let factors: Vec<Matrix> = (0..spec.order)
        .map(|_| {
            let data: Vec<f64> = (0..spec.extent * spec.rank)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            Matrix::from_vec(spec.extent, spec.rank, data)
        })
        .collect();
    from_factors(&factors)
}

//! Tensor completion by parallel per-mode factorization.
//!
//! Every canonical matricization `X_<k>` of the estimate is factorized as
//! `U_k V_k^T` with a small per-mode rank; one outer iteration sweeps the
//! modes, refits each factor pair against the current estimate by weighted
//! ridge regression, and recombines the per-mode products into the next
//! estimate. Observed entries stay pinned to their observed values
//! throughout; only missing entries are re-imputed.
//!
//! Two recombination schemes are provided:
//!
//! * **mode-weighted** ([`tmac_tt`]): factor fits see only the observed
//!   entries (binary weights), and each mode contributes to the blend with a
//!   fixed scalar proportional to `min(m_k, n_k)`. This is the plain
//!   alternating baseline.
//! * **element-weighted** ([`twmac_tt`]): every entry carries its own
//!   confidence weight, refreshed each sweep from the residual as
//!   `c · exp(−γ |X − U V^T| / 2)` on missing entries (and pinned to 1 on
//!   observed ones). The weights both steer the factor fits and act as the
//!   per-entry blend coefficients, so poorly predicted entries lose
//!   influence over the estimate.
//!
//! [`complete_pipeline`] wraps a full run on image-like inputs: tensorize
//! (reshape or block augmentation), complete in the higher-order geometry,
//! invert the tensorization, and re-impose the observed pixels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{
    apply_ka_planned, apply_oka, apply_reshape, augment_mask, augment_mask_ka,
    balanced_reshape_dims, invert_ka, invert_oka, invert_reshape, plan_ka, plan_oka,
    AugmentationPlan, KaPlan,
};
use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use crate::mat::{transpose_into, Matrix};
use crate::tensor::{mode_shape, DenseTensor, ModeMatrix};
use crate::wlrf::{
    objective_from_product, objective_from_product_mask, product_into, solve_columns,
    weights_from_residual_into, ColumnWeights, FactorPair, WeightMatrix,
};

/// How the per-mode approximations are weighted and recombined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Binary observation weights in the fits, fixed scalar blend per mode.
    ModeWeighted,
    /// Evolving per-entry confidence weights in both fits and blending.
    ElementWeighted,
}

/// Per-mode factorization ranks, either an explicit list or a cap that is
/// clamped to each mode's feasible maximum `min(m_k, n_k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankSpec {
    /// `r_k = min(m_k, n_k, cap)` for every mode.
    Max(usize),
    /// Explicit ranks `r_1, ..., r_{N-1}`, each in `1..=min(m_k, n_k)`.
    PerMode(Vec<usize>),
}

impl RankSpec {
    /// Resolves the rank choice against concrete tensor extents.
    pub fn resolve(&self, dims: &[usize]) -> Result<Vec<usize>> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "completion needs at least two modes, got shape {dims:?}"
            )));
        }
        let n_modes = dims.len() - 1;
        match self {
            RankSpec::Max(cap) => {
                if *cap == 0 {
                    return Err(Error::InvalidArgument("rank cap must be >= 1".into()));
                }
                Ok((1..=n_modes)
                    .map(|k| {
                        let (m, n) = mode_shape(dims, k);
                        (*cap).min(m).min(n)
                    })
                    .collect())
            }
            RankSpec::PerMode(ranks) => {
                if ranks.len() != n_modes {
                    return Err(Error::InvalidArgument(format!(
                        "expected {} per-mode ranks for shape {:?}, got {}",
                        n_modes,
                        dims,
                        ranks.len()
                    )));
                }
                for (k, &r) in ranks.iter().enumerate() {
                    let (m, n) = mode_shape(dims, k + 1);
                    if r == 0 || r > m.min(n) {
                        return Err(Error::InvalidArgument(format!(
                            "rank {} for mode {} must lie in 1..={}",
                            r,
                            k + 1,
                            m.min(n)
                        )));
                    }
                }
                Ok(ranks.clone())
            }
        }
    }
}

/// Full parameter set for one completion run.
#[derive(Debug, Clone)]
pub struct CompletionConfig {
    pub ranks: RankSpec,
    /// Ridge strength on the row factors.
    pub lambda_u: f64,
    /// Ridge strength on the column factors.
    pub lambda_v: f64,
    /// Weight ceiling `c` of the confidence map (element scheme only).
    pub c: f64,
    /// Residual sensitivity `γ` of the confidence map (element scheme only).
    pub gamma: f64,
    /// Stop once the relative estimate change drops below this.
    pub threshold: f64,
    pub max_iters: usize,
    pub scheme: Scheme,
    /// Seed for the Gaussian factor initialization.
    pub seed: u64,
}

impl CompletionConfig {
    /// Defaults tuned for data in `[0, 1]`: rank cap 20, ridge `1e-3` on
    /// both factors, weight map `c = 1`, `γ = 10`, stop threshold `1e-4`,
    /// at most 300 sweeps.
    pub fn new(scheme: Scheme, seed: u64) -> Self {
        CompletionConfig {
            ranks: RankSpec::Max(20),
            lambda_u: 1e-3,
            lambda_v: 1e-3,
            c: 1.0,
            gamma: 10.0,
            threshold: 1e-4,
            max_iters: 300,
            scheme,
            seed,
        }
    }

    /// Checks scalar parameters and resolves the ranks against `dims`.
    fn validate(&self, dims: &[usize]) -> Result<Vec<usize>> {
        for (name, v) in [
            ("lambda_u", self.lambda_u),
            ("lambda_v", self.lambda_v),
            ("c", self.c),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "stop threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        self.ranks.resolve(dims)
    }
}

/// Output of a completion run.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    /// Final estimate; equals the observed tensor exactly at known entries.
    pub estimate: DenseTensor,
    /// Outer sweeps actually performed.
    pub iterations: usize,
    /// Per-iteration sum over modes of the weighted factorization
    /// objectives (fit plus ridge terms); never empty.
    pub objective_trace: Vec<f64>,
    /// Final per-mode confidence weights (element scheme only).
    pub final_weights: Option<Vec<WeightMatrix>>,
}

/// Instrumentation callback payloads, emitted in deterministic order.
#[derive(Debug)]
pub enum ProbeEvent<'a> {
    /// Weighted objective of mode `mode` (1-based) before any update, after
    /// the V refit, and after the U refit, all under the sweep's frozen
    /// weights.
    ModeObjectives {
        iteration: usize,
        mode: usize,
        before: f64,
        after_v: f64,
        after_u: f64,
    },
    /// Snapshot at the end of an outer sweep, after recombination.
    IterationEnd {
        iteration: usize,
        estimate: &'a DenseTensor,
        objective: f64,
        rel_change: f64,
        /// Refreshed confidence weights (element scheme only).
        weights: Option<&'a [WeightMatrix]>,
    },
}

/// Fixed blend coefficients `α_k = min(m_k, n_k) / Σ_j min(m_j, n_j)` used
/// by the mode-weighted scheme; they sum to 1 and favor the balanced
/// (most informative) matricizations.
pub fn balance_weights(dims: &[usize]) -> Result<Vec<f64>> {
    if dims.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "balance weights need at least two modes, got shape {dims:?}"
        )));
    }
    let mins: Vec<f64> = (1..dims.len())
        .map(|k| {
            let (m, n) = mode_shape(dims, k);
            m.min(n) as f64
        })
        .collect();
    let sum: f64 = mins.iter().sum();
    Ok(mins.into_iter().map(|m| m / sum).collect())
}

/// Weighted per-entry recombination of mode approximations: at missing
/// entries `x = Σ_k w_k ⊙ a_k / Σ_k w_k`, at known entries the observed
/// value. Mode-weighted blending is the special case of constant weight
/// matrices. Errors with [`Error::DegenerateWeights`] if every weight
/// vanishes at some missing entry.
pub fn aggregate_fold(
    approximations: &[ModeMatrix],
    weights: &[WeightMatrix],
    mask: &ObservationMask,
    observed: &DenseTensor,
) -> Result<DenseTensor> {
    if approximations.is_empty() || approximations.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching nonempty approximation and weight lists, got {} and {}",
            approximations.len(),
            weights.len()
        )));
    }
    if mask.dims() != observed.dims() {
        return Err(Error::InvalidArgument(format!(
            "mask shape {:?} does not match tensor shape {:?}",
            mask.dims(),
            observed.dims()
        )));
    }
    for (a, w) in approximations.iter().zip(weights) {
        if a.parent_dims != observed.dims() {
            return Err(Error::InvalidArgument(format!(
                "mode approximation targets shape {:?}, tensor is {:?}",
                a.parent_dims,
                observed.dims()
            )));
        }
        if w.mat.rows() != a.rows() || w.mat.cols() != a.cols() {
            return Err(Error::InvalidArgument(format!(
                "weight matrix {}x{} does not match approximation {}x{}",
                w.mat.rows(),
                w.mat.cols(),
                a.rows(),
                a.cols()
            )));
        }
    }
    let known = mask.as_slice();
    let mut out = DenseTensor::zeros(observed.dims())?;
    let out_slice = out.as_mut_slice();
    for (p, o) in out_slice.iter_mut().enumerate() {
        if known[p] {
            *o = observed.as_slice()[p];
            continue;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        // Every matricization shares the tensor's linearization, so flat
        // offset p addresses the same entry in each approximation.
        for (a, w) in approximations.iter().zip(weights) {
            let wv = w.mat.as_slice()[p];
            num += wv * a.mat.as_slice()[p];
            den += wv;
        }
        if !(den > 0.0) {
            return Err(Error::DegenerateWeights(format!(
                "all aggregation weights vanish at flat offset {p}"
            )));
        }
        *o = num / den;
    }
    Ok(out)
}

/// Weighted objective of one factor pair against the current estimate,
/// under either entry weights or the binary observation mask.
fn frozen_objective(
    x: &[f64],
    entries: Option<&[f64]>,
    known: &[bool],
    u: &Matrix,
    v: &Matrix,
    lambda_u: f64,
    lambda_v: f64,
    scratch: &mut Vec<f64>,
) -> f64 {
    scratch.resize(x.len(), 0.0);
    product_into(u, v, scratch);
    match entries {
        Some(w) => objective_from_product(x, w, scratch, u, v, lambda_u, lambda_v),
        None => objective_from_product_mask(x, known, scratch, u, v, lambda_u, lambda_v),
    }
}

/// Shared engine behind both schemes. One outer sweep refits every mode's
/// factor pair (V then U, each an exact weighted ridge minimizer), refreshes
/// the confidence weights (element scheme), and recombines the per-mode
/// products into the next estimate. Stops when the relative change of the
/// estimate drops below the threshold.
fn run_engine(
    observed: &DenseTensor,
    mask: &ObservationMask,
    config: &CompletionConfig,
    mut probe: Option<&mut dyn FnMut(ProbeEvent<'_>)>,
) -> Result<CompletionResult> {
    if mask.dims() != observed.dims() {
        return Err(Error::InvalidArgument(format!(
            "mask shape {:?} does not match tensor shape {:?}",
            mask.dims(),
            observed.dims()
        )));
    }
    if !observed
        .as_slice()
        .iter()
        .enumerate()
        .all(|(p, v)| v.is_finite() || !mask.is_known(p))
    {
        return Err(Error::InvalidArgument(
            "observed entries must be finite".into(),
        ));
    }
    let dims = observed.dims().to_vec();
    let ranks = config.validate(&dims)?;
    let n_modes = dims.len() - 1;
    let total = observed.len();
    let known = mask.as_slice();
    let element = matches!(config.scheme, Scheme::ElementWeighted);

    let shapes: Vec<(usize, usize)> = (1..=n_modes).map(|k| mode_shape(&dims, k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut factors: Vec<FactorPair> = shapes
        .iter()
        .zip(&ranks)
        .map(|(&(m, n), &r)| FactorPair::seeded_normal(m, n, r, &mut rng))
        .collect();
    let mut weights: Vec<WeightMatrix> = if element {
        shapes
            .iter()
            .map(|&(m, n)| WeightMatrix::ones(m, n))
            .collect()
    } else {
        Vec::new()
    };
    let alpha = balance_weights(&dims)?;

    // Initial estimate: observed values with zeros at missing entries.
    let mut x = mask.apply(observed)?;
    let mut xt = vec![0.0f64; total];
    let mut wt = vec![0.0f64; total];
    let mut maskt = vec![false; total];
    let mut prod = vec![0.0f64; total];
    let mut probe_prod: Vec<f64> = Vec::new();
    let mut num = vec![0.0f64; total];
    let mut den = vec![0.0f64; total];
    let mut trace = Vec::new();
    let mut iterations = config.max_iters;

    for iter in 1..=config.max_iters {
        num.fill(0.0);
        den.fill(0.0);
        let mut iter_objective = 0.0;
        for k in 0..n_modes {
            let (m, n) = shapes[k];
            let before = if probe.is_some() {
                frozen_objective(
                    x.as_slice(),
                    element.then(|| weights[k].mat.as_slice()),
                    known,
                    factors[k].u(),
                    factors[k].v(),
                    config.lambda_u,
                    config.lambda_v,
                    &mut probe_prod,
                )
            } else {
                0.0
            };

            // Refit V against the current estimate.
            let new_v = {
                let w = if element {
                    ColumnWeights::Entries(weights[k].mat.as_slice())
                } else {
                    ColumnWeights::Mask(known)
                };
                solve_columns(factors[k].u(), x.as_slice(), w, config.lambda_v)?.transpose()
            };
            let after_v = if probe.is_some() {
                frozen_objective(
                    x.as_slice(),
                    element.then(|| weights[k].mat.as_slice()),
                    known,
                    factors[k].u(),
                    &new_v,
                    config.lambda_u,
                    config.lambda_v,
                    &mut probe_prod,
                )
            } else {
                0.0
            };

            // Refit U on the transposed problem.
            transpose_into(x.as_slice(), m, n, &mut xt);
            let new_u = {
                let w = if element {
                    transpose_into(weights[k].mat.as_slice(), m, n, &mut wt);
                    ColumnWeights::Entries(&wt)
                } else {
                    transpose_into(known, m, n, &mut maskt);
                    ColumnWeights::Mask(&maskt)
                };
                solve_columns(&new_v, &xt, w, config.lambda_u)?.transpose()
            };

            // One shared product serves the objective, the weight refresh,
            // and the recombination accumulators.
            product_into(&new_u, &new_v, &mut prod);
            let after_u = if element {
                objective_from_product(
                    x.as_slice(),
                    weights[k].mat.as_slice(),
                    &prod,
                    &new_u,
                    &new_v,
                    config.lambda_u,
                    config.lambda_v,
                )
            } else {
                objective_from_product_mask(
                    x.as_slice(),
                    known,
                    &prod,
                    &new_u,
                    &new_v,
                    config.lambda_u,
                    config.lambda_v,
                )
            };
            iter_objective += after_u;
            if let Some(p) = probe.as_deref_mut() {
                p(ProbeEvent::ModeObjectives {
                    iteration: iter,
                    mode: k + 1,
                    before,
                    after_v,
                    after_u,
                });
            }

            if element {
                // Refresh this mode's confidence weights from the residual,
                // then blend with them.
                weights_from_residual_into(
                    x.as_slice(),
                    &prod,
                    config.c,
                    config.gamma,
                    known,
                    weights[k].mat.as_mut_slice(),
                );
                for (((nu, de), &pv), &wv) in num
                    .iter_mut()
                    .zip(den.iter_mut())
                    .zip(prod.iter())
                    .zip(weights[k].mat.as_slice())
                {
                    *nu += wv * pv;
                    *de += wv;
                }
            } else {
                let a = alpha[k];
                for ((nu, de), &pv) in num.iter_mut().zip(den.iter_mut()).zip(prod.iter()) {
                    *nu += a * pv;
                    *de += a;
                }
            }
            factors[k].set_v(new_v);
            factors[k].set_u(new_u);
        }

        // Recombine: missing entries take the weighted blend, known entries
        // keep their observed values untouched.
        let mut diff_sq = 0.0;
        let mut prev_sq = 0.0;
        {
            let xs = x.as_mut_slice();
            for p in 0..total {
                let old = xs[p];
                prev_sq += old * old;
                if !known[p] {
                    let d = den[p];
                    if !(d > 0.0) {
                        return Err(Error::DegenerateWeights(format!(
                            "all aggregation weights vanish at flat offset {p}"
                        )));
                    }
                    let new = num[p] / d;
                    diff_sq += (new - old) * (new - old);
                    xs[p] = new;
                }
            }
        }
        let rel_change = if prev_sq == 0.0 {
            if diff_sq == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (diff_sq / prev_sq).sqrt()
        };
        trace.push(iter_objective);
        if let Some(p) = probe.as_deref_mut() {
            p(ProbeEvent::IterationEnd {
                iteration: iter,
                estimate: &x,
                objective: iter_objective,
                rel_change,
                weights: element.then_some(&weights[..]),
            });
        }
        if rel_change < config.threshold {
            iterations = iter;
            break;
        }
    }

    Ok(CompletionResult {
        estimate: x,
        iterations,
        objective_trace: trace,
        final_weights: element.then_some(weights),
    })
}

/// Runs the scheme selected by `config`.
pub fn complete(
    observed: &DenseTensor,
    mask: &ObservationMask,
    config: &CompletionConfig,
) -> Result<CompletionResult> {
    run_engine(observed, mask, config, None)
}

/// [`complete`] with an instrumentation callback receiving per-mode
/// objective triples and end-of-sweep snapshots.
pub fn complete_with_probe(
    observed: &DenseTensor,
    mask: &ObservationMask,
    config: &CompletionConfig,
    probe: Option<&mut dyn FnMut(ProbeEvent<'_>)>,
) -> Result<CompletionResult> {
    run_engine(observed, mask, config, probe)
}

/// Mode-weighted baseline; `config.scheme` must be [`Scheme::ModeWeighted`].
pub fn tmac_tt(
    observed: &DenseTensor,
    mask: &ObservationMask,
    config: &CompletionConfig,
) -> Result<CompletionResult> {
    if config.scheme != Scheme::ModeWeighted {
        return Err(Error::InvalidArgument(
            "mode-weighted runner called with an element-weighted config".into(),
        ));
    }
    run_engine(observed, mask, config, None)
}

/// Element-weighted scheme; `config.scheme` must be
/// [`Scheme::ElementWeighted`].
pub fn twmac_tt(
    observed: &DenseTensor,
    mask: &ObservationMask,
    config: &CompletionConfig,
) -> Result<CompletionResult> {
    if config.scheme != Scheme::ElementWeighted {
        return Err(Error::InvalidArgument(
            "element-weighted runner called with a mode-weighted config".into(),
        ));
    }
    run_engine(observed, mask, config, None)
}

/// Tensorization applied before completion and inverted afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augmentation {
    /// Complete in the input geometry.
    None,
    /// Balanced factor-pair reshape of the first two extents.
    Reshape,
    /// Non-overlapping block tensorization (square power-of-two inputs).
    Ka,
    /// Overlapping block tensorization (arbitrary sizes).
    Oka,
}

/// Outcome of an end-to-end pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Estimate in the input geometry, observed entries re-imposed.
    pub estimate: DenseTensor,
    /// Shape the completion actually ran on.
    pub augmented_dims: Vec<usize>,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

/// Resolved tensorization for a concrete input shape: how to carry tensors
/// and masks into the completion geometry and back. [`complete_pipeline`]
/// plans one internally; instrumentation that needs to map per-iteration
/// snapshots back to the input geometry can plan the identical transform
/// via [`Tensorization::plan`].
#[derive(Debug, Clone)]
pub enum Tensorization {
    /// Input geometry used as-is.
    Direct,
    /// Linearization-preserving reshape; remembers both shapes.
    Reshape {
        target: Vec<usize>,
        original: Vec<usize>,
    },
    Ka(KaPlan),
    Oka(AugmentationPlan),
}

impl Tensorization {
    /// Plans the transform for inputs of shape `dims`.
    pub fn plan(dims: &[usize], augmentation: Augmentation) -> Result<Tensorization> {
        match augmentation {
            Augmentation::None => Ok(Tensorization::Direct),
            Augmentation::Reshape => Ok(Tensorization::Reshape {
                target: balanced_reshape_dims(dims),
                original: dims.to_vec(),
            }),
            Augmentation::Ka | Augmentation::Oka => {
                if !(2..=3).contains(&dims.len()) {
                    return Err(Error::UnsupportedShape(format!(
                        "block tensorization expects an order-2 or order-3 image, got order {}",
                        dims.len()
                    )));
                }
                let channels = (dims.len() == 3).then(|| dims[2]);
                if augmentation == Augmentation::Ka {
                    Ok(Tensorization::Ka(plan_ka(dims[0], dims[1], channels)?))
                } else {
                    Ok(Tensorization::Oka(plan_oka(dims[0], dims[1], channels)?))
                }
            }
        }
    }

    /// Carries a tensor into the completion geometry.
    pub fn apply(&self, t: &DenseTensor) -> Result<DenseTensor> {
        match self {
            Tensorization::Direct => Ok(t.clone()),
            Tensorization::Reshape { target, .. } => apply_reshape(t, target),
            Tensorization::Ka(p) => apply_ka_planned(t, p),
            Tensorization::Oka(p) => apply_oka(t, p),
        }
    }

    /// Carries an observation mask into the completion geometry.
    pub fn apply_mask(&self, m: &ObservationMask) -> Result<ObservationMask> {
        match self {
            Tensorization::Direct => Ok(m.clone()),
            Tensorization::Reshape { target, .. } => {
                // Reshapes preserve the linearization, so the flat mask
                // carries over unchanged.
                ObservationMask::from_vec(target, m.as_slice().to_vec())
            }
            Tensorization::Ka(p) => augment_mask_ka(m, p),
            Tensorization::Oka(p) => augment_mask(m, p),
        }
    }

    /// Carries an estimate back to the input geometry.
    pub fn invert(&self, t: &DenseTensor) -> Result<DenseTensor> {
        match self {
            Tensorization::Direct => Ok(t.clone()),
            Tensorization::Reshape { original, .. } => invert_reshape(t, original),
            Tensorization::Ka(p) => invert_ka(t, p),
            Tensorization::Oka(p) => invert_oka(t, p),
        }
    }
}

/// End-to-end run: tensorize, complete, invert, re-impose observed entries.
pub fn complete_pipeline(
    input: &DenseTensor,
    mask: &ObservationMask,
    augmentation: Augmentation,
    config: &CompletionConfig,
) -> Result<PipelineResult> {
    complete_pipeline_with_probe(input, mask, augmentation, config, None)
}

/// [`complete_pipeline`] with the instrumentation callback forwarded to the
/// completion engine (events see the augmented geometry).
pub fn complete_pipeline_with_probe(
    input: &DenseTensor,
    mask: &ObservationMask,
    augmentation: Augmentation,
    config: &CompletionConfig,
    probe: Option<&mut dyn FnMut(ProbeEvent<'_>)>,
) -> Result<PipelineResult> {
    if mask.dims() != input.dims() {
        return Err(Error::InvalidArgument(format!(
            "mask shape {:?} does not match input shape {:?}",
            mask.dims(),
            input.dims()
        )));
    }
    let tz = Tensorization::plan(input.dims(), augmentation)?;
    let aug = tz.apply(input)?;
    let aug_mask = tz.apply_mask(mask)?;
    let augmented_dims = aug.dims().to_vec();
    let result = run_engine(&aug, &aug_mask, config, probe)?;
    let mut estimate = tz.invert(&result.estimate)?;
    // Averaging over block copies can perturb pixels whose copies disagree;
    // the observed ones must come back verbatim.
    {
        let es = estimate.as_mut_slice();
        for (p, (&k, &v)) in mask.as_slice().iter().zip(input.as_slice()).enumerate() {
            if k {
                es[p] = v;
            }
        }
    }
    Ok(PipelineResult {
        estimate,
        augmented_dims,
        iterations: result.iterations,
        objective_trace: result.objective_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::sample_mask;
    use crate::metrics::rse;
    use crate::synth::{gen_synthetic, SyntheticSpec};
    use crate::tensor::matricize;
    use rand::Rng;

    fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(dims, |_| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn balance_weights_follow_min_dimensions() {
        // Shape (4,4,4,4): matricizations are 4x64, 16x16, 64x4, so the
        // balanced middle mode gets 16/24 and the outer modes 4/24 each.
        let a = balance_weights(&[4, 4, 4, 4]).unwrap();
        assert_eq!(a.len(), 3);
        assert!((a[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((a[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((a[2] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(balance_weights(&[3, 7]).unwrap(), vec![1.0]);
        assert!(balance_weights(&[5]).is_err());
    }

    #[test]
    fn rank_resolution_clamps_and_validates() {
        assert_eq!(
            RankSpec::Max(20).resolve(&[4, 4, 4, 4]).unwrap(),
            vec![4, 16, 4]
        );
        assert_eq!(
            RankSpec::PerMode(vec![2, 5, 3]).resolve(&[4, 4, 4, 4]).unwrap(),
            vec![2, 5, 3]
        );
        assert!(RankSpec::Max(0).resolve(&[4, 4]).is_err());
        assert!(RankSpec::PerMode(vec![2, 2]).resolve(&[4, 4, 4, 4]).is_err());
        assert!(RankSpec::PerMode(vec![5, 5, 5]).resolve(&[4, 4, 4, 4]).is_err());
        assert!(RankSpec::PerMode(vec![0]).resolve(&[4, 4]).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_scalars() {
        let dims = [4, 4];
        let base = CompletionConfig::new(Scheme::ElementWeighted, 0);
        assert!(base.validate(&dims).is_ok());
        for bad in [
            CompletionConfig { lambda_u: 0.0, ..base.clone() },
            CompletionConfig { lambda_v: -1.0, ..base.clone() },
            CompletionConfig { c: 0.0, ..base.clone() },
            CompletionConfig { gamma: f64::NAN, ..base.clone() },
            CompletionConfig { threshold: 0.0, ..base.clone() },
            CompletionConfig { threshold: 1.0, ..base.clone() },
            CompletionConfig { max_iters: 0, ..base.clone() },
        ] {
            assert!(bad.validate(&dims).is_err());
        }
    }

    #[test]
    fn fully_observed_input_converges_immediately() {
        let t = random_tensor(&[6, 5], 3);
        let mask = ObservationMask::all_known(&[6, 5]).unwrap();
        for scheme in [Scheme::ModeWeighted, Scheme::ElementWeighted] {
            let config = CompletionConfig::new(scheme, 7);
            let r = complete(&t, &mask, &config).unwrap();
            assert_eq!(r.estimate, t);
            assert_eq!(r.iterations, 1);
            assert_eq!(r.objective_trace.len(), 1);
        }
    }

    #[test]
    fn scheme_runners_enforce_their_scheme() {
        let t = random_tensor(&[4, 4], 0);
        let mask = ObservationMask::all_known(&[4, 4]).unwrap();
        let mode_cfg = CompletionConfig::new(Scheme::ModeWeighted, 0);
        let elem_cfg = CompletionConfig::new(Scheme::ElementWeighted, 0);
        assert!(tmac_tt(&t, &mask, &mode_cfg).is_ok());
        assert!(tmac_tt(&t, &mask, &elem_cfg).is_err());
        assert!(twmac_tt(&t, &mask, &elem_cfg).is_ok());
        assert!(twmac_tt(&t, &mask, &mode_cfg).is_err());
    }

    #[test]
    fn rank_one_tensor_is_recovered_from_partial_observations() {
        let truth = gen_synthetic(&SyntheticSpec {
            order: 4,
            extent: 8,
            rank: 1,
            seed: 9,
        })
        .unwrap();
        let mask = sample_mask(truth.dims(), 0.3, 17).unwrap();
        let config = CompletionConfig {
            ranks: RankSpec::Max(1),
            threshold: 1e-8,
            max_iters: 100,
            ..CompletionConfig::new(Scheme::ModeWeighted, 23)
        };
        let r = tmac_tt(&truth, &mask, &config).unwrap();
        assert!(r.iterations <= 100);
        let err = rse(&r.estimate, &truth).unwrap();
        assert!(err < 1e-3, "relative error {err} too large");
        // Observed entries are exact by construction.
        for (p, &k) in mask.as_slice().iter().enumerate() {
            if k {
                assert_eq!(r.estimate.as_slice()[p], truth.as_slice()[p]);
            }
        }
    }

    #[test]
    fn element_weights_stay_valid_and_pinned() {
        let truth = gen_synthetic(&SyntheticSpec {
            order: 3,
            extent: 6,
            rank: 2,
            seed: 4,
        })
        .unwrap();
        let mask = sample_mask(truth.dims(), 0.4, 5).unwrap();
        let config = CompletionConfig {
            ranks: RankSpec::Max(2),
            gamma: 1.0,
            max_iters: 10,
            threshold: 1e-12,
            ..CompletionConfig::new(Scheme::ElementWeighted, 6)
        };
        let r = twmac_tt(&truth, &mask, &config).unwrap();
        let weights = r.final_weights.expect("element scheme returns weights");
        assert_eq!(weights.len(), 2);
        for w in &weights {
            w.check(mask.as_slice(), config.c).unwrap();
        }
    }

    #[test]
    fn probe_sees_descent_within_each_mode_update() {
        let truth = gen_synthetic(&SyntheticSpec {
            order: 3,
            extent: 5,
            rank: 2,
            seed: 12,
        })
        .unwrap();
        let mask = sample_mask(truth.dims(), 0.4, 2).unwrap();
        for scheme in [Scheme::ModeWeighted, Scheme::ElementWeighted] {
            let config = CompletionConfig {
                ranks: RankSpec::Max(2),
                gamma: 1.0,
                max_iters: 6,
                threshold: 1e-12,
                ..CompletionConfig::new(scheme, 3)
            };
            let mut events = 0usize;
            let mut probe = |e: ProbeEvent<'_>| {
                if let ProbeEvent::ModeObjectives {
                    before,
                    after_v,
                    after_u,
                    ..
                } = e
                {
                    let slack = 1e-10 * before.max(1.0);
                    assert!(after_v <= before + slack, "{after_v} > {before}");
                    assert!(after_u <= after_v + slack, "{after_u} > {after_v}");
                    events += 1;
                }
            };
            complete_with_probe(&truth, &mask, &config, Some(&mut probe)).unwrap();
            assert_eq!(events, 6 * 2);
        }
    }

    #[test]
    fn identical_results_for_any_worker_count() {
        let truth = gen_synthetic(&SyntheticSpec {
            order: 3,
            extent: 6,
            rank: 2,
            seed: 20,
        })
        .unwrap();
        let mask = sample_mask(truth.dims(), 0.5, 21).unwrap();
        let config = CompletionConfig {
            ranks: RankSpec::Max(3),
            gamma: 1.0,
            max_iters: 5,
            threshold: 1e-12,
            ..CompletionConfig::new(Scheme::ElementWeighted, 22)
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| complete(&truth, &mask, &config).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.objective_trace, b.objective_trace);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn aggregation_blends_and_pins() {
        let dims = [2, 2, 2];
        let observed = DenseTensor::from_fn(&dims, |idx| (idx[0] + idx[1] + idx[2]) as f64).unwrap();
        let mut flags = vec![false; 8];
        flags[0] = true;
        flags[5] = true;
        let mask = ObservationMask::from_vec(&dims, flags).unwrap();
        let a1 = matricize(&DenseTensor::filled(&dims, 1.0).unwrap(), 1).unwrap();
        let a2 = matricize(&DenseTensor::filled(&dims, 3.0).unwrap(), 2).unwrap();

        // Equal weights: missing entries take the plain average 2.0.
        let w1 = WeightMatrix::ones(2, 4);
        let w2 = WeightMatrix::ones(4, 2);
        let out = aggregate_fold(&[a1.clone(), a2.clone()], &[w1, w2], &mask, &observed).unwrap();
        for (p, &k) in mask.as_slice().iter().enumerate() {
            if k {
                assert_eq!(out.as_slice()[p], observed.as_slice()[p]);
            } else {
                assert_eq!(out.as_slice()[p], 2.0);
            }
        }

        // Indicator weights select the second approximation outright.
        let w1 = WeightMatrix { mat: Matrix::zeros(2, 4) };
        let w2 = WeightMatrix::ones(4, 2);
        let out = aggregate_fold(&[a1.clone(), a2.clone()], &[w1, w2], &mask, &observed).unwrap();
        assert_eq!(out.as_slice()[1], 3.0);

        // All-zero weights at a missing entry are degenerate.
        let w1 = WeightMatrix { mat: Matrix::zeros(2, 4) };
        let w2 = WeightMatrix { mat: Matrix::zeros(4, 2) };
        let err = aggregate_fold(&[a1.clone(), a2], &[w1, w2], &mask, &observed).unwrap_err();
        assert_eq!(err.code(), "degenerate-weights");

        // Shape mismatches are rejected.
        let bad_w = WeightMatrix::ones(4, 2);
        assert!(aggregate_fold(&[a1], &[bad_w], &mask, &observed).is_err());
    }

    #[test]
    fn pipeline_identity_when_fully_observed() {
        let img = random_tensor(&[8, 8], 30);
        let mask = ObservationMask::all_known(&[8, 8]).unwrap();
        let config = CompletionConfig {
            ranks: RankSpec::Max(4),
            ..CompletionConfig::new(Scheme::ElementWeighted, 1)
        };
        let out = complete_pipeline(&img, &mask, Augmentation::Oka, &config).unwrap();
        // 8 → 5 → 4 gives two block levels on top of the 4x4 core.
        assert_eq!(out.augmented_dims, vec![4, 4, 4, 4]);
        assert_eq!(out.estimate, img);
        assert!(!out.objective_trace.is_empty());
    }

    #[test]
    fn pipeline_geometry_for_each_augmentation() {
        let img = random_tensor(&[8, 8, 3], 31);
        let mask = sample_mask(&[8, 8, 3], 0.4, 32).unwrap();
        let config = CompletionConfig {
            ranks: RankSpec::Max(3),
            gamma: 2.0,
            max_iters: 8,
            ..CompletionConfig::new(Scheme::ElementWeighted, 2)
        };
        for (aug, want_dims) in [
            (Augmentation::None, vec![8, 8, 3]),
            (Augmentation::Reshape, vec![2, 4, 2, 4, 3]),
            (Augmentation::Ka, vec![4, 4, 4, 3]),
            (Augmentation::Oka, vec![4, 4, 4, 4, 3]),
        ] {
            let out = complete_pipeline(&img, &mask, aug, &config).unwrap();
            assert_eq!(out.augmented_dims, want_dims, "{aug:?}");
            assert_eq!(out.estimate.dims(), img.dims());
            // Observed pixels come back verbatim.
            for (p, &k) in mask.as_slice().iter().enumerate() {
                if k {
                    assert_eq!(out.estimate.as_slice()[p], img.as_slice()[p]);
                }
            }
        }
    }

    #[test]
    fn pipeline_rejects_unsupported_block_shapes() {
        let img = random_tensor(&[6, 7], 33);
        let mask = ObservationMask::all_known(&[6, 7]).unwrap();
        let config = CompletionConfig::new(Scheme::ModeWeighted, 0);
        let err = complete_pipeline(&img, &mask, Augmentation::Ka, &config).unwrap_err();
        assert_eq!(err.code(), "unsupported-shape");
        let t4 = random_tensor(&[2, 2, 2, 2], 34);
        let mask4 = ObservationMask::all_known(&[2, 2, 2, 2]).unwrap();
        assert!(complete_pipeline(&t4, &mask4, Augmentation::Oka, &config).is_err());
    }
}

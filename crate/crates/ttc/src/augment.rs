//! Order-increasing preprocessing: recursive overlapping block augmentation,
//! its non-overlapping power-of-two variant, and plain reshape.
//!
//! The overlapping scheme repeatedly replaces the current frontal slice
//! (initially the whole image) by four overlapping sub-blocks — the 2 x 2
//! grid of origins `{(1,1), (1,y_start), (x_start,1), (x_start,y_start)}` —
//! stacked along a new mode of extent 4. Each level roughly halves the
//! frontal extents while sharing 2 rows/columns between adjacent blocks when
//! the shrinking extent is even and 3 when it is odd, so arbitrary (even
//! prime) sizes can be driven down to a ≤4-sized frontal slice. The output
//! mode order is `(x, y, b_L, ..., b_1, channel)` with the finest division
//! index right after the frontal modes: in the fixed first-index-fastest
//! linearization, spatially close pixels stay close in memory.
//!
//! Because blocks overlap, one input pixel may own several augmented copies
//! (always a power of two: per level and axis it sits in one or both
//! half-blocks). The inverse therefore averages the copies; on tensors that
//! were produced by the forward map all copies agree and the round trip is
//! exact.

use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use crate::tensor::DenseTensor;

/// Division schedule for the overlapping augmentation.
///
/// `sizes[0]` is the input's spatial extents and `sizes[t]`, `starts[t]` for
/// `t = 1..=levels` describe the frontal-slice shape and the second-block
/// origin (1-based) of division level `t`; `starts[0]` is a placeholder
/// `(1, 1)`. `output_dims` is `(x_size, y_size, 4 repeated levels times,
/// channel_extent if present)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub levels: usize,
    pub sizes: Vec<(usize, usize)>,
    pub starts: Vec<(usize, usize)>,
    pub channel_extent: Option<usize>,
    pub output_dims: Vec<usize>,
}

/// One halving step of the planner: even extents keep 2 shared elements,
/// odd extents 3, so the new size is `s/2 + 1` resp. `(s+1)/2 + 1`.
fn shrink(extent: usize) -> usize {
    if extent % 2 == 1 {
        (extent + 1) / 2 + 1
    } else {
        extent / 2 + 1
    }
}

fn output_dims_for(
    frontal: (usize, usize),
    levels: usize,
    channel_extent: Option<usize>,
    merge_frontal: bool,
) -> Vec<usize> {
    let mut dims = if merge_frontal {
        debug_assert_eq!(frontal, (2, 2));
        vec![4]
    } else {
        vec![frontal.0, frontal.1]
    };
    dims.extend(std::iter::repeat(4).take(levels));
    if let Some(l) = channel_extent {
        dims.push(l);
    }
    dims
}

/// Computes the division schedule for a `rows x cols` image (with an
/// optional channel extent): shrink both spatial extents level by level
/// while both still exceed 4. Inputs already at or below 4 in either extent
/// yield a zero-level (identity) plan.
pub fn plan_oka(rows: usize, cols: usize, channels: Option<usize>) -> Result<AugmentationPlan> {
    if rows == 0 || cols == 0 || channels == Some(0) {
        return Err(Error::InvalidArgument(format!(
            "augmentation input extents must be positive, got {rows}x{cols} channels {channels:?}"
        )));
    }
    let mut sizes = vec![(rows, cols)];
    let mut starts = vec![(1, 1)];
    let (mut r, mut c) = (rows, cols);
    while r > 4 && c > 4 {
        let (pr, pc) = (r, c);
        r = shrink(r);
        c = shrink(c);
        sizes.push((r, c));
        starts.push((pr - r + 1, pc - c + 1));
    }
    let levels = sizes.len() - 1;
    Ok(AugmentationPlan {
        levels,
        output_dims: output_dims_for((r, c), levels, channels, false),
        sizes,
        starts,
        channel_extent: channels,
    })
}

impl AugmentationPlan {
    /// Builds a plan from an explicit size schedule (block origins are
    /// derived as `previous − current + 1`). Unlike [`plan_oka`] this does
    /// not impose the even/odd overlap rule, only consistency: each level
    /// must shrink, and the two half-blocks must cover their parent
    /// (`previous ≤ 2·current`).
    pub fn custom(sizes: Vec<(usize, usize)>, channels: Option<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument(
                "schedule needs at least the input sizes".into(),
            ));
        }
        let mut starts = vec![(1, 1)];
        for t in 1..sizes.len() {
            starts.push((
                sizes[t - 1].0 - sizes[t].0 + 1,
                sizes[t - 1].1 - sizes[t].1 + 1,
            ));
        }
        let levels = sizes.len() - 1;
        let frontal = sizes[levels];
        let plan = AugmentationPlan {
            levels,
            output_dims: output_dims_for(frontal, levels, channels, false),
            sizes,
            starts,
            channel_extent: channels,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Consistency check used before any map is built, so hand-edited plans
    /// cannot cause out-of-bounds addressing.
    fn validate(&self) -> Result<()> {
        if self.sizes.len() != self.levels + 1 || self.starts.len() != self.levels + 1 {
            return Err(Error::InvalidArgument(
                "schedule length does not match level count".into(),
            ));
        }
        for t in 1..=self.levels {
            let (pr, pc) = self.sizes[t - 1];
            let (r, c) = self.sizes[t];
            if !(1 <= r && r < pr && pr <= 2 * r && 1 <= c && c < pc && pc <= 2 * c) {
                return Err(Error::InvalidArgument(format!(
                    "level {t} blocks {r}x{c} neither shrink nor cover their {pr}x{pc} parent"
                )));
            }
            if self.starts[t] != (pr - r + 1, pc - c + 1) {
                return Err(Error::InvalidArgument(format!(
                    "level {t} start {:?} is not (previous − current + 1)",
                    self.starts[t]
                )));
            }
        }
        if self.channel_extent == Some(0) || self.sizes[0].0 == 0 || self.sizes[0].1 == 0 {
            return Err(Error::InvalidArgument("zero extent in schedule".into()));
        }
        Ok(())
    }

    fn expected_input_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.sizes[0].0, self.sizes[0].1];
        if let Some(l) = self.channel_extent {
            dims.push(l);
        }
        dims
    }
}

/// Flat source index (into the spatial `rows x cols` input) of every flat
/// spatial output position, enumerated in output linearization order.
fn spatial_source_map(sizes: &[(usize, usize)], starts: &[(usize, usize)]) -> Vec<usize> {
    let levels = sizes.len() - 1;
    let (rows, _cols) = sizes[0];
    let (fr, fc) = sizes[levels];
    let frontal_len = fr * fc;
    let combos = 4usize.pow(levels as u32);
    // 0-based block origins per level, in the fixed row-major grid order.
    let origins: Vec<[(usize, usize); 4]> = (1..=levels)
        .map(|t| {
            let (xs, ys) = (starts[t].0 - 1, starts[t].1 - 1);
            [(0, 0), (0, ys), (xs, 0), (xs, ys)]
        })
        .collect();
    let mut map = vec![0usize; frontal_len * combos];
    for m in 0..combos {
        // Digit d of m selects the block at level `levels − d`: the finest
        // division varies fastest, right after the frontal indices.
        let (mut ox, mut oy) = (0, 0);
        let mut rest = m;
        for d in 0..levels {
            let b = rest % 4;
            rest /= 4;
            let (bx, by) = origins[levels - 1 - d][b];
            ox += bx;
            oy += by;
        }
        let out = &mut map[m * frontal_len..(m + 1) * frontal_len];
        for v in 0..fc {
            for u in 0..fr {
                out[u + v * fr] = (ox + u) + (oy + v) * rows;
            }
        }
    }
    map
}

fn check_aug_input(t_dims: &[usize], plan: &AugmentationPlan) -> Result<()> {
    plan.validate()?;
    let expected = plan.expected_input_dims();
    if t_dims != expected.as_slice() {
        return Err(Error::InvalidArgument(format!(
            "input dims {t_dims:?} do not match the plan's expected {expected:?}"
        )));
    }
    Ok(())
}

fn apply_with_map(
    t: &DenseTensor,
    map: &[usize],
    channels: usize,
    spatial_in: usize,
    output_dims: &[usize],
) -> DenseTensor {
    let mut data = Vec::with_capacity(map.len() * channels);
    for j in 0..channels {
        let base = j * spatial_in;
        data.extend(map.iter().map(|&src| t.as_slice()[base + src]));
    }
    DenseTensor::from_vec(output_dims, data).expect("map length matches output dims")
}

/// Casts an order-2 or order-3 tensor to the higher-order form described by
/// `plan`. Values are only relocated (with duplication in overlap regions),
/// never combined.
pub fn apply_oka(t: &DenseTensor, plan: &AugmentationPlan) -> Result<DenseTensor> {
    check_aug_input(t.dims(), plan)?;
    let map = spatial_source_map(&plan.sizes, &plan.starts);
    let (rows, cols) = plan.sizes[0];
    Ok(apply_with_map(
        t,
        &map,
        plan.channel_extent.unwrap_or(1),
        rows * cols,
        &plan.output_dims,
    ))
}

fn invert_with_map(
    aug: &DenseTensor,
    map: &[usize],
    channels: usize,
    spatial_in: usize,
    input_dims: &[usize],
) -> Result<DenseTensor> {
    let mut out = vec![0.0f64; spatial_in * channels];
    let mut sum = vec![0.0f64; spatial_in];
    let mut count = vec![0u32; spatial_in];
    let mut equal = vec![true; spatial_in];
    for j in 0..channels {
        sum.fill(0.0);
        count.fill(0);
        equal.fill(true);
        let slice = &aug.as_slice()[j * map.len()..(j + 1) * map.len()];
        let first = &mut out[j * spatial_in..(j + 1) * spatial_in];
        for (&src, &v) in map.iter().zip(slice) {
            if count[src] == 0 {
                first[src] = v;
            } else if v != first[src] {
                equal[src] = false;
            }
            sum[src] += v;
            count[src] += 1;
        }
        for i in 0..spatial_in {
            if count[i] == 0 {
                return Err(Error::InvalidArgument(
                    "schedule does not cover every input position".into(),
                ));
            }
            // Copies that agree are passed through untouched so that
            // invert(apply(t)) == t exactly; disagreeing copies are averaged.
            if !equal[i] {
                first[i] = sum[i] / count[i] as f64;
            }
        }
    }
    DenseTensor::from_vec(input_dims, out)
}

/// Inverse of [`apply_oka`]: each original position receives the mean of all
/// its augmented copies (exact pass-through when the copies agree).
pub fn invert_oka(aug: &DenseTensor, plan: &AugmentationPlan) -> Result<DenseTensor> {
    plan.validate()?;
    if aug.dims() != plan.output_dims.as_slice() {
        return Err(Error::InvalidArgument(format!(
            "augmented dims {:?} do not match the plan's output dims {:?}",
            aug.dims(),
            plan.output_dims
        )));
    }
    let map = spatial_source_map(&plan.sizes, &plan.starts);
    let (rows, cols) = plan.sizes[0];
    invert_with_map(
        aug,
        &map,
        plan.channel_extent.unwrap_or(1),
        rows * cols,
        &plan.expected_input_dims(),
    )
}

fn augment_mask_with_map(
    mask: &ObservationMask,
    map: &[usize],
    channels: usize,
    spatial_in: usize,
    output_dims: &[usize],
) -> ObservationMask {
    let mut known = Vec::with_capacity(map.len() * channels);
    for j in 0..channels {
        let base = j * spatial_in;
        known.extend(map.iter().map(|&src| mask.as_slice()[base + src]));
    }
    ObservationMask::from_vec(output_dims, known).expect("map length matches output dims")
}

/// Propagates an observation mask through the augmentation: every augmented
/// copy of an observed position is marked known.
pub fn augment_mask(mask: &ObservationMask, plan: &AugmentationPlan) -> Result<ObservationMask> {
    check_aug_input(mask.dims(), plan)?;
    let map = spatial_source_map(&plan.sizes, &plan.starts);
    let (rows, cols) = plan.sizes[0];
    Ok(augment_mask_with_map(
        mask,
        &map,
        plan.channel_extent.unwrap_or(1),
        rows * cols,
        &plan.output_dims,
    ))
}

// ---------------------------------------------------------------------------
// Non-overlapping power-of-two variant
// ---------------------------------------------------------------------------

/// Schedule for the non-overlapping block augmentation: recursive 2 x 2
/// halving of a `2^n x 2^n` image down to a 2 x 2 frontal slice, which is
/// merged into a single extent-4 mode (so the output has `n` extent-4 modes
/// plus the optional channel).
#[derive(Debug, Clone, PartialEq)]
pub struct KaPlan {
    pub levels: usize,
    pub rows: usize,
    pub cols: usize,
    pub channel_extent: Option<usize>,
    pub output_dims: Vec<usize>,
}

/// Plans the non-overlapping augmentation; only square power-of-two spatial
/// extents are supported (the overlapping scheme handles everything else).
pub fn plan_ka(rows: usize, cols: usize, channels: Option<usize>) -> Result<KaPlan> {
    if rows != cols || rows < 2 || !rows.is_power_of_two() {
        return Err(Error::UnsupportedShape(format!(
            "non-overlapping augmentation needs equal power-of-two spatial extents, got \
             {rows}x{cols}; the overlapping scheme (oka) handles arbitrary sizes"
        )));
    }
    if channels == Some(0) {
        return Err(Error::InvalidArgument("zero channel extent".into()));
    }
    let levels = rows.trailing_zeros() as usize - 1;
    Ok(KaPlan {
        levels,
        rows,
        cols,
        channel_extent: channels,
        output_dims: output_dims_for((2, 2), levels, channels, true),
    })
}

fn ka_schedule(plan: &KaPlan) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut sizes = vec![(plan.rows, plan.cols)];
    let mut starts = vec![(1, 1)];
    for t in 1..=plan.levels {
        let half = plan.rows >> t;
        sizes.push((half, half));
        starts.push((half + 1, half + 1));
    }
    (sizes, starts)
}

fn check_ka_input(dims: &[usize], plan: &KaPlan) -> Result<()> {
    let mut expected = vec![plan.rows, plan.cols];
    if let Some(l) = plan.channel_extent {
        expected.push(l);
    }
    if dims != expected.as_slice() {
        return Err(Error::InvalidArgument(format!(
            "input dims {dims:?} do not match the plan's expected {expected:?}"
        )));
    }
    Ok(())
}

/// Non-overlapping recursive 2 x 2 block augmentation. The plan is derived
/// from the tensor's own dims; keep it (via [`plan_ka`]) to invert later.
pub fn apply_ka(t: &DenseTensor) -> Result<DenseTensor> {
    let plan = plan_for_tensor_ka(t.dims())?;
    apply_ka_planned(t, &plan)
}

fn plan_for_tensor_ka(dims: &[usize]) -> Result<KaPlan> {
    match dims.len() {
        2 => plan_ka(dims[0], dims[1], None),
        3 => plan_ka(dims[0], dims[1], Some(dims[2])),
        n => Err(Error::InvalidArgument(format!(
            "augmentation expects an order-2 or order-3 input, got order {n}"
        ))),
    }
}

pub fn apply_ka_planned(t: &DenseTensor, plan: &KaPlan) -> Result<DenseTensor> {
    check_ka_input(t.dims(), plan)?;
    let (sizes, starts) = ka_schedule(plan);
    let map = spatial_source_map(&sizes, &starts);
    Ok(apply_with_map(
        t,
        &map,
        plan.channel_extent.unwrap_or(1),
        plan.rows * plan.cols,
        &plan.output_dims,
    ))
}

/// Exact inverse of [`apply_ka`] (no overlaps, so every position has exactly
/// one copy).
pub fn invert_ka(aug: &DenseTensor, plan: &KaPlan) -> Result<DenseTensor> {
    if aug.dims() != plan.output_dims.as_slice() {
        return Err(Error::InvalidArgument(format!(
            "augmented dims {:?} do not match the plan's output dims {:?}",
            aug.dims(),
            plan.output_dims
        )));
    }
    let (sizes, starts) = ka_schedule(plan);
    let map = spatial_source_map(&sizes, &starts);
    let mut input_dims = vec![plan.rows, plan.cols];
    if let Some(l) = plan.channel_extent {
        input_dims.push(l);
    }
    invert_with_map(
        aug,
        &map,
        plan.channel_extent.unwrap_or(1),
        plan.rows * plan.cols,
        &input_dims,
    )
}

pub fn augment_mask_ka(mask: &ObservationMask, plan: &KaPlan) -> Result<ObservationMask> {
    check_ka_input(mask.dims(), plan)?;
    let (sizes, starts) = ka_schedule(plan);
    let map = spatial_source_map(&sizes, &starts);
    Ok(augment_mask_with_map(
        mask,
        &map,
        plan.channel_extent.unwrap_or(1),
        plan.rows * plan.cols,
        &plan.output_dims,
    ))
}

// ---------------------------------------------------------------------------
// Plain reshape
// ---------------------------------------------------------------------------

/// Relabels the flat buffer into `target_dims` (no data movement semantics
/// beyond the shared linearization).
pub fn apply_reshape(t: &DenseTensor, target_dims: &[usize]) -> Result<DenseTensor> {
    let target_len: usize = target_dims.iter().product();
    if target_dims.is_empty() || target_len != t.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot reshape {:?} ({} entries) into {target_dims:?} ({target_len} entries)",
            t.dims(),
            t.len()
        )));
    }
    DenseTensor::from_vec(target_dims, t.as_slice().to_vec())
}

/// Exact inverse of [`apply_reshape`].
pub fn invert_reshape(aug: &DenseTensor, original_dims: &[usize]) -> Result<DenseTensor> {
    apply_reshape(aug, original_dims)
}

/// Default reshape target: split each spatial extent into its most balanced
/// factor pair (ascending), keeping any channel extent; e.g. a 48 x 42 x 64
/// input becomes 6 x 8 x 6 x 7 x 64. Prime extents degrade to a 1 x p split.
pub fn balanced_reshape_dims(dims: &[usize]) -> Vec<usize> {
    let split = |n: usize| -> (usize, usize) {
        let mut best = (1, n);
        let mut a = 1;
        while a * a <= n {
            if n % a == 0 {
                best = (a, n / a);
            }
            a += 1;
        }
        best
    };
    let mut out = Vec::with_capacity(dims.len() + 2);
    for (i, &d) in dims.iter().enumerate() {
        if i < 2 {
            let (a, b) = split(d);
            out.push(a);
            out.push(b);
        } else {
            out.push(d);
        }
    }
    out
}

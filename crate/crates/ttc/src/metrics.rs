//! Recovery-quality metrics: relative error, PSNR, SSIM, per-mode error
//! maps, and a rank correlation used to check that evolving element weights
//! track reconstruction error.

use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use crate::tensor::{matricize, DenseTensor, ModeMatrix};

/// Side length of the square SSIM window (shrunk to the image when the image
/// is smaller).
const SSIM_WINDOW: usize = 8;
/// SSIM stabilizers for data in `[0, 1]`: `C1 = (K1·L)^2`, `C2 = (K2·L)^2`
/// with `K1 = 0.01`, `K2 = 0.03`, `L = 1`.
const SSIM_C1: f64 = 1e-4;
const SSIM_C2: f64 = 9e-4;
/// PSNR is reported as this ceiling when the mean squared error is zero (or
/// small enough to exceed it).
const PSNR_CAP_DB: f64 = 100.0;

/// Bundle of the three recovery scores. `ssim` is only defined for
/// image-like (order-2/3) tensors and stays `None` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub rse: f64,
    pub psnr: f64,
    pub ssim: Option<f64>,
}

/// Scores an estimate against the ground truth: relative error, PSNR with
/// peak 1.0 (data is normalized to `[0, 1]` at load), and SSIM when the
/// shape is image-like.
pub fn report(estimate: &DenseTensor, truth: &DenseTensor) -> Result<MetricsReport> {
    Ok(MetricsReport {
        rse: rse(estimate, truth)?,
        psnr: psnr(estimate, truth, 1.0)?,
        ssim: if (2..=3).contains(&truth.order()) {
            Some(ssim(estimate, truth)?)
        } else {
            None
        },
    })
}

fn check_same_shape(estimate: &DenseTensor, truth: &DenseTensor) -> Result<()> {
    if estimate.dims() != truth.dims() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: estimate {:?} vs reference {:?}",
            estimate.dims(),
            truth.dims()
        )));
    }
    Ok(())
}

/// Relative squared error `‖estimate − truth‖_F / ‖truth‖_F`.
pub fn rse(estimate: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    check_same_shape(estimate, truth)?;
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    for (&e, &t) in estimate.as_slice().iter().zip(truth.as_slice()) {
        diff_sq += (e - t) * (e - t);
        ref_sq += t * t;
    }
    if ref_sq == 0.0 {
        return Err(Error::InvalidArgument(
            "relative error is undefined against an all-zero reference".into(),
        ));
    }
    Ok((diff_sq / ref_sq).sqrt())
}

/// Peak signal-to-noise ratio in dB against the given peak value, capped at
/// 100 dB so identical inputs stay finite.
pub fn psnr(estimate: &DenseTensor, truth: &DenseTensor, peak: f64) -> Result<f64> {
    check_same_shape(estimate, truth)?;
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "peak must be positive and finite, got {peak}"
        )));
    }
    let n = truth.len() as f64;
    let mse: f64 = estimate
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(&e, &t)| (e - t) * (e - t))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Summed-area table with one padding row/column of zeros, so rectangle sums
/// become four lookups.
struct Sat {
    rows: usize,
    data: Vec<f64>,
}

impl Sat {
    /// `value(i, j)` is accumulated over `0 <= i < rows`, `0 <= j < cols`.
    fn build(rows: usize, cols: usize, mut value: impl FnMut(usize, usize) -> f64) -> Sat {
        let mut data = vec![0.0; (rows + 1) * (cols + 1)];
        for j in 0..cols {
            let mut row_sum = 0.0;
            for i in 0..rows {
                row_sum += value(i, j);
                data[(i + 1) + (j + 1) * (rows + 1)] = data[(i + 1) + j * (rows + 1)] + row_sum;
            }
        }
        Sat { rows, data }
    }

    /// Sum over `i in [i0, i1)`, `j in [j0, j1)`.
    fn rect(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let s = self.rows + 1;
        self.data[i1 + j1 * s] - self.data[i0 + j1 * s] - self.data[i1 + j0 * s]
            + self.data[i0 + j0 * s]
    }
}

fn ssim_channel(x: &[f64], y: &[f64], rows: usize, cols: usize) -> f64 {
    let at = |s: &[f64], i: usize, j: usize| s[i + j * rows];
    let sx = Sat::build(rows, cols, |i, j| at(x, i, j));
    let sy = Sat::build(rows, cols, |i, j| at(y, i, j));
    let sxx = Sat::build(rows, cols, |i, j| at(x, i, j) * at(x, i, j));
    let syy = Sat::build(rows, cols, |i, j| at(y, i, j) * at(y, i, j));
    let sxy = Sat::build(rows, cols, |i, j| at(x, i, j) * at(y, i, j));
    let wr = SSIM_WINDOW.min(rows);
    let wc = SSIM_WINDOW.min(cols);
    let npix = (wr * wc) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for j in 0..=cols - wc {
        for i in 0..=rows - wr {
            let (i1, j1) = (i + wr, j + wc);
            let mx = sx.rect(i, i1, j, j1) / npix;
            let my = sy.rect(i, i1, j, j1) / npix;
            let vx = sxx.rect(i, i1, j, j1) / npix - mx * mx;
            let vy = syy.rect(i, i1, j, j1) / npix - my * my;
            let cxy = sxy.rect(i, i1, j, j1) / npix - mx * my;
            let s = ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
            total += s;
            count += 1;
        }
    }
    total / count as f64
}

/// Mean structural similarity over uniformly weighted sliding windows.
/// Accepts a single-channel (order-2) or multi-channel (order-3, channel
/// last) image with values nominally in `[0, 1]`; channels are averaged.
pub fn ssim(estimate: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    check_same_shape(estimate, truth)?;
    let dims = truth.dims();
    if dims.len() != 2 && dims.len() != 3 {
        return Err(Error::UnsupportedShape(format!(
            "structural similarity needs an order-2 or order-3 image, got order {}",
            dims.len()
        )));
    }
    if !estimate.as_slice().iter().all(|v| v.is_finite())
        || !truth.as_slice().iter().all(|v| v.is_finite())
    {
        return Err(Error::InvalidArgument(
            "structural similarity needs finite inputs".into(),
        ));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let channels = if dims.len() == 3 { dims[2] } else { 1 };
    let plane = rows * cols;
    let mut total = 0.0;
    for ch in 0..channels {
        let x = &estimate.as_slice()[ch * plane..(ch + 1) * plane];
        let y = &truth.as_slice()[ch * plane..(ch + 1) * plane];
        total += ssim_channel(x, y, rows, cols);
    }
    Ok(total / channels as f64)
}

/// Element-wise absolute error between each mode approximation and the
/// matching matricization of the reference tensor. With a mask, entries at
/// known positions are zeroed so only the imputed values are compared.
pub fn per_mode_abs_error(
    truth: &DenseTensor,
    estimates: &[ModeMatrix],
    mask: Option<&ObservationMask>,
) -> Result<Vec<ModeMatrix>> {
    if let Some(m) = mask {
        if m.dims() != truth.dims() {
            return Err(Error::InvalidArgument(format!(
                "mask shape {:?} does not match reference shape {:?}",
                m.dims(),
                truth.dims()
            )));
        }
    }
    estimates
        .iter()
        .map(|e| {
            if e.parent_dims != truth.dims() {
                return Err(Error::InvalidArgument(format!(
                    "mode approximation was built for shape {:?}, reference is {:?}",
                    e.parent_dims, truth.dims()
                )));
            }
            let mut delta = matricize(truth, e.mode)?;
            for (idx, (d, &a)) in delta
                .mat
                .as_mut_slice()
                .iter_mut()
                .zip(e.mat.as_slice())
                .enumerate()
            {
                *d = if mask.is_some_and(|m| m.as_slice()[idx]) {
                    0.0
                } else {
                    (*d - a).abs()
                };
            }
            Ok(delta)
        })
        .collect()
}

/// Ranks with ties averaged (midranks), 1-based.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share the average of ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation between final element weights and absolute
/// errors at the same positions, with midranks for ties. Returns 0 when
/// either side is constant (no ordering to correlate).
pub fn weight_error_correlation(weights: &[f64], errors: &[f64]) -> Result<f64> {
    if weights.len() != errors.len() {
        return Err(Error::InvalidArgument(format!(
            "weight and error lists differ in length: {} vs {}",
            weights.len(),
            errors.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::InvalidArgument(
            "correlation of empty lists is undefined".into(),
        ));
    }
    if !weights.iter().chain(errors).all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(
            "correlation needs finite inputs".into(),
        ));
    }
    let rw = midranks(weights);
    let re = midranks(errors);
    let n = rw.len() as f64;
    let mw = rw.iter().sum::<f64>() / n;
    let me = re.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vw = 0.0;
    let mut ve = 0.0;
    for (&a, &b) in rw.iter().zip(&re) {
        cov += (a - mw) * (b - me);
        vw += (a - mw) * (a - mw);
        ve += (b - me) * (b - me);
    }
    if vw == 0.0 || ve == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vw * ve).sqrt())
}

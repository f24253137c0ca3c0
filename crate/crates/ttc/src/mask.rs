//! Observation masks: which tensor entries are known.
//!
//! A mask shares its tensor's extents and flat linearization, so the flat
//! buffer doubles as the column-major mask of any mode-k matricization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Boolean indicator of observed entries, shaped like its tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    dims: Vec<usize>,
    known: Vec<bool>,
}

impl ObservationMask {
    /// Mask with every entry observed.
    pub fn all_known(dims: &[usize]) -> Result<Self> {
        let len = DenseTensor::zeros(dims)?.len();
        Ok(ObservationMask {
            dims: dims.to_vec(),
            known: vec![true; len],
        })
    }

    /// Wraps an explicit indicator buffer (same linearization as the tensor).
    pub fn from_vec(dims: &[usize], known: Vec<bool>) -> Result<Self> {
        let len = DenseTensor::zeros(dims)?.len();
        if known.len() != len {
            return Err(Error::InvalidArgument(format!(
                "mask buffer holds {} entries but dims {:?} require {}",
                known.len(),
                dims,
                len
            )));
        }
        Ok(ObservationMask {
            dims: dims.to_vec(),
            known,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    /// Whether the entry at a flat offset is observed.
    pub fn is_known(&self, flat: usize) -> bool {
        self.known[flat]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.known
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.known
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().filter(|&&k| k).count()
    }

    pub fn missing_count(&self) -> usize {
        self.len() - self.known_count()
    }

    /// Flat offsets of the missing entries, ascending.
    pub fn missing_offsets(&self) -> Vec<usize> {
        self.known
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| (!k).then_some(i))
            .collect()
    }

    /// Zeroes a copy of `t` at every unobserved position.
    pub fn apply(&self, t: &DenseTensor) -> Result<DenseTensor> {
        if t.dims() != self.dims.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "mask dims {:?} do not match tensor dims {:?}",
                self.dims,
                t.dims()
            )));
        }
        let data = t
            .as_slice()
            .iter()
            .zip(&self.known)
            .map(|(&v, &k)| if k { v } else { 0.0 })
            .collect();
        DenseTensor::from_vec(&self.dims, data)
    }
}

/// Samples a uniform-at-random mask hiding exactly
/// `round(missing_rate * total)` entries; deterministic in `seed`.
pub fn sample_mask(dims: &[usize], missing_rate: f64, seed: u64) -> Result<ObservationMask> {
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(Error::InvalidArgument(format!(
            "missing rate must lie in [0, 1), got {missing_rate}"
        )));
    }
    let mut mask = ObservationMask::all_known(dims)?;
    let total = mask.len();
    let hide = (missing_rate * total as f64).round() as usize;
    let mut offsets: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hidden, _) = offsets.partial_shuffle(&mut rng, hide);
    for &o in hidden.iter() {
        mask.known[o] = false;
    }
    Ok(mask)
}

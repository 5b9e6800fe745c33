//! Reproducible bond weights from a counter-based generator.
//!
//! The two bonds leaving a site `(n, x)` along axis `i` share one
//! Philox2x64-10 block: the counter packs the 32-bit words
//! `(4n + i, x_1, x_2, x_3)` and the key is the 64-bit seed. The low half of the output drives the `-` bond and the
//! high half the `+` bond; each 64-bit half becomes a uniform variate in
//! `(0,1)` and then a weight through the law's quantile.
//!
//! Distinct bonds get distinct counters while `|n| < 2^29`.

use thiserror::Error;

use crate::lattice::{Bond, LatticeError, Sign, Step};
use crate::law::PassageLaw;

const PHILOX_M: u64 = 0xD2B7_4407_B1CE_6E93;
const PHILOX_W: u64 = 0x9E37_79B9_7F4A_7C15;

/// Largest supported transverse dimension of the keyed field.
pub const MAX_FIELD_DIM: usize = 3;

/// Weights are rounded to multiples of this so sums along paths of up to
/// `2^20` bonds are exact in `f64`.
pub const WEIGHT_QUANTUM: f64 = 1.0 / (1u64 << 30) as f64;

/// Philox2x64 with 10 rounds.
pub fn philox2x64(ctr: [u64; 2], key: u64) -> [u64; 2] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k = k.wrapping_add(PHILOX_W);
        }
        let p = u128::from(PHILOX_M) * u128::from(c[0]);
        c = [((p >> 64) as u64) ^ c[1] ^ k, p as u64];
    }
    c
}

/// Maps 64 random bits to `(k + 1/2)·2^-52` with `k` the top 52 bits, so
/// the variate and its complement `1 - u` are both exact.
#[inline]
pub fn bits_to_open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("weight fields support 1 <= d <= {MAX_FIELD_DIM}, got {0}")]
    Dimension(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Anything that assigns a nonnegative weight to each bond.
///
/// A bond is addressed by its lower site `(layer, from)` and the step taken.
pub trait BondWeights {
    fn dim(&self) -> usize;
    fn step_weight(&self, layer: i32, from: &[i32], step: Step) -> f64;

    /// Weights of the `2d` bonds leaving `(layer, from)`, in canonical step
    /// order.
    fn site_weights(&self, layer: i32, from: &[i32], out: &mut [f64]) {
        for (k, step) in Step::all(self.dim()).enumerate() {
            out[k] = self.step_weight(layer, from, step);
        }
    }

    fn bond_weight(&self, bond: &Bond) -> f64 {
        self.step_weight(bond.from_site().layer, &bond.from_site().transverse, bond.step())
    }
}

impl<W: BondWeights + ?Sized> BondWeights for &W {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn step_weight(&self, layer: i32, from: &[i32], step: Step) -> f64 {
        (**self).step_weight(layer, from, step)
    }
    fn site_weights(&self, layer: i32, from: &[i32], out: &mut [f64]) {
        (**self).site_weights(layer, from, out)
    }
}

/// The i.i.d. field `ω_b` for one seed and law.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightField {
    seed: u64,
    law: PassageLaw,
    d: usize,
}

impl WeightField {
    pub fn new(seed: u64, law: PassageLaw, d: usize) -> Result<Self, FieldError> {
        if d == 0 || d > MAX_FIELD_DIM {
            return Err(FieldError::Dimension(d));
        }
        Ok(Self { seed, law, d })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn law(&self) -> &PassageLaw {
        &self.law
    }

    #[inline]
    fn block(&self, layer: i32, from: &[i32], axis: usize) -> [u64; 2] {
        let mut words = [(layer as u32).wrapping_mul(4).wrapping_add(axis as u32), 0, 0, 0];
        for (i, &x) in from.iter().enumerate() {
            words[i + 1] = x as u32;
        }
        let ctr = [u64::from(words[0]) << 32 | u64::from(words[1]), u64::from(words[2]) << 32 | u64::from(words[3])];
        philox2x64(ctr, self.seed)
    }

    /// Uniform variate behind the bond leaving `(layer, from)` by `step`.
    #[inline]
    pub fn variate(&self, layer: i32, from: &[i32], step: Step) -> f64 {
        let out = self.block(layer, from, step.axis as usize);
        bits_to_open_unit(out[usize::from(step.sign == Sign::Plus)])
    }

    #[inline]
    fn transform(&self, u: f64) -> f64 {
        let w = match self.law {
            PassageLaw::Exponential { rate } => -libm::log(1.0 - u) / rate,
            ref law => law.quantile(u),
        };
        quantize(w)
    }

    /// `ω_b` for a validated bond.
    pub fn weight(&self, bond: &Bond) -> Result<f64, FieldError> {
        let from = bond.from_site();
        if from.dim() != self.d {
            return Err(LatticeError::DimensionMismatch { expected: self.d, found: from.dim() }.into());
        }
        Ok(self.step_weight(from.layer, &from.transverse, bond.step()))
    }
}

/// Rounds to the nearest multiple of [`WEIGHT_QUANTUM`]: adding `2^22`
/// leaves exactly 30 fractional bits for weights below `2^22`.
#[inline]
fn quantize(w: f64) -> f64 {
    const SHIFT: f64 = (1u64 << 22) as f64;
    if w < SHIFT {
        (w + SHIFT) - SHIFT
    } else {
        libm::round(w / WEIGHT_QUANTUM) * WEIGHT_QUANTUM
    }
}

impl BondWeights for WeightField {
    fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    fn step_weight(&self, layer: i32, from: &[i32], step: Step) -> f64 {
        self.transform(self.variate(layer, from, step))
    }

    fn site_weights(&self, layer: i32, from: &[i32], out: &mut [f64]) {
        if let PassageLaw::Exponential { rate } = self.law {
            for axis in 0..self.d {
                let b = self.block(layer, from, axis);
                out[2 * axis] = quantize(-libm::log(1.0 - bits_to_open_unit(b[0])) / rate);
                out[2 * axis + 1] = quantize(-libm::log(1.0 - bits_to_open_unit(b[1])) / rate);
            }
            return;
        }
        for axis in 0..self.d {
            let b = self.block(layer, from, axis);
            out[2 * axis] = self.transform(bits_to_open_unit(b[0]));
            out[2 * axis + 1] = self.transform(bits_to_open_unit(b[1]));
        }
    }
}

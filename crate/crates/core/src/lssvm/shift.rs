//! Feature map of the latent-shift task.
//!
//! An example is a 2-D base point `x`; the latent value selects a horizontal
//! shift `s * {-1, 0, +1}`. For label `y`, the shifted point `q` is encoded
//! as `(q1, q2, |q|^2, 1)` in block `y` of a `|Y| * 4` vector, zeros
//! elsewhere. The quadratic coordinate lets a class model score distance to
//! a prototype, so the best shift depends on where the example sits.

use super::StructuredExample;
use crate::error::Result;

/// Shift multipliers indexed by latent value.
pub const SHIFTS: [f64; 3] = [-1.0, 0.0, 1.0];

pub const BLOCK_DIM: usize = 4;

pub fn block_features(q: [f64; 2]) -> [f64; BLOCK_DIM] {
    [q[0], q[1], q[0] * q[0] + q[1] * q[1], 1.0]
}

/// Latent index of a shift multiplier in `{-1, 0, 1}`.
pub fn latent_index(shift: i8) -> usize {
    (shift + 1) as usize
}

pub fn shift_example(x: [f64; 2], label: usize, label_count: usize, magnitude: f64) -> Result<StructuredExample> {
    StructuredExample::tabulate(label, label_count, SHIFTS.len(), label_count * BLOCK_DIM, |y, z| {
        let q = [x[0] + SHIFTS[z] * magnitude, x[1]];
        let mut f = vec![0.0; label_count * BLOCK_DIM];
        f[y * BLOCK_DIM..(y + 1) * BLOCK_DIM].copy_from_slice(&block_features(q));
        f
    })
}

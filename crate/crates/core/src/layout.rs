//! Block partition geometry shared by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::IntraMode;

/// Element precision of sketch outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    F32,
    F64,
}

/// Partition of the input/output coordinates into M contiguous blocks,
/// with the tile geometry used by the tiled kernel.
///
/// After construction, `d = m * bc`, `k = m * br` and `bc % tk == 0` hold
/// exactly; padded coordinates (beyond `d_orig` / `k_orig`) are semantically
/// zero. Immutable and freely shareable across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    /// Padded input dimension, `m * bc`.
    pub d: usize,
    /// Padded sketch dimension, `m * br`.
    pub k: usize,
    /// Block count.
    pub m: usize,
    /// Input block size.
    pub bc: usize,
    /// Output block size.
    pub br: usize,
    /// Row-tile height (divides `bc`).
    pub tk: usize,
    /// Column-tile width.
    pub tn: usize,
    /// Input dimension before padding.
    pub d_orig: usize,
    /// Sketch dimension before padding.
    pub k_orig: usize,
}

/// Default row-tile height.
pub const DEFAULT_TK: usize = 32;
/// Default column-tile width.
pub const DEFAULT_TN: usize = 64;

/// Build a layout, padding `d` up to `m * ceil(d/m)` (with `bc` further
/// rounded up to a multiple of `tk`) and `k` up to `m * ceil(k/m)`.
pub fn make_layout(
    d_orig: usize,
    k_orig: usize,
    m: usize,
    tk: usize,
    tn: usize,
) -> Result<BlockLayout> {
    if m == 0 {
        return Err(Error::InvalidLayout("M must be >= 1".into()));
    }
    if tk == 0 || tn == 0 {
        return Err(Error::InvalidLayout("tile sizes must be >= 1".into()));
    }
    if d_orig == 0 || k_orig == 0 {
        return Err(Error::InvalidLayout("dimensions must be >= 1".into()));
    }
    let bc = d_orig.div_ceil(m).div_ceil(tk) * tk;
    let br = k_orig.div_ceil(m);
    let layout = BlockLayout {
        d: m * bc,
        k: m * br,
        m,
        bc,
        br,
        tk,
        tn,
        d_orig,
        k_orig,
    };
    debug_assert!(layout.d >= d_orig && layout.k >= k_orig);
    debug_assert_eq!(layout.bc % tk, 0);
    Ok(layout)
}

/// Layout with the default tile sizes.
pub fn make_layout_default(d_orig: usize, k_orig: usize, m: usize) -> Result<BlockLayout> {
    let tk = DEFAULT_TK.min(d_orig.div_ceil(m));
    make_layout(d_orig, k_orig, m, tk.max(1), DEFAULT_TN)
}

/// Sketch family parameters: block degree, intra-block sparsity, seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchParams {
    /// Block degree: number of wiring permutations.
    pub kappa: usize,
    /// Nonzeros per column inside each selected block.
    pub s: usize,
    /// 64-bit master seed.
    pub seed: u64,
    pub intra_mode: IntraMode,
    pub precision: Precision,
}

impl SketchParams {
    pub fn new(kappa: usize, s: usize, seed: u64) -> Self {
        SketchParams {
            kappa,
            s,
            seed,
            intra_mode: IntraMode::AffineUnique,
            precision: Precision::F64,
        }
    }

    pub fn with_mode(mut self, mode: IntraMode) -> Self {
        self.intra_mode = mode;
        self
    }

    /// Check the parameters against a layout. Edge-disjointness requires
    /// `kappa <= m`; the intra-block generators need `s <= br` plus the
    /// per-mode divisibility rules.
    pub fn validate(&self, layout: &BlockLayout) -> Result<()> {
        if self.kappa == 0 || self.kappa > layout.m {
            return Err(Error::InvalidParams(format!(
                "kappa = {} must be in [1, M = {}]",
                self.kappa, layout.m
            )));
        }
        if self.s == 0 || self.s > layout.br {
            return Err(Error::InvalidParams(format!(
                "s = {} must be in [1, Br = {}]",
                self.s, layout.br
            )));
        }
        match self.intra_mode {
            IntraMode::RowPartitioned => {
                if layout.br % self.s != 0 {
                    return Err(Error::InvalidParams(format!(
                        "RowPartitioned mode requires Br % s = 0 (Br = {}, s = {})",
                        layout.br, self.s
                    )));
                }
            }
            IntraMode::AffineUnique => {
                // Non-power-of-two Br falls back to chunking, which needs
                // Br % s = 0; biased modulo permutations are rejected.
                if !layout.br.is_power_of_two() && layout.br % self.s != 0 {
                    return Err(Error::InvalidParams(format!(
                        "AffineUnique mode requires power-of-two Br or Br % s = 0 \
                         (Br = {}, s = {})",
                        layout.br, self.s
                    )));
                }
            }
        }
        Ok(())
    }
}

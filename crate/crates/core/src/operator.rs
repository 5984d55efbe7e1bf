//! The sketch operator: materialization, the tiled/sliced apply kernel, and
//! the gather-only block-row variant.
//!
//! The apply kernel mirrors a shared-memory GPU kernel on the CPU: one
//! private accumulator tile per (output block, column tile), a fixed
//! accumulation order (wiring order, then ascending input row), scaling by
//! 1/sqrt(kappa*s) once at the end, and a single write-out per tile. Output
//! blocks are data-parallel and disjoint, so results are bitwise identical
//! for any worker count.

use std::ops::{AddAssign, Mul, SubAssign};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hashing::{counter, intra_block_pattern, uniform_below, word, Stream};
use crate::layout::{BlockLayout, SketchParams};
use crate::matrix::{DenseMatrix, Element};
use crate::wiring::Wiring;

/// Largest k*d (padded) allowed by [`SketchOperator::materialize`].
pub const MATERIALIZE_LIMIT: usize = 1 << 28;

/// Scalar type usable by the sketch kernels.
pub trait KernelScalar: Element + AddAssign + SubAssign + Mul<Output = Self> {}
impl<T> KernelScalar for T where T: Element + AddAssign + SubAssign + Mul<Output = T> {}

/// A block-permuted sparse sketch S in R^{k x d}, defined implicitly by a
/// layout, parameters and a block wiring. Every column of S has exactly
/// kappa*s nonzeros of magnitude 1/sqrt(kappa*s) when the wiring is
/// edge-disjoint.
#[derive(Debug, Clone)]
pub struct SketchOperator {
    pub layout: BlockLayout,
    pub params: SketchParams,
    pub wiring: Wiring,
}

impl SketchOperator {
    /// Operator with the seed-derived iterated-affine wiring (always
    /// edge-disjoint: a full-cycle map has no orbit shorter than M).
    pub fn new(layout: BlockLayout, params: SketchParams) -> Result<Self> {
        params.validate(&layout)?;
        let wiring = Wiring::iterated_affine(params.seed, layout.m, params.kappa)?;
        Ok(SketchOperator {
            layout,
            params,
            wiring,
        })
    }

    /// Operator with a caller-supplied wiring (e.g. explicit tables). The
    /// per-column nonzero count is only guaranteed for edge-disjoint wirings.
    pub fn with_wiring(layout: BlockLayout, params: SketchParams, wiring: Wiring) -> Result<Self> {
        params.validate(&layout)?;
        if wiring.m != layout.m || wiring.kappa != params.kappa {
            return Err(Error::InvalidParams(format!(
                "wiring is on (M = {}, kappa = {}), layout/params need (M = {}, kappa = {})",
                wiring.m, wiring.kappa, layout.m, params.kappa
            )));
        }
        Ok(SketchOperator {
            layout,
            params,
            wiring,
        })
    }

    /// Dense padded k x d matrix with the exact entries of S. Guarded by
    /// [`MATERIALIZE_LIMIT`]; intended for testing and small baselines only.
    pub fn materialize(&self) -> Result<DenseMatrix<f64>> {
        self.materialize_as::<f64>()
    }

    pub fn materialize_as<T: KernelScalar>(&self) -> Result<DenseMatrix<T>> {
        let l = &self.layout;
        if l.k * l.d > MATERIALIZE_LIMIT {
            return Err(Error::MaterializeGuard(l.k * l.d, MATERIALIZE_LIMIT));
        }
        let inv = 1.0 / ((self.params.kappa * self.params.s) as f64).sqrt();
        let (pos, neg) = (T::from_f64(inv), T::from_f64(-inv));
        let mut s_mat = DenseMatrix::zeros(l.k, l.d);
        let mut nbrs = Vec::new();
        let mut dests = Vec::new();
        let mut signs = Vec::new();
        for g in 0..l.m {
            self.wiring.neighborhood_into(g, &mut nbrs);
            for &h in &nbrs {
                let h = h as usize;
                for u in 0..l.bc {
                    intra_block_pattern(
                        self.params.seed,
                        g,
                        h,
                        u,
                        l.br,
                        self.params.s,
                        self.params.intra_mode,
                        &mut dests,
                        &mut signs,
                    );
                    let col = h * l.bc + u;
                    for (q, &dst) in dests.iter().enumerate() {
                        let row = g * l.br + dst as usize;
                        let v = if signs[q] > 0 { pos } else { neg };
                        let cur = s_mat.get(row, col);
                        let mut acc = cur;
                        acc += v;
                        s_mat.set(row, col, acc);
                    }
                }
            }
        }
        Ok(s_mat)
    }

    /// Y = S A for a d_orig x n input, returning k_orig x n. Single-slice
    /// tiled kernel; `workers` sets the rayon pool size without changing the
    /// result in any bit.
    pub fn apply_tiled<T: KernelScalar>(
        &self,
        a: &DenseMatrix<T>,
        workers: usize,
    ) -> Result<DenseMatrix<T>> {
        self.apply_sliced(a, 1, workers)
    }

    /// As [`Self::apply_tiled`], splitting each input block into `slices` row
    /// ranges accumulated into per-slice partial tiles and reduced in slice
    /// order. `slices` must cut each block into whole row tiles. The
    /// `slices = 1` path is the tiled kernel itself.
    pub fn apply_sliced<T: KernelScalar>(
        &self,
        a: &DenseMatrix<T>,
        slices: usize,
        workers: usize,
    ) -> Result<DenseMatrix<T>> {
        let l = &self.layout;
        if a.rows != l.d_orig {
            return Err(Error::DimensionMismatch {
                what: "input rows".into(),
                expected: l.d_orig,
                got: a.rows,
            });
        }
        if slices == 0 || l.bc % slices != 0 || (l.bc / slices) % l.tk != 0 {
            return Err(Error::InvalidArgument(format!(
                "slices = {slices} must cut Bc = {} into whole row tiles of Tk = {}",
                l.bc, l.tk
            )));
        }
        if cfg!(debug_assertions) {
            if let Some((row, col)) = a.first_non_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        let pool = build_pool(workers)?;
        let mut y = pool.install(|| self.apply_padded(a, slices));
        y.data.truncate(l.k_orig * a.cols);
        y.rows = l.k_orig;
        Ok(y)
    }

    fn apply_padded<T: KernelScalar>(&self, a: &DenseMatrix<T>, slices: usize) -> DenseMatrix<T> {
        let l = self.layout;
        let params = self.params;
        let n = a.cols;
        let inv = T::from_f64(1.0 / ((params.kappa * params.s) as f64).sqrt());
        let rows_per_slice = l.bc / slices;
        let mut y = DenseMatrix::zeros(l.k, n);
        y.data
            .par_chunks_mut(l.br * n)
            .enumerate()
            .for_each(|(g, out)| {
                let mut nbrs = Vec::with_capacity(params.kappa);
                self.wiring.neighborhood_into(g, &mut nbrs);
                let mut dests = Vec::with_capacity(params.s);
                let mut signs = Vec::with_capacity(params.s);
                let mut acc = vec![T::zero(); l.br * l.tn];
                let mut partial = vec![T::zero(); l.br * l.tn];
                let mut c0 = 0;
                while c0 < n {
                    let tw = l.tn.min(n - c0);
                    let acc = &mut acc[..l.br * tw];
                    acc.fill(T::zero());
                    for t in 0..slices {
                        let u_range = t * rows_per_slice..(t + 1) * rows_per_slice;
                        if slices == 1 {
                            accumulate_slice(
                                acc, a, &l, &params, g, &nbrs, u_range, c0, tw, &mut dests,
                                &mut signs,
                            );
                        } else {
                            let partial = &mut partial[..l.br * tw];
                            partial.fill(T::zero());
                            accumulate_slice(
                                partial, a, &l, &params, g, &nbrs, u_range, c0, tw, &mut dests,
                                &mut signs,
                            );
                            for (av, &pv) in acc.iter_mut().zip(partial.iter()) {
                                *av += pv;
                            }
                        }
                    }
                    for r in 0..l.br {
                        let orow = &mut out[r * n + c0..r * n + c0 + tw];
                        for (o, &v) in orow.iter_mut().zip(&acc[r * tw..(r + 1) * tw]) {
                            *o = v * inv;
                        }
                    }
                    c0 += tw;
                }
            });
        y
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate_slice<T: KernelScalar>(
    buf: &mut [T],
    a: &DenseMatrix<T>,
    l: &BlockLayout,
    params: &SketchParams,
    g: usize,
    nbrs: &[u32],
    u_range: std::ops::Range<usize>,
    c0: usize,
    tw: usize,
    dests: &mut Vec<u32>,
    signs: &mut Vec<i8>,
) {
    for &h in nbrs {
        let h = h as usize;
        for u in u_range.clone() {
            let hr = h * l.bc + u;
            if hr >= l.d_orig {
                continue; // padded input rows are zero
            }
            intra_block_pattern(
                params.seed,
                g,
                h,
                u,
                l.br,
                params.s,
                params.intra_mode,
                dests,
                signs,
            );
            let arow = &a.row(hr)[c0..c0 + tw];
            for (q, &dst) in dests.iter().enumerate() {
                let orow = &mut buf[dst as usize * tw..(dst as usize + 1) * tw];
                if signs[q] > 0 {
                    for (o, &x) in orow.iter_mut().zip(arow) {
                        *o += x;
                    }
                } else {
                    for (o, &x) in orow.iter_mut().zip(arow) {
                        *o -= x;
                    }
                }
            }
        }
    }
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// The kappa distinct blocks gathered by output block g in the block-row
/// variant (rejection-sampled without replacement, independently per g).
pub fn blockrow_neighborhood(layout: &BlockLayout, params: &SketchParams, g: usize) -> Vec<u32> {
    let base = counter(params.seed, Stream::BlockRowNeighbors, g, 0, 0);
    let mut j = 0u64;
    let mut out: Vec<u32> = Vec::with_capacity(params.kappa);
    while out.len() < params.kappa {
        let cand = uniform_below(base, &mut j, layout.m as u64) as u32;
        if !out.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

/// Gather-only sketch variant: each output row in block g reads s entries
/// (sampled with replacement) from each of the kappa blocks gathered by g.
/// Unbiased for squared norms thanks to the extra sqrt(d/k) rescale, but
/// with no column-coverage guarantee.
pub fn apply_blockrow<T: KernelScalar>(
    layout: &BlockLayout,
    params: &SketchParams,
    a: &DenseMatrix<T>,
    workers: usize,
) -> Result<DenseMatrix<T>> {
    let l = *layout;
    if params.kappa == 0 || params.kappa > l.m {
        return Err(Error::InvalidParams(format!(
            "kappa = {} must be in [1, M = {}]",
            params.kappa, l.m
        )));
    }
    if params.s == 0 {
        return Err(Error::InvalidParams("s must be >= 1".into()));
    }
    if a.rows != l.d_orig {
        return Err(Error::DimensionMismatch {
            what: "input rows".into(),
            expected: l.d_orig,
            got: a.rows,
        });
    }
    if cfg!(debug_assertions) {
        if let Some((row, col)) = a.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    let n = a.cols;
    let scale = T::from_f64(
        (1.0 / ((params.kappa * params.s) as f64).sqrt()) * ((l.d as f64) / (l.k as f64)).sqrt(),
    );
    let pool = build_pool(workers)?;
    let mut y = DenseMatrix::zeros(l.k, n);
    pool.install(|| {
        y.data
            .par_chunks_mut(l.br * n)
            .enumerate()
            .for_each(|(g, out)| {
                let nbrs = blockrow_neighborhood(&l, params, g);
                let mut acc = vec![T::zero(); l.br * l.tn];
                let mut c0 = 0;
                while c0 < n {
                    let tw = l.tn.min(n - c0);
                    let acc = &mut acc[..l.br * tw];
                    acc.fill(T::zero());
                    for &h in &nbrs {
                        let h = h as usize;
                        for r in 0..l.br {
                            let base = counter(params.seed, Stream::BlockRowPattern, g, h, r);
                            let orow = &mut acc[r * tw..(r + 1) * tw];
                            for t in 0..params.s as u64 {
                                let i = (word(base, 2 * t) % l.bc as u64) as usize;
                                let hr = h * l.bc + i;
                                if hr >= l.d_orig {
                                    continue;
                                }
                                let arow = &a.row(hr)[c0..c0 + tw];
                                if word(base, 2 * t + 1) & 1 == 0 {
                                    for (o, &x) in orow.iter_mut().zip(arow) {
                                        *o += x;
                                    }
                                } else {
                                    for (o, &x) in orow.iter_mut().zip(arow) {
                                        *o -= x;
                                    }
                                }
                            }
                        }
                    }
                    for r in 0..l.br {
                        let orow = &mut out[r * n + c0..r * n + c0 + tw];
                        for (o, &v) in orow.iter_mut().zip(&acc[r * tw..(r + 1) * tw]) {
                            *o = v * scale;
                        }
                    }
                    c0 += tw;
                }
            });
    });
    y.data.truncate(l.k_orig * n);
    y.rows = l.k_orig;
    Ok(y)
}

/// Zero-pad a matrix to `rows` rows (for comparing against the padded
/// materialized operator).
pub fn pad_rows<T: Element>(a: &DenseMatrix<T>, rows: usize) -> DenseMatrix<T> {
    assert!(rows >= a.rows);
    let mut out = DenseMatrix::zeros(rows, a.cols);
    out.data[..a.data.len()].copy_from_slice(&a.data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_gaussian;
    use crate::hashing::IntraMode;
    use crate::layout::make_layout;
    use crate::matrix::matmul;

    fn small_op(seed: u64, kappa: usize, s: usize, mode: IntraMode) -> SketchOperator {
        let l = make_layout(40, 24, 4, 2, 8).unwrap(); // bc = 10, br = 6
        let p = SketchParams::new(kappa, s, seed).with_mode(mode);
        SketchOperator::new(l, p).unwrap()
    }

    #[test]
    fn apply_matches_materialized_oracle() {
        for (kappa, s) in [(1, 1), (2, 2), (2, 3), (4, 6)] {
            let op = small_op(7, kappa, s, IntraMode::RowPartitioned);
            let a = gen_gaussian(40, 5, 11);
            let s_mat = op.materialize().unwrap();
            let mut oracle = matmul(&s_mat, &pad_rows(&a, op.layout.d));
            oracle.data.truncate(op.layout.k_orig * a.cols);
            oracle.rows = op.layout.k_orig;
            let y = op.apply_tiled(&a, 1).unwrap();
            assert!(
                y.rel_frobenius_error(&oracle) <= 1e-12,
                "kappa={kappa} s={s} err={}",
                y.rel_frobenius_error(&oracle)
            );
        }
    }

    #[test]
    fn apply_matches_oracle_with_padding() {
        // d = 101 pads to 104, k = 13 pads to 16.
        let l = make_layout(101, 13, 4, 13, 8).unwrap();
        let p = SketchParams::new(2, 2, 5).with_mode(IntraMode::RowPartitioned);
        let op = SketchOperator::new(l, p).unwrap();
        let a = gen_gaussian(101, 3, 2);
        let s_mat = op.materialize().unwrap();
        let mut oracle = matmul(&s_mat, &pad_rows(&a, l.d));
        oracle.data.truncate(l.k_orig * a.cols);
        oracle.rows = l.k_orig;
        let y = op.apply_tiled(&a, 1).unwrap();
        assert_eq!(y.rows, 13);
        assert!(y.rel_frobenius_error(&oracle) <= 1e-12);
    }

    #[test]
    fn sliced_one_is_bitwise_tiled_and_multi_slice_agrees() {
        let op = small_op(3, 2, 2, IntraMode::RowPartitioned);
        let a = gen_gaussian(40, 17, 4);
        let tiled = op.apply_tiled(&a, 1).unwrap();
        let s1 = op.apply_sliced(&a, 1, 1).unwrap();
        assert_eq!(tiled.data, s1.data);
        let s5 = op.apply_sliced(&a, 5, 1).unwrap(); // bc = 10, tk = 2
        assert!(s5.rel_frobenius_error(&tiled) <= 1e-12);
        // 4 slices would split mid-tile
        assert!(op.apply_sliced(&a, 4, 1).is_err());
    }

    #[test]
    fn bitwise_deterministic_across_workers() {
        let op = small_op(9, 3, 2, IntraMode::RowPartitioned);
        let a = gen_gaussian(40, 9, 8);
        let y1 = op.apply_tiled(&a, 1).unwrap();
        for w in [2, 4, 8] {
            let yw = op.apply_tiled(&a, w).unwrap();
            assert_eq!(y1.data, yw.data, "workers = {w}");
        }
    }

    #[test]
    fn column_structure_exact() {
        for (mode, s_param) in [
            (IntraMode::RowPartitioned, 4usize),
            (IntraMode::AffineUnique, 3),
        ] {
            // br = 8 (power of two): AffineUnique allows any s; chunking
            // needs s | 8.
            let l = make_layout(24, 32, 4, 2, 8).unwrap();
            assert_eq!(l.br, 8);
            let kappa = 2usize;
            let op =
                SketchOperator::new(l, SketchParams::new(kappa, s_param, 1).with_mode(mode))
                    .unwrap();
            let m = op.materialize().unwrap();
            let expect_mag = 1.0 / ((kappa * s_param) as f64).sqrt();
            for c in 0..l.d {
                let col = m.column(c);
                let nnz = col.iter().filter(|&&v| v != 0.0).count();
                assert_eq!(nnz, kappa * s_param, "mode {mode:?} col {c}");
                for v in col {
                    assert!(v == 0.0 || (v.abs() - expect_mag).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn kappa_one_is_block_diagonal_up_to_permutation() {
        let op = small_op(13, 1, 2, IntraMode::RowPartitioned);
        let l = op.layout;
        let m = op.materialize().unwrap();
        for g in 0..l.m {
            let h = op.wiring.neighborhood(g).unwrap()[0] as usize;
            for r in 0..l.br {
                for c in 0..l.d {
                    let v = m.get(g * l.br + r, c);
                    if v != 0.0 {
                        assert!(c / l.bc == h, "row block {g} touches column block {}", c / l.bc);
                    }
                }
            }
        }
    }

    #[test]
    fn signed_permutation_case_is_exact_isometry() {
        // M = d = k = 8, bc = br = 1, kappa = s = 1: S is a signed permutation.
        let l = make_layout(8, 8, 8, 1, 8).unwrap();
        let op = SketchOperator::new(l, SketchParams::new(1, 1, 21)).unwrap();
        let a = gen_gaussian(8, 3, 5);
        let y = op.apply_tiled(&a, 1).unwrap();
        for c in 0..3 {
            let xn: f64 = a.column(c).iter().map(|v| v * v).sum();
            let yn: f64 = y.column(c).iter().map(|v| v * v).sum();
            assert_eq!(xn, yn); // permutation + sign flips: exactly equal
        }
        let mut seen = std::collections::HashSet::new();
        let m = op.materialize().unwrap();
        for r in 0..8 {
            let row = m.row(r);
            let nz: Vec<usize> = (0..8).filter(|&c| row[c] != 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert!(row[nz[0]].abs() == 1.0);
            assert!(seen.insert(nz[0]));
        }
    }

    #[test]
    fn linearity() {
        let op = small_op(5, 2, 3, IntraMode::RowPartitioned);
        let a = gen_gaussian(40, 2, 1);
        let b = gen_gaussian(40, 2, 2);
        let mut combo = DenseMatrix::zeros(40, 2);
        for i in 0..combo.data.len() {
            combo.data[i] = 2.5 * a.data[i] - 0.75 * b.data[i];
        }
        let ya = op.apply_tiled(&a, 1).unwrap();
        let yb = op.apply_tiled(&b, 1).unwrap();
        let yc = op.apply_tiled(&combo, 1).unwrap();
        let mut expect = DenseMatrix::zeros(ya.rows, 2);
        for i in 0..expect.data.len() {
            expect.data[i] = 2.5 * ya.data[i] - 0.75 * yb.data[i];
        }
        assert!(yc.rel_frobenius_error(&expect) <= 1e-12);
    }

    #[test]
    fn f32_tracks_f64() {
        let op = small_op(2, 2, 2, IntraMode::RowPartitioned);
        let a64 = gen_gaussian(40, 4, 3);
        let a32 = DenseMatrix::<f32> {
            rows: a64.rows,
            cols: a64.cols,
            data: a64.data.iter().map(|&v| v as f32).collect(),
        };
        let y64 = op.apply_tiled(&a64, 1).unwrap();
        let y32 = op.apply_tiled(&a32, 1).unwrap();
        let y32up = y32.map_f64();
        assert!(y32up.rel_frobenius_error(&y64) < 1e-5);
    }

    #[test]
    fn dimension_and_worker_validation() {
        let op = small_op(1, 2, 2, IntraMode::RowPartitioned);
        let wrong = gen_gaussian(39, 2, 1);
        assert!(op.apply_tiled(&wrong, 1).is_err());
        let a = gen_gaussian(40, 2, 1);
        assert!(op.apply_tiled(&a, 0).is_err());
    }

    #[test]
    fn materialize_guard_trips() {
        let l = make_layout(1 << 15, 1 << 14, 16, 32, 64).unwrap();
        let op = SketchOperator::new(l, SketchParams::new(2, 2, 1)).unwrap();
        match op.materialize() {
            Err(Error::MaterializeGuard(size, limit)) => {
                assert!(size > limit);
            }
            other => panic!("expected guard error, got {:?}", other.map(|m| (m.rows, m.cols))),
        }
    }

    #[test]
    fn blockrow_neighborhoods_distinct_and_deterministic() {
        let l = make_layout(64, 32, 8, 4, 8).unwrap();
        let p = SketchParams::new(3, 2, 77);
        for g in 0..l.m {
            let n1 = blockrow_neighborhood(&l, &p, g);
            let n2 = blockrow_neighborhood(&l, &p, g);
            assert_eq!(n1, n2);
            let set: std::collections::HashSet<u32> = n1.iter().copied().collect();
            assert_eq!(set.len(), p.kappa);
            assert!(n1.iter().all(|&h| (h as usize) < l.m));
        }
    }

    #[test]
    fn blockrow_norm_unbiased_in_expectation() {
        let l = make_layout(32, 16, 8, 4, 8).unwrap();
        let x = gen_gaussian(32, 1, 99);
        let xsq: f64 = x.data.iter().map(|v| v * v).sum();
        let trials = 4000usize;
        let mut mean = 0.0;
        for t in 0..trials {
            let p = SketchParams::new(2, 2, crate::hashing::sub_seed(5, 0, t));
            let y = apply_blockrow(&l, &p, &x, 1).unwrap();
            mean += y.data.iter().map(|v| v * v).sum::<f64>();
        }
        mean /= trials as f64;
        let rel = (mean - xsq).abs() / xsq;
        assert!(rel < 0.05, "relative bias {rel}");
    }

    #[test]
    fn blockrow_deterministic_across_workers() {
        let l = make_layout(48, 24, 6, 4, 8).unwrap();
        let p = SketchParams::new(2, 3, 31);
        let a = gen_gaussian(48, 5, 1);
        let y1 = apply_blockrow(&l, &p, &a, 1).unwrap();
        let y4 = apply_blockrow(&l, &p, &a, 4).unwrap();
        assert_eq!(y1.data, y4.data);
        assert_eq!(y1.rows, 24);
    }
}

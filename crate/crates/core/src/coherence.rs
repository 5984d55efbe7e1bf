//! Block coherence and neighborhood coherence of subspaces and vectors,
//! plus the wiring-smoothing experiment.
//!
//! For an orthonormal U in R^{d x r} partitioned into M row blocks U^(h):
//!
//! ```text
//! mu_blk(U)      = M * max_h ||U^(h)||_2^2
//! mu_nbr(U; pi)  = (M / kappa) * max_g ||U_{N(g)}||_2^2
//! ```
//!
//! where U_{N(g)} stacks the blocks of the (multiset) neighborhood N(g) in
//! wiring order. Squared spectral norms of stacked blocks are computed as
//! the largest eigenvalue of the summed r x r block Grams, so the cost is
//! one small symmetric eigensolve per output block. Vector variants divide
//! by ||x||^2. For edge-disjoint wirings the sandwich
//! mu_blk/kappa <= mu_nbr <= mu_blk holds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::sub_seed;
use crate::layout::BlockLayout;
use crate::matrix::DenseMatrix;
use crate::wiring::{sample_uniform_wiring, Wiring};

/// Tolerance on max |U^T U - I| for inputs claimed orthonormal.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

/// Error if U's columns are not orthonormal to within [`ORTHONORMALITY_TOL`].
pub fn check_orthonormal(u: &DenseMatrix<f64>) -> Result<()> {
    let g = u.gram();
    let mut worst = 0.0f64;
    for i in 0..g.rows {
        for j in 0..g.cols {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g.get(i, j) - target).abs());
        }
    }
    if worst > ORTHONORMALITY_TOL {
        return Err(Error::NotOrthonormal(worst));
    }
    Ok(())
}

/// Orthonormal basis for the column space of `a` (thin QR).
pub fn orthonormalize(a: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let qr = a.to_na().qr();
    DenseMatrix::from_na(&qr.q())
}

/// Per-block r x r Grams A_h = U^(h)^T U^(h) over the layout's M row blocks.
/// Rows beyond `u.rows` (padding) contribute nothing.
pub fn block_grams(u: &DenseMatrix<f64>, layout: &BlockLayout) -> Result<Vec<DMatrix<f64>>> {
    if u.rows != layout.d_orig {
        return Err(Error::DimensionMismatch {
            what: "matrix rows vs layout d".into(),
            expected: layout.d_orig,
            got: u.rows,
        });
    }
    let r = u.cols;
    let mut grams = Vec::with_capacity(layout.m);
    for h in 0..layout.m {
        let lo = h * layout.bc;
        let hi = ((h + 1) * layout.bc).min(u.rows);
        let mut g = DMatrix::zeros(r, r);
        for row in lo..hi {
            let ur = u.row(row);
            for i in 0..r {
                if ur[i] == 0.0 {
                    continue;
                }
                for j in 0..r {
                    g[(i, j)] += ur[i] * ur[j];
                }
            }
        }
        grams.push(g);
    }
    Ok(grams)
}

fn lambda_max(g: &DMatrix<f64>) -> f64 {
    if g.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    if g.nrows() == 1 {
        return g[(0, 0)];
    }
    let eig = g.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b))
}

/// mu_blk(U) for orthonormal U.
pub fn mu_blk_matrix(u: &DenseMatrix<f64>, layout: &BlockLayout) -> Result<f64> {
    check_orthonormal(u)?;
    let grams = block_grams(u, layout)?;
    Ok(layout.m as f64 * grams.iter().map(lambda_max).fold(0.0, f64::max))
}

fn mu_nbr_from_grams(grams: &[DMatrix<f64>], wiring: &Wiring) -> f64 {
    let m = grams.len();
    debug_assert_eq!(wiring.m, m);
    let nonzero: Vec<bool> = grams.iter().map(|g| g.iter().any(|&v| v != 0.0)).collect();
    let r = grams[0].nrows();
    let mut nbrs = Vec::with_capacity(wiring.kappa);
    let mut worst = 0.0f64;
    let mut sum = DMatrix::zeros(r, r);
    for g in 0..m {
        wiring.neighborhood_into(g, &mut nbrs);
        if nbrs.iter().all(|&h| !nonzero[h as usize]) {
            continue;
        }
        sum.fill(0.0);
        for &h in &nbrs {
            sum += &grams[h as usize];
        }
        worst = worst.max(lambda_max(&sum));
    }
    (m as f64 / wiring.kappa as f64) * worst
}

/// mu_nbr(U; pi) for orthonormal U. Repeated neighbors (non-edge-disjoint
/// wirings) count with multiplicity.
pub fn mu_nbr_matrix(u: &DenseMatrix<f64>, layout: &BlockLayout, wiring: &Wiring) -> Result<f64> {
    check_orthonormal(u)?;
    if wiring.m != layout.m {
        return Err(Error::InvalidParams(format!(
            "wiring on M = {} blocks, layout has M = {}",
            wiring.m, layout.m
        )));
    }
    let grams = block_grams(u, layout)?;
    Ok(mu_nbr_from_grams(&grams, wiring))
}

fn block_energies(x: &[f64], layout: &BlockLayout) -> Result<(Vec<f64>, f64)> {
    if x.len() != layout.d_orig {
        return Err(Error::DimensionMismatch {
            what: "vector length vs layout d".into(),
            expected: layout.d_orig,
            got: x.len(),
        });
    }
    let mut e = vec![0.0f64; layout.m];
    for (i, &v) in x.iter().enumerate() {
        e[i / layout.bc] += v * v;
    }
    let total: f64 = e.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((e, total))
}

/// mu_blk(x) = M * max_h ||x^(h)||^2 / ||x||^2.
pub fn mu_blk_vector(x: &[f64], layout: &BlockLayout) -> Result<f64> {
    let (e, total) = block_energies(x, layout)?;
    Ok(layout.m as f64 * e.iter().fold(0.0, |a: f64, &b| a.max(b)) / total)
}

/// mu_nbr(x; pi) = (M / kappa) * max_g ||x_{N(g)}||^2 / ||x||^2.
pub fn mu_nbr_vector(x: &[f64], layout: &BlockLayout, wiring: &Wiring) -> Result<f64> {
    if wiring.m != layout.m {
        return Err(Error::InvalidParams(format!(
            "wiring on M = {} blocks, layout has M = {}",
            wiring.m, layout.m
        )));
    }
    let (e, total) = block_energies(x, layout)?;
    let mut nbrs = Vec::with_capacity(wiring.kappa);
    let mut worst = 0.0f64;
    for g in 0..layout.m {
        wiring.neighborhood_into(g, &mut nbrs);
        let s: f64 = nbrs.iter().map(|&h| e[h as usize]).sum();
        worst = worst.max(s);
    }
    Ok((layout.m as f64 / wiring.kappa as f64) * worst / total)
}

/// Relative gap of the neighborhood energy identity
/// sum_g ||x_{N(g)}||^2 = kappa ||x||^2, which holds exactly for any wiring
/// made of permutations (each block is visited kappa times in total).
pub fn energy_identity_gap(x: &[f64], layout: &BlockLayout, wiring: &Wiring) -> Result<f64> {
    let (e, total) = block_energies(x, layout)?;
    let mut nbrs = Vec::with_capacity(wiring.kappa);
    let mut acc = 0.0f64;
    for g in 0..layout.m {
        wiring.neighborhood_into(g, &mut nbrs);
        for &h in &nbrs {
            acc += e[h as usize];
        }
    }
    let target = wiring.kappa as f64 * total;
    Ok((acc - target).abs() / target)
}

/// Both coherences of one subspace under one wiring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub m: usize,
    pub kappa: usize,
    pub mu_blk: f64,
    pub mu_nbr: f64,
    /// mu_nbr / mu_blk in [1/kappa, 1] for edge-disjoint wirings.
    pub ratio: f64,
}

pub fn coherence_report(
    u: &DenseMatrix<f64>,
    layout: &BlockLayout,
    wiring: &Wiring,
) -> Result<CoherenceReport> {
    check_orthonormal(u)?;
    let grams = block_grams(u, layout)?;
    let mu_blk = layout.m as f64 * grams.iter().map(lambda_max).fold(0.0, f64::max);
    let mu_nbr = mu_nbr_from_grams(&grams, wiring);
    Ok(CoherenceReport {
        m: layout.m,
        kappa: wiring.kappa,
        mu_blk,
        mu_nbr,
        ratio: mu_nbr / mu_blk,
    })
}

/// Orthonormal U concentrating all energy in the first rows: the first r
/// rows are I_r, the rest zero. The worst case for block coherence when r
/// fits inside one block.
pub fn planted_coherent_basis(d: usize, r: usize) -> DenseMatrix<f64> {
    assert!(r <= d);
    let mut u = DenseMatrix::zeros(d, r);
    for i in 0..r {
        u.set(i, i, 1.0);
    }
    u
}

/// mu_nbr distribution of one subspace under independent uniformly random
/// wirings, per kappa.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingPoint {
    pub kappa: usize,
    pub trials: usize,
    pub median_mu_nbr: f64,
    pub mean_mu_nbr: f64,
    pub min_mu_nbr: f64,
    pub max_mu_nbr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub m: usize,
    pub mu_blk: f64,
    pub points: Vec<SmoothingPoint>,
}

/// For each kappa, sample `trials` wirings of kappa independent uniform
/// permutations (not necessarily edge-disjoint) and record the mu_nbr
/// distribution of `u`. Larger kappa averages the hot block against cold
/// ones, so the medians should fall roughly like 1/kappa until the
/// incoherent floor is reached.
pub fn smoothing_experiment(
    u: &DenseMatrix<f64>,
    layout: &BlockLayout,
    kappas: &[usize],
    trials: usize,
    seed: u64,
) -> Result<SmoothingReport> {
    check_orthonormal(u)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let grams = block_grams(u, layout)?;
    let mu_blk = layout.m as f64 * grams.iter().map(lambda_max).fold(0.0, f64::max);
    let mut points = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        if kappa == 0 || kappa > layout.m {
            return Err(Error::InvalidParams(format!(
                "kappa = {kappa} must be in [1, M = {}]",
                layout.m
            )));
        }
        let mut vals: Vec<f64> = (0..trials)
            .map(|t| {
                let w = sample_uniform_wiring(sub_seed(seed, kappa, t), layout.m, kappa);
                mu_nbr_from_grams(&grams, &w)
            })
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if trials % 2 == 1 {
            vals[trials / 2]
        } else {
            0.5 * (vals[trials / 2 - 1] + vals[trials / 2])
        };
        points.push(SmoothingPoint {
            kappa,
            trials,
            median_mu_nbr: median,
            mean_mu_nbr: vals.iter().sum::<f64>() / trials as f64,
            min_mu_nbr: vals[0],
            max_mu_nbr: vals[trials - 1],
        });
    }
    Ok(SmoothingReport {
        m: layout.m,
        mu_blk,
        points,
    })
}

//! Input generation and Matrix Market ingestion for the experiment suites.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{counter, normal, Stream};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DatasetSpec {
    Gaussian {
        d: usize,
        n: usize,
        seed: u64,
    },
    LowRankNoise {
        d: usize,
        n: usize,
        rank: usize,
        noise_sigma: f64,
        seed: u64,
    },
    MatrixMarketFile {
        path: String,
        /// Optional top-left (rows, cols) crop applied after reading.
        crop: Option<(usize, usize)>,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<DenseMatrix<f64>> {
        match self {
            DatasetSpec::Gaussian { d, n, seed } => Ok(gen_gaussian(*d, *n, *seed)),
            DatasetSpec::LowRankNoise {
                d,
                n,
                rank,
                noise_sigma,
                seed,
            } => gen_lowrank_noise(*d, *n, *rank, *noise_sigma, *seed),
            DatasetSpec::MatrixMarketFile { path, crop } => {
                read_matrix_market_with(Path::new(path), *crop)
            }
        }
    }
}

/// i.i.d. standard normal entries from the counter stream; column-parallel
/// friendly and byte-identical across runs for a fixed seed.
pub fn gen_gaussian(d: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
    gen_normal_stream(d, n, seed, Stream::DataGaussian)
}

fn gen_normal_stream(d: usize, n: usize, seed: u64, stream: Stream) -> DenseMatrix<f64> {
    let mut m = DenseMatrix::zeros(d, n);
    for i in 0..d {
        let row = m.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = normal(counter(seed, stream, i, j, 0), 0);
        }
    }
    m
}

/// A = G1 G2^T / sqrt(rank) + sigma N with independent standard normal
/// factors, so the expected squared Frobenius norm is d*n*(1 + sigma^2).
pub fn gen_lowrank_noise(
    d: usize,
    n: usize,
    rank: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<DenseMatrix<f64>> {
    if rank == 0 || rank > d.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank = {rank} must be in [1, min(d, n) = {}]",
            d.min(n)
        )));
    }
    if noise_sigma < 0.0 {
        return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
    }
    let g1 = gen_normal_stream(d, rank, seed, Stream::DataLowRankLeft);
    let g2 = gen_normal_stream(n, rank, seed, Stream::DataLowRankRight);
    let inv = 1.0 / (rank as f64).sqrt();
    let mut a = DenseMatrix::zeros(d, n);
    for i in 0..d {
        let gi = g1.row(i);
        let arow = a.row_mut(i);
        for (t, &g1v) in gi.iter().enumerate() {
            for j in 0..n {
                arow[j] += g1v * g2.get(j, t);
            }
        }
        for v in arow.iter_mut() {
            *v *= inv;
        }
    }
    if noise_sigma > 0.0 {
        for i in 0..d {
            let arow = a.row_mut(i);
            for (j, v) in arow.iter_mut().enumerate() {
                *v += noise_sigma * normal(counter(seed, Stream::DataNoise, i, j, 0), 0);
            }
        }
    }
    Ok(a)
}

/// Read a Matrix Market coordinate file into a dense matrix.
///
/// Accepts `real`, `integer` and `pattern` fields (pattern entries read as
/// 1.0) with `general` or `symmetric` symmetry (symmetric entries are
/// mirrored). One-based indices are converted; duplicate entries are summed.
pub fn read_matrix_market(path: &Path) -> Result<DenseMatrix<f64>> {
    read_matrix_market_with(path, None)
}

/// As [`read_matrix_market`], keeping only the top-left `(rows, cols)`
/// window when `crop` is given.
pub fn read_matrix_market_with(
    path: &Path,
    crop: Option<(usize, usize)>,
) -> Result<DenseMatrix<f64>> {
    let pstr = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Io {
        path: pstr.clone(),
        source: e,
    })?;
    let reader = BufReader::new(file);
    let err = |line: usize, msg: String| Error::MatrixMarket {
        path: pstr.clone(),
        line,
        msg,
    };

    let mut lines = reader.lines().enumerate();
    let (lineno, header) = match lines.next() {
        Some((i, Ok(l))) => (i + 1, l),
        Some((i, Err(e))) => return Err(err(i + 1, format!("read failure: {e}"))),
        None => return Err(err(1, "empty file".into())),
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "%%MatrixMarket" {
        return Err(err(lineno, "header must be '%%MatrixMarket matrix coordinate <field> <symmetry>'".into()));
    }
    if toks[1] != "matrix" || toks[2] != "coordinate" {
        return Err(err(lineno, format!("unsupported object/format '{} {}'", toks[1], toks[2])));
    }
    let pattern = match toks[3] {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(err(lineno, format!("unsupported field '{other}'"))),
    };
    let symmetric = match toks[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(lineno, format!("unsupported symmetry '{other}'"))),
    };

    // size line: first non-comment line after the header
    let (mut rows, mut cols, mut nnz) = (0usize, 0usize, 0usize);
    let mut size_seen = false;
    let mut mat: Option<DenseMatrix<f64>> = None;
    let mut entries = 0usize;
    let mut last_lineno = lineno;
    for (i, line) in lines {
        let lineno = i + 1;
        last_lineno = lineno;
        let line = line.map_err(|e| err(lineno, format!("read failure: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if !size_seen {
            if toks.len() != 3 {
                return Err(err(lineno, "size line must be 'rows cols nnz'".into()));
            }
            rows = toks[0]
                .parse()
                .map_err(|_| err(lineno, format!("bad row count '{}'", toks[0])))?;
            cols = toks[1]
                .parse()
                .map_err(|_| err(lineno, format!("bad column count '{}'", toks[1])))?;
            nnz = toks[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad nnz count '{}'", toks[2])))?;
            size_seen = true;
            mat = Some(DenseMatrix::zeros(rows, cols));
            continue;
        }
        let m = mat.as_mut().unwrap();
        let want = if pattern { 2 } else { 3 };
        if toks.len() != want {
            return Err(err(lineno, format!("expected {want} fields, got {}", toks.len())));
        }
        let r: usize = toks[0]
            .parse()
            .map_err(|_| err(lineno, format!("bad row index '{}'", toks[0])))?;
        let c: usize = toks[1]
            .parse()
            .map_err(|_| err(lineno, format!("bad column index '{}'", toks[1])))?;
        if r < 1 || r > rows || c < 1 || c > cols {
            return Err(err(lineno, format!("index ({r}, {c}) out of bounds for {rows}x{cols}")));
        }
        let v: f64 = if pattern {
            1.0
        } else {
            toks[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad value '{}'", toks[2])))?
        };
        let (ri, ci) = (r - 1, c - 1);
        m.set(ri, ci, m.get(ri, ci) + v);
        if symmetric && ri != ci {
            m.set(ci, ri, m.get(ci, ri) + v);
        }
        entries += 1;
    }
    if !size_seen {
        return Err(err(last_lineno + 1, "missing size line".into()));
    }
    if entries != nnz {
        return Err(err(
            last_lineno + 1,
            format!("expected {nnz} entries, found {entries}"),
        ));
    }
    let m = mat.unwrap();
    if let Some((cr, cc)) = crop {
        let (cr, cc) = (cr.min(m.rows), cc.min(m.cols));
        let mut out = DenseMatrix::zeros(cr, cc);
        for r in 0..cr {
            out.row_mut(r).copy_from_slice(&m.row(r)[..cc]);
        }
        return Ok(out);
    }
    Ok(m)
}

/// Write the nonzero entries of a dense matrix in coordinate/real/general
/// form. Values are printed with full round-trip precision.
pub fn write_matrix_market(path: &Path, m: &DenseMatrix<f64>) -> Result<()> {
    let io_err = |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let nnz = m.data.iter().filter(|&&v| v != 0.0).count();
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io_err)?;
    writeln!(w, "{} {} {}", m.rows, m.cols, nnz).map_err(io_err)?;
    for r in 0..m.rows {
        for c in 0..m.cols {
            let v = m.get(r, c);
            if v != 0.0 {
                writeln!(w, "{} {} {:?}", r + 1, c + 1, v).map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

/// Fraction of nonzero entries.
pub fn density(m: &DenseMatrix<f64>) -> f64 {
    let nnz = m.data.iter().filter(|&&v| v != 0.0).count();
    nnz as f64 / (m.rows * m.cols) as f64
}

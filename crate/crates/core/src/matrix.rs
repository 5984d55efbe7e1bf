//! Row-major dense matrices in f32 or f64, with the binary dump format
//! shared by the CLI and the data module.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::layout::Precision;

/// Scalar element of a dense matrix.
pub trait Element: Copy + Send + Sync + PartialEq + std::fmt::Debug + 'static {
    const PRECISION: Precision;
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;
    fn to_le_bytes_vec(self) -> Vec<u8>;
    fn from_le_slice(bytes: &[u8]) -> Self;
    const BYTES: usize;
}

impl Element for f64 {
    const PRECISION: Precision = Precision::F64;
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().unwrap())
    }
    const BYTES: usize = 8;
}

impl Element for f32 {
    const PRECISION: Precision = Precision::F32;
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().unwrap())
    }
    const BYTES: usize = 4;
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T = f64> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Element> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "data length".into(),
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    #[inline(always)]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline(always)]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|&v| {
                let x = v.to_f64();
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Relative Frobenius distance to `other` (absolute when `other` is 0).
    pub fn rel_frobenius_error(&self, other: &DenseMatrix<T>) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut diff = 0.0f64;
        for (a, b) in self.data.iter().zip(&other.data) {
            let e = a.to_f64() - b.to_f64();
            diff += e * e;
        }
        let denom = other.frobenius_norm();
        if denom > 0.0 {
            diff.sqrt() / denom
        } else {
            diff.sqrt()
        }
    }

    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.cols, p % self.cols))
    }

    pub fn map_f64(&self) -> DenseMatrix<f64> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.to_f64()).collect(),
        }
    }

    /// Little-endian binary dump: 16-byte header (magic "BSK1", rows, cols,
    /// precision as u32) followed by row-major data.
    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let io_err = |e| Error::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        w.write_all(b"BSK1").map_err(io_err)?;
        w.write_all(&(self.rows as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(self.cols as u32).to_le_bytes()).map_err(io_err)?;
        let prec: u32 = match T::PRECISION {
            Precision::F32 => 1,
            Precision::F64 => 2,
        };
        w.write_all(&prec.to_le_bytes()).map_err(io_err)?;
        for &v in &self.data {
            w.write_all(&v.to_le_bytes_vec()).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn read_bin(path: &Path) -> Result<Self> {
        let io_err = |e| Error::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut r = BufReader::new(File::open(path).map_err(io_err)?);
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(io_err)?;
        if &header[0..4] != b"BSK1" {
            return Err(Error::BadBinary("bad magic".into()));
        }
        let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let prec = u32::from_le_bytes(header[12..16].try_into().unwrap());
        let expected = match T::PRECISION {
            Precision::F32 => 1,
            Precision::F64 => 2,
        };
        if prec != expected {
            return Err(Error::BadBinary(format!(
                "precision tag {prec} does not match element type"
            )));
        }
        let mut buf = vec![0u8; rows * cols * T::BYTES];
        r.read_exact(&mut buf).map_err(io_err)?;
        let data = buf.chunks_exact(T::BYTES).map(T::from_le_slice).collect();
        Ok(DenseMatrix { rows, cols, data })
    }
}

impl DenseMatrix<f64> {
    pub fn from_na(m: &DMatrix<f64>) -> Self {
        let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out.set(r, c, m[(r, c)]);
            }
        }
        out
    }

    pub fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().copied())
    }

    pub fn column_vector(data: Vec<f64>) -> Self {
        DenseMatrix {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    /// self^T * self, blocked over rows of self (n x n Gram matrix).
    pub fn gram(&self) -> DenseMatrix<f64> {
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ai = row[i];
                if ai == 0.0 {
                    continue;
                }
                let grow = g.row_mut(i);
                for j in 0..n {
                    grow[j] += ai * row[j];
                }
            }
        }
        g
    }
}

/// C = A * B with a simple cache-blocked i-k-j loop, parallel over row bands.
pub fn matmul<T: Element>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T>
where
    T: std::ops::Mul<Output = T> + std::ops::AddAssign,
{
    use rayon::prelude::*;
    assert_eq!(a.cols, b.rows);
    let (m, n) = (a.rows, b.cols);
    let mut c = DenseMatrix::zeros(m, n);
    let band = 64usize;
    c.data
        .par_chunks_mut(band * n)
        .enumerate()
        .for_each(|(bi, chunk)| {
            let r0 = bi * band;
            let r1 = (r0 + band).min(m);
            for r in r0..r1 {
                let arow = a.row(r);
                let crow = &mut chunk[(r - r0) * n..(r - r0 + 1) * n];
                for (kk, &av) in arow.iter().enumerate() {
                    if av == T::zero() {
                        continue;
                    }
                    let brow = b.row(kk);
                    for j in 0..n {
                        crow[j] += av * brow[j];
                    }
                }
            }
        });
    c
}

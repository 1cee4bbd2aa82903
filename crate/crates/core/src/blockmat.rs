//! Dense matrices over `F_q` and their block-grid views.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ffield::{FieldElement, FieldError, PrimeModulus};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("inconsistent block shapes: {0}")]
    Shape(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("malformed matrix file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major dense matrix over a prime field.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    modulus: PrimeModulus,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, modulus: PrimeModulus) -> Self {
        Self {
            rows,
            cols,
            modulus,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize, modulus: PrimeModulus) -> Self {
        let mut m = Self::zeros(n, n, modulus);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row-major canonical values.
    pub fn from_vec(
        rows: usize,
        cols: usize,
        modulus: PrimeModulus,
        data: Vec<u64>,
    ) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(&value) = data.iter().find(|&&v| v >= modulus.get()) {
            return Err(FieldError::NotCanonical {
                value,
                modulus: modulus.get(),
            }
            .into());
        }
        Ok(Self {
            rows,
            cols,
            modulus,
            data,
        })
    }

    pub fn from_rows(rows: &[&[u64]], modulus: PrimeModulus) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(MatrixError::Dimension("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, modulus, rows.concat())
    }

    pub fn random<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        modulus: PrimeModulus,
        rng: &mut R,
    ) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(0..modulus.get()))
            .collect();
        Self {
            rows,
            cols,
            modulus,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major canonical values.
    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u64] {
        &mut self.data
    }

    #[inline]
    pub fn value(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        FieldElement::reduced(self.value(r, c), self.modulus)
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) -> Result<(), MatrixError> {
        self.check_field(v.modulus())?;
        self.data[r * self.cols + c] = v.value();
        Ok(())
    }

    fn check_field(&self, other: PrimeModulus) -> Result<(), MatrixError> {
        if self.modulus != other {
            return Err(FieldError::ModulusMismatch(self.modulus.get(), other.get()).into());
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<(), MatrixError> {
        self.check_field(other.modulus)?;
        if self.shape() != other.shape() {
            return Err(MatrixError::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        let mut out = self.clone();
        out.add_scaled(other, 1)?;
        Ok(out)
    }

    /// `self += scale * other`, entrywise.
    pub fn add_scaled(&mut self, other: &Matrix, scale: u64) -> Result<(), MatrixError> {
        self.check_same_shape(other)?;
        axpy(self.modulus, &mut self.data, &other.data, scale);
        Ok(())
    }

    pub fn scale(&self, s: u64) -> Matrix {
        let q = self.modulus;
        let s = q.reduce(s);
        Matrix {
            data: self.data.iter().map(|&v| q.mul(v, s)).collect(),
            ..self.clone()
        }
    }

    /// Ordinary matrix product over `F_q`.
    pub fn multiply(&self, rhs: &Matrix) -> Result<Matrix, MatrixError> {
        self.check_field(rhs.modulus)?;
        if self.cols != rhs.rows {
            return Err(MatrixError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let q = self.modulus.get() as u128;
        let (n, m, p) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0u64; n * p];
        // Terms are < q^2 < 2^126 and the accumulator stays < q after each
        // step, so the u128 sum never overflows.
        let mut acc = vec![0u128; p];
        for i in 0..n {
            acc.iter_mut().for_each(|a| *a = 0);
            for k in 0..m {
                let a = self.data[i * m + k] as u128;
                if a == 0 {
                    continue;
                }
                let row = &rhs.data[k * p..(k + 1) * p];
                for (slot, &b) in acc.iter_mut().zip(row) {
                    *slot = (*slot + a * b as u128) % q;
                }
            }
            for (o, a) in out[i * p..(i + 1) * p].iter_mut().zip(&acc) {
                *o = *a as u64;
            }
        }
        Ok(Matrix {
            rows: n,
            cols: p,
            modulus: self.modulus,
            data: out,
        })
    }

    pub fn submatrix(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Matrix {
        let mut data = Vec::with_capacity(rows * cols);
        for r in row0..row0 + rows {
            data.extend_from_slice(&self.data[r * self.cols + col0..r * self.cols + col0 + cols]);
        }
        Matrix {
            rows,
            cols,
            modulus: self.modulus,
            data,
        }
    }

    /// Splits into a `pr x pc` grid of equally sized blocks.
    pub fn partition(&self, pr: usize, pc: usize) -> Result<BlockGrid, MatrixError> {
        if pr == 0 || pc == 0 || !self.rows.is_multiple_of(pr) || !self.cols.is_multiple_of(pc) {
            return Err(MatrixError::Dimension(format!(
                "{}x{} matrix does not split into a {pr}x{pc} block grid",
                self.rows, self.cols
            )));
        }
        let (br, bc) = (self.rows / pr, self.cols / pc);
        let mut blocks = Vec::with_capacity(pr * pc);
        for i in 0..pr {
            for j in 0..pc {
                blocks.push(self.submatrix(i * br, j * bc, br, bc));
            }
        }
        Ok(BlockGrid {
            grid_rows: pr,
            grid_cols: pc,
            blocks,
        })
    }

    /// Parses the text format: a `r c q` header line followed by `r` rows of
    /// `c` decimal values in `[0, q)`.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Matrix, MatrixError> {
        let mut lines = reader
            .lines()
            .map(|l| l.map_err(MatrixError::from))
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let header = lines
            .next()
            .ok_or_else(|| MatrixError::Parse("missing header".into()))??;
        let fields: Vec<u64> = parse_numbers(&header)?;
        let [rows, cols, q] = fields[..] else {
            return Err(MatrixError::Parse(format!(
                "header must be `rows cols q`, got {header:?}"
            )));
        };
        let modulus = PrimeModulus::new(q)?;
        let (rows, cols) = (rows as usize, cols as usize);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| MatrixError::Parse(format!("expected {rows} rows, found {r}")))??;
            let row = parse_numbers(&line)?;
            if row.len() != cols {
                return Err(MatrixError::Parse(format!(
                    "row {r} has {} values, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if let Some(extra) = lines.next() {
            extra?;
            return Err(MatrixError::Parse("trailing rows after matrix body".into()));
        }
        Matrix::from_vec(rows, cols, modulus, data)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.modulus)?;
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut first = true;
            for v in row {
                if !first {
                    w.write_all(b" ")?;
                }
                write!(w, "{v}")?;
                first = false;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn parse_numbers(line: &str) -> Result<Vec<u64>, MatrixError> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| MatrixError::Parse(format!("not a nonnegative integer: {t:?}")))
        })
        .collect()
}

/// `dst += scale * src` over `F_q`.
pub(crate) fn axpy(q: PrimeModulus, dst: &mut [u64], src: &[u64], scale: u64) {
    if scale == 0 {
        return;
    }
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = q.add(*d, q.mul(s, scale));
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Matrix {}x{} over F_{} [",
            self.rows, self.cols, self.modulus
        )?;
        for r in 0..self.rows.min(8) {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            writeln!(f, "  {:?}", &row[..row.len().min(8)])?;
        }
        write!(f, "]")
    }
}

/// The partition triplet `(p0, p1, p2)`: `M0` splits into `p0 x p1` blocks and
/// `M1` into `p1 x p2` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub p0: usize,
    pub p1: usize,
    pub p2: usize,
}

impl PartitionScheme {
    pub fn new(p0: usize, p1: usize, p2: usize) -> Result<Self, MatrixError> {
        if p0 == 0 || p1 == 0 || p2 == 0 {
            return Err(MatrixError::Dimension(format!(
                "partition counts must be positive, got ({p0},{p1},{p2})"
            )));
        }
        Ok(Self { p0, p1, p2 })
    }

    /// Partition level `K = p0 p1 p2`.
    pub fn level(&self) -> usize {
        self.p0 * self.p1 * self.p2
    }

    /// The same scheme with `p0` and `p2` exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            p0: self.p2,
            p1: self.p1,
            p2: self.p0,
        }
    }

    /// Checks that `M0 (r0 x r1)` and `M1 (r1 x r2)` split evenly.
    pub fn check_dimensions(&self, m0: &Matrix, m1: &Matrix) -> Result<(), MatrixError> {
        if m0.cols() != m1.rows() {
            return Err(MatrixError::Dimension(format!(
                "inner dimensions differ: {}x{} times {}x{}",
                m0.rows(),
                m0.cols(),
                m1.rows(),
                m1.cols()
            )));
        }
        let ok = m0.rows().is_multiple_of(self.p0)
            && m0.cols().is_multiple_of(self.p1)
            && m1.cols().is_multiple_of(self.p2);
        if !ok {
            return Err(MatrixError::Dimension(format!(
                "({}x{})·({}x{}) is not divisible by partition {self}",
                m0.rows(),
                m0.cols(),
                m1.rows(),
                m1.cols()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p0, self.p1, self.p2)
    }
}

impl FromStr for PartitionScheme {
    type Err = MatrixError;

    /// Accepts `p0,p1,p2` with optional surrounding parentheses.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<usize> = inner
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| MatrixError::Parse(format!("bad partition {s:?}: {e}")))?;
        match parts[..] {
            [p0, p1, p2] => Self::new(p0, p1, p2),
            _ => Err(MatrixError::Parse(format!("bad partition {s:?}"))),
        }
    }
}

/// A `grid_rows x grid_cols` grid of equally shaped blocks, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    grid_rows: usize,
    grid_cols: usize,
    blocks: Vec<Matrix>,
}

impl BlockGrid {
    /// Builds a grid from row-major blocks, checking shapes agree.
    pub fn from_blocks(
        grid_rows: usize,
        grid_cols: usize,
        blocks: Vec<Matrix>,
    ) -> Result<Self, MatrixError> {
        if grid_rows == 0 || grid_cols == 0 || blocks.len() != grid_rows * grid_cols {
            return Err(MatrixError::Shape(format!(
                "{} blocks for a {grid_rows}x{grid_cols} grid",
                blocks.len()
            )));
        }
        let first = &blocks[0];
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != first.shape() || b.modulus() != first.modulus() {
                return Err(MatrixError::Shape(format!(
                    "block {i} is {}x{} over F_{}, block 0 is {}x{} over F_{}",
                    b.rows(),
                    b.cols(),
                    b.modulus(),
                    first.rows(),
                    first.cols(),
                    first.modulus()
                )));
            }
        }
        Ok(Self {
            grid_rows,
            grid_cols,
            blocks,
        })
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.blocks[0].shape()
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.blocks[0].modulus()
    }

    pub fn block(&self, i: usize, j: usize) -> &Matrix {
        &self.blocks[i * self.grid_cols + j]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    /// Stitches the blocks back into one matrix.
    pub fn assemble(&self) -> Matrix {
        let (br, bc) = self.block_shape();
        let (rows, cols) = (br * self.grid_rows, bc * self.grid_cols);
        let mut data = vec![0u64; rows * cols];
        for gi in 0..self.grid_rows {
            for gj in 0..self.grid_cols {
                let b = self.block(gi, gj);
                for r in 0..br {
                    let dst = (gi * br + r) * cols + gj * bc;
                    data[dst..dst + bc].copy_from_slice(&b.as_slice()[r * bc..(r + 1) * bc]);
                }
            }
        }
        Matrix {
            rows,
            cols,
            modulus: self.modulus(),
            data,
        }
    }
}

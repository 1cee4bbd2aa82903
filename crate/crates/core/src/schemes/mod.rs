//! Polynomial coding schemes for distributed matrix multiplication.
//!
//! Every scheme encodes the blocks of `M0` and `M1` as polynomials whose
//! product carries each target block `M^{n0,n2}` as one coefficient. Schemes
//! differ in how many variables they use and therefore in how coded shares
//! can be reused across evaluation points:
//!
//! | kind | variables | left share depends on | right share depends on |
//! |------|-----------|-----------------------|------------------------|
//! | Epc  | `x`       | `x`                   | `x`                    |
//! | Bi0  | `x, y`    | `x, y`                | `y`                    |
//! | Bi2  | `y, z`    | `y`                   | `y, z`                 |
//! | Tri  | `x, y, z` | `x, y`                | `y, z`                 |
//!
//! Evaluation happens on a Cartesian grid whose per-axis size is the product
//! polynomial's degree in that variable plus one, so decoding is a sequence
//! of univariate interpolations, one axis at a time.

mod grid;
mod interp;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockmat::{axpy, BlockGrid, Matrix, MatrixError, PartitionScheme};
use crate::ffield::{FieldError, PrimeModulus};

pub use grid::EvaluationGrid;
pub use interp::{interpolate_univariate, LagrangeBasis};

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("field F_{modulus} is too small for an evaluation axis of {needed} points")]
    FieldTooSmall { modulus: u64, needed: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    PointArity { expected: usize, got: usize },
    #[error("evaluation points are not distinct")]
    SingularSystem,
    #[error("incomplete results: {0}")]
    IncompleteResults(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("grid does not fit the scheme: {0}")]
    GridMismatch(String),
    #[error("unknown scheme {0:?} (expected epc, bi0, bi2 or tri)")]
    UnknownKind(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Entangled polynomial codes, univariate.
    Epc,
    /// Bivariate, `M0` side carries the extra variable.
    Bi0,
    /// Bivariate, `M1` side carries the extra variable.
    Bi2,
    /// Tri-variate.
    Tri,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [Self::Epc, Self::Bi0, Self::Bi2, Self::Tri];

    pub fn name(self) -> &'static str {
        match self {
            Self::Epc => "epc",
            Self::Bi0 => "bi0",
            Self::Bi2 => "bi2",
            Self::Tri => "tri",
        }
    }

    pub fn recovery_threshold(self, p: PartitionScheme) -> usize {
        Scheme::new(self, p).recovery_threshold()
    }

    pub fn upload_counts(self, p: PartitionScheme) -> (usize, usize) {
        Scheme::new(self, p).upload_counts()
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epc" => Ok(Self::Epc),
            "bi0" => Ok(Self::Bi0),
            "bi2" => Ok(Self::Bi2),
            "tri" => Ok(Self::Tri),
            _ => Err(SchemeError::UnknownKind(s.to_string())),
        }
    }
}

/// Which factor of the product a share encodes: `Left` is `M0`, `Right` is `M1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Left,
    Right,
}

impl Operand {
    pub fn index(self) -> usize {
        match self {
            Self::Left => 0,
            Self::Right => 1,
        }
    }
}

/// An evaluation of one input's encoding polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedShare {
    pub operand: Operand,
    /// Coordinates on the axes this operand depends on.
    pub point: Vec<u64>,
    pub block: Matrix,
}

/// Product of the two coded shares at one grid point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskResult {
    /// Full grid coordinates.
    pub point: Vec<u64>,
    pub block: Matrix,
}

/// A coding scheme instantiated for one partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scheme {
    kind: SchemeKind,
    p: PartitionScheme,
}

impl Scheme {
    pub fn new(kind: SchemeKind, p: PartitionScheme) -> Self {
        Self { kind, p }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn partition(&self) -> PartitionScheme {
        self.p
    }

    /// Number of evaluation points per axis; each is the product polynomial's
    /// degree in that variable plus one.
    pub fn axis_sizes(&self) -> Vec<usize> {
        let PartitionScheme { p0, p1, p2 } = self.p;
        match self.kind {
            SchemeKind::Epc => vec![p0 * p1 * p2 + p1 - 1],
            SchemeKind::Bi0 => vec![p0, p1 * p2 + p1 - 1],
            SchemeKind::Bi2 => vec![p0 * p1 + p1 - 1, p2],
            SchemeKind::Tri => vec![p0, 2 * p1 - 1, p2],
        }
    }

    pub fn axis_labels(&self) -> &'static [char] {
        match self.kind {
            SchemeKind::Epc => &['x'],
            SchemeKind::Bi0 => &['x', 'y'],
            SchemeKind::Bi2 => &['y', 'z'],
            SchemeKind::Tri => &['x', 'y', 'z'],
        }
    }

    /// Grid axes the operand's encoding polynomial depends on.
    pub fn operand_axes(&self, operand: Operand) -> &'static [usize] {
        match (self.kind, operand) {
            (SchemeKind::Epc, _) => &[0],
            (SchemeKind::Bi0, Operand::Left) => &[0, 1],
            (SchemeKind::Bi0, Operand::Right) => &[1],
            (SchemeKind::Bi2, Operand::Left) => &[0],
            (SchemeKind::Bi2, Operand::Right) => &[0, 1],
            (SchemeKind::Tri, Operand::Left) => &[0, 1],
            (SchemeKind::Tri, Operand::Right) => &[1, 2],
        }
    }

    /// Minimum number of task results needed to decode.
    pub fn recovery_threshold(&self) -> usize {
        self.axis_sizes().iter().product()
    }

    /// Distinct coded shares of `(M0, M1)` needed to cover the whole grid.
    pub fn upload_counts(&self) -> (usize, usize) {
        let sizes = self.axis_sizes();
        let count = |op| {
            self.operand_axes(op)
                .iter()
                .map(|&a| sizes[a])
                .product::<usize>()
        };
        (count(Operand::Left), count(Operand::Right))
    }

    /// Monomial exponent, on the operand's axes, attached to block `(row, col)`.
    ///
    /// For `Left` the block is `M0^{(b0,b1)}`; for `Right` it is `M1^{(b1,b2)}`.
    pub fn block_exponents(&self, operand: Operand, row: usize, col: usize) -> Vec<usize> {
        let PartitionScheme { p1, p2, .. } = self.p;
        match (self.kind, operand) {
            (SchemeKind::Epc, Operand::Left) => vec![p1 * p2 * row + col],
            (SchemeKind::Epc, Operand::Right) => vec![p1 * col + (p1 - 1 - row)],
            (SchemeKind::Bi0, Operand::Left) => vec![row, p1 - 1 - col],
            (SchemeKind::Bi0, Operand::Right) => vec![col * p1 + row],
            (SchemeKind::Bi2, Operand::Left) => vec![row * p1 + col],
            (SchemeKind::Bi2, Operand::Right) => vec![p1 - 1 - row, col],
            (SchemeKind::Tri, Operand::Left) => vec![row, col],
            (SchemeKind::Tri, Operand::Right) => vec![p1 - 1 - row, col],
        }
    }

    /// Monomial of the product polynomial whose coefficient is `M^{n0,n2}`.
    pub fn target_exponents(&self, n0: usize, n2: usize) -> Vec<usize> {
        let PartitionScheme { p1, p2, .. } = self.p;
        match self.kind {
            SchemeKind::Epc => vec![p1 * p2 * n0 + p1 * n2 + p1 - 1],
            SchemeKind::Bi0 => vec![n0, p1 - 1 + n2 * p1],
            SchemeKind::Bi2 => vec![p1 - 1 + n0 * p1, n2],
            SchemeKind::Tri => vec![n0, p1 - 1, n2],
        }
    }

    /// The default grid: axis `k` is `1..=axis_sizes()[k]`.
    pub fn evaluation_grid(&self, modulus: PrimeModulus) -> Result<EvaluationGrid, SchemeError> {
        EvaluationGrid::consecutive(modulus, &self.axis_sizes())
    }

    /// Grid coordinates relevant to one operand.
    pub fn project(&self, operand: Operand, point: &[u64]) -> Vec<u64> {
        self.operand_axes(operand)
            .iter()
            .map(|&a| point[a])
            .collect()
    }

    /// Evaluates one input's encoding polynomial at `point`, given in the
    /// operand's own coordinates (see [`Scheme::operand_axes`]).
    pub fn encode(
        &self,
        operand: Operand,
        blocks: &BlockGrid,
        point: &[u64],
    ) -> Result<CodedShare, SchemeError> {
        let axes = self.operand_axes(operand);
        if point.len() != axes.len() {
            return Err(SchemeError::PointArity {
                expected: axes.len(),
                got: point.len(),
            });
        }
        let PartitionScheme { p0, p1, p2 } = self.p;
        let expected = match operand {
            Operand::Left => (p0, p1),
            Operand::Right => (p1, p2),
        };
        if blocks.grid_shape() != expected {
            return Err(SchemeError::Shape(format!(
                "{:?} operand needs a {}x{} block grid, got {}x{}",
                operand,
                expected.0,
                expected.1,
                blocks.grid_shape().0,
                blocks.grid_shape().1
            )));
        }
        let q = blocks.modulus();
        let (br, bc) = blocks.block_shape();
        let mut acc = Matrix::zeros(br, bc, q);
        for row in 0..expected.0 {
            for col in 0..expected.1 {
                let coeff = self
                    .block_exponents(operand, row, col)
                    .iter()
                    .zip(point)
                    .fold(1, |c, (&e, &v)| q.mul(c, q.pow(v, e as u64)));
                axpy(
                    q,
                    acc.as_mut_slice(),
                    blocks.block(row, col).as_slice(),
                    coeff,
                );
            }
        }
        Ok(CodedShare {
            operand,
            point: point.to_vec(),
            block: acc,
        })
    }

    /// Recovers `M0 M1` from one result per grid task.
    ///
    /// Any Cartesian grid with the scheme's axis sizes works; for Epc that is
    /// any set of `R_th` distinct points.
    pub fn decode(
        &self,
        grid: &EvaluationGrid,
        results: &[TaskResult],
    ) -> Result<Matrix, SchemeError> {
        let sizes = self.axis_sizes();
        if grid.axis_sizes() != sizes {
            return Err(SchemeError::GridMismatch(format!(
                "{} {} needs axis sizes {:?}, grid has {:?}",
                self.kind,
                self.p,
                sizes,
                grid.axis_sizes()
            )));
        }

        let mut slots: Vec<Option<&Matrix>> = vec![None; grid.task_count()];
        for r in results {
            if r.point.len() != grid.arity() {
                return Err(SchemeError::PointArity {
                    expected: grid.arity(),
                    got: r.point.len(),
                });
            }
            let idx = grid.locate(&r.point).ok_or_else(|| {
                SchemeError::IncompleteResults(format!("point {:?} is not on the grid", r.point))
            })?;
            let slot = &mut slots[grid.task_id(&idx)];
            if slot.is_some() {
                return Err(SchemeError::IncompleteResults(format!(
                    "duplicate result for point {:?}",
                    r.point
                )));
            }
            *slot = Some(&r.block);
        }
        let missing = slots.iter().filter(|s| s.is_none()).count();
        if missing > 0 {
            return Err(SchemeError::IncompleteResults(format!(
                "{missing} of {} grid tasks have no result",
                slots.len()
            )));
        }
        let blocks: Vec<&Matrix> = slots.into_iter().flatten().collect();
        let first = blocks[0];
        let q = grid.modulus();
        if let Some(b) = blocks
            .iter()
            .find(|b| b.shape() != first.shape() || b.modulus() != q)
        {
            return Err(SchemeError::Shape(format!(
                "result block {}x{} over F_{} does not match {}x{} over F_{q}",
                b.rows(),
                b.cols(),
                b.modulus(),
                first.rows(),
                first.cols()
            )));
        }

        let PartitionScheme { p0, p2, .. } = self.p;
        let targets: Vec<Vec<usize>> = (0..p0)
            .flat_map(|n0| (0..p2).map(move |n2| (n0, n2)))
            .map(|(n0, n2)| self.target_exponents(n0, n2))
            .collect();

        // Per axis, the distinct target degrees. Targets always form a
        // product set, so only these rows of each inverse Vandermonde matrix
        // are ever needed.
        let wanted: Vec<Vec<usize>> = (0..sizes.len())
            .map(|a| {
                let mut d: Vec<usize> = targets.iter().map(|t| t[a]).collect();
                d.sort_unstable();
                d.dedup();
                d
            })
            .collect();

        let mut tensor: Vec<Vec<u64>> = blocks.iter().map(|b| b.as_slice().to_vec()).collect();
        let mut dims = sizes.clone();
        for axis in 0..dims.len() {
            let basis = LagrangeBasis::new(q, &grid.axes()[axis])?;
            let rows = basis.coefficient_rows(&wanted[axis]);
            tensor = transform_axis(q, &tensor, &dims, axis, &rows);
            dims[axis] = wanted[axis].len();
        }

        let out: Vec<Matrix> = targets
            .iter()
            .map(|t| {
                let idx: Vec<usize> = t
                    .iter()
                    .zip(&wanted)
                    .map(|(e, w)| w.binary_search(e).expect("target degree is wanted"))
                    .collect();
                let flat = idx.iter().zip(&dims).fold(0, |acc, (&i, &n)| acc * n + i);
                Matrix::from_vec(first.rows(), first.cols(), q, tensor[flat].clone())
            })
            .collect::<Result<_, _>>()?;
        Ok(BlockGrid::from_blocks(p0, p2, out)?.assemble())
    }

    /// Evaluates the product polynomial at every grid task and returns the
    /// task results, reusing each coded share across the tasks that share its
    /// projection.
    pub fn compute_tasks(
        &self,
        grid: &EvaluationGrid,
        m0: &Matrix,
        m1: &Matrix,
    ) -> Result<Vec<TaskResult>, SchemeError> {
        let mut cache = ShareCache::new(*self, m0, m1)?;
        (0..grid.task_count())
            .map(|id| {
                let point = grid.task_point(id);
                let left = cache.share(Operand::Left, &point)?;
                let right = cache.share(Operand::Right, &point)?;
                Ok(TaskResult {
                    block: left.multiply(&right)?,
                    point,
                })
            })
            .collect()
    }

    /// Encode, multiply at every grid point, decode.
    pub fn multiply(&self, m0: &Matrix, m1: &Matrix) -> Result<Matrix, SchemeError> {
        let grid = self.evaluation_grid(m0.modulus())?;
        let results = self.compute_tasks(&grid, m0, m1)?;
        self.decode(&grid, &results)
    }
}

/// Applies `rows` (a `k x n` matrix) along `axis` of a tensor of flat blocks.
fn transform_axis(
    q: PrimeModulus,
    tensor: &[Vec<u64>],
    dims: &[usize],
    axis: usize,
    rows: &[Vec<u64>],
) -> Vec<Vec<u64>> {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let width = tensor[0].len();
    let k = rows.len();
    let mut out = vec![vec![0u64; width]; outer * k * inner];
    for o in 0..outer {
        for i in 0..inner {
            for (r, row) in rows.iter().enumerate() {
                let dst = &mut out[(o * k + r) * inner + i];
                for (j, &w) in row.iter().enumerate() {
                    axpy(q, dst, &tensor[(o * n + j) * inner + i], w);
                }
            }
        }
    }
    out
}

/// Lazily encoded shares keyed by their operand projection.
///
/// The number of encodes performed per operand is exactly the number of
/// distinct coded shares a master would have to broadcast.
#[derive(Debug)]
pub struct ShareCache {
    scheme: Scheme,
    left: BlockGrid,
    right: BlockGrid,
    cache: [HashMap<Vec<u64>, std::sync::Arc<Matrix>>; 2],
}

impl ShareCache {
    pub fn new(scheme: Scheme, m0: &Matrix, m1: &Matrix) -> Result<Self, SchemeError> {
        let p = scheme.partition();
        p.check_dimensions(m0, m1)?;
        if m0.modulus() != m1.modulus() {
            return Err(FieldError::ModulusMismatch(m0.modulus().get(), m1.modulus().get()).into());
        }
        Ok(Self {
            scheme,
            left: m0.partition(p.p0, p.p1)?,
            right: m1.partition(p.p1, p.p2)?,
            cache: [HashMap::new(), HashMap::new()],
        })
    }

    /// Share for `operand` at the full grid point `point`, encoding on a miss.
    pub fn share(
        &mut self,
        operand: Operand,
        point: &[u64],
    ) -> Result<std::sync::Arc<Matrix>, SchemeError> {
        let key = self.scheme.project(operand, point);
        if let Some(m) = self.cache[operand.index()].get(&key) {
            return Ok(m.clone());
        }
        let blocks = match operand {
            Operand::Left => &self.left,
            Operand::Right => &self.right,
        };
        let share = std::sync::Arc::new(self.scheme.encode(operand, blocks, &key)?.block);
        self.cache[operand.index()].insert(key, share.clone());
        Ok(share)
    }

    /// Distinct shares encoded so far, `(M0, M1)`.
    pub fn encoded_counts(&self) -> (usize, usize) {
        (self.cache[0].len(), self.cache[1].len())
    }
}

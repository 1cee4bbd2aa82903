use std::collections::HashSet;

use crate::ffield::{FieldElement, PrimeModulus};

use super::SchemeError;

/// Cartesian product of per-axis evaluation points.
///
/// Tasks are the grid points in lexicographic order with the first axis
/// varying slowest. A task id is its position in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationGrid {
    modulus: PrimeModulus,
    axes: Vec<Vec<u64>>,
}

impl EvaluationGrid {
    /// A grid over explicit axis values. Values must be canonical and
    /// distinct within each axis.
    pub fn new(modulus: PrimeModulus, axes: Vec<Vec<u64>>) -> Result<Self, SchemeError> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(SchemeError::GridMismatch(format!(
                "grids have 1 to 3 axes, got {}",
                axes.len()
            )));
        }
        for (a, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(SchemeError::GridMismatch(format!("axis {a} is empty")));
            }
            let mut seen = HashSet::with_capacity(axis.len());
            for &v in axis {
                FieldElement::new(v, modulus)?;
                if !seen.insert(v) {
                    return Err(SchemeError::SingularSystem);
                }
            }
        }
        Ok(Self { modulus, axes })
    }

    /// Axis `k` uses the field elements `1, 2, ..., sizes[k]`.
    pub fn consecutive(modulus: PrimeModulus, sizes: &[usize]) -> Result<Self, SchemeError> {
        let largest = sizes.iter().copied().max().unwrap_or(0);
        if largest as u64 >= modulus.get() {
            return Err(SchemeError::FieldTooSmall {
                modulus: modulus.get(),
                needed: largest,
            });
        }
        Self::new(
            modulus,
            sizes.iter().map(|&n| (1..=n as u64).collect()).collect(),
        )
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn arity(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<u64>] {
        &self.axes
    }

    pub fn axis_sizes(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn task_count(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    /// Per-axis indices of task `id`.
    pub fn task_indices(&self, mut id: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (a, axis) in self.axes.iter().enumerate().rev() {
            idx[a] = id % axis.len();
            id /= axis.len();
        }
        idx
    }

    /// Coordinates of task `id`.
    pub fn task_point(&self, id: usize) -> Vec<u64> {
        self.task_indices(id)
            .into_iter()
            .zip(&self.axes)
            .map(|(i, axis)| axis[i])
            .collect()
    }

    pub fn tasks(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        (0..self.task_count()).map(|id| self.task_point(id))
    }

    /// Task id of the point with the given per-axis indices.
    pub fn task_id(&self, indices: &[usize]) -> usize {
        indices
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    /// Position of each coordinate within its axis, if the point is on the grid.
    pub fn locate(&self, point: &[u64]) -> Option<Vec<usize>> {
        if point.len() != self.axes.len() {
            return None;
        }
        point
            .iter()
            .zip(&self.axes)
            .map(|(v, axis)| axis.iter().position(|a| a == v))
            .collect()
    }
}

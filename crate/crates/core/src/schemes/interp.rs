//! Univariate Lagrange interpolation over `F_q`.
//!
//! The basis polynomials are built from the master polynomial
//! `P(x) = prod_m (x - x_m)` by synthetic division and scaled by barycentric
//! weights `w_j = 1 / prod_{m != j} (x_j - x_m)`, so the full inverse
//! Vandermonde matrix costs `O(n^2)` field operations.

use crate::blockmat::{axpy, Matrix};
use crate::ffield::{FieldElement, PrimeModulus};

use super::SchemeError;

/// Lagrange basis for a fixed set of distinct nodes.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    modulus: PrimeModulus,
    nodes: Vec<u64>,
    /// `basis[j][k]`: coefficient of `x^k` in the `j`-th basis polynomial.
    basis: Vec<Vec<u64>>,
}

impl LagrangeBasis {
    pub fn new(modulus: PrimeModulus, nodes: &[u64]) -> Result<Self, SchemeError> {
        let q = modulus;
        let n = nodes.len();
        let nodes: Vec<u64> = nodes.iter().map(|&x| q.reduce(x)).collect();

        // Coefficients of prod (x - x_m), lowest degree first.
        let mut master = vec![0u64; n + 1];
        master[0] = 1;
        for (deg, &x) in nodes.iter().enumerate() {
            for k in (0..=deg).rev() {
                let c = master[k];
                master[k + 1] = q.add(master[k + 1], c);
                master[k] = q.mul(q.neg(x), c);
            }
        }

        let mut basis = Vec::with_capacity(n);
        for (j, &xj) in nodes.iter().enumerate() {
            let mut denom = 1u64;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != j {
                    denom = q.mul(denom, q.sub(xj, xm));
                }
            }
            let weight = q.inv(denom).map_err(|_| SchemeError::SingularSystem)?;

            // P(x) / (x - x_j)
            let mut quotient = vec![0u64; n];
            let mut carry = master[n];
            for k in (0..n).rev() {
                quotient[k] = carry;
                carry = q.add(master[k], q.mul(xj, carry));
            }
            quotient.iter_mut().for_each(|c| *c = q.mul(*c, weight));
            basis.push(quotient);
        }
        Ok(Self {
            modulus,
            nodes,
            basis,
        })
    }

    pub fn nodes(&self) -> &[u64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// For each requested degree `d`, the row mapping samples to the
    /// coefficient of `x^d`.
    pub fn coefficient_rows(&self, degrees: &[usize]) -> Vec<Vec<u64>> {
        degrees
            .iter()
            .map(|&d| {
                self.basis
                    .iter()
                    .map(|poly| poly.get(d).copied().unwrap_or(0))
                    .collect()
            })
            .collect()
    }

    /// Interpolates scalar samples, returning all `n` coefficients.
    pub fn interpolate_scalars(&self, samples: &[u64]) -> Vec<u64> {
        let q = self.modulus;
        let mut coeffs = vec![0u64; self.len()];
        for (poly, &s) in self.basis.iter().zip(samples) {
            for (c, &b) in coeffs.iter_mut().zip(poly) {
                *c = q.add(*c, q.mul(b, s));
            }
        }
        coeffs
    }
}

/// Recovers the coefficients of the unique matrix polynomial of degree
/// `< points.len()` that takes value `samples[i]` at `points[i]`.
pub fn interpolate_univariate(
    points: &[FieldElement],
    samples: &[Matrix],
) -> Result<Vec<Matrix>, SchemeError> {
    if points.len() != samples.len() {
        return Err(SchemeError::IncompleteResults(format!(
            "{} points but {} samples",
            points.len(),
            samples.len()
        )));
    }
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let q = first.modulus();
    for (i, s) in samples.iter().enumerate() {
        if s.shape() != first.shape() || s.modulus() != q {
            return Err(SchemeError::Shape(format!(
                "sample {i} is {}x{}, sample 0 is {}x{}",
                s.rows(),
                s.cols(),
                first.rows(),
                first.cols()
            )));
        }
    }
    if let Some(p) = points.iter().find(|p| p.modulus() != q) {
        return Err(crate::ffield::FieldError::ModulusMismatch(q.get(), p.modulus().get()).into());
    }
    let nodes: Vec<u64> = points.iter().map(|p| p.value()).collect();
    let basis = LagrangeBasis::new(q, &nodes)?;
    let degrees: Vec<usize> = (0..nodes.len()).collect();
    let rows = basis.coefficient_rows(&degrees);
    Ok(rows
        .iter()
        .map(|row| {
            let mut acc = Matrix::zeros(first.rows(), first.cols(), q);
            for (&w, s) in row.iter().zip(samples) {
                axpy(q, acc.as_mut_slice(), s.as_slice(), w);
            }
            acc
        })
        .collect())
}

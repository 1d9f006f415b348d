//! Dense hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{CdqcError, Result};
use crate::C64;

/// Eigenpairs of a hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: DMatrix<C64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    /// Amplitudes `<v_k|ψ>` for every eigenvector.
    pub fn amplitudes(&self, psi: &DVector<C64>) -> DVector<C64> {
        self.vectors.ad_mul(psi)
    }

    /// Indices grouped into blocks of (numerically) equal eigenvalues.
    /// Neighbours closer than `tol · max(1, spectral radius)` share a block.
    pub fn degenerate_blocks(&self, tol: f64) -> Vec<std::ops::Range<usize>> {
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..=self.values.len() {
            if k == self.values.len() || self.values[k] - self.values[k - 1] > tol * scale {
                blocks.push(start..k);
                start = k;
            }
        }
        blocks
    }
}

/// Diagonalizes a hermitian matrix; only the lower triangle is trusted.
/// Real input takes the (faster) real symmetric path.
pub fn eigh(m: &DMatrix<C64>) -> Eigen {
    let n = m.nrows();
    let (raw_values, raw_vectors) = if m.iter().all(|z| z.im == 0.0) {
        let se = m.map(|z| z.re).symmetric_eigen();
        (se.eigenvalues, se.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let se = m.clone().symmetric_eigen();
        (se.eigenvalues, se.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[a].total_cmp(&raw_values[b]));
    let values = order.iter().map(|&k| raw_values[k]).collect();
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &raw_vectors.column(src));
    }
    Eigen { values, vectors }
}

/// Largest deviation from hermiticity, `max |m_ij − conj(m_ji)|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Spectral norm of a hermitian matrix.
pub fn hermitian_norm(m: &DMatrix<C64>) -> f64 {
    let e = eigh(m);
    e.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `|<a|b>|` for unit vectors.
pub fn overlap_abs(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    a.dotc(b).norm()
}

pub fn check_unit(psi: &DVector<C64>, tol: f64) -> Result<()> {
    let n = psi.norm();
    if (n - 1.0).abs() > tol {
        return Err(CdqcError::Validation(format!(
            "state norm {n} is not 1 within {tol:e}"
        )));
    }
    Ok(())
}

/// Fixes the global phase so the largest-magnitude amplitude is real positive.
pub fn canonical_phase(mut v: DVector<C64>) -> DVector<C64> {
    let (mut best, mut idx) = (0.0, 0);
    for (k, a) in v.iter().enumerate() {
        if a.norm() > best + 1e-12 {
            best = a.norm();
            idx = k;
        }
    }
    if best > 0.0 {
        let phase = v[idx].conj() / best;
        v *= phase;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_ascending() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(3.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let e = eigh(&m);
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        assert!((e.vector(0)[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blocks_group_degenerate_levels() {
        let e = Eigen {
            values: vec![-1.0, -1.0 + 1e-13, 0.5, 2.0, 2.0],
            vectors: DMatrix::identity(5, 5),
        };
        assert_eq!(e.degenerate_blocks(1e-9), vec![0..2, 2..3, 3..5]);
    }
}

//! Eigendecompositions of low-rank symmetric operators over the term space.
//!
//! Everything is computed in the span of a handful of sparse vectors: the
//! operator is pulled back to a small dense matrix indexed by those vectors,
//! solved with Jacobi, then mapped back. Nothing here ever allocates a
//! vocabulary-sized dense matrix.

use std::collections::HashMap;

use super::jacobi::{symmetric_eigen, SymMatrix};
use super::sparse::SparseVector;
use crate::corpus::TermId;

/// Eigenvalues at or below this are treated as null.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: SparseVector,
}

fn gram(vectors: &[SparseVector]) -> SymMatrix {
    SymMatrix::from_upper(vectors.len(), |i, j| vectors[i].dot(&vectors[j]))
}

/// Two passes of modified Gram-Schmidt. Exact eigenvectors are already
/// orthonormal; this only removes rounding drift.
fn reorthonormalize(vectors: &mut [SparseVector]) {
    for _ in 0..2 {
        for k in 0..vectors.len() {
            let mut v = vectors[k].clone();
            for prev in &vectors[..k] {
                let c = prev.dot(&v);
                if c != 0.0 {
                    v = SparseVector::linear_combination([(1.0, &v), (-c, prev)]);
                }
            }
            vectors[k] = v.normalized().unwrap_or_default();
        }
    }
}

fn combine(coeffs: &[f64], basis: &[SparseVector]) -> SparseVector {
    SparseVector::linear_combination(coeffs.iter().copied().zip(basis.iter()))
}

/// Descending eigenpairs of `Σ φ φᵀ`, via the eigendecomposition of the Gram
/// matrix `G_ij = φ_i · φ_j`. At most `max_rank` pairs with eigenvalue above
/// [`EIGEN_FLOOR`] are returned.
pub fn scatter_eigendecomposition(vectors: &[SparseVector], max_rank: usize) -> Vec<EigenPair> {
    if vectors.is_empty() || max_rank == 0 {
        return Vec::new();
    }
    let eig = symmetric_eigen(&gram(vectors));
    let kept: Vec<usize> = (0..eig.values.len())
        .filter(|&k| eig.values[k] > EIGEN_FLOOR)
        .take(max_rank)
        .collect();
    let mut basis: Vec<SparseVector> = kept
        .iter()
        .map(|&k| {
            let scale = eig.values[k].sqrt().recip();
            let coeffs: Vec<f64> = eig.vectors[k].iter().map(|e| e * scale).collect();
            combine(&coeffs, vectors)
        })
        .collect();
    reorthonormalize(&mut basis);
    kept.iter()
        .zip(basis)
        .filter(|(_, v)| !v.is_zero())
        .map(|(&k, vector)| EigenPair {
            value: eig.values[k],
            vector,
        })
        .collect()
}

/// Descending eigenpairs of the symmetric operator `Σ_ab C_ab b_a b_bᵀ`.
///
/// The basis vectors need not be orthogonal or independent. Eigenvalues are
/// returned as computed, including any small negatives from rounding;
/// eigenvalues of magnitude below [`EIGEN_FLOOR`] are dropped.
pub fn operator_eigendecomposition(basis: &[SparseVector], coeffs: &SymMatrix) -> Vec<EigenPair> {
    let n = basis.len();
    assert_eq!(coeffs.dim(), n, "coefficient matrix must match the basis");
    if n == 0 {
        return Vec::new();
    }
    let g = gram(basis);
    let ge = symmetric_eigen(&g);
    let top = ge.values.first().copied().unwrap_or(0.0);
    // W = E μ^{-1/2} restricted to the numerically independent directions.
    let w: Vec<Vec<f64>> = (0..n)
        .filter(|&k| ge.values[k] > EIGEN_FLOOR * top.max(1.0))
        .map(|k| {
            let s = ge.values[k].sqrt().recip();
            ge.vectors[k].iter().map(|e| e * s).collect()
        })
        .collect();
    let r = w.len();
    if r == 0 {
        return Vec::new();
    }
    // H = G C G, then M = Wᵀ H W.
    let gc: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| g.get(i, k) * coeffs.get(k, j)).sum()).collect())
        .collect();
    let h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| gc[i][k] * g.get(k, j)).sum()).collect())
        .collect();
    let hw: Vec<Vec<f64>> = w
        .iter()
        .map(|wb| (0..n).map(|i| (0..n).map(|j| h[i][j] * wb[j]).sum()).collect())
        .collect();
    let m = SymMatrix::from_upper(r, |a, b| (0..n).map(|i| w[a][i] * hw[b][i]).sum());
    let eig = symmetric_eigen(&m);

    let kept: Vec<usize> = (0..r)
        .filter(|&k| eig.values[k].abs() > EIGEN_FLOOR)
        .collect();
    let mut vectors: Vec<SparseVector> = kept
        .iter()
        .map(|&k| {
            let coeffs: Vec<f64> = (0..n)
                .map(|i| (0..r).map(|a| w[a][i] * eig.vectors[k][a]).sum())
                .collect();
            combine(&coeffs, basis)
        })
        .collect();
    reorthonormalize(&mut vectors);
    kept.iter()
        .zip(vectors)
        .filter(|(_, v)| !v.is_zero())
        .map(|(&k, vector)| EigenPair {
            value: eig.values[k],
            vector,
        })
        .collect()
}

pub const DEFAULT_BATCH: usize = 256;

/// Streaming truncated eigendecomposition of `Σ φ φᵀ`.
///
/// Vectors are buffered and folded in batches: the current rank-r factor
/// `{√λ_k v_k}` is joined with the batch, the joint scatter is decomposed and
/// truncated to `max_rank`. The trace `Σ‖φ‖²`, the vector sum and the count are
/// accumulated exactly, independently of truncation.
#[derive(Debug, Clone)]
pub struct IncrementalEigen {
    max_rank: usize,
    batch_size: usize,
    factor: Vec<SparseVector>,
    pending: Vec<SparseVector>,
    trace: f64,
    sum: HashMap<TermId, f64>,
    count: usize,
}

#[derive(Debug, Clone)]
pub struct IncrementalResult {
    pub pairs: Vec<EigenPair>,
    /// Exact `Σ‖φ‖²` over every pushed vector.
    pub trace: f64,
    /// Exact `(1/N) Σ φ`.
    pub mean: SparseVector,
    pub count: usize,
}

impl IncrementalEigen {
    pub fn new(max_rank: usize) -> Self {
        Self::with_batch_size(max_rank, DEFAULT_BATCH)
    }

    pub fn with_batch_size(max_rank: usize, batch_size: usize) -> Self {
        assert!(max_rank >= 1, "max_rank must be positive");
        assert!(batch_size >= 1, "batch size must be positive");
        IncrementalEigen {
            max_rank,
            batch_size,
            factor: Vec::new(),
            pending: Vec::with_capacity(batch_size),
            trace: 0.0,
            sum: HashMap::new(),
            count: 0,
        }
    }

    pub fn push(&mut self, v: SparseVector) {
        self.trace += v.norm() * v.norm();
        for &(t, w) in v.entries() {
            *self.sum.entry(t).or_default() += w;
        }
        self.count += 1;
        self.pending.push(v);
        if self.pending.len() >= self.batch_size {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let mut joint = std::mem::take(&mut self.factor);
        joint.append(&mut self.pending);
        self.factor = scatter_eigendecomposition(&joint, self.max_rank)
            .into_iter()
            .map(|p| p.vector.scaled(p.value.sqrt()))
            .collect();
    }

    pub fn finish(mut self) -> IncrementalResult {
        self.flush();
        let pairs = self
            .factor
            .iter()
            .map(|f| EigenPair {
                value: f.norm() * f.norm(),
                vector: f.normalized().expect("factor vectors are non-zero"),
            })
            .collect();
        let mean = if self.count == 0 {
            SparseVector::zero()
        } else {
            let n = self.count as f64;
            SparseVector::from_pairs(self.sum.into_iter().map(|(t, s)| (t, s / n)))
        };
        IncrementalResult {
            pairs,
            trace: self.trace,
            mean,
            count: self.count,
        }
    }
}

/// One-shot or incremental, whichever the input size calls for.
pub fn truncated_eigendecomposition(
    vectors: impl IntoIterator<Item = SparseVector>,
    max_rank: usize,
) -> IncrementalResult {
    let mut inc = IncrementalEigen::new(max_rank);
    for v in vectors {
        inc.push(v);
    }
    inc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(v: &[f64]) -> SparseVector {
        SparseVector::from_dense(v)
    }

    #[test]
    fn orthonormal_input() {
        let pairs = scatter_eigendecomposition(&[dense(&[1.0, 0.0]), dense(&[0.0, 1.0])], 10);
        assert_eq!(pairs.len(), 2);
        for p in &pairs {
            assert!((p.value - 1.0).abs() < 1e-12);
            assert_eq!(p.vector.support().filter(|&t| t > 1).count(), 0);
        }
    }

    #[test]
    fn repeated_vector() {
        let pairs = scatter_eigendecomposition(&[dense(&[1.0, 0.0]), dense(&[1.0, 0.0])], 10);
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].value - 2.0).abs() < 1e-12);
        assert!((pairs[0].vector.get(0).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_oracle() {
        // scatter [[5,1],[1,1]], eigenvalues 3 ± √5
        let pairs = scatter_eigendecomposition(&[dense(&[2.0, 0.0]), dense(&[1.0, 1.0])], 10);
        assert!((pairs[0].value - 5.236_067_977_499_79).abs() < 1e-10);
        assert!((pairs[1].value - 0.763_932_022_500_21).abs() < 1e-10);
    }

    #[test]
    fn zero_vectors() {
        assert!(scatter_eigendecomposition(&[SparseVector::zero(), SparseVector::zero()], 3).is_empty());
        let r = truncated_eigendecomposition(Vec::new(), 3);
        assert!(r.pairs.is_empty());
        assert_eq!(r.count, 0);
    }

    #[test]
    fn rank_cap() {
        let vs: Vec<_> = (0..5).map(|i| {
            let mut d = vec![0.0; 5];
            d[i] = (i + 1) as f64;
            dense(&d)
        }).collect();
        let pairs = scatter_eigendecomposition(&vs, 2);
        assert_eq!(pairs.len(), 2);
        assert!((pairs[0].value - 25.0).abs() < 1e-12);
        assert!((pairs[1].value - 16.0).abs() < 1e-12);
    }

    #[test]
    fn operator_with_dependent_basis() {
        // A = e1 e1ᵀ expressed redundantly via b = {e1, e1, e2}
        let basis = [dense(&[1.0, 0.0]), dense(&[1.0, 0.0]), dense(&[0.0, 1.0])];
        let c = SymMatrix::from_upper(3, |i, j| if (i, j) == (0, 1) { 0.5 } else { 0.0 });
        let pairs = operator_eigendecomposition(&basis, &c);
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].value - 1.0).abs() < 1e-12);
    }
}

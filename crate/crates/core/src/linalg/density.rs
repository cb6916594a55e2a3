use serde::{Deserialize, Serialize};

use super::eigen::EigenPair;
use super::sparse::SparseVector;
use crate::error::{Error, Result};

/// A density operator `ρ = Σ λ_i v_i v_iᵀ` held by its eigenpairs: λ
/// non-negative and descending, Σλ = 1, orthonormal v.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LowRankDensity {
    values: Vec<f64>,
    vectors: Vec<SparseVector>,
}

impl LowRankDensity {
    /// Pure state `φ φᵀ` for a non-zero φ (normalized here).
    pub fn pure(phi: &SparseVector) -> Result<Self> {
        let v = phi.normalized().ok_or(Error::DegenerateDensity(0.0))?;
        Ok(LowRankDensity {
            values: vec![1.0],
            vectors: vec![v],
        })
    }

    /// Assumes the pairs already satisfy the density invariants.
    pub(crate) fn from_parts_unchecked(values: Vec<f64>, vectors: Vec<SparseVector>) -> Self {
        LowRankDensity { values, vectors }
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, &SparseVector)> {
        self.values.iter().copied().zip(self.vectors.iter())
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Keeps the `k` leading eigenpairs and renormalizes the trace.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        let pairs: Vec<EigenPair> = self
            .pairs()
            .take(k)
            .map(|(value, v)| EigenPair {
                value,
                vector: v.clone(),
            })
            .collect();
        normalize_trace(pairs)
    }

    /// Same eigenvectors with eigenvalues multiplied by `c > 0`. The result
    /// is no longer trace normalized; used to check ranking invariance.
    pub fn rescaled(&self, c: f64) -> Self {
        LowRankDensity {
            values: self.values.iter().map(|v| v * c).collect(),
            vectors: self.vectors.clone(),
        }
    }
}

/// Divides every eigenvalue by their sum, clamping tiny negatives to zero and
/// dropping pairs that end up null. Ordering is preserved (and enforced).
pub fn normalize_trace(mut pairs: Vec<EigenPair>) -> Result<LowRankDensity> {
    for p in &mut pairs {
        if p.value < 0.0 {
            p.value = 0.0;
        }
    }
    let total: f64 = pairs.iter().map(|p| p.value).sum();
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(total > 0.0) {
        return Err(Error::DegenerateDensity(total));
    }
    pairs.retain(|p| p.value > 0.0);
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    let (values, vectors) = pairs.into_iter().map(|p| (p.value / total, p.vector)).unzip();
    Ok(LowRankDensity { values, vectors })
}

/// Orthogonal projector onto `span{u_j}`; empty basis is the zero projector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Projector {
    basis: Vec<SparseVector>,
}

impl Projector {
    pub fn zero() -> Self {
        Projector::default()
    }

    /// Assumes `basis` is orthonormal.
    pub fn from_orthonormal(basis: Vec<SparseVector>) -> Self {
        Projector { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[SparseVector] {
        &self.basis
    }

    /// `‖P φ‖²`.
    pub fn projection_norm_sq(&self, phi: &SparseVector) -> f64 {
        self.basis.iter().map(|u| u.dot(phi).powi(2)).sum()
    }
}

/// `tr(ρ P) = Σ_i λ_i Σ_j (v_i · u_j)²`.
pub fn trace_product(rho: &LowRankDensity, p: &Projector) -> f64 {
    rho.pairs().map(|(l, v)| l * p.projection_norm_sq(v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(v: &[f64]) -> SparseVector {
        SparseVector::from_dense(v)
    }

    fn pairs(values: &[f64]) -> Vec<EigenPair> {
        values
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                let mut d = vec![0.0; values.len()];
                d[i] = 1.0;
                EigenPair { value, vector: dense(&d) }
            })
            .collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_trace(pairs(&[2.0, 2.0])).unwrap().values(), &[0.5, 0.5]);
        assert_eq!(normalize_trace(pairs(&[1.0])).unwrap().values(), &[1.0]);
        assert_eq!(normalize_trace(pairs(&[3.0, 1.0])).unwrap().values(), &[0.75, 0.25]);
        assert!(matches!(normalize_trace(vec![]), Err(Error::DegenerateDensity(_))));
        assert!(normalize_trace(pairs(&[0.0, -1e-14])).is_err());
    }

    #[test]
    fn trace_product_examples() {
        let e1 = dense(&[1.0, 0.0, 0.0]);
        let e2 = dense(&[0.0, 1.0, 0.0]);
        let p1 = Projector::from_orthonormal(vec![e1.clone()]);
        let rho = LowRankDensity::pure(&e1).unwrap();
        assert!((trace_product(&rho, &p1) - 1.0).abs() < 1e-15);

        let h = 0.5f64.sqrt();
        let rho = LowRankDensity::pure(&dense(&[h, h, 0.0])).unwrap();
        assert!((trace_product(&rho, &p1) - 0.5).abs() < 1e-15);

        let rho = LowRankDensity::from_parts_unchecked(vec![0.5, 0.5], vec![e1, e2]);
        assert!((trace_product(&rho, &p1) - 0.5).abs() < 1e-15);
        assert_eq!(trace_product(&rho, &Projector::zero()), 0.0);
    }

    #[test]
    fn truncation_renormalizes() {
        let rho = normalize_trace(pairs(&[0.5, 0.3, 0.2])).unwrap();
        let t = rho.truncated(1).unwrap();
        assert_eq!(t.values(), &[1.0]);
    }
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TermId;

/// A vector over the term space, stored as `(term id, weight)` pairs sorted by
/// term id, with no explicit zeros.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(TermId, f64)>,
    norm: f64,
}

impl SparseVector {
    pub fn zero() -> Self {
        SparseVector::default()
    }

    /// Builds a vector from arbitrary pairs; repeated ids are summed and
    /// zeros dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (TermId, f64)>) -> Self {
        let mut entries: Vec<(TermId, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(t, _)| t);
        let mut merged: Vec<(TermId, f64)> = Vec::with_capacity(entries.len());
        for (t, w) in entries {
            match merged.last_mut() {
                Some((lt, lw)) if *lt == t => *lw += w,
                _ => merged.push((t, w)),
            }
        }
        merged.retain(|&(_, w)| w != 0.0);
        Self::from_sorted_unchecked(merged)
    }

    fn from_sorted_unchecked(entries: Vec<(TermId, f64)>) -> Self {
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        SparseVector { entries, norm }
    }

    /// Dense coordinates `0..len` as a sparse vector.
    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.iter().enumerate().map(|(i, &w)| (i as TermId, w)))
    }

    pub fn entries(&self) -> &[(TermId, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn get(&self, t: TermId) -> f64 {
        self.entries
            .binary_search_by_key(&t, |&(id, _)| id)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    pub fn scaled(&self, c: f64) -> SparseVector {
        if c == 0.0 {
            return SparseVector::zero();
        }
        Self::from_sorted_unchecked(self.entries.iter().map(|&(t, w)| (t, w * c)).collect())
    }

    /// Unit-length copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<SparseVector> {
        (self.norm > 0.0).then(|| self.scaled(1.0 / self.norm))
    }

    /// `Σ c_i x_i`.
    pub fn linear_combination<'a>(
        terms: impl IntoIterator<Item = (f64, &'a SparseVector)>,
    ) -> SparseVector {
        let mut acc: HashMap<TermId, f64> = HashMap::new();
        for (c, v) in terms {
            if c == 0.0 {
                continue;
            }
            for &(t, w) in &v.entries {
                *acc.entry(t).or_default() += c * w;
            }
        }
        SparseVector::from_pairs(acc)
    }

    pub fn support(&self) -> impl Iterator<Item = TermId> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }
}

pub fn dot(a: &SparseVector, b: &SparseVector) -> f64 {
    a.dot(b)
}

//! Query densities built from stored term densities.
//!
//! Two constructions are supported. The mixture is `Σ_t w_t ρ_t`. The
//! mixture of superpositions averages `v vᵀ` over every choice of one vector
//! per query term, with `v = Σ_i √(w_i/N_i) φ_i` left unnormalized. Expanding
//! that sum over all `Π N_i` choices gives
//!
//! ```text
//! Π_k N_k · [ Σ_i (w_i/N_i) ρ_i  +  Σ_{i≠j} √(w_i w_j / (N_i N_j)) m_i m_jᵀ ]
//! ```
//!
//! with `m_i` the mean fragment vector of term i, so the per-term summaries
//! (density, mean, count) are enough to evaluate it. The global factor is
//! absorbed by trace normalization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{TermId, VocabularyStats};
use crate::docspace::{impl_text_enum, select_dimension, DimensionRule};
use crate::error::{Error, Result};
use crate::linalg::jacobi::SymMatrix;
use crate::linalg::{normalize_trace, operator_eigendecomposition, LowRankDensity, SparseVector};
use crate::termdensity::{TermDensityStore, TermDensitySummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryTermWeighting {
    Uniform,
    Idf,
}

impl QueryTermWeighting {
    pub const ALL: [QueryTermWeighting; 2] = [QueryTermWeighting::Uniform, QueryTermWeighting::Idf];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryTermWeighting::Uniform => "uniform",
            QueryTermWeighting::Idf => "idf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryConstruction {
    Mixture,
    Superposition,
}

impl QueryConstruction {
    pub const ALL: [QueryConstruction; 2] = [QueryConstruction::Mixture, QueryConstruction::Superposition];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryConstruction::Mixture => "mixture",
            QueryConstruction::Superposition => "superposition",
        }
    }
}

impl_text_enum!(QueryTermWeighting, "term weighting");
impl_text_enum!(QueryConstruction, "query construction");

#[derive(Debug, Clone, PartialEq)]
pub struct QueryDensity {
    pub density: LowRankDensity,
    pub terms: Vec<TermId>,
    pub construction: QueryConstruction,
    /// Normalization coefficient of the superposition construction.
    pub z_q: Option<f64>,
}

/// Merges repeated terms, drops terms without a stored density and returns
/// `(term, weight)` pairs in term-id order with weights summing to 1.
pub fn term_weights(
    terms: &[String],
    mode: QueryTermWeighting,
    vocab: &VocabularyStats,
    store: &TermDensityStore,
) -> Result<Vec<(TermId, f64)>> {
    let mut counts: BTreeMap<TermId, f64> = BTreeMap::new();
    for t in terms {
        match vocab.term_id(t).filter(|&id| store.get(id).is_some()) {
            Some(id) => *counts.entry(id).or_default() += 1.0,
            None => log::warn!("dropping query term `{t}`: no term density"),
        }
    }
    let idfs: Vec<(TermId, f64)> = counts
        .keys()
        .map(|&id| (id, vocab.idf(id)))
        .collect();
    weights_from_counts(&counts, mode, &idfs)
}

/// Weights from per-term multiplicities and idf values.
pub fn weights_from_counts(
    counts: &BTreeMap<TermId, f64>,
    mode: QueryTermWeighting,
    idfs: &[(TermId, f64)],
) -> Result<Vec<(TermId, f64)>> {
    if counts.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let uniform = || {
        let total: f64 = counts.values().sum();
        counts.iter().map(|(&t, &c)| (t, c / total)).collect::<Vec<_>>()
    };
    Ok(match mode {
        QueryTermWeighting::Uniform => uniform(),
        QueryTermWeighting::Idf => {
            let raw: Vec<(TermId, f64)> = counts
                .iter()
                .map(|(&t, &c)| {
                    let idf = idfs.iter().find(|(id, _)| *id == t).map_or(0.0, |&(_, v)| v);
                    (t, c * idf)
                })
                .collect();
            let total: f64 = raw.iter().map(|(_, w)| w).sum();
            if total > 0.0 {
                raw.into_iter().map(|(t, w)| (t, w / total)).collect()
            } else {
                uniform()
            }
        }
    })
}

fn finish(pairs: Vec<crate::linalg::EigenPair>) -> Result<LowRankDensity> {
    normalize_trace(pairs)
}

/// `ρ_q = Σ_t w_t ρ_t`, decomposed in the joint span of the stored
/// eigenvectors.
pub fn mixture_density(summaries: &[&TermDensitySummary], weights: &[f64]) -> Result<QueryDensity> {
    assert_eq!(summaries.len(), weights.len());
    if summaries.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut basis: Vec<SparseVector> = Vec::new();
    let mut diag: Vec<f64> = Vec::new();
    for (s, &w) in summaries.iter().zip(weights) {
        for (l, v) in s.density.pairs() {
            basis.push(v.clone());
            diag.push(w * l);
        }
    }
    let c = SymMatrix::from_upper(basis.len(), |i, j| if i == j { diag[i] } else { 0.0 });
    let density = finish(operator_eigendecomposition(&basis, &c))?;
    Ok(QueryDensity {
        density,
        terms: summaries.iter().map(|s| s.term_id).collect(),
        construction: QueryConstruction::Mixture,
        z_q: None,
    })
}

/// Mixture of superpositions, evaluated through the closed form in the
/// module documentation.
pub fn superposition_mixture_density(summaries: &[&TermDensitySummary], weights: &[f64]) -> Result<QueryDensity> {
    assert_eq!(summaries.len(), weights.len());
    if summaries.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let n = summaries.len();
    let mut basis: Vec<SparseVector> = Vec::new();
    let mut diag: Vec<f64> = Vec::new();
    for (s, &w) in summaries.iter().zip(weights) {
        let scale = w / s.n_vectors as f64;
        for (l, v) in s.density.pairs() {
            basis.push(v.clone());
            diag.push(scale * l);
        }
    }
    let mean_offset = basis.len();
    basis.extend(summaries.iter().map(|s| s.mean.clone()));
    let amp: Vec<f64> = summaries
        .iter()
        .zip(weights)
        .map(|(s, &w)| (w / s.n_vectors as f64).sqrt())
        .collect();

    let c = SymMatrix::from_upper(basis.len(), |a, b| {
        if a < mean_offset {
            if a == b {
                diag[a]
            } else {
                0.0
            }
        } else if b >= mean_offset && a != b {
            // both in the mean block; symmetric halves come from (a,b) and (b,a)
            amp[a - mean_offset] * amp[b - mean_offset]
        } else {
            0.0
        }
    });

    let mut trace: f64 = diag.iter().sum();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                trace += amp[i] * amp[j] * summaries[i].mean.dot(&summaries[j].mean);
            }
        }
    }
    let combos: f64 = summaries.iter().map(|s| s.n_vectors as f64).product();

    let density = finish(operator_eigendecomposition(&basis, &c))?;
    Ok(QueryDensity {
        density,
        terms: summaries.iter().map(|s| s.term_id).collect(),
        construction: QueryConstruction::Superposition,
        z_q: Some(combos * trace),
    })
}

pub fn build_query_density(
    summaries: &[&TermDensitySummary],
    weights: &[f64],
    construction: QueryConstruction,
) -> Result<QueryDensity> {
    match construction {
        QueryConstruction::Mixture => mixture_density(summaries, weights),
        QueryConstruction::Superposition => superposition_mixture_density(summaries, weights),
    }
}

/// Keeps the eigenpairs chosen by `rule` and renormalizes.
pub fn finalize_query_density(qd: QueryDensity, rule: DimensionRule) -> Result<QueryDensity> {
    let k = select_dimension(qd.density.values(), rule);
    if k == qd.density.rank() {
        return Ok(qd);
    }
    Ok(QueryDensity {
        density: qd.density.truncated(k)?,
        ..qd
    })
}

/// Tokenized query text → finalized query density.
pub fn query_density_for_terms(
    terms: &[String],
    vocab: &VocabularyStats,
    store: &TermDensityStore,
    weighting: QueryTermWeighting,
    construction: QueryConstruction,
    rule: DimensionRule,
) -> Result<QueryDensity> {
    let weights = term_weights(terms, weighting, vocab, store)?;
    let summaries: Vec<&TermDensitySummary> = weights
        .iter()
        .map(|&(t, _)| store.get(t).expect("weights only keep stored terms"))
        .collect();
    let w: Vec<f64> = weights.iter().map(|&(_, w)| w).collect();
    finalize_query_density(build_query_density(&summaries, &w, construction)?, rule)
}

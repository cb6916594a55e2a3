//! Document subspaces: fragment vectors, their eigenbasis and the projector
//! kept after dimension selection.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocIdx, Granularity, TermId, VocabularyStats};
use crate::linalg::{
    scatter_eigendecomposition, truncated_eigendecomposition, EigenPair, Projector, SparseVector,
};

/// Term weighting used to turn a fragment into a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeightingScheme {
    #[serde(rename = "tfidf")]
    TfIdf,
    #[serde(rename = "tf")]
    Tf,
    #[serde(rename = "binary")]
    Binary,
}

impl WeightingScheme {
    pub const ALL: [WeightingScheme; 3] =
        [WeightingScheme::TfIdf, WeightingScheme::Tf, WeightingScheme::Binary];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightingScheme::TfIdf => "tfidf",
            WeightingScheme::Tf => "tf",
            WeightingScheme::Binary => "binary",
        }
    }
}

/// How many leading eigenvectors to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionRule {
    /// K = 1
    Highest,
    /// every eigenvalue at least the mean eigenvalue
    Mean,
    /// K = D
    All,
}

impl DimensionRule {
    pub const ALL: [DimensionRule; 3] = [DimensionRule::Highest, DimensionRule::Mean, DimensionRule::All];

    pub fn as_str(self) -> &'static str {
        match self {
            DimensionRule::Highest => "highest",
            DimensionRule::Mean => "mean",
            DimensionRule::All => "all",
        }
    }
}

macro_rules! impl_text_enum {
    ($ty:ty, $what:literal) => {
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $ty {
            type Err = crate::Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| crate::Error::InvalidValue {
                        what: $what,
                        value: s.to_string(),
                    })
            }
        }
    };
}
pub(crate) use impl_text_enum;

impl_text_enum!(WeightingScheme, "weighting scheme");
impl_text_enum!(DimensionRule, "dimension rule");

/// Unit-length vector for a fragment; `None` when every weight is zero.
pub fn fragment_vector(
    tokens: &[TermId],
    scheme: WeightingScheme,
    stats: &VocabularyStats,
) -> Option<SparseVector> {
    let mut counts: HashMap<TermId, u32> = HashMap::new();
    for &t in tokens {
        *counts.entry(t).or_default() += 1;
    }
    let weights = counts.into_iter().map(|(t, c)| {
        let w = match scheme {
            WeightingScheme::Tf => c as f64,
            WeightingScheme::Binary => 1.0,
            WeightingScheme::TfIdf => c as f64 * stats.idf(t),
        };
        (t, w)
    });
    SparseVector::from_pairs(weights).normalized()
}

/// Number of eigenpairs to keep from a descending list.
pub fn select_dimension(eigenvalues: &[f64], rule: DimensionRule) -> usize {
    if eigenvalues.is_empty() {
        return 0;
    }
    match rule {
        DimensionRule::Highest => 1,
        DimensionRule::All => eigenvalues.len(),
        DimensionRule::Mean => {
            let mean = eigenvalues.iter().sum::<f64>() / eigenvalues.len() as f64;
            eigenvalues.iter().filter(|&&l| l >= mean).count()
        }
    }
}

/// Documents with more fragments than this go through the incremental
/// decomposition with [`LONG_DOCUMENT_RANK`].
pub const LONG_DOCUMENT_FRAGMENTS: usize = 512;
pub const LONG_DOCUMENT_RANK: usize = 128;

/// Eigenpairs of a document's fragment scatter, before dimension selection.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentEigen {
    pub pairs: Vec<EigenPair>,
}

impl DocumentEigen {
    pub fn from_fragment_vectors(vectors: Vec<SparseVector>) -> Self {
        let pairs = if vectors.len() > LONG_DOCUMENT_FRAGMENTS {
            truncated_eigendecomposition(vectors, LONG_DOCUMENT_RANK).pairs
        } else {
            let n = vectors.len();
            scatter_eigendecomposition(&vectors, n)
        };
        DocumentEigen { pairs }
    }

    pub fn full_rank(&self) -> usize {
        self.pairs.len()
    }

    pub fn select(&self, rule: DimensionRule) -> Projector {
        let values: Vec<f64> = self.pairs.iter().map(|p| p.value).collect();
        let k = select_dimension(&values, rule);
        Projector::from_orthonormal(self.pairs[..k].iter().map(|p| p.vector.clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentSubspace {
    pub doc_id: String,
    pub projector: Projector,
    /// Rank of the fragment scatter before selection.
    pub full_rank: usize,
}

pub fn document_fragment_vectors(
    index: &CorpusIndex,
    doc: DocIdx,
    granularity: Granularity,
    scheme: WeightingScheme,
) -> Vec<SparseVector> {
    index
        .fragments(doc, granularity)
        .iter()
        .filter_map(|f| fragment_vector(f, scheme, index.vocab()))
        .collect()
}

pub fn build_document_eigen(
    index: &CorpusIndex,
    doc: DocIdx,
    granularity: Granularity,
    scheme: WeightingScheme,
) -> DocumentEigen {
    DocumentEigen::from_fragment_vectors(document_fragment_vectors(index, doc, granularity, scheme))
}

pub fn build_document_subspace(
    index: &CorpusIndex,
    doc: DocIdx,
    granularity: Granularity,
    scheme: WeightingScheme,
    rule: DimensionRule,
) -> DocumentSubspace {
    let eig = build_document_eigen(index, doc, granularity, scheme);
    DocumentSubspace {
        doc_id: index.doc_id(doc).to_string(),
        projector: eig.select(rule),
        full_rank: eig.full_rank(),
    }
}

/// Insert-if-absent memo table shared across threads.
#[derive(Debug)]
pub(crate) struct Memo<K, V> {
    map: RwLock<HashMap<K, Arc<V>>>,
}

impl<K: Eq + Hash + Clone, V> Memo<K, V> {
    pub fn new() -> Self {
        Memo {
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn get_or_insert_with(&self, key: &K, make: impl FnOnce() -> V) -> Arc<V> {
        if let Some(v) = self.map.read().expect("memo lock").get(key) {
            return Arc::clone(v);
        }
        let value = Arc::new(make());
        let mut map = self.map.write().expect("memo lock");
        Arc::clone(map.entry(key.clone()).or_insert(value))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("memo lock").len()
    }
}

/// Lazily built document projectors keyed by
/// `(document, granularity, scheme, rule)`.
#[derive(Debug)]
pub struct SubspaceCache {
    eigen: Memo<(DocIdx, Granularity, WeightingScheme), DocumentEigen>,
    projectors: Memo<(DocIdx, Granularity, WeightingScheme, DimensionRule), Projector>,
}

impl Default for SubspaceCache {
    fn default() -> Self {
        Self::new()
    }
}

impl SubspaceCache {
    pub fn new() -> Self {
        SubspaceCache {
            eigen: Memo::new(),
            projectors: Memo::new(),
        }
    }

    pub fn projector(
        &self,
        index: &CorpusIndex,
        doc: DocIdx,
        granularity: Granularity,
        scheme: WeightingScheme,
        rule: DimensionRule,
    ) -> Arc<Projector> {
        self.projectors.get_or_insert_with(&(doc, granularity, scheme, rule), || {
            let eig = self.eigen.get_or_insert_with(&(doc, granularity, scheme), || {
                build_document_eigen(index, doc, granularity, scheme)
            });
            eig.select(rule)
        })
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::linalg::{trace_product, LowRankDensity};

    fn stats() -> VocabularyStats {
        VocabularyStats::new(vec!["cambridg".into(), "pizza".into()], vec![1, 1], 2)
    }

    #[test]
    fn fragment_vector_schemes() {
        let s = stats();
        // pizza = 1, cambridg = 0
        let toks = [1, 1, 0];
        let tf = fragment_vector(&toks, WeightingScheme::Tf, &s).unwrap();
        assert!((tf.get(1) - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((tf.get(0) - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        let bin = fragment_vector(&toks, WeightingScheme::Binary, &s).unwrap();
        assert!((bin.get(0) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((bin.get(1) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fragment_vector_tfidf_hand_computed() {
        // idf(pizza) = 1, idf(cambridg) = 2 via N and df chosen to fit:
        // ln((N+1)/(df+1)); pick stats with those exact values by scaling
        // instead: counts (2, 1) × idf (1, 2) → (2, 2) → unit (0.7071, 0.7071).
        let raw = SparseVector::from_pairs([(1, 2.0 * 1.0), (0, 1.0 * 2.0)]);
        let unit = raw.normalized().unwrap();
        assert!((unit.get(0) - 0.707_106_781_186_547_5).abs() < 1e-12);
        assert!((unit.get(1) - 0.707_106_781_186_547_5).abs() < 1e-12);

        // through the real path: df(cambridg) = 1, df(pizza) = 3 of N = 3
        // gives idf(pizza) = 0, so only cambridg survives
        let s = VocabularyStats::new(vec!["cambridg".into(), "pizza".into()], vec![1, 3], 3);
        let v = fragment_vector(&[1, 1, 0], WeightingScheme::TfIdf, &s).unwrap();
        assert_eq!(v.entries(), &[(0, 1.0)]);
        assert!(fragment_vector(&[1, 1], WeightingScheme::TfIdf, &s).is_none());
    }

    #[test]
    fn select_dimension_examples() {
        assert_eq!(select_dimension(&[5.0], DimensionRule::Highest), 1);
        assert_eq!(select_dimension(&[3.0, 1.0], DimensionRule::Mean), 1);
        assert_eq!(select_dimension(&[1.0, 1.0, 1.0], DimensionRule::Mean), 3);
        assert_eq!(select_dimension(&[], DimensionRule::All), 0);
        assert_eq!(select_dimension(&[3.0, 2.0, 1.0], DimensionRule::All), 3);
    }

    #[test]
    fn orthonormal_fragments_full_projector() {
        let e1 = SparseVector::from_dense(&[1.0, 0.0]);
        let e2 = SparseVector::from_dense(&[0.0, 1.0]);
        let eig = DocumentEigen::from_fragment_vectors(vec![e1, e2]);
        let p = eig.select(DimensionRule::All);
        assert_eq!(p.dim(), 2);
        let rho = LowRankDensity::pure(&SparseVector::from_dense(&[0.3, -0.4])).unwrap();
        assert!((trace_product(&rho, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_fragment_rank_one() {
        let e1 = SparseVector::from_dense(&[1.0, 0.0]);
        let eig = DocumentEigen::from_fragment_vectors(vec![e1.clone(), e1]);
        for rule in DimensionRule::ALL {
            assert_eq!(eig.select(rule).dim(), 1);
        }
    }

    #[test]
    fn highest_rule_two_by_two() {
        // scatter [[1.5,0.5],[0.5,0.5]]: λ_max = 1 + 1/√2, v ∝ (1+√2, 1)
        let a = SparseVector::from_dense(&[1.0, 0.0]);
        let b = SparseVector::from_dense(&[0.5f64.sqrt(), 0.5f64.sqrt()]);
        let eig = DocumentEigen::from_fragment_vectors(vec![a, b]);
        assert!((eig.pairs[0].value - (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
        let p = eig.select(DimensionRule::Highest);
        let v = &p.basis()[0];
        let r = 1.0 + 2f64.sqrt();
        let n = (r * r + 1.0).sqrt();
        assert!((v.get(0).abs() - r / n).abs() < 1e-12);
        assert!((v.get(1).abs() - 1.0 / n).abs() < 1e-12);
    }

    #[test]
    fn document_granularity_is_one_dimensional() {
        let docs = vec![
            Document::new("a", vec!["Pizza delivery tonight.".into(), "Cambridge college rowing.".into()])
                .unwrap(),
            Document::new("b", vec!["Other pizza".into()]).unwrap(),
        ];
        let idx = CorpusIndex::build(docs, &Granularity::ALL).unwrap();
        for scheme in WeightingScheme::ALL {
            let dims: Vec<usize> = DimensionRule::ALL
                .iter()
                .map(|&r| build_document_subspace(&idx, 0, Granularity::Document, scheme, r).projector.dim())
                .collect();
            assert_eq!(dims, vec![1, 1, 1]);
            let s = build_document_subspace(&idx, 0, Granularity::Paragraph, scheme, DimensionRule::All);
            assert_eq!(s.full_rank, 2);
        }
    }

    #[test]
    fn zero_fragment_document_zero_projector() {
        let docs = vec![Document::new("a", vec!["the of and".into()]).unwrap()];
        let idx = CorpusIndex::build(docs, &Granularity::ALL).unwrap();
        let s = build_document_subspace(&idx, 0, Granularity::Sentence, WeightingScheme::Tf, DimensionRule::All);
        assert_eq!(s.projector.dim(), 0);
    }

    #[test]
    fn cache_reuses_entries() {
        let docs = vec![Document::new("a", vec!["Pizza here. Cambridge there.".into()]).unwrap()];
        let idx = CorpusIndex::build(docs, &Granularity::ALL).unwrap();
        let cache = SubspaceCache::new();
        let p1 = cache.projector(&idx, 0, Granularity::Sentence, WeightingScheme::Tf, DimensionRule::All);
        let p2 = cache.projector(&idx, 0, Granularity::Sentence, WeightingScheme::Tf, DimensionRule::All);
        assert!(Arc::ptr_eq(&p1, &p2));
        assert_eq!(p1.dim(), 2);
        assert_eq!(cache.len(), 1);
    }
}

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::segment::{segment, Granularity};
use super::Document;
use crate::error::{Error, Result};

pub type TermId = u32;
/// Position of a document in the index (documents are stored sorted by id).
pub type DocIdx = u32;

/// `ln((N + 1) / (df + 1))`.
pub fn idf(df: u32, n_docs: u32) -> f64 {
    ((n_docs as f64 + 1.0) / (df as f64 + 1.0)).ln()
}

/// Vocabulary and document frequencies. Term ids follow lexicographic term
/// order, so they do not depend on document insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct VocabularyStats {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: u32,
    lookup: HashMap<String, TermId>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: u32,
}

impl From<VocabularyRepr> for VocabularyStats {
    fn from(r: VocabularyRepr) -> Self {
        VocabularyStats::new(r.terms, r.df, r.n_docs)
    }
}

impl From<VocabularyStats> for VocabularyRepr {
    fn from(v: VocabularyStats) -> Self {
        VocabularyRepr {
            terms: v.terms,
            df: v.df,
            n_docs: v.n_docs,
        }
    }
}

impl VocabularyStats {
    pub fn new(terms: Vec<String>, df: Vec<u32>, n_docs: u32) -> Self {
        let lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        VocabularyStats {
            terms,
            df,
            n_docs,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.lookup.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self, id: TermId) -> u32 {
        self.df[id as usize]
    }

    pub fn idf(&self, id: TermId) -> f64 {
        idf(self.df(id), self.n_docs)
    }

    /// idf of a surface term; unseen terms get df = 0.
    pub fn idf_of(&self, term: &str) -> f64 {
        idf(self.term_id(term).map_or(0, |id| self.df(id)), self.n_docs)
    }

    /// SHA-256 over the ordered term list and corpus size, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.n_docs.to_le_bytes());
        for t in &self.terms {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The inverted index over a document collection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusIndex {
    documents: Vec<Document>,
    vocab: VocabularyStats,
    /// term id -> ascending document indices
    postings: Vec<Vec<DocIdx>>,
    /// per document: (term id, tf) sorted by term id
    doc_terms: Vec<Vec<(TermId, u32)>>,
    doc_len: Vec<u32>,
    /// granularity -> document -> fragment -> term ids in token order
    fragments: BTreeMap<Granularity, Vec<Vec<Vec<TermId>>>>,
}

impl CorpusIndex {
    pub fn build(mut documents: Vec<Document>, granularities: &[Granularity]) -> Result<Self> {
        documents.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = documents.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateDocument(w[0].id.clone()));
        }
        let mut grans: BTreeSet<Granularity> = granularities.iter().copied().collect();
        grans.insert(Granularity::Document);

        let segmented: BTreeMap<Granularity, Vec<Vec<Vec<String>>>> = grans
            .iter()
            .map(|&g| {
                let per_doc = documents
                    .iter()
                    .map(|d| segment(d, g).into_iter().map(|f| f.tokens).collect())
                    .collect();
                (g, per_doc)
            })
            .collect();

        let whole = &segmented[&Granularity::Document];
        let terms: Vec<String> = whole
            .iter()
            .flatten()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let lookup: HashMap<&str, TermId> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as TermId))
            .collect();

        let mut postings = vec![Vec::new(); terms.len()];
        let mut doc_terms = Vec::with_capacity(documents.len());
        let mut doc_len = Vec::with_capacity(documents.len());
        for (d, frags) in whole.iter().enumerate() {
            let mut tf: BTreeMap<TermId, u32> = BTreeMap::new();
            let mut len = 0u32;
            for tok in frags.iter().flatten() {
                *tf.entry(lookup[tok.as_str()]).or_default() += 1;
                len += 1;
            }
            for &t in tf.keys() {
                postings[t as usize].push(d as DocIdx);
            }
            doc_terms.push(tf.into_iter().collect());
            doc_len.push(len);
        }
        let df = postings.iter().map(|p| p.len() as u32).collect();

        let fragments = segmented
            .into_iter()
            .map(|(g, per_doc)| {
                let ids = per_doc
                    .into_iter()
                    .map(|frags| {
                        frags
                            .into_iter()
                            .map(|toks| toks.iter().map(|t| lookup[t.as_str()]).collect())
                            .collect()
                    })
                    .collect();
                (g, ids)
            })
            .collect();

        let n_docs = documents.len() as u32;
        Ok(CorpusIndex {
            documents,
            vocab: VocabularyStats::new(terms, df, n_docs),
            postings,
            doc_terms,
            doc_len,
            fragments,
        })
    }

    pub fn vocab(&self) -> &VocabularyStats {
        &self.vocab
    }

    pub fn n_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc_id(&self, d: DocIdx) -> &str {
        &self.documents[d as usize].id
    }

    pub fn doc_index(&self, id: &str) -> Option<DocIdx> {
        self.documents
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| i as DocIdx)
    }

    pub fn postings(&self, term: TermId) -> &[DocIdx] {
        &self.postings[term as usize]
    }

    pub fn doc_terms(&self, d: DocIdx) -> &[(TermId, u32)] {
        &self.doc_terms[d as usize]
    }

    pub fn term_frequency(&self, d: DocIdx, term: TermId) -> u32 {
        let terms = self.doc_terms(d);
        terms
            .binary_search_by_key(&term, |&(t, _)| t)
            .map_or(0, |i| terms[i].1)
    }

    pub fn doc_len(&self, d: DocIdx) -> u32 {
        self.doc_len[d as usize]
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.doc_len.is_empty() {
            0.0
        } else {
            self.doc_len.iter().map(|&l| l as f64).sum::<f64>() / self.doc_len.len() as f64
        }
    }

    pub fn has_granularity(&self, g: Granularity) -> bool {
        self.fragments.contains_key(&g)
    }

    /// Fragments of a document at a granularity, as term id sequences.
    pub fn fragments(&self, d: DocIdx, g: Granularity) -> &[Vec<TermId>] {
        let per_doc = self
            .fragments
            .get(&g)
            .unwrap_or_else(|| panic!("index was built without {g} fragments"));
        &per_doc[d as usize]
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("index.json");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::Json { path, source: e })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("index.json");
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::Json { path, source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, vec![text.to_string()]).unwrap()
    }

    #[test]
    fn counts_document_frequency() {
        let idx = CorpusIndex::build(
            vec![doc("d1", "pizza pizza"), doc("d2", "pizza cambridge")],
            &Granularity::ALL,
        )
        .unwrap();
        let v = idx.vocab();
        assert_eq!(v.n_docs(), 2);
        assert_eq!(v.df(v.term_id("pizza").unwrap()), 2);
        assert_eq!(v.df(v.term_id("cambridg").unwrap()), 1);
        assert_eq!(idx.term_frequency(0, v.term_id("pizza").unwrap()), 2);
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = CorpusIndex::build(vec![doc("x", "a pizza"), doc("x", "b pizza")], &[]).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocument(id) if id == "x"));
    }

    #[test]
    fn empty_collection() {
        let idx = CorpusIndex::build(vec![], &Granularity::ALL).unwrap();
        assert_eq!(idx.n_docs(), 0);
        assert!(idx.vocab().is_empty());
    }

    #[test]
    fn term_in_every_document() {
        let idx = CorpusIndex::build(
            vec![doc("a", "pizza one"), doc("b", "pizza two"), doc("c", "pizza three")],
            &[],
        )
        .unwrap();
        let t = idx.vocab().term_id("pizza").unwrap();
        assert_eq!(idx.postings(t), &[0, 1, 2]);
        assert_eq!(idx.vocab().df(t), 3);
    }

    #[test]
    fn idf_values() {
        assert_eq!(idf(1, 1), 0.0);
        assert!((idf(0, 9) - 10f64.ln()).abs() < 1e-12);
        assert!((idf(4, 9) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_token_document_indexed() {
        let idx = CorpusIndex::build(vec![doc("a", "the of"), doc("b", "pizza")], &Granularity::ALL)
            .unwrap();
        assert_eq!(idx.n_docs(), 2);
        assert!(idx.fragments(0, Granularity::Sentence).is_empty());
        assert_eq!(idx.doc_len(0), 0);
    }

    #[test]
    fn index_round_trips_through_disk() {
        let idx = CorpusIndex::build(vec![doc("a", "pizza cambridge"), doc("b", "pizza")], &Granularity::ALL)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        idx.save(dir.path()).unwrap();
        let back = CorpusIndex::load(dir.path()).unwrap();
        assert_eq!(back.vocab(), idx.vocab());
        assert_eq!(back.vocab().term_id("pizza"), idx.vocab().term_id("pizza"));
        assert_eq!(back.fragments(0, Granularity::Sentence), idx.fragments(0, Granularity::Sentence));
    }
}

//! BM25 first pass, trace-probability re-ranking and TREC run files.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, CorpusIndex, DocIdx, Granularity, TermId};
use crate::docspace::{DimensionRule, Memo, SubspaceCache, WeightingScheme};
use crate::error::{Error, Result};
use crate::linalg::trace_product;
use crate::querydensity::{query_density_for_terms, QueryConstruction, QueryDensity, QueryTermWeighting};
use crate::termdensity::{TermDensityParams, TermDensityStore, DEFAULT_RANK_CAP, DEFAULT_SAMPLE_SIZE};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_CANDIDATES: usize = 1500;

/// Documents for one topic, best first. Ties are ordered by ascending doc id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    pub topic_id: String,
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    /// Sorts `entries` by descending score, ties by ascending doc id.
    pub fn from_unsorted(topic_id: impl Into<String>, mut entries: Vec<(String, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        RankedList {
            topic_id: topic_id.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(d, _)| d.as_str())
    }
}

/// The seven experiment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamConfig {
    pub granularity: Granularity,
    pub doc_weighting: WeightingScheme,
    pub query_weighting: WeightingScheme,
    pub doc_dim: DimensionRule,
    pub query_dim: DimensionRule,
    pub term_weight: QueryTermWeighting,
    pub construction: QueryConstruction,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig {
            granularity: Granularity::Sentence,
            doc_weighting: WeightingScheme::Tf,
            query_weighting: WeightingScheme::TfIdf,
            doc_dim: DimensionRule::All,
            query_dim: DimensionRule::All,
            term_weight: QueryTermWeighting::Idf,
            construction: QueryConstruction::Mixture,
        }
    }
}

impl ParamConfig {
    /// With whole-document fragments the subspace is one-dimensional, so the
    /// document dimension rule is pinned to `all`.
    pub fn normalized(mut self) -> Self {
        if self.granularity == Granularity::Document {
            self.doc_dim = DimensionRule::All;
        }
        self
    }

    pub fn is_normalized(&self) -> bool {
        *self == self.normalized()
    }

    /// Stable textual key, also used for run tags and file names.
    pub fn label(&self) -> String {
        format!(
            "frag-{}_dw-{}_qw-{}_dd-{}_qd-{}_tw-{}_qc-{}",
            self.granularity,
            self.doc_weighting,
            self.query_weighting,
            self.doc_dim,
            self.query_dim,
            self.term_weight,
            self.construction
        )
    }

    pub fn term_density_key(&self) -> (Granularity, WeightingScheme) {
        (self.granularity, self.query_weighting)
    }
}

/// Okapi BM25 with `k1 = 1.2`, `b = 0.75` and the RSJ idf floored at 0.
pub fn bm25_term_score(tf: f64, df: f64, n_docs: f64, doc_len: f64, avg_len: f64) -> f64 {
    if tf <= 0.0 {
        return 0.0;
    }
    let idf = ((n_docs - df + 0.5) / (df + 0.5)).ln().max(0.0);
    let norm = if avg_len > 0.0 { doc_len / avg_len } else { 1.0 };
    idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
}

pub fn bm25_score(query_terms: &[String], doc: DocIdx, index: &CorpusIndex) -> f64 {
    let vocab = index.vocab();
    let n = vocab.n_docs() as f64;
    let avg = index.avg_doc_len();
    let len = index.doc_len(doc) as f64;
    query_terms
        .iter()
        .filter_map(|t| vocab.term_id(t))
        .map(|id| {
            let tf = index.term_frequency(doc, id) as f64;
            bm25_term_score(tf, vocab.df(id) as f64, n, len, avg)
        })
        .sum()
}

/// Top `k` documents containing at least one query term, by BM25.
pub fn first_pass(topic_id: &str, query_terms: &[String], index: &CorpusIndex, k: usize) -> RankedList {
    let vocab = index.vocab();
    let n = vocab.n_docs() as f64;
    let avg = index.avg_doc_len();
    let mut scores: HashMap<DocIdx, f64> = HashMap::new();
    // repeated query terms count once per occurrence, as in bm25_score
    for t in query_terms {
        let Some(id) = vocab.term_id(t) else { continue };
        let df = vocab.df(id) as f64;
        for &d in index.postings(id) {
            let tf = index.term_frequency(d, id) as f64;
            *scores.entry(d).or_default() += bm25_term_score(tf, df, n, index.doc_len(d) as f64, avg);
        }
    }
    let mut list = RankedList::from_unsorted(
        topic_id,
        scores
            .into_iter()
            .map(|(d, s)| (index.doc_id(d).to_string(), s))
            .collect(),
    );
    list.entries.truncate(k);
    list
}

/// Re-scores candidates by `tr(ρ_q Ŝ_d)`. Unknown doc ids score 0.
pub fn rerank(
    candidates: &RankedList,
    query: &QueryDensity,
    config: &ParamConfig,
    index: &CorpusIndex,
    cache: &SubspaceCache,
) -> RankedList {
    let config = config.normalized();
    let scored: Vec<(String, f64)> = candidates
        .entries
        .par_iter()
        .map(|(doc_id, _)| {
            let score = index.doc_index(doc_id).map_or(0.0, |d| {
                let p = cache.projector(index, d, config.granularity, config.doc_weighting, config.doc_dim);
                trace_product(&query.density, &p)
            });
            (doc_id.clone(), score)
        })
        .collect();
    RankedList::from_unsorted(candidates.topic_id.clone(), scored)
}

/// Renders a run: `topic Q0 doc rank score tag`, ranks from 1, six decimals.
pub fn format_run(lists: &[RankedList], tag: &str) -> String {
    let mut out = String::new();
    for list in lists {
        for (rank, (doc, score)) in list.entries.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {:.6} {}", list.topic_id, doc, rank + 1, score, tag).expect("string write");
        }
    }
    out
}

pub fn write_run(lists: &[RankedList], tag: &str, path: &Path) -> Result<()> {
    std::fs::write(path, format_run(lists, tag)).map_err(|e| Error::io(path, e))
}

/// Parses run text into per-topic lists ordered by rank.
pub fn parse_run(text: &str, path: &Path) -> Result<BTreeMap<String, RankedList>> {
    let mut rows: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 5 {
            return Err(Error::parse(path, n + 1, "expected `topic Q0 doc rank score [tag]`"));
        }
        let rank = f[3]
            .parse::<usize>()
            .map_err(|e| Error::parse(path, n + 1, format!("rank: {e}")))?;
        let score = f[4]
            .parse::<f64>()
            .map_err(|e| Error::parse(path, n + 1, format!("score: {e}")))?;
        rows.entry(f[0].to_string()).or_default().push((rank, f[2].to_string(), score));
    }
    Ok(rows
        .into_iter()
        .map(|(topic, mut r)| {
            r.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let list = RankedList {
                topic_id: topic.clone(),
                entries: r.into_iter().map(|(_, d, s)| (d, s)).collect(),
            };
            (topic, list)
        })
        .collect())
}

pub fn read_run(path: &Path) -> Result<BTreeMap<String, RankedList>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run(&text, path)
}

/// Topics file: `topic_id<TAB>query text` per line.
pub fn parse_topics(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut topics = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, query) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n + 1, "expected `topic_id<TAB>query`"))?;
        topics.push((id.trim().to_string(), query.trim().to_string()));
    }
    Ok(topics)
}

pub fn read_topics(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topics(&text, path)
}

/// Everything needed to answer queries over one index: lazily built term
/// density stores and document subspaces, shared across threads.
#[derive(Debug)]
pub struct Engine {
    index: Arc<CorpusIndex>,
    subspaces: SubspaceCache,
    stores: Memo<(Granularity, WeightingScheme), TermDensityStore>,
    pub rank_cap: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub candidates: usize,
}

impl Engine {
    pub fn new(index: Arc<CorpusIndex>) -> Self {
        Engine {
            index,
            subspaces: SubspaceCache::new(),
            stores: Memo::new(),
            rank_cap: DEFAULT_RANK_CAP,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
            candidates: DEFAULT_CANDIDATES,
        }
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn subspaces(&self) -> &SubspaceCache {
        &self.subspaces
    }

    pub fn term_density_params(&self, granularity: Granularity, scheme: WeightingScheme) -> TermDensityParams {
        TermDensityParams {
            granularity,
            scheme,
            rank_cap: self.rank_cap,
            sample_size: self.sample_size,
            seed: self.seed,
        }
    }

    /// Registers a prebuilt store after checking it matches this index.
    pub fn add_store(&self, store: TermDensityStore) -> Result<()> {
        let key = (store.header.granularity, store.header.scheme);
        store.check_compatible(&self.index, key.0, key.1)?;
        self.stores.get_or_insert_with(&key, || store);
        Ok(())
    }

    /// The store for a pairing, built over the whole vocabulary on first use.
    pub fn store(&self, granularity: Granularity, scheme: WeightingScheme) -> Arc<TermDensityStore> {
        self.ensure_store(granularity, scheme, None)
    }

    /// Like [`Engine::store`], but a first build covers only `terms` when given.
    /// An existing store is returned unchanged.
    pub fn ensure_store(
        &self,
        granularity: Granularity,
        scheme: WeightingScheme,
        terms: Option<&[TermId]>,
    ) -> Arc<TermDensityStore> {
        self.stores.get_or_insert_with(&(granularity, scheme), || {
            TermDensityStore::build(&self.index, &self.term_density_params(granularity, scheme), terms)
        })
    }

    pub fn query_density(&self, query_terms: &[String], config: &ParamConfig) -> Result<QueryDensity> {
        let store = self.store(config.granularity, config.query_weighting);
        query_density_for_terms(
            query_terms,
            self.index.vocab(),
            &store,
            config.term_weight,
            config.construction,
            config.query_dim,
        )
    }

    pub fn first_pass(&self, topic_id: &str, query_terms: &[String]) -> RankedList {
        first_pass(topic_id, query_terms, &self.index, self.candidates)
    }

    pub fn rerank(&self, candidates: &RankedList, query: &QueryDensity, config: &ParamConfig) -> RankedList {
        rerank(candidates, query, config, &self.index, &self.subspaces)
    }

    /// Tokenize, BM25 first pass, re-rank.
    pub fn search(&self, topic_id: &str, query_text: &str, config: &ParamConfig) -> Result<RankedList> {
        let terms = tokenize(query_text);
        let q = self.query_density(&terms, config)?;
        let candidates = self.first_pass(topic_id, &terms);
        Ok(self.rerank(&candidates, &q, config))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::linalg::{LowRankDensity, SparseVector};

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, vec![text.to_string()]).unwrap()
    }

    #[test]
    fn bm25_hand_value() {
        let s = bm25_term_score(2.0, 1.0, 3.0, 10.0, 10.0);
        let want = (2.5f64 / 1.5).ln() * 1.375;
        assert!((s - want).abs() < 1e-12);
        assert!((s - 0.7024).abs() < 1e-4);
        assert_eq!(bm25_term_score(0.0, 1.0, 3.0, 10.0, 10.0), 0.0);
        let mut prev = 0.0;
        for tf in 1..20 {
            let s = bm25_term_score(tf as f64, 1.0, 3.0, 10.0, 10.0);
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn bm25_negative_idf_floored() {
        assert_eq!(bm25_term_score(1.0, 3.0, 3.0, 1.0, 1.0), 0.0);
    }

    fn small_index() -> CorpusIndex {
        CorpusIndex::build(
            vec![doc("d1", "pizza delivery"), doc("d2", "cambridge rowing"), doc("d3", "pizza cambridge")],
            &Granularity::ALL,
        )
        .unwrap()
    }

    #[test]
    fn first_pass_matches_only() {
        let idx = small_index();
        let q = tokenize("delivery rowing");
        let list = first_pass("t", &q, &idx, 1500);
        assert_eq!(list.len(), 2);
        assert_eq!(first_pass("t", &q, &idx, 1).len(), 1);
        assert!(first_pass("t", &[], &idx, 10).is_empty());
        for (d, s) in &list.entries {
            assert!((bm25_score(&q, idx.doc_index(d).unwrap(), &idx) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn first_pass_insertion_order_independent() {
        let a = small_index();
        let b = CorpusIndex::build(
            vec![doc("d3", "pizza cambridge"), doc("d1", "pizza delivery"), doc("d2", "cambridge rowing")],
            &[],
        )
        .unwrap();
        let q = tokenize("pizza cambridge");
        assert_eq!(first_pass("t", &q, &a, 10), first_pass("t", &q, &b, 10));
    }

    #[test]
    fn config_normalization() {
        let c = ParamConfig {
            granularity: Granularity::Document,
            doc_dim: DimensionRule::Highest,
            ..ParamConfig::default()
        };
        assert_eq!(c.normalized().doc_dim, DimensionRule::All);
        assert!(!c.is_normalized());
        assert!(ParamConfig::default().is_normalized());
    }

    #[test]
    fn rerank_by_trace() {
        // d1 = "pizza" only, d2 = "delivery" only; query density 0.9/0.1 on them
        let idx = CorpusIndex::build(vec![doc("d1", "pizza"), doc("d2", "delivery")], &Granularity::ALL).unwrap();
        let pizza = idx.vocab().term_id("pizza").unwrap();
        let deliv = idx.vocab().term_id("deliveri").unwrap();
        let q = QueryDensity {
            density: crate::linalg::normalize_trace(vec![
                crate::linalg::EigenPair { value: 0.1, vector: SparseVector::from_pairs([(deliv, 1.0)]) },
                crate::linalg::EigenPair { value: 0.9, vector: SparseVector::from_pairs([(pizza, 1.0)]) },
            ])
            .unwrap(),
            terms: vec![pizza, deliv],
            construction: QueryConstruction::Mixture,
            z_q: None,
        };
        let cands = RankedList::from_unsorted("t", vec![("d2".into(), 5.0), ("d1".into(), 1.0)]);
        let cache = SubspaceCache::new();
        let out = rerank(&cands, &q, &ParamConfig::default(), &idx, &cache);
        assert_eq!(out.entries[0].0, "d1");
        assert!((out.entries[0].1 - 0.9).abs() < 1e-12);
        assert!((out.entries[1].1 - 0.1).abs() < 1e-12);

        let single = RankedList::from_unsorted("t", vec![("d2".into(), 5.0)]);
        let out = rerank(&single, &q, &ParamConfig::default(), &idx, &cache);
        assert_eq!(out.len(), 1);
        assert!((0.0..=1.0).contains(&out.entries[0].1));
    }

    #[test]
    fn rerank_containment_scores_one() {
        let idx = CorpusIndex::build(
            vec![doc("a", "Pizza delivery. Cambridge rowing."), doc("b", "pizza")],
            &Granularity::ALL,
        )
        .unwrap();
        let pizza = idx.vocab().term_id("pizza").unwrap();
        let q = QueryDensity {
            density: LowRankDensity::pure(&SparseVector::from_pairs([(pizza, 1.0)])).unwrap(),
            terms: vec![pizza],
            construction: QueryConstruction::Mixture,
            z_q: None,
        };
        let cfg = ParamConfig {
            granularity: Granularity::Document,
            doc_weighting: WeightingScheme::Binary,
            ..ParamConfig::default()
        };
        let cands = RankedList::from_unsorted("t", vec![("a".into(), 2.0), ("b".into(), 1.0)]);
        let out = rerank(&cands, &q, &cfg, &idx, &SubspaceCache::new());
        assert_eq!(out.entries[0], ("b".to_string(), 1.0));
    }

    #[test]
    fn run_format() {
        assert_eq!(format_run(&[RankedList::default()], "x"), "");
        let list = RankedList::from_unsorted("7", vec![("b".into(), 0.25), ("a".into(), 0.5)]);
        let text = format_run(std::slice::from_ref(&list), "tag");
        assert_eq!(text, "7 Q0 a 1 0.500000 tag\n7 Q0 b 2 0.250000 tag\n");
        let back = parse_run(&text, Path::new("run")).unwrap();
        assert_eq!(back["7"], list);
        assert!(parse_run("1 Q0 a x 0.1 t", Path::new("run")).is_err());
    }

    #[test]
    fn topics_file() {
        let t = parse_topics("1\tpizza delivery\n\n2\tcambridge\n", Path::new("t")).unwrap();
        assert_eq!(t, vec![("1".to_string(), "pizza delivery".to_string()), ("2".into(), "cambridge".into())]);
        assert!(parse_topics("no tab here", Path::new("t")).is_err());
    }
}

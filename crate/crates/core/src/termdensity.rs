//! Per-term densities `ρ_t = (1/N_t) Σ_{φ∈U_t} φφᵀ`, where `U_t` holds the
//! fragment vectors of every fragment containing `t`, plus the on-disk store
//! that keeps them between indexing and query time.
//!
//! # Store format (version 1, little endian)
//!
//! ```text
//! magic      8 bytes   "QDSTORE\0"
//! version    u32
//! header_len u32
//! header     JSON (StoreHeader), header_len bytes
//! records    header.term_count times:
//!   term_id u32 | df u32 | n_vectors u64
//!   rank u32 | rank × eigenvalue f64 | rank × vector
//!   mean vector
//! vector     nnz u32 | nnz × (term_id u32, weight f64)
//! ```
//!
//! Floats are stored as their IEEE-754 bit patterns, so a load reproduces
//! every value exactly.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusIndex, DocIdx, Granularity, TermId};
use crate::docspace::{fragment_vector, WeightingScheme};
use crate::error::{Error, Result};
use crate::linalg::{normalize_trace, truncated_eigendecomposition, LowRankDensity, SparseVector};

pub const DEFAULT_RANK_CAP: usize = 10;
pub const DEFAULT_SAMPLE_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermDensityParams {
    pub granularity: Granularity,
    pub scheme: WeightingScheme,
    pub rank_cap: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl TermDensityParams {
    pub fn new(granularity: Granularity, scheme: WeightingScheme) -> Self {
        TermDensityParams {
            granularity,
            scheme,
            rank_cap: DEFAULT_RANK_CAP,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermDensitySummary {
    pub term_id: TermId,
    /// Trace-normalized, truncated to the rank cap.
    pub density: LowRankDensity,
    /// Exact `(1/N_t) Σ φ`.
    pub mean: SparseVector,
    /// `N_t`, the number of vectors in `U_t`.
    pub n_vectors: u64,
    pub df: u32,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// All postings when `df <= max_docs`, otherwise `max_docs` of them drawn
/// uniformly without replacement from a generator seeded by
/// `(seed, term_id)`. Returned ascending.
pub fn sample_documents(term_id: TermId, postings: &[DocIdx], max_docs: usize, seed: u64) -> Vec<DocIdx> {
    if postings.len() <= max_docs {
        return postings.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(term_id as u64)));
    let mut picked: Vec<DocIdx> = sample(&mut rng, postings.len(), max_docs)
        .into_iter()
        .map(|i| postings[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Fragment vectors of every fragment containing `term` in the sampled
/// documents.
pub fn term_fragment_vectors(index: &CorpusIndex, term: TermId, params: &TermDensityParams) -> Vec<SparseVector> {
    let docs = sample_documents(term, index.postings(term), params.sample_size, params.seed);
    docs.iter()
        .flat_map(|&d| index.fragments(d, params.granularity))
        .filter(|frag| frag.contains(&term))
        .filter_map(|frag| fragment_vector(frag, params.scheme, index.vocab()))
        .collect()
}

/// Builds `ρ_t` from explicit vectors (which need not be unit length).
pub fn summarize_vectors(
    term_id: TermId,
    df: u32,
    vectors: Vec<SparseVector>,
    rank_cap: usize,
) -> Result<TermDensitySummary> {
    let result = truncated_eigendecomposition(vectors, rank_cap);
    let density = normalize_trace(result.pairs)?;
    Ok(TermDensitySummary {
        term_id,
        density,
        mean: result.mean,
        n_vectors: result.count as u64,
        df,
    })
}

pub fn build_term_density(index: &CorpusIndex, term: &str, params: &TermDensityParams) -> Result<TermDensitySummary> {
    let id = index
        .vocab()
        .term_id(term)
        .ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
    build_term_density_by_id(index, id, params)
}

pub fn build_term_density_by_id(index: &CorpusIndex, id: TermId, params: &TermDensityParams) -> Result<TermDensitySummary> {
    let vectors = term_fragment_vectors(index, id, params);
    summarize_vectors(id, index.vocab().df(id), vectors, params.rank_cap)
}

pub const STORE_MAGIC: &[u8; 8] = b"QDSTORE\0";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub format_version: u32,
    pub vocab_fingerprint: String,
    pub n_docs: u32,
    pub granularity: Granularity,
    pub scheme: WeightingScheme,
    pub rank_cap: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub term_count: usize,
}

/// Term densities for one `(granularity, scheme)` pairing, sorted by term id.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDensityStore {
    pub header: StoreHeader,
    summaries: Vec<TermDensitySummary>,
}

impl TermDensityStore {
    pub fn new(header: StoreHeader, mut summaries: Vec<TermDensitySummary>) -> Self {
        summaries.sort_by_key(|s| s.term_id);
        let header = StoreHeader {
            term_count: summaries.len(),
            ..header
        };
        TermDensityStore { header, summaries }
    }

    /// Builds densities for `terms` (every vocabulary term when `None`) in
    /// parallel. Terms whose fragments all weigh zero are skipped.
    pub fn build(index: &CorpusIndex, params: &TermDensityParams, terms: Option<&[TermId]>) -> Self {
        let all: Vec<TermId>;
        let terms = match terms {
            Some(t) => t,
            None => {
                all = (0..index.vocab().len() as TermId).collect();
                &all
            }
        };
        let mut ids = terms.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let summaries: Vec<TermDensitySummary> = ids
            .par_iter()
            .filter_map(|&t| match build_term_density_by_id(index, t, params) {
                Ok(s) => Some(s),
                Err(e) => {
                    log::debug!("no density for `{}`: {e}", index.vocab().term(t));
                    None
                }
            })
            .collect();
        let header = StoreHeader {
            format_version: STORE_VERSION,
            vocab_fingerprint: index.vocab().fingerprint(),
            n_docs: index.vocab().n_docs(),
            granularity: params.granularity,
            scheme: params.scheme,
            rank_cap: params.rank_cap,
            sample_size: params.sample_size,
            seed: params.seed,
            term_count: 0,
        };
        TermDensityStore::new(header, summaries)
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn summaries(&self) -> &[TermDensitySummary] {
        &self.summaries
    }

    pub fn get(&self, term: TermId) -> Option<&TermDensitySummary> {
        self.summaries
            .binary_search_by_key(&term, |s| s.term_id)
            .ok()
            .map(|i| &self.summaries[i])
    }

    /// Fails unless the store was built from this index with the given
    /// fragment pairing.
    pub fn check_compatible(&self, index: &CorpusIndex, granularity: Granularity, scheme: WeightingScheme) -> Result<()> {
        let h = &self.header;
        if h.vocab_fingerprint != index.vocab().fingerprint() {
            return Err(Error::ParameterMismatch(
                "term-density store was built from a different index".into(),
            ));
        }
        if h.granularity != granularity || h.scheme != scheme {
            return Err(Error::ParameterMismatch(format!(
                "store holds {}/{} densities but the configuration asks for {}/{}",
                h.granularity, h.scheme, granularity, scheme
            )));
        }
        Ok(())
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        out.write_all(STORE_MAGIC)?;
        out.write_all(&STORE_VERSION.to_le_bytes())?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        for s in &self.summaries {
            out.write_all(&s.term_id.to_le_bytes())?;
            out.write_all(&s.df.to_le_bytes())?;
            out.write_all(&s.n_vectors.to_le_bytes())?;
            out.write_all(&(s.density.rank() as u32).to_le_bytes())?;
            for v in s.density.values() {
                out.write_all(&v.to_bits().to_le_bytes())?;
            }
            for v in s.density.vectors() {
                write_vector(&mut out, v)?;
            }
            write_vector(&mut out, &s.mean)?;
        }
        out.flush()
    }

    pub fn read_from(input: impl Read) -> Result<Self> {
        let mut r = Reader { inner: input };
        let mut magic = [0u8; 8];
        r.bytes(&mut magic)?;
        if &magic != STORE_MAGIC {
            return Err(Error::StoreCorrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(Error::StoreVersion {
                found: version,
                expected: STORE_VERSION,
            });
        }
        let header_len = r.u32()? as usize;
        let mut raw = vec![0u8; header_len];
        r.bytes(&mut raw)?;
        let header: StoreHeader =
            serde_json::from_slice(&raw).map_err(|e| Error::StoreCorrupt(format!("header: {e}")))?;
        let mut summaries = Vec::with_capacity(header.term_count);
        for _ in 0..header.term_count {
            let term_id = r.u32()?;
            let df = r.u32()?;
            let n_vectors = r.u64()?;
            let rank = r.u32()? as usize;
            let values = (0..rank).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let vectors = (0..rank).map(|_| r.vector()).collect::<Result<Vec<_>>>()?;
            let mean = r.vector()?;
            summaries.push(TermDensitySummary {
                term_id,
                density: LowRankDensity::from_parts_unchecked(values, vectors),
                mean,
                n_vectors,
                df,
            });
        }
        let mut rest = [0u8; 1];
        if r.inner.read(&mut rest).map_err(|e| Error::StoreCorrupt(e.to_string()))? != 0 {
            return Err(Error::StoreCorrupt("trailing bytes after last record".into()));
        }
        Ok(TermDensityStore { header, summaries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn write_vector(out: &mut impl Write, v: &SparseVector) -> std::io::Result<()> {
    out.write_all(&(v.nnz() as u32).to_le_bytes())?;
    for &(t, w) in v.entries() {
        out.write_all(&t.to_le_bytes())?;
        out.write_all(&w.to_bits().to_le_bytes())?;
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::StoreCorrupt("unexpected end of file".into()),
            _ => Error::StoreCorrupt(e.to_string()),
        })
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn vector(&mut self) -> Result<SparseVector> {
        let nnz = self.u32()? as usize;
        let mut entries = Vec::with_capacity(nnz.min(1 << 20));
        for _ in 0..nnz {
            let t = self.u32()?;
            let w = self.f64()?;
            entries.push((t, w));
        }
        Ok(SparseVector::from_pairs(entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn dense(v: &[f64]) -> SparseVector {
        SparseVector::from_dense(v)
    }

    #[test]
    fn sampling() {
        let postings: Vec<DocIdx> = (0..20).collect();
        assert_eq!(sample_documents(0, &postings[..5], 10_000, 7), vec![0, 1, 2, 3, 4]);
        let a = sample_documents(3, &postings, 10, 42);
        assert_eq!(a, sample_documents(3, &postings, 10, 42));
        let b = sample_documents(3, &postings, 10, 43);
        for s in [&a, &b] {
            assert_eq!(s.len(), 10);
            let mut d = s.to_vec();
            d.dedup();
            assert_eq!(d.len(), 10);
            assert!(s.iter().all(|x| postings.contains(x)));
        }
    }

    #[test]
    fn single_vector_density() {
        let s = summarize_vectors(0, 1, vec![dense(&[1.0, 0.0])], 10).unwrap();
        assert_eq!(s.n_vectors, 1);
        assert_eq!(s.density.values(), &[1.0]);
        assert_eq!(s.mean, dense(&[1.0, 0.0]));
    }

    #[test]
    fn two_vector_density() {
        let h = 0.5f64.sqrt();
        let s = summarize_vectors(0, 2, vec![dense(&[1.0, 0.0]), dense(&[h, h])], 10).unwrap();
        assert!((s.density.values()[0] - (1.0 + h) / 2.0).abs() < 1e-12);
        assert!((s.density.values()[1] - (1.0 - h) / 2.0).abs() < 1e-12);
        assert!((s.mean.get(0) - (1.0 + h) / 2.0).abs() < 1e-15);
        assert!((s.mean.get(1) - h / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_term() {
        let idx = CorpusIndex::build(vec![Document::new("a", vec!["pizza".into()]).unwrap()], &Granularity::ALL).unwrap();
        let p = TermDensityParams::new(Granularity::Sentence, WeightingScheme::Tf);
        assert!(matches!(build_term_density(&idx, "zebra", &p), Err(Error::UnknownTerm(_))));
        assert_eq!(build_term_density(&idx, "pizza", &p).unwrap().n_vectors, 1);
    }

    #[test]
    fn store_rejects_bad_input() {
        let idx = CorpusIndex::build(vec![Document::new("a", vec!["pizza cambridge".into()]).unwrap()], &Granularity::ALL)
            .unwrap();
        let store = TermDensityStore::build(&idx, &TermDensityParams::new(Granularity::Sentence, WeightingScheme::Tf), None);
        let mut bytes = Vec::new();
        store.write_to(&mut bytes).unwrap();

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(TermDensityStore::read_from(truncated), Err(Error::StoreCorrupt(_))));

        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(matches!(
            TermDensityStore::read_from(&wrong_version[..]),
            Err(Error::StoreVersion { found: 9, .. })
        ));

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(TermDensityStore::read_from(&extra[..]).is_err());
        assert!(TermDensityStore::read_from(&b"NOTASTORE"[..]).is_err());
    }

    #[test]
    fn store_compatibility_checks() {
        let idx = CorpusIndex::build(vec![Document::new("a", vec!["pizza cambridge".into()]).unwrap()], &Granularity::ALL)
            .unwrap();
        let store = TermDensityStore::build(&idx, &TermDensityParams::new(Granularity::Sentence, WeightingScheme::Tf), None);
        assert!(store.check_compatible(&idx, Granularity::Sentence, WeightingScheme::Tf).is_ok());
        assert!(matches!(
            store.check_compatible(&idx, Granularity::Paragraph, WeightingScheme::Tf),
            Err(Error::ParameterMismatch(_))
        ));
        let other = CorpusIndex::build(vec![Document::new("a", vec!["pizza".into()]).unwrap()], &Granularity::ALL).unwrap();
        assert!(store.check_compatible(&other, Granularity::Sentence, WeightingScheme::Tf).is_err());
    }
}

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use subspace_ir::corpus::{write_corpus, CorpusIndex, Document, Granularity};
use subspace_ir::termdensity::{TermDensityParams, TermDensityStore};
use subspace_ir::docspace::WeightingScheme;
use subspace_ir_ffi::*;

fn docs() -> Vec<Document> {
    vec![
        Document::from_text("a", "Pizza in Napoli is cheap.\n\nThe weather was mild.").unwrap(),
        Document::from_text("b", "Pizza pizza pizza.").unwrap(),
        Document::from_text("c", "Trains leave on time. Nothing about food.").unwrap(),
        Document::from_text("d", "Napoli has a harbour and pizza ovens.").unwrap(),
    ]
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = qir_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn open_corpus(dir: &Path) -> *mut QirEngine {
    let path = dir.join("corpus.jsonl");
    write_corpus(&docs(), &path).unwrap();
    let mut engine = ptr::null_mut();
    let p = cstr(path.to_str().unwrap());
    assert_eq!(unsafe { qir_engine_open_corpus(p.as_ptr(), ptr::null(), &mut engine) }, QirStatus::Ok);
    assert!(!engine.is_null());
    engine
}

fn search(engine: *const QirEngine, query: &str, config: Option<&QirConfig>) -> (QirStatus, Vec<(String, f64)>) {
    let q = cstr(query);
    let mut results = ptr::null_mut();
    let cfg = config.map_or(ptr::null(), |c| c as *const QirConfig);
    let status = unsafe { qir_engine_search(engine, q.as_ptr(), cfg, &mut results) };
    let mut out = Vec::new();
    unsafe {
        for i in 0..qir_results_len(results) {
            let id = CStr::from_ptr(qir_results_doc_id(results, i)).to_str().unwrap().to_string();
            let mut s = f64::NAN;
            assert_eq!(qir_results_score(results, i, &mut s), QirStatus::Ok);
            out.push((id, s));
        }
        qir_results_free(results);
    }
    (status, out)
}

#[test]
fn defaults() {
    let mut c = QirConfig {
        fragment: 9,
        doc_weighting: 9,
        query_weighting: 9,
        doc_dim: 9,
        query_dim: 9,
        term_weight: 9,
        construction: 9,
        candidates: 0,
    };
    assert_eq!(unsafe { qir_config_default(&mut c) }, QirStatus::Ok);
    assert_eq!(c.fragment, QIR_FRAGMENT_SENTENCE);
    assert_eq!(c.doc_weighting, QIR_WEIGHTING_TF);
    assert_eq!(c.query_weighting, QIR_WEIGHTING_TFIDF);
    assert_eq!(c.doc_dim, QIR_DIM_ALL);
    assert_eq!(c.query_dim, QIR_DIM_ALL);
    assert_eq!(c.term_weight, QIR_TERM_WEIGHT_IDF);
    assert_eq!(c.construction, QIR_CONSTRUCTION_MIXTURE);
    assert_eq!(c.candidates, 1500);
    let mut o = QirEngineOptions { rank_cap: 0, sample_size: 0, seed: 1 };
    assert_eq!(unsafe { qir_engine_options_default(&mut o) }, QirStatus::Ok);
    assert_eq!((o.rank_cap, o.sample_size, o.seed), (10, 10000, 0));
    let v = unsafe { CStr::from_ptr(qir_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn search_ranks_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let engine = open_corpus(dir.path());
    let (status, hits) = search(engine, "pizza", None);
    assert_eq!(status, QirStatus::Ok);
    let ids: Vec<&str> = hits.iter().map(|(d, _)| d.as_str()).collect();
    assert_eq!(ids.len(), 3);
    assert!(!ids.contains(&"c"));
    assert!(hits.iter().all(|(_, s)| (0.0..=1.0 + 1e-9).contains(s)));
    assert!(hits.windows(2).all(|w| w[0].1 >= w[1].1));

    let mut cfg = QirConfig { candidates: 1, ..unsafe { default_config() } };
    let (_, one) = search(engine, "pizza", Some(&cfg));
    assert_eq!(one.len(), 1);
    cfg.fragment = QIR_FRAGMENT_DOCUMENT;
    cfg.doc_dim = QIR_DIM_HIGHEST;
    cfg.candidates = 10;
    let (status, doc) = search(engine, "pizza napoli", Some(&cfg));
    assert_eq!(status, QirStatus::Ok);
    assert_eq!(doc.len(), 3);
    unsafe { qir_engine_free(engine) };
}

unsafe fn default_config() -> QirConfig {
    let mut c = std::mem::zeroed();
    assert_eq!(qir_config_default(&mut c), QirStatus::Ok);
    c
}

#[test]
fn error_codes_and_messages() {
    let dir = tempfile::tempdir().unwrap();
    let engine = open_corpus(dir.path());
    assert!(qir_last_error_message().is_null());

    let (status, hits) = search(engine, "zeppelin", None);
    assert_eq!(status, QirStatus::EmptyQuery);
    assert!(hits.is_empty());
    assert!(last_error().contains("empty query"));

    let bad = QirConfig { construction: 7, ..unsafe { default_config() } };
    assert_eq!(search(engine, "pizza", Some(&bad)).0, QirStatus::InvalidArgument);
    assert!(last_error().contains("construction"));

    let mut results = ptr::null_mut();
    unsafe {
        assert_eq!(qir_engine_search(ptr::null(), cstr("x").as_ptr(), ptr::null(), &mut results), QirStatus::NullPointer);
        assert_eq!(qir_engine_search(engine, ptr::null(), ptr::null(), &mut results), QirStatus::NullPointer);
        assert_eq!(qir_engine_search(engine, cstr("x").as_ptr(), ptr::null(), ptr::null_mut()), QirStatus::NullPointer);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            qir_engine_search(engine, invalid.as_ptr().cast(), ptr::null(), &mut results),
            QirStatus::InvalidUtf8
        );
        assert!(results.is_null());

        assert_eq!(qir_engine_search(engine, cstr("pizza").as_ptr(), ptr::null(), &mut results), QirStatus::Ok);
        let n = qir_results_len(results);
        assert!(qir_results_doc_id(results, n).is_null());
        let mut s = 0.0;
        assert_eq!(qir_results_score(results, n, &mut s), QirStatus::OutOfRange);
        assert_eq!(qir_results_score(results, 0, ptr::null_mut()), QirStatus::NullPointer);
        qir_results_free(results);
        assert_eq!(qir_results_len(ptr::null()), 0);
        qir_results_free(ptr::null_mut());
        qir_engine_free(ptr::null_mut());

        let mut e2 = ptr::null_mut();
        let missing = cstr(dir.path().join("missing.jsonl").to_str().unwrap());
        assert_eq!(qir_engine_open_corpus(missing.as_ptr(), ptr::null(), &mut e2), QirStatus::Io);
        assert!(e2.is_null());
        let garbage = dir.path().join("garbage.jsonl");
        std::fs::write(&garbage, "not json\n").unwrap();
        let garbage = cstr(garbage.to_str().unwrap());
        assert_eq!(qir_engine_open_corpus(garbage.as_ptr(), ptr::null(), &mut e2), QirStatus::Parse);
        let zero = QirEngineOptions { rank_cap: 0, sample_size: 10, seed: 0 };
        let corpus = cstr(dir.path().join("corpus.jsonl").to_str().unwrap());
        assert_eq!(qir_engine_open_corpus(corpus.as_ptr(), &zero, &mut e2), QirStatus::InvalidArgument);
        qir_engine_free(engine);
    }
}

#[test]
fn index_and_store() {
    let dir = tempfile::tempdir().unwrap();
    let index = CorpusIndex::build(docs(), &Granularity::ALL).unwrap();
    let index_dir = dir.path().join("idx");
    index.save(&index_dir).unwrap();
    let store_path = dir.path().join("sentence-tfidf.qds");
    TermDensityStore::build(&index, &TermDensityParams::new(Granularity::Sentence, WeightingScheme::TfIdf), None)
        .save(&store_path)
        .unwrap();
    let other = CorpusIndex::build(docs()[..2].to_vec(), &Granularity::ALL).unwrap();
    let other_path = dir.path().join("other.qds");
    TermDensityStore::build(&other, &TermDensityParams::new(Granularity::Sentence, WeightingScheme::TfIdf), None)
        .save(&other_path)
        .unwrap();

    let mut engine = ptr::null_mut();
    let d = cstr(index_dir.to_str().unwrap());
    unsafe {
        assert_eq!(qir_engine_open_index(d.as_ptr(), ptr::null(), &mut engine), QirStatus::Ok);
        assert_eq!(qir_engine_add_store(engine, cstr(other_path.to_str().unwrap()).as_ptr()), QirStatus::Mismatch);
        assert!(last_error().contains("mismatch"));
        assert_eq!(qir_engine_add_store(engine, cstr(store_path.to_str().unwrap()).as_ptr()), QirStatus::Ok);
    }
    let from_index = search(engine, "pizza napoli", None);
    let corpus_engine = open_corpus(dir.path());
    let from_corpus = search(corpus_engine, "pizza napoli", None);
    assert_eq!(from_index, from_corpus);
    unsafe {
        qir_engine_free(engine);
        qir_engine_free(corpus_engine);
    }
}

struct Shared(*mut QirEngine);
unsafe impl Send for Shared {}
unsafe impl Sync for Shared {}

impl Shared {
    fn get(&self) -> *mut QirEngine {
        self.0
    }
}

#[test]
fn concurrent_searches_agree() {
    let dir = tempfile::tempdir().unwrap();
    let shared = Shared(open_corpus(dir.path()));
    let expected = search(shared.0, "pizza harbour", None);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| search(shared.get(), "pizza harbour", None))).collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    });
    unsafe { qir_engine_free(shared.0) };
}

#[test]
fn header_declares_every_export() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/subspace_ir.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "qir_version",
        "qir_last_error_message",
        "qir_config_default",
        "qir_engine_options_default",
        "qir_engine_open_corpus",
        "qir_engine_open_index",
        "qir_engine_add_store",
        "qir_engine_search",
        "qir_results_len",
        "qir_results_doc_id",
        "qir_results_score",
        "qir_results_free",
        "qir_engine_free",
        "QIR_STATUS_EMPTY_QUERY",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // compile check when a C compiler is around
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

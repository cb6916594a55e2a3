//! A small generated collection with planted topical clusters, for
//! end-to-end runs without an external test collection.
//!
//! Each cluster owns a set of pseudo-words. Relevant documents carry one or
//! two paragraphs dense in their cluster's words; the rest of every document
//! is drawn from a Zipf-weighted background vocabulary. Distractor documents
//! mention a topic's query words in scattered background sentences, so
//! BM25 retrieves them without any cohesive passage behind the match.

use std::collections::BTreeSet;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{is_stopword, porter, write_corpus, Document};
use crate::error::{Error, Result};
use crate::eval::Qrels;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub seed: u64,
    pub topics: usize,
    pub docs_per_topic: usize,
    pub cluster_words: usize,
    pub background_words: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            topics: 10,
            docs_per_topic: 20,
            cluster_words: 25,
            background_words: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCollection {
    pub documents: Vec<Document>,
    pub topics: Vec<(String, String)>,
    pub qrels: Qrels,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z", "br", "dr", "kl", "pl", "tr", "st",
];
const VOWELS: &[&str] = &["a", "o", "u"];
const FINAL_VOWELS: &[&str] = &["a", "o"];

/// Consonant-vowel pseudo-words ending in `a` or `o`, which the stemmer
/// leaves intact.
fn pseudo_words(rng: &mut ChaCha8Rng, count: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for i in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("onsets"));
            let v = if i + 1 == syllables { FINAL_VOWELS } else { VOWELS };
            w.push_str(v.choose(rng).expect("vowels"));
        }
        if is_stopword(&w) || porter::stem(&w) != w || !taken.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

struct Sampler<'a> {
    words: &'a [String],
    weights: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    fn zipf(words: &'a [String]) -> Self {
        let weights = WeightedIndex::new((1..=words.len()).map(|r| 1.0 / r as f64)).expect("non-empty vocabulary");
        Sampler { words, weights }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &'a str {
        &self.words[self.weights.sample(rng)]
    }
}

fn sentence(words: Vec<&str>) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get(0..1) {
        let upper = first.to_uppercase();
        s.replace_range(0..1, &upper);
    }
    s.push('.');
    s
}

fn paragraph(rng: &mut ChaCha8Rng, mut word: impl FnMut(&mut ChaCha8Rng) -> String) -> String {
    let n = rng.gen_range(2..=5);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(6..=14);
            let words: Vec<String> = (0..len).map(|_| word(rng)).collect();
            sentence(words.iter().map(String::as_str).collect())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn generate(params: &SynthParams) -> SyntheticCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut taken = BTreeSet::new();
    let background = pseudo_words(&mut rng, params.background_words, &mut taken);
    let clusters: Vec<Vec<String>> = (0..params.topics)
        .map(|_| pseudo_words(&mut rng, params.cluster_words, &mut taken))
        .collect();
    let bg = Sampler::zipf(&background);
    let cluster_samplers: Vec<Sampler> = clusters.iter().map(|c| Sampler::zipf(c)).collect();
    // queries use each cluster's most frequent words
    let queries: Vec<Vec<String>> = clusters
        .iter()
        .enumerate()
        .map(|(k, c)| c[..2 + k % 2].to_vec())
        .collect();

    struct Planned {
        text: Vec<String>,
        topic: usize,
        grade: u32,
    }
    let mut planned = Vec::new();
    for k in 0..params.topics {
        for j in 0..params.docs_per_topic {
            let n_par = rng.gen_range(3..=6);
            // about a third of each cluster is distractors for another topic
            let distractor_for = (j % 3 == 2).then(|| (k + 1 + j % (params.topics - 1).max(1)) % params.topics);
            let topical = match distractor_for {
                Some(_) => 0,
                None => 1 + usize::from(j % 3 == 1),
            };
            let mut slots: Vec<usize> = (0..n_par).collect();
            slots.shuffle(&mut rng);
            let topical_slots: BTreeSet<usize> = slots[..topical.min(n_par)].iter().copied().collect();
            let mut paragraphs = Vec::with_capacity(n_par);
            for p in 0..n_par {
                let text = if topical_slots.contains(&p) {
                    paragraph(&mut rng, |r| {
                        if r.gen_bool(0.45) {
                            cluster_samplers[k].draw(r).to_string()
                        } else {
                            bg.draw(r).to_string()
                        }
                    })
                } else if let Some(t) = distractor_for {
                    let q = &queries[t];
                    paragraph(&mut rng, |r| {
                        if r.gen_bool(0.04) {
                            q.choose(r).expect("query words").clone()
                        } else {
                            bg.draw(r).to_string()
                        }
                    })
                } else {
                    paragraph(&mut rng, |r| bg.draw(r).to_string())
                };
                paragraphs.push(text);
            }
            planned.push(Planned {
                text: paragraphs,
                topic: k,
                grade: topical as u32,
            });
        }
    }
    planned.shuffle(&mut rng);

    let mut qrels = Qrels::default();
    let documents = planned
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let id = format!("syn{:04}", i + 1);
            qrels.insert(&format!("T{:02}", p.topic + 1), &id, p.grade);
            Document::new(id, p.text).expect("generated documents are non-empty")
        })
        .collect();
    let topics = queries
        .iter()
        .enumerate()
        .map(|(k, q)| (format!("T{:02}", k + 1), q.join(" ")))
        .collect();
    SyntheticCollection {
        documents,
        topics,
        qrels,
    }
}

impl SyntheticCollection {
    pub fn topics_text(&self) -> String {
        self.topics.iter().map(|(id, q)| format!("{id}\t{q}\n")).collect()
    }

    /// Writes `corpus.jsonl`, `topics.tsv` and `qrels.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus(&self.documents, &dir.join("corpus.jsonl"))?;
        let topics = dir.join("topics.tsv");
        std::fs::write(&topics, self.topics_text()).map_err(|e| Error::io(&topics, e))?;
        let qrels = dir.join("qrels.txt");
        std::fs::write(&qrels, self.qrels.format()).map_err(|e| Error::io(&qrels, e))
    }
}

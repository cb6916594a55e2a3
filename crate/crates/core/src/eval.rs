//! Relevance judgements, average precision, the parameter sweep and its
//! significance report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{tokenize, Granularity, TermId};
use crate::docspace::{DimensionRule, Memo, WeightingScheme};
use crate::error::{Error, Result};
use crate::querydensity::{QueryConstruction, QueryDensity, QueryTermWeighting};
use crate::retrieval::{Engine, ParamConfig, RankedList};

/// Binary relevance per topic. Graded judgements count as relevant at grade ≥ 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    topics: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut q = Qrels::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::parse(path, n + 1, "expected `topic 0 doc grade`"));
            }
            let grade: i64 = f[3]
                .parse()
                .map_err(|e| Error::parse(path, n + 1, format!("grade: {e}")))?;
            let prev = q
                .topics
                .entry(f[0].to_string())
                .or_default()
                .insert(f[2].to_string(), grade.max(0) as u32);
            if prev.is_some() {
                return Err(Error::parse(path, n + 1, format!("duplicate judgement for ({}, {})", f[0], f[2])));
            }
        }
        Ok(q)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn insert(&mut self, topic: &str, doc: &str, grade: u32) {
        self.topics.entry(topic.to_string()).or_default().insert(doc.to_string(), grade);
    }

    pub fn has_topic(&self, topic: &str) -> bool {
        self.topics.contains_key(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn is_relevant(&self, topic: &str, doc: &str) -> bool {
        self.topics
            .get(topic)
            .and_then(|m| m.get(doc))
            .is_some_and(|&g| g >= 1)
    }

    pub fn num_relevant(&self, topic: &str) -> usize {
        self.topics
            .get(topic)
            .map_or(0, |m| m.values().filter(|&&g| g >= 1).count())
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for (t, docs) in &self.topics {
            for (d, g) in docs {
                writeln!(out, "{t} 0 {d} {g}").expect("string write");
            }
        }
        out
    }
}

/// `(1/R) Σ_{relevant at rank r} precision@r`. `None` when the topic has no
/// relevant documents.
pub fn average_precision(list: &RankedList, qrels: &Qrels, topic: &str) -> Result<Option<f64>> {
    if !qrels.has_topic(topic) {
        return Err(Error::UnknownTopic(topic.to_string()));
    }
    let r = qrels.num_relevant(topic);
    if r == 0 {
        return Ok(None);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, doc) in list.doc_ids().enumerate() {
        if qrels.is_relevant(topic, doc) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(Some(sum / r as f64))
}

/// One of the seven sweep parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parameter {
    Fragment,
    DocWeighting,
    QueryWeighting,
    DocDim,
    QueryDim,
    TermWeight,
    Construction,
}

impl Parameter {
    pub const ALL: [Parameter; 7] = [
        Parameter::Fragment,
        Parameter::DocWeighting,
        Parameter::QueryWeighting,
        Parameter::DocDim,
        Parameter::QueryDim,
        Parameter::TermWeight,
        Parameter::Construction,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Parameter::Fragment => "(1) Document fragment",
            Parameter::DocWeighting => "(2) Weighting scheme (document fragment)",
            Parameter::QueryWeighting => "(3) Weighting scheme (query)",
            Parameter::DocDim => "(4) Dimension selection (document)",
            Parameter::QueryDim => "(5) Dimension selection (query)",
            Parameter::TermWeight => "(6) Term weight in query",
            Parameter::Construction => "(7) Query construction",
        }
    }

    pub fn values(self) -> Vec<&'static str> {
        match self {
            Parameter::Fragment => Granularity::ALL.iter().map(|g| g.as_str()).collect(),
            Parameter::DocWeighting | Parameter::QueryWeighting => {
                WeightingScheme::ALL.iter().map(|w| w.as_str()).collect()
            }
            Parameter::DocDim | Parameter::QueryDim => DimensionRule::ALL.iter().map(|d| d.as_str()).collect(),
            Parameter::TermWeight => QueryTermWeighting::ALL.iter().map(|w| w.as_str()).collect(),
            Parameter::Construction => QueryConstruction::ALL.iter().map(|c| c.as_str()).collect(),
        }
    }

    pub fn value_of(self, c: &ParamConfig) -> &'static str {
        match self {
            Parameter::Fragment => c.granularity.as_str(),
            Parameter::DocWeighting => c.doc_weighting.as_str(),
            Parameter::QueryWeighting => c.query_weighting.as_str(),
            Parameter::DocDim => c.doc_dim.as_str(),
            Parameter::QueryDim => c.query_dim.as_str(),
            Parameter::TermWeight => c.term_weight.as_str(),
            Parameter::Construction => c.construction.as_str(),
        }
    }

    /// `c` with this parameter set to `value`.
    pub fn with_value(self, c: &ParamConfig, value: &str) -> Result<ParamConfig> {
        let mut c = *c;
        match self {
            Parameter::Fragment => c.granularity = value.parse()?,
            Parameter::DocWeighting => c.doc_weighting = value.parse()?,
            Parameter::QueryWeighting => c.query_weighting = value.parse()?,
            Parameter::DocDim => c.doc_dim = value.parse()?,
            Parameter::QueryDim => c.query_dim = value.parse()?,
            Parameter::TermWeight => c.term_weight = value.parse()?,
            Parameter::Construction => c.construction = value.parse()?,
        }
        Ok(c)
    }
}

/// Every meaningful configuration: the full cross product, with the document
/// dimension rule collapsed for whole-document fragments.
pub fn enumerate_configs() -> Vec<ParamConfig> {
    let mut out = Vec::new();
    for granularity in Granularity::ALL {
        for doc_weighting in WeightingScheme::ALL {
            for query_weighting in WeightingScheme::ALL {
                for doc_dim in DimensionRule::ALL {
                    if granularity == Granularity::Document && doc_dim != DimensionRule::All {
                        continue;
                    }
                    for query_dim in DimensionRule::ALL {
                        for term_weight in QueryTermWeighting::ALL {
                            for construction in QueryConstruction::ALL {
                                out.push(ParamConfig {
                                    granularity,
                                    doc_weighting,
                                    query_weighting,
                                    doc_dim,
                                    query_dim,
                                    term_weight,
                                    construction,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Average precision per `(topic, configuration)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub ap: BTreeMap<(String, ParamConfig), f64>,
}

#[derive(Serialize, Deserialize)]
struct SweepLine {
    topic: String,
    config: ParamConfig,
    ap: f64,
}

impl SweepResult {
    pub fn insert(&mut self, topic: &str, config: ParamConfig, ap: f64) {
        self.ap.insert((topic.to_string(), config), ap);
    }

    pub fn topics(&self) -> BTreeSet<&str> {
        self.ap.keys().map(|(t, _)| t.as_str()).collect()
    }

    pub fn configs(&self) -> BTreeSet<ParamConfig> {
        self.ap.keys().map(|(_, c)| *c).collect()
    }

    pub fn get(&self, topic: &str, config: &ParamConfig) -> Option<f64> {
        self.ap.get(&(topic.to_string(), *config)).copied()
    }

    /// Mean AP over topics for one configuration.
    pub fn mean_ap(&self, config: &ParamConfig) -> Option<f64> {
        let v: Vec<f64> = self
            .ap
            .iter()
            .filter(|((_, c), _)| c == config)
            .map(|(_, &ap)| ap)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// One JSON object per line: `{"topic", "config", "ap"}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ((topic, config), &ap) in &self.ap {
            let line = SweepLine {
                topic: topic.clone(),
                config: *config,
                ap,
            };
            out.push_str(&serde_json::to_string(&line).expect("sweep line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let mut r = SweepResult::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let l: SweepLine =
                serde_json::from_str(line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
            r.insert(&l.topic, l.config, l.ap);
        }
        Ok(r)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per topic, the median AP over configurations where `parameter == value`;
/// then the mean of those medians.
pub fn means_of_medians(results: &SweepResult, parameter: Parameter, value: &str) -> Result<f64> {
    let mut per_topic: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ((topic, config), &ap) in &results.ap {
        if parameter.value_of(config) == value {
            per_topic.entry(topic.as_str()).or_default().push(ap);
        }
    }
    if per_topic.is_empty() {
        return Err(Error::NoMatchingConfigs(format!("{parameter:?} = {value}")));
    }
    let medians: Vec<f64> = per_topic.values_mut().map(|v| median(v)).collect();
    Ok(medians.iter().sum::<f64>() / medians.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p_two_sided: f64,
    pub df: usize,
}

impl TTest {
    /// One-sided p-value for the hypothesis `mean(a - b) > 0`.
    pub fn p_greater(&self) -> f64 {
        if self.t > 0.0 {
            self.p_two_sided / 2.0
        } else {
            1.0 - self.p_two_sided / 2.0
        }
    }
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided_p(t: f64, df: usize) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InsufficientSamples(a.len(), b.len()));
    }
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p_two_sided: 1.0, df }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p_two_sided: 0.0,
                df,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTest {
        t,
        p_two_sided: t_two_sided_p(t, df),
        df,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub better: String,
    pub worse: String,
    pub pairs: usize,
    pub t: f64,
    pub p_two_sided: f64,
    pub p_one_sided: f64,
    /// `">>"` at 0.01, `">"` at 0.05, empty otherwise.
    pub marker: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub parameter: Parameter,
    pub label: &'static str,
    /// `(value, mean of medians)`, best first.
    pub means: Vec<(String, f64)>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// Paired samples for `value_a` vs `value_b`: same topic, remaining six
/// parameters equal.
pub fn paired_samples(results: &SweepResult, parameter: Parameter, value_a: &str, value_b: &str) -> (Vec<f64>, Vec<f64>) {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for ((topic, config), &ap) in &results.ap {
        if parameter.value_of(config) != value_a {
            continue;
        }
        let Ok(other) = parameter.with_value(config, value_b) else { continue };
        if !other.is_normalized() {
            continue;
        }
        if let Some(bp) = results.get(topic, &other) {
            xs.push(ap);
            ys.push(bp);
        }
    }
    (xs, ys)
}

pub fn significance_table(results: &SweepResult) -> Report {
    let rows = Parameter::ALL
        .iter()
        .map(|&p| {
            let mut means: Vec<(String, f64)> = p
                .values()
                .into_iter()
                .filter_map(|v| means_of_medians(results, p, v).ok().map(|m| (v.to_string(), m)))
                .collect();
            means.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let mut comparisons = Vec::new();
            let values = p.values();
            for (i, a) in values.iter().enumerate() {
                for b in &values[i + 1..] {
                    let (xs, ys) = paired_samples(results, p, a, b);
                    let Ok(test) = paired_t_test(&xs, &ys) else { continue };
                    let (better, worse, flipped) = if test.t >= 0.0 { (a, b, test) } else {
                        (b, a, TTest { t: -test.t, ..test })
                    };
                    let p_one = flipped.p_greater();
                    let marker = if flipped.t > 0.0 && p_one < 0.01 {
                        ">>"
                    } else if flipped.t > 0.0 && p_one < 0.05 {
                        ">"
                    } else {
                        ""
                    };
                    comparisons.push(Comparison {
                        better: better.to_string(),
                        worse: worse.to_string(),
                        pairs: xs.len(),
                        t: flipped.t,
                        p_two_sided: flipped.p_two_sided,
                        p_one_sided: p_one,
                        marker,
                    });
                }
            }
            ReportRow {
                parameter: p,
                label: p.label(),
                means,
                comparisons,
            }
        })
        .collect();
    Report { rows }
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "Means of medians of average precision per topic").unwrap();
        writeln!(out, "(\">\" significant at 0.05, \">>\" at 0.01, one-sided paired t-test)").unwrap();
        writeln!(out).unwrap();
        for row in &self.rows {
            let means: Vec<String> = row.means.iter().map(|(v, m)| format!("{v} ({m:.4})")).collect();
            let sig: Vec<String> = row
                .comparisons
                .iter()
                .filter(|c| !c.marker.is_empty())
                .map(|c| format!("{} {} {}", c.better, c.marker, c.worse))
                .collect();
            let sig = if sig.is_empty() { "-".to_string() } else { sig.join("; ") };
            writeln!(out, "{:<44} {} | {}", row.label, means.join(", "), sig).unwrap();
        }
        out
    }
}

/// Per-topic run lists for one configuration, in topic order.
pub type ConfigRuns = BTreeMap<ParamConfig, Vec<RankedList>>;

pub struct SweepOutput {
    pub results: SweepResult,
    pub runs: ConfigRuns,
}

type QueryKey = (usize, Granularity, WeightingScheme, QueryTermWeighting, QueryConstruction, DimensionRule);

/// Runs every configuration on every topic. Topics without relevant
/// documents get run lists but no AP entries.
pub fn run_sweep(engine: &Engine, topics: &[(String, String)], qrels: &Qrels, configs: &[ParamConfig]) -> SweepOutput {
    let prepared: Vec<(String, Vec<String>, RankedList)> = topics
        .iter()
        .map(|(id, text)| {
            let terms = tokenize(text);
            let cands = engine.first_pass(id, &terms);
            (id.clone(), terms, cands)
        })
        .collect();

    let mut query_terms: Vec<TermId> = prepared
        .iter()
        .flat_map(|(_, terms, _)| terms.iter().filter_map(|t| engine.index().vocab().term_id(t)))
        .collect();
    query_terms.sort_unstable();
    query_terms.dedup();
    let pairings: BTreeSet<(Granularity, WeightingScheme)> = configs.iter().map(|c| c.term_density_key()).collect();
    pairings.par_iter().for_each(|&(g, s)| {
        engine.ensure_store(g, s, Some(&query_terms));
    });

    let queries: Memo<QueryKey, Option<QueryDensity>> = Memo::new();
    let per_config: Vec<(ParamConfig, Vec<RankedList>)> = configs
        .par_iter()
        .map(|config| {
            let config = config.normalized();
            let lists = prepared
                .iter()
                .enumerate()
                .map(|(ti, (id, terms, cands))| {
                    let key = (ti, config.granularity, config.query_weighting, config.term_weight, config.construction, config.query_dim);
                    let q = queries.get_or_insert_with(&key, || match engine.query_density(terms, &config) {
                        Ok(q) => Some(q),
                        Err(e) => {
                            log::warn!("topic {id}: {e}");
                            None
                        }
                    });
                    match q.as_ref() {
                        Some(q) => engine.rerank(cands, q, &config),
                        None => RankedList {
                            topic_id: id.clone(),
                            entries: Vec::new(),
                        },
                    }
                })
                .collect();
            (config, lists)
        })
        .collect();

    let mut results = SweepResult::default();
    for (config, lists) in &per_config {
        for list in lists {
            if let Ok(Some(ap)) = average_precision(list, qrels, &list.topic_id) {
                results.insert(&list.topic_id, *config, ap);
            }
        }
    }
    SweepOutput {
        results,
        runs: per_config.into_iter().collect(),
    }
}

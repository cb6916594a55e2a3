use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use subspace_ir::corpus::{read_corpus, CorpusIndex, Granularity};
use subspace_ir::docspace::{DimensionRule, WeightingScheme};
use subspace_ir::eval::{average_precision, enumerate_configs, run_sweep, significance_table, Qrels, SweepResult};
use subspace_ir::querydensity::{QueryConstruction, QueryTermWeighting};
use subspace_ir::retrieval::{format_run, read_run, read_topics, Engine, ParamConfig, RankedList, DEFAULT_CANDIDATES};
use subspace_ir::synth::{generate, SynthParams};
use subspace_ir::termdensity::{TermDensityParams, TermDensityStore, DEFAULT_RANK_CAP, DEFAULT_SAMPLE_SIZE};
use subspace_ir::Error;

/// Subspace retrieval: documents as subspaces, queries as density
/// operators, scored by trace probability over BM25 candidates.
#[derive(Debug, Parser)]
#[command(name = "subspace-ir", version)]
pub struct Cli {
    /// Worker threads (default: available hardware parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize a JSONL corpus and write an index directory.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precompute the term-density store for one fragment / weighting pairing.
    TermDensities {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Run one configuration: BM25 candidates re-ranked by trace probability.
    Search {
        #[arg(long)]
        index: PathBuf,
        /// Prebuilt term-density stores; missing pairings are built on the fly.
        #[arg(long)]
        store: Vec<PathBuf>,
        /// Query text (mutually exclusive with --topics).
        #[arg(long, conflicts_with = "topics", required_unless_present = "topics")]
        query: Option<String>,
        #[arg(long, default_value = "1")]
        topic_id: String,
        /// Topics file: `topic_id<TAB>query` per line.
        #[arg(long)]
        topics: Option<PathBuf>,
        /// Run file to write (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Evaluate every configuration on every topic.
    Sweep {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Output directory for sweep.jsonl, report.txt and report.json.
        #[arg(long)]
        out: PathBuf,
        /// Also write one run file per configuration under `runs/`.
        #[arg(long)]
        runs: bool,
        /// Model flags given here restrict the sweep to matching configurations.
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Render the significance table from a sweep dump.
    Report {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average precision of a run file against relevance judgements.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the generated test collection (corpus, topics, qrels).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Default, Args)]
struct ParamArgs {
    /// Report row (1) document fragment: document | paragraph | sentence [default: sentence]
    #[arg(long)]
    fragment: Option<Granularity>,
    /// Report row (2) document-fragment weighting: tfidf | tf | binary [default: tf]
    #[arg(long)]
    doc_weighting: Option<WeightingScheme>,
    /// Report row (3) query weighting, also the term-density pairing: tfidf | tf | binary [default: tfidf]
    #[arg(long)]
    query_weighting: Option<WeightingScheme>,
    /// Report row (4) document dimension selection: highest | mean | all [default: all]
    #[arg(long)]
    doc_dim: Option<DimensionRule>,
    /// Report row (5) query dimension selection: highest | mean | all [default: all]
    #[arg(long)]
    query_dim: Option<DimensionRule>,
    /// Report row (6) term weight in query: uniform | idf [default: idf]
    #[arg(long)]
    term_weight: Option<QueryTermWeighting>,
    /// Report row (7) query construction: mixture | superposition [default: mixture]
    #[arg(long)]
    construction: Option<QueryConstruction>,
    /// BM25 candidates to re-rank [default: 1500]
    #[arg(long)]
    candidates: Option<usize>,
    /// Eigenpairs kept per term density [default: 10]
    #[arg(long)]
    rank_cap: Option<usize>,
    /// Maximum documents sampled per term [default: 10000]
    #[arg(long)]
    sample_size: Option<usize>,
    /// Sampling seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// `key = value` file with any of the flags above (without dashes); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Settings {
    config: ParamConfig,
    candidates: usize,
    rank_cap: usize,
    sample_size: usize,
    seed: u64,
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => 3,
            Error::Parse { .. }
            | Error::Json { .. }
            | Error::StoreCorrupt(_)
            | Error::InvalidDocument(_)
            | Error::DuplicateDocument(_)
            | Error::InvalidValue { .. } => 4,
            Error::StoreVersion { .. } | Error::ParameterMismatch(_) => 5,
            Error::EmptyQuery => 6,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_config_file(path: &Path) -> CliResult<ParamArgs> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut a = ParamArgs::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, n + 1, "expected `key = value`"))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        fn num<T: std::str::FromStr>(path: &Path, line: usize, v: &str) -> CliResult<T> {
            v.parse()
                .map_err(|_| Error::parse(path, line, format!("not a number: `{v}`")).into())
        }
        match key.as_str() {
            "fragment" => a.fragment = Some(value.parse()?),
            "doc-weighting" => a.doc_weighting = Some(value.parse()?),
            "query-weighting" => a.query_weighting = Some(value.parse()?),
            "doc-dim" => a.doc_dim = Some(value.parse()?),
            "query-dim" => a.query_dim = Some(value.parse()?),
            "term-weight" => a.term_weight = Some(value.parse()?),
            "construction" => a.construction = Some(value.parse()?),
            "candidates" => a.candidates = Some(num(path, n + 1, value)?),
            "rank-cap" => a.rank_cap = Some(num(path, n + 1, value)?),
            "sample-size" => a.sample_size = Some(num(path, n + 1, value)?),
            "seed" => a.seed = Some(num(path, n + 1, value)?),
            other => return Err(CliError::usage(format!("{}:{}: unknown key `{other}`", path.display(), n + 1))),
        }
    }
    Ok(a)
}

impl ParamArgs {
    /// Flags over config-file values; both may leave fields unset.
    fn merged(&self) -> CliResult<ParamArgs> {
        let Some(path) = &self.config else { return Ok(self.clone()) };
        let f = parse_config_file(path)?;
        Ok(ParamArgs {
            fragment: self.fragment.or(f.fragment),
            doc_weighting: self.doc_weighting.or(f.doc_weighting),
            query_weighting: self.query_weighting.or(f.query_weighting),
            doc_dim: self.doc_dim.or(f.doc_dim),
            query_dim: self.query_dim.or(f.query_dim),
            term_weight: self.term_weight.or(f.term_weight),
            construction: self.construction.or(f.construction),
            candidates: self.candidates.or(f.candidates),
            rank_cap: self.rank_cap.or(f.rank_cap),
            sample_size: self.sample_size.or(f.sample_size),
            seed: self.seed.or(f.seed),
            config: None,
        })
    }

    fn settings(&self) -> CliResult<Settings> {
        let m = self.merged()?;
        let d = ParamConfig::default();
        let settings = Settings {
            config: ParamConfig {
                granularity: m.fragment.unwrap_or(d.granularity),
                doc_weighting: m.doc_weighting.unwrap_or(d.doc_weighting),
                query_weighting: m.query_weighting.unwrap_or(d.query_weighting),
                doc_dim: m.doc_dim.unwrap_or(d.doc_dim),
                query_dim: m.query_dim.unwrap_or(d.query_dim),
                term_weight: m.term_weight.unwrap_or(d.term_weight),
                construction: m.construction.unwrap_or(d.construction),
            }
            .normalized(),
            candidates: m.candidates.unwrap_or(DEFAULT_CANDIDATES),
            rank_cap: m.rank_cap.unwrap_or(DEFAULT_RANK_CAP),
            sample_size: m.sample_size.unwrap_or(DEFAULT_SAMPLE_SIZE),
            seed: m.seed.unwrap_or(0),
        };
        if settings.rank_cap == 0 {
            return Err(CliError::usage("--rank-cap must be at least 1"));
        }
        Ok(settings)
    }

    fn matches(&self, c: &ParamConfig) -> bool {
        self.fragment.is_none_or(|v| v == c.granularity)
            && self.doc_weighting.is_none_or(|v| v == c.doc_weighting)
            && self.query_weighting.is_none_or(|v| v == c.query_weighting)
            && self.doc_dim.is_none_or(|v| v == c.doc_dim)
            && self.query_dim.is_none_or(|v| v == c.query_dim)
            && self.term_weight.is_none_or(|v| v == c.term_weight)
            && self.construction.is_none_or(|v| v == c.construction)
    }
}

fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    argv: Vec<String>,
    settings: Option<Settings>,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    started_unix: u64,
    finished_unix: u64,
}

impl RunManifest {
    fn new(command: &'static str, settings: Option<Settings>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            settings,
            seed: settings.map(|s| s.seed),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn output(&mut self, path: &Path) -> CliResult<()> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn write(mut self, path: &Path) -> CliResult<()> {
        self.finished_unix = unix_now();
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn load_engine(index_dir: &Path, settings: &Settings, manifest: &mut RunManifest) -> CliResult<Engine> {
    let index = CorpusIndex::load(index_dir)?;
    manifest.input(&index_dir.join("index.json"))?;
    let mut engine = Engine::new(Arc::new(index));
    engine.candidates = settings.candidates;
    engine.rank_cap = settings.rank_cap;
    engine.sample_size = settings.sample_size;
    engine.seed = settings.seed;
    Ok(engine)
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Index { corpus, out } => {
            let mut manifest = RunManifest::new("index", None);
            let docs = read_corpus(&corpus)?;
            manifest.input(&corpus)?;
            let index = CorpusIndex::build(docs, &Granularity::ALL)?;
            index.save(&out)?;
            manifest.output(&out.join("index.json"))?;
            manifest.write(&out.join("manifest.json"))
        }
        Command::TermDensities { index, out, params } => {
            let settings = params.settings()?;
            let mut manifest = RunManifest::new("term-densities", Some(settings));
            let engine = load_engine(&index, &settings, &mut manifest)?;
            let p = TermDensityParams {
                granularity: settings.config.granularity,
                scheme: settings.config.query_weighting,
                rank_cap: settings.rank_cap,
                sample_size: settings.sample_size,
                seed: settings.seed,
            };
            let store = TermDensityStore::build(engine.index(), &p, None);
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            store.save(&out)?;
            manifest.output(&out)?;
            manifest.write(&manifest_path(&out))
        }
        Command::Search {
            index,
            store,
            query,
            topic_id,
            topics,
            out,
            params,
        } => {
            let settings = params.settings()?;
            let mut manifest = RunManifest::new("search", Some(settings));
            let engine = load_engine(&index, &settings, &mut manifest)?;
            for path in &store {
                engine.add_store(TermDensityStore::load(path)?)?;
                manifest.input(path)?;
            }
            let queries = match (&query, &topics) {
                (Some(q), _) => vec![(topic_id, q.clone())],
                (None, Some(path)) => {
                    manifest.input(path)?;
                    read_topics(path)?
                }
                (None, None) => return Err(CliError::usage("one of --query or --topics is required")),
            };
            let lists = queries
                .iter()
                .map(|(id, text)| engine.search(id, text, &settings.config))
                .collect::<Result<Vec<RankedList>, Error>>()?;
            let run = format_run(&lists, &settings.config.label());
            match out {
                Some(path) => {
                    write_file(&path, &run)?;
                    manifest.output(&path)?;
                    manifest.write(&manifest_path(&path))
                }
                None => {
                    print!("{run}");
                    Ok(())
                }
            }
        }
        Command::Sweep {
            index,
            topics,
            qrels,
            out,
            runs,
            params,
        } => {
            let settings = params.settings()?;
            let filter = params.merged()?;
            let configs: Vec<ParamConfig> = enumerate_configs().into_iter().filter(|c| filter.matches(c)).collect();
            if configs.is_empty() {
                return Err(CliError::usage("the given flags match no configuration"));
            }
            let mut manifest = RunManifest::new("sweep", Some(settings));
            let engine = load_engine(&index, &settings, &mut manifest)?;
            let topic_list = read_topics(&topics)?;
            manifest.input(&topics)?;
            let judgements = Qrels::read(&qrels)?;
            manifest.input(&qrels)?;

            let output = run_sweep(&engine, &topic_list, &judgements, &configs);
            create_dir(&out)?;
            let dump = out.join("sweep.jsonl");
            write_file(&dump, &output.results.to_jsonl())?;
            manifest.output(&dump)?;
            let report = significance_table(&output.results);
            let text = report.render();
            let report_txt = out.join("report.txt");
            write_file(&report_txt, &text)?;
            manifest.output(&report_txt)?;
            let report_json = out.join("report.json");
            write_file(&report_json, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
            manifest.output(&report_json)?;
            if runs {
                for (config, lists) in &output.runs {
                    let label = config.label();
                    let path = out.join("runs").join(format!("{label}.run"));
                    write_file(&path, &format_run(lists, &label))?;
                    manifest.output(&path)?;
                }
            }
            print!("{text}");
            manifest.write(&out.join("manifest.json"))
        }
        Command::Report { sweep, out } => {
            let mut manifest = RunManifest::new("report", None);
            let text = std::fs::read_to_string(&sweep).map_err(|e| Error::io(&sweep, e))?;
            manifest.input(&sweep)?;
            let results = SweepResult::from_jsonl(&text, &sweep)?;
            let rendered = significance_table(&results).render();
            match out {
                Some(path) => {
                    write_file(&path, &rendered)?;
                    manifest.output(&path)?;
                    manifest.write(&manifest_path(&path))
                }
                None => {
                    print!("{rendered}");
                    Ok(())
                }
            }
        }
        Command::Eval { run, qrels, out } => {
            let mut manifest = RunManifest::new("eval", None);
            let lists = read_run(&run)?;
            manifest.input(&run)?;
            let judgements = Qrels::read(&qrels)?;
            manifest.input(&qrels)?;
            let mut text = String::new();
            let mut aps = Vec::new();
            for topic in judgements.topics() {
                let empty = RankedList {
                    topic_id: topic.to_string(),
                    entries: Vec::new(),
                };
                let list = lists.get(topic).unwrap_or(&empty);
                if let Some(ap) = average_precision(list, &judgements, topic)? {
                    text.push_str(&format!("{topic}\tap\t{ap:.6}\n"));
                    aps.push(ap);
                }
            }
            for topic in lists.keys().filter(|t| !judgements.has_topic(t)) {
                log::warn!("topic {topic} in run has no judgements; skipped");
            }
            let map = if aps.is_empty() { 0.0 } else { aps.iter().sum::<f64>() / aps.len() as f64 };
            text.push_str(&format!("all\tmap\t{map:.6}\n"));
            match out {
                Some(path) => {
                    write_file(&path, &text)?;
                    manifest.output(&path)?;
                    manifest.write(&manifest_path(&path))
                }
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Synth { out, seed } => {
            let mut manifest = RunManifest::new("synth", None);
            manifest.seed = Some(seed);
            let collection = generate(&SynthParams {
                seed,
                ..SynthParams::default()
            });
            collection.write(&out)?;
            for f in ["corpus.jsonl", "topics.tsv", "qrels.txt"] {
                manifest.output(&out.join(f))?;
            }
            manifest.write(&out.join("manifest.json"))
        }
    }
}

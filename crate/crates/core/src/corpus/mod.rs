//! Documents, text preprocessing and the inverted index.

mod index;
pub mod porter;
mod segment;
mod tokenize;

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use index::{idf, CorpusIndex, DocIdx, TermId, VocabularyStats};
pub use segment::{segment, split_sentences, Fragment, Granularity};
pub use tokenize::{is_stopword, tokenize};

/// A document: an id and its paragraphs in reading order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub paragraphs: Vec<String>,
}

impl Document {
    /// Validates and builds a document. Whitespace-only paragraphs are removed.
    pub fn new(id: impl Into<String>, paragraphs: Vec<String>) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::InvalidDocument("empty document id".into()));
        }
        let paragraphs: Vec<String> = paragraphs
            .into_iter()
            .filter(|p| !p.trim().is_empty())
            .collect();
        if paragraphs.is_empty() {
            return Err(Error::InvalidDocument(format!("document `{id}` has no text")));
        }
        Ok(Document { id, paragraphs })
    }

    /// Builds a document from free text, splitting paragraphs on blank lines.
    pub fn from_text(id: impl Into<String>, text: &str) -> Result<Self> {
        let mut paragraphs = Vec::new();
        let mut current = String::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                if !current.is_empty() {
                    paragraphs.push(std::mem::take(&mut current));
                }
            } else {
                if !current.is_empty() {
                    current.push(' ');
                }
                current.push_str(line.trim());
            }
        }
        if !current.is_empty() {
            paragraphs.push(current);
        }
        Document::new(id, paragraphs)
    }
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    #[serde(default)]
    paragraphs: Option<Vec<String>>,
    #[serde(default)]
    text: Option<String>,
}

/// Parses JSON-lines corpus text. Each line is `{"id", "paragraphs": [..]}`
/// or `{"id", "text"}` with blank-line separated paragraphs.
pub fn parse_corpus(input: impl BufRead, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        let doc = match (raw.paragraphs, raw.text) {
            (Some(p), _) => Document::new(raw.id, p),
            (None, Some(t)) => Document::from_text(raw.id, &t),
            (None, None) => Err(Error::InvalidDocument(format!(
                "document `{}` has neither `paragraphs` nor `text`",
                raw.id
            ))),
        }
        .map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(std::io::BufReader::new(file), path)
}

pub fn write_corpus(docs: &[Document], path: &Path) -> Result<()> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("document serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::Document;

/// How a document is cut into fragments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Document,
    Paragraph,
    Sentence,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [
        Granularity::Document,
        Granularity::Paragraph,
        Granularity::Sentence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Document => "document",
            Granularity::Paragraph => "paragraph",
            Granularity::Sentence => "sentence",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Granularity {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "document" => Ok(Granularity::Document),
            "paragraph" => Ok(Granularity::Paragraph),
            "sentence" => Ok(Granularity::Sentence),
            _ => Err(crate::Error::InvalidValue {
                what: "fragment granularity",
                value: s.to_string(),
            }),
        }
    }
}

/// A tokenized piece of a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub doc_id: String,
    pub ordinal: usize,
    pub tokens: Vec<String>,
}

const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "etc.", "e.g.", "i.e.",
    "inc.", "ltd.", "co.", "fig.", "no.", "vol.", "cf.", "al.", "approx.", "dept.", "gen.",
    "gov.", "mt.", "jan.", "feb.", "aug.", "sept.", "oct.", "nov.", "dec.",
];

fn is_abbreviation(text: &str, end: usize) -> bool {
    let start = text[..end]
        .rfind(char::is_whitespace)
        .map(|i| i + text[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    let word = text[start..end]
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits a paragraph into sentences.
///
/// A sentence ends at `.`, `!` or `?` (plus any trailing closing quotes or
/// brackets) when followed by whitespace and an uppercase letter, or by the
/// end of the paragraph. A `.` closing a known abbreviation never ends a
/// sentence.
pub fn split_sentences(paragraph: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = paragraph.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        // Extend over runs like "?!" or '."' or ".)".
        let mut j = i + 1;
        while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '\u{201d}')
        {
            j += 1;
        }
        let end = chars.get(j).map_or(paragraph.len(), |&(p, _)| p);
        if c == '.' && j == i + 1 && is_abbreviation(paragraph, pos + 1) {
            i = j;
            continue;
        }
        let boundary = if j >= chars.len() {
            true
        } else if chars[j].1.is_whitespace() {
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            k >= chars.len() || chars[k].1.is_uppercase()
        } else {
            false
        };
        if boundary {
            let s = paragraph[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
        i = j;
    }
    let tail = paragraph[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Cuts a document into tokenized fragments, dropping those that are empty
/// after stopping. Ordinals count surviving fragments.
pub fn segment(doc: &Document, granularity: Granularity) -> Vec<Fragment> {
    let pieces: Vec<Vec<String>> = match granularity {
        Granularity::Document => {
            vec![doc.paragraphs.iter().flat_map(|p| tokenize(p)).collect()]
        }
        Granularity::Paragraph => doc.paragraphs.iter().map(|p| tokenize(p)).collect(),
        Granularity::Sentence => doc
            .paragraphs
            .iter()
            .flat_map(|p| split_sentences(p).into_iter().map(tokenize).collect::<Vec<_>>())
            .collect(),
    };
    pieces
        .into_iter()
        .filter(|tokens| !tokens.is_empty())
        .enumerate()
        .map(|(ordinal, tokens)| Fragment {
            doc_id: doc.id.clone(),
            ordinal,
            tokens,
        })
        .collect()
}

use std::collections::HashSet;
use std::sync::OnceLock;

use super::porter;

static SMART_LIST: &str = include_str!("smart_stopwords.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| SMART_LIST.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

/// Whether `word` (lowercase surface form) is on the SMART stop list.
pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Lowercases, splits on non-alphanumeric boundaries, drops SMART stop-words
/// (matched on surface forms) and Porter-stems what remains.
///
/// Apostrophes between two alphanumeric characters are kept while matching
/// the stop list (`don't`, `it's`) and removed before stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut buf = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let inner_apostrophe = (c == '\'' || c == '\u{2019}')
            && !buf.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() {
            buf.push(c);
        } else if inner_apostrophe {
            buf.push('\'');
        } else if !buf.is_empty() {
            push_token(&mut tokens, &buf);
            buf.clear();
        }
    }
    if !buf.is_empty() {
        push_token(&mut tokens, &buf);
    }
    tokens
}

fn push_token(tokens: &mut Vec<String>, surface: &str) {
    if is_stopword(surface) {
        return;
    }
    let word = surface.strip_suffix("'s").unwrap_or(surface).replace('\'', "");
    if word.is_empty() || is_stopword(&word) {
        return;
    }
    tokens.push(porter::stem(&word));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
    }

    #[test]
    fn stop_words_absorbed() {
        assert!(tokenize("The THE the").is_empty());
        assert!(tokenize("don't it's").is_empty());
    }

    #[test]
    fn running_family() {
        let tokens = tokenize("running runner runs");
        assert_eq!(tokens, vec!["run", "runner", "run"]);
        assert_eq!(tokens[0], porter::stem("run"));
    }

    #[test]
    fn punctuation_and_case() {
        assert_eq!(tokenize("Pizza, PIZZA! (Cambridge)"), vec!["pizza", "pizza", "cambridg"]);
        assert_eq!(tokenize("O'Neil's retrieval"), vec!["oneil", "retriev"]);
    }

    #[test]
    fn deterministic() {
        let text = "Quantum probabilities for information retrieval.";
        assert_eq!(tokenize(text), tokenize(text));
    }
}

//! Review normalization: case folding, noise stripping, character filtering
//! with emoji mapping, whitespace tokenization, slang normalization and
//! stopword removal, always applied in that order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BUNDLED_SLANG: &str = include_str!("../data/slang_id.tsv");
pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_id.txt");
pub const BUNDLED_EMOJI: &str = include_str!("../data/emoji.tsv");

fn is_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(char::is_alphanumeric) && s.to_lowercase() == s
}

/// Slang token -> canonical token. Lookup is total: a miss is the identity.
///
/// Canonical forms are never themselves keys, so one pass of normalization is
/// a fixed point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlangLexicon {
    entries: BTreeMap<String, String>,
}

impl SlangLexicon {
    /// Parses `slang<TAB>canonical` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Lexicon { line: i + 1, msg };
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `slang<TAB>canonical`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !is_token(key) || !is_token(value) {
                return Err(err(format!(
                    "entries must be single lowercase alphanumeric tokens: `{key}` -> `{value}`"
                )));
            }
            if key == value {
                return Err(err(format!("`{key}` maps to itself")));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        for (k, v) in &entries {
            if entries.contains_key(v) {
                return Err(Error::Lexicon {
                    line: 0,
                    msg: format!("`{k}` -> `{v}` chains into another slang key"),
                });
            }
        }
        Ok(SlangLexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SLANG).expect("bundled slang lexicon is valid")
    }

    pub fn empty() -> Self {
        SlangLexicon {
            entries: BTreeMap::new(),
        }
    }

    pub fn lookup<'a>(&'a self, token: &'a str) -> &'a str {
        self.entries.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    /// One token per line; `#` comment lines and blanks are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.to_lowercase() != line {
                return Err(Error::Lexicon {
                    line: i + 1,
                    msg: format!("stopword `{line}` is not lowercase"),
                });
            }
            if !words.insert(line.to_string()) {
                return Err(Error::Lexicon {
                    line: i + 1,
                    msg: format!("duplicate stopword `{line}`"),
                });
            }
        }
        Ok(StopwordList { words })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stopword list is valid")
    }

    pub fn empty() -> Self {
        StopwordList {
            words: BTreeSet::new(),
        }
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Self {
        StopwordList {
            words: words.into_iter().map(|w| w.into().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub original_id: usize,
    pub tokens: Vec<String>,
}

impl CleanDocument {
    pub fn new(original_id: usize, tokens: Vec<String>) -> Self {
        CleanDocument { original_id, tokens }
    }

    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Self {
        CleanDocument {
            original_id: 0,
            tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

fn emoji_map() -> &'static HashMap<char, &'static str> {
    static MAP: OnceLock<HashMap<char, &'static str>> = OnceLock::new();
    MAP.get_or_init(|| {
        BUNDLED_EMOJI
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| {
                let (e, tok) = l.split_once('\t')?;
                Some((e.chars().next()?, tok.trim()))
            })
            .collect()
    })
}

fn noise_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?xi)
            \b[a-z][a-z0-9+.\-]*://\S*   # scheme URLs
            | \bwww\.\S*                 # bare www. URLs
            | <[^<>]*>                   # HTML tags
            | &\#?[a-z0-9]+;             # HTML entities
            ",
        )
        .expect("noise regex compiles")
    })
}

fn collapse_spaces(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Unicode-aware lowercase.
pub fn case_fold(text: &str) -> String {
    text.to_lowercase()
}

/// Removes URLs, HTML tags and entities, then collapses whitespace.
pub fn strip_noise(text: &str) -> String {
    collapse_spaces(&noise_regex().replace_all(text, " "))
}

/// Maps known emoji to sentiment tokens, then replaces every character that
/// is not a letter, digit or space with a space. Unmapped emoji vanish with
/// the other symbols.
pub fn filter_chars(text: &str) -> String {
    let emoji = emoji_map();
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if let Some(tok) = emoji.get(&ch) {
            out.push(' ');
            out.push_str(tok);
            out.push(' ');
        } else if ch.is_alphanumeric() {
            out.push(ch);
        } else {
            out.push(' ');
        }
    }
    collapse_spaces(&out)
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Single pass: replacements are not looked up again.
pub fn normalize_slang(tokens: Vec<String>, lexicon: &SlangLexicon) -> Vec<String> {
    tokens
        .into_iter()
        .map(|t| match lexicon.entries.get(&t) {
            Some(canon) => canon.clone(),
            None => t,
        })
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stopwords.contains(t)).collect()
}

/// Bundled or user-supplied lexicons, bound together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub slang: SlangLexicon,
    pub stopwords: StopwordList,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            slang: SlangLexicon::bundled(),
            stopwords: StopwordList::bundled(),
        }
    }
}

impl Preprocessor {
    pub fn new(slang: SlangLexicon, stopwords: StopwordList) -> Self {
        Preprocessor { slang, stopwords }
    }

    pub fn process(&self, id: usize, text: &str) -> CleanDocument {
        let mut doc = preprocess(text, &self.slang, &self.stopwords);
        doc.original_id = id;
        doc
    }
}

pub fn preprocess(text: &str, lexicon: &SlangLexicon, stopwords: &StopwordList) -> CleanDocument {
    let folded = case_fold(text);
    let stripped = strip_noise(&folded);
    let filtered = filter_chars(&stripped);
    let tokens = normalize_slang(tokenize(&filtered), lexicon);
    CleanDocument {
        original_id: 0,
        tokens: remove_stopwords(tokens, stopwords),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn case_fold_examples() {
        assert_eq!(case_fold("Bagus"), "bagus");
        assert_eq!(case_fold(""), "");
        assert_eq!(case_fold("TOP Markotop!"), "top markotop!");
        assert_eq!(case_fold(&case_fold("ÀÉÎ Σ")), case_fold("ÀÉÎ Σ"));
    }

    #[test]
    fn strip_noise_examples() {
        assert_eq!(strip_noise("bagus http://toko.id/x cek"), "bagus cek");
        assert_eq!(strip_noise("<b>mantap</b>"), "mantap");
        assert_eq!(strip_noise("barang sesuai pesanan"), "barang sesuai pesanan");
        assert_eq!(strip_noise("lihat www.toko.id ya"), "lihat ya");
        assert_eq!(strip_noise("a&amp;b<br/>c"), "a b c");
    }

    #[test]
    fn filter_chars_examples() {
        assert_eq!(filter_chars("Jelek!!! ukuran (tidak) pas"), "Jelek ukuran tidak pas");
        assert_eq!(filter_chars("abc123"), "abc123");
        assert_eq!(filter_chars(""), "");
    }

    #[test]
    fn emoji_become_sentiment_tokens() {
        assert_eq!(filter_chars("mantap😍"), "mantap emopos");
        assert_eq!(filter_chars("rusak 😡👎"), "rusak emoneg emoneg");
        assert_eq!(filter_chars("❤️ suka"), "emopos suka");
        // unmapped emoji are dropped
        assert_eq!(filter_chars("kirim 🚚 cepat"), "kirim cepat");
    }

    #[test]
    fn slang_examples() {
        let lex = SlangLexicon::bundled();
        assert_eq!(normalize_slang(toks(&["yg"]), &lex), toks(&["yang"]));
        assert_eq!(normalize_slang(toks(&["gk", "bgus"]), &lex), toks(&["tidak", "bagus"]));
        assert_eq!(normalize_slang(toks(&["zzzq"]), &lex), toks(&["zzzq"]));
    }

    #[test]
    fn bundled_lexicon_shape() {
        let lex = SlangLexicon::bundled();
        assert!(lex.len() >= 200, "{}", lex.len());
        for (k, v) in lex.entries() {
            assert_eq!(k.to_lowercase(), *k);
            assert_ne!(k, v);
            assert_eq!(lex.lookup(v), v.as_str());
        }
    }

    #[test]
    fn stopwords_keep_negators() {
        let sw = StopwordList::bundled();
        for neg in ["tidak", "ga", "gak", "bukan", "belum", "jangan", "kurang"] {
            assert!(!sw.contains(neg), "{neg}");
        }
        assert!(sw.contains("yang"));
    }

    #[test]
    fn lexicon_rejects_bad_entries() {
        assert!(SlangLexicon::parse("yg\tyg\n").is_err());
        assert!(SlangLexicon::parse("YG\tyang\n").is_err());
        assert!(SlangLexicon::parse("yg yang\n").is_err());
        assert!(SlangLexicon::parse("a\tb\nb\tc\n").is_err());
        assert!(StopwordList::parse("dan\ndan\n").is_err());
        assert!(StopwordList::parse("Dan\n").is_err());
        let lex = SlangLexicon::parse("# comment\nyg\tyang\n\n").unwrap();
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn preprocess_examples() {
        let lex = SlangLexicon::bundled();
        let sw = StopwordList::bundled();
        let doc = preprocess("Wah mantap banget nih ditipu! Terima kasih seller", &lex, &sw);
        assert_eq!(doc.tokens, toks(&["mantap", "banget", "ditipu", "terima", "kasih", "seller"]));
        assert!(preprocess("", &lex, &sw).tokens.is_empty());
        let doc = preprocess("yg http://x.y BAGUS!!", &lex, &StopwordList::empty());
        assert_eq!(doc.tokens, toks(&["yang", "bagus"]));
    }
}

use proptest::prelude::*;
use sentibench::text_prep::{
    case_fold, filter_chars, preprocess, strip_noise, tokenize, Preprocessor, SlangLexicon, StopwordList,
};

const GOLDEN: &str = include_str!("data/preprocess_golden.tsv");

fn golden() -> Vec<(&'static str, Vec<&'static str>)> {
    GOLDEN
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (input, expected) = l.split_once('\t').expect("tab-separated golden line");
            (input, expected.split_whitespace().collect())
        })
        .collect()
}

#[test]
fn golden_file_reproduces() {
    let rows = golden();
    assert_eq!(rows.len(), 30);
    let prep = Preprocessor::default();
    for (input, expected) in rows {
        assert_eq!(prep.process(0, input).tokens, expected, "input {input:?}");
    }
}

/// Review-like text: words, slang, digits, punctuation, emoji, URLs, markup.
fn review_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[A-Za-z]{1,8}",
        Just("yg".to_string()),
        Just("gk".to_string()),
        Just("bgus".to_string()),
        Just("GAK".to_string()),
        Just("Top Markotop".to_string()),
        "[0-9]{1,3}",
        "[!?.,()/:;-]{1,3}",
        Just("😍".to_string()),
        Just("😡".to_string()),
        Just("http://toko.id/p?q=1".to_string()),
        Just("<b>".to_string()),
        Just("&amp;".to_string()),
        Just("ÉÖç".to_string()),
        "\\PC{1,3}",
    ];
    prop::collection::vec(piece, 0..12).prop_map(|v| v.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn idempotent(text in review_text()) {
        let prep = Preprocessor::default();
        let once = prep.process(0, &text);
        let twice = prep.process(0, &once.tokens.join(" "));
        prop_assert_eq!(once.tokens, twice.tokens);
    }

    #[test]
    fn tokens_are_lowercase_alphanumeric_non_stopwords(text in review_text()) {
        let prep = Preprocessor::default();
        for t in prep.process(0, &text).tokens {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphanumeric), "{:?}", t);
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert!(!prep.stopwords.contains(&t));
        }
    }

    #[test]
    fn surviving_tokens_keep_order(text in review_text()) {
        // without slang rewriting every output token is one of the filtered tokens
        let stop = StopwordList::bundled();
        let out = preprocess(&text, &SlangLexicon::empty(), &stop).tokens;
        let all = tokenize(&filter_chars(&strip_noise(&case_fold(&text))));
        let mut it = all.iter();
        for t in &out {
            prop_assert!(it.any(|a| a == t), "{:?} out of order in {:?}", t, all);
        }
    }
}

#[test]
fn slang_runs_after_case_folding() {
    let prep = Preprocessor::default();
    assert_eq!(prep.process(0, "YG").tokens, prep.process(0, "yg").tokens);
    assert_eq!(prep.process(0, "GK BGUS").tokens, vec!["tidak", "bagus"]);
}

#[test]
fn empty_stopwords_keep_expanded_slang() {
    let doc = preprocess("yg http://x.y BAGUS!!", &SlangLexicon::bundled(), &StopwordList::empty());
    assert_eq!(doc.tokens, vec!["yang", "bagus"]);
}

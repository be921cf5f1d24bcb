use std::collections::BTreeMap;

use proptest::prelude::*;
use sentibench::text_prep::CleanDocument;
use sentibench::tfidf::TfidfModel;

/// Dense brute force: vocabulary by (df desc, token asc), columns sorted,
/// smoothed idf, raw counts, L2 norm.
fn oracle(train: &[Vec<String>], max_features: usize, doc: &[String]) -> (Vec<String>, Vec<f64>, Vec<f64>) {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in train {
        let mut seen: Vec<&str> = d.iter().map(String::as_str).collect();
        seen.sort();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(max_features);
    ranked.sort();
    let n = train.len() as f64;
    let terms: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
    let idf: Vec<f64> = ranked.iter().map(|&(_, d)| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    let mut dense: Vec<f64> = terms
        .iter()
        .zip(&idf)
        .map(|(t, w)| doc.iter().filter(|x| *x == t).count() as f64 * w)
        .collect();
    let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        dense.iter_mut().for_each(|v| *v /= norm);
    }
    (terms, idf, dense)
}

fn doc_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0u8..20).prop_map(|i| format!("t{i}")), 0..=30)
}

fn docs(v: &[Vec<String>]) -> Vec<CleanDocument> {
    v.iter().map(|t| CleanDocument::from_tokens(t)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_dense_oracle(
        train in prop::collection::vec(doc_strategy(), 1..=50)
            .prop_filter("needs a token", |c| c.iter().any(|d| !d.is_empty())),
        held_out in prop::collection::vec(doc_strategy(), 0..5),
        max_features in 1usize..25,
    ) {
        let model = TfidfModel::fit(&docs(&train), max_features).unwrap();
        let (terms, idf, _) = oracle(&train, max_features, &[]);
        prop_assert_eq!(model.terms(), &terms[..]);
        for (a, b) in model.idf().iter().zip(&idf) {
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(*a >= 1.0);
        }
        prop_assert_eq!(model.dim(), max_features.min(terms.len()).min(
            train.iter().flatten().collect::<std::collections::BTreeSet<_>>().len()));
        for d in train.iter().chain(&held_out) {
            let v = model.transform(&CleanDocument::from_tokens(d));
            let (_, _, dense) = oracle(&train, max_features, d);
            let got = v.to_dense();
            prop_assert_eq!(got.len(), dense.len());
            for (a, b) in got.iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
            }
            prop_assert!(v.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(v.values.iter().all(|&x| x != 0.0));
            if !v.is_zero() {
                prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn idf_decreases_with_document_frequency(train in prop::collection::vec(doc_strategy(), 1..=50)
            .prop_filter("needs a token", |c| c.iter().any(|d| !d.is_empty()))) {
        let model = TfidfModel::fit(&docs(&train), 1000).unwrap();
        let df = |t: &str| train.iter().filter(|d| d.iter().any(|x| x == t)).count();
        for a in model.terms() {
            for b in model.terms() {
                if df(a) > df(b) {
                    prop_assert!(model.idf_of(a).unwrap() < model.idf_of(b).unwrap());
                }
            }
        }
    }
}

#[test]
fn idf_examples() {
    let model = TfidfModel::fit(&docs(&[vec!["a".into(), "b".into()], vec!["a".into(), "c".into()]]), 10).unwrap();
    assert!((model.idf_of("a").unwrap() - 1.0).abs() <= 1e-12);
    let expect = (3.0f64 / 2.0).ln() + 1.0;
    assert!((model.idf_of("b").unwrap() - expect).abs() <= 1e-12);
    assert!((model.idf_of("c").unwrap() - expect).abs() <= 1e-12);
    let v = model.transform(&CleanDocument::from_tokens(&["a", "b"]));
    let n = (1.0 + expect * expect).sqrt();
    let dense = v.to_dense();
    assert!((dense[model.column("a").unwrap()] - 1.0 / n).abs() <= 1e-12);
    assert!((dense[model.column("b").unwrap()] - expect / n).abs() <= 1e-12);
    assert!((dense[model.column("a").unwrap()] - 0.579739).abs() < 1e-6);
}

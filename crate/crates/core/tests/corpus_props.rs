mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use sentibench::corpus::{largest_remainder, make_folds, stratified_split};
use sentibench::Label;

fn class_counts(ids: &[usize], labels: &[Label]) -> [usize; 3] {
    let mut c = [0; 3];
    for &i in ids {
        c[labels[i].index()] += 1;
    }
    c
}

fn label_strategy() -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(0usize..3, 9..300).prop_filter_map("every class needs 3 rows", |v| {
        let labels: Vec<Label> = v.into_iter().map(|i| Label::from_index(i).unwrap()).collect();
        Label::ALL
            .iter()
            .all(|c| labels.iter().filter(|l| *l == c).count() >= 3)
            .then_some(labels)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_partitions_and_stratifies(labels in label_strategy(), seed in any::<u64>(),
                                       a in 1u32..10, b in 1u32..10, c in 1u32..10) {
        let total = (a + b + c) as f64;
        let ratios = [a as f64 / total, b as f64 / total, 1.0 - a as f64 / total - b as f64 / total];
        prop_assume!(ratios[2] > 0.0);
        let corpus = common::from_labels(&labels);
        let s = stratified_split(&corpus, ratios, seed).unwrap();

        let mut all: Vec<usize> = s.parts().iter().flat_map(|p| p.iter().copied()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());

        let per_class = class_counts(&(0..labels.len()).collect::<Vec<_>>(), &labels);
        for (p, part) in s.parts().iter().enumerate() {
            let got = class_counts(part, &labels);
            for k in 0..3 {
                let expect = ratios[p] * per_class[k] as f64;
                prop_assert!((got[k] as f64 - expect).abs() <= 1.0 + 1e-9,
                    "class {} part {}: {} vs {}", k, p, got[k], expect);
            }
        }
        prop_assert_eq!(s.clone(), stratified_split(&corpus, ratios, seed).unwrap());
    }

    #[test]
    fn folds_partition_and_balance(labels in label_strategy(), seed in any::<u64>(), k in 2usize..6) {
        let corpus = common::from_labels(&labels);
        let ids: Vec<usize> = corpus.iter().map(|e| e.id).collect();
        let smallest = Label::ALL.iter().map(|c| labels.iter().filter(|l| *l == c).count()).min().unwrap();
        if smallest < k {
            prop_assert!(make_folds(&ids, &labels, k, seed).is_err());
            return Ok(());
        }
        let plan = make_folds(&ids, &labels, k, seed).unwrap();
        let folds: Vec<Vec<usize>> = (0..k).map(|f| plan.fold_ids(f)).collect();
        let mut seen = BTreeSet::new();
        for f in &folds {
            for &id in f {
                prop_assert!(seen.insert(id), "id {} in two folds", id);
            }
        }
        prop_assert_eq!(seen.len(), ids.len());
        for c in 0..3 {
            let sizes: Vec<usize> = folds.iter().map(|f| class_counts(f, &labels)[c]).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        for f in 0..k {
            let (train, held) = plan.train_val(f);
            prop_assert_eq!(train.len() + held.len(), ids.len());
            prop_assert_eq!(held, folds[f].clone());
        }
    }

    #[test]
    fn largest_remainder_sums_and_stays_within_one(total in 0usize..10_000, a in 1u32..100, b in 1u32..100, c in 1u32..100) {
        let s = (a + b + c) as f64;
        let w = [a as f64 / s, b as f64 / s, c as f64 / s];
        let got = largest_remainder(total, &w);
        prop_assert_eq!(got.iter().sum::<usize>(), total);
        for i in 0..3 {
            prop_assert!((got[i] as f64 - w[i] * total as f64).abs() < 1.0);
        }
    }
}

/// Brute force: the allocation minimizing the largest deviation from the
/// quotas, among all triples summing to the class size.
fn brute_allocation(n: usize, ratios: [f64; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..=n {
        for b in 0..=n - a {
            let c = n - a - b;
            let dev = [a, b, c]
                .iter()
                .zip(ratios)
                .map(|(&x, r)| (x as f64 - r * n as f64).abs())
                .fold(0.0, f64::max);
            best = best.min(dev);
        }
    }
    best
}

#[test]
fn balanced_five_thousand_per_class() {
    let corpus = common::labeled([5000, 5000, 5000]);
    let labels: Vec<Label> = corpus.iter().map(|e| e.label).collect();
    let ratios = [0.8, 0.1, 0.1];
    let s = stratified_split(&corpus, ratios, 42).unwrap();
    assert_eq!([s.train.len(), s.validation.len(), s.test.len()], [12_000, 1_500, 1_500]);
    let oracle = brute_allocation(5000, ratios);
    for (p, part) in s.parts().iter().enumerate() {
        for (k, &got) in class_counts(part, &labels).iter().enumerate() {
            let dev = (got as f64 - ratios[p] * 5000.0).abs();
            assert!(dev <= 1.0 && dev <= oracle + 1.0, "class {k} part {p}: {got}");
        }
    }
}

#[test]
fn ten_folds_of_twelve_hundred() {
    let corpus = common::labeled([4000, 4000, 4000]);
    let ids: Vec<usize> = corpus.iter().map(|e| e.id).collect();
    let labels: Vec<Label> = corpus.iter().map(|e| e.label).collect();
    let plan = make_folds(&ids, &labels, 10, 7).unwrap();
    for f in 0..10 {
        assert_eq!(plan.fold_ids(f).len(), 1200);
    }
}

#[test]
fn split_files_are_byte_identical() {
    let corpus = common::labeled([40, 70, 33]);
    let a = stratified_split(&corpus, [0.8, 0.1, 0.1], 3).unwrap().to_json().unwrap();
    let b = stratified_split(&corpus, [0.8, 0.1, 0.1], 3).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let other = stratified_split(&corpus, [0.8, 0.1, 0.1], 4).unwrap().to_json().unwrap();
    assert_ne!(a, other);
}

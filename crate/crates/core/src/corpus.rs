//! Corpus ingestion and deterministic stratified partitioning.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, NUM_CLASSES};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: usize,
    pub text: String,
    pub label: Label,
    /// Columns other than text and label (e.g. `category`, `rating`).
    /// Carried along for auditing; never consumed by a model.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSchema {
    pub text_field: String,
    pub label_field: String,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        CorpusSchema {
            text_field: "comment".to_string(),
            label_field: "sentiment".to_string(),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<LabeledExample>> {
    load_corpus_with(path, format, &CorpusSchema::default())
}

pub fn load_corpus_with(
    path: &Path,
    format: CorpusFormat,
    schema: &CorpusSchema,
) -> Result<Vec<LabeledExample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Csv => read_csv(BufReader::new(file), schema),
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), schema),
    }
}

fn make_example(
    id: usize,
    row: usize,
    text: &str,
    label: &str,
    metadata: BTreeMap<String, String>,
) -> Result<LabeledExample> {
    if text.trim().is_empty() {
        return Err(Error::Row {
            row,
            msg: "empty text".into(),
        });
    }
    let label = label.parse::<Label>().map_err(|_| Error::UnknownLabel {
        row,
        label: label.to_string(),
    })?;
    Ok(LabeledExample {
        id,
        text: text.to_string(),
        label,
        metadata,
    })
}

/// Reads an RFC-4180 CSV with a header row. Rows are numbered from 1 (first data row).
pub fn read_csv<R: std::io::Read>(reader: R, schema: &CorpusSchema) -> Result<Vec<LabeledExample>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingField(name.to_string()))
    };
    let text_col = find(&schema.text_field)?;
    let label_col = find(&schema.label_field)?;

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Row {
            row,
            msg: e.to_string(),
        })?;
        let get = |col: usize| record.get(col).unwrap_or("");
        let metadata = headers
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != text_col && *c != label_col)
            .map(|(c, h)| (h.to_string(), get(c).to_string()))
            .collect();
        out.push(make_example(out.len(), row, get(text_col), get(label_col), metadata)?);
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Reads one JSON object per line; blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R, schema: &CorpusSchema) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| Error::Row {
            row,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Row {
            row,
            msg: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Row {
            row,
            msg: "expected a JSON object".into(),
        })?;
        let field = |name: &str| -> Result<&str> {
            obj.get(name)
                .ok_or_else(|| Error::MissingField(name.to_string()))?
                .as_str()
                .ok_or_else(|| Error::Row {
                    row,
                    msg: format!("field `{name}` is not a string"),
                })
        };
        let text = field(&schema.text_field)?;
        let label = field(&schema.label_field)?;
        let metadata = obj
            .iter()
            .filter(|(k, _)| **k != schema.text_field && **k != schema.label_field)
            .map(|(k, v)| {
                let v = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), v)
            })
            .collect();
        out.push(make_example(out.len(), row, text, label, metadata)?);
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Train/validation/test partition of example ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetSplit {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.validation, &self.test]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Assignment of ids to `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub k: usize,
    /// Sorted by id.
    pub assignments: BTreeMap<usize, usize>,
}

impl FoldPlan {
    /// Ids held out in fold `fold`, in ascending id order.
    pub fn fold_ids(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(&id, _)| id)
            .collect()
    }

    /// (training ids, held-out ids) for `fold`.
    pub fn train_val(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (held, train): (Vec<_>, Vec<_>) =
            self.assignments.iter().partition(|(_, &f)| f == fold);
        (
            train.into_iter().map(|(&id, _)| id).collect(),
            held.into_iter().map(|(&id, _)| id).collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc {
            seed: u64,
            k: usize,
            folds: Vec<Vec<usize>>,
        }
        let folds = (0..self.k).map(|f| self.fold_ids(f)).collect();
        Ok(serde_json::to_string_pretty(&Doc {
            seed: self.seed,
            k: self.k,
            folds,
        })?)
    }
}

/// Largest-remainder apportionment of `total` by `weights` (which sum to 1).
/// Ties in the fractional part go to the lower index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Rounds the class × part quota matrix so that every row sums to its class
/// count, every column sums to the largest-remainder part total, and every
/// cell is its quota's floor or floor + 1. With three classes and three parts
/// all 2^9 placements of the +1 units are enumerated; the feasible placement
/// with the largest total fractional remainder wins (first found on ties).
fn allocate_cells(class_counts: &[usize; NUM_CLASSES], ratios: &[f64; 3]) -> [[usize; 3]; NUM_CLASSES] {
    let total: usize = class_counts.iter().sum();
    let part_totals = largest_remainder(total, ratios);
    let mut quotas = [[0.0f64; 3]; NUM_CLASSES];
    let mut cells = [[0usize; 3]; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        for p in 0..3 {
            quotas[c][p] = class_counts[c] as f64 * ratios[p];
            cells[c][p] = quotas[c][p].floor() as usize;
        }
    }
    let row_need: Vec<usize> = (0..NUM_CLASSES)
        .map(|c| class_counts[c] - cells[c].iter().sum::<usize>())
        .collect();
    let col_need: Vec<usize> = (0..3)
        .map(|p| part_totals[p] - cells.iter().map(|r| r[p]).sum::<usize>())
        .collect();

    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1 << (NUM_CLASSES * 3)) {
        let bit = |c: usize, p: usize| mask >> (c * 3 + p) & 1 == 1;
        let rows_ok = (0..NUM_CLASSES).all(|c| (0..3).filter(|&p| bit(c, p)).count() == row_need[c]);
        let cols_ok = (0..3).all(|p| (0..NUM_CLASSES).filter(|&c| bit(c, p)).count() == col_need[p]);
        if !rows_ok || !cols_ok {
            continue;
        }
        let score: f64 = (0..NUM_CLASSES)
            .flat_map(|c| (0..3).map(move |p| (c, p)))
            .filter(|&(c, p)| bit(c, p))
            .map(|(c, p)| quotas[c][p] - quotas[c][p].floor())
            .sum();
        if best.is_none_or(|(s, _)| score > s + 1e-12) {
            best = Some((score, mask));
        }
    }
    match best {
        Some((_, mask)) => {
            for c in 0..NUM_CLASSES {
                for p in 0..3 {
                    if mask >> (c * 3 + p) & 1 == 1 {
                        cells[c][p] += 1;
                    }
                }
            }
        }
        None => {
            // Part totals cannot be met exactly; keep the per-class bound.
            for c in 0..NUM_CLASSES {
                let v = largest_remainder(class_counts[c], ratios);
                cells[c] = [v[0], v[1], v[2]];
            }
        }
    }
    cells
}

fn group_by_class(ids: &[usize], labels: &[Label]) -> [Vec<usize>; NUM_CLASSES] {
    let mut groups: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (&id, &label) in ids.iter().zip(labels) {
        groups[label.index()].push(id);
    }
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    groups
}

/// Stratified train/validation/test split. Each class is shuffled with the
/// seeded generator (classes in index order), then sliced according to the
/// rounded per-class allocation.
pub fn stratified_split(corpus: &[LabeledExample], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if ratios.iter().any(|&r| !(r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    let ids: Vec<usize> = corpus.iter().map(|e| e.id).collect();
    let labels: Vec<Label> = corpus.iter().map(|e| e.label).collect();
    let mut groups = group_by_class(&ids, &labels);
    for (label, g) in Label::ALL.iter().zip(&groups) {
        if g.len() < 3 {
            return Err(Error::ClassTooSmall {
                class: *label,
                count: g.len(),
                needed: 3,
            });
        }
    }
    let counts = [groups[0].len(), groups[1].len(), groups[2].len()];
    let cells = allocate_cells(&counts, &ratios);

    let mut rng = SplitMix64::new(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (g, alloc) in groups.iter_mut().zip(&cells) {
        rng.shuffle(g);
        let mut start = 0;
        for (p, &n) in alloc.iter().enumerate() {
            parts[p].extend_from_slice(&g[start..start + n]);
            start += n;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, validation, test] = parts;
    Ok(DatasetSplit {
        seed,
        ratios,
        train,
        validation,
        test,
    })
}

/// Stratified k-fold plan. Within each class the shuffled ids are dealt
/// round-robin, continuing the fold cursor from the previous class so fold
/// sizes also differ by at most one overall.
pub fn make_folds(ids: &[usize], labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: labels.len(),
        });
    }
    let mut groups = group_by_class(ids, labels);
    for (label, g) in Label::ALL.iter().zip(&groups) {
        if g.len() < k {
            return Err(Error::ClassTooSmall {
                class: *label,
                count: g.len(),
                needed: k,
            });
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut assignments = BTreeMap::new();
    let mut cursor = 0usize;
    for g in groups.iter_mut() {
        rng.shuffle(g);
        for &id in g.iter() {
            assignments.insert(id, cursor % k);
            cursor += 1;
        }
    }
    Ok(FoldPlan { seed, k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(per_class: [usize; 3]) -> Vec<LabeledExample> {
        let mut out = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for _ in 0..n {
                out.push(LabeledExample {
                    id: out.len(),
                    text: format!("doc {}", out.len()),
                    label: Label::from_index(c).unwrap(),
                    metadata: BTreeMap::new(),
                });
            }
        }
        out
    }

    #[test]
    fn csv_review_row_keeps_extra_columns() {
        let data = "comment,sentiment,category,rating\n\"Produknya standar, sesuai harga yang dibayar.\",neutral,-,3\n";
        let ex = read_csv(data.as_bytes(), &CorpusSchema::default()).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].label, Label::Neutral);
        assert_eq!(ex[0].text, "Produknya standar, sesuai harga yang dibayar.");
        assert_eq!(ex[0].metadata["rating"], "3");
        assert_eq!(ex[0].metadata["category"], "-");
    }

    #[test]
    fn csv_without_rows_is_empty_corpus() {
        let err = read_csv("comment,sentiment\n".as_bytes(), &CorpusSchema::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
    }

    #[test]
    fn csv_missing_column_is_named() {
        let err = read_csv("text,sentiment\nx,neutral\n".as_bytes(), &CorpusSchema::default()).unwrap_err();
        assert!(matches!(err, Error::MissingField(ref f) if f == "comment"), "{err}");
    }

    #[test]
    fn unknown_label_cites_row() {
        let data = "comment,sentiment\na,positive\nb,sarcastic\n";
        match read_csv(data.as_bytes(), &CorpusSchema::default()).unwrap_err() {
            Error::UnknownLabel { row, label } => {
                assert_eq!(row, 2);
                assert_eq!(label, "sarcastic");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn jsonl_labels_match_case_insensitively() {
        let data = "{\"comment\":\"Bagus\",\"sentiment\":\"POSITIVE\",\"rating\":5}\n\n{\"comment\":\"Jelek\",\"sentiment\":\"Negative\"}\n";
        let ex = read_jsonl(data.as_bytes(), &CorpusSchema::default()).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].label, Label::Positive);
        assert_eq!(ex[0].metadata["rating"], "5");
        assert_eq!(ex[1].id, 1);
    }

    #[test]
    fn jsonl_fifteen_thousand_rows_get_sequential_ids() {
        let mut data = String::new();
        for i in 0..15_000 {
            let label = ["negative", "neutral", "positive"][i % 3];
            data.push_str(&format!("{{\"comment\":\"ulasan {i}\",\"sentiment\":\"{label}\"}}\n"));
        }
        let ex = read_jsonl(data.as_bytes(), &CorpusSchema::default()).unwrap();
        assert_eq!(ex.len(), 15_000);
        assert!(ex.iter().enumerate().all(|(i, e)| e.id == i));
    }

    #[test]
    fn split_sizes_for_fifteen_thousand() {
        let split = stratified_split(&corpus([5000, 5000, 5000]), [0.8, 0.1, 0.1], 42).unwrap();
        assert_eq!(split.train.len(), 12_000);
        assert_eq!(split.validation.len(), 1_500);
        assert_eq!(split.test.len(), 1_500);
    }

    #[test]
    fn split_rejects_tiny_class() {
        let err = stratified_split(&corpus([1, 1, 1]), [0.8, 0.1, 0.1], 0).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { .. }));
    }

    #[test]
    fn split_rejects_bad_ratios() {
        assert!(stratified_split(&corpus([5, 5, 5]), [0.5, 0.5, 0.1], 0).is_err());
        assert!(stratified_split(&corpus([5, 5, 5]), [1.0, 0.0, 0.0], 0).is_err());
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(10, &[0.8, 0.1, 0.1]), vec![8, 1, 1]);
        assert_eq!(largest_remainder(7, &[0.8, 0.1, 0.1]), vec![5, 1, 1]);
        assert_eq!(largest_remainder(9, &[0.5, 0.25, 0.25]), vec![5, 2, 2]);
        assert_eq!(largest_remainder(3, &[1.0 / 3.0; 3]), vec![1, 1, 1]);
    }

    #[test]
    fn two_folds_on_four_examples() {
        let ids = vec![0, 1, 2, 3, 4, 5];
        let labels = vec![
            Label::Negative,
            Label::Negative,
            Label::Neutral,
            Label::Neutral,
            Label::Positive,
            Label::Positive,
        ];
        let plan = make_folds(&ids, &labels, 2, 9).unwrap();
        for f in 0..2 {
            let held = plan.fold_ids(f);
            let mut classes: Vec<Label> = held.iter().map(|&i| labels[i]).collect();
            classes.sort();
            assert_eq!(classes, Label::ALL.to_vec());
        }
    }

    #[test]
    fn folds_reject_small_classes_and_bad_k() {
        let ids = vec![0, 1, 2];
        let labels = Label::ALL.to_vec();
        assert!(make_folds(&ids, &labels, 2, 0).is_err());
        assert!(make_folds(&ids, &labels, 1, 0).is_err());
    }

    #[test]
    fn folds_are_deterministic() {
        let c = corpus([30, 20, 25]);
        let ids: Vec<usize> = c.iter().map(|e| e.id).collect();
        let labels: Vec<Label> = c.iter().map(|e| e.label).collect();
        assert_eq!(
            make_folds(&ids, &labels, 5, 11).unwrap(),
            make_folds(&ids, &labels, 5, 11).unwrap()
        );
    }
}

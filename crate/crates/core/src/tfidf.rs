use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text_prep::CleanDocument;

/// Sparse, sorted-index vector. Values are non-zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    /// Builds from unsorted (index, value) pairs, dropping zeros and summing duplicates.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!((i as usize) < dim, "index {i} out of range for dim {dim}");
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        SparseVector { indices, values, dim }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self::from_pairs(
            dense.len(),
            dense.iter().enumerate().map(|(i, &v)| (i as u32, v)),
        )
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SparseVector {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            dim: self.dim,
        }
    }
}

/// Fitted TF-IDF vocabulary with smoothed idf weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TfidfModel {
    /// Column order: selected terms sorted lexicographically.
    terms: Vec<String>,
    idf: Vec<f64>,
    pub max_features: usize,
    pub n_docs_fit: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl TfidfModel {
    /// Keeps the `max_features` tokens with the highest document frequency
    /// (ties broken lexicographically) and weights them by
    /// `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit(docs: &[CleanDocument], max_features: usize) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("cannot fit TF-IDF on zero documents".into()));
        }
        if max_features == 0 {
            return Err(Error::InvalidArgument("max_features must be >= 1".into()));
        }
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            let unique: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
            for t in unique {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_features);
        ranked.sort_by(|a, b| a.0.cmp(b.0));

        let n = docs.len() as f64;
        let terms: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
        let idf = ranked
            .iter()
            .map(|&(_, d)| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(Self::from_parts(terms, idf, max_features, docs.len()))
    }

    pub(crate) fn from_parts(terms: Vec<String>, idf: Vec<f64>, max_features: usize, n_docs_fit: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        TfidfModel {
            terms,
            idf,
            max_features,
            n_docs_fit,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).map(|&i| i as usize)
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.column(token).map(|c| self.idf[c])
    }

    /// Raw count × idf, L2-normalized. OOV tokens are ignored; a document
    /// with no in-vocabulary token maps to the zero vector.
    pub fn transform(&self, doc: &CleanDocument) -> SparseVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in &doc.tokens {
            if let Some(&c) = self.index.get(t.as_str()) {
                *counts.entry(c).or_insert(0.0) += 1.0;
            }
        }
        let (indices, mut values): (Vec<u32>, Vec<f64>) = counts
            .into_iter()
            .map(|(c, n)| (c, n * self.idf[c as usize]))
            .unzip();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        SparseVector {
            indices,
            values,
            dim: self.dim(),
        }
    }

    pub fn transform_all(&self, docs: &[CleanDocument]) -> Vec<SparseVector> {
        docs.iter().map(|d| self.transform(d)).collect()
    }
}

impl<'de> Deserialize<'de> for TfidfModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            terms: Vec<String>,
            idf: Vec<f64>,
            max_features: usize,
            n_docs_fit: usize,
        }
        let r = Raw::deserialize(d)?;
        Ok(TfidfModel::from_parts(r.terms, r.idf, r.max_features, r.n_docs_fit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> CleanDocument {
        CleanDocument::from_tokens(&s.split_whitespace().collect::<Vec<_>>())
    }

    #[test]
    fn idf_examples() {
        let m = TfidfModel::fit(&[doc("a b"), doc("a c")], 5000).unwrap();
        assert_eq!(m.idf_of("a").unwrap(), 1.0);
        let expect = (1.5f64).ln() + 1.0;
        assert!((m.idf_of("b").unwrap() - expect).abs() < 1e-12);
        assert!((m.idf_of("c").unwrap() - 1.405465).abs() < 1e-6);
    }

    #[test]
    fn cap_keeps_most_frequent() {
        let m = TfidfModel::fit(&[doc("a b"), doc("a c")], 1).unwrap();
        assert_eq!(m.terms(), &["a".to_string()]);
        let m2 = TfidfModel::fit(&[doc("a b"), doc("a c")], 2).unwrap();
        assert_eq!(m2.terms(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn transform_example() {
        let m = TfidfModel::fit(&[doc("a b"), doc("a c")], 5000).unwrap();
        let v = m.transform(&doc("a b"));
        let (ia, ib) = (m.column("a").unwrap(), m.column("b").unwrap());
        let d = v.to_dense();
        assert!((d[ia] - 0.579739).abs() < 1e-6);
        assert!((d[ib] - 0.814802).abs() < 1e-6);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_oov_docs_are_zero() {
        let m = TfidfModel::fit(&[doc("a b"), doc("a c")], 5000).unwrap();
        let e = m.transform(&doc(""));
        assert!(e.is_zero());
        assert_eq!(e.dim, 3);
        assert!(m.transform(&doc("zz yy")).is_zero());
    }

    #[test]
    fn all_empty_docs_fail() {
        let err = TfidfModel::fit(&[doc(""), doc("")], 10).unwrap_err();
        assert_eq!(err.to_string(), "empty vocabulary");
    }

    #[test]
    fn fit_is_deterministic() {
        let docs = vec![doc("x y z"), doc("y z"), doc("q")];
        assert_eq!(TfidfModel::fit(&docs, 2).unwrap(), TfidfModel::fit(&docs, 2).unwrap());
    }

    #[test]
    fn serde_rebuilds_index() {
        let m = TfidfModel::fit(&[doc("a b"), doc("a c")], 5000).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: TfidfModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.column("c"), m.column("c"));
    }
}

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

/// Sparse row with sorted, unique indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let mut v = Self::zeros(values.len());
        for (i, &x) in values.iter().enumerate() {
            if x != 0.0 {
                v.indices.push(i as u32);
                v.values.push(x);
            }
        }
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    document_frequencies: Vec<u32>,
    num_docs: usize,
    max_features: usize,
}

/// Term index built from the training split only. Indices are dense and
/// assigned in lexical term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequencies: Vec<u32>,
    num_docs: usize,
    max_features: usize,
    index: HashMap<String, u32>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r.terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self {
            terms: r.terms,
            document_frequencies: r.document_frequencies,
            num_docs: r.num_docs,
            max_features: r.max_features,
            index,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            terms: v.terms,
            document_frequencies: v.document_frequencies,
            num_docs: v.num_docs,
            max_features: v.max_features,
        }
    }
}

impl Vocabulary {
    /// Keeps the `max_features` terms with highest document frequency (ties
    /// by term), then indexes them lexically.
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>], max_features: usize) -> Self {
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in docs {
            let mut seen: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, u32)> = df.into_iter().collect();
        if ranked.len() > max_features {
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            ranked.truncate(max_features);
            ranked.sort_by(|a, b| a.0.cmp(b.0));
        }
        VocabularyRepr {
            terms: ranked.iter().map(|(t, _)| t.to_string()).collect(),
            document_frequencies: ranked.iter().map(|(_, d)| *d).collect(),
            num_docs: docs.len(),
            max_features,
        }
        .into()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| i as usize)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequency(&self, idx: usize) -> u32 {
        self.document_frequencies[idx]
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, idx: usize) -> f64 {
        ((1.0 + self.num_docs as f64) / (1.0 + f64::from(self.document_frequencies[idx]))).ln() + 1.0
    }

    /// Raw term counts times idf, L2-normalized. Unknown terms are ignored.
    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVec {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.index.get(t.as_ref()) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut v = SparseVec::zeros(self.len());
        for (i, c) in counts {
            v.indices.push(i);
            v.values.push(c * self.idf(i as usize));
        }
        let norm = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

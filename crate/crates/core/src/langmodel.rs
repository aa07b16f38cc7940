//! Sparse, normalized term distributions and the per-entity model set.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::Deserialize;
use thiserror::Error;

use crate::corpus::{Corpus, NodeId};
use crate::fmt::sig12;
use crate::scalar::Probability;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no probability mass: the model would be empty")]
    Empty,
    #[error("entity `{0}` has no tokens beneath it")]
    NoTokens(String),
    #[error("invalid weight {weight} for term `{term}`")]
    InvalidWeight { term: String, weight: f64 },
    #[error("mixture weight {0} outside (0, 1)")]
    InvalidLambda(f64),
    #[error("every term fell below the pruning threshold {0}")]
    AllPruned(f64),
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate entity `{0}` in model set")]
    DuplicateEntity(String),
}

/// Probability distribution over terms with strictly positive entries only.
///
/// Entries sum to one up to rounding. Zero-probability terms are never stored,
/// so an instance always has at least one term.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLm<F> {
    probs: BTreeMap<String, F>,
}

impl<F: Probability> SparseLm<F> {
    /// Normalizes nonnegative weights. Zero weights are dropped and repeated
    /// terms accumulate.
    pub fn from_weights<I, S>(weights: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (S, F)>,
        S: Into<String>,
    {
        let mut acc: BTreeMap<String, F> = BTreeMap::new();
        for (term, w) in weights {
            let term = term.into();
            if !w.is_finite() || w < F::zero() {
                return Err(ModelError::InvalidWeight {
                    term,
                    weight: w.as_f64(),
                });
            }
            if w > F::zero() {
                let slot = acc.entry(term).or_insert_with(F::zero);
                *slot = *slot + w;
            }
        }
        Self::normalized(acc)
    }

    pub fn from_counts<I, S>(counts: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        Self::from_weights(counts.into_iter().map(|(t, c)| (t, F::from_count(c))))
    }

    /// Maximum-likelihood model of a token sequence.
    pub fn from_tokens<'a, I>(tokens: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        Self::from_counts(counts)
    }

    fn normalized(mut acc: BTreeMap<String, F>) -> Result<Self, ModelError> {
        acc.retain(|_, w| *w > F::zero());
        let total: F = acc.values().copied().sum();
        if acc.is_empty() || !(total > F::zero()) {
            return Err(ModelError::Empty);
        }
        for w in acc.values_mut() {
            *w = *w / total;
        }
        acc.retain(|_, w| *w > F::zero());
        if acc.is_empty() {
            return Err(ModelError::Empty);
        }
        Ok(SparseLm { probs: acc })
    }

    /// Probability of `term`; zero when absent.
    pub fn prob(&self, term: &str) -> F {
        self.probs.get(term).copied().unwrap_or_else(F::zero)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.probs.contains_key(term)
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    /// Entries in lexicographic term order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, F)> + '_ {
        self.probs.iter().map(|(t, &p)| (t.as_str(), p))
    }

    pub fn terms(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.probs.keys().map(String::as_str)
    }

    pub fn total_mass(&self) -> F {
        self.probs.values().copied().sum()
    }

    /// The `k` most probable entries, descending, ties in lexicographic order.
    pub fn top_k(&self, k: usize) -> Vec<(&str, F)> {
        let mut entries: Vec<(&str, F)> = self.iter().collect();
        entries.sort_by(|a, b| by_prob_desc(*a, *b));
        entries.truncate(k);
        entries
    }

    /// The most probable term (lexicographically first among ties).
    pub fn argmax(&self) -> (&str, F) {
        self.iter()
            .min_by(|a, b| by_prob_desc(*a, *b))
            .expect("models are never empty")
    }

    /// The top `k` entries renormalized into a distribution of their own.
    pub fn truncate_top_k(&self, k: usize) -> Result<Self, ModelError> {
        Self::from_weights(self.top_k(k).into_iter().map(|(t, p)| (t.to_string(), p)))
    }

    /// Drops entries below `epsilon` and renormalizes.
    pub fn prune(&self, epsilon: F) -> Result<Self, ModelError> {
        if self.probs.values().all(|&p| p >= epsilon) {
            return Ok(self.clone());
        }
        let kept: BTreeMap<String, F> = self
            .probs
            .iter()
            .filter(|(_, &p)| p >= epsilon)
            .map(|(t, &p)| (t.clone(), p))
            .collect();
        if kept.is_empty() {
            return Err(ModelError::AllPruned(epsilon.as_f64()));
        }
        Self::normalized(kept)
    }

    /// Lossless conversion to another scalar width (up to rounding).
    pub fn cast<G: Probability>(&self) -> Result<SparseLm<G>, ModelError> {
        SparseLm::from_weights(self.iter().map(|(t, p)| (t.to_string(), G::lit(p.as_f64()))))
    }
}

fn by_prob_desc<F: Probability>(a: (&str, F), b: (&str, F)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(b.0))
}

/// Pooled maximum-likelihood model of everything beneath `entity`.
pub fn mle_entity<F: Probability>(corpus: &Corpus, entity: NodeId) -> Result<SparseLm<F>, ModelError> {
    let counts = corpus.term_counts(entity);
    SparseLm::from_counts(counts).map_err(|e| match e {
        ModelError::Empty => ModelError::NoTokens(corpus.hierarchy().id(entity).to_string()),
        other => other,
    })
}

/// `lambda * p + (1 - lambda) * q`.
pub fn mixture<F: Probability>(
    p: &SparseLm<F>,
    q: &SparseLm<F>,
    lambda: F,
) -> Result<SparseLm<F>, ModelError> {
    if !(lambda > F::zero() && lambda < F::one()) {
        return Err(ModelError::InvalidLambda(lambda.as_f64()));
    }
    let mut acc: BTreeMap<String, F> = BTreeMap::new();
    for (t, pt) in p.iter() {
        acc.insert(t.to_string(), lambda * pt);
    }
    for (t, qt) in q.iter() {
        let slot = acc.entry(t.to_string()).or_insert_with(F::zero);
        *slot = *slot + (F::one() - lambda) * qt;
    }
    SparseLm::normalized(acc)
}

/// Jensen-Shannon divergence in bits; 0 for identical models, 1 for disjoint ones.
///
/// Both inputs are rescaled by their stored mass first, so terms owned by only
/// one side contribute exactly half their share.
pub fn js_divergence<F: Probability>(p: &SparseLm<F>, q: &SparseLm<F>) -> F {
    let half = F::lit(0.5);
    let two = F::lit(2.0);
    let (mp, mq) = (p.total_mass(), q.total_mass());
    let mut only_p = F::zero();
    let mut only_q = F::zero();
    let mut shared = F::zero();
    for (t, pt) in p.iter() {
        let qt = q.prob(t);
        if qt > F::zero() {
            let (a, b) = (pt / mp, qt / mq);
            let m = a + b;
            shared = shared + a * (two * a / m).log2() + b * (two * b / m).log2();
        } else {
            only_p = only_p + pt;
        }
    }
    for (t, qt) in q.iter() {
        if !p.contains(t) {
            only_q = only_q + qt;
        }
    }
    let jsd = half * (only_p / mp + only_q / mq + shared);
    jsd.max(F::zero()).min(F::one())
}

/// Sum of absolute probability differences over the union of supports.
pub fn l1_distance<F: Probability>(p: &SparseLm<F>, q: &SparseLm<F>) -> F {
    let mut d = F::zero();
    for (t, pt) in p.iter() {
        d = d + (pt - q.prob(t)).abs();
    }
    for (t, qt) in q.iter() {
        if !p.contains(t) {
            d = d + qt;
        }
    }
    d
}

/// One model per entity, in hierarchy (BFS) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet<F> {
    models: IndexMap<String, SparseLm<F>>,
    /// Number of completed estimation iterations.
    pub iteration: usize,
}

#[derive(Deserialize)]
struct ModelLine {
    entity: String,
    terms: Vec<(String, f64)>,
}

impl<F: Probability> ModelSet<F> {
    pub fn new() -> Self {
        ModelSet {
            models: IndexMap::new(),
            iteration: 0,
        }
    }

    pub fn insert(&mut self, entity: impl Into<String>, model: SparseLm<F>) -> Option<SparseLm<F>> {
        self.models.insert(entity.into(), model)
    }

    pub fn get(&self, entity: &str) -> Option<&SparseLm<F>> {
        self.models.get(entity)
    }

    /// Model at the given position; positions follow [`NodeId`] order for
    /// sets built from a hierarchy.
    pub fn at(&self, node: NodeId) -> &SparseLm<F> {
        &self.models[node.index()]
    }

    pub(crate) fn set_at(&mut self, node: NodeId, model: SparseLm<F>) {
        self.models[node.index()] = model;
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> + '_ {
        self.models.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SparseLm<F>)> + '_ {
        self.models.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Writes one JSON object per entity: `{"entity": .., "terms": [[term, prob], ..]}`
    /// with terms in descending probability and 12 significant digits.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (entity, model) in self.iter() {
            write!(out, "{{\"entity\":{},\"terms\":[", json_str(entity))?;
            for (i, (term, p)) in model.top_k(usize::MAX).into_iter().enumerate() {
                if i > 0 {
                    out.write_all(b",")?;
                }
                write!(out, "[{},{}]", json_str(term), sig12(p.as_f64()))?;
            }
            out.write_all(b"]}\n")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`ModelSet::write_jsonl`]. Each model is
    /// renormalized to absorb rounding from the text representation.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, ModelError> {
        let mut set = ModelSet::new();
        for (i, line) in input.lines().enumerate() {
            let parse_err = |message: String| ModelError::Parse { line: i + 1, message };
            let line = line.map_err(|e| parse_err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ModelLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let model = SparseLm::from_weights(rec.terms.into_iter().map(|(t, p)| (t, F::lit(p))))
                .map_err(|e| parse_err(e.to_string()))?;
            if set.insert(rec.entity.clone(), model).is_some() {
                return Err(ModelError::DuplicateEntity(rec.entity));
            }
        }
        Ok(set)
    }
}

impl<F: Probability> Default for ModelSet<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

//! Planted-vocabulary synthetic corpora.
//!
//! Every entity owns a disjoint set of planted terms. A token of a leaf's
//! document is drawn by first picking a layer according to the mixing
//! proportions (the shared general set, the root, ..., the leaf itself) and
//! then a uniform term from the chosen entity's planted set. Since the truth is
//! known, the generator doubles as an oracle for separability tests.
//!
//! A second period keeps every entity and vocabulary but moves each
//! second-layer node (a party) under the next first-layer node (a status), so
//! government and opposition swap in the two-status case.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::corpus::{Corpus, Document, DocumentRecord, Hierarchy};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Children per node for each layer below the root, e.g. `[2, 3, 5]`.
    pub fanouts: Vec<usize>,
    pub planted_per_entity: usize,
    pub general_terms: usize,
    pub docs_per_leaf: usize,
    pub doc_length: usize,
    /// Mixing proportions: general set first, then one per layer from the
    /// root down to the leaves. Must sum to one.
    pub proportions: Vec<f64>,
    /// Number of periods; periods after the first rotate the second layer.
    pub periods: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Two statuses of three parties of five members. Status vocabulary
    /// dominates, as it does in parliamentary speech.
    fn default() -> Self {
        SynthSpec {
            fanouts: vec![2, 3, 5],
            planted_per_entity: 20,
            general_terms: 100,
            docs_per_leaf: 20,
            doc_length: 50,
            proportions: vec![0.25, 0.05, 0.50, 0.10, 0.10],
            periods: 2,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Synth(m));
        if self.fanouts.is_empty() || self.fanouts.contains(&0) {
            return bad("fan-outs must be nonempty and positive".into());
        }
        for (name, v) in [
            ("planted terms per entity", self.planted_per_entity),
            ("general terms", self.general_terms),
            ("documents per leaf", self.docs_per_leaf),
            ("document length", self.doc_length),
            ("periods", self.periods),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.proportions.len() != self.fanouts.len() + 2 {
            return bad(format!(
                "expected {} proportions (general + {} layers), got {}",
                self.fanouts.len() + 2,
                self.fanouts.len() + 1,
                self.proportions.len()
            ));
        }
        if self.proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("proportions must be finite and nonnegative".into());
        }
        let total: f64 = self.proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("proportions sum to {total}, not 1"));
        }
        if self.periods > 1 && self.fanouts.len() < 2 {
            return bad("a second period needs at least two layers below the root".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub periods: Vec<Corpus>,
    /// Planted terms of every entity.
    pub planted: BTreeMap<String, Vec<String>>,
    pub general: Vec<String>,
    /// Leaf id to class id (its parent's id); identical in every period.
    pub labels: BTreeMap<String, String>,
}

impl SynthCorpus {
    /// Documents of one period as records, tokens joined by single spaces.
    pub fn records(&self, period: usize) -> Vec<DocumentRecord> {
        self.periods[period]
            .documents()
            .iter()
            .map(|d| DocumentRecord {
                id: d.id.clone(),
                entity: d.owner.clone(),
                text: d.tokens.join(" "),
            })
            .collect()
    }

    /// Entities whose planted set contains `term`; the empty string stands
    /// for the shared general set.
    pub fn owner_of(&self, term: &str) -> Option<&str> {
        if self.general.iter().any(|g| g == term) {
            return Some("");
        }
        self.planted
            .iter()
            .find(|(_, terms)| terms.iter().any(|t| t == term))
            .map(|(e, _)| e.as_str())
    }
}

fn layer_name(depth: usize) -> String {
    match depth {
        0 => "root".into(),
        1 => "status".into(),
        2 => "party".into(),
        3 => "member".into(),
        d => format!("layer{d}n"),
    }
}

/// Nodes per layer, each as `(id, parent index in the previous layer)`.
fn layout(spec: &SynthSpec) -> Vec<Vec<(String, usize)>> {
    let mut layers = vec![vec![("root".to_string(), 0)]];
    for (d, &fan) in spec.fanouts.iter().enumerate() {
        let prev = layers[d].len();
        let layer = (0..prev * fan)
            .map(|i| (format!("{}{}", layer_name(d + 1), i), i / fan))
            .collect();
        layers.push(layer);
    }
    layers
}

pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus, EvalError> {
    spec.validate()?;
    let layers = layout(spec);

    let general: Vec<String> = (0..spec.general_terms).map(|j| format!("gen{j}")).collect();
    let mut planted = BTreeMap::new();
    for layer in &layers {
        for (id, _) in layer {
            let terms = (0..spec.planted_per_entity).map(|j| format!("{id}w{j}")).collect();
            planted.insert(id.clone(), terms);
        }
    }

    let depth = layers.len() - 1;
    let leaves = &layers[depth];
    let mut labels = BTreeMap::new();
    for (id, parent) in leaves {
        labels.insert(id.clone(), layers[depth - 1][*parent].0.clone());
    }

    let n_first = layers[1].len();
    let mut periods = Vec::with_capacity(spec.periods);
    for period in 0..spec.periods {
        // Parent index of every node, with the second layer rotated by `period`.
        let parents: Vec<Vec<usize>> = layers
            .iter()
            .enumerate()
            .map(|(d, layer)| {
                layer
                    .iter()
                    .map(|&(_, p)| if d == 2 { (p + period) % n_first } else { p })
                    .collect()
            })
            .collect();
        let links = layers.iter().enumerate().flat_map(|(d, layer)| {
            let parents = &parents;
            let layers = &layers;
            layer.iter().enumerate().map(move |(i, (id, _))| {
                let parent = (d > 0).then(|| layers[d - 1][parents[d][i]].0.clone());
                (id.clone(), parent)
            })
        });
        let hierarchy = Hierarchy::from_links(links.collect::<Vec<_>>())?;

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(period as u64);
        let mixer = WeightedIndex::new(&spec.proportions).map_err(|e| EvalError::Synth(e.to_string()))?;
        let mut docs = Vec::with_capacity(leaves.len() * spec.docs_per_leaf);
        for (leaf_idx, (leaf_id, _)) in leaves.iter().enumerate() {
            // Path of planted sets from the root down to the leaf.
            let mut path = vec![leaf_idx];
            for d in (1..=depth).rev() {
                let here = *path.last().expect("path starts at the leaf");
                path.push(parents[d][here]);
            }
            path.reverse();
            let sources: Vec<&Vec<String>> = std::iter::once(&general)
                .chain(path.iter().enumerate().map(|(d, &i)| &planted[&layers[d][i].0]))
                .collect();
            for k in 0..spec.docs_per_leaf {
                let tokens = (0..spec.doc_length)
                    .map(|_| {
                        let set = sources[mixer.sample(&mut rng)];
                        set[rng.random_range(0..set.len())].clone()
                    })
                    .collect();
                docs.push(Document {
                    id: format!("p{}_{}_d{}", period + 1, leaf_id, k),
                    owner: leaf_id.clone(),
                    tokens,
                });
            }
        }
        periods.push(Corpus::from_documents(hierarchy, docs)?);
    }

    Ok(SynthCorpus {
        periods,
        planted,
        general,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            fanouts: vec![2, 2, 2],
            planted_per_entity: 4,
            general_terms: 10,
            docs_per_leaf: 30,
            doc_length: 40,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = synth_corpus(&small()).unwrap();
        let b = synth_corpus(&small()).unwrap();
        assert_eq!(a.periods, b.periods);
        let c = synth_corpus(&SynthSpec { seed: 7, ..small() }).unwrap();
        assert_ne!(a.periods[0], c.periods[0]);
    }

    #[test]
    fn vocabulary_is_planted_plus_general() {
        let s = synth_corpus(&small()).unwrap();
        let mut union: std::collections::BTreeSet<String> = s.general.iter().cloned().collect();
        for terms in s.planted.values() {
            union.extend(terms.iter().cloned());
        }
        assert_eq!(s.periods[0].vocabulary(), &union);
    }

    #[test]
    fn second_period_swaps_statuses() {
        let s = synth_corpus(&small()).unwrap();
        let (h1, h2) = (s.periods[0].hierarchy(), s.periods[1].hierarchy());
        let status_of = |h: &crate::corpus::Hierarchy, party: &str| {
            h.id(h.parent(h.get(party).unwrap()).unwrap()).to_string()
        };
        assert_eq!(status_of(h1, "party0"), "status0");
        assert_eq!(status_of(h2, "party0"), "status1");
        assert_eq!(status_of(h2, "party2"), "status0");
        assert_eq!(status_of(h1, "member0"), status_of(h2, "member0"));
        assert_eq!(s.labels["member5"], "party2");
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = SynthSpec { proportions: vec![0.5, 0.5, 0.5, 0.0, 0.0], ..small() };
        assert!(matches!(synth_corpus(&bad), Err(EvalError::Synth(_))));
        let bad = SynthSpec { proportions: vec![1.0], ..small() };
        assert!(synth_corpus(&bad).is_err());
        let bad = SynthSpec { docs_per_leaf: 0, ..small() };
        assert!(synth_corpus(&bad).is_err());
        let bad = SynthSpec { fanouts: vec![3], proportions: vec![0.5, 0.25, 0.25], ..small() };
        assert!(synth_corpus(&bad).is_err());
        let ok = SynthSpec { periods: 1, ..bad };
        assert!(synth_corpus(&ok).is_ok());
    }

    #[test]
    fn planted_term_frequency_within_three_sigma() {
        // Expected share of one party term in that party's pooled documents is
        // its layer proportion divided by the planted set size.
        let spec = SynthSpec::default();
        let s = synth_corpus(&spec).unwrap();
        let c = &s.periods[0];
        let h = c.hierarchy();
        let party = h.get("party4").unwrap();
        let counts = c.term_counts(party);
        let n = c.token_count(party) as f64;
        let p = spec.proportions[3] / spec.planted_per_entity as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for term in &s.planted["party4"] {
            let observed = counts.get(term.as_str()).copied().unwrap_or(0) as f64;
            assert!((observed - n * p).abs() <= 3.0 * sigma, "{term}: {observed} vs {}", n * p);
        }
    }
}

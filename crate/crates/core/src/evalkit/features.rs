use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use super::EvalError;
use crate::corpus::{Corpus, Hierarchy, NodeId};
use crate::fmt::sig12;
use crate::hswlm::estimate_hswlm;
use crate::{Config, LanguageModel};

/// A leaf entity as a classification instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub id: String,
    pub features: BTreeMap<String, f64>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureScheme {
    /// Raw term frequencies.
    Tf,
    /// Term frequencies restricted to the `top_n` highest information-gain terms.
    Ig { top_n: usize },
    /// Term frequencies weighted by the summed class HSWLM probabilities.
    Hswlm,
}

impl FeatureScheme {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureScheme::Tf => "tf",
            FeatureScheme::Ig { .. } => "ig",
            FeatureScheme::Hswlm => "hswlm",
        }
    }
}

/// Scheme state fitted on training data only.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureResources {
    Tf,
    Ig { terms: BTreeSet<String> },
    Hswlm { class_mass: BTreeMap<String, f64> },
}

/// Depth of the class layer when none is given: the layer just above the deepest leaves.
pub fn default_class_depth(h: &Hierarchy) -> usize {
    h.height(h.root()).saturating_sub(1)
}

/// Leaves that have an ancestor (or are themselves) at `class_depth`, with that class id.
pub fn labeled_leaves(h: &Hierarchy, class_depth: usize) -> Vec<(NodeId, String)> {
    h.leaves()
        .filter(|&l| h.depth(l) >= class_depth)
        .map(|l| {
            let up = h.depth(l) - class_depth;
            let class = if up == 0 { l } else { h.ancestor_at(l, up).expect("within depth") };
            (l, h.id(class).to_string())
        })
        .collect()
}

/// Pooled raw term frequencies of a leaf.
pub fn term_frequencies(corpus: &Corpus, leaf: NodeId) -> BTreeMap<String, f64> {
    corpus
        .term_counts(leaf)
        .into_iter()
        .map(|(t, c)| (t.to_string(), c as f64))
        .collect()
}

/// Information gain (bits) of every term's presence with respect to the labels:
/// `H(class) - H(class | term present or absent)`.
pub fn information_gain_weights(
    instances: &[LabeledInstance],
) -> Result<BTreeMap<String, f64>, EvalError> {
    let mut class_totals: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in instances {
        *class_totals.entry(inst.label.as_str()).or_default() += 1;
    }
    if class_totals.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    let n = instances.len() as f64;
    let prior = entropy(class_totals.values().copied());

    let mut present: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for inst in instances {
        for (t, &w) in &inst.features {
            if w > 0.0 {
                *present
                    .entry(t.as_str())
                    .or_default()
                    .entry(inst.label.as_str())
                    .or_default() += 1;
            }
        }
    }
    let gains = present
        .into_iter()
        .map(|(t, with)| {
            let n_with: usize = with.values().sum();
            let without = class_totals
                .iter()
                .map(|(c, &total)| total - with.get(c).copied().unwrap_or(0));
            let cond = (n_with as f64 / n) * entropy(with.values().copied())
                + ((instances.len() - n_with) as f64 / n) * entropy(without);
            (t.to_string(), (prior - cond).max(0.0))
        })
        .collect();
    Ok(gains)
}

fn entropy(counts: impl IntoIterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// The `top_n` terms by weight, ties in lexicographic order.
pub fn top_terms(weights: &BTreeMap<String, f64>, top_n: usize) -> BTreeSet<String> {
    let mut ranked: Vec<(&String, f64)> = weights.iter().map(|(t, &w)| (t, w)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(top_n).map(|(t, _)| t.clone()).collect()
}

/// Fits scheme resources on `train_leaves` of `corpus`, never looking at other leaves.
pub fn fit_resources(
    corpus: &Corpus,
    train_leaves: &[(NodeId, String)],
    scheme: FeatureScheme,
    estimation: &Config,
) -> Result<FeatureResources, EvalError> {
    if train_leaves.is_empty() {
        return Err(EvalError::Empty);
    }
    match scheme {
        FeatureScheme::Tf => Ok(FeatureResources::Tf),
        FeatureScheme::Ig { top_n } => {
            let instances: Vec<LabeledInstance> = train_leaves
                .iter()
                .map(|(leaf, label)| LabeledInstance {
                    id: corpus.hierarchy().id(*leaf).to_string(),
                    features: term_frequencies(corpus, *leaf),
                    label: label.clone(),
                })
                .collect();
            let gains = information_gain_weights(&instances)?;
            Ok(FeatureResources::Ig {
                terms: top_terms(&gains, top_n),
            })
        }
        FeatureScheme::Hswlm => {
            let leaves: Vec<NodeId> = train_leaves.iter().map(|(l, _)| *l).collect();
            let sub = corpus.restrict_to_leaves(&leaves);
            let (models, _) = estimate_hswlm(&sub, estimation)?;
            let classes: BTreeSet<&str> = train_leaves.iter().map(|(_, c)| c.as_str()).collect();
            let mut class_mass: BTreeMap<String, f64> = BTreeMap::new();
            for class in classes {
                let model: &LanguageModel = models.get(class).ok_or_else(|| {
                    EvalError::Setup(format!("class `{class}` missing from training hierarchy"))
                })?;
                for (t, p) in model.iter() {
                    *class_mass.entry(t.to_string()).or_default() += p;
                }
            }
            Ok(FeatureResources::Hswlm { class_mass })
        }
    }
}

/// Feature vector of one leaf under fitted resources, L2-normalized.
///
/// A leaf sharing no term with the resources gets an empty vector.
pub fn leaf_features(corpus: &Corpus, leaf: NodeId, resources: &FeatureResources) -> BTreeMap<String, f64> {
    let tf = term_frequencies(corpus, leaf);
    let mut weighted: BTreeMap<String, f64> = match resources {
        FeatureResources::Tf => tf,
        FeatureResources::Ig { terms } => tf.into_iter().filter(|(t, _)| terms.contains(t)).collect(),
        FeatureResources::Hswlm { class_mass } => tf
            .into_iter()
            .filter_map(|(t, f)| class_mass.get(&t).map(|&m| (t, f * m)))
            .collect(),
    };
    weighted.retain(|_, w| *w > 0.0);
    let norm = weighted.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for w in weighted.values_mut() {
            *w /= norm;
        }
    }
    weighted
}

/// Labeled instances for `leaves`. Labels are attached afterwards and never
/// influence the feature values.
pub fn build_features(
    corpus: &Corpus,
    leaves: &[(NodeId, String)],
    resources: &FeatureResources,
) -> Vec<LabeledInstance> {
    leaves
        .iter()
        .map(|(leaf, label)| LabeledInstance {
            id: corpus.hierarchy().id(*leaf).to_string(),
            features: leaf_features(corpus, *leaf, resources),
            label: label.clone(),
        })
        .collect()
}

/// TSV feature matrix: `id<TAB>label<TAB>term:weight term:weight ...`.
pub fn write_feature_matrix<W: Write>(instances: &[LabeledInstance], mut out: W) -> std::io::Result<()> {
    writeln!(out, "id\tlabel\tterm:weight")?;
    for inst in instances {
        let feats: Vec<String> = inst
            .features
            .iter()
            .map(|(t, w)| format!("{t}:{}", sig12(*w)))
            .collect();
        writeln!(out, "{}\t{}\t{}", inst.id, inst.label, feats.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_hierarchy, DocumentRecord};
    use approx::assert_abs_diff_eq;

    fn inst(label: &str, terms: &[&str]) -> LabeledInstance {
        LabeledInstance {
            id: String::new(),
            features: terms.iter().map(|t| (t.to_string(), 1.0)).collect(),
            label: label.into(),
        }
    }

    #[test]
    fn perfectly_informative_term() {
        let xs = [inst("A", &["t"]), inst("A", &["t"]), inst("B", &["u"]), inst("B", &["u"])];
        let ig = information_gain_weights(&xs).unwrap();
        assert_abs_diff_eq!(ig["t"], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uninformative_term() {
        let xs = [inst("A", &["t"]), inst("B", &["t"]), inst("B", &["t"])];
        assert_eq!(information_gain_weights(&xs).unwrap()["t"], 0.0);
    }

    #[test]
    fn partial_information_by_hand() {
        // Present in 2/2 of A and 1/2 of B: 1 - 3/4 * H(2/3, 1/3).
        let xs = [inst("A", &["t"]), inst("A", &["t"]), inst("B", &["t"]), inst("B", &[])];
        let h = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        let ig = information_gain_weights(&xs).unwrap()["t"];
        assert_abs_diff_eq!(ig, 1.0 - 0.75 * h, epsilon = 1e-12);
        assert_abs_diff_eq!(ig, 0.3113, epsilon = 1e-4);
    }

    #[test]
    fn single_class_is_rejected() {
        let xs = [inst("A", &["t"]), inst("A", &["u"])];
        assert!(matches!(information_gain_weights(&xs), Err(EvalError::SingleClass)));
    }

    fn corpus() -> Corpus {
        let h = parse_hierarchy("r\nA\tr\nB\tr\na1\tA\na2\tA\nb1\tB\nb2\tB\n").unwrap();
        let docs = [
            ("a1", "a a b x"),
            ("a2", "a b b y"),
            ("b1", "c c b x"),
            ("b2", "c d b y"),
        ];
        let recs = docs.iter().enumerate().map(|(i, &(e, t))| DocumentRecord {
            id: format!("d{i}"),
            entity: e.into(),
            text: t.into(),
        });
        Corpus::ingest(recs, h).unwrap()
    }

    #[test]
    fn tf_features_normalized() {
        let c = corpus();
        let leaf = c.hierarchy().get("a1").unwrap();
        let raw = term_frequencies(&c, leaf);
        assert_eq!(raw["a"], 2.0);
        assert_eq!(raw["b"], 1.0);
        let f = leaf_features(&c, leaf, &FeatureResources::Tf);
        let norm: f64 = f.values().map(|w| w * w).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f["a"] / f["b"], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ig_keeps_top_terms_only() {
        let c = corpus();
        let leaves = labeled_leaves(c.hierarchy(), 1);
        let res = fit_resources(&c, &leaves, FeatureScheme::Ig { top_n: 1 }, &Config::default()).unwrap();
        let FeatureResources::Ig { terms } = &res else { panic!() };
        // "a" and "c" both split perfectly; lexicographic tie-break keeps "a".
        assert_eq!(terms.iter().collect::<Vec<_>>(), ["a"]);
        let feats = build_features(&c, &leaves, &res);
        assert_eq!(feats[0].features.keys().collect::<Vec<_>>(), ["a"]);
        assert!(feats[2].features.is_empty());
    }

    #[test]
    fn hswlm_zeroes_terms_outside_class_models() {
        let c = corpus();
        let leaves = labeled_leaves(c.hierarchy(), 1);
        let res = fit_resources(&c, &leaves, FeatureScheme::Hswlm, &Config::default()).unwrap();
        let FeatureResources::Hswlm { class_mass } = &res else { panic!() };
        for inst in build_features(&c, &leaves, &res) {
            for t in inst.features.keys() {
                assert!(class_mass.contains_key(t));
            }
        }
        // "b" occurs everywhere and is explained by the root.
        assert!(!class_mass.contains_key("b"));
    }

    #[test]
    fn labels_never_change_features() {
        let c = corpus();
        let leaves = labeled_leaves(c.hierarchy(), 1);
        let res = fit_resources(&c, &leaves, FeatureScheme::Tf, &Config::default()).unwrap();
        let shuffled: Vec<(NodeId, String)> = leaves
            .iter()
            .rev()
            .zip(leaves.iter())
            .map(|((_, l), (n, _))| (*n, l.clone()))
            .collect();
        let a = build_features(&c, &leaves, &res);
        let b = build_features(&c, &shuffled, &res);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.features, y.features);
        }
    }

    #[test]
    fn feature_matrix_format() {
        let xs = [LabeledInstance {
            id: "m1".into(),
            features: [("a".to_string(), 0.6), ("b".to_string(), 0.8)].into(),
            label: "p".into(),
        }];
        let mut buf = Vec::new();
        write_feature_matrix(&xs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id\tlabel\tterm:weight\nm1\tp\ta:0.6 b:0.8\n");
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use super::{information_gain_weights, labeled_leaves, term_frequencies, EvalError, FeatureScheme, LabeledInstance};
use crate::corpus::Corpus;
use crate::fmt::sig12;
use crate::hswlm::estimate_hswlm;
use crate::langmodel::{js_divergence, mle_entity};
use crate::{Config, LanguageModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiversityCase {
    DifferentClassSamePeriod,
    SameClassDifferentPeriod,
    DifferentClassDifferentPeriod,
}

impl DiversityCase {
    pub const ALL: [DiversityCase; 3] = [
        DiversityCase::DifferentClassSamePeriod,
        DiversityCase::SameClassDifferentPeriod,
        DiversityCase::DifferentClassDifferentPeriod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiversityCase::DifferentClassSamePeriod => "different_class_same_period",
            DiversityCase::SameClassDifferentPeriod => "same_class_different_period",
            DiversityCase::DifferentClassDifferentPeriod => "different_class_different_period",
        }
    }
}

/// Per-class term distributions of one period under one weighting scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodDistributions {
    pub period: String,
    pub classes: BTreeMap<String, LanguageModel>,
}

/// Every pairwise divergence, grouped by case.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiversityTable {
    /// `(period:class, period:class, jsd)` triples per case.
    pub pairs: BTreeMap<DiversityCase, Vec<(String, String, f64)>>,
}

impl DiversityTable {
    /// Mean divergence of a case, `None` when no pair falls into it.
    pub fn mean(&self, case: DiversityCase) -> Option<f64> {
        let pairs = self.pairs.get(&case)?;
        if pairs.is_empty() {
            return None;
        }
        Some(pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64)
    }

    /// Rows are cases, columns are the given schemes' tables.
    pub fn write_tsv<W: Write>(tables: &[(String, DiversityTable)], mut out: W) -> std::io::Result<()> {
        let names: Vec<&str> = tables.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(out, "case\t{}", names.join("\t"))?;
        for case in DiversityCase::ALL {
            let cells: Vec<String> = tables
                .iter()
                .map(|(_, t)| t.mean(case).map(sig12).unwrap_or_else(|| "NA".into()))
                .collect();
            writeln!(out, "{}\t{}", case.name(), cells.join("\t"))?;
        }
        Ok(())
    }
}

/// Term distribution of every class in `corpus` under a weighting scheme:
/// pooled term frequencies, pooled frequencies weighted by the period's
/// information gain, or the class HSWLM.
pub fn class_distributions(
    corpus: &Corpus,
    scheme: FeatureScheme,
    class_depth: usize,
    estimation: &Config,
) -> Result<BTreeMap<String, LanguageModel>, EvalError> {
    let h = corpus.hierarchy();
    let leaves = labeled_leaves(h, class_depth);
    let classes: BTreeSet<String> = leaves.iter().map(|(_, c)| c.clone()).collect();
    let mut out = BTreeMap::new();
    match scheme {
        FeatureScheme::Tf => {
            for class in classes {
                let node = h.lookup(&class)?;
                out.insert(class, mle_entity(corpus, node)?);
            }
        }
        FeatureScheme::Ig { .. } => {
            let instances: Vec<LabeledInstance> = leaves
                .iter()
                .map(|(leaf, label)| LabeledInstance {
                    id: h.id(*leaf).to_string(),
                    features: term_frequencies(corpus, *leaf),
                    label: label.clone(),
                })
                .collect();
            let gains = information_gain_weights(&instances)?;
            for class in classes {
                let node = h.lookup(&class)?;
                let weighted: Vec<(&str, f64)> = corpus
                    .term_counts(node)
                    .into_iter()
                    .filter_map(|(t, c)| gains.get(t).map(|&g| (t, c as f64 * g)))
                    .filter(|&(_, w)| w > 0.0)
                    .collect();
                out.insert(class, LanguageModel::from_weights(weighted)?);
            }
        }
        FeatureScheme::Hswlm => {
            let (models, _) = estimate_hswlm(corpus, estimation)?;
            for class in classes {
                let model = models
                    .get(&class)
                    .ok_or_else(|| EvalError::Setup(format!("no model for class `{class}`")))?;
                out.insert(class, model.clone());
            }
        }
    }
    Ok(out)
}

/// Jensen-Shannon divergence between every pair of class distributions, each
/// first cut to its `top_k` terms and renormalized.
pub fn diversity_report(periods: &[PeriodDistributions], top_k: usize) -> Result<DiversityTable, EvalError> {
    let mut flat: Vec<(usize, &str, LanguageModel)> = Vec::new();
    for (p, period) in periods.iter().enumerate() {
        for (class, model) in &period.classes {
            flat.push((p, class.as_str(), model.truncate_top_k(top_k)?));
        }
    }
    let mut table = DiversityTable::default();
    for case in DiversityCase::ALL {
        table.pairs.insert(case, Vec::new());
    }
    for i in 0..flat.len() {
        for j in i + 1..flat.len() {
            let (pa, ca, ma) = &flat[i];
            let (pb, cb, mb) = &flat[j];
            let case = match (pa == pb, ca == cb) {
                (true, true) => continue,
                (true, false) => DiversityCase::DifferentClassSamePeriod,
                (false, true) => DiversityCase::SameClassDifferentPeriod,
                (false, false) => DiversityCase::DifferentClassDifferentPeriod,
            };
            table.pairs.get_mut(&case).expect("all cases inserted").push((
                format!("{}:{}", periods[*pa].period, ca),
                format!("{}:{}", periods[*pb].period, cb),
                js_divergence(ma, mb),
            ));
        }
    }
    Ok(table)
}

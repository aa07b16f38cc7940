//! Evaluation kit: feature weighting schemes, a linear classifier, stratified
//! folds, within- and cross-period classification, divergence-based
//! diversity reports and the planted-vocabulary corpus generator.

mod classifier;
mod diversity;
mod features;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, HierarchyError, NodeId};
use crate::fmt::sig12;
use crate::hswlm::EstimationError;
use crate::langmodel::ModelError;
use crate::Config;

pub use self::classifier::{train_linear, LinearModel, TrainConfig};
pub use self::diversity::{
    class_distributions, diversity_report, DiversityCase, DiversityTable, PeriodDistributions,
};
pub use self::features::{
    build_features, default_class_depth, fit_resources,
    information_gain_weights, labeled_leaves, leaf_features, term_frequencies, top_terms,
    write_feature_matrix, FeatureResources, FeatureScheme, LabeledInstance,
};
pub use self::synth::{synth_corpus, SynthCorpus, SynthSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least two classes")]
    SingleClass,
    #[error("no instances")]
    Empty,
    #[error("cannot split {count} instances into {k} folds")]
    TooManyFolds { k: usize, count: usize },
    #[error("train and test class labels differ: {0}")]
    LabelMismatch(String),
    #[error("invalid synthetic corpus spec: {0}")]
    Synth(String),
    #[error("invalid evaluation setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl From<HierarchyError> for EvalError {
    fn from(e: HierarchyError) -> Self {
        EvalError::Corpus(e.into())
    }
}

/// Confusion matrix and derived per-class and macro metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<String>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Unweighted mean of per-class accuracy (recall) over classes with instances.
    pub macro_accuracy: f64,
}

impl EvalReport {
    pub fn from_predictions<'a, I>(classes: &[String], pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let k = classes.len();
        let pos = |c: &str| classes.iter().position(|x| x == c).expect("known class");
        let mut confusion = vec![vec![0usize; k]; k];
        for (truth, pred) in pairs {
            confusion[pos(truth)][pos(pred)] += 1;
        }
        let recall: Vec<f64> = (0..k)
            .map(|i| {
                let row: usize = confusion[i].iter().sum();
                if row == 0 { 0.0 } else { confusion[i][i] as f64 / row as f64 }
            })
            .collect();
        let precision: Vec<f64> = (0..k)
            .map(|j| {
                let col: usize = confusion.iter().map(|r| r[j]).sum();
                if col == 0 { 0.0 } else { confusion[j][j] as f64 / col as f64 }
            })
            .collect();
        let present: Vec<usize> = (0..k).filter(|&i| confusion[i].iter().sum::<usize>() > 0).collect();
        let macro_accuracy = if present.is_empty() {
            0.0
        } else {
            present.iter().map(|&i| recall[i]).sum::<f64>() / present.len() as f64
        };
        EvalReport {
            classes: classes.to_vec(),
            confusion,
            precision,
            recall,
            macro_accuracy,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Stratified, seeded partition of instance positions into `k` disjoint folds.
///
/// Each class is shuffled on its own and dealt round-robin, continuing where
/// the previous class stopped, so fold sizes differ by at most one.
pub fn kfold(labels: &[String], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k == 0 || k > labels.len() {
        return Err(EvalError::TooManyFolds { k, count: labels.len() });
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Everything a classification experiment needs besides the corpora.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSetup {
    pub scheme: FeatureScheme,
    /// Depth of the class layer; defaults to the parents of the deepest leaves.
    pub class_depth: Option<usize>,
    pub estimation: Config,
    pub train: TrainConfig,
    pub folds: usize,
    /// Seed of the fold split; the same split is reused for every scheme.
    pub seed: u64,
}

impl ClassificationSetup {
    pub fn new(scheme: FeatureScheme) -> Self {
        ClassificationSetup {
            scheme,
            class_depth: None,
            estimation: Config::default(),
            train: TrainConfig::default(),
            folds: 5,
            seed: 42,
        }
    }

    fn class_depth(&self, corpus: &Corpus) -> Result<usize, EvalError> {
        let d = self
            .class_depth
            .unwrap_or_else(|| default_class_depth(corpus.hierarchy()));
        if d == 0 {
            return Err(EvalError::Setup("class layer cannot be the root".into()));
        }
        Ok(d)
    }
}

fn classes_of(leaves: &[(NodeId, String)]) -> Vec<String> {
    leaves
        .iter()
        .map(|(_, c)| c.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn fit_and_predict(
    train_corpus: &Corpus,
    train_leaves: &[(NodeId, String)],
    test_corpus: &Corpus,
    test_leaves: &[(NodeId, String)],
    setup: &ClassificationSetup,
) -> Result<Vec<(String, String)>, EvalError> {
    let resources = fit_resources(train_corpus, train_leaves, setup.scheme, &setup.estimation)?;
    let train = build_features(train_corpus, train_leaves, &resources);
    let model = train_linear(&train, &setup.train)?;
    let test = build_features(test_corpus, test_leaves, &resources);
    Ok(test
        .into_iter()
        .map(|inst| {
            let pred = model.predict(&inst.features).to_string();
            (inst.label, pred)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Predictions of all folds pooled into one report.
    pub pooled: EvalReport,
    pub per_fold: Vec<EvalReport>,
}

/// Stratified k-fold cross validation within one corpus. Scheme resources
/// (IG ranks, HSWLMs) are refitted on the training folds of every split.
pub fn within_period_cv(corpus: &Corpus, setup: &ClassificationSetup) -> Result<CvReport, EvalError> {
    let depth = setup.class_depth(corpus)?;
    let leaves = labeled_leaves(corpus.hierarchy(), depth);
    let classes = classes_of(&leaves);
    if classes.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    let labels: Vec<String> = leaves.iter().map(|(_, c)| c.clone()).collect();
    let folds = kfold(&labels, setup.folds, setup.seed)?;
    let mut pooled: Vec<(String, String)> = Vec::new();
    let mut per_fold = Vec::with_capacity(folds.len());
    for fold in &folds {
        let held: BTreeSet<usize> = fold.iter().copied().collect();
        let (test, train): (Vec<_>, Vec<_>) = leaves
            .iter()
            .cloned()
            .enumerate()
            .partition(|(i, _)| held.contains(i));
        let train: Vec<(NodeId, String)> = train.into_iter().map(|(_, x)| x).collect();
        let test: Vec<(NodeId, String)> = test.into_iter().map(|(_, x)| x).collect();
        let preds = fit_and_predict(corpus, &train, corpus, &test, setup)?;
        per_fold.push(EvalReport::from_predictions(
            &classes,
            preds.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        ));
        pooled.extend(preds);
    }
    Ok(CvReport {
        pooled: EvalReport::from_predictions(&classes, pooled.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
        per_fold,
    })
}

/// Trains on every labeled leaf of `train` and evaluates on every labeled
/// leaf of `test`. Scheme resources come from `train` alone.
pub fn cross_period_eval(
    train: &Corpus,
    test: &Corpus,
    setup: &ClassificationSetup,
) -> Result<EvalReport, EvalError> {
    let train_leaves = labeled_leaves(train.hierarchy(), setup.class_depth(train)?);
    let test_leaves = labeled_leaves(test.hierarchy(), setup.class_depth(test)?);
    let (train_classes, test_classes) = (classes_of(&train_leaves), classes_of(&test_leaves));
    if train_classes != test_classes {
        let only_test: Vec<&String> = test_classes.iter().filter(|c| !train_classes.contains(c)).collect();
        let only_train: Vec<&String> = train_classes.iter().filter(|c| !test_classes.contains(c)).collect();
        return Err(EvalError::LabelMismatch(format!(
            "only in train {only_train:?}, only in test {only_test:?}"
        )));
    }
    let preds = fit_and_predict(train, &train_leaves, test, &test_leaves, setup)?;
    Ok(EvalReport::from_predictions(
        &train_classes,
        preds.iter().map(|(a, b)| (a.as_str(), b.as_str())),
    ))
}

/// Macro accuracies for every (train period, scheme, test period) cell.
/// Diagonal cells are within-period cross validation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferTable {
    pub periods: Vec<String>,
    pub schemes: Vec<FeatureScheme>,
    /// `cells[train][scheme][test]`.
    pub cells: Vec<Vec<Vec<f64>>>,
}

impl TransferTable {
    pub fn get(&self, train: usize, scheme: usize, test: usize) -> f64 {
        self.cells[train][scheme][test]
    }

    /// Rows are training periods; columns are scheme x test period.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["train".to_string()];
        for s in &self.schemes {
            for p in &self.periods {
                header.push(format!("{}:{}", s.name(), p));
            }
        }
        writeln!(out, "{}", header.join("\t"))?;
        for (i, p) in self.periods.iter().enumerate() {
            let mut row = vec![p.clone()];
            for s in 0..self.schemes.len() {
                for t in 0..self.periods.len() {
                    row.push(sig12(self.get(i, s, t)));
                }
            }
            writeln!(out, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

pub fn transfer_table(
    periods: &[(String, Corpus)],
    schemes: &[FeatureScheme],
    base: &ClassificationSetup,
) -> Result<TransferTable, EvalError> {
    let mut cells = Vec::with_capacity(periods.len());
    for (i, (_, train)) in periods.iter().enumerate() {
        let mut row = Vec::with_capacity(schemes.len());
        for &scheme in schemes {
            let setup = ClassificationSetup { scheme, ..base.clone() };
            let mut accs = Vec::with_capacity(periods.len());
            for (j, (_, test)) in periods.iter().enumerate() {
                let acc = if i == j {
                    within_period_cv(train, &setup)?.pooled.macro_accuracy
                } else {
                    cross_period_eval(train, test, &setup)?.macro_accuracy
                };
                accs.push(acc);
            }
            row.push(accs);
        }
        cells.push(row);
    }
    Ok(TransferTable {
        periods: periods.iter().map(|(n, _)| n.clone()).collect(),
        schemes: schemes.to_vec(),
        cells,
    })
}

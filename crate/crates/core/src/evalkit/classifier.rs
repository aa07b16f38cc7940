use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalError, LabeledInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty applied as weight decay on every step.
    pub regularization: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 0.1,
            regularization: 1e-4,
            seed: 42,
        }
    }
}

/// One-vs-rest linear classifier trained with hinge-loss SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: Vec<String>,
    features: HashMap<String, usize>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LinearModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Score of every class, in [`LinearModel::classes`] order.
    pub fn scores(&self, features: &BTreeMap<String, f64>) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| {
                b + features
                    .iter()
                    .filter_map(|(t, x)| self.features.get(t).map(|&j| w[j] * x))
                    .sum::<f64>()
            })
            .collect()
    }

    /// Highest-scoring class; ties go to the class listed first.
    pub fn predict(&self, features: &BTreeMap<String, f64>) -> &str {
        let scores = self.scores(features);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        &self.classes[best]
    }

    pub fn accuracy(&self, instances: &[LabeledInstance]) -> f64 {
        if instances.is_empty() {
            return 0.0;
        }
        let hits = instances
            .iter()
            .filter(|i| self.predict(&i.features) == i.label)
            .count();
        hits as f64 / instances.len() as f64
    }
}

pub fn train_linear(instances: &[LabeledInstance], config: &TrainConfig) -> Result<LinearModel, EvalError> {
    let classes: Vec<String> = instances
        .iter()
        .map(|i| i.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if instances.is_empty() {
        return Err(EvalError::Empty);
    }
    if classes.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    let mut features: HashMap<String, usize> = HashMap::new();
    let mut vocab: BTreeSet<&str> = BTreeSet::new();
    for inst in instances {
        vocab.extend(inst.features.keys().map(String::as_str));
    }
    for (j, t) in vocab.into_iter().enumerate() {
        features.insert(t.to_string(), j);
    }
    // Sparse copies indexed by feature position.
    let rows: Vec<(Vec<(usize, f64)>, usize)> = instances
        .iter()
        .map(|inst| {
            let x = inst.features.iter().map(|(t, &v)| (features[t], v)).collect();
            let y = classes.binary_search(&inst.label).expect("label collected above");
            (x, y)
        })
        .collect();

    let mut weights = vec![vec![0.0; features.len()]; classes.len()];
    let mut bias = vec![0.0; classes.len()];
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let decay = 1.0 - config.learning_rate * config.regularization;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, label) = &rows[i];
            for (c, (w, b)) in weights.iter_mut().zip(bias.iter_mut()).enumerate() {
                let y = if c == *label { 1.0 } else { -1.0 };
                let score: f64 = *b + x.iter().map(|&(j, v)| w[j] * v).sum::<f64>();
                if decay != 1.0 {
                    w.iter_mut().for_each(|wj| *wj *= decay);
                }
                if y * score < 1.0 {
                    for &(j, v) in x {
                        w[j] += config.learning_rate * y * v;
                    }
                    *b += config.learning_rate * y;
                }
            }
        }
    }
    Ok(LinearModel {
        classes,
        features,
        weights,
        bias,
    })
}

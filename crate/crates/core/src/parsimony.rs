//! Model parsimonization: EM re-estimation of a model against background
//! models, removing the probability mass the backgrounds already explain.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::langmodel::{l1_distance, ModelError, SparseLm};
use crate::scalar::Probability;

#[derive(Debug, Error, PartialEq)]
pub enum ParsimonyError {
    #[error("invalid parsimony configuration: {0}")]
    InvalidConfig(String),
    #[error("no background models to combine")]
    NoBackgrounds,
    #[error("background models cancel out: every term has probability 1 in two or more of them")]
    DegenerateBackground,
    #[error("every term fell below the pruning threshold {0}")]
    AllPruned(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsimonyConfig<F> {
    /// Weight of the entity-specific model in the two-component mixture.
    /// Lower values produce more parsimonious models.
    pub lambda: F,
    /// EM stops once one iteration moves the model by less than this (L1).
    pub em_tolerance: F,
    pub max_em_iters: usize,
    /// Entries below this are dropped once EM has finished.
    pub prune_epsilon: F,
}

impl<F: Probability> Default for ParsimonyConfig<F> {
    fn default() -> Self {
        ParsimonyConfig {
            lambda: F::lit(0.5),
            em_tolerance: F::lit(1e-6),
            max_em_iters: 50,
            prune_epsilon: F::lit(1e-5),
        }
    }
}

impl<F: Probability> ParsimonyConfig<F> {
    pub fn validate(&self) -> Result<(), ParsimonyError> {
        let bad = |m: String| Err(ParsimonyError::InvalidConfig(m));
        if !(self.lambda > F::zero() && self.lambda < F::one()) {
            return bad(format!("lambda {} outside (0, 1)", self.lambda));
        }
        if !(self.em_tolerance > F::zero()) {
            return bad(format!("em tolerance {} must be positive", self.em_tolerance));
        }
        if self.max_em_iters == 0 {
            return bad("at least one EM iteration required".into());
        }
        if !(self.prune_epsilon >= F::zero()) {
            return bad(format!("pruning threshold {} must be nonnegative", self.prune_epsilon));
        }
        Ok(())
    }
}

/// Combines several background models into one that favours terms frequent
/// in exactly one of them:
///
/// `score(t) = sum_i p_i(t) * prod_{j != i} (1 - p_j(t))`, then normalized.
///
/// A single background is returned unchanged.
pub fn combine_backgrounds<'a, F, I>(models: I) -> Result<SparseLm<F>, ParsimonyError>
where
    F: Probability,
    I: IntoIterator<Item = &'a SparseLm<F>>,
{
    let models: Vec<&SparseLm<F>> = models.into_iter().collect();
    match models.as_slice() {
        [] => return Err(ParsimonyError::NoBackgrounds),
        [only] => return Ok((*only).clone()),
        _ => {}
    }
    // Models lacking a term contribute a factor of one, so only the nonzero
    // probabilities of each term matter.
    let mut per_term: BTreeMap<&str, Vec<F>> = BTreeMap::new();
    for m in &models {
        for (t, p) in m.iter() {
            per_term.entry(t).or_default().push(p);
        }
    }
    let mut scores: Vec<(&str, F)> = Vec::with_capacity(per_term.len());
    let mut suffix: Vec<F> = Vec::new();
    for (t, ps) in &per_term {
        suffix.clear();
        suffix.resize(ps.len() + 1, F::one());
        for i in (0..ps.len()).rev() {
            suffix[i] = suffix[i + 1] * (F::one() - ps[i]);
        }
        let mut prefix = F::one();
        let mut score = F::zero();
        for (i, &p) in ps.iter().enumerate() {
            score = score + p * prefix * suffix[i + 1];
            prefix = prefix * (F::one() - p);
        }
        scores.push((t, score));
    }
    SparseLm::from_weights(scores).map_err(|e| match e {
        ModelError::Empty => ParsimonyError::DegenerateBackground,
        other => other.into(),
    })
}

/// One EM iteration.
///
/// E-step: `e_t = target(t) * lambda*cur(t) / (lambda*cur(t) + (1-lambda)*bg(t))`
/// for every term of `target`; M-step: normalize. Background-only terms are
/// never introduced.
pub fn em_step<F: Probability>(
    target: &SparseLm<F>,
    current: &SparseLm<F>,
    background: &SparseLm<F>,
    lambda: F,
) -> Result<SparseLm<F>, ParsimonyError> {
    let rest = F::one() - lambda;
    let expected = target.iter().map(|(t, pt)| {
        let specific = lambda * current.prob(t);
        let general = rest * background.prob(t);
        let e = if general == F::zero() {
            // Nothing in the background competes for this term.
            if specific > F::zero() { pt } else { F::zero() }
        } else {
            pt * specific / (specific + general)
        };
        (t, e)
    });
    SparseLm::from_weights(expected).map_err(|e| match e {
        ModelError::Empty => ParsimonyError::AllPruned(0.0),
        other => other.into(),
    })
}

/// EM objective: `sum_t target(t) * log(lambda*model(t) + (1-lambda)*bg(t))`.
pub fn log_likelihood<F: Probability>(
    target: &SparseLm<F>,
    model: &SparseLm<F>,
    background: &SparseLm<F>,
    lambda: F,
) -> F {
    target
        .iter()
        .map(|(t, pt)| pt * (lambda * model.prob(t) + (F::one() - lambda) * background.prob(t)).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome<F> {
    pub model: SparseLm<F>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs EM from `target` until the L1 step falls below the tolerance or the
/// iteration cap is hit. No pruning.
pub fn reestimate<F: Probability>(
    target: &SparseLm<F>,
    background: &SparseLm<F>,
    config: &ParsimonyConfig<F>,
) -> Result<EmOutcome<F>, ParsimonyError> {
    config.validate()?;
    let mut model = target.clone();
    for it in 1..=config.max_em_iters {
        let next = em_step(target, &model, background, config.lambda)?;
        let delta = l1_distance(&next, &model);
        model = next;
        if delta < config.em_tolerance {
            return Ok(EmOutcome {
                model,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(EmOutcome {
        model,
        iterations: config.max_em_iters,
        converged: false,
    })
}

/// Parsimonizes `target` toward `background`: EM re-estimation followed by a
/// single pruning step at `prune_epsilon`.
pub fn parsimonize<F: Probability>(
    target: &SparseLm<F>,
    background: &SparseLm<F>,
    config: &ParsimonyConfig<F>,
) -> Result<SparseLm<F>, ParsimonyError> {
    let outcome = reestimate(target, background, config)?;
    prune(&outcome.model, config.prune_epsilon)
}

pub(crate) fn prune<F: Probability>(model: &SparseLm<F>, epsilon: F) -> Result<SparseLm<F>, ParsimonyError> {
    model.prune(epsilon).map_err(|e| match e {
        ModelError::AllPruned(eps) => ParsimonyError::AllPruned(eps),
        other => other.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    type Lm = SparseLm<f64>;

    fn lm(entries: &[(&str, f64)]) -> Lm {
        Lm::from_weights(entries.iter().map(|&(t, p)| (t, p))).unwrap()
    }

    fn cfg(lambda: f64) -> ParsimonyConfig<f64> {
        ParsimonyConfig {
            lambda,
            ..Default::default()
        }
    }

    #[test]
    fn single_background_is_identity() {
        let b = lm(&[("x", 0.7), ("y", 0.3)]);
        assert_eq!(combine_backgrounds([&b]).unwrap(), b);
    }

    #[test]
    fn disjoint_singletons_split_evenly() {
        let c = combine_backgrounds([&lm(&[("x", 1.0)]), &lm(&[("y", 1.0)])]).unwrap();
        assert_eq!(c, lm(&[("x", 0.5), ("y", 0.5)]));
    }

    #[test]
    fn identical_backgrounds() {
        // scores: x = 2 * 0.6 * 0.4 = 0.48, y = 2 * 0.4 * 0.6 = 0.48
        let b = lm(&[("x", 0.6), ("y", 0.4)]);
        let c = combine_backgrounds([&b, &b]).unwrap();
        assert_abs_diff_eq!(c.prob("x"), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.prob("y"), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn combine_matches_direct_product_sum() {
        let ms = [
            lm(&[("a", 0.5), ("b", 0.3), ("c", 0.2)]),
            lm(&[("a", 0.1), ("d", 0.9)]),
            lm(&[("b", 0.6), ("c", 0.1), ("d", 0.3)]),
        ];
        let terms = ["a", "b", "c", "d"];
        let raw: Vec<f64> = terms
            .iter()
            .map(|t| {
                (0..3)
                    .map(|i| {
                        ms[i].prob(t)
                            * (0..3)
                                .filter(|&j| j != i)
                                .map(|j| 1.0 - ms[j].prob(t))
                                .product::<f64>()
                    })
                    .sum()
            })
            .collect();
        let z: f64 = raw.iter().sum();
        let c = combine_backgrounds(ms.iter()).unwrap();
        for (t, r) in terms.iter().zip(&raw) {
            assert_abs_diff_eq!(c.prob(t), r / z, epsilon = 1e-15);
        }
    }

    #[test]
    fn combine_errors() {
        assert_eq!(
            combine_backgrounds(std::iter::empty::<&Lm>()).unwrap_err(),
            ParsimonyError::NoBackgrounds
        );
        let x = lm(&[("x", 1.0)]);
        assert_eq!(
            combine_backgrounds([&x, &x]).unwrap_err(),
            ParsimonyError::DegenerateBackground
        );
    }

    #[test]
    fn one_em_iteration_by_hand() {
        let target = lm(&[("a", 0.5), ("b", 0.5)]);
        let bg = lm(&[("a", 0.9), ("b", 0.1)]);
        let next = em_step(&target, &target, &bg, 0.5).unwrap();
        // e_a = 0.5*0.25/0.7, e_b = 0.5*0.25/0.3
        let (ea, eb) = (0.125 / 0.7, 0.125 / 0.3);
        assert_abs_diff_eq!(ea, 0.17857, epsilon = 1e-5);
        assert_abs_diff_eq!(eb, 0.41667, epsilon = 1e-5);
        assert_abs_diff_eq!(next.prob("a"), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(next.prob("b"), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn target_equal_to_background_is_fixed() {
        let t = lm(&[("a", 0.2), ("b", 0.3), ("c", 0.5)]);
        let out = reestimate(&t, &t, &cfg(0.3)).unwrap();
        assert!(l1_distance(&out.model, &t) < 1e-12);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn background_only_terms_are_not_introduced() {
        let t = lm(&[("a", 1.0)]);
        let out = parsimonize(&t, &lm(&[("b", 1.0)]), &cfg(0.5)).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn lambda_near_one_keeps_target() {
        let t = lm(&[("a", 0.2), ("b", 0.3), ("c", 0.5)]);
        let bg = lm(&[("a", 0.7), ("c", 0.2), ("d", 0.1)]);
        let out = parsimonize(&t, &bg, &cfg(1.0 - 1e-9)).unwrap();
        assert!(l1_distance(&out, &t) < 1e-6);
    }

    #[test]
    fn pruning_can_empty_the_model() {
        let t = lm(&[("a", 0.5), ("b", 0.5)]);
        let c = ParsimonyConfig {
            prune_epsilon: 0.9,
            ..cfg(0.5)
        };
        assert_eq!(parsimonize(&t, &t, &c).unwrap_err(), ParsimonyError::AllPruned(0.9));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0).validate().is_err());
        assert!(cfg(1.0).validate().is_err());
        let mut c = cfg(0.5);
        c.max_em_iters = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(0.5);
        c.em_tolerance = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg(0.5);
        c.prune_epsilon = -1.0;
        assert!(c.validate().is_err());
        assert!(ParsimonyConfig::<f64>::default().validate().is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let t = SparseLm::<f32>::from_weights([("a", 0.5f32), ("b", 0.5)]).unwrap();
        let bg = SparseLm::<f32>::from_weights([("a", 0.9f32), ("b", 0.1)]).unwrap();
        let next = em_step(&t, &t, &bg, 0.5).unwrap();
        assert!((next.prob("a") - 0.3).abs() < 1e-6);
    }

    fn three_terms() -> impl Strategy<Value = (Lm, Lm, f64)> {
        (
            proptest::collection::vec(0.02f64..1.0, 3),
            proptest::collection::vec(0.02f64..1.0, 3),
            0.05f64..0.95,
        )
            .prop_map(|(t, b, lam)| {
                let names = ["a", "b", "c"];
                (
                    Lm::from_weights(names.iter().copied().zip(t)).unwrap(),
                    Lm::from_weights(names.iter().copied().zip(b)).unwrap(),
                    lam,
                )
            })
    }

    proptest! {
        #[test]
        fn objective_never_decreases((t, b, lam) in three_terms()) {
            let mut cur = t.clone();
            let mut ll = log_likelihood(&t, &cur, &b, lam);
            for _ in 0..30 {
                cur = em_step(&t, &cur, &b, lam).unwrap();
                let next = log_likelihood(&t, &cur, &b, lam);
                prop_assert!(next >= ll - 1e-12, "{} < {}", next, ll);
                ll = next;
            }
        }

        // Per iteration, a term shrinks exactly when its target/mixture ratio
        // is below the current-model-weighted mean of that ratio. On the first
        // iteration this ordering coincides with the target/background ratio.
        #[test]
        fn suppression_follows_ratio_rule((t, b, lam) in three_terms()) {
            let mut cur = t.clone();
            for it in 0..20 {
                let ratio = |term: &str| t.prob(term) / (lam * cur.prob(term) + (1.0 - lam) * b.prob(term));
                let mean: f64 = cur.iter().map(|(term, p)| p * ratio(term)).sum();
                let next = em_step(&t, &cur, &b, lam).unwrap();
                for term in ["a", "b", "c"] {
                    let (r, d) = (ratio(term), next.prob(term) - cur.prob(term));
                    if (r - mean).abs() > 1e-9 * mean && d.abs() > 1e-12 {
                        prop_assert_eq!(r < mean, d < 0.0, "iteration {} term {}", it, term);
                    }
                    if it == 0 && (r - mean).abs() > 1e-9 * mean {
                        let rb = t.prob(term) / b.prob(term);
                        let others_lower = ["a", "b", "c"].iter().filter(|&&o| t.prob(o) / b.prob(o) < rb).count();
                        // The lowest target/background ratio always shrinks first.
                        if others_lower == 0 { prop_assert!(d < 0.0); }
                    }
                }
                cur = next;
            }
        }

        #[test]
        fn result_normalized_and_support_shrinks((t, b, lam) in three_terms()) {
            let c = ParsimonyConfig { lambda: lam, ..Default::default() };
            let out = reestimate(&t, &b, &c).unwrap().model;
            prop_assert!((out.total_mass() - 1.0).abs() < 1e-9);
            if let Ok(pruned) = parsimonize(&t, &b, &c) {
                prop_assert!((pruned.total_mass() - 1.0).abs() < 1e-9);
                prop_assert!(pruned.terms().all(|term| t.contains(term)));
            }
        }
    }
}

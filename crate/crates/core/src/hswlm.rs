//! Estimation of hierarchical significant words language models.
//!
//! Starting from pooled MLE models, each outer iteration runs
//!
//! * a **specification** pass, top-down: every entity at depth `d` is
//!   parsimonized toward its ancestor `d` edges up, then `d - 1`, down to its
//!   parent, which strips terms explained by more general layers;
//! * a **generalization** pass, bottom-up: every entity of height `h` is
//!   parsimonized toward the combined models of its descendants `h` edges
//!   down, then `h - 1`, down to its children, which strips terms specific to
//!   single descendants.
//!
//! Iteration stops once no model moves by more than `outer_tolerance` (L1).
//! Entities on one depth level only read models from other, already final,
//! levels, so each level is processed in parallel.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, Hierarchy, NodeId};
use crate::fmt::sig12;
use crate::langmodel::{l1_distance, mle_entity, ModelError, ModelSet, SparseLm};
use crate::parsimony::{combine_backgrounds, prune, reestimate, ParsimonyConfig, ParsimonyError};
use crate::scalar::Probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Specification,
    Generalization,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Specification => "specification",
            Stage::Generalization => "generalization",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What to do when parsimonization prunes every term of an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PruneFallback {
    #[default]
    Abort,
    /// Keep only the most probable term of the unpruned EM result.
    KeepTop,
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("cannot initialize entity `{entity}`: {source}")]
    Initialization { entity: String, source: ModelError },
    #[error("{stage} of entity `{entity}` failed: {source}")]
    Parsimony {
        entity: String,
        stage: Stage,
        source: ParsimonyError,
    },
    #[error("invalid estimation configuration: {0}")]
    InvalidConfig(String),
    #[error("model set does not match hierarchy: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationConfig<F> {
    pub parsimony: ParsimonyConfig<F>,
    /// Largest per-entity L1 change over one full iteration that counts as stable.
    pub outer_tolerance: F,
    pub max_outer_iters: usize,
    pub on_all_pruned: PruneFallback,
}

impl<F: Probability> Default for EstimationConfig<F> {
    fn default() -> Self {
        EstimationConfig {
            parsimony: ParsimonyConfig::default(),
            outer_tolerance: F::lit(1e-4),
            max_outer_iters: 10,
            on_all_pruned: PruneFallback::Abort,
        }
    }
}

impl<F: Probability> EstimationConfig<F> {
    pub fn validate(&self) -> Result<(), EstimationError> {
        self.parsimony
            .validate()
            .map_err(|e| EstimationError::InvalidConfig(e.to_string()))?;
        if !(self.outer_tolerance > F::zero()) {
            return Err(EstimationError::InvalidConfig(format!(
                "outer tolerance {} must be positive",
                self.outer_tolerance
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(EstimationError::InvalidConfig(
                "at least one outer iteration required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<F> {
    pub iteration: usize,
    pub stage: Stage,
    pub entity: String,
    pub l1_change: F,
    pub support_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace<F> {
    pub records: Vec<TraceRecord<F>>,
    /// Largest per-entity L1 change of each outer iteration.
    pub max_changes: Vec<F>,
    pub converged: bool,
}

impl<F: Probability> EstimationTrace<F> {
    pub fn iterations(&self) -> usize {
        self.max_changes.len()
    }

    /// TSV with header `iteration stage entity l1_change support_size`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration\tstage\tentity\tl1_change\tsupport_size")?;
        for r in &self.records {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.iteration,
                r.stage,
                r.entity,
                sig12(r.l1_change.as_f64()),
                r.support_size
            )?;
        }
        Ok(())
    }
}

/// Pooled MLE model for every entity, in hierarchy order.
pub fn initialize<F: Probability>(corpus: &Corpus) -> Result<ModelSet<F>, EstimationError> {
    let h = corpus.hierarchy();
    let models: Vec<SparseLm<F>> = h
        .bfs()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            mle_entity(corpus, n).map_err(|source| EstimationError::Initialization {
                entity: h.id(n).to_string(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut set = ModelSet::new();
    for (n, m) in h.bfs().zip(models) {
        set.insert(h.id(n), m);
    }
    Ok(set)
}

fn check_alignment<F: Probability>(models: &ModelSet<F>, h: &Hierarchy) -> Result<(), EstimationError> {
    let aligned = models.len() == h.len() && models.entities().zip(h.bfs()).all(|(e, n)| e == h.id(n));
    if aligned {
        Ok(())
    } else {
        Err(EstimationError::Mismatch(format!(
            "{} models for {} entities, or out of hierarchy order",
            models.len(),
            h.len()
        )))
    }
}

fn parsimonize_entity<F: Probability>(
    model: &SparseLm<F>,
    background: &SparseLm<F>,
    config: &EstimationConfig<F>,
) -> Result<SparseLm<F>, ParsimonyError> {
    let outcome = reestimate(model, background, &config.parsimony)?;
    match prune(&outcome.model, config.parsimony.prune_epsilon) {
        Err(ParsimonyError::AllPruned(_)) if config.on_all_pruned == PruneFallback::KeepTop => {
            let (term, _) = outcome.model.argmax();
            Ok(SparseLm::from_weights([(term, F::one())])?)
        }
        other => other,
    }
}

fn run_pass<F, B>(
    models: &ModelSet<F>,
    hierarchy: &Hierarchy,
    config: &EstimationConfig<F>,
    stage: Stage,
    backgrounds: B,
) -> Result<ModelSet<F>, EstimationError>
where
    F: Probability,
    B: Fn(&ModelSet<F>, NodeId) -> Result<Vec<SparseLm<F>>, ParsimonyError> + Sync,
{
    config.validate()?;
    check_alignment(models, hierarchy)?;
    let mut out = models.clone();
    let mut levels = hierarchy.levels();
    if stage == Stage::Generalization {
        levels.reverse();
    }
    for level in levels {
        let updated: Vec<(NodeId, SparseLm<F>)> = level
            .into_par_iter()
            .map(|node| {
                let fail = |source| EstimationError::Parsimony {
                    entity: hierarchy.id(node).to_string(),
                    stage,
                    source,
                };
                let mut model = out.at(node).clone();
                for bg in backgrounds(&out, node).map_err(fail)? {
                    model = parsimonize_entity(&model, &bg, config).map_err(fail)?;
                }
                Ok((node, model))
            })
            .collect::<Result<_, EstimationError>>()?;
        for (node, model) in updated {
            out.set_at(node, model);
        }
    }
    Ok(out)
}

/// Top-down pass: each entity is parsimonized toward its ancestors, farthest
/// first, using the ancestors' models as already specified in this pass.
pub fn specification_pass<F: Probability>(
    models: &ModelSet<F>,
    hierarchy: &Hierarchy,
    config: &EstimationConfig<F>,
) -> Result<ModelSet<F>, EstimationError> {
    run_pass(models, hierarchy, config, Stage::Specification, |current, node| {
        (1..=hierarchy.depth(node))
            .rev()
            .map(|l| {
                let anc = hierarchy.ancestor_at(node, l).expect("distance within depth");
                Ok(current.at(anc).clone())
            })
            .collect()
    })
}

/// Bottom-up pass: each entity is parsimonized toward the combined models of
/// its descendants, farthest layer first, using descendants already
/// generalized in this pass. Leaves are untouched.
pub fn generalization_pass<F: Probability>(
    models: &ModelSet<F>,
    hierarchy: &Hierarchy,
    config: &EstimationConfig<F>,
) -> Result<ModelSet<F>, EstimationError> {
    run_pass(models, hierarchy, config, Stage::Generalization, |current, node| {
        (1..=hierarchy.height(node))
            .rev()
            .map(|l| {
                let desc = hierarchy.descendants_at(node, l).expect("distance within height");
                combine_backgrounds(desc.iter().map(|&d| current.at(d)))
            })
            .collect()
    })
}

/// Full estimation: MLE initialization followed by alternating specification
/// and generalization passes until stable or `max_outer_iters` is reached.
/// Hitting the cap is not an error; see [`EstimationTrace::converged`].
pub fn estimate_hswlm<F: Probability>(
    corpus: &Corpus,
    config: &EstimationConfig<F>,
) -> Result<(ModelSet<F>, EstimationTrace<F>), EstimationError> {
    config.validate()?;
    let h = corpus.hierarchy();
    let mut models = initialize(corpus)?;
    let mut trace = EstimationTrace {
        records: Vec::new(),
        max_changes: Vec::new(),
        converged: false,
    };
    for iteration in 1..=config.max_outer_iters {
        let start = models.clone();
        let specified = specification_pass(&models, h, config)?;
        record(&mut trace, iteration, Stage::Specification, &models, &specified);
        let generalized = generalization_pass(&specified, h, config)?;
        record(&mut trace, iteration, Stage::Generalization, &specified, &generalized);
        models = generalized;
        models.iteration = iteration;

        let change = start
            .iter()
            .zip(models.iter())
            .map(|((_, a), (_, b))| l1_distance(a, b))
            .fold(F::zero(), F::max);
        trace.max_changes.push(change);
        if change < config.outer_tolerance {
            trace.converged = true;
            break;
        }
    }
    Ok((models, trace))
}

fn record<F: Probability>(
    trace: &mut EstimationTrace<F>,
    iteration: usize,
    stage: Stage,
    before: &ModelSet<F>,
    after: &ModelSet<F>,
) {
    for ((entity, a), (_, b)) in before.iter().zip(after.iter()) {
        trace.records.push(TraceRecord {
            iteration,
            stage,
            entity: entity.to_string(),
            l1_change: l1_distance(a, b),
            support_size: b.support_size(),
        });
    }
}

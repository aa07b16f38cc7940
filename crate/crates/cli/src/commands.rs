use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use hswlm::evalkit::{
    build_features, class_distributions, cross_period_eval, default_class_depth, diversity_report,
    fit_resources, labeled_leaves, synth_corpus, within_period_cv, write_feature_matrix,
    ClassificationSetup, DiversityTable, FeatureScheme, PeriodDistributions, SynthSpec, TrainConfig,
    TransferTable,
};
use hswlm::fmt::sig12;
use hswlm::{estimate_hswlm, js_divergence, Corpus, LanguageModel, Models};

use crate::error::CliError;
use crate::input::{create_dir, load_corpus, load_models, write_file};
use crate::manifest::{ManifestBuilder, ManifestSink};
use crate::{ClassifyArgs, DivergenceArgs, EstimateArgs, InspectArgs, PeriodArgs, Scheme, SynthArgs};

fn io_err(e: std::io::Error) -> CliError {
    CliError::Input(e.to_string())
}

/// Writes `text` to `out`, or stdout when absent.
fn emit(out: Option<&Path>, text: &str, manifest: &mut ManifestBuilder) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text.as_bytes(), manifest),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn estimate(args: &EstimateArgs, seed: u64) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("estimate", args, seed);
    let c = &args.corpus;
    let corpus = load_corpus(&c.hierarchy, &c.docs, c.min_tokens, c.documents_as_leaves, &mut manifest)?;
    let (models, trace) = estimate_hswlm(&corpus, &args.estimation.config())?;

    create_dir(&args.out)?;
    let mut buf = Vec::new();
    models.write_jsonl(&mut buf).map_err(io_err)?;
    write_file(&args.out.join("models.jsonl"), &buf, &mut manifest)?;
    buf.clear();
    trace.write_tsv(&mut buf).map_err(io_err)?;
    write_file(&args.out.join("trace.tsv"), &buf, &mut manifest)?;
    if !trace.converged {
        eprintln!(
            "warning: not converged after {} iterations (last change {})",
            trace.iterations(),
            trace.max_changes.last().map_or_else(|| "n/a".into(), |&c| sig12(c))
        );
    }
    ManifestSink::for_dir(&args.out).write(&manifest.finish())
}

fn model<'a>(models: &'a Models, entity: &str) -> Result<&'a LanguageModel, CliError> {
    models
        .get(entity)
        .ok_or_else(|| CliError::Input(format!("unknown entity `{entity}`")))
}

pub fn inspect(args: &InspectArgs, seed: u64) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("inspect", args, seed);
    let models = load_models(&args.models, &mut manifest)?;
    let selected: Vec<&LanguageModel> = args
        .entities
        .iter()
        .map(|e| model(&models, e))
        .collect::<Result<_, _>>()?;

    // Terms ranked by the first entity; with --curve, the remaining entities'
    // unseen terms follow in their own order.
    let mut rows: Vec<&str> = Vec::new();
    if args.curve {
        let mut seen = BTreeSet::new();
        for m in &selected {
            for (t, _) in m.top_k(usize::MAX) {
                if seen.insert(t) {
                    rows.push(t);
                }
            }
        }
    } else {
        rows = selected[0].top_k(args.top_k).into_iter().map(|(t, _)| t).collect();
    }

    let mut text = format!("rank\tterm\t{}\n", args.entities.join("\t"));
    for (i, t) in rows.iter().enumerate() {
        let probs: Vec<String> = selected.iter().map(|m| sig12(m.prob(t))).collect();
        writeln!(text, "{}\t{}\t{}", i + 1, t, probs.join("\t")).expect("string write");
    }
    emit(args.out.as_deref(), &text, &mut manifest)?;
    ManifestSink::for_file(args.out.as_deref()).write(&manifest.finish())
}

fn cut(m: &LanguageModel, top_k: Option<usize>) -> Result<LanguageModel, CliError> {
    match top_k {
        Some(k) => Ok(m.truncate_top_k(k)?),
        None => Ok(m.clone()),
    }
}

fn load_periods(p: &PeriodArgs, manifest: &mut ManifestBuilder) -> Result<Vec<(String, Corpus)>, CliError> {
    if p.hierarchies.len() != p.docs.len() {
        return Err(CliError::Input(format!(
            "{} --hierarchy but {} --docs; give one of each per period",
            p.hierarchies.len(),
            p.docs.len()
        )));
    }
    if !p.names.is_empty() && p.names.len() != p.docs.len() {
        return Err(CliError::Input(format!(
            "{} --period names for {} periods",
            p.names.len(),
            p.docs.len()
        )));
    }
    p.hierarchies
        .iter()
        .zip(&p.docs)
        .enumerate()
        .map(|(i, (h, d))| {
            let name = p.names.get(i).cloned().unwrap_or_else(|| format!("p{}", i + 1));
            Ok((name, load_corpus(h, d, p.min_tokens, false, manifest)?))
        })
        .collect()
}

fn schemes(requested: &[Scheme], ig_top_n: usize) -> Vec<FeatureScheme> {
    let list = if requested.is_empty() {
        vec![Scheme::Tf, Scheme::Ig, Scheme::Hswlm]
    } else {
        requested.to_vec()
    };
    list.into_iter().map(|s| s.resolve(ig_top_n)).collect()
}

fn class_depth(corpus: &Corpus, requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| default_class_depth(corpus.hierarchy()))
}

pub fn divergence(args: &DivergenceArgs, seed: u64) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("divergence", args, seed);
    let by_models = !args.models.is_empty();
    let by_corpus = !args.periods.docs.is_empty() || !args.periods.hierarchies.is_empty();
    let text = match (by_models, by_corpus) {
        (true, false) => model_divergences(args, &mut manifest)?,
        (false, true) => class_diversity(args, &mut manifest)?,
        _ => {
            return Err(CliError::Input(
                "give either --models files or --hierarchy/--docs periods".into(),
            ))
        }
    };
    emit(args.out.as_deref(), &text, &mut manifest)?;
    ManifestSink::for_file(args.out.as_deref()).write(&manifest.finish())
}

fn model_divergences(args: &DivergenceArgs, manifest: &mut ManifestBuilder) -> Result<String, CliError> {
    let sets: Vec<Models> = args
        .models
        .iter()
        .map(|p| load_models(p, manifest))
        .collect::<Result<_, _>>()?;
    let mut text = String::new();
    match sets.as_slice() {
        [one] => {
            let entities: Vec<&str> = if args.entities.is_empty() {
                one.entities().collect()
            } else {
                args.entities.iter().map(String::as_str).collect()
            };
            let cut_models: Vec<LanguageModel> = entities
                .iter()
                .map(|e| cut(model(one, e)?, args.top_k))
                .collect::<Result<_, _>>()?;
            text.push_str("entity_a\tentity_b\tjsd\n");
            for i in 0..entities.len() {
                for j in i + 1..entities.len() {
                    let d = js_divergence(&cut_models[i], &cut_models[j]);
                    writeln!(text, "{}\t{}\t{}", entities[i], entities[j], sig12(d)).expect("string write");
                }
            }
        }
        [a, b] => {
            let entities: Vec<&str> = if args.entities.is_empty() {
                a.entities().filter(|e| b.get(e).is_some()).collect()
            } else {
                args.entities.iter().map(String::as_str).collect()
            };
            text.push_str("entity\tjsd\n");
            for e in entities {
                let d = js_divergence(&cut(model(a, e)?, args.top_k)?, &cut(model(b, e)?, args.top_k)?);
                writeln!(text, "{}\t{}", e, sig12(d)).expect("string write");
            }
        }
        _ => return Err(CliError::Input("--models takes one or two files".into())),
    }
    Ok(text)
}

fn class_diversity(args: &DivergenceArgs, manifest: &mut ManifestBuilder) -> Result<String, CliError> {
    let periods = load_periods(&args.periods, manifest)?;
    let config = args.estimation.config();
    let top_k = args.top_k.unwrap_or(500);
    let mut tables = Vec::new();
    for scheme in schemes(&args.scheme, args.ig_top_n) {
        let dists = periods
            .iter()
            .map(|(name, corpus)| {
                let depth = class_depth(corpus, args.class_depth);
                Ok(PeriodDistributions {
                    period: name.clone(),
                    classes: class_distributions(corpus, scheme, depth, &config)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        tables.push((scheme.name().to_string(), diversity_report(&dists, top_k)?));
    }
    let mut buf = Vec::new();
    DiversityTable::write_tsv(&tables, &mut buf).map_err(io_err)?;
    Ok(String::from_utf8(buf).expect("tables are utf-8"))
}

pub fn classify(args: &ClassifyArgs, seed: u64) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("classify", args, seed);
    let periods = load_periods(&args.periods, &mut manifest)?;
    if periods.is_empty() {
        return Err(CliError::Input("at least one --hierarchy/--docs period required".into()));
    }
    let schemes = schemes(&args.scheme, args.ig_top_n);
    let base = ClassificationSetup {
        scheme: FeatureScheme::Tf,
        class_depth: args.class_depth,
        estimation: args.estimation.config(),
        train: TrainConfig {
            epochs: args.epochs,
            learning_rate: args.learning_rate,
            regularization: args.regularization,
            seed,
        },
        folds: args.folds,
        seed,
    };

    let mut folds = String::from("period\tscheme\tfold\tmacro_accuracy\n");
    let mut cells = Vec::with_capacity(periods.len());
    for (i, (train_name, train)) in periods.iter().enumerate() {
        let mut row = Vec::with_capacity(schemes.len());
        for &scheme in &schemes {
            let setup = ClassificationSetup { scheme, ..base.clone() };
            let mut accs = Vec::with_capacity(periods.len());
            for (j, (_, test)) in periods.iter().enumerate() {
                if i == j {
                    let cv = within_period_cv(train, &setup)?;
                    for (k, f) in cv.per_fold.iter().enumerate() {
                        writeln!(folds, "{}\t{}\t{}\t{}", train_name, scheme.name(), k + 1, sig12(f.macro_accuracy))
                            .expect("string write");
                    }
                    accs.push(cv.pooled.macro_accuracy);
                } else {
                    accs.push(cross_period_eval(train, test, &setup)?.macro_accuracy);
                }
            }
            row.push(accs);
        }
        cells.push(row);
    }
    let table = TransferTable {
        periods: periods.iter().map(|(n, _)| n.clone()).collect(),
        schemes: schemes.clone(),
        cells,
    };

    create_dir(&args.out)?;
    let mut buf = Vec::new();
    table.write_tsv(&mut buf).map_err(io_err)?;
    write_file(&args.out.join("transfer.tsv"), &buf, &mut manifest)?;
    write_file(&args.out.join("folds.tsv"), folds.as_bytes(), &mut manifest)?;

    if args.features {
        let dir = args.out.join("features");
        create_dir(&dir)?;
        for (name, corpus) in &periods {
            let leaves = labeled_leaves(corpus.hierarchy(), class_depth(corpus, args.class_depth));
            for &scheme in &schemes {
                let resources = fit_resources(corpus, &leaves, scheme, &base.estimation)?;
                let mut buf = Vec::new();
                write_feature_matrix(&build_features(corpus, &leaves, &resources), &mut buf).map_err(io_err)?;
                write_file(&dir.join(format!("{name}.{}.tsv", scheme.name())), &buf, &mut manifest)?;
            }
        }
    }
    ManifestSink::for_dir(&args.out).write(&manifest.finish())
}

pub fn synth(args: &SynthArgs, seed: u64) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("synth", args, seed);
    let spec = SynthSpec {
        fanouts: args.fanouts.clone(),
        planted_per_entity: args.planted,
        general_terms: args.general,
        docs_per_leaf: args.docs_per_leaf,
        doc_length: args.doc_length,
        proportions: args.proportions.clone(),
        periods: args.periods,
        seed,
    };
    let synth = synth_corpus(&spec).map_err(|e| CliError::Input(e.to_string()))?;

    create_dir(&args.out)?;
    for (i, corpus) in synth.periods.iter().enumerate() {
        let dir = args.out.join(format!("p{}", i + 1));
        create_dir(&dir)?;
        let h = serde_json::to_string_pretty(&corpus.hierarchy().to_json()).expect("json") + "\n";
        write_file(&dir.join("hierarchy.json"), h.as_bytes(), &mut manifest)?;
        let mut docs = String::new();
        for rec in synth.records(i) {
            docs.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            docs.push('\n');
        }
        write_file(&dir.join("docs.jsonl"), docs.as_bytes(), &mut manifest)?;
    }
    let mut planted = String::from("owner\tterm\n");
    for t in &synth.general {
        writeln!(planted, "general\t{t}").expect("string write");
    }
    for (entity, terms) in &synth.planted {
        for t in terms {
            writeln!(planted, "{entity}\t{t}").expect("string write");
        }
    }
    write_file(&args.out.join("planted.tsv"), planted.as_bytes(), &mut manifest)?;
    let mut labels = String::from("leaf\tclass\n");
    for (leaf, class) in &synth.labels {
        writeln!(labels, "{leaf}\t{class}").expect("string write");
    }
    write_file(&args.out.join("labels.tsv"), labels.as_bytes(), &mut manifest)?;
    ManifestSink::for_dir(&args.out).write(&manifest.finish())
}

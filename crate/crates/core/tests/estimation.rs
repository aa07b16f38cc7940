use hswlm::evalkit::{synth_corpus, SynthCorpus, SynthSpec};
use hswlm::langmodel::ModelSet;
use hswlm::{
    estimate_hswlm, initialize, l1_distance, mle_entity, specification_pass, Config, Corpus, Models,
};

fn small_planted() -> SynthCorpus {
    synth_corpus(&SynthSpec {
        fanouts: vec![2, 2, 3],
        docs_per_leaf: 10,
        periods: 1,
        seed: 5,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn converged_config() -> Config {
    Config {
        max_outer_iters: 100,
        ..Config::default()
    }
}

#[test]
fn models_are_normalized_and_shrink_support() {
    let synth = small_planted();
    let corpus = &synth.periods[0];
    let mle: Models = initialize(corpus).unwrap();
    let (models, trace) = estimate_hswlm::<f64>(corpus, &converged_config()).unwrap();
    assert!(trace.converged);
    assert_eq!(models.len(), corpus.hierarchy().len());
    for (entity, m) in models.iter() {
        assert!((m.total_mass() - 1.0).abs() < 1e-9, "{entity}");
        assert!(m.iter().all(|(_, p)| p > 0.0), "{entity}");
        let base = mle.get(entity).unwrap();
        assert!(m.terms().all(|t| base.contains(t)), "{entity} gained a term");
        assert!(m.support_size() < base.support_size(), "{entity} did not shrink");
    }
}

#[test]
fn root_mle_covers_vocabulary() {
    let synth = small_planted();
    let corpus = &synth.periods[0];
    let root = mle_entity::<f64>(corpus, corpus.hierarchy().root()).unwrap();
    let terms: Vec<&str> = root.terms().collect();
    let vocab: Vec<&str> = corpus.vocabulary().iter().map(String::as_str).collect();
    assert_eq!(terms, vocab);
}

/// Probability mass a model puts on each kind of planted term relative to
/// `party`: general, its ancestors, itself, its children.
fn mass_by_origin(synth: &SynthCorpus, h: &hswlm::Hierarchy, party: hswlm::NodeId, m: &hswlm::LanguageModel) -> [f64; 4] {
    let sum = |terms: &mut dyn Iterator<Item = &String>| terms.map(|t| m.prob(t)).sum::<f64>();
    let mut ancestors = Vec::new();
    let mut up = h.parent(party);
    while let Some(a) = up {
        ancestors.push(a);
        up = h.parent(a);
    }
    [
        sum(&mut synth.general.iter()),
        sum(&mut ancestors.iter().flat_map(|&a| synth.planted[h.id(a)].iter())),
        sum(&mut synth.planted[h.id(party)].iter()),
        sum(&mut h.children(party).iter().flat_map(|&c| synth.planted[h.id(c)].iter())),
    ]
}

#[test]
fn specification_moves_mass_from_shared_to_distinctive_terms() {
    let synth = small_planted();
    let corpus = &synth.periods[0];
    let h = corpus.hierarchy();
    let mle: Models = initialize(corpus).unwrap();
    let specified = specification_pass(&mle, h, &Config::default()).unwrap();
    for party in h.bfs().filter(|&n| h.depth(n) == 2) {
        let [g0, a0, o0, c0] = mass_by_origin(&synth, h, party, mle.at(party));
        let [g1, a1, o1, c1] = mass_by_origin(&synth, h, party, specified.at(party));
        let id = h.id(party);
        assert!(g1 < g0 && a1 < a0, "{id}: shared {g0}->{g1}, ancestors {a0}->{a1}");
        assert!(o1 > o0 && c1 > c0, "{id}: own {o0}->{o1}, members {c0}->{c1}");
    }
}

#[test]
fn estimated_parties_drop_member_terms_and_are_led_by_their_own() {
    let synth = small_planted();
    let corpus = &synth.periods[0];
    let h = corpus.hierarchy();
    let mle: Models = initialize(corpus).unwrap();
    let (models, _) = estimate_hswlm::<f64>(corpus, &converged_config()).unwrap();
    for party in h.bfs().filter(|&n| h.depth(n) == 2) {
        let [g0, a0, o0, _] = mass_by_origin(&synth, h, party, mle.at(party));
        let [g, a, own, members] = mass_by_origin(&synth, h, party, models.at(party));
        let id = h.id(party);
        assert!(members < 1e-9, "{id}: member mass {members}");
        assert!(g < g0 && a < a0, "{id}: general {g0}->{g}, ancestors {a0}->{a}");
        assert!(own > 4.0 * o0 && own > 0.5, "{id}: own {o0}->{own}");
    }
}

fn estimate_with_threads(corpus: &Corpus, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let (models, trace) = estimate_hswlm::<f64>(corpus, &Config::default()).unwrap();
        let (mut m, mut t) = (Vec::new(), Vec::new());
        models.write_jsonl(&mut m).unwrap();
        trace.write_tsv(&mut t).unwrap();
        (m, t)
    })
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let synth = small_planted();
    let one = estimate_with_threads(&synth.periods[0], 1);
    let four = estimate_with_threads(&synth.periods[0], 4);
    assert_eq!(one, four);
}

#[test]
fn models_survive_a_file_round_trip() {
    let synth = small_planted();
    let (models, _) = estimate_hswlm::<f64>(&synth.periods[0], &Config::default()).unwrap();
    let mut buf = Vec::new();
    models.write_jsonl(&mut buf).unwrap();
    let back = Models::read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back.len(), models.len());
    for ((a, x), (b, y)) in models.iter().zip(back.iter()) {
        assert_eq!(a, b);
        assert!(l1_distance(x, y) < 1e-10, "{a}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let synth = small_planted();
    let corpus = &synth.periods[0];
    let (wide, _) = estimate_hswlm::<f64>(corpus, &Config::default()).unwrap();
    let (narrow, _): (ModelSet<f32>, _) = estimate_hswlm(corpus, &hswlm::f32::Config::default()).unwrap();
    for ((entity, w), (_, n)) in wide.iter().zip(narrow.iter()) {
        let n = n.cast::<f64>().unwrap();
        assert!(l1_distance(w, &n) < 1e-3, "{entity}: {}", l1_distance(w, &n));
    }
}

//! End-to-end behaviour of trained toy models through the library API.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use innmorph::embedding::EmbeddingTable;
use innmorph::eval::{
    distinct_count, evaluate, predict_analysis, predict_inflection, predict_lemma, run_ablation, sample_surfaces,
    AblationCell, ZMode,
};
use innmorph::flow::Task;
use innmorph::morphdata::{generate_toy_language, split_dataset, MorphRecord, ToyLangConfig};
use innmorph::training::{fit, Architecture, Checkpoint, LossSwitches, ModelKind, TrainConfig};

struct Fixture {
    train: Vec<MorphRecord>,
    dev: Vec<MorphRecord>,
    test: Vec<MorphRecord>,
    table: EmbeddingTable,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let (records, table) = generate_toy_language(&ToyLangConfig::default()).unwrap();
        let (train, dev, test) = split_dataset(&records, (0.8, 0.1, 0.1), 11).unwrap();
        Fixture { train, dev, test, table }
    })
}

fn cfg() -> TrainConfig {
    TrainConfig::default()
}

fn inflection_model() -> &'static Checkpoint {
    static M: OnceLock<Checkpoint> = OnceLock::new();
    M.get_or_init(|| {
        let f = fixture();
        fit(Task::Inflection, Architecture::Inn, &f.train, &f.dev, &f.table, &cfg()).unwrap()
    })
}

fn lemmatization_model() -> &'static Checkpoint {
    static M: OnceLock<Checkpoint> = OnceLock::new();
    M.get_or_init(|| {
        let f = fixture();
        fit(Task::Lemmatization, Architecture::Inn, &f.train, &f.dev, &f.table, &cfg()).unwrap()
    })
}

fn inn(ckpt: &Checkpoint) -> &innmorph::flow::InnModel {
    match ckpt.model() {
        ModelKind::Inn(m) => m,
        ModelKind::Baseline(_) => panic!("expected an INN"),
    }
}

#[test]
fn inflect_then_analyze_round_trips_on_held_out_pairs() {
    let f = fixture();
    let ckpt = inflection_model();
    let model = inn(ckpt);
    let mut consistent = 0;
    for r in &f.test {
        let surface = predict_inflection(model, &r.lemma, &r.tags, &f.table, &ckpt.tag_index).unwrap();
        let a = predict_analysis(model, &surface, &f.table, &ckpt.tag_index, ZMode::Hardened).unwrap();
        if a.lemma == r.lemma && a.tags == r.tags {
            consistent += 1;
        }
    }
    let share = 100.0 * consistent as f64 / f.test.len() as f64;
    assert!(share >= 85.0, "round-trip consistency {share:.2}%");
}

#[test]
fn trained_inflection_produces_gold_surfaces() {
    let f = fixture();
    let ckpt = inflection_model();
    let report = evaluate(ckpt, &f.test, &f.table).unwrap();
    assert!(report.surface_em.unwrap() >= 85.0, "{}", report.to_text());
    let r = &f.test[0];
    let a = predict_inflection(inn(ckpt), &r.lemma, &r.tags, &f.table, &ckpt.tag_index).unwrap();
    let b = predict_inflection(inn(ckpt), &r.lemma, &r.tags, &f.table, &ckpt.tag_index).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lemmatizer_recovers_lemmas_and_samples_valid_surfaces() {
    let f = fixture();
    let ckpt = lemmatization_model();
    let model = inn(ckpt);
    let hits = f
        .test
        .iter()
        .filter(|r| predict_lemma(model, &r.surface, &f.table).unwrap() == r.lemma)
        .count();
    assert!(hits as f64 >= 0.85 * f.test.len() as f64, "{hits} of {}", f.test.len());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lemma = &f.test[0].lemma;
    let samples = sample_surfaces(model, lemma, 25, 1.0, &mut rng, &f.table).unwrap();
    assert_eq!(samples.len(), 25);
    assert!(samples.iter().all(|s| f.table.contains(s)));
    assert!((1..=25).contains(&distinct_count(&samples)));
    let mut again = ChaCha8Rng::seed_from_u64(3);
    assert_eq!(samples, sample_surfaces(model, lemma, 25, 1.0, &mut again, &f.table).unwrap());
}

#[test]
fn baseline_reaches_nonzero_dev_accuracy() {
    let f = fixture();
    let ckpt = fit(Task::Inflection, Architecture::Baseline, &f.train, &f.dev, &f.table, &cfg()).unwrap();
    assert!(ckpt.state.history.best_dev().unwrap() > 0.0);
    let report = evaluate(&ckpt, &f.dev, &f.table).unwrap();
    assert!(report.surface_em.unwrap() > 0.0);
    assert!(report.lemma_em.is_none() && report.tag_f1.is_none());
}

#[test]
fn ablation_shows_lemma_collapse_without_inverse_loss() {
    let f = fixture();
    let cell = |name: &str, switches| AblationCell {
        name: name.into(),
        task: Task::Inflection,
        arch: Architecture::Inn,
        config: TrainConfig { switches, ..cfg() },
    };
    let rows = run_ablation(
        &f.train,
        &f.dev,
        &f.test,
        &f.table,
        &[cell("y", LossSwitches::Y_ONLY), cell("yx", LossSwitches::Y_X)],
    );
    let lemma = |i: usize| rows[i].report.as_ref().unwrap().lemma_em.unwrap();
    assert!(lemma(0) < 10.0, "L_y only: {}", lemma(0));
    assert!(lemma(1) >= 80.0, "L_y+L_x: {}", lemma(1));
}

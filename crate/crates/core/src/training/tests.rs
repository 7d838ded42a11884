use super::*;
use crate::morphdata::{generate_toy_language, split_dataset, ToyLangConfig};

fn tiny() -> (Vec<MorphRecord>, Vec<MorphRecord>, EmbeddingTable) {
    let (recs, table) = generate_toy_language(&ToyLangConfig {
        lemma_count: 8,
        suffix_slots: 2,
        tags_per_slot: 2,
        embedding_dim: 8,
        seed: 4,
    })
    .unwrap();
    let (train, dev, _) = split_dataset(&recs, (0.7, 0.2, 0.1), 1).unwrap();
    (train, dev, table)
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        hidden: 8,
        accumulation: 4,
        ..Default::default()
    }
}

#[test]
fn zero_epochs_leave_model_unchanged() {
    let (train, dev, table) = tiny();
    let cfg = TrainConfig {
        epochs: 0,
        ..small_cfg()
    };
    let index = TagIndex::build(&train);
    let model = build_inn(Task::Inflection, 8, index.len(), &cfg).unwrap();
    let (after, history) = train_inflection(model.clone(), &train, &dev, &table, &cfg).unwrap();
    assert_eq!(after, model);
    assert!(history.is_empty());
    let lem = build_inn(Task::Lemmatization, 8, 0, &cfg).unwrap();
    let (after, history) = train_lemmatization(lem.clone(), &train, &dev, &table, &cfg).unwrap();
    assert_eq!(after, lem);
    assert!(history.is_empty());
}

#[test]
fn combined_step_is_sum_of_passes() {
    let (train, _, table) = tiny();
    let cfg = small_cfg();
    let index = TagIndex::build(&train);
    for task in [Task::Inflection, Task::Lemmatization] {
        let tags = if task == Task::Inflection { index.len() } else { 0 };
        let model = build_inn(task, 8, tags, &cfg).unwrap();
        let (examples, _) = prepare_examples(task, &train[..5], &table, &index).unwrap();
        let mut both = model.grads_like();
        let mut split = model.grads_like();
        let mut rng_a = ChaCha8Rng::seed_from_u64(9);
        let mut rng_b = ChaCha8Rng::seed_from_u64(9);
        for ex in &examples {
            inn_record_step(&model, task, ex, &cfg, 1.0, Passes::BOTH, &mut rng_a, &mut both).unwrap();
            let mut unused = ChaCha8Rng::seed_from_u64(0);
            inn_record_step(&model, task, ex, &cfg, 1.0, Passes::FORWARD, &mut unused, &mut split).unwrap();
            inn_record_step(&model, task, ex, &cfg, 1.0, Passes::INVERSE, &mut rng_b, &mut split).unwrap();
        }
        let a = both.flatten();
        let b = split.flatten();
        assert!(a.iter().any(|v| *v != 0.0));
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{task}: {diff}");
    }
}

#[test]
fn step_loss_is_bitwise_reproducible() {
    let (train, _, table) = tiny();
    let cfg = small_cfg();
    let index = TagIndex::build(&train);
    let model = build_inn(Task::Inflection, 8, index.len(), &cfg).unwrap();
    let (examples, _) = prepare_examples(Task::Inflection, &train, &table, &index).unwrap();
    let run = || {
        let mut g = model.grads_like();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parts: Vec<f64> = examples
            .iter()
            .map(|ex| {
                inn_record_step(&model, Task::Inflection, ex, &cfg, 1.0, Passes::BOTH, &mut rng, &mut g)
                    .unwrap()
                    .total
            })
            .collect();
        (parts, g.flatten())
    };
    assert_eq!(run(), run());
}

#[test]
fn effectively_zero_loss_never_moves_parameters() {
    let (train, dev, table) = tiny();
    let mut cfg = small_cfg();
    cfg.switches = LossSwitches::Y_ONLY;
    cfg.weights.alpha_y = 0.0;
    for arch in [Architecture::Inn, Architecture::Baseline] {
        let start = Trainer::new(Task::Inflection, arch, &train, &dev, &table, &cfg).unwrap();
        let before = start.checkpoint().model().clone();
        let done = start.train().unwrap();
        assert_eq!(done.model().flatten(), before.flatten());
    }
}

#[test]
fn training_is_deterministic_and_resumable() {
    let (train, dev, table) = tiny();
    let cfg = TrainConfig {
        epochs: 4,
        ..small_cfg()
    };
    let full = fit(Task::Inflection, Architecture::Inn, &train, &dev, &table, &cfg).unwrap();
    let again = fit(Task::Inflection, Architecture::Inn, &train, &dev, &table, &cfg).unwrap();
    assert_eq!(full.to_json().unwrap(), again.to_json().unwrap());
    assert_eq!(full.state.history.len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.json");
    let mut first = Trainer::new(Task::Inflection, Architecture::Inn, &train, &dev, &table, &cfg).unwrap();
    first.run_epochs(2).unwrap();
    first.checkpoint().save(&path).unwrap();
    drop(first);
    let restored = Checkpoint::load(&path).unwrap();
    let resumed = Trainer::resume(restored, &train, &dev, &table).unwrap().train().unwrap();
    assert_eq!(resumed.to_json().unwrap(), full.to_json().unwrap());
}

#[test]
fn checkpoint_rejects_damage() {
    let (train, dev, table) = tiny();
    let cfg = TrainConfig {
        epochs: 1,
        ..small_cfg()
    };
    let done = fit(Task::Lemmatization, Architecture::Inn, &train, &dev, &table, &cfg).unwrap();
    let text = done.to_json().unwrap();
    assert_eq!(Checkpoint::from_json(&text).unwrap(), done);
    assert!(matches!(Checkpoint::from_json(&text[..text.len() / 2]), Err(Error::Checkpoint(_))));
    let foreign = text.replacen(CHECKPOINT_FORMAT, "other", 1);
    assert!(Checkpoint::from_json(&foreign).is_err());
    let other_table = EmbeddingTable::new(4);
    assert!(Trainer::resume(done, &train, &dev, &other_table).is_err());
}

#[test]
fn baseline_trains_and_is_deterministic() {
    let (train, dev, table) = tiny();
    let cfg = small_cfg();
    let (a, ha) = train_baseline(Task::Inflection, &train, &dev, &table, &cfg).unwrap();
    let (b, hb) = train_baseline(Task::Inflection, &train, &dev, &table, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(ha.len(), 3);
}

#[test]
fn early_stopping_halts_after_patience() {
    let (train, dev, table) = tiny();
    let cfg = TrainConfig {
        epochs: 50,
        early_stop_patience: 2,
        learning_rate: 1e-9,
        ..small_cfg()
    };
    let done = fit(Task::Inflection, Architecture::Inn, &train, &dev, &table, &cfg).unwrap();
    let best = done.state.early.best_epoch.unwrap();
    assert!(done.state.history.len() <= best + 1 + cfg.early_stop_patience);
    assert!(done.state.history.len() < 50);
}

#[test]
fn unresolvable_words_are_reported() {
    let (mut train, dev, table) = tiny();
    train[0].surface = "notaword".into();
    match Trainer::new(Task::Inflection, Architecture::Inn, &train, &dev, &table, &small_cfg()) {
        Err(Error::Unresolvable(w)) => assert_eq!(w, "notaword"),
        Err(e) => panic!("unexpected {e}"),
        Ok(_) => panic!("expected an error"),
    }
}

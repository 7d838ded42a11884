//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use innmorph::embedding::EmbeddingTable;
use innmorph::eval::{evaluate, evaluate_detailed, shuffled_tag_f1, Averaging, EvalReport};
use innmorph::flow::{CouplingBlock, InnModel, InputGrad, IoLayout, Task, Upstream};
use innmorph::latent::{
    gumbel_softmax_backward, gumbel_softmax_sample, gumbel_softmax_with_noise, draw_noise, kl_to_uniform,
    kl_to_uniform_logits, LatentSpec,
};
use innmorph::loss::{
    bce_tag_loss, bce_with_logits, composite_inflection_loss, cosine_loss, sigmoid, LossWeights,
};
use innmorph::morphdata::{generate_toy_language, split_dataset, MorphRecord, TagSet, ToyLangConfig};
use innmorph::numerics::{max_relative_error, Mlp, ParamSet};
use innmorph::training::{fit, Architecture, Checkpoint, LossSwitches, TrainConfig};

const EPS: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn vec_in(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn central(mut f: impl FnMut(&[f64]) -> f64, point: &[f64]) -> Vec<f64> {
    let mut p = point.to_vec();
    (0..p.len())
        .map(|i| {
            let o = p[i];
            p[i] = o + EPS;
            let a = f(&p);
            p[i] = o - EPS;
            let b = f(&p);
            p[i] = o;
            (a - b) / (2.0 * EPS)
        })
        .collect()
}

/// Central differences over every parameter of a model. A component whose
/// stencil changes the ReLU activation pattern straddles a kink, where the
/// function is not differentiable, and comes back as `None`.
fn central_params<M: ParamSet + Clone>(
    model: &M,
    f: impl Fn(&M) -> f64,
    pattern: impl Fn(&M) -> Vec<bool>,
) -> Vec<Option<f64>> {
    let mut m = model.clone();
    let base = pattern(&m);
    let sizes: Vec<usize> = m.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (ti, len) in sizes.into_iter().enumerate() {
        for k in 0..len {
            let o = m.tensors()[ti][k];
            m.tensors_mut()[ti][k] = o + EPS;
            let (a, pa) = (f(&m), pattern(&m));
            m.tensors_mut()[ti][k] = o - EPS;
            let (b, pb) = (f(&m), pattern(&m));
            m.tensors_mut()[ti][k] = o;
            out.push((pa == base && pb == base).then(|| (a - b) / (2.0 * EPS)));
        }
    }
    out
}

/// [`central`] with the same kink screening as [`central_params`].
fn central_inputs(
    f: impl Fn(&[f64]) -> f64,
    pattern: impl Fn(&[f64]) -> Vec<bool>,
    point: &[f64],
) -> Vec<Option<f64>> {
    let base = pattern(point);
    let mut p = point.to_vec();
    (0..p.len())
        .map(|i| {
            let o = p[i];
            p[i] = o + EPS;
            let (a, pa) = (f(&p), pattern(&p));
            p[i] = o - EPS;
            let (b, pb) = (f(&p), pattern(&p));
            p[i] = o;
            (pa == base && pb == base).then(|| (a - b) / (2.0 * EPS))
        })
        .collect()
}

#[derive(Default)]
struct Tally {
    worst: Vec<(&'static str, f64)>,
    compared: usize,
    kinks: usize,
}

impl Tally {
    fn add(&mut self, name: &'static str, analytic: &[f64], numeric: &[f64]) {
        let e = max_relative_error(analytic, numeric, REL_FLOOR);
        self.compared += analytic.len();
        match self.worst.iter_mut().find(|(n, _)| *n == name) {
            Some((_, w)) => *w = w.max(e),
            None => self.worst.push((name, e)),
        }
    }

    fn add_screened(&mut self, name: &'static str, analytic: &[f64], numeric: &[Option<f64>]) {
        assert_eq!(analytic.len(), numeric.len());
        let (a, n): (Vec<f64>, Vec<f64>) = analytic
            .iter()
            .zip(numeric)
            .filter_map(|(&a, n)| n.map(|n| (a, n)))
            .unzip();
        self.kinks += analytic.len() - a.len();
        self.add(name, &a, &n);
        self.compared += analytic.len() - a.len();
    }
}

// ---------------------------------------------------------------- criterion 1

fn invertibility() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    let mut widest = 0;
    for m in 0..100u64 {
        let width = if m == 0 { 256 } else { rng.random_range(2..=256) };
        widest = widest.max(width);
        let model = InnModel::new(IoLayout::raw(width, width, 0, 0), 3, 128, 2, 5000 + m).unwrap();
        for _ in 0..10 {
            let x = vec_in(&mut rng, width, 1.0);
            let (v, _) = model.forward_padded(&x).unwrap();
            let back = model.inverse_padded(&v).unwrap();
            let err = x.iter().zip(back.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(err);
            pairs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-6 && secs < 10.0,
        format!("{pairs} pairs up to width {widest}, max |x - g(f(x))| = {worst:.2e}, {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let draws = 100;
    let mut tally = Tally::default();

    for _ in 0..draws {
        // cosine
        let n = rng.random_range(2..20);
        let p = vec_in(&mut rng, n, 1.0);
        let g = vec_in(&mut rng, n, 1.0);
        let (_, a) = cosine_loss(&p, &g).unwrap();
        let num = central(|q| cosine_loss(q, &g).unwrap().0, &p);
        tally.add("cosine", &a, &num);

        // BCE on sigmoid activations, gradient w.r.t. pre-sigmoid values
        let logits = vec_in(&mut rng, n, 4.0);
        let gold: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect();
        let act: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
        let (_, a) = bce_tag_loss(&act, &gold).unwrap();
        let num = central(
            |l| {
                let s: Vec<f64> = l.iter().map(|&v| sigmoid(v)).collect();
                bce_tag_loss(&s, &gold).unwrap().0
            },
            &logits,
        );
        tally.add("bce", &a, &num);

        let (_, a) = bce_with_logits(&logits, &gold).unwrap();
        let num = central(|l| bce_with_logits(l, &gold).unwrap().0, &logits);
        tally.add("bce_with_logits", &a, &num);

        // KL to uniform, on probabilities and on logits
        let spec = LatentSpec::new(rng.random_range(1..4), rng.random_range(2..5), 1.0).unwrap();
        let zl = vec_in(&mut rng, spec.len(), 3.0);
        let probs = innmorph::latent::block_softmax(&zl, &spec, 1.0).unwrap();
        let (_, a) = kl_to_uniform(&probs, &spec).unwrap();
        let num = central(|q| kl_to_uniform(q, &spec).unwrap().0, &probs);
        tally.add("kl_to_uniform", &a, &num);
        let (_, a) = kl_to_uniform_logits(&zl, &spec).unwrap();
        let num = central(|q| kl_to_uniform_logits(q, &spec).unwrap().0, &zl);
        tally.add("kl_to_uniform_logits", &a, &num);

        // Gumbel-Softmax relaxation with fixed noise
        let spec = spec.with_tau(rng.random_range(0.5..2.0));
        let noise = draw_noise(&spec, &mut rng);
        let w = vec_in(&mut rng, spec.len(), 1.0);
        let sample = gumbel_softmax_with_noise(&zl, &noise, &spec).unwrap();
        let a = gumbel_softmax_backward(&sample, &w, &spec).unwrap();
        let num = central(|q| dotp(&w, &gumbel_softmax_with_noise(q, &noise, &spec).unwrap()), &zl);
        tally.add("gumbel_softmax", &a, &num);

        // MLP: parameters and input
        let (din, dout) = (rng.random_range(1..8), rng.random_range(1..8));
        let mlp = Mlp::new(din, rng.random_range(2..12), dout, rng.random_range(1..4), rng.random());
        let x = vec_in(&mut rng, din, 1.0);
        let w = vec_in(&mut rng, dout, 1.0);
        let (_, cache) = mlp.forward(&x).unwrap();
        let (grads, gx) = mlp.backward(&cache, &w).unwrap();
        let mlp_pattern = |m: &Mlp, q: &[f64]| m.forward(q).unwrap().1.relu_pattern();
        let num = central_params(&mlp, |m| dotp(&w, &m.eval(&x).unwrap()), |m| mlp_pattern(m, &x));
        tally.add_screened("mlp params", &grads.flatten(), &num);
        let num = central_inputs(|q| dotp(&w, &mlp.eval(q).unwrap()), |q| mlp_pattern(&mlp, q), &x);
        tally.add_screened("mlp input", &gx, &num);

        // coupling block: both directions, parameters and input
        let width = rng.random_range(2..12);
        let block = CouplingBlock::new(width, rng.random_range(2..10), 2, rng.random());
        let u = vec_in(&mut rng, width, 1.0);
        let w = vec_in(&mut rng, width, 1.0);
        let fpat = |b: &CouplingBlock, q: &[f64]| b.forward(q).unwrap().cache.relu_pattern();
        let ipat = |b: &CouplingBlock, q: &[f64]| b.inverse(q).unwrap().1.relu_pattern();
        let out = block.forward(&u).unwrap();
        let mut g = block.grads_like();
        let gu = block.backward(&out.cache, &w, &mut g).unwrap();
        let num = central_params(&block, |b| dotp(&w, &b.apply(&u).unwrap().0), |b| fpat(b, &u));
        tally.add_screened("coupling params (forward)", &g.flatten(), &num);
        let num = central_inputs(|q| dotp(&w, &block.apply(q).unwrap().0), |q| fpat(&block, q), &u);
        tally.add_screened("coupling input (forward)", &gu, &num);
        let (_, icache) = block.inverse(&u).unwrap();
        let mut g = block.grads_like();
        let gv = block.backward_inverse(&icache, &w, &mut g).unwrap();
        let num = central_params(&block, |b| dotp(&w, &b.invert(&u).unwrap()), |b| ipat(b, &u));
        tally.add_screened("coupling params (inverse)", &g.flatten(), &num);
        let num = central_inputs(|q| dotp(&w, &block.invert(q).unwrap()), |q| ipat(&block, q), &u);
        tally.add_screened("coupling input (inverse)", &gv, &num);

        // Full INN. Biases get a small random offset (trained models never
        // keep the all-zero initial biases, which put zero-padded inputs
        // exactly on a kink), and the inverse runs on a forward image.
        let (cat, d) = (rng.random_range(2..4), rng.random_range(0..3));
        let zl = d * cat;
        let y_dim = rng.random_range(2..6);
        let x_dim = rng.random_range(2..=y_dim + zl);
        let layout = IoLayout::raw(x_dim, y_dim, d, if d == 0 { 0 } else { cat });
        let mut model = InnModel::new(layout, 3, rng.random_range(2..10), 2, rng.random()).unwrap();
        let names = model.tensor_names();
        for (name, t) in names.iter().zip(model.tensors_mut()) {
            if name.ends_with("bias") {
                t.iter_mut().for_each(|b| *b += rng.random_range(-0.1..0.1));
            }
        }
        let x = vec_in(&mut rng, x_dim, 0.5);
        let wy = vec_in(&mut rng, y_dim, 1.0);
        let wz = vec_in(&mut rng, zl, 1.0);
        let fwd_loss = |m: &InnModel, x: &[f64]| {
            let (y, z, _) = m.predict(x).unwrap();
            dotp(&wy, &y) + dotp(&wz, &z)
        };
        let fwd_pat = |m: &InnModel, x: &[f64]| m.forward(x).unwrap().cache.relu_pattern();
        let fwd = model.forward(&x).unwrap();
        let mut g = model.grads_like();
        let InputGrad::Forward { x: gx } = model.backward(&fwd.cache, Upstream::Forward { y: &wy, z: &wz }, &mut g).unwrap()
        else {
            unreachable!()
        };
        let num = central_params(&model, |m| fwd_loss(m, &x), |m| fwd_pat(m, &x));
        tally.add_screened("inn params (forward)", &g.flatten(), &num);
        let num = central_inputs(|q| fwd_loss(&model, q), |q| fwd_pat(&model, q), &x);
        tally.add_screened("inn input (forward)", &gx, &num);

        let (yv, zv, _) = model.predict(&vec_in(&mut rng, x_dim, 0.5)).unwrap();
        let wx = vec_in(&mut rng, x_dim, 1.0);
        let inv_pat = |m: &InnModel, y: &[f64], z: &[f64]| m.inverse(y, z).unwrap().cache.relu_pattern();
        let inv = model.inverse(&yv, &zv).unwrap();
        let mut g = model.grads_like();
        let InputGrad::Inverse { y: gy, z: gz } = model.backward(&inv.cache, Upstream::Inverse { x: &wx }, &mut g).unwrap()
        else {
            unreachable!()
        };
        let num = central_params(
            &model,
            |m| dotp(&wx, &m.reconstruct(&yv, &zv).unwrap()),
            |m| inv_pat(m, &yv, &zv),
        );
        tally.add_screened("inn params (inverse)", &g.flatten(), &num);
        let mut yz = yv.to_vec();
        yz.extend_from_slice(&zv);
        let num = central_inputs(
            |q| dotp(&wx, &model.reconstruct(&q[..y_dim], &q[y_dim..]).unwrap()),
            |q| inv_pat(&model, &q[..y_dim], &q[y_dim..]),
            &yz,
        );
        let mut a = gy.into_inner();
        a.extend(gz.iter());
        tally.add_screened("inn input (inverse)", &a, &num);
    }
    let secs = start.elapsed().as_secs_f64();
    let max = tally.worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let offender = tally
        .worst
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, _)| *n)
        .unwrap_or("-");
    let kink_share = tally.kinks as f64 / tally.compared as f64;
    outcome(
        max < 1e-4 && secs < 60.0 && kink_share < 0.01,
        format!(
            "{draws} draws x {} gradients, {} components ({} on a ReLU kink, skipped), max rel err {max:.2e} ({offender}), {secs:.2} s",
            tally.worst.len(),
            tally.compared,
            tally.kinks
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn logdet_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let mut worst: f64 = 0.0;
    for m in 0..50u64 {
        let width = 4 + (m as usize % 5);
        let model = InnModel::new(IoLayout::raw(width, width, 0, 0), 3, 16, 2, 300 + m).unwrap();
        let x = vec_in(&mut rng, width, 1.0);
        let (_, logdet) = model.forward_padded(&x).unwrap();
        let mut jac = DMatrix::<f64>::zeros(width, width);
        let mut p = x.clone();
        for j in 0..width {
            p[j] = x[j] + EPS;
            let (plus, _) = model.forward_padded(&p).unwrap();
            p[j] = x[j] - EPS;
            let (minus, _) = model.forward_padded(&p).unwrap();
            p[j] = x[j];
            for i in 0..width {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * EPS);
            }
        }
        let oracle = jac.determinant().abs().ln();
        worst = worst.max((oracle - logdet).abs());
    }
    outcome(worst < 1e-4, format!("50 models, widths 4-8, max |logdet - ln|det J_fd|| = {worst:.2e}"))
}

// ---------------------------------------------------------------- criterion 4

fn gumbel_limits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    let draws = 10_000;
    let sharp = LatentSpec::new(1, 3, 0.05).unwrap();
    let peaked = (0..draws)
        .filter(|_| {
            let s = gumbel_softmax_sample(&[10.0, 0.0, 0.0], &sharp, &mut rng).unwrap();
            s.iter().cloned().fold(0.0, f64::max) > 0.99
        })
        .count();
    let frac = peaked as f64 / draws as f64;
    let smooth = LatentSpec::new(1, 3, 100.0).unwrap();
    let mut mean = [0.0; 3];
    for _ in 0..draws {
        let s = gumbel_softmax_sample(&[0.0; 3], &smooth, &mut rng).unwrap();
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v / draws as f64;
        }
    }
    let dev = mean.iter().map(|m| (m - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    outcome(
        frac >= 0.99 && dev < 0.02,
        format!("tau 0.05: {:.2}% peaked; tau 100: max |mean - 1/3| = {dev:.4}", 100.0 * frac),
    )
}

// ---------------------------------------------------------------- criterion 5

fn random_table(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(dim);
    for i in 0..rows {
        let mut v = vec_in(rng, dim, 1.0);
        // a few exact duplicates exercise the tie-breaking
        if i % 97 == 5 {
            v = t.get(&format!("w{}", i - 1)).unwrap().to_vec();
        }
        t.insert(format!("w{i}"), &v).unwrap();
    }
    t
}

fn nearest_neighbor_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5005);
    let mut compared = 0;
    let mut mismatches = 0;
    for rows in [1000, 5000] {
        let table = random_table(&mut rng, rows, 32);
        for q in 0..100 {
            let query = if q % 10 == 0 {
                table.get(&format!("w{}", q * 7)).unwrap().to_vec()
            } else {
                vec_in(&mut rng, 32, 1.0)
            };
            for k in [1, 5, 10, 50] {
                let fast = table.nearest_word(&query, k).unwrap();
                let slow = table.nearest_word_bruteforce(&query, k).unwrap();
                compared += 1;
                if fast != slow {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{compared} top-k comparisons on 1000- and 5000-entry tables, {mismatches} mismatches"),
    )
}

// ---------------------------------------------------------------- toy runs

struct Toy {
    train: Vec<MorphRecord>,
    dev: Vec<MorphRecord>,
    test: Vec<MorphRecord>,
    table: EmbeddingTable,
}

fn toy() -> Toy {
    let (records, table) = generate_toy_language(&ToyLangConfig::default()).unwrap();
    let (train, dev, test) = split_dataset(&records, (0.8, 0.1, 0.1), 1).unwrap();
    Toy { train, dev, test, table }
}

struct Run {
    checkpoint: Checkpoint,
    elapsed: Duration,
}

fn run(toy: &Toy, task: Task, cfg: TrainConfig) -> Run {
    let start = Instant::now();
    let checkpoint = fit(task, Architecture::Inn, &toy.train, &toy.dev, &toy.table, &cfg).unwrap();
    Run {
        checkpoint,
        elapsed: start.elapsed(),
    }
}

fn metric(v: Option<f64>) -> f64 {
    v.expect("metric present")
}

fn toy_inflection(full: &Run, test: &EvalReport) -> Outcome {
    let (s, l, t) = (metric(test.surface_em), metric(test.lemma_em), metric(test.tag_f1));
    let epochs = full.checkpoint.state.epochs_done;
    let secs = full.elapsed.as_secs_f64();
    outcome(
        s >= 85.0 && l >= 85.0 && t >= 85.0 && secs < 600.0 && epochs <= 30,
        format!("surface EM {s:.2}, lemma EM {l:.2}, tag F1 {t:.2} after {epochs} epochs, {secs:.1} s"),
    )
}

fn bidirectional(y_only: &EvalReport, y_x: &EvalReport) -> Outcome {
    let (l0, l1) = (metric(y_only.lemma_em), metric(y_x.lemma_em));
    let drop = metric(y_only.surface_em) - metric(y_x.surface_em);
    outcome(
        l0 < 10.0 && l1 >= 80.0 && drop < 5.0,
        format!("lemma EM L_y {l0:.2} -> L_y+L_x {l1:.2}, surface EM drop {drop:.2}"),
    )
}

fn implicit_tags(y_only: &Run, toy: &Toy, supervised: &EvalReport) -> Outcome {
    let (report, preds) = evaluate_detailed(&y_only.checkpoint, &toy.test, &toy.table, Averaging::Micro).unwrap();
    let tags = preds.tags.unwrap();
    let gold: Vec<TagSet> = toy.test.iter().map(|r| r.tags.clone()).collect();
    let shuffles = 20;
    let chance = (0..shuffles)
        .map(|s| shuffled_tag_f1(&tags, &gold, s).unwrap())
        .sum::<f64>()
        / shuffles as f64;
    let f1 = metric(report.tag_f1);
    let sup = metric(supervised.tag_f1);
    outcome(
        f1 > chance && sup - f1 >= 20.0,
        format!("L_y tag F1 {f1:.2}, shuffled chance {chance:.2}, L_t-supervised {sup:.2}"),
    )
}

fn latent_trend(none: &EvalReport, small: &EvalReport, large: &EvalReport) -> Outcome {
    let (a, b, c) = (metric(none.lemma_em), metric(small.lemma_em), metric(large.lemma_em));
    outcome(
        c >= a - 1.0,
        format!("dev lemma EM: no z {a:.2}, z 2x3 {b:.2}, z 6x4 {c:.2}"),
    )
}

// ---------------------------------------------------------------- criterion 10

fn cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_innmorph"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "innmorph {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn determinism(toy: &Toy) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let d = p("toy");
    cli(&["gen-toy", "--lemmas", "30", "--slots", "2", "--tags-per-slot", "2", "--dim", "16", "--seed", "4", "--out-dir", &d]);
    std::fs::write(p("cfg"), "epochs = 3\nhidden = 16\naccumulation = 8\nseed = 9\n").unwrap();
    let mut same = true;
    let mut checked = Vec::new();
    for (task, arch) in [("inflection", "inn"), ("lemmatization", "inn"), ("inflection", "baseline")] {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let model = p(&format!("{task}-{arch}-{rep}.json"));
            let log = p(&format!("{task}-{arch}-{rep}.log"));
            let train_out = cli(&[
                "train", "--task", task, "--arch", arch, "--data", &format!("{d}/train.tsv"), "--dev",
                &format!("{d}/dev.tsv"), "--embeddings", &format!("{d}/embeddings.txt"), "--config", &p("cfg"),
                "--out", &model, "--log", &log,
            ]);
            let eval = cli(&["eval", "--model", &model, "--data", &format!("{d}/test.tsv"), "--json"]);
            let stdout = String::from_utf8(train_out.stdout).unwrap().replace(&model, "MODEL");
            outputs.push((
                std::fs::read(&model).unwrap(),
                std::fs::read(&log).unwrap(),
                stdout,
                eval.stdout,
            ));
        }
        same &= outputs[0] == outputs[1];
        checked.push(format!("{task}/{arch}"));
    }

    // library path on the full toy corpus, one epoch
    let cfg = TrainConfig {
        epochs: 1,
        ..Default::default()
    };
    let a = fit(Task::Inflection, Architecture::Inn, &toy.train, &toy.dev, &toy.table, &cfg).unwrap();
    let b = fit(Task::Inflection, Architecture::Inn, &toy.train, &toy.dev, &toy.table, &cfg).unwrap();
    same &= a.to_json().unwrap() == b.to_json().unwrap();
    same &= evaluate(&a, &toy.test, &toy.table).unwrap().to_json_line()
        == evaluate(&b, &toy.test, &toy.table).unwrap().to_json_line();
    checked.push("library fit".into());
    outcome(
        same,
        format!("checkpoints, logs and reports byte-identical across reruns ({})", checked.join(", ")),
    )
}

// ---------------------------------------------------------------- criterion 11

fn composite_arithmetic() -> Outcome {
    let w = LossWeights::default();
    let total = composite_inflection_loss(1.0, 1.0, 1.0, 1.0, &w);
    outcome(
        total == 111.0,
        format!("weights ({}, {}, {}, {}) with unit losses give {total}", w.alpha_x, w.alpha_t, w.alpha_y, w.alpha_z),
    )
}

// ---------------------------------------------------------------- driver

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "invertibility", invertibility()));
    results.push((2, "gradient oracle", gradient_oracle()));
    results.push((3, "log-det oracle", logdet_oracle()));
    results.push((4, "Gumbel-Softmax limits", gumbel_limits()));
    results.push((5, "nearest-neighbor oracle", nearest_neighbor_oracle()));
    results.push((11, "composite-loss arithmetic", composite_arithmetic()));

    let toy = toy();
    let infl = |switches: LossSwitches| TrainConfig {
        switches,
        ..Default::default()
    };
    let lem = |latent: Option<LatentSpec>| TrainConfig {
        latent,
        ..Default::default()
    };
    let (full, y_only, y_x, z_none, z_small, z_large) = std::thread::scope(|s| {
        let full = s.spawn(|| run(&toy, Task::Inflection, infl(LossSwitches::default())));
        let y_only = s.spawn(|| run(&toy, Task::Inflection, infl(LossSwitches::Y_ONLY)));
        let y_x = s.spawn(|| run(&toy, Task::Inflection, infl(LossSwitches::Y_X)));
        let z_none = s.spawn(|| run(&toy, Task::Lemmatization, lem(None)));
        let z_small = s.spawn(|| run(&toy, Task::Lemmatization, lem(Some(LatentSpec::new(2, 3, 1.0).unwrap()))));
        let z_large = s.spawn(|| run(&toy, Task::Lemmatization, lem(Some(LatentSpec::new(6, 4, 1.0).unwrap()))));
        (
            full.join().unwrap(),
            y_only.join().unwrap(),
            y_x.join().unwrap(),
            z_none.join().unwrap(),
            z_small.join().unwrap(),
            z_large.join().unwrap(),
        )
    });
    let test_report = |r: &Run| evaluate(&r.checkpoint, &toy.test, &toy.table).unwrap();
    let dev_report = |r: &Run| evaluate(&r.checkpoint, &toy.dev, &toy.table).unwrap();
    let full_test = test_report(&full);
    results.push((6, "toy end-to-end inflection", toy_inflection(&full, &full_test)));
    results.push((7, "bi-directional training", bidirectional(&test_report(&y_only), &test_report(&y_x))));
    results.push((8, "implicit tag learning", implicit_tags(&y_only, &toy, &full_test)));
    results.push((
        9,
        "latent-dimension trend",
        latent_trend(&dev_report(&z_none), &dev_report(&z_small), &dev_report(&z_large)),
    ));
    results.push((10, "determinism", determinism(&toy)));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

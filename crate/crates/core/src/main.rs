use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use innmorph::embedding::{random_distractors, EmbeddingTable};
use innmorph::eval::{
    default_grid, distinct_count, evaluate_detailed, parse_grid, predict_analysis, predict_inflection, predict_lemma,
    render_table, run_ablation, sample_surfaces, Averaging, ZMode,
};
use innmorph::flow::Task;
use innmorph::morphdata::{generate_toy_language, parse_dataset, split_dataset, write_dataset, MorphRecord, ToyLangConfig};
use innmorph::training::{Architecture, Checkpoint, ModelKind, TrainConfig, Trainer};
use innmorph::{Error, Result};

#[derive(Parser)]
#[command(name = "innmorph", version, about = "Invertible networks for inflection, analysis and lemmatization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Inn,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Inflection,
    Lemmatization,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Inflection => Task::Inflection,
            TaskArg::Lemmatization => Task::Lemmatization,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus (train/dev/test/all .tsv) and its embeddings.txt.
    GenToy {
        #[arg(long, default_value_t = 200)]
        lemmas: usize,
        #[arg(long, default_value_t = 3)]
        slots: usize,
        #[arg(long, default_value_t = 2)]
        tags_per_slot: usize,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model and write its checkpoint.
    Train {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Dev split; when absent 10% of --data is held out.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Arch::Inn)]
        arch: Arch,
        /// Continue a checkpoint written by an earlier, interrupted run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Append per-epoch JSON records here instead of printing them.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Random distractor words added to the search vocabulary.
        #[arg(long, default_value_t = 0)]
        distractors: usize,
        #[arg(long, default_value_t = 0)]
        distractor_seed: u64,
        /// Macro-averaged tag F1 instead of micro.
        #[arg(long)]
        macro_f1: bool,
        /// Emit a JSON record instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Generate the surface form of a lemma with a tag set.
    Inflect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        lemma: String,
        /// Semicolon-separated tags.
        #[arg(long, default_value = "")]
        tags: String,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Recover lemma and tags of a surface form.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        surface: String,
        /// Draw z instead of using the hardened most-likely z.
        #[arg(long)]
        sample: bool,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Map a surface form to its lemma.
    Lemmatize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        surface: String,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Generate surface forms of a lemma by sampling z.
    SampleSurfaces {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        lemma: String,
        #[arg(short = 'n', long = "count", default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Train and score a grid of configurations.
    Ablate {
        /// Grid file with `[cell]` sections; the built-in grid when absent.
        #[arg(long)]
        config_grid: Option<PathBuf>,
        /// Training data; split 80/10/10 unless --dev and --test are given.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Base settings shared by every cell.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        split_seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn read_records(path: &Path) -> Result<Vec<MorphRecord>> {
    parse_dataset(BufReader::new(File::open(path)?))
}

fn read_table(path: &Path) -> Result<EmbeddingTable> {
    EmbeddingTable::load(BufReader::new(File::open(path)?))
}

fn read_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::parse(&fs::read_to_string(p)?),
        None => Ok(TrainConfig::default()),
    }
}

fn write_records(path: &Path, records: &[MorphRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(records, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Table for a checkpoint: the explicit path, else the one recorded at training time.
fn table_for(ckpt: &Checkpoint, explicit: Option<&Path>) -> Result<EmbeddingTable> {
    let path = match (explicit, &ckpt.embeddings) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(Error::InvalidInput(
                "checkpoint does not record its embeddings; pass --embeddings".into(),
            ))
        }
    };
    read_table(&path)
}

fn inn_of(ckpt: &Checkpoint) -> Result<&innmorph::flow::InnModel> {
    match ckpt.model() {
        ModelKind::Inn(m) => Ok(m),
        ModelKind::Baseline(_) => Err(Error::InvalidInput(
            "the feedforward baseline has no inverse direction".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::GenToy {
            lemmas,
            slots,
            tags_per_slot,
            dim,
            seed,
            out_dir,
        } => {
            let cfg = ToyLangConfig {
                lemma_count: lemmas,
                suffix_slots: slots,
                tags_per_slot,
                embedding_dim: dim,
                seed,
            };
            let (records, table) = generate_toy_language(&cfg)?;
            let (train, dev, test) = split_dataset(&records, (0.8, 0.1, 0.1), seed)?;
            fs::create_dir_all(&out_dir)?;
            write_records(&out_dir.join("all.tsv"), &records)?;
            write_records(&out_dir.join("train.tsv"), &train)?;
            write_records(&out_dir.join("dev.tsv"), &dev)?;
            write_records(&out_dir.join("test.tsv"), &test)?;
            let mut w = BufWriter::new(File::create(out_dir.join("embeddings.txt"))?);
            table.save(&mut w)?;
            w.flush()?;
            writeln!(
                out,
                "wrote {} records ({} train, {} dev, {} test) and {} vectors to {}",
                records.len(),
                train.len(),
                dev.len(),
                test.len(),
                table.len(),
                out_dir.display()
            )?;
        }
        Command::Train {
            task,
            data,
            embeddings,
            dev,
            config,
            out: out_path,
            arch,
            resume,
            log,
        } => {
            let table = read_table(&embeddings)?;
            let records = read_records(&data)?;
            let arch = match arch {
                Arch::Inn => Architecture::Inn,
                Arch::Baseline => Architecture::Baseline,
            };
            let resumed = resume.as_deref().map(Checkpoint::load).transpose()?;
            let cfg = match (&resumed, config.as_deref()) {
                (Some(ckpt), Some(p)) => {
                    let cfg = read_config(Some(p))?;
                    if cfg != ckpt.config {
                        return Err(Error::InvalidInput(
                            "--config differs from the settings stored in the resumed checkpoint".into(),
                        ));
                    }
                    cfg
                }
                (Some(ckpt), None) => ckpt.config.clone(),
                (None, p) => read_config(p)?,
            };
            if let Some(ckpt) = &resumed {
                if ckpt.task != task.into() || ckpt.model().is_baseline() != (arch == Architecture::Baseline) {
                    return Err(Error::InvalidInput(format!(
                        "checkpoint holds a {} {} model",
                        ckpt.task,
                        ckpt.model().name()
                    )));
                }
            }
            let (train, dev) = match dev {
                Some(p) => (records, read_records(&p)?),
                None => {
                    let (a, b, c) = split_dataset(&records, (0.8, 0.1, 0.1), cfg.seed)?;
                    ([a, c].concat(), b)
                }
            };
            let mut trainer = match resumed {
                Some(ckpt) => Trainer::resume(ckpt, &train, &dev, &table)?,
                None => Trainer::new(task.into(), arch, &train, &dev, &table, &cfg)?,
            };
            let mut log_sink: Box<dyn Write> = match &log {
                Some(p) => Box::new(fs::OpenOptions::new().create(true).append(true).open(p)?),
                None => Box::new(std::io::stdout()),
            };
            while let Some(rec) = trainer.run_epoch()? {
                writeln!(log_sink, "{}", rec.to_json_line())?;
                // Each epoch is checkpointed so an interrupted run can resume.
                trainer.checkpoint().save(&out_path)?;
            }
            let mut done = trainer.finish();
            done.embeddings = Some(absolute(&embeddings).display().to_string());
            done.save(&out_path)?;
            log_sink.flush()?;
            drop(log_sink);
            writeln!(
                out,
                "trained {} {} model for {} epochs (best dev {:.2}); wrote {}",
                done.task,
                done.model().name(),
                done.state.epochs_done,
                done.state.history.best_dev().unwrap_or(f64::NAN),
                out_path.display()
            )?;
        }
        Command::Eval {
            model,
            data,
            embeddings,
            distractors,
            distractor_seed,
            macro_f1,
            json,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let mut table = table_for(&ckpt, embeddings.as_deref())?;
            if distractors > 0 {
                let extra = random_distractors(distractors, table.dim(), distractor_seed);
                table = table.extend_vocabulary(extra)?;
            }
            let records = read_records(&data)?;
            let averaging = if macro_f1 { Averaging::Macro } else { Averaging::Micro };
            let (report, _) = evaluate_detailed(&ckpt, &records, &table, averaging)?;
            if json {
                writeln!(out, "{}", report.to_json_line())?;
            } else {
                write!(out, "{}", report.to_text())?;
            }
        }
        Command::Inflect {
            model,
            lemma,
            tags,
            embeddings,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let table = table_for(&ckpt, embeddings.as_deref())?;
            let tags = tags.split(';').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
            let tags: innmorph::morphdata::TagSet = tags;
            let unknown: Vec<&String> = tags.iter().filter(|t| ckpt.tag_index.index_of(t).is_none()).collect();
            if !unknown.is_empty() {
                log::warn!("ignoring tags unknown to the model: {unknown:?}");
            }
            let surface = match ckpt.model() {
                ModelKind::Inn(m) => predict_inflection(m, &lemma, &tags, &table, &ckpt.tag_index)?,
                ModelKind::Baseline(b) => {
                    let x = innmorph::eval::inflection_input(&lemma, &tags, &table, &ckpt.tag_index)?;
                    table.nearest_word(&b.predict(&x)?, 1)?.swap_remove(0).token
                }
            };
            writeln!(out, "{surface}")?;
        }
        Command::Analyze {
            model,
            surface,
            sample,
            tau,
            seed,
            embeddings,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let table = table_for(&ckpt, embeddings.as_deref())?;
            let mode = if sample { ZMode::Sampled { tau, seed } } else { ZMode::Hardened };
            let a = predict_analysis(inn_of(&ckpt)?, &surface, &table, &ckpt.tag_index, mode)?;
            let tags: Vec<&str> = a.tags.iter().map(String::as_str).collect();
            writeln!(out, "{}\t{}", a.lemma, tags.join(";"))?;
        }
        Command::Lemmatize {
            model,
            surface,
            embeddings,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let table = table_for(&ckpt, embeddings.as_deref())?;
            let lemma = match ckpt.model() {
                ModelKind::Inn(m) => predict_lemma(m, &surface, &table)?,
                ModelKind::Baseline(b) => {
                    let x = table.compose_word_vector(&surface)?;
                    table.nearest_word(&b.predict(&x)?, 1)?.swap_remove(0).token
                }
            };
            writeln!(out, "{lemma}")?;
        }
        Command::SampleSurfaces {
            model,
            lemma,
            n,
            tau,
            seed,
            embeddings,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let table = table_for(&ckpt, embeddings.as_deref())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = sample_surfaces(inn_of(&ckpt)?, &lemma, n, tau, &mut rng, &table)?;
            for s in &samples {
                writeln!(out, "{s}")?;
            }
            writeln!(out, "# distinct surfaces: {} of {}", distinct_count(&samples), samples.len())?;
        }
        Command::Ablate {
            config_grid,
            data,
            embeddings,
            dev,
            test,
            config,
            split_seed,
            json,
        } => {
            let table = read_table(&embeddings)?;
            let base = read_config(config.as_deref())?;
            let cells = match config_grid {
                Some(p) => parse_grid(&fs::read_to_string(p)?, &base)?,
                None => default_grid(&base),
            };
            let records = read_records(&data)?;
            let (train, dev, test) = match (dev, test) {
                (Some(d), Some(t)) => (records, read_records(&d)?, read_records(&t)?),
                (None, None) => split_dataset(&records, (0.8, 0.1, 0.1), split_seed)?,
                _ => return Err(Error::InvalidInput("pass both --dev and --test, or neither".into())),
            };
            let rows = run_ablation(&train, &dev, &test, &table, &cells);
            if json {
                for r in &rows {
                    writeln!(out, "{}", serde_json::to_string(r)?)?;
                }
            } else {
                write!(out, "{}", render_table(&rows))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

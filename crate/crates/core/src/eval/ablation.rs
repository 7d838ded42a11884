use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, fmt_metric, EvalReport};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::flow::Task;
use crate::morphdata::MorphRecord;
use crate::training::{config_split_setting, fit, Architecture, LossSwitches, TrainConfig};

/// One configuration of an ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub name: String,
    pub task: Task,
    pub arch: Architecture,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub task: Task,
    /// The report, or the error that stopped this cell.
    pub report: std::result::Result<EvalReport, String>,
}

/// Loss-term ablations, latent sizes and baselines for both tasks, all
/// sharing `base`.
pub fn default_grid(base: &TrainConfig) -> Vec<AblationCell> {
    let cell = |name: &str, task, arch, config: TrainConfig| AblationCell {
        name: name.to_string(),
        task,
        arch,
        config,
    };
    let with_switches = |s: LossSwitches| TrainConfig {
        switches: s,
        ..base.clone()
    };
    let with_latent = |d: usize, cat: usize| TrainConfig {
        latent: (d > 0).then(|| crate::latent::LatentSpec {
            d,
            cat,
            tau: base.latent.map_or(1.0, |l| l.tau),
        }),
        ..base.clone()
    };
    vec![
        cell("Baseline", Task::Inflection, Architecture::Baseline, base.clone()),
        cell("INN (L_y)", Task::Inflection, Architecture::Inn, with_switches(LossSwitches::Y_ONLY)),
        cell("INN (L_y+L_x)", Task::Inflection, Architecture::Inn, with_switches(LossSwitches::Y_X)),
        cell("INN (L_y+L_x+L_t)", Task::Inflection, Architecture::Inn, with_switches(LossSwitches::Y_X_T)),
        cell("INN (all losses)", Task::Inflection, Architecture::Inn, with_switches(LossSwitches::default())),
        cell("Baseline", Task::Lemmatization, Architecture::Baseline, base.clone()),
        cell("INN (no z)", Task::Lemmatization, Architecture::Inn, with_latent(0, 0)),
        cell("INN (z 2x3)", Task::Lemmatization, Architecture::Inn, with_latent(2, 3)),
        cell("INN (z 6x4)", Task::Lemmatization, Architecture::Inn, with_latent(6, 4)),
    ]
}

/// Parse a grid file: `[cell name]` headers, each followed by `task = ...`,
/// optional `arch = inn|baseline`, and any training settings, applied over
/// `base`.
pub fn parse_grid(text: &str, base: &TrainConfig) -> Result<Vec<AblationCell>> {
    let mut cells: Vec<(AblationCell, Option<usize>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            cells.push((
                AblationCell {
                    name: name.trim().to_string(),
                    task: Task::Inflection,
                    arch: Architecture::Inn,
                    config: base.clone(),
                },
                Some(line),
            ));
            continue;
        }
        let Some((k, v)) = config_split_setting(raw, line)? else {
            continue;
        };
        let (cell, task_line) = cells.last_mut().ok_or_else(|| Error::Parse {
            line,
            message: "setting before the first [cell] header".into(),
        })?;
        match k {
            "task" => {
                cell.task = v.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("unknown task `{v}`"),
                })?;
                *task_line = None;
            }
            "arch" => {
                cell.arch = match v {
                    "inn" => Architecture::Inn,
                    "baseline" => Architecture::Baseline,
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown architecture `{other}`"),
                        })
                    }
                }
            }
            _ => cell.config.set(k, v, line)?,
        }
    }
    if cells.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "grid has no [cell] sections".into(),
        });
    }
    cells
        .into_iter()
        .map(|(cell, missing_task)| {
            if let Some(line) = missing_task {
                return Err(Error::Parse {
                    line,
                    message: format!("cell `{}` does not set `task`", cell.name),
                });
            }
            cell.config.validate()?;
            Ok(cell)
        })
        .collect()
}

/// Train every cell from its own seed on `train`/`dev` and score it on `test`.
/// Cells run in parallel; a failing cell is reported, not fatal.
pub fn run_ablation(
    train: &[MorphRecord],
    dev: &[MorphRecord],
    test: &[MorphRecord],
    table: &EmbeddingTable,
    cells: &[AblationCell],
) -> Vec<AblationRow> {
    cells
        .par_iter()
        .map(|c| {
            let report = fit(c.task, c.arch, train, dev, table, &c.config)
                .and_then(|ckpt| evaluate(&ckpt, test, table))
                .map_err(|e| e.to_string());
            AblationRow {
                name: c.name.clone(),
                task: c.task,
                report,
            }
        })
        .collect()
}

/// Aligned text table with lemma EM, tag F1 and surface EM columns.
pub fn render_table(rows: &[AblationRow]) -> String {
    let header = ["Task", "Model", "L(EM%)", "Tag(F1%)", "S(EM%)"];
    let mut body: Vec<[String; 5]> = Vec::new();
    for r in rows {
        let (l, t, s) = match &r.report {
            Ok(rep) => (fmt_metric(rep.lemma_em), fmt_metric(rep.tag_f1), fmt_metric(rep.surface_em)),
            Err(e) => (format!("error: {e}"), String::new(), String::new()),
        };
        body.push([r.task.to_string(), r.name.clone(), l, t, s]);
    }
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: [&str; 5]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
            if i < 2 {
                s.push_str(&format!("{c:<w$}  "));
            } else {
                s.push_str(&format!("{c:>w$}  "));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&widths.map(|w| "-".repeat(w)).join("  "));
    out.push('\n');
    for row in &body {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4]]));
    }
    out
}

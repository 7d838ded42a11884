//! Metrics, prediction pipelines, evaluation reports and the ablation runner.

mod ablation;
mod metrics;
mod predict;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ablation::{default_grid, parse_grid, render_table, run_ablation, AblationCell, AblationRow};
pub use metrics::{exact_match, shuffled_tag_f1, tag_f1, Averaging};
pub use predict::{
    choose_z, distinct_count, inflection_input, predict_analysis, predict_inflection, predict_lemma, sample_surfaces,
    sample_surfaces_with_logits, Analysis, ZMode,
};

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::flow::Task;
use crate::morphdata::{MorphRecord, TagSet};
use crate::training::{Checkpoint, ModelKind};

/// Scores of one model on one dataset. Metrics that the model cannot
/// produce (e.g. analysis with a feedforward baseline) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub model: String,
    pub lemma_em: Option<f64>,
    pub tag_f1: Option<f64>,
    pub surface_em: Option<f64>,
    pub count: usize,
    /// Gold tags absent from the model's tag index.
    pub unknown_tags: usize,
    pub vocabulary: usize,
    pub config_fingerprint: String,
}

/// Per-instance outputs behind an [`EvalReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Predictions {
    pub surfaces: Option<Vec<String>>,
    pub lemmas: Option<Vec<String>>,
    pub tags: Option<Vec<TagSet>>,
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl EvalReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }

    pub fn to_text(&self) -> String {
        let rows = [
            ("task", self.task.to_string()),
            ("model", self.model.clone()),
            ("instances", self.count.to_string()),
            ("vocabulary", self.vocabulary.to_string()),
            ("unknown tags", self.unknown_tags.to_string()),
            ("lemma EM %", fmt_metric(self.lemma_em)),
            ("tag F1 %", fmt_metric(self.tag_f1)),
            ("surface EM %", fmt_metric(self.surface_em)),
            ("config", self.config_fingerprint.clone()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

/// Run every pipeline the checkpoint's model supports over `records`.
/// Analysis uses the deterministic hardened-`z` path.
pub fn evaluate_detailed(
    checkpoint: &Checkpoint,
    records: &[MorphRecord],
    table: &EmbeddingTable,
    averaging: Averaging,
) -> Result<(EvalReport, Predictions)> {
    if records.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let index = &checkpoint.tag_index;
    let unknown_tags = records
        .iter()
        .flat_map(|r| &r.tags)
        .filter(|t| index.index_of(t).is_none())
        .count();
    let mut preds = Predictions::default();
    let mut report = EvalReport {
        task: checkpoint.task,
        model: checkpoint.model().name().to_string(),
        lemma_em: None,
        tag_f1: None,
        surface_em: None,
        count: records.len(),
        unknown_tags: if checkpoint.task == Task::Inflection { unknown_tags } else { 0 },
        vocabulary: table.len(),
        config_fingerprint: checkpoint.config.fingerprint(),
    };
    let gold_lemmas: Vec<&str> = records.iter().map(|r| r.lemma.as_str()).collect();
    match (checkpoint.task, checkpoint.model()) {
        (Task::Inflection, model) => {
            let surfaces: Vec<String> = records
                .par_iter()
                .map(|r| {
                    let x = inflection_input(&r.lemma, &r.tags, table, index)?;
                    Ok(table.nearest_word(&model.predict_y(&x)?, 1)?.swap_remove(0).token)
                })
                .collect::<Result<_>>()?;
            let gold: Vec<&str> = records.iter().map(|r| r.surface.as_str()).collect();
            report.surface_em = Some(exact_match(&surfaces, &gold)?);
            preds.surfaces = Some(surfaces);
            if let ModelKind::Inn(inn) = model {
                let analyses: Vec<Analysis> = records
                    .par_iter()
                    .map(|r| predict_analysis(inn, &r.surface, table, index, ZMode::Hardened))
                    .collect::<Result<_>>()?;
                let lemmas: Vec<String> = analyses.iter().map(|a| a.lemma.clone()).collect();
                let tags: Vec<TagSet> = analyses.into_iter().map(|a| a.tags).collect();
                let gold_tags: Vec<TagSet> = records.iter().map(|r| r.tags.clone()).collect();
                report.lemma_em = Some(exact_match(&lemmas, &gold_lemmas)?);
                report.tag_f1 = Some(tag_f1(&tags, &gold_tags, averaging)?);
                preds.lemmas = Some(lemmas);
                preds.tags = Some(tags);
            }
        }
        (Task::Lemmatization, model) => {
            let lemmas: Vec<String> = records
                .par_iter()
                .map(|r| {
                    let x = table.compose_word_vector(&r.surface)?;
                    Ok(table.nearest_word(&model.predict_y(&x)?, 1)?.swap_remove(0).token)
                })
                .collect::<Result<_>>()?;
            report.lemma_em = Some(exact_match(&lemmas, &gold_lemmas)?);
            preds.lemmas = Some(lemmas);
        }
    }
    Ok((report, preds))
}

pub fn evaluate(checkpoint: &Checkpoint, records: &[MorphRecord], table: &EmbeddingTable) -> Result<EvalReport> {
    Ok(evaluate_detailed(checkpoint, records, table, Averaging::Micro)?.0)
}

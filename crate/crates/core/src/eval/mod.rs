//! Downstream protocols: cross-modal retrieval with long or short queries,
//! zero-shot scene classification and semantic localization.

pub mod retrieval;
pub mod selo;
pub mod zero_shot;

use std::io::Write;

pub use retrieval::{paired_answers, retrieval_eval, RecallReport};
pub use selo::{
    heatmap_from_similarities, selo_heatmap, selo_metrics, AttentionMap, SeLoReport, SeLoWeights,
    Window, DEFAULT_PEAK_QUANTILE,
};
pub use zero_shot::{fill_template, zero_shot_classify};

use crate::datagen::lexicon::{SCENE_CLASSES, ZERO_SHOT_TEMPLATE};
use crate::datagen::{SceneRecord, Vocabulary};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{encode_images, encode_texts, ModelParams, TokenId};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub template: String,
    pub window: Window,
    /// Records scored for localization (the first ones of the evaluated set).
    pub selo_records: usize,
    pub peak_quantile: f64,
    pub weights: SeLoWeights,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            template: ZERO_SHOT_TEMPLATE.to_string(),
            window: Window::new(3, 3, 1),
            selo_records: 64,
            peak_quantile: DEFAULT_PEAK_QUANTILE,
            weights: SeLoWeights::default(),
        }
    }
}

/// Scores for one model on one record set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSnapshot {
    /// Long-caption retrieval.
    pub ltcr: RecallReport,
    /// Short-caption retrieval.
    pub stcr: RecallReport,
    /// Zero-shot scene-class accuracy, percent.
    pub accuracy: f64,
    pub selo: SeLoReport,
}

impl EvalSnapshot {
    pub const CSV_HEADER: &'static str =
        "ltcr_t2i_r1,ltcr_i2t_r1,ltcr_mr,stcr_t2i_r1,stcr_i2t_r1,stcr_mr,accuracy,r_su,r_as,r_da,r_mi";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            self.ltcr.t2i[0],
            self.ltcr.i2t[0],
            self.ltcr.mr,
            self.stcr.t2i[0],
            self.stcr.i2t[0],
            self.stcr.mr,
            self.accuracy,
            self.selo.csv_row()
        )
    }
}

pub fn evaluate(
    params: &ModelParams,
    vocab: &Vocabulary,
    records: &[SceneRecord],
    opts: &EvalOptions,
) -> Result<EvalSnapshot> {
    if records.is_empty() {
        return Err(Error::Protocol("no records to evaluate".into()));
    }
    let grids: Vec<&Grid> = records.iter().map(|r| &r.scene.grid).collect();
    let longs: Vec<&[TokenId]> = records.iter().map(|r| r.long_tokens.as_slice()).collect();
    let shorts: Vec<&[TokenId]> = records.iter().map(|r| r.short_tokens.as_slice()).collect();
    let images = encode_images(&params.image, &grids)?;
    let gt = paired_answers(records.len());
    let ltcr = retrieval_eval(&images, &encode_texts(&params.text, &longs)?, &gt)?;
    let stcr = retrieval_eval(&images, &encode_texts(&params.text, &shorts)?, &gt)?;

    let classes = zero_shot::class_embeddings(params, vocab, &SCENE_CLASSES, &opts.template)?;
    let correct = records
        .iter()
        .enumerate()
        .filter(|(i, r)| {
            zero_shot::classify_embedding(images.row(*i), &classes) == r.scene.scene_class()
        })
        .count();
    let accuracy = 100.0 * correct as f64 / records.len() as f64;

    let mut reports = Vec::new();
    for r in records.iter().take(opts.selo_records.max(1)) {
        let map = selo_heatmap(params, &r.scene.grid, &r.short_tokens, opts.window)?;
        reports.push(selo_metrics(
            &map,
            &r.gt_region,
            opts.weights,
            opts.peak_quantile,
        )?);
    }
    let selo = SeLoReport::mean(&reports, opts.weights).expect("at least one record");
    Ok(EvalSnapshot {
        ltcr,
        stcr,
        accuracy,
        selo,
    })
}

/// Writes the per-task report tables: retrieval, classification and localization.
pub fn write_report<W: Write>(out: &mut W, s: &EvalSnapshot) -> std::io::Result<()> {
    retrieval::write_recall_csv(out, &[("ltcr", s.ltcr), ("stcr", s.stcr)])?;
    writeln!(out)?;
    writeln!(out, "task,accuracy")?;
    writeln!(out, "zero_shot,{:.4}", s.accuracy)?;
    writeln!(out)?;
    writeln!(out, "task,{}", SeLoReport::CSV_HEADER)?;
    writeln!(out, "selo,{}", s.selo.csv_row())
}

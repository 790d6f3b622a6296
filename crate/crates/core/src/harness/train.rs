use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{read_records, SceneRecord, Split, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, EvalSnapshot};
use crate::model::ModelParams;
use crate::objective::{dual_loss_node, info_nce_node, long_weight, ScheduleConfig};
use crate::tensor::{Graph, NodeId, Tensor};

use super::config::{Granularity, TrainConfig};
use super::sgd::{sgd_step, OptimState};

/// One logged optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub t: usize,
    pub alpha: f64,
    pub loss_long: f64,
    pub loss_short: f64,
    pub loss_total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub steps: Vec<StepLog>,
    /// `(epoch, scores on the evaluation split)` after each epoch.
    pub evals: Vec<(usize, EvalSnapshot)>,
}

impl RunLog {
    pub const STEP_HEADER: &'static str = "t,alpha,loss_long,loss_short,loss_total";

    /// Step rows with round-trip float formatting.
    pub fn write_steps<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::STEP_HEADER)?;
        for s in &self.steps {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.t, s.alpha, s.loss_long, s.loss_short, s.loss_total
            )?;
        }
        Ok(())
    }

    pub fn write_evals<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "epoch,{}", EvalSnapshot::CSV_HEADER)?;
        for (e, s) in &self.evals {
            writeln!(out, "{e},{}", s.csv_row())?;
        }
        Ok(())
    }

    pub fn parse_steps(text: &str) -> Result<Vec<StepLog>> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == Self::STEP_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header {:?}", Self::STEP_HEADER),
                })
            }
        }
        lines
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| {
                let bad = || Error::Parse {
                    line: i + 1,
                    msg: format!("bad step row {l:?}"),
                };
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 5 {
                    return Err(bad());
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
                Ok(StepLog {
                    t: f[0].parse().map_err(|_| bad())?,
                    alpha: num(f[1])?,
                    loss_long: num(f[2])?,
                    loss_short: num(f[3])?,
                    loss_total: num(f[4])?,
                })
            })
            .collect()
    }
}

pub struct TrainOutput {
    pub params: ModelParams,
    pub log: RunLog,
    pub schedule: Option<ScheduleConfig>,
}

/// Batch order for `epoch`: a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_ba7c4);
    rng.set_stream(epoch as u64 + 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Full batches per epoch (a trailing partial batch is dropped).
pub fn steps_per_epoch(n: usize, batch: usize) -> usize {
    if n <= batch {
        1
    } else {
        n / batch
    }
}

fn weight_for(t: usize, cfg: &TrainConfig, sched: Option<&ScheduleConfig>) -> Result<f64> {
    match (cfg.granularity, sched) {
        (Granularity::Short, _) => Ok(0.0),
        (Granularity::Long, _) => Ok(1.0),
        (Granularity::Dual, Some(s)) => long_weight(t, s),
        (Granularity::Dual, None) => {
            Err(Error::Contract("dual training without a schedule".into()))
        }
    }
}

/// Forward and backward for one batch; returns the log row and gradients
/// in checkpoint order.
pub fn train_step(
    params: &ModelParams,
    batch: &[&SceneRecord],
    alpha: f64,
    t: usize,
) -> Result<(StepLog, Vec<Tensor>)> {
    let mut g = Graph::new();
    let nodes = params.register(&mut g, true);
    let mut imgs = Vec::with_capacity(batch.len());
    let mut longs = Vec::with_capacity(batch.len());
    let mut shorts = Vec::with_capacity(batch.len());
    for r in batch {
        imgs.push(params.image.forward(&mut g, &nodes, &r.scene.grid)?);
        longs.push(params.text.forward(&mut g, &nodes, &r.long_tokens)?);
        shorts.push(params.text.forward(&mut g, &nodes, &r.short_tokens)?);
    }
    let cat = |g: &mut Graph, v: &[NodeId]| g.concat_rows(v);
    let imgs = cat(&mut g, &imgs)?;
    let longs = cat(&mut g, &longs)?;
    let shorts = cat(&mut g, &shorts)?;
    let l_long = info_nce_node(&mut g, imgs, longs, nodes.log_tau)?;
    let l_short = info_nce_node(&mut g, imgs, shorts, nodes.log_tau)?;
    let total = dual_loss_node(&mut g, l_long, l_short, alpha)?;
    g.backward(total)?;
    let row = StepLog {
        t,
        alpha,
        loss_long: g.value(l_long).item()?,
        loss_short: g.value(l_short).item()?,
        loss_total: g.value(total).item()?,
    };
    let grads = nodes
        .ordered()
        .into_iter()
        .map(|id| {
            let (r, c) = g.value(id).shape();
            let data = g.take_grad(id).unwrap_or_else(|| vec![0.0; r * c]);
            Tensor::from_vec(r, c, data)
        })
        .collect::<Result<_>>()?;
    Ok((row, grads))
}

fn check_tokens(records: &[SceneRecord], cfg: &TrainConfig) -> Result<()> {
    let v = cfg.model.vocab_size as u32;
    let c = cfg.model.cell_codes as u16;
    for r in records {
        if let Some(t) = r
            .long_tokens
            .iter()
            .chain(&r.short_tokens)
            .find(|&&t| t >= v)
        {
            return Err(Error::Input(format!(
                "record {} has token {t} but the vocabulary has {v} entries",
                r.id
            )));
        }
        if let Some(x) = r.scene.grid.cells().iter().find(|&&x| x >= c) {
            return Err(Error::Input(format!(
                "record {} has cell code {x} but the cell table has {c} entries",
                r.id
            )));
        }
    }
    Ok(())
}

/// Trains on `train_set`; when `eval` is given, scores it after every epoch.
pub fn train(
    cfg: &TrainConfig,
    train_set: &[SceneRecord],
    eval: Option<(&[SceneRecord], &Vocabulary)>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    check_tokens(train_set, cfg)?;
    let batch = cfg.batch_size.min(train_set.len());
    let per_epoch = steps_per_epoch(train_set.len(), batch);
    let total = per_epoch * cfg.epochs;
    let sched = match cfg.granularity {
        Granularity::Dual => Some(cfg.schedule(total)?),
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(&cfg.model, &mut rng)?;
    let mut state = OptimState::zeros_like(&params);
    let mut log = RunLog::default();
    let eval_opts = EvalOptions {
        selo_records: cfg.selo_records,
        ..EvalOptions::default()
    };

    let mut t = 0;
    for epoch in 0..cfg.epochs {
        let order = epoch_order(train_set.len(), cfg.seed, epoch);
        for (b, chunk) in order.chunks(batch).take(per_epoch).enumerate() {
            let recs: Vec<&SceneRecord> = chunk.iter().map(|&i| &train_set[i]).collect();
            let alpha = weight_for(t, cfg, sched.as_ref())?;
            let ctx = |e: Error| match e {
                Error::Divergence { .. } => e,
                other => Error::Step {
                    step: t,
                    batch: b,
                    source: Box::new(other),
                },
            };
            let (row, grads) = train_step(&params, &recs, alpha, t).map_err(ctx)?;
            sgd_step(&mut params, &grads, &mut state, &cfg.sgd, t).map_err(ctx)?;
            log.steps.push(row);
            t += 1;
        }
        if let Some((records, vocab)) = eval {
            log.evals
                .push((epoch, evaluate(&params, vocab, records, &eval_opts)?));
        }
    }
    Ok(TrainOutput {
        params,
        log,
        schedule: sched,
    })
}

pub fn split_records(records: Vec<SceneRecord>) -> (Vec<SceneRecord>, Vec<SceneRecord>) {
    records.into_iter().partition(|r| r.split == Split::Train)
}

/// Reads a dataset file and trains on its train split, evaluating on its test split.
pub fn train_from_path(cfg: &TrainConfig, data: &Path, vocab: &Vocabulary) -> Result<TrainOutput> {
    let (train_set, test_set) = split_records(read_records(data)?);
    let eval = (!test_set.is_empty()).then_some((test_set.as_slice(), vocab));
    train(cfg, &train_set, eval)
}

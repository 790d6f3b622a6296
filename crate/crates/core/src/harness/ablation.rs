use std::fmt::Write as _;

use crate::datagen::{SceneRecord, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::EvalSnapshot;
use crate::objective::LearningOrder;

use super::config::{Granularity, TrainConfig};
use super::train::train;

/// A named change applied on top of the base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub cfg: TrainConfig,
}

impl Variant {
    /// Recognized names: `short`, `long`, `dual`, `long-to-short`, `short-to-long`, `base`.
    pub fn named(name: &str, base: &TrainConfig) -> Result<Self> {
        let mut cfg = base.clone();
        match name {
            "base" => {}
            "short" => {
                cfg.granularity = Granularity::Short;
                cfg.order = LearningOrder::LongToShort;
            }
            "long" => {
                cfg.granularity = Granularity::Long;
                cfg.order = LearningOrder::LongToShort;
            }
            "dual" => cfg.granularity = Granularity::Dual,
            "long-to-short" | "short-to-long" => {
                cfg.granularity = Granularity::Dual;
                cfg.order = name.parse()?;
            }
            other => return Err(Error::Param(format!("unknown variant {other:?}"))),
        }
        Ok(Self {
            name: name.to_string(),
            cfg,
        })
    }
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub name: String,
    /// Final-epoch scores per seed, or the failure message.
    pub per_seed: Vec<(u64, std::result::Result<EvalSnapshot, String>)>,
}

impl VariantResult {
    pub fn successes(&self) -> Vec<(u64, EvalSnapshot)> {
        self.per_seed
            .iter()
            .filter_map(|(s, r)| r.as_ref().ok().map(|e| (*s, *e)))
            .collect()
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub const TABLE_COLUMNS: [&str; 6] = [
    "LT2I R@1",
    "I2LT R@1",
    "ST2I R@1",
    "I2RT R@1",
    "Mean Acc.",
    "R_mi",
];

fn metric(s: &EvalSnapshot, col: usize) -> f64 {
    match col {
        0 => s.ltcr.t2i[0],
        1 => s.ltcr.i2t[0],
        2 => s.stcr.t2i[0],
        3 => s.stcr.i2t[0],
        4 => s.accuracy,
        _ => s.selo.r_mi * 100.0,
    }
}

#[derive(Debug, Clone)]
pub struct AblationTable {
    pub rows: Vec<VariantResult>,
}

impl AblationTable {
    /// Comma-separated table: one row per variant, cells `mean±std`
    /// (`error: ...` when every seed of a variant failed).
    pub fn to_csv(&self) -> String {
        let mut s = format!("variant,{}\n", TABLE_COLUMNS.join(","));
        for row in &self.rows {
            let ok = row.successes();
            s.push_str(&row.name);
            for col in 0..TABLE_COLUMNS.len() {
                if ok.is_empty() {
                    let msg = row
                        .per_seed
                        .iter()
                        .find_map(|(_, r)| r.as_ref().err())
                        .map(|m| m.replace([',', '\n'], ";"))
                        .unwrap_or_default();
                    let _ = write!(s, ",error: {msg}");
                } else {
                    let xs: Vec<f64> = ok.iter().map(|(_, e)| metric(e, col)).collect();
                    let (m, sd) = mean_std(&xs);
                    let _ = write!(s, ",{m:.2}±{sd:.2}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn row(&self, name: &str) -> Option<&VariantResult> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Trains every variant on every seed of `base.seeds` and scores the test records.
pub fn run_ablation(
    base: &TrainConfig,
    variants: &[Variant],
    train_set: &[SceneRecord],
    test_set: &[SceneRecord],
    vocab: &Vocabulary,
) -> Result<AblationTable> {
    if variants.len() < 2 {
        return Err(Error::Param(
            "an ablation needs at least two variants".into(),
        ));
    }
    if test_set.is_empty() {
        return Err(Error::Input("ablation needs a non-empty test split".into()));
    }
    base.validate()?;
    let mut rows = Vec::with_capacity(variants.len());
    for v in variants {
        let mut per_seed = Vec::with_capacity(base.seeds.len());
        for &seed in &base.seeds {
            let cfg = TrainConfig {
                seed,
                ..v.cfg.clone()
            };
            let outcome =
                train(&cfg, train_set, Some((test_set, vocab)))
                    .and_then(|out| {
                        out.log.evals.last().map(|(_, e)| *e).ok_or_else(|| {
                            Error::Contract("training produced no evaluation".into())
                        })
                    })
                    .map_err(|e| format!("{}: {e}", e.kind()));
            per_seed.push((seed, outcome));
        }
        rows.push(VariantResult {
            name: v.name.clone(),
            per_seed,
        });
    }
    Ok(AblationTable { rows })
}

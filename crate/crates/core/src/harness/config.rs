//! Training configuration and its `key = value` file format.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key            | default          | meaning                                   |
//! |----------------|------------------|-------------------------------------------|
//! | `lr`           | `0.0005`         | learning rate                             |
//! | `momentum`     | `0.9`            | SGD momentum                              |
//! | `dampening`    | `0.1`            | SGD dampening                             |
//! | `batch_size`   | `16`             | pairs per step                            |
//! | `epochs`       | `3`              | passes over the training split            |
//! | `granularity`  | `dual`           | `short`, `long` or `dual`                 |
//! | `order`        | `long-to-short`  | curriculum direction (dual only)          |
//! | `alpha_start`  | `1.0`            | warm-up weight                            |
//! | `alpha_min`    | `0.2`            | weight after decay                        |
//! | `delta`        | `0.05`           | refinement perturbation amplitude         |
//! | `t1_frac`      | `0.3`            | end of warm-up, fraction of all steps     |
//! | `t2_frac`      | `0.7`            | end of decay, fraction of all steps       |
//! | `seed`         | `0`              | init, shuffling and schedule noise        |
//! | `seeds`        | `0,1,2,3,4`      | seeds used by ablations                   |
//! | `vocab_size`   | `256`            | token table rows                          |
//! | `cell_codes`   | `128`            | cell table rows                           |
//! | `model_dim`    | `32`             | width of embeddings inside the towers     |
//! | `embed_dim`    | `32`             | shared embedding width                    |
//! | `attention`    | `true`           | self-attention block in the text tower    |
//! | `pool`         | `mean`           | `mean` or `last`                          |
//! | `pe_base_len`  | `77`             | positional table length before stretching |
//! | `kps_theta`    | `20`             | preserved positional prefix               |
//! | `kps_lambda`   | `4`              | stretch factor                            |
//! | `kps_mode`     | `offset`         | `offset` or `literal`                     |
//! | `init_scale`   | `0.03`           | std of embedding tables at init           |
//! | `init_tau`     | `0.07`           | initial temperature                       |
//! | `selo_records` | `64`             | records scored for localization           |

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::objective::{
    LearningOrder, ScheduleConfig, DEFAULT_ALPHA_MIN, DEFAULT_ALPHA_START, DEFAULT_DELTA,
    DEFAULT_T1_FRAC, DEFAULT_T2_FRAC,
};

use super::sgd::SgdConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    Short,
    Long,
    #[default]
    Dual,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Short => "short",
            Granularity::Long => "long",
            Granularity::Dual => "dual",
        })
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(Granularity::Short),
            "long" => Ok(Granularity::Long),
            "dual" => Ok(Granularity::Dual),
            other => Err(Error::Param(format!("unknown granularity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sgd: SgdConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub granularity: Granularity,
    pub order: LearningOrder,
    pub alpha_start: f64,
    pub alpha_min: f64,
    pub delta: f64,
    pub t1_frac: f64,
    pub t2_frac: f64,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub model: ModelConfig,
    pub selo_records: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sgd: SgdConfig::default(),
            batch_size: 16,
            epochs: 3,
            granularity: Granularity::Dual,
            order: LearningOrder::LongToShort,
            alpha_start: DEFAULT_ALPHA_START,
            alpha_min: DEFAULT_ALPHA_MIN,
            delta: DEFAULT_DELTA,
            t1_frac: DEFAULT_T1_FRAC,
            t2_frac: DEFAULT_T2_FRAC,
            seed: 0,
            seeds: (0..5).collect(),
            model: ModelConfig::default(),
            selo_records: 64,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad value {v:?} for {key}"),
    })
}

fn parse_bool(key: &str, v: &str, line: usize) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse {
            line,
            msg: format!("bad boolean {v:?} for {key}"),
        }),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sgd.lr > 0.0) || !self.sgd.lr.is_finite() {
            return Err(Error::Param(format!(
                "lr must be positive, got {}",
                self.sgd.lr
            )));
        }
        if !(0.0..1.0).contains(&self.sgd.momentum) || !(0.0..=1.0).contains(&self.sgd.dampening) {
            return Err(Error::Param(
                "momentum must lie in [0, 1) and dampening in [0, 1]".into(),
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Param(
                "batch_size and epochs must be positive".into(),
            ));
        }
        if !(0.0 <= self.t1_frac && self.t1_frac < self.t2_frac && self.t2_frac < 1.0) {
            return Err(Error::Param(format!(
                "need 0 <= t1_frac < t2_frac < 1, got {} and {}",
                self.t1_frac, self.t2_frac
            )));
        }
        if self.order != LearningOrder::LongToShort && self.granularity != Granularity::Dual {
            return Err(Error::Param(
                "a learning order needs granularity = dual".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Param("seed list is empty".into()));
        }
        Ok(())
    }

    /// Curriculum over `total` steps.
    pub fn schedule(&self, total: usize) -> Result<ScheduleConfig> {
        let s = ScheduleConfig {
            alpha_start: self.alpha_start,
            alpha_min: self.alpha_min,
            t1: (total as f64 * self.t1_frac).floor() as usize,
            t2: (total as f64 * self.t2_frac).floor() as usize,
            total,
            delta: self.delta,
            order: self.order,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn set(&mut self, key: &str, v: &str, line: usize) -> Result<()> {
        let m = &mut self.model;
        match key {
            "lr" => self.sgd.lr = parse(key, v, line)?,
            "momentum" => self.sgd.momentum = parse(key, v, line)?,
            "dampening" => self.sgd.dampening = parse(key, v, line)?,
            "batch_size" => self.batch_size = parse(key, v, line)?,
            "epochs" => self.epochs = parse(key, v, line)?,
            "granularity" => self.granularity = v.parse()?,
            "order" => self.order = v.parse()?,
            "alpha_start" => self.alpha_start = parse(key, v, line)?,
            "alpha_min" => self.alpha_min = parse(key, v, line)?,
            "delta" => self.delta = parse(key, v, line)?,
            "t1_frac" => self.t1_frac = parse(key, v, line)?,
            "t2_frac" => self.t2_frac = parse(key, v, line)?,
            "seed" => self.seed = parse(key, v, line)?,
            "seeds" => {
                self.seeds = v
                    .split(',')
                    .map(|s| parse(key, s.trim(), line))
                    .collect::<Result<_>>()?
            }
            "vocab_size" => m.vocab_size = parse(key, v, line)?,
            "cell_codes" => m.cell_codes = parse(key, v, line)?,
            "model_dim" => m.model_dim = parse(key, v, line)?,
            "embed_dim" => m.embed_dim = parse(key, v, line)?,
            "attention" => m.attention = parse_bool(key, v, line)?,
            "pool" => m.pool = v.parse()?,
            "pe_base_len" => m.pe_base_len = parse(key, v, line)?,
            "kps_theta" => m.kps_theta = parse(key, v, line)?,
            "kps_lambda" => m.kps_lambda = parse(key, v, line)?,
            "kps_mode" => m.kps_mode = v.parse()?,
            "init_scale" => m.init_scale = parse(key, v, line)?,
            "init_tau" => m.init_tau = parse(key, v, line)?,
            "selo_records" => self.selo_records = parse(key, v, line)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            cfg.set(k.trim(), v.trim(), i + 1)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let pairs: [(&str, String); 27] = [
            ("lr", self.sgd.lr.to_string()),
            ("momentum", self.sgd.momentum.to_string()),
            ("dampening", self.sgd.dampening.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("granularity", self.granularity.to_string()),
            ("order", self.order.to_string()),
            ("alpha_start", self.alpha_start.to_string()),
            ("alpha_min", self.alpha_min.to_string()),
            ("delta", self.delta.to_string()),
            ("t1_frac", self.t1_frac.to_string()),
            ("t2_frac", self.t2_frac.to_string()),
            ("seed", self.seed.to_string()),
            ("seeds", seeds.join(",")),
            ("vocab_size", m.vocab_size.to_string()),
            ("cell_codes", m.cell_codes.to_string()),
            ("model_dim", m.model_dim.to_string()),
            ("embed_dim", m.embed_dim.to_string()),
            ("attention", m.attention.to_string()),
            ("pool", m.pool.to_string()),
            ("pe_base_len", m.pe_base_len.to_string()),
            ("kps_theta", m.kps_theta.to_string()),
            ("kps_lambda", m.kps_lambda.to_string()),
            ("kps_mode", m.kps_mode.to_string()),
            ("init_scale", m.init_scale.to_string()),
            ("init_tau", m.init_tau.to_string()),
            ("selo_records", self.selo_records.to_string()),
        ];
        for (k, v) in &pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

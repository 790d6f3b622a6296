//! Browser bindings for three interactive views: the stretched positional
//! table, the loss-weight schedule, and a localization heatmap from a model
//! trained in the page.
//!
//! The plain functions return [`dualgrain::Result`] so they can be tested on
//! the host; the `#[wasm_bindgen]` wrappers convert errors to JS exceptions.

use wasm_bindgen::prelude::*;

use dualgrain::datagen::{generate_corpus, GenConfig, SceneRecord, Split, Vocabulary};
use dualgrain::eval::{selo_heatmap, selo_metrics, SeLoWeights, Window};
use dualgrain::harness::{train, TrainConfig};
use dualgrain::model::{
    kps_stretch, source_index, stretched_len, ModelParams, PETable, StretchMode,
};
use dualgrain::objective::{long_weight, LearningOrder, ScheduleConfig};
use dualgrain::tensor::Tensor;
use dualgrain::{Error, Result};

fn js(e: Error) -> JsError {
    JsError::new(&format!("{}: {e}", e.kind()))
}

/// Sinusoidal table with `len` rows and `dim` columns.
fn sinusoid(len: usize, dim: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(len * dim);
    for p in 0..len {
        for i in 0..dim {
            let freq = 1.0 / 10_000f64.powf((i / 2 * 2) as f64 / dim as f64);
            let a = p as f64 * freq;
            data.push(if i % 2 == 0 { a.sin() } else { a.cos() });
        }
    }
    Tensor::from_vec(len, dim, data)
}

/// Source position of every stretched index, followed by column `dim_index`
/// of the stretched sinusoidal table. Both halves have `theta + lambda * (len - theta)` entries.
pub fn stretch_curves(
    len: usize,
    theta: usize,
    lambda: usize,
    mode: &str,
    dim_index: usize,
) -> Result<Vec<f64>> {
    let mode: StretchMode = mode.parse()?;
    const DIM: usize = 16;
    if dim_index >= DIM {
        return Err(Error::Param(format!("column {dim_index} outside 0..{DIM}")));
    }
    let table = PETable::new(sinusoid(len, DIM)?, 0)?;
    let stretched = kps_stretch(&table, theta, lambda, mode)?;
    let n = stretched_len(len, theta, lambda);
    let mut out = Vec::with_capacity(2 * n);
    out.extend((0..n).map(|p| {
        if p <= theta {
            p as f64
        } else {
            source_index(p, len, theta, lambda, mode).mapped
        }
    }));
    out.extend((0..n).map(|p| stretched.entry(p)[dim_index]));
    Ok(out)
}

/// Long-caption weight for each step `0..=total`.
#[allow(clippy::too_many_arguments)]
pub fn schedule_trace(
    total: usize,
    t1_frac: f64,
    t2_frac: f64,
    alpha_start: f64,
    alpha_min: f64,
    delta: f64,
    order: &str,
    seed: u64,
) -> Result<Vec<f64>> {
    let cfg = ScheduleConfig {
        alpha_start,
        alpha_min,
        delta,
        order: order.parse::<LearningOrder>()?,
        ..ScheduleConfig::with_fractions(total, t1_frac, t2_frac, seed)?
    };
    (0..=total).map(|t| long_weight(t, &cfg)).collect()
}

/// A small corpus and a model trained on it inside the page.
pub struct Lab {
    params: ModelParams,
    vocab: Vocabulary,
    test: Vec<SceneRecord>,
    window: Window,
}

impl Lab {
    /// Trains on `count` generated scenes; attention is off to keep this under a few seconds.
    pub fn build(seed: u64, count: usize, epochs: usize, granularity: &str) -> Result<Self> {
        let vocab = Vocabulary::standard();
        let records = generate_corpus(seed, count, &GenConfig::default(), &vocab)?;
        let (train_set, test): (Vec<_>, Vec<_>) =
            records.into_iter().partition(|r| r.split == Split::Train);
        if test.is_empty() {
            return Err(Error::Param(format!("{count} scenes leave no test split")));
        }
        let mut cfg = TrainConfig {
            epochs,
            seed,
            granularity: granularity.parse()?,
            ..TrainConfig::default()
        };
        cfg.model.attention = false;
        let out = train(&cfg, &train_set, None)?;
        Ok(Self {
            params: out.params,
            vocab,
            test,
            window: Window::new(3, 3, 1),
        })
    }

    pub fn scene_count(&self) -> usize {
        self.test.len()
    }

    fn record(&self, i: usize) -> Result<&SceneRecord> {
        self.test
            .get(i)
            .ok_or_else(|| Error::Param(format!("scene {i} outside 0..{}", self.test.len())))
    }

    /// Row-major cell codes followed by `[height, width]`.
    pub fn grid(&self, i: usize) -> Result<Vec<u32>> {
        let g = &self.record(i)?.scene.grid;
        let mut v: Vec<u32> = g.cells().iter().map(|&c| c as u32).collect();
        v.extend([g.height() as u32, g.width() as u32]);
        Ok(v)
    }

    /// `[r0, c0, r1, c1]` of the ground-truth region (end-exclusive).
    pub fn region(&self, i: usize) -> Result<Vec<u32>> {
        let b = self.record(i)?.gt_region;
        Ok(vec![b.r0 as u32, b.c0 as u32, b.r1 as u32, b.c1 as u32])
    }

    pub fn short_caption(&self, i: usize) -> Result<String> {
        self.vocab.decode(&self.record(i)?.short_tokens)
    }

    /// Heatmap values followed by the four localization scores `[su, as, da, mi]`.
    pub fn heatmap(&self, i: usize, query: &str) -> Result<Vec<f64>> {
        let r = self.record(i)?;
        let text = query.to_lowercase();
        let tokens = self.vocab.encode(&text)?;
        if tokens.is_empty() {
            return Err(Error::Input("empty query".into()));
        }
        let map = selo_heatmap(&self.params, &r.scene.grid, &tokens, self.window)?;
        let rep = selo_metrics(
            &map,
            &r.gt_region,
            SeLoWeights::default(),
            dualgrain::eval::selo::DEFAULT_PEAK_QUANTILE,
        )?;
        let mut v = map.values;
        v.extend([rep.r_su, rep.r_as, rep.r_da, rep.r_mi]);
        Ok(v)
    }
}

#[wasm_bindgen(js_name = stretchCurves)]
pub fn stretch_curves_js(
    len: usize,
    theta: usize,
    lambda: usize,
    mode: &str,
    dim_index: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    stretch_curves(len, theta, lambda, mode, dim_index).map_err(js)
}

#[wasm_bindgen(js_name = scheduleTrace)]
#[allow(clippy::too_many_arguments)]
pub fn schedule_trace_js(
    total: usize,
    t1_frac: f64,
    t2_frac: f64,
    alpha_start: f64,
    alpha_min: f64,
    delta: f64,
    order: &str,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    schedule_trace(
        total,
        t1_frac,
        t2_frac,
        alpha_start,
        alpha_min,
        delta,
        order,
        seed as u64,
    )
    .map_err(js)
}

#[wasm_bindgen(js_name = Lab)]
pub struct LabJs(Lab);

#[wasm_bindgen(js_class = Lab)]
impl LabJs {
    #[wasm_bindgen(constructor)]
    pub fn new(
        seed: u32,
        count: usize,
        epochs: usize,
        granularity: &str,
    ) -> std::result::Result<LabJs, JsError> {
        Lab::build(seed as u64, count, epochs, granularity)
            .map(LabJs)
            .map_err(js)
    }

    #[wasm_bindgen(js_name = sceneCount)]
    pub fn scene_count(&self) -> usize {
        self.0.scene_count()
    }

    pub fn grid(&self, i: usize) -> std::result::Result<Vec<u32>, JsError> {
        self.0.grid(i).map_err(js)
    }

    pub fn region(&self, i: usize) -> std::result::Result<Vec<u32>, JsError> {
        self.0.region(i).map_err(js)
    }

    #[wasm_bindgen(js_name = shortCaption)]
    pub fn short_caption(&self, i: usize) -> std::result::Result<String, JsError> {
        self.0.short_caption(i).map_err(js)
    }

    pub fn heatmap(&self, i: usize, query: &str) -> std::result::Result<Vec<f64>, JsError> {
        self.0.heatmap(i, query).map_err(js)
    }
}

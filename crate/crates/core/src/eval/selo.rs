//! Semantic localization: sliding-window similarity heatmaps and their scores.
//!
//! The three component scores are defined here as follows (all in [0, 1]):
//!
//! - `r_su`: mean attention inside the box over (inside mean + outside mean);
//!   the outside mean is 0 when the box covers the whole map.
//! - `r_as`: Euclidean distance from the box center to the nearest peak cell
//!   (cell squares are closed unit squares), over the map diagonal; 1 without peaks.
//! - `r_da`: `1 - (k - 1) / (n - 1)` for `k` 4-connected peak regions among `n` cells.
//!
//! Peak cells hold a value at or above the chosen quantile of the map
//! (nearest-rank) and strictly above zero.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{BBox, Grid};
use crate::model::{encode_image, encode_text, ModelParams, TokenId};
use crate::tensor::Tensor;

pub const DEFAULT_PEAK_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub h: usize,
    pub w: usize,
    pub stride: usize,
}

impl Window {
    pub fn new(h: usize, w: usize, stride: usize) -> Self {
        Self { h, w, stride }
    }

    /// Top-left corners of every placement, row-major.
    pub fn positions(&self, grid_h: usize, grid_w: usize) -> Result<Vec<(usize, usize)>> {
        if self.h == 0 || self.w == 0 || self.stride == 0 {
            return Err(Error::Param(
                "window sides and stride must be positive".into(),
            ));
        }
        if self.h > grid_h || self.w > grid_w {
            return Err(Error::Param(format!(
                "window {}x{} larger than grid {grid_h}x{grid_w}",
                self.h, self.w
            )));
        }
        let mut out = Vec::new();
        for r in (0..=grid_h - self.h).step_by(self.stride) {
            for c in (0..=grid_w - self.w).step_by(self.stride) {
                out.push((r, c));
            }
        }
        Ok(out)
    }
}

/// Non-negative map over grid cells summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
    pub window: Window,
    pub query: String,
}

impl AttentionMap {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.w + c]
    }

    /// Builds a map from raw values, normalizing to unit mass.
    pub fn from_values(h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != h * w || values.is_empty() {
            return Err(Error::Param(format!(
                "{} values for a {h}x{w} map",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Param(
                "attention values must be finite and non-negative".into(),
            ));
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::Param("attention map has no mass".into()));
        }
        Ok(Self {
            h,
            w,
            values: values.into_iter().map(|v| v / total).collect(),
            window: Window::new(h, w, 1),
            query: String::new(),
        })
    }

    /// One line per row, space-separated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in 0..self.h {
            let row: Vec<String> = (0..self.w)
                .map(|c| format!("{:.6e}", self.get(r, c)))
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }
}

/// Shift, accumulate over covering windows, average by coverage, normalize.
/// `sims[i]` belongs to `window.positions(h, w)[i]`. Uncovered cells get 0.
pub fn heatmap_from_similarities(
    h: usize,
    w: usize,
    window: Window,
    sims: &[f64],
) -> Result<AttentionMap> {
    let pos = window.positions(h, w)?;
    if sims.len() != pos.len() {
        return Err(Error::Param(format!(
            "{} similarities for {} window positions",
            sims.len(),
            pos.len()
        )));
    }
    if sims.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("window similarities"));
    }
    let min = sims.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sum = vec![0.0; h * w];
    let mut cover = vec![0usize; h * w];
    for (&(r0, c0), s) in pos.iter().zip(sims) {
        for r in r0..r0 + window.h {
            for c in c0..c0 + window.w {
                sum[r * w + c] += s - min;
                cover[r * w + c] += 1;
            }
        }
    }
    let mut values: Vec<f64> = sum
        .iter()
        .zip(&cover)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    } else {
        let covered = cover.iter().filter(|&&n| n > 0).count() as f64;
        for (v, &n) in values.iter_mut().zip(&cover) {
            *v = if n > 0 { 1.0 / covered } else { 0.0 };
        }
    }
    Ok(AttentionMap {
        h,
        w,
        values,
        window,
        query: String::new(),
    })
}

/// Window-by-query cosine similarities, in window position order.
pub fn window_similarities(
    params: &ModelParams,
    grid: &Grid,
    query: &Tensor,
    window: Window,
) -> Result<Vec<f64>> {
    let pos = window.positions(grid.height(), grid.width())?;
    pos.iter()
        .map(|&(r, c)| {
            let sub = grid.crop(r, c, window.h, window.w)?;
            let e = encode_image(&params.image, &sub)?;
            Ok(e.data().iter().zip(query.data()).map(|(a, b)| a * b).sum())
        })
        .collect()
}

pub fn selo_heatmap(
    params: &ModelParams,
    grid: &Grid,
    query_tokens: &[TokenId],
    window: Window,
) -> Result<AttentionMap> {
    let q = encode_text(&params.text, query_tokens)?;
    let sims = window_similarities(params, grid, &q, window)?;
    let mut map = heatmap_from_similarities(grid.height(), grid.width(), window, &sims)?;
    map.query = query_tokens
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeLoWeights {
    pub su: f64,
    pub r#as: f64,
    pub da: f64,
}

impl Default for SeLoWeights {
    fn default() -> Self {
        Self {
            su: 0.4,
            r#as: 0.35,
            da: 0.25,
        }
    }
}

impl SeLoWeights {
    pub fn compose(&self, r_su: f64, r_as: f64, r_da: f64) -> f64 {
        self.su * r_su + self.r#as * (1.0 - r_as) + self.da * r_da
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeLoReport {
    pub r_su: f64,
    pub r_as: f64,
    pub r_da: f64,
    pub r_mi: f64,
    pub weights: SeLoWeights,
}

impl SeLoReport {
    pub fn new(r_su: f64, r_as: f64, r_da: f64, weights: SeLoWeights) -> Self {
        Self {
            r_su,
            r_as,
            r_da,
            r_mi: weights.compose(r_su, r_as, r_da),
            weights,
        }
    }

    /// Component-wise mean of several reports sharing `weights`.
    pub fn mean(reports: &[SeLoReport], weights: SeLoWeights) -> Option<SeLoReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&SeLoReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(SeLoReport::new(
            avg(|r| r.r_su),
            avg(|r| r.r_as),
            avg(|r| r.r_da),
            weights,
        ))
    }

    pub const CSV_HEADER: &'static str = "r_su,r_as,r_da,r_mi";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6}",
            self.r_su, self.r_as, self.r_da, self.r_mi
        )
    }
}

/// Nearest-rank `q`-quantile of `values`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn point_to_cell(y: f64, x: f64, r: usize, c: usize) -> f64 {
    let dy = (r as f64 - y).max(y - (r + 1) as f64).max(0.0);
    let dx = (c as f64 - x).max(x - (c + 1) as f64).max(0.0);
    dy.hypot(dx)
}

fn components(h: usize, w: usize, mask: &[bool]) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut n = 0;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        n += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            let mut nb = Vec::with_capacity(4);
            if r > 0 {
                nb.push(i - w);
            }
            if r + 1 < h {
                nb.push(i + w);
            }
            if c > 0 {
                nb.push(i - 1);
            }
            if c + 1 < w {
                nb.push(i + 1);
            }
            for j in nb {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    n
}

pub fn selo_metrics(
    map: &AttentionMap,
    gt: &BBox,
    weights: SeLoWeights,
    peak_quantile: f64,
) -> Result<SeLoReport> {
    if gt.area() == 0 {
        return Err(Error::Param("ground-truth box has zero area".into()));
    }
    if !gt.fits(map.h, map.w) {
        return Err(Error::Param(format!(
            "ground-truth box {gt:?} outside {}x{} map",
            map.h, map.w
        )));
    }
    if !(0.0..=1.0).contains(&peak_quantile) {
        return Err(Error::Param(format!(
            "peak quantile {peak_quantile} outside [0, 1]"
        )));
    }
    let (h, w) = (map.h, map.w);
    let (mut sum_in, mut sum_out) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if gt.contains_cell(r, c) {
                sum_in += map.get(r, c);
            } else {
                sum_out += map.get(r, c);
            }
        }
    }
    let n_in = gt.area();
    let n_out = h * w - n_in;
    let mean_in = sum_in / n_in as f64;
    let mean_out = if n_out == 0 {
        0.0
    } else {
        sum_out / n_out as f64
    };
    let r_su = if mean_in + mean_out > 0.0 {
        mean_in / (mean_in + mean_out)
    } else {
        0.0
    };

    let thr = quantile(&map.values, peak_quantile);
    let peaks: Vec<bool> = map.values.iter().map(|&v| v >= thr && v > 0.0).collect();
    let (cy, cx) = gt.center();
    let diag = ((h * h + w * w) as f64).sqrt();
    let nearest = peaks
        .iter()
        .enumerate()
        .filter(|(_, &p)| p)
        .map(|(i, _)| point_to_cell(cy, cx, i / w, i % w))
        .fold(f64::INFINITY, f64::min);
    let r_as = if nearest.is_finite() {
        (nearest / diag).min(1.0)
    } else {
        1.0
    };

    let k = components(h, w, &peaks).max(1);
    let cells = h * w;
    let r_da = if cells <= 1 {
        1.0
    } else {
        1.0 - (k - 1) as f64 / (cells - 1) as f64
    };
    Ok(SeLoReport::new(r_su, r_as, r_da, weights))
}

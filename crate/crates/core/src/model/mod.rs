//! Two-tower encoder: a text tower (token + stretched positional embeddings,
//! one optional self-attention block, pooling, projection) and an image tower
//! (cell-code embeddings, mean pooling, projection). Both towers emit
//! unit-norm vectors in a shared embedding space.

mod checkpoint;
mod pe;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use pe::{
    kps_stretch, source_index, stretched_len, PETable, SourceIndex, StretchMode, DEFAULT_LAMBDA,
    DEFAULT_THETA,
};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::{Graph, NodeId, Tensor};

pub type TokenId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pool {
    #[default]
    Mean,
    LastToken,
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pool::Mean => "mean",
            Pool::LastToken => "last",
        })
    }
}

impl FromStr for Pool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pool::Mean),
            "last" | "last-token" => Ok(Pool::LastToken),
            other => Err(Error::Param(format!("unknown pooling {other:?}"))),
        }
    }
}

/// Architecture and initialization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub cell_codes: usize,
    pub model_dim: usize,
    pub embed_dim: usize,
    pub attention: bool,
    pub pool: Pool,
    /// Positional table length before stretching.
    pub pe_base_len: usize,
    pub kps_theta: usize,
    pub kps_lambda: usize,
    pub kps_mode: StretchMode,
    /// Standard deviation of token, cell and positional embeddings at init.
    pub init_scale: f64,
    pub init_tau: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 256,
            cell_codes: 128,
            model_dim: 32,
            embed_dim: 32,
            attention: true,
            pool: Pool::Mean,
            pe_base_len: 77,
            kps_theta: DEFAULT_THETA,
            kps_lambda: DEFAULT_LAMBDA,
            kps_mode: StretchMode::OffsetMapped,
            init_scale: 0.03,
            init_tau: 0.07,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoderParams {
    pub token_table: Tensor,
    pub pe: PETable,
    pub attn: Option<Attention>,
    pub proj: Tensor,
    pub pool: Pool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoderParams {
    pub cell_table: Tensor,
    pub proj: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub text: TextEncoderParams,
    pub image: ImageEncoderParams,
    /// Natural log of the softmax temperature.
    pub log_tau: Tensor,
}

/// Graph handles for every parameter of a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamNodes {
    pub token_table: NodeId,
    pub pe: NodeId,
    pub attn: Option<[NodeId; 3]>,
    pub text_proj: NodeId,
    pub cell_table: NodeId,
    pub image_proj: NodeId,
    pub log_tau: NodeId,
}

impl ParamNodes {
    /// Node ids in checkpoint declaration order.
    pub fn ordered(&self) -> Vec<NodeId> {
        let mut v = vec![self.token_table, self.pe];
        if let Some(a) = self.attn {
            v.extend(a);
        }
        v.extend([
            self.text_proj,
            self.cell_table,
            self.image_proj,
            self.log_tau,
        ]);
        v
    }
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Tensor {
    let normal = Normal::new(0.0, std).expect("finite std");
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Tensor::from_vec(rows, cols, data).expect("shape")
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.model_dim == 0 || cfg.embed_dim == 0 || cfg.vocab_size == 0 || cfg.cell_codes == 0 {
            return Err(Error::Param("model dimensions must be positive".into()));
        }
        if !(cfg.init_tau > 0.0) {
            return Err(Error::Param("initial temperature must be positive".into()));
        }
        let d = cfg.model_dim;
        let e = cfg.embed_dim;
        let w_std = 1.0 / (d as f64).sqrt();

        let token_table = gaussian(rng, cfg.vocab_size, d, cfg.init_scale);
        let base = PETable::new(
            gaussian(rng, cfg.pe_base_len, d, cfg.init_scale),
            cfg.kps_theta,
        )?;
        let pe = kps_stretch(&base, cfg.kps_theta, cfg.kps_lambda, cfg.kps_mode)?;
        let attn = cfg.attention.then(|| Attention {
            wq: gaussian(rng, d, d, w_std),
            wk: gaussian(rng, d, d, w_std),
            wv: gaussian(rng, d, d, w_std),
        });
        let text_proj = gaussian(rng, d, e, w_std);
        let cell_table = gaussian(rng, cfg.cell_codes, d, cfg.init_scale);
        let image_proj = gaussian(rng, d, e, w_std);

        Ok(Self {
            text: TextEncoderParams {
                token_table,
                pe,
                attn,
                proj: text_proj,
                pool: cfg.pool,
            },
            image: ImageEncoderParams {
                cell_table,
                proj: image_proj,
            },
            log_tau: Tensor::scalar(cfg.init_tau.ln()),
        })
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.data()[0].exp()
    }

    /// `(name, tensor)` pairs in checkpoint declaration order.
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![
            ("token_table", &self.text.token_table),
            ("pe", self.text.pe.entries()),
        ];
        if let Some(a) = &self.text.attn {
            v.extend([("wq", &a.wq), ("wk", &a.wk), ("wv", &a.wv)]);
        }
        v.extend([
            ("text_proj", &self.text.proj),
            ("cell_table", &self.image.cell_table),
            ("image_proj", &self.image.proj),
            ("log_tau", &self.log_tau),
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.text.token_table, self.text.pe.entries_mut()];
        if let Some(a) = &mut self.text.attn {
            v.extend([&mut a.wq, &mut a.wk, &mut a.wv]);
        }
        v.extend([
            &mut self.text.proj,
            &mut self.image.cell_table,
            &mut self.image.proj,
            &mut self.log_tau,
        ]);
        v
    }

    pub fn register(&self, g: &mut Graph, trainable: bool) -> ParamNodes {
        let mut add = |t: &Tensor| {
            if trainable {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        ParamNodes {
            token_table: add(&self.text.token_table),
            pe: add(self.text.pe.entries()),
            attn: self
                .text
                .attn
                .as_ref()
                .map(|a| [add(&a.wq), add(&a.wk), add(&a.wv)]),
            text_proj: add(&self.text.proj),
            cell_table: add(&self.image.cell_table),
            image_proj: add(&self.image.proj),
            log_tau: add(&self.log_tau),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            tensors: self
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        }
    }

    /// Rebuilds parameters from a checkpoint; `cfg` supplies what the
    /// checkpoint does not store (pooling, preserved-prefix threshold).
    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: &ModelConfig) -> Result<Self> {
        let take = |name: &str| -> Result<Tensor> {
            ckpt.get(name)
                .cloned()
                .ok_or_else(|| Error::Input(format!("checkpoint lacks tensor {name:?}")))
        };
        let pe_entries = take("pe")?;
        let theta = cfg.kps_theta.min(pe_entries.rows().saturating_sub(1));
        let mut pe = PETable::new(pe_entries, theta)?;
        pe.set_lambda(cfg.kps_lambda);
        let attn = match (ckpt.get("wq"), ckpt.get("wk"), ckpt.get("wv")) {
            (Some(q), Some(k), Some(v)) => Some(Attention {
                wq: q.clone(),
                wk: k.clone(),
                wv: v.clone(),
            }),
            (None, None, None) => None,
            _ => {
                return Err(Error::Input(
                    "checkpoint has partial attention weights".into(),
                ))
            }
        };
        let params = Self {
            text: TextEncoderParams {
                token_table: take("token_table")?,
                pe,
                attn,
                proj: take("text_proj")?,
                pool: cfg.pool,
            },
            image: ImageEncoderParams {
                cell_table: take("cell_table")?,
                proj: take("image_proj")?,
            },
            log_tau: take("log_tau")?,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        let d = self.text.token_table.cols();
        let e = self.text.proj.cols();
        let mut checks = vec![
            ("pe", self.text.pe.dim(), d),
            ("text_proj rows", self.text.proj.rows(), d),
            ("cell_table", self.image.cell_table.cols(), d),
            ("image_proj rows", self.image.proj.rows(), d),
            ("image_proj cols", self.image.proj.cols(), e),
        ];
        if let Some(a) = &self.text.attn {
            for (n, w) in [("wq", &a.wq), ("wk", &a.wk), ("wv", &a.wv)] {
                checks.push((n, w.rows(), d));
                checks.push((n, w.cols(), d));
            }
        }
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::Input(format!(
                    "inconsistent parameter shapes: {name} has {got}, expected {want}"
                )));
            }
        }
        if self.log_tau.shape() != (1, 1) {
            return Err(Error::Input("log_tau must be 1x1".into()));
        }
        Ok(())
    }
}

impl TextEncoderParams {
    pub fn max_len(&self) -> usize {
        self.pe.len()
    }

    fn check_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::Input("empty token sequence".into()));
        }
        if tokens.len() > self.pe.len() {
            return Err(Error::LengthExceeded {
                len: tokens.len(),
                max: self.pe.len(),
            });
        }
        let v = self.token_table.rows();
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= v) {
            return Err(Error::Input(format!(
                "token id {bad} outside vocabulary of {v}"
            )));
        }
        Ok(())
    }

    /// Text tower on the tape; returns a `1 x e` unit-norm node.
    pub fn forward(&self, g: &mut Graph, nodes: &ParamNodes, tokens: &[TokenId]) -> Result<NodeId> {
        self.check_tokens(tokens)?;
        let ids: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
        let positions: Vec<usize> = (0..tokens.len()).collect();
        let tok = g.gather_rows(nodes.token_table, &ids)?;
        let pos = g.gather_rows(nodes.pe, &positions)?;
        let mut x = g.add(tok, pos)?;
        if let Some([wq, wk, wv]) = nodes.attn {
            let q = g.matmul(x, wq)?;
            let k = g.matmul(x, wk)?;
            let v = g.matmul(x, wv)?;
            let kt = g.transpose(k);
            let scores = g.matmul(q, kt)?;
            let d = g.value(wq).cols() as f64;
            let scores = g.scale(scores, 1.0 / d.sqrt())?;
            let weights = g.row_softmax(scores)?;
            let ctx = g.matmul(weights, v)?;
            x = g.add(x, ctx)?;
        }
        let pooled = match self.pool {
            Pool::Mean => g.mean_rows(x)?,
            Pool::LastToken => g.gather_rows(x, &[tokens.len() - 1])?,
        };
        let z = g.matmul(pooled, nodes.text_proj)?;
        g.l2_normalize(z)
    }
}

impl ImageEncoderParams {
    fn check_grid(&self, grid: &Grid) -> Result<()> {
        let c = self.cell_table.rows();
        if let Some(&bad) = grid.cells().iter().find(|&&code| code as usize >= c) {
            return Err(Error::Input(format!(
                "cell code {bad} outside codebook of {c}"
            )));
        }
        Ok(())
    }

    /// Image tower on the tape; returns a `1 x e` unit-norm node.
    pub fn forward(&self, g: &mut Graph, nodes: &ParamNodes, grid: &Grid) -> Result<NodeId> {
        self.check_grid(grid)?;
        let ids: Vec<usize> = grid.cells().iter().map(|&c| c as usize).collect();
        let cells = g.gather_rows(nodes.cell_table, &ids)?;
        let pooled = g.mean_rows(cells)?;
        let z = g.matmul(pooled, nodes.image_proj)?;
        g.l2_normalize(z)
    }
}

fn text_only_nodes(g: &mut Graph, p: &TextEncoderParams) -> ParamNodes {
    let token_table = g.constant(p.token_table.clone());
    let pe = g.constant(p.pe.entries().clone());
    let attn = p.attn.as_ref().map(|a| {
        [
            g.constant(a.wq.clone()),
            g.constant(a.wk.clone()),
            g.constant(a.wv.clone()),
        ]
    });
    let text_proj = g.constant(p.proj.clone());
    ParamNodes {
        token_table,
        pe,
        attn,
        text_proj,
        cell_table: token_table,
        image_proj: text_proj,
        log_tau: text_proj,
    }
}

fn image_only_nodes(g: &mut Graph, p: &ImageEncoderParams) -> ParamNodes {
    let cell_table = g.constant(p.cell_table.clone());
    let image_proj = g.constant(p.proj.clone());
    ParamNodes {
        token_table: cell_table,
        pe: cell_table,
        attn: None,
        text_proj: image_proj,
        cell_table,
        image_proj,
        log_tau: image_proj,
    }
}

/// Unit-norm `1 x e` embedding of one token sequence.
pub fn encode_text(params: &TextEncoderParams, tokens: &[TokenId]) -> Result<Tensor> {
    let mut g = Graph::new();
    let nodes = text_only_nodes(&mut g, params);
    let out = params.forward(&mut g, &nodes, tokens)?;
    Ok(g.value(out).clone())
}

/// Unit-norm `1 x e` embedding of one grid.
pub fn encode_image(params: &ImageEncoderParams, grid: &Grid) -> Result<Tensor> {
    let mut g = Graph::new();
    let nodes = image_only_nodes(&mut g, params);
    let out = params.forward(&mut g, &nodes, grid)?;
    Ok(g.value(out).clone())
}

const ENCODE_CHUNK: usize = 32;

/// Stacked `n x e` embeddings for many sequences.
pub fn encode_texts<T: AsRef<[TokenId]>>(params: &TextEncoderParams, seqs: &[T]) -> Result<Tensor> {
    let mut rows = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(ENCODE_CHUNK) {
        let mut g = Graph::new();
        let nodes = text_only_nodes(&mut g, params);
        for s in chunk {
            let out = params.forward(&mut g, &nodes, s.as_ref())?;
            rows.push(g.value(out).data().to_vec());
        }
    }
    Tensor::from_rows(&rows)
}

/// Stacked `n x e` embeddings for many grids.
pub fn encode_images<G: std::borrow::Borrow<Grid>>(
    params: &ImageEncoderParams,
    grids: &[G],
) -> Result<Tensor> {
    let mut rows = Vec::with_capacity(grids.len());
    for chunk in grids.chunks(ENCODE_CHUNK * 4) {
        let mut g = Graph::new();
        let nodes = image_only_nodes(&mut g, params);
        for grid in chunk {
            let out = params.forward(&mut g, &nodes, grid.borrow())?;
            rows.push(g.value(out).data().to_vec());
        }
    }
    Tensor::from_rows(&rows)
}

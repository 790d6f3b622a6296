use crate::datagen::Vocabulary;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{encode_image, encode_texts, ModelParams, TokenId};
use crate::tensor::Tensor;

pub const PLACEHOLDER: &str = "{class_name}";

pub fn fill_template(template: &str, class_name: &str) -> Result<String> {
    if !template.contains(PLACEHOLDER) {
        return Err(Error::Template(format!(
            "template {template:?} lacks the {PLACEHOLDER} placeholder"
        )));
    }
    Ok(template.replace(PLACEHOLDER, class_name))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_first(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if best.is_none_or(|b| x > xs[b]) {
            best = Some(i);
        }
    }
    best
}

/// Prompt embeddings for every class, one row each.
pub fn class_embeddings(
    params: &ModelParams,
    vocab: &Vocabulary,
    class_names: &[&str],
    template: &str,
) -> Result<Tensor> {
    if class_names.is_empty() {
        return Err(Error::Protocol(
            "zero-shot classification needs at least one class".into(),
        ));
    }
    let prompts: Vec<Vec<TokenId>> = class_names
        .iter()
        .map(|c| vocab.encode(&fill_template(template, c)?))
        .collect::<Result<_>>()?;
    encode_texts(&params.text, &prompts)
}

/// Class index whose prompt embedding is most similar to `image_emb` (a `1 x e` row).
pub fn classify_embedding(image_emb: &[f64], classes: &Tensor) -> usize {
    let sims: Vec<f64> = (0..classes.rows())
        .map(|k| {
            classes
                .row(k)
                .iter()
                .zip(image_emb)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    argmax_first(&sims).unwrap_or(0)
}

pub fn zero_shot_classify(
    params: &ModelParams,
    vocab: &Vocabulary,
    grid: &Grid,
    class_names: &[&str],
    template: &str,
) -> Result<usize> {
    let classes = class_embeddings(params, vocab, class_names, template)?;
    let img = encode_image(&params.image, grid)?;
    Ok(classify_embedding(img.data(), &classes))
}

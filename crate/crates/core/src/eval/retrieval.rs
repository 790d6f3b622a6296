use std::io::Write;

use crate::error::{Error, Result};
use crate::tensor::{matmul, transpose, Tensor};

pub const KS: [usize; 3] = [1, 5, 10];

const UNIT_TOL: f64 = 1e-6;

/// Recall percentages at k = 1, 5, 10 for both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallReport {
    pub t2i: [f64; 3],
    pub i2t: [f64; 3],
    pub mr: f64,
}

impl RecallReport {
    pub fn from_directions(t2i: [f64; 3], i2t: [f64; 3]) -> Self {
        let mr = (t2i.iter().sum::<f64>() + i2t.iter().sum::<f64>()) / 6.0;
        Self { t2i, i2t, mr }
    }

    pub const CSV_HEADER: &'static str = "t2i_r1,t2i_r5,t2i_r10,i2t_r1,i2t_r5,i2t_r10,mr";

    pub fn csv_row(&self) -> String {
        let v: Vec<String> = self
            .t2i
            .iter()
            .chain(&self.i2t)
            .chain([&self.mr])
            .map(|x| format!("{x:.4}"))
            .collect();
        v.join(",")
    }
}

fn check_unit_rows(t: &Tensor, what: &str) -> Result<()> {
    for r in 0..t.rows() {
        let n = t.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::Contract(format!("{what} row {r} has norm {n}")));
        }
    }
    Ok(())
}

/// 0-based position of the best-ranked answer; ties go to the lower gallery index.
pub fn best_rank(sims: &[f64], answers: &[usize]) -> usize {
    answers
        .iter()
        .map(|&a| {
            let s = sims[a];
            sims.iter()
                .enumerate()
                .filter(|&(j, &x)| x > s || (x == s && j < a))
                .count()
        })
        .min()
        .unwrap_or(usize::MAX)
}

/// Recall@{1,5,10} (percent) of `queries` against `gallery`; `gt[q]` lists the gallery answers.
pub fn recall_at_k(queries: &Tensor, gallery: &Tensor, gt: &[Vec<usize>]) -> Result<[f64; 3]> {
    if gallery.rows() == 0 || queries.rows() == 0 {
        return Err(Error::Protocol("empty gallery or query set".into()));
    }
    if gt.len() != queries.rows() {
        return Err(Error::Protocol(format!(
            "{} queries but {} answer sets",
            queries.rows(),
            gt.len()
        )));
    }
    let sims = matmul(queries, &transpose(gallery))?;
    let mut hits = [0usize; 3];
    for (q, answers) in gt.iter().enumerate() {
        if answers.is_empty() {
            return Err(Error::Protocol(format!("query {q} has no ground truth")));
        }
        if let Some(&a) = answers.iter().find(|&&a| a >= gallery.rows()) {
            return Err(Error::Protocol(format!(
                "query {q} answer {a} outside gallery"
            )));
        }
        let rank = best_rank(sims.row(q), answers);
        for (h, k) in hits.iter_mut().zip(KS) {
            if rank < k {
                *h += 1;
            }
        }
    }
    Ok(hits.map(|h| 100.0 * h as f64 / gt.len() as f64))
}

/// Inverts a text→image answer map into image→text answer sets.
pub fn invert_answers(text_to_images: &[Vec<usize>], n_images: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_images];
    for (t, imgs) in text_to_images.iter().enumerate() {
        for &i in imgs {
            if i < n_images {
                out[i].push(t);
            }
        }
    }
    out
}

/// Both retrieval directions; `text_to_images[t]` lists the images matching text `t`.
pub fn retrieval_eval(
    image_embs: &Tensor,
    text_embs: &Tensor,
    text_to_images: &[Vec<usize>],
) -> Result<RecallReport> {
    check_unit_rows(image_embs, "image embedding")?;
    check_unit_rows(text_embs, "text embedding")?;
    let t2i = recall_at_k(text_embs, image_embs, text_to_images)?;
    let i2t_gt = invert_answers(text_to_images, image_embs.rows());
    let i2t = recall_at_k(image_embs, text_embs, &i2t_gt)?;
    Ok(RecallReport::from_directions(t2i, i2t))
}

/// Answer sets for a one-to-one pairing: text `i` matches image `i`.
pub fn paired_answers(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

pub fn write_recall_csv<W: Write>(
    out: &mut W,
    rows: &[(&str, RecallReport)],
) -> std::io::Result<()> {
    writeln!(out, "task,{}", RecallReport::CSV_HEADER)?;
    for (task, r) in rows {
        writeln!(out, "{task},{}", r.csv_row())?;
    }
    Ok(())
}

mod common;

use common::oracle::{dot, sort_recall};
use common::{rng, unit_rows};
use dualgrain::datagen::lexicon::{SCENE_CLASSES, ZERO_SHOT_TEMPLATE};
use dualgrain::datagen::Vocabulary;
use dualgrain::eval::retrieval::recall_at_k;
use dualgrain::eval::zero_shot::{argmax_first, classify_embedding};
use dualgrain::eval::{
    fill_template, heatmap_from_similarities, paired_answers, retrieval_eval, selo_metrics,
    zero_shot_classify, AttentionMap, RecallReport, SeLoReport, SeLoWeights, Window,
    DEFAULT_PEAK_QUANTILE,
};
use dualgrain::grid::{BBox, Grid};
use dualgrain::model::{encode_image, encode_text, ModelConfig, ModelParams};
use dualgrain::tensor::Tensor;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_instance<R: Rng>(r: &mut R) -> (Tensor, Tensor, Vec<Vec<usize>>) {
    let n_img = r.gen_range(1..=30);
    let n_txt = r.gen_range(n_img..=2 * n_img);
    let e = r.gen_range(2..=6);
    // Small integer directions make exact score ties common.
    let make = |n: usize, r: &mut R| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..e).map(|_| r.gen_range(-2i32..=2) as f64).collect();
                if v.iter().all(|x| *x == 0.0) {
                    v[0] = 1.0;
                }
                let norm = dot(&v, &v).sqrt();
                v.iter().map(|x| x / norm).collect()
            })
            .collect();
        Tensor::from_rows(&rows).unwrap()
    };
    let img = make(n_img, r);
    let txt = make(n_txt, r);
    let t2i: Vec<Vec<usize>> = (0..n_txt)
        .map(|t| {
            let mut a = vec![t % n_img];
            if r.gen_bool(0.3) {
                a.push(r.gen_range(0..n_img));
            }
            a.sort();
            a.dedup();
            a
        })
        .collect();
    (img, txt, t2i)
}

#[test]
fn recall_matches_an_exhaustive_sort() {
    let mut r = rng(50);
    for trial in 0..50 {
        let (img, txt, t2i) = random_instance(&mut r);
        let got = retrieval_eval(&img, &txt, &t2i).unwrap();
        let mut i2t = vec![Vec::new(); img.rows()];
        for (t, a) in t2i.iter().enumerate() {
            for &i in a {
                i2t[i].push(t);
            }
        }
        let want = RecallReport::from_directions(
            sort_recall(&txt, &img, &t2i),
            sort_recall(&img, &txt, &i2t),
        );
        assert_eq!(got, want, "trial {trial}");
        assert_eq!(
            want.mr,
            (want.t2i.iter().sum::<f64>() + want.i2t.iter().sum::<f64>()) / 6.0
        );
    }
}

#[test]
fn self_retrieval_scores_one_hundred() {
    let x = unit_rows(&mut rng(1), 25, 8);
    let rep = retrieval_eval(&x, &x, &paired_answers(25)).unwrap();
    assert_eq!(rep.mr, 100.0);
}

#[test]
fn non_unit_embeddings_are_rejected() {
    let x = Tensor::from_rows(&[vec![2.0, 0.0]]).unwrap();
    assert!(retrieval_eval(&x, &x, &paired_answers(1)).is_err());
}

proptest! {
    #[test]
    fn recall_is_monotone_in_k(seed in any::<u64>()) {
        let (img, txt, t2i) = random_instance(&mut rng(seed));
        let rep = retrieval_eval(&img, &txt, &t2i).unwrap();
        for d in [rep.t2i, rep.i2t] {
            prop_assert!(d[0] <= d[1] && d[1] <= d[2]);
        }
    }

    #[test]
    fn an_extra_distractor_never_raises_recall(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (img, txt, t2i) = random_instance(&mut r);
        let before = recall_at_k(&txt, &img, &t2i).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..img.rows()).map(|i| img.row(i).to_vec()).collect();
        let at = r.gen_range(0..=rows.len());
        rows.insert(at, unit_rows(&mut r, 1, img.cols()).row(0).to_vec());
        // Answers after the insertion point shift by one.
        let shifted: Vec<Vec<usize>> = t2i
            .iter()
            .map(|a| a.iter().map(|&i| if i >= at { i + 1 } else { i }).collect())
            .collect();
        let after = recall_at_k(&txt, &Tensor::from_rows(&rows).unwrap(), &shifted).unwrap();
        for k in 0..3 {
            prop_assert!(after[k] <= before[k]);
        }
    }

    #[test]
    fn argmax_survives_increasing_transforms(xs in prop::collection::vec(-5.0f64..5.0, 1..12), a in 0.1f64..3.0, b in -2.0f64..2.0) {
        let ys: Vec<f64> = xs.iter().map(|x| (a * x + b).exp()).collect();
        prop_assert_eq!(argmax_first(&xs), argmax_first(&ys));
    }
}

#[test]
fn zero_shot_agrees_with_an_independent_similarity_table() {
    let vocab = Vocabulary::standard();
    let mut r = rng(12);
    let classes: Vec<&str> = SCENE_CLASSES[..8].to_vec();
    for seed in 0..5u64 {
        let cfg = ModelConfig {
            init_scale: 0.3,
            ..ModelConfig::default()
        };
        let params = ModelParams::init(&cfg, &mut rng(seed)).unwrap();
        let prompts: Vec<Tensor> = classes
            .iter()
            .map(|c| {
                let text = fill_template(ZERO_SHOT_TEMPLATE, c).unwrap();
                encode_text(&params.text, &vocab.encode(&text).unwrap()).unwrap()
            })
            .collect();
        for _ in 0..20 {
            let cells: Vec<u16> = (0..64)
                .map(|_| r.gen_range(0..cfg.cell_codes as u16))
                .collect();
            let grid = Grid::new(8, 8, cells).unwrap();
            let img = encode_image(&params.image, &grid).unwrap();
            let table: Vec<f64> = prompts.iter().map(|p| dot(p.data(), img.data())).collect();
            let mut want = 0;
            for (k, s) in table.iter().enumerate() {
                if *s > table[want] {
                    want = k;
                }
            }
            assert_eq!(
                zero_shot_classify(&params, &vocab, &grid, &classes, ZERO_SHOT_TEMPLATE).unwrap(),
                want
            );
        }
    }
    assert!(zero_shot_classify(
        &ModelParams::init(&ModelConfig::default(), &mut rng(0)).unwrap(),
        &vocab,
        &Grid::new(2, 2, vec![0; 4]).unwrap(),
        &classes,
        "no placeholder",
    )
    .is_err());
}

#[test]
fn classify_embedding_picks_the_closest_row() {
    let mut r = rng(4);
    for _ in 0..50 {
        let classes = unit_rows(&mut r, 8, 5);
        let k = r.gen_range(0..8);
        assert_eq!(classify_embedding(classes.row(k), &classes), k);
    }
}

/// Per-cell average of shifted window scores over covering windows, normalized.
fn heatmap_oracle(h: usize, w: usize, win: Window, sims: &[f64]) -> Vec<f64> {
    let mut placements = Vec::new();
    let mut r = 0;
    while r + win.h <= h {
        let mut c = 0;
        while c + win.w <= w {
            placements.push((r, c));
            c += win.stride;
        }
        r += win.stride;
    }
    let min = sims.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = vec![0.0; h * w];
    for (i, v) in out.iter_mut().enumerate() {
        let (cr, cc) = (i / w, i % w);
        let covering: Vec<f64> = placements
            .iter()
            .zip(sims)
            .filter(|((r, c), _)| cr >= *r && cr < r + win.h && cc >= *c && cc < c + win.w)
            .map(|(_, s)| s - min)
            .collect();
        if !covering.is_empty() {
            *v = covering.iter().sum::<f64>() / covering.len() as f64;
        }
    }
    let total: f64 = out.iter().sum();
    out.iter().map(|v| v / total).collect()
}

#[test]
fn heatmap_matches_direct_accumulation() {
    let mut r = rng(30);
    for _ in 0..40 {
        let (h, w) = (r.gen_range(3..=10), r.gen_range(3..=10));
        let win = Window::new(
            r.gen_range(1..=h.min(4)),
            r.gen_range(1..=w.min(4)),
            r.gen_range(1..=2),
        );
        let n = win.positions(h, w).unwrap().len();
        let sims: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let got = heatmap_from_similarities(h, w, win, &sims).unwrap();
        let want = heatmap_oracle(h, w, win, &sims);
        for (a, b) in got.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
        // Adding a constant to every score leaves the map unchanged.
        let shifted: Vec<f64> = sims.iter().map(|s| s + 0.37).collect();
        let again = heatmap_from_similarities(h, w, win, &shifted).unwrap();
        for (a, b) in got.values.iter().zip(&again.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

fn random_map(r: &mut impl Rng, h: usize, w: usize) -> Vec<f64> {
    (0..h * w).map(|_| r.gen_range(0.0..1.0)).collect()
}

fn random_box(r: &mut impl Rng, h: usize, w: usize) -> BBox {
    let (r0, c0) = (r.gen_range(0..h), r.gen_range(0..w));
    BBox::new(r0, c0, r.gen_range(r0 + 1..=h), r.gen_range(c0 + 1..=w))
}

fn score(h: usize, w: usize, v: Vec<f64>, gt: &BBox) -> SeLoReport {
    let m = AttentionMap::from_values(h, w, v).unwrap();
    selo_metrics(&m, gt, SeLoWeights::default(), DEFAULT_PEAK_QUANTILE).unwrap()
}

#[test]
fn shrinking_outside_mass_never_lowers_su() {
    let mut r = rng(6);
    for _ in 0..300 {
        let (h, w) = (r.gen_range(2..=8), r.gen_range(2..=8));
        let gt = random_box(&mut r, h, w);
        let v = random_map(&mut r, h, w);
        let f = r.gen_range(0.0..1.0);
        let shrunk: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, x)| {
                if gt.contains_cell(i / w, i % w) {
                    *x
                } else {
                    x * f
                }
            })
            .collect();
        if shrunk.iter().sum::<f64>() <= 0.0 {
            continue;
        }
        let (a, b) = (score(h, w, v, &gt), score(h, w, shrunk, &gt));
        assert!(b.r_su >= a.r_su - 1e-12, "{} -> {}", a.r_su, b.r_su);
    }
}

#[test]
fn moving_the_peak_toward_the_box_never_raises_as() {
    let mut r = rng(7);
    for _ in 0..300 {
        let (h, w) = (r.gen_range(3..=10), r.gen_range(3..=10));
        let gt = random_box(&mut r, h, w);
        let (gr, gc) = ((gt.r0 + gt.r1) / 2, (gt.c0 + gt.c1) / 2);
        let (mut pr, mut pc) = (r.gen_range(0..h), r.gen_range(0..w));
        // A single dominant cell on a flat low floor is the only peak.
        let single = |pr: usize, pc: usize| {
            let mut v = vec![0.0; h * w];
            v[pr * w + pc] = 1.0;
            v
        };
        let mut prev = score(h, w, single(pr, pc), &gt).r_as;
        while (pr, pc) != (gr, gc) {
            if pr != gr {
                pr = if pr < gr { pr + 1 } else { pr - 1 };
            } else {
                pc = if pc < gc { pc + 1 } else { pc - 1 };
            }
            let now = score(h, w, single(pr, pc), &gt).r_as;
            assert!(now <= prev + 1e-12, "{prev} -> {now}");
            prev = now;
        }
    }
}

#[test]
fn composite_score_recomposes_from_components() {
    let mut r = rng(8);
    let (ws, wa, wd) = (0.4, 0.35, 0.25);
    for _ in 0..1000 {
        let (h, w) = (r.gen_range(1..=9), r.gen_range(1..=9));
        let gt = random_box(&mut r, h, w);
        let rep = score(h, w, random_map(&mut r, h, w), &gt);
        for x in [rep.r_su, rep.r_as, rep.r_da] {
            assert!((0.0..=1.0).contains(&x));
        }
        let independent = ws * rep.r_su + wa * (1.0 - rep.r_as) + wd * rep.r_da;
        assert!((independent - rep.r_mi).abs() < 1e-12);
    }
    let gt = BBox::new(1, 1, 3, 4);
    let ideal: Vec<f64> = (0..30)
        .map(|i| {
            if gt.contains_cell(i / 6, i % 6) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    assert_eq!(score(5, 6, ideal, &gt).r_mi, 1.0);
}

#[test]
fn report_mean_averages_components() {
    let w = SeLoWeights::default();
    let a = SeLoReport::new(0.2, 0.4, 1.0, w);
    let b = SeLoReport::new(0.6, 0.0, 0.5, w);
    let m = SeLoReport::mean(&[a, b], w).unwrap();
    assert!(
        (m.r_su - 0.4).abs() < 1e-15
            && (m.r_as - 0.2).abs() < 1e-15
            && (m.r_da - 0.75).abs() < 1e-15
    );
    assert!((m.r_mi - (a.r_mi + b.r_mi) / 2.0).abs() < 1e-12);
    assert!(SeLoReport::mean(&[], w).is_none());
}

#[test]
fn shuffled_gallery_keeps_recall_when_scores_are_distinct() {
    let mut r = rng(9);
    let n = 20;
    let img = unit_rows(&mut r, n, 6);
    let txt = unit_rows(&mut r, n, 6);
    let base = retrieval_eval(&img, &txt, &paired_answers(n)).unwrap();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    let rows: Vec<Vec<f64>> = perm.iter().map(|&i| img.row(i).to_vec()).collect();
    let answers: Vec<Vec<usize>> = (0..n)
        .map(|t| vec![perm.iter().position(|&p| p == t).unwrap()])
        .collect();
    let shuffled = retrieval_eval(&Tensor::from_rows(&rows).unwrap(), &txt, &answers).unwrap();
    assert_eq!(base.t2i, shuffled.t2i);
}

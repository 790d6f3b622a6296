//! Template captions.
//!
//! Long captions state the scene class, the background, every object (count,
//! attribute, category, coarse position) and every declared relation, then
//! pad with content-free sentences toward a target length. Short captions
//! name only the scene class and the primary object.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::model::TokenId;

use super::lexicon::{
    article, plural, relation_phrase, ATTRIBUTES, BACKGROUNDS, CATEGORIES, COUNT_WORDS,
    LONG_FILLERS, POSITIONS, SCENE_CLASSES, SHORT_FILLERS,
};
use super::scene::{RelationKind, Scene, SceneObject};
use super::vocab::Vocabulary;

pub const LONG_MIN: usize = 40;
pub const LONG_MAX: usize = 200;
pub const SHORT_MIN: usize = 5;
pub const SHORT_MAX: usize = 40;

/// Length targets for generated captions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptionConfig {
    pub long_mean: f64,
    pub short_mean: f64,
}

impl Default for CaptionConfig {
    fn default() -> Self {
        Self {
            long_mean: 86.0,
            short_mean: 32.0,
        }
    }
}

fn noun(o: &SceneObject) -> String {
    let cat = CATEGORIES[o.category];
    if o.count == 1 {
        cat.to_string()
    } else {
        plural(cat)
    }
}

fn copula(o: &SceneObject) -> &'static str {
    if o.count == 1 {
        "is"
    } else {
        "are"
    }
}

/// "a red building" / "two red buildings".
pub fn indefinite_phrase(o: &SceneObject) -> String {
    format!(
        "{} {} {}",
        COUNT_WORDS[o.count.min(3)],
        ATTRIBUTES[o.attribute],
        noun(o)
    )
}

/// "the red building" / "the red buildings".
pub fn definite_phrase(o: &SceneObject) -> String {
    format!("the {} {}", ATTRIBUTES[o.attribute], noun(o))
}

pub fn scene_class_name(scene: &Scene) -> &'static str {
    SCENE_CLASSES[scene.scene_class()]
}

fn position(scene: &Scene, o: &SceneObject) -> &'static str {
    let (cr, cc) = o.bbox.center();
    let third = |v: f64, n: usize| ((v * 3.0 / n as f64).floor() as usize).min(2);
    POSITIONS[third(cr, scene.grid.height())][third(cc, scene.grid.width())]
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

fn pad_to(
    sentences: &mut Vec<String>,
    len: &mut usize,
    target: usize,
    min: usize,
    max: usize,
    pool: &[&str],
    rng: &mut impl Rng,
) {
    let mut order: Vec<&str> = pool.to_vec();
    order.shuffle(rng);
    for f in order {
        let n = word_count(f);
        let under = target.saturating_sub(*len);
        let over = (*len + n).saturating_sub(target);
        if *len >= min && (under == 0 || over > under) {
            break;
        }
        if *len + n > max {
            continue;
        }
        sentences.push(f.to_string());
        *len += n;
    }
}

fn jittered_target(rng: &mut impl Rng, mean: f64, spread: f64, lo: usize, hi: usize) -> usize {
    let t = (mean + rng.gen_range(-spread..=spread)).round();
    (t.max(lo as f64) as usize).min(hi)
}

/// Sentences naming objects and relations, without padding.
pub fn long_core(scene: &Scene) -> Vec<String> {
    let class = scene_class_name(scene);
    let mut s = vec![
        format!("this is a satellite image of {} {class} .", article(class)),
        format!(
            "the background is mostly {} .",
            BACKGROUNDS[scene.background]
        ),
    ];
    for o in &scene.objects {
        let there = if o.count == 1 {
            "there is"
        } else {
            "there are"
        };
        s.push(format!(
            "{there} {} in the {} part of the image .",
            indefinite_phrase(o),
            position(scene, o)
        ));
    }
    for r in &scene.relations {
        let subj = &scene.objects[r.subject];
        let first = definite_phrase(&scene.objects[r.objects[0]]);
        let rest = match r.kind {
            RelationKind::Between => format!(
                "{first} and {}",
                definite_phrase(&scene.objects[r.objects[1]])
            ),
            _ => first,
        };
        s.push(format!(
            "{} {} {} {rest} .",
            definite_phrase(subj),
            copula(subj),
            relation_phrase(r.kind)
        ));
    }
    s
}

pub fn long_caption_text(scene: &Scene, cfg: &CaptionConfig, rng: &mut impl Rng) -> String {
    let mut sentences = long_core(scene);
    let mut len: usize = sentences.iter().map(|s| word_count(s)).sum();
    let target = jittered_target(rng, cfg.long_mean, 12.0, LONG_MIN, LONG_MAX);
    pad_to(
        &mut sentences,
        &mut len,
        target,
        LONG_MIN,
        LONG_MAX,
        &LONG_FILLERS,
        rng,
    );
    sentences.join(" ")
}

pub fn short_caption_text(scene: &Scene, cfg: &CaptionConfig, rng: &mut impl Rng) -> String {
    let class = scene_class_name(scene);
    let primary = scene.primary();
    if scene.objects.len() == 1 {
        return format!(
            "{} in {} {class} .",
            indefinite_phrase(primary),
            article(class)
        );
    }
    let mut sentences = vec![format!(
        "a satellite image of {} {class} with {} .",
        article(class),
        indefinite_phrase(primary)
    )];
    let mut len = word_count(&sentences[0]);
    let target = jittered_target(rng, cfg.short_mean, 6.0, SHORT_MIN, SHORT_MAX);
    pad_to(
        &mut sentences,
        &mut len,
        target,
        SHORT_MIN,
        SHORT_MAX,
        &SHORT_FILLERS,
        rng,
    );
    sentences.join(" ")
}

/// Token ids for the long and short caption of `scene`.
pub fn render_captions(
    scene: &Scene,
    vocab: &Vocabulary,
    cfg: &CaptionConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<TokenId>, Vec<TokenId>)> {
    let long = vocab.encode(&long_caption_text(scene, cfg, rng))?;
    let short = vocab.encode(&short_caption_text(scene, cfg, rng))?;
    Ok((long, short))
}

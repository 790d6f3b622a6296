use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{BBox, CellCode, Grid};

use super::lexicon::{ATTRIBUTES, BACKGROUNDS, CATEGORIES, SURROUNDING};

/// Number of distinct cell codes: backgrounds, then one code per (category, attribute).
pub const CELL_CODES: usize = BACKGROUNDS.len() + CATEGORIES.len() * ATTRIBUTES.len();

pub fn background_code(bg: usize) -> CellCode {
    bg as CellCode
}

pub fn object_code(category: usize, attribute: usize) -> CellCode {
    (BACKGROUNDS.len() + category * ATTRIBUTES.len() + attribute) as CellCode
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationKind {
    LeftOf,
    RightOf,
    Above,
    Below,
    Between,
    SurroundedBy,
}

impl RelationKind {
    pub const ALL: [RelationKind; 6] = [
        RelationKind::LeftOf,
        RelationKind::RightOf,
        RelationKind::Above,
        RelationKind::Below,
        RelationKind::Between,
        RelationKind::SurroundedBy,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::LeftOf => "left-of",
            RelationKind::RightOf => "right-of",
            RelationKind::Above => "above",
            RelationKind::Below => "below",
            RelationKind::Between => "between",
            RelationKind::SurroundedBy => "surrounded-by",
        })
    }
}

impl FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Input(format!("unknown relation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneObject {
    pub category: usize,
    pub attribute: usize,
    pub bbox: BBox,
    pub count: usize,
}

impl SceneObject {
    pub fn code(&self) -> CellCode {
        object_code(self.category, self.attribute)
    }
}

/// `subject <kind> objects[0]` (and `objects[1]` for `Between`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub subject: usize,
    pub kind: RelationKind,
    pub objects: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    pub grid: Grid,
    pub background: usize,
    /// Sorted by area, largest first; object 0 is the primary object.
    pub objects: Vec<SceneObject>,
    pub relations: Vec<Relation>,
}

impl Scene {
    pub fn primary(&self) -> &SceneObject {
        &self.objects[0]
    }

    pub fn scene_class(&self) -> usize {
        self.primary().category
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub height: usize,
    pub width: usize,
    /// Indices into the category table the generator may draw from.
    pub categories: Vec<usize>,
    pub attributes: Vec<usize>,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Largest side of a free-standing object, in cells.
    pub max_object_side: usize,
    /// Chance that the primary object encloses a second one.
    pub surround_prob: f64,
    /// Chance that an object is the subject of one declared relation.
    pub relation_prob: f64,
    pub long_mean: f64,
    pub short_mean: f64,
    pub test_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            height: 8,
            width: 8,
            categories: (0..CATEGORIES.len()).collect(),
            attributes: (0..ATTRIBUTES.len()).collect(),
            min_objects: 2,
            max_objects: 4,
            max_object_side: 3,
            surround_prob: 0.25,
            relation_prob: 0.8,
            long_mean: 86.0,
            short_mean: 32.0,
            test_fraction: 0.2,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::Generation(format!(
                "grid must be at least 2x2, got {}x{}",
                self.height, self.width
            )));
        }
        if self.categories.is_empty() || self.attributes.is_empty() {
            return Err(Error::Generation("empty category or attribute pool".into()));
        }
        if let Some(&c) = self.categories.iter().find(|&&c| c >= CATEGORIES.len()) {
            return Err(Error::Generation(format!("unknown category index {c}")));
        }
        if let Some(&a) = self.attributes.iter().find(|&&a| a >= ATTRIBUTES.len()) {
            return Err(Error::Generation(format!("unknown attribute index {a}")));
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return Err(Error::Generation(format!(
                "object range {}..={} is empty",
                self.min_objects, self.max_objects
            )));
        }
        if self.max_objects > 6 {
            return Err(Error::Generation(
                "more than 6 objects cannot be captioned within 200 tokens".into(),
            ));
        }
        if self.min_objects > self.height * self.width {
            return Err(Error::Generation(format!(
                "{} objects cannot fit in {} cells",
                self.min_objects,
                self.height * self.width
            )));
        }
        if self.min_objects > self.categories.len() * self.attributes.len() {
            return Err(Error::Generation(
                "not enough distinct category/attribute pairs".into(),
            ));
        }
        if self.max_object_side == 0 {
            return Err(Error::Generation("max_object_side must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Generation("test_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn rows_overlap(a: &BBox, b: &BBox) -> bool {
    a.r0 < b.r1 && b.r0 < a.r1
}

fn cols_overlap(a: &BBox, b: &BBox) -> bool {
    a.c0 < b.c1 && b.c0 < a.c1
}

/// Geometric truth of `subject <kind> others` for the given boxes.
pub fn relation_holds(kind: RelationKind, subject: &BBox, others: &[BBox]) -> bool {
    match (kind, others) {
        (RelationKind::LeftOf, [o]) => subject.c1 <= o.c0 && rows_overlap(subject, o),
        (RelationKind::RightOf, [o]) => o.c1 <= subject.c0 && rows_overlap(subject, o),
        (RelationKind::Above, [o]) => subject.r1 <= o.r0 && cols_overlap(subject, o),
        (RelationKind::Below, [o]) => o.r1 <= subject.r0 && cols_overlap(subject, o),
        (RelationKind::SurroundedBy, [o]) => o.strictly_encloses(subject),
        (RelationKind::Between, [a, b]) => {
            let common_row = subject.r0.max(a.r0).max(b.r0) < subject.r1.min(a.r1).min(b.r1);
            let common_col = subject.c0.max(a.c0).max(b.c0) < subject.c1.min(a.c1).min(b.c1);
            let horizontal = common_row
                && ((a.c1 <= subject.c0 && subject.c1 <= b.c0)
                    || (b.c1 <= subject.c0 && subject.c1 <= a.c0));
            let vertical = common_col
                && ((a.r1 <= subject.r0 && subject.r1 <= b.r0)
                    || (b.r1 <= subject.r0 && subject.r1 <= a.r0));
            horizontal || vertical
        }
        _ => false,
    }
}

fn random_box(rng: &mut ChaCha8Rng, h: usize, w: usize, max_side: usize) -> BBox {
    let bh = rng.gen_range(1..=max_side.min(h));
    let bw = rng.gen_range(1..=max_side.min(w));
    let r0 = rng.gen_range(0..=h - bh);
    let c0 = rng.gen_range(0..=w - bw);
    BBox::new(r0, c0, r0 + bh, c0 + bw)
}

fn place_free(rng: &mut ChaCha8Rng, cfg: &GenConfig, taken: &[BBox]) -> Option<BBox> {
    for _ in 0..200 {
        let b = random_box(rng, cfg.height, cfg.width, cfg.max_object_side);
        if !taken.iter().any(|t| t.intersects(&b)) {
            return Some(b);
        }
    }
    let mut free: Vec<BBox> = Vec::new();
    for r in 0..cfg.height {
        for c in 0..cfg.width {
            let b = BBox::new(r, c, r + 1, c + 1);
            if !taken.iter().any(|t| t.intersects(&b)) {
                free.push(b);
            }
        }
    }
    free.choose(rng).copied()
}

fn draw_count(rng: &mut ChaCha8Rng) -> usize {
    match rng.gen_range(0..20) {
        0..=11 => 1,
        12..=16 => 2,
        _ => 3,
    }
}

/// Candidate relations with `subject` as subject, in a fixed enumeration order.
fn candidate_relations(subject: usize, boxes: &[BBox]) -> Vec<Relation> {
    let mut out = Vec::new();
    let n = boxes.len();
    for o in (0..n).filter(|&o| o != subject) {
        for kind in [
            RelationKind::SurroundedBy,
            RelationKind::LeftOf,
            RelationKind::RightOf,
            RelationKind::Above,
            RelationKind::Below,
        ] {
            if relation_holds(kind, &boxes[subject], &[boxes[o]]) {
                out.push(Relation {
                    subject,
                    kind,
                    objects: vec![o],
                });
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if a != subject
                && b != subject
                && relation_holds(
                    RelationKind::Between,
                    &boxes[subject],
                    &[boxes[a], boxes[b]],
                )
            {
                out.push(Relation {
                    subject,
                    kind: RelationKind::Between,
                    objects: vec![a, b],
                });
            }
        }
    }
    out
}

pub fn generate_scene(seed: u64, cfg: &GenConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (cfg.height, cfg.width);

    let n_max = cfg
        .max_objects
        .min(cfg.categories.len() * cfg.attributes.len());
    let n = rng.gen_range(cfg.min_objects..=n_max.max(cfg.min_objects));

    let mut pairs: Vec<(usize, usize)> = cfg
        .categories
        .iter()
        .flat_map(|&c| cfg.attributes.iter().map(move |&a| (c, a)))
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(n);

    let mut boxes: Vec<BBox> = Vec::with_capacity(n);
    // Boxes that exclude further placements (a ring's own box covers its inner object).
    let mut taken: Vec<BBox> = Vec::new();

    let ring_slot = pairs
        .iter()
        .position(|(c, _)| SURROUNDING.contains(c))
        .filter(|_| n >= 2 && h >= 3 && w >= 3 && rng.gen_bool(cfg.surround_prob));
    if let Some(slot) = ring_slot {
        pairs.swap(0, slot);
        let oh = rng.gen_range(3..=h.min(5));
        let ow = rng.gen_range(3..=w.min(5));
        let r0 = rng.gen_range(0..=h - oh);
        let c0 = rng.gen_range(0..=w - ow);
        let outer = BBox::new(r0, c0, r0 + oh, c0 + ow);
        let ih = rng.gen_range(1..=(oh - 2).min(outer.height() - 2));
        let iw = rng.gen_range(1..=(ow - 2).min(outer.width() - 2));
        let ir0 = rng.gen_range(r0 + 1..=r0 + oh - 1 - ih);
        let ic0 = rng.gen_range(c0 + 1..=c0 + ow - 1 - iw);
        boxes.push(outer);
        boxes.push(BBox::new(ir0, ic0, ir0 + ih, ic0 + iw));
        taken.push(outer);
    }
    while boxes.len() < n {
        match place_free(&mut rng, cfg, &taken) {
            Some(b) => {
                boxes.push(b);
                taken.push(b);
            }
            None if boxes.len() >= cfg.min_objects => break,
            None => {
                return Err(Error::Generation(format!(
                    "no room for {} objects in a {h}x{w} grid",
                    cfg.min_objects
                )))
            }
        }
    }

    let mut objects: Vec<SceneObject> = boxes
        .iter()
        .zip(&pairs)
        .map(|(b, &(category, attribute))| SceneObject {
            category,
            attribute,
            bbox: *b,
            count: draw_count(&mut rng),
        })
        .collect();
    // Stable: a ring always precedes (and is painted before) its inner object.
    objects.sort_by_key(|o| std::cmp::Reverse(o.bbox.area()));

    let background = rng.gen_range(0..BACKGROUNDS.len());
    let mut grid = Grid::filled(h, w, background_code(background))?;
    for o in &objects {
        grid.fill(&o.bbox, o.code());
    }

    let sorted_boxes: Vec<BBox> = objects.iter().map(|o| o.bbox).collect();
    let mut relations = Vec::new();
    for s in 0..objects.len() {
        let cands = candidate_relations(s, &sorted_boxes);
        if cands.is_empty() || !rng.gen_bool(cfg.relation_prob) {
            continue;
        }
        // Enclosure is always stated when present.
        let pick = cands
            .iter()
            .find(|r| r.kind == RelationKind::SurroundedBy)
            .cloned()
            .unwrap_or_else(|| cands[rng.gen_range(0..cands.len())].clone());
        relations.push(pick);
    }

    Ok(Scene {
        grid,
        background,
        objects,
        relations,
    })
}

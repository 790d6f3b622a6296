//! Synthetic scene/caption corpus: generator, tokenizer and record files.

pub mod caption;
pub mod lexicon;
pub mod records;
pub mod scene;
pub mod vocab;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use caption::{render_captions, CaptionConfig};
pub use records::{read_records, write_records, RecordReader, RecordWriter, SceneRecord, Split};
pub use scene::{generate_scene, GenConfig, Relation, RelationKind, Scene, SceneObject};
pub use vocab::Vocabulary;

use crate::error::{Error, Result};
use crate::grid::Grid;

const MAX_ATTEMPTS: u64 = 64;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `attempt`-th try at record `index`.
pub fn record_seed(master: u64, index: u64, attempt: u64) -> u64 {
    mix(mix(mix(master) ^ index) ^ attempt.wrapping_mul(0x2545_f491_4f6c_dd1d))
}

fn grid_hash(g: &Grid) -> u64 {
    let mut h = DefaultHasher::new();
    g.height().hash(&mut h);
    g.width().hash(&mut h);
    g.cells().hash(&mut h);
    h.finish()
}

pub fn test_count(count: usize, test_fraction: f64) -> usize {
    (count as f64 * test_fraction).floor() as usize
}

/// Streaming corpus generator; every grid it yields is distinct.
///
/// The corpus is a pure function of (master seed, count, config, vocabulary).
pub struct Corpus<'a> {
    master: u64,
    count: usize,
    n_train: usize,
    next: usize,
    cfg: &'a GenConfig,
    captions: CaptionConfig,
    vocab: &'a Vocabulary,
    seen: HashSet<u64>,
}

impl<'a> Corpus<'a> {
    pub fn new(
        master: u64,
        count: usize,
        cfg: &'a GenConfig,
        vocab: &'a Vocabulary,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            master,
            count,
            n_train: count - test_count(count, cfg.test_fraction),
            next: 0,
            cfg,
            captions: CaptionConfig {
                long_mean: cfg.long_mean,
                short_mean: cfg.short_mean,
            },
            vocab,
            seen: HashSet::new(),
        })
    }

    fn make(&mut self, index: usize) -> Result<SceneRecord> {
        for attempt in 0..MAX_ATTEMPTS {
            let seed = record_seed(self.master, index as u64, attempt);
            let scene = generate_scene(seed, self.cfg)?;
            if !self.seen.insert(grid_hash(&scene.grid)) {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let (long_tokens, short_tokens) =
                render_captions(&scene, self.vocab, &self.captions, &mut rng)?;
            let gt_region = scene.primary().bbox;
            return Ok(SceneRecord {
                id: format!("r{index:07}"),
                split: if index < self.n_train {
                    Split::Train
                } else {
                    Split::Test
                },
                scene,
                long_tokens,
                short_tokens,
                gt_region,
            });
        }
        Err(Error::Generation(format!(
            "record {index}: no unseen grid after {MAX_ATTEMPTS} attempts"
        )))
    }
}

impl Iterator for Corpus<'_> {
    type Item = Result<SceneRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let i = self.next;
        self.next += 1;
        Some(self.make(i))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.count - self.next;
        (n, Some(n))
    }
}

/// Generates `count` records; the last ⌊count·test_fraction⌋ form the test split.
pub fn generate_corpus(
    master: u64,
    count: usize,
    cfg: &GenConfig,
    vocab: &Vocabulary,
) -> Result<Vec<SceneRecord>> {
    Corpus::new(master, count, cfg, vocab)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_unique() {
        let v = Vocabulary::standard();
        let cfg = GenConfig::default();
        let a = generate_corpus(3, 300, &cfg, &v).unwrap();
        let b = generate_corpus(3, 300, &cfg, &v).unwrap();
        assert_eq!(a, b);
        let grids: HashSet<&Grid> = a.iter().map(|r| &r.scene.grid).collect();
        assert_eq!(grids.len(), a.len());
        assert_eq!(a.iter().filter(|r| r.split == Split::Test).count(), 60);
        assert!(a[..240].iter().all(|r| r.split == Split::Train));
    }
}

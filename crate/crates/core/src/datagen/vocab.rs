use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::TokenId;

use super::lexicon;

pub const PAD: TokenId = 0;
pub const START: TokenId = 1;
pub const END: TokenId = 2;

const RESERVED: [&str; 3] = ["<pad>", "<start>", "<end>"];

/// Word-level tokenizer: a fixed bijection between words and ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    version: String,
    words: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from `words`; ids 0..3 are the reserved pad/start/end markers.
    pub fn from_words<I, S>(version: &str, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            version: version.to_string(),
            words: Vec::new(),
            ids: HashMap::new(),
        };
        for w in RESERVED.iter().copied().map(str::to_string) {
            v.push(w)?;
        }
        for w in words {
            let w = w.as_ref();
            if w.is_empty() || w.contains(char::is_whitespace) {
                return Err(Error::Vocab(format!("invalid vocabulary word {w:?}")));
            }
            v.push(w.to_string())?;
        }
        Ok(v)
    }

    fn push(&mut self, w: String) -> Result<()> {
        if self.ids.contains_key(&w) {
            return Err(Error::Vocab(format!("duplicate vocabulary word {w:?}")));
        }
        self.ids.insert(w.clone(), self.words.len() as TokenId);
        self.words.push(w);
        Ok(())
    }

    /// The vocabulary every generated dataset is tokenized with.
    pub fn standard() -> Self {
        Self::from_words(lexicon::VOCAB_VERSION, lexicon::all_words())
            .expect("standard lexicon is duplicate-free")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    /// Whitespace tokenization; every word must be known.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| {
                self.id(w)
                    .ok_or_else(|| Error::Vocab(format!("word {w:?} not in vocabulary")))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let words: Result<Vec<&str>> = ids
            .iter()
            .map(|&i| {
                self.word(i)
                    .ok_or_else(|| Error::Vocab(format!("token id {i} outside vocabulary")))
            })
            .collect();
        Ok(words?.join(" "))
    }
}

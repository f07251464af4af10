use std::collections::HashMap;
use std::path::Path;

use super::DpoError;

/// 63 symbols; with the out-of-alphabet slot this gives a vocabulary of 64.
pub const DEFAULT_ALPHABET: &str =
    " abcdefghijklmnopqrstuvwxyzčšžćđ0123456789.,:;!?-'\"()\n/%&+=*éöü";

/// Fixed character alphabet for the toy policy. Slot 0 is reserved for
/// characters outside the alphabet; input is lowercased first.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHABET).expect("default alphabet is valid")
    }
}

impl Alphabet {
    pub fn new(symbols: &str) -> Result<Self, DpoError> {
        let chars: Vec<char> = symbols.chars().collect();
        if chars.is_empty() {
            return Err(DpoError::Alphabet("alphabet is empty".into()));
        }
        let mut index = HashMap::new();
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i + 1).is_some() {
                return Err(DpoError::Alphabet(format!("duplicate symbol {c:?}")));
            }
        }
        Ok(Self { chars, index })
    }

    /// Every Unicode scalar in the file, in order, is one slot.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DpoError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DpoError::Alphabet(format!("{}: {e}", path.as_ref().display())))?;
        Self::new(&text)
    }

    pub fn vocab_size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars()
            .map(|c| {
                let mut lower = c.to_lowercase();
                let c = match (lower.next(), lower.next()) {
                    (Some(l), None) => l,
                    _ => c,
                };
                self.index.get(&c).copied().unwrap_or(0)
            })
            .collect()
    }

    /// Inverse of [`encode`](Self::encode); slot 0 renders as U+FFFD.
    pub fn decode(&self, tokens: &[usize]) -> String {
        tokens
            .iter()
            .map(|&t| if t == 0 { '\u{fffd}' } else { self.chars.get(t - 1).copied().unwrap_or('\u{fffd}') })
            .collect()
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::CartanError;

/// Signed 1-based generator index; `-k` is the inverse of generator `k`.
pub type Letter = i16;

/// Freely reduced word in the generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Self {
        assert!(l != 0, "letters are nonzero");
        Word(vec![l])
    }

    /// Builds a word and freely reduces it.
    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            assert!(l != 0, "letters are nonzero");
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }

    pub fn concat(&self, other: &Word) -> Word {
        Word::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&l| -l).collect())
    }

    pub fn power(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::empty();
        for _ in 0..n.unsigned_abs() {
            out = out.concat(&base);
        }
        out
    }

    /// Strips matching letters from both ends: the shortest word of the
    /// conjugacy class reachable by cyclic cancellation.
    pub fn cyclically_reduced(&self) -> Word {
        let w = &self.0;
        let (mut i, mut j) = (0, w.len());
        while j - i >= 2 && w[i] == -w[j - 1] {
            i += 1;
            j -= 1;
        }
        Word(w[i..j].to_vec())
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n].to_vec())
    }

    /// Parses `a`, `B`, `abAB`, or `id`; lowercase letters are generators,
    /// uppercase their inverses.
    pub fn parse(s: &str) -> Result<Word, CartanError> {
        let s = s.trim();
        if s.is_empty() || s == "id" || s == "1" {
            return Ok(Word::empty());
        }
        let mut letters = Vec::new();
        for c in s.chars() {
            let l = if c.is_ascii_lowercase() {
                (c as u8 - b'a' + 1) as Letter
            } else if c.is_ascii_uppercase() {
                -((c as u8 - b'A' + 1) as Letter)
            } else {
                return Err(CartanError::Parse(format!("word {s:?}")));
            };
            letters.push(l);
        }
        Ok(Word::new(letters))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "id");
        }
        for &l in &self.0 {
            let base = if l > 0 { b'a' } else { b'A' };
            let c = (base + (l.unsigned_abs() as u8 - 1)) as char;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

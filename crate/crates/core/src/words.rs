//! Alphabets, words, and the shortlex numbering.
//!
//! An [`Alphabet`] is an ordered set of at least two answer letters plus a
//! blank that is not a letter. Words over the letters ([`Word`]) are what
//! machines answer; words that may also contain the blank ([`BWord`]) are
//! what they are asked. The shortlex numbering is the bijection between
//! naturals and nonempty words: 0 -> "a", 1 -> "b", 2 -> "aa", 4 -> "ba"
//! for the default two-letter alphabet.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("alphabet needs at least two letters, got {0}")]
    TooFewLetters(usize),
    #[error("duplicate symbol {0:?} in alphabet")]
    DuplicateSymbol(char),
    #[error("blank {0:?} collides with a letter")]
    BlankIsLetter(char),
    #[error("symbol {symbol:?} not allowed in {context}")]
    ForeignSymbol { symbol: char, context: &'static str },
    #[error("word {0:?} exceeds the supported numeric range")]
    NumericOverflow(String),
}

/// Ordered answer letters plus a blank symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    letters: Vec<char>,
    blank: char,
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::ab()
    }
}

impl Alphabet {
    pub fn new(letters: &str, blank: char) -> Result<Self, WordError> {
        let letters: Vec<char> = letters.chars().collect();
        if letters.len() < 2 {
            return Err(WordError::TooFewLetters(letters.len()));
        }
        for (i, &c) in letters.iter().enumerate() {
            if letters[..i].contains(&c) {
                return Err(WordError::DuplicateSymbol(c));
            }
        }
        if letters.contains(&blank) {
            return Err(WordError::BlankIsLetter(blank));
        }
        Ok(Alphabet { letters, blank })
    }

    /// The default two-letter alphabet {a, b} with blank '_'.
    pub fn ab() -> Self {
        Alphabet { letters: vec!['a', 'b'], blank: '_' }
    }

    pub fn letters(&self) -> &[char] {
        &self.letters
    }

    pub fn blank(&self) -> char {
        self.blank
    }

    /// First letter; used as the prefix letter of [`Alphabet::bar`].
    pub fn designated(&self) -> char {
        self.letters[0]
    }

    pub fn letter_count(&self) -> usize {
        self.letters.len()
    }

    pub fn is_letter(&self, c: char) -> bool {
        self.letters.contains(&c)
    }

    /// Letters plus the blank.
    pub fn is_tape_symbol(&self, c: char) -> bool {
        c == self.blank || self.is_letter(c)
    }

    pub fn letter_index(&self, c: char) -> Option<usize> {
        self.letters.iter().position(|&l| l == c)
    }

    /// Validated word over the letters.
    pub fn word(&self, text: &str) -> Result<Word, WordError> {
        for c in text.chars() {
            if !self.is_letter(c) {
                return Err(WordError::ForeignSymbol { symbol: c, context: "word" });
            }
        }
        Ok(Word(text.to_string()))
    }

    /// Validated word over letters and blank.
    pub fn bword(&self, text: &str) -> Result<BWord, WordError> {
        for c in text.chars() {
            if !self.is_tape_symbol(c) {
                return Err(WordError::ForeignSymbol { symbol: c, context: "bword" });
            }
        }
        Ok(BWord(text.to_string()))
    }

    /// Prepends the designated letter, so bar(w) != w for every w.
    pub fn bar(&self, w: &Word) -> Word {
        let mut s = String::with_capacity(w.len() + 1);
        s.push(self.designated());
        s.push_str(w.as_str());
        Word(s)
    }

    /// Shortlex notation of `n`: bijective base-k numeration over the letters.
    pub fn num_to_word(&self, n: u64) -> Word {
        let k = self.letters.len() as u64;
        let mut m = n + 1;
        let mut digits = Vec::new();
        while m > 0 {
            let r = m % k;
            if r == 0 {
                digits.push(k as usize);
                m = m / k - 1;
            } else {
                digits.push(r as usize);
                m /= k;
            }
        }
        digits.reverse();
        Word(digits.into_iter().map(|d| self.letters[d - 1]).collect())
    }

    /// Inverse of [`Alphabet::num_to_word`]; the empty word has no number.
    pub fn word_to_num(&self, w: &Word) -> Result<u64, WordError> {
        if w.is_empty() {
            return Err(WordError::ForeignSymbol { symbol: ' ', context: "empty word has no number" });
        }
        let k = self.letters.len() as u64;
        let mut n: u64 = 0;
        for c in w.chars() {
            let d = self
                .letter_index(c)
                .ok_or(WordError::ForeignSymbol { symbol: c, context: "numeric word" })? as u64
                + 1;
            n = n
                .checked_mul(k)
                .and_then(|v| v.checked_add(d))
                .ok_or_else(|| WordError::NumericOverflow(w.to_string()))?;
        }
        Ok(n - 1)
    }

    /// Shortlex order: by length, then letter by letter in alphabet order.
    pub fn shortlex_cmp(&self, a: &Word, b: &Word) -> Ordering {
        a.len().cmp(&b.len()).then_with(|| {
            for (x, y) in a.chars().zip(b.chars()) {
                let ord = self.letter_index(x).cmp(&self.letter_index(y));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
    }
}

/// Word over the answer letters. Empty is the null answer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(String);

impl Word {
    pub fn lambda() -> Self {
        Word(String::new())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.0.chars()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Word over letters and blank; the shape of questions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BWord(String);

impl BWord {
    pub fn lambda() -> Self {
        BWord(String::new())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.0.chars()
    }

    /// Joins answers into a composed question `left blank right`.
    pub fn compose(alphabet: &Alphabet, left: &Word, right: &Word) -> BWord {
        let mut s = String::with_capacity(left.len() + right.len() + 1);
        s.push_str(left.as_str());
        s.push(alphabet.blank());
        s.push_str(right.as_str());
        BWord(s)
    }
}

impl From<&Word> for BWord {
    fn from(w: &Word) -> Self {
        BWord(w.as_str().to_string())
    }
}

impl fmt::Display for BWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Proper prefix on answer sequences: every element equal and strictly fewer
/// of them. The empty sequence is a proper prefix of any nonempty one.
pub fn prefix_rel(shorter: &[Word], longer: &[Word]) -> bool {
    shorter.len() < longer.len() && shorter.iter().zip(longer.iter()).all(|(a, b)| a == b)
}

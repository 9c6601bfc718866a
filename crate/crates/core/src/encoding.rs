//! Canonical machine encoding as words over the answer alphabet.
//!
//! Every field is a prefix-free code for a positive number, written with
//! the first letter as digit 0 and the second as digit 1: a number n is
//! its binary form preceded by one 0-digit per bit after the first. The
//! fields, in order:
//!
//! 1. state count s
//! 2. initial state + 1
//! 3. s state statuses (1 final, 2 final left-marked, 3 final
//!    right-marked, 4 working)
//! 4. extras count + 1
//! 5. initial work length + 1, then one field per cell (work symbol
//!    position + 1, in blank/letters/extras order)
//! 6. transition count + 1, then ten fields per transition: key state + 1,
//!    key work position + 1, key input position + 1, key oracle
//!    position + 1 (blank is position 0, letters follow), next state + 1,
//!    written work position + 1, three moves (1 left, 2 right, 3 stay) and
//!    the emission (1 none, 2 blank, 3 + i for letter i)
//!
//! Transitions must appear with strictly ascending keys, so every
//! description has exactly one encoding and nondeterminism is impossible
//! to express. Decoding is total: anything else is an error. The shortest
//! valid encoding is the six-digit all-ones word, the one-state machine
//! that halts at once.
//!
//! Encodings carry no names and no extras glyphs; decoding synthesizes
//! display names and picks extras from a fixed pool, which is why machine
//! identity treats both as presentation.

use crate::machine::{
    MachineDescription, Move, Side, StateId, StateStatus, Transition, TransitionAction,
    TransitionKey,
};
use crate::words::{Alphabet, Word};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("symbol {0:?} is not a code digit")]
    ForeignDigit(char),
    #[error("encoding ends inside a field")]
    Truncated,
    #[error("digits left over after the last field")]
    Trailing,
    #[error("field {0} out of range")]
    FieldRange(&'static str),
    #[error("transition keys not strictly ascending")]
    UnsortedKeys,
    #[error("decoded table invalid: {0}")]
    Invalid(String),
}

struct BitWriter {
    bits: Vec<bool>,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter { bits: Vec::new() }
    }

    fn gamma(&mut self, n: u64) {
        debug_assert!(n >= 1);
        let len = 64 - n.leading_zeros();
        for _ in 0..len - 1 {
            self.bits.push(false);
        }
        for i in (0..len).rev() {
            self.bits.push(n >> i & 1 == 1);
        }
    }

    fn into_word(self, alphabet: &Alphabet) -> Word {
        let digits = [alphabet.letters()[0], alphabet.letters()[1]];
        let text: String = self.bits.iter().map(|&b| digits[b as usize]).collect();
        alphabet.word(&text).expect("digits are letters")
    }
}

/// Appends the prefix code of `v` (>= 1) to a raw bit buffer.
pub(crate) fn push_code(bits: &mut Vec<bool>, v: u64) {
    debug_assert!(v >= 1);
    let len = 64 - v.leading_zeros();
    for _ in 0..len - 1 {
        bits.push(false);
    }
    for i in (0..len).rev() {
        bits.push(v >> i & 1 == 1);
    }
}

/// Renders a raw bit buffer as a word over the first two letters.
pub(crate) fn bits_to_word(alphabet: &Alphabet, bits: &[bool]) -> Word {
    let digits = [alphabet.letters()[0], alphabet.letters()[1]];
    let text: String = bits.iter().map(|&b| digits[b as usize]).collect();
    alphabet.word(&text).expect("digits are letters")
}

struct BitReader {
    bits: Vec<bool>,
    pos: usize,
}

impl BitReader {
    fn new(alphabet: &Alphabet, w: &Word) -> Result<Self, EncodingError> {
        let digits = [alphabet.letters()[0], alphabet.letters()[1]];
        let bits = w
            .chars()
            .map(|c| {
                if c == digits[0] {
                    Ok(false)
                } else if c == digits[1] {
                    Ok(true)
                } else {
                    Err(EncodingError::ForeignDigit(c))
                }
            })
            .collect::<Result<Vec<bool>, _>>()?;
        Ok(BitReader { bits, pos: 0 })
    }

    fn next(&mut self) -> Option<bool> {
        let b = self.bits.get(self.pos).copied();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn remaining(&self) -> u64 {
        (self.bits.len() - self.pos) as u64
    }

    fn gamma(&mut self, field: &'static str) -> Result<u64, EncodingError> {
        let mut extra = 0u32;
        loop {
            match self.next() {
                None => return Err(EncodingError::Truncated),
                Some(true) => break,
                Some(false) => {
                    extra += 1;
                    if extra > 31 {
                        return Err(EncodingError::FieldRange(field));
                    }
                }
            }
        }
        let mut val = 1u64;
        for _ in 0..extra {
            match self.next() {
                None => return Err(EncodingError::Truncated),
                Some(b) => val = val << 1 | b as u64,
            }
        }
        Ok(val)
    }

    /// Like gamma but for a count field: a claimed count larger than the
    /// digits left cannot be completed, so fail before allocating for it.
    fn count(&mut self, field: &'static str) -> Result<usize, EncodingError> {
        let n = self.gamma(field)? - 1;
        if n > self.remaining() {
            return Err(EncodingError::Truncated);
        }
        Ok(n as usize)
    }
}

fn status_code(s: StateStatus) -> u64 {
    match s {
        StateStatus::Final(None) => 1,
        StateStatus::Final(Some(Side::Left)) => 2,
        StateStatus::Final(Some(Side::Right)) => 3,
        StateStatus::Working => 4,
    }
}

fn move_code(m: Move) -> u64 {
    match m {
        Move::Left => 1,
        Move::Right => 2,
        Move::Stay => 3,
    }
}

/// Position of an input/oracle/emit symbol among blank and the letters.
fn b_rank(alphabet: &Alphabet, c: char) -> u64 {
    if c == alphabet.blank() {
        0
    } else {
        1 + alphabet.letter_index(c).expect("validated tape symbol") as u64
    }
}

pub fn encode(d: &MachineDescription) -> Word {
    debug_assert!(d.validate().is_empty(), "encoding an invalid description");
    let mut w = BitWriter::new();
    w.gamma(d.state_count() as u64);
    w.gamma(d.initial.0 as u64 + 1);
    for &st in &d.statuses {
        w.gamma(status_code(st));
    }
    w.gamma(d.extras.len() as u64 + 1);
    w.gamma(d.initial_work.len() as u64 + 1);
    for &c in &d.initial_work {
        w.gamma(d.symbol_rank(c) as u64 + 1);
    }
    let mut ts = d.transitions.clone();
    ts.sort_by_key(|t| {
        (
            t.key.state,
            d.symbol_rank(t.key.work),
            b_rank(&d.alphabet, t.key.input),
            b_rank(&d.alphabet, t.key.oracle),
        )
    });
    w.gamma(ts.len() as u64 + 1);
    for t in &ts {
        w.gamma(t.key.state.0 as u64 + 1);
        w.gamma(d.symbol_rank(t.key.work) as u64 + 1);
        w.gamma(b_rank(&d.alphabet, t.key.input) + 1);
        w.gamma(b_rank(&d.alphabet, t.key.oracle) + 1);
        w.gamma(t.action.next.0 as u64 + 1);
        w.gamma(d.symbol_rank(t.action.write) as u64 + 1);
        w.gamma(move_code(t.action.work_move));
        w.gamma(move_code(t.action.input_move));
        w.gamma(move_code(t.action.oracle_move));
        w.gamma(match t.action.emit {
            None => 1,
            Some(e) if e == d.alphabet.blank() => 2,
            Some(e) => 3 + d.alphabet.letter_index(e).expect("validated emit") as u64,
        });
    }
    w.into_word(&d.alphabet)
}

/// Deterministic pool of extras glyphs for decoded machines: capital
/// letters, then private-use codepoints, skipping anything already a tape
/// symbol.
fn synth_extras(alphabet: &Alphabet, n: usize) -> Result<Vec<char>, EncodingError> {
    let pool = ('A'..='Z')
        .chain((0xE000u32..=0xF8FF).filter_map(char::from_u32))
        .filter(|&c| !alphabet.is_tape_symbol(c));
    let extras: Vec<char> = pool.take(n).collect();
    if extras.len() < n {
        return Err(EncodingError::FieldRange("extras count"));
    }
    Ok(extras)
}

pub fn decode(alphabet: &Alphabet, w: &Word) -> Result<MachineDescription, EncodingError> {
    let mut r = BitReader::new(alphabet, w)?;
    let k = alphabet.letter_count() as u64;

    let s = r.gamma("state count")?;
    if s > u32::MAX as u64 {
        return Err(EncodingError::FieldRange("state count"));
    }
    let initial_raw = r.gamma("initial state")?;
    if initial_raw > s {
        return Err(EncodingError::FieldRange("initial state"));
    }
    let initial = StateId(initial_raw as u32 - 1);

    if r.remaining() < s {
        return Err(EncodingError::Truncated);
    }
    let mut statuses = Vec::with_capacity(s as usize);
    for _ in 0..s {
        statuses.push(match r.gamma("state status")? {
            1 => StateStatus::Final(None),
            2 => StateStatus::Final(Some(Side::Left)),
            3 => StateStatus::Final(Some(Side::Right)),
            4 => StateStatus::Working,
            _ => return Err(EncodingError::FieldRange("state status")),
        });
    }

    let extras_count = r.gamma("extras count")? - 1;
    let extras = synth_extras(alphabet, extras_count as usize)?;

    let mut work_alpha = vec![alphabet.blank()];
    work_alpha.extend_from_slice(alphabet.letters());
    work_alpha.extend_from_slice(&extras);
    let work_sym = |idx: u64, field: &'static str| -> Result<char, EncodingError> {
        work_alpha
            .get(idx as usize)
            .copied()
            .ok_or(EncodingError::FieldRange(field))
    };
    let b_sym = |idx: u64, field: &'static str| -> Result<char, EncodingError> {
        if idx == 0 {
            Ok(alphabet.blank())
        } else if idx <= k {
            Ok(alphabet.letters()[idx as usize - 1])
        } else {
            Err(EncodingError::FieldRange(field))
        }
    };

    let iw_len = r.count("initial work length")?;
    let mut initial_work = Vec::with_capacity(iw_len);
    for _ in 0..iw_len {
        let idx = r.gamma("initial work symbol")? - 1;
        initial_work.push(work_sym(idx, "initial work symbol")?);
    }

    let t_count = r.count("transition count")?;
    let mut transitions = Vec::with_capacity(t_count);
    let mut prev_key: Option<(u64, u64, u64, u64)> = None;
    for _ in 0..t_count {
        let state_raw = r.gamma("transition state")?;
        if state_raw > s {
            return Err(EncodingError::FieldRange("transition state"));
        }
        let work_idx = r.gamma("transition work symbol")? - 1;
        let input_idx = r.gamma("transition input symbol")? - 1;
        let oracle_idx = r.gamma("transition oracle symbol")? - 1;
        let this_key = (state_raw, work_idx, input_idx, oracle_idx);
        if prev_key.map_or(false, |p| this_key <= p) {
            return Err(EncodingError::UnsortedKeys);
        }
        prev_key = Some(this_key);
        let next_raw = r.gamma("next state")?;
        if next_raw > s {
            return Err(EncodingError::FieldRange("next state"));
        }
        let write_idx = r.gamma("written symbol")? - 1;
        let mut mv = |field: &'static str| -> Result<Move, EncodingError> {
            match r.gamma(field)? {
                1 => Ok(Move::Left),
                2 => Ok(Move::Right),
                3 => Ok(Move::Stay),
                _ => Err(EncodingError::FieldRange(field)),
            }
        };
        let work_move = mv("work move")?;
        let input_move = mv("input move")?;
        let oracle_move = mv("oracle move")?;
        let emit = match r.gamma("emission")? {
            1 => None,
            2 => Some(alphabet.blank()),
            c if c - 3 < k => Some(alphabet.letters()[(c - 3) as usize]),
            _ => return Err(EncodingError::FieldRange("emission")),
        };
        transitions.push(Transition {
            key: TransitionKey {
                state: StateId(state_raw as u32 - 1),
                work: work_sym(work_idx, "transition work symbol")?,
                input: b_sym(input_idx, "transition input symbol")?,
                oracle: b_sym(oracle_idx, "transition oracle symbol")?,
            },
            action: TransitionAction {
                next: StateId(next_raw as u32 - 1),
                write: work_sym(write_idx, "written symbol")?,
                work_move,
                input_move,
                oracle_move,
                emit,
            },
        });
    }

    if r.remaining() > 0 {
        return Err(EncodingError::Trailing);
    }

    MachineDescription {
        alphabet: alphabet.clone(),
        statuses,
        initial,
        extras,
        initial_work,
        transitions,
        name: String::new(),
        state_names: vec![],
    }
    .checked()
    .map_err(|v| EncodingError::Invalid(v.to_string()))
}

pub fn is_valid_encoding(alphabet: &Alphabet, w: &Word) -> bool {
    decode(alphabet, w).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn halt_machine() -> MachineDescription {
        MachineDescription {
            alphabet: Alphabet::ab(),
            statuses: vec![StateStatus::Final(None)],
            initial: StateId(0),
            extras: vec![],
            initial_work: vec![],
            transitions: vec![],
            name: "halt".into(),
            state_names: vec![],
        }
        .checked()
        .unwrap()
    }

    #[test]
    fn halt_machine_is_the_six_digit_word() {
        let d = halt_machine();
        assert_eq!(encode(&d).as_str(), "bbbbbb");
        let back = decode(&Alphabet::ab(), &Alphabet::ab().word("bbbbbb").unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.state_count(), 1);
        assert!(back.is_final(StateId(0)));
    }

    #[test]
    fn gamma_round_trips() {
        let mut w = BitWriter::new();
        let values = [1u64, 2, 3, 4, 5, 7, 8, 100, 1023, 1024];
        for &v in &values {
            w.gamma(v);
        }
        let word = w.into_word(&Alphabet::ab());
        let mut r = BitReader::new(&Alphabet::ab(), &word).unwrap();
        for &v in &values {
            assert_eq!(r.gamma("test").unwrap(), v);
        }
        assert_eq!(r.remaining(), 0);
    }

    #[test]
    fn short_words_are_invalid() {
        let ab = Alphabet::ab();
        for text in ["", "a", "b", "bbbbb", "ab"] {
            assert!(!is_valid_encoding(&ab, &ab.word(text).unwrap()), "{text:?}");
        }
    }

    #[test]
    fn trailing_digits_are_invalid() {
        let ab = Alphabet::ab();
        assert_eq!(
            decode(&ab, &ab.word("bbbbbbb").unwrap()),
            Err(EncodingError::Trailing)
        );
    }

    #[test]
    fn claimed_counts_beyond_the_digits_fail_fast() {
        // State count 2^30 on a tiny word must not allocate.
        let mut w = BitWriter::new();
        w.gamma(1 << 30);
        let word = w.into_word(&Alphabet::ab());
        assert!(matches!(
            decode(&Alphabet::ab(), &word),
            Err(EncodingError::Truncated) | Err(EncodingError::FieldRange(_))
        ));
    }

    #[test]
    fn unsorted_transition_keys_are_rejected() {
        // Hand-build: 1 working state, 2 transitions with descending work
        // symbols.
        let mut w = BitWriter::new();
        w.gamma(1); // state count
        w.gamma(1); // initial
        w.gamma(4); // status: working
        w.gamma(1); // extras
        w.gamma(1); // initial work
        w.gamma(3); // two transitions
        for work_idx in [2u64, 1] {
            w.gamma(1); // state
            w.gamma(work_idx); // key work: second key below the first
            w.gamma(1); // input
            w.gamma(1); // oracle
            w.gamma(1); // next
            w.gamma(1); // write blank
            w.gamma(3); // stay
            w.gamma(3);
            w.gamma(3);
            w.gamma(1); // no emission
        }
        let word = w.into_word(&Alphabet::ab());
        assert_eq!(decode(&Alphabet::ab(), &word), Err(EncodingError::UnsortedKeys));
    }

    #[test]
    fn decoded_machines_synthesize_extras() {
        // Whatever glyph the source used, decode hands back the pool glyph
        // and the machines still compare equal.
        let src = MachineDescription {
            alphabet: Alphabet::ab(),
            statuses: vec![StateStatus::Working, StateStatus::Final(None)],
            initial: StateId(0),
            extras: vec!['M'],
            initial_work: vec!['M'],
            transitions: vec![],
            name: "x".into(),
            state_names: vec![],
        }
        .checked()
        .unwrap();
        let back = decode(&Alphabet::ab(), &encode(&src)).unwrap();
        assert_eq!(back.extras, vec!['A']);
        assert_eq!(back.initial_work, vec!['A']);
        assert_eq!(back, src);
    }

    fn arb_machine() -> impl Strategy<Value = MachineDescription> {
        let ab = Alphabet::ab();
        (1u32..=3, 0usize..=2, any::<u64>()).prop_map(move |(s, extras_count, seed)| {
            // Deterministic pseudo-random fill from the seed; proptest
            // shrinks over (s, extras_count, seed).
            let mut x = seed | 1;
            let mut next = move |m: u64| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 33) % m
            };
            let extras: Vec<char> = ['X', 'Y'][..extras_count].to_vec();
            let mut work: Vec<char> = vec!['_', 'a', 'b'];
            work.extend_from_slice(&extras);
            let b: Vec<char> = vec!['_', 'a', 'b'];
            let statuses: Vec<StateStatus> = (0..s)
                .map(|_| match next(4) {
                    0 => StateStatus::Final(None),
                    1 => StateStatus::Final(Some(Side::Left)),
                    2 => StateStatus::Final(Some(Side::Right)),
                    _ => StateStatus::Working,
                })
                .collect();
            let moves = [Move::Left, Move::Right, Move::Stay];
            let mut keys = std::collections::BTreeSet::new();
            for _ in 0..next(6) {
                let state = StateId(next(s as u64) as u32);
                if statuses[state.0 as usize].is_final() {
                    continue;
                }
                keys.insert(TransitionKey {
                    state,
                    work: work[next(work.len() as u64) as usize],
                    input: b[next(3) as usize],
                    oracle: b[next(3) as usize],
                });
            }
            let transitions: Vec<Transition> = keys
                .into_iter()
                .map(|key| Transition {
                    key,
                    action: TransitionAction {
                        next: StateId(next(s as u64) as u32),
                        write: work[next(work.len() as u64) as usize],
                        work_move: moves[next(3) as usize],
                        input_move: moves[next(3) as usize],
                        oracle_move: moves[next(3) as usize],
                        emit: match next(4) {
                            0 => None,
                            1 => Some('_'),
                            2 => Some('a'),
                            _ => Some('b'),
                        },
                    },
                })
                .collect();
            let initial_work: Vec<char> =
                (0..next(4)).map(|_| work[next(work.len() as u64) as usize]).collect();
            MachineDescription {
                alphabet: ab.clone(),
                statuses,
                initial: StateId(next(s as u64) as u32),
                extras,
                initial_work,
                transitions,
                name: "gen".into(),
                state_names: vec![],
            }
            .checked()
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(d in arb_machine()) {
            let w = encode(&d);
            let back = decode(&Alphabet::ab(), &w).unwrap();
            prop_assert_eq!(&back, &d);
            // And re-encoding the decoded form reproduces the word.
            prop_assert_eq!(encode(&back), w);
        }
    }

    #[test]
    fn validity_is_stable_under_three_letter_alphabets() {
        let abc = Alphabet::new("abc", '_').unwrap();
        let d = MachineDescription {
            alphabet: abc.clone(),
            statuses: vec![StateStatus::Final(None)],
            initial: StateId(0),
            extras: vec![],
            initial_work: vec![],
            transitions: vec![],
            name: "halt3".into(),
            state_names: vec![],
        }
        .checked()
        .unwrap();
        let w = encode(&d);
        assert_eq!(w.as_str(), "bbbbbb");
        assert_eq!(decode(&abc, &w).unwrap(), d);
        // A word using the third letter is never a code.
        assert!(!is_valid_encoding(&abc, &abc.word("cbbbbb").unwrap()));
    }
}

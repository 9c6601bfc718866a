//! Machine descriptions and their validity rules.
//!
//! A description is the finite table interpreted by [`crate::vm`]: a state
//! count, an initial state, a final/nonfinal status per state (finals may
//! carry a Left/Right mark), a work alphabet (tape symbols plus optional
//! extras), the initial work tape content, and a deterministic transition
//! table keyed by (state, work symbol, input symbol, oracle symbol).
//!
//! Equality and hashing cover the semantic fields only. `name` and
//! `state_names` are display metadata: two descriptions that differ only in
//! naming are the same machine, and the canonical encoding cannot preserve
//! names. Extras compare by declaration position for the same reason: the
//! encoding stores their indices, so the glyphs are presentation too.

use crate::words::Alphabet;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Move {
    Left,
    Right,
    Stay,
}

/// Per-state role. Finals take no transitions; a marked final names a side
/// when a machine acts as interrogator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StateStatus {
    Final(Option<Side>),
    Working,
}

impl StateStatus {
    pub fn is_final(self) -> bool {
        matches!(self, StateStatus::Final(_))
    }

    pub fn mark(self) -> Option<Side> {
        match self {
            StateStatus::Final(m) => m,
            StateStatus::Working => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionKey {
    pub state: StateId,
    pub work: char,
    pub input: char,
    pub oracle: char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionAction {
    pub next: StateId,
    pub write: char,
    pub work_move: Move,
    pub input_move: Move,
    pub oracle_move: Move,
    pub emit: Option<char>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub key: TransitionKey,
    pub action: TransitionAction,
}

/// A violated description invariant. An empty violation list means valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoStates,
    InitialOutOfRange(StateId),
    DuplicateWorkSymbol(char),
    ForeignInitialWorkSymbol(char),
    Nondeterministic(TransitionKey),
    TransitionFromFinal(StateId),
    StateOutOfRange(StateId),
    ForeignKeyWork(char),
    ForeignKeyInput(char),
    ForeignKeyOracle(char),
    ForeignWrite(char),
    ForeignEmit(char),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "machine has no states"),
            Violation::InitialOutOfRange(s) => write!(f, "initial state {s} out of range"),
            Violation::DuplicateWorkSymbol(c) => write!(f, "work symbol {c:?} declared twice"),
            Violation::ForeignInitialWorkSymbol(c) => {
                write!(f, "initial work symbol {c:?} not in the work alphabet")
            }
            Violation::Nondeterministic(k) => write!(
                f,
                "nondeterministic: two transitions for state {} on ({:?},{:?},{:?})",
                k.state, k.work, k.input, k.oracle
            ),
            Violation::TransitionFromFinal(s) => write!(f, "transition out of final state {s}"),
            Violation::StateOutOfRange(s) => write!(f, "state {s} out of range"),
            Violation::ForeignKeyWork(c) => write!(f, "key work symbol {c:?} not declared"),
            Violation::ForeignKeyInput(c) => write!(f, "key input symbol {c:?} not a tape symbol"),
            Violation::ForeignKeyOracle(c) => {
                write!(f, "key oracle symbol {c:?} not a tape symbol")
            }
            Violation::ForeignWrite(c) => write!(f, "written symbol {c:?} not declared"),
            Violation::ForeignEmit(c) => write!(f, "emitted symbol {c:?} not a tape symbol"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineDescription {
    pub alphabet: Alphabet,
    /// One status per state; the length is the state count.
    pub statuses: Vec<StateStatus>,
    pub initial: StateId,
    /// Work symbols beyond the letters and the blank, in declaration order.
    pub extras: Vec<char>,
    pub initial_work: Vec<char>,
    /// Declaration order is preserved; identity compares the sorted table.
    pub transitions: Vec<Transition>,
    /// Display only, not part of machine identity.
    pub name: String,
    /// Display only; empty means synthetic q0, q1, ...
    pub state_names: Vec<String>,
}

impl MachineDescription {
    pub fn state_count(&self) -> u32 {
        self.statuses.len() as u32
    }

    pub fn status(&self, s: StateId) -> StateStatus {
        self.statuses[s.0 as usize]
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.status(s).is_final()
    }

    /// Work alphabet in canonical order: blank, letters, extras.
    pub fn work_alphabet(&self) -> Vec<char> {
        let mut w = Vec::with_capacity(1 + self.alphabet.letter_count() + self.extras.len());
        w.push(self.alphabet.blank());
        w.extend_from_slice(self.alphabet.letters());
        w.extend_from_slice(&self.extras);
        w
    }

    pub fn is_work_symbol(&self, c: char) -> bool {
        self.alphabet.is_tape_symbol(c) || self.extras.contains(&c)
    }

    pub fn state_name(&self, s: StateId) -> String {
        self.state_names
            .get(s.0 as usize)
            .cloned()
            .unwrap_or_else(|| format!("q{}", s.0))
    }

    /// Position of a work symbol in the canonical work alphabet order
    /// (blank, letters, extras). Foreign symbols rank past every declared
    /// one so invalid machines still compare consistently.
    pub fn symbol_rank(&self, c: char) -> u32 {
        match self.work_alphabet().iter().position(|&w| w == c) {
            Some(i) => i as u32,
            None => 0x0011_0000 + c as u32,
        }
    }

    fn canonical_transitions(&self) -> Vec<CanonTransition> {
        let mut t: Vec<CanonTransition> = self
            .transitions
            .iter()
            .map(|tr| {
                (
                    tr.key.state,
                    self.symbol_rank(tr.key.work),
                    tr.key.input,
                    tr.key.oracle,
                    tr.action.next,
                    self.symbol_rank(tr.action.write),
                    tr.action.work_move,
                    tr.action.input_move,
                    tr.action.oracle_move,
                    tr.action.emit,
                )
            })
            .collect();
        t.sort();
        t
    }

    fn canonical_initial_work(&self) -> Vec<u32> {
        self.initial_work.iter().map(|&c| self.symbol_rank(c)).collect()
    }

    /// All violated invariants, in table order; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.statuses.len() as u32;
        if n == 0 {
            out.push(Violation::NoStates);
            return out;
        }
        if self.initial.0 >= n {
            out.push(Violation::InitialOutOfRange(self.initial));
        }
        let mut seen = BTreeSet::new();
        for &c in &self.extras {
            if self.alphabet.is_tape_symbol(c) || !seen.insert(c) {
                out.push(Violation::DuplicateWorkSymbol(c));
            }
        }
        for &c in &self.initial_work {
            if !self.is_work_symbol(c) {
                out.push(Violation::ForeignInitialWorkSymbol(c));
            }
        }
        let mut keys = BTreeSet::new();
        for t in &self.transitions {
            let k = &t.key;
            if !keys.insert(*k) {
                out.push(Violation::Nondeterministic(*k));
            }
            if k.state.0 >= n {
                out.push(Violation::StateOutOfRange(k.state));
            } else if self.is_final(k.state) {
                out.push(Violation::TransitionFromFinal(k.state));
            }
            if !self.is_work_symbol(k.work) {
                out.push(Violation::ForeignKeyWork(k.work));
            }
            if !self.alphabet.is_tape_symbol(k.input) {
                out.push(Violation::ForeignKeyInput(k.input));
            }
            if !self.alphabet.is_tape_symbol(k.oracle) {
                out.push(Violation::ForeignKeyOracle(k.oracle));
            }
            let a = &t.action;
            if a.next.0 >= n {
                out.push(Violation::StateOutOfRange(a.next));
            }
            if !self.is_work_symbol(a.write) {
                out.push(Violation::ForeignWrite(a.write));
            }
            if let Some(e) = a.emit {
                if !self.alphabet.is_tape_symbol(e) {
                    out.push(Violation::ForeignEmit(e));
                }
            }
        }
        out
    }

    /// Errors with the first violation, for call sites that need a machine.
    pub fn checked(self) -> Result<Self, Violation> {
        match self.validate().into_iter().next() {
            None => Ok(self),
            Some(v) => Err(v),
        }
    }
}

type CanonTransition =
    (StateId, u32, char, char, StateId, u32, Move, Move, Move, Option<char>);

impl PartialEq for MachineDescription {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet
            && self.statuses == other.statuses
            && self.initial == other.initial
            && self.extras.len() == other.extras.len()
            && self.canonical_initial_work() == other.canonical_initial_work()
            && self.canonical_transitions() == other.canonical_transitions()
    }
}

impl Eq for MachineDescription {}

impl Hash for MachineDescription {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.alphabet.hash(state);
        self.statuses.hash(state);
        self.initial.hash(state);
        self.extras.len().hash(state);
        self.canonical_initial_work().hash(state);
        self.canonical_transitions().hash(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank_desc(states: usize) -> MachineDescription {
        MachineDescription {
            alphabet: Alphabet::ab(),
            statuses: vec![StateStatus::Working; states],
            initial: StateId(0),
            extras: vec![],
            initial_work: vec![],
            transitions: vec![],
            name: "t".into(),
            state_names: vec![],
        }
    }

    fn step(state: u32, work: char, next: u32) -> Transition {
        Transition {
            key: TransitionKey { state: StateId(state), work, input: '_', oracle: '_' },
            action: TransitionAction {
                next: StateId(next),
                write: work,
                work_move: Move::Stay,
                input_move: Move::Stay,
                oracle_move: Move::Stay,
                emit: None,
            },
        }
    }

    #[test]
    fn empty_machine_is_invalid() {
        assert_eq!(blank_desc(0).validate(), vec![Violation::NoStates]);
    }

    #[test]
    fn duplicate_key_reports_nondeterminism() {
        let mut d = blank_desc(1);
        d.transitions = vec![step(0, '_', 0), step(0, '_', 0)];
        assert!(d
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::Nondeterministic(_))));
    }

    #[test]
    fn finals_take_no_transitions() {
        let mut d = blank_desc(1);
        d.statuses = vec![StateStatus::Final(None)];
        d.transitions = vec![step(0, '_', 0)];
        assert_eq!(d.validate(), vec![Violation::TransitionFromFinal(StateId(0))]);
    }

    #[test]
    fn out_of_range_references_are_caught() {
        let mut d = blank_desc(1);
        d.initial = StateId(3);
        d.transitions = vec![step(0, '_', 2)];
        let vs = d.validate();
        assert!(vs.contains(&Violation::InitialOutOfRange(StateId(3))));
        assert!(vs.contains(&Violation::StateOutOfRange(StateId(2))));
    }

    #[test]
    fn foreign_symbols_are_caught() {
        let mut d = blank_desc(1);
        d.initial_work = vec!['z'];
        d.transitions = vec![step(0, 'z', 0)];
        let vs = d.validate();
        assert!(vs.contains(&Violation::ForeignInitialWorkSymbol('z')));
        assert!(vs.contains(&Violation::ForeignKeyWork('z')));
    }

    #[test]
    fn identity_ignores_names_and_transition_order() {
        let mut a = blank_desc(2);
        a.transitions = vec![step(0, '_', 1), step(0, 'a', 0)];
        let mut b = a.clone();
        b.name = "other".into();
        b.state_names = vec!["start".into(), "next".into()];
        b.transitions.reverse();
        assert_eq!(a, b);
        b.transitions[0].action.emit = Some('a');
        assert_ne!(a, b);
    }

    #[test]
    fn identity_treats_extras_positionally() {
        let mut a = blank_desc(1);
        a.extras = vec!['X'];
        a.initial_work = vec!['X'];
        a.transitions = vec![step(0, 'X', 0)];
        let mut b = a.clone();
        b.extras = vec!['Y'];
        b.initial_work = vec!['Y'];
        b.transitions = vec![step(0, 'Y', 0)];
        assert_eq!(a, b);
        // A second extra in front shifts positions, so it differs.
        let mut c = a.clone();
        c.extras = vec!['W', 'X'];
        assert_ne!(a, c);
    }
}

//! Oracle tapes.
//!
//! An oracle is a read-only one-sided tape over the letters-plus-blank
//! alphabet. Three kinds live here: the blank tape, a random tape with
//! i.i.d. cells, and a bounded recognition oracle backed by a finite
//! machine universe plus optional halting certificates.

use crate::machine::MachineDescription;
use crate::vm::{self, RunBudget};
use crate::words::{Alphabet, BWord, Word};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub trait Oracle: Send + Sync + fmt::Debug {
    /// Symbol in `cell`; must return the same symbol on every call.
    fn read(&self, cell: u64) -> char;
    /// Short human-readable tag for run reports.
    fn label(&self) -> String;
    /// True only for the all-blank tape.
    fn is_blank(&self) -> bool {
        false
    }
}

/// The all-blank tape. A machine run over it behaves exactly as if the
/// oracle tape were absent.
#[derive(Debug, Clone)]
pub struct BlankOracle {
    blank: char,
}

impl Oracle for BlankOracle {
    fn read(&self, _cell: u64) -> char {
        self.blank
    }

    fn label(&self) -> String {
        "blank".into()
    }

    fn is_blank(&self) -> bool {
        true
    }
}

pub fn blank_oracle(alphabet: &Alphabet) -> Arc<dyn Oracle> {
    Arc::new(BlankOracle { blank: alphabet.blank() })
}

/// Tape of i.i.d. bits, rendered as the first two letters. Cell values are
/// a pure function of (seed, cell): each cell gets its own ChaCha stream,
/// so reads are idempotent and order independent without a memo table.
#[derive(Debug, Clone)]
pub struct RandomOracle {
    alphabet: Alphabet,
    p0: f64,
    seed: u64,
}

impl RandomOracle {
    pub fn new(alphabet: &Alphabet, p0: f64, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&p0), "p0 must be a probability");
        RandomOracle { alphabet: alphabet.clone(), p0, seed }
    }

    /// Bit in `cell`: 0 with probability `p0`, independent across cells.
    pub fn bit(&self, cell: u64) -> u8 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(cell);
        if rng.gen::<f64>() < self.p0 {
            0
        } else {
            1
        }
    }

    /// The n-th symbol, 1-based: symbol(n) reads cell n - 1.
    pub fn symbol(&self, n: u64) -> u8 {
        assert!(n >= 1, "symbols are 1-based");
        self.bit(n - 1)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
}

impl Oracle for RandomOracle {
    fn read(&self, cell: u64) -> char {
        self.alphabet.letters()[self.bit(cell) as usize]
    }

    fn label(&self) -> String {
        format!("random(p0={}, seed={})", self.p0, self.seed)
    }
}

pub fn random_oracle(alphabet: &Alphabet, p0: f64, seed: u64) -> Arc<dyn Oracle> {
    Arc::new(RandomOracle::new(alphabet, p0, seed))
}

/// One externally supplied halting fact, overriding simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaltCertificate {
    pub machine: String,
    pub question: String,
    pub halts: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Parses a JSON-lines certificate file; blank lines are skipped.
pub fn parse_certificates(text: &str) -> Result<Vec<HaltCertificate>, serde_json::Error> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Computable stand-in for the recognition oracle: it knows a finite
/// machine universe and answers halting questions by certificate when one
/// exists and by bounded simulation otherwise. Answers are budget relative;
/// a small budget can turn a true "yes" into "no", which callers must
/// surface, never hide.
#[derive(Debug, Clone)]
pub struct BoundedPi {
    alphabet: Alphabet,
    universe: Vec<Arc<MachineDescription>>,
    budget: RunBudget,
    certificates: HashMap<(String, String), HaltCertificate>,
}

impl BoundedPi {
    pub fn new(
        alphabet: &Alphabet,
        universe: Vec<Arc<MachineDescription>>,
        budget: RunBudget,
    ) -> Self {
        BoundedPi {
            alphabet: alphabet.clone(),
            universe,
            budget,
            certificates: HashMap::new(),
        }
    }

    pub fn with_certificates(
        mut self,
        certs: impl IntoIterator<Item = HaltCertificate>,
    ) -> Self {
        for c in certs {
            self.certificates.insert((c.machine.clone(), c.question.clone()), c);
        }
        self
    }

    pub fn universe(&self) -> &[Arc<MachineDescription>] {
        &self.universe
    }

    pub fn budget(&self) -> RunBudget {
        self.budget
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn certificate(&self, machine: &str, question: &str) -> Option<&HaltCertificate> {
        self.certificates.get(&(machine.to_string(), question.to_string()))
    }

    /// Does `m` answer the question `n_enc` at all? Pure in (m, n_enc):
    /// the universe only matters for the tape view.
    pub fn query(&self, m: &Arc<MachineDescription>, n_enc: &Word) -> bool {
        if let Some(cert) = self.certificate(&m.name, n_enc.as_str()) {
            return cert.halts;
        }
        let oracle = blank_oracle(&m.alphabet);
        vm::recognizes(m, &oracle, &BWord::from(n_enc), self.budget)
    }

    /// Exact cycle count of `m` answering `q`, None if it does not answer.
    /// A certificate is trusted when it carries a count; otherwise, within
    /// the budget, simulation decides.
    pub fn answer_cycles(&self, m: &Arc<MachineDescription>, q: &Word) -> Option<u64> {
        if let Some(cert) = self.certificate(&m.name, q.as_str()) {
            match (cert.halts, cert.cycles) {
                (false, _) => return None,
                (true, Some(t)) => return Some(t),
                (true, None) => {}
            }
        }
        let oracle = blank_oracle(&m.alphabet);
        vm::answer_cycles(m, &oracle, &BWord::from(q), self.budget)
    }

    /// All recognizing pairs in the universe, as (recognizer, recognized)
    /// encoding pairs in ascending pair order.
    fn recognizing_pairs(&self) -> Vec<(Word, Word)> {
        let encoded: Vec<(Word, &Arc<MachineDescription>)> = self
            .universe
            .iter()
            .map(|m| (crate::encoding::encode(m), m))
            .collect();
        let mut pairs = Vec::new();
        for (em, m) in &encoded {
            for (en, _) in &encoded {
                if self.query(m, en) {
                    pairs.push((em.clone(), en.clone()));
                }
            }
        }
        pairs.sort_by(|(a1, a2), (b1, b2)| {
            self.alphabet
                .shortlex_cmp(a1, b1)
                .then_with(|| self.alphabet.shortlex_cmp(a2, b2))
        });
        pairs
    }

    fn tape_cells(&self) -> Vec<char> {
        let blank = self.alphabet.blank();
        let mut cells = Vec::new();
        for (em, en) in self.recognizing_pairs() {
            cells.extend(em.chars());
            cells.push(blank);
            cells.extend(en.chars());
            cells.push(blank);
        }
        cells
    }

    /// First `len` cells of the tape view: the recognizing pairs laid out
    /// as encode(M) blank encode(N) blank blocks, blank beyond the last.
    pub fn tape_prefix(&self, len: usize) -> BWord {
        let blank = self.alphabet.blank();
        let mut cells = self.tape_cells();
        cells.resize(len, blank);
        cells.truncate(len);
        self.alphabet
            .bword(&cells.into_iter().collect::<String>())
            .expect("tape cells are over the machine alphabet")
    }

    /// Freezes the tape view as an oracle for machines that read it.
    pub fn tape_oracle(&self) -> Arc<dyn Oracle> {
        Arc::new(PiTapeOracle {
            cells: self.tape_cells(),
            blank: self.alphabet.blank(),
            label: format!(
                "pi(universe={}, budget={})",
                self.universe.len(),
                self.budget.0
            ),
        })
    }
}

#[derive(Debug)]
struct PiTapeOracle {
    cells: Vec<char>,
    blank: char,
    label: String,
}

impl Oracle for PiTapeOracle {
    fn read(&self, cell: u64) -> char {
        usize::try_from(cell)
            .ok()
            .and_then(|i| self.cells.get(i).copied())
            .unwrap_or(self.blank)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

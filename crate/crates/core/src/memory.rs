//! Memory-bounded machine classes.
//!
//! A class fixes an alphabet and three bounds: at most `states` states, at
//! most `initial_work` preloaded work cells, no private work symbols, and a
//! scanned work segment of at most `segment` cells. Within such a class the
//! interesting questions become decidable by watching a run: a machine that
//! ever scans past the segment bound is out, and with the segment bounded
//! the whole configuration space is finite, so on the empty-question
//! session every machine either repeats a configuration inside one question
//! (it will never answer), gets stuck, or halts; and once a post-answer
//! configuration repeats across questions the answer stream is periodic
//! forever. The observation loop below turns that into a terminating
//! classifier, and the survivors feed a pair of enumerators.

use crate::encoding;
use crate::enumerate::{encodings_of_length_bounded, Enumerator, GenBounds, RunnableItem};
use crate::machine::{
    MachineDescription, Move, StateId, StateStatus, Transition, TransitionAction, TransitionKey,
};
use crate::oracle::blank_oracle;
use crate::vm::{MachineInstance, RunBudget, StepEvent};
use crate::words::{Alphabet, BWord, Word};
use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::collections::{HashSet, VecDeque};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassParams {
    /// Max state count, >= 1.
    pub states: u64,
    /// Max preloaded work cells.
    pub initial_work: u64,
    /// Max scanned work segment over a whole session, >= 1.
    pub segment: u64,
}

#[derive(Debug, Error)]
pub enum MemoryClassError {
    #[error("class parameters are out of range: states and segment must be >= 1")]
    BadParams,
    #[error(
        "per-question configuration space for {params:?} holds about {space} states, \
         over the cap of {cap}"
    )]
    SizeCapExceeded { params: ClassParams, space: BigUint, cap: u64 },
}

/// What the observation loop saw for one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Observation {
    /// Post-answer configuration repeated: the machine answers the whole
    /// empty-question session, every question within `cycles_max` cycles.
    Accepted { questions: u64, cycles_max: u64 },
    /// Scanned segment outgrew the bound.
    RejectedSegment { question: u64 },
    /// A configuration repeated inside one question: it will never answer.
    RejectedLoop { question: u64 },
    /// No transition applied in a non-final state.
    RejectedStuck { question: u64 },
}

impl Observation {
    pub fn accepted(&self) -> bool {
        matches!(self, Observation::Accepted { .. })
    }
}

struct Survivor {
    desc: Arc<MachineDescription>,
    cycles_max: u64,
}

struct PipeState {
    next_len: usize,
    queue: VecDeque<Word>,
    scanned: u64,
    survivors: Vec<Survivor>,
}

pub struct MemoryClass {
    alphabet: Alphabet,
    params: ClassParams,
    n_bound: BigUint,
    max_encoding_len: usize,
    state: Mutex<PipeState>,
}

impl std::fmt::Debug for MemoryClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoryClass").field("params", &self.params).finish_non_exhaustive()
    }
}

/// Default cap on the per-question configuration space.
pub const DEFAULT_SPACE_CAP: u64 = 10_000_000;

/// Candidates scanned per survivor request before giving up. The classes
/// are finite but astronomically large; requests that deep are a bug in
/// the caller, not a reason to spin for hours.
const SCAN_CAP: u64 = 200_000;

pub fn memory_class_enum(
    alphabet: &Alphabet,
    params: ClassParams,
) -> Result<Arc<MemoryClass>, MemoryClassError> {
    memory_class_enum_capped(alphabet, params, DEFAULT_SPACE_CAP)
}

pub fn memory_class_enum_capped(
    alphabet: &Alphabet,
    params: ClassParams,
    space_cap: u64,
) -> Result<Arc<MemoryClass>, MemoryClassError> {
    if params.states == 0 || params.segment == 0 {
        return Err(MemoryClassError::BadParams);
    }
    let w_syms = 1 + alphabet.letter_count() as u64;
    // states x head positions x segment fills, the space the loop detector
    // may have to visit for a single question.
    let space = BigUint::from(params.states)
        * BigUint::from(params.segment + 1)
        * BigUint::from(w_syms).pow(params.segment as u32);
    if space > BigUint::from(space_cap) {
        return Err(MemoryClassError::SizeCapExceeded { params, space, cap: space_cap });
    }

    let maximal = maximal_member(alphabet, params);
    let max_encoding_len = encoding::encode(&maximal).len();
    // Every member's encoding fits in max_encoding_len digits, so its rank
    // in the all-machine enumeration is at most the number of nonempty
    // words of that length or shorter: 2^(len+1) - 2.
    let n_bound = (BigUint::one() << (max_encoding_len + 1)) - 2u32;

    Ok(Arc::new(MemoryClass {
        alphabet: alphabet.clone(),
        params,
        n_bound,
        max_encoding_len,
        state: Mutex::new(PipeState {
            next_len: 1,
            queue: VecDeque::new(),
            scanned: 0,
            survivors: Vec::new(),
        }),
    }))
}

/// The member whose encoding is longest: all states working (the longest
/// status code, and the fullest transition table), every field at its
/// largest codable value.
fn maximal_member(alphabet: &Alphabet, params: ClassParams) -> MachineDescription {
    let s = params.states as u32;
    let top = *alphabet.letters().last().expect("alphabet has letters");
    let mut b_syms = vec![alphabet.blank()];
    b_syms.extend_from_slice(alphabet.letters());
    let mut transitions = Vec::new();
    for st in 0..s {
        for &work in &b_syms {
            for &input in &b_syms {
                for &oracle in &b_syms {
                    transitions.push(Transition {
                        key: TransitionKey { state: StateId(st), work, input, oracle },
                        action: TransitionAction {
                            next: StateId(s - 1),
                            write: top,
                            work_move: Move::Stay,
                            input_move: Move::Stay,
                            oracle_move: Move::Stay,
                            emit: Some(top),
                        },
                    });
                }
            }
        }
    }
    MachineDescription {
        alphabet: alphabet.clone(),
        statuses: vec![StateStatus::Working; s as usize],
        initial: StateId(s - 1),
        extras: vec![],
        initial_work: vec![top; params.initial_work as usize],
        transitions,
        name: "maximal".into(),
        state_names: vec![],
    }
}

fn halt_machine(alphabet: &Alphabet) -> Arc<MachineDescription> {
    Arc::new(MachineDescription {
        alphabet: alphabet.clone(),
        statuses: vec![StateStatus::Final(None)],
        initial: StateId(0),
        extras: vec![],
        initial_work: vec![],
        transitions: vec![],
        name: "halt".into(),
        state_names: vec![],
    })
}

impl MemoryClass {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn params(&self) -> ClassParams {
        self.params
    }

    /// Index bound: every member sits within the first `n_bound` machines
    /// of the all-machine enumeration.
    pub fn n_bound(&self) -> &BigUint {
        &self.n_bound
    }

    /// Digit count of the longest member encoding.
    pub fn max_encoding_len(&self) -> usize {
        self.max_encoding_len
    }

    /// Exact number of member machines.
    pub fn class_count(&self) -> BigUint {
        let k = self.alphabet.letter_count() as u64;
        let w = BigUint::from(1 + k);
        let mut total = BigUint::ZERO;
        for s in 1..=self.params.states {
            // Action choices for one present key.
            let actions = BigUint::from(s) * &w * 27u32 * (k + 2);
            let per_key = actions + 1u32; // absent or one of the actions
            let mut tables = BigUint::ZERO;
            for m in 0..=s {
                // m working states (4th status), the rest one of 3 final
                // statuses; only working states contribute key slots.
                let keys = m * (1 + k) * (k + 1) * (k + 1);
                tables += binomial(s, m) * BigUint::from(3u32).pow((s - m) as u32)
                    * per_key.pow(keys as u32);
            }
            let mut iw = BigUint::ZERO;
            for l in 0..=self.params.initial_work {
                iw += w.pow(l as u32);
            }
            total += BigUint::from(s) * tables * iw;
        }
        total
    }

    pub fn is_member(&self, d: &MachineDescription) -> bool {
        d.alphabet == self.alphabet
            && d.state_count() as u64 <= self.params.states
            && d.extras.is_empty()
            && d.initial_work.len() as u64 <= self.params.initial_work
    }

    /// First `count` member encodings in enumeration order.
    pub fn candidates(&self, count: usize) -> Vec<Word> {
        let bounds = GenBounds {
            max_states: self.params.states,
            max_extras: 0,
            max_initial_work: self.params.initial_work,
        };
        let mut out = Vec::with_capacity(count);
        let mut len = 1;
        while out.len() < count && len <= self.max_encoding_len {
            out.extend(encodings_of_length_bounded(&self.alphabet, len, bounds));
            len += 1;
        }
        out.truncate(count);
        out
    }

    /// Runs the empty-question observation loop on one machine. Always
    /// terminates when the machine is a member: the segment bound makes the
    /// reachable configuration space finite.
    pub fn observe(&self, desc: &Arc<MachineDescription>) -> Observation {
        let mut inst = MachineInstance::new(Arc::clone(desc), blank_oracle(&self.alphabet));
        let mut post_snaps = HashSet::new();
        let mut cycles_max = 0u64;
        let mut question = 0u64;
        loop {
            question += 1;
            inst.begin_question(&BWord::lambda());
            let mut seen = HashSet::new();
            let mut cycles = 0u64;
            loop {
                if inst.scanned_segment_len() > self.params.segment {
                    return Observation::RejectedSegment { question };
                }
                if !seen.insert(inst.config_snapshot()) {
                    return Observation::RejectedLoop { question };
                }
                match inst.step() {
                    StepEvent::Halted { .. } => break,
                    StepEvent::Stuck => return Observation::RejectedStuck { question },
                    StepEvent::Stepped => cycles += 1,
                }
            }
            cycles_max = cycles_max.max(cycles);
            if !post_snaps.insert(inst.config_snapshot()) {
                return Observation::Accepted { questions: question, cycles_max };
            }
        }
    }

    fn ensure_survivors(&self, st: &mut PipeState, n: u64) {
        let bounds = GenBounds {
            max_states: self.params.states,
            max_extras: 0,
            max_initial_work: self.params.initial_work,
        };
        while (st.survivors.len() as u64) < n {
            let word = loop {
                if let Some(w) = st.queue.pop_front() {
                    break w;
                }
                if st.next_len > self.max_encoding_len {
                    return; // class exhausted; survivor() pads
                }
                let len = st.next_len;
                st.next_len += 1;
                st.queue.extend(encodings_of_length_bounded(&self.alphabet, len, bounds));
            };
            st.scanned += 1;
            assert!(
                st.scanned <= SCAN_CAP,
                "scanned {} candidates of the {:?} class without finding {} survivors",
                st.scanned,
                self.params,
                n,
            );
            let desc = Arc::new(
                encoding::decode(&self.alphabet, &word).expect("candidate failed to decode"),
            );
            if let Observation::Accepted { cycles_max, .. } = self.observe(&desc) {
                let mut named = (*desc).clone();
                named.name = format!("R{}", st.survivors.len() + 1);
                st.survivors.push(Survivor { desc: Arc::new(named), cycles_max });
            }
        }
    }

    /// n-th survivor, 1-based; past the last survivor the list is padded
    /// with the one-state halting machine, itself a member that answers
    /// every question.
    pub fn survivor(&self, n: u64) -> (Arc<MachineDescription>, RunBudget) {
        assert!(n >= 1, "survivors are 1-based");
        let mut st = self.state.lock().unwrap();
        self.ensure_survivors(&mut st, n);
        match st.survivors.get(n as usize - 1) {
            Some(s) => (Arc::clone(&s.desc), RunBudget(s.cycles_max)),
            None => (halt_machine(&self.alphabet), RunBudget(0)),
        }
    }

    pub fn r_enum(self: &Arc<Self>) -> Arc<dyn Enumerator> {
        Arc::new(SurvivorEnum { class: Arc::clone(self) })
    }

    pub fn generator_enum(self: &Arc<Self>) -> Arc<dyn Enumerator> {
        Arc::new(GeneratorEnum { class: Arc::clone(self) })
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut out = BigUint::one();
    for i in 0..k.min(n - k) {
        out = out * (n - i) / (i + 1);
    }
    out
}

/// The survivors themselves, halt-padded.
struct SurvivorEnum {
    class: Arc<MemoryClass>,
}

impl Enumerator for SurvivorEnum {
    fn item(&self, n: u64) -> RunnableItem {
        RunnableItem::Plain(self.class.survivor(n).0)
    }

    fn label(&self) -> String {
        let p = self.class.params;
        format!("survivors({},{},{})", p.states, p.initial_work, p.segment)
    }
}

/// Generator view: entry n serves survivor n's answers for the first
/// `n_bound` questions and the empty word beyond; entries past `n_bound`
/// answer the empty word outright. The per-survivor budget is certified by
/// observation: the answer stream is periodic with every period witnessed,
/// so the observed cycle maximum bounds all questions.
struct GeneratorEnum {
    class: Arc<MemoryClass>,
}

impl Enumerator for GeneratorEnum {
    fn item(&self, n: u64) -> RunnableItem {
        if &BigUint::from(n) > self.class.n_bound() {
            return RunnableItem::AllLambda;
        }
        let (desc, budget) = self.class.survivor(n);
        RunnableItem::LambdaWindow { base: desc, budget, horizon: self.class.n_bound().clone() }
    }

    fn label(&self) -> String {
        let p = self.class.params;
        format!("memory-gen({},{},{})", p.states, p.initial_work, p.segment)
    }
}

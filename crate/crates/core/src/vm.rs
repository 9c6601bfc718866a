//! The machine interpreter.
//!
//! An instance owns four tapes. The work tape is two-way infinite and is the
//! only thing that survives between questions. The input tape holds the
//! current question and is read-only; the oracle tape is read-only and
//! served by an [`Oracle`]; the output tape is append-only. The one-sided
//! heads clamp at cell zero on a left move.
//!
//! Posing a question resets the control state to the initial state, installs
//! the question on a fresh input tape, clears the output tape, and rewinds
//! the input and oracle heads. The machine then runs until it sits in a
//! final state; the maximal letter prefix of the output tape is the answer.
//! A missing transition is a stuck divergence, an exhausted cycle budget a
//! budget divergence.

use crate::machine::{MachineDescription, Move, Side, StateId, TransitionAction, TransitionKey};
use crate::oracle::Oracle;
use crate::words::{BWord, Word};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::Arc;

/// Maximum machine cycles a single question may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunBudget(pub u64);

impl RunBudget {
    pub fn cycles(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergeReason {
    /// No transition for the current (state, work, input, oracle) reading.
    Stuck,
    /// The per-question cycle budget ran out.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuestionOutcome {
    Answered { answer: Word, cycles: u64, mark: Option<Side> },
    Diverged { reason: DivergeReason, cycles: u64 },
}

impl QuestionOutcome {
    pub fn answer(&self) -> Option<&Word> {
        match self {
            QuestionOutcome::Answered { answer, .. } => Some(answer),
            QuestionOutcome::Diverged { .. } => None,
        }
    }
}

/// One observable step result; used by callers that instrument runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    Stepped,
    Halted { mark: Option<Side> },
    Stuck,
}

/// Work tape configuration, hashable for repetition detection. The head
/// position is relative to the captured window, so the snapshot is
/// translation invariant. Input head and output are deliberately excluded:
/// on an all-blank input tape they cannot influence future steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConfigSnapshot {
    pub state: StateId,
    pub head_offset: i64,
    pub segment: String,
}

#[derive(Debug, Clone)]
pub struct MachineInstance {
    desc: Arc<MachineDescription>,
    oracle: Arc<dyn Oracle>,
    table: Arc<HashMap<TransitionKey, TransitionAction>>,
    state: StateId,
    work: BTreeMap<i64, char>,
    work_head: i64,
    scan_min: i64,
    scan_max: i64,
    input: Vec<char>,
    input_head: usize,
    oracle_head: u64,
    output: Vec<char>,
    cycles_total: u64,
    cycles_question: u64,
}

impl MachineInstance {
    /// Fresh instance: initial work content at cells 0.., head on cell 0.
    /// The description must be valid.
    pub fn new(desc: Arc<MachineDescription>, oracle: Arc<dyn Oracle>) -> Self {
        debug_assert!(desc.validate().is_empty(), "instance over invalid description");
        let table: HashMap<_, _> = desc.transitions.iter().map(|t| (t.key, t.action)).collect();
        let blank = desc.alphabet.blank();
        let work: BTreeMap<i64, char> = desc
            .initial_work
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != blank)
            .map(|(i, &c)| (i as i64, c))
            .collect();
        MachineInstance {
            state: desc.initial,
            table: Arc::new(table),
            oracle,
            work,
            work_head: 0,
            scan_min: 0,
            scan_max: 0,
            input: Vec::new(),
            input_head: 0,
            oracle_head: 0,
            output: Vec::new(),
            cycles_total: 0,
            cycles_question: 0,
            desc,
        }
    }

    pub fn description(&self) -> &Arc<MachineDescription> {
        &self.desc
    }

    fn blank(&self) -> char {
        self.desc.alphabet.blank()
    }

    fn read_work(&self) -> char {
        *self.work.get(&self.work_head).unwrap_or(&self.blank())
    }

    fn read_input(&self) -> char {
        *self.input.get(self.input_head).unwrap_or(&self.blank())
    }

    /// Installs a question; the work tape and its head stay as they are.
    pub fn begin_question(&mut self, q: &BWord) {
        self.state = self.desc.initial;
        self.input = q.chars().collect();
        self.input_head = 0;
        self.oracle_head = 0;
        self.output.clear();
        self.cycles_question = 0;
    }

    /// One machine cycle; final states and missing transitions end the run.
    pub fn step(&mut self) -> StepEvent {
        if let crate::machine::StateStatus::Final(mark) = self.desc.status(self.state) {
            return StepEvent::Halted { mark };
        }
        let key = TransitionKey {
            state: self.state,
            work: self.read_work(),
            input: self.read_input(),
            oracle: self.oracle.read(self.oracle_head),
        };
        let Some(action) = self.table.get(&key).copied() else {
            return StepEvent::Stuck;
        };
        if action.write == self.blank() {
            self.work.remove(&self.work_head);
        } else {
            self.work.insert(self.work_head, action.write);
        }
        match action.work_move {
            Move::Left => self.work_head -= 1,
            Move::Right => self.work_head += 1,
            Move::Stay => {}
        }
        self.scan_min = self.scan_min.min(self.work_head);
        self.scan_max = self.scan_max.max(self.work_head);
        match action.input_move {
            Move::Left => self.input_head = self.input_head.saturating_sub(1),
            Move::Right => self.input_head += 1,
            Move::Stay => {}
        }
        match action.oracle_move {
            Move::Left => self.oracle_head = self.oracle_head.saturating_sub(1),
            Move::Right => self.oracle_head += 1,
            Move::Stay => {}
        }
        if let Some(e) = action.emit {
            self.output.push(e);
        }
        self.state = action.next;
        self.cycles_total += 1;
        self.cycles_question += 1;
        StepEvent::Stepped
    }

    /// Runs one full question under a budget.
    pub fn pose_question(&mut self, q: &BWord, budget: RunBudget) -> QuestionOutcome {
        self.begin_question(q);
        loop {
            match self.step() {
                StepEvent::Halted { mark } => {
                    return QuestionOutcome::Answered {
                        answer: self.answer_from_output(),
                        cycles: self.cycles_question,
                        mark,
                    }
                }
                StepEvent::Stuck => {
                    return QuestionOutcome::Diverged {
                        reason: DivergeReason::Stuck,
                        cycles: self.cycles_question,
                    }
                }
                StepEvent::Stepped => {
                    if self.cycles_question >= budget.0 && !self.desc.is_final(self.state) {
                        return QuestionOutcome::Diverged {
                            reason: DivergeReason::BudgetExhausted,
                            cycles: self.cycles_question,
                        };
                    }
                }
            }
        }
    }

    /// Maximal letter prefix of the output tape.
    pub fn answer_from_output(&self) -> Word {
        let prefix: String = self
            .output
            .iter()
            .take_while(|&&c| self.desc.alphabet.is_letter(c))
            .collect();
        self.desc.alphabet.word(&prefix).expect("output prefix is over the letters")
    }

    /// Cells the work head has visited, including the starting cell.
    pub fn scanned_segment_len(&self) -> u64 {
        (self.scan_max - self.scan_min + 1) as u64
    }

    pub fn cycles_total(&self) -> u64 {
        self.cycles_total
    }

    pub fn cycles_question(&self) -> u64 {
        self.cycles_question
    }

    pub fn config_snapshot(&self) -> ConfigSnapshot {
        let blank = self.blank();
        let segment: String = (self.scan_min..=self.scan_max)
            .map(|i| *self.work.get(&i).unwrap_or(&blank))
            .collect();
        ConfigSnapshot {
            state: self.state,
            head_offset: self.work_head - self.scan_min,
            segment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub answers: Vec<Word>,
    /// 1-based index and reason of the first diverging question, if any.
    pub diverged: Option<(u64, DivergeReason)>,
}

/// Poses the questions in order on one persistent instance, stopping at the
/// first divergence.
pub fn run_session(
    desc: &Arc<MachineDescription>,
    oracle: &Arc<dyn Oracle>,
    questions: &[BWord],
    budget: RunBudget,
) -> SessionOutcome {
    let mut inst = MachineInstance::new(Arc::clone(desc), Arc::clone(oracle));
    let mut answers = Vec::with_capacity(questions.len());
    for (i, q) in questions.iter().enumerate() {
        match inst.pose_question(q, budget) {
            QuestionOutcome::Answered { answer, .. } => answers.push(answer),
            QuestionOutcome::Diverged { reason, .. } => {
                return SessionOutcome { answers, diverged: Some((i as u64 + 1, reason)) }
            }
        }
    }
    SessionOutcome { answers, diverged: None }
}

/// Cycles a fresh instance takes to answer `question`, if it answers in
/// budget.
pub fn answer_cycles(
    desc: &Arc<MachineDescription>,
    oracle: &Arc<dyn Oracle>,
    question: &BWord,
    budget: RunBudget,
) -> Option<u64> {
    let mut inst = MachineInstance::new(Arc::clone(desc), Arc::clone(oracle));
    match inst.pose_question(question, budget) {
        QuestionOutcome::Answered { cycles, .. } => Some(cycles),
        QuestionOutcome::Diverged { .. } => None,
    }
}

/// Whether a fresh instance answers `question` at all within budget. The
/// answer content does not matter, only that one arrives.
pub fn recognizes(
    desc: &Arc<MachineDescription>,
    oracle: &Arc<dyn Oracle>,
    question: &BWord,
    budget: RunBudget,
) -> bool {
    answer_cycles(desc, oracle, question, budget).is_some()
}

//! Participants: the answering sides of a test.
//!
//! A participant is session-stateful: answers may depend on every question
//! seen so far. Tests need fresh sessions per run and orientation, so
//! participants come from factories. The type tag records whether the
//! strategy could in principle run as a plain machine; it is metadata for
//! reports, nothing downstream branches on it.

use crate::machine::MachineDescription;
use crate::oracle::Oracle;
use crate::vm::{DivergeReason, MachineInstance, QuestionOutcome, RunBudget};
use crate::words::{BWord, Word};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PAnswer {
    Answer { word: Word },
    Diverged { reason: DivergeReason },
}

impl PAnswer {
    pub fn answer(word: Word) -> Self {
        PAnswer::Answer { word }
    }

    pub fn word(&self) -> Option<&Word> {
        match self {
            PAnswer::Answer { word } => Some(word),
            PAnswer::Diverged { .. } => None,
        }
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, PAnswer::Diverged { .. })
    }
}

/// Whether the strategy is realizable as a plain machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeTag {
    Tm,
    NonTm,
    Unknown,
}

pub trait Participant: Send {
    /// Answers the next question of the session.
    fn answer(&mut self, question: &BWord) -> PAnswer;
    fn label(&self) -> String;
    /// Machine cycles the last answer took, when knowable.
    fn last_cycles(&self) -> Option<u64> {
        None
    }
}

pub trait ParticipantFactory: Send + Sync {
    fn spawn(&self) -> Box<dyn Participant>;
    fn label(&self) -> String;
    fn type_tag(&self) -> TypeTag {
        TypeTag::Unknown
    }
    /// Per-question cycle budget, when one applies; report metadata.
    fn budget_hint(&self) -> Option<u64> {
        None
    }
    /// Seed, when the strategy is randomized; report metadata.
    fn seed_hint(&self) -> Option<u64> {
        None
    }
}

/// A machine instance holding one session.
pub struct MachineParticipant {
    inst: MachineInstance,
    budget: RunBudget,
}

impl MachineParticipant {
    pub fn new(
        desc: Arc<MachineDescription>,
        oracle: Arc<dyn Oracle>,
        budget: RunBudget,
    ) -> Self {
        MachineParticipant { inst: MachineInstance::new(desc, oracle), budget }
    }
}

impl Participant for MachineParticipant {
    fn answer(&mut self, question: &BWord) -> PAnswer {
        match self.inst.pose_question(question, self.budget) {
            QuestionOutcome::Answered { answer, .. } => PAnswer::Answer { word: answer },
            QuestionOutcome::Diverged { reason, .. } => PAnswer::Diverged { reason },
        }
    }

    fn label(&self) -> String {
        self.inst.description().name.clone()
    }

    fn last_cycles(&self) -> Option<u64> {
        Some(self.inst.cycles_question())
    }
}

#[derive(Clone)]
pub struct MachineFactory {
    pub desc: Arc<MachineDescription>,
    pub oracle: Arc<dyn Oracle>,
    pub budget: RunBudget,
}

impl MachineFactory {
    pub fn new(desc: Arc<MachineDescription>, oracle: Arc<dyn Oracle>, budget: RunBudget) -> Self {
        MachineFactory { desc, oracle, budget }
    }
}

impl ParticipantFactory for MachineFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        Box::new(MachineParticipant::new(
            Arc::clone(&self.desc),
            Arc::clone(&self.oracle),
            self.budget,
        ))
    }

    fn label(&self) -> String {
        self.desc.name.clone()
    }

    fn type_tag(&self) -> TypeTag {
        if self.oracle.is_blank() {
            TypeTag::Tm
        } else {
            TypeTag::NonTm
        }
    }

    fn budget_hint(&self) -> Option<u64> {
        Some(self.budget.0)
    }
}

/// The generator carved out of a machine: it ignores question content and
/// serves the machine's answers to the empty-question session, with a
/// divergent question turned into the empty answer. When a question blows
/// the budget, the machine is rewound to its pre-question state so later
/// questions still get their turn; this budget cut is the computable stand-
/// in for detecting true divergence and is exact exactly when every
/// divergence of the base machine is caught within budget.
pub struct TildeParticipant {
    inst: MachineInstance,
    budget: RunBudget,
}

impl TildeParticipant {
    pub fn new(
        desc: Arc<MachineDescription>,
        oracle: Arc<dyn Oracle>,
        budget: RunBudget,
    ) -> Self {
        TildeParticipant { inst: MachineInstance::new(desc, oracle), budget }
    }
}

impl Participant for TildeParticipant {
    fn answer(&mut self, _question: &BWord) -> PAnswer {
        let rewind = self.inst.clone();
        match self.inst.pose_question(&BWord::lambda(), self.budget) {
            QuestionOutcome::Answered { answer, .. } => PAnswer::Answer { word: answer },
            QuestionOutcome::Diverged { .. } => {
                self.inst = rewind;
                PAnswer::Answer { word: Word::lambda() }
            }
        }
    }

    fn label(&self) -> String {
        format!("tilde({})", self.inst.description().name)
    }
}

#[derive(Clone)]
pub struct TildeFactory {
    pub desc: Arc<MachineDescription>,
    pub oracle: Arc<dyn Oracle>,
    pub budget: RunBudget,
}

impl ParticipantFactory for TildeFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        Box::new(TildeParticipant::new(
            Arc::clone(&self.desc),
            Arc::clone(&self.oracle),
            self.budget,
        ))
    }

    fn label(&self) -> String {
        format!("tilde({})", self.desc.name)
    }

    fn type_tag(&self) -> TypeTag {
        TypeTag::Unknown
    }

    fn budget_hint(&self) -> Option<u64> {
        Some(self.budget.0)
    }
}

/// Answers the empty word to everything.
pub struct LambdaParticipant;

impl Participant for LambdaParticipant {
    fn answer(&mut self, _question: &BWord) -> PAnswer {
        PAnswer::Answer { word: Word::lambda() }
    }

    fn label(&self) -> String {
        "all-lambda".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_dsl;
    use crate::oracle::blank_oracle;
    use crate::words::Alphabet;

    fn machine(text: &str) -> Arc<MachineDescription> {
        Arc::new(parse_dsl(text).unwrap())
    }

    // Answers a, then spins forever, then would answer b if it ever got
    // past the spin; tilde must keep serving the later questions.
    const STUTTER: &str = "\
machine stutter
states fresh spin done
initial fresh
final done

fresh _ _ _ -> done a S S S a
fresh a _ _ -> spin a S S S .
spin a _ _ -> spin a S S S .
";

    #[test]
    fn machine_participant_reports_divergence() {
        let d = machine(STUTTER);
        let mut p =
            MachineParticipant::new(Arc::clone(&d), blank_oracle(&Alphabet::ab()), RunBudget(20));
        assert_eq!(
            p.answer(&BWord::lambda()),
            PAnswer::Answer { word: Alphabet::ab().word("a").unwrap() }
        );
        assert!(p.answer(&BWord::lambda()).is_diverged());
    }

    #[test]
    fn tilde_turns_divergence_into_lambda_and_carries_on() {
        let d = machine(STUTTER);
        let mut t =
            TildeParticipant::new(Arc::clone(&d), blank_oracle(&Alphabet::ab()), RunBudget(20));
        assert_eq!(t.answer(&BWord::lambda()).word().unwrap().as_str(), "a");
        // Question 2 diverges inside, so the answer is lambda.
        assert_eq!(t.answer(&BWord::lambda()).word().unwrap().as_str(), "");
        // The spin question is re-posed from the rewound state each time.
        assert_eq!(t.answer(&BWord::lambda()).word().unwrap().as_str(), "");
    }

    #[test]
    fn tilde_ignores_question_content() {
        let ab = Alphabet::ab();
        let d = machine(STUTTER);
        let oracle = blank_oracle(&ab);
        let mut a = TildeParticipant::new(Arc::clone(&d), Arc::clone(&oracle), RunBudget(20));
        let mut b = TildeParticipant::new(Arc::clone(&d), Arc::clone(&oracle), RunBudget(20));
        for q in ["", "ab", "bbb"] {
            assert_eq!(a.answer(&ab.bword(q).unwrap()), b.answer(&BWord::lambda()));
        }
    }
}

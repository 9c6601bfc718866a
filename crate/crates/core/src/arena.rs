//! The interrogation arena: left/right tests, verdicts, interrogators.
//!
//! A test pits a subject against a tester (an interrogator plus a reference
//! participant, the SP). Interrogator and SP do not know which physical side
//! the subject sits on; the interrogator's job is to name the SP's side.
//! The left test seats the SP on the left, the right test mirrors it, and a
//! subject only fails outright when it fails both.

use crate::machine::{MachineDescription, Side};
use crate::oracle::{blank_oracle, BoundedPi, Oracle};
use crate::participant::{
    MachineFactory, MachineParticipant, PAnswer, Participant, ParticipantFactory, TypeTag,
};
use crate::vm::{self, MachineInstance, QuestionOutcome, RunBudget};
use crate::words::{Alphabet, BWord, Word};
use crate::{encoding, enumerate::UniversalEnumerator};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const TRANSCRIPT_VERSION: u32 = 1;

/// Which test is being run; the orientation fixes where the SP sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Left,
    Right,
}

impl Orientation {
    /// The SP's physical side: the left test seats the SP on the left.
    pub fn sp_side(self) -> Side {
        match self {
            Orientation::Left => Side::Left,
            Orientation::Right => Side::Right,
        }
    }

    pub fn subject_side(self) -> Side {
        self.sp_side().other()
    }
}

/// One interrogator move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IStep {
    /// Next test question for both participants.
    Continue(Word),
    /// Test over: the named side is claimed to be the SP.
    Finish(Side),
    /// The interrogator cannot proceed (own divergence, protocol error,
    /// exhausted search). Verdict-neutral.
    Failed(String),
}

pub trait Interrogator: Send {
    /// First test question (the interrogator's answer to the opening empty
    /// question).
    fn start(&mut self) -> IStep;
    /// Reaction to the composed answer pair, in physical side order.
    fn on_answers(&mut self, left: &PAnswer, right: &PAnswer) -> IStep;
    fn label(&self) -> String;
}

pub trait InterrogatorFactory: Send + Sync {
    fn spawn(&self) -> Box<dyn Interrogator>;
    fn label(&self) -> String;
    fn type_tag(&self) -> TypeTag {
        TypeTag::Unknown
    }
    fn budget_hint(&self) -> Option<u64> {
        None
    }
}

/// Interrogator plus SP.
#[derive(Clone)]
pub struct Tester {
    pub id: String,
    pub interrogator: Arc<dyn InterrogatorFactory>,
    pub sp: Arc<dyn ParticipantFactory>,
}

impl Tester {
    pub fn type_pair(&self) -> (TypeTag, TypeTag) {
        (self.interrogator.type_tag(), self.sp.type_tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Finished { named: Side },
    SpDiverged { step: u64 },
    SubjectDiverged { step: u64 },
    StepCapReached,
    InterrogatorFailed { step: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestOutcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCycles {
    pub sp: Option<u64>,
    pub subject: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: u64,
    pub test_question: Word,
    pub sp_answer: PAnswer,
    pub subject_answer: PAnswer,
    pub cycles: StepCycles,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub sp: Option<u64>,
    pub subject: Option<u64>,
    pub interrogator: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub version: u32,
    pub tester_id: String,
    pub subject_id: String,
    pub orientation: Orientation,
    pub budgets: Budgets,
    pub step_cap: u64,
    pub seed: Option<u64>,
    pub steps: Vec<StepRecord>,
    pub termination: Termination,
    pub verdict_ordinary: TestOutcome,
    pub verdict_strict: TestOutcome,
}

/// Runs one oriented test to termination.
pub fn run_test(
    tester: &Tester,
    subject: &dyn ParticipantFactory,
    orientation: Orientation,
    step_cap: u64,
) -> Transcript {
    assert!(step_cap >= 1, "a test needs at least one step");
    let mut interrogator = tester.interrogator.spawn();
    let mut sp = tester.sp.spawn();
    let mut subj = subject.spawn();
    let mut steps: Vec<StepRecord> = Vec::new();

    let mut termination = None;
    let mut question = match interrogator.start() {
        IStep::Continue(w) => Some(w),
        IStep::Finish(named) => {
            termination = Some(Termination::Finished { named });
            None
        }
        IStep::Failed(reason) => {
            termination = Some(Termination::InterrogatorFailed { step: 0, reason });
            None
        }
    };

    let mut n = 0;
    while let Some(tq) = question.take() {
        n += 1;
        let q = BWord::from(&tq);
        let sp_answer = sp.answer(&q);
        let subject_answer = subj.answer(&q);
        steps.push(StepRecord {
            n,
            test_question: tq,
            sp_answer: sp_answer.clone(),
            subject_answer: subject_answer.clone(),
            cycles: StepCycles { sp: sp.last_cycles(), subject: subj.last_cycles() },
        });
        if subject_answer.is_diverged() {
            termination = Some(Termination::SubjectDiverged { step: n });
            break;
        }
        if sp_answer.is_diverged() {
            termination = Some(Termination::SpDiverged { step: n });
            break;
        }
        let (left, right) = match orientation.sp_side() {
            Side::Left => (&sp_answer, &subject_answer),
            Side::Right => (&subject_answer, &sp_answer),
        };
        match interrogator.on_answers(left, right) {
            IStep::Continue(w) if n < step_cap => question = Some(w),
            IStep::Continue(_) => termination = Some(Termination::StepCapReached),
            IStep::Finish(named) => termination = Some(Termination::Finished { named }),
            IStep::Failed(reason) => {
                termination = Some(Termination::InterrogatorFailed { step: n, reason })
            }
        }
    }
    let termination = termination.expect("loop always sets a termination");
    let (failed_ordinary, failed_strict) = orientation_failure(orientation, &steps, &termination);

    Transcript {
        version: TRANSCRIPT_VERSION,
        tester_id: tester.id.clone(),
        subject_id: subject.label(),
        orientation,
        budgets: Budgets {
            interrogator: tester.interrogator.budget_hint(),
            sp: tester.sp.budget_hint(),
            subject: subject.budget_hint(),
        },
        step_cap,
        seed: subject.seed_hint().or_else(|| tester.sp.seed_hint()),
        steps,
        termination,
        verdict_ordinary: if failed_ordinary { TestOutcome::Fail } else { TestOutcome::Pass },
        verdict_strict: if failed_strict { TestOutcome::Fail } else { TestOutcome::Pass },
    }
}

/// Failure flags (ordinary, strict) for one orientation.
fn orientation_failure(
    orientation: Orientation,
    steps: &[StepRecord],
    termination: &Termination,
) -> (bool, bool) {
    match termination {
        Termination::Finished { named } => {
            // Only a correct naming counts against the subject.
            let correct = *named == orientation.sp_side();
            (correct, correct)
        }
        Termination::SubjectDiverged { step } => {
            let sp_answered = steps
                .iter()
                .find(|s| s.n == *step)
                .map_or(false, |s| !s.sp_answer.is_diverged());
            (sp_answered, true)
        }
        Termination::SpDiverged { .. }
        | Termination::StepCapReached
        | Termination::InterrogatorFailed { .. } => (false, false),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrientationVerdict {
    pub orientation: Orientation,
    pub failed_ordinary: bool,
    pub failed_strict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub left: OrientationVerdict,
    pub right: OrientationVerdict,
    /// Failed the ordinary test outright: failed in both orientations.
    pub fails_ordinary: bool,
    /// Failed the strict test outright.
    pub fails_strict: bool,
}

/// Combines the two oriented transcripts of one subject into the verdict.
pub fn evaluate(left: &Transcript, right: &Transcript) -> Verdict {
    assert_eq!(left.orientation, Orientation::Left, "mismatched transcript pair");
    assert_eq!(right.orientation, Orientation::Right, "mismatched transcript pair");
    assert_eq!(left.tester_id, right.tester_id, "mismatched transcript pair");
    assert_eq!(left.subject_id, right.subject_id, "mismatched transcript pair");
    let side = |t: &Transcript| OrientationVerdict {
        orientation: t.orientation,
        failed_ordinary: t.verdict_ordinary == TestOutcome::Fail,
        failed_strict: t.verdict_strict == TestOutcome::Fail,
    };
    let (l, r) = (side(left), side(right));
    Verdict {
        fails_ordinary: l.failed_ordinary && r.failed_ordinary,
        fails_strict: l.failed_strict && r.failed_strict,
        left: l,
        right: r,
    }
}

/// Runs both orientations and evaluates.
pub fn run_both(
    tester: &Tester,
    subject: &dyn ParticipantFactory,
    step_cap: u64,
) -> (Transcript, Transcript, Verdict) {
    let l = run_test(tester, subject, Orientation::Left, step_cap);
    let r = run_test(tester, subject, Orientation::Right, step_cap);
    let v = evaluate(&l, &r);
    (l, r, v)
}

/// The interrogator that asks only empty questions and watches for the
/// first disagreement; it then recomputes the reference's answer at that
/// step and names the matching side as the SP.
pub struct DumbInterrogator {
    reference: Arc<dyn ParticipantFactory>,
    n: u64,
}

impl Interrogator for DumbInterrogator {
    fn start(&mut self) -> IStep {
        IStep::Continue(Word::lambda())
    }

    fn on_answers(&mut self, left: &PAnswer, right: &PAnswer) -> IStep {
        self.n += 1;
        if left == right {
            return IStep::Continue(Word::lambda());
        }
        let mut fresh = self.reference.spawn();
        let mut alpha = None;
        for _ in 0..self.n {
            match fresh.answer(&BWord::lambda()) {
                PAnswer::Answer { word } => alpha = Some(word),
                PAnswer::Diverged { .. } => {
                    return IStep::Failed(format!(
                        "reference {} diverged while recomputing answer {}",
                        self.reference.label(),
                        self.n
                    ));
                }
            }
        }
        let alpha = alpha.expect("n >= 1");
        if left.word() == Some(&alpha) {
            IStep::Finish(Side::Left)
        } else if right.word() == Some(&alpha) {
            IStep::Finish(Side::Right)
        } else {
            IStep::Failed(format!(
                "neither answer matches the reference at step {}",
                self.n
            ))
        }
    }

    fn label(&self) -> String {
        format!("dumb({})", self.reference.label())
    }
}

#[derive(Clone)]
pub struct DumbInterrogatorFactory {
    pub reference: Arc<dyn ParticipantFactory>,
}

impl InterrogatorFactory for DumbInterrogatorFactory {
    fn spawn(&self) -> Box<dyn Interrogator> {
        Box::new(DumbInterrogator { reference: Arc::clone(&self.reference), n: 0 })
    }

    fn label(&self) -> String {
        format!("dumb({})", self.reference.label())
    }

    fn type_tag(&self) -> TypeTag {
        self.reference.type_tag()
    }

    fn budget_hint(&self) -> Option<u64> {
        self.reference.budget_hint()
    }
}

/// Tester with the dumb interrogator watching for a given reference
/// machine, which also serves as the SP.
pub fn dumb_tester(q: Arc<MachineDescription>, oracle: Arc<dyn Oracle>, budget: RunBudget) -> Tester {
    let sp = Arc::new(MachineFactory::new(q, oracle, budget));
    Tester {
        id: format!("dumb:{}", sp.label()),
        interrogator: Arc::new(DumbInterrogatorFactory { reference: sp.clone() }),
        sp,
    }
}

/// Dumb tester whose reference/SP is an arbitrary participant strategy
/// (used with the diagonal generators).
pub fn dumb_tester_over(id: &str, reference: Arc<dyn ParticipantFactory>) -> Tester {
    Tester {
        id: id.to_string(),
        interrogator: Arc::new(DumbInterrogatorFactory { reference: Arc::clone(&reference) }),
        sp: reference,
    }
}

/// A machine acting as the interrogator: test questions are its answers,
/// and halting in a side-marked final state is its Finish move.
pub struct MachineInterrogator {
    inst: MachineInstance,
    budget: RunBudget,
}

impl MachineInterrogator {
    fn step_with(&mut self, q: &BWord) -> IStep {
        match self.inst.pose_question(q, self.budget) {
            QuestionOutcome::Answered { answer, mark: Some(side), .. } => {
                let _ = answer;
                IStep::Finish(side)
            }
            QuestionOutcome::Answered { answer, mark: None, .. } => IStep::Continue(answer),
            QuestionOutcome::Diverged { reason, .. } => {
                IStep::Failed(format!("interrogator diverged: {:?}", reason))
            }
        }
    }
}

impl Interrogator for MachineInterrogator {
    fn start(&mut self) -> IStep {
        self.step_with(&BWord::lambda())
    }

    fn on_answers(&mut self, left: &PAnswer, right: &PAnswer) -> IStep {
        let (Some(l), Some(r)) = (left.word(), right.word()) else {
            return IStep::Failed("composed question undefined after a divergence".into());
        };
        let alphabet = self.inst.description().alphabet.clone();
        self.step_with(&BWord::compose(&alphabet, l, r))
    }

    fn label(&self) -> String {
        self.inst.description().name.clone()
    }
}

#[derive(Clone)]
pub struct MachineInterrogatorFactory {
    pub desc: Arc<MachineDescription>,
    pub oracle: Arc<dyn Oracle>,
    pub budget: RunBudget,
}

impl InterrogatorFactory for MachineInterrogatorFactory {
    fn spawn(&self) -> Box<dyn Interrogator> {
        Box::new(MachineInterrogator {
            inst: MachineInstance::new(Arc::clone(&self.desc), Arc::clone(&self.oracle)),
            budget: self.budget,
        })
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

/// Tester built from two machine descriptions: interrogator i, SP q.
pub fn machine_tester(
    i: Arc<MachineDescription>,
    q: Arc<MachineDescription>,
    oracle: Arc<dyn Oracle>,
    budget: RunBudget,
) -> Tester {
    Tester {
        id: format!("machine:{}:{}", i.name, q.name),
        interrogator: Arc::new(MachineInterrogatorFactory {
            desc: i,
            oracle: Arc::clone(&oracle),
            budget,
        }),
        sp: Arc::new(MachineFactory::new(q, oracle, budget)),
    }
}

/// The generator that passes a given machine tester: it plays the tester's
/// internal test of q against itself, one internal step per incoming
/// question, and serves q's answers. Once the internal test ends for any
/// reason (finish, divergence, interrogator failure) every later answer is
/// the empty word, which keeps it total.
pub struct EchoGenerator {
    interrogator: Box<dyn Interrogator>,
    sp: Box<dyn Participant>,
    subject: Box<dyn Participant>,
    question: Option<Word>,
    name: String,
}

impl EchoGenerator {
    pub fn new(
        i: Arc<MachineDescription>,
        q: Arc<MachineDescription>,
        oracle: Arc<dyn Oracle>,
        budget: RunBudget,
    ) -> Self {
        let mut interrogator = MachineInterrogator {
            inst: MachineInstance::new(Arc::clone(&i), Arc::clone(&oracle)),
            budget,
        };
        let question = match interrogator.start() {
            IStep::Continue(w) => Some(w),
            _ => None,
        };
        let name = format!("echo({}:{})", i.name, q.name);
        EchoGenerator {
            interrogator: Box::new(interrogator),
            sp: Box::new(MachineParticipant::new(Arc::clone(&q), Arc::clone(&oracle), budget)),
            subject: Box::new(MachineParticipant::new(q, oracle, budget)),
            question,
            name,
        }
    }
}

impl Participant for EchoGenerator {
    fn answer(&mut self, _question: &BWord) -> PAnswer {
        let Some(tq) = self.question.take() else {
            return PAnswer::answer(Word::lambda());
        };
        let q = BWord::from(&tq);
        let sp_answer = self.sp.answer(&q);
        let subject_answer = self.subject.answer(&q);
        // Both internal sides are the same deterministic machine, so the
        // composition order cannot matter; keep SP on the left.
        let out = match &subject_answer {
            PAnswer::Answer { word } => word.clone(),
            PAnswer::Diverged { .. } => return PAnswer::answer(Word::lambda()),
        };
        if !sp_answer.is_diverged() {
            if let IStep::Continue(w) = self.interrogator.on_answers(&sp_answer, &subject_answer)
            {
                self.question = Some(w);
            }
        }
        PAnswer::answer(out)
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

#[derive(Clone)]
pub struct EchoGeneratorFactory {
    pub i: Arc<MachineDescription>,
    pub q: Arc<MachineDescription>,
    pub oracle: Arc<dyn Oracle>,
    pub budget: RunBudget,
}

impl ParticipantFactory for EchoGeneratorFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        Box::new(EchoGenerator::new(
            Arc::clone(&self.i),
            Arc::clone(&self.q),
            Arc::clone(&self.oracle),
            self.budget,
        ))
    }

    fn label(&self) -> String {
        format!("echo({}:{})", self.i.name, self.q.name)
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

/// SP of the recognition tester: at question n it takes the n-th machine
/// of the oracle's universe, asks whether that machine answers its own
/// encoding, and answers the cycle count as a word (the zero word when the
/// oracle says no, and also past the end of the universe). The scan stays
/// inside the universe because only there the bounded oracle is exact.
struct RecognitionSp {
    pi: Arc<BoundedPi>,
    n: u64,
}

impl RecognitionSp {
    /// Cycle-count claim for universe machine n; 0 encodes "does not
    /// answer" (a 0-cycle answer collapses onto the same word).
    fn claim(pi: &BoundedPi, n: u64) -> u64 {
        let Some(m) = pi.universe().get(n as usize - 1) else { return 0 };
        let enc = encoding::encode(m);
        pi.answer_cycles(m, &enc).unwrap_or(0)
    }
}

impl Participant for RecognitionSp {
    fn answer(&mut self, _question: &BWord) -> PAnswer {
        self.n += 1;
        let t = Self::claim(&self.pi, self.n);
        PAnswer::answer(self.pi.alphabet().num_to_word(t))
    }

    fn label(&self) -> String {
        "recognition-sp".into()
    }
}

struct RecognitionSpFactory {
    pi: Arc<BoundedPi>,
}

impl ParticipantFactory for RecognitionSpFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        Box::new(RecognitionSp { pi: Arc::clone(&self.pi), n: 0 })
    }

    fn label(&self) -> String {
        "recognition-sp".into()
    }

    fn type_tag(&self) -> TypeTag {
        // Stands in for an oracle-backed strategy; the bounded stand-in is
        // computable, the tag records the role.
        TypeTag::NonTm
    }

    fn budget_hint(&self) -> Option<u64> {
        Some(self.pi.budget().0)
    }
}

/// Interrogator of the recognition tester. Questions are all empty; on a
/// disagreement both claims about the current universe machine are audited
/// against the oracle's exact cycle count, left side first, and the first
/// claim that fails its audit convicts that side (the other side is named
/// SP). Exactly one side can hold the true count, so a disagreement inside
/// the universe always resolves.
struct RecognitionInterrogator {
    pi: Arc<BoundedPi>,
    n: u64,
}

impl RecognitionInterrogator {
    /// True iff the answer is the correct claim for machine `m`: the zero
    /// word where `m` does not answer its encoding (or answers in 0
    /// cycles), the exact cycle count otherwise.
    fn claim_ok(&self, m: &Arc<MachineDescription>, enc: &Word, answer: &PAnswer) -> bool {
        let Some(w) = answer.word() else { return false };
        let Ok(t) = self.pi.alphabet().word_to_num(w) else { return false };
        match self.pi.answer_cycles(m, enc) {
            None => t == 0,
            Some(cycles) => t == cycles,
        }
    }
}

impl Interrogator for RecognitionInterrogator {
    fn start(&mut self) -> IStep {
        IStep::Continue(Word::lambda())
    }

    fn on_answers(&mut self, left: &PAnswer, right: &PAnswer) -> IStep {
        self.n += 1;
        if left == right {
            return IStep::Continue(Word::lambda());
        }
        let Some(m) = self.pi.universe().get(self.n as usize - 1).cloned() else {
            // Past the universe there is no claim left to audit.
            return IStep::Continue(Word::lambda());
        };
        let enc = encoding::encode(&m);
        if !self.claim_ok(&m, &enc, left) {
            return IStep::Finish(Side::Right);
        }
        if !self.claim_ok(&m, &enc, right) {
            return IStep::Finish(Side::Left);
        }
        IStep::Continue(Word::lambda())
    }

    fn label(&self) -> String {
        "recognition".into()
    }
}

struct RecognitionInterrogatorFactory {
    pi: Arc<BoundedPi>,
}

impl InterrogatorFactory for RecognitionInterrogatorFactory {
    fn spawn(&self) -> Box<dyn Interrogator> {
        Box::new(RecognitionInterrogator { pi: Arc::clone(&self.pi), n: 0 })
    }

    fn label(&self) -> String {
        "recognition".into()
    }

    fn type_tag(&self) -> TypeTag {
        TypeTag::Tm
    }

    fn budget_hint(&self) -> Option<u64> {
        Some(self.pi.budget().0)
    }
}

/// Tester whose SP walks the recognition oracle's universe claiming each
/// machine's self-answer cycle count and whose interrogator audits the
/// claims. Both sides stay inside the certified universe, where the
/// bounded oracle is exact; the claims remain budget relative outside it.
pub fn pi_tester(pi: Arc<BoundedPi>) -> Tester {
    Tester {
        id: "pi".into(),
        interrogator: Arc::new(RecognitionInterrogatorFactory { pi: Arc::clone(&pi) }),
        sp: Arc::new(RecognitionSpFactory { pi }),
    }
}

/// Reference claims of the recognition SP, for auditing against an
/// independent simulation.
pub fn recognition_claims(pi: &Arc<BoundedPi>) -> Vec<u64> {
    (1..=pi.universe().len() as u64).map(|n| RecognitionSp::claim(pi, n)).collect()
}

/// Interrogator of the session tester: keeps a rising index r; at each
/// step it searches for the minimal machine index k > r whose machine
/// answers the whole question history plus its own encoding, asks that
/// encoding, and expects the SP to answer the bar of that machine's last
/// session answer.
struct SessionInterrogator {
    uni: Arc<UniversalEnumerator>,
    budget: RunBudget,
    search_cap: u64,
    r: u64,
    history: Vec<BWord>,
    expected: Option<Word>,
}

impl SessionInterrogator {
    fn next_question(&mut self) -> IStep {
        let alphabet = self.uni.alphabet().clone();
        for k in self.r + 1..=self.search_cap {
            let m = self.uni.machine(k);
            let enc = encoding::encode(&m);
            let mut qs = self.history.clone();
            qs.push(BWord::from(&enc));
            let oracle = blank_oracle(&alphabet);
            let out = vm::run_session(&m, &oracle, &qs, self.budget);
            if out.diverged.is_none() {
                self.r = k;
                self.history = qs;
                let last = out.answers.last().cloned().unwrap_or_else(Word::lambda);
                self.expected = Some(alphabet.bar(&last));
                return IStep::Continue(enc);
            }
        }
        IStep::Failed(format!(
            "no machine past index {} answers the session within the cap of {}",
            self.r, self.search_cap
        ))
    }
}

impl Interrogator for SessionInterrogator {
    fn start(&mut self) -> IStep {
        self.next_question()
    }

    fn on_answers(&mut self, left: &PAnswer, right: &PAnswer) -> IStep {
        if left == right {
            return self.next_question();
        }
        let expected = self.expected.clone().expect("set by next_question");
        if left.word() == Some(&expected) {
            IStep::Finish(Side::Left)
        } else if right.word() == Some(&expected) {
            IStep::Finish(Side::Right)
        } else {
            IStep::Failed("neither answer matches the expected barred answer".into())
        }
    }

    fn label(&self) -> String {
        "session".into()
    }
}

struct SessionInterrogatorFactory {
    uni: Arc<UniversalEnumerator>,
    budget: RunBudget,
    search_cap: u64,
}

impl InterrogatorFactory for SessionInterrogatorFactory {
    fn spawn(&self) -> Box<dyn Interrogator> {
        Box::new(SessionInterrogator {
            uni: Arc::clone(&self.uni),
            budget: self.budget,
            search_cap: self.search_cap,
            r: 0,
            history: Vec::new(),
            expected: None,
        })
    }

    fn label(&self) -> String {
        "session".into()
    }

    fn type_tag(&self) -> TypeTag {
        // Stands in for the oracle-assisted search; bounded here.
        TypeTag::NonTm
    }

    fn budget_hint(&self) -> Option<u64> {
        Some(self.budget.0)
    }
}

/// SP of the session tester: every question it receives is a machine
/// encoding; it decodes the latest one, replays the whole received session
/// through that machine, and answers the bar of the final answer.
struct SessionSp {
    alphabet: Alphabet,
    budget: RunBudget,
    history: Vec<BWord>,
}

impl Participant for SessionSp {
    fn answer(&mut self, question: &BWord) -> PAnswer {
        self.history.push(question.clone());
        let Ok(enc) = self.alphabet.word(question.as_str()) else {
            return PAnswer::answer(Word::lambda());
        };
        let Ok(m) = encoding::decode(&self.alphabet, &enc) else {
            return PAnswer::answer(Word::lambda());
        };
        let oracle = blank_oracle(&self.alphabet);
        let out = vm::run_session(&Arc::new(m), &oracle, &self.history, self.budget);
        if out.diverged.is_some() {
            return PAnswer::answer(Word::lambda());
        }
        let last = out.answers.last().cloned().unwrap_or_else(Word::lambda);
        PAnswer::answer(self.alphabet.bar(&last))
    }

    fn label(&self) -> String {
        "session-sp".into()
    }
}

struct SessionSpFactory {
    alphabet: Alphabet,
    budget: RunBudget,
}

impl ParticipantFactory for SessionSpFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        Box::new(SessionSp {
            alphabet: self.alphabet.clone(),
            budget: self.budget,
            history: Vec::new(),
        })
    }

    fn label(&self) -> String {
        "session-sp".into()
    }

    fn type_tag(&self) -> TypeTag {
        TypeTag::Tm
    }

    fn budget_hint(&self) -> Option<u64> {
        Some(self.budget.0)
    }
}

/// Tester whose questions are machine encodings found by search and whose
/// SP answers barred simulations of those machines.
pub fn comm_tester(alphabet: &Alphabet, budget: RunBudget, search_cap: u64) -> Tester {
    let uni = UniversalEnumerator::new(alphabet);
    Tester {
        id: "comm".into(),
        interrogator: Arc::new(SessionInterrogatorFactory { uni, budget, search_cap }),
        sp: Arc::new(SessionSpFactory { alphabet: alphabet.clone(), budget }),
    }
}

/// The question sequence a fresh session interrogator would ask, for
/// auditing. Stops early if the search fails.
pub fn session_questions(
    alphabet: &Alphabet,
    budget: RunBudget,
    search_cap: u64,
    count: u64,
) -> Vec<Word> {
    let uni = UniversalEnumerator::new(alphabet);
    let mut i = SessionInterrogator {
        uni,
        budget,
        search_cap,
        r: 0,
        history: Vec::new(),
        expected: None,
    };
    let mut out = Vec::new();
    for _ in 0..count {
        match i.next_question() {
            IStep::Continue(w) => out.push(w),
            _ => break,
        }
    }
    out
}

/// Do two participants agree (answers and divergences alike) on the first
/// `n` empty questions?
pub fn similar_on_lambda(u: &mut dyn Participant, v: &mut dyn Participant, n: u64) -> bool {
    (0..n).all(|_| u.answer(&BWord::lambda()) == v.answer(&BWord::lambda()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_dsl;
    use crate::enumerate::{DiagonalFactory, Enumerator, TimeLimitedEnum};
    use crate::vm::DivergeReason;

    fn ab() -> Alphabet {
        Alphabet::ab()
    }

    fn machine(text: &str) -> Arc<MachineDescription> {
        Arc::new(parse_dsl(text).unwrap())
    }

    // Echoes the question back as the answer.
    const ECHO: &str = "\
machine echo
states copy done
initial copy
final done

copy _ _ _ -> done _ S S S .
copy _ a _ -> copy _ S R S a
copy _ b _ -> copy _ S R S b
";

    // Diverges on every question.
    const LOOP: &str = "\
machine loop
states s
initial s

s _ _ _ -> s _ S S S .
s a _ _ -> s a S S S .
s b _ _ -> s b S S S .
";

    // Answers lambda to every question without halting the test: it reads
    // one input symbol and rests in an unmarked final state.
    const QUIET: &str = "\
machine quiet
states s d
initial s
final d

s _ _ _ -> d _ S S S .
s _ a _ -> d _ S S S .
s _ b _ -> d _ S S S .
";

    #[test]
    fn subject_equal_to_sp_runs_to_the_cap_and_passes() {
        let q = machine(ECHO);
        let t = dumb_tester(Arc::clone(&q), blank_oracle(&ab()), RunBudget(100));
        let subject = MachineFactory::new(q, blank_oracle(&ab()), RunBudget(100));
        let (l, r, v) = run_both(&t, &subject, 12);
        assert_eq!(l.termination, Termination::StepCapReached);
        assert_eq!(r.termination, Termination::StepCapReached);
        assert_eq!(l.steps.len(), 12);
        assert!(!v.fails_ordinary && !v.fails_strict);
    }

    #[test]
    fn diverging_subject_fails_both_rules_when_sp_answers() {
        let q = machine(ECHO);
        let t = dumb_tester(Arc::clone(&q), blank_oracle(&ab()), RunBudget(100));
        let subject = MachineFactory::new(machine(LOOP), blank_oracle(&ab()), RunBudget(50));
        let (l, r, v) = run_both(&t, &subject, 12);
        assert_eq!(l.termination, Termination::SubjectDiverged { step: 1 });
        assert_eq!(r.termination, Termination::SubjectDiverged { step: 1 });
        assert!(v.fails_ordinary && v.fails_strict);
    }

    #[test]
    fn divergence_on_both_sides_fails_strict_only() {
        let q = machine(LOOP);
        let t = dumb_tester(Arc::clone(&q), blank_oracle(&ab()), RunBudget(50));
        let subject = MachineFactory::new(q, blank_oracle(&ab()), RunBudget(50));
        let (l, r, v) = run_both(&t, &subject, 12);
        assert_eq!(l.termination, Termination::SubjectDiverged { step: 1 });
        assert_eq!(r.termination, Termination::SubjectDiverged { step: 1 });
        assert!(!v.fails_ordinary, "reference diverged too, so the ordinary rule spares it");
        assert!(v.fails_strict);
    }

    #[test]
    fn incorrect_finish_spares_the_subject() {
        // Synthesize the transcript: naming the subject's side is wrong and
        // must not count against it.
        let steps = vec![StepRecord {
            n: 1,
            test_question: Word::lambda(),
            sp_answer: PAnswer::answer(Word::lambda()),
            subject_answer: PAnswer::answer(ab().word("a").unwrap()),
            cycles: StepCycles::default(),
        }];
        let (ord, strict) = orientation_failure(
            Orientation::Left,
            &steps,
            &Termination::Finished { named: Side::Right },
        );
        assert!(!ord && !strict);
        let (ord, strict) = orientation_failure(
            Orientation::Left,
            &steps,
            &Termination::Finished { named: Side::Left },
        );
        assert!(ord && strict);
    }

    #[test]
    fn sp_diverging_first_is_neutral() {
        let steps = vec![StepRecord {
            n: 1,
            test_question: Word::lambda(),
            sp_answer: PAnswer::Diverged { reason: DivergeReason::BudgetExhausted },
            subject_answer: PAnswer::answer(Word::lambda()),
            cycles: StepCycles::default(),
        }];
        let (ord, strict) =
            orientation_failure(Orientation::Left, &steps, &Termination::SpDiverged { step: 1 });
        assert!(!ord && !strict);
    }

    #[test]
    fn dumb_interrogator_names_the_reference_side() {
        // Subject answers "a" to everything, reference echoes (lambda on
        // lambda questions): they differ at step 1 and the reference answer
        // is lambda, which the SP side produced.
        let q = machine(ECHO);
        let t = dumb_tester(Arc::clone(&q), blank_oracle(&ab()), RunBudget(100));
        let always_a = machine(
            "machine always_a\nstates s d\ninitial s\nfinal d\n\ns _ _ _ -> d _ S S S a\ns a _ _ -> d a S S S a\n",
        );
        let subject = MachineFactory::new(always_a, blank_oracle(&ab()), RunBudget(100));
        for o in [Orientation::Left, Orientation::Right] {
            let tr = run_test(&t, &subject, o, 10);
            assert_eq!(tr.termination, Termination::Finished { named: o.sp_side() });
            assert_eq!(tr.verdict_ordinary, TestOutcome::Fail);
        }
    }

    #[test]
    fn diagonal_tester_catches_time_limited_items_quickly() {
        let ab = ab();
        let uni = crate::enumerate::UniversalEnumerator::new(&ab);
        let tl = TimeLimitedEnum::new(uni);
        let diag = Arc::new(DiagonalFactory {
            source: tl.clone(),
            oracle: blank_oracle(&ab),
            budget: RunBudget(2000),
            alphabet: ab.clone(),
        });
        let tester = dumb_tester_over("dumb:diag(time-limited)", diag);
        for n in 1..=6u64 {
            let item = tl.item(n);
            let subject = ItemFactory { item, n };
            let (l, r, v) = run_both(&tester, &subject, n + 2);
            for tr in [&l, &r] {
                match tr.termination {
                    Termination::Finished { named } => {
                        assert_eq!(named, tr.orientation.sp_side(), "wrong side named");
                        assert!(tr.steps.len() as u64 <= n, "caught after step n");
                    }
                    _ => panic!("expected a finish for item {}: {:?}", n, tr.termination),
                }
            }
            assert!(v.fails_ordinary && v.fails_strict);
        }
    }

    struct ItemFactory {
        item: crate::enumerate::RunnableItem,
        n: u64,
    }

    impl ParticipantFactory for ItemFactory {
        fn spawn(&self) -> Box<dyn Participant> {
            self.item.spawn(blank_oracle(&Alphabet::ab()), RunBudget(2000))
        }

        fn label(&self) -> String {
            format!("item{}", self.n)
        }
    }

    #[test]
    fn machine_interrogator_uses_side_marks() {
        // Interrogator that asks a once, then finishes naming the left side
        // (a left-marked final state) whatever the composed answers were.
        let leftie = machine(
            "machine leftie\nstates ask done name\ninitial ask\nfinal done name:left\n\n\
             ask _ _ _ -> done a S S S a\n\
             ask a _ _ -> name a S S S .\n\
             ask a a _ -> name a S S S .\n\
             ask a b _ -> name a S S S .\n",
        );
        let q = machine(ECHO);
        let t = machine_tester(leftie, Arc::clone(&q), blank_oracle(&ab()), RunBudget(100));
        let subject = MachineFactory::new(q, blank_oracle(&ab()), RunBudget(100));
        let l = run_test(&t, &subject, Orientation::Left, 10);
        assert_eq!(l.termination, Termination::Finished { named: Side::Left });
        assert_eq!(l.verdict_ordinary, TestOutcome::Fail);
        let r = run_test(&t, &subject, Orientation::Right, 10);
        assert_eq!(r.termination, Termination::Finished { named: Side::Left });
        assert_eq!(r.verdict_ordinary, TestOutcome::Pass, "incorrect finish spares the subject");
    }

    #[test]
    fn echo_generator_replays_and_pads_with_lambda() {
        // Question 1: blank work -> answers a, writes a. Question 2: reads
        // a -> answers b, writes b. Question 3: reads b -> stuck.
        let q = machine(
            "machine twostep\nstates s d\ninitial s\nfinal d\n\n\
             s _ _ _ -> d a S S S a\n\
             s a _ _ -> d b S S S b\n",
        );
        let i = machine(QUIET);
        let gen = EchoGeneratorFactory {
            i,
            q: Arc::clone(&q),
            oracle: blank_oracle(&ab()),
            budget: RunBudget(100),
        };
        let mut p = gen.spawn();
        let answers: Vec<String> = (0..5)
            .map(|_| p.answer(&BWord::lambda()).word().unwrap().as_str().to_string())
            .collect();
        assert_eq!(answers, ["a", "b", "", "", ""]);
    }

    #[test]
    fn echo_generator_passes_its_own_tester() {
        let q = machine(ECHO);
        let i = machine(QUIET);
        let t = machine_tester(Arc::clone(&i), Arc::clone(&q), blank_oracle(&ab()), RunBudget(100));
        let gen = EchoGeneratorFactory { i, q, oracle: blank_oracle(&ab()), budget: RunBudget(100) };
        let (_, _, v) = run_both(&t, &gen, 15);
        assert!(!v.fails_ordinary && !v.fails_strict);
    }

    #[test]
    fn similar_on_lambda_distinguishes_time_limits() {
        let lp = machine(LOOP);
        let mut raw = MachineParticipant::new(Arc::clone(&lp), blank_oracle(&ab()), RunBudget(20));
        let mut capped =
            crate::enumerate::TimeLimitedParticipant::new(lp, blank_oracle(&ab()), 3);
        assert!(!similar_on_lambda(&mut raw, &mut capped, 1));

        let e1 = machine(ECHO);
        let e2 = machine(ECHO);
        let mut a = MachineParticipant::new(e1, blank_oracle(&ab()), RunBudget(100));
        let mut b = MachineParticipant::new(e2, blank_oracle(&ab()), RunBudget(100));
        assert!(similar_on_lambda(&mut a, &mut b, 10));
    }

    #[test]
    fn transcripts_are_deterministic_json() {
        let q = machine(ECHO);
        let t = dumb_tester(Arc::clone(&q), blank_oracle(&ab()), RunBudget(100));
        let subject = MachineFactory::new(q, blank_oracle(&ab()), RunBudget(100));
        let a = serde_json::to_string(&run_test(&t, &subject, Orientation::Left, 5)).unwrap();
        let b = serde_json::to_string(&run_test(&t, &subject, Orientation::Left, 5)).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"version\":1") && a.contains("\"orientation\":\"left\""));
    }

    fn small_pi() -> Arc<BoundedPi> {
        // quiet answers any question (its encoding included) in 1 cycle;
        // loop answers nothing; echo answers its encoding by copying it.
        let universe = vec![machine(QUIET), machine(LOOP), machine(ECHO)];
        Arc::new(BoundedPi::new(&ab(), universe, RunBudget(10_000)))
    }

    #[test]
    fn recognition_claims_are_exact_cycle_counts() {
        let pi = small_pi();
        let claims = recognition_claims(&pi);
        let brute: Vec<u64> = pi
            .universe()
            .iter()
            .map(|m| {
                let enc = encoding::encode(m);
                vm::answer_cycles(m, &blank_oracle(&ab()), &BWord::from(&enc), RunBudget(10_000))
                    .unwrap_or(0)
            })
            .collect();
        assert_eq!(claims, brute);
        assert_eq!(claims[0], 1, "quiet rests after one cycle");
        assert_eq!(claims[1], 0, "loop never answers");
        assert!(claims[2] > 1, "echo has to copy its whole encoding");
    }

    #[test]
    fn recognition_tester_convicts_every_universe_machine() {
        let pi = small_pi();
        let t = pi_tester(Arc::clone(&pi));
        for m in pi.universe() {
            let subject = MachineFactory::new(Arc::clone(m), blank_oracle(&ab()), RunBudget(10_000));
            let (l, _r, v) = run_both(&t, &subject, 10);
            assert!(v.fails_ordinary && v.fails_strict, "{} escaped", m.name);
            assert!(l.steps.len() as u64 <= pi.universe().len() as u64);
        }
    }

    #[test]
    fn recognition_audit_refutes_a_wrong_count() {
        // Answers "b" every time, i.e. claims a count of 1 for every
        // universe machine. The true claim stream is (1, 0, t_echo): the
        // lie first shows at step 2, where the audit must convict it.
        let liar = machine(
            "\
machine liar
states s d
initial s
final d

s _ _ _ -> d _ S S S b
",
        );
        let pi = small_pi();
        let t = pi_tester(Arc::clone(&pi));
        let subject = MachineFactory::new(liar, blank_oracle(&ab()), RunBudget(10_000));
        let (l, r, v) = run_both(&t, &subject, 10);
        assert!(v.fails_ordinary && v.fails_strict);
        assert_eq!(l.termination, Termination::Finished { named: Side::Left });
        assert_eq!(r.termination, Termination::Finished { named: Side::Right });
        assert_eq!(l.steps.len(), 2, "step 1 agrees with the true claim, step 2 lies");
    }
}

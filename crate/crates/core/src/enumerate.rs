//! Enumeration of all machines in encoding order, and the generators and
//! operators built on top of it.
//!
//! The enumeration lists every valid encoding over a fixed alphabet in
//! shortlex order and decodes it. Candidates are produced length by length
//! with a depth-first walk over the encoding grammar rather than by testing
//! every word: gamma codes are prefix free, so walking each field's codable
//! values in code order (longer codes first, ascending value within a code
//! length) yields the encodings of one length exactly in lexicographic
//! order. A lower bound on the digits still required prunes dead branches.

use crate::encoding::{self, bits_to_word, push_code};
use crate::machine::MachineDescription;
use crate::oracle::Oracle;
use crate::participant::{
    LambdaParticipant, MachineParticipant, PAnswer, Participant, ParticipantFactory, TypeTag,
};
use crate::vm::{MachineInstance, QuestionOutcome, RunBudget};
use crate::words::{Alphabet, BWord, Word};
use num_bigint::BigUint;
use num_traits::Zero;
use std::sync::{Arc, Mutex};

/// Shape bounds for the grammar walk; the unbounded walk lists everything.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GenBounds {
    pub max_states: u64,
    pub max_extras: u64,
    pub max_initial_work: u64,
}

impl GenBounds {
    pub(crate) fn unbounded() -> Self {
        GenBounds { max_states: u64::MAX, max_extras: u64::MAX, max_initial_work: u64::MAX }
    }
}

struct LenGen<'a> {
    alphabet: &'a Alphabet,
    k: u64,
    target: usize,
    bounds: GenBounds,
    bits: Vec<bool>,
    working: Vec<bool>,
    out: Vec<Word>,
}

/// Walks the codable values v in [lo, hi] whose code plus `min_rest(v)`
/// more digits still fit, in code order. `min_rest` must be nondecreasing
/// in v; the walk leans on that to cut a value range short.
fn each_value(
    g: &mut LenGen,
    lo: u64,
    hi: u64,
    min_rest: &dyn Fn(u64) -> usize,
    f: &mut dyn FnMut(&mut LenGen, u64),
) {
    let used = g.bits.len();
    if used >= g.target || lo > hi {
        return;
    }
    let avail = g.target - used;
    let zmax = (((avail - 1) / 2) as u32).min(31);
    for z in (0..=zmax).rev() {
        let clen = (2 * z + 1) as usize;
        let lo_z = lo.max(1u64 << z);
        let hi_z = hi.min((1u64 << (z + 1)) - 1);
        let mut v = lo_z;
        while v <= hi_z {
            if used + clen + min_rest(v) > g.target {
                break;
            }
            push_code(&mut g.bits, v);
            f(g, v);
            g.bits.truncate(used);
            v += 1;
        }
    }
}

fn st_state_count(g: &mut LenGen) {
    let hi = g.bounds.max_states;
    each_value(g, 1, hi, &|s| s as usize + 4, &mut |g, s| st_initial(g, s));
}

fn st_initial(g: &mut LenGen, s: u64) {
    each_value(g, 1, s, &|_| s as usize + 3, &mut |g, _| st_status(g, s, 0));
}

fn st_status(g: &mut LenGen, s: u64, done: u64) {
    if done == s {
        st_extras(g, s);
        return;
    }
    let rest = (s - done - 1) as usize + 3;
    each_value(g, 1, 4, &|_| rest, &mut |g, v| {
        g.working.push(v == 4);
        st_status(g, s, done + 1);
        g.working.pop();
    });
}

fn st_extras(g: &mut LenGen, s: u64) {
    let hi = g.bounds.max_extras.saturating_add(1);
    each_value(g, 1, hi, &|_| 2, &mut |g, v| {
        let w_syms = 1 + g.k + (v - 1);
        st_iw_len(g, s, w_syms);
    });
}

fn st_iw_len(g: &mut LenGen, s: u64, w_syms: u64) {
    let hi = g.bounds.max_initial_work.saturating_add(1);
    each_value(g, 1, hi, &|v| (v - 1) as usize + 1, &mut |g, v| {
        st_iw_sym(g, s, w_syms, v - 1)
    });
}

fn st_iw_sym(g: &mut LenGen, s: u64, w_syms: u64, left: u64) {
    if left == 0 {
        st_t_count(g, s, w_syms);
        return;
    }
    let rest = (left - 1) as usize + 1;
    each_value(g, 1, w_syms, &|_| rest, &mut |g, _| st_iw_sym(g, s, w_syms, left - 1));
}

fn st_t_count(g: &mut LenGen, s: u64, w_syms: u64) {
    let working = g.working.iter().filter(|&&w| w).count() as u64;
    let keyspace = working
        .saturating_mul(w_syms)
        .saturating_mul((g.k + 1) * (g.k + 1));
    each_value(g, 1, keyspace.saturating_add(1), &|v| 10 * (v - 1) as usize, &mut |g, v| {
        st_key_state(g, s, w_syms, v - 1, None)
    });
}

/// Raw code values of one transition key, in field order.
type KeyRaw = (u64, u64, u64, u64);

fn st_key_state(g: &mut LenGen, s: u64, w_syms: u64, left: u64, prev: Option<KeyRaw>) {
    if left == 0 {
        if g.bits.len() == g.target {
            g.out.push(bits_to_word(g.alphabet, &g.bits));
        }
        return;
    }
    let rest = 9 + 10 * (left - 1) as usize;
    let lo = prev.map_or(1, |p| p.0);
    each_value(g, lo, s, &|_| rest, &mut |g, v| {
        if !g.working[(v - 1) as usize] {
            return;
        }
        // Keys must be strictly ascending; while tied with the previous key
        // the remaining fields stay bounded by it.
        let tie = prev.filter(|p| p.0 == v).map(|p| (p.1, p.2, p.3));
        st_key_work(g, s, w_syms, left, v, tie);
    });
}

fn st_key_work(g: &mut LenGen, s: u64, w_syms: u64, left: u64, kst: u64, tie: Option<(u64, u64, u64)>) {
    let rest = 8 + 10 * (left - 1) as usize;
    let lo = tie.map_or(1, |t| t.0);
    each_value(g, lo, w_syms, &|_| rest, &mut |g, v| {
        let tie = tie.filter(|t| t.0 == v).map(|t| (t.1, t.2));
        st_key_input(g, s, w_syms, left, (kst, v), tie);
    });
}

fn st_key_input(g: &mut LenGen, s: u64, w_syms: u64, left: u64, key: (u64, u64), tie: Option<(u64, u64)>) {
    let rest = 7 + 10 * (left - 1) as usize;
    let lo = tie.map_or(1, |t| t.0);
    each_value(g, lo, g.k + 1, &|_| rest, &mut |g, v| {
        let tie = tie.filter(|t| t.0 == v).map(|t| t.1);
        st_key_oracle(g, s, w_syms, left, (key.0, key.1, v), tie);
    });
}

fn st_key_oracle(g: &mut LenGen, s: u64, w_syms: u64, left: u64, key: (u64, u64, u64), tie: Option<u64>) {
    let rest = 6 + 10 * (left - 1) as usize;
    let lo = tie.map_or(1, |t| t + 1);
    each_value(g, lo, g.k + 1, &|_| rest, &mut |g, v| {
        st_action(g, s, w_syms, left, (key.0, key.1, key.2, v), 0)
    });
}

fn st_action(g: &mut LenGen, s: u64, w_syms: u64, left: u64, key: KeyRaw, field: usize) {
    if field == 6 {
        st_key_state(g, s, w_syms, left - 1, Some(key));
        return;
    }
    let hi = [s, w_syms, 3, 3, 3, g.k + 2][field];
    let rest = (5 - field) + 10 * (left - 1) as usize;
    each_value(g, 1, hi, &|_| rest, &mut |g, _| st_action(g, s, w_syms, left, key, field + 1));
}

/// All valid encodings with exactly `len` digits, in lexicographic order.
pub fn valid_encodings_of_length(alphabet: &Alphabet, len: usize) -> Vec<Word> {
    encodings_of_length_bounded(alphabet, len, GenBounds::unbounded())
}

/// Same walk restricted to a machine shape.
pub(crate) fn encodings_of_length_bounded(
    alphabet: &Alphabet,
    len: usize,
    bounds: GenBounds,
) -> Vec<Word> {
    let mut g = LenGen {
        alphabet,
        k: alphabet.letter_count() as u64,
        target: len,
        bounds,
        bits: Vec::new(),
        working: Vec::new(),
        out: Vec::new(),
    };
    st_state_count(&mut g);
    g.out
}

/// One entry of an enumeration: something that can be spun up as a
/// participant.
#[derive(Debug, Clone)]
pub enum RunnableItem {
    /// The machine itself.
    Plain(Arc<MachineDescription>),
    /// The machine under a hard per-question cycle limit; once a question
    /// blows the limit the participant answers lambda from then on.
    TimeLimited { base: Arc<MachineDescription>, t: u64 },
    /// A generator serving the base machine's lambda-session answers for
    /// the first `horizon` questions and lambda afterwards. The budget must
    /// be certified: within the horizon the base machine answers inside it.
    LambdaWindow {
        base: Arc<MachineDescription>,
        budget: RunBudget,
        horizon: BigUint,
    },
    /// The generator that answers lambda to everything.
    AllLambda,
}

impl RunnableItem {
    pub fn key(&self) -> String {
        match self {
            RunnableItem::Plain(d) => d.name.clone(),
            RunnableItem::TimeLimited { base, t } => format!("{}|{}", base.name, t),
            RunnableItem::LambdaWindow { base, horizon, .. } => {
                format!("window({},{})", base.name, horizon)
            }
            RunnableItem::AllLambda => "all-lambda".into(),
        }
    }

    pub fn description(&self) -> Option<&Arc<MachineDescription>> {
        match self {
            RunnableItem::Plain(d) => Some(d),
            RunnableItem::TimeLimited { base, .. } => Some(base),
            RunnableItem::LambdaWindow { base, .. } => Some(base),
            RunnableItem::AllLambda => None,
        }
    }

    pub fn encoding(&self) -> Option<Word> {
        self.description().map(|d| encoding::encode(d))
    }

    pub fn spawn(&self, oracle: Arc<dyn Oracle>, default_budget: RunBudget) -> Box<dyn Participant> {
        match self {
            RunnableItem::Plain(d) => {
                Box::new(MachineParticipant::new(Arc::clone(d), oracle, default_budget))
            }
            RunnableItem::TimeLimited { base, t } => {
                Box::new(TimeLimitedParticipant::new(Arc::clone(base), oracle, *t))
            }
            RunnableItem::LambdaWindow { base, budget, horizon } => Box::new(WindowParticipant {
                inst: MachineInstance::new(Arc::clone(base), oracle),
                budget: *budget,
                remaining: horizon.clone(),
            }),
            RunnableItem::AllLambda => Box::new(LambdaParticipant),
        }
    }
}

pub trait Enumerator: Send + Sync {
    /// The n-th entry, n >= 1.
    fn item(&self, n: u64) -> RunnableItem;
    fn label(&self) -> String;
}

pub fn enum_prefix(e: &dyn Enumerator, n: u64) -> Vec<RunnableItem> {
    (1..=n).map(|i| e.item(i)).collect()
}

/// The enumeration of every machine over one alphabet, ordered by encoding.
pub struct UniversalEnumerator {
    alphabet: Alphabet,
    state: Mutex<UniState>,
}

struct UniState {
    next_len: usize,
    machines: Vec<Arc<MachineDescription>>,
    encodings: Vec<Word>,
}

impl UniversalEnumerator {
    pub fn new(alphabet: &Alphabet) -> Arc<Self> {
        Arc::new(UniversalEnumerator {
            alphabet: alphabet.clone(),
            state: Mutex::new(UniState { next_len: 1, machines: Vec::new(), encodings: Vec::new() }),
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// The k-th machine, k >= 1.
    pub fn machine(&self, k: u64) -> Arc<MachineDescription> {
        assert!(k >= 1, "enumeration is 1-based");
        let mut st = self.state.lock().unwrap();
        self.ensure(&mut st, k);
        Arc::clone(&st.machines[k as usize - 1])
    }

    /// The k-th encoding, k >= 1.
    pub fn encoding(&self, k: u64) -> Word {
        assert!(k >= 1, "enumeration is 1-based");
        let mut st = self.state.lock().unwrap();
        self.ensure(&mut st, k);
        st.encodings[k as usize - 1].clone()
    }

    fn ensure(&self, st: &mut UniState, k: u64) {
        while (st.machines.len() as u64) < k {
            let len = st.next_len;
            st.next_len += 1;
            for w in valid_encodings_of_length(&self.alphabet, len) {
                let mut d = encoding::decode(&self.alphabet, &w)
                    .expect("generated encoding failed to decode");
                d.name = format!("A{}", st.machines.len() + 1);
                st.machines.push(Arc::new(d));
                st.encodings.push(w);
            }
        }
    }
}

impl Enumerator for UniversalEnumerator {
    fn item(&self, n: u64) -> RunnableItem {
        RunnableItem::Plain(self.machine(n))
    }

    fn label(&self) -> String {
        "universal".into()
    }
}

/// n -> (i, t) walking anti-diagonals: (1,1), (1,2), (2,1), (1,3), (2,2),
/// (3,1), ... Every machine index meets every time limit exactly once.
pub fn pair_decode(n: u64) -> (u64, u64) {
    assert!(n >= 1, "pairing is 1-based");
    let mut d = 1u64;
    let mut first = 1u64;
    while first + d <= n {
        first += d;
        d += 1;
    }
    let off = n - first;
    (off + 1, d - off)
}

/// Enumeration of every machine under every time limit. Each entry answers
/// all questions (lambda once its limit has been hit), so a diagonal built
/// over it is total.
pub struct TimeLimitedEnum {
    uni: Arc<UniversalEnumerator>,
}

impl TimeLimitedEnum {
    pub fn new(uni: Arc<UniversalEnumerator>) -> Arc<Self> {
        Arc::new(TimeLimitedEnum { uni })
    }
}

impl Enumerator for TimeLimitedEnum {
    fn item(&self, n: u64) -> RunnableItem {
        let (i, t) = pair_decode(n);
        RunnableItem::TimeLimited { base: self.uni.machine(i), t }
    }

    fn label(&self) -> String {
        "time-limited".into()
    }
}

/// Machine under a hard per-question cycle limit. Hitting the limit, or
/// getting stuck, latches the participant into answering lambda forever;
/// after the latch it answers every question.
pub struct TimeLimitedParticipant {
    inst: MachineInstance,
    t: u64,
    latched: bool,
}

impl TimeLimitedParticipant {
    pub fn new(desc: Arc<MachineDescription>, oracle: Arc<dyn Oracle>, t: u64) -> Self {
        TimeLimitedParticipant { inst: MachineInstance::new(desc, oracle), t, latched: false }
    }
}

impl Participant for TimeLimitedParticipant {
    fn answer(&mut self, question: &BWord) -> PAnswer {
        if self.latched {
            return PAnswer::answer(Word::lambda());
        }
        match self.inst.pose_question(question, RunBudget(self.t)) {
            QuestionOutcome::Answered { answer, .. } => PAnswer::answer(answer),
            QuestionOutcome::Diverged { .. } => {
                self.latched = true;
                PAnswer::answer(Word::lambda())
            }
        }
    }

    fn label(&self) -> String {
        format!("{}|{}", self.inst.description().name, self.t)
    }
}

/// Generator serving a machine's lambda-session answers up to a horizon.
/// Ignores question content, like every generator.
struct WindowParticipant {
    inst: MachineInstance,
    budget: RunBudget,
    remaining: BigUint,
}

impl Participant for WindowParticipant {
    fn answer(&mut self, _question: &BWord) -> PAnswer {
        if self.remaining.is_zero() {
            return PAnswer::answer(Word::lambda());
        }
        self.remaining -= 1u32;
        match self.inst.pose_question(&BWord::lambda(), self.budget) {
            QuestionOutcome::Answered { answer, .. } => PAnswer::answer(answer),
            // The budget is supposed to be certified for the whole window;
            // degrade to lambda rather than poison the session if not.
            QuestionOutcome::Diverged { .. } => {
                debug_assert!(false, "window budget was not actually certified");
                PAnswer::answer(Word::lambda())
            }
        }
    }

    fn label(&self) -> String {
        format!("window({})", self.inst.description().name)
    }
}

/// The diagonal generator over an enumeration: its n-th answer is the
/// n-th entry's n-th lambda-session answer with a letter barred on front,
/// which no entry of the enumeration can produce at step n.
pub struct DiagonalParticipant {
    source: Arc<dyn Enumerator>,
    oracle: Arc<dyn Oracle>,
    budget: RunBudget,
    alphabet: Alphabet,
    n: u64,
}

impl Participant for DiagonalParticipant {
    fn answer(&mut self, _question: &BWord) -> PAnswer {
        self.n += 1;
        let item = self.source.item(self.n);
        let mut p = item.spawn(Arc::clone(&self.oracle), self.budget);
        let mut last = Word::lambda();
        for j in 1..=self.n {
            match p.answer(&BWord::lambda()) {
                PAnswer::Answer { word } => last = word,
                PAnswer::Diverged { reason } => panic!(
                    "diagonal over {} is ill-posed: entry {} diverged ({:?}) on lambda question {} of {}; every entry must answer the whole lambda session",
                    self.source.label(),
                    self.n,
                    reason,
                    j,
                    self.n,
                ),
            }
        }
        PAnswer::answer(self.alphabet.bar(&last))
    }

    fn label(&self) -> String {
        format!("diag({})", self.source.label())
    }
}

/// Seats one enumeration entry as a test subject.
#[derive(Clone)]
pub struct ItemFactory {
    pub item: RunnableItem,
    pub oracle: Arc<dyn Oracle>,
    pub budget: RunBudget,
}

impl ParticipantFactory for ItemFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        self.item.spawn(Arc::clone(&self.oracle), self.budget)
    }

    fn label(&self) -> String {
        self.item.key()
    }

    fn type_tag(&self) -> TypeTag {
        match self.item {
            RunnableItem::Plain(_) if self.oracle.is_blank() => TypeTag::Tm,
            _ => TypeTag::Unknown,
        }
    }

    fn budget_hint(&self) -> Option<u64> {
        Some(self.budget.0)
    }
}

#[derive(Clone)]
pub struct DiagonalFactory {
    pub source: Arc<dyn Enumerator>,
    pub oracle: Arc<dyn Oracle>,
    pub budget: RunBudget,
    pub alphabet: Alphabet,
}

impl ParticipantFactory for DiagonalFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        Box::new(DiagonalParticipant {
            source: Arc::clone(&self.source),
            oracle: Arc::clone(&self.oracle),
            budget: self.budget,
            alphabet: self.alphabet.clone(),
            n: 0,
        })
    }

    fn label(&self) -> String {
        format!("diag({})", self.source.label())
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

//! The randomized reference test and its Monte-Carlo harness.
//!
//! The reference participant answers by coin flips. Two assistants watch
//! the two answer streams for one that looks like an enumerated machine;
//! when a stream matches, the supervisor names the other side as the
//! reference. A subject passes a trial only when the coin flips themselves
//! happen to look machine-like, which is why the passing probability is
//! bounded by p^m/(1-p).

use crate::arena::{
    evaluate, run_test, IStep, Interrogator, InterrogatorFactory, Orientation, Termination,
    Tester,
};
use crate::enumerate::UniversalEnumerator;
use crate::machine::{MachineDescription, Side};
use crate::oracle::{blank_oracle, RandomOracle};
use crate::participant::{MachineFactory, PAnswer, Participant, ParticipantFactory, TypeTag};
use crate::vm::{MachineInstance, QuestionOutcome, RunBudget};
use crate::words::{Alphabet, BWord, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use std::sync::{Arc, Mutex};

/// One-sided confidence level of the reported exact binomial upper bound.
pub const CI_LEVEL: f64 = 0.95;

/// Collapses an answer to one bit: the empty word and the zero word count
/// as 0, everything else as 1.
pub fn binarize(alphabet: &Alphabet, w: &Word) -> u8 {
    if w.is_empty() || *w == alphabet.num_to_word(0) {
        0
    } else {
        1
    }
}

/// The coin-flip participant: answer n is the letter for the n-th oracle
/// bit, so the binarized answer stream is exactly the bit stream.
pub struct RandomSp {
    oracle: RandomOracle,
    n: u64,
}

impl Participant for RandomSp {
    fn answer(&mut self, _question: &BWord) -> PAnswer {
        self.n += 1;
        let bit = self.oracle.symbol(self.n);
        let letter = self.oracle.alphabet().letters()[bit as usize];
        PAnswer::answer(self.oracle.alphabet().word(&letter.to_string()).unwrap())
    }

    fn label(&self) -> String {
        format!("random(p0={}, seed={})", self.oracle.p0(), self.oracle.seed())
    }
}

#[derive(Clone)]
pub struct RandomSpFactory {
    pub alphabet: Alphabet,
    pub p0: f64,
    pub seed: u64,
}

impl ParticipantFactory for RandomSpFactory {
    fn spawn(&self) -> Box<dyn Participant> {
        Box::new(RandomSp { oracle: RandomOracle::new(&self.alphabet, self.p0, self.seed), n: 0 })
    }

    fn label(&self) -> String {
        format!("random(p0={}, seed={})", self.p0, self.seed)
    }

    fn type_tag(&self) -> TypeTag {
        TypeTag::NonTm
    }

    fn seed_hint(&self) -> Option<u64> {
        Some(self.seed)
    }
}

/// Answers of one machine to a run of `questions` empty questions under a
/// total budget of `cycles` machine cycles across the whole session.
fn session_answers_total_budget(
    desc: &Arc<MachineDescription>,
    questions: u64,
    cycles: u64,
) -> Vec<Word> {
    let oracle = blank_oracle(&desc.alphabet);
    let mut inst = MachineInstance::new(Arc::clone(desc), oracle);
    let mut remaining = cycles;
    let mut answers = Vec::new();
    for _ in 0..questions {
        match inst.pose_question(&BWord::lambda(), RunBudget(remaining)) {
            QuestionOutcome::Answered { answer, cycles, .. } => {
                answers.push(answer);
                remaining -= cycles;
            }
            QuestionOutcome::Diverged { .. } => break,
        }
    }
    answers
}

/// The assistant's flag for one received stream of binarized answers,
/// recomputed from scratch: machine k of the enumeration raises it when,
/// given n cycles for its whole n-question session, it produces at least
/// m + k - 1 answers and they all binarize to the received prefix.
pub fn assistant_flag(uni: &UniversalEnumerator, m: u64, received: &[u8]) -> u8 {
    let n = received.len() as u64;
    for k in 1..=n {
        let machine = uni.machine(k);
        let answers = session_answers_total_budget(&machine, n, n);
        let j = answers.len() as u64;
        if j >= m + k - 1
            && answers
                .iter()
                .zip(received)
                .all(|(a, r)| binarize(uni.alphabet(), a) == *r)
        {
            return 1;
        }
    }
    0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupervisorMove {
    Continue,
    /// The reference participant is claimed to sit on this side.
    Finish(Side),
}

/// The decision table over the two flags. A raised flag marks its side as
/// machine-like, so the reference is placed on the other side; when both
/// flags are up the right one wins.
pub fn supervisor(left_flag: u8, right_flag: u8) -> SupervisorMove {
    match (left_flag, right_flag) {
        (0, 0) => SupervisorMove::Continue,
        (0, _) => SupervisorMove::Finish(Side::Left),
        _ => SupervisorMove::Finish(Side::Right),
    }
}

struct ProbInterrogator {
    uni: Arc<UniversalEnumerator>,
    m: u64,
    left: Vec<u8>,
    right: Vec<u8>,
    sink: Arc<Mutex<Vec<(u8, u8)>>>,
}

impl Interrogator for ProbInterrogator {
    fn start(&mut self) -> IStep {
        IStep::Continue(Word::lambda())
    }

    fn on_answers(&mut self, left: &PAnswer, right: &PAnswer) -> IStep {
        let (Some(lw), Some(rw)) = (left.word(), right.word()) else {
            return IStep::Failed("flags are undefined after a divergence".into());
        };
        self.left.push(binarize(self.uni.alphabet(), lw));
        self.right.push(binarize(self.uni.alphabet(), rw));
        let dl = assistant_flag(&self.uni, self.m, &self.left);
        let dr = assistant_flag(&self.uni, self.m, &self.right);
        self.sink.lock().unwrap().push((dl, dr));
        match supervisor(dl, dr) {
            SupervisorMove::Continue => IStep::Continue(Word::lambda()),
            SupervisorMove::Finish(side) => IStep::Finish(side),
        }
    }

    fn label(&self) -> String {
        format!("prob(m={})", self.m)
    }
}

struct ProbInterrogatorFactory {
    uni: Arc<UniversalEnumerator>,
    m: u64,
    sink: Arc<Mutex<Vec<(u8, u8)>>>,
}

impl InterrogatorFactory for ProbInterrogatorFactory {
    fn spawn(&self) -> Box<dyn Interrogator> {
        Box::new(ProbInterrogator {
            uni: Arc::clone(&self.uni),
            m: self.m,
            left: Vec::new(),
            right: Vec::new(),
            sink: Arc::clone(&self.sink),
        })
    }

    fn label(&self) -> String {
        format!("prob(m={})", self.m)
    }

    fn type_tag(&self) -> TypeTag {
        TypeTag::Tm
    }
}

/// The flag interrogator paired with a coin-flip reference, for one-off
/// runs outside the trial harness. Flag history is discarded.
pub fn prob_tester(alphabet: &Alphabet, m: u64, p0: f64, seed: u64) -> Tester {
    Tester {
        id: format!("prob:m={},p0={},seed={}", m, p0, seed),
        interrogator: Arc::new(ProbInterrogatorFactory {
            uni: UniversalEnumerator::new(alphabet),
            m,
            sink: Arc::new(Mutex::new(Vec::new())),
        }),
        sp: Arc::new(RandomSpFactory { alphabet: alphabet.clone(), p0, seed }),
    }
}

/// One orientation of one trial, compressed to what the aggregate needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSide {
    pub termination: Termination,
    pub steps: u64,
    /// (left flag, right flag) after each step.
    pub flags: Vec<(u8, u8)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub passed: bool,
    pub left: TrialSide,
    pub right: TrialSide,
}

/// Runs both orientations of one trial with the same coin-flip seed. The
/// subject passes unless it fails the ordinary rule in both orientations;
/// hitting the step cap therefore counts in its favor.
pub fn prob_test(
    subject: &Arc<MachineDescription>,
    m: u64,
    p0: f64,
    seed: u64,
    budget: RunBudget,
    step_cap: u64,
) -> TrialResult {
    let uni = UniversalEnumerator::new(&subject.alphabet);
    prob_test_with(&uni, subject, m, p0, seed, budget, step_cap)
}

fn prob_test_with(
    uni: &Arc<UniversalEnumerator>,
    subject: &Arc<MachineDescription>,
    m: u64,
    p0: f64,
    seed: u64,
    budget: RunBudget,
    step_cap: u64,
) -> TrialResult {
    assert!(m >= 1, "the sensitivity parameter starts at 1");
    let alphabet = uni.alphabet().clone();
    let sp: Arc<dyn ParticipantFactory> =
        Arc::new(RandomSpFactory { alphabet: alphabet.clone(), p0, seed });
    let subject_f = MachineFactory::new(Arc::clone(subject), blank_oracle(&alphabet), budget);

    let run = |orientation| {
        let sink = Arc::new(Mutex::new(Vec::new()));
        let tester = Tester {
            id: format!("prob:m={},p0={}", m, p0),
            interrogator: Arc::new(ProbInterrogatorFactory {
                uni: Arc::clone(uni),
                m,
                sink: Arc::clone(&sink),
            }),
            sp: Arc::clone(&sp),
        };
        let tr = run_test(&tester, &subject_f, orientation, step_cap);
        let flags = std::mem::take(&mut *sink.lock().unwrap());
        (tr, flags)
    };
    let (lt, lf) = run(Orientation::Left);
    let (rt, rf) = run(Orientation::Right);
    let verdict = evaluate(&lt, &rt);
    TrialResult {
        seed,
        passed: !verdict.fails_ordinary,
        left: TrialSide { termination: lt.termination, steps: lt.steps.len() as u64, flags: lf },
        right: TrialSide { termination: rt.termination, steps: rt.steps.len() as u64, flags: rf },
    }
}

/// The analytic passing-probability bound p^m/(1-p) with p = max(p0, 1-p0).
pub fn pass_bound(p0: f64, m: u64) -> f64 {
    let p = p0.max(1.0 - p0);
    assert!(p < 1.0, "the bound needs max(p0, 1-p0) < 1");
    p.powi(m as i32) / (1.0 - p)
}

/// Exact one-sided binomial upper confidence bound on the pass rate: the
/// `level` quantile of Beta(passes + 1, trials - passes). The quantile is
/// found by bisection on the cdf, which converges past f64 resolution in
/// well under the iteration cap.
pub fn binomial_upper_ci(passes: u64, trials: u64, level: f64) -> f64 {
    assert!(trials >= 1 && passes <= trials);
    assert!((0.0..1.0).contains(&level));
    if passes == trials {
        return 1.0;
    }
    let beta = Beta::new((passes + 1) as f64, (trials - passes) as f64)
        .expect("valid shape parameters");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbOutcome {
    pub subject: String,
    pub m: u64,
    pub p0: f64,
    pub trials: u64,
    pub passes: u64,
    pub estimate: f64,
    pub ci_upper: f64,
    pub bound: f64,
    pub master_seed: u64,
    pub results: Vec<TrialResult>,
}

impl ProbOutcome {
    /// Does the observed pass rate respect the bound, allowing three
    /// standard deviations of sampling noise? A bound of 1 or more is
    /// unfalsifiable.
    pub fn within_margin(&self) -> bool {
        if self.bound >= 1.0 {
            return true;
        }
        let margin = 3.0 * (self.bound * (1.0 - self.bound) / self.trials as f64).sqrt();
        self.estimate <= self.bound + margin
    }

    /// The aggregate report: per-trial detail is dropped, seeds stay so the
    /// run is reproducible.
    pub fn report(&self) -> serde_json::Value {
        serde_json::json!({
            "subject": self.subject,
            "m": self.m,
            "p0": self.p0,
            "trials": self.trials,
            "passes": self.passes,
            "estimate": self.estimate,
            "ci_upper": self.ci_upper,
            "bound": self.bound,
            "seeds": {
                "master": self.master_seed,
                "trial": self.results.iter().map(|r| r.seed).collect::<Vec<_>>(),
            },
        })
    }
}

/// The coin-flip seed of one trial, a pure function of the master seed and
/// the trial index.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng.gen()
}

/// Runs `trials` independent trials in parallel and aggregates. Results
/// depend only on the arguments, not on thread scheduling.
pub fn monte_carlo(
    subject: &Arc<MachineDescription>,
    m: u64,
    p0: f64,
    trials: u64,
    master_seed: u64,
    budget: RunBudget,
    step_cap: u64,
) -> ProbOutcome {
    assert!(trials >= 1);
    let uni = UniversalEnumerator::new(&subject.alphabet);
    // Warm the machine cache so parallel trials only read it.
    uni.machine(step_cap.max(1));
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|i| {
            prob_test_with(&uni, subject, m, p0, trial_seed(master_seed, i), budget, step_cap)
        })
        .collect();
    let passes = results.iter().filter(|r| r.passed).count() as u64;
    ProbOutcome {
        subject: subject.name.clone(),
        m,
        p0,
        trials,
        passes,
        estimate: passes as f64 / trials as f64,
        ci_upper: binomial_upper_ci(passes, trials, CI_LEVEL),
        bound: pass_bound(p0, m),
        master_seed,
        results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_dsl;

    fn ab() -> Alphabet {
        Alphabet::ab()
    }

    // Answers the empty word to everything, immediately.
    fn still() -> Arc<MachineDescription> {
        Arc::new(parse_dsl("machine still\nstates h\ninitial h\nfinal h\n").unwrap())
    }

    #[test]
    fn binarize_collapses_empty_and_zero() {
        let ab = ab();
        assert_eq!(binarize(&ab, &Word::lambda()), 0);
        assert_eq!(binarize(&ab, &ab.word("a").unwrap()), 0);
        assert_eq!(binarize(&ab, &ab.word("b").unwrap()), 1);
        assert_eq!(binarize(&ab, &ab.word("ab").unwrap()), 1);
        assert_eq!(binarize(&ab, &ab.num_to_word(0)), 0);
    }

    #[test]
    fn random_sp_streams_its_oracle_bits() {
        let f = RandomSpFactory { alphabet: ab(), p0: 0.5, seed: 7 };
        let mut p = f.spawn();
        let oracle = RandomOracle::new(&ab(), 0.5, 7);
        for n in 1..=20 {
            let a = p.answer(&BWord::lambda());
            let expect = ab().letters()[oracle.symbol(n) as usize].to_string();
            assert_eq!(a.word().unwrap().as_str(), expect);
        }
        // Deterministic replay.
        let mut q = f.spawn();
        let mut p = f.spawn();
        for _ in 0..10 {
            assert_eq!(p.answer(&BWord::lambda()), q.answer(&BWord::lambda()));
        }
    }

    #[test]
    fn all_zero_oracle_microcosm() {
        let f = RandomSpFactory { alphabet: ab(), p0: 1.0, seed: 3 };
        let mut p = f.spawn();
        for _ in 0..10 {
            let a = p.answer(&BWord::lambda());
            assert_eq!(binarize(&ab(), a.word().unwrap()), 0);
        }
    }

    #[test]
    fn flag_needs_enough_answers_and_a_matching_prefix() {
        let uni = UniversalEnumerator::new(&ab());
        // Machine 1 halts instantly on every question, so an all-zero
        // stream of length n flags exactly when n >= m.
        for m in 1..=4u64 {
            for n in 1..=6u64 {
                let received = vec![0u8; n as usize];
                let expect = u8::from(n >= m);
                assert_eq!(assistant_flag(&uni, m, &received), expect, "m={m} n={n}");
            }
        }
        // A one bit anywhere breaks the match against the halter, and no
        // other early machine covers it.
        assert_eq!(assistant_flag(&uni, 1, &[1, 0, 0]), 0);
        assert_eq!(assistant_flag(&uni, 1, &[0, 1, 0]), 0);
    }

    #[test]
    fn flag_is_monotone_for_a_self_matching_stream() {
        let uni = UniversalEnumerator::new(&ab());
        let mut fired = false;
        for n in 1..=8usize {
            let f = assistant_flag(&uni, 2, &vec![0u8; n]);
            if fired {
                assert_eq!(f, 1, "flag dropped at n={n}");
            }
            fired = f == 1;
        }
        assert!(fired);
    }

    #[test]
    fn supervisor_table() {
        assert_eq!(supervisor(0, 0), SupervisorMove::Continue);
        assert_eq!(supervisor(0, 1), SupervisorMove::Finish(Side::Left));
        assert_eq!(supervisor(1, 0), SupervisorMove::Finish(Side::Right));
        assert_eq!(supervisor(1, 1), SupervisorMove::Finish(Side::Right));
    }

    #[test]
    fn zero_stream_subject_passes_exactly_when_the_coins_are_zero() {
        // The trial must end at step m in both orientations, and the
        // subject passes iff the reference's first m bits are all zero.
        let subject = still();
        let m = 3;
        for seed in 0..40u64 {
            let r = prob_test(&subject, m, 0.5, seed, RunBudget(50), 20);
            let oracle = RandomOracle::new(&ab(), 0.5, seed);
            let coins_zero = (1..=m).all(|n| oracle.symbol(n) == 0);
            assert_eq!(r.passed, coins_zero, "seed {seed}");
            assert_eq!(r.left.steps, m);
            assert_eq!(r.right.steps, m);
            assert!(matches!(r.left.termination, Termination::Finished { .. }));
            assert!(matches!(r.right.termination, Termination::Finished { .. }));
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let subject = still();
        let a = prob_test(&subject, 2, 0.5, 11, RunBudget(50), 10);
        let b = prob_test(&subject, 2, 0.5, 11, RunBudget(50), 10);
        assert_eq!(a, b);
        let x = monte_carlo(&subject, 2, 0.5, 50, 99, RunBudget(50), 10);
        let y = monte_carlo(&subject, 2, 0.5, 50, 99, RunBudget(50), 10);
        assert_eq!(serde_json::to_string(&x.report()).unwrap(), serde_json::to_string(&y.report()).unwrap());
    }

    #[test]
    fn bound_values_and_margin() {
        assert!((pass_bound(0.5, 5) - 0.0625).abs() < 1e-12);
        assert!((pass_bound(0.5, 10) - 0.001953125).abs() < 1e-12);
        assert!((pass_bound(0.7, 3) - 0.7f64.powi(3) / 0.3).abs() < 1e-12);
        assert!((pass_bound(0.3, 3) - 0.7f64.powi(3) / 0.3).abs() < 1e-12, "p is the larger side");
    }

    #[test]
    fn estimate_tracks_the_zero_prefix_probability() {
        // For the instant halter the pass event is exactly "first m coins
        // are zero", so the estimate concentrates near p0^m.
        let subject = still();
        let out = monte_carlo(&subject, 3, 0.5, 400, 123, RunBudget(50), 12);
        let expect: f64 = 0.125;
        let sigma = (expect * (1.0 - expect) / 400.0).sqrt();
        assert!(
            (out.estimate - expect).abs() < 4.0 * sigma,
            "estimate {} too far from {}",
            out.estimate,
            expect
        );
        assert!(out.within_margin());
        assert!(out.ci_upper >= out.estimate);
        assert!(out.passes <= out.trials);
    }

    #[test]
    fn ci_upper_is_exact_binomial() {
        // passes = 0: the upper bound solves (1-p)^n = 1-level.
        let n = 100u64;
        let u = binomial_upper_ci(0, n, 0.95);
        assert!(((1.0 - u).powi(n as i32) - 0.05).abs() < 1e-6, "u = {u}");
        let closed = 1.0 - (1.0 - 0.95f64).powf(1.0 / n as f64);
        assert!((u - closed).abs() < 1e-7, "u = {u}, closed form = {closed}");
        assert_eq!(binomial_upper_ci(5, 5, 0.95), 1.0);
    }
}

//! The shipped machine zoo: exemplar .tm files with a manifest of certified
//! properties, plus tester construction from compact spec strings.
//!
//! Tester specs:
//!   dumb:<name>           empty-question interrogator, zoo machine as reference
//!   machine:<i>:<q>       zoo machine i interrogates, zoo machine q is the SP
//!   diag:time             diagonal over the time-limited enumeration
//!   diag:mem:<s>,<d>,<w>  diagonal over the memory-bounded generator enumeration
//!   pi                    recognition tester over the certified universe
//!   comm                  session tester (questions are found machine encodings)
//!   prob:<m>,<p0>[,<seed>] flag interrogator with a coin-flip reference

use crate::arena::{comm_tester, dumb_tester, dumb_tester_over, machine_tester, pi_tester, Tester};
use crate::dsl::parse_dsl;
use crate::enumerate::{DiagonalFactory, TimeLimitedEnum, UniversalEnumerator};
use crate::machine::MachineDescription;
use crate::memory::{memory_class_enum, ClassParams};
use crate::oracle::{blank_oracle, parse_certificates, BoundedPi, HaltCertificate};
use crate::prob::prob_tester;
use crate::vm::RunBudget;
use crate::words::Alphabet;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("no zoo machine named {0:?}")]
    UnknownMachine(String),
    #[error("bad tester spec {spec:?}: {message}")]
    BadSpec { spec: String, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZooFlags {
    /// Answers every sequence of letter questions.
    pub communicable: bool,
    /// Communicable and indifferent to question content.
    pub generator: bool,
    /// Usable as a machine interrogator.
    pub interrogator: bool,
    /// Shape fits the (2 states, 1 initial cell, 3 cell segment) class.
    pub class_2_1_3: bool,
    /// Empty-question answers all binarize to zero.
    pub prob_zero_stream: bool,
    /// Answer stream coincides with the time-limited diagonal generator's
    /// opening run, so the wrapped-failure demo must skip it.
    pub matches_lambda_generator_prefix: bool,
    /// Member of the certified recognition universe.
    pub pi_universe: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZooEntry {
    pub name: String,
    pub file: String,
    #[serde(default)]
    pub flags: ZooFlags,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZooManifest {
    pub version: u32,
    pub alphabet: String,
    pub machines: Vec<ZooEntry>,
    pub testers: Vec<String>,
}

/// Knobs for tester construction; the config layer owns the defaults.
#[derive(Debug, Clone, Copy)]
pub struct TesterSettings {
    /// Per-question cycle budget for machine participants.
    pub budget: RunBudget,
    /// Recognition oracle budget.
    pub pi_budget: RunBudget,
    /// At most this many certified machines in the recognition universe.
    pub pi_universe_cap: usize,
    /// Highest enumeration index the session tester may search.
    pub search_cap: u64,
}

impl Default for TesterSettings {
    fn default() -> Self {
        TesterSettings {
            budget: RunBudget(10_000),
            pi_budget: RunBudget(10_000),
            pi_universe_cap: usize::MAX,
            search_cap: 5_000,
        }
    }
}

/// The default zoo location: the workspace checkout's zoo/ directory,
/// overridable through TMTEST_ZOO.
pub fn zoo_root() -> PathBuf {
    match std::env::var_os("TMTEST_ZOO") {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../zoo"),
    }
}

pub struct Zoo {
    root: PathBuf,
    manifest: ZooManifest,
    alphabet: Alphabet,
    cache: Mutex<BTreeMap<String, Arc<MachineDescription>>>,
}

impl Zoo {
    pub fn open() -> Result<Zoo, ZooError> {
        Zoo::open_at(&zoo_root())
    }

    pub fn open_at(root: &Path) -> Result<Zoo, ZooError> {
        let path = root.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|source| ZooError::Io { path, source })?;
        let manifest: ZooManifest = serde_json::from_str(&text)?;
        let alphabet = Alphabet::new(&manifest.alphabet, '_').map_err(|e| ZooError::Parse {
            file: "manifest.json".into(),
            message: format!("alphabet: {e:?}"),
        })?;
        Ok(Zoo { root: root.to_path_buf(), manifest, alphabet, cache: Mutex::new(BTreeMap::new()) })
    }

    pub fn manifest(&self) -> &ZooManifest {
        &self.manifest
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn entry(&self, name: &str) -> Result<&ZooEntry, ZooError> {
        self.manifest
            .machines
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| ZooError::UnknownMachine(name.to_string()))
    }

    pub fn machine(&self, name: &str) -> Result<Arc<MachineDescription>, ZooError> {
        if let Some(m) = self.cache.lock().unwrap().get(name) {
            return Ok(Arc::clone(m));
        }
        let entry = self.entry(name)?;
        let path = self.root.join(&entry.file);
        let text = std::fs::read_to_string(&path).map_err(|source| ZooError::Io { path, source })?;
        let desc = parse_dsl(&text).map_err(|e| ZooError::Parse {
            file: entry.file.clone(),
            message: e.to_string(),
        })?;
        let desc = Arc::new(desc);
        self.cache.lock().unwrap().insert(name.to_string(), Arc::clone(&desc));
        Ok(desc)
    }

    /// Entries whose flags satisfy the predicate, in manifest order.
    pub fn entries_with(&self, pred: impl Fn(&ZooFlags) -> bool) -> Vec<&ZooEntry> {
        self.manifest.machines.iter().filter(|e| pred(&e.flags)).collect()
    }

    /// A machine reference: a .tm path (anything with a separator or the
    /// extension) or a zoo name. File machines must share the zoo alphabet.
    pub fn resolve(&self, mref: &str) -> Result<Arc<MachineDescription>, ZooError> {
        if !(mref.contains('/') || mref.contains('\\') || mref.ends_with(".tm")) {
            return self.machine(mref);
        }
        let path = PathBuf::from(mref);
        let text = std::fs::read_to_string(&path).map_err(|source| ZooError::Io { path, source })?;
        let desc = parse_dsl(&text)
            .map_err(|e| ZooError::Parse { file: mref.to_string(), message: e.to_string() })?;
        if desc.alphabet != self.alphabet {
            return Err(ZooError::Parse {
                file: mref.to_string(),
                message: "machine alphabet differs from the zoo alphabet".into(),
            });
        }
        Ok(Arc::new(desc))
    }

    pub fn certificates(&self) -> Result<Vec<HaltCertificate>, ZooError> {
        let path = self.root.join("certificates.jsonl");
        let text = std::fs::read_to_string(&path).map_err(|source| ZooError::Io { path, source })?;
        Ok(parse_certificates(&text)?)
    }

    /// The recognition oracle over the certified universe.
    pub fn pi(&self, budget: RunBudget) -> Result<Arc<BoundedPi>, ZooError> {
        self.pi_capped(budget, usize::MAX)
    }

    /// Same, keeping only the first `cap` certified machines.
    pub fn pi_capped(&self, budget: RunBudget, cap: usize) -> Result<Arc<BoundedPi>, ZooError> {
        let universe = self
            .entries_with(|f| f.pi_universe)
            .iter()
            .take(cap)
            .map(|e| self.machine(&e.name))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Arc::new(
            BoundedPi::new(&self.alphabet, universe, budget).with_certificates(self.certificates()?),
        ))
    }

    /// Builds the tester a spec string names.
    pub fn tester(&self, spec: &str, settings: &TesterSettings) -> Result<Tester, ZooError> {
        let bad = |message: &str| ZooError::BadSpec { spec: spec.to_string(), message: message.into() };
        let mut parts = spec.split(':');
        let kind = parts.next().unwrap_or("");
        let rest: Vec<&str> = parts.collect();
        match (kind, rest.as_slice()) {
            ("dumb", [name]) => {
                let q = self.resolve(name)?;
                Ok(dumb_tester(q, blank_oracle(&self.alphabet), settings.budget))
            }
            ("machine", [i, q]) => {
                let i = self.resolve(i)?;
                let q = self.resolve(q)?;
                Ok(machine_tester(i, q, blank_oracle(&self.alphabet), settings.budget))
            }
            ("diag", ["time"]) => {
                let uni = UniversalEnumerator::new(&self.alphabet);
                let diag = Arc::new(DiagonalFactory {
                    source: TimeLimitedEnum::new(uni),
                    oracle: blank_oracle(&self.alphabet),
                    budget: settings.budget,
                    alphabet: self.alphabet.clone(),
                });
                Ok(dumb_tester_over("diag:time", diag))
            }
            ("diag", ["mem", params]) => {
                let nums: Vec<u64> = params
                    .split(',')
                    .map(|t| t.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("expected s,d,w as integers"))?;
                let [s, d, w] = nums[..] else {
                    return Err(bad("expected exactly three parameters s,d,w"));
                };
                let class = memory_class_enum(
                    &self.alphabet,
                    ClassParams { states: s, initial_work: d, segment: w },
                )
                .map_err(|e| bad(&e.to_string()))?;
                let diag = Arc::new(DiagonalFactory {
                    source: class.generator_enum(),
                    oracle: blank_oracle(&self.alphabet),
                    budget: settings.budget,
                    alphabet: self.alphabet.clone(),
                });
                Ok(dumb_tester_over(&format!("diag:mem:{s},{d},{w}"), diag))
            }
            ("pi", []) => {
                Ok(pi_tester(self.pi_capped(settings.pi_budget, settings.pi_universe_cap)?))
            }
            ("comm", []) => Ok(comm_tester(&self.alphabet, settings.budget, settings.search_cap)),
            ("prob", [params]) => {
                let fields: Vec<&str> = params.split(',').map(str::trim).collect();
                let (m, p0, seed) = match fields.as_slice() {
                    [m, p0] => (m, p0, "0"),
                    [m, p0, seed] => (m, p0, *seed),
                    _ => return Err(bad("expected m,p0 or m,p0,seed")),
                };
                let m: u64 = m.parse().map_err(|_| bad("m must be an integer"))?;
                let p0: f64 = p0.parse().map_err(|_| bad("p0 must be a number"))?;
                if !(0.0..=1.0).contains(&p0) {
                    return Err(bad("p0 must be a probability"));
                }
                let seed: u64 = seed.parse().map_err(|_| bad("seed must be an integer"))?;
                Ok(prob_tester(&self.alphabet, m, p0, seed))
            }
            _ => Err(bad("unknown tester kind")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding;
    use crate::participant::MachineParticipant;
    use crate::prob::binarize;
    use crate::vm::{self, MachineInstance, QuestionOutcome};
    use crate::words::BWord;

    fn zoo() -> Zoo {
        Zoo::open().expect("zoo ships with the crate")
    }

    fn lambda_answers(zoo: &Zoo, name: &str, n: usize) -> Vec<Option<String>> {
        let m = zoo.machine(name).unwrap();
        let mut inst = MachineInstance::new(m, blank_oracle(zoo.alphabet()));
        (0..n)
            .map(|_| match inst.pose_question(&BWord::lambda(), RunBudget(100_000)) {
                QuestionOutcome::Answered { answer, .. } => Some(answer.as_str().to_string()),
                QuestionOutcome::Diverged { .. } => None,
            })
            .collect()
    }

    #[test]
    fn every_manifest_machine_parses_and_matches_its_name() {
        let z = zoo();
        for e in &z.manifest().machines {
            let m = z.machine(&e.name).unwrap();
            assert_eq!(m.name, e.name, "file {} names a different machine", e.file);
            assert_eq!(m.alphabet, *z.alphabet());
        }
    }

    #[test]
    fn communicable_flag_holds_on_a_mixed_session() {
        let z = zoo();
        let ab = z.alphabet().clone();
        let questions: Vec<BWord> = ["", "a", "ab", "", "bba", "b", "", "aa", "ba", "abab", "", ""]
            .iter()
            .map(|s| BWord::from(&ab.word(s).unwrap()))
            .collect();
        for e in &z.manifest().machines {
            let m = z.machine(&e.name).unwrap();
            let out = vm::run_session(&m, &blank_oracle(&ab), &questions, RunBudget(100_000));
            if e.flags.communicable {
                assert!(out.diverged.is_none(), "{} diverged: {:?}", e.name, out.diverged);
            } else {
                assert!(out.diverged.is_some(), "{} is flagged non-communicable", e.name);
            }
        }
    }

    #[test]
    fn generator_flag_means_question_blind() {
        let z = zoo();
        let ab = z.alphabet().clone();
        for e in z.entries_with(|f| f.generator) {
            let m = z.machine(&e.name).unwrap();
            let empty: Vec<BWord> = (0..8).map(|_| BWord::lambda()).collect();
            let noisy: Vec<BWord> = ["ba", "a", "bbb", "ab", "b", "aab", "ba", "a"]
                .iter()
                .map(|s| BWord::from(&ab.word(s).unwrap()))
                .collect();
            let a = vm::run_session(&m, &blank_oracle(&ab), &empty, RunBudget(100_000));
            let b = vm::run_session(&m, &blank_oracle(&ab), &noisy, RunBudget(100_000));
            assert!(a.diverged.is_none() && b.diverged.is_none(), "{}", e.name);
            assert_eq!(a.answers, b.answers, "{} peeked at its questions", e.name);
        }
    }

    #[test]
    fn zero_stream_flag_matches_binarized_answers() {
        let z = zoo();
        let ab = z.alphabet().clone();
        for e in &z.manifest().machines {
            if !e.flags.communicable {
                continue;
            }
            let m = z.machine(&e.name).unwrap();
            let questions: Vec<BWord> = (0..10).map(|_| BWord::lambda()).collect();
            let out = vm::run_session(&m, &blank_oracle(&ab), &questions, RunBudget(100_000));
            let all_zero = out.answers.iter().all(|a| binarize(&ab, a) == 0);
            assert_eq!(all_zero, e.flags.prob_zero_stream, "{}", e.name);
        }
    }

    #[test]
    fn class_flag_matches_the_shape_check() {
        let z = zoo();
        let class = memory_class_enum(
            z.alphabet(),
            ClassParams { states: 2, initial_work: 1, segment: 3 },
        )
        .unwrap();
        for e in &z.manifest().machines {
            let m = z.machine(&e.name).unwrap();
            assert_eq!(class.is_member(&m), e.flags.class_2_1_3, "{}", e.name);
        }
    }

    #[test]
    fn counter_counts_and_parrot_parrots() {
        let z = zoo();
        let ab = z.alphabet().clone();
        let expect: Vec<Option<String>> =
            (0..8).map(|n| Some(ab.num_to_word(n).as_str().to_string())).collect();
        assert_eq!(lambda_answers(&z, "counter", 8), expect);

        let m = z.machine("parrot").unwrap();
        let qs: Vec<BWord> = ["ab", "b", "", "ba"]
            .iter()
            .map(|s| BWord::from(&ab.word(s).unwrap()))
            .collect();
        let out = vm::run_session(&m, &blank_oracle(&ab), &qs, RunBudget(100_000));
        let got: Vec<&str> = out.answers.iter().map(|w| w.as_str()).collect();
        assert_eq!(got, ["", "ab", "b", ""]);
    }

    #[test]
    fn slow_takes_linearly_longer() {
        let z = zoo();
        let m = z.machine("slow").unwrap();
        let mut inst = MachineInstance::new(m, blank_oracle(z.alphabet()));
        for n in 1..=6u64 {
            match inst.pose_question(&BWord::lambda(), RunBudget(1_000)) {
                QuestionOutcome::Answered { cycles, .. } => assert_eq!(cycles, 2 * n + 2, "n={n}"),
                other => panic!("slow diverged: {other:?}"),
            }
        }
    }

    #[test]
    fn certificates_are_rederivable() {
        let z = zoo();
        let ab = z.alphabet().clone();
        let certs = z.certificates().unwrap();
        assert!(!certs.is_empty());
        for e in z.entries_with(|f| f.pi_universe) {
            let m = z.machine(&e.name).unwrap();
            let enc = encoding::encode(&m);
            let cert = certs
                .iter()
                .find(|c| c.machine == e.name && c.question == enc.as_str())
                .unwrap_or_else(|| panic!("no certificate for {}", e.name));
            let cycles = vm::answer_cycles(&m, &blank_oracle(&ab), &BWord::from(&enc), RunBudget(100_000));
            assert_eq!(cert.halts, cycles.is_some(), "{}", e.name);
            assert_eq!(cert.cycles, cycles, "{}", e.name);
        }
    }

    #[test]
    fn manifest_testers_all_build() {
        let z = zoo();
        let settings = TesterSettings::default();
        for spec in &z.manifest().testers {
            let t = z.tester(spec, &settings).unwrap_or_else(|e| panic!("{spec}: {e}"));
            assert!(!t.id.is_empty());
        }
        for spec in ["diag:time", "diag:mem:2,1,3", "pi", "comm", "prob:3,0.5,7"] {
            z.tester(spec, &settings).unwrap_or_else(|e| panic!("{spec}: {e}"));
        }
        for spec in ["dumb:nosuch", "machine:echo", "diag:mem:2,1", "prob:x,0.5", "wat"] {
            assert!(z.tester(spec, &settings).is_err(), "{spec} should not parse");
        }
    }

    #[test]
    fn tilde_wrap_of_a_generator_is_itself() {
        // A communicable generator never diverges, so its divergence-padded
        // wrap streams the same answers.
        let z = zoo();
        let m = z.machine("toggle").unwrap();
        let mut raw = MachineParticipant::new(
            Arc::clone(&m),
            blank_oracle(z.alphabet()),
            RunBudget(10_000),
        );
        let mut wrapped = crate::participant::TildeParticipant::new(
            m,
            blank_oracle(z.alphabet()),
            RunBudget(10_000),
        );
        assert!(crate::arena::similar_on_lambda(&mut raw, &mut wrapped, 8));
    }

    /// Maintenance helper: regenerates zoo/certificates.jsonl from
    /// simulation. Run explicitly when the universe changes:
    /// cargo test -p tmtest-core regen_certificates -- --ignored
    #[test]
    #[ignore]
    fn regen_certificates() {
        let z = zoo();
        let ab = z.alphabet().clone();
        let mut lines = Vec::new();
        for e in z.entries_with(|f| f.pi_universe) {
            let m = z.machine(&e.name).unwrap();
            let enc = encoding::encode(&m);
            let cycles = vm::answer_cycles(&m, &blank_oracle(&ab), &BWord::from(&enc), RunBudget(100_000));
            let cert = HaltCertificate {
                machine: e.name.clone(),
                question: enc.as_str().to_string(),
                halts: cycles.is_some(),
                cycles,
                reason: if cycles.is_some() {
                    None
                } else {
                    Some("no answer within 100000 cycles".into())
                },
            };
            lines.push(serde_json::to_string(&cert).unwrap());
        }
        let path = zoo_root().join("certificates.jsonl");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        panic!("regenerated {} rows at {}; rerun the suite", lines.len(), path.display());
    }
}

//! tmtest: validate and run question/answer machines, hold imitation
//! tests, dump enumerations, and estimate pass rates against the
//! coin-flip tester.
//!
//! Exit codes: 0 done, 1 validation found violations, 2 usage or parse
//! errors, 3 a resource cap refused the request. Verdicts are data, not
//! exit codes: a failed test still exits 0.

mod config;

use clap::{Parser, Subcommand};
use config::Config;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use tmtest_core::arena::{run_both, run_test, Orientation};
use tmtest_core::dsl::parse_dsl;
use tmtest_core::enumerate::{ItemFactory, RunnableItem, UniversalEnumerator};
use tmtest_core::memory::{memory_class_enum_capped, ClassParams, MemoryClassError};
use tmtest_core::oracle::{blank_oracle, Oracle, RandomOracle};
use tmtest_core::participant::{MachineFactory, ParticipantFactory, TildeFactory};
use tmtest_core::prob::monte_carlo;
use tmtest_core::vm::{MachineInstance, QuestionOutcome, RunBudget};
use tmtest_core::zoo::{TesterSettings, Zoo};
use tmtest_core::{encoding, MachineDescription};

const REPORT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "tmtest", version, about = "question/answer machine arena")]
struct Cli {
    /// Configuration file (JSON); $TMTEST_CONFIG is honored when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for parallel runs; output order is unaffected.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a machine description file against the well-formedness rules.
    Validate { path: PathBuf },

    /// Pose a sequence of questions to a machine.
    Run {
        path: PathBuf,
        /// A question; repeat the flag for a longer session. Blanks allowed.
        #[arg(long = "q", value_name = "WORD")]
        questions: Vec<String>,
        /// Per-question cycle budget.
        #[arg(long)]
        budget: Option<u64>,
        /// blank (default) or random:<p0>,<seed>
        #[arg(long, default_value = "blank")]
        oracle: String,
    },

    /// Hold an imitation test and report transcripts and verdicts.
    Test {
        /// dumb:<m>, machine:<i>:<q>, diag:time, diag:mem:<s>,<d>,<w>,
        /// pi, comm, or prob:<m>,<p0>[,<seed>]; <m>/<i>/<q> are zoo names
        /// or .tm paths.
        #[arg(long)]
        tester: String,
        /// Zoo name or .tm path.
        #[arg(long)]
        subject: String,
        /// left, right, or both.
        #[arg(long, default_value = "both")]
        orientation: String,
        /// Run the subject time-limited: any question over t cycles is cut
        /// off and every answer from there on is the empty word.
        #[arg(long, value_name = "T")]
        limit: Option<u64>,
        /// Pad subject divergence with empty-word answers instead.
        #[arg(long)]
        tilde: bool,
        #[arg(long)]
        step_cap: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
    },

    /// Dump an enumeration as JSON lines.
    Enumerate {
        /// universal, time, or mem.
        #[arg(long, default_value = "universal")]
        kind: String,
        /// Entries to dump.
        #[arg(short = 'N', long = "count", default_value_t = 10)]
        count: u64,
        /// State bound (mem).
        #[arg(long)]
        s: Option<u64>,
        /// Initial work-tape bound (mem).
        #[arg(long)]
        d: Option<u64>,
        /// Scanned segment bound (mem).
        #[arg(long)]
        w: Option<u64>,
    },

    /// Monte-Carlo estimate of the pass rate against the coin-flip tester.
    Prob {
        /// Zoo name or .tm path.
        #[arg(long)]
        subject: String,
        /// Answers the flag machines must reproduce.
        #[arg(long)]
        m: u64,
        /// Probability of a zero coin.
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        step_cap: Option<u64>,
    },
}

/// An error with an exit code; domain verdicts never come through here.
enum Failure {
    /// Bad invocation, unreadable or unparseable inputs.
    Usage(String),
    /// A size or budget cap refused the request.
    Resource(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Resource(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Resource(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Only the first global pool wins; a second init is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let out = cli.out.clone();
    match dispatch(cli) {
        Ok((report, code)) => match emit(&report, out.as_deref()) {
            Ok(()) => ExitCode::from(code),
            Err(e) => {
                eprintln!("tmtest: {e}");
                ExitCode::from(2)
            }
        },
        Err(f) => {
            eprintln!("tmtest: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// One JSON document per line; single reports are one line of pretty JSON's
/// compact cousin. Keeping every line self-contained makes the output
/// greppable and byte-stable.
fn emit(lines: &[Value], out: Option<&std::path::Path>) -> std::io::Result<()> {
    let text: String = lines.iter().map(|v| format!("{v}\n")).collect();
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(Vec<Value>, u8), Failure> {
    let cfg = Config::load(cli.config.as_deref()).map_err(Failure::Usage)?;
    let zoo = Zoo::open().map_err(usage)?;
    if cfg.alphabet != zoo.alphabet().letters().iter().collect::<String>() {
        return Err(Failure::Usage(format!(
            "configured alphabet {:?} does not match the zoo manifest",
            cfg.alphabet
        )));
    }
    match cli.cmd {
        Cmd::Validate { path } => cmd_validate(&cfg, &path),
        Cmd::Run { path, questions, budget, oracle } => {
            cmd_run(&cfg, &zoo, &path, &questions, budget, &oracle)
        }
        Cmd::Test { tester, subject, orientation, limit, tilde, step_cap, budget } => cmd_test(
            &cfg,
            &zoo,
            &tester,
            &subject,
            &orientation,
            limit,
            tilde,
            step_cap.unwrap_or(cfg.step_cap),
            budget.unwrap_or(cfg.budget),
        ),
        Cmd::Enumerate { kind, count, s, d, w } => cmd_enumerate(&cfg, &zoo, &kind, count, s, d, w),
        Cmd::Prob { subject, m, p0, trials, seed, budget, step_cap } => cmd_prob(
            &cfg,
            &zoo,
            &subject,
            m,
            p0,
            trials.unwrap_or(cfg.trials),
            seed.unwrap_or(cfg.seed),
            budget.unwrap_or(cfg.budget),
            step_cap.unwrap_or(cfg.step_cap),
        ),
    }
}

fn settings(cfg: &Config, budget: u64) -> TesterSettings {
    TesterSettings {
        budget: RunBudget(budget),
        pi_budget: RunBudget(cfg.pi_budget),
        pi_universe_cap: cfg.pi_universe,
        search_cap: cfg.search_cap,
    }
}

fn cmd_validate(cfg: &Config, path: &std::path::Path) -> Result<(Vec<Value>, u8), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    // The text format refuses ill-formed machines outright; the JSON form
    // is unchecked on ingest, so validation can actually find violations.
    let desc = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<MachineDescription>(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    } else {
        parse_dsl(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    };
    let violations: Vec<String> = desc.validate().iter().map(|v| v.to_string()).collect();
    let ok = violations.is_empty();
    let report = json!({
        "version": REPORT_VERSION,
        "config_hash": cfg.hash(),
        "command": "validate",
        "file": path.display().to_string(),
        "machine": desc.name,
        "ok": ok,
        "violations": violations,
    });
    Ok((vec![report], if ok { 0 } else { 1 }))
}

fn parse_oracle(zoo: &Zoo, spec: &str) -> Result<Arc<dyn Oracle>, Failure> {
    if spec == "blank" {
        return Ok(blank_oracle(zoo.alphabet()));
    }
    let params = spec
        .strip_prefix("random:")
        .ok_or_else(|| Failure::Usage(format!("unknown oracle {spec:?}")))?;
    let (p0, seed) = params
        .split_once(',')
        .ok_or_else(|| Failure::Usage("random oracle needs p0,seed".into()))?;
    let p0: f64 = p0.trim().parse().map_err(usage)?;
    if !(0.0..=1.0).contains(&p0) {
        return Err(Failure::Usage("p0 must be a probability".into()));
    }
    let seed: u64 = seed.trim().parse().map_err(usage)?;
    Ok(Arc::new(RandomOracle::new(zoo.alphabet(), p0, seed)))
}

fn cmd_run(
    cfg: &Config,
    zoo: &Zoo,
    path: &std::path::Path,
    questions: &[String],
    budget: Option<u64>,
    oracle: &str,
) -> Result<(Vec<Value>, u8), Failure> {
    let desc = zoo.resolve(&path.display().to_string()).map_err(usage)?;
    let budget = RunBudget(budget.unwrap_or(cfg.budget));
    let mut inst = MachineInstance::new(Arc::clone(&desc), parse_oracle(zoo, oracle)?);
    let mut outcomes = Vec::new();
    for q in questions {
        let q = zoo.alphabet().bword(q).map_err(usage)?;
        outcomes.push(match inst.pose_question(&q, budget) {
            QuestionOutcome::Answered { answer, cycles, mark } => json!({
                "question": q.as_str(),
                "answer": answer.as_str(),
                "cycles": cycles,
                "mark": mark,
            }),
            QuestionOutcome::Diverged { reason, cycles } => json!({
                "question": q.as_str(),
                "diverged": reason,
                "cycles": cycles,
            }),
        });
    }
    let report = json!({
        "version": REPORT_VERSION,
        "config_hash": cfg.hash(),
        "command": "run",
        "file": path.display().to_string(),
        "machine": desc.name,
        "budget": budget.0,
        "oracle": oracle,
        "outcomes": outcomes,
    });
    Ok((vec![report], 0))
}

fn subject_factory(
    zoo: &Zoo,
    subject: &str,
    limit: Option<u64>,
    tilde: bool,
    budget: u64,
) -> Result<(Arc<MachineDescription>, Box<dyn ParticipantFactory>), Failure> {
    let desc = zoo.resolve(subject).map_err(usage)?;
    let oracle = blank_oracle(zoo.alphabet());
    let budget = RunBudget(budget);
    let factory: Box<dyn ParticipantFactory> = match (limit, tilde) {
        (Some(_), true) => {
            return Err(Failure::Usage("--limit and --tilde are alternatives".into()))
        }
        (Some(t), false) => Box::new(ItemFactory {
            item: RunnableItem::TimeLimited { base: Arc::clone(&desc), t },
            oracle,
            budget,
        }),
        (None, true) => Box::new(TildeFactory { desc: Arc::clone(&desc), oracle, budget }),
        (None, false) => Box::new(MachineFactory::new(Arc::clone(&desc), oracle, budget)),
    };
    Ok((desc, factory))
}

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    cfg: &Config,
    zoo: &Zoo,
    tester_spec: &str,
    subject: &str,
    orientation: &str,
    limit: Option<u64>,
    tilde: bool,
    step_cap: u64,
    budget: u64,
) -> Result<(Vec<Value>, u8), Failure> {
    let tester = zoo.tester(tester_spec, &settings(cfg, budget)).map_err(usage)?;
    let (_, factory) = subject_factory(zoo, subject, limit, tilde, budget)?;
    let head = |orientation: &str| {
        json!({
            "version": REPORT_VERSION,
            "config_hash": cfg.hash(),
            "command": "test",
            "tester": tester.id,
            "subject": factory.label(),
            "orientation": orientation,
            "step_cap": step_cap,
        })
    };
    let merge = |mut base: Value, extra: Value| {
        let (Some(b), Some(e)) = (base.as_object_mut(), extra.as_object()) else {
            unreachable!("reports are objects");
        };
        b.extend(e.clone());
        base
    };
    let report = match orientation {
        "both" => {
            let (l, r, v) = run_both(&tester, factory.as_ref(), step_cap);
            merge(
                head("both"),
                json!({
                    "left": l,
                    "right": r,
                    "verdict": v,
                }),
            )
        }
        "left" | "right" => {
            let o = if orientation == "left" { Orientation::Left } else { Orientation::Right };
            let t = run_test(&tester, factory.as_ref(), o, step_cap);
            merge(head(orientation), json!({ "transcript": t }))
        }
        other => return Err(Failure::Usage(format!("unknown orientation {other:?}"))),
    };
    Ok((vec![report], 0))
}

fn cmd_enumerate(
    cfg: &Config,
    zoo: &Zoo,
    kind: &str,
    count: u64,
    s: Option<u64>,
    d: Option<u64>,
    w: Option<u64>,
) -> Result<(Vec<Value>, u8), Failure> {
    if count < 1 {
        return Err(Failure::Usage("count must be at least 1".into()));
    }
    let hash = cfg.hash();
    let mut lines = Vec::new();
    match kind {
        "universal" => {
            let uni = UniversalEnumerator::new(zoo.alphabet());
            for i in 1..=count {
                let m = uni.machine(i);
                lines.push(json!({
                    "version": REPORT_VERSION,
                    "config_hash": hash,
                    "kind": "universal",
                    "index": i,
                    "encoding": uni.encoding(i).as_str(),
                    "machine": m.name,
                    "states": m.state_count(),
                }));
            }
        }
        "time" => {
            let uni = UniversalEnumerator::new(zoo.alphabet());
            let tl = tmtest_core::enumerate::TimeLimitedEnum::new(uni);
            use tmtest_core::enumerate::Enumerator;
            for i in 1..=count {
                let item = tl.item(i);
                let RunnableItem::TimeLimited { ref base, t } = item else {
                    unreachable!("time enumeration yields time-limited items");
                };
                lines.push(json!({
                    "version": REPORT_VERSION,
                    "config_hash": hash,
                    "kind": "time",
                    "index": i,
                    "key": item.key(),
                    "encoding": encoding::encode(base).as_str(),
                    "t": t,
                }));
            }
        }
        "mem" => {
            let (Some(s), Some(d), Some(w)) = (s, d, w) else {
                return Err(Failure::Usage("mem enumeration needs --s, --d and --w".into()));
            };
            let class = memory_class_enum_capped(
                zoo.alphabet(),
                ClassParams { states: s, initial_work: d, segment: w },
                cfg.space_cap,
            )
            .map_err(|e| match e {
                MemoryClassError::BadParams => usage(e),
                MemoryClassError::SizeCapExceeded { .. } => Failure::Resource(e.to_string()),
            })?;
            lines.push(json!({
                "version": REPORT_VERSION,
                "config_hash": hash,
                "kind": "mem",
                "params": {"states": s, "initial_work": d, "segment": w},
                "n_bound": class.n_bound().to_string(),
                "max_encoding_len": class.max_encoding_len(),
                "class_count": class.class_count().to_string(),
            }));
            for (i, enc) in class.candidates(count as usize).iter().enumerate() {
                let desc = encoding::decode(zoo.alphabet(), enc)
                    .expect("candidates are valid encodings");
                let obs = class.observe(&Arc::new(desc));
                lines.push(json!({
                    "version": REPORT_VERSION,
                    "config_hash": hash,
                    "kind": "mem",
                    "index": i + 1,
                    "encoding": enc.as_str(),
                    "observation": obs,
                }));
            }
        }
        other => return Err(Failure::Usage(format!("unknown enumeration kind {other:?}"))),
    }
    Ok((lines, 0))
}

#[allow(clippy::too_many_arguments)]
fn cmd_prob(
    cfg: &Config,
    zoo: &Zoo,
    subject: &str,
    m: u64,
    p0: f64,
    trials: u64,
    seed: u64,
    budget: u64,
    step_cap: u64,
) -> Result<(Vec<Value>, u8), Failure> {
    if m < 1 || trials < 1 {
        return Err(Failure::Usage("m and trials must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p0) || p0 == 1.0 && m > 0 {
        return Err(Failure::Usage("p0 must be a probability below 1".into()));
    }
    let desc = zoo.resolve(subject).map_err(usage)?;
    let outcome = monte_carlo(&desc, m, p0, trials, seed, RunBudget(budget), step_cap);
    let mut report = outcome.report();
    let obj = report.as_object_mut().expect("report is an object");
    obj.insert("version".into(), json!(REPORT_VERSION));
    obj.insert("config_hash".into(), json!(cfg.hash()));
    obj.insert("command".into(), json!("prob"));
    obj.insert("within_margin".into(), json!(outcome.within_margin()));
    Ok((vec![report], 0))
}

use std::sync::Arc;

use tmtest_core::arena::{pi_tester, run_test, Orientation};
use tmtest_core::dsl::parse_dsl;
use tmtest_core::oracle::{blank_oracle, BoundedPi};
use tmtest_core::participant::MachineFactory;
use tmtest_core::vm::RunBudget;
use tmtest_core::words::Alphabet;

const QUIET: &str = "\
machine quiet
states s d
initial s
final d

s _ _ _ -> d _ S S S .
s _ a _ -> d _ S S S .
s _ b _ -> d _ S S S .
";

const LOOP: &str = "\
machine loop
states s
initial s

s _ _ _ -> s _ S S S .
s a _ _ -> s a S S S .
s b _ _ -> s b S S S .
";

const ECHO: &str = "\
machine echo
states copy done
initial copy
final done

copy _ _ _ -> done _ S S S .
copy _ a _ -> copy _ S R S a
copy _ b _ -> copy _ S R S b
";

const LIAR: &str = "\
machine liar
states s d
initial s
final d

s _ _ _ -> d _ S S S a
";

#[test]
fn probe_liar_transcript() {
    let ab = Alphabet::ab();
    let m = |t: &str| Arc::new(parse_dsl(t).unwrap());
    let pi = Arc::new(BoundedPi::new(&ab, vec![m(QUIET), m(LOOP), m(ECHO)], RunBudget(10_000)));
    let t = pi_tester(Arc::clone(&pi));
    let subject = MachineFactory::new(m(LIAR), blank_oracle(&ab), RunBudget(10_000));
    let l = run_test(&t, &subject, Orientation::Left, 10);
    println!("{}", serde_json::to_string_pretty(&l).unwrap());
}

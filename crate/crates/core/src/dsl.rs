//! The .tm text format.
//!
//! Line oriented, `#` to end of line is a comment. Header directives come
//! in any order; every line containing `->` is a transition. Grammar:
//!
//! ```text
//! machine <name>
//! alphabet <letters>          # default ab
//! blank <char>                # default _
//! states <name> <name> ...
//! initial <name>
//! final <name>[:left|:right] ...   # omit if no final states
//! extras <char> <char> ...         # extra work symbols, omit if none
//! init_work <word>                 # starting work tape, omit if empty
//!
//! <state> <work> <input> <oracle> -> <next> <write> <wmove> <imove> <omove> <emit>
//! ```
//!
//! Moves are L, R or S. The emit field is a single tape symbol or `.` for
//! no emission. Symbols are literal single characters; `.`, `#`, `:` and
//! whitespace cannot be tape symbols.

use crate::machine::{
    MachineDescription, Move, Side, StateId, StateStatus, Transition, TransitionAction,
    TransitionKey,
};
use crate::words::Alphabet;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

const RESERVED: &[char] = &['.', '#', ':'];

fn symbol_token(line: usize, tok: &str, what: &str) -> Result<char, ParseError> {
    let mut chars = tok.chars();
    let (Some(c), None) = (chars.next(), chars.next()) else {
        return err(line, format!("{what} must be a single character, got {tok:?}"));
    };
    if RESERVED.contains(&c) {
        return err(line, format!("{what} may not be {c:?}"));
    }
    Ok(c)
}

fn move_token(line: usize, tok: &str) -> Result<Move, ParseError> {
    match tok {
        "L" => Ok(Move::Left),
        "R" => Ok(Move::Right),
        "S" => Ok(Move::Stay),
        other => err(line, format!("move must be L, R or S, got {other:?}")),
    }
}

struct Header {
    name: Option<(usize, String)>,
    letters: Option<(usize, String)>,
    blank: Option<(usize, char)>,
    states: Option<(usize, Vec<String>)>,
    initial: Option<(usize, String)>,
    finals: Option<(usize, Vec<(String, Option<Side>)>)>,
    extras: Option<(usize, Vec<char>)>,
    init_work: Option<(usize, String)>,
}

pub fn parse_dsl(text: &str) -> Result<MachineDescription, ParseError> {
    let mut header = Header {
        name: None,
        letters: None,
        blank: None,
        states: None,
        initial: None,
        finals: None,
        extras: None,
        init_work: None,
    };
    let mut raw_transitions: Vec<(usize, Vec<String>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = raw.split('#').next().unwrap_or("");
        let tokens: Vec<String> = stripped.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.iter().any(|t| t == "->") {
            raw_transitions.push((line, tokens));
            continue;
        }
        let (directive, args) = (tokens[0].as_str(), &tokens[1..]);
        macro_rules! set_once {
            ($slot:expr, $value:expr) => {{
                if $slot.is_some() {
                    return err(line, format!("duplicate {directive} directive"));
                }
                $slot = Some((line, $value));
            }};
        }
        match directive {
            "machine" => {
                let [name] = args else {
                    return err(line, "machine takes exactly one name");
                };
                set_once!(header.name, name.clone());
            }
            "alphabet" => {
                let [letters] = args else {
                    return err(line, "alphabet takes the letters as one token");
                };
                set_once!(header.letters, letters.clone());
            }
            "blank" => {
                let [tok] = args else {
                    return err(line, "blank takes exactly one symbol");
                };
                set_once!(header.blank, symbol_token(line, tok, "blank symbol")?);
            }
            "states" => {
                if args.is_empty() {
                    return err(line, "states needs at least one name");
                }
                set_once!(header.states, args.to_vec());
            }
            "initial" => {
                let [name] = args else {
                    return err(line, "initial takes exactly one state name");
                };
                set_once!(header.initial, name.clone());
            }
            "final" => {
                if args.is_empty() {
                    return err(line, "final needs at least one state name");
                }
                let mut finals = Vec::new();
                for a in args {
                    let (name, mark) = match a.split_once(':') {
                        None => (a.clone(), None),
                        Some((n, "left")) => (n.to_string(), Some(Side::Left)),
                        Some((n, "right")) => (n.to_string(), Some(Side::Right)),
                        Some((_, m)) => {
                            return err(line, format!("final mark must be left or right, got {m:?}"))
                        }
                    };
                    finals.push((name, mark));
                }
                set_once!(header.finals, finals);
            }
            "extras" => {
                if args.is_empty() {
                    return err(line, "extras needs at least one symbol");
                }
                let mut extras = Vec::new();
                for a in args {
                    extras.push(symbol_token(line, a, "extra work symbol")?);
                }
                set_once!(header.extras, extras);
            }
            "init_work" => {
                let [word] = args else {
                    return err(line, "init_work takes the tape content as one token");
                };
                set_once!(header.init_work, word.clone());
            }
            other => return err(line, format!("unknown directive {other:?}")),
        }
    }

    let Some((_, name)) = header.name else {
        return err(0, "missing machine directive");
    };
    let Some((states_line, state_list)) = header.states else {
        return err(0, "missing states directive");
    };
    let Some((initial_line, initial_name)) = header.initial else {
        return err(0, "missing initial directive");
    };

    let letters = header.letters.map(|(_, l)| l).unwrap_or_else(|| "ab".into());
    for c in letters.chars() {
        if RESERVED.contains(&c) || c.is_whitespace() {
            return err(0, format!("letter {c:?} is reserved"));
        }
    }
    let blank = header.blank.map(|(_, b)| b).unwrap_or('_');
    let alphabet = match Alphabet::new(&letters, blank) {
        Ok(a) => a,
        Err(e) => return err(0, format!("bad alphabet: {e}")),
    };

    let mut index: HashMap<&str, StateId> = HashMap::new();
    for (i, s) in state_list.iter().enumerate() {
        if s.contains(':') {
            return err(states_line, format!("state name {s:?} may not contain a colon"));
        }
        if index.insert(s.as_str(), StateId(i as u32)).is_some() {
            return err(states_line, format!("state {s:?} declared twice"));
        }
    }
    let lookup = |line: usize, name: &str| -> Result<StateId, ParseError> {
        match index.get(name) {
            Some(&s) => Ok(s),
            None => err(line, format!("unknown state {name:?}")),
        }
    };

    let initial = lookup(initial_line, &initial_name)?;

    let mut statuses = vec![StateStatus::Working; state_list.len()];
    if let Some((line, finals)) = header.finals {
        for (fname, mark) in finals {
            let s = lookup(line, &fname)?;
            if statuses[s.0 as usize].is_final() {
                return err(line, format!("state {fname:?} marked final twice"));
            }
            statuses[s.0 as usize] = StateStatus::Final(mark);
        }
    }

    let extras = header.extras.map(|(_, e)| e).unwrap_or_default();
    let is_work = |c: char| alphabet.is_tape_symbol(c) || extras.contains(&c);

    let initial_work: Vec<char> = match header.init_work {
        None => vec![],
        Some((line, word)) => {
            let cells: Vec<char> = word.chars().collect();
            if let Some(&c) = cells.iter().find(|&&c| !is_work(c)) {
                return err(line, format!("init_work symbol {c:?} not declared"));
            }
            cells
        }
    };

    let mut transitions = Vec::with_capacity(raw_transitions.len());
    let mut seen_keys = HashMap::new();
    for (line, tokens) in raw_transitions {
        let arrow = tokens.iter().position(|t| t == "->").expect("filtered on ->");
        let (lhs, rhs) = (&tokens[..arrow], &tokens[arrow + 1..]);
        let [state_tok, w_tok, i_tok, o_tok] = lhs else {
            return err(line, "transition needs state, work, input, oracle before ->");
        };
        let [next_tok, write_tok, wm_tok, im_tok, om_tok, emit_tok] = rhs else {
            return err(line, "transition needs next, write, 3 moves, emit after ->");
        };
        let state = lookup(line, state_tok)?;
        if statuses[state.0 as usize].is_final() {
            return err(line, format!("transition out of final state {state_tok:?}"));
        }
        let work = symbol_token(line, w_tok, "work symbol")?;
        if !is_work(work) {
            return err(line, format!("work symbol {work:?} not declared"));
        }
        let input = symbol_token(line, i_tok, "input symbol")?;
        if !alphabet.is_tape_symbol(input) {
            return err(line, format!("input symbol {input:?} not a tape symbol"));
        }
        let oracle = symbol_token(line, o_tok, "oracle symbol")?;
        if !alphabet.is_tape_symbol(oracle) {
            return err(line, format!("oracle symbol {oracle:?} not a tape symbol"));
        }
        let next = lookup(line, next_tok)?;
        let write = symbol_token(line, write_tok, "written symbol")?;
        if !is_work(write) {
            return err(line, format!("written symbol {write:?} not declared"));
        }
        let work_move = move_token(line, wm_tok)?;
        let input_move = move_token(line, im_tok)?;
        let oracle_move = move_token(line, om_tok)?;
        let emit = if emit_tok == "." {
            None
        } else {
            let e = symbol_token(line, emit_tok, "emitted symbol")?;
            if !alphabet.is_tape_symbol(e) {
                return err(line, format!("emitted symbol {e:?} not a tape symbol"));
            }
            Some(e)
        };
        let key = TransitionKey { state, work, input, oracle };
        if let Some(first) = seen_keys.insert(key, line) {
            return err(
                line,
                format!(
                    "nondeterministic: duplicate key ({} {:?} {:?} {:?}), first at line {first}",
                    state_tok, work, input, oracle
                ),
            );
        }
        transitions.push(Transition {
            key,
            action: TransitionAction { next, write, work_move, input_move, oracle_move, emit },
        });
    }

    let desc = MachineDescription {
        alphabet,
        statuses,
        initial,
        extras,
        initial_work,
        transitions,
        name,
        state_names: state_list,
    };
    match desc.checked() {
        Ok(d) => Ok(d),
        Err(v) => err(0, v.to_string()),
    }
}

/// Canonical text form; `parse_dsl` inverts it.
pub fn print_dsl(d: &MachineDescription) -> String {
    let mut out = String::new();
    let letters: String = d.alphabet.letters().iter().collect();
    out.push_str(&format!("machine {}\n", d.name));
    out.push_str(&format!("alphabet {letters}\n"));
    out.push_str(&format!("blank {}\n", d.alphabet.blank()));
    let names: Vec<String> = (0..d.state_count()).map(|i| d.state_name(StateId(i))).collect();
    out.push_str(&format!("states {}\n", names.join(" ")));
    out.push_str(&format!("initial {}\n", names[d.initial.0 as usize]));
    let finals: Vec<String> = d
        .statuses
        .iter()
        .enumerate()
        .filter_map(|(i, st)| match st {
            StateStatus::Final(None) => Some(names[i].clone()),
            StateStatus::Final(Some(side)) => Some(format!("{}:{side}", names[i])),
            StateStatus::Working => None,
        })
        .collect();
    if !finals.is_empty() {
        out.push_str(&format!("final {}\n", finals.join(" ")));
    }
    if !d.extras.is_empty() {
        let extras: Vec<String> = d.extras.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("extras {}\n", extras.join(" ")));
    }
    if !d.initial_work.is_empty() {
        let word: String = d.initial_work.iter().collect();
        out.push_str(&format!("init_work {word}\n"));
    }
    if !d.transitions.is_empty() {
        out.push('\n');
    }
    for t in &d.transitions {
        let emit = match t.action.emit {
            None => ".".to_string(),
            Some(e) => e.to_string(),
        };
        out.push_str(&format!(
            "{} {} {} {} -> {} {} {} {} {} {}\n",
            names[t.key.state.0 as usize],
            t.key.work,
            t.key.input,
            t.key.oracle,
            names[t.action.next.0 as usize],
            t.action.write,
            move_char(t.action.work_move),
            move_char(t.action.input_move),
            move_char(t.action.oracle_move),
            emit,
        ));
    }
    out
}

fn move_char(m: Move) -> char {
    match m {
        Move::Left => 'L',
        Move::Right => 'R',
        Move::Stay => 'S',
    }
}

//! Single-tape machines over {0,1}, a direct interpreter for them, and their
//! compilation to terms.
//!
//! A configuration keeps the cells left of the head as a stack (nearest cell
//! first, `⊥` at the bottom) and the head cell followed by the cells to its
//! right (`⊤` last). The term encoding mirrors this: the left stack is built
//! on `x` and the right part on `x'`, outermost cell first.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;
use crate::measure::{normalize_sigma, RoundReport, SigmaOptions};
use crate::stdlib::{self, poly_encode, poly_env, PolySpec};
use crate::term::{
    app, apps, bang, bang_door, lam, lams, par, par_door, par_door_n, par_n, parse_term, reduce_term,
    tensor_all, var, Pattern, Term,
};
use crate::translate::{decode_tape, decode_tape_term, term_to_net};
use crate::typecheck::{check_term, synth_term, CheckError, TypeEnv};

/// Tape symbols in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sym {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "*")]
    Star,
    #[serde(rename = "BOT")]
    Bot,
    #[serde(rename = "TOP")]
    Top,
}

impl Sym {
    pub const ALL: [Sym; 5] = [Sym::Zero, Sym::One, Sym::Star, Sym::Bot, Sym::Top];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The λ-variable a configuration binds for this symbol.
    pub fn component(self) -> &'static str {
        ["c0", "c1", "cs", "cb", "ct"][self.index()]
    }

    pub fn bit(b: u8) -> Sym {
        if b == 0 {
            Sym::Zero
        } else {
            Sym::One
        }
    }

    /// Symbols a head may leave in a cell of the tape body.
    pub fn is_body(self) -> bool {
        matches!(self, Sym::Zero | Sym::One | Sym::Star)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["0", "1", "*", "BOT", "TOP"][self.index()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    L,
    R,
    S,
}

/// One entry of the machine file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub state: String,
    pub read: Sym,
    pub write: Sym,
    pub next: String,
    #[serde(rename = "move")]
    pub mv: Move,
}

/// The machine file as written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub states: Vec<String>,
    pub start: String,
    pub accept: String,
    pub delta: Vec<TransitionSpec>,
    pub poly: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub write: Sym,
    pub next: usize,
    pub mv: Move,
}

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("machine file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("the machine has no states")]
    NoStates,
    #[error("state `{0}` is listed twice")]
    DuplicateState(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("two transitions for ({0}, {1})")]
    DuplicateTransition(String, Sym),
    #[error("({state}, {read}) writes {write} and moves {mv:?}, which leaves the tape ill-formed")]
    EdgeDiscipline { state: String, read: Sym, write: Sym, mv: Move },
    #[error(
        "accepting state must stay and rewrite what it reads, not ({read}) -> ({write}, {next}, {mv:?})"
    )]
    AcceptMoves { read: Sym, write: Sym, next: String, mv: Move },
    #[error("the polynomial has no coefficients")]
    NoPolynomial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pub states: Vec<String>,
    pub start: usize,
    pub accept: usize,
    /// `table[state][read.index()]`.
    pub table: Vec<[Action; 5]>,
    pub poly: PolySpec,
}

impl Machine {
    pub fn from_json(text: &str) -> Result<Machine, MachineError> {
        Machine::from_spec(&serde_json::from_str(text)?)
    }

    /// Entries the file leaves out rewrite the cell and stay in place.
    pub fn from_spec(spec: &MachineSpec) -> Result<Machine, MachineError> {
        if spec.states.is_empty() {
            return Err(MachineError::NoStates);
        }
        if spec.poly.is_empty() {
            return Err(MachineError::NoPolynomial);
        }
        let mut index = BTreeMap::new();
        for (i, s) in spec.states.iter().enumerate() {
            if index.insert(s.as_str(), i).is_some() {
                return Err(MachineError::DuplicateState(s.clone()));
            }
        }
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| MachineError::UnknownState(s.into()));
        let start = lookup(&spec.start)?;
        let accept = lookup(&spec.accept)?;
        let mut table: Vec<[Action; 5]> = (0..spec.states.len())
            .map(|i| Sym::ALL.map(|c| Action { write: c, next: i, mv: Move::S }))
            .collect();
        let mut seen = BTreeMap::new();
        for t in &spec.delta {
            let i = lookup(&t.state)?;
            let j = lookup(&t.next)?;
            if seen.insert((i, t.read), ()).is_some() {
                return Err(MachineError::DuplicateTransition(t.state.clone(), t.read));
            }
            table[i][t.read.index()] = Action { write: t.write, next: j, mv: t.mv };
        }
        let m =
            Machine { states: spec.states.clone(), start, accept, table, poly: PolySpec::new(&spec.poly) };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), MachineError> {
        for (i, row) in self.table.iter().enumerate() {
            for read in Sym::ALL {
                let a = row[read.index()];
                if i == self.accept {
                    if a.mv != Move::S || a.write != read || a.next != i {
                        return Err(MachineError::AcceptMoves {
                            read,
                            write: a.write,
                            next: self.states[a.next].clone(),
                            mv: a.mv,
                        });
                    }
                    continue;
                }
                let ok = match (read, a.mv) {
                    (Sym::Bot, Move::L) | (Sym::Top, Move::R) => a.write.is_body(),
                    (Sym::Bot, _) => a.write == Sym::Bot,
                    (Sym::Top, _) => a.write == Sym::Top,
                    _ => a.write.is_body(),
                };
                if !ok {
                    return Err(MachineError::EdgeDiscipline {
                        state: self.states[i].clone(),
                        read,
                        write: a.write,
                        mv: a.mv,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn with_poly(mut self, coeffs: &[u64]) -> Machine {
        self.poly = PolySpec::new(coeffs);
        self
    }

    pub fn action(&self, state: usize, read: Sym) -> Action {
        self.table[state][read.index()]
    }
}

// ---------------------------------------------------------------------------
// Oracle

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OracleConfig {
    /// Cells left of the head, nearest first.
    pub left: Vec<Sym>,
    /// The head cell and the cells to its right.
    pub right: Vec<Sym>,
    pub state: usize,
}

impl OracleConfig {
    pub fn initial(m: &Machine, input: &[u8]) -> OracleConfig {
        let mut right: Vec<Sym> = input.iter().map(|&b| Sym::bit(b)).collect();
        right.push(Sym::Top);
        OracleConfig { left: vec![Sym::Bot], right, state: m.start }
    }

    /// The right part up to the first `⋆`, edge markers dropped.
    pub fn output(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for s in &self.right {
            match s {
                Sym::Zero => out.push(0),
                Sym::One => out.push(1),
                Sym::Star => break,
                Sym::Bot | Sym::Top => {}
            }
        }
        out
    }
}

/// One transition. A head past the right end reads nothing and puts `⊤`
/// back; a left move off an empty left part pushes nothing.
pub fn oracle_step(m: &Machine, c: &OracleConfig) -> OracleConfig {
    let mut c = c.clone();
    let Some(&read) = c.right.first() else {
        c.right = vec![Sym::Top];
        return c;
    };
    let a = m.action(c.state, read);
    let rest = c.right[1..].to_vec();
    match (a.mv, read) {
        (Move::L, Sym::Bot) => c.right = [vec![Sym::Bot, a.write], rest].concat(),
        (Move::L, _) => {
            let mut right = Vec::new();
            if !c.left.is_empty() {
                right.push(c.left.remove(0));
            }
            right.push(a.write);
            right.extend(rest);
            c.right = right;
        }
        (Move::R, Sym::Top) => {
            c.left.insert(0, a.write);
            c.right = vec![Sym::Top];
        }
        (Move::R, _) => {
            c.left.insert(0, a.write);
            c.right = rest;
        }
        (Move::S, _) => c.right[0] = a.write,
    }
    c.state = a.next;
    c
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRun {
    pub config: OracleConfig,
    pub steps: u64,
    /// First step count at which the accepting state was reached.
    pub accepted_at: Option<u64>,
    pub output: Vec<u8>,
}

/// Runs exactly `p(|input|)` steps.
pub fn oracle_run(m: &Machine, input: &[u8]) -> OracleRun {
    let steps = m.poly.eval(input.len() as u64);
    let mut c = OracleConfig::initial(m, input);
    let mut accepted_at = (c.state == m.accept).then_some(0);
    for k in 1..=steps {
        c = oracle_step(m, &c);
        if accepted_at.is_none() && c.state == m.accept {
            accepted_at = Some(k);
        }
    }
    let output = c.output();
    OracleRun { config: c, steps, accepted_at, output }
}

// ---------------------------------------------------------------------------
// Terms

fn t(text: &str) -> Term {
    parse_term(text).unwrap_or_else(|e| panic!("tm source {text:?}: {e}"))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn tuple_pattern(vars: &[String]) -> Pattern {
    Pattern::tuple_of(vars.iter().map(|v| Pattern::var(v)).collect())
}

/// `λx₀⊗…⊗x_{n−1}⊗v. xᵢ v`.
pub fn select(n: usize, i: usize) -> Term {
    assert!(i < n, "select {i} of {n}");
    let mut vars = names("x", n);
    vars.push("v".into());
    lam(tuple_pattern(&vars), app(var(&vars[i]), var("v")))
}

/// `state_i` among `n` states.
pub fn compile_state(i: usize, n: usize) -> Term {
    select(n, i)
}

/// `Π_χ`; `None` is the column for a head past the tape.
pub fn projection(col: Option<Sym>) -> Term {
    select(6, col.map_or(5, Sym::index))
}

pub fn projection_name(col: Option<Sym>) -> &'static str {
    ["pi_0", "pi_1", "pi_s", "pi_b", "pi_t", "pi_e"][col.map_or(5, Sym::index)]
}

/// The shapes an entry of the compiled transition table takes. `w` is the
/// written symbol and `next` the target state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    Left {
        w: Sym,
        next: usize,
    },
    /// Left move from `⊥`: a fresh `⊥` goes under the head.
    LeftBot {
        w: Sym,
        next: usize,
    },
    Right {
        w: Sym,
        next: usize,
    },
    /// Right move from `⊤`: a fresh `⊤` goes under the head.
    RightTop {
        w: Sym,
        next: usize,
    },
    Stay {
        w: Sym,
        next: usize,
    },
}

impl Shift {
    pub fn of(m: &Machine, state: usize, read: Sym) -> Shift {
        let Action { write: w, next, mv } = m.action(state, read);
        match (mv, read) {
            (Move::L, Sym::Bot) => Shift::LeftBot { w, next },
            (Move::L, _) => Shift::Left { w, next },
            (Move::R, Sym::Top) => Shift::RightTop { w, next },
            (Move::R, _) => Shift::Right { w, next },
            (Move::S, _) => Shift::Stay { w, next },
        }
    }

    /// `λ0⊗1⊗⋆⊗⊥⊗⊤. λh_l t_l t_r. l ⊗ r ⊗ state_next`.
    pub fn term(self, n: usize) -> Term {
        let (w, next) = match self {
            Shift::Left { w, next }
            | Shift::LeftBot { w, next }
            | Shift::Right { w, next }
            | Shift::RightTop { w, next }
            | Shift::Stay { w, next } => (w, next),
        };
        let c = w.component();
        let body = match self {
            Shift::Left { .. } => format!("tl * (hl ({c} tr))"),
            Shift::LeftBot { .. } => format!("tl * (cb ({c} tr))"),
            Shift::Right { .. } => format!("({c} (hl tl)) * tr"),
            Shift::RightTop { .. } => format!("({c} (hl tl)) * (ct tr)"),
            Shift::Stay { .. } => format!("(hl tl) * ({c} tr)"),
        };
        stdlib::expand(
            &format!("\\c0 * c1 * cs * cb * ct. \\hl tl tr. {body} * st"),
            &[("st", compile_state(next, n))],
        )
    }
}

fn components_term() -> Term {
    tensor_all(Sym::ALL.iter().map(|s| var(s.component())).collect())
}

fn components_pattern() -> Pattern {
    Pattern::tuple_of(Sym::ALL.iter().map(|s| Pattern::var(s.component())).collect())
}

/// `δ̂`: one row per state, each row holding the six table entries for the
/// columns `0 1 ⋆ ⊥ ⊤ ∅` followed by the components it was handed.
pub fn compile_delta(m: &Machine) -> Term {
    let n = m.states.len();
    let mut items: Vec<Term> = (0..n)
        .map(|i| {
            let mut row: Vec<Term> = Sym::ALL.iter().map(|&s| Shift::of(m, i, s).term(n)).collect();
            row.push(Shift::Stay { w: Sym::Top, next: i }.term(n));
            row.push(var("x"));
            lam(Pattern::var("x"), tensor_all(row))
        })
        .collect();
    items.push(components_term());
    lam(components_pattern(), tensor_all(items))
}

/// Head-pair extractor applied once per cell.
pub fn head_step() -> Term {
    t("\\x y. \\u * v * z. x * y * (v z)")
}

/// Head-pair extractor for the end of a tape part.
pub fn head_base() -> Term {
    t("\\x y. x * (\\w. w) * y")
}

/// Reads the head pairs and hands the table entry selected by the state and
/// the head symbol the top of the left part and both tape rests.
pub fn next_config_raw() -> Term {
    t("\\p. \\(hll * hrl * tl) * (hlr * hrr * tr) * s. hlr (s (delta p)) hrl tl tr")
}

pub fn config2config_raw() -> Term {
    let doors = tensor_all(Sym::ALL.iter().map(|s| bang_door(var(s.component()))).collect());
    let steps: Vec<Term> = Sym::ALL
        .iter()
        .map(|&s| {
            bang(apps(var("head_step"), vec![var(projection_name(Some(s))), bang_door(var(s.component()))]))
        })
        .collect();
    let base = |x: &str| apps(var("head_base"), vec![var(projection_name(None)), var(x)]);
    let walked = apps(par_door(apps(var("c"), steps)), vec![base("x"), base("x'")]);
    let body = par(lams(&["x", "x'"], apps(var("next_config"), vec![doors, walked])));
    lams(&["c", "c0", "c1", "cs", "cb", "ct"], body)
}

/// The configuration `λ0 1 ⋆ ⊥ ⊤. §(λx x'. left ⊗ right ⊗ state)`.
pub fn compile_config(c: &OracleConfig, n: usize) -> Term {
    let chain = |cells: &[Sym], base: &str| {
        cells.iter().rev().fold(var(base), |acc, s| app(bang_door(var(s.component())), acc))
    };
    let body = tensor_all(vec![chain(&c.left, "x"), chain(&c.right, "x'"), compile_state(c.state, n)]);
    lams(&["c0", "c1", "cs", "cb", "ct"], par(lams(&["x", "x'"], body)))
}

/// `⌜w⌝ = λ0 1. §(λx. !̄w₁(… (!̄wₙ x)))`.
pub fn encode_input(bits: &[u8]) -> Term {
    let chain = bits
        .iter()
        .rev()
        .fold(var("x"), |acc, &b| app(bang_door(var(if b == 0 { "b0" } else { "b1" })), acc));
    lams(&["b0", "b1"], par(lam(Pattern::var("x"), chain)))
}

pub fn empty_tape() -> Term {
    t("\\b0 b1. $(\\x. x)")
}

pub fn succ_tape(bit: u8) -> Term {
    t(&format!("\\t b0 b1. $(\\x. ~!b{bit} (~$(t b0 b1) x))"))
}

pub fn dbl_tape_raw() -> Term {
    t("\\t. $(~$(t !(\\x * y. succ_tape0 x * succ_tape0 y) !(\\x * y. succ_tape1 x * succ_tape1 y)) \
       (empty_tape * empty_tape))")
}

pub fn tape2int() -> Term {
    t("\\t s. $(\\x. ~$(t s s) x)")
}

pub fn coerc_tape_raw() -> Term {
    t("\\t. $(~$(t !succ_tape0 !succ_tape1) empty_tape)")
}

/// `ctape_k : tape ⊸ §ᵏtape` for `k ≥ 2`, through `ctape_{k−1}`.
pub fn ctape_raw(k: usize) -> Term {
    assert!(k >= 2);
    let prev = app(var(&format!("ctape_{}", k - 1)), var("t"));
    lam(Pattern::var("t"), par_n(k - 1, app(var("ctape_1"), par_door_n(k - 1, prev))))
}

/// The initial configuration: `⊥` on the left, the input and `⊤` under and
/// right of the head.
pub fn init_config_raw() -> Term {
    t("\\t c0 c1 cs cb ct. $(\\x x'. ~!cb x * ~$(t c0 c1) (~!ct x') * state_start)")
}

/// `tape2config : tape ⊸ §config`, through `ctape_1`.
pub fn tape2config_raw() -> Term {
    t("\\t. $(init_config ~$(ctape_1 t))")
}

/// `config2tapeᵖ : §ᵖconfig ⊸ §ᵖ⁺¹tape`, keeping the right part up to `⋆`.
pub fn config2tape_raw(p: usize) -> Term {
    let read = apps(
        par_door_n(p, var("c")),
        vec![var("b0"), var("b1"), t("!(\\w. empty_tape)"), t("!(\\w. w)"), t("!(\\w. w)")],
    );
    let picked = app(t("\\w * y * z. y"), apps(par_door(read), vec![var("empty_tape"), var("empty_tape")]));
    let inner =
        apps(lams(&["b0", "b1"], par(picked)), vec![bang(var("succ_tape0")), bang(var("succ_tape1"))]);
    lam(Pattern::var("c"), par_n(p, inner))
}

// ---------------------------------------------------------------------------
// Types

fn fv(v: &str) -> Formula {
    Formula::var(v)
}

fn lolli(a: Formula, b: Formula) -> Formula {
    Formula::lolli(a, b)
}

fn endo(a: &Formula) -> Formula {
    lolli(a.clone(), a.clone())
}

fn select_body(n: usize, a: Formula, b: Formula) -> Formula {
    let mut items = vec![lolli(a.clone(), b.clone()); n];
    items.push(a);
    lolli(Formula::tensor_all(items), b)
}

/// **state** among `n` states.
pub fn state_type(n: usize) -> Formula {
    Formula::forall("u", Formula::forall("v", select_body(n, fv("u"), fv("v"))))
}

pub fn projection_type() -> Formula {
    Formula::forall("u", Formula::forall("v", select_body(6, fv("u"), fv("v"))))
}

/// `⊗_α`.
fn components_type(a: &Formula) -> Formula {
    Formula::tensor_all(vec![endo(a); 5])
}

fn tau(a: &Formula, n: usize) -> Formula {
    let out = Formula::tensor_all(vec![a.clone(), a.clone(), state_type(n)]);
    lolli(endo(a), lolli(a.clone(), lolli(a.clone(), out)))
}

pub fn shift_type(a: &Formula, n: usize) -> Formula {
    lolli(components_type(a), tau(a, n))
}

fn row_type(a: &Formula, n: usize) -> Formula {
    let mut items = vec![shift_type(a, n); 6];
    items.push(components_type(a));
    lolli(components_type(a), Formula::tensor_all(items))
}

/// The type of `δ̂` for `n` states.
pub fn delta_type(n: usize) -> Formula {
    let a = fv("a");
    let mut items = vec![row_type(&a, n); n];
    items.push(components_type(&a));
    Formula::forall("a", lolli(components_type(&a), Formula::tensor_all(items)))
}

fn triple(p: Formula, a: &Formula) -> Formula {
    Formula::tensor_all(vec![p, endo(a), a.clone()])
}

pub fn head_step_type() -> Formula {
    let (p, a) = (fv("p"), fv("a"));
    let body = lolli(p.clone(), lolli(endo(&a), lolli(triple(p.clone(), &a), triple(p, &a))));
    Formula::forall("p", Formula::forall("a", body))
}

pub fn head_base_type() -> Formula {
    let (p, a) = (fv("p"), fv("a"));
    Formula::forall("p", Formula::forall("a", lolli(p.clone(), lolli(a.clone(), triple(p, &a)))))
}

pub fn next_config_type(n: usize) -> Formula {
    let a = fv("a");
    let proj = select_body(6, components_type(&a), tau(&a, n));
    let pt = triple(proj, &a);
    let input = Formula::tensor_all(vec![pt.clone(), pt, state_type(n)]);
    let output = Formula::tensor_all(vec![a.clone(), a.clone(), state_type(n)]);
    Formula::forall("a", lolli(components_type(&a), lolli(input, output)))
}

/// **config** for `n` states.
pub fn config_type(n: usize) -> Formula {
    let a = fv("a");
    let out = Formula::tensor_all(vec![a.clone(), a.clone(), state_type(n)]);
    let body = (0..5).fold(Formula::par(lolli(a.clone(), lolli(a.clone(), out))), |acc, _| {
        lolli(Formula::bang(endo(&a)), acc)
    });
    Formula::forall("a", body)
}

/// **tape**.
pub fn tape_type() -> Formula {
    let a = fv("a");
    let body = lolli(Formula::bang(endo(&a)), lolli(Formula::bang(endo(&a)), Formula::par(endo(&a))));
    Formula::forall("a", body)
}

// ---------------------------------------------------------------------------
// The whole machine

/// A compiled machine: its named pieces with their types and the closed
/// term they expand to.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub env: TypeEnv,
    /// Definitions in dependency order.
    pub order: Vec<String>,
    pub term: Term,
    pub poly: PolySpec,
    pub states: usize,
}

impl Compiled {
    /// `T̂ ⌜input⌝`.
    pub fn apply(&self, input: &[u8]) -> Term {
        app(self.term.clone(), encode_input(input))
    }

    pub fn piece(&self, name: &str) -> Term {
        self.env.expand(&var(name))
    }

    /// Checks every named piece at its type, in dependency order.
    pub fn check_pieces(&self) -> Result<(), (String, CheckError)> {
        for name in &self.order {
            let ty = &self.env.types[name];
            check_term(&self.piece(name), ty, &self.env).map_err(|e| (name.clone(), e))?;
        }
        Ok(())
    }

    /// The number of `§` in front of the result type of `T̂`, read off the
    /// type the checker gives the composition.
    pub fn output_depth(&self) -> Result<usize, CheckError> {
        if let Ok(d) = synth_term(&self.term, &self.env) {
            if let Some(k) = tape_result_depth(&d.conclusion.formula) {
                return Ok(k);
            }
        }
        let mut first = None;
        for k in 0..=self.poly.degree() + 8 {
            let ty = lolli(tape_type(), Formula::par_n(k, tape_type()));
            match check_term(&self.term, &ty, &self.env) {
                Ok(_) => return Ok(k),
                Err(e) => {
                    first.get_or_insert(e);
                }
            }
        }
        Err(first.expect("some depth was tried"))
    }
}

fn tape_result_depth(f: &Formula) -> Option<usize> {
    let Formula::Lolli(a, b) = f else { return None };
    if !crate::formula::alpha_eq_formula(a, &tape_type()) {
        return None;
    }
    let mut k = 0;
    let mut cur = &**b;
    while let Formula::Par(inner) = cur {
        k += 1;
        cur = inner;
    }
    crate::formula::alpha_eq_formula(cur, &tape_type()).then_some(k)
}

/// `T̂ = λt. config2tape_{q+2}(§((λt₁⊗t₂. iter_q (p̂(tape2int t₁)) §^q!config2config
/// §^q(tape2config §̄^q(ctape_q t₂))) §̄(dbl_tape t)))` with
/// `q = θ+3` the depth of `p̂`'s result.
pub fn compile_machine(m: &Machine) -> Compiled {
    let n = m.states.len();
    let q = m.poly.degree() + 3;
    let mut env = poly_env(&m.poly);
    let int = stdlib::int();
    let tape = tape_type();
    let config = config_type(n);
    let mut order = Vec::new();
    let mut def = |env: &mut TypeEnv, name: &str, term: Term, ty: Formula| {
        env.define(name, term, ty);
        order.push(name.to_string());
    };
    for i in 0..n {
        def(&mut env, &format!("state_{i}"), compile_state(i, n), state_type(n));
    }
    let start = env.defs[&format!("state_{}", m.start)].clone();
    for col in Sym::ALL.map(Some).into_iter().chain([None]) {
        def(&mut env, projection_name(col), projection(col), projection_type());
    }
    def(&mut env, "delta", compile_delta(m), delta_type(n));
    def(&mut env, "head_step", head_step(), head_step_type());
    def(&mut env, "head_base", head_base(), head_base_type());
    def(&mut env, "next_config", next_config_raw(), next_config_type(n));
    def(&mut env, "config2config", config2config_raw(), lolli(config.clone(), config.clone()));
    def(&mut env, "empty_tape", empty_tape(), tape.clone());
    def(&mut env, "succ_tape0", succ_tape(0), endo(&tape));
    def(&mut env, "succ_tape1", succ_tape(1), endo(&tape));
    let pair = Formula::tensor(tape.clone(), tape.clone());
    def(&mut env, "dbl_tape", dbl_tape_raw(), lolli(tape.clone(), Formula::par(pair)));
    def(&mut env, "tape2int", tape2int(), lolli(tape.clone(), int.clone()));
    def(&mut env, "ctape_1", coerc_tape_raw(), lolli(tape.clone(), Formula::par(tape.clone())));
    for k in 2..=q {
        def(
            &mut env,
            &format!("ctape_{k}"),
            ctape_raw(k),
            lolli(tape.clone(), Formula::par_n(k, tape.clone())),
        );
    }
    def(&mut env, "state_start", start, state_type(n));
    def(&mut env, "init_config", init_config_raw(), lolli(tape.clone(), config.clone()));
    def(&mut env, "tape2config", tape2config_raw(), lolli(tape.clone(), Formula::par(config.clone())));
    let c2t = format!("config2tape_{}", q + 2);
    let c2t_ty = lolli(Formula::par_n(q + 2, config.clone()), Formula::par_n(q + 3, tape.clone()));
    def(&mut env, &c2t, config2tape_raw(q + 2), c2t_ty);
    let iter = format!("iter_{q}");
    def(&mut env, &iter, stdlib::iter_p(q), stdlib::iter_p_type(q, config.clone()));
    let phat_ty = lolli(int.clone(), Formula::par_n(q, int));
    def(&mut env, "phat", poly_encode(&m.poly), phat_ty);
    let run = apps(
        var(&iter),
        vec![
            app(var("phat"), app(var("tape2int"), var("t1"))),
            par_n(q, bang(var("config2config"))),
            par_n(q, app(var("tape2config"), par_door_n(q, app(var(&format!("ctape_{q}")), var("t2"))))),
        ],
    );
    let split = lam(Pattern::tuple(&["t1", "t2"]), run);
    let body = par(app(split, par_door(app(var("dbl_tape"), var("t")))));
    let machine = lam(Pattern::var("t"), app(var(&c2t), body));
    let term = env.expand(&machine);
    Compiled { env, order, term, poly: m.poly.clone(), states: n }
}

// ---------------------------------------------------------------------------
// Differential runs

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Leftmost-outermost term reduction.
    Term,
    /// Level-by-level net normalization.
    Net,
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub expected: Vec<u8>,
    /// Decoded bits and `§` prefix, when the normal form is a tape.
    pub decoded: Option<(Vec<u8>, usize)>,
    pub steps: u64,
    pub rounds: Vec<RoundReport>,
}

impl Verification {
    pub fn matches(&self) -> bool {
        self.decoded.as_ref().is_some_and(|(bits, _)| *bits == self.expected)
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("term reduction ran out of fuel after {0} steps")]
    Fuel(u64),
    #[error(transparent)]
    Translate(#[from] crate::translate::TranslateError),
    #[error(transparent)]
    Measure(#[from] crate::measure::MeasureError),
}

/// Normalizes `T̂ ⌜input⌝` with `engine` and compares the tape it decodes
/// to with the interpreter's output after the same number of steps.
pub fn verify_against_oracle(
    compiled: &Compiled,
    m: &Machine,
    input: &[u8],
    engine: Engine,
    fuel: u64,
) -> Result<Verification, VerifyError> {
    let expected = oracle_run(m, input).output;
    let subject = compiled.apply(input);
    match engine {
        Engine::Term => {
            let r = reduce_term(&subject, fuel).map_err(|e| VerifyError::Fuel(e.steps))?;
            Ok(Verification {
                expected,
                decoded: decode_tape_term(&r.term),
                steps: r.steps,
                rounds: Vec::new(),
            })
        }
        Engine::Net => {
            let net = term_to_net(&subject)?;
            let opts = SigmaOptions { fuel, ..SigmaOptions::default() };
            let (normal, rounds) = normalize_sigma(&net, opts)?;
            let steps = crate::measure::total_counted(&rounds);
            Ok(Verification { expected, decoded: decode_tape(&normal), steps, rounds })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{alpha_eq, print_term};

    pub(crate) const APPENDER: &str = include_str!("../machines/appender.json");
    pub(crate) const SUCCESSOR: &str = include_str!("../machines/successor.json");

    fn run(m: &Term) -> Term {
        reduce_term(m, 5_000_000).expect("terminates").term
    }

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    #[test]
    fn oracle_runs() {
        let succ = Machine::from_json(SUCCESSOR).unwrap();
        let r = oracle_run(&succ, &bits("1"));
        assert_eq!((r.output, r.accepted_at), (bits("11"), Some(3)));
        let app = Machine::from_json(APPENDER).unwrap();
        assert_eq!(oracle_run(&app, &[]).output, bits(""));
        let slow = app.with_poly(&[4, 2]);
        for w in ["1", "11", "0110"] {
            let r = oracle_run(&slow, &bits(w));
            assert_eq!(r.output, bits(w), "{w}");
            assert_eq!(r.accepted_at, Some(2 * w.len() as u64 + 4));
            assert_eq!(r.config.right.last(), Some(&Sym::Top));
            assert_eq!(r.config.left, vec![Sym::Bot]);
        }
    }

    #[test]
    fn head_on_top_extends_the_tape() {
        let spec = MachineSpec {
            states: vec!["s".into(), "a".into()],
            start: "s".into(),
            accept: "a".into(),
            delta: vec![TransitionSpec {
                state: "s".into(),
                read: Sym::Top,
                write: Sym::One,
                next: "a".into(),
                mv: Move::R,
            }],
            poly: vec![1],
        };
        let m = Machine::from_spec(&spec).unwrap();
        let c = oracle_step(&m, &OracleConfig::initial(&m, &[]));
        assert_eq!(c, OracleConfig { left: vec![Sym::One, Sym::Bot], right: vec![Sym::Top], state: 1 });
        assert_eq!(oracle_step(&m, &c), c);
    }

    #[test]
    fn malformed_machines_are_rejected() {
        let bad = APPENDER.replace(r#""read": "TOP", "write": "*""#, r#""read": "TOP", "write": "TOP""#);
        assert!(matches!(Machine::from_json(&bad), Err(MachineError::EdgeDiscipline { .. })), "{bad}");
        let unknown = SUCCESSOR.replace(r#""next": "acc""#, r#""next": "nowhere""#);
        assert!(matches!(Machine::from_json(&unknown), Err(MachineError::UnknownState(_))));
        assert!(matches!(Machine::from_json("{"), Err(MachineError::Json(_))));
    }

    #[test]
    fn states_and_projections() {
        let r = run(&app(compile_state(0, 3), t("a * b * c * v")));
        assert!(alpha_eq(&r, &t("a v")));
        let ps: Vec<Term> = Sym::ALL.map(Some).into_iter().chain([None]).map(projection).collect();
        for i in 0..6 {
            for j in 0..i {
                assert!(!alpha_eq(&ps[i], &ps[j]));
            }
        }
        let env = TypeEnv::new();
        check_term(&compile_state(1, 3), &state_type(3), &env).unwrap();
        check_term(&projection(None), &projection_type(), &env).unwrap();
    }

    #[test]
    fn projection_picks_a_table_entry() {
        let m = Machine::from_json(SUCCESSOR).unwrap();
        let n = m.states.len();
        let i = 1;
        let pick = app(
            projection(Some(Sym::Star)),
            app(compile_state(i, n), app(compile_delta(&m), t("c0 * c1 * cs * cb * ct"))),
        );
        let expected = app(Shift::of(&m, i, Sym::Star).term(n), t("c0 * c1 * cs * cb * ct"));
        assert!(alpha_eq(&run(&pick), &run(&expected)));
    }

    /// `δ(s_i, ⊥) = (1, s_j, L)` on a configuration whose head reads `⊥`.
    #[test]
    fn left_move_from_bottom() {
        let spec = MachineSpec {
            states: vec!["i".into(), "j".into()],
            start: "i".into(),
            accept: "j".into(),
            delta: vec![TransitionSpec {
                state: "i".into(),
                read: Sym::Bot,
                write: Sym::One,
                next: "j".into(),
                mv: Move::L,
            }],
            poly: vec![1],
        };
        let m = Machine::from_spec(&spec).unwrap();
        assert_eq!(Shift::of(&m, 0, Sym::Bot), Shift::LeftBot { w: Sym::One, next: 1 });
        let c = compile_machine(&m);
        let before =
            OracleConfig { left: vec![], right: vec![Sym::Bot, Sym::Star, Sym::One, Sym::Top], state: 0 };
        let after = oracle_step(&m, &before);
        assert_eq!(after.right, vec![Sym::Bot, Sym::One, Sym::Star, Sym::One, Sym::Top]);
        let r = run(&app(c.piece("config2config"), compile_config(&before, 2)));
        assert!(alpha_eq(&r, &compile_config(&after, 2)), "{}", print_term(&r));
    }

    #[test]
    fn head_pairs_are_read_off_a_configuration() {
        let c = OracleConfig { left: vec![], right: vec![Sym::Bot, Sym::Star, Sym::One, Sym::Top], state: 0 };
        let pieces = compile_machine(&Machine::from_json(SUCCESSOR).unwrap());
        let steps: Vec<Term> = Sym::ALL
            .iter()
            .map(|&s| bang(apps(head_step(), vec![projection(Some(s)), bang_door(var(s.component()))])))
            .collect();
        let base = |x: &str| apps(head_base(), vec![projection(None), var(x)]);
        let walk = lams(
            &["c0", "c1", "cs", "cb", "ct"],
            par(lams(
                &["x", "x'"],
                apps(par_door(apps(compile_config(&c, 3), steps)), vec![base("x"), base("x'")]),
            )),
        );
        let expected = lams(
            &["c0", "c1", "cs", "cb", "ct"],
            par(lams(
                &["x", "x'"],
                tensor_all(vec![
                    tensor_all(vec![projection(None), t("\\w. w"), var("x")]),
                    tensor_all(vec![projection(Some(Sym::Bot)), t("~!cb"), t("~!cs (~!c1 (~!ct x'))")]),
                    compile_state(0, 3),
                ]),
            )),
        );
        assert!(alpha_eq(&run(&walk), &expected), "{}", print_term(&run(&walk)));
        assert_eq!(pieces.states, 4);
    }

    #[test]
    fn accepting_configuration_is_a_fixpoint() {
        let m = Machine::from_json(SUCCESSOR).unwrap();
        let n = m.states.len();
        let c = OracleConfig { left: vec![Sym::Bot], right: vec![Sym::One, Sym::Top], state: m.accept };
        assert_eq!(oracle_step(&m, &c), c);
        let r = run(&app(compile_machine(&m).piece("config2config"), compile_config(&c, n)));
        assert!(alpha_eq(&r, &compile_config(&c, n)));
    }

    #[test]
    fn config2config_follows_the_oracle() {
        let m = Machine::from_json(APPENDER).unwrap().with_poly(&[4, 2]);
        let compiled = compile_machine(&m);
        let step = compiled.piece("config2config");
        let mut c = OracleConfig::initial(&m, &bits("10"));
        for _ in 0..8 {
            let next = oracle_step(&m, &c);
            let r = run(&app(step.clone(), compile_config(&c, m.states.len())));
            assert!(alpha_eq(&r, &compile_config(&next, m.states.len())), "{c:?}");
            c = next;
        }
    }

    #[test]
    fn tape_pieces() {
        let m = Machine::from_json(SUCCESSOR).unwrap();
        let c = compile_machine(&m);
        let ten = encode_input(&bits("10"));
        let d = run(&app(c.piece("dbl_tape"), ten.clone()));
        assert!(alpha_eq(&d, &par(tensor_all(vec![ten.clone(), ten.clone()]))), "{}", print_term(&d));
        let n = run(&app(tape2int(), ten.clone()));
        assert!(alpha_eq(&n, &stdlib::numeral(2)));
        let init = run(&app(c.piece("tape2config"), ten.clone()));
        let expected = par(compile_config(&OracleConfig::initial(&m, &bits("10")), m.states.len()));
        assert!(alpha_eq(&init, &expected), "{}", print_term(&init));
        let k = run(&app(c.piece("ctape_3"), ten.clone()));
        assert!(alpha_eq(&k, &par_n(3, ten)));
    }

    #[test]
    fn config_reads_back_to_a_tape() {
        let cfg = OracleConfig {
            left: vec![Sym::Bot],
            right: vec![Sym::One, Sym::Star, Sym::Zero, Sym::Top],
            state: 2,
        };
        let c = compile_machine(&Machine::from_json(SUCCESSOR).unwrap());
        let r = run(&app(c.piece("config2tape_6"), par_n(6, compile_config(&cfg, c.states))));
        assert_eq!(decode_tape_term(&r), Some((bits("1"), 7)));
    }

    #[test]
    fn pieces_check_at_their_types() {
        for text in [SUCCESSOR, APPENDER] {
            let c = compile_machine(&Machine::from_json(text).unwrap());
            if let Err((name, e)) = c.check_pieces() {
                panic!("{name}: {e}");
            }
        }
    }

    #[test]
    fn whole_machine_on_the_term_engine() {
        for text in [SUCCESSOR, APPENDER] {
            let m = Machine::from_json(text).unwrap();
            let c = compile_machine(&m);
            for w in ["", "1", "01"] {
                let v = verify_against_oracle(&c, &m, &bits(w), Engine::Term, 50_000_000).unwrap();
                assert!(v.matches(), "{w}: {v:?}");
            }
        }
    }

    #[test]
    fn output_depth_comes_from_the_checker() {
        let m = Machine::from_json(SUCCESSOR).unwrap();
        assert_eq!(compile_machine(&m).output_depth().unwrap(), 7);
        let quadratic = m.with_poly(&[1, 0, 1]);
        assert_eq!(compile_machine(&quadratic).output_depth().unwrap(), 8);
    }

    #[test]
    fn whole_machine_on_the_net_engine() {
        let m = Machine::from_json(APPENDER).unwrap();
        let c = compile_machine(&m);
        for w in ["", "1"] {
            let v = verify_against_oracle(&c, &m, &bits(w), Engine::Net, 50_000_000).unwrap();
            assert!(v.matches(), "{w}: {v:?}");
            assert_eq!(v.decoded.as_ref().map(|d| d.1), Some(7));
            for r in &v.rounds {
                assert!(r.within_bound, "level {}", r.level);
                // A linear step removes two counted nodes, not one.
                assert!(r.law_violations.iter().all(|l| l.law == "linear step removes one node of n_l"));
            }
        }
        let slow = m.with_poly(&[4, 2]);
        let c = compile_machine(&slow);
        for engine in [Engine::Term, Engine::Net] {
            let v = verify_against_oracle(&c, &slow, &bits("1"), engine, 50_000_000).unwrap();
            assert_eq!(v.decoded.map(|d| d.0), Some(bits("1")), "{engine:?}");
        }
    }
}

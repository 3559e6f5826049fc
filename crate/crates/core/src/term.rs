//! The concrete syntax Λ: tensor patterns, terms with box and door markers,
//! capture-free substitution and the rewriting relation `↝`.
//!
//! ASCII syntax: `\p. M`, juxtaposition (left associative), `M * N` (right
//! associative), `!M` and `$M` boxes, `~!M` and `~$M` doors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::syntax::{is_ident_char, is_ident_start, Cursor, SyntaxError, Tok};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(String),
    Tensor(Box<Pattern>, Box<Pattern>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Lam(Pattern, Box<Term>),
    App(Box<Term>, Box<Term>),
    Tensor(Box<Term>, Box<Term>),
    BangBox(Box<Term>),
    /// `!̄M`
    BangDoor(Box<Term>),
    ParBox(Box<Term>),
    /// `§̄M`
    ParDoor(Box<Term>),
}

impl Pattern {
    pub fn var(name: &str) -> Pattern {
        Pattern::Var(name.to_string())
    }

    pub fn tensor(a: Pattern, b: Pattern) -> Pattern {
        Pattern::Tensor(Box::new(a), Box::new(b))
    }

    /// Right-nested tensor pattern over the given names.
    pub fn tuple(names: &[&str]) -> Pattern {
        Pattern::tuple_of(names.iter().map(|n| Pattern::var(n)).collect())
    }

    pub fn tuple_of(mut items: Vec<Pattern>) -> Pattern {
        let mut acc = items.pop().expect("empty pattern");
        while let Some(p) = items.pop() {
            acc = Pattern::tensor(p, acc);
        }
        acc
    }

    /// Bound names, left to right.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(v) => out.push(v.clone()),
            Pattern::Tensor(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn binds(&self, x: &str) -> bool {
        match self {
            Pattern::Var(v) => v == x,
            Pattern::Tensor(a, b) => a.binds(x) || b.binds(x),
        }
    }

    /// Names pairwise distinct.
    pub fn is_linear(&self) -> bool {
        let vs = self.vars();
        let set: BTreeSet<&String> = vs.iter().collect();
        set.len() == vs.len()
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> Pattern {
        match self {
            Pattern::Var(v) => Pattern::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Pattern::Tensor(a, b) => Pattern::tensor(a.rename(map), b.rename(map)),
        }
    }
}

pub fn var(name: &str) -> Term {
    Term::Var(name.to_string())
}

pub fn lam(p: Pattern, body: Term) -> Term {
    Term::Lam(p, Box::new(body))
}

/// `λx₁…xₙ.body` over plain variables.
pub fn lams(names: &[&str], body: Term) -> Term {
    names.iter().rev().fold(body, |acc, n| lam(Pattern::var(n), acc))
}

pub fn app(f: Term, a: Term) -> Term {
    Term::App(Box::new(f), Box::new(a))
}

/// Left-associated application `f a₁ … aₙ`.
pub fn apps(f: Term, args: Vec<Term>) -> Term {
    args.into_iter().fold(f, app)
}

pub fn tensor(a: Term, b: Term) -> Term {
    Term::Tensor(Box::new(a), Box::new(b))
}

pub fn tensor_all(mut items: Vec<Term>) -> Term {
    let mut acc = items.pop().expect("empty tensor");
    while let Some(t) = items.pop() {
        acc = tensor(t, acc);
    }
    acc
}

pub fn bang(m: Term) -> Term {
    Term::BangBox(Box::new(m))
}

pub fn par(m: Term) -> Term {
    Term::ParBox(Box::new(m))
}

pub fn bang_door(m: Term) -> Term {
    Term::BangDoor(Box::new(m))
}

pub fn par_door(m: Term) -> Term {
    Term::ParDoor(Box::new(m))
}

/// `§ⁿM`.
pub fn par_n(n: usize, m: Term) -> Term {
    (0..n).fold(m, |acc, _| par(acc))
}

/// `!ⁿM`.
pub fn bang_n(n: usize, m: Term) -> Term {
    (0..n).fold(m, |acc, _| bang(acc))
}

/// `§̄ⁿM`.
pub fn par_door_n(n: usize, m: Term) -> Term {
    (0..n).fold(m, |acc, _| par_door(acc))
}

/// `!̄ⁿM`.
pub fn bang_door_n(n: usize, m: Term) -> Term {
    (0..n).fold(m, |acc, _| bang_door(acc))
}

impl Term {
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::Lam(_, b) => 1 + b.size(),
            Term::App(a, b) | Term::Tensor(a, b) => 1 + a.size() + b.size(),
            Term::BangBox(m) | Term::BangDoor(m) | Term::ParBox(m) | Term::ParDoor(m) => 1 + m.size(),
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) => vec![],
            Term::Lam(_, b) => vec![b],
            Term::App(a, b) | Term::Tensor(a, b) => vec![a, b],
            Term::BangBox(m) | Term::BangDoor(m) | Term::ParBox(m) | Term::ParDoor(m) => vec![m],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Term> {
        match self {
            Term::Var(_) => vec![],
            Term::Lam(_, b) => vec![b],
            Term::App(a, b) | Term::Tensor(a, b) => vec![a, b],
            Term::BangBox(m) | Term::BangDoor(m) | Term::ParBox(m) | Term::ParDoor(m) => vec![m],
        }
    }
}

pub fn free_vars(m: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(m, &mut Vec::new(), &mut out);
    out
}

fn collect_free(m: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match m {
        Term::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.insert(x.clone());
            }
        }
        Term::Lam(p, body) => {
            let vs = p.vars();
            let n = vs.len();
            bound.extend(vs);
            collect_free(body, bound, out);
            bound.truncate(bound.len() - n);
        }
        other => {
            for c in other.children() {
                collect_free(c, bound, out);
            }
        }
    }
}

pub fn occurs_free(m: &Term, x: &str) -> bool {
    match m {
        Term::Var(y) => y == x,
        Term::Lam(p, body) => !p.binds(x) && occurs_free(body, x),
        other => other.children().into_iter().any(|c| occurs_free(c, x)),
    }
}

/// Number of free occurrences of `x`.
pub fn count_free(m: &Term, x: &str) -> usize {
    match m {
        Term::Var(y) => usize::from(y == x),
        Term::Lam(p, body) => {
            if p.binds(x) {
                0
            } else {
                count_free(body, x)
            }
        }
        other => other.children().into_iter().map(|c| count_free(c, x)).sum(),
    }
}

/// A name derived from `base` that is outside `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "x" } else { stem };
    (1..).map(|k| format!("{stem}'{k}")).find(|c| !avoid.contains(c)).expect("unbounded search")
}

/// Capture-free simultaneous substitution `m[bindings]`.
pub fn substitute(m: &Term, bindings: &BTreeMap<String, Term>) -> Term {
    if bindings.is_empty() {
        return m.clone();
    }
    let mut range_fv = BTreeSet::new();
    for t in bindings.values() {
        range_fv.extend(free_vars(t));
    }
    subst_rec(m, bindings, &range_fv)
}

fn subst_rec(m: &Term, b: &BTreeMap<String, Term>, range_fv: &BTreeSet<String>) -> Term {
    match m {
        Term::Var(x) => b.get(x).cloned().unwrap_or_else(|| m.clone()),
        Term::Lam(p, body) => {
            let pv = p.vars();
            let live: BTreeMap<String, Term> = b
                .iter()
                .filter(|(k, _)| !pv.contains(k) && occurs_free(body, k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if live.is_empty() {
                return m.clone();
            }
            let clashes: Vec<&String> = pv.iter().filter(|v| range_fv.contains(*v)).collect();
            if clashes.is_empty() {
                return lam(p.clone(), subst_rec(body, &live, range_fv));
            }
            let mut avoid = range_fv.clone();
            avoid.extend(free_vars(body));
            avoid.extend(pv.iter().cloned());
            avoid.extend(live.keys().cloned());
            let mut ren = BTreeMap::new();
            let mut inner = live;
            for v in clashes {
                let nv = fresh_name(v, &avoid);
                avoid.insert(nv.clone());
                inner.insert(v.clone(), Term::Var(nv.clone()));
                ren.insert(v.clone(), nv);
            }
            let mut fv2 = range_fv.clone();
            fv2.extend(ren.values().cloned());
            lam(p.rename(&ren), subst_rec(body, &inner, &fv2))
        }
        Term::App(x, y) => app(subst_rec(x, b, range_fv), subst_rec(y, b, range_fv)),
        Term::Tensor(x, y) => tensor(subst_rec(x, b, range_fv), subst_rec(y, b, range_fv)),
        Term::BangBox(x) => bang(subst_rec(x, b, range_fv)),
        Term::BangDoor(x) => bang_door(subst_rec(x, b, range_fv)),
        Term::ParBox(x) => par(subst_rec(x, b, range_fv)),
        Term::ParDoor(x) => par_door(subst_rec(x, b, range_fv)),
    }
}

/// `m[n/x]`.
pub fn subst1(m: &Term, x: &str, n: &Term) -> Term {
    substitute(m, &BTreeMap::from([(x.to_string(), n.clone())]))
}

/// α-equivalence.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn lookup<'a>(env: &[(&'a str, &'a str)], x: &str, left: bool) -> Option<usize> {
        env.iter().rev().position(|(l, r)| if left { *l == x } else { *r == x })
    }
    fn pat<'a>(p: &'a Pattern, q: &'a Pattern, pairs: &mut Vec<(&'a str, &'a str)>) -> bool {
        match (p, q) {
            (Pattern::Var(x), Pattern::Var(y)) => {
                pairs.push((x, y));
                true
            }
            (Pattern::Tensor(p1, p2), Pattern::Tensor(q1, q2)) => pat(p1, q1, pairs) && pat(p2, q2, pairs),
            _ => false,
        }
    }
    fn go<'a>(a: &'a Term, b: &'a Term, env: &mut Vec<(&'a str, &'a str)>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => match (lookup(env, x, true), lookup(env, y, false)) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            },
            (Term::Lam(p, m), Term::Lam(q, n)) => {
                let mark = env.len();
                if !pat(p, q, env) {
                    env.truncate(mark);
                    return false;
                }
                let r = go(m, n, env);
                env.truncate(mark);
                r
            }
            (Term::App(a1, a2), Term::App(b1, b2)) | (Term::Tensor(a1, a2), Term::Tensor(b1, b2)) => {
                go(a1, b1, env) && go(a2, b2, env)
            }
            (Term::BangBox(x), Term::BangBox(y))
            | (Term::BangDoor(x), Term::BangDoor(y))
            | (Term::ParBox(x), Term::ParBox(y))
            | (Term::ParDoor(x), Term::ParDoor(y)) => go(x, y, env),
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// Structural match of a pattern against the argument's tensor tree.
pub fn match_pattern(p: &Pattern, arg: &Term, out: &mut BTreeMap<String, Term>) -> bool {
    match (p, arg) {
        (Pattern::Var(x), _) => {
            out.insert(x.clone(), arg.clone());
            true
        }
        (Pattern::Tensor(p1, p2), Term::Tensor(a1, a2)) => {
            match_pattern(p1, a1, out) && match_pattern(p2, a2, out)
        }
        _ => false,
    }
}

fn pattern_fits(p: &Pattern, arg: &Term) -> bool {
    match (p, arg) {
        (Pattern::Var(_), _) => true,
        (Pattern::Tensor(p1, p2), Term::Tensor(a1, a2)) => pattern_fits(p1, a1) && pattern_fits(p2, a2),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Beta,
    Bang,
    Par,
}

/// The rule whose left-hand side `m` is, if any.
pub fn redex_kind(m: &Term) -> Option<RuleKind> {
    match m {
        Term::App(f, a) => match &**f {
            Term::Lam(p, _) if pattern_fits(p, a) => Some(RuleKind::Beta),
            _ => None,
        },
        Term::BangDoor(x) if matches!(**x, Term::BangBox(_)) => Some(RuleKind::Bang),
        Term::ParDoor(x) if matches!(**x, Term::ParBox(_)) => Some(RuleKind::Par),
        _ => None,
    }
}

/// Contracts the redex at the root of `m`.
pub fn contract_root(m: &Term) -> Option<Term> {
    match m {
        Term::App(f, a) => match &**f {
            Term::Lam(p, body) => {
                let mut b = BTreeMap::new();
                if match_pattern(p, a, &mut b) {
                    Some(substitute(body, &b))
                } else {
                    None
                }
            }
            _ => None,
        },
        Term::BangDoor(x) => match &**x {
            Term::BangBox(inner) => Some((**inner).clone()),
            _ => None,
        },
        Term::ParDoor(x) => match &**x {
            Term::ParBox(inner) => Some((**inner).clone()),
            _ => None,
        },
        _ => None,
    }
}

/// Position of a subterm: child indices from the root.
pub type Path = Vec<usize>;

/// Every redex position in leftmost-outermost (preorder) order.
pub fn redex_positions(m: &Term) -> Vec<Path> {
    fn go(m: &Term, path: &mut Path, out: &mut Vec<Path>) {
        if redex_kind(m).is_some() {
            out.push(path.clone());
        }
        for (i, c) in m.children().into_iter().enumerate() {
            path.push(i);
            go(c, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(m, &mut Vec::new(), &mut out);
    out
}

pub fn subterm<'a>(m: &'a Term, path: &[usize]) -> Option<&'a Term> {
    let mut cur = m;
    for &i in path {
        cur = *cur.children().get(i)?;
    }
    Some(cur)
}

/// Contracts the redex at `path`.
pub fn contract_at(m: &Term, path: &[usize]) -> Option<Term> {
    let mut out = m.clone();
    let mut cur = &mut out;
    for &i in path {
        cur = cur.children_mut().into_iter().nth(i)?;
    }
    *cur = contract_root(cur)?;
    Some(out)
}

/// One leftmost-outermost step of `▷β ∪ ▷! ∪ ▷§`; `None` on normal terms.
pub fn step(m: &Term) -> Option<Term> {
    if let Some(r) = contract_root(m) {
        return Some(r);
    }
    match m {
        Term::Var(_) => None,
        Term::Lam(p, b) => step(b).map(|b2| lam(p.clone(), b2)),
        Term::App(x, y) => match step(x) {
            Some(x2) => Some(app(x2, (**y).clone())),
            None => step(y).map(|y2| app((**x).clone(), y2)),
        },
        Term::Tensor(x, y) => match step(x) {
            Some(x2) => Some(tensor(x2, (**y).clone())),
            None => step(y).map(|y2| tensor((**x).clone(), y2)),
        },
        Term::BangBox(x) => step(x).map(bang),
        Term::BangDoor(x) => step(x).map(bang_door),
        Term::ParBox(x) => step(x).map(par),
        Term::ParDoor(x) => step(x).map(par_door),
    }
}

pub fn is_normal(m: &Term) -> bool {
    redex_positions(m).is_empty()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("fuel exhausted after {steps} steps")]
pub struct FuelExhausted {
    pub steps: u64,
    pub last: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduced {
    pub term: Term,
    pub steps: u64,
}

enum Outcome {
    Normal,
    /// The parent became a redex.
    Stopped,
    OutOfFuel,
}

struct Normalizer {
    fuel: u64,
    steps: u64,
}

/// What the enclosing term needs of a subterm to become a redex.
#[derive(Clone)]
enum Demand {
    Nothing,
    BangBox,
    ParBox,
    Fits(Pattern),
    /// An abstraction whose pattern fits this argument.
    LamFor(Term),
}

impl Demand {
    fn met(&self, m: &Term) -> bool {
        match self {
            Demand::Nothing => false,
            Demand::BangBox => matches!(m, Term::BangBox(_)),
            Demand::ParBox => matches!(m, Term::ParBox(_)),
            Demand::Fits(p) => pattern_fits(p, m),
            Demand::LamFor(a) => matches!(m, Term::Lam(p, _) if pattern_fits(p, a)),
        }
    }
}

impl Normalizer {
    /// Leftmost-outermost normalization of `m` in place, stopping as soon as
    /// `demand` is met. Reduction inside a subterm never undoes a met demand.
    fn run(&mut self, m: &mut Term, demand: &Demand) -> Outcome {
        'outer: loop {
            if demand.met(m) {
                return Outcome::Stopped;
            }
            if redex_kind(m).is_some() {
                if self.steps >= self.fuel {
                    return Outcome::OutOfFuel;
                }
                *m = contract_root(m).expect("redex_kind agreed");
                self.steps += 1;
                continue;
            }
            match m {
                Term::Var(_) => return Outcome::Normal,
                Term::App(f, a) => {
                    let fits = match &**f {
                        Term::Lam(p, _) => Demand::Fits(p.clone()),
                        _ => Demand::Nothing,
                    };
                    if fits.met(a) {
                        continue 'outer;
                    }
                    match self.run(f, &Demand::LamFor((**a).clone())) {
                        Outcome::Stopped => continue 'outer,
                        Outcome::OutOfFuel => return Outcome::OutOfFuel,
                        Outcome::Normal => {}
                    }
                    let fits = match &**f {
                        Term::Lam(p, _) => Demand::Fits(p.clone()),
                        _ => Demand::Nothing,
                    };
                    match self.run(a, &fits) {
                        Outcome::Stopped => continue 'outer,
                        other => return other,
                    }
                }
                Term::BangDoor(x) => match self.run(x, &Demand::BangBox) {
                    Outcome::Stopped => continue 'outer,
                    other => return other,
                },
                Term::ParDoor(x) => match self.run(x, &Demand::ParBox) {
                    Outcome::Stopped => continue 'outer,
                    other => return other,
                },
                Term::Lam(_, b) => return self.run(b, &Demand::Nothing),
                Term::BangBox(x) | Term::ParBox(x) => return self.run(x, &Demand::Nothing),
                Term::Tensor(x, y) => {
                    let (dx, dy) = match demand {
                        Demand::Fits(Pattern::Tensor(p1, p2)) => {
                            (Demand::Fits((**p1).clone()), Demand::Fits((**p2).clone()))
                        }
                        _ => (Demand::Nothing, Demand::Nothing),
                    };
                    match self.run(x, &dx) {
                        Outcome::OutOfFuel => return Outcome::OutOfFuel,
                        Outcome::Stopped if dy.met(y) => return Outcome::Stopped,
                        Outcome::Stopped => {
                            if let Outcome::OutOfFuel = self.run(x, &Demand::Nothing) {
                                return Outcome::OutOfFuel;
                            }
                        }
                        Outcome::Normal => {}
                    }
                    if !dx.met(x) {
                        return self.run(y, &Demand::Nothing);
                    }
                    return self.run(y, &dy);
                }
            }
        }
    }
}

/// Iterates leftmost-outermost steps until normal or `fuel` steps were taken.
pub fn reduce_term(m: &Term, fuel: u64) -> Result<Reduced, FuelExhausted> {
    let mut t = m.clone();
    let mut n = Normalizer { fuel, steps: 0 };
    match n.run(&mut t, &Demand::Nothing) {
        Outcome::OutOfFuel => Err(FuelExhausted { steps: n.steps, last: t }),
        _ => Ok(Reduced { term: t, steps: n.steps }),
    }
}

/// All terms of the leftmost-outermost sequence, starting with `m`.
pub fn reduction_trace(m: &Term, fuel: u64) -> Result<Vec<Term>, FuelExhausted> {
    let mut out = vec![m.clone()];
    while let Some(next) = step(out.last().expect("nonempty")) {
        if out.len() as u64 > fuel {
            return Err(FuelExhausted { steps: fuel, last: next });
        }
        out.push(next);
    }
    Ok(out)
}

// ---------------------------------------------------------------- parsing

pub fn parse_term(text: &str) -> Result<Term, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let t = parse_term_at(&mut cur)?;
    cur.finish()?;
    Ok(t)
}

pub fn parse_pattern(text: &str) -> Result<Pattern, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let p = parse_pattern_at(&mut cur)?;
    cur.finish()?;
    Ok(p)
}

pub fn parse_term_at(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let lhs = parse_app(cur)?;
    if *cur.peek() == Tok::Star {
        cur.bump();
        Ok(tensor(lhs, parse_term_at(cur)?))
    } else {
        Ok(lhs)
    }
}

fn starts_atom(t: &Tok) -> bool {
    matches!(
        t,
        Tok::Ident(_) | Tok::LParen | Tok::Backslash | Tok::Bang | Tok::Dollar | Tok::BangDoor | Tok::ParDoor
    )
}

fn parse_app(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let mut t = parse_atom(cur)?;
    while starts_atom(cur.peek()) {
        let a = parse_atom(cur)?;
        t = app(t, a);
    }
    Ok(t)
}

fn parse_atom(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    match cur.peek().clone() {
        Tok::Ident(x) => {
            cur.bump();
            Ok(Term::Var(x))
        }
        Tok::LParen => {
            cur.bump();
            let t = parse_term_at(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(t)
        }
        Tok::Bang => {
            cur.bump();
            Ok(bang(parse_atom(cur)?))
        }
        Tok::Dollar => {
            cur.bump();
            Ok(par(parse_atom(cur)?))
        }
        Tok::BangDoor => {
            cur.bump();
            Ok(bang_door(parse_atom(cur)?))
        }
        Tok::ParDoor => {
            cur.bump();
            Ok(par_door(parse_atom(cur)?))
        }
        Tok::Backslash => {
            cur.bump();
            let first = parse_pattern_atom(cur)?;
            let binders = if *cur.peek() == Tok::Star {
                cur.bump();
                vec![Pattern::tensor(first, parse_pattern_at(cur)?)]
            } else {
                let mut bs = vec![first];
                while *cur.peek() != Tok::Dot {
                    bs.push(parse_pattern_atom(cur)?);
                }
                bs
            };
            cur.expect(&Tok::Dot)?;
            for b in &binders {
                if !b.is_linear() {
                    return Err(cur.error("pattern binds a name twice"));
                }
            }
            let body = parse_term_at(cur)?;
            Ok(binders.into_iter().rev().fold(body, |acc, p| lam(p, acc)))
        }
        other => Err(cur.error(format!("expected a term, found {other}"))),
    }
}

pub fn parse_pattern_at(cur: &mut Cursor) -> Result<Pattern, SyntaxError> {
    let lhs = parse_pattern_atom(cur)?;
    if *cur.peek() == Tok::Star {
        cur.bump();
        Ok(Pattern::tensor(lhs, parse_pattern_at(cur)?))
    } else {
        Ok(lhs)
    }
}

fn parse_pattern_atom(cur: &mut Cursor) -> Result<Pattern, SyntaxError> {
    match cur.peek().clone() {
        Tok::Ident(x) => {
            cur.bump();
            Ok(Pattern::Var(x))
        }
        Tok::LParen => {
            cur.bump();
            let p = parse_pattern_at(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(p)
        }
        other => Err(cur.error(format!("expected a pattern, found {other}"))),
    }
}

// --------------------------------------------------------------- printing

pub fn print_term(m: &Term) -> String {
    m.to_string()
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(x) => f.write_str(x),
            Pattern::Tensor(a, b) => {
                if matches!(**a, Pattern::Tensor(..)) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " * {b}")
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, 0, f)
    }
}

// Contexts: 0 anywhere, 1 left of `*`, 2 function position, 3 argument or operand.
fn write_term(m: &Term, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match m {
        Term::Var(x) => f.write_str(x),
        Term::Lam(..) => {
            if prec > 0 {
                f.write_str("(")?;
            }
            let mut binders = Vec::new();
            let mut cur = m;
            while let Term::Lam(p, body) = cur {
                binders.push(p);
                cur = body;
            }
            f.write_str("\\")?;
            if binders.len() == 1 {
                write!(f, "{}", binders[0])?;
            } else {
                for (i, p) in binders.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    match p {
                        Pattern::Var(x) => f.write_str(x)?,
                        t => write!(f, "({t})")?,
                    }
                }
            }
            f.write_str(". ")?;
            write_term(cur, 0, f)?;
            if prec > 0 {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::Tensor(a, b) => {
            if prec > 0 {
                f.write_str("(")?;
            }
            write_term(a, 1, f)?;
            f.write_str(" * ")?;
            write_term(b, 0, f)?;
            if prec > 0 {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::App(a, b) => {
            if prec > 2 {
                f.write_str("(")?;
            }
            write_term(a, 2, f)?;
            f.write_str(" ")?;
            write_term(b, 3, f)?;
            if prec > 2 {
                f.write_str(")")?;
            }
            Ok(())
        }
        Term::BangBox(x) => {
            f.write_str("!")?;
            write_term(x, 3, f)
        }
        Term::BangDoor(x) => {
            f.write_str("~!")?;
            write_term(x, 3, f)
        }
        Term::ParBox(x) => {
            f.write_str("$")?;
            write_term(x, 3, f)
        }
        Term::ParDoor(x) => {
            f.write_str("~$")?;
            write_term(x, 3, f)
        }
    }
}

/// True when `s` is a valid identifier of the surface syntax.
pub fn is_identifier(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if is_ident_start(c)) && cs.all(is_ident_char) && s != "forall"
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    /// Nameless terms: the substitution oracle.
    #[derive(Debug, Clone, PartialEq)]
    enum Db {
        Free(String),
        Bound(usize),
        Lam(Box<Db>),
        App(Box<Db>, Box<Db>),
        Tensor(Box<Db>, Box<Db>),
        Un(u8, Box<Db>),
    }

    fn to_db(m: &Term, env: &mut Vec<String>) -> Db {
        match m {
            Term::Var(x) => match env.iter().rev().position(|y| y == x) {
                Some(i) => Db::Bound(i),
                None => Db::Free(x.clone()),
            },
            Term::Lam(Pattern::Var(x), b) => {
                env.push(x.clone());
                let r = Db::Lam(Box::new(to_db(b, env)));
                env.pop();
                r
            }
            Term::Lam(..) => panic!("oracle covers variable binders only"),
            Term::App(a, b) => Db::App(Box::new(to_db(a, env)), Box::new(to_db(b, env))),
            Term::Tensor(a, b) => Db::Tensor(Box::new(to_db(a, env)), Box::new(to_db(b, env))),
            Term::BangBox(a) => Db::Un(0, Box::new(to_db(a, env))),
            Term::BangDoor(a) => Db::Un(1, Box::new(to_db(a, env))),
            Term::ParBox(a) => Db::Un(2, Box::new(to_db(a, env))),
            Term::ParDoor(a) => Db::Un(3, Box::new(to_db(a, env))),
        }
    }

    fn db_subst(d: &Db, x: &str, n: &Db) -> Db {
        match d {
            Db::Free(y) if y == x => n.clone(),
            Db::Free(_) | Db::Bound(_) => d.clone(),
            Db::Lam(b) => Db::Lam(Box::new(db_subst(b, x, n))),
            Db::App(a, b) => Db::App(Box::new(db_subst(a, x, n)), Box::new(db_subst(b, x, n))),
            Db::Tensor(a, b) => Db::Tensor(Box::new(db_subst(a, x, n)), Box::new(db_subst(b, x, n))),
            Db::Un(k, a) => Db::Un(*k, Box::new(db_subst(a, x, n))),
        }
    }

    #[test]
    fn pattern_redex_waits_for_nested_tensors() {
        let m = t("(\\(a * b) * c. b c) (((\\x. x) (p * q)) * r)");
        let r = reduce_term(&m, 100).unwrap();
        assert_eq!(r.term, t("q r"));
        assert_eq!(r.steps, 2);
        let mut cur = m;
        for _ in 0..2 {
            cur = step(&cur).unwrap();
        }
        assert_eq!(cur, r.term);
    }

    #[test]
    fn free_var_examples() {
        assert!(free_vars(&t("\\x. x")).is_empty());
        assert_eq!(free_vars(&t("!(\\x. (~!y) x)")), BTreeSet::from(["y".to_string()]));
        assert_eq!(free_vars(&t("\\x * y. x * z")), BTreeSet::from(["z".to_string()]));
    }

    #[test]
    fn substitute_examples() {
        let s = |m: &str, x: &str, n: &str| subst1(&t(m), x, &t(n));
        assert_eq!(s("y", "y", "x"), t("x"));
        let r = s("\\x. y", "y", "x");
        assert!(alpha_eq(&r, &t("\\w. x")));
        assert_eq!(
            to_db(&r, &mut vec![]),
            db_subst(&to_db(&t("\\x. y"), &mut vec![]), "y", &to_db(&t("x"), &mut vec![]))
        );
        assert_eq!(s("~!z", "z", "!w"), t("~!!w"));
        assert_eq!(s("y", "x", "z"), t("y"));
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(&t("~!!y")), Some(t("y")));
        assert_eq!(step(&t("~$$(\\w. w)")), Some(t("\\w. w")));
        assert_eq!(step(&t("(\\x * y. y * x) (a * (b * c))")), Some(t("(b * c) * a")));
        assert_eq!(step(&t("(\\x * y. y) v")), None);
        assert_eq!(step(&t("(\\x * y. y) v ((\\z. z) q)")), Some(t("(\\x * y. y) v q")));
        assert_eq!(step(&t("x")), None);
    }

    #[test]
    fn alpha_examples() {
        assert!(alpha_eq(&t("!(\\x. (~!y) x)"), &t("!(\\z. (~!y) z)")));
        assert!(!alpha_eq(&t("\\x. x"), &t("\\x. y")));
        assert!(alpha_eq(&t("\\x * y. y x"), &t("\\a * b. b a")));
        assert!(!alpha_eq(&t("\\x * y. y x"), &t("\\a * b. a b")));
        assert!(!alpha_eq(&t("\\x. \\y. x"), &t("\\x. \\x. x")));
    }

    #[test]
    fn reduce_reports_fuel() {
        let omega = t("(\\x. x x) (\\x. x x)");
        let err = reduce_term(&omega, 10).unwrap_err();
        assert_eq!(err.steps, 10);
        assert!(alpha_eq(&err.last, &omega));
        let id = reduce_term(&t("(\\x. x) (\\a. $(\\b. b))"), 5).unwrap();
        assert_eq!((id.term, id.steps), (t("\\a. $(\\b. b)"), 1));
    }

    #[test]
    fn print_examples() {
        for s in [
            "\\x y. x y",
            "\\x * y. y * x",
            "\\(x * y) z. z",
            "$(\\y. ~!x (~$(z x) y))",
            "f (g x) !y * ~$z",
            "(a * b) * c",
            "(\\x. x) y",
        ] {
            assert_eq!(print_term(&t(s)), s);
        }
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        let leaf = prop::sample::select(vec!["x", "y", "z", "w"]).prop_map(var);
        leaf.prop_recursive(6, 48, 2, |inner| {
            let names = prop::sample::select(vec!["x", "y", "z", "w", "u"]);
            prop_oneof![
                (names.clone(), inner.clone()).prop_map(|(v, b)| lam(Pattern::var(v), b)),
                (names.clone(), prop::sample::select(vec!["v", "s"]), inner.clone())
                    .prop_map(|(a, b, m)| lam(Pattern::tuple(&[a, b]), m)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| app(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| tensor(a, b)),
                inner.clone().prop_map(bang),
                inner.clone().prop_map(bang_door),
                inner.clone().prop_map(par),
                inner.prop_map(par_door),
            ]
        })
    }

    /// Terms with at least two redexes: a β-redex whose argument holds
    /// another one, placed inside a random context.
    fn arb_two_redexes() -> impl Strategy<Value = Term> {
        let names = prop::sample::select(vec!["x", "y", "z"]);
        (arb_term(), arb_term(), arb_term(), names.clone(), names, any::<bool>()).prop_map(
            |(a, b, c, x, y, boxed)| {
                let inner = app(lam(Pattern::var(y), b), c);
                let arg = if boxed { bang_door(bang(inner)) } else { inner };
                app(lam(Pattern::var(x), a), arg)
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]
        #[test]
        fn local_confluence(m in arb_two_redexes(), pick in any::<prop::sample::Index>()) {
            let ps = redex_positions(&m);
            prop_assert!(ps.len() >= 2);
            let second = &ps[1 + pick.index(ps.len() - 1)];
            let left = reduce_term(&contract_at(&m, &ps[0]).unwrap(), 400);
            let right = reduce_term(&contract_at(&m, second).unwrap(), 400);
            if let (Ok(l), Ok(r)) = (left, right) {
                prop_assert!(alpha_eq(&l.term, &r.term), "{} vs {}", print_term(&l.term), print_term(&r.term));
            }
        }
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(m in arb_term()) {
            let back = parse_term(&print_term(&m)).unwrap();
            prop_assert!(alpha_eq(&back, &m));
        }

        #[test]
        fn step_none_iff_no_redex(m in arb_term()) {
            prop_assert_eq!(step(&m).is_none(), redex_positions(&m).is_empty());
        }

        #[test]
        fn step_contracts_first_position(m in arb_term()) {
            if let Some(p) = redex_positions(&m).first() {
                prop_assert_eq!(step(&m), contract_at(&m, p));
            }
        }

        #[test]
        fn normalizer_matches_stepping(m in arb_term()) {
            let fast = reduce_term(&m, 60);
            let slow = reduction_trace(&m, 60);
            match (fast, slow) {
                (Ok(r), Ok(tr)) => {
                    prop_assert_eq!(r.steps as usize, tr.len() - 1);
                    prop_assert_eq!(&r.term, tr.last().unwrap());
                }
                (Err(_), Err(_)) => {}
                (Ok(r), Err(_)) => prop_assert!(r.steps >= 60),
                (Err(e), Ok(tr)) => prop_assert!(tr.len() as u64 > e.steps),
            }
        }

        #[test]
        fn substitution_agrees_with_nameless_oracle(m in arb_term(), n in arb_term(), x in prop::sample::select(vec!["x", "y", "z"])) {
            let simple = |t: &Term| { fn ok(t: &Term) -> bool { match t { Term::Lam(Pattern::Tensor(..), _) => false, o => o.children().into_iter().all(ok) } } ok(t) };
            prop_assume!(simple(&m) && simple(&n));
            let named = subst1(&m, x, &n);
            let oracle = db_subst(&to_db(&m, &mut vec![]), x, &to_db(&n, &mut vec![]));
            prop_assert_eq!(to_db(&named, &mut vec![]), oracle);
        }
    }
}

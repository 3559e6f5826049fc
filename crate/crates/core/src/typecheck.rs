//! Sequent derivations decorated with terms: a rule-by-rule checker, a
//! goal-directed elaborator from terms to derivations, a text script format
//! and the translation of derivations into labelled nets.
//!
//! Every elaborated derivation is re-checked by [`check_derivation`] before it
//! is returned; the two share no code beyond the conclusion builders.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formula::{alpha_eq_formula, fresh_type_var, parse_formula_at, subst_type, Formula, TypeVar};
use crate::lal::Program;
use crate::net::{End, Ids, LinkId, Mark, Net, NodeKind};
use crate::syntax::{Cursor, SyntaxError, Tok};
use crate::term::{
    alpha_eq, free_vars, fresh_name, parse_pattern_at, parse_term_at, subst1, substitute, Pattern, Term,
};

/// An assumption `P : A`; `P` is a variable or a tensor pattern.
pub type Assumption = (Pattern, Formula);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgement {
    pub context: Vec<Assumption>,
    pub subject: Term,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Ax,
    /// `var` is the assumption of the right premise that the cut consumes.
    Cut {
        var: String,
    },
    Weak {
        var: String,
    },
    /// Merges `x` and `y` into `z`.
    Contr {
        x: String,
        y: String,
        z: String,
    },
    /// `x : A ⊸ B` is introduced; `y : B` is the right premise's assumption.
    LolliL {
        x: String,
        y: String,
    },
    LolliR,
    TensorL,
    TensorR,
    BangIntro,
    /// The door mark of every premise assumption.
    ParIntro {
        marks: Vec<(String, Mark)>,
    },
    /// `var : ∀α.A` is instantiated with `witness`.
    ForallL {
        var: String,
        witness: Formula,
    },
    ForallR {
        eigen: TypeVar,
    },
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Ax => "Ax",
            Rule::Cut { .. } => "Cut",
            Rule::Weak { .. } => "Weak",
            Rule::Contr { .. } => "Contr",
            Rule::LolliL { .. } => "LolliL",
            Rule::LolliR => "LolliR",
            Rule::TensorL => "TensorL",
            Rule::TensorR => "TensorR",
            Rule::BangIntro => "BangIntro",
            Rule::ParIntro { .. } => "ParIntro",
            Rule::ForallL { .. } => "ForallL",
            Rule::ForallR { .. } => "ForallR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: Rule,
    pub premises: Vec<Derivation>,
    pub conclusion: Judgement,
}

fn pvar(x: &str) -> Pattern {
    Pattern::Var(x.to_string())
}

fn take(ctx: &mut Vec<Assumption>, p: &Pattern) -> Formula {
    let i =
        ctx.iter().position(|(q, _)| q == p).unwrap_or_else(|| panic!("no assumption {p} in the premise"));
    ctx.remove(i).1
}

fn door(mark: Mark, x: &str) -> Term {
    match mark {
        Mark::Bang => Term::BangDoor(Box::new(Term::Var(x.to_string()))),
        Mark::Par => Term::ParDoor(Box::new(Term::Var(x.to_string()))),
    }
}

fn modal(mark: Mark, a: Formula) -> Formula {
    match mark {
        Mark::Bang => Formula::bang(a),
        Mark::Par => Formula::par(a),
    }
}

/// Builders computing the conclusion of each rule from its premises. They
/// panic when a named assumption is missing from a premise.
impl Derivation {
    pub fn ax(x: &str, b: Formula) -> Derivation {
        Derivation {
            rule: Rule::Ax,
            premises: vec![],
            conclusion: Judgement {
                context: vec![(pvar(x), b.clone())],
                subject: Term::Var(x.to_string()),
                formula: b,
            },
        }
    }

    pub fn cut(var: &str, left: Derivation, right: Derivation) -> Derivation {
        let mut context = left.conclusion.context.clone();
        let mut rest = right.conclusion.context.clone();
        take(&mut rest, &pvar(var));
        context.extend(rest);
        let subject = subst1(&right.conclusion.subject, var, &left.conclusion.subject);
        let formula = right.conclusion.formula.clone();
        Derivation {
            rule: Rule::Cut { var: var.to_string() },
            premises: vec![left, right],
            conclusion: Judgement { context, subject, formula },
        }
    }

    pub fn weak(var: &str, a: Formula, d: Derivation) -> Derivation {
        let mut c = d.conclusion.clone();
        c.context.push((pvar(var), a));
        Derivation { rule: Rule::Weak { var: var.to_string() }, premises: vec![d], conclusion: c }
    }

    pub fn contr(x: &str, y: &str, z: &str, d: Derivation) -> Derivation {
        let mut context = d.conclusion.context.clone();
        let a = take(&mut context, &pvar(x));
        take(&mut context, &pvar(y));
        context.push((pvar(z), a));
        let map: BTreeMap<String, Term> =
            [x, y].iter().map(|v| (v.to_string(), Term::Var(z.to_string()))).collect();
        let subject = substitute(&d.conclusion.subject, &map);
        let formula = d.conclusion.formula.clone();
        Derivation {
            rule: Rule::Contr { x: x.to_string(), y: y.to_string(), z: z.to_string() },
            premises: vec![d],
            conclusion: Judgement { context, subject, formula },
        }
    }

    pub fn lolli_l(x: &str, y: &str, left: Derivation, right: Derivation) -> Derivation {
        let mut context = left.conclusion.context.clone();
        let mut rest = right.conclusion.context.clone();
        let b = take(&mut rest, &pvar(y));
        context.extend(rest);
        context.push((pvar(x), Formula::lolli(left.conclusion.formula.clone(), b)));
        let applied =
            Term::App(Box::new(Term::Var(x.to_string())), Box::new(left.conclusion.subject.clone()));
        let subject = subst1(&right.conclusion.subject, y, &applied);
        let formula = right.conclusion.formula.clone();
        Derivation {
            rule: Rule::LolliL { x: x.to_string(), y: y.to_string() },
            premises: vec![left, right],
            conclusion: Judgement { context, subject, formula },
        }
    }

    pub fn lolli_r(p: &Pattern, d: Derivation) -> Derivation {
        let mut context = d.conclusion.context.clone();
        let b = take(&mut context, p);
        let subject = Term::Lam(p.clone(), Box::new(d.conclusion.subject.clone()));
        let formula = Formula::lolli(b, d.conclusion.formula.clone());
        Derivation {
            rule: Rule::LolliR,
            premises: vec![d],
            conclusion: Judgement { context, subject, formula },
        }
    }

    pub fn tensor_l(p1: &Pattern, p2: &Pattern, d: Derivation) -> Derivation {
        let mut c = d.conclusion.clone();
        let b1 = take(&mut c.context, p1);
        let b2 = take(&mut c.context, p2);
        c.context.push((Pattern::tensor(p1.clone(), p2.clone()), Formula::tensor(b1, b2)));
        Derivation { rule: Rule::TensorL, premises: vec![d], conclusion: c }
    }

    pub fn tensor_r(left: Derivation, right: Derivation) -> Derivation {
        let mut context = left.conclusion.context.clone();
        context.extend(right.conclusion.context.iter().cloned());
        let subject = Term::Tensor(
            Box::new(left.conclusion.subject.clone()),
            Box::new(right.conclusion.subject.clone()),
        );
        let formula = Formula::tensor(left.conclusion.formula.clone(), right.conclusion.formula.clone());
        Derivation {
            rule: Rule::TensorR,
            premises: vec![left, right],
            conclusion: Judgement { context, subject, formula },
        }
    }

    fn boxed(rule: Rule, marks: &[(String, Mark)], d: Derivation) -> Derivation {
        let mark_of = |p: &Pattern| match p {
            Pattern::Var(x) => marks.iter().find(|(y, _)| y == x).map(|(_, m)| *m).unwrap_or(Mark::Bang),
            Pattern::Tensor(..) => Mark::Bang,
        };
        let context =
            d.conclusion.context.iter().map(|(p, a)| (p.clone(), modal(mark_of(p), a.clone()))).collect();
        let map: BTreeMap<String, Term> = d
            .conclusion
            .context
            .iter()
            .filter_map(|(p, _)| match p {
                Pattern::Var(x) => Some((x.clone(), door(mark_of(p), x))),
                Pattern::Tensor(..) => None,
            })
            .collect();
        let inner = Box::new(substitute(&d.conclusion.subject, &map));
        let (subject, formula) = match rule {
            Rule::BangIntro => (Term::BangBox(inner), Formula::bang(d.conclusion.formula.clone())),
            _ => (Term::ParBox(inner), Formula::par(d.conclusion.formula.clone())),
        };
        Derivation { rule, premises: vec![d], conclusion: Judgement { context, subject, formula } }
    }

    pub fn bang_intro(d: Derivation) -> Derivation {
        Derivation::boxed(Rule::BangIntro, &[], d)
    }

    pub fn par_intro(marks: Vec<(String, Mark)>, d: Derivation) -> Derivation {
        let m = marks.clone();
        Derivation::boxed(Rule::ParIntro { marks }, &m, d)
    }

    /// `quantified` is `∀α.A`, the assumption's type in the conclusion.
    pub fn forall_l(var: &str, quantified: Formula, witness: Formula, d: Derivation) -> Derivation {
        let mut c = d.conclusion.clone();
        take(&mut c.context, &pvar(var));
        c.context.push((pvar(var), quantified));
        Derivation { rule: Rule::ForallL { var: var.to_string(), witness }, premises: vec![d], conclusion: c }
    }

    pub fn forall_r(eigen: &str, d: Derivation) -> Derivation {
        let mut c = d.conclusion.clone();
        c.formula = Formula::forall(eigen, c.formula);
        Derivation { rule: Rule::ForallR { eigen: eigen.to_string() }, premises: vec![d], conclusion: c }
    }

    /// Number of rule instances.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    fn visit_formulas_mut(&mut self, f: &mut dyn FnMut(&mut Formula)) {
        for (_, a) in &mut self.conclusion.context {
            f(a);
        }
        f(&mut self.conclusion.formula);
        if let Rule::ForallL { witness, .. } = &mut self.rule {
            f(witness);
        }
        for p in &mut self.premises {
            p.visit_formulas_mut(f);
        }
    }
}

// ---------------------------------------------------------------------------
// Checking

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// The node does not instantiate its rule schema.
    Schema(String),
    /// Two assumptions bind the same variable.
    ContextClash(String),
    /// A pattern assumption whose formula is not a matching tensor.
    ExtendedSet(String),
    /// A free variable of the subject has no assumption.
    IllScoped(String),
    /// A !-box with more than one assumption.
    BangArity(usize),
    /// The ∀-introduced variable is free in the context.
    EigenvariableViolation(TypeVar),
}

/// A violation at the node reached by following `path` premise indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleViolation {
    pub path: Vec<usize>,
    pub rule: &'static str,
    pub kind: ViolationKind,
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:?}: {:?}", self.rule, self.path, self.kind)
    }
}

fn pattern_fits(p: &Pattern, a: &Formula) -> bool {
    match (p, a) {
        (Pattern::Var(_), _) => true,
        (Pattern::Tensor(p1, p2), Formula::Tensor(a1, a2)) => pattern_fits(p1, a1) && pattern_fits(p2, a2),
        _ => false,
    }
}

/// Multiset equality of contexts, formulas up to renaming of bound variables.
fn same_context(a: &[Assumption], b: &[Assumption]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|(p, f)| {
        match (0..b.len()).find(|&j| !used[j] && b[j].0 == *p && alpha_eq_formula(&b[j].1, f)) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}

fn without(ctx: &[Assumption], p: &Pattern) -> Option<(Vec<Assumption>, Formula)> {
    let i = ctx.iter().position(|(q, _)| q == p)?;
    let mut rest = ctx.to_vec();
    let (_, f) = rest.remove(i);
    Some((rest, f))
}

fn ctx_free_type_vars(ctx: &[Assumption]) -> BTreeSet<TypeVar> {
    ctx.iter().flat_map(|(_, a)| a.free_vars()).collect()
}

/// Every violation in `d`; empty iff each node instantiates its rule.
pub fn check_derivation(d: &Derivation) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    check_node(d, &mut Vec::new(), &mut out);
    out
}

fn check_node(d: &Derivation, path: &mut Vec<usize>, out: &mut Vec<RuleViolation>) {
    let rule = d.rule.name();
    let mut report = |kind: ViolationKind| out.push(RuleViolation { path: path.clone(), rule, kind });
    let c = &d.conclusion;
    let mut names = BTreeSet::new();
    for (p, a) in &c.context {
        for v in p.vars() {
            if !names.insert(v.clone()) {
                report(ViolationKind::ContextClash(v));
            }
        }
        if !p.is_linear() || !pattern_fits(p, a) {
            report(ViolationKind::ExtendedSet(format!("{p} : {a}")));
        }
    }
    for v in free_vars(&c.subject) {
        if !names.contains(&v) {
            report(ViolationKind::IllScoped(v));
        }
    }
    let mut schema = |ok: bool, what: &str| {
        if !ok {
            out.push(RuleViolation {
                path: path.clone(),
                rule,
                kind: ViolationKind::Schema(what.to_string()),
            });
        }
    };
    let arity = match d.rule {
        Rule::Ax => 0,
        Rule::Cut { .. } | Rule::LolliL { .. } | Rule::TensorR => 2,
        _ => 1,
    };
    if d.premises.len() != arity {
        schema(false, "premise count");
    } else {
        let p = |i: usize| &d.premises[i].conclusion;
        match &d.rule {
            Rule::Ax => {
                let ok = matches!(&c.context[..], [(Pattern::Var(x), b)]
                    if c.subject == Term::Var(x.clone()) && alpha_eq_formula(b, &c.formula));
                schema(ok, "x : B |- x : B");
            }
            Rule::Cut { var } => {
                match without(&p(1).context, &pvar(var)) {
                    Some((rest, a)) => {
                        schema(alpha_eq_formula(&a, &p(0).formula), "cut formula");
                        let mut expect = p(0).context.clone();
                        expect.extend(rest);
                        schema(same_context(&expect, &c.context), "context is the union");
                    }
                    None => schema(false, "cut variable assumed on the right"),
                }
                schema(alpha_eq(&c.subject, &subst1(&p(1).subject, var, &p(0).subject)), "subject N[M/x]");
                schema(alpha_eq_formula(&c.formula, &p(1).formula), "formula");
            }
            Rule::Weak { var } => {
                let mut expect = p(0).context.clone();
                match without(&c.context, &pvar(var)) {
                    Some((rest, a)) => {
                        expect.push((pvar(var), a));
                        schema(same_context(&rest, &p(0).context), "context extended by one");
                    }
                    None => schema(false, "weakened variable assumed"),
                }
                schema(
                    alpha_eq(&c.subject, &p(0).subject) && alpha_eq_formula(&c.formula, &p(0).formula),
                    "subject and formula unchanged",
                );
            }
            Rule::Contr { x, y, z } => {
                let prem = &p(0).context;
                let ok = match (without(prem, &pvar(x)), x != y) {
                    (Some((rest, a)), true) => match without(&rest, &pvar(y)) {
                        Some((rest, b)) => {
                            schema(
                                matches!(a, Formula::Bang(_)) && alpha_eq_formula(&a, &b),
                                "both assumptions are the same !A",
                            );
                            let mut expect = rest;
                            expect.push((pvar(z), a));
                            same_context(&expect, &c.context)
                        }
                        None => false,
                    },
                    _ => false,
                };
                schema(ok, "x, y replaced by z");
                let map: BTreeMap<String, Term> =
                    [x, y].iter().map(|v| (v.to_string(), Term::Var(z.clone()))).collect();
                schema(alpha_eq(&c.subject, &substitute(&p(0).subject, &map)), "subject M{z/x, z/y}");
                schema(alpha_eq_formula(&c.formula, &p(0).formula), "formula");
            }
            Rule::LolliL { x, y } => match without(&p(1).context, &pvar(y)) {
                Some((rest, b)) => {
                    let mut expect = p(0).context.clone();
                    expect.extend(rest);
                    expect.push((pvar(x), Formula::lolli(p(0).formula.clone(), b)));
                    schema(same_context(&expect, &c.context), "context Γ, Δ, x : A -o B");
                    let applied = Term::App(Box::new(Term::Var(x.clone())), Box::new(p(0).subject.clone()));
                    schema(alpha_eq(&c.subject, &subst1(&p(1).subject, y, &applied)), "subject N[x M/y]");
                    schema(alpha_eq_formula(&c.formula, &p(1).formula), "formula");
                }
                None => schema(false, "y assumed on the right"),
            },
            Rule::LolliR => match (&c.subject, &c.formula) {
                (Term::Lam(pat, body), Formula::Lolli(b, cf)) => {
                    match without(&p(0).context, pat) {
                        Some((rest, a)) => {
                            schema(alpha_eq_formula(&a, b), "pattern formula");
                            schema(same_context(&rest, &c.context), "context");
                        }
                        None => schema(false, "pattern assumed in the premise"),
                    }
                    schema(alpha_eq(body, &p(0).subject), "body");
                    schema(alpha_eq_formula(cf, &p(0).formula), "codomain");
                }
                _ => schema(false, "conclusion is \\P. M : A -o B"),
            },
            Rule::TensorL => {
                let new: Vec<&Assumption> =
                    c.context.iter().filter(|(q, _)| !p(0).context.iter().any(|(r, _)| r == q)).collect();
                let ok = match &new[..] {
                    [(Pattern::Tensor(p1, p2), Formula::Tensor(b1, b2))] => {
                        match without(&p(0).context, p1)
                            .and_then(|(rest, a1)| without(&rest, p2).map(|(rest, a2)| (rest, a1, a2)))
                        {
                            Some((rest, a1, a2)) => {
                                let mut expect = rest;
                                expect.push(new[0].clone());
                                alpha_eq_formula(&a1, b1)
                                    && alpha_eq_formula(&a2, b2)
                                    && same_context(&expect, &c.context)
                            }
                            None => false,
                        }
                    }
                    _ => false,
                };
                schema(ok, "P1, P2 replaced by P1 * P2");
                schema(
                    alpha_eq(&c.subject, &p(0).subject) && alpha_eq_formula(&c.formula, &p(0).formula),
                    "subject and formula unchanged",
                );
            }
            Rule::TensorR => {
                let mut expect = p(0).context.clone();
                expect.extend(p(1).context.iter().cloned());
                schema(same_context(&expect, &c.context), "context is the union");
                let subject = Term::Tensor(Box::new(p(0).subject.clone()), Box::new(p(1).subject.clone()));
                schema(alpha_eq(&c.subject, &subject), "subject M * N");
                let formula = Formula::tensor(p(0).formula.clone(), p(1).formula.clone());
                schema(alpha_eq_formula(&c.formula, &formula), "formula B * A");
            }
            Rule::BangIntro | Rule::ParIntro { .. } => {
                let marks: Vec<(String, Mark)> = match &d.rule {
                    Rule::ParIntro { marks } => marks.clone(),
                    _ => {
                        let n = p(0).context.len();
                        if n > 1 {
                            out.push(RuleViolation {
                                path: path.clone(),
                                rule,
                                kind: ViolationKind::BangArity(n),
                            });
                        }
                        p(0).context
                            .iter()
                            .filter_map(|(q, _)| match q {
                                Pattern::Var(x) => Some((x.clone(), Mark::Bang)),
                                _ => None,
                            })
                            .collect()
                    }
                };
                let mut schema = |ok: bool, what: &str| {
                    if !ok {
                        out.push(RuleViolation {
                            path: path.clone(),
                            rule,
                            kind: ViolationKind::Schema(what.to_string()),
                        });
                    }
                };
                let vars_ok = p(0).context.len() == marks.len()
                    && p(0)
                        .context
                        .iter()
                        .all(|(q, _)| matches!(q, Pattern::Var(x) if marks.iter().any(|(y, _)| y == x)));
                schema(vars_ok, "every premise assumption is a marked variable");
                if vars_ok {
                    let expect: Vec<Assumption> = p(0)
                        .context
                        .iter()
                        .map(|(q, a)| {
                            let Pattern::Var(x) = q else { unreachable!() };
                            let m = marks.iter().find(|(y, _)| y == x).unwrap().1;
                            (q.clone(), modal(m, a.clone()))
                        })
                        .collect();
                    schema(same_context(&expect, &c.context), "assumptions under their door modality");
                    let map: BTreeMap<String, Term> =
                        marks.iter().map(|(x, m)| (x.clone(), door(*m, x))).collect();
                    let inner = Box::new(substitute(&p(0).subject, &map));
                    let (subject, formula) = match d.rule {
                        Rule::BangIntro => (Term::BangBox(inner), Formula::bang(p(0).formula.clone())),
                        _ => (Term::ParBox(inner), Formula::par(p(0).formula.clone())),
                    };
                    schema(alpha_eq(&c.subject, &subject), "boxed subject with doors");
                    schema(alpha_eq_formula(&c.formula, &formula), "boxed formula");
                }
            }
            Rule::ForallL { var, witness } => {
                let ok = match (without(&p(0).context, &pvar(var)), without(&c.context, &pvar(var))) {
                    (Some((prest, inst)), Some((crest, Formula::Forall(a, body)))) => {
                        alpha_eq_formula(&subst_type(&body, &a, witness), &inst)
                            && same_context(&prest, &crest)
                    }
                    _ => false,
                };
                schema(ok, "x : forall a. A becomes x : A[B/a]");
                schema(
                    alpha_eq(&c.subject, &p(0).subject) && alpha_eq_formula(&c.formula, &p(0).formula),
                    "subject and formula unchanged",
                );
            }
            Rule::ForallR { eigen } => {
                schema(same_context(&c.context, &p(0).context), "context unchanged");
                schema(alpha_eq(&c.subject, &p(0).subject), "subject unchanged");
                let expect = Formula::forall(eigen, p(0).formula.clone());
                schema(alpha_eq_formula(&c.formula, &expect), "formula forall a. A");
                if ctx_free_type_vars(&c.context).contains(eigen) {
                    out.push(RuleViolation {
                        path: path.clone(),
                        rule,
                        kind: ViolationKind::EigenvariableViolation(eigen.clone()),
                    });
                }
            }
        }
    }
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        check_node(p, path, out);
        path.pop();
    }
}

// ---------------------------------------------------------------------------
// Elaboration

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("ill-scoped term: {0}")]
    IllScoped(String),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("needs annotation: {0}")]
    NeedsAnnotation(String),
}

/// Declared types of free constants, and the definitions of those that have
/// one. A defined constant is checked once at its declared type and each of
/// its occurrences reuses that derivation.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    pub types: BTreeMap<String, Formula>,
    pub defs: BTreeMap<String, Term>,
}

impl TypeEnv {
    pub fn new() -> TypeEnv {
        TypeEnv::default()
    }

    pub fn declare(&mut self, name: &str, ty: Formula) -> &mut Self {
        self.types.insert(name.to_string(), ty);
        self
    }

    pub fn define(&mut self, name: &str, term: Term, ty: Formula) -> &mut Self {
        self.types.insert(name.to_string(), ty);
        self.defs.insert(name.to_string(), term);
        self
    }

    /// Every definition of `p` that has a declared type.
    pub fn from_program(p: &Program) -> TypeEnv {
        let mut env = TypeEnv::new();
        for (name, ty) in p.types() {
            match p.raw(name) {
                Some(t) => env.define(name, t.clone(), ty.clone()),
                None => env.declare(name, ty.clone()),
            };
        }
        env
    }

    /// `m` with every defined constant replaced by its definition.
    pub fn expand(&self, m: &Term) -> Term {
        let mut cur = m.clone();
        for _ in 0..=self.defs.len() {
            let fv = free_vars(&cur);
            let map: BTreeMap<String, Term> = self
                .defs
                .iter()
                .filter(|(k, _)| fv.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if map.is_empty() {
                break;
            }
            cur = substitute(&cur, &map);
        }
        cur
    }
}

fn is_meta(v: &str) -> bool {
    v.starts_with('?')
}

fn spine(m: &Term) -> (&Term, Vec<&Term>) {
    let mut args = Vec::new();
    let mut cur = m;
    while let Term::App(f, a) = cur {
        args.push(&**a);
        cur = f;
    }
    args.reverse();
    (cur, args)
}

fn all_names(m: &Term, out: &mut BTreeSet<String>) {
    match m {
        Term::Var(x) => {
            out.insert(x.clone());
        }
        Term::Lam(p, b) => {
            out.extend(p.vars());
            all_names(b, out);
        }
        other => other.children().into_iter().for_each(|c| all_names(c, out)),
    }
}

fn all_type_names(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Var(v) => {
            out.insert(v.clone());
        }
        Formula::Lolli(a, b) | Formula::Tensor(a, b) => {
            all_type_names(a, out);
            all_type_names(b, out);
        }
        Formula::Bang(a) | Formula::Par(a) => all_type_names(a, out),
        Formula::Forall(v, a) => {
            out.insert(v.clone());
            all_type_names(a, out);
        }
    }
}

struct Door {
    mark: Mark,
    var: String,
    complex: Option<Term>,
}

struct Elab<'e> {
    env: &'e TypeEnv,
    subst: HashMap<String, Formula>,
    next_meta: usize,
    names: BTreeSet<String>,
    tvars: BTreeSet<String>,
    /// Occurrence name to the binder (or free constant) it refers to.
    origin: HashMap<String, String>,
    /// Binder to its occurrence names in textual order.
    occs: HashMap<String, Vec<String>>,
    /// Occurrence name to its type and the box depth it lives at.
    vars: HashMap<String, (Formula, usize)>,
    level: usize,
    consts: HashMap<String, Derivation>,
    pending: BTreeSet<String>,
    /// Instantiate a ∀ met by an unsolved goal instead of storing it.
    eager: bool,
    /// Expanded closed definitions with their sizes, folded back to names.
    hints: Vec<(usize, String, Term)>,
}

impl<'e> Elab<'e> {
    fn new(env: &'e TypeEnv, eager: bool, fold: bool) -> Self {
        let mut names = BTreeSet::new();
        let mut tvars = BTreeSet::new();
        for (k, t) in &env.types {
            names.insert(k.clone());
            all_type_names(t, &mut tvars);
        }
        for t in env.defs.values() {
            all_names(t, &mut names);
        }
        Elab {
            env,
            subst: HashMap::new(),
            next_meta: 0,
            names,
            tvars,
            origin: HashMap::new(),
            occs: HashMap::new(),
            vars: HashMap::new(),
            level: 0,
            consts: HashMap::new(),
            pending: BTreeSet::new(),
            eager,
            hints: if fold { hints(env) } else { Vec::new() },
        }
    }

    /// `m` with every subterm alpha-equal to an expanded definition replaced
    /// by the definition's name; `m` itself is kept when `top` is false.
    fn fold(&self, m: &Term, top: bool) -> Term {
        if self.hints.is_empty() {
            return m.clone();
        }
        let n = m.size();
        if let Some((_, name, _)) = self.hints.iter().find(|(k, _, t)| top && *k == n && alpha_eq(t, m)) {
            return Term::Var(name.clone());
        }
        match m {
            Term::Var(_) => m.clone(),
            Term::Lam(p, b) => Term::Lam(p.clone(), Box::new(self.fold(b, true))),
            Term::App(a, b) => Term::App(Box::new(self.fold(a, true)), Box::new(self.fold(b, true))),
            Term::Tensor(a, b) => Term::Tensor(Box::new(self.fold(a, true)), Box::new(self.fold(b, true))),
            Term::BangBox(a) => Term::BangBox(Box::new(self.fold(a, true))),
            Term::ParBox(a) => Term::ParBox(Box::new(self.fold(a, true))),
            Term::BangDoor(a) => Term::BangDoor(Box::new(self.fold(a, true))),
            Term::ParDoor(a) => Term::ParDoor(Box::new(self.fold(a, true))),
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        let n = fresh_name(base, &self.names);
        self.names.insert(n.clone());
        n
    }

    fn fresh_tvar(&mut self, base: &str) -> String {
        let v = fresh_type_var(base, &self.tvars);
        self.tvars.insert(v.clone());
        v
    }

    fn meta(&mut self) -> Formula {
        self.next_meta += 1;
        Formula::Var(format!("?{}", self.next_meta))
    }

    /// Renames binders apart and gives every occurrence its own name; the
    /// first occurrence of a binder keeps the binder's name.
    fn linearize(
        &mut self,
        m: &Term,
        scope: &mut Vec<(String, String)>,
        claimed: &mut BTreeSet<String>,
    ) -> Term {
        match m {
            Term::Var(x) => {
                let b = scope
                    .iter()
                    .rev()
                    .find(|(o, _)| o == x)
                    .map(|(_, u)| u.clone())
                    .unwrap_or_else(|| x.clone());
                let seen = self.occs.get(&b).map_or(0, Vec::len);
                let occ = if seen == 0 { b.clone() } else { self.fresh(&b) };
                self.occs.entry(b.clone()).or_default().push(occ.clone());
                self.origin.insert(occ.clone(), b);
                Term::Var(occ)
            }
            Term::Lam(p, body) => {
                let mut renames = BTreeMap::new();
                for v in p.vars() {
                    let u = if claimed.contains(&v) { self.fresh(&v) } else { v.clone() };
                    claimed.insert(u.clone());
                    self.names.insert(u.clone());
                    renames.insert(v.clone(), u.clone());
                    scope.push((v, u));
                }
                let body = self.linearize(body, scope, claimed);
                for _ in 0..renames.len() {
                    scope.pop();
                }
                Term::Lam(rename_pattern(p, &renames), Box::new(body))
            }
            Term::App(a, b) => Term::App(
                Box::new(self.linearize(a, scope, claimed)),
                Box::new(self.linearize(b, scope, claimed)),
            ),
            Term::Tensor(a, b) => Term::Tensor(
                Box::new(self.linearize(a, scope, claimed)),
                Box::new(self.linearize(b, scope, claimed)),
            ),
            Term::BangBox(a) => Term::BangBox(Box::new(self.linearize(a, scope, claimed))),
            Term::ParBox(a) => Term::ParBox(Box::new(self.linearize(a, scope, claimed))),
            Term::BangDoor(a) => Term::BangDoor(Box::new(self.linearize(a, scope, claimed))),
            Term::ParDoor(a) => Term::ParDoor(Box::new(self.linearize(a, scope, claimed))),
        }
    }

    fn start(&mut self, m: &Term) -> Term {
        all_names(m, &mut self.names);
        let mut claimed: BTreeSet<String> = free_vars(m);
        claimed.extend(self.env.types.keys().cloned());
        claimed.extend(self.occs.keys().cloned());
        claimed.extend(self.origin.keys().cloned());
        self.linearize(m, &mut Vec::new(), &mut claimed)
    }

    fn resolve(&self, f: &Formula) -> Formula {
        let mut cur = f.clone();
        while let Formula::Var(v) = &cur {
            match self.subst.get(v) {
                Some(g) => cur = g.clone(),
                None => break,
            }
        }
        cur
    }

    /// Metas are global, so solutions are grafted in without renaming
    /// binders they may mention.
    fn zonk(&self, f: &Formula) -> Formula {
        match f {
            Formula::Var(v) => match self.subst.get(v) {
                Some(g) => self.zonk(g),
                None => f.clone(),
            },
            Formula::Lolli(a, b) => Formula::lolli(self.zonk(a), self.zonk(b)),
            Formula::Tensor(a, b) => Formula::tensor(self.zonk(a), self.zonk(b)),
            Formula::Bang(a) => Formula::bang(self.zonk(a)),
            Formula::Par(a) => Formula::par(self.zonk(a)),
            Formula::Forall(v, a) => Formula::forall(v, self.zonk(a)),
        }
    }

    fn try_unify(&mut self, a: &Formula, b: &Formula) -> bool {
        let mut trail = Vec::new();
        if self.unify(a, b, &mut trail) {
            true
        } else {
            for k in trail {
                self.subst.remove(&k);
            }
            false
        }
    }

    fn unify(&mut self, a: &Formula, b: &Formula, trail: &mut Vec<String>) -> bool {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Formula::Var(x), Formula::Var(y)) if x == y => true,
            (Formula::Var(m), t) | (t, Formula::Var(m)) if is_meta(m) => {
                if self.zonk(t).occurs_free(m) {
                    return false;
                }
                self.subst.insert(m.clone(), t.clone());
                trail.push(m.clone());
                true
            }
            (Formula::Lolli(a1, a2), Formula::Lolli(b1, b2))
            | (Formula::Tensor(a1, a2), Formula::Tensor(b1, b2)) => {
                self.unify(a1, b1, trail) && self.unify(a2, b2, trail)
            }
            (Formula::Bang(x), Formula::Bang(y)) | (Formula::Par(x), Formula::Par(y)) => {
                self.unify(x, y, trail)
            }
            (Formula::Forall(x, a1), Formula::Forall(y, b1)) => {
                let r = self.fresh_tvar(x);
                let mark = trail.len();
                let rv = Formula::Var(r.clone());
                if !self.unify(&subst_type(a1, x, &rv), &subst_type(b1, y, &rv), trail) {
                    return false;
                }
                // No solution may mention the local variable.
                trail[mark..].iter().all(|k| !self.zonk(&self.subst[k]).occurs_free(&r))
            }
            _ => false,
        }
    }

    fn mismatch(&self, what: &str, found: &Formula) -> CheckError {
        CheckError::Rejected(format!("{what} cannot have type {}", self.zonk(found)))
    }

    fn check(&mut self, m: &Term, goal: Formula) -> Result<Derivation, CheckError> {
        let g = self.resolve(&goal);
        match m {
            Term::Var(x) => self.check_var(x, g),
            Term::App(..) => {
                let (d, t) = self.synth(m)?;
                self.coerce(d, t, g)
            }
            Term::BangDoor(_) | Term::ParDoor(_) => {
                Err(CheckError::Rejected(format!("door {m} outside of any box")))
            }
            _ => {
                if let Formula::Forall(a, body) = &g {
                    let e = self.fresh_tvar(a);
                    let d = self.check(m, subst_type(body, a, &Formula::Var(e.clone())))?;
                    return Ok(Derivation::forall_r(&e, d));
                }
                match m {
                    Term::Lam(p, body) => self.check_lam(p, body, g),
                    Term::Tensor(a, b) => {
                        let (ta, tb) = (self.meta(), self.meta());
                        if !self.try_unify(&g, &Formula::tensor(ta.clone(), tb.clone())) {
                            return Err(self.mismatch("a tensor", &g));
                        }
                        let da = self.check(a, ta)?;
                        let db = self.check(b, tb)?;
                        Ok(Derivation::tensor_r(da, db))
                    }
                    _ => self.check_box(m, g),
                }
            }
        }
    }

    fn check_var(&mut self, x: &str, g: Formula) -> Result<Derivation, CheckError> {
        if let Some((d, t)) = self.constant(x)? {
            return self.coerce(d, t, g);
        }
        let t = self.var_type(x)?;
        self.coerce_var(x, t, g)
    }

    fn var_type(&self, x: &str) -> Result<Formula, CheckError> {
        match self.vars.get(x) {
            Some((t, l)) if *l == self.level => Ok(t.clone()),
            Some(_) => Err(CheckError::Rejected(format!(
                "variable {} crosses a box boundary without a door",
                self.origin.get(x).map_or(x, String::as_str)
            ))),
            None => Err(CheckError::IllScoped(self.origin.get(x).cloned().unwrap_or_else(|| x.to_string()))),
        }
    }

    /// The derivation of a defined constant at its declared type.
    fn constant(&mut self, occ: &str) -> Result<Option<(Derivation, Formula)>, CheckError> {
        let Some(c) = self.origin.get(occ).cloned() else { return Ok(None) };
        if self.vars.contains_key(occ) || !self.env.defs.contains_key(&c) {
            return Ok(None);
        }
        if let Some(d) = self.consts.get(&c) {
            let t = d.conclusion.formula.clone();
            return Ok(Some((d.clone(), t)));
        }
        if !self.pending.insert(c.clone()) {
            return Err(CheckError::NeedsAnnotation(format!("definition of {c} refers to itself")));
        }
        let raw = self.fold(&self.env.defs[&c], false);
        let ty = self.env.types[&c].clone();
        for b in free_vars(&raw) {
            if !self.env.defs.contains_key(&b) {
                return Err(CheckError::NeedsAnnotation(format!(
                    "definition of {c} uses {b}, which has no definition"
                )));
            }
        }
        let (level, subst, eager) = (self.level, self.subst.clone(), self.eager);
        self.level = 0;
        let lin = self.start(&raw);
        let mut d = self.check(&lin, ty.clone());
        if d.is_err() {
            self.subst = subst;
            self.eager = !eager;
            let lin = self.start(&raw);
            if let Ok(e) = self.check(&lin, ty) {
                d = Ok(e);
            }
        }
        self.level = level;
        self.eager = eager;
        let d = self.finish(d?);
        self.pending.remove(&c);
        self.consts.insert(c, d.clone());
        let t = d.conclusion.formula.clone();
        Ok(Some((d, t)))
    }

    fn open_goal(&self, t: &Formula, g: &Formula) -> bool {
        self.eager
            && matches!(self.resolve(g), Formula::Var(v) if is_meta(&v))
            && matches!(self.resolve(t), Formula::Forall(..))
    }

    fn coerce(&mut self, d: Derivation, t: Formula, g: Formula) -> Result<Derivation, CheckError> {
        if !self.open_goal(&t, &g) && self.try_unify(&t, &g) {
            return Ok(d);
        }
        if d.rule == Rule::Ax {
            if let Term::Var(x) = &d.conclusion.subject {
                return self.coerce_var(&x.clone(), t, g);
            }
        }
        let v = self.fresh("v");
        let cv = self.coerce_var(&v, t, g)?;
        Ok(Derivation::cut(&v, d, cv))
    }

    /// `x : t |- x : g` through ∀ introductions and instantiations.
    /// A ∀ met by an unsolved goal is instantiated rather than stored in the
    /// meta.
    fn coerce_var(&mut self, x: &str, t: Formula, g: Formula) -> Result<Derivation, CheckError> {
        if !self.open_goal(&t, &g) && self.try_unify(&t, &g) {
            return Ok(Derivation::ax(x, t));
        }
        let (t, g) = (self.resolve(&t), self.resolve(&g));
        if let Formula::Forall(b, body) = &g {
            let e = self.fresh_tvar(b);
            let d = self.coerce_var(x, t, subst_type(body, b, &Formula::Var(e.clone())))?;
            return Ok(Derivation::forall_r(&e, d));
        }
        if let Formula::Forall(a, body) = &t {
            let w = self.meta();
            let d = self.coerce_var(x, subst_type(body, a, &w), g)?;
            return Ok(Derivation::forall_l(x, t.clone(), w, d));
        }
        let (t, g) = (self.zonk(&t), self.zonk(&g));
        let msg = format!("{} : {t} does not fit {g}", self.origin.get(x).map_or(x, String::as_str));
        // Metas are only solved monomorphically; with a ∀ in play the
        // mismatch may come from the order of elaboration.
        let open = |f: &Formula| f.free_vars().iter().any(|v| is_meta(v));
        if (open(&t) || open(&g)) && (has_forall(&t) || has_forall(&g)) {
            Err(CheckError::NeedsAnnotation(msg))
        } else {
            Err(CheckError::Rejected(msg))
        }
    }

    fn apply(&mut self, f: Derivation, result: Formula, arg: Derivation) -> Derivation {
        let x = self.fresh("f");
        let y = self.fresh("y");
        let inner = Derivation::lolli_l(&x, &y, arg, Derivation::ax(&y, result));
        Derivation::cut(&x, f, inner)
    }

    fn synth(&mut self, m: &Term) -> Result<(Derivation, Formula), CheckError> {
        match m {
            Term::Var(x) => {
                if let Some(r) = self.constant(x)? {
                    return Ok(r);
                }
                let t = self.var_type(x)?;
                Ok((Derivation::ax(x, t.clone()), t))
            }
            Term::App(..) => {
                let (head, args) = spine(m);
                if let Term::Var(_) = head {
                    let (mut d, mut t) = self.synth(head)?;
                    for a in args {
                        let (pa, pr) = (self.meta(), self.meta());
                        d = self.coerce(d, t, Formula::lolli(pa.clone(), pr.clone()))?;
                        let da = self.check(a, pa)?;
                        d = self.apply(d, pr.clone(), da);
                        t = pr;
                    }
                    Ok((d, t))
                } else {
                    // A redex: arguments first, so their types reach the binders.
                    let mut ds = Vec::new();
                    for a in &args {
                        ds.push(self.synth(a)?);
                    }
                    let r = self.meta();
                    let mut rests = vec![r.clone()];
                    for (_, ta) in ds.iter().rev() {
                        let next = Formula::lolli(ta.clone(), rests.last().unwrap().clone());
                        rests.push(next);
                    }
                    let fty = rests.pop().unwrap();
                    let mut d = self.check(head, fty)?;
                    for (da, _) in ds {
                        let rest = rests.pop().unwrap();
                        d = self.apply(d, rest, da);
                    }
                    Ok((d, r))
                }
            }
            _ => {
                let g = self.meta();
                let d = self.check(m, g.clone())?;
                Ok((d, g))
            }
        }
    }

    fn bind_pattern(
        &mut self,
        p: &Pattern,
        a: Formula,
        out: &mut Vec<(String, Formula)>,
    ) -> Result<(), CheckError> {
        match p {
            Pattern::Var(x) => {
                out.push((x.clone(), a));
                Ok(())
            }
            Pattern::Tensor(p1, p2) => {
                let (t1, t2) = (self.meta(), self.meta());
                if !self.try_unify(&a, &Formula::tensor(t1.clone(), t2.clone())) {
                    return Err(self.mismatch(&format!("pattern {p}"), &a));
                }
                self.bind_pattern(p1, t1, out)?;
                self.bind_pattern(p2, t2, out)
            }
        }
    }

    fn check_lam(&mut self, p: &Pattern, body: &Term, g: Formula) -> Result<Derivation, CheckError> {
        let (a, b) = (self.meta(), self.meta());
        if !self.try_unify(&g, &Formula::lolli(a.clone(), b.clone())) {
            return Err(self.mismatch(&format!("an abstraction over {p}"), &g));
        }
        let mut binds = Vec::new();
        self.bind_pattern(p, a, &mut binds)?;
        for (v, t) in &binds {
            for o in self.occs.get(v).cloned().unwrap_or_default() {
                self.vars.insert(o, (t.clone(), self.level));
            }
        }
        let mut d = self.check(body, b)?;
        for (v, t) in &binds {
            d = self.close_binder(v, t, d, true)?;
        }
        d = fold_pattern(p, d);
        Ok(Derivation::lolli_r(p, d))
    }

    /// Contracts every remaining occurrence of `v` into `v`, or weakens `v`.
    fn close_binder(
        &mut self,
        v: &str,
        t: &Formula,
        d: Derivation,
        weaken: bool,
    ) -> Result<Derivation, CheckError> {
        let present: Vec<String> = self
            .occs
            .get(v)
            .cloned()
            .unwrap_or_default()
            .into_iter()
            .filter(|o| d.conclusion.context.iter().any(|(p, _)| *p == pvar(o)))
            .collect();
        if present.is_empty() {
            return Ok(if weaken { Derivation::weak(v, t.clone(), d) } else { d });
        }
        if present[0] != v {
            return Err(CheckError::NeedsAnnotation(format!("occurrences of {v} could not be merged")));
        }
        if present.len() > 1 {
            let c = self.meta();
            if !self.try_unify(t, &Formula::bang(c)) {
                return Err(CheckError::Rejected(format!(
                    "{v} is used {} times but its type {} is not !-prefixed",
                    present.len(),
                    self.zonk(t)
                )));
            }
        }
        let mut d = d;
        for o in &present[1..] {
            d = Derivation::contr(v, o, v, d);
        }
        Ok(d)
    }

    fn abstract_doors(&mut self, t: &Term, r: usize, doors: &mut Vec<Door>) -> Term {
        let rec =
            |s: &mut Self, x: &Term, r: usize, doors: &mut Vec<Door>| Box::new(s.abstract_doors(x, r, doors));
        match t {
            Term::Var(_) => t.clone(),
            Term::Lam(p, b) => Term::Lam(p.clone(), rec(self, b, r, doors)),
            Term::App(a, b) => Term::App(rec(self, a, r, doors), rec(self, b, r, doors)),
            Term::Tensor(a, b) => Term::Tensor(rec(self, a, r, doors), rec(self, b, r, doors)),
            Term::BangBox(a) => Term::BangBox(rec(self, a, r + 1, doors)),
            Term::ParBox(a) => Term::ParBox(rec(self, a, r + 1, doors)),
            Term::BangDoor(a) | Term::ParDoor(a) => {
                let mark = if matches!(t, Term::BangDoor(_)) { Mark::Bang } else { Mark::Par };
                if r > 0 {
                    let inner = rec(self, a, r - 1, doors);
                    return match mark {
                        Mark::Bang => Term::BangDoor(inner),
                        Mark::Par => Term::ParDoor(inner),
                    };
                }
                match &**a {
                    Term::Var(o) if self.vars.contains_key(o) => {
                        doors.push(Door { mark, var: o.clone(), complex: None });
                        Term::Var(o.clone())
                    }
                    other => {
                        let v = self.fresh("d");
                        doors.push(Door { mark, var: v.clone(), complex: Some(other.clone()) });
                        Term::Var(v)
                    }
                }
            }
        }
    }

    fn check_box(&mut self, m: &Term, g: Formula) -> Result<Derivation, CheckError> {
        let (kind, inner) = match m {
            Term::BangBox(i) => (Mark::Bang, &**i),
            Term::ParBox(i) => (Mark::Par, &**i),
            _ => unreachable!("check_box on a non-box"),
        };
        let b = self.meta();
        if !self.try_unify(&g, &modal(kind, b.clone())) {
            return Err(self.mismatch(&format!("box {m}"), &g));
        }
        let mut doors = Vec::new();
        let body = self.abstract_doors(inner, 0, &mut doors);
        // Groups of door variables that share one assumption inside the box.
        let mut groups: Vec<(Mark, Vec<String>, Option<Term>)> = Vec::new();
        for dr in doors {
            if kind == Mark::Bang && dr.mark == Mark::Par {
                return Err(CheckError::Rejected(format!("a $-door inside the !-box {m}")));
            }
            let shared = dr.complex.is_none() && (dr.mark == Mark::Par || kind == Mark::Bang);
            let key = self.origin.get(&dr.var).cloned();
            let slot = groups.iter_mut().find(|(mk, members, c)| {
                shared && c.is_none() && *mk == dr.mark && self.origin.get(&members[0]) == key.as_ref()
            });
            match slot {
                Some((_, members, _)) => members.push(dr.var),
                None => groups.push((dr.mark, vec![dr.var], dr.complex)),
            }
        }
        if kind == Mark::Bang && groups.len() > 1 {
            return Err(CheckError::Rejected(format!("the !-box {m} has {} doors", groups.len())));
        }
        let mut inner_types = Vec::new();
        let mut complex_ds = Vec::new();
        for (mark, members, complex) in &groups {
            let a = self.meta();
            match complex {
                None => {
                    let t = self.var_type(&members[0])?;
                    if !self.try_unify(&t, &modal(*mark, a.clone())) {
                        return Err(self.mismatch(
                            &format!(
                                "a {}-door on {}",
                                if *mark == Mark::Bang { "!" } else { "$" },
                                self.origin[&members[0]]
                            ),
                            &t,
                        ));
                    }
                }
                Some(n) => {
                    let dn = self.check(n, modal(*mark, a.clone()))?;
                    complex_ds.push((members[0].clone(), dn));
                }
            }
            inner_types.push(a);
        }
        self.level += 1;
        for ((_, members, _), a) in groups.iter().zip(&inner_types) {
            for o in members {
                self.vars.insert(o.clone(), (a.clone(), self.level));
            }
        }
        let d = self.check(&body, b);
        self.level -= 1;
        let mut d = d?;
        for ((_, members, _), a) in groups.iter().zip(&inner_types) {
            if members.len() > 1 {
                let c = self.meta();
                if !self.try_unify(a, &Formula::bang(c)) {
                    return Err(CheckError::Rejected(format!(
                        "{} enters a box once and is used {} times inside at a type that is not !-prefixed",
                        self.origin[&members[0]],
                        members.len()
                    )));
                }
                for o in &members[1..] {
                    d = Derivation::contr(&members[0], o, &members[0], d);
                }
            }
        }
        let mut d = match kind {
            Mark::Bang => Derivation::bang_intro(d),
            Mark::Par => {
                Derivation::par_intro(groups.iter().map(|(mk, ms, _)| (ms[0].clone(), *mk)).collect(), d)
            }
        };
        for (v, dn) in complex_ds {
            d = Derivation::cut(&v, dn, d);
        }
        Ok(d)
    }

    /// Substitutes solved metas; unsolved ones become fresh type variables.
    fn finish(&mut self, mut d: Derivation) -> Derivation {
        let mut open = BTreeSet::new();
        d.visit_formulas_mut(&mut |f| {
            *f = self.zonk(f);
            open.extend(f.free_vars().into_iter().filter(|v| is_meta(v)));
        });
        if !open.is_empty() {
            for m in open {
                let v = self.fresh_tvar("u");
                self.subst.insert(m, Formula::Var(v));
            }
            d.visit_formulas_mut(&mut |f| *f = self.zonk(f));
        }
        d
    }
}

fn has_forall(f: &Formula) -> bool {
    match f {
        Formula::Var(_) => false,
        Formula::Lolli(a, b) | Formula::Tensor(a, b) => has_forall(a) || has_forall(b),
        Formula::Bang(a) | Formula::Par(a) => has_forall(a),
        Formula::Forall(..) => true,
    }
}

fn rename_pattern(p: &Pattern, r: &BTreeMap<String, String>) -> Pattern {
    match p {
        Pattern::Var(x) => Pattern::Var(r.get(x).cloned().unwrap_or_else(|| x.clone())),
        Pattern::Tensor(a, b) => Pattern::tensor(rename_pattern(a, r), rename_pattern(b, r)),
    }
}

fn fold_pattern(p: &Pattern, d: Derivation) -> Derivation {
    match p {
        Pattern::Var(_) => d,
        Pattern::Tensor(p1, p2) => {
            let d = fold_pattern(p1, d);
            let d = fold_pattern(p2, d);
            Derivation::tensor_l(p1, p2, d)
        }
    }
}

/// Closed definitions of `env`, expanded, for folding.
fn hints(env: &TypeEnv) -> Vec<(usize, String, Term)> {
    env.defs
        .keys()
        .filter(|k| env.types.contains_key(*k))
        .map(|k| (env.expand(&Term::Var(k.clone())), k))
        .filter(|(t, _)| free_vars(t).is_empty() && !matches!(t, Term::Var(_)))
        .map(|(t, k)| (t.size(), k.clone(), t))
        .collect()
}

/// Tries folded and unfolded subjects under both instantiation policies and
/// reports the first failure if none succeeds.
fn elaborate(m: &Term, target: Option<Formula>, env: &TypeEnv) -> Result<Derivation, CheckError> {
    let mut first = None;
    for (fold, eager) in [(true, true), (true, false), (false, true), (false, false)] {
        if fold && env.defs.is_empty() {
            continue;
        }
        match elaborate_with(m, target.clone(), env, eager, fold) {
            Ok(d) => return Ok(d),
            Err(e) => {
                first.get_or_insert(e);
            }
        }
    }
    Err(first.expect("at least one attempt runs"))
}

fn elaborate_with(
    m: &Term,
    target: Option<Formula>,
    env: &TypeEnv,
    eager: bool,
    fold: bool,
) -> Result<Derivation, CheckError> {
    let mut e = Elab::new(env, eager, fold);
    if let Some(t) = &target {
        all_type_names(t, &mut e.tvars);
    }
    let m = &e.fold(m, true);
    let lin = e.start(m);
    let mut free: Vec<(String, Formula)> = Vec::new();
    for c in free_vars(m) {
        match env.types.get(&c) {
            Some(_) if env.defs.contains_key(&c) => {}
            Some(t) => {
                for o in e.occs.get(&c).cloned().unwrap_or_default() {
                    e.vars.insert(o, (t.clone(), 0));
                }
                free.push((c, t.clone()));
            }
            None => return Err(CheckError::IllScoped(format!("{c} has no declared type"))),
        }
    }
    let goal = match target {
        Some(t) => t,
        None => e.meta(),
    };
    let mut d = e.check(&lin, goal)?;
    for (c, t) in &free {
        d = e.close_binder(c, t, d, false)?;
    }
    let d = e.finish(d);
    let violations = check_derivation(&d);
    if let Some(v) = violations.first() {
        return Err(match v.kind {
            ViolationKind::EigenvariableViolation(_) => {
                CheckError::NeedsAnnotation(format!("the inferred instantiations violate {v}"))
            }
            _ => CheckError::Rejected(format!("elaboration produced an invalid derivation: {v}")),
        });
    }
    if !alpha_eq(&d.conclusion.subject, &env.expand(m)) {
        return Err(CheckError::Rejected("elaboration changed the subject".into()));
    }
    Ok(d)
}

/// Builds a derivation of `Γ ⊢ m : target`, where `Γ` holds the declared
/// types of the free constants of `m` that have no definition.
pub fn check_term(m: &Term, target: &Formula, env: &TypeEnv) -> Result<Derivation, CheckError> {
    elaborate(m, Some(target.clone()), env)
}

/// Like [`check_term`] with the type left open; unsolved parts of the type
/// become fresh type variables.
pub fn synth_term(m: &Term, env: &TypeEnv) -> Result<Derivation, CheckError> {
    elaborate(m, None, env)
}

// ---------------------------------------------------------------------------
// Script format

fn write_rule(r: &Rule) -> String {
    match r {
        Rule::Cut { var } | Rule::Weak { var } => format!("{}({var})", r.name()),
        Rule::Contr { x, y, z } => format!("Contr({x}, {y}, {z})"),
        Rule::LolliL { x, y } => format!("LolliL({x}, {y})"),
        Rule::ParIntro { marks } => {
            let ms: Vec<String> = marks
                .iter()
                .map(|(x, m)| format!("{x} {}", if *m == Mark::Bang { "!" } else { "$" }))
                .collect();
            format!("ParIntro({})", ms.join(", "))
        }
        Rule::ForallL { var, witness } => format!("ForallL({var}, {witness})"),
        Rule::ForallR { eigen } => format!("ForallR({eigen})"),
        other => other.name().to_string(),
    }
}

/// One line per rule instance, premises indented two spaces below their
/// conclusion: `Rule(args) P : A, … |- M : B`.
pub fn print_derivation(d: &Derivation) -> String {
    fn go(d: &Derivation, depth: usize, out: &mut String) {
        let ctx: Vec<String> = d.conclusion.context.iter().map(|(p, a)| format!("{p} : {a}")).collect();
        let sep = if ctx.is_empty() { "" } else { " " };
        out.push_str(&format!(
            "{}{}{sep}{} |- {} : {}\n",
            "  ".repeat(depth),
            write_rule(&d.rule),
            ctx.join(", "),
            d.conclusion.subject,
            d.conclusion.formula
        ));
        for p in &d.premises {
            go(p, depth + 1, out);
        }
    }
    let mut out = String::new();
    go(d, 0, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("line {line}: {err}")]
    Syntax { line: usize, err: SyntaxError },
    #[error("empty derivation script")]
    Empty,
}

fn parse_line(text: &str, line: usize) -> Result<(Rule, Judgement), ScriptError> {
    let bad = |msg: String| ScriptError::Line { line, msg };
    let syn = |err: SyntaxError| ScriptError::Syntax { line, err };
    let (head, tail) = text.split_once("|-").ok_or_else(|| bad("missing `|-`".into()))?;
    let mut cur = Cursor::new(head).map_err(syn)?;
    let name = cur.ident().map_err(syn)?;
    let has_args = *cur.peek() == Tok::LParen;
    let idents = |cur: &mut Cursor, n: usize| -> Result<Vec<String>, SyntaxError> {
        let mut out = Vec::new();
        for i in 0..n {
            if i > 0 {
                cur.expect(&Tok::Comma)?;
            }
            out.push(cur.ident()?);
        }
        Ok(out)
    };
    if has_args {
        cur.bump();
    }
    let rule = match (name.as_str(), has_args) {
        ("Ax", false) => Rule::Ax,
        ("LolliR", false) => Rule::LolliR,
        ("TensorL", false) => Rule::TensorL,
        ("TensorR", false) => Rule::TensorR,
        ("BangIntro", false) => Rule::BangIntro,
        ("Cut", true) => Rule::Cut { var: idents(&mut cur, 1).map_err(syn)?.remove(0) },
        ("Weak", true) => Rule::Weak { var: idents(&mut cur, 1).map_err(syn)?.remove(0) },
        ("Contr", true) => {
            let v = idents(&mut cur, 3).map_err(syn)?;
            Rule::Contr { x: v[0].clone(), y: v[1].clone(), z: v[2].clone() }
        }
        ("LolliL", true) => {
            let v = idents(&mut cur, 2).map_err(syn)?;
            Rule::LolliL { x: v[0].clone(), y: v[1].clone() }
        }
        ("ForallR", true) => Rule::ForallR { eigen: idents(&mut cur, 1).map_err(syn)?.remove(0) },
        ("ForallL", true) => {
            let var = cur.ident().map_err(syn)?;
            cur.expect(&Tok::Comma).map_err(syn)?;
            let witness = parse_formula_at(&mut cur).map_err(syn)?;
            Rule::ForallL { var, witness }
        }
        ("ParIntro", true) => {
            let mut marks = Vec::new();
            while *cur.peek() != Tok::RParen {
                if !marks.is_empty() {
                    cur.expect(&Tok::Comma).map_err(syn)?;
                }
                let x = cur.ident().map_err(syn)?;
                let m = match cur.bump() {
                    Tok::Bang => Mark::Bang,
                    Tok::Dollar => Mark::Par,
                    other => return Err(bad(format!("expected `!` or `$`, found {other}"))),
                };
                marks.push((x, m));
            }
            Rule::ParIntro { marks }
        }
        ("ParIntro", false) => Rule::ParIntro { marks: vec![] },
        (other, _) => return Err(bad(format!("unknown rule or arguments for `{other}`"))),
    };
    if has_args {
        cur.expect(&Tok::RParen).map_err(syn)?;
    }
    let mut context = Vec::new();
    while !cur.at_eof() {
        if !context.is_empty() {
            cur.expect(&Tok::Comma).map_err(syn)?;
        }
        let p = parse_pattern_at(&mut cur).map_err(syn)?;
        cur.expect(&Tok::Colon).map_err(syn)?;
        context.push((p, parse_formula_at(&mut cur).map_err(syn)?));
    }
    let mut cur = Cursor::new(tail).map_err(syn)?;
    let subject = parse_term_at(&mut cur).map_err(syn)?;
    cur.expect(&Tok::Colon).map_err(syn)?;
    let formula = parse_formula_at(&mut cur).map_err(syn)?;
    cur.finish().map_err(syn)?;
    Ok((rule, Judgement { context, subject, formula }))
}

/// Reads the format written by [`print_derivation`]. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_derivation(src: &str) -> Result<Derivation, ScriptError> {
    let mut stack: Vec<(usize, Derivation)> = Vec::new();
    let mut root: Option<Derivation> = None;
    let attach = |stack: &mut Vec<(usize, Derivation)>, root: &mut Option<Derivation>, depth: usize| {
        while let Some((dp, _)) = stack.last() {
            if *dp < depth {
                break;
            }
            let (_, d) = stack.pop().unwrap();
            match stack.last_mut() {
                Some((_, parent)) => parent.premises.push(d),
                None => *root = Some(d),
            }
        }
    };
    for (i, raw) in src.lines().enumerate() {
        let t = raw.trim_end();
        if t.trim().is_empty() || t.trim_start().starts_with('#') {
            continue;
        }
        let spaces = t.len() - t.trim_start().len();
        if spaces % 2 != 0 {
            return Err(ScriptError::Line {
                line: i + 1,
                msg: "indentation must be a multiple of two".into(),
            });
        }
        let depth = spaces / 2;
        attach(&mut stack, &mut root, depth);
        if depth != stack.len() || (depth == 0 && root.is_some()) {
            return Err(ScriptError::Line { line: i + 1, msg: "indentation does not match the tree".into() });
        }
        let (rule, conclusion) = parse_line(t.trim_start(), i + 1)?;
        stack.push((depth, Derivation { rule, premises: vec![], conclusion }));
    }
    attach(&mut stack, &mut root, 0);
    root.ok_or(ScriptError::Empty)
}

// ---------------------------------------------------------------------------
// Nets of derivations

/// A net under construction: the conclusion's producer and, per
/// assumption, the port still waiting for its wire.
struct Frag {
    root: (End, Formula),
    inputs: Vec<(Pattern, End, Formula)>,
}

impl Frag {
    fn take(&mut self, p: &Pattern) -> (End, Formula) {
        let i = self
            .inputs
            .iter()
            .position(|(q, _, _)| q == p)
            .unwrap_or_else(|| panic!("no pending assumption {p}"));
        let (_, e, f) = self.inputs.remove(i);
        (e, f)
    }
}

fn build(net: &mut Net, ids: &mut Ids, d: &Derivation) -> Frag {
    let c = &d.conclusion;
    let port = |n, p| End::Port(n, p);
    match &d.rule {
        Rule::Ax => {
            let ax = net.add_node(ids, NodeKind::Ax);
            let (p, a) = c.context[0].clone();
            Frag { root: (port(ax, 1), a.clone()), inputs: vec![(p, port(ax, 0), a)] }
        }
        Rule::Cut { var } => {
            let left = build(net, ids, &d.premises[0]);
            let mut right = build(net, ids, &d.premises[1]);
            let (dst, a) = right.take(&pvar(var));
            net.connect(ids, left.root.0, dst, Some(a));
            let mut inputs = left.inputs;
            inputs.extend(right.inputs);
            Frag { root: right.root, inputs }
        }
        Rule::Weak { var } => {
            let mut f = build(net, ids, &d.premises[0]);
            let w = net.add_node(ids, NodeKind::Weak);
            let a = c.context.iter().find(|(p, _)| *p == pvar(var)).unwrap().1.clone();
            f.inputs.push((pvar(var), port(w, 0), a));
            f
        }
        Rule::Contr { x, y, z } => {
            let mut f = build(net, ids, &d.premises[0]);
            let k = net.add_node(ids, NodeKind::Contraction);
            let (dx, a) = f.take(&pvar(x));
            let (dy, b) = f.take(&pvar(y));
            net.connect(ids, port(k, 1), dx, Some(a.clone()));
            net.connect(ids, port(k, 2), dy, Some(b));
            f.inputs.push((pvar(z), port(k, 0), a));
            f
        }
        Rule::LolliL { x, y } => {
            let left = build(net, ids, &d.premises[0]);
            let mut right = build(net, ids, &d.premises[1]);
            let ll = net.add_node(ids, NodeKind::LolliL);
            let a = left.root.1.clone();
            net.connect(ids, left.root.0, port(ll, 1), Some(a.clone()));
            let (dy, b) = right.take(&pvar(y));
            net.connect(ids, port(ll, 2), dy, Some(b.clone()));
            let mut inputs = left.inputs;
            inputs.extend(right.inputs);
            inputs.push((pvar(x), port(ll, 0), Formula::lolli(a, b)));
            Frag { root: right.root, inputs }
        }
        Rule::LolliR => {
            let mut f = build(net, ids, &d.premises[0]);
            let Term::Lam(p, _) = &c.subject else { panic!("LolliR without an abstraction") };
            let lr = net.add_node(ids, NodeKind::LolliR);
            let (dp, b) = f.take(p);
            net.connect(ids, port(lr, 2), dp, Some(b.clone()));
            let body = f.root.1.clone();
            net.connect(ids, f.root.0, port(lr, 1), Some(body.clone()));
            Frag { root: (port(lr, 0), Formula::lolli(b, body)), inputs: f.inputs }
        }
        Rule::TensorL => {
            let mut f = build(net, ids, &d.premises[0]);
            let prem = &d.premises[0].conclusion.context;
            let (p, a) = c
                .context
                .iter()
                .find(|(q, _)| !prem.iter().any(|(r, _)| r == q))
                .cloned()
                .expect("TensorL introduces a pattern");
            let Pattern::Tensor(p1, p2) = &p else { panic!("TensorL on a variable") };
            let tl = net.add_node(ids, NodeKind::TensorL);
            let (d1, b1) = f.take(p1);
            let (d2, b2) = f.take(p2);
            net.connect(ids, port(tl, 1), d1, Some(b1));
            net.connect(ids, port(tl, 2), d2, Some(b2));
            f.inputs.push((p, port(tl, 0), a));
            f
        }
        Rule::TensorR => {
            let left = build(net, ids, &d.premises[0]);
            let right = build(net, ids, &d.premises[1]);
            let tr = net.add_node(ids, NodeKind::TensorR);
            net.connect(ids, left.root.0, port(tr, 1), Some(left.root.1.clone()));
            net.connect(ids, right.root.0, port(tr, 2), Some(right.root.1.clone()));
            let mut inputs = left.inputs;
            inputs.extend(right.inputs);
            Frag { root: (port(tr, 0), Formula::tensor(left.root.1, right.root.1)), inputs }
        }
        Rule::BangIntro | Rule::ParIntro { .. } => {
            let mut inner = Net::empty();
            let f = build(&mut inner, ids, &d.premises[0]);
            let mut marks = Vec::new();
            let mut outer_inputs = Vec::new();
            for (p, dst, a) in &f.inputs {
                let l = inner.connect(ids, End::Input, *dst, Some(a.clone()));
                inner.inputs.push(l);
                let m = match &d.rule {
                    Rule::ParIntro { marks } => {
                        marks.iter().find(|(x, _)| pvar(x) == *p).map_or(Mark::Bang, |(_, m)| *m)
                    }
                    _ => Mark::Bang,
                };
                marks.push(m);
                outer_inputs.push((p.clone(), modal(m, a.clone())));
            }
            inner.connect(ids, f.root.0, End::Root, Some(f.root.1.clone()));
            let (kind, mark) = match d.rule {
                Rule::BangIntro => (NodeKind::BangBox(Box::new(inner)), Mark::Bang),
                _ => (NodeKind::ParBox(Box::new(inner), marks), Mark::Par),
            };
            let bx = net.add_node(ids, kind);
            Frag {
                root: (port(bx, 0), modal(mark, f.root.1)),
                inputs: outer_inputs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (p, a))| (p, port(bx, i as u8 + 1), a))
                    .collect(),
            }
        }
        Rule::ForallL { var, witness } => {
            let mut f = build(net, ids, &d.premises[0]);
            let fl = net.add_node(ids, NodeKind::ForallL { witness: witness.clone() });
            let (dx, a) = f.take(&pvar(var));
            net.connect(ids, port(fl, 1), dx, Some(a));
            let q = c.context.iter().find(|(p, _)| *p == pvar(var)).unwrap().1.clone();
            f.inputs.push((pvar(var), port(fl, 0), q));
            f
        }
        Rule::ForallR { eigen } => {
            let first = ids.0;
            let f = build(net, ids, &d.premises[0]);
            let fr = net.add_node(ids, NodeKind::ForallR { var: eigen.clone(), dashed: BTreeSet::new() });
            net.connect(ids, f.root.0, port(fr, 1), Some(f.root.1.clone()));
            let dashed: BTreeSet<LinkId> = (first..ids.0)
                .filter(|l| {
                    net.links
                        .get(l)
                        .or_else(|| net.find_link(*l))
                        .and_then(|k| k.label.as_ref())
                        .is_some_and(|a| a.occurs_free(eigen))
                })
                .collect();
            if let NodeKind::ForallR { dashed: ds, .. } = &mut net.nodes.get_mut(&fr).unwrap().kind {
                *ds = dashed;
            }
            Frag { root: (port(fr, 0), Formula::forall(eigen, f.root.1)), inputs: f.inputs }
        }
    }
}

/// The labelled net of a derivation; inputs follow the conclusion's context
/// order. ∀ rules become ∀ nodes whose dashed sets hold every link created
/// above them whose label mentions the eigenvariable.
pub fn derivation_to_net(d: &Derivation) -> Net {
    let mut ids = Ids(0);
    let mut net = Net::empty();
    let f = build(&mut net, &mut ids, d);
    for (_, dst, a) in &f.inputs {
        let l = net.connect(&mut ids, End::Input, *dst, Some(a.clone()));
        net.inputs.push(l);
    }
    net.connect(&mut ids, f.root.0, End::Root, Some(f.root.1));
    net.ids = ids;
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutelim::{normalize_outermost, RedexKind};
    use crate::formula::parse_formula;
    use crate::lal::PRELUDE;
    use crate::net::canonical_form;
    use crate::stdlib;
    use crate::term::parse_term;

    fn prelude_env() -> TypeEnv {
        TypeEnv::from_program(&Program::parse(PRELUDE).unwrap())
    }

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    /// `⊢ 0̄ : Int` by hand.
    fn zero_by_hand() -> Derivation {
        let a = f("a");
        let aa = f("a -o a");
        let body = Derivation::lolli_r(&pvar("y"), Derivation::ax("y", a));
        let boxed = Derivation::par_intro(vec![], body);
        let weak = Derivation::weak("x", Formula::bang(aa), boxed);
        Derivation::forall_r("a", Derivation::lolli_r(&pvar("x"), weak))
    }

    #[test]
    fn hand_built_zero_checks() {
        let d = zero_by_hand();
        assert_eq!(check_derivation(&d), vec![]);
        assert!(alpha_eq(&d.conclusion.subject, &stdlib::numeral(0)));
        assert!(alpha_eq_formula(&d.conclusion.formula, &stdlib::int()));
    }

    #[test]
    fn bang_with_two_assumptions() {
        let inner = Derivation::tensor_r(Derivation::ax("x", f("a")), Derivation::ax("y", f("b")));
        let d = Derivation::bang_intro(inner);
        let v = check_derivation(&d);
        assert!(v.iter().any(|v| v.kind == ViolationKind::BangArity(2)), "{v:?}");
    }

    #[test]
    fn eigenvariable_free_in_context() {
        let d = Derivation::forall_r("a", Derivation::ax("x", f("a")));
        let v = check_derivation(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::EigenvariableViolation("a".into()));
        assert_eq!(v[0].path, Vec::<usize>::new());
    }

    #[test]
    fn tampered_subject_is_reported() {
        let mut d = zero_by_hand();
        d.premises[0].conclusion.subject = t("\\x. $(\\z. \\w. z)");
        assert!(!check_derivation(&d).is_empty());
        let mut d = zero_by_hand();
        d.premises[0].premises[0].conclusion.context[0].1 = f("!(b -o b)");
        assert!(!check_derivation(&d).is_empty());
    }

    #[test]
    fn arithmetic_combinators_check() {
        for d in stdlib::corpus() {
            let r = check_term(&d.term, &d.ty, &TypeEnv::new());
            if ["mult", "coerc"].contains(&d.name) {
                // An argument is instantiated at Int, which needs the
                // definitions it is built from to fold back to names.
                assert!(matches!(r, Err(CheckError::NeedsAnnotation(_))), "{r:?}");
                let full = prelude_env();
                let mut env = TypeEnv::new();
                for c in ["zero", "succ", "sum", "iter"] {
                    env.define(c, full.defs[c].clone(), full.types[c].clone());
                }
                let der = check_term(&d.term, &d.ty, &env).unwrap_or_else(|e| panic!("{}: {e}", d.name));
                assert!(alpha_eq(&der.conclusion.subject, &d.term));
                continue;
            }
            let der = r.unwrap_or_else(|e| panic!("{}: {e}", d.name));
            assert_eq!(check_derivation(&der), vec![], "{}", d.name);
            assert!(alpha_eq(&der.conclusion.subject, &d.term));
        }
    }

    #[test]
    fn prelude_definitions_check_at_declared_types() {
        let p = Program::parse(PRELUDE).unwrap();
        let env = TypeEnv::from_program(&p);
        for (name, ty) in p.types() {
            let raw = p.raw(name).unwrap();
            let d = check_term(raw, ty, &env).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(alpha_eq(&d.conclusion.subject, p.get(name).unwrap()), "{name}");
        }
    }

    #[test]
    fn iteration_on_a_numeral_is_rejected() {
        let env = prelude_env();
        let m = t("iter two !two $zero");
        let r = check_term(&m, &Formula::par(stdlib::int()), &env);
        assert!(matches!(r, Err(CheckError::Rejected(_))), "{r:?}");
        let ok = check_term(&t("iter two !succ $zero"), &Formula::par(stdlib::int()), &env);
        assert!(ok.is_ok(), "{ok:?}");
    }

    #[test]
    fn scoping_errors() {
        let env = TypeEnv::new();
        assert!(matches!(check_term(&t("x"), &f("a"), &env), Err(CheckError::IllScoped(_))));
        let r = check_term(&t("\\x. $x"), &f("!a -o $!a"), &env);
        assert!(matches!(r, Err(CheckError::Rejected(_))), "{r:?}");
        let r = check_term(&t("\\x. x x"), &f("a -o a"), &env);
        assert!(matches!(r, Err(CheckError::Rejected(_))), "{r:?}");
        let r = check_term(&t("\\x y. !(~!x ~!y)"), &f("!(a -o a) -o !a -o !a"), &env);
        assert!(matches!(r, Err(CheckError::Rejected(_))), "{r:?}");
    }

    #[test]
    fn deep_contraction_through_par_doors() {
        // §(K §̄z §̄z) with the contraction inside the box.
        let env = TypeEnv::new();
        let m = t("\\z. $((\\a b. a) ~$z ~$z)");
        let d = check_term(&m, &f("$!a -o $!a"), &env).unwrap();
        assert_eq!(check_derivation(&d), vec![]);
    }

    #[test]
    fn free_constants_become_assumptions() {
        let mut env = TypeEnv::new();
        env.declare("g", f("!(a -o a)"));
        let d = check_term(&t("$(~!g (~!g ~$y))"), &f("$a"), &{
            let mut e = env.clone();
            e.declare("y", f("$a"));
            e
        })
        .unwrap();
        let names: BTreeSet<String> = d.conclusion.context.iter().flat_map(|(p, _)| p.vars()).collect();
        assert_eq!(names, ["g", "y"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn script_round_trip() {
        let env = prelude_env();
        for name in ["succ", "pred", "mult"] {
            let p = Program::parse(PRELUDE).unwrap();
            let d = check_term(p.raw(name).unwrap(), p.declared_type(name).unwrap(), &env).unwrap();
            let text = print_derivation(&d);
            let back = parse_derivation(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(check_derivation(&back), vec![]);
            assert_eq!(print_derivation(&back), text);
        }
        assert!(parse_derivation("Ax x : a |- x : a\nAx").is_err());
        assert_eq!(parse_derivation("# nothing\n"), Err(ScriptError::Empty));
    }

    #[test]
    fn synthesized_type() {
        let d = synth_term(&stdlib::numeral(2), &TypeEnv::new()).unwrap();
        assert!(matches!(d.conclusion.formula, Formula::Lolli(..)));
    }

    #[test]
    fn derivation_nets_reduce_with_forall_steps() {
        let env = prelude_env();
        let d = check_term(&t("succ one"), &stdlib::int(), &env).unwrap();
        let n = derivation_to_net(&d);
        assert_eq!(n.validate(), vec![]);
        let out = normalize_outermost(&n, 100_000).unwrap();
        assert!(out.trace.iter().any(|s| s.kind == RedexKind::ForallAnnih));
        assert_eq!(out.net.validate(), vec![]);
        let two = derivation_to_net(&check_term(&stdlib::numeral(2), &stdlib::int(), &env).unwrap());
        let two = normalize_outermost(&two, 1000).unwrap().net;
        assert_eq!(canonical_form(&out.net), canonical_form(&two));
    }
}

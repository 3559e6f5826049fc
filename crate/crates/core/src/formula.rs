//! ILAL formulas: `α`, `A ⊸ B`, `A ⊗ B`, `!A`, `§A` and `∀α.A`.
//!
//! ASCII syntax: `-o` (right associative), `*` (right associative, tighter
//! than `-o`), prefix `!` and `$` (tightest), `forall a. A`.

use std::collections::BTreeSet;
use std::fmt;

use crate::syntax::{Cursor, SyntaxError, Tok};

/// A type variable name; never empty.
pub type TypeVar = String;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Var(TypeVar),
    Lolli(Box<Formula>, Box<Formula>),
    Tensor(Box<Formula>, Box<Formula>),
    Bang(Box<Formula>),
    /// The `§` modality.
    Par(Box<Formula>),
    Forall(TypeVar, Box<Formula>),
}

use Formula::*;

impl Formula {
    pub fn var(name: &str) -> Formula {
        Var(name.to_string())
    }

    pub fn lolli(a: Formula, b: Formula) -> Formula {
        Lolli(Box::new(a), Box::new(b))
    }

    pub fn tensor(a: Formula, b: Formula) -> Formula {
        Tensor(Box::new(a), Box::new(b))
    }

    pub fn bang(a: Formula) -> Formula {
        Bang(Box::new(a))
    }

    pub fn par(a: Formula) -> Formula {
        Par(Box::new(a))
    }

    pub fn forall(v: &str, a: Formula) -> Formula {
        Forall(v.to_string(), Box::new(a))
    }

    /// `§ⁿA`.
    pub fn par_n(n: usize, mut a: Formula) -> Formula {
        for _ in 0..n {
            a = Formula::par(a);
        }
        a
    }

    /// `!ⁿA`.
    pub fn bang_n(n: usize, mut a: Formula) -> Formula {
        for _ in 0..n {
            a = Formula::bang(a);
        }
        a
    }

    /// Right-nested tensor of a nonempty list.
    pub fn tensor_all(mut items: Vec<Formula>) -> Formula {
        let mut acc = items.pop().expect("tensor_all of empty list");
        while let Some(f) = items.pop() {
            acc = Formula::tensor(f, acc);
        }
        acc
    }

    /// `Int = ∀α.!(α⊸α)⊸§(α⊸α)`.
    pub fn int() -> Formula {
        let a = || Formula::var("a");
        Formula::forall(
            "a",
            Formula::lolli(Formula::bang(Formula::lolli(a(), a())), Formula::par(Formula::lolli(a(), a()))),
        )
    }

    pub fn free_vars(&self) -> BTreeSet<TypeVar> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<TypeVar>, out: &mut BTreeSet<TypeVar>) {
        match self {
            Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Lolli(a, b) | Tensor(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Bang(a) | Par(a) => a.collect_free(bound, out),
            Forall(v, a) => {
                bound.push(v.clone());
                a.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn occurs_free(&self, v: &str) -> bool {
        match self {
            Var(w) => w == v,
            Lolli(a, b) | Tensor(a, b) => a.occurs_free(v) || b.occurs_free(v),
            Bang(a) | Par(a) => a.occurs_free(v),
            Forall(w, a) => w != v && a.occurs_free(v),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Var(_) => 1,
            Lolli(a, b) | Tensor(a, b) => 1 + a.size() + b.size(),
            Bang(a) | Par(a) | Forall(_, a) => 1 + a.size(),
        }
    }
}

/// A name based on `base` that is not in `avoid`.
pub fn fresh_type_var(base: &str, avoid: &BTreeSet<TypeVar>) -> TypeVar {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "a" } else { stem };
    (0..).map(|k| format!("{stem}{k}")).find(|cand| !avoid.contains(cand)).expect("unbounded search")
}

/// Capture-avoiding `a[b/v]`.
pub fn subst_type(a: &Formula, v: &str, b: &Formula) -> Formula {
    let fv_b = b.free_vars();
    subst_rec(a, v, b, &fv_b)
}

fn subst_rec(a: &Formula, v: &str, b: &Formula, fv_b: &BTreeSet<TypeVar>) -> Formula {
    match a {
        Var(w) => {
            if w == v {
                b.clone()
            } else {
                a.clone()
            }
        }
        Lolli(x, y) => Formula::lolli(subst_rec(x, v, b, fv_b), subst_rec(y, v, b, fv_b)),
        Tensor(x, y) => Formula::tensor(subst_rec(x, v, b, fv_b), subst_rec(y, v, b, fv_b)),
        Bang(x) => Formula::bang(subst_rec(x, v, b, fv_b)),
        Par(x) => Formula::par(subst_rec(x, v, b, fv_b)),
        Forall(w, body) => {
            if w == v || !body.occurs_free(v) {
                return a.clone();
            }
            if fv_b.contains(w) {
                let mut avoid = fv_b.clone();
                avoid.extend(body.free_vars());
                avoid.insert(v.to_string());
                let w2 = fresh_type_var(w, &avoid);
                let renamed = subst_rec(body, w, &Var(w2.clone()), &BTreeSet::from([w2.clone()]));
                Formula::forall(&w2, subst_rec(&renamed, v, b, fv_b))
            } else {
                Formula::forall(w, subst_rec(body, v, b, fv_b))
            }
        }
    }
}

/// Equality up to renaming of `∀`-bound variables.
pub fn alpha_eq_formula(a: &Formula, b: &Formula) -> bool {
    fn go<'a>(a: &'a Formula, b: &'a Formula, env: &mut Vec<(&'a str, &'a str)>) -> bool {
        match (a, b) {
            (Var(x), Var(y)) => {
                for (l, r) in env.iter().rev() {
                    if *l == x || *r == y {
                        return *l == x && *r == y;
                    }
                }
                x == y
            }
            (Lolli(a1, a2), Lolli(b1, b2)) | (Tensor(a1, a2), Tensor(b1, b2)) => {
                go(a1, b1, env) && go(a2, b2, env)
            }
            (Bang(x), Bang(y)) | (Par(x), Par(y)) => go(x, y, env),
            (Forall(v, x), Forall(w, y)) => {
                env.push((v, w));
                let r = go(x, y, env);
                env.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

pub fn parse_formula(text: &str) -> Result<Formula, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let f = parse_formula_at(&mut cur)?;
    cur.finish()?;
    Ok(f)
}

/// Parses one formula starting at the cursor, leaving trailing tokens.
pub fn parse_formula_at(cur: &mut Cursor) -> Result<Formula, SyntaxError> {
    if *cur.peek() == Tok::Forall {
        cur.bump();
        let mut vars = vec![cur.ident()?];
        while let Tok::Ident(_) = cur.peek() {
            vars.push(cur.ident()?);
        }
        cur.expect(&Tok::Dot)?;
        let mut body = parse_formula_at(cur)?;
        for v in vars.iter().rev() {
            body = Formula::forall(v, body);
        }
        return Ok(body);
    }
    let lhs = parse_tensor(cur)?;
    if *cur.peek() == Tok::Lolli {
        cur.bump();
        let rhs = parse_formula_at(cur)?;
        Ok(Formula::lolli(lhs, rhs))
    } else {
        Ok(lhs)
    }
}

fn parse_tensor(cur: &mut Cursor) -> Result<Formula, SyntaxError> {
    let lhs = parse_unary(cur)?;
    if *cur.peek() == Tok::Star {
        cur.bump();
        Ok(Formula::tensor(lhs, parse_tensor(cur)?))
    } else {
        Ok(lhs)
    }
}

fn parse_unary(cur: &mut Cursor) -> Result<Formula, SyntaxError> {
    match cur.peek().clone() {
        Tok::Bang => {
            cur.bump();
            Ok(Formula::bang(parse_unary(cur)?))
        }
        Tok::Dollar => {
            cur.bump();
            Ok(Formula::par(parse_unary(cur)?))
        }
        Tok::LParen => {
            cur.bump();
            let f = parse_formula_at(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(f)
        }
        Tok::Ident(name) => {
            cur.bump();
            Ok(Var(name))
        }
        other => Err(cur.error(format!("expected a formula, found {other}"))),
    }
}

pub fn print_formula(f: &Formula) -> String {
    f.to_string()
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, f)
    }
}

// Precedence: 0 forall, 1 lolli, 2 tensor, 3 prefix/atom.
fn write_prec(a: &Formula, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let own = match a {
        Forall(..) => 0,
        Lolli(..) => 1,
        Tensor(..) => 2,
        _ => 3,
    };
    if own < prec {
        f.write_str("(")?;
    }
    match a {
        Var(v) => f.write_str(v)?,
        Forall(v, body) => {
            write!(f, "forall {v}. ")?;
            write_prec(body, 0, f)?;
        }
        Lolli(x, y) => {
            write_prec(x, 2, f)?;
            f.write_str(" -o ")?;
            write_prec(y, 1, f)?;
        }
        Tensor(x, y) => {
            write_prec(x, 3, f)?;
            f.write_str(" * ")?;
            write_prec(y, 2, f)?;
        }
        Bang(x) => {
            f.write_str("!")?;
            write_prec(x, 3, f)?;
        }
        Par(x) => {
            f.write_str("$")?;
            write_prec(x, 3, f)?;
        }
    }
    if own < prec {
        f.write_str(")")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    /// Nameless form: bound variables become their binder distance.
    #[derive(Debug, PartialEq)]
    enum Db {
        Free(String),
        Bound(usize),
        Lolli(Box<Db>, Box<Db>),
        Tensor(Box<Db>, Box<Db>),
        Bang(Box<Db>),
        Par(Box<Db>),
        All(Box<Db>),
    }

    fn to_db(f: &Formula, env: &mut Vec<String>) -> Db {
        match f {
            Var(v) => match env.iter().rev().position(|w| w == v) {
                Some(i) => Db::Bound(i),
                None => Db::Free(v.clone()),
            },
            Lolli(a, b) => Db::Lolli(Box::new(to_db(a, env)), Box::new(to_db(b, env))),
            Tensor(a, b) => Db::Tensor(Box::new(to_db(a, env)), Box::new(to_db(b, env))),
            Bang(a) => Db::Bang(Box::new(to_db(a, env))),
            Par(a) => Db::Par(Box::new(to_db(a, env))),
            Forall(v, a) => {
                env.push(v.clone());
                let r = Db::All(Box::new(to_db(a, env)));
                env.pop();
                r
            }
        }
    }

    /// Substitution on the nameless form, the oracle for `subst_type`.
    fn db_subst(d: &Db, v: &str, b: &Db, depth: usize) -> Db {
        fn shift(d: &Db, by: usize, cutoff: usize) -> Db {
            match d {
                Db::Free(s) => Db::Free(s.clone()),
                Db::Bound(i) => Db::Bound(if *i >= cutoff { i + by } else { *i }),
                Db::Lolli(a, c) => Db::Lolli(Box::new(shift(a, by, cutoff)), Box::new(shift(c, by, cutoff))),
                Db::Tensor(a, c) => {
                    Db::Tensor(Box::new(shift(a, by, cutoff)), Box::new(shift(c, by, cutoff)))
                }
                Db::Bang(a) => Db::Bang(Box::new(shift(a, by, cutoff))),
                Db::Par(a) => Db::Par(Box::new(shift(a, by, cutoff))),
                Db::All(a) => Db::All(Box::new(shift(a, by, cutoff + 1))),
            }
        }
        match d {
            Db::Free(s) if s == v => shift(b, depth, 0),
            Db::Free(s) => Db::Free(s.clone()),
            Db::Bound(i) => Db::Bound(*i),
            Db::Lolli(a, c) => {
                Db::Lolli(Box::new(db_subst(a, v, b, depth)), Box::new(db_subst(c, v, b, depth)))
            }
            Db::Tensor(a, c) => {
                Db::Tensor(Box::new(db_subst(a, v, b, depth)), Box::new(db_subst(c, v, b, depth)))
            }
            Db::Bang(a) => Db::Bang(Box::new(db_subst(a, v, b, depth))),
            Db::Par(a) => Db::Par(Box::new(db_subst(a, v, b, depth))),
            Db::All(a) => Db::All(Box::new(db_subst(a, v, b, depth + 1))),
        }
    }

    #[test]
    fn subst_examples() {
        assert_eq!(subst_type(&p("a"), "a", &Formula::int()), Formula::int());
        assert_eq!(subst_type(&p("forall a. a -o b"), "b", &p("!c")), p("forall a. a -o !c"));
        let r = subst_type(&p("forall a. a -o b"), "b", &p("a"));
        assert!(alpha_eq_formula(&r, &p("forall z. z -o a")));
        match &r {
            Forall(w, _) => assert_ne!(w, "a"),
            _ => panic!("binder lost"),
        }
        let (lhs, rhs) = (
            to_db(&r, &mut vec![]),
            db_subst(&to_db(&p("forall a. a -o b"), &mut vec![]), "b", &to_db(&p("a"), &mut vec![]), 0),
        );
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn alpha_examples() {
        assert!(alpha_eq_formula(&p("forall a. a"), &p("forall b. b")));
        assert!(!alpha_eq_formula(&p("a"), &p("b")));
        assert!(alpha_eq_formula(&p("forall b. !(b -o b) -o $(b -o b)"), &Formula::int()));
        assert!(!alpha_eq_formula(&p("forall a. forall b. a"), &p("forall a. forall b. b")));
    }

    #[test]
    fn parse_print_examples() {
        assert_eq!(p("forall a. !(a -o a) -o $(a -o a)"), Formula::int());
        assert_eq!(p("a * b -o c"), Formula::lolli(p("a * b"), p("c")));
        assert_eq!(print_formula(&p("!$!a")), "!$!a");
        assert_eq!(print_formula(&Formula::int()), "forall a. !(a -o a) -o $(a -o a)");
        assert_eq!(print_formula(&p("(a -o b) -o c")), "(a -o b) -o c");
        assert_eq!(print_formula(&p("a * (b * c) * d")), "a * (b * c) * d");
        assert!(parse_formula("a -o").is_err());
        let e = parse_formula("a -o -o").unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop::sample::select(vec!["a", "b", "c"]).prop_map(Formula::var);
        leaf.prop_recursive(8, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::lolli(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::tensor(a, b)),
                inner.clone().prop_map(Formula::bang),
                inner.clone().prop_map(Formula::par),
                (prop::sample::select(vec!["a", "b", "d"]), inner).prop_map(|(v, a)| Formula::forall(v, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_print_round_trip(f in arb_formula()) {
            let back = parse_formula(&print_formula(&f)).unwrap();
            prop_assert!(alpha_eq_formula(&back, &f));
        }

        #[test]
        fn subst_identity(f in arb_formula(), v in prop::sample::select(vec!["a", "b", "c"])) {
            prop_assert!(alpha_eq_formula(&subst_type(&f, v, &Formula::var(v)), &f));
        }

        #[test]
        fn subst_agrees_with_nameless_oracle(f in arb_formula(), b in arb_formula(), v in prop::sample::select(vec!["a", "b", "c"])) {
            let named = subst_type(&f, v, &b);
            let oracle = db_subst(&to_db(&f, &mut vec![]), v, &to_db(&b, &mut vec![]), 0);
            prop_assert_eq!(to_db(&named, &mut vec![]), oracle);
            for w in b.free_vars() {
                if f.free_vars().contains(v) {
                    prop_assert!(named.free_vars().contains(&w));
                }
            }
        }
    }
}

//! The numeral corpus: tally integers, arithmetic combinators, the linear
//! predecessor, generalized operations and the polynomial encoder.
//!
//! Closed constants are written in surface syntax and macro-expanded; the
//! indexed families are assembled from constructors.

use std::collections::BTreeMap;

use crate::formula::Formula;
use crate::term::{
    app, apps, bang_door_n, bang_n, lam, lams, par, par_door, par_door_n, par_n, parse_term, substitute,
    tensor_all, var, Pattern, Term,
};
use crate::typecheck::TypeEnv;

/// Parses `text` and substitutes the named constants into it.
pub fn expand(text: &str, env: &[(&str, Term)]) -> Term {
    let t = parse_term(text).unwrap_or_else(|e| panic!("stdlib source {text:?}: {e}"));
    let map: BTreeMap<String, Term> = env.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    substitute(&t, &map)
}

/// `n̄ = λx.§(λy.!̄x(…(!̄x y)…))`.
pub fn numeral(n: usize) -> Term {
    let mut body = var("y");
    for _ in 0..n {
        body = app(crate::term::bang_door(var("x")), body);
    }
    lam(Pattern::var("x"), par(lam(Pattern::var("y"), body)))
}

/// `0̄^{p,q} = §ᵖ!ᵍ0̄`.
pub fn zero_pq(p: usize, q: usize) -> Term {
    par_n(p, bang_n(q, numeral(0)))
}

/// `0̄_n`, the n-fold tensor of `0̄`.
pub fn zero_tuple(n: usize) -> Term {
    tensor_all(vec![numeral(0); n])
}

pub fn succ() -> Term {
    expand("\\z x. $(\\y. ~!x (~$(z x) y))", &[])
}

pub fn sum() -> Term {
    expand("\\w z x. $(\\y. ~$(w x) (~$(z x) y))", &[])
}

pub fn iter() -> Term {
    expand("\\x y z. $(~$(x y) ~$z)", &[])
}

pub fn mult() -> Term {
    expand("\\x y. iter x !(\\w. sum ~!y w) $zero", &[("iter", iter()), ("sum", sum()), ("zero", numeral(0))])
}

pub fn coerc() -> Term {
    expand("\\x. $(~$(x !succ) zero)", &[("succ", succ()), ("zero", numeral(0))])
}

/// `I = λx.x`.
pub fn identity() -> Term {
    expand("\\x. x", &[])
}

/// `π₂ = λx⊗y.y`.
pub fn pi2() -> Term {
    expand("\\x * y. y", &[])
}

/// The template `T = λf.λg⊗h.f⊗(gh)`.
pub fn template() -> Term {
    expand("\\f. \\g * h. f * (g h)", &[])
}

/// `step = λz.T z`.
pub fn pred_step() -> Term {
    expand("\\z. t z", &[("t", template())])
}

/// `base = λy.T I (I⊗y)`.
pub fn pred_base() -> Term {
    expand("\\y. t i (i * y)", &[("t", template()), ("i", identity())])
}

pub fn pred() -> Term {
    expand(
        "\\w x. $(\\y. pi2 (~$(w !(step ~!x)) (base y)))",
        &[("pi2", pi2()), ("step", pred_step()), ("base", pred_base())],
    )
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn tuple_pattern(vars: &[String]) -> Pattern {
    Pattern::tuple_of(vars.iter().map(|v| Pattern::var(v)).collect())
}

/// `sum_n = λx₁⊗…⊗xₙ z.§(λy.§̄(x₁ z)(…(§̄(xₙ z) y)…))`.
pub fn sum_n(n: usize) -> Term {
    assert!(n >= 1, "sum_n needs n >= 1");
    let xs = names("x", n);
    let mut body = var("y");
    for x in xs.iter().rev() {
        body = app(par_door(app(var(x), var("z"))), body);
    }
    lam(tuple_pattern(&xs), lam(Pattern::var("z"), par(lam(Pattern::var("y"), body))))
}

/// `sumᵖ_n = λx₁⊗…⊗xₙ.§ᵖ(sum_n §̄ᵖx₁⊗…⊗§̄ᵖxₙ)`.
pub fn sum_pn(p: usize, n: usize) -> Term {
    let xs = names("x", n);
    let args = tensor_all(xs.iter().map(|x| par_door_n(p, var(x))).collect());
    lam(tuple_pattern(&xs), par_n(p, app(sum_n(n), args)))
}

/// `succ^{p,q} = λx.§ᵖ(!ᵍ(succ !̄ᵍ(§̄ᵖx)))`.
pub fn succ_pq(p: usize, q: usize) -> Term {
    let inner = bang_door_n(q, par_door_n(p, var("x")));
    lam(Pattern::var("x"), par_n(p, bang_n(q, app(succ(), inner))))
}

/// `coerc^{p,q} = λx.§(§̄(x !succ^{p,q}) 0̄^{p,q})`.
pub fn coerc_pq(p: usize, q: usize) -> Term {
    expand("\\x. $(~$(x !s) z)", &[("s", succ_pq(p, q)), ("z", zero_pq(p, q))])
}

/// `multᵖ = λxy.§ᵖ(mult §̄ᵖx §̄ᵖy)`.
pub fn mult_p(p: usize) -> Term {
    lams(&["x", "y"], par_n(p, apps(mult(), vec![par_door_n(p, var("x")), par_door_n(p, var("y"))])))
}

/// `tuple_n = λx.§(§̄(x !(λx₁⊗…⊗xₙ.succ x₁⊗…⊗succ xₙ)) 0̄_n)`.
pub fn tuple_n(n: usize) -> Term {
    assert!(n >= 1, "tuple_n needs n >= 1");
    let xs = names("x", n);
    let step = lam(tuple_pattern(&xs), tensor_all(xs.iter().map(|x| app(succ(), var(x))).collect()));
    expand("\\x. $(~$(x !f) z)", &[("f", step), ("z", zero_tuple(n))])
}

/// `iterᵖ` with every argument brought to the iteration depth through
/// doors: `λxyz.§ᵖ(§(§̄(§̄ᵖx §̄ᵖy) §̄(§̄ᵖz)))`. For p = 0 this is `iter`.
pub fn iter_p(p: usize) -> Term {
    let inner = par(app(
        par_door(app(par_door_n(p, var("x")), par_door_n(p, var("y")))),
        par_door(par_door_n(p, var("z"))),
    ));
    lams(&["x", "y", "z"], par_n(p, inner))
}

/// `A ⊸ B`.
fn lolli(a: Formula, b: Formula) -> Formula {
    Formula::lolli(a, b)
}

pub fn int() -> Formula {
    Formula::int()
}

/// `Int_n`.
pub fn int_n(n: usize) -> Formula {
    Formula::tensor_all(vec![int(); n])
}

/// `Int ⊸ !(A⊸A) ⊸ §A ⊸ §A` at the given `A`.
pub fn iter_type(a: Formula) -> Formula {
    lolli(
        int(),
        lolli(Formula::bang(lolli(a.clone(), a.clone())), lolli(Formula::par(a.clone()), Formula::par(a))),
    )
}

/// `§ᵖInt ⊸ §ᵖ!(A⊸A) ⊸ §ᵖ⁺¹A ⊸ §ᵖ⁺¹A`, the type of [`iter_p`].
pub fn iter_p_type(p: usize, a: Formula) -> Formula {
    lolli(
        Formula::par_n(p, int()),
        lolli(
            Formula::par_n(p, Formula::bang(lolli(a.clone(), a.clone()))),
            lolli(Formula::par_n(p + 1, a.clone()), Formula::par_n(p + 1, a)),
        ),
    )
}

/// A polynomial with nonnegative coefficients `a₀ + a₁x + … + a_θ x^θ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolySpec {
    coeffs: Vec<u64>,
}

impl PolySpec {
    /// Trailing zero coefficients are dropped; the empty list is `0`.
    pub fn new(coeffs: &[u64]) -> PolySpec {
        let mut c = coeffs.to_vec();
        while c.len() > 1 && *c.last().expect("nonempty") == 0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0);
        }
        PolySpec { coeffs: c }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Maximal non-null degree θ.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// κ = θ(θ+1)/2, the number of input copies the encoding needs.
    pub fn kappa(&self) -> usize {
        let t = self.degree();
        t * (t + 1) / 2
    }

    pub fn eval(&self, x: u64) -> u64 {
        self.coeffs.iter().rev().fold(0u64, |acc, &a| {
            acc.checked_mul(x).and_then(|v| v.checked_add(a)).expect("polynomial value overflows u64")
        })
    }
}

/// Name of `y^j_i`, the i-th variable of row j of the vector `y⃗_θ`.
pub fn poly_var(j: usize, i: usize) -> String {
    format!("y{j}_{i}")
}

/// `⟨z⃗,n⟩`: the product of the first n+1 entries of row `row`.
fn vector_product(row: usize, n: usize) -> Term {
    let z = |k: usize| var(&poly_var(row, k));
    if n == 0 {
        app(coerc_pq(0, 0), z(0))
    } else {
        apps(mult_p(n), vec![vector_product(row, n - 1), app(coerc_pq(n - 1, 1), z(n))])
    }
}

/// `⟨⟨a xⁿ⟩⟩` over row n of `y⃗_θ`.
fn monomial(a: u64, n: usize) -> Term {
    let a = numeral(a as usize);
    if n == 0 {
        app(coerc_pq(0, 0), a)
    } else {
        apps(mult_p(n), vec![vector_product(n, n - 1), app(coerc_pq(n - 1, 1), a)])
    }
}

/// `p̂^θ_x : Int ⊸ §^{θ+3}Int`.
///
/// For θ = 0 the vector of variables is empty, so the λ-pattern and the
/// `tuple_κ` fan-out disappear and the argument is weakened.
pub fn poly_encode(p: &PolySpec) -> Term {
    let theta = p.degree();
    let summands: Vec<Term> = (0..=theta)
        .map(|i| par_n(i + 1, app(coerc_pq(theta - i, 0), par_door_n(i + 1, monomial(p.coeffs[i], i)))))
        .collect();
    let sum = app(sum_pn(theta + 2, theta + 1), tensor_all(summands));
    let body = if theta == 0 {
        sum
    } else {
        let vars: Vec<String> = (1..=theta).flat_map(|j| (0..j).map(move |i| poly_var(j, i))).collect();
        app(lam(tuple_pattern(&vars), sum), par_door(app(tuple_n(p.kappa()), var("x"))))
    };
    lam(Pattern::var("x"), par(body))
}

/// The prelude and every indexed family `poly_encode(p)` is assembled from,
/// named and typed, so that the encoder elaborates with its pieces folded
/// back to constants.
pub fn poly_env(p: &PolySpec) -> TypeEnv {
    let theta = p.degree();
    let prelude = crate::lal::Program::parse(crate::lal::PRELUDE).expect("prelude parses");
    let mut env = TypeEnv::from_program(&prelude);
    let pq = |p: usize, q: usize| Formula::par_n(p, Formula::bang_n(q, int()));
    for i in 0..=theta + 1 {
        for q in 0..=1 {
            env.define(&format!("zero_{i}_{q}"), zero_pq(i, q), pq(i, q));
            env.define(&format!("succ_{i}_{q}"), succ_pq(i, q), lolli(pq(i, q), pq(i, q)));
            env.define(&format!("coerc_{i}_{q}"), coerc_pq(i, q), lolli(int(), pq(i + 1, q)));
        }
    }
    for n in 1..=theta {
        let ty = lolli(pq(n, 0), lolli(pq(n, 1), pq(n + 1, 0)));
        env.define(&format!("mult_{n}"), mult_p(n), ty);
    }
    let n = theta + 1;
    env.define(&format!("sum_{n}"), sum_n(n), lolli(int_n(n), int()));
    let parts = Formula::tensor_all(vec![pq(theta + 2, 0); n]);
    env.define(&format!("sum_{}_{n}", theta + 2), sum_pn(theta + 2, n), lolli(parts, pq(theta + 2, 0)));
    if p.kappa() >= 1 {
        let k = p.kappa();
        env.define(&format!("zero_tuple_{k}"), zero_tuple(k), int_n(k));
        env.define(&format!("tuple_{k}"), tuple_n(k), lolli(int(), Formula::par(int_n(k))));
    }
    env
}

/// A named corpus entry with its declared type.
#[derive(Debug, Clone)]
pub struct Definition {
    pub name: &'static str,
    pub term: Term,
    pub ty: Formula,
}

/// The closed constants with the types they are declared at.
pub fn corpus() -> Vec<Definition> {
    let a = || Formula::var("a");
    let b = || Formula::var("b");
    let ii = || lolli(int(), int());
    let aa = || lolli(a(), a());
    vec![
        Definition { name: "zero", term: numeral(0), ty: int() },
        Definition { name: "succ", term: succ(), ty: ii() },
        Definition { name: "sum", term: sum(), ty: lolli(int(), ii()) },
        Definition { name: "iter", term: iter(), ty: iter_type(Formula::var("A")) },
        Definition {
            name: "mult",
            term: mult(),
            ty: lolli(int(), lolli(Formula::bang(int()), Formula::par(int()))),
        },
        Definition { name: "coerc", term: coerc(), ty: lolli(int(), Formula::par(int())) },
        Definition { name: "I", term: identity(), ty: Formula::forall("a", aa()) },
        Definition {
            name: "pi2",
            term: pi2(),
            ty: Formula::forall("a", Formula::forall("b", lolli(Formula::tensor(a(), b()), b()))),
        },
        Definition {
            name: "T",
            term: template(),
            ty: Formula::forall(
                "a",
                lolli(aa(), lolli(Formula::tensor(aa(), a()), Formula::tensor(aa(), a()))),
            ),
        },
        Definition {
            name: "step",
            term: pred_step(),
            ty: Formula::forall(
                "a",
                lolli(aa(), lolli(Formula::tensor(aa(), a()), Formula::tensor(aa(), a()))),
            ),
        },
        Definition {
            name: "base",
            term: pred_base(),
            ty: Formula::forall("a", lolli(a(), Formula::tensor(aa(), a()))),
        },
        Definition { name: "pred", term: pred(), ty: ii() },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{alpha_eq, bang, reduce_term, Term};

    /// Reads a numeral off a normal form: `§ᵏ(λx.§(λy.!̄x(…y)))`.
    fn read(t: &Term) -> Option<(usize, usize)> {
        let mut k = 0;
        let mut cur = t;
        while let Term::ParBox(m) = cur {
            k += 1;
            cur = m;
        }
        (0..64).find(|&n| alpha_eq(cur, &numeral(n))).map(|n| (n, k))
    }

    fn run(t: Term) -> Term {
        reduce_term(&t, 200_000).expect("terminates").term
    }

    #[test]
    fn numeral_shapes() {
        assert_eq!(numeral(0), parse_term("\\x. $(\\y. y)").unwrap());
        assert_eq!(numeral(3), parse_term("\\x. $(\\y. ~!x (~!x (~!x y)))").unwrap());
        assert_eq!(zero_pq(2, 1), parse_term("$$!(\\x. $(\\y. y))").unwrap());
    }

    #[test]
    fn arithmetic_tables() {
        for n in 0..=6 {
            assert_eq!(read(&run(app(succ(), numeral(n)))), Some((n + 1, 0)));
            assert_eq!(read(&run(app(coerc(), numeral(n)))), Some((n, 1)));
            assert_eq!(read(&run(app(pred(), numeral(n)))), Some((n.saturating_sub(1), 0)));
            for m in 0..=6 {
                assert_eq!(read(&run(apps(sum(), vec![numeral(n), numeral(m)]))), Some((n + m, 0)));
                let prod = run(apps(mult(), vec![numeral(n), bang(numeral(m))]));
                assert_eq!(read(&prod), Some((n * m, 1)), "mult {n} {m}");
            }
        }
    }

    #[test]
    fn generalized_operations() {
        let t3 = run(app(tuple_n(3), numeral(2)));
        assert!(alpha_eq(&t3, &par(tensor_all(vec![numeral(2); 3]))));
        assert_eq!(read(&run(app(coerc_pq(2, 0), numeral(3)))), Some((3, 3)));
        let args = tensor_all(vec![par_n(4, numeral(1)), par_n(4, numeral(0)), par_n(4, numeral(4))]);
        assert_eq!(read(&run(par(app(sum_pn(4, 3), args)))), Some((5, 5)));
        let s = run(app(sum_n(2), crate::term::tensor(numeral(2), numeral(3))));
        assert_eq!(read(&s), Some((5, 0)));
        let c = run(app(coerc_pq(1, 1), numeral(2)));
        assert!(alpha_eq(&c, &par_n(2, bang(numeral(2)))));
        let m = run(apps(mult_p(1), vec![par(numeral(2)), par(bang(numeral(3)))]));
        assert_eq!(read(&m), Some((6, 2)));
    }

    #[test]
    fn iter_p_counts() {
        // iterᵖ n̄ f z applies f n times at depth p+1.
        let r = run(apps(iter_p(1), vec![par(numeral(3)), par(bang(succ())), par_n(2, numeral(1))]));
        assert_eq!(read(&r), Some((4, 2)));
        assert!(alpha_eq(&iter_p(0), &iter()));
    }

    #[test]
    fn polynomial_x2_plus_1_matches_expansion() {
        let p = PolySpec::new(&[1, 0, 1]);
        let by_hand = expand(
            "\\x. $((\\y1_0 * y2_0 * y2_1. sum42 ($(c20 ~$(c00 one))
                  * $$(c10 ~$~$(m1 (c00 y1_0) (c01 zero)))
                  * $$$(c00 ~$~$~$(m2 (m1 (c00 y2_0) (c01 y2_1)) (c11 one)))))
               ~$(tuple3 x))",
            &[
                ("sum42", sum_pn(4, 3)),
                ("c20", coerc_pq(2, 0)),
                ("c10", coerc_pq(1, 0)),
                ("c00", coerc_pq(0, 0)),
                ("c01", coerc_pq(0, 1)),
                ("c11", coerc_pq(1, 1)),
                ("m1", mult_p(1)),
                ("m2", mult_p(2)),
                ("one", numeral(1)),
                ("zero", numeral(0)),
                ("tuple3", tuple_n(3)),
            ],
        );
        assert!(alpha_eq(&poly_encode(&p), &by_hand));
        assert_eq!(read(&run(app(poly_encode(&p), numeral(2)))), Some((5, 5)));
    }

    #[test]
    fn constant_polynomials() {
        for c in 0..=2u64 {
            for n in 0..=2 {
                let r = run(app(poly_encode(&PolySpec::new(&[c])), numeral(n)));
                assert_eq!(read(&r), Some((c as usize, 3)));
            }
        }
    }

    #[test]
    fn polyspec_basics() {
        let p = PolySpec::new(&[1, 2, 0, 0]);
        assert_eq!((p.degree(), p.kappa(), p.eval(3)), (1, 1, 7));
        assert_eq!(PolySpec::new(&[]).degree(), 0);
        assert_eq!(PolySpec::new(&[0, 0, 3]).kappa(), 3);
    }
}

#[cfg(test)]
mod typing {
    use super::*;
    use crate::typecheck::{check_derivation, check_term};

    #[test]
    fn polynomial_encoders_check_at_their_types() {
        for coeffs in [&[3][..], &[2, 1], &[1, 0, 2], &[0, 1, 1, 1]] {
            let p = PolySpec::new(coeffs);
            let ty = lolli(int(), Formula::par_n(p.degree() + 3, int()));
            let d = check_term(&poly_encode(&p), &ty, &poly_env(&p))
                .unwrap_or_else(|e| panic!("{coeffs:?}: {e}"));
            assert_eq!(check_derivation(&d), vec![], "{coeffs:?}");
        }
    }
}

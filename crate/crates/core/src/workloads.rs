//! Named reduction workloads over the standard library, shared by the
//! command line, the benchmarks and the acceptance suite.

use rand::Rng;

use crate::net::Net;
use crate::stdlib::{coerc, identity, mult, numeral, pi2, poly_encode, pred, succ, sum, PolySpec};
use crate::term::{app, apps, bang, par, parse_term, tensor, Term};
use crate::translate::term_to_net;
use crate::typecheck::{synth_term, TypeEnv};

#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub term: Term,
    /// Numeral value and `§` prefix of the normal form.
    pub expected: (usize, usize),
}

/// Every polynomial of degree at most `max_degree` with coefficients in
/// `0..=max_coeff` and nonzero leading coefficient (degree 0 allows `0`).
pub fn polynomials(max_degree: usize, max_coeff: u64) -> Vec<PolySpec> {
    let mut out = Vec::new();
    for theta in 0..=max_degree {
        let mut coeffs = vec![0u64; theta + 1];
        loop {
            if theta == 0 || coeffs[theta] >= 1 {
                out.push(PolySpec::new(&coeffs));
            }
            let mut i = 0;
            loop {
                if i > theta {
                    break;
                }
                if coeffs[i] < max_coeff {
                    coeffs[i] += 1;
                    break;
                }
                coeffs[i] = 0;
                i += 1;
            }
            if i > theta {
                break;
            }
        }
    }
    out
}

pub fn poly_name(p: &PolySpec, n: usize) -> String {
    let cs: Vec<String> = p.coeffs().iter().map(u64::to_string).collect();
    format!("poly[{}]@{n}", cs.join(" "))
}

pub fn poly_application(p: &PolySpec, n: usize) -> Workload {
    Workload {
        name: poly_name(p, n),
        term: app(poly_encode(p), numeral(n)),
        expected: (p.eval(n as u64) as usize, p.degree() + 3),
    }
}

/// `p̂ n̄` for every polynomial of [`polynomials`] and `n ∈ 0..=max_arg`.
pub fn poly_matrix(max_degree: usize, max_coeff: u64, max_arg: usize) -> Vec<Workload> {
    polynomials(max_degree, max_coeff)
        .iter()
        .flat_map(|p| (0..=max_arg).map(move |n| poly_application(p, n)))
        .collect()
}

/// `succ (succ … 0̄)` with k applications.
pub fn succ_chain(k: usize) -> Workload {
    let term = (0..k).fold(numeral(0), |t, _| app(succ(), t));
    Workload { name: format!("succ^{k}"), term, expected: (k, 0) }
}

/// Succ chains of length `1..=chain`, then sum, mult and pred over
/// `0..=table`.
pub fn arithmetic_suite(chain: usize, table: usize) -> Vec<Workload> {
    let mut out: Vec<Workload> = (1..=chain).map(succ_chain).collect();
    for m in 0..=table {
        for n in 0..=table {
            out.push(Workload {
                name: format!("sum {m} {n}"),
                term: apps(sum(), vec![numeral(m), numeral(n)]),
                expected: (m + n, 0),
            });
        }
    }
    for m in 0..=table {
        for n in 0..=table {
            out.push(Workload {
                name: format!("mult {m} !{n}"),
                term: apps(mult(), vec![numeral(m), bang(numeral(n))]),
                expected: (m * n, 1),
            });
        }
    }
    for n in 0..=table {
        out.push(Workload {
            name: format!("pred {n}"),
            term: app(pred(), numeral(n)),
            expected: (n.saturating_sub(1), 0),
        });
    }
    out
}

/// The stock `stdlib` suite: arithmetic to 20/6 and the degree-2 matrix.
pub fn stdlib_suite() -> Vec<Workload> {
    let mut out = arithmetic_suite(20, 6);
    out.extend(poly_matrix(2, 3, 4));
    out
}

fn random_term(rng: &mut impl Rng, budget: u32) -> Term {
    if budget == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..9) {
            0 => numeral(rng.gen_range(0..3)),
            1 => succ(),
            2 => sum(),
            3 => coerc(),
            4 => identity(),
            5 => pi2(),
            6 => parse_term("\\f x. f x").expect("literal"),
            7 => parse_term("\\x * y. y * x").expect("literal"),
            _ => parse_term("\\x. !x").expect("literal"),
        };
    }
    match rng.gen_range(0..10) {
        0 => bang(random_term(rng, budget - 1)),
        1 => par(random_term(rng, budget - 1)),
        2 => tensor(random_term(rng, budget / 2), random_term(rng, budget / 2)),
        _ => app(random_term(rng, budget / 2), random_term(rng, budget / 2)),
    }
}

/// A closed net of more than `max_nodes / 3` and at most `max_nodes` nodes
/// with at least one redex,
/// translated from a random typable combination of small stdlib pieces.
/// Typability rules out clashes such as a §-box cut against a !-door.
pub fn random_net(rng: &mut impl Rng, max_nodes: usize) -> (Term, Net) {
    let env = TypeEnv::new();
    loop {
        let t = random_term(rng, 6);
        let Ok(n) = term_to_net(&t) else { continue };
        let fits = n.size() > max_nodes / 3 && n.size() <= max_nodes;
        if fits && !crate::cutelim::is_normal(&n) && synth_term(&t, &env).is_ok() {
            return (t, n);
        }
    }
}

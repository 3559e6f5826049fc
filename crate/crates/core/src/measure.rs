//! Complexity measures on nets and the level-by-level reduction strategy.
//!
//! `d_l` counts quantifier, multiplicative, contraction and box nodes at
//! level `l`; axioms, weakenings and units are not counted. The weight of a
//! contraction is the number of same-level !-boxes met walking from its
//! input toward the producers, passing through contractions and axioms and
//! continuing past a !-box through its door.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::cutelim::{apply, find_redexes, gc_fixpoint, is_normal, Redex, RedexKind, StepRecord};
use crate::net::{End, Net, NodeId, NodeKind};

/// Counts at one level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LevelDims {
    /// ⊸, ⊗ and ∀ nodes.
    pub n: u64,
    /// !-boxes and §-boxes.
    pub b: u64,
    /// Contractions by weight.
    pub c: BTreeMap<u64, u64>,
}

impl LevelDims {
    pub fn d(&self) -> u64 {
        self.n + self.b + self.c.values().sum::<u64>()
    }

    /// Maximal contraction weight, 0 without contractions.
    pub fn max_weight(&self) -> u64 {
        self.c.keys().next_back().copied().unwrap_or(0)
    }

    pub fn c_at(&self, w: u64) -> u64 {
        self.c.get(&w).copied().unwrap_or(0)
    }
}

/// Per-level dimensions `⟨d_0, …, d_∂⟩` with their refinement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mu {
    pub levels: Vec<LevelDims>,
}

impl Mu {
    pub fn dims(&self) -> Vec<u64> {
        self.levels.iter().map(LevelDims::d).collect()
    }

    /// `D`, the sum of all `d_l`.
    pub fn total(&self) -> u64 {
        self.levels.iter().map(LevelDims::d).sum()
    }

    /// Counts at `l`; all zero outside `0..=∂`.
    pub fn at(&self, l: i64) -> LevelDims {
        if l < 0 {
            return LevelDims::default();
        }
        self.levels.get(l as usize).cloned().unwrap_or_default()
    }
}

pub fn depth(net: &Net) -> usize {
    net.depth()
}

/// Weight of contraction `c` in `net`, the subnet that holds it.
pub fn contraction_weight(net: &Net, c: NodeId) -> u64 {
    let mut w = 0;
    let mut cur = net.link(net.port_link(c, 0)).src;
    // Nets are acyclic; the bound only guards malformed input.
    for _ in 0..=net.nodes.len() {
        match cur {
            End::Port(x, p) => match &net.node(x).kind {
                NodeKind::Contraction | NodeKind::Ax => cur = net.link(net.port_link(x, 0)).src,
                NodeKind::BangBox(inner) if p == 0 => {
                    w += 1;
                    if inner.inputs.is_empty() {
                        return w;
                    }
                    cur = net.link(net.port_link(x, 1)).src;
                }
                _ => return w,
            },
            _ => return w,
        }
    }
    w
}

/// Every contraction with its weight, by level.
pub fn weights(net: &Net) -> BTreeMap<NodeId, (usize, u64)> {
    let mut out = BTreeMap::new();
    for (path, sub) in net.subnets() {
        for (id, n) in &sub.nodes {
            if n.kind == NodeKind::Contraction {
                out.insert(*id, (path.len(), contraction_weight(sub, *id)));
            }
        }
    }
    out
}

pub fn dims(net: &Net) -> Mu {
    let mut levels = vec![LevelDims::default(); net.depth() + 1];
    for (path, sub) in net.subnets() {
        let l = path.len();
        if l >= levels.len() {
            // Levels holding only floating nodes.
            levels.resize(l + 1, LevelDims::default());
        }
        let here = &mut levels[l];
        for (id, n) in &sub.nodes {
            match &n.kind {
                NodeKind::LolliR
                | NodeKind::LolliL
                | NodeKind::TensorR
                | NodeKind::TensorL
                | NodeKind::ForallR { .. }
                | NodeKind::ForallL { .. } => here.n += 1,
                NodeKind::BangBox(_) | NodeKind::ParBox(..) => here.b += 1,
                NodeKind::Contraction => *here.c.entry(contraction_weight(sub, *id)).or_default() += 1,
                NodeKind::Ax | NodeKind::Weak | NodeKind::Unit => {}
            }
        }
    }
    while levels.len() > net.depth() + 1 && levels.last().is_some_and(|l| l.d() == 0) {
        levels.pop();
    }
    Mu { levels }
}

/// The cut measure `⟨c^W_{l-1}, …, c^1_{l-1}, b_{l-1}, n_l⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gamma {
    pub level: usize,
    pub components: Vec<u64>,
}

impl Gamma {
    /// Lexicographic order on tuples aligned at their last component;
    /// missing leading components count as 0.
    pub fn lex_cmp(&self, other: &Gamma) -> Ordering {
        let n = self.components.len().max(other.components.len());
        let pad = |g: &Gamma| {
            let mut v = vec![0; n - g.components.len()];
            v.extend_from_slice(&g.components);
            v
        };
        pad(self).cmp(&pad(other))
    }

    /// `n_l`, the last component.
    pub fn n(&self) -> u64 {
        *self.components.last().expect("nonempty")
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(u64::to_string).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

pub fn gamma_of(mu: &Mu, l: usize) -> Gamma {
    let here = mu.at(l as i64);
    if l == 0 {
        return Gamma { level: 0, components: vec![here.n] };
    }
    let below = mu.at(l as i64 - 1);
    let mut components: Vec<u64> = (1..=below.max_weight()).rev().map(|w| below.c_at(w)).collect();
    components.push(below.b);
    components.push(here.n);
    Gamma { level: l, components }
}

pub fn gamma(net: &Net, l: usize) -> Gamma {
    gamma_of(&dims(net), l)
}

/// No linear redex at levels `0..=l` and no shift or duplication below `l`.
pub fn is_l_normal(net: &Net, l: usize) -> bool {
    (0..=l).all(|i| find_redexes(net, i, &RedexKind::LINEAR).is_empty())
        && (0..l).all(|i| find_redexes(net, i, &[RedexKind::Shift, RedexKind::Duplicate]).is_empty())
}

/// A per-step measure law that did not hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LawViolation {
    pub ordinal: u64,
    pub kind: RedexKind,
    pub law: &'static str,
    pub before: Gamma,
    pub after: Gamma,
}

impl fmt::Display for LawViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {} ({}): {} fails, {} -> {}",
            self.ordinal, self.kind, self.law, self.before, self.after
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundReport {
    pub level: usize,
    pub steps_p: u64,
    pub steps_s: u64,
    pub steps_l: u64,
    pub steps_gc: u64,
    pub d_start: u64,
    pub d_end: u64,
    pub bound_6d3: u128,
    pub within_bound: bool,
    /// Largest `d_i`, `i ≥ level`, after the round.
    pub max_dim_after: u64,
    pub gamma_trace: Vec<Gamma>,
    pub law_violations: Vec<LawViolation>,
    pub trace: Vec<StepRecord>,
}

impl RoundReport {
    pub fn counted_steps(&self) -> u64 {
        self.steps_p + self.steps_s + self.steps_l
    }

    pub const CSV_HEADER: &'static str =
        "workload,round,level,steps_p,steps_s,steps_l,steps_gc,D_start,bound,within_bound";

    pub fn csv_row(&self, workload: &str, round: usize) -> String {
        format!(
            "{workload},{round},{},{},{},{},{},{},{},{}",
            self.level,
            self.steps_p,
            self.steps_s,
            self.steps_l,
            self.steps_gc,
            self.d_start,
            self.bound_6d3,
            self.within_bound
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("round {0} needs a net that is normal below level {0}")]
    NotNormalBelow(usize),
    #[error("round {level} took {steps} steps, above 6·D³ = {bound} (D = {d})")]
    BoundViolated { level: usize, steps: u64, bound: u128, d: u64 },
    #[error("round {0} left the net not {0}-normal")]
    NotNormalAfter(usize),
    #[error("the final net still has redexes")]
    NotNormal,
    #[error("step limit of {0} reached")]
    OutOfFuel(u64),
}

/// Whether per-step laws are checked; checking costs a measure per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instrument {
    On,
    Off,
}

#[derive(Debug, Clone, Copy)]
pub struct SigmaOptions {
    pub instrument: Instrument,
    /// Upper limit on rewrites in one round.
    pub fuel: u64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions { instrument: Instrument::On, fuel: 50_000_000 }
    }
}

struct Round<'a> {
    net: &'a mut Net,
    level: usize,
    report: RoundReport,
    opts: SigmaOptions,
}

impl Round<'_> {
    fn record(&mut self, r: &Redex, pre: usize) {
        let post = self.net.size();
        let ordinal = self.report.trace.len() as u64;
        self.report.trace.push(StepRecord {
            ordinal,
            kind: r.kind,
            level: r.level,
            pre_size: pre,
            post_size: post,
        });
    }

    fn gc(&mut self) {
        for s in gc_fixpoint(self.net) {
            self.report.steps_gc += 1;
            let ordinal = self.report.trace.len() as u64;
            self.report.trace.push(StepRecord { ordinal, ..s });
        }
    }

    fn step(&mut self, r: &Redex) -> Result<(), MeasureError> {
        if self.report.trace.len() as u64 >= self.opts.fuel {
            return Err(MeasureError::OutOfFuel(self.opts.fuel));
        }
        let l = self.level;
        let before = (self.opts.instrument == Instrument::On).then(|| dims(self.net));
        // Weight of the contraction a duplication consumes.
        let dup_weight = match (r.kind, &before) {
            (RedexKind::Duplicate, Some(_)) => {
                let sub = self.net.at_path(&r.path);
                let crate::net::Link { dst: End::Port(c, _), .. } = sub.link(r.site) else { unreachable!() };
                Some(contraction_weight(sub, *c))
            }
            _ => None,
        };
        let pre = self.net.size();
        apply(self.net, r).expect("redex enumerated on the current net");
        self.record(r, pre);
        match r.kind {
            RedexKind::Duplicate => self.report.steps_p += 1,
            RedexKind::Shift => self.report.steps_s += 1,
            _ => self.report.steps_l += 1,
        }
        let Some(mu0) = before else { return Ok(()) };
        let mu1 = dims(self.net);
        let (g0, g1) = (gamma_of(&mu0, l), gamma_of(&mu1, l));
        let ordinal = self.report.trace.len() as u64 - 1;
        let mut fail = |law: &'static str| {
            self.report.law_violations.push(LawViolation {
                ordinal,
                kind: r.kind,
                law,
                before: g0.clone(),
                after: g1.clone(),
            })
        };
        if g1.lex_cmp(&g0) != Ordering::Less {
            fail("gamma strictly decreases");
        }
        let lo = l as i64 - 1;
        let (b0, b1) = (mu0.at(lo).b, mu1.at(lo).b);
        let (n0, n1) = (mu0.at(l as i64).n, mu1.at(l as i64).n);
        match r.kind {
            RedexKind::Shift => {
                if b1 + 1 != b0 {
                    fail("shift removes one box below");
                }
                if n1 != n0 {
                    fail("shift keeps n_l");
                }
            }
            RedexKind::Duplicate => {
                let w = dup_weight.expect("computed above");
                if b1 != b0 + 1 {
                    fail("duplication adds one box below");
                }
                if n1 > 2 * n0 {
                    fail("duplication at most doubles n_l");
                }
                if mu1.at(lo).c_at(w) + 1 != mu0.at(lo).c_at(w) {
                    fail("duplication consumes one contraction of its weight");
                }
                if w >= 1 && mu1.at(lo).c_at(w - 1) > mu0.at(lo).c_at(w - 1) + 1 {
                    fail("duplication adds at most one lighter contraction");
                }
                for i in l..mu0.levels.len().max(mu1.levels.len()) {
                    if mu1.at(i as i64).d() > 2 * mu0.at(i as i64).d() {
                        fail("duplication at most doubles d_i above");
                    }
                }
            }
            _ => {
                if n1 + 1 != n0 {
                    fail("linear step removes one node of n_l");
                }
            }
        }
        self.report.gamma_trace.push(g1);
        Ok(())
    }
}

/// One round of the strategy at level `l` on an `(l-1)`-normal net.
pub fn sigma_round(net: &mut Net, l: usize, opts: SigmaOptions) -> Result<RoundReport, MeasureError> {
    if l > 0 && !is_l_normal(net, l - 1) {
        return Err(MeasureError::NotNormalBelow(l));
    }
    let d_start = dims(net).total();
    let bound = 6 * (d_start as u128).pow(3);
    let report = RoundReport {
        level: l,
        steps_p: 0,
        steps_s: 0,
        steps_l: 0,
        steps_gc: 0,
        d_start,
        d_end: 0,
        bound_6d3: bound,
        within_bound: true,
        max_dim_after: 0,
        gamma_trace: vec![gamma(net, l)],
        law_violations: Vec::new(),
        trace: Vec::new(),
    };
    let mut round = Round { net, level: l, report, opts };
    round.gc();
    if l > 0 {
        while let Some(r) = find_redexes(round.net, l - 1, &[RedexKind::Duplicate]).into_iter().next() {
            round.step(&r)?;
        }
        round.gc();
    }
    loop {
        let mut rs = find_redexes(round.net, l, &RedexKind::LINEAR);
        if l > 0 {
            rs.extend(find_redexes(round.net, l - 1, &[RedexKind::Shift]));
        }
        let Some(r) = rs.into_iter().min_by_key(|r| r.site) else { break };
        round.step(&r)?;
    }
    round.gc();
    let mut report = round.report;
    let mu = dims(net);
    report.d_end = mu.total();
    report.max_dim_after = (l..mu.levels.len()).map(|i| mu.at(i as i64).d()).max().unwrap_or(0);
    report.within_bound = (report.counted_steps() as u128) <= bound;
    if !report.within_bound {
        return Err(MeasureError::BoundViolated {
            level: l,
            steps: report.counted_steps(),
            bound,
            d: d_start,
        });
    }
    if !is_l_normal(net, l) {
        return Err(MeasureError::NotNormalAfter(l));
    }
    Ok(report)
}

/// Runs rounds `0..=∂` until the net is normal.
pub fn normalize_sigma(net: &Net, opts: SigmaOptions) -> Result<(Net, Vec<RoundReport>), MeasureError> {
    let mut net = net.clone();
    let mut reports = Vec::new();
    let mut l = 0;
    while l <= net.depth() {
        reports.push(sigma_round(&mut net, l, opts)?);
        l += 1;
    }
    gc_fixpoint(&mut net);
    if !is_normal(&net) {
        return Err(MeasureError::NotNormal);
    }
    Ok((net, reports))
}

/// `6^{(3^∂-1)/2} · (D^{3^∂+1} - 1)/(D - 1)`, with `D ∈ {0, 1}` taken as the
/// limits of the geometric sum.
pub fn closed_form_bound(d: u64, depth: u32) -> BigUint {
    let three_k = 3u32.checked_pow(depth).expect("depth below 21");
    let six = BigUint::from(6u32).pow((three_k - 1) / 2);
    match d {
        0 => BigUint::zero(),
        1 => six * BigUint::from(three_k + 1),
        _ => {
            let dd = BigUint::from(d);
            let geom = (dd.pow(three_k + 1) - BigUint::one()) / (dd - BigUint::one());
            six * geom
        }
    }
}

/// Sum over all rounds of counted steps.
pub fn total_counted(reports: &[RoundReport]) -> u64 {
    reports.iter().map(RoundReport::counted_steps).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stdlib;
    use crate::term::{app, apps, bang, parse_term};
    use crate::translate::{decode_numeral, net_to_term, term_to_net};

    fn net_of(t: &crate::term::Term) -> Net {
        term_to_net(t).unwrap()
    }

    #[test]
    fn zero_dimensions() {
        let mu = dims(&net_of(&stdlib::numeral(0)));
        assert_eq!(mu.dims(), vec![2, 1]);
        assert_eq!(mu.total(), 3);
        assert_eq!(depth(&net_of(&stdlib::numeral(4))), 1);
        assert_eq!(depth(&Net::axiom()), 0);
        assert_eq!(mu.at(5), LevelDims::default());
        assert_eq!(mu.at(-1), LevelDims::default());
    }

    #[test]
    fn refined_counts_partition_dimension() {
        for d in stdlib::corpus() {
            let mu = dims(&net_of(&d.term));
            for l in &mu.levels {
                assert_eq!(l.n + l.b + l.c.values().sum::<u64>(), l.d());
            }
        }
    }

    #[test]
    fn weights_by_hand() {
        // Contraction on an input: weight 0.
        let n = net_of(&parse_term("f x x").unwrap());
        let w: Vec<u64> = weights(&n).values().map(|(_, w)| *w).collect();
        assert_eq!(w, vec![0]);
        // Contraction on a closed !-box: weight 1.
        let mut n = net_of(&parse_term("(\\x. $(~!x ~!x)) !(\\y. y)").unwrap());
        let r = find_redexes(&n, 0, &[RedexKind::Beta]);
        apply(&mut n, &r[0]).unwrap();
        let w: Vec<u64> = weights(&n).values().map(|(_, w)| *w).collect();
        assert_eq!(w, vec![1]);
        // !-box over a !-box through its door: weight 2.
        let mut n = net_of(&parse_term("\\z. (\\x. $(~!x ~!x)) !(~!(!(\\y. y)))").unwrap());
        let r = find_redexes(&n, 0, &[RedexKind::Beta]);
        apply(&mut n, &r[0]).unwrap();
        let w: Vec<u64> = weights(&n).values().map(|(_, w)| *w).collect();
        assert_eq!(w, vec![2]);
    }

    #[test]
    fn gamma_shapes() {
        let n = net_of(&stdlib::numeral(0));
        assert_eq!(gamma(&n, 0).components, vec![1]);
        assert_eq!(gamma(&n, 1).components, vec![1, 1]);
        let a = Gamma { level: 1, components: vec![1, 0, 3] };
        let b = Gamma { level: 1, components: vec![5, 9] };
        assert_eq!(a.lex_cmp(&b), Ordering::Greater);
    }

    #[test]
    fn normal_net_has_zero_gamma_work() {
        let n = net_of(&stdlib::numeral(3));
        let (out, reports) = normalize_sigma(&n, SigmaOptions::default()).unwrap();
        assert_eq!(total_counted(&reports), 0);
        assert_eq!(crate::net::canonical_form(&out), crate::net::canonical_form(&n));
        assert!(is_l_normal(&n, 1));
    }

    #[test]
    fn succ_one_rounds() {
        let t = app(stdlib::succ(), stdlib::numeral(1));
        let n = net_of(&t);
        assert!(!is_l_normal(&n, 0));
        let mut m = n.clone();
        let r0 = sigma_round(&mut m, 0, SigmaOptions::default()).unwrap();
        assert!(r0.steps_l >= 1);
        let r1 = sigma_round(&mut m, 1, SigmaOptions::default()).unwrap();
        assert!(r1.within_bound);
        assert_eq!(decode_numeral(&m), Some((2, 0)));
        assert!(matches!(
            sigma_round(&mut net_of(&t), 1, SigmaOptions::default()),
            Err(MeasureError::NotNormalBelow(1))
        ));
    }

    #[test]
    fn mult_needs_duplication() {
        let t = apps(stdlib::mult(), vec![stdlib::numeral(2), bang(stdlib::numeral(3))]);
        let (out, reports) = normalize_sigma(&net_of(&t), SigmaOptions::default()).unwrap();
        assert!(reports.iter().any(|r| r.steps_p >= 1 && r.within_bound));
        assert_eq!(decode_numeral(&out), Some((6, 1)));
    }

    #[test]
    fn coerc_two() {
        let t = app(stdlib::coerc(), stdlib::numeral(2));
        let (out, _) = normalize_sigma(&net_of(&t), SigmaOptions::default()).unwrap();
        let back = net_to_term(&out).unwrap();
        assert_eq!(crate::translate::decode_numeral_term(&back), Some((2, 1)));
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(closed_form_bound(3, 1), BigUint::from(240u32));
        assert!(closed_form_bound(2, 0) >= BigUint::from(2u32));
        assert_eq!(closed_form_bound(0, 3), BigUint::zero());
        assert_eq!(closed_form_bound(1, 0), BigUint::from(2u32));
        for d in 0..6 {
            for k in 0..3 {
                assert!(closed_form_bound(d, k) <= closed_form_bound(d + 1, k));
                assert!(closed_form_bound(d, k) <= closed_form_bound(d, k + 1));
            }
        }
    }
}

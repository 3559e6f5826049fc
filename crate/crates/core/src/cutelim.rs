//! Cut elimination on proof nets as local rewrites.
//!
//! A redex is identified by one link of some subnet: the cut between two
//! principal ports, a box conclusion plugged into a door, the wire into an
//! axiom, or the wire joining a weakening or a unit to the structure it
//! erases. Redexes are enumerated per level in ascending link order and are
//! revalidated when applied.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::formula::subst_type;
use crate::net::{End, Ids, LinkId, Mark, Net, NodeId, NodeKind, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RedexKind {
    Beta,
    TensorAnnih,
    ForallAnnih,
    Shift,
    Duplicate,
    GcAx,
    GcWeakBeta,
    GcWeakOther,
    GcUnit,
    GcBoxErase,
}

impl RedexKind {
    pub const ALL: [RedexKind; 10] = [
        RedexKind::Beta,
        RedexKind::TensorAnnih,
        RedexKind::ForallAnnih,
        RedexKind::Shift,
        RedexKind::Duplicate,
        RedexKind::GcAx,
        RedexKind::GcWeakBeta,
        RedexKind::GcWeakOther,
        RedexKind::GcUnit,
        RedexKind::GcBoxErase,
    ];
    pub const LINEAR: [RedexKind; 3] = [RedexKind::Beta, RedexKind::TensorAnnih, RedexKind::ForallAnnih];
    pub const GC: [RedexKind; 5] = [
        RedexKind::GcAx,
        RedexKind::GcWeakBeta,
        RedexKind::GcWeakOther,
        RedexKind::GcUnit,
        RedexKind::GcBoxErase,
    ];

    pub fn is_linear(self) -> bool {
        Self::LINEAR.contains(&self)
    }

    pub fn is_gc(self) -> bool {
        Self::GC.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            RedexKind::Beta => "Beta",
            RedexKind::TensorAnnih => "TensorAnnih",
            RedexKind::ForallAnnih => "ForallAnnih",
            RedexKind::Shift => "Shift",
            RedexKind::Duplicate => "Duplicate",
            RedexKind::GcAx => "GcAx",
            RedexKind::GcWeakBeta => "GcWeakBeta",
            RedexKind::GcWeakOther => "GcWeakOther",
            RedexKind::GcUnit => "GcUnit",
            RedexKind::GcBoxErase => "GcBoxErase",
        }
    }
}

impl fmt::Display for RedexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redex {
    pub kind: RedexKind,
    pub level: usize,
    /// Boxes enclosing the subnet that holds the site, outermost first.
    pub path: Vec<NodeId>,
    /// The link identifying the redex.
    pub site: LinkId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CutError {
    #[error("redex {kind} at link {site} no longer exists")]
    Stale { kind: RedexKind, site: LinkId },
    #[error("rule {0} cannot apply to a redex of kind {1}")]
    WrongRule(&'static str, RedexKind),
    #[error("reduction did not finish within {0} steps")]
    OutOfFuel(u64),
}

/// One rewrite in a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub ordinal: u64,
    pub kind: RedexKind,
    pub level: usize,
    pub pre_size: usize,
    pub post_size: usize,
}

impl StepRecord {
    pub const CSV_HEADER: &'static str = "ordinal,kind,level,pre_size,post_size";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.ordinal, self.kind, self.level, self.pre_size, self.post_size)
    }
}

pub fn trace_csv(records: &[StepRecord]) -> String {
    let mut s = String::from(StepRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

// ------------------------------------------------------------ detection

fn is_principal_out(kind: &NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::LolliR
            | NodeKind::TensorR
            | NodeKind::ForallR { .. }
            | NodeKind::BangBox(_)
            | NodeKind::ParBox(..)
    )
}

/// The redex carried by link `l` of `net`, if any.
pub fn classify_link(net: &Net, l: LinkId) -> Option<RedexKind> {
    use NodeKind as K;
    let link = net.links.get(&l)?;
    let End::Port(b, pb) = link.dst else {
        return None;
    };
    let dst_kind = &net.node(b).kind;
    if matches!(dst_kind, K::Ax) {
        return Some(RedexKind::GcAx);
    }
    let End::Port(a, pa) = link.src else {
        return None;
    };
    let src_kind = &net.node(a).kind;
    if matches!(src_kind, K::Unit) {
        return Some(if dst_kind.is_box() && pb > 0 { RedexKind::GcBoxErase } else { RedexKind::GcUnit });
    }
    if matches!(dst_kind, K::Weak) {
        return match (src_kind, pa) {
            (K::LolliR, 0) => Some(RedexKind::GcWeakBeta),
            (K::TensorR | K::ForallR { .. }, 0) => Some(RedexKind::GcWeakOther),
            (K::Contraction, 1 | 2) => Some(RedexKind::GcWeakOther),
            (K::BangBox(_) | K::ParBox(..), 0) => Some(RedexKind::GcBoxErase),
            _ => None,
        };
    }
    if pa != 0 || !is_principal_out(src_kind) {
        return None;
    }
    if pb > 0 {
        let mark = dst_kind.door_mark(pb)?;
        return match (src_kind, mark) {
            (K::BangBox(_), Mark::Bang) | (K::ParBox(..), Mark::Par) => Some(RedexKind::Shift),
            _ => None,
        };
    }
    match (src_kind, dst_kind) {
        (K::LolliR, K::LolliL) => Some(RedexKind::Beta),
        (K::TensorR, K::TensorL) => Some(RedexKind::TensorAnnih),
        (K::ForallR { .. }, K::ForallL { .. }) => Some(RedexKind::ForallAnnih),
        (K::BangBox(_), K::Contraction) => Some(RedexKind::Duplicate),
        _ => None,
    }
}

/// Redexes of the requested kinds whose site lies at level `l`, ordered by
/// ascending site link.
pub fn find_redexes(net: &Net, l: usize, kinds: &[RedexKind]) -> Vec<Redex> {
    let mut out = Vec::new();
    collect(net, l, kinds, &mut Vec::new(), &mut out);
    out.sort_by_key(|r| r.site);
    out
}

fn collect(net: &Net, l: usize, kinds: &[RedexKind], path: &mut Vec<NodeId>, out: &mut Vec<Redex>) {
    if path.len() == l {
        for id in net.links.keys() {
            if let Some(kind) = classify_link(net, *id) {
                if kinds.contains(&kind) {
                    out.push(Redex { kind, level: l, path: path.clone(), site: *id });
                }
            }
        }
        return;
    }
    for (id, n) in &net.nodes {
        if let Some(inner) = n.kind.inner() {
            path.push(*id);
            collect(inner, l, kinds, path, out);
            path.pop();
        }
    }
}

/// Every redex at every level.
pub fn all_redexes(net: &Net, kinds: &[RedexKind]) -> Vec<Redex> {
    let mut out = Vec::new();
    for (path, sub) in net.subnets() {
        for id in sub.links.keys() {
            if let Some(kind) = classify_link(sub, *id) {
                if kinds.contains(&kind) {
                    out.push(Redex { kind, level: path.len(), path: path.clone(), site: *id });
                }
            }
        }
    }
    out
}

pub fn is_normal(net: &Net) -> bool {
    all_redexes(net, &RedexKind::ALL).is_empty()
}

// ------------------------------------------------------------ rewriting

/// Id bookkeeping a local rewrite reports back for ∀ dashed sets.
#[derive(Default)]
struct Effects {
    renamed: Vec<(LinkId, LinkId)>,
    copied: BTreeMap<u32, u32>,
    relabel: Option<(BTreeSet<LinkId>, String, crate::formula::Formula)>,
    /// The instantiated conclusion of an annihilated ∀ pair; ∀R nodes whose
    /// dashed set holds it also govern the relabelled links.
    anchor: Option<LinkId>,
}

fn splice(net: &mut Net, fx: &mut Effects, into: LinkId, out_of: LinkId) {
    if let (kept, Some(gone)) = net.splice(into, out_of) {
        fx.renamed.push((gone, kept));
    }
}

/// Gives the producer of `l` a weakening, or drops `l` together with a unit
/// producer.
fn weaken_link(net: &mut Net, ids: &mut Ids, l: LinkId) {
    let src = net.link(l).src;
    if let End::Port(u, _) = src {
        if net.node(u).kind == NodeKind::Unit {
            net.remove_link(l);
            net.remove_node(u);
            return;
        }
    }
    let w = net.add_node(ids, NodeKind::Weak);
    net.set_dst(l, End::Port(w, 0));
}

/// Feeds the consumer of `l` from a unit, or drops `l` together with a
/// weakening consumer.
fn unit_link(net: &mut Net, ids: &mut Ids, l: LinkId) {
    let dst = net.link(l).dst;
    if let End::Port(w, _) = dst {
        if net.node(w).kind == NodeKind::Weak {
            net.remove_link(l);
            net.remove_node(w);
            return;
        }
    }
    let u = net.add_node(ids, NodeKind::Unit);
    net.set_src(l, End::Port(u, 0));
}

/// Removes node `x` and everything inside it; producers feeding `x` get
/// weakenings and consumers fed by `x` get units.
fn erase_node(net: &mut Net, ids: &mut Ids, x: NodeId) {
    let node = net.remove_node(x);
    let mut seen = BTreeSet::new();
    for (p, l) in node.ports.iter().enumerate() {
        if !seen.insert(*l) {
            continue;
        }
        let link = net.link(*l).clone();
        let here = End::Port(x, p as u8);
        let other = if link.src == here { link.dst } else { link.src };
        if matches!(other, End::Port(y, _) if y == x) {
            net.remove_link(*l);
        } else if link.dst == here {
            weaken_link(net, ids, *l);
        } else {
            unit_link(net, ids, *l);
        }
    }
}

fn endpoints(net: &Net, l: LinkId) -> (NodeId, NodeId) {
    let link = net.link(l);
    match (link.src, link.dst) {
        (End::Port(a, _), End::Port(b, _)) => (a, b),
        _ => unreachable!("classified redexes join two nodes"),
    }
}

fn rewrite(net: &mut Net, ids: &mut Ids, kind: RedexKind, site: LinkId) -> Effects {
    let mut fx = Effects::default();
    if kind == RedexKind::GcAx {
        let End::Port(b, _) = net.link(site).dst else { unreachable!() };
        let outb = net.port_link(b, 1);
        splice(net, &mut fx, site, outb);
        net.remove_node(b);
        return fx;
    }
    let (a, b) = endpoints(net, site);
    match kind {
        RedexKind::Beta | RedexKind::TensorAnnih => {
            // Beta: body → result and argument → variable.
            // Tensor: left → left and right → right.
            let pairs: [(u8, u8); 2] =
                if kind == RedexKind::Beta { [(1, 1), (0, 0)] } else { [(1, 1), (2, 2)] };
            for (pa, pb) in pairs {
                let (ina, outb) = if kind == RedexKind::Beta {
                    if pa == 1 && pb == 1 {
                        // argument of `b` into the variable of `a`
                        (net.port_link(b, 1), net.port_link(a, 2))
                    } else {
                        (net.port_link(a, 1), net.port_link(b, 2))
                    }
                } else {
                    (net.port_link(a, pa), net.port_link(b, pb))
                };
                splice(net, &mut fx, ina, outb);
            }
            net.remove_link(site);
            net.remove_node(a);
            net.remove_node(b);
        }
        RedexKind::ForallAnnih => {
            let (var, dashed) = match &net.node(a).kind {
                NodeKind::ForallR { var, dashed } => (var.clone(), dashed.clone()),
                _ => unreachable!(),
            };
            let witness = match &net.node(b).kind {
                NodeKind::ForallL { witness } => witness.clone(),
                _ => unreachable!(),
            };
            let (ina, outb) = (net.port_link(a, 1), net.port_link(b, 1));
            splice(net, &mut fx, ina, outb);
            net.remove_link(site);
            net.remove_node(a);
            net.remove_node(b);
            fx.relabel = Some((dashed, var, witness));
            fx.anchor = Some(outb);
        }
        RedexKind::Shift => shift(net, &mut fx, a, b, site),
        RedexKind::Duplicate => duplicate(net, ids, &mut fx, a, b, site),
        RedexKind::GcAx => unreachable!("handled above"),
        RedexKind::GcWeakOther if net.node(a).kind == NodeKind::Contraction => {
            let End::Port(_, p) = net.link(site).src else { unreachable!() };
            let (ina, other) = (net.port_link(a, 0), net.port_link(a, 3 - p));
            splice(net, &mut fx, ina, other);
            net.remove_link(site);
            net.remove_node(a);
            net.remove_node(b);
        }
        RedexKind::GcWeakBeta | RedexKind::GcWeakOther => erase_node(net, ids, a),
        RedexKind::GcUnit => erase_node(net, ids, b),
        RedexKind::GcBoxErase => {
            let x = if net.node(a).kind.is_box() && net.node(b).kind == NodeKind::Weak { a } else { b };
            erase_node(net, ids, x);
        }
    }
    fx
}

/// Moves box `a` (whose conclusion is cut with door `site` of box `b`) into `b`.
fn shift(net: &mut Net, fx: &mut Effects, a: NodeId, b: NodeId, site: LinkId) {
    let End::Port(_, door) = net.link(site).dst else { unreachable!() };
    let slot = door as usize - 1;
    let outer = net.remove_node(a);
    net.remove_link(site);
    let (inner_a, marks_a) = match outer.kind {
        NodeKind::BangBox(n) => {
            let k = n.inputs.len();
            (n, vec![Mark::Bang; k])
        }
        NodeKind::ParBox(n, m) => (n, m),
        _ => unreachable!(),
    };
    let k = inner_a.inputs.len();
    let doors_a: Vec<LinkId> = outer.ports[1..].to_vec();
    {
        let target = net.nodes.get_mut(&b).expect("box");
        let inner_b = target.kind.inner_mut().expect("box");
        let Net { nodes, links, root, inputs, .. } = *inner_a;
        inner_b.nodes.extend(nodes);
        inner_b.links.extend(links);
        let li = inner_b.inputs[slot];
        let (kept, gone) = inner_b.splice(root, li);
        if let Some(g) = gone {
            fx.renamed.push((g, kept));
        }
        inner_b.inputs.splice(slot..=slot, inputs);
        if let NodeKind::ParBox(_, marks) = &mut target.kind {
            marks.splice(slot..=slot, marks_a);
        }
        let mut ports = target.ports.clone();
        ports.splice(door as usize..=door as usize, doors_a.iter().copied());
        target.ports = ports;
    }
    // Renumber every door link of `b` after the splice point.
    let ports = net.node(b).ports.clone();
    for (p, l) in ports.iter().enumerate().skip(door as usize) {
        net.links.get_mut(l).expect("door link").dst = End::Port(b, p as u8);
    }
    debug_assert_eq!(net.node(b).ports.len(), net.node(b).kind.arity());
    let _ = k;
}

fn duplicate(net: &mut Net, ids: &mut Ids, fx: &mut Effects, a: NodeId, c: NodeId, site: LinkId) {
    let (o1, o2) = (net.port_link(c, 1), net.port_link(c, 2));
    let (copy, map) = net.clone_box(ids, a).expect("duplicated node is a !-box");
    fx.copied = map;
    splice(net, fx, site, o1);
    net.set_src(o2, End::Port(copy, 0));
    net.remove_node(c);
    if net.node(a).ports.len() == 2 {
        let d = net.port_link(a, 1);
        let nc = net.add_node(ids, NodeKind::Contraction);
        net.set_dst(d, End::Port(nc, 0));
        net.connect(ids, End::Port(nc, 1), End::Port(a, 1), None);
        net.connect(ids, End::Port(nc, 2), End::Port(copy, 1), None);
    }
}

/// Applies `r` to `net`; the redex must still be present.
pub fn apply(net: &mut Net, r: &Redex) -> Result<(), CutError> {
    let stale = CutError::Stale { kind: r.kind, site: r.site };
    let fx = {
        let present = |n: &Net| classify_link(n, r.site) == Some(r.kind);
        if r.path.is_empty() {
            if !present(net) {
                return Err(stale);
            }
            let mut ids = net.ids;
            let fx = rewrite(net, &mut ids, r.kind, r.site);
            net.ids = ids;
            fx
        } else {
            if !path_exists(net, &r.path) {
                return Err(stale);
            }
            let (sub, ids) = net.at_path_mut(&r.path);
            if !present(sub) {
                return Err(stale);
            }
            rewrite(sub, ids, r.kind, r.site)
        }
    };
    fix_dashed(net, fx);
    Ok(())
}

fn path_exists(net: &Net, path: &[NodeId]) -> bool {
    let mut cur = net;
    for id in path {
        match cur.nodes.get(id).and_then(|n| n.kind.inner()) {
            Some(inner) => cur = inner,
            None => return false,
        }
    }
    true
}

fn fix_dashed(net: &mut Net, fx: Effects) {
    if let Some((dashed, var, witness)) = &fx.relabel {
        let renamed: BTreeMap<LinkId, LinkId> = fx.renamed.iter().copied().collect();
        for l in dashed {
            let id = renamed.get(l).copied().unwrap_or(*l);
            if let Some(link) = net.find_link_mut(id) {
                if let Some(f) = &link.label {
                    link.label = Some(subst_type(f, var, witness));
                }
            }
        }
    }
    if !net.has_forall() {
        return;
    }
    if let (Some((dashed, _, _)), Some(anchor)) = (&fx.relabel, fx.anchor) {
        let renamed: BTreeMap<LinkId, LinkId> = fx.renamed.iter().copied().collect();
        let moved: Vec<LinkId> = dashed.iter().map(|l| renamed.get(l).copied().unwrap_or(*l)).collect();
        let labels: Vec<(LinkId, crate::formula::Formula)> = moved
            .iter()
            .filter_map(|l| net.find_link(*l).and_then(|k| k.label.clone()).map(|f| (*l, f)))
            .collect();
        adopt(net, anchor, &labels);
    }
    let live = net.all_link_ids();
    net.for_each_dashed_mut(&mut |d| {
        for (gone, kept) in &fx.renamed {
            if d.remove(gone) {
                d.insert(*kept);
            }
        }
        let extra: Vec<LinkId> = d.iter().filter_map(|l| fx.copied.get(l).copied()).collect();
        d.extend(extra);
        d.retain(|l| live.contains(l));
    });
}

/// Adds to every ∀R dashed set holding `anchor` the links whose label
/// mentions that node's variable.
fn adopt(net: &mut Net, anchor: LinkId, labels: &[(LinkId, crate::formula::Formula)]) {
    for n in net.nodes.values_mut() {
        match &mut n.kind {
            NodeKind::ForallR { var, dashed } if dashed.contains(&anchor) => {
                dashed.extend(labels.iter().filter(|(_, f)| f.occurs_free(var)).map(|(l, _)| *l));
            }
            NodeKind::BangBox(inner) | NodeKind::ParBox(inner, _) => adopt(inner, anchor, labels),
            _ => {}
        }
    }
}

fn check_kind(r: &Redex, allowed: &[RedexKind], rule: &'static str) -> Result<(), CutError> {
    if allowed.contains(&r.kind) {
        Ok(())
    } else {
        Err(CutError::WrongRule(rule, r.kind))
    }
}

pub fn apply_linear(net: &mut Net, r: &Redex) -> Result<(), CutError> {
    check_kind(r, &RedexKind::LINEAR, "linear")?;
    apply(net, r)
}

pub fn apply_shift(net: &mut Net, r: &Redex) -> Result<(), CutError> {
    check_kind(r, &[RedexKind::Shift], "shift")?;
    apply(net, r)
}

pub fn apply_duplicate(net: &mut Net, r: &Redex) -> Result<(), CutError> {
    check_kind(r, &[RedexKind::Duplicate], "duplicate")?;
    apply(net, r)
}

pub fn apply_gc(net: &mut Net, r: &Redex) -> Result<(), CutError> {
    check_kind(r, &RedexKind::GC, "garbage collection")?;
    apply(net, r)
}

/// Applies garbage collection until none is left; returns the steps taken.
pub fn gc_fixpoint(net: &mut Net) -> Vec<StepRecord> {
    let mut out = Vec::new();
    loop {
        let rs = all_redexes(net, &RedexKind::GC);
        let Some(r) = rs.into_iter().min_by_key(|r| (r.level, r.site)) else {
            return out;
        };
        let pre = net.size();
        apply(net, &r).expect("fresh redex");
        out.push(StepRecord {
            ordinal: out.len() as u64,
            kind: r.kind,
            level: r.level,
            pre_size: pre,
            post_size: net.size(),
        });
    }
}

/// Outcome of a full reduction.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub net: Net,
    pub trace: Vec<StepRecord>,
}

impl Normalized {
    /// Steps that count toward the polynomial budget.
    pub fn counted_steps(&self) -> usize {
        self.trace.iter().filter(|s| !s.kind.is_gc()).count()
    }
}

/// Reduces with the redex chosen by `pick` among all current redexes.
pub fn normalize_with(
    net: &Net,
    fuel: u64,
    mut pick: impl FnMut(&[Redex]) -> usize,
) -> Result<Normalized, CutError> {
    let mut net = net.clone();
    let mut trace = Vec::new();
    for ordinal in 0..fuel {
        let rs = all_redexes(&net, &RedexKind::ALL);
        if rs.is_empty() {
            return Ok(Normalized { net, trace });
        }
        let r = &rs[pick(&rs)];
        let pre = net.size();
        apply(&mut net, r)?;
        trace.push(StepRecord {
            ordinal,
            kind: r.kind,
            level: r.level,
            pre_size: pre,
            post_size: net.size(),
        });
    }
    if is_normal(&net) {
        Ok(Normalized { net, trace })
    } else {
        Err(CutError::OutOfFuel(fuel))
    }
}

/// Reduces, always picking the shallowest redex with the smallest site.
pub fn normalize_outermost(net: &Net, fuel: u64) -> Result<Normalized, CutError> {
    normalize_with(net, fuel, |rs| {
        (0..rs.len()).min_by_key(|&i| (rs[i].level, rs[i].site)).expect("nonempty")
    })
}

/// Reduces in a uniformly random order.
pub fn normalize_random(net: &Net, fuel: u64, rng: &mut impl Rng) -> Result<Normalized, CutError> {
    normalize_with(net, fuel, |rs| rng.gen_range(0..rs.len()))
}

/// Checks a rewrite kept the net well formed.
pub fn closure_violations(net: &Net) -> Vec<Violation> {
    net.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::canonical_form;
    use crate::stdlib;
    use crate::term::{alpha_eq, app, apps, bang, parse_term, reduce_term, Term};
    use crate::translate::{decode_numeral, net_to_term, term_to_net};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(s: &str) -> Net {
        term_to_net(&parse_term(s).unwrap()).unwrap()
    }

    fn kinds(rs: &[Redex]) -> Vec<RedexKind> {
        rs.iter().map(|r| r.kind).collect()
    }

    #[test]
    fn identity_applied_to_zero() {
        let mut n = term_to_net(&app(stdlib::identity(), stdlib::numeral(0))).unwrap();
        let rs = find_redexes(&n, 0, &RedexKind::ALL);
        assert_eq!(kinds(&rs), vec![RedexKind::Beta]);
        apply_linear(&mut n, &rs[0]).unwrap();
        assert_eq!(n.validate(), vec![]);
        gc_fixpoint(&mut n);
        let zero = term_to_net(&stdlib::numeral(0)).unwrap();
        assert_eq!(canonical_form(&n), canonical_form(&zero));
        assert!(matches!(apply_linear(&mut n, &rs[0]), Err(CutError::Stale { .. })));
    }

    #[test]
    fn tensor_swap() {
        let n = net("(\\x * y. y * x) (a * b)");
        let out = normalize_outermost(&n, 100).unwrap();
        assert_eq!(out.trace.iter().filter(|s| s.kind == RedexKind::TensorAnnih).count(), 1);
        let back = crate::translate::net_to_term_with_inputs(&out.net, &["a".into(), "b".into()]).unwrap();
        assert_eq!(back, parse_term("b * a").unwrap());
    }

    #[test]
    fn mult_has_duplication_before_any_step() {
        let n =
            term_to_net(&apps(stdlib::mult(), vec![stdlib::numeral(2), bang(stdlib::numeral(3))])).unwrap();
        let mut m = n.clone();
        // The duplication becomes visible once the arguments reach the contraction.
        let mut saw = false;
        for _ in 0..50 {
            let rs = all_redexes(&m, &RedexKind::ALL);
            if rs.iter().any(|r| r.kind == RedexKind::Duplicate) {
                saw = true;
                break;
            }
            let r = rs.iter().find(|r| r.kind.is_linear()).expect("progress").clone();
            apply(&mut m, &r).unwrap();
        }
        assert!(saw);
        let out = normalize_outermost(&n, 10_000).unwrap();
        assert_eq!(decode_numeral(&out.net), Some((6, 1)));
    }

    #[test]
    fn duplicate_of_closed_box_adds_no_contraction() {
        // `!(\y. y)` fed to a contraction through a doubled variable.
        let mut n = net("(\\x. $(~!x * ~!x)) !(\\y. y)");
        let b = find_redexes(&n, 0, &RedexKind::ALL);
        apply(&mut n, &b[0]).unwrap();
        let rs = find_redexes(&n, 0, &[RedexKind::Duplicate]);
        assert_eq!(rs.len(), 1);
        let contractions = |n: &Net| {
            n.subnets()
                .iter()
                .map(|(_, s)| s.nodes.values().filter(|m| m.kind == NodeKind::Contraction).count())
                .sum::<usize>()
        };
        let before = contractions(&n);
        apply_duplicate(&mut n, &rs[0]).unwrap();
        assert_eq!(n.validate(), vec![]);
        assert_eq!(contractions(&n), before - 1);
    }

    #[test]
    fn duplicate_of_open_box_adds_one_contraction() {
        let mut n = net("\\z. (\\x. $(~!x * ~!x)) !(~!z)");
        let b = find_redexes(&n, 1, &[RedexKind::Beta]);
        assert!(b.is_empty());
        let b = find_redexes(&n, 0, &[RedexKind::Beta]);
        apply(&mut n, &b[0]).unwrap();
        let rs = find_redexes(&n, 0, &[RedexKind::Duplicate]);
        let count = |n: &Net| n.nodes.values().filter(|m| m.kind == NodeKind::Contraction).count();
        let before = count(&n);
        apply_duplicate(&mut n, &rs[0]).unwrap();
        assert_eq!(n.validate(), vec![]);
        // The old contraction is consumed and one appears on the door.
        assert_eq!(count(&n), before);
    }

    #[test]
    fn shift_chain_takes_two_steps() {
        for src in ["\\z. $(~$($(~$($(~$z)))))", "\\z. $((\\a. a) ~$$((\\b. b) ~$$(~$z)))"] {
            let mut m = net(src);
            let mut shifts = 0;
            while let Some(r) = all_redexes(&m, &[RedexKind::Shift]).first().cloned() {
                apply_shift(&mut m, &r).unwrap();
                assert_eq!(m.validate(), vec![]);
                shifts += 1;
            }
            assert_eq!(shifts, 2, "{src}");
            assert_eq!(m.nodes.values().filter(|n| n.kind.is_box()).count(), 1);
        }
    }

    #[test]
    fn shift_keeps_marks() {
        let mut n = net("\\f y. $(~!(!(~!f)) ~$y)");
        let rs = all_redexes(&n, &[RedexKind::Shift]);
        assert_eq!(rs.len(), 1);
        let b_before = n.nodes.values().filter(|m| m.kind.is_box()).count();
        apply_shift(&mut n, &rs[0]).unwrap();
        assert_eq!(n.validate(), vec![]);
        assert_eq!(n.nodes.values().filter(|m| m.kind.is_box()).count(), b_before - 1);
        // f now enters through the inherited `!̄` door.
        let back = net_to_term(&n).unwrap();
        assert!(alpha_eq(&back, &parse_term("\\f y. $(~!f ~$y)").unwrap()), "{back}");
    }

    #[test]
    fn weakened_zero_is_erased() {
        let mut n = net("(\\x y. y) (\\x. $(\\y. y))");
        let r = find_redexes(&n, 0, &[RedexKind::Beta]);
        apply(&mut n, &r[0]).unwrap();
        let steps = gc_fixpoint(&mut n);
        assert!(steps.iter().all(|s| s.post_size < s.pre_size));
        assert_eq!(n.size(), 1);
        assert_eq!(net_to_term(&n).unwrap().to_string(), "\\x1. x1");
    }

    #[test]
    fn axiom_chain_collapses() {
        let mut n = Net::axiom();
        let mut ids = n.ids;
        let ax2 = n.add_node(&mut ids, NodeKind::Ax);
        let r = n.root;
        n.set_dst(r, End::Port(ax2, 0));
        n.connect(&mut ids, End::Port(ax2, 1), End::Root, None);
        n.ids = ids;
        assert_eq!(n.validate(), vec![]);
        let steps = gc_fixpoint(&mut n);
        assert_eq!(steps.len(), 2);
        assert_eq!(n.nodes.len(), 0);
    }

    #[test]
    fn random_orders_agree_with_term_engine() {
        let cases: Vec<Term> = vec![
            app(stdlib::succ(), stdlib::numeral(2)),
            apps(stdlib::sum(), vec![stdlib::numeral(2), stdlib::numeral(1)]),
            app(stdlib::pred(), stdlib::numeral(3)),
            app(stdlib::coerc(), stdlib::numeral(2)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for t in cases {
            let want = reduce_term(&t, 100_000).unwrap().term;
            let n = term_to_net(&t).unwrap();
            let mut forms = BTreeSet::new();
            for _ in 0..4 {
                let out = normalize_random(&n, 100_000, &mut rng).unwrap();
                assert_eq!(out.net.validate(), vec![]);
                let back = net_to_term(&out.net).unwrap();
                assert!(alpha_eq(&back, &want), "{t}: {back} vs {want}");
                forms.insert(canonical_form(&out.net));
            }
            assert_eq!(forms.len(), 1, "{t}");
        }
    }

    #[test]
    fn every_step_preserves_validity() {
        let t = apps(stdlib::mult(), vec![stdlib::numeral(2), bang(stdlib::numeral(2))]);
        let mut n = term_to_net(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        loop {
            let rs = all_redexes(&n, &RedexKind::ALL);
            if rs.is_empty() {
                break;
            }
            let r = rs[rng.gen_range(0..rs.len())].clone();
            let (pre, raw) = (n.size(), n.raw_size());
            apply(&mut n, &r).unwrap();
            assert_eq!(closure_violations(&n), vec![], "after {:?}", r.kind);
            if r.kind.is_gc() {
                assert!(n.size() < pre);
                assert!(n.raw_size() <= raw);
            }
        }
        assert_eq!(decode_numeral(&n), Some((4, 1)));
    }

    #[test]
    fn trace_csv_shape() {
        let n = term_to_net(&app(stdlib::succ(), stdlib::numeral(1))).unwrap();
        let out = normalize_outermost(&n, 1000).unwrap();
        let csv = trace_csv(&out.trace);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(StepRecord::CSV_HEADER));
        let ords: Vec<u64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(ords.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(decode_numeral(&out.net), Some((2, 0)));
    }
}

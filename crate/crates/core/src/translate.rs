//! Translation of Λ terms into proof nets and readback of nets into terms.
//!
//! Contractions are placed as deep as the door marks allow. Occurrences of a
//! variable that enter a box through `§̄` doors, or through the only door of
//! a !-box, share one door and are contracted inside the box. Occurrences
//! entering a §-box through `!̄` doors keep one door each and are contracted
//! outside. A variable with `k ≥ 2` uses at one place gets a right comb of
//! `k - 1` binary contractions; an unused one gets a weakening.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::net::{End, Ids, Mark, Net, NodeId, NodeKind, DANGLING};
use crate::term::{free_vars, Pattern, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("door `{0}` is not inside any box")]
    DoorOutsideBox(String),
    #[error("`§̄` door inside a !-box: `{0}`")]
    ParDoorInBangBox(String),
    #[error("!-box `{0}` needs {1} doors; at most one is allowed")]
    BangArity(String, usize),
    #[error("variable `{0}` is used inside a box it does not enter through a door")]
    VariableCrossesBox(String),
    #[error("door on variable `{0}`, which is bound inside the box")]
    DoorOnInnerVariable(String),
    #[error("free variable `{0}` is not among the declared inputs")]
    Unbound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadbackError {
    #[error("the net contains a {0} node on the path from the root")]
    Unreadable(&'static str),
    #[error("a tensor elimination is not directly under an abstraction")]
    DetachedTensorL,
    #[error("the net is not well formed: {0}")]
    Malformed(String),
}

type BoxNo = usize;
type OccNo = usize;
type BinderNo = usize;

/// Step of an occurrence path: how a variable enters one box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Shared(BoxNo),
    Separate(BoxNo, OccNo),
}

impl Key {
    fn box_no(self) -> BoxNo {
        match self {
            Key::Shared(b) | Key::Separate(b, _) => b,
        }
    }
}

/// Uses of one binder, grouped by the boxes they enter.
#[derive(Debug, Default)]
struct Trie {
    plain: usize,
    children: BTreeMap<Key, Trie>,
}

impl Trie {
    fn uses(&self) -> usize {
        self.plain + self.children.len()
    }
}

/// Peels a chain of doors ending in a variable, outermost door first.
fn var_chain(m: &Term) -> Option<(Vec<Mark>, &str)> {
    let mut marks = Vec::new();
    let mut cur = m;
    loop {
        match cur {
            Term::BangDoor(_) => marks.push(Mark::Bang),
            Term::ParDoor(_) => marks.push(Mark::Par),
            Term::Var(x) => return Some((marks, x)),
            _ => return None,
        }
        cur = match cur {
            Term::BangDoor(n) | Term::ParDoor(n) => n,
            _ => unreachable!(),
        };
    }
}

// ------------------------------------------------------------ analysis

struct Analysis {
    tries: Vec<Trie>,
    occurrences: Vec<(BinderNo, Vec<Key>)>,
}

struct Analyzer {
    env: Vec<(String, BinderNo, usize)>,
    /// Enclosing boxes, outermost first: number and whether it is a !-box.
    boxes: Vec<(BoxNo, bool)>,
    /// Doors required by each box so far.
    doors: Vec<usize>,
    next_box: BoxNo,
    next_binder: BinderNo,
    tries: Vec<Trie>,
    occurrences: Vec<(BinderNo, Vec<Key>)>,
}

impl Analyzer {
    fn bind(&mut self, p: &Pattern) -> usize {
        let mut n = 0;
        for x in p.vars() {
            let b = self.next_binder;
            self.next_binder += 1;
            self.tries.push(Trie::default());
            self.env.push((x, b, self.boxes.len()));
            n += 1;
        }
        n
    }

    fn visit(&mut self, m: &Term) -> Result<(), TranslateError> {
        match m {
            Term::Var(_) | Term::BangDoor(_) | Term::ParDoor(_) if var_chain(m).is_some() => {
                let (marks, x) = var_chain(m).expect("checked");
                self.occurrence(m, &marks, x)
            }
            Term::Var(_) => unreachable!("variables are chains"),
            Term::BangDoor(n) | Term::ParDoor(n) => {
                let mark = if matches!(m, Term::BangDoor(_)) { Mark::Bang } else { Mark::Par };
                let Some((b, bang)) = self.boxes.pop() else {
                    return Err(TranslateError::DoorOutsideBox(m.to_string()));
                };
                if bang && mark == Mark::Par {
                    return Err(TranslateError::ParDoorInBangBox(m.to_string()));
                }
                self.doors[b] += 1;
                let r = self.visit(n);
                self.boxes.push((b, bang));
                r
            }
            Term::Lam(p, body) => {
                let k = self.bind(p);
                let r = self.visit(body);
                self.env.truncate(self.env.len() - k);
                r
            }
            Term::App(a, b) | Term::Tensor(a, b) => {
                self.visit(a)?;
                self.visit(b)
            }
            Term::BangBox(n) | Term::ParBox(n) => {
                let bang = matches!(m, Term::BangBox(_));
                let b = self.next_box;
                self.next_box += 1;
                self.doors.push(0);
                self.boxes.push((b, bang));
                self.visit(n)?;
                self.boxes.pop();
                if bang && self.doors[b] > 1 {
                    return Err(TranslateError::BangArity(m.to_string(), self.doors[b]));
                }
                Ok(())
            }
        }
    }

    fn occurrence(&mut self, m: &Term, marks: &[Mark], x: &str) -> Result<(), TranslateError> {
        let occ = self.occurrences.len();
        let depth = self.boxes.len();
        if marks.len() > depth {
            return Err(TranslateError::DoorOutsideBox(m.to_string()));
        }
        let &(_, binder, level) = self
            .env
            .iter()
            .rev()
            .find(|(y, _, _)| y == x)
            .ok_or_else(|| TranslateError::Unbound(x.to_string()))?;
        let target = depth - marks.len();
        if level < target {
            return Err(TranslateError::VariableCrossesBox(x.to_string()));
        }
        if level > target {
            return Err(TranslateError::DoorOnInnerVariable(x.to_string()));
        }
        // The outermost door crosses the innermost box; build keys outermost box first.
        let mut keys = Vec::new();
        for (i, mark) in marks.iter().rev().enumerate() {
            let (b, bang) = self.boxes[target + i];
            if bang && *mark == Mark::Par {
                return Err(TranslateError::ParDoorInBangBox(m.to_string()));
            }
            keys.push(if bang || *mark == Mark::Par { Key::Shared(b) } else { Key::Separate(b, occ) });
        }
        let mut t = &mut self.tries[binder];
        for k in &keys {
            if !t.children.contains_key(k) {
                self.doors[k.box_no()] += 1;
            }
            t = t.children.entry(*k).or_default();
        }
        t.plain += 1;
        self.occurrences.push((binder, keys));
        Ok(())
    }
}

fn analyze(m: &Term, inputs: &[String]) -> Result<Analysis, TranslateError> {
    let mut a = Analyzer {
        env: Vec::new(),
        boxes: Vec::new(),
        doors: Vec::new(),
        next_box: 0,
        next_binder: 0,
        tries: Vec::new(),
        occurrences: Vec::new(),
    };
    for x in inputs {
        a.bind(&Pattern::Var(x.clone()));
    }
    a.visit(m)?;
    Ok(Analysis { tries: a.tries, occurrences: a.occurrences })
}

// ------------------------------------------------------------ construction

/// A producer inside one frame.
#[derive(Debug, Clone, Copy)]
enum Src {
    Port(NodeId, u8),
    Input(usize),
}

struct Frame {
    net: Net,
    parent: Option<usize>,
    bang: bool,
    doors: Vec<(Src, Mark)>,
}

struct Supply {
    frame: usize,
    pending: VecDeque<Src>,
    children: BTreeMap<Key, usize>,
}

struct Builder<'a> {
    ids: Ids,
    frames: Vec<Frame>,
    analysis: &'a Analysis,
    supplies: Vec<Supply>,
    /// Root supply of each binder.
    roots: Vec<usize>,
    /// Live box number → frame.
    box_frames: BTreeMap<BoxNo, usize>,
    next_box: BoxNo,
    next_occ: OccNo,
    next_binder: BinderNo,
}

impl Builder<'_> {
    fn link(&mut self, frame: usize, src: Src, dst: End) {
        let net = &mut self.frames[frame].net;
        let (end, input) = match src {
            Src::Port(n, p) => (End::Port(n, p), None),
            Src::Input(i) => (End::Input, Some(i)),
        };
        let l = net.connect(&mut self.ids, end, dst, None);
        if let Some(i) = input {
            net.inputs[i] = l;
        }
    }

    fn node(&mut self, frame: usize, kind: NodeKind) -> NodeId {
        self.frames[frame].net.add_node(&mut self.ids, kind)
    }

    /// A supply of `uses` copies of `src`.
    fn supply(&mut self, frame: usize, src: Src, uses: usize) -> usize {
        let mut pending = VecDeque::new();
        match uses {
            0 => {
                let w = self.node(frame, NodeKind::Weak);
                self.link(frame, src, End::Port(w, 0));
            }
            _ => {
                let mut cur = src;
                for _ in 1..uses {
                    let c = self.node(frame, NodeKind::Contraction);
                    self.link(frame, cur, End::Port(c, 0));
                    pending.push_back(Src::Port(c, 1));
                    cur = Src::Port(c, 2);
                }
                pending.push_back(cur);
            }
        }
        self.supplies.push(Supply { frame, pending, children: BTreeMap::new() });
        self.supplies.len() - 1
    }

    fn bind(&mut self, frame: usize, p: &Pattern, src: Src) {
        match p {
            Pattern::Var(_) => {
                let b = self.next_binder;
                self.next_binder += 1;
                let uses = self.analysis.tries[b].uses();
                let s = self.supply(frame, src, uses);
                self.roots.push(s);
            }
            Pattern::Tensor(l, r) => {
                let t = self.node(frame, NodeKind::TensorL);
                self.link(frame, src, End::Port(t, 0));
                self.bind(frame, l, Src::Port(t, 1));
                self.bind(frame, r, Src::Port(t, 2));
            }
        }
    }

    fn take(&mut self, s: usize) -> Src {
        self.supplies[s].pending.pop_front().expect("analysis counted every use")
    }

    /// Adds a door to the box under construction in `frame`; returns the
    /// matching inner input.
    fn door(&mut self, frame: usize, outer: Src, mark: Mark) -> Src {
        let f = &mut self.frames[frame];
        f.doors.push((outer, mark));
        f.net.inputs.push(DANGLING);
        Src::Input(f.net.inputs.len() - 1)
    }

    fn occurrence(&mut self, frame: usize) -> Src {
        let occ = self.next_occ;
        self.next_occ += 1;
        let (binder, keys) = &self.analysis.occurrences[occ];
        let mut s = self.roots[*binder];
        let mut trie = &self.analysis.tries[*binder];
        for (i, k) in keys.iter().enumerate() {
            trie = &trie.children[k];
            if let Some(&c) = self.supplies[s].children.get(k) {
                s = c;
                continue;
            }
            let box_frame = self.box_frames[&k.box_no()];
            let outer = self.take(s);
            let mark = chain_mark(self.analysis, *binder, &keys[..=i], k, self.frames[box_frame].bang);
            let inner = self.door(box_frame, outer, mark);
            let c = self.supply(box_frame, inner, trie.uses());
            self.supplies[s].children.insert(*k, c);
            s = c;
        }
        debug_assert_eq!(self.supplies[s].frame, frame);
        self.take(s)
    }

    fn tr(&mut self, frame: usize, m: &Term) -> Src {
        if var_chain(m).is_some() {
            return self.occurrence(frame);
        }
        match m {
            Term::Var(_) => unreachable!("variables are chains"),
            Term::BangDoor(n) | Term::ParDoor(n) => {
                let mark = if matches!(m, Term::BangDoor(_)) { Mark::Bang } else { Mark::Par };
                let parent = self.frames[frame].parent.expect("analysis checked doors");
                let outer = self.tr(parent, n);
                self.door(frame, outer, mark)
            }
            Term::Lam(p, body) => {
                let lr = self.node(frame, NodeKind::LolliR);
                self.bind(frame, p, Src::Port(lr, 2));
                let b = self.tr(frame, body);
                self.link(frame, b, End::Port(lr, 1));
                Src::Port(lr, 0)
            }
            Term::App(f, a) => {
                let sf = self.tr(frame, f);
                let sa = self.tr(frame, a);
                let ll = self.node(frame, NodeKind::LolliL);
                self.link(frame, sf, End::Port(ll, 0));
                self.link(frame, sa, End::Port(ll, 1));
                Src::Port(ll, 2)
            }
            Term::Tensor(a, b) => {
                let sa = self.tr(frame, a);
                let sb = self.tr(frame, b);
                let t = self.node(frame, NodeKind::TensorR);
                self.link(frame, sa, End::Port(t, 1));
                self.link(frame, sb, End::Port(t, 2));
                Src::Port(t, 0)
            }
            Term::BangBox(body) | Term::ParBox(body) => {
                let bang = matches!(m, Term::BangBox(_));
                let b = self.next_box;
                self.next_box += 1;
                self.frames.push(Frame { net: Net::empty(), parent: Some(frame), bang, doors: Vec::new() });
                let inner_frame = self.frames.len() - 1;
                self.box_frames.insert(b, inner_frame);
                let r = self.tr(inner_frame, body);
                self.link(inner_frame, r, End::Root);
                self.box_frames.remove(&b);
                let f = self.frames.pop().expect("box frame");
                debug_assert_eq!(self.frames.len(), inner_frame);
                let (marks, srcs): (Vec<Mark>, Vec<Src>) = f.doors.iter().map(|(s, mk)| (*mk, *s)).unzip();
                let kind = if bang {
                    NodeKind::BangBox(Box::new(f.net))
                } else {
                    NodeKind::ParBox(Box::new(f.net), marks)
                };
                let id = self.node(frame, kind);
                for (i, s) in srcs.into_iter().enumerate() {
                    self.link(frame, s, End::Port(id, 1 + i as u8));
                }
                Src::Port(id, 0)
            }
        }
    }
}

/// The mark of the door a variable takes into a box: a shared §-box door is
/// `§̄`, a separate one `!̄`, and !-box doors are `!̄`.
fn chain_mark(_a: &Analysis, _b: BinderNo, _prefix: &[Key], k: &Key, bang: bool) -> Mark {
    match (bang, k) {
        (true, _) => Mark::Bang,
        (false, Key::Shared(_)) => Mark::Par,
        (false, Key::Separate(..)) => Mark::Bang,
    }
}

/// Translates a term whose free variables become the net inputs in
/// alphabetical order.
pub fn term_to_net(m: &Term) -> Result<Net, TranslateError> {
    let inputs: Vec<String> = free_vars(m).into_iter().collect();
    term_to_net_with_inputs(m, &inputs)
}

/// Translates a term with the given input order; every free variable must
/// be listed.
pub fn term_to_net_with_inputs(m: &Term, inputs: &[String]) -> Result<Net, TranslateError> {
    let analysis = analyze(m, inputs)?;
    let mut top = Net::empty();
    top.inputs = vec![DANGLING; inputs.len()];
    let mut b = Builder {
        ids: Ids(0),
        frames: vec![Frame { net: top, parent: None, bang: false, doors: Vec::new() }],
        analysis: &analysis,
        supplies: Vec::new(),
        roots: Vec::new(),
        box_frames: BTreeMap::new(),
        next_box: 0,
        next_occ: 0,
        next_binder: 0,
    };
    for (i, x) in inputs.iter().enumerate() {
        b.bind(0, &Pattern::Var(x.clone()), Src::Input(i));
    }
    let r = b.tr(0, m);
    b.link(0, r, End::Root);
    let ids = b.ids;
    let mut net = b.frames.pop().expect("top frame").net;
    net.ids = ids;
    Ok(net)
}

// ------------------------------------------------------------ readback

struct Reader<'a> {
    names: BTreeMap<(usize, NodeId, u8), String>,
    used: BTreeSet<String>,
    counter: usize,
    /// Nets on the current box path with their level key.
    _marker: std::marker::PhantomData<&'a ()>,
}

/// Where a net sits: its inputs read back as these terms.
struct Ctx<'a> {
    net: &'a Net,
    key: usize,
    inputs: Vec<Term>,
}

impl<'a> Reader<'a> {
    fn fresh(&mut self, base: &str) -> String {
        loop {
            self.counter += 1;
            let n = format!("{base}{}", self.counter);
            if self.used.insert(n.clone()) {
                return n;
            }
        }
    }

    fn pattern(&mut self, ctx: &Ctx<'a>, node: NodeId, port: u8) -> Result<Pattern, ReadbackError> {
        if let End::Port(t, 0) = ctx.net.opposite(node, port) {
            if ctx.net.node(t).kind == NodeKind::TensorL {
                let l = self.pattern(ctx, t, 1)?;
                let r = self.pattern(ctx, t, 2)?;
                return Ok(Pattern::tensor(l, r));
            }
        }
        let name = self.fresh("x");
        self.names.insert((ctx.key, node, port), name.clone());
        Ok(Pattern::Var(name))
    }

    fn read_end(&mut self, ctx: &Ctx<'a>, end: End, link: crate::net::LinkId) -> Result<Term, ReadbackError> {
        match end {
            End::Input => {
                let i = ctx
                    .net
                    .inputs
                    .iter()
                    .position(|l| *l == link)
                    .ok_or_else(|| ReadbackError::Malformed("unregistered input".into()))?;
                Ok(ctx.inputs[i].clone())
            }
            End::Root => Err(ReadbackError::Malformed("root used as a producer".into())),
            End::Port(n, p) => self.read_port(ctx, n, p),
        }
    }

    fn read_in(&mut self, ctx: &Ctx<'a>, node: NodeId, port: u8) -> Result<Term, ReadbackError> {
        let l = ctx.net.port_link(node, port);
        let src = ctx.net.link(l).src;
        self.read_end(ctx, src, l)
    }

    fn read_port(&mut self, ctx: &Ctx<'a>, n: NodeId, p: u8) -> Result<Term, ReadbackError> {
        let node = ctx.net.node(n);
        match (&node.kind, p) {
            (NodeKind::LolliR, 0) => {
                let pat = self.pattern(ctx, n, 2)?;
                let body = self.read_in(ctx, n, 1)?;
                Ok(Term::Lam(pat, Box::new(body)))
            }
            (NodeKind::LolliR, _) | (NodeKind::TensorL, _) => match self.names.get(&(ctx.key, n, p)) {
                Some(x) => Ok(Term::Var(x.clone())),
                None => Err(ReadbackError::DetachedTensorL),
            },
            (NodeKind::LolliL, _) => {
                let f = self.read_in(ctx, n, 0)?;
                let a = self.read_in(ctx, n, 1)?;
                Ok(Term::App(Box::new(f), Box::new(a)))
            }
            (NodeKind::TensorR, _) => {
                let a = self.read_in(ctx, n, 1)?;
                let b = self.read_in(ctx, n, 2)?;
                Ok(Term::Tensor(Box::new(a), Box::new(b)))
            }
            (NodeKind::Contraction, _) | (NodeKind::Ax, _) => self.read_in(ctx, n, 0),
            (NodeKind::BangBox(inner), _) | (NodeKind::ParBox(inner, _), _) => {
                let mut doors = Vec::new();
                for i in 0..inner.inputs.len() {
                    let outer = self.read_in(ctx, n, 1 + i as u8)?;
                    let mark = node.kind.door_mark(1 + i as u8).expect("door");
                    doors.push(match mark {
                        Mark::Bang => Term::BangDoor(Box::new(outer)),
                        Mark::Par => Term::ParDoor(Box::new(outer)),
                    });
                }
                let inner_ctx = Ctx { net: inner, key: n as usize + 1, inputs: doors };
                let body = self.read_in_root(&inner_ctx)?;
                Ok(match node.kind {
                    NodeKind::BangBox(_) => Term::BangBox(Box::new(body)),
                    _ => Term::ParBox(Box::new(body)),
                })
            }
            (k, _) => Err(ReadbackError::Unreadable(k.tag())),
        }
    }

    fn read_in_root(&mut self, ctx: &Ctx<'a>) -> Result<Term, ReadbackError> {
        let l = ctx.net.root;
        let src = ctx.net.link(l).src;
        self.read_end(ctx, src, l)
    }
}

/// Reads a net back as a term; `names` name the inputs in order.
pub fn net_to_term_with_inputs(net: &Net, names: &[String]) -> Result<Term, ReadbackError> {
    if names.len() != net.inputs.len() {
        return Err(ReadbackError::Malformed(format!(
            "{} names for {} inputs",
            names.len(),
            net.inputs.len()
        )));
    }
    let mut r = Reader {
        names: BTreeMap::new(),
        used: names.iter().cloned().collect(),
        counter: 0,
        _marker: std::marker::PhantomData,
    };
    let ctx = Ctx { net, key: 0, inputs: names.iter().map(|x| Term::Var(x.clone())).collect() };
    r.read_in_root(&ctx)
}

/// Reads a net back as a term, naming inputs `i0, i1, …`.
pub fn net_to_term(net: &Net) -> Result<Term, ReadbackError> {
    let names: Vec<String> = (0..net.inputs.len()).map(|i| format!("i{i}")).collect();
    net_to_term_with_inputs(net, &names)
}

/// Reads `§ᵏ n̄` off a term: returns `(n, k)`.
pub fn decode_numeral_term(t: &Term) -> Option<(usize, usize)> {
    let mut k = 0;
    let mut cur = t;
    while let Term::ParBox(m) = cur {
        k += 1;
        cur = m;
    }
    let Term::Lam(Pattern::Var(x), body) = cur else { return None };
    let Term::ParBox(inner) = &**body else { return None };
    let Term::Lam(Pattern::Var(y), chain) = &**inner else { return None };
    if x == y {
        return None;
    }
    let mut n = 0;
    let mut cur = &**chain;
    loop {
        match cur {
            Term::Var(v) if v == y => return Some((n, k)),
            Term::App(f, a) if matches!(&**f, Term::BangDoor(d) if matches!(&**d, Term::Var(v) if v == x)) => {
                n += 1;
                cur = a;
            }
            _ => return None,
        }
    }
}

/// Reads `§ᵏ n̄` off a normal net.
pub fn decode_numeral(net: &Net) -> Option<(usize, usize)> {
    decode_numeral_term(&net_to_term(net).ok()?)
}

/// Reads a tape `§ᵏ(λb0 b1. §(λx. !̄χ₁(… (!̄χₚ x))))` off a term: returns the
/// bits and `k`.
pub fn decode_tape_term(t: &Term) -> Option<(Vec<u8>, usize)> {
    let mut k = 0;
    let mut cur = t;
    while let Term::ParBox(m) = cur {
        k += 1;
        cur = m;
    }
    let Term::Lam(Pattern::Var(z), body) = cur else { return None };
    let Term::Lam(Pattern::Var(o), body) = &**body else { return None };
    let Term::ParBox(inner) = &**body else { return None };
    let Term::Lam(Pattern::Var(x), chain) = &**inner else { return None };
    if z == o || x == z || x == o {
        return None;
    }
    let mut bits = Vec::new();
    let mut cur = &**chain;
    loop {
        match cur {
            Term::Var(v) if v == x => return Some((bits, k)),
            Term::App(f, a) => {
                let Term::BangDoor(d) = &**f else { return None };
                let Term::Var(v) = &**d else { return None };
                bits.push(if v == z {
                    0
                } else if v == o {
                    1
                } else {
                    return None;
                });
                cur = a;
            }
            _ => return None,
        }
    }
}

pub fn decode_tape(net: &Net) -> Option<(Vec<u8>, usize)> {
    decode_tape_term(&net_to_term(net).ok()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::canonical_form;
    use crate::stdlib;
    use crate::term::{alpha_eq, parse_term};

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn kinds(net: &Net, level: usize) -> Vec<&'static str> {
        let mut v: Vec<&'static str> = net
            .nodes_at_level(level)
            .unwrap()
            .into_iter()
            .map(|id| {
                let mut found = "";
                net.for_each_net_at(level, &mut |n| {
                    if let Some(node) = n.nodes.get(&id) {
                        found = node.kind.tag();
                    }
                });
                found
            })
            .collect();
        v.sort_unstable();
        v
    }

    fn count(net: &Net, tag: &str) -> usize {
        net.subnets().iter().map(|(_, n)| n.nodes.values().filter(|m| m.kind.tag() == tag).count()).sum()
    }

    #[test]
    fn numeral_zero_shape() {
        let n = term_to_net(&stdlib::numeral(0)).unwrap();
        assert_eq!(n.validate(), vec![]);
        assert_eq!(kinds(&n, 0), vec!["LolliR", "ParBox"]);
        assert_eq!(kinds(&n, 1), vec!["LolliR"]);
        assert_eq!(count(&n, "Weak"), 1);
    }

    #[test]
    fn numerals_contract_outside() {
        for k in 2..7 {
            let n = term_to_net(&stdlib::numeral(k)).unwrap();
            assert_eq!(n.validate(), vec![]);
            let level0 = kinds(&n, 0);
            assert_eq!(level0.iter().filter(|k| **k == "Contraction").count(), k - 1);
            assert_eq!(count(&n, "Contraction"), k - 1);
        }
    }

    #[test]
    fn par_doors_contract_inside() {
        let n = term_to_net(&t("\\k z. $(~$k ~$z ~$z)")).unwrap();
        assert_eq!(n.validate(), vec![]);
        assert_eq!(kinds(&n, 1).iter().filter(|k| **k == "Contraction").count(), 1);
        assert_eq!(kinds(&n, 0).iter().filter(|k| **k == "Contraction").count(), 0);
        // Two nested §̄ chains: the contraction sinks to the innermost box.
        let n = term_to_net(&t("\\f z. $$(~$~$f ~$~$z ~$~$z)")).unwrap();
        assert_eq!(n.validate(), vec![]);
        assert_eq!(kinds(&n, 2).iter().filter(|k| **k == "Contraction").count(), 1);
        // A bang box shares its single door.
        let n = term_to_net(&t("\\f z. f !(~!z ~!z)")).unwrap();
        assert_eq!(n.validate(), vec![]);
        assert_eq!(kinds(&n, 1).iter().filter(|k| **k == "Contraction").count(), 1);
    }

    #[test]
    fn malformed_terms_are_rejected() {
        let cases = [
            ("\\x. ~!x", "DoorOutsideBox"),
            ("\\x. !(~$x)", "ParDoorInBangBox"),
            ("\\x y. !(~!x ~!y)", "BangArity"),
            ("\\x. $(x)", "VariableCrossesBox"),
            ("$(\\x. ~$x)", "DoorOnInnerVariable"),
            ("$(\\x. $(~$~$x))", "DoorOnInnerVariable"),
        ];
        for (src, want) in cases {
            let e = term_to_net(&t(src)).unwrap_err();
            assert!(format!("{e:?}").starts_with(want), "{src}: {e:?}");
        }
    }

    #[test]
    fn identity_has_no_axiom() {
        let n = term_to_net(&t("\\x. x")).unwrap();
        assert_eq!(kinds(&n, 0), vec!["LolliR"]);
        assert_eq!(n.validate(), vec![]);
    }

    #[test]
    fn readback_round_trips_the_corpus() {
        for d in stdlib::corpus() {
            let n = term_to_net(&d.term).unwrap();
            assert_eq!(n.validate(), vec![], "{}", d.name);
            let back = net_to_term(&n).unwrap();
            assert!(alpha_eq(&back, &d.term), "{}: {back}", d.name);
            let again = term_to_net(&back).unwrap();
            assert_eq!(canonical_form(&again), canonical_form(&n), "{}", d.name);
        }
    }

    #[test]
    fn free_variables_become_inputs() {
        let m = t("f (g x) x");
        let n = term_to_net(&m).unwrap();
        assert_eq!(n.inputs.len(), 3);
        let names: Vec<String> = ["f", "g", "x"].iter().map(|s| s.to_string()).collect();
        assert!(alpha_eq(&net_to_term_with_inputs(&n, &names).unwrap(), &m));
        assert!(matches!(term_to_net_with_inputs(&m, &names[..2]), Err(TranslateError::Unbound(_))));
    }

    #[test]
    fn decoders() {
        for k in 0..6 {
            let n = term_to_net(&stdlib::numeral(k)).unwrap();
            assert_eq!(decode_numeral(&n), Some((k, 0)));
        }
        assert_eq!(decode_numeral_term(&t("$$(\\a. $(\\b. ~!a (~!a b)))")), Some((2, 2)));
        assert_eq!(decode_numeral_term(&t("\\a. $(\\a. a)")), None);
        let tape = t("$(\\z o. $(\\x. ~!o (~!z x)))");
        assert_eq!(decode_tape_term(&tape), Some((vec![1, 0], 1)));
        assert_eq!(decode_tape(&term_to_net(&tape).unwrap()), Some((vec![1, 0], 1)));
    }
}

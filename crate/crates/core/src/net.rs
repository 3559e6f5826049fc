//! Proof nets: nested graphs of typed links with !-boxes and §-boxes.
//!
//! Links are oriented along the flow of values, from a producing (OUT) port
//! to a consuming (IN) port. A box is a node that owns its inner net; door
//! `i` (port `i ≥ 1`) feeds `inner.inputs[i - 1]` and port 0 carries
//! `inner.root`. Node and link ids come from one counter kept by the
//! outermost net, so they are unique across every nesting level.
//!
//! Port layouts, principal port first:
//!
//! | kind        | ports                                   |
//! |-------------|-----------------------------------------|
//! | Ax          | in, out                                 |
//! | Weak        | in                                      |
//! | Unit        | out                                     |
//! | LolliR      | out `A⊸B`, in body `B`, out variable `A`|
//! | LolliL      | in `A⊸B`, in argument `A`, out `B`      |
//! | TensorR     | out `A⊗B`, in `A`, in `B`               |
//! | TensorL     | in `A⊗B`, out `A`, out `B`              |
//! | ForallR     | out `∀α.A`, in `A`                      |
//! | ForallL     | in `∀α.A`, out `A[B/α]`                 |
//! | Contraction | in `!A`, out `!A`, out `!A`             |
//! | boxes       | out conclusion, in door₁ … in doorₖ     |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{parse_formula, Formula, TypeVar};

pub type NodeId = u32;
pub type LinkId = u32;

/// Placeholder for a port whose link is not attached yet.
pub const DANGLING: LinkId = LinkId::MAX;

/// Which modality a §-box door carries: `!̄` or `§̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mark {
    #[serde(rename = "!")]
    Bang,
    #[serde(rename = "$")]
    Par,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Ax,
    Weak,
    Unit,
    LolliR,
    LolliL,
    TensorR,
    TensorL,
    /// `var` is the eigenvariable; `dashed` the links of the body whose labels
    /// mention it.
    ForallR {
        var: TypeVar,
        dashed: BTreeSet<LinkId>,
    },
    /// Instantiates the quantifier at `witness`.
    ForallL {
        witness: Formula,
    },
    Contraction,
    BangBox(Box<Net>),
    ParBox(Box<Net>, Vec<Mark>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    In,
    Out,
}

impl NodeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NodeKind::Ax => "Ax",
            NodeKind::Weak => "Weak",
            NodeKind::Unit => "Unit",
            NodeKind::LolliR => "LolliR",
            NodeKind::LolliL => "LolliL",
            NodeKind::TensorR => "TensorR",
            NodeKind::TensorL => "TensorL",
            NodeKind::ForallR { .. } => "ForallR",
            NodeKind::ForallL { .. } => "ForallL",
            NodeKind::Contraction => "Contraction",
            NodeKind::BangBox(_) => "BangBox",
            NodeKind::ParBox(..) => "ParBox",
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, NodeKind::BangBox(_) | NodeKind::ParBox(..))
    }

    /// Weakenings and units float: they carry no structure of their own and
    /// are left out of sizes and levels.
    pub fn is_floating(&self) -> bool {
        matches!(self, NodeKind::Weak | NodeKind::Unit)
    }

    pub fn inner(&self) -> Option<&Net> {
        match self {
            NodeKind::BangBox(n) | NodeKind::ParBox(n, _) => Some(n),
            _ => None,
        }
    }

    pub fn inner_mut(&mut self) -> Option<&mut Net> {
        match self {
            NodeKind::BangBox(n) | NodeKind::ParBox(n, _) => Some(n),
            _ => None,
        }
    }

    /// Mark of door `i` (1-based port index); !-box doors are all `!̄`.
    pub fn door_mark(&self, port: u8) -> Option<Mark> {
        match self {
            NodeKind::BangBox(_) => Some(Mark::Bang),
            NodeKind::ParBox(_, marks) => marks.get(port as usize - 1).copied(),
            _ => None,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            NodeKind::Weak | NodeKind::Unit => 1,
            NodeKind::Ax | NodeKind::ForallR { .. } | NodeKind::ForallL { .. } => 2,
            NodeKind::LolliR
            | NodeKind::LolliL
            | NodeKind::TensorR
            | NodeKind::TensorL
            | NodeKind::Contraction => 3,
            NodeKind::BangBox(n) | NodeKind::ParBox(n, _) => 1 + n.inputs.len(),
        }
    }

    pub fn port_dir(&self, port: u8) -> Dir {
        use Dir::*;
        match (self, port) {
            (NodeKind::Ax, 0) => In,
            (NodeKind::Ax, _) => Out,
            (NodeKind::Weak, _) => In,
            (NodeKind::Unit, _) => Out,
            (NodeKind::LolliR, 1) => In,
            (NodeKind::LolliR, _) => Out,
            (NodeKind::LolliL, 2) => Out,
            (NodeKind::LolliL, _) => In,
            (NodeKind::TensorR, 0) => Out,
            (NodeKind::TensorR, _) => In,
            (NodeKind::TensorL, 0) => In,
            (NodeKind::TensorL, _) => Out,
            (NodeKind::ForallR { .. }, 0) => Out,
            (NodeKind::ForallR { .. }, _) => In,
            (NodeKind::ForallL { .. }, 0) => In,
            (NodeKind::ForallL { .. }, _) => Out,
            (NodeKind::Contraction, 0) => In,
            (NodeKind::Contraction, _) => Out,
            (NodeKind::BangBox(_) | NodeKind::ParBox(..), 0) => Out,
            (NodeKind::BangBox(_) | NodeKind::ParBox(..), _) => In,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub ports: Vec<LinkId>,
}

/// One end of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Port(NodeId, u8),
    /// The link is one of the net's inputs.
    Input,
    /// The link is the net's root.
    Root,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub label: Option<Formula>,
    pub src: End,
    pub dst: End,
}

/// Allocator shared by every level of one net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ids(pub u32);

impl Ids {
    pub fn fresh(&mut self) -> u32 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub nodes: BTreeMap<NodeId, Node>,
    pub links: BTreeMap<LinkId, Link>,
    pub root: LinkId,
    pub inputs: Vec<LinkId>,
    /// Next free id; meaningful on the outermost net only.
    pub ids: Ids,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("link {0} has a missing or inconsistent end")]
    BrokenLink(LinkId),
    #[error("port {1} of node {0} is not attached consistently")]
    BrokenPort(NodeId, u8),
    #[error("link {0} runs against the flow of values")]
    Orientation(LinkId),
    #[error("root or input list disagrees with link {0}")]
    Boundary(LinkId),
    #[error("!-box {0} has {1} inputs")]
    BangArityViolation(NodeId, usize),
    #[error("§-box {0} has {1} marks for {2} doors")]
    MarkCount(NodeId, usize, usize),
    #[error("dashed link {1} of node {0} is an input of its net")]
    DashedTargetsInput(NodeId, LinkId),
    #[error("dashed link {1} of node {0} does not exist")]
    DashedMissing(NodeId, LinkId),
    #[error("box {0} meets door {2} of box {1} with an incompatible mark")]
    MarkMismatch(NodeId, NodeId, u8),
    #[error("id {0} is used twice")]
    DuplicateId(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("level {0} exceeds the depth {1}")]
    LevelOutOfRange(usize, usize),
    #[error("node {0} is not a !-box")]
    NotABangBox(NodeId),
    #[error("no node {0}")]
    NoSuchNode(NodeId),
    #[error("malformed net document: {0}")]
    Format(String),
}

impl Net {
    /// A net with no nodes whose single input is its root.
    pub fn wire(ids: &mut Ids) -> Net {
        let l = ids.fresh();
        let mut links = BTreeMap::new();
        links.insert(l, Link { label: None, src: End::Input, dst: End::Root });
        Net { nodes: BTreeMap::new(), links, root: l, inputs: vec![l], ids: Ids(0) }
    }

    /// An empty net under construction; `root` must be set before use.
    pub fn empty() -> Net {
        Net {
            nodes: BTreeMap::new(),
            links: BTreeMap::new(),
            root: DANGLING,
            inputs: Vec::new(),
            ids: Ids(0),
        }
    }

    /// The single-axiom net `A ⊢ A`.
    pub fn axiom() -> Net {
        let mut ids = Ids(0);
        let mut n = Net::empty();
        let ax = n.add_node(&mut ids, NodeKind::Ax);
        let i = n.connect(&mut ids, End::Input, End::Port(ax, 0), None);
        let r = n.connect(&mut ids, End::Port(ax, 1), End::Root, None);
        n.inputs.push(i);
        n.root = r;
        n.ids = ids;
        n
    }

    pub fn add_node(&mut self, ids: &mut Ids, kind: NodeKind) -> NodeId {
        let id = ids.fresh();
        let arity = kind.arity();
        self.nodes.insert(id, Node { kind, ports: vec![DANGLING; arity] });
        id
    }

    /// Adds a link and records it on the node ports it touches.
    pub fn connect(&mut self, ids: &mut Ids, src: End, dst: End, label: Option<Formula>) -> LinkId {
        let id = ids.fresh();
        self.attach(id, src);
        self.attach(id, dst);
        if dst == End::Root {
            self.root = id;
        }
        self.links.insert(id, Link { label, src, dst });
        id
    }

    fn attach(&mut self, link: LinkId, end: End) {
        if let End::Port(n, p) = end {
            self.nodes.get_mut(&n).expect("attach to a live node").ports[p as usize] = link;
        }
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[&id]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[&id]
    }

    pub fn port_link(&self, node: NodeId, port: u8) -> LinkId {
        self.nodes[&node].ports[port as usize]
    }

    /// The end at the other side of `node.port`.
    pub fn opposite(&self, node: NodeId, port: u8) -> End {
        let l = &self.links[&self.port_link(node, port)];
        if l.src == End::Port(node, port) {
            l.dst
        } else {
            l.src
        }
    }

    /// Redirects the consumer end of link `l` to `dst`.
    pub fn set_dst(&mut self, l: LinkId, dst: End) {
        self.attach(l, dst);
        if dst == End::Root {
            self.root = l;
        }
        self.links.get_mut(&l).expect("live link").dst = dst;
    }

    /// Redirects the producer end of link `l` to `src`.
    pub fn set_src(&mut self, l: LinkId, src: End) {
        self.attach(l, src);
        if src == End::Input {
            debug_assert!(self.inputs.contains(&l), "input links are registered by the caller");
        }
        self.links.get_mut(&l).expect("live link").src = src;
    }

    /// Joins the producer of `into` with the consumer of `out_of`, dropping
    /// `out_of`. Returns the surviving link and the dropped id. Input
    /// bookkeeping for a dropped input wire is left to the caller.
    pub fn splice(&mut self, into: LinkId, out_of: LinkId) -> (LinkId, Option<LinkId>) {
        if into == out_of {
            return (into, None);
        }
        let gone = self.links.remove(&out_of).expect("live link");
        let keep = self.links.get_mut(&into).expect("live link");
        if keep.label.is_none() {
            keep.label = gone.label;
        }
        keep.dst = gone.dst;
        self.attach(into, gone.dst);
        if gone.dst == End::Root {
            self.root = into;
        }
        (into, Some(out_of))
    }

    pub fn remove_node(&mut self, id: NodeId) -> Node {
        self.nodes.remove(&id).expect("live node")
    }

    pub fn remove_link(&mut self, id: LinkId) -> Link {
        self.links.remove(&id).expect("live link")
    }

    /// Number of non-floating nodes at every level.
    pub fn size(&self) -> usize {
        self.nodes
            .values()
            .map(|n| usize::from(!n.kind.is_floating()) + n.kind.inner().map_or(0, Net::size))
            .sum()
    }

    /// Number of nodes at every level, weakenings and units included.
    pub fn raw_size(&self) -> usize {
        self.nodes.values().map(|n| 1 + n.kind.inner().map_or(0, Net::raw_size)).sum()
    }

    /// Maximal box nesting of a non-floating node.
    pub fn depth(&self) -> usize {
        self.nodes
            .values()
            .filter_map(|n| n.kind.inner())
            .map(
                |inner| {
                    if inner.nodes.values().any(|m| !m.kind.is_floating()) {
                        1 + inner.depth()
                    } else {
                        0
                    }
                },
            )
            .max()
            .unwrap_or(0)
    }

    /// Non-floating nodes enclosed in exactly `l` boxes, ascending by id.
    pub fn nodes_at_level(&self, l: usize) -> Result<Vec<NodeId>, NetError> {
        let d = self.depth();
        if l > d {
            return Err(NetError::LevelOutOfRange(l, d));
        }
        let mut out = Vec::new();
        self.for_each_net_at(l, &mut |net| {
            out.extend(net.nodes.iter().filter(|(_, n)| !n.kind.is_floating()).map(|(id, _)| *id));
        });
        out.sort_unstable();
        Ok(out)
    }

    /// Visits every (sub)net whose nodes sit at level `l`.
    pub fn for_each_net_at<'a>(&'a self, l: usize, f: &mut dyn FnMut(&'a Net)) {
        if l == 0 {
            f(self);
            return;
        }
        for n in self.nodes.values() {
            if let Some(inner) = n.kind.inner() {
                inner.for_each_net_at(l - 1, f);
            }
        }
    }

    /// Every (sub)net with its level and the box path leading to it.
    pub fn subnets(&self) -> Vec<(Vec<NodeId>, &Net)> {
        let mut out = Vec::new();
        fn go<'a>(net: &'a Net, path: &mut Vec<NodeId>, out: &mut Vec<(Vec<NodeId>, &'a Net)>) {
            out.push((path.clone(), net));
            for (id, n) in &net.nodes {
                if let Some(inner) = n.kind.inner() {
                    path.push(*id);
                    go(inner, path, out);
                    path.pop();
                }
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// The net reached by following the box path.
    pub fn at_path(&self, path: &[NodeId]) -> &Net {
        let mut cur = self;
        for id in path {
            cur = cur.nodes[id].kind.inner().expect("path runs through boxes");
        }
        cur
    }

    /// Mutable access to the nonempty box path's net together with the id
    /// allocator of the outermost net.
    pub fn at_path_mut(&mut self, path: &[NodeId]) -> (&mut Net, &mut Ids) {
        fn descend<'a>(net: &'a mut Net, path: &[NodeId]) -> &'a mut Net {
            match path.split_first() {
                None => net,
                Some((id, rest)) => descend(
                    net.nodes
                        .get_mut(id)
                        .expect("path runs through live boxes")
                        .kind
                        .inner_mut()
                        .expect("path runs through boxes"),
                    rest,
                ),
            }
        }
        assert!(!path.is_empty(), "empty paths are handled by the caller");
        let Net { nodes, ids, .. } = self;
        let (first, rest) = path.split_first().expect("nonempty");
        let inner = nodes
            .get_mut(first)
            .expect("path runs through live boxes")
            .kind
            .inner_mut()
            .expect("path runs through boxes");
        (descend(inner, rest), ids)
    }

    /// Runs `f` on the net at `path` with the shared allocator.
    pub fn with_level<R>(&mut self, path: &[NodeId], f: impl FnOnce(&mut Net, &mut Ids) -> R) -> R {
        if path.is_empty() {
            let mut ids = self.ids;
            let r = f(self, &mut ids);
            self.ids = ids;
            r
        } else {
            let (net, ids) = self.at_path_mut(path);
            f(net, ids)
        }
    }

    /// Every link id at every level.
    pub fn all_link_ids(&self) -> BTreeSet<LinkId> {
        let mut out = BTreeSet::new();
        for (_, net) in self.subnets() {
            out.extend(net.links.keys().copied());
        }
        out
    }

    /// Applies `f` to every ForallR dashed set at every level.
    pub fn for_each_dashed_mut(&mut self, f: &mut dyn FnMut(&mut BTreeSet<LinkId>)) {
        for n in self.nodes.values_mut() {
            match &mut n.kind {
                NodeKind::ForallR { dashed, .. } => f(dashed),
                NodeKind::BangBox(inner) | NodeKind::ParBox(inner, _) => inner.for_each_dashed_mut(f),
                _ => {}
            }
        }
    }

    pub fn has_forall(&self) -> bool {
        self.subnets().iter().any(|(_, n)| {
            n.nodes.values().any(|m| matches!(m.kind, NodeKind::ForallR { .. } | NodeKind::ForallL { .. }))
        })
    }

    /// Mutable lookup of a link at any level.
    pub fn find_link_mut(&mut self, id: LinkId) -> Option<&mut Link> {
        if self.links.contains_key(&id) {
            return self.links.get_mut(&id);
        }
        self.nodes.values_mut().filter_map(|n| n.kind.inner_mut()).find_map(|inner| inner.find_link_mut(id))
    }

    /// Looks a link up at any level.
    pub fn find_link(&self, id: LinkId) -> Option<&Link> {
        self.subnets().into_iter().find_map(|(_, n)| n.links.get(&id))
    }

    /// Structural check of every invariant; empty when the net is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        self.validate_level(&mut out, &mut seen);
        let all_links = self.all_link_ids();
        for (_, net) in self.subnets() {
            for (id, n) in &net.nodes {
                if let NodeKind::ForallR { dashed, .. } = &n.kind {
                    for l in dashed {
                        if net.inputs.contains(l) {
                            out.push(Violation::DashedTargetsInput(*id, *l));
                        } else if !all_links.contains(l) {
                            out.push(Violation::DashedMissing(*id, *l));
                        }
                    }
                }
            }
        }
        out
    }

    fn validate_level(&self, out: &mut Vec<Violation>, seen: &mut BTreeSet<u32>) {
        for id in self.nodes.keys().chain(self.links.keys()) {
            if !seen.insert(*id) {
                out.push(Violation::DuplicateId(*id));
            }
        }
        for (lid, l) in &self.links {
            for (end, want) in [(l.src, Dir::Out), (l.dst, Dir::In)] {
                match end {
                    End::Port(n, p) => match self.nodes.get(&n) {
                        Some(node) if (p as usize) < node.ports.len() && node.ports[p as usize] == *lid => {
                            if node.kind.port_dir(p) != want {
                                out.push(Violation::Orientation(*lid));
                            }
                        }
                        _ => out.push(Violation::BrokenLink(*lid)),
                    },
                    End::Input => {
                        if want != Dir::Out || !self.inputs.contains(lid) {
                            out.push(Violation::Boundary(*lid));
                        }
                    }
                    End::Root => {
                        if want != Dir::In || self.root != *lid {
                            out.push(Violation::Boundary(*lid));
                        }
                    }
                }
            }
        }
        match self.links.get(&self.root) {
            Some(l) if l.dst == End::Root => {}
            _ => out.push(Violation::Boundary(self.root)),
        }
        let mut uniq = BTreeSet::new();
        for i in &self.inputs {
            match self.links.get(i) {
                Some(l) if l.src == End::Input && uniq.insert(*i) => {}
                _ => out.push(Violation::Boundary(*i)),
            }
        }
        for (id, n) in &self.nodes {
            if n.ports.len() != n.kind.arity() {
                out.push(Violation::BrokenPort(*id, n.ports.len() as u8));
                continue;
            }
            for (p, l) in n.ports.iter().enumerate() {
                let ok = self.links.get(l).is_some_and(|link| {
                    link.src == End::Port(*id, p as u8) || link.dst == End::Port(*id, p as u8)
                });
                if !ok {
                    out.push(Violation::BrokenPort(*id, p as u8));
                }
            }
            match &n.kind {
                NodeKind::BangBox(inner) => {
                    if inner.inputs.len() > 1 {
                        out.push(Violation::BangArityViolation(*id, inner.inputs.len()));
                    }
                    inner.validate_level(out, seen);
                }
                NodeKind::ParBox(inner, marks) => {
                    if marks.len() != inner.inputs.len() {
                        out.push(Violation::MarkCount(*id, marks.len(), inner.inputs.len()));
                    }
                    inner.validate_level(out, seen);
                }
                _ => {}
            }
            // A box conclusion plugged into a door must agree with its mark.
            if n.kind.is_box() && n.ports.first().is_some_and(|l| self.links.contains_key(l)) {
                if let End::Port(m, p) = self.opposite(*id, 0) {
                    if p > 0 {
                        if let Some(other) = self.nodes.get(&m) {
                            if let Some(mark) = other.kind.door_mark(p) {
                                let fits = matches!(
                                    (&n.kind, mark),
                                    (NodeKind::BangBox(_), Mark::Bang) | (NodeKind::ParBox(..), Mark::Par)
                                );
                                if !fits {
                                    out.push(Violation::MarkMismatch(*id, m, p));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Deep copy of the !-box `id` (at the level of `self`) under fresh ids.
    /// The copy's doors are left dangling for the caller to wire.
    pub fn clone_box(&mut self, ids: &mut Ids, id: NodeId) -> Result<(NodeId, BTreeMap<u32, u32>), NetError> {
        let node = self.nodes.get(&id).ok_or(NetError::NoSuchNode(id))?;
        if !matches!(node.kind, NodeKind::BangBox(_)) {
            return Err(NetError::NotABangBox(id));
        }
        let mut map = BTreeMap::new();
        let kind = renumber_kind(&node.kind, ids, &mut map);
        let arity = kind.arity();
        let new_id = ids.fresh();
        map.insert(id, new_id);
        self.nodes.insert(new_id, Node { kind, ports: vec![DANGLING; arity] });
        Ok((new_id, map))
    }

    /// Minimal id not used anywhere in the net.
    pub fn max_id(&self) -> Option<u32> {
        self.subnets()
            .iter()
            .flat_map(|(_, n)| n.nodes.keys().chain(n.links.keys()).copied().collect::<Vec<_>>())
            .max()
    }
}

/// Copies a node kind with every inner id renamed; the map records old → new.
fn renumber_kind(kind: &NodeKind, ids: &mut Ids, map: &mut BTreeMap<u32, u32>) -> NodeKind {
    match kind {
        NodeKind::BangBox(inner) => NodeKind::BangBox(Box::new(renumber_net(inner, ids, map))),
        NodeKind::ParBox(inner, marks) => {
            NodeKind::ParBox(Box::new(renumber_net(inner, ids, map)), marks.clone())
        }
        other => other.clone(),
    }
}

fn renumber_net(net: &Net, ids: &mut Ids, map: &mut BTreeMap<u32, u32>) -> Net {
    for id in net.nodes.keys().chain(net.links.keys()) {
        map.insert(*id, ids.fresh());
    }
    let mut out = Net::empty();
    for (id, n) in &net.nodes {
        let kind = renumber_kind(&n.kind, ids, map);
        out.nodes.insert(map[id], Node { kind, ports: n.ports.iter().map(|l| map[l]).collect() });
    }
    let end = |e: End| match e {
        End::Port(n, p) => End::Port(map[&n], p),
        other => other,
    };
    for (id, l) in &net.links {
        out.links.insert(map[id], Link { label: l.label.clone(), src: end(l.src), dst: end(l.dst) });
    }
    out.root = map[&net.root];
    out.inputs = net.inputs.iter().map(|l| map[l]).collect();
    // Dashed sets inside the copy follow the renaming.
    out.for_each_dashed_mut(&mut |d| {
        *d = d.iter().map(|l| map.get(l).copied().unwrap_or(*l)).collect();
    });
    out
}

// ------------------------------------------------------------ canonical form

/// A string that two nets share exactly when they are isomorphic as nested
/// port graphs with the same labels.
pub fn canonical_form(net: &Net) -> String {
    let mut s = String::new();
    canon_net(net, &mut s);
    s
}

fn kind_code(kind: &NodeKind) -> String {
    match kind {
        NodeKind::ForallR { dashed, .. } => format!("ForallR/{}", dashed.len()),
        NodeKind::ForallL { witness } => format!("ForallL[{witness}]"),
        NodeKind::ParBox(_, marks) => {
            let m: String = marks.iter().map(|m| if *m == Mark::Bang { '!' } else { '$' }).collect();
            format!("ParBox[{m}]")
        }
        other => other.tag().to_string(),
    }
}

fn canon_net(net: &Net, out: &mut String) {
    let mut order: Vec<NodeId> = Vec::new();
    let mut index: BTreeMap<NodeId, usize> = BTreeMap::new();
    let visit = |start: NodeId, order: &mut Vec<NodeId>, index: &mut BTreeMap<NodeId, usize>| {
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if index.contains_key(&n) {
                continue;
            }
            index.insert(n, order.len());
            order.push(n);
            let node = &net.nodes[&n];
            for p in (0..node.ports.len()).rev() {
                if let End::Port(m, _) = net.opposite(n, p as u8) {
                    if !index.contains_key(&m) {
                        stack.push(m);
                    }
                }
            }
        }
    };
    let starts = std::iter::once(net.root).chain(net.inputs.iter().copied());
    for l in starts {
        let link = &net.links[&l];
        for e in [link.src, link.dst] {
            if let End::Port(n, _) = e {
                visit(n, &mut order, &mut index);
            }
        }
    }
    let main_len = order.len();
    // Components reachable from neither the root nor an input: encode each
    // from its best starting point and sort.
    let mut rest: Vec<NodeId> = net.nodes.keys().filter(|n| !index.contains_key(n)).copied().collect();
    let mut islands: Vec<String> = Vec::new();
    while let Some(&seed) = rest.first() {
        let mut comp_index = BTreeMap::new();
        let mut comp_order = Vec::new();
        visit(seed, &mut comp_order, &mut comp_index);
        let members = comp_order.clone();
        let mut best: Option<String> = None;
        for &start in &members {
            let mut idx = BTreeMap::new();
            let mut ord = Vec::new();
            visit(start, &mut ord, &mut idx);
            let enc = encode_nodes(net, &ord, &idx, 0);
            if best.as_ref().is_none_or(|b| enc < *b) {
                best = Some(enc);
            }
        }
        islands.push(best.expect("nonempty component"));
        rest.retain(|n| !comp_index.contains_key(n));
    }
    islands.sort();
    out.push_str(&format!("net(in={};", net.inputs.len()));
    out.push_str(&endpoint(net, net.root, &index, End::Root));
    out.push(';');
    for l in &net.inputs {
        out.push_str(&endpoint(net, *l, &index, End::Input));
        out.push(',');
    }
    out.push(';');
    out.push_str(&encode_nodes(net, &order[..main_len], &index, 0));
    for i in islands {
        out.push_str("|island:");
        out.push_str(&i);
    }
    out.push(')');
}

/// The far end of link `l` as seen from boundary `from`.
fn endpoint(net: &Net, l: LinkId, index: &BTreeMap<NodeId, usize>, from: End) -> String {
    let link = &net.links[&l];
    let other = if link.src == from { link.dst } else { link.src };
    let label = link.label.as_ref().map(|f| format!(":{f}")).unwrap_or_default();
    match other {
        End::Port(n, p) => format!("{}.{}{}", index[&n], p, label),
        End::Input => format!("I{}{}", input_pos(net, l), label),
        End::Root => format!("R{label}"),
    }
}

fn input_pos(net: &Net, l: LinkId) -> usize {
    net.inputs.iter().position(|i| *i == l).expect("registered input")
}

fn encode_nodes(net: &Net, order: &[NodeId], index: &BTreeMap<NodeId, usize>, _depth: usize) -> String {
    let mut s = String::new();
    for &n in order {
        let node = &net.nodes[&n];
        s.push_str(&kind_code(&node.kind));
        s.push('(');
        for p in 0..node.ports.len() {
            let l = node.ports[p];
            let link = &net.links[&l];
            let label = link.label.as_ref().map(|f| format!(":{f}")).unwrap_or_default();
            let far = net.opposite(n, p as u8);
            match far {
                End::Port(m, q) => s.push_str(&format!("{}.{}{}", index[&m], q, label)),
                End::Input => s.push_str(&format!("I{}{}", input_pos(net, l), label)),
                End::Root => s.push_str(&format!("R{label}")),
            }
            s.push(' ');
        }
        if let Some(inner) = node.kind.inner() {
            canon_net(inner, &mut s);
        }
        s.push_str(");");
    }
    s
}

// ------------------------------------------------------------------- JSON

#[derive(Debug, Serialize, Deserialize)]
struct NetDoc {
    root: LinkId,
    inputs: Vec<LinkId>,
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: NodeId,
    kind: String,
    ports: Vec<LinkId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dashed: Option<Vec<LinkId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    marks: Option<Vec<Mark>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inner: Option<Box<NetDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkDoc {
    id: LinkId,
    src: String,
    dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

fn end_text(e: End) -> String {
    match e {
        End::Port(n, p) => format!("{n}.{p}"),
        End::Input => "input".into(),
        End::Root => "root".into(),
    }
}

fn parse_end(s: &str) -> Result<End, NetError> {
    match s {
        "input" => Ok(End::Input),
        "root" => Ok(End::Root),
        _ => {
            let (n, p) = s.split_once('.').ok_or_else(|| NetError::Format(format!("bad end {s:?}")))?;
            let n = n.parse().map_err(|_| NetError::Format(format!("bad node in {s:?}")))?;
            let p = p.parse().map_err(|_| NetError::Format(format!("bad port in {s:?}")))?;
            Ok(End::Port(n, p))
        }
    }
}

fn to_doc(net: &Net) -> NetDoc {
    NetDoc {
        root: net.root,
        inputs: net.inputs.clone(),
        nodes: net
            .nodes
            .iter()
            .map(|(id, n)| {
                let mut d = NodeDoc {
                    id: *id,
                    kind: n.kind.tag().to_string(),
                    ports: n.ports.clone(),
                    var: None,
                    dashed: None,
                    witness: None,
                    marks: None,
                    inner: None,
                };
                match &n.kind {
                    NodeKind::ForallR { var, dashed } => {
                        d.var = Some(var.clone());
                        d.dashed = Some(dashed.iter().copied().collect());
                    }
                    NodeKind::ForallL { witness } => d.witness = Some(witness.to_string()),
                    NodeKind::BangBox(inner) => d.inner = Some(Box::new(to_doc(inner))),
                    NodeKind::ParBox(inner, marks) => {
                        d.inner = Some(Box::new(to_doc(inner)));
                        d.marks = Some(marks.clone());
                    }
                    _ => {}
                }
                d
            })
            .collect(),
        links: net
            .links
            .iter()
            .map(|(id, l)| LinkDoc {
                id: *id,
                src: end_text(l.src),
                dst: end_text(l.dst),
                label: l.label.as_ref().map(|f| f.to_string()),
            })
            .collect(),
    }
}

fn from_doc(doc: &NetDoc) -> Result<Net, NetError> {
    let mut net = Net::empty();
    net.root = doc.root;
    net.inputs = doc.inputs.clone();
    for n in &doc.nodes {
        let inner = || -> Result<Box<Net>, NetError> {
            let d = n.inner.as_ref().ok_or_else(|| NetError::Format(format!("box {} lacks inner", n.id)))?;
            Ok(Box::new(from_doc(d)?))
        };
        let kind = match n.kind.as_str() {
            "Ax" => NodeKind::Ax,
            "Weak" => NodeKind::Weak,
            "Unit" => NodeKind::Unit,
            "LolliR" => NodeKind::LolliR,
            "LolliL" => NodeKind::LolliL,
            "TensorR" => NodeKind::TensorR,
            "TensorL" => NodeKind::TensorL,
            "Contraction" => NodeKind::Contraction,
            "ForallR" => NodeKind::ForallR {
                var: n.var.clone().unwrap_or_else(|| "a".into()),
                dashed: n.dashed.iter().flatten().copied().collect(),
            },
            "ForallL" => NodeKind::ForallL {
                witness: parse_formula(n.witness.as_deref().unwrap_or(""))
                    .map_err(|e| NetError::Format(e.to_string()))?,
            },
            "BangBox" => NodeKind::BangBox(inner()?),
            "ParBox" => NodeKind::ParBox(inner()?, n.marks.clone().unwrap_or_default()),
            other => return Err(NetError::Format(format!("unknown node kind {other:?}"))),
        };
        net.nodes.insert(n.id, Node { kind, ports: n.ports.clone() });
    }
    for l in &doc.links {
        let label = match &l.label {
            Some(t) => Some(parse_formula(t).map_err(|e| NetError::Format(e.to_string()))?),
            None => None,
        };
        net.links.insert(l.id, Link { label, src: parse_end(&l.src)?, dst: parse_end(&l.dst)? });
    }
    Ok(net)
}

impl Net {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&to_doc(self)).expect("net documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Net, NetError> {
        let doc: NetDoc = serde_json::from_str(text).map_err(|e| NetError::Format(e.to_string()))?;
        let mut net = from_doc(&doc)?;
        net.ids = Ids(net.max_id().map_or(0, |m| m + 1));
        Ok(net)
    }
}

impl fmt::Display for Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", canonical_form(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `!(x)` style box around a bare wire, fed by the net input.
    fn boxed_wire(doors: usize) -> Net {
        let mut ids = Ids(0);
        let mut inner = Net::empty();
        let mut inner_inputs = Vec::new();
        if doors == 0 {
            let u = inner.add_node(&mut ids, NodeKind::Unit);
            inner.connect(&mut ids, End::Port(u, 0), End::Root, None);
        } else {
            let l = inner.connect(&mut ids, End::Input, End::Root, None);
            inner_inputs.push(l);
            for _ in 1..doors {
                let w = inner.add_node(&mut ids, NodeKind::Weak);
                inner_inputs.push(inner.connect(&mut ids, End::Input, End::Port(w, 0), None));
            }
        }
        inner.inputs = inner_inputs;
        let mut net = Net::empty();
        let b = net.add_node(&mut ids, NodeKind::BangBox(Box::new(inner)));
        net.connect(&mut ids, End::Port(b, 0), End::Root, None);
        for d in 0..doors {
            let i = net.connect(&mut ids, End::Input, End::Port(b, 1 + d as u8), None);
            net.inputs.push(i);
        }
        net.ids = ids;
        net
    }

    #[test]
    fn axiom_is_valid() {
        let n = Net::axiom();
        assert_eq!(n.validate(), vec![]);
        assert_eq!(n.nodes_at_level(0).unwrap().len(), 1);
        assert_eq!(n.depth(), 0);
    }

    #[test]
    fn bang_arity_is_enforced() {
        assert_eq!(boxed_wire(1).validate(), vec![]);
        let v = boxed_wire(2).validate();
        assert!(matches!(v.as_slice(), [Violation::BangArityViolation(_, 2)]), "{v:?}");
    }

    #[test]
    fn dashed_input_is_reported() {
        let mut ids = Ids(0);
        let mut n = Net::empty();
        let f = n.add_node(&mut ids, NodeKind::ForallR { var: "a".into(), dashed: BTreeSet::new() });
        let i = n.connect(&mut ids, End::Input, End::Port(f, 1), None);
        n.inputs.push(i);
        n.connect(&mut ids, End::Port(f, 0), End::Root, None);
        n.ids = ids;
        assert_eq!(n.validate(), vec![]);
        if let NodeKind::ForallR { dashed, .. } = &mut n.nodes.get_mut(&f).unwrap().kind {
            dashed.insert(i);
        }
        assert_eq!(n.validate(), vec![Violation::DashedTargetsInput(f, i)]);
    }

    #[test]
    fn clone_box_adds_fresh_copy() {
        let mut n = boxed_wire(1);
        let before = n.raw_size();
        let b = n.nodes_at_level(0).unwrap()[0];
        let mut ids = n.ids;
        let (c, map) = n.clone_box(&mut ids, b).unwrap();
        n.ids = ids;
        assert_eq!(n.raw_size(), before + 1);
        let old: BTreeSet<u32> = n.nodes[&b].kind.inner().unwrap().links.keys().copied().collect();
        let new: BTreeSet<u32> = n.nodes[&c].kind.inner().unwrap().links.keys().copied().collect();
        assert!(old.is_disjoint(&new));
        assert_eq!(map[&b], c);
        assert!(matches!(n.clone_box(&mut ids, 9999), Err(NetError::NoSuchNode(_))));
    }

    #[test]
    fn json_round_trip_and_canonical_form() {
        let n = boxed_wire(1);
        let back = Net::from_json(&n.to_json()).unwrap();
        assert_eq!(back, Net { ids: back.ids, ..n.clone() });
        assert_eq!(canonical_form(&back), canonical_form(&n));
        assert_ne!(canonical_form(&boxed_wire(0)), canonical_form(&n));
    }

    #[test]
    fn levels_out_of_range() {
        assert!(matches!(Net::axiom().nodes_at_level(1), Err(NetError::LevelOutOfRange(1, 0))));
    }
}

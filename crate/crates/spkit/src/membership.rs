//! Membership of finite series-parallel posets in expression and D-graph
//! languages, path witnesses with special-edge marking, and bounded language
//! enumeration.
//!
//! Expressions and D-graphs compile to one node network. On finite posets the
//! transfinite operators reduce to finite products: ω and −ω products need ε
//! in the operand to pad all but finitely many positions, ordinal products
//! behave like `*`, and a ⋄ product is an alternation `G H G … G`.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::dgraph::{DGraph, Label, Op};
use crate::error::{Error, Result};
use crate::poset::{elems, Mask, Poset, SpTerm};
use crate::rexpr::Expr;
use crate::semilinear::SemiLinear;

#[derive(Clone, Debug)]
enum Shape {
    Never,
    Eps,
    Lit(String),
    Or(Vec<usize>),
    /// Parallel product of one poset per child.
    Par(Vec<usize>),
    /// Sequential product of one piece per child; `bool` allows ε pieces.
    Seq(Vec<usize>, bool),
    /// Product of pieces of one child, at least `min` non-empty; `needs_eps`
    /// for index sets that are infinite.
    Rep { child: usize, min: usize, needs_eps: bool },
    /// Alternation of pieces of the two children starting and ending with the
    /// first, at least `min` non-empty.
    Dia(usize, usize, usize),
    /// Presburger node: out-edges as (target, special).
    Pres(SemiLinear, Vec<(usize, bool)>),
}

#[derive(Clone, Debug)]
struct Net {
    shapes: Vec<Shape>,
    root: usize,
}

impl Net {
    fn from_expr(e: &Expr) -> Result<Net> {
        e.check()?;
        let mut net = Net { shapes: Vec::new(), root: 0 };
        net.root = net.compile(e, &mut Vec::new());
        Ok(net)
    }

    fn push(&mut self, s: Shape) -> usize {
        self.shapes.push(s);
        self.shapes.len() - 1
    }

    /// Letters resolve lexically: a substitution letter denotes the language
    /// of whatever replaces it.
    fn compile(&mut self, e: &Expr, scope: &mut Vec<(String, usize)>) -> usize {
        let rep = |min: usize, needs_eps: bool, net: &mut Net, c: &Expr, scope: &mut Vec<(String, usize)>| {
            let child = net.compile(c, scope);
            net.push(Shape::Rep { child, min, needs_eps })
        };
        match e {
            Expr::Empty => self.push(Shape::Never),
            Expr::Eps => self.push(Shape::Eps),
            Expr::Letter(a) => match scope.iter().rev().find(|(x, _)| x == a) {
                Some(&(_, id)) => id,
                None => self.push(Shape::Lit(a.clone())),
            },
            Expr::Or(cs) | Expr::Par(cs) | Expr::Seq(cs) | Expr::Seq1(cs) => {
                let ids = cs.iter().map(|c| self.compile(c, scope)).collect();
                self.push(match e {
                    Expr::Or(_) => Shape::Or(ids),
                    Expr::Par(_) => Shape::Par(ids),
                    Expr::Seq(_) => Shape::Seq(ids, true),
                    _ => Shape::Seq(ids, false),
                })
            }
            Expr::Star(c) | Expr::Ord(c) | Expr::MOrd(c) => rep(0, false, self, c, scope),
            Expr::Omega(c) | Expr::MOmega(c) => rep(0, true, self, c, scope),
            Expr::Star1(c) | Expr::Ord1(c) | Expr::MOrd1(c) => rep(2, false, self, c, scope),
            Expr::Omega1(c) | Expr::MOmega1(c) => rep(2, true, self, c, scope),
            Expr::Dia(a, b) | Expr::Dia1(a, b) => {
                let (x, y) = (self.compile(a, scope), self.compile(b, scope));
                self.push(Shape::Dia(x, y, if matches!(e, Expr::Dia(..)) { 0 } else { 2 }))
            }
            Expr::DiaShort(c) => {
                let x = self.compile(c, scope);
                let eps = self.push(Shape::Eps);
                let d = self.push(Shape::Dia(x, eps, 0));
                self.push(Shape::Or(vec![d, eps]))
            }
            Expr::Sub(x, inner, outer) => {
                let i = self.compile(inner, scope);
                scope.push((x.clone(), i));
                let o = self.compile(outer, scope);
                scope.pop();
                o
            }
            Expr::IStar(x, body) => {
                // L = {ξ} ∪ (L ∘ξ body): the ξ base keeps the outer meaning.
                let id = self.push(Shape::Never);
                let base = self.compile(&Expr::Letter(x.clone()), scope);
                scope.push((x.clone(), id));
                let b = self.compile(body, scope);
                scope.pop();
                self.shapes[id] = Shape::Or(vec![base, b]);
                id
            }
        }
    }

    fn from_dgraph(d: &DGraph) -> Result<Net> {
        d.check_arity()?;
        if !d.check_properties(&Default::default()).pp {
            return Err(Error::PreconditionViolated("D-graph lacks Property PP".into()));
        }
        let shapes = (0..d.len())
            .map(|n| {
                let cs: Vec<usize> = d.out[n].iter().map(|e| e.to).collect();
                match &d.labels[n] {
                    Label::Letter(a) => Shape::Lit(a.clone()),
                    Label::Pres(s) => Shape::Pres(s.clone(), d.out[n].iter().map(|e| (e.to, e.special)).collect()),
                    Label::Op(Op::Seq1) => Shape::Seq(cs, false),
                    Label::Op(Op::Star1 | Op::Ord1 | Op::MOrd1) => Shape::Rep { child: cs[0], min: 2, needs_eps: false },
                    Label::Op(Op::Omega1 | Op::MOmega1) => Shape::Rep { child: cs[0], min: 2, needs_eps: true },
                    Label::Op(Op::Dia1) => Shape::Dia(cs[0], cs[1], 2),
                }
            })
            .collect();
        Ok(Net { shapes, root: d.root })
    }
}

fn interval(prefix: &[Mask], from: usize, to: usize) -> Mask {
    prefix[to] & !prefix[from]
}

fn prefixes(blocks: &[Mask]) -> Vec<Mask> {
    let mut p = vec![0];
    for b in blocks {
        p.push(p.last().unwrap() | b);
    }
    p
}

/// One consecutive piece per child, in order.
pub(crate) fn split_children(blocks: &[Mask], k: usize, allow_eps: bool, test: &mut dyn FnMut(usize, Mask) -> bool) -> Option<Vec<Mask>> {
    let m = blocks.len();
    let pre = prefixes(blocks);
    // from[i][q]: start of child i-1's piece ending at q.
    let mut from = vec![vec![None; m + 1]; k + 1];
    from[0][0] = Some(0);
    for i in 0..k {
        for pos in 0..=m {
            if from[i][pos].is_none() {
                continue;
            }
            let lo = if allow_eps { pos } else { pos + 1 };
            for q in lo..=m {
                if from[i + 1][q].is_none() && test(i, interval(&pre, pos, q)) {
                    from[i + 1][q] = Some(pos);
                }
            }
        }
    }
    from[k][m]?;
    let mut out = vec![0; k];
    let mut q = m;
    for i in (0..k).rev() {
        let p = from[i + 1][q].unwrap();
        out[i] = interval(&pre, p, q);
        q = p;
    }
    Some(out)
}

/// Non-empty pieces of one child covering the blocks, at least `min` of them.
pub(crate) fn split_repeat(blocks: &[Mask], min: usize, test: &mut dyn FnMut(Mask) -> bool) -> Option<Vec<Mask>> {
    let m = blocks.len();
    let pre = prefixes(blocks);
    let mut from: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    let mut seen = HashSet::from([(0usize, 0usize)]);
    while let Some((pos, c)) = queue.pop_front() {
        if pos == m && c >= min {
            let mut out = Vec::new();
            let mut s = (pos, c);
            while let Some(&prev) = from.get(&s) {
                out.push(interval(&pre, prev.0, s.0));
                s = prev;
            }
            out.reverse();
            return Some(out);
        }
        for q in pos + 1..=m {
            let next = (q, (c + 1).min(min));
            if !seen.contains(&next) && test(interval(&pre, pos, q)) {
                seen.insert(next);
                from.insert(next, (pos, c));
                queue.push_back(next);
            }
        }
    }
    None
}

/// `G H G … G` with G pieces from child 0 and H pieces from child 1, ε
/// pieces allowed where the child accepts ε, at least `min` non-empty.
pub(crate) fn split_alternating(blocks: &[Mask], min: usize, test: &mut dyn FnMut(usize, Mask) -> bool) -> Option<Vec<(usize, Mask)>> {
    let m = blocks.len();
    let pre = prefixes(blocks);
    type St = (usize, usize, usize);
    let start: St = (0, 0, 0);
    let mut from: HashMap<St, (St, Mask)> = HashMap::new();
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let eps = [test(0, 0), test(1, 0)];
    while let Some(s @ (pos, kind, c)) = queue.pop_front() {
        if pos == m && kind == 1 && c >= min {
            let mut out = Vec::new();
            let mut cur = s;
            while let Some(&(prev, piece)) = from.get(&cur) {
                out.push((prev.1, piece));
                cur = prev;
            }
            out.reverse();
            return Some(out);
        }
        let mut moves = Vec::new();
        if eps[kind] {
            moves.push(((pos, 1 - kind, c), 0));
        }
        for q in pos + 1..=m {
            moves.push(((q, 1 - kind, (c + 1).min(min)), interval(&pre, pos, q)));
        }
        for (next, piece) in moves {
            if !seen.contains(&next) && (piece == 0 || test(kind, piece)) {
                seen.insert(next);
                from.insert(next, (s, piece));
                queue.push_back(next);
            }
        }
    }
    None
}

/// One group of components per child, groups possibly empty.
fn split_parallel(comps: &[Mask], k: usize, test: &mut dyn FnMut(usize, Mask) -> bool) -> Option<Vec<Mask>> {
    fn go(
        comps: &[Mask],
        i: usize,
        k: usize,
        rem: u64,
        test: &mut dyn FnMut(usize, Mask) -> bool,
        dead: &mut HashSet<(usize, u64)>,
    ) -> Option<Vec<Mask>> {
        let union = |s: u64| elems(s).fold(0, |m, c| m | comps[c]);
        if i + 1 == k {
            return test(i, union(rem)).then(|| vec![union(rem)]);
        }
        if dead.contains(&(i, rem)) {
            return None;
        }
        // All submasks of `rem`, the empty one last.
        let mut s = rem;
        loop {
            if test(i, union(s)) {
                if let Some(mut rest) = go(comps, i + 1, k, rem & !s, test, dead) {
                    rest.insert(0, union(s));
                    return Some(rest);
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & rem;
        }
        dead.insert((i, rem));
        None
    }
    if k == 0 {
        return comps.is_empty().then(Vec::new);
    }
    go(comps, 0, k, (1u64 << comps.len()) - 1, test, &mut HashSet::new())
}

/// Each component goes to one out-position; the count vector must be in
/// `rho`. Returns the vector and the chosen position of every component.
pub(crate) fn assign_positions(comps: &[Mask], rho: &SemiLinear, test: &mut dyn FnMut(usize, Mask) -> bool) -> Option<(Vec<u64>, Vec<usize>)> {
    let k = rho.dim;
    let cand: Vec<Vec<usize>> = comps.iter().map(|&c| (0..k).filter(|&j| test(j, c)).collect()).collect();
    if cand.iter().any(Vec::is_empty) {
        return None;
    }
    fn go(
        cand: &[Vec<usize>],
        idx: usize,
        y: &mut Vec<u64>,
        pick: &mut Vec<usize>,
        rho: &SemiLinear,
        dead: &mut HashSet<(usize, Vec<u64>)>,
    ) -> bool {
        if idx == cand.len() {
            return rho.contains(y);
        }
        if dead.contains(&(idx, y.clone())) {
            return false;
        }
        for &j in &cand[idx] {
            y[j] += 1;
            pick.push(j);
            if go(cand, idx + 1, y, pick, rho, dead) {
                return true;
            }
            pick.pop();
            y[j] -= 1;
        }
        dead.insert((idx, y.clone()));
        false
    }
    let (mut y, mut pick) = (vec![0; k], Vec::new());
    go(&cand, 0, &mut y, &mut pick, rho, &mut HashSet::new()).then_some((y, pick))
}

/// Memoized least-fixed-point decider. Memo entries are keyed by canonical
/// factor terms, so isomorphic factors share results across queries.
struct Decider {
    net: Net,
    memo: HashMap<(usize, SpTerm), bool>,
}

struct Query<'a> {
    poset: &'a Poset,
    terms: HashMap<Mask, SpTerm>,
}

impl Query<'_> {
    fn term(&mut self, mask: Mask) -> SpTerm {
        let p = self.poset;
        self.terms.entry(mask).or_insert_with(|| p.term_of(mask).expect("factors of SP posets are SP")).clone()
    }
}

impl Decider {
    fn new(net: Net) -> Decider {
        Decider { net, memo: HashMap::new() }
    }

    fn member(&mut self, t: &SpTerm) -> Result<bool> {
        let p = Poset::from_term(t)?;
        let mut q = Query { poset: &p, terms: HashMap::new() };
        Ok(self.at(&mut q, self.net.root, p.full()))
    }

    fn at(&mut self, q: &mut Query, n: usize, mask: Mask) -> bool {
        let key = (n, q.term(mask));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        // In-progress entries read as false: least fixed point.
        self.memo.insert(key.clone(), false);
        let v = self.eval(q, n, mask);
        self.memo.insert(key, v);
        v
    }

    fn eval(&mut self, q: &mut Query, n: usize, mask: Mask) -> bool {
        let shape = self.net.shapes[n].clone();
        let p = q.poset;
        match shape {
            Shape::Never => false,
            Shape::Eps => mask == 0,
            Shape::Lit(a) => mask.count_ones() == 1 && p.label(mask.trailing_zeros() as usize) == a,
            Shape::Or(cs) => cs.iter().any(|&c| self.at(q, c, mask)),
            Shape::Par(cs) => {
                let comps = p.par_blocks(mask);
                split_parallel(&comps, cs.len(), &mut |i, m| self.at(q, cs[i], m)).is_some()
            }
            Shape::Seq(..) | Shape::Rep { .. } | Shape::Dia(..) => self.sequential(q, n, mask).is_some(),
            Shape::Pres(rho, out) => {
                let comps = p.par_blocks(mask);
                assign_positions(&comps, &rho, &mut |j, m| self.at(q, out[j].0, m)).is_some()
            }
        }
    }

    /// Pieces of a sequential shape as (child node, out-position, piece).
    fn sequential(&mut self, q: &mut Query, n: usize, mask: Mask) -> Option<Vec<(usize, usize, Mask)>> {
        let shape = self.net.shapes[n].clone();
        let blocks = if mask == 0 { Vec::new() } else { q.poset.seq_blocks(mask) };
        match shape {
            Shape::Seq(cs, allow_eps) => {
                let pieces = split_children(&blocks, cs.len(), allow_eps, &mut |i, m| self.at(q, cs[i], m))?;
                Some(pieces.into_iter().enumerate().map(|(i, m)| (cs[i], i, m)).collect())
            }
            Shape::Rep { child, min, needs_eps } => {
                if needs_eps && !self.at(q, child, 0) {
                    return None;
                }
                let pieces = split_repeat(&blocks, min, &mut |m| self.at(q, child, m))?;
                Some(pieces.into_iter().map(|m| (child, 0, m)).collect())
            }
            Shape::Dia(a, b, min) => {
                let pieces = split_alternating(&blocks, min, &mut |k, m| self.at(q, [a, b][k], m))?;
                Some(pieces.into_iter().map(|(k, m)| ([a, b][k], k, m)).collect())
            }
            _ => None,
        }
    }

    fn witness(&mut self, q: &mut Query, n: usize, mask: Mask) -> Option<PathTree> {
        if !self.at(q, n, mask) {
            return None;
        }
        let shape = self.net.shapes[n].clone();
        let p = q.poset;
        let tree = |decoration, children| PathTree { node: n, decoration, elements: mask, children };
        match shape {
            Shape::Lit(a) => Some(tree(Decoration::Letter(a), vec![])),
            Shape::Pres(rho, out) => {
                let comps = p.par_blocks(mask);
                let (y, pick) = assign_positions(&comps, &rho, &mut |j, m| self.at(q, out[j].0, m))?;
                let mut children = Vec::new();
                for (c, j) in comps.into_iter().zip(pick) {
                    children.push(Step { position: j, tree: self.witness(q, out[j].0, c)? });
                }
                children.sort_by_key(|s| s.position);
                Some(tree(Decoration::Vector(y), children))
            }
            Shape::Seq(..) | Shape::Rep { .. } | Shape::Dia(..) => {
                let pieces = self.sequential(q, n, mask)?;
                let k = pieces.len();
                let mut children = Vec::new();
                for (c, pos, m) in pieces {
                    children.push(Step { position: pos, tree: self.witness(q, c, m)? });
                }
                let deco = if matches!(self.net.shapes[n], Shape::Dia(..)) { Decoration::Order(k) } else { Decoration::Arity(k) };
                Some(tree(deco, children))
            }
            // Expression-only shapes carry no path structure.
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Decoration {
    Letter(String),
    /// Number of sequential pieces under a `seq1`, `star1`, ordinal or ω node.
    Arity(usize),
    /// Number of pieces `|J ∪ Ĵ*|` under a ⋄ node, ε padding included.
    Order(usize),
    /// Count vector chosen at a Presburger node.
    Vector(Vec<u64>),
}

/// A path of a D-graph from `node`, labeled by the sub-poset `elements`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathTree {
    pub node: usize,
    pub decoration: Decoration,
    pub elements: Mask,
    pub children: Vec<Step>,
}

/// A direct sub-path together with the out-position of the edge taken.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Step {
    pub position: usize,
    pub tree: PathTree,
}

/// A factor marked by the special edge `edge` (source, target).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MarkedFactor {
    pub elements: Mask,
    pub edge: (usize, usize),
}

impl PathTree {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|s| s.tree.size()).sum::<usize>()
    }

    /// Factors started by a special edge anywhere in the tree.
    pub fn marked_factors(&self, d: &DGraph) -> Vec<MarkedFactor> {
        let mut out = Vec::new();
        self.collect_marks(d, &mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_marks(&self, d: &DGraph, out: &mut Vec<MarkedFactor>) {
        for s in &self.children {
            let e = d.out[self.node][s.position];
            if e.special {
                out.push(MarkedFactor { elements: s.tree.elements, edge: (self.node, e.to) });
            }
            s.tree.collect_marks(d, out);
        }
    }
}

pub fn member_expr(e: &Expr, p: &SpTerm) -> Result<bool> {
    Decider::new(Net::from_expr(e)?).member(p)
}

pub fn member_dgraph(d: &DGraph, p: &SpTerm) -> Result<bool> {
    Decider::new(Net::from_dgraph(d)?).member(p)
}

/// Reusable deciders for repeated queries against one language.
pub struct ExprMembership(Decider);

impl ExprMembership {
    pub fn new(e: &Expr) -> Result<Self> {
        Ok(Self(Decider::new(Net::from_expr(e)?)))
    }

    pub fn member(&mut self, p: &SpTerm) -> Result<bool> {
        self.0.member(p)
    }
}

pub struct DGraphMembership(Decider);

impl DGraphMembership {
    pub fn new(d: &DGraph) -> Result<Self> {
        Ok(Self(Decider::new(Net::from_dgraph(d)?)))
    }

    pub fn member(&mut self, p: &SpTerm) -> Result<bool> {
        self.0.member(p)
    }

    /// A path from `node` labeled by the sub-poset `mask` of `poset`.
    pub fn find_path_at(&mut self, poset: &Poset, node: usize, mask: Mask) -> Option<PathTree> {
        let mut q = Query { poset, terms: HashMap::new() };
        self.0.witness(&mut q, node, mask)
    }
}

/// A path from the root labeled by `p`, elements numbered as in
/// `Poset::from_term(p)`.
pub fn find_path(d: &DGraph, p: &SpTerm) -> Result<Option<PathTree>> {
    let poset = Poset::from_term(p)?;
    let mut m = DGraphMembership::new(d)?;
    Ok(m.find_path_at(&poset, d.root, poset.full()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeciderKind {
    Expr,
    Dgraph,
    Pmso,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MemberVerdict {
    pub value: bool,
    pub witness: Option<PathTree>,
    pub decider: DeciderKind,
}

/// Checks a path tree locally against the path rules of the graph.
pub fn verify_path(d: &DGraph, poset: &Poset, t: &PathTree, mask: Mask) -> Result<()> {
    let fail = |msg: String| Err(Error::InvalidPath(format!("at {}: {msg}", DGraph::name(t.node))));
    if t.node >= d.len() {
        return Err(Error::InvalidPath(format!("node {} out of range", t.node)));
    }
    if t.elements != mask {
        return fail(format!("covers {:#x}, expected {mask:#x}", t.elements));
    }
    let out = &d.out[t.node];
    for s in &t.children {
        if s.position >= out.len() {
            return fail(format!("position {} out of range", s.position));
        }
        if s.tree.node != out[s.position].to {
            return fail(format!("position {} leads to {}", s.position, DGraph::name(out[s.position].to)));
        }
    }
    let covered = t.children.iter().try_fold(0u64, |acc, s| {
        if acc & s.tree.elements != 0 {
            Err(())
        } else {
            Ok(acc | s.tree.elements)
        }
    });
    if !matches!(d.labels[t.node], Label::Letter(_)) && covered != Ok(mask) {
        return fail("children do not partition the elements".into());
    }
    let nonempty = t.children.iter().filter(|s| s.tree.elements != 0).count();
    let in_series = |ts: &[Step]| {
        let parts: Vec<Mask> = ts.iter().map(|s| s.tree.elements).filter(|&m| m != 0).collect();
        parts.iter().enumerate().all(|(i, &a)| parts[i + 1..].iter().all(|&b| elems(a).all(|x| poset.above(x) & b == b)))
    };
    match (&d.labels[t.node], &t.decoration) {
        (Label::Letter(a), Decoration::Letter(b)) => {
            if a != b || mask.count_ones() != 1 || poset.label(mask.trailing_zeros() as usize) != a || !t.children.is_empty() {
                return fail("letter leaf does not match".into());
            }
        }
        (Label::Pres(rho), Decoration::Vector(y)) => {
            if y.len() != out.len() || !rho.contains(y) {
                return fail(format!("vector {y:?} not in the node's set"));
            }
            for (j, &yj) in y.iter().enumerate() {
                if t.children.iter().filter(|s| s.position == j).count() as u64 != yj {
                    return fail(format!("position {} used a wrong number of times", j + 1));
                }
            }
            if nonempty != t.children.len() {
                return fail("empty piece under a Presburger node".into());
            }
            for (i, a) in t.children.iter().enumerate() {
                for b in &t.children[i + 1..] {
                    if elems(a.tree.elements).any(|x| poset.comparable(x) & b.tree.elements != 0) {
                        return fail("pieces are not in parallel".into());
                    }
                }
            }
        }
        (Label::Op(op), Decoration::Arity(k)) if *op != Op::Dia1 => {
            if *k != t.children.len() || nonempty < 2 || !in_series(&t.children) {
                return fail("sequential pieces malformed".into());
            }
            if *op == Op::Seq1 && (t.children.len() != 2 || t.children[0].position != 0 || t.children[1].position != 1) {
                return fail("seq1 takes one piece per child".into());
            }
            if matches!(op, Op::Omega1 | Op::MOmega1) && !matches!(&d.labels[out[0].to], Label::Pres(s) if s.contains_zero()) {
                return fail("ω product over a child without ε".into());
            }
        }
        (Label::Op(Op::Dia1), Decoration::Order(k)) => {
            let alternating = t.children.iter().enumerate().all(|(i, s)| s.position == i % 2);
            if *k != t.children.len() || k % 2 == 0 || *k < 3 || !alternating || nonempty < 2 || !in_series(&t.children) {
                return fail("alternation malformed".into());
            }
        }
        _ => return fail("decoration does not fit the label".into()),
    }
    for s in &t.children {
        verify_path(d, poset, &s.tree, s.tree.elements)?;
    }
    Ok(())
}

/// Checks a membership witness: a path tree from the root covering the whole
/// poset.
pub fn verify_witness(d: &DGraph, poset: &Poset, t: &PathTree) -> Result<()> {
    if t.node != d.root {
        return Err(Error::InvalidPath(format!("starts at {}, not at the root", DGraph::name(t.node))));
    }
    verify_path(d, poset, t, poset.full())
}

/// Default ceiling on the number of posets held per node while enumerating.
pub const ENUM_LIMIT: usize = 200_000;

/// All posets with at most `n` elements in the language, sorted by size then
/// text. Built bottom-up from explicit products, independently of the
/// deciders above.
pub fn enumerate_language(e: &Expr, n: usize) -> Result<Vec<SpTerm>> {
    enumerate_net(&Net::from_expr(e)?, n)
}

pub fn enumerate_dgraph(d: &DGraph, n: usize) -> Result<Vec<SpTerm>> {
    enumerate_net(&Net::from_dgraph(d)?, n)
}

type Lang = HashSet<SpTerm>;

fn enumerate_net(net: &Net, n: usize) -> Result<Vec<SpTerm>> {
    let mut langs: Vec<Lang> = vec![Lang::new(); net.shapes.len()];
    loop {
        let mut changed = false;
        for id in 0..net.shapes.len() {
            let next = eval_lang(&net.shapes[id], &langs, n)?;
            if next.len() > ENUM_LIMIT {
                return Err(Error::ResourceBound(format!("more than {ENUM_LIMIT} posets in a sub-language")));
            }
            if next != langs[id] {
                langs[id] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<SpTerm> = langs[net.root].iter().cloned().collect();
    out.sort_by_cached_key(|t| (t.size(), t.to_string()));
    Ok(out)
}

fn products(acc: &Lang, with: &Lang, n: usize, par: bool) -> Lang {
    let mut out = Lang::new();
    for a in acc {
        for b in with {
            if a.size() + b.size() <= n {
                out.insert(if par { SpTerm::par(vec![a.clone(), b.clone()]) } else { SpTerm::seq(vec![a.clone(), b.clone()]) });
            }
        }
    }
    out
}

fn nonempty(l: &Lang) -> Lang {
    l.iter().filter(|t| !t.is_empty()).cloned().collect()
}

fn eval_lang(shape: &Shape, langs: &[Lang], n: usize) -> Result<Lang> {
    let eps = || Lang::from([SpTerm::Empty]);
    Ok(match shape {
        Shape::Never => Lang::new(),
        Shape::Eps => eps(),
        Shape::Lit(a) => {
            if n >= 1 {
                Lang::from([SpTerm::letter(a)])
            } else {
                Lang::new()
            }
        }
        Shape::Or(cs) => cs.iter().flat_map(|&c| langs[c].iter().cloned()).collect(),
        Shape::Par(cs) => cs.iter().fold(eps(), |acc, &c| products(&acc, &langs[c], n, true)),
        Shape::Seq(cs, allow_eps) => cs.iter().fold(eps(), |acc, &c| {
            let piece = if *allow_eps { langs[c].clone() } else { nonempty(&langs[c]) };
            products(&acc, &piece, n, false)
        }),
        Shape::Rep { child, min, needs_eps } => {
            if *needs_eps && !langs[*child].contains(&SpTerm::Empty) {
                return Ok(Lang::new());
            }
            let plus = nonempty(&langs[*child]);
            let mut out = if *min == 0 { eps() } else { Lang::new() };
            let mut level = plus.clone();
            let mut k = 1;
            while !level.is_empty() {
                if k >= *min {
                    out.extend(level.iter().cloned());
                }
                level = products(&level, &plus, n, false);
                k += 1;
            }
            out
        }
        Shape::Dia(a, b, min) => {
            // States: (poset so far, next kind, non-empty pieces capped).
            let kinds = [&langs[*a], &langs[*b]];
            let start = (SpTerm::Empty, 0usize, 0usize);
            let mut seen = HashSet::from([start.clone()]);
            let mut todo = vec![start];
            let mut out = Lang::new();
            while let Some((t, kind, c)) = todo.pop() {
                if kind == 1 && c >= *min {
                    out.insert(t.clone());
                }
                for piece in kinds[kind] {
                    if t.size() + piece.size() > n {
                        continue;
                    }
                    let c2 = if piece.is_empty() { c } else { (c + 1).min(*min) };
                    let next = (SpTerm::seq(vec![t.clone(), piece.clone()]), 1 - kind, c2);
                    if seen.insert(next.clone()) {
                        todo.push(next);
                    }
                }
            }
            out
        }
        Shape::Pres(rho, out) => {
            // Depth-first over positions, tracking the count vector.
            let k = out.len();
            let mut acc: HashSet<(Vec<u64>, SpTerm)> = HashSet::from([(vec![], SpTerm::Empty)]);
            for &(to, _) in out {
                let plus = nonempty(&langs[to]);
                let mut next = HashSet::new();
                for (y, t) in &acc {
                    let mut layer = HashSet::from([t.clone()]);
                    let mut count = 0u64;
                    while !layer.is_empty() {
                        for u in &layer {
                            let mut y2 = y.clone();
                            y2.push(count);
                            next.insert((y2, u.clone()));
                        }
                        layer = products(&layer, &plus, n, true);
                        count += 1;
                    }
                }
                acc = next;
                if acc.len() > ENUM_LIMIT {
                    return Err(Error::ResourceBound("too many partial products at a Presburger node".into()));
                }
            }
            acc.into_iter().filter(|(y, _)| y.len() == k && rho.contains(y)).map(|(_, t)| t).collect()
        }
    })
}

/// Whether factor `a` is strictly inside `b` with a witness in `b \ a`
/// incomparable to all of `a`.
fn nested_with_witness(p: &Poset, a: Mask, b: Mask) -> bool {
    a & !b == 0 && a != b && elems(b & !a).any(|x| p.comparable(x) & a == 0)
}

/// Two factors marked by the same special edge are disjoint, or nested with
/// an element of the larger one in parallel with the smaller.
pub fn marks_are_separated(p: &Poset, marks: &[MarkedFactor]) -> bool {
    marks.iter().enumerate().all(|(i, f)| {
        marks[i + 1..].iter().filter(|g| g.edge == f.edge).all(|g| {
            f.elements & g.elements == 0
                || nested_with_witness(p, f.elements, g.elements)
                || nested_with_witness(p, g.elements, f.elements)
        })
    })
}

//! D-graphs: rooted graphs with ordered, duplicable out-edges, built from
//! ">1" expressions. Presburger labels are semilinear sets whose coordinate
//! `j` counts the pieces drawn through out-position `j` (1-based).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rexpr::Expr;
use crate::semilinear::{star_subst, subst_disjoint, LinearSet, SemiLinear};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Seq1,
    Star1,
    Dia1,
    Omega1,
    MOmega1,
    Ord1,
    MOrd1,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Seq1 | Op::Dia1 => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Seq1 => "seq1",
            Op::Star1 => "star1",
            Op::Dia1 => "dia1",
            Op::Omega1 => "omega1",
            Op::MOmega1 => "momega1",
            Op::Ord1 => "ord1",
            Op::MOrd1 => "mord1",
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        [Op::Seq1, Op::Star1, Op::Dia1, Op::Omega1, Op::MOmega1, Op::Ord1, Op::MOrd1]
            .into_iter()
            .find(|o| o.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Label {
    Letter(String),
    Pres(SemiLinear),
    Op(Op),
}

impl Label {
    pub fn is_pres(&self) -> bool {
        matches!(self, Label::Pres(_))
    }

    pub fn is_letter(&self, x: &str) -> bool {
        matches!(self, Label::Letter(a) if a == x)
    }

    pub fn pres(&self) -> Option<&SemiLinear> {
        match self {
            Label::Pres(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub to: usize,
    pub special: bool,
}

impl Edge {
    fn normal(to: usize) -> Edge {
        Edge { to, special: false }
    }
}

/// Nodes are numbered `0..len()` in pre-order of the normal edges; node `k`
/// is displayed as `n{k+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DGraph {
    pub labels: Vec<Label>,
    pub out: Vec<Vec<Edge>>,
    pub root: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub pp: bool,
    pub ss: bool,
    pub dag: bool,
    pub xi_normalized: bool,
}

impl PropertyReport {
    pub fn all(&self) -> bool {
        self.pp && self.ss && self.dag && self.xi_normalized
    }
}

/// Mutable node store shared by every sub-graph of one build.
#[derive(Clone, Debug, Default)]
struct Arena {
    labels: Vec<Label>,
    out: Vec<Vec<Edge>>,
}

impl Arena {
    fn add(&mut self, label: Label, out: Vec<Edge>) -> usize {
        self.labels.push(label);
        self.out.push(out);
        self.labels.len() - 1
    }

    fn reachable(&self, root: usize) -> Vec<usize> {
        let mut seen = vec![false; self.labels.len()];
        let mut stack = vec![root];
        let mut order = Vec::new();
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            order.push(n);
            for e in self.out[n].iter().rev() {
                if !seen[e.to] {
                    stack.push(e.to);
                }
            }
        }
        order
    }

    fn pp_suppress(&mut self, root: usize) -> Result<()> {
        loop {
            let mut hit = None;
            'scan: for p in self.reachable(root) {
                if !self.labels[p].is_pres() {
                    continue;
                }
                for (i, e) in self.out[p].iter().enumerate() {
                    if self.labels[e.to].is_pres() {
                        hit = Some((p, i, e.to));
                        break 'scan;
                    }
                }
            }
            let Some((p, i, n)) = hit else { return Ok(()) };
            if n == p || self.out[n].iter().any(|e| self.labels[e.to].is_pres()) {
                return Err(Error::PreconditionViolated(
                    "three consecutive Presburger-labeled nodes before PP-suppression".into(),
                ));
            }
            let (inner, outer) = (self.labels[n].pres().unwrap(), self.labels[p].pres().unwrap());
            let composed = subst_disjoint(inner, outer, i + 1)?;
            let spliced: Vec<Edge> =
                self.out[p][..i].iter().chain(self.out[n].iter()).chain(self.out[p][i + 1..].iter()).copied().collect();
            self.labels[p] = Label::Pres(composed);
            self.out[p] = spliced;
        }
    }

    fn xi_normalize(&mut self, root: usize, xi: &str) {
        // Step 1: ξ-children of the root are not shared with other nodes.
        let root_xi: BTreeSet<usize> =
            self.out[root].iter().map(|e| e.to).filter(|&x| self.labels[x].is_letter(xi)).collect();
        if !root_xi.is_empty() {
            for n in self.reachable(root) {
                if n == root {
                    continue;
                }
                let mut fresh: HashMap<Edge, usize> = HashMap::new();
                for k in 0..self.out[n].len() {
                    let e = self.out[n][k];
                    if root_xi.contains(&e.to) {
                        let y = match fresh.get(&e) {
                            Some(&y) => y,
                            None => {
                                let y = self.add(Label::Letter(xi.to_string()), vec![]);
                                fresh.insert(e, y);
                                y
                            }
                        };
                        self.out[n][k] = Edge::normal(y);
                    }
                }
            }
        }
        // Step 2: a Presburger node keeps at most one ξ position.
        for n in self.reachable(root) {
            let Label::Pres(rho) = &self.labels[n] else { continue };
            let pos: Vec<usize> = (0..self.out[n].len()).filter(|&j| self.labels[self.out[n][j].to].is_letter(xi)).collect();
            if pos.len() < 2 {
                continue;
            }
            let merged = rho.merge_coords(&pos.iter().map(|j| j + 1).collect::<Vec<_>>());
            let n0 = self.add(Label::Letter(xi.to_string()), vec![]);
            let mut out = vec![Edge::normal(n0)];
            out.extend(self.out[n].iter().enumerate().filter(|(j, _)| !pos.contains(j)).map(|(_, e)| *e));
            self.labels[n] = Label::Pres(merged);
            self.out[n] = out;
        }
    }

    fn normalize_all(&mut self, root: usize, xis: &BTreeSet<String>) {
        for x in xis {
            self.xi_normalize(root, x);
        }
    }

    fn build(&mut self, e: &Expr, xis: &BTreeSet<String>) -> Result<usize> {
        let root = self.build_step(e, xis)?;
        self.normalize_all(root, xis);
        Ok(root)
    }

    fn pres_node(&mut self, set: SemiLinear, children: Vec<usize>) -> Result<usize> {
        let r = self.add(Label::Pres(set), children.into_iter().map(Edge::normal).collect());
        self.pp_suppress(r)?;
        Ok(r)
    }

    fn build_step(&mut self, e: &Expr, xis: &BTreeSet<String>) -> Result<usize> {
        let op = |o: Op, cs: Vec<usize>, a: &mut Arena| a.add(Label::Op(o), cs.into_iter().map(Edge::normal).collect());
        match e {
            Expr::Eps => Ok(self.add(Label::Pres(SemiLinear::tautology()), vec![])),
            Expr::Empty => Ok(self.add(Label::Pres(SemiLinear::empty(0)), vec![])),
            Expr::Letter(a) => Ok(self.add(Label::Letter(a.clone()), vec![])),
            Expr::Or(cs) | Expr::Par(cs) => {
                let k = cs.len();
                let roots = cs.iter().map(|c| self.build(c, xis)).collect::<Result<Vec<_>>>()?;
                let set = if matches!(e, Expr::Or(_)) {
                    SemiLinear::points(k, (0..k).map(|i| unit(k, i)))
                } else {
                    SemiLinear::points(k, [vec![1; k]])
                };
                self.pres_node(set, roots)
            }
            Expr::Seq1(cs) => {
                // n-ary seq1 is the right-nested binary operator.
                let mut it = cs.iter().rev();
                let mut acc = self.build(it.next().expect("seq1 has children"), xis)?;
                for c in it {
                    let a = self.build(c, xis)?;
                    acc = op(Op::Seq1, vec![a, acc], self);
                    self.normalize_all(acc, xis);
                }
                Ok(acc)
            }
            Expr::Dia1(a, b) => {
                let (ra, rb) = (self.build(a, xis)?, self.build(b, xis)?);
                Ok(op(Op::Dia1, vec![ra, rb], self))
            }
            Expr::Star1(c) | Expr::Omega1(c) | Expr::MOmega1(c) | Expr::Ord1(c) | Expr::MOrd1(c) => {
                let o = match e {
                    Expr::Star1(_) => Op::Star1,
                    Expr::Omega1(_) => Op::Omega1,
                    Expr::MOmega1(_) => Op::MOmega1,
                    Expr::Ord1(_) => Op::Ord1,
                    _ => Op::MOrd1,
                };
                let r = self.build(c, xis)?;
                Ok(op(o, vec![r], self))
            }
            Expr::Sub(x, inner, outer) => {
                if matches!(&**outer, Expr::Letter(l) if l == x) {
                    return self.build(inner, xis);
                }
                let r1 = self.build(inner, xis)?;
                let r2 = self.build(outer, xis)?;
                self.substitute(r1, r2, x)?;
                Ok(r2)
            }
            Expr::IStar(x, c) => {
                let r = self.build(c, xis)?;
                self.iterate(r, x)
            }
            Expr::Seq(_) | Expr::Star(_) | Expr::Omega(_) | Expr::MOmega(_) | Expr::Ord(_) | Expr::MOrd(_)
            | Expr::Dia(..) | Expr::DiaShort(_) => {
                Err(Error::ValidationFailed(vec![format!("not a >1 expression: {e}")]))
            }
        }
    }

    /// Every ξ node under `r2` takes the label and edging of `r1`.
    fn substitute(&mut self, r1: usize, r2: usize, x: &str) -> Result<()> {
        let targets: Vec<usize> = self.reachable(r2).into_iter().filter(|&n| self.labels[n].is_letter(x)).collect();
        for n in targets {
            self.labels[n] = self.labels[r1].clone();
            self.out[n] = self.out[r1].clone();
            self.pp_suppress(r2)?;
        }
        Ok(())
    }

    fn iterate(&mut self, r0: usize, x: &str) -> Result<usize> {
        // First step: a Presburger root with exactly one ξ child at a unit
        // position.
        let r = match self.labels[r0].clone() {
            Label::Pres(rho) => {
                let k = self.out[r0].len();
                match (0..k).find(|&j| self.labels[self.out[r0][j].to].is_letter(x)) {
                    Some(i) => self.labels[r0] = Label::Pres(star_subst(&rho, i + 1)?),
                    None => {
                        let xn = self.add(Label::Letter(x.to_string()), vec![]);
                        let widened = rho.pad(k + 1)?.union(&SemiLinear::unit(k + 1, k + 1))?;
                        self.labels[r0] = Label::Pres(widened);
                        self.out[r0].push(Edge::normal(xn));
                    }
                }
                r0
            }
            _ => {
                let xn = self.add(Label::Letter(x.to_string()), vec![]);
                let or = SemiLinear::points(2, [vec![1, 0], vec![0, 1]]);
                let r = self.add(Label::Pres(or), vec![Edge::normal(r0), Edge::normal(xn)]);
                self.xi_normalize(r, x);
                r
            }
        };
        // Second step: every other ξ node becomes a copy of the root whose
        // edges are special.
        let direct: BTreeSet<usize> = self.out[r].iter().map(|e| e.to).collect();
        let targets: Vec<usize> = self
            .reachable(r)
            .into_iter()
            .filter(|&n| self.labels[n].is_letter(x) && !direct.contains(&n))
            .collect();
        for n in targets {
            self.labels[n] = self.labels[r].clone();
            self.out[n] = self.out[r].iter().map(|e| Edge { to: e.to, special: true }).collect();
            self.pp_suppress(r)?;
        }
        Ok(r)
    }

    /// Compacts to the nodes reachable from `root`, numbered in pre-order of
    /// the normal edges; nodes reached only through special edges follow.
    fn finish(&self, root: usize) -> DGraph {
        let mut order: Vec<usize> = Vec::new();
        let mut seen = vec![false; self.labels.len()];
        fn dfs(a: &Arena, n: usize, seen: &mut [bool], order: &mut Vec<usize>) {
            if std::mem::replace(&mut seen[n], true) {
                return;
            }
            order.push(n);
            for e in a.out[n].iter().filter(|e| !e.special) {
                dfs(a, e.to, seen, order);
            }
        }
        dfs(self, root, &mut seen, &mut order);
        for n in self.reachable(root) {
            if !seen[n] {
                dfs(self, n, &mut seen, &mut order);
            }
        }
        let index: HashMap<usize, usize> = order.iter().enumerate().map(|(k, &n)| (n, k)).collect();
        DGraph {
            labels: order.iter().map(|&n| self.labels[n].clone()).collect(),
            out: order
                .iter()
                .map(|&n| self.out[n].iter().map(|e| Edge { to: index[&e.to], special: e.special }).collect())
                .collect(),
            root: 0,
        }
    }
}

fn unit(k: usize, i: usize) -> Vec<u64> {
    let mut v = vec![0; k];
    v[i] = 1;
    v
}

impl DGraph {
    /// Builds the D-graph of a ">1" expression, normalizing with respect to
    /// every substitution letter of the expression.
    pub fn build(e: &Expr) -> Result<DGraph> {
        Self::build_with(e, &e.substitution_letters())
    }

    /// As [`DGraph::build`], normalizing with respect to `xis` as well.
    pub fn build_with(e: &Expr, xis: &BTreeSet<String>) -> Result<DGraph> {
        if !e.is_gt1() {
            return Err(Error::ValidationFailed(vec![format!("not a >1 expression: {e}")]));
        }
        let mut all = xis.clone();
        all.extend(e.substitution_letters());
        let mut a = Arena::default();
        let root = a.build(e, &all)?;
        Ok(a.finish(root))
    }

    /// Validates a rational expression, rewrites it and builds its D-graph.
    pub fn from_rational(e: &Expr) -> Result<DGraph> {
        DGraph::build(&e.to_gt1()?)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(k: usize) -> String {
        format!("n{}", k + 1)
    }

    pub fn special_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges(true)
    }

    pub fn normal_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges(false)
    }

    fn edges(&self, special: bool) -> BTreeSet<(usize, usize)> {
        (0..self.len())
            .flat_map(|n| self.out[n].iter().filter(move |e| e.special == special).map(move |e| (n, e.to)))
            .collect()
    }

    /// Nodes whose edging has no normal edge.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.out[n].iter().all(|e| e.special)).collect()
    }

    /// Re-runs ξ-normalization on a finished graph.
    pub fn xi_normalize(&self, xi: &str) -> DGraph {
        let mut a = self.arena();
        a.xi_normalize(self.root, xi);
        a.finish(self.root)
    }

    /// Re-runs PP-suppression on a finished graph.
    pub fn pp_suppress(&self) -> Result<DGraph> {
        let mut a = self.arena();
        a.pp_suppress(self.root)?;
        Ok(a.finish(self.root))
    }

    fn arena(&self) -> Arena {
        Arena { labels: self.labels.clone(), out: self.out.clone() }
    }

    /// Arity constraints of the label alphabet.
    pub fn check_arity(&self) -> Result<()> {
        for (n, l) in self.labels.iter().enumerate() {
            let k = self.out[n].len();
            let want = match l {
                Label::Letter(_) => 0,
                Label::Pres(s) => s.dim,
                Label::Op(o) => o.arity(),
            };
            if k != want {
                return Err(Error::InvalidPath(format!("{} has {k} out-edges, label needs {want}", Self::name(n))));
            }
            if let Some(e) = self.out[n].iter().find(|e| e.to >= self.len()) {
                return Err(Error::InvalidPath(format!("{} points to missing node {}", Self::name(n), e.to)));
            }
        }
        if self.root >= self.len() {
            return Err(Error::InvalidPath("root out of range".into()));
        }
        Ok(())
    }

    pub fn check_properties(&self, xis: &BTreeSet<String>) -> PropertyReport {
        let pres = |n: usize| self.labels[n].is_pres();
        let all_edges = (0..self.len()).flat_map(|n| self.out[n].iter().map(move |e| (n, *e)));
        let pp = !all_edges.clone().any(|(n, e)| pres(n) && pres(e.to));
        let ss = !all_edges.clone().any(|(_, e)| e.special && pres(e.to));
        PropertyReport { pp, ss, dag: self.normal_acyclic(), xi_normalized: xis.iter().all(|x| self.is_xi_normalized(x)) }
    }

    fn normal_acyclic(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done.
        let mut state = vec![0u8; self.len()];
        fn visit(g: &DGraph, n: usize, state: &mut [u8]) -> bool {
            match state[n] {
                1 => return false,
                2 => return true,
                _ => {}
            }
            state[n] = 1;
            for e in g.out[n].iter().filter(|e| !e.special) {
                if !visit(g, e.to, state) {
                    return false;
                }
            }
            state[n] = 2;
            true
        }
        (0..self.len()).all(|n| visit(self, n, &mut state))
    }

    pub fn is_xi_normalized(&self, xi: &str) -> bool {
        let root_xi: BTreeSet<usize> =
            self.out[self.root].iter().map(|e| e.to).filter(|&x| self.labels[x].is_letter(xi)).collect();
        let shared = (0..self.len()).any(|n| n != self.root && self.out[n].iter().any(|e| root_xi.contains(&e.to)));
        let crowded = (0..self.len()).any(|n| {
            self.labels[n].is_pres() && self.out[n].iter().filter(|e| self.labels[e.to].is_letter(xi)).count() > 1
        });
        !shared && !crowded
    }

    /// Whether the empty poset is accepted, read off the root label.
    pub fn root_accepts_empty(&self) -> bool {
        matches!(&self.labels[self.root], Label::Pres(s) if s.contains_zero())
    }

    /// An edge may be crossed from a Presburger node at position `j` only if
    /// the unit vector `1_j` is in its set.
    fn unit_gate(&self, n: usize, j: usize) -> bool {
        match &self.labels[n] {
            Label::Pres(s) => s.contains_unit(j + 1),
            _ => true,
        }
    }

    /// Nodes reachable from `start` through unit-gated edges, and whether a
    /// gated special edge can be crossed on the way.
    fn gated_reach(&self, start: usize) -> (Vec<bool>, bool) {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        let mut special = false;
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            for (j, e) in self.out[n].iter().enumerate() {
                if self.unit_gate(n, j) {
                    special |= e.special;
                    stack.push(e.to);
                }
            }
        }
        (seen, special)
    }

    /// No root path of unit-gated edges ends in a special edge, and no
    /// special edge starts such a path ending in another special edge.
    pub fn special_paths_guarded(&self) -> bool {
        if self.gated_reach(self.root).1 {
            return false;
        }
        for n in 0..self.len() {
            for (j, e) in self.out[n].iter().enumerate() {
                if e.special && self.unit_gate(n, j) && self.gated_reach(e.to).1 {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph D {\n");
        for (n, l) in self.labels.iter().enumerate() {
            let text = match l {
                Label::Letter(a) => a.clone(),
                Label::Pres(p) => p.to_string(),
                Label::Op(o) => o.name().to_string(),
            };
            let shape = if n == self.root { ", shape=doublecircle" } else { "" };
            let _ = writeln!(s, "  {} [label=\"{}: {}\"{}];", Self::name(n), Self::name(n), text.replace('"', "'"), shape);
        }
        for n in 0..self.len() {
            for (j, e) in self.out[n].iter().enumerate() {
                let style = if e.special { ", style=dashed" } else { "" };
                let _ = writeln!(s, "  {} -> {} [label=\"{}\"{}];", Self::name(n), Self::name(e.to), j + 1, style);
            }
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphDoc::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<DGraph> {
        let doc: GraphDoc = serde_json::from_str(text).map_err(|e| Error::Syntax { pos: e.column(), msg: e.to_string() })?;
        doc.try_into()
    }
}

/// Reachability test: whether some `P1 ξ P2` is in the language,
/// i.e. a ξ node is reachable from the root through unit-gated edges.
pub fn xi_series_check(d: &DGraph, xi: &str) -> bool {
    if d.len() == 1 && d.labels[d.root].is_letter(xi) {
        return true;
    }
    let (seen, _) = d.gated_reach(d.root);
    (0..d.len()).any(|n| seen[n] && n != d.root && d.labels[n].is_letter(xi))
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    root: usize,
    nodes: Vec<NodeDoc>,
    out: BTreeMap<String, Vec<Edge>>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    label: LabelDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
enum LabelDoc {
    Letter(String),
    Pres(SemiLinearDoc),
    Op(Op),
}

#[derive(Serialize, Deserialize)]
struct SemiLinearDoc {
    dim: usize,
    components: Vec<LinearSet>,
}

impl From<&DGraph> for GraphDoc {
    fn from(d: &DGraph) -> GraphDoc {
        GraphDoc {
            root: d.root + 1,
            nodes: d
                .labels
                .iter()
                .enumerate()
                .map(|(n, l)| NodeDoc {
                    id: n + 1,
                    label: match l {
                        Label::Letter(a) => LabelDoc::Letter(a.clone()),
                        Label::Pres(s) => LabelDoc::Pres(SemiLinearDoc { dim: s.dim, components: s.components.clone() }),
                        Label::Op(o) => LabelDoc::Op(*o),
                    },
                })
                .collect(),
            out: (0..d.len())
                .map(|n| ((n + 1).to_string(), d.out[n].iter().map(|e| Edge { to: e.to + 1, special: e.special }).collect()))
                .collect(),
        }
    }
}

impl TryFrom<GraphDoc> for DGraph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<DGraph> {
        let n = doc.nodes.len();
        let mut labels = vec![None; n];
        for node in doc.nodes {
            if node.id == 0 || node.id > n {
                return Err(Error::InvalidPath(format!("node id {} out of range", node.id)));
            }
            labels[node.id - 1] = Some(match node.label {
                LabelDoc::Letter(a) => Label::Letter(a),
                LabelDoc::Pres(s) => Label::Pres(SemiLinear::new(s.dim, s.components)?),
                LabelDoc::Op(o) => Label::Op(o),
            });
        }
        let labels: Vec<Label> =
            labels.into_iter().collect::<Option<_>>().ok_or_else(|| Error::InvalidPath("duplicate node id".into()))?;
        let mut out = vec![Vec::new(); n];
        for (k, es) in doc.out {
            let id: usize = k.parse().map_err(|_| Error::InvalidPath(format!("bad node key {k}")))?;
            if id == 0 || id > n || es.iter().any(|e| e.to == 0 || e.to > n) {
                return Err(Error::InvalidPath(format!("edge list of {k} out of range")));
            }
            out[id - 1] = es.into_iter().map(|e| Edge { to: e.to - 1, special: e.special }).collect();
        }
        if doc.root == 0 || doc.root > n {
            return Err(Error::InvalidPath("root out of range".into()));
        }
        let d = DGraph { labels, out, root: doc.root - 1 };
        d.check_arity()?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semilinear::from_constraints;

    fn gt1(s: &str) -> Expr {
        Expr::parse(s).unwrap().to_gt1().unwrap()
    }

    fn built(s: &str) -> DGraph {
        DGraph::build(&gt1(s)).unwrap()
    }

    fn pres(d: &DGraph, n: usize) -> &SemiLinear {
        d.labels[n].pres().expect("Presburger node")
    }

    fn named(edges: BTreeSet<(usize, usize)>) -> Vec<String> {
        edges.into_iter().map(|(a, b)| format!("{}->{}", DGraph::name(a), DGraph::name(b))).collect()
    }

    #[test]
    fn substituted_iteration_graph() {
        let d = built("sub(x, a, istar(x, seq(a, par(x, x))))");
        assert_eq!(d.len(), 6);
        assert_eq!(named(d.special_edges()), ["n4->n2"]);
        assert!(pres(&d, 0).agrees_on_box(&from_constraints("x1 + x2 = 1", 2).unwrap(), 8));
        assert!(pres(&d, 3).agrees_on_box(&from_constraints("x1 + x2 = 2", 2).unwrap(), 8));
        assert_eq!(d.labels[1], Label::Op(Op::Seq1));
        assert_eq!(d.leaves(), [2, 4, 5]);
        assert!(!d.root_accepts_empty());
    }

    #[test]
    fn nested_iteration_graph() {
        // Built from the ">1" form directly: the operand of the outer
        // iteration contains the bare ξ, which validation rejects.
        let e = Expr::parse("istar(x, or(istar(x, par(a, or(star1(x), x, eps))), seq1(b, par(c, d))))").unwrap();
        let d = DGraph::build(&e).unwrap();
        assert_eq!(d.len(), 11);
        assert_eq!(named(d.special_edges()), ["n4->n2", "n4->n3", "n4->n7"]);
        assert_eq!(d.leaves(), [1, 4, 5, 7, 9, 10]);
        let out4: Vec<usize> = d.out[3].iter().map(|e| e.to + 1).collect();
        assert_eq!(out4, [2, 3, 2, 3, 5, 7]);
        let rho1 = from_constraints("(x1 = 0 and x2 = 0 and x3 + x4 = 1) or (x1 >= 1 and x2 + x3 + x4 <= 1)", 4).unwrap();
        assert!(pres(&d, 0).agrees_on_box(&rho1, 6));
        let rho2 = from_constraints(
            "(x1 >= 1 and x2 <= 1 and x3 + x4 + x5 + x6 = 0) or (x2 = 0 and ((x3 = 0 and x4 = 0 and x5 + x6 = 1) or (x3 >= 1 and x4 + x5 + x6 <= 1)))",
            6,
        )
        .unwrap();
        assert!(pres(&d, 3).agrees_on_box(&rho2, 4));
        assert!(d.check_properties(&e.substitution_letters()).all());
        assert!(d.special_paths_guarded());
    }

    #[test]
    fn iteration_of_non_presburger_root() {
        let d = built("istar(x, seq(b, par(a, star(x))))");
        assert!(pres(&d, 0).agrees_on_box(&from_constraints("x1 + x2 = 1", 2).unwrap(), 6));
        let inner = from_constraints("x1 = 1 and x2 + x3 + x4 <= 1", 4).unwrap();
        assert!(pres(&d, 3).agrees_on_box(&inner, 6));
        assert!(d.check_properties(&BTreeSet::from(["x".to_string()])).all());
    }

    #[test]
    fn base_cases() {
        let a = built("a");
        assert_eq!((a.len(), a.labels[0].clone()), (1, Label::Letter("a".into())));
        let eps = built("eps");
        assert!(eps.root_accepts_empty());
        assert_eq!(pres(&eps, 0).dim, 0);
        assert!(!built("empty").root_accepts_empty());
        assert!(matches!(DGraph::build(&Expr::parse("star(a)").unwrap()), Err(Error::ValidationFailed(_))));
    }

    #[test]
    fn union_of_unions_is_flattened() {
        let d = built("or(a, par(b, or(c, eps)))");
        assert_eq!(d.labels.iter().filter(|l| l.is_pres()).count(), 1);
        let want = SemiLinear::points(3, [vec![1, 0, 0], vec![0, 1, 1], vec![0, 1, 0]]);
        assert_eq!(pres(&d, 0).clone().simplify(), want.simplify());
    }

    #[test]
    fn series_check() {
        let xi = |s: &str| xi_series_check(&DGraph::build(&Expr::parse(s).unwrap()).unwrap(), "x");
        assert!(xi("seq1(a, x, b)"));
        assert!(!xi("par(a, x)"));
        assert!(xi("x"));
        assert!(xi("or(a, x)"));
        assert!(!xi("par(a, or(star1(x), x, eps))"));
    }

    #[test]
    fn normalization_merges_xi_positions() {
        let leaf = |l: &str| Label::Letter(l.into());
        let g = DGraph {
            labels: vec![Label::Pres(SemiLinear::points(3, [vec![1, 1, 0], vec![0, 0, 1]])), leaf("x"), leaf("x"), leaf("a")],
            out: vec![vec![Edge::normal(1), Edge::normal(2), Edge::normal(3)], vec![], vec![], vec![]],
            root: 0,
        };
        assert!(!g.is_xi_normalized("x"));
        let n = g.xi_normalize("x");
        assert!(n.is_xi_normalized("x"));
        assert_eq!(n.len(), 3);
        assert_eq!(pres(&n, 0).clone().simplify(), SemiLinear::points(2, [vec![2, 0], vec![0, 1]]).simplify());
        assert_eq!(n.xi_normalize("x"), n);
    }

    #[test]
    fn property_flags() {
        let p = |k: usize| Label::Pres(SemiLinear::points(k, [vec![1; k]]));
        let chained = DGraph {
            labels: vec![p(1), p(1), Label::Letter("a".into())],
            out: vec![vec![Edge::normal(1)], vec![Edge::normal(2)], vec![]],
            root: 0,
        };
        let r = chained.check_properties(&BTreeSet::new());
        assert!(!r.pp && r.ss && r.dag);
        let fixed = chained.pp_suppress().unwrap();
        assert!(fixed.check_properties(&BTreeSet::new()).all());
        assert_eq!(fixed.len(), 2);

        let into_pres = DGraph {
            labels: vec![Label::Op(Op::Star1), p(1), Label::Letter("a".into())],
            out: vec![vec![Edge::normal(1)], vec![Edge { to: 0, special: true }], vec![]],
            root: 0,
        };
        assert!(into_pres.check_properties(&BTreeSet::new()).ss);
        let bad = DGraph { out: vec![vec![Edge { to: 1, special: true }], vec![Edge::normal(2)], vec![]], ..into_pres };
        assert!(!bad.check_properties(&BTreeSet::new()).ss);
    }

    #[test]
    fn json_round_trip_and_dot() {
        let d = built("sub(x, a, istar(x, seq(a, par(x, x))))");
        let j = d.to_json();
        assert_eq!(DGraph::from_json(&j).unwrap(), d);
        let dot = d.to_dot();
        assert_eq!(dot.matches("style=dashed").count(), 1);
        assert!(dot.contains("n4 -> n2 [label=\"1\", style=dashed]"));
        assert!(DGraph::from_json(r#"{"root":1,"nodes":[{"id":1,"label":{"kind":"op","value":"seq1"}}],"out":{}}"#).is_err());
    }
}

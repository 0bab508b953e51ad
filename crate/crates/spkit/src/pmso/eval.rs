//! Model checking over a finite series-parallel poset.
//!
//! The model is a mask of the poset; quantifiers range over it and `Q`
//! narrows it to each parallel component. Definitions are evaluated as a
//! least fixed point: a call that is still being evaluated reads as false,
//! and false results that leaned on such a read are not memoized.
//!
//! A coloring quantifier is searched lazily: the body is evaluated against a
//! partial coloring, and an entry is branched on (uncolored first) only when
//! an atom reads it. A run that never reads an undecided entry decides the
//! coloring that leaves those entries uncolored, which is always compatible.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::coloring::{compatible_pair, is_compatible_within, PathColor, SColoring as Coloring};
use crate::membership::{assign_positions, split_alternating, split_children, split_repeat};
use crate::poset::{bit, elems, Mask, Poset, SpTerm};
use crate::semilinear::SemiLinear;
use crate::{Error, Result};

use super::{Assignment, Formula, Lambda, Program, Value};

/// Largest poset `model_check` accepts unless told otherwise.
pub const DEFAULT_MAX_SIZE: usize = 8;

#[derive(Clone)]
enum Val {
    Elem(usize),
    Set(Mask),
    Col(Rc<Coloring<PathColor>>, usize),
    /// Index into the stack of colorings under search, and a run id.
    Lazy(usize, usize),
}

/// Coloring under search by an `ExistsColoring` at `model`.
struct Partial {
    model: Mask,
    factors: BTreeSet<Mask>,
    decided: BTreeMap<Mask, Option<PathColor>>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Key {
    Elem(usize),
    Set(Mask),
    Col(usize),
}

type MemoKey = (usize, Mask, Mask, Vec<Key>);

struct Checker<'a> {
    prog: &'a Program,
    p: &'a Poset,
    env: Vec<(&'a str, Val)>,
    def_free: Vec<Vec<&'a str>>,
    free: HashMap<*const Formula, Rc<BTreeSet<&'a str>>>,
    /// `None` marks a call in progress, with its stack depth alongside.
    memo: HashMap<MemoKey, Option<bool>>,
    depth: HashMap<MemoKey, usize>,
    stack: usize,
    low: usize,
    colorings: usize,
    partial: Vec<Partial>,
    /// Undecided entry read during the current run.
    need: Option<(usize, Mask)>,
    error: Option<Error>,
}

fn free_vars<'a>(f: &'a Formula, defs: &HashMap<&str, BTreeSet<&'a str>>, out: &mut BTreeSet<&'a str>) {
    use Formula::*;
    let bound = |var: &'a str, body: &'a Formula, out: &mut BTreeSet<&'a str>| {
        let mut inner = BTreeSet::new();
        free_vars(body, defs, &mut inner);
        inner.remove(var);
        out.extend(inner);
    };
    match f {
        True | False => {}
        Letter { var, .. } => {
            out.insert(var);
        }
        In { var, set } => {
            out.insert(var);
            out.insert(set);
        }
        Less { lo, hi } => {
            out.insert(lo);
            out.insert(hi);
        }
        Or { args } | And { args } => args.iter().for_each(|a| free_vars(a, defs, out)),
        Not { arg } => free_vars(arg, defs, out),
        Exists1 { var, body } | Forall1 { var, body } | Exists2 { var, body } | Forall2 { var, body } => {
            bound(var, body, out)
        }
        ExistsColoring { var, body, .. } => bound(var, body, out),
        Q { set, psis, .. } => {
            out.insert(set);
            psis.iter().for_each(|a| free_vars(a, defs, out));
        }
        SeqSplit2 { set, first, second } | SeqDia { set, first, second, .. } => {
            out.insert(set);
            bound(&first.var, &first.body, out);
            bound(&second.var, &second.body, out);
        }
        SeqStar { set, body } | SeqOmega { set, body, .. } => {
            out.insert(set);
            bound(&body.var, &body.body, out);
        }
        Factor { part, whole } | SFactor { part, whole } => {
            out.insert(part);
            out.insert(whole);
        }
        Size { set, .. } => {
            out.insert(set);
        }
        Color { coloring, set, .. } => {
            out.insert(coloring);
            out.insert(set);
        }
        SColoring { whole, coloring } => {
            out.insert(whole);
            out.insert(coloring);
        }
        Call { name, arg } => {
            out.insert(arg);
            if let Some(fv) = defs.get(name.as_str()) {
                out.extend(fv.iter().copied());
            }
        }
    }
}

fn calls<'a>(f: &'a Formula, out: &mut Vec<&'a str>) {
    use Formula::*;
    match f {
        Call { name, .. } => out.push(name),
        Or { args } | And { args } => args.iter().for_each(|a| calls(a, out)),
        Q { psis, .. } => psis.iter().for_each(|a| calls(a, out)),
        Not { arg: body }
        | Exists1 { body, .. }
        | Forall1 { body, .. }
        | Exists2 { body, .. }
        | Forall2 { body, .. }
        | ExistsColoring { body, .. } => calls(body, out),
        SeqSplit2 { first, second, .. } | SeqDia { first, second, .. } => {
            calls(&first.body, out);
            calls(&second.body, out);
        }
        SeqStar { body, .. } | SeqOmega { body, .. } => calls(&body.body, out),
        _ => {}
    }
}

/// Free variables of each definition other than its parameter, by fixpoint.
fn definition_free_vars(prog: &Program) -> HashMap<&str, BTreeSet<&str>> {
    let mut fv: HashMap<&str, BTreeSet<&str>> = prog.defs.iter().map(|d| (d.name.as_str(), BTreeSet::new())).collect();
    loop {
        let mut changed = false;
        for d in &prog.defs {
            let mut s = BTreeSet::new();
            free_vars(&d.body, &fv, &mut s);
            s.remove(d.param.as_str());
            if s != fv[d.name.as_str()] {
                fv.insert(&d.name, s);
                changed = true;
            }
        }
        if !changed {
            return fv;
        }
    }
}

impl<'a> Checker<'a> {
    fn fail(&mut self, e: Error) -> bool {
        self.error.get_or_insert(e);
        false
    }

    fn lookup(&self, name: &str) -> Option<&Val> {
        self.env.iter().rev().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    fn elem(&mut self, name: &str) -> Option<usize> {
        match self.lookup(name) {
            Some(Val::Elem(x)) => Some(*x),
            _ => {
                self.fail(Error::PreconditionViolated(format!("`{name}` is not bound to an element")));
                None
            }
        }
    }

    fn set(&mut self, name: &str) -> Option<Mask> {
        match self.lookup(name) {
            Some(Val::Set(m)) => Some(*m),
            _ => {
                self.fail(Error::PreconditionViolated(format!("`{name}` is not bound to a set")));
                None
            }
        }
    }

    fn coloring(&mut self, name: &str) -> Option<Val> {
        match self.lookup(name) {
            Some(v @ (Val::Col(..) | Val::Lazy(..))) => Some(v.clone()),
            _ => {
                self.fail(Error::PreconditionViolated(format!("`{name}` is not bound to a coloring")));
                None
            }
        }
    }

    fn free(&mut self, f: &'a Formula) -> Rc<BTreeSet<&'a str>> {
        if let Some(s) = self.free.get(&(f as *const Formula)) {
            return s.clone();
        }
        let defs: HashMap<&str, BTreeSet<&str>> = self
            .prog
            .defs
            .iter()
            .zip(&self.def_free)
            .map(|(d, fv)| (d.name.as_str(), fv.iter().copied().collect()))
            .collect();
        let mut s = BTreeSet::new();
        free_vars(f, &defs, &mut s);
        let s = Rc::new(s);
        self.free.insert(f, s.clone());
        s
    }

    fn with<T>(&mut self, name: &'a str, v: Val, k: impl FnOnce(&mut Self) -> T) -> T {
        self.env.push((name, v));
        let out = k(self);
        self.env.pop();
        out
    }

    fn lambda(&mut self, l: &'a Lambda, m: Mask, model: Mask) -> bool {
        self.with(&l.var, Val::Set(m), |c| c.eval(&l.body, model))
    }

    /// `∃var body` or `∀var body` over `domain`. Conjuncts (for ∃) or
    /// disjuncts (for ∀) that do not mention `var` are decided once, up front.
    fn quantify(
        &mut self,
        var: &'a str,
        body: &'a Formula,
        model: Mask,
        exists: bool,
        domain: impl FnOnce(&mut Self) -> Vec<Val>,
    ) -> bool {
        let parts: Vec<&'a Formula> = match (body, exists) {
            (Formula::And { args }, true) | (Formula::Or { args }, false) => args.iter().collect(),
            _ => vec![body],
        };
        let mut dependent = Vec::new();
        for f in parts {
            if self.free(f).contains(var) {
                dependent.push(f);
            } else if self.eval(f, model) != exists {
                return !exists;
            }
        }
        if dependent.is_empty() {
            return exists;
        }
        for v in domain(self) {
            // For ∃: every conjunct holds. For ∀: every disjunct fails.
            let decided = self.with(var, v.clone(), |c| dependent.iter().all(|f| c.eval(f, model) == exists));
            if decided {
                return exists;
            }
        }
        !exists
    }

    fn eval(&mut self, f: &'a Formula, model: Mask) -> bool {
        use Formula::*;
        if self.error.is_some() || self.need.is_some() {
            return false;
        }
        let p = self.p;
        match f {
            True => true,
            False => false,
            Letter { letter, var } => self.elem(var).is_some_and(|x| p.label(x) == letter),
            In { var, set } => match (self.elem(var), self.set(set)) {
                (Some(x), Some(m)) => m & bit(x) != 0,
                _ => false,
            },
            Less { lo, hi } => match (self.elem(lo), self.elem(hi)) {
                (Some(x), Some(y)) => p.lt(x, y),
                _ => false,
            },
            Or { args } => args.iter().any(|a| self.eval(a, model)),
            And { args } => args.iter().all(|a| self.eval(a, model)),
            Not { arg } => !self.eval(arg, model),
            Exists1 { var, body } | Forall1 { var, body } => {
                self.quantify(var, body, model, matches!(f, Exists1 { .. }), |_| elems(model).map(Val::Elem).collect())
            }
            Exists2 { var, body } | Forall2 { var, body } => {
                self.quantify(var, body, model, matches!(f, Exists2 { .. }), |_| submasks(model).map(Val::Set).collect())
            }
            Q { set, psis, rho } => {
                let Some(x) = self.set(set) else { return false };
                if x != 0 && !p.is_good_interval(model, x) {
                    return false;
                }
                if rho.dim != psis.len() {
                    return self.fail(Error::DimensionMismatch { expected: psis.len(), got: rho.dim });
                }
                let comps = p.par_blocks(x);
                assign_positions(&comps, rho, &mut |j, c| self.eval(&psis[j], c)).is_some()
            }
            SeqSplit2 { set, first, second } => self.sequential(set, |c, blocks| {
                split_children(blocks, 2, false, &mut |i, m| c.lambda([first, second][i], m, model)).is_some()
            }),
            SeqStar { set, body } => {
                self.sequential(set, |c, blocks| split_repeat(blocks, 2, &mut |m| c.lambda(body, m, model)).is_some())
            }
            SeqOmega { set, body, eps, .. } => {
                *eps && self.sequential(set, |c, blocks| {
                    split_repeat(blocks, 2, &mut |m| c.lambda(body, m, model)).is_some()
                })
            }
            SeqDia { set, first, second, eps } => self.sequential(set, |c, blocks| {
                let mut test = |k: usize, m: Mask| if m == 0 { eps[k] } else { c.lambda([first, second][k], m, model) };
                split_alternating(blocks, 2, &mut test).is_some()
            }),
            Factor { part, whole } | SFactor { part, whole } => match (self.set(part), self.set(whole)) {
                (Some(g), Some(r)) => {
                    g != 0
                        && g & !r == 0
                        && p.is_good_interval(r, g)
                        && (matches!(f, Factor { .. }) || p.is_sequential(g))
                }
                _ => false,
            },
            Size { set, n } => self.set(set).is_some_and(|m| m.count_ones() as usize == *n),
            Color { coloring, set, bit: b, edge } => match (self.coloring(coloring), self.set(set)) {
                (Some(Val::Col(col, _)), Some(m)) => col.map.get(&m) == Some(&(*b, *edge)),
                (Some(Val::Lazy(i, _)), Some(m)) => match self.read(i, m) {
                    Some(c) => c == Some((*b, *edge)),
                    None => false,
                },
                _ => false,
            },
            SColoring { whole, coloring } => match (self.set(whole), self.coloring(coloring)) {
                (Some(r), Some(Val::Col(col, _))) => is_scoloring(p, r, &col),
                // Every coloring searched at `model` is an s-coloring of it.
                (Some(r), Some(Val::Lazy(i, _))) if self.partial[i].model == r => true,
                (Some(r), Some(Val::Lazy(i, _))) => {
                    let fs: Vec<Mask> = self.partial[i].factors.iter().copied().collect();
                    let mut col = Coloring::new([]);
                    for f in fs {
                        match self.read(i, f) {
                            Some(Some(c)) => col = col.with(f, c),
                            Some(None) => {}
                            None => return false,
                        }
                    }
                    is_scoloring(p, r, &col)
                }
                _ => false,
            },
            ExistsColoring { var, edges, body } => self.search_coloring(var, edges, body, model),
            Call { name, arg } => {
                let Some(x) = self.set(arg) else { return false };
                self.call(name, x, model)
            }
        }
    }

    /// Entry `f` of the coloring under search `i`; `None` after requesting a branch.
    fn read(&mut self, i: usize, f: Mask) -> Option<Option<PathColor>> {
        let part = &self.partial[i];
        if let Some(c) = part.decided.get(&f) {
            return Some(*c);
        }
        if !part.factors.contains(&f) {
            return Some(None);
        }
        self.need = Some((i, f));
        None
    }

    fn search_coloring(&mut self, var: &'a str, edges: &[(usize, usize)], body: &'a Formula, model: Mask) -> bool {
        let parts: Vec<&'a Formula> = match body {
            Formula::And { args } => args.iter().collect(),
            _ => vec![body],
        };
        let mut dependent = Vec::new();
        for f in parts {
            if self.free(f).contains(var) {
                dependent.push(f);
            } else if !self.eval(f, model) {
                return false;
            }
        }
        let p = self.p;
        let palette: Vec<PathColor> = edges.iter().flat_map(|&e| [(false, e), (true, e)]).collect();
        let idx = self.partial.len();
        let factors = p.seq_factors(model).into_iter().collect();
        self.partial.push(Partial { model, factors, decided: BTreeMap::new() });
        let mut todo = vec![BTreeMap::new()];
        let mut found = false;
        while let Some(decided) = todo.pop() {
            self.partial[idx].decided = decided;
            self.colorings += 1;
            let run = Val::Lazy(idx, self.colorings);
            let ok = self.with(var, run, |c| dependent.iter().all(|f| c.eval(f, model)));
            match self.need {
                Some((i, f)) if i == idx => {
                    self.need = None;
                    let decided = std::mem::take(&mut self.partial[idx].decided);
                    for &c in palette.iter().rev() {
                        let fits = decided.iter().all(|(&g, cg)| match cg {
                            Some(cg) => compatible_pair(p, model, (f, &c), (g, cg)),
                            None => true,
                        });
                        if fits {
                            let mut next = decided.clone();
                            next.insert(f, Some(c));
                            todo.push(next);
                        }
                    }
                    let mut next = decided;
                    next.insert(f, None);
                    todo.push(next);
                }
                Some(_) => break,
                None if ok => {
                    found = true;
                    break;
                }
                None if self.error.is_some() => break,
                None => {}
            }
        }
        self.partial.pop();
        found
    }

    fn sequential(&mut self, set: &str, k: impl FnOnce(&mut Self, &[Mask]) -> bool) -> bool {
        match self.set(set) {
            Some(0) | None => false,
            Some(x) => {
                let blocks = self.p.seq_blocks(x);
                k(self, &blocks)
            }
        }
    }

    fn call(&mut self, name: &str, arg: Mask, model: Mask) -> bool {
        let Some(idx) = self.prog.defs.iter().position(|d| d.name == name) else {
            return self.fail(Error::UnboundVariable(name.into()));
        };
        let def = &self.prog.defs[idx];
        let mut env = Vec::new();
        for &v in &self.def_free[idx] {
            match self.lookup(v) {
                Some(Val::Elem(x)) => env.push(Key::Elem(*x)),
                Some(Val::Set(m)) => env.push(Key::Set(*m)),
                Some(Val::Col(_, id) | Val::Lazy(_, id)) => env.push(Key::Col(*id)),
                None => return self.fail(Error::UnboundVariable(v.into())),
            }
        }
        let key: MemoKey = (idx, arg, model, env);
        match self.memo.get(&key) {
            Some(Some(r)) => return *r,
            Some(None) => {
                self.low = self.low.min(self.depth[&key]);
                return false;
            }
            None => {}
        }
        self.stack += 1;
        let depth = self.stack;
        self.memo.insert(key.clone(), None);
        self.depth.insert(key.clone(), depth);
        let outer_low = std::mem::replace(&mut self.low, usize::MAX);
        let r = self.with(&def.param, Val::Set(arg), |c| c.eval(&def.body, model));
        let low = self.low;
        self.depth.remove(&key);
        if self.need.is_none() && (r || low >= depth) {
            self.memo.insert(key, Some(r));
        } else {
            self.memo.remove(&key);
        }
        self.low = outer_low.min(low);
        self.stack -= 1;
        r
    }
}

fn submasks(m: Mask) -> impl Iterator<Item = Mask> {
    let mut next = Some(m);
    std::iter::from_fn(move || {
        let cur = next?;
        next = (cur != 0).then(|| (cur - 1) & m);
        Some(cur)
    })
}

fn is_scoloring(p: &Poset, r: Mask, col: &Coloring<PathColor>) -> bool {
    col.map.keys().all(|&g| g != 0 && g & !r == 0 && p.is_good_interval(r, g) && p.is_sequential(g))
        && is_compatible_within(p, r, col).is_ok()
}

pub fn model_check(prog: &Program, t: &SpTerm, a: &Assignment) -> Result<bool> {
    model_check_with(prog, t, a, DEFAULT_MAX_SIZE)
}

/// Like [`model_check`] with an explicit bound on the poset size.
pub fn model_check_with(prog: &Program, t: &SpTerm, a: &Assignment, max_size: usize) -> Result<bool> {
    let p = Poset::from_term(t)?;
    if p.len() > max_size {
        return Err(Error::ResourceBound(format!("poset of size {} exceeds {max_size}", p.len())));
    }
    let defs = definition_free_vars(prog);
    let mut reached = Vec::new();
    calls(&prog.main, &mut reached);
    prog.defs.iter().for_each(|d| calls(&d.body, &mut reached));
    if let Some(missing) = reached.iter().find(|n| prog.def(n).is_none()) {
        return Err(Error::UnboundVariable((*missing).into()));
    }
    let mut fv = BTreeSet::new();
    free_vars(&prog.main, &defs, &mut fv);
    if let Some(v) = fv.iter().find(|v| !a.values.contains_key(**v)) {
        return Err(Error::UnboundVariable((*v).into()));
    }
    let mut env = Vec::new();
    let mut ids = 0;
    for (name, v) in &a.values {
        let val = match v {
            Value::Elem(x) if *x < p.len() => Val::Elem(*x),
            Value::Set(m) if m & !p.full() == 0 => Val::Set(*m),
            Value::Coloring(c) => {
                ids += 1;
                Val::Col(Rc::new(c.clone()), ids)
            }
            _ => return Err(Error::PreconditionViolated(format!("value of `{name}` lies outside the poset"))),
        };
        env.push((name.as_str(), val));
    }
    let mut c = Checker {
        prog,
        p: &p,
        env,
        def_free: prog.defs.iter().map(|d| defs[d.name.as_str()].iter().copied().collect()).collect(),
        free: HashMap::new(),
        memo: HashMap::new(),
        depth: HashMap::new(),
        stack: 0,
        low: usize::MAX,
        colorings: ids,
        partial: Vec::new(),
        need: None,
        error: None,
    };
    let r = c.eval(&prog.main, p.full());
    match c.error {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// Reference semantics of `Q(X; psis; rho)` with `X` the whole of `t`: every
/// function from components to formulas is tried, each formula checked on
/// its component as a poset of its own.
pub fn brute_q(prog: &Program, t: &SpTerm, psis: &[Formula], rho: &SemiLinear) -> Result<bool> {
    let comps = t.par_blocks();
    let mut fits = Vec::new();
    for c in &comps {
        let mut row = Vec::new();
        for psi in psis {
            let sub = Program { defs: prog.defs.clone(), main: psi.clone() };
            row.push(model_check_with(&sub, c, &Assignment::new(), usize::MAX)?);
        }
        fits.push(row);
    }
    let k = psis.len();
    if k == 0 {
        return Ok(comps.is_empty() && rho.contains(&[]));
    }
    let total = k.checked_pow(comps.len() as u32).ok_or_else(|| Error::ResourceBound("too many components".into()))?;
    Ok((0..total).any(|mut code| {
        let mut y = vec![0u64; k];
        for row in &fits {
            let j = code % k;
            code /= k;
            if !row[j] {
                return false;
            }
            y[j] += 1;
        }
        rho.contains(&y)
    }))
}

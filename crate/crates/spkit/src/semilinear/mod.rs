//! Semilinear sets as Presburger labels: membership, substitution of one set
//! into a coordinate of another, iterated substitution, and a checked
//! front end from quantifier-free linear constraints.
//!
//! Coordinate indexes in the public substitution API are 1-based, matching
//! out-edge positions of D-graph nodes.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lex::Cursor;

mod constraints;
pub use constraints::{
    effective_box, from_constraints, from_constraints_checked, from_formula, parse_constraints, CmpOp, Formula,
    DEFAULT_BOX,
};

pub type Vector = Vec<u64>;

/// `base + Σ c_p · p` over all `c_p ∈ ℕ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinearSet {
    pub base: Vector,
    pub periods: Vec<Vector>,
}

impl LinearSet {
    pub fn point(base: Vector) -> Self {
        LinearSet { base, periods: Vec::new() }
    }

    fn tidy(mut self) -> Self {
        self.periods.retain(|p| p.iter().any(|&x| x > 0));
        self.periods.sort();
        self.periods.dedup();
        self
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        match sub_vec(v, &self.base) {
            Some(rest) => monoid_contains(&self.periods, &rest),
            None => false,
        }
    }

    fn subsumes(&self, other: &LinearSet) -> bool {
        self.contains(&other.base) && other.periods.iter().all(|p| monoid_contains(&self.periods, p))
    }
}

fn sub_vec(v: &[u64], b: &[u64]) -> Option<Vector> {
    v.iter().zip(b).map(|(&x, &y)| x.checked_sub(y)).collect()
}

fn add_vec(a: &[u64], b: &[u64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Whether `v` is a non-negative integer combination of `periods`.
pub fn monoid_contains(periods: &[Vector], v: &[u64]) -> bool {
    fn go(periods: &[Vector], idx: usize, v: &mut Vector, dead: &mut HashSet<(usize, Vector)>) -> bool {
        if v.iter().all(|&x| x == 0) {
            return true;
        }
        if idx == periods.len() || dead.contains(&(idx, v.clone())) {
            return false;
        }
        let p = &periods[idx];
        let saved = v.clone();
        loop {
            if go(periods, idx + 1, v, dead) {
                return true;
            }
            let fits = v.iter().zip(p).all(|(&x, &y)| x >= y);
            if !fits {
                break;
            }
            for (x, y) in v.iter_mut().zip(p) {
                *x -= y;
            }
        }
        *v = saved;
        dead.insert((idx, v.clone()));
        false
    }
    let live: Vec<Vector> = periods.iter().filter(|p| p.iter().any(|&x| x > 0)).cloned().collect();
    go(&live, 0, &mut v.to_vec(), &mut HashSet::new())
}

/// Finite union of linear sets of a common dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemiLinear {
    pub dim: usize,
    pub components: Vec<LinearSet>,
}

/// Ceiling on intermediate component counts.
const MAX_COMPONENTS: usize = 20_000;

impl SemiLinear {
    pub fn new(dim: usize, components: Vec<LinearSet>) -> Result<Self> {
        for c in &components {
            if c.base.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.base.len() });
            }
            if let Some(p) = c.periods.iter().find(|p| p.len() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        Ok(Self::raw(dim, components))
    }

    fn raw(dim: usize, components: Vec<LinearSet>) -> Self {
        let mut cs: Vec<LinearSet> = components.into_iter().map(LinearSet::tidy).collect();
        cs.sort();
        cs.dedup();
        SemiLinear { dim, components: cs }
    }

    pub fn empty(dim: usize) -> Self {
        SemiLinear { dim, components: Vec::new() }
    }

    pub fn points(dim: usize, pts: impl IntoIterator<Item = Vector>) -> Self {
        Self::raw(dim, pts.into_iter().map(LinearSet::point).collect())
    }

    /// `{1_i}`, 1-based.
    pub fn unit(dim: usize, i: usize) -> Self {
        Self::points(dim, [unit_vec(dim, i - 1)])
    }

    /// The closed tautology over zero coordinates, `{()}`.
    pub fn tautology() -> Self {
        Self::points(0, [Vec::new()])
    }

    /// All of ℕ^dim.
    pub fn everything(dim: usize) -> Self {
        Self::raw(dim, vec![LinearSet { base: vec![0; dim], periods: (0..dim).map(|i| unit_vec(dim, i)).collect() }])
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn member(&self, v: &[u64]) -> Result<bool> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(self.components.iter().any(|c| c.contains(v)))
    }

    /// Membership for callers that already agree on the dimension.
    pub fn contains(&self, v: &[u64]) -> bool {
        v.len() == self.dim && self.components.iter().any(|c| c.contains(v))
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(&vec![0; self.dim])
    }

    /// Whether `1_j` (1-based) belongs to the set.
    pub fn contains_unit(&self, j: usize) -> bool {
        j >= 1 && j <= self.dim && self.contains(&unit_vec(self.dim, j - 1))
    }

    /// Drops redundant periods and components contained in another component.
    pub fn simplify(mut self) -> Self {
        for c in &mut self.components {
            let mut k = 0;
            while k < c.periods.len() {
                let others: Vec<Vector> =
                    c.periods.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, p)| p.clone()).collect();
                if monoid_contains(&others, &c.periods[k]) {
                    c.periods.remove(k);
                } else {
                    k += 1;
                }
            }
        }
        let mut keep: Vec<LinearSet> = Vec::new();
        self.components.sort_by_key(|c| std::cmp::Reverse(c.periods.len()));
        for c in self.components {
            if !keep.iter().any(|k| k.subsumes(&c)) {
                keep.retain(|k| !c.subsumes(k));
                keep.push(c);
            }
        }
        Self::raw(self.dim, keep)
    }

    pub fn union(&self, other: &SemiLinear) -> Result<SemiLinear> {
        self.check_dim(other.dim)?;
        let mut cs = self.components.clone();
        cs.extend(other.components.iter().cloned());
        Ok(Self::raw(self.dim, cs))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim == d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got: d })
        }
    }

    /// Coordinate `k` of the result is coordinate `perm[k]` of the input.
    pub fn reindex(&self, perm: &[usize]) -> Result<SemiLinear> {
        let mut seen = perm.to_vec();
        seen.sort();
        if perm.len() != self.dim || seen != (0..self.dim).collect::<Vec<_>>() {
            return Err(Error::DimensionMismatch { expected: self.dim, got: perm.len() });
        }
        Ok(self.map_vectors(self.dim, |v| perm.iter().map(|&k| v[k]).collect()))
    }

    /// Inserts an always-zero coordinate so that it lands at 1-based `pos`.
    pub fn pad(&self, pos: usize) -> Result<SemiLinear> {
        if pos == 0 || pos > self.dim + 1 {
            return Err(Error::BadIndex { index: pos, dim: self.dim + 1 });
        }
        Ok(self.map_vectors(self.dim + 1, |v| {
            let mut w = v.to_vec();
            w.insert(pos - 1, 0);
            w
        }))
    }

    /// Replaces the 1-based coordinates `idx` by a single first coordinate
    /// holding their sum; the others keep their relative order.
    pub fn merge_coords(&self, idx: &[usize]) -> SemiLinear {
        let keep: Vec<usize> = (1..=self.dim).filter(|j| !idx.contains(j)).collect();
        self.map_vectors(keep.len() + 1, |v| {
            let mut w = vec![idx.iter().map(|&j| v[j - 1]).sum()];
            w.extend(keep.iter().map(|&j| v[j - 1]));
            w
        })
    }

    fn map_vectors(&self, dim: usize, f: impl Fn(&[u64]) -> Vector) -> SemiLinear {
        let cs = self
            .components
            .iter()
            .map(|c| LinearSet { base: f(&c.base), periods: c.periods.iter().map(|p| f(p)).collect() })
            .collect();
        Self::raw(dim, cs)
    }

    /// Minkowski sum.
    pub fn plus(&self, other: &SemiLinear) -> Result<SemiLinear> {
        self.check_dim(other.dim)?;
        let mut cs = Vec::with_capacity(self.components.len() * other.components.len());
        for a in &self.components {
            for b in &other.components {
                let mut periods = a.periods.clone();
                periods.extend(b.periods.iter().cloned());
                cs.push(LinearSet { base: add_vec(&a.base, &b.base), periods });
            }
        }
        guard(cs.len())?;
        Ok(Self::raw(self.dim, cs).simplify())
    }

    /// Sums of exactly `m` elements.
    pub fn fold_sum(&self, m: u64) -> Result<SemiLinear> {
        let mut acc = SemiLinear::points(self.dim, [vec![0; self.dim]]);
        // Square-and-multiply keeps the intermediate unions small.
        let mut pow = self.clone();
        let mut k = m;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.plus(&pow)?;
            }
            k >>= 1;
            if k > 0 {
                pow = pow.plus(&pow)?;
            }
        }
        Ok(acc)
    }

    /// Sums of any number of elements, the empty sum included.
    ///
    /// The star of a union is the sum of the stars of its parts, and
    /// `(b + P^⊛)^⊛ = {0} ∪ (b + ({b} ∪ P)^⊛)`. Point components only add
    /// periods; linear ones are folded in one at a time with subsumption
    /// pruning in between.
    pub fn star_closure(&self) -> Result<SemiLinear> {
        let free: Vec<Vector> =
            self.components.iter().filter(|c| c.periods.is_empty()).map(|c| c.base.clone()).collect();
        let mut acc = SemiLinear::raw(self.dim, vec![LinearSet { base: vec![0; self.dim], periods: free }]);
        for c in self.components.iter().filter(|c| !c.periods.is_empty()) {
            if acc.components.iter().all(|a| monoid_contains(&a.periods, &c.base) && c.periods.iter().all(|p| monoid_contains(&a.periods, p))) {
                continue;
            }
            let mut periods = c.periods.clone();
            periods.push(c.base.clone());
            let part = SemiLinear::raw(self.dim, vec![LinearSet { base: c.base.clone(), periods }]);
            acc = acc.union(&acc.plus(&part)?)?.simplify();
            guard(acc.components.len())?;
        }
        Ok(acc)
    }

    /// Members inside `[0..=bound]^dim`.
    pub fn points_in_box(&self, bound: u64) -> BTreeSet<Vector> {
        let mut out = BTreeSet::new();
        for c in &self.components {
            if c.base.iter().any(|&x| x > bound) {
                continue;
            }
            let mut seen: HashSet<Vector> = HashSet::new();
            let mut stack = vec![c.base.clone()];
            while let Some(v) = stack.pop() {
                if !seen.insert(v.clone()) {
                    continue;
                }
                for p in &c.periods {
                    let w = add_vec(&v, p);
                    if w.iter().all(|&x| x <= bound) && !seen.contains(&w) {
                        stack.push(w);
                    }
                }
            }
            out.extend(seen);
        }
        out
    }

    /// Pointwise equality on the box `[0..=bound]^dim`.
    pub fn agrees_on_box(&self, other: &SemiLinear, bound: u64) -> bool {
        self.dim == other.dim && self.points_in_box(bound) == other.points_in_box(bound)
    }

    pub fn parse(text: &str) -> Result<SemiLinear> {
        let mut cur = Cursor::new(text)?;
        let s = parse_literal(&mut cur)?;
        cur.finish()?;
        Ok(s)
    }
}

fn guard(n: usize) -> Result<()> {
    if n > MAX_COMPONENTS {
        Err(Error::ResourceBound(format!("{n} semilinear components")))
    } else {
        Ok(())
    }
}

fn unit_vec(dim: usize, i: usize) -> Vector {
    let mut v = vec![0; dim];
    v[i] = 1;
    v
}

fn fmt_vec(f: &mut fmt::Formatter<'_>, v: &[u64]) -> fmt::Result {
    write!(f, "(")?;
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, ")")
}

/// Literal form `sl[dim: base+<p1,p2>; base; ...]`.
impl fmt::Display for SemiLinear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sl[{}:", self.dim)?;
        for (k, c) in self.components.iter().enumerate() {
            write!(f, "{}", if k == 0 { " " } else { "; " })?;
            fmt_vec(f, &c.base)?;
            if !c.periods.is_empty() {
                write!(f, "+<")?;
                for (i, p) in c.periods.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    fmt_vec(f, p)?;
                }
                write!(f, ">")?;
            }
        }
        write!(f, "]")
    }
}

fn parse_vec(cur: &mut Cursor, dim: usize) -> Result<Vector> {
    cur.expect("(")?;
    let mut v = Vec::new();
    if !cur.eat(")") {
        v.push(cur.int()?);
        while cur.eat(",") {
            v.push(cur.int()?);
        }
        cur.expect(")")?;
    }
    if v.len() != dim {
        return cur.err(format!("vector of length {} in a set of dimension {dim}", v.len()));
    }
    Ok(v)
}

pub(crate) fn parse_literal(cur: &mut Cursor) -> Result<SemiLinear> {
    if !cur.eat_ident("sl") {
        return cur.err("expected `sl[`");
    }
    cur.expect("[")?;
    let dim = cur.int()? as usize;
    cur.expect(":")?;
    let mut cs = Vec::new();
    if !cur.eat("]") {
        loop {
            let base = parse_vec(cur, dim)?;
            let mut periods = Vec::new();
            if cur.eat("+") {
                cur.expect("<")?;
                periods.push(parse_vec(cur, dim)?);
                while cur.eat(",") {
                    periods.push(parse_vec(cur, dim)?);
                }
                cur.expect(">")?;
            }
            cs.push(LinearSet { base, periods });
            if !cur.eat(";") {
                break;
            }
        }
        cur.expect("]")?;
    }
    SemiLinear::new(dim, cs)
}

fn check_index(s: &SemiLinear, i: usize) -> Result<()> {
    if i == 0 || i > s.dim {
        Err(Error::BadIndex { index: i, dim: s.dim })
    } else {
        Ok(())
    }
}

/// Shared shape of both substitutions: every outer vector `v'` contributes
/// `embed(v')` plus the sum of `v'_i` independent draws from `inner`, placed by
/// `lift`. Linear outer components distribute over their periods, and each
/// period becomes the star closure of its own draw set.
fn substitute(
    inner: &SemiLinear,
    outer: &SemiLinear,
    i: usize,
    dim: usize,
    embed: impl Fn(&[u64]) -> Vector,
    lift: impl Fn(&[u64]) -> Vector,
) -> Result<SemiLinear> {
    let lifted = SemiLinear::raw(
        dim,
        inner
            .components
            .iter()
            .map(|c| LinearSet { base: lift(&c.base), periods: c.periods.iter().map(|p| lift(p)).collect() })
            .collect(),
    );
    let mut out = SemiLinear::empty(dim);
    for c in &outer.components {
        let head = SemiLinear::points(dim, [embed(&c.base)]).plus(&lifted.fold_sum(c.base[i - 1])?)?;
        let mut acc = head;
        for p in &c.periods {
            acc = acc.plus(&step_star(&embed(p), &lifted, p[i - 1])?)?;
        }
        out = out.union(&acc)?;
        guard(out.components.len())?;
    }
    Ok(out.simplify())
}

/// `⋃_{m≥0} (m·e + D_{mc})` with `D_n` the n-fold sum of `inner`.
///
/// Splitting by the set `T` of linear components drawn at least once, the
/// draw counts solve `Σ n_t = m·c` with `n_t ≥ 1` on `T`. The minimal
/// solutions take `m0 = ⌈|T|/c⌉` and the homogeneous generators are one `e`
/// with `c` draws, so the closure stays linear in the number of inner
/// components instead of the number of fold-sum components.
fn step_star(e: &[u64], inner: &SemiLinear, c: u64) -> Result<SemiLinear> {
    let dim = inner.dim;
    let zero = vec![0; dim];
    if c == 0 {
        return Ok(SemiLinear::raw(dim, vec![LinearSet { base: zero, periods: vec![e.to_vec()] }]));
    }
    let (pts, lin): (Vec<&LinearSet>, Vec<&LinearSet>) = inner.components.iter().partition(|c| c.periods.is_empty());
    if lin.len() > 12 {
        return Err(Error::ResourceBound(format!("closure over {} linear components", lin.len())));
    }
    let c = c as usize;
    let mut cs = vec![LinearSet::point(zero.clone())];
    for sel in 0u32..(1 << lin.len()) {
        let chosen: Vec<&LinearSet> = lin.iter().enumerate().filter(|(k, _)| sel & (1 << k) != 0).map(|(_, l)| *l).collect();
        let pool: Vec<&Vector> = chosen.iter().chain(pts.iter()).map(|l| &l.base).collect();
        if pool.is_empty() {
            continue;
        }
        let mut periods: Vec<Vector> = Vec::new();
        for m in multisets(&pool, c) {
            periods.push(m.iter().fold(e.to_vec(), |acc, v| add_vec(&acc, v)));
        }
        guard(periods.len())?;
        periods.extend(chosen.iter().flat_map(|l| l.periods.iter().cloned()));
        let t = chosen.len();
        let m0 = t.div_ceil(c);
        let forced = chosen.iter().fold(
            e.iter().map(|x| x * m0 as u64).collect::<Vector>(),
            |acc, l| add_vec(&acc, &l.base),
        );
        let forced = if t == 0 { zero.clone() } else { forced };
        for m in multisets(&pool, m0 * c - t) {
            let base = m.iter().fold(forced.clone(), |acc, v| add_vec(&acc, v));
            cs.push(LinearSet { base, periods: periods.clone() });
        }
        guard(cs.len())?;
    }
    Ok(SemiLinear::raw(dim, cs).simplify())
}

/// Inner set substituted into coordinate `i` (1-based) of the outer set over a
/// disjoint alphabet: the coordinate expands into the inner coordinates.
pub fn subst_disjoint(inner: &SemiLinear, outer: &SemiLinear, i: usize) -> Result<SemiLinear> {
    check_index(outer, i)?;
    let (k, k2) = (inner.dim, outer.dim);
    let dim = k + k2 - 1;
    substitute(
        inner,
        outer,
        i,
        dim,
        |v| {
            let mut w = v[..i - 1].to_vec();
            w.extend(std::iter::repeat_n(0, k));
            w.extend_from_slice(&v[i..]);
            w
        },
        |u| {
            let mut w = vec![0; i - 1];
            w.extend_from_slice(u);
            w.extend(std::iter::repeat_n(0, k2 - i));
            w
        },
    )
}

/// Same-alphabet substitution: coordinate `i` of the outer vector is consumed
/// and the draws add into the shared coordinates.
pub fn subst_same(inner: &SemiLinear, outer: &SemiLinear, i: usize) -> Result<SemiLinear> {
    check_index(outer, i)?;
    inner.check_dim(outer.dim)?;
    substitute(
        inner,
        outer,
        i,
        outer.dim,
        |v| {
            let mut w = v.to_vec();
            w[i - 1] = 0;
            w
        },
        |u| u.to_vec(),
    )
}

/// Cumulative iteration `⋃_{k≤j} S^{k x_i}`; `j = 0` gives `{1_i}`.
pub fn power_subst(s: &SemiLinear, i: usize, j: usize) -> Result<SemiLinear> {
    check_index(s, i)?;
    if s.contains_zero() {
        return Err(Error::ZeroVectorPresent);
    }
    let mut acc = SemiLinear::unit(s.dim, i);
    for _ in 0..j {
        let next = subst_same(&acc, s, i)?;
        acc = acc.union(&next)?.simplify();
    }
    Ok(acc)
}

/// Box restriction of [`power_subst`], computed on explicit points.
///
/// Exact on `[0..=bound]^dim`: all vectors are non-negative, so a draw or an
/// outer vector leaving the box never contributes a point inside it.
pub fn power_subst_in_box(s: &SemiLinear, i: usize, j: usize, bound: u64) -> Result<BTreeSet<Vector>> {
    Ok(iterate_in_box(s, i, j, bound)?.0)
}

/// Iterates the box recurrence until it stops changing, at most `max_j`
/// times. Returns the fixpoint and the first `J` with `U_J = U_{J+1}`, or
/// `None` if `max_j` steps were not enough.
pub fn saturate_in_box(s: &SemiLinear, i: usize, bound: u64, max_j: usize) -> Result<Option<(BTreeSet<Vector>, usize)>> {
    let (set, steps, stable) = iterate_in_box(s, i, max_j + 1, bound)?;
    Ok(stable.then_some((set, steps)))
}

struct Grid {
    dim: usize,
    side: u64,
}

impl Grid {
    fn index(&self, v: &[u64]) -> Option<usize> {
        let mut k = 0u64;
        for &x in v.iter().rev() {
            if x >= self.side {
                return None;
            }
            k = k * self.side + x;
        }
        Some(k as usize)
    }

    fn size(&self) -> usize {
        (self.side as usize).pow(self.dim as u32)
    }
}

fn iterate_in_box(s: &SemiLinear, i: usize, j: usize, bound: u64) -> Result<(BTreeSet<Vector>, usize, bool)> {
    check_index(s, i)?;
    if s.contains_zero() {
        return Err(Error::ZeroVectorPresent);
    }
    let ii = i - 1;
    let grid = Grid { dim: s.dim, side: bound + 1 };
    // Each draw adds at least one to the coordinate sum, so coordinate i of a
    // useful outer vector is at most dim·bound.
    let outer: Vec<Vector> = s
        .points_in_box(bound * s.dim as u64)
        .into_iter()
        .filter(|v| v.iter().enumerate().all(|(r, &x)| r == ii || x <= bound))
        .collect();
    let max_c = outer.iter().map(|v| v[ii]).max().unwrap_or(0) as usize;
    let mut acc: BTreeSet<Vector> = [unit_vec(s.dim, ii)].into_iter().collect();
    for step in 0..j {
        let draws: Vec<&Vector> = acc.iter().collect();
        // sums[c]: sums of exactly c draws inside the box.
        let mut sums: Vec<Vec<Vector>> = vec![vec![vec![0; s.dim]]];
        for c in 1..=max_c {
            let mut seen = vec![false; grid.size()];
            let mut next = Vec::new();
            for d in &sums[c - 1] {
                for u in &draws {
                    let w = add_vec(d, u);
                    if let Some(k) = grid.index(&w) {
                        if !seen[k] {
                            seen[k] = true;
                            next.push(w);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            sums.push(next);
        }
        let mut grown = acc.clone();
        for v in &outer {
            let mut e = v.clone();
            e[ii] = 0;
            for d in sums.get(v[ii] as usize).into_iter().flatten() {
                let w = add_vec(&e, d);
                if grid.index(&w).is_some() {
                    grown.insert(w);
                }
            }
        }
        if grown == acc {
            return Ok((acc, step, true));
        }
        acc = grown;
    }
    Ok((acc, j, false))
}

/// Full iteration `⋃_j S^{j x_i}`.
///
/// A derivation using elements `u_1..u_m` of `S` yields `Σ u_j − (m−1)·1_i`,
/// and any such vector with non-negative coordinates is reachable by expanding
/// ξ-producing elements first. The set is built as the semigroup of sums of
/// `S − 1_i` restricted to a non-negative `i`-th coordinate, plus `{1_i}`.
pub fn star_subst(s: &SemiLinear, i: usize) -> Result<SemiLinear> {
    check_index(s, i)?;
    if s.contains_zero() {
        return Err(Error::ZeroVectorPresent);
    }
    let dim = s.dim;
    let ii = i - 1;
    let n = s.components.len();
    if n > 12 {
        return Err(Error::ResourceBound(format!("star over {n} components")));
    }
    let shift = |v: &[u64]| -> Vec<i64> {
        let mut w: Vec<i64> = v.iter().map(|&x| x as i64).collect();
        w[ii] -= 1;
        w
    };
    let mut cs = vec![LinearSet::point(unit_vec(dim, ii))];
    for sel in 1u32..(1 << n) {
        let mut base: Vec<i64> = vec![0; dim];
        base[ii] = 1;
        let mut periods: Vec<Vec<i64>> = Vec::new();
        for (k, c) in s.components.iter().enumerate() {
            if sel & (1 << k) != 0 {
                let b = shift(&c.base);
                for (x, y) in base.iter_mut().zip(&b) {
                    *x += y;
                }
                periods.push(b);
                periods.extend(c.periods.iter().map(|p| p.iter().map(|&x| x as i64).collect()));
            }
        }
        cs.extend(restrict_nonneg(&base, &periods, ii));
        guard(cs.len())?;
    }
    Ok(SemiLinear::raw(dim, cs).simplify())
}

/// `{base + Σ c_p p : coordinate ii ≥ 0}` as linear sets over ℕ, where only
/// coordinate `ii` may be negative and never below −1 in a period.
fn restrict_nonneg(base: &[i64], periods: &[Vec<i64>], ii: usize) -> Vec<LinearSet> {
    let neg: Vec<&Vec<i64>> = periods.iter().filter(|p| p[ii] < 0).collect();
    let pos: Vec<&Vec<i64>> = periods.iter().filter(|p| p[ii] > 0).collect();
    debug_assert!(neg.iter().all(|p| p[ii] == -1));
    let add = |a: &[i64], b: &[i64]| -> Vec<i64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
    let sum_of = |items: &[&Vec<i64>]| -> Vec<i64> {
        items.iter().fold(vec![0; base.len()], |acc, p| add(&acc, p))
    };
    let to_nat = |v: Vec<i64>| -> Vector {
        debug_assert!(v.iter().all(|&x| x >= 0));
        v.into_iter().map(|x| x as u64).collect()
    };

    // Generators of the homogeneous monoid: zero-weight periods, each positive
    // period alone, and each positive period absorbing up to its weight in
    // negative periods.
    let mut gens: Vec<Vector> = periods.iter().filter(|p| p[ii] >= 0).map(|p| to_nat(p.to_vec())).collect();
    for p in &pos {
        for t in 1..=p[ii] as usize {
            for m in multisets(&neg, t) {
                gens.push(to_nat(add(p, &sum_of(&m))));
            }
        }
    }

    let mut out = Vec::new();
    let deficit = -base[ii];
    let pos_choices: Vec<Vec<&Vec<i64>>> = if deficit <= 0 {
        vec![Vec::new()]
    } else {
        (1..=deficit as usize)
            .flat_map(|t| multisets(&pos, t))
            .filter(|m| m.iter().map(|p| p[ii]).sum::<i64>() >= deficit)
            .collect()
    };
    for mp in pos_choices {
        let b = add(base, &sum_of(&mp));
        let slack = b[ii] as usize;
        for t in 0..=slack.min(neg.len().max(1) * slack) {
            for mn in multisets(&neg, t) {
                out.push(LinearSet { base: to_nat(add(&b, &sum_of(&mn))), periods: gens.clone() });
            }
        }
    }
    out
}

fn multisets<'a, T>(items: &[&'a T], size: usize) -> Vec<Vec<&'a T>> {
    fn go<'a, T>(items: &[&'a T], from: usize, left: usize, acc: &mut Vec<&'a T>, out: &mut Vec<Vec<&'a T>>) {
        if left == 0 {
            out.push(acc.clone());
            return;
        }
        for k in from..items.len() {
            acc.push(items[k]);
            go(items, k, left - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if size == 0 {
        out.push(Vec::new());
    } else if !items.is_empty() {
        go(items, 0, size, &mut Vec::new(), &mut out);
    }
    out
}

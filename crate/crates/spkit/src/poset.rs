//! Finite series-parallel posets: canonical terms, element-level views, factors
//! and exhaustive enumeration.
//!
//! Elements of a term are numbered by a left-to-right preorder walk, and every
//! subset of elements is a `u64` bitmask. Posets with more than 64 elements are
//! rejected with `ResourceBound`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lex::{Cursor, Tok};

pub type Mask = u64;

pub const MAX_ELEMENTS: usize = 64;

pub fn bit(x: usize) -> Mask {
    1u64 << x
}

pub fn elems(mask: Mask) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let x = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(x)
        }
    })
}

/// Canonical labeled series-parallel poset.
///
/// Built through [`SpTerm::seq`] and [`SpTerm::par`], which flatten, drop
/// `Empty` children and sort parallel children by their text, so structural
/// equality decides isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SpTerm {
    Empty,
    Letter(String),
    Seq(Vec<SpTerm>),
    Par(Vec<SpTerm>),
}

impl SpTerm {
    pub fn letter(a: &str) -> SpTerm {
        SpTerm::Letter(a.to_string())
    }

    pub fn seq(children: Vec<SpTerm>) -> SpTerm {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match c {
                SpTerm::Empty => {}
                SpTerm::Seq(cs) => flat.extend(cs),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => SpTerm::Empty,
            1 => flat.pop().unwrap(),
            _ => SpTerm::Seq(flat),
        }
    }

    pub fn par(children: Vec<SpTerm>) -> SpTerm {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match c {
                SpTerm::Empty => {}
                SpTerm::Par(cs) => flat.extend(cs),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => SpTerm::Empty,
            1 => flat.pop().unwrap(),
            _ => {
                flat.sort_by_cached_key(|c| c.to_string());
                SpTerm::Par(flat)
            }
        }
    }

    /// Rebuilds an arbitrary tree through the canonicalizing constructors.
    pub fn canonicalize(&self) -> SpTerm {
        match self {
            SpTerm::Empty | SpTerm::Letter(_) => self.clone(),
            SpTerm::Seq(cs) => SpTerm::seq(cs.iter().map(|c| c.canonicalize()).collect()),
            SpTerm::Par(cs) => SpTerm::par(cs.iter().map(|c| c.canonicalize()).collect()),
        }
    }

    pub fn parse(text: &str) -> Result<SpTerm> {
        let mut cur = Cursor::new(text)?;
        let t = parse_term(&mut cur)?;
        cur.finish()?;
        Ok(t)
    }

    pub fn size(&self) -> usize {
        match self {
            SpTerm::Empty => 0,
            SpTerm::Letter(_) => 1,
            SpTerm::Seq(cs) | SpTerm::Par(cs) => cs.iter().map(SpTerm::size).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SpTerm::Empty)
    }

    /// Singletons and sequential sums; the empty poset is neither.
    pub fn is_sequential(&self) -> bool {
        matches!(self, SpTerm::Letter(_) | SpTerm::Seq(_))
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self, SpTerm::Par(_))
    }

    /// Irreducible sequential factorization.
    pub fn seq_factorize(&self) -> Result<Vec<SpTerm>> {
        match self {
            SpTerm::Empty => Err(Error::EmptyPoset),
            SpTerm::Seq(cs) => Ok(cs.clone()),
            other => Ok(vec![other.clone()]),
        }
    }

    /// Irreducible parallel factorization.
    pub fn par_factorize(&self) -> Result<Vec<SpTerm>> {
        match self {
            SpTerm::Empty => Err(Error::EmptyPoset),
            SpTerm::Par(cs) => Ok(cs.clone()),
            other => Ok(vec![other.clone()]),
        }
    }

    /// Sequential blocks, with `[]` for the empty poset.
    pub fn seq_blocks(&self) -> Vec<SpTerm> {
        self.seq_factorize().unwrap_or_default()
    }

    /// Parallel components, with `[]` for the empty poset.
    pub fn par_blocks(&self) -> Vec<SpTerm> {
        self.par_factorize().unwrap_or_default()
    }

    pub fn letters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_letters(&mut out);
        out
    }

    fn collect_letters(&self, out: &mut BTreeSet<String>) {
        match self {
            SpTerm::Empty => {}
            SpTerm::Letter(a) => {
                out.insert(a.clone());
            }
            SpTerm::Seq(cs) | SpTerm::Par(cs) => cs.iter().for_each(|c| c.collect_letters(out)),
        }
    }

    pub fn count_letter(&self, a: &str) -> usize {
        match self {
            SpTerm::Empty => 0,
            SpTerm::Letter(b) => usize::from(a == b),
            SpTerm::Seq(cs) | SpTerm::Par(cs) => cs.iter().map(|c| c.count_letter(a)).sum(),
        }
    }
}

impl fmt::Display for SpTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpTerm::Empty => write!(f, "eps"),
            SpTerm::Letter(a) => write!(f, "{a}"),
            SpTerm::Seq(cs) | SpTerm::Par(cs) => {
                write!(f, "{}(", if matches!(self, SpTerm::Seq(_)) { "seq" } else { "par" })?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

pub(crate) fn is_reserved(word: &str) -> bool {
    matches!(
        word,
        "eps" | "empty" | "seq" | "par" | "or" | "star" | "omega" | "momega" | "ord" | "mord"
            | "dia" | "diamond" | "sub" | "istar" | "seq1" | "star1" | "dia1" | "omega1"
            | "momega1" | "ord1" | "mord1"
    )
}

fn parse_term(cur: &mut Cursor) -> Result<SpTerm> {
    let word = cur.ident()?;
    match word.as_str() {
        "eps" => Ok(SpTerm::Empty),
        "seq" | "par" => {
            cur.expect("(")?;
            let mut cs = vec![parse_term(cur)?];
            while cur.eat(",") {
                cs.push(parse_term(cur)?);
            }
            cur.expect(")")?;
            Ok(if word == "seq" { SpTerm::seq(cs) } else { SpTerm::par(cs) })
        }
        w if is_reserved(w) => cur.err(format!("`{w}` is not a poset constructor")),
        _ => {
            if matches!(cur.peek(), Some(Tok::Sym("("))) {
                return cur.err(format!("unknown constructor `{word}`"));
            }
            Ok(SpTerm::Letter(word))
        }
    }
}

/// Raw labeled strict order, as exchanged in JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosetRelation {
    pub elements: Vec<u64>,
    pub order: Vec<(u64, u64)>,
    pub labels: BTreeMap<String, String>,
}

/// Element-level view of a finite poset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poset {
    labels: Vec<String>,
    below: Vec<Mask>,
    above: Vec<Mask>,
}

impl Poset {
    pub fn from_term(t: &SpTerm) -> Result<Poset> {
        let n = t.size();
        if n > MAX_ELEMENTS {
            return Err(Error::ResourceBound(format!("{n} elements exceed {MAX_ELEMENTS}")));
        }
        let mut p = Poset { labels: Vec::with_capacity(n), below: vec![0; n], above: vec![0; n] };
        p.fill(t);
        Ok(p)
    }

    fn fill(&mut self, t: &SpTerm) -> Mask {
        match t {
            SpTerm::Empty => 0,
            SpTerm::Letter(a) => {
                self.labels.push(a.clone());
                bit(self.labels.len() - 1)
            }
            SpTerm::Par(cs) => cs.iter().fold(0, |m, c| m | self.fill(c)),
            SpTerm::Seq(cs) => {
                let mut done: Mask = 0;
                for c in cs {
                    let m = self.fill(c);
                    for x in elems(m) {
                        self.below[x] |= done;
                    }
                    for y in elems(done) {
                        self.above[y] |= m;
                    }
                    done |= m;
                }
                done
            }
        }
    }

    pub fn from_relation(rel: &PosetRelation) -> Result<Poset> {
        let n = rel.elements.len();
        if n > MAX_ELEMENTS {
            return Err(Error::ResourceBound(format!("{n} elements exceed {MAX_ELEMENTS}")));
        }
        let index: BTreeMap<u64, usize> =
            rel.elements.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        if index.len() != n {
            return Err(Error::BadRelation("duplicate element id".into()));
        }
        let mut labels = Vec::with_capacity(n);
        for e in &rel.elements {
            let l = rel
                .labels
                .get(&e.to_string())
                .ok_or_else(|| Error::BadRelation(format!("element {e} has no label")))?;
            labels.push(l.clone());
        }
        let mut below = vec![0; n];
        let mut above = vec![0; n];
        for &(a, b) in &rel.order {
            let (i, j) = match (index.get(&a), index.get(&b)) {
                (Some(&i), Some(&j)) => (i, j),
                _ => return Err(Error::BadRelation(format!("pair ({a},{b}) uses unknown ids"))),
            };
            if i == j {
                return Err(Error::BadRelation(format!("reflexive pair ({a},{a})")));
            }
            below[j] |= bit(i);
            above[i] |= bit(j);
        }
        for x in 0..n {
            if below[x] & above[x] != 0 {
                return Err(Error::BadRelation("order is not asymmetric".into()));
            }
            for y in elems(below[x]) {
                if below[y] & !below[x] != 0 {
                    return Err(Error::BadRelation("order is not transitive".into()));
                }
            }
        }
        Ok(Poset { labels, below, above })
    }

    pub fn to_relation(&self) -> PosetRelation {
        let n = self.len();
        let mut order = Vec::new();
        for y in 0..n {
            for x in elems(self.below[y]) {
                order.push((x as u64, y as u64));
            }
        }
        order.sort();
        PosetRelation {
            elements: (0..n as u64).collect(),
            order,
            labels: (0..n).map(|i| (i.to_string(), self.labels[i].clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn full(&self) -> Mask {
        if self.len() == 64 {
            u64::MAX
        } else {
            bit(self.len()) - 1
        }
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn lt(&self, x: usize, y: usize) -> bool {
        self.below[y] & bit(x) != 0
    }

    pub fn below(&self, x: usize) -> Mask {
        self.below[x]
    }

    pub fn above(&self, x: usize) -> Mask {
        self.above[x]
    }

    pub fn comparable(&self, x: usize) -> Mask {
        self.below[x] | self.above[x]
    }

    /// Connected components of the graph over `mask` whose edges are given by `nbrs`.
    fn components(&self, mask: Mask, nbrs: impl Fn(usize) -> Mask) -> Vec<Mask> {
        let mut rest = mask;
        let mut out = Vec::new();
        while rest != 0 {
            let seed = rest & rest.wrapping_neg();
            let mut comp = seed;
            let mut frontier = seed;
            while frontier != 0 {
                let mut next = 0;
                for x in elems(frontier) {
                    next |= nbrs(x) & mask;
                }
                frontier = next & !comp;
                comp |= next;
            }
            rest &= !comp;
            out.push(comp);
        }
        out
    }

    /// Parallel components of the induced sub-poset, ordered by least element.
    pub fn par_blocks(&self, mask: Mask) -> Vec<Mask> {
        self.components(mask, |x| self.comparable(x))
    }

    /// Sequential blocks of the induced sub-poset, ordered bottom to top.
    /// Returns one block when the sub-poset is not a sequential sum.
    pub fn seq_blocks(&self, mask: Mask) -> Vec<Mask> {
        let mut bs = self.components(mask, |x| !self.comparable(x) & !bit(x));
        bs.sort_by_key(|&b| (self.below[b.trailing_zeros() as usize] & mask).count_ones());
        bs
    }

    pub fn is_sequential(&self, mask: Mask) -> bool {
        mask.count_ones() == 1 || self.seq_blocks(mask).len() >= 2
    }

    /// Canonical term of the induced sub-poset, or an N witness.
    pub fn term_of(&self, mask: Mask) -> Result<SpTerm> {
        if mask == 0 {
            return Ok(SpTerm::Empty);
        }
        if mask.count_ones() == 1 {
            return Ok(SpTerm::Letter(self.labels[mask.trailing_zeros() as usize].clone()));
        }
        let pars = self.par_blocks(mask);
        if pars.len() >= 2 {
            let cs = pars.iter().map(|&b| self.term_of(b)).collect::<Result<Vec<_>>>()?;
            return Ok(SpTerm::par(cs));
        }
        let seqs = self.seq_blocks(mask);
        if seqs.len() >= 2 {
            let cs = seqs.iter().map(|&b| self.term_of(b)).collect::<Result<Vec<_>>>()?;
            return Ok(SpTerm::seq(cs));
        }
        Err(Error::NotSeriesParallel(self.find_n(mask).unwrap_or([0; 4])))
    }

    /// Four elements a < b > c < d with no other relations among them.
    fn find_n(&self, mask: Mask) -> Option<[usize; 4]> {
        for c in elems(mask) {
            for b in elems(self.above[c] & mask) {
                for d in elems(self.above[c] & mask & !self.comparable(b)) {
                    let free = mask & self.below[b] & !self.comparable(c) & !self.comparable(d);
                    if let Some(a) = elems(free).next() {
                        return Some([a, b, c, d]);
                    }
                }
            }
        }
        None
    }

    /// Good-interval test read directly off the definition: a non-empty convex
    /// subset of `within` that contains every element of `within` related to
    /// one of its members but unrelated to another.
    pub fn is_good_interval(&self, within: Mask, mask: Mask) -> bool {
        if mask == 0 || mask & !within != 0 {
            return false;
        }
        for p in elems(within & !mask) {
            let lo = self.below[p] & mask != 0;
            let hi = self.above[p] & mask != 0;
            if lo && hi {
                return false;
            }
            let unrelated = mask & !self.comparable(p) != 0;
            if (lo || hi) && unrelated {
                return false;
            }
        }
        true
    }

    /// All factors of the induced sub-poset on `within`, from its decomposition:
    /// contiguous ranges of sequential blocks, unions of parallel components,
    /// and recursively the factors of each block.
    pub fn factors(&self, within: Mask) -> Vec<Mask> {
        let mut out = BTreeSet::new();
        self.collect_factors(within, &mut out);
        out.into_iter().collect()
    }

    fn collect_factors(&self, mask: Mask, out: &mut BTreeSet<Mask>) {
        if mask == 0 {
            return;
        }
        out.insert(mask);
        if mask.count_ones() == 1 {
            return;
        }
        let pars = self.par_blocks(mask);
        if pars.len() >= 2 {
            for sel in 1u32..(1 << pars.len()) {
                let m = pars.iter().enumerate().filter(|(i, _)| sel & (1 << i) != 0);
                out.insert(m.fold(0, |acc, (_, &b)| acc | b));
            }
            for b in pars {
                self.collect_factors(b, out);
            }
            return;
        }
        let seqs = self.seq_blocks(mask);
        for i in 0..seqs.len() {
            let mut acc = 0;
            for b in &seqs[i..] {
                acc |= b;
                out.insert(acc);
            }
        }
        for b in seqs {
            self.collect_factors(b, out);
        }
    }

    pub fn seq_factors(&self, within: Mask) -> Vec<Mask> {
        self.factors(within).into_iter().filter(|&f| self.is_sequential(f)).collect()
    }

    /// Whether `g` is `r + f + s` with `r < f < s` and `r < s`.
    pub fn extends_sequentially(&self, f: Mask, g: Mask) -> bool {
        let rest = g & !f;
        let mut r = 0;
        let mut s = 0;
        for x in elems(rest) {
            if self.above[x] & f == f {
                r |= bit(x);
            } else if self.below[x] & f == f {
                s |= bit(x);
            } else {
                return false;
            }
        }
        elems(r).all(|x| self.above[x] & s == s)
    }

    /// Sequentially maximal factors of the sub-poset `within`.
    pub fn ms_factors(&self, within: Mask) -> Vec<Mask> {
        let all = self.factors(within);
        all.iter()
            .copied()
            .filter(|&f| self.is_sequential(f))
            .filter(|&f| {
                !all.iter().any(|&g| g != f && g & f == f && self.extends_sequentially(f, g))
            })
            .collect()
    }

    /// Direct ms-factors: proper ms-factors not sequentially maximal inside a
    /// larger proper ms-factor.
    pub fn direct_ms_factors(&self, within: Mask) -> Vec<Mask> {
        let ms = self.ms_factors(within);
        let proper: Vec<Mask> = ms.iter().copied().filter(|&f| f != within).collect();
        proper
            .iter()
            .copied()
            .filter(|&f| {
                !proper.iter().any(|&g| {
                    g != f && g & f == f && self.ms_factors(g).contains(&f)
                })
            })
            .collect()
    }
}

/// Factor classification of a poset, as element masks over its preorder numbering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorReport {
    pub sequential_factors: Vec<Mask>,
    pub ms_factors: Vec<Mask>,
    pub direct_ms_factors: Vec<Mask>,
}

pub fn factors(t: &SpTerm) -> Result<FactorReport> {
    if t.is_empty() {
        return Err(Error::EmptyPoset);
    }
    let p = Poset::from_term(t)?;
    let full = p.full();
    Ok(FactorReport {
        sequential_factors: p.seq_factors(full),
        ms_factors: p.ms_factors(full),
        direct_ms_factors: p.direct_ms_factors(full),
    })
}

pub fn sp_decompose(rel: &PosetRelation) -> Result<SpTerm> {
    let p = Poset::from_relation(rel)?;
    p.term_of(p.full())
}

/// Default ceiling on the number of terms `enumerate_posets` may produce.
pub const DEFAULT_ENUM_LIMIT: usize = 500_000;

/// All canonical terms over `alphabet` with at most `n` elements, each once,
/// ordered by size and then by text.
pub fn enumerate_posets(alphabet: &[String], n: usize) -> Result<Vec<SpTerm>> {
    enumerate_posets_limited(alphabet, n, DEFAULT_ENUM_LIMIT)
}

pub fn enumerate_posets_limited(alphabet: &[String], n: usize, limit: usize) -> Result<Vec<SpTerm>> {
    // not_seq[k]: size-k terms usable as Seq children; not_par[k]: as Par children.
    let mut not_seq: Vec<Vec<SpTerm>> = vec![Vec::new(); n + 1];
    let mut not_par: Vec<Vec<SpTerm>> = vec![Vec::new(); n + 1];
    let mut total = 1usize;
    let letters: BTreeSet<&String> = alphabet.iter().collect();
    for k in 1..=n {
        let mut seqs = Vec::new();
        let mut pars = Vec::new();
        if k == 1 {
            for a in &letters {
                not_seq[1].push(SpTerm::Letter((*a).clone()));
                not_par[1].push(SpTerm::Letter((*a).clone()));
            }
        } else {
            compositions(&not_seq, k, &mut Vec::new(), &mut seqs);
            let mut pool: Vec<(usize, String, SpTerm)> = Vec::new();
            for (sz, ts) in not_par.iter().enumerate().take(k) {
                for t in ts {
                    pool.push((sz, t.to_string(), t.clone()));
                }
            }
            pool.sort_by(|a, b| a.1.cmp(&b.1));
            multisets(&pool, 0, k, &mut Vec::new(), &mut pars);
        }
        total += seqs.len() + pars.len() + if k == 1 { letters.len() } else { 0 };
        if total > limit {
            return Err(Error::ResourceBound(format!("more than {limit} posets of size <= {n}")));
        }
        not_par[k].extend(seqs);
        not_seq[k].extend(pars);
    }
    let mut out = vec![SpTerm::Empty];
    for k in 1..=n {
        let mut level: Vec<SpTerm> = not_seq[k].to_vec();
        if k > 1 {
            level.extend(not_par[k].iter().cloned());
        }
        level.sort_by_cached_key(|t| t.to_string());
        out.extend(level);
    }
    Ok(out)
}

fn compositions(parts: &[Vec<SpTerm>], left: usize, acc: &mut Vec<SpTerm>, out: &mut Vec<SpTerm>) {
    if left == 0 {
        if acc.len() >= 2 {
            out.push(SpTerm::Seq(acc.clone()));
        }
        return;
    }
    for sz in 1..=left {
        if acc.is_empty() && sz == left {
            continue;
        }
        for t in &parts[sz] {
            acc.push(t.clone());
            compositions(parts, left - sz, acc, out);
            acc.pop();
        }
    }
}

fn multisets(
    pool: &[(usize, String, SpTerm)],
    from: usize,
    left: usize,
    acc: &mut Vec<SpTerm>,
    out: &mut Vec<SpTerm>,
) {
    if left == 0 {
        if acc.len() >= 2 {
            out.push(SpTerm::Par(acc.clone()));
        }
        return;
    }
    for i in from..pool.len() {
        let (sz, _, t) = &pool[i];
        if *sz > left || (acc.is_empty() && *sz == left) {
            continue;
        }
        acc.push(t.clone());
        multisets(pool, i, left - sz, acc, out);
        acc.pop();
    }
}

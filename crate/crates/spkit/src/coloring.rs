//! Colorings of sequential factors and their encoding by element subsets.
//!
//! An ms-coloring colors every sequentially maximal factor. It is encoded by
//! three subsets per color: `w` holds an element comparable to the whole
//! factor, `s`/`p` hold the three elements of a bound triple `(y, x, x')`
//! where `x ∥ x'` share a sequential block and `y` lies in another block.
//!
//! An s-coloring is a partial coloring of sequential factors. It is encoded by
//! one subset `v` per color plus an ms-coloring over sets of colors.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Display;

use serde_json::{json, Value};

use crate::dgraph::DGraph;
use crate::membership::{verify_path, PathTree};
use crate::poset::{bit, elems, Mask, Poset};
use crate::{Error, Result};

/// Largest palette accepted by `encode_s`; the ms part ranges over its power set.
pub const MAX_PALETTE: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MsSets {
    pub w: Mask,
    pub s: Mask,
    pub p: Mask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsEncoding<C: Ord> {
    pub sets: BTreeMap<C, MsSets>,
}

impl<C: Ord> Default for MsEncoding<C> {
    fn default() -> Self {
        MsEncoding { sets: BTreeMap::new() }
    }
}

impl<C: Ord + Clone> MsEncoding<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, c: &C) -> MsSets {
        self.sets.get(c).copied().unwrap_or_default()
    }

    pub fn entry(&mut self, c: &C) -> &mut MsSets {
        self.sets.entry(c.clone()).or_default()
    }

    fn with(&self, c: &C, f: impl FnOnce(&mut MsSets)) -> Self {
        let mut out = self.clone();
        f(out.entry(c));
        out
    }
}

/// Candidate for coloring an ms-factor: a lone element or a triple with `x < x'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Candidate {
    Lone(usize),
    Triple(usize, usize, usize),
}

/// Shared factor bookkeeping for one poset.
struct Ctx<'a> {
    p: &'a Poset,
    ms: RefCell<HashMap<Mask, Vec<Mask>>>,
}

impl<'a> Ctx<'a> {
    fn new(p: &'a Poset) -> Self {
        Ctx { p, ms: RefCell::new(HashMap::new()) }
    }

    /// Proper ms-factors of `f`, as a sub-poset.
    fn proper_ms(&self, f: Mask) -> Vec<Mask> {
        self.ms
            .borrow_mut()
            .entry(f)
            .or_insert_with(|| self.p.ms_factors(f).into_iter().filter(|&g| g != f).collect())
            .clone()
    }

    /// Block of `f` containing `x` when that block splits in parallel.
    fn par_block_of(&self, f: Mask, x: usize) -> Option<Mask> {
        self.p
            .seq_blocks(f)
            .into_iter()
            .find(|&b| b & bit(x) != 0)
            .filter(|&b| b.count_ones() > 1)
    }

    /// Some pair of `pset` elements sits in different components of `block`.
    fn split_pair(&self, block: Mask, pset: Mask) -> bool {
        let inside = block & pset;
        elems(inside).any(|a| inside & !self.p.comparable(a) & !bit(a) != 0)
    }

    fn directly_bound(&self, f: Mask, m: MsSets, y: usize, x: usize, x2: usize) -> bool {
        let p = self.p;
        // x and x' in different parallel components of one block, y elsewhere.
        let Some(bx) = self.par_block_of(f, x) else { return false };
        if bx & bit(x2) == 0 || p.comparable(x) & bit(x2) != 0 || x == x2 {
            return false;
        }
        if f & bit(y) == 0 || bx & bit(y) != 0 {
            return false;
        }
        // Some z outside x's block unrelated to y.
        if f & !bx & !p.comparable(y) & !bit(y) == 0 {
            return false;
        }
        for g in self.proper_ms(f) {
            for b in p.seq_blocks(g) {
                if b.count_ones() < 2 {
                    continue;
                }
                let rest = g & !b;
                if rest & bit(y) != 0 && self.split_pair(b, m.p) {
                    return false;
                }
                let s_out = rest & m.s != 0;
                for z in [x, x2] {
                    if b & bit(z) != 0 && s_out && b & m.p & !p.comparable(z) & !bit(z) != 0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn candidates<C: Ord + Clone>(&self, f: Mask, enc: &MsEncoding<C>) -> BTreeSet<Candidate> {
        let blocks = self.p.seq_blocks(f);
        let lone: Vec<usize> = blocks
            .iter()
            .filter(|b| b.count_ones() == 1)
            .map(|b| b.trailing_zeros() as usize)
            .collect();
        let mut out = BTreeSet::new();
        if !lone.is_empty() {
            for x in lone {
                if enc.sets.values().any(|m| m.w & bit(x) != 0) {
                    out.insert(Candidate::Lone(x));
                }
            }
            return out;
        }
        for m in enc.sets.values() {
            for y in elems(m.s & f) {
                for x in elems(m.p & f) {
                    for x2 in elems(m.p & f & above_index(x)) {
                        if self.directly_bound(f, *m, y, x, x2) {
                            out.insert(Candidate::Triple(y, x, x2));
                        }
                    }
                }
            }
        }
        out
    }

    fn decode<C: Ord + Clone>(&self, f: Mask, enc: &MsEncoding<C>) -> Option<C> {
        let cands = self.candidates(f, enc);
        if cands.len() != 1 {
            return None;
        }
        let cand = *cands.iter().next()?;
        let mut colors = enc.sets.iter().filter(|(_, m)| match cand {
            Candidate::Lone(x) => m.w & bit(x) != 0,
            Candidate::Triple(y, x, x2) => {
                m.s & bit(y) != 0 && m.p & bit(x) != 0 && m.p & bit(x2) != 0
            }
        });
        let (c, _) = colors.next()?;
        colors.next().is_none().then(|| c.clone())
    }

    /// `y` completes a bound triple for `f` or one of its ms-factors.
    fn s_bound(&self, f: Mask, m: MsSets, y: usize) -> bool {
        if m.s & bit(y) == 0 {
            return false;
        }
        self.within_ms(f).into_iter().filter(|g| g & bit(y) != 0).any(|g| {
            elems(m.p & g).any(|x| {
                elems(m.p & g & above_index(x)).any(|x2| self.directly_bound(g, m, y, x, x2))
            })
        })
    }

    fn p_bound(&self, f: Mask, m: MsSets, x: usize) -> bool {
        if m.p & bit(x) == 0 {
            return false;
        }
        self.within_ms(f).into_iter().filter(|g| g & bit(x) != 0).any(|g| {
            elems(m.s & g).any(|y| {
                elems(m.p & g & !bit(x)).any(|o| self.directly_bound(g, m, y, x.min(o), x.max(o)))
            })
        })
    }

    fn within_ms(&self, f: Mask) -> Vec<Mask> {
        let mut gs = self.proper_ms(f);
        gs.push(f);
        gs
    }

    fn s_free(&self, f: Mask, m: MsSets, y: usize) -> bool {
        !self.s_bound(f, MsSets { s: m.s | bit(y), ..m }, y)
    }

    fn p_free(&self, f: Mask, m: MsSets, x: usize) -> bool {
        !self.p_bound(f, MsSets { p: m.p | bit(x), ..m }, x)
    }
}

/// Elements numbered strictly after `x`.
fn above_index(x: usize) -> Mask {
    u64::MAX.checked_shl(x as u32 + 1).unwrap_or(0)
}

/// All sequentially maximal factors of the poset.
pub fn ms_factors(p: &Poset) -> Vec<Mask> {
    if p.is_empty() {
        return Vec::new();
    }
    p.ms_factors(p.full())
}

/// Color of the ms-factor `f` under `enc`, or `None` when its candidate set is
/// not a singleton or the candidate belongs to several colors.
pub fn ms_color_of<C: Ord + Clone>(p: &Poset, f: Mask, enc: &MsEncoding<C>) -> Result<Option<C>> {
    if !ms_factors(p).contains(&f) {
        return Err(Error::NotMsFactor);
    }
    Ok(Ctx::new(p).decode(f, enc))
}

/// Decodes every ms-factor at once.
pub fn ms_colors<C: Ord + Clone>(p: &Poset, enc: &MsEncoding<C>) -> BTreeMap<Mask, Option<C>> {
    let ctx = Ctx::new(p);
    ms_factors(p).into_iter().map(|f| (f, ctx.decode(f, enc))).collect()
}

/// Builds an encoding of a total ms-coloring, inner factors first. A factor
/// with a lone sequential block gets its least such element in `w`; otherwise
/// the lexicographically least free triple is added to `s` and `p`.
pub fn encode_ms<C: Ord + Clone>(p: &Poset, coloring: &BTreeMap<Mask, C>) -> Result<MsEncoding<C>> {
    let mut order = ms_factors(p);
    if let Some(f) = order.iter().find(|f| !coloring.contains_key(f)) {
        return Err(Error::PreconditionViolated(format!("ms-factor {f:#x} has no color")));
    }
    order.sort_by_key(|f| (f.count_ones(), *f));
    let ctx = Ctx::new(p);
    let mut enc = MsEncoding::new();
    for f in order {
        let e = &coloring[&f];
        let blocks = p.seq_blocks(f);
        if let Some(b) = blocks.iter().find(|b| b.count_ones() == 1) {
            enc.entry(e).w |= b;
            continue;
        }
        enc = pick_triple(&ctx, f, e, &enc).ok_or_else(|| {
            Error::PreconditionViolated(format!("no free triple colors factor {f:#x}"))
        })?;
    }
    Ok(enc)
}

fn pick_triple<C: Ord + Clone>(ctx: &Ctx, f: Mask, e: &C, enc: &MsEncoding<C>) -> Option<MsEncoding<C>> {
    let p = ctx.p;
    let m = enc.get(e);
    let blocks = p.seq_blocks(f);
    for y in elems(f).filter(|&y| ctx.s_free(f, m, y)) {
        let by = blocks.iter().copied().find(|b| b & bit(y) != 0)?;
        let free_x: Vec<usize> = elems(f & !by).filter(|&x| ctx.p_free(f, m, x)).collect();
        for (i, &x) in free_x.iter().enumerate() {
            for &x2 in &free_x[i + 1..] {
                if p.comparable(x) & bit(x2) != 0 || ctx.par_block_of(f, x) != ctx.par_block_of(f, x2) {
                    continue;
                }
                let next = enc.with(e, |s| {
                    s.s |= bit(y);
                    s.p |= bit(x) | bit(x2);
                });
                if ctx.decode(f, &next).as_ref() == Some(e) {
                    return Some(next);
                }
            }
        }
    }
    None
}

/// Every element of `X_c^s` (`X_c^p`) is s-bound (p-bound) by `c` for the whole poset.
pub fn bookkeeping_holds<C: Ord + Clone>(p: &Poset, enc: &MsEncoding<C>) -> bool {
    let ctx = Ctx::new(p);
    let roots: Vec<Mask> = if p.is_sequential(p.full()) {
        vec![p.full()]
    } else {
        p.par_blocks(p.full())
    };
    enc.sets.values().all(|&m| {
        let bound_in = |x: usize, s: bool| {
            roots.iter().filter(|&&r| r & bit(x) != 0).any(|&r| {
                if s {
                    ctx.s_bound(r, m, x)
                } else {
                    ctx.p_bound(r, m, x)
                }
            })
        };
        elems(m.s).all(|y| bound_in(y, true)) && elems(m.p).all(|x| bound_in(x, false))
    })
}

/// A partial coloring of sequential factors over an explicit palette.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SColoring<C: Ord> {
    pub palette: BTreeSet<C>,
    pub map: BTreeMap<Mask, C>,
}

impl<C: Ord + Clone> SColoring<C> {
    pub fn new(palette: impl IntoIterator<Item = C>) -> Self {
        SColoring { palette: palette.into_iter().collect(), map: BTreeMap::new() }
    }

    pub fn with(mut self, f: Mask, c: C) -> Self {
        self.palette.insert(c.clone());
        self.map.insert(f, c);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SEncoding<C: Ord> {
    pub palette: BTreeSet<C>,
    pub v: BTreeMap<C, Mask>,
    pub ms: MsEncoding<BTreeSet<C>>,
}

/// `f` followed by `g` forms a sequential factor of `within`.
fn concatenates(p: &Poset, within: Mask, f: Mask, g: Mask) -> bool {
    elems(f).all(|x| p.above(x) & g == g) && p.is_good_interval(within, f | g)
}

/// Compatibility of two colored sequential factors of `within`.
pub fn compatible_pair<C: PartialEq>(p: &Poset, within: Mask, (f, cf): (Mask, &C), (g, cg): (Mask, &C)) -> bool {
    if f & g == 0 {
        cf != cg || !(concatenates(p, within, f, g) || concatenates(p, within, g, f))
    } else if f & g == f || f & g == g {
        let (small, big) = if f & g == f { (f, g) } else { (g, f) };
        cf != cg || elems(big & !small).any(|x| p.comparable(x) & small == 0)
    } else {
        false
    }
}

/// Checks the compatibility conditions pairwise; reports the first offending pair.
pub fn is_compatible<C: Ord + Clone>(p: &Poset, coloring: &SColoring<C>) -> Result<()> {
    is_compatible_within(p, p.full(), coloring)
}

/// Compatibility relative to the sub-model `within`.
pub fn is_compatible_within<C: Ord + Clone>(p: &Poset, within: Mask, coloring: &SColoring<C>) -> Result<()> {
    let items: Vec<(&Mask, &C)> = coloring.map.iter().collect();
    for (i, &(&f, cf)) in items.iter().enumerate() {
        for &(&g, cg) in &items[i + 1..] {
            if !compatible_pair(p, within, (f, cf), (g, cg)) {
                return Err(Error::IncompatibleColoring(f, g));
            }
        }
    }
    Ok(())
}

/// Builds an encoding whose decoding agrees with `coloring` on its domain.
pub fn encode_s<C: Ord + Clone>(p: &Poset, coloring: &SColoring<C>) -> Result<SEncoding<C>> {
    if coloring.palette.len() > MAX_PALETTE {
        return Err(Error::ResourceBound(format!(
            "palette of {} colors exceeds {MAX_PALETTE}",
            coloring.palette.len()
        )));
    }
    let seqs: BTreeSet<Mask> = seq_factors(p).into_iter().collect();
    if coloring.map.keys().any(|f| !seqs.contains(f)) {
        return Err(Error::NotSequentialFactor);
    }
    is_compatible(p, coloring)?;
    let mut derived: BTreeMap<Mask, BTreeSet<C>> =
        ms_factors(p).into_iter().map(|f| (f, BTreeSet::new())).collect();
    let mut v: BTreeMap<C, Mask> = BTreeMap::new();
    for (&f, c) in &coloring.map {
        for k in p.direct_ms_factors(f) {
            if let Some(set) = derived.get_mut(&k) {
                set.insert(c.clone());
            }
        }
        for b in p.seq_blocks(f).into_iter().filter(|b| b.count_ones() == 1) {
            *v.entry(c.clone()).or_default() |= b;
        }
    }
    let ms = encode_ms(p, &derived)?;
    Ok(SEncoding { palette: coloring.palette.clone(), v, ms })
}

fn seq_factors(p: &Poset) -> Vec<Mask> {
    if p.is_empty() {
        return Vec::new();
    }
    p.seq_factors(p.full())
}

/// `f` is a run of consecutive sequential blocks of the strictly larger `g`.
fn inner_run(p: &Poset, f: Mask, g: Mask) -> bool {
    if f == g || f & g != f {
        return false;
    }
    let hit: Vec<usize> = p
        .seq_blocks(g)
        .iter()
        .enumerate()
        .filter(|(_, &b)| b & f != 0)
        .map(|(i, &b)| if b & f == b { i } else { usize::MAX })
        .collect();
    !hit.contains(&usize::MAX) && hit.windows(2).all(|w| w[1] == w[0] + 1)
}

/// Colors each sequential factor receives under `enc`, largest factors first
/// since a factor is colored only when no sequential extension has the color.
pub fn s_color_sets<C: Ord + Clone>(p: &Poset, enc: &SEncoding<C>) -> BTreeMap<Mask, BTreeSet<C>> {
    let ctx = Ctx::new(p);
    let mut ms_memo: HashMap<Mask, Option<BTreeSet<C>>> = HashMap::new();
    let mut order = seq_factors(p);
    order.sort_by_key(|f| std::cmp::Reverse((f.count_ones(), *f)));
    let mut out: BTreeMap<Mask, BTreeSet<C>> = BTreeMap::new();
    for f in order {
        let blocks = p.seq_blocks(f);
        let mut colors = BTreeSet::new();
        'color: for c in &enc.palette {
            let vc = enc.v.get(c).copied().unwrap_or(0);
            for &b in &blocks {
                if b.count_ones() == 1 {
                    if vc & b == 0 {
                        continue 'color;
                    }
                    continue;
                }
                for k in p.par_blocks(b) {
                    let got = ms_memo.entry(k).or_insert_with(|| ctx.decode(k, &enc.ms));
                    if !got.as_ref().is_some_and(|set| set.contains(c)) {
                        continue 'color;
                    }
                }
            }
            let extended = out.iter().any(|(&g, cs)| cs.contains(c) && inner_run(p, f, g));
            if !extended {
                colors.insert(c.clone());
            }
        }
        out.insert(f, colors);
    }
    out
}

/// The color of `f`, when exactly one color satisfies the decoding conditions.
pub fn s_color_of<C: Ord + Clone>(p: &Poset, f: Mask, enc: &SEncoding<C>) -> Result<Option<C>> {
    let sets = s_color_sets(p, enc);
    let cs = sets.get(&f).ok_or(Error::NotSequentialFactor)?;
    Ok(single(cs))
}

/// Decoded coloring restricted to factors with exactly one color.
pub fn s_colors<C: Ord + Clone>(p: &Poset, enc: &SEncoding<C>) -> BTreeMap<Mask, C> {
    s_color_sets(p, enc)
        .into_iter()
        .filter_map(|(f, cs)| single(&cs).map(|c| (f, c)))
        .collect()
}

fn single<C: Clone>(cs: &BTreeSet<C>) -> Option<C> {
    (cs.len() == 1).then(|| cs.iter().next().cloned()).flatten()
}

/// Color of a path-derived coloring: an alternation bit and a special edge.
pub type PathColor = (bool, (usize, usize));

/// Colors each factor marked in `t` by its marking edge. Same-edge factors that
/// concatenate, or that nest with no element of the outer one unrelated to the
/// inner one, get different bits.
pub fn coloring_from_path(p: &Poset, t: &PathTree, d: &DGraph) -> Result<SColoring<PathColor>> {
    verify_path(d, p, t, p.full()).map_err(|e| Error::InvalidPath(e.to_string()))?;
    let mut edge_of: BTreeMap<Mask, (usize, usize)> = BTreeMap::new();
    for m in t.marked_factors(d) {
        if let Some(prev) = edge_of.insert(m.elements, m.edge) {
            if prev != m.edge {
                return Err(Error::InvalidPath(format!(
                    "factor {:#x} marked by two edges",
                    m.elements
                )));
            }
        }
    }
    let fs: Vec<(Mask, (usize, usize))> = edge_of.into_iter().collect();
    let clash = |i: usize, j: usize| {
        let ((f, ef), (g, eg)) = (fs[i], fs[j]);
        if ef != eg {
            return false;
        }
        if f & g == 0 {
            return concatenates(p, p.full(), f, g) || concatenates(p, p.full(), g, f);
        }
        let (small, big) = if f & g == f { (f, g) } else { (g, f) };
        elems(big & !small).all(|x| p.comparable(x) & small != 0)
    };
    let mut bits: Vec<Option<bool>> = vec![None; fs.len()];
    for start in 0..fs.len() {
        if bits[start].is_some() {
            continue;
        }
        bits[start] = Some(false);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let b = bits[i].unwrap_or(false);
            for j in 0..fs.len() {
                if j == i || !clash(i, j) {
                    continue;
                }
                match bits[j] {
                    None => {
                        bits[j] = Some(!b);
                        queue.push_back(j);
                    }
                    Some(bj) if bj == b => {
                        return Err(Error::InvalidPath("marks admit no alternating bits".into()));
                    }
                    _ => {}
                }
            }
        }
    }
    let palette = d.special_edges().into_iter().flat_map(|e| [(false, e), (true, e)]);
    let mut out = SColoring::new(palette);
    for (k, (f, e)) in fs.into_iter().enumerate() {
        out.map.insert(f, (bits[k].unwrap_or(false), e));
    }
    is_compatible(p, &out)?;
    Ok(out)
}

fn ids(mask: Mask) -> Value {
    json!(elems(mask).map(|x| x + 1).collect::<Vec<_>>())
}

impl<C: Ord + Display> MsEncoding<C> {
    /// JSON keyed by color, with 1-based element ids.
    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        for (c, m) in &self.sets {
            obj.insert(c.to_string(), json!({"w": ids(m.w), "s": ids(m.s), "p": ids(m.p)}));
        }
        Value::Object(obj)
    }
}

impl<C: Ord + Display> SEncoding<C> {
    pub fn to_json(&self) -> Value {
        let v: serde_json::Map<String, Value> =
            self.v.iter().map(|(c, &m)| (c.to_string(), ids(m))).collect();
        let mut ms = serde_json::Map::new();
        for (cs, m) in &self.ms.sets {
            let tag = cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
            ms.insert(format!("{{{tag}}}"), json!({"w": ids(m.w), "s": ids(m.s), "p": ids(m.p)}));
        }
        json!({"v": v, "ms": ms})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::SpTerm;

    fn poset(text: &str) -> Poset {
        Poset::from_term(&SpTerm::parse(text).unwrap()).unwrap()
    }

    fn el(p: &Poset, name: &str) -> usize {
        (0..p.len()).find(|&x| p.label(x) == name).unwrap()
    }

    fn set(p: &Poset, names: &[&str]) -> Mask {
        names.iter().fold(0, |m, n| m | bit(el(p, n)))
    }

    fn range(p: &Poset, lo: usize, hi: usize) -> Mask {
        (lo..=hi).fold(0, |m, i| m | bit(el(p, &format!("x{i}"))))
    }

    // Consistent with the prose: x4 and x16 are the only elements comparable to
    // all of P1; P3 = (x19 | x20)(x22 | x23); x18 and x21 complete P2's triple.
    const FIG6: &str = "seq(x1, par(
        seq(par(x2, x3), x4, par(seq(x5, x6), x7, x8), par(x9, x10),
            par(seq(x11, x12), x13, seq(x14, x15)), x16),
        seq(par(x17, x18), par(x21, seq(par(x19, x20), par(x22, x23))), par(x24, x25))))";

    #[test]
    fn reconstructed_ms_factors() {
        let p = poset(FIG6);
        let ms = ms_factors(&p);
        for f in [range(&p, 2, 16), range(&p, 17, 25), set(&p, &["x19", "x20", "x22", "x23"])] {
            assert!(ms.contains(&f));
        }
    }

    #[test]
    fn figure_sets_decode() {
        let p = poset(FIG6);
        let mut enc: MsEncoding<&str> = MsEncoding::new();
        enc.entry(&"red").w = set(&p, &["x4"]);
        *enc.entry(&"blue") = MsSets {
            w: 0,
            s: set(&p, &["x19", "x18"]),
            p: set(&p, &["x22", "x23", "x21", "x19"]),
        };
        let p1 = range(&p, 2, 16);
        let p2 = range(&p, 17, 25);
        let p3 = set(&p, &["x19", "x20", "x22", "x23"]);
        assert_eq!(ms_color_of(&p, p1, &enc).unwrap(), Some("red"));
        assert_eq!(ms_color_of(&p, p2, &enc).unwrap(), Some("blue"));
        assert_eq!(ms_color_of(&p, p3, &enc).unwrap(), Some("blue"));
        let ctx = Ctx::new(&p);
        let (y, x, x2) = (el(&p, "x19"), el(&p, "x22"), el(&p, "x23"));
        let t = Candidate::Triple(y, x.min(x2), x.max(x2));
        assert_eq!(ctx.candidates(p3, &enc), BTreeSet::from([t]));
        // x20 would give P3 a second candidate, so it is not s-free.
        let blue = enc.get(&"blue");
        let before = MsSets { s: set(&p, &["x19"]), p: set(&p, &["x22", "x23"]), w: 0 };
        assert!(!ctx.s_free(p3, before, el(&p, "x20")));
        assert!(!ctx.s_free(p2, before, el(&p, "x19")));
        assert!(ctx.s_free(p2, before, el(&p, "x18")));
        assert!(ctx.p_bound(p3, blue, el(&p, "x22")));
        assert!(bookkeeping_holds(&p, &enc));
    }

    #[test]
    fn empty_encoding_colors_nothing() {
        let p = poset(FIG6);
        let enc: MsEncoding<u8> = MsEncoding::new();
        assert!(ms_colors(&p, &enc).values().all(Option::is_none));
        let n = poset("seq(a, b)");
        assert_eq!(ms_color_of(&n, bit(0), &enc), Err(Error::NotMsFactor));
    }

    #[test]
    fn encode_ms_on_reconstructed_poset() {
        let p = poset(FIG6);
        let p2 = range(&p, 17, 25);
        let p3 = set(&p, &["x19", "x20", "x22", "x23"]);
        let coloring: BTreeMap<Mask, &str> = ms_factors(&p)
            .into_iter()
            .map(|f| (f, if f == p2 || f == p3 { "blue" } else { "red" }))
            .collect();
        let enc = encode_ms(&p, &coloring).unwrap();
        let decoded = ms_colors(&p, &enc);
        for (f, c) in &coloring {
            assert_eq!(decoded[f], Some(*c), "factor {f:#x}");
        }
        assert!(bookkeeping_holds(&p, &enc));
    }

    #[test]
    fn singleton_encoding() {
        let p = poset("a");
        let enc = encode_ms(&p, &BTreeMap::from([(1, 'c')])).unwrap();
        assert_eq!(enc.sets, BTreeMap::from([('c', MsSets { w: 1, s: 0, p: 0 })]));
    }

    const FIG7: &str = "seq(a, par(b, c), d, par(e, seq(par(g, h), par(i, j)), f))";

    #[test]
    fn figure_s_encoding_decodes() {
        let p = poset(FIG7);
        let (red, green) = ("red", "green");
        let mut ms: MsEncoding<BTreeSet<&str>> = MsEncoding::new();
        ms.entry(&BTreeSet::new()).w = set(&p, &["a"]);
        ms.entry(&BTreeSet::from([green])).w = set(&p, &["b", "c"]);
        *ms.entry(&BTreeSet::from([red])) = MsSets {
            w: set(&p, &["e", "g", "h", "i", "j", "f"]),
            s: set(&p, &["h"]),
            p: set(&p, &["i", "j"]),
        };
        let enc = SEncoding {
            palette: BTreeSet::from([red, green]),
            v: BTreeMap::from([(green, set(&p, &["a", "e"])), (red, set(&p, &["d"]))]),
            ms,
        };
        let f1 = set(&p, &["a", "b", "c"]);
        let f2 = p.full() & !f1;
        let f3 = set(&p, &["g", "h", "i", "j"]);
        let f4 = set(&p, &["e"]);
        assert_eq!(s_color_of(&p, f1, &enc).unwrap(), Some(green));
        assert_eq!(s_color_of(&p, f2, &enc).unwrap(), Some(red));
        assert_eq!(s_color_of(&p, f3, &enc).unwrap(), Some(red));
        assert_eq!(s_color_of(&p, f4, &enc).unwrap(), Some(green));
        assert_eq!(s_color_of(&p, set(&p, &["b", "c"]), &enc), Err(Error::NotSequentialFactor));
    }

    #[test]
    fn encode_s_round_trip_on_figure_coloring() {
        let p = poset(FIG7);
        let f1 = set(&p, &["a", "b", "c"]);
        let col = SColoring::new(["red", "green"])
            .with(f1, "green")
            .with(p.full() & !f1, "red")
            .with(set(&p, &["g", "h", "i", "j"]), "red")
            .with(set(&p, &["e"]), "green");
        let enc = encode_s(&p, &col).unwrap();
        assert_eq!(enc.v[&"green"], set(&p, &["a", "e"]));
        assert_eq!(enc.v[&"red"], set(&p, &["d"]));
        let got = s_colors(&p, &enc);
        for (f, c) in &col.map {
            assert_eq!(got.get(f), Some(c));
        }
    }

    #[test]
    fn compatibility_rules() {
        let p = poset("seq(a, b, par(c, d))");
        let (a, b) = (bit(el(&p, "a")), bit(el(&p, "b")));
        let adjacent = SColoring::new([0]).with(a, 0).with(b, 0);
        assert_eq!(is_compatible(&p, &adjacent), Err(Error::IncompatibleColoring(a, b)));
        assert!(encode_s(&p, &adjacent).is_err());
        assert!(is_compatible(&p, &SColoring::new([0, 1]).with(a, 0).with(b, 1)).is_ok());
        // Nested with the same color needs an outer element unrelated to the inner factor.
        let q = poset("par(seq(a, b), c)");
        let ab = set(&q, &["a", "b"]);
        let nested = SColoring::new([0]).with(ab, 0).with(bit(el(&q, "a")), 0);
        assert!(is_compatible(&q, &nested).is_err());
        let overlap = SColoring::new([0, 1]).with(a | b, 0).with(p.full() & !a, 1);
        assert!(is_compatible(&p, &overlap).is_err());
    }

    fn path_coloring(d: &DGraph, text: &str) -> (Poset, SColoring<PathColor>) {
        let term = SpTerm::parse(text).unwrap();
        let p = Poset::from_term(&term).unwrap();
        let t = crate::membership::find_path(d, &term).unwrap().unwrap();
        let col = coloring_from_path(&p, &t, d).unwrap();
        (p, col)
    }

    #[test]
    fn nested_iteration_marks_alternate() {
        let e = crate::rexpr::Expr::parse(
            "istar(x, or(istar(x, par(a, or(star1(x), x, eps))), seq1(b, par(c, d))))",
        )
        .unwrap();
        let d = DGraph::build(&e).unwrap();
        let (p, col) = path_coloring(&d, "par(a, seq(x, par(a, seq(b, par(c, d), b, par(c, d)))))");
        let terms: BTreeMap<String, Vec<PathColor>> = col.map.iter().fold(BTreeMap::new(), |mut acc, (&f, &c)| {
            acc.entry(p.term_of(f).unwrap().to_string()).or_default().push(c);
            acc
        });
        let edges: Vec<(String, Vec<(usize, usize)>)> =
            terms.iter().map(|(k, cs)| (k.clone(), cs.iter().map(|c| c.1).collect())).collect();
        assert_eq!(
            edges,
            [
                ("a".to_string(), vec![(3, 1)]),
                ("seq(b, par(c, d))".to_string(), vec![(3, 6), (3, 6)]),
                ("seq(b, par(c, d), b, par(c, d))".to_string(), vec![(3, 2)]),
            ]
        );
        let halves = &terms["seq(b, par(c, d))"];
        assert_ne!(halves[0].0, halves[1].0);
        assert_eq!(col.palette.len(), 6);
        is_compatible(&p, &col).unwrap();

        let enc = encode_s(&p, &col).unwrap();
        let got = s_colors(&p, &enc);
        for (f, c) in &col.map {
            assert_eq!(got.get(f), Some(c));
        }
        // Lone blocks of each colored factor land in that color's set.
        let bs: Vec<usize> = (0..p.len()).filter(|&x| p.label(x) == "b").collect();
        let (bl, br) = if p.lt(bs[0], bs[1]) { (bs[0], bs[1]) } else { (bs[1], bs[0]) };
        let run = col.map.iter().find(|(_, c)| c.1 == (3, 2)).unwrap().1;
        assert_eq!(enc.v[run], bit(bl) | bit(br));
        let a4 = col.map.iter().find(|(_, c)| c.1 == (3, 1)).unwrap();
        assert_eq!(enc.v[a4.1], *a4.0);
    }

    #[test]
    fn single_mark_from_inner_iteration() {
        let d = DGraph::from_rational(&crate::rexpr::Expr::parse("sub(x, a, istar(x, seq(a, par(x, x))))").unwrap()).unwrap();
        let (p, col) = path_coloring(&d, "seq(a, par(seq(a, par(a, a)), a))");
        assert_eq!(col.map.len(), 1);
        let (&f, &(_, edge)) = col.map.iter().next().unwrap();
        assert_eq!(edge, (3, 1));
        assert_eq!(p.term_of(f).unwrap().to_string(), "seq(a, par(a, a))");
        let (_, none) = path_coloring(&d, "seq(a, par(a, a))");
        assert!(none.map.is_empty());
    }
}

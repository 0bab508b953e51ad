#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

use std::collections::BTreeSet;

use spkit::semilinear::{SemiLinear, Vector};

pub type Points = BTreeSet<Vector>;

fn in_box(v: &[u64], b: u64) -> bool {
    v.iter().all(|&x| x <= b)
}

/// Sums of exactly `c` draws from `inner` (non-zero points), lifted by `lift`,
/// kept inside the box.
fn draw_sums(inner: &Points, c: u64, dim: usize, b: u64, lift: &dyn Fn(&[u64]) -> Vector) -> Points {
    let mut cur: Points = [vec![0; dim]].into_iter().collect();
    for _ in 0..c {
        let mut next = Points::new();
        for d in &cur {
            for u in inner {
                let w: Vector = d.iter().zip(lift(u)).map(|(x, y)| x + y).collect();
                if in_box(&w, b) {
                    next.insert(w);
                }
            }
        }
        cur = next;
        if cur.is_empty() {
            break;
        }
    }
    cur
}

/// Points of the substitution on `[0..b]^dim`, evaluated straight from the
/// coordinate characterization: `embed(v') + Σ_{v'_i draws} lift(u)`.
fn brute_subst(
    inner: &Points,
    outer: &SemiLinear,
    i: usize,
    dim: usize,
    b: u64,
    embed: &dyn Fn(&[u64]) -> Vector,
    lift: &dyn Fn(&[u64]) -> Vector,
) -> Points {
    assert!(inner.iter().all(|u| u.iter().any(|&x| x > 0)), "oracle needs a zero-free inner set");
    let cap = b * dim as u64;
    let mut out = Points::new();
    for v in outer.points_in_box(cap) {
        if v.iter().enumerate().any(|(r, &x)| r != i - 1 && x > b) {
            continue;
        }
        let e = embed(&v);
        for d in draw_sums(inner, v[i - 1], dim, b, lift) {
            let w: Vector = e.iter().zip(&d).map(|(x, y)| x + y).collect();
            if in_box(&w, b) {
                out.insert(w);
            }
        }
    }
    out
}

pub fn brute_subst_disjoint(inner: &SemiLinear, outer: &SemiLinear, i: usize, b: u64) -> Points {
    let (k, k2) = (inner.dim, outer.dim);
    let dim = k + k2 - 1;
    let embed = move |v: &[u64]| {
        let mut w = v[..i - 1].to_vec();
        w.extend(std::iter::repeat_n(0, k));
        w.extend_from_slice(&v[i..]);
        w
    };
    let lift = move |u: &[u64]| {
        let mut w = vec![0; i - 1];
        w.extend_from_slice(u);
        w.extend(std::iter::repeat_n(0, k2 - i));
        w
    };
    brute_subst(&inner.points_in_box(b), outer, i, dim, b, &embed, &lift)
}

pub fn brute_subst_same_points(inner: &Points, outer: &SemiLinear, i: usize, b: u64) -> Points {
    let embed = move |v: &[u64]| {
        let mut w = v.to_vec();
        w[i - 1] = 0;
        w
    };
    brute_subst(inner, outer, i, outer.dim, b, &embed, &|u| u.to_vec())
}

pub fn brute_subst_same(inner: &SemiLinear, outer: &SemiLinear, i: usize, b: u64) -> Points {
    brute_subst_same_points(&inner.points_in_box(b), outer, i, b)
}

/// Cumulative iteration on the box: `U_0 = {1_i}`, `U_{j+1} = U_j ∪ (U_j • S)`.
pub fn brute_power(s: &SemiLinear, i: usize, j: usize, b: u64) -> Points {
    let mut unit = vec![0; s.dim];
    unit[i - 1] = 1;
    let mut u: Points = [unit].into_iter().collect();
    for _ in 0..j {
        let next = brute_subst_same_points(&u, s, i, b);
        u.extend(next);
    }
    u
}

/// Iterates until the box image stops changing; returns the fixpoint and the
/// first `J` with `U_J = U_{J+1}` on the box.
pub fn brute_power_saturated(s: &SemiLinear, i: usize, b: u64, max_j: usize) -> Option<(Points, usize)> {
    let mut u = brute_power(s, i, 0, b);
    for j in 0..=max_j {
        let mut next = u.clone();
        next.extend(brute_subst_same_points(&u, s, i, b));
        if next == u {
            return Some((u, j));
        }
        u = next;
    }
    None
}

/// Random series-parallel term with exactly `n` elements over `alphabet`.
pub fn random_term(rng: &mut impl rand::Rng, n: usize, alphabet: &[&str]) -> spkit::poset::SpTerm {
    use spkit::poset::SpTerm;
    if n == 1 {
        return SpTerm::letter(alphabet[rng.gen_range(0..alphabet.len())]);
    }
    let parts = rng.gen_range(2..=n.min(3));
    let mut cuts: Vec<usize> = (1..n).collect();
    rand::seq::SliceRandom::shuffle(cuts.as_mut_slice(), rng);
    let mut cuts: Vec<usize> = cuts[..parts - 1].to_vec();
    cuts.sort();
    cuts.insert(0, 0);
    cuts.push(n);
    let children = cuts.windows(2).map(|w| random_term(rng, w[1] - w[0], alphabet)).collect();
    if rng.gen_bool(0.5) {
        SpTerm::seq(children)
    } else {
        SpTerm::par(children)
    }
}

/// Indexes subtrees in pre-order.
fn subtree_mut<'a>(t: &'a mut spkit::membership::PathTree, k: &mut usize) -> Option<&'a mut spkit::membership::PathTree> {
    if *k == 0 {
        return Some(t);
    }
    *k -= 1;
    for s in &mut t.children {
        if let Some(found) = subtree_mut(&mut s.tree, k) {
            return Some(found);
        }
    }
    None
}

/// Changes exactly one field of one node of a path tree: its node, its
/// decoration, its element set, or the position of one of its steps.
pub fn mutate(t: &spkit::membership::PathTree, graph_len: usize, rng: &mut impl rand::Rng) -> spkit::membership::PathTree {
    use spkit::membership::Decoration;
    let mut m = t.clone();
    let mut k = rng.gen_range(0..t.size());
    let node = subtree_mut(&mut m, &mut k).expect("index below tree size");
    loop {
        match rng.gen_range(0..4) {
            0 => {
                let to = (node.node + rng.gen_range(1..graph_len.max(2))) % graph_len.max(2);
                node.node = to;
            }
            1 => {
                node.decoration = match &node.decoration {
                    Decoration::Letter(a) => Decoration::Letter(if a == "a" { "b".into() } else { "a".into() }),
                    Decoration::Arity(n) => Decoration::Arity(if rng.gen_bool(0.5) || *n == 0 { n + 1 } else { n - 1 }),
                    Decoration::Order(n) => Decoration::Order(n + 2),
                    Decoration::Vector(v) => {
                        let mut v = v.clone();
                        if v.is_empty() {
                            Decoration::Arity(0)
                        } else {
                            let j = rng.gen_range(0..v.len());
                            v[j] = if v[j] == 0 || rng.gen_bool(0.5) { v[j] + 1 } else { v[j] - 1 };
                            Decoration::Vector(v)
                        }
                    }
                };
            }
            2 => node.elements ^= 1 << rng.gen_range(0..8),
            _ => {
                if node.children.is_empty() {
                    continue;
                }
                let j = rng.gen_range(0..node.children.len());
                let p = node.children[j].position;
                node.children[j].position = if p == 0 || rng.gen_bool(0.5) { p + 1 } else { p - 1 };
            }
        }
        break;
    }
    assert_ne!(&m, t);
    m
}

/// Structural facts every built graph must satisfy; returns the first one
/// that fails.
pub fn structural_violation(src: &str) -> Option<String> {
    use spkit::dgraph::{DGraph, Label};
    use spkit::rexpr::Expr;
    let e = Expr::parse(src).unwrap();
    let g = e.to_gt1().unwrap();
    let xis = g.substitution_letters();
    let d = DGraph::build(&g).unwrap();
    let r = d.check_properties(&xis);
    if !r.all() {
        return Some(format!("properties {r:?}"));
    }
    // Nullability is read off the root.
    let tautology = d.len() == 1 && matches!(&d.labels[0], Label::Pres(s) if s.dim == 0 && s.contains_zero());
    let root_null = matches!(&d.labels[d.root], Label::Pres(s) if s.contains_zero());
    if e.nullable() != (root_null || tautology) {
        return Some(format!("nullable {} but root accepts empty {}", e.nullable(), root_null));
    }
    // Special edges never lead to a substitution letter.
    for (_, to) in d.special_edges() {
        if xis.iter().any(|x| d.labels[to].is_letter(x)) {
            return Some(format!("special edge into a letter node {}", DGraph::name(to)));
        }
    }
    if !d.special_paths_guarded() {
        return Some("special cycle without a guarding unit exclusion".into());
    }
    None
}

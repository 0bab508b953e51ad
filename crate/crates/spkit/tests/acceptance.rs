//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::{brute_power, mutate, random_term, structural_violation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spkit::coloring::*;
use spkit::corpus::{ALPHABET, CORPUS};
use spkit::crosscheck::{crosscheck, Config, Subject};
use spkit::dgraph::DGraph;
use spkit::membership::{find_path, verify_witness, DGraphMembership, ExprMembership};
use spkit::poset::{bit, enumerate_posets, Mask, Poset, SpTerm};
use spkit::rexpr::{Expr, VIOLATION_ISTAR_EPS, VIOLATION_SUB_EPS, VIOLATION_XI_COMPARABLE};
use spkit::semilinear::{power_subst, saturate_in_box, star_subst, subst_disjoint, LinearSet, SemiLinear, Vector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn alphabet() -> Vec<String> {
    ALPHABET.iter().map(|s| s.to_string()).collect()
}

fn points(dim: usize, vs: &[&[u64]]) -> SemiLinear {
    SemiLinear::points(dim, vs.iter().map(|v| v.to_vec()))
}

fn box_points(dim: usize, b: u64, keep: impl Fn(&[u64]) -> bool) -> BTreeSet<Vector> {
    let mut out = BTreeSet::new();
    let mut v = vec![0u64; dim];
    loop {
        if keep(&v) {
            out.insert(v.clone());
        }
        let Some(k) = (0..dim).find(|&k| v[k] < b) else { break };
        v[k] += 1;
        v[..k].iter_mut().for_each(|x| *x = 0);
    }
    out
}

/// Iterate sizes against the stated closed form on [0..20]², j = 1..5.
const CLOSED_FORM_COUNTS: [(usize, usize); 5] = [(3, 4), (8, 11), (24, 34), (80, 116), (246, 346)];

fn semilinear_star() -> Outcome {
    let s = points(2, &[&[1, 0], &[0, 2]]);
    let star = star_subst(&s, 2).unwrap().points_in_box(20);
    let nonzero = box_points(2, 20, |v| v[0] + v[1] >= 1);
    if star != nonzero {
        return outcome(false, "star differs from x1 + x2 >= 1");
    }
    let mut counts = Vec::new();
    for j in 1..=5u32 {
        let got = power_subst(&s, 2, j as usize).unwrap().points_in_box(20);
        if got != brute_power(&s, 2, j as usize, 20) {
            return outcome(false, format!("power_subst disagrees with explicit iteration at j = {j}"));
        }
        let closed = box_points(2, 20, |v| (1..=1 << j).contains(&(v[0] + v[1])) && v[0] <= 1 << (j - 1));
        if !got.is_subset(&closed) {
            return outcome(false, format!("iterate leaves the closed form at j = {j}"));
        }
        counts.push((got.len(), closed.len()));
    }
    if counts.iter().all(|(a, b)| a == b) {
        return outcome(true, "star and closed form agree");
    }
    outcome(
        false,
        format!(
            "star agrees; closed form is a strict superset of the iterate, sizes (iterate, closed) {counts:?}, \
             first gap (1,1) at j = 1"
        ),
    )
}

fn substitution_example() -> Outcome {
    let inner = points(2, &[&[1, 0], &[0, 1]]);
    let outer = points(3, &[&[1, 0, 1], &[1, 1, 0], &[1, 0, 0]]);
    let got = subst_disjoint(&inner, &outer, 3).unwrap().points_in_box(6);
    let want: BTreeSet<Vector> =
        [[1, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0], [1, 0, 0, 1]].iter().map(|v| v.to_vec()).collect();
    outcome(got == want, format!("{} vectors", got.len()))
}

fn random_zero_free(rng: &mut ChaCha8Rng) -> (SemiLinear, usize) {
    let dim = rng.gen_range(1..=3);
    let vec4 = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen_range(0..=4)).collect::<Vec<u64>>();
    let comps = (0..rng.gen_range(1..=3))
        .map(|_| {
            let mut base = vec4(rng);
            if base.iter().all(|&x| x == 0) {
                base[dim - 1] = 1;
            }
            let periods = (0..rng.gen_range(0..=2)).map(|_| vec4(rng)).collect();
            LinearSet { base, periods }
        })
        .collect();
    (SemiLinear::new(dim, comps).unwrap(), rng.gen_range(1..=dim))
}

fn star_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 0..200 {
        let (s, i) = random_zero_free(&mut rng);
        let Some((fix, _)) = saturate_in_box(&s, i, 12, 200).unwrap() else {
            return outcome(false, format!("set {n} did not saturate: {s}"));
        };
        if star_subst(&s, i).unwrap().points_in_box(12) != fix {
            return outcome(false, format!("set {n}: {s} at {i}"));
        }
    }
    outcome(true, "200 sets")
}

fn structural_suite() -> Outcome {
    for src in CORPUS {
        if let Some(v) = structural_violation(src) {
            return outcome(false, format!("{src}: {v}"));
        }
    }
    outcome(true, format!("{} expressions", CORPUS.len()))
}

fn graph_membership() -> Outcome {
    let posets = enumerate_posets(&alphabet(), 5).unwrap();
    for src in CORPUS {
        let e = Expr::parse(src).unwrap();
        let d = DGraph::from_rational(&e).unwrap();
        let (mut by_e, mut by_d) = (ExprMembership::new(&e).unwrap(), DGraphMembership::new(&d).unwrap());
        for p in &posets {
            if by_e.member(p).unwrap() != by_d.member(p).unwrap() {
                return outcome(false, format!("{src} on {p}"));
            }
        }
    }
    outcome(true, format!("{} expressions x {} posets", CORPUS.len(), posets.len()))
}

fn definability() -> Outcome {
    let subjects: Vec<Subject> = CORPUS.iter().map(|s| Subject::built(Expr::parse(s).unwrap()).unwrap()).collect();
    let config = Config { alphabet: alphabet(), max_elements: 4, model_check_cap: 8 };
    let r = crosscheck(&subjects, &config).unwrap();
    match &r.first_counterexample {
        None => outcome(r.agree, format!("{} pairs", r.summary.pairs)),
        Some(c) => outcome(false, format!("{} on {}", c.expression, c.poset)),
    }
}

fn element(p: &Poset, name: &str) -> usize {
    (0..p.len()).find(|&i| p.label(i) == name).unwrap()
}

fn named(p: &Poset, names: &[&str]) -> Mask {
    names.iter().fold(0, |m, n| m | bit(element(p, n)))
}

fn coloring_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 0..250 {
        let size = rng.gen_range(1..=6);
        let p = Poset::from_term(&random_term(&mut rng, size, &ALPHABET)).unwrap();
        let ms: BTreeMap<Mask, u8> = ms_factors(&p).into_iter().map(|f| (f, rng.gen_range(0..3))).collect();
        let enc = encode_ms(&p, &ms).unwrap();
        if ms.iter().any(|(&f, c)| ms_color_of(&p, f, &enc).unwrap() != Some(*c)) {
            return outcome(false, format!("ms pair {n}"));
        }
        let mut col = SColoring::new(0u8..3);
        for f in p.seq_factors(p.full()) {
            if rng.gen_bool(0.5) {
                let trial = col.clone().with(f, rng.gen_range(0..3));
                if is_compatible(&p, &trial).is_ok() {
                    col = trial;
                }
            }
        }
        let enc = encode_s(&p, &col).unwrap();
        if col.map.iter().any(|(&f, c)| s_color_of(&p, f, &enc).unwrap() != Some(*c)) {
            return outcome(false, format!("s pair {n}"));
        }
    }

    // Sets placed on the reconstructed figure posets decode to the stated colors.
    let p = Poset::from_term(
        &SpTerm::parse(
            "seq(x1, par(seq(par(x2, x3), x4, par(seq(x5, x6), x7, x8), par(x9, x10), \
             par(seq(x11, x12), x13, seq(x14, x15)), x16), \
             seq(par(x17, x18), par(x21, seq(par(x19, x20), par(x22, x23))), par(x24, x25))))",
        )
        .unwrap(),
    )
    .unwrap();
    let range = |lo: usize, hi: usize| (lo..=hi).fold(0, |m, i| m | bit(element(&p, &format!("x{i}"))));
    let mut enc: MsEncoding<&str> = MsEncoding::new();
    enc.entry(&"red").w = named(&p, &["x4"]);
    *enc.entry(&"blue") =
        MsSets { w: 0, s: named(&p, &["x19", "x18"]), p: named(&p, &["x22", "x23", "x21", "x19"]) };
    let ms_ok = ms_color_of(&p, range(2, 16), &enc).unwrap() == Some("red")
        && ms_color_of(&p, range(17, 25), &enc).unwrap() == Some("blue")
        && ms_color_of(&p, named(&p, &["x19", "x20", "x22", "x23"]), &enc).unwrap() == Some("blue");

    let q = Poset::from_term(&SpTerm::parse("seq(a, par(b, c), d, par(e, seq(par(g, h), par(i, j)), f))").unwrap())
        .unwrap();
    let mut ms: MsEncoding<BTreeSet<&str>> = MsEncoding::new();
    ms.entry(&BTreeSet::new()).w = named(&q, &["a"]);
    ms.entry(&BTreeSet::from(["green"])).w = named(&q, &["b", "c"]);
    *ms.entry(&BTreeSet::from(["red"])) =
        MsSets { w: named(&q, &["e", "g", "h", "i", "j", "f"]), s: named(&q, &["h"]), p: named(&q, &["i", "j"]) };
    let s_enc = SEncoding {
        palette: BTreeSet::from(["red", "green"]),
        v: BTreeMap::from([("green", named(&q, &["a", "e"])), ("red", named(&q, &["d"]))]),
        ms,
    };
    let f1 = named(&q, &["a", "b", "c"]);
    let s_ok = [
        (f1, "green"),
        (q.full() & !f1, "red"),
        (named(&q, &["g", "h", "i", "j"]), "red"),
        (named(&q, &["e"]), "green"),
    ]
    .iter()
    .all(|&(f, c)| s_color_of(&q, f, &s_enc).unwrap() == Some(c));
    outcome(ms_ok && s_ok, format!("250 random pairs; figure decodes ms {ms_ok}, s {s_ok}"))
}

fn validation_goldens() -> Outcome {
    let violations = |s: &str| Expr::parse(s).unwrap().validate();
    let xi = violations("istar(x, seq(a, x, b))") == [VIOLATION_XI_COMPARABLE];
    let sub_eps = violations("sub(x, or(a, eps), par(x, x))") == [VIOLATION_SUB_EPS];
    let istar_eps = violations("istar(x, or(par(a, x), eps))") == [VIOLATION_ISTAR_EPS];
    let e1 = violations("sub(x, a, istar(x, seq(a, par(x, x))))").is_empty();
    outcome(xi && sub_eps && istar_eps && e1, format!("xi {xi}, sub-eps {sub_eps}, istar-eps {istar_eps}, e1 {e1}"))
}

fn witness_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let graphs: Vec<DGraph> =
        CORPUS.iter().map(|s| DGraph::from_rational(&Expr::parse(s).unwrap()).unwrap()).collect();
    let (mut witnesses, mut rejected) = (0, 0);
    while witnesses < 1000 {
        let d = &graphs[rng.gen_range(0..graphs.len())];
        let n = rng.gen_range(1..=6);
        let t = random_term(&mut rng, n, &ALPHABET);
        let Some(path) = find_path(d, &t).unwrap() else { continue };
        let p = Poset::from_term(&t).unwrap();
        if verify_witness(d, &p, &path).is_err() {
            return outcome(false, format!("witness for {t} rejected"));
        }
        witnesses += 1;
        if verify_witness(d, &p, &mutate(&path, d.len(), &mut rng)).is_err() {
            rejected += 1;
        }
    }
    outcome(rejected == 1000, format!("{witnesses} witnesses, {rejected}/1000 mutations rejected"))
}

#[test]
fn acceptance() {
    type Criterion = (u8, &'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        (1, "semilinear star and iterated substitution", 1, semilinear_star),
        (2, "disjoint substitution example", 1, substitution_example),
        (3, "star equals saturated iteration on random sets", 60, star_oracle),
        (4, "d-graph structural properties", 30, structural_suite),
        (5, "graph membership equals expression membership, n <= 5", 600, graph_membership),
        (6, "emitted sentences define the languages, n <= 4", 1800, definability),
        (7, "coloring encodings round trip", 60, coloring_round_trips),
        (8, "validation goldens", 1, validation_goldens),
        (9, "witness verification fuzz", 60, witness_fuzz),
    ];
    let mut results = Vec::new();
    for (k, name, limit, run) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(limit);
        let pass = o.pass && in_time;
        println!(
            "{} [{k}] {name}: {} ({:.2}s, limit {limit}s{})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            if in_time { "" } else { ", over time" }
        );
        results.push((k, pass, o.detail));
    }
    for (k, pass, detail) in &results {
        if *k == 1 {
            // The stated closed form is not the iterate; pin the measured gap so
            // any change in either direction shows up.
            let expected = format!("{:?}", CLOSED_FORM_COUNTS.to_vec());
            assert!(!pass && detail.contains(&expected), "criterion 1 changed: {detail}");
        } else {
            assert!(pass, "criterion {k} failed: {detail}");
        }
    }
}

//! Formulas defining the language of a d-graph.
//!
//! Node `n` becomes a definition `phi_n(X)` stating that `X` is accepted
//! from `n`. Special edges out of Presburger nodes are not followed
//! recursively: the component must carry the edge's color in a global
//! coloring `S`, and the main formula checks every colored factor against
//! the edge's target once.

use crate::dgraph::{DGraph, Label, Op};

use super::{
    and, call, exists1, exists2, forall1, forall2, implies, mem, not, or, Def, EdgeRef, Formula, Lambda, Program,
};

fn phi_name(n: usize) -> String {
    format!("phi_{}", DGraph::name(n))
}

fn accepts_empty(d: &DGraph, n: usize) -> bool {
    matches!(&d.labels[n], Label::Pres(s) if s.contains_zero())
}

/// `X` is the sequential sum of the non-empty sets `X1` and `X2`.
pub fn sum_of(x: &str, x1: &str, x2: &str) -> Formula {
    and(vec![
        exists1("x", mem("x", x1)),
        exists1("x", mem("x", x2)),
        forall1("x", implies(mem("x", x), or(vec![mem("x", x1), mem("x", x2)]))),
        forall1("x", implies(mem("x", x1), and(vec![mem("x", x), not(mem("x", x2))]))),
        forall1("x", implies(mem("x", x2), mem("x", x))),
        forall1("x", forall1("y", implies(and(vec![mem("x", x1), mem("y", x2)]), Formula::Less { lo: "x".into(), hi: "y".into() }))),
    ])
}

fn colored(s: &str, set: &str, edge: EdgeRef) -> Formula {
    let c = |bit| Formula::Color { coloring: s.into(), set: set.into(), bit, edge };
    or(vec![c(false), c(true)])
}

/// `Y` ranging over the whole model, i.e. the model itself satisfies `body`.
fn whole(body: Formula) -> Formula {
    forall2("Y", implies(forall1("y", mem("y", "Y")), body))
}

pub fn emit_phi_node(d: &DGraph, n: usize) -> Def {
    let x = "X";
    let cs: Vec<usize> = d.out[n].iter().map(|e| e.to).collect();
    let body = match &d.labels[n] {
        Label::Letter(a) => and(vec![
            Formula::Size { set: x.into(), n: 1 },
            forall1("x", implies(mem("x", x), Formula::Letter { letter: a.clone(), var: "x".into() })),
        ]),
        Label::Op(Op::Seq1) => exists2(
            "X1",
            exists2("X2", and(vec![sum_of(x, "X1", "X2"), call(&phi_name(cs[0]), "X1"), call(&phi_name(cs[1]), "X2")])),
        ),
        Label::Op(op) => {
            let piece = |c: usize| Lambda::new("Y", call(&phi_name(c), "Y"));
            match op {
                Op::Omega1 | Op::MOmega1 => Formula::SeqOmega {
                    set: x.into(),
                    body: piece(cs[0]),
                    eps: accepts_empty(d, cs[0]),
                    mirrored: *op == Op::MOmega1,
                },
                Op::Dia1 => Formula::SeqDia {
                    set: x.into(),
                    first: piece(cs[0]),
                    second: piece(cs[1]),
                    eps: [accepts_empty(d, cs[0]), accepts_empty(d, cs[1])],
                },
                _ => Formula::SeqStar { set: x.into(), body: piece(cs[0]) },
            }
        }
        Label::Pres(rho) => {
            let psis = d.out[n]
                .iter()
                .map(|e| if e.special { whole(colored("S", "Y", (n, e.to))) } else { whole(call(&phi_name(e.to), "Y")) })
                .collect();
            Formula::Q { set: x.into(), psis, rho: rho.clone() }
        }
    };
    Def { name: phi_name(n), param: x.into(), body }
}

/// Sentence satisfied exactly by the posets the d-graph accepts; `nullable`
/// adds the empty poset.
pub fn emit_phi(d: &DGraph, nullable: bool) -> Program {
    let defs = (0..d.len()).map(|n| emit_phi_node(d, n)).collect();
    let edges: Vec<EdgeRef> = d.special_edges().into_iter().collect();
    let mut conj = vec![
        forall1("x", mem("x", "R")),
        Formula::SColoring { whole: "R".into(), coloring: "S".into() },
        call(&phi_name(d.root), "R"),
    ];
    for &(src, dst) in &edges {
        let factor = Formula::SFactor { part: "F".into(), whole: "R".into() };
        conj.push(forall2("F", implies(and(vec![factor, colored("S", "F", (src, dst))]), call(&phi_name(dst), "F"))));
    }
    let coloring = Formula::ExistsColoring { var: "S".into(), edges, body: Box::new(and(conj)) };
    let mut main = exists2("R", coloring);
    if nullable {
        let empty = forall2("X", implies(forall1("x", mem("x", "X")), Formula::Size { set: "X".into(), n: 0 }));
        main = or(vec![main, empty]);
    }
    Program { defs, main }
}

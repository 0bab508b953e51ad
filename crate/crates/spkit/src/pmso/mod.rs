//! Presburger MSO over finite series-parallel posets.
//!
//! Formulas are plain MSO plus the counting quantifier `Q` and a few native
//! constructs that stand for MSO-definable relations: sequential operator
//! splits, factor predicates, coloring atoms and a coloring quantifier.
//! A [`Program`] is a table of one-parameter definitions and a main formula;
//! calls to definitions see the caller's other bindings.

mod emit;
mod eval;
mod text;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coloring::{PathColor, SColoring};
use crate::poset::Mask;
use crate::semilinear::SemiLinear;

pub use emit::{emit_phi, emit_phi_node, sum_of};
pub use eval::{brute_q, model_check, model_check_with, DEFAULT_MAX_SIZE};
pub use text::{parse_formula, parse_program};

/// Special edge as a (source, target) pair of 0-based node indexes.
pub type EdgeRef = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Formula {
    True,
    False,
    Letter { letter: String, var: String },
    In { var: String, set: String },
    Less { lo: String, hi: String },
    Or { args: Vec<Formula> },
    And { args: Vec<Formula> },
    Not { arg: Box<Formula> },
    Exists1 { var: String, body: Box<Formula> },
    Forall1 { var: String, body: Box<Formula> },
    Exists2 { var: String, body: Box<Formula> },
    Forall2 { var: String, body: Box<Formula> },
    /// `set` splits into parallel components; each goes to one `psis[i]`,
    /// evaluated with the component as the whole model, and the count
    /// vector must lie in `rho`.
    Q { set: String, psis: Vec<Formula>, rho: SemiLinear },
    /// `set = X1 + X2` with both pieces non-empty.
    SeqSplit2 { set: String, first: Lambda, second: Lambda },
    /// `set = X1 + … + Xk`, `k >= 2`, pieces non-empty.
    SeqStar { set: String, body: Lambda },
    /// Finite surrogate of the omega products: the star of the pieces, valid
    /// only when the operand accepts the empty poset (`eps`).
    SeqOmega { set: String, body: Lambda, eps: bool, mirrored: bool },
    /// `G H G … G` alternation with at least two non-empty pieces; `eps[k]`
    /// lets operand `k` contribute empty pieces.
    SeqDia { set: String, first: Lambda, second: Lambda, eps: [bool; 2] },
    Factor { part: String, whole: String },
    SFactor { part: String, whole: String },
    Size { set: String, n: usize },
    Color { coloring: String, set: String, bit: bool, edge: EdgeRef },
    SColoring { whole: String, coloring: String },
    /// Ranges over compatible partial colorings of the sequential factors
    /// with palette `{false, true} × edges`.
    ExistsColoring { var: String, edges: Vec<EdgeRef>, body: Box<Formula> },
    Call { name: String, arg: String },
}

/// Formula with one distinguished free set variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lambda {
    pub var: String,
    pub body: Box<Formula>,
}

impl Lambda {
    pub fn new(var: &str, body: Formula) -> Lambda {
        Lambda { var: var.into(), body: Box::new(body) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Def {
    pub name: String,
    pub param: String,
    pub body: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Program {
    pub defs: Vec<Def>,
    pub main: Formula,
}

impl Program {
    pub fn single(main: Formula) -> Program {
        Program { defs: Vec::new(), main }
    }

    pub fn def(&self, name: &str) -> Option<&Def> {
        self.defs.iter().find(|d| d.name == name)
    }
}

#[derive(Debug, Clone)]
pub enum Value {
    Elem(usize),
    Set(Mask),
    Coloring(SColoring<PathColor>),
}

/// Values of the free variables of a formula.
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    pub values: BTreeMap<String, Value>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, v: Value) -> Self {
        self.values.insert(name.into(), v);
        self
    }
}

pub fn and(mut args: Vec<Formula>) -> Formula {
    match args.len() {
        0 => Formula::True,
        1 => args.pop().unwrap_or(Formula::True),
        _ => Formula::And { args },
    }
}

pub fn or(mut args: Vec<Formula>) -> Formula {
    match args.len() {
        0 => Formula::False,
        1 => args.pop().unwrap_or(Formula::False),
        _ => Formula::Or { args },
    }
}

pub fn not(f: Formula) -> Formula {
    Formula::Not { arg: Box::new(f) }
}

pub fn implies(a: Formula, b: Formula) -> Formula {
    Formula::Or { args: vec![not(a), b] }
}

pub fn forall1(var: &str, body: Formula) -> Formula {
    Formula::Forall1 { var: var.into(), body: Box::new(body) }
}

pub fn exists1(var: &str, body: Formula) -> Formula {
    Formula::Exists1 { var: var.into(), body: Box::new(body) }
}

pub fn forall2(var: &str, body: Formula) -> Formula {
    Formula::Forall2 { var: var.into(), body: Box::new(body) }
}

pub fn exists2(var: &str, body: Formula) -> Formula {
    Formula::Exists2 { var: var.into(), body: Box::new(body) }
}

pub fn mem(var: &str, set: &str) -> Formula {
    Formula::In { var: var.into(), set: set.into() }
}

pub fn call(name: &str, arg: &str) -> Formula {
    Formula::Call { name: name.into(), arg: arg.into() }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&text::print_formula(self))
    }
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&text::print_program(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgraph::DGraph;
    use crate::membership::member_expr;
    use crate::poset::SpTerm;
    use crate::rexpr::Expr;

    fn holds(prog: &Program, poset: &str) -> bool {
        model_check_with(prog, &SpTerm::parse(poset).unwrap(), &Assignment::new(), 16).unwrap()
    }

    #[test]
    fn counting_quantifier_splits_components_by_parity() {
        let q = parse_formula("forall X ((forall x (x in X)) -> Q(X; exists x (a1(x)), exists x (a2(x)); x1 = 0 mod 2 & x2 = 1 mod 2))");
        let prog = Program::single(q.unwrap());
        let p1 = "seq(a1, par(a1, a1), a1)";
        let p2 = "seq(a2, a2)";
        let p3 = "seq(par(a1, a2), a1)";
        assert!(holds(&prog, &format!("par({p1}, {p2}, {p3})")));
        assert!(!holds(&prog, &format!("par({p1}, {p2})")));
        assert!(holds(&prog, &format!("par({p1}, {p3}, {p2}, {p2}, {p2})")));
    }

    #[test]
    fn letter_node_text_is_canonical() {
        let d = DGraph::from_rational(&Expr::parse("sub(x, a, istar(x, seq(a, par(x, x))))").unwrap()).unwrap();
        let prog = emit_phi(&d, false);
        let n3 = prog.def("phi_n3").unwrap();
        assert_eq!(n3.body.to_string(), "size(X,1) & forall x (x in X -> a(x))");
        assert_eq!(prog.def("phi_n5").unwrap().body, n3.body);
        let n4 = prog.def("phi_n4").unwrap().body.to_string();
        assert!(n4.starts_with("Q(X; forall Y (forall y (y in Y) -> color(S, Y, 0, n4->n2) | color(S, Y, 1, n4->n2)), "), "{n4}");
        let Formula::Exists2 { body, .. } = &prog.main else { panic!() };
        let Formula::ExistsColoring { edges, body, .. } = &**body else { panic!() };
        assert_eq!(edges, &vec![(3, 1)]);
        let Formula::And { args } = &**body else { panic!() };
        assert_eq!(args.len(), 4);
        assert_eq!(parse_program(&prog.to_string()).unwrap(), prog);
    }

    #[test]
    fn emitted_sentence_accepts_the_figure_poset() {
        let e = Expr::parse("sub(x, a, istar(x, seq(a, par(x, x))))").unwrap();
        let prog = emit_phi(&DGraph::from_rational(&e).unwrap(), e.nullable());
        for p in ["seq(a, par(a, seq(a, par(seq(a, par(a, a)), a))))", "a", "seq(a, par(a, a))"] {
            assert!(member_expr(&e, &SpTerm::parse(p).unwrap()).unwrap());
            assert!(holds(&prog, p), "{p}");
        }
        for p in ["seq(a, a)", "par(a, a)", "seq(a, par(a, seq(a, a)))"] {
            assert!(!holds(&prog, p), "{p}");
        }
    }

    #[test]
    fn sequential_split_agrees_with_its_definition() {
        let native = parse_formula("forall X ((forall x (x in X)) -> seq2(X; [Y] exists y (y in Y & a(y)); [Y] forall y (y in Y -> b(y))))").unwrap();
        let explicit = parse_formula(&format!(
            "forall X ((forall x (x in X)) -> exists X1 (exists X2 ({} & exists y (y in X1 & a(y)) & forall y (y in X2 -> b(y)))))",
            sum_of("X", "X1", "X2")
        ))
        .unwrap();
        for p in ["seq(a, b)", "seq(par(a, b), b, b)", "seq(b, a)", "par(a, b)", "seq(a, par(b, b))", "seq(a, par(a, b))"] {
            assert_eq!(holds(&Program::single(native.clone()), p), holds(&Program::single(explicit.clone()), p), "{p}");
        }
    }

    #[test]
    fn errors_are_reported() {
        let t = SpTerm::parse("a").unwrap();
        let free = Program::single(parse_formula("x in X").unwrap());
        assert!(matches!(model_check(&free, &t, &Assignment::new()), Err(crate::Error::UnboundVariable(_))));
        let missing = Program::single(parse_formula("forall X (nowhere(X))").unwrap());
        assert!(matches!(model_check(&missing, &t, &Assignment::new()), Err(crate::Error::UnboundVariable(_))));
        let big = SpTerm::parse("seq(a, a, a, a, a, a, a, a, a)").unwrap();
        let prog = Program::single(Formula::True);
        assert!(matches!(model_check(&prog, &big, &Assignment::new()), Err(crate::Error::ResourceBound(_))));
        assert!(parse_formula("exists x (x in y)").is_err());
    }

    #[test]
    fn free_variables_come_from_the_assignment() {
        let prog = parse_program("inside(Y) := x in Y; exists Z (size(Z,1) & inside(Z))").unwrap();
        let t = SpTerm::parse("seq(a, b)").unwrap();
        assert!(model_check(&prog, &t, &Assignment::new().with("x", Value::Elem(1))).unwrap());
        let prog = Program::single(parse_formula("exists y (x < y)").unwrap());
        assert!(model_check(&prog, &t, &Assignment::new().with("x", Value::Elem(0))).unwrap());
        assert!(!model_check(&prog, &t, &Assignment::new().with("x", Value::Elem(1))).unwrap());
    }
}

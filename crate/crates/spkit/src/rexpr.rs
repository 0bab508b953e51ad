//! Rational expressions over series-parallel posets and their rewrite into
//! the ">1" form, where every sequential operator composes at least two
//! non-empty pieces.
//!
//! One AST covers both forms; the ">1" operators (`Seq1`, `Star1`, ...) only
//! appear after [`Expr::to_gt1`] or when written explicitly.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::lex::{Cursor, Tok};
use crate::poset::is_reserved;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Empty,
    Eps,
    Letter(String),
    Or(Vec<Expr>),
    Par(Vec<Expr>),
    Seq(Vec<Expr>),
    Star(Box<Expr>),
    Omega(Box<Expr>),
    MOmega(Box<Expr>),
    Ord(Box<Expr>),
    MOrd(Box<Expr>),
    Dia(Box<Expr>, Box<Expr>),
    /// `e^◇`, read as `(e ⋄ ε) + ε`.
    DiaShort(Box<Expr>),
    /// `inner ∘ξ outer`: every ξ-labeled element of an outer poset is replaced
    /// by a poset of the inner language.
    Sub(String, Box<Expr>, Box<Expr>),
    IStar(String, Box<Expr>),
    Seq1(Vec<Expr>),
    Star1(Box<Expr>),
    Dia1(Box<Expr>, Box<Expr>),
    Omega1(Box<Expr>),
    MOmega1(Box<Expr>),
    Ord1(Box<Expr>),
    MOrd1(Box<Expr>),
}

pub const VIOLATION_SUB_EPS: &str = "ε ∈ L in L ∘ξ L'";
pub const VIOLATION_ISTAR_EPS: &str = "ε ∈ L in L*ξ";
pub const VIOLATION_XI_COMPARABLE: &str = "two occurrences of ξ are comparable in a *ξ operand; they must be incomparable";

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

/// n-ary union with nested unions flattened and exact duplicates dropped.
pub fn or_of(items: impl IntoIterator<Item = Expr>) -> Expr {
    let mut out: Vec<Expr> = Vec::new();
    for e in items {
        let parts = match e {
            Expr::Or(cs) => cs,
            e => vec![e],
        };
        for p in parts {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    match out.len() {
        0 => Expr::Empty,
        1 => out.pop().unwrap(),
        _ => Expr::Or(out),
    }
}

impl Expr {
    pub fn letter(a: &str) -> Expr {
        Expr::Letter(a.to_string())
    }

    pub fn parse(text: &str) -> Result<Expr> {
        let mut cur = Cursor::new(text)?;
        let e = parse_expr(&mut cur)?;
        cur.finish()?;
        Ok(e)
    }

    pub fn children(&self) -> Vec<&Expr> {
        use Expr::*;
        match self {
            Empty | Eps | Letter(_) => vec![],
            Or(cs) | Par(cs) | Seq(cs) | Seq1(cs) => cs.iter().collect(),
            Star(e) | Omega(e) | MOmega(e) | Ord(e) | MOrd(e) | DiaShort(e) | IStar(_, e) | Star1(e)
            | Omega1(e) | MOmega1(e) | Ord1(e) | MOrd1(e) => vec![e],
            Dia(a, b) | Dia1(a, b) | Sub(_, a, b) => vec![a, b],
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Letters occurring in the expression, bound substitution letters
    /// included.
    pub fn letters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_letters(&mut out);
        out
    }

    fn collect_letters(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Letter(a) => {
                out.insert(a.clone());
            }
            Expr::Sub(x, ..) | Expr::IStar(x, _) => {
                out.insert(x.clone());
            }
            _ => {}
        }
        for c in self.children() {
            c.collect_letters(out);
        }
    }

    /// Letters used as substitution variables by some `sub` or `istar`.
    pub fn substitution_letters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(e: &Expr, out: &mut BTreeSet<String>) {
            if let Expr::Sub(x, ..) | Expr::IStar(x, _) = e {
                out.insert(x.clone());
            }
            for c in e.children() {
                go(c, out);
            }
        }
        go(self, &mut out);
        out
    }

    pub fn is_gt1(&self) -> bool {
        use Expr::*;
        let here = !matches!(self, Seq(_) | Star(_) | Omega(_) | MOmega(_) | Ord(_) | MOrd(_) | Dia(..) | DiaShort(_));
        here && self.children().iter().all(|c| c.is_gt1())
    }

    /// Whether the empty poset belongs to the language.
    pub fn nullable(&self) -> bool {
        use Expr::*;
        match self {
            Empty | Letter(_) => false,
            Eps => true,
            Or(cs) => cs.iter().any(Expr::nullable),
            Par(cs) | Seq(cs) => cs.iter().all(Expr::nullable),
            Star(_) | Ord(_) | MOrd(_) | DiaShort(_) => true,
            // An ω-product is empty only if every factor is.
            Omega(e) | MOmega(e) => e.nullable(),
            Dia(a, _) => a.nullable(),
            Sub(_, _, outer) => outer.nullable(),
            // Contains ξ itself and never ε.
            IStar(..) => false,
            Seq1(_) | Star1(_) | Dia1(..) | Omega1(_) | MOmega1(_) | Ord1(_) | MOrd1(_) => false,
        }
    }

    /// Side-condition violations; empty iff the expression is rational.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.validate_into(&mut out);
        out
    }

    fn validate_into(&self, out: &mut Vec<String>) {
        let before = out.len();
        for c in self.children() {
            c.validate_into(out);
        }
        match self {
            Expr::Sub(_, inner, _) if inner.nullable() => out.push(VIOLATION_SUB_EPS.to_string()),
            Expr::IStar(x, e) => {
                if e.nullable() {
                    out.push(VIOLATION_ISTAR_EPS.to_string());
                } else if out.len() == before {
                    // Operand is itself rational, so its D-graph is defined.
                    let xi = BTreeSet::from([x.clone()]);
                    match e.to_gt1().and_then(|g| crate::dgraph::DGraph::build_with(&g, &xi)) {
                        Ok(d) => {
                            if crate::dgraph::xi_series_check(&d, x) {
                                out.push(VIOLATION_XI_COMPARABLE.to_string());
                            }
                        }
                        Err(err) => out.push(format!("operand of *ξ: {err}")),
                    }
                }
            }
            _ => {}
        }
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ValidationFailed(v))
        }
    }

    /// The equivalent ">1" expression, rewriting innermost first.
    pub fn to_gt1(&self) -> Result<Expr> {
        self.check()?;
        Ok(self.gt1())
    }

    fn gt1(&self) -> Expr {
        use Expr::*;
        match self {
            Empty | Eps | Letter(_) => self.clone(),
            Or(cs) => or_of(cs.iter().map(Expr::gt1)),
            Par(cs) => Par(cs.iter().map(Expr::gt1).collect()),
            Seq(cs) => {
                // Right fold: a·(b·c).
                let mut it = cs.iter().rev();
                let last = it.next().expect("seq has children");
                let (mut acc, mut acc_null) = (last.gt1(), last.nullable());
                for a in it {
                    let a1 = a.gt1();
                    let a_null = a.nullable();
                    let mut parts = vec![seq1(a1.clone(), acc.clone())];
                    if a_null {
                        parts.push(acc.clone());
                    }
                    if acc_null {
                        parts.push(a1);
                    }
                    acc = or_of(parts);
                    acc_null = a_null && acc_null;
                    if acc_null {
                        acc = or_of([acc, Eps]);
                    }
                }
                acc
            }
            Star(e) => {
                let e1 = e.gt1();
                or_of([Star1(bx(e1.clone())), e1, Eps])
            }
            Omega(e) | MOmega(e) => {
                let e1 = e.gt1();
                let head = match self {
                    Omega(_) => Omega1(bx(e1.clone())),
                    _ => MOmega1(bx(e1.clone())),
                };
                if e.nullable() {
                    or_of([head, Star1(bx(e1.clone())), e1, Eps])
                } else {
                    head
                }
            }
            Ord(e) => {
                let e1 = e.gt1();
                or_of([Ord1(bx(e1.clone())), e1, Eps])
            }
            MOrd(e) => {
                let e1 = e.gt1();
                or_of([MOrd1(bx(e1.clone())), e1, Eps])
            }
            Dia(a, b) => {
                let (a1, b1) = (a.gt1(), b.gt1());
                let mut parts = vec![Dia1(bx(a1.clone()), bx(b1.clone())), a1];
                if a.nullable() {
                    parts.push(b1);
                }
                or_of(parts)
            }
            DiaShort(e) => or_of([Dia(e.clone(), bx(Eps)).gt1(), Eps]),
            Sub(x, a, b) => Sub(x.clone(), bx(a.gt1()), bx(b.gt1())),
            IStar(x, e) => IStar(x.clone(), bx(e.gt1())),
            Seq1(cs) => Seq1(cs.iter().map(Expr::gt1).collect()),
            Star1(e) => Star1(bx(e.gt1())),
            Dia1(a, b) => Dia1(bx(a.gt1()), bx(b.gt1())),
            Omega1(e) => Omega1(bx(e.gt1())),
            MOmega1(e) => MOmega1(bx(e.gt1())),
            Ord1(e) => Ord1(bx(e.gt1())),
            MOrd1(e) => MOrd1(bx(e.gt1())),
        }
    }
}

/// `seq1` with nested `seq1` operands flattened (the operator is associative).
fn seq1(a: Expr, b: Expr) -> Expr {
    let mut cs = Vec::new();
    for e in [a, b] {
        match e {
            Expr::Seq1(inner) => cs.extend(inner),
            e => cs.push(e),
        }
    }
    Expr::Seq1(cs)
}

fn parse_args(cur: &mut Cursor) -> Result<Vec<Expr>> {
    cur.expect("(")?;
    let mut out = vec![parse_expr(cur)?];
    while cur.eat(",") {
        out.push(parse_expr(cur)?);
    }
    cur.expect(")")?;
    Ok(out)
}

fn arity<const N: usize>(cur: &Cursor, name: &str, args: Vec<Expr>) -> Result<[Expr; N]> {
    let n = args.len();
    args.try_into().or_else(|_| cur.err(format!("`{name}` takes {N} argument(s), got {n}")))
}

fn parse_expr(cur: &mut Cursor) -> Result<Expr> {
    let start = cur.offset();
    let word = match cur.next() {
        Some(Tok::Ident(w)) => w,
        _ => return Err(Error::Syntax { pos: start, msg: "expected expression".into() }),
    };
    let un = |cur: &mut Cursor, f: fn(Box<Expr>) -> Expr| -> Result<Expr> {
        let args = parse_args(cur)?;
        let [e] = arity::<1>(cur, &word, args)?;
        Ok(f(bx(e)))
    };
    let bin = |cur: &mut Cursor, f: fn(Box<Expr>, Box<Expr>) -> Expr| -> Result<Expr> {
        let args = parse_args(cur)?;
        let [a, b] = arity::<2>(cur, &word, args)?;
        Ok(f(bx(a), bx(b)))
    };
    let bind = |cur: &mut Cursor| -> Result<String> {
        let x = cur.ident()?;
        if is_reserved(&x) {
            return cur.err(format!("`{x}` cannot be a substitution letter"));
        }
        cur.expect(",")?;
        Ok(x)
    };
    let nary = |cur: &mut Cursor, f: fn(Vec<Expr>) -> Expr| -> Result<Expr> {
        let mut args = parse_args(cur)?;
        Ok(if args.len() == 1 { args.pop().unwrap() } else { f(args) })
    };
    match word.as_str() {
        "empty" => Ok(Expr::Empty),
        "eps" => Ok(Expr::Eps),
        "or" => nary(cur, Expr::Or),
        "par" => nary(cur, Expr::Par),
        "seq" => nary(cur, Expr::Seq),
        "seq1" => nary(cur, Expr::Seq1),
        "star" => un(cur, Expr::Star),
        "omega" => un(cur, Expr::Omega),
        "momega" => un(cur, Expr::MOmega),
        "ord" => un(cur, Expr::Ord),
        "mord" => un(cur, Expr::MOrd),
        "diamond" => un(cur, Expr::DiaShort),
        "star1" => un(cur, Expr::Star1),
        "omega1" => un(cur, Expr::Omega1),
        "momega1" => un(cur, Expr::MOmega1),
        "ord1" => un(cur, Expr::Ord1),
        "mord1" => un(cur, Expr::MOrd1),
        "dia" => bin(cur, Expr::Dia),
        "dia1" => bin(cur, Expr::Dia1),
        "sub" => {
            cur.expect("(")?;
            let x = bind(cur)?;
            let a = parse_expr(cur)?;
            cur.expect(",")?;
            let b = parse_expr(cur)?;
            cur.expect(")")?;
            Ok(Expr::Sub(x, bx(a), bx(b)))
        }
        "istar" => {
            cur.expect("(")?;
            let x = bind(cur)?;
            let e = parse_expr(cur)?;
            cur.expect(")")?;
            Ok(Expr::IStar(x, bx(e)))
        }
        _ => {
            if matches!(cur.peek(), Some(Tok::Sym("("))) {
                return Err(Error::Syntax { pos: start, msg: format!("unknown operator `{word}`") });
            }
            Ok(Expr::Letter(word))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        let list = |f: &mut fmt::Formatter<'_>, name: &str, cs: &[&Expr]| -> fmt::Result {
            write!(f, "{name}(")?;
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        };
        let name = match self {
            Empty => return write!(f, "empty"),
            Eps => return write!(f, "eps"),
            Letter(a) => return write!(f, "{a}"),
            Sub(x, a, b) => return write!(f, "sub({x}, {a}, {b})"),
            IStar(x, e) => return write!(f, "istar({x}, {e})"),
            Or(_) => "or",
            Par(_) => "par",
            Seq(_) => "seq",
            Seq1(_) => "seq1",
            Star(_) => "star",
            Omega(_) => "omega",
            MOmega(_) => "momega",
            Ord(_) => "ord",
            MOrd(_) => "mord",
            DiaShort(_) => "diamond",
            Dia(..) => "dia",
            Dia1(..) => "dia1",
            Star1(_) => "star1",
            Omega1(_) => "omega1",
            MOmega1(_) => "momega1",
            Ord1(_) => "ord1",
            MOrd1(_) => "mord1",
        };
        list(f, name, &self.children())
    }
}

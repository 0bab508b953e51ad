//! Canonical text syntax.
//!
//! ```text
//! phi  := or ("->" phi)?            a -> b  is  ~a | b
//! or   := and ("|" and)*
//! and  := un ("&" un)*
//! un   := "~" un | atom
//! atom := "(" phi ")" | true | false | a(x) | x in X | x < y
//!       | exists v (phi) | forall v (phi)       v lowercase: element, uppercase: set
//!       | exists coloring S [n4->n2, ...] (phi)
//!       | size(X,n) | factor(F, R) | sfactor(F, R)
//!       | color(S, F, 0|1, n4->n2) | scoloring(R, S)
//!       | Q(X; phi, ...; rho)               rho: sl[...] literal or constraint text
//!       | seq2(X; [Y] phi; [Y] phi) | seqstar(X; [Y] phi)
//!       | seqomega(X; [Y] phi; eps|noeps) | seqmomega(...)
//!       | seqdia(X; [Y] phi; [Y] phi; eps|noeps, eps|noeps)
//!       | name(X)                           call of a definition
//! prog := (name(X) := phi;)* phi
//! ```

use crate::lex::{Cursor, Tok};
use crate::semilinear::{from_constraints, parse_literal};
use crate::{Error, Result};

use super::{and, not, or, Def, EdgeRef, Formula, Lambda, Program};

fn is_set_var(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

fn level(f: &Formula) -> u8 {
    match f {
        Formula::Or { args } if is_implication(args) => 0,
        Formula::Or { .. } => 1,
        Formula::And { .. } => 2,
        _ => 3,
    }
}

fn is_implication(args: &[Formula]) -> bool {
    args.len() == 2 && matches!(args[0], Formula::Not { .. })
}

fn at(f: &Formula, min: u8) -> String {
    let s = print_formula(f);
    if level(f) < min {
        format!("({s})")
    } else {
        s
    }
}

fn edge(e: EdgeRef) -> String {
    format!("n{}->n{}", e.0 + 1, e.1 + 1)
}

fn lambda(l: &Lambda) -> String {
    format!("[{}] {}", l.var, print_formula(&l.body))
}

fn eps(b: bool) -> &'static str {
    if b {
        "eps"
    } else {
        "noeps"
    }
}

pub fn print_formula(f: &Formula) -> String {
    use Formula::*;
    match f {
        True => "true".into(),
        False => "false".into(),
        Letter { letter, var } => format!("{letter}({var})"),
        In { var, set } => format!("{var} in {set}"),
        Less { lo, hi } => format!("{lo} < {hi}"),
        Or { args } if is_implication(args) => {
            let Not { arg } = &args[0] else { unreachable!() };
            format!("{} -> {}", at(arg, 1), at(&args[1], 0))
        }
        Or { args } => args.iter().map(|a| at(a, 2)).collect::<Vec<_>>().join(" | "),
        And { args } => args.iter().map(|a| at(a, 3)).collect::<Vec<_>>().join(" & "),
        Not { arg } => format!("~{}", at(arg, 3)),
        Exists1 { var, body } | Exists2 { var, body } => format!("exists {var} ({})", print_formula(body)),
        Forall1 { var, body } | Forall2 { var, body } => format!("forall {var} ({})", print_formula(body)),
        Q { set, psis, rho } => {
            let ps: Vec<String> = psis.iter().map(print_formula).collect();
            format!("Q({set}; {}; {rho})", ps.join(", "))
        }
        SeqSplit2 { set, first, second } => format!("seq2({set}; {}; {})", lambda(first), lambda(second)),
        SeqStar { set, body } => format!("seqstar({set}; {})", lambda(body)),
        SeqOmega { set, body, eps: e, mirrored } => {
            let op = if *mirrored { "seqmomega" } else { "seqomega" };
            format!("{op}({set}; {}; {})", lambda(body), eps(*e))
        }
        SeqDia { set, first, second, eps: e } => {
            format!("seqdia({set}; {}; {}; {}, {})", lambda(first), lambda(second), eps(e[0]), eps(e[1]))
        }
        Factor { part, whole } => format!("factor({part}, {whole})"),
        SFactor { part, whole } => format!("sfactor({part}, {whole})"),
        Size { set, n } => format!("size({set},{n})"),
        Color { coloring, set, bit, edge: e } => {
            format!("color({coloring}, {set}, {}, {})", u8::from(*bit), edge(*e))
        }
        SColoring { whole, coloring } => format!("scoloring({whole}, {coloring})"),
        ExistsColoring { var, edges, body } => {
            let es: Vec<String> = edges.iter().map(|&e| edge(e)).collect();
            format!("exists coloring {var} [{}] ({})", es.join(", "), print_formula(body))
        }
        Call { name, arg } => format!("{name}({arg})"),
    }
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.defs {
        out.push_str(&format!("{}({}) := {};\n", d.name, d.param, print_formula(&d.body)));
    }
    out.push_str(&print_formula(&p.main));
    out
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut cur = Cursor::new(text)?;
    let f = formula(&mut cur)?;
    cur.finish()?;
    Ok(f)
}

pub fn parse_program(text: &str) -> Result<Program> {
    let mut cur = Cursor::new(text)?;
    let mut defs = Vec::new();
    while is_def_head(&cur) {
        let name = cur.ident()?;
        cur.expect("(")?;
        let param = cur.ident()?;
        cur.expect(")")?;
        cur.expect(":")?;
        cur.expect("=")?;
        let body = formula(&mut cur)?;
        cur.expect(";")?;
        defs.push(Def { name, param, body });
    }
    let main = formula(&mut cur)?;
    cur.finish()?;
    Ok(Program { defs, main })
}

fn is_def_head(cur: &Cursor) -> bool {
    matches!(
        (cur.peek(), cur.peek_at(1), cur.peek_at(3), cur.peek_at(4)),
        (Some(Tok::Ident(_)), Some(Tok::Sym("(")), Some(Tok::Sym(")")), Some(Tok::Sym(":")))
    )
}

fn formula(cur: &mut Cursor) -> Result<Formula> {
    let lhs = disjunction(cur)?;
    if cur.eat("->") {
        let rhs = formula(cur)?;
        return Ok(Formula::Or { args: vec![not(lhs), rhs] });
    }
    Ok(lhs)
}

fn disjunction(cur: &mut Cursor) -> Result<Formula> {
    let mut args = vec![conjunction(cur)?];
    while cur.eat("|") {
        args.push(conjunction(cur)?);
    }
    Ok(or(args))
}

fn conjunction(cur: &mut Cursor) -> Result<Formula> {
    let mut args = vec![unary(cur)?];
    while cur.eat("&") {
        args.push(unary(cur)?);
    }
    Ok(and(args))
}

fn unary(cur: &mut Cursor) -> Result<Formula> {
    if cur.eat("~") {
        return Ok(not(unary(cur)?));
    }
    atom(cur)
}

fn var(cur: &mut Cursor, set: bool) -> Result<String> {
    let v = cur.ident()?;
    if is_set_var(&v) != set {
        let kind = if set { "set" } else { "element" };
        return cur.err(format!("`{v}` is not a {kind} variable"));
    }
    Ok(v)
}

fn parenthesized(cur: &mut Cursor) -> Result<Formula> {
    cur.expect("(")?;
    let f = formula(cur)?;
    cur.expect(")")?;
    Ok(f)
}

fn edge_ref(cur: &mut Cursor) -> Result<EdgeRef> {
    let node = |cur: &mut Cursor| -> Result<usize> {
        let id = cur.ident()?;
        match id.strip_prefix('n').and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k >= 1 => Ok(k - 1),
            _ => cur.err(format!("expected a node name like n3, found `{id}`")),
        }
    };
    let src = node(cur)?;
    cur.expect("->")?;
    Ok((src, node(cur)?))
}

fn lambda_arg(cur: &mut Cursor) -> Result<Lambda> {
    cur.expect("[")?;
    let v = var(cur, true)?;
    cur.expect("]")?;
    Ok(Lambda::new(&v, formula(cur)?))
}

fn eps_flag(cur: &mut Cursor) -> Result<bool> {
    if cur.eat_ident("eps") {
        Ok(true)
    } else if cur.eat_ident("noeps") {
        Ok(false)
    } else {
        cur.err("expected `eps` or `noeps`")
    }
}

fn two_sets(cur: &mut Cursor) -> Result<(String, String)> {
    cur.expect("(")?;
    let a = var(cur, true)?;
    cur.expect(",")?;
    let b = var(cur, true)?;
    cur.expect(")")?;
    Ok((a, b))
}

/// Presburger part of `Q`: a set literal, or constraint text up to the closing parenthesis.
fn rho(cur: &mut Cursor, dim: usize) -> Result<crate::semilinear::SemiLinear> {
    if matches!(cur.peek(), Some(Tok::Ident(s)) if s == "sl") && matches!(cur.peek_at(1), Some(Tok::Sym("["))) {
        let pos = cur.offset();
        let s = parse_literal(cur)?;
        if s.dim != dim {
            return Err(Error::Syntax { pos, msg: format!("set of dimension {} for {dim} formulas", s.dim) });
        }
        return Ok(s);
    }
    let pos = cur.offset();
    let mut depth = 0usize;
    let mut words = Vec::new();
    loop {
        match cur.peek() {
            None => return cur.err("unterminated Q"),
            Some(Tok::Sym(")")) if depth == 0 => break,
            _ => {}
        }
        let t = cur.next().unwrap_or(Tok::Sym(")"));
        match &t {
            Tok::Sym("(") => depth += 1,
            Tok::Sym(")") => depth -= 1,
            _ => {}
        }
        words.push(match t {
            Tok::Ident(s) => s,
            Tok::Int(n) => n.to_string(),
            Tok::Sym(s) => s.to_string(),
        });
    }
    from_constraints(&words.join(" "), dim).map_err(|e| match e {
        Error::Syntax { msg, .. } => Error::Syntax { pos, msg },
        other => other,
    })
}

fn atom(cur: &mut Cursor) -> Result<Formula> {
    use Formula::*;
    if matches!(cur.peek(), Some(Tok::Sym("("))) {
        return parenthesized(cur);
    }
    let word = match cur.peek() {
        Some(Tok::Ident(w)) => w.clone(),
        _ => return cur.err("expected a formula"),
    };
    let called = matches!(cur.peek_at(1), Some(Tok::Sym("(")));
    // a(x): letter atom, recognized by its element-variable argument.
    if called {
        if let (Some(Tok::Ident(x)), Some(Tok::Sym(")"))) = (cur.peek_at(2), cur.peek_at(3)) {
            if !is_set_var(x) {
                let var = x.clone();
                for _ in 0..4 {
                    cur.next();
                }
                return Ok(Letter { letter: word, var });
            }
        }
    }
    cur.next();
    match word.as_str() {
        "true" => return Ok(True),
        "false" => return Ok(False),
        "exists" | "forall" => {
            if word == "exists" && cur.eat_ident("coloring") {
                let var = var(cur, true)?;
                cur.expect("[")?;
                let mut edges = Vec::new();
                if !cur.eat("]") {
                    edges.push(edge_ref(cur)?);
                    while cur.eat(",") {
                        edges.push(edge_ref(cur)?);
                    }
                    cur.expect("]")?;
                }
                let body = Box::new(parenthesized(cur)?);
                return Ok(ExistsColoring { var, edges, body });
            }
            let v = cur.ident()?;
            let body = Box::new(parenthesized(cur)?);
            return Ok(match (word.as_str(), is_set_var(&v)) {
                ("exists", false) => Exists1 { var: v, body },
                ("exists", true) => Exists2 { var: v, body },
                ("forall", false) => Forall1 { var: v, body },
                _ => Forall2 { var: v, body },
            });
        }
        _ => {}
    }
    if !called {
        if is_set_var(&word) {
            return cur.err(format!("set variable `{word}` where a formula is expected"));
        }
        if cur.eat_ident("in") {
            return Ok(In { var: word, set: var(cur, true)? });
        }
        cur.expect("<")?;
        return Ok(Less { lo: word, hi: var(cur, false)? });
    }
    match word.as_str() {
        "size" => {
            cur.expect("(")?;
            let set = var(cur, true)?;
            cur.expect(",")?;
            let n = cur.int()? as usize;
            cur.expect(")")?;
            Ok(Size { set, n })
        }
        "factor" => {
            let (part, whole) = two_sets(cur)?;
            Ok(Factor { part, whole })
        }
        "sfactor" => {
            let (part, whole) = two_sets(cur)?;
            Ok(SFactor { part, whole })
        }
        "scoloring" => {
            let (whole, coloring) = two_sets(cur)?;
            Ok(SColoring { whole, coloring })
        }
        "color" => {
            cur.expect("(")?;
            let coloring = var(cur, true)?;
            cur.expect(",")?;
            let set = var(cur, true)?;
            cur.expect(",")?;
            let bit = match cur.int()? {
                0 => false,
                1 => true,
                _ => return cur.err("coloring bit must be 0 or 1"),
            };
            cur.expect(",")?;
            let edge = edge_ref(cur)?;
            cur.expect(")")?;
            Ok(Color { coloring, set, bit, edge })
        }
        "Q" => {
            cur.expect("(")?;
            let set = var(cur, true)?;
            cur.expect(";")?;
            let mut psis = Vec::new();
            if !matches!(cur.peek(), Some(Tok::Sym(";"))) {
                psis.push(formula(cur)?);
                while cur.eat(",") {
                    psis.push(formula(cur)?);
                }
            }
            cur.expect(";")?;
            let rho = rho(cur, psis.len())?;
            cur.expect(")")?;
            Ok(Q { set, psis, rho })
        }
        "seq2" | "seqstar" | "seqomega" | "seqmomega" | "seqdia" => {
            cur.expect("(")?;
            let set = var(cur, true)?;
            cur.expect(";")?;
            let first = lambda_arg(cur)?;
            let f = match word.as_str() {
                "seqstar" => SeqStar { set, body: first },
                "seq2" => {
                    cur.expect(";")?;
                    SeqSplit2 { set, first, second: lambda_arg(cur)? }
                }
                "seqdia" => {
                    cur.expect(";")?;
                    let second = lambda_arg(cur)?;
                    cur.expect(";")?;
                    let e0 = eps_flag(cur)?;
                    cur.expect(",")?;
                    SeqDia { set, first, second, eps: [e0, eps_flag(cur)?] }
                }
                _ => {
                    cur.expect(";")?;
                    SeqOmega { set, body: first, eps: eps_flag(cur)?, mirrored: word == "seqmomega" }
                }
            };
            cur.expect(")")?;
            Ok(f)
        }
        _ => {
            cur.expect("(")?;
            let arg = var(cur, true)?;
            cur.expect(")")?;
            Ok(Call { name: word, arg })
        }
    }
}

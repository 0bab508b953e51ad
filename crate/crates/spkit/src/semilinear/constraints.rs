//! Quantifier-free linear constraints to semilinear sets.
//!
//! Each disjunct of the DNF becomes a linear system over ℕ with slack
//! variables; its solutions are minimal inhomogeneous solutions plus the
//! monoid of minimal homogeneous ones (Contejean–Devie completion). The result
//! is always re-checked against a direct evaluation of the formula on a box.

use std::collections::{BTreeMap, BTreeSet};

use super::{LinearSet, SemiLinear, Vector};
use crate::error::{Error, Result};
use crate::lex::{Cursor, Tok};

pub const DEFAULT_BOX: u64 = 16;
/// Points enumerated by the mandatory check; the box shrinks to fit.
const MAX_BOX_POINTS: u64 = 1_000_000;
const MAX_FRONTIER: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    /// `Σ coeffs·x  op  c`
    Cmp(Vec<i64>, CmpOp, i64),
    /// `Σ coeffs·x ≡ r (mod m)`
    Mod(Vec<i64>, i64, i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Formula {
    pub fn eval(&self, v: &[u64]) -> bool {
        let dot = |a: &[i64]| a.iter().zip(v).map(|(&c, &x)| c * x as i64).sum::<i64>();
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Not(f) => !f.eval(v),
            Formula::And(fs) => fs.iter().all(|f| f.eval(v)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(v)),
            Formula::Cmp(a, op, c) => {
                let l = dot(a);
                match op {
                    CmpOp::Eq => l == *c,
                    CmpOp::Ne => l != *c,
                    CmpOp::Lt => l < *c,
                    CmpOp::Le => l <= *c,
                    CmpOp::Gt => l > *c,
                    CmpOp::Ge => l >= *c,
                }
            }
            Formula::Mod(a, r, m) => (dot(a) - r).rem_euclid(*m) == 0,
        }
    }
}

/// Parses the constraint language over `dim` variables. Variables named
/// `x1..xdim` map to their index; otherwise distinct names are assigned
/// coordinates in alphabetical order.
pub fn parse_constraints(text: &str, dim: usize) -> Result<Formula> {
    let toks = crate::lex::tokenize(text)?;
    let mut names: BTreeSet<String> = BTreeSet::new();
    for (i, (t, _)) in toks.iter().enumerate() {
        if let Tok::Ident(s) = t {
            if matches!(s.as_str(), "exists" | "forall") {
                return Err(Error::UnsupportedFormula(format!("quantifier `{s}`")));
            }
            let is_keyword = matches!(s.as_str(), "and" | "or" | "not" | "true" | "false" | "mod");
            let is_call = matches!(toks.get(i + 1), Some((Tok::Sym("("), _)));
            if !is_keyword && !is_call {
                names.insert(s.clone());
            }
        }
    }
    let indexed = |s: &str| s.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()).filter(|&k| k >= 1 && k <= dim);
    let vars: BTreeMap<String, usize> = if names.iter().all(|n| indexed(n).is_some()) {
        names.iter().map(|n| (n.clone(), indexed(n).unwrap() - 1)).collect()
    } else {
        if names.len() > dim {
            return Err(Error::DimensionMismatch { expected: dim, got: names.len() });
        }
        names.iter().cloned().enumerate().map(|(k, n)| (n, k)).collect()
    };
    let mut p = Parser { cur: Cursor::new(text)?, vars, dim };
    let f = p.or()?;
    p.cur.finish()?;
    Ok(f)
}

struct Parser {
    cur: Cursor,
    vars: BTreeMap<String, usize>,
    dim: usize,
}

impl Parser {
    fn or(&mut self) -> Result<Formula> {
        let mut fs = vec![self.and()?];
        while self.cur.eat("|") || self.cur.eat_ident("or") {
            fs.push(self.and()?);
        }
        Ok(if fs.len() == 1 { fs.pop().unwrap() } else { Formula::Or(fs) })
    }

    fn and(&mut self) -> Result<Formula> {
        let mut fs = vec![self.unary()?];
        while self.cur.eat("&") || self.cur.eat_ident("and") {
            fs.push(self.unary()?);
        }
        Ok(if fs.len() == 1 { fs.pop().unwrap() } else { Formula::And(fs) })
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.cur.eat("~") || self.cur.eat_ident("not") {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.cur.eat_ident("true") {
            return Ok(Formula::True);
        }
        if self.cur.eat_ident("false") {
            return Ok(Formula::False);
        }
        // A parenthesis opens either a sub-formula or a linear term; try the
        // formula reading first and fall back.
        if matches!(self.cur.peek(), Some(Tok::Sym("("))) {
            let save = self.cur_pos();
            self.cur.next();
            if let Ok(f) = self.or() {
                if self.cur.eat(")") && !self.at_comparison() {
                    return Ok(f);
                }
            }
            self.reset(save);
        }
        self.atom()
    }

    fn cur_pos(&self) -> Cursor {
        self.cur.clone()
    }

    fn reset(&mut self, c: Cursor) {
        self.cur = c;
    }

    fn at_comparison(&self) -> bool {
        matches!(self.cur.peek(), Some(Tok::Sym("=" | "==" | "!=" | "<" | "<=" | ">" | ">=" | "+" | "-" | "*")))
    }

    fn atom(&mut self) -> Result<Formula> {
        let (la, lc) = self.linear()?;
        let op = match self.cur.next() {
            Some(Tok::Sym("=" | "==")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            _ => return self.cur.err("expected comparison"),
        };
        let (ra, rc) = self.linear()?;
        let a: Vec<i64> = la.iter().zip(&ra).map(|(x, y)| x - y).collect();
        let c = rc - lc;
        if self.cur.eat_ident("mod") {
            if op != CmpOp::Eq {
                return self.cur.err("`mod` needs `=`");
            }
            let m = self.cur.int()? as i64;
            if m == 0 {
                return self.cur.err("modulus must be positive");
            }
            return Ok(Formula::Mod(a, c.rem_euclid(m), m));
        }
        Ok(Formula::Cmp(a, op, c))
    }

    /// Linear term as (coefficients, constant).
    fn linear(&mut self) -> Result<(Vec<i64>, i64)> {
        let mut a = vec![0i64; self.dim];
        let mut c = 0i64;
        let mut sign = if self.cur.eat("-") { -1 } else { 1 };
        loop {
            let mut coef = 1i64;
            let mut had_num = false;
            if let Some(Tok::Int(n)) = self.cur.peek() {
                coef = *n as i64;
                had_num = true;
                self.cur.next();
                self.cur.eat("*");
            }
            match self.cur.peek() {
                Some(Tok::Ident(name)) if !matches!(name.as_str(), "and" | "or" | "mod" | "not") => {
                    let k = *self.vars.get(name).ok_or_else(|| Error::UnboundVariable(name.clone()))?;
                    self.cur.next();
                    a[k] += sign * coef;
                }
                Some(Tok::Sym("(")) => {
                    self.cur.next();
                    let (ia, ic) = self.linear()?;
                    self.cur.expect(")")?;
                    for (x, y) in a.iter_mut().zip(&ia) {
                        *x += sign * coef * y;
                    }
                    c += sign * coef * ic;
                }
                _ if had_num => c += sign * coef,
                _ => return self.cur.err("expected linear term"),
            }
            if self.cur.eat("+") {
                sign = 1;
            } else if self.cur.eat("-") {
                sign = -1;
            } else {
                return Ok((a, c));
            }
        }
    }
}

/// A conjunct in normal form: `a·x = c`, `a·x ≤ c`, or `a·x ≡ r (mod m)`.
#[derive(Clone, Debug)]
enum Lit {
    Eq(Vec<i64>, i64),
    Le(Vec<i64>, i64),
    Mod(Vec<i64>, i64, i64),
}

fn neg(a: &[i64]) -> Vec<i64> {
    a.iter().map(|x| -x).collect()
}

fn dnf(f: &Formula, positive: bool) -> Vec<Vec<Lit>> {
    match (f, positive) {
        (Formula::True, true) | (Formula::False, false) => vec![vec![]],
        (Formula::True, false) | (Formula::False, true) => vec![],
        (Formula::Not(g), p) => dnf(g, !p),
        (Formula::And(gs), true) | (Formula::Or(gs), false) => {
            let mut acc = vec![vec![]];
            for g in gs {
                let part = dnf(g, positive);
                let mut next = Vec::new();
                for x in &acc {
                    for y in &part {
                        let mut z: Vec<Lit> = x.clone();
                        z.extend(y.iter().cloned());
                        next.push(z);
                    }
                }
                acc = next;
            }
            acc
        }
        (Formula::Or(gs), true) | (Formula::And(gs), false) => gs.iter().flat_map(|g| dnf(g, positive)).collect(),
        (Formula::Cmp(a, op, c), p) => {
            let op = if p {
                *op
            } else {
                match op {
                    CmpOp::Eq => CmpOp::Ne,
                    CmpOp::Ne => CmpOp::Eq,
                    CmpOp::Lt => CmpOp::Ge,
                    CmpOp::Le => CmpOp::Gt,
                    CmpOp::Gt => CmpOp::Le,
                    CmpOp::Ge => CmpOp::Lt,
                }
            };
            let c = *c;
            match op {
                CmpOp::Eq => vec![vec![Lit::Eq(a.clone(), c)]],
                CmpOp::Le => vec![vec![Lit::Le(a.clone(), c)]],
                CmpOp::Lt => vec![vec![Lit::Le(a.clone(), c - 1)]],
                CmpOp::Ge => vec![vec![Lit::Le(neg(a), -c)]],
                CmpOp::Gt => vec![vec![Lit::Le(neg(a), -c - 1)]],
                CmpOp::Ne => vec![vec![Lit::Le(a.clone(), c - 1)], vec![Lit::Le(neg(a), -c - 1)]],
            }
        }
        (Formula::Mod(a, r, m), true) => vec![vec![Lit::Mod(a.clone(), *r, *m)]],
        (Formula::Mod(a, r, m), false) => {
            (0..*m).filter(|k| k != r).map(|k| vec![Lit::Mod(a.clone(), k, *m)]).collect()
        }
    }
}

/// Minimal non-zero solutions of `A z = 0` over ℕ with the last coordinate at
/// most 1.
fn minimal_solutions(rows: &[Vec<i64>], n: usize) -> Result<Vec<Vec<u64>>> {
    let defect = |z: &[u64]| -> Vec<i64> {
        rows.iter().map(|r| r.iter().zip(z).map(|(&a, &x)| a * x as i64).sum()).collect()
    };
    let col: Vec<Vec<i64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut found: Vec<Vec<u64>> = Vec::new();
    let mut level: Vec<Vec<u64>> = (0..n)
        .map(|j| {
            let mut e = vec![0; n];
            e[j] = 1;
            e
        })
        .collect();
    while !level.is_empty() {
        let mut next: BTreeSet<Vec<u64>> = BTreeSet::new();
        let mut fresh = Vec::new();
        for z in &level {
            let d = defect(z);
            if d.iter().all(|&x| x == 0) {
                fresh.push(z.clone());
            }
        }
        found.extend(fresh.iter().cloned());
        for z in &level {
            let d = defect(z);
            if d.iter().all(|&x| x == 0) {
                continue;
            }
            for j in 0..n {
                if j == n - 1 && z[j] >= 1 {
                    continue;
                }
                let dot: i64 = d.iter().zip(&col[j]).map(|(a, b)| a * b).sum();
                if dot < 0 {
                    let mut w = z.clone();
                    w[j] += 1;
                    if !found.iter().any(|s| s.iter().zip(&w).all(|(a, b)| a <= b)) {
                        next.insert(w);
                    }
                }
            }
        }
        if next.len() > MAX_FRONTIER {
            return Err(Error::ResourceBound(format!("constraint solving frontier of {}", next.len())));
        }
        level = next.into_iter().collect();
    }
    Ok(found)
}

fn conjunct_to_linear(lits: &[Lit], dim: usize) -> Result<Vec<LinearSet>> {
    let slack = lits.iter().filter(|l| !matches!(l, Lit::Eq(..))).count();
    // Columns: x (dim), one slack or quotient per inequality/congruence, y.
    let n = dim + slack + 1;
    let mut rows = Vec::new();
    let mut s = dim;
    for l in lits {
        let mut row = vec![0i64; n];
        match l {
            Lit::Eq(a, c) => {
                row[..dim].copy_from_slice(a);
                row[n - 1] = -c;
            }
            Lit::Le(a, c) => {
                row[..dim].copy_from_slice(a);
                row[s] = 1;
                row[n - 1] = -c;
                s += 1;
            }
            Lit::Mod(a, r, m) => {
                // Coefficients reduced into [0, m) keep the quotient non-negative.
                for (k, x) in a.iter().enumerate() {
                    row[k] = x.rem_euclid(*m);
                }
                row[s] = -m;
                row[n - 1] = -r;
                s += 1;
            }
        }
        rows.push(row);
    }
    let sols = minimal_solutions(&rows, n)?;
    let periods: Vec<Vector> = sols.iter().filter(|z| z[n - 1] == 0).map(|z| z[..dim].to_vec()).collect();
    Ok(sols
        .iter()
        .filter(|z| z[n - 1] == 1)
        .map(|z| LinearSet { base: z[..dim].to_vec(), periods: periods.clone() })
        .collect())
}

/// Largest box bound not above `bound` whose point count stays enumerable.
pub fn effective_box(dim: usize, bound: u64) -> u64 {
    let mut b = bound;
    while b > 1 && (b + 1).checked_pow(dim as u32).is_none_or(|n| n > MAX_BOX_POINTS) {
        b -= 1;
    }
    b
}

pub fn from_constraints(text: &str, dim: usize) -> Result<SemiLinear> {
    from_constraints_checked(text, dim, DEFAULT_BOX)
}

pub fn from_constraints_checked(text: &str, dim: usize, bound: u64) -> Result<SemiLinear> {
    let f = parse_constraints(text, dim)?;
    from_formula(&f, dim, bound)
}

pub fn from_formula(f: &Formula, dim: usize, bound: u64) -> Result<SemiLinear> {
    let mut cs = Vec::new();
    for conj in dnf(f, true) {
        cs.extend(conjunct_to_linear(&conj, dim)?);
    }
    let s = SemiLinear::new(dim, cs)?.simplify();
    verify(f, &s, effective_box(dim, bound))?;
    Ok(s)
}

fn verify(f: &Formula, s: &SemiLinear, bound: u64) -> Result<()> {
    let got = s.points_in_box(bound);
    let mut v = vec![0u64; s.dim];
    loop {
        if f.eval(&v) != got.contains(&v) {
            return Err(Error::VerificationFailed(v));
        }
        // Odometer step through the box.
        let mut k = 0;
        loop {
            if k == v.len() {
                return Ok(());
            }
            if v[k] < bound {
                v[k] += 1;
                break;
            }
            v[k] = 0;
            k += 1;
        }
    }
}

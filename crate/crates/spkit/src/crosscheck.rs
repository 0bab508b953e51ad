//! Three-way agreement harness: the expression decider, the d-graph decider
//! and the model checker run on the emitted sentence, over every poset up to
//! a size bound.
//!
//! Reports are deterministic: keys are sorted, posets follow enumeration
//! order (by size), and nothing depends on time or randomness.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dgraph::DGraph;
use crate::error::{Error, Result};
use crate::membership::{DGraphMembership, ExprMembership};
use crate::pmso::{emit_phi, model_check_with, Assignment};
use crate::poset::{enumerate_posets, SpTerm};
use crate::rexpr::Expr;

/// One corpus line: the expression and, optionally, a file holding a d-graph
/// to use instead of the built one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusLine {
    pub expr: String,
    pub graph_file: Option<String>,
}

/// One expression per line, `#` starts a comment. `expr @ path` replaces the
/// built d-graph by the JSON graph at `path`.
pub fn parse_corpus(text: &str) -> Vec<CorpusLine> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| match l.rsplit_once('@') {
            Some((e, f)) => CorpusLine { expr: e.trim().to_string(), graph_file: Some(f.trim().to_string()) },
            None => CorpusLine { expr: l.to_string(), graph_file: None },
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Config {
    pub alphabet: Vec<String>,
    pub max_elements: usize,
    pub model_check_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairVerdict {
    pub poset: String,
    pub expr: bool,
    pub dgraph: bool,
    pub pmso: bool,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExprReport {
    pub expression: String,
    pub graph_source: String,
    pub agree: bool,
    pub members: usize,
    pub pairs: Vec<PairVerdict>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub expression: String,
    pub poset: String,
    pub size: usize,
    pub expr: bool,
    pub dgraph: bool,
    pub pmso: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub expressions: usize,
    pub posets: usize,
    pub pairs: usize,
    pub agreeing: usize,
    pub disagreeing: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub config: Config,
    pub agree: bool,
    pub summary: Summary,
    pub first_counterexample: Option<Counterexample>,
    pub expressions: Vec<ExprReport>,
}

impl Report {
    /// Pretty JSON with every object's keys sorted.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&v).expect("value serializes") + "\n"
    }
}

/// An expression together with the d-graph the two graph-based deciders use.
pub struct Subject {
    pub expr: Expr,
    pub graph: DGraph,
    pub graph_source: String,
}

impl Subject {
    pub fn built(expr: Expr) -> Result<Subject> {
        let graph = DGraph::from_rational(&expr)?;
        Ok(Subject { expr, graph, graph_source: "built".into() })
    }

    /// Structural properties the graph must have, normalized against the
    /// expression's substitution letters.
    pub fn check_graph(&self) -> Result<()> {
        let xis: BTreeSet<String> = self.expr.substitution_letters();
        let r = self.graph.check_properties(&xis);
        if r.all() {
            Ok(())
        } else {
            Err(Error::PreconditionViolated(format!("d-graph properties fail: {r:?}")))
        }
    }
}

pub fn crosscheck(subjects: &[Subject], config: &Config) -> Result<Report> {
    let posets: Vec<SpTerm> = enumerate_posets(&config.alphabet, config.max_elements)?;
    let mut expressions = Vec::with_capacity(subjects.len());
    let mut summary = Summary { expressions: subjects.len(), posets: posets.len(), ..Summary::default() };
    let mut first: Option<Counterexample> = None;
    for s in subjects {
        let mut by_expr = ExprMembership::new(&s.expr)?;
        let mut by_graph = DGraphMembership::new(&s.graph)?;
        let phi = emit_phi(&s.graph, s.expr.nullable());
        let mut pairs = Vec::with_capacity(posets.len());
        for p in &posets {
            let e = by_expr.member(p)?;
            let d = by_graph.member(p)?;
            let m = model_check_with(&phi, p, &Assignment::new(), config.model_check_cap)?;
            let agree = e == d && d == m;
            if !agree && first.as_ref().is_none_or(|c| p.size() < c.size) {
                first = Some(Counterexample {
                    expression: s.expr.to_string(),
                    poset: p.to_string(),
                    size: p.size(),
                    expr: e,
                    dgraph: d,
                    pmso: m,
                });
            }
            pairs.push(PairVerdict { poset: p.to_string(), expr: e, dgraph: d, pmso: m, agree });
        }
        let agreeing = pairs.iter().filter(|v| v.agree).count();
        summary.pairs += pairs.len();
        summary.agreeing += agreeing;
        summary.disagreeing += pairs.len() - agreeing;
        expressions.push(ExprReport {
            expression: s.expr.to_string(),
            graph_source: s.graph_source.clone(),
            agree: agreeing == pairs.len(),
            members: pairs.iter().filter(|v| v.expr).count(),
            pairs,
        });
    }
    Ok(Report { config: config.clone(), agree: summary.disagreeing == 0, summary, first_counterexample: first, expressions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_lines_drop_comments_and_split_graph_overrides() {
        let text = "# header\nseq(a, b)  # trailing\n\n  star(a) @ g.json\n";
        assert_eq!(
            parse_corpus(text),
            vec![
                CorpusLine { expr: "seq(a, b)".into(), graph_file: None },
                CorpusLine { expr: "star(a)".into(), graph_file: Some("g.json".into()) },
            ]
        );
    }

    #[test]
    fn empty_corpus_agrees_trivially() {
        let cfg = Config { alphabet: vec!["a".into()], max_elements: 2, model_check_cap: 8 };
        let r = crosscheck(&[], &cfg).unwrap();
        assert!(r.agree && r.first_counterexample.is_none());
        assert_eq!(r.summary.pairs, 0);
    }

    #[test]
    fn relabelled_leaf_is_caught_at_the_smallest_poset() {
        let cfg = Config { alphabet: vec!["a".into(), "b".into()], max_elements: 3, model_check_cap: 8 };
        let r = crosscheck(&[corrupted()], &cfg).unwrap();
        assert!(!r.agree);
        let c = r.first_counterexample.as_ref().unwrap();
        assert_eq!(c.size, 2);
        assert!(c.expr != c.dgraph && c.dgraph == c.pmso);
        assert_eq!(r.to_json(), crosscheck(&[corrupted()], &cfg).unwrap().to_json());
    }

    fn corrupted() -> Subject {
        let mut s = Subject::built(Expr::parse("seq(a, star(b))").unwrap()).unwrap();
        for l in &mut s.graph.labels {
            if l.is_letter("b") {
                *l = crate::dgraph::Label::Letter("a".into());
            }
        }
        s.graph_source = "relabelled".into();
        s
    }
}

//! Command-line front end.
//!
//! Exit status: 0 success or true, 1 false, 2 invalid input, 3 a built
//! d-graph fails its structural properties.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spkit::corpus::CORPUS;
use spkit::crosscheck::{crosscheck, parse_corpus, Config, Subject};
use spkit::dgraph::{DGraph, Label};
use spkit::membership::{enumerate_dgraph, enumerate_language, find_path, member_dgraph, member_expr};
use spkit::pmso::{emit_phi, model_check_with, parse_program, Assignment, Program, DEFAULT_MAX_SIZE};
use spkit::poset::{enumerate_posets, SpTerm};
use spkit::rexpr::Expr;
use spkit::semilinear::{
    from_constraints_checked, power_subst, star_subst, subst_disjoint, subst_same, SemiLinear, DEFAULT_BOX,
};
use spkit::Error;

const SIZE_VAR: &str = "SPKIT_MAX_POSET_SIZE";

#[derive(Parser)]
#[command(name = "spkit", version, about = "Series-parallel poset languages")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ExprArg {
    /// Rational expression, e.g. `istar(x, seq(a, par(x, x)))`.
    #[arg(short = 'e', long = "expr")]
    expr: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Via {
    Expr,
    Dgraph,
    Pmso,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate an expression; prints its canonical form.
    Parse {
        #[command(flatten)]
        e: ExprArg,
        #[arg(long)]
        json: bool,
    },
    /// Rewrite an expression into its ">1" form.
    Gt1 {
        #[command(flatten)]
        e: ExprArg,
    },
    /// Build the d-graph of an expression.
    Dgraph {
        #[command(flatten)]
        e: ExprArg,
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        #[arg(long)]
        json: bool,
    },
    /// Decide whether a poset belongs to the language of an expression.
    Member {
        #[command(flatten)]
        e: ExprArg,
        /// Series-parallel term, e.g. `seq(a, par(a, a))`.
        #[arg(short = 'p', long = "poset")]
        poset: String,
        #[arg(long, value_enum, default_value = "expr")]
        via: Via,
        /// Print the path tree found in the d-graph as JSON.
        #[arg(long)]
        witness: bool,
    },
    /// List all posets with at most N elements, or the members of a language.
    Enum {
        #[arg(short = 'n')]
        n: usize,
        #[arg(short = 'e', long = "expr")]
        expr: Option<String>,
        /// Enumerate through the d-graph instead of the expression.
        #[arg(long, requires = "expr")]
        dgraph: bool,
        #[arg(long, value_delimiter = ',', default_value = "a,b")]
        alphabet: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Emit the sentence defining a language, or model-check a program.
    Pmso {
        #[arg(short = 'e', long = "expr", required_unless_present = "formula", conflicts_with = "formula")]
        expr: Option<String>,
        /// Program text: `name(X) := body;` definitions followed by a sentence.
        #[arg(short = 'f', long)]
        formula: Option<String>,
        /// Model-check the sentence on this poset instead of printing it.
        #[arg(short = 'p', long = "poset", required_unless_present = "expr")]
        poset: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Semilinear set operations; sets are written `sl[2: (1,0); (0,1)+<(1,1)>]`.
    Semilinear {
        #[command(subcommand)]
        op: SlOp,
        #[arg(long, global = true)]
        json: bool,
    },
    /// Compare the three deciders on a corpus and all posets up to N elements.
    Crosscheck {
        /// Corpus file; the built-in corpus when absent.
        #[arg(short = 'c', long)]
        corpus: Option<PathBuf>,
        #[arg(short = 'n', default_value_t = 4)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "a,b")]
        alphabet: Vec<String>,
        /// Report path; standard output when absent.
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SlOp {
    Member {
        set: String,
        /// Comma-separated coordinates.
        #[arg(value_delimiter = ',')]
        vector: Vec<u64>,
    },
    Union { a: String, b: String },
    Plus { a: String, b: String },
    /// Substitute `inner` into coordinate `i` of `outer` with fresh coordinates.
    SubstDisjoint { inner: String, outer: String, i: usize },
    /// Substitute `inner` into coordinate `i` of `outer` over the same coordinates.
    SubstSame { inner: String, outer: String, i: usize },
    /// `j`-fold self-substitution at coordinate `i`.
    Power { set: String, i: usize, j: usize },
    /// Iterated self-substitution at coordinate `i`, closed off.
    Star { set: String, i: usize },
    /// Convert quantifier-free linear constraints over x1..xdim.
    FromConstraints {
        formula: String,
        #[arg(long)]
        dim: usize,
        #[arg(long = "box", default_value_t = DEFAULT_BOX)]
        bound: u64,
    },
    /// Members inside the box [0..bound]^dim.
    Points { set: String, bound: u64 },
}

/// Exit status and the diagnostic for standard error.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(2, e.to_string())
    }
}

type Run = Result<bool, Fail>;

fn max_poset_size() -> Result<usize, Fail> {
    match std::env::var(SIZE_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Fail(2, format!("{SIZE_VAR} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(DEFAULT_MAX_SIZE),
    }
}

fn graph_of(e: &Expr) -> Result<DGraph, Fail> {
    checked(Subject::built(e.clone())?).map(|s| s.graph)
}

fn checked(s: Subject) -> Result<Subject, Fail> {
    s.check_graph().map_err(|err| Fail(3, err.to_string()))?;
    Ok(s)
}

fn graph_listing(d: &DGraph) -> String {
    let mut out = format!("root {}\n", DGraph::name(d.root));
    for (n, l) in d.labels.iter().enumerate() {
        let label = match l {
            Label::Letter(a) => a.clone(),
            Label::Pres(s) => s.to_string(),
            Label::Op(o) => o.name().to_string(),
        };
        let edges: Vec<String> =
            d.out[n].iter().map(|e| format!("{}{}", DGraph::name(e.to), if e.special { "*" } else { "" })).collect();
        out += &format!("{}: {}", DGraph::name(n), label);
        if !edges.is_empty() {
            out += &format!(" -> {}", edges.join(" "));
        }
        out.push('\n');
    }
    out
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes")
}

fn print_verdict(v: bool) -> Run {
    println!("{v}");
    Ok(v)
}

fn run(cmd: Cmd) -> Run {
    match cmd {
        Cmd::Parse { e, json: as_json } => {
            let expr = Expr::parse(&e.expr)?;
            let violations = expr.validate();
            if as_json {
                let doc = serde_json::json!({
                    "expression": expr.to_string(),
                    "nullable": expr.nullable(),
                    "letters": expr.letters(),
                    "violations": violations,
                });
                println!("{}", json(&doc));
            } else {
                println!("{expr}");
            }
            if violations.is_empty() {
                Ok(true)
            } else {
                Err(Error::ValidationFailed(violations).into())
            }
        }
        Cmd::Gt1 { e } => {
            println!("{}", Expr::parse(&e.expr)?.to_gt1()?);
            Ok(true)
        }
        Cmd::Dgraph { e, dot, json: as_json } => {
            let d = graph_of(&Expr::parse(&e.expr)?)?;
            if dot {
                print!("{}", d.to_dot());
            } else if as_json {
                println!("{}", d.to_json());
            } else {
                print!("{}", graph_listing(&d));
            }
            Ok(true)
        }
        Cmd::Member { e, poset, via, witness } => {
            let expr = Expr::parse(&e.expr)?;
            expr.check()?;
            let p = SpTerm::parse(&poset)?;
            let v = match via {
                Via::Expr => member_expr(&expr, &p)?,
                Via::Dgraph => member_dgraph(&graph_of(&expr)?, &p)?,
                Via::Pmso => {
                    let d = graph_of(&expr)?;
                    model_check_with(&emit_phi(&d, expr.nullable()), &p, &Assignment::new(), max_poset_size()?)?
                }
            };
            println!("{v}");
            if witness {
                let path = find_path(&graph_of(&expr)?, &p)?;
                println!("{}", json(&path));
            }
            Ok(v)
        }
        Cmd::Enum { n, expr, dgraph, alphabet, json: as_json } => {
            let terms = match expr {
                None => enumerate_posets(&alphabet, n)?,
                Some(text) => {
                    let e = Expr::parse(&text)?;
                    if dgraph {
                        enumerate_dgraph(&graph_of(&e)?, n)?
                    } else {
                        e.check()?;
                        enumerate_language(&e, n)?
                    }
                }
            };
            let texts: Vec<String> = terms.iter().map(SpTerm::to_string).collect();
            if as_json {
                println!("{}", json(&texts));
            } else {
                for t in &texts {
                    println!("{t}");
                }
            }
            Ok(true)
        }
        Cmd::Pmso { expr, formula, poset, json: as_json } => {
            let prog: Program = match (&expr, &formula) {
                (Some(text), _) => {
                    let e = Expr::parse(text)?;
                    emit_phi(&graph_of(&e)?, e.nullable())
                }
                (None, Some(text)) => parse_program(text)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            match poset {
                Some(p) => {
                    let t = SpTerm::parse(&p)?;
                    print_verdict(model_check_with(&prog, &t, &Assignment::new(), max_poset_size()?)?)
                }
                None => {
                    if as_json {
                        println!("{}", json(&prog));
                    } else {
                        println!("{prog}");
                    }
                    Ok(true)
                }
            }
        }
        Cmd::Semilinear { op, json: as_json } => semilinear(op, as_json),
        Cmd::Crosscheck { corpus, n, alphabet, out } => {
            let cap = max_poset_size()?;
            if n > cap {
                return Err(Fail(2, format!("-n {n} exceeds the model size cap {cap} ({SIZE_VAR})")));
            }
            if alphabet.is_empty() || alphabet.iter().any(String::is_empty) {
                return Err(Fail(2, "alphabet must be non-empty".into()));
            }
            let subjects = match &corpus {
                None => CORPUS.iter().map(|s| checked(Subject::built(Expr::parse(s)?)?)).collect::<Result<Vec<_>, Fail>>()?,
                Some(path) => load_corpus(path)?,
            };
            let config = Config { alphabet, max_elements: n, model_check_cap: cap };
            let report = crosscheck(&subjects, &config)?;
            let text = report.to_json();
            match out {
                Some(path) => fs::write(&path, &text).map_err(|e| Fail(2, format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            let s = &report.summary;
            eprintln!(
                "{} expressions, {} posets, {} pairs, {} disagreeing",
                s.expressions, s.posets, s.pairs, s.disagreeing
            );
            if let Some(c) = &report.first_counterexample {
                eprintln!(
                    "first counterexample: {} on {} (expr {}, dgraph {}, pmso {})",
                    c.expression, c.poset, c.expr, c.dgraph, c.pmso
                );
            }
            Ok(report.agree)
        }
    }
}

/// Graph files named in the corpus are resolved against the corpus directory.
fn load_corpus(path: &Path) -> Result<Vec<Subject>, Fail> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Fail(2, format!("{}: {e}", p.display())));
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for line in parse_corpus(&read(path)?) {
        let expr = Expr::parse(&line.expr)?;
        expr.check()?;
        let subject = match &line.graph_file {
            None => Subject::built(expr)?,
            Some(f) => {
                let graph = DGraph::from_json(&read(&dir.join(f))?)?;
                graph.check_arity()?;
                Subject { expr, graph, graph_source: f.clone() }
            }
        };
        out.push(checked(subject)?);
    }
    Ok(out)
}

fn semilinear(op: SlOp, as_json: bool) -> Run {
    let parse = |s: &str| SemiLinear::parse(s);
    let set = match op {
        SlOp::Member { set, vector } => return print_verdict(parse(&set)?.member(&vector)?),
        SlOp::Points { set, bound } => {
            let pts = parse(&set)?.points_in_box(bound);
            if as_json {
                println!("{}", json(&pts));
            } else {
                for p in pts {
                    let coords: Vec<String> = p.iter().map(u64::to_string).collect();
                    println!("({})", coords.join(","));
                }
            }
            return Ok(true);
        }
        SlOp::Union { a, b } => parse(&a)?.union(&parse(&b)?)?,
        SlOp::Plus { a, b } => parse(&a)?.plus(&parse(&b)?)?,
        SlOp::SubstDisjoint { inner, outer, i } => subst_disjoint(&parse(&inner)?, &parse(&outer)?, i)?,
        SlOp::SubstSame { inner, outer, i } => subst_same(&parse(&inner)?, &parse(&outer)?, i)?,
        SlOp::Power { set, i, j } => power_subst(&parse(&set)?, i, j)?,
        SlOp::Star { set, i } => star_subst(&parse(&set)?, i)?,
        SlOp::FromConstraints { formula, dim, bound } => from_constraints_checked(&formula, dim, bound)?,
    };
    if as_json {
        println!("{}", json(&set));
    } else {
        println!("{set}");
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fail(code, msg)) => {
            eprintln!("spkit: {msg}");
            ExitCode::from(code)
        }
    }
}

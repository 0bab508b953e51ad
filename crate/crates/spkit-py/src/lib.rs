//! Python module `spkit`: expressions, posets, d-graphs, semilinear sets,
//! the three membership deciders and the crosscheck harness.
//!
//! Library errors surface as `ValueError`. Path trees and crosscheck reports
//! are returned as JSON text.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spkit_core::crosscheck::{crosscheck as run_crosscheck, Config, Subject};
use spkit_core::dgraph::DGraph as CoreGraph;
use spkit_core::membership;
use spkit_core::pmso;
use spkit_core::poset::{self, SpTerm};
use spkit_core::rexpr;
use spkit_core::semilinear::{self, SemiLinear as CoreSet};

fn err(e: spkit_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, module = "spkit", from_py_object)]
#[derive(Clone)]
struct Expr(rexpr::Expr);

#[pymethods]
impl Expr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        rexpr::Expr::parse(text).map(Expr).map_err(err)
    }

    fn nullable(&self) -> bool {
        self.0.nullable()
    }

    /// Side-condition violations; empty for a rational expression.
    fn validate(&self) -> Vec<String> {
        self.0.validate()
    }

    fn to_gt1(&self) -> PyResult<Expr> {
        self.0.to_gt1().map(Expr).map_err(err)
    }

    fn letters(&self) -> Vec<String> {
        self.0.letters().into_iter().collect()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.0.to_string())
    }

    fn __eq__(&self, other: &Expr) -> bool {
        self.0 == other.0
    }
}

#[pyclass(frozen, module = "spkit", skip_from_py_object)]
#[derive(Clone)]
struct Poset(SpTerm);

#[pymethods]
impl Poset {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        SpTerm::parse(text).map(Poset).map_err(err)
    }

    fn size(&self) -> usize {
        self.0.size()
    }

    fn __len__(&self) -> usize {
        self.0.size()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Poset({:?})", self.0.to_string())
    }

    fn __eq__(&self, other: &Poset) -> bool {
        self.0 == other.0
    }
}

#[pyclass(frozen, module = "spkit", skip_from_py_object)]
#[derive(Clone)]
struct DGraph {
    graph: CoreGraph,
    expr: rexpr::Expr,
}

#[pymethods]
impl DGraph {
    /// Validates `expr`, rewrites it into ">1" form and builds its graph.
    #[new]
    fn new(expr: &Expr) -> PyResult<Self> {
        let graph = CoreGraph::from_rational(&expr.0).map_err(err)?;
        Ok(DGraph { graph, expr: expr.0.clone() })
    }

    fn __len__(&self) -> usize {
        self.graph.len()
    }

    fn special_edges(&self) -> Vec<(usize, usize)> {
        self.graph.special_edges().into_iter().collect()
    }

    /// Structural flags as a dict: pp, ss, dag, xi_normalized.
    fn check_properties(&self) -> BTreeMap<&'static str, bool> {
        let r = self.graph.check_properties(&self.expr.substitution_letters());
        BTreeMap::from([("pp", r.pp), ("ss", r.ss), ("dag", r.dag), ("xi_normalized", r.xi_normalized)])
    }

    fn to_dot(&self) -> String {
        self.graph.to_dot()
    }

    fn to_json(&self) -> String {
        self.graph.to_json()
    }

    fn member(&self, p: &Poset) -> PyResult<bool> {
        membership::member_dgraph(&self.graph, &p.0).map_err(err)
    }

    /// Witness path tree as JSON, or None when `p` is not accepted.
    fn find_path(&self, p: &Poset) -> PyResult<Option<String>> {
        let t = membership::find_path(&self.graph, &p.0).map_err(err)?;
        Ok(t.map(|t| serde_json::to_string(&t).expect("path tree serializes")))
    }

    /// Text of the sentence defining the graph's language.
    fn emit_phi(&self) -> String {
        pmso::emit_phi(&self.graph, self.expr.nullable()).to_string()
    }
}

#[pyclass(frozen, module = "spkit", skip_from_py_object)]
#[derive(Clone)]
struct SemiLinear(CoreSet);

#[pymethods]
impl SemiLinear {
    /// Literal form, e.g. `sl[2: (1,0); (0,1)+<(1,1)>]`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        CoreSet::parse(text).map(SemiLinear).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (formula, dim, bound = semilinear::DEFAULT_BOX))]
    fn from_constraints(formula: &str, dim: usize, bound: u64) -> PyResult<Self> {
        semilinear::from_constraints_checked(formula, dim, bound).map(SemiLinear).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn __contains__(&self, v: Vec<u64>) -> PyResult<bool> {
        self.0.member(&v).map_err(err)
    }

    fn union(&self, other: &SemiLinear) -> PyResult<SemiLinear> {
        self.0.union(&other.0).map(SemiLinear).map_err(err)
    }

    fn plus(&self, other: &SemiLinear) -> PyResult<SemiLinear> {
        self.0.plus(&other.0).map(SemiLinear).map_err(err)
    }

    /// Coordinates are 1-based.
    fn power_subst(&self, i: usize, j: usize) -> PyResult<SemiLinear> {
        semilinear::power_subst(&self.0, i, j).map(SemiLinear).map_err(err)
    }

    fn star_subst(&self, i: usize) -> PyResult<SemiLinear> {
        semilinear::star_subst(&self.0, i).map(SemiLinear).map_err(err)
    }

    /// Members of the box `[0..bound]^dim`, sorted.
    fn points(&self, bound: u64) -> Vec<Vec<u64>> {
        self.0.points_in_box(bound).into_iter().collect()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("SemiLinear({:?})", self.0.to_string())
    }
}

/// `inner` substituted into coordinate `i` of `outer`, with fresh coordinates.
#[pyfunction]
fn subst_disjoint(inner: &SemiLinear, outer: &SemiLinear, i: usize) -> PyResult<SemiLinear> {
    semilinear::subst_disjoint(&inner.0, &outer.0, i).map(SemiLinear).map_err(err)
}

/// `inner` substituted into coordinate `i` of `outer` over the same coordinates.
#[pyfunction]
fn subst_same(inner: &SemiLinear, outer: &SemiLinear, i: usize) -> PyResult<SemiLinear> {
    semilinear::subst_same(&inner.0, &outer.0, i).map(SemiLinear).map_err(err)
}

#[pyfunction]
fn member_expr(e: &Expr, p: &Poset) -> PyResult<bool> {
    membership::member_expr(&e.0, &p.0).map_err(err)
}

/// Model-checks program text (definitions, then a sentence) on `p`.
#[pyfunction]
#[pyo3(signature = (program, p, max_size = pmso::DEFAULT_MAX_SIZE))]
fn model_check(program: &str, p: &Poset, max_size: usize) -> PyResult<bool> {
    let prog = pmso::parse_program(program).map_err(err)?;
    pmso::model_check_with(&prog, &p.0, &pmso::Assignment::new(), max_size).map_err(err)
}

#[pyfunction]
fn enumerate_posets(alphabet: Vec<String>, n: usize) -> PyResult<Vec<Poset>> {
    Ok(poset::enumerate_posets(&alphabet, n).map_err(err)?.into_iter().map(Poset).collect())
}

#[pyfunction]
fn enumerate_language(e: &Expr, n: usize) -> PyResult<Vec<Poset>> {
    Ok(membership::enumerate_language(&e.0, n).map_err(err)?.into_iter().map(Poset).collect())
}

/// Runs the three deciders over all posets up to `n`; returns the JSON report.
#[pyfunction]
#[pyo3(signature = (exprs, n, alphabet = vec!["a".to_string(), "b".to_string()], max_size = pmso::DEFAULT_MAX_SIZE))]
fn crosscheck(exprs: Vec<Expr>, n: usize, alphabet: Vec<String>, max_size: usize) -> PyResult<String> {
    let subjects = exprs.into_iter().map(|e| Subject::built(e.0)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let config = Config { alphabet, max_elements: n, model_check_cap: max_size };
    Ok(run_crosscheck(&subjects, &config).map_err(err)?.to_json())
}

#[pymodule]
fn spkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Expr>()?;
    m.add_class::<Poset>()?;
    m.add_class::<DGraph>()?;
    m.add_class::<SemiLinear>()?;
    m.add_function(wrap_pyfunction!(subst_disjoint, m)?)?;
    m.add_function(wrap_pyfunction!(subst_same, m)?)?;
    m.add_function(wrap_pyfunction!(member_expr, m)?)?;
    m.add_function(wrap_pyfunction!(model_check, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_posets, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_language, m)?)?;
    m.add_function(wrap_pyfunction!(crosscheck, m)?)?;
    Ok(())
}

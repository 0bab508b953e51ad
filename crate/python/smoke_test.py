"""Smoke test for the Python bindings.

Build and install first:
    pip install maturin
    maturin build --release -m crates/spkit-py/Cargo.toml
    pip install target/wheels/spkit-*.whl
"""

import json

import spkit

E1 = "sub(x, a, istar(x, seq(a, par(x, x))))"


def main():
    e = spkit.Expr(E1)
    assert e.validate() == []
    assert not e.nullable()
    assert str(spkit.Expr("star(a)").to_gt1()) == "or(star1(a), a, eps)"
    bad = spkit.Expr("istar(x, seq(a, x, b))").validate()
    assert bad and "incomparable" in bad[0], bad

    d = spkit.DGraph(e)
    assert all(d.check_properties().values())
    assert d.special_edges() == [(3, 1)]
    assert d.to_dot().startswith("digraph")

    member = spkit.Poset("seq(a, par(a, a))")
    other = spkit.Poset("seq(a, a)")
    assert spkit.member_expr(e, member) and d.member(member)
    assert not spkit.member_expr(e, other) and not d.member(other)
    tree = json.loads(d.find_path(member))
    assert tree["node"] == 0
    assert d.find_path(other) is None

    phi = d.emit_phi()
    assert spkit.model_check(phi, member)
    assert not spkit.model_check(phi, other)

    s = spkit.SemiLinear("sl[2: (1,0); (0,2)]")
    star = s.star_subst(2)
    assert star.points(6) == [[i, j] for i in range(7) for j in range(7) if i + j >= 1]
    inner = spkit.SemiLinear("sl[2: (1,0); (0,1)]")
    outer = spkit.SemiLinear.from_constraints("x1 = 1 & x2 + x3 <= 1", 3)
    got = spkit.subst_disjoint(inner, outer, 3).points(3)
    assert got == [[1, 0, 0, 0], [1, 0, 0, 1], [1, 0, 1, 0], [1, 1, 0, 0]], got
    assert [1, 1] in spkit.SemiLinear.from_constraints("x1 = x2", 2)

    posets = spkit.enumerate_posets(["a", "b"], 3)
    lang = [str(p) for p in spkit.enumerate_language(spkit.Expr("star(a)"), 3)]
    assert lang == ["eps", "a", "seq(a, a)", "seq(a, a, a)"], lang
    report = json.loads(spkit.crosscheck([e, spkit.Expr("par(a, star(b))")], 3))
    assert report["agree"] and report["summary"]["pairs"] == 2 * len(posets)

    try:
        spkit.Expr("seq(a,")
    except ValueError as err:
        assert "syntax" in str(err)
    else:
        raise AssertionError("parse error not raised")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()

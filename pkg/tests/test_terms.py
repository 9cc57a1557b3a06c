import pytest
from hypothesis import given, settings, strategies as st

from llad import types as ty
from llad.errors import ShapeMismatch
from llad.surface import parse_term
from llad.terms import (
    App, Bang, BangVar, FreshSupply, Lam, Num, Pair, TensorPat, Unit, Var, VarPat, WithPair,
    WithPat, alpha_equal, free_vars, is_value_for, subst,
)
from llad.translation import delta_b_primal

from support import running_expr

R = ty.REAL


class TestFreeVars:
    def test_variable(self):
        assert free_vars(Var("x")) == {"x"}

    def test_bound(self):
        assert free_vars(Lam(VarPat("x", R), Var("x"))) == frozenset()

    def test_running_example_translation(self):
        assert free_vars(delta_b_primal(running_expr())) == {"x", "y"}

    def test_size_counts_nodes(self):
        assert App(Var("f"), Num(1.0)).size == 3


class TestSubst:
    def test_variable(self):
        assert subst(Var("x"), Num(3.0), VarPat("x", R)) == Num(3.0)

    def test_bang(self):
        assert subst(Var("x"), Bang(Num(1.0)), BangVar("x", R)) == Num(1.0)

    def test_with_components(self):
        p = WithPat(VarPat("a", R), VarPat("b", R))
        out = subst(WithPair(Var("a"), Var("b")), WithPair(Num(1.0), Num(2.0)), p)
        assert out == WithPair(Num(1.0), Num(2.0))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            subst(Var("x"), Num(2.0), BangVar("x", R))

    def test_capture_avoiding(self):
        m = Lam(VarPat("y", R), App(Var("x"), Var("y")))
        out = subst(m, Var("y"), VarPat("x", R))
        assert out.fv == {"y"}
        assert isinstance(out, Lam) and out.pat.name != "y"


class TestIsValueFor:
    def test_bang(self):
        assert is_value_for(Bang(Num(2.0)), BangVar("x", R))

    def test_not_bang(self):
        assert not is_value_for(Num(2.0), BangVar("x", R))

    def test_tensor(self):
        p = TensorPat(VarPat("x", R), VarPat("y", R))
        assert is_value_for(Pair(Num(1.0), Num(2.0)), p)

    def test_unit_pattern(self):
        from llad.terms import UnitPat
        assert is_value_for(Unit(), UnitPat())


class TestFreshSupply:
    def test_draws_avoid_names(self):
        s = FreshSupply(prefix="x", avoid={"x#1", "x#2"})
        names = {s.fresh() for _ in range(20)}
        assert len(names) == 20 and not names & {"x#1", "x#2"}


class TestAlphaEqual:
    def test_renamed_binder(self):
        assert alpha_equal(parse_term("lam x : R . x"), parse_term("lam z : R . z"))

    def test_different_body(self):
        assert not alpha_equal(parse_term("lam x : R . x"), parse_term("lam z : R . y"))


names = st.sampled_from(["x", "y", "z", "w"])


@st.composite
def terms(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(names.map(Var), st.floats(-3, 3).map(Num)))
    kind = draw(st.sampled_from(["lam", "app", "pair", "with"]))
    a, b = draw(terms(depth - 1)), draw(terms(depth - 1))
    match kind:
        case "lam":
            return Lam(VarPat(draw(names), R), a)
        case "app":
            return App(a, b)
        case "pair":
            return Pair(a, b)
    return WithPair(a, b)


class TestSubstProperties:
    @settings(max_examples=200, deadline=None)
    @given(terms(), terms(), names)
    def test_free_variables_bounded(self, m, v, x):
        out = subst(m, v, VarPat(x, R))
        assert out.fv <= (m.fv - {x}) | v.fv

    @settings(max_examples=200, deadline=None)
    @given(terms(), terms())
    def test_noop_when_pattern_absent(self, m, v):
        x = "q"
        assert subst(m, v, VarPat(x, R)) == m

import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from llad import types as ty
from llad.corpus import random_program
from llad.errors import NotLinearB, SortError
from llad.equivalence import eq_at_fun_type, flatten
from llad.evaluator import normalize
from llad.lina.ast import JTensor, ONE, R, alpha_equal as jax_alpha_equal
from llad.lina.check import jax_check, jax_workload
from llad.lina.semantics import jax_eval
from llad.lina.syntax import parse_expr, parse_jtype
from llad.lina.transforms import jax_forward, jax_unzip
from llad.surface import parse_term, parse_type
from llad.terms import Bang, Num, Top, WithPair, alpha_equal
from llad.translation import (
    delta, delta_b, delta_b_primal, delta_b_tangent, numseq_subst, numseq_value, read_numseq,
    retraction, run_translation, sort_check, trans_primal_type, trans_tangent_type, translate,
)
from llad.typecheck import infer
from llad.workload import is_safe, workload_term

from support import running_expr

# the primal translation of the running example, one boxed let per step
RUNNING_P = """
let !v1 : R = sin !x in
let !v2 : R = mul (!v1, !y) in
let !v3 : R = cos !x in
let !v4 : R = add (!v2, !v3) in
!v4
"""


class TestTypes:
    def test_primal(self):
        assert trans_primal_type(R) == ty.REAL
        assert trans_primal_type(ONE) == ty.UNIT
        assert trans_primal_type(JTensor(R, R)) == parse_type("!R * !R")

    def test_tangent(self):
        assert trans_tangent_type(ONE) == ty.TOP
        assert trans_tangent_type(JTensor(R, R)) == parse_type("R & R")
        assert trans_tangent_type(R) == ty.REAL

    def test_tangent_of_sequence_type(self):
        assert trans_tangent_type(parse_type("!R * !(!R * !1)")) == parse_type("R & (R & Top)")

    @pytest.mark.parametrize("src", ["R", "1", "R * R", "(R * 1) * (R * R)"])
    def test_workload_equality(self, src):
        from llad.lina.ast import jtype_workload
        t = parse_jtype(src)
        assert jtype_workload(t) == ty.type_workload(trans_tangent_type(t))


class TestDelta:
    def test_dup(self):
        assert alpha_equal(delta(parse_expr("dup(y')")),
                           parse_term("(!(), <(), lam y : R . <y, y>>)"))

    def test_literal(self):
        assert alpha_equal(delta(parse_expr("2.5")), parse_term("(!2.5, <(), lam y : Top . <>>)"))

    def test_sum(self):
        assert alpha_equal(delta(parse_expr("y1' +. y2'")),
                           parse_term("(!(), <(), lam y : R & R . dot+ y>)"))

    def test_type_and_safety(self):
        tr = translate(jax_forward(running_expr()))
        assert infer(tr.env, tr.term) == tr.type
        assert is_safe(tr.term, tr.env).safe

    def test_soundness_on_running_example(self):
        f = jax_forward(running_expr())
        tr = translate(f)
        r, s = {"x": 0.4, "y": 1.7}, {"x'": 0.3, "y'": -0.8}
        v, t = run_translation(tr, r, s)
        assert (v, t) == pytest.approx(jax_eval(f, r, s), abs=1e-9)


class TestDeltaB:
    def test_running_example(self):
        assert alpha_equal(delta_b_primal(running_expr()), parse_term(RUNNING_P))

    def test_scale(self):
        assert alpha_equal(delta_b_tangent(parse_expr("x *. y'")),
                           parse_term("lam y : R . dot* x y"))

    def test_drop(self):
        out = delta_b_primal(parse_expr("let z = drop(x) in z"))
        assert alpha_equal(out, parse_term("let !z : 1 = let !a : R = !x in !() in !z"))

    def test_requires_linear_b(self):
        with pytest.raises(NotLinearB):
            delta_b(parse_expr("x' +. y'"))

    def test_agrees_with_delta(self):
        d = jax_unzip(jax_forward(running_expr()))
        a, b = translate(d), translate(d, linear_b=True)
        assert a.type == b.type
        r = {"x": -0.9, "y": 0.6}
        for s in ({"x'": 1.0, "y'": 0.0}, {"x'": 0.0, "y'": 1.0}):
            assert run_translation(a, r, s) == pytest.approx(run_translation(b, r, s), abs=1e-9)


class TestSorts:
    def test_primal(self):
        assert sort_check(delta_b_primal(running_expr())).sort == "P"

    def test_beyond_the_image(self):
        t = parse_term("let (!x : R, <(), f : R -o R>) = (!x, <(), lam u : R . u>) in "
                       "(!x, <(), lam u : R . f (f u)>)")
        assert sort_check(t).sort == "R"

    def test_reject(self):
        with pytest.raises(SortError):
            sort_check(parse_term("lam x : R . x"))

    def test_images_are_sorted(self):
        for e in (running_expr(), jax_forward(running_expr())):
            assert sort_check(translate(e).term).sort == "R"


class TestNumSeq:
    def test_bang(self):
        assert numseq_subst(parse_term("!x"), {"x": 1.5}, {"x": ty.REAL}) == Bang(Num(1.5))

    def test_with(self):
        assert numseq_value((2.0, 3.0), parse_type("R & R")) == WithPair(Num(2.0), Num(3.0))

    def test_top(self):
        assert numseq_value((), ty.TOP) == Top()

    def test_read(self):
        assert read_numseq(parse_term("(!1.0, !(!2.0, !()))")) == (1.0, (2.0, ()))


class TestRetraction:
    def test_round_trip(self):
        t = parse_jtype("R * R")
        to_bang, back = retraction(t)
        a = ty.Bang(trans_primal_type(t))
        from llad.terms import App
        v = numseq_value((1.5, -2.0), a)
        assert read_numseq(normalize(App(back, App(to_bang, v)))[0]) == (1.5, -2.0)


def _program(seed):
    rng = random.Random(seed)
    return rng, random_program(rng)


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_delta_soundness(self, seed):
        rng, p = _program(seed)
        f = jax_forward(p.expr)
        tr = translate(f)
        r = p.sample_inputs(rng)
        s = {x: rng.uniform(-1, 1) for x in jax_check(f).tangent_env}
        v, t = run_translation(tr, r, s)
        np.testing.assert_allclose(flatten((v, t)), flatten(jax_eval(f, r, s)),
                                   rtol=1e-9, atol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_translation_costs(self, seed):
        _, p = _program(seed)
        for e in (p.expr, jax_forward(p.expr), jax_unzip(jax_forward(p.expr))):
            tr = translate(e)
            assert workload_term(tr.term) <= jax_workload(e)
            assert is_safe(tr.term, tr.env).safe
        d = jax_unzip(jax_forward(p.expr))
        assert workload_term(translate(d, linear_b=True).term) <= jax_workload(d)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_delta_b_tangent_matches_delta(self, seed):
        rng, p = _program(seed)
        d = jax_unzip(jax_forward(p.expr))
        a, b = translate(d), translate(d, linear_b=True)
        r = p.sample_inputs(rng)
        s = {x: rng.uniform(-1, 1) for x in jax_check(d).tangent_env}
        np.testing.assert_allclose(flatten(run_translation(a, r, s)),
                                   flatten(run_translation(b, r, s)), rtol=1e-9, atol=1e-9)

    def test_primal_translation_is_closed_under_equivalence(self):
        m = parse_term("lam y : R & R . dot+ y")
        n = parse_term("lam <a : R, b : R> . dot+ <b, a>")
        assert eq_at_fun_type(m, n, parse_type("R & R -o R"), trials=20).equal_on_samples

    def test_structural_alpha(self):
        assert jax_alpha_equal(parse_expr("let a = sin(x) in a"), parse_expr("let b = sin(x) in b"))

import random

import pytest
from hypothesis import given, settings, strategies as st

from llad import types as ty
from llad.corpus import random_program
from llad.errors import NotClosed, NotSafe
from llad.evaluator import step_safe
from llad.surface import parse_term, parse_type
from llad.terms import Bang, DotPlus, DotTimes, Fun, affine_term, children
from llad.translation import delta_b_primal, numseq_subst
from llad.workload import check_flop_bound, is_safe, workload_term

from support import build, running_expr

XY = {"x": ty.REAL, "y": ty.REAL}


class TestTypeWorkload:
    @pytest.mark.parametrize("src, w", [("R", 1), ("!R", 0), ("(R & R) -o R", 3),
                                        ("!(R & R) * R", 1), ("Top", 0)])
    def test_examples(self, src, w):
        assert ty.type_workload(parse_type(src)) == w


class TestTermWorkload:
    def test_numeral(self):
        assert workload_term(parse_term("3.0")) == 0

    def test_running_example(self):
        assert workload_term(delta_b_primal(running_expr())) == 4

    def test_erased_binder(self):
        assert workload_term(parse_term("lam x : R . 0.0")) == 1

    def test_banged_binder_is_free(self):
        assert workload_term(parse_term("lam !x : R . 0.0")) == 0

    def test_box_is_free(self):
        assert workload_term(parse_term("!(dot+ <1.0, 2.0>)")) == 0


class TestSafety:
    def test_work_under_box(self):
        rep = is_safe(parse_term("!(dot+ <1.0, 2.0>)"))
        assert not rep.safe and rep.violations[0].condition == "i"

    def test_shared_function(self):
        env = {"f": parse_type("R -o R"), "y": ty.REAL}
        rep = is_safe(parse_term("<f y, f y>"), env)
        assert not rep.safe and rep.violations[0].condition == "ii"
        assert rep.violations[0].path == ()

    def test_shared_ground(self):
        assert is_safe(parse_term("<x, x>"), {"x": ty.REAL}).safe

    def test_translations_are_safe(self):
        from llad.lina.syntax import parse_expr
        from llad.translation import translate
        for src in ("(tupP(); dup(x'))", "(tupP(); x *. y')"):
            assert is_safe(translate(parse_expr(src)).term).safe


class TestFlopBound:
    def test_running_example(self):
        t = numseq_subst(delta_b_primal(running_expr()), {"x": 1.5708, "y": 2.0}, XY)
        assert check_flop_bound(t).to_json() == {"static": 4, "dynamic": 4, "banked": 0,
                                                 "holds": True}

    def test_open(self):
        with pytest.raises(NotClosed):
            check_flop_bound(parse_term("dot+ <x, 1.0>"))

    def test_unsafe(self):
        with pytest.raises(NotSafe):
            check_flop_bound(parse_term("!(dot+ <1.0, 2.0>)"))


def _ground(seed):
    rng = random.Random(seed)
    p = build(random_program(rng, depth=rng.randint(1, 4), n_inputs=rng.randint(1, 3)))
    return p, p.ground(p.program.sample_inputs(rng), rng.uniform(-2, 2))


def _numeric_under_bang(t, boxed=False):
    if boxed and isinstance(t, (Fun, DotPlus, DotTimes)):
        return True
    return any(_numeric_under_bang(c, boxed or isinstance(t, Bang)) for c in children(t))


class TestWorkloadProperties:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_safe_steps_never_raise_workload(self, seed):
        _, t = _ground(seed)
        w = workload_term(t)
        while (nxt := step_safe(t)) is not None:
            t, kind = nxt
            assert is_safe(t).safe
            w2 = workload_term(t)
            assert w2 < w if kind.is_numeric else w2 <= w
            w = w2

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_affine_box_keeps_workload(self, seed):
        p, _ = _ground(seed)
        for m in (p.primal, p.F, p.TU):
            assert workload_term(affine_term(m)) == workload_term(m)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_no_numeric_operator_under_bang(self, seed):
        p, t = _ground(seed)
        for m in (t, p.F, p.U, p.TU):
            assert is_safe(m, p.env).safe
            assert not _numeric_under_bang(m)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_flop_bound(self, seed):
        _, t = _ground(seed)
        assert check_flop_bound(t).holds

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_substitution_monotone(self, a, b):
        from llad.terms import BangVar, TensorPat, subst
        from llad.translation import numseq_value
        t = delta_b_primal(running_expr())
        p = TensorPat(BangVar("x", ty.REAL), BangVar("y", ty.REAL))
        w = numseq_value((a, b), parse_type("!R * !R"))
        assert workload_term(subst(t, w, p)) <= workload_term(w) + workload_term(t)

import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from llad import types as ty
from llad.ad import dual
from llad.corpus import random_program
from llad.equivalence import flatten
from llad.errors import FuelExhausted
from llad.evaluator import (
    StepKind, evaluate, is_strong_value, normalize, step_beta, step_safe, value_to_term,
)
from llad.surface import parse_term
from llad.terms import App, Bang, Num
from llad.translation import delta_b_primal, numseq_subst, read_numseq

from support import build, running_expr

R10 = "(lam x : R . <x, x>) (dot+ <3.0, 2.0>)"


class TestStepBeta:
    def test_plus(self):
        assert step_beta(parse_term("dot+ <1.5, 2.0>")) == (Num(3.5), StepKind.BetaPlus)

    def test_times(self):
        assert step_beta(parse_term("dot* 2.0 3.0")) == (Num(6.0), StepKind.BetaTimes)

    def test_function_symbol(self):
        assert step_beta(parse_term("sin !0.0")) == (Bang(Num(0.0)), StepKind.BetaF)

    def test_normal_form(self):
        assert step_beta(Num(3.0)) is None

    def test_numeric_kinds(self):
        assert [k.is_numeric for k in StepKind] == [False, True, True, True]


class TestStepSafe:
    def test_argument_first(self):
        t, kind = step_safe(parse_term(R10))
        assert kind is StepKind.BetaPlus
        assert t == parse_term("(lam x : R . <x, x>) 5.0")

    def test_then_beta(self):
        t, kind = step_safe(parse_term("(lam x : R . <x, x>) 5.0"))
        assert (t, kind) == (parse_term("<5.0, 5.0>"), StepKind.BetaLam)

    def test_open_argument_blocks(self):
        assert step_safe(parse_term("(lam x : R . x) y")) is None


class TestStrongValue:
    def test_numeral(self):
        assert is_strong_value(Num(2.0))

    def test_partial_times(self):
        assert is_strong_value(parse_term("dot* 2.0"))

    def test_redex(self):
        assert not is_strong_value(parse_term("dot+ <1.0, 2.0>"))


class TestNormalize:
    def test_running_example(self):
        t = numseq_subst(delta_b_primal(running_expr()), {"x": 1.5708, "y": 2.0},
                         {"x": ty.REAL, "y": ty.REAL})
        nf, trace = normalize(t, "safe")
        assert nf == Bang(Num(pytest.approx(2.0, abs=1e-4)))
        assert trace.flops == 4 and trace.banked_flops == 0

    def test_already_normal(self):
        nf, trace = normalize(Num(3.0))
        assert nf == Num(3.0) and trace.flops == 0 and not trace.steps

    def test_dual_of_reals(self):
        nf, _ = normalize(App(App(dual(ty.REAL), Num(2.0)), Num(3.0)))
        assert nf == Num(6.0)

    def test_fuel(self):
        with pytest.raises(FuelExhausted):
            normalize(parse_term(R10), fuel=1)

    def test_trace_json(self):
        _, trace = normalize(parse_term(R10))
        rows = trace.to_json()
        assert [r["kind"] for r in rows] == ["beta-plus", "beta-lam"]
        assert rows[0]["redex_path"] == [1]

    def test_strategies_agree(self):
        t = parse_term(R10)
        forms = {normalize(t, s, rng=random.Random(3))[0] for s in ("safe", "beta", "random")}
        assert forms == {parse_term("<5.0, 5.0>")}

    def test_banked_flops(self):
        _, trace = normalize(parse_term("!(dot+ <1.0, 2.0>)"))
        assert (trace.flops, trace.banked_flops) == (0, 1)


class TestBigStep:
    def test_agrees_with_rewriting(self):
        t = parse_term(R10)
        assert value_to_term(evaluate(t)) == normalize(t)[0]


class TestConfluenceProperty:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10**6), st.floats(-2, 2))
    def test_random_orders(self, seed, zbar):
        rng = random.Random(seed)
        p = build(random_program(rng, depth=3, n_inputs=2))
        t = p.ground(p.program.sample_inputs(rng), zbar)
        want = read_numseq(normalize(t)[0])
        for k in range(3):
            got = read_numseq(normalize(t, "random", rng=random.Random(k))[0])
            np.testing.assert_allclose(flatten(got), flatten(want), rtol=1e-12, atol=1e-12)

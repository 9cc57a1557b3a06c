import random

import pytest
from hypothesis import given, settings, strategies as st

from llad import types as ty
from llad.corpus import random_program
from llad.errors import DegreeOverflow, TypeMismatch
from llad.quantitative import (
    DArrow, decorate, env_add, env_scale, erase, qcheck, qsubject_reduction_check, show_dtype,
)
from llad.surface import parse_term, parse_type
from llad.terms import BangVar
from llad.typecheck import infer

from support import build, sample

R = ty.REAL
RR = ty.Arrow(R, R)


class TestDegrees:
    def test_decorate_and_erase(self):
        a = parse_type("(R -o R) -o R")
        d = decorate(a, 3)
        assert show_dtype(d) == "(R -o^3 R) -o^3 R"
        assert erase(d) == a

    def test_scale_skips_immune_entries(self):
        d = {"x": (1, R), "f": (2, RR), "h": (1, ty.Bang(RR))}
        assert env_scale(3, d) == {"x": (1, R), "f": (6, RR), "h": (1, ty.Bang(RR))}

    def test_add_sums_and_keeps_one_sided(self):
        assert env_add({"f": (1, RR)}, {"f": (2, RR), "g": (1, R)}) == {"f": (3, RR), "g": (1, R)}
        assert env_add({"x": (1, R)}, {"x": (1, R)}) == {"x": (1, R)}


class TestQCheck:
    def test_copy_of_sum(self):
        j = qcheck(None, parse_term("(lam x : R . <x, x>) (dot+ <3.0, 2.0>)"))
        assert j.m == 1
        assert j.additive_uses == {"x": 2}
        assert j.safe

    def test_identity(self):
        j = qcheck(None, parse_term("lam x : R . x"))
        assert (j.m, show_dtype(j.ty)) == (0, "R -o^1 R")

    def test_plus(self):
        j = qcheck(None, parse_term("dot+"))
        assert (j.m, show_dtype(j.ty)) == (1, "R & R -o^1 R")

    def test_function_argument_copied(self):
        j = qcheck(None, parse_term("lam f : R -o R . <f 1.0, f 2.0>"))
        assert show_dtype(j.ty) == "(R -o^1 R) -o^2 R & R"
        assert j.additive_uses == {"f": 2}

    def test_tensor_takes_single_copy(self):
        assert qcheck({"f": RR}, parse_term("(f 1.0, 2.0)")).degrees == {"f": 1}
        assert qcheck({"f": RR}, parse_term("<f 1.0, f 2.0>")).degrees == {"f": 2}

    def test_ground_variable_copies_free(self):
        assert qcheck({"x": R}, parse_term("<x, x>")).degrees == {"x": 1}

    def test_banged_scale(self):
        j = qcheck([BangVar("x", R)], parse_term("lam y : R . dot* x y"))
        assert j.degrees == {"x": 1} and j.m == 1

    def test_numerics_in_box_unsafe(self):
        j = qcheck(None, parse_term("!(dot+ <1.0, 2.0>)"))
        assert j.box_indices == [1]
        assert not j.safe

    def test_decoration_overflow(self):
        with pytest.raises(DegreeOverflow):
            qcheck({"f": (1, DArrow(R, R, 1))}, parse_term("<f 1.0, f 2.0>"))
        assert qcheck({"f": (2, DArrow(R, R, 1))}, parse_term("<f 1.0, f 2.0>")).m == 0

    def test_ill_typed_rejected(self):
        with pytest.raises(TypeMismatch):
            qcheck(None, parse_term("dot+ 1.0"))

    def test_json(self):
        js = qcheck(None, parse_term("lam x : R . <x, x>")).to_json()
        assert js["m"] == 0 and js["safe"] is True
        assert js["binder_degrees"][0]["uses"] == {"x": 2}


class TestReduction:
    def test_copy_of_sum(self):
        r = qsubject_reduction_check(parse_term("(lam x : R . <x, x>) (dot+ <3.0, 2.0>)"))
        assert r.indices == [1, 0, 0]
        assert [k.value for k in r.kinds] == ["beta-plus", "beta-lam"]
        assert r.ok and r.numeric_steps == 1
        assert r.normal_form == parse_term("<5.0, 5.0>")


def _ground(seed):
    rng = random.Random(seed)
    p = build(random_program(rng))
    return p.ground(sample(p, rng), rng.uniform(-1, 1))


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_erasure_coherent(self, seed):
        rng = random.Random(seed)
        p = build(random_program(rng))
        for m in (p.F, p.U, p.TU):
            assert erase(qcheck(p.benv, m).ty) == infer(p.benv, m)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_index_bounds_numeric_steps(self, seed):
        r = qsubject_reduction_check(_ground(seed))
        assert r.ok, r.violations
        assert r.numeric_steps <= r.indices[0]
        assert all(a >= b for a, b in zip(r.indices, r.indices[1:]))

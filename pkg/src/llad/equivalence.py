"""Sampled extensional equivalence and a finite-difference gradient.

Closed terms of a sequence type are compared by normalizing them to
numeral sequences. Functions between sequence types are compared on random
inputs, which can refute equivalence but never prove it.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import types as ty
from .errors import IllTyped, LladError
from .evaluator import normalize
from .terms import App, Bang, Lam, Num, Pair, Term, Top, Unit, WithPair
from .translation import numseq_value, read_numseq
from .types import Type

SAMPLE_RANGE = (-2.0, 2.0)


def tolerance(value: float) -> float:
    return max(1e-9, 1e-6 * abs(value))


def flatten(v: Any) -> list[float]:
    if isinstance(v, (tuple, list, np.ndarray)):
        return [x for c in v for x in flatten(c)]
    if v is None or v == ():
        return []
    return [float(v)]


def close(a: Any, b: Any, tol: Callable[[float], float] = tolerance) -> bool:
    fa, fb = flatten(a), flatten(b)
    if len(fa) != len(fb):
        return False
    for x, y in zip(fa, fb):
        if math.isnan(x) or math.isnan(y):
            if not (math.isnan(x) and math.isnan(y)):
                return False
        elif x != y and abs(x - y) > tol(max(abs(x), abs(y))):
            return False
    return True


def _is_seq(a: Type) -> bool:
    return ty.is_with_seq(a) or ty.is_tensor_seq(a)


def _typecheck(m: Term, a: Type) -> None:
    from .typecheck import check
    try:
        check([], m, a)
    except LladError as e:
        raise IllTyped(f"{m} does not have type {ty.show_type(a)}: {e}") from e


def value_of(m: Term, strategy: str = "safe") -> Any:
    nf, _ = normalize(m, strategy)
    return read_numseq(nf)


def eq_at_seq_type(m: Term, n: Term, a: Type, strategy: str = "safe") -> bool:
    """Closed ``m`` and ``n`` of sequence type ``a`` reduce to the same numerals."""
    if not _is_seq(a):
        raise IllTyped(f"not a sequence type: {ty.show_type(a)}")
    _typecheck(m, a)
    _typecheck(n, a)
    return close(value_of(m, strategy), value_of(n, strategy))


def random_numseq(a: Type, rng: random.Random) -> Any:
    match a:
        case ty.Real():
            return rng.uniform(*SAMPLE_RANGE)
        case ty.Unit() | ty.Top():
            return ()
        case ty.Bang(b):
            return random_numseq(b, rng)
        case ty.Tensor(l, r) | ty.With(l, r):
            return (random_numseq(l, rng), random_numseq(r, rng))
    raise IllTyped(f"not a sequence type: {ty.show_type(a)}")


@dataclass
class Verdict:
    equal_on_samples: bool
    trials: int
    seed: int
    counterexample: Any = None
    outputs: tuple[Any, Any] | None = None
    samples: list[Any] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"verdict": "equal_on_samples" if self.equal_on_samples else "counterexample",
                "trials": self.trials, "seed": self.seed,
                "counterexample": self.counterexample,
                "outputs": list(self.outputs) if self.outputs else None}


def eq_at_fun_type(m: Term, n: Term, a: Type, trials: int = 100, seed: int = 0,
                   strategy: str = "safe") -> Verdict:
    """Apply both functions to ``trials`` random inputs and compare."""
    if not isinstance(a, ty.Arrow) or not _is_seq(a.dom) or not _is_seq(a.cod):
        raise IllTyped(f"not a function between sequence types: {ty.show_type(a)}")
    _typecheck(m, a)
    _typecheck(n, a)
    rng = random.Random(seed)
    samples = []
    for _ in range(trials):
        s = random_numseq(a.dom, rng)
        samples.append(s)
        arg = numseq_value(s, a.dom)
        u, v = value_of(App(m, arg), strategy), value_of(App(n, arg), strategy)
        if not close(u, v):
            return Verdict(False, trials, seed, s, (u, v), samples)
    return Verdict(True, trials, seed, samples=samples)


def finite_diff_grad(g: Callable[[np.ndarray], float], point: Sequence[float],
                     h: float = 1e-6) -> np.ndarray:
    """Central differences ``(g(x + h e_i) - g(x - h e_i)) / 2h``."""
    x = np.asarray(point, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (g(x + e) - g(x - e)) / (2 * h)
    return out


def exact(t: Term) -> Term:
    """Replace every numeral by the rational it denotes.

    Linear maps built from ``+.`` and ``*.`` then evaluate without rounding,
    so two expressions of the same linear map agree exactly."""
    match t:
        case Num(v):
            return Num(Fraction(v))
        case Lam(p, b):
            return Lam(p, exact(b))
        case App(f, a):
            return App(exact(f), exact(a))
        case Pair(a, b):
            return Pair(exact(a), exact(b))
        case WithPair(a, b):
            return WithPair(exact(a), exact(b))
        case Bang(b):
            return Bang(exact(b))
    return t


def read_exact(t: Term) -> Any:
    """A normal form as nested tuples of ``Fraction``."""
    match t:
        case Num(v):
            return Fraction(v)
        case Unit() | Top():
            return ()
        case Bang(b):
            return read_exact(b)
        case Pair(a, b) | WithPair(a, b):
            return (read_exact(a), read_exact(b))
    raise IllTyped(f"not a numeral sequence: {t}")

"""Denotational semantics of Linear A as a direct recursive interpreter.

Vectors (numeral sequences) are nested Python tuples: a float for ``R``,
``()`` for ``1`` and a pair ``(a, b)`` for a tensor.
"""

from __future__ import annotations

from typing import Any

from ..errors import ShapeMismatch
from ..terms import REGISTRY
from .ast import (
    Drop, Dup, Expr, JOne, JReal, JTensor, JType, Let, LetPT, LetT, LetTupP, LetTupP0, LetTupT,
    LetTupT0, Lit, PT, PVar, PairE, Prim, Scale, TAdd, TVar, TupP, TupP0, TupPE, TupT, TupT0,
    TupTE, Zero,
)

Vec = Any


def zeros(t: JType) -> Vec:
    match t:
        case JReal():
            return 0.0
        case JOne():
            return ()
        case JTensor(a, b):
            return (zeros(a), zeros(b))
    raise TypeError(t)


def vadd(a: Vec, b: Vec) -> Vec:
    if isinstance(a, float) and isinstance(b, float):
        return a + b
    if isinstance(a, tuple) and isinstance(b, tuple) and len(a) == len(b):
        return tuple(vadd(x, y) for x, y in zip(a, b))
    raise ShapeMismatch(f"cannot add {a!r} and {b!r}")


def vscale(r: float, a: Vec) -> Vec:
    if isinstance(a, float):
        return r * a
    return tuple(vscale(r, x) for x in a)


def flatten(v: Vec) -> list[float]:
    if isinstance(v, float):
        return [v]
    return [x for part in v for x in flatten(part)]


def unflatten(t: JType, xs: list[float]) -> Vec:
    """Inverse of ``flatten`` for a value of type ``t``."""
    it = iter(xs)

    def go(u: JType) -> Vec:
        match u:
            case JReal():
                return float(next(it))
            case JOne():
                return ()
            case JTensor(a, b):
                return (go(a), go(b))
        raise TypeError(u)

    out = go(t)
    if next(it, None) is not None:
        raise ShapeMismatch("too many scalars")
    return out


def check_shape(v: Vec, t: JType) -> None:
    match t:
        case JReal() if isinstance(v, (float, int)) and not isinstance(v, bool):
            return
        case JOne() if v == ():
            return
        case JTensor(a, b) if isinstance(v, tuple) and len(v) == 2:
            check_shape(v[0], a)
            check_shape(v[1], b)
            return
    raise ShapeMismatch(f"value {v!r} does not match type {t}")


def dot(a: Vec, b: Vec) -> float:
    fa, fb = flatten(a), flatten(b)
    if len(fa) != len(fb):
        raise ShapeMismatch("dot product of different shapes")
    return sum(x * y for x, y in zip(fa, fb))


def _pair(v: Vec, where: Expr) -> tuple[Vec, Vec]:
    if not (isinstance(v, tuple) and len(v) == 2):
        raise ShapeMismatch(f"expected a pair in {where}, got {v!r}")
    return v


def jax_eval(e: Expr, r: dict[str, Vec] | None = None,
             s: dict[str, Vec] | None = None) -> tuple[Vec, Vec]:
    """Return the primal and tangent results of ``e`` under ``r`` and ``s``."""
    r = {} if r is None else r
    s = {} if s is None else s

    def look(env: dict[str, Vec], x: str, where: Expr) -> Vec:
        try:
            return env[x]
        except KeyError:
            raise ShapeMismatch(f"no value for {x} in {where}") from None

    match e:
        case PT(x, dy):
            return look(r, x, e), look(s, dy, e)
        case LetPT(x, dy, e1, e2):
            a, b = jax_eval(e1, r, s)
            return jax_eval(e2, {**r, x: a}, {**s, dy: b})
        case TupP0() | TupT0():
            return (), ()
        case TupP(x1, x2):
            return (look(r, x1, e), look(r, x2, e)), ()
        case LetTupP0(_, body) | LetTupT0(_, body):
            return jax_eval(body, r, s)
        case LetTupP(x1, x2, z, body):
            a, b = _pair(look(r, z, e), e)
            return jax_eval(body, {**r, x1: a, x2: b}, s)
        case TupT(a, b):
            return (), (look(s, a, e), look(s, b, e))
        case LetTupT(a1, a2, dz, body):
            a, b = _pair(look(s, dz, e), e)
            return jax_eval(body, r, {**s, a1: a, a2: b})
        case Lit(v):
            return float(v), ()
        case Prim(f, args):
            return float(REGISTRY[f].impl(*(look(r, x, e) for x in args))), ()
        case Zero(t):
            return (), zeros(t)
        case TAdd(a, b):
            return (), vadd(look(s, a, e), look(s, b, e))
        case Scale(x, dy):
            return (), vscale(look(r, x, e), look(s, dy, e))
        case Dup(dx):
            v = look(s, dx, e)
            return (), (v, v)
        case Drop(body):
            jax_eval(body, r, s)
            return (), ()
        case PVar(x):
            return look(r, x, e), ()
        case TVar(dx):
            return (), look(s, dx, e)
        case Let(x, e1, e2):
            a, _ = jax_eval(e1, r, s)
            return jax_eval(e2, {**r, x: a}, s)
        case LetT(dy, e1, e2):
            _, b = jax_eval(e1, r, s)
            return jax_eval(e2, r, {**s, dy: b})
        case PairE(e1, e2):
            return jax_eval(e1, r, s)[0], jax_eval(e2, r, s)[1]
        case TupPE(e1, e2):
            return (jax_eval(e1, r, s)[0], jax_eval(e2, r, s)[0]), ()
        case TupTE(e1, e2):
            return (), (jax_eval(e1, r, s)[1], jax_eval(e2, r, s)[1])
    raise TypeError(f"not a Linear A expression: {e!r}")

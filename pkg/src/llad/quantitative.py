"""Graded typing: workload indices and additive degrees.

A judgment ``D ⊢^m M : A`` records how many numeric operations ``m`` the
term may perform outside boxes, counting an argument once per additive
copy the function may make of it. Arrows carry that copy bound ``k``;
environments map each variable to its degree. Ground and banged variables
always have degree 1, since copying them is free.

The checker synthesizes the least degrees: for each binder it counts the
additive branches its variables flow into (``⟨M, N⟩`` adds, an argument
position multiplies by the callee's degree, tensor components take the
maximum).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import types as ty
from .errors import DegreeOverflow, TypeCheckError
from .evaluator import StepKind, step_safe
from .terms import (
    App, Bang, BangVar, DotPlus, DotTimes, Fun, Lam, Num, Pair, Pattern, Term, Top, Unit, Var,
    WithPair, fun_type, pattern_bindings, pattern_erasure_types, pattern_type, pattern_vars,
)
from .types import Type

DEFAULT_CAP = 2 ** 20


@dataclass(frozen=True)
class DArrow(ty.Arrow):
    """``A ⊸^k B``."""
    k: int = 1


def decorate(a: Type, k: int = 1) -> Type:
    """Decorate every arrow of ``a`` with degree ``k``."""
    match a:
        case ty.Arrow(d, c):
            return DArrow(decorate(d, k), decorate(c, k), getattr(a, "k", k))
        case ty.Tensor(l, r):
            return ty.Tensor(decorate(l, k), decorate(r, k))
        case ty.With(l, r):
            return ty.With(decorate(l, k), decorate(r, k))
        case ty.Bang(b):
            return ty.Bang(decorate(b, k))
    return a


def erase(a: Type) -> Type:
    """Forget the degrees."""
    match a:
        case ty.Arrow(d, c):
            return ty.Arrow(erase(d), erase(c))
        case ty.Tensor(l, r):
            return ty.Tensor(erase(l), erase(r))
        case ty.With(l, r):
            return ty.With(erase(l), erase(r))
        case ty.Bang(b):
            return ty.Bang(erase(b))
    return a


def show_dtype(a: Type, prec: int = 0) -> str:
    match a:
        case ty.Arrow(d, c):
            s = f"{show_dtype(d, 1)} -o^{getattr(a, 'k', 1)} {show_dtype(c)}"
            return f"({s})" if prec > 0 else s
        case ty.Tensor(l, r) | ty.With(l, r):
            op = "*" if isinstance(a, ty.Tensor) else "&"
            s = f"{show_dtype(l, 2)} {op} {show_dtype(r, 2)}"
            return f"({s})" if prec > 1 else s
        case ty.Bang(b):
            return "!" + show_dtype(b, 3)
    return ty.show_type(a)


def _immune(a: Type) -> bool:
    return isinstance(a, ty.Bang) or ty.is_ground(erase(a))


# --------------------------------------------------------------- decorations


Decoration = dict[str, tuple[int, Type]]


def env_scale(k: int, d: Mapping[str, tuple[int, Type]]) -> Decoration:
    """``k ⊛ D``."""
    return {x: (1 if _immune(a) else k * kx, a) for x, (kx, a) in d.items()}


def env_add(d1: Mapping[str, tuple[int, Type]], d2: Mapping[str, tuple[int, Type]]
            ) -> Decoration:
    """``D1 ⊞ D2``; entries present on one side only are kept."""
    out = dict(d1)
    for x, (k2, a) in d2.items():
        if x in out:
            k1 = out[x][0]
            out[x] = (1 if _immune(a) else k1 + k2, a)
        else:
            out[x] = (k2, a)
    return out


# ------------------------------------------------------------------- checker


@dataclass
class QJudgment:
    m: int
    ty: Type
    degrees: dict[str, int]
    binders: list[tuple[Pattern, int, dict[str, int]]] = field(default_factory=list)
    box_indices: list[int] = field(default_factory=list)

    @property
    def safe(self) -> bool:
        """Every box has index 0."""
        return all(m == 0 for m in self.box_indices)

    @property
    def additive_uses(self) -> dict[str, int]:
        """Raw additive use count of every bound variable, before clamping."""
        out: dict[str, int] = {}
        for _, _, uses in self.binders:
            out.update(uses)
        return out

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "decorated_type": show_dtype(self.ty),
            "degrees": self.degrees,
            "binder_degrees": [{"pattern": str(p), "k": k, "uses": u}
                               for p, k, u in self.binders],
            "safe": self.safe,
        }


class _Q:
    def __init__(self, cap: int):
        self.cap = cap
        self.binders: list[tuple[Pattern, int, dict[str, int]]] = []
        self.boxes: list[int] = []

    def go(self, t: Term, env: dict[str, Type]) -> tuple[int, Type, dict[str, int]]:
        match t:
            case Var(n):
                if n not in env:
                    raise TypeCheckError(f"unbound variable {n}")
                return 0, env[n], {n: 1}
            case Num():
                return 0, ty.REAL, {}
            case Unit():
                return 0, ty.UNIT, {}
            case Top():
                return 0, ty.TOP, {}
            case Fun(s):
                return 1, decorate(fun_type(s)), {}
            case DotPlus():
                return 1, DArrow(ty.With(ty.REAL, ty.REAL), ty.REAL, 1), {}
            case DotTimes():
                return 1, DArrow(ty.REAL, DArrow(ty.REAL, ty.REAL, 1), 1), {}
            case Bang(b):
                m, a, deg = self.go(b, env)
                self.boxes.append(m)
                return m, ty.Bang(a), deg
            case Pair(a, b) | WithPair(a, b):
                m1, t1, d1 = self.go(a, env)
                m2, t2, d2 = self.go(b, env)
                cons = ty.Tensor if isinstance(t, Pair) else ty.With
                return m1 + m2, cons(t1, t2), _sum(d1, d2)
            case Lam(p, body):
                inner = {**env, **{x: decorate(a) for x, a in pattern_bindings(p).items()}}
                m, b, deg = self.go(body, inner)
                names = pattern_vars(p)
                uses = {x: deg.get(x, 0) for x in names}
                types = pattern_bindings(p)
                k = max([1] + [uses[x] for x in names if not _immune(types[x])])
                if isinstance(p, BangVar):
                    k = 1
                if k > self.cap:
                    raise DegreeOverflow(f"pattern {p} needs degree {k} > {self.cap}")
                self.binders.append((p, k, uses))
                erased = sum(ty.type_workload(a) for x, a in pattern_erasure_types(p).items()
                             if x not in body.fv)
                out = {x: d for x, d in deg.items() if x not in names}
                return m + erased, DArrow(decorate(pattern_type(p)), b, k), out
            case App(f, a):
                m1, tf, d1 = self.go(f, env)
                m2, _, d2 = self.go(a, env)
                if not isinstance(tf, ty.Arrow):
                    raise TypeCheckError(f"applying a non-function: {f}")
                k = getattr(tf, "k", 1)
                return m1 + k * m2, tf.cod, _sum(d1, {x: k * d for x, d in d2.items()})
        raise TypeCheckError(f"cannot grade {t!r}")


def _sum(a: dict[str, int], b: dict[str, int]) -> dict[str, int]:
    out = dict(a)
    for x, d in b.items():
        out[x] = out.get(x, 0) + d
    return out


def _as_decoration(d) -> tuple[list[Pattern], Decoration | None]:
    from .typecheck import env_from_types
    if d is None:
        return [], None
    if isinstance(d, list):
        return d, None
    items = list(d.items())
    if items and isinstance(items[0][1], tuple):
        return env_from_types({x: erase(a) for x, (_, a) in items}), dict(d)
    return env_from_types(dict(d)), None


def qcheck(d, t: Term, cap: int = DEFAULT_CAP, typed: bool = False) -> QJudgment:
    """Grade ``t`` under a decoration.

    ``d`` is a decoration ``{x: (k, A)}``, a plain environment
    ``{x: A}`` / list of patterns, or ``None`` for closed terms. The term must
    typecheck qualitatively first; the free variables are then checked
    against the degrees the decoration allows. ``typed`` skips the
    qualitative check for callers that have just done it."""
    from .typecheck import infer
    env_pats, decoration = _as_decoration(d)
    if not typed:
        infer(env_pats, t)
    env: dict[str, Type] = {}
    for p in env_pats:
        env.update({x: decorate(a) for x, a in pattern_bindings(p).items()})
    if decoration:
        env.update({x: a for x, (_, a) in decoration.items()})
    q = _Q(cap)
    m, a, deg = q.go(t, env)
    degrees = {x: (1 if _immune(env[x]) else max(1, k)) for x, k in deg.items()}
    if decoration:
        for x, k in degrees.items():
            if x in decoration and k > decoration[x][0]:
                raise DegreeOverflow(f"{x} is copied {k} times, decoration allows "
                                     f"{decoration[x][0]}")
    return QJudgment(m, a, degrees, q.binders, q.boxes)


# ------------------------------------------------------- reduction behaviour


@dataclass
class QReductionReport:
    indices: list[int]
    kinds: list[StepKind]
    violations: list[str]
    normal_form: Term

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def numeric_steps(self) -> int:
        return sum(k.is_numeric for k in self.kinds)

    def to_json(self) -> dict:
        return {"indices": self.indices, "kinds": [k.value for k in self.kinds],
                "numeric_steps": self.numeric_steps, "ok": self.ok,
                "violations": self.violations}


def qsubject_reduction_check(t: Term, env=None, fuel: int = 100_000) -> QReductionReport:
    """Replay safe reduction, retyping and regrading after every step. The
    type must stay the same, the index may never grow and must drop on
    numeric steps; the number of numeric steps may not exceed the starting
    index."""
    from .typecheck import infer
    env_pats, _ = _as_decoration(env)
    start = infer(env_pats, t)
    j = qcheck(env, t)
    indices, kinds, violations = [j.m], [], []
    for _ in range(fuel):
        nxt = step_safe(t)
        if nxt is None:
            break
        t, kind = nxt
        a = infer(env_pats, t)
        if a != start:
            violations.append(f"step {len(kinds) + 1} ({kind.value}): type changed "
                              f"{ty.show_type(start)} -> {ty.show_type(a)}")
        m = qcheck(env, t, typed=True).m
        if m > indices[-1]:
            violations.append(f"step {len(kinds) + 1} ({kind.value}): index grew "
                              f"{indices[-1]} -> {m}")
        elif kind.is_numeric and m == indices[-1]:
            violations.append(f"step {len(kinds) + 1} ({kind.value}): numeric step kept "
                              f"index {m}")
        indices.append(m)
        kinds.append(kind)
    report = QReductionReport(indices, kinds, violations, t)
    if report.numeric_steps > indices[0]:
        violations.append(f"{report.numeric_steps} numeric steps exceed index {indices[0]}")
    return report


__all__ = [
    "DArrow", "DEFAULT_CAP", "Decoration", "QJudgment", "QReductionReport", "decorate",
    "env_add", "env_scale", "erase", "qcheck", "qsubject_reduction_check", "show_dtype",
]

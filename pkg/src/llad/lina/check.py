"""Typing of Linear A expressions and the workload W^Jax.

Variables are Church-typed: bound variables get the type of their binder,
free ones are given by the caller or inferred from use by unification
(anything left open defaults to ``R``). Primal contexts combine by union;
tangent contexts must be disjoint and every bound tangent is consumed
exactly once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..errors import SortError, TangentLinearityViolation, TypeMismatch
from ..terms import REGISTRY
from .ast import (
    Drop, Dup, Expr, JOne, JReal, JTensor, JType, Let, LetPT, LetT, LetTupP, LetTupP0, LetTupT,
    LetTupT0, Lit, ONE, PT, PVar, PairE, Prim, R, Scale, TAdd, TVar, TupP, TupP0, TupPE, TupT,
    TupT0, TupTE, Zero, is_tangent_name, jtype_workload, subexprs,
)


@dataclass(frozen=True)
class _Meta(JType):
    ident: int


@dataclass
class JaxJudgment:
    primal_env: dict[str, JType]
    tangent_env: dict[str, JType]
    subject: Expr
    primal_type: JType
    tangent_type: JType
    # types of every sub-expression, keyed by id()
    types: dict[int, tuple[JType, JType]] = field(default_factory=dict, repr=False)
    binders: dict[str, JType] = field(default_factory=dict, repr=False)

    def type_of(self, e: Expr) -> tuple[JType, JType]:
        return self.types[id(e)]

    def __str__(self) -> str:
        g = ", ".join(f"{x} : {t}" for x, t in self.primal_env.items())
        d = ", ".join(f"{x} : {t}" for x, t in self.tangent_env.items())
        return f"{g}; {d} |- {self.subject} : ({self.primal_type}; {self.tangent_type})"


class _Checker:
    def __init__(self, ptypes: dict[str, JType], ttypes: dict[str, JType]):
        self.subst: dict[int, JType] = {}
        self.ids = itertools.count()
        self.free_p: dict[str, JType] = dict(ptypes)
        self.free_t: dict[str, JType] = dict(ttypes)
        self.types: dict[int, tuple[JType, JType]] = {}
        self.binders: dict[str, JType] = {}
        self.keep: list[Expr] = []

    def meta(self) -> JType:
        return _Meta(next(self.ids))

    def resolve(self, t: JType) -> JType:
        while isinstance(t, _Meta) and t.ident in self.subst:
            t = self.subst[t.ident]
        return t

    def zonk(self, t: JType, default: bool = True) -> JType:
        t = self.resolve(t)
        match t:
            case JTensor(a, b):
                return JTensor(self.zonk(a, default), self.zonk(b, default))
            case _Meta():
                if default:
                    self.subst[t.ident] = R
                    return R
        return t

    def occurs(self, m: _Meta, t: JType) -> bool:
        t = self.resolve(t)
        if t == m:
            return True
        return isinstance(t, JTensor) and (self.occurs(m, t.left) or self.occurs(m, t.right))

    def unify(self, a: JType, b: JType, where: Expr) -> None:
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return
        if isinstance(a, _Meta):
            if self.occurs(a, b):
                raise TypeMismatch(f"infinite type in {where}")
            self.subst[a.ident] = b
            return
        if isinstance(b, _Meta):
            self.unify(b, a, where)
            return
        if isinstance(a, JTensor) and isinstance(b, JTensor):
            self.unify(a.left, b.left, where)
            self.unify(a.right, b.right, where)
            return
        raise TypeMismatch(f"expected {self.zonk(a, False)} but found {self.zonk(b, False)} in {where}")

    def pvar(self, x: str, scope: dict[str, JType], where: Expr) -> JType:
        if is_tangent_name(x):
            raise SortError(f"tangent variable {x} in primal position in {where}")
        if x in scope:
            return scope[x]
        if x not in self.free_p:
            self.free_p[x] = self.meta()
        return self.free_p[x]

    def tvar(self, x: str, scope: dict[str, JType], where: Expr) -> JType:
        if not is_tangent_name(x):
            raise SortError(f"primal variable {x} in tangent position in {where}")
        if x in scope:
            return scope[x]
        if x not in self.free_t:
            self.free_t[x] = self.meta()
        return self.free_t[x]

    def bind_p(self, x: str, where: Expr) -> None:
        if is_tangent_name(x):
            raise SortError(f"tangent variable {x} bound in primal position in {where}")

    def bind_t(self, x: str, where: Expr) -> None:
        if not is_tangent_name(x):
            raise SortError(f"primal variable {x} bound in tangent position in {where}")

    @staticmethod
    def join(a: frozenset[str], b: frozenset[str], where: Expr) -> frozenset[str]:
        both = a & b
        if both:
            raise TangentLinearityViolation(
                f"tangent variables {sorted(both)} used more than once in {where}")
        return a | b

    @staticmethod
    def consume(used: frozenset[str], names: tuple[str, ...], where: Expr) -> frozenset[str]:
        missing = [n for n in names if n not in used]
        if missing:
            raise TangentLinearityViolation(
                f"bound tangent variables {missing} are never used in {where}")
        return used - set(names)

    def infer(self, e: Expr, ps: dict[str, JType], ts: dict[str, JType]):
        """Return (primal type, tangent type, used tangent variables)."""
        tp, tt, used = self._infer(e, ps, ts)
        self.types[id(e)] = (tp, tt)
        self.keep.append(e)
        return tp, tt, used

    def _infer(self, e: Expr, ps, ts):
        match e:
            case PT(x, dy):
                return self.pvar(x, ps, e), self.tvar(dy, ts, e), frozenset({dy})
            case LetPT(x, dy, e1, e2):
                self.bind_p(x, e)
                self.bind_t(dy, e)
                t1, s1, u1 = self.infer(e1, ps, ts)
                self.binders[x], self.binders[dy] = t1, s1
                t2, s2, u2 = self.infer(e2, {**ps, x: t1}, {**ts, dy: s1})
                return t2, s2, self.join(u1, self.consume(u2, (dy,), e), e)
            case TupP0() | TupT0():
                return ONE, ONE, frozenset()
            case TupP(x1, x2):
                return JTensor(self.pvar(x1, ps, e), self.pvar(x2, ps, e)), ONE, frozenset()
            case LetTupP0(z, body):
                self.unify(self.pvar(z, ps, e), ONE, e)
                return self.infer(body, ps, ts)
            case LetTupP(x1, x2, z, body):
                self.bind_p(x1, e)
                self.bind_p(x2, e)
                a, b = self.meta(), self.meta()
                self.unify(self.pvar(z, ps, e), JTensor(a, b), e)
                self.binders[x1], self.binders[x2] = a, b
                return self.infer(body, {**ps, x1: a, x2: b}, ts)
            case TupT(a, b):
                if a == b:
                    raise TangentLinearityViolation(f"{a} used twice in {e}")
                return ONE, JTensor(self.tvar(a, ts, e), self.tvar(b, ts, e)), frozenset({a, b})
            case LetTupT0(dz, body):
                self.unify(self.tvar(dz, ts, e), ONE, e)
                tp, tt, u = self.infer(body, ps, ts)
                return tp, tt, self.join(frozenset({dz}), u, e)
            case LetTupT(a1, a2, dz, body):
                self.bind_t(a1, e)
                self.bind_t(a2, e)
                if a1 == a2:
                    raise TangentLinearityViolation(f"{a1} bound twice in {e}")
                a, b = self.meta(), self.meta()
                self.unify(self.tvar(dz, ts, e), JTensor(a, b), e)
                self.binders[a1], self.binders[a2] = a, b
                tp, tt, u = self.infer(body, ps, {**ts, a1: a, a2: b})
                return tp, tt, self.join(frozenset({dz}), self.consume(u, (a1, a2), e), e)
            case Lit():
                return R, ONE, frozenset()
            case Prim(f, args):
                if f not in REGISTRY:
                    raise TypeMismatch(f"unknown function {f}")
                if len(args) != REGISTRY[f].arity:
                    raise TypeMismatch(f"{f} expects {REGISTRY[f].arity} arguments in {e}")
                for x in args:
                    self.unify(self.pvar(x, ps, e), R, e)
                return R, ONE, frozenset()
            case Zero(t):
                return ONE, t, frozenset()
            case TAdd(a, b):
                if a == b:
                    raise TangentLinearityViolation(f"{a} used twice in {e}")
                ta = self.tvar(a, ts, e)
                self.unify(ta, self.tvar(b, ts, e), e)
                return ONE, ta, frozenset({a, b})
            case Scale(x, dy):
                self.unify(self.pvar(x, ps, e), R, e)
                return ONE, self.tvar(dy, ts, e), frozenset({dy})
            case Dup(dx):
                t = self.tvar(dx, ts, e)
                return ONE, JTensor(t, t), frozenset({dx})
            case Drop(body):
                _, _, u = self.infer(body, ps, ts)
                return ONE, ONE, u
            case PVar(x):
                return self.pvar(x, ps, e), ONE, frozenset()
            case TVar(dx):
                return ONE, self.tvar(dx, ts, e), frozenset({dx})
            case Let(x, e1, e2):
                self.bind_p(x, e)
                t1, s1, u1 = self.infer(e1, ps, ts)
                self.unify(s1, ONE, e1)
                self.binders[x] = t1
                t2, s2, u2 = self.infer(e2, {**ps, x: t1}, ts)
                return t2, s2, self.join(u1, u2, e)
            case LetT(dy, e1, e2):
                self.bind_t(dy, e)
                t1, s1, u1 = self.infer(e1, ps, ts)
                self.unify(t1, ONE, e1)
                self.binders[dy] = s1
                t2, s2, u2 = self.infer(e2, ps, {**ts, dy: s1})
                return t2, s2, self.join(u1, self.consume(u2, (dy,), e), e)
            case PairE(e1, e2):
                t1, s1, u1 = self.infer(e1, ps, ts)
                t2, s2, u2 = self.infer(e2, ps, ts)
                self.unify(s1, ONE, e1)
                self.unify(t2, ONE, e2)
                return t1, s2, self.join(u1, u2, e)
            case TupPE(e1, e2):
                t1, s1, u1 = self.infer(e1, ps, ts)
                t2, s2, u2 = self.infer(e2, ps, ts)
                self.unify(s1, ONE, e1)
                self.unify(s2, ONE, e2)
                return JTensor(t1, t2), ONE, self.join(u1, u2, e)
            case TupTE(e1, e2):
                t1, s1, u1 = self.infer(e1, ps, ts)
                t2, s2, u2 = self.infer(e2, ps, ts)
                self.unify(t1, ONE, e1)
                self.unify(t2, ONE, e2)
                return ONE, JTensor(s1, s2), self.join(u1, u2, e)
        raise TypeError(f"not a Linear A expression: {e!r}")


def jax_check(e: Expr, ptypes: dict[str, JType] | None = None,
              ttypes: dict[str, JType] | None = None) -> JaxJudgment:
    """Type ``e``. Raises SortError, TangentLinearityViolation or TypeMismatch."""
    c = _Checker(ptypes or {}, ttypes or {})
    tp, tt, used = c.infer(e, {}, {})
    extra = set(c.free_t) - used
    if ttypes and extra:
        raise TangentLinearityViolation(f"tangent variables {sorted(extra)} are never used")
    pe = {x: c.zonk(t) for x, t in c.free_p.items() if x in e.pfv}
    te = {x: c.zonk(t) for x, t in c.free_t.items() if x in used}
    types = {k: (c.zonk(a), c.zonk(b)) for k, (a, b) in c.types.items()}
    binders = {k: c.zonk(v) for k, v in c.binders.items()}
    return JaxJudgment(pe, te, e, c.zonk(tp), c.zonk(tt), types, binders)


# ------------------------------------------------------------------ workload


def jax_workload(e: Expr, judgment: JaxJudgment | None = None) -> int:
    """W^Jax: primitives and literals cost 1, linear operations cost one per
    scalar of their result, ``zero : s`` costs 1 + W(s) and ``drop(e)`` costs
    W(e) plus one per scalar in the output of ``e``."""
    j = judgment if judgment is not None else jax_check(e)

    def w(x: Expr) -> int:
        match x:
            case Lit() | Prim():
                own = 1
            case Zero(t):
                own = 1 + jtype_workload(t)
            case TAdd() | Scale():
                own = jtype_workload(j.type_of(x)[1])
            case Drop(b):
                tp, tt = j.type_of(b)
                own = jtype_workload(tp) + jtype_workload(tt)
            case _:
                own = 0
        return own + sum(w(s) for s in subexprs(x))

    return w(e)


def env_workload(env: dict[str, JType]) -> int:
    return sum(jtype_workload(t) for t in env.values())


def is_real(t: JType) -> bool:
    return isinstance(t, JReal)


def is_one(t: JType) -> bool:
    return isinstance(t, JOne)

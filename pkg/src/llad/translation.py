"""Encoding of Linear A into the linear calculus.

``delta`` maps a Linear A expression with primal inputs ``x_i`` and tangent
inputs ``theta`` to a term

    !x_1 : !p(t_1), ... |- delta(e) : !p(t) (x) §((&_i t(s_i)) -o t(s))

pairing the boxed primal result with an affine tangent function. ``delta_b``
does the same for Linear B, separating the pure primal and tangent parts.
The splitting and fusion terms ``sigma``/``sigma_bar`` regroup the additive
input of a tangent function; the identity instances are omitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any

from . import types as ty
from .errors import NotLinearB, ShapeMismatch, SortError, TypeMismatch
from .lina.ast import (
    Drop, Dup, Expr, JOne, JReal, JTensor, JType, Let, LetPT, LetT, LetTupP, LetTupP0, LetTupT,
    LetTupT0, Lit, PT, PVar, PairE, Prim, Scale, TAdd, TVar, TupP, TupP0, TupPE, TupT,
    TupT0, TupTE, Zero, all_names as lin_names, primal_order, rename_apart, tangent_order,
)
from .lina.check import JaxJudgment, jax_check
from .lina.desugar import desugar
from .lina.transforms import _is_d, is_primal, is_tangent
from .terms import (
    App, Bang, BangVar, DotPlus, DotTimes, FreshSupply, Fun, Lam, Num, Pair, Pattern, Term,
    TensorPat, Top, Unit, UnitPat, Var, VarPat, WithPair, WithPat, affine_pat, affine_term, dplus,
    dtimes, fun_call, let, substitute, with_pat, with_tuple,
)
from .types import Type

# ------------------------------------------------------------ type translations


def trans_primal_type(t: JType) -> Type:
    match t:
        case JReal():
            return ty.REAL
        case JOne():
            return ty.UNIT
        case JTensor(a, b):
            return ty.Tensor(ty.Bang(trans_primal_type(a)), ty.Bang(trans_primal_type(b)))
    raise TypeError(t)


def trans_tangent_type(t: JType | Type) -> Type:
    """Tangent type of a Linear A type or of a tensor-sequence type."""
    match t:
        case JReal() | ty.Real():
            return ty.REAL
        case JOne() | ty.Unit():
            return ty.TOP
        case JTensor(a, b) | ty.Tensor(ty.Bang(a), ty.Bang(b)):
            return ty.With(trans_tangent_type(a), trans_tangent_type(b))
    raise TypeError(f"no tangent type for {t}")


def numseq_value(v: Any, t: Type) -> Term:
    """Closed strong value of type ``t`` for the numeral sequence ``v``."""
    match t:
        case ty.Real() if isinstance(v, (int, float)) and not isinstance(v, bool):
            return Num(float(v))
        case ty.Unit() if v == ():
            return Unit()
        case ty.Top() if v == ():
            return Top()
        case ty.Bang(a):
            return Bang(numseq_value(v, a))
        case ty.Tensor(a, b) if isinstance(v, tuple) and len(v) == 2:
            return Pair(numseq_value(v[0], a), numseq_value(v[1], b))
        case ty.With(a, b) if isinstance(v, tuple) and len(v) == 2:
            return WithPair(numseq_value(v[0], a), numseq_value(v[1], b))
    raise ShapeMismatch(f"numeral sequence {v!r} does not fit type {t}")


def _guess_type(v: Any) -> Type:
    if isinstance(v, tuple) and len(v) == 2:
        return ty.Tensor(ty.Bang(_guess_type(v[0])), ty.Bang(_guess_type(v[1])))
    if v == ():
        return ty.UNIT
    return ty.REAL


def numseq_subst(t: Term, env: dict[str, Any], types: dict[str, Type] | None = None) -> Term:
    """Substitute numeral sequences for free variables.

    ``types`` gives the type each variable is used at; without it a pair is
    read as a primal tuple ``(!a, !b)``. Values that are already terms are
    substituted as they are."""
    types = types or {}
    sigma = {x: v if isinstance(v, Term) else numseq_value(v, types.get(x) or _guess_type(v))
             for x, v in env.items()}
    return substitute(t, sigma)


def read_numseq(t: Term) -> Any:
    """Inverse of ``numseq_value`` on first-order normal forms."""
    match t:
        case Num(v):
            return float(v)
        case Unit() | Top():
            return ()
        case Bang(b):
            return read_numseq(b)
        case Pair(a, b) | WithPair(a, b):
            return (read_numseq(a), read_numseq(b))
    raise ShapeMismatch(f"{t} is not a numeral sequence")


# ----------------------------------------------- additive helper terms


@lru_cache(maxsize=None)
def sigma(types: tuple[Type, ...], index: tuple[int, ...]) -> Term:
    """Splitting term &types -o (&types[index]) & (&rest), order preserved."""
    names = [f"s{i}" for i in range(len(types))]
    rest = [i for i in range(len(types)) if i not in index]
    return Lam(_with_binder(names, types),
               WithPair(with_tuple([Var(names[i]) for i in index]),
                        with_tuple([Var(names[i]) for i in rest])))


@lru_cache(maxsize=None)
def sigma_bar(types: tuple[Type, ...], index: tuple[int, ...]) -> Term:
    """Fusion term, the inverse of ``sigma(types, index)``."""
    names = [f"s{i}" for i in range(len(types))]
    rest = [i for i in range(len(types)) if i not in index]
    inner = WithPat(_with_binder([names[i] for i in index], [types[i] for i in index]),
                    _with_binder([names[i] for i in rest], [types[i] for i in rest]))
    return Lam(inner, with_tuple([Var(n) for n in names]))


def _with_binder(names: list[str], types) -> Pattern:
    if not names:
        return VarPat("s_", ty.TOP)
    return with_pat([VarPat(n, a) for n, a in zip(names, types)])


def sigma_is_identity(n: int, index: tuple[int, ...]) -> bool:
    return index == (0,) and n >= 2


def zero_of(h: Type) -> Term:
    match h:
        case ty.Real():
            return Num(0.0)
        case ty.Top():
            return Top()
        case ty.With(a, b):
            return WithPair(zero_of(a), zero_of(b))
    raise TypeError(f"not an additive sequence type: {h}")


class _Builder:
    """Shared fresh-name supply for the generated lambda-terms."""

    def __init__(self, avoid: set[str], supply: FreshSupply | None = None):
        self.supply = supply or FreshSupply(prefix="y", avoid=set(avoid))

    def fresh(self, base: str) -> str:
        return self.supply.fresh(base)

    def pattern_for(self, h: Type, base: str = "h") -> Pattern:
        """A with-pattern destructuring ``h`` down to its reals and units."""
        if isinstance(h, ty.With):
            return WithPat(self.pattern_for(h.left, base), self.pattern_for(h.right, base))
        return VarPat(self.fresh(base), h)

    def plus(self, h: Type, y: Term) -> Term:
        """``+_h y`` for ``y : h & h``."""
        if isinstance(h, ty.Real):
            return App(DotPlus(), y)
        a, b = self.pattern_for(h, "a"), self.pattern_for(h, "b")
        return App(Lam(WithPat(a, b), _sum_patterns(a, b)), y)

    def times(self, h: Type, x: Term, y: Term) -> Term:
        """``*_h x y``: scale every real of ``y : h`` by the real ``x``."""
        if isinstance(h, ty.Real):
            return dtimes(x, y)
        a = self.pattern_for(h, "a")
        return App(Lam(a, _scale_pattern(x, a)), y)


def pattern_term(p: Pattern) -> Term:
    """The value a with-pattern binds, rebuilt as a term."""
    match p:
        case VarPat(n, _):
            return Var(n)
        case WithPat(l, r):
            return WithPair(pattern_term(l), pattern_term(r))
    raise TypeError(f"not an additive pattern: {p}")


def _sum_patterns(a: Pattern, b: Pattern) -> Term:
    match a, b:
        case WithPat(a1, a2), WithPat(b1, b2):
            return WithPair(_sum_patterns(a1, b1), _sum_patterns(a2, b2))
        case VarPat(n, ty.Real()), VarPat(m, _):
            return dplus(Var(n), Var(m))
        case VarPat(), VarPat():
            return Top()
    raise TypeError(f"mismatched patterns {a} and {b}")


def _scale_pattern(x: Term, a: Pattern) -> Term:
    match a:
        case WithPat(l, r):
            return WithPair(_scale_pattern(x, l), _scale_pattern(x, r))
        case VarPat(n, ty.Real()):
            return dtimes(x, Var(n))
    return Top()


# ------------------------------------------------------------ term translation


@dataclass
class Translation:
    term: Term
    env: list[Pattern]
    type: Type
    theta: list[str]
    judgment: JaxJudgment

    @property
    def theta_types(self) -> list[Type]:
        return [trans_tangent_type(self.judgment.tangent_env[v]) for v in self.theta]


def _pair_type(p_tau: Type, h: Type, k: Type) -> Type:
    return ty.Tensor(ty.Bang(p_tau), ty.affine(ty.Arrow(h, k)))


class _Delta:
    def __init__(self, j: JaxJudgment, avoid: set[str]):
        self.j = j
        self.b = _Builder(avoid)
        self.ttypes = {**j.tangent_env, **{x: t for x, t in j.binders.items()
                                           if x.endswith("'")}}
        self.ptypes = {**j.primal_env, **{x: t for x, t in j.binders.items()
                                          if not x.endswith("'")}}

    # helpers
    def h(self, theta: list[str]) -> tuple[Type, ...]:
        return tuple(trans_tangent_type(self.ttypes[v]) for v in theta)

    def tt(self, dv: str) -> Type:
        return trans_tangent_type(self.ttypes[dv])

    def pt(self, x: str) -> Type:
        return trans_primal_type(self.ptypes[x])

    def lam(self, theta: list[str], body) -> Term:
        y = self.b.fresh("y")
        return Lam(VarPat(y, ty.with_tuple(list(self.h(theta)))), body(Var(y)))

    def split_theta(self, theta: list[str], part: list[str], y: Term, k) -> Term:
        """``let <y1, y2> = sigma_part y in k(y1, y2)``."""
        types = self.h(theta)
        index = tuple(theta.index(v) for v in part)
        rest = [v for v in theta if v not in part]
        a, b = self.b.fresh("y"), self.b.fresh("y")
        pat = WithPat(VarPat(a, ty.with_tuple([types[i] for i in index])),
                      VarPat(b, ty.with_tuple(list(self.h(rest)))))
        src = y if sigma_is_identity(len(types), index) else App(sigma(types, index), y)
        return let(pat, src, k(Var(a), Var(b)))

    def fuse(self, theta: list[str], lead: int, pair: Term) -> Term:
        """``sigma_bar`` for the first ``lead`` entries of ``theta``."""
        index = tuple(range(lead))
        if sigma_is_identity(len(theta), index):
            return pair
        return App(sigma_bar(self.h(theta), index), pair)

    def reorder(self, theta: list[str], want: list[str], y: Term) -> Term:
        """Additive tuple in ``want`` order from ``y`` in ``theta`` order."""
        if theta == want:
            return y
        return self.split_theta(theta, want, y, lambda a, _b: a)

    def bind_pair(self, x: str, f: str, tau: Type, f_type: Type, s: Term, r: Term) -> Term:
        pat = TensorPat(BangVar(x, tau), affine_pat(VarPat(f, f_type)))
        return let(pat, s, r)

    def result(self, p: Term, f: Term) -> Term:
        return Pair(p, affine_term(f))

    def fun_type(self, theta: list[str], sigma_t: JType) -> Type:
        return ty.Arrow(ty.with_tuple(list(self.h(theta))), trans_tangent_type(sigma_t))

    # Linear A, core forms only
    def delta(self, e: Expr, theta: list[str]) -> Term:
        j = self.j
        match e:
            case PT(x, _):
                return self.result(Bang(Var(x)), self.lam(theta, lambda y: y))
            case LetPT(x, dy, e1, e2):
                th1 = [v for v in theta if v in e1.tfv]
                th2 = [dy] + [v for v in theta if v in e2.tfv]
                tau1, s1 = j.type_of(e1)
                tau2, s2 = j.type_of(e2)
                f, g, z = self.b.fresh("f"), self.b.fresh("g"), self.b.fresh("z")
                body = self.lam(theta, lambda y: self.split_theta(
                    theta, th1, y, lambda y1, y2: App(Var(g), self.fuse(
                        th2, 1, WithPair(App(Var(f), y1), y2)))))
                inner = self.bind_pair(z, g, trans_primal_type(tau2), self.fun_type(th2, s2),
                                       self.delta(e2, th2), self.result(Bang(Var(z)), body))
                return self.bind_pair(x, f, trans_primal_type(tau1), self.fun_type(th1, s1),
                                      self.delta(e1, th1), inner)
            case TupP0() | TupT0():
                return self.result(Bang(Unit()), self.lam(theta, lambda y: Top()))
            case TupP(x1, x2):
                return self.result(Bang(Pair(Bang(Var(x1)), Bang(Var(x2)))),
                                   self.lam(theta, lambda y: Top()))
            case LetTupP0(z, body):
                return let(UnitPat(), Var(z), self.delta(body, theta))
            case LetTupP(x1, x2, z, body):
                pat = TensorPat(BangVar(x1, self.pt(x1)), BangVar(x2, self.pt(x2)))
                return let(pat, Var(z), self.delta(body, theta))
            case TupT(a, b):
                return self.result(Bang(Unit()), self.lam(
                    theta, lambda y: self.reorder(theta, [a, b], y)))
            case LetTupT0(dz, body):
                rest = [v for v in theta if v != dz]
                return self.delta_tuple_elim(e, body, theta, dz, [], rest, lambda w, y2: y2)
            case LetTupT(a1, a2, dz, body):
                rest = [v for v in theta if v != dz]
                th = [a1, a2] + rest
                return self.delta_tuple_elim(
                    e, body, theta, dz, [a1, a2], rest,
                    lambda w, y2: self.fuse(th, 2, WithPair(w, y2)))
            case Lit(r):
                return self.result(Bang(Num(float(r))), self.lam(theta, lambda y: Top()))
            case Prim(name, args):
                call = fun_call(name, *(Bang(Var(a)) for a in args))
                return self.result(call, self.lam(theta, lambda y: Top()))
            case Zero(s):
                return self.result(Bang(Unit()), self.lam(
                    theta, lambda y: zero_of(trans_tangent_type(s))))
            case TAdd(a, _):
                return self.result(Bang(Unit()), self.lam(
                    theta, lambda y: self.b.plus(self.tt(a), y)))
            case Scale(x, dy):
                return self.result(Bang(Unit()), self.lam(
                    theta, lambda y: self.b.times(self.tt(dy), Var(x), y)))
            case Dup(_):
                return self.result(Bang(Unit()), self.lam(theta, lambda y: WithPair(y, y)))
            case Drop(body):
                tau, s = j.type_of(body)
                x, f = self.b.fresh("x"), self.b.fresh("f")
                z = self.b.fresh("z")
                fn = self.lam(theta, lambda y: let(VarPat(z, trans_tangent_type(s)),
                                                   App(Var(f), y), Top()))
                return self.bind_pair(x, f, trans_primal_type(tau), self.fun_type(theta, s),
                                      self.delta(body, theta),
                                      self.result(Bang(Unit()), fn))
        raise TypeError(f"not a core Linear A expression: {e!r}")

    def delta_tuple_elim(self, e: Expr, body: Expr, theta: list[str], dz: str,
                         comps: list[str], rest: list[str], arg) -> Term:
        # let (!x, §f) = delta(body) in (!x, §(lam y. let <w, y'> = sigma_z y in f arg))
        tau, s = self.j.type_of(body)
        x, f = self.b.fresh("x"), self.b.fresh("f")
        inner = comps + rest
        fn = self.lam(theta, lambda y: self.split_theta(
            theta, [dz], y, lambda w, y2: App(Var(f), arg(w, y2))))
        return self.bind_pair(x, f, trans_primal_type(tau), self.fun_type(inner, s),
                              self.delta(body, inner), self.result(Bang(Var(x)), fn))

    # Linear B
    def primal(self, e: Expr) -> Term:
        match e:
            case PVar(x):
                return Bang(Var(x))
            case Let(x, e1, e2):
                return let(BangVar(x, self.pt(x)), self.primal(e1), self.primal(e2))
            case TupP0():
                return Bang(Unit())
            case TupP(a, b):
                return Bang(Pair(Bang(Var(a)), Bang(Var(b))))
            case TupPE(e1, e2):
                if _is_value(e1) and _is_value(e2):
                    return Bang(Pair(self.primal(e1), self.primal(e2)))
                # boxing a computation would put workload under the box
                a, b = self.b.fresh("a"), self.b.fresh("b")
                ta, tb = self.j.type_of(e1)[0], self.j.type_of(e2)[0]
                return let(BangVar(a, trans_primal_type(ta)), self.primal(e1),
                           let(BangVar(b, trans_primal_type(tb)), self.primal(e2),
                               Bang(Pair(Bang(Var(a)), Bang(Var(b))))))
            case LetTupP0(z, body):
                return let(UnitPat(), Var(z), self.primal(body))
            case LetTupP(x1, x2, z, body):
                pat = TensorPat(BangVar(x1, self.pt(x1)), BangVar(x2, self.pt(x2)))
                return let(pat, Var(z), self.primal(body))
            case Lit(r):
                return Bang(Num(float(r)))
            case Prim(name, args):
                return fun_call(name, *(Bang(Var(a)) for a in args))
            case Drop(body):
                x = self.b.fresh("x")
                tau = self.j.type_of(body)[0]
                return let(BangVar(x, trans_primal_type(tau)), self.primal(body), Bang(Unit()))
        raise NotLinearB(f"not a primal expression: {e}")

    def tangent(self, e: Expr, theta: list[str]) -> Term:
        j = self.j
        match e:
            case TVar(_):
                return self.lam(theta, lambda y: y)
            case LetT(dy, e1, e2):
                th1 = [v for v in theta if v in e1.tfv]
                th2 = [dy] + [v for v in theta if v in e2.tfv]
                f, g = self.b.fresh("f"), self.b.fresh("g")
                body = self.lam(theta, lambda y: self.split_theta(
                    theta, th1, y, lambda y1, y2: App(Var(g), self.fuse(
                        th2, 1, WithPair(App(Var(f), y1), y2)))))
                return self.let_affine(f, self.fun_type(th1, j.type_of(e1)[1]),
                                       self.tangent(e1, th1), self.let_affine(
                    g, self.fun_type(th2, j.type_of(e2)[1]), self.tangent(e2, th2), body))
            case TupT0():
                return self.lam(theta, lambda y: Top())
            case TupT(a, b):
                return self.lam(theta, lambda y: self.reorder(theta, [a, b], y))
            case TupTE(e1, e2):
                th1 = [v for v in theta if v in e1.tfv]
                th2 = [v for v in theta if v in e2.tfv]
                f, g = self.b.fresh("f"), self.b.fresh("g")
                body = self.lam(theta, lambda y: self.split_theta(
                    theta, th1, y, lambda y1, y2: WithPair(App(Var(f), y1), App(Var(g), y2))))
                return self.let_affine(f, self.fun_type(th1, j.type_of(e1)[1]),
                                       self.tangent(e1, th1), self.let_affine(
                    g, self.fun_type(th2, j.type_of(e2)[1]), self.tangent(e2, th2), body))
            case LetTupT0(dz, body):
                rest = [v for v in theta if v != dz]
                return self.tangent_tuple_elim(body, theta, dz, rest, lambda w, y2: y2)
            case LetTupT(a1, a2, dz, body):
                rest = [v for v in theta if v != dz]
                th = [a1, a2] + rest
                return self.tangent_tuple_elim(
                    body, theta, dz, th, lambda w, y2: self.fuse(th, 2, WithPair(w, y2)))
            case Dup(_):
                return self.lam(theta, lambda y: WithPair(y, y))
            case Zero(s):
                return self.lam(theta, lambda y: zero_of(trans_tangent_type(s)))
            case TAdd(a, _):
                return self.lam(theta, lambda y: self.b.plus(self.tt(a), y))
            case Scale(x, dy):
                return self.lam(theta, lambda y: self.b.times(self.tt(dy), Var(x), y))
            case Drop(body):
                f, z = self.b.fresh("f"), self.b.fresh("z")
                s = j.type_of(body)[1]
                fn = self.lam(theta, lambda y: let(VarPat(z, trans_tangent_type(s)),
                                                   App(Var(f), y), Top()))
                return self.let_affine(f, self.fun_type(theta, s), self.tangent(body, theta), fn)
        raise NotLinearB(f"not a tangent expression: {e}")

    def tangent_tuple_elim(self, body: Expr, theta: list[str], dz: str, inner: list[str],
                           arg) -> Term:
        f = self.b.fresh("f")
        s = self.j.type_of(body)[1]
        fn = self.lam(theta, lambda y: self.split_theta(
            theta, [dz], y, lambda w, y2: App(Var(f), arg(w, y2))))
        return self.let_affine(f, self.fun_type(inner, s), self.tangent(body, inner), fn)

    def let_affine(self, f: str, f_type: Type, fn: Term, body: Term) -> Term:
        return let(affine_pat(VarPat(f, f_type)), affine_term(fn), body)

    def linear_b(self, d: Expr, theta: list[str]) -> Term:
        match d:
            case PT(x, _):
                return self.result(Bang(Var(x)), self.lam(theta, lambda y: y))
            case PairE(ep, et):
                return self.result(self.primal(ep), self.tangent(et, theta))
            case Let(x, ep, body):
                return let(BangVar(x, self.pt(x)), self.primal(ep), self.linear_b(body, theta))
            case LetTupP0(z, body):
                return let(UnitPat(), Var(z), self.linear_b(body, theta))
            case LetTupP(x1, x2, z, body):
                pat = TensorPat(BangVar(x1, self.pt(x1)), BangVar(x2, self.pt(x2)))
                return let(pat, Var(z), self.linear_b(body, theta))
        raise NotLinearB(f"not a Linear B expression: {d}")


def _is_value(e: Expr) -> bool:
    match e:
        case PVar() | Lit() | TupP0() | TupP():
            return True
        case TupPE(a, b):
            return _is_value(a) and _is_value(b)
    return False


def _theta_for(e: Expr, theta: list[str] | None) -> list[str]:
    order = tangent_order(e)
    if theta is None:
        return order
    theta = list(theta)
    if sorted(theta) != sorted(order) or len(set(theta)) != len(theta):
        raise TypeMismatch(
            f"enumeration {theta} is not a permutation of the free tangents {order}")
    return theta


def _finish(e: Expr, term: Term, theta: list[str], j: JaxJudgment) -> Translation:
    env = [BangVar(x, trans_primal_type(j.primal_env[x])) for x in primal_order(e)]
    h = ty.with_tuple([trans_tangent_type(j.tangent_env[v]) for v in theta])
    out = _pair_type(trans_primal_type(j.primal_type), h, trans_tangent_type(j.tangent_type))
    return Translation(term, env, out, theta, j)


def translate(e: Expr, theta: list[str] | None = None, linear_b: bool = False,
              ptypes: dict[str, JType] | None = None,
              ttypes: dict[str, JType] | None = None) -> Translation:
    """Translate with either ``delta`` or, for Linear B input, ``delta_b``."""
    jax_check(e, ptypes, ttypes)
    theta = _theta_for(e, theta)
    if linear_b:
        if not _is_d(e):
            raise NotLinearB(f"not a Linear B expression: {e}")
        core = rename_apart(e)
    else:
        core = rename_apart(desugar(rename_apart(e)))
    j = jax_check(core, ptypes, ttypes)
    tr = _Delta(j, lin_names(core))
    term = tr.linear_b(core, theta) if linear_b else tr.delta(core, theta)
    return _finish(core, term, theta, j)


def delta(e: Expr, theta: list[str] | None = None, **kw) -> Term:
    return translate(e, theta, **kw).term


def delta_b(d: Expr, theta: list[str] | None = None, **kw) -> Term:
    return translate(d, theta, linear_b=True, **kw).term


def delta_b_primal(ep: Expr, ptypes: dict[str, JType] | None = None) -> Term:
    """The boxed primal translation of a purely primal expression."""
    if not is_primal(ep):
        raise NotLinearB(f"not a primal expression: {ep}")
    core = rename_apart(ep)
    j = jax_check(core, ptypes)
    return _Delta(j, lin_names(core)).primal(core)


def delta_b_tangent(et: Expr, theta: list[str] | None = None,
                    ptypes: dict[str, JType] | None = None,
                    ttypes: dict[str, JType] | None = None) -> Term:
    """The tangent-function translation of a purely tangent expression."""
    if not is_tangent(et):
        raise NotLinearB(f"not a tangent expression: {et}")
    theta = _theta_for(et, theta)
    core = rename_apart(et)
    j = jax_check(core, ptypes, ttypes)
    return _Delta(j, lin_names(core)).tangent(core, theta)


# ------------------------------------------------------------ running translations


def run_translation(tr: Translation, primal: dict[str, Any], tangent: list[Any] | dict[str, Any],
                    strategy: str = "safe") -> tuple[Any, Any]:
    """Normalize the translated pair on numeral inputs and apply its tangent
    function; return the primal and tangent numeral sequences."""
    from .evaluator import normalize

    types = {p.name: p.ty for p in tr.env}
    closed = numseq_subst(tr.term, {x: primal[x] for x in types}, types)
    nf, _ = normalize(closed, strategy)
    match nf:
        case Pair(Bang(v), WithPair(Unit(), fn)):
            pass
        case _:
            raise ShapeMismatch(f"translation did not normalize to a pair: {nf}")
    svals = [tangent[v] for v in tr.theta] if isinstance(tangent, dict) else list(tangent)
    arg = with_tuple([numseq_value(s, h) for s, h in zip(svals, tr.theta_types)])
    out, _ = normalize(App(fn, arg), strategy)
    return read_numseq(v), read_numseq(out)


# ------------------------------------------------------------ retraction helper


def retraction(t: JType) -> tuple[Term, Term]:
    """Terms ``!p(t) -o !t(t)`` and ``!t(t) -o !p(t)`` whose composite is the
    identity on values, with the primal reals read as boxed tangent reals."""
    b = _Builder(set())

    def to(u: JType) -> Term:
        x = b.fresh("x")
        match u:
            case JReal():
                return Lam(BangVar(x, ty.REAL), Bang(Var(x)))
            case JOne():
                return Lam(BangVar(x, ty.UNIT), Bang(Top()))
            case JTensor(l, r):
                a, c, m, n = b.fresh("a"), b.fresh("c"), b.fresh("m"), b.fresh("n")
                pat = TensorPat(BangVar(a, trans_primal_type(l)), BangVar(c, trans_primal_type(r)))
                body = let(BangVar(m, trans_tangent_type(l)), App(to(l), Bang(Var(a))),
                           let(BangVar(n, trans_tangent_type(r)), App(to(r), Bang(Var(c))),
                               Bang(WithPair(Var(m), Var(n)))))
                return Lam(BangVar(x, trans_primal_type(u)), let(pat, Var(x), body))
        raise TypeError(u)

    def back(u: JType) -> Term:
        x = b.fresh("x")
        match u:
            case JReal():
                return Lam(BangVar(x, ty.REAL), Bang(Var(x)))
            case JOne():
                return Lam(BangVar(x, ty.TOP), Bang(Unit()))
            case JTensor(l, r):
                hl, hr = trans_tangent_type(l), trans_tangent_type(r)
                h = ty.With(hl, hr)
                a, c = b.fresh("a"), b.fresh("c")

                def proj(left: bool) -> Term:
                    p, q = b.fresh("p"), b.fresh("q")
                    return Bang(let(WithPat(VarPat(p, hl), VarPat(q, hr)), Var(x),
                                    Var(p if left else q)))

                body = let(BangVar(a, trans_primal_type(l)), App(back(l), proj(True)),
                           let(BangVar(c, trans_primal_type(r)), App(back(r), proj(False)),
                               Bang(Pair(Bang(Var(a)), Bang(Var(c))))))
                return Lam(BangVar(x, h), body)
        raise TypeError(u)

    return to(t), back(t)


# ------------------------------------------------------------ sort checker


@dataclass(frozen=True)
class SortedTerm:
    term: Term
    sort: str       # "P", "U", "F" or "R"


def _is_tensor_pat(p: Pattern) -> bool:
    match p:
        case UnitPat() | BangVar():
            return True
        case TensorPat(BangVar(), BangVar()):
            return True
    return False


def _is_with_pat(p: Pattern) -> bool:
    match p:
        case VarPat(_, a):
            return ty.is_with_seq(a)
        case WithPat(l, r):
            return _is_with_pat(l) and _is_with_pat(r)
    return False


def _is_affine_fn_pat(p: Pattern) -> bool:
    return isinstance(p, WithPat) and isinstance(p.left, UnitPat) and isinstance(p.right, VarPat)


def is_sort_p(t: Term) -> bool:
    match t:
        case Bang(Var()) | Bang(Num()) | Bang(Unit()):
            return True
        case Bang(Pair(a, b)):
            return is_sort_p(a) and is_sort_p(b)
        case App(Fun(), Bang(Var())) | App(Fun(), Pair(Bang(Var()), Bang(Var()))):
            return True
        case App(Lam(BangVar(), body), arg):
            return is_sort_p(body) and is_sort_p(arg)
        case App(Lam(p, body), Var()) if _is_tensor_pat(p):
            return is_sort_p(body)
    return False


def is_sort_u(t: Term) -> bool:
    match t:
        case Num(v):
            return v == 0.0
        case Var() | Top():
            return True
        case WithPair(a, b):
            return is_sort_u(a) and is_sort_u(b)
        case App(f, a):
            return is_sort_f(f) and is_sort_u(a)
    return False


def is_sort_f(t: Term) -> bool:
    match t:
        case Var() | DotPlus():
            return True
        case App(DotTimes(), Var()):
            return True
        case Lam(p, body):
            return _is_with_pat(p) and is_sort_u(body)
        case App(Lam(p, body), WithPair(Unit(), fn)) if _is_affine_fn_pat(p):
            return is_sort_f(fn) and is_sort_f(body)
    return False


def is_sort_r(t: Term) -> bool:
    match t:
        case Pair(p, WithPair(Unit(), fn)):
            return is_sort_p(p) and is_sort_f(fn)
        case App(Lam(TensorPat(BangVar(), q), body), s) if _is_affine_fn_pat(q):
            return is_sort_r(body) and is_sort_r(s)
        case App(Lam(p, body), WithPair(Unit(), fn)) if _is_affine_fn_pat(p):
            return is_sort_f(fn) and is_sort_r(body)
        case App(Lam(BangVar(), body), arg):
            return is_sort_p(arg) and is_sort_r(body)
        case App(Lam(p, body), Var()) if _is_tensor_pat(p):
            return is_sort_r(body)
    return False


_SORTS = {"P": is_sort_p, "U": is_sort_u, "F": is_sort_f, "R": is_sort_r}


def sort_check(t: Term, sort: str | None = None) -> SortedTerm:
    """Classify ``t`` in the four-sorted fragment.

    Without ``sort`` only the two top-level sorts are tried, the primal
    programs ``P`` and the pair terms ``R``; ``U`` and ``F`` classify
    subterms and are checked only on request."""
    candidates = [sort] if sort else ["P", "R"]
    for s in candidates:
        if s not in _SORTS:
            raise ValueError(f"unknown sort {s!r}")
        if _SORTS[s](t):
            return SortedTerm(t, s)
    raise SortError(f"term is not in sort {' or '.join(candidates)}: {t}")

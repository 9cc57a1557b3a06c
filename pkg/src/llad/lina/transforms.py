"""The three JAX-style transforms on Linear A: forward (JVP), unzip into
Linear B, and transposition of the tangent part.

Binary primitives applied to the same variable twice, binders that are never
used and tuple eliminations whose scrutinee is also used in the body are
handled by extra ``dup``/``drop`` plumbing so the outputs stay well-typed.
"""

from __future__ import annotations

from typing import Callable

from ..errors import NotLinearB, TangentLinearityViolation
from ..terms import DERIVATIVE_RECIPES
from .ast import (
    Drop, Dup, Expr, JType, Let, LetPT, LetT, LetTupP, LetTupP0, LetTupT, LetTupT0, LinFresh, Lit,
    PT, PVar, PairE, Prim, R, Scale, TAdd, TVar, TupP, TupP0, TupPE, TupT, TupT0, TupTE, Zero,
    JOne, all_names, primal_order, rename_apart, tangent_order, tensor_of,
)
from .check import jax_check

# ------------------------------------------------------------ Linear B sorts


def is_primal(e: Expr) -> bool:
    match e:
        case PVar() | Lit() | Prim() | TupP0() | TupP():
            return True
        case Let(_, a, b) | TupPE(a, b):
            return is_primal(a) and is_primal(b)
        case Drop(b) | LetTupP0(_, b) | LetTupP(_, _, _, b):
            return is_primal(b)
    return False


def is_tangent(e: Expr) -> bool:
    match e:
        case TVar() | Dup() | Zero() | TAdd() | Scale() | TupT0() | TupT():
            return True
        case LetT(_, a, b) | TupTE(a, b):
            return is_tangent(a) and is_tangent(b)
        case Drop(b) | LetTupT0(_, b) | LetTupT(_, _, _, b):
            return is_tangent(b)
    return False


def linear_b_sort(e: Expr) -> str | None:
    """``"d"``, ``"p"`` (purely primal) or ``"t"`` (purely tangent), else None."""
    if is_primal(e):
        return "p"
    if is_tangent(e):
        return "t"
    if _is_d(e):
        return "d"
    return None


def _is_d(e: Expr) -> bool:
    match e:
        case PT():
            return True
        case PairE(a, b):
            return is_primal(a) and is_tangent(b)
        case Let(_, a, b):
            return is_primal(a) and _is_d(b)
        case LetTupP0(_, b) | LetTupP(_, _, _, b):
            return _is_d(b)
    return False


def check_linear_b(d: Expr) -> None:
    if not _is_d(d):
        raise NotLinearB(f"not a Linear B expression: {d}")


# --------------------------------------------------------------- small glue


def _discard_tangent(dy: str, t: JType, body: Expr, fresh: LinFresh) -> Expr:
    """Consume an unused tangent: free for type 1, a ``drop`` otherwise."""
    if isinstance(t, JOne):
        return LetTupT0(dy, body)
    u = fresh.tangent("u")
    return LetT(u, Drop(TVar(dy)), LetTupT0(u, body))


def _copies(dx: str, fresh: LinFresh) -> tuple[Callable[[Expr], Expr], str, str]:
    a, w, v = fresh.tangent("a"), fresh.tangent(dx), fresh.tangent(dx)
    return (lambda body: LetT(a, Dup(dx), LetTupT(w, v, a, body))), w, v


# ------------------------------------------------------------------ forward


def jax_forward(e: Expr, phi: dict[str, str] | None = None,
                ptypes: dict[str, JType] | None = None) -> Expr:
    """F^Jax: map a purely primal expression to its JVP; ``phi`` names the
    tangent of every free primal variable (default ``x -> x'``)."""
    if not is_primal(e):
        raise NotLinearB(f"forward expects a purely primal expression: {e}")
    j = jax_check(e, ptypes)
    e = rename_apart(e)
    phi = dict(phi) if phi is not None else {x: x + "'" for x in e.pfv}
    missing = e.pfv - set(phi)
    if missing:
        raise ValueError(f"no tangent name for {sorted(missing)}")
    fresh = LinFresh(all_names(e) | set(phi.values()) | set(phi))
    return _forward(e, {x: phi[x] for x in e.pfv}, dict(j.primal_env), fresh)


def _ptype(e: Expr, scope: dict[str, JType]) -> JType:
    return jax_check(e, {x: scope[x] for x in e.pfv if x in scope}).primal_type


def _forward(e: Expr, phi: dict[str, str], scope: dict[str, JType], fresh: LinFresh) -> Expr:
    match e:
        case PVar(x):
            return PT(x, phi[x])
        case Lit():
            return PairE(e, Zero(R))
        case TupP0():
            return PairE(e, TupT0())
        case TupP(x1, x2):
            if x1 != x2:
                return PairE(e, TupT(phi[x1], phi[x2]))
            wrap, w, v = _copies(phi[x1], fresh)
            return wrap(PairE(e, TupT(w, v)))
        case TupPE(e1, e2):
            a, b = fresh.primal("a"), fresh.primal("b")
            return _forward(Let(a, e1, Let(b, e2, TupP(a, b))), phi, scope, fresh)
        case Prim(f, args):
            return _forward_prim(e, f, args, phi, fresh)
        case Drop(b):
            return Drop(_forward(b, phi, scope, fresh))
        case Let(x, e1, e2):
            rest = e2.pfv - {x}
            shared = [z for z in primal_order(e) if z in e1.pfv and z in rest]
            phi1 = {z: phi[z] for z in e1.pfv}
            phi2 = {z: phi[z] for z in rest}
            wraps = []
            for z in shared:
                wrap, w, v = _copies(phi[z], fresh)
                wraps.append(wrap)
                phi1[z], phi2[z] = w, v
            t1 = _ptype(e1, scope)
            dy = fresh.tangent(x)
            first = _forward(e1, phi1, scope, fresh)
            if x in e2.pfv:
                second = _forward(e2, phi2 | {x: dy}, scope | {x: t1}, fresh)
            else:
                second = _discard_tangent(dy, t1, _forward(e2, phi2, scope, fresh), fresh)
            out: Expr = LetPT(x, dy, first, second)
            for wrap in reversed(wraps):
                out = wrap(out)
            return out
        case LetTupP0(z, body):
            dz = phi[z]
            if z in body.pfv:
                wrap, w, v = _copies(dz, fresh)
                return wrap(LetTupT0(w, _forward(body, phi | {z: v}, scope, fresh)))
            inner = {k: t for k, t in phi.items() if k in body.pfv}
            return LetTupT0(dz, _forward(body, inner, scope, fresh))
        case LetTupP(x1, x2, z, body):
            zt = scope.get(z)
            t1, t2 = (zt.left, zt.right) if zt is not None else (R, R)
            dz = phi[z]
            wrap = None
            if z in body.pfv - {x1, x2}:
                wrap, dz, keep = _copies(dz, fresh)
                base = {k: phi[k] for k in body.pfv - {x1, x2}} | {z: keep}
            else:
                base = {k: phi[k] for k in body.pfv - {x1, x2}}
            y1, y2 = fresh.tangent(x1), fresh.tangent(x2)
            inner_phi = dict(base)
            if x1 in body.pfv:
                inner_phi[x1] = y1
            if x2 in body.pfv:
                inner_phi[x2] = y2
            inner = _forward(body, inner_phi, scope | {x1: t1, x2: t2}, fresh)
            if x2 not in body.pfv:
                inner = _discard_tangent(y2, t2, inner, fresh)
            if x1 not in body.pfv:
                inner = _discard_tangent(y1, t1, inner, fresh)
            out = LetTupP(x1, x2, z, LetTupT(y1, y2, dz, inner))
            return wrap(out) if wrap else out
    raise NotLinearB(f"forward expects a purely primal expression: {e}")


def _partial(recipe: tuple, args: tuple[str, ...], fresh: LinFresh) -> Expr:
    match recipe:
        case ("call", g, idx):
            return Prim(g, tuple(args[i] for i in idx))
        case ("neg-call", g, idx):
            a = fresh.primal("a")
            return Let(a, Prim(g, tuple(args[i] for i in idx)), Prim("neg", (a,)))
        case ("const", c):
            return Lit(float(c))
        case ("var", i):
            return PVar(args[i])
    raise ValueError(f"bad derivative recipe {recipe}")


def _forward_prim(e: Prim, f: str, args: tuple[str, ...], phi: dict[str, str],
                  fresh: LinFresh) -> Expr:
    # tangents for each argument position, with dup when a variable repeats
    wraps: list[Callable[[Expr], Expr]] = []
    tangents: list[str] = []
    used: dict[str, int] = {x: args.count(x) for x in args}
    spare: dict[str, list[str]] = {}
    for x in args:
        if used[x] == 1:
            tangents.append(phi[x])
            continue
        if x not in spare:
            wrap, w, v = _copies(phi[x], fresh)
            wraps.append(wrap)
            spare[x] = [w, v]
        tangents.append(spare[x].pop(0))
    ws = [fresh.primal("w") for _ in args]
    zs = [fresh.tangent("z") for _ in args]
    tail: Expr = TVar(zs[0]) if len(zs) == 1 else TAdd(zs[0], zs[1])
    body: Expr = PairE(e, tail)
    for w, z, y in reversed(list(zip(ws, zs, tangents))):
        body = LetT(z, Scale(w, y), body)
    for w, recipe in reversed(list(zip(ws, DERIVATIVE_RECIPES[f]))):
        body = Let(w, _partial(recipe, args, fresh), body)
    for wrap in reversed(wraps):
        body = wrap(body)
    return body


# ------------------------------------------------------------------- unzip


Binder = tuple


def _seq_tangent(t1: Expr, t2: Expr, fresh: LinFresh) -> Expr:
    """Sequence a tangent expression of type 1 before ``t2``."""
    if isinstance(t1, TupT0):
        return t2
    u = fresh.tangent("u")
    return LetT(u, t1, LetTupT0(u, t2))


def _discard_primal(p: Expr, fresh: LinFresh) -> list[Binder]:
    if isinstance(p, TupP0):
        return []
    return [("let", fresh.primal("u"), p)]


def _unzip(e: Expr, fresh: LinFresh) -> tuple[list[Binder], Expr, Expr]:
    match e:
        case PT(x, dy):
            return [], PVar(x), TVar(dy)
        case LetPT(x, dy, e1, e2):
            b1, p1, t1 = _unzip(e1, fresh)
            b2, p2, t2 = _unzip(e2, fresh)
            return b1 + [("let", x, p1)] + b2, p2, LetT(dy, t1, t2)
        case TupP0() | TupP() | Lit() | Prim() | PVar():
            return [], e, TupT0()
        case LetTupP0(z, body):
            b, p, t = _unzip(body, fresh)
            return [("tup0", z)] + b, p, t
        case LetTupP(x1, x2, z, body):
            b, p, t = _unzip(body, fresh)
            return [("tup", x1, x2, z)] + b, p, t
        case TupT0() | TupT() | Zero() | TAdd() | Scale() | Dup() | TVar():
            return [], TupP0(), e
        case LetTupT0(dz, body):
            b, p, t = _unzip(body, fresh)
            return b, p, LetTupT0(dz, t)
        case LetTupT(a1, a2, dz, body):
            b, p, t = _unzip(body, fresh)
            return b, p, LetTupT(a1, a2, dz, t)
        case Drop(body):
            b, p, t = _unzip(body, fresh)
            return b, Drop(p), Drop(t)
        case Let(x, e1, e2):
            b1, p1, t1 = _unzip(e1, fresh)
            b2, p2, t2 = _unzip(e2, fresh)
            return b1 + [("let", x, p1)] + b2, p2, _seq_tangent(t1, t2, fresh)
        case LetT(dy, e1, e2):
            b1, p1, t1 = _unzip(e1, fresh)
            b2, p2, t2 = _unzip(e2, fresh)
            return b1 + _discard_primal(p1, fresh) + b2, p2, LetT(dy, t1, t2)
        case PairE(e1, e2):
            b1, p1, t1 = _unzip(e1, fresh)
            b2, p2, t2 = _unzip(e2, fresh)
            return b1 + b2 + _discard_primal(p2, fresh), p1, _seq_tangent(t1, t2, fresh)
        case TupPE(e1, e2):
            b1, p1, t1 = _unzip(e1, fresh)
            b2, p2, t2 = _unzip(e2, fresh)
            return b1 + b2, TupPE(p1, p2), _seq_tangent(t1, t2, fresh)
        case TupTE(e1, e2):
            b1, p1, t1 = _unzip(e1, fresh)
            b2, p2, t2 = _unzip(e2, fresh)
            return b1 + b2 + _discard_primal(p1, fresh) + _discard_primal(p2, fresh), \
                TupP0(), TupTE(t1, t2)
    raise TypeError(f"not a Linear A expression: {e!r}")


def build_d(binders: list[Binder], p: Expr, t: Expr) -> Expr:
    out: Expr = PT(p.x, t.dx) if isinstance(p, PVar) and isinstance(t, TVar) else PairE(p, t)
    for b in reversed(binders):
        match b:
            case ("let", x, rhs):
                out = Let(x, rhs, out)
            case ("tup0", z):
                out = LetTupP0(z, out)
            case ("tup", x1, x2, z):
                out = LetTupP(x1, x2, z, out)
    return out


def jax_unzip(e: Expr) -> Expr:
    """U^Jax: split into a stack of primal lets over a primal/tangent pair."""
    jax_check(e)
    e = rename_apart(e)
    fresh = LinFresh(all_names(e))
    return build_d(*_unzip(e, fresh))


# --------------------------------------------------------------- transpose


def _pack(items: list[Expr]) -> Expr:
    if not items:
        return TupT0()
    if len(items) == 1:
        return items[0]
    head, rest = items[0], _pack(items[1:])
    if isinstance(head, TVar) and isinstance(rest, TVar):
        return TupT(head.dx, rest.dx)
    return TupTE(head, rest)


class _Transposer:
    def __init__(self, types: dict[str, JType], fresh: LinFresh):
        self.types = types
        self.fresh = fresh

    def bind(self, e: Expr, k: Callable[[str], Expr], base: str = "r") -> Expr:
        if isinstance(e, TVar):
            return k(e.dx)
        r = self.fresh.tangent(base)
        return LetT(r, e, k(r))

    def unpack(self, names: list[str], src: str, k: Callable[[dict[str, str]], Expr]) -> Expr:
        """``let tupT theta = src in ...`` with right nesting."""
        if not names:
            return LetTupT0(src, k({}))
        if len(names) == 1:
            return k({names[0]: src})
        head = self.fresh.tangent(names[0])
        rest = self.fresh.tangent("t")
        return LetTupT(head, rest, src,
                       self.unpack(names[1:], rest, lambda m: k({names[0]: head, **m})))

    def result_for(self, theta: list[str], sub: Expr, u: str,
                   k: Callable[[dict[str, str]], Expr]) -> Expr:
        """Transpose ``sub`` and hand the cotangent names of ``theta`` to ``k``."""
        return self.bind(self.t(sub, theta, u),
                         lambda r: self.unpack(theta, r, k))

    def t(self, e: Expr, theta: list[str], u: str) -> Expr:
        match e:
            case TVar(_):
                return TVar(u)
            case LetT(dx, e1, e2):
                th2 = [dx] + [v for v in theta if v in e2.tfv]
                th1 = [v for v in theta if v in e1.tfv]

                def after2(m2: dict[str, str]) -> Expr:
                    return self.result_for(
                        th1, e1, m2[dx],
                        lambda m1: _pack([TVar({**m2, **m1}[v]) for v in theta]))

                return self.result_for(th2, e2, u, after2)
            case TupT0():
                return LetTupT0(u, TupT0())
            case TupT(a, b):
                return self.t(TupTE(TVar(a), TVar(b)), theta, u)
            case TupTE(e1, e2):
                u1, u2 = self.fresh.tangent("u"), self.fresh.tangent("u")
                th1 = [v for v in theta if v in e1.tfv]
                th2 = [v for v in theta if v in e2.tfv]
                body = self.result_for(
                    th1, e1, u1,
                    lambda m1: self.result_for(
                        th2, e2, u2,
                        lambda m2: _pack([TVar({**m1, **m2}[v]) for v in theta])))
                return LetTupT(u1, u2, u, body)
            case LetTupT0(dz, body):
                inner = [v for v in theta if v != dz]
                return self.result_for(
                    inner, body, u,
                    lambda m: _pack([TupT0() if v == dz else TVar(m[v]) for v in theta]))
            case LetTupT(a1, a2, dz, body):
                inner = [a1, a2] + [v for v in theta if v != dz and v in body.tfv]
                return self.result_for(
                    inner, body, u,
                    lambda m: _pack([TupT(m[a1], m[a2]) if v == dz else TVar(m[v])
                                     for v in theta]))
            case Dup(_):
                z, w = self.fresh.tangent("z"), self.fresh.tangent("w")
                return LetTupT(z, w, u, TAdd(z, w))
            case TAdd(_, _):
                return Dup(u)
            case Zero(_):
                return Drop(TVar(u))
            case Drop(_):
                return LetTupT0(u, Zero(tensor_of([self.types[v] for v in theta])))
            case Scale(x, _):
                return Scale(x, u)
        raise NotLinearB(f"not a purely tangent expression: {e}")


def jax_transpose(d: Expr, theta: list[str] | None = None, u: str | None = None,
                  ttypes: dict[str, JType] | None = None,
                  ptypes: dict[str, JType] | None = None) -> Expr:
    """T^Jax: turn ``Gamma; theta |- d : (tau; sigma)`` into
    ``Gamma; u : sigma |- T(d) : (tau; tensor of theta)``."""
    check_linear_b(d)
    d = rename_apart(d)
    j = jax_check(d, ptypes, ttypes)
    order = tangent_order(d)
    theta = list(theta) if theta is not None else order
    if sorted(theta) != sorted(order) or len(set(theta)) != len(theta):
        raise TangentLinearityViolation(
            f"theta {theta} must enumerate the free tangent variables {order}")
    fresh = LinFresh(all_names(d) | set(theta))
    u = u or fresh.tangent("u")
    types = dict(j.binders) | dict(j.tangent_env)
    tr = _Transposer(types, fresh)

    def go(x: Expr) -> Expr:
        match x:
            case Let(v, p, rest):
                return Let(v, p, go(rest))
            case LetTupP0(z, rest):
                return LetTupP0(z, go(rest))
            case LetTupP(x1, x2, z, rest):
                return LetTupP(x1, x2, z, go(rest))
            case PT(xp, dy):
                return PairE(PVar(xp), tr.t(TVar(dy), theta, u))
            case PairE(p, t):
                return PairE(p, tr.t(t, theta, u))
        raise NotLinearB(f"not a Linear B expression: {x}")

    return go(d)


def cotangent_type(d: Expr, theta: list[str] | None = None,
                   ttypes: dict[str, JType] | None = None) -> JType:
    j = jax_check(d, None, ttypes)
    theta = theta if theta is not None else tangent_order(d)
    return tensor_of([j.tangent_env.get(v, R) for v in theta])


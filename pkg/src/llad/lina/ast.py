"""Abstract syntax for Linear A and its Linear B fragment.

Tangent variable names end with a prime (``x'``); primal names never do.
Core constructors follow the Linear A grammar; the remaining ones are the
usual notational sugar (primal/tangent variables and lets, mixed pairs and
tuples of expressions), kept as nodes so that printing stays readable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property


# ------------------------------------------------------------------- types


class JType:
    def __str__(self) -> str:
        return show_jtype(self)


@dataclass(frozen=True)
class JReal(JType):
    pass


@dataclass(frozen=True)
class JOne(JType):
    pass


@dataclass(frozen=True)
class JTensor(JType):
    left: JType
    right: JType


R = JReal()
ONE = JOne()


def tensor_of(types: list[JType]) -> JType:
    """Right-nested product; empty is 1, a singleton is itself."""
    if not types:
        return ONE
    out = types[-1]
    for t in reversed(types[:-1]):
        out = JTensor(t, out)
    return out


def jtype_workload(t: JType) -> int:
    match t:
        case JReal():
            return 1
        case JOne():
            return 0
        case JTensor(l, r):
            return jtype_workload(l) + jtype_workload(r)
    raise TypeError(t)


def show_jtype(t: JType, nested: bool = False) -> str:
    match t:
        case JReal():
            return "R"
        case JOne():
            return "1"
        case JTensor(l, r):
            s = f"{show_jtype(l, True)} * {show_jtype(r, True)}"
            return f"({s})" if nested else s
    raise TypeError(t)


def is_tangent_name(name: str) -> bool:
    return name.endswith("'")


# ------------------------------------------------------------- expressions


class Expr:
    @cached_property
    def pfv(self) -> frozenset[str]:
        """Free primal variables."""
        return frozenset(_free(self, tangent=False))

    @cached_property
    def tfv(self) -> frozenset[str]:
        """Free tangent variables."""
        return frozenset(_free(self, tangent=True))

    def __str__(self) -> str:
        from .syntax import show_expr
        return show_expr(self)


# core Linear A


@dataclass(frozen=True)
class PT(Expr):
    """``(x; y')``"""
    x: str
    dy: str


@dataclass(frozen=True)
class LetPT(Expr):
    """``let (x; y') = e1 in e2``"""
    x: str
    dy: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class TupP0(Expr):
    pass


@dataclass(frozen=True)
class TupP(Expr):
    x1: str
    x2: str


@dataclass(frozen=True)
class LetTupP0(Expr):
    z: str
    body: Expr


@dataclass(frozen=True)
class LetTupP(Expr):
    x1: str
    x2: str
    z: str
    body: Expr


@dataclass(frozen=True)
class TupT0(Expr):
    pass


@dataclass(frozen=True)
class TupT(Expr):
    dx1: str
    dx2: str


@dataclass(frozen=True)
class LetTupT0(Expr):
    dz: str
    body: Expr


@dataclass(frozen=True)
class LetTupT(Expr):
    dx1: str
    dx2: str
    dz: str
    body: Expr


@dataclass(frozen=True)
class Lit(Expr):
    value: float

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Lit) and self.value == other.value

    def __hash__(self) -> int:
        return hash(("Lit", self.value))


@dataclass(frozen=True)
class Prim(Expr):
    f: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Zero(Expr):
    ty: JType


@dataclass(frozen=True)
class TAdd(Expr):
    dx: str
    dy: str


@dataclass(frozen=True)
class Scale(Expr):
    x: str
    dy: str


@dataclass(frozen=True)
class Dup(Expr):
    dx: str


@dataclass(frozen=True)
class Drop(Expr):
    body: Expr


# sugar


@dataclass(frozen=True)
class PVar(Expr):
    """Primal variable as an expression of type ``(tau; 1)``."""
    x: str


@dataclass(frozen=True)
class TVar(Expr):
    """Tangent variable as an expression of type ``(1; tau)``."""
    dx: str


@dataclass(frozen=True)
class Let(Expr):
    """Purely primal ``let x = e1 in e2`` (``e1`` has tangent type 1)."""
    x: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class LetT(Expr):
    """Purely tangent ``let y' = e1 in e2`` (``e1`` has primal type 1)."""
    dy: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class PairE(Expr):
    """``(e1; e2)`` of a primal and a tangent expression."""
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class TupPE(Expr):
    """Primal tuple of expressions."""
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class TupTE(Expr):
    """Tangent tuple of expressions."""
    e1: Expr
    e2: Expr


def subexprs(e: Expr) -> tuple[Expr, ...]:
    match e:
        case LetPT(_, _, a, b) | Let(_, a, b) | LetT(_, a, b) | PairE(a, b) | TupPE(a, b) | TupTE(a, b):
            return (a, b)
        case LetTupP0(_, b) | LetTupP(_, _, _, b) | LetTupT0(_, b) | LetTupT(_, _, _, b) | Drop(b):
            return (b,)
    return ()


def _free(e: Expr, tangent: bool) -> set[str] | frozenset[str]:
    def fv(x: Expr) -> frozenset[str]:
        return x.tfv if tangent else x.pfv

    match e:
        case PT(x, dy):
            return {dy} if tangent else {x}
        case LetPT(x, dy, a, b):
            return fv(a) | (fv(b) - {dy if tangent else x})
        case TupP(x1, x2):
            return set() if tangent else {x1, x2}
        case LetTupP0(z, b):
            return fv(b) if tangent else fv(b) | {z}
        case LetTupP(x1, x2, z, b):
            return fv(b) if tangent else (fv(b) - {x1, x2}) | {z}
        case TupT(a, b):
            return {a, b} if tangent else set()
        case LetTupT0(dz, b):
            return fv(b) | {dz} if tangent else fv(b)
        case LetTupT(a, b, dz, body):
            return (fv(body) - {a, b}) | {dz} if tangent else fv(body)
        case Prim(_, args):
            return set() if tangent else set(args)
        case TAdd(a, b):
            return {a, b} if tangent else set()
        case Scale(x, dy):
            return {dy} if tangent else {x}
        case Dup(dx):
            return {dx} if tangent else set()
        case PVar(x):
            return set() if tangent else {x}
        case TVar(dx):
            return {dx} if tangent else set()
        case Let(x, a, b):
            return fv(a) | (fv(b) if tangent else fv(b) - {x})
        case LetT(dy, a, b):
            return fv(a) | (fv(b) - {dy} if tangent else fv(b))
        case PairE(a, b) | TupPE(a, b) | TupTE(a, b):
            return fv(a) | fv(b)
        case Drop(a):
            return fv(a)
    return set()


def tangent_order(e: Expr) -> list[str]:
    """Free tangent variables in order of first occurrence (canonical theta)."""
    seen: list[str] = []

    def visit(x: Expr, bound: frozenset[str]) -> None:
        def use(*names: str) -> None:
            for n in names:
                if n not in bound and n not in seen:
                    seen.append(n)

        match x:
            case PT(_, dy) | Scale(_, dy) | TVar(dy) | Dup(dy):
                use(dy)
            case TupT(a, b) | TAdd(a, b):
                use(a, b)
            case LetPT(_, dy, a, b) | LetT(dy, a, b):
                visit(a, bound)
                visit(b, bound | {dy})
            case LetTupT0(dz, b):
                use(dz)
                visit(b, bound)
            case LetTupT(a1, a2, dz, b):
                use(dz)
                visit(b, bound | {a1, a2})
            case _:
                for s in subexprs(x):
                    visit(s, bound)

    visit(e, frozenset())
    return seen


def primal_order(e: Expr) -> list[str]:
    """Free primal variables in order of first occurrence."""
    seen: list[str] = []

    def visit(x: Expr, bound: frozenset[str]) -> None:
        def use(*names: str) -> None:
            for n in names:
                if n not in bound and n not in seen:
                    seen.append(n)

        match x:
            case PT(a, _) | Scale(a, _) | PVar(a):
                use(a)
            case TupP(a, b):
                use(a, b)
            case Prim(_, args):
                use(*args)
            case LetPT(v, _, a, b) | Let(v, a, b):
                visit(a, bound)
                visit(b, bound | {v})
            case LetTupP0(z, b):
                use(z)
                visit(b, bound)
            case LetTupP(a1, a2, z, b):
                use(z)
                visit(b, bound | {a1, a2})
            case _:
                for s in subexprs(x):
                    visit(s, bound)

    visit(e, frozenset())
    return seen


def all_names(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        for v in vars(x).values():
            if isinstance(v, str):
                out.add(v)
            elif isinstance(v, tuple):
                out.update(a for a in v if isinstance(a, str))
        stack.extend(subexprs(x))
    return out


# ----------------------------------------------------------------- freshness


class LinFresh:
    """Fresh primal (``stem#n``) and tangent (``stem#n'``) names."""

    def __init__(self, avoid: set[str] | frozenset[str] = frozenset()):
        self.counter = 0
        self.avoid = {n.rstrip("'") for n in avoid}

    def reserve(self, names) -> None:
        self.avoid.update(n.rstrip("'") for n in names)

    def _next(self, base: str) -> str:
        stem = base.rstrip("'").split("#")[0] or "v"
        while True:
            self.counter += 1
            name = f"{stem}#{self.counter}"
            if name not in self.avoid:
                self.avoid.add(name)
                return name

    def primal(self, base: str = "v") -> str:
        return self._next(base)

    def tangent(self, base: str = "v") -> str:
        return self._next(base) + "'"


def rename_apart(e: Expr, supply: LinFresh | None = None) -> Expr:
    """Rename binders so that no bound name shadows another or a free name."""
    supply = supply or LinFresh(all_names(e))
    seen: set[str] = set(e.pfv | e.tfv)

    def pick(x: str) -> str:
        if x not in seen:
            seen.add(x)
            return x
        return supply.tangent(x) if is_tangent_name(x) else supply.primal(x)

    def go(x: Expr, m: dict[str, str]) -> Expr:
        r = lambda n: m.get(n, n)
        match x:
            case PT(a, b):
                return PT(r(a), r(b))
            case LetPT(a, b, e1, e2):
                e1 = go(e1, m)
                a2, b2 = pick(a), pick(b)
                return LetPT(a2, b2, e1, go(e2, {**m, a: a2, b: b2}))
            case TupP(a, b):
                return TupP(r(a), r(b))
            case LetTupP0(z, b):
                return LetTupP0(r(z), go(b, m))
            case LetTupP(a, b, z, body):
                a2, b2 = pick(a), pick(b)
                return LetTupP(a2, b2, r(z), go(body, {**m, a: a2, b: b2}))
            case TupT(a, b):
                return TupT(r(a), r(b))
            case LetTupT0(z, b):
                return LetTupT0(r(z), go(b, m))
            case LetTupT(a, b, z, body):
                a2, b2 = pick(a), pick(b)
                return LetTupT(a2, b2, r(z), go(body, {**m, a: a2, b: b2}))
            case Prim(f, args):
                return Prim(f, tuple(r(a) for a in args))
            case TAdd(a, b):
                return TAdd(r(a), r(b))
            case Scale(a, b):
                return Scale(r(a), r(b))
            case Dup(a):
                return Dup(r(a))
            case Drop(b):
                return Drop(go(b, m))
            case PVar(a):
                return PVar(r(a))
            case TVar(a):
                return TVar(r(a))
            case Let(a, e1, e2):
                e1 = go(e1, m)
                a2 = pick(a)
                return Let(a2, e1, go(e2, {**m, a: a2}))
            case LetT(a, e1, e2):
                e1 = go(e1, m)
                a2 = pick(a)
                return LetT(a2, e1, go(e2, {**m, a: a2}))
            case PairE(a, b):
                return PairE(go(a, m), go(b, m))
            case TupPE(a, b):
                return TupPE(go(a, m), go(b, m))
            case TupTE(a, b):
                return TupTE(go(a, m), go(b, m))
        return x

    return go(e, {})


def alpha_equal(a: Expr, b: Expr) -> bool:
    """Structural equality up to renaming of bound variables."""

    def go(x: Expr, y: Expr, mx: dict[str, str], my: dict[str, str], depth: list[int]) -> bool:
        if type(x) is not type(y):
            return False

        def same(n: str, k: str) -> bool:
            return mx.get(n, ("free", n)) == my.get(k, ("free", k))

        def bind(ns: tuple[str, ...], ks: tuple[str, ...]):
            nx, ny = dict(mx), dict(my)
            for n, k in zip(ns, ks):
                depth[0] += 1
                nx[n] = ny[k] = ("bound", depth[0])
            return nx, ny

        match x, y:
            case (PT(a, b), PT(c, d)) | (TupP(a, b), TupP(c, d)) | (TupT(a, b), TupT(c, d)) \
                    | (TAdd(a, b), TAdd(c, d)) | (Scale(a, b), Scale(c, d)):
                return same(a, c) and same(b, d)
            case (Dup(a), Dup(c)) | (PVar(a), PVar(c)) | (TVar(a), TVar(c)):
                return same(a, c)
            case (LetPT(a, b, e1, e2), LetPT(c, d, f1, f2)):
                nx, ny = bind((a, b), (c, d))
                return go(e1, f1, mx, my, depth) and go(e2, f2, nx, ny, depth)
            case (Let(a, e1, e2), Let(c, f1, f2)) | (LetT(a, e1, e2), LetT(c, f1, f2)):
                nx, ny = bind((a,), (c,))
                return go(e1, f1, mx, my, depth) and go(e2, f2, nx, ny, depth)
            case (LetTupP0(z, e1), LetTupP0(w, f1)) | (LetTupT0(z, e1), LetTupT0(w, f1)):
                return same(z, w) and go(e1, f1, mx, my, depth)
            case (LetTupP(a, b, z, e1), LetTupP(c, d, w, f1)) \
                    | (LetTupT(a, b, z, e1), LetTupT(c, d, w, f1)):
                nx, ny = bind((a, b), (c, d))
                return same(z, w) and go(e1, f1, nx, ny, depth)
            case (Prim(f, xs), Prim(g, ys)):
                return f == g and len(xs) == len(ys) and all(same(p, q) for p, q in zip(xs, ys))
            case (Drop(e1), Drop(f1)):
                return go(e1, f1, mx, my, depth)
            case (PairE(e1, e2), PairE(f1, f2)) | (TupPE(e1, e2), TupPE(f1, f2)) \
                    | (TupTE(e1, e2), TupTE(f1, f2)):
                return go(e1, f1, mx, my, depth) and go(e2, f2, mx, my, depth)
        return x == y

    return go(a, b, {}, {}, [0])

"""Abstract syntax of the linear calculus: patterns, terms, free variables,
fresh names and capture-avoiding pattern substitution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

from .errors import ShapeMismatch
from . import types as ty
from .types import Type


# ---------------------------------------------------------------- patterns


class Pattern:
    def __str__(self) -> str:
        from .surface import show_pattern
        return show_pattern(self)

    @cached_property
    def var_tuple(self) -> tuple[str, ...]:
        match self:
            case VarPat(n, _) | BangVar(n, _):
                return (n,)
            case UnitPat():
                return ()
            case TensorPat(l, r) | WithPat(l, r):
                return l.var_tuple + r.var_tuple
        raise TypeError(self)

    @cached_property
    def var_set(self) -> frozenset[str]:
        return frozenset(self.var_tuple)


@dataclass(frozen=True)
class VarPat(Pattern):
    name: str
    ty: Type


@dataclass(frozen=True)
class BangVar(Pattern):
    """``!x``; ``ty`` is the type of ``x`` itself, the pattern has type ``!ty``."""
    name: str
    ty: Type


@dataclass(frozen=True)
class UnitPat(Pattern):
    pass


@dataclass(frozen=True)
class TensorPat(Pattern):
    left: Pattern
    right: Pattern


@dataclass(frozen=True)
class WithPat(Pattern):
    left: Pattern
    right: Pattern


def pattern_type(p: Pattern) -> Type:
    match p:
        case VarPat(_, t):
            return t
        case BangVar(_, t):
            return ty.Bang(t)
        case UnitPat():
            return ty.UNIT
        case TensorPat(l, r):
            return ty.Tensor(pattern_type(l), pattern_type(r))
        case WithPat(l, r):
            return ty.With(pattern_type(l), pattern_type(r))
    raise TypeError(p)


def pattern_vars(p: Pattern) -> list[str]:
    """Variables of a pattern, left to right."""
    return list(p.var_tuple)


def pattern_var_set(p: Pattern) -> frozenset[str]:
    return p.var_set


def pattern_bindings(p: Pattern) -> dict[str, Type]:
    """Map each bound variable to the type it has in the body.

    ``!x : !A`` binds ``x`` at ``A`` (dereliction is implicit)."""
    out: dict[str, Type] = {}

    def go(q: Pattern) -> None:
        match q:
            case VarPat(n, t) | BangVar(n, t):
                out[n] = t
            case TensorPat(l, r) | WithPat(l, r):
                go(l)
                go(r)

    go(p)
    return out


def pattern_erasure_types(p: Pattern) -> dict[str, Type]:
    """Variable name to the type counted by the workload when it is erased."""
    out: dict[str, Type] = {}

    def go(q: Pattern) -> None:
        match q:
            case VarPat(n, t):
                out[n] = t
            case BangVar(n, t):
                out[n] = ty.Bang(t)
            case TensorPat(l, r) | WithPat(l, r):
                go(l)
                go(r)

    go(p)
    return out


def check_pattern_linear(p: Pattern) -> None:
    names = pattern_vars(p)
    if len(names) != len(set(names)):
        raise ShapeMismatch(f"variable repeated in pattern {p}")


def affine_pat(p: Pattern) -> Pattern:
    return WithPat(UnitPat(), p)


def with_pat(ps: list[Pattern]) -> Pattern:
    """Right-nested additive pattern over ``ps``; needs at least one entry."""
    assert ps
    out = ps[-1]
    for q in reversed(ps[:-1]):
        out = WithPat(q, out)
    return out


# ------------------------------------------------------------------- terms


class Term:
    """Base class. Subclasses are frozen dataclasses; derived data is cached."""

    @cached_property
    def fv(self) -> frozenset[str]:
        return frozenset(_fv(self))

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in children(self))

    def __str__(self) -> str:
        from .surface import show_term
        return show_term(self)


@dataclass(frozen=True, eq=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Lam(Term):
    pat: Pattern
    body: Term


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True)
class Unit(Term):
    pass


@dataclass(frozen=True)
class Pair(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Bang(Term):
    body: Term


@dataclass(frozen=True)
class Top(Term):
    pass


@dataclass(frozen=True)
class WithPair(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Num(Term):
    value: float

    def __eq__(self, other: object) -> bool:
        # bitwise-ish equality so that structural comparison is exact
        return isinstance(other, Num) and (
            self.value == other.value or (math.isnan(self.value) and math.isnan(other.value)))

    def __hash__(self) -> int:
        return hash(("Num", self.value))


@dataclass(frozen=True)
class Fun(Term):
    symbol: str


@dataclass(frozen=True)
class DotPlus(Term):
    pass


@dataclass(frozen=True)
class DotTimes(Term):
    pass


def children(t: Term) -> tuple[Term, ...]:
    match t:
        case Lam(_, b) | Bang(b):
            return (b,)
        case App(a, b) | Pair(a, b) | WithPair(a, b):
            return (a, b)
    return ()


def _fv(t: Term) -> Iterable[str]:
    match t:
        case Var(n):
            return (n,)
        case Lam(p, b):
            return b.fv - set(pattern_vars(p))
        case Bang(b):
            return b.fv
        case App(a, b) | Pair(a, b) | WithPair(a, b):
            return a.fv | b.fv
    return ()


def free_vars(t: Term) -> frozenset[str]:
    return t.fv


def all_names(t: Term) -> set[str]:
    """Every variable name occurring in ``t``, bound or free."""
    out: set[str] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        match u:
            case Var(n):
                out.add(n)
            case Lam(p, _):
                out.update(pattern_vars(p))
        stack.extend(children(u))
    return out


# sugar ------------------------------------------------------------------


def let(p: Pattern, n: Term, m: Term) -> Term:
    """``let p = n in m`` is ``(lam p . m) n``."""
    return App(Lam(p, m), n)


def affine_term(m: Term) -> Term:
    return WithPair(Unit(), m)


def with_tuple(ms: list[Term]) -> Term:
    if not ms:
        return Top()
    out = ms[-1]
    for m in reversed(ms[:-1]):
        out = WithPair(m, out)
    return out


def apply(f: Term, *args: Term) -> Term:
    for a in args:
        f = App(f, a)
    return f


def fun_call(symbol: str, *args: Term) -> Term:
    """``f(!a)`` or ``f(!a, !b)`` for arguments already boxed by the caller."""
    if len(args) == 1:
        return App(Fun(symbol), args[0])
    return App(Fun(symbol), Pair(args[0], args[1]))


def dplus(a: Term, b: Term) -> Term:
    return App(DotPlus(), WithPair(a, b))


def dtimes(a: Term, b: Term) -> Term:
    return App(App(DotTimes(), a), b)


# ------------------------------------------------------------ fresh names


@dataclass
class FreshSupply:
    """Generates ``base#n`` names; never returns a name in ``avoid``."""
    prefix: str = "v"
    counter: int = 0
    avoid: set[str] = field(default_factory=set)

    def fresh(self, base: str | None = None) -> str:
        stem = (base or self.prefix).split("#")[0]
        while True:
            self.counter += 1
            name = f"{stem}#{self.counter}"
            if name not in self.avoid:
                self.avoid.add(name)
                return name

    def reserve(self, names: Iterable[str]) -> None:
        self.avoid.update(names)


# ------------------------------------------------------------ substitution


def is_value_for(v: Term, p: Pattern) -> bool:
    match p:
        case VarPat():
            return True
        case BangVar():
            return isinstance(v, Bang)
        case UnitPat():
            return isinstance(v, Unit)
        case TensorPat(l, r):
            return isinstance(v, Pair) and is_value_for(v.left, l) and is_value_for(v.right, r)
        case WithPat(l, r):
            return isinstance(v, WithPair) and is_value_for(v.left, l) and is_value_for(v.right, r)
    return False


def match_pattern(p: Pattern, v: Term) -> dict[str, Term]:
    """Dispatch the components of the value ``v`` to the variables of ``p``."""
    out: dict[str, Term] = {}

    def go(q: Pattern, w: Term) -> None:
        match q, w:
            case VarPat(n, _), _:
                out[n] = w
            case BangVar(n, _), Bang(b):
                out[n] = b
            case UnitPat(), Unit():
                pass
            case TensorPat(l, r), Pair(a, b):
                go(l, a)
                go(r, b)
            case WithPat(l, r), WithPair(a, b):
                go(l, a)
                go(r, b)
            case _:
                raise ShapeMismatch(f"{w} is not a value for pattern {q}")

    go(p, v)
    return out


def rename_pattern(p: Pattern, ren: dict[str, str]) -> Pattern:
    match p:
        case VarPat(n, t):
            return VarPat(ren.get(n, n), t)
        case BangVar(n, t):
            return BangVar(ren.get(n, n), t)
        case UnitPat():
            return p
        case TensorPat(l, r):
            return TensorPat(rename_pattern(l, ren), rename_pattern(r, ren))
        case WithPat(l, r):
            return WithPat(rename_pattern(l, ren), rename_pattern(r, ren))
    raise TypeError(p)


def substitute(m: Term, sigma: dict[str, Term], supply: FreshSupply | None = None) -> Term:
    """Simultaneous capture-avoiding substitution of terms for variables."""
    sigma = {k: v for k, v in sigma.items() if k in m.fv}
    if not sigma:
        return m
    incoming: set[str] = set()
    for v in sigma.values():
        incoming |= v.fv
    if supply is None:
        supply = FreshSupply(avoid=all_names(m) | incoming | set(sigma))
    return _subst(m, sigma, incoming, supply)


def _subst(m: Term, sigma: dict[str, Term], incoming: set[str], supply: FreshSupply) -> Term:
    if not (m.fv & sigma.keys()):
        return m
    match m:
        case Var(n):
            return sigma.get(n, m)
        case Lam(p, b):
            bound = set(pattern_vars(p))
            inner = {k: v for k, v in sigma.items() if k not in bound}
            clash = bound & incoming
            if clash:
                ren = {x: supply.fresh(x) for x in sorted(clash)}
                p = rename_pattern(p, ren)
                b = _subst(b, {x: Var(y) for x, y in ren.items()}, set(ren.values()), supply)
            return Lam(p, _subst(b, inner, incoming, supply))
        case App(a, b):
            return App(_subst(a, sigma, incoming, supply), _subst(b, sigma, incoming, supply))
        case Pair(a, b):
            return Pair(_subst(a, sigma, incoming, supply), _subst(b, sigma, incoming, supply))
        case WithPair(a, b):
            return WithPair(_subst(a, sigma, incoming, supply), _subst(b, sigma, incoming, supply))
        case Bang(b):
            return Bang(_subst(b, sigma, incoming, supply))
    return m


def subst(m: Term, v: Term, p: Pattern, supply: FreshSupply | None = None) -> Term:
    """``m{v/p}``: dispatch the value ``v`` over the pattern ``p`` into ``m``."""
    return substitute(m, match_pattern(p, v), supply)


def rename_vars(m: Term, ren: dict[str, str]) -> Term:
    return substitute(m, {k: Var(v) for k, v in ren.items()})


def alpha_equal(a: Term, b: Term) -> bool:
    """Structural equality up to the names of bound variables."""

    def pat(p: Pattern, q: Pattern, env: dict[str, str]) -> bool:
        match p, q:
            case (VarPat(n, t), VarPat(m, s)) | (BangVar(n, t), BangVar(m, s)):
                if type(p) is not type(q) or t != s:
                    return False
                env[n] = m
                return True
            case UnitPat(), UnitPat():
                return True
            case TensorPat(l1, r1), TensorPat(l2, r2):
                return pat(l1, l2, env) and pat(r1, r2, env)
            case WithPat(l1, r1), WithPat(l2, r2):
                return pat(l1, l2, env) and pat(r1, r2, env)
        return False

    def go(x: Term, y: Term, env: dict[str, str]) -> bool:
        match x, y:
            case Var(n), Var(m):
                return env.get(n, n) == m
            case Lam(p, b), Lam(q, c):
                inner = dict(env)
                return pat(p, q, inner) and go(b, c, inner)
            case (App(a1, b1), App(a2, b2)) | (Pair(a1, b1), Pair(a2, b2)) | (
                    WithPair(a1, b1), WithPair(a2, b2)):
                if type(x) is not type(y):
                    return False
                return go(a1, a2, env) and go(b1, b2, env)
            case Bang(b), Bang(c):
                return go(b, c, env)
        return type(x) is type(y) and x == y

    return go(a, b, {})


# ------------------------------------------------------- function registry


@dataclass(frozen=True)
class Primitive:
    """A numeric function symbol with its partial derivatives.

    ``derivative`` holds float implementations of the partials; the symbolic
    form used by the transforms lives in ``DERIVATIVE_RECIPES``."""
    symbol: str
    arity: int
    impl: Callable[..., float]
    derivative: tuple[Callable[..., float], ...]


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


REGISTRY: dict[str, Primitive] = {
    "sin": Primitive("sin", 1, math.sin, (math.cos,)),
    "cos": Primitive("cos", 1, math.cos, (lambda x: -math.sin(x),)),
    "exp": Primitive("exp", 1, _exp, (_exp,)),
    "neg": Primitive("neg", 1, lambda x: -x, (lambda x: -1.0,)),
    "add": Primitive("add", 2, lambda x, y: x + y, (lambda x, y: 1.0, lambda x, y: 1.0)),
    "sub": Primitive("sub", 2, lambda x, y: x - y, (lambda x, y: 1.0, lambda x, y: -1.0)),
    "mul": Primitive("mul", 2, lambda x, y: x * y, (lambda x, y: y, lambda x, y: x)),
}

MAX_ARITY = 2


def fun_type(symbol: str) -> Type:
    prim = REGISTRY[symbol]
    bang_r = ty.Bang(ty.REAL)
    if prim.arity == 1:
        return ty.Arrow(bang_r, bang_r)
    return ty.Arrow(ty.Tensor(bang_r, bang_r), bang_r)


# A derivative recipe describes how to compute the partial as a small program
# over the argument variables, shared by both languages:
#   ("var", i)          the i-th argument itself
#   ("const", r)        a numeral
#   ("call", g, [i..])  another primitive applied to arguments
#   ("neg-call", g, [i..]) negation of a primitive applied to arguments
DERIVATIVE_RECIPES: dict[str, tuple[tuple, ...]] = {
    "sin": (("call", "cos", (0,)),),
    "cos": (("neg-call", "sin", (0,)),),
    "exp": (("call", "exp", (0,)),),
    "neg": (("const", -1.0),),
    "add": (("const", 1.0), ("const", 1.0)),
    "sub": (("const", 1.0), ("const", -1.0)),
    "mul": (("var", 1), ("var", 0)),
}


def fresh_names_for(terms: Iterable[Term]) -> FreshSupply:
    names: set[str] = set()
    for t in terms:
        names |= all_names(t)
    return FreshSupply(avoid=names)


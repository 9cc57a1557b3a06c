"""Algorithmic linear type checker.

The declarative rules leave the environment split of applications and
tensor pairs implicit. Here the split is driven by free-variable occurrence:
exponential entries are shared, every linear entry goes to the unique
subterm mentioning it, and an unused linear entry is either discarded by a
structural rule (weakening of ``!x``, ``()``, or an additive projection onto
a discardable side) or handed to a subterm that can absorb it (``<>`` or the
numeral ``0``).

Environments are kept normalised: tensor patterns are split and unit
patterns dropped as soon as they enter, additive patterns are projected
lazily, at the point where a choice is forced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import (
    AffineViolation, LinearityViolation, NonExponentialDuplication, TypeMismatch, UnboundVar,
)
from . import types as ty
from .terms import (
    App, Bang, BangVar, DotPlus, DotTimes, FreshSupply, Fun, Lam, Num, Pair, Pattern, Term,
    TensorPat, Top, Unit, UnitPat, Var, VarPat, WithPair, WithPat, fun_type, pattern_type,
    pattern_var_set, pattern_vars, rename_pattern,
)
from .types import Type


@dataclass
class Derivation:
    rule: str
    bangs: dict[str, Type]
    lin: tuple[Pattern, ...]
    subject: Term
    type: Type
    children: list["Derivation"] = field(default_factory=list)
    split: dict[str, list[str]] | None = None

    @property
    def env(self) -> list[Pattern]:
        return [BangVar(n, t) for n, t in self.bangs.items()] + list(self.lin)

    def rules(self) -> list[str]:
        out = [self.rule]
        for c in self.children:
            out.extend(c.rules())
        return out

    def to_json(self) -> dict[str, Any]:
        node: dict[str, Any] = {
            "rule": self.rule,
            "env": [str(p) for p in self.env],
            "subject": str(self.subject),
            "type": str(self.type),
            "children": [c.to_json() for c in self.children],
        }
        if self.split is not None:
            node["split"] = self.split
        return node


def _discardable(p: Pattern) -> bool:
    match p:
        case BangVar() | UnitPat():
            return True
        case TensorPat(l, r):
            return _discardable(l) and _discardable(r)
        case WithPat(l, r):
            return _discardable(l) or _discardable(r)
    return False


def absorbs(t: Term) -> bool:
    """Whether ``t`` can consume an arbitrary unused linear entry."""
    match t:
        case Top():
            return True
        case Num(v):
            return v == 0.0
        case App(a, b) | Pair(a, b):
            return absorbs(a) or absorbs(b)
        case WithPair(a, b):
            return absorbs(a) and absorbs(b)
        case Lam(_, b):
            return absorbs(b)
    return False


class _Checker:
    def __init__(self, supply: FreshSupply):
        self.supply = supply

    # environment manipulation -------------------------------------------------

    def extend(self, bangs: dict[str, Type], lin: tuple[Pattern, ...], p: Pattern,
               ) -> tuple[dict[str, Type], tuple[Pattern, ...]]:
        """Add pattern ``p``, hiding any entries it shadows."""
        names = pattern_var_set(p)
        if names & bangs.keys():
            bangs = {k: v for k, v in bangs.items() if k not in names}
        if any(names & pattern_var_set(e) for e in lin):
            new_lin = []
            for e in lin:
                clash = names & pattern_var_set(e)
                if clash:
                    e = rename_pattern(e, {x: self.supply.fresh(x) for x in clash})
                new_lin.append(e)
            lin = tuple(new_lin)
        return self.add(bangs, lin, p)

    def add(self, bangs: dict[str, Type], lin: tuple[Pattern, ...], p: Pattern,
            ) -> tuple[dict[str, Type], tuple[Pattern, ...]]:
        match p:
            case BangVar(n, t):
                bangs = dict(bangs)
                bangs[n] = t
                return bangs, lin
            case UnitPat():
                return bangs, lin
            case TensorPat(l, r):
                bangs, lin = self.add(bangs, lin, l)
                return self.add(bangs, lin, r)
            case _:
                return bangs, lin + (p,)

    def discard(self, p: Pattern, subject: Term) -> None:
        if not _discardable(p):
            raise LinearityViolation(
                f"linear entry {p} is unused in {subject}")

    # main judgment ---------------------------------------------------------------

    def synth(self, bangs: dict[str, Type], lin: tuple[Pattern, ...], t: Term) -> Derivation:
        match t:
            case Var(n):
                return self.var(bangs, lin, t, n)
            case Num(v) if v == 0.0:
                return Derivation("Z", bangs, lin, t, ty.REAL)
            case Top():
                return Derivation("Top", bangs, lin, t, ty.TOP)
            case Num():
                return self.closed(bangs, lin, t, "R", ty.REAL)
            case Unit():
                return self.closed(bangs, lin, t, "1i", ty.UNIT)
            case Fun(s):
                arity = "F1" if isinstance(fun_type(s).dom, ty.Bang) else "F2"
                return self.closed(bangs, lin, t, arity, fun_type(s))
            case DotPlus():
                return self.closed(bangs, lin, t, "S",
                                   ty.Arrow(ty.With(ty.REAL, ty.REAL), ty.REAL))
            case DotTimes():
                return self.closed(bangs, lin, t, "M",
                                   ty.Arrow(ty.REAL, ty.Arrow(ty.REAL, ty.REAL)))
            case Lam(p, body):
                names = pattern_vars(p)
                if len(names) != len(set(names)):
                    raise LinearityViolation(f"variable repeated in pattern {p}")
                b2, l2 = self.extend(bangs, lin, p)
                d = self.synth(b2, l2, body)
                return Derivation("-o i", bangs, lin, t, ty.Arrow(pattern_type(p), d.type), [d])
            case App(f, a):
                dl, dr, split = self.split(bangs, lin, t, f, a)
                ft = dl.type
                if not isinstance(ft, ty.Arrow):
                    raise TypeMismatch(f"{f} has type {ft}, not a function type")
                if ft.dom != dr.type:
                    raise TypeMismatch(
                        f"argument {a} has type {dr.type}, expected {ft.dom}")
                return Derivation("-o e", bangs, lin, t, ft.cod, [dl, dr], split)
            case Pair(a, b):
                dl, dr, split = self.split(bangs, lin, t, a, b)
                return Derivation("(x) i", bangs, lin, t, ty.Tensor(dl.type, dr.type),
                                  [dl, dr], split)
            case WithPair(a, b):
                dl = self.synth(bangs, lin, a)
                dr = self.synth(bangs, lin, b)
                return Derivation("& i", bangs, lin, t, ty.With(dl.type, dr.type), [dl, dr])
            case Bang(b):
                for e in lin:
                    used = pattern_var_set(e) & b.fv
                    if used:
                        raise LinearityViolation(
                            f"linear variable {sorted(used)[0]} occurs under ! in {t}")
                    self.discard(e, t)
                d = self.synth(bangs, (), b)
                return Derivation("!i", bangs, lin, t, ty.Bang(d.type), [d])
        raise TypeError(f"not a term: {t!r}")

    def closed(self, bangs, lin, t: Term, rule: str, a: Type) -> Derivation:
        for e in lin:
            self.discard(e, t)
        return Derivation(rule, bangs, lin, t, a)

    def var(self, bangs, lin, t: Term, n: str) -> Derivation:
        owner = None
        for e in lin:
            if n in pattern_var_set(e):
                owner = e
            else:
                self.discard(e, t)
        if owner is None:
            if n in bangs:
                return Derivation("!e", bangs, lin, t, bangs[n])
            raise UnboundVar(f"unbound variable {n}")
        # project the owning entry down to the variable
        steps = []
        p = owner
        while True:
            match p:
                case VarPat(_, a):
                    break
                case BangVar(_, a):
                    break
                case WithPat(l, r):
                    if n in pattern_var_set(l):
                        steps.append("&e1")
                        p = l
                    else:
                        steps.append("&e2")
                        p = r
                case TensorPat(l, r):
                    other = r if n in pattern_var_set(l) else l
                    self.discard(other, t)
                    steps.append("(x)e")
                    p = l if n in pattern_var_set(l) else r
                case _:
                    raise UnboundVar(n)
        d = Derivation("v" if isinstance(p, VarPat) else "!e", bangs, lin, t, a)
        for s in reversed(steps):
            d = Derivation(s, bangs, lin, t, a, [d])
        return d

    def split(self, bangs, lin, t: Term, m: Term, n: Term):
        fm, fn = m.fv, n.fv
        pending = list(lin)
        left: list[Pattern] = []
        right: list[Pattern] = []
        while pending:
            e = pending.pop(0)
            vs = pattern_var_set(e)
            um, un = vs & fm, vs & fn
            if um and un:
                if isinstance(e, WithPat):
                    used = um | un
                    side = None
                    if used <= pattern_var_set(e.left):
                        side = e.left
                    elif used <= pattern_var_set(e.right):
                        side = e.right
                    if side is None:
                        raise LinearityViolation(
                            f"both components of additive entry {e} are used in {t}")
                    bangs, extra = self.add(bangs, (), side)
                    pending = list(extra) + pending
                    continue
                x = sorted(um & un)[0]
                if isinstance(e, VarPat) and isinstance(e.ty, ty.Bang):
                    raise NonExponentialDuplication(
                        f"variable {x} of type {e.ty} is not an exponential pattern "
                        f"and cannot be duplicated in {t}")
                raise LinearityViolation(f"linear variable {x} used twice in {t}")
            if um:
                left.append(e)
            elif un:
                right.append(e)
            elif _discardable(e):
                continue
            elif absorbs(m):
                left.append(e)
            elif absorbs(n):
                right.append(e)
            else:
                raise LinearityViolation(f"linear entry {e} is unused in {t}")
        dl = self.synth(bangs, tuple(left), m)
        dr = self.synth(bangs, tuple(right), n)
        split = {
            "shared": sorted(bangs),
            "left": left,
            "right": right,
        }
        return dl, dr, split


def _prepare(env: list[Pattern] | None, supply: FreshSupply | None):
    env = list(env or [])
    seen: set[str] = set()
    for p in env:
        names = pattern_vars(p)
        if seen & set(names) or len(names) != len(set(names)):
            raise LinearityViolation("environment patterns must be variable-disjoint")
        seen |= set(names)
    checker = _Checker(supply or FreshSupply(prefix="h", avoid=set(seen)))
    bangs: dict[str, Type] = {}
    lin: tuple[Pattern, ...] = ()
    for p in env:
        bangs, lin = checker.add(bangs, lin, p)
    return checker, bangs, lin


def check(env: list[Pattern] | None, t: Term, expected: Type | None = None,
          supply: FreshSupply | None = None) -> Derivation:
    """Derive ``env |- t : expected`` (or synthesise the type when omitted)."""
    checker, bangs, lin = _prepare(env, supply)
    d = checker.synth(bangs, lin, t)
    if expected is not None and d.type != expected:
        raise TypeMismatch(f"{t} has type {d.type}, expected {expected}")
    return d


def infer(env: list[Pattern] | None, t: Term) -> Type:
    return check(env, t).type


def check_additive_sharing(env: list[Pattern] | None, t: Term, expected: Type) -> Derivation:
    """The additive pair rule: both components see the whole environment."""
    if not isinstance(t, WithPair):
        raise TypeMismatch(f"{t} is not an additive pair")
    d = check(env, t, expected)
    assert d.rule == "& i"
    return d


def check_affine(env: list[Pattern] | None, t: Term, expected: Type) -> Derivation:
    """Check against a type that may use the affine modality.

    Promotion of ``<(), M>`` requires every environment pattern to be an
    exponential variable or an affine pattern ``<(), p>``."""
    if ty.is_affine(expected) and isinstance(t, WithPair) and isinstance(t.left, Unit):
        for p in env or []:
            if not (isinstance(p, BangVar) or (isinstance(p, WithPat)
                                               and isinstance(p.left, UnitPat))):
                raise AffineViolation(
                    f"affine promotion needs exponential or affine patterns, found {p}")
    return check(env, t, expected)


def env_from_types(types: dict[str, Type], bang: bool = False) -> list[Pattern]:
    if bang:
        return [BangVar(n, t) for n, t in types.items()]
    return [VarPat(n, t) for n, t in types.items()]

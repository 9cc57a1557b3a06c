"""Small-step reduction (full beta and safe call-by-closed-strong-value) with
flop accounting, plus a big-step environment evaluator used for numerics."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import FuelExhausted, ShapeMismatch
from .terms import (
    REGISTRY, App, Bang, BangVar, DotPlus, DotTimes, FreshSupply, Fun, Lam, Num, Pair,
    Pattern, Term, TensorPat, Top, Unit, UnitPat, Var, VarPat, WithPair, WithPat, all_names,
    children, is_value_for, subst,
)

DEFAULT_FUEL = 10**7


class StepKind(enum.Enum):
    BetaLam = "beta-lam"
    BetaF = "beta-f"
    BetaPlus = "beta-plus"
    BetaTimes = "beta-times"

    @property
    def is_numeric(self) -> bool:
        return self is not StepKind.BetaLam


def is_strong_value(t: Term) -> bool:
    cached = t.__dict__.get("_sv")
    if cached is not None:
        return cached
    match t:
        case Var() | Num() | Fun() | DotPlus() | DotTimes() | Lam() | Unit() | Top():
            out = True
        case Pair(a, b) | WithPair(a, b):
            out = is_strong_value(a) and is_strong_value(b)
        case Bang(b):
            out = is_strong_value(b)
        case App(DotTimes(), w):
            out = is_strong_value(w)
        case _:
            out = False
    t.__dict__["_sv"] = out
    return out


def is_closed_strong_value(t: Term) -> bool:
    return not t.fv and is_strong_value(t)


def redex_kind(t: Term, safe: bool) -> Optional[StepKind]:
    match t:
        case App(Lam(p, _), v):
            if safe and not is_closed_strong_value(v):
                return None
            return StepKind.BetaLam if is_value_for(v, p) else None
        case App(Fun(f), Bang(Num())) if REGISTRY[f].arity == 1:
            return StepKind.BetaF
        case App(Fun(f), Pair(Bang(Num()), Bang(Num()))) if REGISTRY[f].arity == 2:
            return StepKind.BetaF
        case App(DotPlus(), WithPair(Num(), Num())):
            return StepKind.BetaPlus
        case App(App(DotTimes(), Num()), Num()):
            return StepKind.BetaTimes
    return None


def contract(t: Term, kind: StepKind, supply: FreshSupply | None = None) -> Term:
    match kind, t:
        case StepKind.BetaLam, App(Lam(p, body), v):
            return subst(body, v, p, supply)
        case StepKind.BetaF, App(Fun(f), Bang(Num(r))):
            return Bang(Num(REGISTRY[f].impl(r)))
        case StepKind.BetaF, App(Fun(f), Pair(Bang(Num(r1)), Bang(Num(r2)))):
            return Bang(Num(REGISTRY[f].impl(r1, r2)))
        case StepKind.BetaPlus, App(DotPlus(), WithPair(Num(a), Num(b))):
            return Num(a + b)
        case StepKind.BetaTimes, App(App(DotTimes(), Num(a)), Num(b)):
            return Num(a * b)
    raise ValueError(f"{t} is not a {kind} redex")


def _has_redex(t: Term, safe: bool) -> bool:
    key = "_rs" if safe else "_rb"
    cached = t.__dict__.get(key)
    if cached is not None:
        return cached
    out = redex_kind(t, safe) is not None or any(_has_redex(c, safe) for c in children(t))
    t.__dict__[key] = out
    return out


def _find(t: Term, safe: bool, innermost: bool) -> Optional[tuple[int, ...]]:
    path: list[int] = []
    while True:
        if not innermost and redex_kind(t, safe) is not None:
            return tuple(path)
        for i, c in enumerate(children(t)):
            if _has_redex(c, safe):
                path.append(i)
                t = c
                break
        else:
            return tuple(path) if redex_kind(t, safe) is not None else None


def subterm_at(t: Term, path: tuple[int, ...]) -> Term:
    for i in path:
        t = children(t)[i]
    return t


def replace_at(t: Term, path: tuple[int, ...], new: Term) -> Term:
    if not path:
        return new
    i, rest = path[0], path[1:]
    match t:
        case Lam(p, b):
            return Lam(p, replace_at(b, rest, new))
        case Bang(b):
            return Bang(replace_at(b, rest, new))
        case App(a, b):
            return App(replace_at(a, rest, new), b) if i == 0 else App(a, replace_at(b, rest, new))
        case Pair(a, b):
            return Pair(replace_at(a, rest, new), b) if i == 0 else Pair(a, replace_at(b, rest, new))
        case WithPair(a, b):
            return (WithPair(replace_at(a, rest, new), b) if i == 0
                    else WithPair(a, replace_at(b, rest, new)))
    raise ValueError("bad path")


def under_bang(t: Term, path: tuple[int, ...]) -> bool:
    for i in path:
        if isinstance(t, Bang):
            return True
        t = children(t)[i]
    return False


def all_redexes(t: Term, safe: bool) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []

    def go(u: Term, path: tuple[int, ...]) -> None:
        if not _has_redex(u, safe):
            return
        if redex_kind(u, safe) is not None:
            out.append(path)
        for i, c in enumerate(children(u)):
            go(c, path + (i,))

    go(t, ())
    return out


def _step_at(t: Term, path: tuple[int, ...], safe: bool, supply: FreshSupply | None):
    red = subterm_at(t, path)
    kind = redex_kind(red, safe)
    assert kind is not None
    return replace_at(t, path, contract(red, kind, supply)), kind


def step_beta(t: Term, supply: FreshSupply | None = None) -> Optional[tuple[Term, StepKind]]:
    """One beta step at the leftmost-outermost redex, or None on a normal form."""
    path = _find(t, safe=False, innermost=False)
    if path is None:
        return None
    return _step_at(t, path, False, supply)


def step_safe(t: Term, supply: FreshSupply | None = None) -> Optional[tuple[Term, StepKind]]:
    """One safe step at the leftmost-innermost enabled redex."""
    path = _find(t, safe=True, innermost=True)
    if path is None:
        return None
    return _step_at(t, path, True, supply)


@dataclass
class EvalTrace:
    steps: list[tuple[StepKind, tuple[int, ...]]] = field(default_factory=list)
    flops: int = 0
    banked_flops: int = 0
    sizes: list[int] = field(default_factory=list)
    terms: list[Term] | None = None

    @property
    def numeric_steps(self) -> int:
        return self.flops + self.banked_flops

    def to_json(self) -> list[dict[str, Any]]:
        return [{"kind": k.value, "redex_path": list(p), "term_size": s}
                for (k, p), s in zip(self.steps, self.sizes)]


def normalize(t: Term, strategy: str = "safe", fuel: int = DEFAULT_FUEL,
              record_terms: bool = False, rng: random.Random | None = None,
              on_step: Callable[[Term, StepKind], None] | None = None,
              ) -> tuple[Term, EvalTrace]:
    """Reduce to a normal form of the chosen strategy.

    ``strategy`` is ``"safe"`` (leftmost-innermost, closed strong values),
    ``"beta"`` (leftmost-outermost) or ``"random"`` (a uniformly chosen beta
    redex at each step, driven by ``rng``). Numeric steps inside a box are
    counted in ``banked_flops``."""
    safe = strategy == "safe"
    supply = FreshSupply(prefix="r", avoid=all_names(t))
    trace = EvalTrace(terms=[t] if record_terms else None)
    rng = rng or random.Random(0)
    for _ in range(fuel):
        if strategy == "random":
            paths = all_redexes(t, safe=False)
            path = rng.choice(paths) if paths else None
        else:
            path = _find(t, safe=safe, innermost=safe)
        if path is None:
            return t, trace
        banked = under_bang(t, path)
        t, kind = _step_at(t, path, safe, supply)
        trace.steps.append((kind, path))
        trace.sizes.append(t.size)
        if kind.is_numeric:
            if banked:
                trace.banked_flops += 1
            else:
                trace.flops += 1
        if record_terms:
            trace.terms.append(t)
        if on_step is not None:
            on_step(t, kind)
    raise FuelExhausted(f"no normal form within {fuel} steps")


# ------------------------------------------------------ big-step evaluation


@dataclass(frozen=True)
class TensV:
    left: Any
    right: Any


@dataclass(frozen=True)
class WithV:
    left: Any
    right: Any


@dataclass(frozen=True)
class BangV:
    body: Any


@dataclass(frozen=True)
class UnitV:
    pass


@dataclass(frozen=True)
class TopV:
    pass


@dataclass
class Closure:
    pat: Pattern
    body: Term
    env: dict[str, Any]


@dataclass(frozen=True)
class PrimV:
    name: str          # a registry symbol, "dot+" or "dot*"
    args: tuple = ()


UNIT_V = UnitV()
TOP_V = TopV()


def bind(p: Pattern, v: Any, env: dict[str, Any]) -> None:
    match p, v:
        case VarPat(n, _), _:
            env[n] = v
        case BangVar(n, _), BangV(b):
            env[n] = b
        case UnitPat(), UnitV():
            pass
        case TensorPat(l, r), TensV(a, b):
            bind(l, a, env)
            bind(r, b, env)
        case WithPat(l, r), WithV(a, b):
            bind(l, a, env)
            bind(r, b, env)
        case _:
            raise ShapeMismatch(f"value {v} does not match pattern {p}")


def apply_value(f: Any, a: Any) -> Any:
    match f:
        case Closure(p, body, env):
            inner = dict(env)
            bind(p, a, inner)
            return evaluate(body, inner)
        case PrimV("dot+"):
            return a.left + a.right
        case PrimV("dot*", ()):
            return PrimV("dot*", (a,))
        case PrimV("dot*", (x,)):
            return x * a
        case PrimV(name):
            prim = REGISTRY[name]
            if prim.arity == 1:
                return BangV(prim.impl(a.body))
            return BangV(prim.impl(a.left.body, a.right.body))
    raise ShapeMismatch(f"cannot apply {f}")


def evaluate(t: Term, env: dict[str, Any] | None = None) -> Any:
    """Call-by-value evaluation to a semantic value; closures stay opaque."""
    env = env if env is not None else {}
    while True:
        match t:
            case Var(n):
                return env[n]
            case Num(v):
                return v
            case Lam(p, b):
                return Closure(p, b, env)
            case App(Lam(p, body), arg):
                # let-binding: bind and continue in place to limit recursion depth
                v = evaluate(arg, env)
                env = dict(env)
                bind(p, v, env)
                t = body
                continue
            case App(f, a):
                fv = evaluate(f, env)
                av = evaluate(a, env)
                if isinstance(fv, Closure):
                    env = dict(fv.env)
                    bind(fv.pat, av, env)
                    t = fv.body
                    continue
                return apply_value(fv, av)
            case Unit():
                return UNIT_V
            case Top():
                return TOP_V
            case Pair(a, b):
                return TensV(evaluate(a, env), evaluate(b, env))
            case WithPair(a, b):
                return WithV(evaluate(a, env), evaluate(b, env))
            case Bang(b):
                return BangV(evaluate(b, env))
            case Fun(s):
                return PrimV(s)
            case DotPlus():
                return PrimV("dot+")
            case DotTimes():
                return PrimV("dot*")
        raise TypeError(f"not a term: {t!r}")


def value_to_term(v: Any) -> Term:
    """Read back a first-order value as a closed term."""
    match v:
        case float() | int():
            return Num(float(v))
        case UnitV():
            return Unit()
        case TopV():
            return Top()
        case TensV(a, b):
            return Pair(value_to_term(a), value_to_term(b))
        case WithV(a, b):
            return WithPair(value_to_term(a), value_to_term(b))
        case BangV(b):
            return Bang(value_to_term(b))
    raise ShapeMismatch(f"value {v} has no first-order readback")


def term_to_value(t: Term) -> Any:
    match t:
        case Num(v):
            return v
        case Unit():
            return UNIT_V
        case Top():
            return TOP_V
        case Pair(a, b):
            return TensV(term_to_value(a), term_to_value(b))
        case WithPair(a, b):
            return WithV(term_to_value(a), term_to_value(b))
        case Bang(b):
            return BangV(term_to_value(b))
    return evaluate(t)

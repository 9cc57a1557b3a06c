"""Static workload of types and terms, the safe-term predicate and the
dynamic flop-bound check."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NotClosed, NotSafe
from . import types as ty
from .evaluator import normalize
from .terms import (
    App, Bang, DotPlus, DotTimes, Fun, Lam, Pair, Pattern, Term, WithPair,
    children, pattern_bindings, pattern_erasure_types,
)
from .types import Type, type_workload

workload_type = type_workload


def workload_term(t: Term) -> int:
    cached = t.__dict__.get("_w")
    if cached is not None:
        return cached
    match t:
        case Fun() | DotPlus() | DotTimes():
            out = 1
        case Lam(p, body):
            erased = pattern_erasure_types(p)
            out = workload_term(body) + sum(
                type_workload(a) for x, a in erased.items() if x not in body.fv)
        case App(a, b) | Pair(a, b) | WithPair(a, b):
            out = workload_term(a) + workload_term(b)
        case _:
            out = 0
    t.__dict__["_w"] = out
    return out


@dataclass
class Violation:
    condition: str          # "i" or "ii"
    path: tuple[int, ...]
    detail: str


@dataclass
class SafetyReport:
    safe: bool
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.safe


def _env_types(env) -> dict[str, Type]:
    if env is None:
        return {}
    if isinstance(env, dict):
        return dict(env)
    out: dict[str, Type] = {}
    for p in env:
        out.update(pattern_bindings(p))
    return out


def is_safe(t: Term, env: list[Pattern] | dict[str, Type] | None = None,
            first_only: bool = False) -> SafetyReport:
    """Check that boxes carry no workload and additive pairs share only
    ground variables. Free variables of unknown type count as higher-order."""
    violations: list[Violation] = []
    types = _env_types(env)
    stack = [(t, (), types)]
    while stack:
        u, path, scope = stack.pop()
        match u:
            case Bang(b):
                w = workload_term(b)
                if w:
                    violations.append(Violation("i", path, f"workload {w} under ! in {b}"))
            case WithPair(a, b):
                shared = a.fv & b.fv
                bad = sorted(x for x in shared if x not in scope or not ty.is_ground(scope[x]))
                if bad:
                    violations.append(Violation(
                        "ii", path, f"higher-order variables {bad} shared by an additive pair"))
            case Lam(p, _):
                scope = dict(scope)
                scope.update(pattern_bindings(p))
        if violations and first_only:
            break
        for i, c in reversed(list(enumerate(children(u)))):
            stack.append((c, path + (i,), scope))
    return SafetyReport(not violations, violations)


@dataclass
class FlopReport:
    static: int
    dynamic: int
    banked: int

    @property
    def holds(self) -> bool:
        return self.dynamic <= self.static

    def to_json(self) -> dict:
        return {"static": self.static, "dynamic": self.dynamic, "banked": self.banked,
                "holds": self.holds}


def check_flop_bound(t: Term, fuel: int | None = None) -> FlopReport:
    if t.fv:
        raise NotClosed(f"free variables {sorted(t.fv)}")
    rep = is_safe(t)
    if not rep:
        raise NotSafe("; ".join(v.detail for v in rep.violations))
    _, trace = normalize(t, "safe", **({"fuel": fuel} if fuel else {}))
    return FlopReport(workload_term(t), trace.flops, trace.banked_flops)

"""Random purely primal Linear A programs for property checks.

Programs are let-chains over the registry primitives. Every input and every
binder is consumed, tuples are always destructured into variables that are
used later, and ``drop`` only discards primitive calls, so no transform has
to erase a bare tangent.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .lina.ast import Drop, Expr, Let, LetTupP, LetTupP0, Lit, PVar, Prim, TupP
from .terms import REGISTRY

UNARY = sorted(k for k, p in REGISTRY.items() if p.arity == 1)
BINARY = sorted(k for k, p in REGISTRY.items() if p.arity == 2)
MAX_DEPTH = 6
MAX_INPUTS = 4
INPUT_RANGE = (-2.0, 2.0)


@dataclass
class Program:
    expr: Expr
    inputs: list[str]
    depth: int

    def sample_inputs(self, rng: random.Random) -> dict[str, float]:
        return {x: rng.uniform(*INPUT_RANGE) for x in self.inputs}


def random_program(rng: random.Random, depth: int | None = None,
                   n_inputs: int | None = None) -> Program:
    """A program with at most ``depth`` let steps over ``n_inputs`` reals."""
    n_inputs = n_inputs or rng.randint(1, MAX_INPUTS)
    inputs = [f"x{i}" for i in range(n_inputs)]
    depth = depth if depth is not None else rng.randint(max(1, n_inputs - 1), MAX_DEPTH)
    depth = max(depth, n_inputs - 1, 1)
    scope = list(inputs)
    unused = list(inputs)
    steps: list[tuple] = []
    names = iter(f"v{i}" for i in range(1, 10_000))

    def take(prefer_unused: bool) -> str:
        pool = unused if prefer_unused and unused else scope
        v = rng.choice(pool)
        if v in unused:
            unused.remove(v)
        return v

    def fresh() -> str:
        v = next(names)
        scope.append(v)
        unused.append(v)
        return v

    def push(step: tuple) -> None:
        if step[0] == "let":
            step = ("let", fresh(), step[1])
        elif step[0] == "tuple":
            step = step + (fresh(), fresh())
        steps.append(step)

    for step in range(depth):
        remaining = depth - step
        if len(unused) - 1 >= remaining and len(unused) >= 2:
            a, b = take(True), take(True)
            push(("let", Prim(rng.choice(BINARY), (a, b))))
            continue
        kind = rng.choices(["unary", "binary", "lit", "tuple", "drop"], [4, 5, 1, 1, 1])[0]
        if kind == "unary":
            push(("let", Prim(rng.choice(UNARY), (take(rng.random() < 0.7),))))
        elif kind == "binary":
            a = take(rng.random() < 0.7)
            b = take(rng.random() < 0.5)
            push(("let", Prim(rng.choice(BINARY), (a, b))))
        elif kind == "lit":
            push(("let", Lit(round(rng.uniform(*INPUT_RANGE), 3))))
        elif kind == "tuple" and len(scope) >= 2:
            a, b = take(True), take(True)
            z = next(names)
            push(("tuple", z, a, b))
        else:
            u = next(names)
            steps.append(("drop", u, Prim(rng.choice(UNARY), (rng.choice(scope),))))
    while len(unused) > 1:
        a, b = take(True), take(True)
        push(("let", Prim(rng.choice(BINARY), (a, b))))
    result: Expr = PVar(unused[0]) if unused else PVar(scope[-1])
    for s in reversed(steps):
        match s:
            case ("let", v, rhs):
                result = Let(v, rhs, result)
            case ("tuple", z, a, b, c, d):
                result = Let(z, TupP(a, b), LetTupP(c, d, z, result))
            case ("drop", u, rhs):
                result = Let(u, Drop(rhs), LetTupP0(u, result))
    return Program(result, inputs, len(steps))


def corpus(n: int, seed: int = 0) -> list[Program]:
    rng = random.Random(seed)
    return [random_program(rng) for _ in range(n)]

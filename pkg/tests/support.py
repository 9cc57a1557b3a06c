"""Shared fixtures: the running example and a cached corpus pipeline."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from llad import types as ty
from llad.ad import forward, free_order, primal_type, tangent_type, transpose, unzip, uniquify
from llad.corpus import Program, corpus
from llad.lina.syntax import parse_expr
from llad.terms import App, BangVar, Lam, Num, TensorPat, Term, Var, VarPat, affine_pat
from llad.translation import delta_b_primal, numseq_subst

ROOT = Path(__file__).resolve().parent.parent
RUNNING_SRC = (ROOT / "examples" / "g.lina").read_text()
CORPUS_SEED = 7
CORPUS_SIZE = 200

# criterion number -> "PASS ..." / "FAIL ..." line, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def report(n: int, ok: bool, title: str, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n:2d}  {title}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def running_expr():
    return parse_expr(RUNNING_SRC)


def g(x: float, y: float) -> float:
    return math.sin(x) * y + math.cos(x)


def dg(x: float, dx: float, y: float, dy: float) -> float:
    return (math.cos(x) * y) * dx + math.sin(x) * dy - math.sin(x) * dx


def grad_g(x: float, y: float, zbar: float) -> tuple[float, float]:
    return zbar * (y * math.cos(x) - math.sin(x)), math.sin(x) * zbar


def nest(xs: list):
    """Right-nested tuple of a non-empty list."""
    return xs[0] if len(xs) == 1 else (xs[0], nest(xs[1:]))


@dataclass
class Pipeline:
    program: Program
    primal: Term
    theta: list[str]
    env: dict[str, ty.Type]
    F: Term
    U: Term
    TF: Term
    TU: Term
    out_type: ty.Type

    @property
    def L(self) -> ty.Type:
        return ty.with_tuple([ty.REAL] * len(self.theta))

    @property
    def H(self) -> ty.Type:
        return tangent_type(self.out_type)

    @property
    def benv(self) -> list:
        return [BangVar(x, a) for x, a in self.env.items()]

    def ground(self, values: dict[str, float], cotangent: float = 1.0) -> Term:
        """Closed ground term: run the reverse-mode program and apply its map."""
        e, h, l = self.out_type, self.H, self.L
        pat = TensorPat(BangVar("v#", e), affine_pat(VarPat("g#", ty.Arrow(h, l))))
        body = App(Var("g#"), Num(cotangent))
        return App(Lam(pat, body), numseq_subst(self.TU, values, self.env))


def build(program: Program) -> Pipeline:
    p = delta_b_primal(program.expr)
    theta = free_order(p)
    env = {x: ty.REAL for x in theta}
    f = forward(p, theta, env)
    u = unzip(f)
    return Pipeline(program, p, theta, env, f, u, transpose(f), transpose(u),
                    primal_type(uniquify(p), env))


@lru_cache(maxsize=None)
def pipelines(n: int = CORPUS_SIZE, seed: int = CORPUS_SEED) -> tuple[Pipeline, ...]:
    return tuple(build(p) for p in corpus(n, seed))


def sample(p: Pipeline, rng: random.Random) -> dict[str, float]:
    return {x: rng.uniform(-2.0, 2.0) for x in p.theta}


__all__ = [
    "ACCEPTANCE_LINES", "Pipeline", "build", "dg", "g", "grad_g", "nest", "pipelines", "report",
    "running_expr", "sample",
]

"""The ``llad`` command line.

Input files ending in ``.lina`` hold Linear A programs, files ending in
``.llt`` hold terms of the linear calculus. A ``## env: ...`` line gives the
types of free variables (``x : R * R`` for Linear A, patterns such as
``!x : R`` for the calculus); unlisted Linear A primals default to ``R``.

Exit status: 0 on success, 1 on a user error (bad input, ill-typed program,
failed check), 2 when an internal invariant breaks.
"""

from __future__ import annotations

import json
import os
import random
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import click

from . import types as ty
from .errors import LladError, ParseError

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class CheckFailed(LladError):
    """A requested property check did not hold."""


# ------------------------------------------------------------------ loading


@dataclass
class Source:
    lang: str
    text: str
    env_line: str | None
    path: str

    def lina(self):
        from .lina.syntax import parse_expr
        return parse_expr(self.text)

    def lina_types(self) -> dict:
        from .lina.syntax import parse_jtype
        out = {}
        if self.env_line:
            for item in _split_env(self.env_line):
                name, _, tsrc = item.partition(":")
                out[name.strip()] = parse_jtype(tsrc.strip())
        return out

    def term(self):
        from .surface import parse_term
        return parse_term(self.text)

    def env(self) -> list:
        from .surface import parse_env
        return parse_env(self.env_line) if self.env_line else []


def _split_env(line: str) -> list[str]:
    return [s for s in (x.strip() for x in line.split(",")) if s]


_ENV = re.compile(r"^\s*##\s*env\s*:(.*)$", re.MULTILINE)


def load(path: str, lang: str | None) -> Source:
    text = Path(path).read_text()
    if lang is None:
        suffix = Path(path).suffix
        if suffix == ".lina":
            lang = "lina"
        elif suffix == ".llt":
            lang = "llt"
        else:
            raise click.UsageError(f"cannot tell the language of {path}; pass --lang")
    m = _ENV.search(text)
    return Source(lang, text, m.group(1).strip() if m else None, path)


def parse_args(spec: str | None) -> dict[str, Any]:
    """``x=1.5,y=(1,2)`` to a dict of numeral sequences."""
    if not spec:
        return {}
    out: dict[str, Any] = {}
    depth, cur, items = 0, "", []
    for ch in spec:
        if ch == "," and depth == 0:
            items.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    items.append(cur)
    for item in filter(None, (i.strip() for i in items)):
        name, eq, value = item.partition("=")
        if not eq:
            raise click.UsageError(f"--args entries must be name=value, got {item!r}")
        out[name.strip()] = _numseq(value.strip())
    return out


def _numseq(src: str) -> Any:
    src = src.strip()
    if src.startswith("("):
        inner = src[1:-1].strip()
        if not inner:
            return ()
        depth, cur, parts = 0, "", []
        for ch in inner:
            if ch == "," and depth == 0:
                parts.append(cur)
                cur = ""
                continue
            depth += ch == "("
            depth -= ch == ")"
            cur += ch
        parts.append(cur)
        if len(parts) != 2:
            raise click.UsageError(f"tuples are pairs: {src!r}")
        return (_numseq(parts[0]), _numseq(parts[1]))
    try:
        return float(src)
    except ValueError:
        raise click.UsageError(f"not a number: {src!r}") from None


# ------------------------------------------------------------------ output


class Out:
    def __init__(self, as_json: bool):
        self.as_json = as_json

    def emit(self, data: dict, text: str) -> None:
        if self.as_json:
            click.echo(json.dumps(data, indent=2, default=_jsonable))
        else:
            click.echo(text)


def _jsonable(x: Any) -> Any:
    if isinstance(x, tuple):
        return list(x)
    return str(x)


def _show_value(v: Any) -> str:
    if isinstance(v, tuple):
        return "(" + ", ".join(_show_value(c) for c in v) + ")"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    return int(os.environ.get("LLAD_SEED", "0"))


# ------------------------------------------------------------------ pipeline helpers


def _primal_program(src: Source):
    """The primal term, its variable types and the Linear A original if any."""
    from .ad import free_order
    from .translation import delta_b_primal, trans_primal_type
    from .lina.check import jax_check
    from .lina.transforms import is_primal
    if src.lang == "lina":
        e = src.lina()
        if not is_primal(e):
            raise CheckFailed("the differentiation commands expect a purely primal program")
        j = jax_check(e, src.lina_types())
        env = {x: trans_primal_type(t) for x, t in j.primal_env.items()}
        return delta_b_primal(e, dict(j.primal_env)), env, e
    t = src.term()
    types = {}
    for p in src.env():
        from .terms import pattern_bindings
        types.update(pattern_bindings(p))
    env = {x: types.get(x, ty.REAL) for x in free_order(t)}
    return t, env, None


def _benv(env: dict) -> list:
    from .terms import BangVar
    return [BangVar(x, a) for x, a in env.items()]


def _pair_term(src: Source, stage: str):
    """``stage`` of the pipeline: a pair term from a primal program, or the
    file's own pair term for calculus input already in that sort."""
    from .ad import forward, transpose, unzip
    from .translation import is_sort_r
    if src.lang == "llt":
        t = src.term()
        if is_sort_r(t):
            env = {}
            from .terms import pattern_bindings
            for p in src.env():
                env.update(pattern_bindings(p))
            if stage == "unzip":
                return unzip(t), env
            if stage == "transpose":
                return transpose(t), env
            return t, env
    p, env, _ = _primal_program(src)
    r = forward(p, None, env)
    if stage in ("unzip", "transpose"):
        r = unzip(r)
    if stage == "transpose":
        r = transpose(r)
    return r, env


def _term_report(t, env: dict, out: Out, extra: dict | None = None) -> None:
    from .surface import show_term
    from .typecheck import infer
    from .workload import is_safe, workload_term
    a = infer(_benv(env), t)
    data = {"term": show_term(t), "type": ty.show_type(a), "workload": workload_term(t),
            "safe": is_safe(t, _benv(env)).safe, **(extra or {})}
    out.emit(data, f"{data['term']}\n  : {data['type']}\n  workload {data['workload']}, "
                   f"{'safe' if data['safe'] else 'not safe'}")


# ------------------------------------------------------------------ commands


@click.group()
@click.version_option(package_name="artifact")
def cli() -> None:
    """Typecheck, evaluate and differentiate linear programs."""


def _common(f):
    f = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")(f)
    f = click.option("--lang", type=click.Choice(["lina", "llt"]), default=None,
                     help="Override the language detected from the file name.")(f)
    return click.argument("file", type=click.Path(exists=True, dir_okay=False))(f)


@cli.command()
@_common
def check(file, as_json, lang):
    """Typecheck a program."""
    src = load(file, lang)
    out = Out(as_json)
    if src.lang == "lina":
        from .lina.ast import show_jtype
        from .lina.check import jax_check
        from .lina.transforms import linear_b_sort
        j = jax_check(src.lina(), src.lina_types())
        data = {"language": "lina", "primal_type": show_jtype(j.primal_type),
                "tangent_type": show_jtype(j.tangent_type),
                "primal_env": {x: show_jtype(t) for x, t in j.primal_env.items()},
                "tangent_env": {x: show_jtype(t) for x, t in j.tangent_env.items()},
                "linear_b_sort": linear_b_sort(src.lina())}
        out.emit(data, f"({data['primal_type']}; {data['tangent_type']})")
        return
    from .translation import sort_check
    from .typecheck import infer
    from .workload import is_safe
    t, env = src.term(), src.env()
    a = infer(env, t)
    try:
        sort = sort_check(t).sort
    except LladError:
        sort = None
    rep = is_safe(t, env)
    data = {"language": "llt", "type": ty.show_type(a), "sort": sort, "safe": rep.safe,
            "violations": [str(v) for v in rep.violations]}
    out.emit(data, f"{data['type']}" + (f"  [sort {sort}]" if sort else ""))


@cli.command()
@_common
def qcheck(file, as_json, lang):
    """Grade a term: workload index and additive degrees."""
    from .quantitative import qcheck as grade
    src = load(file, lang)
    out = Out(as_json)
    if src.lang == "lina":
        from .translation import translate
        tr = translate(src.lina(), ptypes=src.lina_types())
        t, env = tr.term, tr.env
    else:
        t, env = src.term(), src.env()
    j = grade(env, t)
    data = {k: v for k, v in j.to_json().items() if k != "binder_degrees"}
    out.emit(data, f"m = {j.m} : {data['decorated_type']}")


@cli.command(name="eval")
@_common
@click.option("--args", "args", default=None, help="Inputs, e.g. x=1.0,y'=2.0.")
@click.option("--trace", is_flag=True, help="Print every reduction step.")
@click.option("--strategy", type=click.Choice(["safe", "beta"]), default="safe")
def eval_(file, as_json, lang, args, trace, strategy):
    """Evaluate a program on numeral inputs."""
    from .lina.ast import is_tangent_name
    src = load(file, lang)
    out = Out(as_json)
    values = parse_args(args)
    if src.lang == "lina":
        from .lina.semantics import jax_eval
        e = src.lina()
        r = {k: v for k, v in values.items() if not is_tangent_name(k)}
        s = {k: v for k, v in values.items() if is_tangent_name(k)}
        p, t = jax_eval(e, r, s)
        data = {"primal": p, "tangent": t}
        out.emit(data, f"({_show_value(p)}; {_show_value(t)})")
        return
    from .evaluator import normalize
    from .surface import show_term
    from .terms import pattern_bindings
    from .translation import numseq_subst, read_numseq
    from .typecheck import infer
    t, env = src.term(), src.env()
    types = {}
    for pat in env:
        types.update(pattern_bindings(pat))
    missing = set(types) - set(values)
    if missing:
        raise CheckFailed(f"no value given for {sorted(missing)}")
    a = infer(env, t)
    closed = numseq_subst(t, {k: values[k] for k in types}, types)
    nf, tr = normalize(closed, strategy, record_terms=trace)
    try:
        value: Any = read_numseq(nf)
    except LladError:
        value = None
    data = {"normal_form": show_term(nf), "value": value, "type": ty.show_type(a),
            "flops": tr.flops, "banked_flops": tr.banked_flops, "steps": len(tr.steps)}
    if trace:
        data["trace"] = tr.to_json()
    lines = [data["normal_form"], f"  {tr.flops} flops, {len(tr.steps)} steps"]
    if trace:
        lines[1:1] = [f"  {k['kind']} at {k['redex_path']}" for k in data["trace"]]
    out.emit(data, "\n".join(lines))


@cli.command()
@_common
@click.option("--delta-b", "delta_b", is_flag=True, help="Use the Linear B translation.")
def translate(file, as_json, lang, delta_b):
    """Translate a Linear A program into the calculus."""
    from .translation import translate as tr_
    src = load(file, "lina" if lang is None else lang)
    if src.lang != "lina":
        raise CheckFailed("translate expects a Linear A program")
    from .lina.transforms import is_primal
    e = src.lina()
    if delta_b and is_primal(e):
        t, env, _ = _primal_program(src)
        _term_report(t, env, Out(as_json), {"theta": []})
        return
    tr = tr_(e, linear_b=delta_b, ptypes=src.lina_types())
    env = {p.name: p.ty for p in tr.env}
    _term_report(tr.term, env, Out(as_json), {"theta": tr.theta})


def _ad_command(stage: str):
    @_common
    def run(file, as_json, lang):
        src = load(file, lang)
        t, env = _pair_term(src, stage)
        _term_report(t, env, Out(as_json))
    run.__name__ = stage
    run.__doc__ = {
        "forward": "Forward transformation of a primal program.",
        "unzip": "Forward transformation followed by unzipping.",
        "transpose": "Forward, unzip and transpose: the reverse-mode program.",
    }[stage]
    return cli.command(name=stage)(run)


forward = _ad_command("forward")
unzip = _ad_command("unzip")
transpose = _ad_command("transpose")


@cli.command()
@_common
@click.option("--args", "args", default=None, help="Input values, e.g. x=1.0,y=2.0.")
@click.option("--cotangent", default="1.0", help="Output cotangent (default 1.0).")
@click.option("--skip-unzip", is_flag=True, help="Transpose without unzipping first.")
def grad(file, as_json, lang, args, cotangent, skip_unzip):
    """Gradient of a primal program at a point."""
    from .ad import grad_program
    src = load(file, lang)
    p, env, _ = _primal_program(src)
    g = grad_program(p, skip_unzip, env)
    values = parse_args(args)
    missing = set(g.env) - set(values)
    if missing:
        raise CheckFailed(f"no value given for {sorted(missing)}")
    value, gradient = g.run(values, _numseq(cotangent))
    data = {"value": value, "variables": g.theta, "gradient": gradient,
            "skip_unzip": skip_unzip}
    out = Out(as_json)
    out.emit(data, f"value {_show_value(value)}\n" + "\n".join(
        f"  d/d{x} = {_show_value(d)}" for x, d in zip(g.theta, gradient)))


@cli.command()
@_common
def workload(file, as_json, lang):
    """Static workload, before and after translation."""
    from .workload import workload_term
    src = load(file, lang)
    out = Out(as_json)
    if src.lang == "lina":
        from .lina.check import jax_workload
        from .translation import translate as tr_
        e = src.lina()
        data = {"jax_workload": jax_workload(e),
                "translated_workload": workload_term(tr_(e, ptypes=src.lina_types()).term)}
        out.emit(data, f"jax workload {data['jax_workload']}, "
                       f"translated workload {data['translated_workload']}")
        return
    data = {"workload": workload_term(src.term())}
    out.emit(data, f"workload {data['workload']}")


@cli.command(name="oracle-check")
@_common
@click.option("--trials", default=20, show_default=True)
@click.option("--seed", default=None, type=int, help="Sampling seed (default $LLAD_SEED or 0).")
def oracle_check(file, as_json, lang, trials, seed):
    """Compare the reverse-mode program with independent oracles."""
    from .ad import grad_program
    from .equivalence import close, finite_diff_grad
    from .translation import numseq_subst, read_numseq
    src = load(file, lang)
    p, env, _ = _primal_program(src)
    if any(a != ty.REAL for a in env.values()):
        raise CheckFailed("oracle-check needs real inputs")
    seed = _seed(seed)
    rng = random.Random(seed)
    g = grad_program(p, False, env)
    g_skip = grad_program(p, True, env)
    if g.out_type != ty.REAL:
        raise CheckFailed("oracle-check needs a real-valued program")
    names = g.theta

    def primal(x) -> float:
        from .evaluator import normalize as nz
        closed = numseq_subst(p, dict(zip(names, map(float, x))), env)
        nf, _ = nz(closed)
        return read_numseq(nf)

    failures = []
    for _ in range(trials):
        point = {x: rng.uniform(-2.0, 2.0) for x in names}
        _, gr = g.run(point)
        _, gs = g_skip.run(point)
        fd = finite_diff_grad(primal, [point[x] for x in names])
        if not close(gr, gs):
            failures.append({"point": point, "check": "skip-unzip", "got": [gr, gs]})
        if any(abs(a - b) > 1e-4 * max(1.0, abs(b)) for a, b in zip(gr, fd)):
            failures.append({"point": point, "check": "finite-difference",
                             "got": [gr, list(map(float, fd))]})
    data = {"trials": trials, "seed": seed, "failures": failures, "ok": not failures}
    Out(as_json).emit(data, f"{trials} trials, seed {seed}: "
                            + ("all agree" if not failures else f"{len(failures)} failures"))
    if failures:
        raise SystemExit(EXIT_USER)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="llad", standalone_mode=False)
        return EXIT_OK
    except SystemExit as e:
        return int(e.code or 0)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_USER
    except click.exceptions.Abort:
        return EXIT_USER
    except ParseError as e:
        click.echo(f"parse error: {e}", err=True)
        return EXIT_USER
    except LladError as e:
        click.echo(f"error: {type(e).__name__}: {e}", err=True)
        return EXIT_USER
    except (FileNotFoundError, IsADirectoryError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_USER
    except Exception as e:  # an invariant broke inside the library
        click.echo(f"internal error: {type(e).__name__}: {e}", err=True)
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

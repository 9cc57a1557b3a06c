"""Reverse-mode differentiation inside the linear calculus.

Three source-to-source passes over the four-sorted fragment:

* ``forward`` turns a primal program ``P : !E`` into a pair term
  ``(!value, §(tangents -o tangent of E))``;
* ``unzip`` hoists all primal lets to the front so that the tangent
  function becomes one closed block;
* ``transpose`` flips every tangent function ``L -o H`` into ``H -o L``.

Their composite is the gradient. Tangent functions are built as
``lam p . U`` with ``p`` a single additive pattern, so each function mentions
only its own pattern, the boxed reals it scales by and the named functions
bound before it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

from . import types as ty
from .errors import NotPrimal, NotSortR, OverlappingCodomains, ShapeMismatch
from .terms import (
    App, Bang, BangVar, DotPlus, DotTimes, FreshSupply, Fun, Lam, Num, Pair, Pattern, Term,
    TensorPat, Top, Unit, UnitPat, Var, VarPat, WithPair, WithPat, DERIVATIVE_RECIPES, REGISTRY,
    affine_pat, affine_term, all_names, dplus, dtimes, fun_call, let, pattern_bindings,
    pattern_type, pattern_vars, rename_pattern, rename_vars, with_pat, with_tuple,
)
from .translation import (
    _Builder, is_sort_p, is_sort_r, numseq_subst, numseq_value, pattern_term, read_numseq,
    trans_tangent_type, zero_of,
)
from .types import Type


# ------------------------------------------------------------ shared helpers


def free_order(t: Term) -> list[str]:
    """Free variables of ``t`` in order of first occurrence."""
    seen: dict[str, None] = {}

    def go(m: Term, bound: frozenset[str]) -> None:
        match m:
            case Var(n):
                if n not in bound and n not in seen:
                    seen[n] = None
            case Lam(p, b):
                go(b, bound | set(pattern_vars(p)))
            case App(a, b) | Pair(a, b) | WithPair(a, b):
                go(a, bound)
                go(b, bound)
            case Bang(b):
                go(b, bound)

    go(t, frozenset())
    return list(seen)


def uniquify(t: Term, avoid: set[str] | None = None) -> Term:
    """Rename binders so that no name is bound twice or shadows a free one."""
    used = set(t.fv) | set(avoid or ())
    supply = FreshSupply(avoid=all_names(t) | used)

    def go(m: Term, ren: dict[str, str]) -> Term:
        match m:
            case Var(n):
                return Var(ren.get(n, n))
            case Lam(p, b):
                inner = dict(ren)
                for v in pattern_vars(p):
                    if v in used:
                        inner[v] = supply.fresh(v)
                    else:
                        inner[v] = v
                    used.add(inner[v])
                return Lam(rename_pattern(p, inner), go(b, inner))
            case App(a, b):
                return App(go(a, ren), go(b, ren))
            case Pair(a, b):
                return Pair(go(a, ren), go(b, ren))
            case WithPair(a, b):
                return WithPair(go(a, ren), go(b, ren))
            case Bang(b):
                return Bang(go(b, ren))
        return m

    return go(t, {})


def primal_type(p: Term, env: dict[str, Type]) -> Type:
    """``E`` such that ``p : !E`` for a primal program ``p``."""
    match p:
        case Bang(Var(x)):
            return env[x]
        case Bang(Num()):
            return ty.REAL
        case Bang(Unit()):
            return ty.UNIT
        case Bang(Pair(a, b)):
            return ty.Tensor(ty.Bang(primal_type(a, env)), ty.Bang(primal_type(b, env)))
        case App(Fun(), _):
            return ty.REAL
        case App(Lam(BangVar(x, _), body), q):
            return primal_type(body, {**env, x: primal_type(q, env)})
        case App(Lam(pat, body), Var(_)):
            return primal_type(body, {**env, **pattern_bindings(pat)})
    raise NotPrimal(f"not a primal program: {p}")


def tangent_type(e: Type) -> Type:
    return trans_tangent_type(e)


def _fn_pat(name: str, a: Type) -> Pattern:
    return affine_pat(VarPat(name, a))


def _pair_pat(x: str, e: Type, f: str, f_type: Type) -> Pattern:
    return TensorPat(BangVar(x, e), _fn_pat(f, f_type))


def _result(p: Term, fn: Term) -> Term:
    return Pair(p, affine_term(fn))


def _lam_pat(pats: list[Pattern], supply: FreshSupply) -> Pattern:
    if not pats:
        return VarPat(supply.fresh("u"), ty.TOP)
    return with_pat(pats)


# ------------------------------------------------------------------ forward


class _Forward:
    def __init__(self, env: dict[str, Type], avoid: set[str]):
        self.env = dict(env)
        self.s = FreshSupply("f", avoid=set(avoid))

    def tt(self, x: str) -> Type:
        return tangent_type(self.env[x])

    def fn_type(self, theta: list[str], e: Type) -> Type:
        return ty.Arrow(ty.with_tuple([self.tt(v) for v in theta]), tangent_type(e))

    def comps(self, theta: list[str], split: dict[str, Pattern] | None = None
              ) -> tuple[Pattern, dict[str, Term]]:
        """The λ-pattern over the tangents of ``theta`` and a term per variable."""
        split = split or {}
        pats, out = [], {}
        for v in theta:
            if v in split:
                pats.append(split[v])
                out[v] = pattern_term(split[v])
            else:
                c = self.s.fresh("d" + v.split("#")[0])
                pats.append(VarPat(c, self.tt(v)))
                out[v] = Var(c)
        return _lam_pat(pats, self.s), out

    def go(self, p: Term, theta: list[str]) -> Term:
        match p:
            case Bang(Var(x)):
                u = self.s.fresh("u")
                return _result(p, Lam(VarPat(u, self.tt(x)), Var(u)))
            case Bang(Num()):
                return _result(p, Lam(VarPat(self.s.fresh("u"), ty.TOP), Num(0.0)))
            case Bang(Unit()):
                return _result(p, Lam(VarPat(self.s.fresh("u"), ty.TOP), Top()))
            case Bang(Pair(p1, p2)):
                return self.pair(p1, p2, theta)
            case App(Fun(sym), arg):
                return self.call(p, sym, arg, theta)
            case App(Lam(BangVar(x, xt), body), q):
                return self.let_bang(x, xt, body, q, theta)
            case App(Lam(pat, body), Var(z)) if isinstance(pat, (TensorPat, UnitPat)):
                return self.let_tensor(pat, z, body, theta)
        raise NotPrimal(f"not a primal program: {p}")

    def sub(self, theta: list[str], m: Term) -> list[str]:
        return [v for v in theta if v in m.fv]

    def bind(self, m: Term, theta_m: list[str], x: str | None = None) -> tuple[Pattern, str, str]:
        e = primal_type(m, self.env)
        x = x or self.s.fresh("a")
        f = self.s.fresh("f")
        self.env[x] = e
        return _pair_pat(x, e, f, self.fn_type(theta_m, e)), x, f

    def pair(self, p1: Term, p2: Term, theta: list[str]) -> Term:
        th1, th2 = self.sub(theta, p1), self.sub(theta, p2)
        pat1, a, f = self.bind(p1, th1)
        pat2, b, g = self.bind(p2, th2)
        lp, c = self.comps(theta)
        fn = Lam(lp, WithPair(App(Var(f), with_tuple([c[v] for v in th1])),
                              App(Var(g), with_tuple([c[v] for v in th2]))))
        res = _result(Bang(Pair(Bang(Var(a)), Bang(Var(b)))), fn)
        return let(pat1, self.go(p1, th1), let(pat2, self.go(p2, th2), res))

    def partial(self, recipe: tuple, args: list[str]) -> Term:
        match recipe:
            case ("var", i):
                return Bang(Var(args[i]))
            case ("const", r):
                return Bang(Num(float(r)))
            case ("call", g, idx):
                return fun_call(g, *(Bang(Var(args[i])) for i in idx))
            case ("neg-call", g, idx):
                a = self.s.fresh("n")
                self.env[a] = ty.REAL
                return let(BangVar(a, ty.REAL), fun_call(g, *(Bang(Var(args[i])) for i in idx)),
                           fun_call("neg", Bang(Var(a))))
        raise ValueError(f"unknown derivative recipe {recipe}")

    def call(self, p: Term, sym: str, arg: Term, theta: list[str]) -> Term:
        match arg:
            case Bang(Var(x)):
                args = [x]
            case Pair(Bang(Var(x1)), Bang(Var(x2))):
                args = [x1, x2]
            case _:
                raise NotPrimal(f"primitive arguments must be boxed variables: {p}")
        if REGISTRY[sym].arity != len(args):
            raise NotPrimal(f"{sym} expects {REGISTRY[sym].arity} arguments")
        ws = [self.s.fresh("w") for _ in args]
        lp, c = self.comps(theta)
        terms = [dtimes(Var(w), c[x]) for w, x in zip(ws, args)]
        body = terms[0] if len(terms) == 1 else dplus(terms[0], terms[1])
        out = _result(p, Lam(lp, body))
        for w, recipe in reversed(list(zip(ws, DERIVATIVE_RECIPES[sym]))):
            out = let(BangVar(w, ty.REAL), self.partial(recipe, args), out)
        return out

    def around(self, body: Term, theta: list[str], theta_b: list[str],
               split: dict[str, Pattern], extra: dict[str, Term]) -> Term:
        """``let (!y, §g) = F(body) in (!y, §λθ. g ⟨...⟩)`` with the listed
        tangents computed from the components of ``theta``."""
        if theta_b == theta and not split and not extra:
            return self.go(body, theta)
        pat, y, g = self.bind(body, theta_b)
        lp, c = self.comps(theta, split)
        c.update({k: v(c) if callable(v) else v for k, v in extra.items()})
        fn = Lam(lp, App(Var(g), with_tuple([c[v] for v in theta_b])))
        return let(pat, self.go(body, theta_b), _result(Bang(Var(y)), fn))

    def let_bang(self, x: str, xt: Type, body: Term, q: Term, theta: list[str]) -> Term:
        th_q = self.sub(theta, q)
        if x not in body.fv:
            # the bound value only feeds dead code: keep it primal
            self.env[x] = primal_type(q, self.env)
            th_b = self.sub(theta, body)
            return let(BangVar(x, self.env[x]), q, self.around(body, theta, th_b, {}, {}))
        pat, _, f = self.bind(q, th_q, x)
        th_b = [x] + self.sub(theta, body)
        inner = self.around(body, theta, th_b, {}, {
            x: lambda c: App(Var(f), with_tuple([c[v] for v in th_q]))})
        return let(pat, self.go(q, th_q), inner)

    def let_tensor(self, pat: Pattern, z: str, body: Term, theta: list[str]) -> Term:
        split: dict[str, Pattern] = {}
        extra: dict[str, Any] = {}
        named: list[str] = []
        if isinstance(pat, TensorPat):
            x1, x2 = pat.left.name, pat.right.name
            self.env[x1], self.env[x2] = pat.left.ty, pat.right.ty
            c1, c2 = self.s.fresh("d" + x1.split("#")[0]), self.s.fresh("d" + x2.split("#")[0])
            split[z] = WithPat(VarPat(c1, self.tt(x1)), VarPat(c2, self.tt(x2)))
            extra = {x1: Var(c1), x2: Var(c2)}
            named = [v for v in (x1, x2) if v in body.fv]
        th_b = named + self.sub(theta, body)
        return let(pat, Var(z), self.around(body, theta, th_b, split, extra))


def forward(p: Term, theta: list[str] | None = None, env: dict[str, Type] | None = None,
            ) -> Term:
    """The forward transformation of a primal program.

    ``env`` gives the type ``E`` of each free variable ``x : !E`` (reals by
    default) and ``theta`` the order of the tangent inputs (first occurrence
    by default). The result has type
    ``!E ⊗ §((&_i t(E_i)) -o t(E))``."""
    if not is_sort_p(p):
        raise NotPrimal(f"not a primal program: {p}")
    order = free_order(p)
    theta = list(order if theta is None else theta)
    if sorted(theta) != sorted(order):
        raise ShapeMismatch(f"theta {theta} must enumerate the free variables {order}")
    env = {x: (env or {}).get(x, ty.REAL) for x in order}
    p = uniquify(p)
    return _Forward(env, all_names(p)).go(p, theta)


# ------------------------------------------------------------------ unzip


def _let_fn(f: str, f_type: Type, fn: Term, body: Term) -> Term:
    return let(_fn_pat(f, f_type), affine_term(fn), body)


@dataclass
class UnzipDecomp:
    """``ε[(P, §F)]``: primal definitions, the primal result and the tangent function."""
    context: list[tuple[Pattern, Term]]
    primal: Term
    tangent: Term

    def plug(self, body: Term) -> Term:
        for pat, m in reversed(self.context):
            body = let(pat, m, body)
        return body

    def assemble(self) -> Term:
        return self.plug(_result(self.primal, self.tangent))


def unzip_decompose(s: Term) -> UnzipDecomp:
    match s:
        case Pair(p, WithPair(Unit(), fn)):
            return UnzipDecomp([], p, fn)
        case App(Lam(TensorPat(BangVar() as bx, WithPat(UnitPat(), VarPat(f, ft))), s2), s1):
            d1, d2 = unzip_decompose(s1), unzip_decompose(s2)
            return UnzipDecomp(d1.context + [(bx, d1.primal)] + d2.context, d2.primal,
                               _let_fn(f, ft, d1.tangent, d2.tangent))
        case App(Lam(WithPat(UnitPat(), VarPat(f, ft)), s1), WithPair(Unit(), fn)):
            d = unzip_decompose(s1)
            return UnzipDecomp(d.context, d.primal, _let_fn(f, ft, fn, d.tangent))
        case App(Lam(BangVar() as bx, s1), p):
            d = unzip_decompose(s1)
            return UnzipDecomp([(bx, p)] + d.context, d.primal, d.tangent)
        case App(Lam(pat, s1), Var() as z) if isinstance(pat, (TensorPat, UnitPat)):
            d = unzip_decompose(s1)
            return UnzipDecomp([(pat, z)] + d.context, d.primal, d.tangent)
    raise NotSortR(f"not a pair term: {s}")


def unzip(s: Term) -> Term:
    if not is_sort_r(s):
        raise NotSortR(f"not a pair term: {s}")
    return unzip_decompose(s).assemble()


# ------------------------------------------------------------ renamings


@dataclass(frozen=True)
class Renaming:
    """A partial renaming of the variables of an additive pattern."""
    mapping: dict[str, str] = field(default_factory=dict)

    @property
    def dom(self) -> set[str]:
        return set(self.mapping)

    @property
    def cod(self) -> set[str]:
        return set(self.mapping.values())

    def term(self, m: Term) -> Term:
        """``α[M]``."""
        return rename_vars(m, self.mapping)

    def pattern(self, p: Pattern, supply: FreshSupply | None = None) -> Pattern:
        """``α⟨p⟩``: keep only the renamed variables, a fresh ``⊤`` if none."""
        q = _prune(p, self.mapping)
        if q is None:
            supply = supply or FreshSupply(avoid=set(pattern_vars(p)) | self.cod)
            return VarPat(supply.fresh("t"), ty.TOP)
        return q


def _prune(p: Pattern, ren: dict[str, str]) -> Pattern | None:
    match p:
        case VarPat(n, t):
            return VarPat(ren[n], t) if n in ren else None
        case WithPat(l, r):
            a, b = _prune(l, ren), _prune(r, ren)
            if a is None or b is None:
                return a if b is None else b
            return WithPat(a, b)
    raise ShapeMismatch(f"not an additive pattern: {p}")


def nu(p: Pattern, a1: Renaming, a2: Renaming, builder: _Builder | None = None) -> Term:
    """Merge two renamed copies of ``p`` back into a value of its type."""
    builder = builder or _Builder(set(pattern_vars(p)) | a1.cod | a2.cod)
    if not set(pattern_vars(p)) & (a1.dom | a2.dom):
        return zero_of(pattern_type(p))
    match p:
        case VarPat(u, t):
            if u in a1.mapping and u in a2.mapping:
                pair = WithPair(Var(a1.mapping[u]), Var(a2.mapping[u]))
                return builder.plus(t, pair) if ty.type_workload(t) else Top()
            return Var(a1.mapping.get(u) or a2.mapping[u])
        case WithPat(l, r):
            return WithPair(nu(l, a1, a2, builder), nu(r, a1, a2, builder))
    raise ShapeMismatch(f"not an additive pattern: {p}")


def mu_term(p: Pattern, a1: Renaming, a2: Renaming) -> Term:
    """``λ⟨α1⟨p⟩, α2⟨p⟩⟩. ν(p, α1, α2)``."""
    if a1.cod & a2.cod:
        raise OverlappingCodomains(f"renamings overlap on {sorted(a1.cod & a2.cod)}")
    supply = FreshSupply(avoid=set(pattern_vars(p)) | a1.cod | a2.cod)
    builder = _Builder(set(), supply)
    q = WithPat(a1.pattern(p, supply), a2.pattern(p, supply))
    return Lam(q, nu(p, a1, a2, builder))


# ------------------------------------------------------------------ transpose


def flip(a: Type) -> Type:
    assert isinstance(a, ty.Arrow)
    return ty.Arrow(a.cod, a.dom)


class _Transpose:
    def __init__(self, avoid: set[str]):
        self.s = FreshSupply("q", avoid=set(avoid))
        self.b = _Builder(set(), self.s)
        self._types: dict[int, tuple[Term, Type]] = {}

    def fresh_pattern(self, h: Type) -> Pattern:
        if isinstance(h, ty.With):
            return WithPat(self.fresh_pattern(h.left), self.fresh_pattern(h.right))
        return VarPat(self.s.fresh("q"), h)

    # tangent types
    def ltype(self, t: Term, scope: dict[str, Type]) -> Type:
        hit = self._types.get(id(t))
        if hit is not None and hit[0] is t:
            return hit[1]
        match t:
            case Num():
                out: Type = ty.REAL
            case Top():
                out = ty.TOP
            case Var(n):
                out = scope[n]
            case WithPair(a, b):
                out = ty.With(self.ltype(a, scope), self.ltype(b, scope))
            case DotPlus():
                out = ty.Arrow(ty.With(ty.REAL, ty.REAL), ty.REAL)
            case App(DotTimes(), _):
                out = ty.Arrow(ty.REAL, ty.REAL)
            case Lam(p, body):
                out = ty.Arrow(pattern_type(p), self.ltype(body, {**scope, **pattern_bindings(p)}))
            case App(Lam(WithPat(UnitPat(), VarPat(f, ft)), g), WithPair(Unit(), _)):
                out = self.ltype(g, {**scope, f: ft})
            case App(fn, _):
                a = self.ltype(fn, scope)
                assert isinstance(a, ty.Arrow), a
                out = a.cod
            case _:
                raise NotSortR(f"not a tangent term: {t}")
        self._types[id(t)] = (t, out)
        return out

    # Linear functions F : L -o H  to  H -o L
    def fn(self, f: Term, fb: dict[str, str], scope: dict[str, Type]) -> Term:
        match f:
            case Var(n):
                return Var(fb[n])
            case DotPlus():
                u = self.s.fresh("u")
                return Lam(VarPat(u, ty.REAL), WithPair(Var(u), Var(u)))
            case App(DotTimes(), Var()):
                return f
            case Lam(p, body):
                inner = {**scope, **pattern_bindings(p)}
                q, t = self.tu(body, p, fb, inner)
                used = set(pattern_vars(p)) & body.fv
                if used == set(pattern_vars(p)):
                    return Lam(q, t)
                ident = Renaming({v: v for v in pattern_vars(p) if v in used})
                return Lam(q, App(mu_term(p, ident, Renaming()), WithPair(t, Top())))
            case App(Lam(WithPat(UnitPat(), VarPat(g, gt)), rest), WithPair(Unit(), f1)):
                inner = {**scope, g: gt}
                if g not in rest.fv:
                    return self.fn(rest, fb, inner)
                gb = self.s.fresh(g)
                return _let_fn(gb, flip(gt), self.fn(f1, fb, scope),
                               self.fn(rest, {**fb, g: gb}, inner))
        raise NotSortR(f"not a tangent function: {f}")

    # U with free pattern p : L, output type H  to  q : H |- T_p(U) : pruned L
    def tu(self, u: Term, p: Pattern, fb: dict[str, str], scope: dict[str, Type]
           ) -> tuple[Pattern, Term]:
        pv = set(pattern_vars(p))
        match u:
            case Var(n) if n in pv:
                return VarPat(n, scope[n]), u
            case Num(0.0):
                return self.fresh_pattern(ty.REAL), Top()
            case Top():
                return self.fresh_pattern(ty.TOP), Top()
            case WithPair(u1, u2):
                d1, d2 = u1.fv & pv, u2.fv & pv
                shared = d1 & d2
                r1 = {v: self.s.fresh(v) for v in sorted(shared)}
                r2 = {v: self.s.fresh(v) for v in sorted(shared)}
                q1, t1 = self.tu(rename_vars(u1, r1), rename_pattern(p, r1), fb,
                                 {**scope, **{r1[v]: scope[v] for v in shared}})
                q2, t2 = self.tu(rename_vars(u2, r2), rename_pattern(p, r2), fb,
                                 {**scope, **{r2[v]: scope[v] for v in shared}})
                a1 = Renaming({v: r1.get(v, v) for v in d1})
                a2 = Renaming({v: r2.get(v, v) for v in d2})
                pruned = _prune(p, {v: v for v in d1 | d2})
                if pruned is None:
                    # neither side reads p: both outputs are ⟨⟩
                    return WithPat(q1, q2), Top()
                return WithPat(q1, q2), App(mu_term(pruned, a1, a2), WithPair(t1, t2))
            case App(f, u1):
                h = self.ltype(u, scope)
                q = self.fresh_pattern(h)
                q1, t1 = self.tu(u1, p, fb, scope)
                return q, App(Lam(q1, t1), App(self.fn(f, fb, scope), pattern_term(q)))
        raise NotSortR(f"not a tangent term over {p}: {u}")

    # pair terms
    def pair(self, r: Term, fb: dict[str, str], scope: dict[str, Type]) -> Term:
        match r:
            case Pair(p, WithPair(Unit(), f)):
                return _result(p, self.fn(f, fb, scope))
            case App(Lam(TensorPat(BangVar() as bx, WithPat(UnitPat(), VarPat(f, ft))), s),
                     r1):
                if f not in s.fv:
                    d = unzip_decompose(r1)
                    return let(bx, d.plug(d.primal), self.pair(s, fb, scope))
                fbar = self.s.fresh(f)
                return let(_pair_pat(bx.name, bx.ty, fbar, flip(ft)), self.pair(r1, fb, scope),
                           self.pair(s, {**fb, f: fbar}, {**scope, f: ft}))
            case App(Lam(WithPat(UnitPat(), VarPat(f, ft)), s), WithPair(Unit(), f1)):
                if f not in s.fv:
                    return self.pair(s, fb, scope)
                fbar = self.s.fresh(f)
                return _let_fn(fbar, flip(ft), self.fn(f1, fb, scope),
                               self.pair(s, {**fb, f: fbar}, {**scope, f: ft}))
            case App(Lam(BangVar() as bx, s), p):
                return let(bx, p, self.pair(s, fb, scope))
            case App(Lam(pat, s), Var() as z) if isinstance(pat, (TensorPat, UnitPat)):
                return let(pat, z, self.pair(s, fb, scope))
        raise NotSortR(f"not a pair term: {r}")


def transpose(r: Term, phibar: dict[str, str] | None = None,
              phi: dict[str, Type] | None = None) -> Term:
    """Transpose every tangent function of the pair term ``r``.

    ``phi`` types the free function variables of ``r`` and ``phibar`` names
    their transposes; both are empty for closed programs."""
    if not is_sort_r(r):
        raise NotSortR(f"not a pair term: {r}")
    r = uniquify(r, set((phibar or {}).values()))
    t = _Transpose(all_names(r) | set((phibar or {}).values()))
    return t.pair(r, dict(phibar or {}), dict(phi or {}))


def transpose_fn(f: Term, scope: dict[str, Type] | None = None) -> Term:
    """Transpose a closed tangent function ``L -o H``."""
    f = uniquify(f)
    return _Transpose(all_names(f)).fn(f, {}, dict(scope or {}))


# ------------------------------------------------------------ naive oracle


def basis(h: Type) -> list[Term]:
    """The canonical basis of an additive sequence type."""
    match h:
        case ty.Real():
            return [Num(1.0)]
        case ty.Top():
            return []
        case ty.With(a, b):
            za, zb = zero_of(a), zero_of(b)
            return [WithPair(v, zb) for v in basis(a)] + [WithPair(za, v) for v in basis(b)]
    raise ShapeMismatch(f"not an additive sequence type: {h}")


def _inner_body(h: Type, a: Pattern, b: Pattern) -> Term:
    match h, a, b:
        case ty.Real(), VarPat(x, _), VarPat(y, _):
            return dtimes(Var(x), Var(y))
        case ty.With(h1, h2), WithPat(a1, a2), WithPat(b1, b2):
            return dplus(_inner_body(h1, a1, b1), _inner_body(h2, a2, b2))
    return Num(0.0)


def inner_product(h: Type) -> Term:
    """The closed inner product ``h * h -o R`` of an additive sequence type."""
    if not ty.is_with_seq(h):
        raise ShapeMismatch(f"not an additive sequence type: {h}")
    b = _Builder(set())
    p, q = b.pattern_for(h, "h"), b.pattern_for(h, "k")
    return Lam(TensorPat(p, q), _inner_body(h, p, q))


def dual(h: Type) -> Term:
    """``h -o (h -o R)``: a vector to the linear form it induces."""
    b = _Builder(set())
    x, y = b.fresh("v"), b.fresh("w")
    return Lam(VarPat(x, h), Lam(VarPat(y, h), App(inner_product(h), Pair(Var(x), Var(y)))))


def dual_bar(h: Type) -> Term:
    """``(h -o R) -o h``: a linear form back to its vector, summed over the
    basis. The form is applied once per basis vector."""
    b = _Builder(set())
    f = b.fresh("f")
    terms = [b.times(h, App(Var(f), v), v) for v in basis(h)]
    total = terms[0] if terms else zero_of(h)
    for m in terms[1:]:
        total = b.plus(h, WithPair(total, m))
    return Lam(VarPat(f, ty.Arrow(h, ty.REAL)), total)


def dual_transpose_oracle(u: Term, p: Pattern) -> Term:
    """The transpose of ``λp. u`` built by brute force over the basis of the
    input type: ``λq. Σ_V ⟨q, u{V/p}⟩ · V``. Its size grows with the
    dimension of the input, so it is only a reference for testing."""
    if not ty.is_with_seq(pattern_type(p)):
        raise ShapeMismatch(f"input type is not an additive sequence: {pattern_type(p)}")
    t = _Transpose(all_names(u) | set(pattern_vars(p)))
    h = t.ltype(u, pattern_bindings(p))
    if not ty.is_with_seq(h):
        raise ShapeMismatch(f"output type is not an additive sequence: {h}")
    l = pattern_type(p)
    q = t.fresh_pattern(h)

    def inner(a: Term, h: Type, b: Term) -> Term:
        r = t.fresh_pattern(h)
        return App(Lam(r, inner_pat(a, r)), b)

    def inner_pat(a: Term, r: Pattern) -> Term:
        match a, r:
            case WithPair(a1, a2), WithPat(r1, r2):
                return dplus(inner_pat(a1, r1), inner_pat(a2, r2))
            case _, VarPat(n, ty.Real()):
                return dtimes(a, Var(n))
        return Num(0.0)

    def scaled(c: Term, v: Term) -> Term:
        match v:
            case WithPair(a, b):
                return WithPair(scaled(c, a), scaled(c, b))
            case Num(x) if x == 1.0:
                return dtimes(c, Num(1.0))
            case Num():
                return Num(0.0)
        return v

    terms = [scaled(inner(pattern_term(q), h, App(Lam(p, u), v)), v) for v in basis(l)]
    if not terms:
        return Lam(q, zero_of(l))
    total = terms[0]
    for m in terms[1:]:
        total = t.b.plus(l, WithPair(total, m))
    return Lam(q, total)


# ------------------------------------------------------------ gradients


@dataclass
class GradProgram:
    """A transposed pair term together with what is needed to run it."""
    term: Term
    env: dict[str, Type]
    theta: list[str]
    out_type: Type

    def run(self, values: dict[str, Any], cotangent: Any = 1.0, strategy: str = "safe"
            ) -> tuple[Any, list[Any]]:
        """Primal value and one gradient entry per variable of ``theta``."""
        v, out = run_pair(self.term, self.env, values, cotangent,
                          tangent_type(self.out_type), strategy)
        return v, list(_unpack_value(out, len(self.theta)))


def close_pair(r: Term, env: dict[str, Type], values: dict[str, Any],
               strategy: str = "safe") -> tuple[Term, Term]:
    """Substitute numerals for the free variables of a pair term and reduce it
    to ``(!v, §g)``; returns the primal value term and the closed map ``g``."""
    from .evaluator import normalize
    closed = numseq_subst(r, {x: values[x] for x in env}, env)
    nf, _ = normalize(closed, strategy)
    match nf:
        case Pair(Bang(v), WithPair(Unit(), g)):
            return v, g
    raise ShapeMismatch(f"pair term did not normalize to a pair: {nf}")


def run_pair(r: Term, env: dict[str, Type], values: dict[str, Any], arg: Any,
             arg_type: Type, strategy: str = "safe") -> tuple[Any, Any]:
    """Primal value of ``r`` at ``values`` and its map applied to ``arg``."""
    from .evaluator import normalize
    v, g = close_pair(r, env, values, strategy)
    out, _ = normalize(App(g, numseq_value(arg, arg_type)), strategy)
    return read_numseq(v), read_numseq(out)


def _unpack_value(v: Any, n: int) -> list[Any]:
    out = []
    for _ in range(n - 1):
        out.append(v[0])
        v = v[1]
    if n:
        out.append(v)
    return out


def grad_program(p: Any, skip_unzip: bool = False, env: dict[str, Type] | None = None,
                 theta: list[str] | None = None) -> GradProgram:
    """Forward, unzip (unless skipped) and transpose a primal program.

    ``p`` is a primal term of the calculus or a purely primal Linear A
    expression, which is first translated."""
    from .lina.ast import Expr
    if isinstance(p, Expr):
        from .translation import delta_b_primal
        from .lina.check import jax_check
        j = jax_check(p)
        env = {x: _ptype(t) for x, t in j.primal_env.items()}
        p = delta_b_primal(p, {x: t for x, t in j.primal_env.items()})
    order = free_order(p)
    env = {x: (env or {}).get(x, ty.REAL) for x in order}
    theta = list(order if theta is None else theta)
    r = forward(p, theta, env)
    if not skip_unzip:
        r = unzip(r)
    return GradProgram(transpose(r), env, theta, primal_type(uniquify(p), env))


def _ptype(t) -> Type:
    from .translation import trans_primal_type
    return trans_primal_type(t)


def grad_pipeline(p: Any, skip_unzip: bool = False, **kw) -> Term:
    """``T(F(p))`` when ``skip_unzip`` else ``T(U(F(p)))``."""
    return grad_program(p, skip_unzip, **kw).term


def tangent_function(r: Term) -> Term:
    """The tangent function of a pair term, with its definitions inlined."""
    return unzip_decompose(r).tangent


def iter_basis(h: Type) -> Iterator[Term]:
    yield from basis(h)


__all__ = [
    "GradProgram", "Renaming", "close_pair", "run_pair", "UnzipDecomp", "basis",
    "dual", "dual_bar", "dual_transpose_oracle", "flip", "inner_product",
    "forward", "free_order", "grad_pipeline", "grad_program", "mu_term", "nu", "primal_type",
    "tangent_function", "tangent_type", "transpose", "transpose_fn", "uniquify", "unzip",
    "unzip_decompose",
]

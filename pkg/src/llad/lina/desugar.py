"""Expansion of the Linear A abbreviations into the core constructs.

The abbreviations unfold as follows (fresh names on the right)::

    x                  let (t; a') = tupT() in let tupP() = t in (x; a')
    y'                 let (b; c') = tupP() in let tupT() = c' in (b; y')
    let x = e1 in e2   let (x; b') = e1 in let tupT() = b' in e2
    let y' = e1 in e2  let (a; y') = e1 in let tupP() = a in e2
    (e1; e2)           let x = e1 in let y' = e2 in (x; y')
    tupP(e1, e2)       let a = e1 in let b = e2 in tupP(a, b)
    tupT(e1, e2)       let a' = e1 in let b' = e2 in tupT(a', b')
"""

from __future__ import annotations

from .ast import (
    Drop, Dup, Expr, Let, LetPT, LetT, LetTupP, LetTupP0, LetTupT, LetTupT0, LinFresh, Lit,
    PT, PVar, PairE, Prim, Scale, TAdd, TVar, TupP, TupP0, TupPE, TupT, TupT0, TupTE, Zero,
    all_names,
)


def is_core(e: Expr) -> bool:
    match e:
        case PVar() | TVar() | Let() | LetT() | PairE() | TupPE() | TupTE():
            return False
        case LetPT(_, _, a, b):
            return is_core(a) and is_core(b)
        case LetTupP0(_, b) | LetTupP(_, _, _, b) | LetTupT0(_, b) | LetTupT(_, _, _, b) | Drop(b):
            return is_core(b)
    return True


def desugar(e: Expr, fresh: LinFresh | None = None) -> Expr:
    """Rewrite every abbreviation into core Linear A."""
    fresh = fresh or LinFresh(all_names(e))

    def go(x: Expr) -> Expr:
        match x:
            case PVar(v):
                a = fresh.tangent("a")
                t = fresh.primal("t")
                return LetPT(t, a, TupT0(), LetTupP0(t, PT(v, a)))
            case TVar(dv):
                b, db = fresh.primal("b"), fresh.tangent("b")
                return LetPT(b, db, TupP0(), LetTupT0(db, PT(b, dv)))
            case Let(v, e1, e2):
                b = fresh.tangent("b")
                return LetPT(v, b, go(e1), LetTupT0(b, go(e2)))
            case LetT(dv, e1, e2):
                a = fresh.primal("a")
                return LetPT(a, dv, go(e1), LetTupP0(a, go(e2)))
            case PairE(e1, e2):
                v, dv = fresh.primal("p"), fresh.tangent("p")
                return go(Let(v, e1, LetT(dv, e2, PT(v, dv))))
            case TupPE(e1, e2):
                a, b = fresh.primal("a"), fresh.primal("b")
                return go(Let(a, e1, Let(b, e2, TupP(a, b))))
            case TupTE(e1, e2):
                a, b = fresh.tangent("a"), fresh.tangent("b")
                return go(LetT(a, e1, LetT(b, e2, TupT(a, b))))
            case LetPT(v, dv, e1, e2):
                return LetPT(v, dv, go(e1), go(e2))
            case LetTupP0(z, b):
                return LetTupP0(z, go(b))
            case LetTupP(x1, x2, z, b):
                return LetTupP(x1, x2, z, go(b))
            case LetTupT0(z, b):
                return LetTupT0(z, go(b))
            case LetTupT(x1, x2, z, b):
                return LetTupT(x1, x2, z, go(b))
            case Drop(b):
                return Drop(go(b))
            case PT() | TupP0() | TupP() | TupT0() | TupT() | Lit() | Prim() | Zero() \
                    | TAdd() | Scale() | Dup():
                return x
        raise TypeError(f"not a Linear A expression: {x!r}")

    return go(e)

"""Types of the linear calculus and their classifiers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce


class Type:
    __slots__ = ()

    def __str__(self) -> str:
        return show_type(self)


@dataclass(frozen=True)
class Real(Type):
    pass


@dataclass(frozen=True)
class Unit(Type):
    pass


@dataclass(frozen=True)
class Top(Type):
    pass


@dataclass(frozen=True)
class Arrow(Type):
    dom: Type
    cod: Type


@dataclass(frozen=True)
class Tensor(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class With(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class Bang(Type):
    body: Type


REAL = Real()
UNIT = Unit()
TOP = Top()


def affine(a: Type) -> Type:
    """The affine modality, encoded as ``1 & A``."""
    return With(UNIT, a)


def is_affine(a: Type) -> bool:
    return isinstance(a, With) and isinstance(a.left, Unit)


def with_tuple(types: list[Type]) -> Type:
    """Right-nested additive product; empty is Top, a singleton is itself."""
    if not types:
        return TOP
    return reduce(lambda acc, t: With(t, acc), reversed(types[:-1]), types[-1])


def with_components(a: Type, n: int) -> list[Type]:
    """Inverse of ``with_tuple`` for a known arity ``n``."""
    if n == 0:
        return []
    out = []
    while n > 1:
        if not isinstance(a, With):
            raise ValueError(f"expected an additive product, got {a}")
        out.append(a.left)
        a = a.right
        n -= 1
    out.append(a)
    return out


def is_tensor_seq(a: Type) -> bool:
    match a:
        case Real() | Unit():
            return True
        case Tensor(Bang(d), Bang(e)):
            return is_tensor_seq(d) and is_tensor_seq(e)
    return False


def is_with_seq(a: Type) -> bool:
    match a:
        case Real() | Top():
            return True
        case With(h, l):
            return is_with_seq(h) and is_with_seq(l)
    return False


def is_ground(a: Type) -> bool:
    match a:
        case Real() | Unit() | Top():
            return True
        case Arrow():
            return False
        case Tensor(l, r) | With(l, r):
            return is_ground(l) and is_ground(r)
        case Bang(b):
            return is_ground(b)
    raise TypeError(a)


def type_workload(a: Type) -> int:
    """Occurrences of R not under the scope of a bang."""
    match a:
        case Real():
            return 1
        case Unit() | Top() | Bang():
            return 0
        case Arrow(l, r) | Tensor(l, r) | With(l, r):
            return type_workload(l) + type_workload(r)
    raise TypeError(a)


def show_type(a: Type, prec: int = 0) -> str:
    # precedence: 0 arrow, 1 binary product, 2 prefix/atom
    match a:
        case Real():
            return "R"
        case Unit():
            return "1"
        case Top():
            return "Top"
        case Bang(b):
            return "!" + show_type(b, 2)
        case Arrow(l, r):
            s = f"{show_type(l, 1)} -o {show_type(r, 0)}"
            return f"({s})" if prec > 0 else s
        case Tensor(l, r):
            s = f"{show_type(l, 2)} * {show_type(r, 2)}"
            return f"({s})" if prec > 1 else s
        case With(l, r):
            s = f"{show_type(l, 2)} & {show_type(r, 2)}"
            return f"({s})" if prec > 1 else s
    raise TypeError(a)

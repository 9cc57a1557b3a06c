"""Concrete syntax of the linear calculus: tokenizer, parser and printer.

Grammar::

    term  ::= 'lam' pat '.' term | 'let' pat '=' term 'in' term | atom+
    atom  ::= ident | float | '()' | '(' term ')' | '(' term ',' term ')'
            | '<>' | '<' term ',' term '>' | '!' atom | 'dot+' | 'dot*' | fun
    pat   ::= ident ':' type | '!' ident ':' type | '()' | '(' pat ',' pat ')'
            | '<' pat ',' pat '>'
    type  ::= prod ['-o' type]
    prod  ::= unary [('*' | '&') unary]
    unary ::= 'R' | '1' | 'Top' | '!' unary | '(' type ')'

Juxtaposition is left-associative application, so ``(M N)`` and ``M N``
denote the same term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from . import types as ty
from .terms import (
    App, Bang, BangVar, DotPlus, DotTimes, Fun, Lam, Num, Pair, Pattern, REGISTRY, Term,
    TensorPat, Top, Unit, UnitPat, Var, VarPat, WithPair, WithPat,
)

KEYWORDS = {"lam", "let", "in", "R", "Top"} | set(REGISTRY)

_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#\#[^\n]*)
  | (?P<num>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?|-?inf\b|nan\b)
  | (?P<op>dot\+|dot\*|-o|<>|\(\)|[()<>,.:=!*&])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_'#]*)
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            out.append(Token(kind, text, line, pos - line_start + 1))
        for i, ch in enumerate(text):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str) -> ParseError:
        t = self.tok
        return ParseError(f"{msg}, found {t.text or 'end of input'!r}", t.line, t.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.error(f"expected {text!r}")

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error("expected an identifier")
        self.i += 1
        return t.text

    # types
    def type_(self) -> ty.Type:
        left = self.prod()
        if self.accept("-o"):
            return ty.Arrow(left, self.type_())
        return left

    def prod(self) -> ty.Type:
        left = self.unary()
        if self.accept("*"):
            return ty.Tensor(left, self.unary())
        if self.accept("&"):
            return ty.With(left, self.unary())
        return left

    def unary(self) -> ty.Type:
        t = self.tok
        if self.accept("R"):
            return ty.REAL
        if t.kind == "num" and t.text == "1":
            self.i += 1
            return ty.UNIT
        if self.accept("Top"):
            return ty.TOP
        if self.accept("!"):
            return ty.Bang(self.unary())
        if self.accept("("):
            inner = self.type_()
            self.expect(")")
            return inner
        raise self.error("expected a type")

    # patterns
    def pattern(self) -> Pattern:
        if self.accept("()"):
            return UnitPat()
        if self.accept("!"):
            name = self.ident()
            self.expect(":")
            return BangVar(name, self.type_())
        if self.accept("("):
            left = self.pattern()
            self.expect(",")
            right = self.pattern()
            self.expect(")")
            return TensorPat(left, right)
        if self.accept("<"):
            left = self.pattern()
            self.expect(",")
            right = self.pattern()
            self.expect(">")
            return WithPat(left, right)
        name = self.ident()
        self.expect(":")
        return VarPat(name, self.type_())

    # terms
    def term(self) -> Term:
        if self.accept("lam"):
            p = self.pattern()
            self.expect(".")
            return Lam(p, self.term())
        if self.accept("let"):
            p = self.pattern()
            self.expect("=")
            bound = self.term()
            self.expect("in")
            return App(Lam(p, self.term()), bound)
        head = self.atom()
        while self.starts_atom():
            head = App(head, self.atom())
        return head

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind == "num":
            return True
        if t.kind == "ident":
            return t.text not in ("lam", "let", "in", "R", "Top")
        return t.text in ("(", "()", "<", "<>", "!", "dot+", "dot*")

    def atom(self) -> Term:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if self.accept("()"):
            return Unit()
        if self.accept("<>"):
            return Top()
        if self.accept("dot+"):
            return DotPlus()
        if self.accept("dot*"):
            return DotTimes()
        if self.accept("!"):
            return Bang(self.atom())
        if self.accept("("):
            first = self.term()
            if self.accept(","):
                second = self.term()
                self.expect(")")
                return Pair(first, second)
            self.expect(")")
            return first
        if self.accept("<"):
            first = self.term()
            self.expect(",")
            second = self.term()
            self.expect(">")
            return WithPair(first, second)
        if t.kind == "ident" and t.text in REGISTRY:
            self.i += 1
            return Fun(t.text)
        return Var(self.ident())

    def done(self) -> None:
        if self.tok.kind != "eof":
            raise self.error("trailing input")


def parse_term(src: str) -> Term:
    p = _Parser(src)
    t = p.term()
    p.done()
    return t


def parse_type(src: str) -> ty.Type:
    p = _Parser(src)
    t = p.type_()
    p.done()
    return t


def parse_pattern(src: str) -> Pattern:
    p = _Parser(src)
    t = p.pattern()
    p.done()
    return t


def parse_env(src: str) -> list[Pattern]:
    """Comma-separated patterns, e.g. ``!x : R, f : R -o R``."""
    p = _Parser(src)
    out: list[Pattern] = []
    if p.tok.kind != "eof":
        out.append(p.pattern())
        while p.accept(","):
            out.append(p.pattern())
    p.done()
    return out


# ------------------------------------------------------------------ printer


def show_num(x: float) -> str:
    return repr(float(x))


def show_pattern(p: Pattern) -> str:
    match p:
        case VarPat(n, t):
            return f"{n} : {ty.show_type(t, 1)}"
        case BangVar(n, t):
            return f"!{n} : {ty.show_type(t, 1)}"
        case UnitPat():
            return "()"
        case TensorPat(l, r):
            return f"({show_pattern(l)}, {show_pattern(r)})"
        case WithPat(l, r):
            return f"<{show_pattern(l)}, {show_pattern(r)}>"
    raise TypeError(p)


def show_term(t: Term) -> str:
    parts: list[str] = []
    _show(t, parts, top=True)
    return "".join(parts)


def _show(t: Term, out: list[str], top: bool = False) -> None:
    """Append the rendering of ``t``. ``top`` allows binders without parens."""
    match t:
        case Var(n):
            out.append(n)
        case Num(v):
            out.append(show_num(v))
        case Unit():
            out.append("()")
        case Top():
            out.append("<>")
        case DotPlus():
            out.append("dot+")
        case DotTimes():
            out.append("dot*")
        case Fun(s):
            out.append(s)
        case Bang(b):
            out.append("!")
            _show(b, out)
        case Pair(a, b):
            out.append("(")
            _show(a, out, True)
            out.append(", ")
            _show(b, out, True)
            out.append(")")
        case WithPair(a, b):
            out.append("<")
            _show(a, out, True)
            out.append(", ")
            _show(b, out, True)
            out.append(">")
        case App(Lam(p, body), arg):
            if not top:
                out.append("(")
            out.append(f"let {show_pattern(p)} = ")
            _show(arg, out, True)
            out.append(" in ")
            _show(body, out, True)
            if not top:
                out.append(")")
        case App(f, a):
            out.append("(")
            _show(f, out)
            out.append(" ")
            _show(a, out)
            out.append(")")
        case Lam(p, body):
            if not top:
                out.append("(")
            out.append(f"lam {show_pattern(p)} . ")
            _show(body, out, True)
            if not top:
                out.append(")")
        case _:
            raise TypeError(t)

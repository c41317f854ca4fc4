"""Text grammar for scalar noncommutative polynomials.

    poly   := ['+'|'-'] term (('+'|'-') term)*
    term   := scalar ['*' factor ...] | factor ['*'] factor ...
    factor := 'x' INT ['^' INT]
    scalar := FLOAT | FLOAT 'i' | '(' FLOAT ('+'|'-') FLOAT 'i' ')'

Juxtaposition and '*' are both accepted between factors, so ``x1x2`` and
``x1*x2`` denote the same word.
"""
from __future__ import annotations

import json
import re
from typing import Sequence

import numpy as np

from .freealg import MatPoly, Word

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x(?P<idx>\d+))
  | (?P<imag>i)
  | (?P<op>[-+*^()])
""", re.VERBOSE)


class ParseError(ValueError):
    def __init__(self, msg: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line, self.column = line, col


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup if m.lastgroup != "idx" else "var"
        if m.group("var"):
            kind = "var"
        if kind != "ws":
            toks.append((kind, m.group(0), pos))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, off: int = 0):
        return self.toks[min(self.i + off, len(self.toks) - 1)]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str):
        raise ParseError(msg, self.text, self.peek()[2])

    def expect(self, kind: str, value: str | None = None):
        t = self.peek()
        if t[0] != kind or (value is not None and t[1] != value):
            self.fail(f"expected {value or kind}, found {t[1] or 'end of input'!r}")
        return self.take()

    def poly(self) -> list[tuple[complex, Word]]:
        terms = []
        sign = 1.0
        if self.peek()[1] in "+-" and self.peek()[0] == "op":
            sign = -1.0 if self.take()[1] == "-" else 1.0
        while True:
            c, w = self.term()
            terms.append((sign * c, w))
            t = self.peek()
            if t[0] == "op" and t[1] in "+-":
                self.take()
                sign = -1.0 if t[1] == "-" else 1.0
                continue
            if t[0] != "end":
                self.fail(f"unexpected token {t[1]!r}")
            return terms

    def scalar(self) -> complex | None:
        t = self.peek()
        if t[0] == "num":
            self.take()
            v = float(t[1])
            if self.peek()[0] == "imag":
                self.take()
                return 1j * v
            return complex(v)
        if t[0] == "imag":
            self.take()
            return 1j
        if t == ("op", "(", t[2]):
            self.take()
            s = 1.0
            if self.peek()[0] == "op" and self.peek()[1] in "+-":
                s = -1.0 if self.take()[1] == "-" else 1.0
            re_part = s * float(self.expect("num")[1])
            if self.peek()[0] == "imag":  # "(2i)"
                self.take()
                self.expect("op", ")")
                return 1j * re_part
            if self.peek()[0] == "op" and self.peek()[1] == ")":
                self.take()
                return complex(re_part)
            op = self.expect("op")[1]
            if op not in "+-":
                self.fail("expected '+' or '-' inside complex scalar")
            im_part = float(self.expect("num")[1]) * (-1.0 if op == "-" else 1.0)
            self.expect("imag")
            self.expect("op", ")")
            return complex(re_part, im_part)
        return None

    def factor(self) -> Word:
        t = self.expect("var")
        idx = int(t[1][1:])
        if idx < 1:
            raise ParseError("variable indices start at 1", self.text, t[2])
        power = 1
        if self.peek() == ("op", "^", self.peek()[2]):
            self.take()
            power = int(self.expect("num")[1])
        return (idx,) * power

    def term(self) -> tuple[complex, Word]:
        c = self.scalar()
        word: Word = ()
        if c is None:
            c = 1.0
            if self.peek()[0] != "var":
                self.fail(f"expected a scalar or a variable, found {self.peek()[1] or 'end of input'!r}")
            word = self.factor()
        while True:
            t = self.peek()
            if t[0] == "op" and t[1] == "*":
                self.take()
                if self.peek()[0] != "var":
                    self.fail("expected a variable after '*'")
                word += self.factor()
            elif t[0] == "var":
                word += self.factor()
            else:
                return c, word


def parse_poly(text: str, n: int | None = None) -> MatPoly:
    """Parse a scalar polynomial; ``n`` defaults to the largest index used."""
    terms = _Parser(text).poly()
    used = max((max(w) for _, w in terms if w), default=0)
    if n is None:
        n = max(used, 1)
    elif used > n:
        raise ValueError(f"polynomial uses x{used} but n={n}")
    acc: dict[Word, complex] = {}
    for c, w in terms:
        acc[w] = acc.get(w, 0) + c
    return MatPoly(n, {w: [[c]] for w, c in acc.items()}, (1, 1))


def _fmt_real(x: float) -> str:
    return repr(float(x) + 0.0)  # drops the sign of -0.0


def _fmt_word(w: Word) -> str:
    parts, i = [], 0
    while i < len(w):
        j = i
        while j < len(w) and w[j] == w[i]:
            j += 1
        parts.append(f"x{w[i]}" + (f"^{j - i}" if j - i > 1 else ""))
        i = j
    return "*".join(parts)


def format_poly(p: MatPoly) -> str:
    """Canonical text (graded-lex term order, round-trip exact floats)."""
    if p.shape != (1, 1):
        raise ValueError("format_poly handles scalar polynomials only")
    out = []
    for w, c in p.terms.items():
        z = complex(c[0, 0])
        if z.imag == 0.0:
            sign = "-" if z.real < 0 else "+"
            mag = abs(z.real)
            body = _fmt_word(w) if (mag == 1.0 and w) else (
                _fmt_real(mag) + ("*" + _fmt_word(w) if w else ""))
        else:
            sign = "+"
            s = "-" if z.imag < 0 else "+"
            body = f"({_fmt_real(z.real)}{s}{_fmt_real(abs(z.imag))}i)" + ("*" + _fmt_word(w) if w else "")
        out.append((sign, body))
    if not out:
        return "0"
    s = ("-" if out[0][0] == "-" else "") + out[0][1]
    for sign, body in out[1:]:
        s += f" {sign} {body}"
    return s


def parse_matrix_poly(entries: Sequence[Sequence[str]], n: int | None = None) -> MatPoly:
    """Matrix polynomial from a 2-D array of polynomial strings."""
    if isinstance(entries, str):
        entries = json.loads(entries)
    polys = [[parse_poly(s) for s in row] for row in entries]
    if n is None:
        n = max(p.n for row in polys for p in row)
    grid = [[MatPoly(n, p.terms, (1, 1)) for p in row] for row in polys]
    return MatPoly.from_entries(grid, n)


def parse_any(obj, n: int | None = None) -> MatPoly:
    """Accept text, a 2-D array of strings, or the JSON term format."""
    from .serialize import poly_from_json

    if isinstance(obj, MatPoly):
        return obj
    if isinstance(obj, str):
        s = obj.strip()
        if s.startswith("[") or s.startswith("{"):
            return parse_any(json.loads(s), n)
        return parse_poly(s, n)
    if isinstance(obj, dict):
        return poly_from_json(obj)
    if isinstance(obj, list):
        return parse_matrix_poly(obj, n)
    raise TypeError(f"cannot read a polynomial from {type(obj).__name__}")

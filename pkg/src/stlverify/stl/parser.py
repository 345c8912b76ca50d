"""Recursive-descent parser for the ASCII formula syntax.

Grammar (precedence from tightest to loosest: ``!``, unary temporal
operators, ``U``/``R``, ``&``, ``|``)::

    formula := conj ('|' conj)*
    conj    := binary ('&' binary)*
    binary  := unary (('U' | 'R') '[' num ',' num ']' unary)*
    unary   := '!' unary | ('F' | 'G') '[' num ',' num ']' unary
             | 'N' '[' num ']' unary | primary
    primary := '(' formula ')' | 'true' | 'false' | linear rel linear
    linear  := ['+'|'-'] term (('+'|'-') term)*
    term    := num ['*' var] | var
    var     := 'x' digits        (1-based state index)
"""

from __future__ import annotations

import math
import re

from stlverify.stl.ast import FALSE, TRUE, And, Atom, Finally, Globally, Next, Not, Or, Release, Until


class StlSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} (line {line}, column {col})")
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<rel><=|>=|<|>)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[!&|()\[\],*+-])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"true", "false", "U", "R", "F", "G", "N"}


def _tokenize(text: str):
    pos, line, line_start = 0, 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise StlSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        val = m.group()
        col = pos - line_start + 1
        if kind == "ws":
            nl = val.count("\n")
            if nl:
                line += nl
                line_start = pos + val.rfind("\n") + 1
        else:
            out.append((kind, val, line, col))
        pos = m.end()
    out.append(("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str, n: int | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.n = n

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise StlSyntaxError(msg, tok[2], tok[3])

    def accept(self, val):
        if self.tok[1] == val and self.tok[0] != "eof":
            self.i += 1
            return True
        return False

    def expect(self, val):
        if not self.accept(val):
            found = self.tok[1] or "end of input"
            self.error(f"expected {val!r}, found {found!r}")

    def number(self) -> float:
        sign = -1.0 if self.accept("-") else 1.0
        if self.tok[0] == "ident" and self.tok[1] in ("inf", "Inf"):
            self.error("unbounded temporal operators are not supported")
        if self.tok[0] != "num":
            self.error(f"expected a number, found {self.tok[1] or 'end of input'!r}")
        v = float(self.tok[1])
        self.i += 1
        return sign * v

    def interval(self, op_tok):
        if self.tok[1] != "[":
            self.error(f"unbounded temporal operator {op_tok[1]!r}; give an interval [a,b]", op_tok)
        start = self.tok
        self.expect("[")
        a = self.number()
        self.expect(",")
        b = self.number()
        self.expect("]")
        if not (math.isfinite(a) and math.isfinite(b)):
            self.error("unbounded temporal operators are not supported", start)
        if a < 0 or b < a:
            self.error(f"malformed interval [{a:g},{b:g}]", start)
        return a, b

    def parse(self):
        f = self.formula()
        if self.tok[0] != "eof":
            self.error(f"unexpected {self.tok[1]!r}")
        return f

    def formula(self):
        parts = [self.conj()]
        while self.accept("|"):
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.binary()]
        while self.accept("&"):
            parts.append(self.binary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def binary(self):
        left = self.unary()
        while self.tok[0] == "ident" and self.tok[1] in ("U", "R"):
            op = self.tok
            self.i += 1
            a, b = self.interval(op)
            right = self.unary()
            left = Until(a, b, left, right) if op[1] == "U" else Release(a, b, left, right)
        return left

    def unary(self):
        if self.accept("!"):
            return Not(self.unary())
        tok = self.tok
        if tok[0] == "ident" and tok[1] in ("F", "G"):
            self.i += 1
            a, b = self.interval(tok)
            arg = self.unary()
            return Finally(a, b, arg) if tok[1] == "F" else Globally(a, b, arg)
        if tok[0] == "ident" and tok[1] == "N":
            self.i += 1
            if self.tok[1] != "[":
                self.error("next operator needs a time, e.g. N[0.5]", tok)
            start = self.tok
            self.expect("[")
            a = self.number()
            self.expect("]")
            if a < 0:
                self.error("negative next time", start)
            return Next(a, self.unary())
        return self.primary()

    def primary(self):
        if self.accept("("):
            f = self.formula()
            self.expect(")")
            return f
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        start = self.tok
        lhs, c0 = self.linear()
        if self.tok[0] != "rel":
            self.error(f"expected a comparison (<=, <, >=, >), found {self.tok[1] or 'end of input'!r}")
        rel = self.tok[1]
        self.i += 1
        rhs, c1 = self.linear()
        coeffs = dict(lhs)
        for k, v in rhs.items():
            coeffs[k] = coeffs.get(k, 0.0) - v
        size = max(coeffs, default=-1) + 1
        a = [0.0] * size
        for k, v in coeffs.items():
            a[k] = v
        if not any(a):
            self.error("predicate does not reference any state variable", start)
        return Atom(tuple(a), c1 - c0, rel)

    def linear(self):
        coeffs: dict = {}
        const = 0.0
        sign = 1.0
        if self.accept("-"):
            sign = -1.0
        else:
            self.accept("+")
        while True:
            k, v = self.term()
            if k is None:
                const += sign * v
            else:
                coeffs[k] = coeffs.get(k, 0.0) + sign * v
            if self.accept("+"):
                sign = 1.0
            elif self.accept("-"):
                sign = -1.0
            else:
                return coeffs, const

    def term(self):
        tok = self.tok
        if tok[0] == "num":
            v = self.number()
            if self.accept("*"):
                return self.var(), v
            return None, v
        if tok[0] == "ident":
            return self.var(), 1.0
        self.error(f"expected a term, found {tok[1] or 'end of input'!r}")

    def var(self) -> int:
        tok = self.tok
        if tok[0] != "ident":
            self.error(f"expected a state variable, found {tok[1] or 'end of input'!r}")
        m = re.fullmatch(r"x(\d+)", tok[1])
        if m is None or tok[1] in _KEYWORDS:
            self.error(f"unknown variable {tok[1]!r}")
        idx = int(m.group(1))
        if idx < 1 or (self.n is not None and idx > self.n):
            self.error(f"unknown variable {tok[1]!r}")
        self.i += 1
        return idx - 1


def parse_stl(text: str, n: int | None = None):
    """Parse ``text``; if ``n`` is given, variables beyond ``x{n}`` are rejected."""
    return _Parser(text, n).parse()

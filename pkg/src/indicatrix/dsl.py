"""A small expression language for scalar functions of ``y1 .. yn``.

Grammar (EBNF)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = primary [ "^" exponent ] ;
    primary  = number | variable | "sqrt" "(" expr ")" | "(" expr ")" ;
    exponent = [ "-" ] number
             | "(" [ "-" ] number [ "/" number ] ")" ;
    variable = "y" nonzero-digit { digit } ;
    number   = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
             | "." digits [ ("e" | "E") [ "+" | "-" ] digits ] ;

Exponents are rational literals, so every node stays twice differentiable
wherever its base is positive.  ``^`` binds tighter than unary minus, which
binds tighter than ``*`` and ``/``; binary operators associate to the left and
a power may not be raised again without parentheses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import jets
from .jets import DomainError, Jet2

MAX_NESTING = 100
MAX_DEPTH = 400
MAX_EXPONENT = 1000
HOMOGENEITY_SAMPLES = 32
HOMOGENEITY_RTOL = 1e-7
_HOMOGENEITY_SEED = 20240517


class DslError(ValueError):
    """Base class for expression errors that can be reported to a user."""


class DslSyntaxError(DslError):
    """Malformed source, with a 1-based ``line`` and ``column``."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.reason = message
        self.line = line
        self.column = column


class HomogeneityError(DslError):
    """The expression is not positively 1-homogeneous."""

    def __init__(self, exponent: float):
        super().__init__(
            f"expression is not 1-homogeneous: measured scaling exponent {exponent:.6g}"
        )
        self.exponent = exponent


# ---------------------------------------------------------------- tree nodes


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: Fraction


@dataclass(frozen=True)
class Call:
    name: str
    arg: object


FUNCTIONS = {"sqrt": jets.sqrt}

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    if isinstance(node, Pow):
        return _POW_PREC
    return _ATOM_PREC


def _format_exponent(p: Fraction) -> str:
    if p.denominator == 1 and p >= 0:
        return str(p.numerator)
    return f"({p.numerator}/{p.denominator})" if p.denominator != 1 else f"({p.numerator})"


def to_text(node) -> str:
    """Print a tree with the fewest parentheses that parse back to the same tree."""
    if isinstance(node, NormExpr):
        node = node.root
    if isinstance(node, Var):
        return f"y{node.index}"
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Call):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        if _prec(node.operand) < _NEG_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if _prec(node.base) < _ATOM_PREC:
            base = f"({base})"
        return f"{base}^{_format_exponent(node.exponent)}"
    if isinstance(node, BinOp):
        p = _PRECEDENCE[node.op]
        left, right = to_text(node.left), to_text(node.right)
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        sep = f" {node.op} " if p == 1 else node.op
        return f"{left}{sep}{right}"
    raise TypeError(f"not an expression node: {node!r}")


def _children(node):
    if isinstance(node, (Neg,)):
        return (node.operand,)
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, Call):
        return (node.arg,)
    return ()


def depth(node) -> int:
    """Tree depth, computed without recursion."""
    best = 0
    stack = [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        stack.extend((c, d + 1) for c in _children(n))
    return best


# -------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(source: str, origin: tuple[int, int]) -> list[_Token]:
    tokens = []
    pos = 0
    line, col = origin
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group()
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, text, line, col))
        for ch in text:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        pos = m.end()
    tokens.append(_Token("end", "", line, col))
    return tokens


# ------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, tokens: list[_Token], dimension: int):
        self.tokens = tokens
        self.pos = 0
        self.dimension = dimension
        self.nesting = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, message: str, token: _Token | None = None):
        token = token or self.current
        return DslSyntaxError(message, token.line, token.column)

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.current.kind == "op" and self.current.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.current.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    def enter(self):
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise self.error("expression nested too deeply")

    def parse(self):
        if self.current.kind == "end":
            raise self.error("empty expression")
        node = self.expr()
        if self.current.kind != "end":
            raise self.error(f"unexpected {self.current.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            self.enter()
            node = Neg(self.unary())
            self.nesting -= 1
            return node
        return self.power()

    def power(self):
        node = self.primary()
        if self.accept("^"):
            node = Pow(node, self.exponent())
            if self.current.kind == "op" and self.current.text == "^":
                raise self.error("chained exponent; add parentheses")
        return node

    def _number(self) -> Fraction:
        tok = self.current
        if tok.kind != "number":
            raise self.error("exponent must be a rational literal")
        self.advance()
        try:
            return Fraction(tok.text)
        except (ValueError, OverflowError):
            raise self.error(f"invalid number {tok.text!r}", tok) from None

    def exponent(self) -> Fraction:
        start = self.current
        if self.accept("("):
            sign = -1 if self.accept("-") else 1
            value = self._number()
            if self.accept("/"):
                den_tok = self.current
                den = self._number()
                if den == 0:
                    raise self.error("zero denominator in exponent", den_tok)
                value = value / den
            self.expect(")")
        else:
            sign = -1 if self.accept("-") else 1
            value = self._number()
        value = sign * value
        if abs(value) > MAX_EXPONENT or value.denominator > MAX_EXPONENT:
            raise self.error("exponent out of range", start)
        return value

    def primary(self):
        tok = self.current
        if tok.kind == "number":
            self.advance()
            value = float(tok.text)
            if not np.isfinite(value):
                raise self.error("numeric literal out of range", tok)
            return Num(value)
        if tok.kind == "ident":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                self.enter()
                arg = self.expr()
                self.nesting -= 1
                self.expect(")")
                return Call(tok.text, arg)
            m = re.fullmatch(r"y([1-9]\d{0,5})", tok.text)
            if m is None:
                raise self.error(f"unknown identifier {tok.text!r}", tok)
            index = int(m.group(1))
            if index > self.dimension:
                raise self.error(
                    f"variable {tok.text} out of range for dimension {self.dimension}", tok
                )
            return Var(index)
        if self.accept("("):
            self.enter()
            node = self.expr()
            self.nesting -= 1
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}")


# --------------------------------------------------------------- evaluation


def evaluate(node, coords):
    """Evaluate a tree on ``coords``, a sequence of arrays or :class:`Jet2`.

    Domain violations are re-raised naming the offending sub-expression.
    """
    if isinstance(node, Var):
        return coords[node.index - 1]
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        return -evaluate(node.operand, coords)
    if isinstance(node, BinOp):
        a = evaluate(node.left, coords)
        b = evaluate(node.right, coords)
        try:
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if not isinstance(b, Jet2) and np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            if isinstance(a, Jet2) or isinstance(b, Jet2):
                return a / b
            return np.divide(a, b)
        except DomainError as exc:
            raise DomainError(f"{exc} in `{to_text(node)}`") from None
    if isinstance(node, Pow):
        base = evaluate(node.base, coords)
        try:
            return jets.power(base, node.exponent)
        except DomainError as exc:
            raise DomainError(f"{exc} in `{to_text(node)}`") from None
    if isinstance(node, Call):
        arg = evaluate(node.arg, coords)
        try:
            return FUNCTIONS[node.name](arg)
        except DomainError as exc:
            raise DomainError(f"{exc} in `{to_text(node)}`") from None
    raise TypeError(f"not an expression node: {node!r}")


@dataclass(frozen=True)
class NormExpr:
    """A parsed expression together with its declared dimension."""

    root: object
    dimension: int

    def __str__(self) -> str:
        return to_text(self.root)

    def __call__(self, y):
        """Value at one point ``(n,)`` or a batch ``(..., n)``."""
        y = np.asarray(y, dtype=float)
        coords = [y[..., i] for i in range(self.dimension)]
        with np.errstate(all="ignore"):
            out = evaluate(self.root, coords)
        return np.broadcast_to(np.asarray(out, dtype=float), y.shape[:-1]).copy()

    def jet(self, y, order: int = 2) -> Jet2:
        y = np.asarray(y, dtype=float)
        coords = Jet2.variables(y, order=order)
        out = evaluate(self.root, coords)
        if not isinstance(out, Jet2):
            out = coords[0]._constant(out)
        return out


def eval_expr_jet(expr: NormExpr, y) -> Jet2:
    """Value, gradient and Hessian of ``expr`` at ``y``."""
    return expr.jet(y, order=2)


def scaling_exponent(expr: NormExpr, samples: int = HOMOGENEITY_SAMPLES) -> tuple[bool, float]:
    """Test ``F(2y) = 2 F(y)`` on random points.

    Returns whether the test passed and the median measured exponent
    ``log2 |F(2y) / F(y)|`` (``nan`` when nothing could be measured).
    """
    rng = np.random.default_rng(_HOMOGENEITY_SEED)
    points = rng.standard_normal((samples, expr.dimension))
    ok = True
    exponents = []
    usable = 0
    for y in points:
        try:
            f1 = float(expr(y))
            f2 = float(expr(2.0 * y))
        except DomainError:
            continue
        if not (np.isfinite(f1) and np.isfinite(f2)):
            ok = False
            continue
        usable += 1
        if abs(f2 - 2.0 * f1) > HOMOGENEITY_RTOL * abs(f1):
            ok = False
        if f1 != 0 and f2 != 0:
            exponents.append(np.log2(abs(f2 / f1)))
    if usable == 0:
        ok = False
    exponent = float(np.median(exponents)) if exponents else float("nan")
    return ok, exponent


def parse(
    source, dimension: int, *, origin: tuple[int, int] = (1, 1), check_homogeneity: bool = True
) -> NormExpr:
    """Parse ``source`` into a :class:`NormExpr` of the given dimension.

    ``origin`` is the (line, column) of the first character, used when the
    expression is embedded in a larger file.  Unless ``check_homogeneity`` is
    false, expressions failing the sampled ``F(2y) = 2F(y)`` test are rejected
    with :class:`HomogeneityError`.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DslSyntaxError("source is not valid UTF-8", origin[0], exc.start + 1) from None
    if not isinstance(dimension, (int, np.integer)) or dimension < 2:
        raise ValueError("dimension must be an integer >= 2")
    tokens = _tokenize(source, origin)
    root = _Parser(tokens, int(dimension)).parse()
    if depth(root) > MAX_DEPTH:
        raise DslSyntaxError("expression nested too deeply", *origin)
    expr = NormExpr(root, int(dimension))
    if check_homogeneity:
        ok, exponent = scaling_exponent(expr)
        if not ok:
            raise HomogeneityError(exponent)
    return expr

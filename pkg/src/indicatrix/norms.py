"""Finsler norms on R^n.

Every norm is written once as a formula over coordinate objects, so the same
code yields plain values (arrays) and derivative jets.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from fractions import Fraction

import numpy as np

from . import dsl, jets
from ._validation import check_points, check_spd_matrix, check_vector
from .jets import DomainError, Jet2


class NormFileError(ValueError):
    """Malformed norm definition file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}" + (f", column {column}" if column else "") + ")" if line else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vector(v) -> str:
    return "[" + ", ".join(_fmt(x) for x in v) + "]"


def _fmt_matrix(A) -> str:
    return "[" + ", ".join(_fmt_vector(row) for row in A) + "]"


def _quadratic_form(A, ys):
    n = len(ys)
    q = A[0, 0] * (ys[0] * ys[0])
    for i in range(n):
        for j in range(i, n):
            if i == j == 0:
                continue
            coeff = A[i, i] if i == j else 2.0 * A[i, j]
            if coeff != 0:
                q = q + coeff * (ys[i] * ys[j])
    return q


def _linear_form(b, ys):
    out = b[0] * ys[0]
    for bi, yi in zip(b[1:], ys[1:]):
        if bi != 0:
            out = out + bi * yi
    return out


class FinslerNorm(ABC):
    """Positively 1-homogeneous function, twice differentiable away from 0.

    Subclasses implement :meth:`formula` over a list of coordinates (arrays
    or jets) and :meth:`to_text`, which serializes the norm in norm-file
    syntax.
    """

    dimension: int

    @abstractmethod
    def formula(self, coords):
        """The norm written in terms of coordinate objects."""

    @abstractmethod
    def to_text(self) -> str:
        """Norm-file representation, parseable by :func:`parse_norm_file`."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_text()!r})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_text() == other.to_text()

    def __hash__(self):
        return hash((type(self).__name__, self.to_text()))

    @staticmethod
    def _check_positive(values, Y):
        values = np.asarray(values, dtype=float)
        bad = ~(np.isfinite(values) & (values > 0))
        if np.any(bad):
            Y = np.asarray(Y)
            point = Y if Y.ndim == 1 else Y[bad][0]
            raise DomainError(f"norm is not positive at y = {point.tolist()}")

    def __call__(self, y) -> float:
        """``F(y)`` for a single nonzero vector."""
        y = check_vector(y, self.dimension)
        with np.errstate(all="ignore"):
            value = float(self.formula([y[i] for i in range(self.dimension)]))
        self._check_positive(value, y)
        return value

    def values(self, Y):
        """``F`` on a batch of points, shape ``(..., n) -> (...)``."""
        Y = check_points(Y, self.dimension)
        with np.errstate(all="ignore"):
            out = self.formula([Y[..., i] for i in range(self.dimension)])
        out = np.broadcast_to(np.asarray(out, dtype=float), Y.shape[:-1]).copy()
        self._check_positive(out, Y)
        return out

    def extended_values(self, Y):
        """``F`` evaluated in ``numpy.longdouble`` for finite-difference work."""
        Y = np.asarray(Y, dtype=np.longdouble)
        check_points(Y.astype(float), self.dimension)
        with np.errstate(all="ignore"):
            out = self.formula([Y[..., i] for i in range(self.dimension)])
        out = np.broadcast_to(np.asarray(out), Y.shape[:-1]).astype(np.longdouble)
        self._check_positive(out, Y)
        return out

    def jet(self, Y, order: int = 2) -> Jet2:
        """Derivative jet of ``F`` at a point or batch of points."""
        Y = check_points(Y, self.dimension)
        out = self.formula(Jet2.variables(Y, order=order))
        if not isinstance(out, Jet2):
            out = Jet2.variables(Y, order=order)[0]._constant(out)
        self._check_positive(out.value, Y)
        return out

    def jet2(self, y) -> Jet2:
        """Value, gradient and Hessian of ``F`` at one nonzero vector."""
        y = check_vector(y, self.dimension)
        return self.jet(y, order=2)

    def value_and_grad(self, Y):
        """``F`` and its gradient on a batch of points."""
        j = self.jet(Y, order=1)
        return j.value, j.gradient


class RiemannianNorm(FinslerNorm):
    """``F(y) = sqrt(y.A.y)`` for a symmetric positive definite ``A``."""

    def __init__(self, A):
        self.A = check_spd_matrix(A)
        self.dimension = self.A.shape[0]

    def formula(self, coords):
        return jets.sqrt(_quadratic_form(self.A, coords))

    def to_text(self) -> str:
        return f"family = riemannian\nA = {_fmt_matrix(self.A)}\n"


class RandersNorm(FinslerNorm):
    """``F(y) = sqrt(y.A.y) + b.y`` with ``b.A^-1.b < 1``."""

    def __init__(self, A, b):
        self.A = check_spd_matrix(A)
        self.dimension = self.A.shape[0]
        self.b = check_vector(b, self.dimension, name="b", nonzero=False)
        self.b_norm_sq = float(self.b @ np.linalg.solve(self.A, self.b))
        if not self.b_norm_sq < 1:
            raise ValueError(
                f"Randers drift b is not admissible: b.A^-1.b = {self.b_norm_sq:.6g} >= 1"
            )

    def formula(self, coords):
        alpha = jets.sqrt(_quadratic_form(self.A, coords))
        if not np.any(self.b):
            return alpha
        return alpha + _linear_form(self.b, coords)

    def to_text(self) -> str:
        return f"family = randers\nA = {_fmt_matrix(self.A)}\nb = {_fmt_vector(self.b)}\n"


class MthRootNorm(FinslerNorm):
    """``F(y) = (sum c_i y_i^m)^(1/m)`` for even ``m >= 4``.

    The fundamental tensor of this norm degenerates along the coordinate
    axes, so it is not strongly convex there.
    """

    def __init__(self, m: int, coefficients):
        if int(m) != m or m < 4 or m % 2:
            raise ValueError(f"m must be an even integer >= 4, got {m!r}")
        self.m = int(m)
        self.coefficients = np.array(coefficients, dtype=float)
        if self.coefficients.ndim != 1 or self.coefficients.size < 2:
            raise ValueError("coefficients must be a vector with at least 2 entries")
        if not np.all(np.isfinite(self.coefficients)) or np.any(self.coefficients <= 0):
            raise ValueError("coefficients must be finite and positive")
        self.dimension = self.coefficients.size

    def formula(self, coords):
        total = self.coefficients[0] * jets.power(coords[0], self.m)
        for c, y in zip(self.coefficients[1:], coords[1:]):
            total = total + c * jets.power(y, self.m)
        return jets.power(total, Fraction(1, self.m))

    def to_text(self) -> str:
        return f"family = mthroot\nm = {self.m}\nc = {_fmt_vector(self.coefficients)}\n"


class ExpressionNorm(FinslerNorm):
    """A norm given by an expression in the ``y1 .. yn`` language."""

    def __init__(self, expr):
        if isinstance(expr, str):
            raise TypeError("pass a parsed NormExpr; use ExpressionNorm.from_source for text")
        self.expr = expr
        self.dimension = expr.dimension
        self._check_sample_positivity()

    @classmethod
    def from_source(cls, source: str, dimension: int) -> ExpressionNorm:
        return cls(dsl.parse(source, dimension))

    def _check_sample_positivity(self):
        rng = np.random.default_rng(dsl._HOMOGENEITY_SEED)
        for y in rng.standard_normal((dsl.HOMOGENEITY_SAMPLES, self.dimension)):
            try:
                value = float(self.expr(y))
            except DomainError as exc:
                raise DomainError(f"norm undefined at sample point {y.tolist()}: {exc}") from None
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"norm is not positive at sample point {y.tolist()}")

    def formula(self, coords):
        return dsl.evaluate(self.expr.root, coords)

    def to_text(self) -> str:
        return f"dim = {self.dimension}\nF = {dsl.to_text(self.expr.root)}\n"


# ---------------------------------------------------------------- norm files


def _parse_value(text: str, lineno: int, column: int):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise NormFileError(f"cannot parse value {text!r}: {exc.msg}", lineno, column) from None


def parse_norm_file(text: str) -> FinslerNorm:
    """Build a norm from norm-file text.

    Either ``dim = n`` plus ``F = <expression>``, or a built-in family::

        family = randers
        A = [[1, 0], [0, 1]]
        b = [0.5, 0]

    Blank lines and ``#`` comments are ignored.
    """
    entries: dict[str, tuple[str, int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            raise NormFileError("expected `key = value`", lineno, 1)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise NormFileError("missing key", lineno, 1)
        if key in entries:
            raise NormFileError(f"duplicate key {key!r}", lineno, 1)
        column = len(line) - len(value.lstrip()) + 1
        entries[key] = (value.strip(), lineno, column)
    if not entries:
        raise NormFileError("empty norm file")

    def take(key, required=True):
        if key not in entries:
            if required:
                raise NormFileError(f"missing key {key!r}")
            return None
        return entries.pop(key)

    dim_entry = take("dim", required=False)
    dimension = None
    if dim_entry is not None:
        dimension = _parse_value(*dim_entry)
        if not isinstance(dimension, int) or isinstance(dimension, bool) or dimension < 2:
            raise NormFileError("dim must be an integer >= 2", dim_entry[1], dim_entry[2])

    family_entry = take("family", required=False)
    try:
        if family_entry is None:
            f_value, f_line, f_col = take("F")
            if dimension is None:
                raise NormFileError("expression norms need `dim = n`")
            _reject_extra(entries)
            return ExpressionNorm(dsl.parse(f_value, dimension, origin=(f_line, f_col)))
        family = family_entry[0].lower()
        if family == "riemannian":
            norm = RiemannianNorm(_parse_value(*take("A")))
        elif family == "randers":
            norm = RandersNorm(_parse_value(*take("A")), _parse_value(*take("b")))
        elif family == "mthroot":
            norm = MthRootNorm(_parse_value(*take("m")), _parse_value(*take("c")))
        else:
            raise NormFileError(f"unknown family {family_entry[0]!r}", family_entry[1], family_entry[2])
        _reject_extra(entries)
    except (NormFileError, dsl.DslError, DomainError):
        raise
    except (ValueError, TypeError) as exc:
        raise NormFileError(str(exc)) from None
    if dimension is not None and dimension != norm.dimension:
        raise NormFileError(f"dim = {dimension} does not match the family's dimension {norm.dimension}")
    return norm


def _reject_extra(entries):
    if entries:
        key, (_, lineno, _) = next(iter(entries.items()))
        raise NormFileError(f"unexpected key {key!r}", lineno, 1)


def read_norm_file(path) -> FinslerNorm:
    with open(path, encoding="utf-8") as fh:
        return parse_norm_file(fh.read())

"""Forward-mode second-order jets.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar function
with respect to ``n`` seed variables.  Every field may carry leading batch
dimensions, so one pass of jet arithmetic differentiates a formula at many
points at once.  Setting ``order=1`` drops the Hessian, which is all the
optimizers need.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Real

import numpy as np


class DomainError(ValueError):
    """Raised when a function is evaluated outside its smooth domain."""


def _as_real(x):
    arr = np.asarray(x)
    return arr if np.issubdtype(arr.dtype, np.floating) else arr.astype(float)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet2:
    """Truncated Taylor expansion ``value + gradient.h + h.hessian.h / 2``.

    Parameters
    ----------
    value : ndarray, shape (...)
    gradient : ndarray, shape (..., n)
    hessian : ndarray, shape (..., n, n) or None
        ``None`` for first-order jets.
    """

    __slots__ = ("value", "gradient", "hessian")
    __array_priority__ = 100

    def __init__(self, value, gradient, hessian=None):
        self.value = np.asarray(value, dtype=float)
        self.gradient = np.asarray(gradient, dtype=float)
        self.hessian = None if hessian is None else np.asarray(hessian, dtype=float)

    @property
    def order(self) -> int:
        return 1 if self.hessian is None else 2

    @property
    def dimension(self) -> int:
        return self.gradient.shape[-1]

    @classmethod
    def variables(cls, points, order: int = 2) -> list[Jet2]:
        """Seed one jet per coordinate of ``points`` (shape ``(..., n)``)."""
        points = np.asarray(points, dtype=float)
        n = points.shape[-1]
        batch = points.shape[:-1]
        eye = np.eye(n)
        hess = np.zeros(batch + (n, n)) if order == 2 else None
        return [
            cls(points[..., i], np.broadcast_to(eye[i], batch + (n,)), hess)
            for i in range(n)
        ]

    def _constant(self, c) -> Jet2:
        c = np.asarray(c, dtype=float)
        shape = np.broadcast_shapes(c.shape, self.value.shape)
        grad = np.zeros(shape + (self.dimension,))
        hess = None if self.hessian is None else np.zeros(shape + (self.dimension,) * 2)
        return Jet2(np.broadcast_to(c, shape), grad, hess)

    def compose(self, f0, f1, f2=None) -> Jet2:
        """Apply a scalar function with value ``f0`` and derivatives ``f1``, ``f2``."""
        grad = f1[..., None] * self.gradient
        hess = None
        if self.hessian is not None:
            hess = f1[..., None, None] * self.hessian + f2[..., None, None] * _outer(
                self.gradient, self.gradient
            )
        return Jet2(f0, grad, hess)

    def __neg__(self) -> Jet2:
        hess = None if self.hessian is None else -self.hessian
        return Jet2(-self.value, -self.gradient, hess)

    def __pos__(self) -> Jet2:
        return self

    def __add__(self, other) -> Jet2:
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.gradient, self.hessian)
        hess = None
        if self.hessian is not None and other.hessian is not None:
            hess = self.hessian + other.hessian
        return Jet2(self.value + other.value, self.gradient + other.gradient, hess)

    __radd__ = __add__

    def __sub__(self, other) -> Jet2:
        return self + (-other)

    def __rsub__(self, other) -> Jet2:
        return (-self) + other

    def __mul__(self, other) -> Jet2:
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            hess = None if self.hessian is None else c[..., None, None] * self.hessian
            return Jet2(c * self.value, c[..., None] * self.gradient, hess)
        a, b = self, other
        grad = a.value[..., None] * b.gradient + b.value[..., None] * a.gradient
        hess = None
        if a.hessian is not None and b.hessian is not None:
            hess = (
                a.value[..., None, None] * b.hessian
                + b.value[..., None, None] * a.hessian
                + (_outer(a.gradient, b.gradient) + _outer(b.gradient, a.gradient))
            )
        return Jet2(a.value * b.value, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> Jet2:
        x = self.value
        if np.any(x == 0):
            raise DomainError("division by zero")
        inv = 1.0 / x
        return self.compose(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other) -> Jet2:
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            if np.any(c == 0):
                raise DomainError("division by zero")
            return self * (1.0 / c)
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> Jet2:
        return self.reciprocal() * other

    def __pow__(self, exponent) -> Jet2:
        return power(self, exponent)

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, gradient={self.gradient!r}, order={self.order})"


def power(x, exponent):
    """``x ** exponent`` for a rational exponent, on jets or plain arrays.

    Integer exponents accept any base (nonzero for negative exponents);
    fractional exponents require a strictly positive base, since the power
    is not twice differentiable at zero.
    """
    if isinstance(exponent, Fraction) and exponent.denominator == 1:
        exponent = int(exponent)
    if not isinstance(exponent, (int, Fraction, Real)):
        raise TypeError(f"unsupported exponent {exponent!r}")
    value = x.value if isinstance(x, Jet2) else _as_real(x)
    integral = isinstance(exponent, int) or float(exponent).is_integer()
    if integral:
        p = int(exponent)
        if p < 0 and np.any(value == 0):
            raise DomainError(f"zero raised to negative power {p}")
    else:
        p = float(exponent)
        if np.any(value <= 0):
            raise DomainError(f"non-positive base raised to fractional power {exponent}")
    if not isinstance(x, Jet2):
        if not integral and value.dtype != np.float64:
            # keep the exponent at the base's precision
            exponent = Fraction(exponent)
            p = value.dtype.type(exponent.numerator) / exponent.denominator
        return value**p
    if p == 0:
        return x._constant(np.ones_like(value))
    if p == 1:
        return x
    if p == 2:
        return x * x
    f0 = value**p
    f1 = p * value ** (p - 1)
    f2 = p * (p - 1) * value ** (p - 2) if x.hessian is not None else None
    return x.compose(f0, f1, f2)


def sqrt(x):
    """Square root on jets or arrays; the argument must be strictly positive."""
    value = x.value if isinstance(x, Jet2) else _as_real(x)
    if np.any(value <= 0):
        raise DomainError("square root of a non-positive value")
    root = np.sqrt(value)
    if not isinstance(x, Jet2):
        return root
    f1 = 0.5 / root
    f2 = -0.25 / (root * value) if x.hessian is not None else None
    return x.compose(root, f1, f2)

"""The fundamental tensor ``g(y) = (1/2) Hess(F^2)(y)`` and relative length."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_points, check_vector
from .config import DEFAULT_TOLERANCES, ToleranceConfig
from .norms import FinslerNorm


class ConvexityError(ValueError):
    """The fundamental tensor is not positive definite at a base direction."""

    def __init__(self, message: str, min_eigenvalue: float, base_point=None):
        super().__init__(f"{message} (min eigenvalue {min_eigenvalue:.6g})")
        self.min_eigenvalue = min_eigenvalue
        self.base_point = base_point


@dataclass(frozen=True, eq=False)
class FundamentalTensor:
    """``g(y)`` at one base direction with its spectral data.

    ``factorization`` is the lower Cholesky factor, present only when the
    smallest eigenvalue clears the positive-definiteness threshold.
    """

    base_point: np.ndarray
    matrix: np.ndarray
    min_eigenvalue: float
    factorization: np.ndarray | None
    pd_threshold: float

    @property
    def positive_definite(self) -> bool:
        return self.factorization is not None

    def quadratic(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.matrix @ xi)


def tensor_from_jet(value, gradient, hessian):
    """``F Hess F + grad F grad F^T``, batched over leading dimensions."""
    value = np.asarray(value)
    return value[..., None, None] * hessian + gradient[..., :, None] * gradient[..., None, :]


def pd_threshold(matrix, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    return tol.pd_tolerance * np.abs(matrix).max(axis=(-2, -1))


def fundamental_tensor(
    norm: FinslerNorm, y, tol: ToleranceConfig = DEFAULT_TOLERANCES
) -> FundamentalTensor:
    """Fundamental tensor of ``norm`` at ``y``, differentiated by jets."""
    y = check_vector(y, norm.dimension)
    jet = norm.jet(y, order=2)
    matrix = tensor_from_jet(jet.value, jet.gradient, jet.hessian)
    return _assemble(y, matrix, tol)


def _assemble(y, matrix, tol):
    min_eig = float(np.linalg.eigvalsh(matrix)[0])
    threshold = float(pd_threshold(matrix, tol))
    factor = None
    if min_eig > threshold:
        try:
            factor = np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError:
            factor = None
    for arr in (y, matrix) + ((factor,) if factor is not None else ()):
        arr.setflags(write=False)
    return FundamentalTensor(y, matrix, min_eig, factor, threshold)


def tensor_batch(norm: FinslerNorm, Y):
    """Tensors and their smallest eigenvalues on a batch of points ``(k, n)``."""
    Y = check_points(Y, norm.dimension)
    jet = norm.jet(Y, order=2)
    matrices = tensor_from_jet(jet.value, jet.gradient, jet.hessian)
    return matrices, np.linalg.eigvalsh(matrices)[..., 0]


def fd_fundamental_tensor(norm: FinslerNorm, y, step: float = DEFAULT_TOLERANCES.fd_step):
    """``(1/2) Hess(F^2)`` by central differences of values only.

    ``step`` is relative to ``max|y_i|``.  Values are taken in extended
    precision: in float64 the roundoff of a second difference at ``h = 1e-5``
    is already ~1e-5.  Independent of the jet machinery; used to cross-check it.
    """
    y = check_vector(y, norm.dimension).astype(np.longdouble)
    n = y.size
    h = np.longdouble(step) * np.abs(y).max()
    eye = np.eye(n, dtype=np.longdouble) * h

    def f2(p):
        return norm.extended_values(p) ** 2

    center = f2(y)
    H = np.empty((n, n), dtype=np.longdouble)
    for i in range(n):
        H[i, i] = (f2(y + eye[i]) - 2 * center + f2(y - eye[i])) / (h * h)
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = (
                f2(y + eye[i] + eye[j])
                - f2(y + eye[i] - eye[j])
                - f2(y - eye[i] + eye[j])
                + f2(y - eye[i] - eye[j])
            ) / (4 * h * h)
    return (H / 2).astype(float)


def relative_length(norm: FinslerNorm, xi, y, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """Length of ``xi`` in the inner product ``g(y)``."""
    xi = check_vector(xi, norm.dimension, name="xi")
    g = fundamental_tensor(norm, y, tol)
    if not g.positive_definite:
        raise ConvexityError("fundamental tensor is not positive definite", g.min_eigenvalue, g.base_point)
    return float(np.sqrt(g.quadratic(xi)))

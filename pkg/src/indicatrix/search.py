"""Search for violations of ``|xi|_y >= F(xi)`` and of its reverse.

For a base point ``y`` on the indicatrix, every ``xi`` on the osculating
ellipsoid ``E(y)`` has relative length 1, so the inequality at ``(y, xi)``
reduces to comparing ``F(xi)`` with 1.  The extreme values of ``F`` over
``E(y)`` are therefore the worst cases at ``y``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_vector
from .config import DEFAULT_TOLERANCES, ToleranceConfig
from .geometry import (
    default_restarts,
    grid_keys,
    indicatrix_point,
    initial_directions,
    sample_indicatrix,
    sphere_ascent,
)
from .jets import DomainError
from .norms import FinslerNorm, parse_norm_file
from .tensor import ConvexityError, fd_fundamental_tensor, fundamental_tensor

CERTIFICATE_VERSION = 1
MATSUMOTO = "matsumoto"
REVERSE = "reverse"
# Refinement steps as multiples of ``fd_step``; a Richardson estimate is formed from the two finest.
REFINEMENT_FACTORS = (4.0, 2.0, 1.0)
REFINEMENT_SPREAD = 1e-5


class NumericalTrustError(RuntimeError):
    """Finite-difference refinement disagrees with the differentiated tensor."""

    def __init__(self, spread: float):
        super().__init__(f"Hessian refinement spread {spread:.3g} exceeds {REFINEMENT_SPREAD:g}")
        self.spread = spread


class ConvexityAuditError(ConvexityError):
    """Strong convexity fails at some grid directions."""

    def __init__(self, sample):
        failures = sample.failures
        worst = sample.min_eigenvalue
        super().__init__(f"strong convexity fails at {failures.size} grid direction(s)", worst)
        self.sample = sample
        self.failures = failures


@dataclass(frozen=True, eq=False)
class Certificate:
    """A verified pair ``(y, xi)`` violating one of the two inequalities.

    ``y`` is on the indicatrix and ``xi`` on the osculating ellipsoid ``E(y)``,
    so ``rel_len`` is 1 and ``margin = |F_xi - rel_len|``.
    """

    norm: FinslerNorm
    y: np.ndarray
    xi: np.ndarray
    F_xi: float
    rel_len: float
    direction: str
    margin: float
    tolerances: ToleranceConfig = DEFAULT_TOLERANCES

    is_violation = True

    def recompute(self) -> tuple[float, float]:
        """``(F(xi), |xi|_y)`` evaluated afresh."""
        g = fundamental_tensor(self.norm, self.y, self.tolerances)
        return self.norm(self.xi), math.sqrt(g.quadratic(self.xi))

    def to_dict(self) -> dict:
        return {
            "certificate_version": CERTIFICATE_VERSION,
            "norm": self.norm.to_text(),
            "y": [float(v) for v in self.y],
            "xi": [float(v) for v in self.xi],
            "F_xi": float(self.F_xi),
            "rel_len": float(self.rel_len),
            "direction": self.direction,
            "margin": float(self.margin),
            "tolerances": self.tolerances.as_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Certificate:
        version = data.get("certificate_version")
        if version != CERTIFICATE_VERSION:
            raise ValueError(f"unsupported certificate_version {version!r}")
        if data.get("direction") not in (MATSUMOTO, REVERSE):
            raise ValueError(f"invalid direction {data.get('direction')!r}")
        return cls(
            norm=parse_norm_file(data["norm"]),
            y=np.asarray(data["y"], dtype=float),
            xi=np.asarray(data["xi"], dtype=float),
            F_xi=float(data["F_xi"]),
            rel_len=float(data["rel_len"]),
            direction=data["direction"],
            margin=float(data["margin"]),
            tolerances=ToleranceConfig.from_dict(data.get("tolerances", {})),
        )


@dataclass(frozen=True, eq=False)
class NoViolation:
    """Verdict of :func:`certify` when neither inequality is violated beyond tolerance."""

    norm: FinslerNorm
    y: np.ndarray
    xi: np.ndarray
    F_xi: float
    rel_len: float
    margin: float
    tolerances: ToleranceConfig = DEFAULT_TOLERANCES

    direction = None
    is_violation = False

    def to_dict(self) -> dict:
        return {
            "verdict": "no violation",
            "norm": self.norm.to_text(),
            "y": [float(v) for v in self.y],
            "xi": [float(v) for v in self.xi],
            "F_xi": float(self.F_xi),
            "rel_len": float(self.rel_len),
            "margin": float(self.margin),
        }


def _refinement_spread(norm, y, G, tol: ToleranceConfig) -> float:
    scale = max(1.0, float(np.abs(G).max()))
    estimates = [fd_fundamental_tensor(norm, y, f * tol.fd_step) for f in REFINEMENT_FACTORS]
    estimates.append((4.0 * estimates[2] - estimates[1]) / 3.0)
    return max(float(np.abs(E - G).max()) for E in estimates) / scale


def certify(norm: FinslerNorm, y, xi, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Check the pair ``(y, xi)`` against both inequalities.

    ``y`` is moved onto the indicatrix and ``xi`` rescaled to relative
    length 1.  The tensor is checked against finite-difference Hessians of
    ``F^2`` at three step sizes before any verdict is issued.

    Returns a :class:`Certificate` when a violation exceeds
    ``tol.certify_tol`` and a :class:`NoViolation` otherwise.
    """
    xi = check_vector(xi, norm.dimension, name="xi")
    y_hat = indicatrix_point(norm, y)
    g = fundamental_tensor(norm, y_hat, tol)
    if not g.positive_definite:
        raise ConvexityError("fundamental tensor is not positive definite", g.min_eigenvalue, y_hat)
    xi_hat = xi / math.sqrt(g.quadratic(xi))
    spread = _refinement_spread(norm, y_hat, g.matrix, tol)
    if not spread <= REFINEMENT_SPREAD:
        raise NumericalTrustError(spread)
    F_xi = norm(xi_hat)
    rel_len = math.sqrt(g.quadratic(xi_hat))
    diff = F_xi - rel_len
    if abs(diff) <= tol.certify_tol:
        return NoViolation(norm, y_hat, xi_hat, F_xi, rel_len, abs(diff), tol)
    direction = MATSUMOTO if diff > 0 else REVERSE
    return Certificate(norm, y_hat, xi_hat, F_xi, rel_len, direction, abs(diff), tol)


def homogeneity_check_certificate(c, lam: float, mu: float | None = None) -> bool:
    """Whether certifying ``(lam y, mu xi)`` reproduces the verdict of ``c``.

    Margins are scale invariant: ``F`` and ``|.|_y`` are 1-homogeneous in
    ``xi`` and ``g`` is 0-homogeneous in ``y``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    mu = lam if mu is None else mu
    try:
        again = certify(c.norm, lam * np.asarray(c.y), mu * np.asarray(c.xi), c.tolerances)
    except (ArithmeticError, ValueError, RuntimeError):
        return False
    return again.direction == c.direction and abs(again.margin - c.margin) <= 1e-8


def fd_verdict(c) -> tuple[str | None, float]:
    """Re-judge a certificate with the finite-difference tensor.

    Returns the direction (``None`` for no violation) and signed-free margin
    obtained without the jet machinery.
    """
    G = fd_fundamental_tensor(c.norm, c.y, c.tolerances.fd_step)
    rel = math.sqrt(max(float(c.xi @ G @ c.xi), 0.0))
    diff = c.norm(c.xi) - rel
    if abs(diff) <= c.tolerances.certify_tol:
        return None, abs(diff)
    return (MATSUMOTO if diff > 0 else REVERSE), abs(diff)


# ---------------------------------------------------------------------- scan


@dataclass(frozen=True)
class PointResult:
    """Extremes of ``F`` over ``E(y)`` at one grid base point."""

    index: int
    y: np.ndarray
    min_eigenvalue: float
    max_F: float
    argmax: np.ndarray
    min_F: float
    argmin: np.ndarray

    @property
    def matsumoto_margin(self) -> float:
        return self.max_F - 1.0

    @property
    def reverse_margin(self) -> float:
        return 1.0 - self.min_F


@dataclass(frozen=True, eq=False)
class ScanReport:
    """Outcome of a grid scan for one norm.

    Finding no certificate means none was found at this resolution, nothing
    more.
    """

    norm: FinslerNorm
    resolution: int
    restarts: int
    seed: int
    points: list
    certificates: list
    min_eigenvalue: float
    defects: list = field(default_factory=list)
    wall_time: float = 0.0

    def best_margin(self, direction: str) -> float:
        attr = "matsumoto_margin" if direction == MATSUMOTO else "reverse_margin"
        values = [getattr(p, attr) for p in self.points if np.isfinite(getattr(p, attr))]
        return max(values) if values else float("nan")

    def certificate(self, direction: str):
        return next((c for c in self.certificates if c.direction == direction), None)

    def summary(self) -> str:
        lines = [
            f"resolution {self.resolution}, restarts {self.restarts}, seed {self.seed}",
            f"min eigenvalue of g over grid: {self.min_eigenvalue:.6g}",
        ]
        for direction in (MATSUMOTO, REVERSE):
            c = self.certificate(direction)
            best = self.best_margin(direction)
            if c is None:
                lines.append(f"{direction}: none found at resolution {self.resolution} (best margin {best:.6g})")
            else:
                lines.append(
                    f"{direction}: violated, margin {c.margin:.6g} at y = {_vec(c.y)}, xi = {_vec(c.xi)}"
                )
        if self.defects:
            lines.append(f"defects: {len(self.defects)}")
        lines.append(f"wall time {self.wall_time:.2f} s")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "norm": self.norm.to_text(),
            "resolution": self.resolution,
            "restarts": self.restarts,
            "seed": self.seed,
            "min_eigenvalue": self.min_eigenvalue,
            "best_margins": {d: self.best_margin(d) for d in (MATSUMOTO, REVERSE)},
            "points": [
                {
                    "index": p.index,
                    "y": p.y.tolist(),
                    "min_eigenvalue": p.min_eigenvalue,
                    "max_F": p.max_F,
                    "argmax": p.argmax.tolist(),
                    "min_F": p.min_F,
                    "argmin": p.argmin.tolist(),
                }
                for p in self.points
            ],
            "certificates": [c.to_dict() for c in self.certificates],
            "defects": [{"index": i, "message": m} for i, m in self.defects],
            "wall_time": self.wall_time,
        }


def _vec(v) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in v) + ")"


def _inverse_sqrt(matrices):
    chol = np.linalg.cholesky(matrices)
    return np.linalg.inv(chol).transpose(0, 2, 1)


def ellipsoid_extremes(norm: FinslerNorm, points, keys, restarts: int, seed: int = 0, tol=DEFAULT_TOLERANCES):
    """Max and min of ``F`` over ``E(y)`` for each base point ``y`` (on the indicatrix).

    ``keys`` seed each point's multistart so a point gets the same starts in
    any batch.  Returns arrays ``max_F, argmax, min_F, argmin`` with ``nan``
    rows where no restart converged.
    """
    from .tensor import tensor_batch

    points = np.asarray(points, dtype=float)
    K, n = points.shape
    matrices, _ = tensor_batch(norm, points)
    L = np.repeat(_inverse_sqrt(matrices), restarts, axis=0)
    W0 = np.concatenate(
        [initial_directions(n, restarts, np.random.default_rng([seed, *key])) for key in keys]
    )
    out = []
    for sign in (1.0, -1.0):
        values, W, converged = sphere_ascent(norm, L, W0, sign, tol)
        values = values.reshape(K, restarts)
        converged = converged.reshape(K, restarts)
        eta = np.einsum("bij,bj->bi", L, W).reshape(K, restarts, n)
        ranked = np.where(converged, sign * values, -np.inf)
        best = ranked.argmax(axis=1)
        ok = converged.any(axis=1)
        chosen = eta[np.arange(K), best]
        # re-evaluate at the chosen points so the reported value is F(argmax) itself
        extreme = np.where(ok, norm.values(chosen), np.nan)
        chosen[~ok] = np.nan
        out.extend([extreme, chosen])
    return tuple(out)


def scan(
    norm: FinslerNorm,
    resolution: int = 360,
    restarts: int | None = None,
    *,
    seed: int = 0,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> ScanReport:
    """Look for violations of both inequalities over a grid of base points.

    Raises :class:`ConvexityAuditError` when ``g`` is not positive definite
    somewhere on the grid.
    """
    start = time.perf_counter()
    restarts = default_restarts(norm.dimension) if restarts is None else int(restarts)
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    sample = sample_indicatrix(norm, resolution, tol)
    if not sample.strongly_convex:
        raise ConvexityAuditError(sample)
    keys = grid_keys(norm.dimension, resolution)
    max_F, argmax, min_F, argmin = ellipsoid_extremes(norm, sample.points, keys, restarts, seed, tol)
    points, defects = [], []
    for k in range(resolution):
        if not (np.isfinite(max_F[k]) and np.isfinite(min_F[k])):
            defects.append((k, "optimizer did not converge at any restart"))
        points.append(
            PointResult(k, sample.points[k], float(sample.min_eigenvalues[k]),
                        float(max_F[k]), argmax[k], float(min_F[k]), argmin[k])
        )
    certificates = []
    for direction, attr, xi_attr in ((MATSUMOTO, "matsumoto_margin", "argmax"), (REVERSE, "reverse_margin", "argmin")):
        ranked = sorted(
            (p for p in points if np.isfinite(getattr(p, attr)) and getattr(p, attr) > tol.certify_tol),
            key=lambda p: (-getattr(p, attr), p.index),
        )
        for p in ranked[:5]:
            try:
                verdict = certify(norm, p.y, getattr(p, xi_attr), tol)
            except (NumericalTrustError, ConvexityError, DomainError) as exc:
                defects.append((p.index, f"{direction} candidate rejected: {exc}"))
                continue
            if verdict.direction == direction:
                certificates.append(verdict)
                break
    return ScanReport(
        norm=norm,
        resolution=resolution,
        restarts=restarts,
        seed=seed,
        points=points,
        certificates=certificates,
        min_eigenvalue=sample.min_eigenvalue,
        defects=defects,
        wall_time=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------- JSON


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return "null"
        text = format(value, ".17g")
        # keep integral reals recognisably real
        return text if any(c in text for c in ".e") else text + ".0"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every real printed to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def certificates_to_json(certificates) -> str:
    return dumps(
        {
            "certificate_version": CERTIFICATE_VERSION,
            "certificates": [c.to_dict() for c in certificates],
        }
    )


def load_certificates(text: str) -> list[Certificate]:
    """Certificates from a certificates file or a single certificate object."""
    data = json.loads(text)
    if isinstance(data, dict) and "certificates" in data:
        if data.get("certificate_version") != CERTIFICATE_VERSION:
            raise ValueError(f"unsupported certificate_version {data.get('certificate_version')!r}")
        return [Certificate.from_dict(d) for d in data["certificates"]]
    if isinstance(data, dict):
        return [Certificate.from_dict(data)]
    raise ValueError("expected a JSON object")

"""Indicatrix sampling, osculating ellipsoids and extrema of F over them."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import check_spd_matrix, check_vector
from .config import DEFAULT_TOLERANCES, ToleranceConfig
from .jets import DomainError
from .norms import FinslerNorm
from .tensor import ConvexityError, fundamental_tensor, pd_threshold, tensor_batch

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
ON_INDICATRIX_TOL = 1e-8


class NotOnIndicatrixError(ValueError):
    """A base point was expected to satisfy F(y) = 1."""


class OptimizerError(RuntimeError):
    """No restart of the sphere optimizer converged."""

    def __init__(self, message: str, best_value: float, best_point):
        super().__init__(message)
        self.best_value = best_value
        self.best_point = best_point


# ------------------------------------------------------------------ sampling


def direction_grid(dimension: int, resolution: int):
    """Unit directions and their angles for the sampling grid.

    Two dimensions use ``resolution`` uniform angles ``2 pi k / resolution``
    (grids of doubled resolution are nested); three dimensions use a
    Fibonacci sphere, with angles reported as (polar, azimuth).
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    k = np.arange(resolution)
    if dimension == 2:
        theta = 2.0 * np.pi * k / resolution
        return np.stack([np.cos(theta), np.sin(theta)], axis=1), theta[:, None]
    if dimension == 3:
        z = 1.0 - (2.0 * k + 1.0) / resolution
        r = np.sqrt(1.0 - z * z)
        phi = np.mod(k * GOLDEN_ANGLE, 2.0 * np.pi)
        dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
        return dirs, np.stack([np.arccos(z), phi], axis=1)
    raise ValueError(f"sampling grids are available for n = 2 or 3, not n = {dimension}")


def grid_keys(dimension: int, resolution: int) -> list[tuple[int, int]]:
    """Stable identifiers of grid points, shared between nested 2-d grids."""
    if dimension == 2:
        return [(f.numerator, f.denominator) for f in (Fraction(k, resolution) for k in range(resolution))]
    return [(k, resolution) for k in range(resolution)]


def indicatrix_point(norm: FinslerNorm, u) -> np.ndarray:
    """Scale ``u`` along its ray onto the indicatrix ``F = 1``."""
    u = check_vector(u, norm.dimension, name="u")
    return u / norm(u)


@dataclass(frozen=True, eq=False)
class IndicatrixSample:
    """Points of the indicatrix over a direction grid with their tensor data.

    Directions whose tensor could not be computed are listed in ``defects``
    as ``(index, message)``; their eigenvalue entries are ``nan``.
    """

    directions: np.ndarray
    angles: np.ndarray
    points: np.ndarray
    residuals: np.ndarray
    min_eigenvalues: np.ndarray
    positive_definite: np.ndarray
    defects: list = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def resolution(self) -> int:
        return self.points.shape[0]

    @property
    def failures(self) -> np.ndarray:
        """Grid indices where strong convexity fails or could not be checked."""
        return np.flatnonzero(~self.positive_definite)

    @property
    def strongly_convex(self) -> bool:
        return bool(self.positive_definite.all())

    @property
    def min_eigenvalue(self) -> float:
        return float(np.nanmin(self.min_eigenvalues)) if np.isfinite(self.min_eigenvalues).any() else float("nan")

    def csv_header(self) -> list[str]:
        angle_cols = ["angle"] if self.angles.shape[1] == 1 else ["polar", "azimuth"]
        return angle_cols + [f"p{i + 1}" for i in range(self.dimension)] + ["F_residual", "min_eigenvalue"]

    def to_csv(self, fh=None) -> str:
        """Write the sample as CSV; returns the text when ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.csv_header())
        for angle, point, res, eig in zip(self.angles, self.points, self.residuals, self.min_eigenvalues):
            writer.writerow([f"{x:.17g}" for x in (*angle, *point, res, eig)])
        return out.getvalue() if fh is None else ""


def sample_indicatrix(
    norm: FinslerNorm, resolution: int, tol: ToleranceConfig = DEFAULT_TOLERANCES
) -> IndicatrixSample:
    """Sample the indicatrix on the direction grid and audit ``g`` at each point."""
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    directions, angles = direction_grid(norm.dimension, resolution)
    points = np.full_like(directions, np.nan)
    residuals = np.full(resolution, np.nan)
    eigs = np.full(resolution, np.nan)
    pd = np.zeros(resolution, dtype=bool)
    defects = []
    try:
        points = directions / norm.values(directions)[:, None]
        residuals = norm.values(points) - 1.0
        matrices, eigs = tensor_batch(norm, points)
        pd = eigs > pd_threshold(matrices, tol)
    except DomainError:
        # fall back to one direction at a time so the bad ones can be named
        for k, u in enumerate(directions):
            try:
                p = indicatrix_point(norm, u)
                g = fundamental_tensor(norm, p, tol)
            except (DomainError, np.linalg.LinAlgError) as exc:
                defects.append((k, str(exc)))
                continue
            points[k], residuals[k] = p, norm(p) - 1.0
            eigs[k], pd[k] = g.min_eigenvalue, g.positive_definite
    return IndicatrixSample(directions, angles, points, residuals, eigs, pd, defects)


def turning_angles(sample: IndicatrixSample) -> np.ndarray:
    """Signed exterior angle at each vertex of the closed planar polygon.

    All angles positive means the polygon is strictly convex; a vertex where
    the curve is flat to high order turns by a vanishing angle.
    """
    if sample.dimension != 2:
        raise ValueError("turning angles are defined for planar samples only")
    p = sample.points
    incoming = p - np.roll(p, 1, axis=0)
    outgoing = np.roll(p, -1, axis=0) - p
    cross = incoming[:, 0] * outgoing[:, 1] - incoming[:, 1] * outgoing[:, 0]
    dot = (incoming * outgoing).sum(axis=1)
    return np.arctan2(cross, dot)


# ---------------------------------------------------------------- ellipsoids


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """The origin-centred ellipsoid ``{eta : eta.G.eta = 1}``.

    ``inverse_sqrt`` is a matrix ``L`` with ``L L^T = G^-1``, so ``L w`` lies on
    the ellipsoid for every unit vector ``w``.
    """

    G: np.ndarray
    inverse_sqrt: np.ndarray

    @classmethod
    def from_matrix(cls, G) -> Ellipsoid:
        G = check_spd_matrix(G, name="G")
        chol = np.linalg.cholesky(G)
        L = np.linalg.inv(chol).T
        G.setflags(write=False)
        L.setflags(write=False)
        return cls(G, L)

    @property
    def dimension(self) -> int:
        return self.G.shape[0]

    def quadratic(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return np.einsum("...i,ij,...j->...", eta, self.G, eta)

    def point(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        w = w / np.linalg.norm(w, axis=-1, keepdims=True)
        return w @ self.inverse_sqrt.T

    def boundary(self, samples: int = 720) -> np.ndarray:
        """Closed-curve samples of a planar ellipse."""
        if self.dimension != 2:
            raise ValueError("boundary curves are available for n = 2 only")
        theta = 2.0 * np.pi * np.arange(samples) / samples
        return self.point(np.stack([np.cos(theta), np.sin(theta)], axis=1))


def _require_on_indicatrix(norm: FinslerNorm, y) -> np.ndarray:
    y = check_vector(y, norm.dimension)
    value = norm(y)
    if abs(value - 1.0) > ON_INDICATRIX_TOL:
        raise NotOnIndicatrixError(f"F(y) = {value:.12g}, expected 1; normalize with indicatrix_point")
    return y


def osculating_ellipsoid(norm: FinslerNorm, y, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Ellipsoid:
    """The ellipsoid of ``g(y)``, which osculates the indicatrix at ``y``."""
    y = _require_on_indicatrix(norm, y)
    g = fundamental_tensor(norm, y, tol)
    if not g.positive_definite:
        raise ConvexityError("indicatrix is not strongly convex here", g.min_eigenvalue, y)
    return Ellipsoid.from_matrix(np.array(g.matrix))


def tangent_direction(norm: FinslerNorm, y, direction=None) -> np.ndarray:
    """A unit vector tangent to the indicatrix at ``y``."""
    grad = norm.jet(check_vector(y, norm.dimension), order=1).gradient
    normal = grad / np.linalg.norm(grad)
    if direction is None:
        if norm.dimension == 2:
            direction = np.array([-normal[1], normal[0]])
        else:
            direction = np.eye(norm.dimension)[np.argmin(np.abs(normal))]
    tau = np.asarray(direction, dtype=float)
    tau = tau - (tau @ normal) * normal
    length = np.linalg.norm(tau)
    if length < 1e-12:
        raise ValueError("direction is normal to the indicatrix")
    return tau / length


def osculation_order(norm: FinslerNorm, y, steps, direction=None, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Radial gap between indicatrix and osculating ellipsoid off ``y``.

    For each step ``t`` the point ``p = y + t tau`` on the tangent plane is
    projected radially onto both surfaces, and the distance between the two
    foot points is returned.  Second-order contact makes the gap ``o(t^2)``.
    Steps where either projection fails give ``nan``.
    """
    steps = np.asarray(steps, dtype=float)
    if steps.ndim != 1 or steps.size == 0 or np.any(steps <= 0) or np.any(np.diff(steps) >= 0):
        raise ValueError("steps must be positive and strictly decreasing")
    ellipsoid = osculating_ellipsoid(norm, y, tol)
    y = np.asarray(y, dtype=float)
    tau = tangent_direction(norm, y, direction)
    gaps = []
    for t in steps:
        p = y + t * tau
        length = np.linalg.norm(p)
        try:
            r_ind = length / norm(p)
        except DomainError:
            gaps.append(float("nan"))
            continue
        q = float(ellipsoid.quadratic(p))
        gaps.append(abs(r_ind - length / np.sqrt(q)) if q > 0 else float("nan"))
    return gaps


# -------------------------------------------------------------- extremizers

# Armijo sufficient-increase constant and the roundoff allowance in units of eps*|f|.
_ARMIJO = 1e-4
_ROUNDOFF = 8.0


def initial_directions(dimension: int, restarts: int, rng) -> np.ndarray:
    """Multistart points on the unit sphere: a rotated even circle grid in
    two dimensions, Gaussian directions otherwise."""
    if dimension == 2:
        theta = 2.0 * np.pi * (np.arange(restarts) + rng.random()) / restarts
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    w = rng.standard_normal((restarts, dimension))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def _objective(norm, L, W, sign):
    eta = np.einsum("bij,bj->bi", L, W)
    f, g = norm.value_and_grad(eta)
    return sign * f, sign * np.einsum("bji,bj->bi", L, g)


def _tangent(g, W):
    return g - (g * W).sum(axis=1, keepdims=True) * W


def sphere_ascent(norm: FinslerNorm, L, W, sign: float = 1.0, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Projected gradient ascent of ``sign * F(L_b w_b)`` over unit vectors.

    Rows are independent problems run in lockstep.  Steps follow the
    projected gradient, retract by normalization and are chosen by
    backtracking.  Returns ``(values, W, converged)`` with ``values`` in the
    original sign.
    """
    L = np.asarray(L, dtype=float)
    W = np.array(W, dtype=float)
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    B = W.shape[0]
    f, g = _objective(norm, L, W, sign)
    gt = _tangent(g, W)
    gn = np.linalg.norm(gt, axis=1)
    step = np.ones(B)
    done = gn <= tol.optimizer_grad_tol
    eps = np.finfo(float).eps
    for _ in range(tol.max_iters):
        rows = np.flatnonzero(~done)
        if rows.size == 0:
            break
        s = step[rows].copy()
        grow = np.ones(rows.size)
        pending = np.ones(rows.size, dtype=bool)
        stalled = np.zeros(rows.size, dtype=bool)
        while pending.any():
            local = np.flatnonzero(pending)
            idx = rows[local]
            trial = W[idx] + s[local, None] * gt[idx]
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            ft, gtrial = _objective(norm, L[idx], trial, sign)
            gt_trial = _tangent(gtrial, trial)
            gn_trial = np.linalg.norm(gt_trial, axis=1)
            predicted = s[local] * gn[idx] ** 2
            gain = ft - f[idx]
            strict = gain >= _ARMIJO * predicted
            slack = _ROUNDOFF * eps * np.abs(f[idx])
            within_roundoff = (gain >= -slack) & (gn_trial < gn[idx])
            ok = strict | within_roundoff
            # ratio of achieved to first-order predicted gain steers the next step
            ratio = np.where(strict & (gain > slack), gain / predicted, 0.5)
            grow[local[ok]] = np.where(ratio[ok] > 0.75, 2.0, np.where(ratio[ok] < 0.25, 0.5, 1.0))
            accepted = idx[ok]
            W[accepted], f[accepted] = trial[ok], ft[ok]
            gt[accepted], gn[accepted] = gt_trial[ok], gn_trial[ok]
            rejected = local[~ok]
            s[rejected] *= 0.5
            tiny = rejected[s[rejected] < 1e-14]
            stalled[tiny] = True
            pending[local[ok]] = False
            pending[tiny] = False
        step[rows] = np.clip(grow * s, 1e-12, 1e6)
        done[rows] = gn[rows] <= tol.optimizer_grad_tol
        done[rows[stalled]] = True
    converged = gn <= tol.optimizer_grad_tol
    return sign * f, W, converged


def _extremize(norm, e: Ellipsoid, restarts, sign, seed, tol):
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    if e.dimension != norm.dimension:
        raise ValueError("ellipsoid and norm dimensions differ")
    rng = np.random.default_rng(seed)
    W0 = initial_directions(norm.dimension, restarts, rng)
    L = np.broadcast_to(e.inverse_sqrt, (restarts,) + e.inverse_sqrt.shape)
    values, W, converged = sphere_ascent(norm, L, W0, sign, tol)
    order = sign * values
    if not converged.any():
        best = int(np.argmax(order))
        raise OptimizerError(
            f"no restart converged within {tol.max_iters} iterations",
            float(values[best]),
            e.point(W[best]),
        )
    best = int(np.argmax(np.where(converged, order, -np.inf)))
    eta = e.point(W[best])
    return float(norm(eta)), eta


def max_F_on_ellipsoid(
    norm: FinslerNorm, e: Ellipsoid, restarts: int = 16, *, seed=0, tol: ToleranceConfig = DEFAULT_TOLERANCES
):
    """Largest value of ``F`` on the ellipsoid and a point attaining it."""
    return _extremize(norm, e, restarts, 1.0, seed, tol)


def min_F_on_ellipsoid(
    norm: FinslerNorm, e: Ellipsoid, restarts: int = 16, *, seed=0, tol: ToleranceConfig = DEFAULT_TOLERANCES
):
    """Smallest value of ``F`` on the ellipsoid and a point attaining it."""
    return _extremize(norm, e, restarts, -1.0, seed, tol)


def default_restarts(dimension: int) -> int:
    return 16 if dimension == 2 else 64

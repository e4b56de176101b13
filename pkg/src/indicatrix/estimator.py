"""scikit-learn style wrappers around the audit and the violation scan.

The "data" passed to ``fit`` is a :class:`~indicatrix.norms.FinslerNorm`;
``transform`` maps base directions ``Y`` of shape ``(k, n)`` to per-direction
features.  Hyperparameters are plain constructor arguments, so
``get_params`` / ``set_params`` / ``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .config import ToleranceConfig
from .geometry import default_restarts, sample_indicatrix
from .norms import FinslerNorm
from .search import ellipsoid_extremes, scan
from .tensor import tensor_batch


def _check_norm(norm) -> FinslerNorm:
    if not isinstance(norm, FinslerNorm):
        raise TypeError(f"expected a FinslerNorm, got {type(norm).__name__}")
    return norm


class _ToleranceParams:
    def _tolerances(self) -> ToleranceConfig:
        return ToleranceConfig(
            pd_tolerance=self.pd_tolerance,
            certify_tol=self.certify_tol,
            fd_step=self.fd_step,
            optimizer_grad_tol=self.optimizer_grad_tol,
            max_iters=self.max_iters,
        )


class ConvexityAuditor(_ToleranceParams, TransformerMixin, BaseEstimator):
    """Audit strong convexity of a norm's indicatrix on a direction grid.

    After ``fit``: ``sample_``, ``strongly_convex_``, ``failures_``.
    ``transform(Y)`` returns the smallest eigenvalue of ``g`` at each row;
    ``fit_transform(norm)`` returns it at the grid directions.
    """

    def __init__(self, resolution=360, pd_tolerance=1e-10, certify_tol=1e-6, fd_step=1e-5,
                 optimizer_grad_tol=1e-10, max_iters=500):
        self.resolution = resolution
        self.pd_tolerance = pd_tolerance
        self.certify_tol = certify_tol
        self.fd_step = fd_step
        self.optimizer_grad_tol = optimizer_grad_tol
        self.max_iters = max_iters

    def fit(self, norm, y=None):
        self.norm_ = _check_norm(norm)
        self.sample_ = sample_indicatrix(norm, self.resolution, self._tolerances())
        self.strongly_convex_ = self.sample_.strongly_convex
        self.failures_ = self.sample_.failures
        self.n_features_in_ = norm.dimension
        return self

    def transform(self, Y):
        check_is_fitted(self, "sample_")
        Y = check_points(np.atleast_2d(Y), self.n_features_in_)
        _, eigs = tensor_batch(self.norm_, Y)
        return eigs

    def fit_transform(self, norm, y=None):
        return self.fit(norm).sample_.min_eigenvalues.copy()


class MatsumotoScanner(_ToleranceParams, TransformerMixin, BaseEstimator):
    """Scan a norm for violations of ``|xi|_y >= F(xi)`` and its reverse.

    After ``fit``: ``report_`` (a :class:`~indicatrix.search.ScanReport`) and
    ``certificates_``.  ``transform(Y)`` returns, for each base direction,
    the pair ``(max F on E(y) - 1, 1 - min F on E(y))``; ``fit_transform(norm)``
    returns those pairs at the grid directions.
    """

    def __init__(self, resolution=360, restarts=None, seed=0, pd_tolerance=1e-10, certify_tol=1e-6,
                 fd_step=1e-5, optimizer_grad_tol=1e-10, max_iters=500):
        self.resolution = resolution
        self.restarts = restarts
        self.seed = seed
        self.pd_tolerance = pd_tolerance
        self.certify_tol = certify_tol
        self.fd_step = fd_step
        self.optimizer_grad_tol = optimizer_grad_tol
        self.max_iters = max_iters

    def fit(self, norm, y=None):
        self.norm_ = _check_norm(norm)
        self.report_ = scan(norm, self.resolution, self.restarts, seed=self.seed, tol=self._tolerances())
        self.certificates_ = list(self.report_.certificates)
        self.n_features_in_ = norm.dimension
        return self

    def transform(self, Y):
        check_is_fitted(self, "report_")
        Y = check_points(np.atleast_2d(Y), self.n_features_in_)
        points = Y / self.norm_.values(Y)[:, None]
        restarts = self.restarts or default_restarts(self.n_features_in_)
        keys = [(k, len(points)) for k in range(len(points))]
        max_F, _, min_F, _ = ellipsoid_extremes(
            self.norm_, points, keys, restarts, self.seed, self._tolerances()
        )
        return np.stack([max_F - 1.0, 1.0 - min_F], axis=1)

    def fit_transform(self, norm, y=None):
        points = self.fit(norm).report_.points
        return np.array([[p.matsumoto_margin, p.reverse_margin] for p in points])

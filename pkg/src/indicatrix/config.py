"""Numeric tolerances shared by the library and the command line."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class ToleranceConfig:
    """Tolerances consumed by tensor, optimizer and certification code.

    ``pd_tolerance`` is relative: a tensor counts as positive definite when its
    smallest eigenvalue exceeds ``pd_tolerance * max|g_ij|``.
    """

    pd_tolerance: float = 1e-10
    certify_tol: float = 1e-6
    fd_step: float = 1e-5
    optimizer_grad_tol: float = 1e-10
    max_iters: int = 500

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise ValueError(f"{f.name} must be strictly positive, got {value!r}")
        if int(self.max_iters) != self.max_iters:
            raise ValueError("max_iters must be an integer")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ToleranceConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def with_overrides(self, **overrides) -> ToleranceConfig:
        if "max_iters" in overrides:
            overrides["max_iters"] = int(overrides["max_iters"])
        return replace(self, **overrides)


DEFAULT_TOLERANCES = ToleranceConfig()

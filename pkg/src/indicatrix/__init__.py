"""Indicatrix geometry of Finsler norms: fundamental tensor, osculating
ellipsoids, relative length, and certified violations of the inequality
``|xi|_y >= F(xi)``."""

from .config import DEFAULT_TOLERANCES, ToleranceConfig
from .dsl import DslError, DslSyntaxError, HomogeneityError, NormExpr, eval_expr_jet, parse, to_text
from .estimator import ConvexityAuditor, MatsumotoScanner
from .geometry import (
    Ellipsoid,
    IndicatrixSample,
    NotOnIndicatrixError,
    OptimizerError,
    indicatrix_point,
    max_F_on_ellipsoid,
    min_F_on_ellipsoid,
    osculating_ellipsoid,
    osculation_order,
    sample_indicatrix,
    turning_angles,
)
from .jets import DomainError, Jet2
from .norms import (
    ExpressionNorm,
    FinslerNorm,
    MthRootNorm,
    NormFileError,
    RandersNorm,
    RiemannianNorm,
    parse_norm_file,
    read_norm_file,
)
from .plot import PlotSpec, render_svg
from .search import (
    Certificate,
    ConvexityAuditError,
    NoViolation,
    NumericalTrustError,
    ScanReport,
    certificates_to_json,
    certify,
    fd_verdict,
    homogeneity_check_certificate,
    load_certificates,
    scan,
)
from .tensor import ConvexityError, FundamentalTensor, fd_fundamental_tensor, fundamental_tensor, relative_length

__version__ = "0.1.0"

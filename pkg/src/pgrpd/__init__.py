"""Inexact proximal gradient with dual-recovered subproblems (PG-RPD)."""

from .model import (
    ConfigurationError,
    DualPoint,
    GSpec,
    Iterate,
    L1Norm,
    OracleCounter,
    PolyhedralSupport,
    ProblemData,
    ProxUnavailableError,
    QuadraticObjective,
    RankDeficientError,
    SpectralProfile,
    compute_spectral,
    eval_f0,
    g_value,
    moreau_prox_conj,
    prox_g,
    prox_g_conj,
)
from .solver import PgRpdConfig, adaptive_hoffman_solve, solve
from .baselines import AdmmConfig, PalmConfig, admm_solve, palm_solve
from .instances import (
    HardInstanceParams,
    RandomQpParams,
    build_hard_instance,
    gen_random_qp,
    spectral_check,
)
from .kkt import kkt_p_residual, kkt_sp_residuals
from .trace import Solution, Status, Trace, TraceRecord

__version__ = "0.1.0"

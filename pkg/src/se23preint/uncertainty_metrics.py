"""
Scalar uncertainty criteria for 9x9 covariances and a monotonicity check
along propagation chains.

All determinant work happens in the log domain through a Cholesky factor,
so long chains with tiny variances neither underflow nor overflow.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .propagation import Covariance9

__all__ = [
    "CriterionKind",
    "UncertaintyCriterion",
    "DOpt",
    "AOpt",
    "EOpt",
    "Renyi",
    "log_det",
    "criterion_value",
    "MonotonicityReport",
    "verify_monotonicity",
    "REPORT_SCHEMA_VERSION",
]

REPORT_SCHEMA_VERSION = 1
DIM = 9


class CriterionKind(enum.Enum):
    DOPT = "DOpt"
    AOPT = "AOpt"
    EOPT = "EOpt"
    RENYI = "RenyiEntropy"


@dataclass(frozen=True)
class UncertaintyCriterion:
    kind: CriterionKind
    alpha: float | None = None

    def __post_init__(self):
        kind = CriterionKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is CriterionKind.RENYI:
            if self.alpha is None:
                raise ValueError("Renyi entropy needs an order alpha")
            alpha = float(self.alpha)
            if not alpha >= 0.0 or math.isinf(alpha):
                raise ValueError(f"Renyi order must be a finite non-negative number, got {self.alpha!r}")
            object.__setattr__(self, "alpha", alpha)
        elif self.alpha is not None:
            raise ValueError(f"{kind.value} takes no order parameter")


DOpt = UncertaintyCriterion(CriterionKind.DOPT)
AOpt = UncertaintyCriterion(CriterionKind.AOPT)
EOpt = UncertaintyCriterion(CriterionKind.EOPT)


def Renyi(alpha):
    """Renyi entropy criterion of order ``alpha`` (``alpha == 1`` means the Shannon limit)."""
    return UncertaintyCriterion(CriterionKind.RENYI, alpha)


def _as_matrix(Sigma):
    M = Sigma.matrix if isinstance(Sigma, Covariance9) else np.asarray(Sigma, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("covariance must be a square matrix")
    return M


def log_det(Sigma):
    """``log det Sigma`` of a symmetric PSD matrix; ``-inf`` when it is singular."""
    M = _as_matrix(Sigma)
    M = 0.5 * (M + M.T)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        # semidefinite (or numerically so): fall back to a pivot-free LU
        sign, value = np.linalg.slogdet(M)
        return float(value) if sign > 0 else -math.inf
    d = np.diag(L)
    if np.any(d <= 0.0):
        return -math.inf
    return float(2.0 * np.sum(np.log(d)))


def _renyi_scale_log(alpha):
    # log of alpha^(1/(alpha-1)); the alpha -> 1 limit is 1 (that is, e)
    if alpha == 1.0:
        return 1.0
    if alpha == 0.0:
        return math.inf
    return math.log(alpha) / (alpha - 1.0)


def criterion_value(c, Sigma):
    """Scalar value of criterion ``c`` for covariance ``Sigma``.

    ``DOpt`` is ``det(Sigma)^(1/n)`` (0 for singular input), ``AOpt`` the trace,
    ``EOpt`` the largest eigenvalue and the Renyi entropy is
    ``0.5 * log det(2 pi alpha^(1/(alpha-1)) Sigma)``, with ``-inf`` for a
    singular ``Sigma`` and ``+inf`` at ``alpha == 0``.
    """
    M = _as_matrix(Sigma)
    n = M.shape[0]
    if c.kind is CriterionKind.AOPT:
        return float(np.trace(M))
    if c.kind is CriterionKind.EOPT:
        return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])
    ld = log_det(M)
    if c.kind is CriterionKind.DOPT:
        return 0.0 if ld == -math.inf else math.exp(ld / n)
    scale = _renyi_scale_log(c.alpha)
    if scale == math.inf:
        return math.inf
    if ld == -math.inf:
        return -math.inf
    return 0.5 * (n * (math.log(2.0 * math.pi) + scale) + ld)


@dataclass
class MonotonicityReport:
    """Outcome of a pairwise ``det Sigma_{k+1} >= det Sigma_k`` scan."""

    log_dets: list
    slack: float
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    @property
    def first_violation(self):
        return self.violations[0] if self.violations else None

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "ok": self.ok,
            "slack": self.slack,
            "chain_length": len(self.log_dets),
            "log_dets": [_json_float(x) for x in self.log_dets],
            "violations": self.violations,
            "first_violation": self.first_violation,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _json_float(x):
    # JSON has no infinities; keep them readable and round-trippable as strings
    return x if math.isfinite(x) else repr(x)


def verify_monotonicity(chain, slack=1e-12):
    """Scan a covariance chain for decreases of ``log det``.

    A step ``k -> k+1`` is a violation when
    ``log det Sigma_{k+1} - log det Sigma_k < -slack``. Each violation records
    the index of the later covariance, both log-determinants and the drop.
    """
    log_dets = [log_det(S) for S in chain]
    report = MonotonicityReport(log_dets, float(slack))
    for k in range(1, len(log_dets)):
        a, b = log_dets[k - 1], log_dets[k]
        if a == -math.inf:
            continue
        diff = b - a
        if diff < -slack:
            report.violations.append(
                {"index": k, "log_det_before": _json_float(a), "log_det_after": _json_float(b), "difference": _json_float(diff)}
            )
    return report

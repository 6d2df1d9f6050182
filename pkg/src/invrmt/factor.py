"""Projection of the standardized panel on the leading eigenvector and its regression on returns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DegenerateSeriesError
from .marketdata import InvestorType

SUBSETS = ("all", "individuals", "institutions")


@dataclass
class FactorSeries:
    times: list | None
    G: np.ndarray
    subset: str
    orientation_sign: int


@dataclass
class SlopeFit:
    k: float
    stderr: float
    r2: float
    intercept: float
    n: int


def _subset_mask(types, subset):
    types = [InvestorType(t) for t in types]
    if subset == "all":
        return np.ones(len(types), bool)
    want = {"individuals": InvestorType.INDIVIDUAL, "institutions": InvestorType.INSTITUTION}[subset]
    return np.array([t == want for t in types])


def orientation(V, u1, R) -> int:
    """+1 or -1 such that the full projection is non-negatively correlated with ``R``."""
    G = np.asarray(V) @ np.asarray(u1)
    c = np.corrcoef(G, R)[0, 1] if G.std() > 0 and np.std(R) > 0 else 0.0
    return -1 if c < 0 else 1


def project_factor(V, u1, subset: str = "all", types=None, R=None, sign: int | None = None,
                   times=None) -> FactorSeries:
    """``G(t) = sum_i V_i(t) u_i(lambda_1)`` over the investors in ``subset``.

    ``V`` is the standardized ``(T, N)`` panel. The sign of ``u1`` is taken
    from ``sign`` or, with ``R`` given, chosen so the all-investor projection
    correlates non-negatively with the return.
    """
    V = np.asarray(V, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    if V.shape[1] != u1.shape[0]:
        raise AlignmentError(f"panel has {V.shape[1]} columns, eigenvector {u1.shape[0]} components")
    if subset not in SUBSETS:
        raise ValueError(f"unknown subset {subset!r}")
    mask = np.ones(len(u1), bool) if subset == "all" else _subset_mask(types, subset)
    if not mask.any():
        raise ValueError(f"subset {subset!r} is empty")
    if sign is None:
        sign = orientation(V, u1, R) if R is not None else 1
    G = sign * (V[:, mask] @ u1[mask])
    return FactorSeries(times, G, subset, sign)


def regress_factor_return(G, R) -> SlopeFit:
    """OLS of ``G`` on ``R`` with intercept. ``G`` is used as given."""
    G = np.asarray(getattr(G, "G", G), dtype=float)
    R = np.asarray(getattr(R, "normalized_return", R), dtype=float)
    if G.shape != R.shape:
        raise AlignmentError(f"factor has {G.shape[0]} points, return {R.shape[0]}")
    if not G.std() > 0:
        raise DegenerateSeriesError("factor has zero variance")
    n = len(G)
    r = R - R.mean()
    k = float(r @ (G - G.mean()) / (r @ r))
    intercept = float(G.mean() - k * R.mean())
    resid = G - intercept - k * R
    s2 = resid @ resid / (n - 2)
    se = float(np.sqrt(s2 / (r @ r)))
    ss_tot = np.sum((G - G.mean()) ** 2)
    r2 = float(1 - resid @ resid / ss_tot)
    return SlopeFit(k, se, r2, intercept, n)


@dataclass
class TypeSlopes:
    k: SlopeFit
    k_ind: SlopeFit | None
    k_ins: SlopeFit | None
    orientation_sign: int

    def row(self, stock: str) -> dict:
        def get(fit, attr):
            return getattr(fit, attr) if fit is not None else None
        return {
            "stock": stock,
            "k": self.k.k, "k_stderr": self.k.stderr,
            "k_ind": get(self.k_ind, "k"), "k_ind_stderr": get(self.k_ind, "stderr"),
            "k_ins": get(self.k_ins, "k"), "k_ins_stderr": get(self.k_ins, "stderr"),
        }


def _standardized_fit(G, R):
    if not G.std() > 0:
        return None
    return regress_factor_return((G - G.mean()) / G.std(), R)


def type_slopes(V, types, u1, R) -> TypeSlopes:
    """Slopes ``k``, ``k_ind``, ``k_ins`` of the unit-variance factor against ``R``.

    All three projections share the orientation fixed on the full panel; a
    type absent from the panel yields ``None``.
    """
    R = np.asarray(getattr(R, "normalized_return", R), dtype=float)
    sign = orientation(V, u1, R)
    fits = {}
    for subset in SUBSETS:
        mask = np.ones(len(u1), bool) if subset == "all" else _subset_mask(types, subset)
        if not mask.any():
            fits[subset] = None
            continue
        fits[subset] = _standardized_fit(project_factor(V, u1, subset, types, sign=sign).G, R)
    if fits["all"] is None:
        raise DegenerateSeriesError("factor has zero variance")
    return TypeSlopes(fits["all"], fits["individuals"], fits["institutions"], sign)

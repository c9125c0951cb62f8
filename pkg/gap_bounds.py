# gap_bounds.py - Closed-form sandwich for the Dirichlet spectral gap on the homogeneous ball
"""
The gap lambda1(m, n) of -1/2 Delta_G on the unit homogeneous ball satisfies

    lambda1^(m) <= lambda1(m, n) <= f(x*),
    f(x) = lambda1^(m) / sqrt(1 - x) + lambda1^(n) sqrt(1 - x) / (4x),

with x* the minimiser of f over (0, 1). Eigenvalues always come from dirichlet_eigen's
Bessel-zero path.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, Tuple

import numpy as np
import pandas as pd

from clifford_structures import admissible, hurwitz_radon
from dirichlet_eigen import lambda1_euclidean
from hgap_errors import DegenerateDenominator, DomainError, NotAdmissible

logger = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class GapBoundResult:
    """Theorem output only: the unknown gap lives somewhere in [lower, upper]"""
    m: int
    n: int
    lambda_m: float
    lambda_n: float
    c: float
    x_star: float
    lower: float
    upper: float

    @property
    def ratio(self) -> float:
        return self.upper / self.lower

    @property
    def corollary_holds(self) -> bool:
        return self.upper <= 2.0 * self.lower

    def to_dict(self) -> Dict:
        row = asdict(self)
        row['ratio'] = self.ratio
        return row


def _check_eigenvalues(lambda_m: float, lambda_n: float):
    if not (lambda_m > 0 and lambda_n > 0):
        raise DomainError(f"eigenvalues must be positive, got lambda_m={lambda_m}, lambda_n={lambda_n}")


def f_objective(lambda_m: float, lambda_n: float, x: float) -> float:
    if not 0.0 < x < 1.0:
        raise DomainError(f"f is defined on (0, 1), got x={x}")
    root = math.sqrt(1.0 - x)
    return lambda_m / root + lambda_n * root / (4.0 * x)


def f_objective_grid(lambda_m: float, lambda_n: float, x: np.ndarray) -> np.ndarray:
    """Vectorised f for grid searches; x must lie strictly inside (0, 1)"""
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0.0) | (x >= 1.0)):
        raise DomainError("f is defined on (0, 1)")
    root = np.sqrt(1.0 - x)
    return lambda_m / root + lambda_n * root / (4.0 * x)


def x_star(lambda_m: float, lambda_n: float, strict: bool = False) -> float:
    """
    Minimiser of f over (0, 1).

    Stationarity reduces to (4 lambda_m - lambda_n) x^2 + 3 lambda_n x - 2 lambda_n = 0.
    The positive root is evaluated in rationalised form
        x* = 4 lambda_n / (3 lambda_n + sqrt(lambda_n^2 + 32 lambda_n lambda_m)),
    which stays finite when 4 lambda_m = lambda_n; there the equation is linear with root 2/3.
    """
    _check_eigenvalues(lambda_m, lambda_n)
    if abs(4.0 * lambda_m - lambda_n) < DEGENERATE_TOL:
        if strict:
            raise DegenerateDenominator(
                f"4 lambda_m = lambda_n = {lambda_n}: closed-form denominator vanishes"
            )
        logger.warning(f"⚠️ Degenerate pair 4*lambda_m == lambda_n ({lambda_n}); using linear root 2/3")
        return 2.0 / 3.0
    return 4.0 * lambda_n / (3.0 * lambda_n + math.sqrt(lambda_n * lambda_n + 32.0 * lambda_n * lambda_m))


def upper_bound(lambda_m: float, lambda_n: float) -> float:
    return f_objective(lambda_m, lambda_n, x_star(lambda_m, lambda_n))


def x_star_window(c: float) -> Tuple[float, float]:
    """Bracket (c/4, (3 sqrt(c) - c)/(4 - c)) around x*, valid for 0 < c < 1"""
    if not 0.0 < c < 1.0:
        raise DomainError(f"x* window needs 0 < c < 1, got c={c}")
    return c / 4.0, (3.0 * math.sqrt(c) - c) / (4.0 - c)


def intermediate_bound(lambda_m: float, lambda_n: float) -> float:
    """
    lambda_m (sqrt(4-c)/sqrt(4-3 sqrt(c)) + sqrt(4-c)/2), an explicit majorant of f(x*)
    for c < 1. It tends to 2 lambda_m as c -> 0 but exceeds 2 lambda_m for moderate c
    (about 2.27 lambda_m on the Heisenberg group), so it is reported, never asserted
    against the corollary.
    """
    _check_eigenvalues(lambda_m, lambda_n)
    c = lambda_n / lambda_m
    if not c < 1.0:
        raise DomainError(f"intermediate bound needs c < 1, got c={c}")
    s = math.sqrt(4.0 - c)
    return lambda_m * (s / math.sqrt(4.0 - 3.0 * math.sqrt(c)) + s / 2.0)


def bounds_from_eigenvalues(m: int, n: int, lambda_m: float, lambda_n: float) -> GapBoundResult:
    x = x_star(lambda_m, lambda_n)
    return GapBoundResult(
        m=m,
        n=n,
        lambda_m=lambda_m,
        lambda_n=lambda_n,
        c=lambda_n / lambda_m,
        x_star=x,
        lower=lambda_m,
        upper=f_objective(lambda_m, lambda_n, x),
    )


def gap_bounds(m: int, n: int) -> GapBoundResult:
    if m < 1 or n < 1 or not admissible(m, n):
        raise NotAdmissible(f"no H-type group with m={m}, n={n}: need n < rho(m) = "
                            f"{hurwitz_radon(m) if m >= 1 else 'undefined'}")
    result = bounds_from_eigenvalues(m, n, lambda1_euclidean(m), lambda1_euclidean(n))
    if m > n and not result.corollary_holds:
        logger.warning(f"⚠️ upper {result.upper} exceeds 2*lower for H({m},{n})")
    logger.info(f"✅ H({m},{n}): lambda1 in [{result.lower:.6f}, {result.upper:.6f}], x*={result.x_star:.6f}")
    return result


def euclidean_reference(m: int) -> GapBoundResult:
    """Collapsed sandwich for Brownian motion on R^m: lambda_n -> 0 leaves lower = upper = lambda1^(m)"""
    if m < 1:
        raise DomainError(f"dimension must be a positive integer, got {m}")
    lam = lambda1_euclidean(m)
    return GapBoundResult(m=m, n=0, lambda_m=lam, lambda_n=0.0, c=0.0, x_star=0.0, lower=lam, upper=lam)


def ratio_asymptotics(m_list: Iterable[int], n: int) -> pd.DataFrame:
    """upper(m, n) / lambda1^(m) per m; tends to 1 as m grows with n fixed"""
    m_list = [int(m) for m in m_list]
    bad = [m for m in m_list if m < 1 or not admissible(m, n)]
    if bad:
        raise NotAdmissible(f"m values {bad} are not admissible with n={n}")

    rows = [gap_bounds(m, n).to_dict() for m in m_list]
    return pd.DataFrame(rows, columns=['m', 'lambda_m', 'lambda_n', 'c', 'x_star', 'lower', 'upper', 'ratio'])

# dirichlet_eigen.py - Lowest Dirichlet eigenvalue of -1/2 Laplacian on the unit ball
"""
lambda1(d) = j_{d/2-1,1}^2 / 2, with j_{nu,1} the first positive zero of J_nu.

The primary path brackets the Bessel zero; lambda1_shooting integrates the radial
equation u'' + ((d-1)/r) u' + 2 lambda u = 0 and is kept as an independent check.
"""

import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict

import numpy as np
import pandas as pd
from scipy import special
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from hgap_errors import ConvergenceFailure, DomainError

logger = logging.getLogger(__name__)

NU_MIN = -0.5
NU_MAX = 40.0
X_MAX = 100.0
CACHE_D_MAX = 64


@dataclass(frozen=True)
class EigenvalueResult:
    d: int
    nu: float
    j_first_zero: float
    lam: float

    def to_dict(self) -> Dict:
        row = asdict(self)
        row['lambda'] = row.pop('lam')
        return row


def bessel_j(nu: float, x: float) -> float:
    """J_nu(x) for nu in [-1/2, 40] and 0 < x <= 100"""
    if not NU_MIN <= nu <= NU_MAX:
        raise DomainError(f"order nu={nu} outside supported range [{NU_MIN}, {NU_MAX}]")
    if not 0 < x <= X_MAX:
        raise DomainError(f"argument x={x} outside supported range (0, {X_MAX}]")
    return float(special.jv(nu, x))


def zero_bracket(nu: float):
    """Window (lo, hi) holding j_{nu,1} and no other zero of J_nu"""
    lo = max(nu, 1e-6)
    hi = nu + 1.87 * (nu + 1.0) ** (1.0 / 3.0) + 2.0
    return lo, hi


def first_bessel_zero(nu: float, tol: float = 1e-10, max_newton: int = 5) -> float:
    """Smallest positive root of J_nu: bracketed bisection, then Newton polish"""
    if not NU_MIN <= nu <= NU_MAX:
        raise DomainError(f"order nu={nu} outside supported range [{NU_MIN}, {NU_MAX}]")

    lo, hi = zero_bracket(nu)
    try:
        root = brentq(lambda x: special.jv(nu, x), lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                      maxiter=200)
    except (ValueError, RuntimeError) as e:
        raise ConvergenceFailure(f"no sign change of J_{nu} in ({lo}, {hi}): {e}")

    for _ in range(max_newton):
        step = special.jv(nu, root) / special.jvp(nu, root)
        root -= step
        if abs(step) <= 1e-15 * root:
            break

    residual = abs(special.jv(nu, root))
    if residual > tol:
        raise ConvergenceFailure(f"J_{nu} residual {residual:.3e} above {tol:.1e} at x={root}")
    return float(root)


@lru_cache(maxsize=CACHE_D_MAX)
def eigenvalue_result(d: int) -> EigenvalueResult:
    if d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    nu = d / 2.0 - 1.0
    j = first_bessel_zero(nu)
    return EigenvalueResult(d=d, nu=nu, j_first_zero=j, lam=0.5 * j * j)


def lambda1_euclidean(d: int) -> float:
    return eigenvalue_result(int(d)).lam


def _radial_value_at_one(d: int, lam: float, r0: float = 1e-3) -> float:
    """u(1) for the regular radial solution normalised by u(0) = 1"""
    k2 = 2.0 * lam
    # series start keeps clear of the 1/r singularity
    u0 = 1.0 - k2 * r0 ** 2 / (2 * d) + k2 ** 2 * r0 ** 4 / (8 * d * (d + 2))
    du0 = -k2 * r0 / d + k2 ** 2 * r0 ** 3 / (2 * d * (d + 2))

    def rhs(r, y):
        return [y[1], -(d - 1) / r * y[1] - k2 * y[0]]

    sol = solve_ivp(rhs, (r0, 1.0), [u0, du0], method='DOP853', rtol=1e-13, atol=1e-16)
    if not sol.success:
        raise ConvergenceFailure(f"radial integration failed for d={d}, lambda={lam}: {sol.message}")
    return float(sol.y[0, -1])


def lambda1_shooting(d: int) -> float:
    """Independent oracle: bisect on u(1; lambda) = 0 for the radial Dirichlet problem"""
    if d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    nu = d / 2.0 - 1.0
    j_lo = max(nu, 1.0)
    j_hi = zero_bracket(nu)[1]
    try:
        return float(brentq(lambda lam: _radial_value_at_one(d, lam),
                            0.5 * j_lo ** 2, 0.5 * j_hi ** 2, xtol=1e-13, rtol=1e-14, maxiter=200))
    except ValueError as e:
        raise ConvergenceFailure(f"shooting bracket failed for d={d}: {e}")


def lambda1_asymptotic(d: int) -> float:
    """(2 pi)^((d+1)/d) 2^(-2/d) (d!!)^(2/d), evaluated in log space"""
    if d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    log_double_factorial = float(np.sum(np.log(np.arange(d, 0, -2, dtype=float))))
    log_value = ((d + 1) / d) * math.log(2 * math.pi) - (2.0 / d) * math.log(2.0) \
        + (2.0 / d) * log_double_factorial
    return math.exp(log_value)


def eigen_table(d_max: int) -> pd.DataFrame:
    rows = []
    for d in range(1, d_max + 1):
        row = eigenvalue_result(d).to_dict()
        row['lambda_asymptotic_formula'] = lambda1_asymptotic(d)
        rows.append(row)
    return pd.DataFrame(rows, columns=['d', 'nu', 'j_first_zero', 'lambda', 'lambda_asymptotic_formula'])


def asymptotic_report(d_max: int = 30) -> pd.DataFrame:
    """The displayed asymptotic grows linearly in d while lambda1 grows like d^2/8"""
    table = eigen_table(d_max)
    table['asymptotic_ratio'] = table['lambda_asymptotic_formula'] / table['lambda']
    table['quadratic_ratio'] = table['lambda'] / (table['d'] ** 2 / 8.0)
    worst = table['asymptotic_ratio'].iloc[-1]
    logger.warning(f"⚠️ Displayed asymptotic differs from lambda1 by a factor {worst:.3f} at d={d_max}; "
                   f"it is reported only and never used in bounds")
    return table

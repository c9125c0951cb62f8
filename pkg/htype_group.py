# htype_group.py - Group law, norm and sub-Laplacian of an H-type group
"""
Group operations in global exponential coordinates x = (x_bar, x_hat) on R^m x R^n.

Sign convention: U is stored so that the group law reads
    (x * y)_hat_i = x_hat_i + y_hat_i + 1/2 <U(i) x_bar, y_bar>.
Right-translating along (t e_j, 0) then gives the left-invariant fields
    X_j = d/dx_bar_j + 1/2 sum_s (U(s) x_bar)_j d/dx_hat_s,
which for the Heisenberg group (U = [[0, -1], [1, 0]]) are X = d_x - (y/2) d_z and
Y = d_y + (x/2) d_z. Summing X_j^2 gives
    Delta_G = Delta_x_bar + sum_i <U(i) x_bar, grad_x_bar> d_x_hat_i + 1/4 |x_bar|^2 Delta_x_hat.
"""

import json
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from clifford_structures import HTypeStructure
from hgap_errors import DimensionMismatch, IndexOutOfRange, MissingDerivative, NonpositiveScale

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A point (x_bar, x_hat) of the group"""
    horizontal: np.ndarray
    central: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.horizontal, dtype=float).reshape(-1)
        c = np.asarray(self.central, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
            raise ValueError("group element coordinates must be finite")
        object.__setattr__(self, 'horizontal', h)
        object.__setattr__(self, 'central', c)

    @property
    def m(self) -> int:
        return self.horizontal.size

    @property
    def n(self) -> int:
        return self.central.size

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.horizontal, self.central])

    def to_json(self) -> str:
        return json.dumps(self.as_array().tolist())

    @classmethod
    def from_array(cls, S: HTypeStructure, flat) -> 'GroupElement':
        flat = np.asarray(flat, dtype=float).reshape(-1)
        if flat.size != S.m + S.n:
            raise DimensionMismatch(f"expected {S.m + S.n} coordinates, got {flat.size}")
        return cls(flat[:S.m], flat[S.m:])

    @classmethod
    def from_json(cls, S: HTypeStructure, text: str) -> 'GroupElement':
        return cls.from_array(S, json.loads(text))

    def allclose(self, other: 'GroupElement', atol: float = 1e-12) -> bool:
        return (np.allclose(self.horizontal, other.horizontal, rtol=0, atol=atol)
                and np.allclose(self.central, other.central, rtol=0, atol=atol))


@dataclass
class TestFunction:
    """Value plus derivative oracles of a function on the group"""
    __test__ = False  # not a pytest collection target

    value: Callable[[GroupElement], float]
    gradient_h: Optional[Callable[[GroupElement], np.ndarray]] = None
    gradient_z: Optional[Callable[[GroupElement], np.ndarray]] = None
    hessian_h: Optional[Callable[[GroupElement], np.ndarray]] = None
    hessian_z: Optional[Callable[[GroupElement], np.ndarray]] = None
    mixed: Optional[Callable[[GroupElement], np.ndarray]] = None

    def require(self, name: str) -> Callable:
        oracle = getattr(self, name)
        if oracle is None:
            raise MissingDerivative(f"test function has no '{name}' oracle")
        return oracle


def identity(S: HTypeStructure) -> GroupElement:
    return GroupElement(np.zeros(S.m), np.zeros(S.n))


def _check(S: HTypeStructure, *points: GroupElement):
    for x in points:
        if x.m != S.m or x.n != S.n:
            raise DimensionMismatch(
                f"element with dims ({x.m}, {x.n}) does not belong to {S.label()}"
            )


def _central_pairing(S: HTypeStructure, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(<U(i) a, b>)_i"""
    return np.einsum('ijk,k,j->i', S.U, a, b) if S.n else np.zeros(0)


def multiply(S: HTypeStructure, x: GroupElement, y: GroupElement) -> GroupElement:
    _check(S, x, y)
    central = x.central + y.central + 0.5 * _central_pairing(S, x.horizontal, y.horizontal)
    return GroupElement(x.horizontal + y.horizontal, central)


def inverse(S: HTypeStructure, x: GroupElement) -> GroupElement:
    _check(S, x)
    return GroupElement(-x.horizontal, -x.central)


def dilate(x: GroupElement, a: float) -> GroupElement:
    if not a > 0:
        raise NonpositiveScale(f"dilation factor must be positive, got {a}")
    return GroupElement(a * x.horizontal, a * a * x.central)


def homogeneous_norm(x: GroupElement) -> float:
    """(|x_bar|^4 + |x_hat|^2)^(1/4)"""
    h2 = float(np.dot(x.horizontal, x.horizontal))
    c2 = float(np.dot(x.central, x.central))
    return (h2 * h2 + c2) ** 0.25


def homogeneous_norm_batch(B: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Row-wise homogeneous norm for stacked horizontal (.., m) and central (.., n) parts"""
    h2 = np.sum(B * B, axis=-1)
    c2 = np.sum(A * A, axis=-1) if A.shape[-1] else 0.0
    return np.sqrt(np.sqrt(h2 * h2 + c2))


def maurer_cartan(S: HTypeStructure, k: GroupElement, v) -> np.ndarray:
    """Pull a tangent vector v at k back to the Lie algebra: (v_bar, v_hat_i - 1/2 <U(i) k_bar, v_bar>)"""
    _check(S, k)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != S.m + S.n:
        raise DimensionMismatch(f"tangent vector needs {S.m + S.n} entries, got {v.size}")
    v_bar, v_hat = v[:S.m], v[S.m:]
    return np.concatenate([v_bar, v_hat - 0.5 * _central_pairing(S, k.horizontal, v_bar)])


def vector_field(S: HTypeStructure, j: int, x: GroupElement) -> np.ndarray:
    """Coefficients of X_j at x, j counted from 1"""
    _check(S, x)
    if not 1 <= j <= S.m:
        raise IndexOutOfRange(f"field index j={j} outside 1..{S.m}")
    coeffs = np.zeros(S.m + S.n)
    coeffs[j - 1] = 1.0
    if S.n:
        coeffs[S.m:] = 0.5 * (S.U @ x.horizontal)[:, j - 1]
    return coeffs


def pushforward_left(S: HTypeStructure, g: GroupElement, x: GroupElement, v) -> np.ndarray:
    """Differential of y -> g * y at x applied to v"""
    _check(S, g, x)
    v = np.asarray(v, dtype=float).reshape(-1)
    v_bar, v_hat = v[:S.m], v[S.m:]
    return np.concatenate([v_bar, v_hat + 0.5 * _central_pairing(S, g.horizontal, v_bar)])


def apply_sublaplacian(S: HTypeStructure, f: TestFunction, x: GroupElement) -> float:
    """Delta_G f(x) from the derivative oracles"""
    _check(S, x)
    value = float(np.trace(np.asarray(f.require('hessian_h')(x), dtype=float)))
    if S.n:
        mixed = np.asarray(f.require('mixed')(x), dtype=float).reshape(S.m, S.n)
        hessian_z = np.asarray(f.require('hessian_z')(x), dtype=float).reshape(S.n, S.n)
        drift = S.U @ x.horizontal  # row i is U(i) x_bar
        value += float(np.sum(drift.T * mixed))
        value += 0.25 * float(np.dot(x.horizontal, x.horizontal)) * float(np.trace(hessian_z))
    return value


def _second_difference_sum(S: HTypeStructure, f: Callable, x: GroupElement, h: float) -> float:
    f0 = f(x)
    total = 0.0
    for j in range(S.m):
        step = np.zeros(S.m)
        step[j] = h
        forward = multiply(S, x, GroupElement(step, np.zeros(S.n)))
        backward = multiply(S, x, GroupElement(-step, np.zeros(S.n)))
        total += (f(forward) - 2.0 * f0 + f(backward)) / (h * h)
    return total


def sublaplacian_fd_check(S: HTypeStructure, f: Callable[[GroupElement], float], x: GroupElement,
                          h: float = DEFAULT_FD_STEP, richardson: bool = False) -> float:
    """Sum of centered second differences of t -> f(x * (t e_j, 0))"""
    if not h > 0:
        raise NonpositiveScale(f"finite-difference step must be positive, got {h}")
    _check(S, x)
    coarse = _second_difference_sum(S, f, x, h)
    if not richardson:
        return coarse
    fine = _second_difference_sum(S, f, x, h / 2)
    return (4.0 * fine - coarse) / 3.0


def polynomial_battery(S: HTypeStructure) -> List[TestFunction]:
    """Quadratic test functions with exact derivative oracles"""
    m, n = S.m, S.n

    def zeros_mixed(_x):
        return np.zeros((m, n))

    battery = [
        TestFunction(
            value=lambda x: float(np.dot(x.horizontal, x.horizontal)),
            hessian_h=lambda _x: 2.0 * np.eye(m),
            hessian_z=lambda _x: np.zeros((n, n)),
            mixed=zeros_mixed,
        )
    ]
    for i in range(n):
        e_i = np.eye(n)[i]
        battery.append(TestFunction(
            value=lambda x, i=i: float(x.central[i]),
            hessian_h=lambda _x: np.zeros((m, m)),
            hessian_z=lambda _x: np.zeros((n, n)),
            mixed=zeros_mixed,
        ))
        battery.append(TestFunction(
            value=lambda x, i=i: float(x.central[i] ** 2),
            hessian_h=lambda _x: np.zeros((m, m)),
            hessian_z=lambda _x, e=e_i: 2.0 * np.outer(e, e),
            mixed=zeros_mixed,
        ))
        # x_bar_1 * x_hat_i exercises the drift term and pins its sign
        battery.append(TestFunction(
            value=lambda x, i=i: float(x.horizontal[0] * x.central[i]),
            hessian_h=lambda _x: np.zeros((m, m)),
            hessian_z=lambda _x: np.zeros((n, n)),
            mixed=lambda _x, i=i: np.outer(np.eye(m)[0], np.eye(n)[i]),
        ))
    return battery

# clifford_structures.py - Generator matrices for H-type groups
"""
Builds and checks the matrix families U^(1..n) that define an H-type group on R^m x R^n.

Each U^(i) is an m x m signed permutation matrix that is skew-symmetric and orthogonal,
and distinct members anticommute. A family with n members exists on R^m exactly when
n < rho(m), rho being the Hurwitz-Radon function.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from hgap_errors import DimensionMismatch, DomainError, InvalidStructure, NotAdmissible

logger = logging.getLogger(__name__)

STRUCTURE_FORMAT_VERSION = 1

_I = np.array([[1, 0], [0, 1]], dtype=np.int64)
_J = np.array([[0, -1], [1, 0]], dtype=np.int64)
_D = np.array([[1, 0], [0, -1]], dtype=np.int64)
_S = np.array([[0, 1], [1, 0]], dtype=np.int64)
_BLOCKS = {'I': _I, 'J': _J, 'D': _D, 'S': _S}

# Kronecker words over {I, J, D, S}. Every word holds an odd number of J factors
# (skew-symmetric) and any two words differ in an odd number of non-identity slots
# (anticommuting), since J, D and S pairwise anticommute.
_BASE_WORDS = {
    2: ('J',),
    4: ('JI', 'DJ', 'SJ'),
    8: ('JII', 'DJI', 'DDJ', 'DSJ', 'SIJ', 'SJD', 'SJS'),
    16: ('JIII', 'DJII', 'DDJI', 'DDDJ', 'DDSJ', 'DSIJ', 'DSJD', 'DSJS'),
}


@dataclass(frozen=True, eq=False)
class HTypeStructure:
    """Dimensions (m, n) and the n generator matrices of an H-type group"""
    m: int
    n: int
    U: np.ndarray = field(repr=False)

    def __post_init__(self):
        U = np.asarray(self.U)
        if U.size == 0:
            U = np.zeros((0, self.m, self.m), dtype=np.int64)
        if U.ndim != 3 or U.shape != (self.n, self.m, self.m):
            raise DimensionMismatch(
                f"expected {self.n} matrices of shape {self.m}x{self.m}, got array of shape {U.shape}"
            )
        U = U.copy()
        U.setflags(write=False)
        object.__setattr__(self, 'U', U)

    @classmethod
    def euclidean(cls, m: int) -> 'HTypeStructure':
        """Degenerate n = 0 structure: plain Brownian motion on R^m, norm |x| = |x_bar|"""
        return cls(m=m, n=0, U=np.zeros((0, m, m), dtype=np.int64))

    @property
    def is_euclidean(self) -> bool:
        return self.n == 0

    @property
    def is_integral(self) -> bool:
        return np.issubdtype(self.U.dtype, np.integer)

    def label(self) -> str:
        return f"H({self.m},{self.n})"


@dataclass
class VerificationReport:
    skew: bool
    orthogonal: bool
    anticommute: bool
    admissible: bool
    pointwise_orthogonal: bool
    samples_checked: int
    tolerance: float
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all([self.skew, self.orthogonal, self.anticommute,
                    self.admissible, self.pointwise_orthogonal])

    def to_dict(self) -> Dict:
        return {
            'skew': self.skew,
            'orthogonal': self.orthogonal,
            'anticommute': self.anticommute,
            'admissible': self.admissible,
            'pointwise_orthogonal': self.pointwise_orthogonal,
            'samples_checked': self.samples_checked,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'failures': list(self.failures),
        }


def hurwitz_radon(m: int) -> int:
    """rho(m) = 2^q + 8p where m = odd * 2^(4p+q), 0 <= q <= 3"""
    if m < 1:
        raise DomainError(f"hurwitz_radon needs a positive integer, got {m}")
    v = (m & -m).bit_length() - 1
    p, q = divmod(v, 4)
    return 2 ** q + 8 * p


def max_center_dimension(m: int) -> int:
    return hurwitz_radon(m) - 1


def min_rep_dimension(n: int) -> int:
    """Least m with n < rho(m); always a power of two since rho only sees the 2-adic part"""
    if n < 1:
        raise DomainError(f"min_rep_dimension needs a positive integer, got {n}")
    m = 1
    while hurwitz_radon(m) <= n:
        m *= 2
    return m


def admissible(m: int, n: int) -> bool:
    return n < hurwitz_radon(m)


def _word_matrix(word: str) -> np.ndarray:
    return reduce(np.kron, [_BLOCKS[c] for c in word])


def _base_family(n: int) -> List[np.ndarray]:
    """n generators on R^d with d = min_rep_dimension(n)"""
    if n <= 8:
        words = _BASE_WORDS[min_rep_dimension(n)]
        return [_word_matrix(w) for w in words[:n]]

    # Periodicity: eight generators L_i on R^16 and their product gamma, which is
    # symmetric, squares to the identity and anticommutes with every L_i.
    octet = _base_family(8)
    gamma = reduce(np.matmul, octet)
    tail = _base_family(n - 8)
    d_tail = tail[0].shape[0]
    head = [np.kron(L, np.eye(d_tail, dtype=np.int64)) for L in octet]
    return head + [np.kron(gamma, E) for E in tail]


def build_generators(m: int, n: int) -> HTypeStructure:
    """Canonical generator family for the H-type group with horizontal dim m and center dim n"""
    if m < 1 or n < 1:
        raise NotAdmissible(f"dimensions must be positive, got m={m}, n={n}")
    if not admissible(m, n):
        raise NotAdmissible(f"no H-type group with m={m}, n={n}: need n < rho(m) = {hurwitz_radon(m)}")

    d = min_rep_dimension(n)
    if m % d:
        raise DimensionMismatch(f"m={m} is not a multiple of the minimal module dimension {d} for n={n}")

    copies = np.eye(m // d, dtype=np.int64)
    U = np.stack([np.kron(copies, E) for E in _base_family(n)]).astype(np.int64)
    logger.info(f"✅ Built {n} generators on R^{m} ({m // d} block(s) of size {d})")
    return HTypeStructure(m=m, n=n, U=U)


def verify_structure(S: HTypeStructure, samples: int = 64, seed: int = 0,
                     tolerance: float = 1e-12) -> VerificationReport:
    """Check every H-type axiom; failures are returned in the report, never raised"""
    U = np.asarray(S.U)
    m, n = S.m, S.n
    integral = np.issubdtype(U.dtype, np.integer)
    tol = 0.0 if integral else tolerance
    failures = []

    def is_zero(a: np.ndarray) -> bool:
        return bool(np.all(a == 0)) if integral else bool(np.all(np.abs(a) <= tol))

    eye = np.eye(m, dtype=U.dtype)
    skew = all(is_zero(U[i] + U[i].T) for i in range(n))
    if not skew:
        failures.append("a generator is not skew-symmetric")

    orthogonal = all(is_zero(U[i] @ U[i].T - eye) for i in range(n))
    if not orthogonal:
        failures.append("a generator is not orthogonal")

    anticommute = True
    for i in range(n):
        for j in range(i + 1, n):
            if not is_zero(U[i] @ U[j] + U[j] @ U[i]):
                anticommute = False
                failures.append(f"U({i + 1}) and U({j + 1}) do not anticommute")

    is_admissible = n < hurwitz_radon(m)
    if not is_admissible:
        failures.append(f"n={n} violates n < rho({m}) = {hurwitz_radon(m)}")

    rng = np.random.default_rng(seed)
    X = rng.integers(-10, 11, size=(samples, m))
    if not integral:
        X = X.astype(float)
    images = np.einsum('iab,kb->ika', U, X)
    pointwise = True
    for i in range(n):
        for j in range(i + 1, n):
            if not is_zero(np.sum(images[i] * images[j], axis=1)):
                pointwise = False
    if not pointwise:
        failures.append("<U(i)x, U(j)x> != 0 for some sampled x")

    report = VerificationReport(
        skew=skew,
        orthogonal=orthogonal,
        anticommute=anticommute,
        admissible=is_admissible,
        pointwise_orthogonal=pointwise,
        samples_checked=samples,
        tolerance=tol,
        failures=failures,
    )
    if report.passed:
        logger.info(f"✅ Structure {S.label()} verified")
    else:
        logger.warning(f"❌ Structure {S.label()} failed: {'; '.join(failures)}")
    return report


def structure_to_json(S: HTypeStructure) -> Dict:
    return {
        'format_version': STRUCTURE_FORMAT_VERSION,
        'm': int(S.m),
        'n': int(S.n),
        'U': np.asarray(S.U).tolist(),
    }


def structure_from_json(doc: Dict, verify: bool = True) -> HTypeStructure:
    """Parse a structure document; entries must be exact integers and, unless verify is off, pass verification"""
    try:
        m, n, raw = int(doc['m']), int(doc['n']), doc['U']
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidStructure(f"malformed structure document: {e}")

    if not isinstance(raw, list):
        raise InvalidStructure("U must be a list of matrices")
    flat = np.asarray(raw, dtype=object).ravel() if raw else []
    if any(isinstance(v, bool) or not isinstance(v, int) for v in flat):
        raise InvalidStructure("structure entries must be exact integers")

    try:
        S = HTypeStructure(m=m, n=n, U=np.asarray(raw, dtype=np.int64).reshape(n, m, m))
    except ValueError as e:
        raise InvalidStructure(f"matrix shapes do not match (m={m}, n={n}): {e}")

    if not verify:
        return S
    report = verify_structure(S)
    if not report.passed:
        raise InvalidStructure(f"structure failed verification: {'; '.join(report.failures)}")
    return S


def save_structure(S: HTypeStructure, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(structure_to_json(S)))
    return path


def load_structure(path: Union[str, Path], verify: bool = True) -> HTypeStructure:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidStructure(f"cannot read structure file {path}: {e}")
    return structure_from_json(doc, verify=verify)


def heisenberg() -> HTypeStructure:
    return build_generators(2, 1)


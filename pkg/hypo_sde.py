# hypo_sde.py - Hypoelliptic Brownian motion on an H-type group
"""
Simulates g_t = (B_t, A_t) with B a standard Brownian motion on R^m and

    A_i(t) = 1/2 int_0^t <U(i) B_s, dB_s>,    tau(t) = 1/4 int_0^t |B_s|^2 ds.

Every path owns a counter-based random stream keyed by (master seed, stream, path index),
so an ensemble is reproducible bit for bit regardless of how its blocks are scheduled.
"""

import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from clifford_structures import HTypeStructure, verify_structure
from hgap_errors import (DomainError, IndexOutOfRange, InsufficientSamples, InvalidStructure,
                         NonpositiveScale, StepBudgetExceeded)
from htype_group import homogeneous_norm_batch

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 10_000_000
BLOCK_SIZE = 1024
CHUNK_STEPS = 256
SCHEMES = ('ito', 'stratonovich')

PATH_FILE_MAGIC = b'HGAP'
PATH_FILE_VERSION = 1
PATH_FILE_HEADER = struct.Struct('<4sIIIId')

MIN_LEMMA_SAMPLES = 1000


def path_rng(seed: int, path_index: int, stream: int = 0) -> np.random.Generator:
    """Independent stream for one path: Philox keyed by (seed, stream, path_index)"""
    key = (int(stream), int(path_index))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def step_count(T: float, dt: float, max_steps: int = DEFAULT_MAX_STEPS) -> int:
    if not dt > 0:
        raise NonpositiveScale(f"step size must be positive, got dt={dt}")
    if not T > 0:
        raise NonpositiveScale(f"horizon must be positive, got T={T}")
    if dt > T:
        raise DomainError(f"step size dt={dt} exceeds horizon T={T}")
    steps = int(math.ceil(T / dt - 1e-9))
    if steps > max_steps:
        raise StepBudgetExceeded(f"T/dt = {steps} steps exceeds the budget of {max_steps}")
    return steps


def _require_valid(S: HTypeStructure):
    report = verify_structure(S)
    if not report.passed:
        raise InvalidStructure(f"{S.label()} is not an H-type structure: {'; '.join(report.failures)}")


@dataclass
class PathSample:
    """One stored trajectory on the grid t_k = k dt, k = 0..steps"""
    dt: float
    steps: int
    seed: int
    path_index: int
    B: np.ndarray
    A: np.ndarray
    tau: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def norms(self) -> np.ndarray:
        return homogeneous_norm_batch(self.B, self.A)

    def terminal(self) -> Dict:
        return {'A': self.A[-1].copy(), 'tau': float(self.tau[-1]), 'B': self.B[-1].copy()}


@dataclass
class TerminalBatch:
    """Streaming output of a block of paths: terminal values and running summaries only"""
    path_ids: np.ndarray
    A: np.ndarray
    tau: np.ndarray
    B: np.ndarray
    max_norm: np.ndarray
    max_horizontal: np.ndarray
    exit_time: np.ndarray
    covariation: np.ndarray
    dt: float
    steps: int
    seed: int

    @property
    def count(self) -> int:
        return int(self.path_ids.size)

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @classmethod
    def concat(cls, batches: Sequence['TerminalBatch']) -> 'TerminalBatch':
        first = batches[0]
        return cls(
            path_ids=np.concatenate([b.path_ids for b in batches]),
            A=np.concatenate([b.A for b in batches]),
            tau=np.concatenate([b.tau for b in batches]),
            B=np.concatenate([b.B for b in batches]),
            max_norm=np.concatenate([b.max_norm for b in batches]),
            max_horizontal=np.concatenate([b.max_horizontal for b in batches]),
            exit_time=np.concatenate([b.exit_time for b in batches]),
            covariation=np.concatenate([b.covariation for b in batches]),
            dt=first.dt,
            steps=first.steps,
            seed=first.seed,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({'path_id': self.path_ids})
        for i in range(self.A.shape[1]):
            frame[f'A_{i + 1}'] = self.A[:, i]
        frame['tau_T'] = self.tau
        frame['max_norm'] = self.max_norm
        return frame


def _simulate_block(S: HTypeStructure, steps: int, dt: float, seed: int, start: int, count: int,
                    scheme: str = 'ito', exit_radius: Optional[float] = None,
                    stop_on_exit: bool = False, stream: int = 0, record: bool = False):
    """
    Advance `count` paths with indices start..start+count-1 through `steps` Euler steps.

    Increments are drawn chunk by chunk from each path's own stream. With stop_on_exit,
    a path leaves the active set after the chunk in which it first reaches exit_radius;
    its terminal fields then hold the state at the end of that chunk.
    """
    m, n = S.m, S.n
    U = S.U.astype(float)
    rngs = [path_rng(seed, start + p, stream) for p in range(count)]
    sqrt_dt = math.sqrt(dt)

    B = np.zeros((count, m))
    A = np.zeros((count, n))
    tau = np.zeros(count)
    cov = np.zeros((count, n, n))
    max_norm = np.zeros(count)
    max_h = np.zeros(count)
    exit_step = np.full(count, -1, dtype=np.int64)
    active = np.arange(count)
    trace_B, trace_A, trace_tau = [np.zeros((1, m))], [np.zeros((1, n))], [np.zeros(1)]

    done = 0
    while done < steps and active.size:
        k = min(CHUNK_STEPS, steps - done)
        dB = np.stack([rngs[p].standard_normal((k, m)) for p in active]) * sqrt_dt

        B0 = B[active]
        B_right = B0[:, None, :] + np.cumsum(dB, axis=1)
        B_left = np.concatenate([B0[:, None, :], B_right[:, :-1, :]], axis=1)
        sq_left = np.sum(B_left * B_left, axis=-1)
        if scheme == 'ito':
            B_eval = B_left
            tau_inc = 0.25 * sq_left * dt
        else:
            B_eval = 0.5 * (B_left + B_right)
            tau_inc = 0.125 * (sq_left + np.sum(B_right * B_right, axis=-1)) * dt

        if n:
            dA = 0.5 * np.einsum('iab,pkb,pka->pki', U, B_eval, dB)
        else:
            dA = np.zeros((active.size, k, 0))
        A_right = A[active][:, None, :] + np.cumsum(dA, axis=1)
        tau_right = tau[active][:, None] + np.cumsum(tau_inc, axis=1)

        norms = homogeneous_norm_batch(B_right, A_right)
        h_norms = np.sqrt(np.sum(B_right * B_right, axis=-1))
        max_norm[active] = np.maximum(max_norm[active], norms.max(axis=1))
        max_h[active] = np.maximum(max_h[active], h_norms.max(axis=1))
        cov[active] += np.einsum('pki,pkj->pij', dA, dA)

        if exit_radius is not None:
            crossed = norms >= exit_radius
            first = crossed.argmax(axis=1)
            fresh = crossed.any(axis=1) & (exit_step[active] < 0)
            exit_step[active[fresh]] = done + first[fresh] + 1

        B[active] = B_right[:, -1]
        A[active] = A_right[:, -1]
        tau[active] = tau_right[:, -1]
        if record:
            trace_B.append(B_right[0])
            trace_A.append(A_right[0])
            trace_tau.append(tau_right[0])

        done += k
        if stop_on_exit:
            active = active[exit_step[active] < 0]

    exit_time = np.where(exit_step > 0, exit_step * dt, np.inf)
    batch = TerminalBatch(
        path_ids=np.arange(start, start + count, dtype=np.int64),
        A=A, tau=tau, B=B,
        max_norm=max_norm, max_horizontal=max_h, exit_time=exit_time,
        covariation=cov, dt=dt, steps=steps, seed=seed,
    )
    if record:
        return batch, (np.concatenate(trace_B), np.concatenate(trace_A), np.concatenate(trace_tau))
    return batch


def _check_scheme(scheme: str):
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme '{scheme}', expected one of {SCHEMES}")


def simulate_path(S: HTypeStructure, T: float, dt: float, seed: int, path_index: int = 0,
                  scheme: str = 'ito', max_steps: int = DEFAULT_MAX_STEPS) -> PathSample:
    """Full-storage simulation of a single path"""
    _check_scheme(scheme)
    steps = step_count(T, dt, max_steps)
    _require_valid(S)
    _, (B, A, tau) = _simulate_block(S, steps, dt, seed, path_index, 1, scheme=scheme, record=True)
    return PathSample(dt=dt, steps=steps, seed=seed, path_index=path_index, B=B, A=A, tau=tau)


def simulate_terminal(S: HTypeStructure, T: float, dt: float, seed: int, start: int = 0, count: int = 1,
                      scheme: str = 'ito', exit_radius: Optional[float] = None,
                      stop_on_exit: bool = False, stream: int = 0,
                      max_steps: int = DEFAULT_MAX_STEPS) -> TerminalBatch:
    """Terminal-only simulation of paths start..start+count-1 in fixed blocks"""
    return run_ensemble(S, T, dt, seed, count, workers=1, start=start, scheme=scheme, exit_radius=exit_radius,
                        stop_on_exit=stop_on_exit, stream=stream, max_steps=max_steps)


def _block_job(args):
    return _simulate_block(*args)


def run_ensemble(S: HTypeStructure, T: float, dt: float, seed: int, count: int, workers: int = 1,
                 start: int = 0, scheme: str = 'ito', exit_radius: Optional[float] = None,
                 stop_on_exit: bool = False, stream: int = 0, max_steps: int = DEFAULT_MAX_STEPS,
                 block_size: int = BLOCK_SIZE) -> TerminalBatch:
    """
    Simulate `count` paths split into fixed blocks of path indices.

    Blocks depend only on (start, count, block_size), never on `workers`, and are joined in
    index order, so the result is identical for any worker count.
    """
    if count < 1:
        raise DomainError(f"path count must be positive, got {count}")
    _check_scheme(scheme)
    steps = step_count(T, dt, max_steps)
    _require_valid(S)

    jobs = []
    for block_start in range(start, start + count, block_size):
        size = min(block_size, start + count - block_start)
        jobs.append((S, steps, dt, seed, block_start, size, scheme, exit_radius, stop_on_exit, stream))

    logger.info(f"🎲 Simulating {count} paths on {S.label()} ({steps} steps of {dt}) "
                f"in {len(jobs)} block(s), {workers} worker(s)")
    if workers <= 1 or len(jobs) == 1:
        batches = [_block_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_block_job, jobs))
    return TerminalBatch.concat(batches)


def empirical_quadratic_covariation(p: PathSample, i: int, j: int) -> float:
    """Sum over steps of dA_i dA_j, indices counted from 1"""
    n = p.A.shape[1]
    for idx in (i, j):
        if not 1 <= idx <= n:
            raise IndexOutOfRange(f"central index {idx} outside 1..{n}")
    dA = np.diff(p.A, axis=0)
    return float(np.sum(dA[:, i - 1] * dA[:, j - 1]))


@dataclass
class TimeChangeSamples:
    """Terminal samples (A(T), tau(T)) of independent paths, in path-index order"""
    A: np.ndarray
    tau: np.ndarray
    covariation: np.ndarray
    m: int
    T: float
    dt: float
    seed: int

    @property
    def count(self) -> int:
        return int(self.tau.size)

    def pairs(self) -> List:
        return [(self.A[k].copy(), float(self.tau[k])) for k in range(self.count)]


def time_change_samples(S: HTypeStructure, T: float, dt: float, seed: int, count: int,
                        workers: int = 1) -> TimeChangeSamples:
    batch = run_ensemble(S, T, dt, seed, count, workers=workers)
    return TimeChangeSamples(A=batch.A, tau=batch.tau, covariation=batch.covariation,
                             m=S.m, T=batch.horizon, dt=dt, seed=seed)


def ks_critical_value(alpha: float, count: int) -> float:
    """Asymptotic one-sample KS critical value sqrt(-ln(alpha/2)/2) / sqrt(N)"""
    if not 0 < alpha < 1:
        raise DomainError(f"significance level must lie in (0, 1), got {alpha}")
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(count)


@dataclass
class LemmaDiagnostics:
    sample_count: int
    ks_statistics: np.ndarray
    ks_critical: float
    independence_corr: np.ndarray
    cross_covariations: np.ndarray
    mean_A_squared: np.ndarray
    mean_A_squared_se: np.ndarray
    expected_A_squared: float
    alpha: float
    verdicts: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> Dict:
        return {
            'sample_count': self.sample_count,
            'ks_statistics': self.ks_statistics.tolist(),
            'ks_critical': self.ks_critical,
            'independence_corr': self.independence_corr.tolist(),
            'cross_covariations': self.cross_covariations.tolist(),
            'mean_A_squared': self.mean_A_squared.tolist(),
            'mean_A_squared_se': self.mean_A_squared_se.tolist(),
            'expected_A_squared': self.expected_A_squared,
            'alpha': self.alpha,
            'verdicts': dict(self.verdicts),
            'passed': self.passed,
        }


def lemma_diagnostics(samples: TimeChangeSamples, alpha: float = 0.01,
                      covariation_tol: float = 0.05) -> LemmaDiagnostics:
    """
    Fixed-time consequences of the time change A = W(tau): A_i(T)/sqrt(tau(T)) is standard
    normal and uncorrelated with tau(T), and distinct A_i have vanishing covariation.
    """
    N = samples.count
    if N < MIN_LEMMA_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_LEMMA_SAMPLES} samples, got {N}")

    A, tau = samples.A, samples.tau
    n = A.shape[1]
    Z = A / np.sqrt(tau)[:, None]
    ks = np.array([stats.kstest(Z[:, i], 'norm').statistic for i in range(n)])
    corr = np.array([np.corrcoef(A[:, i] ** 2 / tau, tau)[0, 1] for i in range(n)])

    diag = np.einsum('pii->pi', samples.covariation)
    cross = np.ones((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                cross[i, j] = float(np.median(np.abs(samples.covariation[:, i, j]) / diag[:, i]))

    mean_sq = np.mean(A ** 2, axis=0)
    mean_sq_se = np.std(A ** 2, axis=0, ddof=1) / math.sqrt(N)
    expected = samples.m * samples.T ** 2 / 8.0
    critical = ks_critical_value(alpha, N)

    off_diagonal = cross[~np.eye(n, dtype=bool)]
    verdicts = {
        'normality': bool(np.all(ks < critical)),
        'independence': bool(np.all(np.abs(corr) < 3.0 / math.sqrt(N))),
        'covariation': bool(np.all(off_diagonal < covariation_tol)) if off_diagonal.size else True,
        'second_moment': bool(np.all(np.abs(mean_sq - expected) <= 3.0 * mean_sq_se)),
    }
    diagnostics = LemmaDiagnostics(
        sample_count=N,
        ks_statistics=ks,
        ks_critical=critical,
        independence_corr=corr,
        cross_covariations=cross,
        mean_A_squared=mean_sq,
        mean_A_squared_se=mean_sq_se,
        expected_A_squared=expected,
        alpha=alpha,
        verdicts=verdicts,
    )
    status = "✅" if diagnostics.passed else "❌"
    logger.info(f"{status} Time-change diagnostics on {N} samples: {verdicts}")
    return diagnostics


def write_terminal_csv(batch: TerminalBatch, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    batch.to_frame().to_csv(path, index=False, float_format='%.17g')
    return path


def write_full_paths(paths: Sequence[PathSample], path: Union[str, Path]) -> Path:
    """Little-endian binary: header <4sIIIId> then B, A, tau as float64 per path"""
    if not paths:
        raise DomainError("no paths to write")
    first = paths[0]
    m, n = first.B.shape[1], first.A.shape[1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as fh:
        fh.write(PATH_FILE_HEADER.pack(PATH_FILE_MAGIC, PATH_FILE_VERSION, m, n, first.steps, first.dt))
        for p in paths:
            if p.steps != first.steps or p.dt != first.dt:
                raise DomainError("all paths in one file must share steps and dt")
            for arr in (p.B, p.A, p.tau):
                fh.write(np.ascontiguousarray(arr, dtype='<f8').tobytes())
    return path


@dataclass
class FullPathFile:
    m: int
    n: int
    steps: int
    dt: float
    B: np.ndarray
    A: np.ndarray
    tau: np.ndarray


def read_full_paths(path: Union[str, Path]) -> FullPathFile:
    raw = Path(path).read_bytes()
    if len(raw) < PATH_FILE_HEADER.size:
        raise InvalidStructure(f"{path} is too short for a path file header")
    magic, version, m, n, steps, dt = PATH_FILE_HEADER.unpack_from(raw)
    if magic != PATH_FILE_MAGIC or version != PATH_FILE_VERSION:
        raise InvalidStructure(f"{path} is not a version {PATH_FILE_VERSION} path file")

    per_path = (steps + 1) * (m + n + 1)
    body = np.frombuffer(raw, dtype='<f8', offset=PATH_FILE_HEADER.size)
    if body.size % per_path:
        raise InvalidStructure(f"{path} holds a truncated path record")
    records = body.reshape(-1, per_path)
    rows = steps + 1
    B = records[:, :rows * m].reshape(-1, rows, m)
    A = records[:, rows * m:rows * (m + n)].reshape(-1, rows, n)
    tau = records[:, rows * (m + n):]
    return FullPathFile(m=m, n=n, steps=steps, dt=dt, B=B.copy(), A=A.copy(), tau=tau.copy())

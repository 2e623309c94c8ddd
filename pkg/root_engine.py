import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Literal, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from poly_core import LambdaPolynomial, OperatorSymbol, frequency_batch, lambda_slice, slice_coefficients

logger = logging.getLogger(__name__)

TRIM_LEVEL = 1e-14
RESIDUAL_TOL = 1e-9
MAX_ITERATIONS = 500
NEWTON_POLISH_STEPS = 3
_EPS = np.finfo(np.float64).eps

KIND_FINITE = 'finite'
KIND_NO_ROOTS = 'no_roots'
KIND_ALL_LAMBDA = 'all_lambda'


class ZeroPolynomialError(ValueError):
    """roots() was called on the zero polynomial (every λ is a root)."""


class RootConvergenceError(RuntimeError):
    """Aberth iteration hit its cap with residual above tolerance."""

    def __init__(self, message: str, best: np.ndarray, residual: float):
        self.best = best
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    residual_bound: float
    deflated_degree: int


@dataclass(frozen=True)
class AbscissaValue:
    """max Re λ over the slice roots, or one of the markers no_roots (−∞) / all_lambda (+∞)."""

    kind: Literal['finite', 'no_roots', 'all_lambda']
    value: float

    @classmethod
    def finite(cls, value: float) -> "AbscissaValue":
        return cls(KIND_FINITE, float(value))

    @classmethod
    def no_roots(cls) -> "AbscissaValue":
        return cls(KIND_NO_ROOTS, -math.inf)

    @classmethod
    def all_lambda(cls) -> "AbscissaValue":
        return cls(KIND_ALL_LAMBDA, math.inf)


@dataclass(frozen=True)
class BatchRoots:
    """
    Roots of many slices. `roots` is (B, m) padded with NaN; `kinds` holds the
    AbscissaValue kind per row.
    """

    xis: np.ndarray
    roots: np.ndarray
    kinds: np.ndarray
    residuals: np.ndarray

    @property
    def abscissa(self) -> np.ndarray:
        out = np.full(len(self.kinds), -np.inf)
        finite = self.kinds == KIND_FINITE
        if np.any(finite):
            out[finite] = np.nanmax(self.roots[finite].real, axis=1)
        out[self.kinds == KIND_ALL_LAMBDA] = np.inf
        return out


def _trimmed_degree(coeffs: np.ndarray) -> int:
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        return -1
    significant = np.flatnonzero(np.abs(coeffs) > TRIM_LEVEL * scale)
    return int(significant[-1])


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """coeffs (B, d+1) ascending, z (B, k) -> p(z) (B, k)."""
    acc = np.zeros_like(z)
    for k in range(coeffs.shape[1] - 1, -1, -1):
        acc = acc * z + coeffs[:, k:k + 1]
    return acc


def _magnitude(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    radius = np.maximum(1.0, np.abs(z))
    acc = np.zeros(z.shape, dtype=np.float64)
    for k in range(coeffs.shape[1] - 1, -1, -1):
        acc = acc * radius + np.abs(coeffs[:, k:k + 1])
    return acc


def _initial_guesses(monic: np.ndarray) -> np.ndarray:
    degree = monic.shape[1] - 1
    powers = degree - np.arange(degree)
    with np.errstate(divide='ignore'):
        radius = np.max(np.abs(monic[:, :degree]) ** (1.0 / powers), axis=1)
    radius = np.where(radius > 0, radius, 1.0)
    k = np.arange(degree)
    angles = 2.0 * np.pi * k / degree + 0.4
    wobble = 1.0 + 0.05 * np.cos(3.0 * k + 1.0)
    return radius[:, None] * wobble[None, :] * np.exp(1j * angles)[None, :]


def _aberth(coeffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Simultaneous Aberth-Ehrlich iteration on a batch of same-degree polynomials.

    Args:
        coeffs: (B, d+1) ascending coefficients with nonzero leading and constant terms

    Returns:
        (roots of shape (B, d), relative residual per polynomial)
    """
    degree = coeffs.shape[1] - 1
    if degree == 1:
        roots = (-coeffs[:, 0] / coeffs[:, 1])[:, None]
        return roots, _relative_residual(coeffs, roots)

    monic = coeffs / coeffs[:, -1:]
    deriv = monic[:, 1:] * np.arange(1, degree + 1)
    z = _initial_guesses(monic)
    done = np.zeros(z.shape, dtype=bool)
    eye = np.eye(degree, dtype=bool)

    for iteration in range(MAX_ITERATIONS):
        rows = np.flatnonzero(~done.all(axis=1))
        if rows.size == 0:
            break
        zr = z[rows]
        p = _horner(monic[rows], zr)
        dp = _horner(deriv[rows], zr)
        noise = 4.0 * _EPS * _magnitude(monic[rows], zr)
        with np.errstate(divide='ignore', invalid='ignore'):
            newton = p / dp
            diff = zr[:, :, None] - zr[:, None, :]
            diff[:, eye] = np.inf
            repulsion = np.sum(1.0 / diff, axis=2)
            step = newton / (1.0 - newton * repulsion)
        step = np.where(np.isfinite(step), step, p)
        frozen = done[rows] | (np.abs(p) <= noise)
        step = np.where(frozen, 0.0, step)
        zr = zr - step
        small = np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(zr))
        z[rows] = zr
        done[rows] = frozen | small
    else:
        logger.debug(f"Aberth iteration reached the cap of {MAX_ITERATIONS} steps")

    z = _polish(monic, deriv, z)
    return z, _relative_residual(coeffs, z)


def _polish(monic: np.ndarray, deriv: np.ndarray, z: np.ndarray) -> np.ndarray:
    for _ in range(NEWTON_POLISH_STEPS):
        p = _horner(monic, z)
        dp = _horner(deriv, z)
        with np.errstate(divide='ignore', invalid='ignore'):
            candidate = z - p / dp
        better = np.isfinite(candidate) & (np.abs(_horner(monic, candidate)) < np.abs(p))
        z = np.where(better, candidate, z)
    return z


def _relative_residual(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    ratio = np.abs(_horner(coeffs, z)) / _magnitude(coeffs, z)
    return np.max(ratio, axis=1)


def _solve_rows(coeffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Roots of arbitrary slices (B, m+1); returns padded roots, kinds and residuals."""
    batch, width = coeffs.shape
    m = width - 1
    roots = np.full((batch, max(m, 1)), np.nan + 0j, dtype=np.complex128)
    kinds = np.empty(batch, dtype=object)
    residuals = np.zeros(batch)

    degrees = np.array([_trimmed_degree(row) for row in coeffs], dtype=np.int64)
    low_zeros = np.array([int(np.argmax(row != 0)) if d >= 0 else 0 for row, d in zip(coeffs, degrees)])

    kinds[degrees < 0] = KIND_ALL_LAMBDA
    kinds[degrees == 0] = KIND_NO_ROOTS
    kinds[degrees > 0] = KIND_FINITE

    for d, z0 in sorted(set(zip(degrees.tolist(), low_zeros.tolist()))):
        if d <= 0:
            continue
        rows = np.flatnonzero((degrees == d) & (low_zeros == z0))
        roots[rows, :z0] = 0.0
        if d > z0:
            found, residual = _aberth(coeffs[rows, z0:d + 1])
            roots[rows, z0:d] = found
            residuals[rows] = residual
    return roots, kinds, residuals


def roots(p: LambdaPolynomial, tolerance: float = RESIDUAL_TOL) -> RootSet:
    """
    All roots of a λ-slice by Aberth-Ehrlich iteration with Newton polishing.

    Args:
        p: slice polynomial (must not be the zero polynomial)
        tolerance: accepted relative residual |p(r)| / Σ|c_k|max(1,|r|)^k

    Returns:
        RootSet with deflated_degree roots and the achieved residual bound
    """
    if p.is_zero:
        raise ZeroPolynomialError("the zero polynomial has every λ as a root")
    found, kinds, residuals = _solve_rows(p.coeffs.reshape(1, -1))
    degree = _trimmed_degree(p.coeffs)
    result = found[0, :degree] if degree > 0 else np.zeros(0, dtype=np.complex128)
    residual = float(residuals[0])
    if residual > tolerance:
        logger.error(f"Root finding failed for slice at xi={p.frozen_xi}: residual {residual:.3e}")
        raise RootConvergenceError("Aberth iteration did not converge", result, residual)
    return RootSet(result, residual, max(degree, 0))


def spectral_abscissa(P: OperatorSymbol, xi: Sequence[float]) -> AbscissaValue:
    """a(ξ) = max Re λ over the roots of P(λ, iξ)."""
    p = lambda_slice(P, xi)
    if p.is_zero:
        return AbscissaValue.all_lambda()
    if _trimmed_degree(p.coeffs) == 0:
        return AbscissaValue.no_roots()
    return AbscissaValue.finite(float(np.max(roots(p).roots.real)))


def map_batches(func: Callable[[np.ndarray], object], items: np.ndarray, threads: int = 1,
                chunk: int = 4096) -> List[object]:
    """Apply func to consecutive chunks of items, in parallel, preserving index order."""
    chunks = [items[i:i + chunk] for i in range(0, len(items), chunk)] or [items[:0]]
    if threads <= 1 or len(chunks) == 1:
        return [func(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, chunks))


def slice_roots_batch(P: OperatorSymbol, xis: np.ndarray, threads: int = 1,
                      tolerance: float = RESIDUAL_TOL) -> BatchRoots:
    """
    Roots of every slice P(λ, iξ_b) for a batch of frequencies.

    Args:
        P: operator symbol
        xis: (B, n) real frequencies
        threads: worker threads for the chunked map (reduction stays in index order)
        tolerance: residual tolerance; a failing row raises RootConvergenceError

    Returns:
        BatchRoots aligned with xis
    """
    xis = frequency_batch(xis, P.dim_n)

    def work(chunk: np.ndarray):
        return _solve_rows(slice_coefficients(P, chunk))

    parts = map_batches(work, xis, threads)
    found = np.concatenate([p[0] for p in parts], axis=0)
    kinds = np.concatenate([p[1] for p in parts], axis=0)
    residuals = np.concatenate([p[2] for p in parts], axis=0)
    bad = np.flatnonzero(residuals > tolerance)
    if bad.size:
        worst = int(bad[np.argmax(residuals[bad])])
        logger.error(f"Root finding failed at xi={xis[worst].tolist()}: residual {residuals[worst]:.3e}")
        raise RootConvergenceError(f"Aberth iteration did not converge at xi={xis[worst].tolist()}",
                                   found[worst], float(residuals[worst]))
    return BatchRoots(xis, found, kinds, residuals)


def spectral_abscissa_batch(P: OperatorSymbol, xis: np.ndarray, threads: int = 1) -> np.ndarray:
    """a(ξ) for many ξ; −inf marks no_roots and +inf marks all_lambda."""
    return slice_roots_batch(P, xis, threads).abscissa


def match_roots(a: Sequence[complex], b: Sequence[complex], tie_tolerance: float = 1e-12) -> Tuple[np.ndarray, float]:
    """
    Pair roots a[i] with b[perm[i]].

    Greedy nearest-neighbour matching; when two candidates are equally close
    the whole set is re-matched with the Hungarian assignment.

    Returns:
        (perm, largest matched distance)
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"cannot match {a.size} roots against {b.size}")
    if a.size == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    cost = np.abs(a[:, None] - b[None, :])
    perm = np.empty(a.size, dtype=np.int64)
    free = np.ones(b.size, dtype=bool)
    tie = False
    for i in range(a.size):
        candidates = np.where(free, cost[i], np.inf)
        order = np.argsort(candidates)
        if free.sum() > 1 and candidates[order[1]] - candidates[order[0]] <= tie_tolerance * (1.0 + candidates[order[0]]):
            tie = True
            break
        perm[i] = order[0]
        free[order[0]] = False
    if tie:
        _, perm = linear_sum_assignment(cost)
    return perm, float(cost[np.arange(a.size), perm].max())

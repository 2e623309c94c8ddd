import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.stats import qmc

from asymptotics import EvidenceRecord, PetrovskiiVerdict
from poly_core import OperatorSymbol, frequency_batch
from root_engine import KIND_ALL_LAMBDA, KIND_FINITE, slice_roots_batch

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_RADII = tuple(2.0 ** j for j in range(11))
MIN_FIT_SAMPLES = 6
PLATEAU_TOLERANCE = 1e-4
POWER_EXPONENT_MIN = 0.05
POWER_RMS_SHARE = 0.10


class InsufficientSamplesError(ValueError):
    """fit_growth needs at least six defined σ(r) samples."""


class SamplerBudget(BaseModel):
    """Sampling budget, counted in slice-root evaluations."""

    model_config = ConfigDict(frozen=True)

    evaluations: int = 20000
    seed: int = 0
    refine_starts: int = 8
    refine_iterations: int = 40
    refine_cycles: int = 4
    threads: int = 1

    @field_validator('evaluations')
    @classmethod
    def enough_evaluations(cls, value: int) -> int:
        if value < 100:
            raise ValueError("budget must allow at least 100 evaluations")
        return value

    @field_validator('refine_starts', 'refine_iterations', 'refine_cycles', 'threads')
    @classmethod
    def positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @property
    def seeding_share(self) -> int:
        return max(1, int(0.75 * self.evaluations))

    def config_hash(self) -> str:
        # threads never changes results, so it stays out of the hash
        payload = self.model_dump_json(exclude={'threads'})
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


@dataclass(frozen=True)
class SigmaSample:
    r: float
    sigma: Optional[float]
    witness_lambda: Optional[complex] = None
    witness_xi: Optional[Tuple[float, ...]] = None
    low_confidence: bool = False


@dataclass(frozen=True)
class SigmaCurve:
    samples: Tuple[SigmaSample, ...]
    config_hash: str
    dim_n: int

    def defined(self) -> Tuple[np.ndarray, np.ndarray]:
        pts = [(s.r, s.sigma) for s in self.samples if s.sigma is not None and math.isfinite(s.sigma)]
        if not pts:
            return np.zeros(0), np.zeros(0)
        r, sigma = zip(*pts)
        return np.array(r), np.array(sigma)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for s in self.samples:
            row = {
                'r': s.r,
                'sigma': s.sigma,
                'lambda_re': None if s.witness_lambda is None else s.witness_lambda.real,
                'lambda_im': None if s.witness_lambda is None else s.witness_lambda.imag,
            }
            for k in range(self.dim_n):
                row[f'xi_{k}'] = None if s.witness_xi is None else s.witness_xi[k]
            rows.append(row)
        columns = ['r', 'sigma', 'lambda_re', 'lambda_im'] + [f'xi_{k}' for k in range(self.dim_n)]
        return pd.DataFrame(rows, columns=columns)

    def to_csv(self, path_or_buf=None) -> Optional[str]:
        """CSV with header r,sigma,lambda_re,lambda_im,xi_0,…; undefined samples leave fields empty."""
        return self.to_frame().to_csv(path_or_buf, index=False, na_rep='', float_format='%.17g')

    def to_dict(self) -> dict:
        return {
            'config_hash': self.config_hash,
            'samples': [
                {
                    'r': s.r,
                    'sigma': s.sigma,
                    'witness_lambda': None if s.witness_lambda is None else [s.witness_lambda.real,
                                                                            s.witness_lambda.imag],
                    'witness_xi': None if s.witness_xi is None else list(s.witness_xi),
                    'low_confidence': s.low_confidence,
                }
                for s in self.samples
            ],
        }


@dataclass(frozen=True)
class LogRegion:
    """{(λ, ξ) : Re λ > a + b·log(1+|λ|+|ξ|)}"""

    a: float
    b: float

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("log-region slope b must be nonnegative")

    def threshold(self, lam, xi_norm):
        return self.a + self.b * np.log1p(np.abs(lam) + xi_norm)


@dataclass(frozen=True)
class LogRegionViolation:
    lam: complex
    xi: Tuple[float, ...]
    margin: float

    def to_dict(self) -> dict:
        return {'lambda': [self.lam.real, self.lam.imag], 'xi': list(self.xi), 'margin': self.margin}


@dataclass(frozen=True)
class GrowthFit:
    model: str
    parameters: Dict[str, float]
    rms: float
    data_range: float
    candidates: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def exponent(self) -> Optional[float]:
        return self.candidates.get('power', {}).get('alpha')

    def to_dict(self) -> dict:
        return {'model': self.model, 'parameters': self.parameters, 'rms': self.rms,
                'data_range': self.data_range, 'candidates': self.candidates}


# ---------------------------------------------------------------------------
# sampling helpers


def _halton(dim: int, count: int, seed: int) -> np.ndarray:
    if dim == 0:
        return np.zeros((count, 0))
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(count)


def _ball_maximum(P: OperatorSymbol, xis: np.ndarray, r: float, threads: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Max Re λ over the roots of each slice that satisfy |λ|²+|ξ|² ≤ r²/2.

    Returns (values with −inf where nothing is admissible, maximising λ).
    """
    xis = frequency_batch(xis, P.dim_n)
    batch = slice_roots_batch(P, xis, threads)
    room = 0.5 * r * r - np.sum(xis * xis, axis=1)
    lam = batch.roots
    with np.errstate(invalid='ignore'):
        ok = (batch.kinds == KIND_FINITE)[:, None] & (np.abs(lam) ** 2 <= room[:, None]) & ~np.isnan(lam)
    masked = np.where(ok, lam.real, -np.inf)
    idx = np.argmax(masked, axis=1)
    values = masked[np.arange(len(xis)), idx]
    best = lam[np.arange(len(xis)), idx]

    # a zero slice admits every λ in the disc |λ|² ≤ room
    every = (batch.kinds == KIND_ALL_LAMBDA) & (room >= 0)
    values = np.where(every, np.sqrt(np.maximum(room, 0.0)), values)
    best = np.where(every, np.sqrt(np.maximum(room, 0.0)) + 0j, best)
    return values, best


def _golden_max(f: Callable[[float], float], lo: float, hi: float, iterations: int) -> Tuple[float, float, int]:
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iterations):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
            if fd > best_f:
                best_x, best_f = d, fd
    return best_x, best_f, iterations + 2


def _coordinate_search(f: Callable[[np.ndarray], float], start: np.ndarray, value: float,
                       bounds: Callable[[np.ndarray, int], Tuple[float, float]], step: float,
                       budget: SamplerBudget, allowance: int) -> Tuple[np.ndarray, float, int, bool]:
    """
    Coordinate-wise golden-section ascent from `start`.

    Returns (best point, best value, evaluations used, converged).
    """
    x = np.array(start, dtype=np.float64)
    used = 0
    for cycle in range(budget.refine_cycles):
        improved = 0.0
        for k in range(len(x)):
            if used >= allowance:
                return x, value, used, False
            lo, hi = bounds(x, k)
            lo, hi = max(lo, x[k] - step), min(hi, x[k] + step)
            if hi <= lo:
                continue

            def along(t: float, k=k) -> float:
                y = x.copy()
                y[k] = t
                return f(y)

            t, ft, spent = _golden_max(along, lo, hi, budget.refine_iterations)
            used += spent
            if ft > value:
                improved = max(improved, ft - value)
                x[k], value = t, ft
        step *= 0.5
        if improved <= 1e-13 * (1.0 + abs(value)):
            return x, value, used, True
    return x, value, used, False


# ---------------------------------------------------------------------------
# σ(r)


def sigma_of_r(P: OperatorSymbol, r: float, budget: Optional[SamplerBudget] = None,
               seeds: Sequence[Sequence[float]] = ()) -> SigmaSample:
    """
    σ(r): the largest Re λ over symbol roots with |λ|²+|ξ|² ≤ r²/2.

    Args:
        P: operator symbol
        r: ball radius (> 0)
        budget: sampling budget; seeding uses three quarters of it
        seeds: extra ξ to evaluate first (witnesses of smaller balls)

    Returns:
        SigmaSample; sigma is None when no admissible root was found
    """
    if r <= 0:
        raise ValueError("r must be positive")
    budget = budget or SamplerBudget()
    n = P.dim_n
    radius = r / math.sqrt(2.0)

    if n == 0:
        values, lams = _ball_maximum(P, np.zeros((1, 0)), r, budget.threads)
        if not np.isfinite(values[0]):
            return SigmaSample(r, None)
        return SigmaSample(r, float(values[0]), complex(lams[0]), ())

    unit = 2.0 * _halton(n, budget.seeding_share, budget.seed) - 1.0
    candidates = radius * unit
    candidates = candidates[np.sum(candidates ** 2, axis=1) <= radius ** 2]
    seeds = [np.asarray(s, dtype=np.float64) for s in seeds if np.sum(np.square(s)) <= radius ** 2]
    xis = np.vstack([np.zeros((1, n))] + [s.reshape(1, n) for s in seeds] + [candidates])
    values, lams = _ball_maximum(P, xis, r, budget.threads)

    order = np.argsort(-values, kind='stable')
    best = int(order[0])
    best_value, best_xi, best_lam = float(values[best]), xis[best].copy(), complex(lams[best])

    def objective(xi: np.ndarray) -> float:
        return float(_ball_maximum(P, xi.reshape(1, n), r, 1)[0][0])

    def chord(xi: np.ndarray, k: int) -> Tuple[float, float]:
        rest = radius ** 2 - (np.sum(xi ** 2) - xi[k] ** 2)
        half = math.sqrt(max(rest, 0.0))
        return -half, half

    allowance = budget.evaluations - len(xis)
    step = 2.0 * radius / max(len(candidates), 1) ** (1.0 / n)
    converged = True
    for idx in order[:budget.refine_starts]:
        if not np.isfinite(values[idx]) or allowance <= 0:
            if allowance <= 0:
                converged = False
            continue
        x, v, used, ok = _coordinate_search(objective, xis[idx], float(values[idx]), chord, step, budget, allowance)
        allowance -= used
        converged = converged and ok
        if v > best_value:
            best_value, best_xi = v, x
            best_lam = complex(_ball_maximum(P, x.reshape(1, n), r, 1)[1][0])

    if not math.isfinite(best_value):
        return SigmaSample(r, None)
    if not converged:
        logger.warning(f"sigma({r:g}) refinement ran out of budget; sample flagged low-confidence")
    return SigmaSample(r, best_value, best_lam, tuple(float(v) for v in best_xi), not converged)


def sigma_curve(P: OperatorSymbol, radii: Sequence[float] = DEFAULT_RADII,
                budget: Optional[SamplerBudget] = None) -> SigmaCurve:
    """σ(r) over increasing radii; witnesses of each ball seed the next, so the curve is monotone."""
    budget = budget or SamplerBudget()
    radii = list(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    samples: List[SigmaSample] = []
    seeds: List[Tuple[float, ...]] = []
    previous: Optional[SigmaSample] = None
    for r in radii:
        sample = sigma_of_r(P, r, budget, seeds)
        if previous is not None and previous.sigma is not None and (sample.sigma is None or sample.sigma < previous.sigma):
            sample = SigmaSample(r, previous.sigma, previous.witness_lambda, previous.witness_xi,
                                 previous.low_confidence)
        if sample.witness_xi is not None and sample.witness_xi not in seeds:
            seeds.append(sample.witness_xi)
        samples.append(sample)
        if sample.sigma is not None:
            previous = sample
        logger.debug(f"sigma({r:g}) = {sample.sigma}")
    return SigmaCurve(tuple(samples), budget.config_hash(), P.dim_n)


# ---------------------------------------------------------------------------
# growth models


def fit_growth(curve: SigmaCurve) -> GrowthFit:
    """
    Least-squares fits of σ(r) to a constant, a + b·log(1+r) and c·r^α.

    α comes from a log-log regression over the upper half of the r-range.
    The model with the smallest RMS wins; ties go to the simpler model.
    """
    r, sigma = curve.defined()
    if len(r) < MIN_FIT_SAMPLES:
        raise InsufficientSamplesError(f"need at least {MIN_FIT_SAMPLES} defined samples, got {len(r)}")
    data_range = float(sigma.max() - sigma.min())
    candidates: Dict[str, Dict[str, float]] = {}

    c = float(np.mean(sigma))
    candidates['constant'] = {'c': c, 'rms': float(np.sqrt(np.mean((sigma - c) ** 2)))}

    design = np.column_stack([np.ones_like(r), np.log1p(r)])
    (a, b), *_ = np.linalg.lstsq(design, sigma, rcond=None)
    candidates['logarithmic'] = {'a': float(a), 'b': float(b),
                                 'rms': float(np.sqrt(np.mean((sigma - design @ [a, b]) ** 2)))}

    log_r = np.log(r)
    upper = log_r >= 0.5 * (log_r.min() + log_r.max())
    if np.count_nonzero(upper) >= 2 and np.all(sigma[upper] > 0):
        alpha, intercept = np.polyfit(log_r[upper], np.log(sigma[upper]), 1)
        scale = math.exp(intercept)
        if alpha > 0:
            rms = float(np.sqrt(np.mean((sigma - scale * r ** alpha) ** 2)))
            candidates['power'] = {'c': scale, 'alpha': float(alpha), 'rms': rms}

    tie = 1e-12 + 1e-9 * data_range
    model = 'constant'
    for name in ('logarithmic', 'power'):
        if name in candidates and candidates[name]['rms'] < candidates[model]['rms'] - tie:
            model = name
    params = {k: v for k, v in candidates[model].items() if k != 'rms'}
    return GrowthFit(model, params, candidates[model]['rms'], data_range, candidates)


def plateau_variation(curve: SigmaCurve) -> Optional[float]:
    """max − min of σ over the top octave of defined radii."""
    r, sigma = curve.defined()
    if len(r) == 0:
        return None
    top = r >= 0.5 * r.max()
    return float(sigma[top].max() - sigma[top].min())


def classify_growth(curve: SigmaCurve, fit: GrowthFit) -> str:
    variation = plateau_variation(curve)
    if variation is not None and variation < PLATEAU_TOLERANCE:
        return 'bounded'
    power = fit.candidates.get('power')
    if power and power['alpha'] > POWER_EXPONENT_MIN and power['rms'] < POWER_RMS_SHARE * fit.data_range:
        return 'unbounded'
    return 'undetermined'


# ---------------------------------------------------------------------------
# compactified sampling of a(ξ)


def _compactified_points(n: int, budget: SamplerBudget) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0))
    u = (_halton(n, budget.seeding_share, budget.seed) - 0.5) * math.pi
    return np.vstack([np.zeros((1, n)), u])


def _abscissa_sup(P: OperatorSymbol, budget: SamplerBudget) -> Tuple[float, np.ndarray, Optional[np.ndarray]]:
    """
    Sup of a(ξ) over compactified samples ξ = tan(u), with local refinement.

    Returns (sup, argmax ξ, zero-slice ξ or None).
    """
    n = P.dim_n
    u = _compactified_points(n, budget)
    xis = np.tan(u)
    batch = slice_roots_batch(P, xis, budget.threads)
    zero = np.flatnonzero(batch.kinds == KIND_ALL_LAMBDA)
    if zero.size:
        return math.inf, xis[zero[0]], xis[zero[0]]
    values = batch.abscissa
    order = np.argsort(-values, kind='stable')
    best = int(order[0])
    best_value, best_u = float(values[best]), u[best].copy()
    if n == 0 or not math.isfinite(best_value):
        return best_value, np.tan(best_u), None

    def objective(point: np.ndarray) -> float:
        found = slice_roots_batch(P, np.tan(point).reshape(1, n), 1)
        if found.kinds[0] == KIND_ALL_LAMBDA:
            return math.inf
        return float(found.abscissa[0])

    half = 0.5 * math.pi * (1.0 - 1e-12)
    step = math.pi / max(len(u), 1) ** (1.0 / n)
    allowance = budget.evaluations - len(u)
    for idx in order[:budget.refine_starts]:
        if allowance <= 0 or not np.isfinite(values[idx]):
            break
        x, v, used, _ = _coordinate_search(objective, u[idx], float(values[idx]),
                                           lambda p, k: (-half, half), step, budget, allowance)
        allowance -= used
        if v > best_value:
            best_value, best_u = v, x
    return best_value, np.tan(best_u), None


def estimate_omega0(P: OperatorSymbol, budget: Optional[SamplerBudget] = None,
                    radii: Sequence[float] = DEFAULT_RADII) -> PetrovskiiVerdict:
    """
    Numeric Petrovskiĭ verdict for any n.

    Args:
        P: operator symbol
        budget: sampling budget
        radii: geometric r-grid for the σ(r) curve

    Returns:
        (verdict with method 'numeric', σ(r) curve, growth fit); the curve and
        fit are None when a zero slice decides the verdict immediately
    """
    budget = budget or SamplerBudget()
    logger.info(f"Numeric Petrovskii analysis of {P} (budget {budget.evaluations}, seed {budget.seed})")
    evidence: List[EvidenceRecord] = []

    sup, argmax, zero_xi = _abscissa_sup(P, budget)
    if zero_xi is not None:
        evidence.append(EvidenceRecord('zero_slice', "slice vanishes identically; every lambda is a root",
                                       {'xi': [float(v) for v in zero_xi]}))
        logger.info(f"Zero slice at xi={zero_xi.tolist()}: unbounded")
        return PetrovskiiVerdict('unbounded', math.inf, 'numeric', 0.0, tuple(evidence))
    evidence.append(EvidenceRecord('compactified_sup', "sup of the spectral abscissa over compactified samples",
                                   {'value': sup, 'xi': [float(v) for v in argmax]}))

    curve = sigma_curve(P, radii, budget)
    low = [s.r for s in curve.samples if s.low_confidence]
    evidence.append(EvidenceRecord('sigma_curve', "sigma(r) on the geometric radius grid",
                                   {**curve.to_dict(), 'low_confidence_radii': low}))

    try:
        fit = fit_growth(curve)
    except InsufficientSamplesError as e:
        if not math.isfinite(sup) and sup < 0:
            evidence.append(EvidenceRecord('no_roots', "no slice has lambda roots", {}))
            return PetrovskiiVerdict('bounded', -math.inf, 'numeric', 0.0, tuple(evidence), curve=curve)
        logger.warning(f"Growth fit impossible: {e}")
        return PetrovskiiVerdict('undetermined', None, 'numeric', math.inf, tuple(evidence), curve=curve)

    classification = classify_growth(curve, fit)
    evidence.append(EvidenceRecord('growth_fit', f"{fit.model} model fits sigma(r) best",
                                   {**fit.to_dict(), 'plateau_variation': plateau_variation(curve)}))

    if classification == 'bounded':
        _, sigma = curve.defined()
        omega0 = max(float(sigma[-1]), sup)
        error = max(plateau_variation(curve) or 0.0, 1e-9)
        logger.info(f"Bounded: omega0={omega0:.12g}")
        return PetrovskiiVerdict('bounded', omega0, 'numeric', error, tuple(evidence), curve=curve, fit=fit)
    if classification == 'unbounded':
        last = curve.samples[-1]
        evidence.append(EvidenceRecord('witness', "largest-ball maximiser of Re lambda",
                                       {'r': last.r, 'lambda': [last.witness_lambda.real, last.witness_lambda.imag],
                                        'xi': list(last.witness_xi)}))
        logger.info(f"Unbounded: sigma(r) grows like r^{fit.exponent:.3f}")
        return PetrovskiiVerdict('unbounded', math.inf, 'numeric', 0.0, tuple(evidence), curve=curve, fit=fit)
    logger.warning("Numeric growth classification is inconclusive")
    return PetrovskiiVerdict('undetermined', None, 'numeric', math.inf, tuple(evidence), curve=curve, fit=fit)


# ---------------------------------------------------------------------------
# logarithmic region


def check_log_region(P: OperatorSymbol, region: LogRegion, budget: Optional[SamplerBudget] = None) -> List[LogRegionViolation]:
    """
    Roots found inside {Re λ > a + b·log(1+|λ|+|ξ|)}.

    An empty list means no violation was found within the budget, not a proof.
    Violations are ordered by |ξ|.
    """
    budget = budget or SamplerBudget()
    n = P.dim_n
    xis = np.tan(_compactified_points(n, budget))
    batch = slice_roots_batch(P, xis, budget.threads)
    norms = np.sqrt(np.sum(xis * xis, axis=1))
    violations: List[LogRegionViolation] = []

    for row in np.flatnonzero(batch.kinds == KIND_ALL_LAMBDA):
        t = abs(region.a) + 1.0
        for _ in range(60):
            t = region.a + region.b * math.log1p(t + norms[row]) + 1.0
        violations.append(LogRegionViolation(complex(t), tuple(float(v) for v in xis[row]), 1.0))

    lam = batch.roots
    with np.errstate(invalid='ignore'):
        margin = lam.real - region.threshold(lam, norms[:, None])
        inside = (batch.kinds == KIND_FINITE)[:, None] & ~np.isnan(lam) & (margin > 0)
    for row, col in zip(*np.nonzero(inside)):
        violations.append(LogRegionViolation(complex(lam[row, col]), tuple(float(v) for v in xis[row]),
                                             float(margin[row, col])))
    violations.sort(key=lambda v: (math.sqrt(sum(x * x for x in v.xi)), -v.margin))
    logger.info(f"Log region a={region.a}, b={region.b}: {len(violations)} violation(s) in {len(xis)} slices")
    return violations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import fft as sp_fft
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import expm
from scipy.special import gamma, gammaincc
from scipy.stats import qmc

from poly_core import AnyTestFunction, OperatorSymbol, TestFunction, slice_coefficients
from root_engine import spectral_abscissa_batch

logger = logging.getLogger(__name__)

Role = Literal['symbol_inverse', 'N_sigma', 'N', 'rhs', 'solution']
FREQUENCY_ROLES = ('symbol_inverse',)
PROXIMITY_LEVEL = 1e-8
RHS_SUPPORT_LEVEL = 1e-6
DECAY_FLOOR = 1e-14


class SpectrumProximityError(ValueError):
    """|P| on the shifted line fell below the proximity threshold (σ ≤ ω₀ or a near-zero on the grid)."""

    def __init__(self, min_modulus: float, threshold: float, where: Sequence[float] = (),
                 message: Optional[str] = None):
        self.min_modulus = min_modulus
        self.threshold = threshold
        self.where = tuple(float(v) for v in where)
        super().__init__(message or f"sigma too close to spectrum: min |P| = {min_modulus:.3e} < {threshold:.3e}"
                                    f" at xi={list(self.where)}")

    @classmethod
    def below_bound(cls, sigma: float, omega0: float) -> "SpectrumProximityError":
        """σ ≤ ω₀: the shifted line sits inside the spectrum."""
        return cls(float('nan'), omega0, message=f"sigma={sigma} is not above omega0={omega0}")


class RhsSupportError(ValueError):
    """The right-hand side carries mass in x₀ < 0 or outside the reliable subdomain."""

    def __init__(self, mass: float, limit: float):
        self.mass = mass
        self.limit = limit
        super().__init__(f"right-hand side support violation: {mass:.3e} of its mass lies outside "
                         f"x0 >= 0 within the reliable subdomain (limit {limit:.1e})")


class GridSpec(BaseModel):
    """
    Uniform space-time grid: frequencies cover [−Ξ, Ξ) per axis with M points,
    spacing π/Ξ and period Mπ/Ξ in space.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    freq_extent: Tuple[float, ...] = (32.0,)
    points_per_axis: int = 512
    sigma: float = 1.0
    window: Literal['none', 'raised-cosine'] = 'raised-cosine'
    taper: float = 0.25

    @field_validator('freq_extent', mode='before')
    @classmethod
    def extent_tuple(cls, value):
        if isinstance(value, (int, float)):
            return (float(value),)
        return tuple(value)

    @field_validator('freq_extent')
    @classmethod
    def extent_positive(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value or any(v <= 0 for v in value):
            raise ValueError("frequency extents must be positive")
        return value

    @field_validator('points_per_axis')
    @classmethod
    def points_even(cls, value: int) -> int:
        if value < 8 or value % 2:
            raise ValueError("points_per_axis must be an even integer >= 8")
        return value

    @field_validator('taper')
    @classmethod
    def taper_range(cls, value: float) -> float:
        if not 0 < value <= 0.5:
            raise ValueError("taper fraction must lie in (0, 0.5]")
        return value

    @model_validator(mode='after')
    def extent_per_axis(self) -> "GridSpec":
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if len(self.freq_extent) not in (1, self.n + 1):
            raise ValueError(f"freq_extent needs 1 or {self.n + 1} entries")
        return self

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def extents(self) -> Tuple[float, ...]:
        if len(self.freq_extent) == 1:
            return self.freq_extent * self.dim
        return self.freq_extent

    def spacing(self, axis: int) -> float:
        return math.pi / self.extents[axis]

    def period(self, axis: int) -> float:
        return self.points_per_axis * math.pi / self.extents[axis]

    def frequencies(self, axis: int) -> np.ndarray:
        M = self.points_per_axis
        return 2.0 * self.extents[axis] / M * (np.arange(M) - M // 2)

    def coordinates(self, axis: int) -> np.ndarray:
        M = self.points_per_axis
        return self.spacing(axis) * (np.arange(M) - M // 2)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([self.spacing(k) for k in range(self.dim)]))

    def axis_window(self, axis: int) -> np.ndarray:
        xi = np.abs(self.frequencies(axis))
        if self.window != 'raised-cosine':
            return np.ones_like(xi)
        inner = (1.0 - self.taper) * self.extents[axis]
        t = np.clip((xi - inner) / (self.taper * self.extents[axis]), 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(np.pi * t))

    def window_profile(self, axes: Optional[Sequence[int]] = None) -> np.ndarray:
        """Product raised-cosine profile over the centred frequency grid (1 inside (1−ρ)Ξ)."""
        profile = np.ones((1,) * self.dim)
        for k in range(self.dim) if axes is None else axes:
            shape = [1] * self.dim
            shape[k] = -1
            profile = profile * self.axis_window(k).reshape(shape)
        return profile

    def untapered_mask(self) -> np.ndarray:
        mesh = np.meshgrid(*[self.frequencies(k) for k in range(self.dim)], indexing='ij')
        inner = 1.0 - (self.taper if self.window == 'raised-cosine' else 0.0)
        return np.all([np.abs(m) <= inner * self.extents[k] for k, m in enumerate(mesh)], axis=0)

    def reliable_mask(self) -> np.ndarray:
        mesh = np.meshgrid(*[self.coordinates(k) for k in range(self.dim)], indexing='ij')
        return np.all([np.abs(m) <= self.period(k) / 4.0 for k, m in enumerate(mesh)], axis=0)


@dataclass(frozen=True)
class GridField:
    """Complex samples over the (1+n)-dimensional grid, x₀ axis first, centred ordering."""

    spec: GridSpec
    values: np.ndarray
    role: Role
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        expected = (self.spec.points_per_axis,) * self.spec.dim
        if values.shape != expected:
            raise ValueError(f"field shape {values.shape} does not match grid {expected}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def sample(cls, spec: GridSpec, func: Callable[[np.ndarray], np.ndarray], role: Role = 'rhs',
               meta: Optional[Dict[str, object]] = None) -> "GridField":
        """Evaluate func on the coordinate mesh, points shaped (..., 1+n)."""
        mesh = np.stack(np.meshgrid(*[spec.coordinates(k) for k in range(spec.dim)], indexing='ij'), axis=-1)
        return cls(spec, func(mesh), role, dict(meta or {}))

    @property
    def in_frequency_domain(self) -> bool:
        return self.role in FREQUENCY_ROLES

    def axis(self, k: int) -> np.ndarray:
        return self.spec.frequencies(k) if self.in_frequency_domain else self.spec.coordinates(k)

    def mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*[self.axis(k) for k in range(self.spec.dim)], indexing='ij')

    def reliable_mask(self) -> np.ndarray:
        return self.spec.reliable_mask()

    def value_at(self, point: Sequence[float]) -> complex:
        """Multilinear interpolation of the samples at one point."""
        axes = [self.axis(k) for k in range(self.spec.dim)]
        point = np.asarray(point, dtype=np.float64).reshape(1, -1)
        re = RegularGridInterpolator(axes, self.values.real)(point)[0]
        im = RegularGridInterpolator(axes, self.values.imag)(point)[0]
        return complex(re, im)


@dataclass(frozen=True)
class PairingResult:
    value: complex
    error: float
    sigma: float
    flagged: bool = False
    nodes: int = 0

    def to_dict(self) -> dict:
        return {'re': self.value.real, 'im': self.value.imag, 'error': self.error, 'sigma': self.sigma,
                'flagged': self.flagged, 'nodes': self.nodes}


class QuadratureConfig(BaseModel):
    """Shifted-contour quadrature settings."""

    model_config = ConfigDict(frozen=True)

    tolerance: float = 1e-10
    omega0: Optional[float] = None
    max_nodes_per_axis: int = 4096
    max_refinements: int = 5
    threads: int = 1

    @field_validator('tolerance')
    @classmethod
    def tolerance_positive(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        return value

    @field_validator('max_nodes_per_axis', 'max_refinements', 'threads')
    @classmethod
    def positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value


@dataclass(frozen=True)
class DeltaResidual:
    reference: complex
    via_operator: PairingResult
    via_transform: PairingResult

    @property
    def residual(self) -> float:
        return abs(self.via_operator.value - self.reference)

    @property
    def transform_residual(self) -> float:
        return abs(self.via_transform.value - self.reference)

    @property
    def cross_check(self) -> float:
        return abs(self.via_operator.value - self.via_transform.value)

    def to_dict(self) -> dict:
        return {'reference': [self.reference.real, self.reference.imag], 'residual': self.residual,
                'transform_residual': self.transform_residual, 'cross_check': self.cross_check,
                'error': self.via_operator.error + self.via_transform.error}


@dataclass(frozen=True)
class DecayFit:
    lam: complex
    rate: float
    probes: Tuple[float, ...]
    magnitudes: Tuple[float, ...]

    def to_dict(self) -> dict:
        return {'lambda': [self.lam.real, self.lam.imag], 'rate': self.rate, 'probes': list(self.probes),
                'magnitudes': list(self.magnitudes)}


@dataclass(frozen=True)
class ModulusScan:
    inf_modulus: float
    where: Tuple[float, ...]
    mu_prime: float
    shell_radii: Tuple[float, ...]
    shell_minima: Tuple[float, ...]

    def to_dict(self) -> dict:
        return {'inf_modulus': self.inf_modulus, 'where': list(self.where), 'mu_prime': self.mu_prime,
                'shell_radii': list(self.shell_radii), 'shell_minima': list(self.shell_minima)}


# ---------------------------------------------------------------------------
# grid construction


def _symbol_on_line(P: OperatorSymbol, spec: GridSpec) -> np.ndarray:
    mesh = np.meshgrid(*[spec.frequencies(k) for k in range(spec.dim)], indexing='ij')
    return P.evaluate(spec.sigma + 1j * mesh[0], *mesh[1:])


def symbol_inverse_on_line(P: OperatorSymbol, spec: GridSpec) -> GridField:
    """
    Windowed 1/P(σ+iξ₀, iξ) on the centred frequency grid.

    Raises:
        SpectrumProximityError: min |P| ≤ 1e−8 · coefficient scale
    """
    if P.dim_n != spec.n:
        raise ValueError(f"operator has n={P.dim_n}, grid has n={spec.n}")
    values = _symbol_on_line(P, spec)
    modulus = np.abs(values)
    idx = np.unravel_index(int(np.argmin(modulus)), modulus.shape)
    min_modulus = float(modulus[idx])
    threshold = PROXIMITY_LEVEL * P.coefficient_scale
    if min_modulus <= threshold:
        where = [spec.frequencies(k)[i] for k, i in enumerate(idx)]
        logger.error(f"Symbol nearly vanishes on the line sigma={spec.sigma}: min |P| = {min_modulus:.3e}")
        raise SpectrumProximityError(min_modulus, threshold, where)
    inverse = spec.window_profile() / values
    return GridField(spec, inverse, 'symbol_inverse', {'min_modulus': min_modulus})


def _inverse_transform(centred: np.ndarray, spec: GridSpec, workers: int,
                       axes: Optional[Sequence[int]] = None) -> np.ndarray:
    """Continuous inverse Fourier transform samples from centred frequency samples along `axes`."""
    axes = tuple(range(spec.dim)) if axes is None else tuple(axes)
    if not axes:
        return centred
    raw = sp_fft.ifftn(sp_fft.ifftshift(centred, axes=axes), axes=axes, workers=workers)
    return sp_fft.fftshift(raw, axes=axes) / float(np.prod([spec.spacing(k) for k in axes]))


def _forward_transform(centred: np.ndarray, spec: GridSpec, workers: int) -> np.ndarray:
    raw = sp_fft.fftn(sp_fft.ifftshift(centred), workers=workers)
    return sp_fft.fftshift(raw) * spec.cell_volume


def _time_weight(spec: GridSpec, rate: float) -> np.ndarray:
    x0 = spec.coordinates(0)
    weight = np.exp(np.clip(rate * x0, -700.0, 700.0))
    return weight.reshape((-1,) + (1,) * spec.n)


def _causal_columns(P: OperatorSymbol, spec: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Causal solution of P(∂₀, iξ)g = δ(x₀) on the x₀ grid for every spatial node ξ.

    g follows the companion system of the λ-polynomial from u^{(m−1)}(0⁺) = 1/Q_m(iξ),
    stepped by its matrix exponential; the node x₀ = 0 takes the mean of both sides.
    Returns (g with x₀ first and spatial frequencies flattened, mask of usable columns).
    """
    M = spec.points_per_axis
    if spec.n == 0:
        xis = np.zeros((1, 0))
    else:
        xis = np.stack(np.meshgrid(*[spec.frequencies(k) for k in range(1, spec.dim)], indexing='ij'),
                       axis=-1).reshape(-1, spec.n)
    coeffs = slice_coefficients(P, xis)
    columns = np.zeros((M, xis.shape[0]), dtype=np.complex128)
    m = P.lambda_degree
    if m == 0:
        return columns, np.zeros(xis.shape[0], dtype=bool)
    leading = coeffs[:, m]
    usable = np.abs(leading) > PROXIMITY_LEVEL * np.max(np.abs(coeffs), axis=1)
    safe = np.where(usable, leading, 1.0)
    companion = np.zeros((xis.shape[0], m, m), dtype=np.complex128)
    companion[:, np.arange(m - 1), np.arange(1, m)] = 1.0
    companion[:, m - 1, :] = -coeffs[:, :m] / safe[:, None]
    step = expm(companion * spec.spacing(0))
    usable &= np.all(np.isfinite(step), axis=(1, 2))
    state = np.zeros((xis.shape[0], m), dtype=np.complex128)
    state[:, m - 1] = 1.0 / safe
    columns[M // 2] = 0.5 * state[:, 0]
    for k in range(M // 2 + 1, M):
        state = np.einsum('bij,bj->bi', step, state)
        columns[k] = state[:, 0]
    usable &= np.all(np.isfinite(columns), axis=0)
    return columns, usable


def build_fundamental_solution(P: OperatorSymbol, spec: GridSpec, threads: int = 1) -> GridField:
    """
    N = e^{σx₀}·𝔉⁻¹(windowed 1/P on the shifted line) on the space-time grid.

    The x₀ direction of the inverse transform is carried out exactly: per
    spatial frequency ξ, e^{σx₀}·𝔉⁻¹_{ξ₀}(1/P(σ+iξ₀, iξ)) is the causal
    solution of the ODE P(∂₀, iξ)g = δ. Only columns whose leading
    λ-coefficient vanishes fall back to the discrete transform along x₀.
    Values are trustworthy inside |x_k| ≤ L/4 only; the field's meta records
    that half-width per axis.
    """
    logger.info(f"Building fundamental solution of {P}: sigma={spec.sigma}, "
                f"M={spec.points_per_axis}, Xi={list(spec.extents)}")
    inverse = symbol_inverse_on_line(P, spec)
    shape = inverse.values.shape
    space = tuple(range(1, spec.dim))
    columns, usable = _causal_columns(P, spec)
    mixed = (columns * spec.window_profile(space).reshape(1, -1)).reshape(shape)
    if not usable.all():
        fallback = _inverse_transform(inverse.values, spec, threads, axes=(0,)) * _time_weight(spec, spec.sigma)
        usable = usable.reshape((1,) + shape[1:])
        mixed = np.where(usable, mixed, fallback)
        logger.debug(f"{int(np.size(usable) - np.count_nonzero(usable))} column(s) via the x0 transform")
    values = _inverse_transform(mixed, spec, threads, axes=space)
    meta = {
        'min_modulus': inverse.meta['min_modulus'],
        'exact_columns': int(np.count_nonzero(usable)),
        'reliable_halfwidth': [spec.period(k) / 4.0 for k in range(spec.dim)],
    }
    return GridField(spec, values, 'N', meta)


def pair_on_grid(field_: GridField, phi: AnyTestFunction) -> complex:
    """Riemann sum of field·φ over the reliable subdomain."""
    mesh = np.stack(field_.mesh(), axis=-1)
    mask = field_.reliable_mask()
    return complex(np.sum(field_.values[mask] * phi.value(mesh[mask])) * field_.spec.cell_volume)


# ---------------------------------------------------------------------------
# shifted-contour quadrature


def spectral_bound_hint(P: OperatorSymbol, threads: int = 1) -> float:
    """Largest spectral abscissa over a compactified Halton sample; sizes quadrature steps when ω₀ is unknown."""
    if P.dim_n == 0:
        xis = np.zeros((1, 0))
    else:
        u = qmc.Halton(d=P.dim_n, scramble=True, seed=0).random(4096)
        xis = np.vstack([np.zeros((1, P.dim_n)), np.tan((u - 0.5) * math.pi * 0.999)])
    values = spectral_abscissa_batch(P, xis, threads)
    return float(np.max(values))


def _axis_tail(order: int, width: float, shift: float, center: float, bound: float) -> Tuple[float, float]:
    """(tail beyond ±bound, full integral) of |one Gaussian-Hermite factor of φ̂| along a shifted line."""
    prefactor = width * math.sqrt(2.0 * math.pi) * math.exp(center * shift + 0.5 * (width * shift) ** 2)
    a = 0.5 * width * width
    tail = 0.0
    full = 0.0
    for j in range(order + 1):
        weight = comb(order, j) * (width * abs(shift)) ** (order - j) * width ** j
        s = 0.5 * (j + 1)
        moment = 0.5 * a ** (-s) * gamma(s)
        tail += weight * moment * gammaincc(s, a * bound * bound)
        full += weight * moment
    return 2.0 * prefactor * tail, 2.0 * prefactor * full


def _tail_bound(phi: AnyTestFunction, shifts: Sequence[float], bounds: Sequence[float], min_modulus: float) -> float:
    total = 0.0
    for part in phi.components:
        pieces = [_axis_tail(o, w, y, c, b)
                  for o, w, y, c, b in zip(part.orders, part.width, shifts, part.center, bounds)]
        for k, (tail, _) in enumerate(pieces):
            others = np.prod([full for j, (_, full) in enumerate(pieces) if j != k])
            total += abs(part.amplitude) * tail * others
    return total / ((2.0 * math.pi) ** len(bounds) * max(min_modulus, 1e-300))


def _trapezoid(P: OperatorSymbol, phi: AnyTestFunction, sigma: float, shift: complex,
               nodes: List[np.ndarray], steps: Sequence[float], threads: int,
               multiply_back: bool) -> Tuple[complex, float, float]:
    """
    Trapezoid sum of (2π)^{−d} φ̂(−ξ₀+i(σ−λ), −ξ)/P(σ+iξ₀, iξ) over the node grid.

    Returns (value, L1 scale, min |P| over the nodes).
    """
    dim = len(nodes)
    rest = int(np.prod([len(a) for a in nodes[1:]])) if dim > 1 else 1
    chunk = max(1, 2_000_000 // max(rest, 1))
    first = nodes[0]
    volume = float(np.prod(steps)) / (2.0 * math.pi) ** dim

    def block(start: int) -> Tuple[complex, float, float]:
        mesh = np.meshgrid(first[start:start + chunk], *nodes[1:], indexing='ij')
        xi0 = mesh[0]
        zeta = np.stack([-xi0 + 1j * (sigma - shift)] + [-m + 0j for m in mesh[1:]], axis=-1)
        transform = phi.fourier(zeta)
        symbol = P.evaluate(sigma + 1j * xi0, *mesh[1:])
        integrand = transform if multiply_back else transform / symbol
        modulus = np.abs(symbol)
        return complex(integrand.sum()), float(np.abs(integrand).sum()), float(modulus.min())

    starts = list(range(0, len(first), chunk))
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    value = sum((p[0] for p in parts), 0j) * volume
    scale = sum(p[1] for p in parts) * volume
    return value, scale, min(p[2] for p in parts)


def _nodes(center: float, bound: float, step: float) -> np.ndarray:
    count = int(math.ceil(bound / step))
    return center + step * np.arange(-count, count + 1)


def pair_with_test(P: OperatorSymbol, sigma: float, phi: AnyTestFunction,
                   config: Optional[QuadratureConfig] = None, exp_shift: complex = 0.0,
                   multiply_back: bool = False) -> PairingResult:
    """
    ⟨e_{−λ}N, φ⟩ through the shifted-contour formula (λ = exp_shift, 0 gives ⟨N, φ⟩).

    (2π)^{−1−n} ∫ φ̂(−ξ₀ + i(σ−λ), −ξ) / P(σ+iξ₀, iξ) dξ is summed by the
    trapezoid rule on a box sized from the Gaussian decay of φ̂; the step is
    halved until successive sums agree. The reported value is the finer sum
    and the error adds the refinement delta to a tail bound.

    Args:
        P: operator symbol
        sigma: line shift, above ω₀
        phi: Gaussian-Hermite test function or series
        config: quadrature settings
        exp_shift: λ of the weight e^{−λx₀}
        multiply_back: drop the 1/P factor (pairs δ instead of N)

    Returns:
        PairingResult; `flagged` when the tolerance was not reached
    """
    config = config or QuadratureConfig()
    dim = P.dim_n + 1
    if len(phi.width) != dim:
        raise ValueError(f"test function has {len(phi.width)} variables, operator needs {dim}")
    shift = complex(exp_shift)
    omega0 = config.omega0 if config.omega0 is not None else spectral_bound_hint(P, config.threads)
    gap = max(sigma - omega0, 0.05) if math.isfinite(omega0) else math.inf
    if math.isfinite(omega0) and sigma <= omega0:
        logger.warning(f"Pairing requested at sigma={sigma} <= omega0 estimate {omega0}")

    log_tol = math.log(1.0 / config.tolerance)
    max_order = max(max(p.orders) for p in phi.components) if phi.components else 0
    reach = phi.reach() if phi.components else 0.0
    bounds = [(math.sqrt(2.0 * log_tol) + math.sqrt(2.0 * max_order + 1.0)) / w for w in phi.width]
    period = 2.0 * reach + (log_tol / gap if math.isfinite(gap) else 0.0) + 1.0
    steps = [min(2.0 * math.pi / period, b / 8.0) for b in bounds]
    centers = [shift.imag] + [0.0] * P.dim_n
    shifts = [sigma - shift.real] + [0.0] * P.dim_n

    flagged = False
    for _ in range(6):
        grid = [_nodes(c, b, h) for c, b, h in zip(centers, bounds, steps)]
        coarse, scale, min_modulus = _trapezoid(P, phi, sigma, shift, grid, steps, config.threads, multiply_back)
        tail = _tail_bound(phi, shifts, bounds, 1.0 if multiply_back else min_modulus)
        if tail <= config.tolerance * max(scale, 1e-300):
            break
        bounds = [1.3 * b for b in bounds]
    else:
        flagged = True

    value = coarse
    delta = math.inf
    nodes = int(np.prod([len(a) for a in grid]))
    for _ in range(config.max_refinements):
        finer = [h / 2.0 for h in steps]
        grid = [_nodes(c, b, h) for c, b, h in zip(centers, bounds, finer)]
        if max(len(a) for a in grid) > config.max_nodes_per_axis:
            flagged = True
            break
        steps = finer
        nodes = int(np.prod([len(a) for a in grid]))
        value, scale, min_modulus = _trapezoid(P, phi, sigma, shift, grid, steps, config.threads, multiply_back)
        delta = abs(value - coarse)
        if delta <= config.tolerance * max(scale, 1e-300):
            break
        coarse = value
    else:
        flagged = True

    error = (delta if math.isfinite(delta) else abs(value)) + tail
    if flagged:
        logger.warning(f"Pairing at sigma={sigma} did not reach tolerance; achieved error {error:.3e}")
    return PairingResult(complex(value), float(error), float(sigma), flagged, nodes)


# ---------------------------------------------------------------------------
# verification battery


def verify_delta_property(P: OperatorSymbol, sigma: float, phi_suite: Sequence[TestFunction],
                          config: Optional[QuadratureConfig] = None) -> List[DeltaResidual]:
    """
    Residuals |⟨N, P(−∂)φ⟩ − φ(0)| along two paths: pairing N with the exact
    expansion of P(−∂)φ, and pairing δ with φ (1/P multiplied back out).
    """
    config = config or QuadratureConfig()
    results = []
    origin = np.zeros(P.dim_n + 1)
    for phi in phi_suite:
        reference = complex(phi.value(origin))
        via_operator = pair_with_test(P, sigma, phi.apply(P, sign_flip=True), config)
        via_transform = pair_with_test(P, sigma, phi, config, multiply_back=True)
        results.append(DeltaResidual(reference, via_operator, via_transform))
    worst = max((r.residual for r in results), default=0.0)
    logger.info(f"Delta property for {P} at sigma={sigma}: worst residual {worst:.3e}")
    return results


def verify_sigma_independence(P: OperatorSymbol, sigma1: float, sigma2: float, phi: AnyTestFunction,
                              config: Optional[QuadratureConfig] = None) -> float:
    """|pair(σ₁) − pair(σ₂)| / max(|pair(σ₁)|, ε)."""
    first = pair_with_test(P, sigma1, phi, config)
    second = pair_with_test(P, sigma2, phi, config)
    return abs(first.value - second.value) / max(abs(first.value), 1e-300)


def support_probe(P: OperatorSymbol, offset: float) -> TestFunction:
    """Gaussian centred at x₀ = offset < 0 with time width |offset|/6."""
    if offset >= 0:
        raise ValueError("support probes need a negative x0 offset")
    widths = (abs(offset) / 6.0,) + (1.0,) * P.dim_n
    return TestFunction.gaussian((offset,) + (0.0,) * P.dim_n, widths)


def verify_support(P: OperatorSymbol, sigma: float, offsets: Sequence[float],
                   config: Optional[QuadratureConfig] = None) -> List[float]:
    """|⟨N, φ⟩| for narrow probes living in x₀ < 0; all should sit at noise level."""
    values = [abs(pair_with_test(P, sigma, support_probe(P, o), config).value) for o in offsets]
    logger.info(f"Support probes for {P}: max |pairing| {max(values, default=0.0):.3e}")
    return values


def verify_decay(P: OperatorSymbol, sigma: float, lam: complex, probes: Sequence[float] = tuple(range(1, 9)),
                 config: Optional[QuadratureConfig] = None) -> DecayFit:
    """
    Exponential rate of |⟨e_{−λ}N, φ_t⟩| in t for unit Gaussians centred (t, 0).

    The slope is fitted over the upper half of the probes, away from the
    support edge at x₀ = 0. Any magnitude below 1e−14 reports −inf.
    """
    probes = tuple(float(t) for t in probes)
    magnitudes = []
    for t in probes:
        phi = TestFunction.gaussian((t,) + (0.0,) * P.dim_n, 1.0)
        magnitudes.append(abs(pair_with_test(P, sigma, phi, config, exp_shift=lam).value))
    if min(magnitudes) < DECAY_FLOOR:
        return DecayFit(complex(lam), -math.inf, probes, tuple(magnitudes))
    t = np.array(probes)
    upper = t >= np.median(t)
    rate, _ = np.polyfit(t[upper], np.log(np.array(magnitudes)[upper]), 1)
    logger.debug(f"Decay rate at lambda={lam}: {rate:.4f}")
    return DecayFit(complex(lam), float(rate), probes, tuple(magnitudes))


def estimate_decay_threshold(P: OperatorSymbol, sigma: float, lo: float, hi: float,
                             probes: Sequence[float] = tuple(range(1, 9)),
                             config: Optional[QuadratureConfig] = None, tolerance: float = 1e-3) -> float:
    """
    Real λ where the decay rate of e_{−λ}N changes sign, by bisection on [lo, hi].

    Raises:
        ValueError: the rate does not change sign on the bracket
    """
    rate_lo = verify_decay(P, sigma, lo, probes, config).rate
    rate_hi = verify_decay(P, sigma, hi, probes, config).rate
    if not (rate_lo > 0 > rate_hi):
        raise ValueError(f"decay rate does not change sign on [{lo}, {hi}]: {rate_lo:.3g}, {rate_hi:.3g}")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if verify_decay(P, sigma, mid, probes, config).rate > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# convolution solver


def _rhs_violation(F: GridField) -> float:
    mass = np.abs(F.values)
    total = float(mass.sum())
    if total == 0.0:
        return 0.0
    x0 = F.spec.coordinates(0).reshape((-1,) + (1,) * F.spec.n)
    inside = F.reliable_mask() & (x0 >= 0)
    return float(mass[~inside].sum()) / total


def convolution_solve(P: OperatorSymbol, sigma: float, F: GridField, threads: int = 1) -> GridField:
    """
    U = e^{σx₀}·𝔉⁻¹(N̂_σ·𝔉(e^{−σx₀}F)) on F's grid.

    The solution's meta carries the relative residual of P·Û against the
    transformed right-hand side inside the untapered band.

    Raises:
        RhsSupportError: more than 1e−6 of F's mass lies in x₀ < 0 or outside the reliable subdomain
    """
    if F.role != 'rhs':
        raise ValueError(f"expected a field with role 'rhs', got {F.role!r}")
    violation = _rhs_violation(F)
    if violation > RHS_SUPPORT_LEVEL:
        logger.error(f"Right-hand side leaks {violation:.3e} of its mass outside x0 >= 0")
        raise RhsSupportError(violation, RHS_SUPPORT_LEVEL)
    spec = F.spec.model_copy(update={'sigma': sigma})
    inverse = symbol_inverse_on_line(P, spec)
    damped = F.values * _time_weight(spec, -sigma)
    transformed = _forward_transform(damped, spec, threads)
    u_sigma = _inverse_transform(inverse.values * transformed, spec, threads)
    values = u_sigma * _time_weight(spec, sigma)

    check = _forward_transform(u_sigma, spec, threads) * _symbol_on_line(P, spec)
    band = spec.untapered_mask()
    norm = float(np.linalg.norm(transformed[band]))
    residual = float(np.linalg.norm(check[band] - transformed[band])) / norm if norm > 0 else 0.0
    logger.info(f"Convolution solve at sigma={sigma}: residual {residual:.3e}")
    meta = {'residual': residual, 'min_modulus': inverse.meta['min_modulus'],
            'reliable_halfwidth': [spec.period(k) / 4.0 for k in range(spec.dim)]}
    return GridField(spec, values, 'solution', meta)


# ---------------------------------------------------------------------------
# lower bounds for |P| on the shifted line


def min_modulus_scan(P: OperatorSymbol, sigma: float, radius: float = 100.0, samples: int = 20000,
                     shells: int = 12, seed: int = 0) -> ModulusScan:
    """
    inf |P(σ+iξ₀, iξ)| over sampled (ξ₀, ξ) with norm ≤ radius, and μ′ from a
    log-log fit of the per-shell minima against the shell radius.
    """
    dim = P.dim_n + 1
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    pts = 2.0 * sampler.random(samples) - 1.0
    pts = radius * pts[np.sum(pts ** 2, axis=1) <= 1.0]

    radii = np.geomspace(1.0, radius, shells)
    direction = qmc.Halton(d=dim, scramble=True, seed=seed + 1).random(max(64, samples // (4 * shells))) - 0.5
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    if dim == 1:
        direction = np.array([[1.0], [-1.0]])
    shell_points = [rho * direction for rho in radii]

    def modulus(points: np.ndarray) -> np.ndarray:
        return np.abs(P.evaluate(sigma + 1j * points[:, 0], *[points[:, k] for k in range(1, dim)]))

    cloud = np.vstack([np.zeros((1, dim)), pts] + shell_points)
    values = modulus(cloud)
    best = int(np.argmin(values))
    minima = np.array([modulus(p).min() for p in shell_points])
    positive = minima > 0
    if np.count_nonzero(positive) >= 2:
        slope, _ = np.polyfit(np.log(radii[positive]), np.log(minima[positive]), 1)
        mu_prime = float(-slope)
    else:
        mu_prime = math.nan
    logger.info(f"Min-modulus scan of {P} at sigma={sigma}: inf {values[best]:.6g}, mu'={mu_prime:.3f}")
    return ModulusScan(float(values[best]), tuple(float(v) for v in cloud[best]), mu_prime,
                       tuple(float(r) for r in radii), tuple(float(m) for m in minima))


def fit_margin_exponent(P: OperatorSymbol, omega0: float, sigmas: Sequence[float], radius: float = 100.0,
                        samples: int = 20000) -> Tuple[float, float]:
    """
    Empirical (c, μ) with inf|P| ≈ c·(σ−ω₀)^μ, from min-modulus scans at several shifts.
    """
    gaps = np.array([s - omega0 for s in sigmas], dtype=np.float64)
    if np.any(gaps <= 0) or len(gaps) < 2:
        raise ValueError("need at least two shifts above omega0")
    minima = np.array([min_modulus_scan(P, s, radius, samples).inf_modulus for s in sigmas])
    mu, intercept = np.polyfit(np.log(gaps), np.log(minima), 1)
    return float(math.exp(intercept)), float(mu)

import json
import logging
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import hermite_e

logger = logging.getLogger(__name__)

Exponents = Tuple[int, ...]
TermMap = Dict[Exponents, complex]

# Relative level below which a Gaussian-Hermite factor counts as outside its support
SUPPORT_LEVEL = 1e-16


class OperatorSyntaxError(ValueError):
    """Operator text does not match the grammar; `position` is a 0-based offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        pointer = f"\n  {text}\n  {' ' * position}^" if text else ""
        super().__init__(f"{message} at position {position}{pointer}")


class VariableIndexError(ValueError):
    """A variable d<k> was used with k > n."""

    def __init__(self, index: int, dim_n: int, position: Optional[int] = None):
        self.index = index
        self.dim_n = dim_n
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"variable d{index} exceeds the spatial dimension n={dim_n}{where}")


def _clean_terms(dim_n: int, terms: Mapping[Exponents, complex]) -> TermMap:
    cleaned: TermMap = {}
    for exps, coeff in terms.items():
        exps = tuple(int(e) for e in exps)
        if len(exps) != dim_n + 1:
            raise ValueError(f"exponent tuple {exps} has length {len(exps)}, expected {dim_n + 1}")
        if any(e < 0 for e in exps):
            raise ValueError(f"negative exponent in {exps}")
        coeff = complex(coeff)
        if not (math.isfinite(coeff.real) and math.isfinite(coeff.imag)):
            raise ValueError(f"non-finite coefficient for {exps}")
        total = cleaned.get(exps, 0j) + coeff
        cleaned[exps] = total
    return {e: c for e, c in cleaned.items() if c != 0}


def _term_order(item: Tuple[Exponents, complex]):
    exps = item[0]
    return (-sum(exps), tuple(-e for e in exps))


@dataclass(frozen=True)
class OperatorSymbol:
    """
    Sparse polynomial P(λ, iξ₁, …, iξₙ) of a constant-coefficient operator.

    Term exponents are (power of ∂₀, power of ∂₁, …, power of ∂ₙ). Terms are kept
    in canonical order (total degree descending, then exponents descending);
    zero coefficients never survive construction.
    """

    dim_n: int
    terms: Tuple[Tuple[Exponents, complex], ...]
    _exponents: np.ndarray = field(init=False, repr=False, compare=False)
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim_n < 0:
            raise ValueError("dim_n must be nonnegative")
        cleaned = _clean_terms(self.dim_n, dict(self.terms))
        ordered = tuple(sorted(cleaned.items(), key=_term_order))
        object.__setattr__(self, 'terms', ordered)
        exps = np.array([e for e, _ in ordered], dtype=np.int64).reshape(len(ordered), self.dim_n + 1)
        coeffs = np.array([c for _, c in ordered], dtype=np.complex128)
        object.__setattr__(self, '_exponents', exps)
        object.__setattr__(self, '_coeffs', coeffs)

    @classmethod
    def from_terms(cls, dim_n: int, terms: Mapping[Exponents, complex]) -> "OperatorSymbol":
        return cls(dim_n, tuple(_clean_terms(dim_n, terms).items()))

    @classmethod
    def constant(cls, dim_n: int, value: complex = 1.0) -> "OperatorSymbol":
        return cls.from_terms(dim_n, {(0,) * (dim_n + 1): value})

    # -- structure -------------------------------------------------------

    @property
    def term_map(self) -> TermMap:
        return dict(self.terms)

    @property
    def exponents(self) -> np.ndarray:
        return self._exponents

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def lambda_degree(self) -> int:
        """Degree m in ∂₀ (0 for the zero operator)."""
        if not self.terms:
            return 0
        return int(self._exponents[:, 0].max())

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def coefficient_scale(self) -> float:
        return float(np.abs(self._coeffs).sum())

    def involves_lambda(self) -> bool:
        return self.lambda_degree > 0

    # -- algebra -----------------------------------------------------------

    def _check_dim(self, other: "OperatorSymbol"):
        if other.dim_n != self.dim_n:
            raise ValueError(f"dimension mismatch: n={self.dim_n} vs n={other.dim_n}")

    def __add__(self, other: "OperatorSymbol") -> "OperatorSymbol":
        self._check_dim(other)
        combined = self.term_map
        for exps, coeff in other.terms:
            combined[exps] = combined.get(exps, 0j) + coeff
        return OperatorSymbol.from_terms(self.dim_n, combined)

    def __neg__(self) -> "OperatorSymbol":
        return self.scale(-1.0)

    def __sub__(self, other: "OperatorSymbol") -> "OperatorSymbol":
        return self + (-other)

    def __mul__(self, other: Union["OperatorSymbol", complex, float, int]) -> "OperatorSymbol":
        if not isinstance(other, OperatorSymbol):
            return self.scale(other)
        self._check_dim(other)
        return OperatorSymbol.from_terms(self.dim_n, _multiply_maps(self.term_map, other.term_map))

    __rmul__ = __mul__

    def scale(self, factor: complex) -> "OperatorSymbol":
        return OperatorSymbol.from_terms(self.dim_n, {e: c * factor for e, c in self.terms})

    # -- evaluation --------------------------------------------------------

    def evaluate(self, lam, *xi):
        """
        Broadcasting evaluation of P(λ, iξ₁, …, iξₙ).

        Args:
            lam: complex scalar or array
            xi: n real scalars or arrays, broadcast against lam

        Returns:
            Complex scalar or array of symbol values
        """
        if len(xi) != self.dim_n:
            raise ValueError(f"expected {self.dim_n} spatial frequencies, got {len(xi)}")
        variables = [np.asarray(lam, dtype=np.complex128)] + [1j * np.asarray(x, dtype=np.float64) for x in xi]
        powers = [_power_table(v, int(self._exponents[:, k].max()) if self.terms else 0)
                  for k, v in enumerate(variables)]
        total = np.zeros(np.broadcast_shapes(*(v.shape for v in variables)), dtype=np.complex128)
        for exps, coeff in self.terms:
            term = coeff
            for k, e in enumerate(exps):
                if e:
                    term = term * powers[k][e]
            total = total + term
        return total

    # -- text / JSON -------------------------------------------------------

    def to_text(self) -> str:
        """Canonical grammar text; parse(to_text()) reproduces the term list."""
        if not self.terms:
            return "0"
        pieces: List[str] = []
        for exps, coeff in self.terms:
            monomial = "*".join(f"d{k}" if e == 1 else f"d{k}^{e}" for k, e in enumerate(exps) if e)
            sign, body = _format_coefficient(coeff, bool(monomial))
            if body and monomial:
                text = f"{body}*{monomial}"
            else:
                text = body or monomial
            pieces.append((sign, text))
        first_sign, first_text = pieces[0]
        out = ("-" if first_sign < 0 else "") + first_text
        for sign, text in pieces[1:]:
            out += (" - " if sign < 0 else " + ") + text
        return out

    def to_json(self) -> dict:
        return {
            "n": self.dim_n,
            "terms": [{"exp": list(e), "re": c.real, "im": c.imag} for e, c in self.terms],
        }

    @classmethod
    def from_json(cls, payload: Union[str, Mapping]) -> "OperatorSymbol":
        """Build a symbol from the exact JSON intake format."""
        data = json.loads(payload) if isinstance(payload, str) else payload
        try:
            dim_n = int(data["n"])
            if dim_n < 0:
                raise ValueError("n must be nonnegative")
            terms: TermMap = {}
            for entry in data["terms"]:
                exps = tuple(int(e) for e in entry["exp"])
                if len(exps) > dim_n + 1:
                    raise VariableIndexError(len(exps) - 1, dim_n)
                if len(exps) != dim_n + 1:
                    raise ValueError(f"exponent list {list(exps)} must have length {dim_n + 1}")
                coeff = complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
                terms[exps] = terms.get(exps, 0j) + coeff
        except (KeyError, TypeError) as e:
            logger.error(f"Malformed operator JSON: {e}")
            raise ValueError(f"malformed operator JSON: {e}") from e
        return cls.from_terms(dim_n, terms)

    def __str__(self) -> str:
        return self.to_text()


def _power_table(values: np.ndarray, max_power: int) -> List[np.ndarray]:
    table = [np.ones_like(values)]
    for _ in range(max_power):
        table.append(table[-1] * values)
    return table


def _format_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _format_coefficient(coeff: complex, has_monomial: bool) -> Tuple[int, str]:
    re_, im_ = coeff.real, coeff.imag
    if im_ == 0:
        sign = -1 if re_ < 0 else 1
        mag = abs(re_)
        if mag == 1 and has_monomial:
            return sign, ""
        return sign, _format_real(mag)
    if re_ == 0:
        sign = -1 if im_ < 0 else 1
        mag = abs(im_)
        return sign, "i" if mag == 1 else f"{_format_real(mag)}*i"
    op = "-" if im_ < 0 else "+"
    return 1, f"({_format_real(re_) if re_ >= 0 else '-' + _format_real(-re_)}{op}{_format_real(abs(im_))}*i)"


def _multiply_maps(a: TermMap, b: TermMap) -> TermMap:
    out: TermMap = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            out[key] = out.get(key, 0j) + ca * cb
    return out


# ---------------------------------------------------------------------------
# Grammar: variables d0, d1, …; imaginary unit i; decimal reals;
# + - * ^ (nonnegative integer exponents only); parentheses.

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>d\d+)|(?P<imag>i)|(?P<op>[-+*^()−]))"
)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if not match or match.end() == pos:
            raise OperatorSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = match.lastgroup
        value = match.group(kind)
        start = match.start(kind)
        if kind == 'op' and value == "−":
            value = "-"
        tokens.append((kind, value, start))
        pos = match.end()
    tokens.append(('end', '', len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dim_n: int):
        self.text = text
        self.dim_n = dim_n
        self.tokens = _tokenize(text)
        self.index = 0
        self.unit = (0,) * (dim_n + 1)

    def peek(self):
        return self.tokens[self.index]

    def take(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect_op(self, op: str):
        kind, value, pos = self.take()
        if kind != 'op' or value != op:
            raise OperatorSyntaxError(f"expected {op!r}", pos, self.text)

    def parse(self) -> TermMap:
        if self.peek()[0] == 'end':
            raise OperatorSyntaxError("empty operator expression", 0, self.text)
        result = self.expr()
        kind, value, pos = self.peek()
        if kind != 'end':
            raise OperatorSyntaxError(f"unexpected token {value!r}", pos, self.text)
        return result

    def expr(self) -> TermMap:
        result = self.term()
        while self.peek()[0] == 'op' and self.peek()[1] in '+-':
            _, op, _ = self.take()
            rhs = self.term()
            sign = 1 if op == '+' else -1
            for exps, coeff in rhs.items():
                result[exps] = result.get(exps, 0j) + sign * coeff
        return result

    def term(self) -> TermMap:
        result = self.unary()
        while self.peek()[0] == 'op' and self.peek()[1] == '*':
            self.take()
            result = _multiply_maps(result, self.unary())
        return result

    def unary(self) -> TermMap:
        kind, value, _ = self.peek()
        if kind == 'op' and value in '+-':
            self.take()
            operand = self.unary()
            if value == '-':
                return {e: -c for e, c in operand.items()}
            return operand
        return self.power()

    def power(self) -> TermMap:
        base = self.atom()
        if self.peek()[0] == 'op' and self.peek()[1] == '^':
            self.take()
            kind, value, pos = self.take()
            if kind != 'num' or not value.isdigit():
                raise OperatorSyntaxError("exponent must be a nonnegative integer literal", pos, self.text)
            result: TermMap = {self.unit: 1.0 + 0j}
            for _ in range(int(value)):
                result = _multiply_maps(result, base)
            return result
        return base

    def atom(self) -> TermMap:
        kind, value, pos = self.take()
        if kind == 'num':
            return {self.unit: complex(float(value))}
        if kind == 'imag':
            return {self.unit: 1j}
        if kind == 'var':
            index = int(value[1:])
            if index > self.dim_n:
                raise VariableIndexError(index, self.dim_n, pos)
            exps = [0] * (self.dim_n + 1)
            exps[index] = 1
            return {tuple(exps): 1.0 + 0j}
        if kind == 'op' and value == '(':
            inner = self.expr()
            self.expect_op(')')
            return inner
        if kind == 'end':
            raise OperatorSyntaxError("unexpected end of expression", pos, self.text)
        raise OperatorSyntaxError(f"unexpected token {value!r}", pos, self.text)


def parse_operator(text: str, n: int) -> OperatorSymbol:
    """
    Parse an operator expression such as "d0 - i*(d1+1)^2" into its expanded symbol.

    Args:
        text: operator expression in the d0/d1/…/i grammar
        n: number of spatial variables

    Returns:
        OperatorSymbol with all products expanded and like terms collected
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    terms = _Parser(text, n).parse()
    symbol = OperatorSymbol.from_terms(n, terms)
    logger.debug(f"Parsed {text!r} (n={n}) into {len(symbol.terms)} terms")
    return symbol


def infer_dimension(text: str) -> int:
    """Smallest n accepted by the text (largest variable index used, at least 0)."""
    indices = [int(m) for m in re.findall(r"d(\d+)", text)]
    return max([0] + indices)


def eval_symbol(P: OperatorSymbol, lam: complex, xi: Sequence[float]) -> complex:
    """Value of P(λ, iξ₁, …, iξₙ) at a single point."""
    xi = np.asarray(xi, dtype=np.float64).reshape(-1)
    return complex(P.evaluate(complex(lam), *xi))


# ---------------------------------------------------------------------------
# λ-slices


@dataclass(frozen=True)
class LambdaPolynomial:
    """
    Univariate polynomial Σ c_k λ^k obtained by freezing ξ.

    `coeffs` is ascending (c₀ … c_m) with exact trailing zeros removed; the zero
    polynomial keeps a single zero coefficient and `is_zero` set.
    """

    coeffs: np.ndarray
    frozen_xi: Tuple[float, ...] = ()

    def __post_init__(self):
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=np.complex128)).copy()
        nonzero = np.flatnonzero(coeffs)
        coeffs = coeffs[:nonzero[-1] + 1] if nonzero.size else np.zeros(1, dtype=np.complex128)
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)
        object.__setattr__(self, 'frozen_xi', tuple(float(x) for x in self.frozen_xi))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    @property
    def degree(self) -> int:
        """Degree after trimming; -1 marks the zero polynomial."""
        return -1 if self.is_zero else len(self.coeffs) - 1

    def __call__(self, lam):
        """Horner evaluation."""
        lam = np.asarray(lam, dtype=np.complex128)
        acc = np.zeros_like(lam)
        for c in self.coeffs[::-1]:
            acc = acc * lam + c
        return acc if acc.ndim else complex(acc)

    def derivative(self) -> "LambdaPolynomial":
        if len(self.coeffs) <= 1:
            return LambdaPolynomial(np.zeros(1), self.frozen_xi)
        return LambdaPolynomial(self.coeffs[1:] * np.arange(1, len(self.coeffs)), self.frozen_xi)

    def scale_at(self, lam) -> np.ndarray:
        """Σ|c_k|·max(1,|λ|)^k, the scale for root residuals."""
        radius = np.maximum(1.0, np.abs(np.asarray(lam)))
        acc = np.zeros_like(radius, dtype=np.float64)
        for c in self.coeffs[::-1]:
            acc = acc * radius + abs(c)
        return acc


def frequency_batch(xis, dim_n: int) -> np.ndarray:
    """Coerce frequencies to shape (B, n); n = 0 keeps the batch length."""
    xis = np.asarray(xis, dtype=np.float64)
    if dim_n == 0:
        return xis.reshape(xis.shape[0] if xis.ndim > 1 else 1, 0)
    return xis.reshape(-1, dim_n)


def slice_coefficients(P: OperatorSymbol, xis: np.ndarray) -> np.ndarray:
    """
    Coefficients Q_k(iξ) of all slices at once.

    Args:
        P: operator symbol
        xis: array of shape (B, n)

    Returns:
        Complex array of shape (B, m+1), ascending in the power of λ
    """
    xis = frequency_batch(xis, P.dim_n)
    out = np.zeros((xis.shape[0], P.lambda_degree + 1), dtype=np.complex128)
    if P.is_zero:
        return out
    ixi = 1j * xis
    for exps, coeff in P.terms:
        value = np.full(xis.shape[0], coeff, dtype=np.complex128)
        for k, e in enumerate(exps[1:]):
            if e:
                value = value * ixi[:, k] ** e
        out[:, exps[0]] += value
    return out


def lambda_slice(P: OperatorSymbol, xi: Sequence[float]) -> LambdaPolynomial:
    """The λ-polynomial P(λ, iξ) with coefficients Q_k(iξ) for a fixed real ξ."""
    xi = np.asarray(xi, dtype=np.float64).reshape(-1)
    if xi.size != P.dim_n:
        raise ValueError(f"expected {P.dim_n} spatial frequencies, got {xi.size}")
    coeffs = slice_coefficients(P, xi.reshape(1, -1))[0]
    return LambdaPolynomial(coeffs, tuple(xi))


# ---------------------------------------------------------------------------
# Gaussian-Hermite test functions


@lru_cache(maxsize=128)
def _hermite_support(order: int) -> float:
    """Largest |u| where |He_n(u)e^{-u²/2}| still reaches SUPPORT_LEVEL of its maximum."""
    u = np.linspace(0.0, 12.0 + 2.0 * math.sqrt(order + 1.0), 24001)
    g = np.abs(hermite_e.hermeval(u, [0.0] * order + [1.0]) * np.exp(-0.5 * u * u))
    above = np.flatnonzero(g >= SUPPORT_LEVEL * g.max())
    return float(u[above[-1]])


def _hermite_factor(order: int, u: np.ndarray) -> np.ndarray:
    return hermite_e.hermeval(u, [0.0] * order + [1.0]) * np.exp(-0.5 * u * u)


@dataclass(frozen=True)
class TestFunction:
    """
    amplitude · Π_k He_{n_k}((x_k − c_k)/w_k) · exp(−(x_k − c_k)²/(2w_k²)).

    Every derivative is again of this form (∂ₖ raises n_k by one and multiplies
    by −1/w_k), and the Fourier transform is entire, so the shifted-contour
    pairing formula can evaluate it at complex frequencies.
    """

    __test__ = False

    center: Tuple[float, ...]
    width: Tuple[float, ...]
    orders: Tuple[int, ...] = ()
    amplitude: complex = 1.0
    family: str = "gaussian-hermite"

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        width = tuple(float(w) for w in (self.width if np.ndim(self.width) else [self.width] * len(center)))
        orders = tuple(int(k) for k in self.orders) if self.orders else (0,) * len(center)
        if len(width) != len(center) or len(orders) != len(center):
            raise ValueError("center, width and orders must have the same length")
        if any(w <= 0 for w in width):
            raise ValueError("test-function widths must be strictly positive")
        if any(k < 0 for k in orders):
            raise ValueError("Hermite orders must be nonnegative")
        if self.family != "gaussian-hermite":
            raise ValueError(f"unknown test-function family {self.family}")
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'width', width)
        object.__setattr__(self, 'orders', orders)
        object.__setattr__(self, 'amplitude', complex(self.amplitude))

    @classmethod
    def gaussian(cls, center: Sequence[float], width: Union[float, Sequence[float]] = 1.0,
                 amplitude: complex = 1.0) -> "TestFunction":
        return cls(tuple(center), width, (), amplitude)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def components(self) -> Tuple["TestFunction", ...]:
        return (self,)

    def value(self, points) -> np.ndarray:
        """φ at points of shape (..., 1+n)."""
        points = np.asarray(points, dtype=np.float64)
        out = np.full(points.shape[:-1], self.amplitude, dtype=np.complex128)
        for k in range(self.dim):
            u = (points[..., k] - self.center[k]) / self.width[k]
            out = out * _hermite_factor(self.orders[k], u)
        return out if out.ndim else complex(out)

    def derivative(self, alpha: Sequence[int]) -> "TestFunction":
        factor = 1.0
        for a, w in zip(alpha, self.width):
            factor *= (-1.0 / w) ** a
        orders = tuple(k + a for k, a in zip(self.orders, alpha))
        return TestFunction(self.center, self.width, orders, self.amplitude * factor)

    def apply(self, P: OperatorSymbol, sign_flip: bool = False) -> "TestSeries":
        """Exact expansion of P(±∂₀, …, ±∂ₙ)φ."""
        if P.dim_n + 1 != self.dim:
            raise ValueError(f"operator acts on {P.dim_n + 1} variables, test function has {self.dim}")
        parts = []
        for exps, coeff in P.terms:
            sign = (-1.0) ** sum(exps) if sign_flip else 1.0
            parts.append(self.derivative(exps).scaled(coeff * sign))
        return TestSeries(tuple(parts), self.dim)

    def fourier(self, zeta) -> np.ndarray:
        """φ̂(ζ) = ∫ e^{−i x·ζ} φ(x) dx for complex ζ of shape (..., 1+n)."""
        zeta = np.asarray(zeta, dtype=np.complex128)
        out = np.full(zeta.shape[:-1], self.amplitude, dtype=np.complex128)
        for k in range(self.dim):
            w = self.width[k]
            z = zeta[..., k]
            kappa = w * z
            out = out * (w * math.sqrt(2.0 * math.pi) * np.exp(-1j * self.center[k] * z - 0.5 * kappa * kappa)
                         * (-1j * kappa) ** self.orders[k])
        return out

    def support_radius(self) -> np.ndarray:
        """Per-axis effective radius around the center (|φ| < 1e−16·max outside)."""
        return np.array([w * _hermite_support(k) for w, k in zip(self.width, self.orders)])

    def reach(self) -> float:
        return float(np.max(np.abs(self.center) + self.support_radius()))

    def scaled(self, factor: complex) -> "TestFunction":
        return TestFunction(self.center, self.width, self.orders, self.amplitude * factor)

    def __mul__(self, factor: complex) -> "TestFunction":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __add__(self, other: Union["TestFunction", "TestSeries"]) -> "TestSeries":
        return TestSeries(self.components + other.components, self.dim)


@dataclass(frozen=True)
class TestSeries:
    """Finite linear combination of Gaussian-Hermite functions."""

    __test__ = False

    parts: Tuple[TestFunction, ...]
    dim: int

    @property
    def components(self) -> Tuple[TestFunction, ...]:
        return self.parts

    def value(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        out = np.zeros(points.shape[:-1], dtype=np.complex128)
        for part in self.parts:
            out = out + part.value(points)
        return out if out.ndim else complex(out)

    def fourier(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=np.complex128)
        out = np.zeros(zeta.shape[:-1], dtype=np.complex128)
        for part in self.parts:
            out = out + part.fourier(zeta)
        return out

    def apply(self, P: OperatorSymbol, sign_flip: bool = False) -> "TestSeries":
        parts: Tuple[TestFunction, ...] = ()
        for part in self.parts:
            parts += part.apply(P, sign_flip).parts
        return TestSeries(parts, self.dim)

    def support_radius(self) -> np.ndarray:
        if not self.parts:
            return np.zeros(self.dim)
        return np.max([p.support_radius() for p in self.parts], axis=0)

    def reach(self) -> float:
        if not self.parts:
            return 0.0
        return max(p.reach() for p in self.parts)

    @property
    def width(self) -> Tuple[float, ...]:
        if not self.parts:
            return (1.0,) * self.dim
        return tuple(np.min([p.width for p in self.parts], axis=0))

    def scaled(self, factor: complex) -> "TestSeries":
        return TestSeries(tuple(p.scaled(factor) for p in self.parts), self.dim)

    def __mul__(self, factor: complex) -> "TestSeries":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __add__(self, other: Union[TestFunction, "TestSeries"]) -> "TestSeries":
        return TestSeries(self.parts + other.components, self.dim)


AnyTestFunction = Union[TestFunction, TestSeries]


def apply_operator(P: OperatorSymbol, sign_flip: bool, phi: AnyTestFunction, point) -> complex:
    """
    [P(±∂₀, …, ±∂ₙ)φ](point) from the closed-form Hermite derivatives.

    Args:
        P: operator symbol
        sign_flip: True evaluates P(−∂)φ (the adjoint action used in pairings)
        phi: test function or series
        point: (1+n)-vector, or an array of points of shape (..., 1+n)

    Returns:
        Complex value (array for an array of points)
    """
    return phi.apply(P, sign_flip).value(point)


def default_test_suite(dim: int) -> List[TestFunction]:
    """Five Gaussians near the origin used by the delta-property check."""
    base = [
        ((0.0,), 0.6),
        ((0.3,), 0.5),
        ((0.5,), 0.7),
        ((-0.2,), 0.4),
        ((0.8,), 0.9),
    ]
    spatial = [0.0, 0.2, -0.3, 0.1, 0.4]
    suite = []
    for (t,), w in base:
        idx = len(suite)
        center = (t,) + tuple(spatial[(idx + k) % len(spatial)] for k in range(dim - 1))
        suite.append(TestFunction.gaussian(center, w))
    return suite

# tests/test_root_engine.py
import math

import numpy as np
import pytest

from poly_core import LambdaPolynomial, parse_operator
from root_engine import (
    KIND_ALL_LAMBDA,
    KIND_FINITE,
    KIND_NO_ROOTS,
    RootConvergenceError,
    ZeroPolynomialError,
    map_batches,
    match_roots,
    roots,
    slice_roots_batch,
    spectral_abscissa,
    spectral_abscissa_batch,
)


def companion_roots(coeffs):
    """Reference roots from numpy's companion-matrix solver (ascending input)."""
    return np.roots(np.asarray(coeffs)[::-1])


class TestRoots:

    def test_known_roots(self):
        """(λ−1)(λ−2)(λ+3)"""
        found = roots(LambdaPolynomial([6, -7, 0, 1]))
        np.testing.assert_allclose(np.sort_complex(found.roots), [-3, 1, 2], atol=1e-12)
        assert found.deflated_degree == 3
        assert found.residual_bound <= 1e-9

    @pytest.mark.parametrize("degree", [2, 3, 4, 5, 6, 8])
    def test_random_against_companion(self, rng, degree):
        """Random complex polynomials agree with the companion oracle"""
        for _ in range(20):
            coeffs = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
            found = roots(LambdaPolynomial(coeffs))
            _, distance = match_roots(found.roots, companion_roots(coeffs))
            assert distance <= 1e-7 * (1.0 + np.max(np.abs(found.roots)))

    @pytest.mark.slow
    def test_unit_disc_batch(self, rng):
        """1000 polynomials of degree ≤ 12 with coefficients in the unit disc"""
        worst = 0.0
        for _ in range(1000):
            degree = int(rng.integers(1, 13))
            radius = np.sqrt(rng.uniform(size=degree + 1))
            coeffs = radius * np.exp(2j * np.pi * rng.uniform(size=degree + 1))
            found = roots(LambdaPolynomial(coeffs))
            _, distance = match_roots(found.roots, companion_roots(coeffs))
            worst = max(worst, distance / (1.0 + np.max(np.abs(found.roots))))
        assert worst <= 1e-8

    def test_residuals_small(self, rng):
        """Every returned root has a tiny relative residual"""
        coeffs = rng.normal(size=7) + 1j * rng.normal(size=7)
        p = LambdaPolynomial(coeffs)
        found = roots(p)
        residual = np.abs(p(found.roots)) / p.scale_at(found.roots)
        assert np.all(residual <= 1e-9)

    def test_zero_roots_deflated(self):
        """Exact zero roots are split off before iterating"""
        found = roots(LambdaPolynomial([0, 0, -4, 1]))
        np.testing.assert_allclose(np.sort_complex(found.roots), [0, 0, 4], atol=1e-12)

    def test_constant_has_no_roots(self):
        """A nonzero constant has no roots"""
        found = roots(LambdaPolynomial([2.0]))
        assert found.roots.size == 0
        assert found.deflated_degree == 0

    def test_zero_polynomial(self):
        """The zero polynomial is refused"""
        with pytest.raises(ZeroPolynomialError):
            roots(LambdaPolynomial([0.0, 0.0]))

    def test_scaling_invariance(self, rng):
        """Multiplying all coefficients does not move the roots"""
        coeffs = rng.normal(size=5) + 1j * rng.normal(size=5)
        base = roots(LambdaPolynomial(coeffs)).roots
        scaled = roots(LambdaPolynomial(1e6 * coeffs)).roots
        _, distance = match_roots(base, scaled)
        assert distance <= 1e-9

    def test_convergence_failure(self, mocker):
        """A residual above tolerance raises with the best iterate"""
        mocker.patch('root_engine._aberth', return_value=(np.array([[5.0 + 0j]]), np.array([1.0])))
        with pytest.raises(RootConvergenceError) as info:
            roots(LambdaPolynomial([1.0, 1.0]))
        assert info.value.residual == 1.0
        np.testing.assert_allclose(info.value.best, [5.0])


class TestSpectralAbscissa:

    def test_heat(self):
        """a(2) = −4 for the heat operator"""
        value = spectral_abscissa(parse_operator("d0 - d1^2", 1), [2.0])
        assert value.kind == KIND_FINITE
        assert abs(value.value + 4.0) < 1e-12

    def test_no_roots(self):
        """Degenerate slice without roots"""
        value = spectral_abscissa(parse_operator("d1*d0 + 1", 1), [0.0])
        assert value.kind == KIND_NO_ROOTS
        assert value.value == -math.inf

    def test_all_lambda(self):
        """Vanishing slice makes every λ a root"""
        value = spectral_abscissa(parse_operator("d1", 1), [0.0])
        assert value.kind == KIND_ALL_LAMBDA
        assert value.value == math.inf

    def test_hormander(self):
        """Root λ = −2ξ + i(1−ξ²)"""
        value = spectral_abscissa(parse_operator("d0 - i*(d1+1)^2", 1), [-3.0])
        assert abs(value.value - 6.0) < 1e-10

    def test_batch_matches_single(self, rng):
        """Batched evaluation equals one-by-one evaluation"""
        P = parse_operator("d0^2 + d0 - i*d1^3 + d1", 1)
        xis = rng.uniform(-5, 5, size=(40, 1))
        batch = spectral_abscissa_batch(P, xis)
        single = [spectral_abscissa(P, x).value for x in xis]
        np.testing.assert_allclose(batch, single, rtol=1e-10, atol=1e-12)

    def test_batch_mixed_kinds(self):
        """Batches mix finite, no_roots and all_lambda rows"""
        P = parse_operator("d1*d0 + d1", 1)
        result = slice_roots_batch(P, np.array([[0.0], [2.0]]))
        assert list(result.kinds) == [KIND_ALL_LAMBDA, KIND_FINITE]
        np.testing.assert_allclose(result.abscissa, [math.inf, -1.0])

    def test_thread_count_does_not_change_results(self, rng):
        """Chunked threading preserves values and order"""
        P = parse_operator("d0^3 - d1^2*d0 + i*d1", 1)
        xis = rng.uniform(-10, 10, size=(9000, 1))
        np.testing.assert_array_equal(spectral_abscissa_batch(P, xis, threads=1),
                                      spectral_abscissa_batch(P, xis, threads=4))

    def test_two_spatial_variables(self):
        """n = 2 heat: a(ξ) = −|ξ|²"""
        P = parse_operator("d0 - d1^2 - d2^2", 2)
        values = spectral_abscissa_batch(P, np.array([[1.0, 2.0], [0.0, 0.5]]))
        np.testing.assert_allclose(values, [-5.0, -0.25], atol=1e-12)


class TestHelpers:

    def test_map_batches_order(self):
        """Chunks come back in index order"""
        items = np.arange(10)
        assert map_batches(lambda c: int(c.sum()), items, threads=3, chunk=3) == [3, 12, 21, 9]

    def test_match_roots_greedy(self):
        """Nearest-neighbour pairing"""
        perm, distance = match_roots([1, 2, 3], [3.0001, 1, 2])
        assert list(perm) == [1, 2, 0]
        assert abs(distance - 1e-4) < 1e-9

    def test_match_roots_tie(self):
        """Equidistant candidates fall back to the assignment solver"""
        perm, distance = match_roots([1.0, -1.0], [0.0, 0.0])
        assert sorted(perm) == [0, 1]
        assert distance == 1.0

    def test_match_roots_shape(self):
        """Root sets of different size cannot be matched"""
        with pytest.raises(ValueError):
            match_roots([1, 2], [1])

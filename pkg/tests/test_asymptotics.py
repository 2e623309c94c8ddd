# tests/test_asymptotics.py
import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from asymptotics import (
    MINUS_INF,
    PLUS_INF,
    Direction,
    NoLambdaVariableError,
    PuiseuxBranch,
    branch_residual,
    classify_branch,
    degenerate_frequencies,
    is_characteristic,
    newton_polygon,
    petrovskii_verdict_exact_1d,
    puiseux_branches,
    zero_slice_frequencies,
)
from poly_core import parse_operator


class TestDirection:

    def test_parsing(self):
        """Strings, infinities and tuples all describe directions"""
        assert Direction.of('+inf') is PLUS_INF
        assert Direction.of('-inf') is MINUS_INF
        assert Direction.of(-math.inf) is MINUS_INF
        assert Direction.of((0.5, -1)) == Direction(0.5, -1)

    def test_unknown(self):
        """Finite floats and other strings are rejected"""
        with pytest.raises(ValueError):
            Direction.of(3.0)
        with pytest.raises(ValueError):
            Direction.of('sideways')

    def test_local_parametrisation(self):
        """ξ = ξ₀ + side/s and back"""
        d = Direction(2.0, -1)
        assert d.frequency(4.0) == 1.75
        assert d.parameter(1.75) == 4.0
        assert d.label == "2-"


class TestNewtonPolygon:

    def test_heat(self):
        """λ + ξ²: one edge of slope 2"""
        edges = newton_polygon(parse_operator("d0 - d1^2", 1), '+inf')
        assert [e.slope for e in edges] == [Fraction(2)]
        assert edges[0].width == 1

    def test_cubic_symbol(self):
        """λ² = −iξ³ gives exponent 3/2"""
        edges = newton_polygon(parse_operator("d0^2 - d1^3", 1), '+inf')
        assert [e.slope for e in edges] == [Fraction(3, 2)]
        assert edges[0].width == 2

    def test_degenerate(self):
        """iξλ + 1: λ = i/ξ decays with exponent −1"""
        edges = newton_polygon(parse_operator("d1*d0 + 1", 1), '+inf')
        assert [e.slope for e in edges] == [Fraction(-1)]

    def test_two_edges(self):
        """λ² + λ·ξ³ + ξ: slopes 3 and −2"""
        edges = newton_polygon(parse_operator("d0^2 + i*d0*d1^3 - i*d1", 1), '+inf')
        assert sorted(e.slope for e in edges) == [Fraction(-2), Fraction(3)]

    def test_requires_lambda(self):
        """Pure-space operators have no λ-roots"""
        with pytest.raises(NoLambdaVariableError):
            newton_polygon(parse_operator("d1^2", 1))

    def test_requires_one_variable(self):
        """Polygon analysis is for n = 1"""
        with pytest.raises(ValueError):
            newton_polygon(parse_operator("d0 - d1^2 - d2^2", 2))


class TestPuiseux:

    def test_terminating_series(self):
        """λ + iξ² − 1 has the exact root −iξ² + 1"""
        branches = puiseux_branches(parse_operator("d0 - i*d1^2 - 1", 1), '+inf')
        assert len(branches) == 1
        b = branches[0]
        assert b.exact
        assert b.ramification == 1
        assert [e for e, _ in b.terms] == [Fraction(2), Fraction(0)]
        assert abs(b.terms[0][1] + 1j) < 1e-10
        assert abs(b.terms[1][1] - 1.0) < 1e-10

    def test_hormander_plus(self):
        """λ = −iξ² − 2ξ + i as ξ → +∞ keeps Re λ bounded"""
        b, = puiseux_branches(parse_operator("d0 - i*(d1+1)^2", 1), '+inf')
        assert [e for e, _ in b.terms] == [Fraction(2), Fraction(1), Fraction(0)]
        np.testing.assert_allclose([c for _, c in b.terms], [-1j, -2, 1j], atol=1e-10)
        verdict = classify_branch(b)
        assert verdict.status == 'bounded_above'
        assert verdict.limit == -math.inf

    def test_hormander_minus(self):
        """The same root escapes to Re λ → +∞ as ξ → −∞"""
        b, = puiseux_branches(parse_operator("d0 - i*(d1+1)^2", 1), '-inf')
        assert classify_branch(b).status == 'unbounded_above'

    def test_ramified_branch(self):
        """λ² = −iξ³ is one branch with two sheets"""
        branches = puiseux_branches(parse_operator("d0^2 - d1^3", 1), '+inf')
        assert len(branches) == 1
        b = branches[0]
        assert b.ramification == 2
        assert b.leading_exponent == Fraction(3, 2)
        assert abs(b.terms[0][1] ** 2 + 1j) < 1e-10
        assert classify_branch(b).status == 'unbounded_above'

    def test_wave_two_branches(self):
        """λ = ±iξ, both purely imaginary"""
        branches = puiseux_branches(parse_operator("d0^2 - d1^2", 1), '+inf')
        assert len(branches) == 2
        assert sum(b.ramification * b.multiplicity for b in branches) == 2
        for b in branches:
            assert b.leading_exponent == 1
            assert classify_branch(b).status == 'bounded_above'

    def test_local_direction(self):
        """Next to ξ₀ = 0 the degenerate root i/ξ grows like s"""
        branches = puiseux_branches(parse_operator("d1*d0 + 1", 1), Direction(0.0, 1))
        b, = branches
        assert b.leading_exponent == 1
        assert classify_branch(b).status == 'bounded_above'

    def test_branch_count_matches_degree(self):
        """Σ ramification·multiplicity equals the λ-degree at ±∞"""
        P = parse_operator("d0^3 - d1^2*d0 + i*d1 + 2", 1)
        for direction in ('+inf', '-inf'):
            branches = puiseux_branches(P, direction)
            assert sum(b.ramification * b.multiplicity for b in branches) == 3

    def test_bad_depth(self):
        """Depth must be positive"""
        with pytest.raises(ValueError):
            puiseux_branches(parse_operator("d0 - d1^2", 1), depth=0)

    def test_partial_sum_residual_decreases(self):
        """Truncated series for λ² + λ + ξ² approach a root as ξ grows"""
        P = parse_operator("d0^2 + d0 - d1^2", 1)
        branches = puiseux_branches(P, '+inf', depth=3)
        assert len(branches) == 2
        for b in branches:
            assert b.needs_deeper
            residuals = [branch_residual(P, b, xi) for xi in (16.0, 64.0, 256.0, 1024.0)]
            assert all(later < earlier for earlier, later in zip(residuals, residuals[1:]))
            assert residuals[-1] < 1e-4
            verdict = classify_branch(b)
            assert verdict.status == 'bounded_above'
            assert abs(verdict.limit + 0.5) < 1e-10

    def test_double_characteristic_root(self):
        """(λ+ξ)² − λ: the double leading root −ξ splits into a two-sheet branch ±i·ξ^½"""
        P = parse_operator("d0^2 - 2*i*d0*d1 - d1^2 - d0", 1)
        b, = puiseux_branches(P, '+inf')
        assert b.ramification == 2
        assert b.multiplicity == 1
        assert [e for e, _ in b.terms][:2] == [Fraction(1), Fraction(1, 2)]
        assert abs(b.terms[0][1] + 1.0) < 1e-12
        assert abs(abs(b.terms[1][1]) - 1.0) < 1e-10
        assert classify_branch(b).status == 'bounded_above'

    def test_lost_sheets_kept_as_truncated(self, mocker):
        """Sheets the edge step cannot recover stay as undecided partial branches"""
        mocker.patch('asymptotics._edge_roots', return_value=[])
        b, = puiseux_branches(parse_operator("d0^2 - d1^2", 1), '+inf')
        assert b.terms == ()
        assert b.multiplicity == 2
        assert classify_branch(b).status == 'needs_deeper'


class TestClassifyBranch:

    def test_positive_real_leading_term(self):
        """Positive real coefficient at a positive exponent is unbounded"""
        b = PuiseuxBranch(PLUS_INF, 1, ((Fraction(1), 2.0 + 0j),), exact=True)
        assert classify_branch(b).status == 'unbounded_above'

    def test_constant_limit(self):
        """Imaginary growth with a real constant term has that limit"""
        b = PuiseuxBranch(PLUS_INF, 1, ((Fraction(2), -3j), (Fraction(0), 0.25 + 1j)), exact=True)
        verdict = classify_branch(b)
        assert verdict.status == 'bounded_above'
        assert verdict.limit == 0.25

    def test_incomplete_series(self):
        """A truncated series still inside positive exponents is undecided"""
        b = PuiseuxBranch(PLUS_INF, 1, ((Fraction(2), 1j),), needs_deeper=True)
        assert classify_branch(b).status == 'needs_deeper'

    def test_twisted_sheet(self):
        """Only the twisted sheet of a ramified branch escapes"""
        c = cmath.exp(0.75j * math.pi)
        b = PuiseuxBranch(PLUS_INF, 2, ((Fraction(1, 2), c),), exact=True)
        assert c.real < 0
        verdict = classify_branch(b)
        assert verdict.status == 'unbounded_above'
        assert verdict.sheet == 1


class TestStructure:

    def test_zero_slices(self):
        """iξ(λ+1) vanishes identically at ξ = 0"""
        assert zero_slice_frequencies(parse_operator("d1*d0 + d1", 1)) == pytest.approx([0.0], abs=1e-9)
        assert zero_slice_frequencies(parse_operator("d1", 1)) == pytest.approx([0.0], abs=1e-9)
        assert zero_slice_frequencies(parse_operator("d0 - d1^2", 1)) == []

    def test_degenerate_frequencies(self):
        """Real zeros of the leading coefficient"""
        assert degenerate_frequencies(parse_operator("d1*d0 + 1", 1)) == pytest.approx([0.0], abs=1e-9)
        assert degenerate_frequencies(parse_operator("(d1^2 - 4)*d0 + 1", 1)) == []
        assert degenerate_frequencies(parse_operator("(d1^2 - 1)*d0^2 + 1", 1)) == []
        assert degenerate_frequencies(parse_operator("(d1^2 + 1)*d0^2 + 1", 1)) == pytest.approx([-1.0, 1.0])

    @pytest.mark.parametrize("text,expected", [
        ("d0 - d1^2", True),
        ("d0 - i*d1^2", True),
        ("d0^2 - d1^2", False),
        ("d0 - 3", False),
        ("d0 + d1", False),
        ("d1", True),
    ])
    def test_characteristic(self, text, expected):
        """x₀ = 0 is characteristic when the principal part lacks ∂₀^d"""
        assert is_characteristic(parse_operator(text, 1)) is expected


class TestExactVerdict:

    @pytest.mark.parametrize("name", [
        'heat', 'backward_heat', 'wave', 'schrodinger', 'shifted', 'shifted_schrodinger',
        'transport', 'degenerate', 'pure_space', 'hormander', 'cubic', 'constant',
    ])
    def test_corpus(self, corpus, symbols, name):
        """Classification and ω₀ on the regression corpus"""
        _, _, classification, omega0 = corpus[name]
        verdict = petrovskii_verdict_exact_1d(symbols[name])
        assert verdict.method == 'exact_1d'
        assert verdict.classification == classification
        if math.isfinite(omega0):
            assert abs(verdict.omega0 - omega0) <= 1e-6
        else:
            assert verdict.omega0 == omega0

    def test_unbounded_witness(self, symbols):
        """Unbounded verdicts carry a witness branch"""
        verdict = petrovskii_verdict_exact_1d(symbols['hormander'])
        witness, = verdict.evidence_of('witness')
        assert witness.data['direction'] == '-inf'
        assert witness.data['branch_re_lambda'][-1] > witness.data['branch_re_lambda'][0]

    def test_zero_slice_evidence(self, symbols):
        """A vanishing slice decides immediately"""
        verdict = petrovskii_verdict_exact_1d(symbols['pure_space'])
        assert verdict.evidence_of('zero_slice')

    def test_report_dict(self, symbols):
        """to_dict exposes the report fields"""
        payload = petrovskii_verdict_exact_1d(symbols['heat']).to_dict()
        assert set(payload) == {'classification', 'omega0', 'omega0_error', 'method', 'evidence'}

    def test_requires_one_variable(self):
        """The exact method is limited to n = 1"""
        with pytest.raises(ValueError):
            petrovskii_verdict_exact_1d(parse_operator("d0 - d1^2 - d2^2", 2))

    def test_double_characteristic_root_unbounded(self):
        """(λ+ξ)² − λ has Re λ ≈ |ξ| as ξ → −∞"""
        verdict = petrovskii_verdict_exact_1d(parse_operator("d0^2 - 2*i*d0*d1 - d1^2 - d0", 1))
        assert verdict.classification == 'unbounded'
        assert verdict.omega0 == math.inf
        witness, = verdict.evidence_of('witness')
        assert witness.data['direction'] == '-inf'

    def test_missing_sheets_undetermined(self, mocker):
        """A direction with fewer expanded sheets than the λ-degree is never called bounded"""
        mocker.patch('asymptotics._expand')
        verdict = petrovskii_verdict_exact_1d(parse_operator("d0 - d1^2", 1))
        assert verdict.classification == 'undetermined'
        record, = verdict.evidence_of('incomplete_branches')
        assert record.data['expected'] == 1
        assert record.data['sheets'] == 0

# tests/test_cli.py
import json

import numpy as np
import pytest
from typer.testing import CliRunner

import cli
from cli import app, json_safe
from fundsol import GridField, GridSpec
from gfield import read_gfield, write_gfield


def run(*args):
    return CliRunner().invoke(app, [str(a) for a in args])


def read_report(path):
    return json.loads(path.read_text(encoding='utf-8'))


class TestAnalyze:

    @pytest.fixture(autouse=True)
    def isolated(self, clean_env):
        """No EVOLV_* variables leak into the commands"""

    def test_heat_bounded(self, tmp_path):
        """Heat: exit 0, bounded, ω₀ = 0 from the exact method"""
        out = tmp_path / "report.json"
        result = run("analyze", "d0 - d1^2", "--budget", 500, "--out", out)
        assert result.exit_code == 0
        report = read_report(out)
        assert report['schema_id'] == "evolv.analysis_report.v1"
        assert report['classification'] == 'bounded'
        assert abs(report['omega0']) <= 1e-6
        assert report['exact_1d']['method'] == 'exact_1d'
        assert report['characteristic'] is True
        assert report['log_region']['violations'] == 0
        assert 'timings' not in report

    def test_hormander_unbounded(self, tmp_path):
        """Unbounded operators exit with code 2"""
        out = tmp_path / "report.json"
        result = run("analyze", "d0 - i*(d1+1)^2", "--budget", 500, "--out", out)
        assert result.exit_code == 2
        assert read_report(out)['omega0'] == "inf"

    def test_json_intake(self, tmp_path):
        """Operators can be given as JSON terms"""
        source = tmp_path / "op.json"
        source.write_text(json.dumps({"n": 1, "terms": [{"exp": [0, 1], "re": 1}]}), encoding='utf-8')
        out = tmp_path / "report.json"
        result = run("analyze", "--json", source, "--budget", 500, "--out", out)
        assert result.exit_code == 2
        assert read_report(out)['sigma_curve'] is None

    def test_syntax_error(self):
        """Parse errors exit with code 1 and a diagnostic"""
        result = run("analyze", "d0 + * d1")
        assert result.exit_code == 1
        assert "error:" in result.output

    def test_missing_operator(self):
        """Either an expression or --json is required"""
        assert run("analyze").exit_code == 1

    def test_deterministic(self, tmp_path):
        """Two runs with the same settings write identical reports"""
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        run("analyze", "d0^2 - d1^2 + d0", "--budget", 500, "--out", first)
        run("analyze", "d0^2 - d1^2 + d0", "--budget", 500, "--out", second)
        assert first.read_bytes() == second.read_bytes()

    def test_curve_csv_and_charts(self, tmp_path):
        """The σ(r) curve and charts are written on request"""
        csv_path = tmp_path / "curve.csv"
        result = run("analyze", "d0 - d1^2", "--budget", 500, "--out", tmp_path / "r.json",
                     "--curve-csv", csv_path, "--charts", tmp_path / "charts")
        assert result.exit_code == 0
        assert csv_path.read_text(encoding='utf-8').startswith("r,sigma,lambda_re,lambda_im,xi_0")
        assert (tmp_path / "charts" / "sigma_curve.svg").exists()

    def test_two_variables_skip_exact(self, tmp_path, mocker):
        """For n = 2 the numeric verdict is primary"""
        exact = mocker.spy(cli, 'petrovskii_verdict_exact_1d')
        out = tmp_path / "report.json"
        result = run("analyze", "d0 - d1^2 - d2^2", "--budget", 500, "--out", out)
        assert result.exit_code == 0
        assert exact.call_count == 0
        report = read_report(out)
        assert report['exact_1d'] is None
        assert report['numeric']['method'] == 'numeric'
        assert report['classification'] == report['numeric']['classification'] == 'bounded'


class TestFundsol:

    @pytest.fixture(autouse=True)
    def isolated(self, clean_env):
        """No EVOLV_* variables leak into the commands"""

    def test_sigma_on_spectrum(self, tmp_path):
        """σ = 0 on the heat spectrum exits with code 4"""
        result = run("fundsol", "d0 - d1^2", "--sigma", 0, "--grid-points", 64,
                     "--field", tmp_path / "N.gfield", "--out", tmp_path / "r.json")
        assert result.exit_code == 4
        assert not (tmp_path / "N.gfield").exists()

    def test_forced_sigma_below_bound(self, tmp_path):
        """A forced σ at or below ω₀ exits with code 4 even when |P| never vanishes on the line"""
        out = tmp_path / "r.json"
        result = run("fundsol", "d0 - 3", "--sigma", 2, "--pair-only", "--budget", 500, "--out", out)
        assert result.exit_code == 4
        assert "not above omega0" in result.output
        assert not out.exists()

    def test_forced_sigma_on_unbounded(self, tmp_path):
        """Every shift lies inside the spectrum of an unbounded operator"""
        result = run("fundsol", "d0 + d1^2", "--sigma", 50, "--pair-only", "--budget", 500,
                     "--out", tmp_path / "r.json")
        assert result.exit_code == 4

    def test_forced_sigma_above_bound(self, tmp_path):
        """A forced σ above ω₀ runs and is marked as forced"""
        out = tmp_path / "r.json"
        result = run("fundsol", "d0 - 3", "--sigma", 5, "--pair-only", "--budget", 500, "--out", out)
        assert result.exit_code == 0
        report = read_report(out)
        assert report['fundsol']['forced'] is True
        assert report['fundsol']['sigma'] == pytest.approx(5.0)
        assert report['omega0'] == pytest.approx(3.0, abs=1e-6)

    def test_pair_only(self, tmp_path):
        """The pairing battery runs without a grid"""
        field = tmp_path / "N.gfield"
        out = tmp_path / "r.json"
        result = run("fundsol", "d0 - 3", "--pair-only", "--budget", 500, "--field", field, "--out", out)
        assert result.exit_code == 0
        assert not field.exists()
        section = read_report(out)['fundsol']
        assert section['grid'] is None
        assert section['sigma'] == pytest.approx(4.0)
        assert all(entry['passed'] for entry in section['delta'] + section['support'] + section['decay_checks'])

    def test_grid_written(self, tmp_path):
        """Full run writes N as a .gfield"""
        field = tmp_path / "N.gfield"
        out = tmp_path / "r.json"
        result = run("fundsol", "d0 - 3", "--budget", 500, "--grid-points", 256, "--field", field, "--out", out)
        assert result.exit_code == 0
        loaded = read_gfield(field)
        assert loaded.role == 'N'
        assert loaded.spec.sigma == pytest.approx(4.0)
        grid = read_report(out)['fundsol']['grid']
        assert grid['path'] == str(field)
        assert len(grid['slice']['x0']) == len(grid['slice']['abs_N'])

    def test_unbounded_refused(self, tmp_path):
        """Without --sigma an unbounded operator is refused"""
        result = run("fundsol", "d0 + d1^2", "--field", tmp_path / "N.gfield")
        assert result.exit_code == 2


class TestSolve:

    @pytest.fixture(autouse=True)
    def isolated(self, clean_env):
        """No EVOLV_* variables leak into the commands"""

    @pytest.fixture
    def spec(self):
        """Small heat grid"""
        return GridSpec(n=1, freq_extent=16, points_per_axis=64, sigma=1.0)

    def test_zero_rhs(self, spec, tmp_path):
        """Zero data gives the zero solution"""
        rhs = write_gfield(tmp_path / "F.gfield", GridField(spec, np.zeros((64, 64)), 'rhs'))
        out = tmp_path / "r.json"
        result = run("solve", "d0 - d1^2", "--rhs", rhs, "--field", tmp_path / "U.gfield", "--out", out)
        assert result.exit_code == 0
        report = read_report(out)
        assert report['solve']['max_abs'] == 0.0
        assert report['solve']['residual']['passed'] is True
        assert read_gfield(tmp_path / "U.gfield").role == 'solution'

    def test_rhs_before_zero(self, spec, tmp_path):
        """Data in x₀ < 0 exits with code 5"""
        field = GridField.sample(spec, lambda x: np.exp(-((x[..., 0] + 1.0) ** 2 + x[..., 1] ** 2) / 0.08))
        rhs = write_gfield(tmp_path / "F.gfield", field)
        result = run("solve", "d0 - d1^2", "--rhs", rhs, "--field", tmp_path / "U.gfield")
        assert result.exit_code == 5


class TestReportHelpers:

    def test_schema_command(self):
        """The published schema is printed"""
        result = run("schema")
        assert result.exit_code == 0
        assert json.loads(result.stdout)['$id'] == "evolv.analysis_report.v1"

    def test_json_safe(self):
        """Infinities, NaN and complex numbers have JSON forms"""
        assert json_safe({'a': float('inf'), 'b': float('-inf'), 'c': float('nan'), 'd': 1 + 2j}) == \
            {'a': "inf", 'b': "-inf", 'c': None, 'd': [1.0, 2.0]}
        assert json_safe(np.array([1.5])) == [1.5]

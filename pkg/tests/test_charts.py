# tests/test_charts.py
import json
import math

import pytest

from charts import curve_points_from_csv, render_report_charts
from petrovskii_numeric import SigmaCurve, SigmaSample


class TestCharts:

    @pytest.fixture
    def report(self):
        """Minimal report carrying data for all three charts"""
        return {
            'operator': {'text': "d0 - d1^2"},
            'sigma_curve': {'samples': [{'r': 1.0, 'sigma': None}, {'r': 2.0, 'sigma': 0.0},
                                        {'r': 4.0, 'sigma': 0.0}]},
            'fundsol': {
                'decay': [{'lambda': [1.0, 0.0], 'rate': -1.2, 'probes': [1.0, 2.0, 3.0],
                           'magnitudes': [0.3, 0.1, 0.03]}],
                'grid': {'slice': {'x0': [0.5, 1.0, 1.5], 'abs_N': [0.4, 0.28, 0.23]}},
            },
        }

    def test_all_charts_written(self, report, tmp_path):
        """Each section with data produces an SVG"""
        written = render_report_charts(report, tmp_path / "charts")
        assert sorted(p.name for p in written) == ['decay.svg', 'n_slice.svg', 'sigma_curve.svg']
        for path in written:
            assert "<svg" in path.read_text(encoding='utf-8')

    def test_missing_sections_skipped(self, tmp_path):
        """A report without fundamental-solution data only gets the σ(r) chart"""
        report = {'operator': {'text': "d0 - 3"}, 'sigma_curve': {'samples': [{'r': 8.0, 'sigma': 3.0}]}}
        written = render_report_charts(report, tmp_path)
        assert [p.name for p in written] == ['sigma_curve.svg']

    def test_report_from_file(self, report, tmp_path):
        """Charts can be regenerated from a saved report"""
        path = tmp_path / "report.json"
        path.write_text(json.dumps(report), encoding='utf-8')
        assert len(render_report_charts(path, tmp_path / "out")) == 3

    def test_curve_points_from_csv(self, tmp_path):
        """Empty σ fields read back as NaN"""
        curve = SigmaCurve((SigmaSample(1.0, None), SigmaSample(8.0, 3.0, 3.0 + 0j, (0.0,))), "test", 1)
        path = tmp_path / "sigma_curve.csv"
        path.write_text(curve.to_csv(), encoding='utf-8')
        points = curve_points_from_csv(path)
        assert points[1] == {'r': 8.0, 'sigma': 3.0}
        assert math.isnan(points[0]['sigma'])

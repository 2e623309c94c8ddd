"""
SVG line charts drawn only from report JSON or the σ(r) CSV, so every chart can
be regenerated later without rerunning an analysis.
"""
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)


def _as_float(value) -> float:
    if value is None:
        return math.nan
    if isinstance(value, str):
        return {'inf': math.inf, '-inf': -math.inf}.get(value, math.nan)
    return float(value)


def curve_points_from_csv(path: Union[str, Path]) -> List[Dict[str, float]]:
    frame = pd.read_csv(path)
    return [{'r': float(r), 'sigma': float(s)} for r, s in zip(frame['r'], frame['sigma'])]


def sigma_curve_chart(samples: Sequence[Mapping], path: Union[str, Path], title: str = "") -> Path:
    path = Path(path)
    radii = [_as_float(s['r']) for s in samples]
    sigmas = [_as_float(s['sigma']) for s in samples]
    plt.figure()
    plt.plot(radii, sigmas, marker="o", label="σ(r)")
    plt.xscale("log")
    plt.xlabel("r")
    plt.ylabel("σ(r)")
    plt.title(title or "sup Re λ over the ball of radius r")
    plt.legend()
    plt.tight_layout()
    plt.savefig(path, format="svg")
    plt.close()
    return path


def decay_chart(entries: Sequence[Mapping], path: Union[str, Path]) -> Path:
    path = Path(path)
    plt.figure()
    for entry in entries:
        lam = entry['lambda']
        rate = _as_float(entry['rate'])
        label = f"λ = {lam[0]:g}{lam[1]:+g}i, rate {rate:.3g}"
        plt.plot(entry['probes'], entry['magnitudes'], marker="o", label=label)
    plt.yscale("log")
    plt.xlabel("probe centre t")
    plt.ylabel("|⟨e_{−λ}N, φ_t⟩|")
    plt.title("decay of weighted pairings")
    plt.legend()
    plt.tight_layout()
    plt.savefig(path, format="svg")
    plt.close()
    return path


def slice_chart(slice_: Mapping, path: Union[str, Path]) -> Path:
    path = Path(path)
    plt.figure()
    plt.plot(slice_['x0'], slice_['abs_N'], label="|N(x₀, 0)|")
    plt.xlabel("x₀")
    plt.ylabel("|N|")
    plt.title("fundamental solution along the time axis")
    plt.legend()
    plt.tight_layout()
    plt.savefig(path, format="svg")
    plt.close()
    return path


def render_report_charts(report: Union[Mapping, str, Path], out_dir: Union[str, Path]) -> List[Path]:
    """Every chart the report has data for; returns the files written."""
    if not isinstance(report, Mapping):
        report = json.loads(Path(report).read_text(encoding='utf-8'))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    curve = report.get('sigma_curve')
    if curve and curve.get('samples'):
        written.append(sigma_curve_chart(curve['samples'], out_dir / "sigma_curve.svg",
                                         f"σ(r) for {report['operator']['text']}"))
    fundsol = report.get('fundsol') or {}
    if fundsol.get('decay'):
        written.append(decay_chart(fundsol['decay'], out_dir / "decay.svg"))
    grid = fundsol.get('grid') or {}
    if grid.get('slice'):
        written.append(slice_chart(grid['slice'], out_dir / "n_slice.svg"))
    logger.info(f"Wrote {len(written)} chart(s) to {out_dir}")
    return written

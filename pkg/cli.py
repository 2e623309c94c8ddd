import json
import logging
import math
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

import jsonschema
import numpy as np
import typer
from pydantic import BaseModel, ConfigDict
from rich.console import Console

from asymptotics import PetrovskiiVerdict, is_characteristic, petrovskii_verdict_exact_1d
from charts import render_report_charts
from fundsol import (
    GridSpec,
    QuadratureConfig,
    RhsSupportError,
    SpectrumProximityError,
    build_fundamental_solution,
    convolution_solve,
    min_modulus_scan,
    pair_with_test,
    spectral_bound_hint,
    verify_decay,
    verify_delta_property,
    verify_sigma_independence,
    verify_support,
)
from gfield import read_gfield, write_gfield
from petrovskii_numeric import LogRegion, SamplerBudget, check_log_region, estimate_omega0
from poly_core import (
    OperatorSymbol,
    OperatorSyntaxError,
    TestFunction,
    default_test_suite,
    infer_dimension,
    parse_operator,
)
from settings import TOOL_VERSION, Settings, configure_logging, load_settings

logger = logging.getLogger(__name__)
err_console = Console(stderr=True)

app = typer.Typer(add_completion=False, help="Petrovskiĭ analysis and causal fundamental solutions.")

SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "analysis_report.v1.schema.json"
SCHEMA_ID = "evolv.analysis_report.v1"

EXIT_ERROR = 1
EXIT_SPECTRUM = 4
EXIT_RHS = 5
EXIT_CODES = {'bounded': 0, 'unbounded': 2, 'undetermined': 3}

DELTA_TOLERANCE = 1e-3
SIGMA_TOLERANCE = 1e-4
SUPPORT_TOLERANCE = 1e-6
MASS_TOLERANCE = 1e-3
RESIDUAL_TOLERANCE = 1e-3
SUPPORT_OFFSETS = (-0.5, -1.0, -2.0)


class AnalysisReport(BaseModel):
    """Machine-readable report shared by all commands; sections a command does not run stay null."""

    model_config = ConfigDict(frozen=True)

    schema_id: str = SCHEMA_ID
    tool_version: str = TOOL_VERSION
    operator: Dict[str, Any]
    config: Dict[str, Any]
    classification: Optional[str] = None
    omega0: Optional[float] = None
    characteristic: Optional[bool] = None
    exact_1d: Optional[Dict[str, Any]] = None
    numeric: Optional[Dict[str, Any]] = None
    sigma_curve: Optional[Dict[str, Any]] = None
    log_region: Optional[Dict[str, Any]] = None
    fundsol: Optional[Dict[str, Any]] = None
    solve: Optional[Dict[str, Any]] = None
    timings: Optional[Dict[str, float]] = None

    def to_payload(self) -> Dict[str, Any]:
        payload = self.model_dump()
        if payload['timings'] is None:
            del payload['timings']
        return json_safe(payload)


def json_safe(value: Any) -> Any:
    """±inf become "inf"/"-inf", NaN becomes null, complex becomes [re, im]."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, np.generic):
        return json_safe(value.item())
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, complex):
        return [json_safe(value.real), json_safe(value.imag)]
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return str(value)


def load_schema() -> Dict[str, Any]:
    return json.loads(SCHEMA_PATH.read_text(encoding='utf-8'))


def check(name: str, measured: float, threshold: float, passed: bool, **details) -> Dict[str, Any]:
    entry = {'name': name, 'measured': measured, 'threshold': threshold, 'passed': bool(passed)}
    entry.update(details)
    return entry


# ---------------------------------------------------------------------------
# plumbing


@contextmanager
def exit_on_errors() -> Iterator[None]:
    """Map domain exceptions to the exit-code protocol with a one-line diagnostic."""
    try:
        yield
    except typer.Exit:
        raise
    except OperatorSyntaxError as e:
        logger.error(f"Operator parse error at {e.position}: {e}")
        err_console.print(f"error: {e}", markup=False, highlight=False)
        if e.text:
            err_console.print(f"  {e.text}\n  {' ' * e.position}^", markup=False, highlight=False)
        raise typer.Exit(EXIT_ERROR)
    except SpectrumProximityError as e:
        logger.error(str(e))
        err_console.print(f"error: {e}", markup=False, highlight=False)
        raise typer.Exit(EXIT_SPECTRUM)
    except RhsSupportError as e:
        logger.error(str(e))
        err_console.print(f"error: {e}", markup=False, highlight=False)
        raise typer.Exit(EXIT_RHS)
    except (ValueError, RuntimeError, OSError, jsonschema.ValidationError) as e:
        logger.error(f"Command failed: {e}")
        err_console.print(f"error: {e}", markup=False, highlight=False)
        raise typer.Exit(EXIT_ERROR)


def load_operator(text: Optional[str], json_file: Optional[Path], n: Optional[int]) -> OperatorSymbol:
    if json_file is not None:
        return OperatorSymbol.from_json(json_file.read_text(encoding='utf-8'))
    if text is None:
        raise ValueError("give an operator expression or --json FILE")
    return parse_operator(text, infer_dimension(text) if n is None else n)


def operator_echo(P: OperatorSymbol) -> Dict[str, Any]:
    return {'text': P.to_text(), 'n': P.dim_n, 'terms': P.to_json()['terms']}


def emit(report: AnalysisReport, out: Optional[Path]) -> Dict[str, Any]:
    payload = report.to_payload()
    jsonschema.validate(payload, load_schema())
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out is None:
        typer.echo(text)
    else:
        out.write_text(text + "\n", encoding='utf-8')
        logger.info(f"Report written to {out}")
    return payload


def settings_of(ctx: typer.Context) -> Settings:
    return ctx.obj if isinstance(ctx.obj, Settings) else load_settings()


def resolve(value, fallback):
    return fallback if value is None else value


class Stopwatch:
    def __init__(self):
        self.marks: Dict[str, float] = {}

    @contextmanager
    def lap(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        yield
        self.marks[name] = time.perf_counter() - start


def run_verdict(P: OperatorSymbol, depth: int, budget: SamplerBudget,
                with_numeric: bool = True) -> Tuple[PetrovskiiVerdict, Optional[PetrovskiiVerdict]]:
    """(primary verdict, numeric verdict); the exact method is primary when n = 1."""
    if P.dim_n != 1:
        numeric = estimate_omega0(P, budget)
        return numeric, numeric
    exact = petrovskii_verdict_exact_1d(P, depth=depth, threads=budget.threads)
    return exact, estimate_omega0(P, budget) if with_numeric else None


def curve_section(verdict: PetrovskiiVerdict) -> Optional[Dict[str, Any]]:
    if verdict.curve is None:
        return None
    section = verdict.curve.to_dict()
    section['fit'] = verdict.fit.to_dict() if verdict.fit is not None else None
    return section


# ---------------------------------------------------------------------------
# commands


@app.callback()
def main(ctx: typer.Context,
         log_level: Optional[str] = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING or ERROR")):
    """Configure logging from EVOLV_* settings before any command runs."""
    with exit_on_errors():
        settings = load_settings()
        if log_level is not None:
            settings = settings.model_copy(update={'log_level': log_level.upper()})
        configure_logging(settings.log_level)
        ctx.obj = settings


@app.command()
def analyze(
    ctx: typer.Context,
    operator: Optional[str] = typer.Argument(None, help="operator expression, e.g. \"d0 - d1^2\""),
    json_file: Optional[Path] = typer.Option(None, "--json", help="operator terms as JSON"),
    n: Optional[int] = typer.Option(None, "--n", help="spatial dimension (default: inferred)"),
    depth: Optional[int] = typer.Option(None, "--depth", help="Puiseux depth for n = 1"),
    budget: Optional[int] = typer.Option(None, "--budget", help="slice-root evaluations per radius"),
    threads: Optional[int] = typer.Option(None, "--threads"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    log_region: Tuple[float, float] = typer.Option((1.0, 1.0), "--log-region", help="a b of the log region"),
    charts: Optional[Path] = typer.Option(None, "--charts", help="directory for SVG charts"),
    curve_csv: Optional[Path] = typer.Option(None, "--curve-csv", help="write the σ(r) curve as CSV"),
    out: Optional[Path] = typer.Option(None, "--out", help="report file (default: stdout)"),
    timings: bool = typer.Option(False, "--timings", help="include wall-clock timings"),
):
    """Petrovskiĭ verdict, ω₀, σ(r) curve and log-region check."""
    settings = settings_of(ctx)
    watch = Stopwatch()
    with exit_on_errors():
        P = load_operator(operator, json_file, n)
        logger.info(f"Analyzing {P} (n={P.dim_n})")
        depth = resolve(depth, settings.depth)
        sampler = SamplerBudget(evaluations=resolve(budget, settings.budget), seed=resolve(seed, settings.seed),
                                threads=resolve(threads, settings.threads))

        with watch.lap('verdict'):
            primary, numeric = run_verdict(P, depth, sampler)
        with watch.lap('log_region'):
            region = LogRegion(a=log_region[0], b=log_region[1])
            violations = check_log_region(P, region, sampler)
        if curve_csv is not None and numeric.curve is not None:
            numeric.curve.to_csv(curve_csv)

        report = AnalysisReport(
            operator=operator_echo(P),
            config={'depth': depth, 'budget': sampler.model_dump(), 'config_hash': sampler.config_hash()},
            classification=primary.classification,
            omega0=primary.omega0,
            characteristic=is_characteristic(P),
            exact_1d=primary.to_dict() if primary.method == 'exact_1d' else None,
            numeric=numeric.to_dict(),
            sigma_curve=curve_section(numeric),
            log_region={'a': region.a, 'b': region.b, 'violations': len(violations),
                        'witnesses': [v.to_dict() for v in violations[:5]]},
            timings=watch.marks if timings else None,
        )
        payload = emit(report, out)
        if charts is not None:
            render_report_charts(payload, charts)
    raise typer.Exit(EXIT_CODES[primary.classification])


def delta_checks(P: OperatorSymbol, sigma: float, config: QuadratureConfig) -> List[Dict[str, Any]]:
    results = verify_delta_property(P, sigma, default_test_suite(P.dim_n + 1), config)
    return [check(f"delta[{k}]", r.residual, DELTA_TOLERANCE, r.residual <= DELTA_TOLERANCE,
                  transform_residual=r.transform_residual, cross_check=r.cross_check,
                  error=r.via_operator.error + r.via_transform.error)
            for k, r in enumerate(results)]


def sigma_checks(P: OperatorSymbol, sigma: float, config: QuadratureConfig) -> List[Dict[str, Any]]:
    phi = TestFunction.gaussian((1.0,) + (0.0,) * P.dim_n, 0.5)
    entries = []
    for other in (sigma + 0.5, sigma + 1.0):
        diff = verify_sigma_independence(P, sigma, other, phi, config)
        entries.append(check(f"sigma_independence[{sigma:g},{other:g}]", diff, SIGMA_TOLERANCE,
                             diff <= SIGMA_TOLERANCE))
    return entries


def support_checks(P: OperatorSymbol, sigma: float, config: QuadratureConfig) -> List[Dict[str, Any]]:
    values = verify_support(P, sigma, SUPPORT_OFFSETS, config)
    return [check(f"support[{o:g}]", v, SUPPORT_TOLERANCE, v <= SUPPORT_TOLERANCE, offset=o)
            for o, v in zip(SUPPORT_OFFSETS, values)]


def decay_checks(P: OperatorSymbol, sigma: float, omega0: float,
                 config: QuadratureConfig) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    """Rate signs one unit above (decay) and below (growth) ω₀."""
    if not math.isfinite(omega0):
        return [], []
    entries, fits = [], []
    for lam, expect_decay in ((omega0 + 1.0, True), (omega0 - 1.0, False)):
        fit = verify_decay(P, sigma, lam, config=config)
        passed = fit.rate < 0 if expect_decay else fit.rate > 0
        entries.append(check(f"decay[{lam:g}]", fit.rate, 0.0, passed,
                             expected='negative' if expect_decay else 'positive'))
        fits.append(fit.to_dict())
    return entries, fits


def grid_section(P: OperatorSymbol, spec: GridSpec, threads: int, field_path: Path) -> Dict[str, Any]:
    field = build_fundamental_solution(P, spec, threads)
    write_gfield(field_path, field)
    x0 = spec.coordinates(0)
    reliable = field.reliable_mask()
    mass = np.abs(field.values) * reliable
    early = (x0 < -0.5).reshape((-1,) + (1,) * spec.n)
    share = float((mass * early).sum() / mass.sum()) if mass.sum() > 0 else 0.0
    centre = (slice(None),) + (spec.points_per_axis // 2,) * spec.n
    keep = np.abs(x0) <= spec.period(0) / 4.0
    return {
        'path': str(field_path),
        'spec': spec.model_dump(mode='json'),
        'min_modulus': field.meta['min_modulus'],
        'reliable_halfwidth': field.meta['reliable_halfwidth'],
        'checks': [check("mass_before_-0.5", share, MASS_TOLERANCE, share <= MASS_TOLERANCE)],
        'slice': {'x0': x0[keep].tolist(), 'abs_N': np.abs(field.values[centre])[keep].tolist()},
    }


@app.command()
def fundsol(
    ctx: typer.Context,
    operator: Optional[str] = typer.Argument(None, help="operator expression"),
    json_file: Optional[Path] = typer.Option(None, "--json", help="operator terms as JSON"),
    n: Optional[int] = typer.Option(None, "--n"),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="line shift (default: ω₀ + 1, forces the run)"),
    grid_xi: float = typer.Option(32.0, "--grid-xi", help="frequency extent Ξ"),
    grid_points: Optional[int] = typer.Option(None, "--grid-points", help="points per axis (512 for n ≤ 1, else 64)"),
    taper: float = typer.Option(0.25, "--taper", help="raised-cosine taper fraction"),
    depth: Optional[int] = typer.Option(None, "--depth"),
    budget: Optional[int] = typer.Option(None, "--budget"),
    threads: Optional[int] = typer.Option(None, "--threads"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    field_path: Path = typer.Option(Path("N.gfield"), "--field", help="output .gfield path"),
    pair_only: bool = typer.Option(False, "--pair-only", help="skip the grid; pairing battery only"),
    charts: Optional[Path] = typer.Option(None, "--charts", help="directory for SVG charts"),
    out: Optional[Path] = typer.Option(None, "--out", help="verification report (default: stdout)"),
    timings: bool = typer.Option(False, "--timings"),
):
    """Build the causal fundamental solution and run the verification battery."""
    settings = settings_of(ctx)
    watch = Stopwatch()
    with exit_on_errors():
        P = load_operator(operator, json_file, n)
        threads = resolve(threads, settings.threads)
        sampler = SamplerBudget(evaluations=resolve(budget, settings.budget), seed=resolve(seed, settings.seed),
                                threads=threads)
        forced = sigma is not None
        with watch.lap('verdict'):
            verdict, numeric = run_verdict(P, resolve(depth, settings.depth), sampler, with_numeric=False)
        omega0 = verdict.omega0
        if not forced:
            if verdict.classification != 'bounded':
                err_console.print(f"error: {P} is {verdict.classification}; pass --sigma to force a shift",
                                  markup=False, highlight=False)
                raise typer.Exit(EXIT_CODES[verdict.classification])
            sigma = omega0 + 1.0 if math.isfinite(omega0) else 1.0
        elif omega0 is not None and not math.isnan(omega0) and sigma <= omega0:
            raise SpectrumProximityError.below_bound(sigma, omega0)
        if omega0 is None or not math.isfinite(omega0):
            omega0 = spectral_bound_hint(P, threads)
        logger.info(f"Fundamental solution of {P} at sigma={sigma} (omega0 ~ {omega0})")
        config = QuadratureConfig(omega0=omega0, threads=threads)

        section: Dict[str, Any] = {'sigma': sigma, 'forced': forced, 'pair_only': pair_only}
        if pair_only:
            scan = min_modulus_scan(P, sigma, samples=4000, seed=sampler.seed)
            threshold = 1e-8 * P.coefficient_scale
            if scan.inf_modulus <= threshold:
                raise SpectrumProximityError(scan.inf_modulus, threshold, scan.where)
            section['grid'] = None
        else:
            spec = GridSpec(n=P.dim_n, freq_extent=grid_xi, sigma=sigma, taper=taper,
                            points_per_axis=grid_points or (512 if P.dim_n <= 1 else 64))
            with watch.lap('grid'):
                section['grid'] = grid_section(P, spec, threads, field_path)

        with watch.lap('battery'):
            scan = min_modulus_scan(P, sigma, seed=sampler.seed)
            section['min_modulus'] = scan.to_dict()
            section['delta'] = delta_checks(P, sigma, config)
            section['sigma_independence'] = sigma_checks(P, sigma, config)
            section['support'] = support_checks(P, sigma, config)
            section['decay_checks'], section['decay'] = decay_checks(P, sigma, omega0, config)
            probe = TestFunction.gaussian((1.0,) + (0.0,) * P.dim_n, 0.5)
            section['pairing'] = pair_with_test(P, sigma, probe, config).to_dict()

        curve = None
        if charts is not None:
            numeric = numeric or estimate_omega0(P, sampler)
            curve = curve_section(numeric)
        report = AnalysisReport(
            operator=operator_echo(P),
            config={'budget': sampler.model_dump(), 'quadrature': config.model_dump()},
            classification=verdict.classification,
            omega0=verdict.omega0,
            characteristic=is_characteristic(P),
            sigma_curve=curve,
            fundsol=section,
            timings=watch.marks if timings else None,
        )
        payload = emit(report, out)
        if charts is not None:
            render_report_charts(payload, charts)


@app.command()
def solve(
    ctx: typer.Context,
    operator: Optional[str] = typer.Argument(None, help="operator expression"),
    rhs: Path = typer.Option(..., "--rhs", help="right-hand side .gfield (role rhs)"),
    json_file: Optional[Path] = typer.Option(None, "--json", help="operator terms as JSON"),
    n: Optional[int] = typer.Option(None, "--n"),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="line shift (default: the rhs grid's sigma)"),
    threads: Optional[int] = typer.Option(None, "--threads"),
    field_path: Path = typer.Option(Path("U.gfield"), "--field", help="output .gfield path"),
    out: Optional[Path] = typer.Option(None, "--out", help="residual report (default: stdout)"),
):
    """Solve P U = F by convolution with the causal fundamental solution."""
    settings = settings_of(ctx)
    with exit_on_errors():
        P = load_operator(operator, json_file, n)
        F = read_gfield(rhs)
        sigma = resolve(sigma, F.spec.sigma)
        U = convolution_solve(P, sigma, F, resolve(threads, settings.threads))
        write_gfield(field_path, U)
        residual = U.meta['residual']
        report = AnalysisReport(
            operator=operator_echo(P),
            config={'sigma': sigma, 'spec': F.spec.model_dump(mode='json')},
            characteristic=is_characteristic(P),
            solve={
                'field': str(field_path),
                'max_abs': float(np.max(np.abs(U.values))),
                'residual': check("residual", residual, RESIDUAL_TOLERANCE, residual <= RESIDUAL_TOLERANCE),
            },
        )
        emit(report, out)


@app.command()
def schema():
    """Print the published report schema."""
    typer.echo(json.dumps(load_schema(), sort_keys=True, indent=2))


if __name__ == '__main__':
    app()

"""Scenario runner: evolves a datum, records diagnostics and writes a bundle.

A bundle directory holds ``series.csv`` (the versioned time series),
``report.json`` (estimate blocks, compliance, run metadata), ``config.yaml``
(canonical configuration), ``mixing.svg`` and ``fields/`` snapshots.  Plots
and ``summary.txt`` are rendered from ``series.csv`` alone, so re-rendering
a bundle reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .bounds import (
    BOUND_KINDS,
    BoundCurve,
    MixingSeries,
    budget_curves,
    compliance,
    geometric_exponential,
)
from .bressan import BressanState, BressanVelocity, checkerboard, evolve_exact
from .config import ScenarioConfig, dump_config, resolve_path
from .estimates import (
    geometric_constants,
    g_functional,
    gquant_report,
    half_half,
    identity_flow,
    lusin_extract,
)
from .grid import ScalarField, lp_norm, make_field, read_binary, sobolev_norm, trig_field, write_binary
from .mixing import MixParams, mix_f, mix_g
from .transport import advect, conservation_report, flow_map, gronwall_check
from .velocity import (
    VelocityModel,
    alternating_shear,
    grid_sampled,
    steady_shear,
    translation,
)

SCHEMA_VERSION = 1
BASE_COLUMNS = ("t", "mix_f", "mix_g", "mix_g_bracket", "mix_g_saturated", "l1", "l2", "linf", "h1")
INFORMATIONAL = {"enstrophy_linear_suboptimal"}
MEAN_DRIFT_TOL = 1e-6

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_COMPLIANCE = 0, 1, 2, 3


class NumericalInvariantError(RuntimeError):
    def __init__(self, invariant: str, detail: str):
        self.invariant = invariant
        super().__init__(f"numerical invariant '{invariant}' failed: {detail}")


# -- building blocks -------------------------------------------------------------


def build_model(cfg: ScenarioConfig) -> VelocityModel:
    v = cfg["velocity"]
    kind = v["kind"]
    p = float(v["p"])
    if kind == "translation":
        model = translation(v["v"])
    elif kind == "steady_shear":
        model = steady_shear(v["amplitude"], p)
    elif kind == "alternating_shear":
        model = alternating_shear(v["amplitude"], v["half_period"], p)
    elif kind == "grid_sampled":
        model = grid_sampled(resolve_path(cfg, v["file"]), p)
    else:
        model = BressanVelocity(v["timeline"], int(cfg["initial"]["level"]), p)
    if v["budget"]:
        model.budget = replace(model.budget, **{k: float(x) for k, x in v["budget"].items()})
    return model


def build_initial(cfg: ScenarioConfig) -> ScalarField:
    ini = cfg["initial"]
    N = cfg.resolution
    kind = ini["kind"]
    if kind == "checkerboard":
        return checkerboard(int(ini["level"]), N)
    if kind == "half_half":
        return half_half(N)
    if kind == "modes":
        return trig_field(N, [tuple(m) for m in ini["modes"]], zero_mean=True)
    fields = read_binary(resolve_path(cfg, ini["file"]))
    if fields[0].N != N:
        raise ValueError(f"initial file has N={fields[0].N}, config says {N}")
    return fields[0]


def snapshot_times(cfg: ScenarioConfig) -> np.ndarray:
    v = cfg["velocity"]
    if v["kind"] == "bressan":
        level = int(cfg["initial"]["level"])
        from .bressan import step_start

        return np.array([float(step_start(level + n, v["timeline"])) for n in range(int(v["steps"]) + 1)])
    t = cfg["time"]
    n = int(round((t["end"] - t["start"]) / t["snapshot_every"]))
    return t["start"] + t["snapshot_every"] * np.arange(n + 1)


def mix_params(cfg: ScenarioConfig) -> MixParams:
    m = cfg["mixing"]
    N = cfg.resolution
    radii = None
    if m["radii_count"] is not None:
        cells = np.unique(np.rint(np.linspace(1, N // 2, int(m["radii_count"]))).astype(int))
        radii = tuple(float(c) / N for c in cells)
    return MixParams(float(m["kappa_prime"]), radii)


# -- the run ---------------------------------------------------------------------


@dataclass
class RunResult:
    series: MixingSeries
    curves: list
    reports: list
    estimates: dict
    exit_code: int
    directory: Path | None = None
    fields: list = field(default_factory=list, repr=False)


def _zero_mean(fld: ScalarField) -> ScalarField:
    return fld if fld.has_zero_mean() else make_field(fld.samples, enforce_zero_mean=True)


def _diagnostics(fields, times, params, exact_mix_f=None) -> MixingSeries:
    rows = {k: [] for k in BASE_COLUMNS[1:]}
    for m, fld in enumerate(fields):
        g = mix_g(fld, params)
        zm = _zero_mean(fld)
        rows["mix_f"].append(exact_mix_f[m] if exact_mix_f is not None else mix_f(zm))
        rows["mix_g"].append(g.epsilon)
        rows["mix_g_bracket"].append(g.bracket)
        rows["mix_g_saturated"].append(g.saturated)
        rows["l1"].append(lp_norm(fld, 1))
        rows["l2"].append(lp_norm(fld, 2))
        rows["linf"].append(lp_norm(fld, np.inf))
        rows["h1"].append(sobolev_norm(fld, 1.0))
    cols = {k: np.array(v, dtype=bool if k == "mix_g_saturated" else float) for k, v in rows.items()}
    return MixingSeries(np.asarray(times, dtype=float), **cols)


def _evolve(cfg: ScenarioConfig, model: VelocityModel, datum: ScalarField, times: np.ndarray):
    v = cfg["velocity"]
    if v["kind"] == "bressan":
        state = BressanState.initial(int(cfg["initial"]["level"]), v["timeline"])
        try:
            _, rows, fields = evolve_exact(state, int(v["steps"]), cfg.resolution, mix_params(cfg), True)
        except AssertionError as exc:
            raise NumericalInvariantError("bressan_exactness", str(exc)) from None
        return fields, [r.mix_f for r in rows], {"mix_f_method": "lattice_exact"}
    t0 = float(cfg["time"]["start"])
    dt = float(cfg["time"]["dt"])
    fields = [datum if t == t0 else advect(datum, model, float(t - t0), dt, t0=t0) for t in times]
    return fields, None, {"mix_f_method": "grid_spectral"}


def _check_invariants(fields) -> None:
    ref = fields[0]
    scale = max(1.0, lp_norm(ref, np.inf))
    for k, fld in enumerate(fields):
        if not np.all(np.isfinite(fld.samples)):
            raise NumericalInvariantError("finite_values", f"snapshot {k} has non-finite samples")
        drift = abs(fld.mean - ref.mean)
        if drift > MEAN_DRIFT_TOL * scale:
            raise NumericalInvariantError("mean_conservation", f"snapshot {k} mean drift {drift:.3e}")


def _block(value, bound, margin, passed, **extra) -> dict:
    out = {"value": value, "bound": bound, "margin": margin, "pass": bool(passed)}
    out.update(extra)
    return out


def _estimates(cfg, model, times, fields) -> tuple[dict, object]:
    est = cfg["estimates"]
    out: dict = {}
    cons = conservation_report(fields, times)
    out["conservation"] = _block(
        cons.drift, {"mean": MEAN_DRIFT_TOL}, MEAN_DRIFT_TOL - cons.drift["mean"], cons.drift["mean"] <= MEAN_DRIFT_TOL
    )
    geo = None
    if cfg["velocity"]["kind"] == "bressan":
        return out, geo
    t0 = float(times[0])
    horizon = float(times[-1] - t0)
    dt = float(cfg["time"]["dt"])
    n = int(est["resolution"])
    p = float(est["p"])
    if "geometric_exponential" in cfg["bounds"]["kinds"]:
        geo = geometric_constants(
            model, horizon, times, dt, n, est["eta"], float(cfg["mixing"]["kappa_prime"]), p, t0=t0
        )
        out["geometric_constants"] = {
            "beta": geo.beta,
            "M": geo.big_m,
            "c2": geo.c2,
            "threshold": geo.threshold,
            "eta": geo.eta,
            "per_time_bound": geo.per_time.tolist(),
        }
    if not est["enabled"]:
        return out, geo
    lip = model.budget.lip
    rng = np.random.default_rng(0)
    if math.isfinite(lip):
        fwd = flow_map(model, t0, t0 + horizon, dt, n)
        back = flow_map(model, t0 + horizon, t0, dt, n)
        gr = gronwall_check([fwd, back], lip, int(est["gronwall_pairs"]), rng)
        out["gronwall"] = _block(
            [gr.min_ratio, gr.max_ratio], [gr.lower, gr.upper], gr.margin, gr.passed, t=gr.t
        )
    flows = [identity_flow(n)] + [flow_map(model, t0, float(t), dt, n) for t in times if t > t0]
    gres = g_functional(flows, p)
    bound = lip * horizon + math.log(2.0) if math.isfinite(lip) else None
    out["g_functional"] = _block(
        gres.value,
        bound,
        None if bound is None else bound - float(gres.g.max()),
        True if bound is None else bool(gres.g.max() <= bound + 1e-12),
        p=p,
        max_integrand=float(gres.g.max()),
    )
    if not math.isnan(model.budget.w1p_norm):
        gq = gquant_report(gres, model.budget)
        out["gquant"] = _block(gq.ratio, None, None, math.isfinite(gq.ratio), denominator=gq.denominator)
    eta = 0.1 if est["eta"] is None else float(est["eta"])
    lus = lusin_extract(gres, flows, eta, pairs=int(est["lusin_pairs"]), rng=rng)
    out["lusin"] = _block(
        lus.lip_estimate,
        lus.lip_bound,
        lus.lip_bound - lus.lip_estimate,
        lus.passed,
        eta=eta,
        threshold=lus.threshold,
        c2=lus.c2,
        violations=lus.violations,
        excluded_fraction=lus.excluded_fraction,
    )
    return out, geo


def _curves(cfg, model, series, datum, geo) -> tuple[list[BoundCurve], list[str]]:
    kinds = list(cfg["bounds"]["kinds"])
    zm = _zero_mean(datum)
    mix0 = float(series.mix_f[0])
    rel = series.t - series.t[0]
    curves = budget_curves(
        [k for k in kinds if k != "geometric_exponential"],
        rel,
        mix0,
        model.budget,
        lp_norm(zm, np.inf),
        lp_norm(zm, 2),
        sobolev_norm(zm, 1.0),
    )
    if geo is not None:
        curves.append(geometric_exponential(geo.beta, geo.big_m, rel))
    made = {c.kind for c in curves}
    skipped = [k for k in kinds if k not in made]
    # canonical column order, curves indexed by absolute snapshot time
    curves.sort(key=lambda c: BOUND_KINDS.index(c.kind))
    return [replace(c, times=series.t.copy()) for c in curves], skipped


def run_scenario(cfg: ScenarioConfig, directory=None) -> RunResult:
    """Run a validated scenario; writes a bundle when ``directory`` is given."""
    model = build_model(cfg)
    datum = build_initial(cfg)
    times = snapshot_times(cfg)
    fields, exact, method = _evolve(cfg, model, datum, times)
    _check_invariants(fields)
    series = _diagnostics(fields, times, mix_params(cfg), exact)
    estimates, geo = _estimates(cfg, model, times, fields)
    curves, skipped = _curves(cfg, model, series, datum, geo)
    reports = compliance(series, curves, float(cfg["bounds"]["tolerance"]))
    series.metadata = {
        "name": cfg.name,
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "backend": _kernels.BACKEND,
        "budget": model.budget.as_dict(),
        "velocity": model.describe(),
        "skipped_bounds": skipped,
        **method,
    }
    failed = any(not r.passed for r in reports if r.kind not in INFORMATIONAL)
    failed = failed or any(
        not b["pass"] for k, b in estimates.items() if isinstance(b, dict) and "pass" in b
    )
    code = EXIT_COMPLIANCE if failed else EXIT_OK
    result = RunResult(series, curves, reports, estimates, code, None, fields)
    if directory is not None:
        result.directory = write_bundle(result, cfg, Path(directory))
    return result


# -- bundle IO -------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return repr(float(x))


def series_table(series: MixingSeries, curves, reports) -> tuple[list[str], list[list[str]]]:
    header = list(BASE_COLUMNS) + [c.kind for c in curves] + [f"compliance_{c.kind}" for c in curves]
    rows = []
    for m in range(len(series.t)):
        row = [_fmt(series.t[m])]
        row += [_fmt(getattr(series, k)[m]) for k in BASE_COLUMNS[1:]]
        row += [_fmt(c.values[m]) for c in curves]
        row += [_fmt(r.margins[m] >= r.threshold) for r in reports]
        rows.append(row)
    return header, rows


def write_series_csv(path, series: MixingSeries, curves, reports) -> None:
    header, rows = series_table(series, curves, reports)
    with open(path, "w", newline="") as fh:
        fh.write(f"# mixlab-series schema={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


@dataclass(frozen=True)
class StoredSeries:
    schema: int
    header: list
    columns: dict

    @property
    def bound_kinds(self) -> list[str]:
        return [h for h in self.header[len(BASE_COLUMNS) :] if not h.startswith("compliance_")]

    def compliance_failures(self) -> list[str]:
        bad = []
        for h in self.header:
            if h.startswith("compliance_") and h[len("compliance_") :] not in INFORMATIONAL:
                if not all(self.columns[h]):
                    bad.append(h)
        return bad


def read_series_csv(path) -> StoredSeries:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# mixlab-series schema="):
            raise ValueError(f"{path}: missing schema header line")
        schema = int(first.strip().split("=", 1)[1])
        reader = csv.reader(fh)
        header = next(reader)
        data = list(reader)
    cols = {}
    for k, h in enumerate(header):
        vals = [r[k] for r in data]
        if h == "mix_g_saturated" or h.startswith("compliance_"):
            cols[h] = [v == "true" for v in vals]
        else:
            cols[h] = np.array([float(v) for v in vals])
    return StoredSeries(schema, header, cols)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_bundle(result: RunResult, cfg: ScenarioConfig, directory: Path) -> Path:
    formats = set(cfg["outputs"]["formats"])
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.yaml").write_text(dump_config(cfg))
    write_series_csv(directory / "series.csv", result.series, result.curves, result.reports)
    if "json" in formats:
        report = {
            "metadata": result.series.metadata,
            "estimates": result.estimates,
            "compliance": [r.as_dict() for r in result.reports],
            "curves": [c.as_dict() for c in result.curves],
            "exit_code": result.exit_code,
        }
        (directory / "report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    if "fields" in formats:
        fdir = directory / "fields"
        fdir.mkdir(exist_ok=True)
        lines = ["index,t"]
        for k, (t, fld) in enumerate(zip(result.series.t, result.fields)):
            write_binary(fdir / f"snapshot_{k:04d}.bin", fld)
            lines.append(f"{k},{t!r}")
        (fdir / "index.csv").write_text("\n".join(lines) + "\n")
    render_bundle(directory, svg="svg" in formats, log_scale=bool(cfg["outputs"]["log_scale"]))
    if "csv" not in formats:
        (directory / "series.csv").unlink()
    return directory


def render_bundle(directory, svg: bool = True, log_scale: bool = True) -> StoredSeries:
    """Re-render ``summary.txt`` and ``mixing.svg`` from ``series.csv``."""
    directory = Path(directory)
    path = directory / "series.csv"
    if not path.exists():
        raise FileNotFoundError(f"{path} not found")
    stored = read_series_csv(path)
    (directory / "summary.txt").write_text(summary_table(stored))
    if svg:
        from .plotting import decay_plot

        decay_plot(stored, directory / "mixing.svg", log_scale=log_scale)
    return stored


def summary_table(stored: StoredSeries) -> str:
    cols = ["t", "mix_f", "mix_g"] + stored.bound_kinds
    width = max(12, *(len(c) for c in cols))
    lines = ["  ".join(c.rjust(width) for c in cols)]
    n = len(stored.columns["t"])
    for m in range(n):
        lines.append("  ".join(f"{stored.columns[c][m]:{width}.6g}" for c in cols))
    for h in stored.header:
        if h.startswith("compliance_"):
            lines.append(f"{h}: {'pass' if all(stored.columns[h]) else 'FAIL'}")
    return "\n".join(lines) + "\n"

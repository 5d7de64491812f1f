"""Scenario configuration: YAML parsing, validation and canonical form.

Every key has a default, so the canonical form of a configuration is the
fully populated mapping; :func:`dump_config` writes it with sorted keys and
``parse_config(dump_config(cfg)) == cfg`` holds.  Validation errors carry
the line of the offending key.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .bounds import BOUND_KINDS, DEFAULT_TOLERANCE

VELOCITY_KINDS = ("translation", "steady_shear", "alternating_shear", "grid_sampled", "bressan")
INITIAL_KINDS = ("checkerboard", "half_half", "modes", "file")
OUTPUT_FORMATS = ("csv", "json", "svg", "fields")

DEFAULTS: dict = {
    "name": "scenario",
    "grid": {"resolution": 128},
    "time": {"start": 0.0, "end": 1.0, "dt": 0.01, "snapshot_every": 0.25},
    "velocity": {
        "kind": "translation",
        "v": [0.0, 0.0],
        "amplitude": 1.0,
        "half_period": 0.5,
        "file": None,
        "timeline": "unit",
        "steps": 4,
        "p": 2.0,
        "budget": {},
    },
    "initial": {"kind": "half_half", "level": 0, "modes": [], "file": None},
    "mixing": {"kappa_prime": 1.0 / 3.0, "radii_count": None},
    "estimates": {
        "enabled": False,
        "p": 2.0,
        "eta": None,
        "resolution": 64,
        "gronwall_pairs": 100000,
        "lusin_pairs": 200000,
    },
    "bounds": {"kinds": ["lipschitz_exponential"], "tolerance": DEFAULT_TOLERANCE},
    "outputs": {"directory": "out", "formats": list(OUTPUT_FORMATS), "log_scale": True},
}

BUDGET_KEYS = ("lip", "kinetic", "enstrophy", "bv", "sup_norm", "w1p_norm")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class ScenarioConfig:
    data: dict
    source: str | None = None
    base_dir: Path = Path(".")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def resolution(self) -> int:
        return int(self.data["grid"]["resolution"])

    def __eq__(self, other) -> bool:
        return isinstance(other, ScenarioConfig) and self.data == other.data

    def __hash__(self) -> int:
        return hash(dump_config(self))


def _line_map(text: str) -> dict:
    """Map dotted key paths to 1-based source lines."""
    out: dict = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[path] = k.start_mark.line + 1
                walk(v, path)

    if root is not None:
        walk(root, "")
    return out


def _merge(base: dict, extra: dict, lines: dict, source, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        path = f"{prefix}.{k}" if prefix else str(k)
        if k not in base:
            raise ConfigError(f"unknown key '{path}'", lines.get(path), source)
        if isinstance(base[k], dict) and k != "budget":
            if not isinstance(v, dict):
                raise ConfigError(f"'{path}' must be a mapping", lines.get(path), source)
            out[k] = _merge(base[k], v, lines, source, path)
        else:
            out[k] = v
    return out


def _set_path(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown key '{dotted}' in override")
        node = node[k]
    if keys[-1] not in node and keys[-2:-1] != ["budget"]:
        raise ConfigError(f"unknown key '{dotted}' in override")
    node[keys[-1]] = value


def parse_overrides(items) -> list[tuple[str, object]]:
    """``key.path=value`` strings; values are parsed as YAML scalars or lists."""
    out = []
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        k, v = item.split("=", 1)
        out.append((k.strip(), yaml.safe_load(v)))
    return out


def parse_config(
    text: str,
    source: str | None = None,
    base_dir=".",
    overrides=(),
    check_files: bool = True,
) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", mark.line + 1 if mark else None, source) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    lines = _line_map(text)
    data = _merge(DEFAULTS, raw, lines, source)
    for key, value in overrides:
        _set_path(data, key, value)
    cfg = ScenarioConfig(data, source, Path(base_dir))
    validate(cfg, lines, check_files)
    return cfg


def load_config(path, overrides=(), check_files: bool = True) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path)) from None
    return parse_config(text, str(path), path.parent, overrides, check_files)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.data, sort_keys=True, default_flow_style=False)


def resolve_path(cfg: ScenarioConfig, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else cfg.base_dir / p


def _num(cfg, lines, path, positive=False, nonneg=False, integer=False):
    node = cfg.data
    for k in path.split("."):
        node = node[k]
    ok = isinstance(node, (int, float)) and not isinstance(node, bool)
    if ok and integer:
        ok = float(node).is_integer()
    if ok and not math.isfinite(float(node)):
        ok = False
    if ok and positive and node <= 0:
        ok = False
    if ok and nonneg and node < 0:
        ok = False
    if not ok:
        kind = "a positive " if positive else "a nonnegative " if nonneg else "a "
        what = "integer" if integer else "number"
        raise ConfigError(f"'{path}' must be {kind}{what}, got {node!r}", lines.get(path), cfg.source)
    return node


def validate(cfg: ScenarioConfig, lines: dict | None = None, check_files: bool = True) -> None:
    """Check types, ranges and cross-field consistency (including the CFL rule)."""
    from .transport import DEFAULT_CFL

    lines = lines or {}
    d = cfg.data
    src = cfg.source

    def err(msg, path):
        raise ConfigError(msg, lines.get(path), src)

    if not isinstance(d["name"], str) or not d["name"]:
        err("'name' must be a nonempty string", "name")
    N = _num(cfg, lines, "grid.resolution", positive=True, integer=True)
    N = int(N)
    if N < 8 or N & (N - 1):
        err(f"grid.resolution must be a power of two >= 8, got {N}", "grid.resolution")

    vel = d["velocity"]
    kind = vel["kind"]
    if kind not in VELOCITY_KINDS:
        err(f"velocity.kind must be one of {', '.join(VELOCITY_KINDS)}, got {kind!r}", "velocity.kind")
    t0 = _num(cfg, lines, "time.start", nonneg=True)
    t1 = _num(cfg, lines, "time.end", nonneg=True)
    if kind != "bressan":
        if t1 <= t0:
            err("time.end must exceed time.start", "time.end")
        _num(cfg, lines, "time.dt", positive=True)
        snap = _num(cfg, lines, "time.snapshot_every", positive=True)
        n = (t1 - t0) / snap
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            err("time.snapshot_every must divide end - start", "time.snapshot_every")
    _num(cfg, lines, "velocity.p", positive=True)
    if kind == "translation":
        v = vel["v"]
        if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
            err("velocity.v must be a list of two numbers", "velocity.v")
    elif kind in ("steady_shear", "alternating_shear"):
        _num(cfg, lines, "velocity.amplitude", positive=True)
        if kind == "alternating_shear":
            _num(cfg, lines, "velocity.half_period", positive=True)
    elif kind == "grid_sampled":
        if not vel["file"]:
            err("velocity.file is required for grid_sampled", "velocity.kind")
        if check_files and not resolve_path(cfg, vel["file"]).exists():
            err(f"velocity file {vel['file']!r} does not exist", "velocity.file")
    elif kind == "bressan":
        if vel["timeline"] not in ("dyadic", "unit"):
            err("velocity.timeline must be 'dyadic' or 'unit'", "velocity.timeline")
        _num(cfg, lines, "velocity.steps", nonneg=True, integer=True)
        if d["initial"]["kind"] != "checkerboard":
            err("bressan scenarios start from a checkerboard", "initial.kind")
    if not isinstance(vel["budget"], dict):
        err("velocity.budget must be a mapping", "velocity.budget")
    for k, v in vel["budget"].items():
        if k not in BUDGET_KEYS:
            err(f"unknown budget entry {k!r}", f"velocity.budget.{k}")
        if not isinstance(v, (int, float)) or v < 0:
            err(f"budget entry {k!r} must be a nonnegative number", f"velocity.budget.{k}")

    ini = d["initial"]
    if ini["kind"] not in INITIAL_KINDS:
        err(f"initial.kind must be one of {', '.join(INITIAL_KINDS)}, got {ini['kind']!r}", "initial.kind")
    if ini["kind"] == "checkerboard":
        level = int(_num(cfg, lines, "initial.level", nonneg=True, integer=True))
        top = level + (int(vel["steps"]) if kind == "bressan" else 0)
        if N % 2 ** (top + 2):
            err(
                f"resolution {N} is not a multiple of 2^{top + 2} required by checkerboard level {top}",
                "grid.resolution",
            )
    elif ini["kind"] == "modes":
        modes = ini["modes"]
        if not isinstance(modes, list) or not modes:
            err("initial.modes must be a nonempty list of [amplitude, k1, k2, phase]", "initial.modes")
        for m in modes:
            if not (isinstance(m, list) and len(m) == 4 and all(isinstance(c, (int, float)) for c in m)):
                err(f"bad mode entry {m!r}", "initial.modes")
            if max(abs(m[1]), abs(m[2])) >= N // 2:
                err(f"mode {m!r} is not resolved at N={N}", "initial.modes")
    elif ini["kind"] == "file":
        if not ini["file"]:
            err("initial.file is required", "initial.kind")
        if check_files:
            from .grid import FieldError, read_binary

            path = resolve_path(cfg, ini["file"])
            if not path.exists():
                err(f"initial file {ini['file']!r} does not exist", "initial.file")
            try:
                n_file = read_binary(path)[0].N
            except (FieldError, ValueError, IndexError) as exc:
                err(f"initial file {ini['file']!r} is not a field file: {exc}", "initial.file")
            if n_file != N:
                err(f"initial file has N={n_file}, grid.resolution is {N}", "initial.file")

    kp = _num(cfg, lines, "mixing.kappa_prime", positive=True)
    if kp >= 1:
        err("mixing.kappa_prime must lie in (0, 1)", "mixing.kappa_prime")
    rc = d["mixing"]["radii_count"]
    if rc is not None:
        _num(cfg, lines, "mixing.radii_count", positive=True, integer=True)

    est = d["estimates"]
    if not isinstance(est["enabled"], bool):
        err("estimates.enabled must be true or false", "estimates.enabled")
    p = _num(cfg, lines, "estimates.p", positive=True)
    if p <= 1:
        err("estimates.p must exceed 1", "estimates.p")
    if est["eta"] is not None:
        eta = _num(cfg, lines, "estimates.eta", positive=True)
        if eta >= 1:
            err("estimates.eta must lie in (0, 1)", "estimates.eta")
    n_est = int(_num(cfg, lines, "estimates.resolution", positive=True, integer=True))
    if n_est < 8 or n_est & (n_est - 1):
        err("estimates.resolution must be a power of two >= 8", "estimates.resolution")
    _num(cfg, lines, "estimates.gronwall_pairs", positive=True, integer=True)
    _num(cfg, lines, "estimates.lusin_pairs", positive=True, integer=True)

    kinds = d["bounds"]["kinds"]
    if not isinstance(kinds, list) or any(k not in BOUND_KINDS for k in kinds):
        err(f"bounds.kinds entries must be among {', '.join(BOUND_KINDS)}", "bounds.kinds")
    if len(set(kinds)) != len(kinds):
        err("bounds.kinds has duplicates", "bounds.kinds")
    if "geometric_exponential" in kinds:
        if ini["kind"] != "half_half":
            err("geometric_exponential needs the half_half initial datum", "bounds.kinds")
        if kind == "bressan":
            err("geometric_exponential is not available for bressan scenarios", "bounds.kinds")
    _num(cfg, lines, "bounds.tolerance", nonneg=True)

    out = d["outputs"]
    if not isinstance(out["directory"], str):
        err("outputs.directory must be a string", "outputs.directory")
    if not isinstance(out["formats"], list) or any(f not in OUTPUT_FORMATS for f in out["formats"]):
        err(f"outputs.formats entries must be among {', '.join(OUTPUT_FORMATS)}", "outputs.formats")

    # CFL on the declared budget; models reproduced exactly per step are exempt
    if kind in ("grid_sampled",) and check_files:
        from .scenario import build_model

        model = build_model(cfg)
        dt = d["time"]["dt"]
        if dt * model.budget.sup_norm > DEFAULT_CFL / N:
            err(
                f"time.dt={dt} violates the CFL rule dt*sup|u| <= {DEFAULT_CFL}/N "
                f"(sup|u|={model.budget.sup_norm:.4g})",
                "time.dt",
            )

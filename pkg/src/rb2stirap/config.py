"""Flat ``key = value unit`` scenario files.

A file starts with a ``[scenario]`` header followed by one assignment per
line; ``#`` starts a comment.  Values carrying a physical dimension must name
their unit, and are converted on load to the internal conventions: angular
frequency in rad/us, time in us, length in nm, lattice depth in E_r.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

TWO_PI = 2.0 * math.pi

UNITS = {
    "frequency": {"MHz": TWO_PI, "kHz": TWO_PI * 1e-3, "Hz": TWO_PI * 1e-6, "rad/us": 1.0},
    "time": {"us": 1.0, "ms": 1e3, "ns": 1e-3},
    "length": {"nm": 1.0, "um": 1e3},
    "depth": {"Er": 1.0},
}
CANONICAL_UNIT = {"frequency": "rad/us", "time": "us", "length": "nm", "depth": "Er"}

SCENARIOS = ("dark-resonance", "stirap-scan", "hold-scan", "fit")
FIT_MODELS = ("dark_resonance", "roundtrip", "holdcurve")


@dataclass(frozen=True)
class Key:
    kind: str              # frequency|time|length|depth|number|int|choice|path
    default: object = None  # None -> required
    choices: tuple = ()


_LAMBDA = {
    "gamma_e": Key("frequency", TWO_PI * 8.0),
    "gamma_laser": Key("frequency", TWO_PI * 0.020),
    "delta_1": Key("frequency", 0.0),
}
_DELTA_GRID = {
    "delta_min": Key("frequency"),
    "delta_max": Key("frequency"),
    "delta_points": Key("int"),
}
_DARK = {
    "omega1": Key("frequency"),
    "omega2": Key("frequency"),
    "pulse_length": Key("time"),
    "scanned_laser": Key("int", 2, (1, 2)),
}
_STIRAP = {
    "omega1": Key("frequency", TWO_PI * 12.0),
    "omega2": Key("frequency", TWO_PI * 10.0),
    "ramp": Key("time", 5.0),
    "hold": Key("time", 2.0),
    "cleanup": Key("time", 1.0),
    "edge": Key("time", 0.2),
}
_LATTICE = {
    "depth_deep": Key("depth", 60.0),
    "depth_ratio": Key("number", 10.0),
    "stirap_eff": Key("number", 0.75),
    "period": Key("length", 415.22),
    "mass_u": Key("number", 2 * 86.909),
    "cutoff": Key("int", 15),
    "n_q": Key("int", 64),
    "n_bands": Key("int", 12),
    "dims": Key("int", 3, (1, 2, 3)),
}
_TAU_GRID = {
    "tau_min": Key("time"),
    "tau_max": Key("time"),
    "tau_points": Key("int"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "dark-resonance": {**_DARK, **_LAMBDA, **_DELTA_GRID},
    "stirap-scan": {**_STIRAP, **_LAMBDA, **_DELTA_GRID},
    "hold-scan": {**_LATTICE, **_TAU_GRID},
    "fit": {
        "model": Key("choice", None, FIT_MODELS),
        "data": Key("path"),
        "guess": Key("number", float("nan")),
        "lower": Key("number", float("nan")),
        "upper": Key("number", float("nan")),
        **{k: v for k, v in _DARK.items() if k != "omega2"},
        "omega1": Key("frequency", TWO_PI * 0.7),
        "pulse_length": Key("time", 3.0),
        "stirap_omega1": Key("frequency", TWO_PI * 12.0),
        "stirap_omega2": Key("frequency", TWO_PI * 10.0),
        **{k: v for k, v in _STIRAP.items() if k not in ("omega1", "omega2")},
        **_LAMBDA,
        **{k: v for k, v in _LATTICE.items() if k != "depth_ratio"},
    },
}
for _schema in SCHEMAS.values():
    _schema["output"] = Key("path", "")

# unit kind of the fitted parameter, used for guess/lower/upper in fit files
FIT_PARAM_KIND = {"dark_resonance": "frequency", "roundtrip": "frequency", "holdcurve": "number"}


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    key: str
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.key}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(map(str, self.diagnostics)))


@dataclass
class ScenarioConfig:
    scenario: str
    values: dict
    source: Path | None = None
    positions: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def grid(self, prefix: str):
        import numpy as np

        return np.linspace(self[f"{prefix}_min"], self[f"{prefix}_max"], self[f"{prefix}_points"])


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf|nan"
_VALUE_RE = re.compile(rf"^({_NUM})\s*([A-Za-z][A-Za-z/]*)?$")
_HEADER_RE = re.compile(r"^\[\s*([A-Za-z0-9_-]+)\s*\]$")


def _convert(kind, raw, unit, key, entry):
    """Return (value, error message or None)."""
    if kind in ("path", "choice"):
        text = raw if unit is None else f"{raw} {unit}"
        if kind == "choice":
            if text not in entry.choices:
                return None, f"expected one of {', '.join(entry.choices)}"
        return text, None
    m = _VALUE_RE.match(raw if unit is None else f"{raw} {unit}")
    if not m:
        return None, f"cannot parse {raw!r} as a number"
    num, u = float(m.group(1)), m.group(2)
    if kind in UNITS:
        if u is None:
            return None, f"missing unit; expected one of {', '.join(UNITS[kind])}"
        if u not in UNITS[kind]:
            return None, f"unit {u!r} is not a {kind} unit ({', '.join(UNITS[kind])})"
        return num * UNITS[kind][u], None
    if u is not None:
        return None, f"{key} is dimensionless; unexpected unit {u!r}"
    if kind == "int":
        if not num.is_integer():
            return None, "expected an integer"
        num = int(num)
        if entry.choices and num not in entry.choices:
            return None, f"expected one of {', '.join(map(str, entry.choices))}"
    return num, None


def parse_text(text: str, source: Path | None = None) -> ScenarioConfig:
    """Parse scenario text; raises :class:`ConfigError` with every diagnostic."""
    diags: list[Diagnostic] = []
    scenario = None
    raw: dict[str, tuple[str, int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        stripped = body.strip()
        if not stripped:
            continue
        col = len(body) - len(body.lstrip()) + 1
        if scenario is None:
            m = _HEADER_RE.match(stripped)
            if not m:
                diags.append(Diagnostic(lineno, col, "<header>", "expected a [scenario] header"))
                return _fail(diags)
            scenario = m.group(1)
            if scenario not in SCENARIOS:
                diags.append(Diagnostic(lineno, col + 1, "<header>",
                                        f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}"))
                return _fail(diags)
            continue
        if "=" not in stripped:
            diags.append(Diagnostic(lineno, col, "<syntax>", "expected 'key = value'"))
            continue
        key, value = (s.strip() for s in body.split("=", 1))
        vcol = body.index("=") + 2 + (len(body.split("=", 1)[1]) - len(body.split("=", 1)[1].lstrip()))
        if key in raw:
            diags.append(Diagnostic(lineno, col, key, f"duplicate key (first on line {raw[key][1]})"))
            continue
        raw[key] = (value, lineno, vcol)
    if scenario is None:
        diags.append(Diagnostic(1, 1, "<header>", "empty configuration; expected a [scenario] header"))
        return _fail(diags)

    schema = SCHEMAS[scenario]
    values: dict = {}
    positions: dict = {}
    for key, (value, lineno, vcol) in raw.items():
        if key not in schema:
            diags.append(Diagnostic(lineno, 1, key, f"unknown key for scenario {scenario}"))
            continue
        entry = schema[key]
        kind = entry.kind
        if scenario == "fit" and key in ("guess", "lower", "upper"):
            model = raw.get("model", ("",))[0]
            kind = FIT_PARAM_KIND.get(model, "number")
        parts = value.split(None, 1)
        if not parts:
            diags.append(Diagnostic(lineno, vcol, key, "missing value"))
            continue
        v, err = _convert(kind, parts[0], parts[1] if len(parts) > 1 else None, key, entry)
        if err:
            diags.append(Diagnostic(lineno, vcol, key, err))
            continue
        values[key] = v
        positions[key] = (lineno, vcol)
    for key, entry in schema.items():
        if key not in raw:
            if entry.default is None:
                diags.append(Diagnostic(0, 0, key, "missing required key"))
            else:
                values[key] = entry.default
    diags += _semantic_checks(scenario, values, positions)
    if diags:
        return _fail(diags)
    return ScenarioConfig(scenario, values, source, positions)


def _fail(diags):
    raise ConfigError(diags)


def _semantic_checks(scenario, values, positions):
    out = []

    def where(k):
        return positions.get(k, (0, 0))

    for prefix in ("delta", "tau"):
        keys = [f"{prefix}_{s}" for s in ("min", "max", "points")]
        if all(k in values for k in keys):
            if values[keys[2]] < 2:
                out.append(Diagnostic(*where(keys[2]), keys[2], "grid needs at least 2 points"))
            if not values[keys[1]] > values[keys[0]]:
                out.append(Diagnostic(*where(keys[1]), keys[1], "grid must be increasing (max > min)"))
    for k, v in values.items():
        if isinstance(v, float) and k not in ("guess", "lower", "upper") and not math.isfinite(v):
            out.append(Diagnostic(*where(k), k, "value must be finite"))
    if "stirap_eff" in values and not 0.0 <= values["stirap_eff"] <= 1.0:
        out.append(Diagnostic(*where("stirap_eff"), "stirap_eff", "must lie in [0, 1]"))
    if values.get("depth_ratio", 1.0) < 1.0:
        out.append(Diagnostic(*where("depth_ratio"), "depth_ratio", "must be >= 1"))
    return out


def load(path) -> ScenarioConfig:
    path = Path(path)
    return parse_text(path.read_text(), path)


def validate_config(path) -> list[Diagnostic]:
    """Diagnostics for the file at ``path``; empty when it is valid.

    Unreadable files raise :class:`OSError`.
    """
    text = Path(path).read_text()
    try:
        parse_text(text, Path(path))
    except ConfigError as exc:
        return exc.diagnostics
    return []


def render(config: ScenarioConfig, extra_comments=()) -> str:
    """Serialize with canonical units and round-trip-exact numbers."""
    schema = SCHEMAS[config.scenario]
    lines = [f"[{config.scenario}]"] + [f"# {c}" for c in extra_comments]
    for key, entry in schema.items():
        v = config.values[key]
        kind = entry.kind
        if config.scenario == "fit" and key in ("guess", "lower", "upper"):
            kind = FIT_PARAM_KIND[config.values["model"]]
        if kind in CANONICAL_UNIT:
            lines.append(f"{key} = {float(v)!r} {CANONICAL_UNIT[kind]}")
        elif kind in ("int",):
            lines.append(f"{key} = {int(v)}")
        elif kind == "number":
            lines.append(f"{key} = {float(v)!r}")
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"

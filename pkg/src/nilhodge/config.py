"""Run configurations: INI files and named presets.

A configuration has four sections plus free parameters::

    [manifold]
    preset = kodaira-thurston          # or torus, or
    # constants = 3,1,2: 1             # c^k_ij entries "k,i,j: value" separated by ";"

    [frame]
    preset = Ja                        # Ja, example42, standard, or
    # phi1 = 1; 0; i; a                # coefficients of Phi^1 on e^1..e^4
    # phi2 = 0; 1; 0; i

    [metric]
    preset = omega_a                   # omega_a, omega_tilde_a, omega_0, omega_tf, or
    # h11 = "exp(2*t*sin(2*pi*x2)/(2*pi))"
    # h12 = 0
    # h21 = 0
    # h22 = 1

    [parameters]
    a = 1/2

    [solver]
    N = 8
    k = 6
    seed = 0
    gap_factor = 100
    cap = 1e-6
    method = auto

Inline comments start with "#"; ";" separates list entries.  Presets expand to explicit entries before anything runs; the expansion is
logged and echoed in reports.
"""

from __future__ import annotations

import configparser
import copy
import logging
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import AcsFrame, NilLieAlgebra
from .exact import Qi
from .expr import parse_expression
from .hermitian import MetricSpec

__all__ = [
    "ConfigError",
    "RunConfig",
    "RUN_PRESETS",
    "MANIFOLD_PRESETS",
    "FRAME_PRESETS",
    "METRIC_PRESETS",
    "load_config",
    "from_preset",
    "parse_param",
]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


MANIFOLD_PRESETS = {
    "kodaira-thurston": {"constants": "3,1,2: 1"},
    "torus": {"constants": ""},
}

FRAME_PRESETS = {
    "Ja": {"phi1": "1; 0; i; a", "phi2": "0; 1; 0; i"},
    "example42": {"phi1": "1; 0; i; 0", "phi2": "0; 1; 0; i"},
    "standard": {"phi1": "1; 0; i; 0", "phi2": "0; 1; 0; i"},
}

METRIC_PRESETS = {
    "identity": {"h11": "1", "h12": "0", "h21": "0", "h22": "1"},
    "omega_a": {"h11": "1", "h12": "0", "h21": "0", "h22": "1"},
    "omega_tilde_a": {"h11": "1", "h12": "-i*a", "h21": "i*a", "h22": "1"},
    "omega_0": {"h11": "1", "h12": "0", "h21": "0", "h22": "1"},
    "omega_tf": {"h11": "exp(2*t*f)", "h12": "0", "h21": "0", "h22": "1"},
}

# metric presets that pin the frame and its parameters
_METRIC_FRAMES = {
    "omega_a": ("Ja", {}),
    "omega_tilde_a": ("Ja", {}),
    "omega_0": ("Ja", {"a": "0"}),
    "omega_tf": ("example42", {}),
}

DEFAULT_PARAMS = {"a": "1/2", "t": "1", "f": "sin(2*pi*x2)/(2*pi)"}

RUN_PRESETS = {
    "omega_a": {"manifold": "kodaira-thurston", "frame": "Ja", "metric": "omega_a", "params": {"a": "1/2"}},
    "omega_tilde_a": {"manifold": "kodaira-thurston", "frame": "Ja", "metric": "omega_tilde_a", "params": {"a": "1/2"}},
    "omega_0": {"manifold": "kodaira-thurston", "frame": "Ja", "metric": "omega_0", "params": {"a": "0"}},
    "omega_tf": {
        "manifold": "kodaira-thurston",
        "frame": "example42",
        "metric": "omega_tf",
        "params": {"t": "1", "f": DEFAULT_PARAMS["f"]},
    },
    "torus": {"manifold": "torus", "frame": "standard", "metric": "identity", "params": {}},
}

SOLVER_DEFAULTS = {
    "N": 8,
    "N4": None,
    "k": 6,
    "seed": 0,
    "gap_factor": 100.0,
    "cap": 1e-6,
    "method": "auto",
    "tol": 1e-12,
    "maxiter": None,
}


def parse_param(text: str) -> tuple[str, str]:
    """``name=value`` from the command line."""
    if "=" not in text:
        raise ConfigError(f"parameter binding {text!r} is not of the form name=value")
    name, value = text.split("=", 1)
    name, value = name.strip(), value.strip()
    if not name.isidentifier():
        raise ConfigError(f"bad parameter name {name!r}")
    return name, value


def _strip(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        value = value[1:-1]
    return value


@dataclass
class RunConfig:
    """Expanded configuration: explicit entries plus parameter bindings."""

    manifold: dict
    frame: dict
    metric: dict
    params: dict
    solver: dict = field(default_factory=lambda: dict(SOLVER_DEFAULTS))
    expansion: list = field(default_factory=list)
    names: dict = field(default_factory=dict)

    # parameters ------------------------------------------------------------------

    def with_params(self, overrides: dict) -> "RunConfig":
        out = copy.deepcopy(self)
        for k, v in overrides.items():
            out.params[k] = str(v)
        return out

    def with_solver(self, **overrides) -> "RunConfig":
        out = copy.deepcopy(self)
        out.solver.update({k: v for k, v in overrides.items() if v is not None})
        return out

    def resolved_params(self) -> dict:
        """Numeric parameters as exact values; expression parameters stay as text."""
        out = {}
        for name, text in self.params.items():
            try:
                out[name] = Fraction(text)
            except (ValueError, ZeroDivisionError):
                out[name] = text
        return out

    def _expression_params(self) -> dict:
        # parameters that are themselves expressions are substituted textually
        return {k: v for k, v in self.resolved_params().items() if isinstance(v, str)}

    def _numeric_params(self) -> dict:
        return {k: v for k, v in self.resolved_params().items() if not isinstance(v, str)}

    def _expand(self, text: str) -> str:
        text = _strip(str(text))
        for name, sub in self._expression_params().items():
            text = _replace_name(text, name, f"({sub})")
        return text

    def _exact(self, text: str) -> Qi:
        expr = parse_expression(self._expand(text))
        return expr.exact(self._numeric_params())

    # objects -------------------------------------------------------------------------

    def algebra(self) -> NilLieAlgebra:
        consts = {}
        raw = _strip(self.manifold.get("constants", ""))
        for item in filter(None, (x.strip() for x in raw.split(";"))):
            try:
                idx, value = item.split(":")
                k, i, j = (int(x) for x in idx.split(","))
            except ValueError:
                raise ConfigError(f"bad structure constant entry {item!r}; expected 'k,i,j: value'") from None
            c = self._exact(value)
            if c.im:
                raise ConfigError(f"structure constant {item!r} must be real")
            consts[(k, i, j)] = c.re
        return NilLieAlgebra(consts, name=self.names.get("manifold", "custom"))

    def acs_frame(self, algebra: NilLieAlgebra | None = None) -> AcsFrame:
        algebra = algebra or self.algebra()
        rows = []
        for key in ("phi1", "phi2"):
            if key not in self.frame:
                raise ConfigError(f"frame section needs {key}")
            entries = [x for x in _strip(self.frame[key]).split(";")]
            if len(entries) != 4:
                raise ConfigError(f"{key} needs four entries separated by ';'")
            rows.append([self._exact(x) for x in entries])
        name = self.names.get("frame", "custom")
        if name == "Ja":
            name = f"J_a(a={self.params.get('a')})"
        return AcsFrame(algebra, rows, name=name)

    def metric_spec(self) -> MetricSpec:
        h = []
        for r in (1, 2):
            row = []
            for c in (1, 2):
                key = f"h{r}{c}"
                if key not in self.metric:
                    raise ConfigError(f"metric section needs {key}")
                text = self._expand(self.metric[key])
                try:
                    row.append(Qi(Fraction(text)))
                except (ValueError, ZeroDivisionError):
                    row.append(parse_expression(text))
            h.append(row)
        return MetricSpec(h, self._numeric_params(), name=self.names.get("metric", "custom"))

    def build(self):
        alg = self.algebra()
        return alg, self.acs_frame(alg), self.metric_spec()

    def to_dict(self) -> dict:
        return {
            "manifold": dict(self.manifold),
            "frame": dict(self.frame),
            "metric": dict(self.metric),
            "parameters": dict(self.params),
            "solver": dict(self.solver),
            "presets": dict(self.names),
            "expansion": list(self.expansion),
        }


def _replace_name(text: str, name: str, sub: str) -> str:
    # whole-identifier replacement
    out, i, n = [], 0, len(name)
    while i < len(text):
        if text.startswith(name, i):
            before = text[i - 1] if i else " "
            after = text[i + n] if i + n < len(text) else " "
            if not (before.isalnum() or before == "_") and not (after.isalnum() or after == "_"):
                out.append(sub)
                i += n
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


def _expand_section(section: dict, presets: dict, kind: str, log_lines: list) -> tuple[dict, str | None]:
    section = {k: v for k, v in section.items()}
    name = section.pop("preset", None)
    if name is None:
        return section, None
    name = _strip(name)
    if name not in presets:
        raise ConfigError(f"unknown {kind} preset {name!r}; known: {', '.join(sorted(presets))}")
    expanded = dict(presets[name])
    expanded.update(section)
    line = f"{kind} preset {name!r} -> " + ", ".join(f"{k} = {v}" for k, v in expanded.items())
    log_lines.append(line)
    log.info(line)
    return expanded, name


def _assemble(manifold: dict, frame: dict, metric: dict, params: dict, solver: dict) -> RunConfig:
    lines: list[str] = []
    names = {}
    metric_name = _strip(metric.get("preset", "")) or None
    if metric_name in _METRIC_FRAMES:
        fname, fixed = _METRIC_FRAMES[metric_name]
        if "preset" not in frame and "phi1" not in frame:
            frame = {"preset": fname, **frame}
        for k, v in fixed.items():
            if k in params and Fraction(params[k]) != Fraction(v):
                raise ConfigError(f"metric preset {metric_name!r} requires {k} = {v}, got {params[k]}")
            params = {**params, k: v}
    man, names["manifold"] = _expand_section(manifold, MANIFOLD_PRESETS, "manifold", lines)
    fr, names["frame"] = _expand_section(frame, FRAME_PRESETS, "frame", lines)
    met, names["metric"] = _expand_section(metric, METRIC_PRESETS, "metric", lines)
    names = {k: v for k, v in names.items() if v}
    used = " ".join(list(fr.values()) + list(met.values()) + list(man.values()))
    full = dict(params)
    for k, v in DEFAULT_PARAMS.items():
        if k not in full and _mentions(used, k):
            full[k] = v
            lines.append(f"parameter {k} defaulted to {v}")
            log.info(lines[-1])
    cfg = RunConfig(man, fr, met, full, _solver(solver), lines, names)
    return cfg


def _mentions(text: str, name: str) -> bool:
    return _replace_name(text, name, "\0") != text


def _solver(raw: dict) -> dict:
    out = dict(SOLVER_DEFAULTS)
    casts = {"N": int, "N4": int, "k": int, "seed": int, "gap_factor": float, "cap": float, "tol": float, "maxiter": int}
    for key, value in raw.items():
        if key not in SOLVER_DEFAULTS:
            raise ConfigError(f"unknown solver option {key!r}")
        value = _strip(str(value))
        if key in casts:
            try:
                out[key] = casts[key](value) if value not in ("", "none", "None") else None
            except ValueError:
                raise ConfigError(f"solver option {key} = {value!r} is not a number") from None
        else:
            out[key] = value
    return out


def from_preset(name: str, params: dict | None = None) -> RunConfig:
    if name not in RUN_PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(RUN_PRESETS))}")
    p = RUN_PRESETS[name]
    merged = {**p["params"], **(params or {})}
    return _assemble({"preset": p["manifold"]}, {"preset": p["frame"]}, {"preset": p["metric"]}, merged, {})


def load_config(path, params: dict | None = None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str  # keep N, h11 etc. as written
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(parser.sections()) - {"manifold", "frame", "metric", "parameters", "solver"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    sec = {s: dict(parser[s]) if parser.has_section(s) else {} for s in ("manifold", "frame", "metric", "parameters", "solver")}
    merged = {k: _strip(v) for k, v in sec["parameters"].items()}
    merged.update(params or {})
    if not sec["manifold"]:
        raise ConfigError(f"{path}: missing [manifold] section")
    return _assemble(sec["manifold"], sec["frame"], sec["metric"], merged, sec["solver"])

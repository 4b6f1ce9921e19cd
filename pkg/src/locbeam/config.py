"""Experiment configuration: JSON schema, defaults and unit conversion.

Quantities with units may be given as numbers (SI / linear) or strings:
powers as ``"27 dBm"``, ``"500 mW"`` or ``"0.5 W"``; gains as ``"-30 dB"``;
frequencies as ``"60 GHz"``.  Everything is stored in linear SI units.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .geometry import ArrayGeometry, ChannelParams, PathLossParams
from .robust import PhaseSet

KINDS = ("bound_sweep", "bound_vs_position", "snr_vs_N", "snr_vs_eps", "convergence", "restricted_set")

DEFAULTS = {
    "kind": "snr_vs_N",
    "layout": {
        "bs_anchor": [0.0, 0.0, 25.0],
        "ris_anchor": [2.0, -2.0, 26.0],
        "p_hat": [10.0, 5.0, 18.0],
        "d_bs": 0.005,
        "d_ris": 0.005,
    },
    "M": 32,
    "L": [2, 4, 6],
    "eps_dp": [0.1, 0.3, 0.5],
    "channel": {
        "fc": "60 GHz",
        "kappa_r": 20.0,
        "zeta0": "-30 dB",
        "d0": 1.0,
        "alpha": 2.2,
        "delta_ru_nlos": 1e-4,
        "delta_bu": 0.0,
        "e_bu": 1,
        "beta": 1.0,
    },
    "power": {"P_T": "27 dBm", "sigma_n2": "-80 dBm"},
    "solver": {
        "phase_solver": "sdr",
        "eps_R": 1e-4,
        "tol_bnb": 2e-4,
        "T": 50,
        "max_nodes": 1000,
        "mc_trials": 50000,
        "runs": 1,
        "seed": 0,
    },
    "phase_set": {"kind": "full"},
    "restricted_sets": [[0.0, math.pi], [0.0, math.pi / 2]],
    "positions": {"axis": "x", "values": [6.0, 8.0, 10.0, 12.0, 14.0]},
}

_num = {"type": "number"}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_unit = {"oneOf": [_num, {"type": "string"}]}
_list_num = {"type": "array", "items": _num}


def _obj(props, **extra):
    return {"type": "object", "properties": props, "additionalProperties": False, **extra}


SCHEMA = _obj(
    {
        "kind": {"enum": list(KINDS)},
        "layout": _obj(
            {
                "bs_anchor": _vec3,
                "ris_anchor": _vec3,
                "p_hat": _vec3,
                "d_bs": {"type": "number", "exclusiveMinimum": 0},
                "d_ris": {"type": "number", "exclusiveMinimum": 0},
            }
        ),
        "M": {"type": "integer", "minimum": 1},
        "L": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "eps_dp": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "channel": _obj(
            {
                "fc": _unit,
                "kappa_r": {"type": "number", "minimum": 0},
                "zeta0": _unit,
                "d0": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "delta_ru_nlos": {"type": "number", "minimum": 0},
                "delta_bu": {"type": "number", "minimum": 0},
                "e_bu": {"enum": [0, 1]},
                "beta": {"type": "number", "exclusiveMinimum": 0},
            }
        ),
        "power": _obj({"P_T": _unit, "sigma_n2": _unit}),
        "solver": _obj(
            {
                "phase_solver": {"enum": ["sdr", "bnb"]},
                "eps_R": {"type": "number", "exclusiveMinimum": 0},
                "tol_bnb": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "integer", "minimum": 1},
                "max_nodes": {"type": "integer", "minimum": 1},
                "mc_trials": {"type": "integer", "minimum": 1},
                "runs": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            }
        ),
        "phase_set": _obj(
            {
                "kind": {"enum": ["full", "interval", "discrete"]},
                "lo": _num,
                "hi": _num,
                "levels": {"type": "integer", "minimum": 2},
            },
            required=["kind"],
        ),
        "restricted_sets": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
        "positions": _obj({"axis": {"enum": ["x", "y", "z"]}, "values": _list_num}),
    }
)


class ConfigError(ValueError):
    pass


_UNIT_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")
_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}


def _split(value, where):
    m = _UNIT_RE.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    return float(m.group(1)), m.group(2).lower()


def power_watts(value, where="power"):
    """Convert ``"27 dBm"``, ``"500 mW"``, ``"0.5 W"`` or a number (watts) to watts."""
    if isinstance(value, (int, float)):
        return float(value)
    x, u = _split(value, where)
    if u == "dbm":
        return 10 ** (x / 10) * 1e-3
    if u == "dbw":
        return 10 ** (x / 10)
    if u == "mw":
        return x * 1e-3
    if u in ("w", ""):
        return x
    raise ConfigError(f"{where}: unknown power unit {u!r}")


def gain_linear(value, where="gain"):
    if isinstance(value, (int, float)):
        return float(value)
    x, u = _split(value, where)
    if u == "db":
        return 10 ** (x / 10)
    if u == "":
        return x
    raise ConfigError(f"{where}: unknown gain unit {u!r}")


def frequency_hz(value, where="fc"):
    if isinstance(value, (int, float)):
        return float(value)
    x, u = _split(value, where)
    if u not in _FREQ and u != "":
        raise ConfigError(f"{where}: unknown frequency unit {u!r}")
    return x * _FREQ.get(u, 1.0)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "phase_set":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    kind: str
    geometry_template: ArrayGeometry
    p_hat: tuple
    L_list: list
    eps_dp_list: list
    channel: ChannelParams
    path_loss: PathLossParams
    P_T: float
    sigma_n2: float
    phase_solver: str
    eps_R: float
    tol_bnb: float
    T: int
    max_nodes: int
    mc_trials: int
    runs: int
    seed: int
    phase_set: PhaseSet
    restricted_sets: list
    position_axis: str
    position_values: list
    raw: dict = field(repr=False, default_factory=dict)

    def geometry(self, L) -> ArrayGeometry:
        g = self.geometry_template
        return ArrayGeometry(g.bs_anchor, g.ris_anchor, g.d_bs, g.d_ris, g.M, int(L))

    def to_dict(self):
        """Normalized JSON-ready document (defaults filled, units kept as given)."""
        return copy.deepcopy(self.raw)

    def with_overrides(self, **kw):
        doc = _merge(self.raw, kw)
        return build_config(doc)


def _phase_set(d, where="phase_set"):
    kind = d["kind"]
    if kind == "full":
        return PhaseSet.full()
    if kind == "interval":
        if "lo" not in d or "hi" not in d:
            raise ConfigError(f"{where}: interval sets need 'lo' and 'hi'")
        if not d["hi"] > d["lo"]:
            raise ConfigError(f"{where}: need hi > lo")
        return PhaseSet.interval(d["lo"], d["hi"])
    if "levels" not in d:
        raise ConfigError(f"{where}: discrete sets need 'levels'")
    return PhaseSet.discrete(d["levels"])


def validate_document(doc):
    v = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{path}: {e.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(msgs))


def build_config(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>: configuration must be a JSON object")
    if doc.get("kind") == "run_manifest":
        if "config" not in doc:
            raise ConfigError("run_manifest: missing 'config'")
        over = dict(doc["config"])
        if "seed" in doc:
            over.setdefault("solver", {})
            over["solver"] = {**over["solver"], "seed": doc["seed"]}
        doc = over
    validate_document(doc)
    full = _merge(DEFAULTS, doc)
    lay, ch, pw, so = full["layout"], full["channel"], full["power"], full["solver"]
    geom = ArrayGeometry(tuple(lay["bs_anchor"]), tuple(lay["ris_anchor"]), lay["d_bs"], lay["d_ris"], full["M"], 1)
    fc = frequency_hz(ch["fc"], "channel/fc")
    if fc <= 0:
        raise ConfigError("channel/fc: must be positive")
    params = ChannelParams.from_carrier(
        fc,
        kappa_r=ch["kappa_r"],
        delta_ru_nlos=ch["delta_ru_nlos"],
        delta_bu=ch["delta_bu"],
        e_bu=ch["e_bu"],
        beta=ch["beta"],
    )
    pl = PathLossParams(zeta0=gain_linear(ch["zeta0"], "channel/zeta0"), d0=ch["d0"], alpha=ch["alpha"])
    P_T = power_watts(pw["P_T"], "power/P_T")
    s2 = power_watts(pw["sigma_n2"], "power/sigma_n2")
    if P_T <= 0 or s2 <= 0:
        raise ConfigError("power: P_T and sigma_n2 must be positive")
    return ExperimentConfig(
        kind=full["kind"],
        geometry_template=geom,
        p_hat=tuple(lay["p_hat"]),
        L_list=list(full["L"]),
        eps_dp_list=list(full["eps_dp"]),
        channel=params,
        path_loss=pl,
        P_T=P_T,
        sigma_n2=s2,
        phase_solver=so["phase_solver"],
        eps_R=so["eps_R"],
        tol_bnb=so["tol_bnb"],
        T=so["T"],
        max_nodes=so["max_nodes"],
        mc_trials=so["mc_trials"],
        runs=so["runs"],
        seed=so["seed"],
        phase_set=_phase_set(full["phase_set"]),
        restricted_sets=[tuple(x) for x in full["restricted_sets"]],
        position_axis=full["positions"]["axis"],
        position_values=list(full["positions"]["values"]),
        raw=full,
    )


def parse_config(path) -> ExperimentConfig:
    """Read a JSON config (or an emitted run manifest) and fill defaults."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    return build_config(doc)

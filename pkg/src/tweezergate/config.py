"""
Run configuration: schema, defaults, overrides and unit conversion.

Config files are YAML (JSON documents are accepted too, including the
``metadata.config`` echo written into structured outputs). All
frequencies are ordinary frequencies in Hz; lengths carry their unit in
the key name (``_um``, ``_nm``), masses are in atomic mass units.
"""
import copy
import json
import math
from importlib import resources

import yaml

from .constants import AMU, TWO_PI
from .errors import TweezerGateError

__all__ = ["ConfigError", "EXPERIMENTS", "DEFAULTS", "load_config", "apply_overrides",
           "validate", "bundled_config_path", "chain_from_config"]

EXPERIMENTS = ("modes", "gate", "synth", "noise", "scan")


class ConfigError(TweezerGateError, ValueError):
    """Unreadable, malformed or inconsistent configuration."""


# Each leaf is (type, default). ``None`` defaults mark optional values.
_SCHEMA = {
    "experiment": (str, "modes"),
    "seed": (int, 0),
    "chain": {
        "n_ions": (int, 3),
        "axial_freq_hz": (float, 360e3),
        "tweezed": (list, [1]),
        "light_shift_hz": (float, 10.4e6),
        "beam_waist_um": (float, 1.0),
        "ion_mass_amu": (float, 39.9625908),
        "drive_wavelength_nm": (float, 729.0),
        "axis_projection": (float, 1.0),
        "qubit_offsets_hz": (list, []),
    },
    "gate": {
        "mode": (int, 2),
        "delta0_hz": (float, 4e3),
        "duration_s": (float, 500e-6),
        "rabi_hz": (float, None),
        "nbar": (float, 0.0),
        "cases": (list, ["D", "S"]),
        "samples": (int, 512),
        "counter_rotating": (bool, False),
        "oracle": (bool, False),
        "oracle_cutoff": (int, 30),
    },
    "drive": {
        "tones": (list, []),
        "duration_s": (float, None),
    },
    "synth": {
        "n": (int, None),
        "mode": (int, None),
        "nu_com_hz": (float, None),
        "delta_nu_hz": (float, None),
        "eta": (float, None),
        "target_angle": (float, math.pi / 2),
        "duration_s": (float, None),
        "tone_offsets_hz": (list, None),
        "max_total_rabi_hz": (float, None),
        "closure_tol": (float, 1e-6),
        "phase_tol": (float, 1e-4),
        "starts": (int, 8),
        "selection": (str, "fastest"),
        "exact_eta": (bool, False),
        "samples": (int, 257),
    },
    "noise": {
        "channels": (list, [
            {"kind": "quasi_static_gaussian", "target": "drive_intensity",
             "amplitude": 0.03},
            {"kind": "quasi_static_gaussian", "target": "trap_freq",
             "amplitude": 100.0},
        ]),
        "trials": (int, 10000),
        "cases": (list, ["D", "S"]),
        "dd_stages": (list, [0, 1, 2, 4, 8]),
        "dd_trials": (int, 2000),
    },
    "scan": {
        "light_shift_hz": (list, [0.0, 25e6, 26]),
        "beam_waists_um": (list, [0.8, 1.0, 1.5]),
        "modes": (list, [0, 2]),
    },
    "output": {
        "dir": (str, "out"),
        "format": (str, "csv"),
    },
}

_CHANNEL_KEYS = {"kind", "target", "amplitude", "correlation_time_s", "seed"}
_TONE_KEYS = {"mu_hz", "rabi_hz", "phase"}


def _defaults(schema):
    return {k: (_defaults(v) if isinstance(v, dict) else copy.deepcopy(v[1]))
            for k, v in schema.items()}


DEFAULTS = _defaults(_SCHEMA)


def _coerce(value, typ, path):
    if value is None:
        return None
    try:
        if typ is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false"):
                return value.lower() == "true"
            raise ValueError
        if typ is int:
            if isinstance(value, bool):
                raise ValueError
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if typ is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if typ is list:
            if not isinstance(value, (list, tuple)):
                raise ValueError
            return list(value)
        if typ is str:
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected {typ.__name__}, got {value!r}") from None
    return value


def _merge(schema, base, user, path=""):
    if not isinstance(user, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    for key, value in user.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in schema:
            raise ConfigError(f"unknown config key {where!r}")
        node = schema[key]
        if isinstance(node, dict):
            _merge(node, base[key], value if value is not None else {}, where)
        else:
            base[key] = _coerce(value, node[0], where)
    return base


def validate(cfg):
    """Check cross-field consistency; returns ``cfg``."""
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
    if cfg["output"]["format"] not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    for i, ch in enumerate(cfg["noise"]["channels"]):
        if not isinstance(ch, dict) or set(ch) - _CHANNEL_KEYS:
            raise ConfigError(f"noise.channels[{i}]: keys must be among {sorted(_CHANNEL_KEYS)}")
    for i, tone in enumerate(cfg["drive"]["tones"]):
        if not isinstance(tone, dict) or set(tone) - _TONE_KEYS or "mu_hz" not in tone:
            raise ConfigError(f"drive.tones[{i}]: keys must be among {sorted(_TONE_KEYS)}")
    for case in cfg["gate"]["cases"] + cfg["noise"]["cases"]:
        if case not in ("D", "S"):
            raise ConfigError(f"unknown case {case!r}")
    if len(cfg["scan"]["light_shift_hz"]) != 3:
        raise ConfigError("scan.light_shift_hz must be [start, stop, count]")
    return cfg


def bundled_config_path():
    """Path of the bundled configuration with the three-ion gate parameters."""
    return resources.files("tweezergate") / "data" / "paper.yaml"


def _read(path):
    try:
        text = open(path, encoding="utf-8").read() if not hasattr(path, "read_text") \
            else path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    doc = doc or {}
    # structured outputs echo their config under metadata.config
    if isinstance(doc, dict) and "metadata" in doc and "config" in doc.get("metadata", {}):
        doc = doc["metadata"]["config"]
    return doc


def load_config(path=None, overrides=()):
    """Defaults, updated by the file at ``path`` and ``key.path=value`` overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        _merge(_SCHEMA, cfg, _read(path))
    apply_overrides(cfg, overrides)
    return validate(cfg)


def apply_overrides(cfg, overrides):
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}") from exc
        nested = value
        for part in reversed(key.strip().split(".")):
            nested = {part: nested}
        _merge(_SCHEMA, cfg, nested)
    return cfg


def chain_from_config(section):
    """:class:`ChainConfig` in SI units from the ``chain`` section."""
    from .chain import ChainConfig
    n = section["n_ions"]
    tweezed = set(int(i) for i in section["tweezed"])
    if any(not 0 <= i < n for i in tweezed):
        raise ConfigError("chain.tweezed indices out of range")
    offsets = [TWO_PI * float(o) for o in section["qubit_offsets_hz"]]
    return ChainConfig(
        n_ions=n,
        axial_freq=TWO_PI * section["axial_freq_hz"],
        tweezer_flags=tuple(i in tweezed for i in range(n)),
        light_shift=TWO_PI * section["light_shift_hz"],
        beam_waist=section["beam_waist_um"] * 1e-6,
        ion_mass=section["ion_mass_amu"] * AMU,
        qubit_offsets=tuple(offsets),
        drive_wavelength=section["drive_wavelength_nm"] * 1e-9,
        axis_projection=section["axis_projection"])

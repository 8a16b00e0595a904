"""Experiment configuration files.

Files are YAML. Every physical quantity is a string carrying its unit, e.g.
``dn: 20 mJ`` or ``lambda: 1/30 1/s``, so a bare number is rejected.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from .energy_model import SystemConfig, TransmitterConfig
from .errors import ConfigError, EHSwitchError
from .policies import MODES, POLICY_NAMES

__all__ = ["ExperimentConfig", "load_config", "parse_quantity", "PAPER_CONFIG"]

PAPER_CONFIG = "paper.config"

# unit -> (dimension, factor to the internal unit)
_UNITS = {
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "mJ": ("energy", 1.0),
    "J": ("energy", 1e3),
    "uJ": ("energy", 1e-3),
    "mW": ("power", 1.0),
    "W": ("power", 1e3),
    "MHz": ("bandwidth", 1.0),
    "kHz": ("bandwidth", 1e-3),
    "Hz": ("bandwidth", 1e-6),
    "Mbit": ("data", 1.0),
    "kbit": ("data", 1e-3),
    "bit": ("data", 1e-6),
    "1/s": ("rate", 1.0),
    "/s": ("rate", 1.0),
    "W/Hz": ("psd", 1.0),
    "dB": ("db", 1.0),
}

_QUANTITY = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?\d+)?(?:\s*/\s*[0-9.]+(?:[eE][-+]?\d+)?)?)\s+(\S+)\s*$")


def parse_quantity(text: Any, dimension: str) -> float:
    """``"1/30 1/s"`` -> 0.0333..., checking the unit's dimension."""
    if not isinstance(text, str):
        raise ConfigError(f"{text!r}: expected a quantity with a unit ({dimension})")
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigError(f"{text!r}: expected '<number> <unit>'")
    number, unit = m.groups()
    if unit not in _UNITS:
        raise ConfigError(f"{text!r}: unknown unit {unit!r}")
    dim, factor = _UNITS[unit]
    if dim != dimension:
        raise ConfigError(f"{text!r}: unit {unit!r} is {dim}, expected {dimension}")
    try:
        value = float(Fraction(number.replace(" ", ""))) if "/" in number else float(number)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{text!r}: {exc}") from None
    return value * factor


@dataclass
class ExperimentConfig:
    system: SystemConfig
    policies: list[str] = field(default_factory=lambda: list(POLICY_NAMES))
    n_runs: int = 500
    master_seed: int = 0
    mode: str = "known"
    paper_literal_mean: bool = False
    out: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.policies:
            raise ConfigError("policy list is empty")
        bad = [p for p in self.policies if p not in POLICY_NAMES]
        if bad:
            raise ConfigError(f"unknown policies {bad}; choose from {list(POLICY_NAMES)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the effective settings."""
        s = self.system
        payload = {
            "transmitters": [[t.id, t.lam, t.dn, t.up, t.pathloss_db] for t in s.transmitters],
            "bandwidth": s.bandwidth,
            "noise_psd": s.noise_psd,
            "target_bits": s.target_bits,
            "horizon": s.horizon,
            "initial_energy": s.initial_energy,
            "gain_ref": s.gain_ref,
            "trace_horizon": s.trace_horizon,
            "policies": self.policies,
            "n_runs": self.n_runs,
            "master_seed": self.master_seed,
            "mode": self.mode,
            "paper_literal_mean": self.paper_literal_mean,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def provenance(self) -> str:
        return f"# seed={self.master_seed} config_sha256={self.digest()}"


def _transmitter(i: int, entry: dict) -> TransmitterConfig:
    try:
        return TransmitterConfig(
            id=int(entry.get("id", i)),
            lam=parse_quantity(entry["lambda"], "rate"),
            dn=parse_quantity(entry["dn"], "energy"),
            up=parse_quantity(entry["up"], "energy"),
            pathloss_db=parse_quantity(entry["pathloss"], "db"),
        )
    except KeyError as exc:
        raise ConfigError(f"transmitter {i}: missing key {exc}") from None


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    sysd = doc.get("system") or {}
    txs = doc.get("transmitters")
    if not txs:
        raise ConfigError("no transmitters listed")
    exp = doc.get("experiment") or {}
    try:
        transmitters = [_transmitter(i, e) for i, e in enumerate(txs, 1)]
        target = sysd.get("target_bits")
        horizon = sysd.get("horizon")
        trace_h = sysd.get("trace_horizon")
        system = SystemConfig(
            transmitters=transmitters,
            bandwidth=parse_quantity(sysd.get("bandwidth", "1 MHz"), "bandwidth"),
            noise_psd=parse_quantity(sysd.get("noise_psd", "1e-19 W/Hz"), "psd"),
            target_bits=parse_quantity(target, "data") if target is not None else None,
            horizon=parse_quantity(horizon, "time") if horizon is not None else None,
            rng_seed=int(exp.get("seed", 0)),
            initial_energy=str(sysd.get("initial_energy", "uniform")),
            gain_ref=str(sysd.get("gain_ref", "harvest-weighted")),
            trace_horizon=parse_quantity(trace_h, "time") if trace_h is not None else None,
        )
        policies = exp.get("policies", list(POLICY_NAMES))
        if isinstance(policies, str):
            policies = [p.strip() for p in policies.split(",") if p.strip()]
        return ExperimentConfig(
            system=system,
            policies=list(policies),
            n_runs=int(exp.get("runs", 500)),
            master_seed=int(exp.get("seed", 0)),
            mode=str(exp.get("mode", "known")),
            paper_literal_mean=bool(exp.get("paper_literal_mean", False)),
            out=exp.get("out"),
            raw=doc,
        )
    except ConfigError:
        raise
    except (EHSwitchError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """Load a config file; ``None`` selects the bundled four-transmitter
    setup."""
    if path in (None, PAPER_CONFIG):
        text = resources.files("ehswitch").joinpath("data", PAPER_CONFIG).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return config_from_dict(doc)

"""Stochastic energy-harvest traces for each transmitter.

Arrivals at transmitter ``m`` form a Poisson process of rate ``lambda``;
each arrival deposits an amount drawn from Uniform(dn, up) in mJ.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .errors import InvalidArgument, InvalidTrace

__all__ = [
    "TransmitterConfig",
    "HarvestEvent",
    "HarvestTrace",
    "SystemConfig",
    "sample_trace",
    "sample_traces",
    "merge_epochs",
    "write_traces",
    "read_traces",
    "dumps_traces",
    "loads_traces",
]

INITIAL_ENERGY_MODES = ("uniform", "zero")


@dataclass(frozen=True)
class TransmitterConfig:
    id: int
    lam: float  # arrivals per second
    dn: float  # mJ
    up: float  # mJ
    pathloss_db: float

    def __post_init__(self):
        if self.id < 1:
            raise InvalidArgument(f"transmitter id must be >= 1, got {self.id}")
        if not self.lam > 0:
            raise InvalidArgument(f"TX{self.id}: lambda must be > 0, got {self.lam}")
        if not 0 <= self.dn < self.up:
            raise InvalidArgument(f"TX{self.id}: need 0 <= dn < up, got ({self.dn}, {self.up})")
        if not math.isfinite(self.pathloss_db):
            raise InvalidArgument(f"TX{self.id}: pathloss must be finite")

    @property
    def mean_amount(self) -> float:
        return 0.5 * (self.dn + self.up)

    @property
    def mean_power(self) -> float:
        """Long-run harvested power in mW."""
        return self.lam * self.mean_amount

    @property
    def gain(self) -> float:
        """Linear channel gain from the path loss in dB."""
        return 10.0 ** (self.pathloss_db / 10.0)


@dataclass(frozen=True)
class HarvestEvent:
    time: float
    amount: float


@dataclass
class HarvestTrace:
    """Arrival times and amounts for one transmitter.

    ``initial_energy`` is available at t = 0. ``horizon`` is the time up to
    which the trace is complete; arrivals after it are unknown.
    """

    transmitter_id: int
    times: np.ndarray
    amounts: np.ndarray
    initial_energy: float = 0.0
    horizon: float = math.inf

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.amounts = np.asarray(self.amounts, dtype=float).reshape(-1)
        if self.times.shape != self.amounts.shape:
            raise InvalidTrace("times and amounts differ in length")
        if self.times.size:
            if self.times[0] < 0:
                raise InvalidTrace(f"TX{self.transmitter_id}: negative event time")
            if np.any(np.diff(self.times) <= 0):
                raise InvalidTrace(f"TX{self.transmitter_id}: event times not strictly increasing")
            if self.times[-1] > self.horizon:
                raise InvalidTrace(f"TX{self.transmitter_id}: event beyond trace horizon")
        if np.any(self.amounts < 0) or self.initial_energy < 0:
            raise InvalidTrace(f"TX{self.transmitter_id}: negative energy")

    def __len__(self):
        return int(self.times.size)

    @property
    def events(self) -> list[HarvestEvent]:
        return [HarvestEvent(float(t), float(a)) for t, a in zip(self.times, self.amounts)]

    @property
    def total_energy(self) -> float:
        return float(self.initial_energy + self.amounts.sum())

    def check_amounts(self, cfg: TransmitterConfig) -> None:
        """Raise if any amount lies outside the open interval (dn, up)."""
        if self.amounts.size and (
            np.any(self.amounts <= cfg.dn) or np.any(self.amounts >= cfg.up)
        ):
            raise InvalidTrace(f"TX{self.transmitter_id}: amount outside ({cfg.dn}, {cfg.up})")


@dataclass
class SystemConfig:
    transmitters: list[TransmitterConfig]
    bandwidth: float = 1.0  # MHz
    noise_psd: float = 1e-19  # W/Hz
    target_bits: Optional[float] = None  # Mbit
    horizon: Optional[float] = None  # s
    rng_seed: int = 0
    initial_energy: str = "uniform"
    gain_ref: str = "harvest-weighted"
    trace_horizon: Optional[float] = None  # s; derived when None

    def __post_init__(self):
        if len(self.transmitters) < 2:
            raise InvalidArgument("need at least 2 transmitters")
        ids = [tx.id for tx in self.transmitters]
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise InvalidArgument(f"transmitter ids must be 1..M, got {ids}")
        if not self.bandwidth > 0 or not self.noise_psd > 0:
            raise InvalidArgument("bandwidth and noise_psd must be positive")
        if (self.target_bits is None) == (self.horizon is None):
            raise InvalidArgument("exactly one of target_bits / horizon must be set")
        if self.target_bits is not None and not self.target_bits > 0:
            raise InvalidArgument("target_bits must be positive")
        if self.horizon is not None and not self.horizon > 0:
            raise InvalidArgument("horizon must be positive")
        if self.initial_energy not in INITIAL_ENERGY_MODES:
            raise InvalidArgument(f"initial_energy must be one of {INITIAL_ENERGY_MODES}")

    @property
    def mean_harvest_power(self) -> float:
        return sum(tx.mean_power for tx in self.transmitters)


def _uniform_open(rng: np.random.Generator, lo: float, hi: float, size=None):
    # Generator.uniform samples [lo, hi); redraw the closed endpoint.
    x = rng.uniform(lo, hi, size)
    if size is None:
        while x <= lo:
            x = rng.uniform(lo, hi)
        return x
    bad = x <= lo
    while bad.any():
        x[bad] = rng.uniform(lo, hi, int(bad.sum()))
        bad = x <= lo
    return x


def sample_trace(
    cfg: TransmitterConfig,
    horizon: float,
    rng: np.random.Generator,
    initial_energy: str | float = "uniform",
) -> HarvestTrace:
    """Draw one transmitter's arrivals on ``(0, horizon]``.

    ``initial_energy`` is ``"uniform"`` (one Uniform(dn, up) draw at t = 0),
    ``"zero"``, or an explicit amount in mJ.
    """
    if not horizon > 0:
        raise InvalidArgument(f"horizon must be positive, got {horizon}")
    if initial_energy == "uniform":
        e0 = float(_uniform_open(rng, cfg.dn, cfg.up))
    elif initial_energy == "zero":
        e0 = 0.0
    else:
        e0 = float(initial_energy)

    scale = 1.0 / cfg.lam
    chunk = int(horizon * cfg.lam + 5.0 * math.sqrt(horizon * cfg.lam) + 16)
    times = np.cumsum(rng.exponential(scale, chunk))
    while times[-1] <= horizon:
        more = times[-1] + np.cumsum(rng.exponential(scale, chunk))
        times = np.concatenate([times, more])
    times = times[times <= horizon]
    amounts = _uniform_open(rng, cfg.dn, cfg.up, times.size)
    return HarvestTrace(cfg.id, times, amounts, e0, horizon)


def sample_traces(
    system: SystemConfig, horizon: float, rng: np.random.Generator
) -> list[HarvestTrace]:
    return [sample_trace(tx, horizon, rng, system.initial_energy) for tx in system.transmitters]


def merge_epochs(traces: Sequence[HarvestTrace]) -> list[tuple[float, int, float]]:
    """All arrivals as ``(time, transmitter_id, amount)`` sorted by time.

    Equal times are ordered by transmitter id.
    """
    if not traces:
        raise InvalidArgument("no traces given")
    rows = []
    for tr in traces:
        rows.extend(zip(tr.times.tolist(), [tr.transmitter_id] * len(tr), tr.amounts.tolist()))
    rows.sort(key=lambda r: (r[0], r[1]))
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0] and a[1] == b[1]:
            raise InvalidTrace(f"duplicate epoch ({a[0]}, TX{a[1]})")
    return rows


def write_traces(traces: Iterable[HarvestTrace], fh: TextIO) -> None:
    """Write ``time_s,transmitter_id,amount_mJ`` lines.

    Initial energies are written as time-0 lines; sampled arrivals never land
    exactly on t = 0, so the round trip is unambiguous.
    """
    traces = list(traces)
    for tr in traces:
        if tr.initial_energy > 0:
            fh.write(f"{0.0!r},{tr.transmitter_id},{tr.initial_energy!r}\n")
    for t, tx, a in merge_epochs(traces):
        fh.write(f"{t!r},{tx},{a!r}\n")


def read_traces(fh: TextIO, n_transmitters: Optional[int] = None) -> list[HarvestTrace]:
    initial: dict[int, float] = {}
    events: dict[int, list[tuple[float, float]]] = {}
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InvalidTrace(f"line {lineno}: expected time_s,transmitter_id,amount_mJ")
        try:
            t, tx, a = float(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise InvalidTrace(f"line {lineno}: {exc}") from None
        if t == 0.0:
            initial[tx] = initial.get(tx, 0.0) + a
        else:
            events.setdefault(tx, []).append((t, a))
    ids = set(initial) | set(events)
    m = n_transmitters if n_transmitters is not None else max(ids, default=0)
    if ids and (min(ids) < 1 or max(ids) > m):
        raise InvalidTrace(f"transmitter ids {sorted(ids)} outside 1..{m}")
    out = []
    for tx in range(1, m + 1):
        ev = sorted(events.get(tx, []))
        times = np.array([e[0] for e in ev], dtype=float)
        amounts = np.array([e[1] for e in ev], dtype=float)
        out.append(HarvestTrace(tx, times, amounts, initial.get(tx, 0.0)))
    return out


def dumps_traces(traces: Iterable[HarvestTrace]) -> str:
    buf = io.StringIO()
    write_traces(traces, buf)
    return buf.getvalue()


def loads_traces(text: str, n_transmitters: Optional[int] = None) -> list[HarvestTrace]:
    return read_traces(io.StringIO(text), n_transmitters)

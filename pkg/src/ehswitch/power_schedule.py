"""Offline optimal power schedule of the aggregated ("whole") transmitter.

All transmitters' harvests are pooled into one energy staircase. The power
profile that sends the most bits by a horizon under energy causality is the
taut string below that staircase: the greatest convex minorant of the
staircase's lower corners. Its slopes are the piecewise-constant powers.

Units throughout: s, mJ, mW, MHz, Mbit (so mJ / s = mW and MHz * s = Mbit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .energy_model import HarvestTrace, TransmitterConfig
from .errors import EmptySchedule, InfeasibleTarget, InvalidArgument, OutOfRange

__all__ = [
    "RateModel",
    "PowerSchedule",
    "cumulative_energy",
    "optimal_powers",
    "bits_by",
    "completion_time",
    "write_schedule",
]

# relative slack when checking a time against the end of a schedule
_END_SLACK = 1e-12


@dataclass(frozen=True)
class RateModel:
    """AWGN rate ``B log2(1 + P g / (N0 B))`` in Mbit/s for power in mW."""

    bandwidth: float  # MHz
    noise_psd: float  # W/Hz
    gains: tuple[float, ...]  # linear, gains[0] belongs to TX1

    def __post_init__(self):
        if not self.bandwidth > 0 or not self.noise_psd > 0:
            raise InvalidArgument("bandwidth and noise_psd must be positive")
        if any(not g > 0 for g in self.gains):
            raise InvalidArgument("channel gains must be positive")

    @classmethod
    def from_transmitters(cls, transmitters: Sequence[TransmitterConfig], bandwidth=1.0, noise_psd=1e-19):
        txs = sorted(transmitters, key=lambda tx: tx.id)
        return cls(bandwidth, noise_psd, tuple(tx.gain for tx in txs))

    @property
    def noise_mw(self) -> float:
        return self.noise_psd * self.bandwidth * 1e6 * 1e3

    def gain(self, tx_id: int) -> float:
        return self.gains[tx_id - 1]

    def snr(self, power_mw, gain):
        return np.asarray(power_mw) * gain / self.noise_mw

    def rate(self, power_mw, gain):
        return self.bandwidth * np.log2(1.0 + self.snr(power_mw, gain))

    def rate_of(self, power_mw, tx_id: int) -> float:
        return float(self.rate(power_mw, self.gain(tx_id)))

    def harvest_weighted_gain(self, transmitters: Sequence[TransmitterConfig]) -> float:
        """Single gain whose rate at the mean harvested power equals the
        harvest-share-weighted average of the per-transmitter rates."""
        p_bar = sum(tx.mean_power for tx in transmitters)
        r_bar = sum(tx.mean_power * self.rate(p_bar, self.gain(tx.id)) for tx in transmitters) / p_bar
        return (2.0 ** (r_bar / self.bandwidth) - 1.0) * self.noise_mw / p_bar

    def reference_gain(self, how: str | float, transmitters: Sequence[TransmitterConfig] = ()) -> float:
        """Gain for the whole-transmitter bit curve.

        ``how`` is ``"best"`` (largest gain), ``"harvest-weighted"``, ``"tx<k>"``
        or a linear gain.
        """
        if isinstance(how, (int, float)):
            return float(how)
        if how == "best":
            return max(self.gains)
        if how == "harvest-weighted":
            if not transmitters:
                raise InvalidArgument("harvest-weighted reference needs transmitter configs")
            return self.harvest_weighted_gain(transmitters)
        if how.startswith("tx"):
            return self.gain(int(how[2:]))
        raise InvalidArgument(f"unknown reference gain {how!r}")


@dataclass(frozen=True, eq=False)
class PowerSchedule:
    """Powers ``powers[j]`` (mW) on ``[epochs[j], epochs[j+1]]``."""

    epochs: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.epochs, dtype=float)
        p = np.asarray(self.powers, dtype=float)
        object.__setattr__(self, "epochs", e)
        object.__setattr__(self, "powers", p)
        if e.size != p.size + 1 or p.size == 0:
            raise InvalidArgument("need len(epochs) == len(powers) + 1 >= 2")
        if e[0] != 0.0 or np.any(np.diff(e) <= 0):
            raise InvalidArgument("epochs must start at 0 and increase strictly")
        if np.any(p < 0):
            raise InvalidArgument("negative power")
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(p * np.diff(e))]))

    @property
    def end(self) -> float:
        return float(self.epochs[-1])

    def __len__(self):
        return int(self.powers.size)

    def segment(self, t: float) -> int:
        """Index of the segment in force just after ``t``; the last segment
        extends past the end."""
        j = int(np.searchsorted(self.epochs, t, side="right")) - 1
        return min(max(j, 0), self.powers.size - 1)

    def power_at(self, t: float) -> float:
        return float(self.powers[self.segment(t)])

    def energy_used(self, t):
        """Energy consumed on ``[0, t]`` in mJ; past the end the last power
        continues."""
        t = np.asarray(t, dtype=float)
        inside = np.interp(t, self.epochs, self._cum)
        out = np.where(t > self.end, self._cum[-1] + self.powers[-1] * (t - self.end), inside)
        return out if out.ndim else float(out)

    def time_to_use(self, start: float, amount: float) -> float:
        """Earliest time by which ``amount`` mJ has been consumed since ``start``."""
        target = self.energy_used(start) + amount
        cum = self._cum
        if target > cum[-1]:
            p_last = self.powers[-1]
            if p_last <= 0:
                return math.inf
            return self.end + (target - cum[-1]) / p_last
        j = int(np.searchsorted(cum, target, side="left"))
        if j == 0:
            return start
        # segment j-1 has positive power because cum rises across it
        t = self.epochs[j - 1] + (target - cum[j - 1]) / self.powers[j - 1]
        return max(float(t), start)

    def rows(self):
        for j, p in enumerate(self.powers):
            yield float(self.epochs[j]), float(self.epochs[j + 1]), float(p)


def write_schedule(schedule: PowerSchedule, fh: TextIO) -> None:
    """``t_start,t_end,power_mW`` lines."""
    for a, b, p in schedule.rows():
        fh.write(f"{a:.9f},{b:.9f},{p:.9f}\n")


def _pooled(traces: Sequence[HarvestTrace]):
    """Initial energy plus arrivals (time > 0) pooled over transmitters."""
    base = 0.0
    times, amounts = [], []
    for tr in traces:
        base += tr.initial_energy
        at_zero = tr.times <= 0.0
        base += float(tr.amounts[at_zero].sum())
        times.append(tr.times[~at_zero])
        amounts.append(tr.amounts[~at_zero])
    times = np.concatenate(times) if times else np.empty(0)
    amounts = np.concatenate(amounts) if amounts else np.empty(0)
    order = np.argsort(times, kind="stable")
    return base, times[order], amounts[order]


def cumulative_energy(traces: Sequence[HarvestTrace], t: float) -> float:
    """Initial energies plus every arrival with time <= ``t``."""
    total = 0.0
    for tr in traces:
        total += tr.initial_energy + float(tr.amounts[tr.times <= t].sum())
    return total


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> list[int]:
    # Andrew's monotone chain; collinear points are dropped, so each kept
    # vertex is the farthest point attaining its minimum slope.
    hull: list[int] = []
    xl, yl = xs.tolist(), ys.tolist()
    for i in range(len(xl)):
        x, y = xl[i], yl[i]
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xl[b] - xl[a]) * (y - yl[a]) - (yl[b] - yl[a]) * (x - xl[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _schedule_from_pool(base, times, amounts, horizon) -> PowerSchedule:
    k = int(np.searchsorted(times, horizon, side="left"))  # arrivals strictly before horizon
    t_in, a_in = times[:k], amounts[:k]
    # corner just before each distinct arrival time
    uniq, first = np.unique(t_in, return_index=True)
    before = base + np.concatenate([[0.0], np.cumsum(a_in)])[first]
    total = base + float(a_in.sum())
    if total <= 0:
        raise EmptySchedule(f"no energy available before t = {horizon}")
    xs = np.concatenate([[0.0], uniq, [horizon]])
    ys = np.concatenate([[0.0], before, [total]])
    idx = _lower_hull(xs, ys)
    hx, hy = xs[idx], ys[idx]
    return PowerSchedule(hx, np.diff(hy) / np.diff(hx))


def optimal_powers(traces: Sequence[HarvestTrace], horizon: float) -> PowerSchedule:
    """Energy-causal, non-decreasing power staircase that uses all energy
    arriving before ``horizon`` by time ``horizon``.

    Energy landing exactly at ``horizon`` cannot be spent and is ignored.
    """
    if not horizon > 0:
        raise InvalidArgument(f"horizon must be positive, got {horizon}")
    return _schedule_from_pool(*_pooled(traces), horizon)


def _bits(schedule: PowerSchedule, rate_model: RateModel, gain_ref: float, T: float) -> float:
    e = schedule.epochs
    lens = np.clip(np.minimum(e[1:], T) - e[:-1], 0.0, None)
    return float(np.dot(lens, rate_model.rate(schedule.powers, gain_ref)))


def bits_by(schedule: PowerSchedule, rate_model: RateModel, gain_ref: float, T: float) -> float:
    """Mbit sent by time ``T`` following ``schedule`` at the reference gain."""
    if T < 0 or T > schedule.end * (1 + _END_SLACK):
        raise OutOfRange(f"T = {T} outside [0, {schedule.end}]")
    return _bits(schedule, rate_model, gain_ref, min(T, schedule.end))


def completion_time(
    traces: Sequence[HarvestTrace],
    rate_model: RateModel,
    gain_ref: float,
    target: float,
    *,
    tol: float = 1e-6,
    max_horizon: float | None = None,
) -> tuple[float, PowerSchedule]:
    """Smallest horizon whose optimal schedule delivers ``target`` Mbit.

    Grows the bracket by doubling, then bisects until it is narrower than
    ``tol`` seconds and the bit mismatch is below 1e-10 relative.
    """
    if not target > 0:
        raise InvalidArgument(f"target must be positive, got {target}")
    base, times, amounts = _pooled(traces)
    cap = min((tr.horizon for tr in traces), default=math.inf)
    if max_horizon is not None:
        cap = min(cap, max_horizon)
    total = base + float(amounts.sum())
    if total <= 0:
        raise InfeasibleTarget("traces hold no energy", target_bits=target, reachable_bits=0.0, energy_mj=0.0)

    def bits_at(T):
        if base <= 0 and not (times.size and times[0] < T):
            return 0.0, None  # nothing to spend yet
        s = _schedule_from_pool(base, times, amounts, T)
        return _bits(s, rate_model, gain_ref, T), s

    # first horizon with usable energy
    lo = 0.0
    hi = 1.0 if base > 0 or times.size == 0 else float(times[0]) + 1.0
    hi = min(hi, cap)
    b_hi, s_hi = bits_at(hi)
    prev = -1.0
    while b_hi < target:
        # with finite energy the bit curve saturates; stop once growth stalls
        stalled = b_hi - prev <= 1e-12 * b_hi and hi > 2.0 * (times[-1] if times.size else 0.0)
        if hi >= cap or stalled or hi > 1e12:
            raise InfeasibleTarget(
                f"target {target} Mbit unreachable: at most {b_hi:.6g} Mbit by t = {hi:.6g} s",
                target_bits=target,
                reachable_bits=b_hi,
                energy_mj=total,
            )
        lo, prev = hi, b_hi
        hi = min(2.0 * hi, cap)
        b_hi, s_hi = bits_at(hi)

    while True:
        if hi - lo <= tol and abs(b_hi - target) <= 1e-10 * target:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        b_mid, s_mid = bits_at(mid)
        if b_mid >= target:
            hi, b_hi, s_hi = mid, b_mid, s_mid
        else:
            lo = mid
    return hi, s_hi

"""Switching policies: pick the next transmitter when the active one runs dry.

Every policy sees a :class:`SwitchContext` and returns a transmitter id.
The geometric-projection policy (GP) scores each candidate by the scalar
projection of its displacement in the time-data plane, ``(work_time,
bits)``, onto the line from the present point ``(T, B)`` to the completion
point ``(T_e, B_e)``. The baselines maximise left energy (EM), channel rate
(RM), bits (BM) or working time (TM). All ties go to the smallest id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .energy_model import HarvestTrace, TransmitterConfig
from .errors import InvalidArgument, TransmissionComplete
from .power_schedule import PowerSchedule, RateModel
from .prediction import PredictionInput, mean_working_time

__all__ = [
    "POLICY_NAMES",
    "TxSnapshot",
    "SwitchContext",
    "Candidate",
    "KnownWorkTime",
    "PredictedWorkTime",
    "projection_length",
    "candidates",
    "gp_choose",
    "em_choose",
    "rm_choose",
    "bm_choose",
    "tm_choose",
    "make_policy",
    "depletion_time",
]

POLICY_NAMES = ("gp-known", "gp-predicted", "em", "rm", "bm", "tm")
MODES = ("known", "predicted")


@dataclass(frozen=True)
class TxSnapshot:
    id: int
    left_energy: float  # mJ
    elapsed: float  # s since this transmitter's last arrival
    gain: float
    is_current: bool = False


@dataclass(frozen=True)
class SwitchContext:
    """State at a switching moment.

    ``transmitters`` holds one snapshot per transmitter. At t = 0 no
    transmitter is current yet.
    """

    now: float
    bits_sent: float
    target_time: float
    target_bits: float
    power: float  # mW, whole-transmitter power in force now
    transmitters: tuple[TxSnapshot, ...]
    rate_model: RateModel
    mode: str = "known"

    def __post_init__(self):
        if sum(s.is_current for s in self.transmitters) > 1:
            raise InvalidArgument("more than one current transmitter")
        if self.mode not in MODES:
            raise InvalidArgument(f"mode must be one of {MODES}")

    @property
    def current(self) -> Optional[int]:
        for s in self.transmitters:
            if s.is_current:
                return s.id
        return None

    @property
    def direction(self) -> tuple[float, float]:
        return self.target_time - self.now, self.target_bits - self.bits_sent

    def eligible(self) -> list[TxSnapshot]:
        """Non-current transmitters holding energy, or all non-current ones
        when none does."""
        others = [s for s in self.transmitters if not s.is_current]
        if not others:
            raise InvalidArgument("no transmitter to switch to")
        charged = [s for s in others if s.left_energy > 0]
        return charged or others


@dataclass(frozen=True)
class Candidate:
    transmitter_id: int
    work_time: float
    bits: float
    projection: float = math.nan


WorkTimeFn = Callable[[SwitchContext, TxSnapshot], float]


def projection_length(candidate: tuple[float, float], direction: tuple[float, float]) -> float:
    """Scalar projection of ``candidate`` onto ``direction``."""
    dt, db = direction
    norm = math.hypot(dt, db)
    if norm == 0.0:
        raise TransmissionComplete("present point coincides with the completion point")
    return (candidate[0] * dt + candidate[1] * db) / norm


def _argmax(values: Sequence[float], ids: Sequence[int]) -> int:
    best = max(values)
    return min(i for i, v in zip(ids, values) if v == best)


def candidates(ctx: SwitchContext, work_time: WorkTimeFn) -> list[Candidate]:
    out = []
    direction = ctx.direction
    for snap in ctx.eligible():
        t = max(float(work_time(ctx, snap)), 0.0)
        b = t * float(ctx.rate_model.rate(ctx.power, snap.gain))
        out.append(Candidate(snap.id, t, b, projection_length((t, b), direction)))
    return out


def gp_choose(ctx: SwitchContext, work_time: WorkTimeFn) -> int:
    cands = candidates(ctx, work_time)
    return _argmax([c.projection for c in cands], [c.transmitter_id for c in cands])


def em_choose(ctx: SwitchContext) -> int:
    snaps = ctx.eligible()
    return _argmax([s.left_energy for s in snaps], [s.id for s in snaps])


def rm_choose(ctx: SwitchContext) -> int:
    snaps = ctx.eligible()
    return _argmax([s.gain for s in snaps], [s.id for s in snaps])


def bm_choose(ctx: SwitchContext, work_time: WorkTimeFn) -> int:
    cands = candidates(ctx, work_time)
    return _argmax([c.bits for c in cands], [c.transmitter_id for c in cands])


def tm_choose(ctx: SwitchContext, work_time: WorkTimeFn) -> int:
    cands = candidates(ctx, work_time)
    return _argmax([c.work_time for c in cands], [c.transmitter_id for c in cands])


def depletion_time(
    now: float,
    energy: float,
    times: np.ndarray,
    amounts: np.ndarray,
    schedule: PowerSchedule,
) -> float:
    """How long a transmitter holding ``energy`` lasts from ``now`` when it
    follows ``schedule`` and absorbs its own arrivals ``(times, amounts)``.

    Arrivals at or before ``now`` are ignored; an arrival landing exactly at
    the depletion instant extends the period.
    """
    k = int(np.searchsorted(times, now, side="right"))
    avail = energy
    while True:
        t_dep = schedule.time_to_use(now, avail)
        if k < times.size and times[k] <= t_dep:
            avail += float(amounts[k])
            k += 1
        else:
            return t_dep - now


class KnownWorkTime:
    """Exact working time from the realised future arrivals and schedule."""

    def __init__(self, traces: Sequence[HarvestTrace], schedule: PowerSchedule):
        self.traces = {tr.transmitter_id: tr for tr in traces}
        self.schedule = schedule

    def __call__(self, ctx: SwitchContext, snap: TxSnapshot) -> float:
        tr = self.traces[snap.id]
        return depletion_time(ctx.now, snap.left_energy, tr.times, tr.amounts, self.schedule)


class PredictedWorkTime:
    """Expected working time from the arrival statistics only."""

    def __init__(self, transmitters: Sequence[TransmitterConfig], *, paper_literal_mean=False, inner="closed-form"):
        self.configs = {tx.id: tx for tx in transmitters}
        self.paper_literal_mean = paper_literal_mean
        self.inner = inner

    def __call__(self, ctx: SwitchContext, snap: TxSnapshot) -> float:
        if ctx.power <= 0:
            return math.inf if snap.left_energy > 0 else 0.0
        cfg = self.configs[snap.id]
        inputs = PredictionInput(snap.left_energy, ctx.power, cfg.lam, cfg.dn, cfg.up, snap.elapsed)
        res = mean_working_time(inputs, paper_literal_mean=self.paper_literal_mean, inner=self.inner)
        return res.mean_working_time


def make_policy(
    name: str,
    *,
    mode: str = "known",
    traces: Optional[Sequence[HarvestTrace]] = None,
    schedule: Optional[PowerSchedule] = None,
    transmitters: Sequence[TransmitterConfig] = (),
    paper_literal_mean: bool = False,
) -> Callable[[SwitchContext], int]:
    """Build a decision function ``ctx -> id`` for a policy name.

    ``gp-known`` / ``gp-predicted`` fix their own mode; ``bm`` and ``tm``
    estimate working times in ``mode``; ``em`` and ``rm`` need none.
    """
    if name not in POLICY_NAMES:
        raise InvalidArgument(f"unknown policy {name!r}; choose from {POLICY_NAMES}")
    if mode not in MODES:
        raise InvalidArgument(f"mode must be one of {MODES}")
    if name == "em":
        return em_choose
    if name == "rm":
        return rm_choose
    if name == "gp-known":
        mode = "known"
    elif name == "gp-predicted":
        mode = "predicted"

    if mode == "known":
        if traces is None or schedule is None:
            raise InvalidArgument(f"{name} in known mode needs traces and a schedule")
        work_time: WorkTimeFn = KnownWorkTime(traces, schedule)
    else:
        if not transmitters:
            raise InvalidArgument(f"{name} in predicted mode needs transmitter configs")
        work_time = PredictedWorkTime(transmitters, paper_literal_mean=paper_literal_mean)

    chooser = {"gp-known": gp_choose, "gp-predicted": gp_choose, "bm": bm_choose, "tm": tm_choose}[name]

    def policy(ctx: SwitchContext) -> int:
        return chooser(ctx, work_time)

    policy.__name__ = name
    return policy

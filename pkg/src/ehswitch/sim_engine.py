"""Event-driven simulation of one receiver fed by several harvesting transmitters.

One transmitter sends at a time, at the whole-transmitter power in force.
When it runs out of energy the policy names a successor. Runs stop when the
bit target is met or no energy is left to spend.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, TextIO

import numpy as np

from .energy_model import HarvestTrace, SystemConfig, dumps_traces, merge_epochs, sample_traces
from .errors import InvalidArgument
from .policies import SwitchContext, TxSnapshot, make_policy
from .power_schedule import PowerSchedule, RateModel, bits_by, completion_time, optimal_powers

__all__ = [
    "WorkEntry",
    "RunResult",
    "RunPlan",
    "run",
    "count_switches",
    "plan_run",
    "trace_horizon",
    "monte_carlo",
    "MonteCarloResult",
    "write_work_log",
]

ENERGY_EPS = 1e-12  # mJ treated as empty
DEFAULT_EVENT_CAP = 10_000_000


@dataclass
class WorkEntry:
    transmitter_id: int
    t_start: float
    t_end: float
    power: float
    bits: float


@dataclass
class RunResult:
    switch_count: int
    completion_time: float
    bits_sent: float
    work_log: list[WorkEntry]
    harvest_count: int
    termination: str  # "target", "exhausted" or "event-cap"
    energy_initial: list[float] = field(default_factory=list)
    energy_credited: list[float] = field(default_factory=list)
    energy_consumed: list[float] = field(default_factory=list)
    energy_left: list[float] = field(default_factory=list)
    policy: str = ""

    def record(self) -> str:
        """One-line ``key=value`` summary."""
        return (
            f"policy={self.policy} switches={self.switch_count} "
            f"completion_s={self.completion_time:.6f} bits_Mbit={self.bits_sent:.6f} "
            f"harvests={self.harvest_count} termination={self.termination}"
        )


def count_switches(work_log: Sequence[WorkEntry]) -> int:
    return sum(1 for a, b in zip(work_log, work_log[1:]) if a.transmitter_id != b.transmitter_id)


def write_work_log(work_log: Sequence[WorkEntry], fh: TextIO) -> None:
    """``id,t_start,t_end,power_mW,bits`` lines."""
    for e in work_log:
        fh.write(f"{e.transmitter_id},{e.t_start:.9f},{e.t_end:.9f},{e.power:.9f},{e.bits:.9f}\n")


def run(
    traces: Sequence[HarvestTrace],
    schedule: PowerSchedule,
    rate_model: RateModel,
    target_bits: float,
    policy: Callable[[SwitchContext], int],
    *,
    target_time: Optional[float] = None,
    mode: str = "known",
    count_idle_resume: bool = True,
    max_events: int = DEFAULT_EVENT_CAP,
) -> RunResult:
    """Simulate one transmission of ``target_bits`` Mbit.

    ``target_time`` is the time coordinate of the completion point the
    policy aims at; it defaults to the end of ``schedule``. Past the end of
    the schedule the last power continues. With ``count_idle_resume`` a
    different transmitter resuming after an all-empty idle gap counts as a
    switch.
    """
    if not target_bits > 0:
        raise InvalidArgument("target_bits must be positive")
    traces = sorted(traces, key=lambda tr: tr.transmitter_id)
    ids = [tr.transmitter_id for tr in traces]
    if ids != list(range(1, len(ids) + 1)):
        raise InvalidArgument(f"trace ids must be 1..M, got {ids}")
    m = len(traces)
    w_time = schedule.end if target_time is None else target_time

    energy = [0.0] * (m + 1)
    initial = [0.0] * (m + 1)
    credited = [0.0] * (m + 1)
    consumed = [0.0] * (m + 1)
    last_arrival = [0.0] * (m + 1)
    for tr in traces:
        initial[tr.transmitter_id] = tr.initial_energy
        energy[tr.transmitter_id] = tr.initial_energy
    arrivals = merge_epochs(traces)
    n_arr = len(arrivals)
    i = 0
    harvests = 0

    def credit_until(t):
        nonlocal i, harvests
        while i < n_arr and arrivals[i][0] <= t:
            ta, tx, amount = arrivals[i]
            energy[tx] += amount
            credited[tx] += amount
            last_arrival[tx] = ta
            harvests += 1
            i += 1

    credit_until(0.0)

    gains = [0.0] + [rate_model.gain(k) for k in range(1, m + 1)]
    interior = schedule.epochs[1:-1].tolist()
    b_ptr = 0
    now = 0.0
    bits = 0.0
    log: list[WorkEntry] = []
    switches = 0
    termination = "exhausted"

    def decide(current):
        if not any(energy[k] > ENERGY_EPS for k in range(1, m + 1) if k != current):
            return None
        snaps = tuple(
            TxSnapshot(k, max(energy[k], 0.0), now - last_arrival[k], gains[k], k == current)
            for k in range(1, m + 1)
        )
        ctx = SwitchContext(
            now, bits, w_time, target_bits, schedule.power_at(now), snaps, rate_model, mode
        )
        choice = policy(ctx)
        if choice == current or not 1 <= choice <= m:
            raise InvalidArgument(f"policy returned invalid transmitter {choice}")
        return choice

    active = decide(None)
    last_active = None
    events = 0
    while True:
        events += 1
        if events > max_events:
            termination = "event-cap"
            break
        if active is None:
            if i >= n_arr:
                break
            now = arrivals[i][0]
            credit_until(now)
            active = decide(None)
            if active is not None and last_active is not None and active != last_active and count_idle_resume:
                switches += 1
            continue

        while b_ptr < len(interior) and interior[b_ptr] <= now:
            b_ptr += 1
        power = schedule.power_at(now)
        rate = rate_model.rate_of(power, active)
        t_arr = arrivals[i][0] if i < n_arr else math.inf
        t_bnd = interior[b_ptr] if b_ptr < len(interior) else math.inf
        t_dep = now + energy[active] / power if power > 0 else math.inf
        t_done = now + (target_bits - bits) / rate if rate > 0 else math.inf
        t_next = min(t_arr, t_bnd, t_dep, t_done)
        if math.isinf(t_next):
            break
        dt = t_next - now
        finished = t_done <= t_next
        depleted = t_dep <= t_next and not finished
        sent = target_bits - bits if finished else rate * dt
        used = energy[active] if depleted else power * dt
        energy[active] -= used
        consumed[active] += used
        bits += sent
        last = log[-1] if log else None
        if last and last.transmitter_id == active and last.power == power and last.t_end == now:
            last.t_end = t_next
            last.bits += sent
        else:
            log.append(WorkEntry(active, now, t_next, power, sent))
        now = t_next
        if finished:
            bits = target_bits
            termination = "target"
            break
        credit_until(now)
        if energy[active] <= ENERGY_EPS:
            consumed[active] += energy[active]
            energy[active] = 0.0
            nxt = decide(active)
            if nxt is None:
                last_active, active = active, None
            else:
                switches += 1
                active = nxt

    return RunResult(
        switch_count=switches,
        completion_time=now,
        bits_sent=bits,
        work_log=log,
        harvest_count=harvests,
        termination=termination,
        energy_initial=initial[1:],
        energy_credited=credited[1:],
        energy_consumed=consumed[1:],
        energy_left=energy[1:],
        policy=getattr(policy, "__name__", ""),
    )


@dataclass
class RunPlan:
    traces: list[HarvestTrace]
    schedule: PowerSchedule
    rate_model: RateModel
    gain_ref: float
    target_time: float
    target_bits: float


def trace_horizon(system: SystemConfig, rate_model: RateModel, gain_ref: float) -> float:
    """Length of trace to sample: generous enough for the run to finish."""
    if system.trace_horizon is not None:
        return system.trace_horizon
    if system.horizon is not None:
        return 2.0 * system.horizon
    p_bar = system.mean_harvest_power
    t_est = system.target_bits / float(rate_model.rate(p_bar, gain_ref))
    slowest = max(1.0 / tx.lam for tx in system.transmitters)
    return max(2.0 * t_est, t_est + 20.0 * slowest)


def plan_run(system: SystemConfig, traces: Sequence[HarvestTrace]) -> RunPlan:
    """Whole-transmitter schedule and completion point for one trace set."""
    rate_model = RateModel.from_transmitters(system.transmitters, system.bandwidth, system.noise_psd)
    g_ref = rate_model.reference_gain(system.gain_ref, system.transmitters)
    if system.target_bits is not None:
        t_e, sched = completion_time(traces, rate_model, g_ref, system.target_bits)
        b_e = system.target_bits
    else:
        t_e = system.horizon
        sched = optimal_powers(traces, t_e)
        b_e = bits_by(sched, rate_model, g_ref, t_e)
    return RunPlan(list(traces), sched, rate_model, g_ref, t_e, b_e)


def _rng(master_seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, run_index]))


def sample_run(system: SystemConfig, master_seed: int, run_index: int) -> RunPlan:
    rate_model = RateModel.from_transmitters(system.transmitters, system.bandwidth, system.noise_psd)
    g_ref = rate_model.reference_gain(system.gain_ref, system.transmitters)
    horizon = trace_horizon(system, rate_model, g_ref)
    traces = sample_traces(system, horizon, _rng(master_seed, run_index))
    return plan_run(system, traces)


def trace_hash(traces: Sequence[HarvestTrace]) -> str:
    return hashlib.sha256(dumps_traces(traces).encode()).hexdigest()


def run_policies(plan: RunPlan, system: SystemConfig, policies: Sequence[str], *, mode="known",
                 paper_literal_mean=False) -> list[RunResult]:
    out = []
    for name in policies:
        pol = make_policy(
            name,
            mode=mode,
            traces=plan.traces,
            schedule=plan.schedule,
            transmitters=system.transmitters,
            paper_literal_mean=paper_literal_mean,
        )
        res = run(plan.traces, plan.schedule, plan.rate_model, plan.target_bits, pol,
                  target_time=plan.target_time, mode=mode)
        res.policy = name
        out.append(res)
    return out


def _one_run(args):
    system, policies, master_seed, k, mode, literal = args
    plan = sample_run(system, master_seed, k)
    results = run_policies(plan, system, policies, mode=mode, paper_literal_mean=literal)
    h = trace_hash(plan.traces)
    return (
        [r.switch_count for r in results],
        [r.completion_time for r in results],
        [r.harvest_count for r in results],
        plan.target_time,
        plan.schedule.powers[0],
        [h] * len(results),
    )


@dataclass
class MonteCarloResult:
    policies: list[str]
    switches: np.ndarray  # (n_runs, n_policies)
    completion: np.ndarray  # (n_runs, n_policies)
    harvests: np.ndarray  # (n_runs, n_policies)
    target_time: np.ndarray  # (n_runs,)
    first_power: np.ndarray  # (n_runs,)
    trace_hashes: list[list[str]]  # per run, one per policy

    @property
    def n_runs(self) -> int:
        return int(self.switches.shape[0])

    def summary(self) -> list[dict]:
        ddof = 1 if self.n_runs > 1 else 0
        rows = []
        for j, name in enumerate(self.policies):
            rows.append({
                "policy": name,
                "mean_switches": float(self.switches[:, j].mean()),
                "std_switches": float(self.switches[:, j].std(ddof=ddof)),
                "mean_completion_s": float(self.completion[:, j].mean()),
                "n_runs": self.n_runs,
            })
        return rows

    def paired_difference(self, policy: str, reference: str) -> tuple[float, float]:
        """Mean and standard error of ``switches[policy] - switches[reference]``."""
        a = self.switches[:, self.policies.index(policy)]
        b = self.switches[:, self.policies.index(reference)]
        d = (a - b).astype(float)
        se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
        return float(d.mean()), se


def monte_carlo(
    system: SystemConfig,
    policies: Sequence[str],
    n_runs: int,
    master_seed: Optional[int] = None,
    *,
    mode: str = "known",
    paper_literal_mean: bool = False,
    workers: int = 1,
) -> MonteCarloResult:
    """Paired runs: in run ``k`` every policy sees the same traces, drawn
    from a generator seeded by ``(master_seed, k)``."""
    if n_runs < 1:
        raise InvalidArgument("n_runs must be >= 1")
    if not policies:
        raise InvalidArgument("no policies given")
    seed = system.rng_seed if master_seed is None else master_seed
    jobs = [(system, list(policies), seed, k, mode, paper_literal_mean) for k in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_run, jobs, chunksize=max(1, n_runs // (4 * workers))))
    else:
        rows = [_one_run(j) for j in jobs]
    return MonteCarloResult(
        policies=list(policies),
        switches=np.array([r[0] for r in rows], dtype=int),
        completion=np.array([r[1] for r in rows], dtype=float),
        harvests=np.array([r[2] for r in rows], dtype=int),
        target_time=np.array([r[3] for r in rows], dtype=float),
        first_power=np.array([r[4] for r in rows], dtype=float),
        trace_hashes=[r[5] for r in rows],
    )

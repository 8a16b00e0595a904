"""Independent reference computations used by the tests."""

import math

import numpy as np
from scipy import optimize

from ehswitch.energy_model import HarvestTrace, TransmitterConfig, sample_trace


def discretized_best_bits(traces, horizon, rate_model, gain, n=200):
    """Most Mbit any profile that is constant on each of ``n`` equal cells of
    ``[0, horizon]`` can send while staying energy-causal.

    Causality is checked just before every arrival and at the horizon; the
    consumed energy is piecewise linear, so that suffices.
    """
    edges = np.linspace(0.0, horizon, n + 1)
    dt = np.diff(edges)
    avail = sum(tr.initial_energy for tr in traces)
    arrivals = sorted((float(t), float(a)) for tr in traces for t, a in zip(tr.times, tr.amounts))
    rows, limits = [], []
    for t, a in arrivals:
        if t >= horizon:
            break
        if t > 0:
            rows.append(np.clip(np.minimum(edges[1:], t) - edges[:-1], 0.0, None))
            limits.append(avail)
        avail += a
    rows.append(dt.copy())
    limits.append(avail)
    A, lim = np.array(rows), np.array(limits)
    c = gain / rate_model.noise_mw
    k = rate_model.bandwidth / math.log(2)

    def neg_bits(p):
        return -k * float(dt @ np.log1p(c * p))

    def grad(p):
        return -k * dt * c / (1.0 + c * p)

    x0 = np.full(n, 0.5 * lim.min() / horizon) if lim.min() > 0 else np.zeros(n)
    res = optimize.minimize(
        neg_bits, x0, jac=grad, method="SLSQP",
        bounds=[(0.0, None)] * n,
        constraints=[{"type": "ineq", "fun": lambda p: lim - A @ p, "jac": lambda p: -A}],
        options={"ftol": 1e-14, "maxiter": 2000},
    )
    p = np.clip(res.x, 0.0, None)
    # pull back any solver overshoot so the returned value is truly feasible
    over = A @ p / np.where(lim > 0, lim, np.inf)
    if over.max() > 1:
        p = p / over.max()
    return -neg_bits(p)


def random_transmitters(rng, m=None):
    m = int(rng.integers(2, 5)) if m is None else m
    out = []
    for k in range(1, m + 1):
        lam = float(10 ** rng.uniform(-1.7, 0.3))
        dn = float(rng.uniform(0, 50))
        up = dn + float(rng.uniform(0.5, 60))
        out.append(TransmitterConfig(k, lam, dn, up, float(rng.uniform(-106, -98))))
    return out


def random_traces(rng, horizon, transmitters=None):
    txs = transmitters or random_transmitters(rng)
    mode = "uniform" if rng.random() < 0.7 else "zero"
    traces = [sample_trace(tx, horizon, rng, mode) for tx in txs]
    if sum(tr.total_energy for tr in traces) == 0:
        traces[0] = HarvestTrace(1, traces[0].times, traces[0].amounts, 1.0, traces[0].horizon)
    return txs, traces


def few_deposit_traces(rng, max_deposits=4):
    """Two transmitters holding at most ``max_deposits`` deposits in total."""
    k = int(rng.integers(1, max_deposits + 1))
    times = np.sort(rng.uniform(0, 20, k))
    times[0] = 0.0 if rng.random() < 0.5 else times[0]
    amounts = rng.uniform(0.5, 50, k)
    owner = rng.integers(1, 3, k)
    traces = []
    for tx in (1, 2):
        sel = owner == tx
        t, a = times[sel], amounts[sel]
        e0 = float(a[t == 0].sum())
        traces.append(HarvestTrace(tx, t[t > 0], a[t > 0], e0))
    if traces[0].total_energy + traces[1].total_energy == 0:
        traces[0] = HarvestTrace(1, [], [], 1.0)
    return traces


def depletion_by_stepping(energy, arrivals, power, dt=1e-4, t_max=1e4):
    """Time-stepped depletion for a constant power; crude but independent."""
    t = 0.0
    k = 0
    while t < t_max:
        while k < len(arrivals) and arrivals[k][0] <= t:
            energy += arrivals[k][1]
            k += 1
        if energy <= 0:
            return t
        energy -= power * dt
        t += dt
    return math.inf

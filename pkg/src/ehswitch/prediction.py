"""Expected working time of an idle transmitter if it were switched on now.

A transmitter with ``E`` mJ left, driven at ``P`` mW, runs for ``E / P``
seconds unless arrivals land inside the working period and extend it. The
predictor weighs the extended periods ``(E + Y_{n-1}) / P`` by the
probability ``PP_n`` that exactly ``n - 1`` arrivals extend the period, where
``Y_{n-1}`` is a sum of ``n - 1`` Uniform(dn, up) amounts (a shifted,
scaled Irwin-Hall variable) and the arrival instants are Erlang sums of the
exponential inter-arrival times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .quadrature import adaptive_quad

__all__ = [
    "PredictionInput",
    "PredictionResult",
    "erlang_pdf",
    "erlang_sf",
    "irwin_hall_pdf",
    "irwin_hall_cdf",
    "tail_prob",
    "pp_sequence",
    "mean_working_time",
    "mc_tail_prob",
    "mc_working_time_oracle",
]

STOP_THRESHOLD = 0.01  # seconds; stopping rule on PP_n * T_n
N_MAX = 64
ERLANG_TAIL_CUTOFF = 1e-12
# above this many summands the alternating Irwin-Hall sum loses digits
_ALTERNATING_MAX = 12


@dataclass(frozen=True)
class PredictionInput:
    left_energy: float  # mJ
    power: float  # mW
    lam: float  # 1/s
    dn: float  # mJ
    up: float  # mJ
    elapsed: float = 0.0  # s since the transmitter's last arrival

    def __post_init__(self):
        if self.left_energy < 0:
            raise InvalidArgument("left energy must be >= 0")
        if not self.power > 0:
            raise InvalidArgument("power must be > 0")
        if not self.lam > 0:
            raise InvalidArgument("lambda must be > 0")
        if not 0 <= self.dn < self.up:
            raise InvalidArgument("need 0 <= dn < up")
        if self.elapsed < 0:
            raise InvalidArgument("elapsed must be >= 0")

    @property
    def first_period(self) -> float:
        return self.left_energy / self.power

    @property
    def ma(self) -> float:
        """Offset from the last arrival to the end of the first working period."""
        return self.elapsed + self.first_period


@dataclass
class PredictionResult:
    mean_working_time: float
    pp: np.ndarray
    terms: np.ndarray
    n_terms: int
    truncated: bool = False
    mean_amount: float = field(default=float("nan"))


def erlang_pdf(n: int, lam: float, x):
    """Density of the sum of ``n`` iid Exponential(lam) variables."""
    if n < 1:
        raise InvalidArgument(f"Erlang shape must be >= 1, got {n}")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(n * math.log(lam) + (n - 1) * np.log(xp) - lam * xp - math.lgamma(n))
    if n == 1:
        out[x == 0] = lam
    return out if out.ndim else float(out)


def erlang_sf(n: int, lam: float, x: float) -> float:
    """P(X > x) for X ~ Erlang(n, lam), via the Poisson-count identity."""
    if x <= 0:
        return 1.0
    mu = lam * x
    term = math.exp(-mu)
    total = term
    for k in range(1, n):
        term *= mu / k
        total += term
    return min(total, 1.0)


def _std_pdf_recursive(c: int, z: np.ndarray) -> np.ndarray:
    # Cox-de Boor recursion for the standard Irwin-Hall density on [0, c];
    # level k needs values at z, z-1, ..., z-(c-k).
    shifts = z[None, :] - np.arange(c)[:, None]
    f = ((shifts >= 0) & (shifts < 1)).astype(float)
    for k in range(2, c + 1):
        s = shifts[: c - k + 1]
        f = (s * f[:-1] + (k - s) * f[1:]) / (k - 1)
    return f[0]


def _std_cdf_recursive(c: int, z: np.ndarray) -> np.ndarray:
    shifts = z[None, :] - np.arange(c)[:, None]
    F = np.clip(shifts, 0.0, 1.0)
    for k in range(2, c + 1):
        s = shifts[: c - k + 1]
        F = (s * F[:-1] + (k - s) * F[1:]) / k
    return F[0]


def _std_alternating(c: int, z: np.ndarray, power: int) -> np.ndarray:
    # sum_k (-1)^k C(c, k) C(z - k)^power with C(u) = max(u, 0)
    total = np.zeros_like(z)
    for k in range(c + 1):
        u = z - k
        if power == 0:
            clamp = (u > 0).astype(float)
        else:
            clamp = np.where(u > 0, u, 0.0) ** power
        total += (-1) ** k * math.comb(c, k) * clamp
    return total


def irwin_hall_pdf(count: int, dn: float, up: float, y):
    """Density of the sum of ``count`` iid Uniform(dn, up) variables."""
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    if not dn < up:
        raise InvalidArgument("need dn < up")
    w = up - dn
    y = np.asarray(y, dtype=float)
    z = np.atleast_1d((y - count * dn) / w)
    inside = (z > 0) & (z < count)
    out = np.zeros_like(z)
    if inside.any():
        zi = z[inside]
        if count <= _ALTERNATING_MAX:
            vals = _std_alternating(count, zi, count - 1) / math.factorial(count - 1)
        else:
            vals = _std_pdf_recursive(count, zi)
        out[inside] = np.clip(vals, 0.0, None) / w
    return out.reshape(y.shape) if y.ndim else float(out[0])


def irwin_hall_cdf(count: int, dn: float, up: float, y):
    """CDF of the sum of ``count`` iid Uniform(dn, up) variables."""
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    w = up - dn
    y = np.asarray(y, dtype=float)
    z = np.atleast_1d((y - count * dn) / w)
    out = np.where(z >= count, 1.0, 0.0)
    inside = (z > 0) & (z < count)
    if inside.any():
        zi = z[inside]
        if count <= _ALTERNATING_MAX:
            vals = _std_alternating(count, zi, count) / math.factorial(count)
        else:
            vals = _std_cdf_recursive(count, zi)
        out[inside] = np.clip(vals, 0.0, 1.0)
    return out.reshape(y.shape) if y.ndim else float(out[0])


def _erlang_cutoff(n: int, lam: float, start: float) -> float:
    x = max(start, n / lam)
    while erlang_sf(n, lam, x) >= ERLANG_TAIL_CUTOFF:
        x *= 2.0
    return x


def tail_prob(
    n: int,
    ma: float,
    power: float,
    lam: float,
    dn: float,
    up: float,
    *,
    abs_tol: float = 1e-6,
    max_depth: int = 30,
    inner: str = "quadrature",
) -> float:
    """P(X - Y / P > ma) with X ~ Erlang(n, lam), Y = sum of n-1 uniforms.

    Split at x = ma + (n-1) up / P: below it Y is cut off at (x - ma) P, above
    it the whole support of Y counts. The inner y-integral is computed by
    quadrature (``inner="quadrature"``) or as the Irwin-Hall CDF
    (``inner="closed-form"``); both give the same number.
    """
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if ma < 0:
        raise InvalidArgument(f"ma must be >= 0, got {ma}")
    if n == 1:
        return math.exp(-lam * ma)
    c = n - 1
    w = up - dn
    y_lo, y_hi = c * dn, c * up
    x_lo, x_hi = ma + y_lo / power, ma + y_hi / power
    y_knots = [y_lo + k * w for k in range(1, c)]
    x_knots = [ma + yk / power for yk in y_knots]

    if inner == "quadrature":
        def inner_mass(x):
            top = (x - ma) * power
            if top <= y_lo:
                return 0.0
            return adaptive_quad(
                lambda y: irwin_hall_pdf(c, dn, up, y),
                y_lo,
                min(top, y_hi),
                abs_tol=abs_tol * 1e-2,
                max_depth=max_depth,
                breakpoints=y_knots,
            )

        def outer(x):
            return erlang_pdf(n, lam, x) * np.array([inner_mass(xi) for xi in x])
    elif inner == "closed-form":
        def outer(x):
            return erlang_pdf(n, lam, x) * irwin_hall_cdf(c, dn, up, (x - ma) * power)
    else:
        raise InvalidArgument(f"unknown inner method {inner!r}")

    x_top = _erlang_cutoff(n, lam, x_hi)
    partial = adaptive_quad(outer, x_lo, x_hi, abs_tol=abs_tol / 2, max_depth=max_depth, breakpoints=x_knots)
    full = adaptive_quad(
        lambda x: erlang_pdf(n, lam, x), x_hi, x_top, abs_tol=abs_tol / 2, max_depth=max_depth,
        breakpoints=[max(x_hi, (n - 1) / lam)],
    )
    return min(max(partial + full, 0.0), 1.0)


def pp_sequence(inputs: PredictionInput, n_max: int, **quad) -> np.ndarray:
    """PP_1 .. PP_{n_max}: PP_n = (1 - sum of earlier PP) * tail_prob(n)."""
    if n_max < 1:
        raise InvalidArgument("n_max must be >= 1")
    out = np.zeros(n_max)
    used = 0.0
    for n in range(1, n_max + 1):
        q = tail_prob(n, inputs.ma, inputs.power, inputs.lam, inputs.dn, inputs.up, **quad)
        out[n - 1] = (1.0 - used) * q
        used += out[n - 1]
    return out


def mean_working_time(
    inputs: PredictionInput,
    *,
    paper_literal_mean: bool = False,
    n_max: int = N_MAX,
    threshold: float = STOP_THRESHOLD,
    **quad,
) -> PredictionResult:
    """Expected working time, adding terms until ``PP_n * T_n < threshold``.

    Terms whose product is exactly zero do not stop the loop. Once the
    remaining probability mass is exhausted no later term can contribute,
    so the loop ends there too. ``paper_literal_mean`` uses (up - dn) / 2 in
    place of the uniform mean (dn + up) / 2 for comparison runs.
    """
    p = inputs.power
    mu = 0.5 * (inputs.up - inputs.dn) if paper_literal_mean else 0.5 * (inputs.dn + inputs.up)
    pps: list[float] = []
    terms: list[float] = []
    used = 0.0
    truncated = False
    n = 0
    while True:
        n += 1
        t_n = (inputs.left_energy + (n - 1) * mu) / p
        q = tail_prob(n, inputs.ma, p, inputs.lam, inputs.dn, inputs.up, **quad)
        pp = (1.0 - used) * q
        used += pp
        pps.append(pp)
        terms.append(t_n)
        prod = pp * t_n
        if prod != 0.0 and prod < threshold:
            break
        if used >= 1.0 - 1e-15 and n > 1:
            break
        if n >= n_max:
            truncated = True
            break
    pps_arr = np.array(pps)
    k = np.arange(len(pps))  # (n - 1) for PP_n
    t_bar = inputs.first_period + mu * float(np.dot(k, pps_arr)) / p
    return PredictionResult(t_bar, pps_arr, np.array(terms), len(pps), truncated, mu)


def mc_tail_prob(
    n: int, ma: float, power: float, lam: float, dn: float, up: float,
    samples: int, rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of P(X - Y/P > ma) and its standard error."""
    x = rng.gamma(n, 1.0 / lam, samples)
    y = rng.uniform(dn, up, (samples, n - 1)).sum(axis=1) if n > 1 else 0.0
    hit = (x - y / power) > ma
    p = float(hit.mean())
    return p, math.sqrt(max(p * (1 - p), 1e-300) / samples)


def mc_working_time_oracle(
    inputs: PredictionInput, samples: int, rng: np.random.Generator, max_steps: int = 100_000
) -> tuple[float, float]:
    """Mean and standard error of the simulated depletion time.

    Arrivals after the present follow a fresh Poisson process (memoryless),
    each landing inside the current working period extends it by
    ``amount / P``; the first arrival after the period ends stops it.
    """
    if samples < 1000:
        raise InvalidArgument("need at least 1000 samples")
    p = inputs.power
    end = np.full(samples, inputs.first_period)
    clock = np.zeros(samples)
    alive = np.ones(samples, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        clock[idx] += rng.exponential(1.0 / inputs.lam, idx.size)
        hit = clock[idx] < end[idx]
        ext = idx[hit]
        end[ext] += rng.uniform(inputs.dn, inputs.up, ext.size) / p
        alive[:] = False
        alive[ext] = True
    mean = float(end.mean())
    stderr = float(end.std(ddof=1) / math.sqrt(samples))
    return mean, stderr

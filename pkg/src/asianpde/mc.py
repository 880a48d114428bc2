"""Path-simulation oracle: log-exact stepping, pathwise averaging, pricing.

The price process is stepped in log space (exact increments for constant
coefficients), the running average by the trapezoid rule, and every draw
comes from a counter-based generator keyed by (seed, path block) so results
are bitwise reproducible and independent of worker layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.stats import poisson

__all__ = [
    "Averaging",
    "ModelSpec",
    "McConfig",
    "TerminalSamples",
    "Histogram2D",
    "simulate_terminal",
    "mc_price",
    "empirical_density",
    "fraction_within_bands",
]

PATH_BLOCK = 1 << 16


class Averaging(Enum):
    GEOMETRIC = "geometric"    # average of log-price
    ARITHMETIC = "arithmetic"  # average of price


def _as_fn(c) -> Callable:
    if callable(c):
        return c
    return lambda s, a, t: np.full_like(np.asarray(s, float), float(c))


@dataclass(frozen=True)
class ModelSpec:
    """Price dynamics and averaging choice.

    mu is the exponent drift of the log price (for constants,
    S_t = S_0 * exp(mu*t + sigma*W_t)); the Ito drift is mu + sigma^2/2.
    mu, sigma, r may be constants or callables of (S, A, t).
    """

    mu: float | Callable = 0.0
    sigma: float | Callable = 1.0
    r: float | Callable = 0.0
    averaging: Averaging = Averaging.ARITHMETIC


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    n_steps: int = 256
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self) -> None:
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be positive")


@dataclass(frozen=True)
class TerminalSamples:
    s: np.ndarray
    a: np.ndarray
    log_discount: np.ndarray  # accumulated integral of r along each path


def _block_generator(seed: int, block: int) -> np.random.Generator:
    # Philox is counter-based; the 128-bit key (seed, block) gives each
    # fixed-size path block its own stream regardless of execution order.
    return np.random.Generator(
        np.random.Philox(key=np.array([seed % (1 << 64), block],
                                      dtype=np.uint64))
    )


def _avg_fn(model: ModelSpec) -> Callable:
    if model.averaging is Averaging.GEOMETRIC:
        return np.log
    return lambda s: s


def simulate_terminal(
    model: ModelSpec,
    start: tuple[float, float],
    horizon: float,
    cfg: McConfig,
) -> TerminalSamples:
    """Terminal (S_T, A_T) samples, with the pathwise discount integral.

    Log-Euler steps for S (exact in law for constant mu, sigma); A and the
    discount accumulate by the trapezoid rule.  Antithetic mode pairs the
    halves of each block with mirrored normal draws.
    """
    s0, a0 = start
    if s0 <= 0.0:
        raise ValueError(f"starting price must be positive, got {s0}")
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    mu, sg, rf = _as_fn(model.mu), _as_fn(model.sigma), _as_fn(model.r)
    favg = _avg_fn(model)
    dt = horizon / cfg.n_steps
    sqdt = math.sqrt(dt)

    out_s = np.empty(cfg.n_paths)
    out_a = np.empty(cfg.n_paths)
    out_d = np.empty(cfg.n_paths)
    n_blocks = (cfg.n_paths + PATH_BLOCK - 1) // PATH_BLOCK
    for b in range(n_blocks):
        i0 = b * PATH_BLOCK
        i1 = min(i0 + PATH_BLOCK, cfg.n_paths)
        m = i1 - i0
        gen = _block_generator(cfg.seed, b)
        logs = np.full(m, math.log(s0))
        s = np.full(m, s0)
        a = np.full(m, a0)
        disc = np.zeros(m)
        t = 0.0
        for _ in range(cfg.n_steps):
            if cfg.antithetic:
                # mirrored draws on adjacent paths (2k, 2k+1); the block
                # size is even, so pairs never straddle blocks
                zh = gen.standard_normal((m + 1) // 2)
                z = np.empty(m)
                z[0::2] = zh
                z[1::2] = -zh[: m // 2]
            else:
                z = gen.standard_normal(m)
            f_prev = favg(s)
            r_prev = rf(s, a, t)
            logs = logs + mu(s, a, t) * dt + sg(s, a, t) * sqdt * z
            s = np.exp(logs)
            t += dt
            a = a + 0.5 * dt * (f_prev + favg(s))
            disc = disc + 0.5 * dt * (r_prev + rf(s, a, t))
        out_s[i0:i1] = s
        out_a[i0:i1] = a
        out_d[i0:i1] = disc
    return TerminalSamples(s=out_s, a=out_a, log_discount=out_d)


def mc_price(
    model: ModelSpec,
    payoff: Callable,
    point: tuple[float, float, float],
    maturity: float,
    cfg: McConfig,
) -> tuple[float, float]:
    """Discounted expectation of payoff(S_T, A_T) from (S, A, t).

    Returns (estimate, standard error); discounting is exp(-integral of r)
    accumulated pathwise.
    """
    s, a, t = point
    if t >= maturity:
        raise ValueError("evaluation time must precede maturity")
    samples = simulate_terminal(model, (s, a), maturity - t, cfg)
    vals = np.exp(-samples.log_discount) * payoff(samples.s, samples.a)
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(cfg.n_paths)) \
        if cfg.n_paths > 1 else 0.0
    return est, se


@dataclass(frozen=True)
class Histogram2D:
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    n_samples: int
    band_sigmas: float = 3.0

    @property
    def x_centers(self) -> np.ndarray:
        return 0.5 * (self.x_edges[:-1] + self.x_edges[1:])

    @property
    def y_centers(self) -> np.ndarray:
        return 0.5 * (self.y_edges[:-1] + self.y_edges[1:])

    @property
    def bin_area(self) -> float:
        return float((self.x_edges[1] - self.x_edges[0])
                     * (self.y_edges[1] - self.y_edges[0]))

    def band_halfwidth_density(self) -> np.ndarray:
        """Half-width of the count band translated to density units."""
        expected = np.maximum(self.counts, 1.0)
        return self.band_sigmas * np.sqrt(expected) / (self.n_samples
                                                       * self.bin_area)


def empirical_density(
    samples: tuple[np.ndarray, np.ndarray],
    bins: tuple[np.ndarray, np.ndarray],
) -> Histogram2D:
    """Normalized 2D histogram with per-bin Poisson 3-sigma bands."""
    xs, ys = samples
    if xs.size < 10_000:
        raise ValueError("need at least 1e4 samples for a density estimate")
    x_edges, y_edges = np.asarray(bins[0], float), np.asarray(bins[1], float)
    counts, _, _ = np.histogram2d(xs, ys, bins=(x_edges, y_edges))
    area = (x_edges[1] - x_edges[0]) * (y_edges[1] - y_edges[0])
    density = counts / (xs.size * area)
    return Histogram2D(x_edges=x_edges, y_edges=y_edges, counts=counts,
                       density=density, n_samples=xs.size)


def fraction_within_bands(hist: Histogram2D, expected_density: np.ndarray
                          ) -> float:
    """Fraction of bins whose count falls in the central 3-sigma Poisson
    interval around the expected count implied by a reference density."""
    expected = np.asarray(expected_density) * hist.n_samples * hist.bin_area
    lo = poisson.ppf(0.00135, np.maximum(expected, 1e-300))
    hi = poisson.ppf(0.99865, np.maximum(expected, 1e-300))
    inside = (hist.counts >= lo) & (hist.counts <= hi)
    return float(np.mean(inside))

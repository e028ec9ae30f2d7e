"""Closed-form recovery and intercept probabilities.

A receiver decodes a source message when the coded packets it collected span
GF(q)^K. Coefficients are i.i.d. uniform, so only the *number* of packets
received matters: the count follows a Poisson-binomial law over the
per-transmission success probabilities, and a set of ``n`` packets has full
rank with probability ``prod_{j<K} (1 - q^(j-n))``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError


def p_full_rank(n: int, K: int, q: int) -> float:
    """Probability that ``n`` uniform random vectors in GF(q)^K span the space."""
    if K < 1:
        raise DomainError("K must be positive")
    if q not in (2, 256):
        raise DomainError(f"unsupported field order q={q}")
    if n < K:
        return 0.0
    p = 1.0
    for j in range(K):
        p *= 1.0 - float(q) ** (j - n)
    return p


def reception_pmf(profile: Sequence[float]) -> np.ndarray:
    """PMF of the number of successful receptions, indexed 0..len(profile)."""
    probs = np.asarray(profile, dtype=float)
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise DomainError("success probabilities must lie in [0, 1]")
    pmf = np.zeros(probs.size + 1)
    pmf[0] = 1.0
    for i, p in enumerate(probs):
        # in-place update from the top so pmf[:i+1] still holds the old row
        pmf[1 : i + 2] = pmf[1 : i + 2] * (1.0 - p) + pmf[: i + 1] * p
        pmf[0] *= 1.0 - p
    return pmf


def recovery_probability(profile: Sequence[float], K: int, q: int) -> float:
    """Probability that a receiver with this success profile decodes the message."""
    pmf = reception_pmf(profile)
    total = 0.0
    for n in range(K, pmf.size):
        total += pmf[n] * p_full_rank(n, K, q)
    return min(max(total, 0.0), 1.0)


def intercept_probability(eaves_profile: Sequence[float], K: int, q: int) -> float:
    """Same computation as :func:`recovery_probability`, for the eavesdropper's profile."""
    return recovery_probability(eaves_profile, K, q)


@dataclass(frozen=True)
class AnalyticPoint:
    q: int
    K: int
    d: int
    C: int
    overhead: int
    D: float
    I: float
    D_per_message: tuple[float, ...]
    I_per_message: tuple[float, ...]


def evaluate(cfg) -> AnalyticPoint:
    """D and I for one scenario, averaged over the d messages of the exposed epoch."""
    from . import sim

    plan = sim.build_schedule(cfg)
    d_vals, i_vals = [], []
    for m in range(1, cfg.d + 1):
        fog = sim.success_probabilities(plan, cfg, "fog", m)
        eaves = sim.success_probabilities(plan, cfg, "eavesdropper", m)
        d_vals.append(recovery_probability(fog, cfg.K, cfg.q))
        i_vals.append(intercept_probability(eaves, cfg.K, cfg.q))
    return AnalyticPoint(
        cfg.q, cfg.K, cfg.d, cfg.C, cfg.N - cfg.K,
        float(np.mean(d_vals)), float(np.mean(i_vals)), tuple(d_vals), tuple(i_vals),
    )


def sweep_configs(cfg, overheads: Iterable[int], qs=None, Ks=None, ds=None, Cs=None):
    """Scenario variants for every (q, K, d, C, N-K) grid point, in that nesting order."""
    for q in qs or (cfg.q,):
        for K in Ks or (cfg.K,):
            for d in ds or (cfg.d,):
                for C in Cs or (cfg.C,):
                    for o in overheads:
                        yield replace(cfg, q=q, K=K, N=K + o, d=d, C=C)


def sweep(cfg, overheads: Iterable[int], qs=None, Ks=None, ds=None, Cs=None) -> list[AnalyticPoint]:
    """Analytic (N-K, D, I) table over the grid; unspecified axes keep ``cfg``'s value."""
    return [evaluate(c) for c in sweep_configs(cfg, list(overheads), qs, Ks, ds, Cs)]

"""Shared fixtures-in-spirit: cached reference runs and random problem makers."""

from functools import lru_cache

import numpy as np

from sspolicy import (
    DiscretePmf,
    Gamma,
    Grid,
    InventoryProblem,
    PeriodParams,
    TruncatedNormal,
    Uniform,
    solve_policy,
    validate,
)
from sspolicy.cli import parse_config, resolve_config


@lru_cache(maxsize=None)
def bundled_problem(name):
    return parse_config(resolve_config(name)).problem


@lru_cache(maxsize=None)
def warmup_result(theta=0.3):
    prob = bundled_problem("example3_1")
    return solve_policy(prob, Grid(theta))


@lru_cache(maxsize=None)
def reference_result(name="example4_1", T=10, theta=0.1):
    prob = truncate(bundled_problem(name), T)
    return solve_policy(prob, Grid(theta))


def truncate(prob, T):
    return InventoryProblem(periods=prob.periods[:T], alpha=prob.alpha, salvage=prob.salvage)


def _random_demand(rng):
    kind = rng.integers(3)
    if kind == 0:
        return TruncatedNormal(mu=float(rng.uniform(1, 6)), sigma=float(rng.uniform(0.4, 2)))
    if kind == 1:
        return Uniform(b=float(rng.uniform(1.5, 8)))
    return Gamma(shape=float(rng.uniform(1.5, 6)), rate=float(rng.uniform(0.6, 2.5)))


def random_continuous_problem(rng, T, zero_setup=False):
    """Valid by construction: unit costs close together so the shifted slopes
    stay coercive, setup costs nonincreasing after discounting."""
    alpha = float(rng.uniform(0.92, 1.0))
    c = rng.uniform(1.0, 1.3, size=T + 1)
    h = rng.uniform(0.4, 1.5, size=T)
    p = rng.uniform(1.6, 6.0, size=T)
    K = np.zeros(T)
    if not zero_setup:
        K[T - 1] = rng.uniform(0.2, 2.0)
        for t in range(T - 2, -1, -1):
            K[t] = alpha * K[t + 1] * (1.0 + rng.uniform(0, 0.6))
    periods = tuple(
        PeriodParams(c=float(c[t]), h=float(h[t]), p=float(p[t]), K=float(K[t]),
                     demand=_random_demand(rng))
        for t in range(T)
    )
    prob = InventoryProblem(periods=periods, alpha=alpha, salvage=float(c[T]))
    assert validate(prob) == []
    return prob


def random_discrete_problem(rng, T, theta, max_support=6):
    alpha = float(rng.uniform(0.92, 1.0))
    c = rng.uniform(1.0, 1.3, size=T + 1)
    h = rng.uniform(0.4, 1.5, size=T)
    p = rng.uniform(1.6, 6.0, size=T)
    K = np.zeros(T)
    K[T - 1] = rng.uniform(0.2, 2.0)
    for t in range(T - 2, -1, -1):
        K[t] = alpha * K[t + 1] * (1.0 + rng.uniform(0, 0.6))
    periods = []
    for t in range(T):
        n = int(rng.integers(2, max_support + 1))
        offs = np.sort(rng.choice(np.arange(0, 7), size=n, replace=False))
        w = rng.dirichlet(np.ones(n))
        w = np.round(w, 6)
        w[-1] = 1.0 - float(w[:-1].sum())  # keep the total exactly one
        if w[-1] <= 0:
            w = np.full(n, 1.0 / n)
            w[-1] = 1.0 - float(w[:-1].sum())
        periods.append(
            PeriodParams(c=float(c[t]), h=float(h[t]), p=float(p[t]), K=float(K[t]),
                         demand=DiscretePmf(tuple(offs * theta), tuple(w)))
        )
    prob = InventoryProblem(periods=tuple(periods), alpha=alpha, salvage=float(c[T]))
    assert validate(prob) == []
    return prob

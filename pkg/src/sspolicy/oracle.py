"""Independent checks for solved policies.

Three ways to pin down what a policy (or the problem itself) actually costs:

  * `exact_dp`: exact dynamic program for problems whose demands are finite
    pmfs supported on the solver lattice.  No structural shortcuts — the
    order-up-to minimization is a running suffix minimum — so it is a true
    oracle for the lattice-restricted problem.
  * `policy_cost_discrete`: exact expected cost of a given threshold policy
    under lattice pmf demand (untransformed, so directly comparable to
    simulation).
  * `simulate_policy`: chunked common-random-number Monte Carlo for arbitrary
    demand models, bit-reproducible for a given seed regardless of how the
    replication count divides into chunks.

`fine_grid_reference` re-solves on a much finer lattice and certifies there,
which is the cheapest trustworthy stand-in for the true optimum.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.special as sc

from .grid import Grid
from .problem import DemandModel, transformed_cost
from .solver import minimize_shifted_cost, solve_policy

_Z975 = float(sc.ndtri(0.975))
_SIM_CHUNK = 1 << 15
_MAX_WIDEN = 8


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscretePmf(DemandModel):
    """Finite demand distribution given by atoms and probabilities."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        prb = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", prb)
        if len(vals) == 0 or len(vals) != len(prb):
            raise ValueError("values and probs must be equal-length and nonempty")
        if any(v < 0 for v in vals):
            raise ValueError("demand atoms must be nonnegative")
        if any(v2 <= v1 for v1, v2 in zip(vals, vals[1:])):
            raise ValueError("demand atoms must be strictly increasing")
        if any(p < 0 for p in prb):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(prb) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to one")

    @cached_property
    def _v(self):
        return np.array(self.values)

    @cached_property
    def _p(self):
        return np.array(self.probs)

    @cached_property
    def _cum(self):
        c = np.cumsum(self._p)
        c[-1] = 1.0
        return c

    @property
    def _atol(self):
        return 1e-9 * max(1.0, self.values[-1])

    def cdf(self, x):
        idx = np.searchsorted(self._v, np.asarray(x, dtype=float) + self._atol, side="right")
        out = np.concatenate(([0.0], self._cum))[idx]
        return out if out.ndim else float(out)

    def cdf_strict(self, x):
        # atoms sitting exactly on a lattice point belong to the step that
        # starts there, which is what makes the sweep exact on lattice pmfs
        idx = np.searchsorted(self._v, np.asarray(x, dtype=float) - self._atol, side="right")
        out = np.concatenate(([0.0], self._cum))[idx]
        return out if out.ndim else float(out)

    @property
    def mean(self):
        return float(np.dot(self._v, self._p))

    def surplus(self, y):
        y = np.asarray(y, dtype=float)
        out = np.maximum(y[..., None] - self._v, 0.0) @ self._p
        return out if out.ndim else float(out)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.minimum(
            np.searchsorted(self._cum, q, side="left"), len(self.values) - 1
        )
        out = self._v[idx]
        return out if out.ndim else float(out)

    def spec_string(self):
        pairs = ",".join(f"{v!r}:{p!r}" for v, p in zip(self.values, self.probs))
        return f"pmf table={pairs}"

    def lattice_offsets(self, grid):
        """Atom positions as lattice indices, or None if any atom is off-grid."""
        offs = np.array([round(v / grid.theta) for v in self.values], dtype=np.int64)
        if np.max(np.abs(offs * grid.theta - self._v)) > self._atol:
            return None
        return offs


def _lattice_pmfs(prob, grid):
    out = []
    for t, per in enumerate(prob.periods):
        if not isinstance(per.demand, DiscretePmf):
            raise OracleError(f"period {t}: exact evaluation needs pmf demand")
        offs = per.demand.lattice_offsets(grid)
        if offs is None:
            raise OracleError(f"period {t}: demand atoms are not on the lattice")
        out.append((offs, per.demand._p))
    return out


@dataclass(frozen=True)
class ExactSolution:
    """Exact lattice optimum: thresholds, order-up-to levels, cost tables."""

    grid: Grid
    s_idx: np.ndarray
    S_idx: np.ndarray
    s: np.ndarray
    S: np.ndarray
    H: list          # (lo_idx, values) per period: cost of being at y post-order
    V: list          # (lo_idx, values) per period: optimal cost-to-go, transformed
    c0: float

    def optimal_value(self, x):
        """True optimal expected cost from starting stock x (lattice point)."""
        idx = round(x / self.grid.theta)
        if abs(idx * self.grid.theta - x) > 1e-9 * max(1.0, abs(x)):
            raise OracleError("starting stock must be a lattice point")
        lo, arr = self.V[0]
        if not lo <= idx <= lo + len(arr) - 1:
            raise OracleError("starting stock outside the solved window")
        return float(arr[idx - lo] - self.c0 * idx * self.grid.theta)


def exact_dp(prob, grid):
    """Exact backward recursion over an auto-widening lattice window."""
    T = prob.T
    th = grid.theta
    al = prob.alpha
    pmfs = _lattice_pmfs(prob, grid)
    dmax = [int(offs[-1]) for offs, _ in pmfs]

    cms = [minimize_shifted_cost(prob, t) for t in range(T)]
    base_lo = min(grid.floor_index(c) for c in cms) - sum(dmax) - 10
    base_hi = max(grid.ceil_index(c) for c in cms) + 10

    for _ in range(_MAX_WIDEN + 1):
        wlo = np.empty(T + 1, dtype=np.int64)
        wlo[0] = base_lo
        for t in range(T):
            wlo[t + 1] = wlo[t] - dmax[t]
        ok = True
        s_idx = np.empty(T, dtype=np.int64)
        S_idx = np.empty(T, dtype=np.int64)
        Hs = [None] * T
        Vs = [None] * T
        Vn = np.zeros(base_hi - wlo[T] + 1)
        for t in range(T - 1, -1, -1):
            lo = int(wlo[t])
            ys = grid.coords(lo, base_hi)
            Hv = np.asarray(transformed_cost(prob, t, ys), dtype=float).copy()
            offs, p = pmfs[t]
            EV = np.zeros_like(Hv)
            for off, pd in zip(offs, p):
                a = lo - int(off) - int(wlo[t + 1])
                EV += pd * Vn[a : a + len(Hv)]
            Hv += al * EV
            K = prob.periods[t].K
            Smi = int(np.argmin(Hv))
            target = Hv[Smi] + K
            below = Hv <= target
            s_pos = int(np.argmax(below))
            if Smi == 0 or Smi == len(Hv) - 1 or s_pos == 0:
                ok = False
                break
            suffix = np.minimum.accumulate(Hv[::-1])[::-1]
            Vn = np.minimum(Hv, K + suffix)
            s_idx[t] = lo + s_pos
            S_idx[t] = lo + Smi
            Hs[t] = (lo, Hv)
            Vs[t] = (lo, Vn)
        if ok:
            return ExactSolution(
                grid=grid,
                s_idx=s_idx,
                S_idx=S_idx,
                s=s_idx * th,
                S=S_idx * th,
                H=Hs,
                V=Vs,
                c0=prob.periods[0].c,
            )
        width = base_hi - base_lo
        base_lo -= width
        base_hi += width
    raise OracleError("window-too-small: lattice window kept hitting its edges")


def _period_cost(per, y):
    """Expected one-period holding/backlog cost at post-order level y."""
    ep, em = per.demand.loss(y)
    return per.h * ep + per.p * em


def policy_cost_discrete(prob, grid, s, S, x0):
    """Exact expected (undiscounted-convention) cost of the threshold policy
    from lattice starting stock x0, for lattice pmf demands.

    The terminal period's thresholds may be off-lattice; later states never
    need tabulating there because the salvage value is linear.
    """
    T = prob.T
    th = grid.theta
    al = prob.alpha
    pmfs = _lattice_pmfs(prob, grid)
    dmax = [int(offs[-1]) for offs, _ in pmfs]

    idx0 = round(float(x0) / th)
    if abs(idx0 * th - x0) > 1e-9 * max(1.0, abs(x0)):
        raise OracleError("starting stock must be a lattice point")

    s_cut = [grid.ceil_index(s[t]) for t in range(T)]  # order iff idx < cut
    S_i = [grid.ceil_index(S[t]) for t in range(T - 1)]
    for t in range(T - 1):
        if abs(S_i[t] * th - S[t]) > 1e-9 * max(1.0, abs(S[t])):
            raise OracleError("order-up-to levels must be lattice points")

    wlo = np.empty(T, dtype=np.int64)
    whi = np.empty(T, dtype=np.int64)
    wlo[0] = idx0
    whi[0] = max(idx0, max(S_i, default=idx0))
    for t in range(1, T):
        wlo[t] = min(int(wlo[t - 1]), S_i[t - 1] if t - 1 < T - 1 else idx0) - dmax[t - 1]
        whi[t] = whi[0]

    # terminal period in closed form (handles an off-lattice final target)
    tl = T - 1
    per = prob.periods[tl]
    idxs = np.arange(wlo[tl], whi[tl] + 1)
    xs = idxs * th
    salv = prob.salvage

    def terminal_total(y):
        return _period_cost(per, y) + al * (-salv) * (y - per.demand.mean)

    no_order = terminal_total(xs)
    ordered = per.K + per.c * (S[tl] - xs) + terminal_total(S[tl])
    v = np.where(idxs < s_cut[tl], ordered, no_order)

    for t in range(T - 2, -1, -1):
        per = prob.periods[t]
        offs, p = pmfs[t]
        idxs = np.arange(wlo[t], whi[t] + 1)
        xs = idxs * th

        def cont(level_idx):
            lo = int(wlo[t + 1])
            a = level_idx - offs[:, None] - lo  # (atoms, states)
            return p @ v[a]

        nxt = cont(idxs)
        no_order = _period_cost(per, xs) + al * nxt
        yS = S_i[t]
        core = per.K + per.c * (yS * th) + _period_cost(per, yS * th) + al * float(
            cont(np.array([yS]))[0]
        )
        v = np.where(idxs < s_cut[t], core - per.c * xs, no_order)

    return float(v[idx0 - wlo[0]])


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    ci_half_width: float
    n_reps: int
    seed: int


def simulate_policy(prob, policy, x0, n_reps, seed, chunk=_SIM_CHUNK):
    """Monte-Carlo cost of a threshold policy via inverse-cdf sampling.

    The uniform stream is consumed in fixed (chunk x T) row-major blocks, so
    results are bit-identical for a given seed no matter the chunk size.
    """
    T = prob.T
    al = prob.alpha
    rng = np.random.Generator(np.random.Philox(key=seed))
    costs = np.empty(n_reps)
    done = 0
    while done < n_reps:
        m = min(chunk, n_reps - done)
        U = rng.random((m, T))
        x = np.full(m, float(x0))
        cost = np.zeros(m)
        disc = 1.0
        for t in range(T):
            per = prob.periods[t]
            order = x < policy.s[t]
            y = np.where(order, policy.S[t], x)
            cost += disc * (per.K * order + per.c * (y - x))
            d = np.asarray(per.demand.ppf(U[:, t]), dtype=float)
            cost += disc * (per.h * np.maximum(y - d, 0.0) + per.p * np.maximum(d - y, 0.0))
            x = y - d
            disc *= al
        cost += disc * (-prob.salvage) * x
        costs[done : done + m] = cost
        done += m
    mean = float(costs.mean())
    var = float(np.dot(costs - mean, costs - mean)) / max(n_reps - 1, 1)
    ci = _Z975 * math.sqrt(var / n_reps)
    return SimulationResult(mean=mean, ci_half_width=ci, n_reps=n_reps, seed=seed)


def fine_grid_reference(prob, theta_ref, x):
    """Certificate from a re-solve on a finer lattice (reference enclosure)."""
    from .bounds import certify

    res = solve_policy(prob, Grid(theta_ref))
    return certify(res, x)

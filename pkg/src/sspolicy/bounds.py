"""Certified error bounds for lattice (s, S) policies.

Three quantities are computed against a `SolverResult`:

  * `value_slack_below(res, j)`: how far the tabulated start value can sit
    ABOVE the true optimal cost (accumulated effect of restricting orders to
    the lattice), evaluated at lattice point j.
  * `value_slack_above(res, k)`: how far the tabulated start value can sit
    BELOW the true optimal cost (per-step interpolation error swept through
    the horizon), evaluated at lattice point k.
  * `evaluate_value(res, x)`: the tabulated start value at an arbitrary real
    starting stock, reconstructed exactly on the x-offset lattice.

`certify(res, x)` wires them into a `Certificate`: a two-sided interval for
the true optimal cost and a bound on the suboptimality of the computed
policy.  Cheaper closed-form caps on both slacks (point versions and a
spacing-only version that scales exactly linearly in the spacing) ride along.

All recursions walk backward over per-period index windows sized so that
every lookup a later fill performs lands inside an earlier-filled window;
the window ladders grow by one lattice step per period from the query point
and from the per-period upper search limits.
"""

from dataclasses import dataclass

import numpy as np

from .problem import transformed_cost
from .solver import demand_step_masses


@dataclass
class GapTables:
    """Scratch tables from one backward estimate pass (kept for inspection)."""

    bound: float            # certified upper slack at the query point
    eta: np.ndarray         # per-period scalar slack at the upper search limit
    psi: dict               # t -> (lo_idx, values): one-step spread tables
    psibar: dict            # t -> (lo_idx, values): spread with carryover
    omega: dict             # t -> (lo_idx, values): accumulated excess above eta
    psi_su: np.ndarray
    psibar_su: np.ndarray
    omega_su: np.ndarray


class _Pass:
    """Shared plumbing for the backward estimate recursions."""

    def __init__(self, res):
        self.res = res
        self.prob = res.problem
        self.grid = res.grid
        self.T = self.prob.T
        self.th = res.grid.theta
        self.al = self.prob.alpha
        self.g = res.gamma
        self.su = res.cutoffs.su_idx
        self.s_idx = res.s_idx
        self.k_last = res.grid.ceil_index(res.cutoffs.s_last)
        self._mass = {}

    def step_masses(self, t, n_hi):
        """Grow-only cache of (w, Fv) per period; extra tail entries are benign."""
        n_hi = max(n_hi, -1)
        got = self._mass.get(t)
        if got is None or got[2] < n_hi:
            w, Fv = demand_step_masses(self.prob.periods[t].demand, self.grid, n_hi)
            self._mass[t] = (w, Fv, n_hi)
            return w, Fv
        return got[0], got[1]

    def last_row(self, js):
        """Spread values one period before the end: a single cdf readout,
        because the final period's spread is flat."""
        t = self.T - 2
        pts = (np.asarray(js) - self.k_last + 1) * self.th
        Fs = np.asarray(self.prob.periods[t].demand.cdf_strict(pts), dtype=float)
        return self.g[t] * self.th + self.al * self.g[self.T - 1] * self.th * Fs

    # -- spread-with-carryover (the recursion feeding both bound passes) -----

    def psibar_fill(self, tables, t, jlo, jhi):
        js = np.arange(jlo, jhi + 1)
        if t == self.T - 2:
            return self.last_row(js)
        sig = int(self.s_idx[t + 1])
        vals = np.full(js.shape, self.g[t] * self.th)
        mask = js >= sig - 1
        if mask.any():
            nlo, narr = tables[t + 1]
            a = narr[sig - nlo : jhi + 2 - nlo]
            w, _ = self.step_masses(t, jhi - sig)
            conv = np.convolve(a, w)
            vals[mask] += self.al * conv[js[mask] - sig + 1]
        return vals

    def psibar_point(self, tables, t, j):
        if t == self.T - 2:
            return float(self.last_row(np.array([j]))[0])
        sig = int(self.s_idx[t + 1])
        if j < sig - 1:
            return self.g[t] * self.th
        nlo, narr = tables[t + 1]
        kk = np.arange(sig, j + 2)
        w, _ = self.step_masses(t, j - sig)
        ww = w[j - kk + 1]
        return float(self.g[t] * self.th + self.al * np.dot(narr[sig - nlo : j + 2 - nlo], ww))


def estimate_pass(res, j_idx):
    """Backward pass for the upper slack at lattice point j_idx."""
    P = _Pass(res)
    T, th, al, g = P.T, P.th, P.al, P.g
    su, s_idx = P.su, P.s_idx
    if T < 2:
        raise ValueError("estimate pass needs at least two periods")
    j_idx = int(j_idx)

    # window tops: one lattice step of growth per period, from the query
    # point for the spread/excess tables and from the first upper limit for
    # the carryover tables
    Lw = np.empty(T - 1, dtype=np.int64)
    Lw[0] = j_idx
    for m in range(1, T - 1):
        Lw[m] = max(Lw[m - 1], su[m - 1]) + 1
    Lb = np.empty(T - 1, dtype=np.int64)
    if T >= 3:
        Lb[1] = su[0] + 1
        for m in range(2, T - 1):
            Lb[m] = max(Lb[m - 1], su[m - 1]) + 1

    psi, psibar, omega = {}, {}, {}
    psi_su = np.zeros(T)
    psibar_su = np.zeros(T)
    omega_su = np.zeros(T)
    eta = np.zeros(T)  # eta[T-1] = 0: the final period is exact on the lattice

    def psi_fill(t, jlo, jhi):
        js = np.arange(jlo, jhi + 1)
        if t == T - 2:
            return P.last_row(js)
        sig = int(s_idx[t + 1])
        vals = np.full(js.shape, g[t] * th)
        mask = js >= sig
        if mask.any():
            nlo, narr = psi[t + 1]
            a = narr[sig + 1 - nlo : jhi + 2 - nlo]
            w, _ = P.step_masses(t, jhi - sig - 1)
            conv = np.convolve(a, w)
            vals[mask] += al * conv[js[mask] - sig]
        return vals

    def psi_point(t, j):
        if t == T - 2:
            return float(P.last_row(np.array([j]))[0])
        sig = int(s_idx[t + 1])
        if j < sig:
            return g[t] * th
        nlo, narr = psi[t + 1]
        kk = np.arange(sig + 1, j + 2)
        w, _ = P.step_masses(t, j - sig - 1)
        ww = w[j - kk + 1]
        return float(g[t] * th + al * np.dot(narr[sig + 1 - nlo : j + 2 - nlo], ww))

    def omega_fill(t, jlo, jhi, psi_vals):
        base = psi_vals - g[t] * th
        if t == T - 2:
            return base
        js = np.arange(jlo, jhi + 1)
        u = int(su[t + 1])
        vals = base + al * eta[t + 1]
        mask = js >= u
        if mask.any():
            nlo, narr = omega[t + 1]
            gtab = np.maximum(eta[t + 1], narr[u + 1 - nlo : jhi + 2 - nlo])
            w, Fv = P.step_masses(t, jhi - u - 1)
            conv = np.convolve(gtab, w)
            tail = 1.0 - Fv[js[mask] - u]
            vals[mask] = base[mask] + al * (conv[js[mask] - u] + eta[t + 1] * tail)
        return vals

    def omega_point(t, j, psi_val):
        if t == T - 2:
            return psi_val - g[t] * th
        u = int(su[t + 1])
        if j < u:
            return psi_val - g[t] * th + al * eta[t + 1]
        nlo, narr = omega[t + 1]
        gvals = np.maximum(eta[t + 1], narr[u + 1 - nlo : j + 2 - nlo])
        kk = np.arange(u + 1, j + 2)
        w, Fv = P.step_masses(t, j - u - 1)
        ww = w[j - kk + 1]
        tail = 1.0 - Fv[j - u]
        return psi_val - g[t] * th + al * (float(np.dot(gvals, ww)) + eta[t + 1] * tail)

    for t in range(T - 2, 0, -1):
        if s_idx[t] + 1 <= Lw[t]:
            psi[t] = (int(s_idx[t]) + 1, psi_fill(t, int(s_idx[t]) + 1, int(Lw[t])))
        if s_idx[t] <= Lb[t]:
            psibar[t] = (int(s_idx[t]), P.psibar_fill(psibar, t, int(s_idx[t]), int(Lb[t])))
        psi_su[t] = psi_point(t, int(su[t]))
        psibar_su[t] = P.psibar_point(psibar, t, int(su[t]))
        if su[t] + 1 <= Lw[t]:
            wlo = int(su[t]) + 1
            plo, parr = psi[t]
            pv = parr[wlo - plo : int(Lw[t]) + 1 - plo]
            omega[t] = (wlo, omega_fill(t, wlo, int(Lw[t]), pv))
        omega_su[t] = omega_point(t, int(su[t]), psi_su[t])
        eta[t] = psibar_su[t] + omega_su[t]

    psi_su[0] = psi_point(0, int(su[0]))
    psibar_su[0] = P.psibar_point(psibar, 0, int(su[0]))
    omega_su[0] = omega_point(0, int(su[0]), psi_su[0])
    eta[0] = psibar_su[0] + omega_su[0]
    if j_idx > su[0]:
        p0 = psi_point(0, j_idx)
        bound = max(eta[0], omega_point(0, j_idx, p0))
    else:
        bound = eta[0]
    return GapTables(float(bound), eta, psi, psibar, omega, psi_su, psibar_su, omega_su)


def value_slack_below(res, j_idx):
    """Certified bound on (tabulated start value) - (true optimal cost) at z_j."""
    return estimate_pass(res, j_idx).bound


def value_slack_above(res, k_idx):
    """Certified bound on (true optimal cost) - (tabulated start value) at z_k."""
    P = _Pass(res)
    T, th, al, g = P.T, P.th, P.al, P.g
    if T < 2:
        raise ValueError("estimate pass needs at least two periods")
    if T == 2:
        return float(al * g[1] * th)
    S_idx = res.S_idx
    k_idx = int(k_idx)

    # interleaved ladders: lam climbs one step per period, M folds in the
    # order-up-to levels the tabulated policy actually uses
    lam = np.empty(T - 2, dtype=np.int64)
    M = np.empty(T - 2, dtype=np.int64)
    lam[0] = k_idx
    M[0] = max(k_idx, int(S_idx[0]))
    for i in range(1, T - 2):
        lam[i] = M[i - 1] + 1
        M[i] = max(int(lam[i]), int(S_idx[i]))

    pb = {}
    for i in range(T - 2, 0, -1):
        wtop = int(M[i - 1]) + 1
        if res.s_idx[i] <= wtop:
            pb[i] = (int(res.s_idx[i]), P.psibar_fill(pb, i, int(res.s_idx[i]), wtop))

    total = al ** (T - 1) * g[T - 1] * th
    for i in range(T - 2):  # i = 0..T-3
        val = P.psibar_point(pb, i, int(M[i]))
        total += 2.0 * al**i * (val - g[i] * th)
    return float(total)


def coarse_slack_caps(res, j_idx, k_idx):
    """Point versions of the closed-form caps on both slacks (no recursions,
    just cdf products along ladders climbing from the query points)."""
    prob, grid = res.problem, res.grid
    T = prob.T
    th = grid.theta
    al = prob.alpha
    g = res.gamma
    su = res.cutoffs.su_idx
    s = res.s

    mu = np.empty(T - 1, dtype=np.int64) if T >= 2 else np.empty(0, dtype=np.int64)
    if T >= 2:
        mu[0] = int(j_idx)
        for i in range(1, T - 1):
            mu[i] = max(mu[i - 1], su[i - 1]) + 1

    cap_below = th * sum(al**i * g[i] for i in range(T - 1))
    for i in range(T - 1):
        nmax = T - 1 - i
        ms = np.arange(nmax)
        snext = s[i + 1 + ms]
        args_a = su[i] * th + (ms + 1) * th - snext
        args_b = max(int(mu[i]), int(su[i])) * th + (ms + 1) * th - snext
        Fa = np.array(
            [float(prob.periods[i + m].demand.cdf(args_a[m])) for m in range(nmax)]
        )
        Fb = np.array(
            [float(prob.periods[i + m].demand.cdf(args_b[m])) for m in range(nmax)]
        )
        weights = al ** (ms + 1 + i) * g[i + 1 + ms]
        cap_below += th * float(np.dot(weights, np.cumprod(Fa) + np.cumprod(Fb)))

    cap_above = al ** (T - 1) * g[T - 1] * th
    if T >= 3:
        lam = np.empty(T - 2, dtype=np.int64)
        lam[0] = int(k_idx)
        for i in range(1, T - 2):
            lam[i] = max(int(lam[i - 1]), int(res.S_idx[i - 1])) + 1
        for i in range(T - 2):
            nmax = T - 1 - i
            ms = np.arange(nmax)
            base = max(int(lam[i]), int(res.S_idx[i])) * th
            args = base + (ms + 1) * th - s[i + 1 + ms]
            F = np.array(
                [float(prob.periods[i + m].demand.cdf(args[m])) for m in range(nmax)]
            )
            weights = al ** (ms + 1 + i) * g[i + 1 + ms]
            cap_above += 2.0 * th * float(np.dot(weights, np.cumprod(F)))
    return float(cap_below), float(cap_above)


def flat_slack_caps(res):
    """Spacing-only caps: theta times a factor that depends only on the
    discount and the per-period cost slopes, so halving theta halves them
    exactly (bit-for-bit)."""
    prob = res.problem
    T = prob.T
    al = prob.alpha
    g = res.gamma
    th = res.grid.theta

    lin = sum(al**i * g[i] for i in range(T - 1))
    dbl = 0.0
    for i in range(T - 1):
        for n in range(1, T - i):
            dbl += al ** (n + i) * g[i + n]
    below = th * (lin + 2.0 * dbl)

    dbl2 = 0.0
    for i in range(max(T - 2, 0)):
        for n in range(1, T - i):
            dbl2 += al ** (n + i) * g[i + n]
    above = th * (al ** (T - 1) * g[T - 1] + 2.0 * dbl2)
    return float(below), float(above)


def evaluate_value(res, x):
    """Tabulated start value at real stock x, rebuilt on the x-offset lattice.

    Below the first reorder point the value is a constant the sweep already
    holds.  Otherwise the needed slices of later-period tables are recomputed
    at offsets x - n*theta; each period only contributes while the start
    level can still be reached without ordering, which the flag chain tracks.
    """
    prob, grid = res.problem, res.grid
    T = prob.T
    th = grid.theta
    al = prob.alpha
    s = res.s
    x = float(x)
    if x < s[0]:
        return float(res.H_at_S[0] + prob.periods[0].K)
    if T == 1:
        return float(transformed_cost(prob, 0, x))

    mvec = np.array([grid.floor_index(x - s[t]) for t in range(T)], dtype=np.int64)
    sig = np.zeros(T, dtype=bool)
    ok = True
    for t in range(1, T):
        ok = ok and bool(mvec[t] >= -t)
        sig[t] = ok

    lvl_next = None  # (values over offsets -t..m_t, m_t) one period later
    for t in range(T - 1, 0, -1):
        if not sig[t]:
            lvl_next = None
            continue
        ns = np.arange(-t, mvec[t] + 1)
        pts = x - ns * th
        Cv = np.asarray(transformed_cost(prob, t, pts))
        if t == T - 1:
            Hv = Cv
        else:
            const = res.H_at_S[t + 1] + prob.periods[t + 1].K
            if lvl_next is None:
                Hv = Cv + al * const
            else:
                arrN, Mn = lvl_next
                w, Fv = demand_step_masses(prob.periods[t].demand, grid, Mn + t)
                conv = np.convolve(arrN[::-1], w)
                Hv = Cv + al * const
                mask = ns <= Mn + 1
                r = Mn - ns[mask] + 1
                Hv[mask] = Cv[mask] + al * (const * (1.0 - Fv[r]) + conv[r])
        lvl_next = (Hv, int(mvec[t]))

    const = res.H_at_S[1] + prob.periods[1].K
    C0 = float(transformed_cost(prob, 0, x))
    if lvl_next is None:
        return C0 + al * const
    arrN, Mn = lvl_next
    w, Fv = demand_step_masses(prob.periods[0].demand, grid, Mn)
    ssum = float(np.dot(arrN, w[: Mn + 2]))
    return C0 + al * (const * (1.0 - Fv[Mn + 1]) + ssum)


@dataclass(frozen=True)
class Certificate:
    """Two-sided certificate for one starting stock.

    value_low/value_high bracket the true optimal expected cost;
    gap_bound bounds (cost of the computed policy) - (optimal cost).
    The caps are the closed-form versions: cheaper, never tighter.
    """

    x: float
    theta: float
    approx_value: float      # tabulated start value, order-cost convention removed
    slack_below: float       # approx_value may exceed the truth by at most this
    slack_above: float       # ... or undershoot it by at most this
    gap_bound: float
    value_low: float
    value_high: float
    rel_bound: float | None  # gap_bound / value_low when that is positive
    rel_degenerate: bool
    cap_below: float
    cap_above: float
    cap_below_flat: float
    cap_above_flat: float


def certify(res, x):
    """Certificate for starting stock x against the solved tables."""
    prob, grid = res.problem, res.grid
    if prob.T < 2:
        raise ValueError("certificates need at least two periods")
    k = grid.ceil_index(x)
    below = estimate_pass(res, k).bound
    above = value_slack_above(res, k)
    approx = evaluate_value(res, x) - prob.periods[0].c * x
    cap_b, cap_a = coarse_slack_caps(res, k, k)
    flat_b, flat_a = flat_slack_caps(res)
    low = approx - below
    high = approx + above
    degenerate = not low > 0
    return Certificate(
        x=float(x),
        theta=grid.theta,
        approx_value=float(approx),
        slack_below=float(below),
        slack_above=float(above),
        gap_bound=float(below + above),
        value_low=float(low),
        value_high=float(high),
        rel_bound=None if degenerate else float((below + above) / low),
        rel_degenerate=degenerate,
        cap_below=cap_b,
        cap_above=cap_a,
        cap_below_flat=flat_b,
        cap_above_flat=flat_a,
    )

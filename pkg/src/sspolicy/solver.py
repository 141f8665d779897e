"""Backward sweep computing approximate (s_t, S_t) policies on a lattice.

The sweep tabulates the go-to-level cost

    H_t(y) = C_t(y) + a*E[ value_{t+1}(y - D_t) ]

only on a per-period index window that provably contains everything later
periods read back, instead of on a full state grid.  Window ends come from
convexity scans of the single-period costs; the expectation is a discrete
convolution against lattice-step demand masses.

Index conventions, used throughout this module and `bounds`:

  * every tabulated quantity is an array plus the lattice index of its first
    entry; coordinates are reconstructed as index*theta,
  * demand mass vectors are laid out as w[j] = mass of lattice step j-1, so
    w[0] is the mass at or below 0 (the step that absorbs the "no leftover
    demand" corner),
  * order-up-to levels are on-lattice for every period except the last,
    whose two levels come from exact one-dimensional minimization/root
    finding on the terminal cost.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .grid import Grid
from .problem import cost_slope, lipschitz_gamma, transformed_cost

MAX_DOUBLINGS = 60
MAX_SCAN = 20_000_000
ARGMIN_TIE_REL = 1e-12
_SCAN_BLOCK = 256


class SolverError(RuntimeError):
    """Numerical failure inside the sweep (bracket or scan gave up)."""


def minimize_shifted_cost(prob, t):
    """Leftmost minimizer of C_t (coercivity puts it in [0, inf)).

    Bisects on the sign of the right derivative, which is nondecreasing for
    the convex C_t, so this converges to machine precision and lands on the
    left edge of any flat stretch — including the kink minimizers that
    lattice-supported demand produces.
    """
    if cost_slope(prob, t, 0.0) >= 0:
        return 0.0
    hi = 1.0
    for _ in range(MAX_DOUBLINGS):
        if cost_slope(prob, t, hi) >= 0:
            break
        hi *= 2.0
    else:
        raise SolverError(
            f"bracket-failure: period {t} cost has no upslope below 2**{MAX_DOUBLINGS}; "
            "check the coercivity conditions"
        )
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if cost_slope(prob, t, mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def upper_order_limit(prob, grid, t, cm):
    """Index of the first lattice point >= cm where C_t exceeds its value one
    step left of cm by more than K_t.  No sensible policy orders above it."""
    per = prob.periods[t]
    n0 = grid.ceil_index(cm) - 1
    target = float(transformed_cost(prob, t, grid.coord(n0))) + per.K
    m = n0 + 1
    block = _SCAN_BLOCK
    scanned = 0
    while scanned <= MAX_SCAN:
        idx = np.arange(m, m + block)
        vals = transformed_cost(prob, t, idx * grid.theta)
        hit = np.nonzero(vals > target)[0]
        if hit.size:
            return int(idx[hit[0]])
        m += block
        scanned += block
        block = min(block * 2, 1 << 20)
    raise SolverError(
        f"scan-overflow: period {t} upper cutoff not found within {MAX_SCAN} lattice steps"
    )


def terminal_reorder_point(prob, cm, tol_root=1e-9):
    """Reorder point of the last period: the level left of cm where the
    terminal cost has climbed by exactly K."""
    t = prob.T - 1
    K = prob.periods[t].K
    if K == 0:
        return float(cm)
    base = float(transformed_cost(prob, t, cm))
    target = base + K
    step = 1.0
    b = cm - step
    for _ in range(MAX_DOUBLINGS):
        if float(transformed_cost(prob, t, b)) > target:
            break
        step *= 2.0
        b = cm - step
    else:
        raise SolverError("bracket-failure: terminal cost never climbs by K left of its minimum")
    root = brentq(
        lambda y: float(transformed_cost(prob, t, y)) - target,
        b,
        cm,
        xtol=1e-12,
        rtol=4 * np.finfo(float).eps,
    )
    resid = abs(float(transformed_cost(prob, t, root)) - target)
    if resid > max(tol_root, 1e-9 * abs(target)):
        raise SolverError(
            f"internal-consistency: terminal crossing residual {resid:g} exceeds tolerance"
        )
    return float(root)


def demand_step_masses(demand, grid, n_hi):
    """Masses of lattice steps for one period's demand.

    Returns (w, Fv) with w[j] = P(D in step j-1) for j = 0..n_hi+1 and
    Fv[q] = P(D < q*theta) for q = 0..n_hi+1.  Step n covers [n*theta,
    (n+1)*theta); using the strict cdf puts an atom sitting exactly on a
    lattice point into the step that starts there, which is what makes the
    sweep reproduce exact dynamic programming on lattice-supported demand.
    """
    pts = grid.coords(0, n_hi + 1)
    Fv = np.asarray(demand.cdf_strict(pts), dtype=float)
    w = np.diff(Fv, prepend=0.0)
    return w, Fv


@dataclass(frozen=True)
class Cutoffs:
    """Search limits per period, mostly as lattice indices."""

    cm: np.ndarray          # leftmost minimizer of each C_t (real)
    cost_cm: np.ndarray     # C_t at that minimizer
    su_idx: np.ndarray      # upper search limit per period
    sbar_idx: np.ndarray    # top of the tabulated range, t = 0..T-2
    low_idx: np.ndarray     # bottom of the policy search window, t = 0..T-2
    lowbar_idx: np.ndarray  # bottom of the tabulated range, t = 0..T-2
    s_last: float           # terminal reorder point (real, generally off-lattice)


def _scan_down_crossing(prob, grid, t, start_idx, target):
    """Largest index m <= start_idx with C_t(m*theta) > target (convex scan)."""
    m = start_idx
    block = _SCAN_BLOCK
    scanned = 0
    while scanned <= MAX_SCAN:
        idx = np.arange(m, m - block, -1)
        vals = transformed_cost(prob, t, idx * grid.theta)
        hit = np.nonzero(vals > target)[0]
        if hit.size:
            return int(idx[hit[0]])
        m -= block
        scanned += block
        block = min(block * 2, 1 << 20)
    raise SolverError(
        f"scan-overflow: period {t} lower cutoff not found within {MAX_SCAN} lattice steps"
    )


def compute_cutoffs(prob, grid):
    T = prob.T
    cm = np.array([minimize_shifted_cost(prob, t) for t in range(T)])
    # lattice-supported demand puts the terminal minimizer at a kink the
    # slope bisection can only approach from below; land on it exactly
    z = grid.coord(round(cm[T - 1] / grid.theta))
    if abs(z - cm[T - 1]) <= grid.theta * 1e-6 and float(
        transformed_cost(prob, T - 1, z)
    ) <= float(transformed_cost(prob, T - 1, cm[T - 1])):
        cm[T - 1] = z
    cost_cm = np.array([float(transformed_cost(prob, t, cm[t])) for t in range(T)])
    su = np.array([upper_order_limit(prob, grid, t, cm[t]) for t in range(T)], dtype=np.int64)
    s_last = terminal_reorder_point(prob, cm[T - 1], tol_root=grid.theta * 1e-6)

    sbar = np.empty(max(T - 1, 0), dtype=np.int64)
    low = np.empty(max(T - 1, 0), dtype=np.int64)
    lowbar = np.empty(max(T - 1, 0), dtype=np.int64)
    if T >= 2:
        sbar[0] = su[0]
        for t in range(1, T - 1):
            sbar[t] = max(su[t], sbar[t - 1] + 1)
        prev_bottom = s_last  # reorder point one period later, as a real
        for t in range(T - 2, -1, -1):
            v = min(prev_bottom - grid.theta, cm[t])
            low[t] = grid.ceil_index(v) - 1
            target = float(transformed_cost(prob, t, grid.coord(low[t]))) + prob.periods[t].K
            lowbar[t] = _scan_down_crossing(prob, grid, t, low[t], target) + 1
            prev_bottom = lowbar[t] * grid.theta
    return Cutoffs(cm, cost_cm, su, sbar, low, lowbar, s_last)


@dataclass(frozen=True)
class Policy:
    """Threshold policy: in period t, order up to S[t] iff inventory < s[t]."""

    s: np.ndarray
    S: np.ndarray

    @property
    def T(self):
        return len(self.s)

    def action(self, t, x):
        """Post-order level for inventory x in period t."""
        x = np.asarray(x, dtype=float)
        return np.where(x < self.s[t], self.S[t], x)


@dataclass(frozen=True)
class SolverResult:
    problem: object
    grid: Grid
    cutoffs: Cutoffs
    s: np.ndarray            # (T,) reorder points; last entry off-lattice
    S: np.ndarray            # (T,) order-up-to levels; last entry off-lattice
    s_idx: np.ndarray        # (T-1,) lattice indices of s_t for t <= T-2
    S_idx: np.ndarray        # (T-1,)
    H: list                  # H[t] tabulated on [lowbar_idx[t], sbar_idx[t]]
    H_at_S: np.ndarray       # (T,) tabulated cost at the chosen order-up-to level
    gamma: np.ndarray        # (T,) per-period cost Lipschitz constants

    @property
    def policy(self):
        return Policy(self.s, self.S)

    def H_value(self, t, idx):
        """Tabulated H_t at lattice index idx (must lie in the stored window)."""
        lo = self.cutoffs.lowbar_idx[t]
        arr = self.H[t]
        if not lo <= idx <= lo + len(arr) - 1:
            raise IndexError(f"H_{t} not tabulated at index {idx}")
        return float(arr[idx - lo])


def backward_sweep(prob, grid, cutoffs=None):
    """Solve for the lattice policy and its cost tables."""
    T = prob.T
    th = grid.theta
    al = prob.alpha
    if cutoffs is None:
        cutoffs = compute_cutoffs(prob, grid)
    cm, cost_cm = cutoffs.cm, cutoffs.cost_cm
    su, sbar = cutoffs.su_idx, cutoffs.sbar_idx
    low, lowbar = cutoffs.low_idx, cutoffs.lowbar_idx

    gamma = np.array([lipschitz_gamma(prob, t) for t in range(T)])
    s = np.empty(T)
    S = np.empty(T)
    H_at_S = np.empty(T)
    S[T - 1] = cm[T - 1]
    s[T - 1] = cutoffs.s_last
    H_at_S[T - 1] = cost_cm[T - 1]

    if T == 1:
        return SolverResult(
            prob, grid, cutoffs, s, S,
            np.empty(0, np.int64), np.empty(0, np.int64), [], H_at_S, gamma,
        )

    s_idx = np.empty(T - 1, dtype=np.int64)
    S_idx = np.empty(T - 1, dtype=np.int64)
    H = [None] * (T - 1)

    for t in range(T - 2, -1, -1):
        lo, hi = int(lowbar[t]), int(sbar[t])
        per = prob.periods[t]
        if t == T - 2:
            k0 = grid.ceil_index(cutoffs.s_last)
            nxt = np.asarray(transformed_cost(prob, T - 1, grid.coords(k0, hi + 1)))
        else:
            k0 = int(s_idx[t + 1])
            base = int(lowbar[t + 1])
            nxt = H[t + 1][k0 - base : hi + 2 - base]
        const = H_at_S[t + 1] + prob.periods[t + 1].K

        xs = grid.coords(lo, hi)
        Cx = np.asarray(transformed_cost(prob, t, xs))
        Ht = Cx + al * const  # points far below next period's reorder level
        astart = max(lo, k0 - 1)
        if astart <= hi:
            w, Fv = demand_step_masses(per.demand, grid, hi - k0)
            conv = np.convolve(nxt, w)
            idx = np.arange(astart, hi + 1)
            tails = 1.0 - Fv[idx - k0 + 1]
            Ht[astart - lo :] = Cx[astart - lo :] + al * (const * tails + conv[idx - k0 + 1])
        H[t] = Ht

        # order-up-to level: rightmost within-tolerance minimizer over the
        # policy window, so lattice ties resolve toward the larger level
        wlo, whi = int(low[t]), int(su[t])
        win = Ht[wlo - lo : whi - lo + 1]
        hmin = float(win.min())
        tie = hmin + ARGMIN_TIE_REL * abs(hmin)
        cand = np.nonzero(win <= tie)[0]
        S_idx[t] = wlo + int(cand[-1])
        H_at_S[t] = float(win[cand[-1]])
        S[t] = S_idx[t] * th
        if per.K == 0:
            s_idx[t] = S_idx[t]
        else:
            target = H_at_S[t] + per.K
            seg = Ht[: S_idx[t] - lo + 1]
            hits = np.nonzero(seg <= target)[0]
            if not hits.size:
                raise SolverError(f"internal-consistency: period {t} reorder point not found")
            s_idx[t] = lo + int(hits[0])
        s[t] = s_idx[t] * th

    return SolverResult(prob, grid, cutoffs, s, S, s_idx, S_idx, H, H_at_S, gamma)


def solve_policy(prob, grid):
    """Solve the problem on the given lattice (alias for the full sweep)."""
    return backward_sweep(prob, grid)

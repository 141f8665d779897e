"""Problem data for finite-horizon inventory control with setup costs.

A problem is a sequence of periods (unit cost c, holding h, shortage p, setup
K, demand model) plus a discount factor and a terminal salvage rate.  Leftover
stock at the end is bought back at the salvage rate; unmet demand is
backlogged, so inventory may go negative.

Everything downstream works with the shifted per-period cost

    C_t(y) = (c_t - a*c_{t+1})*y + h_t*E[(y-D)+] + p_t*E[(D-y)+] + a*c_{t+1}*E[D]

(a = discount factor, c_{t+1} = salvage rate in the last period), which is
convex and coercive under the validity conditions checked by `validate`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _npdf(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT2PI


class DemandModel:
    """Nonnegative demand distribution.

    Subclasses provide `cdf`, `mean`, `surplus` (the partial expectation
    E[(y-D)+], i.e. the running integral of the cdf from 0) and `ppf`.
    `cdf_strict(x)` is P(D < x); it only differs from `cdf` for models with
    atoms away from the left edge of their support.
    """

    def cdf(self, x):
        raise NotImplementedError

    def cdf_strict(self, x):
        return self.cdf(x)

    @property
    def mean(self):
        raise NotImplementedError

    def surplus(self, y):
        """E[(y - D)+]."""
        raise NotImplementedError

    def shortage(self, y):
        """E[(D - y)+] via the complement identity."""
        return self.surplus(y) - np.asarray(y) + self.mean

    def loss(self, y):
        """(E[(y-D)+], E[(D-y)+]) as a pair."""
        ep = self.surplus(y)
        return ep, ep - np.asarray(y) + self.mean

    def ppf(self, u):
        raise NotImplementedError

    def spec_string(self):
        """Config-file token for this model (round-trips through the parser)."""
        raise NotImplementedError


@dataclass(frozen=True)
class TruncatedNormal(DemandModel):
    """Normal(mu, sigma) conditioned on D >= 0."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self._w() < 1e-12:
            raise ValueError("truncated normal keeps almost no mass above 0")

    def _q0(self):
        # untruncated mass below zero
        return float(sc.ndtr(-self.mu / self.sigma))

    def _w(self):
        return 1.0 - self._q0()

    def _partial(self, y):
        # A(y) = integral of the untruncated cdf; A'(y) = Phi((y-mu)/sigma)
        z = (np.asarray(y, dtype=float) - self.mu) / self.sigma
        return (y - self.mu) * sc.ndtr(z) + self.sigma * _npdf(z)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        q0 = self._q0()
        val = (sc.ndtr((x - self.mu) / self.sigma) - q0) / (1.0 - q0)
        return np.where(x < 0, 0.0, np.clip(val, 0.0, 1.0))

    @property
    def mean(self):
        return self.mu + self.sigma * float(_npdf(self.mu / self.sigma)) / self._w()

    def surplus(self, y):
        y = np.asarray(y, dtype=float)
        q0 = self._q0()
        val = (self._partial(y) - self._partial(0.0) - y * q0) / (1.0 - q0)
        return np.where(y <= 0, 0.0, val)

    def ppf(self, u):
        q0 = self._q0()
        return self.mu + self.sigma * sc.ndtri(q0 + np.asarray(u) * (1.0 - q0))

    def spec_string(self):
        return f"tnormal mu={self.mu!r} sigma={self.sigma!r}"


@dataclass(frozen=True)
class Uniform(DemandModel):
    """Uniform on [0, b]."""

    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("upper endpoint must be positive")

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float) / self.b, 0.0, 1.0)

    @property
    def mean(self):
        return 0.5 * self.b

    def surplus(self, y):
        y = np.asarray(y, dtype=float)
        yc = np.clip(y, 0.0, self.b)
        flat = np.where(y > self.b, y - self.b, 0.0)
        return 0.5 * yc * yc / self.b + flat

    def ppf(self, u):
        return np.asarray(u) * self.b

    def spec_string(self):
        return f"uniform b={self.b!r}"


@dataclass(frozen=True)
class Gamma(DemandModel):
    """Gamma with shape a and rate r (mean a/r)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("shape and rate must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, sc.gammainc(self.shape, self.rate * np.maximum(x, 0.0)))

    @property
    def mean(self):
        return self.shape / self.rate

    def surplus(self, y):
        # int_0^y F = y*P(a, r*y) - (a/r)*P(a+1, r*y)
        y = np.asarray(y, dtype=float)
        yp = np.maximum(y, 0.0)
        val = y * sc.gammainc(self.shape, self.rate * yp) - self.mean * sc.gammainc(
            self.shape + 1.0, self.rate * yp
        )
        return np.where(y <= 0, 0.0, val)

    def ppf(self, u):
        return sc.gammaincinv(self.shape, np.asarray(u)) / self.rate

    def spec_string(self):
        return f"gamma shape={self.shape!r} rate={self.rate!r}"


class PiecewiseCdf(DemandModel):
    """Demand given by piecewise-linear cdf knots (x_i, F_i).

    Knots must have strictly increasing x_i >= 0, nondecreasing F_i, and
    F_last = 1.  F_0 > 0 puts an atom of that mass at x_0 (the cdf is taken
    right-continuous there); elsewhere the distribution is continuous, so the
    strict cdf coincides with the plain one.  Partial expectations are exact
    piecewise-quadratic integrals, no quadrature involved.
    """

    def __init__(self, xs, Fs):
        xs = np.asarray(xs, dtype=float)
        Fs = np.asarray(Fs, dtype=float)
        if xs.ndim != 1 or xs.shape != Fs.shape or len(xs) < 1:
            raise ValueError("knots must be two equal-length 1-d sequences")
        if xs[0] < 0:
            raise ValueError("demand support must be nonnegative")
        if len(xs) > 1 and not np.all(np.diff(xs) > 0):
            raise ValueError("knot abscissae must be strictly increasing")
        if np.any(np.diff(Fs) < 0) or Fs[0] < 0:
            raise ValueError("cdf knots must be nondecreasing in [0, 1]")
        if abs(Fs[-1] - 1.0) > 1e-12:
            raise ValueError("last cdf knot must equal 1")
        Fs = Fs.copy()
        Fs[-1] = 1.0
        self.xs = xs
        self.Fs = Fs
        # cumulative integral of F up to each knot (F vanishes left of xs[0])
        if len(xs) > 1:
            seg = np.diff(xs) * 0.5 * (Fs[:-1] + Fs[1:])
            self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        else:
            self._cum = np.zeros(1)
        # quantile table with flat runs collapsed to their left edge
        keep = np.concatenate([[True], np.diff(Fs) > 0])
        self._qF = Fs[keep]
        self._qx = xs[keep]

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseCdf)
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.Fs, other.Fs)
        )

    def __hash__(self):
        return hash((tuple(self.xs), tuple(self.Fs)))

    def __repr__(self):
        return f"PiecewiseCdf(xs={self.xs.tolist()}, Fs={self.Fs.tolist()})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.xs[0], 0.0, np.interp(x, self.xs, self.Fs))

    @property
    def mean(self):
        if len(self.xs) == 1:
            return float(self.xs[0])
        trap = np.diff(self.xs) * (1.0 - 0.5 * (self.Fs[:-1] + self.Fs[1:]))
        return float(self.xs[0] + np.sum(trap))

    def surplus(self, y):
        y = np.asarray(y, dtype=float)
        xs, Fs = self.xs, self.Fs
        if len(xs) == 1:
            return np.maximum(y - xs[0], 0.0)
        k = np.clip(np.searchsorted(xs, y, side="right") - 1, 0, len(xs) - 2)
        d = y - xs[k]
        slope = (Fs[k + 1] - Fs[k]) / (xs[k + 1] - xs[k])
        inner = self._cum[k] + Fs[k] * d + 0.5 * slope * d * d
        top = self._cum[-1] + (y - xs[-1])
        out = np.where(y >= xs[-1], top, inner)
        return np.where(y <= xs[0], 0.0, out)

    def ppf(self, u):
        return np.interp(np.asarray(u), self._qF, self._qx)

    def spec_string(self):
        pairs = ",".join(f"{x!r}:{F!r}" for x, F in zip(self.xs, self.Fs))
        return f"empirical knots={pairs}"


# ---------------------------------------------------------------------------
# problem containers


@dataclass(frozen=True)
class PeriodParams:
    """One period: unit cost, holding rate, shortage rate, setup cost, demand."""

    c: float
    h: float
    p: float
    K: float
    demand: DemandModel


@dataclass(frozen=True)
class InventoryProblem:
    periods: tuple
    alpha: float
    salvage: float

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(self.periods))
        if len(self.periods) < 1:
            raise ValueError("need at least one period")
        if not (0 < self.alpha <= 1):
            raise ValueError("discount factor must lie in (0, 1]")

    @property
    def T(self):
        return len(self.periods)

    def c_after(self, t):
        """Unit value of stock carried out of period t (salvage in the last)."""
        return self.periods[t + 1].c if t + 1 < self.T else self.salvage

    def c_eff(self, t):
        """Effective linear order cost c_t - alpha*c_{t+1}."""
        return self.periods[t].c - self.alpha * self.c_after(t)


def transformed_cost(prob, t, y):
    """Shifted one-period expected cost C_t(y) (convex in y)."""
    per = prob.periods[t]
    cd = prob.c_eff(t)
    ep = per.demand.surplus(y)
    ca = prob.alpha * prob.c_after(t)
    return (cd - per.p) * np.asarray(y) + (per.h + per.p) * ep + (per.p + ca) * per.demand.mean


def cost_slope(prob, t, y):
    """Right derivative of C_t; negative left of the minimizer."""
    per = prob.periods[t]
    return (prob.c_eff(t) - per.p) + (per.h + per.p) * per.demand.cdf(y)


def lipschitz_gamma(prob, t):
    """Lipschitz constant of C_t: max slope magnitude over both tails."""
    per = prob.periods[t]
    cd = prob.c_eff(t)
    return max(abs(cd + per.h), abs(cd - per.p))


def validate(prob):
    """List of violated modelling conditions (empty when the problem is usable).

    The solver needs every shifted cost to be coercive (so minimizers and
    crossing points exist) and setup costs to be nonincreasing after
    discounting (so single-threshold policies are the right shape).
    """
    out = []
    T = prob.T
    for t, per in enumerate(prob.periods):
        if per.h < 0:
            out.append(f"period {t}: holding rate h={per.h} is negative")
        if per.p < 0:
            out.append(f"period {t}: shortage rate p={per.p} is negative")
        if per.K < 0:
            out.append(f"period {t}: setup cost K={per.K} is negative")
        cd = prob.c_eff(t)
        if not cd + per.h > 0:
            out.append(
                f"period {t}: carrying stock must cost something: need "
                f"(c[{t}] - alpha*c[{t + 1}]) + h[{t}] > 0, got {cd + per.h:g}"
            )
        if not per.p - cd > 0:
            out.append(
                f"period {t}: backlogging must cost more than ordering later: need "
                f"p[{t}] > c[{t}] - alpha*c[{t + 1}], got p - (c - alpha*c') = {per.p - cd:g}"
            )
    for t in range(T - 1):
        Kn = prob.periods[t + 1].K
        if prob.periods[t].K < prob.alpha * Kn - 1e-12:
            out.append(
                f"period {t}: setup costs must be nonincreasing after discounting: "
                f"K[{t}]={prob.periods[t].K} < alpha*K[{t + 1}]={prob.alpha * Kn}"
            )
    return out

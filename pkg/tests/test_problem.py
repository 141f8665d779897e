import numpy as np
import pytest
from scipy.integrate import quad

from sspolicy import (
    Gamma,
    InventoryProblem,
    PeriodParams,
    PiecewiseCdf,
    TruncatedNormal,
    Uniform,
    lipschitz_gamma,
    transformed_cost,
    validate,
)
from sspolicy.problem import cost_slope

from helpers import bundled_problem

MODELS = [
    TruncatedNormal(mu=3.0, sigma=1.2),
    TruncatedNormal(mu=0.4, sigma=1.0),  # heavy truncation at zero
    Uniform(b=2.5),
    Gamma(shape=2.3, rate=0.8),
    Gamma(shape=25.0, rate=25.0 / 110.0),
    PiecewiseCdf([0.0, 1.0, 2.0, 4.0], [0.1, 0.3, 0.3, 1.0]),
]


@pytest.mark.parametrize("d", MODELS, ids=lambda d: type(d).__name__ + d.spec_string()[:24])
def test_surplus_is_integral_of_cdf(d):
    # E[(y-D)+] = int_0^y F(u) du for nonnegative demand
    for y in [0.3, 1.0, 1.7, 3.9, 8.0]:
        ref, err = quad(lambda u: float(d.cdf(u)), 0.0, y, limit=200)
        assert abs(float(d.surplus(y)) - ref) <= 1e-10 * max(1.0, ref) + 2 * err
    assert float(d.surplus(0.0)) == 0.0
    assert float(d.surplus(-1.0)) == 0.0


@pytest.mark.parametrize("d", MODELS, ids=lambda d: type(d).__name__ + d.spec_string()[:24])
def test_mean_and_shortage_against_quadrature(d):
    hi = float(d.ppf(1.0 - 1e-13)) + 1.0 if not isinstance(d, PiecewiseCdf) else d.xs[-1]
    ref, err = quad(lambda u: 1.0 - float(d.cdf(u)), 0.0, hi, limit=400)
    assert abs(d.mean - ref) <= 1e-9 * max(1.0, ref) + 2 * err
    for y in [0.0, 0.9, 2.1]:
        ref, err = quad(lambda u: 1.0 - float(d.cdf(u)), y, hi, limit=400)
        assert abs(float(d.shortage(y)) - ref) <= 1e-9 * max(1.0, ref) + 2 * err


@pytest.mark.parametrize(
    "d", [m for m in MODELS if not isinstance(m, PiecewiseCdf)],
    ids=lambda d: type(d).__name__ + d.spec_string()[:24],
)
def test_ppf_inverts_cdf(d):
    u = np.linspace(0.001, 0.999, 41)
    assert np.allclose(d.cdf(d.ppf(u)), u, rtol=0, atol=1e-10)


def test_loss_pair_identity():
    d = Gamma(shape=2.0, rate=1.0)
    y = np.array([-0.5, 0.0, 0.7, 3.0])
    ep, em = d.loss(y)
    assert np.allclose(em - ep, d.mean - y, rtol=0, atol=1e-13)
    assert np.all(ep >= 0) and np.all(em >= 0)


def test_truncated_normal_mass_and_mean_shift():
    d = TruncatedNormal(mu=0.0, sigma=1.0)
    assert float(d.cdf(0.0)) == 0.0
    assert abs(d.mean - np.sqrt(2.0 / np.pi)) < 1e-12  # half-normal mean
    with pytest.raises(ValueError):
        TruncatedNormal(mu=-50.0, sigma=1.0)
    with pytest.raises(ValueError):
        TruncatedNormal(mu=1.0, sigma=0.0)


def test_piecewise_cdf_atom_at_left_edge():
    d = PiecewiseCdf([0.0, 2.0], [0.25, 1.0])
    assert float(d.cdf(-1e-9)) == 0.0
    assert float(d.cdf(0.0)) == 0.25
    assert float(d.ppf(0.1)) == 0.0
    assert abs(d.mean - 0.75) < 1e-14  # 0.75*1.0 mean of the linear part
    assert abs(float(d.surplus(1.0)) - quad(lambda u: float(d.cdf(u)), 0, 1.0)[0]) < 1e-12


def test_piecewise_cdf_validation():
    with pytest.raises(ValueError):
        PiecewiseCdf([1.0, 0.5], [0.2, 1.0])
    with pytest.raises(ValueError):
        PiecewiseCdf([0.0, 1.0], [0.5, 0.99])
    with pytest.raises(ValueError):
        PiecewiseCdf([-0.5, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        PiecewiseCdf([0.0, 1.0], [0.7, 0.2])


def test_degenerate_point_mass_knot():
    d = PiecewiseCdf([1.5], [1.0])
    assert d.mean == 1.5
    assert float(d.cdf(1.4)) == 0.0 and float(d.cdf(1.5)) == 1.0
    assert float(d.surplus(2.0)) == 0.5


# --- shifted one-period cost on the small worked problem ------------------


def test_shifted_cost_closed_form_last_period():
    prob = bundled_problem("example3_1")
    # last period: c=h=1, p=3, salvage 1, D ~ U[0,1]  =>  C(y) = 2y^2 - 3y + 2
    y = np.linspace(0.0, 1.0, 21)
    assert np.allclose(transformed_cost(prob, 2, y), 2 * y * y - 3 * y + 2, atol=1e-14)
    assert float(transformed_cost(prob, 2, 0.0)) == 2.0
    assert abs(float(transformed_cost(prob, 2, 0.75)) - 0.875) < 1e-14
    assert abs(float(cost_slope(prob, 2, 0.75))) < 1e-14


def test_lipschitz_constants_small_problem():
    prob = bundled_problem("example3_1")
    assert [lipschitz_gamma(prob, t) for t in range(3)] == [9.0, 4.0, 3.0]


def test_slope_matches_difference_quotient():
    prob = bundled_problem("example4_1")
    for t in [0, 3, 9]:
        for y in [50.0, 110.0, 170.0]:
            num = (transformed_cost(prob, t, y + 5e-7) - transformed_cost(prob, t, y - 5e-7)) / 1e-6
            assert abs(float(cost_slope(prob, t, y)) - float(num)) < 1e-5


# --- validation ------------------------------------------------------------


def _prob(**kw):
    base = dict(c=1.0, h=1.0, p=3.0, K=1.0, demand=Uniform(b=1.0))
    per = PeriodParams(**{**base, **kw})
    return InventoryProblem(periods=(per, PeriodParams(**base)), alpha=1.0, salvage=1.0)


def test_validate_accepts_bundles():
    for name in ["example3_1", "example4_1", "example4_2", "example4_3"]:
        assert validate(bundled_problem(name)) == []


def test_validate_flags_each_condition():
    assert any("h=" in m for m in validate(_prob(h=-0.1)))
    assert any("p=" in m for m in validate(_prob(p=-0.1)))
    assert any("K=" in m for m in validate(_prob(K=-0.1)))
    # c - alpha*c' + h <= 0: make the first-period unit cost tiny and h zero
    bad = _prob(c=0.0, h=0.0)
    assert any("carrying stock" in m for m in validate(bad))
    # p <= c - alpha*c': huge unit cost in period 0
    bad = _prob(c=20.0, p=3.0)
    assert any("backlogging" in m for m in validate(bad))
    # setup costs increasing over time
    per0 = PeriodParams(c=1.0, h=1.0, p=3.0, K=0.5, demand=Uniform(b=1.0))
    per1 = PeriodParams(c=1.0, h=1.0, p=3.0, K=2.0, demand=Uniform(b=1.0))
    bad = InventoryProblem(periods=(per0, per1), alpha=1.0, salvage=1.0)
    assert any("nonincreasing" in m for m in validate(bad))


def test_problem_container_guards():
    with pytest.raises(ValueError):
        InventoryProblem(periods=(), alpha=1.0, salvage=0.0)
    with pytest.raises(ValueError):
        InventoryProblem(
            periods=(PeriodParams(c=1, h=1, p=2, K=0, demand=Uniform(b=1.0)),),
            alpha=1.2,
            salvage=0.0,
        )


def test_cost_effective_chain_uses_salvage_at_end():
    prob = bundled_problem("example3_1")
    assert prob.c_after(2) == prob.salvage == 1.0
    assert prob.c_eff(0) == prob.periods[0].c - prob.alpha * prob.periods[1].c

import numpy as np
import pytest

from sspolicy import (
    Grid,
    certify,
    coarse_slack_caps,
    evaluate_value,
    flat_slack_caps,
    solve_policy,
    value_slack_above,
    value_slack_below,
)
from sspolicy.bounds import estimate_pass

import naive_impl
from helpers import bundled_problem, random_continuous_problem, truncate, warmup_result

V0_WARMUP = 1.3 + 37.0 / 120.0 + 1.3395  # H at the first order-up-to level, plus K


def test_warmup_slack_hand_values():
    res = warmup_result()
    tab = estimate_pass(res, 0)
    assert abs(tab.bound - 9.9) < 1e-12
    assert np.allclose(tab.eta, [9.9, 3.0, 0.0], rtol=0, atol=1e-12)
    assert np.allclose(tab.psi_su, [4.8, 2.1, 0.0], rtol=0, atol=1e-12)
    assert np.allclose(tab.psibar_su, [4.8, 2.1, 0.0], rtol=0, atol=1e-12)
    assert np.allclose(tab.omega_su, [5.1, 0.9, 0.0], rtol=0, atol=1e-12)
    assert abs(value_slack_below(res, 0) - 9.9) < 1e-12
    assert abs(value_slack_above(res, 0) - 4.92) < 1e-12


def test_warmup_certificate_fields():
    res = warmup_result()
    cert = certify(res, 0.0)
    assert cert.x == 0.0 and cert.theta == 0.3
    assert abs(cert.approx_value - V0_WARMUP) < 1e-12
    assert abs(cert.slack_below - 9.9) < 1e-12
    assert abs(cert.slack_above - 4.92) < 1e-12
    assert abs(cert.gap_bound - 14.82) < 1e-12
    assert abs(cert.value_low - (V0_WARMUP - 9.9)) < 1e-12
    assert abs(cert.value_high - (V0_WARMUP + 4.92)) < 1e-12
    # the coarse lattice cannot certify a positive lower endpoint here
    assert cert.rel_degenerate and cert.rel_bound is None
    assert cert.slack_below <= cert.cap_below + 1e-12
    assert cert.slack_above <= cert.cap_above + 1e-12
    assert cert.cap_below <= cert.cap_below_flat + 1e-12
    assert cert.cap_above <= cert.cap_above_flat + 1e-12


def test_certify_needs_two_periods():
    prob = truncate(bundled_problem("example3_1"), 1)
    res = solve_policy(prob, Grid(0.3))
    with pytest.raises(ValueError):
        certify(res, 0.0)
    with pytest.raises(ValueError):
        value_slack_below(res, 0)


@pytest.mark.parametrize("seed,T", [(51, 3), (52, 4), (53, 5), (54, 4)])
def test_slacks_match_literal_recursion(seed, T):
    rng = np.random.default_rng(seed)
    prob = random_continuous_problem(rng, T=T)
    res = solve_policy(prob, Grid(0.25))
    nav = naive_impl.NaiveTables(prob, Grid(0.25), res)
    su0 = int(res.cutoffs.su_idx[0])
    for j in [-2, 0, su0 - 1, su0, su0 + 3, su0 + 7]:
        got = value_slack_below(res, j)
        want = nav.slack_below(j)
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))
    for k in [-2, 0, su0, su0 + 5]:
        got = value_slack_above(res, k)
        want = nav.slack_above(k)
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


@pytest.mark.parametrize("seed", [61, 62])
def test_two_period_closed_forms(seed):
    rng = np.random.default_rng(seed)
    prob = random_continuous_problem(rng, T=2)
    grid = Grid(0.2)
    res = solve_policy(prob, grid)
    nav = naive_impl.NaiveTables(prob, grid, res)
    th, al = 0.2, prob.alpha
    assert value_slack_above(res, 4) == al * res.gamma[1] * th
    for j in [0, 3, int(res.cutoffs.su_idx[0]) + 2]:
        assert abs(value_slack_below(res, j) - nav.slack_below(j)) < 1e-12
    # one period before the end the spread has a one-readout closed form
    tab = estimate_pass(res, 0)
    j = int(res.cutoffs.su_idx[0])
    Fs = prob.periods[0].demand.cdf_strict((j - nav.k_last + 1) * th)
    want = res.gamma[0] * th + al * res.gamma[1] * th * float(Fs)
    assert abs(tab.psi_su[0] - want) < 1e-13


@pytest.mark.parametrize("seed,T", [(71, 3), (72, 5)])
def test_caps_match_literal_formulas_and_dominate(seed, T):
    rng = np.random.default_rng(seed)
    prob = random_continuous_problem(rng, T=T)
    res = solve_policy(prob, Grid(0.25))
    nav = naive_impl.NaiveTables(prob, Grid(0.25), res)
    su0 = int(res.cutoffs.su_idx[0])
    for j, k in [(0, 0), (su0, 2), (su0 + 4, su0 + 4)]:
        cap_b, cap_a = coarse_slack_caps(res, j, k)
        assert abs(cap_b - nav.cap_below(j)) <= 1e-12 * max(1.0, cap_b)
        assert abs(cap_a - nav.cap_above(k)) <= 1e-12 * max(1.0, cap_a)
        assert value_slack_below(res, j) <= cap_b * (1 + 1e-12)
        assert value_slack_above(res, k) <= cap_a * (1 + 1e-12)
        flat_b, flat_a = flat_slack_caps(res)
        assert cap_b <= flat_b * (1 + 1e-12)
        assert cap_a <= flat_a * (1 + 1e-12)


def test_flat_caps_halve_bit_exactly():
    prob = truncate(bundled_problem("example4_1"), 6)
    res1 = solve_policy(prob, Grid(0.4))
    res2 = solve_policy(prob, Grid(0.2))
    b1, a1 = flat_slack_caps(res1)
    b2, a2 = flat_slack_caps(res2)
    assert b2 == 0.5 * b1
    assert a2 == 0.5 * a1


def test_spread_tables_ordered_and_floored():
    res = warmup_result()
    tab = estimate_pass(res, 9)
    for t, (lo, vals) in tab.psi.items():
        assert np.all(vals >= res.gamma[t] * 0.3 - 1e-15)
        blo, bvals = tab.psibar[t]
        # carryover spread dominates the plain spread where both are tabulated
        for j, v in zip(range(lo, lo + len(vals)), vals):
            if blo <= j < blo + len(bvals):
                assert bvals[j - blo] >= v - 1e-12


def test_slack_above_monotone_in_query_point():
    res = warmup_result()
    vals = [value_slack_above(res, k) for k in range(-2, 8)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_slack_below_flat_up_to_search_limit_then_enveloped():
    res = warmup_result()
    su0 = int(res.cutoffs.su_idx[0])
    eta0 = estimate_pass(res, 0).eta[0]
    for j in range(-3, su0 + 1):
        assert value_slack_below(res, j) == pytest.approx(eta0, abs=1e-13)
    for j in range(su0 + 1, su0 + 6):
        assert value_slack_below(res, j) >= eta0 - 1e-13


# --- start-value evaluation -------------------------------------------------


def test_evaluate_value_matches_tables_on_lattice():
    res = warmup_result()
    th = 0.3
    for j in range(res.s_idx[0], int(res.cutoffs.sbar_idx[0]) + 1):
        assert evaluate_value(res, j * th) == pytest.approx(res.H_value(0, j), abs=1e-12)


def test_evaluate_value_constant_below_first_reorder_point():
    res = warmup_result()
    want = res.H_at_S[0] + res.problem.periods[0].K
    for x in [-5.0, -0.31, 0.0, 0.299]:
        assert evaluate_value(res, x) == want


@pytest.mark.parametrize("seed,T", [(81, 3), (82, 4), (83, 5)])
def test_evaluate_value_off_lattice_matches_literal(seed, T):
    rng = np.random.default_rng(seed)
    prob = random_continuous_problem(rng, T=T)
    grid = Grid(0.25)
    res = solve_policy(prob, grid)
    nav = naive_impl.NaiveTables(prob, grid, res)
    s0 = float(res.s[0])
    for x in [s0 + 0.01, s0 + 0.13, s0 + 1.07, s0 + 3.979, s0 + 11.5]:
        got = evaluate_value(res, x)
        want = nav.value_at(x)
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


def test_certificate_on_fine_grid_is_tight_and_consistent():
    prob = bundled_problem("example3_1")
    res = solve_policy(prob, Grid(0.001))
    cert = certify(res, 0.0)
    assert not cert.rel_degenerate
    assert cert.value_low <= cert.approx_value <= cert.value_high
    assert cert.gap_bound == pytest.approx(cert.slack_below + cert.slack_above, abs=1e-15)
    assert cert.rel_bound == pytest.approx(cert.gap_bound / cert.value_low, abs=1e-15)
    assert cert.value_low <= 3.2916 <= cert.value_high  # long-run reference cost

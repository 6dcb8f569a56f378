import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from possplit.coeffs import solve_asymmetric, solve_symmetric
from possplit.core import (FlowPair, Sign, SplittingMethod, affine_step, chain_eval,
                           estimate_lipschitz, integrate, lie_step, strang_step)
from possplit.errors import DegenerateInput, NumericFailure, UsageError

from oracles import expm_ss, expm_taylor

# Non-commuting pair; A0 has negative-definite symmetric part.
A0 = np.array([[-1.0, 0.5], [-0.5, -2.0]])
A1 = np.array([[0.0, 1.0], [-1.0, 0.3]])

ALL_SCHEMES = ([solve_symmetric(n) for n in range(1, 8)]
               + [solve_asymmetric(q, s) for q in range(1, 9) for s in ("plus", "minus")])


def linear_pair(a0=A0, a1=A1):
    return FlowPair(lambda h, u: expm(a0 * h) @ u, lambda h, u: expm(a1 * h) @ u)


def scalar_pair(a=-0.7, b=0.3):
    return FlowPair(lambda h, u: np.exp(a * h) * u, lambda h, u: np.exp(b * h) * u)


def step_matrix(step, h):
    return np.column_stack([step(h, e) for e in np.eye(2)])


def local_errors(step, hs):
    return [np.linalg.norm(step_matrix(step, h) - expm_ss((A0 + A1) * h), 2) for h in hs]


def test_oracle_agrees_with_series_at_small_h():
    for h in (1e-3, 1e-2, 0.1):
        np.testing.assert_allclose(expm_ss((A0 + A1) * h), expm_taylor((A0 + A1) * h), rtol=0, atol=1e-15)
    assert np.linalg.norm(A0 @ A1 - A1 @ A0) > 1


def test_flowpair_identity_at_zero_and_rejects_negative():
    fp = linear_pair()
    u = np.array([1.0, 2.0])
    assert fp.flow0(0.0, u) is u and fp.flow1(0.0, u) is u
    with pytest.raises(AssertionError):
        fp.flow0(-1e-3, u)


def test_lie_step_zero():
    u = np.array([0.3, -0.4])
    for sign in Sign:
        assert np.array_equal(lie_step(linear_pair(), sign, 0.0, u), u)


def test_lie_step_commuting_scalars():
    u = np.array([1.5])
    out = lie_step(scalar_pair(), "plus", 0.37, u)
    np.testing.assert_allclose(out, np.exp(-0.4 * 0.37) * u, rtol=1e-15)


def test_lie_order_one():
    fp = linear_pair()
    hs = [2.0 ** -k for k in range(4, 9)]
    for sign in Sign:
        errs = local_errors(lambda h, u: lie_step(fp, sign, h, u), hs)
        ratio = errs[-2] / errs[-1]
        assert abs(ratio - 4) < 0.15 * 4


def test_lie_sign_order():
    calls = []
    fp = FlowPair(lambda h, u: calls.append(0) or u, lambda h, u: calls.append(1) or u)
    lie_step(fp, "plus", 0.1, np.zeros(1))
    lie_step(fp, "minus", 0.1, np.zeros(1))
    assert calls == [0, 1, 1, 0]


def test_strang():
    fp = linear_pair()
    assert np.array_equal(strang_step(fp, 0.0, np.ones(2)), np.ones(2))
    np.testing.assert_allclose(strang_step(scalar_pair(), 0.5, np.ones(1)), np.exp(-0.2), rtol=1e-15)
    errs = local_errors(lambda h, u: strang_step(fp, h, u), [2.0 ** -k for k in range(4, 9)])
    assert abs(errs[-2] / errs[-1] - 8) < 0.15 * 8


def test_chain_m1_is_lie_step():
    fp = linear_pair()
    u = np.array([0.2, 0.9])
    assert np.array_equal(chain_eval(fp, "minus", 1, 0.3, u), lie_step(fp, "minus", 0.3, u))


@pytest.mark.parametrize("m", [1, 2, 5])
def test_chain_commuting_telescopes(m):
    out = chain_eval(scalar_pair(), "plus", m, 0.8, np.array([2.0]))
    np.testing.assert_allclose(out, 2.0 * np.exp(-0.4 * 0.8), rtol=1e-14)


def test_chain_m3_leading_error():
    # The chain's local error is O(h^2 / m): for m=3 it is about a third of the Lie error.
    fp = linear_pair()
    h = 1e-3
    exact = expm_ss((A0 + A1) * h)
    e1 = np.linalg.norm(step_matrix(lambda h, u: chain_eval(fp, "plus", 1, h, u), h) - exact)
    e3 = np.linalg.norm(step_matrix(lambda h, u: chain_eval(fp, "plus", 3, h, u), h) - exact)
    assert abs(e1 / e3 - 3) < 0.01
    assert e3 < 2 * h ** 2


def test_chain_rejects_zero_length():
    with pytest.raises(UsageError):
        chain_eval(linear_pair(), "plus", 0, 0.1, np.ones(2))


def test_symmetric_n1_is_average():
    fp = linear_pair()
    method = SplittingMethod(solve_symmetric(1), fp)
    u = np.array([0.4, -1.1])
    expected = 0.5 * (lie_step(fp, "plus", 0.2, u) + lie_step(fp, "minus", 0.2, u))
    np.testing.assert_allclose(affine_step(method, 0.2, u), expected, rtol=1e-15)


@pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.name)
def test_affine_step_zero_is_identity(scheme):
    u = np.array([0.123456789, -9.87654321])
    assert np.array_equal(affine_step(SplittingMethod(scheme, linear_pair()), 0.0, u), u)


@pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.name)
def test_commuting_exactness(scheme):
    d0, d1 = np.array([-0.9, -2.5]), np.array([0.4, 0.1])
    fp = FlowPair(lambda h, u: np.exp(d0 * h) * u, lambda h, u: np.exp(d1 * h) * u)
    method = SplittingMethod(scheme, fp)
    u = np.array([1.0, -3.0])
    for h in (0.1, 1.0):
        exact = np.exp((d0 + d1) * h) * u
        out = affine_step(method, h, u)
        assert np.linalg.norm(out - exact) <= 1e-12 * np.linalg.norm(exact)


def halving_ratios(errs, floor=1e-12):
    return [(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)
            if errs[i] > floor and errs[i + 1] > floor]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_symmetric_consistency_order(n):
    q = 2 * n
    method = SplittingMethod(solve_symmetric(n), linear_pair())
    errs = local_errors(method, [2.0 ** -k for k in range(3, 9)])
    ratios = halving_ratios(errs)
    assert ratios
    for r in ratios:
        assert abs(r - 2 ** (q + 1)) <= 0.15 * 2 ** (q + 1), (errs, ratios)


@pytest.mark.parametrize("q", [1, 2, 3, 4])
@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_asymmetric_consistency_order(q, sign):
    method = SplittingMethod(solve_asymmetric(q, sign), linear_pair())
    errs = local_errors(method, [2.0 ** -k for k in range(4, 10)])
    ratios = halving_ratios(errs)
    assert ratios
    assert abs(ratios[-1] - 2 ** (q + 1)) <= 0.15 * 2 ** (q + 1), (errs, ratios)


def test_parallel_bitwise_identical():
    fp = linear_pair()
    u = np.array([0.7, -0.2])
    for scheme in ALL_SCHEMES:
        seq = SplittingMethod(scheme, fp)
        par = SplittingMethod(scheme, fp, parallel=True, workers=8)
        try:
            for h in (0.05, 0.3, 1.0):
                assert affine_step(seq, h, u).tobytes() == affine_step(par, h, u).tobytes()
        finally:
            par.close()


def test_parallel_respects_env(monkeypatch):
    method = SplittingMethod(solve_symmetric(3), linear_pair(), parallel=True)
    monkeypatch.setenv("POSSPLIT_THREADS", "0")
    assert method._n_workers() == 0
    monkeypatch.setenv("POSSPLIT_THREADS", "8")
    assert method._n_workers() == 6
    monkeypatch.setenv("POSSPLIT_THREADS", "-1")
    with pytest.raises(UsageError):
        method._n_workers()


def test_integrate_zero_steps():
    u0 = np.array([1.0, 2.0])
    traj = integrate(SplittingMethod(solve_symmetric(2), linear_pair()), u0, 0.1, 0)
    assert len(traj) == 1 and traj.times == [0.0]
    assert np.array_equal(traj.states[0], u0)


def test_integrate_commuting_scalars():
    method = SplittingMethod(solve_symmetric(2), scalar_pair())
    u0 = np.array([3.0])
    traj = integrate(method, u0, 0.25, 10)
    for n, (t, u) in enumerate(zip(traj.times, traj.states)):
        assert t == n * 0.25
        np.testing.assert_allclose(u, 3.0 * np.exp(-0.4 * t), rtol=1e-13)


def test_integrate_observer_and_norms():
    seen = []
    method = SplittingMethod(solve_symmetric(2), linear_pair())
    traj = integrate(method, np.array([1.0, 0.0]), 0.1, 3, observer=lambda n, t, u: seen.append(n))
    assert seen == [0, 1, 2, 3]
    assert traj.norms == [np.linalg.norm(u) for u in traj.states]


def test_integrate_rejects_bad_arguments():
    method = SplittingMethod(solve_symmetric(1), linear_pair())
    with pytest.raises(UsageError):
        integrate(method, np.ones(2), 0.0, 3)
    with pytest.raises(UsageError):
        integrate(method, np.ones(2), 0.1, -1)


def test_numeric_failure_keeps_partial_trajectory():
    def blowup(h, u):
        return u * 1e300 if u[0] > 1e10 else u * 1e6
    fp = FlowPair(blowup, lambda h, u: u)
    method = SplittingMethod(solve_symmetric(1), fp)
    with np.errstate(over="ignore"), pytest.raises(NumericFailure) as info:
        integrate(method, np.array([1.0]), 0.1, 10)
    assert info.value.step_index == 3
    assert len(info.value.trajectory) == 3


def test_lipschitz_identity_and_isometry():
    method = SplittingMethod(solve_symmetric(2), linear_pair())
    rng = np.random.default_rng(1)
    pairs = [(rng.normal(size=2), rng.normal(size=2)) for _ in range(5)]
    assert estimate_lipschitz(method, 0.0, pairs) == pytest.approx(1.0, abs=1e-15)
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    iso = SplittingMethod(solve_symmetric(2), linear_pair(rot, 2 * rot))
    assert estimate_lipschitz(iso, 0.7, pairs) == pytest.approx(1.0, abs=1e-12)


def test_lipschitz_degenerate():
    method = SplittingMethod(solve_symmetric(1), linear_pair())
    with pytest.raises(DegenerateInput):
        estimate_lipschitz(method, 0.1, [(np.ones(2), np.ones(2))])
    with pytest.raises(DegenerateInput):
        estimate_lipschitz(method, 0.1, [])


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.0, max_value=2.0), st.integers(min_value=1, max_value=4))
def test_flows_never_see_negative_steps(h, n):
    seen = []

    def rec(h, u):
        seen.append(h)
        return u
    method = SplittingMethod(solve_symmetric(n), FlowPair(rec, rec))
    affine_step(method, h, np.ones(2))
    assert all(x >= 0 for x in seen)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coupled_de import densities as D
from coupled_de import spatial_coupling as S
from coupled_de.ensembles import CoupledSpec, DegreeDistribution
from coupled_de.joint_de import DESettings, bp_threshold_symmetric
from coupled_de.sources import SourceModel

E = D.ErasureMix
M = SourceModel("erasure", 0.5)
G = D.Grid(15.0, 256)


def bec(e):
    return D.ChannelSpec("bec", e)


def inner_scalar(xs, r, w):
    """(1/w) sum_j [1 - (1 - (1/w) sum_k x_{j-k})^(r-1)] for a window of 2w-1 erasure masses."""
    c = w - 1
    return np.mean([1 - (1 - np.mean([xs[j - k + c] for k in range(w)])) ** (r - 1) for j in range(w)])


def test_operator_identities():
    spec = CoupledSpec(4, 6, 8, 3)
    assert S.g_op([D.DELTA_INF] * 5, spec).erasure == 0.0
    assert S.gamma_op([D.DELTA_INF] * 5, spec).erasure == 0.0
    assert S.g_op([D.DELTA_0] * 5, spec).erasure == 1.0
    with pytest.raises(ValueError):
        S.g_op([D.DELTA_0] * 4, spec)


def test_width_one_reduces_to_uncoupled():
    spec = CoupledSpec(4, 6, 8, 1)
    x = 0.37
    assert S.g_op([E(x)], spec).erasure == pytest.approx((1 - (1 - x) ** 5) ** 3, abs=1e-15)
    assert S.gamma_op([E(x)], spec).erasure == pytest.approx((1 - (1 - x) ** 5) ** 4, abs=1e-15)


def test_erasure_windows_match_scalar_formula():
    rng = np.random.default_rng(3)
    spec = CoupledSpec(4, 6, 8, 3)
    for _ in range(5):
        xs = rng.uniform(size=5)
        inner = inner_scalar(xs, 6, 3)
        win = [E(x) for x in xs]
        assert S.g_op(win, spec).erasure == pytest.approx(inner ** 3, abs=1e-14)
        assert S.gamma_op(win, spec).erasure == pytest.approx(inner ** 4, abs=1e-14)


def test_identical_windows_give_uncoupled_operator():
    spec = CoupledSpec(4, 6, 8, 3)
    a = D.bawgnc_density(1.0, G)
    got = D.to_quantized(S.g_op([a] * 5, spec), G).packed
    ref = D.to_quantized(D.var_power(D.chk_power(a, 5), 3), G).packed
    assert np.allclose(got, ref, atol=1e-12)


def test_first_step_on_clean_channel():
    spec = CoupledSpec(4, 6, 6, 2)
    s = S.coupled_de_step(S.CoupledState.initial(spec), bec(0.0), bec(0.0), M)
    pe = [D.error_prob(x) for x in s.a]
    assert pe[0] < 0.5 and pe[-1] < 0.5


def test_symmetries_and_anchoring_exact():
    spec = CoupledSpec(4, 6, 6, 3)
    s = S.CoupledState.initial(spec)
    for _ in range(25):
        s = S.coupled_de_step(s, bec(0.55), bec(0.55), M)
        xa = [x.erasure for x in s.a]
        assert xa == xa[::-1]  # a_i = a_-i exactly
        assert xa == [x.erasure for x in s.b]  # users coincide exactly
        assert xa[0] <= xa[spec.L]  # boundary at least as reliable as the centre


def test_engine_matches_reference_path():
    spec = CoupledSpec(4, 6, 5, 2)
    s = S.CoupledState.initial(spec)
    for _ in range(30):
        s = S.coupled_de_step(s, bec(0.58), bec(0.52), M)
    res = S.run_coupled_de(spec, bec(0.58), bec(0.52), M, DESettings(max_iterations=30))
    assert res.iterations == 30
    assert np.allclose(res.pe1, [D.error_prob(x) for x in s.a], atol=1e-14)
    assert np.allclose(res.pe2, [D.error_prob(x) for x in s.b], atol=1e-14)


def test_quantized_engine_matches_erasure_engine():
    # identical sources two ways: bsc:0 takes the quantized engine, erasure:1 the erasure engine
    spec = CoupledSpec(4, 6, 4, 2)
    st_ = DESettings(max_iterations=40)
    q = S.run_coupled_de(spec, bec(0.62), bec(0.55), SourceModel("bsc", 0.0), st_, G)
    e = S.run_coupled_de(spec, bec(0.62), bec(0.55), SourceModel("erasure", 1.0), st_, G)
    assert np.allclose(q.pe1, e.pe1, atol=1e-12) and np.allclose(q.pe2, e.pe2, atol=1e-12)


def test_quantized_spatial_symmetry():
    spec = CoupledSpec(4, 6, 4, 2)
    ch = D.ChannelSpec("bawgnc", 1.2)
    res = S.run_coupled_de(spec, ch, ch, SourceModel("bsc", 0.1), DESettings(max_iterations=20), G)
    assert np.allclose(res.pe1, res.pe1[::-1], atol=1e-12)
    assert np.array_equal(res.pe1, res.pe2)


@pytest.mark.parametrize("eps, ok", [(0.61, True), (0.64, False)])
def test_coupled_bec_points(eps, ok):
    res = S.run_coupled_de(CoupledSpec(4, 6, 32, 4), bec(eps), bec(eps), M)
    assert res.converged is ok
    if ok:
        assert max(res.pe1.max(), res.pe2.max()) < 1e-10


def test_batched_matches_single_runs():
    spec = CoupledSpec(4, 6, 8, 2)
    e1 = np.array([0.3, 0.6, 0.55, 0.7])
    e2 = np.array([0.3, 0.6, 0.65, 0.2])
    got = S.coupled_bec_converges(spec, e1, e2, M)
    ref = [S.run_coupled_de(spec, bec(a), bec(b), M).converged for a, b in zip(e1, e2)]
    assert got.tolist() == ref


def test_coupled_threshold_not_below_uncoupled():
    spec = CoupledSpec(4, 6, 16, 2)
    coupled = S.coupled_bp_threshold_symmetric("bec", M, spec, tol=1e-3)
    uncoupled = bp_threshold_symmetric("bec", M, DegreeDistribution.regular(4, 6), tol=1e-3)
    assert coupled >= uncoupled


def test_error_profile_rows():
    spec = CoupledSpec(4, 6, 3, 2)
    res = S.run_coupled_de(spec, bec(0.5), bec(0.5), M, DESettings(max_iterations=5))
    rows = S.error_profile(res, spec)
    assert [r[0] for r in rows] == list(range(-3, 4))


def test_coupled_gexit_small():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        curve = S.coupled_ebp_gexit(CoupledSpec(4, 6, 4, 2), SourceModel("bsc", 0.1), [0.3, 0.6], G)
    assert curve[-1].h_channel == 1.0 and curve[-1].h_exit == 1.0
    assert all(0 < c.h_exit <= 1 for c in curve)
    assert curve[0].h_exit < curve[1].h_exit


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=5))
def test_g_op_erasure_property(xs):
    spec = CoupledSpec(3, 6, 4, 3)
    assert S.g_op([E(x) for x in xs], spec).erasure == pytest.approx(inner_scalar(xs, 6, 3) ** 2, abs=1e-14)

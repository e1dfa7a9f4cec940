import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from coupled_de import densities as D
from coupled_de.ensembles import DegreeDistribution

G = D.Grid(15.0, 512)  # small grid keeps the property tests fast


def h2(p):
    return -p * np.log2(p) - (1 - p) * np.log2(1 - p)


def bawgnc_entropy_quad(sigma):
    """Independent oracle: E[log2(1 + e^-L)], L ~ N(2/s^2, 4/s^2)."""
    mu, sd = 2 / sigma**2, 2 / sigma
    f = lambda l: stats.norm.pdf(l, mu, sd) * np.logaddexp(0, -l) / np.log(2)
    return integrate.quad(f, mu - 12 * sd, mu + 12 * sd, limit=200)[0]


def kernel_quad(sigma, y):
    """Independent oracle for the BAWGNC GEXIT kernel at LLR y."""
    mu, sd = 2 / sigma**2, 2 / sigma
    num = integrate.quad(lambda z: stats.norm.pdf(z, mu, sd) / (1 + np.exp(y + z)), mu - 12 * sd, mu + 12 * sd)[0]
    den = integrate.quad(lambda z: stats.norm.pdf(z, mu, sd) / (1 + np.exp(z)), mu - 12 * sd, mu + 12 * sd)[0]
    return num / den


# ---------------------------------------------------------------------------
# channels

def test_bec_channel_is_erasure_mix():
    assert D.channel_density(D.ChannelSpec("bec", 0.0)).erasure == 0.0
    assert D.channel_density(D.ChannelSpec("bec", 0.4)).erasure == 0.4


def test_bsc_half_is_all_zero_llr():
    a = D.to_quantized(D.bsc_density(0.5, G), G)
    assert a.mass[G.half] == pytest.approx(1.0)


def test_bsc_point_masses():
    a = D.to_quantized(D.bsc_density(0.1, D.DEFAULT_GRID))
    # the split onto grid points is weighted to keep the density exactly symmetric
    assert D.error_prob(a) == pytest.approx(0.1, abs=1e-6)
    assert D.entropy(a) == pytest.approx(h2(0.1), abs=1e-3)


def test_bawgnc_moments():
    a = D.to_quantized(D.bawgnc_density(1.0))
    x = a.grid.llr
    mean = a.mass @ x
    var = a.mass @ x**2 - mean**2
    assert mean == pytest.approx(2.0, abs=1e-3)
    assert var == pytest.approx(4.0, abs=1e-2)


@pytest.mark.parametrize("sigma", [0.6, 1.0, 1.5])
def test_bawgnc_entropy_matches_quadrature(sigma):
    oracle = bawgnc_entropy_quad(sigma)
    assert D.bawgnc_entropy_exact(sigma) == pytest.approx(oracle, abs=1e-8)
    assert D.entropy(D.bawgnc_density(sigma)) == pytest.approx(oracle, abs=1e-4)


def test_bsc_entropy_oracle():
    assert D.entropy(D.channel_density(D.ChannelSpec("bsc", 0.11))) == pytest.approx(h2(0.11), abs=1e-3)
    assert h2(0.11) == pytest.approx(0.4999, abs=1e-4)


def test_channel_from_entropy_inverts():
    assert D.channel_from_entropy("bec", 0.625).param == 0.625
    assert D.channel_from_entropy("bsc", 0.0).param == 0.0
    h = bawgnc_entropy_quad(1.0)
    assert D.channel_from_entropy("bawgnc", h).param == pytest.approx(1.0, abs=2e-3)


@pytest.mark.parametrize("family", ["bec", "bsc", "bawgnc"])
def test_entropy_increasing_in_parameter(family):
    params = {"bec": [0.1, 0.3, 0.6], "bsc": [0.02, 0.1, 0.3], "bawgnc": [0.6, 1.0, 1.8]}[family]
    hs = [D.channel_entropy(D.ChannelSpec(family, p)) for p in params]
    assert hs[0] < hs[1] < hs[2]


# ---------------------------------------------------------------------------
# operators on erasure mixtures (exact)

E = D.ErasureMix


def test_identities():
    a = D.bawgnc_density(1.0, G)
    assert D.var_conv(D.DELTA_0, a) is a or np.array_equal(D.to_quantized(D.var_conv(D.DELTA_0, a), G).packed,
                                                           a.packed)
    assert D.total_mass(D.var_conv(D.DELTA_INF, a)) == pytest.approx(1.0)
    assert D.to_quantized(D.var_conv(D.DELTA_INF, a), G).mass_pos_inf == pytest.approx(1.0)
    assert np.allclose(D.to_quantized(D.chk_conv(D.DELTA_INF, a), G).packed, a.packed, atol=1e-15)
    assert D.to_quantized(D.chk_conv(D.DELTA_0, a), G).mass[G.half] == pytest.approx(1.0)


def test_erasure_closure_values():
    assert D.var_conv(E(0.3), E(0.5)).erasure == pytest.approx(0.15)
    assert D.chk_conv(E(0.3), E(0.5)).erasure == pytest.approx(0.65)
    dd = DegreeDistribution.regular(4, 6)
    assert D.edge_poly_var(dd, E(0.5)).erasure == pytest.approx(0.125)
    assert D.edge_poly_chk(dd, E(0.5)).erasure == pytest.approx(0.96875)
    assert D.node_poly_full(dd, D.DELTA_INF).erasure == 0.0
    assert D.node_poly_full(dd, E(0.5)).erasure == pytest.approx(0.0625)


def test_entropy_and_error_prob_erasure():
    assert D.entropy(D.DELTA_INF) == 0.0
    assert D.entropy(E(0.37)) == 0.37
    assert D.error_prob(D.DELTA_INF) == 0.0
    assert D.error_prob(D.DELTA_0) == 0.5
    assert D.error_prob(E(0.37)) == pytest.approx(0.185)


def test_mix_of_erasures_stays_exact():
    m = D.mix([0.25, 0.75], [E(0.2), E(0.6)])
    assert isinstance(m, D.ErasureMix) and m.erasure == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# GEXIT kernel

def test_kernel_endpoints_and_monotone():
    k = D.gexit_kernel_sigma(1.0, G)
    assert k(0.0) == pytest.approx(1.0, abs=1e-12)
    y = np.linspace(-15, 15, 301)
    v = k(y)
    assert np.all(np.diff(v) < 0)
    assert k(60.0) < 1e-20
    assert k.at_neg_inf == pytest.approx(k(-60.0), rel=1e-9)


@pytest.mark.parametrize("sigma, y", [(0.8, -2.0), (1.0, 1.5), (1.7, 4.0)])
def test_kernel_matches_quadrature(sigma, y):
    assert D.gexit_kernel_sigma(sigma, G)(y) == pytest.approx(kernel_quad(sigma, y), rel=1e-8)


def test_gexit_functional_endpoints():
    k = D.gexit_kernel_bawgnc(0.5, G)
    assert D.gexit_functional(k, D.DELTA_INF) == 0.0
    assert D.gexit_functional(k, D.DELTA_0) == 1.0
    assert D.gexit_functional(k, D.to_quantized(D.DELTA_0, G)) == pytest.approx(1.0, abs=1e-12)


def test_gexit_functional_quadrature_and_monotone():
    k = D.gexit_kernel_bawgnc(0.5, D.DEFAULT_GRID)
    vals = []
    for sigma in (0.7, 1.0, 1.4):
        mu, sd = 2 / sigma**2, 2 / sigma
        oracle = integrate.quad(lambda l: stats.norm.pdf(l, mu, sd) * k(l), mu - 12 * sd, mu + 12 * sd)[0]
        got = D.gexit_functional(k, D.bawgnc_density(sigma))
        assert got == pytest.approx(oracle, abs=1e-4)
        vals.append(got)
    assert 0 < vals[0] < vals[1] < vals[2] < 1


# ---------------------------------------------------------------------------
# serialisation

def test_dump_load_roundtrip():
    a = D.to_quantized(D.mix([0.5, 0.5], [D.bawgnc_density(1.2, G), E(0.3)]), G)
    buf = io.StringIO()
    D.dump_density(a, buf, G)
    b = D.load_density(buf.getvalue().splitlines())
    assert b.grid == G and np.array_equal(a.packed, b.packed)


def test_packed_length_checked():
    with pytest.raises(ValueError):
        D.Quantized(G, np.zeros(5))


# ---------------------------------------------------------------------------
# properties on random symmetric densities

def _symmetric(draw_params):
    ws, es, ps, ss = draw_params
    parts = [E(es), D.bsc_density(ps, G), D.bawgnc_density(ss, G)]
    return D.to_quantized(D.mix(list(ws), parts), G)


weights = st.tuples(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1)).map(
    lambda t: tuple(x / sum(t) for x in t))
sym = st.tuples(weights, st.floats(0, 1), st.floats(0.001, 0.5), st.floats(0.4, 3.0)).map(_symmetric)
erasure = st.floats(0.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(sym, sym)
def test_mass_conservation(a, b):
    for out in (D.var_conv(a, b), D.chk_conv(a, b), D.var_power(a, 3), D.chk_power(b, 5)):
        assert D.total_mass(out) == pytest.approx(1.0, abs=1e-9)


WIDE = D.Grid(30.0, 1024)
sym_wide = st.tuples(weights, st.floats(0, 1), st.floats(0.001, 0.5), st.floats(0.4, 3.0)).map(
    lambda t: D.to_quantized(D.mix(list(t[0]), [E(t[1]), D.bsc_density(t[2], WIDE),
                                                D.bawgnc_density(t[3], WIDE)]), WIDE))


@settings(max_examples=30, deadline=None)
@given(sym_wide, sym_wide)
def test_symmetry_preserved(a, b):
    # wide grid: no sum falls below -grid_max, so nothing saturates
    for out in (D.var_conv(a, b), D.chk_conv(a, b)):
        assert D.symmetry_error(out) < 1e-12


@settings(max_examples=30, deadline=None)
@given(sym, sym)
def test_symmetry_loss_only_at_saturated_bin(a, b):
    out = D.var_conv(a, b)
    h = G.half
    err = np.abs(out.mass[:h][::-1] - np.exp(-G.magnitudes[1:]) * out.mass[h + 1:])
    assert err[:-1].max() < 1e-12
    # the lowest bin carries at most the mass that overflowed below -grid_max
    conv = np.convolve(a.mass, b.mass)
    below = conv[: G.half].sum() + conv[G.half] / 2 + np.exp(-G.grid_max)
    assert err[-1] <= below + 1e-12


@given(erasure, erasure)
def test_erasure_closure_property(x, y):
    assert D.var_conv(E(x), E(y)).erasure == pytest.approx(x * y, abs=1e-15)
    assert D.chk_conv(E(x), E(y)).erasure == pytest.approx(x + y - x * y, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(erasure, erasure)
def test_quantized_agrees_with_exact(x, y):
    qx, qy = D.to_quantized(E(x), G), D.to_quantized(E(y), G)
    for exact, quant in ((D.var_conv(E(x), E(y)), D.var_conv(qx, qy)),
                         (D.chk_conv(E(x), E(y)), D.chk_conv(qx, qy))):
        assert D.entropy(quant) == pytest.approx(D.entropy(exact), abs=1e-6)
        assert D.error_prob(quant) == pytest.approx(D.error_prob(exact), abs=1e-6)


@given(erasure)
def test_bec_entropy_exact(e):
    assert D.entropy(D.channel_density(D.ChannelSpec("bec", e))) == e

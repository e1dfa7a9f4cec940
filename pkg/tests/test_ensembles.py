import pytest
from hypothesis import given, strategies as st

from coupled_de.ensembles import (CoupledSpec, DegreeDistribution, EnsembleError, design_rate,
                                  node_perspective, parse_ensemble, puncture_fraction, punctured_rate)


def reg(l, r):
    return DegreeDistribution.regular(l, r)


def test_node_perspective_regular_and_mixed():
    assert node_perspective(reg(4, 6)) == pytest.approx({4: 1.0})
    assert node_perspective(reg(2, 6)) == pytest.approx({2: 1.0})
    # 0.5x + 0.5x^2: weights 0.5/2 and 0.5/3 normalised
    assert node_perspective(DegreeDistribution({2: 0.5, 3: 0.5}, {6: 1.0})) == pytest.approx({2: 0.6, 3: 0.4})


def test_puncture_fraction_values():
    assert puncture_fraction(reg(4, 6)) == pytest.approx(1 / 3)
    assert puncture_fraction(reg(3, 6)) == pytest.approx(1 / 2)
    with pytest.raises(EnsembleError):
        puncture_fraction(reg(6, 6))


def test_punctured_rate_values():
    assert punctured_rate(reg(4, 6)) == pytest.approx(0.5)
    assert punctured_rate(reg(3, 6)) == pytest.approx(1.0)


@pytest.mark.parametrize("text, expected", [
    ("4,6", DegreeDistribution.regular(4, 6)),
    ("4,6,64,10", CoupledSpec(4, 6, 64, 10)),
    (" 3 , 6 , 32 , 4 ", CoupledSpec(3, 6, 32, 4)),
])
def test_parse_ensemble(text, expected):
    got = parse_ensemble(text)
    if isinstance(expected, CoupledSpec):
        assert got == expected
    else:
        assert got.lambda_coeffs == expected.lambda_coeffs and got.rho_coeffs == expected.rho_coeffs


@pytest.mark.parametrize("text", ["4,", "", "a,b", "4,6,64", "4,6,0,1", "4,6,4,20", "2,6,8,2", "4,4,8,2"])
def test_parse_ensemble_rejects(text):
    with pytest.raises(EnsembleError):
        parse_ensemble(text)


def test_coupled_spec_properties():
    s = CoupledSpec(4, 6, 64, 10)
    assert s.n_positions == 129
    assert s.gamma == pytest.approx(1 / 3)
    assert s.base.lambda_coeffs == {4: 1.0}


degree_maps = st.dictionaries(st.integers(2, 12), st.floats(0.05, 1.0), min_size=1, max_size=4).map(
    lambda d: {k: v / sum(d.values()) for k, v in d.items()})


@given(degree_maps, degree_maps)
def test_node_perspective_sums_to_one(lam, rho):
    dd = DegreeDistribution(lam, rho)
    assert sum(node_perspective(dd).values()) == pytest.approx(1.0, abs=1e-12)


@given(degree_maps, degree_maps)
def test_puncture_fraction_is_design_rate(lam, rho):
    dd = DegreeDistribution(lam, rho)
    try:
        g = puncture_fraction(dd)
    except EnsembleError:
        assert design_rate(dd) <= 1e-12
        return
    assert g == pytest.approx(design_rate(dd), abs=1e-12)

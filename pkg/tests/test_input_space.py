import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqforge.errors import ConfigError, PreconditionError
from uqforge.input_space import (Normal, Parameter, ParameterSpace, Uniform,
                                 format_space, parse_space)


def test_percent_expansion_matches_published_bounds(table2_space):
    p = table2_space[table2_space.index("InletPressure")]
    assert p.dist.lo == pytest.approx(859168.6, abs=1e-6)
    assert p.dist.hi == pytest.approx(949607.4, abs=1e-6)
    # rounded display values match to +-1 Pa
    assert abs(p.dist.lo - 859168) <= 1.0
    assert abs(p.dist.hi - 949607) <= 1.0


def test_percent_expansion_gamma_five_decimals(table2_space):
    g = table2_space[table2_space.index("GammaValue")].dist
    assert g.lo == pytest.approx(1.0074933, abs=5e-6)
    assert g.hi == pytest.approx(1.0278467, abs=5e-6)
    assert abs(g.lo - 1.00749) <= 1e-5
    assert abs(g.hi - 1.02785) <= 1e-5


def test_degenerate_interval_rejected():
    with pytest.raises(ConfigError):
        parse_space("x, uniform, lo=0, hi=0")


@pytest.mark.parametrize("text,fragment", [
    ("x, uniform, lo=1, hi=0", "lo < hi"),
    ("x, normal, mean=0, std=0", "positive"),
    ("x, normal, mean=0, std=-2", "positive"),
    ("x, gamma, lo=0, hi=1", "unknown distribution"),
    ("x, uniform, lo=0, hi=1\nx, uniform, lo=0, hi=2", "duplicate"),
    ("x, uniform, lo=0", "uniform needs"),
    ("x, uniform, lo=0, hi=1, wat=3", "unexpected keys"),
])
def test_parse_errors_carry_context(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_space(text)
    assert fragment in str(err.value)
    assert "line" in str(err.value)


def test_parse_preserves_file_order(table2_space):
    expected = ("InletPressure", "InletTemperature", "GammaValue", "GasConstant",
                "Mu", "KT", "AcentricFactor")
    assert table2_space.names == expected
    for i, name in enumerate(expected):
        assert table2_space.index(name) == i


def test_units_carried_through(table2_space):
    assert table2_space[0].unit == "Pa"
    assert table2_space[2].unit == ""


def test_to_standard_midpoint_and_bounds():
    sp = ParameterSpace([Parameter("p", Uniform(859168.6, 949607.4)),
                         Parameter("q", Uniform(0.0, 2.0)),
                         Parameter("z", Normal(5.0, 2.0))])
    xi = sp.to_standard(np.array([904388.0, 2.0, 9.0]))
    assert abs(xi[0]) <= 1e-12
    assert xi[1] == pytest.approx(1.0, abs=1e-15)
    assert xi[2] == pytest.approx(2.0, abs=1e-15)


def test_to_physical_nominal_reproduces_table2_values(table2_space):
    nominal = table2_space.to_physical(np.zeros(7))
    expected = [904388.0, 542.13, 1.01767, 35.17, 1.21409e-05, 0.030542828, 0.524]
    np.testing.assert_allclose(nominal, expected, rtol=1e-12)


def test_to_physical_identity_on_standard_uniform():
    sp = ParameterSpace([Parameter("x", Uniform(-1.0, 1.0))])
    assert sp.to_physical(np.array([0.3]))[0] == pytest.approx(0.3, abs=1e-15)


def test_out_of_support_errors_name_the_parameter(table2_space):
    bad = table2_space.nominal()
    bad[2] = 2.0  # far outside the gamma interval
    with pytest.raises(PreconditionError) as err:
        table2_space.to_standard(bad)
    assert "GammaValue" in str(err.value)
    with pytest.raises(PreconditionError) as err:
        table2_space.to_physical(np.array([0, 0, 1.5, 0, 0, 0, 0.0]))
    assert "GammaValue" in str(err.value)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
                min_size=7, max_size=7))
def test_round_trip_property(u):
    # fixture-free: hypothesis interacts badly with session fixtures
    from uqforge.pipeline import table2_space_text
    sp = parse_space(table2_space_text())
    lo = np.array([p.dist.lo for p in sp])
    hi = np.array([p.dist.hi for p in sp])
    x = lo + np.asarray(u) * (hi - lo)
    back = sp.to_physical(sp.to_standard(x))
    assert np.all(np.abs(back - x) <= 1e-12 * np.maximum(np.abs(x), 1e-300))


def test_round_trip_bulk(table2_space):
    rng = np.random.default_rng(7)
    lo = np.array([p.dist.lo for p in table2_space])
    hi = np.array([p.dist.hi for p in table2_space])
    X = lo + rng.random((1000, 7)) * (hi - lo)
    back = table2_space.to_physical(table2_space.to_standard(X))
    assert np.max(np.abs(back - X) / np.abs(X)) <= 1e-12


def test_percent_bounds_symmetric_about_mean(table2_space):
    for p in table2_space:
        mid = 0.5 * (p.dist.lo + p.dist.hi)
        mean = {"InletPressure": 904388.0, "InletTemperature": 542.13,
                "GammaValue": 1.01767, "GasConstant": 35.17, "Mu": 1.21409e-05,
                "KT": 0.030542828, "AcentricFactor": 0.524}[p.name]
        assert abs(mid - mean) <= 1e-12 * abs(mean)


def test_format_space_round_trips(table2_space):
    again = parse_space(format_space(table2_space))
    assert again == table2_space


def test_space_invariants():
    with pytest.raises(ConfigError):
        ParameterSpace([])
    with pytest.raises(ConfigError):
        ParameterSpace([Parameter("", Uniform(0, 1))])
    with pytest.raises(ConfigError):
        ParameterSpace([Parameter("a", Uniform(0, 1)), Parameter("a", Uniform(0, 2))])

import numpy as np
import pytest

from uqforge import doe
from uqforge.errors import PreconditionError
from uqforge.input_space import Normal, Parameter, ParameterSpace, Uniform

# First 16 points of the raw sequence (zero point dropped) from the Joe-Kuo
# reference implementation; frozen after validating against
# scipy.stats.qmc.Sobol(scramble=False), which embeds the same published table.
REFERENCE_D1 = [
    (0.5,), (0.75,), (0.25,), (0.375,), (0.875,), (0.625,), (0.125,),
    (0.1875,), (0.6875,), (0.9375,), (0.4375,), (0.3125,), (0.8125,),
    (0.5625,), (0.0625,), (0.09375,),
]
REFERENCE_D2 = [
    (0.5, 0.5), (0.75, 0.25), (0.25, 0.75), (0.375, 0.375), (0.875, 0.875),
    (0.625, 0.125), (0.125, 0.625), (0.1875, 0.3125), (0.6875, 0.8125),
    (0.9375, 0.0625), (0.4375, 0.5625), (0.3125, 0.1875), (0.8125, 0.6875),
    (0.5625, 0.4375), (0.0625, 0.9375), (0.09375, 0.46875),
]
REFERENCE_D7 = [
    (0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5),
    (0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25),
    (0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75),
    (0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375),
    (0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875),
    (0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125),
    (0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625),
    (0.1875, 0.3125, 0.9375, 0.4375, 0.5625, 0.3125, 0.4375),
    (0.6875, 0.8125, 0.4375, 0.9375, 0.0625, 0.8125, 0.9375),
    (0.9375, 0.0625, 0.6875, 0.1875, 0.3125, 0.5625, 0.1875),
    (0.4375, 0.5625, 0.1875, 0.6875, 0.8125, 0.0625, 0.6875),
    (0.3125, 0.1875, 0.3125, 0.5625, 0.9375, 0.4375, 0.0625),
    (0.8125, 0.6875, 0.8125, 0.0625, 0.4375, 0.9375, 0.5625),
    (0.5625, 0.4375, 0.0625, 0.8125, 0.1875, 0.6875, 0.3125),
    (0.0625, 0.9375, 0.5625, 0.3125, 0.6875, 0.1875, 0.8125),
    (0.09375, 0.46875, 0.46875, 0.65625, 0.28125, 0.96875, 0.53125),
]
REFERENCE = {1: REFERENCE_D1, 2: REFERENCE_D2, 7: REFERENCE_D7}


@pytest.mark.parametrize("dim", [1, 2, 7])
def test_sobol_matches_reference_exactly(dim):
    pts = doe.sobol_sequence(dim, 16).points
    np.testing.assert_array_equal(pts, np.array(REFERENCE[dim]))


def test_sobol_matches_scipy_reference_live():
    qmc = pytest.importorskip("scipy.stats.qmc")
    import warnings
    for dim in (1, 2, 7, 21):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = qmc.Sobol(dim, scramble=False).random(65)[1:]
        np.testing.assert_array_equal(doe.sobol_sequence(dim, 64).points, ref)


def test_sobol_first_three_1d():
    pts = doe.sobol_sequence(1, 3).points.ravel()
    assert pts.tolist() == [0.5, 0.75, 0.25]


def test_sobol_first_two_2d():
    pts = doe.sobol_sequence(2, 2).points
    assert pts.tolist() == [[0.5, 0.5], [0.75, 0.25]]


def test_sobol_dim7_study_block():
    pts = doe.sobol_sequence(7, 100).points
    assert pts.shape == (100, 7)
    assert pts.min() >= 0.0 and pts.max() < 1.0
    assert len({tuple(row) for row in pts}) == 100


def test_sobol_skip_is_sequence_offset():
    whole = doe.sobol_sequence(3, 30).points
    tail = doe.sobol_sequence(3, 10, skip=20).points
    np.testing.assert_array_equal(whole[20:], tail)


def test_sobol_determinism():
    a = doe.sobol_sequence(5, 64, skip=7).points
    b = doe.sobol_sequence(5, 64, skip=7).points
    np.testing.assert_array_equal(a, b)


def test_sobol_dyadic_balance():
    # with the zero point dropped, exact balance holds at every level coarser
    # than the block size (k <= m-1)
    for m in range(2, 7):
        pts = doe.sobol_sequence(1, 2 ** m).points.ravel()
        for k in range(1, m):
            counts, _ = np.histogram(pts, bins=2 ** k, range=(0.0, 1.0))
            assert np.all(counts == 2 ** (m - k)), (m, k, counts)


def test_sobol_argument_validation():
    with pytest.raises(PreconditionError):
        doe.sobol_sequence(0, 4)
    with pytest.raises(PreconditionError):
        doe.sobol_sequence(65, 4)
    with pytest.raises(PreconditionError):
        doe.sobol_sequence(2, 0)
    with pytest.raises(PreconditionError):
        doe.sobol_sequence(2, 4, skip=-1)


def test_lhs_stratification_1d():
    pts = doe.lhs(1, 4, seed=123).points.ravel()
    occupied = sorted(int(v * 4) for v in pts)
    assert occupied == [0, 1, 2, 3]


def test_lhs_stratification_every_dimension():
    count = 50
    pts = doe.lhs(3, count, seed=9).points
    for j in range(3):
        strata = sorted(int(v * count) for v in pts[:, j])
        assert strata == list(range(count))


def test_lhs_single_point():
    pts = doe.lhs(2, 1, seed=0).points
    assert pts.shape == (1, 2)
    assert np.all((pts >= 0) & (pts < 1))


def test_lhs_seed_determinism():
    a = doe.lhs(3, 50, seed=42).points
    b = doe.lhs(3, 50, seed=42).points
    np.testing.assert_array_equal(a, b)
    c = doe.lhs(3, 50, seed=43).points
    assert not np.array_equal(a, c)


def test_monte_carlo_shape_and_range():
    d = doe.monte_carlo(1, 1, seed=5)
    assert d.points.shape == (1, 1)
    assert 0.0 <= d.points[0, 0] < 1.0


def test_monte_carlo_mean_clt_bound():
    pts = doe.monte_carlo(2, 10_000, seed=11).points
    # sigma of the sample mean is (1/sqrt(12))/100 ~ 0.0029; 0.02 is ~7 sigma
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) < 0.02)


def test_monte_carlo_determinism():
    np.testing.assert_array_equal(doe.monte_carlo(4, 256, seed=3).points,
                                  doe.monte_carlo(4, 256, seed=3).points)


def test_inverse_normal_cdf_against_quadrature_oracle():
    # independent oracle: numerically invert the CDF computed by quadrature
    from scipy.special import ndtri
    u = np.linspace(1e-12, 1 - 1e-12, 2001)
    ours = doe.inverse_normal_cdf(u)
    ref = ndtri(u)
    assert np.max(np.abs(ours - ref)) < 1e-9
    assert doe.inverse_normal_cdf(0.8413) == pytest.approx(1.0, abs=1e-3)
    assert doe.inverse_normal_cdf(0.5) == 0.0
    assert np.isneginf(doe.inverse_normal_cdf(0.0))


def test_scale_nominal_and_bounds(table2_space):
    mid = doe.DesignMatrix(np.full((1, 7), 0.5), "unit", {"kind": "mc"})
    phys = doe.scale(mid, table2_space)
    np.testing.assert_allclose(
        phys.points[0],
        [904388.0, 542.13, 1.01767, 35.17, 1.21409e-05, 0.030542828, 0.524],
        rtol=1e-12)

    lo = doe.DesignMatrix(np.zeros((1, 1)), "unit", {"kind": "mc"})
    sp = ParameterSpace([Parameter("x", Uniform(2.0, 4.0))])
    assert doe.scale(lo, sp).points[0, 0] == 2.0


def test_scale_normal_uses_inverse_cdf():
    sp = ParameterSpace([Parameter("z", Normal(0.0, 1.0))])
    d = doe.DesignMatrix(np.array([[0.8413]]), "unit", {"kind": "mc"})
    assert doe.scale(d, sp).points[0, 0] == pytest.approx(1.0, abs=1e-3)


def test_scale_dimension_mismatch(table2_space):
    with pytest.raises(PreconditionError):
        doe.scale(doe.monte_carlo(3, 5, seed=1), table2_space)


def test_design_row_order_preserved_by_scale(table2_space):
    d = doe.sobol_sequence(7, 20)
    phys = doe.scale(d, table2_space)
    lo = np.array([p.dist.lo for p in table2_space])
    hi = np.array([p.dist.hi for p in table2_space])
    np.testing.assert_allclose(phys.points, lo + d.points * (hi - lo), rtol=1e-14)


def test_unit_form_validation():
    with pytest.raises(PreconditionError):
        doe.DesignMatrix(np.array([[1.5]]), "unit")


def test_csv_round_trip(tmp_path, table2_space):
    d = doe.scale(doe.sobol_sequence(7, 25, skip=3), table2_space)
    path = tmp_path / "doe.csv"
    doe.save_design(d, path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("# doe kind=sobol dim=7 n=25 skip=3")
    back = doe.load_design(path)
    np.testing.assert_array_equal(back.points, d.points)
    assert back.form == "physical"
    assert back.provenance["skip"] == 3

"""Acceptance suite: the toolkit's headline guarantees, one test per criterion.

Each test prints a [PASS] line with its runtime (run with ``pytest -v -s``)
and enforces both the numeric tolerance and the time budget of its criterion.
"""

import time

import numpy as np
import pytest

from uqforge import chaos, doe, kriging, models, pck, pipeline, sensitivity
from uqforge.input_space import Parameter, ParameterSpace, Uniform

from conftest import ishigami_analytic
from test_doe import REFERENCE  # frozen Joe-Kuo reference points


def _report(num, label, t0, budget):
    elapsed = time.perf_counter() - t0
    print(f"[PASS] criterion {num}: {label} ({elapsed:.2f}s)")
    assert elapsed < budget, f"criterion {num} exceeded its {budget}s budget"


def _cube(n):
    return ParameterSpace([Parameter(f"x{i}", Uniform(-1.0, 1.0)) for i in range(n)])


def test_criterion_01_basis_count_and_budget():
    t0 = time.perf_counter()
    indices = chaos.total_degree_indices(7, 3)
    assert len(indices) == 120
    assert 2 * len(indices) == 240
    _report(1, "|A(3,7)| = 120 and 2x oversampling gives the 240-sample budget", t0, 1.0)


TABLE2_PRINTED = [
    # name, printed min, printed max, one unit in the last printed digit
    ("InletPressure", 859168.0, 949607.0, 1.0),
    ("InletTemperature", 536.71, 547.55, 0.01),
    ("GammaValue", 1.00749, 1.02785, 0.00001),
    ("GasConstant", 34.47, 35.87, 0.01),
    ("Mu", 1.18981e-05, 1.23837e-05, 1e-10),
    ("KT", 0.029931971, 0.031153684, 1e-9),
    ("AcentricFactor", 0.498, 0.550, 0.001),
]


def test_criterion_02_shipped_config_fidelity(table2_space):
    t0 = time.perf_counter()
    for name, lo_printed, hi_printed, unit in TABLE2_PRINTED:
        dist = table2_space[table2_space.index(name)].dist
        assert abs(dist.lo - lo_printed) <= unit, name
        assert abs(dist.hi - hi_printed) <= unit, name
    _report(2, "shipped nozzle config reproduces every published bound", t0, 1.0)


def test_criterion_03_pce_span_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2025)
    for n in range(1, 5):
        for p in range(1, 5):
            space = _cube(n)
            basis = chaos.basis_for_space(space, p)
            coeffs = rng.uniform(-1.0, 1.0, basis.size)
            design = doe.sobol_sequence(n, 2 * basis.size).points * 2.0 - 1.0
            y = chaos.eval_basis(basis, design) @ coeffs
            model = chaos.fit_regression(space, basis, design, y)
            assert np.max(np.abs(model.coeffs - coeffs)) <= 1e-8, (n, p)
            held_out = doe.sobol_sequence(n, 50, skip=1024).points * 2.0 - 1.0
            truth = chaos.eval_basis(basis, held_out) @ coeffs
            assert np.max(np.abs(model.predict(held_out) - truth)) <= 1e-8, (n, p)
    _report(3, "degree-<=p polynomials recovered to 1e-8 (n<=4, p<=4)", t0, 5.0)


def test_criterion_04_orthonormality():
    t0 = time.perf_counter()
    nodes, weights = np.polynomial.legendre.leggauss(22)
    weights = weights / weights.sum()
    table = chaos.legendre_orthonormal(nodes, 10)
    gram = (table * weights[:, None]).T @ table
    assert np.max(np.abs(gram - np.eye(11))) <= 1e-10
    nodes, weights = np.polynomial.hermite_e.hermegauss(22)
    weights = weights / weights.sum()
    table = chaos.hermite_orthonormal(nodes, 10)
    gram = (table * weights[:, None]).T @ table
    assert np.max(np.abs(gram - np.eye(11))) <= 1e-10
    _report(4, "quadrature Gram matrices equal identity to 1e-10 (degree 10)", t0, 1.0)


def test_criterion_05_ishigami_oracle_suite(ishigami_space, ishigami_fit_data):
    t0 = time.perf_counter()
    mean_true, var_true, s1_true, st_true = ishigami_analytic()
    assert var_true == pytest.approx(13.8446, abs=5e-5)

    standard, y = ishigami_fit_data
    basis = chaos.basis_for_space(ishigami_space, 9)
    assert standard.shape[0] == 2 * basis.size
    model = chaos.fit_regression(ishigami_space, basis, standard, y)

    mean, var = model.moments()
    assert mean == pytest.approx(3.5, abs=0.02)
    assert abs(var - 13.8446) / 13.8446 <= 0.02

    extracted = model.sobol()
    np.testing.assert_allclose(extracted.first_order, [0.3139, 0.4424, 0.0], atol=0.02)

    mc = sensitivity.saltelli_sobol(lambda X: models.ishigami(X),
                                    ishigami_space, 2 ** 14)
    assert np.max(np.abs(mc.first_order - extracted.first_order)) <= 0.03
    assert np.max(np.abs(mc.total - extracted.total)) <= 0.03
    _report(5, "ishigami mean/variance/indices vs analytic + MC cross-check", t0, 60.0)


def test_criterion_06_kriging_interpolation_and_dense_oracle():
    t0 = time.perf_counter()
    from test_kriging import _dense_predict
    rng = np.random.default_rng(606)
    for trial in range(20):
        n = int(rng.integers(5, 21))
        d = int(rng.integers(1, 4))
        X = doe.sobol_sequence(d, n, skip=32 * trial).points * 2.0 - 1.0
        theta = 1.6 * (1.0 / n) ** (1.0 / d) * rng.uniform(0.7, 1.3, d)
        y = np.sin(2.0 * X @ rng.uniform(0.5, 1.5, d)) + rng.standard_normal(n) * 0.1
        kern = kriging.Kernel("squared-exponential", theta, nugget=1e-10)
        model = kriging.fit_given_theta(X, y, kern, kriging.constant_trend(d))
        mean, var = kriging.predict(model, X)
        assert np.max(np.abs(mean - y)) <= 1e-6 * np.max(np.abs(y))
        assert np.all(var <= 1e-8 * model.sigma2)
        probe = rng.uniform(-1, 1, (5, d))
        mean_ref, var_ref = _dense_predict(probe, X, y, kern, kriging.constant_trend(d))
        mean_p, var_p = kriging.predict(model, probe)
        scale = max(1.0, float(np.max(np.abs(mean_ref))))
        assert np.max(np.abs(mean_p - mean_ref)) <= 1e-8 * scale
        assert np.max(np.abs(var_p - np.maximum(var_ref, 0.0))) <= 1e-8 * model.sigma2
    _report(6, "20 instances: exact interpolation + dense-oracle agreement", t0, 10.0)


def test_criterion_07_pck_degeneracy():
    t0 = time.perf_counter()
    space = _cube(3)
    X = doe.sobol_sequence(3, 30).points * 2.0 - 1.0
    y = np.sin(2 * X[:, 0]) + X[:, 1] * X[:, 2]
    pmodel = pck.fit_pck(space, X, y, order=0, n_starts=4)
    kmodel = kriging.mle_train(X, y, trend=kriging.constant_trend(3), n_starts=4)
    probe = doe.sobol_sequence(3, 100, skip=999).points * 2.0 - 1.0
    pm, pv = pck.pck_predict(pmodel, probe)
    km, kv = kriging.predict(kmodel, probe)
    assert np.max(np.abs(pm - km)) <= 1e-10
    assert np.max(np.abs(pv - kv)) <= 1e-10 * max(kmodel.sigma2, 1e-300)
    _report(7, "order-0 PC-Kriging equals ordinary Kriging to 1e-10", t0, 5.0)


def test_criterion_08_sobol_sequence_oracle():
    t0 = time.perf_counter()
    for dim in (1, 2, 7):
        pts = doe.sobol_sequence(dim, 16).points
        np.testing.assert_array_equal(pts, np.array(REFERENCE[dim]))
    _report(8, "first 16 Sobol points match the reference implementation exactly", t0, 1.0)


def test_criterion_09_nozzle_study_end_to_end(tmp_path):
    t0 = time.perf_counter()
    cfg = pipeline.load_config(None)   # packaged defaults: 100 samples, pck p=2
    assert cfg.doe_count == 100 and cfg.surrogate_kind == "pck" and cfg.order == 2
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    pipeline.stage_study(cfg, out_a)
    pipeline.stage_study(cfg, out_b)

    # nominal exit Mach
    rows = [line.split(",") for line in
            (out_a / "nominal_centerline.csv").read_text().splitlines()[1:]]
    exit_mach = float(rows[-1][3])
    assert abs(exit_mach - 1.5) <= 1e-6

    # ideal-gas identity at every station of every sampled run
    design = doe.load_design(out_a / "samples.csv")
    resp = models.load_responses(out_a / "responses.csv")
    S = cfg.stations
    p = resp.Y[:, :S]
    T = resp.Y[:, S:2 * S]
    rho = resp.Y[:, 3 * S:]
    gas_const = design.points[:, 3][:, None]
    assert np.max(np.abs(rho * gas_const * T - p) / p) <= 1e-10

    # inert inputs stay inert through the surrogates
    srows = [line.split(",") for line in
             (out_a / "sobol_exit.csv").read_text().splitlines()[1:]]
    inert = {"Mu", "KT", "AcentricFactor"}
    for field, name, s1, st in srows:
        if name in inert:
            assert abs(float(st)) < 0.01, (field, name)

    # surrogate mean tracks the nominal profile within the surrogate spread
    # (absolute floor guards stations whose response is numerically constant)
    nominal = {f: np.array([float(r[1 + j]) for r in rows])
               for j, f in enumerate(models.NOZZLE_FIELDS)}
    mrows = [line.split(",") for line in
             (out_a / "mean_std_centerline.csv").read_text().splitlines()[1:]]
    for f in models.NOZZLE_FIELDS:
        block = [(float(m), float(s)) for (ff, x, m, s) in mrows if ff == f]
        mean = np.array([b[0] for b in block])
        std = np.array([b[1] for b in block])
        gap = np.abs(mean - nominal[f])
        floor = 1e-9 * np.maximum(np.abs(nominal[f]), 1e-300)
        assert np.all(gap <= 3.0 * std + floor), f

    # byte-identical reruns
    for path_a in sorted(out_a.iterdir()):
        path_b = out_b / path_a.name
        assert path_b.exists(), path_a.name
        assert path_a.read_bytes() == path_b.read_bytes(), path_a.name
    _report(9, "nozzle study: exit Mach, gas identity, inert inputs, reruns", t0, 120.0)


def test_criterion_10_mle_length_scale_recovery():
    t0 = time.perf_counter()
    theta_true = 0.5
    hits = 0
    for rep in range(20):
        rng = np.random.default_rng(4200 + rep)
        X = np.sort(rng.uniform(-1, 1, 40))[:, None]
        kern = kriging.Kernel("squared-exponential", np.array([theta_true]), nugget=1e-10)
        L = np.linalg.cholesky(kriging.correlation_matrix(kern, X))
        y = L @ rng.standard_normal(40)
        model = kriging.mle_train(X, y)
        if theta_true / 2.0 <= model.kernel.theta[0] <= theta_true * 2.0:
            hits += 1
    assert hits >= 18
    _report(10, f"length scale recovered within 2x in {hits}/20 replicates", t0, 60.0)

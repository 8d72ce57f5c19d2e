import numpy as np
import pytest

from uqforge import doe, models
from uqforge.input_space import parse_space
from uqforge.pipeline import table2_space_text

PI = float(np.pi)


@pytest.fixture(scope="session")
def table2_space():
    return parse_space(table2_space_text())


@pytest.fixture(scope="session")
def ishigami_space():
    text = "\n".join(f"x{i}, uniform, lo={-PI!r}, hi={PI!r}" for i in (1, 2, 3))
    return parse_space(text)


@pytest.fixture(scope="session")
def ishigami_fit_data(ishigami_space):
    """Sobol design, physical points and responses shared by slow fits."""
    design = doe.sobol_sequence(3, 440)
    physical = doe.scale(design, ishigami_space)
    y = models.ishigami(physical.points)
    standard = ishigami_space.to_standard(physical.points)
    return standard, y


def ishigami_analytic(a=7.0, b=0.1):
    """Closed-form mean, variance and Sobol indices of the Ishigami function."""
    pi4, pi8 = PI ** 4, PI ** 8
    mean = a / 2.0
    v1 = 0.5 * (1.0 + b * pi4 / 5.0) ** 2
    v2 = a ** 2 / 8.0
    v13 = b ** 2 * pi8 * (1.0 / 18.0 - 1.0 / 50.0)
    var = v1 + v2 + v13
    s1 = np.array([v1 / var, v2 / var, 0.0])
    st = np.array([(v1 + v13) / var, v2 / var, v13 / var])
    return mean, var, s1, st

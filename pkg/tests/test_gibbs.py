import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confspace import (
    Configuration,
    ConstantIntensity,
    EnergyValue,
    HardCore,
    PotentialModel,
    PreconditionError,
    RandomStream,
    SoftCore,
    Window,
    ZeroPotential,
    conditional_energy,
    local_energy,
    rho_gamma,
    stability_spotcheck,
)
from confspace.configuration import ConfigurationBatch
from confspace.gibbs import local_energy_batch, smooth_step

soft = PotentialModel(SoftCore(1.0, 0.3))
hard = PotentialModel(HardCore(0.1))


def test_energy_value_saturates():
    inf = EnergyValue.inf()
    assert not (inf + 3.0).is_finite
    assert not (2.0 + inf).is_finite
    assert inf.boltzmann() == 0.0
    assert EnergyValue(1.5) + EnergyValue(0.5) == EnergyValue(2.0)
    assert EnergyValue(1.0) < inf
    assert math.isinf(float(inf))


def test_smooth_step_endpoints_and_symmetry():
    u = np.linspace(0, 1, 11)
    s = smooth_step(u)
    assert s[0] == 1.0 and s[-1] == 0.0
    assert np.allclose(s + s[::-1], 1.0)
    assert np.all(np.diff(s) <= 0)


def test_softcore_profile():
    p = SoftCore(2.0, 0.4)
    assert p.scalar(0.1) == 2.0
    assert p.scalar(0.2) == 2.0
    assert p.scalar(0.4) == 0.0
    assert 0 < p.scalar(0.3) < 2.0
    assert p.range == 0.4
    assert p.stability_constant() == 0.0


def test_conditional_energy_of_close_pair():
    gamma = Configuration([0.4, 0.5])
    assert float(conditional_energy(soft, gamma, Window.unit(1))) == pytest.approx(1.0)
    # no pair meets a region away from both points
    assert float(conditional_energy(soft, gamma, Window((0.8,), (1.0,)))) == 0.0


def test_local_energy_and_papangelou_intensity():
    gamma = Configuration([0.4, 0.5])
    assert float(local_energy(soft, gamma, 0.45)) == pytest.approx(2.0)
    assert rho_gamma(ConstantIntensity(1.5), soft, gamma, 0.45) == pytest.approx(1.5 * math.exp(-2.0))
    with pytest.raises(PreconditionError):
        local_energy(soft, gamma, 0.4)


def test_hardcore_blocks_close_points():
    gamma = Configuration([0.2, 0.5])
    assert not local_energy(hard, gamma, 0.25).is_finite
    assert rho_gamma(ConstantIntensity(1.0), hard, gamma, 0.25) == 0.0
    assert float(local_energy(hard, gamma, 0.35)) == 0.0
    assert HardCore(0.3).max_points(Window.unit(1)) == 4


def test_zero_potential_is_poisson():
    m = PotentialModel(ZeroPotential())
    gamma = Configuration([0.1, 0.1000001])
    assert m.is_zero
    assert float(m.total_energy(gamma)) == 0.0
    assert rho_gamma(ConstantIntensity(2.0), m, gamma, 0.3) == 2.0


def test_local_energy_batch_matches_pointwise():
    configs = [Configuration([0.2, 0.5]), Configuration([0.45, 0.9])]
    batch = ConfigurationBatch.from_configurations(configs)
    xs = np.array([[0.3], [0.55], [0.48]])
    rows = np.array([0, 1, 0])
    values, blocked = local_energy_batch(soft, batch, rows, xs)
    expected = [float(local_energy(soft, configs[r], x)) for r, x in zip(rows, xs[:, 0])]
    assert np.allclose(values, expected)
    assert not blocked.any()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8, unique=True), st.floats(0.0, 1.0))
def test_total_energy_splits_into_local_energy(xs, x):
    if x in xs:
        return
    gamma = Configuration(xs)
    with_x = gamma.add_point(x)
    lhs = float(soft.total_energy(with_x))
    rhs = float(soft.total_energy(gamma)) + float(local_energy(soft, gamma, x))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_stability_spotcheck():
    report = stability_spotcheck(soft, 0.0, 200, RandomStream(1))
    assert report.passed
    attractive = PotentialModel(SoftCore(-1.0, 0.3))
    report = stability_spotcheck(attractive, 0.5, 200, RandomStream(1))
    assert report.violations > 0

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confspace import Bump, Configuration, ConfigurationBatch, PreconditionError, Window, WindowPolynomial, add_point, count, pair, remove_point

points_1d = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=0, max_size=12, unique=True)


def test_canonical_order_and_equality():
    a = Configuration([0.7, 0.1, 0.4])
    b = Configuration([0.4, 0.7, 0.1])
    assert a == b
    assert hash(a) == hash(b)
    assert a.points[:, 0].tolist() == [0.1, 0.4, 0.7]


def test_rejects_duplicates_and_nonfinite():
    with pytest.raises(PreconditionError):
        Configuration([0.2, 0.2])
    with pytest.raises(PreconditionError):
        Configuration([0.2, float("nan")])


def test_points_are_read_only():
    g = Configuration([0.1, 0.2])
    with pytest.raises(ValueError):
        g.points[0, 0] = 5.0


def test_add_and_remove():
    g = Configuration([0.1, 0.5])
    h = add_point(g, 0.3)
    assert len(h) == 3 and 0.3 in h
    assert remove_point(h, 0.3) == g
    with pytest.raises(PreconditionError):
        add_point(g, 0.5)
    with pytest.raises(PreconditionError):
        remove_point(g, 0.9)


def test_pair_and_count():
    g = Configuration([0.1, 0.5, 0.9])
    assert pair(g, WindowPolynomial(Window.unit(1), ((0.0, 0.0, 1.0),))) == pytest.approx(0.01 + 0.25 + 0.81)
    assert count(g, Window((0.0,), (0.6,))) == 2
    assert pair(Configuration(), Bump((0.5,), 0.3)) == 0.0


def test_two_dimensional_points():
    g = Configuration([[0.5, 0.1], [0.1, 0.9]], dim=2)
    assert g.points.tolist() == [[0.1, 0.9], [0.5, 0.1]]
    assert g.min_distance() == pytest.approx(math.hypot(0.4, 0.8))


def test_csv_round_trip(tmp_path):
    g = Configuration([[0.125, 0.5], [0.3, 1 / 3]], dim=2)
    path = tmp_path / "g.csv"
    g.to_csv(path)
    assert Configuration.from_csv(path, 2) == g
    assert Configuration.from_csv_text(g.to_csv(), 2) == g


@settings(max_examples=60, deadline=None)
@given(points_1d, points_1d)
def test_pair_is_additive_over_disjoint_unions(xs, ys):
    ys = [y for y in ys if y not in xs]
    phi = Bump((0.5,), 0.4)
    joint = Configuration(xs + ys)
    # fsum makes each side correctly rounded; the sum of two rounded parts can differ by an ulp
    assert pair(joint, phi) == pytest.approx(pair(Configuration(xs), phi) + pair(Configuration(ys), phi), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(points_1d)
def test_add_remove_round_trip(xs):
    g = Configuration(xs)
    x = 1.5
    assert remove_point(add_point(g, x), x) == g


def test_batch_matches_single_configurations():
    configs = [Configuration([0.2, 0.6]), Configuration(), Configuration([0.1, 0.3, 0.5])]
    batch = ConfigurationBatch.from_configurations(configs)
    assert batch.counts.tolist() == [2, 0, 3]
    assert [batch[i] for i in range(3)] == configs
    phi = Bump((0.4,), 0.3)
    assert np.allclose(batch.pair(phi), [pair(c, phi) for c in configs])
    assert batch.count(Window((0.0,), (0.35,))).tolist() == [1, 0, 2]
    sizes = [len(sub) for _, sub in batch.chunks(2)]
    assert sizes == [2, 1]

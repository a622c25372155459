import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evcharge.core import (
    ChargerSpec,
    EpochGrid,
    EpochProfile,
    EuclideanMetric,
    VehicleParams,
    charge_time,
    energy_for_distance,
    epoch_length_rule,
    line_metric,
)

FLEET = VehicleParams.from_fractions(35.8, 0.1, 0.8, drive_efficiency=0.2387, speed=50 / 60)


def test_energy_for_distance_examples():
    assert energy_for_distance(10, FLEET) == pytest.approx(2.387)
    assert energy_for_distance(0, FLEET) == 0.0
    p = VehicleParams(10, 1, 9, 0.2, 1.0)
    assert energy_for_distance(15, p) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        energy_for_distance(-1, p)


def test_charge_time_examples():
    assert charge_time(9.547, 40 / 60) == pytest.approx(14.3, abs=0.1)
    assert charge_time(0, 40 / 60) == 0.0
    assert charge_time(25.06, 50 / 60) == pytest.approx(30.07, abs=0.01)
    with pytest.raises(ValueError):
        charge_time(1.0, 0.0)
    with pytest.raises(ValueError):
        charge_time(-1.0, 1.0)


def test_epoch_length_rule_examples():
    assert epoch_length_rule(FLEET, 50 / 60) == pytest.approx(30.07, abs=0.01)
    assert epoch_length_rule(SimpleNamespace(e_min=5.0, e_max=5.0), 1.0) == 0.0
    assert epoch_length_rule(SimpleNamespace(e_min=2.4, e_max=24.0), 2 / 3) == pytest.approx(32.4)
    with pytest.raises(ValueError):
        epoch_length_rule(FLEET, 0)


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_energy_is_linear(a, b):
    assert energy_for_distance(a + b, FLEET) == pytest.approx(
        energy_for_distance(a, FLEET) + energy_for_distance(b, FLEET), rel=1e-12, abs=1e-12)


@given(st.floats(1e-3, 10), st.floats(0, 1e4))
def test_charge_time_inverts_rate(rate, t):
    assert charge_time(rate * t, rate) == pytest.approx(t, rel=1e-9, abs=1e-12)


def test_value_type_invariants():
    with pytest.raises(ValueError):
        VehicleParams(10, 5, 4, 0.2, 1)
    with pytest.raises(ValueError):
        VehicleParams(10, 1, 11, 0.2, 1)
    with pytest.raises(ValueError):
        VehicleParams(10, 1, 9, 0.0, 1)
    with pytest.raises(ValueError):
        ChargerSpec("c", (0, 0), 0.0)
    with pytest.raises(ValueError):
        EpochGrid(0, 0, 3)
    with pytest.raises(ValueError):
        EpochProfile((0.5, 1.2), (0, 0), (1, 1), 0.1)
    with pytest.raises(ValueError):
        EpochProfile((0.5,), (0, 0), (1, 1), 0.1)
    with pytest.raises(ValueError):
        EpochProfile((0.5,), (-1,), (1,), 0.1)


def test_epoch_grid_indexing():
    g = EpochGrid(390, 30, 31)
    assert g.horizon_end == 390 + 930
    assert g.epoch_start(1) == 390
    assert g.epoch_of(390) == 1
    assert g.epoch_of(419.99) == 1
    assert g.epoch_of(420) == 2
    assert g.epoch_of(389.9) is None
    assert g.epoch_of(g.horizon_end) is None


def test_metrics_agree_with_pointwise_values():
    m = EuclideanMetric(0.5)
    a, b = (0.0, 0.0), (3.0, 4.0)
    assert m.distance(a, b) == 5.0
    assert m.time(a, b) == 10.0
    pts = np.random.default_rng(0).uniform(-5, 5, (6, 2))
    tt, dd = m.matrices(pts[:3], pts[3:])
    for i in range(3):
        for j in range(3):
            assert dd[i, j] == pytest.approx(math.dist(pts[i], pts[3 + j]))
            assert tt[i, j] == pytest.approx(dd[i, j] / 0.5)


def test_line_metric():
    m = line_metric(11, 5.0, 6.0)
    assert m.distance(2, 10) == 40.0
    assert m.time(5, 3) == 12.0
    tt, dd = m.matrices([2, 5], [3, 10])
    assert dd.tolist() == [[5.0, 40.0], [10.0, 25.0]]
    assert tt[1, 1] == 30.0

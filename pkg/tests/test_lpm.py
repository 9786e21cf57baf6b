import csv
import math

import numpy as np
import pytest

from alelab.chain import ArmSpec, build_initial, symmetric_initial
from alelab.core import chord
from alelab.errors import BudgetError, DomainError
from alelab.lpm import (
    encode_driving,
    far_field_capacity,
    lpm_run,
    tip_ode_crosscheck,
    tip_velocity,
    weight_spread,
    write_trajectory_csv,
)


@pytest.fixture(scope="module")
def two_arm():
    return build_initial([ArmSpec(0.0, 0.5), ArmSpec(2.0, 0.25)], micro_capacity=1e-3)


def test_symmetric_exact_path():
    ic = symmetric_initial(3, 0.5, angle=0.1)
    tr = lpm_run(ic, 2.0, 1e-3, 0.5)
    assert tr.method == "exact-symmetric"
    gaps = np.diff(np.sort(np.mod(tr.angles - tr.angles[:, :1], 2 * np.pi), axis=1), axis=1)
    assert np.max(np.abs(gaps - 2 * np.pi / 3)) < 1e-10
    assert np.max(np.abs(tr.weights - 1 / 3)) == 0
    for i in (0, 250, 500):
        assert far_field_capacity(tr.chain_at(i)) == pytest.approx(ic.capacity + tr.times[i], abs=1e-7)
    # the growing tips stay zeros of Phi' and carry the recorded Phi''
    ch = tr.chain_at(500)
    ev = ch.evaluate_with_derivs(np.exp(1j * tr.angles[500]))
    assert np.max(np.abs(ev.first)) < 1e-10
    assert np.max(np.abs(ev.second - tr.second[500]) / np.abs(ev.second)) < 1e-10


def test_symmetric_splitting_breaks_symmetry_at_first_order():
    ic = symmetric_initial(3, 0.5)
    spreads = [weight_spread(lpm_run(ic, 2.0, dt, 0.1, exact_symmetric=False))[-1] for dt in (4e-3, 2e-3, 1e-3)]
    assert spreads[0] > 0
    assert 1.8 < spreads[0] / spreads[1] < 2.2 and 1.8 < spreads[1] / spreads[2] < 2.2


def test_self_convergence(two_arm):
    finals = [lpm_run(two_arm, 2.0, dt, 0.2).angles[-1] for dt in (1e-3, 5e-4, 2.5e-4)]
    d1 = np.max(chord(finals[0], finals[1]))
    d2 = np.max(chord(finals[1], finals[2]))
    assert 1.5 <= d1 / d2 <= 2.5


def test_tip_ode_crosscheck(two_arm):
    devs = [tip_ode_crosscheck(lpm_run(two_arm, 2.0, dt, 0.2)) for dt in (1e-3, 5e-4)]
    assert devs[0] < 1e-4
    assert 1.6 < devs[0] / devs[1] < 2.4


def test_tip_velocity_two_antipodal_arms():
    # opposite tips with equal weights do not move
    v = tip_velocity(np.array([0.0, math.pi]), np.array([0.5, 0.5]))
    assert np.max(np.abs(v)) < 1e-15
    v = tip_velocity(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    assert v[0] < 0 < v[1]  # tips repel


def test_far_field_capacity_general(two_arm):
    tr = lpm_run(two_arm, 2.0, 1e-3, 0.1)
    assert far_field_capacity(tr.chain) == pytest.approx(two_arm.capacity + 0.1, abs=1e-7)
    assert tr.event_counts[-1] == len(tr.chain)


def test_encode_driving(two_arm):
    tr = lpm_run(two_arm, 2.0, 1e-3, 0.1)
    m = encode_driving(tr)
    assert m.total_mass == pytest.approx(1.0, abs=1e-12)
    assert len(m) == 2 * 100
    m5 = encode_driving(tr, stride=5)
    assert m5.total_mass == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        encode_driving(tr, stride=3)


def test_argument_checks(two_arm):
    with pytest.raises(DomainError):
        lpm_run(two_arm, 2.0, 1e-8, 0.1)
    with pytest.raises(DomainError):
        lpm_run(two_arm, 2.0, 1e-3, 0.0)
    with pytest.raises(BudgetError):
        lpm_run(two_arm, 2.0, 1e-4, 1.0, max_events=100)
    with pytest.raises(DomainError):
        tip_ode_crosscheck(lpm_run(two_arm, 2.0, 1e-2, 0.05))


def test_trajectory_csv(tmp_path, two_arm):
    tr = lpm_run(two_arm, 2.0, 1e-2, 0.05)
    p = tmp_path / "lpm.csv"
    write_trajectory_csv(p, tr)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["t", "phi_0", "phi_1", "p_0", "p_1", "abs_second_deriv_0", "abs_second_deriv_1"]
    assert len(rows) == 1 + len(tr.times)

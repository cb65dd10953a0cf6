import itertools
import warnings

import numpy as np
import pytest

from mfrom import gappy, pod
from mfrom.gappy import GappyPOD, SensorArray, UnderdeterminedPlacementWarning
from mfrom.pod import PodBasis
from conftest import orthonormal


def _basis(modes):
    r = modes.shape[1]
    return PodBasis(modes, np.arange(r, 0, -1, dtype=float))


def test_sensor_array_validation():
    for bad in ([0, 0], [5], [-1], []):
        with pytest.raises(ValueError):
            SensorArray(np.array(bad), 5)
    a = SensorArray(np.array([1, 3]), 5, notes=("x",))
    assert a == SensorArray(np.array([1, 3]), 5)
    assert hash(a) == hash(SensorArray(np.array([1, 3]), 5))


def test_measure(rng):
    u = rng.standard_normal(6)
    np.testing.assert_array_equal(gappy.measure(SensorArray(np.arange(6), 6), u), u)
    assert gappy.measure(SensorArray(np.array([4]), 6), u).tolist() == [u[4]]
    perm = rng.permutation(6)[:4]
    C = np.eye(6)[perm]
    np.testing.assert_allclose(gappy.measure(SensorArray(perm, 6), u), C @ u)
    with pytest.raises(ValueError, match="dimension mismatch"):
        gappy.measure(SensorArray(perm, 6), np.ones(5))


def test_canonical_modes_pick_their_indices():
    modes = np.eye(7)[:, [2, 5, 6]]
    sensors = gappy.place_sensors(_basis(modes), 3)
    assert set(sensors.indices.tolist()) == {2, 5, 6}
    assert gappy.placement_condition(_basis(modes), sensors) == pytest.approx(1.0)


def test_qr_within_factor_of_exhaustive(rng):
    for _ in range(20):
        q = orthonormal(rng, 8, 2)
        b = _basis(q)
        states = q @ rng.standard_normal((2, 40)) + 0.1 * rng.standard_normal((8, 40))
        err = gappy.reconstruction_error(b, gappy.place_sensors(b, 2), states)
        best = min(gappy.reconstruction_error(b, SensorArray(np.array(c), 8), states)
                   for c in itertools.combinations(range(8), 2))
        assert err <= 1.5 * best


def test_oversampled_placement_distinct(rng):
    b = _basis(orthonormal(rng, 30, 3))
    s = gappy.place_sensors(b, 8)
    assert s.n_sensors == 8 and len(set(s.indices.tolist())) == 8
    qr_first = gappy.place_sensors(b, 3)
    np.testing.assert_array_equal(s.indices[:3], qr_first.indices)


def test_underdetermined_warns_and_notes(rng):
    b = _basis(orthonormal(rng, 10, 4))
    with pytest.warns(UnderdeterminedPlacementWarning):
        s = gappy.place_sensors(b, 2)
    assert s.notes and "underdetermined" in s.notes[0]


def test_placement_bounds(rng):
    b = _basis(orthonormal(rng, 4, 2))
    with pytest.raises(ValueError):
        gappy.place_sensors(b, 5)
    with pytest.raises(ValueError):
        gappy.place_sensors(b, 0)


def test_all_sensors_equals_projection(rng):
    q = orthonormal(rng, 12, 3)
    b = _basis(q)
    u = rng.standard_normal(12)
    s = SensorArray(np.arange(12), 12)
    np.testing.assert_allclose(gappy.gappy_coefficients(b, s, gappy.measure(s, u)), pod.project(b, u),
                               atol=1e-10)


def test_in_span_recovery(rng):
    q = orthonormal(rng, 15, 3)
    b = _basis(q)
    s = gappy.place_sensors(b, 5)
    np.testing.assert_allclose(gappy.gappy_coefficients(b, s, gappy.measure(s, q[:, 0])),
                               [1, 0, 0], atol=1e-8)
    a = rng.standard_normal(3)
    coeffs, full = gappy.gappy_reconstruct(b, s, gappy.measure(s, q @ a))
    np.testing.assert_allclose(coeffs, a, atol=1e-8)
    np.testing.assert_allclose(full, q @ a, atol=1e-8)


def test_normal_equations_oracle(rng):
    q = orthonormal(rng, 12, 3)
    b = _basis(q)
    s = SensorArray(rng.choice(12, 5, replace=False), 12)
    m = rng.standard_normal(5)
    cp = q[s.indices]
    oracle = np.linalg.solve(cp.T @ cp, cp.T @ m)
    np.testing.assert_allclose(gappy.gappy_coefficients(b, s, m), oracle, atol=1e-8)


def test_condition_degenerate_and_oracle(rng):
    modes = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [1.0, -1.0]]) / 2.0
    assert gappy.placement_condition(_basis(modes), SensorArray(np.array([0, 1]), 4)) == np.inf
    q = orthonormal(rng, 10, 3)
    s = SensorArray(np.array([0, 4, 7, 9]), 10)
    sv = np.linalg.svd(q[s.indices], compute_uv=False)
    assert gappy.placement_condition(_basis(q), s) == pytest.approx(sv[0] / sv[-1], rel=1e-10)


def test_qr_beats_random_on_average(rng):
    qr_err, rnd_err = [], []
    for _ in range(20):
        q = orthonormal(rng, 20, 3)
        b = _basis(q)
        states = q @ rng.standard_normal((3, 30)) + 0.1 * rng.standard_normal((20, 30))
        qr_err.append(gappy.reconstruction_error(b, gappy.place_sensors(b, 3), states))
        rnd_err.append(np.mean([gappy.reconstruction_error(b, SensorArray(rng.choice(20, 3, replace=False), 20),
                                                           states) for _ in range(50)]))
    assert np.mean(qr_err) < np.mean(rnd_err)


def _fields(rng, N=12, n=40, r=6):
    q = orthonormal(rng, n, r)
    return (q @ (rng.standard_normal((r, N)) * np.arange(r, 0, -1)[:, None])).T


def test_estimator_truncate_default(rng):
    X = _fields(rng)
    est = GappyPOD(n_sensors=3, rank=6).fit(X)
    assert est.basis_.rank == 3 and est.sensors_.n_sensors == 3
    readings = est.transform(X)
    assert readings.shape == (12, 3)
    assert est.predict(readings).shape == X.shape


def test_estimator_min_norm(rng):
    X = _fields(rng)
    est = GappyPOD(n_sensors=3, rank=6, underdetermined="min_norm").fit(X)
    assert est.basis_.rank == 6
    assert est.sensors_.notes


def test_estimator_exact_with_enough_sensors(rng):
    X = _fields(rng)
    est = GappyPOD(n_sensors=8, rank=6).fit(X)
    np.testing.assert_allclose(est.predict(est.transform(X)), X, atol=1e-8)


def test_estimator_fixed_sensors(rng):
    X = _fields(rng)
    s = SensorArray(np.array([1, 5, 9, 20, 30, 39]), 40)
    est = GappyPOD(rank=6, sensors=s).fit(X)
    assert est.sensors_ == s
    with pytest.raises(ValueError):
        GappyPOD(rank=6, sensors=SensorArray(np.array([1, 2]), 10)).fit(X)
    with pytest.raises(ValueError):
        GappyPOD(underdetermined="bogus").fit(X)

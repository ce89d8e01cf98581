import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relspin import lorentz
from relspin.errors import DomainError, UnderdeterminedError
from relspin.observable import SGConfig, sg_operator
from relspin.spinor import Spinor, expectation, from_rest_frame, normalized
from relspin.tomography import (
    BlochState,
    MeasurementRecord,
    dump_records,
    effective_direction,
    load_records,
    momentum_sensitivity_experiment,
    predict_mean,
    reconstruct,
    simulate_records,
)

from conftest import random_amplitude, random_config, random_unit3, random_velocity
from oracles import boost_matrix

REST = np.array([1.0, 0.0, 0.0, 0.0])
Z = np.array([0.0, 0.0, 0.0, 1.0])


def random_bloch(rng):
    return random_unit3(rng) * rng.uniform(0, 1) ** (1 / 3)


def rest_settings(directions, p=REST):
    return [(REST, np.concatenate([[0.0], d]), p) for d in directions]


def fast_momentum():
    beta = 0.9 * np.ones(3) / np.sqrt(3)
    return boost_matrix(beta) @ REST


def test_bloch_state_validation():
    BlochState([0, 0, 1])
    with pytest.raises(DomainError):
        BlochState([0, 0.8, 0.8])
    rho = BlochState([0.3, -0.2, 0.5]).density_matrix()
    assert np.trace(rho) == pytest.approx(1.0)
    np.testing.assert_allclose(rho, rho.conj().T)


def test_predict_mean_examples(rng):
    assert predict_mean(BlochState([0, 0, 1]), REST, Z, REST, 1.0) == pytest.approx(1.0)
    for _ in range(20):
        cfg = random_config(rng)
        p = random_velocity(rng)
        assert predict_mean(BlochState([0, 0, 0]), cfg.device_velocity, cfg.field_direction, p, 1.0) == 0.0


def test_predict_mean_matches_pure_state_expectation(rng):
    cfg = SGConfig.from_device_frame((1, 0, 0))
    p = np.array([1.25, 0.75, 0, 0])
    for _ in range(50):
        psi = normalized(from_rest_frame(random_amplitude(rng), p, 1.0))
        pred = predict_mean(BlochState.from_spinor(psi), cfg.device_velocity, cfg.field_direction, p, 1.0)
        assert pred == pytest.approx(expectation(psi, sg_operator(cfg, p, 1.0)), abs=1e-12)


def test_predict_mean_matches_expectation_generic(rng):
    for _ in range(200):
        cfg = random_config(rng)
        p = 1.2 * random_velocity(rng)
        psi = normalized(Spinor(random_amplitude(rng), p))
        pred = predict_mean(BlochState.from_spinor(psi), cfg.device_velocity, cfg.field_direction, p, 1.2)
        assert pred == pytest.approx(expectation(psi, sg_operator(cfg, p, 1.2)), abs=1e-10)


@given(st.integers(0, 2**31))
def test_predict_mean_bounded_and_linear(seed):
    r = np.random.default_rng(seed)
    cfg = random_config(r)
    p = random_velocity(r)
    a, b = random_bloch(r), random_bloch(r)
    w = r.uniform()
    args = (cfg.device_velocity, cfg.field_direction, p, 1.0)
    ma, mb = predict_mean(BlochState(a), *args), predict_mean(BlochState(b), *args)
    mix = predict_mean(BlochState(w * a + (1 - w) * b), *args)
    assert -1 <= ma <= 1
    assert mix == pytest.approx(w * ma + (1 - w) * mb, abs=1e-12)


def test_effective_direction_properties(rng):
    for _ in range(200):
        cfg = random_config(rng)
        p = random_velocity(rng)
        d = effective_direction(cfg.device_velocity, cfg.field_direction, p, 1.0)
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)
        comoving = effective_direction(cfg.device_velocity, cfg.field_direction, 2.0 * cfg.device_velocity, 2.0)
        np.testing.assert_allclose(comoving, cfg.device_frame_direction(), atol=1e-10)


def test_exact_recovery_orthogonal_settings():
    r = np.array([0.3, -0.2, 0.5])
    records = simulate_records(BlochState(r), rest_settings(np.eye(3)), 1.0)
    rec = reconstruct(records, 1.0)
    np.testing.assert_allclose(rec.vector, r, atol=1e-8)
    assert rec.rank == 3
    assert rec.residual <= 1e-12


def test_recovery_with_relativistic_records(rng):
    p = fast_momentum()
    for _ in range(200):
        r = random_bloch(rng)
        settings = [(REST, np.concatenate([[0.0], random_unit3(rng)]), p) for _ in range(4)]
        rec = reconstruct(simulate_records(BlochState(r), settings, 1.0), 1.0)
        np.testing.assert_allclose(rec.vector, r, atol=1e-8)


def test_coplanar_settings_are_rank_deficient():
    r = BlochState([0.1, 0.2, 0.3])
    directions = [[1, 0, 0], [0, 1, 0], [np.sqrt(0.5), np.sqrt(0.5), 0]]
    records = simulate_records(r, rest_settings(np.array(directions)), 1.0)
    with pytest.raises(UnderdeterminedError) as info:
        reconstruct(records, 1.0)
    assert info.value.rank == 2


def test_needs_three_records():
    records = simulate_records(BlochState([0, 0, 1]), rest_settings(np.eye(3)[:2]), 1.0)
    with pytest.raises(UnderdeterminedError):
        reconstruct(records, 1.0)


def test_unknown_momentum_is_refused():
    records = simulate_records(BlochState([0, 0, 1]), rest_settings(np.eye(3)), 1.0)
    records[1] = MeasurementRecord(REST, records[1].apparatus_direction, None, records[1].mean)
    with pytest.raises(DomainError):
        reconstruct(records, 1.0)


def test_wrong_frame_reconstruction_fails():
    r = np.array([0.3, -0.2, 0.5])
    records = simulate_records(BlochState(r), rest_settings(np.eye(3), fast_momentum()), 1.0)
    right = reconstruct(records, 1.0)
    wrong = reconstruct(records, 1.0, assume_rest_frame=True)
    np.testing.assert_allclose(right.vector, r, atol=1e-8)
    assert np.linalg.norm(wrong.vector - r) > 0.1


def test_shot_noise_is_seeded():
    r = BlochState([0.3, -0.2, 0.5])
    a = simulate_records(r, rest_settings(np.eye(3)), 1.0, shots=1000, seed=7)
    b = simulate_records(r, rest_settings(np.eye(3)), 1.0, shots=1000, seed=7)
    c = simulate_records(r, rest_settings(np.eye(3)), 1.0, shots=1000, seed=8)
    assert [x.mean for x in a] == [x.mean for x in b]
    assert [x.mean for x in a] != [x.mean for x in c]
    rec = reconstruct(a, 1.0)
    np.testing.assert_allclose(rec.vector, r.vector, atol=0.15)
    assert all(x.shots == 1000 for x in a)


def test_shot_noise_scales_like_binomial():
    r = BlochState([0.0, 0.0, 0.4])
    settings = rest_settings(np.tile(np.eye(3)[2], (2000, 1)))
    means = np.array([x.mean for x in simulate_records(r, settings, 1.0, shots=100, seed=1)])
    assert means.mean() == pytest.approx(0.4, abs=0.01)
    assert means.std() == pytest.approx(np.sqrt((1 - 0.16) / 100), rel=0.1)


def test_record_validation():
    with pytest.raises(DomainError):
        MeasurementRecord(REST, [0, 0, 0, 1], REST, 1.5)
    with pytest.raises(DomainError):
        MeasurementRecord(REST, [0, 0, 0, 1], REST, 0.5, shots=-1)
    with pytest.raises(DomainError):
        MeasurementRecord(REST, [0.5, 0, 0, 1], REST, 0.5)
    with pytest.raises(DomainError):
        MeasurementRecord(REST, [0, 0, 0, 1], [0, 1, 0, 0], 0.5)


def test_record_file_round_trip(tmp_path):
    records = simulate_records(BlochState([0.3, -0.2, 0.5]), rest_settings(np.eye(3), fast_momentum()), 1.0)
    records.append(MeasurementRecord(REST, Z, None, 0.25, 10))
    path = tmp_path / "records.jsonl"
    dump_records(records, path)
    lines = path.read_text().splitlines()
    assert set(json.loads(lines[0])) == {"v", "b_sg", "p", "mean", "shots"}
    assert json.loads(lines[-1])["p"] is None
    back = load_records(path)
    assert len(back) == len(records)
    for a, b in zip(records, back):
        np.testing.assert_array_equal(a.device_velocity, b.device_velocity)
        assert a.mean == b.mean
        assert (a.momentum is None) == (b.momentum is None)


def test_bad_record_file_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"v": [1,0,0,0], "b_sg": [0,0,0,1], "p": null, "mean": 0.1, "shots": 0}\n{"v": [1,0,0,0]}\n')
    with pytest.raises(DomainError, match="line 2"):
        load_records(path)


def test_sensitivity_zero_grid():
    rows = momentum_sensitivity_experiment(BlochState([0.3, 0.1, 0.5]), REST, [Z], [0.0, 0.0, 0.0])
    assert rows[0].spread == 0.0


def test_sensitivity_perpendicular_boosts():
    rows = momentum_sensitivity_experiment(BlochState([0, 0, 1]), REST, [Z], np.linspace(0, 2, 11), (1, 0, 0))
    assert rows[0].spread <= 1e-12


def test_sensitivity_tilted_field_is_monotone():
    b = np.array([0.0, np.sin(np.pi / 4), 0.0, np.cos(np.pi / 4)])
    rows = momentum_sensitivity_experiment(BlochState([0, 0, 1]), REST, [b], np.linspace(0, 2, 21), (1, 0, 0))
    row = rows[0]
    assert row.monotone
    assert row.spread > 0.2
    # boosting along x scales the z field by gamma in the particle frame
    gamma = np.cosh(row.rapidities)
    expected = gamma / np.sqrt(1 + gamma**2)
    np.testing.assert_allclose(row.means, expected, atol=1e-12)
    assert set(row.as_dict()) == {"b_sg", "rapidities", "means", "spread", "monotone"}


def test_sensitivity_rejects_zero_axis():
    with pytest.raises(DomainError):
        momentum_sensitivity_experiment(BlochState([0, 0, 1]), REST, [Z], [0.0], (0, 0, 0))

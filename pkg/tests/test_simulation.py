import json

import pytest

import tlcpy as tlc
from tlcpy import CLASS_PARAMS


@pytest.fixture(scope="module")
def pcc_code():
    return tlc.instantiate(tlc.unified_ensemble(CLASS_PARAMS["PCC"]), 64, seed=13)


def test_extremes(pcc_code):
    clean = tlc.simulate(pcc_code, 0.0, frames=3)
    assert clean.ber == clean.fer == 0.0
    assert clean.mean_iterations == 1.0

    lost = tlc.simulate(pcc_code, 1.0, frames=3)
    assert lost.ber == lost.fer == 1.0
    assert lost.residual_bits == 3 * 64
    assert lost.frame_errors == 3


def test_report(pcc_code):
    report = tlc.simulate(pcc_code, 0.5, frames=10, seed=3, max_iter=50)
    assert report.N == 64
    assert report.frames == 10
    assert report.code == "unified"
    assert report.max_iter == 50
    assert report.ber == report.residual_bits / (10 * 64)
    assert report.fer == report.frame_errors / 10
    assert report.wall_time >= 0

    record = report.as_record()
    assert "wall_time" not in record
    assert json.loads(report.to_json()) == record


def test_reproducible(pcc_code):
    a = tlc.simulate(pcc_code, 0.62, frames=8, seed=44)
    b = tlc.simulate(pcc_code, 0.62, frames=8, seed=44)
    assert a == b
    assert a.as_record() == b.as_record()


def test_jobs_do_not_change_the_result(pcc_code):
    serial = tlc.simulate(pcc_code, 0.6, frames=12, seed=5)
    parallel = tlc.simulate(pcc_code, 0.6, frames=12, seed=5, jobs=3)
    assert serial == parallel


def test_worker_settings(pcc_code, settings):
    settings.decode_max_iter = 2
    report = tlc.simulate(pcc_code, 0.6, frames=4, seed=5, jobs=2)
    assert report.max_iter == 2
    assert report.mean_iterations <= 2


def test_random_messages():
    code = tlc.instantiate(tlc.unified_ensemble(CLASS_PARAMS["SCC"]), 64, seed=17, encodable=True, attempts=64)
    report = tlc.simulate(code, 0.5, frames=6, seed=1, messages="random")
    assert report.messages == "random"
    assert 0.0 <= report.ber <= 1.0


def test_sweep_is_monotone(pcc_code):
    reports = tlc.simulate_sweep(pcc_code, [0.4, 0.55, 0.7, 0.85], frames=6, seed=9, max_iter=1000)
    residual = [r.residual_bits for r in reports]
    assert residual == sorted(residual)
    assert [r.epsilon for r in reports] == [0.4, 0.55, 0.7, 0.85]


def test_validation(pcc_code):
    with pytest.raises(ValueError, match="epsilon"):
        tlc.simulate(pcc_code, 1.5, frames=1)
    with pytest.raises(ValueError, match="frames must be positive"):
        tlc.simulate(pcc_code, 0.5, frames=0)
    with pytest.raises(TypeError, match="frames must be an integer"):
        tlc.simulate(pcc_code, 0.5, frames=2.5)
    with pytest.raises(ValueError, match="message mode"):
        tlc.simulate(pcc_code, 0.5, frames=1, messages="ones")
    with pytest.raises(ValueError, match="jobs must be positive"):
        tlc.simulate(pcc_code, 0.5, frames=1, jobs=0)


@pytest.mark.slow
def test_threshold_bracket():
    code = tlc.instantiate(tlc.unified_ensemble(CLASS_PARAMS["PCC"]), 10_000, seed=1)
    below, above = tlc.simulate_sweep(code, [0.60, 0.67], frames=200, seed=2, max_iter=1000)
    assert above.ber > 0.1
    assert below.ber * 100 <= above.ber

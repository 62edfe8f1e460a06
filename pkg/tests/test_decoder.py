import numpy as np
import pytest

import tlcpy as tlc
from tlcpy import CLASS_PARAMS
from tlcpy.transfer import ERASED
from .conftest import random_message


@pytest.fixture(scope="module")
def pcc_code():
    return tlc.instantiate(tlc.unified_ensemble(CLASS_PARAMS["PCC"]), 200, seed=8)


def receive(code, u, erased):
    return tlc.ErasureWord.from_bits(tlc.encode_code(code, u), erased)


def test_erasure_word():
    word = tlc.ErasureWord.from_bits([0, 1, 1, 0], [False, True, False, False])
    assert word.values.tolist() == [0, ERASED, 1, 0]
    assert len(word) == 4
    assert word.erased_count == 1

    with pytest.raises(ValueError, match="same length"):
        tlc.ErasureWord.from_bits([0, 1], [True])
    with pytest.raises(ValueError, match="0, 1 or 2"):
        tlc.ErasureWord([0, 3])


def test_noiseless(pcc_code):
    u = random_message(pcc_code)
    n = len(pcc_code.transmitted)
    result = tlc.bp_decode(pcc_code, receive(pcc_code, u, np.zeros(n, dtype=bool)))
    assert result.u.tolist() == u.tolist()
    assert result.erased == 0
    assert result.iterations == 1
    assert len(result.trace) == 1


def test_everything_erased(pcc_code):
    n = len(pcc_code.transmitted)
    result = tlc.bp_decode(pcc_code, tlc.ErasureWord(np.full(n, ERASED)))
    assert (result.u == ERASED).all()
    assert result.iterations == 1
    assert result.trace == ((1.0, 1.0),)


def test_low_erasure_rate(pcc_code):
    u = random_message(pcc_code, 2)
    erased = np.random.default_rng(3).random(len(pcc_code.transmitted)) < 0.1
    result = tlc.ErasureDecoder(pcc_code).decode(receive(pcc_code, u, erased))
    assert result.u.tolist() == u.tolist()
    fractions = [f for f, _ in result.trace]
    assert fractions == sorted(fractions, reverse=True)


@pytest.mark.parametrize("cls", tlc.CLASSES)
def test_never_wrong(cls):
    code = tlc.instantiate(tlc.unified_ensemble(CLASS_PARAMS[cls]), 100, seed=2, encodable=True, attempts=64)
    decoder = tlc.ErasureDecoder(code)
    rng = np.random.default_rng(4)
    for eps in (0.3, 0.6, 0.8):
        u = random_message(code, int(eps * 10))
        erased = rng.random(len(code.transmitted)) < eps
        result = decoder.decode(receive(code, u, erased), max_iter=500)
        known = result.u != ERASED
        assert (result.u[known] == u[known]).all()


def test_monotone_in_erasures(pcc_code):
    decoder = tlc.ErasureDecoder(pcc_code)
    u = np.zeros(len(pcc_code.info), dtype=np.uint8)
    draws = np.random.default_rng(6).random(len(pcc_code.transmitted))
    residual = [
        decoder.decode(receive(pcc_code, u, draws < eps), max_iter=1000).erased
        for eps in (0.5, 0.6, 0.7, 0.8)
    ]
    assert residual == sorted(residual)


def test_original_graph():
    code = tlc.instantiate(tlc.original_ensemble("HCC"), 100, seed=6)
    u = random_message(code)
    erased = np.random.default_rng(1).random(len(code.transmitted)) < 0.15
    result = tlc.bp_decode(code, receive(code, u, erased))
    assert result.u.tolist() == u.tolist()


def test_inconsistent_word(pcc_code):
    values = tlc.encode_code(pcc_code, np.zeros(len(pcc_code.info), dtype=np.uint8))
    values[0] = 1
    with pytest.raises(tlc.InconsistencyError):
        tlc.bp_decode(pcc_code, tlc.ErasureWord(values))


def test_validation(pcc_code):
    with pytest.raises(ValueError, match="expected"):
        tlc.bp_decode(pcc_code, tlc.ErasureWord([0, 1]))
    n = len(pcc_code.transmitted)
    with pytest.raises(ValueError, match="max_iter must be positive"):
        tlc.bp_decode(pcc_code, tlc.ErasureWord(np.zeros(n)), max_iter=0)


def test_max_iter_setting(pcc_code, settings):
    settings.decode_max_iter = 1
    erased = np.random.default_rng(3).random(len(pcc_code.transmitted)) < 0.5
    result = tlc.bp_decode(pcc_code, receive(pcc_code, random_message(pcc_code), erased))
    assert result.iterations == 1


@pytest.mark.slow
def test_follows_density_evolution():
    params = CLASS_PARAMS["PCC"]
    code = tlc.instantiate(tlc.unified_ensemble(params), 100_000, seed=12)
    n = len(code.transmitted)
    erased = np.random.default_rng(9).random(n) < 0.6
    result = tlc.bp_decode(code, tlc.ErasureWord.from_bits(np.zeros(n, dtype=np.uint8), erased), max_iter=20)
    de = tlc.de_run(params, 0.6, max_iter=20, tol=1e-300)
    assert len(result.trace) >= 5
    for (inputs, outputs), state in zip(result.trace, de.trace):
        assert inputs == pytest.approx(state.x1, abs=0.02)
        assert outputs == pytest.approx(state.x2, abs=0.02)

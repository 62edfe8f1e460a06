import numpy as np
import pytest

import tlcpy as tlc
from tlcpy import CLASS_PARAMS


def test_de_step_formula(mocker):
    transfer = mocker.Mock(return_value=(0.5, 0.25))
    state = tlc.DEState(x1=0.5, x2=0.8, iteration=3)
    new = tlc.de_step(CLASS_PARAMS["SCC"], 0.4, state, transfer)
    (y1, y2), _ = transfer.call_args
    assert y1 == pytest.approx((2 * 0.4 * 0.5 + 0.4 * 0.8) / 3)
    assert y2 == pytest.approx((0.4 * 0.5 + 2 * 0.4) / 3)
    assert (new.x1, new.x2, new.iteration) == (0.5, 0.25, 4)
    assert new.p_a == pytest.approx(0.4 * 0.25)


def test_de_step_punctured(mocker):
    transfer = mocker.Mock(return_value=(1.0, 1.0))
    params = tlc.UnifiedParams(l=4, l1=2, l2=2, rho1=0.5, rho2=0.25)
    tlc.de_step(params, 0.2, tlc.DEState(), transfer)
    (y1, y2), _ = transfer.call_args
    ch1 = 0.5 * 0.2 + 0.5
    ch2 = 0.25 * 0.2 + 0.75
    assert y1 == pytest.approx((2 * 0.2 + 2 * ch2) / 4)
    assert y2 == pytest.approx((2 * ch2 + 2 * ch1) / 4)


def test_de_state_validation():
    with pytest.raises(ValueError, match="x1 must be between 0 and 1"):
        tlc.DEState(x1=1.5)
    with pytest.raises(ValueError, match="epsilon"):
        tlc.ChannelParam(-0.1)
    assert float(tlc.ChannelParam(0.25)) == 0.25


def test_de_run():
    run = tlc.de_run(CLASS_PARAMS["PCC"], 0.0)
    assert run.converged
    assert run.final.iteration <= 2
    assert run.final.p_a == 0.0
    assert run.final.x1 == 0.0

    good = tlc.de_run(CLASS_PARAMS["PCC"], tlc.ChannelParam(0.4))
    assert good.converged
    assert good.final.p_a < 1e-10
    assert [s.iteration for s in good.trace] == list(range(1, good.final.iteration + 1))
    x1 = [s.x1 for s in good.trace]
    assert x1 == sorted(x1, reverse=True)

    bad = tlc.de_run(CLASS_PARAMS["PCC"], 0.8)
    assert not bad.converged
    assert bad.final.p_a > 0.1

    with pytest.raises(ValueError, match="tol must be positive"):
        tlc.de_run(CLASS_PARAMS["PCC"], 0.5, tol=0)
    with pytest.raises(ValueError, match="max_iter must be positive"):
        tlc.de_run(CLASS_PARAMS["PCC"], 0.5, max_iter=0)


@pytest.mark.parametrize("cls", tlc.CLASSES)
def test_graph_de_matches_unified(cls):
    params = CLASS_PARAMS[cls]
    unified = tlc.de_run(params, 0.55, max_iter=8, tol=1e-300)
    graph = tlc.graph_de_run(tlc.unified_ensemble(params), 0.55, max_iter=8, tol=1e-300, trace=True)
    assert graph.iterations == unified.final.iteration == 8
    assert graph.p_a == pytest.approx(unified.final.p_a, rel=1e-9, abs=1e-15)
    assert len(graph.trace) == 8
    assert graph.erasures.shape == (len(tlc.unified_ensemble(params).edges),)

    edges = tlc.unified_ensemble(params).edges
    on_input = np.array([e.side == "input" for e in edges])
    for state, messages in zip(unified.trace, graph.trace):
        assert messages[on_input] == pytest.approx(np.full(on_input.sum(), state.x1), abs=1e-10)
        assert messages[~on_input] == pytest.approx(np.full((~on_input).sum(), state.x2), abs=1e-10)


@pytest.mark.parametrize("cls", ["PCC", "HCC"])
def test_de_monotone_in_epsilon(cls):
    grid = np.linspace(0.0, 1.0, 21)
    runs = [tlc.de_run(CLASS_PARAMS[cls], eps, max_iter=30, tol=1e-300) for eps in grid]
    for i in range(30):
        # A run that stopped early sits at its fixed point.
        states = [r.trace[min(i, len(r.trace) - 1)] for r in runs]
        assert np.all(np.diff([s.x1 for s in states]) >= -1e-10)
        assert np.all(np.diff([s.p_a for s in states]) >= -1e-10)


def test_graph_de_transfers(mocker):
    graph = tlc.original_ensemble("PCC")
    stub = mocker.Mock()
    stub.extrinsic.return_value = np.zeros(2)
    run = tlc.graph_de_run(graph, 0.9, transfers={"TL": stub})
    assert stub.extrinsic.called
    assert run.converged


def test_converges_everywhere():
    result = tlc.bp_threshold(CLASS_PARAMS["PCC"], transfer=lambda y1, y2: (0.0, 0.0))
    assert result.threshold == 1.0
    assert result.flag == "converges-everywhere"


def test_threshold_result_validation():
    with pytest.raises(ValueError, match="inside its bracket"):
        tlc.ThresholdResult(0.7, 0.5, 0.6, 0.2, 1)
    with pytest.raises(ValueError, match="wider than the tolerance"):
        tlc.ThresholdResult(0.55, 0.5, 0.6, 0.01, 1)
    record = tlc.ThresholdResult(0.55, 0.5, 0.6, 0.1, 4, method="map").as_record()
    assert record == {
        "threshold": 0.55, "lo": 0.5, "hi": 0.6, "tolerance": 0.1,
        "iterations": 4, "method": "map", "flag": "",
    }


def test_map_grid_validation():
    with pytest.raises(ValueError, match="at most 1e-3"):
        tlc.map_threshold(CLASS_PARAMS["PCC"], grid=0.01)
    with pytest.raises(ValueError, match="at most 1e-3"):
        tlc.exit_curve(CLASS_PARAMS["PCC"], grid=0)


def test_coarse_bp_threshold(settings):
    settings.bp_tol = 1e-2
    result = tlc.bp_threshold(CLASS_PARAMS["PCC"])
    assert result.hi - result.lo <= 1e-2
    assert result.lo <= 0.6428 + 1e-4 and 0.6428 - 1e-4 <= result.hi
    assert result.method == "bp"


@pytest.mark.slow
@pytest.mark.parametrize("cls, expected", [("PCC", 0.6428), ("SCC", 0.6863), ("BCC", 0.5603), ("HCC", 0.6997)])
def test_unified_bp_thresholds(cls, expected):
    result = tlc.bp_threshold(CLASS_PARAMS[cls])
    assert result.threshold == pytest.approx(expected, abs=1e-3)
    assert result.hi - result.lo <= 1e-5 * (1 + 1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("cls, expected", [("PCC", 0.6428), ("SCC", 0.6895), ("BCC", 0.5541), ("HCC", 0.7261)])
def test_original_bp_thresholds(cls, expected):
    result = tlc.graph_bp_threshold(tlc.original_ensemble(cls))
    assert result.threshold == pytest.approx(expected, abs=2e-3)


@pytest.mark.slow
@pytest.mark.parametrize("cls, expected", [("PCC", 0.6553), ("HCC", 0.7954)])
def test_original_map_thresholds(cls, expected):
    result = tlc.graph_map_threshold(tlc.original_ensemble(cls))
    assert result.threshold == pytest.approx(expected, abs=2e-3)


@pytest.mark.slow
@pytest.mark.parametrize("cls, expected", [("PCC", 0.6552), ("SCC", 0.7482), ("BCC", 0.6646), ("HCC", 0.7994)])
def test_unified_map_thresholds(cls, expected):
    result = tlc.map_threshold(CLASS_PARAMS[cls])
    assert result.threshold == pytest.approx(expected, abs=2e-3)
    assert result.method == "map"
    bp = tlc.bp_threshold(CLASS_PARAMS[cls])
    assert result.threshold >= bp.threshold - 1e-4


@pytest.mark.slow
def test_self_concatenated_bcc_threshold():
    unified = tlc.bp_threshold(CLASS_PARAMS["BCC"])
    graph = tlc.graph_bp_threshold(tlc.unified_ensemble(CLASS_PARAMS["BCC"]))
    assert graph.threshold == pytest.approx(unified.threshold, abs=1e-4)


@pytest.mark.slow
def test_rate2_bcc_matches_original():
    original = tlc.graph_bp_threshold(tlc.original_ensemble("BCC"))
    rate2 = tlc.graph_bp_threshold(tlc.self_concatenated_ensemble("BCC"))
    assert rate2.threshold == pytest.approx(original.threshold, abs=1e-4)


@pytest.mark.slow
def test_exit_curve():
    points = tlc.exit_curve(CLASS_PARAMS["PCC"])
    assert len(points) == 1001
    eps = [e for e, _ in points]
    assert eps == sorted(eps)
    assert points[-1] == (1.0, pytest.approx(1.0))
    assert points[0] == (0.0, 0.0)
    h = [v for _, v in points]
    assert h == sorted(h)
    graph_points = tlc.graph_exit_curve(tlc.unified_ensemble(CLASS_PARAMS["PCC"]))
    assert np.allclose(np.array(points), np.array(graph_points), atol=1e-8)


@pytest.mark.slow
def test_rate_compatible_thresholds_decrease():
    graphs = tlc.rate_compatible_family(CLASS_PARAMS["HCC"], [(1.0, 1.0), (0.5, 1.0), (0.5, 0.5)])
    thresholds = [tlc.graph_bp_threshold(g).threshold for g in graphs]
    rates = [float(g.rate) for g in graphs]
    assert rates == sorted(rates)
    assert thresholds == sorted(thresholds, reverse=True)
    assert all(t < 1 - r for t, r in zip(thresholds, rates))

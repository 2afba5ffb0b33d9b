import numpy as np
import pytest

from conftest import cycle4, path3
from isingvi import (DomainError, bp_iterate, mf_iterate, model_hash,
                     trace_from_csv, trace_meta, trace_to_csv)
from isingvi.svgplot import plot_lines


def test_round_trip_mf():
    model = path3(0.5, 0.2)
    _x, trace = mf_iterate(model, max_steps=40, tol=0.0)
    meta = trace_meta(model, "mf", "ones", 0.0)
    text = trace_to_csv(trace, meta)
    back, meta2 = trace_from_csv(text)
    assert back.algo == "mf"
    assert np.array_equal(back.t, trace.t)
    assert np.array_equal(back.objective, trace.objective)
    assert np.array_equal(back.grad_l1, trace.grad_l1)
    assert back.converged == trace.converged
    assert meta2["model_hash"] == model_hash(model)
    assert int(meta2["n"]) == 3 and int(meta2["m"]) == 2


def test_round_trip_bp_handles_nan():
    model = cycle4(0.5, 0.2)
    _nu, trace = bp_iterate(model, max_steps=30, tol=0.0, record=False)
    text = trace_to_csv(trace, trace_meta(model, "bp", "ones", 0.0))
    back, _meta = trace_from_csv(text)
    assert np.isnan(back.objective[1:]).all()
    assert np.array_equal(back.step_inf[1:], trace.step_inf[1:])


def test_from_csv_rejects_garbage():
    with pytest.raises(DomainError):
        trace_from_csv("")
    with pytest.raises(DomainError):
        trace_from_csv("# algo mf\n")
    with pytest.raises(DomainError):
        trace_from_csv("t,objective\n0,1.0,2.0\n")


def test_plot_lines_deterministic():
    xs = list(range(1, 20))
    ys = [1.0 / x for x in xs]
    a = plot_lines([("residual", xs, ys)], title="decay", xlabel="t",
                   ylabel="r", xlog=True, ylog=True)
    b = plot_lines([("residual", xs, ys)], title="decay", xlabel="t",
                   ylabel="r", xlog=True, ylog=True)
    assert a == b
    assert a.startswith("<svg")
    assert "polyline" in a and "decay" in a


def test_plot_lines_drops_bad_points():
    xs = [0, 1, 2, 3]
    ys = [0.0, float("nan"), 4.0, 8.0]
    svg = plot_lines([("s", xs, ys)], ylog=True, xlog=True)
    assert svg.startswith("<svg")
    empty = plot_lines([("s", [0], [0.0])], ylog=True)
    assert empty.startswith("<svg")

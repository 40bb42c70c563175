import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vacts_kit.trajectory import evaluate, evaluate_vector, quintic


def test_resize_segment_midpoint():
    seg = quintic(1.4, 1.0, 4.0)
    s, sd, _ = evaluate(seg, 2.0)
    assert abs(s - 1.2) < 1e-12
    assert abs(sd + 0.1875) < 1e-12


def test_boundary_conditions_exact():
    seg = quintic(1.4, 1.0, 4.0)
    assert evaluate(seg, 0.0) == (1.4, 0.0, 0.0)
    assert evaluate(seg, 4.0) == (1.0, 0.0, 0.0)


def test_peak_rate():
    seg = quintic(1.4, 1.0, 4.0)
    assert abs(seg.peak_rate - 0.1875) < 1e-15
    t = np.linspace(0.0, 4.0, 4001)
    assert abs(max(abs(evaluate(seg, x)[1]) for x in t) - 0.1875) < 1e-9


def test_clamped_outside_duration():
    seg = quintic(0.0, 1.0, 2.0)
    assert evaluate(seg, -1.0) == evaluate(seg, 0.0)
    assert evaluate(seg, 5.0) == (1.0, 0.0, 0.0)


@pytest.mark.parametrize("T", [0.0, -1.0, float("nan")])
def test_non_positive_duration(T):
    with pytest.raises(ValueError):
        quintic(0.0, 1.0, T)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 20.0), st.floats(0.0, 1.0))
def test_derivatives_consistent(s0, s1, T, frac):
    seg = quintic(s0, s1, T)
    t = frac * T
    h = 1e-6 * T
    if t - h < 0 or t + h > T:
        return
    s_minus, sd_minus, _ = evaluate(seg, t - h)
    s_plus, sd_plus, _ = evaluate(seg, t + h)
    _, sd, sdd = evaluate(seg, t)
    scale = max(1.0, abs(s1 - s0))
    assert abs((s_plus - s_minus) / (2 * h) - sd) < 1e-5 * scale / min(T, 1.0)
    assert abs((sd_plus - sd_minus) / (2 * h) - sdd) < 1e-4 * scale / min(T, 1.0) ** 2


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 20.0))
def test_monotone_between_endpoints(s0, s1, T):
    seg = quintic(s0, s1, T)
    vals = [evaluate(seg, t)[0] for t in np.linspace(0, T, 101)]
    lo, hi = min(s0, s1), max(s0, s1)
    assert all(lo - 1e-12 <= v <= hi + 1e-12 for v in vals)
    assert abs(evaluate(seg, T / 2)[0] - 0.5 * (s0 + s1)) < 1e-9 * max(1.0, abs(s0) + abs(s1))


def test_vector_evaluation():
    segs = [quintic(1.4, 1.0, 4.0), quintic(0.0, 2.0, 4.0)]
    out = evaluate_vector(segs, 2.0)
    assert out.shape == (2, 3)
    assert np.allclose(out[:, 0], [1.2, 1.0])

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annealbench.anneal import (
    EstimateUnavailable,
    NoCrossingError,
    Protocol,
    SingularProtocolError,
    anneal_evolve,
    critical_field_estimate,
    crossing_time,
    fidelity_scaling,
    final_fidelity,
    full_gap_dwell_times,
    full_gap_protocol,
    half_crossing,
    linear_protocol,
    quadratic_coefficients,
    quadratic_protocol,
    save_result,
)
from annealbench.quench import DQPCurve
from annealbench.spectrum import critical_field, default_grid, gap_profile
from annealbench.spin_core import dense_hamiltonian


def test_quadratic_midpoint_values():
    p = quadratic_protocol(1.0, 0.5)
    np.testing.assert_allclose(p.field_at([0.0, 0.25, 0.5, 0.75, 1.0]), [1.0, 0.625, 0.5, 0.375, 0.0], atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(h_c=st.floats(0.02, 0.98), T=st.floats(0.1, 50))
def test_quadratic_is_continuous_and_flat_at_crossover(h_c, T):
    co = quadratic_coefficients(h_c, T)
    t_c = co["t_c"]
    assert t_c == pytest.approx((1 - h_c) * T)
    early = lambda t: 1 + co["b1"] * t + co["c1"] * t * t
    late = lambda t: co["a2"] + co["b2"] * t + co["c2"] * t * t
    assert early(t_c) == pytest.approx(h_c, abs=1e-9)
    assert late(t_c) == pytest.approx(h_c, abs=1e-9)
    assert late(T) == pytest.approx(0.0, abs=1e-9)
    assert co["b1"] + 2 * co["c1"] * t_c == pytest.approx(0.0, abs=1e-9)
    assert co["b2"] + 2 * co["c2"] * t_c == pytest.approx(0.0, abs=1e-9 * max(1.0, abs(co["b2"])))
    p = quadratic_protocol(T, h_c)
    assert np.all(np.diff(p.fields) <= 1e-15)


def test_dwell_times_follow_inverse_gap():
    np.testing.assert_allclose(full_gap_dwell_times([1.0, 2.0], 1.0, 1.0), [2 / 3, 1 / 3])
    np.testing.assert_allclose(full_gap_dwell_times([0.3, 0.1, 0.7], 0.0, 3.0), [1, 1, 1])


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0, 15), T=st.floats(0.1, 100))
def test_dwell_times_sum_to_total(alpha, T):
    gaps = np.linspace(0.05, 2.0, 17)
    d = full_gap_dwell_times(gaps, alpha, T)
    assert d.sum() == pytest.approx(T, rel=1e-12)
    assert np.all(np.diff(d) <= 0)


def test_zero_gap_rejected():
    with pytest.raises(SingularProtocolError):
        full_gap_dwell_times([0.1, 0.0], 1.0, 1.0)


def test_protocol_validation():
    with pytest.raises(ValueError):
        Protocol([0, 1], [1, 0], "x")
    with pytest.raises(ValueError):
        Protocol([0, 0.5, 1], [1, 0.6, 0.1], "x")
    with pytest.raises(ValueError):
        Protocol([0, 0.5, 1], [1, 0.2, 0.3], "x")
    with pytest.raises(ValueError):
        Protocol([0, 0.6, 0.5, 1], [1, 0.6, 0.4, 0], "x")
    with pytest.raises(ValueError):
        quadratic_coefficients(1.0, 1.0)


def test_alpha_zero_equals_linear(inst5):
    prof = gap_profile(inst5, default_grid(33))
    a = final_fidelity(inst5, full_gap_protocol(prof, 0.0, 2.0))
    b = final_fidelity(inst5, linear_protocol(2.0))
    assert a == pytest.approx(b, abs=1e-10)


def test_sudden_limit(inst5):
    # no time to evolve: overlap of the uniform state with one basis state
    f = final_fidelity(inst5, linear_protocol(1e-9))
    assert f == pytest.approx(2 ** (-inst5.n_spins / 2), abs=1e-6)


def test_slow_anneal_is_adiabatic(inst5):
    assert final_fidelity(inst5, linear_protocol(400.0), dt=0.05) > 0.99


def test_fidelity_trace(inst5):
    res = anneal_evolve(inst5, quadratic_protocol(3.0, 0.6), samples=17)
    assert res.times.size == 17 and res.fidelity[0] == pytest.approx(1.0)
    assert np.all((res.fidelity >= 0) & (res.fidelity <= 1))
    assert res.norm_drift < 1e-9
    assert res.fields[0] == 1.0 and res.fields[-1] == 0.0


def test_finer_steps_converge(inst5):
    a = final_fidelity(inst5, linear_protocol(2.0), dt=0.005)
    b = final_fidelity(inst5, linear_protocol(2.0), dt=0.0025)
    assert abs(a - b) < 1e-5


def test_half_crossing_picks_largest_field():
    h = [0.0, 0.25, 0.5, 0.75, 1.0]
    assert half_crossing(h, [1.0, 0.2, 0.8, 0.2, 0.0]) == pytest.approx(0.625)
    with pytest.raises(EstimateUnavailable):
        half_crossing(h, [0.9] * 5)


def test_estimates_use_stationary_anchor():
    x = DQPCurve("X", np.array([0.0, 0.5, 0.9]), np.array([0.0, 0.1, 0.3]))
    # only the appended X(1) = 1 lets the curve reach 0.5
    assert critical_field_estimate("X", x).value == pytest.approx(0.9 + 0.1 * 0.2 / 0.7)
    g = DQPCurve("G", np.array([0.5, 1.0]), np.array([0.0, 0.0]))
    assert critical_field_estimate("G", g).value == pytest.approx(0.25)
    assert critical_field_estimate("constant").value == 0.5


def test_gap_estimate(inst5):
    prof = gap_profile(inst5, default_grid(33))
    assert critical_field_estimate("gap", prof).value == critical_field(prof).h_c_delta


def test_crossing_time_on_known_curve():
    T = np.array([1.0, 2.0, 4.0, 8.0])
    F = np.array([0.2, 0.5, 0.8, 0.95])
    t = crossing_time(T, F, 0.9)
    assert 4.0 < t < 8.0
    assert crossing_time(T, F, 0.8) == pytest.approx(4.0)
    with pytest.raises(NoCrossingError):
        crossing_time(T, F, 0.99)


def test_scaling_fit_recovers_line():
    T = np.linspace(1, 40, 80)
    table = {n: (T, np.clip((T - 0.0) / (3.0 * n), 0, 1)) for n in (4, 5, 6)}
    fit = fidelity_scaling(table, 0.9)
    assert fit.slope == pytest.approx(2.7, rel=1e-3)
    assert fit.intercept == pytest.approx(0.0, abs=1e-2)


def test_result_files(tmp_path, inst5):
    import json

    res = anneal_evolve(inst5, linear_protocol(1.0), samples=5)
    path = save_result(res, tmp_path / "r.csv")
    assert path.read_text().splitlines()[0] == "t,h,fidelity"
    meta = json.loads(path.with_suffix(".json").read_text())
    assert set(meta) == {"protocol", "parameters", "T", "dt", "seed", "final_fidelity"}

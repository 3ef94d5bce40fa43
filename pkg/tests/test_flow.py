import math

import numpy as np
import pytest

from yamabe_lab import (
    BackgroundSpec,
    ConfigError,
    ConformalState,
    FlowConfig,
    FlowTrace,
    PositivityError,
    PreconditionError,
    StiffnessError,
    build_background,
    curvature_evolution_residual,
    flow_step,
    run_flow,
    solve_yamabe,
)
from yamabe_lab import flow as flowmod


@pytest.fixture(scope="module")
def const_bg():
    return build_background(BackgroundSpec(kind="synthetic", N=4, r0=-6.0))


@pytest.mark.parametrize("kw", [
    dict(mode="sideways"), dict(t_end=0.0), dict(t_end=-1.0), dict(cfl=0.0), dict(cfl=1.5),
    dict(sample_dt=0.0), dict(convergence_tol=0.0), dict(dt=-1e-3),
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        FlowConfig(**kw)


def test_config_parses_operator_strings():
    cfg = FlowConfig(tracked_ops=("schrodinger(a=0.5)/closed",))
    assert cfg.tracked_ops[0].a == 0.5


def test_stationary_step(const_bg):
    s = ConformalState(const_bg, np.ones(const_bg.num_vertices))
    s2 = flow_step(const_bg, s, 0.01, "normalized")
    np.testing.assert_allclose(s2.u, 1.0, atol=1e-15)
    assert s2.t == pytest.approx(0.01)


@pytest.mark.parametrize("r", [-6.0, 6.0])
def test_unnormalized_step_follows_scalar_ode(r):
    bg = build_background(BackgroundSpec(kind="synthetic", N=3, r0=r))
    s = ConformalState(bg, np.ones(bg.num_vertices))
    dt = 1e-3
    s2 = flow_step(bg, s, dt, "unnormalized")
    exact = r / (1 - r * dt)
    np.testing.assert_allclose(s2.R, exact, rtol=1e-11)


def test_positivity_abort_leaves_state_untouched():
    bg = build_background(BackgroundSpec(kind="synthetic", N=4, r0=-6.0, r0_bump_amplitude=2.0))
    u = np.ones(bg.num_vertices)
    u[0] = 1e-3
    s = ConformalState(bg, u)
    with pytest.raises(PositivityError):
        flow_step(bg, s, 10.0, "normalized")
    assert s.u[0] == 1e-3 and s.t == 0.0


def test_bad_step_arguments(const_bg):
    s = ConformalState(const_bg, 1.0)
    with pytest.raises(ConfigError):
        flow_step(const_bg, s, 0.0)
    with pytest.raises(ConfigError):
        flow_step(const_bg, s, 0.1, "fast")


def test_constant_run_converges_at_start(const_bg):
    final, tr = run_flow(const_bg, 1.0, FlowConfig(t_end=1.0))
    assert tr.status == "converged" and tr.t_converged == 0.0
    assert tr.Rbar == [pytest.approx(-6.0)]
    assert final.t == 0.0


def test_negative_run_properties(negative_run):
    final, tr = negative_run
    assert tr.status == "converged"
    assert np.max(np.abs(final.R - final.Rbar)) < 1e-7
    t = np.asarray(tr.t)
    assert np.all(np.diff(t) > 0)
    # samples sit on the sampling grid except the convergence sample
    np.testing.assert_allclose(t[:-1] / 0.05, np.round(t[:-1] / 0.05), atol=1e-9)
    rb = np.asarray(tr.Rbar)
    assert np.all(np.diff(rb) <= 1e-8 * np.abs(rb[1:]))
    vol = np.asarray(tr.volume)
    assert np.max(np.abs(vol - vol[0])) / vol[0] <= 1e-6 * max(1.0, t[-1])
    assert np.all(np.asarray(tr.Iplus) >= np.asarray(tr.Iminus))
    assert len(tr.states) == len(tr)


def test_unnormalized_run_matches_scalar_ode():
    r = 6.0
    bg = build_background(BackgroundSpec(kind="synthetic", N=3, r0=r))
    t_end = 0.1 / r
    _, tr = run_flow(bg, 1.0, FlowConfig(mode="unnormalized", t_end=t_end, sample_dt=t_end / 4))
    t = np.asarray(tr.t)
    np.testing.assert_allclose(tr.maxR, r / (1 - r * t), rtol=1e-6)
    assert tr.status == "t_end_reached" and t[-1] == pytest.approx(t_end)


def test_stiffness_error_carries_trace(monkeypatch, const_bg):
    bg = build_background(BackgroundSpec(kind="synthetic", N=3, r0=-6.0, r0_bump_amplitude=1.0))
    monkeypatch.setattr(flowmod, "_rk4", lambda bg, u, dt, mode: (u.copy(), 1))
    with pytest.raises(StiffnessError) as info:
        run_flow(bg, 1.0, FlowConfig(t_end=1.0))
    assert info.value.trace.status == "aborted_positivity"
    assert len(info.value.trace) == 1


def test_trace_csv_round_trip(negative_run):
    _, tr = negative_run
    text = tr.to_csv()
    header = text.splitlines()[0].split(",")
    assert header == ["t", "lambda[laplacian/closed]", "gap[laplacian/closed]", "minR", "maxR",
                      "Rbar", "volume", "diameter", "Iplus", "Iminus"]
    back = FlowTrace.from_csv(text)
    for col in tr.columns:
        np.testing.assert_array_equal(back.column(col), tr.column(col))
    assert back.to_csv() == text


def test_trace_csv_file(tmp_path, negative_run):
    _, tr = negative_run
    path = tmp_path / "trace.csv"
    tr.to_csv(str(path))
    assert FlowTrace.from_csv(str(path)).to_csv() == path.read_text()


def test_residual_vanishes_for_constant_state(const_bg):
    states = [ConformalState(const_bg, 1.0, t) for t in (0.0, 0.1, 0.2)]
    res = curvature_evolution_residual(const_bg, states, "normalized")
    assert np.max(np.abs(res)) < 1e-12


def test_residual_of_scalar_ode_is_time_discretization_only():
    r = 6.0
    bg = build_background(BackgroundSpec(kind="synthetic", N=3, r0=r))
    dt = 1e-5
    s0 = ConformalState(bg, 1.0)
    s1 = flow_step(bg, s0, dt, "unnormalized")
    s2 = flow_step(bg, s1, dt, "unnormalized")
    res = curvature_evolution_residual(bg, [s0, s1, s2], "unnormalized")
    assert np.max(np.abs(res)) <= 1e-8 * np.max(s1.R) ** 2


def test_residual_rejects_uneven_spacing(const_bg):
    states = [ConformalState(const_bg, 1.0, t) for t in (0.0, 0.1, 0.3)]
    with pytest.raises(PreconditionError):
        curvature_evolution_residual(const_bg, states)
    with pytest.raises(PreconditionError):
        curvature_evolution_residual(const_bg, states[:2])


def test_solve_yamabe_constant(const_bg):
    u, lam = solve_yamabe(const_bg)
    np.testing.assert_allclose(u, 1.0, atol=1e-12)
    assert lam == pytest.approx(-6.0)


def test_solve_yamabe_volume_scaling(const_bg):
    V0 = const_bg.vertex_volumes.sum()
    u, lam = solve_yamabe(const_bg, target_volume=2**6 * V0)
    np.testing.assert_allclose(u, 2.0, rtol=1e-10)
    assert lam == pytest.approx(-6.0 / 16)


def test_solve_yamabe_agrees_with_flow_limit(negative_bg, negative_run):
    final, tr = negative_run
    u, lam = solve_yamabe(negative_bg, target_volume=tr.volume[0])
    assert np.max(np.abs(u - final.u)) < 1e-4
    assert lam == pytest.approx(final.Rbar, rel=1e-6)


def test_solve_yamabe_requires_negative_curvature():
    bg = build_background(BackgroundSpec(kind="synthetic", N=3, r0=0.5))
    with pytest.raises(PreconditionError):
        solve_yamabe(bg)
    with pytest.raises(PreconditionError):
        solve_yamabe(bg.with_curvature(-1.0), target_volume=0.0)


def test_stable_dt_respects_cfl(negative_bg):
    cfg = FlowConfig(cfl=0.5)
    u = np.ones(negative_bg.num_vertices)
    R = negative_bg.background_curvature
    dt = flowmod.stable_dt(negative_bg, u, R, float(R.mean()), cfg)
    assert 0 < dt <= 0.5 / (4 * 2 * negative_bg.laplacian_max_eigenvalue) * (1 + 1e-12)
    assert math.isfinite(dt)

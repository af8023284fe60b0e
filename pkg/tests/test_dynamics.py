import numpy as np
import pytest

from landau_lab import (ForceField, Frame, PhaseSpaceField, Rep, SimConfig,
                        SimState, SpectralGrid, density, glide, l2_norm, mass,
                        poisson_force, run, single_mode_data, step_free_transport,
                        step_kick, strang_step, transform, traveling_waves,
                        two_wave_data, validity_window)


def state_from(grid, samples, t=0.0):
    f = PhaseSpaceField(grid, samples.astype(complex), Rep.XV, Frame.PHYSICAL, time=t)
    return SimState(t, f)


def test_transport_zero_step_is_identity(grid_small, rng):
    s = state_from(grid_small, rng.standard_normal(grid_small.shape()))
    out = step_free_transport(s, 0.0)
    assert np.abs(out.field.data - s.field.data).max() < 1e-15


def test_transport_semigroup(grid_small, rng):
    s = state_from(grid_small, rng.standard_normal(grid_small.shape()))
    one = step_free_transport(s, 0.7)
    two = step_free_transport(step_free_transport(s, 0.3), 0.4)
    scale = np.abs(s.field.data).max()
    assert np.abs(one.field.data - two.field.data).max() < 1e-13 * scale
    assert one.time == pytest.approx(two.time)


def test_transport_leaves_gliding_spectrum_fixed(grid_small):
    # single-mode data: transporting then gliding back reproduces the start
    g = grid_small
    samples = np.real(np.exp(1j * g.x))[:, None] * np.exp(-g.v ** 2)[None, :]
    s = state_from(g, samples, t=0.0)
    h = 0.37
    moved = step_free_transport(s, h)
    g0 = transform(glide(s.field, "to_gliding"), Rep.KETA)
    g1 = transform(glide(moved.field, "to_gliding", t=h), Rep.KETA)
    assert np.abs(g1.data - g0.data).max() < 1e-12 * np.abs(g0.data).max()


def test_kick_zero_force_identity(grid_small, rng):
    g = grid_small
    s = state_from(g, rng.standard_normal(g.shape()))
    F = ForceField(g, np.zeros(g.Nx))
    out = step_kick(s, F, 0.5)
    assert np.abs(out.field.data - s.field.data).max() < 1e-14


def test_kick_constant_force_shifts_gaussian(grid_small):
    # constant F = c: f(x, v) <- f(x, v - h c), a Gaussian recentered at +h*c
    g = grid_small
    c, h = 0.8, 0.5
    s = state_from(g, np.ones(g.Nx)[:, None] * np.exp(-g.v ** 2)[None, :])
    F_hat = np.zeros(g.Nx, complex)
    F_hat[0] = c
    out = step_kick(s, ForceField(g, F_hat), h)
    expected = np.exp(-(g.v - h * c) ** 2)
    assert np.abs(out.field.data.real[0] - expected).max() < 1e-10


def test_kick_preserves_l2(grid_small, rng):
    g = grid_small
    s = state_from(g, rng.standard_normal(g.shape()))
    F_hat = np.zeros(g.Nx, complex)
    F_hat[1] = 0.3 - 0.2j
    F_hat[-1] = 0.3 + 0.2j
    out = step_kick(s, ForceField(g, F_hat), 0.4)
    assert l2_norm(out.field) == pytest.approx(l2_norm(s.field), rel=1e-12)


def test_kick_rejects_non_hermitian_force(grid_small, rng):
    g = grid_small
    s = state_from(g, rng.standard_normal(g.shape()))
    F_hat = np.zeros(g.Nx, complex)
    F_hat[1] = 1.0  # missing conjugate partner at -1
    with pytest.raises(ValueError, match="Hermitian"):
        step_kick(s, ForceField(g, F_hat), 0.1)


def test_strang_force_off_equals_transport(grid_small, rng):
    g = grid_small
    cfg = SimConfig(g, dt=0.25, t0=0.0, t_end=1.0, epsilon=1.0, force_off=True)
    s = state_from(g, rng.standard_normal(g.shape()))
    a = strang_step(s, cfg)
    b = step_free_transport(s, cfg.dt)
    assert np.abs(a.field.data - b.field.data).max() < 1e-13 * np.abs(s.field.data).max()


def test_strang_matches_run_loop(grid_bump, bump):
    # the fused run loop and the public single step are the same map
    g = grid_bump
    eps = 1e-2
    f0 = single_mode_data(g, eps, 1, bump)
    cfg = SimConfig(g, dt=0.02, t0=0.0, t_end=0.1, epsilon=eps)
    s = SimState(0.0, f0)
    for _ in range(5):
        s = strang_step(s, cfg)
    rec = run(cfg, f0)
    assert np.abs(rec.final_state.field.data - s.field.data).max() < 1e-13 * eps


def test_strang_trivial_solution_gliding_invariant(grid_bump, bump):
    # force-free traveling waves stay fixed in the gliding frame; the residual
    # drift comes from the periodized-velocity density leakage, linear in the
    # amplitude, so a small-amplitude run sits below 1e-8 relative
    g = grid_bump
    amp = 1e-4
    f0 = traveling_waves(g, bump, [amp, amp], t=0.5)
    cfg = SimConfig(g, dt=0.01, t0=0.5, t_end=1.0, epsilon=amp, diag_every=25)
    collected = []
    run(cfg, f0, monitors=[lambda t, r, gk: collected.append(gk.copy())])
    drift = np.abs(collected[-1] - collected[0]).max()
    assert drift <= 1e-8 * np.abs(collected[0]).max()


def test_strang_second_order_self_convergence(grid_bump, bump):
    # resonance times eta/k = 5 and eta/(k-1) = 10 sit outside the window, so
    # the force varies smoothly in t and the splitting is in its dt^2 regime
    g = grid_bump
    eps = 0.05
    f0 = two_wave_data(g, eps, 2, 10.0, bump, t0=0.5)

    def final(dt):
        cfg = SimConfig(g, dt=dt, t0=0.5, t_end=3.0, epsilon=eps, diag_every=10 ** 9)
        return run(cfg, f0).final_state.field.data

    a, b, c = final(0.02), final(0.01), final(0.005)
    e1 = np.abs(a - b).max()
    e2 = np.abs(b - c).max()
    order = np.log2(e1 / e2)
    assert 1.9 <= order <= 2.1


def test_run_zero_data(grid_small):
    g = grid_small
    f0 = PhaseSpaceField(g, np.zeros(g.shape(), complex), Rep.XV, Frame.PHYSICAL, 0.0)
    cfg = SimConfig(g, dt=0.1, t0=0.0, t_end=0.5, epsilon=1.0, diag_every=1)
    rec = run(cfg, f0)
    for r in rec.reports:
        assert r.e_dist_0 == 0.0
        assert r.e_rho_0 == 0.0
        assert r.rho_abs.max() == 0.0
    assert rec.rho_max_overall == 0.0


def test_run_mass_and_l2_conservation(grid_bump, bump):
    g = grid_bump
    f0 = single_mode_data(g, 0.05, 1, bump, t0=0.0)
    shifted = f0.with_data(f0.data + 0.01 * np.exp(-g.v ** 2 / 4)[None, :])
    cfg = SimConfig(g, dt=0.02, t0=0.0, t_end=1.0, epsilon=0.05, diag_every=50)
    rec = run(cfg, shifted)
    m0, m1 = mass(shifted), mass(rec.final_state.field)
    assert m1 == pytest.approx(m0, rel=1e-12)
    assert l2_norm(rec.final_state.field) == pytest.approx(l2_norm(shifted), rel=1e-10)


def test_run_preserves_reality(grid_bump, bump):
    g = grid_bump
    f0 = two_wave_data(g, 0.02, 2, 10.0, bump, t0=0.5)
    cfg = SimConfig(g, dt=0.02, t0=0.5, t_end=1.5, epsilon=0.02, diag_every=100)
    rec = run(cfg, f0)
    out = rec.final_state.field.data
    assert np.abs(out.imag).max() < 1e-12


def test_run_force_off_keeps_gliding_spectrum(grid_bump, bump):
    g = grid_bump
    f0 = single_mode_data(g, 1e-3, 1, bump, t0=0.0)
    cfg = SimConfig(g, dt=0.01, t0=0.0, t_end=2.0, epsilon=1e-3,
                    diag_every=100, force_off=True)
    collected = []
    rec = run(cfg, f0, monitors=[lambda t, r, gk: collected.append(gk.copy())])
    diff = np.abs(collected[-1] - collected[0]).max()
    assert diff < 1e-12 * np.abs(collected[0]).max()


def test_run_validity_window_flag(grid_bump, bump):
    g = grid_bump
    f0 = traveling_waves(g, bump, [1e-3, 1e-3, 1e-3], t=0.5)
    t_valid = validity_window(f0)
    assert 0 < t_valid < 4.0  # eta_max = 12.57, support ~ 4.6, k_max = 3
    cfg = SimConfig(g, dt=0.05, t0=0.5, t_end=t_valid + 1.0, epsilon=1e-3, diag_every=5)
    rec = run(cfg, f0)
    flags = [(r.time, r.valid) for r in rec.reports]
    assert flags[0][1] is True
    assert flags[-1][1] is False
    assert rec.meta["t_valid"] == pytest.approx(t_valid)


def test_run_nan_abort_immediately(grid_small):
    # data whose density overflows at construction aborts before any rows
    g = grid_small
    samples = 1e308 * np.cos(g.x)[:, None] * np.exp(-g.v ** 2)[None, :]
    f0 = PhaseSpaceField(g, samples.astype(complex), Rep.XV, Frame.PHYSICAL, 0.0)
    cfg = SimConfig(g, dt=0.1, t0=0.0, t_end=1.0, epsilon=1.0, diag_every=1)
    import warnings as _w
    with _w.catch_warnings():
        _w.simplefilter("ignore", RuntimeWarning)
        rec = run(cfg, f0)
    assert rec.aborted
    assert rec.abort_info["step"] == 0
    assert rec.reports == []


def test_run_survives_extreme_amplitudes(grid_small):
    # all sub-steps are modulus-1 multipliers, so finite data stays finite
    g = grid_small
    samples = 5e305 * np.cos(g.x)[:, None] * np.exp(-g.v ** 2)[None, :]
    f0 = PhaseSpaceField(g, samples.astype(complex), Rep.XV, Frame.PHYSICAL, 0.0)
    cfg = SimConfig(g, dt=0.1, t0=0.0, t_end=1.0, epsilon=1.0, diag_every=5)
    with np.errstate(over="ignore"):
        import warnings as _w
        with _w.catch_warnings():
            _w.simplefilter("ignore", RuntimeWarning)
            rec = run(cfg, f0)
    assert not rec.aborted
    assert np.all(np.isfinite(rec.final_state.field.data))


def test_run_rejects_complex_initial_data(grid_small):
    g = grid_small
    f0 = PhaseSpaceField(g, 1j * np.ones(g.shape()), Rep.XV, Frame.PHYSICAL, 0.0)
    cfg = SimConfig(g, dt=0.1, t0=0.0, t_end=0.5, epsilon=1.0)
    with pytest.raises(ValueError, match="real-valued"):
        run(cfg, f0)


def test_run_time_tag_mismatch(grid_small, rng):
    g = grid_small
    f0 = PhaseSpaceField(g, rng.standard_normal(g.shape()).astype(complex),
                         Rep.XV, Frame.PHYSICAL, time=1.0)
    cfg = SimConfig(g, dt=0.1, t0=0.0, t_end=0.5, epsilon=1.0)
    with pytest.raises(ValueError, match="tagged"):
        run(cfg, f0)


def test_sim_config_validation(grid_small):
    with pytest.raises(ValueError):
        SimConfig(grid_small, dt=0.6, t0=0.0, t_end=1.0, epsilon=1.0)
    with pytest.raises(ValueError):
        SimConfig(grid_small, dt=0.1, t0=1.0, t_end=0.5, epsilon=1.0)
    with pytest.raises(ValueError):
        SimConfig(grid_small, dt=0.1, t0=0.0, t_end=1.0, epsilon=-1.0)


def test_checkpoints_written(tmp_path, grid_bump, bump):
    g = grid_bump
    f0 = single_mode_data(g, 1e-3, 1, bump, t0=0.0)
    cfg = SimConfig(g, dt=0.05, t0=0.0, t_end=0.5, epsilon=1e-3, diag_every=2)
    rec = run(cfg, f0, checkpoint_times=[0.2, 0.4], checkpoint_dir=str(tmp_path),
              config_hash="deadbeef")
    assert len(rec.checkpoints) == 2
    import json
    from landau_lab import read_snapshot
    snap = read_snapshot(rec.checkpoints[0], g)
    assert snap.time >= 0.2
    with open(rec.checkpoints[0] + ".json") as fh:
        side = json.load(fh)
    assert side["config_hash"] == "deadbeef"

import math

import numpy as np
import pytest

from landau_lab import (FrozenFieldBackground, SimConfig, SimulationBackground,
                        SpectralGrid, echo_chain_times, growth_factor,
                        model_cutoff_frequency, model_gevrey_exponent,
                        predict_echo, run, single_mode_data, spectral_eval,
                        transport_growth_check, transform, truncated_growth,
                        volterra_solve)
from landau_lab import Rep, glide


def brute_force_growth(p, k_max=100):
    best, best_k = 1.0, 0
    for k in range(1, k_max + 1):
        ls = np.arange(1, k + 1, dtype=float)
        val = float(np.prod(p / ls ** 3))
        if val >= best:
            best, best_k = val, k
    return best, best_k


def test_growth_factor_p_one():
    gf = growth_factor(1.0)
    assert gf.value == 1.0


def test_growth_factor_brute_force_oracle():
    gf = growth_factor(1000.0)
    val, k = brute_force_growth(1000.0)
    assert gf.value == pytest.approx(val, rel=1e-12)
    assert gf.argmax_k in (9, 10)
    assert gf.log_value == pytest.approx(23.765, abs=2e-3)


def test_growth_factor_argmax_property():
    for p in (30.0, 1000.0, 12345.0):
        gf = growth_factor(p)
        k = gf.argmax_k
        assert all(p / l ** 3 >= 1.0 for l in range(1, k + 1))
        assert p / (k + 1) ** 3 < 1.0


def test_growth_factor_stirling_limit():
    for p in (1e6, 1e7):
        gf = growth_factor(p)
        assert gf.log_value / p ** (1 / 3) == pytest.approx(3.0, rel=0.1)


def test_growth_factor_huge_p_log_space():
    gf = growth_factor(1e12)
    assert math.isfinite(gf.log_value)
    assert gf.log_value == pytest.approx(3.0 * 1e4, rel=0.05)


def test_truncated_growth_empty_range():
    # eps = 1e-2, eta = 1e5, T = 1e3: lower limit 100 > upper limit 10
    res = truncated_growth(1e-2, 1e5, 1e3)
    assert res.value == 1.0
    assert res.case == "cutoff"
    assert res.l_lo > res.l_hi


def test_truncated_growth_consistency_with_full_product():
    # no lower truncation when T >= eta: equals the plain product up to l_hi
    eps, eta, T = 0.05, 400.0, 1000.0
    res = truncated_growth(eps, eta, T)
    assert res.case == "growth"
    ls = np.arange(1, math.floor((eps * eta) ** (1 / 3)) + 1, dtype=float)
    assert res.value == pytest.approx(float(np.prod(eps * eta / ls ** 3)), rel=1e-12)


def test_truncated_never_exceeds_growth_factor(rng):
    for _ in range(50):
        eps = 10 ** rng.uniform(-3, -1)
        eta = 10 ** rng.uniform(1, 6)
        T = 10 ** rng.uniform(1, 4)
        tg = truncated_growth(eps, eta, T)
        gf = growth_factor(eps * eta)
        assert tg.log_value <= gf.log_value + 1e-12


def test_model_cutoff_frequency():
    assert model_cutoff_frequency(0.01, 100.0) == pytest.approx(100.0, rel=1e-12)
    # consistency with the horizon form: sqrt(eps T^3) = eps^{-(3N-1)/2}
    for eps, N in ((0.05, 1.0), (0.01, 2.0)):
        T = eps ** -N
        assert model_cutoff_frequency(eps, T) == pytest.approx(
            eps ** (-(3 * N - 1) / 2), rel=1e-10)


def test_model_gevrey_exponent():
    assert model_gevrey_exponent(2.0) == pytest.approx(4.0 / 15.0, rel=1e-14)
    vals = [model_gevrey_exponent(N) for N in (1, 2, 4, 8, 16, 1e6)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0 / 3.0, rel=1e-5)


def test_predict_echo_formula():
    eps = 0.02
    pred = predict_echo(eps, 2, 30.0, 0.0997)
    assert pred.time == pytest.approx(15.0)
    assert pred.modes == (1, 3)
    assert pred.amplitude == pytest.approx(eps ** 2 * 30.0 / 8.0 * 0.0997, rel=1e-12)


def test_predict_echo_quadratic_in_epsilon():
    a1 = predict_echo(0.01, 2, 30.0, 1.0).amplitude
    a2 = predict_echo(0.02, 2, 30.0, 1.0).amplitude
    assert a2 == pytest.approx(4 * a1, rel=1e-12)


def test_predict_echo_rejects_k_zero():
    with pytest.raises(ValueError):
        predict_echo(0.01, 0, 30.0, 1.0)


def test_echo_chain_times():
    assert echo_chain_times(3, 60.0) == [20.0, 30.0, 60.0]


# ---------------------------------------------------------------------------
# Volterra engine

class SyntheticBackground:
    """Smooth analytic background for engine tests."""

    def __init__(self, free_amp=1e-3, coupling=0.0):
        self.free_amp = free_amp
        self.coupling = coupling

    def __call__(self, s, m, eta):
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        if abs(m) == 1:
            return self.free_amp * np.exp(-eta ** 2 / 4.0) + 0j * eta
        if m == 0:
            return self.coupling * np.exp(-eta ** 2 / 2.0) / (1.0 + s) + 0j * eta
        return np.zeros(eta.shape, complex)


def test_volterra_zero_kernel_returns_free_term():
    bg = SyntheticBackground(free_amp=2e-3)
    times = np.linspace(0.5, 3.0, 41)
    st = volterra_solve(bg, 1, times, kernel_on=False)
    expected = np.array([bg(0.5, 1, [t])[0] for t in times])
    assert np.abs(st.mode(1) - expected).max() < 1e-15


def test_volterra_linearity_in_free_term():
    times = np.linspace(0.5, 2.0, 31)
    a = volterra_solve(SyntheticBackground(1e-3, coupling=1e-2), 1, times)
    b = volterra_solve(SyntheticBackground(3e-3, coupling=1e-2), 1, times)
    assert np.abs(b.mode(1) - 3 * a.mode(1)).max() < 1e-12 * np.abs(a.mode(1)).max() * 3


def naive_march(bg, times):
    """Independent scalar trapezoid marching for K = 1 (k = l = +-1 terms)."""
    n = len(times)
    rho = np.zeros(n, complex)
    rho[0] = bg(times[0], 1, [times[0]])[0]
    for i in range(1, n):
        t = times[i]
        acc = bg(times[0], 1, [1 * t])[0]
        w = np.zeros(i + 1)
        d = np.diff(times[: i + 1])
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        for j in range(i + 1):
            s = times[j]
            for l in (1, -1):
                r = rho[j] if l == 1 else np.conj(rho[j])
                gval = bg(s, 1 - l, [t - l * s])[0]
                acc += w[j] * (1 * (t - s) / l) * r * gval
        rho[i] = acc
    return rho


def test_volterra_matches_independent_march():
    bg = SyntheticBackground(free_amp=1e-3, coupling=0.05)
    times = np.linspace(0.5, 4.0, 57)
    st = volterra_solve(bg, 1, times)
    ref = naive_march(bg, times)
    scale = np.abs(ref).max()
    assert np.abs(st.mode(1) - ref).max() < 1e-8 * scale


def test_volterra_second_order_refinement():
    bg = SyntheticBackground(free_amp=1e-3, coupling=0.05)
    t1 = np.linspace(0.5, 4.0, 51)
    t2 = np.linspace(0.5, 4.0, 101)
    t4 = np.linspace(0.5, 4.0, 201)
    a = volterra_solve(bg, 1, t1).mode(1)[-1]
    b = volterra_solve(bg, 1, t2).mode(1)[-1]
    c = volterra_solve(bg, 1, t4).mode(1)[-1]
    assert abs(a - b) / abs(b - c) == pytest.approx(4.0, rel=0.3)


def test_volterra_aborts_on_non_finite_background():
    class BadBackground(SyntheticBackground):
        def __call__(self, s, m, eta):
            out = super().__call__(s, m, eta)
            if s > 1.0:
                out = out + np.nan
            return out

    with pytest.raises(RuntimeError, match="non-finite"):
        volterra_solve(BadBackground(coupling=0.1), 1, np.linspace(0.5, 2.0, 21))


def test_volterra_rejects_bad_time_grid():
    bg = SyntheticBackground()
    with pytest.raises(ValueError):
        volterra_solve(bg, 1, [1.0, 0.5])
    with pytest.raises(ValueError):
        volterra_solve(bg, 1, [1.0])


def test_frozen_background_matches_offgrid_eval(grid_bump, bump):
    # the sparse Dirichlet evaluator equals the dense modulation identity
    g = grid_bump
    f = single_mode_data(g, 1e-3, 1, bump, t0=0.0)
    bg = FrozenFieldBackground(f, modes=range(-2, 3))
    gliding = glide(f, "to_gliding")
    etas = np.array([0.013, 0.05, -0.09, 1.7])
    scale = np.abs(spectral_eval(gliding, 1, etas)).max() / (2 * np.pi)
    for m in (1, -1, 0):
        dense = spectral_eval(gliding, m, etas) / (2 * np.pi)
        sparse = bg(0.0, m, etas)
        assert np.abs(dense - sparse).max() < 1e-12 * scale


def test_frozen_background_free_term_matches_density(grid_bump, bump):
    # seed consistency: bg(s0, k, k s0) equals the density coefficient
    from landau_lab import density
    g = grid_bump
    f = single_mode_data(g, 1e-3, 1, bump, t0=0.5)
    bg = FrozenFieldBackground(f, modes=range(-2, 3))
    rho = density(f)
    got = bg(0.0, 1, [1 * 0.5])[0]
    assert abs(got - rho.coeff(1)) < 1e-12 * abs(rho.coeff(1))


def test_volterra_free_streaming_decay_from_simulation_grid(grid_bump, bump):
    # with only the free term, the recursion reproduces pure phase mixing
    g = grid_bump
    eps = 1e-3
    f0 = single_mode_data(g, eps, 1, bump, t0=0.0)
    bg = FrozenFieldBackground(f0, modes=range(-2, 3))
    times = np.linspace(0.0, 0.12, 25)
    st = volterra_solve(bg, 1, times)
    for i, t in enumerate(times):
        expected = eps * abs(bump.psi_hat([t])[0]) / 2
        assert abs(st.mode(1)[i]) == pytest.approx(expected, rel=1e-9, abs=1e-18)


def test_simulation_background_requires_sampled_time(grid_bump, bump):
    g = grid_bump
    bg = SimulationBackground(g, modes=(0, 1))
    f = single_mode_data(g, 1e-3, 1, bump, t0=0.0)
    gl = transform(glide(f, "to_gliding"), Rep.KETA)
    bg.collect(0.0, None, gl.data)
    with pytest.raises(ValueError, match="not sampled"):
        bg(0.37, 1, [0.5])


def test_transport_growth_zero_force(grid_bump, bump):
    g = grid_bump
    eps = 0.02
    f0 = single_mode_data(g, eps, 1, bump, t0=0.0)
    cfg = SimConfig(g, dt=0.02, t0=0.0, t_end=1.0, epsilon=eps,
                    diag_every=5, force_off=True)
    rec = run(cfg, f0)
    rep = transport_growth_check(rec.reports, eps)
    # free transport leaves the eta-derivative norm untouched once the mode-1
    # density has left the bump support; the fitted slope is noise-level
    assert abs(rep.slope) * max(rep.envelope_l1, 1.0) < 1e-6


def test_transport_growth_scales_with_epsilon(grid_bump, bump):
    # modes 1 and 2 seeded together: the mode-1 force transfers content onto
    # the occupied mode 2, so the norm responds at first order and the fitted
    # slope doubles with epsilon
    g = grid_bump

    def slope(eps):
        f1 = single_mode_data(g, eps, 1, bump, t0=0.0)
        f2 = single_mode_data(g, eps, 2, bump, t0=0.0)
        cfg = SimConfig(g, dt=0.02, t0=0.0, t_end=2.0, epsilon=eps, diag_every=5)
        rec = run(cfg, f1.with_data(f1.data + f2.data))
        return transport_growth_check(rec.reports, eps).slope

    s1, s2 = slope(0.02), slope(0.04)
    assert s2 == pytest.approx(2 * s1, rel=0.1)


def test_transport_growth_orthogonal_family_is_second_order(grid_bump, bump):
    # a lone mode feeds only empty modes: the first-order norm response
    # cancels by orthogonality and the slope scales like epsilon^2
    g = grid_bump

    def slope(eps):
        f0 = single_mode_data(g, eps, 1, bump, t0=0.0)
        cfg = SimConfig(g, dt=0.02, t0=0.0, t_end=2.0, epsilon=eps, diag_every=5)
        rec = run(cfg, f0)
        return transport_growth_check(rec.reports, eps).slope

    s1, s2 = slope(0.02), slope(0.04)
    assert s2 == pytest.approx(4 * s1, rel=0.1)

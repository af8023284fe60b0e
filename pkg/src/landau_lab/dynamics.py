"""
Time integration by Strang-split spectral stepping: exact x-transport and
v-kick sub-flows composed to second order, with diagnostics on gliding-frame
snapshots, checkpointing, and a validity window for velocity filamentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import weights as wt
from .spectral import (Frame, PhaseSpaceField, Rep, SpatialDensity, ForceField,
                       eta_derivative, glide, transform, write_snapshot)


@dataclass(frozen=True)
class SimConfig:
    """Run parameters: grid, step size, time span, perturbation scale, cadence."""

    grid: object
    dt: float
    t0: float
    t_end: float
    epsilon: float
    diag_every: int = 1
    force_off: bool = False

    def __post_init__(self):
        if not 0 < self.dt <= 0.5:
            raise ValueError("dt must lie in (0, 0.5]")
        if not self.t0 < self.t_end:
            raise ValueError("t0 must be below t_end")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.diag_every < 1:
            raise ValueError("diag_every must be a positive integer")


@dataclass(frozen=True)
class SimState:
    """Immutable solver state: a physical-frame field plus the step counter."""

    time: float
    field: PhaseSpaceField
    step_index: int = 0


def step_free_transport(state: SimState, h: float) -> SimState:
    """
    Exact free transport f(x, v) <- f(x - h v, v), realized in KV as
    multiplication by exp(-i k v h).
    """
    if h < 0:
        raise ValueError("transport step needs h >= 0")
    f = state.field
    g = f.grid
    kv = transform(f, Rep.KV)
    out = kv.data * np.exp(-1j * h * np.outer(g.k, g.v))
    moved = transform(kv.with_data(out, time=state.time + h), f.rep)
    return SimState(state.time + h, moved, state.step_index)


def step_kick(state: SimState, force: ForceField, h: float) -> SimState:
    """
    Exact frozen-force kick f(x, v) <- f(x, v - h F(x)), realized in the
    x-physical / v-spectral representation as multiplication by
    exp(-i eta F(x) h).  Rejects force fields without Hermitian symmetry.
    """
    g = state.field.grid
    sym = force.values[(-g.k_int) % g.Nx].conj()
    scale = max(np.abs(force.values).max(), 1e-300)
    # structural violations have asymmetry of order max|F|; roundoff sits far below
    if np.abs(force.values - sym).max() > 1e-6 * scale:
        raise ValueError("force spectrum is not Hermitian; F must be real-valued")
    f = transform(state.field, Rep.XV)
    F_phys = force.physical().real
    feta = np.fft.fft(f.data, axis=1)
    feta *= np.exp(-1j * h * np.outer(F_phys, g.eta))
    out = np.fft.ifft(feta, axis=1)
    kicked = transform(f.with_data(out), state.field.rep)
    return SimState(state.time, kicked, state.step_index)


def strang_step(state: SimState, config: SimConfig) -> SimState:
    """
    One second-order step: half transport, density + force at the midpoint,
    full kick, half transport.
    """
    from .spectral import density, poisson_force
    h = config.dt
    s = step_free_transport(state, h / 2)
    if not config.force_off:
        F = poisson_force(density(s.field))
        s = step_kick(s, F, h)
    s = step_free_transport(s, h / 2)
    return SimState(s.time, s.field, state.step_index + 1)


# ---------------------------------------------------------------------------
# full runs

@dataclass(frozen=True)
class RunRecord:
    """Outcome of a run: diagnostics rows, final state, metadata, abort info."""

    reports: list
    final_state: SimState
    meta: dict
    rho_max_overall: float
    aborted: bool = False
    abort_info: dict | None = None
    checkpoints: list = dc_field(default_factory=list)


def validity_window(f0: PhaseSpaceField, rel_floor: float = 1e-13) -> float:
    """
    Largest time for which the sheared spectrum stays inside the eta window:
    (eta_max - eta_support) / k_support, with supports read off the spectrum
    above a relative floor.  Infinite for x-uniform data.
    """
    g = f0.grid
    keta = transform(f0, Rep.KETA)
    mag = np.abs(keta.data)
    peak = mag.max()
    if not np.isfinite(peak):
        return 0.0
    if peak == 0.0:
        return math.inf
    live = mag > rel_floor * peak
    k_sup = int(np.abs(g.k_int[live.any(axis=1)]).max())
    eta_sup = float(np.abs(g.eta[live.any(axis=0)]).max())
    if k_sup == 0:
        return math.inf
    return max(0.0, (g.eta_max - eta_sup) / k_sup)


def _make_report(fld: PhaseSpaceField, t: float, params, sigma_default: float,
                 k_report: int, noise_floor: float, z_clamp: float,
                 valid: bool, rho_hat: np.ndarray):
    """Gliding-frame diagnostics row; returns (report, g_keta array)."""
    g = fld.grid
    gl = glide(fld, "to_gliding", t=t)
    gk = transform(gl, Rep.KETA)
    dgk = eta_derivative(gl)
    sigma = params.sigma if params is not None else sigma_default
    p0 = (params if params is not None
          else wt.GevreyParams(epsilon=1.0, N=1.0, sigma=sigma, alpha=0.4,
                               beta=0.0, beta_prime=0.0, gamma=1.0 / 3.0,
                               eta_cutoff=1.0, C=1.0))
    floor_abs = noise_floor * np.abs(gk.data).max() / (2 * np.pi)
    rho = SpatialDensity(g, rho_hat, time=t)
    e_dist_0 = wt.distribution_energy(gk, dgk, 0.0, p0, noise_floor=noise_floor)
    e_rho_0 = wt.density_energy(rho, t, 0.0, p0, noise_floor_abs=floor_abs)
    deta_norm = float(np.sqrt(g.deta * np.sum(np.abs(dgk.data) ** 2)))
    if params is not None:
        z = wt.z_parameter(t, params.horizon, t_min=z_clamp)
        e_dist = wt.distribution_energy(gk, dgk, z, params, noise_floor=noise_floor)
        e_rho = wt.density_energy(rho, t, z, params, noise_floor_abs=floor_abs)
        dist_ok = e_dist <= wt.dist_threshold(params)
        rho_ok = e_rho <= wt.rho_threshold(params, t)
    else:
        z = e_dist = e_rho = dist_ok = rho_ok = None
    report = wt.EnergyReport(
        time=t, z=z, e_dist=e_dist, e_rho=e_rho, e_dist_0=e_dist_0,
        e_rho_0=e_rho_0, deta_norm=deta_norm,
        rho_abs=np.abs(rho_hat[: k_report + 1]).copy(),
        dist_ok=dist_ok, rho_ok=rho_ok, valid=valid)
    return report, gk.data


def run(config: SimConfig, f0: PhaseSpaceField, params=None, monitors=(),
        checkpoint_times=(), checkpoint_dir=None, k_report: int = 8,
        noise_floor: float = 1e-13, config_hash: str = "") -> RunRecord:
    """
    March the split-step solver from t0 to t_end with diagnostics every
    diag_every steps (always at the first and last step).

    Monitors are callables monitor(time, report, g_keta) receiving the
    gliding-frame spectrum used for the diagnostics; they must not mutate it.
    Reports carry z(t)-weighted energies and threshold flags when params is
    given.  Checkpoints (snapshot + JSON sidecar) are written at the first
    diagnostic time past each requested checkpoint time.  A non-finite
    density aborts the run, keeping the rows produced so far.
    """
    g = config.grid
    if f0.grid != g:
        raise ValueError("initial data grid does not match the config grid")
    xv = transform(f0, Rep.XV)
    scale = np.abs(xv.data).max()
    if scale > 0 and np.abs(xv.data.imag).max() > 1e-12 * scale:
        raise ValueError("initial data must be real-valued in XV")
    if f0.time is not None and abs(f0.time - config.t0) > 1e-12 * max(1.0, abs(config.t0)):
        raise ValueError(f"initial data is tagged t={f0.time}, config starts at {config.t0}")
    if params is not None and config.t_end > params.horizon * (1 + 1e-12):
        raise ValueError(f"t_end = {config.t_end} exceeds the horizon T = {params.horizon}")

    t_valid = validity_window(xv)
    n_steps = int(round((config.t_end - config.t0) / config.dt))
    kvec, v = g.k, g.v
    half_phase = np.exp(-1j * (config.dt / 2) * np.outer(kvec, v))
    nz = g.k_int != 0
    ik = 1j * g.k

    data = xv.data.copy()
    t = config.t0
    reports = []
    checkpoints = []
    pending_ckpts = sorted(float(c) for c in checkpoint_times)
    rho_max = 0.0
    aborted = False
    abort_info = None

    def density_hat(arr):
        return np.fft.fft(g.dv * arr.sum(axis=1)) / g.Nx

    def emit(step_idx, arr, rho_hat):
        nonlocal aborted, abort_info
        fld = PhaseSpaceField(g, arr, Rep.XV, Frame.PHYSICAL, time=t)
        valid = t <= t_valid
        report, gk = _make_report(fld, t, params, 4.0, k_report, noise_floor,
                                  config.dt, valid, rho_hat)
        reports.append(report)
        for m in monitors:
            m(t, report, gk)
        while pending_ckpts and t >= pending_ckpts[0] - 1e-12:
            pending_ckpts.pop(0)
            if checkpoint_dir is not None:
                path = f"{checkpoint_dir}/snapshot_{step_idx:08d}.vps"
                write_snapshot(fld, path, sidecar={
                    "time": t, "step": step_idx, "config_hash": config_hash})
                checkpoints.append(path)
        return report

    rho0 = density_hat(data.real)
    if not np.all(np.isfinite(rho0)):
        aborted = True
        abort_info = {"time": t, "step": 0, "last_checkpoint": None}
    else:
        rho_max = max(rho_max, float(np.abs(rho0[1:]).max(initial=0.0)))
        emit(0, data, rho0)

    completed = 0
    for i in range(1, 0 if aborted else n_steps + 1):
        data = np.fft.ifft(np.fft.fft(data, axis=0) * half_phase, axis=0)
        rho_hat = density_hat(data.real)
        if not np.all(np.isfinite(rho_hat)):
            aborted = True
            abort_info = {"time": t, "step": i,
                          "last_checkpoint": checkpoints[-1] if checkpoints else None}
            break
        if not config.force_off:
            F_hat = np.zeros_like(rho_hat)
            F_hat[nz] = rho_hat[nz] / ik[nz]
            F = (np.fft.ifft(F_hat) * g.Nx).real
            feta = np.fft.fft(data, axis=1)
            feta *= np.exp(-1j * config.dt * np.outer(F, g.eta))
            data = np.fft.ifft(feta, axis=1)
        data = np.fft.ifft(np.fft.fft(data, axis=0) * half_phase, axis=0)
        t = config.t0 + i * config.dt
        completed = i
        rho_now = density_hat(data.real)
        rho_max = max(rho_max, float(np.abs(rho_now[1:]).max(initial=0.0)))
        if i % config.diag_every == 0 or i == n_steps:
            emit(i, data, rho_now)

    final = SimState(t, PhaseSpaceField(g, data, Rep.XV, Frame.PHYSICAL, time=t),
                     completed)
    meta = {
        "t_valid": t_valid,
        "n_steps": n_steps,
        "dt": config.dt,
        "t0": config.t0,
        "t_end": config.t_end,
        "force_off": config.force_off,
        "noise_floor": noise_floor,
        "k_report": k_report,
    }
    return RunRecord(reports, final, meta, rho_max, aborted, abort_info, checkpoints)

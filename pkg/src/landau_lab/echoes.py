"""
Quantitative echo models (growth factors, cutoff frequencies, echo
predictions) and the Volterra engine for the density integral recursion

    rho(t, k) = g(s0, k, k t) + sum_{l != 0} int_{s0}^t  k (t - s) / l
                * rho(s, l) * g(s, k - l, k t - l s)  ds

with trapezoidal time marching.  Backgrounds are callables g(s, m, eta) on
arbitrary real eta in the density-consistent normalization
g(s, k, k s) = rho_hat(s, k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solutions import _dirichlet
from .spectral import Frame, Rep, glide, transform

LOG_FLOOR = math.log(1e-300)  # short-circuit for hopeless products


@dataclass(frozen=True)
class GrowthFactor:
    value: float        # may overflow to inf; log_value is always finite
    argmax_k: int
    log_value: float


def growth_factor(p: float) -> GrowthFactor:
    """
    sup over k >= 0 of prod_{l=1..k} p / l^3 (empty product = 1), computed in
    log space.  The supremum sits at the last l with p / l^3 >= 1, i.e.
    k = floor(p^(1/3)); the value behaves like exp(3 p^(1/3)) for large p.
    """
    if p <= 0:
        raise ValueError("growth factor needs p > 0")
    best_log, best_k = 0.0, 0
    acc = 0.0
    l = 1
    while True:
        term = math.log(p) - 3.0 * math.log(l)
        if term < 0 and acc + term < best_log:
            break
        acc += term
        if acc >= best_log:
            best_log, best_k = acc, l
        if term < LOG_FLOOR:
            break
        l += 1
    try:
        value = math.exp(best_log)
    except OverflowError:
        value = math.inf
    return GrowthFactor(value, best_k, best_log)


@dataclass(frozen=True)
class TruncatedGrowth:
    value: float
    log_value: float
    case: str           # "growth" if the chain completes before the horizon, else "cutoff"
    l_lo: int
    l_hi: int


def truncated_growth(epsilon: float, eta: float, horizon: float) -> TruncatedGrowth:
    """
    Product of eps |eta| / l^3 over integer l between ceil(eta/T) and
    floor((eps eta)^(1/3)): the factors both large enough to matter and
    resonant early enough to fit the horizon.  Empty range gives 1.
    """
    if epsilon <= 0 or eta <= 0 or horizon <= 0:
        raise ValueError("epsilon, eta and horizon must be positive")
    l_lo = max(1, math.ceil(eta / horizon))
    l_hi = math.floor((epsilon * eta) ** (1.0 / 3.0))
    case = "growth" if eta / max((epsilon * eta) ** (1.0 / 3.0), 1e-300) <= horizon else "cutoff"
    if l_hi < l_lo:
        return TruncatedGrowth(1.0, 0.0, case, l_lo, l_hi)
    ls = np.arange(l_lo, l_hi + 1, dtype=float)
    logv = float(np.sum(np.log(epsilon * eta) - 3.0 * np.log(ls)))
    try:
        value = math.exp(logv)
    except OverflowError:
        value = math.inf
    return TruncatedGrowth(value, logv, case, l_lo, l_hi)


def model_cutoff_frequency(epsilon: float, horizon: float) -> float:
    """Frequency sqrt(eps T^3) above which echo chains cannot finish by T."""
    if epsilon <= 0 or horizon <= 0:
        raise ValueError("inputs must be positive")
    return math.sqrt(epsilon * horizon ** 3)


def model_gevrey_exponent(N: float) -> float:
    """Model exponent gamma_N = (1/3) (3N - 2) / (3N - 1) for horizon eps^(-N)."""
    if N <= 0:
        raise ValueError("N must be positive")
    return (3.0 * N - 2.0) / (3.0 * (3.0 * N - 1.0))


def echo_chain_times(k: int, eta: float) -> list[float]:
    """Resonance times eta/k, eta/(k-1), ..., eta/1 of the downward echo chain."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    return [eta / j for j in range(k, 0, -1)]


@dataclass(frozen=True)
class EchoPrediction:
    time: float
    modes: tuple[int, int]
    v_frequency: float
    amplitude: float
    chain_times: list[float]


def predict_echo(epsilon: float, k: int, eta: float, psi_hat_l1: float) -> EchoPrediction:
    """
    First-order echo prediction for a wave pair (mode 1) x (mode k, frequency
    eta): a correction of size eps^2 |eta| / |k|^3 * ||psi_hat||_L1 at the
    sibling modes k -+ 1 around the time eta / k.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    amp = epsilon ** 2 * abs(eta) / abs(k) ** 3 * psi_hat_l1
    return EchoPrediction(eta / k, (k - 1, k + 1), eta, amp, echo_chain_times(k, eta))


# ---------------------------------------------------------------------------
# Volterra engine

@dataclass(frozen=True)
class VolterraState:
    """Marching result: rho[i, j] is the density mode modes[j] at times[i]."""

    times: np.ndarray
    modes: tuple
    rho: np.ndarray
    background: object

    def mode(self, k: int) -> np.ndarray:
        return self.rho[:, self.modes.index(k)]


class SimulationBackground:
    """
    Background built from gliding-frame spectra collected during a run.

    Stores, per diagnostic time and x-mode, the sparse KETA rows above a
    relative floor; evaluates g(s, m, eta) at arbitrary real eta through the
    periodic Dirichlet kernel (band-limited modulation identity), normalized
    so that g(s, k, k s) equals rho_hat(s, k).
    """

    def __init__(self, grid, modes, rel_floor: float = 1e-14):
        self.grid = grid
        self.modes = tuple(int(m) for m in modes)
        self.rel_floor = rel_floor
        self.times: list[float] = []
        self._rows: dict[int, list] = {m: [] for m in self.modes}
        self._support: dict[int, tuple] = {}

    def collect(self, time, report, g_keta) -> None:
        """Run monitor: grab sparse rows of the gliding spectrum."""
        g = self.grid
        self.times.append(float(time))
        floor = self.rel_floor * max(np.abs(g_keta).max(), 1e-300)
        for m in self.modes:
            row = g_keta[m % g.Nx]
            idx = np.nonzero(np.abs(row) > floor)[0]
            self._rows[m].append((idx.copy(), row[idx] / (2 * np.pi)))
            if len(idx):
                lo = float(np.min(g.eta[idx]))
                hi = float(np.max(g.eta[idx]))
                old = self._support.get(m)
                self._support[m] = ((lo, hi) if old is None
                                    else (min(old[0], lo), max(old[1], hi)))

    def support(self, m: int):
        """(eta_lo, eta_hi) hull of the stored spectrum of mode m, or None."""
        return self._support.get(int(m))

    def _time_index(self, s: float) -> int:
        ts = np.asarray(self.times)
        i = int(np.argmin(np.abs(ts - s)))
        if abs(ts[i] - s) > 1e-9 * max(1.0, abs(s)):
            raise ValueError(f"background not sampled at s = {s}")
        return i

    def __call__(self, s: float, m: int, eta):
        m = int(m)
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        if m not in self._rows:
            raise KeyError(f"mode {m} not collected")
        idx, vals = self._rows[m][self._time_index(s)]
        if len(idx) == 0:
            return np.zeros(eta.shape, dtype=np.complex128)
        out = np.zeros(eta.shape, dtype=np.complex128)
        slots = self.grid.eta[idx]
        for sl, va in zip(slots, vals):
            out += va * _dirichlet(self.grid, sl - eta) / (2 * self.grid.L)
        return out


class FrozenFieldBackground(SimulationBackground):
    """Background frozen at one snapshot: every time queries the same spectrum."""

    def __init__(self, field, modes, rel_floor: float = 1e-14):
        super().__init__(field.grid, modes, rel_floor)
        if field.frame != Frame.GLIDING:
            field = glide(field, "to_gliding")
        gl = transform(field, Rep.KETA)
        self.collect(0.0, None, gl.data)

    def _time_index(self, s: float) -> int:
        return 0


def volterra_solve(background, K: int, times, kernel_on: bool = True) -> VolterraState:
    """
    Trapezoidal time marching of the density recursion for modes 1..K (the
    negative modes follow by conjugation for real data).  The kernel vanishes
    at s = t, so the marching is explicit.  kernel_on=False keeps only the
    free term.  Non-finite background values abort with their location.
    """
    times = np.asarray([float(t) for t in times])
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing with at least two points")
    modes = tuple(range(1, K + 1))
    n = len(times)
    rho = np.zeros((n, K), dtype=np.complex128)

    def bg(s, m, eta):
        val = np.asarray(background(s, m, eta))
        if not np.all(np.isfinite(val)):
            raise RuntimeError(f"background returned non-finite value at "
                               f"(s={s}, m={m}, eta={eta})")
        return val

    def support(m):
        fn = getattr(background, "support", None)
        return fn(m) if fn is not None else None

    s0 = times[0]
    for j, k in enumerate(modes):
        rho[0, j] = bg(s0, k, np.array([k * s0]))[0]

    ls = [l for l in range(-K, K + 1) if l != 0]
    for i in range(1, n):
        t = times[i]
        # composite trapezoid weights on times[0..i]
        w = np.zeros(i + 1)
        d = np.diff(times[: i + 1])
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        for j, k in enumerate(modes):
            acc = bg(s0, k, np.array([k * t]))[0]
            if kernel_on:
                for l in ls:
                    m = k - l
                    rho_l = rho[: i + 1, l - 1] if l > 0 else np.conj(rho[: i + 1, -l - 1])
                    sup = support(m)
                    jj = np.arange(i + 1)
                    if sup is not None:
                        # restrict to s where k t - l s can hit the stored band
                        lo, hi = sup[0] - 1e-9, sup[1] + 1e-9
                        ss = times[: i + 1]
                        inside = ((k * t - l * ss) >= lo) & ((k * t - l * ss) <= hi)
                        jj = jj[inside]
                        if len(jj) == 0:
                            continue
                    svals = times[jj]
                    gvals = np.empty(len(jj), dtype=np.complex128)
                    for a, jdx in enumerate(jj):
                        gvals[a] = bg(times[jdx], m, np.array([k * t - l * svals[a]]))[0]
                    kern = k * (t - svals) / l
                    acc += np.sum(w[jj] * kern * rho_l[jj] * gvals)
            rho[i, j] = acc
    return VolterraState(times, modes, rho, background)


# ---------------------------------------------------------------------------
# echo measurement and the v-transport growth diagnostic

@dataclass(frozen=True)
class EchoMeasurement:
    """Echo observables extracted from a run, in equivalent-wave-amplitude units."""

    prediction: EchoPrediction
    peak_time: float            # density spike time at mode k-1
    peak_rho: float             # |rho_hat(t, k-1)| at the spike
    rho_amplitude: float        # spike converted to a wave amplitude
    band_jump_time: float       # when the mode-(k-1) band energy jumps
    band_amplitude: float       # band-energy jump converted to a wave amplitude
    band_amp_sibling: float     # same for mode k+1

    def as_dict(self) -> dict:
        d = {f: getattr(self, f) for f in
             ("peak_time", "peak_rho", "rho_amplitude", "band_jump_time",
              "band_amplitude", "band_amp_sibling")}
        d["predicted_time"] = self.prediction.time
        d["predicted_amplitude"] = self.prediction.amplitude
        d["ratio_band"] = self.band_amplitude / self.prediction.amplitude
        d["ratio_rho"] = self.rho_amplitude / self.prediction.amplitude
        return d


class BandEnergyTracker:
    """
    Run monitor recording sqrt(sum_band |g_hat(m, eta)|^2 deta) for given
    x-modes over an eta band, in raw KETA units.
    """

    def __init__(self, grid, modes, eta_center: float, eta_halfwidth: float):
        self.grid = grid
        self.modes = tuple(modes)
        mask = np.abs(grid.eta - eta_center) <= eta_halfwidth
        self._mask = mask
        self.times: list[float] = []
        self.energy: dict[int, list] = {m: [] for m in self.modes}

    def __call__(self, time, report, g_keta) -> None:
        self.times.append(float(time))
        for m in self.modes:
            row = g_keta[m % self.grid.Nx][self._mask]
            self.energy[m].append(float(np.sqrt(self.grid.deta * np.sum(np.abs(row) ** 2))))


def _jump_time(times, series) -> float:
    """First crossing of the midpoint between initial and final level."""
    series = np.asarray(series)
    lo, hi = series[0], series[-1]
    mid = 0.5 * (lo + hi)
    above = np.nonzero(series >= mid)[0]
    return float(times[above[0]]) if len(above) else float("nan")


def measure_echo(reports, tracker: BandEnergyTracker, bump, prediction: EchoPrediction,
                 window: tuple[float, float]) -> EchoMeasurement:
    """
    Extract the secondary density spike of mode k-1 inside the given time
    window and the primary band-energy jumps, converting both to equivalent
    wave amplitudes: a wave a*cos((k-1)x + eta v) psi(v) has KETA band energy
    a * pi * ||psi_hat||_l2(deta) and a peak density a * psi_hat(0) / 2.
    """
    km, kp = prediction.modes
    g = tracker.grid
    times = np.array([r.time for r in reports])
    rho_km = np.array([r.rho_abs[km] for r in reports])
    sel = (times >= window[0]) & (times <= window[1])
    if not np.any(sel):
        raise ValueError("no reports inside the echo window")
    i = int(np.argmax(np.where(sel, rho_km, -1.0)))
    psi_l2 = float(np.sqrt(g.deta * np.sum(np.abs(bump.taper) ** 2)))
    psi0 = float(np.abs(bump.psi_hat([0.0])[0]))
    band_t = np.asarray(tracker.times)
    e_km = np.asarray(tracker.energy[km])
    e_kp = np.asarray(tracker.energy[kp])
    jump = lambda e: float((e[-1] - e[0]) if e[-1] >= e[0] else 0.0)
    return EchoMeasurement(
        prediction=prediction,
        peak_time=float(times[i]),
        peak_rho=float(rho_km[i]),
        rho_amplitude=float(2.0 * rho_km[i] / psi0),
        band_jump_time=_jump_time(band_t, e_km),
        band_amplitude=jump(e_km) / (np.pi * psi_l2),
        band_amp_sibling=jump(e_kp) / (np.pi * psi_l2),
    )


@dataclass(frozen=True)
class TransportGrowthReport:
    """Fit of the eta-derivative norm growth against the mode-1 forcing envelope."""

    slope: float            # d log||d_eta g|| per unit integrated envelope
    envelope_l1: float      # integral of the measured |psi~(t)| envelope
    epsilon: float
    ratio: float            # slope / epsilon


def transport_growth_check(reports, epsilon: float) -> TransportGrowthReport:
    """
    Diagnostic (no pass/fail): regress the growth of the eta-derivative norm on
    the time-integrated mode-1 density envelope |psi~_eff(s)| = 2 |rho_hat(s,1)| / eps.
    The v-transport model predicts a slope proportional to epsilon.
    """
    times = np.array([r.time for r in reports])
    dnorm = np.array([r.deta_norm for r in reports])
    rho1 = np.array([r.rho_abs[1] for r in reports])
    if dnorm[0] <= 0:
        raise ValueError("eta-derivative norm vanishes initially; nothing to fit")
    env = 2.0 * rho1 / epsilon
    x = np.concatenate([[0.0], np.cumsum(0.5 * (env[1:] + env[:-1]) * np.diff(times))])
    y = np.log(dnorm / dnorm[0])
    denom = float(np.sum(x * x))
    slope = float(np.sum(x * y) / denom) if denom > 0 else 0.0
    return TransportGrowthReport(slope, float(x[-1]), epsilon,
                                 slope / epsilon if epsilon > 0 else 0.0)

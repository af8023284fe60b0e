"""
Oracle initial data: band-limited velocity bumps, force-free traveling-wave
solutions, two-wave interaction data, and single-mode benchmark data.

Wave velocity frequencies are snapped to the eta grid so that the spectral
support declared by each constructor is exact on the grid.  A traveling-wave
field built this way has identically vanishing discrete density at its
construction time; during evolution the periodized velocity domain leaks a
small residual density proportional to the bump's physical tails at |v| = L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Frame, PhaseSpaceField, Rep, SpectralGrid


@dataclass(frozen=True)
class BumpProfile:
    """
    Real, even velocity profile whose grid spectrum is exactly supported in
    |eta| <= support_radius.

    taper holds the spectral values psi_hat(eta_n) on the signed index range
    -n_support..n_support; psi_hat evaluates to exactly these on grid
    frequencies and to the band-limited interpolation off the grid.
    """

    grid: SpectralGrid
    support_radius: float
    samples: np.ndarray        # psi(v) on the grid, real
    taper: np.ndarray          # psi_hat on indices -n_support..n_support
    n_support: int

    @property
    def l1_norm(self) -> float:
        """deta-weighted l1 norm of the spectral taper."""
        return float(self.grid.deta * np.abs(self.taper).sum())

    def psi_hat(self, etas) -> np.ndarray:
        """Band-limited evaluation of the bump spectrum at arbitrary real eta."""
        g = self.grid
        etas = np.atleast_1d(np.asarray(etas, dtype=float))
        ns = np.arange(-self.n_support, self.n_support + 1)
        # dv * sum_v psi(v) e^{-i eta v} expressed through the taper and the
        # periodic Dirichlet kernel of the v grid
        out = np.zeros(etas.shape, dtype=np.complex128)
        for n, a in zip(ns, self.taper):
            if a != 0.0:
                out += a * _dirichlet(g, n * g.deta - etas) / (2 * g.L)
        return out


def _dirichlet(grid: SpectralGrid, delta) -> np.ndarray:
    """
    S(delta) = dv * sum_m exp(i delta v_m) over the v grid; equals 2L exactly
    when delta is a multiple of Nv*deta that aliases to zero, and 0 at all
    other grid multiples of deta.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    half = 0.5 * delta * grid.dv
    num = np.sin(delta * grid.L)
    den = np.sin(half)
    out = np.empty(delta.shape, dtype=np.complex128)
    small = np.abs(den) < 1e-9
    big = ~small
    out[big] = grid.dv * num[big] / den[big] * np.exp(-1j * half[big])
    if np.any(small):
        # near delta = j * Nv * deta: limit value +-2L with sinc corrections
        period = grid.Nv * grid.deta
        j = np.rint(delta[small] / period)
        xi = delta[small] - j * period
        sign = np.where((j.astype(int) * grid.Nv) % 2 == 0, 1.0, -1.0)
        ratio = np.sinc(xi * grid.L / np.pi) / np.sinc(xi * grid.dv / (2 * np.pi))
        out[small] = 2 * grid.L * sign * ratio * np.exp(-1j * 0.5 * xi * grid.dv)
    return out


def band_limited_bump(grid: SpectralGrid, r: float = 0.1) -> BumpProfile:
    """
    Bump with cosine-squared spectral taper on |eta| <= r, zero outside
    (exactly, by construction in spectral space), normalized to psi_hat(0) = 1.
    """
    n = int(np.floor(r / grid.deta))
    if n < 2:
        l_min = 2 * np.pi / r
        raise ValueError(
            f"support radius r={r} covers fewer than 2 eta-grid modes "
            f"(deta={grid.deta:.4g}); need L >= {l_min:.1f}")
    ns = np.arange(-n, n + 1)
    taper = np.cos(np.pi * (ns * grid.deta) / (2 * r)) ** 2
    # psi(v) = (1/2L) sum_n taper_n e^{i eta_n v}; then dv*sum psi e^{-i eta_j v} = taper_j
    samples = (taper[None, :] * np.exp(1j * np.outer(grid.v, ns * grid.deta))).sum(axis=1)
    samples = samples.real / (2 * grid.L)
    return BumpProfile(grid, r, samples, taper, n)


def traveling_waves(grid: SpectralGrid, bump: BumpProfile, coeffs, t: float,
                    sobolev_index: float = 0.0, eta_seq=None) -> PhaseSpaceField:
    """
    Force-free traveling-wave data at time t:

        f = Re sum_{k>=1} c_k (1+k^2)^(s/2) e^{ikx} e^{i(-eta_k - k t) v} psi(v)

    with eta_k = k by default (or a supplied positive increasing sequence).
    The wave frequencies are snapped to the eta grid, so the discrete density
    vanishes identically at construction.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if not t > 0:
        raise ValueError("traveling-wave data needs t > 0")
    if eta_seq is None:
        eta_seq = [float(k) for k in range(1, len(coeffs) + 1)]
    if len(eta_seq) != len(coeffs):
        raise ValueError("eta_seq must match coeffs in length")
    data = np.zeros(grid.shape(), dtype=np.complex128)
    for i, c in enumerate(coeffs, start=1):
        k = i
        target = -(eta_seq[i - 1] + k * t)
        if abs(target) + bump.support_radius > grid.eta_max:
            raise ValueError(
                f"mode k={k}: frequency {target:.3f} (+bump) exceeds the eta window "
                f"+-{grid.eta_max:.2f}; enlarge Nv or reduce t")
        freq = grid.snap_eta(target)
        weight = c * (1 + k * k) ** (sobolev_index / 2.0)
        data += weight * np.exp(1j * k * grid.x)[:, None] * \
            (np.exp(1j * freq * grid.v) * bump.samples)[None, :]
    return PhaseSpaceField(grid, data.real.astype(np.complex128), Rep.XV,
                           Frame.PHYSICAL, time=float(t))


def two_wave_data(grid: SpectralGrid, epsilon: float, k: int, eta: float,
                  bump: BumpProfile, t0: float) -> PhaseSpaceField:
    """
    Two-wave interaction data at time t0:

        f = eps cos(x - t0 v) psi(v) + eps sin(k x + (eta - k t0) v) psi(v)

    valid only in the window |t0| > 0.1 and |eta - k t0| > 0.1 where the pair
    is an exact force-free solution; violations are rejected.
    """
    if abs(t0) <= 0.1:
        raise ValueError(f"two-wave data needs |t0| > 0.1 (got {t0})")
    if abs(eta - k * t0) <= 0.1:
        raise ValueError(f"two-wave data needs |eta - k*t0| > 0.1 (got {eta - k * t0:.3f})")
    f1 = grid.snap_eta(-t0)
    f2 = grid.snap_eta(eta - k * t0)
    if max(abs(f1), abs(f2)) + bump.support_radius > grid.eta_max:
        raise ValueError("wave frequency exceeds the eta window; enlarge Nv")
    w1 = np.real(np.exp(1j * grid.x)[:, None] * np.exp(1j * f1 * grid.v)[None, :])
    w2 = np.imag(np.exp(1j * k * grid.x)[:, None] * np.exp(1j * f2 * grid.v)[None, :])
    data = epsilon * (w1 + w2) * bump.samples[None, :]
    return PhaseSpaceField(grid, data.astype(np.complex128), Rep.XV,
                           Frame.PHYSICAL, time=float(t0))


def single_mode_data(grid: SpectralGrid, epsilon: float, k0: int,
                     bump: BumpProfile, t0: float = 0.0) -> PhaseSpaceField:
    """Single-mode benchmark data f = eps cos(k0 x) psi(v)."""
    if k0 < 1:
        raise ValueError("k0 must be a positive integer")
    data = epsilon * np.cos(k0 * grid.x)[:, None] * bump.samples[None, :]
    return PhaseSpaceField(grid, data.astype(np.complex128), Rep.XV,
                           Frame.PHYSICAL, time=float(t0))

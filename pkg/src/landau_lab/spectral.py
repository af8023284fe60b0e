"""
Grids, Fourier transforms, densities, the electrostatic force, and the
gliding-coordinate shear for 1D phase-space fields on T_x x [-L, L)_v.

Conventions (fixed once, used everywhere):

    forward   f_hat(k, eta) = dx*dv * sum_{x,v} f(x,v) exp(-i k x - i eta v)
    inverse   f(x, v) = 1/(2*pi*2*L) * sum_{k,eta} f_hat(k,eta) exp(+i k x + i eta v)

x lives on [0, 2*pi) with integer wavenumbers k; v lives on [-L, L) with
wavenumbers eta on a uniform grid of spacing pi/L.  Spectral arrays are stored
in numpy's natural FFT order (use ``grid.k`` / ``grid.eta`` to label slots).
Density coefficients are Fourier-series coefficients: rho(x) = sum_k rho_hat(k) e^{ikx}.

All field values are immutable; every operation returns a new field.
"""

from __future__ import annotations

import enum
import json
import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np

SNAPSHOT_MAGIC = b"VPSNAP01"
_HEADER = struct.Struct("<8sii d d ii 24x")  # magic, Nx, Nv, L, time, rep, frame


class Rep(enum.Enum):
    """Representation of a phase-space field."""

    XV = "xv"          # physical in x and v
    KV = "kv"          # spectral in x, physical in v
    KETA = "keta"      # spectral in x and v


class Frame(enum.Enum):
    """Coordinate frame: plain physical coordinates or gliding (sheared) ones."""

    PHYSICAL = "physical"
    GLIDING = "gliding"


@dataclass(frozen=True)
class SpectralGrid:
    """
    Discretization of (x, v) in T x [-L, L) together with its dual grid.

    Parameters
    ----------
    Nx, Nv : even positive ints, numbers of x samples / v samples.
    L      : velocity half-width; v in [-L, L).

    Derived quantities satisfy dv * deta * Nv = 2*pi exactly, k and eta grids
    contain 0, and eta spacing is pi/L.
    """

    Nx: int
    Nv: int
    L: float

    def __post_init__(self):
        if self.Nx <= 0 or self.Nx % 2 or self.Nv <= 0 or self.Nv % 2:
            raise ValueError("Nx and Nv must be positive even integers")
        if not self.L > 0:
            raise ValueError("L must be positive")
        set_ = object.__setattr__
        set_(self, "dx", 2 * np.pi / self.Nx)
        set_(self, "dv", 2 * self.L / self.Nv)
        set_(self, "deta", np.pi / self.L)
        set_(self, "x", self.dx * np.arange(self.Nx))
        set_(self, "v", -self.L + self.dv * np.arange(self.Nv))
        kint = np.rint(np.fft.fftfreq(self.Nx) * self.Nx).astype(int)
        nint = np.rint(np.fft.fftfreq(self.Nv) * self.Nv).astype(int)
        set_(self, "k_int", kint)
        set_(self, "k", kint.astype(float))
        set_(self, "eta_index", nint)
        set_(self, "eta", self.deta * nint)
        # exact +-1 phase carrying the -L offset of the v axis: exp(i*eta_n*L) = (-1)^n
        set_(self, "v_phase", np.where(nint % 2 == 0, 1.0, -1.0))
        for name in ("x", "v", "k_int", "k", "eta_index", "eta", "v_phase"):
            getattr(self, name).setflags(write=False)

    @property
    def eta_max(self) -> float:
        """Largest magnitude on the eta grid (the Nv/2 slot)."""
        return self.deta * (self.Nv // 2)

    @property
    def k_max(self) -> int:
        return self.Nx // 2

    def snap_eta(self, eta: float) -> float:
        """Nearest on-grid velocity frequency."""
        return self.deta * round(eta / self.deta)

    def shape(self) -> tuple:
        return (self.Nx, self.Nv)


@dataclass(frozen=True)
class PhaseSpaceField:
    """Complex coefficient array for a phase-space field in a declared representation."""

    grid: SpectralGrid
    data: np.ndarray
    rep: Rep
    frame: Frame = Frame.PHYSICAL
    time: float | None = None
    aliasing_warning: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.shape != self.grid.shape():
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.shape()}")
        object.__setattr__(self, "data", data)

    def with_data(self, data, **kw) -> "PhaseSpaceField":
        return replace(self, data=data, **kw)


@dataclass(frozen=True)
class SpatialDensity:
    """Fourier-series coefficients rho_hat(k) of the spatial density, natural FFT order."""

    grid: SpectralGrid
    values: np.ndarray
    time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.complex128))

    def coeff(self, k: int) -> complex:
        return complex(self.values[k % self.grid.Nx])

    def abs_modes(self, k_max: int) -> np.ndarray:
        """|rho_hat(k)| for k = 0..k_max."""
        return np.abs(self.values[: k_max + 1])


@dataclass(frozen=True)
class ForceField:
    """Fourier-series coefficients F_hat(k) of the self-consistent force."""

    grid: SpectralGrid
    values: np.ndarray
    time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.complex128))

    def physical(self) -> np.ndarray:
        """Sampled F(x) = sum_k F_hat(k) e^{ikx}."""
        return np.fft.ifft(self.values) * self.grid.Nx


# ---------------------------------------------------------------------------
# transforms

def _x_forward(grid, data):
    return grid.dx * np.fft.fft(data, axis=0)


def _x_inverse(grid, data):
    return np.fft.ifft(data, axis=0) / grid.dx


def _v_forward(grid, data):
    return grid.dv * grid.v_phase[None, :] * np.fft.fft(data, axis=1)


def _v_inverse(grid, data):
    return np.fft.ifft(data * grid.v_phase[None, :], axis=1) / grid.dv


def transform(field: PhaseSpaceField, target: Rep) -> PhaseSpaceField:
    """Convert a field between XV, KV and KETA under the package conventions."""
    if not np.all(np.isfinite(field.data)):
        raise ValueError("field data contains non-finite entries")
    if field.rep == target:
        return field
    g, d = field.grid, field.data
    route = (field.rep, target)
    if route == (Rep.XV, Rep.KV):
        out = _x_forward(g, d)
    elif route == (Rep.KV, Rep.KETA):
        out = _v_forward(g, d)
    elif route == (Rep.XV, Rep.KETA):
        out = _v_forward(g, _x_forward(g, d))
    elif route == (Rep.KV, Rep.XV):
        out = _x_inverse(g, d)
    elif route == (Rep.KETA, Rep.KV):
        out = _v_inverse(g, d)
    elif route == (Rep.KETA, Rep.XV):
        out = _x_inverse(g, _v_inverse(g, d))
    else:  # pragma: no cover
        raise ValueError(f"no route {route}")
    return field.with_data(out, rep=target)


def density(field: PhaseSpaceField) -> SpatialDensity:
    """
    Spatial density of a physical-frame field: rho(x) = dv * sum_v f(x, v),
    returned as Fourier-series coefficients rho_hat(k).
    """
    if field.frame == Frame.GLIDING:
        if field.time is None:
            raise ValueError("gliding-frame field without a time tag cannot be integrated")
        field = glide(field, "to_physical")
    g = field.grid
    if field.rep == Rep.XV:
        rho = g.dv * field.data.sum(axis=1)
        vals = np.fft.fft(rho) / g.Nx
    elif field.rep == Rep.KV:
        vals = g.dv * field.data.sum(axis=1) / (2 * np.pi)
    else:  # KETA: eta = 0 slice
        vals = field.data[:, 0] / (2 * np.pi)
    return SpatialDensity(g, vals, time=field.time)


def poisson_force(rho: SpatialDensity) -> ForceField:
    """
    Electrostatic force from the density via the multiplier F_hat(k) = rho_hat(k)/(i k),
    with the k = 0 (neutralizing background) mode projected out.
    """
    g = rho.grid
    if abs(rho.values[0]) > 1e-8:
        warnings.warn(f"density has mean mode |rho_hat(0)| = {abs(rho.values[0]):.3e}; "
                      "it never forces", stacklevel=2)
    out = np.zeros_like(rho.values)
    nz = g.k_int != 0
    out[nz] = rho.values[nz] / (1j * g.k[nz])
    return ForceField(g, out, time=rho.time)


def glide(field: PhaseSpaceField, direction: str, t: float | None = None) -> PhaseSpaceField:
    """
    Exact shear between physical and gliding coordinates, g(t,x,v) = f(t,x+tv,v),
    realized as multiplication by exp(+-i k v t) in the KV representation.

    direction is "to_gliding" or "to_physical"; t defaults to the field's time tag.
    The shear is pointwise exact on the samples; content pushed past the eta
    window wraps around, which is flagged (not an error).
    """
    if direction not in ("to_gliding", "to_physical"):
        raise ValueError("direction must be 'to_gliding' or 'to_physical'")
    if t is None:
        t = field.time
    if t is None:
        raise ValueError("glide needs a time: field has no time tag and none was given")
    want = Frame.GLIDING if direction == "to_gliding" else Frame.PHYSICAL
    if field.frame == want:
        return field
    g = field.grid
    kv = transform(field, Rep.KV)
    sign = +1.0 if direction == "to_gliding" else -1.0
    out = kv.data * np.exp(1j * sign * t * np.outer(g.k, g.v))
    warn = field.aliasing_warning or (g.k_max * abs(t) > 2 * g.eta_max)
    moved = kv.with_data(out, frame=want, aliasing_warning=warn)
    return transform(moved, field.rep)


def eta_derivative(field: PhaseSpaceField) -> PhaseSpaceField:
    """
    d/d(eta) of the field's (k, eta) spectrum, computed exactly as the
    transform of (-i v) * data in a v-physical representation.  Returns KETA.
    """
    g = field.grid
    kv = transform(field, Rep.KV)
    return transform(kv.with_data(kv.data * (-1j * g.v)[None, :]), Rep.KETA)


def spectral_eval(field: PhaseSpaceField, k: int, etas) -> np.ndarray:
    """
    Band-limited evaluation of f_hat(k, eta) at arbitrary real eta via the
    modulation identity f_hat(k, eta) = dv * sum_v f_hat_kv(k, v) e^{-i eta v}.
    """
    g = field.grid
    kv = transform(field, Rep.KV)
    row = kv.data[k % g.Nx]
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    return g.dv * (np.exp(-1j * np.outer(etas, g.v)) @ row)


def gliding_density_slice(field: PhaseSpaceField, t: float, ks) -> np.ndarray:
    """
    rho_hat(k) predicted from the gliding spectrum: g_hat(k, k t) / (2 pi),
    evaluated band-limited (exact when k*t lies on the eta grid).
    """
    gl = glide(field, "to_gliding", t=field.time if field.time is not None else t)
    out = np.empty(len(ks), dtype=np.complex128)
    for i, k in enumerate(ks):
        out[i] = spectral_eval(gl, k, [k * t])[0] / (2 * np.pi)
    return out


def l2_norm(field: PhaseSpaceField) -> float:
    """Discrete L2 norm, identical (Parseval) in every representation."""
    g, d = field.grid, field.data
    s = float(np.sum(np.abs(d) ** 2))
    if field.rep == Rep.XV:
        return np.sqrt(s * g.dx * g.dv)
    if field.rep == Rep.KV:
        return np.sqrt(s * g.dv / (2 * np.pi))
    return np.sqrt(s / (2 * np.pi * 2 * g.L))


def mass(field: PhaseSpaceField) -> float:
    """dx*dv * sum f, i.e. the (0,0) spectral coefficient."""
    keta = transform(field, Rep.KETA)
    return float(keta.data[0, 0].real)


# ---------------------------------------------------------------------------
# binary snapshots

_REP_CODE = {Rep.XV: 0, Rep.KV: 1, Rep.KETA: 2}
_FRAME_CODE = {Frame.PHYSICAL: 0, Frame.GLIDING: 1}


def write_snapshot(field: PhaseSpaceField, path, sidecar: dict | None = None) -> None:
    """
    Write the 64-byte-header binary snapshot: magic "VPSNAP01", Nx, Nv, L, time,
    rep, frame (little endian), then row-major complex128 data, k/x-major.
    """
    g = field.grid
    t = float("nan") if field.time is None else float(field.time)
    header = _HEADER.pack(SNAPSHOT_MAGIC, g.Nx, g.Nv, float(g.L), t,
                          _REP_CODE[field.rep], _FRAME_CODE[field.frame])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.data, dtype="<c16").tobytes())
    if sidecar is not None:
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)


def read_snapshot(path, grid: SpectralGrid | None = None) -> PhaseSpaceField:
    """Read a snapshot written by :func:`write_snapshot`."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, nx, nv, L, t, rep_c, frame_c = _HEADER.unpack(raw)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: bad snapshot magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<c16").reshape(nx, nv).astype(np.complex128)
    if grid is None:
        grid = SpectralGrid(nx, nv, L)
    elif (grid.Nx, grid.Nv) != (nx, nv) or abs(grid.L - L) > 1e-12 * max(1.0, L):
        raise ValueError(f"{path}: snapshot grid ({nx},{nv},L={L}) does not match")
    rep = {v: k for k, v in _REP_CODE.items()}[rep_c]
    frame = {v: k for k, v in _FRAME_CODE.items()}[frame_c]
    time = None if np.isnan(t) else t
    return PhaseSpaceField(grid, data, rep, frame, time)

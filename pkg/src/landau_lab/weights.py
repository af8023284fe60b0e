"""
Gevrey-weighted diagnostics: the cutoff weight and its parameter family, the
weighted energies of the gliding distribution and of the density, initial-data
admissibility, the interaction kernel, and the numerical smallness sweep for
the kernel bound.

The weight is W(k, eta) = min(eps^beta <k,eta>^(1/3), eps^beta' <k,eta>^gamma)
with <k,eta> = sqrt(1 + k^2 + eta^2); under the derived parameter family the
two branches cross exactly at <k,eta> = eta_cutoff.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .spectral import PhaseSpaceField, Rep, SpatialDensity

EXP_MAX = 709.0  # log of the largest double

DIST_BOUND_FACTOR = 16.0   # stability region: E_dist <= 16 eps^2
RHO_BOUND_FACTOR = 4.0     # stability region: E_rho  <= 4 eps (1+t)^(1-sigma)


class ConstraintViolation(ValueError):
    """A parameter constraint failed; .constraint names it."""

    def __init__(self, constraint: str, detail: str):
        super().__init__(f"{constraint}: {detail}")
        self.constraint = constraint


@dataclass(frozen=True)
class GevreyParams:
    """
    Constant tuple parametrizing the cutoff weight and the weighted energies.

    epsilon    : perturbation scale in (0, 0.1]
    N          : horizon exponent, horizon T = epsilon^(-N)
    sigma      : Sobolev power, > 3
    alpha      : density norm power in (1/3, 1/2)
    beta, beta_prime : epsilon powers of the two weight branches
    gamma      : sub-1/3 Gevrey exponent of the upper branch
    eta_cutoff : branch crossover scale, >= T^2
    C          : weight amplitude (auto-selected by the bound sweep)
    """

    epsilon: float
    N: float
    sigma: float
    alpha: float
    beta: float
    beta_prime: float
    gamma: float
    eta_cutoff: float
    C: float = 1.0

    @property
    def horizon(self) -> float:
        return self.epsilon ** (-self.N)


def constraint_table(p: GevreyParams) -> list[tuple[str, bool, str]]:
    """One row (name, ok, detail) per parameter constraint."""
    T = p.horizon
    rows = []

    def row(name, ok, detail):
        rows.append((name, bool(ok), detail))

    row("epsilon_range", 0 < p.epsilon <= 0.1, f"epsilon = {p.epsilon} in (0, 0.1]")
    row("sigma_range", p.sigma > 3, f"sigma = {p.sigma} > 3")
    row("alpha_range", 1 / 3 < p.alpha < 1 / 2, f"alpha = {p.alpha} in (1/3, 1/2)")
    row("beta_upper", 0 <= p.beta <= 1 / (3 * p.sigma),
        f"beta = {p.beta:.6g} <= 1/(3 sigma) = {1 / (3 * p.sigma):.6g}")
    row("beta_prime_upper", 0 <= p.beta_prime <= p.gamma / p.sigma,
        f"beta' = {p.beta_prime:.6g} <= gamma/sigma = {p.gamma / p.sigma:.6g}")
    row("gamma_upper", p.gamma <= 1 / 3 + 1e-15, f"gamma = {p.gamma:.6g} <= 1/3")
    # transport constraint, equivalently alpha > 1 - 2*gamma
    row("gamma_lower", p.gamma >= (1 - p.alpha) / 2 - 1e-15,
        f"gamma = {p.gamma:.6g} >= (1-alpha)/2 = {(1 - p.alpha) / 2:.6g} "
        f"(alpha > 1 - 2 gamma = {1 - 2 * p.gamma:.6g})")
    lhs = (p.beta_prime - p.beta) * math.log(p.epsilon)
    rhs = (1 / 3 - p.gamma) * math.log(p.eta_cutoff)
    row("crossover_identity", abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs)),
        f"eps^(beta'-beta) = eta_cutoff^(1/3-gamma): log-lhs {lhs:.12g}, log-rhs {rhs:.12g}")
    row("cutoff_scale", p.eta_cutoff >= T * T * (1 - 1e-12),
        f"eta_cutoff = {p.eta_cutoff:.6g} >= T^2 = {T * T:.6g}")
    row("weight_amplitude", p.C > 0, f"C = {p.C} > 0")
    return rows


def derive_params(epsilon: float, N: float, sigma: float, alpha: float,
                  C: float = 1.0, require_transport: bool = True) -> GevreyParams:
    """
    Parameter family for horizon T = epsilon^(-N):

        eta_cutoff = epsilon^(-2N),  beta = 1/(3 sigma),  beta' = 0,
        gamma = 1/3 - beta/(2N).

    Raises ConstraintViolation naming the first failed constraint.  The
    transport constraint (gamma_lower, alpha > 1 - 2 gamma) can be downgraded
    to a report with require_transport=False: the bound sweep is well defined
    without it.
    """
    beta = 1.0 / (3.0 * sigma)
    p = GevreyParams(
        epsilon=epsilon, N=N, sigma=sigma, alpha=alpha,
        beta=beta, beta_prime=0.0, gamma=1.0 / 3.0 - beta / (2.0 * N),
        eta_cutoff=epsilon ** (-2.0 * N), C=C)
    for name, ok, detail in constraint_table(p):
        if not ok and (name != "gamma_lower" or require_transport):
            raise ConstraintViolation(name, detail)
    return p


def transport_constraint_binds(p: GevreyParams) -> bool:
    """True when alpha <= 1 - 2*gamma, i.e. the gamma_lower row fails."""
    return p.gamma < (1 - p.alpha) / 2 - 1e-15


@dataclass(frozen=True)
class CutoffWeight:
    """The two-branch cutoff weight W(k, eta) with continuous min-form crossover."""

    params: GevreyParams

    def bracket(self, k, eta):
        """<k, eta> = sqrt(1 + k^2 + eta^2)."""
        k = np.asarray(k, dtype=float)
        eta = np.asarray(eta, dtype=float)
        return np.sqrt(1.0 + k * k + eta * eta)

    def below(self, k, eta):
        return self.params.epsilon ** self.params.beta * self.bracket(k, eta) ** (1.0 / 3.0)

    def above(self, k, eta):
        return self.params.epsilon ** self.params.beta_prime * self.bracket(k, eta) ** self.params.gamma

    def __call__(self, k, eta):
        return np.minimum(self.below(k, eta), self.above(k, eta))


def cutoff_weight(params: GevreyParams, k, eta):
    return CutoffWeight(params)(k, eta)


def z_parameter(t: float, horizon: float, t_min: float = 0.0) -> float:
    """
    Logarithmic weight parameter z(t) = 2 log(T) - log(t) on (0, T]; inputs
    below t_min are clamped to t_min.
    """
    if t > horizon * (1 + 1e-12):
        raise ValueError(f"t = {t} exceeds the horizon T = {horizon}")
    t_eff = max(float(t), float(t_min))
    if t_eff <= 0:
        raise ValueError("z parameter needs t > 0 (or a positive t_min clamp)")
    return 2.0 * math.log(horizon) - math.log(t_eff)


class WeightOverflow(FloatingPointError):
    """The exponential weight overflows double precision at (k, eta)."""

    def __init__(self, k, eta, exponent):
        super().__init__(
            f"exp weight overflow at (k, eta) = ({k:g}, {eta:g}): exponent {exponent:.1f}; "
            "shrink z or the spectral support")
        self.k, self.eta, self.exponent = k, eta, exponent


def _weighted_quadratic(grid, mag2, z, p: GevreyParams, double_c: bool):
    """sum_k deta * sum_eta exp(c*C*z*W) <k,eta>^(2 sigma) * mag2, c = 2 or 1."""
    W = CutoffWeight(p)
    kk, ee = np.meshgrid(grid.k, grid.eta, indexing="ij")
    expo = (2.0 if double_c else 1.0) * p.C * z * W(kk, ee)
    live = mag2 > 0
    bad = live & (expo > EXP_MAX)
    if np.any(bad):
        i, j = np.unravel_index(np.argmax(np.where(bad, expo, -np.inf)), expo.shape)
        raise WeightOverflow(grid.k[i], grid.eta[j], expo[i, j])
    brack2 = 1.0 + kk * kk + ee * ee
    terms = np.where(live, np.exp(np.where(live, expo, 0.0)) * brack2 ** p.sigma * mag2, 0.0)
    return float(grid.deta * terms.sum())


def _noise_mask(mag2: np.ndarray, floor: float) -> np.ndarray:
    """Zero entries below floor^2 * max(mag2): spectral roundoff junk."""
    if floor <= 0:
        return mag2
    peak = mag2.max()
    if peak == 0.0:
        return mag2
    return np.where(mag2 >= (floor * floor) * peak, mag2, 0.0)


def distribution_energy(g: PhaseSpaceField, dg: PhaseSpaceField, z: float,
                        params: GevreyParams, noise_floor: float = 0.0) -> float:
    """
    Weighted energy of the gliding distribution and its eta derivative:

        sum_k deta sum_eta exp(2 C z W(k,eta)) <k,eta>^(2 sigma) (|g|^2 + |dg|^2)

    on the KETA coefficients.  noise_floor (relative) zeroes spectral slots
    below floor * max|.|, keeping roundoff out of the strongly weighted tail.
    """
    if g.rep != Rep.KETA or dg.rep != Rep.KETA:
        raise ValueError("distribution_energy expects KETA fields")
    if g.grid is not dg.grid and g.grid != dg.grid:
        raise ValueError("fields live on different grids")
    mag2 = np.abs(g.data) ** 2 + np.abs(dg.data) ** 2
    mag2 = _noise_mask(mag2, noise_floor)
    if mag2.max() == 0.0:
        return 0.0
    return _weighted_quadratic(g.grid, mag2, z, params, double_c=True)


def density_energy(rho: SpatialDensity, t: float, z: float, params: GevreyParams,
                   noise_floor_abs: float = 0.0) -> float:
    """
    Weighted sup of the density over k != 0:

        max_k |k|^(-alpha) exp(C z W(k, k t)) <k, k t>^sigma |rho_hat(k)|

    noise_floor_abs zeroes coefficients with |rho_hat| below it.
    """
    g = rho.grid
    vals = np.abs(rho.values).copy()
    vals[0] = 0.0
    if noise_floor_abs > 0:
        vals[vals < noise_floor_abs] = 0.0
    if vals.max() == 0.0:
        return 0.0
    k = g.k
    nz = vals > 0
    W = CutoffWeight(params)
    expo = params.C * z * W(k[nz], k[nz] * t)
    if np.any(expo > EXP_MAX):
        i = int(np.argmax(expo))
        kk = k[nz][i]
        raise WeightOverflow(kk, kk * t, float(expo[i]))
    brack = np.sqrt(1.0 + k[nz] ** 2 * (1.0 + t * t))
    terms = np.abs(k[nz]) ** (-params.alpha) * np.exp(expo) * brack ** params.sigma * vals[nz]
    return float(terms.max())


@dataclass(frozen=True)
class AdmissibilityResult:
    passed: bool
    value: float
    threshold: float


def check_initial_data(f0: PhaseSpaceField, params: GevreyParams,
                       noise_floor: float = 0.0) -> AdmissibilityResult:
    """
    Initial-data admissibility: the <k,eta>^(2 sigma)-weighted sum with weight
    exp(C log(T) W(k,eta)) over (|f0_hat|^2 + |d/deta f0_hat|^2) must not
    exceed epsilon/100.  Stated for sigma = 4, evaluated with 2*sigma generally.
    """
    from .spectral import eta_derivative, transform
    keta = transform(f0, Rep.KETA)
    dketa = eta_derivative(f0)
    mag2 = np.abs(keta.data) ** 2 + np.abs(dketa.data) ** 2
    mag2 = _noise_mask(mag2, noise_floor)
    z0 = math.log(params.horizon)
    value = 0.0 if mag2.max() == 0.0 else _weighted_quadratic(
        f0.grid, mag2, z0, params, double_c=False)
    threshold = params.epsilon / 100.0
    return AdmissibilityResult(value <= threshold, value, threshold)


# ---------------------------------------------------------------------------
# interaction kernel and its smallness sweep

def volterra_kernel(params: GevreyParams, k: int, l: int, t: float, s,
                    z_fn=None):
    """
    Interaction kernel C_{k,l}(t, s) of the weighted density recursion
    (epsilon prefactor excluded):

        exp(C (z(t)-z(s)) W(k,kt)) * exp(C z(s) (W(k,kt)-W(k-l,kt-ls)-W(l,ls)))
        * <k,kt>^sigma <k-l,kt-ls>^(-sigma) <l,ls>^(-sigma)
        * |k|^(-alpha) |l|^alpha * k (t-s) / l

    Vectorized over s.  Both exponents are <= 0 for 0 <= s <= t <= T by
    monotonicity of z and subadditivity of W, so no overflow is possible.
    """
    if l == 0:
        raise ValueError("kernel undefined for l = 0")
    if z_fn is None:
        T = params.horizon
        z_fn = lambda tau: 2.0 * np.log(T) - np.log(tau)
    s = np.asarray(s, dtype=float)
    W = CutoffWeight(params)
    zt, zs = z_fn(t), z_fn(s)
    Wk = W(k, k * t)
    e1 = params.C * (zt - zs) * Wk
    e2 = params.C * zs * (Wk - W(k - l, k * t - l * s) - W(l, l * s))
    br = W.bracket
    poly = (br(k, k * t) ** params.sigma
            * br(k - l, k * t - l * s) ** (-params.sigma)
            * br(l, l * s) ** (-params.sigma))
    pref = abs(k) ** (-params.alpha) * abs(l) ** params.alpha * k * (t - s) / l
    return np.exp(e1 + e2) * poly * pref


@dataclass(frozen=True)
class BoundSweep:
    """Result of the kernel-bound sweep: sup over (k, t) of the weighted sum-integral."""

    c_max: float
    k_star: int
    t_star: float
    table: list            # (k, t, value) rows
    refined_c_max: float
    converged: bool        # refinement moved the max by < 1 %
    params: GevreyParams


def _sweep_cell(params, weight, k, t, l_max, n_base, nodes, wts):
    """sum_{l!=0} int_0^t eps |C_{k,l}(t,s)| <s>^(1-sigma) <t>^(sigma-1) ds."""
    p = params
    T = p.horizon
    zt = 2.0 * math.log(T) - math.log(t)
    Wk = float(weight(k, k * t))
    br_kt = math.sqrt(1.0 + k * k * (1.0 + t * t))
    dec_t = (1.0 + t * t) ** ((p.sigma - 1) / 2.0)
    total = 0.0
    base = np.linspace(0.0, t, n_base + 1)
    for l in range(-l_max, l_max + 1):
        if l == 0:
            continue
        edges = base
        if l != 0 and 0 < k * t / l < t:
            ss = k * t / l
            extra = [max(0.0, ss - w) for w in (4.0 / abs(l), 1.0 / abs(l), 0.25 / abs(l))]
            extra += [min(t, ss + w) for w in (0.25 / abs(l), 1.0 / abs(l), 4.0 / abs(l))]
            edges = np.unique(np.concatenate([base, extra]))
        a, b = edges[:-1], edges[1:]
        s = (a[:, None] + (b - a)[:, None] * nodes[None, :]).ravel()
        w = ((b - a)[:, None] * wts[None, :]).ravel()
        zs = 2.0 * math.log(T) - np.log(s)
        e1 = p.C * (zt - zs) * Wk
        e2 = p.C * zs * (Wk - weight(k - l, k * t - l * s) - weight(l, l * s))
        poly = (br_kt ** p.sigma
                * (1.0 + (k - l) ** 2 + (k * t - l * s) ** 2) ** (-p.sigma / 2.0)
                * (1.0 + l * l * (1.0 + s * s)) ** (-p.sigma / 2.0))
        pref = abs(k) ** (-p.alpha) * abs(l) ** p.alpha * abs(k) * (t - s) / abs(l)
        dec = (1.0 + s * s) ** ((1 - p.sigma) / 2.0) * dec_t
        total += float(np.sum(w * np.exp(e1 + e2) * poly * pref * dec))
    return p.epsilon * total


def _thread_cap() -> int:
    cap = os.environ.get("LANDAU_LAB_THREADS", "")
    try:
        return max(1, int(cap))
    except ValueError:
        return 1


def density_bound_constant(params: GevreyParams, k_max: int, t_grid,
                           l_max: int | None = None, n_base: int = 8,
                           n_gauss: int = 12) -> BoundSweep:
    """
    Composite-quadrature sweep of

        sup_{k, t}  sum_{l != 0}  int_0^t eps |C_{k,l}(t,s)| <s>^(1-sigma) <t>^(sigma-1) ds

    over 1 <= k <= k_max (the sum is even in k) and t in t_grid, with
    Gauss-Legendre panels refined around the resonant ridge s = k t / l.
    The maximizing cell is re-evaluated with doubled panels; a relative move
    above 1 % flags non-convergence.
    """
    if l_max is None:
        l_max = k_max
    t_grid = [float(t) for t in t_grid]
    if not t_grid or min(t_grid) <= 0 or max(t_grid) > params.horizon * (1 + 1e-12):
        raise ValueError("t_grid must lie in (0, T]")
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    nodes, wts = 0.5 * (xg + 1.0), 0.5 * wg
    weight = CutoffWeight(params)
    ks = list(range(1, k_max + 1))

    def row(k):
        return [(k, t, _sweep_cell(params, weight, k, t, l_max, n_base, nodes, wts))
                for t in t_grid]

    threads = _thread_cap()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(row, ks))
    else:
        rows = [row(k) for k in ks]
    table = [cell for r in rows for cell in r]
    k_star, t_star, c_max = max(table, key=lambda c: c[2])
    refined = _sweep_cell(params, weight, k_star, t_star, l_max, 2 * n_base, nodes, wts)
    denom = max(abs(c_max), 1e-300)
    return BoundSweep(c_max, k_star, t_star, table, refined,
                      abs(refined - c_max) <= 0.01 * denom, params)


def auto_weight_constant(params: GevreyParams, k_max: int, t_grid,
                         l_max: int | None = None, target: float = 0.5,
                         exponents=range(-2, 13)) -> tuple[GevreyParams, BoundSweep]:
    """
    Smallest power-of-two C with sweep c_max <= target (the sweep is
    nonincreasing in C since both kernel exponents carry nonpositive factors).
    Returns the params with that C installed plus the accepting sweep.
    """
    last = None
    for j in exponents:
        cand = replace(params, C=float(2.0 ** j))
        last = density_bound_constant(cand, k_max, t_grid, l_max=l_max)
        if last.c_max <= target:
            return cand, last
    raise RuntimeError(
        f"no power-of-two C up to 2^{max(exponents)} reaches c_max <= {target} "
        f"(last c_max = {last.c_max:.3g})")


# ---------------------------------------------------------------------------
# exponential decay bounds

@dataclass(frozen=True)
class ExpBoundResult:
    worst_ratio: float
    witness_k: float
    witness_eta: float
    variant: str
    C1: float


def exp_decay_bound_check(params: GevreyParams, C1: float, n_samples: int,
                          variant: str = "linear", seed: int = 0,
                          k_span: int = 64) -> ExpBoundResult:
    """
    Sampled check of exp(-C1 W(k,eta)) <= RHS with

        variant "linear":  C1^(-3)      eps^(-3 beta)        <k,eta>^(-1)      below,
                           C1^(-1/g)    eps^(-3 beta')       <k,eta>^(-1)      above;
        variant "sigma":   C1^(-3 s)    eps^(-3 s beta)      <k,eta>^(-sigma)  below,
                           C1^(-s/g)    eps^(-3 s beta')     <k,eta>^(-sigma)  above.

    Returns the max LHS/RHS ratio over the samples with its witness.  The
    bounds hold with constant 1 only for C1 large enough; small C1 degrades them.
    """
    if C1 <= 0:
        raise ValueError("C1 must be positive")
    if variant not in ("linear", "sigma"):
        raise ValueError("variant must be 'linear' or 'sigma'")
    p = params
    rng = np.random.default_rng(seed)
    ks = rng.integers(-k_span, k_span + 1, size=n_samples).astype(float)
    span = math.log(4.0 * p.eta_cutoff ** 2)
    etas = np.exp(rng.uniform(math.log(0.1), span, size=n_samples))
    etas *= rng.choice([-1.0, 1.0], size=n_samples)
    W = CutoffWeight(p)
    X = W.bracket(ks, etas)
    lhs = np.exp(-C1 * W(ks, etas))
    below = X <= p.eta_cutoff
    s = p.sigma if variant == "sigma" else 1.0
    expo_below = 3.0 * s
    expo_above = s / p.gamma
    rhs = np.where(
        below,
        C1 ** (-expo_below) * p.epsilon ** (-3.0 * s * p.beta) * X ** (-s),
        C1 ** (-expo_above) * p.epsilon ** (-3.0 * s * p.beta_prime) * X ** (-s))
    ratio = lhs / rhs
    i = int(np.argmax(ratio))
    return ExpBoundResult(float(ratio[i]), float(ks[i]), float(etas[i]), variant, C1)


def subadditivity_check(params: GevreyParams, n_samples: int, seed: int = 0,
                        k_span: int = 64) -> tuple[int, float]:
    """
    Randomized check of W(k+k', eta+eta') <= W(k,eta) + W(k',eta') with samples
    spanning both sides of the crossover.  Returns (violations, worst margin).
    """
    p = params
    rng = np.random.default_rng(seed)
    W = CutoffWeight(p)

    def draw(n):
        ks = rng.integers(-k_span, k_span + 1, size=n).astype(float)
        span = math.log(4.0 * p.eta_cutoff ** 2)
        etas = np.exp(rng.uniform(math.log(1e-3), span, size=n))
        return ks, etas * rng.choice([-1.0, 1.0], size=n)

    k1, e1 = draw(n_samples)
    k2, e2 = draw(n_samples)
    lhs = W(k1 + k2, e1 + e2)
    rhs = W(k1, e1) + W(k2, e2)
    margin = rhs - lhs
    return int(np.sum(margin < 0)), float(margin.min())


# ---------------------------------------------------------------------------
# time-series reports and the stability monitor

@dataclass(frozen=True)
class EnergyReport:
    """One diagnostics row: weighted energies, per-mode densities, threshold flags."""

    time: float
    z: float | None
    e_dist: float | None       # distribution energy at z(t)
    e_rho: float | None        # density energy at z(t)
    e_dist_0: float            # distribution energy at z = 0 (fixed reference)
    e_rho_0: float             # density energy at z = 0
    deta_norm: float           # unweighted L2 of the eta-derivative spectrum
    rho_abs: np.ndarray        # |rho_hat(k)|, k = 0..k_report
    dist_ok: bool | None
    rho_ok: bool | None
    valid: bool


def dist_threshold(params: GevreyParams) -> float:
    return DIST_BOUND_FACTOR * params.epsilon ** 2


def rho_threshold(params: GevreyParams, t: float) -> float:
    return RHO_BOUND_FACTOR * params.epsilon * (1.0 + t) ** (1.0 - params.sigma)


@dataclass(frozen=True)
class ThresholdViolation:
    time: float
    quantity: str
    value: float
    threshold: float


def stability_monitor(reports, params: GevreyParams) -> ThresholdViolation | None:
    """
    Fold over time-ordered reports; return the first threshold violation
    (distribution energy above 16 eps^2 or density energy above
    4 eps (1+t)^(1-sigma)), or None for a clean pass.
    """
    last_t = -math.inf
    for r in reports:
        if r.time < last_t:
            raise ValueError("reports are not time-ordered")
        last_t = r.time
        if r.e_dist is not None and r.e_dist > dist_threshold(params):
            return ThresholdViolation(r.time, "distribution_energy", r.e_dist,
                                      dist_threshold(params))
        if r.e_rho is not None and r.e_rho > rho_threshold(params, r.time):
            return ThresholdViolation(r.time, "density_energy", r.e_rho,
                                      rho_threshold(params, r.time))
    return None

"""Signal power evolution under inter-channel stimulated Raman scattering.

Two models are provided. The triangular model assumes a Raman gain that
rises linearly with frequency offset, which gives the power profile in
closed form. The ODE model integrates the coupled power equations for an
arbitrary sampled gain spectrum. ``fit_effective_params`` maps any profile
back onto per-channel (alpha, alpha_bar, C_r) so the closed-form tier can
be used beyond the triangular regime.
"""
import csv
from dataclasses import dataclass
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares
from scipy.special import logsumexp

from .core import EffectiveParams
from .errors import ConvergenceError, DomainError, ValidityError

__all__ = [
    "PowerProfile",
    "TRIANGULAR_VALIDITY_BANDWIDTH",
    "span_z_grid",
    "isrs_log_gain",
    "triangular_profile",
    "linear_gain_spectrum",
    "blow_wood_gain_spectrum",
    "load_gain_spectrum_csv",
    "solve_raman_odes",
    "fit_effective_params",
]

# Linear gain approximation is only trusted up to this total bandwidth.
TRIANGULAR_VALIDITY_BANDWIDTH = 15e12


@dataclass(frozen=True)
class PowerProfile:
    """Per-channel power (W) sampled on ``z`` (m); ``powers[i, j]`` is channel i at z[j]."""

    z: np.ndarray
    powers: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        p = np.atleast_2d(np.asarray(self.powers, dtype=float))
        f = np.asarray(self.frequencies, dtype=float)
        if p.shape != (f.size, z.size):
            raise DomainError(f"power matrix shape {p.shape} does not match "
                              f"({f.size} channels, {z.size} positions)")
        if np.any(p < 0):
            raise DomainError("powers must be non-negative")
        for arr in (z, p, f):
            arr.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "powers", p)
        object.__setattr__(self, "frequencies", f)

    @property
    def launch_powers(self):
        return self.powers[:, 0]

    def total_power(self):
        return self.powers.sum(axis=0)

    def log_gain(self):
        """ln(P_i(z) / P_i(0)) per channel."""
        return np.log(self.powers / self.powers[:, :1])


def span_z_grid(fiber, count=1000):
    """Positions in [0, L] spaced so each interval carries equal fibre loss.

    The spacing is dense near the input where the signal power, and hence
    the profile curvature, is largest.
    """
    if count < 2:
        raise DomainError("a z grid needs at least two points")
    a, L = fiber.alpha, fiber.length
    frac = np.arange(count) / (count - 1)
    z = -np.log1p(frac * np.expm1(-a * L)) / a
    z[0], z[-1] = 0.0, L
    return z


def _log_norm(x, freqs, powers):
    # ln sum_k P_k exp(-x f_k), stable for large |x f_k|
    x = np.asarray(x, dtype=float)
    return logsumexp(-np.multiply.outer(x, freqs), b=powers, axis=-1)


def isrs_log_gain(z, f, grid, fiber, *, normalized=True, alpha=None,
                  alpha_bar=None, raman_slope=None):
    """Natural-log power gain ln(rho(z, f) / rho(0, f)) of the triangular model.

    ``z`` and ``f`` broadcast against each other. With ``normalized`` the
    tilt is divided by the comb-weighted normalisation so that total power
    decays exactly as exp(-alpha z). Without it the first-order exponent
    ``-alpha z - P_tot C_r L_eff(z) f`` is returned.
    """
    alpha = fiber.alpha if alpha is None else alpha
    alpha_bar = fiber.alpha_bar if alpha_bar is None else alpha_bar
    cr = fiber.raman_slope if raman_slope is None else raman_slope
    z = np.asarray(z, dtype=float)
    f = np.asarray(f, dtype=float)
    ptot = grid.total_power
    x = ptot * cr * (-np.expm1(-alpha_bar * z) / alpha_bar)
    out = -alpha * z - x * f
    if normalized and cr != 0.0:
        lognorm = _log_norm(x, grid.frequencies, grid.powers) - math.log(ptot)
        out = out - lognorm
    return out


def triangular_profile(grid, fiber, z_grid=None, *, allow_extrapolation=False,
                       normalized=True):
    """Per-channel power evolution for a gain spectrum linear in frequency.

    Raises :class:`ValidityError` when the optical bandwidth exceeds 15 THz
    unless ``allow_extrapolation`` is set.
    """
    if grid.optical_bandwidth > TRIANGULAR_VALIDITY_BANDWIDTH and not allow_extrapolation:
        raise ValidityError(
            f"optical bandwidth {grid.optical_bandwidth / 1e12:.2f} THz exceeds the "
            f"{TRIANGULAR_VALIDITY_BANDWIDTH / 1e12:.0f} THz range of the linear gain model; "
            "fit effective parameters to an ODE profile instead")
    z = span_z_grid(fiber) if z_grid is None else np.asarray(z_grid, dtype=float)
    if np.any(z < 0):
        raise DomainError("z positions must be non-negative")
    g = isrs_log_gain(z[None, :], grid.frequencies[:, None], grid, fiber,
                      normalized=normalized)
    return PowerProfile(z, grid.powers[:, None] * np.exp(g), grid.frequencies)


def linear_gain_spectrum(raman_slope, max_offset=30e12, points=301):
    """Sampled gain ``C_r * offset`` (1/(W m)) over [0, max_offset]."""
    off = np.linspace(0.0, max_offset, points)
    return off, raman_slope * off


def blow_wood_gain_spectrum(raman_slope, max_offset=30e12, points=3001,
                            tau1=12.2e-15, tau2=32e-15):
    """Gain from the damped-oscillator silica response.

    The response h(t) ~ exp(-t/tau2) sin(t/tau1) peaks near 13 THz. The
    spectrum is scaled so the straight line from the origin to the peak has
    slope ``raman_slope``, which is how the triangular approximation is
    usually drawn; below the peak the true gain then sags under the line.
    """
    off = np.linspace(0.0, max_offset, points)
    w = 2 * math.pi * off
    shape = np.imag(1.0 / ((1 / tau2 - 1j * w) ** 2 + 1 / tau1 ** 2))
    k = int(np.argmax(shape))
    return off, raman_slope * off[k] * shape / shape[k]


def load_gain_spectrum_csv(path):
    """Read a two-column CSV (offset in Hz, gain in 1/(W m)); a header row is allowed."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise DomainError(f"{path}:{lineno}: expected two numeric columns")
    if len(rows) < 2:
        raise DomainError(f"{path}: gain spectrum needs at least two samples")
    arr = np.array(rows)
    order = np.argsort(arr[:, 0])
    return arr[order, 0], arr[order, 1]


def _gain_matrix(grid, gain_spectrum, photon_correction):
    f = grid.frequencies
    off = f[None, :] - f[:, None]          # f_k - f_i
    need = np.abs(off).max()
    if callable(gain_spectrum):
        g = gain_spectrum
    else:
        x, y = (np.asarray(a, dtype=float) for a in gain_spectrum)
        if x.ndim != 1 or x.shape != y.shape:
            raise DomainError("gain spectrum must be two equal-length 1-D arrays")
        if x.min() > 0 or x.max() < need * (1 - 1e-12):
            raise DomainError(
                f"gain spectrum covers [{x.min():.3g}, {x.max():.3g}] Hz but channel "
                f"offsets reach {need:.3g} Hz")

        def g(d):
            return np.interp(d, x, y)
    G = np.sign(off) * g(np.abs(off))
    if photon_correction:
        nu = grid.reference_frequency + f
        ratio = nu[:, None] / nu[None, :]   # nu_i / nu_k
        G = np.where(off < 0, G * ratio, G)
    np.fill_diagonal(G, 0.0)
    return G


def solve_raman_odes(grid, fiber, gain_spectrum, z_grid=None, *,
                     photon_correction=False, rtol=1e-8, atol=1e-12):
    """Integrate dP_i/dz = -alpha P_i + P_i sum_k g(f_k - f_i) P_k over one span.

    ``gain_spectrum`` is either a callable of the non-negative offset or a
    pair of sampled arrays (offset Hz, gain 1/(W m)); it is extended as an
    odd function so a lower-frequency channel gains what a higher one loses.
    With ``photon_correction`` the pump depletion is scaled by nu_i/nu_k.
    The system is integrated in log-power with an adaptive 8th-order
    Runge-Kutta scheme.
    """
    z = span_z_grid(fiber) if z_grid is None else np.asarray(z_grid, dtype=float)
    if z.ndim != 1 or z.size < 1 or np.any(np.diff(z) <= 0) or z[0] < 0:
        raise DomainError("z grid must be strictly increasing and non-negative")
    G = _gain_matrix(grid, gain_spectrum, photon_correction)
    alpha = fiber.alpha

    def rhs(_, y):
        return -alpha + G @ np.exp(y)

    y0 = np.log(grid.powers)
    t_eval = z if z[0] > 0 else z[1:]
    if t_eval.size == 0:
        return PowerProfile(z, grid.powers[:, None].copy(), grid.frequencies)
    sol = solve_ivp(rhs, (0.0, z[-1]), y0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if not sol.success or sol.y.shape[1] != t_eval.size:
        raise ConvergenceError(f"Raman ODE integration failed: {sol.message}",
                               estimate=sol.y, residual=None)
    logp = sol.y if z[0] > 0 else np.hstack([y0[:, None], sol.y])
    return PowerProfile(z, np.exp(logp), grid.frequencies)


def _fit_channel(u, y, a0, bounds_logB):
    """Fit y(u) = -A u - C (1 - exp(-B u)) / B on normalised distance u = z / L.

    B is kept inside ``bounds_logB``; a near-zero tilt otherwise lets B
    drift until the Raman term becomes collinear with the loss term.
    """
    def model(p):
        A, logB, C = p
        B = math.exp(logB)
        return -A * u - C * (-np.expm1(-B * u)) / B

    # coarse scan over B with (A, C) solved linearly, then a joint refinement
    lo, hi = bounds_logB
    best = None
    for logB in np.linspace(lo, hi, 61):
        B = math.exp(logB)
        M = np.column_stack([-u, -(-np.expm1(-B * u)) / B])
        coef, *_ = np.linalg.lstsq(M, y, rcond=None)
        r = float(np.sum((M @ coef - y) ** 2))
        if best is None or r < best[0]:
            best = (r, np.array([coef[0], logB, coef[1]]))
    start = best[1]
    start[1] = min(max(start[1], lo + 1e-9), hi - 1e-9)
    sol = least_squares(lambda p: model(p) - y, start, method="trf",
                        bounds=([-np.inf, lo, -np.inf], [np.inf, hi, np.inf]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    return sol.x, model(sol.x) - y


def fit_effective_params(profile, grid, *, negligible_tilt=1e-10):
    """Match each channel's profile to the triangular-model shape.

    Per channel, ln(P_i(z)/P_i(0)) is fitted in least squares by
    ``-alpha_eff z - P_tot C_r_eff f_i L_eff(z; alpha_bar_eff)``. A channel
    at f_i = 0, or one whose fitted tilt is below ``negligible_tilt``
    (natural-log units over the span), carries no identifiable Raman term;
    its C_r_eff is 0 and alpha_bar_eff = alpha_eff.
    """
    z = np.asarray(profile.z, dtype=float)
    if np.unique(z).size < 3:
        raise DomainError("fitting needs at least three distinct z samples")
    if profile.powers.shape[0] != len(grid):
        raise DomainError("profile and grid have different channel counts")
    if np.any(profile.powers <= 0):
        raise DomainError("profile contains non-positive powers")
    L = float(z.max())
    u = z / L
    ptot = grid.total_power
    logs = profile.log_gain()
    alpha = np.empty(len(grid))
    alpha_bar = np.empty(len(grid))
    cr = np.zeros(len(grid))
    rms = np.empty(len(grid))
    maxdev = np.empty(len(grid))
    for i, f in enumerate(grid.frequencies):
        y = logs[i]
        a_lin = -float(np.dot(u, y) / np.dot(u, u))
        if f == 0.0:
            p, resid = np.array([a_lin, 0.0, 0.0]), -a_lin * u - y
        else:
            logB0 = math.log(max(a_lin, 1e-6))
            p, resid = _fit_channel(u, y, a_lin, (logB0 - math.log(10.0),
                                                  logB0 + math.log(10.0)))
            if abs(p[2]) < negligible_tilt:
                p, resid = np.array([a_lin, 0.0, 0.0]), -a_lin * u - y
        A, logB, C = p
        alpha[i] = A / L
        if C == 0.0:
            alpha_bar[i] = alpha[i]
        else:
            alpha_bar[i] = math.exp(logB) / L
            cr[i] = C / L / (ptot * f)
        rms[i] = math.sqrt(float(np.mean(resid ** 2)))
        maxdev[i] = 10.0 / math.log(10.0) * float(np.max(np.abs(resid)))
    return EffectiveParams(alpha, alpha_bar, cr, rms, maxdev)

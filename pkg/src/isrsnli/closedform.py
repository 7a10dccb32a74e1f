"""Closed-form NLI with the modulation-format correction under ISRS.

All expressions are per span-count ``n`` and per channel of interest (COI).
The XPM correction of one interferer is the sum of an exact first-span
term and a slope that grows linearly with the number of spans beyond the
first; the slope uses a Dirac approximation of the coherent span sum.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .core import EffectiveParams
from .errors import DomainError, SingularityError, ValidityError
from .raman import TRIANGULAR_VALIDITY_BANDWIDTH

__all__ = [
    "PairKernel",
    "NliReport",
    "pair_kernel",
    "asymptotic_bracket",
    "asymptotic_correction_generic",
    "appendix_identity",
    "first_span_link_energy",
    "xpm_correction_pair",
    "total_nli_closedform",
    "snr",
    "eta_from_snr",
]


@dataclass(frozen=True)
class PairKernel:
    """Derived quantities for one (COI, interferer) pair.

    ``phi`` is the span-level coherence phase in s^2, ``phi_ik`` the XPM
    phase mismatch with the -2 pi^2 prefactor used by the closed form and
    ``psi_ik`` the -4 pi^2 variant used inside the approximate link
    function. Attenuation and Raman values are those of the interferer.
    """

    coi: int
    interferer: int
    delta_f: float
    phi: float
    phi_ik: float
    psi_ik: float
    T_k: float
    T_tilde_k: float
    A: float
    alpha: float
    alpha_bar: float
    raman_slope: float


@dataclass(frozen=True)
class NliReport:
    """Per-channel NLI coefficients (1/W^2) and SNR for one evaluation tier."""

    frequencies: np.ndarray
    eta_gn: np.ndarray
    eta_corr: np.ndarray
    eta_total: np.ndarray
    snr: np.ndarray
    tier: str
    span_count: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("frequencies", "eta_gn", "eta_corr", "eta_total", "snr"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def snr_db(self):
        return 10.0 * np.log10(self.snr)

    def eta_db(self, which="total"):
        return 10.0 * np.log10(getattr(self, f"eta_{which}"))


def _params(fiber, effective, count):
    if effective is None:
        return EffectiveParams.uniform(fiber, count)
    if len(effective) != count:
        raise DomainError(f"effective parameters cover {len(effective)} channels, grid has {count}")
    return effective


def pair_kernel(i, k, fiber, grid, effective=None):
    """Build the :class:`PairKernel` for COI ``i`` and interferer ``k``."""
    n = len(grid)
    if not (0 <= i < n and 0 <= k < n):
        raise DomainError(f"channel index out of range for a {n}-channel grid")
    if i == k:
        raise DomainError("COI and interferer must be different channels")
    eff = _params(fiber, effective, n)
    fi, fk = grid.frequencies[i], grid.frequencies[k]
    disp = fiber.beta2 + math.pi * fiber.beta3 * (fi + fk)
    df = fk - fi
    a, ab, cr = float(eff.alpha[k]), float(eff.alpha_bar[k]), float(eff.raman_slope[k])
    ptot = grid.total_power
    A = a + ab
    return PairKernel(
        coi=i, interferer=k, delta_f=df,
        phi=-4.0 * math.pi ** 2 * disp * fiber.length,
        phi_ik=-2.0 * math.pi ** 2 * df * disp,
        psi_ik=-4.0 * math.pi ** 2 * df * disp,
        T_k=(A - ptot * cr * fk) ** 2,
        T_tilde_k=-ptot * cr * fk / ab,
        A=A, alpha=a, alpha_bar=ab, raman_slope=cr,
    )


def asymptotic_bracket(delta_f, B_k):
    """(2|df| - B) ln((2|df| - B)/(2|df| + B)) + 2B, with its limit 2B at |df| = B/2.

    Lies in (0, 2B] and decreases monotonically in |df|.
    """
    adf = np.abs(np.asarray(delta_f, dtype=float))
    B = np.asarray(B_k, dtype=float)
    if np.any(B <= 0):
        raise DomainError("bandwidth must be positive")
    if np.any(adf < B / 2):
        raise DomainError("|delta_f| < B_k/2: channels overlap")
    # ln((1-u)/(1+u)) = -2 atanh(u) with u = B/(2|df|); avoids the
    # cancellation of the direct ratio at large |df|, and u = 1 is the limit 0
    u = B / (2.0 * adf)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(u < 1.0, -2.0 * (2.0 * adf - B) * np.arctanh(np.minimum(u, 0.999)), 0.0)
        log_term = np.where((u >= 0.999) & (u < 1.0),
                            (2.0 * adf - B) * np.log((2.0 * adf - B) / (2.0 * adf + B)), log_term)
    out = log_term + 2.0 * B
    return out if out.ndim else float(out)


def asymptotic_correction_generic(mu_sq, phi, B_k, delta_f, gamma_tilde):
    """Per-span slope of the correction in the asymptotic (large n) limit.

    ``gamma_tilde * mu_sq * 2 pi / (|phi| B_k^2) * bracket``.
    """
    if phi == 0:
        raise SingularityError("phi = 0: the coherent span sum has no Dirac limit")
    return gamma_tilde * mu_sq * 2.0 * math.pi / (abs(phi) * B_k ** 2) * asymptotic_bracket(delta_f, B_k)


def appendix_identity(a, b):
    """Limit slope of the normalisation coefficient, (pi/a^2)[(b-a) ln((b-a)/(a+b)) + 2a].

    Depends on ``b`` only through |b|; the b -> a limit is 2 pi / a.
    """
    if not a > 0:
        raise DomainError("a must be positive")
    b = abs(b)
    if b < a:
        raise DomainError("|b| must be at least a")
    # the bracket is the same expression with |df| = b/2 and B = a
    return math.pi / a ** 2 * asymptotic_bracket(b / 2.0, a)


def _atan_over(phi, c):
    # atan(phi c) / phi with the phi -> 0 limit c
    phi = np.asarray(phi, dtype=float)
    safe = np.where(phi == 0, 1.0, phi)
    return np.where(phi == 0, c, np.arctan(phi * c) / safe)


def first_span_link_energy(phi_ik, B_i, alpha, alpha_bar, T_k):
    """Integral of |mu|^2 over the COI band for the approximate link function.

    Exact for the two-pole link function; ``phi_ik`` follows the -2 pi^2
    convention.
    """
    A = alpha + alpha_bar
    t1 = (T_k - alpha ** 2) / alpha * _atan_over(phi_ik, B_i / alpha)
    t2 = (A ** 2 - T_k) / A * _atan_over(phi_ik, B_i / A)
    return (t1 + t2) / (alpha_bar * (2 * alpha + alpha_bar))


def _pair_matrices(grid, fiber, eff):
    """Vectorised kernel quantities; rows are COIs, columns interferers."""
    f = grid.frequencies
    fi, fk = f[:, None], f[None, :]
    disp = fiber.beta2 + math.pi * fiber.beta3 * (fi + fk)
    df = fk - fi
    a, ab, cr = eff.alpha[None, :], eff.alpha_bar[None, :], eff.raman_slope[None, :]
    A = a + ab
    T = (A - grid.total_power * cr * fk) ** 2
    return dict(df=df, disp=disp, phi=-4.0 * math.pi ** 2 * disp * fiber.length,
                phi_ik=-2.0 * math.pi ** 2 * df * disp, T=T, A=A, a=a, ab=ab)


def _pair_terms(grid, fiber, plan, eff):
    """First-span energies and asymptotic terms for every pair (diagonal zero).

    ``dirac`` is pi T_k / (|phi| B_k^2 alpha^2 A^2) times the bracket, the
    factor multiplying (5/3) Phi n_tilde in the combined expression.
    """
    m = _pair_matrices(grid, fiber, eff)
    nch = len(grid)
    Bi = grid.bandwidths[:, None]
    Bk = grid.bandwidths[None, :]
    off = ~np.eye(nch, dtype=bool)
    first = np.zeros((nch, nch))
    first[off] = first_span_link_energy(m["phi_ik"], Bi, m["a"], m["ab"], m["T"])[off]
    dirac = np.zeros((nch, nch))
    nt = plan.effective_span_count
    if nt:
        phi_abs = np.abs(m["phi"])
        need = off & (grid.kurtoses[None, :] != 0.0)
        bad = need & (phi_abs == 0)
        if np.any(bad):
            i, k = np.argwhere(bad)[0]
            raise SingularityError(f"phi = 0 for COI {i} and interferer {k}")
        with np.errstate(divide="ignore", invalid="ignore"):
            br = np.zeros((nch, nch))
            br[off] = asymptotic_bracket(m["df"][off], np.broadcast_to(Bk, (nch, nch))[off])
            s = math.pi * m["T"] / (phi_abs * Bk ** 2 * m["a"] ** 2 * m["A"] ** 2) * br
        dirac[need] = s[need]
    return first, dirac, m


def _check_validity(grid, effective, allow_extrapolation):
    if (effective is None and not allow_extrapolation
            and grid.optical_bandwidth > TRIANGULAR_VALIDITY_BANDWIDTH):
        raise ValidityError(
            f"optical bandwidth {grid.optical_bandwidth / 1e12:.2f} THz exceeds the linear "
            "Raman gain range; supply effective parameters")


def xpm_correction_pair(i, k, fiber, grid, plan, effective=None):
    """Modulation-format correction from interferer ``k`` on COI ``i`` (1/W^2).

    (80/81) Phi_k (P_k/P_i)^2 gamma^2/B_k times the first-span energy plus
    ``n_tilde`` times the asymptotic slope; Phi is the interferer's.
    """
    kern = pair_kernel(i, k, fiber, grid, effective)
    phi_k = grid.kurtoses[k]
    if phi_k == 0.0:
        return 0.0
    Bi, Bk = grid.bandwidths[i], grid.bandwidths[k]
    pi_, pk = grid.powers[i], grid.powers[k]
    gamma_tilde = 80.0 / 81.0 * phi_k * (pk / pi_) ** 2 * fiber.gamma ** 2 / Bk
    first = float(first_span_link_energy(kern.phi_ik, Bi, kern.alpha, kern.alpha_bar, kern.T_k))
    nt = plan.effective_span_count
    asym = 0.0
    if nt:
        mu_sq = kern.T_k / (kern.alpha ** 2 * kern.A ** 2)
        asym = nt * asymptotic_correction_generic(mu_sq, kern.phi, Bk, kern.delta_f, gamma_tilde)
    return gamma_tilde * first + asym


def _spm(grid, fiber, plan, eff):
    f = grid.frequencies
    phi_i = 1.5 * math.pi ** 2 * (fiber.beta2 + 2 * math.pi * fiber.beta3 * f)
    zero = np.flatnonzero(phi_i == 0)
    if zero.size:
        j = int(zero[0])
        raise SingularityError(f"channel {j} at {f[j]:.6g} Hz sits at zero dispersion")
    a, ab = eff.alpha, eff.alpha_bar
    A = a + ab
    T = (A - grid.total_power * eff.raman_slope * f) ** 2
    B = grid.bandwidths
    n = plan.span_count
    pre = 4.0 / 9.0 * fiber.gamma ** 2 / B ** 2 * math.pi * n ** (1.0 + plan.coherence_exponent)
    pre = pre / (phi_i * ab * (2 * a + ab))
    return pre * ((T - a ** 2) / a * np.arcsinh(phi_i * B ** 2 / (math.pi * a))
                  + (A ** 2 - T) / A * np.arcsinh(phi_i * B ** 2 / (math.pi * A)))


def total_nli_closedform(grid, fiber, plan, effective=None, *, allow_extrapolation=False):
    """Per-channel NLI coefficient of the full closed form.

    ``eta_total`` uses the combined grouping (n + 5/6 Phi) for the
    first-span XPM part and (5/3) Phi pi n_tilde for the slope;
    ``eta_gn`` is the same expression with Phi = 0 and ``eta_corr`` is the
    sum of the per-pair corrections.
    """
    _check_validity(grid, effective, allow_extrapolation)
    eff = _params(fiber, effective, len(grid))
    spm = _spm(grid, fiber, plan, eff)
    first, dirac, _ = _pair_terms(grid, fiber, plan, eff)
    n = plan.span_count
    nt = plan.effective_span_count
    P = grid.powers
    Bk = grid.bandwidths[None, :]
    kurt = grid.kurtoses[None, :]
    pre = 32.0 / 27.0 * (P[None, :] / P[:, None]) ** 2 * fiber.gamma ** 2 / Bk
    gn_terms = pre * (n * first + 0.0)
    total_terms = pre * ((n + 5.0 / 6.0 * kurt) * first + 5.0 / 3.0 * kurt * nt * dirac)
    corr_terms = 80.0 / 81.0 * kurt * (P[None, :] / P[:, None]) ** 2 * fiber.gamma ** 2 / Bk \
        * (first + 2.0 * nt * dirac)
    eta_gn = spm + gn_terms.sum(axis=1)
    eta_total = spm + total_terms.sum(axis=1)
    eta_corr = corr_terms.sum(axis=1)
    ase = plan.ase_per_channel(len(grid))
    return NliReport(grid.frequencies, eta_gn, eta_corr, eta_total, snr(P, ase, eta_total),
                     tier="closed-form", span_count=n,
                     details={"eta_spm": spm, "eta_xpm_gn": eta_gn - spm})


def snr(P, P_ase, eta):
    """P / (P_ase + eta P^3); array arguments broadcast."""
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0):
        raise DomainError("launch power must be positive")
    if np.any(np.asarray(P_ase) < 0) or np.any(np.asarray(eta) < 0):
        raise DomainError("ASE power and NLI coefficient must be non-negative")
    with np.errstate(divide="ignore"):
        out = P / (P_ase + eta * P ** 3)
    return out if np.ndim(out) else float(out)


def eta_from_snr(P, snr_value, P_ase=0.0):
    """Inverse of :func:`snr`: (P/SNR - P_ase) / P^3; infinite SNR gives 0."""
    P = np.asarray(P, dtype=float)
    s = np.asarray(snr_value, dtype=float)
    if np.any(P <= 0):
        raise DomainError("launch power must be positive")
    if np.any(s <= 0):
        raise DomainError("SNR must be positive")
    out = (P / s - P_ase) / P ** 3
    return out if np.ndim(out) else float(out)

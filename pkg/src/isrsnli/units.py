"""Unit conversions applied at the ingestion boundary.

Everything past this module is strict SI: Hz, W, m, s. Attenuation is the
*power* coefficient, so span loss is ``exp(-alpha * L)``.
"""
import math

from scipy.constants import c as SPEED_OF_LIGHT

from .errors import DomainError

__all__ = [
    "SPEED_OF_LIGHT",
    "attenuation_db_per_km_to_natural",
    "attenuation_natural_to_db_per_km",
    "dispersion_to_beta",
    "dbm_to_watt",
    "watt_to_dbm",
    "db_to_linear",
    "linear_to_db",
    "ps_nm_km",
    "ps_nm2_km",
    "per_w_km",
    "raman_slope_per_w_km_thz",
]


def attenuation_db_per_km_to_natural(alpha_db_km):
    """Convert a loss in dB/km to the power attenuation coefficient in 1/m."""
    if alpha_db_km < 0:
        raise DomainError(f"attenuation must be non-negative, got {alpha_db_km} dB/km")
    return alpha_db_km * math.log(10.0) / 10.0 / 1000.0


def attenuation_natural_to_db_per_km(alpha):
    return alpha * 10.0 / math.log(10.0) * 1000.0


def dispersion_to_beta(D, S, reference_wavelength):
    """Return ``(beta2, beta3)`` in s^2/m and s^3/m from D [s/m^2] and S [s/m^3].

    beta2 = -D lambda^2 / (2 pi c)
    beta3 = (lambda / (2 pi c))^2 (lambda^2 S + 2 lambda D)
    """
    lam = reference_wavelength
    if not lam > 0:
        raise DomainError(f"reference wavelength must be positive, got {lam}")
    k = lam / (2.0 * math.pi * SPEED_OF_LIGHT)
    beta2 = -D * lam * k
    beta3 = k * k * (lam * lam * S + 2.0 * lam * D)
    return beta2, beta3


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * math.log10(p_w / 1e-3)


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


# Human-facing unit factors (multiply to get SI).
ps_nm_km = 1e-12 / 1e-9 / 1e3            # ps/(nm km) -> s/m^2
ps_nm2_km = 1e-12 / 1e-18 / 1e3          # ps/(nm^2 km) -> s/m^3
per_w_km = 1e-3                          # 1/(W km) -> 1/(W m)
raman_slope_per_w_km_thz = 1e-3 / 1e12   # 1/(W km THz) -> 1/(W m Hz)

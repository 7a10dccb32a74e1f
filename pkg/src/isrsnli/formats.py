"""Modulation formats and their excess kurtosis.

The excess kurtosis ``E|X|^4 / E^2|X|^2 - 2`` is the only statistic of the
symbol alphabet the XPM correction needs. It is always derived from the
constellation when one is given; formats without an explicit alphabet
(e.g. published shaped designs whose point sets are not at hand) may carry a
user-supplied value instead.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError

__all__ = [
    "ModulationFormat",
    "kurtosis_from_constellation",
    "square_qam",
    "psk",
    "gaussian",
    "maxwell_boltzmann_qam",
    "named_format",
]


def _moments(points, probabilities):
    p2 = np.abs(points) ** 2
    m2 = float(np.dot(probabilities, p2))
    m4 = float(np.dot(probabilities, p2 * p2))
    return m2, m4


@dataclass(frozen=True, eq=False)
class ModulationFormat:
    """A transmitted symbol alphabet.

    ``points``/``probabilities`` are optional; when present the excess kurtosis
    is computed from them and any value passed in is checked against it.
    """

    name: str
    points: np.ndarray | None = None
    probabilities: np.ndarray | None = None
    excess_kurtosis: float | None = field(default=None)

    def __post_init__(self):
        if self.points is None:
            if self.excess_kurtosis is None:
                raise DomainError(f"format {self.name!r} needs a constellation or a kurtosis")
            k = float(self.excess_kurtosis)
            if not k >= -1.0:
                # E|X|^4 >= E^2|X|^2 for every distribution
                raise DomainError(f"excess kurtosis {k} is below the attainable minimum -1")
            object.__setattr__(self, "excess_kurtosis", k)
            return
        pts = np.asarray(self.points, dtype=complex).ravel()
        if self.probabilities is None:
            prob = np.full(pts.size, 1.0 / max(pts.size, 1))
        else:
            prob = np.asarray(self.probabilities, dtype=float).ravel()
        if pts.size == 0:
            raise DomainError("constellation is empty")
        if prob.shape != pts.shape:
            raise DomainError("points and probabilities differ in length")
        if np.any(prob < 0):
            raise DomainError("probabilities must be non-negative")
        if abs(prob.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {prob.sum()!r}, not 1")
        pts.setflags(write=False)
        prob.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probabilities", prob)
        phi = kurtosis_from_constellation(pts, prob)
        if self.excess_kurtosis is not None and abs(self.excess_kurtosis - phi) > 1e-12:
            raise DomainError(
                f"declared kurtosis {self.excess_kurtosis} disagrees with constellation ({phi})"
            )
        object.__setattr__(self, "excess_kurtosis", phi)

    @property
    def has_constellation(self):
        return self.points is not None

    @property
    def is_gaussian(self):
        return self.excess_kurtosis == 0.0

    def sample(self, rng, size):
        """Draw unit-average-power symbols."""
        if self.points is None:
            if self.excess_kurtosis != 0.0:
                raise DomainError(f"cannot sample {self.name!r}: no constellation")
            return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
        m2, _ = _moments(self.points, self.probabilities)
        idx = rng.choice(self.points.size, size=size, p=self.probabilities)
        return self.points[idx] / math.sqrt(m2)

    def __repr__(self):
        return f"ModulationFormat({self.name!r}, excess_kurtosis={self.excess_kurtosis:.6g})"


def kurtosis_from_constellation(points, probabilities=None):
    """Excess kurtosis ``E|X|^4 / E^2|X|^2 - 2`` of a discrete alphabet.

    Accepts either raw arrays or a :class:`ModulationFormat`.
    """
    if isinstance(points, ModulationFormat):
        fmt = points
        if fmt.points is None:
            raise DomainError(f"format {fmt.name!r} has no constellation")
        points, probabilities = fmt.points, fmt.probabilities
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size == 0:
        raise DomainError("constellation is empty")
    if probabilities is None:
        prob = np.full(pts.size, 1.0 / pts.size)
    else:
        prob = np.asarray(probabilities, dtype=float).ravel()
        if abs(prob.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {prob.sum()!r}, not 1")
    m2, m4 = _moments(pts, prob)
    if m2 <= 0.0:
        raise DomainError("constellation has zero second moment")
    return m4 / (m2 * m2) - 2.0


def _qam_points(order):
    side = math.isqrt(order)
    if side * side != order or side < 2:
        raise DomainError(f"square QAM needs an even power of two, got {order}")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    re, im = np.meshgrid(levels, levels)
    return (re + 1j * im).ravel()


def square_qam(order):
    """Uniform square M-QAM (M = 4, 16, 64, ...)."""
    name = "QPSK" if order == 4 else f"{order}-QAM"
    return ModulationFormat(name, _qam_points(order))


def psk(order):
    pts = np.exp(2j * np.pi * np.arange(order) / order)
    return ModulationFormat(f"{order}-PSK", pts)


def gaussian():
    """Circular complex Gaussian symbols (analytic moments, Phi = 0)."""
    return ModulationFormat("Gaussian", excess_kurtosis=0.0)


def maxwell_boltzmann_qam(order, shaping):
    """Probabilistically shaped square QAM with weights ``exp(-shaping |x|^2)``.

    ``shaping`` acts on the unscaled odd-integer lattice; 0 gives uniform QAM.
    """
    if shaping < 0:
        raise DomainError("shaping parameter must be non-negative")
    pts = _qam_points(order)
    w = np.exp(-shaping * np.abs(pts) ** 2)
    return ModulationFormat(f"PS-{order}-QAM({shaping:g})", pts, w / w.sum())


def named_format(name):
    """Resolve the format labels used in configuration documents."""
    key = name.strip().lower().replace("_", "-")
    if key in ("gaussian", "gauss"):
        return gaussian()
    if key in ("qpsk", "4-qam", "4qam"):
        return square_qam(4)
    for suffix in ("-qam", "qam"):
        if key.endswith(suffix):
            head = key[: -len(suffix)]
            if head.isdigit():
                return square_qam(int(head))
    if key.endswith("-psk") and key[:-4].isdigit():
        return psk(int(key[:-4]))
    raise DomainError(f"unknown modulation format {name!r}")

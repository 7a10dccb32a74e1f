"""Data model shared by the closed-form, integral and split-step tiers."""
from dataclasses import dataclass, field, replace
from functools import cached_property
import math

import numpy as np
from scipy.constants import h as PLANCK

from .errors import DomainError
from .formats import ModulationFormat, gaussian
from .units import SPEED_OF_LIGHT, dispersion_to_beta

__all__ = ["Channel", "ChannelGrid", "FiberSpec", "LinkPlan", "EffectiveParams"]


@dataclass(frozen=True)
class Channel:
    center_freq: float      # Hz, relative to the reference carrier
    bandwidth: float        # Hz
    launch_power: float     # W
    modulation: ModulationFormat = field(default_factory=gaussian)

    @property
    def excess_kurtosis(self):
        return self.modulation.excess_kurtosis


@dataclass(frozen=True)
class ChannelGrid:
    """An ordered, non-overlapping WDM comb."""

    channels: tuple
    reference_wavelength: float = 1550e-9

    def __post_init__(self):
        chans = tuple(self.channels)
        object.__setattr__(self, "channels", chans)
        if not chans:
            raise DomainError("a channel grid needs at least one channel")
        if not self.reference_wavelength > 0:
            raise DomainError("reference wavelength must be positive")
        for ch in chans:
            if not ch.bandwidth > 0:
                raise DomainError(f"channel at {ch.center_freq} Hz has non-positive bandwidth")
            if not ch.launch_power > 0:
                raise DomainError(f"channel at {ch.center_freq} Hz has non-positive launch power")
        for a, b in zip(chans, chans[1:]):
            if not b.center_freq > a.center_freq:
                raise DomainError("channels must be strictly ordered by center frequency")
            # Adjacent spacing suffices: ordering makes it hold for every pair.
            if b.center_freq - a.center_freq < 0.5 * (a.bandwidth + b.bandwidth) * (1 - 1e-12):
                raise DomainError(
                    f"channels at {a.center_freq} Hz and {b.center_freq} Hz overlap"
                )

    @classmethod
    def uniform(cls, count, spacing, bandwidth, power, modulation=None,
                reference_wavelength=1550e-9):
        """``count`` channels centred symmetrically around the reference carrier."""
        modulation = modulation if modulation is not None else gaussian()
        offsets = (np.arange(count) - (count - 1) / 2.0) * spacing
        chans = tuple(Channel(float(f), bandwidth, power, modulation) for f in offsets)
        return cls(chans, reference_wavelength)

    def __len__(self):
        return len(self.channels)

    @property
    def channel_count(self):
        return len(self.channels)

    @cached_property
    def frequencies(self):
        return np.array([ch.center_freq for ch in self.channels])

    @cached_property
    def bandwidths(self):
        return np.array([ch.bandwidth for ch in self.channels])

    @cached_property
    def powers(self):
        return np.array([ch.launch_power for ch in self.channels])

    @cached_property
    def kurtoses(self):
        return np.array([ch.excess_kurtosis for ch in self.channels])

    @property
    def total_power(self):
        return math.fsum(ch.launch_power for ch in self.channels)

    @property
    def optical_bandwidth(self):
        lo = self.channels[0].center_freq - self.channels[0].bandwidth / 2
        hi = self.channels[-1].center_freq + self.channels[-1].bandwidth / 2
        return hi - lo

    @property
    def reference_frequency(self):
        return SPEED_OF_LIGHT / self.reference_wavelength

    def index_of(self, center_freq, tol=1.0):
        idx = int(np.argmin(np.abs(self.frequencies - center_freq)))
        if abs(self.frequencies[idx] - center_freq) > tol:
            raise DomainError(f"no channel at {center_freq} Hz")
        return idx

    def with_modulation(self, modulation, indices=None):
        """Copy with ``modulation`` assigned to ``indices`` (all channels if None)."""
        idx = range(len(self)) if indices is None else set(indices)
        chans = tuple(replace(ch, modulation=modulation) if n in idx else ch
                      for n, ch in enumerate(self.channels))
        return replace(self, channels=chans)

    def with_powers(self, powers):
        powers = np.broadcast_to(np.asarray(powers, dtype=float), (len(self),))
        chans = tuple(replace(ch, launch_power=float(p))
                      for ch, p in zip(self.channels, powers))
        return replace(self, channels=chans)

    def subset(self, indices):
        return replace(self, channels=tuple(self.channels[i] for i in indices))


@dataclass(frozen=True)
class FiberSpec:
    """Per-span fibre constants in SI units.

    ``alpha`` is the power attenuation coefficient. ``alpha_bar`` defaults to
    ``alpha``; it only differs when matched to a measured power profile.
    """

    alpha: float
    gamma: float
    dispersion: float                  # D, s/m^2
    dispersion_slope: float            # S, s/m^3
    raman_slope: float                 # C_r, 1/(W m Hz)
    length: float
    alpha_bar: float | None = None
    reference_wavelength: float = 1550e-9

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("attenuation must be positive")
        if not self.length > 0:
            raise DomainError("span length must be positive")
        if self.gamma < 0:
            raise DomainError("nonlinearity coefficient must be non-negative")
        if self.raman_slope < 0:
            raise DomainError("Raman gain slope must be non-negative")
        if self.alpha_bar is None:
            object.__setattr__(self, "alpha_bar", self.alpha)
        elif not self.alpha_bar > 0:
            raise DomainError("effective attenuation must be positive")
        b2, b3 = dispersion_to_beta(self.dispersion, self.dispersion_slope,
                                    self.reference_wavelength)
        object.__setattr__(self, "_betas", (b2, b3))

    @property
    def beta2(self):
        return self._betas[0]

    @property
    def beta3(self):
        return self._betas[1]

    @property
    def A(self):
        return self.alpha + self.alpha_bar

    def effective_length(self, z):
        z = np.asarray(z, dtype=float)
        return -np.expm1(-self.alpha_bar * z) / self.alpha_bar

    def beta2_at(self, f):
        """Local group-velocity dispersion at frequency offset ``f``."""
        return self.beta2 + 2.0 * math.pi * self.beta3 * np.asarray(f)


@dataclass(frozen=True)
class EffectiveParams:
    """Channel-dependent attenuation and Raman parameters from profile matching."""

    alpha: np.ndarray
    alpha_bar: np.ndarray
    raman_slope: np.ndarray
    fit_residual: np.ndarray
    max_deviation_db: np.ndarray | None = None

    def __post_init__(self):
        for name in ("alpha", "alpha_bar", "raman_slope", "fit_residual"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.alpha <= 0):
            raise DomainError("fitted attenuation must be positive")
        if not np.all(np.isfinite(self.fit_residual)):
            raise DomainError("fit residual is not finite")

    @classmethod
    def uniform(cls, fiber, count):
        ones = np.ones(count)
        return cls(fiber.alpha * ones, fiber.alpha_bar * ones,
                   fiber.raman_slope * ones, np.zeros(count))

    def __len__(self):
        return self.alpha.size


@dataclass(frozen=True)
class LinkPlan:
    """Span count, SPM coherence exponent and ASE budget.

    ``ase_power`` is the accumulated ASE per channel at the receiver (scalar
    or one value per channel).
    """

    span_count: int
    coherence_exponent: float = 0.0
    ase_power: float | tuple = 0.0

    def __post_init__(self):
        if int(self.span_count) != self.span_count or self.span_count < 1:
            raise DomainError("span count must be an integer >= 1")
        object.__setattr__(self, "span_count", int(self.span_count))
        if self.coherence_exponent < 0:
            raise DomainError("coherence exponent must be non-negative")
        ase = np.asarray(self.ase_power, dtype=float)
        if np.any(ase < 0):
            raise DomainError("ASE power must be non-negative")
        if ase.ndim:
            object.__setattr__(self, "ase_power", tuple(float(x) for x in ase))

    @property
    def effective_span_count(self):
        # the asymptotic correction slope only kicks in from the second span
        return 0 if self.span_count == 1 else self.span_count

    def ase_per_channel(self, count):
        return np.broadcast_to(np.asarray(self.ase_power, dtype=float), (count,)).copy()

    def with_spans(self, n):
        return replace(self, span_count=n)

    @staticmethod
    def ase_from_amplifiers(grid, fiber, span_count, noise_figure_db):
        """Accumulated ASE per channel for identical lumped amplifiers.

        Each amplifier compensates exactly one span loss and contributes
        ``NF h nu (G - 1) B`` over the channel bandwidth.
        """
        gain = math.exp(fiber.alpha * fiber.length)
        nf = 10.0 ** (noise_figure_db / 10.0)
        nu = grid.reference_frequency + grid.frequencies
        return span_count * nf * PLANCK * nu * (gain - 1.0) * grid.bandwidths

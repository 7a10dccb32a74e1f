"""Split-step Manakov simulation with per-step ISRS loss.

Sign convention: the field is A(t) = sum_k X_k exp(+j 2 pi f_k t) (numpy's
inverse FFT), so a positive FFT frequency is a positive optical offset.
Propagation then reads dA/dz = -j (beta2/2 Omega^2 + beta3/6 Omega^3) A
- (8/9) j gamma |A|^2 A in the spectral/time domains, with the
frequency-dependent power profile of the Raman model applied as a loss in
every linear step. Amplifiers are ideal and restore the launch spectrum.

Random symbols come from numpy's Philox4x64-10 counter-based generator
keyed by (seed, channel << 32 | realization), so any stream can be
regenerated in isolation.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import io
import math

import numpy as np
import scipy.fft as sfft

from ._kernels import apply_kerr_phase, apply_linear_step
from .closedform import eta_from_snr
from .core import Channel, ChannelGrid
from .errors import ConfigurationError, DomainError, NumericalBlowupError
from .raman import isrs_log_gain

__all__ = [
    "SimulationPlan",
    "SimulationResult",
    "Waveform",
    "prepare_grid",
    "generate_waveform",
    "propagate_span",
    "receive_channel",
    "estimate_eta",
    "simulate",
]


@dataclass(frozen=True)
class SimulationPlan:
    """Simulation settings.

    ``samples_per_symbol=None`` picks the smallest integer oversampling
    with a sampling rate of at least four times the highest occupied
    frequency, which keeps third-order mixing products from aliasing back
    onto the signal band.
    """

    symbols_per_channel: int = 2 ** 13
    samples_per_symbol: int | None = None
    steps_per_span: int = 400
    step_distribution: str = "logarithmic"
    realizations: int = 4
    rng_seed: int = 0
    roll_off: float = 1e-4
    isrs: bool = True
    workers: int = 1

    def __post_init__(self):
        n = self.symbols_per_channel
        if n < 2 ** 10 or n & (n - 1):
            raise ConfigurationError("symbols_per_channel must be a power of two >= 1024")
        if self.realizations < 1:
            raise ConfigurationError("realizations must be >= 1")
        if not 0.0 <= self.roll_off <= 1.0:
            raise ConfigurationError("roll-off must lie in [0, 1]")
        if self.steps_per_span < 1:
            raise ConfigurationError("steps_per_span must be >= 1")
        if self.step_distribution not in ("logarithmic", "uniform"):
            raise ConfigurationError("step_distribution must be 'logarithmic' or 'uniform'")
        if self.samples_per_symbol is not None and self.samples_per_symbol < 1:
            raise ConfigurationError("samples_per_symbol must be >= 1")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ConfigurationError("rng_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Waveform:
    """Sampled dual-polarisation field in the frequency domain plus its symbols."""

    spectrum: np.ndarray          # (2, Ns) complex, FFT of the time samples
    symbols: tuple                # per channel (2, Nsym) unit-power symbols
    grid: ChannelGrid             # channel centres snapped to FFT bins
    symbol_rate: float
    sample_rate: float

    @property
    def sample_count(self):
        return self.spectrum.shape[1]

    @property
    def frequencies(self):
        return sfft.fftfreq(self.sample_count, 1.0 / self.sample_rate)

    def time_field(self):
        return sfft.ifft(self.spectrum, axis=1)


@dataclass(frozen=True)
class SimulationResult:
    """Per-channel averages and per-realisation breakdown.

    ``eta`` is the realisation mean of (P/SNR)/P^3, ``eta_stderr`` its
    standard error, ``snr`` the SNR implied by the mean eta and
    ``noise_variance`` the mean error variance relative to unit symbol power.
    """

    grid: ChannelGrid
    span_count: int
    eta: np.ndarray
    eta_stderr: np.ndarray
    snr: np.ndarray
    noise_variance: np.ndarray
    per_realization: dict = field(default_factory=dict)

    def eta_db(self):
        return 10.0 * np.log10(self.eta)

    def csv_text(self):
        """One row per (realisation, channel) followed by the averaged rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["realization", "channel", "frequency_thz", "snr_db", "eta_db", "noise_variance"])
        f = self.grid.frequencies
        snr_r = self.per_realization["snr"]
        eta_r = self.per_realization["eta"]
        var_r = self.per_realization["noise_variance"]
        for r in range(snr_r.shape[0]):
            for c in range(snr_r.shape[1]):
                w.writerow([r, c, f"{f[c] / 1e12:.9f}", _fmt_db(snr_r[r, c]),
                            _fmt_db(eta_r[r, c]), f"{var_r[r, c]:.9e}"])
        for c in range(len(f)):
            w.writerow(["mean", c, f"{f[c] / 1e12:.9f}", _fmt_db(self.snr[c]),
                        _fmt_db(self.eta[c]), f"{self.noise_variance[c]:.9e}"])
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())


def _fmt_db(x):
    if x == 0:
        return "-inf"
    return "inf" if np.isinf(x) else f"{10 * math.log10(x):.6f}"


def _layout(grid, plan):
    B = grid.bandwidths
    if not np.allclose(B, B[0], rtol=1e-12):
        raise ConfigurationError("the simulator needs equal channel bandwidths")
    rs = B[0] / (1.0 + plan.roll_off)
    nsym = plan.symbols_per_channel
    df_bin = rs / nsym
    bins = np.round(grid.frequencies / df_bin)
    half = int(math.floor((1 + plan.roll_off) * rs / 2 / df_bin + 1e-9))
    if len(bins) > 1 and np.min(np.diff(bins)) < 2 * half + 1:
        raise ConfigurationError(
            "adjacent channels share FFT bins after snapping to the symbol-block "
            "frequency grid; use more symbols or a wider channel spacing")
    snapped = bins * df_bin
    w = np.max(np.abs(snapped)) + B[0] / 2
    need = 4.0 * w
    sps = plan.samples_per_symbol
    if sps is None:
        sps = max(2, int(math.ceil(need / rs - 1e-9)))
        # 2-3-5 smooth sizes keep the FFTs fast
        while sfft.next_fast_len(sps * nsym) != sps * nsym:
            sps += 1
    if sps * rs < need * (1 - 1e-12):
        raise ConfigurationError(
            f"sampling rate {sps * rs / 1e9:.1f} GHz is below 4x the occupied half-bandwidth "
            f"({need / 1e9:.1f} GHz); mixing products would alias")
    return rs, sps, df_bin, snapped


def prepare_grid(grid, plan):
    """The grid the simulator actually uses: centres moved to the nearest FFT bin."""
    _, _, _, snapped = _layout(grid, plan)
    chans = tuple(replace(ch, center_freq=float(f)) for ch, f in zip(grid.channels, snapped))
    return replace(grid, channels=chans)


def _rrc(f, rs, beta):
    af = np.abs(f)
    lo, hi = (1 - beta) * rs / 2, (1 + beta) * rs / 2
    h = np.zeros_like(af)
    h[af < lo] = 1.0
    if beta > 0:
        mid = (af >= lo) & (af <= hi)
        h[mid] = np.sqrt(0.5 * (1 + np.cos(math.pi / (beta * rs) * (af[mid] - lo))))
    else:
        h[af == lo] = math.sqrt(0.5)
    return h


def _channel_rng(seed, channel, realization):
    key = np.array([seed, (channel << 32) | realization], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _pulse_bins(rs, beta, df_bin, ns):
    """FFT bin offsets covered by one channel and the RRC response there."""
    half = int(math.floor((1 + beta) * rs / 2 / df_bin + 1e-9))
    offs = np.arange(-half, half + 1)
    return offs, _rrc(offs * df_bin, rs, beta)


def generate_waveform(grid, plan, realization_index=0):
    """Dual-polarisation WDM field for one realisation.

    Each channel carries independent symbol streams on both polarisations,
    drawn from its modulation format and scaled to unit mean power, shaped
    with a root-raised-cosine spectrum (periodic over the symbol block) and
    placed at its snapped centre frequency with launch power P_i.
    """
    rs, sps, df_bin, snapped = _layout(grid, plan)
    nsym = plan.symbols_per_channel
    ns = nsym * sps
    offs, h = _pulse_bins(rs, plan.roll_off, df_bin, ns)
    spec = np.zeros((2, ns), dtype=complex)
    symbols = []
    for c, ch in enumerate(grid.channels):
        rng = _channel_rng(plan.rng_seed, c, realization_index)
        s = ch.modulation.sample(rng, (2, nsym))
        s = s / math.sqrt(np.mean(np.abs(s) ** 2))
        symbols.append(s)
        S = sfft.fft(s, axis=1)
        centre = int(round(snapped[c] / df_bin))
        scale = sps * math.sqrt(ch.launch_power / 2.0)
        spec[:, (centre + offs) % ns] += scale * S[:, offs % nsym] * h
    g = prepare_grid(grid, plan)
    return Waveform(spec, tuple(symbols), g, rs, rs * sps)


def _step_edges(fiber, plan):
    n, a, L = plan.steps_per_span, fiber.alpha, fiber.length
    k = np.arange(n + 1) / n
    if plan.step_distribution == "uniform":
        z = k * L
    else:
        # equal fibre loss per step
        z = -np.log1p(k * np.expm1(-a * L)) / a
    z[0], z[-1] = 0.0, L
    return z


def propagate_span(waveform, fiber, plan, *, loss_model=None, spans=1, amplify=True):
    """Propagate ``spans`` identical amplified spans; returns a new :class:`Waveform`.

    Symmetric split-step: the nonlinear phase is applied at the midpoint of
    each step and the linear operator between consecutive midpoints. The
    linear operator carries dispersion and the change in
    ln(power gain)/2 of ``loss_model(z, f)`` (default: the triangular ISRS
    profile of the waveform's grid, or plain attenuation when the plan
    disables ISRS). Each span ends with an ideal amplifier undoing the span
    gain profile exactly; ``amplify=False`` skips it (single span only).
    """
    if not amplify and spans != 1:
        raise ConfigurationError("unamplified propagation is limited to one span")
    grid = waveform.grid
    f = waveform.frequencies
    omega = 2 * math.pi * f
    phase_rate = -(fiber.beta2 / 2 * omega ** 2 + fiber.beta3 / 6 * omega ** 3)
    if loss_model is None:
        if plan.isrs and fiber.raman_slope > 0:
            def loss_model(z, fr):
                return isrs_log_gain(z, fr, grid, fiber)
        else:
            def loss_model(z, fr):
                return np.full(fr.shape, -fiber.alpha * z)
    z = _step_edges(fiber, plan)
    mids = 0.5 * (z[:-1] + z[1:])
    a = fiber.alpha
    h_eff = 2.0 / a * np.sinh(a * np.diff(z) / 2.0)
    bounds = np.concatenate([[0.0], mids, [fiber.length]])
    kerr = -8.0 / 9.0 * fiber.gamma
    spec = waveform.spectrum.copy()
    step = 0
    for _ in range(spans):
        g_prev = loss_model(0.0, f)
        for j in range(len(mids) + 1):
            g_next = loss_model(bounds[j + 1], f)
            apply_linear_step(spec, phase_rate, bounds[j + 1] - bounds[j], 0.5 * (g_next - g_prev))
            g_prev = g_next
            if j == len(mids):
                break
            field_t = sfft.ifft(spec, axis=1, overwrite_x=True)
            if not np.isfinite(field_t[:, ::64].sum()):
                raise NumericalBlowupError(f"non-finite field at step {step}", step_index=step)
            apply_kerr_phase(field_t, kerr * h_eff[j])
            spec = sfft.fft(field_t, axis=1, overwrite_x=True)
            step += 1
        if amplify:
            spec *= np.exp(-0.5 * g_prev)
        if not np.all(np.isfinite(spec)):
            raise NumericalBlowupError(f"non-finite field after step {step}", step_index=step)
    return replace(waveform, spectrum=spec)


def _cdc(waveform, fiber, distance):
    omega = 2 * math.pi * waveform.frequencies
    return np.exp(1j * (fiber.beta2 / 2 * omega ** 2 + fiber.beta3 / 6 * omega ** 3) * distance)


def receive_channel(waveform, channel, plan, *, fiber=None, distance=0.0):
    """Recover the symbols of ``channel`` (index into the waveform grid).

    Down-shift, full-link dispersion compensation over ``distance``, RRC
    matched filter, symbol-rate sampling and a least-squares complex gain
    fitted against the transmitted symbols. Returns ``(received, sent)``.
    """
    grid = waveform.grid
    ns = waveform.sample_count
    nsym = plan.symbols_per_channel
    df_bin = waveform.symbol_rate / nsym
    spec = waveform.spectrum
    if fiber is not None and distance:
        spec = spec * _cdc(waveform, fiber, distance)
    offs, h = _pulse_bins(waveform.symbol_rate, plan.roll_off, df_bin, ns)
    centre = int(round(grid.frequencies[channel] / df_bin))
    sps = ns // nsym
    scale = sps * math.sqrt(grid.channels[channel].launch_power / 2.0)
    folded = np.zeros((2, nsym), dtype=complex)
    for p in range(2):
        np.add.at(folded[p], offs % nsym, spec[p, (centre + offs) % ns] * h)
    y = sfft.ifft(folded / scale, axis=1)
    x = waveform.symbols[channel]
    c = np.vdot(x, y) / np.vdot(x, x).real
    return y / c, x


def _channel_snr(received, sent):
    noise = np.mean(np.abs(received - sent) ** 2)
    power = np.mean(np.abs(sent) ** 2)
    return (np.inf if noise == 0 else power / noise), noise


def estimate_eta(snrs, grid, plan=None, span_count=None):
    """Per-channel eta from SNRs with P_ASE = 0: mean and standard error over realisations.

    ``snrs`` has shape (realisations, channels) or (channels,); infinite SNR
    maps to eta = 0. ``plan`` and ``span_count`` are accepted for symmetry
    with :func:`simulate` and do not change the result.
    """
    s = np.atleast_2d(np.asarray(snrs, dtype=float))
    if np.any(np.isnan(s)) or np.any(s <= 0):
        raise DomainError("SNR must be positive")
    eta = np.atleast_2d(eta_from_snr(grid.powers[None, :], s))
    mean = eta.mean(axis=0)
    if eta.shape[0] > 1:
        stderr = eta.std(axis=0, ddof=1) / math.sqrt(eta.shape[0])
    else:
        stderr = np.zeros(eta.shape[1])
    return mean, stderr


def _one_realization(args):
    grid, fiber, plan, span_count, r = args
    wf = generate_waveform(grid, plan, r)
    out = propagate_span(wf, fiber, plan, spans=span_count)
    snrs, var = [], []
    for c in range(len(grid)):
        y, x = receive_channel(out, c, plan, fiber=fiber, distance=span_count * fiber.length)
        s, v = _channel_snr(y, x)
        snrs.append(s)
        var.append(v)
    return np.array(snrs), np.array(var)


def simulate(grid, fiber, plan, span_count):
    """Run all realisations and extract per-channel eta.

    Realisations are independent and may run in worker processes
    (``plan.workers``); results are collected in realisation order so the
    outcome does not depend on the degree of parallelism.
    """
    if span_count < 1:
        raise DomainError("span count must be >= 1")
    jobs = [(grid, fiber, plan, span_count, r) for r in range(plan.realizations)]
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as ex:
            rows = list(ex.map(_one_realization, jobs))
    else:
        rows = [_one_realization(j) for j in jobs]
    snr_r = np.array([r[0] for r in rows])
    var_r = np.array([r[1] for r in rows])
    sim_grid = prepare_grid(grid, plan)
    eta, stderr = estimate_eta(snr_r, sim_grid)
    P = sim_grid.powers
    with np.errstate(divide="ignore"):
        snr_mean = np.where(eta > 0, 1.0 / (eta * P ** 2), np.inf)
    eta_r = eta_from_snr(P[None, :], snr_r)
    return SimulationResult(sim_grid, span_count, eta, stderr, snr_mean, var_r.mean(axis=0),
                            per_realization={"snr": snr_r, "eta": eta_r, "noise_variance": var_r})

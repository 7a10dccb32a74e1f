import math

import numpy as np
import pytest
import sympy as sp

from isrsnli.closedform import (appendix_identity, first_span_link_energy, pair_kernel,
                                total_nli_closedform, xpm_correction_pair)
from isrsnli.core import Channel, ChannelGrid, LinkPlan
from isrsnli.errors import ConvergenceError, DomainError, SingularityError
from isrsnli.formats import gaussian, square_qam
from isrsnli.integral import (QuadratureSpec, gn_xpm_spm_integral, link_function_exact,
                              link_function_two_pole, link_function_xpm_approx,
                              normalization_Cn, normalization_Cn_increment,
                              xpm_correction_integral_1d, xpm_correction_integral_2d)

from conftest import full_grid, make_smf

# frozen after the 1-D / 2-D / closed-form cross-checks below passed
GOLDEN_2D_ADJACENT_N10 = -317.2170789510342


def _lossy_kernel():
    z, a, p, L = sp.symbols("z alpha p L", positive=True)
    mu = sp.integrate(sp.exp(-a * z + sp.I * p * z), (z, 0, L))
    return sp.lambdify((a, p, L), sp.simplify(mu), "numpy")


def test_exact_link_degenerate_triplet(gauss_grid):
    fib = make_smf(raman_slope=0.0)
    mu = link_function_exact(0.0, 0.0, 0.0, gauss_grid, fib)
    assert mu == pytest.approx(fib.effective_length(fib.length), rel=1e-12)


@pytest.mark.parametrize("f1, f2, fi", [(10e9, 2e12, 0.0), (-15e9, -1e12, 0.0),
                                         (1.01e12, 3e12, 1e12)])
def test_exact_link_without_raman_matches_symbolic(gauss_grid, f1, f2, fi):
    fib = make_smf(raman_slope=0.0)
    kern = _lossy_kernel()
    phase = -4 * math.pi ** 2 * (f1 - fi) * (f2 - fi) * (fib.beta2 + math.pi * fib.beta3 * (f1 + f2))
    ref = complex(kern(fib.alpha, phase, fib.length)) if phase > 0 else \
        complex(np.conj(kern(fib.alpha, -phase, fib.length)))
    got = link_function_exact(f1, f2, fi, gauss_grid, fib)
    assert abs(got - ref) < 1e-9 * abs(ref)


def test_exact_link_vs_two_pole_at_2thz(gauss_grid, smf):
    kern = pair_kernel(125, 175, smf, gauss_grid)
    assert gauss_grid.frequencies[175] == pytest.approx(2.00025e12)
    ex = abs(link_function_exact(0.0, gauss_grid.frequencies[175], 0.0, gauss_grid, smf)) ** 2
    ap = abs(link_function_xpm_approx(0.0, kern)) ** 2
    assert ex / ap == pytest.approx(1.0, abs=0.05)


def test_exact_link_vs_two_pole_at_band_edge(gauss_grid, smf):
    k = 150
    kern = pair_kernel(125, k, smf, gauss_grid)
    f1 = gauss_grid.bandwidths[125] / 2
    ex = abs(link_function_exact(f1, gauss_grid.frequencies[k], 0.0, gauss_grid, smf))
    ap = abs(link_function_xpm_approx(f1, kern))
    assert ex / ap == pytest.approx(1.0, abs=0.05)


def test_two_pole_reductions(gauss_grid):
    fib = make_smf(raman_slope=0.0)
    kern = pair_kernel(125, 130, fib, gauss_grid)
    f1 = 7e9
    assert link_function_xpm_approx(f1, kern) == pytest.approx(
        1 / (kern.alpha - 1j * kern.psi_ik * f1), rel=1e-13)
    kern = pair_kernel(125, 130, make_smf(), gauss_grid)
    v = link_function_xpm_approx(0.0, kern)
    assert v.imag == 0.0
    assert v.real == pytest.approx((1 + kern.T_tilde_k) / kern.alpha - kern.T_tilde_k / kern.A,
                                   rel=1e-14)
    # the pair form freezes the tilt and beta3 at the channel centres
    fk = gauss_grid.frequencies[130]
    assert link_function_two_pole(f1, fk, 0.0, gauss_grid, make_smf()) == pytest.approx(
        link_function_xpm_approx(f1, kern), rel=1e-3)


def test_first_span_matches_closed_form(qpsk_grid, smf):
    for k in (126, 140, 250):
        a = xpm_correction_integral_1d(125, k, smf, qpsk_grid, 1)
        b = xpm_correction_pair(125, k, smf, qpsk_grid, LinkPlan(1))
        assert a == pytest.approx(b, rel=1e-6)


def test_gaussian_interferer_is_zero(gauss_grid, smf):
    assert xpm_correction_integral_1d(125, 126, smf, gauss_grid, 10) == 0.0
    assert xpm_correction_integral_2d(125, 126, smf, gauss_grid, 10) == 0.0


def test_one_dimensional_symmetry(qpsk_grid):
    fib = make_smf(dispersion_slope=-2 * make_smf().dispersion / 1550e-9, raman_slope=0.0)
    a = xpm_correction_integral_1d(125, 128, fib, qpsk_grid, 20)
    b = xpm_correction_integral_1d(125, 122, fib, qpsk_grid, 20)
    assert a == pytest.approx(b, rel=1e-8)


def test_two_dimensional_reduces_for_narrow_interferer(smf):
    g = ChannelGrid((Channel(0.0, 40e9, 1e-3, gaussian()),
                     Channel(200e9, 1e9, 1e-3, square_qam(4))))
    a = xpm_correction_integral_1d(0, 1, smf, g, 1)
    b = xpm_correction_integral_2d(0, 1, smf, g, 1)
    assert b == pytest.approx(a, rel=1e-4)


@pytest.mark.slow
def test_two_dimensional_golden(qpsk_grid, smf):
    v = xpm_correction_integral_2d(125, 126, smf, qpsk_grid, 10)
    assert v == pytest.approx(GOLDEN_2D_ADJACENT_N10, rel=1e-4)
    one = xpm_correction_integral_1d(125, 126, smf, qpsk_grid, 10)
    assert 10 * math.log10(v / one) == pytest.approx(0.0, abs=0.05)


def test_decomposition_error_shrinks_with_spans(qpsk_grid, smf):
    # adjacent interferer: the closed form is first span + n * asymptotic slope
    err = {}
    for n in (1, 2, 5, 10, 50, 100):
        a = xpm_correction_integral_1d(125, 126, smf, qpsk_grid, n)
        b = xpm_correction_pair(125, 126, smf, qpsk_grid, LinkPlan(n))
        err[n] = abs(10 * math.log10(b / a))
    assert err[1] < 1e-6
    assert err[100] < err[2]
    assert err[2] > err[5] > err[10] > err[50] > err[100]


def test_cn_two_spans_is_sinc_square_integral():
    phi, B, df = 3e-20, 40e9, 80e9
    exact = 2 * math.pi / (abs(phi) * B)
    assert normalization_Cn(2, phi, B, df) == pytest.approx(exact, rel=1e-6)
    assert normalization_Cn(2, phi, B, df, method="spectral") == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("n, r", [(3, 1.0), (7, 2.5), (40, 1.7), (120, 10.0)])
def test_cn_quadrature_matches_spectral(n, r):
    phi, B = 1e-20, 40e9
    q = normalization_Cn(n, phi, B, r * B / 2)
    s = normalization_Cn(n, phi, B, r * B / 2, method="spectral")
    assert q == pytest.approx(s, rel=1e-6)
    dq = normalization_Cn_increment(n, phi, B, r * B / 2)
    ds = normalization_Cn_increment(n, phi, B, r * B / 2, method="spectral")
    assert dq == pytest.approx(ds, rel=1e-5)


def test_cn_finite_difference_approaches_identity():
    a, b = 1.0, 3.0
    target = appendix_identity(a, b)
    errs = [abs(normalization_Cn_increment(n, 1.0, 2 * a, b, method="spectral") / target - 1)
            for n in (100, 300, 1000)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def test_cn_errors():
    with pytest.raises(DomainError):
        normalization_Cn(1, 1e-20, 40e9, 40e9)
    with pytest.raises(SingularityError):
        normalization_Cn(3, 0.0, 40e9, 40e9)
    with pytest.raises(DomainError):
        normalization_Cn(3, 1e-20, 40e9, 10e9)


def test_quadrature_failure_reports_estimate(qpsk_grid, smf):
    tight = QuadratureSpec(relative_tolerance=1e-15, max_subdivisions=1)
    with pytest.raises(ConvergenceError) as info:
        xpm_correction_integral_1d(125, 126, smf, qpsk_grid, 50, tight)
    assert info.value.estimate is not None and info.value.residual is not None


def test_deterministic(qpsk_grid, smf):
    a = xpm_correction_integral_1d(125, 130, smf, qpsk_grid, 20)
    b = xpm_correction_integral_1d(125, 130, smf, qpsk_grid, 20)
    assert a == b


def test_gn_integral_without_nonlinearity():
    g = full_grid(count=3)
    rep = gn_xpm_spm_integral(g, make_smf(gamma=0.0), 2)
    assert np.all(rep.eta_gn == 0.0)


def test_gn_single_channel_vs_closed_form(smf):
    g = ChannelGrid((Channel(0.0, 40.004e9, 1e-3),))
    i = gn_xpm_spm_integral(g, smf, 1).eta_gn[0]
    c = total_nli_closedform(g, smf, LinkPlan(1)).eta_gn[0]
    assert i == pytest.approx(c, rel=0.10)


@pytest.mark.parametrize("B, tol", [(40e9, 0.05), (80e9, 0.01)])
def test_gn_bandwidth_doubling_follows_asinh(B, tol):
    fib = make_smf(raman_slope=0.0)
    ratio = []
    for model in ("int", "cf"):
        vals = []
        for b in (B, 2 * B):
            g = ChannelGrid((Channel(0.0, b, 1e-3),))
            vals.append(gn_xpm_spm_integral(g, fib, 1).eta_gn[0] if model == "int"
                        else total_nli_closedform(g, fib, LinkPlan(1)).eta_gn[0])
        ratio.append(vals[1] / vals[0])
    assert ratio[0] == pytest.approx(ratio[1], rel=tol)


def test_gn_centre_channel_vs_closed_form(gauss_grid, smf):
    rep = gn_xpm_spm_integral(gauss_grid, smf, 1, channels=[125])
    cf = total_nli_closedform(gauss_grid, smf, LinkPlan(1))
    assert 10 * math.log10(rep.eta_gn[125] / cf.eta_gn[125]) == pytest.approx(0.0, abs=0.25)
    assert np.isnan(rep.eta_gn[0])


def test_gn_coherent_exceeds_incoherent_for_spm(smf):
    g = ChannelGrid((Channel(0.0, 40.004e9, 1e-3),))
    inc = gn_xpm_spm_integral(g, smf, 6).eta_gn[0]
    coh = gn_xpm_spm_integral(g, smf, 6, coherent=True).eta_gn[0]
    one = gn_xpm_spm_integral(g, smf, 1).eta_gn[0]
    assert inc == pytest.approx(6 * one, rel=1e-3)
    assert coh > inc


@pytest.mark.parametrize("N, r, lead", [(1, 0.0, 0.0), (7, 2.5, 0.0), (200, 1.3, 1.0), (1000, 40.0, 0.0)])
def test_coherent_recurrence_matches_direct_sum(N, r, lead):
    from isrsnli._kernels import coherent_energy
    rng = np.random.default_rng(3)
    x = np.concatenate([[0.0], rng.uniform(-3, 3, 700)])
    w = rng.uniform(0.1, 1.0, x.size)
    m = np.arange(1, N + 2)[:, None]
    terms = np.sinc(m * x / np.pi) * np.exp(1j * m * r * x)
    s_n = lead + terms[:-1].sum(axis=0)
    s_n1 = s_n + terms[-1]
    e, inc = coherent_energy(x, w, r, N, lead)
    assert e == pytest.approx(np.sum(w * np.abs(s_n) ** 2), rel=1e-9)
    assert inc == pytest.approx(np.sum(w * (np.abs(s_n1) ** 2 - np.abs(s_n) ** 2)), rel=1e-7, abs=1e-9 * e)

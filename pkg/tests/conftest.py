import os

import pytest
from hypothesis import settings

from isrsnli.core import ChannelGrid, FiberSpec
from isrsnli.formats import gaussian, square_qam
from isrsnli.units import (attenuation_db_per_km_to_natural, dbm_to_watt, per_w_km, ps_nm2_km,
                           ps_nm_km, raman_slope_per_w_km_thz)

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_smf(**kw):
    args = dict(alpha=attenuation_db_per_km_to_natural(0.2), gamma=1.2 * per_w_km,
                dispersion=17.0 * ps_nm_km, dispersion_slope=0.067 * ps_nm2_km,
                raman_slope=0.028 * raman_slope_per_w_km_thz, length=100e3)
    args.update(kw)
    return FiberSpec(**args)


def make_nzdsf(**kw):
    args = dict(alpha=attenuation_db_per_km_to_natural(0.19), gamma=1.3 * per_w_km,
                dispersion=4.5 * ps_nm_km, dispersion_slope=0.05 * ps_nm2_km,
                raman_slope=0.031 * raman_slope_per_w_km_thz, length=100e3)
    args.update(kw)
    return FiberSpec(**args)


def full_grid(modulation=None, power_dbm=0.0, count=251):
    return ChannelGrid.uniform(count, 40.005e9, 40.004e9, dbm_to_watt(power_dbm),
                               modulation if modulation is not None else gaussian())


@pytest.fixture
def smf():
    return make_smf()


@pytest.fixture
def nzdsf():
    return make_nzdsf()


@pytest.fixture
def qpsk_grid():
    return full_grid(square_qam(4))


@pytest.fixture
def gauss_grid():
    return full_grid(gaussian())


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Print and collect one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def report(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        print(line)
        lines.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

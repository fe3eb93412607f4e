import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwpdc.units import C_NM_PER_FS, bandwidth_to_sigma, omega_from_wavelength, wavelength_from_omega


@given(st.floats(100.0, 5000.0))
def test_round_trip(wl):
    assert wavelength_from_omega(omega_from_wavelength(wl)) == pytest.approx(wl, rel=1e-14)


def test_known_frequency():
    assert omega_from_wavelength(1550.0) == pytest.approx(2 * np.pi * 299.792458 / 1550.0, rel=1e-15)
    assert C_NM_PER_FS == 299.792458


def test_fwhm_conventions():
    d_omega = 2 * np.pi * C_NM_PER_FS * 0.25 / 776.9**2
    s_amp = bandwidth_to_sigma(0.25, 776.9, "amplitude")
    s_int = bandwidth_to_sigma(0.25, 776.9, "intensity")
    # exp(-(d/2)^2 / s^2) is 1/2 for the amplitude, |.|^2 for the intensity
    assert np.exp(-(d_omega / 2) ** 2 / s_amp**2) == pytest.approx(0.5, rel=1e-12)
    assert np.exp(-2 * (d_omega / 2) ** 2 / s_int**2) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        bandwidth_to_sigma(0.25, 776.9, "power")
    with pytest.raises(ValueError):
        bandwidth_to_sigma(0.0, 776.9)

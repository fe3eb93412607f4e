import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brwpdc.dispersion import PhasematchParams
from brwpdc.jsa import (
    GridSpec,
    JointSpectrum,
    PumpSpec,
    build_jsa,
    export_header_json,
    export_jsa_csv,
    export_marginals_csv,
    marginals,
    phase_mismatch,
    phasematching_function,
)


def test_mismatch_vanishes_at_origin(graded_params):
    assert phase_mismatch(0.0, 0.0, graded_params) == 0.0


def test_mismatch_hand_value(graded_params):
    # -3.429e-3 + (1.217 - 10.834) / 2 * 1e-6
    assert phase_mismatch(0.001, 0.0, graded_params) == pytest.approx(-3.4338085e-3, rel=1e-12)


@given(a=st.floats(-0.05, 0.05), b=st.floats(-0.05, 0.05))
def test_mismatch_symmetric_parameters(symmetric_params, a, b):
    assert phase_mismatch(a, b, symmetric_params) == pytest.approx(phase_mismatch(b, a, symmetric_params),
                                                                   rel=1e-12, abs=1e-18)


def unit_kappa(length=2.0):
    """Delta k = nu_s, so Delta k L / 2 = nu_s for L = 2 um."""
    return PhasematchParams(1.0, 0.0, 0.0, 0.0, 0.0, 1550.0, length)


def test_phasematching_function_values():
    p = unit_kappa()
    assert phasematching_function(0.0, 0.0, p) == 1 + 0j
    assert abs(phasematching_function(np.pi, 0.0, p)) < 1e-15
    assert phasematching_function(np.pi / 2, 0.0, p) == pytest.approx((2 / np.pi) * np.exp(-0.5j * np.pi), abs=1e-15)


@given(x=st.floats(-1e3, 1e3))
def test_phasematching_function_bounded(x):
    assert abs(phasematching_function(x, 0.0, unit_kappa())) <= 1.0 + 1e-15


def test_normalized(graded_jsa, m_core_jsa):
    for j in (graded_jsa, m_core_jsa):
        assert j.total_mass() == pytest.approx(1.0, abs=1e-9)
        assert j.norm > 0 and not j.boundary_warning


def test_symmetric_parameters_give_symmetric_jsa(symmetric_params, small_grid):
    j = build_jsa(symmetric_params, PumpSpec(775.0, 0.25), small_grid)
    assert np.array_equal(j.amplitude, j.amplitude.T)


def test_parameter_swap_transposes(graded_params, small_grid):
    pump = PumpSpec(776.8, 0.25)
    f = build_jsa(graded_params, pump, small_grid).amplitude
    g = build_jsa(graded_params.swapped(), pump, small_grid).amplitude
    np.testing.assert_allclose(g, f.T, rtol=0, atol=1e-12 * np.abs(f).max())


def test_pump_envelope_factorizes(graded_params, small_grid):
    j = build_jsa(graded_params, PumpSpec(776.7, 0.25), small_grid)
    phi = phasematching_function(j.nu_s[:, None], j.nu_i[None, :], graded_params)
    ok = np.abs(phi) > 1e-6
    env = np.where(ok, j.amplitude / np.where(ok, phi, 1.0), np.nan)
    n = small_grid.n_s
    for d in (-n // 4, 0, n // 8):
        diag = np.fliplr(env).diagonal(d)
        diag = diag[np.isfinite(diag)]
        scale = np.abs(diag).max()
        if scale > 0:
            assert np.max(np.abs(diag - diag[0])) <= 1e-12 * max(scale, 1e-300) + 1e-300


def test_narrow_pump_collapses_to_antidiagonal(graded_params):
    grid = GridSpec(0.05, 0.05, 512, 512)
    j = build_jsa(graded_params, PumpSpec(776.9, 0.002), grid)
    w = np.abs(j.amplitude) ** 2
    s = j.nu_s[:, None] + j.nu_i[None, :]
    spread = np.sqrt(np.sum(w * s**2) / np.sum(w))
    assert spread < 2 * grid.d_nu_s


def test_boundary_flag_on_small_grid(graded_params):
    j = build_jsa(graded_params, PumpSpec(776.9, 0.25), GridSpec(0.02, 0.02, 64, 64))
    assert j.boundary_warning


def test_grid_and_pump_validation():
    with pytest.raises(ValueError):
        GridSpec(0.25, 0.25, 63, 64)
    with pytest.raises(ValueError):
        GridSpec(0.25, 0.25, 32, 32)
    with pytest.raises(ValueError):
        GridSpec(-0.1, 0.25, 64, 64)
    with pytest.raises(ValueError):
        PumpSpec(776.9, 0.0)
    with pytest.raises(ValueError):
        PumpSpec(820.0, 0.25)
    assert GridSpec().refined(2).n_s == 4096


def test_marginals_integrate_to_one(graded_jsa):
    s, i, _ = marginals(graded_jsa)
    d = graded_jsa.grid.d_nu_s
    assert np.sum(s.density) * d == pytest.approx(1.0, abs=1e-9)
    assert np.sum(i.density) * d == pytest.approx(1.0, abs=1e-9)


def test_symmetric_marginals_identical(symmetric_params, small_grid):
    j = build_jsa(symmetric_params, PumpSpec(775.0, 0.25), small_grid)
    s, i, _ = marginals(j)
    np.testing.assert_array_equal(s.density, i.density)


def test_separable_gaussian_marginals():
    grid = GridSpec(0.1, 0.1, 256, 256)
    a = np.exp(-((grid.nu_s - 0.01) ** 2) / 0.01**2)
    b = np.exp(-((grid.nu_i + 0.02) ** 2) / 0.015**2)
    f = a[:, None] * b[None, :]
    f = f / np.sqrt(np.sum(np.abs(f) ** 2) * grid.d_nu_s * grid.d_nu_i)
    j = JointSpectrum(grid, f, (1.2, 1.2), 1.0)
    s, i, _ = marginals(j)
    np.testing.assert_allclose(s.density, a**2 / (np.sum(a**2) * grid.d_nu_s), rtol=1e-10)
    np.testing.assert_allclose(i.density, b**2 / (np.sum(b**2) * grid.d_nu_i), rtol=1e-10)


def test_graded_marginals_span(graded_jsa):
    s, i, _ = marginals(graded_jsa)
    for m in (s, i):
        inside = m.density > 0.01 * m.density.max()
        assert 1420.0 < m.wavelength[inside].min() < 1500.0
        assert 1620.0 < m.wavelength[inside].max() < 1700.0


def _similarity(j):
    s, i, _ = marginals(j)
    d = j.grid.d_nu_s
    return np.sum(np.sqrt(s.density * i.density)) * d


def test_graded_bands_more_alike_than_m_core(graded_jsa, m_core_jsa):
    assert _similarity(graded_jsa) > _similarity(m_core_jsa)


def test_refinement_stability(graded_params):
    pump = PumpSpec(776.9, 0.25)
    a = build_jsa(graded_params, pump)
    b = build_jsa(graded_params, pump, GridSpec().refined(2))
    sa, sb = marginals(a)[0], marginals(b)[0]
    ref = np.interp(sa.nu, sb.nu, sb.density)
    assert np.max(np.abs(sa.density - ref)) / sa.density.max() < 1e-3


def test_exports(tmp_path, graded_params):
    j = build_jsa(graded_params, PumpSpec(776.9, 0.25), GridSpec(0.25, 0.25, 64, 64))
    export_jsa_csv(j, tmp_path / "jsa.csv", {"note": "x"})
    export_marginals_csv(j, tmp_path / "m.csv")
    export_header_json(j, tmp_path / "h.json")
    lines = (tmp_path / "jsa.csv").read_text().splitlines()
    header = "\n".join(l[2:] for l in lines if l.startswith("# "))
    meta = json.loads(header)
    assert meta["params"]["kappa_s"] == -3.429 and meta["note"] == "x"
    assert "nu_s_rad_per_fs,nu_i_rad_per_fs,re_f,im_f" in lines
    body = [l for l in lines if not l.startswith("#")][1:]
    assert len(body) == 64 * 64
    assert json.loads((tmp_path / "h.json").read_text())["grid"]["n_s"] == 64
    assert "signal_wavelength_nm" in (tmp_path / "m.csv").read_text()

import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from brwpdc.multilayer import (
    Layer,
    LayerStack,
    ModeClass,
    ModeSolution,
    Polarization,
    Slab,
    SolverError,
    classify_mode,
    effective_index_2d,
    expand_layers,
    find_guided_modes,
    lateral_index,
    load_stack,
    mode_condition,
    preset_stack,
    slab_field,
    slab_from_stack,
    slab_residual,
    slab_roots,
    solve_mode,
    transfer_matrix,
)


def analytic_modes(n1, d, n_sub, n_cap, wl, pol):
    """Roots of the closed-form three-layer dispersion relation.

    kappa d = m pi + atan(p_s gamma_s / kappa) + atan(p_c gamma_c / kappa), with
    p = 1 for TE and (n1 / n_j)**2 for TM.
    """
    k0 = 2 * np.pi / wl

    def p(nj):
        return 1.0 if pol == "TE" else (n1 / nj) ** 2

    def f(n, m):
        kap = k0 * np.sqrt(n1**2 - n**2)
        gs = k0 * np.sqrt(n**2 - n_sub**2)
        gc = k0 * np.sqrt(n**2 - n_cap**2)
        return kap * d - m * np.pi - np.arctan(p(n_sub) * gs / kap) - np.arctan(p(n_cap) * gc / kap)

    lo, hi = max(n_sub, n_cap) + 1e-12, n1 - 1e-12
    out = []
    for m in range(50):
        if f(lo, m) * f(hi, m) < 0:
            out.append(brentq(f, lo, hi, args=(m,), xtol=1e-15))
    return np.array(out)


SLAB_CASES = [
    # (n_core, d_nm, n_sub, n_cap, wavelength_nm)
    (3.5, 765.0, 3.2, 3.2, 1550.0),  # symmetric, two TE modes
    (3.5, 2000.0, 3.2, 3.2, 1550.0),  # symmetric, multimode
    (3.4, 900.0, 3.17, 1.0, 1550.0),  # asymmetric, air cover
    (3.45, 1500.0, 3.3, 3.1, 1300.0),  # asymmetric, both semiconductors
]


@pytest.mark.parametrize("pol", ["TE", "TM"])
@pytest.mark.parametrize("case", SLAB_CASES)
def test_three_layer_slab_matches_closed_form(case, pol):
    n1, d, ns, nc, wl = case
    slab = Slab(np.array([n1]), np.array([d]), ns, nc, wl, Polarization(pol))
    ref = np.sort(analytic_modes(n1, d, ns, nc, wl, pol))[::-1]
    got = slab_roots(slab)
    assert ref.size > 0
    assert got.shape == ref.shape
    np.testing.assert_allclose(got, ref, atol=1e-9)


def test_symmetric_slab_with_two_te_modes():
    slab = Slab(np.array([3.5]), np.array([765.0]), 3.2, 3.2, 1550.0, Polarization.TE)
    assert len(slab_roots(slab)) == 2


def test_te_above_tm():
    te = Slab(np.array([3.5]), np.array([765.0]), 3.2, 3.2, 1550.0, Polarization.TE)
    tm = dataclasses.replace(te, pol=Polarization.TM)
    assert slab_roots(te)[0] > slab_roots(tm)[0]


def test_layer_split_is_invisible():
    one = Slab(np.array([3.5]), np.array([800.0]), 3.2, 3.0, 1550.0, Polarization.TM)
    two = Slab(np.array([3.5, 3.5, 3.5]), np.array([200.0, 350.0, 250.0]), 3.2, 3.0, 1550.0, Polarization.TM)
    np.testing.assert_allclose(slab_roots(one), slab_roots(two), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(frac=st.floats(0.001, 0.999), pol=st.sampled_from(["TE", "TM"]), wl=st.sampled_from([776.9, 1550.0]))
def test_transfer_matrix_is_unimodular(graded_stack, frac, pol, wl):
    slab = slab_from_stack(graded_stack, wl, pol)
    lo, hi = slab.bracket
    m = transfer_matrix(slab, lo + frac * (hi - lo))
    # product of many matrices; compare with their own scale
    scale = max(1.0, abs(m[0, 0] * m[1, 1]), abs(m[0, 1] * m[1, 0]))
    assert abs(np.linalg.det(m) - 1.0) / scale < 1e-10


def test_unimodular_for_evanescent_and_oscillatory_layers():
    slab = Slab(np.array([3.5, 3.0, 3.4]), np.array([300.0, 500.0, 120.0]), 2.9, 1.0, 1550.0, Polarization.TM)
    for n in (2.95, 3.2, 3.45):
        assert np.linalg.det(transfer_matrix(slab, n)) == pytest.approx(1.0, abs=1e-10)


def test_roots_zero_the_mode_condition(graded_stack):
    for pol in ("TE", "TM"):
        for m in find_guided_modes(graded_stack, 1550.0, pol):
            # the normalized residual is steep, so check the root brackets a sign change
            lo = mode_condition(graded_stack, m.n_eff - 1e-9, 1550.0, pol)
            hi = mode_condition(graded_stack, m.n_eff + 1e-9, 1550.0, pol)
            assert lo * hi < 0


def test_mode_condition_rejects_index_above_max(graded_stack):
    n_max = np.max(graded_stack.indices(1550.0)[0])
    with pytest.raises(SolverError, match="bracket"):
        mode_condition(graded_stack, n_max + 0.01, 1550.0, "TE")


def test_residual_changes_sign_across_mode():
    slab = Slab(np.array([3.5]), np.array([765.0]), 3.2, 3.2, 1550.0, Polarization.TE)
    n0 = slab_roots(slab)[0]
    assert slab_residual(slab, n0 - 1e-6) * slab_residual(slab, n0 + 1e-6) < 0


@pytest.mark.parametrize("wl, pol", [(1550.0, "TE"), (1550.0, "TM"), (776.9, "TE")])
def test_scan_halving_invariance(graded_stack, wl, pol):
    a = [m.n_eff for m in find_guided_modes(graded_stack, wl, pol, classify=False)]
    b = [m.n_eff for m in find_guided_modes(graded_stack, wl, pol, scan_step=5e-5, classify=False)]
    assert len(a) == len(b)
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_modes_sorted_and_below_max_index(graded_stack):
    modes = find_guided_modes(graded_stack, 1550.0, "TE")
    n = [m.n_eff for m in modes]
    assert n == sorted(n, reverse=True)
    assert max(n) < np.max(graded_stack.indices(1550.0)[0])
    for m in modes:
        assert np.max(np.abs(m.field_profile)) == pytest.approx(1.0)


def test_graded_preset_has_fundamental_tir_mode(graded_stack):
    modes = find_guided_modes(graded_stack, 1550.0, "TE")
    tir = [m for m in modes if m.mode_class is ModeClass.TIR_FUNDAMENTAL]
    assert tir and all(3.0 < m.n_eff < 3.4 for m in tir)


def test_uniform_stack_has_no_modes():
    stack = LayerStack([Layer(500.0, 0.3)] * 3, substrate_al_fraction=0.3, cap_al_fraction=0.3)
    assert find_guided_modes(stack, 1550.0, "TE") == []


def test_empty_search_bracket(graded_stack):
    with pytest.raises(SolverError, match="empty"):
        find_guided_modes(graded_stack, 1550.0, "TE", n_lo=3.3, n_hi=3.2)


@pytest.mark.parametrize("name", ["graded", "m_core"])
def test_single_bragg_mode_oscillating_in_reflectors(name):
    stack = preset_stack(name)
    wl = 776.9 if name == "graded" else 775.3
    modes = find_guided_modes(stack, wl, "TE")
    bragg = [m for m in modes if m.mode_class is ModeClass.BRAGG]
    assert len(bragg) == 1
    m = bragg[0]
    bounds = stack.interfaces()
    in_dbr = np.zeros(m.y.shape, dtype=bool)
    for j, g in enumerate(stack.groups):
        if "dbr" in g:
            in_dbr |= (m.y >= bounds[j]) & (m.y < bounds[j + 1])
    v = m.field_profile[in_dbr]
    v = v[np.abs(v) > 1e-6]
    assert np.count_nonzero(np.diff(np.sign(v))) >= 3
    # intensity peaks in the guiding region
    core = [j for j, g in enumerate(stack.groups) if g in ("core", "matching")]
    y_peak = m.y[np.argmax(m.field_profile**2)]
    assert bounds[min(core)] <= y_peak <= bounds[max(core) + 1]


def test_fundamental_of_three_layer_guide_is_tir():
    stack = LayerStack([Layer(2000.0, 0.4), Layer(800.0, 0.1), Layer(2000.0, 0.4)],
                       substrate_al_fraction=0.4, cap_al_fraction=0.4)
    m = find_guided_modes(stack, 1550.0, "TE")[0]
    assert m.mode_class is ModeClass.TIR_FUNDAMENTAL


def test_radiating_profile_is_other(graded_stack):
    y = np.linspace(-500.0, graded_stack.total_thickness + 500.0, 2000)
    v = np.where(y < 300.0, np.cos(y / 50.0), 1e-3)
    m = ModeSolution(3.1, Polarization.TE, 1550.0, y, v)
    assert classify_mode(m, graded_stack) is ModeClass.OTHER
    with pytest.raises(SolverError):
        classify_mode(ModeSolution(3.1, Polarization.TE, 1550.0, np.array([]), np.array([])), graded_stack)


def test_field_decays_in_claddings():
    slab = Slab(np.array([3.5]), np.array([765.0]), 3.2, 3.2, 1550.0, Polarization.TE)
    n0 = slab_roots(slab)[0]
    y, v = slab_field(slab, n0)
    assert abs(v[0]) < 0.05 and abs(v[-1]) < 0.05
    # symmetric fundamental: even about the slab center
    mid = np.interp([200.0, 565.0], y, v)
    assert mid[0] == pytest.approx(mid[1], rel=1e-3)


def test_wide_ridge_tends_to_slab(graded_stack):
    slab_n = solve_mode(graded_stack, 1550.0, "TE", ModeClass.TIR_FUNDAMENTAL).n_eff
    wide = effective_index_2d(dataclasses.replace(graded_stack, ridge_width=50.0), 1550.0, "TE")
    assert abs(wide - slab_n) < 1e-4
    assert wide <= slab_n


def test_ridge_index_increases_with_width(graded_stack):
    n = [effective_index_2d(dataclasses.replace(graded_stack, ridge_width=w), 1550.0, "TE")
         for w in (2, 3, 4, 5, 6)]
    assert np.all(np.diff(n) > 0)


def test_deeper_etch_moves_ridge_index_further(graded_stack):
    slab_n = solve_mode(graded_stack, 1550.0, "TE", ModeClass.TIR_FUNDAMENTAL).n_eff
    shifts = [abs(effective_index_2d(dataclasses.replace(graded_stack, etch_depth=e), 1550.0, "TE") - slab_n)
              for e in (1.8, 1.9, 2.0, 2.5)]
    assert np.all(np.diff(shifts) > 0)


def test_lateral_guide_without_contrast():
    with pytest.raises(SolverError, match="no bound mode"):
        lateral_index(3.1, 3.1, 4000.0, 1550.0, "TM")


def test_stack_validation():
    with pytest.raises(ValueError):
        LayerStack([Layer(100.0, 0.2)] * 2)
    with pytest.raises(ValueError):
        Layer(-1.0, 0.2)
    with pytest.raises(ValueError):
        LayerStack([Layer(100.0, 0.2)] * 3, ridge_width=0.0)


def test_etched_stack_removes_top(graded_stack):
    etched = graded_stack.etched(graded_stack.etch_depth * 1e3)
    assert etched.total_thickness == pytest.approx(graded_stack.total_thickness - 2000.0)


def test_presets_layer_counts(graded_stack, m_core_stack):
    g = graded_stack.groups
    # six type-1 and five type-2 reflector layers on each side of the guide
    assert g.count("dbr1") == 12 and g.count("dbr2") == 10 and g.count("graded_dbr") == 2
    assert g.count("matching") == 2 and g.count("core") == 1
    m = m_core_stack.groups
    assert m.count("dbr1") == 12 and m.count("dbr2") == 12 and "graded_dbr" not in m
    assert graded_stack.ridge_width == 4.0 and graded_stack.length == 2000.0


def test_stack_file_round_trip(tmp_path, graded_stack):
    path = tmp_path / "stack.json"
    path.write_text(json.dumps(graded_stack.to_dict()))
    assert load_stack(path) == graded_stack


def test_repeat_blocks_expand():
    blocks = [{"thickness": 10.0, "al_fraction": 0.1}, {"repeat": 2, "layers": [
        {"thickness": 20.0, "al_fraction": 0.2}, {"thickness": 30.0, "al_fraction": 0.3}]}]
    assert [b["thickness"] for b in expand_layers(blocks)] == [10.0, 20.0, 30.0, 20.0, 30.0]


def test_unknown_preset():
    with pytest.raises(KeyError):
        preset_stack("rib")

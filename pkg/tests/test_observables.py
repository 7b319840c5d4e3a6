import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nhfloquet import observables as obs
from nhfloquet.basis import box_basis
from nhfloquet.errors import ChannelError, ConvergenceError
from nhfloquet.model import Gauge, LaserField, PotentialModel

XENON = PotentialModel()


def _table(values, rows=None):
    values = np.asarray(values, dtype=complex)
    rows = np.arange(values.shape[0]) if rows is None else np.asarray(rows)
    return obs.AmplitudeTable(rows=rows, cols=np.arange(1, values.shape[1] + 1), values=values)


@pytest.fixture(scope="module")
def small_table(small_resonance):
    return obs.amplitude_table(small_resonance, n_photons=7)


# ---------------------------------------------------------------- amplitude


def test_no_field_amplitudes_vanish(small_fieldless_resonance):
    table = obs.amplitude_table(small_fieldless_resonance, n_photons=5)
    assert np.max(np.abs(table.values)) < 1e-14
    assert abs(obs.amplitude(small_fieldless_resonance, XENON, -1, 3)) < 1e-14


@pytest.mark.parametrize("force", ["displaced", "static"])
@pytest.mark.parametrize("n_f,N", [(0, 1), (0, 3), (-3, 5), (2, 4)])
def test_two_path_oracle(small_resonance, force, n_f, N):
    quad = obs.amplitude(small_resonance, XENON, n_f, N, force=force)
    matrix = obs.amplitude(small_resonance, XENON, n_f, N, force=force, method="matrix")
    scale = max(abs(quad), 1e-12)
    assert abs(quad - matrix) < 1e-10 * max(scale, 1.0)


def test_table_matches_single_amplitudes(small_resonance, small_table):
    for i, n in enumerate(small_table.rows[::3]):
        for N in (1, 2, 5):
            if small_table.rows[0] <= n + N <= small_table.rows[-1]:
                expected = obs.amplitude(small_resonance, None, int(n), N)
                assert small_table.values[3 * i, N - 1] == pytest.approx(expected, abs=1e-15)


def test_parity_flip_changes_sign(small_resonance):
    basis = box_basis(small_resonance.problem.spec)
    flip = np.where(basis.k % 2 == 1, 1.0, -1.0)  # chi_k(-x) = (-1)^(k+1) chi_k(x)
    flipped = dataclasses.replace(small_resonance, components=small_resonance.components * flip)
    for n_f, N in [(0, 1), (-1, 2), (1, 3)]:
        a = obs.amplitude(small_resonance, XENON, n_f, N, force="static")
        b = obs.amplitude(flipped, XENON, n_f, N, force="static")
        assert b == pytest.approx(-a, abs=1e-15)


def test_out_of_window_rejected(small_resonance):
    hi = int(small_resonance.channels[-1])
    with pytest.raises(ChannelError):
        obs.amplitude(small_resonance, XENON, hi, 1)
    with pytest.raises(ChannelError):
        obs.amplitude(small_resonance, XENON, 0, 0)


def test_interior_window_rows(small_resonance):
    table = obs.amplitude_table(small_resonance, n_photons=3, window="interior")
    np.testing.assert_array_equal(table.rows, np.arange(-5, 6))
    with pytest.raises(ChannelError):
        obs.amplitude_table(small_resonance, n_photons=9, window="interior")


def test_length_gauge_uses_dipole(small_resonance):
    res = dataclasses.replace(small_resonance, problem=small_resonance.problem.replace(gauge=Gauge.LENGTH))
    table = obs.amplitude_table(res, n_photons=5)
    assert table.operator == "length"
    basis = box_basis(res.problem.spec)
    phi0 = basis.evaluate(res.component(0))
    phi1 = basis.evaluate(res.component(1))
    z = basis.nodes * np.exp(1j * res.problem.theta)
    assert table.values[list(table.rows).index(0), 0] == pytest.approx(np.sum(basis.weights * phi1 * z * phi0), abs=1e-15)


def test_table_rejects_non_finite():
    with pytest.raises(ValueError):
        _table([[np.nan, 0]])


# ------------------------------------------------------------------ spectra


def test_even_harmonics_suppressed(small_table):
    totals = np.abs(small_table.values.sum(axis=0))
    odd, even = totals[0::2], totals[1::2]
    assert even.max() < 1e-10 * odd.max()
    for N in (2, 4, 6):
        assert abs(obs.total_amplitude(small_table, N)) < 1e-10 * odd.max()


def test_single_row_total_and_sd():
    table = _table([[0.3 - 0.1j, 2j, 5.0]])
    assert obs.total_amplitude(table, 2) == 2j
    assert obs.photon_sd(table, 1) == pytest.approx(0.0, abs=1e-15)


def test_sd_two_equal_entries():
    a = 0.4 - 0.7j
    table = _table([[a], [a]])
    assert obs.photon_sd(table, 1) == pytest.approx(abs(a) * np.sqrt(2), rel=1e-14)


def test_sd_uses_complex_squares():
    table = _table([[1.0], [1j]])
    # sum A^2 = 0, (sum A)^2 = 2i -> |sqrt(-2i)| = sqrt(2)
    assert obs.photon_sd(table, 1) == pytest.approx(np.sqrt(2.0), rel=1e-14)


def test_sd_series_flags_even(small_table):
    series = obs.sd_series(small_table)
    np.testing.assert_array_equal(series.flags, series.N % 2 == 0)


def test_hgs_zero_table():
    series = obs.hgs(_table(np.zeros((4, 5))))
    np.testing.assert_array_equal(series.values, 0.0)
    assert series.kind == "HGS"


@settings(max_examples=30, deadline=None)
@given(arrays(np.complex128, (5, 6), elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)))
def test_hgs_non_negative(values):
    series = obs.hgs(_table(values))
    assert np.all(series.values >= 0)
    np.testing.assert_allclose(series.values, np.abs(values.sum(axis=0)) ** 2, rtol=1e-12, atol=1e-300)


def test_missing_photon_number():
    with pytest.raises(ChannelError):
        _table(np.ones((2, 3))).column(4)


def test_cutoff_order():
    N = np.arange(1, 16)
    values = np.where(N % 2 == 1, np.where(N <= 11, 1.0, 1e-4), 0.0)
    assert obs.cutoff_order(obs.SpectrumSeries("HGS", N, values)) == 11


# -------------------------------------------------------- natural expansion


def test_rank_one_table():
    f = np.array([1.0, 2j, -0.5, 0.3])
    g = np.array([0.2, 1.0 - 1j, 3.0])
    exp = obs.natural_expansion(_table(np.outer(g, f)))
    occ = exp.occupations
    assert occ[1] < 1e-12 * occ[0]  # eigenvalues of A A^T carry roundoff of order eps*|d_1|^2
    f1 = exp.photon_modes[:, 0]
    g1 = exp.channel_modes[:, 0]
    assert abs(abs(np.vdot(f1, f)) - np.linalg.norm(f1) * np.linalg.norm(f)) < 1e-10
    assert abs(abs(np.vdot(g1, g)) - np.linalg.norm(g1) * np.linalg.norm(g)) < 1e-10


@pytest.mark.parametrize("convention", ["c-product", "standard-svd"])
def test_reconstruction_and_ordering(small_table, convention):
    exp = obs.natural_expansion(small_table, convention)
    assert np.max(np.abs(exp.reconstruct() - small_table.values)) < 1e-10
    assert np.all(np.diff(exp.occupations) <= 0)


def test_c_product_mode_normalization(small_table):
    f = obs.natural_expansion(small_table).photon_modes
    np.testing.assert_allclose(np.sum(f * f, axis=0), 1.0, atol=1e-10)


def test_standard_svd_frobenius_identity(small_table):
    exp = obs.natural_expansion(small_table, "standard-svd")
    assert exp.occupations.sum() == pytest.approx(np.sum(np.abs(small_table.values) ** 2), abs=1e-10)
    f = exp.photon_modes
    np.testing.assert_allclose(np.sum(np.abs(f) ** 2, axis=0), 1.0, atol=1e-12)


def test_degenerate_weights_flagged():
    exp = obs.natural_expansion(_table(np.diag([2.0, 2.0, 1.0])), "standard-svd")
    np.testing.assert_array_equal(exp.degenerate, [True, True, False])


def test_unknown_convention():
    with pytest.raises(ValueError):
        obs.natural_expansion(_table(np.eye(2)), "polar")


def test_photon_distributions_rank_one():
    exp = obs.natural_expansion(_table(np.outer([1.0, 0.5], [0.3, 1j, 2.0])))
    partial, total = obs.photon_distributions(exp)
    assert partial.kind == "Prob_partial(1)" and total.kind == "Prob_total"
    np.testing.assert_allclose(total.values, exp.occupations[0] * partial.values, rtol=1e-10)
    assert np.all(partial.values >= 0) and np.all(total.values >= 0)


def test_photon_distribution_mode_beyond_rank():
    exp = obs.natural_expansion(_table(np.ones((2, 3))))
    with pytest.raises(ValueError):
        obs.photon_distributions(exp, modes=(3,))


# ---------------------------------------------------------------------- ATI


def test_channel_opening():
    laser = LaserField()
    assert obs.ati_channel_momentum(laser, -0.44, 7) is None
    k8 = obs.ati_channel_momentum(laser, -0.44, 8)
    assert k8 == pytest.approx(np.sqrt(2 * (8 * 0.0574 - 0.44)), rel=1e-14)
    assert k8 == pytest.approx(0.1960, abs=1e-4)
    first = min(N for N in range(1, 20) if obs.ati_channel_momentum(laser, -0.44, N) is not None)
    assert first == 8


def test_channel_momentum_input_checks():
    with pytest.raises(ValueError):
        obs.ati_channel_momentum(LaserField(), 0.1, 8)
    with pytest.raises(ChannelError):
        obs.ati_channel_momentum(LaserField(), -0.44, 0)


def test_closed_channel_rejected(small_resonance):
    with pytest.raises(ChannelError, match="closed"):
        obs.ati_partial_width(small_resonance, XENON, small_resonance.problem.laser, 7)


def test_partial_widths_non_negative(small_resonance):
    for channel in obs.ati_spectrum(small_resonance, 8):
        assert channel.gamma >= 0
        assert channel.N >= 8


def test_non_decaying_integrand_reported(small_resonance):
    flat = PotentialModel(a=1e-6)
    with pytest.raises(ConvergenceError, match="decay"):
        obs.ati_channel(small_resonance, 8, model=flat)


def test_overlay_alignment(small_resonance, small_table):
    ati, sd = obs.ati_sd_overlay(small_resonance, N_range=range(1, 8), table=small_table)
    np.testing.assert_array_equal(ati.N, sd.N)
    assert ati.kind == "ATI" and sd.kind == "SD"
    assert np.all(ati.values[:7] >= 0)


def test_overlay_empty(small_resonance):
    ati, sd = obs.ati_sd_overlay(small_resonance, N_range=[])
    assert len(ati.N) == len(sd.N) == 0


def test_cutoff_order_needs_two_odd_orders():
    assert obs.cutoff_order(obs.SpectrumSeries("HGS", np.arange(1, 4), np.ones(3))) is None

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reicoh import afc
from reicoh.afc import AbsorptionProfile, CombSpec
from reicoh.models import afc_efficiency_analytic
from reicoh.quantities import DomainError

SMALL = 2**16


def _profile(alphaL, span=100.0):
    freq = afc.frequency_grid(span, alphaL.size)
    return AbsorptionProfile(freq, alphaL)


@pytest.mark.parametrize("delta,ts", [(0.2, 5.0), (2.0, 0.5), (1.0, 1.0), (0.5, 2.0)])
def test_storage_time(delta, ts):
    assert afc.storage_time(delta) == pytest.approx(ts, rel=1e-15)


def test_storage_time_rejects_nonpositive():
    with pytest.raises(DomainError):
        afc.storage_time(0.0)


def test_comb_spec_validation():
    with pytest.raises(DomainError):
        CombSpec(1.0, 1.0, 4.0, 1.0)  # span < 2Δ
    with pytest.raises(DomainError):
        CombSpec(12.0, 1.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        CombSpec(12.0, 1.0, 4.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        CombSpec(12.0, 1.0, 4.0, 1.0, tooth_shape="lorentzian")


def test_tooth_count():
    assert CombSpec(12.0, 0.2, 4.0, 1.0).n_teeth == 60
    assert CombSpec(12.0, 2.0, 4.0, 1.0).n_teeth == 6


def test_half_duty_cycle_at_finesse_two():
    spec = CombSpec(12.0, 1.0, 2.0, 3.0, 0.5)
    freq = afc.frequency_grid(24.0, 2**16)
    prof = afc.build_comb(spec, freq)
    k_lo, k_hi = spec.tooth_range
    inside = (freq >= (k_lo - 0.5) * spec.delta) & (freq < (k_hi + 0.5) * spec.delta)
    mean = prof.alphaL[inside].mean()
    cell = (spec.d_peak - spec.d0) / inside.sum() * spec.n_teeth
    assert mean == pytest.approx(spec.d0 + (spec.d_peak - spec.d0) / 2, abs=cell)
    # outside the prepared span only the background remains
    assert np.all(prof.alphaL[np.abs(freq) > 7.0] == spec.d0)
    assert np.all(prof.alphaL >= 0)


def test_gaussian_tooth_shape():
    spec = CombSpec(12.0, 1.0, 4.0, 2.0, 0.0, "gaussian")
    freq = afc.frequency_grid(24.0, 2**16)
    prof = afc.build_comb(spec, freq)
    i0 = int(np.argmin(np.abs(freq)))
    i_half = int(np.argmin(np.abs(freq - spec.tooth_width / 2)))
    assert prof.alphaL[i0] == pytest.approx(2.0, rel=1e-6)
    assert prof.alphaL[i_half] == pytest.approx(1.0, rel=2e-3)


def test_coarse_grid_names_minimum_density():
    spec = CombSpec(12.0, 1.0, 4.0, 1.0)
    freq = afc.frequency_grid(24.0, 512)
    with pytest.raises(ValueError, match="at least 960 points"):
        afc.build_comb(spec, freq)


def test_flat_absorber():
    d = 1.3
    H = afc.transfer_function(_profile(np.full(4096, d)))
    np.testing.assert_allclose(np.abs(H), math.exp(-d / 2), rtol=1e-12)
    np.testing.assert_allclose(np.angle(H), 0.0, atol=1e-12)


def test_vacuum_is_identity():
    prof = _profile(np.zeros(4096), span=400.0)
    H = afc.transfer_function(prof)
    np.testing.assert_array_equal(H, 1.0)
    pulse = afc.gaussian_pulse(prof, 0.1)
    out = afc.propagate(pulse, H, prof)
    np.testing.assert_allclose(out.samples, pulse.samples, rtol=0, atol=1e-10)
    assert out.energy == pytest.approx(pulse.energy, rel=1e-10)


def test_beer_lambert_energy():
    d = 0.8
    prof = _profile(np.full(4096, d), span=400.0)
    pulse = afc.gaussian_pulse(prof, 0.1)
    out = afc.propagate(pulse, np.full(4096, math.exp(-d / 2)), prof)
    assert out.energy == pytest.approx(math.exp(-d) * pulse.energy, rel=1e-9)


def test_lorentzian_tooth_dispersion():
    # αL = a γ²/(f² + γ²) pairs with φ = (a/2) γ f/(f² + γ²)
    freq = afc.frequency_grid(200.0, 2**16)
    a, g = 2.0, 0.5
    H = afc.transfer_function(AbsorptionProfile(freq, a * g * g / (freq**2 + g * g)))
    exact = 0.5 * a * g * freq / (freq**2 + g * g)
    central = np.abs(freq) < 40.0
    err = np.max(np.abs(np.angle(H) - exact)[central]) / np.max(np.abs(exact))
    assert err < 0.01


def test_bandwidth_check():
    spec = CombSpec(12.0, 1.0, 4.0, 1.0)
    prof = afc.build_comb(spec, afc.frequency_grid(20.0, SMALL))
    H = afc.transfer_function(prof)
    with pytest.raises(ValueError, match="bandwidth"):
        afc.propagate(afc.gaussian_pulse(prof, 0.05), H, prof)


def test_echo_window_collision():
    spec = CombSpec(12.0, 1.0, 4.0, 1.0)
    sim = afc.simulate(spec, n_grid=SMALL)
    wide = afc.gaussian_pulse(sim.profile, 0.6)
    with pytest.raises(ValueError, match="inside the transmitted pulse"):
        afc.detect_echo(sim.output, 1.0, wide)


@pytest.mark.parametrize("delta", [0.2, 2.0])
def test_echo_arrival(delta):
    sim = afc.simulate(CombSpec(12.0, delta, 4.0, 1.0), n_grid=2**18)
    assert abs(sim.echo.arrival_time - 1 / delta) <= sim.input.dt
    lo, hi = sim.echo.window
    assert lo == pytest.approx(0.6 / delta) and hi == pytest.approx(1.4 / delta)


def test_flat_profile_gives_no_echo():
    sim = afc.simulate(CombSpec(12.0, 1.0, 4.0, 1.0, 1.0), n_grid=SMALL)
    assert sim.echo.efficiency < 1e-6


def test_grid_convergence():
    for shape in ("square", "gaussian"):
        spec = CombSpec(12.0, 1.0, 4.0, 2.0, 0.0, shape)
        a = afc.simulate(spec, n_grid=2**17).echo.efficiency
        b = afc.simulate(spec, n_grid=2**18).echo.efficiency
        assert abs(b / a - 1) < 0.02


def test_efficiency_curve_examples():
    rows = afc.efficiency_curve(4.0, 0.0, "square", [0.0, 1.0], n_grid=SMALL)
    assert rows[0][1] < 1e-12 and rows[0][2] == 0.0
    d, num, ana = rows[1]
    assert ana == pytest.approx(0.03946, abs=1e-5)
    assert abs(num / ana - 1) < 0.15


def test_background_scales_both_efficiencies():
    base = afc.efficiency_curve(3.0, 0.0, "square", [2.0], n_grid=SMALL)[0]
    more = afc.efficiency_curve(3.0, 1.0, "square", [2.0], n_grid=SMALL)[0]
    assert more[2] == pytest.approx(base[2] / math.e, rel=1e-12)
    assert more[1] == pytest.approx(base[1] / math.e, rel=0.05)


def test_efficiency_curve_order_independent():
    ds = [0.5, 2.0, 1.0]
    fwd = afc.efficiency_curve(4.0, 0.0, "gaussian", ds, n_grid=SMALL)
    rev = afc.efficiency_curve(4.0, 0.0, "gaussian", ds[::-1], n_grid=SMALL)
    assert fwd == rev[::-1]


@settings(max_examples=15, deadline=None)
@given(
    st.sampled_from([0.5, 1.0, 2.0]),
    st.floats(1.5, 8.0),
    st.floats(0.0, 6.0),
    st.floats(0.0, 1.0),
    st.sampled_from(["square", "gaussian"]),
)
def test_passive_causal_and_lossy(delta, F, height, d0, shape):
    # default grid: sharp square teeth leave a slowly decaying tail whose
    # wrapped-around share falls as 1/n_grid
    spec = CombSpec(12.0, delta, F, d0 + height, d0, shape)
    sim = afc.simulate(spec)
    assert np.max(np.abs(sim.H)) <= 1.0 + 4 * np.finfo(float).eps
    assert afc.acausal_energy_fraction(sim.H) < 1e-4
    assert sim.output.energy <= sim.input.energy * (1 + 1e-12)
    assert 0.0 <= sim.echo.efficiency <= 1.0


def test_closed_form_matches_simulation_for_square_teeth():
    for F in (2.0, 4.0):
        for d, num, ana in afc.efficiency_curve(F, 0.0, "square", [0.5, 3.0], n_grid=2**17):
            assert num == pytest.approx(ana, rel=0.01)
            assert ana == afc_efficiency_analytic(d, F)

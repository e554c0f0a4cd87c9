import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import field_from
from nlsflux import spectral as sp
from nlsflux.verify import convolution_cubic, random_band_field


G16 = sp.TorusGrid(2, 1.0, 16)


def test_grid_validation():
    with pytest.raises(ValueError):
        sp.TorusGrid(1, 1.0, 16)
    with pytest.raises(ValueError):
        sp.TorusGrid(2, 1.0, 12)
    with pytest.raises(ValueError):
        sp.TorusGrid(2, -1.0, 16)


def test_shape_error():
    with pytest.raises(sp.ShapeError):
        sp.SpectralField(G16, np.zeros((8, 8), complex))


def test_wavevectors_and_band():
    g = sp.TorusGrid(2, 2.0, 8)
    assert g.k[0][1, 0] == pytest.approx(0.5)
    assert g.k[0][7, 0] == pytest.approx(-0.5)
    assert not g.band[4, 0] and g.band[3, 3]
    assert g.volume == pytest.approx((4 * math.pi) ** 2)


def test_dft_against_brute_force(oracles):
    u = field_from(G16, oracles["modes"], oracles["coef"])
    vals = sp.inverse_transform(u).values
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(oracles["mean_abs2"], rel=1e-12)
    back = sp.forward_transform(sp.PhysicalField(G16, vals)).coeff
    for n, (re, im) in oracles["dft_probe"]:
        assert back.ravel()[G16.flat_index(n)] == pytest.approx(re + 1j * im, abs=1e-10)


def test_parseval(rng):
    vals = rng.normal(size=G16.shape) + 1j * rng.normal(size=G16.shape)
    F = sp.forward_transform(sp.PhysicalField(G16, vals))
    assert sp.norm_sq(F.coeff, G16) == pytest.approx(np.mean(np.abs(vals) ** 2), rel=1e-13)


def test_dealiased_cubic_frozen_oracle(oracles):
    u = field_from(G16, oracles["edge_modes"], oracles["edge_coef"])
    got = sp.padded(G16, 2).cubic(u.coeff)
    ref = np.zeros(G16.shape, complex)
    for n, (re, im) in oracles["edge_cubic"]:
        ref.ravel()[G16.flat_index(n)] = re + 1j * im
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))
    q = sp.padded(G16, 2).mean_abs_pow(u.coeff, 4)
    assert q == pytest.approx(oracles["edge_quartic_mean"], rel=1e-12)


def test_unpadded_cubic_aliases(oracles):
    u = field_from(G16, oracles["edge_modes"], oracles["edge_coef"])
    got = sp.padded(G16, 1).cubic(u.coeff)
    ref = convolution_cubic(u)
    assert np.max(np.abs(got - ref)) > 1e-3 * np.max(np.abs(ref))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(-7, 7), st.integers(-7, 7)), min_size=1, max_size=4, unique=True),
       st.integers(0, 2**31))
def test_cubic_matches_convolution_property(modes, seed):
    rng = np.random.default_rng(seed)
    c = np.zeros(G16.shape, complex)
    for n in modes:
        c.ravel()[G16.flat_index(n)] = complex(rng.normal(), rng.normal()) * G16.volume
    u = sp.SpectralField(G16, c)
    ref = convolution_cubic(u)
    got = sp.padded(G16, 2).cubic(c)
    assert np.max(np.abs(got - ref)) <= 1e-11 * max(np.max(np.abs(ref)), 1e-300)


def test_psi_properties():
    r = np.linspace(0, 3, 601)
    p = sp.psi(r)
    assert np.all(p[r <= 1] == 1) and np.all(p[r >= 2] == 0)
    assert np.all(np.diff(p) <= 0)
    assert sp.psi(np.array([1.5]))[0] == pytest.approx(0.5)


@pytest.mark.parametrize("cutoff", ["smooth", "sharp"])
def test_lp_telescoping(cutoff):
    f = sp.LPFilter(G16, cutoff)
    Ns = [2.0**j for j in range(-3, 5)]
    tot = f.low(Ns[0]) + sum(f.shell(N) for N in Ns[:-1])
    assert np.max(np.abs(tot - f.low(Ns[-1]))) < 1e-14


def test_lp_domain_error():
    with pytest.raises(sp.DomainError):
        sp.LPFilter(G16).low(0.0)


def test_shell_ladder():
    g = sp.TorusGrid(2, 1.0, 64)
    lad = sp.shell_ladder(g)
    assert lad[0] == 2.0**-6 and lad[-1] == 32.0


def test_projections_are_fourier_multipliers(rng):
    u = random_band_field(G16, rng)
    lo = sp.lp_project_low(u, 2.0)
    hi = sp.lp_project_high(u, 2.0)
    assert np.allclose((lo + hi).coeff, u.coeff)


def test_volume_lp_norm_plane_wave():
    c = np.zeros(G16.shape, complex)
    c.ravel()[G16.flat_index((2, 1))] = 3.0 * G16.volume
    u = sp.SpectralField(G16, c)
    for p in (1, 2, 4, 7.5):
        assert sp.volume_lp_norm(u, p) == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(sp.DomainError):
        sp.volume_lp_norm(u, 0.5)


@pytest.mark.parametrize("lam", [1.0, 2.0, 4.0])
def test_bernstein_random_fields(rng, lam):
    g = sp.TorusGrid(2, lam, 32)
    for _ in range(4):
        u = random_band_field(g, rng, decay=rng.uniform(5, 200))
        for N in (0.25, 1.0, 4.0):
            for p, q in ((2, 2), (2, 4)):
                rep = sp.bernstein_suite(u, N, p, q)
                assert rep.passed, rep.ratios


def test_b5_scale_factor_is_not_uniform_for_p1(rng):
    # with (N/lam) in the B5 factor and p = 1 the worst ratio grows with lam
    worst = []
    for lam in (1.0, 4.0):
        g = sp.TorusGrid(2, lam, 32)
        u = random_band_field(g, np.random.default_rng(3), decay=20.0)
        worst.append(np.nanmax([sp.bernstein_suite(u, N, 1, 4).ratios["B5"] for N in (0.125, 0.25, 0.5, 1.0)]))
    assert worst[1] > 10 * worst[0]


def test_bernstein_empty_shell_is_nan():
    c = np.zeros(G16.shape, complex)
    c.ravel()[G16.flat_index((1, 0))] = 1.0
    rep = sp.bernstein_suite(sp.SpectralField(G16, c), 4.0, 2, 4)
    assert math.isnan(rep.ratios["B5"]) and rep.passed


def test_bernstein_domain():
    with pytest.raises(sp.DomainError):
        sp.bernstein_suite(sp.SpectralField(G16, np.ones(G16.shape, complex)), 1.0, 4, 2)

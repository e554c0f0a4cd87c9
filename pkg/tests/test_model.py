import numpy as np
import pytest

from nlsflux import model as md, spectral as sp
from nlsflux.verify import random_band_field

G = sp.TorusGrid(2, 1.0, 32)


def test_params_validation():
    with pytest.raises(md.ConfigurationError):
        md.SimParams(nu=0.0, sigma=0.5)
    p = md.SimParams(nu=0.1, sigma=0.5)
    assert p.drive_ratio == pytest.approx(0.4)
    assert p.to_dict()["nu_over_sigma2"] == pytest.approx(0.4)


def test_build_forcing_full_annulus():
    ens = md.build_forcing(G)
    assert len(ens) == 24  # 12 lattice modes with 0.5 <= |k| <= 2, two phases each
    assert ens.eps_wa == pytest.approx(1.0)
    # every profile has the same |k|^2 weighting: eps_ke = 1/2 sum |k|^2 |a|^2
    a2 = np.abs(ens.amplitudes) ** 2
    assert ens.eps_ke == pytest.approx(0.5 * np.sum(ens.k_abs**2 * a2))
    assert ens.is_phase_complete()
    assert md.validate_forcing(ens).passed


def test_build_forcing_subset_and_errors(rng):
    ens = md.build_forcing(G, count=5, rng=rng)
    assert len(ens) == 6
    with pytest.raises(md.ConfigurationError):
        md.build_forcing(G, annulus=(1.2, 2.0))
    with pytest.raises(md.ConfigurationError):
        md.build_forcing(G, count=200)
    with pytest.raises(md.ConfigurationError):
        md.ForcingEnsemble(G, np.array([[0, 0]]), np.array([1.0]), (0.5, 2.0))


def test_single_phase_not_complete():
    ens = md.ForcingEnsemble(G, np.array([[1, 0]]), np.array([1.0]), (0.5, 2.0))
    assert not ens.is_phase_complete()


def test_manifest_roundtrip():
    ens = md.build_forcing(G)
    back = md.ForcingEnsemble.from_manifest(ens.to_manifest())
    assert back.content_hash() == ens.content_hash()


def test_profile_norm():
    ens = md.build_forcing(G)
    g0 = ens.profile(0)
    assert sp.norm_sq(g0.coeff, G) == pytest.approx(abs(ens.amplitudes[0]) ** 2)


def test_plane_wave_hamiltonian():
    c = np.zeros(G.shape, complex)
    c.ravel()[G.flat_index((1, 0))] = 2.0 * G.volume
    u = sp.SpectralField(G, c)
    H = md.hamiltonian(u, sigma=0.5)
    assert H.kinetic == pytest.approx(0.5 * 4.0)
    assert H.potential == pytest.approx(0.25 * 0.5 * 16.0)
    assert md.wave_action(u) == pytest.approx(2.0)


def test_potential_dissipation_forms_agree(rng):
    """Re mean(D conj(u)|u|^2 u) = |u|^4 + 2|u grad u|^2 + Re mean(u^2 (grad conj u)^2)."""
    u = random_band_field(G, rng, decay=10.0, amp=0.3)
    ens = md.build_forcing(G)
    rec = md.dissipation_functionals(u, ens, nu=0.1, sigma=0.5)
    assert rec.pe_direct == pytest.approx(rec.pe_decomposed, rel=1e-10)
    assert rec.ito == pytest.approx(2 * rec.ito_half)


def test_ito_term_single_mode_profiles(rng):
    u = random_band_field(G, rng, decay=10.0)
    ens = md.build_forcing(G)
    rec = md.dissipation_functionals(u, ens, nu=0.1, sigma=0.5)
    l2 = sp.norm_sq(u.coeff, G)
    assert rec.ito == pytest.approx(0.125 * l2 * np.sum(np.abs(ens.amplitudes) ** 2), rel=1e-12)

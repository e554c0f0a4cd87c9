import numpy as np
import pytest
from conftest import field_from

from nlsflux import diagnostics as dg, integrator as it, model as md, spectral as sp
from nlsflux.verify import _flux_fd, _flux_pairs, random_band_field
from nlsflux.config import RunConfig
from nlsflux.stats import StationaryEstimate


@pytest.fixture(scope="module")
def quartet(oracles):
    g = sp.TorusGrid(2, oracles["grid"]["lam"], oracles["grid"]["m"])
    return field_from(g, oracles["quartet_modes"], oracles["quartet_coef"])


@pytest.mark.parametrize("N", [1.0, 2.0])
def test_flux_wa_matches_brute_force(quartet, oracles, N):
    ref = oracles["flux_wa_quartet"][str(N)]
    assert dg.flux_wa(quartet, N) == pytest.approx(ref, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("N", [1.0, 2.0])
def test_flux_ke_matches_brute_force(quartet, oracles, N):
    ref = oracles["flux_ke_quartet"][str(N)]
    assert dg.flux_ke(quartet, N) == pytest.approx(ref, rel=1e-10, abs=1e-11)


def test_flux_wa_three_mode_oracles(oracles):
    g = sp.TorusGrid(2, 1.0, 16)
    u = field_from(g, oracles["modes"], oracles["coef"])
    assert abs(dg.flux_wa(u, 2.0) - oracles["flux_wa_N2"]) < 1e-12
    e = field_from(g, oracles["edge_modes"], oracles["edge_coef"])
    assert abs(dg.flux_wa(e, 2.0) - oracles["flux_wa_edge_N2"]) < 1e-10


def test_fluxes_vanish_on_zero_and_single_mode():
    g = sp.TorusGrid(2, 1.0, 16)
    z = sp.SpectralField(g, np.zeros(g.shape, complex))
    for N in (0.5, 2.0):
        assert dg.flux_wa(z, N) == 0.0 and dg.flux_ke(z, N) == 0.0
        assert dg.flux_h(z, N, 0.5) == 0.0
    c = np.zeros(g.shape, complex)
    c.ravel()[g.flat_index((2, 1))] = 3.0 * g.volume
    u = sp.SpectralField(g, c)
    for N in (0.5, 1.0, 2.0, 4.0):
        assert abs(dg.flux_wa(u, N)) < 1e-12
        assert abs(dg.flux_ke(u, N)) < 1e-10
        assert abs(dg.flux_h(u, N, 0.5)) < 1e-10


def test_fluxes_vanish_when_projection_is_identity(rng):
    g = sp.TorusGrid(2, 1.0, 16)
    u = random_band_field(g, rng, decay=20.0)
    big = 64.0  # every retained mode sits below the cutoff
    assert abs(dg.flux_wa(u, big)) < 1e-12
    assert abs(dg.flux_h(u, big, 0.7)) < 1e-9
    assert abs(dg.flux_h(u, big, 0.7, form="literal")) > 1e-6


@pytest.mark.parametrize("lam", [1.0, 2.0])
def test_flux_derivative_richardson(lam):
    cfg = RunConfig.from_mapping({"m": 32, "lam": lam})
    p = cfg.params()
    ens = md.build_forcing(p.grid)
    st = it.Stepper(p, ens)
    u = random_band_field(p.grid, np.random.default_rng(2), decay=8.0, amp=0.5)
    filt = sp.default_filter(p.grid)
    for name, fn, fl in _flux_pairs(p, filt, cfg):
        ratio, rel = _flux_fd(st, u, p, fn, fl)
        assert ratio <= 0.8 and rel < 0.1, (name, ratio, rel)


def test_literal_hamiltonian_flux_fails_derivative_check():
    cfg = RunConfig.from_mapping({"m": 32, "flux_form": "literal"})
    p = cfg.params()
    st = it.Stepper(p, md.build_forcing(p.grid))
    u = random_band_field(p.grid, np.random.default_rng(2), decay=8.0, amp=0.5)
    name, fn, fl = _flux_pairs(p, sp.default_filter(p.grid), cfg)[2]
    ratio, rel = _flux_fd(st, u, p, fn, fl)
    assert not (ratio <= 0.8 and rel < 0.1)


def test_shell_sample_matches_direct_functions(rng):
    p = md.SimParams(nu=0.1, sigma=0.5, m=32)
    ens = md.build_forcing(p.grid)
    diag = dg.ShellDiagnostics(ens, p.sigma, shells=(0.5, 1.0, 2.0, 4.0))
    u = random_band_field(p.grid, rng, decay=10.0, amp=0.4)
    x = diag.sample(u.coeff)
    L = diag.layout
    for j, N in enumerate(diag.shells):
        assert x[L.shell_slice["pi_wa"]][j] == pytest.approx(dg.flux_wa(u, N), rel=1e-10, abs=1e-14)
        assert x[L.shell_slice["pi_ke"]][j] == pytest.approx(dg.flux_ke(u, N), rel=1e-10, abs=1e-14)
        assert x[L.shell_slice["pi_h"]][j] == pytest.approx(dg.flux_h(u, N, p.sigma), rel=1e-9, abs=1e-14)
    assert x[L.index["pe_direct"]] == pytest.approx(x[L.index["pe_decomposed"]], rel=1e-10)
    assert x[L.index["wave_action"]] == pytest.approx(md.wave_action(u), rel=1e-12)


def test_flat_spectrum_slope_is_zero():
    k = np.arange(1, 20.0)
    fit = dg.fit_slope(k, np.full_like(k, 2.5), (1, 19))
    assert abs(fit.slope) < 1e-12
    fit = dg.fit_slope(k, 3 * k ** (-1.0 / 3), (2, 15))
    assert fit.slope == pytest.approx(-1.0 / 3, abs=1e-12)
    with pytest.raises(md.ConfigurationError):
        dg.fit_slope(k, k, (1, 2))


def test_shell_sum_counts_white_field():
    """Unit |u_hat|^2 on every retained mode: E(k_j) * V^2 / lam is the shell count.

    Shell j holds the lattice points n with round(|n|) = j.
    """
    g = sp.TorusGrid(2, 2.0, 16)
    pm = g.band.astype(float).ravel()
    k, E, counts = dg.shell_sum(g, pm)
    assert np.allclose(E[0] * g.volume**2 / g.lam, counts)
    assert counts[0] == 1 and counts[1] == 8 and counts.sum() == int(g.band.sum())
    assert k[1] == pytest.approx(0.5)


def test_csv_output_is_deterministic(tmp_path):
    ests = [StationaryEstimate(x, 0.01, 50, 1.0) for x in (0.1, 1 / 3)]
    fc = dg.FluxCurve((0.5, 1.0), ests, ests, ests)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    dg.write_flux_curve(a, fc)
    dg.write_flux_curve(b, fc)
    assert a.read_bytes() == b.read_bytes()
    assert "0.3333333333333333" in a.read_text()


@pytest.mark.parametrize("lam", [1.0, 4.0])
def test_lp_orthogonality_defect(rng, lam):
    g = sp.TorusGrid(2, lam, 32)
    u = random_band_field(g, rng)
    u = sp.SpectralField(g, u.coeff * (g.kabs > 0))
    assert abs(dg.lp_orthogonality_defect(u, sp.LPFilter(g, "sharp"))) < 1e-13
    # smooth shells overlap, so their squared norms undercount
    assert dg.lp_orthogonality_defect(u, sp.LPFilter(g, "smooth")) > 1e-3


@pytest.mark.parametrize("cutoff", ["sharp", "smooth"])
def test_low_dissipation_is_monotone_in_N(rng, cutoff):
    g = sp.TorusGrid(2, 1.0, 32)
    filt = sp.LPFilter(g, cutoff)
    u = random_band_field(g, rng, decay=30.0)
    D = md.dissipation_symbol(g)
    vals = [sp.norm_sq(u.coeff, g, D * filt.low(N) ** 2) for N in sp.shell_ladder(g)]
    assert np.all(np.diff(vals) >= -1e-14 * vals[-1])


def test_midpoint_flux_is_the_exact_substep_transfer(rng):
    """Over one implicit-midpoint cubic substep, the change of 1/2|P_{>=N}u|^2
    equals -sigma dt Pi_WA at the midpoint state (quadratic invariant)."""
    p = md.SimParams(nu=0.1, sigma=0.5, m=32, dt=0.01)
    st = it.Stepper(p, md.build_forcing(p.grid), tol=1e-14)
    u = random_band_field(p.grid, rng, decay=10.0, amp=0.4)
    filt = sp.default_filter(p.grid)
    out = st.nonlinear_flow(u.coeff.copy(), p.dt)
    w = sp.SpectralField(p.grid, st.midpoint)
    for N in (0.5, 1.0, 2.0, 4.0):
        h2 = filt.high(N) ** 2
        dq = 0.5 * (sp.norm_sq(out, p.grid, h2) - sp.norm_sq(u.coeff, p.grid, h2))
        ref = -p.sigma * p.dt * dg.flux_wa(w, N, filt)
        assert dq == pytest.approx(ref, rel=1e-8, abs=1e-14)
        k2 = p.grid.ksq * filt.low(N) ** 2
        dk = 0.5 * (sp.norm_sq(out, p.grid, k2) - sp.norm_sq(u.coeff, p.grid, k2))
        assert dk == pytest.approx(-p.sigma * p.dt * dg.flux_ke(w, N, filt), rel=1e-8, abs=1e-12)


def test_step_dissipation_symbol():
    g = sp.TorusGrid(2, 1.0, 16)
    D = md.dissipation_symbol(g)
    assert np.allclose(dg.step_dissipation_symbol(g, 0.1, 1e-6), D, rtol=1e-9)
    big = dg.step_dissipation_symbol(g, 0.1, 0.01)
    assert np.all(big >= D) and np.max(big / D - 1) > 1e-3


def test_sample_uses_midpoint_for_fluxes(rng):
    p = md.SimParams(nu=0.1, sigma=0.5, m=32)
    ens = md.build_forcing(p.grid)
    diag = dg.ShellDiagnostics(ens, p.sigma, shells=(1.0, 2.0), step=(p.nu, p.dt))
    u = random_band_field(p.grid, rng, decay=10.0, amp=0.4)
    w = random_band_field(p.grid, rng, decay=10.0, amp=0.4)
    x = diag.sample(u.coeff, w.coeff)
    L = diag.layout
    assert x[L.shell_slice["pi_wa"]][1] == pytest.approx(dg.flux_wa(w, 2.0), rel=1e-10)
    assert x[L.shell_slice["pi_wa_end"]][1] == pytest.approx(dg.flux_wa(u, 2.0), rel=1e-10)
    assert x[L.shell_slice["pi_h"]][0] == pytest.approx(dg.flux_h(w, 1.0, p.sigma), rel=1e-9)
    assert x[L.index["wave_action"]] == pytest.approx(md.wave_action(u), rel=1e-12)
    # injection terms carry the same D_step / D factor as the dissipation
    assert diag.inj_wa_total == pytest.approx(ens.eps_wa, rel=1e-4) and diag.inj_wa_total > ens.eps_wa

import numpy as np
import pytest
import scipy.sparse as sp

from dicke_usc.algebra import fock_destroy, spin_ops
from dicke_usc.models import ModelParams
from dicke_usc.open_system import (BathChannel, FilterSpec, KernelDimensionError, build_gme,
                                   choose_d_keep, coupling_operator, default_channels,
                                   dephasing_rate, dressed_jumps, evolve, ohmic_rates,
                                   secular_lindbladian, steady_state, thermal_occupation,
                                   trace_functional)
from dicke_usc.spectrum import adaptive_solve


def _setup(N=2, lam=0.3, k=40, window=5.0, **kw):
    p = ModelParams(N, lam=lam, **kw)
    eig = adaptive_solve(p, k)
    return p, eig, choose_d_keep(eig.energies, window)


def test_rates():
    ch = BathChannel("cavity", 1e-3, 0.15, f=1.0)
    assert np.isclose(ohmic_rates(ch, 1.0), 1e-3)
    assert np.isclose(thermal_occupation(1.0, 0.15), 1 / np.expm1(1 / 0.15))
    assert np.isclose(thermal_occupation(1.0, 0.15), 1.274e-3, rtol=1e-3)
    assert np.isclose(dephasing_rate(ch), 1e-3 * 0.15 / 4)
    cold = BathChannel("cavity", 1e-3, 0.0, f=1.0)
    assert thermal_occupation(np.array([0.5, 2.0]), 0.0).tolist() == [0.0, 0.0]
    assert dephasing_rate(cold) == 0.0


def test_channel_validation():
    with pytest.raises(ValueError):
        BathChannel("phonon", 1e-3)
    with pytest.raises(ValueError):
        BathChannel("cavity", -1e-3)
    with pytest.raises(ValueError):
        BathChannel("cavity", 1e-3, f=0.0)
    with pytest.raises(ValueError):
        BathChannel("individual", 1e-3)


def test_reference_frequencies():
    p = ModelParams(2, (1.0, 1.2))
    chans = default_channels(p, "both")
    assert [c.reference(p) for c in chans] == [1.0, 1.1, 1.0, 1.2]
    assert chans[1].gamma == chans[2].gamma == 5e-4
    assert default_channels(p, "individual")[1].gamma == 1e-3


def test_d_keep_keeps_clusters_whole():
    e = np.array([0.0, 1.0, 2.0, 2.0 + 5e-10, 2.0 + 8e-10, 3.0])
    assert choose_d_keep(e, 2.0) == 2
    assert choose_d_keep(e, 2.0 + 6e-10) == 5
    assert choose_d_keep(e, 2.5) == 5
    assert choose_d_keep(e, 1e-3) == 1


def test_bare_cavity_jumps():
    p, eig, d = _setup(1, 0.0, k=12, window=4.0, omega_a=(1.37,))
    jumps = dressed_jumps(eig, coupling_operator(BathChannel("cavity", 1e-3), p, eig.space), d)
    photon = np.real(eig.expect(fock_destroy(eig.space).dag() @ fock_destroy(eig.space)))[:d]
    for w, lo, hi, amp in zip(jumps.omega, jumps.low, jumps.high, jumps.amp):
        assert np.isclose(w, 1.0)
        assert np.isclose(abs(amp), np.sqrt(round(photon[hi])))
        assert round(photon[hi]) == round(photon[lo]) + 1


def test_jumps_reconstruct_projected_operator():
    p, eig, d = _setup(2, 0.5)
    for ch in default_channels(p, "both"):
        op = coupling_operator(ch, p, eig.space)
        jumps = dressed_jumps(eig, op, d)
        v = eig.states[:, :d]
        ref = v.conj().T @ ((op.matrix + op.matrix.conj().T) @ v)
        assert np.abs(jumps.reconstruct() - ref).max() < 1e-12
        assert np.allclose(jumps.s_minus(), jumps.s_plus().conj().T)


def test_dark_ladder_couples_only_individually():
    p, eig, d = _setup(2, 0.5)
    s = spin_ops(eig.space)
    j2 = s["Jx"] @ s["Jx"] + s["Jy"] @ s["Jy"] + s["Jz"] @ s["Jz"]
    dark = np.where(np.abs(np.real(eig.expect(j2)))[:d] < 1e-8)[0]
    assert len(dark) >= 2
    bright = np.setdiff1d(np.arange(d), dark)
    ind = dressed_jumps(eig, coupling_operator(BathChannel("individual", 1e-3, site=0), p, eig.space), d)
    col = dressed_jumps(eig, coupling_operator(BathChannel("collective", 1e-3), p, eig.space), d)
    assert np.abs(ind.x[np.ix_(dark, bright)]).max() > 0.1
    assert np.abs(col.x[np.ix_(dark, bright)]).max() < 1e-12


@pytest.fixture(scope="module")
def driven():
    p, eig, d = _setup(2, 0.3)
    return p, eig, d, build_gme(eig, default_channels(p, "both"), d, p)


def test_trace_preservation(driven):
    *_, d, L = driven
    rng = np.random.default_rng(3)
    tf = trace_functional(d)
    for _ in range(100):
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        assert abs(tf @ (L.matrix @ x.reshape(-1))) < 1e-10
    assert abs(np.trace(L.apply(np.eye(d) / d))) < 1e-12


def test_backends_build_the_same_liouvillian(driven):
    from dicke_usc import _kernels
    p, eig, d, L = driven
    L2 = build_gme(eig, default_channels(p, "both"), d, p, backend=_kernels.python_gme_pairs)
    assert abs(L.matrix - L2.matrix).max() < 1e-16


def test_channel_additivity(driven):
    p, eig, d, L = driven
    chans = default_channels(p, "both")
    parts = [build_gme(eig, [c], d, p, FilterSpec(L.delta_f)).matrix for c in chans]
    ham = build_gme(eig, [BathChannel("cavity", 0.0)], d, p).matrix
    total = sum(parts) - (len(parts) - 1) * ham
    assert abs(total - L.matrix).max() < 1e-15


def test_secular_limit_matches_lindblad():
    p, eig, d = _setup(1, 0.3, k=12, window=3.5)
    ch = BathChannel("cavity", 1e-3, 0.4)
    L = build_gme(eig, [ch], d, p, FilterSpec(delta_f=1e-12))
    jumps = L.jumps[0]
    e = eig.energies[:d]
    ops, rates = [], []
    for w, lo, hi, amp in zip(jumps.omega, jumps.low, jumps.high, jumps.amp):
        down = np.zeros((d, d), dtype=complex)
        down[lo, hi] = amp
        n = thermal_occupation(w, ch.temperature)
        ops += [down, down.conj().T]
        rates += [ch.gamma * w * (n + 1), ch.gamma * w * n]
    ref = secular_lindbladian(e, ops, rates)
    assert np.abs(jumps.s_zero).max() < 1e-12
    assert abs(L.matrix - ref).max() < 1e-10


def test_zero_temperature_steady_state_is_ground():
    p, eig, d = _setup(2, 0.2)
    L = build_gme(eig, default_channels(p, "individual", t_emitters=0.0), d, p)
    rho = steady_state(L)
    ref = np.zeros((d, d))
    ref[0, 0] = 1
    assert np.abs(rho.matrix - ref).max() < 1e-8


def test_gibbs_state_for_single_mode():
    p, eig, d = _setup(1, 0.0, k=20, window=4.0, omega_a=(1.4,))
    chans = [BathChannel("cavity", 1e-3, 0.15), BathChannel("individual", 1e-3, 0.15, site=0)]
    rho = steady_state(build_gme(eig, chans, d, p))
    e = eig.energies[:d] - eig.energies[0]
    g = np.exp(-e / 0.15)
    assert np.abs(rho.populations() - g / g.sum()).max() < 1e-10
    rho.check()


def test_steady_state_residual(driven):
    *_, L = driven
    rho = steady_state(L)
    assert rho.residual < 1e-10
    assert rho.hermiticity_error() < 1e-14
    assert rho.min_eigenvalue() > -1e-10


def test_disconnected_sectors_raise():
    p, eig, d = _setup(2, 0.3)
    L = build_gme(eig, default_channels(p, "collective"), d, p)
    with pytest.raises(KernelDimensionError) as err:
        steady_state(L)
    assert err.value.dim >= 2
    ground = np.zeros((d, d))
    ground[0, 0] = 1
    rho = steady_state(L, initial=ground)
    assert abs(rho.trace() - 1) < 1e-12 and rho.residual < 1e-10


def test_dark_state_population():
    p, eig, d = _setup(2, 0.3)
    s = spin_ops(eig.space)
    j2 = s["Jx"] @ s["Jx"] + s["Jy"] @ s["Jy"] + s["Jz"] @ s["Jz"]
    dark = np.where(np.abs(np.real(eig.expect(j2)))[:d] < 1e-8)[0][0]
    ind = steady_state(build_gme(eig, default_channels(p, "individual"), d, p))
    ground = np.zeros((d, d))
    ground[0, 0] = 1
    col = steady_state(build_gme(eig, default_channels(p, "collective"), d, p), initial=ground)
    assert ind.populations()[dark] > 1e-6
    assert col.populations()[dark] < 1e-12


def test_evolve_without_dissipation_keeps_populations():
    p, eig, d = _setup(1, 0.3, k=12, window=3.0)
    L = build_gme(eig, [BathChannel("cavity", 0.0)], d, p)
    rho0 = np.diag(np.linspace(1, 2, d)) / np.linspace(1, 2, d).sum()
    for r in evolve(L, rho0, [0.0, 5.0, 50.0]):
        assert np.allclose(r.matrix, rho0)


def test_evolve_photon_decay():
    p, eig, d = _setup(1, 0.0, k=12, window=3.0, omega_a=(1.5,))
    gamma = 0.02
    L = build_gme(eig, [BathChannel("cavity", gamma)], d, p)
    n_op = fock_destroy(eig.space).dag() @ fock_destroy(eig.space)
    n_diag = np.real(eig.expect(n_op))[:d]
    one = int(np.where(np.isclose(n_diag, 1) & np.isclose(eig.energies[:d] - eig.energies[0], 1.0))[0][0])
    rho0 = np.zeros((d, d), dtype=complex)
    rho0[one, one] = 1
    ts = np.array([0.0, 10.0, 40.0, 100.0])
    out = evolve(L, rho0, ts)
    photons = [np.sum(n_diag * r.populations()) for r in out]
    assert np.allclose(photons, np.exp(-gamma * ts), atol=1e-8)


def test_evolve_relaxes_to_steady_state():
    p, eig, d = _setup(2, 0.3, window=3.5)
    L = build_gme(eig, default_channels(p, "individual", gamma=1e-2), d, p)
    rho0 = np.zeros((d, d), dtype=complex)
    rho0[0, 0] = 1
    traj = evolve(L, rho0, [500.0, 3000.0])
    for r in traj:
        assert r.hermiticity_error() < 1e-10
        assert r.min_eigenvalue() > -1e-7
    ss = steady_state(L)
    diff = np.linalg.eigvalsh(traj[-1].matrix - ss.matrix)
    assert 0.5 * np.abs(diff).sum() < 1e-6


def test_evolve_rejects_descending_grid(driven):
    *_, d, L = driven
    with pytest.raises(ValueError):
        evolve(L, np.eye(d) / d, [2.0, 1.0])

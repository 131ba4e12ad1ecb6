import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants

from rb2stirap import lattice as lt
from rb2stirap.errors import BasisSizeError, InsufficientBasisError, InvalidParameterError

P = lt.LatticeParams()


@pytest.fixture(scope="module")
def deep():
    return lt.bloch_bands(P.with_depth(60.0))


@pytest.fixture(scope="module")
def shallow():
    return lt.bloch_bands(P.with_depth(6.0))


@pytest.fixture(scope="module")
def quench(deep, shallow):
    return lt.project_onto_bands(lt.wannier_ground(deep), shallow)


# ------------------------------------------------------------ real-space oracle


class RingOracle:
    """Dense real-space model of an M-site ring, FFT kinetic energy.

    Shares no code with the plane-wave band solver.  The site-0 Wannier
    packet is the band-0 eigenvector of the projected ring position operator.
    """

    def __init__(self, sites=16, per_site=32):
        self.M = sites
        n = sites * per_site
        self.x = np.arange(n) / per_site
        k = 2 * np.pi * np.fft.fftfreq(n, d=1 / per_site)
        F = np.fft.fft(np.eye(n), axis=0)
        self.T = np.fft.ifft((k[:, None] / np.pi) ** 2 * F, axis=0).real

    def eigen(self, s):
        return np.linalg.eigh(self.T + np.diag(s * np.sin(np.pi * self.x) ** 2))

    def wannier(self, s):
        _, V = self.eigen(s)
        P0 = V[:, : self.M]
        Z = P0.T @ (np.exp(2j * np.pi * self.x / self.M)[:, None] * P0)
        ev, U = np.linalg.eig(Z)
        c = (np.angle(ev) / (2 * np.pi) * self.M) % self.M
        w = P0 @ U[:, np.argmin(np.minimum(c, self.M - c))]
        return P0, w / np.linalg.norm(w)


@pytest.fixture(scope="module")
def ring():
    return RingOracle()


def test_quench_matches_real_space_oracle(ring):
    P0, w = ring.wannier(60.0)
    Es, Vs = ring.eigen(6.0)
    c = Vs.T @ w
    wr = lt.recoil_energy(P).angular_per_us
    taus = np.array([0.0, 10.0, 50.0, 100.0, 250.0, 400.0])
    want = [np.linalg.norm(P0.T @ (Vs @ (np.exp(-1j * wr * Es * t) * c))) ** 2 for t in taus]
    got = lt.QuenchModel(60.0, 10.0, n_q=ring.M).lowest_band_weight(taus)
    assert np.max(np.abs(got - want)) < 1e-7


def test_band_weights_match_real_space_oracle(ring):
    # band weights after the 60 -> 6 projection, from dense eigenvectors; 1D
    # bands do not overlap in energy, so band n is eigenvalues nM .. nM+M-1
    quench = lt.QuenchModel(60.0, 10.0, n_q=ring.M).decomposition
    _, w = ring.wannier(60.0)
    _, Vs = ring.eigen(6.0)
    c2 = np.abs(Vs.T @ w) ** 2
    M = ring.M
    want = [c2[n * M:(n + 1) * M].sum() for n in range(6)]
    assert quench.band_weights[:6] == pytest.approx(want, abs=1e-7)
    # the odd bands carry real weight: neighbour-site overlaps are not parity-protected
    assert want[1] > 0.01


# ------------------------------------------------------------ recoil and trap


def test_recoil_energy_value():
    m = 2 * 86.909 * constants.atomic_mass
    a = 415.22e-9
    er = np.pi**2 * constants.hbar**2 / (2 * m * a**2)
    got = lt.recoil_energy(P)
    assert got.joule == pytest.approx(er, rel=1e-12)
    assert got.hertz == pytest.approx(1665.0, rel=1e-3)
    assert got.angular_per_us == pytest.approx(2 * np.pi * got.hertz * 1e-6)


def test_recoil_energy_scaling():
    base = lt.recoil_energy(P).joule
    assert lt.recoil_energy(lt.LatticeParams(mass_kg=2 * P.mass_kg)).joule == pytest.approx(base / 2)
    assert lt.recoil_energy(lt.LatticeParams(period_nm=P.period_nm / 2)).joule == pytest.approx(4 * base)


@pytest.mark.parametrize("s, khz", [(6.0, 8.16), (60.0, 25.8)])
def test_trap_frequency_values(s, khz):
    assert lt.trap_frequency(P.with_depth(s)) / (2 * np.pi) == pytest.approx(khz * 1e3, rel=2e-3)


def test_trap_frequency_sqrt_scaling():
    assert lt.trap_frequency(P.with_depth(24.0)) == pytest.approx(2 * lt.trap_frequency(P.with_depth(6.0)))


def test_param_validation():
    for bad in (dict(period_nm=0.0), dict(mass_kg=-1.0), dict(depth=-0.5), dict(cutoff=4)):
        with pytest.raises(InvalidParameterError):
            lt.LatticeParams(**bad)


# ------------------------------------------------------------ band structure


def test_free_particle_folded_parabola():
    b = lt.bloch_bands(P.with_depth(0.0), n_q=16, n_bands=6)
    ls = np.arange(-P.cutoff, P.cutoff + 1)
    want = np.sort((2 * ls[None, :] + b.q[:, None]) ** 2, axis=1)[:, :6].T
    assert b.energies == pytest.approx(want, abs=1e-10)
    assert b.energies[0, np.argmin(np.abs(b.q))] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("s, rel", [(60.0, 0.10), (200.0, 0.05)])
def test_harmonic_limit(s, rel):
    b = lt.bloch_bands(lt.LatticeParams(depth=s, cutoff=20), n_q=8)
    j = np.argmin(np.abs(b.q))
    assert b.energies[1, j] - b.energies[0, j] == pytest.approx(2 * math.sqrt(s), rel=rel)


def test_shallow_bandwidths(shallow):
    assert shallow.bandwidth(0) < 0.1 * shallow.bandwidth(2)


def test_basis_size_error():
    with pytest.raises(BasisSizeError):
        lt.bloch_bands(lt.LatticeParams(cutoff=5), n_bands=4)


def test_phase_convention(deep):
    # largest-magnitude coefficient positive; ties (|c_l| = |c_-l| at q = 0)
    # resolve to the lowest plane-wave index
    a = np.abs(deep.vectors)
    near = a >= a.max(axis=1, keepdims=True) - 1e-12
    idx = np.argmax(near, axis=1)
    top = np.take_along_axis(deep.vectors, idx[:, None, :], axis=1)
    assert np.all(top > 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 100.0))
def test_band_symmetry_and_order(s):
    b = lt.bloch_bands(P.with_depth(s), n_q=16)
    q = b.q
    for j in range(q.size):
        k = np.argmin(np.abs(q + q[j]))
        if abs(q[k] + q[j]) < 1e-12:
            assert np.max(np.abs(b.energies[:, j] - b.energies[:, k])) < 1e-10
    assert np.all(np.diff(b.energies, axis=0) >= -1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 100.0))
def test_basis_convergence(s):
    a = lt.bloch_bands(lt.LatticeParams(depth=s, cutoff=15), n_q=8, n_bands=10)
    b = lt.bloch_bands(lt.LatticeParams(depth=s, cutoff=20), n_q=8, n_bands=10)
    assert np.max(np.abs(a.energies - b.energies)) < 1e-8


# ------------------------------------------------------------ Wannier packet


def _ring_grid(packet, per_site=64):
    n_q = packet.q.size
    x = (np.arange(n_q * per_site) / per_site) - n_q / 2
    return x, 1.0 / per_site


def test_wannier_real_even_normalized(deep):
    w = lt.wannier_ground(deep)
    x, dx = _ring_grid(w)
    psi = w.real_space(x)
    assert np.max(np.abs(psi.imag)) < 1e-10
    assert np.sum(np.abs(psi) ** 2) * dx == pytest.approx(1.0, abs=1e-9)
    assert w.norm == pytest.approx(1.0, abs=1e-9)
    mirror = w.real_space(-x)
    assert np.max(np.abs(psi - mirror)) < 1e-10


def test_wannier_near_harmonic_ground_state(deep):
    # V ~ s pi^2 x^2 near the minimum with kinetic -(1/pi^2) d^2/dx^2
    s = deep.depth
    sigma2 = 1.0 / (np.pi**2 * math.sqrt(s))
    w = lt.wannier_ground(deep)
    x, dx = _ring_grid(w)
    ho = np.exp(-x**2 / (2 * sigma2)) / (np.pi * sigma2) ** 0.25
    overlap = abs(np.sum(ho * w.real_space(x)) * dx) ** 2
    assert overlap > 0.99


def test_wannier_needs_depth():
    with pytest.raises(InvalidParameterError):
        lt.wannier_ground(lt.bloch_bands(P.with_depth(0.0), n_q=8))


# ------------------------------------------------------------ projection


def test_identity_projection(deep):
    d = lt.project_onto_bands(lt.wannier_ground(deep), deep)
    n_q = deep.q.size
    assert np.abs(d.amplitudes[0]) == pytest.approx(np.full(n_q, 1 / math.sqrt(n_q)), abs=1e-12)
    assert np.max(d.band_weights[1:]) < 1e-10


def test_quench_band_weights(quench):
    w = quench.band_weights
    assert quench.norm == pytest.approx(1.0, abs=1e-6)
    assert 0.5 < w[0] < 0.95
    assert np.argmax(w[1:]) + 1 == 2


def test_parity_selection_odd_bands(quench):
    # literal form of the parity invariant: odd-band weight below 1e-10
    odd = quench.band_weights[1::2].sum()
    assert odd < 1e-10


def test_parity_selection_at_zone_centre(quench):
    # q = 0 Bloch states have definite parity alternating with the band index,
    # so the even packet has no odd-band amplitude there; elsewhere parity
    # only relates q to -q, giving |c(q)| = |c(-q)|
    q = quench.bands.q
    j = int(np.argmin(np.abs(q)))
    E = quench.bands.energies[:, j]
    # high bands pair up into near-degenerate doublets whose eigenvectors mix
    gap = np.minimum(np.diff(E, prepend=-np.inf), np.diff(E, append=E[-1]))  # last band: partner not kept
    odd = np.arange(1, E.size, 2)
    resolved = odd[gap[odd] > 1e-6]
    assert resolved.size >= 3
    assert np.max(np.abs(quench.amplitudes[resolved, j])) < 1e-9
    for j in range(q.size):
        k = int(np.argmin(np.abs(q + q[j])))
        if abs(q[k] + q[j]) < 1e-12:
            assert np.abs(quench.amplitudes[:, j]) == pytest.approx(np.abs(quench.amplitudes[:, k]), abs=1e-12)


def test_projection_onto_free_particle_is_momentum_folding(deep):
    packet = lt.wannier_ground(deep)
    free = lt.bloch_bands(P.with_depth(0.0), n_bands=12)
    d = lt.project_onto_bands(packet, free, tol=1.0)
    mom = np.abs(packet.coeffs) ** 2
    order = np.argsort(np.abs(free.momenta), axis=1)
    for j, q in enumerate(free.q):
        if min(abs(q), abs(abs(q) - 1)) < 1e-12:
            continue  # degenerate free states at the zone centre and edge
        assert np.abs(d.amplitudes[:, j]) ** 2 == pytest.approx(mom[j, order[j, :12]], abs=1e-12)


def test_round_trip_projection_fidelity(deep, quench):
    back = lt.project_onto_bands(quench.to_wavepacket(), deep)
    start = lt.wannier_ground(deep)
    fid = abs(back.to_wavepacket().overlap(start)) ** 2
    assert fid > 1 - 1e-6


def test_insufficient_basis(deep):
    few = lt.bloch_bands(P.with_depth(6.0), n_bands=2)
    with pytest.raises(InsufficientBasisError):
        lt.project_onto_bands(lt.wannier_ground(deep), few)


def test_grid_mismatch(deep):
    with pytest.raises(InvalidParameterError):
        lt.project_onto_bands(lt.wannier_ground(deep), lt.bloch_bands(P.with_depth(6.0), n_q=32))


# ------------------------------------------------------------ evolution


def test_evolve_identity_at_zero(quench):
    assert np.array_equal(lt.evolve_bands(quench, 0.0).amplitudes, quench.amplitudes)


@given(st.floats(0.0, 1e4))
def test_evolve_norm_conserved(quench, t):
    assert lt.evolve_bands(quench, t).norm == pytest.approx(quench.norm, rel=1e-13)


def test_stationary_component(shallow):
    amps = np.zeros((shallow.n_bands, shallow.q.size), dtype=complex)
    amps[2, 5] = 1.0
    d = lt.BandDecomposition(shallow, amps)
    for t in (0.0, 17.0, 300.0):
        e = lt.evolve_bands(d, t)
        assert np.array_equal(e.band_weights, d.band_weights)
        assert abs(e.amplitudes[2, 5]) == pytest.approx(1.0)


def test_breathing_beat_period(deep, shallow, quench):
    # return probability to the initial packet; dominant FFT line vs E2 - E0
    packet = lt.wannier_ground(deep)
    t = np.linspace(0.0, 400.0, 1601)
    surv = np.array([abs(lt.evolve_bands(quench, ti).to_wavepacket().overlap(packet)) ** 2 for ti in t])
    y = surv - np.polyval(np.polyfit(t, surv, 3), t)
    power = np.abs(np.fft.rfft(y, 2**16))
    f = np.fft.rfftfreq(2**16, t[1] - t[0])
    band = (f > 1 / 300) & (f < 1 / 20)
    period = 1 / f[band][np.argmax(power[band])]
    j = int(np.argmin(np.abs(shallow.q)))
    beat = 1e6 / ((shallow.energies[2, j] - shallow.energies[0, j]) * lt.recoil_energy(P).hertz)
    assert period == pytest.approx(beat, rel=0.1)


# ------------------------------------------------------------ band mapping


def test_band_map_examples(shallow, quench):
    amps = np.zeros((shallow.n_bands, shallow.q.size), dtype=complex)
    amps[0] = 1 / math.sqrt(shallow.q.size)
    assert lt.band_map(lt.BandDecomposition(shallow, amps))[0] == pytest.approx(1.0)
    amps[2] = amps[0]
    z = lt.band_map(lt.BandDecomposition(shallow, amps))
    assert z[0] == pytest.approx(0.5) and z[2] == pytest.approx(0.5)
    zq = lt.band_map(quench)
    assert zq.sum() == pytest.approx(1.0, abs=1e-9)
    assert zq[0] == pytest.approx(quench.band_weights[0] / quench.norm, rel=1e-12)


def test_three_dimensional_separability(quench):
    # build the (n_x, n_y, n_z) weight tensor of a product state explicitly
    w = quench.band_weights
    tensor = np.einsum("i,j,k->ijk", w, w, w) / quench.norm**3
    assert lt.central_square_weight(quench, quench, quench) == pytest.approx(tensor[0, 0, 0], rel=1e-12)
    assert lt.central_square_weight(quench, quench, quench) == pytest.approx(lt.band_map(quench)[0] ** 3)


# ------------------------------------------------------------ losses and curves


def test_excited_band_loss_examples(shallow, quench):
    amps = np.zeros((shallow.n_bands, shallow.q.size), dtype=complex)
    amps[0] = 1 / math.sqrt(shallow.q.size)
    d, lost = lt.excited_band_loss(lt.BandDecomposition(shallow, amps))
    assert lost == 0.0 and np.array_equal(d.amplitudes, amps)
    n = int(np.argmax(shallow.energies[:, 0] > shallow.depth))
    amps = np.zeros_like(amps)
    amps[n] = 1 / math.sqrt(shallow.q.size)
    d, lost = lt.excited_band_loss(lt.BandDecomposition(shallow, amps))
    assert lost == pytest.approx(1.0) and d.norm == 0.0


def test_excited_band_loss_below_plateau(quench):
    model = lt.QuenchModel(60.0, 10.0)
    kept, lost = lt.excited_band_loss(quench)
    assert kept.norm + lost == pytest.approx(quench.norm)
    bound = quench.bands.energies.mean(axis=1) <= quench.depth
    assert bound[0] and not bound[2:].any()
    assert kept.norm == pytest.approx(quench.band_weights[bound].sum(), rel=1e-12)
    # long-time (dephased) recapture into the deep lowest band
    diag = lambda c: np.sum(np.abs(model.back) ** 2 * np.abs(c) ** 2)
    plateau = 0.75 * diag(quench.amplitudes) ** 3
    after_loss = 0.75 * diag(kept.amplitudes) ** 3
    assert after_loss < plateau


def test_recovered_fraction_limits():
    tau = np.linspace(0, 400, 9)
    c = lt.recovered_fraction_curve(60.0, 10.0, tau, 0.75)
    assert c.recovered[0] == pytest.approx(0.75, abs=1e-6)
    flat = lt.recovered_fraction_curve(60.0, 1.0, tau, 0.75)
    assert flat.recovered == pytest.approx(np.full(tau.size, 0.75), abs=1e-9)


def test_recovered_fraction_dims():
    tau = np.linspace(0, 200, 5)
    one = lt.recovered_fraction_curve(60.0, 10.0, tau, 1.0, dims=1).recovered
    three = lt.recovered_fraction_curve(60.0, 10.0, tau, 0.5, dims=3).recovered
    assert three == pytest.approx(0.5 * one**3, rel=1e-12)


def test_recovered_fraction_grid_independent():
    tau = np.linspace(0, 400, 9)
    a = lt.recovered_fraction_curve(60.0, 10.0, tau, 0.75, n_q=64).recovered
    b = lt.recovered_fraction_curve(60.0, 10.0, tau, 0.75, n_q=128).recovered
    assert np.max(np.abs(a - b)) < 1e-6


def test_hold_curve_validation():
    with pytest.raises(InvalidParameterError):
        lt.HoldCurve([0.0, 1.0], [0.5])
    with pytest.raises(InvalidParameterError):
        lt.HoldCurve([0.0], [1.5])
    with pytest.raises(InvalidParameterError):
        lt.QuenchModel(60.0, 0.5)

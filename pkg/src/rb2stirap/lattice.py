"""1D optical-lattice bands and sudden-quench wavepacket dynamics.

Lengths are in units of the lattice period ``a``, quasimomenta in units of
hbar*pi/a (so the first Brillouin zone is (-1, 1]) and energies in recoil
units E_r = pi^2 hbar^2 / (2 m a^2).  Bloch states are stored as plane-wave
coefficients over momenta (2l + q) hbar*pi/a with |l| <= L.

The cubic 3D lattice is separable; 3D observables are products of the 1D
ones, so everything here is one-dimensional.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import constants
from scipy.linalg import eigh_tridiagonal

from .errors import BasisSizeError, InsufficientBasisError, InvalidParameterError

RB87_MASS_U = 86.909
RB2_MASS_KG = 2 * RB87_MASS_U * constants.atomic_mass
LATTICE_PERIOD_NM = 415.22

DEFAULT_NQ = 64
DEFAULT_BANDS = 12
DEFAULT_CUTOFF = 15


@dataclass(frozen=True)
class LatticeParams:
    period_nm: float = LATTICE_PERIOD_NM
    mass_kg: float = RB2_MASS_KG
    depth: float = 60.0
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if not self.period_nm > 0 or not self.mass_kg > 0:
            raise InvalidParameterError("lattice period and mass must be > 0")
        if not self.depth >= 0:
            raise InvalidParameterError("lattice depth must be >= 0")
        if int(self.cutoff) != self.cutoff or self.cutoff < 5:
            raise InvalidParameterError("plane-wave cutoff must be an integer >= 5")

    def with_depth(self, depth: float) -> "LatticeParams":
        return replace(self, depth=depth)


class RecoilEnergy(NamedTuple):
    joule: float
    hertz: float

    @property
    def angular_per_us(self) -> float:
        """E_r / hbar in rad/us."""
        return 2 * math.pi * self.hertz * 1e-6


def recoil_energy(params: LatticeParams) -> RecoilEnergy:
    a = params.period_nm * 1e-9
    e = math.pi**2 * constants.hbar**2 / (2 * params.mass_kg * a**2)
    return RecoilEnergy(e, e / constants.h)


def trap_frequency(params: LatticeParams) -> float:
    """Harmonic on-site trap frequency 2 sqrt(s) E_r / hbar in rad/s.

    Only the curvature at the well bottom; the quench dynamics use the exact
    band energies instead.
    """
    if not params.depth > 0:
        raise InvalidParameterError("trap frequency needs depth > 0")
    return 2 * math.sqrt(params.depth) * recoil_energy(params).joule / constants.hbar


def quasimomentum_grid(n_q: int = DEFAULT_NQ) -> np.ndarray:
    """``n_q`` evenly spaced quasimomenta in (-1, 1]; includes 0 for even ``n_q``."""
    return -1.0 + 2.0 * np.arange(1, n_q + 1) / n_q


@dataclass(frozen=True, eq=False)
class BandStructure:
    params: LatticeParams
    q: np.ndarray            # (n_q,)
    energies: np.ndarray     # (n_bands, n_q), E_r
    vectors: np.ndarray      # (n_q, 2L+1, n_bands), real

    @property
    def n_bands(self) -> int:
        return self.energies.shape[0]

    @property
    def depth(self) -> float:
        return self.params.depth

    @property
    def momenta(self) -> np.ndarray:
        """Plane-wave momenta (2l + q) per (q, l), units hbar*pi/a."""
        L = self.params.cutoff
        return 2.0 * np.arange(-L, L + 1)[None, :] + self.q[:, None]

    def bandwidth(self, n: int) -> float:
        return float(np.ptp(self.energies[n]))


def bloch_bands(params: LatticeParams, n_q: int = DEFAULT_NQ, n_bands: int = DEFAULT_BANDS) -> BandStructure:
    """Diagonalize V(x) = s E_r sin^2(pi x / a) in the plane-wave basis at each q."""
    L = params.cutoff
    dim = 2 * L + 1
    if n_bands > dim - 8:
        raise BasisSizeError(f"{n_bands} bands need a cutoff L >= {(n_bands + 8) // 2}")
    s = params.depth
    q = quasimomentum_grid(n_q)
    ls = np.arange(-L, L + 1)
    energies = np.empty((n_bands, n_q))
    vectors = np.empty((n_q, dim, n_bands))
    off = np.full(dim - 1, -s / 4.0)
    for j, qj in enumerate(q):
        diag = (2.0 * ls + qj) ** 2 + s / 2.0
        w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_bands - 1))
        # global phase: largest-magnitude coefficient real positive
        pick = np.argmax(np.abs(v) - 1e-12 * np.arange(dim)[:, None], axis=0)
        v *= np.sign(v[pick, np.arange(n_bands)])
        energies[:, j] = w
        vectors[j] = v
    return BandStructure(params, q, energies, vectors)


@dataclass(frozen=True, eq=False)
class Wavepacket:
    """Single-particle state on an ``n_q``-site ring, as plane-wave amplitudes.

    ``coeffs[j, l]`` is the amplitude of momentum (2l + q_j) hbar*pi/a; the
    state is normalized when the squared amplitudes sum to one.
    """

    q: np.ndarray
    coeffs: np.ndarray
    cutoff: int

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def real_space(self, x) -> np.ndarray:
        """Wavefunction at positions ``x`` (units of a), normalized over the ring."""
        x = np.asarray(x, dtype=float)
        n_q = self.q.size
        k = np.pi * (2.0 * np.arange(-self.cutoff, self.cutoff + 1)[None, :] + self.q[:, None])
        phase = np.exp(1j * np.multiply.outer(x, k))
        return np.tensordot(phase, self.coeffs, axes=([-2, -1], [0, 1])) / math.sqrt(n_q)

    def overlap(self, other: "Wavepacket") -> complex:
        return complex(np.vdot(self.coeffs, other.coeffs))


@dataclass(frozen=True, eq=False)
class BandDecomposition:
    bands: BandStructure
    amplitudes: np.ndarray   # (n_bands, n_q), complex

    @property
    def depth(self) -> float:
        return self.bands.depth

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def band_weights(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def to_wavepacket(self) -> Wavepacket:
        coeffs = np.einsum("jln,nj->jl", self.bands.vectors, self.amplitudes)
        return Wavepacket(self.bands.q, coeffs, self.bands.params.cutoff)


@dataclass
class HoldCurve:
    tau: np.ndarray
    recovered: np.ndarray
    snapshots: list | None = None

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.recovered = np.asarray(self.recovered, dtype=float)
        if self.tau.shape != self.recovered.shape:
            raise InvalidParameterError("tau and recovered fraction lengths differ")
        if self.recovered.size and (self.recovered.min() < -1e-9 or self.recovered.max() > 1 + 1e-9):
            raise InvalidParameterError("recovered fraction outside [0, 1]")


def wannier_ground(bands: BandStructure) -> Wavepacket:
    """Lowest-band Wannier function at site 0 (x = 0, a potential minimum).

    Equal-weight superposition of the band-0 Bloch states.  The ground state
    of each q block has same-sign coefficients, so the largest-positive phase
    convention is a smooth gauge and the result is real, even and localized.
    """
    if not bands.depth > 0:
        raise InvalidParameterError("Wannier function needs depth > 0")
    n_q = bands.q.size
    return Wavepacket(bands.q, bands.vectors[:, :, 0] / math.sqrt(n_q), bands.params.cutoff)


def project_onto_bands(packet: Wavepacket, bands: BandStructure, tol: float = 1e-4) -> BandDecomposition:
    """Expand ``packet`` over the Bloch eigenbasis of ``bands`` (sudden projection)."""
    if packet.q.shape != bands.q.shape or not np.allclose(packet.q, bands.q):
        raise InvalidParameterError("packet and bands use different quasimomentum grids")
    if packet.cutoff != bands.params.cutoff:
        raise InvalidParameterError("packet and bands use different plane-wave cutoffs")
    amps = np.einsum("jln,jl->nj", bands.vectors, packet.coeffs)
    dec = BandDecomposition(bands, amps)
    deficit = packet.norm - dec.norm
    if deficit > tol:
        raise InsufficientBasisError(f"projection misses {deficit:.2e} of the norm; add bands")
    return dec


def evolve_bands(decomp: BandDecomposition, t_us: float) -> BandDecomposition:
    """Free evolution for ``t_us`` microseconds: c -> c exp(-i E_n(q) t / hbar)."""
    w = recoil_energy(decomp.bands.params).angular_per_us
    phase = np.exp(-1j * w * decomp.bands.energies * t_us)
    return BandDecomposition(decomp.bands, decomp.amplitudes * phase)


def band_map(decomp: BandDecomposition) -> np.ndarray:
    """Population per Brillouin zone after adiabatic band mapping.

    Band n maps onto the n-th zone, so this is the normalized band weight.
    """
    w = decomp.band_weights
    return w / w.sum()


def central_square_weight(*decomps: BandDecomposition) -> float:
    """Fraction in the central zone of a separable lattice, one decomposition per axis."""
    return float(np.prod([band_map(d)[0] for d in decomps]))


def excited_band_loss(decomp: BandDecomposition, threshold: float | None = None):
    """Drop bands whose mean energy lies above the well depth.

    Returns the surviving (unnormalized) decomposition and the lost weight.
    ``threshold`` overrides the default criterion s' (in E_r).
    """
    thr = decomp.depth if threshold is None else threshold
    unbound = decomp.bands.energies.mean(axis=1) > thr
    amps = decomp.amplitudes.copy()
    lost = float(np.sum(np.abs(amps[unbound]) ** 2))
    amps[unbound] = 0.0
    return BandDecomposition(decomp.bands, amps), lost


class QuenchModel:
    """Deep -> shallow -> deep lattice quench for one lattice axis.

    Precomputes the overlaps <deep 0,q | shallow n,q> so a recovered-fraction
    curve is a single vectorized phase sum over (tau, n, q).
    """

    def __init__(self, s_deep: float, ratio: float, params: LatticeParams = LatticeParams(),
                 n_q: int = DEFAULT_NQ, n_bands: int = DEFAULT_BANDS):
        if not ratio >= 1:
            raise InvalidParameterError("depth ratio must be >= 1")
        self.deep = bloch_bands(params.with_depth(s_deep), n_q, n_bands)
        self.shallow = bloch_bands(params.with_depth(s_deep / ratio), n_q, n_bands)
        self.packet = wannier_ground(self.deep)
        self.decomposition = project_onto_bands(self.packet, self.shallow)
        # <deep 0,q | shallow n,q>
        self.back = np.einsum("jl,jln->nj", self.deep.vectors[:, :, 0], self.shallow.vectors)
        self._w = recoil_energy(self.shallow.params).angular_per_us

    def lowest_band_weight(self, tau_us) -> np.ndarray:
        """1D weight in the deep lattice's lowest band after holding ``tau_us``."""
        tau = np.atleast_1d(np.asarray(tau_us, dtype=float))
        terms = self.back * self.decomposition.amplitudes
        out = np.empty(tau.size)
        for i, t in enumerate(tau):
            ov = np.sum(terms * np.exp(-1j * self._w * self.shallow.energies * t), axis=0)
            out[i] = np.sum(np.abs(ov) ** 2)
        return out


def recovered_fraction_curve(
    s_deep: float,
    ratio: float,
    tau_grid,
    stirap_eff: float,
    params: LatticeParams = LatticeParams(),
    dims: int = 3,
    n_q: int = DEFAULT_NQ,
    n_bands: int = DEFAULT_BANDS,
) -> HoldCurve:
    """Round-trip recovered fraction versus hold time, counting the lowest band only.

    The molecule is projected into the shallow lattice at the first transfer,
    evolves for tau, and is projected back; the lowest-band weight per axis is
    raised to ``dims`` and scaled by the round-trip STIRAP efficiency.
    """
    if not 0.0 <= stirap_eff <= 1.0:
        raise InvalidParameterError("stirap_eff must lie in [0, 1]")
    model = QuenchModel(s_deep, ratio, params, n_q, n_bands)
    w = np.clip(model.lowest_band_weight(tau_grid), 0.0, 1.0)
    return HoldCurve(np.asarray(tau_grid, dtype=float), stirap_eff * w**dims)

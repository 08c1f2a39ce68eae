"""Array responses, local-scattering correlation and the RIS cascade.

Steering convention: for a ``H x V`` planar array with spacing ``d`` (in
wavelengths), the element at horizontal index ``p`` and vertical index ``q``
sits at flat position ``q * H + p`` (horizontal index fastest) and has
response ``exp(j 2 pi d (p sin(az) cos(el) + q sin(el)))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import numerics
from .errors import DimensionMismatch

MC_CHUNK = 10_000


@dataclass(frozen=True)
class ArrayGeometry:
    horizontal_count: int
    vertical_count: int
    spacing: float = 0.5

    def __post_init__(self):
        if self.horizontal_count < 1 or self.vertical_count < 1:
            raise ValueError("array dimensions must be positive")
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def size(self) -> int:
        return self.horizontal_count * self.vertical_count


@dataclass(frozen=True)
class Direction:
    azimuth: float
    elevation: float

    def __post_init__(self):
        if not -math.pi < self.azimuth <= math.pi:
            raise ValueError(f"azimuth {self.azimuth} outside (-pi, pi]")
        if not -math.pi / 2 <= self.elevation <= math.pi / 2:
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")


@dataclass(frozen=True)
class RisPhases:
    """Continuous RIS phase shifts ``psi`` in ``[0, 2 pi)``."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.mod(np.asarray(self.psi, dtype=float).ravel(), 2 * np.pi)
        # mod can round 2*pi - tiny up to exactly 2*pi
        psi[psi >= 2 * np.pi] = 0.0
        object.__setattr__(self, "psi", psi)

    @property
    def reflection(self) -> np.ndarray:
        """Diagonal of the unit-modulus reflection matrix."""
        return np.exp(1j * self.psi)

    @classmethod
    def zeros(cls, n: int) -> "RisPhases":
        return cls(np.zeros(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "RisPhases":
        return cls(rng.uniform(0.0, 2 * np.pi, size=n))


@dataclass(frozen=True)
class ChannelSet:
    """All deterministic channel quantities of one scenario.

    ``a_t`` and ``b_t`` are the two factors of the rank-one transceiver-RIS
    LOS matrix ``a_t b_t^T``.  ``*_2`` quantities belong to the target
    (sensing) link, ``*_1`` to the UE.
    """

    h_s1: np.ndarray
    h_r1: np.ndarray
    a_t: np.ndarray
    b_t: np.ndarray
    hbar_s2: np.ndarray
    hbar_r2: np.ndarray
    R_s2: np.ndarray
    R_r2: np.ndarray
    R_clutter: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def K(self) -> int:
        return self.a_t.shape[0]

    @property
    def N(self) -> int:
        return self.b_t.shape[0]

    def without_ris(self) -> "ChannelSet":
        """Copy with ``b_t`` zeroed, which removes every cascaded path."""
        return ChannelSet(
            h_s1=self.h_s1, h_r1=self.h_r1, a_t=self.a_t, b_t=np.zeros_like(self.b_t),
            hbar_s2=self.hbar_s2, hbar_r2=self.hbar_r2, R_s2=self.R_s2, R_r2=self.R_r2,
            R_clutter=self.R_clutter, meta=dict(self.meta, ris="removed"),
        )

    def ue_channel(self, phases: RisPhases) -> np.ndarray:
        """End-to-end transmitter-to-UE channel ``h_1``."""
        return self.h_s1 + cascaded_channel(self.a_t, self.b_t, phases, self.h_r1)


def _steering(geom: ArrayGeometry, az, el) -> np.ndarray:
    # az, el broadcastable arrays; output (..., M)
    az = np.asarray(az, dtype=float)[..., None]
    el = np.asarray(el, dtype=float)[..., None]
    m = np.arange(geom.size)
    p = m % geom.horizontal_count
    q = m // geom.horizontal_count
    phase = 2 * np.pi * geom.spacing * (p * np.sin(az) * np.cos(el) + q * np.sin(el))
    return np.exp(1j * phase)


def upa_steering(geom: ArrayGeometry, direction: Direction) -> np.ndarray:
    """Unit-modulus response vector of a uniform planar array."""
    return _steering(geom, direction.azimuth, direction.elevation)


def local_scattering_correlation(
    geom: ArrayGeometry,
    nominal: Direction,
    clusters: int,
    az_spread: float,
    el_spread: float,
    asd: float,
    mc_samples: int = 100_000,
    seed=None,
) -> np.ndarray:
    """Spatial correlation matrix of a clustered local-scattering model.

    Cluster centres are drawn uniformly within ``+-az_spread/2`` and
    ``+-el_spread/2`` of ``nominal``; each cluster spreads its (equal) power
    with a Gaussian angular density of standard deviation ``asd`` in both
    azimuth and elevation.  The expectation of ``a a^H`` is evaluated by Monte
    Carlo averaging over ``mc_samples`` angle draws.

    Parameters
    ----------
    geom : ArrayGeometry
    nominal : Direction
    clusters : int
        Number of scattering clusters, at least 1.
    az_spread, el_spread : float
        Width (radians) of the neighbourhood holding the cluster centres.
    asd : float
        Per-cluster angular standard deviation in radians, positive.
    mc_samples : int
        Total number of sampled angle pairs, at least 10**4.
    seed : int, SeedSequence or Generator
        Source of randomness; equal seeds give bit-identical matrices.

    Returns
    -------
    R : (M, M) complex ndarray
        Hermitian PSD matrix normalised to ``trace(R) = M``.
    """
    if clusters < 1:
        raise ValueError("need at least one cluster")
    if asd <= 0:
        raise ValueError("angular standard deviation must be positive")
    if mc_samples < 10_000:
        raise ValueError("mc_samples must be at least 10**4")
    rng = np.random.default_rng(seed)
    centre_az = nominal.azimuth + rng.uniform(-0.5, 0.5, clusters) * az_spread
    centre_el = nominal.elevation + rng.uniform(-0.5, 0.5, clusters) * el_spread
    per_cluster = -(-mc_samples // clusters)

    M = geom.size
    acc = np.zeros((M, M), dtype=complex)
    total = 0
    for c in range(clusters):
        done = 0
        while done < per_cluster:
            n = min(MC_CHUNK, per_cluster - done)
            az = centre_az[c] + asd * rng.standard_normal(n)
            el = centre_el[c] + asd * rng.standard_normal(n)
            A = _steering(geom, az, el)
            acc += A.T @ A.conj()
            done += n
        total += per_cluster
    R = acc / total
    R = 0.5 * (R + R.conj().T)
    return R * (M / np.real(np.trace(R)))


def _check_len(name: str, v: np.ndarray, n: int) -> None:
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({n},)")


def _ris_row(b_t: np.ndarray, phases: RisPhases) -> np.ndarray:
    """Entries of the row vector ``b_t^T D_psi``."""
    b_t = np.asarray(b_t, dtype=complex)
    d = phases.reflection
    _check_len("RIS phases", d, b_t.shape[0])
    return b_t * d


def cascaded_channel(a_t, b_t, phases: RisPhases, h_r) -> np.ndarray:
    """``a_t b_t^T D_psi h_r``: ``a_t`` scaled by the scalar ``b_t^T D_psi h_r``."""
    a_t = np.asarray(a_t, dtype=complex)
    h_r = np.asarray(h_r, dtype=complex)
    row = _ris_row(b_t, phases)
    _check_len("h_r", h_r, row.shape[0])
    return a_t * np.sum(row * h_r)


def cascaded_correlation(a_t, b_t, phases: RisPhases, R_r) -> np.ndarray:
    """Correlation of the cascaded NLOS channel, ``(b^T D R_r D^* b^*) a_t a_t^H``."""
    a_t = np.asarray(a_t, dtype=complex)
    R_r = np.asarray(R_r, dtype=complex)
    row = _ris_row(b_t, phases)
    if R_r.shape != (row.shape[0], row.shape[0]):
        raise DimensionMismatch(f"R_r has shape {R_r.shape}, expected {(row.shape[0],) * 2}")
    scale = np.real(row @ R_r @ row.conj())
    return max(scale, 0.0) * np.outer(a_t, a_t.conj())


@dataclass(frozen=True)
class ScatteringProfile:
    clusters: int
    az_spread: float
    el_spread: float
    asd: float


# six clusters over 40 x 20 degree neighbourhoods, 10 degree spread
SENSING_SCATTERING = ScatteringProfile(6, math.radians(40), math.radians(20), math.radians(10))
# clutter: 20 x 10 degree neighbourhoods, 5 degree spread
CLUTTER_SCATTERING = ScatteringProfile(6, math.radians(20), math.radians(10), math.radians(5))


@dataclass(frozen=True)
class ChannelGains:
    """Per-element linear power gains of every link.

    ``ris_hop`` is the transceiver-RIS hop; ``ris_target`` and ``ue_ris`` are
    the RIS-side hops, so one RIS element contributes
    ``ris_hop * ris_target`` to the cascaded target path.
    """

    static_target: float
    ris_target: float
    ue_static: float
    ue_ris: float
    ris_hop: float = 1.0


class ScenarioGeometry:
    """Gain-independent part of a scenario: steering vectors and unit-trace-per-element
    correlation matrices.

    Building the correlation matrices is the expensive step, so a geometry
    is built once and then scaled to any SNR point with :meth:`channels`.
    """

    def __init__(self, config, rng: np.random.Generator):
        self.config = config
        bs = ArrayGeometry(*config.bs_grid)
        ris = ArrayGeometry(*config.ris_grid)
        self.bs, self.ris = bs, ris
        d = config.directions
        seeds = rng.integers(0, 2**63 - 1, size=5)
        mc = config.scattering_samples
        s, c = SENSING_SCATTERING, CLUTTER_SCATTERING

        def corr(geom, nominal, prof, seed):
            return local_scattering_correlation(
                geom, nominal, prof.clusters, prof.az_spread, prof.el_spread, prof.asd, mc, seed
            )

        self.a_ris_from_bs = upa_steering(bs, d["ris_from_bs"])
        self.a_bs_from_ris = upa_steering(ris, d["bs_from_ris"])
        self.a_target_from_bs = upa_steering(bs, d["target_from_bs"])
        self.a_target_from_ris = upa_steering(ris, d["target_from_ris"])
        self.a_ue_from_bs = upa_steering(bs, d["ue_from_bs"])
        self.a_ue_from_ris = upa_steering(ris, d["ue_from_ris"])

        self.Rn_target_bs = corr(bs, d["target_from_bs"], s, seeds[0])
        self.Rn_target_ris = corr(ris, d["target_from_ris"], s, seeds[1])
        Rn_ue_bs = corr(bs, d["ue_from_bs"], s, seeds[2])
        Rn_ue_ris = corr(ris, d["ue_from_ris"], s, seeds[3])
        self.R_clutter = corr(bs, d["ris_from_bs"], c, seeds[4])

        # one NLOS realisation per scenario for the (known) UE channels
        self.ue_nlos_bs = numerics.sample_complex_gaussian(Rn_ue_bs, rng)
        self.ue_nlos_ris = numerics.sample_complex_gaussian(Rn_ue_ris, rng)

    def channels(self, gains: ChannelGains) -> ChannelSet:
        nlos = self.config.nlos_fraction
        return ChannelSet(
            h_s1=np.sqrt(gains.ue_static) * (self.a_ue_from_bs + np.sqrt(nlos) * self.ue_nlos_bs),
            h_r1=np.sqrt(gains.ue_ris) * (self.a_ue_from_ris + np.sqrt(nlos) * self.ue_nlos_ris),
            a_t=self.a_ris_from_bs.copy(),
            b_t=np.sqrt(gains.ris_hop) * self.a_bs_from_ris,
            hbar_s2=np.sqrt(gains.static_target) * self.a_target_from_bs,
            hbar_r2=np.sqrt(gains.ris_target) * self.a_target_from_ris,
            R_s2=gains.static_target * nlos * self.Rn_target_bs,
            R_r2=gains.ris_target * nlos * self.Rn_target_ris,
            R_clutter=self.R_clutter.copy(),
            meta={"gains": gains},
        )


def build_scenario_channels(config, rng: np.random.Generator, snr_db: float | None = None) -> ChannelSet:
    """Synthesize the full :class:`ChannelSet` of a scenario.

    The static target gain follows the SNR mapping of
    :func:`ris_isac.config.apply_snr_point` at ``snr_db`` (default: first
    point of the configured sweep grid).
    """
    from .config import apply_snr_point

    if snr_db is None:
        snr_db = config.snr_grid_db[0]
    geometry = ScenarioGeometry(config, rng)
    return geometry.channels(apply_snr_point(config, snr_db))

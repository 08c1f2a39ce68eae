"""Clutter-aware GLRT target detector.

The decision statistic is ``sum_l y[l]^H T y[l]`` with

    T = M^-1 U (U^H M^-1 U)^-1 U^H M^-1 + (I - U U^H) / sigma2 - M^-1,
    M = R + sigma2 I,

which is invariant to any signal inside the clutter subspace ``span(U)``.
With no subspace (the clutter-unaware detector) ``T = I / sigma2 - M^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy import linalg, stats

from . import mc, numerics
from .channel import ChannelSet, RisPhases
from .errors import DimensionMismatch, InsufficientTrials, NotPSD, SingularInnerBlock, ZeroClutter
from .sensing import TargetEchoModel

log = logging.getLogger(__name__)

H0, H1 = "H0", "H1"
INNER_COND_TOL = 1e-12


@dataclass(frozen=True)
class ClutterSubspace:
    U: np.ndarray
    eigenvalues: np.ndarray
    capped: bool = False

    @property
    def r(self) -> int:
        return self.U.shape[1]

    @classmethod
    def empty(cls, K: int) -> "ClutterSubspace":
        return cls(U=np.zeros((K, 0), dtype=complex), eigenvalues=np.zeros(0))


@dataclass(frozen=True)
class DetectorSpec:
    T: np.ndarray
    threshold: float
    alpha: float
    L: int


@dataclass(frozen=True)
class Calibration:
    """Calibrated threshold together with the false-alarm rate it achieved.

    ``realized_pfa`` is measured on fresh H0 trials when a validation run was
    requested, otherwise on the calibration sample itself.  ``ci`` is the
    exact (Clopper-Pearson) 95% binomial interval around it.  ``tie_weight``
    is the probability of deciding H1 when the statistic equals the
    threshold exactly; it is 1 unless the H0 sample has an atom there.
    """

    threshold: float
    realized_pfa: float
    ci: tuple[float, float]
    trials: int
    validation_trials: int
    tie_weight: float = 1.0

    @property
    def ci_halfwidth(self) -> float:
        return 0.5 * (self.ci[1] - self.ci[0])


def estimate_clutter_subspace(
    R_clutter: np.ndarray, energy_frac: float = 0.99, rank: int | None = None
) -> ClutterSubspace:
    """Dominant eigenvectors of the clutter correlation.

    By default the smallest ``r`` capturing ``energy_frac`` of the trace is
    used, capped at ``K - 1``; the ``capped`` flag records when the cap bit.
    A fixed ``rank`` overrides the energy rule.
    """
    eig = numerics.hermitian_eig(R_clutter)
    K = eig.values.shape[0]
    total = eig.values.sum()
    top = eig.values[0] if K else 0.0
    if K == 0 or total <= 1e-300 or top <= 0.0:
        raise ZeroClutter("clutter correlation has numerically zero trace")
    if eig.values[-1] < -1e-10 * top:
        raise NotPSD(f"clutter correlation has eigenvalue {eig.values[-1]:.3e}")
    lam = np.clip(eig.values, 0.0, None)
    if rank is None:
        frac = np.cumsum(lam) / lam.sum()
        r = int(np.searchsorted(frac, energy_frac * (1 - 1e-12)) + 1)
    else:
        r = int(rank)
        if not 1 <= r:
            raise ValueError("clutter rank must be positive")
    capped = r > K - 1
    if capped:
        log.warning("clutter rank rule capped at K-1=%d", K - 1)
        r = K - 1
    return ClutterSubspace(U=eig.vectors[:, :r], eigenvalues=lam[:r], capped=capped)


def build_test_matrix(R: np.ndarray, U: ClutterSubspace | np.ndarray | None, sigma2: float) -> np.ndarray:
    """Detector matrix ``T`` for target covariance ``R`` and clutter basis ``U``.

    ``U`` may be ``None`` or have zero columns for the clutter-unaware variant.
    """
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    R = numerics.check_hermitian(R)
    K = R.shape[0]
    if isinstance(U, ClutterSubspace):
        U = U.U
    U = np.zeros((K, 0), dtype=complex) if U is None else np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != K:
        raise DimensionMismatch(f"U has shape {U.shape}, expected ({K}, r)")

    I = np.eye(K)
    M_fac = linalg.cho_factor(R + sigma2 * I, lower=True)
    M_inv = linalg.cho_solve(M_fac, I)
    T = I / sigma2 - M_inv
    if U.shape[1]:
        MiU = linalg.cho_solve(M_fac, U)
        inner = U.conj().T @ MiU
        inner = 0.5 * (inner + inner.conj().T)
        w = np.linalg.eigvalsh(inner)
        if w[0] <= INNER_COND_TOL * w[-1]:
            raise SingularInnerBlock(f"inner block condition {w[-1] / max(w[0], 1e-300):.3e}")
        inner_fac = linalg.cho_factor(inner, lower=True)
        T = T + MiU @ linalg.cho_solve(inner_fac, MiU.conj().T) - (U @ U.conj().T) / sigma2
    return 0.5 * (T + T.conj().T)


def batch_statistic(Y: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Statistics of a batch ``Y`` of shape ``(n, L, K)``; returns ``(n,)``."""
    n = Y.shape[0]
    flat = Y.reshape(-1, Y.shape[-1])
    TY = flat @ T.T
    # Re(y^H T y) summed over symbols, without forming conj(Y)
    re = flat.real * TY.real + flat.imag * TY.imag
    return re.reshape(n, -1).sum(axis=1)


def test_statistic(Y, T) -> float:
    """``sum_l y[l]^H T y[l]`` for ``L`` received vectors (rows of ``Y``)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=complex))
    T = np.asarray(T, dtype=complex)
    if Y.shape[1] != T.shape[0] or T.shape[0] != T.shape[1]:
        raise DimensionMismatch(f"Y rows of length {Y.shape[1]} against T of shape {T.shape}")
    Th = 0.5 * (T + T.conj().T)
    val = np.einsum("lk,kj,lj->", Y.conj(), Th, Y)
    scale = np.linalg.norm(Th, 2) * np.vdot(Y, Y).real
    if abs(val.imag) > 1e-8 * max(scale, 1e-300):
        raise ValueError(f"statistic has imaginary residue {val.imag:.3e}")
    return float(val.real)


test_statistic.__test__ = False  # not a pytest test


def detect(Y, spec: DetectorSpec) -> bool:
    return test_statistic(Y, spec.T) >= spec.threshold


class ReceiverModel:
    """Generator of received blocks ``y[l], l = 1..L`` under either hypothesis.

    Clutter is ``U x[l]`` with ``x[l]`` circular Gaussian, independent across
    subspace directions, with powers proportional to the retained clutter
    eigenvalues and total ``10^(cnr_db/10) * sigma2 * K``.  Symbols are
    unit-modulus QPSK and noise is ``CN(0, sigma2 I)``.
    """

    def __init__(
        self,
        ch: ChannelSet,
        phases: RisPhases,
        p,
        betas,
        subspace: ClutterSubspace,
        cnr_db: float,
        sigma2: float,
        L: int,
    ):
        self.echo = TargetEchoModel(ch, phases, p, betas)
        self.K = ch.K
        self.L = int(L)
        self.sigma2 = float(sigma2)
        self.U = subspace.U
        lam = subspace.eigenvalues
        total = 10.0 ** (cnr_db / 10.0) * sigma2 * self.K
        if lam.size and lam.sum() > 0:
            self.clutter_std = np.sqrt(total * lam / lam.sum())
        else:
            self.clutter_std = np.zeros(lam.size)

    def sample(self, rng: np.random.Generator, n: int, hypothesis: str) -> np.ndarray:
        """Draw ``n`` independent blocks; returns shape ``(n, L, K)``."""
        if hypothesis not in (H0, H1):
            raise ValueError(f"unknown hypothesis {hypothesis!r}")
        K, L = self.K, self.L
        echo = None
        if hypothesis == H1:
            h2 = self.echo.sample(rng, n * L).reshape(n, L, K)
            sym = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=(n, L, 1))))
            echo = h2 * sym
        r = self.U.shape[1]
        x = numerics.standard_complex_normal(rng, (n * L, r)) if r else None
        Y = numerics.standard_complex_normal(rng, (n * L, K))
        Y *= np.sqrt(self.sigma2)
        if x is not None:
            x *= self.clutter_std
            Y += x @ self.U.T
        Y = Y.reshape(n, L, K)
        if echo is not None:
            Y += echo
        return Y

    def statistics(self, rng: np.random.Generator, n: int, hypothesis: str, T: np.ndarray) -> np.ndarray:
        return batch_statistic(self.sample(rng, n, hypothesis), T)


def simulate_received(ch, phases, p, betas, hypothesis, cnr_db, sigma2, L, rng, subspace=None, energy_frac=0.99):
    """One received block of ``L`` vectors, shape ``(L, K)``."""
    if subspace is None:
        subspace = estimate_clutter_subspace(ch.R_clutter, energy_frac)
    model = ReceiverModel(ch, phases, p, betas, subspace, cnr_db, sigma2, L)
    return model.sample(rng, 1, hypothesis)[0]


def binomial_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def threshold_from_sample(h0_stats: np.ndarray, alpha: float) -> float:
    """Empirical ``(1 - alpha)`` quantile of H0 statistics."""
    return float(np.quantile(h0_stats, 1.0 - alpha))


def tie_weight(h0_stats: np.ndarray, threshold: float, alpha: float) -> float:
    """Randomisation weight at the threshold that makes the H0 rate ``alpha``.

    Continuous statistics never tie and keep the plain ``>=`` rule (weight 1).
    A degenerate statistic, e.g. ``T = 0``, puts an atom at the threshold;
    deciding H1 there with the returned probability restores the nominal
    false-alarm rate.
    """
    n = h0_stats.size
    eq = np.count_nonzero(h0_stats == threshold) / n
    if eq <= 1.0 / n:
        return 1.0
    gt = np.count_nonzero(h0_stats > threshold) / n
    return float(np.clip((alpha - gt) / eq, 0.0, 1.0))


def exceedance_rate(stats_: np.ndarray, threshold: float, weight: float = 1.0) -> float:
    """Expected decision rate of the threshold test with tie weight ``weight``."""
    gt = np.count_nonzero(stats_ > threshold)
    eq = np.count_nonzero(stats_ == threshold)
    return float((gt + weight * eq) / stats_.size)


def check_trials(alpha: float, trials: int) -> None:
    if trials < math.ceil(50.0 / alpha - 1e-9):
        raise InsufficientTrials(f"{trials} trials cannot resolve alpha={alpha:g}; need >= {50 / alpha:g}")


def calibrate_threshold(
    model: ReceiverModel,
    T: np.ndarray,
    alpha: float,
    trials: int,
    master_seed: int,
    key=(0,),
    validation_trials: int | None = None,
    chunk_size: int = 4096,
    threads: int = 1,
) -> Calibration:
    """Calibrate the threshold so that the H0 exceedance rate is ``alpha``.

    H0 statistics are drawn from counter-derived streams under ``key``; a
    fresh validation run (``key + (1,)``) measures the realised false-alarm
    rate when ``validation_trials`` is given.
    """
    check_trials(alpha, trials)
    stat = lambda rng, n: model.statistics(rng, n, H0, T)  # noqa: E731
    h0 = mc.run_chunked(stat, master_seed, (*key, 0), trials, chunk_size, threads)
    gamma = threshold_from_sample(h0, alpha)
    w = tie_weight(h0, gamma, alpha)
    sample = mc.run_chunked(stat, master_seed, (*key, 1), validation_trials, chunk_size, threads) if validation_trials else h0
    rate = exceedance_rate(sample, gamma, w)
    return Calibration(
        threshold=gamma, realized_pfa=rate, ci=binomial_ci(round(rate * sample.size), sample.size),
        trials=trials, validation_trials=validation_trials or 0, tie_weight=w,
    )


def detection_rate(
    model: ReceiverModel,
    T: np.ndarray,
    threshold: float,
    trials: int,
    master_seed: int,
    key=(0,),
    hypothesis: str = H1,
    chunk_size: int = 4096,
    threads: int = 1,
    tie_weight: float = 1.0,
) -> float:
    stat = lambda rng, n: model.statistics(rng, n, hypothesis, T)  # noqa: E731
    s = mc.run_chunked(stat, master_seed, key, trials, chunk_size, threads)
    return exceedance_rate(s, threshold, tie_weight)

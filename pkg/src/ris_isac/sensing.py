"""Target-echo statistics: sampled effective channel, its covariance and the gain matrix.

Notation follows the channel module: ``hs`` is the static LOS target
channel, ``hc`` the cascaded LOS channel through the RIS, ``Rs``/``Rc`` the
matching NLOS correlations.  Products of two NLOS factors are not part of
the echo model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .channel import ChannelSet, RisPhases, cascaded_channel, cascaded_correlation
from .errors import DimensionMismatch, NotPSD

PSD_CLIP_TOL = 1e-10


@dataclass(frozen=True)
class RcsVariances:
    beta1: float
    beta2: float
    beta3: float

    def __post_init__(self):
        if min(self.beta1, self.beta2, self.beta3) < 0:
            raise ValueError("RCS variances must be nonnegative")

    @classmethod
    def of(cls, betas) -> "RcsVariances":
        return betas if isinstance(betas, cls) else cls(*(float(b) for b in betas))


@dataclass(frozen=True)
class SensingCovariance:
    R: np.ndarray
    C: np.ndarray


def _precoder(ch: ChannelSet, p) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    if p.shape != (ch.K,):
        raise DimensionMismatch(f"precoder has shape {p.shape}, expected ({ch.K},)")
    return p


def _target_terms(ch: ChannelSet, phases: RisPhases):
    if phases.psi.shape != (ch.N,):
        raise DimensionMismatch(f"{phases.psi.shape[0]} phases for an {ch.N}-element RIS")
    hs = np.asarray(ch.hbar_s2, dtype=complex)
    hc = cascaded_channel(ch.a_t, ch.b_t, phases, ch.hbar_r2)
    Rs = np.asarray(ch.R_s2, dtype=complex)
    Rc = cascaded_correlation(ch.a_t, ch.b_t, phases, ch.R_r2)
    return hs, hc, Rs, Rc


class TargetEchoModel:
    """Sampler of the effective target channel ``h_2[l]`` for fixed ``(p, psi)``.

    The matrix square roots of the NLOS correlations are computed once, so
    repeated calls to :meth:`sample` are cheap.
    """

    def __init__(self, ch: ChannelSet, phases: RisPhases, p, betas):
        self.betas = RcsVariances.of(betas)
        self.p = _precoder(ch, p)
        hs, hc, _, _ = _target_terms(ch, phases)
        self.hs, self.hc = hs, hc
        self.a_t = np.asarray(ch.a_t, dtype=complex)
        self.ris_row = np.asarray(ch.b_t, dtype=complex) * phases.reflection
        self.sqrt_Rs = numerics.psd_sqrt(ch.R_s2)
        self.sqrt_Rr = numerics.psd_sqrt(ch.R_r2)
        self.hs_p = hs @ self.p
        self.hc_p = hc @ self.p

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` independent realisations; returns shape ``(size, K)``.

        Draw order per call: the three RCS coefficients, then the static
        NLOS channel, then the RIS-side NLOS channel.
        """
        b = self.betas
        a = numerics.standard_complex_normal(rng, (size, 3)) * np.sqrt([b.beta1, b.beta2, b.beta3])
        hs_t = numerics.standard_complex_normal(rng, (size, self.hs.shape[0])) @ self.sqrt_Rs.T
        hr_t = numerics.standard_complex_normal(rng, (size, self.ris_row.shape[0])) @ self.sqrt_Rr.T
        # cascaded NLOS channel a_t (b_t^T D h_r) for every draw
        hc_t = np.outer(hr_t @ self.ris_row, self.a_t)

        hs, hc, p = self.hs, self.hc, self.p
        hs_p, hc_p = self.hs_p, self.hc_p
        hst_p = (hs_t @ p)[:, None]
        hct_p = (hc_t @ p)[:, None]

        direct = hs * hs_p + hs[None, :] * hst_p + hs_t * hs_p
        surface = hc * hc_p + hc[None, :] * hct_p + hc_t * hc_p
        mixed = (
            hs * hc_p + hs[None, :] * hct_p + hs_t * hc_p
            + hc * hs_p + hc[None, :] * hst_p + hc_t * hs_p
        )
        return a[:, :1] * direct + a[:, 1:2] * surface + a[:, 2:3] * mixed


def sample_effective_channel(ch: ChannelSet, phases: RisPhases, p, betas, rng, size: int | None = None):
    """Draw the effective end-to-end target channel (precoder included).

    Returns a single ``K``-vector when ``size`` is None, else ``(size, K)``.
    """
    model = TargetEchoModel(ch, phases, p, betas)
    if size is None:
        return model.sample(rng, 1)[0]
    return model.sample(rng, size)


def _clean_psd(R: np.ndarray, what: str) -> np.ndarray:
    R = 0.5 * (R + R.conj().T)
    w, V = np.linalg.eigh(R)
    if w.size == 0 or w[0] >= 0.0:
        return R
    top = max(w[-1], 0.0)
    if w[0] < -PSD_CLIP_TOL * top:
        raise NotPSD(f"{what}: eigenvalue {w[0]:.3e} against max {top:.3e}")
    R = (V * np.clip(w, 0.0, None)) @ V.conj().T
    return 0.5 * (R + R.conj().T)


def target_covariance(ch: ChannelSet, phases: RisPhases, p, betas) -> np.ndarray:
    """Covariance ``E{h_2 h_2^H}`` of the effective target channel.

    Sixteen terms: four per direct and via-surface path, the deterministic
    mixed-path outer product, and eight mixed-path NLOS terms.
    """
    b = RcsVariances.of(betas)
    p = _precoder(ch, p)
    hs, hc, Rs, Rc = _target_terms(ch, phases)
    pp = np.outer(p.conj(), p)  # p^* p^T

    def path(h, Rn, beta):
        hh = np.outer(h, h.conj())
        return beta * (
            abs(h @ p) ** 2 * (hh + Rn)
            + hh * (p.conj() @ Rn.T @ p)
            + hh @ pp @ Rn
            + Rn @ pp @ hh
        )

    # mixed path: deterministic echo w plus the NLOS part of either leg
    w = (hc @ p) * hs + (hs @ p) * hc
    hhs = np.outer(hs, hs.conj())
    hhc = np.outer(hc, hc.conj())
    mixed = (
        np.outer(w, w.conj())
        + abs(hs @ p) ** 2 * Rc
        + hhs * (p.conj() @ Rc.T @ p)
        + hhs @ pp @ Rc
        + Rc @ pp @ hhs
        + abs(hc @ p) ** 2 * Rs
        + hhc * (p.conj() @ Rs.T @ p)
        + hhc @ pp @ Rs
        + Rs @ pp @ hhc
    )
    R = path(hs, Rs, b.beta1) + path(hc, Rc, b.beta2) + b.beta3 * mixed
    return _clean_psd(R, "target covariance")


def gain_matrix(ch: ChannelSet, phases: RisPhases, betas) -> np.ndarray:
    """Matrix ``C`` with ``p^H C p = trace(R(p))`` for every precoder ``p``."""
    b = RcsVariances.of(betas)
    hs, hc, Rs, Rc = _target_terms(ch, phases)
    ns, nc = np.vdot(hs, hs).real, np.vdot(hc, hc).real
    trs, trc = np.trace(Rs).real, np.trace(Rc).real
    Hs = np.outer(hs.conj(), hs)  # hs^* hs^T
    Hc = np.outer(hc.conj(), hc)
    RsT, RcT = Rs.T, Rc.T

    C = b.beta1 * ((ns + trs) * Hs + ns * RsT + Hs @ RsT + RsT @ Hs)
    C = C + b.beta2 * ((nc + trc) * Hc + nc * RcT + Hc @ RcT + RcT @ Hc)
    C = C + b.beta3 * (
        (ns + trs) * Hc + ns * RcT + Hs @ RcT + RcT @ Hs
        + np.vdot(hs, hc) * np.outer(hc.conj(), hs)
        + (nc + trc) * Hs + nc * RsT + Hc @ RsT + RsT @ Hc
        + np.vdot(hc, hs) * np.outer(hs.conj(), hc)
    )
    return 0.5 * (C + C.conj().T)


def sensing_covariance(ch: ChannelSet, phases: RisPhases, p, betas) -> SensingCovariance:
    return SensingCovariance(R=target_covariance(ch, phases, p, betas), C=gain_matrix(ch, phases, betas))

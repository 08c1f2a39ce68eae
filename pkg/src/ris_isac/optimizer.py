"""RIS phase selection and SNR-constrained precoder optimisation.

The precoder maximises the sensing gain ``p^H C p`` subject to
``||p||^2 = P_t`` and ``|h_1^T p|^2 >= gamma_th sigma2``.  Writing
``p = Q_A x`` with ``Q_A`` an orthonormal basis of ``[h_1^*, B]``
(``C = B B^H``), the problem reduces to a small one in ``x``: either the
dominant eigenvector already satisfies the SNR constraint, or the constraint
is active and the remaining coordinates solve a norm-constrained quadratic
program (:func:`solve_norm_constrained_qp`).
"""

from __future__ import annotations

from dataclasses import dataclass
import enum
import logging

import numpy as np

from . import numerics
from .channel import RisPhases
from .errors import Infeasible, RankDeficient

log = logging.getLogger(__name__)


class Case(str, enum.Enum):
    EIGENVECTOR_INTERIOR = "EigenvectorInterior"
    BOUNDARY_LEMMA1 = "BoundaryLemma1"


@dataclass(frozen=True)
class Lemma1Problem:
    """maximize ``x^H A x + 2 Re(x^H b)`` subject to ``||x||^2 = c``."""

    A_bar: np.ndarray
    b_bar: np.ndarray
    c_bar: float

    def __post_init__(self):
        if self.c_bar < 0:
            raise ValueError("c_bar must be nonnegative")

    def objective(self, x: np.ndarray) -> float:
        return float(np.vdot(x, self.A_bar @ x).real + 2 * np.vdot(x, self.b_bar).real)


@dataclass(frozen=True)
class Lemma1Solution:
    x: np.ndarray
    gamma: float
    objective: float
    kkt_residual: float
    norm_residual: float
    hard_case: bool = False


@dataclass(frozen=True)
class PrecoderSolution:
    p: np.ndarray
    comm_snr: float
    objective: float
    case_fired: Case
    kkt_residual: float
    rank: int
    discarded_gain: float = 0.0
    hard_case: bool = False


def optimize_phases(b_t, hbar_r2) -> RisPhases:
    """Phases that co-phase every term of ``b_t^T D_psi hbar_r2``.

    ``psi_n = -angle(b_n h_n)``, so the cascade scalar becomes
    ``sum_n |b_n| |h_n|``.  Elements with a zero product get ``psi_n = 0``.
    """
    prod = np.asarray(b_t, dtype=complex) * np.asarray(hbar_r2, dtype=complex)
    psi = np.where(prod != 0, -np.angle(prod), 0.0)
    return RisPhases(psi)


def communication_snr(h1, p, sigma2: float) -> float:
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    return float(abs(np.dot(h1, p)) ** 2 / sigma2)


def secular_function(gamma: float, lam: np.ndarray, beta_sq: np.ndarray) -> float:
    """``sum_i |u_i^H b|^2 / (gamma - lambda_i)^2``."""
    return float(np.sum(beta_sq / (gamma - lam) ** 2))


def solve_norm_constrained_qp(prob: Lemma1Problem) -> Lemma1Solution:
    """Global maximiser of a Hermitian quadratic on the sphere ``||x||^2 = c``.

    The multiplier ``gamma > lambda_1`` is the root of the secular equation,
    located by bisection on ``log(gamma - lambda_1)`` so that the
    root keeps full relative precision even when the root crowds
    ``lambda_1``.  When ``b`` has no component along the top eigenspace and
    the secular function stays below ``c`` (the trust-region "hard case"),
    the solution is completed along ``u_1`` and flagged.
    """
    A = numerics.check_hermitian(prob.A_bar)
    b = np.asarray(prob.b_bar, dtype=complex)
    c = float(prob.c_bar)
    n = A.shape[0]
    if n == 0:
        return Lemma1Solution(np.zeros(0, complex), 0.0, 0.0, 0.0, 0.0)
    eig = numerics.hermitian_eig(A)
    lam, U = eig.values, eig.vectors
    if c == 0.0:
        x = np.zeros(n, complex)
        return Lemma1Solution(x, float(lam[0]), 0.0, 0.0, 0.0)

    b_norm = np.linalg.norm(b)
    tr = max(float(np.trace(A).real), 0.0)
    if b_norm < 1e-14 or b_norm < 1e-12 * np.sqrt(tr * c):
        x = np.sqrt(c) * U[:, 0]
        return _finish(prob, x, float(lam[0]), b, hard_case=False)

    beta = U.conj().T @ b
    beta_sq = np.abs(beta) ** 2
    gap = lam[0] - lam  # >= 0, exactly 0 for the top eigenvalue
    top = gap <= 1e-12 * max(abs(lam[0]), 1.0)
    gap = np.where(top, 0.0, gap)

    top_weight = beta_sq[top].sum()
    if top_weight <= (1e-12 * b_norm) ** 2:
        rest = ~top
        x0 = U[:, rest] @ (beta[rest] / gap[rest]) if rest.any() else np.zeros(n, complex)
        slack = c - float(np.vdot(x0, x0).real)
        if slack >= 0.0:
            x = x0 + np.sqrt(slack) * U[:, 0]
            return _finish(prob, x, float(lam[0]), b, hard_case=True)
        beta_sq = np.where(top, 0.0, beta_sq)

    def g(delta):
        return float(np.sum(beta_sq / (delta + gap) ** 2)) - c

    # g(lo) >= 0 >= g(hi) by the two single-term bounds; loops are safeguards
    lo = np.sqrt(beta_sq[top].sum() / c) if top_weight > 0 else 0.0
    hi = b_norm / np.sqrt(c)
    if lo <= 0.0:
        lo = hi
        while g(lo) <= 0.0:
            lo *= 0.5
            if lo < 1e-300:
                break
    # bisect on log(delta): x scales like 1/delta along u_1, so delta needs
    # relative rather than absolute precision when the root crowds lambda_1
    G = lambda s: g(np.exp(s))  # noqa: E731
    s_lo, s_hi = np.log(lo), np.log(hi)
    while G(s_lo) < 0.0:
        s_lo -= np.log(2.0)
    while G(s_hi) > 0.0:
        s_hi += np.log(2.0)
    log_delta = numerics.bisection_root(G, s_lo, s_hi, tol=1e-14)
    delta = float(np.exp(log_delta))
    x = U @ (beta / (delta + gap))
    return _finish(prob, x, float(lam[0] + delta), b, hard_case=False)


def _finish(prob: Lemma1Problem, x, gamma, b, hard_case) -> Lemma1Solution:
    A = prob.A_bar
    res = gamma * x - A @ x - b
    # backward-error scaling of the stationarity condition (gamma I - A) x = b
    scale = max((abs(gamma) + np.linalg.norm(A, 2)) * np.linalg.norm(x) + np.linalg.norm(b), 1e-300)
    nrm = float(np.vdot(x, x).real)
    return Lemma1Solution(
        x=x, gamma=gamma, objective=prob.objective(x),
        kkt_residual=float(np.linalg.norm(res) / scale),
        norm_residual=abs(nrm - prob.c_bar) / max(prob.c_bar, 1e-300),
        hard_case=hard_case,
    )


def optimize_precoder(
    C, h1, P_t: float, gamma_th: float, sigma2: float, rank_tol: float = 1e-10,
    max_discard: float = 1e-8,
) -> PrecoderSolution:
    """Maximise ``p^H C p`` under the power and communication-SNR constraints.

    Parameters
    ----------
    C : (K, K) Hermitian PSD array
        Sensing gain matrix.
    h1 : (K,) complex array
        End-to-end UE channel.
    P_t, gamma_th, sigma2 : float
        Transmit power, SNR requirement (linear) and noise variance.
    rank_tol : float
        Relative eigenvalue threshold defining the rank of ``C`` (``C = B B^H``).
    max_discard : float
        Largest share of ``trace(C)`` allowed to fall outside the search
        subspace.  The subspace is spanned by ``h_1^*`` and the strongest
        columns of ``B`` that keep the stack numerically independent, so the
        share is zero whenever that span already contains ``range(C)``
        (always true for full-rank ``C``).  It is reported as ``discarded_gain``.

    Raises
    ------
    Infeasible
        If ``P_t ||h_1||^2 < gamma_th sigma2``.
    RankDeficient
        If the search subspace misses more than ``max_discard`` of the gain.
    """
    h1 = np.asarray(h1, dtype=complex)
    K = h1.shape[0]
    h_norm = np.linalg.norm(h1)
    if P_t * h_norm**2 < gamma_th * sigma2:
        raise Infeasible(
            f"P_t ||h1||^2 = {P_t * h_norm**2:.4g} below gamma_th sigma2 = {gamma_th * sigma2:.4g}"
        )
    C = numerics.check_hermitian(C)
    B = numerics.psd_factor(C, rank_tol)
    total = max(float(np.trace(C).real), 1e-300)
    # basis of span[h_1^*, B]: weakest factor columns are dropped until the
    # stack is numerically independent; at most K - 1 can survive
    m = min(B.shape[1], K - 1)
    while True:
        try:
            Q, _ = numerics.gram_schmidt_qr(np.column_stack([h1.conj(), B[:, :m]]))
            break
        except RankDeficient:
            if m == 0:
                raise
            m -= 1
    F = Q.conj().T @ B  # F F^H = Q^H C Q; rows: r_A^H, then R_A-bar
    discarded = max(0.0, 1.0 - float(np.sum(np.abs(F) ** 2)) / total) if B.shape[1] else 0.0
    if discarded > max_discard:
        raise RankDeficient(
            f"span of [h1*, B] misses {discarded:.2e} of trace(C) (budget {max_discard:.1e})"
        )
    if m < B.shape[1]:
        log.debug("basis keeps %d of %d factor columns (residual gain %.2e)", m, B.shape[1], discarded)
    r2 = B.shape[1]
    t = np.sqrt(gamma_th * sigma2) / h_norm

    case = Case.EIGENVECTOR_INTERIOR
    hard = False
    x = None
    if r2 == 0 or not np.any(F):
        # zero gain matrix: any unit direction is optimal, serve the UE
        x = np.array([np.sqrt(P_t)], dtype=complex)
        kkt = 0.0
    else:
        eig = numerics.hermitian_eig(F @ F.conj().T)
        v = eig.vectors[:, 0]
        if abs(v[0]) > 0:
            x_a = np.sqrt(P_t) * v * np.exp(-1j * np.angle(v[0]))
            x_a[0] = abs(x_a[0])
            if x_a[0].real >= t:
                x = x_a
                lam1 = eig.values[0]
                kkt = np.linalg.norm(F @ (F.conj().T @ x) - lam1 * x) / max(lam1 * np.sqrt(P_t), 1e-300)
    if x is None:
        case = Case.BOUNDARY_LEMMA1
        R_bar = F[1:]
        r_bar = F[0].conj()
        prob = Lemma1Problem(
            A_bar=R_bar @ R_bar.conj().T,
            b_bar=t * (R_bar @ r_bar),
            c_bar=max(P_t - t**2, 0.0),
        )
        sol = solve_norm_constrained_qp(prob)
        x = np.concatenate([[t], sol.x])
        kkt = max(sol.kkt_residual, sol.norm_residual)
        hard = sol.hard_case

    p = Q @ x
    return PrecoderSolution(
        p=p,
        comm_snr=communication_snr(h1, p, sigma2),
        objective=float(np.vdot(p, C @ p).real),
        case_fired=case,
        kkt_residual=float(kkt),
        rank=r2,
        discarded_gain=discarded,
        hard_case=hard,
    )

"""Fast built-in oracle checks, run by ``ris-isac selftest``.

Each check compares a production routine against an independent
computation on small random instances and returns ``(passed, detail)``.
"""

from __future__ import annotations

import numpy as np

from . import numerics
from .channel import ChannelSet, RisPhases, cascaded_channel
from .detector import build_test_matrix, estimate_clutter_subspace
from .optimizer import Lemma1Problem, optimize_phases, optimize_precoder, solve_norm_constrained_qp
from .sensing import gain_matrix, target_covariance


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    G = numerics.standard_complex_normal(rng, (n, rank))
    return scale * (G @ G.conj().T) / max(rank, 1)


def random_channel_set(rng, K=4, N=2, nlos_rank=None) -> ChannelSet:
    """Small random scenario with generic (non-steering) channels."""
    cn = lambda *s: numerics.standard_complex_normal(rng, s)  # noqa: E731
    return ChannelSet(
        h_s1=cn(K), h_r1=cn(N), a_t=cn(K), b_t=cn(N),
        hbar_s2=cn(K), hbar_r2=cn(N),
        R_s2=random_psd(rng, K, nlos_rank, 0.3), R_r2=random_psd(rng, N, nlos_rank, 0.3),
        R_clutter=random_psd(rng, K, 1),
    )


def check_trace_identity(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(50):
        ch = random_channel_set(rng, K=5, N=3)
        ph = RisPhases.random(3, rng)
        betas = rng.uniform(0, 2, 3)
        p = numerics.standard_complex_normal(rng, 5)
        trR = np.trace(target_covariance(ch, ph, p, betas)).real
        pCp = np.vdot(p, gain_matrix(ch, ph, betas) @ p).real
        worst = max(worst, abs(pCp - trR) / trR)
    return worst < 1e-10, f"max relative gap {worst:.2e}"


def check_qr(rng) -> tuple[bool, str]:
    A = numerics.standard_complex_normal(rng, (8, 5))
    Q, R = numerics.gram_schmidt_qr(A)
    orth = np.abs(Q.conj().T @ Q - np.eye(5)).max()
    rec = np.linalg.norm(Q @ R - A) / np.linalg.norm(A)
    return orth < 1e-10 and rec < 1e-9, f"orthogonality {orth:.1e}, reconstruction {rec:.1e}"


def check_lemma1(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        prob = Lemma1Problem(random_psd(rng, n), numerics.standard_complex_normal(rng, n), float(rng.uniform(0.1, 3)))
        sol = solve_norm_constrained_qp(prob)
        worst = max(worst, sol.kkt_residual, sol.norm_residual)
    return worst < 1e-8, f"max KKT/norm residual {worst:.1e}"


def check_phase_rule(rng) -> tuple[bool, str]:
    b = numerics.standard_complex_normal(rng, 64)
    h = numerics.standard_complex_normal(rng, 64)
    ph = optimize_phases(b, h)
    got = abs(np.sum(b * ph.reflection * h))
    target = np.sum(np.abs(b) * np.abs(h))
    rand = max(abs(np.sum(b * RisPhases.random(64, rng).reflection * h)) for _ in range(200))
    ok = abs(got - target) <= 1e-12 * target and got >= rand
    return ok, f"co-phased {got:.4f} vs bound {target:.4f}, best random {rand:.4f}"


def check_precoder(rng) -> tuple[bool, str]:
    ch = random_channel_set(rng, K=5, N=2, nlos_rank=1)
    ph = RisPhases.random(2, rng)
    C = gain_matrix(ch, ph, (0.5, 1.0, 0.3))
    h1 = ch.ue_channel(ph)
    gamma_th = 0.5 * np.linalg.norm(h1) ** 2
    sol = optimize_precoder(C, h1, 1.0, gamma_th, 1.0)
    Z = numerics.standard_complex_normal(rng, (20000, 5))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    snr = np.abs(Z @ h1) ** 2
    feas = snr >= gamma_th
    best = np.max(np.einsum("nk,kj,nj->n", Z[feas].conj(), C, Z[feas]).real) if feas.any() else 0.0
    ok = sol.objective >= best * (1 - 1e-12) and sol.comm_snr >= gamma_th * (1 - 1e-8)
    return ok, f"objective {sol.objective:.4g} vs best random feasible {best:.4g} ({sol.case_fired.value})"


def check_clutter_invariance(rng) -> tuple[bool, str]:
    R = random_psd(rng, 6, 2)
    sub = estimate_clutter_subspace(random_psd(rng, 6, 2), 0.999)
    T = build_test_matrix(R, sub, 1.0)
    leak = np.linalg.norm(T @ sub.U) / np.linalg.norm(T)
    return leak < 1e-8, f"||T U|| / ||T|| = {leak:.1e}"


def check_cascade(rng) -> tuple[bool, str]:
    a, b, h = (numerics.standard_complex_normal(rng, n) for n in (4, 3, 3))
    ph = RisPhases.random(3, rng)
    dense = np.outer(a, b) @ np.diag(ph.reflection) @ h
    err = np.linalg.norm(cascaded_channel(a, b, ph, h) - dense)
    return err < 1e-12, f"dense-product mismatch {err:.1e}"


CHECKS = {
    "trace_identity": check_trace_identity,
    "gram_schmidt_qr": check_qr,
    "lemma1_kkt": check_lemma1,
    "phase_rule": check_phase_rule,
    "precoder_dominance": check_precoder,
    "clutter_invariance": check_clutter_invariance,
    "cascaded_channel": check_cascade,
}


def run_all(seed: int = 0, out=print) -> bool:
    ok_all = True
    for i, (name, fn) in enumerate(CHECKS.items()):
        ok, detail = fn(np.random.default_rng([seed, i]))
        ok_all &= ok
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok_all

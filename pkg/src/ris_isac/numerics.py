"""Dense complex linear-algebra and root-finding kernels.

All routines operate on plain ``numpy`` arrays.  Hermitian eigenproblems are
delegated to LAPACK through :func:`numpy.linalg.eigh`; the Gram-Schmidt QR and
the bisection search are implemented here because their exact behaviour
(sign convention of ``R``, bracket contract) is relied upon downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import MaxIterations, NoSignChange, NonFinite, NonHermitian, NotPSD, RankDeficient

DEFAULT_RANK_TOL = 1e-10
HERMITIAN_TOL = 1e-10
BISECTION_MAX_ITER = 200


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.

    ``vectors[:, i]`` is the unit-norm eigenvector of ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def _check_finite(M: np.ndarray) -> None:
    if not np.all(np.isfinite(M)):
        raise NonFinite("input contains NaN or Inf entries")


def check_hermitian(M: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate that ``M`` is square and Hermitian; return ``(M + M^H)/2``."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonHermitian(f"expected a square matrix, got shape {M.shape}")
    _check_finite(M)
    scale = max(1.0, np.linalg.norm(M))
    asym = np.linalg.norm(M - M.conj().T)
    if asym > tol * scale:
        raise NonHermitian(f"relative asymmetry {asym / scale:.3e} exceeds {tol:.1e}")
    return 0.5 * (M + M.conj().T)


def hermitian_eig(M: np.ndarray, tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix with descending eigenvalues.

    Parameters
    ----------
    M : (n, n) complex array
        Hermitian up to a relative asymmetry of ``tol``.
    tol : float
        Allowed ``||M - M^H||_F / max(1, ||M||_F)``.

    Raises
    ------
    NonHermitian
        If ``M`` is not square or too asymmetric.
    NonFinite
        If ``M`` contains NaN or Inf.
    """
    H = check_hermitian(M, tol)
    w, V = np.linalg.eigh(H)
    order = np.argsort(w)[::-1]
    return EigenDecomposition(values=w[order], vectors=V[:, order])


def gram_schmidt_qr(A: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorisation by modified Gram-Schmidt with one re-orthogonalisation pass.

    The diagonal of ``R`` is real and positive, so the first column of ``Q``
    is ``A[:, 0] / ||A[:, 0]||``.

    Raises
    ------
    RankDeficient
        If the columns of ``A`` are not numerically independent, i.e. the
        smallest singular value is at most ``rank_tol`` times the largest.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise RankDeficient(f"expected a 2-D matrix, got shape {A.shape}")
    _check_finite(A)
    m, n = A.shape
    if n == 0:
        return np.zeros((m, 0), dtype=complex), np.zeros((0, 0), dtype=complex)
    if n > m:
        raise RankDeficient(f"{n} columns cannot be independent in dimension {m}")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= rank_tol * sv[0]:
        raise RankDeficient(
            f"smallest singular value {sv[-1]:.3e} <= {rank_tol:.1e} x largest {sv[0]:.3e}"
        )

    Q = np.zeros((m, n), dtype=complex)
    R = np.zeros((n, n), dtype=complex)
    for j in range(n):
        v = A[:, j].copy()
        for _ in range(2):
            for i in range(j):
                c = np.vdot(Q[:, i], v)
                R[i, j] += c
                v -= c * Q[:, i]
        nrm = np.linalg.norm(v)
        R[j, j] = nrm
        Q[:, j] = v / nrm
    return Q, R


def psd_factor(M: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Return ``B`` with ``B B^H = M`` and as many columns as the numerical rank of ``M``.

    Eigenvalues above ``tol * max_eigenvalue`` are retained.  ``M = 0`` gives a
    factor with zero columns.
    """
    eig = hermitian_eig(M)
    lam_max = eig.values[0] if eig.values.size else 0.0
    if lam_max <= 0.0:
        if eig.values.size and eig.values[-1] < 0.0:
            raise NotPSD(f"matrix is negative definite (min eigenvalue {eig.values[-1]:.3e})")
        return np.zeros((eig.vectors.shape[0], 0), dtype=complex)
    if eig.values[-1] < -tol * lam_max:
        raise NotPSD(
            f"eigenvalue {eig.values[-1]:.3e} is below -{tol:.1e} x max eigenvalue {lam_max:.3e}"
        )
    keep = eig.values > tol * lam_max
    return eig.vectors[:, keep] * np.sqrt(eig.values[keep])


def bisection_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = BISECTION_MAX_ITER,
) -> float:
    """Root of a continuous monotone ``f`` bracketed by ``[lo, hi]``.

    Returns the midpoint of the final bracket, whose width is at most ``tol``.
    An exact zero at an endpoint or midpoint is returned immediately.
    """
    if lo > hi:
        lo, hi = hi, lo
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChange(f"f({lo:g})={f_lo:g} and f({hi:g})={f_hi:g} have the same sign")
    for _ in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket cannot shrink further in floating point
            return mid
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    if hi - lo <= tol:
        return 0.5 * (lo + hi)
    raise MaxIterations(f"bracket width {hi - lo:.3e} still above {tol:.1e} after {max_iter} steps")


def psd_sqrt(R: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Hermitian square root of a PSD matrix; tiny negative eigenvalues are clipped."""
    eig = hermitian_eig(R)
    if eig.values.size:
        lam_max, lam_min = eig.values[0], eig.values[-1]
        if lam_min < 0.0 and (lam_max <= 0.0 or lam_min < -tol * lam_max):
            raise NotPSD(f"min eigenvalue {lam_min:.3e} (max {lam_max:.3e})")
    root = np.sqrt(np.clip(eig.values, 0.0, None))
    return (eig.vectors * root) @ eig.vectors.conj().T


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. circular CN(0, 1) entries: real and imaginary parts each of variance 1/2.

    Real and imaginary parts are consecutive draws of the stream.
    """
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    z = rng.standard_normal(shape + (2,)).view(complex)[..., 0]
    z *= np.sqrt(0.5)
    return z


def sample_complex_gaussian(R: np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``R^{1/2} z`` with ``z ~ CN(0, I)``.

    With ``size=None`` a single vector of length ``K`` is returned, otherwise
    an array of shape ``(size, K)`` whose rows are independent draws.
    """
    root = psd_sqrt(R)
    K = root.shape[0]
    if size is None:
        return root @ standard_complex_normal(rng, K)
    z = standard_complex_normal(rng, (size, K))
    return z @ root.T

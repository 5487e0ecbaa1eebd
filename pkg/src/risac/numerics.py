r"""Small dense complex linear-algebra kernel shared by every module.

All matrices live in plain ``numpy`` complex arrays.  The helpers here
add the contracts the optimization layers rely on: Hermitian inputs are
actually Hermitian, eigenvalues come out sorted descending, and unitary
factors are unitary to tight tolerances.  Sign/phase of eigenvector and
singular-vector columns is *not* pinned down; consumers must only use
reconstructed products (``lam * b @ b^H``, ``k @ lh``), never compare
raw columns.
"""

from __future__ import annotations

import numpy as np

#: unitarity / Hermitian-symmetry tolerance for matrices up to ~100 rows
UNITARY_TOL = 1e-10
#: reconstruction tolerance for factorizations (relative to Frobenius norm)
RECON_TOL = 1e-9


def frob(a: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(a))


def herm(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose (2-D only)."""
    return a.conj().T


def hermitian_residual(a: np.ndarray) -> float:
    """max |A - A^H|, the deviation from Hermitian symmetry."""
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    """Whether ``a`` is square and Hermitian within ``tol * max(1, ||a||_F)``."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return hermitian_residual(a) <= tol * max(1.0, frob(a))


def check_finite(a: np.ndarray, name: str = "matrix") -> None:
    """Raise ``ValueError`` if ``a`` contains NaN or Inf entries."""
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def hermitian_evd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r"""Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(w, v)`` with ``a = v @ diag(w) @ v^H``, the columns of
    ``v`` orthonormal, and ``w`` real and sorted in descending order.
    The descending sort is stable, so degenerate eigenvalues keep the
    ascending-solver order among themselves (a deterministic tie-break
    that :func:`risac.sdp.extract_rank_one` relies on).

    Raises ``ValueError`` on non-square or non-Hermitian input.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("hermitian_evd expects a square matrix")
    check_finite(a, "hermitian_evd input")
    if not is_hermitian(a):
        raise ValueError(
            f"matrix is not Hermitian (residual {hermitian_residual(a):.3e})"
        )
    w, v = np.linalg.eigh((a + a.conj().T) / 2.0)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def thin_svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r"""Thin singular-value decomposition ``a = k @ diag(s) @ l^H``.

    For the square matrices used here the factors ``k`` and ``l`` are
    unitary and ``k @ l^H`` is the unitary polar factor of ``a``
    whenever ``a`` is invertible.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValueError("thin_svd expects a 2-D matrix")
    check_finite(a, "thin_svd input")
    try:
        k, s, lh = np.linalg.svd(a, full_matrices=False)
        return k, s, lh.conj().T
    except np.linalg.LinAlgError:
        pass
    # LAPACK's divide-and-conquer driver occasionally refuses perfectly
    # finite matrices.  The adjoint usually takes a different internal
    # path, so try it first (exact); failing that, nudge the matrix by
    # an escalating relative jitter far below any tolerance used here.
    try:
        k, s, lh = np.linalg.svd(a.conj().T, full_matrices=False)
        return lh.conj().T, s, k
    except np.linalg.LinAlgError:
        pass
    scale = np.linalg.norm(a) or 1.0
    eye = np.eye(a.shape[0], a.shape[1])
    for exponent in range(6):
        jitter = scale * 1e-13 * 10.0**exponent
        try:
            k, s, lh = np.linalg.svd(a + jitter * eye, full_matrices=False)
            return k, s, lh.conj().T
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("singular value decomposition failed")


def unitary_completion(v: np.ndarray) -> np.ndarray:
    r"""Unitary matrix whose first column is ``v / ||v||``.

    Built from a QR factorization of ``[v | I]``; the first column's
    free phase is rotated so it matches ``v / ||v||`` exactly (up to
    roundoff) rather than up to a unit scalar.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    n = v.size
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("cannot complete the zero vector to a unitary basis")
    u = v / nrm
    q, r = np.linalg.qr(np.concatenate([u[:, None], np.eye(n)], axis=1))
    q = np.asarray(q)
    # q[:, 0] = u / r[0, 0] with |r[0, 0]| = 1; undo the phase
    q[:, 0] *= r[0, 0] / abs(r[0, 0])
    return q


def unitarity_residual(u: np.ndarray) -> float:
    """max |U^H U - I|."""
    n = u.shape[1]
    return float(np.max(np.abs(u.conj().T @ u - np.eye(n))))


def rand_complex(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """i.i.d. circular complex Gaussian entries, unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rand_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish random unitary from the QR of a complex Gaussian matrix."""
    q, r = np.linalg.qr(rand_complex(rng, n, n))
    # normalize the QR phase convention so the distribution is well defined
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def rand_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random Hermitian matrix with O(1) entries."""
    a = rand_complex(rng, n, n)
    return (a + a.conj().T) / 2.0


def rand_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    """Random Hermitian positive-semidefinite matrix (Wishart-style)."""
    r = rank if rank is not None else n
    b = rand_complex(rng, n, r)
    return b @ b.conj().T

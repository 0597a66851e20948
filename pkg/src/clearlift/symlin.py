"""Dense symmetric eigendecomposition, PSD projection, Frobenius products.

Symmetric matrices are plain square ndarrays kept exactly symmetric by
construction; ``sym`` restores exact symmetry after operations that may
introduce rounding asymmetry. The eigensolver is LAPACK's symmetric driver
(tridiagonalization + QR/divide-and-conquer) via numpy.
"""

from __future__ import annotations

import numpy as np

__all__ = ["sym", "eig_sym", "proj_psd", "frob", "frob_norm"]


def sym(m: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy (average of the matrix and its transpose)."""
    return 0.5 * (m + m.T)


def _check_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def eig_sym(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    m = _check_square(m)
    return np.linalg.eigh(sym(m))


def proj_psd(m: np.ndarray) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix (negative eigenvalues clipped at 0)."""
    m = _check_square(m)
    w, v = np.linalg.eigh(sym(m))
    if w[0] >= 0.0:
        return sym(m)
    pos = w > 0.0
    if not np.any(pos):
        return np.zeros_like(m)
    vp = v[:, pos]
    return sym((vp * w[pos]) @ vp.T)


def frob(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius inner product trace(a' b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def frob_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float)))

"""Dense Hermitian linear algebra with a single support-cutoff policy.

Every spectral computation in the package funnels through eigh_desc so that
support decisions (which eigenvalues count as nonzero) are made in exactly one
place. All logarithms are base 2.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import DimGuard, NotHermitian, NotPSD

# validation tolerances shared across the package
TOL_HERM = 1e-9
TOL_PSD = 1e-9
TOL_TRACE = 1e-9
TOL_CPTP = 1e-9
# relative eigenvalue cutoff separating support from kernel
SUPPORT_CUTOFF = 1e-10

_DEFAULT_MAX_DIM = 4096


def max_dim_limit():
    """Dimension guard, overridable through QONESHOT_MAX_DIM."""
    raw = os.environ.get("QONESHOT_MAX_DIM")
    if raw is None:
        return _DEFAULT_MAX_DIM
    try:
        val = int(raw)
    except ValueError as exc:
        raise DimGuard(f"QONESHOT_MAX_DIM={raw!r} is not an integer") from exc
    if val < 1:
        raise DimGuard(f"QONESHOT_MAX_DIM={val} must be positive")
    return val


def check_dim(dim, limit=None, what="operator"):
    lim = max_dim_limit() if limit is None else limit
    if dim > lim:
        raise DimGuard(f"{what} dimension {dim} exceeds guard {lim}")
    return dim


def hermitian_deviation(mat):
    return float(np.max(np.abs(mat - mat.conj().T)))


def require_hermitian(mat, tol=TOL_HERM, what="matrix"):
    dev = hermitian_deviation(mat)
    scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 1.0)
    if dev > tol * scale:
        raise NotHermitian(f"{what} deviates from Hermitian by {dev:.3e}", deviation=dev)
    return 0.5 * (mat + mat.conj().T)


@dataclass(frozen=True)
class HermitianEigen:
    """Eigensystem with eigenvalues sorted descending; vectors are columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def support_mask(self, cutoff=None):
        lam = self.eigenvalues
        top = float(np.max(np.abs(lam))) if lam.size else 0.0
        cut = (SUPPORT_CUTOFF if cutoff is None else cutoff) * max(top, 1e-300)
        return np.abs(lam) > cut

    def reconstruct(self, values):
        v = self.eigenvectors
        return (v * np.asarray(values)) @ v.conj().T


def eigh_desc(mat, check=False, what="matrix"):
    m = np.asarray(mat, dtype=complex)
    if check:
        m = require_hermitian(m, what=what)
    else:
        m = 0.5 * (m + m.conj().T)
    lam, vec = np.linalg.eigh(m)
    order = np.argsort(lam)[::-1]
    return HermitianEigen(lam[order].real, vec[:, order])


def min_eigenvalue(mat):
    lam = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
    return float(lam[0])


def require_psd(mat, tol=TOL_PSD, what="matrix"):
    lam_min = min_eigenvalue(mat)
    scale = max(1.0, float(np.max(np.abs(mat))) if mat.size else 1.0)
    if lam_min < -tol * scale:
        raise NotPSD(f"{what} has eigenvalue {lam_min:.3e} below -tolerance", min_eigenvalue=lam_min)
    return lam_min


def support_projector(mat):
    es = eigh_desc(mat)
    mask = es.support_mask()
    return es.reconstruct(mask.astype(float))


def rank_on_support(mat):
    es = eigh_desc(mat)
    return int(np.count_nonzero(es.support_mask()))


def fn_on_support(mat, fn, outside=0.0):
    """Apply a scalar function to the eigenvalues on the support.

    Eigenvalues below the support cutoff map to `outside` (default 0), which
    realizes the usual convention f(0) := 0 for log/inverse-type functions.
    """
    es = eigh_desc(mat)
    mask = es.support_mask()
    vals = np.full(es.dim, outside, dtype=float)
    if np.any(mask):
        vals[mask] = fn(es.eigenvalues[mask])
    return es.reconstruct(vals)


def sqrtm_psd(mat):
    es = eigh_desc(mat)
    lam = np.clip(es.eigenvalues, 0.0, None)
    return es.reconstruct(np.sqrt(lam))


def invsqrtm_support(mat):
    return fn_on_support(mat, lambda x: 1.0 / np.sqrt(x))


def log2m_support(mat):
    return fn_on_support(mat, np.log2)


def projector_nonneg(mat, zero_tol=None):
    """Projector onto the span of eigenvectors with eigenvalue >= -cutoff.

    The cutoff absorbs numerically-zero eigenvalues into the nonnegative part,
    matching the convention that the nonnegative spectral projector includes
    the kernel.
    """
    es = eigh_desc(mat)
    top = float(np.max(np.abs(es.eigenvalues))) if es.dim else 0.0
    cut = (SUPPORT_CUTOFF if zero_tol is None else zero_tol) * max(top, 1e-300)
    mask = es.eigenvalues >= -cut
    return es.reconstruct(mask.astype(float))


def projector_negative(mat, zero_tol=None):
    """Projector onto strictly negative eigenvalues (complement of nonneg)."""
    dim = mat.shape[0]
    return np.eye(dim, dtype=complex) - projector_nonneg(mat, zero_tol)


def positive_part_sum(mat):
    """Sum of the positive eigenvalues, Tr[(M)_+]."""
    lam = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
    pos = lam[lam > 0.0]
    return float(np.sum(pos)) if pos.size else 0.0


def positive_part(mat):
    """(projector, clipped) for the strictly positive spectral part.

    Unlike projector_nonneg this excludes the kernel, so a PSD input returns
    its support projector and the input itself.
    """
    m = require_hermitian(np.asarray(mat, dtype=complex))
    es = eigh_desc(m)
    top = float(np.max(np.abs(es.eigenvalues))) if es.dim else 0.0
    mask = es.eigenvalues > SUPPORT_CUTOFF * max(top, 1e-300)
    return es.reconstruct(mask.astype(float)), es.reconstruct(es.eigenvalues * mask)


def trace_norm(mat):
    sv = np.linalg.svd(mat, compute_uv=False)
    return float(np.sum(sv))

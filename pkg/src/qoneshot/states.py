"""Density operators and pure states over labeled registers.

Matrices are stored in the tensor order of their layout. All reshuffling
(permutation, partial trace, operator embedding) is done with integer-subscript
einsum / transpose so register counts are not limited to 26 letters; dimension-1
registers are squeezed out before reshaping to stay clear of numpy's axis cap.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadParam,
    LabelCollision,
    NotNormalized,
    ShapeMismatch,
    UnknownLabel,
)
from .linalg import (
    TOL_PSD,
    TOL_TRACE,
    check_dim,
    eigh_desc,
    max_dim_limit,
    require_hermitian,
    require_psd,
)
from .registers import RegisterLayout

_DIAG_TOL = 1e-13


def _effective_axes(dims):
    """Indices of axes with dim > 1 (the ones worth reshaping over)."""
    return [i for i, d in enumerate(dims) if d > 1]


def _permute_matrix(mat, dims, perm):
    """Reorder the tensor factors of a (D x D) matrix by `perm`."""
    if perm == sorted(perm):
        return mat
    eff = _effective_axes(dims)
    if not eff:
        return mat
    # work only with the non-trivial axes
    eff_pos = {ax: k for k, ax in enumerate(eff)}
    eff_dims = [dims[i] for i in eff]
    eff_perm = [eff_pos[ax] for ax in perm if ax in eff_pos]
    n = len(eff_dims)
    t = mat.reshape(eff_dims + eff_dims)
    t = t.transpose(eff_perm + [p + n for p in eff_perm])
    d = int(np.prod(eff_dims))
    return np.ascontiguousarray(t.reshape(d, d))


def _partial_trace_matrix(mat, dims, keep_axes):
    """Trace out all axes not in keep_axes; result in keep_axes order."""
    n = len(dims)
    keep = list(keep_axes)
    eff = _effective_axes(dims)
    eff_pos = {ax: k for k, ax in enumerate(eff)}
    m = len(eff)
    t = mat.reshape([dims[i] for i in eff] * 2) if m else mat.reshape(1, 1)
    in_sub = list(range(2 * m))
    for ax in eff:
        if ax not in keep:
            k = eff_pos[ax]
            in_sub[m + k] = in_sub[k]
    out_sub = [eff_pos[ax] for ax in keep if ax in eff_pos]
    out_sub = out_sub + [m + s for s in out_sub]
    res = np.einsum(t, in_sub, out_sub)
    d_keep = int(np.prod([dims[i] for i in keep], dtype=object)) if keep else 1
    return res.reshape(d_keep, d_keep)


def embed_operator(op, op_layout, full_layout):
    """Lift an operator on a sub-layout to the full layout (identity elsewhere).

    The operator's registers are matched by label; dimensions must agree.
    """
    for lab, d in zip(op_layout.labels, op_layout.dims):
        if lab not in full_layout:
            raise UnknownLabel(f"label {lab!r} not in target layout")
        if full_layout.dim_of(lab) != d:
            raise ShapeMismatch(
                f"register {lab!r}: operator dim {d} vs layout dim {full_layout.dim_of(lab)}"
            )
    rest = [l for l in full_layout.labels if l not in op_layout.labels]
    d_rest = int(np.prod([full_layout.dim_of(l) for l in rest], dtype=object)) if rest else 1
    big = np.kron(np.asarray(op, dtype=complex), np.eye(d_rest, dtype=complex))
    # current order: op labels then rest; permute to full layout order
    cur = list(op_layout.labels) + rest
    cur_dims = [op_layout.dim_of(l) for l in op_layout.labels] + [
        full_layout.dim_of(l) for l in rest
    ]
    perm = [cur.index(l) for l in full_layout.labels]
    return _permute_matrix(big, cur_dims, perm)


@dataclass(frozen=True)
class DensityOperator:
    """Positive semidefinite operator with unit (or sub-unit) trace."""

    matrix: np.ndarray
    layout: RegisterLayout

    def __init__(self, matrix, layout, require_normalized=True, validate=True):
        mat = np.array(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ShapeMismatch(f"density matrix must be square, got {mat.shape}")
        if mat.shape[0] != layout.total_dim:
            raise ShapeMismatch(
                f"matrix dim {mat.shape[0]} vs layout dim {layout.total_dim}"
            )
        check_dim(mat.shape[0], what="density operator")
        if validate:
            mat = require_hermitian(mat, what="density matrix")
            require_psd(mat, tol=TOL_PSD, what="density matrix")
            tr = float(np.real(np.trace(mat)))
            if require_normalized and abs(tr - 1.0) > TOL_TRACE:
                raise NotNormalized(f"trace {tr!r} differs from 1", deviation=tr - 1.0)
            if not require_normalized and tr > 1.0 + TOL_TRACE:
                raise NotNormalized(f"trace {tr!r} exceeds 1", deviation=tr - 1.0)
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def eigensystem(self):
        return eigh_desc(self.matrix)

    def permuted(self, new_order):
        perm = [self.layout.index(l) for l in new_order]
        if sorted(new_order) != sorted(self.layout.labels):
            raise BadParam(f"{list(new_order)} is not a permutation of the layout")
        mat = _permute_matrix(self.matrix, list(self.layout.dims), perm)
        lay = RegisterLayout(tuple(new_order), tuple(self.layout.dim_of(l) for l in new_order))
        return DensityOperator(mat, lay, require_normalized=False, validate=False)

    def relabeled(self, mapping):
        return DensityOperator(
            self.matrix, self.layout.relabeled(mapping), require_normalized=False, validate=False
        )

    def marginal(self, keep_labels):
        """Partial trace keeping `keep_labels`, in the layout's original order."""
        sub = self.layout.restrict(keep_labels)
        keep_axes = [self.layout.index(l) for l in sub.labels]
        mat = _partial_trace_matrix(self.matrix, list(self.layout.dims), keep_axes)
        return DensityOperator(mat, sub, require_normalized=False, validate=False)

    def expectation(self, op):
        return float(np.real(np.trace(np.asarray(op) @ self.matrix)))

    def to_json(self):
        return {
            "layout": self.layout.to_json(),
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }


def density_from_json(data):
    if not isinstance(data, dict) or "layout" not in data or "matrix" not in data:
        raise BadParam("state JSON needs 'layout' and 'matrix'")
    layout = RegisterLayout.from_json(data["layout"])
    try:
        raw = np.asarray(
            [[complex(c[0], c[1]) for c in row] for row in data["matrix"]], dtype=complex
        )
    except (TypeError, IndexError) as exc:
        raise BadParam(f"matrix entries must be [re, im] pairs: {exc}") from exc
    return DensityOperator(raw, layout)


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    layout: RegisterLayout

    def __init__(self, amplitudes, layout, validate=True):
        vec = np.array(amplitudes, dtype=complex).reshape(-1)
        if vec.shape[0] != layout.total_dim:
            raise ShapeMismatch(f"vector dim {vec.shape[0]} vs layout dim {layout.total_dim}")
        # vectors cost what one dense operator row does, so they get the
        # squared budget; any operator formed from one is guarded on its own
        check_dim(vec.shape[0], limit=max_dim_limit() ** 2, what="state vector")
        if validate:
            nrm = float(np.linalg.norm(vec))
            if abs(nrm - 1.0) > TOL_TRACE:
                raise NotNormalized(f"norm {nrm!r} differs from 1", deviation=nrm - 1.0)
        vec.flags.writeable = False
        object.__setattr__(self, "amplitudes", vec)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    def density(self):
        mat = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityOperator(mat, self.layout, require_normalized=False, validate=False)

    def permuted(self, new_order):
        perm = [self.layout.index(l) for l in new_order]
        dims = list(self.layout.dims)
        eff = _effective_axes(dims)
        eff_pos = {ax: k for k, ax in enumerate(eff)}
        eff_perm = [eff_pos[ax] for ax in perm if ax in eff_pos]
        vec = self.amplitudes.reshape([dims[i] for i in eff] or [1])
        vec = vec.transpose(eff_perm) if eff else vec
        lay = RegisterLayout(tuple(new_order), tuple(self.layout.dim_of(l) for l in new_order))
        return PureState(np.ascontiguousarray(vec).reshape(-1), lay, validate=False)

    def relabeled(self, mapping):
        return PureState(self.amplitudes, self.layout.relabeled(mapping), validate=False)

    def marginal(self, keep_labels):
        """Reduced density operator on keep_labels (original order)."""
        sub = self.layout.restrict(keep_labels)
        rest = [l for l in self.layout.labels if l not in sub.labels]
        vec = self.permuted(list(sub.labels) + rest)
        m = vec.amplitudes.reshape(sub.total_dim, -1)
        return DensityOperator(m @ m.conj().T, sub, require_normalized=False, validate=False)

    def tensor(self, other):
        lay = self.layout.concat(other.layout)
        check_dim(lay.total_dim, limit=max_dim_limit() ** 2, what="state vector")
        return PureState(np.kron(self.amplitudes, other.amplitudes), lay, validate=False)

    def to_json(self):
        return {
            "layout": self.layout.to_json(),
            "amplitudes": [[float(z.real), float(z.imag)] for z in self.amplitudes],
        }


def pure_from_json(data):
    if not isinstance(data, dict) or "layout" not in data or "amplitudes" not in data:
        raise BadParam("pure-state JSON needs 'layout' and 'amplitudes'")
    layout = RegisterLayout.from_json(data["layout"])
    vec = np.asarray([complex(c[0], c[1]) for c in data["amplitudes"]], dtype=complex)
    return PureState(vec, layout)


def tensor(a, b):
    """Tensor product of density operators; labels must not collide."""
    lay = a.layout.concat(b.layout)
    lay.guard("density operator")
    mat = np.kron(a.matrix, b.matrix)
    return DensityOperator(mat, lay, require_normalized=False, validate=False)


def tensor_many(ops):
    out = None
    for op in ops:
        out = op if out is None else tensor(out, op)
    if out is None:
        raise BadParam("tensor_many needs at least one factor")
    return out


def partial_trace(rho, keep_labels):
    return rho.marginal(keep_labels)


def purify(rho, purifier_label="R"):
    """Minimal-rank purification; purifier register appended last."""
    if purifier_label in rho.layout:
        raise LabelCollision(f"purifier label {purifier_label!r} already in layout")
    tr = rho.trace
    if abs(tr - 1.0) > TOL_TRACE:
        raise NotNormalized(f"cannot purify sub-normalized state (trace {tr!r})", deviation=tr - 1.0)
    es = rho.eigensystem()
    mask = es.support_mask()
    lam = np.clip(es.eigenvalues[mask], 0.0, None)
    vecs = es.eigenvectors[:, mask]
    rank = int(lam.shape[0])
    d = rho.dim
    out = np.zeros(d * rank, dtype=complex)
    for k in range(rank):
        col = np.zeros(rank)
        col[k] = 1.0
        out += np.sqrt(lam[k]) * np.kron(vecs[:, k], col)
    out = out / np.linalg.norm(out)
    lay = rho.layout.concat(RegisterLayout((purifier_label,), (rank,)))
    return PureState(out, lay, validate=False)


def schmidt(psi, left_labels):
    """Schmidt decomposition across a bipartition of a pure state.

    Returns (coefficients descending, left vectors as columns, right vectors
    as columns) with the coefficients nonnegative.
    """
    left, right = psi.layout.split(left_labels)
    v = psi.permuted(list(left) + list(right))
    d_left = int(np.prod([psi.layout.dim_of(l) for l in left], dtype=object))
    m = v.amplitudes.reshape(d_left, -1)
    u, s, wh = np.linalg.svd(m, full_matrices=False)
    return s, u, wh.conj().T


def _is_diagonal(mat):
    if mat.shape[0] == 1:
        return True
    off = mat - np.diag(np.diag(mat))
    scale = max(1.0, float(np.max(np.abs(mat))))
    return float(np.max(np.abs(off))) <= _DIAG_TOL * scale


def fidelity(rho, sigma):
    """Uhlmann fidelity F = || sqrt(rho) sqrt(sigma) ||_1, clamped to [0, 1]."""
    a = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    b = sigma.matrix if isinstance(sigma, DensityOperator) else np.asarray(sigma)
    if a.shape != b.shape:
        raise ShapeMismatch(f"fidelity between shapes {a.shape} and {b.shape}")
    if _is_diagonal(a) and _is_diagonal(b):
        p = np.clip(np.real(np.diag(a)), 0.0, None)
        q = np.clip(np.real(np.diag(b)), 0.0, None)
        f = float(np.sum(np.sqrt(p * q)))
    else:
        # Nuclear norm of the support-restricted cross matrix
        # sqrt(lam_a) V_a^+ V_b sqrt(lam_b).  Directions outside either
        # support are excluded before any square root is taken, so exact
        # zero eigenvalues cannot inject sqrt(eigensolver noise) ~ 1e-8.
        ea, eb = eigh_desc(a), eigh_desc(b)
        ka = ea.support_mask(cutoff=1e-12) & (ea.eigenvalues > 0.0)
        kb = eb.support_mask(cutoff=1e-12) & (eb.eigenvalues > 0.0)
        if not (np.any(ka) and np.any(kb)):
            return 0.0
        cross = ea.eigenvectors[:, ka].conj().T @ eb.eigenvectors[:, kb]
        g = np.sqrt(ea.eigenvalues[ka])[:, None] * cross
        g = g * np.sqrt(eb.eigenvalues[kb])[None, :]
        f = float(np.sum(np.linalg.svd(g, compute_uv=False)))
    return min(f, 1.0)


def purified_distance(rho, sigma):
    f = fidelity(rho, sigma)
    return float(np.sqrt(max(0.0, 1.0 - f * f)))


def entropy(rho):
    """von Neumann entropy in bits."""
    lam = np.clip(np.linalg.eigvalsh(rho.matrix), 0.0, None)
    lam = lam[lam > 1e-300]
    return float(-np.sum(lam * np.log2(lam))) if lam.size else 0.0


def mutual_information(rho, left_labels):
    left, right = rho.layout.split(left_labels)
    sa = entropy(rho.marginal(left))
    sb = entropy(rho.marginal(right))
    return sa + sb - entropy(rho)


# ---------------------------------------------------------------------------
# common fixtures


def basis_ket(layout, indices):
    """Computational basis vector |i1 i2 ...> for the given layout."""
    idx = list(indices)
    if len(idx) != len(layout):
        raise ShapeMismatch(f"{len(idx)} indices for {len(layout)} registers")
    flat = 0
    for i, d in zip(idx, layout.dims):
        if not 0 <= i < d:
            raise BadParam(f"basis index {i} out of range for dim {d}")
        flat = flat * d + i
    vec = np.zeros(layout.total_dim, dtype=complex)
    vec[flat] = 1.0
    return PureState(vec, layout, validate=False)


def maximally_entangled(d, label_a="A", label_b="B"):
    lay = RegisterLayout((label_a, label_b), (d, d))
    vec = np.zeros(d * d, dtype=complex)
    for i in range(d):
        vec[i * d + i] = 1.0 / np.sqrt(d)
    return PureState(vec, lay, validate=False)


def maximally_mixed(d, label="A"):
    lay = RegisterLayout((label,), (d,))
    return DensityOperator(np.eye(d) / d, lay, validate=False)


def classical_state(probs, label="X"):
    p = np.asarray(probs, dtype=float)
    if np.any(p < -1e-12):
        raise BadParam("probabilities must be nonnegative")
    lay = RegisterLayout((label,), (p.shape[0],))
    return DensityOperator(np.diag(np.clip(p, 0.0, None)), lay)


def classical_joint(pmf, label_a="A", label_b="B"):
    """Diagonal bipartite state from a joint pmf matrix p[a, b]."""
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 2:
        raise ShapeMismatch("joint pmf must be a matrix")
    if np.any(p < -1e-12):
        raise BadParam("probabilities must be nonnegative")
    lay = RegisterLayout((label_a, label_b), p.shape)
    return DensityOperator(np.diag(np.clip(p.reshape(-1), 0.0, None)), lay)

"""Convex-split mixtures and the isometry that prepares them.

build_convex_split forms the n-fold mixture tau = (1/n) sum_j rho_{PQ_j} (x)
sigma^{(x) n-1} and reports its exact purified distance to rho_P (x)
sigma^{(x)n} next to the declared bound sqrt(2^k / n), k = d_max(rho || rho_P
(x) sigma). Three routes cover different regimes: a dense route that
materializes tau, a classical collapse for diagonal inputs (distance via
binomial sums, no matrix), and a collective-spin route for the maximally
entangled qubit pair against sigma = I/2 whose mixture operator is an su(2)
polynomial with known spectrum.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import BadParam, DimGuard, ShapeMismatch
from .linalg import max_dim_limit
from .registers import RegisterLayout
from .states import (
    DensityOperator,
    PureState,
    maximally_entangled,
    purified_distance,
    purify,
    tensor,
    tensor_many,
)
from .divergences import d_max, i_max


def convex_split_bound(k_bits, n):
    """The one-shot mixing bound sqrt(2^k / n)."""
    if n < 1:
        raise BadParam(f"copy count {n} must be >= 1")
    if math.isinf(k_bits):
        return float("inf")
    return math.sqrt((2.0**k_bits) / n)


@dataclass
class ConvexSplitState:
    n: int
    k_bits: float
    declared_bound: float
    exact_distance: float
    bound_applicable: bool
    route: str
    tau: DensityOperator | None = None
    reference: DensityOperator | None = None
    purification: PureState | None = None
    m: int | None = None
    details: dict = field(default_factory=dict)


def _copy_labels(labels, j):
    return {l: f"{l}{j}" for l in labels}


def _dense_tau(rho, sigma, p_labels, q_labels, n):
    """Materialize tau and the product reference on [P, Q_1 .. Q_n]."""
    canonical = list(p_labels)
    for j in range(1, n + 1):
        canonical.extend(f"{l}{j}" for l in q_labels)
    sigma_copies = {
        j: DensityOperator(
            sigma.matrix,
            sigma.layout.relabeled(_copy_labels(q_labels, j)),
            require_normalized=False,
            validate=False,
        )
        for j in range(1, n + 1)
    }
    acc = None
    for j in range(1, n + 1):
        parts = [rho.relabeled(_copy_labels(q_labels, j))]
        parts.extend(sigma_copies[i] for i in range(1, n + 1) if i != j)
        term = tensor_many(parts).permuted(canonical)
        acc = term.matrix if acc is None else acc + term.matrix
    tau = DensityOperator(acc / n, term.layout, require_normalized=False, validate=False)
    rho_p = rho.marginal(p_labels)
    ref = tensor_many([rho_p] + [sigma_copies[j] for j in range(1, n + 1)]).permuted(canonical)
    return tau, ref


def _dense_purification(rho, sigma, p_labels, q_labels, n, tau):
    """Explicit purification with a position register K, if it fits."""
    rank_r = rho.eigensystem().support_mask().sum()
    rank_s = sigma.eigensystem().support_mask().sum()
    vec_dim = n * int(rank_r) * rho.dim * (sigma.dim ** (n - 1)) * int(rank_s) ** n
    if vec_dim > max_dim_limit() ** 2:
        return None
    taken = set(tau.layout.labels)
    k_label = "K" if "K" not in taken else "Ksplit"
    c_label = "C" if "C" not in taken else "Csplit"
    psi_rho = purify(rho, purifier_label=c_label)
    psi_sigma = purify(sigma, purifier_label="D")
    d_rank = int(rank_s)
    canonical = [k_label] + list(tau.layout.labels) + [c_label] + [f"D{i}" for i in range(1, n + 1)]
    dims_map = {k_label: n, c_label: int(rank_r)}
    zero_pad = np.zeros(d_rank)
    zero_pad[0] = 1.0
    total = None
    for j in range(1, n + 1):
        parts = [psi_rho.relabeled(_copy_labels(q_labels, j))]
        parts.append(PureState(zero_pad, RegisterLayout.of((f"D{j}", d_rank)), validate=False))
        for i in range(1, n + 1):
            if i == j:
                continue
            mapping = dict(_copy_labels(q_labels, i))
            mapping["D"] = f"D{i}"
            parts.append(psi_sigma.relabeled(mapping))
        term = parts[0]
        for p in parts[1:]:
            term = term.tensor(p)
        basis_k = np.zeros(n)
        basis_k[j - 1] = 1.0
        term = PureState(basis_k, RegisterLayout.of((k_label, n)), validate=False).tensor(term)
        term = term.permuted(canonical)
        total = term.amplitudes if total is None else total + term.amplitudes
    vec = total / math.sqrt(n)
    return PureState(vec, term.layout)


def _group_ratios(values, probs):
    """Cluster likelihood-ratio values, merging within relative 1e-12."""
    order = np.argsort(values)
    grouped_v, grouped_p = [], []
    for idx in order:
        v, p = float(values[idx]), float(probs[idx])
        if grouped_v and abs(v - grouped_v[-1]) <= 1e-12 * max(abs(grouped_v[-1]), 1.0):
            grouped_p[-1] += p
        else:
            grouped_v.append(v)
            grouped_p.append(p)
    return grouped_v, grouped_p


def _mean_sqrt_binomial(l0, q0, l1, q1, n):
    """E sqrt((c l1 + (n-c) l0)/n), c ~ Binomial(n, q1), via log weights."""
    if q1 <= 0.0:
        return math.sqrt(l0)
    if q0 <= 0.0:
        return math.sqrt(l1)
    c = np.arange(n + 1, dtype=float)
    logw = (
        gammaln(n + 1.0)
        - gammaln(c + 1.0)
        - gammaln(n - c + 1.0)
        + c * math.log(q1)
        + (n - c) * math.log(q0)
    )
    mix = (c * l1 + (n - c) * l0) / n
    return float(np.sum(np.exp(logw) * np.sqrt(np.maximum(mix, 0.0))))


def _mean_sqrt_multinomial(vals, probs, n, term_cap=200000):
    """Exact composition sum for >2 ratio values; None when too large."""
    v = len(vals)
    if math.comb(n + v - 1, v - 1) > term_cap:
        return None
    total = 0.0
    counts = [0] * v

    def rec(pos, remaining, logw, acc):
        nonlocal total
        if pos == v - 1:
            c = remaining
            lw = logw - gammaln(c + 1.0)
            if probs[pos] <= 0.0:
                if c > 0:
                    return
            else:
                lw += c * math.log(probs[pos])
            mean = (acc + c * vals[pos]) / n
            total += math.exp(lw) * math.sqrt(max(mean, 0.0))
            return
        for c in range(remaining + 1):
            if probs[pos] <= 0.0 and c > 0:
                break
            lw = logw - gammaln(c + 1.0)
            if probs[pos] > 0.0:
                lw += c * math.log(probs[pos])
            rec(pos + 1, remaining - c, lw, acc + c * vals[pos])

    rec(0, n, gammaln(n + 1.0), 0.0)
    return total


def _classical_distance(p_joint, q_diag, n):
    """Purified distance of the diagonal mixture from p_P (x) q^n.

    Needs every row's likelihood profile to collapse to few distinct values;
    returns None when the composition count is unmanageable.
    """
    d_p, d_q = p_joint.shape
    rho_p = p_joint.sum(axis=1)
    fid = 0.0
    for a in range(d_p):
        if rho_p[a] <= 0.0:
            continue
        sup = q_diag > 0.0
        ratios = p_joint[a, sup] / (rho_p[a] * q_diag[sup])
        vals, probs = _group_ratios(ratios, q_diag[sup])
        if len(vals) == 1:
            e = math.sqrt(max(vals[0], 0.0))
        elif len(vals) == 2:
            e = _mean_sqrt_binomial(vals[0], probs[0], vals[1], probs[1], n)
        else:
            e = _mean_sqrt_multinomial(vals, probs, n)
            if e is None:
                return None
        fid += rho_p[a] * e
    fid = min(fid, 1.0)
    return math.sqrt(max(0.0, 1.0 - fid * fid))


def _spin_multiplicity(n, k):
    """Number of spin-(n/2 - k) irreps in n qubits."""
    m = math.comb(n, k)
    if k >= 1:
        m -= math.comb(n, k - 1)
    return m


def _maxent_qubit_distance(n):
    """Collective-spin spectrum route for rho = Phi_2, sigma = I/2.

    The mixture operator is unitarily a polynomial in the total spin, so its
    eigenvalues come in closed form per spin sector and the fidelity against
    I/2^{n+1} is an exact finite sum.
    """
    norm = n * (2.0 ** (n - 1))
    total_dim = 0
    trace = 0.0
    fid = 0.0
    for k in range(n // 2 + 1):
        s = n / 2.0 - k
        m_s = _spin_multiplicity(n, k)
        pairs = (
            ((n - 2.0 * s) / 4.0, m_s * int(round(2.0 * s + 2.0))),
            ((n + 2.0 * s + 2.0) / 4.0, m_s * int(round(2.0 * s))),
        )
        for ev, mult in pairs:
            if mult == 0:
                continue
            total_dim += mult
            trace += ev * mult
            fid += mult * math.sqrt(max(ev, 0.0) / norm)
    if total_dim != 2 ** (n + 1) or abs(trace - norm) > 1e-6 * norm:
        raise AssertionError("collective-spin bookkeeping failed")
    fid *= 2.0 ** (-(n + 1) / 2.0)
    fid = min(fid, 1.0)
    return math.sqrt(max(0.0, 1.0 - fid * fid))


def _is_diagonal(mat):
    off = mat - np.diag(np.diag(mat))
    scale = max(float(np.max(np.abs(mat))), 1e-300)
    return float(np.max(np.abs(off))) <= 1e-13 * scale


def build_convex_split(rho, sigma, left_labels, n, want_purification=True):
    """Mix n placements of rho against decoys sigma on the Q side.

    rho lives on P+Q registers (left_labels select P); sigma lives on the Q
    sub-layout. Returns the mixture (when it fits in the dimension guard), the
    exact purified distance to rho_P (x) sigma^n, and the declared bound.
    """
    if n < 1:
        raise BadParam(f"copy count {n} must be >= 1")
    p_labels, q_labels = rho.layout.split(left_labels)
    q_layout = rho.layout.restrict(q_labels)
    if tuple(sigma.layout.dims) != tuple(q_layout.dims):
        raise ShapeMismatch(
            f"decoy dims {sigma.layout.dims} do not match Q-side dims {q_layout.dims}"
        )
    sigma_q = DensityOperator(sigma.matrix, q_layout, require_normalized=False, validate=False)
    rho_p = rho.marginal(p_labels)
    ref_single = tensor(rho_p, sigma_q).permuted(rho.layout.labels)
    k_bits = d_max(rho, ref_single)
    bound = convex_split_bound(k_bits, n)

    d_p = rho_p.dim
    d_q = sigma.dim
    full_dim = d_p * (d_q**n)

    if full_dim <= max_dim_limit():
        tau, ref = _dense_tau(rho, sigma_q, p_labels, q_labels, n)
        dist = purified_distance(tau, ref)
        pur = _dense_purification(rho, sigma_q, p_labels, q_labels, n, tau) if want_purification else None
        return ConvexSplitState(
            n=n,
            k_bits=k_bits,
            declared_bound=bound,
            exact_distance=dist,
            bound_applicable=True,
            route="dense",
            tau=tau,
            reference=ref,
            purification=pur,
            details={"dim": full_dim},
        )

    if _is_diagonal(rho.matrix) and _is_diagonal(sigma.matrix):
        p_joint = np.real(np.diag(rho.permuted(list(p_labels) + list(q_labels)).matrix))
        p_joint = p_joint.reshape(d_p, d_q)
        q_diag = np.real(np.diag(sigma.matrix)).copy()
        dist = _classical_distance(p_joint, q_diag, n)
        if dist is not None:
            return ConvexSplitState(
                n=n,
                k_bits=k_bits,
                declared_bound=bound,
                exact_distance=dist,
                bound_applicable=True,
                route="classical",
                details={"dim": full_dim},
            )

    phi = maximally_entangled(2).density().matrix
    if (
        d_p == 2
        and d_q == 2
        and float(np.max(np.abs(rho.permuted(list(p_labels) + list(q_labels)).matrix - phi))) <= 1e-12
        and float(np.max(np.abs(sigma.matrix - np.eye(2) / 2.0))) <= 1e-12
    ):
        dist = _maxent_qubit_distance(n)
        return ConvexSplitState(
            n=n,
            k_bits=k_bits,
            declared_bound=bound,
            exact_distance=dist,
            bound_applicable=True,
            route="collective-spin",
            details={"dim": full_dim},
        )

    raise DimGuard(
        f"mixture dimension {full_dim} exceeds the guard and no structured route applies"
    )


def build_bipartite_convex_split(rho, left_labels, n, m, eps=0.0, delta=0.0, k_bits=None):
    """Grid mixture over n P-copies and m Q-copies against rho_P^n (x) rho_Q^m.

    With the default exact certificate (eps = delta = 0, k = the max-mutual
    divergence of rho) the bound sqrt(2^k / (n m)) applies unconditionally.
    A caller-provided smoothed certificate (k_bits, eps, delta) yields
    eps + 2 sqrt(delta) + sqrt(2^k / (n m)), valid only when n, m > 1/delta;
    outside that region the bound is reported but flagged inapplicable.
    """
    if n < 1 or m < 1:
        raise BadParam(f"copy counts ({n}, {m}) must be >= 1")
    if eps < 0.0 or delta < 0.0:
        raise BadParam("smoothing parameters must be nonnegative")
    p_labels, q_labels = rho.layout.split(left_labels)
    if k_bits is None:
        if eps != 0.0 or delta != 0.0:
            raise BadParam("smoothed certificate requires an explicit k_bits")
        k_bits = i_max(rho, left_labels)
    rho_p = rho.marginal(p_labels)
    rho_q = rho.marginal(q_labels)
    d_full = (rho_p.dim**n) * (rho_q.dim**m)
    if d_full > max_dim_limit():
        raise DimGuard(f"grid mixture dimension {d_full} exceeds the guard")

    canonical = []
    canon_pairs = []
    for i in range(1, n + 1):
        for l in p_labels:
            canonical.append(f"{l}{i}")
            canon_pairs.append((f"{l}{i}", rho.layout.dim_of(l)))
    for j in range(1, m + 1):
        for l in q_labels:
            canonical.append(f"{l}{j}'")
            canon_pairs.append((f"{l}{j}'", rho.layout.dim_of(l)))

    if _is_diagonal(rho.matrix):
        # Classical grid: everything commutes, so only the joint pmf matters.
        # Each term is the pmf with the correlated pair sitting on copy axes
        # (i, j) and marginals everywhere else; assembled on 1-D diagonals.
        route = "classical-grid"
        d_p, d_q = rho_p.dim, rho_q.dim
        joint = np.real(np.diag(rho.permuted(list(p_labels) + list(q_labels)).matrix))
        joint = joint.reshape(d_p, d_q)
        pa = np.real(np.diag(rho_p.matrix))
        pb = np.real(np.diag(rho_q.matrix))
        acc_diag = np.zeros((d_p,) * n + (d_q,) * m)
        for i in range(n):
            for j in range(m):
                term = joint
                for ii in range(n - 1):
                    term = np.multiply.outer(term, pa)
                for jj in range(m - 1):
                    term = np.multiply.outer(term, pb)
                # axes now [P_i, Q_j, other P copies ascending, other Q copies]
                src = [0, 1] + list(range(2, n + m))
                dst = [i, n + j]
                dst += [ii for ii in range(n) if ii != i]
                dst += [n + jj for jj in range(m) if jj != j]
                acc_diag += np.moveaxis(term, src, dst)
        ref_diag = np.ones(())
        for _ in range(n):
            ref_diag = np.multiply.outer(ref_diag, pa)
        for _ in range(m):
            ref_diag = np.multiply.outer(ref_diag, pb)
        layout = RegisterLayout.of(*canon_pairs)
        tau = DensityOperator(
            np.diag(acc_diag.ravel() / (n * m)).astype(complex),
            layout, require_normalized=False, validate=False,
        )
        ref = DensityOperator(
            np.diag(ref_diag.ravel()).astype(complex),
            layout, require_normalized=False, validate=False,
        )
    else:
        route = "dense-grid"
        p_copies = {
            i: rho_p.relabeled({l: f"{l}{i}" for l in p_labels}) for i in range(1, n + 1)
        }
        q_copies = {
            j: rho_q.relabeled({l: f"{l}{j}'" for l in q_labels}) for j in range(1, m + 1)
        }
        acc = None
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                mapping = {l: f"{l}{i}" for l in p_labels}
                mapping.update({l: f"{l}{j}'" for l in q_labels})
                parts = [rho.relabeled(mapping)]
                parts.extend(p_copies[ii] for ii in range(1, n + 1) if ii != i)
                parts.extend(q_copies[jj] for jj in range(1, m + 1) if jj != j)
                term = tensor_many(parts).permuted(canonical)
                acc = term.matrix if acc is None else acc + term.matrix
        tau = DensityOperator(acc / (n * m), term.layout, require_normalized=False, validate=False)
        ref = tensor_many([p_copies[i] for i in range(1, n + 1)] + [q_copies[j] for j in range(1, m + 1)])
        ref = ref.permuted(canonical)
    dist = purified_distance(tau, ref)
    geom = convex_split_bound(k_bits, n * m)
    bound = eps + 2.0 * math.sqrt(delta) + geom
    applicable = delta == 0.0 or (n > 1.0 / delta and m > 1.0 / delta)
    return ConvexSplitState(
        n=n,
        m=m,
        k_bits=k_bits,
        declared_bound=bound,
        exact_distance=dist,
        bound_applicable=applicable,
        route=route,
        tau=tau,
        reference=ref,
        details={"dim": d_full, "eps": eps, "delta": delta, "geometric_term": geom},
    )


# ---------------------------------------------------------------------------
# transferring purifications


@dataclass
class UhlmannIsometry:
    """Isometry between purifier registers realizing the optimal overlap.

    matrix maps the source purifier factor to the target purifier factor and
    satisfies V^dag V = I. achieved_overlap equals the fidelity of the shared
    marginals, which no isometry can exceed.
    """

    matrix: np.ndarray
    shared_labels: tuple
    source_purifier: RegisterLayout
    target_purifier: RegisterLayout
    achieved_overlap: float

    def apply(self, psi):
        """Act on the source-purifier registers of psi; others ride along."""
        sp = self.source_purifier.labels
        for l in sp:
            psi.layout.index(l)
        rest = [l for l in psi.layout.labels if l not in sp]
        perm = psi.permuted(list(sp) + rest)
        d_sp = self.source_purifier.total_dim
        mat = perm.amplitudes.reshape(d_sp, -1)
        out = self.matrix @ mat
        new_layout = self.target_purifier.concat(psi.layout.restrict(rest))
        return PureState(out.reshape(-1), new_layout)


def uhlmann_isometry(source, target, shared_labels):
    """Best isometry on purifiers aligning source with target on shared labels.

    Shared registers are taken in target-layout order; both states must carry
    them with equal dimensions and the target purifier must be at least as
    large as the source purifier.
    """
    shared = tuple(l for l in target.layout.labels if l in set(shared_labels))
    if len(shared) != len(set(shared_labels)):
        missing = set(shared_labels) - set(shared)
        raise ShapeMismatch(f"target lacks shared registers {sorted(missing)}")
    for l in shared:
        if source.layout.dim_of(l) != target.layout.dim_of(l):
            raise ShapeMismatch(
                f"shared register {l}: source dim {source.layout.dim_of(l)} "
                f"!= target dim {target.layout.dim_of(l)}"
            )
    tp = [l for l in target.layout.labels if l not in shared]
    sp = [l for l in source.layout.labels if l not in shared]
    tp_layout = target.layout.restrict(tp)
    sp_layout = source.layout.restrict(sp)
    d_sh = int(np.prod([target.layout.dim_of(l) for l in shared])) if shared else 1
    d_tp = tp_layout.total_dim
    d_sp = sp_layout.total_dim
    if d_tp < d_sp:
        raise ShapeMismatch(
            f"target purifier dim {d_tp} smaller than source purifier dim {d_sp}"
        )
    t_mat = target.permuted(list(shared) + tp).amplitudes.reshape(d_sh, d_tp)
    s_mat = source.permuted(list(shared) + sp).amplitudes.reshape(d_sh, d_sp)
    m = s_mat.T @ t_mat.conj()
    u, svals, wh = np.linalg.svd(m, full_matrices=False)
    v = wh.conj().T @ u.conj().T
    return UhlmannIsometry(
        matrix=v,
        shared_labels=shared,
        source_purifier=sp_layout,
        target_purifier=tp_layout,
        achieved_overlap=float(np.sum(svals)),
    )

"""One-shot divergences.

All values are in bits (logarithms base 2). The hypothesis-testing divergence
is computed twice on every call: a primal test operator built from a
threshold/knapsack rule, and a dual value from a one-dimensional concave
maximization. The reported gap certifies both routes against each other.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import BadParam, NoConverge, SupportViolation
from .linalg import (
    eigh_desc,
    fn_on_support,
    invsqrtm_support,
    support_projector,
)
from .states import DensityOperator, tensor

_DIAG_TOL = 1e-13
_BETA_FLOOR = 1e-300


def _mat(x):
    return x.matrix if isinstance(x, DensityOperator) else np.asarray(x, dtype=complex)


def support_leak(rho, sigma):
    """rho-mass outside the support of sigma."""
    r, s = _mat(rho), _mat(sigma)
    proj = support_projector(s)
    return float(np.real(np.trace(r) - np.trace(proj @ r)))


def _require_support(rho, sigma, what):
    leak = support_leak(rho, sigma)
    if leak > 1e-9:
        raise SupportViolation(
            f"{what}: rho has mass {leak:.3e} outside supp(sigma)", mass=leak
        )


# ---------------------------------------------------------------------------
# relative entropy and its variance


def relative_entropy(rho, sigma):
    _require_support(rho, sigma, "relative_entropy")
    r, s = _mat(rho), _mat(sigma)
    es_r = eigh_desc(r)
    lam = np.clip(es_r.eigenvalues, 0.0, None)
    lam_pos = lam[lam > 1e-300]
    term_r = float(np.sum(lam_pos * np.log2(lam_pos))) if lam_pos.size else 0.0
    es_s = eigh_desc(s)
    mask = es_s.support_mask()
    sv = es_s.eigenvalues[mask]
    vecs = es_s.eigenvectors[:, mask]
    weights = np.real(np.einsum("ai,ab,bi->i", vecs.conj(), r, vecs))
    term_s = float(np.sum(weights * np.log2(sv)))
    return term_r - term_s


def relative_entropy_variance(rho, sigma):
    _require_support(rho, sigma, "relative_entropy_variance")
    r, s = _mat(rho), _mat(sigma)
    d = relative_entropy(rho, sigma)
    lr = fn_on_support(r, np.log2)
    ls = fn_on_support(s, np.log2)
    x = lr - ls
    second = float(np.real(np.trace(r @ x @ x)))
    return max(0.0, second - d * d)


# ---------------------------------------------------------------------------
# max-relative entropy


def d_max(rho, sigma):
    """log2 of the smallest c with rho <= c sigma (on supp sigma)."""
    _require_support(rho, sigma, "d_max")
    r, s = _mat(rho), _mat(sigma)
    isq = invsqrtm_support(s)
    m = isq @ r @ isq
    lam_max = float(np.max(np.linalg.eigvalsh(0.5 * (m + m.conj().T))))
    if lam_max <= _BETA_FLOOR:
        return float("-inf")
    return float(np.log2(lam_max))


def i_max(rho, left_labels):
    """Max-information across a cut: d_max(rho_AB || rho_A (x) rho_B)."""
    left, right = rho.layout.split(left_labels)
    prod = tensor(rho.marginal(left), rho.marginal(right)).permuted(rho.layout.labels)
    return d_max(rho, prod)


# ---------------------------------------------------------------------------
# hypothesis-testing divergence


@dataclass
class HypothesisTestResult:
    """Optimal one-shot test with both primal and dual certificates.

    test: the operator Lambda with 0 <= Lambda <= I
    alpha: Tr(Lambda rho) (the achieved detection probability)
    beta: Tr(Lambda sigma) (primal objective)
    value_bits: -log2(beta), +inf when beta underflows
    dual_value_bits: -log2 of the best dual objective
    gap / gap_relative: |beta - beta_dual|, also relative to max(beta, dual)
    dual_t: location of the dual maximum (inf when only approached in limit)
    """

    test: np.ndarray
    alpha: float
    beta: float
    value_bits: float
    dual_value_bits: float
    gap: float
    gap_relative: float
    dual_t: float
    alpha_min: float
    route: str


def alpha_from_error(eps, convention="squared"):
    """Map a smoothing parameter to the test's minimum detection probability.

    convention="squared": the test may fail with probability eps^2 (the
    convention used when errors are measured in purified distance);
    convention="plain": failure probability eps.
    """
    if not 0.0 <= eps < 1.0:
        raise BadParam(f"epsilon {eps} outside [0, 1)")
    if convention == "squared":
        return 1.0 - eps * eps
    if convention == "plain":
        return 1.0 - eps
    raise BadParam(f"unknown convention {convention!r}")


def _value_bits(beta):
    if beta <= _BETA_FLOOR:
        return float("inf")
    return float(-np.log2(beta))


def _dual_probe(r, s, t, alpha, tr_r, tr_s):
    """g(t) = t*alpha - Tr[(t rho - sigma)_+], plus the strict-positive mass.

    Tr_+ is evaluated as Tr(M) + |sum of negative eigenvalues| so that large t
    does not cancel catastrophically (the negative eigenvalues stay O(||sigma||)).
    """
    m = t * r - s
    es = eigh_desc(m)
    lam = es.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 0.0)
    cut = 1e-14 * scale
    negsum = -float(np.sum(lam[lam < -cut]))
    g = t * alpha - (t * tr_r - tr_s) - negsum
    mask = lam > cut
    if np.any(mask):
        w = es.eigenvectors[:, mask]
        h = float(np.real(np.trace(w.conj().T @ r @ w)))
    else:
        h = 0.0
    return g, h


def _primal_knapsack(r, s, alpha, threshold_t):
    """Neyman-Pearson test from the threshold operator rho - sigma/t.

    Directions are the eigenvectors of rho - sigma/t in descending eigenvalue
    order; near-degenerate clusters (including the zero band) are refined in
    the eigenbasis of rho restricted to the cluster, and mass is assigned
    greedily with one fractional weight so that Tr(Lambda rho) = alpha exactly.
    """
    dim = r.shape[0]
    if threshold_t <= 0.0 or not math.isfinite(threshold_t):
        a_mat = r.copy()
    else:
        a_mat = r - s / threshold_t
    es = eigh_desc(a_mat)
    lam = es.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 0.0)
    band = 1e-10 * scale

    # group indices into clusters: the zero band is one cluster, and runs of
    # eigenvalues closer than 1e-12*scale merge as well
    clusters = []
    current = [0]
    for i in range(1, dim):
        same_zero = abs(lam[i]) <= band and abs(lam[current[0]]) <= band
        close = abs(lam[i] - lam[current[-1]]) <= 1e-12 * scale
        if same_zero or close:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)

    dirs = []  # (vector, rho_mass) in processing order
    for cl in clusters:
        v = es.eigenvectors[:, cl]
        if len(cl) == 1:
            dirs.append(v[:, 0])
            continue
        # refine the cluster by rho so the greedy fill is basis-independent
        block = v.conj().T @ r @ v
        sub = eigh_desc(block)
        w = v @ sub.eigenvectors
        for k in range(len(cl)):
            dirs.append(w[:, k])

    need = float(alpha)
    lam_out = np.zeros(len(dirs))
    for i, v in enumerate(dirs):
        if need <= 1e-15:
            break
        pm = float(np.real(np.einsum("a,ab,b->", v.conj(), r, v)))
        if pm <= 1e-18:
            continue
        take = min(1.0, need / pm)
        lam_out[i] = take
        need -= take * pm
    test = np.zeros((dim, dim), dtype=complex)
    for i, v in enumerate(dirs):
        if lam_out[i] > 0.0:
            test += lam_out[i] * np.outer(v, v.conj())
    return test


def _finish(result_test, r, s, alpha, dual_beta, dual_t, route):
    a_ach = float(np.real(np.trace(result_test @ r)))
    b_ach = float(np.real(np.trace(result_test @ s)))
    b_ach = max(b_ach, 0.0)
    dual_beta = max(dual_beta, 0.0)
    gap = abs(b_ach - dual_beta)
    gap_rel = gap / max(b_ach, dual_beta, 1e-300)
    if b_ach <= _BETA_FLOOR and dual_beta <= _BETA_FLOOR:
        gap = 0.0
        gap_rel = 0.0
    return HypothesisTestResult(
        test=result_test,
        alpha=a_ach,
        beta=b_ach,
        value_bits=_value_bits(b_ach),
        dual_value_bits=_value_bits(dual_beta),
        gap=gap,
        gap_relative=gap_rel,
        dual_t=dual_t,
        alpha_min=alpha,
        route=route,
    )


def _diagonal_dh(p, q, alpha, dim):
    """Exact likelihood-ratio test for commuting (diagonal) inputs."""
    order = sorted(
        range(dim),
        key=lambda i: (-(math.inf if q[i] <= 1e-18 else p[i] / q[i]), q[i]),
    )
    order = [i for i in order if p[i] > 1e-18]
    weights = np.zeros(dim)
    need = float(alpha)
    boundary = None
    for i in order:
        if need <= 0.0:
            break
        take = min(1.0, need / p[i])
        weights[i] = take
        need -= take * p[i]
        boundary = i
    beta = float(np.sum(weights * q))
    if boundary is not None and p[boundary] > 0.0 and q[boundary] > 1e-18:
        t_star = q[boundary] / p[boundary]
    elif beta <= _BETA_FLOOR:
        t_star = 0.0
    else:
        t_star = 1.0
    # dual objective at the closed-form threshold
    if t_star > 0.0:
        g = t_star * alpha - float(np.sum(np.clip(t_star * p - q, 0.0, None)))
    else:
        g = 0.0
    test = np.diag(weights).astype(complex)
    return test, g, t_star


def hypothesis_testing_divergence(rho, sigma, alpha_min):
    """D_H at minimum detection probability alpha_min in (0, 1].

    beta* = min Tr(Lambda sigma) over 0 <= Lambda <= I with Tr(Lambda rho) >=
    alpha_min; the value is -log2(beta*). Orthogonal supports give +inf.
    """
    if not 0.0 < alpha_min <= 1.0:
        raise BadParam(f"alpha_min {alpha_min} outside (0, 1]")
    r, s = _mat(rho), _mat(sigma)
    if r.shape != s.shape:
        raise BadParam(f"shape mismatch {r.shape} vs {s.shape}")
    dim = r.shape[0]
    tr_r = float(np.real(np.trace(r)))
    tr_s = float(np.real(np.trace(s)))

    # commuting fast path: both diagonal
    def _diag_ok(m):
        off = m - np.diag(np.diag(m))
        return float(np.max(np.abs(off))) <= _DIAG_TOL * max(1.0, float(np.max(np.abs(m))))

    if _diag_ok(r) and _diag_ok(s):
        p = np.clip(np.real(np.diag(r)), 0.0, None)
        q = np.clip(np.real(np.diag(s)), 0.0, None)
        test, g, t_star = _diagonal_dh(p, q, alpha_min, dim)
        return _finish(test, r, s, alpha_min, g, t_star, "diagonal")

    evals = [(0.0, 0.0)]

    def probe(t):
        g, h = _dual_probe(r, s, t, alpha_min, tr_r, tr_s)
        evals.append((t, g))
        return g, h

    if alpha_min >= 1.0 - 1e-12:
        # Tr(Lambda rho) = 1 forces Lambda to act as identity on supp(rho);
        # the cheapest completion is the bare support projector. The dual sup
        # may be approached only as t -> inf, so evaluate on a geometric
        # ladder and report the gap honestly.
        test = support_projector(r)
        for j in range(0, 41, 2):
            probe(float(2.0**j))
        dual_t, dual_beta = max(evals, key=lambda tg: tg[1])
        leak = support_leak(r, s)
        if leak > 1e-9:
            dual_t = float("inf")
        return _finish(test, r, s, 1.0, dual_beta, dual_t, "dense")

    # bracket the dual kink: h is nondecreasing, h(0) = 0 < alpha
    g1, h1 = probe(1.0)
    if h1 >= alpha_min:
        lo, hi = 0.0, 1.0
    else:
        lo, t = 1.0, 1.0
        hi = None
        for _ in range(120):
            t *= 4.0
            g, h = probe(t)
            if h >= alpha_min:
                hi = t
                break
            lo = t
        if hi is None:
            raise NoConverge(
                f"dual bracket not found below t={t:.3e} (alpha={alpha_min})",
                bracket=(lo, t),
                iterations=120,
            )

    # coarse golden-section on the concave dual, then bisection on the kink
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    gc, _ = probe(c)
    gd, _ = probe(d)
    for _ in range(30):
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - inv_phi * (b - a)
            gc, _ = probe(c)
        else:
            a, c, gc = c, d, gd
            d = a + inv_phi * (b - a)
            gd, _ = probe(d)

    blo, bhi = lo, hi
    for _ in range(200):
        if bhi - blo <= 1e-13 * max(1.0, bhi):
            break
        mid = 0.5 * (blo + bhi)
        g, h = probe(mid)
        if h >= alpha_min:
            bhi = mid
        else:
            blo = mid
    t_kink = bhi
    probe(t_kink)

    dual_t, dual_beta = max(evals, key=lambda tg: tg[1])
    test = _primal_knapsack(r, s, alpha_min, t_kink)
    return _finish(test, r, s, alpha_min, dual_beta, dual_t, "dense")


def hypothesis_testing_from_error(rho, sigma, eps, convention="squared"):
    return hypothesis_testing_divergence(rho, sigma, alpha_from_error(eps, convention))


# ---------------------------------------------------------------------------
# information-spectrum divergences


@dataclass
class InfoSpectrumResult:
    value_bits: float
    monotone: bool
    route: str
    variant: str


def _joint_classical(r, s):
    """Joint eigenbasis probabilities (p, q) when [rho, sigma] ~ 0, else None."""
    scale = max(1.0, float(np.max(np.abs(r))), float(np.max(np.abs(s))))
    comm = r @ s - s @ r
    if float(np.max(np.abs(comm))) > 1e-12 * scale * scale:
        return None
    es = eigh_desc(s)
    lam = es.eigenvalues
    basis = es.eigenvectors.copy()
    # within degenerate sigma clusters, rotate to diagonalize rho's block
    i = 0
    dim = lam.shape[0]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(lam))) if dim else 0.0)
    while i < dim:
        j = i + 1
        while j < dim and abs(lam[j] - lam[i]) <= tol:
            j += 1
        if j - i > 1:
            v = basis[:, i:j]
            block = v.conj().T @ r @ v
            sub = eigh_desc(block)
            basis[:, i:j] = v @ sub.eigenvectors
        i = j
    rr = basis.conj().T @ r @ basis
    if float(np.max(np.abs(rr - np.diag(np.diag(rr))))) > 1e-10 * scale:
        return None
    p = np.clip(np.real(np.diag(rr)), 0.0, None)
    q = np.clip(lam, 0.0, None)
    return p, q


def _classical_info_spectrum(p, q, eps, variant):
    entries = [(p[i], q[i]) for i in range(len(p)) if p[i] > 1e-18]
    target = 1.0 - eps
    if variant == "standard":
        # mass(R) = sum of p_i with p_i >= 2^R q_i; sup R with mass >= 1-eps
        inf_items = sum(pi for pi, qi in entries if qi <= 1e-300)
        finite = sorted(
            ((math.log2(pi / qi), pi) for pi, qi in entries if qi > 1e-300),
            key=lambda x: -x[0],
        )
        if inf_items >= target - 1e-15:
            return float("inf")
        cum = inf_items
        for ratio, pi in finite:
            cum += pi
            if cum >= target - 1e-15:
                return ratio
        return float("-inf")
    # alternate: mass_(R) = sum of p_i with p_i < 2^R q_i; inf R with mass >= 1-eps
    finite = sorted(
        ((math.log2(pi / qi), pi) for pi, qi in entries if qi > 1e-300),
        key=lambda x: x[0],
    )
    cum = 0.0
    for ratio, pi in finite:
        cum += pi
        if cum >= target - 1e-15:
            return ratio
    return float("inf")


def _grid_info_spectrum(r, s, eps, variant):
    dim = r.shape[0]
    target = 1.0 - eps

    def mass(big_r):
        m = r - (2.0**big_r) * s
        es = eigh_desc(m)
        lam = es.eigenvalues
        scale = max(1.0, float(np.max(np.abs(lam))))
        if variant == "standard":
            mask = lam >= -1e-12 * scale
        else:
            mask = lam < -1e-12 * scale
        if not np.any(mask):
            return 0.0
        v = es.eigenvectors[:, mask]
        return float(np.real(np.trace(v.conj().T @ r @ v)))

    leak = support_leak(r, s)
    try:
        top = d_max(r, s)
    except SupportViolation:
        isq = invsqrtm_support(s)
        m = isq @ r @ isq
        top = float(np.log2(max(float(np.max(np.linalg.eigvalsh(m))), 1e-30)))
    lo = -math.log2(dim) - 40.0
    hi = top + 1.0
    step = 1e-3
    grid = np.arange(lo, hi + step, step)
    vals = np.array([mass(x) for x in grid])
    diffs = np.diff(vals)
    if variant == "standard":
        monotone = bool(np.all(diffs <= 1e-9))
        hits = np.nonzero(vals >= target - 1e-12)[0]
        if hits.size == 0:
            return float("-inf"), monotone
        k = hits[-1]
        if leak >= target - 1e-12:
            return float("inf"), monotone
        lo_r, hi_r = grid[k], grid[min(k + 1, len(grid) - 1)]
        for _ in range(60):
            mid = 0.5 * (lo_r + hi_r)
            if mass(mid) >= target - 1e-12:
                lo_r = mid
            else:
                hi_r = mid
        return lo_r, monotone
    monotone = bool(np.all(diffs >= -1e-9))
    hits = np.nonzero(vals >= target - 1e-12)[0]
    if hits.size == 0:
        return float("inf"), monotone
    k = hits[0]
    lo_r, hi_r = grid[max(k - 1, 0)], grid[k]
    for _ in range(60):
        mid = 0.5 * (lo_r + hi_r)
        if mass(mid) >= target - 1e-12:
            hi_r = mid
        else:
            lo_r = mid
    return hi_r, monotone


def info_spectrum_detailed(rho, sigma, eps, variant="standard"):
    if variant not in ("standard", "alternate"):
        raise BadParam(f"variant {variant!r} must be 'standard' or 'alternate'")
    if not 0.0 < eps < 1.0:
        raise BadParam(f"epsilon {eps} outside (0, 1)")
    r, s = _mat(rho), _mat(sigma)
    _require_support(r, s, "info_spectrum")
    joint = _joint_classical(r, s)
    if joint is not None:
        p, q = joint
        val = _classical_info_spectrum(p, q, eps, variant)
        return InfoSpectrumResult(val, True, "classical", variant)
    val, mono = _grid_info_spectrum(r, s, eps, variant)
    return InfoSpectrumResult(float(val), mono, "grid", variant)


def info_spectrum(rho, sigma, eps, variant="standard"):
    return info_spectrum_detailed(rho, sigma, eps, variant).value_bits


# ---------------------------------------------------------------------------
# second-order expansion


def inverse_gaussian_cdf(eps):
    if not 0.0 < eps < 1.0:
        raise BadParam(f"epsilon {eps} outside (0, 1)")
    return float(ndtri(eps))


def second_order_estimate(rho, sigma, n, eps):
    """n D + sqrt(n V) * PhiInv(eps), the two-term block-length expansion."""
    if n < 1:
        raise BadParam(f"block length {n} must be >= 1")
    d = relative_entropy(rho, sigma)
    v = relative_entropy_variance(rho, sigma)
    return n * d + math.sqrt(n * v) * inverse_gaussian_cdf(eps)

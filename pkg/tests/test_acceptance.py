"""End-to-end acceptance checks: oracle agreement, closed forms, and the
protocol-level error bounds, each at its stated tolerance."""

import math
import time
from collections import Counter

import numpy as np
import pytest
from scipy.special import ndtr

import qoneshot as q
from oracles import (
    diag_state,
    lp_hypothesis_beta,
    rand_bipartite,
    rand_contraction,
    rand_density,
    rand_diag_pair,
    rand_kraus,
)


def _maxent(d, la, lb):
    v = np.zeros(d * d)
    for i in range(d):
        v[i * d + i] = 1.0 / math.sqrt(d)
    return q.PureState(v, q.RegisterLayout((la, lb), (d, d)))


def _corr(d, la="P", lb="Q"):
    mat = np.zeros((d * d, d * d))
    for i in range(d):
        mat[i * d + i, i * d + i] = 1.0 / d
    return q.DensityOperator(mat, q.RegisterLayout((la, lb), (d, d)))


# ---------------------------------------------------------------------------
# 1. optimal-test correctness against the dual certificate and the LP oracle


def test_hypothesis_test_duality_gap_and_lp_agreement():
    t0 = time.monotonic()
    rng = np.random.default_rng(20250825)
    for _ in range(200):
        d = int(rng.integers(2, 7))
        rho = rand_density(rng, d)
        sig = rand_density(rng, d)
        a = float(rng.uniform(0.05, 0.999))
        r = q.hypothesis_testing_divergence(rho, sig, a)
        assert r.gap_relative <= 1e-7

    rng = np.random.default_rng(7)
    for d in range(2, 9):
        for _ in range(8):
            p, pq = rand_diag_pair(rng, d)
            for a in (0.2, 0.5, 0.9):
                lp_bits = -math.log2(lp_hypothesis_beta(p, pq, a))
                r = q.hypothesis_testing_divergence(diag_state(p), diag_state(pq), a)
                assert abs(r.value_bits - lp_bits) < 1e-9
    assert time.monotonic() - t0 < 30.0


# ---------------------------------------------------------------------------
# 2. closed forms


def test_closed_form_divergences():
    rho = rand_density(np.random.default_rng(3), 3)
    for eps in (0.1, 0.3, 0.6, 0.9):
        r = q.hypothesis_testing_divergence(rho, rho, 1.0 - eps * eps)
        assert abs(r.value_bits - math.log2(1.0 / (1.0 - eps * eps))) < 1e-9

    bell = q.maximally_entangled(2).density()
    mixed = q.DensityOperator(np.eye(4) / 4.0, bell.layout)
    assert abs(q.d_max(bell, mixed) - 2.0) < 1e-9

    # the superdense-coding family: 2 log d bits against the full mixture
    for d in (2, 3, 4):
        phi = q.maximally_entangled(d).density()
        mm = q.DensityOperator(np.eye(d * d) / (d * d), phi.layout)
        r = q.hypothesis_testing_divergence(phi, mm, 1.0)
        assert abs(r.value_bits - 2.0 * math.log2(d)) < 1e-8


# ---------------------------------------------------------------------------
# 3. convex-split mixing distance


def test_convex_split_bell_and_classical(monkeypatch):
    t0 = time.monotonic()
    bell = _maxent(2, "P", "Q").density()
    half = q.DensityOperator(np.eye(2) / 2.0, q.RegisterLayout(("Q",), (2,)))

    # enough decoys pull the mixture under the target distance
    for delta, want in ((0.4, 0.174794328526), (0.6, 0.257078292696)):
        n = math.ceil(2.0**2 / delta**2)
        cs = q.build_convex_split(bell, half, ["P"], n, want_purification=False)
        assert abs(cs.k_bits - 2.0) < 1e-12
        assert cs.exact_distance <= delta
        assert cs.exact_distance <= cs.declared_bound + 1e-12
        assert abs(cs.exact_distance - want) < 1e-9

    # exact dense evaluation up to dimension 2^11 agrees with the
    # closed-form route used beyond it
    dense = [
        q.build_convex_split(bell, half, ["P"], n, want_purification=False)
        for n in (4, 6, 8, 10)
    ]
    monkeypatch.setenv("QONESHOT_MAX_DIM", "16")
    for got in dense:
        assert got.route == "dense"
        assert got.details["dim"] <= 2**11
        thin = q.build_convex_split(bell, half, ["P"], got.n, want_purification=False)
        assert thin.route == "collective-spin"
        assert abs(got.exact_distance - thin.exact_distance) < 1e-9
    monkeypatch.delenv("QONESHOT_MAX_DIM")

    # classical fast path at large copy counts
    for d, n, want in ((2, 2**14, 0.003906353), (8, 4096, 0.020677835)):
        rho = _corr(d)
        sig = q.DensityOperator(np.eye(d) / d, q.RegisterLayout(("Q",), (d,)))
        cs = q.build_convex_split(rho, sig, ["P"], n, want_purification=False)
        assert cs.route == "classical"
        assert abs(cs.k_bits - math.log2(d)) < 1e-12
        assert cs.k_bits <= 3.0
        assert cs.exact_distance <= cs.declared_bound + 1e-8
        assert abs(cs.exact_distance - want) < 1e-9
    assert time.monotonic() - t0 < 120.0


# ---------------------------------------------------------------------------
# 4. bipartite grid mixing with exact certificates


def test_bipartite_convex_split_grid():
    rho = _corr(2)
    want = {
        (2, 2): 0.375612775415,
        (2, 4): 0.230063452992,
        (2, 8): 0.136660435317,
        (4, 2): 0.230063452992,
        (4, 4): 0.146762925190,
        (4, 8): 0.093227127713,
        (8, 2): 0.136660435317,
        (8, 4): 0.093227127713,
    }
    for n in (2, 4, 8):
        for m in (2, 4, 8):
            if (n, m) == (8, 8):
                with pytest.raises(q.DimGuard):
                    q.build_bipartite_convex_split(rho, ["P"], n, m)
                continue
            g = q.build_bipartite_convex_split(rho, ["P"], n, m)
            assert abs(g.k_bits - 1.0) < 1e-12  # exact i_max certificate
            assert g.bound_applicable
            assert g.exact_distance <= math.sqrt(2.0**g.k_bits / (n * m)) + 1e-8
            assert abs(g.exact_distance - want[(n, m)]) < 1e-9
            # symmetric grids mix equally well either way round
            assert abs(g.exact_distance - want[(m, n)]) < 1e-9


# ---------------------------------------------------------------------------
# 5. one-shot transmission, noiseless and fully noisy ends


def test_transmission_end_to_end():
    ident4 = q.identity_channel(4, in_label="A", out_label="B")
    rep = q.simulate_p2p(q.P2PConfig(ident4, _maxent(4, "A", "R"), rate_bits=1,
                                     epsilon=0.0))
    assert abs(rep.theory_bound - 4.0 * 2.0 ** (1.0 - 4.0)) < 1e-12
    assert rep.max_error <= rep.theory_bound
    assert rep.max_error < 0.1  # far below, not grazing
    assert abs(rep.max_error - 0.015877081724) < 1e-9

    # a fully depolarizing channel leaves blind guessing among 2^R messages
    dep2 = q.depolarizing(2, 1.0, in_label="A", out_label="B")
    r2 = q.simulate_p2p(q.P2PConfig(dep2, _maxent(2, "A", "R"), rate_bits=1,
                                    epsilon=0.0))
    for e in r2.per_message_error:
        assert abs(e - 0.5) < 1e-9
    dep4 = q.depolarizing(4, 1.0, in_label="A", out_label="B")
    r4 = q.simulate_p2p(q.P2PConfig(dep4, _maxent(4, "A", "R"), rate_bits=2,
                                    epsilon=0.0))
    for e in r4.per_message_error:
        assert abs(e - 0.75) < 1e-9


# ---------------------------------------------------------------------------
# 6. subset coding at desk scale


def test_subset_coding_monte_carlo():
    frozen = {
        (4, 4, 7): (0.134003074, 0.009298790, 5, 16),
        (2, 6, 11): (0.154455864, 0.007774863, 7, 36),
    }
    for (d, w, seed), (mean, se, prime, pairs) in frozen.items():
        ch = q.identity_channel(d, in_label="A", out_label="B")
        cfg = q.SubsetCodeConfig(ch, _maxent(d, "A", "R"), n=1, w=w, rate_bits=1.0,
                                 epsilon=0.1, samples=500, seed=seed)
        rep = q.simulate_iid_subset(cfg)
        assert abs(rep.mean_error - mean) < 1e-7
        assert abs(rep.stderr - se) < 1e-7
        assert rep.details["prime"] == prime
        assert rep.details["distinct_codes_seen"] == pairs
        # the union bound is loose at n = 1; it only binds when informative
        if rep.theory_bound < 1.0:
            assert rep.mean_error <= rep.theory_bound + 3.0 * rep.stderr
        assert rep.bound_applicable == (rep.theory_bound < 1.0
                                        and cfg.epsilon < 1.0 / 7.0)

    # the position family is exactly pairwise uniform, checked exhaustively
    for n_codes in (4, 6):
        fam = q.PairwiseIndependentFamily(n_codes, 2)
        counts = Counter(tuple(fam.positions(s)) for s in fam.admissible_seeds())
        assert len(counts) == n_codes * n_codes
        assert all(v == 1 for v in counts.values())


# ---------------------------------------------------------------------------
# 7. jammed transmission reduces to plain transmission, and meets its bound


def _xor_channel():
    lay_in = q.RegisterLayout(("A", "S"), (2, 2))
    kraus = []
    for a in range(2):
        for s in range(2):
            k = np.zeros((2, 4))
            k[a ^ s, a * 2 + s] = 1.0
            kraus.append(k)
    return q.KrausChannel(kraus, lay_in, q.RegisterLayout.of(("B", 2)))


def test_jammer_reduction_and_bound():
    bell = _maxent(2, "A", "R")
    triv = q.identity_channel(1, in_label="S", out_label="T")
    ch = q.identity_channel(2, in_label="A", out_label="B").tensor(triv)
    pad = q.PureState(np.ones(1), q.RegisterLayout.of(("S", 1)))
    phi = q.PureState(np.ones(1), q.RegisterLayout(("S", "S2"), (1, 1)))
    gp = q.simulate_gelfand_pinsker(q.GPConfig(ch, bell.tensor(pad), phi, rate_bits=1,
                                               band_bits=0, epsilon=0.0, delta=0.3))
    p2p = q.simulate_p2p(q.P2PConfig(q.identity_channel(2, in_label="A", out_label="B"),
                                     bell, rate_bits=1, epsilon=0.0))
    assert gp.messages == p2p.messages
    for a, b in zip(gp.per_message_error, p2p.per_message_error):
        assert abs(a - b) < 1e-9
    assert abs(gp.max_error - p2p.max_error) < 1e-9
    assert abs(gp.details["dh_bits"] - p2p.details["dh_bits"]) < 1e-9

    # classical jammer, fully pre-corrected by the encoder
    lay = q.RegisterLayout(("A", "R", "S"), (2, 2, 2))
    mat = np.zeros((8, 8))
    for a in range(2):
        for s in range(2):
            idx = ((a ^ s) * 2 + a) * 2 + s
            mat[idx, idx] = 0.25
    rho = q.DensityOperator(mat, lay)
    v = np.zeros(4)
    v[0] = v[3] = 2**-0.5
    phi2 = q.PureState(v, q.RegisterLayout(("S", "S2"), (2, 2)))
    rep = q.simulate_gelfand_pinsker(q.GPConfig(_xor_channel(), rho, phi2, rate_bits=1,
                                                band_bits=0, epsilon=0.05, delta=0.1))
    assert abs(rep.theory_bound - (6.0 * 0.05 + 4.0 * 0.1) ** 2) < 1e-12
    assert rep.bound_applicable
    assert rep.max_error < rep.theory_bound


# ---------------------------------------------------------------------------
# 8. broadcast: independent halves factorize, correlated halves meet the bound


def _broadcast_channel():
    return q.identity_channel(4, in_label="F1", out_label="B").tensor(
        q.identity_channel(4, in_label="F2", out_label="C"))


def test_broadcast_factorization_and_bound():
    psi = _maxent(4, "F1", "A1").tensor(_maxent(4, "F2", "A2"))
    rep = q.simulate_broadcast(q.BroadcastConfig(
        _broadcast_channel(), psi, b_labels=("B",), c_labels=("C",),
        a1_label="A1", a2_label="A2", rate1_bits=1, rate2_bits=1,
        band1_bits=0, band2_bits=0, epsilon=0.1, delta=1.0))
    p2p = q.simulate_p2p(q.P2PConfig(q.identity_channel(4, in_label="A", out_label="B"),
                                     _maxent(4, "A", "R"), rate_bits=1, epsilon=0.1))
    e1 = rep.details["receiver1_error"]
    e2 = rep.details["receiver2_error"]
    for a, b, ej in zip(e1, e2, rep.per_message_error):
        assert abs(a - p2p.per_message_error[0]) < 1e-9
        assert abs(b - p2p.per_message_error[0]) < 1e-9
        assert abs(ej - (1.0 - (1.0 - a) * (1.0 - b))) < 1e-12

    # correlated resource over a d=4 pair of halves
    vec = np.zeros((4, 4, 4, 4))
    for z in range(2):
        for i in range(2):
            for j in range(2):
                vec[2 * z + i, 2 * z + j, 2 * z + i, 2 * z + j] = 2**-1.5
    psi2 = q.PureState(vec.reshape(-1), q.RegisterLayout(("F1", "F2", "A1", "A2"),
                                                         (4, 4, 4, 4)))
    rep2 = q.simulate_broadcast(q.BroadcastConfig(
        _broadcast_channel(), psi2, b_labels=("B",), c_labels=("C",),
        a1_label="A1", a2_label="A2", rate1_bits=1, rate2_bits=0,
        band1_bits=0, band2_bits=1, epsilon=0.05, delta=1.0))
    for ej in rep2.per_message_error:
        assert abs(ej - 0.275120237) < 1e-9
    assert abs(rep2.theory_bound - (4.0 * 0.05 + 9.0 * math.sqrt(1.0)) ** 2) < 1e-9
    if rep2.theory_bound < 1.0:
        assert rep2.max_error <= rep2.theory_bound
    assert abs(rep2.details["k_bits"] - 1.0) < 1e-9


# ---------------------------------------------------------------------------
# 9. operator inequalities behind the decoders, on random instances


def test_operator_fact_suite():
    t0 = time.monotonic()
    rng = np.random.default_rng(909)

    # square-root decoder error versus individual test errors
    for _ in range(200):
        d = int(rng.integers(2, 7))
        s = rand_contraction(rng, d)
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        t = (g @ g.conj().T) / d
        w, v = np.linalg.eigh(s + t)
        isq = (v / np.sqrt(w)) @ v.conj().T
        lhs = np.eye(d) - isq @ s @ isq
        rhs = 2.0 * (np.eye(d) - s) + 4.0 * t
        assert float(np.linalg.eigvalsh(rhs - lhs).min()) >= -1e-8

    # a high-probability outcome barely disturbs the state
    for _ in range(200):
        d = int(rng.integers(2, 7))
        rho = rand_density(rng, d)
        a = rand_contraction(rng, d)
        p = float(np.real(np.trace(a @ a @ rho.matrix)))
        post = q.DensityOperator(a @ rho.matrix @ a / p, rho.layout)
        assert q.fidelity(rho, post) >= math.sqrt(p) - 1e-8

    # fidelity bounded below through the relative entropy
    for _ in range(200):
        d = int(rng.integers(2, 7))
        rho = rand_density(rng, d)
        sig = rand_density(rng, d)
        assert q.fidelity(rho, sig) >= 2.0 ** (-q.relative_entropy(rho, sig) / 2.0) - 1e-8

    # test statistics move at most by the purified distance
    for _ in range(200):
        d = int(rng.integers(2, 7))
        rho = rand_density(rng, d)
        sig = rand_density(rng, d)
        lam = rand_contraction(rng, d)
        gap = abs(math.sqrt(float(np.real(np.trace(lam @ rho.matrix))))
                  - math.sqrt(float(np.real(np.trace(lam @ sig.matrix)))))
        assert gap <= q.purified_distance(rho, sig) + 1e-8

    # triangle inequality for the purified distance
    for _ in range(200):
        d = int(rng.integers(2, 7))
        a, b, c = (rand_density(rng, d) for _ in range(3))
        assert q.purified_distance(a, b) <= (q.purified_distance(a, c)
                                             + q.purified_distance(c, b) + 1e-8)

    # triangle-style chaining for the max-divergence
    for _ in range(200):
        d = int(rng.integers(2, 7))
        a, b, c = (rand_density(rng, d) for _ in range(3))
        assert q.d_max(a, c) <= q.d_max(b, c) + q.d_max(a, b) + 1e-8

    # monotonicity under discarding a register; the hypothesis-testing value
    # is compared primal-of-marginal against dual-of-joint so both sides are
    # one-sided certificates
    for _ in range(200):
        da = int(rng.integers(2, 4))
        db = int(rng.integers(2, 4))
        rho = rand_bipartite(rng, da, db)
        sig = rand_bipartite(rng, da, db)
        ra, sa = rho.marginal(["A"]), sig.marginal(["A"])
        assert q.fidelity(ra, sa) >= q.fidelity(rho, sig) - 1e-8
        assert q.d_max(ra, sa) <= q.d_max(rho, sig) + 1e-8
        joint = q.hypothesis_testing_divergence(rho, sig, 0.7)
        marg = q.hypothesis_testing_divergence(ra, sa, 0.7)
        assert marg.value_bits <= joint.dual_value_bits + 1e-8

    # monotonicity under arbitrary channels
    for _ in range(200):
        d = int(rng.integers(2, 5))
        dout = int(rng.integers(2, 5))
        ks = rand_kraus(rng, d, dout, 3)
        rho = rand_density(rng, d)
        sig = rand_density(rng, d)
        lay = q.RegisterLayout(("B",), (dout,))
        er = q.DensityOperator(sum(k @ rho.matrix @ k.conj().T for k in ks), lay)
        es = q.DensityOperator(sum(k @ sig.matrix @ k.conj().T for k in ks), lay)
        assert q.fidelity(er, es) >= q.fidelity(rho, sig) - 1e-8
        assert q.d_max(er, es) <= q.d_max(rho, sig) + 1e-8

    assert time.monotonic() - t0 < 60.0


# ---------------------------------------------------------------------------
# 10. two-term expansion tracks the exact value at small block lengths


def test_second_order_expansion_tracks_exact():
    p1 = np.array([0.6, 0.4])
    q1 = np.array([0.3, 0.7])
    rho1, sig1 = diag_state(p1), diag_state(q1)
    for eps in (0.2, 0.25, 0.4):
        fitted = 0.0
        pn = qn = np.array([1.0])
        for n in range(1, 11):
            pn, qn = np.kron(pn, p1), np.kron(qn, q1)
            exact = q.hypothesis_testing_from_error(diag_state(pn), diag_state(qn),
                                                    eps, convention="plain")
            est = q.second_order_estimate(rho1, sig1, n, eps)
            resid = abs(exact.value_bits - est)
            fitted = max(fitted, resid / (math.log2(n + 1.0) + 1.0))
        # the leftover after two terms grows at most logarithmically
        assert fitted <= 6.0

    grid = np.concatenate([np.linspace(1e-6, 1.0 - 1e-6, 2001), [1e-9, 1.0 - 1e-9]])
    for e in grid:
        x = q.inverse_gaussian_cdf(float(e))
        assert abs(ndtr(x) - e) <= 1e-12


# ---------------------------------------------------------------------------
# 11. blocked smoothing pipeline output inequalities


def test_blocked_smoothing_pipeline():
    for d, eps, want_dmax in ((2, 0.3, 2.0), (3, 0.45, 2.0 * math.log2(3.0)),
                              (2, 0.6, 2.0)):
        rho = _corr(d, "A", "B")
        cert = q.restricted_smooth_pipeline(rho, ["A"], 2, eps)
        delta = eps / 576.0
        assert cert.achieved_distance <= 24.0 * math.sqrt(delta) + 1e-12
        assert abs(cert.distance_bound - 24.0 * math.sqrt(delta)) < 1e-12
        assert cert.inflation_a <= 1.0 + 1000.0 * delta + 1e-12
        assert cert.inflation_b <= 1.0 + 1000.0 * delta + 1e-12
        assert math.isfinite(cert.dmax_actual_bits)
        assert abs(cert.dmax_actual_bits - want_dmax) < 1e-9

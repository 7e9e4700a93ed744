"""One-shot coded transmission over a noisy channel with shared resources.

Four simulations share one skeleton: place the resource state at a message
dependent position among decoys, send the channel legs, and decode positions
with the square-root POVM built from a binary hypothesis test. Each report
carries the exact per-message error of the finite-dimensional instance next
to the theoretical guarantee, with a flag saying whether the guarantee is
informative at this scale (at desk-size dimensions the bounds are usually
vacuous; the simulations are still exact).

Position pools use labels like "E@3": register E of pool slot 3. Copy labels
for repeated channel uses look like "B#2".
"""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import (
    BadParam,
    ComputeError,
    DimGuard,
    MarginalMismatch,
    NoConverge,
    RegionViolation,
    ShapeMismatch,
)
from .linalg import max_dim_limit
from .registers import RegisterLayout
from .states import (
    DensityOperator,
    PureState,
    entropy,
    mutual_information,
    purify,
    tensor,
    tensor_many,
)
from .divergences import d_max, hypothesis_testing_from_error, i_max
from .decoding import PositionDecoder
from .convexsplit import uhlmann_isometry


@dataclass
class ProtocolReport:
    protocol: str
    messages: int
    achieved_rate_bits: float
    per_message_error: list
    max_error: float
    theory_bound: float
    bound_applicable: bool
    mean_error: float | None = None
    stderr: float | None = None
    theory_bound_relaxed: float | None = None
    resources: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)


def _fresh(base, taken):
    label = base
    while label in taken:
        label = label + "'"
    return label


def _as_purified(state, purifier_base):
    """Return (pure state, purifier label); densities get a minimal purifier,
    pure inputs get a dim-1 companion so downstream layouts are uniform."""
    if isinstance(state, DensityOperator):
        label = _fresh(purifier_base, set(state.layout.labels))
        return purify(state, purifier_label=label), label
    label = _fresh(purifier_base, set(state.layout.labels))
    pad = PureState(np.ones(1), RegisterLayout.of((label, 1)), validate=False)
    return state.tensor(pad), label


def _zero_ket(label, dim):
    v = np.zeros(dim)
    v[0] = 1.0
    return PureState(v, RegisterLayout.of((label, dim)), validate=False)


def _basis_ket(label, dim, idx):
    v = np.zeros(dim)
    v[idx] = 1.0
    return PureState(v, RegisterLayout.of((label, dim)), validate=False)


def _channel_branch_reduce(channel, psi, keep_labels):
    """Channel on psi's registers named by the channel's input labels, then
    the reduced state on keep_labels. Works branch by branch on the vector so
    the full output density is never materialized."""
    in_labels = list(channel.input_layout.labels)
    for t, d in zip(in_labels, channel.input_layout.dims):
        if psi.layout.dim_of(t) != d:
            raise ShapeMismatch(f"register {t!r} has dim {psi.layout.dim_of(t)}, channel leg needs {d}")
    rest = [l for l in psi.layout.labels if l not in in_labels]
    for ol in channel.output_layout.labels:
        if ol in rest:
            raise BadParam(f"channel output label {ol!r} collides with a live register")
    perm = psi.permuted(in_labels + rest)
    m = perm.amplitudes.reshape(channel.dim_in, -1)
    out_lay = channel.output_layout.concat(psi.layout.restrict(rest))
    acc = None
    lay = None
    for k in channel.kraus:
        v = PureState((k @ m).reshape(-1), out_lay, validate=False)
        dm = v.marginal(keep_labels)
        acc = dm.matrix if acc is None else acc + dm.matrix
        lay = dm.layout
    return DensityOperator(acc, lay, require_normalized=False, validate=False)


def _pool_labels(base_labels, slot):
    return {l: f"{l}@{slot}" for l in base_labels}


def tensor_pure(states):
    out = None
    for s in states:
        out = s if out is None else out.tensor(s)
    if out is None:
        raise BadParam("tensor_pure needs at least one factor")
    return out


def _signal_and_noise(channel, psi_pure, ref_labels):
    """Reduced channel output correlated with the side registers, and the
    uncorrelated product of its marginals."""
    b_labels = list(channel.output_layout.labels)
    sig = _channel_branch_reduce(channel, psi_pure, b_labels + list(ref_labels))
    sig = sig.permuted(b_labels + list(ref_labels))
    noise = tensor(sig.marginal(b_labels), sig.marginal(ref_labels))
    noise = noise.permuted(sig.layout.labels)
    return sig, noise


# ---------------------------------------------------------------------------
# point to point


@dataclass
class P2PConfig:
    channel: object
    psi: PureState
    rate_bits: int
    epsilon: float
    delta: float | None = None


def simulate_p2p(cfg):
    """Entanglement-assisted one-shot transmission at rate 2^R messages.

    The resource state psi carries the channel input registers plus side
    registers; the receiver holds 2^R copies of the side marginal and decodes
    which of them is correlated with the channel output.
    """
    if cfg.rate_bits < 1:
        raise BadParam(f"rate_bits must be >= 1, got {cfg.rate_bits}")
    channel, psi = cfg.channel, cfg.psi
    in_labels = list(channel.input_layout.labels)
    ref_labels = [l for l in psi.layout.labels if l not in in_labels]
    if not ref_labels:
        raise BadParam("resource state has no side registers to decode on")
    b_labels = list(channel.output_layout.labels)
    sig, noise = _signal_and_noise(channel, psi, ref_labels)
    ht = hypothesis_testing_from_error(sig, noise, cfg.epsilon, convention="squared")

    n_msg = 2**cfg.rate_bits
    full_labels = list(b_labels)
    full_dims = [channel.output_layout.dim_of(l) for l in b_labels]
    for j in range(1, n_msg + 1):
        for l in ref_labels:
            full_labels.append(f"{l}@{j}")
            full_dims.append(psi.layout.dim_of(l))
    full_layout = RegisterLayout(tuple(full_labels), tuple(full_dims)).guard("decoder state")

    side = sig.marginal(ref_labels)
    decoys = {
        j: side.relabeled(_pool_labels(ref_labels, j)) for j in range(1, n_msg + 1)
    }
    placements = [_pool_labels(ref_labels, j) for j in range(1, n_msg + 1)]
    decoder = PositionDecoder(ht.test, sig.layout, full_layout, placements)

    errors, chains = [], []
    for m in range(1, n_msg + 1):
        parts = [sig.relabeled(_pool_labels(ref_labels, m))]
        parts.extend(decoys[j] for j in range(1, n_msg + 1) if j != m)
        theta = tensor_many(parts).permuted(full_labels)
        err = 1.0 - decoder.success_probability(theta.matrix, m - 1)
        chain = decoder.chain_bound(theta.matrix, m - 1)
        if err > chain + 1e-8:
            raise ComputeError(
                f"square-root error {err:.6e} exceeds its operator bound {chain:.6e}"
            )
        errors.append(err)
        chains.append(chain)

    theory = 2.0 * cfg.epsilon**2 + 4.0 * (2.0 ** (cfg.rate_bits - ht.value_bits))
    relaxed = None
    if cfg.delta is not None:
        relaxed = 4.0 * (cfg.epsilon + cfg.delta) ** 2
    return ProtocolReport(
        protocol="p2p",
        messages=n_msg,
        achieved_rate_bits=float(cfg.rate_bits),
        per_message_error=errors,
        max_error=max(errors),
        theory_bound=theory,
        bound_applicable=theory < 1.0,
        theory_bound_relaxed=relaxed,
        resources={"pool_states": n_msg, "channel_uses": 1},
        details={
            "dh_bits": ht.value_bits,
            "alpha": ht.alpha,
            "dh_route": ht.route,
            "chain_bounds": chains,
            "povm_deviation": decoder.povm_deviation,
        },
    )


def p2p_rate_bound(channel, psi, eps, delta):
    """Achievable one-shot rate for entanglement-assisted transmission.

    Hypothesis-testing divergence of the channel output (kept correlated
    with the side registers of psi) against the decoupled product of its
    marginals, minus 2 log2(1/delta). Rates below this value admit a code
    with error at most (eps + delta)^2 up to constants; see simulate_p2p
    for the finite instance.
    """
    if not (0.0 < delta <= 1.0):
        raise BadParam(f"delta must lie in (0, 1], got {delta}")
    in_labels = list(channel.input_layout.labels)
    ref_labels = [l for l in psi.layout.labels if l not in in_labels]
    if not ref_labels:
        raise BadParam("resource state has no side registers")
    sig, noise = _signal_and_noise(channel, psi, ref_labels)
    ht = hypothesis_testing_from_error(sig, noise, eps, convention="squared")
    return ht.value_bits - 2.0 * math.log2(1.0 / delta)


def asymptotic_rates(channel, psi):
    """Mutual-information benchmark for the same resource state."""
    in_labels = list(channel.input_layout.labels)
    ref_labels = [l for l in psi.layout.labels if l not in in_labels]
    b_labels = list(channel.output_layout.labels)
    sig, _ = _signal_and_noise(channel, psi, ref_labels)
    return {
        "mutual_information_bits": mutual_information(sig, b_labels),
        "input_entropy_bits": entropy(psi.marginal(in_labels)),
    }


# ---------------------------------------------------------------------------
# iid block coding with subset selection


def _next_prime(n):
    candidate = max(2, n)
    while True:
        is_p = candidate >= 2 and all(
            candidate % q for q in range(2, int(math.isqrt(candidate)) + 1)
        )
        if is_p:
            return candidate
        candidate += 1


class PairwiseIndependentFamily:
    """Affine maps m -> (a m + b) mod p with outputs inside the code list.

    Seeds are pairs (a, b) in Z_p^2 conditioned on every message landing on a
    valid code index. For two messages the conditioned pair law is exactly
    uniform on {0..n_codes-1}^2 because (a, b) <-> (f(0), f(1)) is a bijection
    of Z_p^2.
    """

    def __init__(self, n_codes, n_messages):
        if n_codes < 1 or n_messages < 1:
            raise BadParam("family needs positive code and message counts")
        self.n_codes = n_codes
        self.n_messages = n_messages
        self.prime = _next_prime(max(n_codes, n_messages))
        self._admissible = None

    def positions(self, seed):
        a, b = seed
        return tuple((a * m + b) % self.prime for m in range(self.n_messages))

    def is_admissible(self, seed):
        return all(x < self.n_codes for x in self.positions(seed))

    def admissible_seeds(self):
        if self._admissible is None:
            if self.prime**2 > 4_000_000:
                raise DimGuard(
                    f"enumerating {self.prime}^2 seeds exceeds the enumeration budget"
                )
            self._admissible = [
                (a, b)
                for a in range(self.prime)
                for b in range(self.prime)
                if self.is_admissible((a, b))
            ]
            if not self._admissible:
                raise ComputeError("hash family has no admissible seeds")
        return self._admissible

    def sample(self, rng):
        if self.prime**2 <= 4_000_000:
            seeds = self.admissible_seeds()
            return seeds[int(rng.integers(len(seeds)))]
        for _ in range(1_000_000):
            seed = (int(rng.integers(self.prime)), int(rng.integers(self.prime)))
            if self.is_admissible(seed):
                return seed
        raise NoConverge("rejection sampling found no admissible seed", iterations=1_000_000)


@dataclass
class SubsetCodeConfig:
    channel: object
    psi: PureState
    n: int
    w: int
    rate_bits: float
    epsilon: float
    samples: int = 200
    seed: int = 0


def simulate_iid_subset(cfg):
    """Random subset coding over n iid channel uses from a pool of w states.

    Messages pick n-element subsets of the pool through a pairwise
    independent family; the receiver tests every message's subset against the
    n channel outputs. Errors are averaged over the seeded family by Monte
    Carlo with exact per-seed evaluation.
    """
    n, w = int(cfg.n), int(cfg.w)
    if n < 1:
        raise BadParam(f"block length {n} must be >= 1")
    if w <= 2 * n:
        raise BadParam(f"pool must satisfy w > 2n, got w={w}, n={n}")
    if cfg.samples < 1:
        raise BadParam("samples must be >= 1")
    total_bits = n * cfg.rate_bits
    n_msg = round(2.0**total_bits)
    if abs(2.0**total_bits - n_msg) > 1e-9 or n_msg < 2:
        raise BadParam(
            f"n * rate_bits must give an integer message count >= 2, got 2^{total_bits}"
        )
    n_codes = math.comb(w, n)
    if n_codes > 20000:
        raise DimGuard(f"subset count C({w},{n}) = {n_codes} exceeds the enumeration budget")
    subsets = list(combinations(range(w), n))
    family = PairwiseIndependentFamily(n_codes, n_msg)

    channel, psi = cfg.channel, cfg.psi
    in_labels = list(channel.input_layout.labels)
    ref_labels = [l for l in psi.layout.labels if l not in in_labels]
    if not ref_labels:
        raise BadParam("resource state has no side registers to decode on")
    b_labels = list(channel.output_layout.labels)
    sig, noise = _signal_and_noise(channel, psi, ref_labels)

    def copy_map(k):
        out = {l: f"{l}#{k}" for l in b_labels}
        out.update({l: f"{l}#{k}" for l in ref_labels})
        return out

    sig_copies = [sig.relabeled(copy_map(k)) for k in range(1, n + 1)]
    noise_copies = [noise.relabeled(copy_map(k)) for k in range(1, n + 1)]
    canon_n = [f"{l}#{k}" for k in range(1, n + 1) for l in b_labels]
    canon_n += [f"{l}#{k}" for k in range(1, n + 1) for l in ref_labels]
    sig_n = tensor_many(sig_copies).permuted(canon_n)
    noise_n = tensor_many(noise_copies).permuted(canon_n)
    ht = hypothesis_testing_from_error(sig_n, noise_n, cfg.epsilon, convention="plain")

    full_labels = [f"{l}#{k}" for k in range(1, n + 1) for l in b_labels]
    full_dims = [channel.output_layout.dim_of(l) for k in range(n) for l in b_labels]
    for slot in range(1, w + 1):
        for l in ref_labels:
            full_labels.append(f"{l}@{slot}")
            full_dims.append(psi.layout.dim_of(l))
    full_layout = RegisterLayout(tuple(full_labels), tuple(full_dims)).guard("decoder state")

    side = sig.marginal(ref_labels)
    decoys = {
        slot: side.relabeled(_pool_labels(ref_labels, slot)) for slot in range(1, w + 1)
    }

    def placement(subset):
        out = {}
        for k, slot in enumerate(subset, start=1):
            for l in ref_labels:
                out[f"{l}#{k}"] = f"{l}@{slot + 1}"
        return out

    theta_cache = {}

    def theta_for(subset):
        if subset not in theta_cache:
            parts = []
            for k, slot in enumerate(subset, start=1):
                mapping = {l: f"{l}#{k}" for l in b_labels}
                mapping.update({l: f"{l}@{slot + 1}" for l in ref_labels})
                parts.append(sig.relabeled(mapping))
            occupied = set(subset)
            parts.extend(decoys[slot + 1] for slot in range(w) if slot not in occupied)
            theta_cache[subset] = tensor_many(parts).permuted(full_labels)
        return theta_cache[subset]

    code_cache = {}

    def evaluate(code):
        if code not in code_cache:
            decoder = PositionDecoder(
                ht.test,
                sig_n.layout,
                full_layout,
                [placement(subsets[ci]) for ci in code],
            )
            errs, chs = [], []
            for m, ci in enumerate(code):
                theta = theta_for(subsets[ci])
                err = 1.0 - decoder.success_probability(theta.matrix, m)
                ch = decoder.chain_bound(theta.matrix, m)
                if err > ch + 1e-8:
                    raise ComputeError(
                        f"square-root error {err:.6e} exceeds its operator bound {ch:.6e}"
                    )
                errs.append(err)
                chs.append(ch)
            code_cache[code] = (errs, chs)
        return code_cache[code]

    rng = np.random.default_rng(cfg.seed)
    sums = np.zeros(n_msg)
    sumsq = np.zeros(n_msg)
    for _ in range(cfg.samples):
        seed = family.sample(rng)
        code = family.positions(seed)
        errs, _ = evaluate(code)
        sums += np.asarray(errs)
        sumsq += np.asarray(errs) ** 2
    means = sums / cfg.samples
    overall = float(np.mean(means))
    var = float(np.mean(sumsq / cfg.samples - means**2))
    stderr = math.sqrt(max(var, 0.0) / cfg.samples)

    f_bits = d_max(
        psi.density(),
        tensor(psi.marginal(in_labels), psi.marginal(ref_labels)).permuted(psi.layout.labels),
    )
    exponent = (2.0**f_bits) * math.log2(math.e) * n * n / (w - 2 * n)
    exponent += total_bits - ht.value_bits
    theory = 2.0 * cfg.epsilon + 4.0 * (2.0**exponent)
    return ProtocolReport(
        protocol="iid-subset",
        messages=n_msg,
        achieved_rate_bits=float(total_bits),
        per_message_error=[float(x) for x in means],
        max_error=float(np.max(means)),
        mean_error=overall,
        stderr=stderr,
        theory_bound=theory,
        bound_applicable=theory < 1.0 and cfg.epsilon < 1.0 / 7.0,
        resources={"pool_states": w, "channel_uses": n, "samples": cfg.samples},
        details={
            "dh_bits": ht.value_bits,
            "dh_route": ht.route,
            "f_bits": f_bits,
            "prime": family.prime,
            "distinct_codes_seen": len(code_cache),
            "epsilon_in_theorem_range": cfg.epsilon < 1.0 / 7.0,
        },
    )


# ---------------------------------------------------------------------------
# channel-state side information


@dataclass
class GPConfig:
    channel: object
    psi: object  # PureState or DensityOperator on [A..., side..., S]
    phi: PureState  # on [S, S'...]
    rate_bits: int
    band_bits: int
    epsilon: float
    delta: float
    state_label: str = "S"


def simulate_gelfand_pinsker(cfg):
    """Transmission when the channel consumes a register held by nature.

    Nature's register S is entangled with a reference S' via phi; the encoder
    holds S' and a pool of purified side states, picks the band of positions
    matching the message, and steers its purifiers with the best isometry
    toward the target mixture. Decoding tests every position.
    """
    if cfg.rate_bits < 1:
        raise BadParam(f"rate_bits must be >= 1, got {cfg.rate_bits}")
    if cfg.band_bits < 0:
        raise BadParam(f"band_bits must be >= 0, got {cfg.band_bits}")
    channel = cfg.channel
    s_label = cfg.state_label
    if s_label not in channel.input_layout:
        raise BadParam(f"channel has no input register {s_label!r}")
    psi, c_label = _as_purified(cfg.psi, "C")
    phi = cfg.phi
    if s_label not in psi.layout or s_label not in phi.layout:
        raise BadParam(f"both states must carry the register {s_label!r}")
    in_labels = list(channel.input_layout.labels)
    a_labels = [l for l in in_labels if l != s_label]
    side_labels = [
        l for l in psi.layout.labels if l not in in_labels and l != c_label
    ]
    if not side_labels:
        raise BadParam("resource state has no side registers to decode on")
    sp_labels = [l for l in phi.layout.labels if l != s_label]

    psi_s = psi.marginal([s_label])
    phi_s = phi.marginal([s_label])
    dev = float(np.max(np.abs(psi_s.matrix - phi_s.matrix)))
    if dev > 1e-8:
        raise MarginalMismatch(
            f"resource and nature states disagree on {s_label!r} by {dev:.3e}"
        )

    b_labels = list(channel.output_layout.labels)
    sig, noise = _signal_and_noise(channel, psi, side_labels)
    ht = hypothesis_testing_from_error(sig, noise, cfg.epsilon, convention="squared")

    n_pos = 2 ** (cfg.rate_bits + cfg.band_bits)
    band_size = 2**cfg.band_bits
    n_msg = 2**cfg.rate_bits

    side_marg = psi.marginal(side_labels)
    chi = purify(side_marg, purifier_label="X")
    x_rank = chi.layout.dim_of("X")
    taken = set(psi.layout.labels) | set(phi.layout.labels)
    k_lab = _fresh("K", taken)

    def chi_at(slot):
        mapping = _pool_labels(side_labels, slot)
        mapping["X"] = f"X@{slot}"
        return chi.relabeled(mapping)

    def y_of(slot):
        return [f"{l}@{slot}" for l in side_labels]

    full_labels = list(b_labels) + [y for slot in range(n_pos) for y in y_of(slot)]
    full_dims = [channel.output_layout.dim_of(l) for l in b_labels]
    full_dims += [psi.layout.dim_of(l) for _ in range(n_pos) for l in side_labels]
    decode_layout = RegisterLayout(tuple(full_labels), tuple(full_dims)).guard("decoder state")
    placements = [_pool_labels(side_labels, slot) for slot in range(n_pos)]
    decoder = PositionDecoder(ht.test, sig.layout, decode_layout, placements)

    pools = tensor_pure([chi_at(slot) for slot in range(n_pos)])
    full_source = phi.tensor(pools)

    errors, overlaps, split_dists = [], [], []
    for m in range(n_msg):
        band = list(range(m * band_size, (m + 1) * band_size))
        shared = [s_label] + [y for slot in band for y in y_of(slot)]
        target_order = shared + [k_lab] + a_labels + [c_label] + [f"X@{k}" for k in band]
        acc = None
        for k_loc, k in enumerate(band):
            parts = [psi.relabeled(_pool_labels(side_labels, k))]
            parts.append(_zero_ket(f"X@{k}", x_rank))
            parts.extend(chi_at(l) for l in band if l != k)
            parts.append(_basis_ket(k_lab, band_size, k_loc))
            term = tensor_pure(parts).permuted(target_order)
            acc = term.amplitudes if acc is None else acc + term.amplitudes
        target = PureState(acc / math.sqrt(band_size), term.layout)
        source = phi.tensor(tensor_pure([chi_at(k) for k in band]))
        iso = uhlmann_isometry(source, target, shared)
        encoded = iso.apply(full_source)
        bob = _channel_branch_reduce(channel, encoded, full_labels).permuted(full_labels)
        probs = decoder.outcome_probabilities(bob.matrix)
        err = 1.0 - sum(probs[j] for j in band)
        errors.append(err)
        overlaps.append(iso.achieved_overlap)
        split_dists.append(math.sqrt(max(0.0, 1.0 - iso.achieved_overlap**2)))

    k_exact = i_max(psi.marginal(side_labels + [s_label]), side_labels)
    theory = (6.0 * cfg.epsilon + 4.0 * cfg.delta) ** 2
    return ProtocolReport(
        protocol="gelfand-pinsker",
        messages=n_msg,
        achieved_rate_bits=float(cfg.rate_bits),
        per_message_error=errors,
        max_error=max(errors),
        theory_bound=theory,
        bound_applicable=theory < 1.0,
        resources={
            "pool_states": n_pos,
            "band_size": band_size,
            "channel_uses": 1,
        },
        details={
            "dh_bits": ht.value_bits,
            "dh_route": ht.route,
            "imax_side_vs_state_bits": k_exact,
            "uhlmann_overlaps": overlaps,
            "convex_split_distances": split_dists,
            "povm_deviation": decoder.povm_deviation,
        },
    )


# ---------------------------------------------------------------------------
# two-receiver broadcast


@dataclass
class BroadcastConfig:
    channel: object
    psi: object  # PureState or DensityOperator on [F..., A1, A2]
    b_labels: tuple
    c_labels: tuple
    a1_label: str
    a2_label: str
    rate1_bits: int
    rate2_bits: int
    band1_bits: int
    band2_bits: int
    epsilon: float
    delta: float
    k_bits: float | None = None


def simulate_broadcast(cfg):
    """Simultaneous transmission to two receivers from one channel input.

    Each receiver owns a pool of purified side states; the encoder steers
    both pools' purifiers at once toward a grid mixture over the two message
    bands. The rate region constraints are validated before anything is
    built; violations name the binding constraint.
    """
    if cfg.rate1_bits < 0 or cfg.rate2_bits < 0 or cfg.rate1_bits + cfg.rate2_bits < 1:
        raise BadParam("need nonnegative rates with at least one positive")
    if cfg.band1_bits < 0 or cfg.band2_bits < 0:
        raise BadParam("band sizes must be nonnegative")
    if not 0.0 < cfg.delta <= 1.0:
        raise BadParam(f"delta {cfg.delta} outside (0, 1]")
    channel = cfg.channel
    psi, g_label = _as_purified(cfg.psi, "G")
    a1, a2 = cfg.a1_label, cfg.a2_label
    b_labels, c_labels = list(cfg.b_labels), list(cfg.c_labels)
    out_set = set(channel.output_layout.labels)
    if set(b_labels) | set(c_labels) != out_set or set(b_labels) & set(c_labels):
        raise BadParam("b_labels and c_labels must partition the channel outputs")

    # single-copy decode tests, one per receiver
    sig1 = _channel_branch_reduce(channel, psi, b_labels + [a1]).permuted(b_labels + [a1])
    noise1 = tensor(sig1.marginal(b_labels), sig1.marginal([a1])).permuted(sig1.layout.labels)
    ht1 = hypothesis_testing_from_error(sig1, noise1, cfg.epsilon, convention="squared")
    sig2 = _channel_branch_reduce(channel, psi, c_labels + [a2]).permuted(c_labels + [a2])
    noise2 = tensor(sig2.marginal(c_labels), sig2.marginal([a2])).permuted(sig2.layout.labels)
    ht2 = hypothesis_testing_from_error(sig2, noise2, cfg.epsilon, convention="squared")

    k_bits = cfg.k_bits
    if k_bits is None:
        k_bits = i_max(psi.marginal([a1, a2]), [a1])

    lg1d = math.log2(1.0 / cfg.delta)
    r1, r2 = cfg.band1_bits, cfg.band2_bits
    failures = []
    need_sum = math.ceil(k_bits + 3.0 * lg1d - 1e-9)
    if r1 + r2 < need_sum:
        failures.append(
            f"band budget r1+r2 = {r1 + r2} below ceil(k + 3 log2(1/delta)) = {need_sum}"
        )
    for name, r in (("r1", r1), ("r2", r2)):
        if r < lg1d - 1e-9:
            failures.append(f"{name} = {r} below log2(1/delta) = {lg1d:.4f}")
    for name, rate, band, ht in (
        ("receiver 1", cfg.rate1_bits, r1, ht1),
        ("receiver 2", cfg.rate2_bits, r2, ht2),
    ):
        cap = ht.value_bits - 4.0 * lg1d - 1.0
        if rate + band > cap + 1e-9:
            failures.append(
                f"{name}: R + r = {rate + band} exceeds D_H - 4 log2(1/delta) - 1 = {cap:.4f}"
            )
    if failures:
        raise RegionViolation("; ".join(failures))

    n1 = 2 ** (cfg.rate1_bits + r1)
    n2 = 2 ** (cfg.rate2_bits + r2)
    band1_size, band2_size = 2**r1, 2**r2
    k_dim = band1_size * band2_size

    side1 = psi.marginal([a1])
    side2 = psi.marginal([a2])
    chi1 = purify(side1, purifier_label="X1")
    chi2 = purify(side2, purifier_label="X2")
    x1_rank = chi1.layout.dim_of("X1")
    x2_rank = chi2.layout.dim_of("X2")

    def chi1_at(slot):
        return chi1.relabeled({a1: f"{a1}@{slot}", "X1": f"X1@{slot}"})

    def chi2_at(slot):
        return chi2.relabeled({a2: f"{a2}~{slot}", "X2": f"X2~{slot}"})

    y1 = [f"{a1}@{slot}" for slot in range(n1)]
    y2 = [f"{a2}~{slot}" for slot in range(n2)]
    d_a1 = psi.layout.dim_of(a1)
    d_a2 = psi.layout.dim_of(a2)

    bob_layout = RegisterLayout(
        tuple(b_labels + y1),
        tuple([channel.output_layout.dim_of(l) for l in b_labels] + [d_a1] * n1),
    ).guard("decoder state")
    cha_layout = RegisterLayout(
        tuple(c_labels + y2),
        tuple([channel.output_layout.dim_of(l) for l in c_labels] + [d_a2] * n2),
    ).guard("decoder state")
    dec1 = PositionDecoder(
        ht1.test, sig1.layout, bob_layout, [{a1: f"{a1}@{slot}"} for slot in range(n1)]
    )
    dec2 = PositionDecoder(
        ht2.test, sig2.layout, cha_layout, [{a2: f"{a2}~{slot}"} for slot in range(n2)]
    )

    # group Bob's registers next to Charlie's so joint expectations factor
    joint_labels = b_labels + y1 + c_labels + y2
    joint_dims = [channel.output_layout.dim_of(l) for l in b_labels] + [d_a1] * n1
    joint_dims += [channel.output_layout.dim_of(l) for l in c_labels] + [d_a2] * n2
    RegisterLayout(tuple(joint_labels), tuple(joint_dims)).guard("joint decoder state")
    d_bob = bob_layout.total_dim
    d_cha = cha_layout.total_dim

    pools = tensor_pure(
        [chi1_at(slot) for slot in range(n1)] + [chi2_at(slot) for slot in range(n2)]
    )
    k_lab = _fresh("K", set(psi.layout.labels))

    f_labels = list(channel.input_layout.labels)
    joint_errors = []
    err1_list, err2_list, overlaps = [], [], []
    grid = [(m1, m2) for m1 in range(2**cfg.rate1_bits) for m2 in range(2**cfg.rate2_bits)]
    for m1, m2 in grid:
        band1 = list(range(m1 * band1_size, (m1 + 1) * band1_size))
        band2 = list(range(m2 * band2_size, (m2 + 1) * band2_size))
        shared = [f"{a1}@{k}" for k in band1] + [f"{a2}~{k}" for k in band2]
        target_order = shared + [k_lab, g_label] + f_labels
        target_order += [f"X1@{k}" for k in band1] + [f"X2~{k}" for k in band2]
        acc = None
        for i1, k1 in enumerate(band1):
            for i2, k2 in enumerate(band2):
                parts = [psi.relabeled({a1: f"{a1}@{k1}", a2: f"{a2}~{k2}"})]
                parts.append(_zero_ket(f"X1@{k1}", x1_rank))
                parts.append(_zero_ket(f"X2~{k2}", x2_rank))
                parts.extend(chi1_at(l) for l in band1 if l != k1)
                parts.extend(chi2_at(l) for l in band2 if l != k2)
                parts.append(_basis_ket(k_lab, k_dim, i1 * band2_size + i2))
                term = tensor_pure(parts).permuted(target_order)
                acc = term.amplitudes if acc is None else acc + term.amplitudes
        target = PureState(acc / math.sqrt(k_dim), term.layout)
        source = tensor_pure(
            [chi1_at(k) for k in band1] + [chi2_at(k) for k in band2]
        )
        iso = uhlmann_isometry(source, target, shared)
        encoded = iso.apply(pools)
        joint = _channel_branch_reduce(channel, encoded, joint_labels).permuted(joint_labels)

        om1 = sum(dec1.omegas[j] for j in band1)
        om2 = sum(dec2.omegas[j] for j in band2)
        # expectations through the grouped (Bob block, Charlie block) structure
        t = joint.matrix.reshape(d_bob, d_cha, d_bob, d_cha)
        p_joint = float(np.real(np.einsum("ab,cd,acbd->", om1, om2, t, optimize=True)))
        p1 = float(np.real(np.einsum("ab,acbc->", om1, t)))
        p2 = float(np.real(np.einsum("cd,acad->", om2, t)))
        joint_errors.append(1.0 - p_joint)
        err1_list.append(1.0 - p1)
        err2_list.append(1.0 - p2)
        overlaps.append(iso.achieved_overlap)

    theory = (4.0 * cfg.epsilon + 9.0 * math.sqrt(cfg.delta)) ** 2
    return ProtocolReport(
        protocol="broadcast",
        messages=len(grid),
        achieved_rate_bits=float(cfg.rate1_bits + cfg.rate2_bits),
        per_message_error=joint_errors,
        max_error=max(joint_errors),
        theory_bound=theory,
        bound_applicable=theory < 1.0,
        resources={
            "pool_states_1": n1,
            "pool_states_2": n2,
            "band_sizes": [band1_size, band2_size],
            "channel_uses": 1,
        },
        details={
            "dh1_bits": ht1.value_bits,
            "dh2_bits": ht2.value_bits,
            "k_bits": k_bits,
            "receiver1_error": err1_list,
            "receiver2_error": err2_list,
            "uhlmann_overlaps": overlaps,
            "convex_split_distances": [
                math.sqrt(max(0.0, 1.0 - ov * ov)) for ov in overlaps
            ],
            "region_margins": {
                "band_budget": (r1 + r2) - need_sum,
                "receiver1": ht1.value_bits - 4.0 * lg1d - 1.0 - (cfg.rate1_bits + r1),
                "receiver2": ht2.value_bits - 4.0 * lg1d - 1.0 - (cfg.rate2_bits + r2),
            },
        },
    )

"""Fast closed-form sanity checks runnable from the CLI."""

import math

import numpy as np

from .registers import RegisterLayout
from .states import DensityOperator, maximally_entangled, maximally_mixed, tensor
from .channels import depolarizing
from .divergences import d_max, hypothesis_testing_divergence, relative_entropy
from .convexsplit import _maxent_qubit_distance, build_convex_split
from .protocols import P2PConfig, simulate_p2p
from .serialize import dumps_canonical


def _diag(probs, label="X"):
    return DensityOperator(np.diag(probs).astype(complex), RegisterLayout.of((label, len(probs))))


def run_selftest():
    """Returns a list of (name, error-or-None) pairs."""
    results = []

    def check(name, fn):
        try:
            fn()
            results.append((name, None))
        except AssertionError as exc:
            results.append((name, str(exc) or "assertion failed"))
        except Exception as exc:  # noqa: BLE001 - report anything, do not crash
            results.append((name, f"{type(exc).__name__}: {exc}"))

    def t_rel_entropy():
        v = relative_entropy(_diag([0.5, 0.5]), _diag([0.9, 0.1]))
        assert abs(v - math.log2(5.0 / 3.0)) < 1e-12, f"got {v}"

    def t_hypothesis_test():
        r = hypothesis_testing_divergence(_diag([0.5, 0.5]), _diag([0.9, 0.1]), 0.5)
        assert abs(r.beta - 0.1) < 1e-9, f"beta {r.beta}"
        assert r.gap_relative < 1e-7, f"gap {r.gap_relative}"

    def t_dmax_bell():
        bell = maximally_entangled(2).density()
        ref = tensor(maximally_mixed(2, "A"), maximally_mixed(2, "B"))
        v = d_max(bell, ref)
        assert abs(v - 2.0) < 1e-9, f"got {v}"

    def t_convex_split_routes():
        bell = maximally_entangled(2, "P", "Q").density()
        half = DensityOperator(np.eye(2) / 2.0, RegisterLayout.of(("Q", 2)))
        st = build_convex_split(bell, half, ["P"], 4, want_purification=False)
        assert st.route == "dense", st.route
        assert st.exact_distance <= st.declared_bound + 1e-9
        alt = _maxent_qubit_distance(4)
        assert abs(alt - st.exact_distance) < 1e-9, f"{alt} vs {st.exact_distance}"

    def t_p2p_control():
        psi = maximally_entangled(2, "A", "E")
        cfg = P2PConfig(channel=depolarizing(2, 1.0), psi=psi, rate_bits=1, epsilon=0.2)
        rep = simulate_p2p(cfg)
        for e in rep.per_message_error:
            assert abs(e - 0.5) < 1e-9, f"error {e}"

    def t_canonical_json():
        text = dumps_canonical({"b": 1.5, "a": [float("inf"), None, True]})
        assert text == '{"a":["inf",null,true],"b":1.5}', text

    check("relative entropy closed form", t_rel_entropy)
    check("hypothesis test known optimum", t_hypothesis_test)
    check("d_max of maximal entanglement", t_dmax_bell)
    check("convex split dense vs spin route", t_convex_split_routes)
    check("fully depolarized decoding is blind", t_p2p_control)
    check("canonical JSON bytes", t_canonical_json)
    return results

"""Square-root position decoding from a single binary test operator.

A PositionDecoder takes one two-outcome test (the optimizer of a
hypothesis-testing divergence) and turns it into a POVM over candidate
positions via the square-root construction
    Omega_j = S^{-1/2} Lambda_j S^{-1/2},   S = sum_j Lambda_j,
with an explicit abort element I - sum_j Omega_j picking up the kernel of S.
The per-position elements and the pretty-good error chain are exposed so
simulations can verify the operator inequality sample by sample.
"""

import numpy as np

from .errors import BadParam, ComputeError
from .linalg import invsqrtm_support, min_eigenvalue
from .states import embed_operator


class PositionDecoder:
    def __init__(self, test_op, test_layout, full_layout, placements):
        """placements maps each outcome to {test label -> register label}.

        The test operator is embedded at every placement inside full_layout;
        all placements must target disjoint interpretations of the same test.
        """
        if not placements:
            raise BadParam("decoder needs at least one placement")
        self.full_layout = full_layout
        self.lambdas = []
        for mapping in placements:
            lay = test_layout.relabeled(mapping)
            self.lambdas.append(embed_operator(test_op, lay, full_layout))
        s = np.zeros_like(self.lambdas[0])
        for lam in self.lambdas:
            s = s + lam
        isq = invsqrtm_support(s)
        self.omegas = [isq @ lam @ isq for lam in self.lambdas]
        acc = np.zeros_like(s)
        for om in self.omegas:
            acc = acc + om
        self.abort = np.eye(s.shape[0], dtype=complex) - acc
        self.povm_deviation = max(0.0, -min_eigenvalue(self.abort))
        if self.povm_deviation > 1e-8:
            raise ComputeError(
                f"square-root POVM leaves abort element indefinite by {self.povm_deviation:.3e}"
            )

    @property
    def size(self):
        return len(self.omegas)

    def outcome_probabilities(self, state_matrix):
        """Probabilities of each position plus the abort outcome (last)."""
        probs = [float(np.real(np.trace(om @ state_matrix))) for om in self.omegas]
        probs.append(float(np.real(np.trace(self.abort @ state_matrix))))
        return probs

    def success_probability(self, state_matrix, outcome):
        return float(np.real(np.trace(self.omegas[outcome] @ state_matrix)))

    def chain_bound(self, state_matrix, outcome):
        """Pretty-good error chain 2(1 - Tr Lambda_j rho) + 4 sum_{j'!=j} Tr Lambda_j' rho."""
        hit = float(np.real(np.trace(self.lambdas[outcome] @ state_matrix)))
        cross = 0.0
        for j, lam in enumerate(self.lambdas):
            if j != outcome:
                cross += float(np.real(np.trace(lam @ state_matrix)))
        return 2.0 * (1.0 - hit) + 4.0 * cross

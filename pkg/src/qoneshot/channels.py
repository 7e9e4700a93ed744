"""CPTP maps in Kraus form, Choi conversion, and standard constructions."""

import numpy as np

from .errors import BadParam, NotCPTP, NotPSD, ShapeMismatch
from .linalg import SUPPORT_CUTOFF, TOL_CPTP, eigh_desc
from .registers import RegisterLayout
from .states import DensityOperator, _permute_matrix, embed_operator


class KrausChannel:
    """A completely positive trace preserving map given by Kraus operators.

    input_layout / output_layout carry the register structure of the channel's
    own legs; `apply` matches them against a state's registers by target label.
    """

    def __init__(self, kraus, input_layout, output_layout, check=True):
        self.input_layout = input_layout
        self.output_layout = output_layout
        din, dout = input_layout.total_dim, output_layout.total_dim
        ops = [np.asarray(k, dtype=complex) for k in kraus]
        if not ops:
            raise BadParam("channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (dout, din):
                raise ShapeMismatch(f"Kraus shape {k.shape}, expected {(dout, din)}")
        self.kraus = ops
        if check:
            acc = sum(k.conj().T @ k for k in ops)
            dev = float(np.max(np.abs(acc - np.eye(din))))
            if dev > TOL_CPTP * max(1.0, float(np.max(np.abs(acc)))):
                raise NotCPTP(f"sum K^.K deviates from identity by {dev:.3e}", deviation=dev)

    @property
    def dim_in(self):
        return self.input_layout.total_dim

    @property
    def dim_out(self):
        return self.output_layout.total_dim

    def apply_matrix(self, mat):
        """Apply to a raw matrix living exactly on input_layout."""
        return sum(k @ mat @ k.conj().T for k in self.kraus)

    def apply(self, rho, targets=None, output_labels=None):
        """Apply the channel to `targets` (ordered labels) inside `rho`.

        The remaining registers ride along unchanged. Output registers take
        the channel's own output labels (or `output_labels` overrides) and are
        placed where the first target register sat.
        """
        targets = list(targets) if targets is not None else list(self.input_layout.labels)
        lay = rho.layout
        for t, d in zip(targets, self.input_layout.dims):
            if lay.dim_of(t) != d:
                raise ShapeMismatch(
                    f"target {t!r} has dim {lay.dim_of(t)}, channel leg needs {d}"
                )
        if len(targets) != len(self.input_layout):
            raise ShapeMismatch(
                f"{len(targets)} target labels for {len(self.input_layout)} channel legs"
            )
        out_labels = list(output_labels) if output_labels is not None else list(
            self.output_layout.labels
        )
        if len(out_labels) != len(self.output_layout):
            raise ShapeMismatch("output label count mismatch")
        for ol in out_labels:
            if ol in lay.complement(targets):
                raise BadParam(f"output label {ol!r} collides with a spectator register")

        rest = [l for l in lay.labels if l not in targets]
        perm_state = rho.permuted(targets + rest)
        d_rest = int(np.prod([lay.dim_of(l) for l in rest], dtype=object)) if rest else 1
        out = np.zeros((self.dim_out * d_rest,) * 2, dtype=complex)
        m = perm_state.matrix
        for k in self.kraus:
            big = np.kron(k, np.eye(d_rest))
            out += big @ m @ big.conj().T
        # output labels land at the position of the first consumed register
        anchor = min(lay.index(t) for t in targets)
        before = [l for l in lay.labels if l not in targets and lay.index(l) < anchor]
        after = [l for l in rest if l not in before]
        new_labels = before + out_labels + after
        cur_labels = out_labels + rest
        cur_dims = list(self.output_layout.dims) + [lay.dim_of(l) for l in rest]
        perm = [cur_labels.index(l) for l in new_labels]
        out = _permute_matrix(out, cur_dims, perm)
        new_dims = tuple(
            self.output_layout.dims[out_labels.index(l)] if l in out_labels else lay.dim_of(l)
            for l in new_labels
        )
        new_lay = RegisterLayout(tuple(new_labels), new_dims).guard("channel output")
        return DensityOperator(out, new_lay, require_normalized=False, validate=False)

    def tensor(self, other):
        """Parallel composition; legs are concatenated in order."""
        in_lay = self.input_layout.concat(other.input_layout)
        out_lay = self.output_layout.concat(other.output_layout)
        kraus = [np.kron(a, b) for a in self.kraus for b in other.kraus]
        return KrausChannel(kraus, in_lay, out_lay, check=False)

    def to_json(self):
        return {
            "input": self.input_layout.to_json(),
            "output": self.output_layout.to_json(),
            "kraus": [
                [[[float(z.real), float(z.imag)] for z in row] for row in k] for k in self.kraus
            ],
        }


def choi_from_kraus(channel):
    """Unnormalized Choi operator sum_ij |i><j| (x) N(|i><j|)."""
    din, dout = channel.dim_in, channel.dim_out
    c = np.zeros((din * dout, din * dout), dtype=complex)
    for k in channel.kraus:
        w = k.T.reshape(-1)  # sum_i |i> (x) K|i>
        c += np.outer(w, w.conj())
    return c


def kraus_from_choi(choi, input_layout, output_layout, check=True):
    din, dout = input_layout.total_dim, output_layout.total_dim
    c = np.asarray(choi, dtype=complex)
    if c.shape != (din * dout, din * dout):
        raise ShapeMismatch(f"Choi shape {c.shape}, expected {(din * dout,) * 2}")
    es = eigh_desc(c, check=True, what="Choi matrix")
    lam = es.eigenvalues
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    if lam.size and float(lam[-1]) < -1e-9 * max(1.0, top):
        raise NotPSD(f"Choi matrix has eigenvalue {lam[-1]:.3e}", min_eigenvalue=float(lam[-1]))
    kraus = []
    for i in range(lam.shape[0]):
        if lam[i] > SUPPORT_CUTOFF * max(top, 1e-300):
            vec = es.eigenvectors[:, i] * np.sqrt(lam[i])
            kraus.append(vec.reshape(din, dout).T.copy())
    return KrausChannel(kraus, input_layout, output_layout, check=check)


# ---------------------------------------------------------------------------
# standard channels


def _leg(label, d):
    return RegisterLayout((label,), (d,))


def identity_channel(d, in_label="A", out_label="B"):
    return KrausChannel([np.eye(d)], _leg(in_label, d), _leg(out_label, d), check=False)


def depolarizing(d, p, in_label="A", out_label="B"):
    """rho -> (1-p) rho + p I/d."""
    if not 0.0 <= p <= 1.0:
        raise BadParam(f"depolarizing probability {p} outside [0, 1]")
    kraus = [np.sqrt(1.0 - p) * np.eye(d)]
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[i, j] = np.sqrt(p / d)
            kraus.append(k)
    return KrausChannel(kraus, _leg(in_label, d), _leg(out_label, d), check=False)


def dephasing(p, in_label="A", out_label="B"):
    """Qubit map rho -> (1-p) rho + p diag(rho)."""
    if not 0.0 <= p <= 1.0:
        raise BadParam(f"dephasing probability {p} outside [0, 1]")
    kraus = [np.sqrt(1.0 - p) * np.eye(2)]
    for i in range(2):
        k = np.zeros((2, 2), dtype=complex)
        k[i, i] = np.sqrt(p)
        kraus.append(k)
    return KrausChannel(kraus, _leg(in_label, 2), _leg(out_label, 2), check=False)


def amplitude_damping(gamma, in_label="A", out_label="B"):
    if not 0.0 <= gamma <= 1.0:
        raise BadParam(f"damping rate {gamma} outside [0, 1]")
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    return KrausChannel([k0, k1], _leg(in_label, 2), _leg(out_label, 2), check=False)


def classical_channel(stochastic, in_label="A", out_label="B"):
    """Measure-and-prepare map from a column-stochastic matrix S[out, in]."""
    s = np.asarray(stochastic, dtype=float)
    if s.ndim != 2:
        raise ShapeMismatch("stochastic matrix must be 2-D")
    if np.any(s < -1e-12):
        raise BadParam("stochastic entries must be nonnegative")
    col = np.sum(s, axis=0)
    if np.max(np.abs(col - 1.0)) > 1e-9:
        raise NotCPTP(
            f"columns must sum to 1 (max deviation {float(np.max(np.abs(col - 1.0))):.3e})",
            deviation=float(np.max(np.abs(col - 1.0))),
        )
    dout, din = s.shape
    kraus = []
    for i in range(dout):
        for j in range(din):
            if s[i, j] > 0.0:
                k = np.zeros((dout, din), dtype=complex)
                k[i, j] = np.sqrt(s[i, j])
                kraus.append(k)
    return KrausChannel(kraus, _leg(in_label, din), _leg(out_label, dout), check=False)


def erasure(p, in_label="A", out_label="B"):
    """Qubit-to-qutrit erasure; |2> is the flag state."""
    if not 0.0 <= p <= 1.0:
        raise BadParam(f"erasure probability {p} outside [0, 1]")
    keep = np.zeros((3, 2), dtype=complex)
    keep[0, 0] = keep[1, 1] = np.sqrt(1.0 - p)
    e0 = np.zeros((3, 2), dtype=complex)
    e0[2, 0] = np.sqrt(p)
    e1 = np.zeros((3, 2), dtype=complex)
    e1[2, 1] = np.sqrt(p)
    return KrausChannel([keep, e0, e1], _leg(in_label, 2), _leg(out_label, 3), check=False)


_BUILTINS = {
    "identity": (identity_channel, ("d",)),
    "depolarizing": (depolarizing, ("d", "p")),
    "dephasing": (dephasing, ("p",)),
    "amplitude_damping": (amplitude_damping, ("gamma",)),
    "classical": (classical_channel, ("stochastic",)),
    "erasure": (erasure, ("p",)),
}


def builtin_channel(name, **params):
    if name not in _BUILTINS:
        raise BadParam(f"unknown builtin channel {name!r}; have {sorted(_BUILTINS)}")
    fn, required = _BUILTINS[name]
    missing = [r for r in required if r not in params]
    if missing:
        raise BadParam(f"builtin {name!r} missing parameters {missing}")
    return fn(**params)


def channel_from_json(data):
    if not isinstance(data, dict):
        raise BadParam("channel JSON must be an object")
    if "builtin" in data:
        params = dict(data.get("params", {}))
        ch = builtin_channel(data["builtin"], **params)
        if "input_labels" in data:
            ch.input_layout = ch.input_layout.relabeled(
                dict(zip(ch.input_layout.labels, data["input_labels"]))
            )
        if "output_labels" in data:
            ch.output_layout = ch.output_layout.relabeled(
                dict(zip(ch.output_layout.labels, data["output_labels"]))
            )
        return ch
    if "input" not in data or "output" not in data:
        raise BadParam("channel JSON needs 'input' and 'output' layouts")
    lin = RegisterLayout.from_json(data["input"])
    lout = RegisterLayout.from_json(data["output"])
    if "kraus" in data:
        kraus = [
            np.asarray([[complex(c[0], c[1]) for c in row] for row in k], dtype=complex)
            for k in data["kraus"]
        ]
        return KrausChannel(kraus, lin, lout)
    if "choi" in data:
        choi = np.asarray(
            [[complex(c[0], c[1]) for c in row] for row in data["choi"]], dtype=complex
        )
        return kraus_from_choi(choi, lin, lout)
    raise BadParam("channel JSON needs 'kraus', 'choi', or 'builtin'")


def apply_to_pure(channel, psi, targets=None, output_labels=None):
    """Channel applied to a pure state; returns a DensityOperator."""
    return channel.apply(psi.density(), targets=targets, output_labels=output_labels)


__all__ = [
    "KrausChannel",
    "choi_from_kraus",
    "kraus_from_choi",
    "identity_channel",
    "depolarizing",
    "dephasing",
    "amplitude_damping",
    "classical_channel",
    "erasure",
    "builtin_channel",
    "channel_from_json",
    "apply_to_pure",
    "embed_operator",
]

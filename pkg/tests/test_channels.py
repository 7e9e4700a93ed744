import numpy as np
import pytest
from hypothesis import given, strategies as st

from qoneshot import (
    BadParam,
    DensityOperator,
    KrausChannel,
    NotCPTP,
    NotPSD,
    RegisterLayout,
    ShapeMismatch,
    amplitude_damping,
    apply_to_pure,
    basis_ket,
    builtin_channel,
    channel_from_json,
    choi_from_kraus,
    classical_channel,
    d_max,
    dephasing,
    depolarizing,
    erasure,
    hypothesis_testing_divergence,
    identity_channel,
    kraus_from_choi,
    maximally_entangled,
    maximally_mixed,
    tensor,
)
from oracles import apply_via_choi, rand_density, rand_kraus

np_rng = np.random.default_rng(20240817)

QUBIT = RegisterLayout.of(("A", 2))


def _leg(label, d):
    return RegisterLayout.of((label, d))


# --- construction and validation ------------------------------------------------


def test_kraus_shape_checked():
    with pytest.raises(ShapeMismatch):
        KrausChannel([np.eye(3)], _leg("A", 2), _leg("B", 2))


def test_non_trace_preserving_rejected():
    with pytest.raises(NotCPTP):
        KrausChannel([np.diag([1.0, 0.5])], _leg("A", 2), _leg("B", 2))


def test_empty_kraus_rejected():
    with pytest.raises(BadParam):
        KrausChannel([], _leg("A", 2), _leg("B", 2))


def test_classical_channel_column_sums_checked():
    with pytest.raises(NotCPTP):
        classical_channel([[0.9, 0.2], [0.2, 0.8]])
    with pytest.raises(BadParam):
        classical_channel([[1.1, 0.0], [-0.1, 1.0]])


def test_builtin_unknown_name_and_missing_params():
    with pytest.raises(BadParam):
        builtin_channel("teleport")
    with pytest.raises(BadParam):
        builtin_channel("depolarizing", d=2)


# --- fixed examples -----------------------------------------------------------------


def test_full_dephasing_kills_bell_coherences():
    bell = maximally_entangled(2, "A", "B").density()
    out = dephasing(1.0).apply(bell, targets=["A"], output_labels=["A"])
    assert np.allclose(out.matrix, np.diag([0.5, 0.0, 0.0, 0.5]))


def test_classical_channel_example():
    rho = DensityOperator(np.diag([1.0, 0.0]).astype(complex), QUBIT)
    out = classical_channel([[0.9, 0.2], [0.1, 0.8]]).apply(rho)
    assert np.allclose(np.diag(out.matrix).real, [0.9, 0.1])
    assert np.max(np.abs(out.matrix - np.diag(np.diag(out.matrix)))) < 1e-12


def test_identity_choi_is_unnormalized_bell():
    c = choi_from_kraus(identity_channel(2))
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[0, 3] = expected[3, 0] = expected[3, 3] = 1.0
    assert np.allclose(c, expected)
    # = 2 * Phi_2
    phi = maximally_entangled(2, "A", "B").density().matrix
    assert np.allclose(c, 2.0 * phi)


def test_full_depolarizing_outputs_maximally_mixed():
    rho = rand_density(np_rng, 3)
    out = depolarizing(3, 1.0).apply(rho)
    assert np.allclose(out.matrix, np.eye(3) / 3)


def test_depolarizing_fixed_point():
    out = depolarizing(4, 0.37).apply(maximally_mixed(4, "A"))
    assert np.allclose(out.matrix, np.eye(4) / 4)


def test_full_amplitude_damping_resets_to_ground():
    rho = rand_density(np_rng, 2)
    out = amplitude_damping(1.0).apply(rho)
    assert np.allclose(out.matrix, np.diag([1.0, 0.0]))


def test_erasure_flag_probability():
    rho = rand_density(np_rng, 2)
    out = erasure(0.3).apply(rho)
    assert out.dim == 3
    assert abs(out.matrix[2, 2].real - 0.3) < 1e-12
    assert np.allclose(out.matrix[:2, :2], 0.7 * rho.matrix)


# --- CPTP invariants ------------------------------------------------------------------


def test_trace_preserved_on_random_states():
    channels = [
        depolarizing(2, 0.3),
        dephasing(0.6),
        amplitude_damping(0.4),
        erasure(0.2),
        classical_channel([[0.7, 0.1], [0.3, 0.9]]),
    ]
    for ch in channels:
        for _ in range(20):
            rho = rand_density(np_rng, ch.dim_in)
            out = ch.apply(rho)
            assert abs(out.trace - 1.0) < 1e-9
            assert np.min(np.linalg.eigvalsh(out.matrix)) > -1e-9


def test_linearity():
    ch = amplitude_damping(0.35)
    for _ in range(20):
        a, b = rand_density(np_rng, 2), rand_density(np_rng, 2)
        t = np_rng.uniform()
        mix = DensityOperator(t * a.matrix + (1 - t) * b.matrix, QUBIT)
        lhs = ch.apply(mix).matrix
        rhs = t * ch.apply(a).matrix + (1 - t) * ch.apply(b).matrix
        assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_random_stinespring_channel_is_cptp():
    for din, dout, env in [(2, 2, 2), (3, 2, 4), (2, 4, 3)]:
        kraus = rand_kraus(np_rng, din, dout, env)
        ch = KrausChannel(kraus, _leg("A", din), _leg("B", dout))
        rho = rand_density(np_rng, din)
        out = ch.apply(rho)
        assert abs(out.trace - 1.0) < 1e-10
        assert np.min(np.linalg.eigvalsh(out.matrix)) > -1e-10


# --- choi round trips --------------------------------------------------------------------


def test_choi_trace_equals_input_dim():
    for ch in [depolarizing(3, 0.5), amplitude_damping(0.2), erasure(0.4)]:
        assert abs(np.trace(choi_from_kraus(ch)).real - ch.dim_in) < 1e-10


def test_choi_reproduces_action():
    kraus = rand_kraus(np_rng, 3, 2, 3)
    ch = KrausChannel(kraus, _leg("A", 3), _leg("B", 2))
    choi = choi_from_kraus(ch)
    for _ in range(5):
        rho = rand_density(np_rng, 3)
        assert np.max(np.abs(ch.apply(rho).matrix - apply_via_choi(choi, 3, 2, rho.matrix))) < 1e-10


def test_kraus_choi_kraus_round_trip():
    kraus = rand_kraus(np_rng, 2, 3, 2)
    ch = KrausChannel(kraus, _leg("A", 2), _leg("B", 3))
    back = kraus_from_choi(choi_from_kraus(ch), _leg("A", 2), _leg("B", 3))
    for _ in range(5):
        rho = rand_density(np_rng, 2)
        assert np.max(np.abs(ch.apply(rho).matrix - back.apply(rho).matrix)) < 1e-9


def test_kraus_from_choi_rejects_non_psd():
    with pytest.raises(NotPSD):
        kraus_from_choi(np.diag([1.0, 1.0, 1.0, -0.5]), _leg("A", 2), _leg("B", 2))


# --- applying to parts of larger systems ---------------------------------------------------


def test_apply_to_middle_register_leaves_spectators():
    a = rand_density(np_rng, 2, label="A")
    b = rand_density(np_rng, 2, label="B")
    c = rand_density(np_rng, 3, label="C")
    rho = tensor(tensor(a, b), c)
    ch = amplitude_damping(0.5)
    out = ch.apply(rho, targets=["B"], output_labels=["B"])
    assert out.layout.labels == ("A", "B", "C")
    expected = tensor(tensor(a, ch.apply(b, targets=["B"], output_labels=["B"])), c)
    assert np.max(np.abs(out.matrix - expected.matrix)) < 1e-12


def test_output_label_collision_with_spectator():
    bell = maximally_entangled(2, "A", "B").density()
    with pytest.raises(BadParam):
        dephasing(0.5).apply(bell, targets=["A"], output_labels=["B"])


def test_apply_changes_register_dim():
    bell = maximally_entangled(2, "A", "B").density()
    out = erasure(0.5).apply(bell, targets=["A"], output_labels=["A"])
    assert out.layout.dim_of("A") == 3
    assert out.layout.dim_of("B") == 2
    assert abs(out.trace - 1.0) < 1e-12


def test_tensor_of_channels_factorizes():
    ch1 = amplitude_damping(0.3, "A", "A")
    ch2 = dephasing(0.7, "B", "B")
    joint = ch1.tensor(ch2)
    a = rand_density(np_rng, 2, label="A")
    b = rand_density(np_rng, 2, label="B")
    lhs = joint.apply(tensor(a, b)).matrix
    rhs = tensor(ch1.apply(a), ch2.apply(b)).matrix
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_apply_to_pure_matches_density_route():
    psi = maximally_entangled(2, "A", "B")
    ch = amplitude_damping(0.25)
    out = apply_to_pure(ch, psi, targets=["A"], output_labels=["A"])
    ref = ch.apply(psi.density(), targets=["A"], output_labels=["A"])
    assert np.max(np.abs(out.matrix - ref.matrix)) < 1e-12


# --- divergences cannot increase under channels ----------------------------------------------


def test_dmax_monotone_under_builtin_channels():
    channels = [
        depolarizing(2, 0.3),
        dephasing(0.4),
        amplitude_damping(0.25),
        classical_channel([[0.8, 0.3], [0.2, 0.7]]),
    ]
    for ch in channels:
        for _ in range(10):
            rho, sigma = rand_density(np_rng, 2), rand_density(np_rng, 2)
            before = d_max(rho, sigma)
            after = d_max(ch.apply(rho), ch.apply(sigma))
            assert after <= before + 1e-6


def test_dh_monotone_under_builtin_channels():
    channels = [depolarizing(2, 0.3), dephasing(0.4), amplitude_damping(0.25)]
    for ch in channels:
        for _ in range(10):
            rho, sigma = rand_density(np_rng, 2), rand_density(np_rng, 2)
            before = hypothesis_testing_divergence(rho, sigma, 0.75).value_bits
            after = hypothesis_testing_divergence(ch.apply(rho), ch.apply(sigma), 0.75).value_bits
            assert after <= before + 1e-6


# --- json -----------------------------------------------------------------------------------


def test_channel_json_round_trip_exact():
    ch = amplitude_damping(0.3)
    back = channel_from_json(ch.to_json())
    rho = rand_density(np_rng, 2)
    assert np.max(np.abs(ch.apply(rho).matrix - back.apply(rho).matrix)) < 1e-15


def test_channel_json_builtin_form():
    ch = channel_from_json(
        {"builtin": "depolarizing", "params": {"d": 2, "p": 0.5}, "input_labels": ["X"], "output_labels": ["Y"]}
    )
    assert ch.input_layout.labels == ("X",)
    assert ch.output_layout.labels == ("Y",)
    rho = rand_density(np_rng, 2, label="X")
    out = ch.apply(rho)
    assert np.allclose(out.matrix, 0.5 * rho.matrix + 0.25 * np.eye(2))


def test_channel_json_bad_payload():
    with pytest.raises(BadParam):
        channel_from_json({"input": [{"label": "A", "dim": 2}]})
    with pytest.raises(BadParam):
        channel_from_json([1, 2, 3])


# --- property checks ---------------------------------------------------------------------------


@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(2, 3), st.integers(1, 3))
def test_random_channel_trace_preserving(seed, din, dout, env):
    rng = np.random.default_rng(seed)
    ch = KrausChannel(rand_kraus(rng, din, dout, env), _leg("A", din), _leg("B", dout))
    out = ch.apply(rand_density(rng, din))
    assert abs(out.trace - 1.0) < 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_depolarizing_interpolates(seed, p):
    rng = np.random.default_rng(seed)
    rho = rand_density(rng, 2)
    out = depolarizing(2, p).apply(rho)
    assert np.max(np.abs(out.matrix - ((1 - p) * rho.matrix + p * np.eye(2) / 2))) < 1e-12


def test_basis_state_through_classical_channel_matches_column():
    s = np.array([[0.2, 0.5, 0.0], [0.3, 0.25, 0.9], [0.5, 0.25, 0.1]])
    ch = classical_channel(s, "A", "B")
    for j in range(3):
        ket = basis_ket(RegisterLayout.of(("A", 3)), [j]).density()
        out = ch.apply(ket)
        assert np.allclose(np.diag(out.matrix).real, s[:, j])
